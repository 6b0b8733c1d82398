//! Result persistence and aggregation: the per-trial results table, the
//! per-trial error-norm series for plotting, and the grouped summary.

use super::{HarnessError, Scheme, Termination, TrialResult};
use crate::simworld::{PositionId, TaskId};
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

pub const RESULTS_HEADER: &str =
    "task,scheme,position,trial,steps,eta_final,delta,epsilon,success,termination";

/// One line of the results table; what a trial reduces to once the series
/// is split off for plotting.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub task: TaskId,
    pub scheme: Scheme,
    pub position: PositionId,
    pub trial: usize,
    pub steps: usize,
    pub eta_final: f64,
    pub delta: Option<f64>,
    pub epsilon: f64,
    pub success: Option<f64>,
    pub termination: Termination,
}

impl TrialResult {
    pub fn to_row(&self) -> ResultRow {
        ResultRow {
            task: self.task,
            scheme: self.scheme,
            position: self.position,
            trial: self.trial,
            steps: self.steps,
            eta_final: self.eta_final,
            delta: self.delta,
            epsilon: self.epsilon,
            success: self.success,
            termination: self.termination,
        }
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x}")).unwrap_or_default()
}

/// One table line, without trailing newline. `{}` float formatting
/// round-trips f64 exactly, so a re-read table carries the same values.
pub fn format_result_row(r: &ResultRow) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{},{}",
        r.task,
        r.scheme,
        r.position,
        r.trial,
        r.steps,
        r.eta_final,
        opt(r.delta),
        r.epsilon,
        opt(r.success),
        r.termination,
    )
}

/// Writes the results table, header first.
pub fn write_results_csv<W: Write>(w: &mut W, rows: &[ResultRow]) -> Result<(), HarnessError> {
    let io = |e: std::io::Error| HarnessError::Io(e.to_string());
    writeln!(w, "{RESULTS_HEADER}").map_err(io)?;
    for r in rows {
        writeln!(w, "{}", format_result_row(r)).map_err(io)?;
    }
    Ok(())
}

pub fn read_results_csv<R: BufRead>(r: R) -> Result<Vec<ResultRow>, HarnessError> {
    let mut rows = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| HarnessError::Io(e.to_string()))?;
        if lineno == 1 {
            if line != RESULTS_HEADER {
                return Err(HarnessError::ResultsFormat {
                    line: 1,
                    msg: format!("expected header {RESULTS_HEADER:?}"),
                });
            }
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let bad = |msg: String| HarnessError::ResultsFormat { line: lineno, msg };
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 10 {
            return Err(bad(format!("expected 10 fields, got {}", fields.len())));
        }
        let opt_field = |s: &str, what: &str| -> Result<Option<f64>, HarnessError> {
            if s.is_empty() {
                Ok(None)
            } else {
                s.parse::<f64>()
                    .map(Some)
                    .map_err(|e| HarnessError::ResultsFormat {
                        line: lineno,
                        msg: format!("{what}: {e}"),
                    })
            }
        };
        rows.push(ResultRow {
            task: TaskId::from_str(fields[0]).map_err(&bad)?,
            scheme: Scheme::from_str(fields[1]).map_err(&bad)?,
            position: PositionId::from_str(fields[2]).map_err(&bad)?,
            trial: fields[3].parse().map_err(|e| bad(format!("trial: {e}")))?,
            steps: fields[4].parse().map_err(|e| bad(format!("steps: {e}")))?,
            eta_final: fields[5].parse().map_err(|e| bad(format!("eta_final: {e}")))?,
            delta: opt_field(fields[6], "delta")?,
            epsilon: fields[7].parse().map_err(|e| bad(format!("epsilon: {e}")))?,
            success: opt_field(fields[8], "success")?,
            termination: Termination::from_str(fields[9]).map_err(&bad)?,
        });
    }
    Ok(rows)
}

/// Writes one trial's error-norm trace as `step,eta` rows.
pub fn write_eta_series<W: Write>(w: &mut W, series: &[f64]) -> Result<(), HarnessError> {
    let io = |e: std::io::Error| HarnessError::Io(e.to_string());
    writeln!(w, "step,eta").map_err(io)?;
    for (k, eta) in series.iter().enumerate() {
        writeln!(w, "{k},{eta}").map_err(io)?;
    }
    Ok(())
}

/// Canonical file name for a trial's series next to the results table.
pub fn eta_series_filename(task: TaskId, scheme: Scheme, position: PositionId, trial: usize) -> String {
    format!("{task}_{scheme}_{position}_t{trial}_eta.csv")
}

/// Index-wise mean across several series, truncated to the shortest one.
pub fn mean_series(series: &[Vec<f64>]) -> Vec<f64> {
    let n = match series.iter().map(Vec::len).min() {
        Some(n) if n > 0 && !series.is_empty() => n,
        _ => return Vec::new(),
    };
    (0..n)
        .map(|k| series.iter().map(|s| s[k]).sum::<f64>() / series.len() as f64)
        .collect()
}

fn mean_ci(xs: &[f64]) -> Option<(f64, f64)> {
    if xs.is_empty() {
        return None;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return Some((mean, 0.0));
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    // Normal-approximation 95% interval on the mean.
    Some((mean, 1.96 * (var / n).sqrt()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupStats {
    pub n: usize,
    pub eta: Option<(f64, f64)>,
    pub epsilon: Option<(f64, f64)>,
    pub delta: Option<(f64, f64)>,
    pub success: Option<(f64, f64)>,
}

impl GroupStats {
    fn from_rows(rows: &[&ResultRow]) -> GroupStats {
        let pick = |f: &dyn Fn(&ResultRow) -> Option<f64>| -> Vec<f64> {
            rows.iter().filter_map(|r| f(r)).collect()
        };
        GroupStats {
            n: rows.len(),
            eta: mean_ci(&pick(&|r| Some(r.eta_final))),
            epsilon: mean_ci(&pick(&|r| Some(r.epsilon))),
            delta: mean_ci(&pick(&|r| r.delta)),
            success: mean_ci(&pick(&|r| r.success)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchemeSummary {
    pub scheme: Scheme,
    pub train: GroupStats,
    pub novel: GroupStats,
    pub overall: GroupStats,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub task: TaskId,
    pub schemes: Vec<SchemeSummary>,
}

impl Summary {
    /// Groups rows by scheme and by trained/novel object position. All rows
    /// must belong to one task.
    pub fn from_rows(rows: &[ResultRow]) -> Result<Summary, HarnessError> {
        let task = rows
            .first()
            .map(|r| r.task)
            .ok_or_else(|| HarnessError::Config("no result rows to summarize".into()))?;
        if rows.iter().any(|r| r.task != task) {
            return Err(HarnessError::Config("mixed tasks in one results table".into()));
        }
        let mut schemes = Vec::new();
        for scheme in Scheme::ALL {
            let of_scheme: Vec<&ResultRow> = rows.iter().filter(|r| r.scheme == scheme).collect();
            if of_scheme.is_empty() {
                continue;
            }
            let train: Vec<&ResultRow> =
                of_scheme.iter().copied().filter(|r| r.position.is_trained()).collect();
            let novel: Vec<&ResultRow> =
                of_scheme.iter().copied().filter(|r| !r.position.is_trained()).collect();
            schemes.push(SchemeSummary {
                scheme,
                train: GroupStats::from_rows(&train),
                novel: GroupStats::from_rows(&novel),
                overall: GroupStats::from_rows(&of_scheme),
            });
        }
        Ok(Summary { task, schemes })
    }
}

fn cell(v: Option<(f64, f64)>, prec: usize) -> String {
    match v {
        Some((m, ci)) => format!("{m:.prec$} ± {ci:.prec$}"),
        None => "-".into(),
    }
}

impl fmt::Display for Summary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "task: {}", self.task)?;
        writeln!(
            f,
            "{:<7} {:<8} {:>3}  {:<17} {:<17} {:<17} {:<15}",
            "scheme", "group", "n", "eta_final", "epsilon [rad]", "delta [m]", "success"
        )?;
        for s in &self.schemes {
            for (name, g) in [("train", &s.train), ("novel", &s.novel), ("overall", &s.overall)] {
                writeln!(
                    f,
                    "{:<7} {:<8} {:>3}  {:<17} {:<17} {:<17} {:<15}",
                    s.scheme.to_string(),
                    name,
                    g.n,
                    cell(g.eta, 4),
                    cell(g.epsilon, 4),
                    cell(g.delta, 4),
                    cell(g.success, 2),
                )?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::BufReader;

    fn row(scheme: Scheme, position: PositionId, trial: usize, eta: f64) -> ResultRow {
        ResultRow {
            task: TaskId::Cup,
            scheme,
            position,
            trial,
            steps: 700,
            eta_final: eta,
            delta: position.is_trained().then_some(0.01 * trial as f64),
            epsilon: 0.05,
            success: Some(1.0),
            termination: Termination::Completed,
        }
    }

    #[test]
    fn results_csv_round_trips_exactly() {
        let rows = vec![
            row(Scheme::Dvs, PositionId::Center, 1, 0.123456789012345),
            row(Scheme::Ildvs, PositionId::XPlus, 2, 1.0 / 3.0),
            ResultRow {
                delta: None,
                success: None,
                termination: Termination::DetectionLost,
                ..row(Scheme::Iil, PositionId::YMinus, 3, f64::NAN)
            },
        ];
        let mut buf = Vec::new();
        write_results_csv(&mut buf, &rows).unwrap();
        let back = read_results_csv(BufReader::new(buf.as_slice())).unwrap();
        assert_eq!(back.len(), 3);
        assert_eq!(back[0], rows[0]);
        assert_eq!(back[1], rows[1]);
        // NaN breaks PartialEq; compare the rest field-wise.
        assert!(back[2].eta_final.is_nan());
        assert_eq!(back[2].delta, None);
        assert_eq!(back[2].success, None);
        assert_eq!(back[2].termination, Termination::DetectionLost);
    }

    #[test]
    fn bad_header_and_bad_fields_report_line_numbers() {
        let text = "wrong,header\n";
        match read_results_csv(BufReader::new(text.as_bytes())) {
            Err(HarnessError::ResultsFormat { line: 1, .. }) => {}
            other => panic!("{other:?}"),
        }
        let text = format!("{RESULTS_HEADER}\ncup,dvs,center,1,700,0.1,,0.05,,completed\ncup,dvs,center,oops,700,0.1,,0.05,,completed\n");
        match read_results_csv(BufReader::new(text.as_bytes())) {
            Err(HarnessError::ResultsFormat { line: 3, msg }) => {
                assert!(msg.contains("trial"), "{msg}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn summary_matches_hand_computed_stats() {
        let rows = vec![
            row(Scheme::Dvs, PositionId::Center, 1, 0.1),
            row(Scheme::Dvs, PositionId::Center, 2, 0.3),
            row(Scheme::Dvs, PositionId::XPlus, 1, 0.5),
        ];
        let s = Summary::from_rows(&rows).unwrap();
        assert_eq!(s.task, TaskId::Cup);
        assert_eq!(s.schemes.len(), 1);
        let d = &s.schemes[0];
        assert_eq!(d.train.n, 2);
        assert_eq!(d.novel.n, 1);
        assert_eq!(d.overall.n, 3);
        let (m, ci) = d.train.eta.unwrap();
        assert!((m - 0.2).abs() < 1e-15);
        // sample sd = sqrt(0.02); ci = 1.96 * sd / sqrt(2)
        let want_ci = 1.96 * (0.02f64).sqrt() / (2f64).sqrt();
        assert!((ci - want_ci).abs() < 1e-12, "{ci} vs {want_ci}");
        let (nm, nci) = d.novel.eta.unwrap();
        assert_eq!(nm, 0.5);
        assert_eq!(nci, 0.0);
        // delta only aggregates trained rows even in `overall`.
        let (dm, _) = d.overall.delta.unwrap();
        assert!((dm - 0.015).abs() < 1e-15);
        assert!(d.novel.delta.is_none());
    }

    #[test]
    fn summary_rejects_empty_and_mixed_tables() {
        assert!(Summary::from_rows(&[]).is_err());
        let mut rows = vec![row(Scheme::Dvs, PositionId::Center, 1, 0.1)];
        rows.push(ResultRow { task: TaskId::Mouse, ..rows[0].clone() });
        assert!(Summary::from_rows(&rows).is_err());
    }

    #[test]
    fn mean_series_truncates_to_shortest() {
        let s = vec![vec![1.0, 2.0, 3.0], vec![3.0, 4.0]];
        assert_eq!(mean_series(&s), vec![2.0, 3.0]);
        assert!(mean_series(&[]).is_empty());
    }

    #[test]
    fn series_file_shape() {
        let mut buf = Vec::new();
        write_eta_series(&mut buf, &[0.5, 0.25]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "step,eta\n0,0.5\n1,0.25\n");
        assert_eq!(
            eta_series_filename(TaskId::Mouse, Scheme::Ildvs, PositionId::XPlus, 2),
            "mouse_ildvs_x+_t2_eta.csv"
        );
    }
}
