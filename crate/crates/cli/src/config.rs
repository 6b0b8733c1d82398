//! Optional TOML configuration: one section per pipeline stage, every key
//! optional. Precedence is flag > file > built-in default, so a checked-in
//! config freezes a reproduction while still allowing overrides.

use crate::AppError;
use serde::Deserialize;
use std::path::Path;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    #[serde(default)]
    pub world: WorldSection,
    #[serde(default)]
    pub demo: DemoSection,
    #[serde(default)]
    pub gains: GainsSection,
    #[serde(default)]
    pub train: TrainSection,
    #[serde(default)]
    pub eval: EvalSection,
}

/// Scene placement and the detector noise shared by demo and evaluation.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorldSection {
    pub center_x: Option<f64>,
    pub center_y: Option<f64>,
    pub noise_px: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DemoSection {
    pub num: Option<usize>,
    pub steps: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GainsSection {
    pub lambda: Option<f64>,
    pub mu: Option<f64>,
    pub eta0: Option<f64>,
    pub eta1: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    pub iterations: Option<usize>,
    pub lr: Option<f64>,
    pub segment_len: Option<usize>,
    pub integrator: Option<String>,
    pub hidden: Option<Vec<usize>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalSection {
    pub horizon: Option<usize>,
    pub trials: Option<usize>,
    pub grid_spacing: Option<f64>,
    pub start_jitter: Option<f64>,
    pub z_hat: Option<f64>,
    pub noise_px: Option<f64>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<FileConfig, AppError> {
        let Some(path) = path else { return Ok(FileConfig::default()) };
        let text = std::fs::read_to_string(path)
            .map_err(|e| AppError::Usage(format!("config {}: {e}", path.display())))?;
        // toml's error display carries line/column context.
        toml::from_str(&text)
            .map_err(|e| AppError::Usage(format!("config {}: {e}", path.display())))
    }
}

/// Flag > file > default.
pub fn pick<T>(flag: Option<T>, file: Option<T>, default: T) -> T {
    flag.or(file).unwrap_or(default)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_and_partial_configs_parse() {
        let c: FileConfig = toml::from_str("").unwrap();
        assert!(c.train.iterations.is_none());
        let c: FileConfig =
            toml::from_str("[train]\niterations = 100\n\n[gains]\nlambda = 2.0\n").unwrap();
        assert_eq!(c.train.iterations, Some(100));
        assert_eq!(c.gains.lambda, Some(2.0));
        assert!(c.gains.mu.is_none());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = toml::from_str::<FileConfig>("[train]\niters = 5\n").unwrap_err();
        assert!(err.to_string().contains("iters"), "{err}");
    }

    #[test]
    fn pick_prefers_flag_then_file() {
        assert_eq!(pick(Some(1), Some(2), 3), 1);
        assert_eq!(pick(None, Some(2), 3), 2);
        assert_eq!(pick::<i32>(None, None, 3), 3);
    }
}
