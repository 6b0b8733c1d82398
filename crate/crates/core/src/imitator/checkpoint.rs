//! Checkpoint file format for trained models.
//!
//! A checkpoint is a single JSON document with the fields below; all floats
//! are 64-bit, so saving and loading is lossless for `f64` models.
//!
//! | field         | meaning                                              |
//! |---------------|------------------------------------------------------|
//! | `format`      | `"node-imitator-v1"`, bumped on breaking changes     |
//! | `sizes`       | layer widths, first and last always 10               |
//! | `activations` | per layer, `"relu"` except a final `"linear"`        |
//! | `weights`     | per layer, row-major `out x in`                      |
//! | `biases`      | per layer                                            |
//! | `integrator`  | `"euler"` or `"rk4"`                                 |
//! | `dt`          | sample period the model was trained at (seconds)     |
//! | `anchor_wxyz` | goal orientation the tangent coordinates are about   |
//! | `pos_scale`   | metres-to-state scale for position (100 = cm)        |
//! | `rot_scale`   | tangent-coordinate scale (100)                       |
//! | `train`       | provenance: iterations, lr, segment length, seed,    |
//! |               | task name, final loss                                |

use super::mlp::MlpParams;
use super::ode::{Integrator, STATE_DIM};
use super::{ImitatorError, NodeModel};
use crate::geom3d::UnitQuaternion;
use crate::Real;
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::Path;

pub const FORMAT: &str = "node-imitator-v1";

/// Training provenance carried inside the checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainMeta {
    pub task: String,
    pub iterations: usize,
    pub lr: f64,
    pub segment_len: usize,
    pub seed: u64,
    pub final_loss: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct CheckpointFile {
    format: String,
    sizes: Vec<usize>,
    activations: Vec<String>,
    weights: Vec<Vec<f64>>,
    biases: Vec<Vec<f64>>,
    integrator: Integrator,
    dt: f64,
    anchor_wxyz: [f64; 4],
    pos_scale: f64,
    rot_scale: f64,
    train: TrainMeta,
}

pub fn save<T: Real>(path: &Path, model: &NodeModel<T>, meta: &TrainMeta) -> Result<(), ImitatorError> {
    let to64 = |v: &[T]| v.iter().map(|x| x.to_f64().unwrap()).collect::<Vec<f64>>();
    let file = CheckpointFile {
        format: FORMAT.to_string(),
        sizes: model.mlp.sizes().to_vec(),
        activations: model.mlp.activations().iter().map(|s| s.to_string()).collect(),
        weights: model.mlp.weights.iter().map(|w| to64(w)).collect(),
        biases: model.mlp.biases.iter().map(|b| to64(b)).collect(),
        integrator: model.integrator,
        dt: model.dt.to_f64().unwrap(),
        anchor_wxyz: model.anchor.wxyz().map(|x| x.to_f64().unwrap()),
        pos_scale: model.pos_scale.to_f64().unwrap(),
        rot_scale: model.rot_scale.to_f64().unwrap(),
        train: meta.clone(),
    };
    let mut text = serde_json::to_string(&file)
        .map_err(|e| ImitatorError::Checkpoint(format!("serializing: {e}")))?;
    text.push('\n');
    fs::write(path, text)
        .map_err(|e| ImitatorError::Checkpoint(format!("writing {}: {e}", path.display())))
}

pub fn load<T: Real>(path: &Path) -> Result<(NodeModel<T>, TrainMeta), ImitatorError> {
    let text = fs::read_to_string(path)
        .map_err(|e| ImitatorError::Checkpoint(format!("reading {}: {e}", path.display())))?;
    let file: CheckpointFile = serde_json::from_str(&text)
        .map_err(|e| ImitatorError::Checkpoint(format!("parsing {}: {e}", path.display())))?;
    if file.format != FORMAT {
        return Err(ImitatorError::Checkpoint(format!(
            "{}: format {:?}, expected {FORMAT:?}",
            path.display(),
            file.format
        )));
    }
    if file.sizes.first() != Some(&STATE_DIM) || file.sizes.last() != Some(&STATE_DIM) {
        return Err(ImitatorError::Checkpoint(format!(
            "{}: network must map {STATE_DIM} -> {STATE_DIM}, got {:?}",
            path.display(),
            file.sizes
        )));
    }
    let layers = file.sizes.len() - 1;
    if file.weights.len() != layers || file.biases.len() != layers || file.activations.len() != layers {
        return Err(ImitatorError::Checkpoint(format!(
            "{}: layer count mismatch",
            path.display()
        )));
    }
    for l in 0..layers {
        if file.weights[l].len() != file.sizes[l] * file.sizes[l + 1]
            || file.biases[l].len() != file.sizes[l + 1]
        {
            return Err(ImitatorError::Checkpoint(format!(
                "{}: layer {l} has inconsistent shapes",
                path.display()
            )));
        }
        let want = if l == layers - 1 { "linear" } else { "relu" };
        if file.activations[l] != want {
            return Err(ImitatorError::Checkpoint(format!(
                "{}: unsupported activation {:?} in layer {l}",
                path.display(),
                file.activations[l]
            )));
        }
    }
    if !(file.dt > 0.0) {
        return Err(ImitatorError::Checkpoint(format!(
            "{}: non-positive dt {}",
            path.display(),
            file.dt
        )));
    }
    let from64 = |v: &[f64]| v.iter().map(|x| T::of(*x)).collect::<Vec<T>>();
    let mlp = MlpParams::from_parts(
        file.sizes.clone(),
        file.weights.iter().map(|w| from64(w)).collect(),
        file.biases.iter().map(|b| from64(b)).collect(),
    );
    Ok((
        NodeModel {
            mlp,
            integrator: file.integrator,
            dt: T::of(file.dt),
            anchor: UnitQuaternion::from_wxyz(file.anchor_wxyz.map(T::of)),
            pos_scale: T::of(file.pos_scale),
            rot_scale: T::of(file.rot_scale),
        },
        file.train,
    ))
}
