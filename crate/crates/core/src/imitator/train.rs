//! Segment-based training of the neural ODE on expert demonstrations.
//!
//! Each iteration draws one random segment per demonstration, unrolls the
//! model from the segment's first state, sums squared deviations against the
//! recorded states, and backpropagates through the unrolled integrator.
//! Segments are processed in parallel but reduced in demonstration order, so
//! training is bitwise reproducible for a given seed.

use super::mlp::{Adam, MlpGrads, MlpParams};
use super::ode::{self, Integrator, StepCache, STATE_DIM};
use super::{ImitatorError, NodeModel};
use crate::geom3d::UnitQuaternion;
use crate::{seeds, Real};
use rand::Rng;
use rayon::prelude::*;

/// Expert state sequences, all sharing one anchor orientation and sample
/// period. `states[d][t]` is the 10-dimensional task state of demo `d` at
/// frame `t`.
#[derive(Debug, Clone)]
pub struct Demonstrations<T> {
    pub states: Vec<Vec<[T; STATE_DIM]>>,
    pub dt: T,
    pub anchor: UnitQuaternion<T>,
    pub task: String,
}

impl<T: Real> Demonstrations<T> {
    pub fn validate(&self, segment_len: usize) -> Result<(), ImitatorError> {
        if self.states.is_empty() {
            return Err(ImitatorError::BadDemo("no demonstrations".into()));
        }
        for (d, s) in self.states.iter().enumerate() {
            if s.len() <= segment_len {
                return Err(ImitatorError::BadDemo(format!(
                    "demo {d} has {} frames, need more than the segment length {segment_len}",
                    s.len()
                )));
            }
        }
        if !(self.dt > T::zero()) {
            return Err(ImitatorError::BadDemo("non-positive dt".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig<T> {
    pub sizes: Vec<usize>,
    pub iterations: usize,
    pub lr: T,
    pub segment_len: usize,
    pub integrator: Integrator,
}

impl<T: Real> Default for TrainConfig<T> {
    fn default() -> Self {
        TrainConfig {
            sizes: vec![STATE_DIM, 256, 256, STATE_DIM],
            iterations: 20_000,
            lr: T::of(5e-4),
            segment_len: 20,
            integrator: Integrator::Euler,
        }
    }
}

pub struct TrainResult<T> {
    pub model: NodeModel<T>,
    /// Total segment loss per iteration (pre-update).
    pub loss_curve: Vec<f64>,
}

/// One `(demo, start)` pair per demonstration; the segment spans frames
/// `start ..= start + segment_len`.
pub fn sample_segments<T: Real>(
    demos: &Demonstrations<T>,
    segment_len: usize,
    rng: &mut impl Rng,
) -> Vec<(usize, usize)> {
    demos
        .states
        .iter()
        .enumerate()
        .map(|(d, s)| (d, rng.random_range(0..s.len() - segment_len)))
        .collect()
}

/// Loss and gradient over one segment.
fn segment_backward<T: Real>(
    params: &MlpParams<T>,
    demos: &Demonstrations<T>,
    (d, start): (usize, usize),
    segment_len: usize,
    integrator: Integrator,
) -> Result<(T, MlpGrads<T>), ImitatorError> {
    let truth = &demos.states[d][start..=start + segment_len];
    let dt = demos.dt;
    let mut caches: Vec<StepCache<T>> = (0..segment_len).map(|_| StepCache::new(integrator)).collect();
    let mut xs: Vec<[T; STATE_DIM]> = Vec::with_capacity(segment_len + 1);
    xs.push(truth[0]);
    let mut loss = T::zero();
    for (t, cache) in caches.iter_mut().enumerate() {
        let next = ode::step_cached(params, &xs[t], dt, integrator, cache);
        if next.iter().any(|v| !v.is_finite() || v.abs() > ode::blowup_limit()) {
            return Err(ImitatorError::Blowup { context: "training unroll", index: t });
        }
        let mut half = T::zero();
        for i in 0..STATE_DIM {
            let e = next[i] - truth[t + 1][i];
            half += e * e;
        }
        loss += half * T::of(0.5);
        xs.push(next);
    }
    let mut grads = MlpGrads::zeros_like(params);
    let mut scratch = Vec::new();
    let mut a = [T::zero(); STATE_DIM];
    for t in (1..=segment_len).rev() {
        for i in 0..STATE_DIM {
            a[i] += xs[t][i] - truth[t][i];
        }
        a = ode::step_vjp(params, &caches[t - 1], dt, integrator, &a, &mut grads, &mut scratch);
    }
    Ok((loss, grads))
}

/// Total loss and summed gradient over the given segments. Parallel across
/// segments; the reduction order is the segment order, not thread order.
pub fn node_loss<T: Real>(
    params: &MlpParams<T>,
    demos: &Demonstrations<T>,
    segments: &[(usize, usize)],
    segment_len: usize,
    integrator: Integrator,
) -> Result<(T, MlpGrads<T>), ImitatorError> {
    let parts: Vec<Result<(T, MlpGrads<T>), ImitatorError>> = segments
        .par_iter()
        .map(|seg| segment_backward(params, demos, *seg, segment_len, integrator))
        .collect();
    let mut total = T::zero();
    let mut grads = MlpGrads::zeros_like(params);
    for part in parts {
        let (l, g) = part?;
        total += l;
        grads.add_from(&g);
    }
    Ok((total, grads))
}

/// Trains a fresh model; `on_iter` observes `(iteration, loss)` and is how
/// the CLI reports progress.
pub fn train_with<T: Real>(
    demos: &Demonstrations<T>,
    cfg: &TrainConfig<T>,
    seed: u64,
    mut on_iter: impl FnMut(usize, f64),
) -> Result<TrainResult<T>, ImitatorError> {
    demos.validate(cfg.segment_len)?;
    if cfg.sizes.first() != Some(&STATE_DIM) || cfg.sizes.last() != Some(&STATE_DIM) {
        return Err(ImitatorError::BadDemo(format!(
            "network must map {STATE_DIM} -> {STATE_DIM}, got {:?}",
            cfg.sizes
        )));
    }
    let mut params = MlpParams::init(&cfg.sizes, &mut seeds::stream(seed, "imitator/init"));
    let mut seg_rng = seeds::stream(seed, "imitator/segments");
    let mut adam = Adam::new(&params, cfg.lr);
    let mut curve = Vec::with_capacity(cfg.iterations);
    for it in 0..cfg.iterations {
        let segments = sample_segments(demos, cfg.segment_len, &mut seg_rng);
        let (loss, grads) =
            node_loss(&params, demos, &segments, cfg.segment_len, cfg.integrator).map_err(|e| {
                match e {
                    ImitatorError::Blowup { context, .. } => {
                        ImitatorError::Blowup { context, index: it }
                    }
                    other => other,
                }
            })?;
        adam.step(&mut params, &grads);
        let l = loss.to_f64().unwrap_or(f64::NAN);
        curve.push(l);
        on_iter(it, l);
    }
    Ok(TrainResult {
        model: NodeModel {
            mlp: params,
            integrator: cfg.integrator,
            dt: demos.dt,
            anchor: demos.anchor,
            pos_scale: T::of(100.0),
            rot_scale: T::of(100.0),
        },
        loss_curve: curve,
    })
}

pub fn train<T: Real>(
    demos: &Demonstrations<T>,
    cfg: &TrainConfig<T>,
    seed: u64,
) -> Result<TrainResult<T>, ImitatorError> {
    train_with(demos, cfg, seed, |_, _| {})
}
