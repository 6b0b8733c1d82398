//! Fixed-step integrators over the learned vector field, with hand-written
//! reverse passes. Training differentiates through the discrete unroll
//! (discretize-then-optimize), so forward and backward must describe exactly
//! the same computation; both live here to keep them in lockstep.

use super::mlp::{MlpCache, MlpGrads, MlpParams};
use super::ImitatorError;
use crate::Real;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

/// Learned task state: 4 appearance features, 3 position (cm),
/// 3 scaled orientation tangent coordinates.
pub const STATE_DIM: usize = 10;

/// States beyond this magnitude abort with a blowup error instead of
/// poisoning the run with infinities.
pub fn blowup_limit<T: Real>() -> T {
    T::of(1e6)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Integrator {
    Euler,
    Rk4,
}

impl fmt::Display for Integrator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Integrator::Euler => "euler",
            Integrator::Rk4 => "rk4",
        })
    }
}

impl FromStr for Integrator {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "euler" => Ok(Integrator::Euler),
            "rk4" => Ok(Integrator::Rk4),
            other => Err(format!("unknown integrator {other:?} (euler|rk4)")),
        }
    }
}

impl Integrator {
    pub fn stages(&self) -> usize {
        match self {
            Integrator::Euler => 1,
            Integrator::Rk4 => 4,
        }
    }
}

type State<T> = [T; STATE_DIM];

fn add_scaled<T: Real>(x: &State<T>, k: &[T], s: T) -> State<T> {
    let mut out = *x;
    for i in 0..STATE_DIM {
        out[i] += s * k[i];
    }
    out
}

/// Per-step scratch kept by the training unroll; one MLP cache per stage.
#[derive(Debug, Clone)]
pub struct StepCache<T> {
    stages: Vec<MlpCache<T>>,
}

impl<T: Real> StepCache<T> {
    pub fn new(integrator: Integrator) -> Self {
        StepCache { stages: vec![MlpCache::default(); integrator.stages()] }
    }

    /// Smallest hidden pre-activation magnitude over every stage evaluation;
    /// gradient checks use it to keep probes away from the ReLU kink.
    pub fn min_hidden_preact_abs(&self, layers: usize) -> T {
        self.stages
            .iter()
            .map(|c| c.min_hidden_preact_abs(layers))
            .fold(T::infinity(), |a, b| a.min(b))
    }
}

/// One integration step without caching.
pub fn step<T: Real>(params: &MlpParams<T>, x: &State<T>, dt: T, integrator: Integrator) -> State<T> {
    let mut cache = StepCache::new(integrator);
    step_cached(params, x, dt, integrator, &mut cache)
}

/// One integration step, keeping what the reverse pass needs.
pub fn step_cached<T: Real>(
    params: &MlpParams<T>,
    x: &State<T>,
    dt: T,
    integrator: Integrator,
    cache: &mut StepCache<T>,
) -> State<T> {
    debug_assert_eq!(cache.stages.len(), integrator.stages());
    match integrator {
        Integrator::Euler => {
            params.forward_cached(x, &mut cache.stages[0]);
            add_scaled(x, params.output(&cache.stages[0]), dt)
        }
        Integrator::Rk4 => {
            let half = dt * T::of(0.5);
            let sixth = dt / T::of(6.0);
            params.forward_cached(x, &mut cache.stages[0]);
            let k1 = params.output(&cache.stages[0]).to_vec();
            let x2 = add_scaled(x, &k1, half);
            params.forward_cached(&x2, &mut cache.stages[1]);
            let k2 = params.output(&cache.stages[1]).to_vec();
            let x3 = add_scaled(x, &k2, half);
            params.forward_cached(&x3, &mut cache.stages[2]);
            let k3 = params.output(&cache.stages[2]).to_vec();
            let x4 = add_scaled(x, &k3, dt);
            params.forward_cached(&x4, &mut cache.stages[3]);
            let k4 = params.output(&cache.stages[3]);
            let mut out = *x;
            for i in 0..STATE_DIM {
                out[i] += sixth * (k1[i] + T::of(2.0) * (k2[i] + k3[i]) + k4[i]);
            }
            out
        }
    }
}

/// Reverse pass of [`step_cached`]: accumulates parameter gradients and
/// returns the gradient with respect to the step input.
pub fn step_vjp<T: Real>(
    params: &MlpParams<T>,
    cache: &StepCache<T>,
    dt: T,
    integrator: Integrator,
    upstream: &State<T>,
    grads: &mut MlpGrads<T>,
    scratch: &mut Vec<T>,
) -> State<T> {
    match integrator {
        Integrator::Euler => {
            // x' = x + dt f(x)
            let mut dk: State<T> = [T::zero(); STATE_DIM];
            for i in 0..STATE_DIM {
                dk[i] = dt * upstream[i];
            }
            params.vjp(&cache.stages[0], &dk, grads, scratch);
            let mut dx = *upstream;
            for i in 0..STATE_DIM {
                dx[i] += scratch[i];
            }
            dx
        }
        Integrator::Rk4 => {
            let half = dt * T::of(0.5);
            let sixth = dt / T::of(6.0);
            let third = dt / T::of(3.0);
            let mut dx = *upstream;
            let mut dk1: State<T> = [T::zero(); STATE_DIM];
            let mut dk2: State<T> = [T::zero(); STATE_DIM];
            let mut dk3: State<T> = [T::zero(); STATE_DIM];
            let mut dk4: State<T> = [T::zero(); STATE_DIM];
            for i in 0..STATE_DIM {
                dk1[i] = sixth * upstream[i];
                dk2[i] = third * upstream[i];
                dk3[i] = third * upstream[i];
                dk4[i] = sixth * upstream[i];
            }
            // k4 = f(x + dt k3)
            params.vjp(&cache.stages[3], &dk4, grads, scratch);
            for i in 0..STATE_DIM {
                dx[i] += scratch[i];
                dk3[i] += dt * scratch[i];
            }
            // k3 = f(x + dt/2 k2)
            params.vjp(&cache.stages[2], &dk3, grads, scratch);
            for i in 0..STATE_DIM {
                dx[i] += scratch[i];
                dk2[i] += half * scratch[i];
            }
            // k2 = f(x + dt/2 k1)
            params.vjp(&cache.stages[1], &dk2, grads, scratch);
            for i in 0..STATE_DIM {
                dx[i] += scratch[i];
                dk1[i] += half * scratch[i];
            }
            // k1 = f(x)
            params.vjp(&cache.stages[0], &dk1, grads, scratch);
            for i in 0..STATE_DIM {
                dx[i] += scratch[i];
            }
            dx
        }
    }
}

/// Integrates `steps` steps from `x0`, returning all `steps + 1` states.
pub fn unroll<T: Real>(
    params: &MlpParams<T>,
    x0: &State<T>,
    steps: usize,
    dt: T,
    integrator: Integrator,
) -> Result<Vec<State<T>>, ImitatorError> {
    let mut xs = Vec::with_capacity(steps + 1);
    xs.push(*x0);
    for k in 0..steps {
        let next = step(params, xs.last().unwrap(), dt, integrator);
        if next.iter().any(|v| !v.is_finite() || v.abs() > blowup_limit()) {
            return Err(ImitatorError::Blowup { context: "unroll", index: k });
        }
        xs.push(next);
    }
    Ok(xs)
}
