//! Imitation of expert trajectories with a neural ODE.
//!
//! The learned state is 10-dimensional:
//!
//! | index | content                                             | units    |
//! |-------|-----------------------------------------------------|----------|
//! | 0..4  | smoothed squarified box `(u_min, v_min, u_max, v_max)` | 0..100 |
//! | 4..7  | end-effector position                               | cm       |
//! | 7..10 | orientation tangent coordinates about the goal      | rad x100 |
//!
//! All three blocks live on comparable numeric ranges by construction, which
//! is what lets a single unweighted squared loss train the field.
//!
//! At run time the model is a velocity generator: [`NodeModel::rollout_step`]
//! advances an internal belief of this state and emits the world-frame
//! end-effector twist that carries the believed pose to the next one. The
//! belief is deliberately open loop; closing the loop (or not) around it is
//! the caller's choice and is exactly what distinguishes the evaluation
//! schemes.

mod checkpoint;
mod mlp;
mod ode;
mod train;

pub use checkpoint::{load as load_checkpoint, save as save_checkpoint, TrainMeta, FORMAT};
pub use mlp::{Adam, MlpCache, MlpGrads, MlpParams};
pub use ode::{blowup_limit, step, step_cached, step_vjp, unroll, Integrator, StepCache, STATE_DIM};
pub use train::{node_loss, sample_segments, train, train_with, Demonstrations, TrainConfig, TrainResult};

use crate::geom3d::{RotVecExt, Twist, UnitQuaternion, Vec3};
use crate::Real;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ImitatorError {
    #[error("bad demonstration data: {0}")]
    BadDemo(String),
    #[error("numerical blowup in {context} at index {index}")]
    Blowup { context: &'static str, index: usize },
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
}

/// Task state vector; see the module docs for the layout.
pub type NodeState<T> = [T; STATE_DIM];

/// Packs features, position (metres) and orientation into a state vector
/// using the model scaling conventions (`pos_scale`, `rot_scale` = 100).
pub fn pack_state<T: Real>(
    features4: [T; 4],
    position_m: Vec3<T>,
    orientation: &UnitQuaternion<T>,
    anchor: &UnitQuaternion<T>,
) -> NodeState<T> {
    let hundred = T::of(100.0);
    let r = orientation.tangent_coords(anchor) * hundred;
    let p = position_m * hundred;
    [
        features4[0], features4[1], features4[2], features4[3],
        p.x, p.y, p.z,
        r.x, r.y, r.z,
    ]
}

/// Position block of a state vector, back in metres.
pub fn unpack_position_m<T: Real>(x: &NodeState<T>) -> Vec3<T> {
    Vec3::new(x[4], x[5], x[6]) * T::of(0.01)
}

/// Orientation encoded by a state vector, recovered about `anchor`.
pub fn unpack_orientation<T: Real>(x: &NodeState<T>, anchor: &UnitQuaternion<T>, rot_scale: T) -> UnitQuaternion<T> {
    let r = Vec3::new(x[7], x[8], x[9]) * (T::one() / rot_scale);
    r.exp_rotvec() * *anchor
}

/// A trained vector field plus the conventions needed to use it.
#[derive(Debug, Clone)]
pub struct NodeModel<T> {
    pub mlp: MlpParams<T>,
    pub integrator: Integrator,
    pub dt: T,
    /// Goal orientation the tangent coordinates are taken about.
    pub anchor: UnitQuaternion<T>,
    pub pos_scale: T,
    pub rot_scale: T,
}

impl<T: Real> NodeModel<T> {
    /// Advances the belief one sample period and returns the world-frame
    /// end-effector twist realizing that move, i.e. the twist for which
    /// `pose.integrate(&twist, dt)` lands on the next believed pose.
    pub fn rollout_step(&self, belief: &NodeState<T>) -> Result<(Twist<T>, NodeState<T>), ImitatorError> {
        let limit = blowup_limit();
        if belief.iter().any(|v| !v.is_finite() || v.abs() > limit) {
            return Err(ImitatorError::Blowup { context: "rollout belief", index: 0 });
        }
        let next = step(&self.mlp, belief, self.dt, self.integrator);
        if next.iter().any(|v| !v.is_finite() || v.abs() > limit) {
            return Err(ImitatorError::Blowup { context: "rollout step", index: 0 });
        }
        let inv_dt = T::one() / self.dt;
        let v = (unpack_position_m(&next) - unpack_position_m(belief)) * inv_dt;
        let q_now = unpack_orientation(belief, &self.anchor, self.rot_scale);
        let q_next = unpack_orientation(&next, &self.anchor, self.rot_scale);
        let w = (q_next * q_now.conjugate()).log() * inv_dt;
        Ok((Twist::new(v, w), next))
    }

    /// Open-loop belief trajectory from `x0`, `steps` periods long.
    pub fn rollout(&self, x0: &NodeState<T>, steps: usize) -> Result<Vec<NodeState<T>>, ImitatorError> {
        unroll(&self.mlp, x0, steps, self.dt, self.integrator)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom3d::Pose;

    fn constant_field(bias: [f64; STATE_DIM]) -> MlpParams<f64> {
        // Zero weights: the output is the bias, a constant vector field.
        MlpParams::from_parts(
            vec![STATE_DIM, STATE_DIM],
            vec![vec![0.0; STATE_DIM * STATE_DIM]],
            vec![bias.to_vec()],
        )
    }

    fn model_with(bias: [f64; STATE_DIM]) -> NodeModel<f64> {
        NodeModel {
            mlp: constant_field(bias),
            integrator: Integrator::Euler,
            dt: 1.0 / 30.0,
            anchor: UnitQuaternion::identity(),
            pos_scale: 100.0,
            rot_scale: 100.0,
        }
    }

    #[test]
    fn pack_unpack_round_trip() {
        let anchor = UnitQuaternion::new(0.8, 0.1, -0.3, 0.2);
        let q = UnitQuaternion::new(0.7, -0.2, 0.4, 0.1);
        let p = Vec3::new(0.45, -0.02, 0.38);
        let x = pack_state([10.0, 20.0, 30.0, 40.0], p, &q, &anchor);
        assert!((unpack_position_m(&x) - p).norm() < 1e-12);
        let back = unpack_orientation(&x, &anchor, 100.0);
        assert!(back.angle_to(&q) < 1e-10);
        assert_eq!(&x[..4], &[10.0, 20.0, 30.0, 40.0]);
    }

    #[test]
    fn rollout_step_linear_velocity_units() {
        // pdot = 100 cm/s in state units must come out as 1 m/s.
        let mut bias = [0.0; STATE_DIM];
        bias[4] = 100.0;
        let m = model_with(bias);
        let x0 = pack_state([0.0; 4], Vec3::zero(), &UnitQuaternion::identity(), &m.anchor);
        let (tw, next) = m.rollout_step(&x0).unwrap();
        assert!((tw.linear.x - 1.0).abs() < 1e-12);
        assert_eq!(tw.linear.y, 0.0);
        assert!((next[4] - 100.0 * m.dt).abs() < 1e-12);
    }

    #[test]
    fn rollout_step_angular_velocity_matches_tangent_rate() {
        // rdot purely about one axis: for tangent motion along a fixed axis
        // the emitted angular velocity is exactly rdot / rot_scale.
        let mut bias = [0.0; STATE_DIM];
        bias[9] = 30.0; // 0.3 rad/s about z after unscaling
        let m = model_with(bias);
        let x0 = [0.0; STATE_DIM];
        let (tw, _) = m.rollout_step(&x0).unwrap();
        assert!((tw.angular.z - 0.3).abs() < 1e-9);
        assert!(tw.angular.x.abs() < 1e-12 && tw.angular.y.abs() < 1e-12);
    }

    #[test]
    fn emitted_twists_transport_the_believed_pose() {
        // Generic field: integrating the emitted twist with Pose::integrate
        // must land exactly on the pose encoded by the next belief.
        let bias = [0.0, 0.0, 0.0, 0.0, 3.0, -2.0, 1.0, 8.0, -5.0, 4.0];
        let mut m = model_with(bias);
        m.anchor = UnitQuaternion::new(0.9, 0.2, -0.1, 0.3);
        let mut belief = pack_state(
            [50.0; 4],
            Vec3::new(0.4, 0.0, 0.3),
            &(Vec3::new(0.1, 0.2, -0.1).exp_rotvec() * m.anchor),
            &m.anchor,
        );
        let mut pose = Pose::new(unpack_position_m(&belief), unpack_orientation(&belief, &m.anchor, 100.0));
        for _ in 0..50 {
            let (tw, next) = m.rollout_step(&belief).unwrap();
            pose = pose.integrate(&tw, m.dt);
            let want_p = unpack_position_m(&next);
            let want_q = unpack_orientation(&next, &m.anchor, 100.0);
            assert!((pose.position - want_p).norm() < 1e-10);
            assert!(pose.orientation.angle_to(&want_q) < 1e-9);
            belief = next;
        }
    }

    #[test]
    fn rollout_guards_blowup() {
        // 1e7 per second at dt = 1/30 crosses the 1e6 limit on step 4.
        let m = model_with([1e7; STATE_DIM]);
        assert!(matches!(
            m.rollout(&[0.0; STATE_DIM], 5),
            Err(ImitatorError::Blowup { .. })
        ));
        let bad = [f64::NAN; STATE_DIM];
        assert!(m.rollout_step(&bad).is_err());
    }
}
