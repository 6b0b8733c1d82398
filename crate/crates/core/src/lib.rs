//! Direct visual servoing around a bounding-box feature, with an
//! imitation-learned secondary behaviour injected through the null space of a
//! norm-level task.
//!
//! The crate is organised bottom-up:
//!
//! - [`linalg`]: small dense matrices and the damped solves the control laws
//!   need. Nothing here is tuned for size; feature Jacobians are 8x6.
//! - [`geom3d`]: unit quaternions, rotation vectors, twists and poses, with
//!   the log/exp maps used both for control and for learning targets.
//! - [`perception`]: a pinhole camera over simple point-cloud objects, an
//!   emulated box detector with per-side noise, squarification and temporal
//!   smoothing, and the feature encodings consumed downstream.
//! - [`servo`]: interaction matrices, the classic feature-error law, and the
//!   norm-task law whose one-dimensional primary task frees five degrees of
//!   freedom for a secondary velocity.
//! - [`imitator`]: a neural ODE over a ten-dimensional task state, trained by
//!   backpropagation through its own unrolled integrator.
//! - [`simworld`]: the desk-scale world, scripted expert trajectories, and
//!   the object position grid used for evaluation.
//! - [`harness`]: closed-loop trials, metrics, the three-scheme protocol and
//!   its reports.
//!
//! All numerics are generic over [`Real`]; `f64` is the default used by the
//! binaries and the aliases below.

pub mod geom3d;
pub mod harness;
pub mod imitator;
pub mod linalg;
pub mod perception;
pub mod seeds;
pub mod servo;
pub mod simworld;

use num_traits::{Float, FromPrimitive, NumAssignOps};
use std::fmt::{Debug, Display};

/// Scalar bound for every numeric routine in the crate.
///
/// Implemented by `f32` and `f64` through the blanket impl; code never names
/// a concrete float except at the API boundary (file formats are 64-bit).
pub trait Real: Float + FromPrimitive + NumAssignOps + Debug + Display + Send + Sync + 'static {
    /// Shorthand for lossy conversion from literals and config values.
    fn of(v: f64) -> Self {
        Self::from_f64(v).expect("finite literal")
    }
}

impl<T> Real for T where T: Float + FromPrimitive + NumAssignOps + Debug + Display + Send + Sync + 'static {}

/// Default scalar used by the command-line tools and file formats.
pub type Scalar = f64;

pub type Pose = geom3d::Pose<Scalar>;
pub type Twist = geom3d::Twist<Scalar>;
pub type Vec3 = geom3d::Vec3<Scalar>;
pub type UnitQuaternion = geom3d::UnitQuaternion<Scalar>;
