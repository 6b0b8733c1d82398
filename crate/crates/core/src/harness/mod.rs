//! Closed-loop trials and the three-scheme evaluation protocol.
//!
//! Schemes:
//!
//! - `dvs`: the classic feature-error law alone; purely reactive.
//! - `iil`: the learned model alone; its twists are applied open loop.
//! - `ildvs`: the norm-task law as primary with the learned linear velocity
//!   injected through the null-space projector; the learned angular
//!   velocity bypasses the projector and is commanded directly, because box
//!   features carry almost no orientation information to regulate against.
//!
//! Desired features are frozen once per task from a noise-free observation
//! at the demo goal pose over the trained object position; trials at novel
//! positions keep that same target, which is what makes reaching the same
//! relative view the implicit goal.

pub mod report;

use crate::geom3d::{Pose, Twist, UnitQuaternion, Vec3};
use crate::imitator::{pack_state, NodeModel, NodeState};
use crate::linalg::sub_vec;
use crate::perception::FilterState;
use crate::servo::{classic_law, combined_law, stack_interaction, ServoError, VsGains};
use crate::simworld::{
    make_grid, step, ExpertTask, PositionId, SimError, TaskId, World,
};
use crate::{seeds, Real};
use rand::Rng;
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("scheme {0} needs a trained model")]
    MissingModel(Scheme),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Servo(#[from] ServoError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("results file line {line}: {msg}")]
    ResultsFormat { line: usize, msg: String },
    #[error("io: {0}")]
    Io(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    Dvs,
    Iil,
    Ildvs,
}

impl Scheme {
    pub const ALL: [Scheme; 3] = [Scheme::Dvs, Scheme::Iil, Scheme::Ildvs];

    pub fn needs_model(&self) -> bool {
        !matches!(self, Scheme::Dvs)
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::Dvs => "dvs",
            Scheme::Iil => "iil",
            Scheme::Ildvs => "ildvs",
        })
    }
}

impl FromStr for Scheme {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "dvs" => Ok(Scheme::Dvs),
            "iil" => Ok(Scheme::Iil),
            "ildvs" => Ok(Scheme::Ildvs),
            other => Err(format!("unknown scheme {other:?} (dvs|iil|ildvs)")),
        }
    }
}

/// Why a trial stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    /// Ran the full horizon.
    Completed,
    /// The commanded motion left the workspace box.
    WorkspaceViolation,
    /// The control law needed a detection and the target was not in view.
    DetectionLost,
    /// The law or the learned model failed numerically.
    Fault,
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Termination::Completed => "completed",
            Termination::WorkspaceViolation => "workspace",
            Termination::DetectionLost => "detection_lost",
            Termination::Fault => "fault",
        })
    }
}

impl FromStr for Termination {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "completed" => Ok(Termination::Completed),
            "workspace" => Ok(Termination::WorkspaceViolation),
            "detection_lost" => Ok(Termination::DetectionLost),
            "fault" => Ok(Termination::Fault),
            other => Err(format!("unknown termination {other:?}")),
        }
    }
}

/// Feature-space error norm; the scalar the norm task regulates.
pub fn metric_eta<T: Real>(f8: &[T], f_star: &[T]) -> T {
    crate::linalg::norm(&sub_vec(f8, f_star))
}

/// Final position error against the trained goal (metres).
pub fn metric_delta<T: Real>(p_final: Vec3<T>, p_goal: Vec3<T>) -> T {
    (p_final - p_goal).norm()
}

/// Final orientation error: geodesic angle to the goal orientation (rad).
pub fn metric_epsilon<T: Real>(q_final: &UnitQuaternion<T>, q_goal: &UnitQuaternion<T>) -> T {
    q_final.angle_to(q_goal)
}

/// Graded cup-drop outcome from the final end-effector pose:
/// 1.0 inside the inner radius, 0.5 over the rim, 0.0 otherwise; any
/// orientation error beyond `eps_max` forfeits the drop entirely.
pub fn success_drop<T: Real>(
    final_ee: &Pose<T>,
    cup_center: Vec3<T>,
    goal_orientation: &UnitQuaternion<T>,
    r_inner: T,
    r_rim: T,
    eps_max: T,
) -> T {
    let dx = final_ee.position.x - cup_center.x;
    let dy = final_ee.position.y - cup_center.y;
    let d = (dx * dx + dy * dy).sqrt();
    let eps = metric_epsilon(&final_ee.orientation, goal_orientation);
    if eps > eps_max {
        return T::zero();
    }
    if d <= r_inner {
        T::one()
    } else if d <= r_rim {
        T::of(0.5)
    } else {
        T::zero()
    }
}

/// World end-effector twist expressed as a camera-frame twist
/// `(v, w)` of the rigidly attached camera.
pub fn cam_twist_from_world<T: Real>(tw: &Twist<T>, ee: &Pose<T>, cam: &Pose<T>) -> [T; 6] {
    let r = cam.position - ee.position;
    let v_cam_w = tw.linear + tw.angular.cross(&r);
    let v = cam.orientation.inverse_rotate(v_cam_w);
    let w = cam.orientation.inverse_rotate(tw.angular);
    [v.x, v.y, v.z, w.x, w.y, w.z]
}

/// Inverse of [`cam_twist_from_world`]: camera-frame twist back to the world
/// twist of the end-effector carrying the camera.
pub fn world_twist_from_cam<T: Real>(vel: &[T; 6], ee: &Pose<T>, cam: &Pose<T>) -> Twist<T> {
    let r = cam.position - ee.position;
    let v_cam_w = cam.orientation.rotate(Vec3::new(vel[0], vel[1], vel[2]));
    let w = cam.orientation.rotate(Vec3::new(vel[3], vel[4], vel[5]));
    Twist::new(v_cam_w - w.cross(&r), w)
}

/// Evaluation knobs shared by every trial of a task.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig<T> {
    pub gains: VsGains<T>,
    /// Depth estimate used in the interaction matrix (metres).
    pub z_hat: T,
    pub noise_px: T,
    pub horizon: usize,
    pub trials_per_position: usize,
    pub grid_spacing: T,
    /// Start-position jitter per trial (metres, uniform per axis).
    pub start_jitter: T,
    pub r_inner: T,
    pub r_rim: T,
    pub eps_max: T,
}

impl<T: Real> EvalConfig<T> {
    pub fn for_task(task: TaskId) -> Self {
        EvalConfig {
            gains: VsGains::default(),
            z_hat: match task {
                TaskId::Mouse => T::of(0.43),
                TaskId::Cup => T::of(0.30),
            },
            noise_px: T::one(),
            horizon: 700,
            trials_per_position: 3,
            grid_spacing: T::of(0.15),
            start_jitter: T::of(0.01),
            r_inner: T::of(0.03),
            r_rim: T::of(0.045),
            eps_max: T::of(0.2),
        }
    }
}

/// Everything reported about one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub task: TaskId,
    pub scheme: Scheme,
    pub position: PositionId,
    pub trial: usize,
    /// Steps actually executed (== horizon unless terminated early).
    pub steps: usize,
    /// One entry per visited state: `steps + 1` values.
    pub eta_series: Vec<f64>,
    pub eta_final: f64,
    /// Only measured at the trained position, where the demo goal pose is
    /// the right reference.
    pub delta: Option<f64>,
    pub epsilon: f64,
    /// Only defined for the cup task.
    pub success: Option<f64>,
    pub termination: Termination,
    pub final_pose: Pose<f64>,
}

/// A task bound to its world template, target features, grid and model.
pub struct Protocol<T> {
    pub task: ExpertTask<T>,
    pub cfg: EvalConfig<T>,
    pub model: Option<NodeModel<T>>,
    template: World<T>,
    grid: Vec<(PositionId, Vec3<T>)>,
    f_star: [T; 8],
}

impl<T: Real> Protocol<T> {
    /// Binds a task and (optionally) a trained model; computes the desired
    /// features from a noise-free observation at the goal pose over the
    /// trained object position.
    pub fn new(
        task: ExpertTask<T>,
        cfg: EvalConfig<T>,
        model: Option<NodeModel<T>>,
    ) -> Result<Self, HarnessError> {
        cfg.gains.validate()?;
        if cfg.horizon == 0 || cfg.trials_per_position == 0 {
            return Err(HarnessError::Config("horizon and trials must be positive".into()));
        }
        if !(cfg.z_hat > T::zero()) {
            return Err(HarnessError::Config("z_hat must be positive".into()));
        }
        let template = World::desk(task.id, task.object_center);
        let mut filter = FilterState::new(1).expect("window 1");
        let mut no_rng = seeds::stream(0, "f-star"); // never drawn from: noise is zero
        let obs = template
            .observe(&task.goal, T::zero(), &mut no_rng, &mut filter)
            .map_err(|e| HarnessError::Config(format!("goal view invalid: {e}")))?;
        let grid = make_grid(task.object_center, cfg.grid_spacing);
        Ok(Protocol { task, cfg, model, template, grid, f_star: obs.f8 })
    }

    pub fn f_star(&self) -> &[T; 8] {
        &self.f_star
    }

    pub fn grid(&self) -> &[(PositionId, Vec3<T>)] {
        &self.grid
    }

    /// World with the object moved to the given grid position; the
    /// workspace and rig stay those of the trained scene.
    pub fn world_at(&self, position: PositionId) -> World<T> {
        let target = self
            .grid
            .iter()
            .find(|(id, _)| *id == position)
            .expect("grid covers all ids")
            .1;
        let mut world = self.template.clone();
        let obj = &mut world.objects[0];
        obj.pose.position = Vec3::new(target.x, target.y, obj.pose.position.z);
        world
    }

    /// Runs one closed-loop trial. Failures of the law or model terminate
    /// the trial and are recorded in it; only configuration errors (such as
    /// a missing model) surface as `Err`.
    pub fn run_trial(
        &self,
        scheme: Scheme,
        position: PositionId,
        trial: usize,
        master_seed: u64,
    ) -> Result<TrialResult, HarnessError> {
        if scheme.needs_model() && self.model.is_none() {
            return Err(HarnessError::MissingModel(scheme));
        }
        let tag = format!("trial/{}/{}/{}/{}", self.task.id, scheme, position, trial);
        let mut jitter_rng = seeds::stream(master_seed, &format!("{tag}/jitter"));
        let mut noise_rng = seeds::stream(master_seed, &format!("{tag}/noise"));
        let world = self.world_at(position);

        let j = self.cfg.start_jitter.to_f64().unwrap();
        let dp = Vec3::new(
            T::of(jitter_rng.random_range(-j..j)),
            T::of(jitter_rng.random_range(-j..j)),
            T::of(jitter_rng.random_range(-j..j)),
        );
        let mut pose = Pose::new(
            self.task.nominal_start.position + dp,
            self.task.nominal_start.orientation,
        );
        let mut filter = world.fresh_filter();
        let dt = self.task.dt;

        let mut eta_series: Vec<f64> = Vec::with_capacity(self.cfg.horizon + 1);
        let mut steps = 0usize;
        let mut termination = Termination::Completed;

        let first = world.observe(&pose, self.cfg.noise_px, &mut noise_rng, &mut filter);
        let mut belief: NodeState<T>;
        match first {
            Ok(obs) => {
                eta_series.push(metric_eta(&obs.f8, &self.f_star).to_f64().unwrap());
                belief = pack_state(obs.f4, pose.position, &pose.orientation, &self.anchor());
                let mut obs = obs;
                for _ in 0..self.cfg.horizon {
                    let twist = match self.command(scheme, &obs, &pose, &mut belief) {
                        Ok(tw) => tw,
                        Err(_) => {
                            termination = Termination::Fault;
                            break;
                        }
                    };
                    match step(&pose, &twist, dt, &world.workspace) {
                        Ok(next) => pose = next,
                        Err(_) => {
                            termination = Termination::WorkspaceViolation;
                            break;
                        }
                    }
                    steps += 1;
                    match world.observe(&pose, self.cfg.noise_px, &mut noise_rng, &mut filter) {
                        Ok(next_obs) => {
                            obs = next_obs;
                            eta_series.push(metric_eta(&obs.f8, &self.f_star).to_f64().unwrap());
                        }
                        Err(_) => {
                            if scheme == Scheme::Iil {
                                // Open loop: control does not need the
                                // detection; hold the last eta reading.
                                let held = *eta_series.last().unwrap();
                                eta_series.push(held);
                            } else {
                                termination = Termination::DetectionLost;
                                break;
                            }
                        }
                    }
                }
            }
            Err(_) => {
                termination = Termination::DetectionLost;
            }
        }

        let eta_final = eta_series.last().copied().unwrap_or(f64::NAN);
        let goal = &self.task.goal;
        let delta = position
            .is_trained()
            .then(|| metric_delta(pose.position, goal.position).to_f64().unwrap());
        let epsilon = metric_epsilon(&pose.orientation, &goal.orientation).to_f64().unwrap();
        let success = (self.task.id == TaskId::Cup).then(|| {
            let cup_xy = world.objects[0].pose.position;
            success_drop(
                &pose,
                cup_xy,
                &goal.orientation,
                self.cfg.r_inner,
                self.cfg.r_rim,
                self.cfg.eps_max,
            )
            .to_f64()
            .unwrap()
        });
        let final_pose = Pose::new(
            Vec3::new(
                pose.position.x.to_f64().unwrap(),
                pose.position.y.to_f64().unwrap(),
                pose.position.z.to_f64().unwrap(),
            ),
            UnitQuaternion::from_wxyz(pose.orientation.wxyz().map(|x| x.to_f64().unwrap())),
        );
        Ok(TrialResult {
            task: self.task.id,
            scheme,
            position,
            trial,
            steps,
            eta_series,
            eta_final,
            delta,
            epsilon,
            success,
            termination,
            final_pose,
        })
    }

    /// Tangent anchor for packed beliefs: the model's own anchor when one
    /// is loaded, otherwise the task goal orientation (they coincide for
    /// models trained on this task's demos).
    fn anchor(&self) -> UnitQuaternion<T> {
        self.model
            .as_ref()
            .map(|m| m.anchor)
            .unwrap_or(self.task.goal.orientation)
    }

    /// Commanded world end-effector twist for one step of `scheme`.
    fn command(
        &self,
        scheme: Scheme,
        obs: &crate::simworld::Observation<T>,
        pose: &Pose<T>,
        belief: &mut NodeState<T>,
    ) -> Result<Twist<T>, HarnessError> {
        let cam = self.template.camera_pose(pose);
        match scheme {
            Scheme::Dvs => {
                let l = stack_interaction(&obs.f8, self.cfg.z_hat);
                let out = classic_law(&obs.f8, &self.f_star, &l, &self.cfg.gains, &[T::zero(); 6])?;
                Ok(world_twist_from_cam(&out.vel, pose, &cam))
            }
            Scheme::Iil => {
                let model = self.model.as_ref().expect("checked in run_trial");
                let (tw, next) = model
                    .rollout_step(belief)
                    .map_err(|e| HarnessError::Config(e.to_string()))?;
                *belief = next;
                Ok(tw)
            }
            Scheme::Ildvs => {
                let model = self.model.as_ref().expect("checked in run_trial");
                let (tw_node, next) = model
                    .rollout_step(belief)
                    .map_err(|e| HarnessError::Config(e.to_string()))?;
                *belief = next;
                let sigma_cam = cam_twist_from_world(&tw_node, pose, &cam);
                // Only the linear part goes through the projector; the
                // angular part is commanded directly afterwards.
                let sigma_lin = [
                    sigma_cam[0], sigma_cam[1], sigma_cam[2],
                    T::zero(), T::zero(), T::zero(),
                ];
                let l = stack_interaction(&obs.f8, self.cfg.z_hat);
                let mut out = combined_law(&obs.f8, &self.f_star, &l, &self.cfg.gains, &sigma_lin)?;
                out.vel[3] = sigma_cam[3];
                out.vel[4] = sigma_cam[4];
                out.vel[5] = sigma_cam[5];
                Ok(world_twist_from_cam(&out.vel, pose, &cam))
            }
        }
    }

    /// The full benchmark: every scheme, every grid position, every trial,
    /// in a fixed deterministic order.
    pub fn run_protocol(&self, master_seed: u64) -> Result<Vec<TrialResult>, HarnessError> {
        self.run_schemes(&Scheme::ALL, master_seed)
    }

    /// Same sweep restricted to the given schemes.
    pub fn run_schemes(
        &self,
        schemes: &[Scheme],
        master_seed: u64,
    ) -> Result<Vec<TrialResult>, HarnessError> {
        let mut rows = Vec::new();
        for scheme in schemes {
            for (position, _) in &self.grid {
                for trial in 1..=self.cfg.trials_per_position {
                    rows.push(self.run_trial(*scheme, *position, trial, master_seed)?);
                }
            }
        }
        Ok(rows)
    }
}
