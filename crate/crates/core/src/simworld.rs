//! Desk-scale kinematic world: a table with one object, a camera rigidly
//! mounted ahead of the end-effector flange, scripted expert trajectories,
//! and the object-position grid used for evaluation.
//!
//! Camera frame convention: `x` right, `y` down, `z` along the optical axis,
//! so a camera looking straight down at the table maps world `+x` to image
//! `+u` and world `-y` to image `+v`.
//!
//! Everything is kinematic: commanded twists integrate exactly, subject only
//! to the workspace box. The interesting dynamics all come from perception.

use crate::geom3d::{Pose, RotVecExt, Twist, UnitQuaternion, Vec3};
use crate::imitator::{pack_state, Demonstrations, NodeState};
use crate::perception::{
    detect, select_label, squarify, to_features4, to_features8, BBox, FilterState, Intrinsics,
    PerceptionError,
};
use crate::Real;
use rand::Rng;
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("end-effector left the workspace")]
    WorkspaceViolation,
    #[error("target object left the camera view at frame {frame}")]
    OutOfView { frame: usize },
    #[error(transparent)]
    Perception(#[from] PerceptionError),
    #[error("demo file line {line}: {msg}")]
    DemoFormat { line: usize, msg: String },
    #[error("io: {0}")]
    Io(String),
}

/// Axis-aligned bounds on the end-effector position.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Workspace<T> {
    pub min: Vec3<T>,
    pub max: Vec3<T>,
}

impl<T: Real> Workspace<T> {
    pub fn contains(&self, p: Vec3<T>) -> bool {
        p.x >= self.min.x
            && p.x <= self.max.x
            && p.y >= self.min.y
            && p.y <= self.max.y
            && p.z >= self.min.z
            && p.z <= self.max.z
    }
}

/// Integrates one commanded twist; refuses to leave the workspace.
pub fn step<T: Real>(
    pose: &Pose<T>,
    twist: &Twist<T>,
    dt: T,
    workspace: &Workspace<T>,
) -> Result<Pose<T>, SimError> {
    let next = pose.integrate(twist, dt);
    if !workspace.contains(next.position) {
        return Err(SimError::WorkspaceViolation);
    }
    Ok(next)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TaskId {
    Mouse,
    Cup,
}

impl fmt::Display for TaskId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TaskId::Mouse => "mouse",
            TaskId::Cup => "cup",
        })
    }
}

impl FromStr for TaskId {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "mouse" => Ok(TaskId::Mouse),
            "cup" => Ok(TaskId::Cup),
            other => Err(format!("unknown task {other:?} (mouse|cup)")),
        }
    }
}

/// Object positions evaluated by the protocol: the trained position and four
/// novel ones displaced along the table axes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PositionId {
    Center,
    XPlus,
    XMinus,
    YPlus,
    YMinus,
}

impl PositionId {
    pub const ALL: [PositionId; 5] = [
        PositionId::Center,
        PositionId::XPlus,
        PositionId::XMinus,
        PositionId::YPlus,
        PositionId::YMinus,
    ];

    pub fn is_trained(&self) -> bool {
        matches!(self, PositionId::Center)
    }
}

impl fmt::Display for PositionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PositionId::Center => "center",
            PositionId::XPlus => "x+",
            PositionId::XMinus => "x-",
            PositionId::YPlus => "y+",
            PositionId::YMinus => "y-",
        })
    }
}

impl FromStr for PositionId {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "center" => Ok(PositionId::Center),
            "x+" => Ok(PositionId::XPlus),
            "x-" => Ok(PositionId::XMinus),
            "y+" => Ok(PositionId::YPlus),
            "y-" => Ok(PositionId::YMinus),
            other => Err(format!("unknown position {other:?} (center|x+|x-|y+|y-)")),
        }
    }
}

/// The five object positions: trained center plus `spacing` displacements.
pub fn make_grid<T: Real>(center: Vec3<T>, spacing: T) -> Vec<(PositionId, Vec3<T>)> {
    PositionId::ALL
        .iter()
        .map(|&id| {
            let p = match id {
                PositionId::Center => center,
                PositionId::XPlus => center + Vec3::new(spacing, T::zero(), T::zero()),
                PositionId::XMinus => center - Vec3::new(spacing, T::zero(), T::zero()),
                PositionId::YPlus => center + Vec3::new(T::zero(), spacing, T::zero()),
                PositionId::YMinus => center - Vec3::new(T::zero(), spacing, T::zero()),
            };
            (id, p)
        })
        .collect()
}

/// Model-point cloud of the computer mouse: an 11 x 6 x 3.5 cm box resting
/// on the table, centroid at half height.
pub fn mouse_object<T: Real>(center_xy: Vec3<T>) -> crate::perception::SceneObject<T> {
    let (hx, hy, hz) = (T::of(0.055), T::of(0.03), T::of(0.0175));
    let mut points = Vec::new();
    for sx in [-hx, hx] {
        for sy in [-hy, hy] {
            for sz in [-hz, hz] {
                points.push(Vec3::new(sx, sy, sz));
            }
        }
    }
    crate::perception::SceneObject {
        label: "mouse".into(),
        points,
        pose: Pose::new(Vec3::new(center_xy.x, center_xy.y, hz), UnitQuaternion::identity()),
    }
}

/// Model-point cloud of the cup: two rings of radius 4 cm at the rim and
/// base of a 10 cm tall cylinder standing on the table.
pub fn cup_object<T: Real>(center_xy: Vec3<T>) -> crate::perception::SceneObject<T> {
    let r = T::of(0.04);
    let hh = T::of(0.05);
    let n = 48;
    let mut points = Vec::new();
    for k in 0..n {
        let a = T::of(2.0 * std::f64::consts::PI * k as f64 / n as f64);
        let (x, y) = (r * a.cos(), r * a.sin());
        points.push(Vec3::new(x, y, hh));
        points.push(Vec3::new(x, y, -hh));
    }
    crate::perception::SceneObject {
        label: "cup".into(),
        points,
        pose: Pose::new(Vec3::new(center_xy.x, center_xy.y, hh), UnitQuaternion::identity()),
    }
}

/// Orientation of a camera looking straight down, rolled by `yaw` about its
/// optical axis.
pub fn look_down<T: Real>(yaw: T) -> UnitQuaternion<T> {
    let down = UnitQuaternion::from_axis_angle(Vec3::new(T::one(), T::zero(), T::zero()), T::of(std::f64::consts::PI));
    down * UnitQuaternion::from_axis_angle(Vec3::new(T::zero(), T::zero(), T::one()), yaw)
}

/// Orientation of a camera at `eye` whose optical axis points at `target`,
/// with image "up" aligned against gravity as far as possible.
pub fn look_at<T: Real>(eye: Vec3<T>, target: Vec3<T>) -> UnitQuaternion<T> {
    let z = (target - eye).normalized().expect("eye and target coincide");
    let up = Vec3::new(T::zero(), T::zero(), T::one());
    let down_raw = -(up - z * up.dot(&z));
    let y = down_raw.normalized().expect("looking straight up or down needs look_down");
    let x = y.cross(&z);
    // Columns of the rotation matrix are the camera axes in world frame.
    let (m00, m01, m02) = (x.x, y.x, z.x);
    let (m10, m11, m12) = (x.y, y.y, z.y);
    let (m20, m21, m22) = (x.z, y.z, z.z);
    quat_from_matrix(m00, m01, m02, m10, m11, m12, m20, m21, m22)
}

#[allow(clippy::too_many_arguments)]
fn quat_from_matrix<T: Real>(
    m00: T, m01: T, m02: T,
    m10: T, m11: T, m12: T,
    m20: T, m21: T, m22: T,
) -> UnitQuaternion<T> {
    // Shepperd's method, branching on the largest diagonal term.
    let quarter = T::of(0.25);
    let tr = m00 + m11 + m22;
    if tr > T::zero() {
        let s = (tr + T::one()).sqrt() * T::of(2.0);
        UnitQuaternion::new(quarter * s, (m21 - m12) / s, (m02 - m20) / s, (m10 - m01) / s)
    } else if m00 >= m11 && m00 >= m22 {
        let s = (T::one() + m00 - m11 - m22).sqrt() * T::of(2.0);
        UnitQuaternion::new((m21 - m12) / s, quarter * s, (m01 + m10) / s, (m02 + m20) / s)
    } else if m11 >= m22 {
        let s = (T::one() + m11 - m00 - m22).sqrt() * T::of(2.0);
        UnitQuaternion::new((m02 - m20) / s, (m01 + m10) / s, quarter * s, (m12 + m21) / s)
    } else {
        let s = (T::one() + m22 - m00 - m11).sqrt() * T::of(2.0);
        UnitQuaternion::new((m10 - m01) / s, (m02 + m20) / s, (m12 + m21) / s, quarter * s)
    }
}

/// The rig: scene objects, camera mounting and intrinsics, workspace box,
/// and the smoothing window every observer uses.
#[derive(Debug, Clone)]
pub struct World<T> {
    pub objects: Vec<crate::perception::SceneObject<T>>,
    pub target_label: String,
    pub workspace: Workspace<T>,
    pub intrinsics: Intrinsics<T>,
    /// Flange-to-camera transform; the camera sits 5 cm ahead of the
    /// end-effector along its approach axis.
    pub extrinsic: Pose<T>,
    pub smoothing_window: usize,
}

/// One processed observation: the smoothed squarified box and both feature
/// encodings derived from it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation<T> {
    pub bbox: BBox<T>,
    pub f8: [T; 8],
    pub f4: [T; 4],
}

impl<T: Real> World<T> {
    /// Single-object desk scene with default rig parameters.
    pub fn desk(task: TaskId, object_center: Vec3<T>) -> Self {
        let object = match task {
            TaskId::Mouse => mouse_object(object_center),
            TaskId::Cup => cup_object(object_center),
        };
        let label = object.label.clone();
        let reach = T::of(0.8);
        World {
            objects: vec![object],
            target_label: label,
            workspace: Workspace {
                min: Vec3::new(object_center.x - reach, object_center.y - reach, T::of(0.002)),
                max: Vec3::new(object_center.x + reach, object_center.y + reach, T::of(1.5)),
            },
            intrinsics: Intrinsics::default_vga(),
            extrinsic: Pose::new(Vec3::new(T::zero(), T::zero(), T::of(0.05)), UnitQuaternion::identity()),
            smoothing_window: 50,
        }
    }

    pub fn camera_pose(&self, ee: &Pose<T>) -> Pose<T> {
        ee.compose(&self.extrinsic)
    }

    /// End-effector pose that places the camera at `cam`.
    pub fn ee_for_camera(&self, cam: &Pose<T>) -> Pose<T> {
        cam.compose(&self.extrinsic.inverse())
    }

    /// Full perception pipeline for one frame: detect, select the target,
    /// squarify, smooth, encode.
    pub fn observe(
        &self,
        ee: &Pose<T>,
        noise_px: T,
        rng: &mut impl Rng,
        filter: &mut FilterState<T>,
    ) -> Result<Observation<T>, PerceptionError> {
        let cam = self.camera_pose(ee);
        let dets = detect(&self.objects, &cam, &self.intrinsics, noise_px, rng);
        let det = select_label(&dets, &self.target_label)?;
        let sq = squarify(&det.bbox);
        let smoothed = filter.smooth(sq.to_pixel4());
        let bbox = BBox::from_pixel4(smoothed);
        Ok(Observation {
            bbox,
            f8: to_features8(&bbox, &self.intrinsics),
            f4: to_features4(&bbox, &self.intrinsics),
        })
    }

    pub fn fresh_filter(&self) -> FilterState<T> {
        FilterState::new(self.smoothing_window).expect("window validated at construction")
    }
}

/// Scripted expert for one task: start and goal end-effector poses, an
/// optional position via-point, and the jitter applied to demo starts.
#[derive(Debug, Clone)]
pub struct ExpertTask<T> {
    pub id: TaskId,
    /// Trained object position (table frame).
    pub object_center: Vec3<T>,
    pub nominal_start: Pose<T>,
    pub goal: Pose<T>,
    pub via: Option<Vec3<T>>,
    pub start_jitter_pos: T,
    pub start_jitter_yaw: T,
    pub demo_steps: usize,
    pub dt: T,
}

impl<T: Real> ExpertTask<T> {
    /// Mouse centering: planar approach from an offset start, with a quarter
    /// turn about the optical axis on the way.
    pub fn mouse(world: &World<T>, center: Vec3<T>) -> Self {
        let goal_cam = Pose::new(
            Vec3::new(center.x, center.y, T::of(0.45)),
            look_down(T::of(std::f64::consts::FRAC_PI_2)),
        );
        let start_cam = Pose::new(
            Vec3::new(center.x, center.y, T::of(0.50)),
            look_down(T::zero()),
        );
        ExpertTask {
            id: TaskId::Mouse,
            object_center: center,
            nominal_start: world.ee_for_camera(&start_cam),
            goal: world.ee_for_camera(&goal_cam),
            via: None,
            start_jitter_pos: T::of(0.15),
            start_jitter_yaw: T::of(10.0 * std::f64::consts::PI / 180.0),
            demo_steps: 500,
            dt: T::of(1.0 / 30.0),
        }
    }

    /// Cup approach: from a low side view, arc up and over to a top-down
    /// view ready to pour into the cup.
    pub fn cup(world: &World<T>, center: Vec3<T>) -> Self {
        let start_eye = Vec3::new(center.x - T::of(0.38), center.y, T::of(0.18));
        let cup_mid = Vec3::new(center.x, center.y, T::of(0.05));
        let start_cam = Pose::new(start_eye, look_at(start_eye, cup_mid));
        let goal_cam = Pose::new(Vec3::new(center.x, center.y, T::of(0.38)), look_down(T::zero()));
        let start_ee = world.ee_for_camera(&start_cam);
        let goal_ee = world.ee_for_camera(&goal_cam);
        let via = Vec3::new(
            (start_ee.position.x + goal_ee.position.x) * T::of(0.5),
            (start_ee.position.y + goal_ee.position.y) * T::of(0.5),
            T::of(0.47),
        );
        ExpertTask {
            id: TaskId::Cup,
            object_center: center,
            nominal_start: start_ee,
            goal: goal_ee,
            via: Some(via),
            start_jitter_pos: T::of(0.14),
            start_jitter_yaw: T::of(10.0 * std::f64::consts::PI / 180.0),
            demo_steps: 500,
            dt: T::of(1.0 / 30.0),
        }
    }

    /// Start pose for demonstration `k`: the four demos start at the tips of
    /// a cross in view geometry, chosen so the initial bounding boxes span
    /// the scale and image-offset range a displaced object can produce. For
    /// the cup (side view) demos 0/1 move along the optical axis (near/far,
    /// spanning box scale) and demos 2/3 move sideways with a matching pan
    /// (spanning horizontal offset); for the mouse (top view) the four demos
    /// translate laterally with an alternating roll about the optical axis.
    /// A small random residual stands in for hand-guided variation, and the
    /// nominal start stays interior to the cross.
    pub fn demo_start(&self, k: usize, rng: &mut impl Rng) -> Pose<T> {
        let q = k % 4;
        let sign = if q % 2 == 0 { T::one() } else { -T::one() };
        let d = self.start_jitter_pos;
        let res = d.to_f64().unwrap() * 0.10;
        let o = self.nominal_start.orientation;
        let ex = Vec3::new(T::one(), T::zero(), T::zero());
        let ey = Vec3::new(T::zero(), T::one(), T::zero());
        let ez = Vec3::new(T::zero(), T::zero(), T::one());
        // The camera shares the wrist orientation, so local z is the optical
        // axis, local x the image-right direction, and local y pans the view.
        let (arm, local_axis, angle) = match (self.id, q / 2) {
            // The near/far pair tilts with the move: a displaced object shifts
            // vertically in the side view as well as changing apparent size.
            (TaskId::Cup, 0) => (o.rotate(ez) * d, ex, self.start_jitter_yaw * T::of(0.6)),
            (TaskId::Cup, _) => (o.rotate(ex) * (d * T::of(0.6)), ey, self.start_jitter_yaw),
            (TaskId::Mouse, 0) => (ex * d, ez, self.start_jitter_yaw),
            (TaskId::Mouse, _) => (ey * d, ez, self.start_jitter_yaw),
        };
        let dp = Vec3::new(
            arm.x * sign + T::of(rng.random_range(-res..res)),
            arm.y * sign + T::of(rng.random_range(-res..res)),
            arm.z * sign + T::of(rng.random_range(-res..res)),
        );
        let ang_res = self.start_jitter_yaw.to_f64().unwrap() * 0.2;
        let ang = angle * sign + T::of(rng.random_range(-ang_res..ang_res));
        Pose::new(
            self.nominal_start.position + dp,
            o * UnitQuaternion::from_axis_angle(local_axis, ang),
        )
    }

    /// Pose along the expert path at phase `s` in `[0, 1]`, from `start`
    /// (usually a spread one) to the goal. Two Bézier legs joined with a
    /// continuous velocity: a settle leg from the spread start to a junction
    /// near the nominal start — connecting the start envelope to the shared
    /// tube — then the arc to the goal. Every demo crosses its junction with
    /// the same slow velocity, aimed at the arc apex: a full stop would be a
    /// fixed point of the learned field, and start-dependent crossing
    /// directions would put conflicting velocities on neighbouring states.
    /// The junction keeps a tenth of the start offset, so demos stay
    /// distinguishable along the arc.
    pub fn path_pose(&self, start: &Pose<T>, s: T) -> Pose<T> {
        let s0 = T::of(0.3);
        let kappa = T::of(0.1);
        let j = self.nominal_start.position
            + (start.position - self.nominal_start.position) * kappa;
        let dqs = (start.orientation * self.nominal_start.orientation.conjugate()).log();
        let jq = (dqs * kappa).exp_rotvec() * self.nominal_start.orientation;
        let mid = self.via.unwrap_or_else(|| {
            (self.nominal_start.position + self.goal.position) * T::of(0.5)
        });
        let cross = (mid - self.nominal_start.position)
            .normalized()
            .expect("apex coincides with the nominal start")
            * T::of(0.15);
        if s < s0 {
            // Ease-in cubic: zero initial slope, unit slope into the
            // junction so the legs meet at the same speed.
            let t = s / s0;
            let t = t * t * (T::of(2.0) - t);
            let w = T::one() - t;
            let a2 = j - cross * (s0 / T::of(3.0));
            let p = start.position * (w * w * (w + T::of(3.0) * t))
                + a2 * (T::of(3.0) * w * t * t)
                + j * (t * t * t);
            let u = min_jerk(s / s0);
            let delta = (jq * start.orientation.conjugate()).log();
            Pose::new(p, (delta * u).exp_rotvec() * start.orientation)
        } else {
            // Ease-out cubic matching the junction speed of the settle leg.
            let t = (s - s0) / (T::one() - s0);
            let t = t + t * t - t * t * t;
            let w = T::one() - t;
            let b1 = j + cross * ((T::one() - s0) / T::of(3.0));
            let p = j * (w * w * w)
                + b1 * (T::of(3.0) * w * w * t)
                + mid * (T::of(3.0) * w * t * t)
                + self.goal.position * (t * t * t);
            let u = min_jerk((s - s0) / (T::one() - s0));
            let delta = (self.goal.orientation * jq.conjugate()).log();
            Pose::new(p, (delta * u).exp_rotvec() * jq)
        }
    }
}

/// Minimum-jerk phase profile: zero velocity and acceleration at both ends.
pub fn min_jerk<T: Real>(tau: T) -> T {
    let t = tau.max(T::zero()).min(T::one());
    let t3 = t * t * t;
    t3 * (T::of(10.0) - T::of(15.0) * t + T::of(6.0) * t * t)
}

/// One recorded demonstration: task states plus the underlying poses.
#[derive(Debug, Clone)]
pub struct DemoTrace<T> {
    pub states: Vec<NodeState<T>>,
    pub poses: Vec<Pose<T>>,
    pub start: Pose<T>,
}

/// Runs the scripted expert once from the `k`-th fan start, recording the
/// perceived task state at every frame.
pub fn expert_demo<T: Real>(
    world: &World<T>,
    task: &ExpertTask<T>,
    k: usize,
    noise_px: T,
    rng: &mut impl Rng,
) -> Result<DemoTrace<T>, SimError> {
    let start = task.demo_start(k, rng);
    let mut filter = world.fresh_filter();
    let mut states = Vec::with_capacity(task.demo_steps);
    let mut poses = Vec::with_capacity(task.demo_steps);
    let denom = T::from_usize(task.demo_steps - 1).unwrap();
    for k in 0..task.demo_steps {
        let tau = T::from_usize(k).unwrap() / denom;
        let pose = task.path_pose(&start, tau);
        let obs = world
            .observe(&pose, noise_px, rng, &mut filter)
            .map_err(|_| SimError::OutOfView { frame: k })?;
        states.push(pack_state(obs.f4, pose.position, &pose.orientation, &task.goal.orientation));
        poses.push(pose);
    }
    Ok(DemoTrace { states, poses, start })
}

/// Collects `n` demonstrations into a training set.
pub fn collect_demos<T: Real>(
    world: &World<T>,
    task: &ExpertTask<T>,
    n: usize,
    noise_px: T,
    rng: &mut impl Rng,
) -> Result<Demonstrations<T>, SimError> {
    let mut states = Vec::with_capacity(n);
    for k in 0..n {
        states.push(expert_demo(world, task, k, noise_px, rng)?.states);
    }
    Ok(Demonstrations {
        states,
        dt: task.dt,
        anchor: task.goal.orientation,
        task: task.id.to_string(),
    })
}

/// Writes demonstrations in the demo CSV format:
///
/// ```text
/// # task cup
/// # dt 0.03333333333333333
/// # anchor <w> <x> <y> <z>
/// # units f percent, p cm, r rad*100, t s
/// demo,t,f1,f2,f3,f4,p1,p2,p3,r1,r2,r3
/// 0,0,...
/// ```
///
/// Floats use the shortest round-trip decimal form, so a write/read cycle
/// is lossless.
pub fn write_demos_csv<T: Real, W: Write>(w: &mut W, demos: &Demonstrations<T>) -> Result<(), SimError> {
    let io = |e: std::io::Error| SimError::Io(e.to_string());
    writeln!(w, "# task {}", demos.task).map_err(io)?;
    writeln!(w, "# dt {}", demos.dt.to_f64().unwrap()).map_err(io)?;
    let a = demos.anchor.wxyz().map(|x| x.to_f64().unwrap());
    writeln!(w, "# anchor {} {} {} {}", a[0], a[1], a[2], a[3]).map_err(io)?;
    writeln!(w, "# units f percent, p cm, r rad*100, t s").map_err(io)?;
    writeln!(w, "demo,t,f1,f2,f3,f4,p1,p2,p3,r1,r2,r3").map_err(io)?;
    let dt = demos.dt.to_f64().unwrap();
    for (d, traj) in demos.states.iter().enumerate() {
        for (k, x) in traj.iter().enumerate() {
            let mut line = format!("{},{}", d, k as f64 * dt);
            for v in x {
                line.push(',');
                line.push_str(&format!("{}", v.to_f64().unwrap()));
            }
            writeln!(w, "{line}").map_err(io)?;
        }
    }
    Ok(())
}

/// Reads the format written by [`write_demos_csv`]; errors carry 1-based
/// line numbers.
pub fn read_demos_csv<T: Real, R: BufRead>(r: R) -> Result<Demonstrations<T>, SimError> {
    let mut task = None;
    let mut dt = None;
    let mut anchor = None;
    let mut states: Vec<Vec<NodeState<T>>> = Vec::new();
    let mut saw_header = false;
    for (idx, line) in r.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|e| SimError::Io(e.to_string()))?;
        let line = line.trim_end();
        if line.is_empty() {
            continue;
        }
        if let Some(meta) = line.strip_prefix('#') {
            let mut it = meta.split_whitespace();
            match it.next() {
                Some("task") => {
                    task = Some(it.next().map(String::from).ok_or(SimError::DemoFormat {
                        line: lineno,
                        msg: "missing task name".into(),
                    })?)
                }
                Some("dt") => {
                    let v: f64 = it
                        .next()
                        .and_then(|s| s.parse().ok())
                        .ok_or(SimError::DemoFormat { line: lineno, msg: "bad dt".into() })?;
                    dt = Some(T::of(v));
                }
                Some("anchor") => {
                    let vals: Vec<f64> = it.filter_map(|s| s.parse().ok()).collect();
                    if vals.len() != 4 {
                        return Err(SimError::DemoFormat {
                            line: lineno,
                            msg: "anchor needs 4 components".into(),
                        });
                    }
                    anchor = Some(UnitQuaternion::from_wxyz([
                        T::of(vals[0]), T::of(vals[1]), T::of(vals[2]), T::of(vals[3]),
                    ]));
                }
                _ => {} // informational metadata such as units
            }
            continue;
        }
        if !saw_header {
            if line != "demo,t,f1,f2,f3,f4,p1,p2,p3,r1,r2,r3" {
                return Err(SimError::DemoFormat {
                    line: lineno,
                    msg: format!("unexpected header {line:?}"),
                });
            }
            saw_header = true;
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 12 {
            return Err(SimError::DemoFormat {
                line: lineno,
                msg: format!("expected 12 fields, got {}", fields.len()),
            });
        }
        let d: usize = fields[0].parse().map_err(|_| SimError::DemoFormat {
            line: lineno,
            msg: format!("bad demo index {:?}", fields[0]),
        })?;
        if d == states.len() {
            states.push(Vec::new());
        } else if d + 1 != states.len() {
            return Err(SimError::DemoFormat {
                line: lineno,
                msg: format!("demo indices must be contiguous, got {d}"),
            });
        }
        let mut x = [T::zero(); 10];
        for (k, f) in fields[2..].iter().enumerate() {
            let v: f64 = f.parse().map_err(|_| SimError::DemoFormat {
                line: lineno,
                msg: format!("bad number {f:?} in column {}", k + 3),
            })?;
            x[k] = T::of(v);
        }
        states.last_mut().unwrap().push(x);
    }
    let (Some(task), Some(dt), Some(anchor)) = (task, dt, anchor) else {
        return Err(SimError::DemoFormat {
            line: 0,
            msg: "missing metadata: need # task, # dt, # anchor".into(),
        });
    };
    if states.is_empty() {
        return Err(SimError::DemoFormat { line: 0, msg: "no data rows".into() });
    }
    Ok(Demonstrations { states, dt, anchor, task })
}
