//! Camera model, emulated box detector, and feature encodings.
//!
//! The detector stands in for an off-the-shelf object detector: it returns
//! axis-aligned boxes around the projected model points of each scene object,
//! with independent uniform noise on each side. It is deliberately blind to
//! orientation; rotation information only ever enters the features through
//! the way the box changes shape as the camera moves.
//!
//! The downstream encodings are:
//!
//! - [`to_features8`]: the four box corners in normalized image coordinates
//!   (metric, camera-invariant) in the order UL, UR, LR, LL. This is the
//!   error signal for the servo laws.
//! - [`to_features4`]: the box as `(u_min, v_min, u_max, v_max)` clamped to
//!   the image and rescaled to `[0, 100]`. This is the appearance part of
//!   the learned task state.
//!
//! A real detector can be swapped in through the line-oriented record format
//! at the bottom of the module; nothing upstream of [`Detection`] is assumed
//! elsewhere.

use crate::geom3d::{Pose, Vec3};
use crate::Real;
use rand::Rng;
use std::collections::VecDeque;
use thiserror::Error;

/// Points closer than this to the image plane count as behind the camera.
fn z_min<T: Real>() -> T {
    T::of(1e-6)
}

#[derive(Debug, Error, PartialEq)]
pub enum PerceptionError {
    #[error("point behind camera (z = {0})")]
    BehindCamera(f64),
    #[error("no detection for label {0:?}")]
    LabelNotFound(String),
    #[error("smoothing window must be at least 1")]
    InvalidWindow,
    #[error("bad detection record: {0}")]
    BadRecord(String),
}

/// Pinhole intrinsics; pixel sizes kept as scalars so clamping stays generic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Intrinsics<T> {
    pub fu: T,
    pub fv: T,
    pub cu: T,
    pub cv: T,
    pub width: T,
    pub height: T,
}

impl<T: Real> Intrinsics<T> {
    /// 640x480 image, 500 px focal length, centered principal point.
    pub fn default_vga() -> Self {
        Intrinsics {
            fu: T::of(500.0),
            fv: T::of(500.0),
            cu: T::of(320.0),
            cv: T::of(240.0),
            width: T::of(640.0),
            height: T::of(480.0),
        }
    }
}

/// Projects a camera-frame point to pixel coordinates.
pub fn project<T: Real>(intr: &Intrinsics<T>, p: Vec3<T>) -> Result<[T; 2], PerceptionError> {
    if p.z <= z_min() {
        return Err(PerceptionError::BehindCamera(p.z.to_f64().unwrap_or(f64::NAN)));
    }
    Ok([intr.fu * p.x / p.z + intr.cu, intr.fv * p.y / p.z + intr.cv])
}

/// Rigid object described by labelled model points.
#[derive(Debug, Clone)]
pub struct SceneObject<T> {
    pub label: String,
    /// Object-frame sample points; dense enough that their projected hull
    /// approximates the silhouette box.
    pub points: Vec<Vec3<T>>,
    pub pose: Pose<T>,
}

/// Axis-aligned pixel box, `min` top-left, `max` bottom-right.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox<T> {
    pub u_min: T,
    pub v_min: T,
    pub u_max: T,
    pub v_max: T,
}

impl<T: Real> BBox<T> {
    pub fn width(&self) -> T {
        self.u_max - self.u_min
    }

    pub fn height(&self) -> T {
        self.v_max - self.v_min
    }

    pub fn center(&self) -> [T; 2] {
        let half = T::of(0.5);
        [(self.u_min + self.u_max) * half, (self.v_min + self.v_max) * half]
    }

    /// `(u_min, v_min, u_max, v_max)`; the vector the smoothing filter runs on.
    pub fn to_pixel4(&self) -> [T; 4] {
        [self.u_min, self.v_min, self.u_max, self.v_max]
    }

    pub fn from_pixel4(p: [T; 4]) -> Self {
        BBox { u_min: p[0], v_min: p[1], u_max: p[2], v_max: p[3] }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Detection<T> {
    pub label: String,
    pub bbox: BBox<T>,
}

/// Runs the emulated detector for one frame.
///
/// Each object with at least one point in front of the camera produces a box
/// bounding its visible projected points; independent uniform noise in
/// `[-noise_px, noise_px)` is added to each side (four draws per such object,
/// in the order `u_min, v_min, u_max, v_max`; zero amplitude consumes no
/// randomness). Boxes that end up entirely outside the image are dropped;
/// partially visible boxes are kept as-is and may extend past the borders.
pub fn detect<T: Real>(
    objects: &[SceneObject<T>],
    camera: &Pose<T>,
    intr: &Intrinsics<T>,
    noise_px: T,
    rng: &mut impl Rng,
) -> Vec<Detection<T>> {
    let world_to_cam = camera.inverse();
    let mut out = Vec::new();
    for obj in objects {
        let mut lo = [T::infinity(), T::infinity()];
        let mut hi = [T::neg_infinity(), T::neg_infinity()];
        let mut seen = false;
        for p in &obj.points {
            let cam_pt = world_to_cam.transform_point(obj.pose.transform_point(*p));
            let Ok([u, v]) = project(intr, cam_pt) else { continue };
            lo[0] = lo[0].min(u);
            lo[1] = lo[1].min(v);
            hi[0] = hi[0].max(u);
            hi[1] = hi[1].max(v);
            seen = true;
        }
        if !seen {
            continue;
        }
        let mut b = BBox { u_min: lo[0], v_min: lo[1], u_max: hi[0], v_max: hi[1] };
        if noise_px > T::zero() {
            let a = noise_px.to_f64().unwrap();
            b.u_min += T::of(rng.random_range(-a..a));
            b.v_min += T::of(rng.random_range(-a..a));
            b.u_max += T::of(rng.random_range(-a..a));
            b.v_max += T::of(rng.random_range(-a..a));
            if b.u_min > b.u_max {
                std::mem::swap(&mut b.u_min, &mut b.u_max);
            }
            if b.v_min > b.v_max {
                std::mem::swap(&mut b.v_min, &mut b.v_max);
            }
        }
        let outside = b.u_max < T::zero()
            || b.v_max < T::zero()
            || b.u_min > intr.width
            || b.v_min > intr.height;
        if !outside {
            out.push(Detection { label: obj.label.clone(), bbox: b });
        }
    }
    out
}

/// First detection carrying `label`.
pub fn select_label<'a, T: Real>(
    detections: &'a [Detection<T>],
    label: &str,
) -> Result<&'a Detection<T>, PerceptionError> {
    detections
        .iter()
        .find(|d| d.label == label)
        .ok_or_else(|| PerceptionError::LabelNotFound(label.to_string()))
}

/// Replaces the box by the smallest enclosing square with the same center.
/// No clamping: near the borders the square may leave the image.
pub fn squarify<T: Real>(b: &BBox<T>) -> BBox<T> {
    let side = b.width().max(b.height());
    let half = side * T::of(0.5);
    let [cu, cv] = b.center();
    BBox { u_min: cu - half, v_min: cv - half, u_max: cu + half, v_max: cv + half }
}

/// Moving-average filter over the pixel 4-vector of the (squarified) box.
///
/// Until the window fills, the average runs over what has been pushed, so
/// the first frames are usable immediately.
#[derive(Debug, Clone)]
pub struct FilterState<T> {
    window: usize,
    buffer: VecDeque<[T; 4]>,
}

impl<T: Real> FilterState<T> {
    pub fn new(window: usize) -> Result<Self, PerceptionError> {
        if window == 0 {
            return Err(PerceptionError::InvalidWindow);
        }
        Ok(FilterState { window, buffer: VecDeque::with_capacity(window) })
    }

    pub fn window(&self) -> usize {
        self.window
    }

    /// Pushes one sample and returns the current average.
    pub fn smooth(&mut self, sample: [T; 4]) -> [T; 4] {
        if self.buffer.len() == self.window {
            self.buffer.pop_front();
        }
        self.buffer.push_back(sample);
        let n = T::from_usize(self.buffer.len()).unwrap();
        let mut acc = [T::zero(); 4];
        for s in &self.buffer {
            for k in 0..4 {
                acc[k] += s[k];
            }
        }
        for a in &mut acc {
            *a /= n;
        }
        acc
    }
}

/// Box corners in normalized image coordinates, order UL, UR, LR, LL:
/// `[x_ul, y_ul, x_ur, y_ur, x_lr, y_lr, x_ll, y_ll]`.
pub fn to_features8<T: Real>(b: &BBox<T>, intr: &Intrinsics<T>) -> [T; 8] {
    let nx = |u: T| (u - intr.cu) / intr.fu;
    let ny = |v: T| (v - intr.cv) / intr.fv;
    [
        nx(b.u_min), ny(b.v_min),
        nx(b.u_max), ny(b.v_min),
        nx(b.u_max), ny(b.v_max),
        nx(b.u_min), ny(b.v_max),
    ]
}

/// Box as `(u_min, v_min, u_max, v_max)`, clamped to the image and rescaled
/// so both axes run over `[0, 100]`.
pub fn to_features4<T: Real>(b: &BBox<T>, intr: &Intrinsics<T>) -> [T; 4] {
    let hundred = T::of(100.0);
    let su = |u: T| u.max(T::zero()).min(intr.width) * hundred / intr.width;
    let sv = |v: T| v.max(T::zero()).min(intr.height) * hundred / intr.height;
    [su(b.u_min), sv(b.v_min), su(b.u_max), sv(b.v_max)]
}

/// One line of the external detector record stream:
/// `frame_id label u_min v_min u_max v_max`, space-separated, floats printed
/// losslessly.
pub fn format_record<T: Real>(frame_id: u64, det: &Detection<T>) -> String {
    let b = &det.bbox;
    format!(
        "{} {} {} {} {} {}",
        frame_id,
        det.label,
        b.u_min.to_f64().unwrap(),
        b.v_min.to_f64().unwrap(),
        b.u_max.to_f64().unwrap(),
        b.v_max.to_f64().unwrap()
    )
}

/// Parses one record line; the inverse of [`format_record`].
pub fn parse_record<T: Real>(line: &str) -> Result<(u64, Detection<T>), PerceptionError> {
    let fields: Vec<&str> = line.split_whitespace().collect();
    if fields.len() != 6 {
        return Err(PerceptionError::BadRecord(format!(
            "expected 6 fields, got {}: {line:?}",
            fields.len()
        )));
    }
    let frame_id: u64 = fields[0]
        .parse()
        .map_err(|_| PerceptionError::BadRecord(format!("bad frame id {:?}", fields[0])))?;
    let mut nums = [T::zero(); 4];
    for (k, f) in fields[2..].iter().enumerate() {
        let v: f64 = f
            .parse()
            .map_err(|_| PerceptionError::BadRecord(format!("bad coordinate {f:?}")))?;
        nums[k] = T::of(v);
    }
    Ok((
        frame_id,
        Detection { label: fields[1].to_string(), bbox: BBox::from_pixel4(nums) },
    ))
}
