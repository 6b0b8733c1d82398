//! Rigid-body geometry: vectors, unit quaternions, twists and poses.
//!
//! Conventions, fixed once here and relied on everywhere else:
//!
//! - Quaternions are Hamilton, stored `(w, x, y, z)`, kept in the canonical
//!   half of the double cover (`w >= 0`).
//! - Rotation vectors are plain [`Vec3`] with the angle equal to the norm
//!   (axis times angle).
//! - `Pose { position, orientation }` maps body-frame coordinates to world
//!   coordinates; composition reads left to right from world to body.
//! - Twists are world-frame `(linear, angular)`; integration applies the
//!   angular increment on the left: `q' = exp(w*dt) * q`.

use crate::Real;
use serde::{Deserialize, Serialize};
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

/// Below this angle (or vector norm), log and exp switch to their two-term
/// Taylor series to avoid dividing by a vanishing sine.
fn small_angle<T: Real>() -> T {
    T::of(1e-8)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Vec3<T> {
    pub x: T,
    pub y: T,
    pub z: T,
}

impl<T: Real> Vec3<T> {
    pub fn new(x: T, y: T, z: T) -> Self {
        Vec3 { x, y, z }
    }

    pub fn zero() -> Self {
        Vec3::new(T::zero(), T::zero(), T::zero())
    }

    pub fn dot(&self, o: &Self) -> T {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(&self, o: &Self) -> Self {
        Vec3::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    pub fn norm_squared(&self) -> T {
        self.dot(self)
    }

    pub fn norm(&self) -> T {
        self.norm_squared().sqrt()
    }

    /// None when the vector is too short to carry a direction.
    pub fn normalized(&self) -> Option<Self> {
        let n = self.norm();
        if n <= small_angle() {
            None
        } else {
            Some(*self * (T::one() / n))
        }
    }

    pub fn to_array(self) -> [T; 3] {
        [self.x, self.y, self.z]
    }

    pub fn from_array(a: [T; 3]) -> Self {
        Vec3::new(a[0], a[1], a[2])
    }
}

impl<T: Real> Add for Vec3<T> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl<T: Real> AddAssign for Vec3<T> {
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl<T: Real> Sub for Vec3<T> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl<T: Real> Mul<T> for Vec3<T> {
    type Output = Self;
    fn mul(self, s: T) -> Self {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl<T: Real> Neg for Vec3<T> {
    type Output = Self;
    fn neg(self) -> Self {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

/// Unit quaternion in the canonical `w >= 0` half of the double cover.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnitQuaternion<T> {
    w: T,
    x: T,
    y: T,
    z: T,
}

impl<T: Real> UnitQuaternion<T> {
    /// Normalizes and canonicalizes the given components.
    pub fn new(w: T, x: T, y: T, z: T) -> Self {
        let n = (w * w + x * x + y * y + z * z).sqrt();
        assert!(n > T::of(1e-12), "cannot normalize a near-zero quaternion");
        let s = if w < T::zero() { -T::one() / n } else { T::one() / n };
        UnitQuaternion { w: w * s, x: x * s, y: y * s, z: z * s }
    }

    pub fn identity() -> Self {
        UnitQuaternion { w: T::one(), x: T::zero(), y: T::zero(), z: T::zero() }
    }

    pub fn wxyz(&self) -> [T; 4] {
        [self.w, self.x, self.y, self.z]
    }

    /// Rebuilds from components as produced by [`Self::wxyz`]. Inputs that
    /// are already unit and canonical come back bit-exact (normalizing
    /// would shift the last ulp); anything else goes through [`Self::new`].
    pub fn from_wxyz(a: [T; 4]) -> Self {
        let n2 = a[0] * a[0] + a[1] * a[1] + a[2] * a[2] + a[3] * a[3];
        if (n2 - T::one()).abs() <= T::of(1e-12) && a[0] >= T::zero() {
            UnitQuaternion { w: a[0], x: a[1], y: a[2], z: a[3] }
        } else {
            Self::new(a[0], a[1], a[2], a[3])
        }
    }

    pub fn conjugate(&self) -> Self {
        // Already unit; conjugation keeps w, so the canonical half is kept too.
        UnitQuaternion { w: self.w, x: -self.x, y: -self.y, z: -self.z }
    }

    /// Rotation about a unit axis by `angle` (radians).
    pub fn from_axis_angle(axis: Vec3<T>, angle: T) -> Self {
        (axis * angle).exp_rotvec()
    }

    /// Rotates a world-frame construction: applies this rotation to `v`.
    pub fn rotate(&self, v: Vec3<T>) -> Vec3<T> {
        let u = Vec3::new(self.x, self.y, self.z);
        let t = u.cross(&v) * T::of(2.0);
        v + t * self.w + u.cross(&t)
    }

    pub fn inverse_rotate(&self, v: Vec3<T>) -> Vec3<T> {
        self.conjugate().rotate(v)
    }

    /// Logarithm map: rotation vector (axis times angle), angle in `[0, pi]`.
    pub fn log(&self) -> Vec3<T> {
        let u = Vec3::new(self.x, self.y, self.z);
        let s = u.norm();
        if s <= small_angle() {
            // theta/s = 2/w * (1 - s^2/(3 w^2)) + O(s^4)
            let w2 = self.w * self.w;
            let k = (T::of(2.0) / self.w) * (T::one() - u.norm_squared() / (T::of(3.0) * w2));
            return u * k;
        }
        let theta = T::of(2.0) * s.atan2(self.w);
        u * (theta / s)
    }

    /// Geodesic angle to another orientation, in `[0, pi]`.
    pub fn angle_to(&self, other: &Self) -> T {
        (*self * other.conjugate()).log().norm()
    }

    /// Tangent coordinates of this orientation around `anchor`:
    /// `log(self * anchor^-1)`.
    pub fn tangent_coords(&self, anchor: &Self) -> Vec3<T> {
        (*self * anchor.conjugate()).log()
    }

    /// Drift guard for long integrations; cheap no-op when already unit.
    pub fn renormalized(&self) -> Self {
        let n2 = self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z;
        if (n2 - T::one()).abs() <= T::of(1e-12) {
            *self
        } else {
            Self::new(self.w, self.x, self.y, self.z)
        }
    }
}

impl<T: Real> Mul for UnitQuaternion<T> {
    type Output = Self;
    /// Hamilton product; the result is renormalized and canonicalized.
    fn mul(self, o: Self) -> Self {
        UnitQuaternion::new(
            self.w * o.w - self.x * o.x - self.y * o.y - self.z * o.z,
            self.w * o.x + self.x * o.w + self.y * o.z - self.z * o.y,
            self.w * o.y - self.x * o.z + self.y * o.w + self.z * o.x,
            self.w * o.z + self.x * o.y - self.y * o.x + self.z * o.w,
        )
    }
}

/// Exponential maps live on [`Vec3`] because rotation vectors are plain
/// vectors here.
pub trait RotVecExt<T: Real> {
    fn exp_rotvec(&self) -> UnitQuaternion<T>;
}

impl<T: Real> RotVecExt<T> for Vec3<T> {
    fn exp_rotvec(&self) -> UnitQuaternion<T> {
        let theta = self.norm();
        if theta <= small_angle() {
            // sin(t/2)/t = 1/2 - t^2/48 + O(t^4), cos(t/2) = 1 - t^2/8 + O(t^4)
            let t2 = self.norm_squared();
            let k = T::of(0.5) - t2 / T::of(48.0);
            let w = T::one() - t2 / T::of(8.0);
            return UnitQuaternion::new(w, self.x * k, self.y * k, self.z * k);
        }
        let half = theta * T::of(0.5);
        let k = half.sin() / theta;
        UnitQuaternion::new(half.cos(), self.x * k, self.y * k, self.z * k)
    }
}

/// World-frame spatial velocity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Twist<T> {
    pub linear: Vec3<T>,
    pub angular: Vec3<T>,
}

impl<T: Real> Twist<T> {
    pub fn new(linear: Vec3<T>, angular: Vec3<T>) -> Self {
        Twist { linear, angular }
    }

    pub fn zero() -> Self {
        Twist::new(Vec3::zero(), Vec3::zero())
    }

    /// Order `(vx, vy, vz, wx, wy, wz)`, matching interaction-matrix columns.
    pub fn to_array6(self) -> [T; 6] {
        [
            self.linear.x, self.linear.y, self.linear.z,
            self.angular.x, self.angular.y, self.angular.z,
        ]
    }

    pub fn from_array6(a: [T; 6]) -> Self {
        Twist::new(Vec3::new(a[0], a[1], a[2]), Vec3::new(a[3], a[4], a[5]))
    }

    pub fn scale(self, s: T) -> Self {
        Twist::new(self.linear * s, self.angular * s)
    }

    pub fn add(self, o: Self) -> Self {
        Twist::new(self.linear + o.linear, self.angular + o.angular)
    }
}

/// Body-to-world rigid transform.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose<T> {
    pub position: Vec3<T>,
    pub orientation: UnitQuaternion<T>,
}

impl<T: Real> Pose<T> {
    pub fn new(position: Vec3<T>, orientation: UnitQuaternion<T>) -> Self {
        Pose { position, orientation }
    }

    pub fn identity() -> Self {
        Pose::new(Vec3::zero(), UnitQuaternion::identity())
    }

    /// `self` then `other`: the frame of `other` expressed through `self`.
    pub fn compose(&self, other: &Pose<T>) -> Pose<T> {
        Pose::new(
            self.position + self.orientation.rotate(other.position),
            self.orientation * other.orientation,
        )
    }

    pub fn inverse(&self) -> Pose<T> {
        let qi = self.orientation.conjugate();
        Pose::new(qi.rotate(-self.position), qi)
    }

    /// Maps a body-frame point into world coordinates.
    pub fn transform_point(&self, p: Vec3<T>) -> Vec3<T> {
        self.position + self.orientation.rotate(p)
    }

    /// First-order integration of a constant world-frame twist over `dt`.
    pub fn integrate(&self, twist: &Twist<T>, dt: T) -> Pose<T> {
        let q = (twist.angular * dt).exp_rotvec() * self.orientation;
        Pose::new(self.position + twist.linear * dt, q.renormalized())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    type Q = UnitQuaternion<f64>;
    type V = Vec3<f64>;

    fn random_rotvec(rng: &mut impl Rng, max_angle: f64) -> V {
        // Direction from a cube sample, rejected near zero; angle uniform.
        loop {
            let v = V::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            );
            if let Some(u) = v.normalized() {
                return u * rng.random_range(0.0..max_angle);
            }
        }
    }

    fn random_quat(rng: &mut impl Rng) -> Q {
        random_rotvec(rng, std::f64::consts::PI - 1e-6).exp_rotvec()
    }

    fn to_na(q: &Q) -> nalgebra::UnitQuaternion<f64> {
        let [w, x, y, z] = q.wxyz();
        nalgebra::UnitQuaternion::from_quaternion(nalgebra::Quaternion::new(w, x, y, z))
    }

    #[test]
    fn identity_is_neutral() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let q = random_quat(&mut rng);
            assert!((q * Q::identity()).angle_to(&q) < 1e-12);
            assert!((Q::identity() * q).angle_to(&q) < 1e-12);
            assert!((q * q.conjugate()).angle_to(&Q::identity()) < 1e-12);
        }
    }

    #[test]
    fn product_matches_reference_implementation() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..500 {
            let a = random_quat(&mut rng);
            let b = random_quat(&mut rng);
            let mine = a * b;
            let theirs = to_na(&a) * to_na(&b);
            let gap = to_na(&mine).angle_to(&theirs);
            assert!(gap < 1e-12, "product gap {gap}");
        }
    }

    #[test]
    fn rotation_matches_reference_implementation() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..500 {
            let q = random_quat(&mut rng);
            let v = random_rotvec(&mut rng, 2.0);
            let mine = q.rotate(v);
            let theirs = to_na(&q).transform_vector(&nalgebra::Vector3::new(v.x, v.y, v.z));
            assert!((mine.x - theirs.x).abs() < 1e-12);
            assert!((mine.y - theirs.y).abs() < 1e-12);
            assert!((mine.z - theirs.z).abs() < 1e-12);
        }
    }

    #[test]
    fn log_exp_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..10_000 {
            let r = random_rotvec(&mut rng, std::f64::consts::PI - 1e-6);
            let back = r.exp_rotvec().log();
            assert!((back - r).norm() < 1e-10, "round trip {:?} -> {:?}", r, back);
        }
    }

    #[test]
    fn log_matches_reference_implementation() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..500 {
            let q = random_quat(&mut rng);
            let mine = q.log();
            let theirs = to_na(&q).scaled_axis();
            assert!((mine.x - theirs.x).abs() < 1e-10);
            assert!((mine.y - theirs.y).abs() < 1e-10);
            assert!((mine.z - theirs.z).abs() < 1e-10);
        }
    }

    #[test]
    fn small_angles_use_series_smoothly() {
        for &theta in &[0.0, 1e-12, 1e-9, 5e-9, 2e-8, 1e-6] {
            let r = V::new(0.0, 0.0, 1.0) * theta;
            let q = r.exp_rotvec();
            let back = q.log();
            assert!((back.z - theta).abs() < 1e-15 + theta * 1e-12);
            let n: f64 = q.wxyz().iter().map(|c| c * c).sum();
            assert!((n - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn quarter_turn_yaw_has_expected_log() {
        let q = Q::from_axis_angle(V::new(0.0, 0.0, 1.0), std::f64::consts::FRAC_PI_2);
        let r = q.log();
        assert!((r.z - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
        assert!(r.x.abs() < 1e-15 && r.y.abs() < 1e-15);
        let v = q.rotate(V::new(1.0, 0.0, 0.0));
        assert!((v.x).abs() < 1e-12 && (v.y - 1.0).abs() < 1e-12);
    }

    #[test]
    fn tangent_coords_vanish_at_anchor() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..100 {
            let q = random_quat(&mut rng);
            // q (x) q* renormalizes to identity only up to rounding.
            assert!(q.tangent_coords(&q).norm() < 1e-15);
        }
    }

    #[test]
    fn tangent_coords_recover_relative_rotation() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..500 {
            let anchor = random_quat(&mut rng);
            let r = random_rotvec(&mut rng, 3.0);
            let q = r.exp_rotvec() * anchor;
            assert!((q.tangent_coords(&anchor) - r).norm() < 1e-10);
        }
    }

    #[test]
    fn canonical_half_is_kept() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..500 {
            let q = random_quat(&mut rng);
            assert!(q.wxyz()[0] >= 0.0);
            assert!((q * random_quat(&mut rng)).wxyz()[0] >= 0.0);
        }
        // Explicit double-cover: negated components name the same rotation.
        let q = Q::new(-0.5, 0.5, 0.5, 0.5);
        assert!(q.wxyz()[0] >= 0.0);
    }

    #[test]
    fn pose_compose_and_inverse() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..200 {
            let a = Pose::new(random_rotvec(&mut rng, 1.0), random_quat(&mut rng));
            let b = Pose::new(random_rotvec(&mut rng, 1.0), random_quat(&mut rng));
            let p = random_rotvec(&mut rng, 1.0);
            // compose respects point mapping
            let via_compose = a.compose(&b).transform_point(p);
            let via_chain = a.transform_point(b.transform_point(p));
            assert!((via_compose - via_chain).norm() < 1e-12);
            // inverse undoes
            let r = a.compose(&a.inverse());
            assert!(r.position.norm() < 1e-12);
            assert!(r.orientation.angle_to(&Q::identity()) < 1e-12);
        }
    }

    #[test]
    fn integrate_constant_twist_is_exact_under_substeps() {
        let pose = Pose::new(V::new(0.1, -0.2, 0.3), Q::from_axis_angle(V::new(0.0, 1.0, 0.0), 0.7));
        let tw = Twist::new(V::new(0.1, 0.2, -0.1), V::new(0.3, -0.2, 0.5));
        let dt = 0.1;
        let one = pose.integrate(&tw, dt);
        let two = pose.integrate(&tw, dt / 2.0).integrate(&tw, dt / 2.0);
        assert!((one.position - two.position).norm() < 1e-14);
        assert!(one.orientation.angle_to(&two.orientation) < 1e-13);
    }

    #[test]
    fn integrate_time_varying_twist_converges_at_first_order() {
        // One step with w(0) versus two half steps sampling w at 0 and dt/2:
        // the defect of the single coarse step shrinks ~4x when dt halves.
        let field = |t: f64| {
            Twist::new(
                V::new(0.1, 0.0, 0.0),
                V::new(0.8 * (1.0 + t), 0.3 * t, -0.5),
            )
        };
        let pose = Pose::new(V::zero(), Q::identity());
        let defect = |dt: f64| {
            let coarse = pose.integrate(&field(0.0), dt);
            let fine = pose
                .integrate(&field(0.0), dt / 2.0)
                .integrate(&field(dt / 2.0), dt / 2.0);
            coarse.orientation.angle_to(&fine.orientation)
        };
        let d1 = defect(0.2);
        let d2 = defect(0.1);
        let ratio = d1 / d2;
        assert!(
            (3.0..5.0).contains(&ratio),
            "expected ~4x defect reduction, got {ratio} ({d1} vs {d2})"
        );
    }

    #[test]
    fn integrate_moves_along_twist() {
        let pose = Pose::<f64>::identity();
        let tw = Twist::new(V::new(1.0, 0.0, 0.0), V::new(0.0, 0.0, 1.0));
        let next = pose.integrate(&tw, 0.5);
        assert!((next.position.x - 0.5).abs() < 1e-15);
        assert!((next.orientation.log().z - 0.5).abs() < 1e-12);
    }
}
