//! Visual-servo control laws over box-corner features.
//!
//! Twist coordinates are camera-frame `(vx, vy, vz, wx, wy, wz)`, matching
//! the interaction-matrix columns; conversion to a world end-effector twist
//! happens in the harness.
//!
//! Two laws are provided:
//!
//! - [`classic_law`]: the feature-error law `v = -lambda L+ e + P sigma`
//!   with `P = I - L+ L`. With eight feature rows the projector is
//!   numerically zero and the secondary velocity `sigma` is ignored.
//! - [`norm_law`]: the same servo goal collapsed to the scalar task
//!   `eta = |e|`. Its task Jacobian has one row, so the projector keeps five
//!   degrees of freedom open for `sigma` while `eta` still decays at
//!   `-lambda eta` exactly, whatever `sigma` does.
//!
//! [`combined_law`] blends the two with a smoothstep on `eta` so the final
//! millimetres revert to the stiff classic behaviour.

use crate::linalg::{dot, norm, Mat};
use crate::Real;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ServoError {
    #[error("feature/jacobian shape mismatch: {0} features vs {1} rows")]
    ShapeMismatch(usize, usize),
    #[error("gains invalid: {0}")]
    InvalidGain(String),
    #[error("error direction degenerate (eta or e^T L L^T e below guard)")]
    DegenerateDirection,
    #[error("interaction matrix too ill-conditioned to invert")]
    IllConditioned,
}

/// Gains shared by every scheme. `eta0 < eta1` bound the switch band in
/// normalized feature units; `eta_den_guard` protects the norm-law
/// denominator near the goal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VsGains<T> {
    pub lambda: T,
    pub mu: T,
    pub eta0: T,
    pub eta1: T,
    pub eta_den_guard: T,
}

impl<T: Real> Default for VsGains<T> {
    fn default() -> Self {
        VsGains {
            lambda: T::one(),
            mu: T::of(0.01),
            eta0: T::of(0.01),
            eta1: T::of(0.05),
            eta_den_guard: T::of(1e-9),
        }
    }
}

impl<T: Real> VsGains<T> {
    pub fn validate(&self) -> Result<(), ServoError> {
        if !(self.lambda > T::zero()) {
            return Err(ServoError::InvalidGain("lambda must be positive".into()));
        }
        if self.mu < T::zero() {
            return Err(ServoError::InvalidGain("mu must be non-negative".into()));
        }
        if !(T::zero() <= self.eta0 && self.eta0 < self.eta1) {
            return Err(ServoError::InvalidGain("need 0 <= eta0 < eta1".into()));
        }
        if !(self.eta_den_guard > T::zero()) {
            return Err(ServoError::InvalidGain("eta_den_guard must be positive".into()));
        }
        Ok(())
    }
}

/// What a law computed for one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct LawOutput<T> {
    /// Camera-frame twist `(vx, vy, vz, wx, wy, wz)`.
    pub vel: [T; 6],
    pub eta: T,
    /// Blend weight of the norm task; 0 for the pure classic law.
    pub alpha: T,
    /// Rounded trace of the null-space projector actually applied.
    pub projector_rank: usize,
}

/// Interaction rows of one normalized image point `(x, y)` at depth `z`.
pub fn point_interaction<T: Real>(x: T, y: T, z: T) -> [[T; 6]; 2] {
    let one = T::one();
    [
        [-one / z, T::zero(), x / z, x * y, -(one + x * x), y],
        [T::zero(), -one / z, y / z, one + y * y, -x * y, -x],
    ]
}

/// Stacks point rows for the four box corners of an 8-feature vector, all at
/// the same estimated depth.
pub fn stack_interaction<T: Real>(features8: &[T], z_hat: T) -> Mat<T> {
    assert_eq!(features8.len() % 2, 0, "features come in (x, y) pairs");
    let n = features8.len() / 2;
    let mut m = Mat::zeros(2 * n, 6);
    for i in 0..n {
        let rows = point_interaction(features8[2 * i], features8[2 * i + 1], z_hat);
        for (r, row) in rows.iter().enumerate() {
            for c in 0..6 {
                m[(2 * i + r, c)] = row[c];
            }
        }
    }
    m
}

/// Damped pseudo-inverse. Fat or square systems invert the small Gram
/// `M M^T + mu^2 I`; tall systems invert `M^T M + mu^2 I`. With `mu = 0`
/// a rank-deficient system is reported instead of silently regularized.
pub fn damped_pinv<T: Real>(m: &Mat<T>, mu: T) -> Result<Mat<T>, ServoError> {
    let mt = m.transpose();
    let mu2 = mu * mu;
    let rel_tol = T::of(1e-12);
    if m.rows() <= m.cols() {
        let gram = m.matmul(&mt).add_scaled_identity(mu2);
        let inv_rhs = gram.solve(&Mat::identity(m.rows()), rel_tol).map_err(|_| ServoError::IllConditioned)?;
        Ok(mt.matmul(&inv_rhs))
    } else {
        let gram = mt.matmul(m).add_scaled_identity(mu2);
        let x = gram.solve(&mt, rel_tol).map_err(|_| ServoError::IllConditioned)?;
        Ok(x)
    }
}

/// Classic feature-error law: `v = -lambda L+ e + (I - L+ L) sigma`.
pub fn classic_law<T: Real>(
    f: &[T],
    f_star: &[T],
    l: &Mat<T>,
    gains: &VsGains<T>,
    sigma: &[T; 6],
) -> Result<LawOutput<T>, ServoError> {
    gains.validate()?;
    if f.len() != f_star.len() || f.len() != l.rows() || l.cols() != 6 {
        return Err(ServoError::ShapeMismatch(f.len(), l.rows()));
    }
    let e: Vec<T> = f.iter().zip(f_star).map(|(a, b)| *a - *b).collect();
    let eta = norm(&e);
    let pinv = damped_pinv(l, gains.mu)?;
    let primary = pinv.matvec(&e);
    // P sigma = sigma - L+ L sigma; the projector trace gives its rank.
    let plp = pinv.matmul(l);
    let plp_sigma = plp.matvec(sigma);
    let mut vel = [T::zero(); 6];
    let mut trace = T::zero();
    for i in 0..6 {
        vel[i] = -gains.lambda * primary[i] + sigma[i] - plp_sigma[i];
        trace += T::one() - plp[(i, i)];
    }
    let rank = trace.to_f64().unwrap().round().max(0.0) as usize;
    Ok(LawOutput { vel, eta, alpha: T::zero(), projector_rank: rank })
}

/// Norm-task law: the scalar task `eta = |e|` with Jacobian `e^T L / eta`.
///
/// `v = -lambda eta L_eta+ + P_eta sigma` with
/// `L_eta+ = eta L^T e / (e^T L L^T e)` and
/// `P_eta = I - L^T e e^T L / (e^T L L^T e)`.
/// The projector is symmetric, idempotent, and of rank exactly 5, and
/// `eta` decays as `-lambda eta` independently of `sigma`.
pub fn norm_law<T: Real>(
    f: &[T],
    f_star: &[T],
    l: &Mat<T>,
    gains: &VsGains<T>,
    sigma: &[T; 6],
) -> Result<LawOutput<T>, ServoError> {
    gains.validate()?;
    if f.len() != f_star.len() || f.len() != l.rows() || l.cols() != 6 {
        return Err(ServoError::ShapeMismatch(f.len(), l.rows()));
    }
    let e: Vec<T> = f.iter().zip(f_star).map(|(a, b)| *a - *b).collect();
    let eta = norm(&e);
    if eta <= gains.eta_den_guard {
        return Err(ServoError::DegenerateDirection);
    }
    let w = l.transpose().matvec(&e); // L^T e
    let den = dot(&w, &w); // e^T L L^T e
    if den <= gains.eta_den_guard * gains.eta_den_guard {
        return Err(ServoError::DegenerateDirection);
    }
    let ws = dot(&w, sigma);
    let mut vel = [T::zero(); 6];
    for i in 0..6 {
        // -lambda eta * (eta w / den) + (sigma - w (w.sigma) / den)
        vel[i] = -gains.lambda * eta * eta * w[i] / den + sigma[i] - w[i] * ws / den;
    }
    Ok(LawOutput { vel, eta, alpha: T::one(), projector_rank: 5 })
}

/// Null-space projector of the norm task, `I - L^T e e^T L / (e^T L L^T e)`.
/// Exposed for analysis and tests; the laws inline the products.
pub fn norm_projector<T: Real>(
    f: &[T],
    f_star: &[T],
    l: &Mat<T>,
    guard: T,
) -> Result<Mat<T>, ServoError> {
    let e: Vec<T> = f.iter().zip(f_star).map(|(a, b)| *a - *b).collect();
    if norm(&e) <= guard {
        return Err(ServoError::DegenerateDirection);
    }
    let w = l.transpose().matvec(&e);
    let den = dot(&w, &w);
    if den <= guard * guard {
        return Err(ServoError::DegenerateDirection);
    }
    let mut p = Mat::identity(6);
    for i in 0..6 {
        for j in 0..6 {
            p[(i, j)] -= w[i] * w[j] / den;
        }
    }
    Ok(p)
}

/// Smoothstep blend weight over `[eta0, eta1]`: 0 at and below `eta0`,
/// 1 at and above `eta1`, `3t^2 - 2t^3` in between (C1 at both ends).
pub fn switch_alpha<T: Real>(eta: T, eta0: T, eta1: T) -> T {
    if eta <= eta0 {
        return T::zero();
    }
    if eta >= eta1 {
        return T::one();
    }
    let t = (eta - eta0) / (eta1 - eta0);
    t * t * (T::of(3.0) - T::of(2.0) * t)
}

/// Priority blend: far from the goal the norm task runs (five free axes for
/// `sigma`), close to it the classic law takes over; in the band the two
/// twists are mixed by [`switch_alpha`]. With `alpha = 0` the norm law is
/// not evaluated at all, so the near-goal degeneracy of its denominator is
/// never touched.
pub fn combined_law<T: Real>(
    f: &[T],
    f_star: &[T],
    l: &Mat<T>,
    gains: &VsGains<T>,
    sigma: &[T; 6],
) -> Result<LawOutput<T>, ServoError> {
    gains.validate()?;
    let e: Vec<T> = f.iter().zip(f_star).map(|(a, b)| *a - *b).collect();
    let eta = norm(&e);
    let alpha = switch_alpha(eta, gains.eta0, gains.eta1);
    if alpha == T::zero() {
        return classic_law(f, f_star, l, gains, sigma);
    }
    let nl = norm_law(f, f_star, l, gains, sigma)?;
    if alpha == T::one() {
        return Ok(nl);
    }
    let cl = classic_law(f, f_star, l, gains, sigma)?;
    let mut vel = [T::zero(); 6];
    for i in 0..6 {
        vel[i] = alpha * nl.vel[i] + (T::one() - alpha) * cl.vel[i];
    }
    Ok(LawOutput { vel, eta, alpha, projector_rank: nl.projector_rank })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom3d::{Pose, Twist, Vec3};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn gains() -> VsGains<f64> {
        VsGains::default()
    }

    fn random_features8(rng: &mut impl Rng) -> Vec<f64> {
        (0..8).map(|_| rng.random_range(-0.4..0.4)).collect()
    }

    #[test]
    fn point_rows_match_hand_derivation() {
        let rows = point_interaction(0.5_f64, 0.5, 2.0);
        let want0 = [-0.5, 0.0, 0.25, 0.25, -1.25, 0.5];
        let want1 = [0.0, -0.5, 0.25, 1.25, -0.25, -0.5];
        for c in 0..6 {
            assert!((rows[0][c] - want0[c]).abs() < 1e-15);
            assert!((rows[1][c] - want1[c]).abs() < 1e-15);
        }
    }

    /// Oracle: finite-difference the actual normalized projection of a fixed
    /// world point under a small camera motion and compare with L v.
    #[test]
    fn interaction_rows_predict_feature_motion()  {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..200 {
            let p_w = Vec3::new(
                rng.random_range(-0.3..0.3),
                rng.random_range(-0.3..0.3),
                rng.random_range(0.5..2.0),
            );
            let v: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
            let twist = Twist::from_array6([v[0], v[1], v[2], v[3], v[4], v[5]]);
            let x = p_w.x / p_w.z;
            let y = p_w.y / p_w.z;
            let rows = point_interaction(x, y, p_w.z);
            let pred = [
                rows[0].iter().zip(&v).map(|(a, b)| a * b).sum::<f64>(),
                rows[1].iter().zip(&v).map(|(a, b)| a * b).sum::<f64>(),
            ];
            let h = 1e-6;
            // Camera at identity: body twist equals world twist for one step.
            let cam = Pose::<f64>::identity().integrate(&twist, h);
            let pc = cam.inverse().transform_point(p_w);
            let fd = [(pc.x / pc.z - x) / h, (pc.y / pc.z - y) / h];
            assert!((fd[0] - pred[0]).abs() < 1e-4, "{} vs {}", fd[0], pred[0]);
            assert!((fd[1] - pred[1]).abs() < 1e-4, "{} vs {}", fd[1], pred[1]);
        }
    }

    #[test]
    fn stack_places_corner_rows_in_order() {
        let f = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8];
        let l = stack_interaction(&f, 1.5);
        assert_eq!(l.rows(), 8);
        assert_eq!(l.cols(), 6);
        for i in 0..4 {
            let rows = point_interaction(f[2 * i], f[2 * i + 1], 1.5);
            for c in 0..6 {
                assert_eq!(l[(2 * i, c)], rows[0][c]);
                assert_eq!(l[(2 * i + 1, c)], rows[1][c]);
            }
        }
    }

    #[test]
    fn pinv_of_row_vector_matches_closed_form() {
        let m = Mat::from_rows(&[vec![3.0_f64, 4.0]]);
        let p = damped_pinv(&m, 0.0).unwrap();
        assert!((p[(0, 0)] - 0.12).abs() < 1e-12);
        assert!((p[(1, 0)] - 0.16).abs() < 1e-12);
    }

    fn na_pinv_damped(m: &Mat<f64>, mu: f64) -> Mat<f64> {
        let na = nalgebra::DMatrix::from_fn(m.rows(), m.cols(), |i, j| m[(i, j)]);
        let svd = na.svd(true, true);
        let u = svd.u.unwrap();
        let vt = svd.v_t.unwrap();
        let mut s = nalgebra::DMatrix::zeros(vt.nrows(), u.ncols());
        for (k, sv) in svd.singular_values.iter().enumerate() {
            s[(k, k)] = sv / (sv * sv + mu * mu);
        }
        let p = vt.transpose() * s * u.transpose();
        Mat::from_fn(p.nrows(), p.ncols(), |i, j| p[(i, j)])
    }

    /// Oracle: SVD-based damped pseudo-inverse.
    #[test]
    fn pinv_matches_svd_oracle_tall_and_fat() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for mu in [0.0, 0.05, 0.3] {
            for _ in 0..50 {
                let tall = Mat::from_fn(8, 6, |_, _| rng.random_range(-1.0..1.0));
                let fat = Mat::from_fn(4, 6, |_, _| rng.random_range(-1.0..1.0));
                for m in [tall, fat] {
                    let mine = damped_pinv(&m, mu).unwrap();
                    let oracle = na_pinv_damped(&m, mu);
                    assert!(
                        mine.sub(&oracle).max_abs() < 1e-8,
                        "mu={mu} gap={}",
                        mine.sub(&oracle).max_abs()
                    );
                }
            }
        }
    }

    #[test]
    fn undamped_pinv_rejects_rank_deficiency() {
        // Two identical rows: M M^T is singular.
        let row = vec![1.0_f64, 2.0, 3.0, 0.0, 0.0, 0.0];
        let m = Mat::from_rows(&[row.clone(), row]);
        assert_eq!(damped_pinv(&m, 0.0).unwrap_err(), ServoError::IllConditioned);
        // Damping restores solvability.
        assert!(damped_pinv(&m, 0.01).is_ok());
    }

    #[test]
    fn classic_law_descends_feature_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for _ in 0..100 {
            let f = random_features8(&mut rng);
            let f_star = random_features8(&mut rng);
            let l = stack_interaction(&f, 1.0);
            let out = classic_law(&f, &f_star, &l, &gains(), &[0.0; 6]).unwrap();
            // Predicted error rate: d(eta^2)/dt = 2 e^T L v < 0 away from goal.
            let e: Vec<f64> = f.iter().zip(&f_star).map(|(a, b)| a - b).collect();
            let lv = l.matvec(&out.vel);
            let rate: f64 = e.iter().zip(&lv).map(|(a, b)| a * b).sum();
            if out.eta > 1e-6 {
                assert!(rate < 0.0, "non-descending rate {rate}");
            }
        }
    }

    #[test]
    fn classic_law_with_full_rank_stack_ignores_sigma() {
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        let f = random_features8(&mut rng);
        let f_star = random_features8(&mut rng);
        let l = stack_interaction(&f, 1.0);
        let mut g = gains();
        g.mu = 0.0;
        let quiet = classic_law(&f, &f_star, &l, &g, &[0.0; 6]).unwrap();
        let noisy = classic_law(&f, &f_star, &l, &g, &[0.4, -0.2, 0.1, 0.3, -0.5, 0.2]).unwrap();
        for i in 0..6 {
            assert!((quiet.vel[i] - noisy.vel[i]).abs() < 1e-10);
        }
        assert_eq!(quiet.projector_rank, 0);
    }

    #[test]
    fn classic_law_single_point_keeps_a_null_space() {
        let f = [0.1, -0.2];
        let f_star = [0.0, 0.0];
        let l = stack_interaction(&f, 1.0);
        let mut g = gains();
        g.mu = 0.0;
        let sigma = [0.3, 0.1, -0.2, 0.05, 0.2, -0.4];
        let out = classic_law(&f, &f_star, &l, &g, &sigma).unwrap();
        assert_eq!(out.projector_rank, 4);
        // The sigma component must not disturb the feature error:
        // L (v - v_primary) = L P sigma = 0 for a full-row-rank L.
        let silent = classic_law(&f, &f_star, &l, &g, &[0.0; 6]).unwrap();
        let diff: Vec<f64> = (0..6).map(|i| out.vel[i] - silent.vel[i]).collect();
        for r in l.matvec(&diff) {
            assert!(r.abs() < 1e-12);
        }
    }

    #[test]
    fn norm_law_matches_manual_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(47);
        for _ in 0..200 {
            let f = random_features8(&mut rng);
            let f_star = random_features8(&mut rng);
            let sigma: [f64; 6] = std::array::from_fn(|_| rng.random_range(-0.5..0.5));
            let l = stack_interaction(&f, rng.random_range(0.5..2.0));
            let g = gains();
            let out = norm_law(&f, &f_star, &l, &g, &sigma).unwrap();
            let e: Vec<f64> = f.iter().zip(&f_star).map(|(a, b)| a - b).collect();
            let w = l.transpose().matvec(&e);
            let den: f64 = w.iter().map(|x| x * x).sum();
            for i in 0..6 {
                let ws: f64 = w.iter().zip(&sigma).map(|(a, b)| a * b).sum();
                let want = -g.lambda * out.eta * out.eta * w[i] / den + sigma[i] - w[i] * ws / den;
                assert!((out.vel[i] - want).abs() < 1e-12);
            }
        }
    }

    /// The one property everything else rests on: the measured decay rate of
    /// eta under the law equals -lambda eta no matter which sigma is added.
    #[test]
    fn norm_law_decay_rate_is_sigma_independent() {
        let mut rng = ChaCha8Rng::seed_from_u64(53);
        for _ in 0..200 {
            let f = random_features8(&mut rng);
            let f_star = random_features8(&mut rng);
            let sigma: [f64; 6] = std::array::from_fn(|_| rng.random_range(-2.0..2.0));
            let l = stack_interaction(&f, 1.0);
            let g = gains();
            let out = norm_law(&f, &f_star, &l, &g, &sigma).unwrap();
            let e: Vec<f64> = f.iter().zip(&f_star).map(|(a, b)| a - b).collect();
            // eta_dot = (e^T L v) / eta
            let lv = l.matvec(&out.vel);
            let rate: f64 = e.iter().zip(&lv).map(|(a, b)| a * b).sum::<f64>() / out.eta;
            assert!((rate - (-g.lambda * out.eta)).abs() < 1e-9, "rate {rate}");
        }
    }

    #[test]
    fn norm_law_guards_degenerate_directions() {
        let f = [0.1, 0.1, 0.2, 0.1, 0.2, 0.2, 0.1, 0.2];
        let l = stack_interaction(&f, 1.0);
        // Zero error: no direction to descend.
        assert_eq!(
            norm_law(&f, &f, &l, &gains(), &[0.0; 6]).unwrap_err(),
            ServoError::DegenerateDirection
        );
    }

    #[test]
    fn switch_alpha_is_a_clamped_smoothstep() {
        assert_eq!(switch_alpha(0.005_f64, 0.01, 0.05), 0.0);
        assert_eq!(switch_alpha(0.01, 0.01, 0.05), 0.0);
        assert_eq!(switch_alpha(0.05, 0.01, 0.05), 1.0);
        assert_eq!(switch_alpha(0.2, 0.01, 0.05), 1.0);
        assert!((switch_alpha(0.03_f64, 0.01, 0.05) - 0.5).abs() < 1e-15);
        // Monotone, C1 at the ends.
        let mut prev = 0.0;
        for k in 0..=100 {
            let eta = 0.01 + 0.04 * k as f64 / 100.0;
            let a = switch_alpha(eta, 0.01, 0.05);
            assert!(a >= prev);
            prev = a;
        }
        // One-sided slopes vanish at the band edges like O(h).
        let h = 1e-7;
        let d0 = (switch_alpha(0.01 + h, 0.01, 0.05) - 0.0) / h;
        let d1 = (1.0 - switch_alpha(0.05 - h, 0.01, 0.05)) / h;
        assert!(d0 < 1e-3 && d1 < 1e-3, "d0 {d0} d1 {d1}");
    }

    #[test]
    fn combined_law_reduces_to_each_side_outside_the_band() {
        let mut rng = ChaCha8Rng::seed_from_u64(61);
        let f_star = random_features8(&mut rng);
        let sigma = [0.2, -0.1, 0.3, 0.05, -0.2, 0.1];
        let g = gains();
        // Far: eta well above eta1.
        let far: Vec<f64> = f_star.iter().map(|x| x + 0.2).collect();
        let l_far = stack_interaction(&far, 1.0);
        let c = combined_law(&far, &f_star, &l_far, &g, &sigma).unwrap();
        let n = norm_law(&far, &f_star, &l_far, &g, &sigma).unwrap();
        assert_eq!(c, n);
        // Near: eta below eta0 -> classic, norm law untouched.
        let near: Vec<f64> = f_star.iter().map(|x| x + 0.003).collect();
        let l_near = stack_interaction(&near, 1.0);
        let c = combined_law(&near, &f_star, &l_near, &g, &sigma).unwrap();
        let cl = classic_law(&near, &f_star, &l_near, &g, &sigma).unwrap();
        assert_eq!(c, cl);
        assert_eq!(c.alpha, 0.0);
    }

    #[test]
    fn combined_law_blends_in_the_band() {
        let mut rng = ChaCha8Rng::seed_from_u64(67);
        let f_star = random_features8(&mut rng);
        let g = gains();
        // Construct eta inside (eta0, eta1): offset each of 8 entries by d
        // gives eta = d * sqrt(8).
        let d = 0.03 / 8.0_f64.sqrt();
        let f: Vec<f64> = f_star.iter().map(|x| x + d).collect();
        let l = stack_interaction(&f, 1.0);
        let sigma = [0.1, 0.2, -0.1, 0.0, 0.1, -0.2];
        let c = combined_law(&f, &f_star, &l, &g, &sigma).unwrap();
        assert!(c.alpha > 0.0 && c.alpha < 1.0);
        let n = norm_law(&f, &f_star, &l, &g, &sigma).unwrap();
        let cl = classic_law(&f, &f_star, &l, &g, &sigma).unwrap();
        for i in 0..6 {
            let want = c.alpha * n.vel[i] + (1.0 - c.alpha) * cl.vel[i];
            assert!((c.vel[i] - want).abs() < 1e-14);
        }
    }

    #[test]
    fn invalid_gains_are_rejected() {
        let f = [0.1; 8];
        let l = stack_interaction(&f, 1.0);
        let mut g = gains();
        g.lambda = 0.0;
        assert!(matches!(
            combined_law(&f, &[0.0; 8], &l, &g, &[0.0; 6]),
            Err(ServoError::InvalidGain(_))
        ));
        let mut g = gains();
        g.eta0 = 0.05;
        g.eta1 = 0.01;
        assert!(matches!(
            combined_law(&f, &[0.0; 8], &l, &g, &[0.0; 6]),
            Err(ServoError::InvalidGain(_))
        ));
    }
}
