//! Observation model, divergence kernel and the closed-form loss of a
//! scale-expanded Gaussian predictive density.
//!
//! The kernel used throughout is the nonnegative form
//!
//! ```text
//! h_α(z) = 4/(1−α²) · ((1+α)/2 · z − z^{(1+α)/2} + (1−α)/2),   |α| < 1
//! h_α(z) = z − ln z − 1,                                        α = −1
//! ```
//!
//! It differs from `4/(1−α²)(1 − z^{(1+α)/2})` by an affine function of `z`
//! whose integral against `q(y|θ)` vanishes, because `∫ q̂ = ∫ q = 1`. Losses
//! and risks are therefore identical under either form.

use serde::Serialize;

use crate::error::{domain, Result};

/// `X ~ N_d(θ, σ_X² I)` observed, `Y ~ N_d(θ, σ_Y² I)` predicted.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Model {
    d: usize,
    sigma_x2: f64,
    sigma_y2: f64,
}

impl Model {
    pub fn new(d: usize, sigma_x2: f64, sigma_y2: f64) -> Result<Self> {
        if d == 0 {
            return Err(domain("dimension d must be at least 1"));
        }
        if !(sigma_x2 > 0.0 && sigma_x2.is_finite()) {
            return Err(domain(format!("sigma_x2 must be positive and finite, got {sigma_x2}")));
        }
        if !(sigma_y2 > 0.0 && sigma_y2.is_finite()) {
            return Err(domain(format!("sigma_y2 must be positive and finite, got {sigma_y2}")));
        }
        let r = sigma_x2 / sigma_y2;
        if !(r > 0.0 && r.is_finite()) {
            return Err(domain(format!("variance ratio r = {r} is not positive and finite")));
        }
        Ok(Self { d, sigma_x2, sigma_y2 })
    }

    /// Model with `σ_X² = r` and `σ_Y² = 1`.
    pub fn with_ratio(d: usize, r: f64) -> Result<Self> {
        Self::new(d, r, 1.0)
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn sigma_x2(&self) -> f64 {
        self.sigma_x2
    }

    pub fn sigma_y2(&self) -> f64 {
        self.sigma_y2
    }

    /// `r = σ_X² / σ_Y²`.
    pub fn r(&self) -> f64 {
        self.sigma_x2 / self.sigma_y2
    }
}

/// Divergence index `α ∈ [−1, 1)`; `α = −1` is Kullback-Leibler and `α = 0`
/// is four times squared Hellinger.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AlphaLoss {
    alpha: f64,
}

impl AlphaLoss {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(-1.0..1.0).contains(&alpha) {
            return Err(domain(format!("alpha must lie in [-1, 1), got {alpha}")));
        }
        Ok(Self { alpha })
    }

    pub fn kullback_leibler() -> Self {
        Self { alpha: -1.0 }
    }

    pub fn hellinger() -> Self {
        Self { alpha: 0.0 }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn is_kl(&self) -> bool {
        self.alpha == -1.0
    }

    /// `4/(1−α²)`, the scale of the finite branch.
    pub(crate) fn scale(&self) -> f64 {
        4.0 / (1.0 - self.alpha * self.alpha)
    }

    pub(crate) fn require_finite_branch(&self) -> Result<()> {
        if self.is_kl() {
            Err(domain("operation requires |alpha| < 1; alpha = -1 has its own routine"))
        } else {
            Ok(())
        }
    }
}

pub(crate) fn check_expansion(c: f64) -> Result<()> {
    if !(c >= 1.0 && c.is_finite()) {
        return Err(domain(format!("expansion c must be finite and >= 1, got {c}")));
    }
    Ok(())
}

/// Quantities of the closed-form loss at expansion `c`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LossKernelParams {
    /// `γ₀(c) = 2σ_Y²(c²(1−α) + 1 + α)/(1−α²)`.
    pub gamma0: f64,
    /// `A₁(c) = (2c^{1−α}/B(c))^{1/2}`.
    pub a1: f64,
    /// `B(c) = (1−α)c² + 1 + α`.
    pub bc: f64,
}

impl LossKernelParams {
    pub fn new(sigma_y2: f64, c: f64, loss: AlphaLoss) -> Result<Self> {
        loss.require_finite_branch()?;
        check_expansion(c)?;
        let bc = b_of_c(c, loss.alpha);
        Ok(Self {
            gamma0: gamma0(sigma_y2, c, loss.alpha),
            a1: ln_a1(c, loss.alpha).exp(),
            bc,
        })
    }
}

pub(crate) fn b_of_c(c: f64, alpha: f64) -> f64 {
    (1.0 - alpha) * c * c + 1.0 + alpha
}

pub(crate) fn gamma0(sigma_y2: f64, c: f64, alpha: f64) -> f64 {
    2.0 * sigma_y2 * b_of_c(c, alpha) / (1.0 - alpha * alpha)
}

/// `ln A₁(c) = ½((1−α) ln c − ln(1 + (1−α)(c²−1)/2))`, accurate near `c = 1`.
pub(crate) fn ln_a1(c: f64, alpha: f64) -> f64 {
    let growth = (1.0 - alpha) * (c - 1.0) * (c + 1.0) / 2.0;
    0.5 * ((1.0 - alpha) * c.ln() - growth.ln_1p())
}

/// The divergence kernel `h_α(z)` in its nonnegative form.
pub fn h_alpha(z: f64, loss: AlphaLoss) -> Result<f64> {
    if !(z > 0.0) || !z.is_finite() {
        return Err(domain(format!("h_alpha requires finite z > 0, got {z}")));
    }
    let a = loss.alpha;
    if loss.is_kl() {
        // z − ln z − 1 with ln written around z = 1
        let w = z - 1.0;
        return Ok(w - w.ln_1p());
    }
    let p = (1.0 + a) / 2.0;
    // z^p − 1 − p(z − 1), negated
    let zp_m1 = (p * z.ln()).exp_m1();
    Ok(loss.scale() * (p * (z - 1.0) - zp_m1))
}

/// Closed-form `L_α(θ, q_{θ̂,c})` as a function of `‖θ̂ − θ‖²`.
pub fn loss_from_dist2(model: &Model, dist2: f64, c: f64, loss: AlphaLoss) -> Result<f64> {
    loss.require_finite_branch()?;
    check_expansion(c)?;
    if !(dist2 >= 0.0) {
        return Err(domain(format!("squared distance must be >= 0, got {dist2}")));
    }
    Ok(unchecked_loss(model.d as f64, model.sigma_y2, dist2, c, loss.alpha))
}

/// `4/(1−α²)(1 − A₁^d e^{−dist2/(2γ₀)})` without argument checks.
pub(crate) fn unchecked_loss(d: f64, sigma_y2: f64, dist2: f64, c: f64, alpha: f64) -> f64 {
    let scale = 4.0 / (1.0 - alpha * alpha);
    let expo = d * ln_a1(c, alpha) - dist2 / (2.0 * gamma0(sigma_y2, c, alpha));
    if expo < -745.0 {
        return scale;
    }
    -scale * expo.exp_m1()
}

/// Closed-form loss of `N_d(θ̂, c²σ_Y² I)` for the density of `N_d(θ, σ_Y² I)`,
/// valid for `|α| < 1`.
pub fn loss_closed(
    model: &Model,
    theta_hat: &[f64],
    theta: &[f64],
    c: f64,
    loss: AlphaLoss,
) -> Result<f64> {
    loss_from_dist2(model, squared_distance(model, theta_hat, theta)?, c, loss)
}

/// Kullback-Leibler divergence from `N_d(θ, σ_Y² I)` to `N_d(θ̂, c²σ_Y² I)`.
pub fn loss_kl(model: &Model, theta_hat: &[f64], theta: &[f64], c: f64) -> Result<f64> {
    check_expansion(c)?;
    let dist2 = squared_distance(model, theta_hat, theta)?;
    Ok(kl_from_dist2(model.d as f64, model.sigma_y2, dist2, c))
}

pub(crate) fn kl_from_dist2(d: f64, sigma_y2: f64, dist2: f64, c: f64) -> f64 {
    let inv_c2 = 1.0 / (c * c);
    0.5 * d * (2.0 * c.ln() + inv_c2 - 1.0) + dist2 * inv_c2 / (2.0 * sigma_y2)
}

pub(crate) fn squared_distance(model: &Model, a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != model.d || b.len() != model.d {
        return Err(domain(format!(
            "points must have dimension {}, got {} and {}",
            model.d,
            a.len(),
            b.len()
        )));
    }
    Ok(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::integrate;
    use proptest::prelude::*;

    fn alpha(a: f64) -> AlphaLoss {
        AlphaLoss::new(a).unwrap()
    }

    #[test]
    fn rejects_bad_model_and_alpha() {
        assert!(Model::new(0, 1.0, 1.0).is_err());
        assert!(Model::new(1, 0.0, 1.0).is_err());
        assert!(Model::new(1, 1.0, -2.0).is_err());
        assert!(Model::new(1, f64::INFINITY, 1.0).is_err());
        assert!(AlphaLoss::new(1.0).is_err());
        assert!(AlphaLoss::new(-1.000_001).is_err());
        assert!(AlphaLoss::new(f64::NAN).is_err());
        assert!(AlphaLoss::new(-1.0).unwrap().is_kl());
    }

    #[test]
    fn h_alpha_examples() {
        for a in [-1.0, -0.5, 0.0, 0.3, 0.9] {
            assert_eq!(h_alpha(1.0, alpha(a)).unwrap(), 0.0);
        }
        assert!((h_alpha(4.0, alpha(0.0)).unwrap() - 2.0).abs() < 1e-14);
        let kl = h_alpha(2.0, alpha(-1.0)).unwrap();
        assert!((kl - (1.0 - std::f64::consts::LN_2)).abs() < 1e-15);
        // 30-digit evaluation of the kernel at z = 0.5, α = 0.5
        let v = h_alpha(0.5, alpha(0.5)).unwrap();
        assert!((v - 0.162_114_359_992_743_82).abs() < 1e-15);
    }

    #[test]
    fn h_alpha_domain_errors() {
        assert!(h_alpha(0.0, alpha(0.0)).is_err());
        assert!(h_alpha(-1.0, alpha(-1.0)).is_err());
        assert!(h_alpha(f64::NAN, alpha(0.2)).is_err());
    }

    #[test]
    fn kernel_params_invariants() {
        for a in [-0.9, -0.3, 0.0, 0.5, 0.95] {
            let p1 = LossKernelParams::new(1.0, 1.0, alpha(a)).unwrap();
            assert_eq!(p1.a1, 1.0);
            assert!((p1.bc - 2.0).abs() < 1e-15);
            for c in [1.0001, 1.2, 2.0, 10.0] {
                let p = LossKernelParams::new(2.0, c, alpha(a)).unwrap();
                assert!(p.gamma0 > 0.0);
                assert!(p.a1 > 0.0 && p.a1 < 1.0, "a={a} c={c} a1={}", p.a1);
                assert!(p.bc > 2.0);
            }
        }
        assert!(LossKernelParams::new(1.0, 0.9, alpha(0.0)).is_err());
        assert!(LossKernelParams::new(1.0, 1.5, alpha(-1.0)).is_err());
    }

    #[test]
    fn loss_closed_examples() {
        let m = Model::new(1, 1.0, 1.0).unwrap();
        assert_eq!(loss_closed(&m, &[0.3], &[0.3], 1.0, alpha(0.4)).unwrap(), 0.0);
        let v = loss_closed(&m, &[1.0], &[0.0], 1.0, alpha(0.0)).unwrap();
        assert!((v - 4.0 * (1.0 - (-0.125f64).exp())).abs() < 1e-15);
    }

    #[test]
    fn loss_kl_examples() {
        let m = Model::new(1, 1.0, 1.0).unwrap();
        assert_eq!(loss_kl(&m, &[2.0], &[2.0], 1.0).unwrap(), 0.0);
        let v = loss_kl(&m, &[0.0], &[0.0], 2.0).unwrap();
        assert!((v - (std::f64::consts::LN_2 - 0.375)).abs() < 1e-15);
    }

    /// Eq. (1.1) integrated directly in one dimension.
    fn quadrature_loss_1d(diff: f64, c: f64, a: f64, sy2: f64) -> f64 {
        let sy = sy2.sqrt();
        let q = |y: f64| (-(y * y) / (2.0 * sy2)).exp() / (sy * (2.0 * std::f64::consts::PI).sqrt());
        let qh = |y: f64| {
            let s = c * sy;
            (-((y - diff) * (y - diff)) / (2.0 * s * s)).exp() / (s * (2.0 * std::f64::consts::PI).sqrt())
        };
        let lo = diff.min(0.0) - 14.0 * c * sy;
        let hi = diff.max(0.0) + 14.0 * c * sy;
        let f = |y: f64| {
            let qy = q(y);
            if qy == 0.0 {
                return 0.0;
            }
            h_alpha(qh(y) / qy, alpha(a)).map(|h| h * qy).unwrap_or(0.0)
        };
        integrate(f, lo, hi, 1e-13, 1e-12).unwrap().value
    }

    #[test]
    fn loss_closed_matches_quadrature_in_one_dimension() {
        for (diff, c, a, sy2) in [(0.7, 1.3, 0.2, 1.0), (2.0, 1.0, -0.6, 0.5), (-1.5, 2.1, 0.8, 3.0)] {
            let m = Model::new(1, 1.0, sy2).unwrap();
            let closed = loss_closed(&m, &[diff], &[0.0], c, alpha(a)).unwrap();
            let quad = quadrature_loss_1d(diff, c, a, sy2);
            assert!((closed - quad).abs() < 1e-9 * closed.max(1.0), "{closed} vs {quad}");
        }
    }

    #[test]
    fn kl_is_the_alpha_limit() {
        let m = Model::new(3, 1.0, 1.7).unwrap();
        let (th, t) = ([0.4, -1.0, 2.0], [0.0, 0.5, 1.0]);
        for c in [1.0, 1.3, 2.5] {
            let kl = loss_kl(&m, &th, &t, c).unwrap();
            let near = loss_closed(&m, &th, &t, c, alpha(-1.0 + 1e-6)).unwrap();
            assert!((near - kl).abs() < 1e-5, "c={c}: {near} vs {kl}");
            // Richardson extrapolation over α = −1 + 10^{−k}
            let mut prev = f64::NAN;
            for k in 4..=8 {
                let h = 10f64.powi(-k);
                let v1 = loss_closed(&m, &th, &t, c, alpha(-1.0 + h)).unwrap();
                let v2 = loss_closed(&m, &th, &t, c, alpha(-1.0 + 2.0 * h)).unwrap();
                prev = 2.0 * v1 - v2;
            }
            assert!((prev - kl).abs() < 1e-6, "c={c}: {prev} vs {kl}");
        }
    }

    proptest! {
        #[test]
        fn h_alpha_nonnegative_and_convex(
            a in -0.999f64..0.999,
            z1 in 1e-3f64..20.0,
            z2 in 1e-3f64..20.0,
        ) {
            let l = alpha(a);
            let h1 = h_alpha(z1, l).unwrap();
            let h2 = h_alpha(z2, l).unwrap();
            prop_assert!(h1 >= 0.0 && h2 >= 0.0);
            let mid = h_alpha(0.5 * (z1 + z2), l).unwrap();
            prop_assert!(mid <= 0.5 * (h1 + h2) + 1e-12 * (h1 + h2).max(1.0));
        }

        #[test]
        fn h_alpha_monotone_around_one(a in -1.0f64..0.999, z in 0.01f64..0.99) {
            let l = alpha(a);
            let left = h_alpha(z, l).unwrap();
            prop_assert!(left > 0.0);
            prop_assert!(h_alpha(z * 0.9, l).unwrap() > left);
            let right = h_alpha(1.0 / z, l).unwrap();
            prop_assert!(h_alpha(1.1 / z, l).unwrap() > right);
        }

        #[test]
        fn loss_depends_only_on_distance(
            d in 1usize..5,
            a in -0.99f64..0.99,
            c in 1.0f64..3.0,
            shift in -5.0f64..5.0,
            dist in 0.0f64..4.0,
            angle in 0.0f64..6.28,
        ) {
            let m = Model::new(d, 1.0, 1.3).unwrap();
            let l = alpha(a);
            let base: Vec<f64> = (0..d).map(|i| i as f64 * 0.3 + shift).collect();
            let mut moved = base.clone();
            moved[0] += dist;
            let v1 = loss_closed(&m, &moved, &base, c, l).unwrap();
            // rotate the displacement in the first two coordinates
            let mut rotated = base.clone();
            if d >= 2 {
                rotated[0] += dist * angle.cos();
                rotated[1] += dist * angle.sin();
            } else {
                rotated[0] -= dist;
            }
            let v2 = loss_closed(&m, &rotated, &base, c, l).unwrap();
            prop_assert!((v1 - v2).abs() <= 1e-12 * v1.max(1.0));
            let origin = vec![0.0; d];
            let mut e1 = vec![0.0; d];
            e1[0] = dist;
            let v3 = loss_closed(&m, &e1, &origin, c, l).unwrap();
            prop_assert!((v1 - v3).abs() <= 1e-12 * v1.max(1.0));
        }

        #[test]
        fn loss_increasing_in_distance(a in -0.99f64..0.99, c in 1.0f64..3.0, t in 0.0f64..5.0) {
            let m = Model::new(2, 1.0, 1.0).unwrap();
            let l = alpha(a);
            let v1 = loss_from_dist2(&m, t * t, c, l).unwrap();
            let v2 = loss_from_dist2(&m, (t + 0.1) * (t + 0.1), c, l).unwrap();
            prop_assert!(v2 > v1);
        }
    }
}
