//! Analytic frequentist risks of `q_{θ̂,c} = N_d(θ̂(X), c²σ_Y² I)` for
//! `θ̂ = X`, `θ̂ = aX` and the univariate `θ̂ = max(X, 0)`.
//!
//! Every risk has the form `4/(1−α²)(1 − A₁(c)^d E_θ[e^{−‖θ̂−θ‖²/(2γ₀)}])`;
//! the functions below differ only in the closed form of that expectation.
//! Tail factors use [`exp_neg`], so at very large `‖θ‖` the risks settle on
//! their limiting values instead of producing NaN.

use serde::Serialize;

use crate::error::{domain, Result};
use crate::model::{check_expansion, gamma0, ln_a1, AlphaLoss, Model};
use crate::special::{exp_neg, normal_cdf};

/// `4/(1−α²)(1 − e^{ln_factor})`, computed without cancellation.
fn risk_from_ln_factor(loss: AlphaLoss, ln_factor: f64) -> f64 {
    if ln_factor < -745.0 {
        return loss.scale();
    }
    -loss.scale() * ln_factor.exp_m1()
}

/// Constant risk of `q_{X,c}`.
pub fn risk_identity(model: &Model, c: f64, loss: AlphaLoss) -> Result<f64> {
    risk_affine(model, 1.0, 0.0, c, loss)
}

/// Minimizer of [`risk_identity`] in `c`: `√(1 + r(1−α)/2)`. Defined for
/// `α = −1` as well, where it is `√(1+r)`.
pub fn c_opt(model: &Model, loss: AlphaLoss) -> f64 {
    (1.0 + model.r() * (1.0 - loss.alpha()) / 2.0).sqrt()
}

/// `R(θ, q_{X,1}) / R(θ, q_{X,c_opt})`.
pub fn risk_ratio_identity(model: &Model, loss: AlphaLoss) -> Result<f64> {
    loss.require_finite_branch()?;
    let (a, r, d) = (loss.alpha(), model.r(), model.d() as f64);
    let num = -(-(d / 2.0) * (r * (1.0 - a * a) / 4.0).ln_1p()).exp_m1();
    let den = -(-(d * (1.0 + a) / 4.0) * (r * (1.0 - a) / 2.0).ln_1p()).exp_m1();
    Ok(num / den)
}

/// Exact risk of `q_{aX,c}`; depends on `θ` only through `‖θ‖`.
pub fn risk_affine(model: &Model, a: f64, norm_theta: f64, c: f64, loss: AlphaLoss) -> Result<f64> {
    loss.require_finite_branch()?;
    check_expansion(c)?;
    check_shrink(a)?;
    if !(norm_theta >= 0.0) {
        return Err(domain(format!("norm of theta must be >= 0, got {norm_theta}")));
    }
    let (al, d, sx2, sy2) = (loss.alpha(), model.d() as f64, model.sigma_x2(), model.sigma_y2());
    let g0 = gamma0(sy2, c, al);
    // A₁^d (γ₀/(γ₀ + a²σ_X²))^{d/2} e^{−(a−1)²‖θ‖²/(2(γ₀+a²σ_X²))}
    let spread = g0 + a * a * sx2;
    let ln_factor = d * ln_a1(c, al) - 0.5 * d * (a * a * sx2 / g0).ln_1p()
        - (a - 1.0).powi(2) * norm_theta * norm_theta / (2.0 * spread);
    Ok(risk_from_ln_factor(loss, ln_factor))
}

/// `lim_{‖θ‖→∞}` of [`risk_affine`]: `4/(1−α²)` for `a < 1`, the constant
/// identity risk for `a = 1`.
pub fn risk_affine_limit(model: &Model, a: f64, c: f64, loss: AlphaLoss) -> Result<f64> {
    check_shrink(a)?;
    if a == 1.0 {
        risk_identity(model, c, loss)
    } else {
        loss.require_finite_branch()?;
        check_expansion(c)?;
        Ok(loss.scale())
    }
}

fn check_shrink(a: f64) -> Result<()> {
    if !(a > 0.0 && a <= 1.0) {
        return Err(domain(format!("affine multiplier a must lie in (0, 1], got {a}")));
    }
    Ok(())
}

/// Components of the risk of `q_{max(X,0),c}` at a given `θ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TruncatedRiskParams {
    /// `γ₁(c) = (γ₀/(γ₀ + σ_X²))^{1/2}`.
    pub gamma1: f64,
    /// `A₂(c) = −1 + A₁(c)(1 + γ₁(c))`.
    pub a2: f64,
    /// `G₁(θ,c) = e^{−θ²/(2γ₀)} Φ(−θ/σ_X)`.
    pub g1: f64,
    /// `G₂(θ,c) = γ₁ Φ(θ/(γ₁σ_X))`.
    pub g2: f64,
}

impl TruncatedRiskParams {
    pub fn new(model: &Model, theta: f64, c: f64, loss: AlphaLoss) -> Result<Self> {
        loss.require_finite_branch()?;
        check_expansion(c)?;
        check_univariate(model)?;
        if !theta.is_finite() {
            return Err(domain(format!("theta must be finite, got {theta}")));
        }
        let al = loss.alpha();
        let sx = model.sigma_x2().sqrt();
        let g0 = gamma0(model.sigma_y2(), c, al);
        let gamma1 = gamma1(model, c, al);
        let a1 = ln_a1(c, al).exp();
        Ok(Self {
            gamma1,
            a2: -1.0 + a1 * (1.0 + gamma1),
            g1: exp_neg(theta * theta / (2.0 * g0)) * normal_cdf(-theta / sx),
            g2: gamma1 * normal_cdf(theta / (gamma1 * sx)),
        })
    }

    /// `G(θ,c) = G₁ + G₂ = E_θ[e^{−(θ̂₊−θ)²/(2γ₀)}]`.
    pub fn g(&self) -> f64 {
        self.g1 + self.g2
    }
}

fn check_univariate(model: &Model) -> Result<()> {
    if model.d() != 1 {
        return Err(domain(format!("the truncated estimator risk needs d = 1, got d = {}", model.d())));
    }
    Ok(())
}

pub(crate) fn gamma1(model: &Model, c: f64, alpha: f64) -> f64 {
    let g0 = gamma0(model.sigma_y2(), c, alpha);
    (g0 / (g0 + model.sigma_x2())).sqrt()
}

/// Exact risk of `q_{max(X,0),c}` for `d = 1`; valid for any real `θ`.
pub fn risk_truncated(model: &Model, theta: f64, c: f64, loss: AlphaLoss) -> Result<f64> {
    let p = TruncatedRiskParams::new(model, theta, c, loss)?;
    let a1 = ln_a1(c, loss.alpha()).exp();
    Ok(loss.scale() * (1.0 - a1 * p.g()))
}

/// [`risk_truncated`] at `θ = 0`: `4/(1−α²)(1 − A₁(1+γ₁)/2)`.
pub fn risk_truncated_at_zero(model: &Model, c: f64, loss: AlphaLoss) -> Result<f64> {
    loss.require_finite_branch()?;
    check_expansion(c)?;
    check_univariate(model)?;
    let a1 = ln_a1(c, loss.alpha()).exp();
    let g1 = gamma1(model, c, loss.alpha());
    Ok(loss.scale() * (1.0 - 0.5 * a1 * (1.0 + g1)))
}

/// `lim_{θ→∞}` of [`risk_truncated`]: `4/(1−α²)(1 − A₁γ₁)`.
pub fn risk_truncated_limit(model: &Model, c: f64, loss: AlphaLoss) -> Result<f64> {
    loss.require_finite_branch()?;
    check_expansion(c)?;
    check_univariate(model)?;
    let a1 = ln_a1(c, loss.alpha()).exp();
    Ok(loss.scale() * (1.0 - a1 * gamma1(model, c, loss.alpha())))
}

/// Kullback-Leibler risk of any plug-in expansion with mean squared error
/// `mse = E‖θ̂ − θ‖²`: `(d/2)(2 ln c + 1/c² − 1) + mse/(2c²σ_Y²)`.
pub fn risk_kl_plugin(model: &Model, mse: f64, c: f64) -> Result<f64> {
    check_expansion(c)?;
    if !(mse >= 0.0) {
        return Err(domain(format!("mean squared error must be >= 0, got {mse}")));
    }
    Ok(crate::model::kl_from_dist2(model.d() as f64, model.sigma_y2(), mse, c))
}
