//! Dominance cut-offs in the expansion factor.
//!
//! Units differ between results, so every [`CutoffResult`] carries both `c`
//! and `c²`:
//!
//! | kind | solved variable | threshold |
//! |------|-----------------|-----------|
//! | [`CutoffKind::Affine`] | `c` | `k(α,a,r)`, dominance iff `1 < c ≤ k` |
//! | [`CutoffKind::Truncated`] | `c` | `κ(α,r)`, dominance iff `1 < c ≤ κ` |
//! | [`CutoffKind::General`] | closed form | `k(d,α)`, sufficient `1 < c² ≤ k` |
//! | [`CutoffKind::GeneralLowerBound`] | closed form | lower bound on `k(d,α)` |
//! | [`CutoffKind::KlExact`] | `c²` | `c₀(1+R̲)`, KL dominance iff `1 < c² ≤ c₀` |

use std::fmt;

use serde::Serialize;

use crate::closedrisk::gamma1;
use crate::error::{domain, Error, Result};
use crate::model::{ln_a1, AlphaLoss, Model};
use crate::roots::{brent, expand_upper, golden_section_max};

const XTOL: f64 = 1e-15;
const UPPER_CAP: f64 = 1e6;
/// Cap on `ln c` for the affine solve (`c` stays finite in `f64`).
const LN_UPPER_CAP: f64 = 350.0;
/// Largest residual accepted from a root-finding cut-off.
pub const MAX_RESIDUAL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CutoffKind {
    Affine,
    Truncated,
    General,
    GeneralLowerBound,
    KlExact,
}

impl fmt::Display for CutoffKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CutoffKind::Affine => "affine",
            CutoffKind::Truncated => "truncated",
            CutoffKind::General => "general",
            CutoffKind::GeneralLowerBound => "general-lower-bound",
            CutoffKind::KlExact => "kl-exact",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CutoffResult {
    /// Threshold expressed in `c`.
    pub c_star: f64,
    /// Threshold expressed in `c²`.
    pub c2_star: f64,
    /// Final bracket in the solved variable; degenerate for closed forms.
    pub bracket: (f64, f64),
    /// `|equation(c_star)|`; zero for closed forms.
    pub residual: f64,
    pub method: CutoffKind,
}

impl CutoffResult {
    fn from_c(root: crate::roots::Root, method: CutoffKind) -> Result<Self> {
        finish(root.x, root.x * root.x, root.bracket, root.fx.abs(), method)
    }

    fn closed_c2(c2: f64, method: CutoffKind) -> Result<Self> {
        let c = c2.sqrt();
        finish(c, c2, (c2, c2), 0.0, method)
    }
}

fn finish(c: f64, c2: f64, bracket: (f64, f64), residual: f64, method: CutoffKind) -> Result<CutoffResult> {
    if !(c > 1.0) {
        return Err(Error::Solver(format!("{method} cut-off {c} is not above 1")));
    }
    if residual > MAX_RESIDUAL {
        return Err(Error::Solver(format!("{method} cut-off residual {residual:e} exceeds {MAX_RESIDUAL:e}")));
    }
    Ok(CutoffResult { c_star: c, c2_star: c2, bracket, residual, method })
}

fn check_ratio(r: f64) -> Result<()> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(domain(format!("variance ratio r must be positive and finite, got {r}")));
    }
    Ok(())
}

/// Left-hand side of the affine cut-off equation
/// `2(1−α)c² − (4 + (1−α²)a²r)c^{1−α} + (1+α)(2 + (1−α)a²r)`.
pub fn affine_equation(c: f64, a: f64, r: f64, alpha: f64) -> f64 {
    let s = a * a * r;
    2.0 * (1.0 - alpha) * c * c - (4.0 + (1.0 - alpha * alpha) * s) * ((1.0 - alpha) * c.ln()).exp()
        + (1.0 + alpha) * (2.0 + (1.0 - alpha) * s)
}

/// `k(α,a,r)`: `q_{aX,c}` dominates `q_{aX,1}` iff `1 < c ≤ k`.
///
/// `c = 1` always solves the equation; the equation is negative between 1
/// and `k` and is minimal near `c² = 1 + a²r(1−α)/2`, which is used as the
/// lower bracket end. Near `α = −1` the root grows like `e^{O(1/(1+α))}`, so
/// the solve runs in `ln c` on the equation divided by `2(1−α)c²`; the
/// reported residual is of that normalized form.
pub fn cutoff_affine(a: f64, r: f64, loss: AlphaLoss) -> Result<CutoffResult> {
    loss.require_finite_branch()?;
    check_ratio(r)?;
    if !(a > 0.0 && a <= 1.0) {
        return Err(domain(format!("affine multiplier a must lie in (0, 1], got {a}")));
    }
    let alpha = loss.alpha();
    let s = a * a * r;
    let p = (4.0 + (1.0 - alpha * alpha) * s) / (2.0 * (1.0 - alpha));
    let q = (1.0 + alpha) * (2.0 + (1.0 - alpha) * s) / (2.0 * (1.0 - alpha));
    let g = |u: f64| 1.0 - p * (-(1.0 + alpha) * u).exp() + q * (-2.0 * u).exp();
    let lo = 0.5 * (1.0 + s * (1.0 - alpha) / 2.0).ln();
    if !(g(lo) < 0.0) {
        return Err(Error::Solver(format!(
            "affine equation is not negative at its interior point c = {} (value {:e})",
            lo.exp(),
            g(lo)
        )));
    }
    let (lo, hi) = expand_upper(&g, lo, 2.0 * lo, 2.0, LN_UPPER_CAP)?;
    let root = brent(g, lo, hi, XTOL)?;
    let c = root.x.exp();
    finish(c, c * c, (root.bracket.0.exp(), root.bracket.1.exp()), root.fx.abs(), CutoffKind::Affine)
}

/// `A₂(c) − (1 + r(1−α²)/4)^{−1/2}`, with `σ_X² = r`, `σ_Y² = 1`.
pub fn truncated_equation(c: f64, r: f64, alpha: f64) -> f64 {
    let model = Model::with_ratio(1, r).expect("validated ratio");
    let a2 = -1.0 + ln_a1(c, alpha).exp() * (1.0 + gamma1(&model, c, alpha));
    a2 - (1.0 + r * (1.0 - alpha * alpha) / 4.0).powf(-0.5)
}

/// `κ(α,r)`: `q_{max(X,0),c}` dominates `q_{max(X,0),1}` iff `1 < c ≤ κ`.
///
/// The equation vanishes at `c = 1`, rises, then falls through zero at `κ`;
/// the maximizer on `(1, c_opt]` anchors the bracket.
pub fn cutoff_truncated(r: f64, loss: AlphaLoss) -> Result<CutoffResult> {
    loss.require_finite_branch()?;
    check_ratio(r)?;
    let alpha = loss.alpha();
    let f = |c: f64| truncated_equation(c, r, alpha);
    let c_opt = (1.0 + r * (1.0 - alpha) / 2.0).sqrt();
    let (peak, fpeak) = golden_section_max(f, 1.0, c_opt, 1e-10 * c_opt);
    if !(fpeak > 0.0) {
        return Err(Error::Solver(format!(
            "truncated equation has no positive interior maximum on (1, {c_opt}] (max {fpeak:e})"
        )));
    }
    let (lo, hi) = expand_upper(&f, peak, peak.max(1.0) * 1.5, 2.0, UPPER_CAP)?;
    CutoffResult::from_c(brent(f, lo, hi, XTOL)?, CutoffKind::Truncated)
}

/// `τ`, and optionally its moment-bound lower bound `τ̲`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TauParams {
    pub epsilon: f64,
    /// `τ = (1−α)ε − 2αd`.
    pub tau: f64,
    /// `τ̲ = (1−α)b₀e^{−(1−α²)b₂/(8b₁)} − 2αd`, when bounds were supplied.
    pub tau_lower: Option<f64>,
}

impl TauParams {
    pub fn new(d: usize, loss: AlphaLoss, epsilon: f64) -> Result<Self> {
        check_dimension(d)?;
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::Inapplicable(format!("epsilon must be positive and finite, got {epsilon}")));
        }
        let a = loss.alpha();
        Ok(Self { epsilon, tau: (1.0 - a) * epsilon - 2.0 * a * d as f64, tau_lower: None })
    }

    pub fn with_bounds(mut self, d: usize, loss: AlphaLoss, b0: f64, b1: f64, b2: f64) -> Result<Self> {
        self.tau_lower = Some(tau_from_bounds(d, loss, b0, b1, b2)?);
        Ok(self)
    }
}

fn check_dimension(d: usize) -> Result<()> {
    if d == 0 {
        return Err(domain("dimension d must be at least 1"));
    }
    Ok(())
}

fn tau_from_bounds(d: usize, loss: AlphaLoss, b0: f64, b1: f64, b2: f64) -> Result<f64> {
    check_dimension(d)?;
    if !(b0 > 0.0 && b1.is_finite() && b2 > 0.0 && b2.is_finite()) {
        return Err(domain(format!("moment bounds must be positive and finite, got ({b0}, {b1}, {b2})")));
    }
    if b0 > b1 {
        return Err(domain(format!("moment bounds require b0 <= b1, got b0 = {b0} > b1 = {b1}")));
    }
    let a = loss.alpha();
    let eps_lower = b0 * (-(1.0 - a * a) * b2 / (8.0 * b1)).exp();
    Ok((1.0 - a) * eps_lower - 2.0 * a * d as f64)
}

/// `(τ + √(τ² + 4d²(1−α²)))/(2d(1−α))`, which collapses to
/// `1 + ε/d` at `α = −1`.
fn k_from_tau(d: usize, alpha: f64, tau: f64) -> f64 {
    let d = d as f64;
    if alpha == -1.0 {
        // τ = 2ε + 2d and the square root equals τ
        return tau / (2.0 * d);
    }
    let disc = 4.0 * d * d * (1.0 - alpha * alpha);
    let root = (tau * tau + disc).sqrt();
    let num = if tau >= 0.0 { tau + root } else { disc / (root - tau) };
    num / (2.0 * d * (1.0 - alpha))
}

/// Sufficient cut-off `k(d,α,σ_X²,σ_Y²)` in `c²` for a plug-in with
/// `ε(α) = epsilon`.
pub fn cutoff_general(d: usize, loss: AlphaLoss, epsilon: f64) -> Result<CutoffResult> {
    let tau = TauParams::new(d, loss, epsilon)?;
    let k = if loss.is_kl() { 1.0 + epsilon / d as f64 } else { k_from_tau(d, loss.alpha(), tau.tau) };
    CutoffResult::closed_c2(k, CutoffKind::General)
}

/// Lower bound on [`cutoff_general`] from moment bounds `(b₀, b₁, b₂)`
/// expressed in `σ_Y²` and `σ_Y⁴` units.
pub fn cutoff_general_lower_bound(d: usize, loss: AlphaLoss, b0: f64, b1: f64, b2: f64) -> Result<CutoffResult> {
    let tau = tau_from_bounds(d, loss, b0, b1, b2)?;
    CutoffResult::closed_c2(k_from_tau(d, loss.alpha(), tau), CutoffKind::GeneralLowerBound)
}

/// `(1 − 1/c)t − ln c`.
pub fn kl_exact_equation(c: f64, t: f64) -> f64 {
    (1.0 - 1.0 / c) * t - c.ln()
}

/// Exact Kullback-Leibler threshold `c₀(1 + R̲)`: the root of
/// `(1 − 1/c)t − ln c = 0` in `(t, t·eᵗ)` with `t = 1 + R̲`. The root is a
/// variance factor, i.e. it is returned as `c2_star`.
pub fn cutoff_kl_exact(r_bar: f64) -> Result<CutoffResult> {
    if !(r_bar > 0.0 && r_bar.is_finite()) {
        return Err(domain(format!("R_bar must be positive and finite, got {r_bar}")));
    }
    let t = 1.0 + r_bar;
    let f = |c: f64| kl_exact_equation(c, t);
    // f(t) = t − 1 − ln t > 0 and f(t eᵗ) = −e^{−t} − ln t < 0
    let hi = t * t.exp();
    let root = brent(f, t, hi, 1e-13 * t)?;
    let c2 = root.x;
    finish(c2.sqrt(), c2, root.bracket, root.fx.abs(), CutoffKind::KlExact)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::closedrisk::{risk_affine, risk_kl_plugin, risk_truncated};
    use proptest::prelude::*;

    fn al(a: f64) -> AlphaLoss {
        AlphaLoss::new(a).unwrap()
    }

    #[test]
    fn affine_hellinger_closed_form() {
        for (a, r) in [(0.75, 2.0), (1.0, 2.0), (0.3, 0.1), (0.9, 50.0)] {
            let k = cutoff_affine(a, r, al(0.0)).unwrap();
            let want = (1.0 + a * a * r / 2.0).powi(2);
            assert!((k.c2_star - want).abs() < 1e-10 * want, "a={a} r={r}");
            assert!(k.residual <= 1e-10);
        }
        assert!((cutoff_affine(1.0, 2.0, al(0.0)).unwrap().c2_star - 4.0).abs() < 1e-10);
    }

    #[test]
    fn affine_threshold_is_exact() {
        // α = 0.5, a = 0.75, r = 2: risk difference at θ = 0 changes sign at k
        let (a, r, l) = (0.75, 2.0, al(0.5));
        let k = cutoff_affine(a, r, l).unwrap();
        let m = Model::with_ratio(3, r).unwrap();
        let base = risk_affine(&m, a, 0.0, 1.0, l).unwrap();
        let diff = |c: f64| risk_affine(&m, a, 0.0, c, l).unwrap() - base;
        for i in 1..100 {
            let c = 1.0 + (k.c_star - 1.0) * i as f64 / 100.0;
            assert!(diff(c) < 0.0, "c={c}");
        }
        assert!(diff(k.c_star).abs() < 1e-12);
        assert!(diff(k.c_star * (1.0 + 1e-6)) > 0.0);
        assert!(diff(k.c_star * 1.5) > 0.0);
    }

    #[test]
    fn affine_small_ratio_tends_to_one() {
        let k = cutoff_affine(0.8, 1e-6, al(0.3)).unwrap();
        assert!(k.c_star > 1.0 && k.c_star - 1.0 < 1e-5);
    }

    #[test]
    fn truncated_boundary_equality() {
        for (a, r) in [(0.0, 1.0), (0.5, 3.0), (-0.7, 0.2), (0.9, 10.0)] {
            let l = al(a);
            let k = cutoff_truncated(r, l).unwrap();
            let m = Model::with_ratio(1, r).unwrap();
            let at_k = risk_truncated(&m, 0.0, k.c_star, l).unwrap();
            let at_1 = risk_truncated(&m, 0.0, 1.0, l).unwrap();
            assert!((at_k - at_1).abs() < 1e-9, "a={a} r={r}");
            assert!(k.residual <= 1e-10);
        }
    }

    #[test]
    fn truncated_matches_sign_scan() {
        // α = 0, r = 1: compare with a scan of the sign of Δ(0,c)
        let l = al(0.0);
        let k = cutoff_truncated(1.0, l).unwrap();
        let m = Model::with_ratio(1, 1.0).unwrap();
        let base = risk_truncated(&m, 0.0, 1.0, l).unwrap();
        let first_positive = (1..200_000)
            .map(|i| 1.0 + i as f64 * 1e-5)
            .find(|c| risk_truncated(&m, 0.0, *c, l).unwrap() - base > 0.0)
            .unwrap();
        assert!((first_positive - k.c_star).abs() <= 1e-5);
    }

    #[test]
    fn truncated_increasing_in_ratio() {
        for a in [-0.5, 0.0, 0.5] {
            let mut prev = 1.0;
            for i in 1..40 {
                let k = cutoff_truncated(0.1 * i as f64, al(a)).unwrap().c_star;
                assert!(k > prev, "a={a} r={}", 0.1 * i as f64);
                prev = k;
            }
        }
    }

    #[test]
    fn general_examples() {
        let k = cutoff_general(3, al(0.0), 1.2009).unwrap();
        assert!((k.c2_star - 1.2200).abs() < 5e-5);
        assert_eq!(k.residual, 0.0);
        // α = 0 reduces to R/2 + √((R/2)² + 1) with ε = dR
        let (d, rbar) = (4, 0.8);
        let k0 = cutoff_general(d, al(0.0), d as f64 * rbar).unwrap();
        assert!((k0.c2_star - (rbar / 2.0 + (rbar * rbar / 4.0 + 1.0).sqrt())).abs() < 1e-14);
        let kl = cutoff_general(d, AlphaLoss::kullback_leibler(), d as f64 * rbar).unwrap();
        assert!((kl.c2_star - (1.0 + rbar)).abs() < 1e-12);
        assert!((kl.c_star * kl.c_star - kl.c2_star).abs() < 1e-14);
    }

    #[test]
    fn general_rejects_nonpositive_epsilon() {
        assert!(matches!(cutoff_general(3, al(0.0), 0.0), Err(Error::Inapplicable(_))));
        assert!(matches!(cutoff_general(3, al(0.0), -1.0), Err(Error::Inapplicable(_))));
    }

    #[test]
    fn general_generic_formula_agrees_with_kl_branch() {
        for eps in [0.1, 1.0, 7.0] {
            assert!((k_from_tau(3, -1.0 + 1e-12, 2.0 * eps + 6.0) - (1.0 + eps / 3.0)).abs() < 1e-9);
        }
    }

    #[test]
    fn general_near_reverse_kl_is_stable() {
        // τ is close to −2d; the rationalized form avoids cancellation
        let k = cutoff_general(3, al(0.999_999), 1.0).unwrap();
        assert!(k.c2_star > 1.0 && k.c2_star.is_finite());
    }

    #[test]
    fn lower_bound_examples() {
        let l = al(0.0);
        let lb = cutoff_general_lower_bound(3, l, 1.0, 2.0, 15.0).unwrap();
        let eps = (-15.0f64 / 16.0).exp();
        assert!((lb.c2_star - (eps + (eps * eps + 36.0).sqrt()) / 6.0).abs() < 1e-14);
        // vanishing exponent
        let lb = cutoff_general_lower_bound(3, al(0.4), 1.0, 1e12, 1e-3).unwrap();
        let tau = 0.6 * 1.0 - 2.0 * 0.4 * 3.0;
        assert!((lb.c2_star - k_from_tau(3, 0.4, tau)).abs() < 1e-12);
        assert!(cutoff_general_lower_bound(3, l, 2.0, 1.0, 15.0).is_err());
    }

    #[test]
    fn kl_exact_examples() {
        let k = cutoff_kl_exact(1.0).unwrap();
        assert!(k.residual <= 1e-12);
        assert!(k.c2_star > 2.0);
        // 30-digit root of (1 − 1/c)·2 = ln c above 2
        assert!((k.c2_star - 4.921_553_634_567_505).abs() < 1e-9);
        // the KL risk of a constant-MSE plug-in changes sign exactly there
        let m = Model::new(3, 1.0, 1.0).unwrap();
        let mse = 3.0;
        let base = risk_kl_plugin(&m, mse, 1.0).unwrap();
        let diff = |c2: f64| risk_kl_plugin(&m, mse, c2.sqrt()).unwrap() - base;
        assert!(diff(k.c2_star * 0.999) < 0.0);
        assert!(diff(k.c2_star * 1.001) > 0.0);
    }

    proptest! {
        #[test]
        fn affine_root_properties(a in -0.99f64..0.99, mult in 0.05f64..1.0, r in 0.01f64..50.0) {
            let k = cutoff_affine(mult, r, al(a)).unwrap();
            prop_assert!(k.residual <= 1e-10);
            prop_assert!(k.c2_star >= 1.0 + mult * mult * r * (1.0 - a) / 2.0);
            let (lo, hi) = k.bracket;
            prop_assert!(lo <= k.c_star && k.c_star <= hi);
            prop_assert!(affine_equation(k.c_star * (1.0 - 1e-6), mult, r, a) < 0.0);
            prop_assert!(affine_equation(k.c_star * (1.0 + 1e-6), mult, r, a) > 0.0);
        }

        #[test]
        fn affine_increasing_in_ratio(a in -0.9f64..0.9, mult in 0.1f64..1.0, r in 0.05f64..20.0) {
            let k1 = cutoff_affine(mult, r, al(a)).unwrap().c_star;
            let k2 = cutoff_affine(mult, r * 1.1, al(a)).unwrap().c_star;
            prop_assert!(k2 > k1);
        }

        #[test]
        fn kl_exact_above_t(rbar in 1e-3f64..20.0) {
            let k = cutoff_kl_exact(rbar).unwrap();
            prop_assert!(k.c2_star > 1.0 + rbar);
            prop_assert!(kl_exact_equation(k.c2_star, 1.0 + rbar).abs() <= 1e-12);
        }

        #[test]
        fn kl_dominates_hellinger_cutoff(d in 1usize..12, eps in 1e-3f64..30.0) {
            let kl = cutoff_general(d, AlphaLoss::kullback_leibler(), eps).unwrap().c2_star;
            let h = cutoff_general(d, al(0.0), eps).unwrap().c2_star;
            prop_assert!(kl >= h);
        }

        #[test]
        fn lower_bound_below_cutoff(
            a in -1.0f64..0.99, b0 in 0.1f64..3.0, spread in 1.0f64..3.0, extra in 1.0f64..4.0
        ) {
            // any T with E T ∈ [b0, b1], E T² ≤ b2 has ε ≥ ε̲, so plug in an ε at the bound
            let b1 = b0 * spread;
            let b2 = b1 * b1 * extra;
            let l = al(a);
            let lb = cutoff_general_lower_bound(3, l, b0, b1, b2).unwrap().c2_star;
            let eps = b0 * (-(1.0 - a * a) * b2 / (8.0 * b1)).exp();
            let k = cutoff_general(3, l, eps).unwrap().c2_star;
            prop_assert!((lb - k).abs() <= 1e-12 * k);
            let k_more = cutoff_general(3, l, eps * 1.5).unwrap().c2_star;
            prop_assert!(lb <= k_more);
        }
    }
}
