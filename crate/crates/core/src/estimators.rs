//! Plug-in point estimators `θ̂(X)`, parameter-space grids and the moment
//! bounds `(b₀, b₁, b₂)` used by the general dominance cut-off.
//!
//! Moments are always normalized by powers of `σ_Y²`:
//! `b₀ ≤ E‖θ̂−θ‖²/σ_Y² ≤ b₁` and `E‖θ̂−θ‖⁴/σ_Y⁴ ≤ b₂`. For `θ̂ = X` this gives
//! `b₀ = b₁ = d·r` and `b₂ = (d² + 2d)r²`.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{domain, Error, Result};
use crate::model::Model;
use crate::montecarlo::{mean_and_stderr, sample_dist2};

/// Shrinkage function `s(t)` of a Baranchik estimator
/// `(1 − s(‖x‖²)/‖x‖²) x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ShrinkFn {
    /// `s(t) = min(t, cap)`; `cap = (d−2)σ_X²` is the positive-part
    /// James-Stein estimator.
    MinLinear { cap: f64 },
    /// `s(t) = f₁t/(f₂ + t)`, i.e. `θ̂ = (1 − f₁/(f₂ + ‖x‖²))x`.
    Rational { f1: f64, f2: f64 },
}

impl ShrinkFn {
    pub fn eval(&self, t: f64) -> f64 {
        match *self {
            ShrinkFn::MinLinear { cap } => t.min(cap),
            ShrinkFn::Rational { f1, f2 } => f1 * t / (f2 + t),
        }
    }

    /// `s ≥ 0` with `s(t)` and `s(t)/t` bounded on `t > 0`.
    pub fn validate(&self) -> Result<()> {
        match *self {
            ShrinkFn::MinLinear { cap } if cap >= 0.0 && cap.is_finite() => Ok(()),
            ShrinkFn::Rational { f1, f2 } if f1 >= 0.0 && f2 > 0.0 && f1.is_finite() && f2.is_finite() => Ok(()),
            other => Err(domain(format!("shrinkage function {other:?} is negative or unbounded"))),
        }
    }
}

type EstimatorFn = dyn Fn(&[f64], &mut [f64]) + Send + Sync;

/// Host-supplied estimator: writes `θ̂(x)` into the output slice.
#[derive(Clone)]
pub struct CustomEstimator {
    pub name: String,
    /// Whether `θ̂(Qx) = Qθ̂(x)` for orthogonal `Q`; enables radial grids.
    pub equivariant: bool,
    func: Arc<EstimatorFn>,
}

impl CustomEstimator {
    pub fn new<F>(name: impl Into<String>, equivariant: bool, func: F) -> Self
    where
        F: Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
    {
        Self { name: name.into(), equivariant, func: Arc::new(func) }
    }
}

impl fmt::Debug for CustomEstimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomEstimator")
            .field("name", &self.name)
            .field("equivariant", &self.equivariant)
            .finish_non_exhaustive()
    }
}

#[derive(Debug, Clone)]
pub enum Estimator {
    Identity,
    /// `aX`, `0 < a ≤ 1`.
    Affine(f64),
    /// `max(X, 0)` componentwise.
    TruncatedNonneg,
    /// `(1 − (d−2)σ_X²/‖X‖²)X`, `d ≥ 3`.
    JamesStein,
    /// `(1 − (d−2)σ_X²/‖X‖²)₊X`, `d ≥ 3`.
    JamesSteinPositivePart,
    Baranchik(ShrinkFn),
    Custom(CustomEstimator),
}

impl Estimator {
    pub fn validate(&self, model: &Model) -> Result<()> {
        match self {
            Estimator::Affine(a) if !(*a > 0.0 && *a <= 1.0) => {
                Err(domain(format!("affine multiplier a must lie in (0, 1], got {a}")))
            }
            Estimator::JamesStein | Estimator::JamesSteinPositivePart if model.d() < 3 => {
                Err(domain(format!("James-Stein estimators need d >= 3, got d = {}", model.d())))
            }
            Estimator::Baranchik(s) => s.validate(),
            _ => Ok(()),
        }
    }

    pub fn is_orthogonally_equivariant(&self) -> bool {
        match self {
            Estimator::TruncatedNonneg => false,
            Estimator::Custom(c) => c.equivariant,
            _ => true,
        }
    }

    /// Writes `θ̂(x)` into `out`. At `x = 0` the shrinkage kinds return 0.
    pub fn evaluate_into(&self, x: &[f64], sigma_x2: f64, out: &mut [f64]) {
        let scale = |out: &mut [f64], k: f64| {
            for (o, xi) in out.iter_mut().zip(x) {
                *o = k * xi;
            }
        };
        match self {
            Estimator::Identity => out.copy_from_slice(x),
            Estimator::Affine(a) => scale(out, *a),
            Estimator::TruncatedNonneg => {
                for (o, xi) in out.iter_mut().zip(x) {
                    *o = xi.max(0.0);
                }
            }
            Estimator::JamesStein | Estimator::JamesSteinPositivePart | Estimator::Baranchik(_) => {
                let t: f64 = x.iter().map(|v| v * v).sum();
                if t == 0.0 {
                    out.fill(0.0);
                    return;
                }
                let d = x.len() as f64;
                let mut k = match self {
                    Estimator::Baranchik(s) => 1.0 - s.eval(t) / t,
                    _ => 1.0 - (d - 2.0) * sigma_x2 / t,
                };
                if matches!(self, Estimator::JamesSteinPositivePart) {
                    k = k.max(0.0);
                }
                scale(out, k);
            }
            Estimator::Custom(c) => (c.func)(x, out),
        }
    }

    pub fn evaluate(&self, x: &[f64], model: &Model) -> Result<Vec<f64>> {
        self.validate(model)?;
        if x.len() != model.d() {
            return Err(domain(format!("x has dimension {}, model has d = {}", x.len(), model.d())));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(domain("x must be finite"));
        }
        let mut out = vec![0.0; x.len()];
        self.evaluate_into(x, model.sigma_x2(), &mut out);
        Ok(out)
    }
}

impl fmt::Display for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Estimator::Identity => f.write_str("identity"),
            Estimator::Affine(a) => write!(f, "affine:{a}"),
            Estimator::TruncatedNonneg => f.write_str("truncated"),
            Estimator::JamesStein => f.write_str("js"),
            Estimator::JamesSteinPositivePart => f.write_str("jsplus"),
            Estimator::Baranchik(ShrinkFn::MinLinear { cap }) => write!(f, "baranchik:min:{cap}"),
            Estimator::Baranchik(ShrinkFn::Rational { f1, f2 }) => write!(f, "baranchik:rational:{f1}:{f2}"),
            Estimator::Custom(c) => write!(f, "custom:{}", c.name),
        }
    }
}

impl FromStr for Estimator {
    type Err = Error;

    /// `identity | affine:a | truncated | js | jsplus | baranchik:min:cap |
    /// baranchik:rational:f1:f2`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.trim().split(':').collect();
        let num = |v: &str| {
            v.parse::<f64>().map_err(|_| domain(format!("invalid number '{v}' in estimator '{s}'")))
        };
        let est = match parts.as_slice() {
            ["identity"] => Estimator::Identity,
            ["affine", a] => Estimator::Affine(num(a)?),
            ["truncated"] => Estimator::TruncatedNonneg,
            ["js"] => Estimator::JamesStein,
            ["jsplus"] => Estimator::JamesSteinPositivePart,
            ["baranchik", "min", cap] => Estimator::Baranchik(ShrinkFn::MinLinear { cap: num(cap)? }),
            ["baranchik", "rational", f1, f2] => {
                Estimator::Baranchik(ShrinkFn::Rational { f1: num(f1)?, f2: num(f2)? })
            }
            _ => return Err(domain(format!("unknown estimator '{s}'"))),
        };
        if let Estimator::Baranchik(sf) = &est {
            sf.validate()?;
        }
        Ok(est)
    }
}

/// A segment `{t·e₁ : lo ≤ t ≤ hi}` that represents the parameter space for
/// the purpose of infima and suprema.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Ray {
    pub lo: f64,
    pub hi: f64,
    /// The space continues beyond `hi`; callers may extend the segment.
    pub unbounded: bool,
}

impl Ray {
    pub fn point(&self, d: usize, t: f64) -> Vec<f64> {
        let mut p = vec![0.0; d];
        p[0] = t;
        p
    }
}

/// Parameter space `C` over which infima and suprema are taken.
///
/// Radial grids along `e₁` stand in for `ℝ^d` and balls when the estimator is
/// orthogonally equivariant. Cones and other shapes need an explicit grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ParameterSpace {
    /// `ℝ^d`, searched on `‖θ‖ ∈ [0, max_radius]`.
    Full { max_radius: f64, points: usize },
    /// `[0, ∞)` with `d = 1`, searched on `[0, max]`.
    HalfLine { max: f64, points: usize },
    /// `‖θ‖ ≤ radius`.
    Ball { radius: f64, points: usize },
    Explicit { points: Vec<Vec<f64>> },
}

impl ParameterSpace {
    /// The radial segment for this space and estimator, or `None` for an
    /// explicit grid.
    pub fn ray(&self, model: &Model, est: &Estimator) -> Result<Option<Ray>> {
        let symmetric = |reach: f64, unbounded: bool| -> Result<Option<Ray>> {
            if est.is_orthogonally_equivariant() {
                Ok(Some(Ray { lo: 0.0, hi: reach, unbounded }))
            } else if model.d() == 1 {
                Ok(Some(Ray { lo: -reach, hi: reach, unbounded: false }))
            } else {
                Err(domain(format!("estimator '{est}' is not orthogonally equivariant; supply an explicit grid")))
            }
        };
        match self {
            ParameterSpace::Full { max_radius, points } => {
                check_extent(*max_radius, *points)?;
                symmetric(*max_radius, true)
            }
            ParameterSpace::Ball { radius, points } => {
                check_extent(*radius, *points)?;
                symmetric(*radius, false)
            }
            ParameterSpace::HalfLine { max, points } => {
                check_extent(*max, *points)?;
                if model.d() != 1 {
                    return Err(domain("the half-line space needs d = 1"));
                }
                Ok(Some(Ray { lo: 0.0, hi: *max, unbounded: true }))
            }
            ParameterSpace::Explicit { points } => {
                if points.is_empty() {
                    return Err(domain("explicit parameter grid is empty"));
                }
                if let Some(p) = points.iter().find(|p| p.len() != model.d() || p.iter().any(|v| !v.is_finite())) {
                    return Err(domain(format!("grid point {p:?} is not a finite point of dimension {}", model.d())));
                }
                Ok(None)
            }
        }
    }

    /// Number of points on the initial radial grid.
    pub fn points(&self) -> usize {
        match self {
            ParameterSpace::Full { points, .. }
            | ParameterSpace::HalfLine { points, .. }
            | ParameterSpace::Ball { points, .. } => *points,
            ParameterSpace::Explicit { points } => points.len(),
        }
    }

    pub fn grid(&self, model: &Model, est: &Estimator) -> Result<Vec<Vec<f64>>> {
        match (self.ray(model, est)?, self) {
            (Some(ray), _) => Ok(linspace(ray.lo, ray.hi, self.points())
                .into_iter()
                .map(|t| ray.point(model.d(), t))
                .collect()),
            (None, ParameterSpace::Explicit { points }) => Ok(points.clone()),
            (None, _) => unreachable!("only explicit grids lack a ray"),
        }
    }
}

fn check_extent(reach: f64, points: usize) -> Result<()> {
    if !(reach > 0.0 && reach.is_finite()) || points < 2 {
        return Err(domain(format!("radial grid needs a positive extent and >= 2 points, got {reach} and {points}")));
    }
    Ok(())
}

/// `n` equally spaced values from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![lo],
        _ => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    Analytic,
    MonteCarlo,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MomentBounds {
    pub b0: f64,
    pub b1: f64,
    pub b2: f64,
    pub provenance: Provenance,
}

impl MomentBounds {
    pub fn new(b0: f64, b1: f64, b2: f64, provenance: Provenance) -> Result<Self> {
        if !(b0.is_finite() && b1.is_finite() && b2.is_finite()) {
            return Err(domain(format!("moment bounds must be finite, got ({b0}, {b1}, {b2})")));
        }
        if !(b0 > 0.0 && b0 <= b1) {
            return Err(domain(format!("moment bounds need 0 < b0 <= b1, got b0 = {b0}, b1 = {b1}")));
        }
        if b2 < b0 * b0 {
            return Err(domain(format!("b2 = {b2} is below b0² = {}", b0 * b0)));
        }
        Ok(Self { b0, b1, b2, provenance })
    }

    /// `ε̲ = b₀ e^{−(1−α²)b₂/(8b₁)} ≤ ε(α)`.
    pub fn epsilon_lower_bound(&self, alpha: f64) -> f64 {
        self.b0 * (-(1.0 - alpha * alpha) * self.b2 / (8.0 * self.b1)).exp()
    }
}

/// Conservative `(b₀, b₁, b₂)` for `est` over `space`.
///
/// `θ̂ = X` is answered analytically. Otherwise each grid point gets `budget`
/// samples and the per-point means are moved by three standard errors in the
/// conservative direction (`b₀` down, `b₁` and `b₂` up) before the
/// infimum/supremum over the grid is taken.
pub fn moment_bounds(
    est: &Estimator,
    model: &Model,
    space: &ParameterSpace,
    budget: usize,
    seed: u64,
) -> Result<MomentBounds> {
    est.validate(model)?;
    if let Estimator::Identity = est {
        let (d, r) = (model.d() as f64, model.r());
        return MomentBounds::new(d * r, d * r, (d * d + 2.0 * d) * r * r, Provenance::Analytic);
    }
    if budget < 100 {
        return Err(domain(format!("moment bounds need at least 100 samples per point, got {budget}")));
    }
    let grid = space.grid(model, est)?;
    let (mut b0, mut b1, mut b2) = (f64::INFINITY, 0.0f64, 0.0f64);
    for theta in &grid {
        let z = sample_dist2(model, est, theta, budget, seed)?;
        let (m1, s1) = mean_and_stderr(z.iter().copied());
        let (m2, s2) = mean_and_stderr(z.iter().map(|v| v * v));
        b0 = b0.min(m1 - 3.0 * s1);
        b1 = b1.max(m1 + 3.0 * s1);
        b2 = b2.max(m2 + 3.0 * s2);
    }
    if !(b0 > 0.0) {
        return Err(Error::Degenerate(format!(
            "lower bound on E||theta_hat - theta||^2 is not distinguishable from 0 at {budget} samples (b0 = {b0:e}); epsilon > 0 cannot be certified"
        )));
    }
    MomentBounds::new(b0, b1, b2.max(b0 * b0), Provenance::MonteCarlo)
}

/// `E‖θ̂−θ‖⁴ ≤ M₂² + d·M₁` given `Σᵢ E(θ̂ᵢ−θᵢ)⁴ ≤ M₁` and `E‖θ̂−θ‖² ≤ M₂`.
pub fn quartic_bound_from_componentwise(m1: f64, m2: f64, d: usize) -> Result<f64> {
    if !(m1 >= 0.0 && m2 >= 0.0) {
        return Err(domain(format!("M1 and M2 must be >= 0, got {m1} and {m2}")));
    }
    Ok(m2 * m2 + d as f64 * m1)
}

/// `E(T) e^{−s E(T²)/E(T)}` from samples of a nonnegative `T`; a lower bound
/// on `E(T e^{−sT})`.
pub fn lemma22_lower_bound(samples: &[f64], s: f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(domain("no samples"));
    }
    if !(s > 0.0 && s.is_finite()) {
        return Err(domain(format!("s must be positive, got {s}")));
    }
    if let Some(bad) = samples.iter().find(|t| !(**t >= 0.0 && t.is_finite())) {
        return Err(domain(format!("samples must be finite and nonnegative, found {bad}")));
    }
    let n = samples.len() as f64;
    let m1 = samples.iter().sum::<f64>() / n;
    let m2 = samples.iter().map(|t| t * t).sum::<f64>() / n;
    if m1 == 0.0 {
        return Err(Error::Degenerate("E(T) = 0".into()));
    }
    Ok(m1 * (-s * m2 / m1).exp())
}
