//! Data behind the five figures, as `(x, series, y)` rows.
//!
//! Axis ranges, the `(d, r)` pairs of the first figure and the `(r, α)`
//! combinations of the third are not published; the defaults below are
//! chosen to cover the plotted shapes and can be overridden.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::closedrisk::{risk_affine, risk_ratio_identity, risk_truncated};
use crate::cutoffs::{cutoff_affine, cutoff_general, cutoff_truncated};
use crate::error::{domain, Result};
use crate::estimators::{linspace, Estimator, ParameterSpace};
use crate::model::{AlphaLoss, Model};
use crate::montecarlo::{mc_epsilon_profile, mc_risk_ratio, EpsilonOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum FigureName {
    Fig1,
    Fig2,
    Fig3,
    Fig4,
    Fig5,
}

impl FigureName {
    pub const ALL: [FigureName; 5] = [Self::Fig1, Self::Fig2, Self::Fig3, Self::Fig4, Self::Fig5];

    /// Whether the figure needs Monte Carlo.
    pub fn is_stochastic(self) -> bool {
        matches!(self, Self::Fig4 | Self::Fig5)
    }
}

impl fmt::Display for FigureName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let n = *self as usize + 1;
        write!(f, "fig{n}")
    }
}

impl FromStr for FigureName {
    type Err = crate::error::Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|f| f.to_string() == s)
            .ok_or_else(|| domain(format!("unknown figure '{s}' (expected fig1..fig5)")))
    }
}

/// Overrides of the built-in figure parameters.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FigureOptions {
    /// `(lo, hi, points)` of the horizontal `‖θ‖` or `θ` axis.
    pub theta_grid: Option<(f64, f64, usize)>,
    /// α values: the horizontal axis of fig1/fig4, the series of the others.
    pub alphas: Option<Vec<f64>>,
    /// Monte Carlo draws per grid point.
    pub n_samples: usize,
    pub seed: u64,
}

impl Default for FigureOptions {
    fn default() -> Self {
        Self { theta_grid: None, alphas: None, n_samples: 100_000, seed: DEFAULT_SEED }
    }
}

/// Seed used when none is given.
pub const DEFAULT_SEED: u64 = 20_240_601;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FigureRow {
    pub x: f64,
    pub series: String,
    pub y: f64,
    /// Monte Carlo standard error of `y`, when `y` is an estimate.
    pub y_stderr: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FigureData {
    pub name: FigureName,
    pub x_label: &'static str,
    pub y_label: &'static str,
    pub rows: Vec<FigureRow>,
    /// Derived constants (cut-offs, ε) recorded alongside the rows.
    pub notes: Vec<(String, f64)>,
}

/// `α ∈ {−0.95, −0.90, …, 0.95}`.
pub fn default_alpha_axis() -> Vec<f64> {
    (0..39).map(|i| (i as f64 - 19.0) * 0.05).collect()
}

pub const FIG1_PAIRS: [(usize, f64); 6] = [(1, 1.0), (2, 1.0), (2, 9.6568), (3, 4.0), (5, 2.0), (10, 10.0)];
pub const FIG2_RATIOS: [f64; 3] = [0.5, 1.0, 2.0];
pub const FIG3_RATIOS: [f64; 3] = [0.5, 1.0, 2.0];
pub const FIG3_ALPHAS: [f64; 3] = [-0.5, 0.0, 0.5];
pub const FIG4_SIGMA_Y2: [f64; 3] = [1.0, 2.0, 4.0];
pub const FIG5_DIMS: [usize; 4] = [3, 5, 7, 9];

fn losses(alphas: &[f64]) -> Result<Vec<AlphaLoss>> {
    alphas.iter().map(|a| AlphaLoss::new(*a)).collect()
}

fn theta_axis(opts: &FigureOptions, default: (f64, f64, usize)) -> Result<Vec<f64>> {
    let (lo, hi, n) = opts.theta_grid.unwrap_or(default);
    if !(lo.is_finite() && hi.is_finite() && lo <= hi && n >= 1) {
        return Err(domain(format!("invalid theta grid {lo}:{hi}:{n}")));
    }
    Ok(linspace(lo, hi, n))
}

pub fn generate(name: FigureName, opts: &FigureOptions) -> Result<FigureData> {
    match name {
        FigureName::Fig1 => fig1(opts),
        FigureName::Fig2 => fig2(opts),
        FigureName::Fig3 => fig3(opts),
        FigureName::Fig4 => fig4(opts),
        FigureName::Fig5 => fig5(opts),
    }
}

/// Identity-plug-in risk ratio at `c_opt` against α.
fn fig1(opts: &FigureOptions) -> Result<FigureData> {
    let alphas = opts.alphas.clone().unwrap_or_else(default_alpha_axis);
    let mut rows = Vec::new();
    for (d, r) in FIG1_PAIRS {
        let model = Model::with_ratio(d, r)?;
        for loss in losses(&alphas)? {
            rows.push(FigureRow {
                x: loss.alpha(),
                series: format!("d={d};r={r}"),
                y: risk_ratio_identity(&model, loss)?,
                y_stderr: None,
            });
        }
    }
    Ok(FigureData { name: FigureName::Fig1, x_label: "alpha", y_label: "risk_ratio", rows, notes: vec![] })
}

/// `θ̂ = 0.75 X`, `d = 3`, `σ_X² = 1`: ratio of the expanded to the plug-in risk.
fn fig2(opts: &FigureOptions) -> Result<FigureData> {
    const A: f64 = 0.75;
    let thetas = theta_axis(opts, (0.0, 8.0, 81))?;
    let alphas = opts.alphas.clone().unwrap_or_else(|| vec![0.0]);
    let (mut rows, mut notes) = (Vec::new(), Vec::new());
    for loss in losses(&alphas)? {
        for r in FIG2_RATIOS {
            let model = Model::new(3, 1.0, 1.0 / r)?;
            let k = cutoff_affine(A, r, loss)?.c_star;
            notes.push((format!("k(alpha={},a={A},r={r})", loss.alpha()), k));
            for (label, c) in [("k", k), ("(1+k)/2", 0.5 * (1.0 + k))] {
                for t in &thetas {
                    let y = risk_affine(&model, A, *t, c, loss)? / risk_affine(&model, A, *t, 1.0, loss)?;
                    rows.push(FigureRow {
                        x: *t,
                        series: format!("alpha={};r={r};c={label}", loss.alpha()),
                        y,
                        y_stderr: None,
                    });
                }
            }
        }
    }
    Ok(FigureData { name: FigureName::Fig2, x_label: "theta_norm", y_label: "risk_ratio", rows, notes })
}

/// `θ̂ = max(X, 0)`, `d = 1`, `σ_X² = 1`, `c = κ(α, r)`.
fn fig3(opts: &FigureOptions) -> Result<FigureData> {
    let thetas = theta_axis(opts, (0.0, 4.0, 81))?;
    let alphas = opts.alphas.clone().unwrap_or_else(|| FIG3_ALPHAS.to_vec());
    let (mut rows, mut notes) = (Vec::new(), Vec::new());
    for loss in losses(&alphas)? {
        for r in FIG3_RATIOS {
            let model = Model::new(1, 1.0, 1.0 / r)?;
            let kappa = cutoff_truncated(r, loss)?.c_star;
            notes.push((format!("kappa(alpha={},r={r})", loss.alpha()), kappa));
            for t in &thetas {
                let y = risk_truncated(&model, *t, kappa, loss)? / risk_truncated(&model, *t, 1.0, loss)?;
                rows.push(FigureRow { x: *t, series: format!("alpha={};r={r}", loss.alpha()), y, y_stderr: None });
            }
        }
    }
    Ok(FigureData { name: FigureName::Fig3, x_label: "theta", y_label: "risk_ratio", rows, notes })
}

fn epsilon_space() -> ParameterSpace {
    ParameterSpace::Full { max_radius: 8.0, points: 25 }
}

/// Sufficient cut-off in `c²` for James-Stein, `d = 3`, `σ_X² = 1`, against α.
fn fig4(opts: &FigureOptions) -> Result<FigureData> {
    let alphas = opts.alphas.clone().unwrap_or_else(default_alpha_axis);
    let alpha_losses = losses(&alphas)?;
    let est = Estimator::JamesStein;
    let mut rows = Vec::new();
    for sy2 in FIG4_SIGMA_Y2 {
        let model = Model::new(3, 1.0, sy2)?;
        let profile = mc_epsilon_profile(
            &model,
            &est,
            &epsilon_space(),
            &alpha_losses,
            opts.n_samples,
            opts.seed,
            EpsilonOptions::default(),
        )?;
        for (loss, eps) in alpha_losses.iter().zip(profile) {
            let eps = eps.require_positive()?;
            let k = cutoff_general(3, *loss, eps.value)?.c2_star;
            rows.push(FigureRow { x: loss.alpha(), series: format!("sigma_y2={sy2}"), y: k, y_stderr: None });
        }
    }
    Ok(FigureData { name: FigureName::Fig4, x_label: "alpha", y_label: "cutoff_c2", rows, notes: vec![] })
}

/// Positive-part James-Stein at `c² = k(d, α, 1, 1)` against `‖θ‖`, by Monte
/// Carlo with the same draws for numerator and denominator.
fn fig5(opts: &FigureOptions) -> Result<FigureData> {
    let thetas = theta_axis(opts, (0.0, 8.0, 33))?;
    let alphas = opts.alphas.clone().unwrap_or_else(|| vec![0.0]);
    let est = Estimator::JamesSteinPositivePart;
    let (mut rows, mut notes) = (Vec::new(), Vec::new());
    for loss in losses(&alphas)? {
        for d in FIG5_DIMS {
            let model = Model::new(d, 1.0, 1.0)?;
            let eps = mc_epsilon_profile(
                &model,
                &est,
                &epsilon_space(),
                &[loss],
                opts.n_samples,
                opts.seed,
                EpsilonOptions::default(),
            )?
            .pop()
            .expect("one alpha")
            .require_positive()?;
            let k = cutoff_general(d, loss, eps.value)?.c2_star;
            notes.push((format!("epsilon(d={d},alpha={})", loss.alpha()), eps.value));
            notes.push((format!("k(d={d},alpha={})", loss.alpha()), k));
            for t in &thetas {
                let mut theta = vec![0.0; d];
                theta[0] = *t;
                let q = mc_risk_ratio(&model, &est, k.sqrt(), loss, &theta, opts.n_samples, opts.seed)?;
                rows.push(FigureRow {
                    x: *t,
                    series: format!("alpha={};d={d}", loss.alpha()),
                    y: q.mean,
                    y_stderr: Some(q.stderr),
                });
            }
        }
    }
    Ok(FigureData { name: FigureName::Fig5, x_label: "theta_norm", y_label: "risk_ratio", rows, notes })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick() -> FigureOptions {
        FigureOptions { n_samples: 4000, ..FigureOptions::default() }
    }

    #[test]
    fn names_round_trip() {
        for f in FigureName::ALL {
            assert_eq!(f.to_string().parse::<FigureName>().unwrap(), f);
        }
        assert!("fig6".parse::<FigureName>().is_err());
    }

    #[test]
    fn fig1_contains_peak_of_the_hellinger_ratio() {
        let data = generate(FigureName::Fig1, &FigureOptions::default()).unwrap();
        let row = data.rows.iter().find(|r| r.series == "d=2;r=9.6568" && r.x == 0.0).unwrap();
        assert!((row.y - 1.2071).abs() < 5e-4);
        assert!(data.rows.iter().all(|r| r.y >= 1.0));
    }

    #[test]
    fn fig2_and_fig3_ratios_bounded_and_tight_at_zero() {
        for name in [FigureName::Fig2, FigureName::Fig3] {
            let data = generate(name, &FigureOptions::default()).unwrap();
            for r in &data.rows {
                assert!(r.y <= 1.0 + 1e-9, "{name} {r:?}");
            }
            for r in data.rows.iter().filter(|r| r.x == 0.0 && !r.series.ends_with("(1+k)/2")) {
                assert!((r.y - 1.0).abs() < 1e-9, "{name} {r:?}");
            }
        }
    }

    #[test]
    fn fig5_is_deterministic() {
        let opts = FigureOptions { theta_grid: Some((0.0, 4.0, 3)), ..quick() };
        let a = generate(FigureName::Fig5, &opts).unwrap();
        let b = generate(FigureName::Fig5, &opts).unwrap();
        assert_eq!(a, b);
        assert!(a.rows.iter().all(|r| r.y <= 1.0 + 3.0 * r.y_stderr.unwrap()));
    }

    #[test]
    fn fig4_small_alpha_grid() {
        let opts = FigureOptions { alphas: Some(vec![-0.5, 0.0]), ..quick() };
        let data = generate(FigureName::Fig4, &opts).unwrap();
        assert_eq!(data.rows.len(), 6);
        assert!(data.rows.iter().all(|r| r.y > 1.0));
    }
}
