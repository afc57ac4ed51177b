//! Self-checks of the numerical claims, grouped into eleven criteria.
//!
//! Each criterion returns [`Check`]s carrying the expected condition, the
//! observed value and the tolerance used; budgets come from
//! [`VerifyOptions`].

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Gamma, LogNormal, StandardNormal};
use serde::Serialize;

use crate::closedrisk::{c_opt, risk_affine, risk_identity, risk_ratio_identity, risk_truncated};
use crate::cutoffs::{
    affine_equation, cutoff_affine, cutoff_general, cutoff_kl_exact, cutoff_truncated, kl_exact_equation,
};
use crate::error::Result;
use crate::estimators::{lemma22_lower_bound, linspace, Estimator, ParameterSpace, ShrinkFn};
use crate::figures::{generate, FigureName, FigureOptions};
use crate::model::{AlphaLoss, Model};
use crate::montecarlo::{
    empirical_cutoff, mc_epsilon, mc_epsilon_profile, mc_risk, mixture_risk_difference, sample_stat,
    EmpiricalCutoffOptions, EpsilonOptions, MixtureDensity,
};
use crate::roots::golden_section_max;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub criterion: u8,
    pub name: String,
    /// Human-readable condition, e.g. `in [1.19, 1.21]`.
    pub expected: String,
    pub actual: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl Check {
    fn new(criterion: u8, name: impl Into<String>, expected: impl Into<String>, actual: f64, tolerance: f64, passed: bool) -> Self {
        Self { criterion, name: name.into(), expected: expected.into(), actual, tolerance, passed }
    }

    fn within(criterion: u8, name: impl Into<String>, target: f64, actual: f64, tol: f64) -> Self {
        let ok = (actual - target).abs() <= tol;
        Self::new(criterion, name, format!("{target} +/- {tol:e}"), actual, tol, ok)
    }

    fn in_range(criterion: u8, name: impl Into<String>, lo: f64, hi: f64, actual: f64) -> Self {
        Self::new(criterion, name, format!("in [{lo}, {hi}]"), actual, 0.0, (lo..=hi).contains(&actual))
    }

    fn count(criterion: u8, name: impl Into<String>, passed: usize, total: usize, needed: usize) -> Self {
        Self::new(criterion, name, format!(">= {needed} of {total}"), passed as f64, 0.0, passed >= needed)
    }

    /// A check that could not be evaluated.
    fn errored(criterion: u8, name: impl Into<String>, err: &crate::error::Error) -> Self {
        Self::new(criterion, name, format!("no error (got: {err})"), f64::NAN, 0.0, false)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VerifyOptions {
    pub seed: u64,
    /// Draws per configuration for the closed-form oracle agreement.
    pub n_oracle: usize,
    /// Draws per grid point for ε.
    pub n_epsilon: usize,
    /// Draws per grid point for the empirical cut-off.
    pub n_kstar: usize,
    /// Draws per grid point for the mixture risk.
    pub n_mixture: usize,
    /// Draws per grid point for Monte Carlo figures.
    pub n_figure: usize,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            seed: crate::figures::DEFAULT_SEED,
            n_oracle: 1_000_000,
            n_epsilon: 100_000,
            n_kstar: 200_000,
            n_mixture: 2_000,
            n_figure: 100_000,
        }
    }
}

impl VerifyOptions {
    /// Every budget scaled by `factor` (floored at 100 draws).
    pub fn scaled(self, factor: f64) -> Self {
        let s = |n: usize| ((n as f64 * factor) as usize).max(100);
        Self {
            n_oracle: s(self.n_oracle),
            n_epsilon: s(self.n_epsilon),
            n_kstar: s(self.n_kstar),
            n_mixture: s(self.n_mixture),
            n_figure: s(self.n_figure),
            ..self
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub options: VerifyOptions,
    pub checks: Vec<Check>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }

    /// Whether every check of `criterion` passed.
    pub fn criterion_passed(&self, criterion: u8) -> bool {
        self.checks.iter().filter(|c| c.criterion == criterion).all(|c| c.passed)
    }
}

pub const CRITERIA: [(u8, &str); 11] = [
    (1, "Example 2.2 regression (epsilon, k, k*)"),
    (2, "identity risk ratio special case and its maximum"),
    (3, "affine cut-off closed form, residual, lower bound"),
    (4, "Kullback-Leibler consistency"),
    (5, "truncated cut-off boundary equality and negative-theta robustness"),
    (6, "Monte Carlo agreement with closed-form risks"),
    (7, "cut-off ordering and monotonicity"),
    (8, "moment inequality lemmas"),
    (9, "mixture dominance"),
    (10, "figure data"),
    (11, "determinism"),
];

pub fn run_criterion(criterion: u8, opts: &VerifyOptions) -> Vec<Check> {
    match criterion {
        1 => example22(opts),
        2 => ratio_special_case(),
        3 => affine_cutoffs(opts),
        4 => kl_consistency(opts),
        5 => truncated_boundary(opts),
        6 => oracle_agreement(opts),
        7 => ordering(opts),
        8 => inequality_lemmas(opts),
        9 => mixture_dominance(opts),
        10 => figure_data(opts),
        11 => determinism(opts),
        _ => vec![],
    }
}

pub fn run_all(opts: &VerifyOptions) -> Report {
    let checks = CRITERIA.iter().flat_map(|(c, _)| run_criterion(*c, opts)).collect();
    Report { options: *opts, checks }
}

fn rng(opts: &VerifyOptions, salt: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(opts.seed);
    r.set_stream(salt);
    r
}

fn al(a: f64) -> AlphaLoss {
    AlphaLoss::new(a).expect("alpha in range")
}

/// Radial grid used for suprema over `ℝ³` in the positive-part James-Stein
/// example.
fn js_plus_grid() -> Vec<Vec<f64>> {
    linspace(0.0, 10.0, 41).into_iter().map(|t| vec![t, 0.0, 0.0]).collect()
}

const PAPER_EPSILON: f64 = 1.2009;

fn example22(opts: &VerifyOptions) -> Vec<Check> {
    let mut out = Vec::new();
    let model = Model::new(3, 1.0, 1.0).expect("valid model");
    let est = Estimator::JamesSteinPositivePart;
    let loss = AlphaLoss::hellinger();
    let space = ParameterSpace::Full { max_radius: 8.0, points: 25 };
    match mc_epsilon(&model, &est, &space, loss, opts.n_epsilon, opts.seed) {
        Ok(eps) => {
            out.push(Check::in_range(1, "epsilon (Monte Carlo)", 1.19, 1.21, eps.value));
            match cutoff_general(3, loss, eps.value) {
                Ok(k) => out.push(Check::in_range(1, "k from Monte Carlo epsilon", 1.215, 1.225, k.c2_star)),
                Err(e) => out.push(Check::errored(1, "k from Monte Carlo epsilon", &e)),
            }
        }
        Err(e) => out.push(Check::errored(1, "epsilon (Monte Carlo)", &e)),
    }
    match cutoff_general(3, loss, PAPER_EPSILON) {
        Ok(k) => out.push(Check::in_range(1, "k from published epsilon 1.2009", 1.215, 1.225, k.c2_star)),
        Err(e) => out.push(Check::errored(1, "k from published epsilon 1.2009", &e)),
    }
    let kopts = EmpiricalCutoffOptions { n: opts.n_kstar, ..EmpiricalCutoffOptions::default() };
    match empirical_cutoff(&model, &est, loss, &js_plus_grid(), opts.seed, kopts) {
        Ok(k) => out.push(Check::in_range(1, "k* (empirical)", 1.468, 1.508, k.k_star)),
        Err(e) => out.push(Check::errored(1, "k* (empirical)", &e)),
    }
    out
}

fn ratio_special_case() -> Vec<Check> {
    let mut out = Vec::new();
    let loss = AlphaLoss::hellinger();
    let ratio = |r: f64| risk_ratio_identity(&Model::with_ratio(2, r).expect("valid"), loss).expect("finite");
    let worst = [0.1f64, 1.0, 9.6568, 100.0]
        .iter()
        .map(|r| {
            let closed = (2.0 + r + (4.0 + 2.0 * r).sqrt()) / (4.0 + r);
            (ratio(*r) - closed).abs()
        })
        .fold(0.0, f64::max);
    out.push(Check::new(2, "d=2 Hellinger ratio vs closed form", "max abs error <= 1e-12", worst, 1e-12, worst <= 1e-12));
    let (ln_r, peak) = golden_section_max(|u: f64| ratio(u.exp()), 0.0, 100f64.ln(), 1e-10);
    out.push(Check::within(2, "maximum ratio over r", 1.2071, peak, 5e-4));
    out.push(Check::within(2, "maximizing r", 9.657, ln_r.exp(), 0.01));
    out
}

fn affine_cutoffs(opts: &VerifyOptions) -> Vec<Check> {
    let mut rng = rng(opts, 3);
    let (mut closed_ok, mut closed_worst) = (0, 0.0f64);
    for _ in 0..20 {
        let a = rng.random_range(0.05..=1.0);
        let r = rng.random_range(0.01..50.0);
        if let Ok(k) = cutoff_affine(a, r, AlphaLoss::hellinger()) {
            let err = (k.c2_star - (1.0 + a * a * r / 2.0).powi(2)).abs();
            closed_worst = closed_worst.max(err);
            closed_ok += usize::from(err <= 1e-10);
        }
    }
    let (mut resid_ok, mut bound_ok, mut worst_resid) = (0, 0, 0.0f64);
    for _ in 0..50 {
        let alpha = rng.random_range(-0.99..0.99);
        let a = rng.random_range(0.05..=1.0);
        let r = rng.random_range(0.01..50.0);
        if let Ok(k) = cutoff_affine(a, r, al(alpha)) {
            worst_resid = worst_resid.max(k.residual);
            let signs = affine_equation(k.c_star * (1.0 - 1e-6), a, r, alpha) < 0.0
                && affine_equation(k.c_star * (1.0 + 1e-6), a, r, alpha) > 0.0;
            resid_ok += usize::from(k.residual <= 1e-10 && signs);
            bound_ok += usize::from(k.c2_star >= 1.0 + a * a * r * (1.0 - alpha) / 2.0);
        }
    }
    vec![
        Check::count(3, "alpha=0: c2* = (1 + a^2 r/2)^2 to 1e-10", closed_ok, 20, 20),
        Check::count(3, "root residual <= 1e-10 with sign change", resid_ok, 50, 50),
        Check::count(3, "k^2 >= 1 + a^2 r (1-alpha)/2", bound_ok, 50, 50),
        Check::new(3, "largest normalized residual", "<= 1e-10", worst_resid, 1e-10, worst_resid <= 1e-10),
    ]
}

fn kl_consistency(opts: &VerifyOptions) -> Vec<Check> {
    let mut rng = rng(opts, 4);
    let kl = AlphaLoss::kullback_leibler();
    let (mut general_ok, mut exact_ok, mut worst) = (0, 0, 0.0f64);
    for _ in 0..20 {
        let d = rng.random_range(1..=10usize);
        let r_bar = rng.random_range(0.01..10.0);
        if let Ok(k) = cutoff_general(d, kl, d as f64 * r_bar) {
            let err = (k.c2_star - (1.0 + r_bar)).abs();
            worst = worst.max(err);
            general_ok += usize::from(err <= 1e-12);
        }
        if let Ok(c0) = cutoff_kl_exact(r_bar) {
            let resid = kl_exact_equation(c0.c2_star, 1.0 + r_bar).abs();
            exact_ok += usize::from(resid <= 1e-12 && c0.c2_star > 1.0 + r_bar);
        }
    }
    vec![
        Check::count(4, "general cut-off at alpha=-1 equals 1 + R", general_ok, 20, 20),
        Check::new(4, "largest deviation from 1 + R", "<= 1e-12", worst, 1e-12, worst <= 1e-12),
        Check::count(4, "exact KL cut-off: residual <= 1e-12 and c0 > 1 + R", exact_ok, 20, 20),
    ]
}

fn truncated_boundary(opts: &VerifyOptions) -> Vec<Check> {
    let mut rng = rng(opts, 5);
    let (mut boundary_ok, mut worst, mut negative_ok, mut negative_total) = (0, 0.0f64, 0, 0);
    for _ in 0..20 {
        let alpha = rng.random_range(-0.95..0.95);
        let r = rng.random_range(0.05..20.0);
        let loss = al(alpha);
        let model = Model::new(1, r, 1.0).expect("valid");
        let Ok(kappa) = cutoff_truncated(r, loss) else { continue };
        let k = kappa.c_star;
        let diff = |theta: f64, c: f64| -> f64 {
            risk_truncated(&model, theta, c, loss).unwrap_or(f64::NAN)
                - risk_truncated(&model, theta, 1.0, loss).unwrap_or(f64::NAN)
        };
        let gap = diff(0.0, k).abs();
        worst = worst.max(gap);
        boundary_ok += usize::from(gap <= 1e-9);
        for theta in [-2.0, -1.0, -0.5] {
            for frac in [0.25, 0.5, 0.75, 0.999] {
                negative_total += 1;
                negative_ok += usize::from(diff(theta, 1.0 + frac * (k - 1.0)) < 0.0);
            }
        }
    }
    vec![
        Check::count(5, "|R(0, kappa) - R(0, 1)| <= 1e-9", boundary_ok, 20, 20),
        Check::new(5, "largest boundary gap", "<= 1e-9", worst, 1e-9, worst <= 1e-9),
        Check::count(5, "risk difference < 0 for theta < 0, c in (1, kappa)", negative_ok, negative_total, negative_total),
    ]
}

fn random_alpha(rng: &mut ChaCha8Rng) -> f64 {
    rng.random_range(-0.95..0.95)
}

fn oracle_agreement(opts: &VerifyOptions) -> Vec<Check> {
    let mut rng = rng(opts, 6);
    let n = opts.n_oracle;
    let mut families = [("identity", 0, 0), ("affine", 0, 0), ("truncated", 0, 0)];
    for i in 0..25 {
        let seed = opts.seed.wrapping_add(i);
        // identity
        let d = rng.random_range(1..=5usize);
        let model = Model::new(d, rng.random_range(0.25..4.0), rng.random_range(0.25..4.0)).expect("valid");
        let loss = al(random_alpha(&mut rng));
        let c = rng.random_range(1.0..2.5);
        let theta: Vec<f64> = (0..d).map(|_| 2.0 * rng.sample::<f64, _>(StandardNormal)).collect();
        let closed = risk_identity(&model, c, loss);
        let mc = mc_risk(&model, &Estimator::Identity, c, loss, &theta, n, seed);
        tally(&mut families[0], closed, mc);
        // affine
        let a = rng.random_range(0.1..=1.0);
        let closed = risk_affine(&model, a, norm(&theta), c, loss);
        let mc = mc_risk(&model, &Estimator::Affine(a), c, loss, &theta, n, seed);
        tally(&mut families[1], closed, mc);
        // truncated
        let model = Model::new(1, rng.random_range(0.25..4.0), rng.random_range(0.25..4.0)).expect("valid");
        let theta = rng.random_range(-2.0..3.0);
        let closed = risk_truncated(&model, theta, c, loss);
        let mc = mc_risk(&model, &Estimator::TruncatedNonneg, c, loss, &[theta], n, seed);
        tally(&mut families[2], closed, mc);
    }
    families
        .iter()
        .map(|(name, ok, total)| Check::count(6, format!("{name}: |mc - closed| <= 3 se"), *ok, *total, 24))
        .collect()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn tally(slot: &mut (&str, usize, usize), closed: Result<f64>, mc: Result<crate::montecarlo::RiskEstimate>) {
    slot.2 += 1;
    if let (Ok(c), Ok(m)) = (closed, mc) {
        slot.1 += usize::from((m.mean - c).abs() <= 3.0 * m.stderr);
    }
}

fn ordering(opts: &VerifyOptions) -> Vec<Check> {
    let mut rng = rng(opts, 7);
    let mut out = Vec::new();

    let mut ok = 0;
    for _ in 0..20 {
        let d = rng.random_range(1..=10usize);
        let eps = rng.random_range(0.01..20.0);
        let (Ok(kl), Ok(hel)) = (cutoff_general(d, AlphaLoss::kullback_leibler(), eps), cutoff_general(d, AlphaLoss::hellinger(), eps))
        else {
            continue;
        };
        ok += usize::from(kl.c2_star >= hel.c2_star);
    }
    out.push(Check::count(7, "k(d,-1) >= k(d,0)", ok, 20, 20));

    // α-grid on [−1, 0] with step 0.05, for analytic profiles ε(α) = ε₀e^{−μ(1−α²)/8}
    let grid: Vec<f64> = (0..=20).map(|i| -1.0 + 0.05 * i as f64).collect();
    let non_increasing = |profile: &dyn Fn(f64) -> f64, d: usize| -> bool {
        let ks: Vec<f64> = grid
            .iter()
            .map(|a| {
                let loss = if *a == -1.0 { AlphaLoss::kullback_leibler() } else { al(*a) };
                cutoff_general(d, loss, profile(*a)).map(|k| k.c2_star).unwrap_or(f64::NAN)
            })
            .collect();
        ks.windows(2).all(|w| w[1] <= w[0])
    };
    let mut ok = 0;
    for _ in 0..20 {
        let d = rng.random_range(1..=10usize);
        let eps0 = rng.random_range(0.05..20.0);
        let mu = rng.random_range(0.0..5.0);
        ok += usize::from(non_increasing(&|a: f64| eps0 * (-mu * (1.0 - a * a) / 8.0).exp(), d));
    }
    out.push(Check::count(7, "k non-increasing on [-1,0] for analytic epsilon profiles", ok, 20, 20));

    // the same grid with ε(α) estimated for positive-part James-Stein
    let model = Model::new(3, 1.0, 1.0).expect("valid");
    let losses: Vec<AlphaLoss> =
        grid.iter().map(|a| if *a == -1.0 { AlphaLoss::kullback_leibler() } else { al(*a) }).collect();
    let profile = mc_epsilon_profile(
        &model,
        &Estimator::JamesSteinPositivePart,
        &ParameterSpace::Full { max_radius: 8.0, points: 25 },
        &losses,
        opts.n_epsilon / 4,
        opts.seed,
        EpsilonOptions::default(),
    );
    match profile {
        Ok(p) => {
            let eps: Vec<f64> = p.iter().map(|e| e.value).collect();
            let eps_ok = eps.windows(2).all(|w| w[1] <= w[0]);
            let k_ok = non_increasing(&|a: f64| eps[((a + 1.0) / 0.05).round() as usize], 3);
            out.push(Check::new(7, "JS+ d=3: estimated epsilon non-increasing on [-1,0]", "true", eps_ok as u8 as f64, 0.0, eps_ok));
            out.push(Check::new(7, "JS+ d=3: k non-increasing on [-1,0]", "true", k_ok as u8 as f64, 0.0, k_ok));
        }
        Err(e) => out.push(Check::errored(7, "JS+ d=3 epsilon profile", &e)),
    }

    let mut ok = 0;
    let mut total = 0;
    let ratios = linspace(0.1, 20.0, 50);
    for alpha in [-0.9, -0.5, 0.0, 0.5, 0.9] {
        for a in [0.25, 0.75, 1.0] {
            total += 1;
            let ks: Vec<f64> =
                ratios.iter().map(|r| cutoff_affine(a, *r, al(alpha)).map(|k| k.c2_star).unwrap_or(f64::NAN)).collect();
            ok += usize::from(ks.windows(2).all(|w| w[1] > w[0]));
        }
    }
    out.push(Check::count(7, "affine cut-off increasing in r", ok, total, total));

    let mut ok = 0;
    for _ in 0..20 {
        let d = rng.random_range(1..=10usize);
        let model = Model::new(d, rng.random_range(0.1..5.0), rng.random_range(0.1..5.0)).expect("valid");
        let loss = al(random_alpha(&mut rng));
        let step = 1e-3;
        let cs: Vec<f64> = (0..=4000).map(|i| 1.0 + step * i as f64).collect();
        let risks: Vec<f64> = cs.iter().map(|c| risk_identity(&model, *c, loss).unwrap_or(f64::NAN)).collect();
        let imin = (0..risks.len()).min_by(|i, j| risks[*i].total_cmp(&risks[*j])).expect("non-empty");
        let unimodal = risks[..=imin].windows(2).all(|w| w[1] <= w[0]) && risks[imin..].windows(2).all(|w| w[1] >= w[0]);
        let copt = c_opt(&model, loss);
        let located = copt > cs[cs.len() - 1] || (cs[imin] - copt).abs() <= step;
        ok += usize::from(unimodal && located);
    }
    out.push(Check::count(7, "identity risk unimodal in c with argmin at c_opt", ok, 20, 20));
    out
}

fn inequality_lemmas(opts: &VerifyOptions) -> Vec<Check> {
    let mut rng = rng(opts, 8);
    let mut out = Vec::new();

    let exact = 0.25;
    let bound = (-2.0f64).exp();
    out.push(Check::new(8, "Exponential(1), s=1: E(T e^-T) = 1/4 >= e^-2", ">= 0.1353", exact, 0.0, exact >= bound));

    let mut ok = 0;
    for i in 0..100 {
        let n = 2000;
        let samples: Vec<f64> = match i % 4 {
            0 => {
                let d = Exp::new(rng.random_range(0.1..5.0)).expect("rate");
                (0..n).map(|_| d.sample(&mut rng)).collect()
            }
            1 => {
                let d = Gamma::new(rng.random_range(0.2..6.0), rng.random_range(0.2..3.0)).expect("gamma");
                (0..n).map(|_| d.sample(&mut rng)).collect()
            }
            2 => {
                let d = LogNormal::new(rng.random_range(-1.0..1.0), rng.random_range(0.1..1.5)).expect("lognormal");
                (0..n).map(|_| d.sample(&mut rng)).collect()
            }
            _ => {
                let top = rng.random_range(0.5..10.0);
                (0..n).map(|_| rng.random_range(0.0..top)).collect()
            }
        };
        let s = rng.random_range(0.01..2.0);
        let lhs = samples.iter().map(|t| t * (-s * t).exp()).sum::<f64>() / n as f64;
        if let Ok(b) = lemma22_lower_bound(&samples, s) {
            ok += usize::from(lhs >= b);
        }
    }
    out.push(Check::count(8, "E(T e^{-sT}) >= E(T) e^{-s E(T^2)/E(T)}", ok, 100, 100));

    let catalog = [
        Estimator::Identity,
        Estimator::Affine(0.6),
        Estimator::JamesStein,
        Estimator::JamesSteinPositivePart,
        Estimator::Baranchik(ShrinkFn::MinLinear { cap: 1.0 }),
        Estimator::Baranchik(ShrinkFn::Rational { f1: 1.0, f2: 2.0 }),
    ];
    let (mut ok, mut total) = (0, 0);
    for est in &catalog {
        for _ in 0..4 {
            let d = rng.random_range(3..=6usize);
            let model = Model::new(d, rng.random_range(0.5..2.0), 1.0).expect("valid");
            let theta: Vec<f64> = (0..d).map(|_| 1.5 * rng.sample::<f64, _>(StandardNormal)).collect();
            let n = (opts.n_epsilon / 10).max(1000);
            let seed = rng.random::<u64>();
            let stats = |f: fn(&[f64]) -> f64| sample_stat(&model, est, &theta, n, seed, f);
            let (Ok(q4), Ok(c4), Ok(q2)) = (
                stats(|e| e.iter().map(|v| v * v).sum::<f64>().powi(2)),
                stats(|e| e.iter().map(|v| v.powi(4)).sum()),
                stats(|e| e.iter().map(|v| v * v).sum()),
            ) else {
                continue;
            };
            let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
            let bound = crate::estimators::quartic_bound_from_componentwise(mean(&c4), mean(&q2), d).unwrap_or(f64::NAN);
            total += 1;
            ok += usize::from(mean(&q4) <= bound);
        }
    }
    out.push(Check::count(8, "E||e||^4 <= M2^2 + d M1 over the estimator catalog", ok, total, total));
    out
}

fn mixture_dominance(opts: &VerifyOptions) -> Vec<Check> {
    let model = Model::new(3, 1.0, 1.0).expect("valid");
    let loss = AlphaLoss::hellinger();
    let est = Estimator::JamesSteinPositivePart;
    let atoms = vec![(1.15f64.sqrt(), 0.5), (1.35f64.sqrt(), 0.5)];
    let mix = match MixtureDensity::new(est, atoms, 1.4883f64.sqrt()) {
        Ok(m) => m,
        Err(e) => return vec![Check::errored(9, "mixture construction", &e)],
    };
    let mut ok = 0;
    let mut worst = f64::NEG_INFINITY;
    for t in linspace(0.0, 9.0, 10) {
        match mixture_risk_difference(&model, &mix, loss, &[t, 0.0, 0.0], opts.n_mixture, opts.seed) {
            Ok(d) => {
                worst = worst.max(d.mean - 3.0 * d.stderr);
                ok += usize::from(d.mean <= 3.0 * d.stderr);
            }
            Err(e) => return vec![Check::errored(9, format!("mixture risk at |theta| = {t}"), &e)],
        }
    }
    vec![
        Check::count(9, "mixture risk <= plug-in risk (paired, 3 se) on 10 radii", ok, 10, 10),
        Check::new(9, "largest lower confidence bound of the difference", "<= 0", worst, 0.0, worst <= 0.0),
    ]
}

fn figure_data(opts: &VerifyOptions) -> Vec<Check> {
    let fopts = FigureOptions { n_samples: opts.n_figure, seed: opts.seed, ..FigureOptions::default() };
    let mut out = Vec::new();
    for name in FigureName::ALL {
        let data = match generate(name, &fopts) {
            Ok(d) => d,
            Err(e) => {
                out.push(Check::errored(10, format!("{name} generation"), &e));
                continue;
            }
        };
        match name {
            FigureName::Fig1 => {
                let y = data.rows.iter().find(|r| r.series == "d=2;r=9.6568" && r.x == 0.0).map_or(f64::NAN, |r| r.y);
                out.push(Check::within(10, "fig1 (d=2, alpha=0, r=9.6568)", 1.2071, y, 5e-4));
            }
            FigureName::Fig2 | FigureName::Fig3 => {
                let worst = data.rows.iter().map(|r| r.y).fold(f64::NEG_INFINITY, f64::max);
                out.push(Check::new(10, format!("{name}: max ratio"), "<= 1 + 1e-9", worst, 1e-9, worst <= 1.0 + 1e-9));
                let gap = data
                    .rows
                    .iter()
                    .filter(|r| r.x == 0.0 && !r.series.ends_with("(1+k)/2"))
                    .map(|r| (r.y - 1.0).abs())
                    .fold(0.0, f64::max);
                out.push(Check::new(10, format!("{name}: ratio at theta=0 for the cut-off"), "= 1 +/- 1e-9", gap, 1e-9, gap <= 1e-9));
            }
            FigureName::Fig4 => {
                let ok = data.rows.iter().all(|r| r.y > 1.0);
                out.push(Check::new(10, "fig4: every cut-off above 1", "true", ok as u8 as f64, 0.0, ok));
            }
            FigureName::Fig5 => {
                let rows: Vec<_> = data.rows.iter().filter(|r| r.series.ends_with(";d=3")).collect();
                let ok = rows.iter().filter(|r| r.y <= 1.0 + 3.0 * r.y_stderr.unwrap_or(0.0)).count();
                out.push(Check::count(10, "fig5 d=3: ratio <= 1 (3 se)", ok, rows.len(), rows.len()));
            }
        }
    }
    out
}

fn determinism(opts: &VerifyOptions) -> Vec<Check> {
    let n = (opts.n_figure / 10).max(1000).to_string();
    let seed = opts.seed.to_string();
    let commands: Vec<Vec<&str>> = vec![
        vec!["risk", "--estimator", "jsplus", "--d", "3", "--c", "1.1", "--theta-grid", "0:4:5"],
        vec!["ratio", "--estimator", "truncated", "--force-mc", "--c", "1.2", "--theta-grid", "-1:2:4"],
        vec!["epsilon", "--estimator", "jsplus", "--d", "3", "--alpha", "0", "--alpha", "-0.5"],
        vec!["scan", "--estimator", "jsplus", "--d", "3", "--c", "1.05", "--c", "1.2", "--theta-grid", "0:6:4"],
        vec!["empirical-cutoff", "--estimator", "affine:0.75", "--d", "3", "--sigma-y2", "0.5", "--theta-grid", "0:4:5", "--tol", "1e-2"],
        vec!["figure", "fig5", "--theta-grid", "0:4:3"],
    ];
    let mut out = Vec::new();
    for cmd in commands {
        let mut args: Vec<String> = vec!["varexp".into()];
        args.extend(cmd.iter().map(|s| s.to_string()));
        args.extend(["--n-samples".into(), n.clone(), "--seed".into(), seed.clone()]);
        let run = |threads: usize| -> Option<String> {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().ok()?;
            pool.install(|| crate::cli::render(&args).ok())
        };
        let (a, b, c) = (run(1), run(4), run(4));
        let same = a.is_some() && a == b && b == c;
        out.push(Check::new(11, format!("byte-identical: {}", cmd.join(" ")), "identical output for 1, 4, 4 threads", same as u8 as f64, 0.0, same));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_criteria_pass() {
        let opts = VerifyOptions::default();
        for c in [2u8, 3, 4, 5] {
            for check in run_criterion(c, &opts) {
                assert!(check.passed, "{check:?}");
            }
        }
    }

    #[test]
    fn report_serializes() {
        let report = Report { options: VerifyOptions::default(), checks: run_criterion(2, &VerifyOptions::default()) };
        let json = serde_json::to_string(&report).unwrap();
        assert!(json.contains("\"criterion\":2"));
        assert!(report.passed());
    }

    #[test]
    fn scaled_budgets_have_a_floor() {
        let o = VerifyOptions::default().scaled(1e-9);
        assert_eq!(o.n_oracle, 100);
        assert_eq!(o.seed, VerifyOptions::default().seed);
    }
}
