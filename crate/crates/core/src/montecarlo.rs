//! Monte Carlo risk estimation.
//!
//! Every risk of `q_{θ̂,c}` depends on the data only through
//! `Z = ‖θ̂(X) − θ‖²/σ_Y²`, so the engine draws `Z` samples once per `θ` and
//! reuses them for every `c` and `α` (common random numbers).
//!
//! # Reproducibility
//!
//! Samples for a given `θ` are split into chunks of [`CHUNK`] draws. Chunk
//! `k` uses a ChaCha8 generator keyed by SplitMix64 expansions of
//! `(master seed, k)` and with its stream id set to a hash of the bit pattern
//! of `θ`. Results therefore depend only on `(inputs, seed, n)`: not on the
//! number of worker threads, nor on where `θ` sits in a grid.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{domain, Error, Result};
use crate::estimators::{Estimator, ParameterSpace, Ray};
use crate::model::{check_expansion, kl_from_dist2, unchecked_loss, AlphaLoss, Model};
use crate::quadrature::integrate;

/// Draws per reproducibility chunk.
pub const CHUNK: usize = 8192;
/// Smallest accepted sample count for risk estimates.
pub const MIN_SAMPLES: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RiskEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub n: usize,
    pub seed: u64,
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Generator for chunk `chunk` of the task identified by `key`.
pub fn substream(seed: u64, key: u64, chunk: u64) -> ChaCha8Rng {
    let mut bytes = [0u8; 32];
    let mut state = splitmix64(seed);
    let mut words = [0u64; 4];
    for (i, w) in words.iter_mut().enumerate() {
        state = splitmix64(state ^ chunk.wrapping_mul(0xD6E8_FEB8_6659_FD93).wrapping_add(i as u64));
        *w = state;
    }
    for (dst, w) in bytes.chunks_exact_mut(8).zip(words) {
        dst.copy_from_slice(&w.to_le_bytes());
    }
    let mut rng = ChaCha8Rng::from_seed(bytes);
    rng.set_stream(key);
    rng
}

/// FNV-1a over the coordinate bit patterns.
pub fn theta_key(theta: &[f64]) -> u64 {
    let mut h: u64 = 0xCBF2_9CE4_8422_2325;
    for v in theta {
        // fold −0.0 onto 0.0 so that equal points share a stream
        let bits = if *v == 0.0 { 0 } else { v.to_bits() };
        for b in bits.to_le_bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01B3);
        }
    }
    h
}

/// Evaluates `stat(θ̂(X) − θ)` on `n` draws of `X ~ N_d(θ, σ_X² I)`.
pub fn sample_stat<F>(model: &Model, est: &Estimator, theta: &[f64], n: usize, seed: u64, stat: F) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    est.validate(model)?;
    let d = model.d();
    if theta.len() != d || theta.iter().any(|v| !v.is_finite()) {
        return Err(domain(format!("theta must be a finite point of dimension {d}")));
    }
    let sx = model.sigma_x2().sqrt();
    let key = theta_key(theta);
    let chunks = n.div_ceil(CHUNK);
    let parts: Vec<Vec<f64>> = (0..chunks)
        .into_par_iter()
        .map(|k| {
            let len = CHUNK.min(n - k * CHUNK);
            let mut rng = substream(seed, key, k as u64);
            let mut x = vec![0.0; d];
            let mut est_out = vec![0.0; d];
            let mut out = Vec::with_capacity(len);
            for _ in 0..len {
                for (xi, ti) in x.iter_mut().zip(theta) {
                    *xi = ti + sx * rng.sample::<f64, _>(StandardNormal);
                }
                est.evaluate_into(&x, model.sigma_x2(), &mut est_out);
                for (e, t) in est_out.iter_mut().zip(theta) {
                    *e -= t;
                }
                out.push(stat(&est_out));
            }
            out
        })
        .collect();
    Ok(parts.concat())
}

/// Samples of `Z = ‖θ̂(X) − θ‖²/σ_Y²`.
pub fn sample_dist2(model: &Model, est: &Estimator, theta: &[f64], n: usize, seed: u64) -> Result<Vec<f64>> {
    let sy2 = model.sigma_y2();
    sample_stat(model, est, theta, n, seed, |e| e.iter().map(|v| v * v).sum::<f64>() / sy2)
}

/// Sample mean and standard error of the mean (Welford).
pub fn mean_and_stderr<I: IntoIterator<Item = f64>>(values: I) -> (f64, f64) {
    let (mut n, mut mean, mut m2) = (0usize, 0.0, 0.0);
    for v in values {
        n += 1;
        let delta = v - mean;
        mean += delta / n as f64;
        m2 += delta * (v - mean);
    }
    if n < 2 {
        return (mean, 0.0);
    }
    let var = m2 / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Per-sample loss of `q_{θ̂,c}` from `Z`; `α = −1` uses the KL form.
pub(crate) fn sample_loss(model: &Model, z: f64, c: f64, loss: AlphaLoss) -> f64 {
    let (d, sy2) = (model.d() as f64, model.sigma_y2());
    if loss.is_kl() {
        kl_from_dist2(d, sy2, z * sy2, c)
    } else {
        unchecked_loss(d, sy2, z * sy2, c, loss.alpha())
    }
}

fn check_samples(n: usize) -> Result<()> {
    if n < MIN_SAMPLES {
        return Err(domain(format!("at least {MIN_SAMPLES} samples are required, got {n}")));
    }
    Ok(())
}

/// Monte Carlo estimate of `R_α(θ, q_{θ̂,c})`.
pub fn mc_risk(
    model: &Model,
    est: &Estimator,
    c: f64,
    loss: AlphaLoss,
    theta: &[f64],
    n: usize,
    seed: u64,
) -> Result<RiskEstimate> {
    check_expansion(c)?;
    check_samples(n)?;
    let z = sample_dist2(model, est, theta, n, seed)?;
    let (mean, stderr) = mean_and_stderr(z.iter().map(|v| sample_loss(model, *v, c, loss)));
    Ok(RiskEstimate { mean, stderr, n, seed })
}

/// `R(θ, q_{θ̂,c}) / R(θ, q_{θ̂,1})` from shared draws. The standard error is
/// the delta-method one for a ratio of paired means.
pub fn mc_risk_ratio(
    model: &Model,
    est: &Estimator,
    c: f64,
    loss: AlphaLoss,
    theta: &[f64],
    n: usize,
    seed: u64,
) -> Result<RiskEstimate> {
    check_expansion(c)?;
    check_samples(n)?;
    let z = sample_dist2(model, est, theta, n, seed)?;
    let num: Vec<f64> = z.iter().map(|v| sample_loss(model, *v, c, loss)).collect();
    let den: Vec<f64> = z.iter().map(|v| sample_loss(model, *v, 1.0, loss)).collect();
    let mean_den = den.iter().sum::<f64>() / n as f64;
    if !(mean_den > 0.0) {
        return Err(Error::Degenerate(format!("plug-in risk estimate {mean_den:e} is not positive")));
    }
    let ratio = num.iter().sum::<f64>() / n as f64 / mean_den;
    let (_, se) = mean_and_stderr(num.iter().zip(&den).map(|(a, b)| a - ratio * b));
    Ok(RiskEstimate { mean: ratio, stderr: se / mean_den, n, seed })
}

/// One row of a dominance scan: `R(θ, q_{θ̂,c}) − R(θ, q_{θ̂,1})`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanRow {
    pub theta: Vec<f64>,
    pub theta_norm: f64,
    pub c: f64,
    pub delta: f64,
    /// Standard error of the paired difference.
    pub stderr: f64,
}

/// Paired risk differences over a `θ × c` grid. The same draws of `X` serve
/// every `c` at a given `θ`.
pub fn dominance_scan(
    model: &Model,
    est: &Estimator,
    c_values: &[f64],
    theta_grid: &[Vec<f64>],
    loss: AlphaLoss,
    n: usize,
    seed: u64,
) -> Result<Vec<ScanRow>> {
    check_samples(n)?;
    for c in c_values {
        check_expansion(*c)?;
    }
    let blocks: Vec<Vec<ScanRow>> = theta_grid
        .par_iter()
        .map(|theta| {
            let z = sample_dist2(model, est, theta, n, seed)?;
            let norm = theta.iter().map(|v| v * v).sum::<f64>().sqrt();
            Ok(c_values
                .iter()
                .map(|&c| {
                    let (delta, stderr) = if c == 1.0 {
                        (0.0, 0.0)
                    } else {
                        mean_and_stderr(
                            z.iter().map(|v| sample_loss(model, *v, c, loss) - sample_loss(model, *v, 1.0, loss)),
                        )
                    };
                    ScanRow { theta: theta.clone(), theta_norm: norm, c, delta, stderr }
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    Ok(blocks.concat())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EmpiricalCutoffOptions {
    /// Bisection stops when the `c²` bracket is narrower than this.
    pub tol: f64,
    /// Largest `c²` examined.
    pub cap: f64,
    /// Multiplier of the paired standard error in the upper confidence bound.
    pub z_ucb: f64,
    pub n: usize,
}

impl Default for EmpiricalCutoffOptions {
    fn default() -> Self {
        Self { tol: 1e-4, cap: 16.0, z_ucb: 3.0, n: 200_000 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EmpiricalCutoff {
    /// Largest `c²` on the bisection grid with `sup_θ UCB(Δ̂) ≤ 0`.
    pub k_star: f64,
    /// `true` when dominance held all the way to the cap.
    pub capped: bool,
    /// `‖θ‖` at which the supremum is attained just above `k_star`.
    pub argmax_theta_norm: f64,
    pub evaluations: usize,
}

/// Empirical necessary-and-sufficient threshold in `c²`: bisection on the
/// sign of `sup_θ (Δ̂(θ,c) + z·se)` over the supplied grid.
pub fn empirical_cutoff(
    model: &Model,
    est: &Estimator,
    loss: AlphaLoss,
    theta_grid: &[Vec<f64>],
    seed: u64,
    opts: EmpiricalCutoffOptions,
) -> Result<EmpiricalCutoff> {
    check_samples(opts.n)?;
    if theta_grid.is_empty() {
        return Err(domain("theta grid is empty"));
    }
    if !(opts.cap > 1.0 && opts.tol > 0.0 && opts.z_ucb >= 0.0) {
        return Err(domain(format!("invalid empirical cut-off options {opts:?}")));
    }
    let samples: Vec<Vec<f64>> = theta_grid
        .par_iter()
        .map(|t| sample_dist2(model, est, t, opts.n, seed))
        .collect::<Result<_>>()?;
    let norms: Vec<f64> = theta_grid.iter().map(|t| t.iter().map(|v| v * v).sum::<f64>().sqrt()).collect();
    let sup_ucb = |c2: f64| -> (f64, f64) {
        let c = c2.sqrt();
        let ucb: Vec<f64> = samples
            .par_iter()
            .map(|z| {
                let (m, s) = mean_and_stderr(
                    z.iter().map(|v| sample_loss(model, *v, c, loss) - sample_loss(model, *v, 1.0, loss)),
                );
                m + opts.z_ucb * s
            })
            .collect();
        ucb.iter()
            .zip(&norms)
            .fold((f64::NEG_INFINITY, 0.0), |acc, (u, t)| if *u > acc.0 { (*u, *t) } else { acc })
    };
    let mut evaluations = 1;
    let (at_cap, t_cap) = sup_ucb(opts.cap);
    if at_cap <= 0.0 {
        return Ok(EmpiricalCutoff { k_star: opts.cap, capped: true, argmax_theta_norm: t_cap, evaluations });
    }
    let (mut lo, mut hi, mut arg) = (1.0, opts.cap, t_cap);
    while hi - lo > opts.tol {
        let mid = 0.5 * (lo + hi);
        let (v, t) = sup_ucb(mid);
        evaluations += 1;
        if v <= 0.0 {
            lo = mid;
        } else {
            hi = mid;
            arg = t;
        }
    }
    Ok(EmpiricalCutoff { k_star: lo, capped: false, argmax_theta_norm: arg, evaluations })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EpsilonOptions {
    /// Maximum number of local subdivision rounds around the argmin.
    pub refinements: usize,
    /// Subdivision stops once a round lowers the minimum by less than this.
    pub tol: f64,
    /// Radial extension stops once doubling the radius changes the estimate
    /// by less than this (absolute).
    pub tail_tol: f64,
    /// Radius beyond which an unbounded space is not extended.
    pub radius_cap: f64,
}

impl Default for EpsilonOptions {
    fn default() -> Self {
        Self { refinements: 8, tol: 1e-4, tail_tol: 1e-3, radius_cap: 1024.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpsilonGrid {
    /// `radial` or `explicit`.
    pub kind: &'static str,
    /// Radial extent actually searched (after tail extension).
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpsilonEstimate {
    pub alpha: f64,
    /// Minimum over the grid of the per-point estimates.
    pub value: f64,
    pub arg_theta: Vec<f64>,
    pub stderr_at_min: f64,
    /// Estimate at the largest searched radius (or last explicit point).
    pub tail_value: f64,
    pub grid: EpsilonGrid,
    /// Minimum after the initial grid and after each refinement round.
    pub history: Vec<f64>,
    pub z_definition: &'static str,
}

impl EpsilonEstimate {
    /// Rejects estimates within three standard errors of zero.
    pub fn require_positive(self) -> Result<Self> {
        if self.value <= 3.0 * self.stderr_at_min {
            return Err(Error::EpsilonIndistinguishableFromZero { value: self.value, stderr: self.stderr_at_min });
        }
        Ok(self)
    }
}

const Z_DEFINITION: &str = "Z = ||theta_hat(X) - theta||^2 / sigma_y2";

/// `(E_θ(Z e^{−sZ}), se)` for each damping rate `s`.
fn epsilon_terms(z: &[f64], rates: &[f64]) -> Vec<(f64, f64)> {
    rates.iter().map(|s| mean_and_stderr(z.iter().map(|v| v * (-s * v).exp()))).collect()
}

/// `ε(α) = inf_θ E_θ(Z e^{−(1−α²)Z/8})` for several `α` from shared draws.
pub fn mc_epsilon_profile(
    model: &Model,
    est: &Estimator,
    space: &ParameterSpace,
    alphas: &[AlphaLoss],
    n: usize,
    seed: u64,
    opts: EpsilonOptions,
) -> Result<Vec<EpsilonEstimate>> {
    check_samples(n)?;
    est.validate(model)?;
    if alphas.is_empty() {
        return Err(domain("no alpha values"));
    }
    let rates: Vec<f64> = alphas.iter().map(|l| (1.0 - l.alpha() * l.alpha()) / 8.0).collect();
    let eval = |points: &[Vec<f64>]| -> Result<Vec<Vec<(f64, f64)>>> {
        points
            .par_iter()
            .map(|t| sample_dist2(model, est, t, n, seed).map(|z| epsilon_terms(&z, &rates)))
            .collect()
    };
    let d = model.d();
    match space.ray(model, est)? {
        None => {
            let ParameterSpace::Explicit { points } = space else { unreachable!() };
            let values = eval(points)?;
            Ok((0..alphas.len())
                .map(|j| {
                    let (i, (v, s)) = argmin(values.iter().map(|row| row[j]));
                    EpsilonEstimate {
                        alpha: alphas[j].alpha(),
                        value: v,
                        arg_theta: points[i].clone(),
                        stderr_at_min: s,
                        tail_value: values[values.len() - 1][j].0,
                        grid: EpsilonGrid { kind: "explicit", lo: 0.0, hi: 0.0, points: points.len() },
                        history: vec![v],
                        z_definition: Z_DEFINITION,
                    }
                })
                .collect())
        }
        Some(ray) => radial_profile(d, ray, space.points(), alphas, opts, |ts: &[f64]| {
            let pts: Vec<Vec<f64>> = ts.iter().map(|t| ray.point(d, *t)).collect();
            eval(&pts)
        }),
    }
}

fn argmin<I: Iterator<Item = (f64, f64)>>(it: I) -> (usize, (f64, f64)) {
    it.enumerate()
        .fold((0, (f64::INFINITY, 0.0)), |acc, (i, v)| if v.0 < acc.1 .0 { (i, v) } else { acc })
}

type Cache = BTreeMap<u64, (f64, Vec<(f64, f64)>)>;

fn ordered_key(t: f64) -> u64 {
    // order-preserving map of f64 onto u64
    let b = t.to_bits();
    if t.is_sign_negative() { !b } else { b | (1 << 63) }
}

fn radial_profile<E>(
    d: usize,
    ray: Ray,
    points: usize,
    alphas: &[AlphaLoss],
    opts: EpsilonOptions,
    eval: E,
) -> Result<Vec<EpsilonEstimate>>
where
    E: Fn(&[f64]) -> Result<Vec<Vec<(f64, f64)>>>,
{
    let mut cache: Cache = BTreeMap::new();
    let add = |cache: &mut Cache, ts: Vec<f64>| -> Result<()> {
        let fresh: Vec<f64> = ts.into_iter().filter(|t| !cache.contains_key(&ordered_key(*t))).collect();
        for (t, v) in fresh.iter().zip(eval(&fresh)?) {
            cache.insert(ordered_key(*t), (*t, v));
        }
        Ok(())
    };
    add(&mut cache, crate::estimators::linspace(ray.lo, ray.hi, points))?;

    let mut hi = ray.hi;
    if ray.unbounded {
        while hi < opts.radius_cap {
            let next = (2.0 * hi).min(opts.radius_cap);
            add(&mut cache, vec![next])?;
            let a = &cache[&ordered_key(hi)].1;
            let b = &cache[&ordered_key(next)].1;
            hi = next;
            if a.iter().zip(b).all(|(x, y)| (x.0 - y.0).abs() < opts.tail_tol) {
                break;
            }
        }
    }

    let current_min = |cache: &Cache, j: usize| -> (usize, f64) {
        let (i, (v, _)) = argmin(cache.values().map(|(_, v)| v[j]));
        (i, v)
    };
    let mut history: Vec<Vec<f64>> = (0..alphas.len()).map(|j| vec![current_min(&cache, j).1]).collect();
    for _ in 0..opts.refinements {
        let ts: Vec<f64> = cache.values().map(|(t, _)| *t).collect();
        let mut new_points = Vec::new();
        for j in 0..alphas.len() {
            let (i, _) = current_min(&cache, j);
            if i > 0 {
                new_points.push(0.5 * (ts[i - 1] + ts[i]));
            }
            if i + 1 < ts.len() {
                new_points.push(0.5 * (ts[i] + ts[i + 1]));
            }
        }
        new_points.sort_by(f64::total_cmp);
        new_points.dedup();
        add(&mut cache, new_points)?;
        let mut improved = false;
        for (j, h) in history.iter_mut().enumerate() {
            let v = current_min(&cache, j).1;
            improved |= h[h.len() - 1] - v >= opts.tol;
            h.push(v);
        }
        if !improved {
            break;
        }
    }

    let entries: Vec<&(f64, Vec<(f64, f64)>)> = cache.values().collect();
    Ok((0..alphas.len())
        .map(|j| {
            let (i, (v, s)) = argmin(entries.iter().map(|(_, vals)| vals[j]));
            EpsilonEstimate {
                alpha: alphas[j].alpha(),
                value: v,
                arg_theta: ray.point(d, entries[i].0),
                stderr_at_min: s,
                tail_value: cache[&ordered_key(hi)].1[j].0,
                grid: EpsilonGrid { kind: "radial", lo: ray.lo, hi, points: entries.len() },
                history: history[j].clone(),
                z_definition: Z_DEFINITION,
            }
        })
        .collect())
}

/// `ε(α)` for one loss; fails when the estimate cannot be told apart from 0.
pub fn mc_epsilon(
    model: &Model,
    est: &Estimator,
    space: &ParameterSpace,
    loss: AlphaLoss,
    n: usize,
    seed: u64,
) -> Result<EpsilonEstimate> {
    mc_epsilon_with(model, est, space, loss, n, seed, EpsilonOptions::default())
}

pub fn mc_epsilon_with(
    model: &Model,
    est: &Estimator,
    space: &ParameterSpace,
    loss: AlphaLoss,
    n: usize,
    seed: u64,
    opts: EpsilonOptions,
) -> Result<EpsilonEstimate> {
    mc_epsilon_profile(model, est, space, &[loss], n, seed, opts)?
        .pop()
        .expect("one alpha")
        .require_positive()
}

/// Discrete scale mixture `Σ wᵢ N_d(θ̂(X), cᵢ²σ_Y² I)` with every `cᵢ` in
/// `(1, upper]`.
#[derive(Debug, Clone)]
pub struct MixtureDensity {
    base: Estimator,
    atoms: Vec<(f64, f64)>,
}

impl MixtureDensity {
    /// `atoms` are `(cᵢ, wᵢ)` pairs; weights must be positive and sum to 1.
    pub fn new(base: Estimator, atoms: Vec<(f64, f64)>, upper: f64) -> Result<Self> {
        if atoms.is_empty() {
            return Err(domain("mixture needs at least one atom"));
        }
        for (c, w) in &atoms {
            if !(*c > 1.0 && *c <= upper) {
                return Err(domain(format!("mixture atom c = {c} is outside (1, {upper}]")));
            }
            if !(*w > 0.0 && w.is_finite()) {
                return Err(domain(format!("mixture weight {w} is not positive")));
            }
        }
        let total: f64 = atoms.iter().map(|a| a.1).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(domain(format!("mixture weights sum to {total}, not 1")));
        }
        Ok(Self { base, atoms })
    }

    pub fn base(&self) -> &Estimator {
        &self.base
    }

    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }
}

/// Absolute tolerance on the affinity integral of a mixture.
pub const MIXTURE_QUAD_TOL: f64 = 1e-7;

fn ln_sphere_area(m: usize) -> f64 {
    // surface area of the unit sphere in R^{m+1}
    let h = (m + 1) as f64 / 2.0;
    std::f64::consts::LN_2 + h * std::f64::consts::PI.ln() - libm::lgamma(h)
}

/// `∫ (Σ wᵢ φ_{cᵢ}(u − D e₁))^β φ(u)^{1−β} du` in `σ_Y` units, reduced to the
/// axis along `e₁` and the radius orthogonal to it.
fn mixture_affinity(d: usize, dist: f64, atoms: &[(f64, f64)], beta: f64) -> Result<f64> {
    let df = d as f64;
    let ln2pi = (2.0 * std::f64::consts::PI).ln();
    let comps: Vec<(f64, f64)> = atoms
        .iter()
        .map(|(c, w)| (w.ln() - 0.5 * df * (ln2pi + 2.0 * c.ln()), 1.0 / (2.0 * c * c)))
        .collect();
    let cmax = atoms.iter().map(|a| a.0).fold(1.0, f64::max);
    let log_integrand = |u1: f64, rho2: f64| {
        let mix_terms = comps.iter().map(|(lc, k)| lc - k * ((u1 - dist).powi(2) + rho2));
        let top = mix_terms.clone().fold(f64::NEG_INFINITY, f64::max);
        let lmix = top + mix_terms.map(|t| (t - top).exp()).sum::<f64>().ln();
        let lphi = -0.5 * df * ln2pi - 0.5 * (u1 * u1 + rho2);
        beta * lmix + (1.0 - beta) * lphi
    };
    let lo = dist.min(0.0) - 13.0 * cmax;
    let hi = dist.max(0.0) + 13.0 * cmax;
    let outer_tol = MIXTURE_QUAD_TOL * 1e-2;
    if d == 1 {
        return Ok(integrate(|u1| log_integrand(u1, 0.0).exp(), lo, hi, outer_tol, 0.0)?.value);
    }
    let ln_area = ln_sphere_area(d - 2);
    let rho_max = cmax * (df.sqrt() + 13.0);
    let inner_tol = outer_tol / (hi - lo);
    let failure = std::cell::Cell::new(None);
    let outer = integrate(
        |u1| {
            let inner = integrate(
                |rho| {
                    if rho == 0.0 && d > 2 {
                        return 0.0;
                    }
                    let radial = if d > 2 { (df - 2.0) * rho.ln() } else { 0.0 };
                    (ln_area + radial + log_integrand(u1, rho * rho)).exp()
                },
                0.0,
                rho_max,
                inner_tol,
                0.0,
            );
            match inner {
                Ok(q) => q.value,
                Err(e) => {
                    failure.set(Some(e));
                    f64::NAN
                }
            }
        },
        lo,
        hi,
        outer_tol,
        0.0,
    );
    if let Some(e) = failure.take() {
        return Err(e);
    }
    Ok(outer?.value)
}

/// `L_α(θ, q̂_F)` for a realized point estimate `θ̂`.
pub fn mixture_loss(model: &Model, mix: &MixtureDensity, theta_hat: &[f64], theta: &[f64], loss: AlphaLoss) -> Result<f64> {
    loss.require_finite_branch()?;
    let dist2 = crate::model::squared_distance(model, theta_hat, theta)?;
    mixture_loss_from_z(model, mix, dist2 / model.sigma_y2(), loss)
}

fn mixture_loss_from_z(model: &Model, mix: &MixtureDensity, z: f64, loss: AlphaLoss) -> Result<f64> {
    let beta = (1.0 + loss.alpha()) / 2.0;
    let affinity = mixture_affinity(model.d(), z.sqrt(), &mix.atoms, beta)?;
    Ok(loss.scale() * (1.0 - affinity))
}

fn mixture_losses(model: &Model, mix: &MixtureDensity, loss: AlphaLoss, z: &[f64]) -> Result<Vec<f64>> {
    z.par_iter().map(|v| mixture_loss_from_z(model, mix, *v, loss)).collect()
}

/// Risk of the mixture predictive density: Monte Carlo over `X`, quadrature
/// over `y`.
pub fn mixture_risk(
    model: &Model,
    mix: &MixtureDensity,
    loss: AlphaLoss,
    theta: &[f64],
    n: usize,
    seed: u64,
) -> Result<RiskEstimate> {
    loss.require_finite_branch()?;
    check_samples(n)?;
    let z = sample_dist2(model, &mix.base, theta, n, seed)?;
    let (mean, stderr) = mean_and_stderr(mixture_losses(model, mix, loss, &z)?);
    Ok(RiskEstimate { mean, stderr, n, seed })
}

/// Paired `R(θ, q̂_F) − R(θ, q_{θ̂,1})` on shared draws.
pub fn mixture_risk_difference(
    model: &Model,
    mix: &MixtureDensity,
    loss: AlphaLoss,
    theta: &[f64],
    n: usize,
    seed: u64,
) -> Result<RiskEstimate> {
    loss.require_finite_branch()?;
    check_samples(n)?;
    let z = sample_dist2(model, &mix.base, theta, n, seed)?;
    let mixed = mixture_losses(model, mix, loss, &z)?;
    let (mean, stderr) =
        mean_and_stderr(mixed.iter().zip(&z).map(|(m, v)| m - sample_loss(model, *v, 1.0, loss)));
    Ok(RiskEstimate { mean, stderr, n, seed })
}

/// `A₁(c)^d e^{−Z σ_Y²/(2γ₀)}`: the closed-form affinity of a single atom.
#[cfg(test)]
fn single_atom_affinity(model: &Model, z: f64, c: f64, alpha: f64) -> f64 {
    let g0 = crate::model::gamma0(model.sigma_y2(), c, alpha);
    (model.d() as f64 * crate::model::ln_a1(c, alpha) - z * model.sigma_y2() / (2.0 * g0)).exp()
}
