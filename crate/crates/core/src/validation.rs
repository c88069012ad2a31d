//! Independent oracles: central finite differences, a rejection sampler for ESN₂, Monte
//! Carlo summaries, goodness-of-fit tests, and the suite that runs them against the
//! analytic quantities.

use std::fmt::Write as _;
use std::sync::Arc;

use nalgebra::Matrix3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::cubature::{integrate_2d, CubatureControls};
use crate::error::{Esn2Error, Result};
use crate::expectations::{a_terms, expected_zeta1, standardized_expectation};
use crate::expected_info::{block_structure_check, det_scan, expected_info, ExpectedInfo, SweepParam, SweepSpec};
use crate::likelihood::{loglik, observed_info, score, Shared};
use crate::model::{density_esn2, validate, Dataset, DpParams};
use crate::special::{cdf, zeta1};

/// Seed of a sample stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngSeed(pub u64);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FdControls {
    pub grad_step_scale: f64,
    pub hess_step_scale: f64,
}

impl Default for FdControls {
    fn default() -> Self {
        FdControls { grad_step_scale: 1e-6, hess_step_scale: 1e-4 }
    }
}

impl FdControls {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("grad_step_scale", self.grad_step_scale), ("hess_step_scale", self.hess_step_scale)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Esn2Error::InvalidControls(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

const MAX_STEP_HALVINGS: usize = 40;

fn probe<F>(f: &F, theta: &[f64; 8], moves: &[(usize, f64)]) -> Option<f64>
where
    F: Fn(DpParams) -> Result<f64>,
{
    let mut t = *theta;
    for &(k, h) in moves {
        t[k] += h;
    }
    let v = DpParams::from_array(t).and_then(f).ok()?;
    v.is_finite().then_some(v)
}

/// Step of size about `scale·max(1, |θ|)` for which θ + h is exact.
fn base_step(scale: f64, theta: f64) -> f64 {
    let h = scale * theta.abs().max(1.0);
    (theta + h) - theta
}

/// Central-difference gradient; a step is halved while a probe point is invalid.
pub fn fd_gradient<F>(f: F, at: DpParams, controls: FdControls) -> Result<[f64; 8]>
where
    F: Fn(DpParams) -> Result<f64>,
{
    controls.validate()?;
    let theta = validate(at)?.to_array();
    let mut g = [0.0; 8];
    for (k, slot) in g.iter_mut().enumerate() {
        let mut h = base_step(controls.grad_step_scale, theta[k]);
        let mut done = false;
        for _ in 0..MAX_STEP_HALVINGS {
            if let (Some(up), Some(dn)) = (probe(&f, &theta, &[(k, h)]), probe(&f, &theta, &[(k, -h)])) {
                // divide by the spacing the probes actually had after rounding
                *slot = (up - dn) / ((theta[k] + h) - (theta[k] - h));
                done = true;
                break;
            }
            h *= 0.5;
        }
        if !done {
            return Err(Esn2Error::ProbeFailed { coordinate: k });
        }
    }
    Ok(g)
}

/// Second-order central-difference hessian, symmetrized.
pub fn fd_hessian<F>(f: F, at: DpParams, controls: FdControls) -> Result<[[f64; 8]; 8]>
where
    F: Fn(DpParams) -> Result<f64>,
{
    controls.validate()?;
    let theta = validate(at)?.to_array();
    let centre = probe(&f, &theta, &[]).ok_or(Esn2Error::ProbeFailed { coordinate: 0 })?;
    let mut h = [[0.0; 8]; 8];
    for i in 0..8 {
        for j in i..8 {
            let mut hi = base_step(controls.hess_step_scale, theta[i]);
            let mut hj = base_step(controls.hess_step_scale, theta[j]);
            let mut value = None;
            for _ in 0..MAX_STEP_HALVINGS {
                hi = (theta[i] + hi) - theta[i];
                hj = (theta[j] + hj) - theta[j];
                value = if i == j {
                    match (probe(&f, &theta, &[(i, hi)]), probe(&f, &theta, &[(i, -hi)])) {
                        (Some(up), Some(dn)) => Some((up - 2.0 * centre + dn) / (hi * hi)),
                        _ => None,
                    }
                } else {
                    let corners =
                        [(hi, hj), (hi, -hj), (-hi, hj), (-hi, -hj)].map(|(a, b)| probe(&f, &theta, &[(i, a), (j, b)]));
                    match corners {
                        [Some(pp), Some(pm), Some(mp), Some(mm)] => Some((pp - pm - mp + mm) / (4.0 * hi * hj)),
                        _ => None,
                    }
                };
                if value.is_some() {
                    break;
                }
                hi *= 0.5;
                hj *= 0.5;
            }
            h[i][j] = value.ok_or(Esn2Error::ProbeFailed { coordinate: if i == j { i } else { j } })?;
        }
    }
    for i in 0..8 {
        for j in 0..i {
            h[i][j] = h[j][i];
        }
    }
    Ok(h)
}

const CHUNK: usize = 16_384;
const MIN_ACCEPTANCE: f64 = 1e-6;

/// Lower Cholesky factor of [[1, δᵀ], [δ, Ω̄]].
fn latent_factor(dp: &DpParams) -> Result<Matrix3<f64>> {
    let d = dp.delta();
    let l = dp.lambda();
    let cov = Matrix3::new(1.0, d.delta1, d.delta2, d.delta1, 1.0, l, d.delta2, l, 1.0);
    cov.cholesky().map(|c| c.l()).ok_or_else(|| {
        Esn2Error::Precondition("latent covariance [[1, delta'], [delta, Omega_bar]] is not positive definite".into())
    })
}

fn sample_chunk(dp: &DpParams, factor: &Matrix3<f64>, count: usize, seed: RngSeed, chunk: u64) -> Vec<(f64, f64)> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed.0);
    rng.set_stream(chunk);
    let (w1, w2) = (dp.omega11.sqrt(), dp.omega22.sqrt());
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let n = nalgebra::Vector3::new(
            rng.sample::<f64, _>(StandardNormal),
            rng.sample::<f64, _>(StandardNormal),
            rng.sample::<f64, _>(StandardNormal),
        );
        let x = factor * n;
        if x[0] + dp.tau > 0.0 {
            out.push((dp.xi1 + w1 * x[1], dp.xi2 + w2 * x[2]));
        }
    }
    out
}

/// Applies `per_chunk` to consecutive seeded chunks of `n` draws, in parallel, returning
/// results in chunk order.
pub fn map_sample_chunks<T, F>(dp: DpParams, n: usize, seed: RngSeed, per_chunk: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&[(f64, f64)]) -> T + Sync,
{
    let dp = validate(dp)?;
    if n == 0 {
        return Err(Esn2Error::Precondition("sample size must be at least 1".into()));
    }
    let acceptance = cdf(dp.tau);
    if acceptance < MIN_ACCEPTANCE {
        return Err(Esn2Error::PathologicalAcceptance(acceptance));
    }
    let factor = latent_factor(&dp)?;
    let chunks = n.div_ceil(CHUNK);
    Ok((0..chunks)
        .into_par_iter()
        .map(|k| {
            let count = CHUNK.min(n - k * CHUNK);
            per_chunk(&sample_chunk(&dp, &factor, count, seed, k as u64))
        })
        .collect())
}

/// Draws `n` observations by hidden truncation: X given X₀ + τ > 0.
pub fn sample_esn2(dp: DpParams, n: usize, seed: RngSeed) -> Result<Dataset> {
    let chunks = map_sample_chunks(dp, n, seed, |c| c.to_vec())?;
    let (y1, y2) = chunks.into_iter().flatten().unzip();
    Dataset::new(y1, y2)
}

/// Running means and second central moments of `N` quantities.
#[derive(Debug, Clone, Copy)]
pub struct McStats<const N: usize> {
    pub count: usize,
    pub mean: [f64; N],
    m2: [f64; N],
}

impl<const N: usize> Default for McStats<N> {
    fn default() -> Self {
        McStats { count: 0, mean: [0.0; N], m2: [0.0; N] }
    }
}

impl<const N: usize> McStats<N> {
    pub fn push(&mut self, x: &[f64; N]) {
        self.count += 1;
        let n = self.count as f64;
        for i in 0..N {
            let d = x[i] - self.mean[i];
            self.mean[i] += d / n;
            self.m2[i] += d * (x[i] - self.mean[i]);
        }
    }

    pub fn merge(mut self, other: &Self) -> Self {
        if other.count == 0 {
            return self;
        }
        if self.count == 0 {
            return *other;
        }
        let (na, nb) = (self.count as f64, other.count as f64);
        let n = na + nb;
        for i in 0..N {
            let d = other.mean[i] - self.mean[i];
            self.mean[i] += d * nb / n;
            self.m2[i] += other.m2[i] + d * d * na * nb / n;
        }
        self.count += other.count;
        self
    }

    pub fn variance(&self, i: usize) -> f64 {
        if self.count < 2 {
            return f64::NAN;
        }
        self.m2[i] / (self.count - 1) as f64
    }

    pub fn std_error(&self, i: usize) -> f64 {
        (self.variance(i) / self.count as f64).sqrt()
    }
}

/// Monte Carlo mean and standard error of a matrix-valued per-observation quantity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MatrixMc {
    pub mean: [[f64; 8]; 8],
    pub std_error: [[f64; 8]; 8],
    pub draws: usize,
}

impl MatrixMc {
    fn from_stats(stats: &McStats<64>) -> Self {
        let mut mean = [[0.0; 8]; 8];
        let mut std_error = [[0.0; 8]; 8];
        for r in 0..8 {
            for c in 0..8 {
                mean[r][c] = stats.mean[8 * r + c];
                std_error[r][c] = stats.std_error(8 * r + c);
            }
        }
        MatrixMc { mean, std_error, draws: stats.count }
    }
}

fn flatten(m: &[[f64; 8]; 8]) -> [f64; 64] {
    let mut out = [0.0; 64];
    for r in 0..8 {
        out[8 * r..8 * r + 8].copy_from_slice(&m[r]);
    }
    out
}

fn accumulate<const N: usize, F>(dp: DpParams, draws: usize, seed: RngSeed, per_obs: F) -> Result<McStats<N>>
where
    F: Fn(f64, f64) -> [f64; N] + Sync,
{
    let parts = map_sample_chunks(dp, draws, seed, |chunk| {
        let mut s = McStats::<N>::default();
        for &(y1, y2) in chunk {
            s.push(&per_obs(y1, y2));
        }
        s
    })?;
    Ok(parts.iter().fold(McStats::default(), |acc, s| acc.merge(s)))
}

/// Monte Carlo mean of the single-observation observed information at the truth.
pub fn mc_observed_info(dp: DpParams, draws: usize, seed: RngSeed) -> Result<MatrixMc> {
    let dp = validate(dp)?;
    let s = Shared::new(&dp);
    let stats = accumulate(dp, draws, seed, |y1, y2| flatten(&crate::likelihood::observed_info_point(&s, y1, y2)))?;
    Ok(MatrixMc::from_stats(&stats))
}

/// Monte Carlo mean of the single-observation score at the truth.
pub fn mc_score(dp: DpParams, draws: usize, seed: RngSeed) -> Result<McStats<8>> {
    let dp = validate(dp)?;
    let s = Shared::new(&dp);
    accumulate(dp, draws, seed, |y1, y2| s.score_obs(y1, y2))
}

/// log density of the SN₂ law (τ = 0), coded directly from
/// 2·φ₂(y − ξ; Ω)·Φ(αᵀω⁻¹(y − ξ)). The τ component of `dp` is ignored.
pub fn sn2_log_density(dp: DpParams, y1: f64, y2: f64) -> f64 {
    let (w1, w2) = (dp.omega11.sqrt(), dp.omega22.sqrt());
    let det = dp.omega11 * dp.omega22 - dp.omega12 * dp.omega12;
    let (d1, d2) = (y1 - dp.xi1, y2 - dp.xi2);
    let quad = (dp.omega22 * d1 * d1 - 2.0 * dp.omega12 * d1 * d2 + dp.omega11 * d2 * d2) / det;
    let x = dp.alpha1 * d1 / w1 + dp.alpha2 * d2 / w2;
    let log_phi2 = -(2.0 * std::f64::consts::PI).ln() - 0.5 * det.ln() - 0.5 * quad;
    let log_cdf = (0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)).ln();
    std::f64::consts::LN_2 + log_phi2 + log_cdf
}

/// Monte Carlo mean of minus the finite-difference hessian of the SN₂ log density, with
/// draws taken at τ = 0. Row and column 8 are zero.
pub fn mc_sn2_hessian(dp: DpParams, draws: usize, seed: RngSeed, fd: FdControls) -> Result<MatrixMc> {
    fd.validate()?;
    let dp = validate(dp.with_component(7, 0.0))?;
    // the hessian must be finite for every draw; a failure is carried out as NaN
    let stats = accumulate(dp, draws, seed, |y1, y2| match fd_hessian(|p| Ok(sn2_log_density(p, y1, y2)), dp, fd) {
        Ok(h) => flatten(&h.map(|row| row.map(|v| -v))),
        Err(_) => [f64::NAN; 64],
    })?;
    let mut mc = MatrixMc::from_stats(&stats);
    for k in 0..8 {
        for (r, c) in [(7, k), (k, 7)] {
            mc.mean[r][c] = 0.0;
            mc.std_error[r][c] = 0.0;
        }
    }
    Ok(mc)
}

/// Entrywise comparison of an analytic matrix with a Monte Carlo mean over the upper
/// triangle of the leading `dim × dim` block.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McComparison {
    pub entries: usize,
    pub exceedances_3sigma: usize,
    pub max_sigma: f64,
    pub worst: (usize, usize),
    pub passed: bool,
}

const SIGMA_WARN: f64 = 3.0;
const SIGMA_FAIL: f64 = 5.0;
const MAX_EXCEEDANCES: usize = 2;
/// Error of a per-draw central-difference hessian at the default steps.
pub const FD_HESSIAN_ERROR: f64 = 1e-6;

/// `oracle_error` is a deterministic per-draw error of the simulated quantity, relative to
/// max(1, |value|), added in quadrature to the standard error (zero for analytic draws).
pub fn compare_to_mc(analytic: &[[f64; 8]; 8], mc: &MatrixMc, dim: usize, oracle_error: f64) -> McComparison {
    let mut out = McComparison { entries: 0, exceedances_3sigma: 0, max_sigma: 0.0, worst: (0, 0), passed: true };
    for r in 0..dim {
        for c in r..dim {
            let diff = (analytic[r][c] - mc.mean[r][c]).abs();
            let se = mc.std_error[r][c].hypot(oracle_error * analytic[r][c].abs().max(1.0));
            let sigma = if se > 0.0 {
                diff / se
            } else if diff <= 1e-9 * analytic[r][c].abs().max(1.0) {
                0.0
            } else {
                f64::INFINITY
            };
            let sigma = if sigma.is_nan() { f64::INFINITY } else { sigma };
            out.entries += 1;
            if sigma > SIGMA_WARN {
                out.exceedances_3sigma += 1;
            }
            if sigma > out.max_sigma {
                out.max_sigma = sigma;
                out.worst = (r, c);
            }
        }
    }
    out.passed = out.exceedances_3sigma <= MAX_EXCEEDANCES && out.max_sigma <= SIGMA_FAIL;
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChiSquareOutcome {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

const HIST_BINS: usize = 50;
const HIST_REACH: f64 = 4.0;
const MIN_EXPECTED: f64 = 5.0;

/// Pearson χ² of a 50×50 histogram over [−4, 4]² against cell masses of the ESN₂ density.
/// Cells expecting fewer than five draws are pooled with the mass outside the square.
pub fn histogram_chi_square(dp: DpParams, data: &Dataset) -> Result<ChiSquareOutcome> {
    let dp = validate(dp)?;
    let width = 2.0 * HIST_REACH / HIST_BINS as f64;
    let controls = CubatureControls { rel_tol: 1e-8, abs_tol: 1e-14, max_evals: 200_000 };
    let masses: Vec<f64> = (0..HIST_BINS * HIST_BINS)
        .into_par_iter()
        .map(|k| {
            let (i, j) = (k / HIST_BINS, k % HIST_BINS);
            let lo = [-HIST_REACH + i as f64 * width, -HIST_REACH + j as f64 * width];
            let hi = [lo[0] + width, lo[1] + width];
            integrate_2d(|a, b| density_esn2(a, b, dp).unwrap_or(f64::NAN), lo, hi, controls).map(|r| r.value)
        })
        .collect::<Result<_>>()?;
    let mut counts = vec![0usize; HIST_BINS * HIST_BINS];
    let mut outside = 0usize;
    for (y1, y2) in data.iter() {
        let i = ((y1 + HIST_REACH) / width).floor();
        let j = ((y2 + HIST_REACH) / width).floor();
        if (0.0..HIST_BINS as f64).contains(&i) && (0.0..HIST_BINS as f64).contains(&j) {
            counts[i as usize * HIST_BINS + j as usize] += 1;
        } else {
            outside += 1;
        }
    }
    let n = data.len() as f64;
    let mut statistic = 0.0;
    let mut bins = 0usize;
    let mut pooled_mass = (1.0 - masses.iter().sum::<f64>()).max(0.0);
    let mut pooled_count = outside;
    for (m, c) in masses.iter().zip(&counts) {
        if m * n >= MIN_EXPECTED {
            let e = m * n;
            statistic += (*c as f64 - e).powi(2) / e;
            bins += 1;
        } else {
            pooled_mass += m;
            pooled_count += c;
        }
    }
    if pooled_mass * n >= MIN_EXPECTED {
        let e = pooled_mass * n;
        statistic += (pooled_count as f64 - e).powi(2) / e;
        bins += 1;
    }
    let dof = bins.saturating_sub(1).max(1);
    let dist = ChiSquared::new(dof as f64).map_err(|e| Esn2Error::Precondition(e.to_string()))?;
    Ok(ChiSquareOutcome { statistic, dof, p_value: 1.0 - dist.cdf(statistic) })
}

/// Kolmogorov–Smirnov statistic of a sample against a continuous cdf.
pub fn ks_statistic<F: Fn(f64) -> f64>(sample: &[f64], cdf_fn: F) -> f64 {
    let mut xs = sample.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter().enumerate().fold(0.0, |d, (i, &x)| {
        let f = cdf_fn(x);
        d.max(f - i as f64 / n).max((i + 1) as f64 / n - f)
    })
}

/// Asymptotic critical value of the KS statistic at level `alpha`.
pub fn ks_critical_value(n: usize, alpha: f64) -> f64 {
    (-(alpha / 2.0).ln() / 2.0).sqrt() / (n as f64).sqrt()
}

/// z-scores of the sample mean and covariance entries (11, 12, 22) against the closed forms.
pub fn moment_z_scores(dp: DpParams, data: &Dataset) -> Result<[f64; 5]> {
    let m = crate::model::moments_esn2(dp)?;
    let n = data.len();
    let mut first = McStats::<2>::default();
    for (y1, y2) in data.iter() {
        first.push(&[y1, y2]);
    }
    let mut second = McStats::<3>::default();
    for (y1, y2) in data.iter() {
        let (d1, d2) = (y1 - first.mean[0], y2 - first.mean[1]);
        second.push(&[d1 * d1, d1 * d2, d2 * d2]);
    }
    let bias = n as f64 / (n as f64 - 1.0);
    let z = |est: f64, truth: f64, se: f64| (est - truth) / se;
    Ok([
        z(first.mean[0], m.mean[0], first.std_error(0)),
        z(first.mean[1], m.mean[1], first.std_error(1)),
        z(second.mean[0] * bias, m.cov[0][0], second.std_error(0)),
        z(second.mean[1] * bias, m.cov[0][1], second.std_error(1)),
        z(second.mean[2] * bias, m.cov[1][1], second.std_error(2)),
    ])
}

/// Largest entrywise |a − b| / max(|b|, 1).
pub fn max_relative_gap(a: &[[f64; 8]; 8], b: &[[f64; 8]; 8]) -> f64 {
    (0..8)
        .flat_map(|r| (0..8).map(move |c| (r, c)))
        .map(|(r, c)| (a[r][c] - b[r][c]).abs() / b[r][c].abs().max(1.0))
        .fold(0.0, f64::max)
}

/// Expected-information provider used by the suite; replaceable so the suite itself can be tested.
pub type ExpectedInfoFn = Arc<dyn Fn(DpParams, CubatureControls) -> Result<ExpectedInfo> + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SuiteLevel {
    Fast,
    Full,
}

#[derive(Clone)]
pub struct SuiteConfig {
    pub level: SuiteLevel,
    pub dps: Vec<DpParams>,
    pub cubature: CubatureControls,
    pub fd: FdControls,
    pub seed: RngSeed,
    pub info_draws: usize,
    pub chi2_draws: usize,
    pub expected_info: ExpectedInfoFn,
}

impl SuiteConfig {
    pub fn new(level: SuiteLevel) -> Self {
        let (info_draws, chi2_draws) = match level {
            SuiteLevel::Fast => (20_000, 100_000),
            SuiteLevel::Full => (200_000, 1_000_000),
        };
        SuiteConfig {
            level,
            dps: default_dps(),
            cubature: CubatureControls::default(),
            fd: FdControls::default(),
            seed: RngSeed(20_240_601),
            info_draws,
            chi2_draws,
            expected_info: Arc::new(expected_info),
        }
    }
}

/// Parameter points the suite visits by default.
pub fn default_dps() -> Vec<DpParams> {
    [
        [0.0, 0.0, 1.0, 0.6, 1.0, 2.0, 3.0, 1.0],
        [0.5, -1.0, 2.0, -0.3, 0.5, -1.0, 0.5, -0.5],
        [0.0, 0.0, 1.0, 0.0, 1.0, 0.0, 0.0, 0.0],
    ]
    .into_iter()
    .map(|t| DpParams::from_array(t).expect("default points are valid"))
    .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckOutcome {
    pub name: String,
    pub dp: Option<[f64; 8]>,
    pub passed: bool,
    pub measured: f64,
    pub threshold: f64,
    pub note: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub checks: Vec<CheckOutcome>,
}

impl ValidationReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for c in &self.checks {
            let dp = c.dp.map(|d| format!(" dp={d:?}")).unwrap_or_default();
            let _ = writeln!(
                out,
                "{} {}{dp} measured={:e} threshold={:e}{}",
                if c.passed { "PASS" } else { "FAIL" },
                c.name,
                c.measured,
                c.threshold,
                if c.note.is_empty() { String::new() } else { format!(" ({})", c.note) }
            );
        }
        out
    }

    fn record(&mut self, name: &str, dp: Option<DpParams>, outcome: Result<(f64, f64, bool, String)>) {
        let (measured, threshold, passed, note) =
            outcome.unwrap_or_else(|e| (f64::NAN, f64::NAN, false, e.to_string()));
        self.checks.push(CheckOutcome {
            name: name.to_string(),
            dp: dp.map(|d| d.to_array()),
            passed,
            measured,
            threshold,
            note,
        });
    }
}

fn seed_for(base: RngSeed, salt: u64) -> RngSeed {
    RngSeed(base.0.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(salt))
}

fn mc_note(c: &McComparison) -> String {
    format!("{} of {} entries beyond 3 sigma, worst at {:?}", c.exceedances_3sigma, c.entries, c.worst)
}

/// Runs every oracle comparison over `config.dps`. An empty dp set yields an empty report.
pub fn run_validation_suite(config: &SuiteConfig) -> ValidationReport {
    let mut report = ValidationReport::default();
    if config.dps.is_empty() {
        return report;
    }
    for (k, &dp) in config.dps.iter().enumerate() {
        let seed = seed_for(config.seed, k as u64);
        let small = sample_esn2(dp, 5, seed);

        report.record(
            "score-vs-fd",
            Some(dp),
            small.clone().and_then(|data| {
                let analytic = score(dp, &data)?.0;
                let fd = fd_gradient(|p| loglik(p, &data), dp, config.fd)?;
                let gap = analytic.iter().zip(&fd).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                Ok((gap, 1e-5, gap < 1e-5, String::new()))
            }),
        );

        report.record(
            "observed-info-vs-fd",
            Some(dp),
            small.and_then(|data| {
                let analytic = observed_info(dp, &data)?.data;
                let fd = fd_hessian(|p| loglik(p, &data), dp, config.fd)?.map(|r| r.map(|v| -v));
                let gap = max_relative_gap(&analytic, &fd);
                Ok((gap, 1e-4, gap < 1e-4, String::new()))
            }),
        );

        report.record(
            "zeta1-mean-vs-cubature",
            Some(dp),
            (|| {
                let closed = expected_zeta1(dp.lambda(), dp.alpha1, dp.alpha2, dp.tau)?;
                let tight = CubatureControls { rel_tol: 1e-9, abs_tol: 0.0, max_evals: 2_000_000 };
                let r = standardized_expectation(dp, |_, _, t| zeta1(t), [-10.0; 2], [10.0; 2], tight)?;
                let gap = ((r.value - closed) / closed).abs();
                Ok((gap, 1e-5, gap < 1e-5, String::new()))
            })(),
        );

        report.record(
            "expected-info-vs-mc",
            Some(dp),
            (|| {
                let info = (config.expected_info)(dp, config.cubature)?;
                let mc = mc_observed_info(dp, config.info_draws, seed_for(seed, 1))?;
                let c = compare_to_mc(&info.matrix.data, &mc, 8, 0.0);
                Ok((c.max_sigma, SIGMA_FAIL, c.passed && info.converged, mc_note(&c)))
            })(),
        );

        report.record(
            "sn2-reduction-vs-mc",
            Some(dp),
            (|| {
                let at0 = dp.with_component(7, 0.0);
                let info = (config.expected_info)(at0, config.cubature)?;
                let draws = config.info_draws / 4;
                let mc = mc_sn2_hessian(at0, draws, seed_for(seed, 2), config.fd)?;
                let c = compare_to_mc(&info.matrix.data, &mc, 7, FD_HESSIAN_ERROR);
                Ok((c.max_sigma, SIGMA_FAIL, c.passed, mc_note(&c)))
            })(),
        );

        report.record(
            "sampler-chi-square",
            Some(dp),
            (|| {
                let data = sample_esn2(dp, config.chi2_draws, seed_for(seed, 3))?;
                let chi = histogram_chi_square(dp, &data)?;
                Ok((
                    chi.p_value,
                    1e-3,
                    chi.p_value > 1e-3,
                    format!("statistic {:.1} on {} dof", chi.statistic, chi.dof),
                ))
            })(),
        );

        if config.level == SuiteLevel::Full {
            report.record("a-terms-vs-mc", Some(dp), a_terms_vs_mc(dp, 10_000_000, seed_for(seed, 4), config.cubature));
        }
    }

    let singular = DpParams::from_array_unchecked([0.0, 0.0, 1.0, 0.0, 1.0, 0.0, 0.0, 0.0]);
    report.record(
        "singular-point",
        Some(singular),
        (config.expected_info)(singular, config.cubature).map(|info| {
            let i88 = info.matrix.get(7, 7).abs();
            let det = info.matrix.determinant().abs();
            (det, 1e-10, i88 <= 1e-12 && det < 1e-10, format!("|i88| = {i88:e}"))
        }),
    );

    let block = DpParams::from_array_unchecked([0.0, 0.0, 1.0, 0.0, 1.0, 0.0, 2.0, 0.5]);
    report.record(
        "block-structure",
        Some(block),
        block_structure_check(block, config.cubature).map(|b| (b.max_offblock, 1e-6, b.is_block, String::new())),
    );

    let base = DpParams::from_array_unchecked([0.0, 0.0, 1.0, 0.0, 1.0, 0.0, 0.0, 0.0]);
    report.record(
        "alpha1-determinant-ordering",
        Some(base),
        (|| {
            let spec = SweepSpec { sweep_param: SweepParam::Alpha1, grid: vec![0.02, 0.1, 0.5], base };
            let rows = det_scan(&spec, config.cubature)?;
            let ok = rows.iter().all(|r| r.converged) && rows[0].det < rows[1].det && rows[1].det < rows[2].det;
            Ok((rows[0].det, rows[1].det, ok, "det at 0.02 against det at 0.1".into()))
        })(),
    );
    report
}

/// a-terms against the Monte Carlo mean of Zᵖζ₁(T)² under the standardized law.
fn a_terms_vs_mc(dp: DpParams, draws: usize, seed: RngSeed, tol: CubatureControls) -> Result<(f64, f64, bool, String)> {
    let std_dp = DpParams { xi1: 0.0, xi2: 0.0, omega11: 1.0, omega12: dp.lambda(), omega22: 1.0, ..dp };
    let a = a_terms(std_dp, tol)?;
    let alpha0 = std_dp.alpha0();
    let stats = accumulate(std_dp, draws, seed, |z1, z2| {
        let w = zeta1(alpha0 + dp.alpha1 * z1 + dp.alpha2 * z2).powi(2);
        [w, z1 * w, z2 * w, z1 * z1 * w, z2 * z2 * w, z1 * z2 * w]
    })?;
    let analytic = [a.a0, a.a_1_1, a.a_2_1, a.a_1_2, a.a_2_2, a.a_12];
    let sigmas: Vec<f64> = (0..6)
        .map(|i| {
            let se = stats.std_error(i);
            let d = (analytic[i] - stats.mean[i]).abs();
            if se > 0.0 {
                d / se
            } else if d <= 1e-12 {
                0.0
            } else {
                f64::INFINITY
            }
        })
        .collect();
    let worst = sigmas.iter().copied().fold(0.0, f64::max);
    let beyond = sigmas.iter().filter(|s| **s > SIGMA_WARN).count();
    Ok((worst, SIGMA_FAIL, beyond <= MAX_EXCEEDANCES && worst <= SIGMA_FAIL, format!("{beyond} of 6 beyond 3 sigma")))
}

/// Uniform draw in `[lo, hi)`.
fn uniform(rng: &mut ChaCha20Rng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}

/// A random parameter point with moderate shape and |τ| ≤ `tau_reach`.
pub fn random_dp(seed: RngSeed, tau_reach: f64) -> DpParams {
    let mut rng = ChaCha20Rng::seed_from_u64(seed.0);
    let o11 = uniform(&mut rng, 0.5, 2.0);
    let o22 = uniform(&mut rng, 0.5, 2.0);
    let lambda = uniform(&mut rng, -0.8, 0.8);
    DpParams::from_array([
        uniform(&mut rng, -1.0, 1.0),
        uniform(&mut rng, -1.0, 1.0),
        o11,
        lambda * (o11 * o22).sqrt(),
        o22,
        uniform(&mut rng, -3.0, 3.0),
        uniform(&mut rng, -3.0, 3.0),
        uniform(&mut rng, -tau_reach, tau_reach),
    ])
    .expect("random point is valid by construction")
}
