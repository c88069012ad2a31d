//! Expectations of ζ-function transforms of T = α₀ + αᵀZ under the standardized ESN₂ law.
//!
//! Everything except the six a-terms E[Zᵖ ζ₁(T)²] has a closed form. The a-terms reduce
//! to one-dimensional moments along α, integrated adaptively over a range sized from the
//! integrand itself.

use serde::Serialize;

use crate::cubature::{integrate_1d, integrate_2d_grid, CubatureControls};
use crate::error::{Esn2Error, Result};
use crate::model::{validate, DpParams};
use crate::special::{log_pdf, zeta0, zeta1, zeta2, LN_2PI};

/// Tilted mass the r-range must hold before the a-terms are trusted.
const MASS_COVERAGE: f64 = 1.0 - 1e-9;
const MAX_WIDENINGS: usize = 6;
/// Log-weight drop below the peak that still counts as inside the r-range.
const WEIGHT_DROP: f64 = 45.0;
const SEGMENTS: usize = 16;

/// Law of U in E[g(Z)ζ₁(T)] = E[ζ₁(T)]·E[g(U)].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UDistribution {
    pub mean: [f64; 2],
    pub cov: [[f64; 2]; 2],
}

impl UDistribution {
    pub fn v11(&self) -> f64 {
        self.cov[0][0]
    }
    pub fn v12(&self) -> f64 {
        self.cov[0][1]
    }
    pub fn v22(&self) -> f64 {
        self.cov[1][1]
    }
}

fn check_shape(lambda: f64, alpha1: f64, alpha2: f64, tau: f64) -> Result<()> {
    for (name, v) in [("lambda", lambda), ("alpha1", alpha1), ("alpha2", alpha2), ("tau", tau)] {
        if !v.is_finite() {
            return Err(Esn2Error::NonFiniteParameter { name });
        }
    }
    if lambda.abs() >= 1.0 {
        return Err(Esn2Error::CorrelationOutOfRange(lambda));
    }
    Ok(())
}

/// E[ζ₁(T)] = ζ₁(τ)/√(1+α*²).
pub fn expected_zeta1(lambda: f64, alpha1: f64, alpha2: f64, tau: f64) -> Result<f64> {
    check_shape(lambda, alpha1, alpha2, tau)?;
    let ast2 = alpha1 * alpha1 + alpha2 * alpha2 + 2.0 * alpha1 * alpha2 * lambda;
    Ok(zeta1(tau) / (1.0 + ast2).sqrt())
}

/// U ~ N₂(−τδ, V) with V given entrywise by the closed forms.
pub fn u_distribution(lambda: f64, alpha1: f64, alpha2: f64, tau: f64) -> Result<UDistribution> {
    check_shape(lambda, alpha1, alpha2, tau)?;
    let ast2 = alpha1 * alpha1 + alpha2 * alpha2 + 2.0 * alpha1 * alpha2 * lambda;
    let den = (1.0 + ast2).sqrt();
    let d1 = (alpha1 + lambda * alpha2) / den;
    let d2 = (alpha2 + lambda * alpha1) / den;
    let oml = 1.0 - lambda * lambda;
    let v11 = (1.0 + alpha2 * alpha2 * oml) / (1.0 + ast2);
    let v22 = (1.0 + alpha1 * alpha1 * oml) / (1.0 + ast2);
    let v12 = (lambda - alpha1 * alpha2 * oml) / (1.0 + ast2);
    Ok(UDistribution { mean: [-tau * d1, -tau * d2], cov: [[v11, v12], [v12, v22]] })
}

/// The cubature-computed expectations E[Zᵖ ζ₁(T)²].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ATerms {
    pub a0: f64,
    pub a_1_1: f64,
    pub a_2_1: f64,
    pub a_1_2: f64,
    pub a_2_2: f64,
    pub a_12: f64,
    /// False when any integral stopped on the evaluation budget.
    pub converged: bool,
    pub max_error: f64,
    pub evals: usize,
}

impl ATerms {
    /// Closed forms when α = 0: T ≡ τ and Z ~ N₂(0, Ω̄).
    pub fn degenerate(lambda: f64, tau: f64) -> Self {
        let z2 = zeta1(tau).powi(2);
        ATerms {
            a0: z2,
            a_1_1: 0.0,
            a_2_1: 0.0,
            a_1_2: z2,
            a_2_2: z2,
            a_12: lambda * z2,
            converged: true,
            max_error: 0.0,
            evals: 0,
        }
    }
}

/// Shape quantities of the standardized law, conditioned on R = αᵀZ₀/α*.
///
/// R is standard normal, Z₀ | R = r ~ N₂(b·r, Ω̄ − bbᵀ) with b = Ω̄α/α*, and
/// T = α₀ + α*R, so every a-term is a combination of ∫ rᵏ w(r) dr for k = 0, 1, 2.
#[derive(Debug, Clone, Copy)]
struct Shape {
    tau: f64,
    lambda: f64,
    alpha0: f64,
    ast: f64,
    b: [f64; 2],
}

impl Shape {
    fn new(dp: &DpParams) -> Self {
        let lambda = dp.lambda();
        let ast2 = dp.alpha_star_sq();
        let ast = ast2.sqrt();
        let b = [(dp.alpha1 + lambda * dp.alpha2) / ast, (dp.alpha2 + lambda * dp.alpha1) / ast];
        Shape { tau: dp.tau, lambda, alpha0: dp.tau * (1.0 + ast2).sqrt(), ast, b }
    }

    fn t(&self, r: f64) -> f64 {
        self.alpha0 + self.ast * r
    }

    /// log density of R under the tilted law.
    fn log_density(&self, r: f64) -> f64 {
        -0.5 * (LN_2PI + r * r) + zeta0(self.t(r)) - zeta0(self.tau)
    }

    /// log of ζ₁(T)²·density, written as ζ₁(T)φ(T)φ(r)/Φ(τ).
    fn log_weight(&self, r: f64) -> f64 {
        let t = self.t(r);
        -0.5 * (LN_2PI + r * r) + zeta1(t).ln() + log_pdf(t) - zeta0(self.tau)
    }
}

/// Range of r holding every point where the tilted density or the a0 weight is within
/// e^−WEIGHT_DROP of its own peak.
fn r_range(s: &Shape) -> (f64, f64) {
    let reach = 12.0 + s.alpha0.abs() * (2.0 * s.ast).min(1.0 / s.ast);
    let step = 0.01 / s.ast.max(1.0);
    let steps = ((2.0 * reach) / step).ceil() as usize;
    let grid: Vec<f64> = (0..=steps).map(|k| -reach + 2.0 * reach * k as f64 / steps as f64).collect();
    let dens: Vec<f64> = grid.iter().map(|&r| s.log_density(r)).collect();
    let wts: Vec<f64> = grid.iter().map(|&r| s.log_weight(r)).collect();
    let peak = |v: &[f64]| v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (pd, pw) = (peak(&dens), peak(&wts));
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for ((r, d), w) in grid.iter().zip(&dens).zip(&wts) {
        if *d >= pd - WEIGHT_DROP || *w >= pw - WEIGHT_DROP {
            lo = lo.min(*r);
            hi = hi.max(*r);
        }
    }
    (lo - step, hi + step)
}

/// Computes the six a-terms. The result carries a convergence flag.
pub fn a_terms(dp: DpParams, tol: CubatureControls) -> Result<ATerms> {
    let dp = validate(dp)?;
    tol.validate()?;
    if dp.alpha1 == 0.0 && dp.alpha2 == 0.0 {
        return Ok(ATerms::degenerate(dp.lambda(), dp.tau));
    }
    let s = Shape::new(&dp);
    let (mut lo, mut hi) = r_range(&s);
    let integrand = |r: f64| {
        let w = s.log_weight(r).exp();
        [w, r * w, r * r * w, s.log_density(r).exp()]
    };

    let mut evals = 0;
    let mut widenings = 0;
    let moments = loop {
        // a first pass fixes the Cauchy–Schwarz floor for the signed first moment
        let rough = integrate_1d(integrand, lo, hi, SEGMENTS, [0.0; 4], tol)?;
        let floor = tol.rel_tol * (rough[0].value * rough[2].value).max(0.0).sqrt();
        let m = integrate_1d(integrand, lo, hi, SEGMENTS, [0.0, floor, 0.0, 0.0], tol)?;
        evals += rough[0].evals + m[0].evals;
        if m[3].value >= MASS_COVERAGE || widenings == MAX_WIDENINGS {
            break m;
        }
        let half = 0.5 * (hi - lo);
        lo -= half;
        hi += half;
        widenings += 1;
    };
    let [m0, m1, m2, _] = moments;
    let b = s.b;
    let cond = [1.0 - b[0] * b[0], 1.0 - b[1] * b[1], s.lambda - b[0] * b[1]];
    let second = |u: f64, c: f64| u * m2.value + c * m0.value;
    let second_err = |u: f64, c: f64| u.abs() * m2.error_estimate + c.abs() * m0.error_estimate;
    let max_error = [
        m0.error_estimate,
        b[0].abs() * m1.error_estimate,
        b[1].abs() * m1.error_estimate,
        second_err(b[0] * b[0], cond[0]),
        second_err(b[1] * b[1], cond[1]),
        second_err(b[0] * b[1], cond[2]),
    ]
    .into_iter()
    .fold(0.0, f64::max);
    Ok(ATerms {
        a0: m0.value,
        a_1_1: b[0] * m1.value,
        a_2_1: b[1] * m1.value,
        a_1_2: second(b[0] * b[0], cond[0]),
        a_2_2: second(b[1] * b[1], cond[1]),
        a_12: second(b[0] * b[1], cond[2]),
        converged: moments.iter().all(|m| m.converged) && moments[3].value >= MASS_COVERAGE,
        max_error,
        evals,
    })
}

/// Closed-form expectations plus the a-terms they depend on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExpectationSet {
    pub e_zeta1: f64,
    pub e_z1_zeta1: f64,
    pub e_z2_zeta1: f64,
    pub e_z1sq_zeta1: f64,
    pub e_z2sq_zeta1: f64,
    pub e_t_zeta1: f64,
    pub e_z1t_zeta1: f64,
    pub e_z2t_zeta1: f64,
    pub e_zeta2: f64,
    pub e_z1_zeta2: f64,
    pub e_z2_zeta2: f64,
    pub e_z1sq_zeta2: f64,
    pub e_z2sq_zeta2: f64,
    pub e_z1z2_zeta2: f64,
    pub a: ATerms,
    pub e_z1: f64,
    pub e_z2: f64,
    pub e_z1z2: f64,
    pub e_z1sq: f64,
    pub e_z2sq: f64,
}

/// Computes the a-terms by cubature and assembles the full set.
pub fn expectation_set(dp: DpParams, tol: CubatureControls) -> Result<ExpectationSet> {
    let a = a_terms(dp, tol)?;
    expectation_set_from(dp, a)
}

/// Assembles the set from given a-terms; deterministic in its inputs.
pub fn expectation_set_from(dp: DpParams, a: ATerms) -> Result<ExpectationSet> {
    let dp = validate(dp)?;
    let lambda = dp.lambda();
    let (a1, a2, tau) = (dp.alpha1, dp.alpha2, dp.tau);
    let ast2 = dp.alpha_star_sq();
    let den = (1.0 + ast2).sqrt();
    let alpha0 = tau * den;
    let z1t = zeta1(tau);
    let z2t = zeta2(tau);
    let u = u_distribution(lambda, a1, a2, tau)?;
    let (v11, v12, v22) = (u.v11(), u.v12(), u.v22());
    let d1 = (a1 + lambda * a2) / den;
    let d2 = (a2 + lambda * a1) / den;
    let tt = tau * tau;

    let ez1 = z1t / den;
    let e_z1_zeta1 = -tau * d1 * ez1;
    let e_z2_zeta1 = -tau * d2 * ez1;
    let e_z1sq_zeta1 = (tt * d1 * d1 + v11) * ez1;
    let e_z2sq_zeta1 = (tt * d2 * d2 + v22) * ez1;
    let e_t_zeta1 = (alpha0 - tau * (a1 * d1 + a2 * d2)) * ez1;
    let e_z1t_zeta1 = (-alpha0 * tau * d1 + a1 * (tt * d1 * d1 + v11) + a2 * (tt * d1 * d2 + v12)) * ez1;
    let e_z2t_zeta1 = (-alpha0 * tau * d2 + a2 * (tt * d2 * d2 + v22) + a1 * (tt * d1 * d2 + v12)) * ez1;

    let e_zeta2 = -(alpha0 - tau * (a1 * d1 + a2 * d2)) * ez1 - a.a0;
    let e_z1_zeta2 = -(-alpha0 * tau * d1 + a1 * (tt * d1 * d1 + v11) + a2 * (tt * d1 * d2 + v12)) * ez1 - a.a_1_1;
    let e_z2_zeta2 = -(-alpha0 * tau * d2 + a2 * (tt * d2 * d2 + v22) + a1 * (tt * d1 * d2 + v12)) * ez1 - a.a_2_1;
    let e_z1sq_zeta2 = -(alpha0 * (v11 + tt * d1 * d1) - a1 * tau * d1 * (tt * d1 * d1 + 3.0 * v11)
        + a2 * tau * ((v12 / v11) * d1 - d2) * (tt * d1 * d1 + v11)
        - a2 * tau * d1 * (v12 / v11) * (tt * d1 * d1 + 3.0 * v11))
        * ez1
        - a.a_1_2;
    let e_z2sq_zeta2 = -(alpha0 * (v22 + tt * d2 * d2) - a2 * tau * d2 * (tt * d2 * d2 + 3.0 * v22)
        + a1 * tau * ((v12 / v22) * d2 - d1) * (tt * d2 * d2 + v22)
        - a1 * tau * d2 * (v12 / v22) * (tt * d2 * d2 + 3.0 * v22))
        * ez1
        - a.a_2_2;
    let e_z1z2_zeta2 = -(alpha0 * (v12 + tt * d1 * d2) + a1 * tau * ((v12 / v11) * d1 - d2) * (tt * d1 * d1 + v11)
        - a1 * tau * d1 * (v12 / v11) * (tt * d1 * d1 + 3.0 * v11)
        + a2 * tau * ((v12 / v22) * d2 - d1) * (tt * d2 * d2 + v22)
        - a2 * tau * d2 * (v12 / v22) * (tt * d2 * d2 + 3.0 * v22))
        * ez1
        - a.a_12;

    let k = z1t * z1t + z2t;
    Ok(ExpectationSet {
        e_zeta1: ez1,
        e_z1_zeta1,
        e_z2_zeta1,
        e_z1sq_zeta1,
        e_z2sq_zeta1,
        e_t_zeta1,
        e_z1t_zeta1,
        e_z2t_zeta1,
        e_zeta2,
        e_z1_zeta2,
        e_z2_zeta2,
        e_z1sq_zeta2,
        e_z2sq_zeta2,
        e_z1z2_zeta2,
        a,
        e_z1: z1t * d1,
        e_z2: z1t * d2,
        e_z1z2: lambda + d1 * d2 * k,
        e_z1sq: 1.0 + d1 * d1 * k,
        e_z2sq: 1.0 + d2 * d2 * k,
    })
}

/// ∫ g(z₁, z₂, t) f(z; 0, Ω̄, α, τ) dz by plain cubature in z over `[lower, upper]`,
/// starting from a partition into cells no wider than 0.5. Used by oracles.
pub fn standardized_expectation<G>(
    dp: DpParams,
    g: G,
    lower: [f64; 2],
    upper: [f64; 2],
    tol: CubatureControls,
) -> Result<crate::CubatureResult>
where
    G: Fn(f64, f64, f64) -> f64,
{
    let dp = validate(dp)?;
    let lambda = dp.lambda();
    let oml = 1.0 - lambda * lambda;
    let alpha0 = dp.alpha0();
    let log_norm = -LN_2PI - 0.5 * oml.ln() - zeta0(dp.tau);
    let cells = [0, 1].map(|j| (((upper[j] - lower[j]) / 0.5).ceil() as usize).max(1));
    integrate_2d_grid(
        |z1, z2| {
            let t = alpha0 + dp.alpha1 * z1 + dp.alpha2 * z2;
            let q = (z1 * z1 - 2.0 * lambda * z1 * z2 + z2 * z2) / oml;
            let w = (log_norm - 0.5 * q + zeta0(t)).exp();
            if w == 0.0 {
                0.0
            } else {
                g(z1, z2, t) * w
            }
        },
        lower,
        upper,
        cells,
        tol,
    )
}
