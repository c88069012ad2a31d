//! Log-likelihood, score and observed information of the ESN₂ model in the direct
//! parameterization, summed over a dataset.

mod fit;
mod info;

pub use fit::{fit_mle, FitControls, FitOutcome};
pub use info::{InfoKind, InfoMatrix, SpectralSummary};

use serde::Serialize;

use crate::error::Result;
use crate::model::{validate, Dataset, DpParams};
use crate::special::{zeta0, zeta1, zeta2, LN_2PI};

/// Score ordered as θ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScoreVector(pub [f64; 8]);

impl ScoreVector {
    pub fn inf_norm(&self) -> f64 {
        self.0.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn as_array(&self) -> [f64; 8] {
        self.0
    }
}

/// Quantities shared by every observation for a fixed θ.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Shared {
    xi1: f64,
    xi2: f64,
    o11: f64,
    o22: f64,
    w1: f64,
    w2: f64,
    lambda: f64,
    u: f64,
    a1: f64,
    a2: f64,
    tau: f64,
    den: f64,
    ast2: f64,
    alpha0: f64,
    zeta1_tau: f64,
    zeta2_tau: f64,
    /// α₁α₂λτ/den
    c: f64,
    /// (α₁ + λα₂)τ/den
    d1: f64,
    /// (α₂ + λα₁)τ/den
    d2: f64,
    log_norm: f64,
    zeta0_tau: f64,
}

impl Shared {
    pub(crate) fn new(dp: &DpParams) -> Self {
        let w1 = dp.omega11.sqrt();
        let w2 = dp.omega22.sqrt();
        let lambda = dp.omega12 / (w1 * w2);
        let (a1, a2, tau) = (dp.alpha1, dp.alpha2, dp.tau);
        let ast2 = a1 * a1 + a2 * a2 + 2.0 * a1 * a2 * lambda;
        let den = (1.0 + ast2).sqrt();
        let one_m_l2 = 1.0 - lambda * lambda;
        Shared {
            xi1: dp.xi1,
            xi2: dp.xi2,
            o11: dp.omega11,
            o22: dp.omega22,
            w1,
            w2,
            lambda,
            u: 1.0 / one_m_l2,
            a1,
            a2,
            tau,
            den,
            ast2,
            alpha0: tau * den,
            zeta1_tau: zeta1(tau),
            zeta2_tau: zeta2(tau),
            c: a1 * a2 * lambda * tau / den,
            d1: (a1 + lambda * a2) * tau / den,
            d2: (a2 + lambda * a1) * tau / den,
            log_norm: -LN_2PI - 0.5 * dp.omega11.ln() - 0.5 * dp.omega22.ln() - 0.5 * one_m_l2.ln(),
            zeta0_tau: zeta0(tau),
        }
    }

    #[inline]
    fn standardize(&self, y1: f64, y2: f64) -> (f64, f64, f64) {
        let z1 = (y1 - self.xi1) / self.w1;
        let z2 = (y2 - self.xi2) / self.w2;
        (z1, z2, self.alpha0 + self.a1 * z1 + self.a2 * z2)
    }

    pub(crate) fn loglik_obs(&self, y1: f64, y2: f64) -> f64 {
        let (z1, z2, t) = self.standardize(y1, y2);
        let quad = z1 * z1 + z2 * z2 - 2.0 * self.lambda * z1 * z2;
        self.log_norm - 0.5 * self.u * quad + (zeta0(t) - self.zeta0_tau)
    }

    pub(crate) fn score_obs(&self, y1: f64, y2: f64) -> [f64; 8] {
        let s = self;
        let (z1, z2, t) = s.standardize(y1, y2);
        let (l, u) = (s.lambda, s.u);
        let zt = zeta1(t);
        let w = (z1 * z1 + z2 * z2 - 2.0 * z1 * z2 * l) * l * u * u;
        let k = s.c; // α₁α₂λτ/den
        [
            ((z1 - l * z2) * u - s.a1 * zt) / s.w1,
            ((z2 - l * z1) * u - s.a2 * zt) / s.w2,
            (w * l + (z1 * z1 - 2.0 * z1 * z2 * l - 1.0) * u - (k + s.a1 * z1) * zt) / (2.0 * s.o11),
            ((l + z1 * z2) * u - w + s.a1 * s.a2 * s.tau * zt / s.den) / (s.w1 * s.w2),
            (w * l + (z2 * z2 - 2.0 * z1 * z2 * l - 1.0) * u - (k + s.a2 * z2) * zt) / (2.0 * s.o22),
            (s.d1 + z1) * zt,
            (s.d2 + z2) * zt,
            s.den * zt - s.zeta1_tau,
        ]
    }

    /// Upper triangle of the per-observation hessian, row-major over (r ≤ c).
    pub(crate) fn hessian_obs(&self, y1: f64, y2: f64) -> [[f64; 8]; 8] {
        let s = self;
        let (z1, z2, t) = s.standardize(y1, y2);
        let (l, u) = (s.lambda, s.u);
        let (a1, a2, tau, den) = (s.a1, s.a2, s.tau, s.den);
        let (o11, o22, w1, w2) = (s.o11, s.o22, s.w1, s.w2);
        let (d1, d2, c) = (s.d1, s.d2, s.c);
        let zt1 = zeta1(t);
        let zt2 = zeta2(t);
        let u2 = u * u;
        let u3 = u2 * u;
        let l2 = l * l;
        let l3 = l2 * l;
        let l4 = l2 * l2;
        let den3 = den * den * den;
        let q = z1 * z1 + z2 * z2 - 2.0 * z1 * z2 * l;
        let o11_32 = o11 * w1;
        let o22_32 = o22 * w2;
        let w12 = w1 * w2;
        let e1 = c + a1 * z1;
        let e2 = c + a2 * z2;
        let g1 = d1 + z1;
        let g2 = d2 + z2;
        let a12 = a1 * a2;

        let mut h = [[0.0; 8]; 8];
        h[0][0] = -(u - a1 * a1 * zt2) / o11;
        h[0][1] = (l * u + a12 * zt2) / w12;
        h[0][2] = (l * z2 - z1) * u2 / o11_32 + a1 / (2.0 * o11_32) * e1 * zt2 + a1 / (2.0 * o11_32) * zt1;
        h[0][3] = -2.0 * l * (l * z2 - z1) * u2 / (o11 * w2)
            - z2 * u / (o11 * w2)
            - a1 * a1 * a2 * tau / (o11 * w2 * den) * zt2;
        h[0][4] = l * (z2 - z1 * l) * u2 / (o22 * w1) + a1 / (2.0 * o22 * w1) * e2 * zt2;
        h[0][5] = -(a1 / w1) * g1 * zt2 - zt1 / w1;
        h[0][6] = -(a1 / w1) * g2 * zt2;
        h[0][7] = -(a1 * den / w1) * zt2;

        h[1][1] = -(u - a2 * a2 * zt2) / o22;
        h[1][2] = l * (z1 - z2 * l) * u2 / (o11 * w2) + a2 / (2.0 * o11 * w2) * e1 * zt2;
        h[1][3] = -2.0 * l * (l * z1 - z2) * u2 / (o22 * w1)
            - z1 * u / (o22 * w1)
            - a2 * a2 * a1 * tau / (o22 * w1 * den) * zt2;
        h[1][4] = (l * z1 - z2) * u2 / o22_32 + a2 / (2.0 * o22_32) * e2 * zt2 + a2 / (2.0 * o22_32) * zt1;
        h[1][5] = -(a2 / w2) * g1 * zt2;
        h[1][6] = -(a2 / w2) * g2 * zt2 - zt1 / w2;
        h[1][7] = -(a2 * den / w2) * zt2;

        let cross_tau = 3.0 * a12 * tau * l / den - a12 * a12 * tau * l2 / den3;
        h[2][2] = (l2 - z1 * z1 + 2.0 * z1 * z2 * l) * u / (o11 * o11)
            + (4.0 * l3 * z1 * z2 - 2.0 * l2 * z1 * z1 - l2 * z2 * z2) * u2 / (o11 * o11)
            - l4 * q * u3 / (o11 * o11)
            + 1.0 / (2.0 * o11 * o11)
            + l4 * u2 / (2.0 * o11 * o11)
            + (cross_tau + 3.0 * a1 * z1) * zt1 / (4.0 * o11 * o11)
            + e1 * e1 * zt2 / (4.0 * o11 * o11);
        let n34 = o11_32 * w2;
        h[2][3] = -(l + z1 * z2) * u / n34
            + (2.0 * l * z1 * z1 + l * z2 * z2 - 5.0 * l2 * z1 * z2 - l3) * u2 / n34
            + 2.0 * l3 * q * u3 / n34
            + (a12 * a12 * tau * l / (2.0 * n34 * den3) - a12 * tau / (2.0 * n34 * den)) * zt1
            - a12 * tau / (2.0 * n34 * den) * e1 * zt2;
        h[2][4] = l2 * (6.0 * l * z1 * z2 - 2.0 * z1 * z1 - 2.0 * z2 * z2 + l2) * u2 / (2.0 * o11 * o22)
            + (2.0 * z1 * z2 * l + l2) * u / (2.0 * o11 * o22)
            - l4 * q * u3 / (o11 * o22)
            + a12 * l * tau / (4.0 * o11 * o22 * den) * (1.0 - a12 * l / (1.0 + s.ast2)) * zt1
            + e1 * e2 * zt2 / (4.0 * o11 * o22);
        h[2][5] =
            ((a12 * l * (a2 * l + a1) * tau / den3 - a2 * l * tau / den - z1) * zt1 - e1 * g1 * zt2) / (2.0 * o11);
        h[2][6] = ((a12 * l * (a1 * l + a2) * tau / den3 - a1 * l * tau / den) * zt1 - e1 * g2 * zt2) / (2.0 * o11);
        h[2][7] = -(a12 * l / (2.0 * o11 * den)) * zt1 - den / (2.0 * o11) * e1 * zt2;

        let o1o2 = o11 * o22;
        h[3][3] = u / o1o2 + (6.0 * l * z1 * z2 - z1 * z1 - z2 * z2 + 2.0 * l2) * u2 / o1o2 - 4.0 * l2 * q * u3 / o1o2
            + a12 * a12 * tau / (o1o2 * den * den) * (tau * zt2 - zt1 / den);
        let n45 = o22_32 * w1;
        h[3][4] = -(l + z1 * z2) * u / n45
            + (2.0 * l * z2 * z2 + l * z1 * z1 - 5.0 * l2 * z1 * z2 - l3) * u2 / n45
            + 2.0 * l3 * q * u3 / n45
            + (a12 * a12 * tau * l / (2.0 * n45 * den3) - a12 * tau / (2.0 * n45 * den)) * zt1
            - a12 * tau / (2.0 * n45 * den) * e2 * zt2;
        h[3][5] = a2 * tau / (w12 * den) * (1.0 - a1 * (a2 * l + a1) / (den * den)) * zt1
            + a12 * tau / (w12 * den) * g1 * zt2;
        h[3][6] = a1 * tau / (w12 * den) * (1.0 - a2 * (a1 * l + a2) / (den * den)) * zt1
            + a12 * tau / (w12 * den) * g2 * zt2;
        h[3][7] = a12 / w12 * (zt1 / den + tau * zt2);

        h[4][4] = (l2 - z2 * z2 + 2.0 * z1 * z2 * l) * u / (o22 * o22)
            + (4.0 * l3 * z1 * z2 - 2.0 * l2 * z2 * z2 - l2 * z1 * z1) * u2 / (o22 * o22)
            - l4 * q * u3 / (o22 * o22)
            + 1.0 / (2.0 * o22 * o22)
            + l4 * u2 / (2.0 * o22 * o22)
            + (cross_tau + 3.0 * a2 * z2) * zt1 / (4.0 * o22 * o22)
            + e2 * e2 * zt2 / (4.0 * o22 * o22);
        h[4][5] = ((a12 * l * (a2 * l + a1) * tau / den3 - a2 * l * tau / den) * zt1 - e2 * g1 * zt2) / (2.0 * o22);
        h[4][6] =
            ((a12 * l * (a1 * l + a2) * tau / den3 - a1 * l * tau / den - z2) * zt1 - e2 * g2 * zt2) / (2.0 * o22);
        h[4][7] = -(a12 * l / (2.0 * o22 * den)) * zt1 - den / (2.0 * o22) * e2 * zt2;

        let b1 = a1 + l * a2;
        let b2 = a2 + l * a1;
        h[5][5] = (tau / den - b1 * b1 * tau / den3) * zt1 + g1 * g1 * zt2;
        h[5][6] = (l * tau / den - b2 * b1 * tau / den3) * zt1 + g1 * g2 * zt2;
        h[5][7] = b1 / den * zt1 + g1 * den * zt2;
        h[6][6] = (tau / den - b2 * b2 * tau / den3) * zt1 + g2 * g2 * zt2;
        h[6][7] = b2 / den * zt1 + g2 * den * zt2;
        h[7][7] = den * den * zt2 - s.zeta2_tau;
        h
    }
}

fn check_inputs(dp: DpParams, data: &Dataset) -> Result<Shared> {
    let dp = validate(dp)?;
    if data.is_empty() {
        return Err(crate::error::Esn2Error::EmptyDataset);
    }
    Ok(Shared::new(&dp))
}

/// Sum of log densities; the constant per observation is `−log 2π`.
pub fn loglik(dp: DpParams, data: &Dataset) -> Result<f64> {
    let s = check_inputs(dp, data)?;
    Ok(data.iter().map(|(y1, y2)| s.loglik_obs(y1, y2)).sum())
}

pub fn score(dp: DpParams, data: &Dataset) -> Result<ScoreVector> {
    let s = check_inputs(dp, data)?;
    let mut total = [0.0; 8];
    for (y1, y2) in data.iter() {
        for (acc, v) in total.iter_mut().zip(s.score_obs(y1, y2)) {
            *acc += v;
        }
    }
    Ok(ScoreVector(total))
}

/// Minus the hessian of the log-likelihood.
pub fn observed_info(dp: DpParams, data: &Dataset) -> Result<InfoMatrix> {
    let s = check_inputs(dp, data)?;
    let mut upper = [[0.0; 8]; 8];
    for (y1, y2) in data.iter() {
        let h = s.hessian_obs(y1, y2);
        for r in 0..8 {
            for c in r..8 {
                upper[r][c] -= h[r][c];
            }
        }
    }
    Ok(InfoMatrix::from_upper(InfoKind::Observed, upper))
}

/// Per-observation observed information for a single point, without validation.
pub(crate) fn observed_info_point(s: &Shared, y1: f64, y2: f64) -> [[f64; 8]; 8] {
    let h = s.hessian_obs(y1, y2);
    let mut m = [[0.0; 8]; 8];
    for r in 0..8 {
        for c in r..8 {
            m[r][c] = -h[r][c];
            m[c][r] = -h[r][c];
        }
    }
    m
}
