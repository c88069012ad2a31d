//! Maximum likelihood in unconstrained coordinates
//! η = (ξ₁, ξ₂, log Ω₁₁, atanh λ, log Ω₂₂, α₁, α₂, τ).
//!
//! Search directions come from the analytic information in η when it is positive
//! definite (Newton) and from a BFGS inverse-hessian approximation otherwise.

use nalgebra::{SMatrix, SVector};
use serde::Serialize;

use super::{ScoreVector, Shared};
use crate::error::{Esn2Error, Result};
use crate::model::{validate, Dataset, DpParams};

type Vec8 = SVector<f64, 8>;
type Mat8 = SMatrix<f64, 8, 8>;

const MIN_OBSERVATIONS: usize = 5;
const MAX_STEP: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FitControls {
    pub grad_tol: f64,
    pub max_iter: usize,
}

impl Default for FitControls {
    fn default() -> Self {
        FitControls { grad_tol: 1e-6, max_iter: 500 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FitOutcome {
    pub dp_hat: DpParams,
    pub converged: bool,
    pub final_score_norm: f64,
    pub loglik: f64,
    pub iterations: usize,
}

fn to_internal(dp: &DpParams) -> Vec8 {
    Vec8::from([dp.xi1, dp.xi2, dp.omega11.ln(), dp.lambda().atanh(), dp.omega22.ln(), dp.alpha1, dp.alpha2, dp.tau])
}

fn from_internal(eta: &Vec8) -> DpParams {
    let o11 = eta[2].exp();
    let o22 = eta[4].exp();
    let lambda = eta[3].tanh();
    DpParams {
        xi1: eta[0],
        xi2: eta[1],
        omega11: o11,
        omega12: lambda * (o11 * o22).sqrt(),
        omega22: o22,
        alpha1: eta[5],
        alpha2: eta[6],
        tau: eta[7],
    }
}

struct Evaluation {
    loglik: f64,
    score: [f64; 8],
    grad_eta: Vec8,
}

fn evaluate(eta: &Vec8, data: &Dataset) -> Option<Evaluation> {
    let dp = validate(from_internal(eta)).ok()?;
    let s = Shared::new(&dp);
    let mut loglik = 0.0;
    let mut score = [0.0; 8];
    for (y1, y2) in data.iter() {
        loglik += s.loglik_obs(y1, y2);
        for (acc, v) in score.iter_mut().zip(s.score_obs(y1, y2)) {
            *acc += v;
        }
    }
    if !loglik.is_finite() || score.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let jac = jacobian(&dp);
    let grad_eta = jac.transpose() * Vec8::from(score);
    Some(Evaluation { loglik, score, grad_eta })
}

/// ∂θ/∂η.
fn jacobian(dp: &DpParams) -> Mat8 {
    let mut j = Mat8::identity();
    let root = (dp.omega11 * dp.omega22).sqrt();
    let lambda = dp.lambda();
    j[(2, 2)] = dp.omega11;
    j[(4, 4)] = dp.omega22;
    j[(3, 3)] = (1.0 - lambda * lambda) * root;
    j[(3, 2)] = 0.5 * dp.omega12;
    j[(3, 4)] = 0.5 * dp.omega12;
    j
}

/// Information (minus hessian of ℓ) in η coordinates.
fn info_eta(dp: &DpParams, score: &[f64; 8], data: &Dataset) -> Mat8 {
    let s = Shared::new(dp);
    let mut h = Mat8::zeros();
    for (y1, y2) in data.iter() {
        let ho = s.hessian_obs(y1, y2);
        for r in 0..8 {
            for c in r..8 {
                h[(r, c)] += ho[r][c];
            }
        }
    }
    for r in 0..8 {
        for c in 0..r {
            h[(r, c)] = h[(c, r)];
        }
    }
    let j = jacobian(dp);
    let mut he = j.transpose() * h * j;
    // second derivatives of θ(η)
    let lambda = dp.lambda();
    let root = (dp.omega11 * dp.omega22).sqrt();
    let g12 = score[3];
    he[(2, 2)] += score[2] * dp.omega11 + g12 * dp.omega12 / 4.0;
    he[(4, 4)] += score[4] * dp.omega22 + g12 * dp.omega12 / 4.0;
    he[(2, 4)] += g12 * dp.omega12 / 4.0;
    he[(4, 2)] += g12 * dp.omega12 / 4.0;
    let d_lam = (1.0 - lambda * lambda) * root;
    he[(3, 3)] += g12 * (-2.0 * lambda * d_lam);
    he[(2, 3)] += g12 * d_lam / 2.0;
    he[(3, 2)] += g12 * d_lam / 2.0;
    he[(4, 3)] += g12 * d_lam / 2.0;
    he[(3, 4)] += g12 * d_lam / 2.0;
    -he
}

fn inf_norm(v: &[f64; 8]) -> f64 {
    ScoreVector(*v).inf_norm()
}

/// Maximizes the log-likelihood starting from `init`.
pub fn fit_mle(data: &Dataset, init: DpParams, controls: FitControls) -> Result<FitOutcome> {
    let init = validate(init)?;
    if data.len() < MIN_OBSERVATIONS {
        return Err(Esn2Error::DatasetTooSmall { got: data.len(), need: MIN_OBSERVATIONS });
    }
    if !(controls.grad_tol > 0.0) {
        return Err(Esn2Error::InvalidControls(format!("grad_tol must be positive, got {}", controls.grad_tol)));
    }

    let mut eta = to_internal(&init);
    let Some(mut cur) = evaluate(&eta, data) else {
        return Err(Esn2Error::Precondition("log-likelihood is not finite at the initial point".into()));
    };
    // inverse-hessian approximation of −ℓ
    let mut inv_h = Mat8::identity() / (data.len() as f64);
    let mut iterations = 0;
    let mut converged = inf_norm(&cur.score) < controls.grad_tol;

    while !converged && iterations < controls.max_iter {
        iterations += 1;
        let dp = from_internal(&eta);
        let info = info_eta(&dp, &cur.score, data);
        let newton = info.cholesky().map(|ch| ch.solve(&cur.grad_eta));
        let mut p = match newton {
            Some(p) if p.iter().all(|v| v.is_finite()) => p,
            _ => inv_h * cur.grad_eta,
        };
        let mut slope = p.dot(&cur.grad_eta);
        if !(slope > 0.0) {
            // not an ascent direction; fall back to steepest ascent
            inv_h = Mat8::identity() / (data.len() as f64);
            p = inv_h * cur.grad_eta;
            slope = p.dot(&cur.grad_eta);
        }
        let biggest = p.amax();
        if biggest > MAX_STEP {
            p *= MAX_STEP / biggest;
            slope *= MAX_STEP / biggest;
        }

        let old_norm = inf_norm(&cur.score);
        let noise = 1e-11 * cur.loglik.abs().max(1.0);
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let trial = eta + p * step;
            if let Some(next) = evaluate(&trial, data) {
                let armijo = next.loglik >= cur.loglik + 1e-4 * step * slope;
                let flat = next.loglik >= cur.loglik - noise && inf_norm(&next.score) < old_norm;
                if armijo || flat {
                    accepted = Some((trial, next));
                    break;
                }
            }
            step *= 0.5;
        }
        let Some((next_eta, next)) = accepted else { break };

        let s = next_eta - eta;
        let y = cur.grad_eta - next.grad_eta;
        let sy = s.dot(&y);
        if sy > 1e-12 * s.norm() * y.norm() {
            let rho = 1.0 / sy;
            let i = Mat8::identity();
            inv_h = (i - s * y.transpose() * rho) * inv_h * (i - y * s.transpose() * rho) + s * s.transpose() * rho;
        }
        eta = next_eta;
        cur = next;
        converged = inf_norm(&cur.score) < controls.grad_tol;
    }

    Ok(FitOutcome {
        dp_hat: from_internal(&eta),
        converged,
        final_score_norm: inf_norm(&cur.score),
        loglik: cur.loglik,
        iterations,
    })
}
