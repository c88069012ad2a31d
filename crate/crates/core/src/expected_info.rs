//! Expected Fisher information of the ESN₂ model per observation, and the tools used to
//! study where it becomes singular.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cubature::CubatureControls;
use crate::error::{Esn2Error, Result};
use crate::expectations::{expectation_set, ExpectationSet};
use crate::likelihood::{InfoKind, InfoMatrix};
use crate::model::{validate, DpParams};
use crate::special::zeta2;

/// Expected information together with the expectations it was built from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExpectedInfo {
    pub matrix: InfoMatrix,
    /// False when some a-term integral hit its evaluation budget.
    pub converged: bool,
    pub expectations: ExpectationSet,
}

/// Per-observation expected information at `dp`.
pub fn expected_info(dp: DpParams, tol: CubatureControls) -> Result<ExpectedInfo> {
    let dp = validate(dp)?;
    let e = expectation_set(dp, tol)?;
    Ok(ExpectedInfo { matrix: expected_info_from(dp, &e), converged: e.a.converged, expectations: e })
}

/// Assembles i(θ) from an expectation set.
pub fn expected_info_from(dp: DpParams, e: &ExpectationSet) -> InfoMatrix {
    let (o11, o22) = (dp.omega11, dp.omega22);
    let l = dp.lambda();
    let (a1, a2, tau) = (dp.alpha1, dp.alpha2, dp.tau);
    let ast2 = dp.alpha_star_sq();
    let den = (1.0 + ast2).sqrt();
    let den2 = den * den;
    let den3 = den2 * den;
    let oml = 1.0 - l * l;
    let oml2 = oml * oml;
    let oml3 = oml2 * oml;
    let (l2, l3, l4) = (l * l, l * l * l, l * l * l * l);
    let (s11, s22) = (o11.sqrt(), o22.sqrt());
    let (o11_32, o22_32) = (o11 * s11, o22 * s22);
    let s1122 = (o11 * o22).sqrt();
    let tt = tau * tau;

    let (ez1, ez2) = (e.e_zeta1, e.e_zeta2);
    let (e_z1, e_z2, e_z1z2, e_z1q, e_z2q) = (e.e_z1, e.e_z2, e.e_z1z2, e.e_z1sq, e.e_z2sq);
    let (e_z1_zeta1, e_z2_zeta1) = (e.e_z1_zeta1, e.e_z2_zeta1);
    let (e_z1_zeta2, e_z2_zeta2) = (e.e_z1_zeta2, e.e_z2_zeta2);
    let (ez1q_zeta2, ez2q_zeta2, e_z1z2_zeta2) = (e.e_z1sq_zeta2, e.e_z2sq_zeta2, e.e_z1z2_zeta2);

    // recurring pieces
    let c = a1 * a2 * l * tau / den;
    let d1 = a1 + l * a2;
    let d2 = a2 + l * a1;
    let sq_sum = e_z1q + e_z2q - 2.0 * e_z1z2 * l;

    let i11 = (1.0 / o11) * (1.0 / oml - a1 * a1 * ez2);
    let i12 = (-1.0 / s1122) * (l / oml + a1 * a2 * ez2);
    let i13 = -(l * e_z2 - e_z1) / (oml2 * o11_32)
        - (a1 / (2.0 * o11_32)) * (c * ez2 + a1 * e_z1_zeta2)
        - (a1 / (2.0 * o11_32)) * ez1;
    let i14 = (2.0 * l * (l * e_z2 - e_z1)) / (oml2 * o11 * s22)
        + e_z2 / (oml * o11 * s22)
        + (a1 * a1 * a2 * tau / (o11 * s22 * den)) * ez2;
    let i15 = -(l * (e_z2 - e_z1 * l)) / (oml2 * o22 * s11) - (a1 / (2.0 * o22 * s11)) * (c * ez2 + a2 * e_z2_zeta2);
    let i16 = (a1 / s11) * ((d1 * tau / den) * ez2 + e_z1_zeta2) + (1.0 / s11) * ez1;
    let i17 = (a1 / s11) * ((d2 * tau / den) * ez2 + e_z2_zeta2);
    let i18 = (a1 * den / s11) * ez2;

    let i22 = (1.0 / o22) * (1.0 / oml - a2 * a2 * ez2);
    let i23 = -(l * (e_z1 - e_z2 * l)) / (oml2 * o11 * s22) - (a2 / (2.0 * o11 * s22)) * (c * ez2 + a1 * e_z1_zeta2);
    let i24 = (2.0 * l * (l * e_z1 - e_z2)) / (oml2 * o22 * s11)
        + e_z1 / (oml * o22 * s11)
        + (a2 * a2 * a1 * tau / (o22 * s11 * den)) * ez2;
    let i25 = -(l * e_z1 - e_z2) / (oml2 * o22_32)
        - (a2 / (2.0 * o22_32)) * (c * ez2 + a2 * e_z2_zeta2)
        - (a2 / (2.0 * o22_32)) * ez1;
    let i26 = (a2 / s22) * ((d1 * tau / den) * ez2 + e_z1_zeta2);
    let i27 = (a2 / s22) * ((d2 * tau / den) * ez2 + e_z2_zeta2) + (1.0 / s22) * ez1;
    let i28 = (a2 * den / s22) * ez2;

    let q11 = o11 * o11;
    let i33 = -(l2 - e_z1q + 2.0 * e_z1z2 * l) / (q11 * oml)
        - (4.0 * l3 * e_z1z2 - 2.0 * l2 * e_z1q - l2 * e_z2q) / (q11 * oml2)
        + (l4 * sq_sum) / (q11 * oml3)
        - 1.0 / (2.0 * q11)
        - l4 / (2.0 * q11 * oml2)
        - (1.0 / (4.0 * q11))
            * ((3.0 * a1 * a2 * tau * l / den) * ez1 - (a1 * a1 * a2 * a2 * tau * l2 / den3) * ez1
                + 3.0 * a1 * e_z1_zeta1)
        - (1.0 / (4.0 * q11))
            * ((a1 * a1 * a2 * a2 * tt * l2 / den2) * ez2
                + a1 * a1 * ez1q_zeta2
                + (2.0 * a1 * a1 * a2 * tau * l / den) * e_z1_zeta2);
    let k34 = o11_32 * s22;
    let i34 = (l + e_z1z2) / (oml * k34)
        - (2.0 * l * e_z1q + l * e_z2q - 5.0 * l2 * e_z1z2 - l3) / (oml2 * k34)
        - (2.0 * l3 * sq_sum) / (oml3 * k34)
        - ((a1 * a1 * a2 * a2 * tau * l) / (2.0 * k34 * den3) - (a1 * a2 * tau) / (2.0 * k34 * den)) * ez1
        + ((a1 * a2 * tau) / (2.0 * k34 * den)) * (c * ez2 + a1 * e_z1_zeta2);
    let k35 = o11 * o22;
    let i35 = -(l4 + 6.0 * l3 * e_z1z2 - 2.0 * l2 * e_z1q - 2.0 * l2 * e_z2q) / (2.0 * k35 * oml2)
        - l2 / (2.0 * k35 * oml)
        - (l * e_z1z2) / (k35 * oml)
        + (l4 * sq_sum) / (k35 * oml3)
        - ((a1 * a2 * l * tau) / (4.0 * k35 * den)) * (1.0 - (a1 * a2 * l) / (1.0 + ast2)) * ez1
        - ((a1 * a2) / (4.0 * k35))
            * ((a1 * a2 * l2 * tt / den2) * ez2
                + (a2 * l * tau / den) * e_z2_zeta2
                + (a1 * l * tau / den) * e_z1_zeta2
                + e_z1z2_zeta2);
    let i36 = -(1.0 / (2.0 * o11))
        * ((a1 * a2 * l * (a2 * l + a1) * tau / den3) * ez1 - (a2 * l * tau / den) * ez1 - e_z1_zeta1)
        + (1.0 / (2.0 * o11))
            * ((a1 * a2 * l * tt * (a2 * l + a1) / den2) * ez2
                + (a1 * a2 * l * tau / den) * e_z1_zeta2
                + (a1 * (a2 * l + a1) * tau / den) * e_z1_zeta2
                + a1 * ez1q_zeta2);
    let i37 = -(1.0 / (2.0 * o11)) * ((a1 * a2 * l * (a1 * l + a2) * tau) / den3 - (a1 * l * tau) / den) * ez1
        + (1.0 / (2.0 * o11))
            * ((a1 * a2 * l * tt * (a2 + a1 * l) / den2) * ez2
                + (a1 * a2 * l * tau / den) * e_z2_zeta2
                + (a1 * (a2 + a1 * l) * tau / den) * e_z1_zeta2
                + a1 * e_z1z2_zeta2);
    let i38 = (a1 * a2 * l / (2.0 * o11 * den)) * ez1 + (den / (2.0 * o11)) * (c * ez2 + a1 * e_z1_zeta2);

    let i44 = -1.0 / (oml * k35) - (6.0 * l * e_z1z2 - e_z1q - e_z2q + 2.0 * l2) / (oml2 * k35)
        + (4.0 * l2 * sq_sum) / (oml3 * k35)
        - (a1 * a1 * a2 * a2 * tau / (k35 * den2)) * (tau * ez2 - ez1 / den);
    let k45 = o22_32 * s11;
    let i45 = (l + e_z1z2) / (oml * k45)
        - (2.0 * l * e_z2q + l * e_z1q - 5.0 * l2 * e_z1z2 - l3) / (oml2 * k45)
        - (2.0 * l3 * sq_sum) / (oml3 * k45)
        - ((a1 * a1 * a2 * a2 * tau * l) / (2.0 * k45 * den3) - (a1 * a2 * tau) / (2.0 * k45 * den)) * ez1
        + ((a1 * a2 * tau) / (2.0 * k45 * den)) * (c * ez2 + a2 * e_z2_zeta2);
    let i46 = -(a2 * tau) / (s1122 * den) * (1.0 - (a1 * (a2 * l + a1)) / den2) * ez1
        - (a1 * a2 * tau) / (s1122 * den) * ((d1 * tau / den) * ez2 + e_z1_zeta2);
    let i47 = -(a1 * tau) / (s1122 * den) * (1.0 - (a2 * (a1 * l + a2)) / den2) * ez1
        - (a1 * a2 * tau / (s1122 * den)) * ((d2 * tau / den) * ez2 + e_z2_zeta2);
    let i48 = -(a1 * a2 / s1122) * (ez1 / den + tau * ez2);

    let q22 = o22 * o22;
    let i55 = -(l2 - e_z2q + 2.0 * e_z1z2 * l) / (q22 * oml)
        - (4.0 * l3 * e_z1z2 - 2.0 * l2 * e_z2q - l2 * e_z1q) / (q22 * oml2)
        + (l4 * sq_sum) / (q22 * oml3)
        - 1.0 / (2.0 * q22)
        - l4 / (2.0 * q22 * oml2)
        - (1.0 / (4.0 * q22))
            * ((3.0 * a1 * a2 * tau * l / den) * ez1 - (a1 * a1 * a2 * a2 * tau * l2 / den3) * ez1
                + 3.0 * a2 * e_z2_zeta1)
        - (1.0 / (4.0 * q22))
            * ((a1 * a1 * a2 * a2 * tt * l2 / den2) * ez2
                + a2 * a2 * ez2q_zeta2
                + (2.0 * a1 * a2 * a2 * tau * l / den) * e_z2_zeta2);
    let i56 = -(1.0 / (2.0 * o22)) * ((a1 * a2 * l * (a2 * l + a1) * tau) / den3 - (a2 * l * tau) / den) * ez1
        + (1.0 / (2.0 * o22))
            * ((a1 * a2 * l * tt * (a1 + a2 * l) / den2) * ez2
                + (a1 * a2 * l * tau / den) * e_z1_zeta2
                + (a2 * (a1 + a2 * l) * tau / den) * e_z2_zeta2
                + a2 * e_z1z2_zeta2);
    let i57 = -(1.0 / (2.0 * o22))
        * ((a1 * a2 * l * (a1 * l + a2) * tau / den3) * ez1 - (a1 * l * tau / den) * ez1 - e_z2_zeta1)
        + (1.0 / (2.0 * o22))
            * ((a1 * a2 * l * tt * (a1 * l + a2) / den2) * ez2
                + (a1 * a2 * l * tau / den) * e_z2_zeta2
                + (a2 * (a1 * l + a2) * tau / den) * e_z2_zeta2
                + a2 * ez2q_zeta2);
    let i58 = (a1 * a2 * l / (2.0 * o22 * den)) * ez1 + (den / (2.0 * o22)) * (c * ez2 + a2 * e_z2_zeta2);

    let i66 = -(tau / den - ((a2 * l + a1).powi(2) * tau / den3)) * ez1
        - (d1 * d1 * tt / den2) * ez2
        - ez1q_zeta2
        - (2.0 * d1 * tau / den) * e_z1_zeta2;
    let i67 = -((l * tau) / den - (d2 * d1 * tau) / den3) * ez1
        - (d1 * d2 * tt / den2) * ez2
        - (d1 * tau / den) * e_z2_zeta2
        - (d2 * tau / den) * e_z1_zeta2
        - e_z1z2_zeta2;
    let i68 = -(d1 / den) * ez1 - ((d1 * tau / den) * ez2 + e_z1_zeta2) * den;

    let i77 = -(tau / den - ((a1 * l + a2).powi(2) * tau / den3)) * ez1
        - (d2 * d2 * tt / den2) * ez2
        - ez2q_zeta2
        - (2.0 * d2 * tau / den) * e_z2_zeta2;
    let i78 = -(d2 / den) * ez1 - ((d2 * tau / den) * ez2 + e_z2_zeta2) * den;

    let i88 = -(1.0 + ast2) * ez2 + zeta2(tau);

    let z = 0.0;
    InfoMatrix::from_upper(
        InfoKind::Expected,
        [
            [i11, i12, i13, i14, i15, i16, i17, i18],
            [z, i22, i23, i24, i25, i26, i27, i28],
            [z, z, i33, i34, i35, i36, i37, i38],
            [z, z, z, i44, i45, i46, i47, i48],
            [z, z, z, z, i55, i56, i57, i58],
            [z, z, z, z, z, i66, i67, i68],
            [z, z, z, z, z, z, i77, i78],
            [z, z, z, z, z, z, z, i88],
        ],
    )
}

/// Reciprocal condition below which an information matrix is treated as singular.
pub const SINGULAR_RCOND: f64 = 1e-13;

/// Standard errors sqrt(diag(i⁻¹)/n) for `n` observations; `None` when `info` is singular.
pub fn standard_errors(info: &InfoMatrix, n: usize) -> Option<[f64; 8]> {
    let inv = info.inverse_pd(SINGULAR_RCOND)?;
    Some(std::array::from_fn(|k| (inv[k][k] / n as f64).sqrt()))
}

/// Information for ψ = ψ(ν) from the information for ν: i(ν)/ψ′(ν)².
pub fn reparam_scalar_info(info_value: f64, dpsi_dnu: f64) -> Result<f64> {
    if !info_value.is_finite() {
        return Err(Esn2Error::NonFiniteInput(info_value));
    }
    if !dpsi_dnu.is_finite() {
        return Err(Esn2Error::NonFiniteInput(dpsi_dnu));
    }
    if dpsi_dnu == 0.0 {
        return Err(Esn2Error::ZeroDerivative);
    }
    Ok(info_value / (dpsi_dnu * dpsi_dnu))
}

const ZERO_TOL: f64 = 1e-14;

/// Pairwise conditional independence of Y₁ and Y₂: (Ω⁻¹)₁₂ = 0 and α₁α₂ = 0.
pub fn conditional_independence(dp: DpParams) -> Result<bool> {
    let dp = validate(dp)?;
    let precision_zero = dp.omega12.abs() <= ZERO_TOL * (dp.omega11 * dp.omega22).sqrt();
    let shape_scale = dp.alpha1.abs().max(dp.alpha2.abs()).max(1.0);
    let shape_zero = (dp.alpha1 * dp.alpha2).abs() <= ZERO_TOL * shape_scale * shape_scale;
    Ok(precision_zero && shape_zero)
}

/// Outcome of [`block_structure_check`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BlockCheck {
    pub is_block: bool,
    pub max_offblock: f64,
}

const BLOCK_A: [usize; 2] = [0, 2];
const BLOCK_B: [usize; 4] = [1, 4, 6, 7];
const BLOCK_TOL: f64 = 1e-6;

/// Checks that i(θ) separates into (ξ₁, Ω₁₁) and (ξ₂, Ω₂₂, α₂, τ) when Ω₁₂ = 0 and α₁ = 0.
pub fn block_structure_check(dp: DpParams, tol: CubatureControls) -> Result<BlockCheck> {
    let dp = validate(dp)?;
    if dp.omega12.abs() > ZERO_TOL * (dp.omega11 * dp.omega22).sqrt() {
        return Err(Esn2Error::Precondition(format!("block structure needs omega12 = 0, got {}", dp.omega12)));
    }
    if dp.alpha1.abs() > ZERO_TOL {
        return Err(Esn2Error::Precondition(format!("block structure needs alpha1 = 0, got {}", dp.alpha1)));
    }
    let info = expected_info(dp, tol)?.matrix;
    let max_offblock = BLOCK_A
        .iter()
        .flat_map(|&r| BLOCK_B.iter().map(move |&c| (r, c)))
        .map(|(r, c)| info.get(r, c).abs())
        .fold(0.0, f64::max);
    Ok(BlockCheck { is_block: max_offblock < BLOCK_TOL, max_offblock })
}

/// Parameters a determinant sweep may vary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepParam {
    Alpha1,
    Alpha2,
    Tau,
}

impl SweepParam {
    pub fn index(self) -> usize {
        match self {
            SweepParam::Alpha1 => 5,
            SweepParam::Alpha2 => 6,
            SweepParam::Tau => 7,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SweepParam::Alpha1 => "alpha1",
            SweepParam::Alpha2 => "alpha2",
            SweepParam::Tau => "tau",
        }
    }
}

impl std::str::FromStr for SweepParam {
    type Err = Esn2Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "alpha1" => Ok(SweepParam::Alpha1),
            "alpha2" => Ok(SweepParam::Alpha2),
            "tau" => Ok(SweepParam::Tau),
            other => Err(Esn2Error::InvalidSweep(format!(
                "cannot sweep '{other}'; only alpha1, alpha2 and tau are sweepable"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepSpec {
    pub sweep_param: SweepParam,
    pub grid: Vec<f64>,
    pub base: DpParams,
}

impl SweepSpec {
    /// Validated spec with `points` equally spaced values from `from` to `to`.
    pub fn linspace(sweep_param: SweepParam, from: f64, to: f64, points: usize, base: DpParams) -> Result<Self> {
        let grid = match points {
            0 => Vec::new(),
            1 => vec![from],
            n => (0..n).map(|k| from + (to - from) * k as f64 / (n - 1) as f64).collect(),
        };
        SweepSpec { sweep_param, grid, base }.validated()
    }

    pub fn validated(self) -> Result<Self> {
        if self.grid.is_empty() {
            return Err(Esn2Error::InvalidSweep("grid is empty".into()));
        }
        if self.grid.iter().any(|v| !v.is_finite()) {
            return Err(Esn2Error::InvalidSweep("grid contains a non-finite value".into()));
        }
        let increasing = self.grid.windows(2).all(|w| w[0] < w[1]);
        let decreasing = self.grid.windows(2).all(|w| w[0] > w[1]);
        if !(increasing || decreasing) {
            return Err(Esn2Error::InvalidSweep("grid must be strictly monotone".into()));
        }
        for &v in &self.grid {
            validate(self.point(v))?;
        }
        Ok(self)
    }

    pub fn point(&self, value: f64) -> DpParams {
        self.base.with_component(self.sweep_param.index(), value)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRow {
    pub param_value: f64,
    pub det: f64,
    pub min_eigenvalue: f64,
    pub converged: bool,
}

/// Determinant and smallest eigenvalue of i(θ) along the grid, in grid order.
/// A failed point yields a row with `converged = false` and NaN values.
pub fn det_scan(spec: &SweepSpec, tol: CubatureControls) -> Result<Vec<SweepRow>> {
    let spec = spec.clone().validated()?;
    tol.validate()?;
    Ok(spec
        .grid
        .par_iter()
        .map(|&v| match expected_info(spec.point(v), tol) {
            Ok(info) => {
                let summary = info.matrix.spectral_summary();
                SweepRow {
                    param_value: v,
                    det: summary.det,
                    min_eigenvalue: summary.min_eigenvalue,
                    converged: info.converged && summary.det.is_finite(),
                }
            }
            Err(_) => SweepRow { param_value: v, det: f64::NAN, min_eigenvalue: f64::NAN, converged: false },
        })
        .collect())
}
