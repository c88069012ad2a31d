//! Parameter containers, densities, CGF and the first two moments of the ESN₂ family.

use serde::{Deserialize, Serialize};

use crate::error::{Esn2Error, Result};
use crate::special::{self, zeta0, zeta1, zeta2};

/// Relative determinant floor: `det Ω ≤ DET_EPS·Ω₁₁Ω₂₂` is treated as singular.
pub const DET_EPS: f64 = 1e-12;

/// Direct parameters θ = (ξ₁, ξ₂, Ω₁₁, Ω₁₂, Ω₂₂, α₁, α₂, τ).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DpParams {
    pub xi1: f64,
    pub xi2: f64,
    pub omega11: f64,
    pub omega12: f64,
    pub omega22: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    pub tau: f64,
}

impl DpParams {
    pub const NAMES: [&'static str; 8] = ["xi1", "xi2", "Omega11", "Omega12", "Omega22", "alpha1", "alpha2", "tau"];

    /// Builds and validates.
    pub fn from_array(theta: [f64; 8]) -> Result<Self> {
        Self::from_array_unchecked(theta).validated()
    }

    pub fn from_array_unchecked(theta: [f64; 8]) -> Self {
        let [xi1, xi2, omega11, omega12, omega22, alpha1, alpha2, tau] = theta;
        DpParams { xi1, xi2, omega11, omega12, omega22, alpha1, alpha2, tau }
    }

    pub fn to_array(&self) -> [f64; 8] {
        [self.xi1, self.xi2, self.omega11, self.omega12, self.omega22, self.alpha1, self.alpha2, self.tau]
    }

    /// Returns a copy with component `index` (θ ordering) replaced.
    pub fn with_component(&self, index: usize, value: f64) -> Self {
        let mut theta = self.to_array();
        theta[index] = value;
        Self::from_array_unchecked(theta)
    }

    pub fn validated(self) -> Result<Self> {
        validate(self)
    }

    pub fn lambda(&self) -> f64 {
        self.omega12 / (self.omega11 * self.omega22).sqrt()
    }

    /// α*² = α₁² + α₂² + 2α₁α₂λ.
    pub fn alpha_star_sq(&self) -> f64 {
        let l = self.lambda();
        self.alpha1 * self.alpha1 + self.alpha2 * self.alpha2 + 2.0 * self.alpha1 * self.alpha2 * l
    }

    pub fn alpha0(&self) -> f64 {
        self.tau * (1.0 + self.alpha_star_sq()).sqrt()
    }

    pub fn delta(&self) -> DeltaVector {
        DeltaVector::new(self.lambda(), self.alpha1, self.alpha2)
    }
}

/// Checks finiteness and positive definiteness of Ω.
pub fn validate(dp: DpParams) -> Result<DpParams> {
    for (name, v) in DpParams::NAMES.iter().zip(dp.to_array()) {
        if !v.is_finite() {
            return Err(Esn2Error::NonFiniteParameter { name });
        }
    }
    let det = dp.omega11 * dp.omega22 - dp.omega12 * dp.omega12;
    if dp.omega11 <= 0.0 || dp.omega22 <= 0.0 || det <= DET_EPS * dp.omega11 * dp.omega22 {
        return Err(Esn2Error::NonPositiveDefiniteScale {
            omega11: dp.omega11,
            omega12: dp.omega12,
            omega22: dp.omega22,
        });
    }
    Ok(dp)
}

/// δ = Ω̄α / √(1 + α*²).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeltaVector {
    pub delta1: f64,
    pub delta2: f64,
}

impl DeltaVector {
    pub fn new(lambda: f64, alpha1: f64, alpha2: f64) -> Self {
        let den = (1.0 + alpha1 * alpha1 + alpha2 * alpha2 + 2.0 * alpha1 * alpha2 * lambda).sqrt();
        DeltaVector { delta1: (alpha1 + lambda * alpha2) / den, delta2: (alpha2 + lambda * alpha1) / den }
    }

    pub fn as_array(&self) -> [f64; 2] {
        [self.delta1, self.delta2]
    }
}

/// Per-observation standardized quantities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StandardizedState {
    pub z1: f64,
    pub z2: f64,
    pub lambda: f64,
    pub alpha_star_sq: f64,
    pub alpha0: f64,
    pub t: f64,
}

pub fn standardize(dp: DpParams, y1: f64, y2: f64) -> Result<StandardizedState> {
    let dp = validate(dp)?;
    let z1 = (y1 - dp.xi1) / dp.omega11.sqrt();
    let z2 = (y2 - dp.xi2) / dp.omega22.sqrt();
    let alpha0 = dp.alpha0();
    Ok(StandardizedState {
        z1,
        z2,
        lambda: dp.lambda(),
        alpha_star_sq: dp.alpha_star_sq(),
        alpha0,
        t: alpha0 + dp.alpha1 * z1 + dp.alpha2 * z2,
    })
}

/// Paired observations stored column-wise.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    y1: Vec<f64>,
    y2: Vec<f64>,
}

impl Dataset {
    pub fn new(y1: Vec<f64>, y2: Vec<f64>) -> Result<Self> {
        if y1.len() != y2.len() {
            return Err(Esn2Error::RaggedDataset(y1.len(), y2.len()));
        }
        if y1.is_empty() {
            return Err(Esn2Error::EmptyDataset);
        }
        if let Some(index) = y1.iter().zip(&y2).position(|(a, b)| !a.is_finite() || !b.is_finite()) {
            return Err(Esn2Error::NonFiniteData { index });
        }
        Ok(Dataset { y1, y2 })
    }

    pub fn single(y1: f64, y2: f64) -> Result<Self> {
        Self::new(vec![y1], vec![y2])
    }

    pub fn len(&self) -> usize {
        self.y1.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y1.is_empty()
    }

    pub fn y1(&self) -> &[f64] {
        &self.y1
    }

    pub fn y2(&self) -> &[f64] {
        &self.y2
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.y1.iter().copied().zip(self.y2.iter().copied())
    }

    /// Concatenation of two datasets.
    pub fn concat(&self, other: &Dataset) -> Dataset {
        let mut y1 = self.y1.clone();
        let mut y2 = self.y2.clone();
        y1.extend_from_slice(&other.y1);
        y2.extend_from_slice(&other.y2);
        Dataset { y1, y2 }
    }
}

/// Univariate ESN density with `omega_sq = ω²`.
pub fn density_esn1(y: f64, xi: f64, omega_sq: f64, alpha: f64, tau: f64) -> Result<f64> {
    if !(omega_sq > 0.0) || !omega_sq.is_finite() {
        return Err(Esn2Error::InvalidScale(omega_sq));
    }
    for v in [y, xi, alpha, tau] {
        if !v.is_finite() {
            return Err(Esn2Error::NonFiniteInput(v));
        }
    }
    let omega = omega_sq.sqrt();
    let z = (y - xi) / omega;
    let alpha0 = tau * (1.0 + alpha * alpha).sqrt();
    Ok((special::log_pdf(z) + zeta0(alpha0 + alpha * z) - zeta0(tau)).exp() / omega)
}

/// Log of the bivariate ESN density, written with the inverse of Ω.
pub fn log_density_esn2(y1: f64, y2: f64, dp: DpParams) -> Result<f64> {
    let dp = validate(dp)?;
    let det = dp.omega11 * dp.omega22 - dp.omega12 * dp.omega12;
    let d1 = y1 - dp.xi1;
    let d2 = y2 - dp.xi2;
    let quad = (dp.omega22 * d1 * d1 - 2.0 * dp.omega12 * d1 * d2 + dp.omega11 * d2 * d2) / det;
    let log_phi2 = -special::LN_2PI - 0.5 * det.ln() - 0.5 * quad;
    let t = dp.alpha0() + dp.alpha1 * d1 / dp.omega11.sqrt() + dp.alpha2 * d2 / dp.omega22.sqrt();
    Ok(log_phi2 + zeta0(t) - zeta0(dp.tau))
}

pub fn density_esn2(y1: f64, y2: f64, dp: DpParams) -> Result<f64> {
    log_density_esn2(y1, y2, dp).map(f64::exp)
}

/// Bivariate normal density `φ₂(y − ξ; Ω)`.
pub fn density_normal2(y1: f64, y2: f64, xi: [f64; 2], omega: [[f64; 2]; 2]) -> f64 {
    let det = omega[0][0] * omega[1][1] - omega[0][1] * omega[1][0];
    let d1 = y1 - xi[0];
    let d2 = y2 - xi[1];
    let quad = (omega[1][1] * d1 * d1 - 2.0 * omega[0][1] * d1 * d2 + omega[0][0] * d2 * d2) / det;
    (-special::LN_2PI - 0.5 * det.ln() - 0.5 * quad).exp()
}

/// Mean vector and covariance matrix of Y.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Moments {
    pub mean: [f64; 2],
    pub cov: [[f64; 2]; 2],
}

/// `E[Y] = ξ + ζ₁(τ)ωδ`, `Var[Y] = Ω + ζ₂(τ)ωδδᵀω`.
pub fn moments_esn2(dp: DpParams) -> Result<Moments> {
    let dp = validate(dp)?;
    let d = dp.delta();
    let wd = [dp.omega11.sqrt() * d.delta1, dp.omega22.sqrt() * d.delta2];
    let z1 = zeta1(dp.tau);
    let z2 = zeta2(dp.tau);
    Ok(Moments {
        mean: [dp.xi1 + z1 * wd[0], dp.xi2 + z1 * wd[1]],
        cov: [
            [dp.omega11 + z2 * wd[0] * wd[0], dp.omega12 + z2 * wd[0] * wd[1]],
            [dp.omega12 + z2 * wd[0] * wd[1], dp.omega22 + z2 * wd[1] * wd[1]],
        ],
    })
}

/// `K_Y(t) = ξᵀt + ½tᵀΩt + ζ₀(τ + δᵀωt) − ζ₀(τ)`.
pub fn cgf_esn2(t1: f64, t2: f64, dp: DpParams) -> Result<f64> {
    let dp = validate(dp)?;
    for v in [t1, t2] {
        if !v.is_finite() {
            return Err(Esn2Error::NonFiniteInput(v));
        }
    }
    let d = dp.delta();
    let quad = dp.omega11 * t1 * t1 + 2.0 * dp.omega12 * t1 * t2 + dp.omega22 * t2 * t2;
    let shift = d.delta1 * dp.omega11.sqrt() * t1 + d.delta2 * dp.omega22.sqrt() * t2;
    Ok(dp.xi1 * t1 + dp.xi2 * t2 + 0.5 * quad + zeta0(dp.tau + shift) - zeta0(dp.tau))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn dp(theta: [f64; 8]) -> DpParams {
        DpParams::from_array(theta).unwrap()
    }

    #[test]
    fn validation_examples() {
        assert!(DpParams::from_array([0., 0., 1., 0., 1., 0., 0., 0.]).is_ok());
        assert!(matches!(
            DpParams::from_array([0., 0., 1., 1.5, 1., 0., 0., 0.]),
            Err(Esn2Error::NonPositiveDefiniteScale { .. })
        ));
        assert!(matches!(
            DpParams::from_array([0., 0., -1., 0., 1., 0., 0., 0.]),
            Err(Esn2Error::NonPositiveDefiniteScale { .. })
        ));
        assert!(matches!(
            DpParams::from_array([0., f64::NAN, 1., 0., 1., 0., 0., 0.]),
            Err(Esn2Error::NonFiniteParameter { name: "xi2" })
        ));
        // |λ| within 1e-12 of one is rejected
        let near = 1.0 - 1e-13;
        assert!(DpParams::from_array([0., 0., 1., near, 1., 0., 0., 0.]).is_err());
    }

    #[test]
    fn univariate_density() {
        let phi0 = 0.398_942_280_4;
        assert_relative_eq!(density_esn1(0., 0., 1., 0., 0.).unwrap(), phi0, max_relative = 1e-10);
        assert_relative_eq!(density_esn1(0., 0., 1., 5., 0.).unwrap(), phi0, max_relative = 1e-10);
        assert!(density_esn1(0., 0., 0., 1., 0.).is_err());
        // τ = 0 is the skew-normal 2φ(z)Φ(αz)/ω
        let (y, om2, a): (f64, f64, f64) = (0.7, 2.5, -1.3);
        let w = om2.sqrt();
        let sn = 2.0 * special::pdf(y / w) * special::cdf(a * y / w) / w;
        assert_relative_eq!(density_esn1(y, 0., om2, a, 0.).unwrap(), sn, max_relative = 1e-13);
    }

    #[test]
    fn univariate_density_integrates_to_one() {
        // composite Simpson on [-10, 10]
        let n = 20_000;
        let h = 20.0 / n as f64;
        let f = |y: f64| density_esn1(y, 0., 1., 2., 1.).unwrap();
        let mut s = f(-10.0) + f(10.0);
        for i in 1..n {
            let y = -10.0 + i as f64 * h;
            s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(y);
        }
        assert!((s * h / 3.0 - 1.0).abs() < 1e-8);
    }

    #[test]
    fn bivariate_density_examples() {
        let inv2pi = 1.0 / (2.0 * std::f64::consts::PI);
        let v = density_esn2(0., 0., dp([0., 0., 1., 0., 1., 0., 0., 0.])).unwrap();
        assert_relative_eq!(v, inv2pi, max_relative = 1e-14);
        let v = density_esn2(0., 0., dp([0., 0., 1., 0., 1., 2.5, -4., 0.])).unwrap();
        assert_relative_eq!(v, inv2pi, max_relative = 1e-14);
    }

    #[test]
    fn reduction_chain_on_grid() {
        let sn_dp = dp([0.3, -0.2, 1.4, 0.5, 0.8, 1.7, -0.6, 0.0]);
        let n_dp = dp([0.3, -0.2, 1.4, 0.5, 0.8, 0.0, 0.0, 0.0]);
        let omega = [[1.4, 0.5], [0.5, 0.8]];
        for i in 0..21 {
            for j in 0..21 {
                let y1 = -4.0 + 0.4 * i as f64;
                let y2 = -4.0 + 0.4 * j as f64;
                let phi2 = density_normal2(y1, y2, [0.3, -0.2], omega);
                let z1 = (y1 - 0.3) / 1.4f64.sqrt();
                let z2 = (y2 + 0.2) / 0.8f64.sqrt();
                let sn = 2.0 * phi2 * special::cdf(1.7 * z1 - 0.6 * z2);
                let esn = density_esn2(y1, y2, sn_dp).unwrap();
                assert!((esn - sn).abs() <= 1e-12 * sn.max(1e-300) + 1e-300, "{y1} {y2}");
                let normal = density_esn2(y1, y2, n_dp).unwrap();
                assert!((normal - phi2).abs() <= 1e-12 * phi2);
            }
        }
    }

    #[test]
    fn standardize_examples() {
        let s = standardize(dp([0., 0., 1., 0., 1., 0., 0., 0.]), 1., 2.).unwrap();
        assert_eq!((s.z1, s.z2, s.lambda, s.alpha_star_sq, s.alpha0, s.t), (1., 2., 0., 0., 0., 0.));
        let s = standardize(dp([0., 0., 4., 0., 1., 0., 0., 0.]), 2., 0.).unwrap();
        assert_eq!(s.z1, 1.0);
        let s = standardize(dp([0., 0., 1., 0.6, 1., 2., 3., 1.]), 0., 0.).unwrap();
        assert_relative_eq!(s.lambda, 0.6, max_relative = 1e-15);
        assert_relative_eq!(s.alpha_star_sq, 20.2, max_relative = 1e-15);
        assert_relative_eq!(s.alpha0, 4.604_345_773_288_535_288_4, max_relative = 1e-15);
        assert_eq!(s.t, s.alpha0);
    }

    #[test]
    fn moments_examples() {
        let m = moments_esn2(dp([1., 2., 1.5, 0.3, 0.7, 0., 0., -1.3])).unwrap();
        assert_eq!(m.mean, [1., 2.]);
        assert_eq!(m.cov, [[1.5, 0.3], [0.3, 0.7]]);
        let m = moments_esn2(dp([0., 0., 1., 0., 1., 1., 0., 0.])).unwrap();
        assert_relative_eq!(m.mean[0], 0.564_189_583_5, max_relative = 1e-10);
        assert_relative_eq!(m.cov[0][0], 1.0 - std::f64::consts::FRAC_1_PI, max_relative = 1e-14);
        assert!((m.cov[0][0] - 0.681_690_113_9).abs() < 1e-10);
    }

    #[test]
    fn cgf_matches_moments() {
        let p = dp([0., 0., 1., 0.6, 1., 2., 3., 1.]);
        assert_eq!(cgf_esn2(0., 0., p).unwrap(), 0.0);
        let m = moments_esn2(p).unwrap();
        let h = 1e-5;
        let k = |a: f64, b: f64| cgf_esn2(a, b, p).unwrap();
        let g1 = (k(h, 0.) - k(-h, 0.)) / (2. * h);
        let g2 = (k(0., h) - k(0., -h)) / (2. * h);
        assert!((g1 - m.mean[0]).abs() < 1e-6 && (g2 - m.mean[1]).abs() < 1e-6);
        let h = 1e-3;
        let h11 = (k(h, 0.) - 2.0 * k(0., 0.) + k(-h, 0.)) / (h * h);
        let h12 = (k(h, h) - k(h, -h) - k(-h, h) + k(-h, -h)) / (4. * h * h);
        let h22 = (k(0., h) - 2.0 * k(0., 0.) + k(0., -h)) / (h * h);
        assert!((h11 - m.cov[0][0]).abs() < 1e-5);
        assert!((h12 - m.cov[0][1]).abs() < 1e-5);
        assert!((h22 - m.cov[1][1]).abs() < 1e-5);
        let n = dp([0.5, -1., 2., 0.3, 1., 0., 0., 0.7]);
        let (a, b) = (0.4, -0.9);
        let exact = 0.5 * a - b + 0.5 * (2.0 * a * a + 2.0 * 0.3 * a * b + b * b);
        assert_relative_eq!(cgf_esn2(a, b, n).unwrap(), exact, max_relative = 1e-15);
    }

    #[test]
    fn dataset_rules() {
        assert_eq!(Dataset::new(vec![], vec![]), Err(Esn2Error::EmptyDataset));
        assert_eq!(Dataset::new(vec![1.], vec![]), Err(Esn2Error::RaggedDataset(1, 0)));
        assert_eq!(Dataset::new(vec![1., f64::INFINITY], vec![0., 0.]), Err(Esn2Error::NonFiniteData { index: 1 }));
        let d = Dataset::new(vec![1., 2.], vec![3., 4.]).unwrap();
        assert_eq!(d.concat(&d).len(), 4);
    }
}
