use nalgebra::{SMatrix, SymmetricEigen};
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum InfoKind {
    Observed,
    Expected,
}

/// 8×8 information matrix indexed by the θ ordering.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InfoMatrix {
    pub kind: InfoKind,
    pub data: [[f64; 8]; 8],
}

/// Determinant and extreme eigenvalues.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpectralSummary {
    pub det: f64,
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
}

impl InfoMatrix {
    /// Mirrors the upper triangle so the result is exactly symmetric.
    pub fn from_upper(kind: InfoKind, upper: [[f64; 8]; 8]) -> Self {
        let mut data = upper;
        for r in 0..8 {
            for c in 0..r {
                data[r][c] = upper[c][r];
            }
        }
        InfoMatrix { kind, data }
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r][c]
    }

    pub fn rows(&self) -> &[[f64; 8]; 8] {
        &self.data
    }

    pub fn to_matrix(&self) -> SMatrix<f64, 8, 8> {
        SMatrix::from_fn(|r, c| self.data[r][c])
    }

    pub fn is_symmetric(&self) -> bool {
        (0..8).all(|r| (0..r).all(|c| self.data[r][c].to_bits() == self.data[c][r].to_bits()))
    }

    /// Determinant as the eigenvalue product of the diagonally equilibrated matrix, rescaled.
    /// Equilibration keeps the product accurate when rows differ by many orders of magnitude.
    pub fn spectral_summary(&self) -> SpectralSummary {
        spectral_summary_of(&self.data.iter().map(|r| r.to_vec()).collect::<Vec<_>>())
    }

    pub fn determinant(&self) -> f64 {
        self.spectral_summary().det
    }

    /// Principal submatrix over the given θ indices.
    pub fn principal(&self, indices: &[usize]) -> Vec<Vec<f64>> {
        indices.iter().map(|&r| indices.iter().map(|&c| self.data[r][c]).collect()).collect()
    }

    /// Inverse via eigendecomposition; `None` when not positive definite or too ill-conditioned.
    pub fn inverse_pd(&self, rcond: f64) -> Option<[[f64; 8]; 8]> {
        let m = self.to_matrix();
        let d: Vec<f64> = (0..8).map(|i| m[(i, i)]).collect();
        if d.iter().any(|v| !(*v > 0.0)) {
            return None;
        }
        let scale = SMatrix::<f64, 8, 8>::from_fn(|r, c| if r == c { 1.0 / d[r].sqrt() } else { 0.0 });
        let s = scale * m * scale;
        let eig = SymmetricEigen::new(s);
        let max = eig.eigenvalues.max();
        let min = eig.eigenvalues.min();
        if !(min > rcond * max) {
            return None;
        }
        let inv_s = eig.eigenvectors
            * SMatrix::<f64, 8, 8>::from_diagonal(&eig.eigenvalues.map(|v| 1.0 / v))
            * eig.eigenvectors.transpose();
        let inv = scale * inv_s * scale;
        let mut out = [[0.0; 8]; 8];
        for r in 0..8 {
            for c in 0..8 {
                out[r][c] = 0.5 * (inv[(r, c)] + inv[(c, r)]);
            }
        }
        Some(out)
    }
}

/// Determinant and extreme eigenvalues of a square symmetric matrix.
pub fn spectral_summary_of(rows: &[Vec<f64>]) -> SpectralSummary {
    let n = rows.len();
    let m = nalgebra::DMatrix::from_fn(n, n, |r, c| rows[r][c]);
    let raw = SymmetricEigen::new(m.clone()).eigenvalues;
    let min_eigenvalue = raw.iter().copied().fold(f64::INFINITY, f64::min);
    let max_eigenvalue = raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);

    let diag: Vec<f64> = (0..n).map(|i| m[(i, i)]).collect();
    let det = if diag.iter().all(|v| *v > 0.0) {
        let s = nalgebra::DMatrix::from_fn(n, n, |r, c| m[(r, c)] / (diag[r] * diag[c]).sqrt());
        let eig = SymmetricEigen::new(s).eigenvalues;
        // multiply in log space to avoid spurious under/overflow
        let mut log_abs = 0.0;
        let mut sign = 1.0;
        for v in eig.iter().chain(diag.iter()) {
            if *v == 0.0 {
                return SpectralSummary { det: 0.0, min_eigenvalue, max_eigenvalue };
            }
            log_abs += v.abs().ln();
            if *v < 0.0 {
                sign = -sign;
            }
        }
        sign * log_abs.exp()
    } else {
        raw.iter().product()
    };
    SpectralSummary { det, min_eigenvalue, max_eigenvalue }
}
