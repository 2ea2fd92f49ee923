use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense square matrix stored row-major. Serializes as nested rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct SquareMatrix {
    d: usize,
    entries: Vec<f64>,
}

impl SquareMatrix {
    pub fn zeros(d: usize) -> Self {
        Self { d, entries: vec![0.0; d * d] }
    }

    pub fn identity(d: usize) -> Self {
        let mut m = Self::zeros(d);
        for i in 0..d {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn filled(d: usize, value: f64) -> Self {
        Self { d, entries: vec![value; d * d] }
    }

    pub fn from_fn(d: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut entries = Vec::with_capacity(d * d);
        for i in 0..d {
            for j in 0..d {
                entries.push(f(i, j));
            }
        }
        Self { d, entries }
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let d = rows.len();
        if d == 0 {
            return Err(Error::InvalidParameter("matrix must have at least one row".into()));
        }
        let mut entries = Vec::with_capacity(d * d);
        for row in rows {
            if row.len() != d {
                return Err(Error::DimensionMismatch { expected: d, got: row.len() });
            }
            entries.extend(row);
        }
        Ok(Self { d, entries })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.d + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        self.entries[i * self.d + j] = value;
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.entries.chunks(self.d).map(<[f64]>::to_vec).collect()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self { d: self.d, entries: self.entries.iter().map(|&v| f(v)).collect() }
    }

    pub fn max_abs_diff(&self, other: &SquareMatrix) -> f64 {
        self.entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn max_asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.d {
            for j in (i + 1)..self.d {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst
    }

    /// Errors unless the matrix is symmetric up to a relative `1e-12`.
    pub fn ensure_symmetric(&self) -> Result<()> {
        let scale = self.entries.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        let asym = self.max_asymmetry();
        if asym > 1e-12 * scale || self.entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonSymmetric(asym));
        }
        Ok(())
    }

    pub fn to_nalgebra(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.d, self.d, &self.entries)
    }

    pub fn from_nalgebra(m: &DMatrix<f64>) -> Self {
        Self::from_fn(m.nrows(), |i, j| m[(i, j)])
    }

    pub(crate) fn symmetric_eigen(&self) -> SymmetricEigen<f64, nalgebra::Dyn> {
        SymmetricEigen::new(self.to_nalgebra())
    }

    /// Symmetric square root `V diag(sqrt(max(λ, 0))) Vᵀ`, a factor `F`
    /// with `F Fᵀ = self` for PSD input.
    pub fn symmetric_sqrt(&self) -> Self {
        let eig = self.symmetric_eigen();
        let roots = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
        let v = &eig.eigenvectors;
        let f = v * DMatrix::from_diagonal(&roots) * v.transpose();
        Self::from_nalgebra(&f)
    }
}

impl TryFrom<Vec<Vec<f64>>> for SquareMatrix {
    type Error = Error;

    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        Self::from_rows(rows)
    }
}

impl From<SquareMatrix> for Vec<Vec<f64>> {
    fn from(m: SquareMatrix) -> Self {
        m.rows()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_is_nested_rows() {
        let m = SquareMatrix::from_rows(vec![vec![1.0, 0.5], vec![0.5, 1.0]]).unwrap();
        let s = serde_json::to_string(&m).unwrap();
        assert_eq!(s, "[[1.0,0.5],[0.5,1.0]]");
        let back: SquareMatrix = serde_json::from_str(&s).unwrap();
        assert_eq!(back, m);
        assert!(serde_json::from_str::<SquareMatrix>("[[1.0,0.5],[0.5]]").is_err());
    }

    #[test]
    fn symmetric_sqrt_squares_back() {
        let m = SquareMatrix::from_rows(vec![
            vec![1.0, 0.3, 0.2],
            vec![0.3, 1.0, 0.6],
            vec![0.2, 0.6, 1.0],
        ])
        .unwrap();
        let f = m.symmetric_sqrt().to_nalgebra();
        let back = SquareMatrix::from_nalgebra(&(&f * f.transpose()));
        assert!(back.max_abs_diff(&m) < 1e-12);
    }

    #[test]
    fn asymmetric_rejected() {
        let m = SquareMatrix::from_rows(vec![vec![1.0, 0.5], vec![0.4, 1.0]]).unwrap();
        assert!(matches!(m.ensure_symmetric(), Err(Error::NonSymmetric(_))));
    }
}
