//! Small dense matrices (N ≤ 3 coefficient matrices, desk-scale dense checks).

use nalgebra::DMatrix;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Dense real matrix serialized as a list of rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix(pub DMatrix<f64>);

impl Matrix {
    pub fn from_rows(rows: &[Vec<f64>]) -> Option<Self> {
        let n = rows.len();
        let m = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != m) {
            return None;
        }
        Some(Matrix(DMatrix::from_fn(n, m, |i, j| rows[i][j])))
    }

    pub fn identity(n: usize) -> Self {
        Matrix(DMatrix::identity(n, n))
    }

    pub fn scaled_identity(n: usize, s: f64) -> Self {
        Matrix(DMatrix::identity(n, n) * s)
    }

    pub fn diagonal(d: &[f64]) -> Self {
        let n = d.len();
        Matrix(DMatrix::from_fn(
            n,
            n,
            |i, j| if i == j { d[i] } else { 0.0 },
        ))
    }

    pub fn zeros(n: usize) -> Self {
        Matrix(DMatrix::zeros(n, n))
    }

    pub fn nrows(&self) -> usize {
        self.0.nrows()
    }

    pub fn is_square(&self) -> bool {
        self.0.nrows() == self.0.ncols()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.0.nrows())
            .map(|i| (0..self.0.ncols()).map(|j| self.0[(i, j)]).collect())
            .collect()
    }

    /// Exact entry-wise symmetry.
    pub fn is_symmetric(&self) -> bool {
        self.is_square() && self.asymmetry() == 0.0
    }

    pub fn asymmetry(&self) -> f64 {
        let n = self.0.nrows();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..i {
                worst = worst.max((self.0[(i, j)] - self.0[(j, i)]).abs());
            }
        }
        worst
    }

    /// Eigenvalues of the symmetric part, ascending.
    pub fn sym_eigenvalues(&self) -> Vec<f64> {
        let sym = (&self.0 + self.0.transpose()) * 0.5;
        let mut ev: Vec<f64> = sym.symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.sym_eigenvalues().first().copied().unwrap_or(0.0)
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.sym_eigenvalues().last().copied().unwrap_or(0.0)
    }

    pub fn is_diagonal(&self) -> bool {
        let n = self.0.nrows();
        (0..n).all(|i| (0..n).all(|j| i == j || self.0[(i, j)] == 0.0))
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let n = self.0.nrows();
        (0..n)
            .map(|i| (0..x.len()).map(|j| self.0[(i, j)] * x[j]).sum())
            .collect()
    }

    /// `x·Mx`.
    pub fn quad_form(&self, x: &[f64]) -> f64 {
        dot(x, &self.mul_vec(x))
    }

    pub fn inverse(&self) -> Option<Matrix> {
        self.0.clone().try_inverse().map(Matrix)
    }

    /// Lower Cholesky factor `L` with `L Lᵀ = M`.
    pub fn cholesky(&self) -> Option<Matrix> {
        self.0.clone().cholesky().map(|c| Matrix(c.l()))
    }

    pub fn determinant(&self) -> f64 {
        self.0.determinant()
    }

    pub fn trace(&self) -> f64 {
        self.0.trace()
    }
}

impl Serialize for Matrix {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.rows().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Matrix {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        Matrix::from_rows(&rows).ok_or_else(|| serde::de::Error::custom("ragged matrix rows"))
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn lerp(a: &[f64], b: &[f64], r: f64) -> Vec<f64> {
    a.iter()
        .zip(b)
        .map(|(x, y)| (1.0 - r) * x + r * y)
        .collect()
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(-x / std::f64::consts::SQRT_2)
}
