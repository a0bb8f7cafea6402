//! Compressed sparse row matrices.

use std::io::Write;

use rayon::prelude::*;

/// Rows below this count are multiplied serially.
const PAR_ROWS: usize = 4096;

#[derive(Debug, Clone, PartialEq)]
pub struct Csr {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub cols: Vec<usize>,
    pub vals: Vec<f64>,
}

impl Csr {
    /// Builds from per-row `(col, value)` lists; columns are sorted per row.
    pub fn from_rows(rows: Vec<Vec<(usize, f64)>>) -> Self {
        let n = rows.len();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let nnz = rows.iter().map(Vec::len).sum();
        let mut cols = Vec::with_capacity(nnz);
        let mut vals = Vec::with_capacity(nnz);
        row_ptr.push(0);
        for mut r in rows {
            r.sort_by_key(|e| e.0);
            for (c, v) in r {
                cols.push(c);
                vals.push(v);
            }
            row_ptr.push(cols.len());
        }
        Csr {
            n,
            row_ptr,
            cols,
            vals,
        }
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (a, b) = (self.row_ptr[i], self.row_ptr[i + 1]);
        self.cols[a..b]
            .iter()
            .copied()
            .zip(self.vals[a..b].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (a, b) = (self.row_ptr[i], self.row_ptr[i + 1]);
        match self.cols[a..b].binary_search(&j) {
            Ok(k) => self.vals[a + k],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    fn row_dot(&self, i: usize, x: &[f64]) -> f64 {
        let (a, b) = (self.row_ptr[i], self.row_ptr[i + 1]);
        let mut s = 0.0;
        for k in a..b {
            s += self.vals[k] * x[self.cols[k]];
        }
        s
    }

    /// `y = M x`. Rows are independent, so the result does not depend on
    /// the thread count.
    pub fn mul_into(&self, x: &[f64], y: &mut [f64]) {
        if self.n >= PAR_ROWS {
            y.par_iter_mut()
                .enumerate()
                .for_each(|(i, yi)| *yi = self.row_dot(i, x));
        } else {
            for (i, yi) in y.iter_mut().enumerate() {
                *yi = self.row_dot(i, x);
            }
        }
    }

    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.mul_into(x, &mut y);
        y
    }

    /// Exact entry-wise symmetry.
    pub fn is_symmetric(&self) -> bool {
        (0..self.n).all(|i| self.row(i).all(|(j, v)| self.get(j, i) == v))
    }

    /// `min_i (m_ii - Σ_{j≠i} |m_ij|)`.
    pub fn gershgorin_lower(&self) -> f64 {
        (0..self.n)
            .map(|i| {
                let mut d = 0.0;
                let mut off = 0.0;
                for (j, v) in self.row(i) {
                    if i == j {
                        d = v;
                    } else {
                        off += v.abs();
                    }
                }
                d - off
            })
            .fold(f64::INFINITY, f64::min)
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let mut m = nalgebra::DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                m[(i, j)] = v;
            }
        }
        m
    }

    /// Coordinate text dump: one `row col value` triple per line.
    pub fn write_coo(&self, w: &mut impl Write) -> std::io::Result<()> {
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                writeln!(w, "{i} {j} {v:e}")?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csr_basics() {
        let m = Csr::from_rows(vec![
            vec![(1, -1.0), (0, 2.0)],
            vec![(0, -1.0), (1, 2.0), (2, -1.0)],
            vec![(2, 2.0), (1, -1.0)],
        ]);
        assert_eq!(m.nnz(), 7);
        assert!(m.is_symmetric());
        assert_eq!(m.mul(&[1.0, 1.0, 1.0]), vec![1.0, 0.0, 1.0]);
        assert_eq!(m.gershgorin_lower(), 0.0);
        assert_eq!(m.diagonal(), vec![2.0, 2.0, 2.0]);
        let mut buf = Vec::new();
        m.write_coo(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 7);
    }
}
