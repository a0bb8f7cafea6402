//! Smallest eigenpairs by block inverse iteration.
//!
//! Each outer step solves `(M + σI) Y = X` column by column with Jacobi-
//! preconditioned CG, re-orthonormalizes against the locked vectors and
//! within the block, and rotates the block by Rayleigh-Ritz. Leading Ritz
//! pairs whose residual passes the tolerance are locked.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{bail, Result};
use crate::grid::GridFunction;
use crate::linalg::{axpy, dot, norm};
use crate::operator::DiscreteOperator;
use crate::sparse::Csr;

pub const MAX_PAIRS: usize = 64;

/// Relative gap below which `λ_k` is reported as part of a cluster.
pub const CLUSTER_GAP: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EigenOptions {
    /// Residual tolerance: a pair is accepted once
    /// `‖Mψ - λψ‖ ≤ tol·max(1, |λ|)·‖ψ‖`.
    pub tol: f64,
    pub max_outer: usize,
    /// CG iteration cap per solve; `None` means `max(10√n, 4n + 200)`.
    pub cg_cap: Option<usize>,
    pub seed: u64,
    /// Block width; `None` means `k + max(3, k/2)`.
    pub block: Option<usize>,
}

impl Default for EigenOptions {
    fn default() -> Self {
        EigenOptions {
            tol: 1e-10,
            max_outer: 500,
            cg_cap: None,
            seed: crate::DEFAULT_SEED,
            block: None,
        }
    }
}

impl EigenOptions {
    pub fn with_tol(tol: f64) -> Self {
        EigenOptions {
            tol,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone)]
pub struct Spectrum {
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    /// Grid-L² normalized, positive mean.
    pub eigenfunctions: Vec<GridFunction>,
    /// `‖Mψ - λψ‖/‖ψ‖` per pair.
    pub residuals: Vec<f64>,
    /// `λ_k` is not separated from `λ_{k+1}` (relative gap < 1e-10).
    pub cluster: bool,
    pub outer_iterations: usize,
    pub cg_iterations: usize,
    pub shift: f64,
    pub seed: u64,
}

impl Spectrum {
    pub fn lambda1(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn gap(&self) -> Option<f64> {
        (self.eigenvalues.len() >= 2).then(|| self.eigenvalues[1] - self.eigenvalues[0])
    }

    pub fn ground_state(&self) -> &GridFunction {
        &self.eigenfunctions[0]
    }
}

/// Raw eigenpairs of a sparse symmetric matrix, vectors with unit 2-norm.
#[derive(Debug, Clone)]
pub struct RawPairs {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
    pub residuals: Vec<f64>,
    pub cluster: bool,
    pub outer_iterations: usize,
    pub cg_iterations: usize,
    pub shift: f64,
}

pub fn smallest_eigenpairs(
    op: &DiscreteOperator,
    k: usize,
    opts: &EigenOptions,
) -> Result<Spectrum> {
    let raw = sparse_smallest(&op.matrix, op.shift, k, opts)?;
    let h = op.lattice.grid.cell_volume().sqrt();
    let eigenfunctions = raw
        .vectors
        .into_iter()
        .map(|mut v| {
            let sign = if v.iter().sum::<f64>() < 0.0 {
                -1.0
            } else {
                1.0
            };
            for x in &mut v {
                *x *= sign / h;
            }
            GridFunction {
                lattice: op.lattice.clone(),
                values: v,
            }
        })
        .collect();
    Ok(Spectrum {
        eigenvalues: raw.values,
        eigenfunctions,
        residuals: raw.residuals,
        cluster: raw.cluster,
        outer_iterations: raw.outer_iterations,
        cg_iterations: raw.cg_iterations,
        shift: raw.shift,
        seed: opts.seed,
    })
}

/// `k` smallest eigenpairs of the symmetric matrix `m`; `lower_shift ≥ 0`
/// must make `m + lower_shift·I` positive semidefinite.
pub fn sparse_smallest(
    m: &Csr,
    lower_shift: f64,
    k: usize,
    opts: &EigenOptions,
) -> Result<RawPairs> {
    let n = m.n;
    if k == 0 || k > MAX_PAIRS {
        bail!(Eigen, "k must be in 1..={MAX_PAIRS}, got {k}");
    }
    if k > n {
        bail!(Eigen, "k = {k} exceeds the {n} interior nodes");
    }
    if !(1e-12..=1e-4).contains(&opts.tol) {
        bail!(Eigen, "tol must be in [1e-12, 1e-4], got {:e}", opts.tol);
    }
    let p = opts.block.unwrap_or(k + 3.max(k / 2)).clamp(k, n);
    let diag = m.diagonal();
    let dmax = diag.iter().fold(0.0f64, |a, d| a.max(d.abs()));
    let sigma = lower_shift + 1e-6 * dmax.max(1.0);
    let dinv: Vec<f64> = diag.iter().map(|d| 1.0 / (d + sigma)).collect();
    let cap = opts
        .cg_cap
        .unwrap_or_else(|| ((10.0 * (n as f64).sqrt()) as usize).max(4 * n + 200));

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut block: Vec<Vec<f64>> = (0..p)
        .map(|_| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    let mut locked: Vec<Vec<f64>> = Vec::new();
    let mut locked_vals: Vec<f64> = Vec::new();
    let mut locked_res: Vec<f64> = Vec::new();

    orthonormalize(&locked, &mut block, &mut rng);
    let (mut theta, mut res) = rayleigh_ritz(m, &mut block);
    let mut cg_total = 0;
    let mut outer = 0;

    loop {
        // Lock leading converged pairs.
        while locked.len() < k && !block.is_empty() && res[0] <= opts.tol * theta[0].abs().max(1.0)
        {
            locked.push(block.remove(0));
            locked_vals.push(theta.remove(0));
            locked_res.push(res.remove(0));
        }
        if locked.len() >= k {
            break;
        }
        if outer >= opts.max_outer {
            bail!(
                Eigen,
                "no convergence after {outer} outer iterations ({} of {k} pairs locked, leading residual {:e})",
                locked.len(),
                res.first().copied().unwrap_or(f64::NAN)
            );
        }
        outer += 1;

        let solved: Vec<Result<(Vec<f64>, usize)>> = block
            .par_iter()
            .zip(theta.par_iter())
            .map(|(x, &th)| {
                let denom = (th + sigma).max(1e-300);
                let eta = (0.1 * opts.tol * th.abs().max(1.0) / (th.abs() + sigma)).min(1e-2);
                let mut y: Vec<f64> = x.iter().map(|v| v / denom).collect();
                let (it, rel, ok) = pcg(m, sigma, &dinv, x, &mut y, eta, cap);
                if !ok {
                    bail!(
                        Eigen,
                        "CG did not converge in {cap} iterations (relative residual {rel:e} > {eta:e}); shift {sigma:e} may be too small"
                    );
                }
                Ok((y, it))
            })
            .collect();
        let mut next = Vec::with_capacity(block.len());
        for s in solved {
            let (y, it) = s?;
            cg_total += it;
            next.push(y);
        }
        block = next;
        orthonormalize(&locked, &mut block, &mut rng);
        let (t, r) = rayleigh_ritz(m, &mut block);
        theta = t;
        res = r;
    }

    let cluster = match theta.first() {
        Some(&next) => {
            let lk = locked_vals[k - 1];
            (next - lk).abs() < CLUSTER_GAP * lk.abs().max(1.0)
        }
        None => false,
    };
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| locked_vals[a].total_cmp(&locked_vals[b]));
    Ok(RawPairs {
        values: order.iter().map(|&i| locked_vals[i]).collect(),
        vectors: order.iter().map(|&i| locked[i].clone()).collect(),
        residuals: order.iter().map(|&i| locked_res[i]).collect(),
        cluster,
        outer_iterations: outer,
        cg_iterations: cg_total,
        shift: sigma,
    })
}

/// Jacobi-preconditioned CG for `(M + σI) x = b`, warm-started from `x`.
/// Returns `(iterations, final relative residual, converged)`.
fn pcg(
    m: &Csr,
    sigma: f64,
    dinv: &[f64],
    b: &[f64],
    x: &mut [f64],
    rtol: f64,
    cap: usize,
) -> (usize, f64, bool) {
    let n = b.len();
    let apply = |v: &[f64], out: &mut [f64]| {
        m.mul_into(v, out);
        for i in 0..n {
            out[i] += sigma * v[i];
        }
    };
    let bnorm = norm(b);
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return (0, 0.0, true);
    }
    let mut q = vec![0.0; n];
    apply(x, &mut q);
    let mut r: Vec<f64> = b.iter().zip(&q).map(|(a, c)| a - c).collect();
    let mut z: Vec<f64> = r.iter().zip(dinv).map(|(a, d)| a * d).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut rel = norm(&r) / bnorm;
    for it in 0..cap {
        if rel <= rtol {
            return (it, rel, true);
        }
        apply(&p, &mut q);
        let pq = dot(&p, &q);
        if !(pq > 0.0) {
            return (it, rel, false);
        }
        let alpha = rz / pq;
        axpy(alpha, &p, x);
        axpy(-alpha, &q, &mut r);
        for i in 0..n {
            z[i] = r[i] * dinv[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
        rel = norm(&r) / bnorm;
    }
    (cap, rel, rel <= rtol)
}

/// Two passes of modified Gram-Schmidt against `fixed` and within `block`.
/// Columns that collapse are replaced by fresh random vectors.
fn orthonormalize(fixed: &[Vec<f64>], block: &mut [Vec<f64>], rng: &mut ChaCha8Rng) {
    let n = block.first().map_or(0, Vec::len);
    for j in 0..block.len() {
        let mut attempts = 0;
        loop {
            let before = norm(&block[j]);
            for _ in 0..2 {
                for f in fixed {
                    let c = dot(f, &block[j]);
                    axpy(-c, f, &mut block[j]);
                }
                for i in 0..j {
                    let (head, tail) = block.split_at_mut(j);
                    let c = dot(&head[i], &tail[0]);
                    axpy(-c, &head[i], &mut tail[0]);
                }
            }
            let after = norm(&block[j]);
            if after > 1e-10 * before && after > 0.0 {
                block[j].iter_mut().for_each(|v| *v /= after);
                break;
            }
            attempts += 1;
            assert!(
                attempts < 16,
                "cannot extend an orthonormal basis of dimension {n}"
            );
            block[j] = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        }
    }
}

/// Rotates an orthonormal block to Ritz vectors; returns ascending Ritz
/// values and residual norms.
fn rayleigh_ritz(m: &Csr, block: &mut Vec<Vec<f64>>) -> (Vec<f64>, Vec<f64>) {
    let p = block.len();
    if p == 0 {
        return (Vec::new(), Vec::new());
    }
    let mx: Vec<Vec<f64>> = block.par_iter().map(|x| m.mul(x)).collect();
    let mut h = DMatrix::zeros(p, p);
    for i in 0..p {
        for j in 0..=i {
            let v = 0.5 * (dot(&block[i], &mx[j]) + dot(&block[j], &mx[i]));
            h[(i, j)] = v;
            h[(j, i)] = v;
        }
    }
    let eig = h.symmetric_eigen();
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let n = block[0].len();
    let mut new_block = Vec::with_capacity(p);
    let mut vals = Vec::with_capacity(p);
    let mut res = Vec::with_capacity(p);
    for &c in &order {
        let mut x = vec![0.0; n];
        let mut y = vec![0.0; n];
        for i in 0..p {
            let w = eig.eigenvectors[(i, c)];
            axpy(w, &block[i], &mut x);
            axpy(w, &mx[i], &mut y);
        }
        let th = eig.eigenvalues[c];
        let nx = norm(&x);
        x.iter_mut().for_each(|v| *v /= nx);
        y.iter_mut().for_each(|v| *v /= nx);
        axpy(-th, &x, &mut y);
        res.push(norm(&y));
        vals.push(th);
        new_block.push(x);
    }
    *block = new_block;
    (vals, res)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::ConvexBody;
    use crate::grid::GridSpec;
    use crate::linalg::Matrix;
    use crate::operator::{assemble, rayleigh_quotient};
    use crate::potential::Potential;
    use std::f64::consts::PI;

    fn interval(n: usize, v: Potential) -> DiscreteOperator {
        let body = ConvexBody::interval(0.0, 1.0).unwrap();
        let h = 1.0 / (n + 1) as f64;
        let g = GridSpec::covering(&[0.0], &[1.0], &[h], 1).unwrap();
        assemble(&body, &Matrix::identity(1), &v, &g).unwrap()
    }

    fn closed_form(n: usize, k: usize) -> f64 {
        let h = 1.0 / (n + 1) as f64;
        2.0 / (h * h) * (1.0 - (k as f64 * PI * h).cos())
    }

    #[test]
    fn discrete_laplacian_closed_form() {
        for n in [3, 31] {
            let op = interval(n, Potential::Zero);
            let s = smallest_eigenpairs(&op, 3, &EigenOptions::default()).unwrap();
            for k in 0..3 {
                let want = closed_form(n, k + 1);
                assert!(
                    (s.eigenvalues[k] - want).abs() <= 1e-10 * want,
                    "n={n} k={k}"
                );
            }
            assert!(!s.cluster);
        }
        let s = smallest_eigenpairs(&interval(3, Potential::Zero), 1, &EigenOptions::default())
            .unwrap();
        assert!((s.lambda1() - 9.372583002030478).abs() < 1e-10);
    }

    #[test]
    fn eigenpair_invariants() {
        let op = interval(63, Potential::oscillator(1, 0.0));
        let opts = EigenOptions::default();
        let s = smallest_eigenpairs(&op, 4, &opts).unwrap();
        for w in s.eigenvalues.windows(2) {
            assert!(w[0] <= w[1]);
        }
        for i in 0..4 {
            assert!((s.eigenfunctions[i].norm() - 1.0).abs() < 1e-12);
            assert!(s.residuals[i] <= opts.tol * s.eigenvalues[i].abs().max(1.0));
            for j in 0..i {
                assert!(s.eigenfunctions[i].inner(&s.eigenfunctions[j]).abs() < 1e-8);
            }
        }
        let psi = s.ground_state();
        assert!(psi.min() > 0.0);
        assert!((rayleigh_quotient(&op, psi).unwrap() - s.lambda1()).abs() < 1e-9);
        assert!(s.gap().unwrap() > 0.0);
    }

    #[test]
    fn shift_covariance() {
        let a = smallest_eigenpairs(&interval(40, Potential::Zero), 3, &EigenOptions::default())
            .unwrap();
        let b = smallest_eigenpairs(
            &interval(40, Potential::constant(1, 7.5)),
            3,
            &EigenOptions::default(),
        )
        .unwrap();
        for k in 0..3 {
            assert!((b.eigenvalues[k] - a.eigenvalues[k] - 7.5).abs() < 1e-8);
            assert!(a.eigenfunctions[k].sup_distance(&b.eigenfunctions[k]) < 1e-6);
        }
    }

    #[test]
    fn square_cluster_is_flagged() {
        let body = ConvexBody::aabb(&[0.0, 0.0], &[1.0, 1.0]).unwrap();
        let g = GridSpec::covering(&[0.0, 0.0], &[1.0, 1.0], &[1.0 / 16.0; 2], 1).unwrap();
        let op = assemble(&body, &Matrix::identity(2), &Potential::Zero, &g).unwrap();
        let s = smallest_eigenpairs(&op, 2, &EigenOptions::default()).unwrap();
        assert!(s.cluster);
        assert!((s.eigenvalues[1] - s.eigenvalues[0] * 2.5).abs() / s.eigenvalues[1] < 2e-2);
    }

    #[test]
    fn domain_monotonicity() {
        let g = GridSpec::covering(&[-1.0, -1.0], &[1.0, 1.0], &[1.0 / 16.0; 2], 1).unwrap();
        let big = ConvexBody::aabb(&[-1.0, -1.0], &[1.0, 1.0]).unwrap();
        let small = ConvexBody::ball(vec![0.0, 0.0], 0.9).unwrap();
        let l = |b: &ConvexBody| {
            let op = assemble(b, &Matrix::identity(2), &Potential::Zero, &g).unwrap();
            smallest_eigenpairs(&op, 1, &EigenOptions::default())
                .unwrap()
                .lambda1()
        };
        assert!(l(&small) >= l(&big) - 1e-9);
    }

    #[test]
    fn argument_errors() {
        let op = interval(3, Potential::Zero);
        assert!(smallest_eigenpairs(&op, 4, &EigenOptions::default()).is_err());
        assert!(smallest_eigenpairs(&op, 0, &EigenOptions::default()).is_err());
        assert!(smallest_eigenpairs(&op, 1, &EigenOptions::with_tol(1e-3)).is_err());
        let tiny_cap = EigenOptions {
            cg_cap: Some(1),
            ..EigenOptions::default()
        };
        assert!(smallest_eigenpairs(&interval(100, Potential::Zero), 1, &tiny_cap).is_err());
    }
}
