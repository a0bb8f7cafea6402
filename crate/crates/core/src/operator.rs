//! Finite-difference realization of `-div(A∇) + V` with Dirichlet masking.

use std::sync::Arc;

use crate::error::{bail, Result};
use crate::geometry::ConvexBody;
use crate::grid::{GridFunction, GridSpec, Lattice};
use crate::linalg::Matrix;
use crate::potential::Potential;
use crate::sparse::Csr;

/// Default inverse-square plateau `CAP_FACTOR / h²`.
pub const CAP_FACTOR: f64 = 4.0;

#[derive(Debug, Clone)]
pub struct DiscreteOperator {
    pub body: ConvexBody,
    pub a: Matrix,
    /// Resolved potential with its cap fixed.
    pub potential: Potential,
    pub lattice: Arc<Lattice>,
    pub matrix: Csr,
    /// `V` at the interior nodes.
    pub potential_values: Vec<f64>,
    /// `s ≥ 0` with `M + sI` positive definite by Gershgorin.
    pub shift: f64,
}

pub fn assemble(
    body: &ConvexBody,
    a: &Matrix,
    v: &Potential,
    grid: &GridSpec,
) -> Result<DiscreteOperator> {
    let n = body.dim();
    check_diffusion(a, n)?;
    if let Some(d) = v.dim() {
        if d != n {
            bail!(Operator, "potential has dimension {d}, body has {n}");
        }
    }
    grid.check_clearance(body)?;
    let h = &grid.spacing;
    let potential = v
        .resolve()?
        .with_default_cap(CAP_FACTOR / (grid.min_spacing() * grid.min_spacing()));
    let lattice = Arc::new(Lattice::new(grid.clone(), body)?);
    let ext = lattice.extent();
    if let Some(i) = ext.iter().position(|&e| e < 3) {
        bail!(
            Operator,
            "grid too coarse: {} interior nodes along axis {i}, need ≥ 3",
            ext[i]
        );
    }

    let mut diag_kin = 0.0;
    for i in 0..n {
        diag_kin += 2.0 * a.get(i, i) / (h[i] * h[i]);
    }
    let mut axis_off = Vec::new();
    for i in 0..n {
        let mut e = [0isize; 3];
        e[i] = 1;
        let c = -a.get(i, i) / (h[i] * h[i]);
        axis_off.push((e, c));
        e[i] = -1;
        axis_off.push((e, c));
    }
    for i in 0..n {
        for j in i + 1..n {
            let w = a.get(i, j) / (2.0 * h[i] * h[j]);
            if w == 0.0 {
                continue;
            }
            for (si, sj) in [(1isize, 1isize), (-1, -1), (1, -1), (-1, 1)] {
                let mut e = [0isize; 3];
                e[i] = si;
                e[j] = sj;
                axis_off.push((e, if si == sj { -w } else { w }));
            }
        }
    }

    let m = lattice.len();
    let mut potential_values = Vec::with_capacity(m);
    let mut rows = Vec::with_capacity(m);
    for p in 0..m {
        let x = lattice.coord(p);
        let vx = potential.evaluate(&x);
        if !vx.is_finite() {
            bail!(Operator, "potential is not finite at node {x:?}");
        }
        potential_values.push(vx);
        let mut row = Vec::with_capacity(axis_off.len() + 1);
        row.push((p, diag_kin + vx));
        for (e, c) in &axis_off {
            if let Some(q) = lattice.neighbour(p, &e[..n]) {
                row.push((q, *c));
            }
        }
        rows.push(row);
    }
    let matrix = Csr::from_rows(rows);
    let shift = (-matrix.gershgorin_lower()).max(0.0);
    Ok(DiscreteOperator {
        body: body.clone(),
        a: a.clone(),
        potential,
        lattice,
        matrix,
        potential_values,
        shift,
    })
}

/// `A` must be symmetric positive definite. Cross coefficients larger than
/// the diagonal break monotonicity of the stencil and are only warned about.
pub fn check_diffusion(a: &Matrix, n: usize) -> Result<()> {
    if !a.is_square() || a.nrows() != n {
        bail!(Operator, "diffusion matrix must be {n}×{n}");
    }
    if !a.is_symmetric() {
        bail!(Operator, "diffusion matrix is not symmetric");
    }
    let a1 = a.min_eigenvalue();
    if !(a1 > 0.0) {
        bail!(
            Operator,
            "diffusion matrix is not positive definite (smallest eigenvalue {a1:e})"
        );
    }
    for i in 0..n {
        for j in i + 1..n {
            if a.get(i, j).abs() > a.get(i, i).min(a.get(j, j)) {
                log::warn!(
                    "|a_{i}{j}| exceeds min(a_ii, a_jj); the cross stencil loses monotonicity"
                );
            }
        }
    }
    Ok(())
}

impl DiscreteOperator {
    pub fn len(&self) -> usize {
        self.matrix.n
    }

    pub fn is_empty(&self) -> bool {
        self.matrix.n == 0
    }

    pub fn dim(&self) -> usize {
        self.body.dim()
    }

    pub fn grid(&self) -> &GridSpec {
        &self.lattice.grid
    }

    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        self.matrix.mul(u)
    }

    /// Dense kinetic part (matrix minus the potential diagonal).
    pub fn kinetic_dense(&self) -> nalgebra::DMatrix<f64> {
        let mut k = self.matrix.to_dense();
        for (i, v) in self.potential_values.iter().enumerate() {
            k[(i, i)] -= v;
        }
        k
    }

    pub fn zeros(&self) -> GridFunction {
        GridFunction::constant(self.lattice.clone(), 0.0)
    }

    pub fn sample(&self, f: impl Fn(&[f64]) -> f64) -> GridFunction {
        GridFunction::from_fn(self.lattice.clone(), f)
    }
}

/// `(u·Mu)/(u·u)`.
pub fn rayleigh_quotient(op: &DiscreteOperator, u: &GridFunction) -> Result<f64> {
    if u.values.len() != op.len() {
        bail!(
            Operator,
            "grid function has {} values, operator has {} rows",
            u.values.len(),
            op.len()
        );
    }
    let uu = crate::linalg::dot(&u.values, &u.values);
    if uu == 0.0 {
        bail!(Operator, "Rayleigh quotient of the zero vector");
    }
    Ok(crate::linalg::dot(&u.values, &op.apply(&u.values)) / uu)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn interval_op(n: usize, v: Potential) -> DiscreteOperator {
        let body = ConvexBody::interval(0.0, 1.0).unwrap();
        let h = 1.0 / (n + 1) as f64;
        let g = GridSpec::covering(&[0.0], &[1.0], &[h], 1).unwrap();
        assemble(&body, &Matrix::identity(1), &v, &g).unwrap()
    }

    #[test]
    fn three_node_laplacian() {
        let op = interval_op(3, Potential::Zero);
        assert_eq!(op.len(), 3);
        let d = op.matrix.to_dense();
        for i in 0..3 {
            assert_eq!(d[(i, i)], 32.0);
        }
        assert_eq!(d[(0, 1)], -16.0);
        assert_eq!(d[(1, 2)], -16.0);
        assert_eq!(d[(0, 2)], 0.0);
        let op5 = interval_op(3, Potential::constant(1, 5.0));
        assert_eq!(op5.matrix.get(1, 1), 37.0);
        assert_eq!(op5.matrix.get(1, 0), -16.0);
    }

    #[test]
    fn mixed_stencil_is_symmetric_with_zero_center_row_sum() {
        let body = ConvexBody::aabb(&[0.0, 0.0], &[1.0, 1.0]).unwrap();
        let g = GridSpec::covering(&[0.0, 0.0], &[1.0, 1.0], &[0.25, 0.25], 1).unwrap();
        let a = Matrix::from_rows(&[vec![1.0, 0.25], vec![0.25, 1.0]]).unwrap();
        let op = assemble(&body, &a, &Potential::Zero, &g).unwrap();
        assert_eq!(op.len(), 9);
        assert!(op.matrix.is_symmetric());
        let center = op.lattice.nearest(&[0.5, 0.5]).unwrap();
        let s: f64 = op.matrix.row(center).map(|(_, v)| v).sum();
        assert_eq!(op.matrix.row(center).count(), 9);
        assert!(s.abs() < 1e-12);
        // Oracle: the stencil weights written out for the centre node.
        let h2 = 1.0 / 16.0;
        assert_eq!(op.matrix.get(center, center), 4.0 / h2);
        let pp = op.lattice.nearest(&[0.75, 0.75]).unwrap();
        let pm = op.lattice.nearest(&[0.75, 0.25]).unwrap();
        assert_eq!(op.matrix.get(center, pp), -0.25 / (2.0 * h2));
        assert_eq!(op.matrix.get(center, pm), 0.25 / (2.0 * h2));
    }

    #[test]
    fn rayleigh_examples() {
        let op = interval_op(3, Potential::Zero);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let u = GridFunction::new(op.lattice.clone(), vec![0.5, s, 0.5]).unwrap();
        assert!((rayleigh_quotient(&op, &u).unwrap() - (32.0 - 16.0 * 2f64.sqrt())).abs() < 1e-12);
        let one = GridFunction::constant(op.lattice.clone(), 1.0);
        assert!((rayleigh_quotient(&op, &one).unwrap() - 32.0 / 3.0).abs() < 1e-12);
        let shifted = interval_op(3, Potential::constant(1, 2.5));
        assert!((rayleigh_quotient(&shifted, &one).unwrap() - 32.0 / 3.0 - 2.5).abs() < 1e-12);
        assert!(rayleigh_quotient(&op, &op.zeros()).is_err());
    }

    #[test]
    fn assembly_errors() {
        let body = ConvexBody::interval(0.0, 1.0).unwrap();
        let coarse = GridSpec::covering(&[0.0], &[1.0], &[0.5], 1).unwrap();
        assert!(assemble(&body, &Matrix::identity(1), &Potential::Zero, &coarse).is_err());
        let g = GridSpec::covering(&[0.0], &[1.0], &[0.1], 1).unwrap();
        assert!(assemble(&body, &Matrix::diagonal(&[-1.0]), &Potential::Zero, &g).is_err());
        let a = Matrix::from_rows(&[vec![1.0, 0.2], vec![0.1, 1.0]]).unwrap();
        let sq = ConvexBody::aabb(&[0.0, 0.0], &[1.0, 1.0]).unwrap();
        let g2 = GridSpec::covering(&[0.0, 0.0], &[1.0, 1.0], &[0.1, 0.1], 1).unwrap();
        assert!(assemble(&sq, &a, &Potential::Zero, &g2).is_err());
        assert!(assemble(
            &sq,
            &Matrix::identity(2),
            &Potential::oscillator(1, 0.0),
            &g2
        )
        .is_err());
    }

    #[test]
    fn sine_consistency_is_second_order() {
        let err = |n: usize| {
            let op = interval_op(n, Potential::Zero);
            let pi = std::f64::consts::PI;
            let u = op.sample(|x| (pi * x[0]).sin());
            let mu = op.apply(&u.values);
            mu.iter()
                .zip(&u.values)
                .map(|(a, b)| (a - pi * pi * b).abs())
                .fold(0.0, f64::max)
        };
        let e1 = err(63);
        let e2 = err(127);
        let ratio = e1 / e2;
        assert!((3.6..=4.4).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn inverse_square_default_cap() {
        let body = ConvexBody::aabb(&[-1.0; 3], &[1.0; 3]).unwrap();
        let g = GridSpec::covering(&[-1.0; 3], &[1.0; 3], &[0.25; 3], 1).unwrap();
        let v = Potential::InverseSquare {
            strength: 1.0,
            x0: vec![0.0; 3],
            cap: None,
        };
        let op = assemble(&body, &Matrix::identity(3), &v, &g).unwrap();
        let c = op.lattice.nearest(&[0.0; 3]).unwrap();
        assert_eq!(op.potential_values[c], 64.0);
    }

    fn random_a(rng: &mut ChaCha8Rng, n: usize) -> Matrix {
        let mut m = nalgebra::DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = rng.random_range(0.5..2.0);
        }
        for i in 0..n {
            for j in i + 1..n {
                let b = 0.4 * m[(i, i)].min(m[(j, j)]) * rng.random_range(-1.0..1.0);
                m[(i, j)] = b;
                m[(j, i)] = b;
            }
        }
        Matrix(m)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn symmetric_and_form_positive(seed in 0u64..10_000, n in 1usize..=3) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = random_a(&mut rng, n);
            let body = ConvexBody::ball(vec![0.0; n], 1.0).unwrap();
            let h = if n == 3 { 0.25 } else { 0.125 };
            let g = GridSpec::covering(&vec![-1.0; n], &vec![1.0; n], &vec![h; n], 1).unwrap();
            let op = assemble(&body, &a, &Potential::Zero, &g).unwrap();
            prop_assert!(op.matrix.is_symmetric());
            for _ in 0..50 {
                let u: Vec<f64> = (0..op.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
                let gf = GridFunction::new(op.lattice.clone(), u).unwrap();
                prop_assert!(rayleigh_quotient(&op, &gf).unwrap() >= -1e-10);
            }
        }

        #[test]
        fn constant_shift_is_exact(c in -3.0f64..3.0) {
            let body = ConvexBody::aabb(&[0.0, 0.0], &[1.0, 1.0]).unwrap();
            let g = GridSpec::covering(&[0.0, 0.0], &[1.0, 1.0], &[0.125, 0.125], 1).unwrap();
            let v = Potential::oscillator(2, 1.0);
            let a = Matrix::identity(2);
            let m0 = assemble(&body, &a, &v, &g).unwrap().matrix;
            let m1 = assemble(&body, &a, &v.shifted(2, c).unwrap(), &g).unwrap().matrix;
            prop_assert_eq!(&m0.cols, &m1.cols);
            for i in 0..m0.n {
                for (j, x) in m0.row(i) {
                    let y = m1.get(i, j);
                    if i == j {
                        prop_assert!((y - x - c).abs() <= 1e-12 * x.abs().max(1.0));
                    } else {
                        prop_assert_eq!(x, y);
                    }
                }
            }
        }

        #[test]
        fn quotient_is_bounded_below_by_minus_shift(seed in 0u64..10_000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let body = ConvexBody::aabb(&[-1.0, -1.0], &[1.0, 1.0]).unwrap();
            let g = GridSpec::covering(&[-1.0, -1.0], &[1.0, 1.0], &[0.125, 0.125], 1).unwrap();
            let op = assemble(&body, &Matrix::identity(2), &Potential::oscillator(2, 3.0), &g).unwrap();
            prop_assert!(op.shift > 0.0);
            let u: Vec<f64> = (0..op.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let gf = GridFunction::new(op.lattice.clone(), u).unwrap();
            prop_assert!(rayleigh_quotient(&op, &gf).unwrap() >= -op.shift - 1e-10);
        }
    }
}
