//! Potential families and the Kolmogorov ground-state transform.
//!
//! All families are bounded below and finite everywhere. The inverse-square
//! family is truncated at a plateau `cap`; when the cap is left unset the
//! operator fills it in from the grid spacing.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{bail, Result};
use crate::linalg::{dot, Matrix};

/// Value used for an inverse-square potential evaluated with no cap set.
pub const UNSET_CAP_FALLBACK: f64 = 1e12;

/// Smallest eigenvalue tolerated for the quadratic form of a convex potential.
pub const CONVEXITY_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum Potential {
    Zero,
    /// `V(x) = Q(x-c)·(x-c) + d`.
    Quadratic {
        q: Matrix,
        c: Vec<f64>,
        d: f64,
    },
    /// `V(x) = min(C/|x-x0|², cap)`.
    InverseSquare {
        strength: f64,
        x0: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        cap: Option<f64>,
    },
    /// The potential induced by a Kolmogorov operator; see [`KolmogorovData`].
    Kolmogorov(KolmogorovData),
}

impl Default for Potential {
    fn default() -> Self {
        Potential::Zero
    }
}

impl Potential {
    /// `V ≡ c` in dimension `dim`.
    pub fn constant(dim: usize, c: f64) -> Self {
        Potential::Quadratic {
            q: Matrix::zeros(dim),
            c: vec![0.0; dim],
            d: c,
        }
    }

    /// `|x|²/4 - shift`, the shifted harmonic oscillator.
    pub fn oscillator(dim: usize, shift: f64) -> Self {
        Potential::Quadratic {
            q: Matrix::scaled_identity(dim, 0.25),
            c: vec![0.0; dim],
            d: -shift,
        }
    }

    /// Dimension fixed by the parameters; `None` for the zero potential.
    pub fn dim(&self) -> Option<usize> {
        match self {
            Potential::Zero => None,
            Potential::Quadratic { c, .. } => Some(c.len()),
            Potential::InverseSquare { x0, .. } => Some(x0.len()),
            Potential::Kolmogorov(k) => Some(k.b0.len()),
        }
    }

    pub fn family(&self) -> &'static str {
        match self {
            Potential::Zero => "zero",
            Potential::Quadratic { .. } => "quadratic",
            Potential::InverseSquare { .. } => "inverse_square",
            Potential::Kolmogorov(_) => "kolmogorov",
        }
    }

    /// Checks the family invariants.
    pub fn validate(&self) -> Result<()> {
        match self {
            Potential::Zero => Ok(()),
            Potential::Quadratic { q, c, d } => {
                if !q.is_square() || q.nrows() != c.len() {
                    bail!(
                        Potential,
                        "quadratic: q must be {0}×{0} to match c",
                        c.len()
                    );
                }
                if !d.is_finite()
                    || c.iter().any(|x| !x.is_finite())
                    || q.0.iter().any(|x| !x.is_finite())
                {
                    bail!(Potential, "quadratic: non-finite parameter");
                }
                if q.asymmetry() > 1e-14 * q.0.amax().max(1.0) {
                    bail!(Potential, "quadratic: q is not symmetric");
                }
                let m = q.min_eigenvalue();
                if m < -CONVEXITY_EPS {
                    bail!(
                        Potential,
                        "quadratic: q has eigenvalue {m:e} < 0, V is not convex"
                    );
                }
                Ok(())
            }
            Potential::InverseSquare { strength, x0, cap } => {
                if !(strength.is_finite() && *strength > 0.0) {
                    bail!(
                        Potential,
                        "inverse_square: strength must be > 0, got {strength}"
                    );
                }
                if let Some(cap) = cap {
                    if !(cap.is_finite() && *cap > 0.0) {
                        bail!(Potential, "inverse_square: cap must be > 0, got {cap}");
                    }
                }
                if x0.iter().any(|x| !x.is_finite()) {
                    bail!(Potential, "inverse_square: non-finite x0");
                }
                Ok(())
            }
            Potential::Kolmogorov(k) => k.validate(),
        }
    }

    /// Replaces a Kolmogorov potential by its explicit quadratic form.
    pub fn resolve(&self) -> Result<Potential> {
        match self {
            Potential::Kolmogorov(k) => Ok(k.transform()?.1),
            other => {
                other.validate()?;
                Ok(other.clone())
            }
        }
    }

    /// Sets the inverse-square plateau if unset.
    pub fn with_default_cap(&self, cap: f64) -> Potential {
        match self {
            Potential::InverseSquare {
                strength,
                x0,
                cap: None,
            } => Potential::InverseSquare {
                strength: *strength,
                x0: x0.clone(),
                cap: Some(cap),
            },
            other => other.clone(),
        }
    }

    /// Adds a constant.
    pub fn shifted(&self, dim: usize, by: f64) -> Result<Potential> {
        Ok(match self.resolve()? {
            Potential::Zero => Potential::constant(dim, by),
            Potential::Quadratic { q, c, d } => Potential::Quadratic { q, c, d: d + by },
            Potential::InverseSquare { .. } => {
                bail!(Potential, "inverse_square has no constant term")
            }
            Potential::Kolmogorov(_) => unreachable!("resolved"),
        })
    }

    /// `V(x)`. Kolmogorov data is transformed on every call; resolve first in
    /// hot loops.
    pub fn evaluate(&self, x: &[f64]) -> f64 {
        match self {
            Potential::Zero => 0.0,
            Potential::Quadratic { q, c, d } => {
                let y: Vec<f64> = x.iter().zip(c).map(|(a, b)| a - b).collect();
                q.quad_form(&y) + d
            }
            Potential::InverseSquare { strength, x0, cap } => {
                let cap = cap.unwrap_or(UNSET_CAP_FALLBACK);
                let r2: f64 = x.iter().zip(x0).map(|(a, b)| (a - b) * (a - b)).sum();
                if r2 * cap <= *strength {
                    cap
                } else {
                    strength / r2
                }
            }
            Potential::Kolmogorov(k) => match k.transform() {
                Ok((_, v)) => v.evaluate(x),
                Err(_) => f64::NAN,
            },
        }
    }

    /// Radius of the plateau ball of a capped inverse-square potential.
    fn plateau(&self) -> Option<(&[f64], f64)> {
        match self {
            Potential::InverseSquare { strength, x0, cap } => {
                let cap = cap.unwrap_or(UNSET_CAP_FALLBACK);
                Some((x0, (strength / cap).sqrt()))
            }
            _ => None,
        }
    }
}

/// Worst midpoint-convexity defect `V((x+y)/2) - (V(x)+V(y))/2` over random
/// pairs in the box `[lo, hi]`. Pairs touching the plateau of a capped
/// inverse-square potential are skipped.
pub fn convexity_probe(
    v: &Potential,
    lo: &[f64],
    hi: &[f64],
    samples: usize,
    seed: u64,
) -> Result<f64> {
    if samples < 100 {
        bail!(
            Potential,
            "convexity_probe needs samples ≥ 100, got {samples}"
        );
    }
    if lo.len() != hi.len() || lo.iter().zip(hi).any(|(a, b)| !(a < b)) {
        bail!(Potential, "convexity_probe: invalid box");
    }
    let v = v.resolve()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let plateau = v.plateau();
    let inside_plateau = |z: &[f64]| match plateau {
        Some((x0, rad)) => {
            let r2: f64 = z.iter().zip(x0).map(|(a, b)| (a - b) * (a - b)).sum();
            r2.sqrt() <= rad
        }
        None => false,
    };
    let mut worst = 0.0f64;
    let mut drawn = 0;
    while drawn < samples {
        let x: Vec<f64> = lo
            .iter()
            .zip(hi)
            .map(|(a, b)| rng.random_range(*a..*b))
            .collect();
        let y: Vec<f64> = lo
            .iter()
            .zip(hi)
            .map(|(a, b)| rng.random_range(*a..*b))
            .collect();
        drawn += 1;
        let m: Vec<f64> = x.iter().zip(&y).map(|(a, b)| 0.5 * (a + b)).collect();
        if inside_plateau(&x) || inside_plateau(&y) || inside_plateau(&m) {
            continue;
        }
        let d = v.evaluate(&m) - 0.5 * (v.evaluate(&x) + v.evaluate(&y));
        worst = worst.max(d);
    }
    Ok(worst)
}

/// Constant-coefficient Kolmogorov operator `div(A∇) - (Bx + b0)·∇`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KolmogorovData {
    pub a: Matrix,
    pub b: Matrix,
    pub b0: Vec<f64>,
}

/// `φ(x) = (A⁻¹Bx·x)/4 + (A⁻¹b0·x)/2`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroundStateWeight {
    /// Symmetric part of `A⁻¹B`.
    pub s: Matrix,
    /// `A⁻¹b0`.
    pub w: Vec<f64>,
}

impl GroundStateWeight {
    pub fn phi(&self, x: &[f64]) -> f64 {
        self.s.quad_form(x) / 4.0 + dot(&self.w, x) / 2.0
    }

    /// `∇φ(x) = Sx/2 + w/2`.
    pub fn grad(&self, x: &[f64]) -> Vec<f64> {
        self.s
            .mul_vec(x)
            .iter()
            .zip(&self.w)
            .map(|(a, b)| 0.5 * (a + b))
            .collect()
    }
}

impl KolmogorovData {
    pub fn validate(&self) -> Result<()> {
        let n = self.b0.len();
        if !(1..=3).contains(&n) {
            bail!(Potential, "kolmogorov: dimension must be 1..3, got {n}");
        }
        if !self.a.is_square() || self.a.nrows() != n || !self.b.is_square() || self.b.nrows() != n
        {
            bail!(Potential, "kolmogorov: a and b must be {n}×{n}");
        }
        if !self.a.is_symmetric() {
            bail!(Potential, "kolmogorov: a is not symmetric");
        }
        if !self.b.is_symmetric() {
            bail!(Potential, "kolmogorov: b is not symmetric");
        }
        let a1 = self.a.min_eigenvalue();
        if !(a1 > 0.0) {
            bail!(
                Potential,
                "kolmogorov: a is not positive definite (smallest eigenvalue {a1:e})"
            );
        }
        Ok(())
    }

    /// Ground-state weight `φ` and the potential `V_φ` with `H_{V_φ} e^{-φ} = 0`.
    ///
    /// With `∇φ = Gx + g`, `G = S/2`, `g = A⁻¹b0/2`:
    /// `V_φ = A∇φ·∇φ - div(A∇φ) = (Gx+g)ᵀA(Gx+g) - Tr(AG)`,
    /// returned in the form `Q(x-c)·(x-c) + d` with `Q = GAG ⪰ 0`.
    pub fn transform(&self) -> Result<(GroundStateWeight, Potential)> {
        self.validate()?;
        let n = self.b0.len();
        let a = &self.a.0;
        let ainv = a.clone().try_inverse().expect("positive definite");
        let ab = &ainv * &self.b.0;
        let s = (&ab + ab.transpose()) * 0.5;
        let w = &ainv * nalgebra::DVector::from_column_slice(&self.b0);
        let g_mat = &s * 0.5;
        let g = &w * 0.5;

        let mut q = &g_mat * a * &g_mat;
        q = (&q + q.transpose()) * 0.5;
        let lin = -(&g_mat * a * &g);
        let c = q
            .clone()
            .pseudo_inverse(1e-13 * q.amax().max(1.0))
            .map_err(|e| crate::error::Error::Potential(format!("kolmogorov: {e}")))?
            * &lin;
        let d = (g.transpose() * a * &g)[(0, 0)]
            - (a * &g_mat).trace()
            - (c.transpose() * &q * &c)[(0, 0)];

        let weight = GroundStateWeight {
            s: Matrix(s),
            w: w.iter().copied().collect(),
        };
        let v = Potential::Quadratic {
            q: Matrix(DMatrix::from_fn(n, n, |i, j| q[(i, j)])),
            c: c.iter().copied().collect(),
            d,
        };
        Ok((weight, v))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn kd(a: Vec<Vec<f64>>, b: Vec<Vec<f64>>, b0: Vec<f64>) -> KolmogorovData {
        KolmogorovData {
            a: Matrix::from_rows(&a).unwrap(),
            b: Matrix::from_rows(&b).unwrap(),
            b0,
        }
    }

    /// `-div(A∇u) + V u` at `x` by central differences, `u = e^{-φ}`.
    fn ground_state_residual(k: &KolmogorovData, x: &[f64]) -> (f64, f64) {
        let (w, v) = k.transform().unwrap();
        let n = x.len();
        let step = 1e-4;
        let u = |y: &[f64]| (-w.phi(y)).exp();
        let mut div = 0.0;
        for i in 0..n {
            for j in 0..n {
                let aij = k.a.get(i, j);
                if aij == 0.0 {
                    continue;
                }
                let mut d2 = 0.0;
                for (si, sj, sign) in [
                    (1.0, 1.0, 1.0),
                    (1.0, -1.0, -1.0),
                    (-1.0, 1.0, -1.0),
                    (-1.0, -1.0, 1.0),
                ] {
                    let mut y = x.to_vec();
                    y[i] += si * step;
                    y[j] += sj * step;
                    d2 += sign * u(&y);
                }
                div += aij * d2 / (4.0 * step * step);
            }
        }
        let ux = u(x);
        (-div + v.evaluate(x) * ux, ux)
    }

    #[test]
    fn evaluate_examples() {
        assert_eq!(Potential::Zero.evaluate(&[3.0, -1.0]), 0.0);
        assert_eq!(Potential::oscillator(1, 0.5).evaluate(&[0.0]), -0.5);
        let v = Potential::InverseSquare {
            strength: 1.0,
            x0: vec![0.0; 3],
            cap: Some(1e6),
        };
        assert_eq!(v.evaluate(&[2.0, 0.0, 0.0]), 0.25);
        assert_eq!(v.evaluate(&[0.0, 0.0, 0.0]), 1e6);
        assert!(v.evaluate(&[1e-4, 0.0, 0.0]) <= 1e6);
    }

    #[test]
    fn kolmogorov_identity_drift_is_shifted_oscillator() {
        let k = kd(vec![vec![1.0]], vec![vec![1.0]], vec![0.0]);
        let (w, v) = k.transform().unwrap();
        assert!((w.phi(&[2.0]) - 1.0).abs() < 1e-15);
        for x in [-1.5, 0.0, 0.7, 3.0] {
            assert!((v.evaluate(&[x]) - (x * x / 4.0 - 0.5)).abs() < 1e-14);
        }
    }

    #[test]
    fn kolmogorov_constant_drift() {
        let k = kd(
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            vec![vec![0.0, 0.0], vec![0.0, 0.0]],
            vec![2.0, 0.0],
        );
        let (w, v) = k.transform().unwrap();
        assert!((w.phi(&[0.3, -4.0]) - 0.3).abs() < 1e-15);
        for x in [[0.0, 0.0], [1.0, -2.0], [-3.0, 5.0]] {
            assert!((v.evaluate(&x) - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn kolmogorov_scaled_diffusion() {
        // A = B = 2: φ = x²/4 as for A = B = 1, but the kinetic term doubles,
        // so the potential annihilating e^{-φ} is x²/2 - 1.
        let k = kd(vec![vec![2.0]], vec![vec![2.0]], vec![0.0]);
        let (w, v) = k.transform().unwrap();
        assert!((w.phi(&[2.0]) - 1.0).abs() < 1e-15);
        for x in [-1.0, 0.0, 2.0] {
            assert!((v.evaluate(&[x]) - (x * x / 2.0 - 1.0)).abs() < 1e-14);
        }
        let (r, u) = ground_state_residual(&k, &[0.8]);
        assert!(r.abs() <= 1e-6 * u);
    }

    #[test]
    fn kolmogorov_rejects_bad_data() {
        assert!(kd(
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            vec![vec![0.0, 1.0], vec![0.0, 0.0]],
            vec![0.0, 0.0]
        )
        .transform()
        .is_err());
        assert!(kd(vec![vec![-1.0]], vec![vec![1.0]], vec![0.0])
            .transform()
            .is_err());
    }

    #[test]
    fn convexity_probe_examples() {
        let lo = [-2.0, -2.0];
        let hi = [2.0, 2.0];
        assert_eq!(
            convexity_probe(&Potential::Zero, &lo, &hi, 500, 1).unwrap(),
            0.0
        );
        let q = Potential::Quadratic {
            q: Matrix::from_rows(&[vec![1.0, 0.3], vec![0.3, 0.5]]).unwrap(),
            c: vec![0.1, 0.2],
            d: -1.0,
        };
        assert!(convexity_probe(&q, &lo, &hi, 500, 1).unwrap() <= 1e-10);
        // Built directly: validate() refuses concave quadratics.
        let concave = Potential::Quadratic {
            q: Matrix::scaled_identity(2, -1.0),
            c: vec![0.0, 0.0],
            d: 0.0,
        };
        assert!(concave.validate().is_err());
        let d = (&concave).evaluate(&[0.0, 0.0])
            - 0.5 * (concave.evaluate(&[1.0, 1.0]) + concave.evaluate(&[-1.0, -1.0]));
        assert!(d > 0.0);
        assert!(convexity_probe(&q, &lo, &hi, 50, 1).is_err());
    }

    #[test]
    fn inverse_square_is_not_convex_off_the_plateau() {
        // 1/(t²+1) is concave near t = 0 along a line missing the pole.
        let v = Potential::InverseSquare {
            strength: 1.0,
            x0: vec![0.0, 0.0],
            cap: Some(100.0),
        };
        let defect = convexity_probe(&v, &[-1.0, 0.9], &[1.0, 1.1], 2000, 3).unwrap();
        assert!(defect > 0.0);
    }

    #[test]
    fn json_tagging() {
        let v: Potential =
            serde_json::from_str(r#"{"family":"quadratic","q":[[0.25]],"c":[0],"d":-0.5}"#)
                .unwrap();
        assert_eq!(v, Potential::oscillator(1, 0.5));
        let z: Potential = serde_json::from_str(r#"{"family":"zero"}"#).unwrap();
        assert_eq!(z, Potential::Zero);
        let k: Potential =
            serde_json::from_str(r#"{"family":"kolmogorov","a":[[1]],"b":[[1]],"b0":[0]}"#)
                .unwrap();
        assert_eq!(k.resolve().unwrap(), Potential::oscillator(1, 0.5));
        let s: Potential =
            serde_json::from_str(r#"{"family":"inverse_square","strength":1,"x0":[0,0,0]}"#)
                .unwrap();
        assert_eq!(s.with_default_cap(64.0).evaluate(&[0.0; 3]), 64.0);
        assert!(serde_json::from_str::<Potential>(
            r#"{"family":"quadratic","q":[[1]],"c":[0],"d":0,"extra":1}"#
        )
        .is_err());
        assert!(serde_json::from_str::<Potential>(r#"{"family":"cubic"}"#).is_err());
    }

    #[test]
    fn gaussian_integrals_converge_over_growing_boxes() {
        let v = Potential::oscillator(1, 0.5);
        let integral = |half: f64| {
            let n = 20_000;
            let h = 2.0 * half / n as f64;
            (0..n)
                .map(|i| (-v.evaluate(&[-half + (i as f64 + 0.5) * h])).exp() * h)
                .sum::<f64>()
        };
        let (a, b) = (integral(16.0), integral(32.0));
        assert!((b / a - 1.0).abs() < 1e-6);
    }

    fn sym_matrix(n: usize, vals: &[f64]) -> Matrix {
        let mut m = DMatrix::zeros(n, n);
        let mut k = 0;
        for i in 0..n {
            for j in 0..=i {
                m[(i, j)] = vals[k];
                m[(j, i)] = vals[k];
                k += 1;
            }
        }
        Matrix(m)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn kolmogorov_transform_annihilates_ground_state(
            n in 1usize..=3,
            avals in proptest::collection::vec(-0.4f64..0.4, 6),
            bvals in proptest::collection::vec(-1.5f64..1.5, 6),
            b0 in proptest::collection::vec(-1.0f64..1.0, 3),
            x in proptest::collection::vec(-1.0f64..1.0, 3),
        ) {
            let mut a = sym_matrix(n, &avals);
            for i in 0..n {
                a.0[(i, i)] += 1.5;
            }
            let k = KolmogorovData { a, b: sym_matrix(n, &bvals), b0: b0[..n].to_vec() };
            let (r, u) = ground_state_residual(&k, &x[..n]);
            let scale = u * (1.0 + k.transform().unwrap().1.evaluate(&x[..n]).abs());
            prop_assert!(r.abs() <= 1e-6 * scale, "residual {r} vs {scale}");
            // Q is positive semidefinite, so V_φ is always convex.
            prop_assert!(k.transform().unwrap().1.validate().is_ok());
        }
    }
}
