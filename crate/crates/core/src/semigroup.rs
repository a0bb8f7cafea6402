//! The Dirichlet semigroup `e^{-tH}`: Strang-split Trotter products with the
//! free Gaussian kernel, kernel columns, traces, and Feynman-Kac sampling.

use std::sync::Arc;

use nalgebra::DMatrix;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{bail, Result};
use crate::geometry::ConvexBody;
use crate::grid::{GridFunction, Lattice};
use crate::linalg::{dot, Matrix};
use crate::operator::DiscreteOperator;
use crate::potential::Potential;
use crate::sparse::Csr;

/// Kernel truncation radius in units of `√(2 a_max τ)`.
pub const TRUNCATION_SIGMAS: f64 = 6.0;

/// Node count up to which diagonal traces use every column.
pub const EXACT_TRACE_NODES: usize = 4096;
pub const HUTCHINSON_PROBES: usize = 256;

/// How the kinetic substep sees the boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryTreatment {
    /// Zero the kernel outside the body.
    PlainMask,
    /// Additionally weight each kernel entry by the probability that a
    /// Brownian bridge between the two nodes stays on the inner side of
    /// every facet.
    #[default]
    ImageCorrected,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrotterPlan {
    pub t: f64,
    pub steps: usize,
    #[serde(default)]
    pub boundary: BoundaryTreatment,
}

impl TrotterPlan {
    pub fn new(t: f64, steps: usize) -> Self {
        TrotterPlan {
            t,
            steps,
            boundary: BoundaryTreatment::default(),
        }
    }

    pub fn tau(&self) -> f64 {
        self.t / self.steps as f64
    }
}

/// Free kernel `p_A(t, d) = (det A)^{-1/2}(4πt)^{-N/2} exp(-A⁻¹d·d/(4t))`.
pub fn free_kernel(a: &Matrix, t: f64, d: &[f64]) -> f64 {
    let ainv = a.inverse().expect("diffusion matrix is invertible");
    free_kernel_with(&ainv, a.determinant(), t, d)
}

fn free_kernel_with(ainv: &Matrix, det: f64, t: f64, d: &[f64]) -> f64 {
    let n = d.len() as f64;
    det.powf(-0.5)
        * (4.0 * std::f64::consts::PI * t).powf(-n / 2.0)
        * (-ainv.quad_form(d) / (4.0 * t)).exp()
}

/// One compiled Strang step `e^{-τV/2} K_Ω e^{-τV/2}`.
#[derive(Debug, Clone)]
pub struct Propagator {
    pub lattice: Arc<Lattice>,
    pub plan: TrotterPlan,
    half_potential: Vec<f64>,
    kernel: Csr,
    /// Mass of the truncated, normalized free kernel (`≤ 1`).
    pub free_mass: f64,
    pub radius: f64,
}

/// Distance data of a node to the boundary pieces used by the bridge factor.
struct Walls {
    /// Per facet: unit normal, offset and `aᵀAa`.
    facets: Vec<(Vec<f64>, f64, f64)>,
    ball: Option<(Vec<f64>, f64)>,
    a: Matrix,
    a_max: f64,
}

impl Walls {
    fn new(body: &ConvexBody, a: &Matrix) -> Self {
        let facets = body
            .halfspaces()
            .iter()
            .map(|h| (h.normal.clone(), h.offset, a.quad_form(&h.normal)))
            .collect();
        Walls {
            facets,
            ball: body.ball_params().map(|(c, r)| (c.to_vec(), r)),
            a: a.clone(),
            a_max: a.max_eigenvalue(),
        }
    }

    /// Probability that a bridge of duration `tau` between `x` and `y`
    /// stays inside, treating each facet as an independent half-space.
    fn bridge_survival(&self, x: &[f64], y: &[f64], tau: f64) -> f64 {
        let mut s = 1.0;
        for (n, b, an) in &self.facets {
            let dx = b - dot(n, x);
            let dy = b - dot(n, y);
            if dx <= 0.0 || dy <= 0.0 {
                return 0.0;
            }
            let e = dx * dy / (an * tau);
            if e < 40.0 {
                s *= -(-e).exp_m1();
            }
        }
        if let Some((c, r)) = &self.ball {
            let dist = |z: &[f64]| {
                z.iter()
                    .zip(c)
                    .map(|(p, q)| (p - q) * (p - q))
                    .sum::<f64>()
                    .sqrt()
            };
            let dx = r - dist(x);
            let dy = r - dist(y);
            if dx <= 0.0 || dy <= 0.0 {
                return 0.0;
            }
            let mid: Vec<f64> = x.iter().zip(y).map(|(p, q)| 0.5 * (p + q)).collect();
            let dm = dist(&mid);
            let an = if dm > 0.0 {
                let u: Vec<f64> = mid.iter().zip(c).map(|(p, q)| (p - q) / dm).collect();
                self.a.quad_form(&u)
            } else {
                self.a_max
            };
            let e = dx * dy / (an * tau);
            if e < 40.0 {
                s *= -(-e).exp_m1();
            }
        }
        s
    }
}

impl Propagator {
    pub fn new(op: &DiscreteOperator, plan: &TrotterPlan) -> Result<Self> {
        if !(plan.t > 0.0 && plan.t.is_finite()) || plan.steps == 0 {
            bail!(
                Semigroup,
                "plan needs t > 0 and steps ≥ 1 (t = {}, steps = {})",
                plan.t,
                plan.steps
            );
        }
        let lattice = op.lattice.clone();
        let grid = &lattice.grid;
        let n = grid.dim();
        let tau = plan.tau();
        let a = &op.a;
        let a_max = a.max_eigenvalue();
        let a_min = a.min_eigenvalue();
        let sd = (2.0 * a_max * tau).sqrt();
        let radius = TRUNCATION_SIGMAS * sd;
        for i in 0..n {
            let width = (grid.nodes[i] - 1) as f64 * grid.spacing[i];
            if radius > width {
                bail!(
                    Semigroup,
                    "kernel truncation radius {radius:.4} exceeds the box width {width:.4} on axis {i}; use more steps or a larger box"
                );
            }
        }
        let ainv = a.inverse().expect("validated SPD");
        let det = a.determinant();
        let cell = grid.cell_volume();
        let h = &grid.spacing;

        let weight = |o: &[isize]| {
            let d: Vec<f64> = (0..n).map(|i| o[i] as f64 * h[i]).collect();
            cell * free_kernel_with(&ainv, det, tau, &d)
        };
        let offsets_within = |rad: f64| -> Vec<Vec<isize>> {
            let reach: Vec<isize> = (0..n).map(|i| (rad / h[i]).floor() as isize).collect();
            let mut out = Vec::new();
            let mut o = vec![0isize; n];
            for i in 0..n {
                o[i] = -reach[i];
            }
            loop {
                let r2: f64 = (0..n).map(|i| (o[i] as f64 * h[i]).powi(2)).sum();
                if r2 <= rad * rad {
                    out.push(o.clone());
                }
                let mut i = 0;
                loop {
                    if i == n {
                        return out;
                    }
                    o[i] += 1;
                    if o[i] <= reach[i] {
                        break;
                    }
                    o[i] = -reach[i];
                    i += 1;
                }
            }
        };

        // Lattice normalization: the untruncated sum of sampled weights.
        let resolved = (0..n).all(|i| (2.0 * a_min * tau).sqrt() >= 4.0 * h[i]);
        let theta = if resolved {
            1.0
        } else {
            offsets_within(10.0 * sd)
                .iter()
                .map(|o| weight(o))
                .sum::<f64>()
        };
        let offsets = offsets_within(radius);
        let weights: Vec<f64> = offsets.iter().map(|o| weight(o) / theta).collect();
        let free_mass: f64 = weights.iter().sum();

        let walls =
            (plan.boundary == BoundaryTreatment::ImageCorrected).then(|| Walls::new(&op.body, a));
        let rows: Vec<Vec<(usize, f64)>> = (0..lattice.len())
            .into_par_iter()
            .map(|p| {
                let x = lattice.coord(p);
                let mut row = Vec::new();
                for (o, w) in offsets.iter().zip(&weights) {
                    if let Some(q) = lattice.neighbour(p, o) {
                        let f = match &walls {
                            Some(wl) => wl.bridge_survival(&x, &lattice.coord(q), tau),
                            None => 1.0,
                        };
                        if f > 0.0 {
                            row.push((q, w * f));
                        }
                    }
                }
                row
            })
            .collect();
        let kernel = Csr::from_rows(rows);
        let half_potential = op
            .potential_values
            .iter()
            .map(|v| (-0.5 * tau * v).exp())
            .collect();
        Ok(Propagator {
            lattice,
            plan: plan.clone(),
            half_potential,
            kernel,
            free_mass,
            radius,
        })
    }

    pub fn len(&self) -> usize {
        self.lattice.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lattice.is_empty()
    }

    /// `u ← e^{-τV/2} K e^{-τV/2} u`; `scratch` must have the same length.
    pub fn step(&self, u: &mut [f64], scratch: &mut [f64]) {
        for (x, d) in u.iter_mut().zip(&self.half_potential) {
            *x *= d;
        }
        self.kernel.mul_into(u, scratch);
        for ((x, s), d) in u.iter_mut().zip(scratch.iter()).zip(&self.half_potential) {
            *x = s * d;
        }
    }

    pub fn run(&self, u: &[f64], steps: usize) -> Vec<f64> {
        let mut v = u.to_vec();
        let mut scratch = vec![0.0; v.len()];
        for _ in 0..steps {
            self.step(&mut v, &mut scratch);
        }
        v
    }

    /// Applies the plan's full step count.
    pub fn propagate(&self, f: &GridFunction) -> Result<GridFunction> {
        self.check(f)?;
        Ok(GridFunction {
            lattice: self.lattice.clone(),
            values: self.run(&f.values, self.plan.steps),
        })
    }

    fn check(&self, f: &GridFunction) -> Result<()> {
        if f.values.len() != self.len() || f.lattice.grid != self.lattice.grid {
            bail!(
                Semigroup,
                "grid function is not defined on the operator's interior nodes"
            );
        }
        Ok(())
    }

    /// Propagated discrete delta (`1/h^N` at node `y`).
    pub fn kernel_column(&self, y: usize) -> Result<GridFunction> {
        if y >= self.len() {
            bail!(Semigroup, "node {y} is not an interior node");
        }
        let mut e = vec![0.0; self.len()];
        e[y] = 1.0 / self.lattice.grid.cell_volume();
        Ok(GridFunction {
            lattice: self.lattice.clone(),
            values: self.run(&e, self.plan.steps),
        })
    }

    /// `(S^n)_yy`, the diagonal of the propagator matrix.
    fn diagonal_entry(&self, y: usize) -> f64 {
        let mut e = vec![0.0; self.len()];
        e[y] = 1.0;
        self.run(&e, self.plan.steps)[y]
    }
}

pub fn trotter_propagate(
    op: &DiscreteOperator,
    f: &GridFunction,
    plan: &TrotterPlan,
) -> Result<GridFunction> {
    Propagator::new(op, plan)?.propagate(f)
}

pub fn heat_kernel_column(
    op: &DiscreteOperator,
    y: usize,
    plan: &TrotterPlan,
) -> Result<GridFunction> {
    Propagator::new(op, plan)?.kernel_column(y)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceEstimate {
    pub t: f64,
    pub value: f64,
    /// Spectral mode: `K e^{-tλ_K}`; diagonal mode: standard error of the
    /// stochastic estimator (0 when every column is computed).
    pub error_estimate: f64,
    pub mode: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

/// `Σ_{k≤K} e^{-tλ_k}`.
pub fn partition_function_spectral(eigenvalues: &[f64], t: f64) -> Result<TraceEstimate> {
    let Some(&last) = eigenvalues.last() else {
        bail!(Semigroup, "spectral trace needs at least one eigenvalue");
    };
    let value: f64 = eigenvalues.iter().map(|l| (-t * l).exp()).sum();
    let bound = eigenvalues.len() as f64 * (-t * last).exp();
    let warning = if bound > 1e-2 * value {
        log::warn!("spectral trace at t={t}: truncation bound {bound:e} exceeds 1% of {value:e}");
        Some(format!(
            "truncation bound {bound:e} exceeds 1% of the value"
        ))
    } else if bound > 1e-6 * value {
        Some(format!(
            "truncation bound {bound:e} exceeds 1e-6 of the value"
        ))
    } else {
        None
    };
    Ok(TraceEstimate {
        t,
        value,
        error_estimate: bound,
        mode: "spectral",
        warning,
    })
}

/// `h^N Σ_x p(t, x, x)` from the Trotter propagator.
pub fn partition_function_diagonal(
    op: &DiscreteOperator,
    plan: &TrotterPlan,
    seed: u64,
) -> Result<TraceEstimate> {
    let prop = Propagator::new(op, plan)?;
    let n = prop.len();
    if n <= EXACT_TRACE_NODES {
        let diag: Vec<f64> = (0..n)
            .into_par_iter()
            .map(|y| prop.diagonal_entry(y))
            .collect();
        return Ok(TraceEstimate {
            t: plan.t,
            value: diag.iter().sum(),
            error_estimate: 0.0,
            mode: "diagonal",
            warning: None,
        });
    }
    let samples: Vec<f64> = (0..HUTCHINSON_PROBES)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k as u64);
            let z: Vec<f64> = (0..n)
                .map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 })
                .collect();
            dot(&z, &prop.run(&z, plan.steps))
        })
        .collect();
    let m = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / m;
    let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (m - 1.0);
    Ok(TraceEstimate {
        t: plan.t,
        value: mean,
        error_estimate: (var / m).sqrt(),
        mode: "hutchinson",
        warning: None,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GoldenThompson {
    pub lhs: f64,
    pub rhs: f64,
    pub pass: bool,
}

/// `Tr e^{-t(K+P)} ≤ Tr(e^{-tK} e^{-tP})` for symmetric `K` and diagonal `P`.
pub fn golden_thompson_check(k: &Matrix, p: &Matrix, t: f64) -> Result<GoldenThompson> {
    let n = k.nrows();
    if !k.is_square() || !p.is_square() || p.nrows() != n {
        bail!(
            Semigroup,
            "golden_thompson: matrices must be square of equal size"
        );
    }
    if n > 400 {
        bail!(
            Semigroup,
            "golden_thompson: size {n} exceeds the dense limit 400"
        );
    }
    if !k.is_symmetric() {
        bail!(
            Semigroup,
            "golden_thompson: kinetic matrix is not symmetric"
        );
    }
    if !p.is_diagonal() {
        bail!(
            Semigroup,
            "golden_thompson: potential matrix is not diagonal"
        );
    }
    let sum = &k.0 + &p.0;
    let lhs: f64 = sum
        .symmetric_eigenvalues()
        .iter()
        .map(|l| (-t * l).exp())
        .sum();
    let eig = k.0.clone().symmetric_eigen();
    let d = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| (-t * l).exp()));
    let ek = &eig.eigenvectors * d * eig.eigenvectors.transpose();
    let rhs: f64 = (0..n).map(|i| ek[(i, i)] * (-t * p.0[(i, i)]).exp()).sum();
    Ok(GoldenThompson {
        lhs,
        rhs,
        pass: lhs <= rhs + 1e-10 * rhs.abs(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UltraRow {
    pub t: f64,
    pub steps: usize,
    /// Largest probed `p(t, x, x)`.
    pub sup_diagonal: f64,
    /// `sup · t^{N/2}`.
    pub scaled: f64,
    /// `sup · t^{N/2} · e^{λ₁ t}`.
    pub compensated: f64,
    /// `(det A)^{-1/2} (4π)^{-N/2}`, the free value of `scaled`.
    pub free_limit: f64,
    /// Largest `p(t,x,x) - p_free(t,0)` over probed nodes.
    pub domination_excess: f64,
    pub probed: usize,
}

/// Largest diagonal kernel value over a node subsample: the nine interior
/// nodes nearest the Chebyshev centre and eight seeded random nodes.
pub fn ultracontractivity_probe(
    op: &DiscreteOperator,
    times: &[f64],
    steps: usize,
    lambda1: f64,
    seed: u64,
) -> Result<Vec<UltraRow>> {
    if let Some(t) = times.iter().find(|&&t| !(t > 0.0 && t <= 0.1)) {
        bail!(
            Semigroup,
            "ultracontractivity probe times must lie in (0, 0.1], got {t}"
        );
    }
    let lat = &op.lattice;
    let (c, _) = op.body.chebyshev_center();
    let mut by_dist: Vec<usize> = (0..lat.len()).collect();
    let d2 = |i: usize| {
        lat.coord(i)
            .iter()
            .zip(&c)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
    };
    by_dist.sort_by(|&a, &b| d2(a).total_cmp(&d2(b)).then(a.cmp(&b)));
    let mut nodes: Vec<usize> = by_dist.iter().take(9).copied().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rest: Vec<usize> = by_dist.iter().skip(9).copied().collect();
    if !rest.is_empty() {
        for i in sample(&mut rng, rest.len(), rest.len().min(8)).into_iter() {
            nodes.push(rest[i]);
        }
    }
    let n = op.dim() as f64;
    let free_limit = op.a.determinant().powf(-0.5) * (4.0 * std::f64::consts::PI).powf(-n / 2.0);
    let mut rows = Vec::new();
    for &t in times {
        let plan = TrotterPlan::new(t, steps);
        let prop = Propagator::new(op, &plan)?;
        let free = free_limit * t.powf(-n / 2.0);
        let vals: Vec<f64> = nodes
            .par_iter()
            .map(|&y| prop.kernel_column(y).map(|col| col.values[y]))
            .collect::<Result<_>>()?;
        let sup = vals.iter().copied().fold(0.0, f64::max);
        let excess = vals
            .iter()
            .map(|v| v - free)
            .fold(f64::NEG_INFINITY, f64::max);
        let scaled = sup * t.powf(n / 2.0);
        rows.push(UltraRow {
            t,
            steps,
            sup_diagonal: sup,
            scaled,
            compensated: scaled * (lambda1 * t).exp(),
            free_limit,
            domination_excess: excess,
            probed: nodes.len(),
        });
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathSamplerConfig {
    pub steps: usize,
    pub paths: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Weight surviving steps by the bridge survival probability.
    #[serde(default = "default_true")]
    pub bridge: bool,
    #[serde(default = "default_batch")]
    pub batch: usize,
}

fn default_seed() -> u64 {
    crate::DEFAULT_SEED
}
fn default_true() -> bool {
    true
}
fn default_batch() -> usize {
    1024
}

impl PathSamplerConfig {
    pub fn new(steps: usize, paths: usize, seed: u64) -> Self {
        PathSamplerConfig {
            steps,
            paths,
            seed,
            bridge: true,
            batch: default_batch(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FkEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub survivors: usize,
    pub paths: usize,
    pub delta: f64,
}

/// `E[f(X_t) e^{-∫V(X_s)ds}; X stays in the body]` for the diffusion with
/// generator `div(A∇)` started at `x`.
pub fn feynman_kac_estimate(
    body: &ConvexBody,
    a: &Matrix,
    v: &Potential,
    f: &(dyn Fn(&[f64]) -> f64 + Sync),
    x: &[f64],
    t: f64,
    cfg: &PathSamplerConfig,
) -> Result<FkEstimate> {
    let n = body.dim();
    if x.len() != n {
        bail!(
            Semigroup,
            "start point has dimension {}, body has {n}",
            x.len()
        );
    }
    if !(t > 0.0) || cfg.steps == 0 || cfg.paths < 2 || cfg.batch == 0 {
        bail!(
            Semigroup,
            "feynman_kac needs t > 0, steps ≥ 1, paths ≥ 2, batch ≥ 1"
        );
    }
    crate::operator::check_diffusion(a, n)
        .map_err(|e| crate::error::Error::Semigroup(e.to_string()))?;
    let v = v.resolve()?;
    let delta = t / cfg.steps as f64;
    let a_max = a.max_eigenvalue();
    let inr = body.inradius();
    let limit = 1e-2 * inr * inr / a_max;
    if delta > limit {
        bail!(
            Semigroup,
            "time step {delta:e} exceeds 1e-2·inradius²/a_max = {limit:e}; use ≥ {} steps",
            (t / limit).ceil()
        );
    }
    let scale = (2.0 * a_max * delta).sqrt();
    if !body.contains(x, scale) {
        bail!(
            Semigroup,
            "start point lies within one step scale {scale:e} of the boundary"
        );
    }
    let l = a.cholesky().expect("validated SPD");
    let walls = Walls::new(body, a);
    let sqrt2d = (2.0 * delta).sqrt();

    let batches = cfg.paths.div_ceil(cfg.batch);
    let partial: Vec<(f64, f64, usize)> = (0..batches)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(b as u64);
            let count = cfg.batch.min(cfg.paths - b * cfg.batch);
            let (mut s1, mut s2, mut alive) = (0.0, 0.0, 0);
            let mut z = vec![0.0; n];
            for _ in 0..count {
                let mut pos = x.to_vec();
                let mut log_w = 0.0;
                let mut w_bridge = 1.0;
                let mut survived = true;
                for _ in 0..cfg.steps {
                    for zi in z.iter_mut() {
                        *zi = rng.sample(StandardNormal);
                    }
                    let inc = l.mul_vec(&z);
                    let next: Vec<f64> =
                        pos.iter().zip(&inc).map(|(p, d)| p + sqrt2d * d).collect();
                    if !body.contains(&next, 0.0) {
                        survived = false;
                        break;
                    }
                    let mid: Vec<f64> = pos.iter().zip(&next).map(|(p, q)| 0.5 * (p + q)).collect();
                    log_w -= delta * v.evaluate(&mid);
                    if cfg.bridge {
                        w_bridge *= walls.bridge_survival(&pos, &next, delta);
                    }
                    pos = next;
                }
                if survived {
                    alive += 1;
                    let val = f(&pos) * log_w.exp() * w_bridge;
                    s1 += val;
                    s2 += val * val;
                }
            }
            (s1, s2, alive)
        })
        .collect();
    let (mut s1, mut s2, mut alive) = (0.0, 0.0, 0);
    for (a1, a2, c) in partial {
        s1 += a1;
        s2 += a2;
        alive += c;
    }
    if alive == 0 {
        bail!(
            Semigroup,
            "no path survived to t = {t}; increase paths or decrease t"
        );
    }
    let m = cfg.paths as f64;
    let mean = s1 / m;
    let var = ((s2 / m - mean * mean) * m / (m - 1.0)).max(0.0);
    Ok(FkEstimate {
        mean,
        stderr: (var / m).sqrt(),
        survivors: alive,
        paths: cfg.paths,
        delta,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroundStateLeg {
    pub leg: usize,
    pub t: f64,
    /// Grid-L² distance to the previous iterate.
    pub increment: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sup_distance: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alignment: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct GroundStateRun {
    pub u: GridFunction,
    pub legs: Vec<GroundStateLeg>,
    /// Decay rate fitted to the increments, to compare with `λ₂ - λ₁`.
    pub fitted_rate: Option<f64>,
}

/// Power iteration with the semigroup: `u ← e^{-Δt H} u / ‖·‖` for `legs`
/// legs of length `plan.t`.
pub fn semigroup_ground_state(
    op: &DiscreteOperator,
    f0: &GridFunction,
    legs: usize,
    plan: &TrotterPlan,
    reference: Option<&GridFunction>,
) -> Result<GroundStateRun> {
    if f0.values.iter().any(|v| !(*v > 0.0)) {
        bail!(
            Semigroup,
            "initial function must be strictly positive on interior nodes"
        );
    }
    let prop = Propagator::new(op, plan)?;
    prop.check(f0)?;
    let mut u = f0.clone();
    u.normalize();
    let mut table = Vec::with_capacity(legs);
    for leg in 1..=legs {
        let mut next = prop.propagate(&u)?;
        if next.normalize() == 0.0 {
            bail!(Semigroup, "iterate vanished at leg {leg}");
        }
        let increment = next.l2_distance(&u);
        u = next;
        table.push(GroundStateLeg {
            leg,
            t: leg as f64 * plan.t,
            increment,
            sup_distance: reference.map(|r| u.sup_distance(r)),
            alignment: reference.map(|r| u.inner(r).abs() / r.norm()),
        });
    }
    let fitted_rate = fit_rate(&table, plan.t);
    Ok(GroundStateRun {
        u,
        legs: table,
        fitted_rate,
    })
}

/// Least-squares slope of `log increment` over the legs past the first
/// third that are above the round-off floor.
fn fit_rate(table: &[GroundStateLeg], dt: f64) -> Option<f64> {
    let pts: Vec<(f64, f64)> = table
        .iter()
        .skip(table.len() / 3)
        .filter(|l| l.increment > 1e-11)
        .map(|l| (l.leg as f64, l.increment.ln()))
        .collect();
    if pts.len() < 3 {
        return None;
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Some(-sxy / sxx / dt)
}
