//! Inequality harnesses and their reports.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::eigen::{smallest_eigenpairs, EigenOptions, Spectrum};
use crate::error::{bail, Error, Result};
use crate::geometry::{minkowski_interpolate, ConvexBody};
use crate::grid::{BoxFunction, GridFunction, GridSpec};
use crate::linalg::Matrix;
use crate::operator::assemble;
use crate::potential::{GroundStateWeight, Potential};
use crate::semigroup::partition_function_spectral;

/// Discretization constant in `tol = c·h^p·λ₁(0)`. The interval family gives
/// `|λ_h - λ| ≤ (π²/12) h² λ` for aligned endpoints, so 1 covers it.
pub const DEFAULT_C_DISC: f64 = 1.0;

fn check_r_grid(r: &[f64]) -> Result<()> {
    if r.len() < 2 {
        bail!(Verify, "r_grid needs at least two values");
    }
    if r.iter().any(|x| !(0.0..=1.0).contains(x)) || r.windows(2).any(|w| !(w[0] < w[1])) {
        bail!(Verify, "r_grid must be strictly ascending within [0, 1]");
    }
    Ok(())
}

/// Convexity defect of the middle point of each consecutive triple:
/// linear interpolation of the outer values minus the middle value.
pub fn midpoint_defects(r: &[f64], y: &[f64]) -> Vec<f64> {
    (1..r.len().saturating_sub(1))
        .map(|i| {
            let (a, b, c) = (r[i - 1], r[i], r[i + 1]);
            let interp = ((c - b) * y[i - 1] + (b - a) * y[i + 1]) / (c - a);
            interp - y[i]
        })
        .collect()
}

/// Union bounding box of two bodies; it contains every `Ω_r`.
fn union_box(b0: &ConvexBody, b1: &ConvexBody) -> (Vec<f64>, Vec<f64>) {
    let (l0, h0) = b0.bounding_box();
    let (l1, h1) = b1.bounding_box();
    (
        l0.iter().zip(&l1).map(|(a, b)| a.min(*b)).collect(),
        h0.iter().zip(&h1).map(|(a, b)| a.max(*b)).collect(),
    )
}

fn axis_aligned(b: &ConvexBody) -> bool {
    b.ball_params().is_none()
        && b.halfspaces().iter().all(|h| {
            h.normal
                .iter()
                .all(|c| c.abs() < 1e-12 || (c.abs() - 1.0).abs() < 1e-12)
        })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BmOptions {
    pub r_grid: Vec<f64>,
    /// Cells along the longest side of the union bounding box.
    pub cells: usize,
    /// Explicit spacing per axis, overriding `cells`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spacing: Option<Vec<f64>>,
    pub solver_tol: f64,
    pub c_disc: f64,
    /// Fixed tolerance replacing the calibrated formula.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    pub seed: u64,
}

impl Default for BmOptions {
    fn default() -> Self {
        BmOptions {
            r_grid: vec![0.0, 0.25, 0.5, 0.75, 1.0],
            cells: 64,
            spacing: None,
            solver_tol: 1e-9,
            c_disc: DEFAULT_C_DISC,
            tol: None,
            seed: crate::DEFAULT_SEED,
        }
    }
}

/// The shared grid of a sweep between `b0` and `b1`.
pub fn sweep_grid(
    b0: &ConvexBody,
    b1: &ConvexBody,
    cells: usize,
    spacing: Option<&[f64]>,
) -> Result<GridSpec> {
    let (lo, hi) = union_box(b0, b1);
    let h = match spacing {
        Some(h) => h.to_vec(),
        None => {
            if cells < 4 {
                bail!(Verify, "cells must be ≥ 4");
            }
            let ext = lo.iter().zip(&hi).map(|(a, b)| b - a).fold(0.0, f64::max);
            vec![ext / cells as f64; lo.len()]
        }
    };
    GridSpec::covering(&lo, &hi, &h, 1)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BmReport {
    pub r_grid: Vec<f64>,
    pub lambda1: Vec<f64>,
    /// `(1-r)λ(0) + rλ(1) - λ(r)` at every r (zero at the ends).
    pub chord_defects: Vec<f64>,
    /// Per consecutive triple, attached to its middle point.
    pub midpoint_defects: Vec<f64>,
    pub tol: f64,
    pub tol_source: String,
    /// Exponent `p` in `h^p`: 2 when every `Ω_r` has axis-aligned facets.
    pub order: u32,
    pub grid: GridSpec,
    pub solver_tol: f64,
    pub seed: u64,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

impl BmReport {
    pub fn worst_chord(&self) -> f64 {
        self.chord_defects
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    pub fn worst_midpoint(&self) -> f64 {
        self.midpoint_defects
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }
}

/// Convexity of `r ↦ λ₁(Ω_r)` on one fixed grid.
pub fn bm_eigen_verify(
    b0: &ConvexBody,
    b1: &ConvexBody,
    a: &Matrix,
    v: &Potential,
    opts: &BmOptions,
) -> Result<BmReport> {
    check_r_grid(&opts.r_grid)?;
    if b0.dim() != b1.dim() {
        bail!(
            Verify,
            "bodies have dimensions {} and {}",
            b0.dim(),
            b1.dim()
        );
    }
    // Only convex families reach the solver.
    v.validate()?;
    let v = v.resolve()?;
    let grid = sweep_grid(b0, b1, opts.cells, opts.spacing.as_deref())?;
    let bodies: Vec<ConvexBody> = opts
        .r_grid
        .iter()
        .map(|&r| minkowski_interpolate(b0, b1, r))
        .collect::<Result<_>>()?;
    let order = if bodies.iter().all(axis_aligned) {
        2
    } else {
        1
    };
    let eopts = EigenOptions {
        tol: opts.solver_tol,
        seed: opts.seed,
        ..EigenOptions::default()
    };
    let solved: Vec<Result<f64>> = bodies
        .par_iter()
        .map(|b| {
            let op = assemble(b, a, &v, &grid)?;
            Ok(smallest_eigenpairs(&op, 1, &eopts)?.lambda1())
        })
        .collect();
    let mut lambda1 = Vec::new();
    let mut failure = None;
    for (s, r) in solved.into_iter().zip(&opts.r_grid) {
        match s {
            Ok(l) => lambda1.push(l),
            Err(e) => {
                failure = Some(format!("r = {r}: {e}"));
                break;
            }
        }
    }
    let h = grid.spacing.iter().copied().fold(0.0, f64::max);
    let complete = failure.is_none();
    let (chord_defects, midpoint_defects) = if complete {
        let (l0, l1) = (lambda1[0], *lambda1.last().unwrap());
        let (r0, r1) = (opts.r_grid[0], *opts.r_grid.last().unwrap());
        let chord = opts
            .r_grid
            .iter()
            .zip(&lambda1)
            .map(|(&r, &l)| {
                let s = (r - r0) / (r1 - r0);
                (1.0 - s) * l0 + s * l1 - l
            })
            .collect();
        (chord, midpoint_defects(&opts.r_grid, &lambda1))
    } else {
        (Vec::new(), Vec::new())
    };
    let l0 = lambda1.first().copied().unwrap_or(0.0).abs();
    let (tol, tol_source) = match opts.tol {
        Some(t) => (t, "fixed".to_string()),
        None => {
            let solver = 5.0 * opts.solver_tol * l0.max(1.0);
            let disc = opts.c_disc * h.powi(order as i32) * l0;
            if solver >= disc {
                (solver, format!("5·solver_tol·max(1,|λ₁(0)|) = {solver:e}"))
            } else {
                (
                    disc,
                    format!(
                        "c_disc·h^{order}·|λ₁(0)| = {}·{h:e}^{order}·{l0:e}",
                        opts.c_disc
                    ),
                )
            }
        }
    };
    let pass = complete
        && chord_defects.iter().all(|d| *d >= -tol)
        && midpoint_defects.iter().all(|d| *d >= -tol);
    Ok(BmReport {
        r_grid: opts.r_grid.clone(),
        lambda1,
        chord_defects,
        midpoint_defects,
        tol,
        tol_source,
        order,
        grid,
        solver_tol: opts.solver_tol,
        seed: opts.seed,
        pass,
        failure,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VolumeBmReport {
    pub r_grid: Vec<f64>,
    pub volumes: Vec<f64>,
    /// `|Ω_r|^{1/N}`.
    pub lhs: Vec<f64>,
    /// `(1-r)|Ω₀|^{1/N} + r|Ω₁|^{1/N}`.
    pub rhs: Vec<f64>,
    pub defects: Vec<f64>,
    pub tol: f64,
    pub pass: bool,
}

pub fn volume_bm_verify(
    b0: &ConvexBody,
    b1: &ConvexBody,
    r_grid: &[f64],
) -> Result<VolumeBmReport> {
    check_r_grid(r_grid)?;
    if b0.dim() != b1.dim() {
        bail!(
            Verify,
            "bodies have dimensions {} and {}",
            b0.dim(),
            b1.dim()
        );
    }
    let n = b0.dim() as f64;
    let v0 = b0.volume()?.powf(1.0 / n);
    let v1 = b1.volume()?.powf(1.0 / n);
    let mut volumes = Vec::new();
    let mut lhs = Vec::new();
    let mut rhs = Vec::new();
    for &r in r_grid {
        let vol = minkowski_interpolate(b0, b1, r)?.volume()?;
        volumes.push(vol);
        lhs.push(vol.powf(1.0 / n));
        rhs.push((1.0 - r) * v0 + r * v1);
    }
    let defects: Vec<f64> = lhs.iter().zip(&rhs).map(|(a, b)| a - b).collect();
    let tol = 1e-10;
    let pass = defects.iter().all(|d| *d >= -tol);
    Ok(VolumeBmReport {
        r_grid: r_grid.to_vec(),
        volumes,
        lhs,
        rhs,
        defects,
        tol,
        pass,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GaussianBmReport {
    pub r_grid: Vec<f64>,
    pub gamma: Vec<f64>,
    pub error_bounds: Vec<f64>,
    /// `γ(Ω₀)^{1-r} γ(Ω₁)^r`.
    pub rhs: Vec<f64>,
    pub defects: Vec<f64>,
    /// Per r: 5 × the propagated quadrature bound.
    pub tolerances: Vec<f64>,
    pub nodes_per_axis: usize,
    pub pass: bool,
}

pub fn gaussian_bm_verify(
    b0: &ConvexBody,
    b1: &ConvexBody,
    r_grid: &[f64],
    nodes_per_axis: usize,
) -> Result<GaussianBmReport> {
    check_r_grid(r_grid)?;
    for b in [b0, b1] {
        let (lo, hi) = b.bounding_box();
        if lo.iter().chain(&hi).any(|x| x.abs() > 8.0) {
            bail!(Verify, "gaussian_bm: bodies must lie within [-8, 8]^N");
        }
    }
    let g0 = b0.gaussian_volume(nodes_per_axis)?;
    let g1 = b1.gaussian_volume(nodes_per_axis)?;
    let results: Vec<Result<_>> = r_grid
        .par_iter()
        .map(|&r| minkowski_interpolate(b0, b1, r)?.gaussian_volume(nodes_per_axis))
        .collect();
    let mut gamma = Vec::new();
    let mut error_bounds = Vec::new();
    let mut rhs = Vec::new();
    let mut defects = Vec::new();
    let mut tolerances = Vec::new();
    for (res, &r) in results.into_iter().zip(r_grid) {
        let g = res?;
        let target = g0.value.powf(1.0 - r) * g1.value.powf(r);
        let rhs_err =
            target * ((1.0 - r) * g0.error_bound / g0.value + r * g1.error_bound / g1.value);
        gamma.push(g.value);
        error_bounds.push(g.error_bound);
        rhs.push(target);
        defects.push(g.value - target);
        tolerances.push(5.0 * (g.error_bound + rhs_err));
    }
    let pass = defects.iter().zip(&tolerances).all(|(d, t)| *d >= -t);
    Ok(GaussianBmReport {
        r_grid: r_grid.to_vec(),
        gamma,
        error_bounds,
        rhs,
        defects,
        tolerances,
        nodes_per_axis,
        pass,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LogConcavityOptions {
    /// Random pairs; small floor sets are checked exhaustively instead.
    pub pairs: usize,
    pub tol: f64,
    pub seed: u64,
    /// Relative positivity floor.
    pub floor: f64,
}

impl Default for LogConcavityOptions {
    fn default() -> Self {
        LogConcavityOptions {
            pairs: 20_000,
            tol: 1e-8,
            seed: crate::DEFAULT_SEED,
            floor: 1e-12,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LogConcavityReport {
    pub pairs: usize,
    /// Smallest `log u((x+y)/2) - (log u(x) + log u(y))/2`.
    pub worst_defect: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub worst_pair: Option<(Vec<f64>, Vec<f64>)>,
    /// Fraction of pairs with defect above 1e-12.
    pub strict_fraction: f64,
    /// Fraction of pairs with negative defect.
    pub negative_fraction: f64,
    /// Largest second difference of `log u` along grid lines.
    pub max_second_difference: f64,
    pub floor_nodes: usize,
    pub tol: f64,
    pub pass: bool,
}

/// Midpoint log-concavity of nonnegative samples on a grid box.
pub fn log_concavity_check(
    u: &BoxFunction,
    opts: &LogConcavityOptions,
) -> Result<LogConcavityReport> {
    if u.values.iter().any(|v| v.is_nan() || *v < 0.0) {
        bail!(Verify, "log_concavity: values must be nonnegative");
    }
    let g = &u.grid;
    let n = g.dim();
    let umax = u.max();
    let floor = opts.floor * umax;
    let in_floor = |v: f64| v > 0.0 && v >= floor;
    let set: Vec<usize> = (0..g.len()).filter(|&f| in_floor(u.values[f])).collect();
    if set.is_empty() {
        bail!(Verify, "log_concavity: empty positivity floor set");
    }

    let pair_defect = |fa: usize, fb: usize| -> Option<f64> {
        let ka = g.multi_index(fa);
        let kb = g.multi_index(fb);
        let um = if (0..n).all(|i| (ka[i] + kb[i]) % 2 == 0) {
            let mut km = [0usize; 3];
            for i in 0..n {
                km[i] = (ka[i] + kb[i]) / 2;
            }
            u.values[g.flat_index(&km[..n])]
        } else {
            let xa = g.coord(fa);
            let xb = g.coord(fb);
            let m: Vec<f64> = xa.iter().zip(&xb).map(|(a, b)| 0.5 * (a + b)).collect();
            if !u.cell_corner_values(&m)?.into_iter().all(in_floor) {
                return None;
            }
            u.interpolate(&m)?
        };
        if !in_floor(um) {
            return None;
        }
        Some(um.ln() - 0.5 * (u.values[fa].ln() + u.values[fb].ln()))
    };

    let exhaustive = set.len() * (set.len() - 1) / 2 <= opts.pairs;
    let candidates: Vec<(usize, usize)> = if exhaustive {
        let mut v = Vec::new();
        for i in 0..set.len() {
            for j in i + 1..set.len() {
                v.push((set[i], set[j]));
            }
        }
        v
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        (0..opts.pairs)
            .map(|_| {
                (
                    set[rng.random_range(0..set.len())],
                    set[rng.random_range(0..set.len())],
                )
            })
            .filter(|(a, b)| a != b)
            .collect()
    };
    let defects: Vec<(f64, usize, usize)> = candidates
        .par_iter()
        .filter_map(|&(a, b)| pair_defect(a, b).map(|d| (d, a, b)))
        .collect();
    let mut worst = f64::INFINITY;
    let mut worst_pair = None;
    let mut strict = 0usize;
    let mut negative = 0usize;
    for &(d, a, b) in &defects {
        if d < worst {
            worst = d;
            worst_pair = Some((g.coord(a), g.coord(b)));
        }
        if d > 1e-12 {
            strict += 1;
        }
        if d < 0.0 {
            negative += 1;
        }
    }

    let mut max_second = f64::NEG_INFINITY;
    for &f in &set {
        for i in 0..n {
            let mut e = [0isize; 3];
            e[i] = 1;
            let up = g.offset(f, &e[..n]);
            e[i] = -1;
            let down = g.offset(f, &e[..n]);
            if let (Some(p), Some(q)) = (up, down) {
                if in_floor(u.values[p]) && in_floor(u.values[q]) {
                    let d2 = u.values[p].ln() - 2.0 * u.values[f].ln() + u.values[q].ln();
                    max_second = max_second.max(d2);
                }
            }
        }
    }

    let count = defects.len();
    let pass = count > 0 && worst >= -opts.tol && max_second <= opts.tol;
    Ok(LogConcavityReport {
        pairs: count,
        worst_defect: if count > 0 { worst } else { 0.0 },
        worst_pair,
        strict_fraction: if count > 0 {
            strict as f64 / count as f64
        } else {
            0.0
        },
        negative_fraction: if count > 0 {
            negative as f64 / count as f64
        } else {
            0.0
        },
        max_second_difference: if max_second.is_finite() {
            max_second
        } else {
            0.0
        },
        floor_nodes: set.len(),
        tol: opts.tol,
        pass,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MarginalReport {
    pub axis: usize,
    pub joint: LogConcavityReport,
    /// Only computed when the joint audit passes.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub marginal: Option<LogConcavityReport>,
    pub pass: bool,
}

/// Integrates out `axis` of a 2D function and checks the 1D marginal.
pub fn marginal_logconcavity_check(
    f: &BoxFunction,
    axis: usize,
    opts: &LogConcavityOptions,
) -> Result<MarginalReport> {
    let g = &f.grid;
    if g.dim() != 2 || axis > 1 {
        bail!(Verify, "marginal check needs a 2D function and axis 0 or 1");
    }
    let joint = log_concavity_check(f, opts)?;
    if !joint.pass {
        return Ok(MarginalReport {
            axis,
            joint,
            marginal: None,
            pass: false,
        });
    }
    let keep = 1 - axis;
    let m = g.nodes[keep];
    let values: Vec<f64> = (0..m)
        .map(|j| {
            let mut s = 0.0;
            for i in 0..g.nodes[axis] {
                let mut k = [0usize; 2];
                k[axis] = i;
                k[keep] = j;
                let w = if i == 0 || i == g.nodes[axis] - 1 {
                    0.5
                } else {
                    1.0
                };
                s += w * f.values[g.flat_index(&k)];
            }
            s * g.spacing[axis]
        })
        .collect();
    let g1 = GridSpec::new(vec![g.origin[keep]], vec![g.spacing[keep]], vec![m])?;
    let marginal = log_concavity_check(&BoxFunction { grid: g1, values }, opts)?;
    let pass = marginal.pass;
    Ok(MarginalReport {
        axis,
        joint,
        marginal: Some(marginal),
        pass,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlReport {
    pub r: f64,
    pub pairs: usize,
    /// Smallest `h((1-r)x+ry) - f(x)^{1-r} g(y)^r` over the audited pairs.
    pub hypothesis_worst: f64,
    pub hypothesis_pass: bool,
    pub integral_f: f64,
    pub integral_g: f64,
    pub integral_h: f64,
    /// `(∫f)^{1-r} (∫g)^r`.
    pub conclusion_rhs: f64,
    pub quadrature_tol: f64,
    /// `None` when the hypothesis audit failed.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub conclusion_pass: Option<bool>,
    /// Width of the max-mollification applied to `h`, if any.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mollification: Option<f64>,
    pub tol: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlOptions {
    pub pairs: usize,
    pub tol: f64,
    pub seed: u64,
    /// Replace `h` by its maximum over one cell before interpolating.
    pub mollify: bool,
}

impl Default for PlOptions {
    fn default() -> Self {
        PlOptions {
            pairs: 20_000,
            tol: 1e-9,
            seed: crate::DEFAULT_SEED,
            mollify: false,
        }
    }
}

fn max_dilate(h: &BoxFunction) -> BoxFunction {
    let g = &h.grid;
    let n = g.dim();
    let values = (0..g.len())
        .map(|f| {
            let mut best = h.values[f];
            for mask in 0..3usize.pow(n as u32) {
                let mut off = [0isize; 3];
                let mut m = mask;
                for o in off.iter_mut().take(n) {
                    *o = (m % 3) as isize - 1;
                    m /= 3;
                }
                if let Some(q) = g.offset(f, &off[..n]) {
                    best = best.max(h.values[q]);
                }
            }
            best
        })
        .collect();
    BoxFunction {
        grid: g.clone(),
        values,
    }
}

/// Hypothesis audit and conclusion of the Prékopa-Leindler inequality.
pub fn prekopa_leindler_check(
    f: &BoxFunction,
    g: &BoxFunction,
    h: &BoxFunction,
    r: f64,
    opts: &PlOptions,
) -> Result<PlReport> {
    if !(0.0..=1.0).contains(&r) {
        bail!(Verify, "r = {r} outside [0, 1]");
    }
    for (name, u) in [("f", f), ("g", g), ("h", h)] {
        if u.values.iter().any(|v| v.is_nan() || *v < 0.0) {
            bail!(Verify, "prekopa_leindler: {name} has negative values");
        }
    }
    let n = f.grid.dim();
    if g.grid.dim() != n || h.grid.dim() != n {
        bail!(Verify, "prekopa_leindler: inputs have different dimensions");
    }
    let hm = if opts.mollify {
        max_dilate(h)
    } else {
        h.clone()
    };
    let fs: Vec<usize> = (0..f.grid.len()).filter(|&i| f.values[i] > 0.0).collect();
    let gs: Vec<usize> = (0..g.grid.len()).filter(|&i| g.values[i] > 0.0).collect();
    let pairs: Vec<(usize, usize)> = if fs.is_empty() || gs.is_empty() {
        Vec::new()
    } else if fs.len() * gs.len() <= opts.pairs {
        fs.iter()
            .flat_map(|&a| gs.iter().map(move |&b| (a, b)))
            .collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        (0..opts.pairs)
            .map(|_| {
                (
                    fs[rng.random_range(0..fs.len())],
                    gs[rng.random_range(0..gs.len())],
                )
            })
            .collect()
    };
    let worst = pairs
        .par_iter()
        .map(|&(a, b)| {
            let x = f.grid.coord(a);
            let y = g.grid.coord(b);
            let z: Vec<f64> = x
                .iter()
                .zip(&y)
                .map(|(p, q)| (1.0 - r) * p + r * q)
                .collect();
            let hv = hm.interpolate(&z).unwrap_or(0.0);
            hv - f.values[a].powf(1.0 - r) * g.values[b].powf(r)
        })
        .reduce(|| f64::INFINITY, f64::min);
    let hypothesis_pass = worst >= -opts.tol;

    let (i_f, i_g, i_h) = (f.integral(), g.integral(), h.integral());
    let rhs = i_f.powf(1.0 - r) * i_g.powf(r);
    let spacing = [&f.grid, &g.grid, &h.grid]
        .iter()
        .flat_map(|gr| gr.spacing.iter().copied())
        .fold(0.0, f64::max);
    let extent = [&f.grid, &g.grid, &h.grid]
        .iter()
        .flat_map(|gr| (0..n).map(|i| (gr.nodes[i] - 1) as f64 * gr.spacing[i]))
        .fold(0.0, f64::max);
    let quadrature_tol = 2.0 * spacing * (f.max() + g.max() + h.max()) * extent.powi(n as i32 - 1);
    let conclusion_pass = hypothesis_pass.then(|| i_h >= rhs - quadrature_tol);
    Ok(PlReport {
        r,
        pairs: pairs.len(),
        hypothesis_worst: if pairs.is_empty() { 0.0 } else { worst },
        hypothesis_pass,
        integral_f: i_f,
        integral_g: i_g,
        integral_h: i_h,
        conclusion_rhs: rhs,
        quadrature_tol,
        conclusion_pass,
        mollification: opts.mollify.then_some(spacing),
        tol: opts.tol,
        pass: conclusion_pass == Some(true),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ZOptions {
    pub t_list: Vec<f64>,
    pub r_grid: Vec<f64>,
    pub cells: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spacing: Option<Vec<f64>>,
    /// Eigenvalues per body.
    pub k: usize,
    pub solver_tol: f64,
    pub c_disc: f64,
    pub seed: u64,
}

impl Default for ZOptions {
    fn default() -> Self {
        ZOptions {
            t_list: vec![0.25, 0.5, 1.0],
            r_grid: vec![0.0, 0.25, 0.5, 0.75, 1.0],
            cells: 48,
            spacing: None,
            k: 16,
            solver_tol: 1e-9,
            c_disc: DEFAULT_C_DISC,
            seed: crate::DEFAULT_SEED,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ZRow {
    pub t: f64,
    /// `Z(r, t)` per r.
    pub z: Vec<f64>,
    /// Truncation bound per r.
    pub trunc_bound: Vec<f64>,
    /// Midpoint concavity defects of `log Z` per consecutive triple.
    pub defects: Vec<f64>,
    pub tol: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ZReport {
    pub r_grid: Vec<f64>,
    /// Eigenvalues per r.
    pub eigenvalues: Vec<Vec<f64>>,
    pub rows: Vec<ZRow>,
    pub order: u32,
    pub grid: GridSpec,
    pub warnings: Vec<String>,
    pub pass: bool,
}

/// Log-concavity of `r ↦ Z(r, t)` from truncated spectra.
pub fn z_logconcavity_verify(
    b0: &ConvexBody,
    b1: &ConvexBody,
    a: &Matrix,
    v: &Potential,
    opts: &ZOptions,
) -> Result<ZReport> {
    check_r_grid(&opts.r_grid)?;
    if opts.t_list.is_empty() || opts.t_list.iter().any(|t| !(*t > 0.0)) {
        bail!(Verify, "t_list must hold positive times");
    }
    v.validate()?;
    let v = v.resolve()?;
    let grid = sweep_grid(b0, b1, opts.cells, opts.spacing.as_deref())?;
    let bodies: Vec<ConvexBody> = opts
        .r_grid
        .iter()
        .map(|&r| minkowski_interpolate(b0, b1, r))
        .collect::<Result<_>>()?;
    let order = if bodies.iter().all(axis_aligned) {
        2
    } else {
        1
    };
    let eopts = EigenOptions {
        tol: opts.solver_tol,
        seed: opts.seed,
        ..EigenOptions::default()
    };
    let spectra: Vec<Vec<f64>> = bodies
        .par_iter()
        .map(|b| {
            let op = assemble(b, a, &v, &grid)?;
            let k = opts.k.min(op.len());
            Ok(smallest_eigenpairs(&op, k, &eopts)?.eigenvalues)
        })
        .collect::<Result<_>>()?;
    let h = grid.spacing.iter().copied().fold(0.0, f64::max);
    let l0 = spectra[0][0].abs();
    let disc = opts.c_disc * h.powi(order as i32) * l0;
    let mut warnings = Vec::new();
    let mut rows = Vec::new();
    for &t in &opts.t_list {
        let mut z = Vec::new();
        let mut trunc = Vec::new();
        let mut trunc_rel: f64 = 0.0;
        for (s, r) in spectra.iter().zip(&opts.r_grid) {
            let est = partition_function_spectral(s, t)?;
            if let Some(w) = &est.warning {
                warnings.push(format!("t = {t}, r = {r}: {w}"));
            }
            trunc_rel = trunc_rel.max(est.error_estimate / est.value);
            z.push(est.value);
            trunc.push(est.error_estimate);
        }
        let logz: Vec<f64> = z.iter().map(|x| x.ln()).collect();
        let defects: Vec<f64> = midpoint_defects(&opts.r_grid, &logz)
            .iter()
            .map(|d| -d)
            .collect();
        let lk = spectra
            .iter()
            .map(|s| s.last().unwrap().abs())
            .fold(0.0, f64::max);
        let tol = t * (5.0 * opts.solver_tol * lk.max(1.0)).max(disc) + 2.0 * trunc_rel;
        let pass = defects.iter().all(|d| *d >= -tol);
        rows.push(ZRow {
            t,
            z,
            trunc_bound: trunc,
            defects,
            tol,
            pass,
        });
    }
    let pass = rows.iter().all(|r| r.pass);
    Ok(ZReport {
        r_grid: opts.r_grid.clone(),
        eigenvalues: spectra,
        rows,
        order,
        grid,
        warnings,
        pass,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GroundStateOptions {
    pub eigen: EigenOptions,
    pub pairs: usize,
    /// Tolerance relative to the range of `log ψ₁` over the audited nodes.
    pub rel_tol: f64,
    pub seed: u64,
}

impl Default for GroundStateOptions {
    fn default() -> Self {
        GroundStateOptions {
            eigen: EigenOptions::default(),
            pairs: 20_000,
            rel_tol: 1e-6,
            seed: crate::DEFAULT_SEED,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroundStateReport {
    pub lambda1: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gap: Option<f64>,
    pub min_psi: f64,
    pub positive: bool,
    /// Interior nodes left out of the audit because a stencil neighbour lies
    /// outside the body.
    pub boundary_layer_nodes: usize,
    pub log_concavity: LogConcavityReport,
    /// Check of `e^{φ}ψ₁` for Kolmogorov potentials.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kolmogorov: Option<LogConcavityReport>,
    pub pass: bool,
}

/// Tolerance `rel·|log range|` over the positive values of `u`.
pub fn log_range_tol(values: &[f64], rel: f64) -> f64 {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for v in values.iter().filter(|v| **v > 0.0) {
        lo = lo.min(v.ln());
        hi = hi.max(v.ln());
    }
    if lo.is_finite() {
        rel * (hi - lo).max(1.0)
    } else {
        rel
    }
}

/// Box samples of `u` on stencil-complete nodes, zero elsewhere. Next to a
/// curved or oblique boundary the discrete domain is a staircase, which is
/// not convex, so the audit skips that layer.
pub fn stencil_core(u: &GridFunction) -> (BoxFunction, usize) {
    let lat = &u.lattice;
    let n = lat.dim();
    let mut b = u.to_box();
    let mut dropped = 0;
    for i in 0..lat.len() {
        let complete = (0..n).all(|ax| {
            let mut e = [0isize; 3];
            e[ax] = 1;
            let up = lat.neighbour(i, &e[..n]).is_some();
            e[ax] = -1;
            up && lat.neighbour(i, &e[..n]).is_some()
        });
        if !complete {
            b.values[lat.interior[i]] = 0.0;
            dropped += 1;
        }
    }
    (b, dropped)
}

/// Solves `ψ₁` and checks positivity and log-concavity; with `weight`,
/// also checks `e^{φ}ψ₁`.
pub fn ground_state_logconcavity_verify(
    body: &ConvexBody,
    a: &Matrix,
    v: &Potential,
    grid: &GridSpec,
    opts: &GroundStateOptions,
    weight: Option<&GroundStateWeight>,
) -> Result<(GroundStateReport, Spectrum)> {
    v.validate()?;
    let op = assemble(body, a, v, grid)?;
    let spec = smallest_eigenpairs(&op, 2.min(op.len()), &opts.eigen)?;
    let psi = spec.ground_state();
    let min_psi = psi.min();
    let audit = |u: &GridFunction| -> Result<(LogConcavityReport, usize)> {
        let (core, dropped) = stencil_core(u);
        let lopts = LogConcavityOptions {
            pairs: opts.pairs,
            tol: log_range_tol(&core.values, opts.rel_tol),
            seed: opts.seed,
            ..LogConcavityOptions::default()
        };
        Ok((log_concavity_check(&core, &lopts)?, dropped))
    };
    let (report, dropped) = audit(psi)?;
    let kolmogorov = match weight {
        Some(w) => {
            let vals: Vec<f64> = psi
                .values
                .iter()
                .enumerate()
                .map(|(i, p)| p * w.phi(&op.lattice.coord(i)).exp())
                .collect();
            let g = GridFunction::new(op.lattice.clone(), vals)
                .map_err(|e| Error::Verify(e.to_string()))?;
            Some(audit(&g)?.0)
        }
        None => None,
    };
    let positive = min_psi > 0.0;
    let pass = positive && report.pass && kolmogorov.as_ref().is_none_or(|k| k.pass);
    Ok((
        GroundStateReport {
            lambda1: spec.lambda1(),
            gap: spec.gap(),
            min_psi,
            positive,
            boundary_layer_nodes: dropped,
            log_concavity: report,
            kolmogorov,
            pass,
        },
        spec,
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HardyReport {
    /// `∫ u²/|x-x0|²`, integrand capped at `4/h²`.
    pub lhs: f64,
    /// `(2/(N-2))² ∫|∇u|²`.
    pub rhs: f64,
    pub ratio: f64,
    pub cap: f64,
    pub pass: bool,
}

/// Classical Hardy inequality on a grid box (N = 3).
pub fn hardy_check(u: &BoxFunction, x0: &[f64]) -> Result<HardyReport> {
    let g = &u.grid;
    let n = g.dim();
    if n < 3 {
        bail!(Verify, "hardy_check needs N ≥ 3, got {n}");
    }
    if x0.len() != n {
        bail!(Verify, "x0 has dimension {}, grid has {n}", x0.len());
    }
    let hmin = g.min_spacing();
    let cap = crate::operator::CAP_FACTOR / (hmin * hmin);
    let weight = Potential::InverseSquare {
        strength: 1.0,
        x0: x0.to_vec(),
        cap: Some(cap),
    };
    let cell = g.cell_volume();
    let mut lhs = 0.0;
    let mut grad = 0.0;
    for f in 0..g.len() {
        let uf = u.values[f];
        lhs += weight.evaluate(&g.coord(f)) * uf * uf;
        for i in 0..n {
            let mut e = [0isize; 3];
            e[i] = 1;
            let up = g.offset(f, &e[..n]).map_or(0.0, |q| u.values[q]);
            e[i] = -1;
            let dn = g.offset(f, &e[..n]).map_or(0.0, |q| u.values[q]);
            let d = (up - dn) / (2.0 * g.spacing[i]);
            grad += d * d;
        }
    }
    lhs *= cell;
    let c = 2.0 / (n as f64 - 2.0);
    let rhs = c * c * grad * cell;
    if !(rhs > 0.0) {
        bail!(
            Verify,
            "hardy_check: test function has zero gradient energy"
        );
    }
    let ratio = lhs / rhs;
    Ok(HardyReport {
        lhs,
        rhs,
        ratio,
        cap,
        pass: lhs <= rhs * (1.0 + 5e-2),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn interval(a: f64, b: f64) -> ConvexBody {
        ConvexBody::interval(a, b).unwrap()
    }

    fn square(lo: f64, hi: f64) -> ConvexBody {
        ConvexBody::aabb(&[lo, lo], &[hi, hi]).unwrap()
    }

    #[test]
    fn identical_bodies_have_zero_defects() {
        let b = square(0.0, 1.0);
        let opts = BmOptions {
            cells: 24,
            ..BmOptions::default()
        };
        let rep = bm_eigen_verify(&b, &b, &Matrix::identity(2), &Potential::Zero, &opts).unwrap();
        assert!(rep.pass);
        for d in rep.chord_defects.iter().chain(&rep.midpoint_defects) {
            assert!(d.abs() <= rep.tol);
        }
    }

    #[test]
    fn interval_family_matches_analytic_curve() {
        let opts = BmOptions {
            cells: 256,
            ..BmOptions::default()
        };
        let rep = bm_eigen_verify(
            &interval(0.0, 1.0),
            &interval(0.0, 2.0),
            &Matrix::identity(1),
            &Potential::Zero,
            &opts,
        )
        .unwrap();
        assert!(rep.pass);
        assert_eq!(rep.order, 2);
        let h = rep.grid.spacing[0];
        let mut calib: f64 = 0.0;
        for (r, l) in rep.r_grid.iter().zip(&rep.lambda1) {
            let exact = PI * PI / (1.0 + r).powi(2);
            assert!((l - exact).abs() <= 1e-3 * exact);
            calib = calib.max((l - exact).abs() / (h * h * rep.lambda1[0]));
        }
        assert!(calib <= DEFAULT_C_DISC, "calibration constant {calib}");
        let i = rep.r_grid.iter().position(|r| *r == 0.5).unwrap();
        let want = PI * PI * (0.625 - 1.0 / 2.25);
        assert!((rep.chord_defects[i] - want).abs() < 5e-3);
    }

    #[test]
    fn constant_shift_leaves_defects_unchanged() {
        let b0 = square(0.0, 1.0);
        let b1 = ConvexBody::aabb(&[0.0, 0.0], &[1.5, 1.0]).unwrap();
        let opts = BmOptions {
            cells: 24,
            ..BmOptions::default()
        };
        let a = Matrix::identity(2);
        let v = Potential::oscillator(2, 1.0);
        let r0 = bm_eigen_verify(&b0, &b1, &a, &v, &opts).unwrap();
        let r1 = bm_eigen_verify(&b0, &b1, &a, &v.shifted(2, 3.0).unwrap(), &opts).unwrap();
        for i in 0..r0.lambda1.len() {
            assert!((r1.lambda1[i] - r0.lambda1[i] - 3.0).abs() < 1e-7);
            assert!((r1.chord_defects[i] - r0.chord_defects[i]).abs() < 1e-7);
        }
    }

    #[test]
    fn diagonal_affine_map_preserves_chord_defects() {
        let b0 =
            ConvexBody::polytope(vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let b1 = square(0.0, 1.0);
        let a = Matrix::from_rows(&[vec![1.0, 0.2], vec![0.2, 0.9]]).unwrap();
        let v = Potential::Quadratic {
            q: Matrix::from_rows(&[vec![0.5, 0.1], vec![0.1, 0.3]]).unwrap(),
            c: vec![0.4, 0.3],
            d: 0.0,
        };
        let h = 1.0 / 20.0;
        let opts = BmOptions {
            spacing: Some(vec![h, h]),
            ..BmOptions::default()
        };
        let rep = bm_eigen_verify(&b0, &b1, &a, &v, &opts).unwrap();

        let s = [2.0, 0.5];
        let shift = [3.0 * 2.0 * h, -5.0 * 0.5 * h];
        let t = Matrix::diagonal(&s);
        let ta = Matrix(&t.0 * &a.0 * t.0.transpose());
        let tinv = t.inverse().unwrap();
        let Potential::Quadratic { q, c, d } = &v else {
            unreachable!()
        };
        let v2 = Potential::Quadratic {
            q: Matrix(tinv.0.transpose() * &q.0 * &tinv.0),
            c: t.mul_vec(c)
                .iter()
                .zip(&shift)
                .map(|(x, y)| x + y)
                .collect(),
            d: *d,
        };
        let opts2 = BmOptions {
            spacing: Some(vec![s[0] * h, s[1] * h]),
            ..BmOptions::default()
        };
        let rep2 = bm_eigen_verify(
            &b0.affine_image(&t, &shift).unwrap(),
            &b1.affine_image(&t, &shift).unwrap(),
            &ta,
            &v2,
            &opts2,
        )
        .unwrap();
        for (x, y) in rep.chord_defects.iter().zip(&rep2.chord_defects) {
            assert!(
                (x - y).abs() <= 2.0 * opts.solver_tol * rep.lambda1[0].max(1.0) * 10.0,
                "{x} vs {y}"
            );
        }
    }

    #[test]
    fn volume_bm_examples() {
        let tri =
            ConvexBody::polytope(vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let tri2 =
            ConvexBody::polytope(vec![vec![0.0, 0.0], vec![2.0, 0.0], vec![0.0, 2.0]]).unwrap();
        let r = [0.0, 0.25, 0.5, 0.75, 1.0];
        let rep = volume_bm_verify(&tri, &tri2, &r).unwrap();
        assert!(rep.pass && rep.defects.iter().all(|d| d.abs() <= 1e-10));
        let rep = volume_bm_verify(&interval(0.0, 1.0), &interval(2.0, 4.0), &r).unwrap();
        assert!(rep.defects.iter().all(|d| d.abs() <= 1e-12));
        let rep = volume_bm_verify(&tri, &square(0.0, 1.0), &r).unwrap();
        assert!(rep.pass && rep.defects[2] > 1e-3);
    }

    #[test]
    fn gaussian_bm_examples() {
        let b0 = square(-1.0, 1.0);
        let b1 = ConvexBody::aabb(&[-2.0, -1.0], &[0.0, 1.0]).unwrap();
        let rep = gaussian_bm_verify(&b0, &b1, &[0.0, 0.5, 1.0], 128).unwrap();
        assert!(rep.pass);
        assert!(rep.defects[1] > rep.tolerances[1]);
        let same = gaussian_bm_verify(&b0, &b0, &[0.0, 0.5, 1.0], 64).unwrap();
        assert!(same.pass && same.defects.iter().all(|d| d.abs() < 1e-12));
        let shifted = ConvexBody::aabb(&[0.5, -0.5], &[2.5, 1.5]).unwrap();
        assert!(
            gaussian_bm_verify(&b0, &shifted, &[0.0, 0.25, 0.5, 0.75, 1.0], 128)
                .unwrap()
                .pass
        );
        assert!(gaussian_bm_verify(&b0, &square(5.0, 9.0), &[0.0, 1.0], 64).is_err());
    }

    fn line(lo: f64, hi: f64, nodes: usize, f: impl Fn(f64) -> f64) -> BoxFunction {
        let h = (hi - lo) / (nodes - 1) as f64;
        BoxFunction::from_fn(
            GridSpec::new(vec![lo], vec![h], vec![nodes]).unwrap(),
            |x| f(x[0]),
        )
    }

    #[test]
    fn log_concavity_examples() {
        let opts = LogConcavityOptions::default();
        let sine = line(0.0, 1.0, 65, |x| (PI * x).sin());
        let rep = log_concavity_check(&sine, &opts).unwrap();
        assert!(rep.pass);
        assert!(rep.max_second_difference < 0.0);
        let gauss = line(-2.0, 2.0, 81, |x| (-x * x).exp());
        let rep = log_concavity_check(&gauss, &opts).unwrap();
        assert!(rep.pass);
        let bad = line(-1.0, 1.0, 41, |x| x * x + 0.1);
        let rep = log_concavity_check(&bad, &opts).unwrap();
        assert!(!rep.pass);
        let d = 0.1f64.ln() - 0.35f64.ln();
        assert!(rep.worst_defect <= d + 1e-12);
        assert!(log_concavity_check(&line(0.0, 1.0, 9, |_| 0.0), &opts).is_err());
    }

    #[test]
    fn marginal_examples() {
        let opts = LogConcavityOptions {
            pairs: 20_000,
            ..LogConcavityOptions::default()
        };
        let g = GridSpec::new(vec![-2.0, -2.0], vec![0.0625, 0.0625], vec![65, 65]).unwrap();
        let prod = BoxFunction::from_fn(g.clone(), |x| (-x[0] * x[0] - x[1] * x[1]).exp());
        let rep = marginal_logconcavity_check(&prod, 1, &opts).unwrap();
        assert!(rep.pass);
        let corr = BoxFunction::from_fn(g, |x| (-x[0] * x[0] - x[0] * x[1] - x[1] * x[1]).exp());
        let rep = marginal_logconcavity_check(&corr, 1, &opts).unwrap();
        assert!(rep.pass);
        // Marginal of exp(-x²-xy-y²) over y is ∝ exp(-3x²/4).
        let tri =
            ConvexBody::polytope(vec![vec![-1.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let gt = GridSpec::new(vec![-1.25, -0.25], vec![0.03125, 0.03125], vec![81, 49]).unwrap();
        let ind = BoxFunction::from_fn(gt, |x| if tri.contains(x, -1e-12) { 1.0 } else { 0.0 });
        let rep = marginal_logconcavity_check(&ind, 1, &opts).unwrap();
        assert!(rep.pass, "{rep:?}");
    }

    #[test]
    fn prekopa_leindler_examples() {
        let grid = GridSpec::new(vec![-3.0], vec![0.01], vec![801]).unwrap();
        let bump = BoxFunction::from_fn(grid.clone(), |x| (-x[0] * x[0]).exp());
        let rep = prekopa_leindler_check(&bump, &bump, &bump, 0.5, &PlOptions::default()).unwrap();
        assert!(rep.pass);
        assert!((rep.integral_h - rep.conclusion_rhs).abs() < 1e-12);

        let ind = |a: f64, b: f64| {
            BoxFunction::from_fn(grid.clone(), move |x| {
                if x[0] >= a - 1e-12 && x[0] <= b + 1e-12 {
                    1.0
                } else {
                    0.0
                }
            })
        };
        let opts = PlOptions {
            mollify: true,
            ..PlOptions::default()
        };
        let rep =
            prekopa_leindler_check(&ind(0.0, 1.0), &ind(2.0, 4.0), &ind(1.0, 2.5), 0.5, &opts)
                .unwrap();
        assert!(rep.hypothesis_pass);
        assert!((rep.integral_h - 1.5).abs() < 0.02);
        assert!((rep.conclusion_rhs - 2f64.sqrt()).abs() < 0.02);
        assert!(rep.pass);
        assert_eq!(rep.mollification, Some(0.01));

        let zero = BoxFunction::from_fn(grid, |_| 0.0);
        let rep = prekopa_leindler_check(&bump, &bump, &zero, 0.5, &PlOptions::default()).unwrap();
        assert!(!rep.hypothesis_pass && rep.conclusion_pass.is_none() && !rep.pass);
    }

    #[test]
    fn z_interval_family_is_log_concave() {
        let opts = ZOptions {
            t_list: vec![0.5],
            cells: 128,
            k: 8,
            ..ZOptions::default()
        };
        let rep = z_logconcavity_verify(
            &interval(0.0, 1.0),
            &interval(0.0, 2.0),
            &Matrix::identity(1),
            &Potential::Zero,
            &opts,
        )
        .unwrap();
        assert!(rep.pass);
        for (i, r) in rep.r_grid.iter().enumerate() {
            let exact: f64 = (1..=8)
                .map(|k| (-0.5 * PI * PI * (k * k) as f64 / (1.0 + r).powi(2)).exp())
                .sum();
            assert!((rep.rows[0].z[i] - exact).abs() <= 1e-3 * exact);
        }
        assert!(rep.rows[0].defects.iter().all(|d| *d >= 0.0));
    }

    #[test]
    fn ground_state_of_interval_is_log_concave() {
        let body = interval(0.0, 1.0);
        let grid = GridSpec::covering(&[0.0], &[1.0], &[1.0 / 128.0], 1).unwrap();
        let (rep, _) = ground_state_logconcavity_verify(
            &body,
            &Matrix::identity(1),
            &Potential::Zero,
            &grid,
            &GroundStateOptions::default(),
            None,
        )
        .unwrap();
        assert!(rep.pass && rep.positive);
        assert_eq!(rep.boundary_layer_nodes, 2);
        assert_eq!(rep.log_concavity.floor_nodes, 125);
    }

    #[test]
    fn staircase_layer_is_left_out_of_ground_state_audit() {
        let disk = ConvexBody::ball(vec![0.0, 0.0], 1.0).unwrap();
        let grid = GridSpec::for_body(&disk, 48).unwrap();
        let (rep, spec) = ground_state_logconcavity_verify(
            &disk,
            &Matrix::identity(2),
            &Potential::Zero,
            &grid,
            &GroundStateOptions::default(),
            None,
        )
        .unwrap();
        assert!(rep.pass && rep.boundary_layer_nodes > 0);
        let full = log_concavity_check(
            &spec.ground_state().to_box(),
            &LogConcavityOptions::default(),
        )
        .unwrap();
        assert!(full.max_second_difference > 1e-2);
    }

    #[test]
    fn hardy_examples() {
        let g = GridSpec::new(vec![-1.125; 3], vec![1.0 / 16.0; 3], vec![37; 3]).unwrap();
        let x0 = [1.0 / 32.0; 3];
        let bump = BoxFunction::from_fn(g.clone(), |x| {
            let r2: f64 = x.iter().map(|c| c * c).sum();
            (1.0 - r2).max(0.0).powi(2)
        });
        let rep = hardy_check(&bump, &x0).unwrap();
        assert!(rep.pass);
        // Radial oracle: ∫(1-r²)⁴dr / (4·16∫r⁴(1-r²)²dr) = (128/315)/(512/315).
        assert!((rep.ratio - 0.25).abs() < 0.02, "{}", rep.ratio);
        let g2 = GridSpec::new(vec![-1.0, -1.0], vec![0.25, 0.25], vec![9, 9]).unwrap();
        assert!(hardy_check(&BoxFunction::from_fn(g2, |_| 1.0), &[0.0, 0.0]).is_err());
    }

    /// Radial ratio for `u = r^a (1-r²)²` in 3D, by Simpson after `r = s⁵`.
    fn hardy_radial_ratio(a: f64) -> f64 {
        let n = 20000;
        let simpson = |f: &dyn Fn(f64) -> f64| {
            let h = 1.0 / n as f64;
            // Both integrands vanish at s = 0 once the substitution is applied.
            let mut acc = f(1.0);
            for i in 1..n {
                acc += if i % 2 == 1 { 4.0 } else { 2.0 } * f(i as f64 * h);
            }
            acc * h / 3.0
        };
        let lhs = simpson(&|s| {
            let r = s.powi(5);
            5.0 * s.powi(4) * r.powf(2.0 * a) * (1.0 - r * r).powi(4)
        });
        let grad = simpson(&|s| {
            let r = s.powi(5);
            let w = (1.0 - r * r).powi(2);
            let du = a * w - 4.0 * r * r * (1.0 - r * r);
            5.0 * s.powi(4) * r.powf(2.0 * a) * du * du
        });
        lhs / (4.0 * grad)
    }

    #[test]
    fn hardy_ratio_rises_towards_extremal_profile() {
        // The profile singularity limits convergence to about h^{2ε}.
        let x0 = [0.0; 3];
        let ratio = |a: f64, cells: usize| {
            // x0 sits at a cell centre on every grid.
            let h = 1.0 / cells as f64;
            let g = GridSpec::new(
                vec![-1.125 - 0.5 * h; 3],
                vec![h; 3],
                vec![(2.25 * cells as f64) as usize + 2; 3],
            )
            .unwrap();
            let u = BoxFunction::from_fn(g, |x| {
                let r2: f64 = x.iter().map(|c| c * c).sum();
                r2.powf(0.5 * a) * (1.0 - r2).max(0.0).powi(2)
            });
            let rep = hardy_check(&u, &x0).unwrap();
            assert!(rep.pass);
            rep.ratio
        };
        let mut prev = 0.0;
        for eps in [0.4, 0.3, 0.2] {
            let a = eps - 0.5;
            let oracle = hardy_radial_ratio(a);
            let (coarse, fine) = (ratio(a, 32), ratio(a, 64));
            assert!(fine > prev);
            let (ec, ef) = (oracle - coarse, oracle - fine);
            assert!(
                ef > 0.0 && ef < 2f64.powf(-eps) * ec,
                "eps {eps}: {coarse} {fine} vs {oracle}"
            );
            prev = fine;
        }
    }
}
