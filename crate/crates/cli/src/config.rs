//! Run configurations. Every struct rejects unknown fields; defaults are
//! filled in on load and echoed back in the report.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use spectral_bm_core::grid::{BoxFunction, GridSpec};
use spectral_bm_core::semigroup::BoundaryTreatment;
use spectral_bm_core::{ConvexBody, KolmogorovData, Matrix, Potential, DEFAULT_SEED};

use crate::error::CliError;

thread_local! {
    static BASE_DIR: std::cell::RefCell<PathBuf> = std::cell::RefCell::new(PathBuf::from("."));
}

/// A body given inline or as a path (relative to the config file) to a JSON
/// body spec. Always echoed inline.
#[derive(Debug, Clone)]
pub struct BodyRef(pub ConvexBody);

impl<'de> Deserialize<'de> for BodyRef {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        use serde::de::Error;
        let value = serde_json::Value::deserialize(d)?;
        let value = match value {
            serde_json::Value::String(p) => {
                let path = BASE_DIR.with(|b| b.borrow().join(&p));
                let text = std::fs::read_to_string(&path)
                    .map_err(|e| D::Error::custom(format!("{}: {e}", path.display())))?;
                serde_json::from_str(&text)
                    .map_err(|e| D::Error::custom(format!("{}: {e}", path.display())))?
            }
            v => v,
        };
        ConvexBody::deserialize(value)
            .map(BodyRef)
            .map_err(D::Error::custom)
    }
}

impl Serialize for BodyRef {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.0.serialize(s)
    }
}

/// Nonnegative test functions sampled on a grid box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FunctionSpec {
    Constant {
        value: f64,
    },
    /// `exp(-(x-c)ᵀP(x-c))`.
    Gaussian {
        center: Vec<f64>,
        precision: Matrix,
    },
    Indicator {
        body: BodyRef,
    },
    /// `(1 - |x-c|²/R²)₊²`.
    Bump {
        center: Vec<f64>,
        radius: f64,
    },
    /// `|x-x0|^{-1/2+eps} (1 - |x-x0|²/R²)₊²`.
    HardyProfile {
        x0: Vec<f64>,
        eps: f64,
        radius: f64,
    },
    /// Values in grid order (axis 0 fastest).
    Samples {
        values: Vec<f64>,
    },
}

impl PartialEq for BodyRef {
    fn eq(&self, other: &Self) -> bool {
        serde_json::to_value(self).ok() == serde_json::to_value(other).ok()
    }
}

fn dist2(x: &[f64], c: &[f64]) -> f64 {
    x.iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum()
}

impl FunctionSpec {
    pub fn sample(&self, grid: &GridSpec, field: &str) -> Result<BoxFunction, CliError> {
        let n = grid.dim();
        let dim_ok = |v: &[f64], what: &str| {
            if v.len() == n {
                Ok(())
            } else {
                Err(CliError::config(
                    format!("{field}.{what}"),
                    format!("has dimension {}, grid has {n}", v.len()),
                ))
            }
        };
        let f = match self {
            FunctionSpec::Constant { value } => {
                if *value < 0.0 {
                    return Err(CliError::config(
                        format!("{field}.value"),
                        "must be nonnegative",
                    ));
                }
                BoxFunction::from_fn(grid.clone(), |_| *value)
            }
            FunctionSpec::Gaussian { center, precision } => {
                dim_ok(center, "center")?;
                if precision.nrows() != n || !precision.is_square() {
                    return Err(CliError::config(
                        format!("{field}.precision"),
                        format!("must be {n}×{n}"),
                    ));
                }
                BoxFunction::from_fn(grid.clone(), |x| {
                    let d: Vec<f64> = x.iter().zip(center).map(|(a, b)| a - b).collect();
                    (-precision.quad_form(&d)).exp()
                })
            }
            FunctionSpec::Indicator { body } => {
                if body.0.dim() != n {
                    return Err(CliError::config(
                        format!("{field}.body"),
                        format!("has dimension {}, grid has {n}", body.0.dim()),
                    ));
                }
                BoxFunction::from_fn(grid.clone(), |x| {
                    if body.0.contains(x, -1e-12) {
                        1.0
                    } else {
                        0.0
                    }
                })
            }
            FunctionSpec::Bump { center, radius } => {
                dim_ok(center, "center")?;
                BoxFunction::from_fn(grid.clone(), |x| {
                    (1.0 - dist2(x, center) / (radius * radius))
                        .max(0.0)
                        .powi(2)
                })
            }
            FunctionSpec::HardyProfile { x0, eps, radius } => {
                dim_ok(x0, "x0")?;
                BoxFunction::from_fn(grid.clone(), |x| {
                    let r2 = dist2(x, x0);
                    if r2 == 0.0 {
                        0.0
                    } else {
                        r2.powf(0.5 * (eps - 0.5)) * (1.0 - r2 / (radius * radius)).max(0.0).powi(2)
                    }
                })
            }
            FunctionSpec::Samples { values } => {
                if values.len() != grid.len() {
                    return Err(CliError::config(
                        format!("{field}.values"),
                        format!(
                            "has {} entries, grid has {} nodes",
                            values.len(),
                            grid.len()
                        ),
                    ));
                }
                if values.iter().any(|v| !(*v >= 0.0)) {
                    return Err(CliError::config(
                        format!("{field}.values"),
                        "must be nonnegative",
                    ));
                }
                BoxFunction {
                    grid: grid.clone(),
                    values: values.clone(),
                }
            }
        };
        Ok(f)
    }

    /// Pointwise value, for Feynman-Kac payoffs.
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            FunctionSpec::Constant { value } => *value,
            FunctionSpec::Gaussian { center, precision } => {
                let d: Vec<f64> = x.iter().zip(center).map(|(a, b)| a - b).collect();
                (-precision.quad_form(&d)).exp()
            }
            FunctionSpec::Indicator { body } => {
                if body.0.contains(x, -1e-12) {
                    1.0
                } else {
                    0.0
                }
            }
            FunctionSpec::Bump { center, radius } => (1.0 - dist2(x, center) / (radius * radius))
                .max(0.0)
                .powi(2),
            FunctionSpec::HardyProfile { x0, eps, radius } => {
                let r2 = dist2(x, x0);
                if r2 == 0.0 {
                    0.0
                } else {
                    r2.powf(0.5 * (eps - 0.5)) * (1.0 - r2 / (radius * radius)).max(0.0).powi(2)
                }
            }
            FunctionSpec::Samples { .. } => f64::NAN,
        }
    }
}

fn seed() -> u64 {
    DEFAULT_SEED
}
fn r_grid() -> Vec<f64> {
    vec![0.0, 0.25, 0.5, 0.75, 1.0]
}
fn cells() -> usize {
    64
}
fn one() -> usize {
    1
}
fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EigConfig {
    pub body: BodyRef,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<Matrix>,
    #[serde(default)]
    pub potential: Potential,
    #[serde(default = "cells")]
    pub cells: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSpec>,
    #[serde(default = "one")]
    pub k: usize,
    #[serde(default = "solver_tol_fine")]
    pub tol: f64,
    #[serde(default = "max_outer")]
    pub max_outer: usize,
    #[serde(default = "seed")]
    pub seed: u64,
}

fn solver_tol_fine() -> f64 {
    1e-10
}
fn max_outer() -> usize {
    500
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BmConfig {
    pub b0: BodyRef,
    pub b1: BodyRef,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<Matrix>,
    #[serde(default)]
    pub potential: Potential,
    #[serde(default = "r_grid")]
    pub r_grid: Vec<f64>,
    #[serde(default = "cells")]
    pub cells: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spacing: Option<Vec<f64>>,
    #[serde(default = "solver_tol")]
    pub solver_tol: f64,
    #[serde(default = "c_disc")]
    pub c_disc: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(default = "seed")]
    pub seed: u64,
}

fn solver_tol() -> f64 {
    1e-9
}
fn c_disc() -> f64 {
    spectral_bm_core::verify::DEFAULT_C_DISC
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VolBmConfig {
    pub b0: BodyRef,
    pub b1: BodyRef,
    #[serde(default = "r_grid")]
    pub r_grid: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussBmConfig {
    pub b0: BodyRef,
    pub b1: BodyRef,
    #[serde(default = "r_grid")]
    pub r_grid: Vec<f64>,
    #[serde(default = "nodes_per_axis")]
    pub nodes_per_axis: usize,
}

fn nodes_per_axis() -> usize {
    128
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarginalConfig {
    pub grid: GridSpec,
    pub function: FunctionSpec,
    pub axis: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlConfig {
    pub grid: GridSpec,
    pub f: FunctionSpec,
    pub g: FunctionSpec,
    pub h: FunctionSpec,
    #[serde(default = "half")]
    pub r: f64,
    #[serde(default = "pairs")]
    pub pairs: usize,
    #[serde(default = "pl_tol")]
    pub tol: f64,
    #[serde(default)]
    pub mollify: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub marginal: Option<MarginalConfig>,
    #[serde(default = "seed")]
    pub seed: u64,
}

fn half() -> f64 {
    0.5
}
fn pairs() -> usize {
    20_000
}
fn pl_tol() -> f64 {
    1e-9
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ZConfig {
    pub b0: BodyRef,
    pub b1: BodyRef,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<Matrix>,
    #[serde(default)]
    pub potential: Potential,
    #[serde(default = "t_list")]
    pub t_list: Vec<f64>,
    #[serde(default = "r_grid")]
    pub r_grid: Vec<f64>,
    #[serde(default = "z_cells")]
    pub cells: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spacing: Option<Vec<f64>>,
    #[serde(default = "z_k")]
    pub k: usize,
    #[serde(default = "solver_tol")]
    pub solver_tol: f64,
    #[serde(default = "c_disc")]
    pub c_disc: f64,
    #[serde(default = "seed")]
    pub seed: u64,
}

fn t_list() -> Vec<f64> {
    vec![0.25, 0.5, 1.0]
}
fn z_cells() -> usize {
    48
}
fn z_k() -> usize {
    16
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroundConfig {
    pub body: BodyRef,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<Matrix>,
    /// Ignored when `kolmogorov` is given.
    #[serde(default)]
    pub potential: Potential,
    /// Checks `e^{φ}ψ₁` of the transformed operator as well.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kolmogorov: Option<KolmogorovData>,
    #[serde(default = "cells")]
    pub cells: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSpec>,
    #[serde(default = "pairs")]
    pub pairs: usize,
    #[serde(default = "rel_tol")]
    pub rel_tol: f64,
    #[serde(default = "solver_tol_fine")]
    pub solver_tol: f64,
    #[serde(default = "seed")]
    pub seed: u64,
}

fn rel_tol() -> f64 {
    1e-6
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectralReference {
    #[serde(default = "fk_cells")]
    pub cells: usize,
    #[serde(default = "fk_k")]
    pub k: usize,
}

fn fk_cells() -> usize {
    128
}
fn fk_k() -> usize {
    32
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FkConfig {
    pub body: BodyRef,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<Matrix>,
    #[serde(default)]
    pub potential: Potential,
    pub x: Vec<f64>,
    pub t: f64,
    #[serde(default = "unit_payoff")]
    pub f: FunctionSpec,
    pub steps: usize,
    pub paths: usize,
    #[serde(default = "batch")]
    pub batch: usize,
    #[serde(default = "yes")]
    pub bridge: bool,
    /// Compare against `Σ e^{-tλ_k} ψ_k(x) ⟨ψ_k, f⟩` within 3 standard errors.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spectral: Option<SpectralReference>,
    #[serde(default = "seed")]
    pub seed: u64,
}

fn unit_payoff() -> FunctionSpec {
    FunctionSpec::Constant { value: 1.0 }
}
fn batch() -> usize {
    1024
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceMode {
    Spectral,
    Diagonal,
    Both,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceConfig {
    pub body: BodyRef,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<Matrix>,
    #[serde(default)]
    pub potential: Potential,
    #[serde(default = "cells")]
    pub cells: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSpec>,
    pub t_list: Vec<f64>,
    #[serde(default = "trace_mode")]
    pub mode: TraceMode,
    /// Eigenvalues for the spectral sum, clamped to the node count.
    #[serde(default = "trace_k")]
    pub k: usize,
    /// Trotter steps per unit time for the diagonal mode.
    #[serde(default = "steps_per_unit")]
    pub steps_per_unit: usize,
    #[serde(default)]
    pub boundary: BoundaryTreatment,
    /// Relative agreement required between the two modes.
    #[serde(default = "agreement")]
    pub agreement: f64,
    #[serde(default = "solver_tol_fine")]
    pub solver_tol: f64,
    #[serde(default = "seed")]
    pub seed: u64,
}

fn trace_mode() -> TraceMode {
    TraceMode::Both
}
fn trace_k() -> usize {
    64
}
fn steps_per_unit() -> usize {
    100
}
fn agreement() -> f64 {
    1e-2
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GtConfig {
    #[serde(default = "instances")]
    pub instances: usize,
    #[serde(default = "commuting")]
    pub commuting: usize,
    #[serde(default = "min_size")]
    pub min_size: usize,
    #[serde(default = "max_size")]
    pub max_size: usize,
    #[serde(default = "unit_t")]
    pub t: f64,
    #[serde(default = "seed")]
    pub seed: u64,
}

fn instances() -> usize {
    200
}
fn commuting() -> usize {
    50
}
fn min_size() -> usize {
    10
}
fn max_size() -> usize {
    100
}
fn unit_t() -> f64 {
    1.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UltraConfig {
    pub body: BodyRef,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<Matrix>,
    #[serde(default)]
    pub potential: Potential,
    #[serde(default = "cells")]
    pub cells: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSpec>,
    pub times: Vec<f64>,
    #[serde(default = "ultra_steps")]
    pub steps: usize,
    /// Relative tolerance on `sup·t^{N/2}` at the smallest time against the
    /// free limit; omitted means not checked.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub limit_tol: Option<f64>,
    #[serde(default = "seed")]
    pub seed: u64,
}

fn ultra_steps() -> usize {
    4
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HardyConfig {
    pub grid: GridSpec,
    pub x0: Vec<f64>,
    pub u: FunctionSpec,
}

/// Parses `value` into `T`, naming the offending field on failure.
pub fn parse<T: serde::de::DeserializeOwned>(
    value: serde_json::Value,
    base: &Path,
) -> Result<T, CliError> {
    BASE_DIR.with(|b| *b.borrow_mut() = base.to_path_buf());
    serde_path_to_error::deserialize(value).map_err(|e| {
        let path = e.path().to_string();
        let field = if path == "." {
            "<root>".to_string()
        } else {
            path
        };
        CliError::config(field, e.into_inner().to_string())
    })
}

pub fn default_a(a: &Option<Matrix>, dim: usize) -> Matrix {
    a.clone().unwrap_or_else(|| Matrix::identity(dim))
}
