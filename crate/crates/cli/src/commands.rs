//! One runner per subcommand.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};
use spectral_bm_core::eigen::{smallest_eigenpairs, EigenOptions, Spectrum};
use spectral_bm_core::grid::GridSpec;
use spectral_bm_core::semigroup::{
    feynman_kac_estimate, golden_thompson_check, partition_function_diagonal,
    partition_function_spectral, ultracontractivity_probe, FkEstimate, PathSamplerConfig,
    TraceEstimate, TrotterPlan,
};
use spectral_bm_core::verify::{
    bm_eigen_verify, gaussian_bm_verify, ground_state_logconcavity_verify, hardy_check,
    marginal_logconcavity_check, prekopa_leindler_check, volume_bm_verify, z_logconcavity_verify,
    BmOptions, GroundStateOptions, LogConcavityOptions, PlOptions, ZOptions,
};
use spectral_bm_core::{assemble, ConvexBody, DiscreteOperator, Matrix, Potential};

use crate::config::*;
use crate::error::{core_error, CliError, Field};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CommandName {
    Eig,
    BmVerify,
    VolBm,
    GaussBm,
    PlCheck,
    Zconc,
    Groundstate,
    FkEstimate,
    Trace,
    GtCheck,
    UltraProbe,
    Hardy,
}

impl CommandName {
    pub const ALL: [CommandName; 12] = [
        CommandName::Eig,
        CommandName::BmVerify,
        CommandName::VolBm,
        CommandName::GaussBm,
        CommandName::PlCheck,
        CommandName::Zconc,
        CommandName::Groundstate,
        CommandName::FkEstimate,
        CommandName::Trace,
        CommandName::GtCheck,
        CommandName::UltraProbe,
        CommandName::Hardy,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CommandName::Eig => "eig",
            CommandName::BmVerify => "bm-verify",
            CommandName::VolBm => "vol-bm",
            CommandName::GaussBm => "gauss-bm",
            CommandName::PlCheck => "pl-check",
            CommandName::Zconc => "zconc",
            CommandName::Groundstate => "groundstate",
            CommandName::FkEstimate => "fk-estimate",
            CommandName::Trace => "trace",
            CommandName::GtCheck => "gt-check",
            CommandName::UltraProbe => "ultra-probe",
            CommandName::Hardy => "hardy",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.as_str() == s)
    }
}

/// A CSV table with fixed columns.
#[derive(Debug, Clone)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(name: &str, header: &[&str]) -> Self {
        Table {
            name: name.to_string(),
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }
}

fn num(x: f64) -> String {
    format!("{x}")
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

#[derive(Debug)]
pub struct Outcome {
    /// The effective configuration, including `command`.
    pub config: Value,
    pub report: Value,
    pub pass: bool,
    pub tables: Vec<Table>,
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("reports serialize")
}

fn echo<T: Serialize>(cmd: CommandName, cfg: &T) -> Value {
    let mut v = to_value(cfg);
    if let Value::Object(m) = &mut v {
        m.insert("command".into(), Value::String(cmd.as_str().into()));
    }
    v
}

/// Splits off the optional `command` key and checks it against the
/// subcommand.
fn strip_command(mut value: Value, cmd: CommandName) -> Result<Value, CliError> {
    let Value::Object(m) = &mut value else {
        return Err(CliError::config("<root>", "config must be a JSON object"));
    };
    if let Some(c) = m.remove("command") {
        if c.as_str() != Some(cmd.as_str()) {
            return Err(CliError::config(
                "command",
                format!("config is for {c}, subcommand is {}", cmd.as_str()),
            ));
        }
    }
    Ok(value)
}

/// Which config field an assembly error points at.
fn assemble_field(e: &spectral_bm_core::Error) -> &'static str {
    let text = e.to_string();
    match e.module() {
        "potential" => "potential",
        "geometry" => "body",
        _ if text.contains("diffusion") => "a",
        _ => "grid",
    }
}

fn build(
    body: &ConvexBody,
    a: &Option<Matrix>,
    v: &Potential,
    grid: &Option<GridSpec>,
    cells: usize,
) -> Result<DiscreteOperator, CliError> {
    let grid = match grid {
        Some(g) => {
            GridSpec::new(g.origin.clone(), g.spacing.clone(), g.nodes.clone()).field("grid")?
        }
        None => GridSpec::for_body(body, cells).field("cells")?,
    };
    let a = default_a(a, body.dim());
    assemble(body, &a, v, &grid).map_err(|e| {
        let f = assemble_field(&e);
        core_error(e, f)
    })
}

fn seeded<T>(cfg: &mut T, seed: Option<u64>, get: impl FnOnce(&mut T) -> &mut u64) {
    if let Some(s) = seed {
        *get(cfg) = s;
    }
}

pub fn run(
    cmd: CommandName,
    raw: Value,
    base: &Path,
    seed: Option<u64>,
) -> Result<Outcome, CliError> {
    let value = strip_command(raw, cmd)?;
    match cmd {
        CommandName::Eig => {
            let mut cfg: EigConfig = parse(value, base)?;
            seeded(&mut cfg, seed, |c| &mut c.seed);
            eig(cmd, cfg)
        }
        CommandName::BmVerify => {
            let mut cfg: BmConfig = parse(value, base)?;
            seeded(&mut cfg, seed, |c| &mut c.seed);
            bm(cmd, cfg)
        }
        CommandName::VolBm => vol_bm(cmd, parse(value, base)?),
        CommandName::GaussBm => gauss_bm(cmd, parse(value, base)?),
        CommandName::PlCheck => {
            let mut cfg: PlConfig = parse(value, base)?;
            seeded(&mut cfg, seed, |c| &mut c.seed);
            pl(cmd, cfg)
        }
        CommandName::Zconc => {
            let mut cfg: ZConfig = parse(value, base)?;
            seeded(&mut cfg, seed, |c| &mut c.seed);
            zconc(cmd, cfg)
        }
        CommandName::Groundstate => {
            let mut cfg: GroundConfig = parse(value, base)?;
            seeded(&mut cfg, seed, |c| &mut c.seed);
            groundstate(cmd, cfg)
        }
        CommandName::FkEstimate => {
            let mut cfg: FkConfig = parse(value, base)?;
            seeded(&mut cfg, seed, |c| &mut c.seed);
            fk(cmd, cfg)
        }
        CommandName::Trace => {
            let mut cfg: TraceConfig = parse(value, base)?;
            seeded(&mut cfg, seed, |c| &mut c.seed);
            trace(cmd, cfg)
        }
        CommandName::GtCheck => {
            let mut cfg: GtConfig = parse(value, base)?;
            seeded(&mut cfg, seed, |c| &mut c.seed);
            gt(cmd, cfg)
        }
        CommandName::UltraProbe => {
            let mut cfg: UltraConfig = parse(value, base)?;
            seeded(&mut cfg, seed, |c| &mut c.seed);
            ultra(cmd, cfg)
        }
        CommandName::Hardy => hardy(cmd, parse(value, base)?),
    }
}

fn solve(
    op: &DiscreteOperator,
    k: usize,
    opts: &EigenOptions,
    field: &str,
) -> Result<Spectrum, CliError> {
    smallest_eigenpairs(op, k.min(op.len()), opts).field(field)
}

fn eig(cmd: CommandName, cfg: EigConfig) -> Result<Outcome, CliError> {
    let op = build(&cfg.body.0, &cfg.a, &cfg.potential, &cfg.grid, cfg.cells)?;
    let opts = EigenOptions {
        tol: cfg.tol,
        max_outer: cfg.max_outer,
        seed: cfg.seed,
        ..EigenOptions::default()
    };
    let s = smallest_eigenpairs(&op, cfg.k, &opts).field("k")?;
    let mut table = Table::new("eigenvalues", &["k", "lambda", "residual"]);
    for (i, (l, r)) in s.eigenvalues.iter().zip(&s.residuals).enumerate() {
        table.push(vec![(i + 1).to_string(), num(*l), num(*r)]);
    }
    let report = json!({
        "eigenvalues": s.eigenvalues,
        "residuals": s.residuals,
        "cluster": s.cluster,
        "outer_iterations": s.outer_iterations,
        "cg_iterations": s.cg_iterations,
        "nodes": op.len(),
        "grid": op.grid(),
    });
    Ok(Outcome {
        config: echo(cmd, &cfg),
        report,
        pass: true,
        tables: vec![table],
    })
}

fn bm(cmd: CommandName, cfg: BmConfig) -> Result<Outcome, CliError> {
    let opts = BmOptions {
        r_grid: cfg.r_grid.clone(),
        cells: cfg.cells,
        spacing: cfg.spacing.clone(),
        solver_tol: cfg.solver_tol,
        c_disc: cfg.c_disc,
        tol: cfg.tol,
        seed: cfg.seed,
    };
    let a = default_a(&cfg.a, cfg.b0.0.dim());
    let rep = bm_eigen_verify(&cfg.b0.0, &cfg.b1.0, &a, &cfg.potential, &opts).map_err(|e| {
        let f = match e.module() {
            "potential" => "potential",
            "geometry" => "b1",
            "operator" if e.to_string().contains("diffusion") => "a",
            "operator" => "cells",
            _ => "r_grid",
        };
        core_error(e, f)
    })?;
    let mut table = Table::new("bm", &["r", "lambda1", "chord_defect", "midpoint_defect"]);
    for (i, l) in rep.lambda1.iter().enumerate() {
        let mid = if i > 0 && i + 1 < rep.r_grid.len() {
            rep.midpoint_defects.get(i - 1).copied()
        } else {
            None
        };
        table.push(vec![
            num(rep.r_grid[i]),
            num(*l),
            opt(rep.chord_defects.get(i).copied()),
            opt(mid),
        ]);
    }
    Ok(Outcome {
        config: echo(cmd, &cfg),
        pass: rep.pass,
        report: to_value(&rep),
        tables: vec![table],
    })
}

fn vol_bm(cmd: CommandName, cfg: VolBmConfig) -> Result<Outcome, CliError> {
    let rep = volume_bm_verify(&cfg.b0.0, &cfg.b1.0, &cfg.r_grid).field("r_grid")?;
    let mut table = Table::new("volume_bm", &["r", "volume", "lhs", "rhs", "defect"]);
    for i in 0..rep.r_grid.len() {
        table.push(vec![
            num(rep.r_grid[i]),
            num(rep.volumes[i]),
            num(rep.lhs[i]),
            num(rep.rhs[i]),
            num(rep.defects[i]),
        ]);
    }
    Ok(Outcome {
        config: echo(cmd, &cfg),
        pass: rep.pass,
        report: to_value(&rep),
        tables: vec![table],
    })
}

fn gauss_bm(cmd: CommandName, cfg: GaussBmConfig) -> Result<Outcome, CliError> {
    let rep =
        gaussian_bm_verify(&cfg.b0.0, &cfg.b1.0, &cfg.r_grid, cfg.nodes_per_axis).map_err(|e| {
            let f = if e.module() == "geometry" {
                "nodes_per_axis"
            } else {
                "b1"
            };
            core_error(e, f)
        })?;
    let mut table = Table::new(
        "gauss_bm",
        &["r", "gamma", "error_bound", "rhs", "defect", "tol"],
    );
    for i in 0..rep.r_grid.len() {
        table.push(vec![
            num(rep.r_grid[i]),
            num(rep.gamma[i]),
            num(rep.error_bounds[i]),
            num(rep.rhs[i]),
            num(rep.defects[i]),
            num(rep.tolerances[i]),
        ]);
    }
    Ok(Outcome {
        config: echo(cmd, &cfg),
        pass: rep.pass,
        report: to_value(&rep),
        tables: vec![table],
    })
}

fn pl(cmd: CommandName, cfg: PlConfig) -> Result<Outcome, CliError> {
    let grid = GridSpec::new(
        cfg.grid.origin.clone(),
        cfg.grid.spacing.clone(),
        cfg.grid.nodes.clone(),
    )
    .field("grid")?;
    let f = cfg.f.sample(&grid, "f")?;
    let g = cfg.g.sample(&grid, "g")?;
    let h = cfg.h.sample(&grid, "h")?;
    let opts = PlOptions {
        pairs: cfg.pairs,
        tol: cfg.tol,
        seed: cfg.seed,
        mollify: cfg.mollify,
    };
    let rep = prekopa_leindler_check(&f, &g, &h, cfg.r, &opts).field("r")?;
    let mut pass = rep.pass;
    let marginal = match &cfg.marginal {
        Some(m) => {
            let mg = GridSpec::new(
                m.grid.origin.clone(),
                m.grid.spacing.clone(),
                m.grid.nodes.clone(),
            )
            .field("marginal.grid")?;
            let fun = m.function.sample(&mg, "marginal.function")?;
            let lopts = LogConcavityOptions {
                pairs: cfg.pairs,
                seed: cfg.seed,
                ..LogConcavityOptions::default()
            };
            let r = marginal_logconcavity_check(&fun, m.axis, &lopts).field("marginal.axis")?;
            pass &= r.pass;
            Some(r)
        }
        None => None,
    };
    Ok(Outcome {
        config: echo(cmd, &cfg),
        pass,
        report: json!({ "prekopa_leindler": rep, "marginal": marginal }),
        tables: Vec::new(),
    })
}

fn zconc(cmd: CommandName, cfg: ZConfig) -> Result<Outcome, CliError> {
    let opts = ZOptions {
        t_list: cfg.t_list.clone(),
        r_grid: cfg.r_grid.clone(),
        cells: cfg.cells,
        spacing: cfg.spacing.clone(),
        k: cfg.k,
        solver_tol: cfg.solver_tol,
        c_disc: cfg.c_disc,
        seed: cfg.seed,
    };
    let a = default_a(&cfg.a, cfg.b0.0.dim());
    let rep =
        z_logconcavity_verify(&cfg.b0.0, &cfg.b1.0, &a, &cfg.potential, &opts).map_err(|e| {
            let f = match e.module() {
                "potential" => "potential",
                "operator" => "cells",
                "eigen" => "k",
                _ => "t_list",
            };
            core_error(e, f)
        })?;
    let mut table = Table::new("z", &["t", "r", "Z", "trunc_bound"]);
    for row in &rep.rows {
        for (i, r) in rep.r_grid.iter().enumerate() {
            table.push(vec![
                num(row.t),
                num(*r),
                num(row.z[i]),
                num(row.trunc_bound[i]),
            ]);
        }
    }
    Ok(Outcome {
        config: echo(cmd, &cfg),
        pass: rep.pass,
        report: to_value(&rep),
        tables: vec![table],
    })
}

fn groundstate(cmd: CommandName, cfg: GroundConfig) -> Result<Outcome, CliError> {
    let body = &cfg.body.0;
    let (weight, v) = match &cfg.kolmogorov {
        Some(k) => {
            let (w, v) = k.transform().field("kolmogorov")?;
            (Some(w), v)
        }
        None => (None, cfg.potential.clone()),
    };
    let grid = match &cfg.grid {
        Some(g) => {
            GridSpec::new(g.origin.clone(), g.spacing.clone(), g.nodes.clone()).field("grid")?
        }
        None => GridSpec::for_body(body, cfg.cells).field("cells")?,
    };
    let a = match &cfg.kolmogorov {
        Some(k) => k.a.clone(),
        None => default_a(&cfg.a, body.dim()),
    };
    let opts = GroundStateOptions {
        eigen: EigenOptions {
            tol: cfg.solver_tol,
            seed: cfg.seed,
            ..EigenOptions::default()
        },
        pairs: cfg.pairs,
        rel_tol: cfg.rel_tol,
        seed: cfg.seed,
    };
    let (rep, spec) = ground_state_logconcavity_verify(body, &a, &v, &grid, &opts, weight.as_ref())
        .map_err(|e| {
            let f = match e.module() {
                "potential" => "potential",
                "operator" => "grid",
                _ => "solver_tol",
            };
            core_error(e, f)
        })?;
    let n = body.dim();
    let cols: Vec<&str> = ["x0", "x1", "x2"][..n]
        .iter()
        .copied()
        .chain(["psi"])
        .collect();
    let mut table = Table::new("ground_state", &cols);
    let psi = spec.ground_state();
    for i in 0..psi.values.len() {
        let mut row: Vec<String> = psi.lattice.coord(i).into_iter().map(num).collect();
        row.push(num(psi.values[i]));
        table.push(row);
    }
    Ok(Outcome {
        config: echo(cmd, &cfg),
        pass: rep.pass,
        report: to_value(&rep),
        tables: vec![table],
    })
}

#[derive(Serialize)]
struct FkReport {
    estimate: FkEstimate,
    #[serde(skip_serializing_if = "Option::is_none")]
    spectral: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    z_score: Option<f64>,
}

fn fk(cmd: CommandName, cfg: FkConfig) -> Result<Outcome, CliError> {
    if matches!(cfg.f, FunctionSpec::Samples { .. }) {
        return Err(CliError::config(
            "f",
            "sampled payoffs are not supported; use a closed-form kind",
        ));
    }
    let body = &cfg.body.0;
    let a = default_a(&cfg.a, body.dim());
    let sampler = PathSamplerConfig {
        steps: cfg.steps,
        paths: cfg.paths,
        seed: cfg.seed,
        bridge: cfg.bridge,
        batch: cfg.batch,
    };
    let payoff = |x: &[f64]| cfg.f.eval(x);
    let est = feynman_kac_estimate(body, &a, &cfg.potential, &payoff, &cfg.x, cfg.t, &sampler)
        .map_err(|e| {
            let text = e.to_string();
            let f = if text.contains("time step") {
                "steps"
            } else if text.contains("start point") {
                "x"
            } else if e.module() == "potential" {
                "potential"
            } else {
                "t"
            };
            core_error(e, f)
        })?;
    let spectral = match &cfg.spectral {
        Some(s) => {
            let op = build(body, &cfg.a, &cfg.potential, &None, s.cells).map_err(|mut e| {
                e.field = format!("spectral.{}", e.field);
                e
            })?;
            let spec = solve(&op, s.k, &EigenOptions::default(), "spectral.k")?;
            let f = op.sample(|x| cfg.f.eval(x));
            let mut value = 0.0;
            for (l, psi) in spec.eigenvalues.iter().zip(&spec.eigenfunctions) {
                let at = psi.to_box().interpolate(&cfg.x).unwrap_or(0.0);
                value += (-cfg.t * l).exp() * psi.inner(&f) * at;
            }
            Some(value)
        }
        None => None,
    };
    let z_score = spectral.map(|s| (est.mean - s) / est.stderr.max(f64::MIN_POSITIVE));
    let pass = z_score.is_none_or(|z| z.abs() <= 3.0);
    Ok(Outcome {
        config: echo(cmd, &cfg),
        pass,
        report: to_value(&FkReport {
            estimate: est,
            spectral,
            z_score,
        }),
        tables: Vec::new(),
    })
}

#[derive(Serialize)]
struct TraceRow {
    t: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    spectral: Option<TraceEstimate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    diagonal: Option<TraceEstimate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    relative_gap: Option<f64>,
    /// `-log Z / t`, an upper estimate of `λ₁` approaching it as t grows.
    minus_log_z_over_t: f64,
}

fn trace(cmd: CommandName, cfg: TraceConfig) -> Result<Outcome, CliError> {
    if cfg.t_list.iter().any(|t| !(*t > 0.0)) {
        return Err(CliError::config("t_list", "times must be positive"));
    }
    let op = build(&cfg.body.0, &cfg.a, &cfg.potential, &cfg.grid, cfg.cells)?;
    let spec = match cfg.mode {
        TraceMode::Diagonal => None,
        _ => Some(solve(
            &op,
            cfg.k,
            &EigenOptions {
                tol: cfg.solver_tol,
                seed: cfg.seed,
                ..EigenOptions::default()
            },
            "k",
        )?),
    };
    let mut rows = Vec::new();
    let mut pass = true;
    let mut table = Table::new("trace", &["t", "Z", "trunc_bound"]);
    let mut diag_table = Table::new("trace_diagonal", &["t", "Z", "trunc_bound"]);
    for &t in &cfg.t_list {
        let s = match &spec {
            Some(s) => Some(partition_function_spectral(&s.eigenvalues, t).field("k")?),
            None => None,
        };
        let d = match cfg.mode {
            TraceMode::Spectral => None,
            _ => {
                let steps = ((t * cfg.steps_per_unit as f64).ceil() as usize).max(1);
                let plan = TrotterPlan {
                    t,
                    steps,
                    boundary: cfg.boundary,
                };
                Some(partition_function_diagonal(&op, &plan, cfg.seed).field("steps_per_unit")?)
            }
        };
        let gap = match (&s, &d) {
            (Some(a), Some(b)) => Some((b.value - a.value).abs() / a.value),
            _ => None,
        };
        if let Some(g) = gap {
            pass &= g <= cfg.agreement;
        }
        let primary = s.as_ref().or(d.as_ref()).expect("one mode runs");
        table.push(vec![
            num(t),
            num(primary.value),
            num(primary.error_estimate),
        ]);
        if let (Some(_), Some(dd)) = (&s, &d) {
            diag_table.push(vec![num(t), num(dd.value), num(dd.error_estimate)]);
        }
        rows.push(TraceRow {
            t,
            minus_log_z_over_t: -primary.value.ln() / t,
            spectral: s,
            diagonal: d,
            relative_gap: gap,
        });
    }
    let mut tables = vec![table];
    if !diag_table.rows.is_empty() {
        tables.push(diag_table);
    }
    Ok(Outcome {
        config: echo(cmd, &cfg),
        pass,
        report: json!({
            "lambda1": spec.as_ref().map(|s| s.lambda1()),
            "eigenvalues_used": spec.as_ref().map(|s| s.eigenvalues.len()),
            "rows": rows,
        }),
        tables,
    })
}

fn gt(cmd: CommandName, cfg: GtConfig) -> Result<Outcome, CliError> {
    if cfg.min_size < 1 || cfg.min_size > cfg.max_size || cfg.max_size > 400 {
        return Err(CliError::config(
            "max_size",
            "need 1 ≤ min_size ≤ max_size ≤ 400",
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut violations = 0usize;
    let mut worst_ratio = f64::NEG_INFINITY;
    let mut commuting_gap: f64 = 0.0;
    for i in 0..cfg.instances + cfg.commuting {
        let n = rng.random_range(cfg.min_size..=cfg.max_size);
        let commuting = i >= cfg.instances;
        let k = if commuting {
            Matrix::diagonal(
                &(0..n)
                    .map(|_| rng.random_range(-2.0..2.0))
                    .collect::<Vec<_>>(),
            )
        } else {
            let b = nalgebra::DMatrix::<f64>::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
            Matrix((&b + b.transpose()) * 0.5)
        };
        let p = Matrix::diagonal(
            &(0..n)
                .map(|_| rng.random_range(-2.0..2.0))
                .collect::<Vec<_>>(),
        );
        let g = golden_thompson_check(&k, &p, cfg.t).field("t")?;
        if commuting {
            commuting_gap = commuting_gap.max((g.lhs - g.rhs).abs() / g.rhs);
        } else {
            worst_ratio = worst_ratio.max(g.lhs / g.rhs);
            if !g.pass {
                violations += 1;
            }
        }
    }
    let pass = violations == 0 && commuting_gap <= 1e-12;
    Ok(Outcome {
        config: echo(cmd, &cfg),
        pass,
        report: json!({
            "violations": violations,
            "worst_ratio": if cfg.instances > 0 { Some(worst_ratio) } else { None },
            "commuting_relative_gap": commuting_gap,
        }),
        tables: Vec::new(),
    })
}

fn ultra(cmd: CommandName, cfg: UltraConfig) -> Result<Outcome, CliError> {
    let op = build(&cfg.body.0, &cfg.a, &cfg.potential, &cfg.grid, cfg.cells)?;
    let l1 = solve(&op, 1, &EigenOptions::default(), "cells")?.lambda1();
    let rows = ultracontractivity_probe(&op, &cfg.times, cfg.steps, l1, cfg.seed).field("times")?;
    let dominated = rows
        .iter()
        .all(|r| r.domination_excess <= 1e-9 * r.free_limit * r.t.powf(-(op.dim() as f64) / 2.0));
    let first = rows
        .iter()
        .min_by(|a, b| a.t.total_cmp(&b.t))
        .expect("times non-empty");
    let limit_err = (first.scaled - first.free_limit).abs() / first.free_limit;
    let limit_ok = cfg.limit_tol.is_none_or(|tol| limit_err <= tol);
    let mut table = Table::new(
        "ultra",
        &[
            "t",
            "sup_diagonal",
            "scaled",
            "compensated",
            "free_limit",
            "domination_excess",
        ],
    );
    for r in &rows {
        table.push(vec![
            num(r.t),
            num(r.sup_diagonal),
            num(r.scaled),
            num(r.compensated),
            num(r.free_limit),
            num(r.domination_excess),
        ]);
    }
    Ok(Outcome {
        config: echo(cmd, &cfg),
        pass: dominated && limit_ok,
        report: json!({
            "lambda1": l1,
            "rows": rows,
            "dominated": dominated,
            "limit_relative_error": limit_err,
        }),
        tables: vec![table],
    })
}

fn hardy(cmd: CommandName, cfg: HardyConfig) -> Result<Outcome, CliError> {
    let grid = GridSpec::new(
        cfg.grid.origin.clone(),
        cfg.grid.spacing.clone(),
        cfg.grid.nodes.clone(),
    )
    .field("grid")?;
    let u = cfg.u.sample(&grid, "u")?;
    let rep = hardy_check(&u, &cfg.x0).field("grid")?;
    Ok(Outcome {
        config: echo(cmd, &cfg),
        pass: rep.pass,
        report: to_value(&rep),
        tables: Vec::new(),
    })
}
