//! The five batch commands. Each builds a [`ResultBundle`] from a validated
//! configuration and never touches the filesystem itself.

use serde_json::{json, Value};
use thiserror::Error;

use crate::config::{ConfigError, ExperimentConfig, Model, ScanKind};
use crate::equilibria::{all_equilibria, harvest_equilibria, Equilibrium, Stability};
use crate::kinetics::{KineticParams, State2};
use crate::ode::{fte_threshold, integrate, predict_fte, trace_separatrix, Terminal, Trajectory, VectorField};
use crate::pde::{check_recovery_conditions, simulate_pde, OutcomeLabel};
use crate::report::{fmt_num, fmt_opt, CsvTable, Metadata, ResultBundle};
use crate::scan::{scan_c1_window, scan_diffusion, DiffusionScan};

#[derive(Debug, Error)]
pub enum CommandError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl CommandError {
    fn numerical(e: impl ToString) -> Self {
        CommandError::Numerical(e.to_string())
    }
}

/// Settings that come from the command line rather than the file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunContext {
    pub workers: usize,
    pub resolution: Option<usize>,
}

impl Default for RunContext {
    fn default() -> Self {
        Self { workers: std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1), resolution: None }
    }
}

fn bundle(cfg: &ExperimentConfig, command: &str, tables: Vec<CsvTable>, summary: Value) -> ResultBundle {
    ResultBundle { metadata: Metadata::new(command, cfg.model.as_str(), &cfg.to_toml(), cfg.seed), tables, summary }
}

fn point(s: State2) -> Value {
    json!({ "u": s.u, "v": s.v })
}

fn equilibrium_json(e: &Equilibrium) -> Value {
    json!({
        "u": e.point.u,
        "v": e.point.v,
        "kind": e.kind.as_str(),
        "stability": e.stability.as_str(),
        "jacobian": e.jacobian.map(|j| j.0),
        "trace": e.jacobian.map(|j| j.trace()),
        "det": e.jacobian.map(|j| j.det()),
    })
}

fn require_model(cfg: &ExperimentConfig, allowed: &[Model]) -> Result<(), ConfigError> {
    if allowed.contains(&cfg.model) {
        Ok(())
    } else {
        let names: Vec<&str> = allowed.iter().map(|m| m.as_str()).collect();
        Err(ConfigError::Invalid { field: "model".into(), message: format!("this command needs one of {names:?}") })
    }
}

pub fn cmd_equilibria(cfg: &ExperimentConfig, _ctx: &RunContext) -> Result<ResultBundle, CommandError> {
    require_model(cfg, &[Model::Ode, Model::OdeHarvest])?;
    let (eqs, regime) = match cfg.model {
        Model::OdeHarvest => {
            let h = cfg.harvest_params()?;
            (harvest_equilibria(&h), h.base.regime())
        }
        _ => {
            let k = cfg.kinetic_params()?;
            (all_equilibria(&k), k.regime())
        }
    };
    let mut table = CsvTable::new("equilibria", &["u", "v", "kind", "tr", "det", "stability"]);
    for e in &eqs {
        table.push(vec![
            fmt_num(e.point.u),
            fmt_num(e.point.v),
            e.kind.as_str().into(),
            fmt_opt(e.jacobian.map(|j| j.trace())),
            fmt_opt(e.jacobian.map(|j| j.det())),
            e.stability.as_str().into(),
        ]);
    }
    let summary = json!({
        "regime": format!("{regime:?}"),
        "equilibria": eqs.iter().map(equilibrium_json).collect::<Vec<_>>(),
    });
    Ok(bundle(cfg, "equilibria", vec![table], summary))
}

fn terminal_json(t: &Terminal) -> Value {
    match t {
        Terminal::Equilibrium(e) => json!({ "label": "equilibrium", "equilibrium": equilibrium_json(e) }),
        Terminal::MaxTimeReached => json!({ "label": "max-time-reached" }),
    }
}

fn trajectory_table(traj: &Trajectory) -> CsvTable {
    let mut table = CsvTable::new("trajectory", &["t", "u", "v"]);
    for s in &traj.samples {
        table.push(vec![fmt_num(s.t), fmt_num(s.state.u), fmt_num(s.state.v)]);
    }
    table
}

fn run_ode<F: VectorField>(cfg: &ExperimentConfig, field: &F, ic: State2) -> Result<Trajectory, CommandError> {
    integrate(field, ic, cfg.t_end(200.0), &cfg.integrate_options()).map_err(CommandError::numerical)
}

pub fn cmd_simulate(cfg: &ExperimentConfig, _ctx: &RunContext) -> Result<ResultBundle, CommandError> {
    require_model(cfg, &[Model::Ode, Model::OdeHarvest])?;
    let ic = cfg.initial_point()?;
    let (traj, certified) = match cfg.model {
        Model::OdeHarvest => (run_ode(cfg, &cfg.harvest_params()?, ic)?, None),
        _ => {
            let k = cfg.kinetic_params()?;
            (run_ode(cfg, &k, ic)?, predict_fte(&k, ic).ok())
        }
    };
    let summary = json!({
        "initial": point(ic),
        "t_end": cfg.t_end(200.0),
        "final_time": traj.final_time(),
        "final_state": point(traj.final_state()),
        "terminal": terminal_json(&traj.terminal),
        "events": traj.events.iter().map(|e| json!({ "species": e.species.name(), "t_star": e.t_star })).collect::<Vec<_>>(),
        "fte_certified": certified,
        "samples": traj.samples.len(),
    });
    Ok(bundle(cfg, "simulate", vec![trajectory_table(&traj)], summary))
}

pub fn cmd_separatrix(cfg: &ExperimentConfig, ctx: &RunContext) -> Result<ResultBundle, CommandError> {
    require_model(cfg, &[Model::Ode])?;
    let k = cfg.kinetic_params()?;
    let saddles: Vec<Equilibrium> =
        all_equilibria(&k).into_iter().filter(|e| e.stability == Stability::Saddle).collect();
    if saddles.is_empty() {
        return Err(CommandError::Numerical("no saddle equilibrium to trace from".into()));
    }
    let mut tables = Vec::new();
    let mut traced = Vec::new();
    for (idx, saddle) in saddles.iter().enumerate() {
        let sep = trace_separatrix(&k, saddle).map_err(CommandError::numerical)?;
        let name = if idx == 0 { "separatrix".to_string() } else { format!("separatrix_{}", idx + 1) };
        let mut table = CsvTable::new(&name, &["arclength", "u", "v"]);
        for (s, pt) in sep.arclength().iter().zip(&sep.polyline) {
            table.push(vec![fmt_num(*s), fmt_num(pt.u), fmt_num(pt.v)]);
        }
        traced.push(json!({
            "file": table.file_name(),
            "saddle": equilibrium_json(saddle),
            "points": sep.polyline.len(),
            "length": sep.length(),
            "start": point(sep.polyline[0]),
            "end": point(*sep.polyline.last().expect("polyline contains the saddle")),
        }));
        tables.push(table);
    }
    let mut threshold = Value::Null;
    if k.p > 0.0 && k.p < 1.0 && k.q == 1.0 {
        let n = ctx.resolution.unwrap_or(200).max(2);
        let cap = k.a1 / k.b1;
        let mut table = CsvTable::new("threshold", &["u0", "f"]);
        for i in 1..=n {
            let u0 = cap * i as f64 / n as f64;
            let f = fte_threshold(&k, u0).map_err(CommandError::numerical)?;
            table.push(vec![fmt_num(u0), fmt_num(f)]);
        }
        threshold = json!({ "file": table.file_name(), "samples": n, "coefficient": fte_threshold(&k, 1.0).ok() });
        tables.push(table);
    }
    let summary = json!({ "separatrices": traced, "threshold": threshold });
    Ok(bundle(cfg, "separatrix", tables, summary))
}

pub fn cmd_pde(cfg: &ExperimentConfig, _ctx: &RunContext) -> Result<ResultBundle, CommandError> {
    require_model(cfg, &[Model::PdeConst, Model::PdeInhomogeneous])?;
    let params = cfg.pde_params()?;
    let init = cfg.initial_state()?;
    let grid = init.grid;
    let run = simulate_pde(&params, &init, cfg.t_end(1e4), &cfg.pde_options()).map_err(CommandError::numerical)?;
    let xs = grid.points();
    let mut tables = Vec::new();
    let mut snaps = Vec::new();
    for (idx, snap) in run.snapshots.iter().enumerate() {
        let mut table = CsvTable::new(&format!("snapshot_{idx:03}"), &["x", "u", "v"]);
        for i in 0..grid.n {
            table.push(vec![fmt_num(xs[i]), fmt_num(snap.u[i]), fmt_num(snap.v[i])]);
        }
        snaps.push(json!({ "index": idx, "t": snap.t, "file": table.file_name() }));
        tables.push(table);
    }
    let mut recovery = Value::Null;
    if let Some(block) = &cfg.recovery {
        let k = KineticParams { p: block.p, ..cfg.kinetic_params()? };
        let report = check_recovery_conditions(&k, &init.u, &init.v)
            .map_err(|e| ConfigError::Invalid { field: "recovery".into(), message: e.to_string() })?;
        let mut table = CsvTable::new("recovery", &["x", "u0", "v0", "f1", "f2", "cond1", "cond12"]);
        for i in 0..grid.n {
            table.push(vec![
                fmt_num(xs[i]),
                fmt_num(init.u[i]),
                fmt_num(init.v[i]),
                fmt_num(report.f1[i]),
                fmt_num(report.f2[i]),
                report.cond1[i].to_string(),
                report.cond12[i].to_string(),
            ]);
        }
        recovery = json!({
            "p": block.p,
            "file": table.file_name(),
            "f1_coefficient": report.f1_coefficient,
            "f2_slope": report.f2_slope,
            "u_star": report.u_star,
            "v_star": report.v_star,
            "cond1_all": report.cond1.iter().all(|c| *c),
            "cond12_all": report.cond12.iter().all(|c| *c),
            "cond123_lhs": report.cond123_lhs,
            "cond123_rhs": report.cond123_rhs,
            "cond123": report.cond123,
            "concavity_verified": report.concavity_verified,
        });
        tables.push(table);
    }
    let sup = |f: &[f64]| f.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let summary = json!({
        "outcome": {
            "label": run.outcome.label.as_str(),
            "t_reached": run.outcome.t_reached,
            "fte_flag": run.outcome.fte_flag(),
            "extinctions": run.outcome.extinctions.iter()
                .map(|e| json!({ "species": e.species.name(), "t_star": e.t_star }))
                .collect::<Vec<_>>(),
        },
        "steps": run.steps,
        "scheme": format!("{:?}", run.scheme),
        "final_sup": { "u": sup(&run.final_state.u), "v": sup(&run.final_state.v) },
        "snapshots": snaps,
        "recovery": recovery,
    });
    Ok(bundle(cfg, "pde", tables, summary))
}

pub fn cmd_scan(cfg: &ExperimentConfig, ctx: &RunContext) -> Result<ResultBundle, CommandError> {
    let block = cfg.scan_block()?;
    match block.kind {
        ScanKind::Diffusion => {
            let (d1, d2) = cfg.scan_axes(ctx.resolution)?;
            let scan = DiffusionScan {
                template: cfg.pde_params()?,
                grid: cfg.grid()?,
                d1,
                d2,
                ic: block.ic.unwrap_or_default(),
                t_end: cfg.t_end(2e4),
                options: cfg.pde_options(),
            };
            let grid = scan_diffusion(&scan, ctx.workers).map_err(CommandError::numerical)?;
            let mut table = CsvTable::new("outcome_grid", &["d1", "d2", "label", "t_reached"]);
            for c in &grid.cells {
                table.push(vec![fmt_num(c.d1), fmt_num(c.d2), c.label.as_str().into(), fmt_num(c.t_reached)]);
            }
            let counts: serde_json::Map<String, Value> =
                [OutcomeLabel::UWins, OutcomeLabel::VWins, OutcomeLabel::Coexist, OutcomeLabel::Undecided]
                    .iter()
                    .map(|l| (l.as_str().to_string(), json!(grid.count(*l))))
                    .collect();
            let notes: Vec<Value> = grid
                .cells
                .iter()
                .filter_map(|c| c.note.as_ref().map(|n| json!({ "d1": c.d1, "d2": c.d2, "note": n })))
                .collect();
            let summary = json!({
                "kind": "diffusion",
                "ic_policy": grid.ic_policy,
                "d1": grid.d1,
                "d2": grid.d2,
                "t_end": scan.t_end,
                "counts": counts,
                "failed_cells": notes,
            });
            Ok(bundle(cfg, "scan", vec![table], summary))
        }
        ScanKind::C1Window => {
            let k = cfg.kinetic_params()?;
            let lo = block.c1_min.unwrap_or(0.01);
            let hi = block.c1_max.unwrap_or(k.b2 * k.a1 / k.a2);
            let samples = ctx.resolution.unwrap_or(200);
            let p_exp = block.p_exponent.unwrap_or(0.6);
            let q_exp = block.q_exponent.unwrap_or(0.9);
            let w = scan_c1_window(&k, lo, hi, samples, p_exp, q_exp).map_err(CommandError::numerical)?;
            let mut table =
                CsvTable::new("window_scan", &["c1", "count_p_variant", "count_q_variant", "in_regime", "degenerate"]);
            for i in 0..w.c1.len() {
                table.push(vec![
                    fmt_num(w.c1[i]),
                    w.count_p[i].to_string(),
                    w.count_q[i].to_string(),
                    w.in_regime[i].to_string(),
                    w.degenerate[i].to_string(),
                ]);
            }
            let pairs = |v: &[(f64, f64)]| v.iter().map(|(a, b)| json!([a, b])).collect::<Vec<_>>();
            let summary = json!({
                "kind": "c1-window",
                "p_exponent": w.p_exponent,
                "q_exponent": w.q_exponent,
                "samples": w.c1.len(),
                "windows_two_vs_none": pairs(&w.windows_two_none),
                "windows_none_vs_two": pairs(&w.windows_none_two),
            });
            Ok(bundle(cfg, "scan", vec![table], summary))
        }
    }
}
