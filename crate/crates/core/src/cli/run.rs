//! Task dispatch, invariant catalogue and output files.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use log::{info, warn};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::eigensolve::{
    min_max_restarts, reference_principal, single_phase_restarts, solve_min_max,
    solve_nehari_with_reference, solve_single_phase, EigenPair, NehariOutcome,
};
use crate::error::{Error, Result};
use crate::grid::{Geometry, Grid, GridFunction};
use crate::modular::Regime;
use crate::verify::{self, Check, ScanOutcome, INVARIANTS};

use super::config::{ExperimentConfig, Task};

/// First line of every `results.csv`.
pub const CSV_VERSION: &str = "# dphase-eig v1";
/// Share of `∫m₁` in the outer tenth of the domain above which a run warns.
pub const TAIL_WARNING: f64 = 0.2;
/// Fraction of `max|u|` that each sign must reach for a sign change.
const SIGN_CHANGE_TOL: f64 = 1e-3;
/// Relative tolerance of the sandwich flag in the `Norms` table.
const SANDWICH_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InvariantEntry {
    pub name: &'static str,
    pub evaluated: bool,
    pub pass: Option<bool>,
    /// Distance to failure; negative exactly when the check failed.
    pub slack: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct RunReport {
    pub config: ExperimentConfig,
    pub elapsed_seconds: f64,
    pub warnings: Vec<String>,
    /// Task-specific records.
    pub results: Value,
    /// One entry per catalogued invariant, in catalogue order.
    pub invariants: Vec<InvariantEntry>,
    /// All evaluated invariants passed.
    pub pass: bool,
}

impl RunReport {
    pub fn invariant(&self, name: &str) -> Option<&InvariantEntry> {
        self.invariants.iter().find(|e| e.name == name)
    }

    pub fn failed(&self) -> Vec<&'static str> {
        self.invariants
            .iter()
            .filter(|e| e.pass == Some(false))
            .map(|e| e.name)
            .collect()
    }
}

/// CSV body: a column header and stringified rows.
#[derive(Debug, Clone, Default)]
struct Table {
    columns: Vec<&'static str>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn new(columns: &[&'static str]) -> Self {
        Self {
            columns: columns.to_vec(),
            rows: Vec::new(),
        }
    }

    fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    fn render(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        writeln!(out, "{CSV_VERSION}")?;
        let mut w = csv::Writer::from_writer(&mut out);
        let fail = |e: csv::Error| Error::Io(std::io::Error::other(e));
        w.write_record(&self.columns).map_err(fail)?;
        for r in &self.rows {
            w.write_record(r).map_err(fail)?;
        }
        w.flush()?;
        drop(w);
        Ok(out)
    }
}

fn num(v: f64) -> String {
    format!("{v:?}")
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn opt_num(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

/// Everything one task produces before it is written out.
struct Outcome {
    table: Table,
    results: Value,
    checks: Vec<Check>,
    /// File name and rendered contents of each field dump.
    fields: Vec<(String, Vec<u8>)>,
}

impl Outcome {
    fn new(table: Table) -> Self {
        Self {
            table,
            results: json!({}),
            checks: Vec::new(),
            fields: Vec::new(),
        }
    }

    fn dump(&mut self, name: String, g: &Grid, u: &GridFunction) -> Result<()> {
        let mut buf = Vec::new();
        g.dump(u.values(), &mut buf)?;
        self.fields.push((name, buf));
        Ok(())
    }
}

fn to_json<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).unwrap_or(Value::Null)
}

fn build_grid(cfg: &ExperimentConfig) -> Result<Grid> {
    Grid::build(&cfg.geometry, &cfg.weights)
}

// ---------------------------------------------------------------- tasks

fn norms(cfg: &ExperimentConfig, g: &Grid) -> Result<Outcome> {
    let (exp, o) = (&cfg.exponents, &cfg.options);
    let mut out = Outcome::new(Table::new(&[
        "index",
        "modular",
        "luxemburg",
        "lowerSandwich",
        "upperSandwich",
        "eNorm",
        "lqNorm",
        "sandwich",
    ]));
    out.checks
        .extend(verify::grid_suite(&cfg.geometry, &cfg.weights)?);
    let (checks, reports) = verify::norm_suite(exp, g, o.samples, cfg.seed)?;
    out.checks.extend(checks);
    out.checks.push(verify::growth_suite(exp, g)?);
    let (gradient, rows) =
        verify::gradient_suite(exp, o.lambda, g, &o.eps, o.gradient_samples, cfg.seed)?;
    out.checks.push(gradient);
    out.checks.extend(verify::identity_suite(
        exp,
        o.lambda,
        g,
        o.pairs,
        cfg.seed,
        o.monotonicity_c,
    )?);
    for (i, r) in reports.iter().enumerate() {
        out.table.push(vec![
            i.to_string(),
            num(r.modular),
            num(r.luxemburg),
            num(r.lower_sandwich),
            num(r.upper_sandwich),
            opt_num(r.e_norm),
            num(r.lq_norm),
            r.sandwich_holds(SANDWICH_TOL).to_string(),
        ]);
    }
    out.results = json!({
        "normReports": to_json(&reports),
        "gradientErrors": to_json(&rows),
    });
    Ok(out)
}

fn pair_table(with_bound: bool) -> Table {
    let mut cols = vec![
        "mode",
        "lambda",
        "value",
        "residual",
        "iterations",
        "constraint",
    ];
    if with_bound {
        cols.push("subspaceBound");
    }
    cols.push("flags");
    Table::new(&cols)
}

fn pair_row(k: usize, p: &EigenPair, bound: Option<f64>) -> Vec<String> {
    let mut row = vec![
        (k + 1).to_string(),
        num(p.lambda),
        num(p.level),
        num(p.residual),
        p.iterations.to_string(),
        num(p.constraint_value),
    ];
    if let Some(b) = bound {
        row.push(num(b));
    }
    let mut flags = Vec::new();
    if p.heuristic {
        flags.push("heuristic");
    }
    match p.simple {
        Some(true) => flags.push("simple"),
        Some(false) => flags.push("notSimple"),
        None => {}
    }
    row.push(flags.join(";"));
    row
}

fn single_phase(cfg: &ExperimentConfig, g: &Grid) -> Result<Outcome> {
    let (r, s) = (cfg.exponents.r, &cfg.solver);
    let mut out = Outcome::new(pair_table(false));
    let pairs = solve_single_phase(r, cfg.options.modes, g, s)?;
    out.checks
        .extend(verify::pair_checks(&pairs, s.tol_residual, 1.0));
    let restarts = single_phase_restarts(r, g, s)?;
    let fields: Vec<&GridFunction> = restarts.iter().map(|p| &p.u).collect();
    let (simple, colinearity) = verify::simplicity_check(&fields);
    out.checks.push(simple);
    out.checks.push(verify::constant_sign_check(g, &pairs[0].u));
    if let Some(second) = pairs.get(1) {
        out.checks
            .push(verify::sign_change_check(g, &second.u, SIGN_CHANGE_TOL));
    }
    for (k, p) in pairs.iter().enumerate() {
        out.table.push(pair_row(k, p, None));
        out.dump(format!("mode_{}.field", k + 1), g, &p.u)?;
    }
    out.results = json!({
        "pairs": to_json(&pairs),
        "restartColinearity": colinearity,
        "restartLambdas": restarts.iter().map(|p| p.lambda).collect::<Vec<_>>(),
    });
    Ok(out)
}

fn scan_points(cfg: &ExperimentConfig, mu_hat: f64) -> Vec<(Option<f64>, f64)> {
    let o = &cfg.options;
    o.multipliers
        .iter()
        .map(|&m| (Some(m), m * mu_hat))
        .chain(o.lambdas.iter().map(|&l| (None, l)))
        .collect()
}

fn nehari(cfg: &ExperimentConfig, g: &Grid) -> Result<Outcome> {
    let (exp, s) = (&cfg.exponents, &cfg.solver);
    let mut out = Outcome::new(Table::new(&[
        "multiplier",
        "lambda",
        "outcome",
        "value",
        "residual",
        "iterations",
        "nehariValue",
        "flags",
    ]));
    let reference = reference_principal(exp.q, g, s)?;
    let points = scan_points(cfg, reference.lambda);
    let scan = verify::nehari_scan(g, exp, s, &reference, &points);
    out.checks.push(Check::count(
        "scanRobustness",
        points.len() - scan.len(),
        0.0,
    ));
    let rows: Vec<verify::ScanRow> = scan.iter().map(|(r, _)| r.clone()).collect();
    let solutions: Vec<_> = scan.iter().filter_map(|(_, s)| s.as_ref()).collect();
    if cfg.task == Task::Nonexistence {
        out.checks.push(verify::nonexistence_check(&rows));
    }
    if !solutions.is_empty() {
        out.checks.push(verify::nehari_level_check(&rows));
        let pairs: Vec<EigenPair> = solutions.iter().map(|s| s.pair.clone()).collect();
        out.checks.push(Check::within(
            "residualBelowTolerance",
            pairs.iter().map(|p| p.residual).fold(0.0, f64::max),
            s.tol_residual,
        ));
        for sol in &solutions {
            out.checks.push(verify::trace_identity(sol, exp, g)?.0);
            out.checks.push(verify::constant_sign_check(g, &sol.pair.u));
        }
        let first = &solutions[0].pair;
        let (sensitivity, ratio) =
            verify::residual_sensitivity(&first.u, first.lambda, exp, g, cfg.seed);
        out.checks.push(sensitivity);
        out.results["residualSensitivityRatio"] = json!(ratio);
    }
    for (i, (r, sol)) in scan.iter().enumerate() {
        out.table.push(vec![
            opt_num(r.multiplier),
            num(r.lambda),
            format!("{:?}", r.outcome),
            opt_num(r.level),
            opt_num(r.residual),
            opt(r.iterations),
            opt_num(r.nehari_value),
            match r.positive {
                Some(true) => "positive".into(),
                Some(false) => "signChanging".into(),
                None => String::new(),
            },
        ]);
        if let Some(sol) = sol {
            out.dump(format!("nehari_{i}.field"), g, &sol.pair.u)?;
        }
    }
    out.dump("reference.field".into(), g, &reference.u)?;
    out.results["muHat"] = json!(reference.lambda);
    out.results["scan"] = to_json(&rows);
    Ok(out)
}

fn min_max(cfg: &ExperimentConfig, g: &Grid) -> Result<Outcome> {
    let (exp, s) = (&cfg.exponents, &cfg.solver);
    let mut out = Outcome::new(pair_table(true));
    let res = solve_min_max(cfg.options.modes, g, exp, s)?;
    let pairs = &res.pairs;
    out.checks
        .extend(verify::pair_checks(pairs, s.tol_residual, 1.0));
    out.checks.push(verify::min_max_ordering(pairs));
    out.checks.push(verify::multiplier_exceeds_level(pairs));
    let modes: Vec<&GridFunction> = pairs.iter().map(|p| &p.u).collect();
    let (refinement, small, large) = verify::refinement_monotone(&modes, g, exp, s)?;
    out.checks.push(refinement);
    let restarts = min_max_restarts(g, exp, s)?;
    let fields: Vec<&GridFunction> = restarts.iter().map(|p| &p.u).collect();
    let (simple, colinearity) = verify::simplicity_check(&fields);
    out.checks.push(simple);
    out.checks.push(verify::constant_sign_check(g, &pairs[0].u));
    if let Some(second) = pairs.get(1) {
        out.checks
            .push(verify::sign_change_check(g, &second.u, SIGN_CHANGE_TOL));
    }
    let (sensitivity, ratio) =
        verify::residual_sensitivity(&pairs[0].u, pairs[0].lambda, exp, g, cfg.seed);
    out.checks.push(sensitivity);
    for (k, p) in pairs.iter().enumerate() {
        out.table
            .push(pair_row(k, p, res.subspace_bounds.get(k).copied()));
        out.dump(format!("mode_{}.field", k + 1), g, &p.u)?;
    }
    out.results = json!({
        "minMax": to_json(&res),
        "refinement": {"bounds": small, "doubledBudget": large},
        "restartColinearity": colinearity,
        "residualSensitivityRatio": ratio,
    });
    Ok(out)
}

fn picone(cfg: &ExperimentConfig, g: &Grid) -> Result<Outcome> {
    let mut out = Outcome::new(Table::new(&[
        "index",
        "kind",
        "proportional",
        "value",
        "scale",
    ]));
    let (checks, rows) = verify::picone_suite(&cfg.exponents, g, cfg.options.pairs, cfg.seed)?;
    out.checks = checks;
    for r in &rows {
        out.table.push(vec![
            r.index.to_string(),
            r.kind.to_string(),
            r.proportional.to_string(),
            num(r.value),
            num(r.scale),
        ]);
    }
    let mut worst: BTreeMap<String, f64> = BTreeMap::new();
    for r in rows.iter().filter(|r| r.proportional) {
        let e = worst.entry(r.kind.to_string()).or_insert(0.0);
        *e = e.max(r.value.abs() / r.scale.max(f64::MIN_POSITIVE));
    }
    out.results = json!({ "worstProportionalRatio": worst });
    Ok(out)
}

fn scaling(cfg: &ExperimentConfig, g: &Grid) -> Result<Outcome> {
    let (exp, s) = (&cfg.exponents, &cfg.solver);
    let mut out = Outcome::new(Table::new(&["t", "quotient", "relativeError"]));
    let reference = reference_principal(exp.q, g, s)?;
    let rows = verify::scaling_limit(g, exp, &reference)?;
    out.checks
        .push(verify::scaling_check(&rows, reference.lambda));
    out.checks.extend(verify::pair_checks(
        std::slice::from_ref(&reference),
        s.tol_residual,
        1.0,
    ));
    for r in &rows {
        out.table
            .push(vec![num(r.t), num(r.quotient), num(r.relative_error)]);
    }
    out.dump("reference.field".into(), g, &reference.u)?;
    out.results = json!({ "muHat": reference.lambda, "rows": to_json(&rows) });
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
struct SweepRow {
    radius: f64,
    resolution: usize,
    mu_hat: Option<f64>,
    lambda: Option<f64>,
    outcome: ScanOutcome,
    value: Option<f64>,
    residual: Option<f64>,
    iterations: Option<usize>,
    message: Option<String>,
}

fn sweep_point(cfg: &ExperimentConfig, radius: f64) -> SweepRow {
    let base = &cfg.geometry;
    let resolution = ((base.resolution as f64 * radius / base.radius).round() as usize).max(8);
    let mut row = SweepRow {
        radius,
        resolution,
        mu_hat: None,
        lambda: None,
        outcome: ScanOutcome::Failed,
        value: None,
        residual: None,
        iterations: None,
        message: None,
    };
    let geometry = Geometry {
        radius,
        resolution,
        ..base.clone()
    };
    let (exp, s) = (&cfg.exponents, &cfg.solver);
    let mut attempt = || -> Result<()> {
        let g = Grid::build(&geometry, &cfg.weights)?;
        let reference = reference_principal(exp.q, &g, s)?;
        row.mu_hat = Some(reference.lambda);
        if exp.regime() == Regime::PLessQ {
            let lambda = cfg.options.multipliers[0] * reference.lambda;
            row.lambda = Some(lambda);
            match solve_nehari_with_reference(lambda, &g, exp, s, &reference)? {
                NehariOutcome::Solution(sol) => {
                    row.outcome = ScanOutcome::Solution;
                    row.value = Some(sol.pair.level);
                    row.residual = Some(sol.pair.residual);
                    row.iterations = Some(sol.pair.iterations);
                }
                NehariOutcome::Degenerate { reason } => {
                    row.outcome = ScanOutcome::Degenerate;
                    row.message = Some(reason);
                }
            }
        } else {
            let p = solve_min_max(1, &g, exp, s)?.pairs.remove(0);
            row.outcome = ScanOutcome::Solution;
            row.lambda = Some(p.lambda);
            row.value = Some(p.level);
            row.residual = Some(p.residual);
            row.iterations = Some(p.iterations);
        }
        Ok(())
    };
    if let Err(e) = attempt() {
        row.message = Some(e.to_string());
    }
    row
}

fn r_sweep(cfg: &ExperimentConfig) -> Result<Outcome> {
    let mut out = Outcome::new(Table::new(&[
        "radius",
        "resolution",
        "muHat",
        "lambda",
        "outcome",
        "value",
        "residual",
        "iterations",
        "relativeChange",
    ]));
    let radii = &cfg.options.radii;
    let rows: Vec<SweepRow> = radii.par_iter().map(|&r| sweep_point(cfg, r)).collect();
    out.checks.push(Check::count(
        "scanRobustness",
        radii.len() - rows.len(),
        0.0,
    ));
    let mut previous: Option<f64> = None;
    for r in &rows {
        let change = match (previous, r.value) {
            (Some(a), Some(b)) => Some((b - a).abs() / a.abs().max(f64::MIN_POSITIVE)),
            _ => None,
        };
        if r.value.is_some() {
            previous = r.value;
        }
        out.table.push(vec![
            num(r.radius),
            r.resolution.to_string(),
            opt_num(r.mu_hat),
            opt_num(r.lambda),
            format!("{:?}", r.outcome),
            opt_num(r.value),
            opt_num(r.residual),
            opt(r.iterations),
            opt_num(change),
        ]);
    }
    out.results = json!({ "sweep": to_json(&rows) });
    Ok(out)
}

fn execute(cfg: &ExperimentConfig, g: &Grid) -> Result<Outcome> {
    match cfg.task {
        Task::Norms => norms(cfg, g),
        Task::SinglePhase => single_phase(cfg, g),
        Task::NehariScan | Task::Nonexistence => nehari(cfg, g),
        Task::MinMax => min_max(cfg, g),
        Task::PiconeAudit => picone(cfg, g),
        Task::ScalingLimit => scaling(cfg, g),
        Task::RSweep => r_sweep(cfg),
    }
}

// ---------------------------------------------------------------- report

/// Merges checks by name and lays them out over the full catalogue.
fn catalogue(checks: &[Check]) -> Vec<InvariantEntry> {
    let merged = verify::merge(checks);
    for c in &merged {
        debug_assert!(
            INVARIANTS.contains(&c.name),
            "uncatalogued check {}",
            c.name
        );
    }
    INVARIANTS
        .iter()
        .map(|&name| match merged.iter().find(|c| c.name == name) {
            Some(c) => InvariantEntry {
                name,
                evaluated: true,
                pass: Some(c.pass),
                slack: Some(c.slack),
            },
            None => InvariantEntry {
                name,
                evaluated: false,
                pass: None,
                slack: None,
            },
        })
        .collect()
}

fn write_atomic(dir: &Path, name: &str, bytes: &[u8]) -> Result<()> {
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.flush()?;
    tmp.persist(dir.join(name))
        .map_err(|e| Error::Io(e.error))?;
    Ok(())
}

/// Runs the configured task and writes `report.json`, `results.csv` and the
/// field dumps into the output directory.
///
/// Errors cover invalid configuration, weights that violate the structural
/// hypotheses, solver failures outside scans, and I/O. Failed invariants are
/// not errors; they are recorded in the report and clear [`RunReport::pass`].
pub fn run(config: &ExperimentConfig) -> Result<RunReport> {
    config.validate()?;
    let start = Instant::now();
    let g = build_grid(config)?;
    let mut warnings = Vec::new();
    let tail = g.m1_tail_fraction();
    if tail > TAIL_WARNING {
        let msg = format!(
            "{:.1}% of ∫m₁ lies in the outer tenth of the domain; the truncation may be too small",
            100.0 * tail
        );
        warn!("{msg}");
        warnings.push(msg);
    }

    info!("running task {}", config.task);
    let mut outcome = execute(config, &g)?;
    let csv = outcome.table.render()?;
    if config.options.check_determinism {
        info!("rerunning task {} for the determinism check", config.task);
        let again = execute(config, &g)?.table.render()?;
        outcome
            .checks
            .push(Check::count("determinism", usize::from(again != csv), 0.0));
    }

    let invariants = catalogue(&outcome.checks);
    let pass = invariants.iter().all(|e| e.pass != Some(false));
    let report = RunReport {
        config: config.clone(),
        elapsed_seconds: start.elapsed().as_secs_f64(),
        warnings,
        results: outcome.results,
        invariants,
        pass,
    };

    let dir = &config.output;
    fs::create_dir_all(dir)?;
    if config.options.dump_fields {
        for (name, bytes) in &outcome.fields {
            write_atomic(dir, name, bytes)?;
        }
    }
    write_atomic(dir, "results.csv", &csv)?;
    let json =
        serde_json::to_vec_pretty(&report).map_err(|e| Error::Io(std::io::Error::other(e)))?;
    write_atomic(dir, "report.json", &json)?;
    Ok(report)
}
