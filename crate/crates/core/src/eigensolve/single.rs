use crate::error::{Error, Result};
use crate::functionals::{Energy, Term};
use crate::grid::{Grid, GridFunction};

use super::constrained::{
    orient, orthogonalize, partition, run_deflated_starts, run_starts, sort_runs, Constrained,
    Deflation, ResidualScale, Run, DUPLICATE_COLINEARITY,
};
use super::starts::{bump_field, rng_for};
use super::{
    check_exponent, colinearity, min_pairwise_colinearity, EigenPair, SolveRegime, SolverConfig,
    SIMPLICITY_TOL,
};

/// Runs below this residual hand over from descent to Newton.
const SWITCH_TOL: f64 = 1e-5;
/// Draws per deflated start before settling for an inadmissible one.
const START_DRAWS: usize = 20;

/// `Ψ/r` on `{(1/r)∫m|u|ʳ = 1/r}`: the multiplier is then the eigenvalue of
/// `−div(c|∇u|^{r−2}∇u) = μ m|u|^{r−2}u`.
fn problem<'a>(
    coef: Option<&'a [f64]>,
    r: f64,
    g: &'a Grid,
    deflation: Option<Deflation>,
) -> Constrained<'a> {
    Constrained {
        g,
        objective: Energy {
            grad_terms: vec![Term::new(coef, r, 1.0 / r)],
            zero_terms: Vec::new(),
        },
        constraint: Energy {
            grad_terms: Vec::new(),
            zero_terms: vec![Term::new(Some(&g.weights.cell.m), r, 1.0 / r)],
        },
        degree: r,
        target: 1.0 / r,
        scale: ResidualScale::Single { coef, r },
        deflation,
    }
}

fn to_pair(pb: &Constrained, run: Run, r: f64, heuristic: bool) -> EigenPair {
    let u = orient(run.u);
    EigenPair {
        lambda: run.lambda,
        residual: run.residual,
        iterations: run.iterations,
        regime: SolveRegime::SinglePhase,
        constraint_value: r * pb.constraint_value(&u),
        heuristic,
        level: r * pb.objective.value(pb.g, &u),
        simple: None,
        u,
    }
}

fn principal_runs(coef: Option<&[f64]>, r: f64, g: &Grid, cfg: &SolverConfig) -> Result<Vec<Run>> {
    let pb = problem(coef, r, g, None);
    let starts = (0..cfg.restarts)
        .map(|i| bump_field(g, &mut rng_for(cfg.seed, i as u64), false))
        .collect();
    let (runs, err) = partition(run_starts(&pb, &pb, starts, cfg, SWITCH_TOL));
    if runs.is_empty() {
        return Err(err.unwrap_or(Error::IndefiniteConstraint { value: 0.0 }));
    }
    Ok(runs)
}

fn principal(coef: Option<&[f64]>, r: f64, g: &Grid, cfg: &SolverConfig) -> Result<EigenPair> {
    let pb = problem(coef, r, g, None);
    let mut runs = principal_runs(coef, r, g, cfg)?;
    let converged: Vec<&GridFunction> = runs
        .iter()
        .filter(|x| x.residual <= cfg.tol_residual)
        .map(|x| &x.u)
        .collect();
    let simple = if converged.len() == runs.len() {
        Some(min_pairwise_colinearity(&converged) > 1.0 - SIMPLICITY_TOL)
    } else {
        None
    };
    sort_runs(&mut runs, |x| {
        if x.residual <= cfg.tol_residual {
            x.lambda
        } else {
            f64::INFINITY
        }
    });
    let best = runs.swap_remove(0);
    let converged = best.residual <= cfg.tol_residual;
    let mut pair = to_pair(&pb, best, r, false);
    pair.simple = simple;
    if !converged {
        return Err(no_convergence(pair));
    }
    Ok(pair)
}

pub(crate) fn no_convergence(pair: EigenPair) -> Error {
    Error::NoConvergence {
        iterations: pair.iterations,
        residual: pair.residual,
        best: Some(Box::new(pair)),
    }
}

/// Candidate for the next mode among deflated restarts: converged, not a
/// repeat of an earlier mode, smallest `key`.
pub(crate) fn next_mode(
    mut runs: Vec<Run>,
    previous: &[&GridFunction],
    tol: f64,
    key: impl Fn(&Run) -> f64,
) -> std::result::Result<Run, Option<Run>> {
    let fresh = |x: &Run| {
        previous
            .iter()
            .all(|p| colinearity(&x.u, p) < DUPLICATE_COLINEARITY)
    };
    sort_runs(&mut runs, |x| {
        if x.residual <= tol && fresh(x) {
            key(x)
        } else {
            f64::INFINITY
        }
    });
    if runs.is_empty() {
        return Err(None);
    }
    let best = runs.swap_remove(0);
    if best.residual <= tol && fresh(&best) {
        Ok(best)
    } else {
        Err(Some(best))
    }
}

/// Deflated starts for mode number `mode` (zero based): signed bumps with
/// their components along `previous` removed. A start that `pb` cannot
/// project is redrawn; after `START_DRAWS` draws the raw bump, and finally a
/// positive bump, is used instead and the penalty alone does the separating.
pub(crate) fn deflated_starts(
    pb: &Constrained,
    cfg: &SolverConfig,
    mode: usize,
    previous: &[&GridFunction],
) -> Vec<GridFunction> {
    let g = pb.g;
    (0..cfg.restarts)
        .map(|i| {
            let mut rng = rng_for(cfg.seed, ((mode as u64) << 32) | i as u64);
            let mut raw = None;
            for _ in 0..START_DRAWS {
                let b = bump_field(g, &mut rng, true);
                let o = orthogonalize(g, &b, previous);
                if pb.project(&o).is_some() {
                    return o;
                }
                if raw.is_none() && pb.project(&b).is_some() {
                    raw = Some(b);
                }
            }
            raw.unwrap_or_else(|| bump_field(g, &mut rng, false))
        })
        .collect()
}

fn solve_modes(
    coef: Option<&[f64]>,
    r: f64,
    k: usize,
    g: &Grid,
    cfg: &SolverConfig,
) -> Result<Vec<EigenPair>> {
    check_exponent(r, g)?;
    cfg.validate()?;
    if k < 1 {
        return Err(Error::DomainError("number of modes must be ≥ 1".into()));
    }
    let mut pairs = vec![principal(coef, r, g, cfg)?];
    let plain = problem(coef, r, g, None);
    for mode in 1..k {
        let previous: Vec<&GridFunction> = pairs.iter().map(|p| &p.u).collect();
        let strength = cfg.deflation_strength * pairs[mode - 1].lambda / r;
        let deflated = |s: f64| problem(coef, r, g, Some(Deflation::new(g, &previous, s)));
        let starts = deflated_starts(&plain, cfg, mode, &previous);
        let (runs, err) = partition(run_deflated_starts(
            &deflated, &plain, starts, &previous, strength, cfg,
        ));
        match next_mode(runs, &previous, cfg.tol_residual, |x| x.lambda) {
            Ok(run) => {
                let pair = to_pair(&plain, run, r, true);
                pairs.push(pair);
            }
            Err(Some(run)) => return Err(no_convergence(to_pair(&plain, run, r, true))),
            Err(None) => return Err(err.unwrap_or(Error::IndefiniteConstraint { value: 0.0 })),
        }
    }
    pairs.sort_by(|a, b| a.lambda.total_cmp(&b.lambda));
    Ok(pairs)
}

/// First `k` eigenpairs of `−Δ_r^a u = μ m|u|^{r−2}u`, normalized by
/// `∫m|u|ʳ = 1`, in nondecreasing order. Modes beyond the first come from
/// penalized deflation and are marked heuristic.
pub fn solve_single_phase(
    r: f64,
    k: usize,
    g: &Grid,
    cfg: &SolverConfig,
) -> Result<Vec<EigenPair>> {
    solve_modes(Some(&g.weights.cell.a), r, k, g, cfg)
}

/// Principal pair of the weight-free problem `−Δ_q u = μ m|u|^{q−2}u`, whose
/// eigenvalue `μ̂₁` is the infimum of `∫|∇u|ᵠ / ∫m|u|ᵠ` on the grid.
pub fn reference_principal(q: f64, g: &Grid, cfg: &SolverConfig) -> Result<EigenPair> {
    Ok(solve_modes(None, q, 1, g, cfg)?.remove(0))
}

/// The principal pair found by every restart, in restart order.
pub fn single_phase_restarts(r: f64, g: &Grid, cfg: &SolverConfig) -> Result<Vec<EigenPair>> {
    check_exponent(r, g)?;
    cfg.validate()?;
    let coef = Some(g.weights.cell.a.as_slice());
    let pb = problem(coef, r, g, None);
    Ok(principal_runs(coef, r, g, cfg)?
        .into_iter()
        .map(|run| to_pair(&pb, run, r, false))
        .collect())
}
