use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::functionals::Energy;
use crate::grid::{Grid, GridFunction};
use crate::linalg::norm_inf;
use crate::modular::{Exponents, Regime};

use super::constrained::{
    orient, partition, run_deflated_starts, run_starts, sort_runs, Constrained, Deflation,
    ResidualScale, Run,
};
use super::single::{deflated_starts, next_mode, no_convergence};
use super::starts::{bump_field, rng_for};
use super::{min_pairwise_colinearity, EigenPair, SolveRegime, SolverConfig, SIMPLICITY_TOL};

const SWITCH_TOL: f64 = 1e-5;

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct MinMaxResult {
    /// Ordered by `Φ(u_k)`.
    pub pairs: Vec<EigenPair>,
    /// For each `k`, the smallest sampled `sup Φ` over `𝒮 ∩ V` among the
    /// candidate `k`-dimensional subspaces `V`: an upper estimate of the
    /// min-max value (infinite if no candidate had `∫m|u|ᵠ > 0` on all of `V`).
    pub subspace_bounds: Vec<f64>,
}

fn problem<'a>(exp: &Exponents, g: &'a Grid, deflation: Option<Deflation>) -> Constrained<'a> {
    Constrained {
        g,
        objective: Energy::phi(exp, g),
        constraint: Energy::s_constraint(exp.q, g),
        degree: exp.q,
        target: 1.0,
        scale: ResidualScale::Energy(*exp),
        deflation,
    }
}

fn to_pair(pb: &Constrained, run: Run, heuristic: bool) -> EigenPair {
    let u = orient(run.u);
    EigenPair {
        lambda: run.lambda,
        residual: run.residual,
        iterations: run.iterations,
        regime: SolveRegime::MinMaxQLessP,
        constraint_value: pb.constraint_value(&u),
        heuristic,
        level: pb.objective.value(pb.g, &u),
        simple: None,
        u,
    }
}

fn check(g: &Grid, exp: &Exponents, cfg: &SolverConfig) -> Result<()> {
    exp.validate()?;
    cfg.validate()?;
    if exp.regime() != Regime::QLessP {
        return Err(Error::RegimeError(
            "min-max values are computed for q < p".into(),
        ));
    }
    if exp.n != g.geometry.dimension {
        return Err(Error::DomainError(format!(
            "exponent dimension {} differs from grid dimension {}",
            exp.n, g.geometry.dimension
        )));
    }
    Ok(())
}

fn principal_runs(pb: &Constrained, g: &Grid, cfg: &SolverConfig) -> Result<Vec<Run>> {
    let starts = (0..cfg.restarts)
        .map(|i| bump_field(g, &mut rng_for(cfg.seed, i as u64), false))
        .collect();
    let (runs, err) = partition(run_starts(pb, pb, starts, cfg, SWITCH_TOL));
    if runs.is_empty() {
        return Err(err.unwrap_or(Error::IndefiniteConstraint { value: 0.0 }));
    }
    Ok(runs)
}

/// Approximations of the first `k` min-max values of `Φ` on `𝒮` for `q < p`.
///
/// The first pair minimizes `Φ`; later pairs come from penalized deflation
/// followed by a Newton solve of `−Δ_p^a u − Δ_q u = λ m|u|^{q−2}u` and are
/// marked heuristic. Each `lambda` is the multiplier `(1/q)(∫a|∇u|ᵖ + ∫|∇u|ᵠ)`
/// and each `level` is `Φ(u)`.
pub fn solve_min_max(
    k: usize,
    g: &Grid,
    exp: &Exponents,
    cfg: &SolverConfig,
) -> Result<MinMaxResult> {
    check(g, exp, cfg)?;
    if k < 1 {
        return Err(Error::DomainError("number of modes must be ≥ 1".into()));
    }
    let plain = problem(exp, g, None);
    let mut runs = principal_runs(&plain, g, cfg)?;
    let simple = {
        let conv: Vec<&GridFunction> = runs
            .iter()
            .filter(|r| r.residual <= cfg.tol_residual)
            .map(|r| &r.u)
            .collect();
        (conv.len() == runs.len()).then(|| min_pairwise_colinearity(&conv) > 1.0 - SIMPLICITY_TOL)
    };
    let level = |r: &Run| plain.objective.value(g, &r.u);
    sort_runs(&mut runs, |r| {
        if r.residual <= cfg.tol_residual {
            level(r)
        } else {
            f64::INFINITY
        }
    });
    let first = to_pair(&plain, runs.swap_remove(0), false);
    if first.residual > cfg.tol_residual {
        return Err(no_convergence(first));
    }
    let mut pairs = vec![EigenPair { simple, ..first }];
    for mode in 1..k {
        let previous: Vec<&GridFunction> = pairs.iter().map(|p| &p.u).collect();
        let strength = cfg.deflation_strength * pairs[mode - 1].level;
        let deflated = |s: f64| problem(exp, g, Some(Deflation::new(g, &previous, s)));
        let starts = deflated_starts(&plain, cfg, mode, &previous);
        let (runs, err) = partition(run_deflated_starts(
            &deflated, &plain, starts, &previous, strength, cfg,
        ));
        match next_mode(runs, &previous, cfg.tol_residual, level) {
            Ok(run) => pairs.push(to_pair(&plain, run, true)),
            Err(Some(run)) => return Err(no_convergence(to_pair(&plain, run, true))),
            Err(None) => return Err(err.unwrap_or(Error::IndefiniteConstraint { value: 0.0 })),
        }
    }
    pairs.sort_by(|a, b| a.level.total_cmp(&b.level));
    let modes: Vec<&GridFunction> = pairs.iter().map(|p| &p.u).collect();
    let subspace_bounds = subspace_upper_bounds(&modes, g, exp, cfg)?;
    Ok(MinMaxResult {
        pairs,
        subspace_bounds,
    })
}

/// The principal pair found by every restart, in restart order.
pub fn min_max_restarts(g: &Grid, exp: &Exponents, cfg: &SolverConfig) -> Result<Vec<EigenPair>> {
    check(g, exp, cfg)?;
    let plain = problem(exp, g, None);
    Ok(principal_runs(&plain, g, cfg)?
        .into_iter()
        .map(|r| to_pair(&plain, r, false))
        .collect())
}

/// For `k = 1..=modes.len()`: the minimum over `cfg.restarts` candidate
/// subspaces of the sampled supremum of `Φ` on `𝒮 ∩ V`. Candidate `0` is
/// `span{u₁..u_k}`; candidate `j` perturbs each spanning field by a seeded
/// bump. Candidates depend only on `(seed, k, j)`, so a larger budget can
/// only lower the bound.
pub fn subspace_upper_bounds(
    modes: &[&GridFunction],
    g: &Grid,
    exp: &Exponents,
    cfg: &SolverConfig,
) -> Result<Vec<f64>> {
    check(g, exp, cfg)?;
    let pb = problem(exp, g, None);
    Ok((1..=modes.len())
        .map(|k| {
            (0..cfg.restarts)
                .map(|j| {
                    let basis: Vec<Vec<f64>> = modes[..k]
                        .iter()
                        .enumerate()
                        .map(|(i, u)| {
                            if j == 0 {
                                return u.values().to_vec();
                            }
                            let mut rng = rng_for(
                                cfg.seed ^ 0x5eed_5eed,
                                ((k as u64) << 40) | ((j as u64) << 20) | i as u64,
                            );
                            let b = bump_field(g, &mut rng, true);
                            let s = 0.05 * norm_inf(u.values())
                                / norm_inf(b.values()).max(f64::MIN_POSITIVE);
                            u.values()
                                .iter()
                                .zip(b.values())
                                .map(|(x, y)| x + s * y)
                                .collect()
                        })
                        .collect();
                    sup_on_span(&pb, &basis, cfg.seed, k, j)
                })
                .fold(f64::INFINITY, f64::min)
        })
        .collect())
}

/// Sampled supremum of `Φ` over `𝒮 ∩ span(basis)`, refined by a random local
/// ascent; infinite when some sampled direction has `∫m|u|ᵠ ≤ 0`.
fn sup_on_span(pb: &Constrained, basis: &[Vec<f64>], seed: u64, k: usize, j: usize) -> f64 {
    let g = pb.g;
    let n = basis.len();
    let eval = |c: &[f64]| -> Option<f64> {
        let mut v = vec![0.0; g.n_nodes()];
        for (ci, b) in c.iter().zip(basis) {
            for (x, y) in v.iter_mut().zip(b) {
                *x += ci * y;
            }
        }
        pb.project(&GridFunction::from_nodal(g, v))
            .map(|u| pb.objective.value(g, &u))
    };
    let normalize = |c: &mut Vec<f64>| {
        let s = c.iter().map(|x| x * x).sum::<f64>().sqrt();
        c.iter_mut().for_each(|x| *x /= s);
    };
    let mut rng = rng_for(
        seed ^ 0x0b0d,
        ((k as u64) << 40) | ((j as u64) << 20) | (1 << 19),
    );
    let mut best = f64::NEG_INFINITY;
    let mut arg = vec![0.0; n];
    let mut candidates: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|l| if l == i { 1.0 } else { 0.0 }).collect())
        .collect();
    for _ in 0..64 * n {
        let mut c: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        normalize(&mut c);
        candidates.push(c);
    }
    for c in candidates {
        match eval(&c) {
            None => return f64::INFINITY,
            Some(v) if v > best => {
                best = v;
                arg = c;
            }
            _ => {}
        }
    }
    if n > 1 {
        let mut step = 0.3;
        for _ in 0..200 {
            let mut c: Vec<f64> = arg
                .iter()
                .map(|x| x + step * rng.random_range(-1.0..1.0))
                .collect();
            normalize(&mut c);
            match eval(&c) {
                None => return f64::INFINITY,
                Some(v) if v > best => {
                    best = v;
                    arg = c;
                }
                _ => step *= 0.95,
            }
        }
    }
    best
}
