use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::functionals::{nehari_scale, Components, Energy, NehariProjection, Regularization};
use crate::grid::{Grid, GridFunction};
use crate::linalg::dot;
use crate::modular::{Exponents, Regime};

use super::constrained::{hessian_eps, preconditioner, stagnated, ARMIJO_C1, POLISH_STEPS};
use super::single::{no_convergence, reference_principal};
use super::starts::{bump_field, rng_for};
use super::{residual_exact, EigenPair, SolveRegime, SolverConfig, StepRule};

/// Descent hands over to Newton below this residual.
const SWITCH_TOL: f64 = 1e-5;
/// Every `TRACE_STRIDE`-th iterate is kept.
pub const TRACE_STRIDE: usize = 10;

#[derive(Debug, Clone)]
pub struct NehariSolution {
    /// `lambda` is the fixed parameter, `level` the energy `J(u)`, and
    /// `constraint_value` the Nehari functional `I(u)`.
    pub pair: EigenPair,
    /// `μ̂₁` of the reference problem on the same grid.
    pub mu_hat: f64,
    /// Sampled solver iterates, every [`TRACE_STRIDE`]-th iteration.
    pub trace: Vec<GridFunction>,
}

#[derive(Debug, Clone)]
pub enum NehariOutcome {
    Solution(Box<NehariSolution>),
    /// No start admits a projection onto the Nehari set.
    Degenerate {
        reason: String,
    },
}

impl NehariOutcome {
    pub fn is_degenerate(&self) -> bool {
        matches!(self, NehariOutcome::Degenerate { .. })
    }
}

fn project(u: &GridFunction, lambda: f64, exp: &Exponents, g: &Grid) -> Option<GridFunction> {
    let a = u.abs(g);
    let c = Components::compute(&a, exp.p, exp.q, g);
    match nehari_scale(&c, lambda, exp) {
        NehariProjection::Scale(t) if t.is_finite() => Some(a.scaled(t)),
        _ => None,
    }
}

struct NehariRun {
    index: usize,
    u: GridFunction,
    energy: f64,
    residual: f64,
    iterations: usize,
    trace: Vec<GridFunction>,
}

fn run(
    index: usize,
    u0: GridFunction,
    lambda: f64,
    exp: &Exponents,
    g: &Grid,
    cfg: &SolverConfig,
) -> NehariRun {
    let energy = Energy::j(exp, lambda, g);
    let mut u = u0;
    let mut f = energy.value(g, &u);
    let mut history = vec![f];
    let mut trace = Vec::new();
    let mut it = 0usize;

    // projected descent on J over the Nehari set
    while it < cfg.max_iters {
        if it.is_multiple_of(TRACE_STRIDE) {
            trace.push(u.clone());
        }
        if residual_exact(&u, lambda, exp, g) < SWITCH_TOL {
            break;
        }
        let eps = Regularization::default_for(&u, g).eps;
        let gr = g.restrict(&energy.gradient(g, &u, eps));
        let Ok(lu) = preconditioner(&energy, g, &u) else {
            break;
        };
        let d = lu.solve(&gr);
        let slope = dot(&gr, &d);
        if !(slope > 0.0) {
            break;
        }
        let base = g.restrict(u.values());
        let mut s = match cfg.step_rule {
            StepRule::Armijo => 1.0,
            StepRule::FixedDecay => 1.0 / (1.0 + it as f64 / 20.0),
        };
        let mut accepted = None;
        while s > 1e-14 {
            let cand: Vec<f64> = base.iter().zip(&d).map(|(a, b)| a - s * b).collect();
            if let Some(v) = project(&GridFunction::from_dofs(g, &cand), lambda, exp, g) {
                let fv = energy.value(g, &v);
                let ok = match cfg.step_rule {
                    StepRule::Armijo => fv <= f - ARMIJO_C1 * s * slope,
                    StepRule::FixedDecay => fv.is_finite(),
                };
                if ok {
                    accepted = Some((v, fv));
                    break;
                }
            }
            s *= 0.5;
        }
        let Some((v, fv)) = accepted else { break };
        u = v;
        f = fv;
        it += 1;
        history.push(f);
        if stagnated(&history, cfg.tol_stagnation) {
            break;
        }
    }

    // Newton on ∇J = 0; the Hessian is indefinite along the ray
    let degrees = [exp.p, exp.q, exp.q];
    let mut res = residual_exact(&u, lambda, exp, g);
    for _ in 0..POLISH_STEPS {
        if it.is_multiple_of(TRACE_STRIDE) {
            trace.push(u.clone());
        }
        if res <= cfg.tol_residual * 1e-3 {
            break;
        }
        let h = energy.hessian(g, &u, hessian_eps(&degrees, &u));
        let Ok(lu) = h.factor() else { break };
        let rhs: Vec<f64> = g
            .restrict(&energy.gradient(g, &u, 0.0))
            .iter()
            .map(|v| -v)
            .collect();
        let du = lu.solve(&rhs);
        let base = g.restrict(u.values());
        let mut s = 1.0;
        let mut accepted = None;
        for _ in 0..30 {
            let cand: Vec<f64> = base.iter().zip(&du).map(|(a, b)| a + s * b).collect();
            let v = GridFunction::from_dofs(g, &cand);
            let r2 = residual_exact(&v, lambda, exp, g);
            if r2 < res {
                accepted = Some((v, r2));
                break;
            }
            s *= 0.5;
        }
        let Some((v, r2)) = accepted else { break };
        u = v;
        res = r2;
        it += 1;
    }
    if let Some(v) = project(&u, lambda, exp, g) {
        u = v;
        res = residual_exact(&u, lambda, exp, g);
    }
    NehariRun {
        index,
        energy: energy.value(g, &u),
        u,
        residual: res,
        iterations: it,
        trace,
    }
}

fn check(lambda: f64, exp: &Exponents) -> Result<()> {
    exp.validate()?;
    if exp.regime() != Regime::PLessQ {
        return Err(Error::RegimeError(
            "Nehari minimization requires p < q".into(),
        ));
    }
    if !(lambda >= 0.0) {
        return Err(Error::DomainError(format!("λ = {lambda} must be ≥ 0")));
    }
    Ok(())
}

/// Nonnegative minimizer of `J` on the Nehari set for `p < q`, or
/// `Degenerate` when no start can be projected onto it.
pub fn solve_nehari(
    lambda: f64,
    g: &Grid,
    exp: &Exponents,
    cfg: &SolverConfig,
) -> Result<NehariOutcome> {
    check(lambda, exp)?;
    cfg.validate()?;
    if lambda == 0.0 {
        return Ok(NehariOutcome::Degenerate {
            reason: "λ = 0 admits only the trivial solution".into(),
        });
    }
    let reference = reference_principal(exp.q, g, cfg)?;
    solve_nehari_with_reference(lambda, g, exp, cfg, &reference)
}

/// As [`solve_nehari`], reusing a precomputed [`reference_principal`] pair.
/// Its eigenfunction is the first start; the others are random bumps.
pub fn solve_nehari_with_reference(
    lambda: f64,
    g: &Grid,
    exp: &Exponents,
    cfg: &SolverConfig,
    reference: &EigenPair,
) -> Result<NehariOutcome> {
    check(lambda, exp)?;
    cfg.validate()?;
    let mut starts = vec![reference.u.clone()];
    starts.extend(
        (1..cfg.restarts)
            .map(|i| bump_field(g, &mut rng_for(cfg.seed, (1 << 40) | i as u64), false)),
    );
    let admissible: Vec<(usize, GridFunction)> = starts
        .iter()
        .enumerate()
        .filter_map(|(i, u)| project(u, lambda, exp, g).map(|v| (i, v)))
        .collect();
    if admissible.is_empty() {
        return Ok(NehariOutcome::Degenerate {
            reason: format!(
                "λ∫m|u|^q ≤ ∫|∇u|^q for every start (λ/μ̂₁ = {:.6})",
                lambda / reference.lambda
            ),
        });
    }
    let mut runs: Vec<NehariRun> = admissible
        .into_par_iter()
        .map(|(i, u)| run(i, u, lambda, exp, g, cfg))
        .collect();
    let tol = cfg.tol_residual;
    runs.sort_by(|a, b| {
        let ka = if a.residual <= tol {
            a.energy
        } else {
            f64::INFINITY
        };
        let kb = if b.residual <= tol {
            b.energy
        } else {
            f64::INFINITY
        };
        ka.total_cmp(&kb)
            .then(a.residual.total_cmp(&b.residual))
            .then(a.index.cmp(&b.index))
    });
    let best = runs.swap_remove(0);
    let c = Components::compute(&best.u, exp.p, exp.q, g);
    let pair = EigenPair {
        lambda,
        residual: best.residual,
        iterations: best.iterations,
        regime: SolveRegime::NehariPLessQ,
        constraint_value: c.a_grad_p + c.grad_q - lambda * c.m_term,
        heuristic: false,
        level: best.energy,
        simple: None,
        u: best.u,
    };
    if pair.residual > tol {
        return Err(no_convergence(pair));
    }
    Ok(NehariOutcome::Solution(Box::new(NehariSolution {
        pair,
        mu_hat: reference.lambda,
        trace: best.trace,
    })))
}
