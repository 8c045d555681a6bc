//! Eigenpair solvers.
//!
//! * single phase `−Δ_r^a u = μ m|u|^{r−2}u`: minimization of `Ψ` on
//!   `M_r = {∫m|u|ʳ = 1}`, higher modes by penalized deflation;
//! * `p < q`: ground states of `J` on the Nehari set;
//! * `q < p`: critical values of `Φ` on `𝒮 = {(1/q)∫m|u|ᵠ = 1}`.
//!
//! Every solver runs a preconditioned projected descent followed by a
//! Newton polish on the discrete Euler–Lagrange system. Restarts run in
//! parallel and are merged by `(value, restart index)`.

mod constrained;
mod minmax;
mod nehari;
mod single;
pub(crate) mod starts;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functionals::{Energy, Regularization};
use crate::grid::{Grid, GridFunction};
use crate::linalg::{dot, norm_inf};
use crate::modular::{e_norm, Exponents};

pub use minmax::{min_max_restarts, solve_min_max, subspace_upper_bounds, MinMaxResult};
pub use nehari::{solve_nehari, solve_nehari_with_reference, NehariOutcome, NehariSolution};
pub use single::{reference_principal, single_phase_restarts, solve_single_phase};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StepRule {
    /// Backtracking from step 1 with shrink 0.5 and slope factor 1e-4.
    Armijo,
    /// Step `1 / (1 + k/20)` at iteration `k`, halved only to stay admissible.
    FixedDecay,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default, deny_unknown_fields)]
pub struct SolverConfig {
    pub max_iters: usize,
    pub step_rule: StepRule,
    pub tol_residual: f64,
    pub tol_stagnation: f64,
    pub restarts: usize,
    pub seed: u64,
    pub deflation_strength: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_iters: 2000,
            step_rule: StepRule::Armijo,
            tol_residual: 1e-8,
            tol_stagnation: 1e-13,
            restarts: 4,
            seed: 0,
            deflation_strength: 10.0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol_residual > 0.0) {
            return Err(Error::config("solver.tolResidual", "must be > 0"));
        }
        if !(self.tol_stagnation > 0.0) {
            return Err(Error::config("solver.tolStagnation", "must be > 0"));
        }
        if self.restarts < 1 {
            return Err(Error::config("solver.restarts", "must be ≥ 1"));
        }
        if self.max_iters < 1 {
            return Err(Error::config("solver.maxIters", "must be ≥ 1"));
        }
        if !(self.deflation_strength > 0.0) {
            return Err(Error::config("solver.deflationStrength", "must be > 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveRegime {
    SinglePhase,
    NehariPLessQ,
    MinMaxQLessP,
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct EigenPair {
    pub lambda: f64,
    #[serde(skip)]
    pub u: GridFunction,
    pub residual: f64,
    pub iterations: usize,
    pub regime: SolveRegime,
    /// `∫m|u|ʳ` for `M_r`, `(1/q)∫m|u|ᵠ` for `𝒮`, `I(u)` for the Nehari set.
    pub constraint_value: f64,
    /// True for modes found by deflation rather than by plain minimization.
    pub heuristic: bool,
    /// Functional value at `u`: `Ψ`, `Φ` or `J`.
    #[serde(skip)]
    pub level: f64,
    /// For principal pairs: whether all restarts agreed up to sign.
    #[serde(skip)]
    pub simple: Option<bool>,
}

/// Scaled max-norm of the weak residual
/// `⟨a|∇u|^{p−2}∇u + |∇u|^{q−2}∇u, ∇φᵢ⟩ − λ⟨m|u|^{q−2}u, φᵢ⟩` over interior nodes,
/// divided by `max(1, ‖u‖_E)`.
pub fn pde_residual(
    u: &GridFunction,
    lambda: f64,
    exp: &Exponents,
    g: &Grid,
    reg: Regularization,
) -> f64 {
    let r = Energy::j(exp, lambda, g).gradient(g, u, reg.eps);
    let scale = e_norm(u, exp, g).unwrap_or(1.0).max(1.0);
    norm_inf(&g.restrict(&r)) / scale
}

pub(crate) fn residual_exact(u: &GridFunction, lambda: f64, exp: &Exponents, g: &Grid) -> f64 {
    pde_residual(u, lambda, exp, g, Regularization::none())
}

/// `|⟨u, v⟩| / (‖u‖‖v‖)` on nodal values.
pub fn colinearity(u: &GridFunction, v: &GridFunction) -> f64 {
    let (a, b) = (u.values(), v.values());
    let n = (dot(a, a) * dot(b, b)).sqrt();
    if n == 0.0 {
        0.0
    } else {
        dot(a, b).abs() / n
    }
}

/// Smallest pairwise colinearity among the given fields (1 for fewer than two).
pub fn min_pairwise_colinearity(fields: &[&GridFunction]) -> f64 {
    let mut worst = 1.0f64;
    for i in 0..fields.len() {
        for j in i + 1..fields.len() {
            worst = worst.min(colinearity(fields[i], fields[j]));
        }
    }
    worst
}

/// Threshold above which two restarts count as the same eigenfunction.
pub const SIMPLICITY_TOL: f64 = 1e-6;

fn check_exponent(r: f64, g: &Grid) -> Result<()> {
    let n = g.geometry.dimension as f64;
    if !(r > 1.0 && r < n) {
        return Err(Error::DomainError(format!(
            "exponent {r} outside (1, N) with N = {}",
            g.geometry.dimension
        )));
    }
    Ok(())
}
