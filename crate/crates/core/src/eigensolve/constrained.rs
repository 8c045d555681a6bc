//! Minimization of `O(u)` on `{C(u) = target}` for a homogeneous constraint `C`.

use crate::error::{Error, Result};
use crate::functionals::{mass_matrix, Energy, Regularization};
use crate::grid::{Grid, GridFunction};
use crate::linalg::{dot, norm_inf, BandLu};
use crate::modular::{e_norm, Exponents};

use super::{SolverConfig, StepRule};

pub(crate) const ARMIJO_C1: f64 = 1e-4;
pub(crate) const STAGNATION_WINDOW: usize = 25;
const MIN_STEP: f64 = 1e-14;

/// Norm used to scale residuals.
#[derive(Debug, Clone, Copy)]
pub(crate) enum ResidualScale<'a> {
    /// `max(1, ‖u‖_E)`
    Energy(Exponents),
    /// `max(1, (∫c|∇u|ʳ)^{1/r} + (∫env|u|ʳ)^{1/r})`
    Single { coef: Option<&'a [f64]>, r: f64 },
}

impl ResidualScale<'_> {
    pub fn eval(&self, u: &GridFunction, g: &Grid) -> f64 {
        match self {
            ResidualScale::Energy(exp) => e_norm(u, exp, g).unwrap_or(1.0).max(1.0),
            ResidualScale::Single { coef, r } => {
                let gn = u.grad_norms(g);
                let cv = u.cell_values(g);
                let (mut a, mut b) = (0.0, 0.0);
                for k in 0..g.n_cells() {
                    let w = g.quad_weights[k];
                    a += w * coef.map_or(1.0, |c| c[k]) * gn[k].powf(*r);
                    b += w * g.weights.cell.envelope[k] * cv[k].abs().powf(*r);
                }
                (a.powf(1.0 / r) + b.powf(1.0 / r)).max(1.0)
            }
        }
    }
}

/// `s Σ_j ⟨u, u_j⟩²_W / (‖u‖²_W ‖u_j‖²_W)` with `W` the `|m|`-weighted mass.
pub(crate) struct Deflation {
    /// `(W u_j, ‖u_j‖²_W)` as nodal vectors.
    modes: Vec<(Vec<f64>, f64)>,
    strength: f64,
    weight: Vec<f64>,
}

impl Deflation {
    pub fn new(g: &Grid, modes: &[&GridFunction], strength: f64) -> Self {
        let weight: Vec<f64> = g.weights.cell.m.iter().map(|v| v.abs()).collect();
        let modes = modes
            .iter()
            .map(|u| {
                let wu = w_apply(g, &weight, u);
                let n = dot(u.values(), &wu);
                (wu, n)
            })
            .collect();
        Self {
            modes,
            strength,
            weight,
        }
    }

    fn value(&self, g: &Grid, u: &GridFunction) -> f64 {
        let wu = w_apply(g, &self.weight, u);
        let nu = dot(u.values(), &wu);
        if nu == 0.0 {
            return 0.0;
        }
        self.strength
            * self
                .modes
                .iter()
                .map(|(wv, nv)| dot(u.values(), wv).powi(2) / (nu * nv))
                .sum::<f64>()
    }

    fn add_gradient(&self, g: &Grid, u: &GridFunction, out: &mut [f64]) {
        let wu = w_apply(g, &self.weight, u);
        let nu = dot(u.values(), &wu);
        if nu == 0.0 {
            return;
        }
        for (wv, nv) in &self.modes {
            let c = dot(u.values(), wv);
            let f1 = self.strength * 2.0 * c / (nu * nv);
            let f2 = self.strength * 2.0 * c * c / (nu * nu * nv);
            for i in 0..out.len() {
                if !g.boundary[i] {
                    out[i] += f1 * wv[i] - f2 * wu[i];
                }
            }
        }
    }
}

fn w_apply(g: &Grid, weight: &[f64], u: &GridFunction) -> Vec<f64> {
    let cv = u.cell_values(g);
    let mut out = vec![0.0; g.n_nodes()];
    for (k, cell) in g.cells.iter().enumerate() {
        let f = g.quad_weights[k] * weight[k] * cv[k];
        for l in 0..cell.len {
            out[cell.nodes[l]] += f * cell.interp[l];
        }
    }
    out
}

/// Kačanov-type preconditioner: the secant stiffness of `energy` at `u`
/// plus a small envelope mass shift.
pub(crate) fn preconditioner(energy: &Energy, g: &Grid, u: &GridFunction) -> Result<BandLu> {
    let norms = u.grad_norms(g);
    let mean = norms.iter().sum::<f64>() / norms.len().max(1) as f64;
    let eps = (1e-2 * mean).max(1e-10);
    let mut k = energy.secant(g, u, eps);
    let m = mass_matrix(g, &g.weights.cell.envelope);
    let shift = 1e-8 * k.max_diag().max(f64::MIN_POSITIVE) / m.max_diag().max(f64::MIN_POSITIVE);
    k.axpy(shift, &m);
    k.factor()
}

/// Smoothing used inside Hessians: zero when every exponent is at least two.
pub(crate) fn hessian_eps(degrees: &[f64], u: &GridFunction) -> f64 {
    if degrees.iter().all(|e| *e >= 2.0) {
        0.0
    } else {
        let m = norm_inf(u.grad()).max(norm_inf(u.values()));
        (1e-9 * m).max(1e-300)
    }
}

pub(crate) struct Constrained<'a> {
    pub g: &'a Grid,
    pub objective: Energy<'a>,
    pub constraint: Energy<'a>,
    /// Homogeneity degree of `constraint`.
    pub degree: f64,
    pub target: f64,
    pub scale: ResidualScale<'a>,
    pub deflation: Option<Deflation>,
}

pub(crate) struct Descent {
    pub u: GridFunction,
    pub iterations: usize,
}

pub(crate) struct Polished {
    pub u: GridFunction,
    pub lambda: f64,
    pub residual: f64,
    pub iterations: usize,
}

impl<'a> Constrained<'a> {
    pub fn constraint_value(&self, u: &GridFunction) -> f64 {
        self.constraint.value(self.g, u)
    }

    /// Radial rescaling onto the constraint set; `None` when `C(u) ≤ 0`.
    pub fn project(&self, u: &GridFunction) -> Option<GridFunction> {
        let c = self.constraint_value(u);
        if !(c > 0.0) || !c.is_finite() {
            return None;
        }
        Some(u.scaled((self.target / c).powf(1.0 / self.degree)))
    }

    pub fn value(&self, u: &GridFunction) -> f64 {
        let v = self.objective.value(self.g, u);
        match &self.deflation {
            Some(d) => v + d.value(self.g, u),
            None => v,
        }
    }

    fn objective_gradient(&self, u: &GridFunction, eps: f64) -> Vec<f64> {
        let mut gr = self.objective.gradient(self.g, u, eps);
        if let Some(d) = &self.deflation {
            d.add_gradient(self.g, u, &mut gr);
        }
        gr
    }

    /// Multiplier `⟨∇O, u⟩ / ⟨∇C, u⟩` and the scaled residual of `∇O − λ∇C`
    /// (penalty excluded, no smoothing).
    pub fn multiplier_residual(&self, u: &GridFunction) -> (f64, f64) {
        let g = self.g;
        let go = self.objective.gradient(g, u, 0.0);
        let gc = self.constraint.gradient(g, u, 0.0);
        let lam = dot(&go, u.values()) / dot(&gc, u.values());
        let mut worst = 0.0f64;
        for &i in g.dofs() {
            worst = worst.max((go[i] - lam * gc[i]).abs());
        }
        (lam, worst / self.scale.eval(u, g))
    }

    /// Preconditioned projected gradient descent. Stops on stagnation, on a
    /// residual below `switch_tol`, or after `cfg.max_iters` steps.
    pub fn descend(
        &self,
        u0: &GridFunction,
        cfg: &SolverConfig,
        switch_tol: f64,
    ) -> Result<Descent> {
        let g = self.g;
        let mut u = self.project(u0).ok_or(Error::IndefiniteConstraint {
            value: self.constraint_value(u0),
        })?;
        let mut f = self.value(&u);
        let mut history = vec![f];
        let mut iterations = 0;
        while iterations < cfg.max_iters {
            if self.multiplier_residual(&u).1 < switch_tol {
                break;
            }
            let eps = Regularization::default_for(&u, g).eps;
            let go = g.restrict(&self.objective_gradient(&u, eps));
            let gc = g.restrict(&self.constraint.gradient(g, &u, eps));
            let lu = match preconditioner(&self.objective, g, &u) {
                Ok(lu) => lu,
                Err(_) => break,
            };
            let x = lu.solve(&go);
            let y = lu.solve(&gc);
            let alpha = dot(&gc, &x) / dot(&gc, &y);
            let d: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a - alpha * b).collect();
            let slope = dot(&go, &d);
            if !(slope > 0.0) {
                break;
            }
            let base = g.restrict(u.values());
            let mut s = match cfg.step_rule {
                StepRule::Armijo => 1.0,
                StepRule::FixedDecay => 1.0 / (1.0 + iterations as f64 / 20.0),
            };
            let mut accepted = None;
            while s > MIN_STEP {
                let cand: Vec<f64> = base.iter().zip(&d).map(|(a, b)| a - s * b).collect();
                if let Some(v) = self.project(&GridFunction::from_dofs(g, &cand)) {
                    let fv = self.value(&v);
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
            iterations += 1;
            history.push(f);
            if stagnated(&history, cfg.tol_stagnation) {
                break;
            }
        }
        Ok(Descent { u, iterations })
    }

    /// Damped Newton on `[∇O − λ∇C = 0, C = target]` by block elimination,
    /// renormalizing after every step. The penalty is ignored.
    pub fn polish(&self, u0: GridFunction, cfg: &SolverConfig, max_steps: usize) -> Polished {
        let g = self.g;
        let mut u = u0;
        let (mut lam, mut res) = self.multiplier_residual(&u);
        let goal = cfg.tol_residual * 1e-3;
        let mut degrees = self.objective.degrees();
        degrees.extend(self.constraint.degrees());
        let mut iterations = 0;
        while iterations < max_steps && res > goal {
            let eps = hessian_eps(&degrees, &u);
            let mut k = self.objective.hessian(g, &u, eps);
            k.axpy(-lam, &self.constraint.hessian(g, &u, eps));
            let Ok(lu) = k.factor() else { break };
            let go = g.restrict(&self.objective.gradient(g, &u, 0.0));
            let gc = g.restrict(&self.constraint.gradient(g, &u, 0.0));
            let f1: Vec<f64> = go.iter().zip(&gc).map(|(a, b)| lam * b - a).collect();
            let f2 = self.constraint_value(&u) - self.target;
            let a = lu.solve(&f1);
            let b = lu.solve(&gc);
            let dl = (-f2 - dot(&gc, &a)) / dot(&gc, &b);
            if !dl.is_finite() {
                break;
            }
            let du: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + dl * y).collect();
            let base = g.restrict(u.values());
            let mut s = 1.0;
            let mut accepted = None;
            for _ in 0..30 {
                let cand: Vec<f64> = base.iter().zip(&du).map(|(x, y)| x + s * y).collect();
                if let Some(v) = self.project(&GridFunction::from_dofs(g, &cand)) {
                    let (l2, r2) = self.multiplier_residual(&v);
                    if r2 < res {
                        accepted = Some((v, l2, r2));
                        break;
                    }
                }
                s *= 0.5;
            }
            let Some((v, l2, r2)) = accepted else { break };
            u = v;
            lam = l2;
            res = r2;
            iterations += 1;
        }
        Polished {
            u,
            lambda: lam,
            residual: res,
            iterations,
        }
    }
}

/// Outcome of one restart: descent followed by the Newton polish.
pub(crate) struct Run {
    pub index: usize,
    pub u: GridFunction,
    pub lambda: f64,
    pub residual: f64,
    pub iterations: usize,
}

pub(crate) const POLISH_STEPS: usize = 60;

/// Runs every start in parallel; results keep the order of `starts`.
pub(crate) fn run_starts(
    descent: &Constrained,
    polish: &Constrained,
    starts: Vec<GridFunction>,
    cfg: &SolverConfig,
    switch_tol: f64,
) -> Vec<Result<Run>> {
    use rayon::prelude::*;
    starts
        .into_par_iter()
        .enumerate()
        .map(|(index, u0)| {
            let d = descent.descend(&u0, cfg, switch_tol)?;
            let p = polish.polish(d.u, cfg, POLISH_STEPS);
            Ok(Run {
                index,
                u: p.u,
                lambda: p.lambda,
                residual: p.residual,
                iterations: d.iterations + p.iterations,
            })
        })
        .collect()
}

/// Strength escalations (by 10×) before giving up on a new mode.
const ESCALATIONS: usize = 6;
/// Two modes with larger colinearity count as the same mode.
pub(crate) const DUPLICATE_COLINEARITY: f64 = 0.999;

/// Deflated descent from each start, then the Newton polish of the
/// undeflated problem. The penalty strength grows tenfold while the polish
/// keeps landing on an earlier mode.
pub(crate) fn run_deflated_starts<'a>(
    deflated: &(dyn Fn(f64) -> Constrained<'a> + Sync),
    polish: &Constrained,
    starts: Vec<GridFunction>,
    previous: &[&GridFunction],
    strength: f64,
    cfg: &SolverConfig,
) -> Vec<Result<Run>> {
    use rayon::prelude::*;
    let fresh = |u: &GridFunction| {
        previous
            .iter()
            .all(|p| super::colinearity(u, p) < DUPLICATE_COLINEARITY)
    };
    starts
        .into_par_iter()
        .enumerate()
        .map(|(index, u0)| {
            let mut s = strength;
            let mut iterations = 0;
            let mut last: Option<Run> = None;
            for _ in 0..=ESCALATIONS {
                let d = match deflated(s).descend(&u0, cfg, 0.0) {
                    Ok(d) => d,
                    Err(e) if last.is_none() => return Err(e),
                    Err(_) => break,
                };
                let p = polish.polish(d.u, cfg, POLISH_STEPS);
                iterations += d.iterations + p.iterations;
                let done = fresh(&p.u) && p.residual <= cfg.tol_residual;
                last = Some(Run {
                    index,
                    u: p.u,
                    lambda: p.lambda,
                    residual: p.residual,
                    iterations,
                });
                if done {
                    break;
                }
                s *= 10.0;
            }
            Ok(last.expect("first escalation either polished or returned"))
        })
        .collect()
}

/// Splits restart outcomes into successful runs and the first error.
pub(crate) fn partition(runs: Vec<Result<Run>>) -> (Vec<Run>, Option<Error>) {
    let mut ok = Vec::new();
    let mut err = None;
    for r in runs {
        match r {
            Ok(run) => ok.push(run),
            Err(e) => {
                if err.is_none() {
                    err = Some(e);
                }
            }
        }
    }
    (ok, err)
}

/// Orders runs by `(key, restart index)`.
pub(crate) fn sort_runs(runs: &mut [Run], key: impl Fn(&Run) -> f64) {
    runs.sort_by(|a, b| key(a).total_cmp(&key(b)).then(a.index.cmp(&b.index)));
}

/// Removes the `W`-components of `u` along `modes`.
pub(crate) fn orthogonalize(g: &Grid, u: &GridFunction, modes: &[&GridFunction]) -> GridFunction {
    let weight: Vec<f64> = g.weights.cell.m.iter().map(|v| v.abs()).collect();
    let mut v = u.values().to_vec();
    for m in modes {
        let wm = w_apply(g, &weight, m);
        let nm = dot(m.values(), &wm);
        if nm > 0.0 {
            let c = dot(&v, &wm) / nm;
            for (x, y) in v.iter_mut().zip(m.values()) {
                *x -= c * y;
            }
        }
    }
    GridFunction::from_nodal(g, v)
}

/// Flips `u` so that its nodal sum is nonnegative.
pub(crate) fn orient(u: GridFunction) -> GridFunction {
    if u.values().iter().sum::<f64>() < 0.0 {
        u.scaled(-1.0)
    } else {
        u
    }
}

/// Relative decrease over the last window below `tol`.
pub(crate) fn stagnated(history: &[f64], tol: f64) -> bool {
    let n = history.len();
    if n <= STAGNATION_WINDOW {
        return false;
    }
    let old = history[n - 1 - STAGNATION_WINDOW];
    let new = history[n - 1];
    (old - new) <= tol * new.abs().max(f64::MIN_POSITIVE)
}
