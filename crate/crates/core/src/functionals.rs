//! Variational quantities on a grid: the energy `J`, the Nehari functional
//! `I`, the constrained functionals `Φ` and `Ψ`, Rayleigh quotients, the
//! Nehari ray projection, both Picone kernels and the strong monotonicity
//! bound used as a convergence diagnostic.
//!
//! Every functional here is a finite sum of terms `s ∫ c(x) |∇u|^e` and
//! `s ∫ c(x) |u|^e`, so one small engine ([`Energy`]) provides values,
//! gradients and banded Hessians for all of them. Gradients replace
//! `|z|^{e-2}` by `(|z|² + ε²)^{(e-2)/2}`; values never see `ε`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{Grid, GridFunction};
use crate::linalg::BandMatrix;
use crate::modular::{Exponents, Regime};

/// Smoothing of the gradient weight `|z|^{e-2}` near `z = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Regularization {
    pub eps: f64,
}

impl Regularization {
    /// `eps = 0` is accepted only when no exponent is below two.
    pub fn new(eps: f64, exponents: &[f64]) -> Result<Self> {
        if !(eps >= 0.0) || !eps.is_finite() {
            return Err(Error::DomainError(format!("eps must be ≥ 0, got {eps}")));
        }
        if eps == 0.0 && exponents.iter().any(|e| *e < 2.0) {
            return Err(Error::DomainError(
                "eps = 0 requires every exponent to be at least 2".into(),
            ));
        }
        Ok(Self { eps })
    }

    /// `1e-6 · mean |∇u|`, falling back to `1e-12` for flat fields.
    pub fn default_for(u: &GridFunction, g: &Grid) -> Self {
        let norms = u.grad_norms(g);
        let mean = norms.iter().sum::<f64>() / norms.len().max(1) as f64;
        Self {
            eps: (1e-6 * mean).max(1e-12),
        }
    }

    /// No smoothing; used for residual evaluation, where `|z|^{e-1}` is continuous.
    pub(crate) fn none() -> Self {
        Self { eps: 0.0 }
    }
}

/// Named sub-integrals. For `Ψ` the exponent of every entry is `r`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Components {
    /// `∫ a|∇u|ᵖ`
    pub a_grad_p: f64,
    /// `∫ |∇u|ᵠ`
    pub grad_q: f64,
    /// `∫ m|u|ᵠ`
    pub m_term: f64,
    pub m1_term: f64,
    pub m2_term: f64,
}

impl Components {
    /// Sub-integrals with gradient exponent `p` (weighted by `coef`, `None` = 1) and
    /// `q` for both the unweighted gradient term and the zero-order terms.
    pub fn compute(u: &GridFunction, p: f64, q: f64, g: &Grid) -> Self {
        Self::compute_with(u, g.weights.cell.a.as_slice(), p, q, g)
    }

    fn compute_with(u: &GridFunction, coef: &[f64], p: f64, q: f64, g: &Grid) -> Self {
        let norms = u.grad_norms(g);
        let cv = u.cell_values(g);
        let w = &g.weights.cell;
        let mut c = Components::default();
        for k in 0..g.n_cells() {
            let qw = g.quad_weights[k];
            let gn = norms[k];
            c.a_grad_p += qw * coef[k] * gn.powf(p);
            c.grad_q += qw * gn.powf(q);
            let uq = cv[k].abs().powf(q);
            c.m_term += qw * w.m[k] * uq;
            c.m1_term += qw * w.m1[k] * uq;
            c.m2_term += qw * w.m2[k] * uq;
        }
        c
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FunctionalValue {
    pub value: f64,
    /// Nodal gradient, zero on boundary nodes.
    pub gradient: Vec<f64>,
    pub components: Components,
    /// Constraint value, for the constrained functionals `Φ` and `Ψ`.
    pub constraint: Option<f64>,
}

/// One term `scale · ∫ coef(x) |z|^exponent` with `z = ∇u` or `z = u`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Term<'a> {
    /// Per-cell coefficient; `None` means one.
    pub coef: Option<&'a [f64]>,
    pub exponent: f64,
    pub scale: f64,
}

impl<'a> Term<'a> {
    pub fn new(coef: Option<&'a [f64]>, exponent: f64, scale: f64) -> Self {
        Self {
            coef,
            exponent,
            scale,
        }
    }

    #[inline]
    fn c(&self, k: usize) -> f64 {
        self.coef.map_or(1.0, |c| c[k])
    }
}

/// `(s + ε²)^{(e-2)/2}` with the convention that the flux vanishes at zero.
#[inline]
fn flux_weight(sq: f64, e: f64, eps: f64) -> f64 {
    let s = sq + eps * eps;
    if s == 0.0 {
        if e == 2.0 {
            1.0
        } else {
            0.0
        }
    } else if e == 2.0 {
        1.0
    } else {
        s.powf(0.5 * (e - 2.0))
    }
}

/// A sum of gradient terms and zero-order terms.
#[derive(Debug, Clone, Default)]
pub(crate) struct Energy<'a> {
    pub grad_terms: Vec<Term<'a>>,
    pub zero_terms: Vec<Term<'a>>,
}

impl<'a> Energy<'a> {
    /// `J = (1/p)∫a|∇u|ᵖ + (1/q)∫|∇u|ᵠ − (λ/q)∫m|u|ᵠ`
    pub fn j(exp: &Exponents, lambda: f64, g: &'a Grid) -> Self {
        Self {
            grad_terms: vec![
                Term::new(Some(&g.weights.cell.a), exp.p, 1.0 / exp.p),
                Term::new(None, exp.q, 1.0 / exp.q),
            ],
            zero_terms: vec![Term::new(Some(&g.weights.cell.m), exp.q, -lambda / exp.q)],
        }
    }

    /// `I = ∫a|∇u|ᵖ + ∫|∇u|ᵠ − λ∫m|u|ᵠ`
    pub fn i(exp: &Exponents, lambda: f64, g: &'a Grid) -> Self {
        Self {
            grad_terms: vec![
                Term::new(Some(&g.weights.cell.a), exp.p, 1.0),
                Term::new(None, exp.q, 1.0),
            ],
            zero_terms: vec![Term::new(Some(&g.weights.cell.m), exp.q, -lambda)],
        }
    }

    /// `Φ = (1/p)∫a|∇u|ᵖ + (1/q)∫|∇u|ᵠ`
    pub fn phi(exp: &Exponents, g: &'a Grid) -> Self {
        Self {
            grad_terms: vec![
                Term::new(Some(&g.weights.cell.a), exp.p, 1.0 / exp.p),
                Term::new(None, exp.q, 1.0 / exp.q),
            ],
            zero_terms: Vec::new(),
        }
    }

    /// `(1/q)∫m|u|ᵠ`, the constraint defining `𝒮`.
    pub fn s_constraint(q: f64, g: &'a Grid) -> Self {
        Self {
            grad_terms: Vec::new(),
            zero_terms: vec![Term::new(Some(&g.weights.cell.m), q, 1.0 / q)],
        }
    }

    /// `Ψ = ∫ c|∇u|ʳ` with `c = a` or `c ≡ 1`.
    pub fn psi(coef: Option<&'a [f64]>, r: f64) -> Self {
        Self {
            grad_terms: vec![Term::new(coef, r, 1.0)],
            zero_terms: Vec::new(),
        }
    }

    /// Exponents of all terms.
    pub fn degrees(&self) -> Vec<f64> {
        self.grad_terms
            .iter()
            .chain(&self.zero_terms)
            .map(|t| t.exponent)
            .collect()
    }

    pub fn value(&self, g: &Grid, u: &GridFunction) -> f64 {
        let mut v = 0.0;
        if !self.grad_terms.is_empty() {
            let norms = u.grad_norms(g);
            for t in &self.grad_terms {
                let mut s = 0.0;
                for (k, gn) in norms.iter().enumerate() {
                    s += g.quad_weights[k] * t.c(k) * gn.powf(t.exponent);
                }
                v += t.scale * s;
            }
        }
        if !self.zero_terms.is_empty() {
            let cv = u.cell_values(g);
            for t in &self.zero_terms {
                let mut s = 0.0;
                for (k, x) in cv.iter().enumerate() {
                    s += g.quad_weights[k] * t.c(k) * x.abs().powf(t.exponent);
                }
                v += t.scale * s;
            }
        }
        v
    }

    /// Nodal gradient; boundary entries are zero.
    pub fn gradient(&self, g: &Grid, u: &GridFunction, eps: f64) -> Vec<f64> {
        let d = g.dim();
        let mut out = vec![0.0; g.n_nodes()];
        let grad = u.grad();
        let cv = if self.zero_terms.is_empty() {
            Vec::new()
        } else {
            u.cell_values(g)
        };
        for (k, cell) in g.cells.iter().enumerate() {
            let w = g.quad_weights[k];
            if !self.grad_terms.is_empty() {
                let z = &grad[k * d..(k + 1) * d];
                let sq: f64 = z.iter().map(|v| v * v).sum();
                let mut coeff = 0.0;
                for t in &self.grad_terms {
                    coeff += t.scale * t.exponent * t.c(k) * flux_weight(sq, t.exponent, eps);
                }
                coeff *= w;
                if coeff != 0.0 {
                    for l in 0..cell.len {
                        let dot: f64 = (0..d).map(|a| cell.grad[l][a] * z[a]).sum();
                        out[cell.nodes[l]] += coeff * dot;
                    }
                }
            }
            if !self.zero_terms.is_empty() {
                let x = cv[k];
                let mut coeff = 0.0;
                for t in &self.zero_terms {
                    coeff += t.scale * t.exponent * t.c(k) * flux_weight(x * x, t.exponent, eps);
                }
                let f = w * coeff * x;
                if f != 0.0 {
                    for l in 0..cell.len {
                        out[cell.nodes[l]] += f * cell.interp[l];
                    }
                }
            }
        }
        for (v, b) in out.iter_mut().zip(&g.boundary) {
            if *b {
                *v = 0.0;
            }
        }
        out
    }

    /// Hessian on interior nodes.
    pub fn hessian(&self, g: &Grid, u: &GridFunction, eps: f64) -> BandMatrix {
        self.assemble(g, u, eps, false)
    }

    /// Positive semidefinite secant part `Σ s e c (|z|²+ε²)^{(e-2)/2}` of the
    /// gradient terms with positive scale; a fixed-point (Kačanov) preconditioner.
    pub fn secant(&self, g: &Grid, u: &GridFunction, eps: f64) -> BandMatrix {
        self.assemble(g, u, eps, true)
    }

    fn assemble(&self, g: &Grid, u: &GridFunction, eps: f64, secant: bool) -> BandMatrix {
        let d = g.dim();
        let bw = g.bandwidth();
        let mut h = BandMatrix::zeros(g.dofs().len(), bw, bw);
        let grad = u.grad();
        let cv = if self.zero_terms.is_empty() {
            Vec::new()
        } else {
            u.cell_values(g)
        };
        for (k, cell) in g.cells.iter().enumerate() {
            let w = g.quad_weights[k];
            // local d×d tensor for gradient terms
            let mut dmat = [[0.0; 2]; 2];
            if !self.grad_terms.is_empty() {
                let z = &grad[k * d..(k + 1) * d];
                let sq: f64 = z.iter().map(|v| v * v).sum();
                for t in &self.grad_terms {
                    if secant && t.scale <= 0.0 {
                        continue;
                    }
                    let c = w * t.scale * t.exponent * t.c(k);
                    if c == 0.0 {
                        continue;
                    }
                    let fw = flux_weight(sq, t.exponent, eps);
                    let s = sq + eps * eps;
                    let curv = if secant || s == 0.0 || t.exponent == 2.0 {
                        0.0
                    } else {
                        (t.exponent - 2.0) * s.powf(0.5 * (t.exponent - 4.0))
                    };
                    for a in 0..d {
                        dmat[a][a] += c * fw;
                        for b in 0..d {
                            dmat[a][b] += c * curv * z[a] * z[b];
                        }
                    }
                }
            }
            let mut zcoef = 0.0;
            if !self.zero_terms.is_empty() && !secant {
                let x = cv[k];
                for t in &self.zero_terms {
                    let e = t.exponent;
                    let s = x * x + eps * eps;
                    let second = if e == 2.0 {
                        1.0
                    } else if s == 0.0 {
                        0.0
                    } else {
                        s.powf(0.5 * (e - 2.0)) + (e - 2.0) * x * x * s.powf(0.5 * (e - 4.0))
                    };
                    zcoef += w * t.scale * e * t.c(k) * second;
                }
            }
            for l1 in 0..cell.len {
                let Some(i) = g.dof_of(cell.nodes[l1]) else {
                    continue;
                };
                for l2 in 0..cell.len {
                    let Some(j) = g.dof_of(cell.nodes[l2]) else {
                        continue;
                    };
                    let mut v = zcoef * cell.interp[l1] * cell.interp[l2];
                    for a in 0..d {
                        for b in 0..d {
                            v += cell.grad[l1][a] * dmat[a][b] * cell.grad[l2][b];
                        }
                    }
                    if v != 0.0 {
                        h.add(i, j, v);
                    }
                }
            }
        }
        h
    }
}

/// Mass matrix `Σ_c |K_c| w_c θ_c θ_cᵀ` on interior nodes for a per-cell weight `w`.
pub(crate) fn mass_matrix(g: &Grid, weight: &[f64]) -> BandMatrix {
    let bw = g.bandwidth();
    let mut m = BandMatrix::zeros(g.dofs().len(), bw, bw);
    for (k, cell) in g.cells.iter().enumerate() {
        let c = g.quad_weights[k] * weight[k];
        if c == 0.0 {
            continue;
        }
        for l1 in 0..cell.len {
            let Some(i) = g.dof_of(cell.nodes[l1]) else {
                continue;
            };
            for l2 in 0..cell.len {
                if let Some(j) = g.dof_of(cell.nodes[l2]) {
                    m.add(i, j, c * cell.interp[l1] * cell.interp[l2]);
                }
            }
        }
    }
    m
}

fn check_finite(u: &GridFunction) -> Result<()> {
    if let Some(v) = u.values().iter().find(|v| !v.is_finite()) {
        return Err(Error::NumericError(format!("nodal value {v}")));
    }
    Ok(())
}

/// `J(u) = (1/p)∫a|∇u|ᵖ + (1/q)∫|∇u|ᵠ − (λ/q)∫m|u|ᵠ`.
pub fn eval_j(
    u: &GridFunction,
    lambda: f64,
    exp: &Exponents,
    g: &Grid,
    reg: Regularization,
) -> Result<FunctionalValue> {
    check_finite(u)?;
    let c = Components::compute(u, exp.p, exp.q, g);
    let value = c.a_grad_p / exp.p + c.grad_q / exp.q - lambda * c.m_term / exp.q;
    let gradient = Energy::j(exp, lambda, g).gradient(g, u, reg.eps);
    finish(value, gradient, c, None)
}

/// `I(u) = ∫a|∇u|ᵖ + ∫|∇u|ᵠ − λ∫m|u|ᵠ`.
pub fn eval_i(
    u: &GridFunction,
    lambda: f64,
    exp: &Exponents,
    g: &Grid,
    reg: Regularization,
) -> Result<FunctionalValue> {
    check_finite(u)?;
    let c = Components::compute(u, exp.p, exp.q, g);
    let value = c.a_grad_p + c.grad_q - lambda * c.m_term;
    let gradient = Energy::i(exp, lambda, g).gradient(g, u, reg.eps);
    finish(value, gradient, c, None)
}

/// `Φ(u) = (1/p)∫a|∇u|ᵖ + (1/q)∫|∇u|ᵠ`; the constraint slot holds `(1/q)∫m|u|ᵠ`.
pub fn eval_phi(
    u: &GridFunction,
    exp: &Exponents,
    g: &Grid,
    reg: Regularization,
) -> Result<FunctionalValue> {
    check_finite(u)?;
    let c = Components::compute(u, exp.p, exp.q, g);
    let value = c.a_grad_p / exp.p + c.grad_q / exp.q;
    let gradient = Energy::phi(exp, g).gradient(g, u, reg.eps);
    finish(value, gradient, c, Some(c.m_term / exp.q))
}

/// `Ψ(u) = ∫a|∇u|ʳ`; the constraint slot holds `∫m|u|ʳ`.
pub fn eval_psi(
    u: &GridFunction,
    r: f64,
    g: &Grid,
    reg: Regularization,
) -> Result<FunctionalValue> {
    check_finite(u)?;
    let c = Components::compute(u, r, r, g);
    let gradient = Energy::psi(Some(&g.weights.cell.a), r).gradient(g, u, reg.eps);
    finish(c.a_grad_p, gradient, c, Some(c.m_term))
}

fn finish(
    value: f64,
    gradient: Vec<f64>,
    components: Components,
    constraint: Option<f64>,
) -> Result<FunctionalValue> {
    if !value.is_finite() || gradient.iter().any(|v| !v.is_finite()) {
        return Err(Error::NumericError(
            "functional evaluation overflowed".into(),
        ));
    }
    Ok(FunctionalValue {
        value,
        gradient,
        components,
        constraint,
    })
}

/// Outcome of projecting `|u|` onto the Nehari set along its ray.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NehariProjection {
    Scale(f64),
    /// `λ∫m|u|ᵠ − ∫|∇u|ᵠ` is not positive (or `∫a|∇u|ᵖ = 0`): the ray misses the Nehari set.
    NoProjection,
}

/// Relative size below which the Nehari denominator counts as zero.
pub const NEHARI_MARGIN: f64 = 1e-10;

/// The scaling `t` with `I(t|u|) = 0`, `t = (A / (λM − B))^{1/(q−p)}`.
pub fn neharit(
    u: &GridFunction,
    lambda: f64,
    exp: &Exponents,
    g: &Grid,
) -> Result<NehariProjection> {
    if exp.regime() != Regime::PLessQ {
        return Err(Error::RegimeError(
            "the Nehari projection exists only for p < q".into(),
        ));
    }
    let c = Components::compute(&u.abs(g), exp.p, exp.q, g);
    Ok(nehari_scale(&c, lambda, exp))
}

pub(crate) fn nehari_scale(c: &Components, lambda: f64, exp: &Exponents) -> NehariProjection {
    let lm = lambda * c.m_term;
    let denom = lm - c.grad_q;
    if !(denom > NEHARI_MARGIN * (lm.abs() + c.grad_q)) || !(c.a_grad_p > 0.0) {
        return NehariProjection::NoProjection;
    }
    NehariProjection::Scale((c.a_grad_p / denom).powf(1.0 / (exp.q - exp.p)))
}

/// `Ψ(u) / ∫m|u|ʳ`.
pub fn rayleigh_single(u: &GridFunction, r: f64, g: &Grid) -> Result<f64> {
    let c = Components::compute(u, r, r, g);
    if !(c.m_term > 0.0) {
        return Err(Error::IndefiniteConstraint { value: c.m_term });
    }
    Ok(c.a_grad_p / c.m_term)
}

/// `∫|∇u|ᵠ / ∫m|u|ᵠ`, the quotient of the weight-free `q`-Laplacian.
pub fn rayleigh_reference(u: &GridFunction, q: f64, g: &Grid) -> Result<f64> {
    let c = Components::compute(u, q, q, g);
    if !(c.m_term > 0.0) {
        return Err(Error::IndefiniteConstraint { value: c.m_term });
    }
    Ok(c.grad_q / c.m_term)
}

/// `[(1/p)∫a|∇u|ᵖ + (1/q)∫|∇u|ᵠ] / [(1/q)∫m|u|ᵠ]`.
pub fn rayleigh_double(u: &GridFunction, exp: &Exponents, g: &Grid) -> Result<f64> {
    let c = Components::compute(u, exp.p, exp.q, g);
    if !(c.m_term > 0.0) {
        return Err(Error::IndefiniteConstraint { value: c.m_term });
    }
    Ok((c.a_grad_p / exp.p + c.grad_q / exp.q) / (c.m_term / exp.q))
}

fn check_positive(name: &str, u: &GridFunction, g: &Grid) -> Result<()> {
    let interior: Vec<f64> = g.dofs().iter().map(|&i| u.values()[i]).collect();
    let max = interior.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = interior.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(max > 0.0) || !(min > 1e-12 * max) {
        return Err(Error::PositivityError(format!(
            "{name}: interior range [{min:e}, {max:e}] is not strictly positive"
        )));
    }
    Ok(())
}

/// One half of an expanded Picone integrand at a cell:
/// `c[(1 + (s−1)ρˢ)|∇u|ᵉ − s ρ^{s−1} |∇u|^{e−2} ∇u·∇v]` with `ρ = v/u`.
#[inline]
fn picone_half(ratio: f64, s: f64, e: f64, gu: &[f64], gv: &[f64]) -> f64 {
    let nu2: f64 = gu.iter().map(|x| x * x).sum();
    let nu = nu2.sqrt();
    let dot: f64 = gu.iter().zip(gv).map(|(a, b)| a * b).sum();
    let cross = if nu == 0.0 {
        0.0
    } else {
        s * ratio.powf(s - 1.0) * nu.powf(e - 2.0) * dot
    };
    (1.0 + (s - 1.0) * ratio.powf(s)) * nu.powf(e) - cross
}

/// Symmetric Picone pairing with test exponent `s` and operator exponent `e`.
fn picone_pair(
    u: &GridFunction,
    v: &GridFunction,
    coef: Option<&[f64]>,
    s: f64,
    e: f64,
    g: &Grid,
) -> f64 {
    let d = g.dim();
    let uc = u.cell_values(g);
    let vc = v.cell_values(g);
    let mut total = 0.0;
    for k in 0..g.n_cells() {
        let c = coef.map_or(1.0, |c| c[k]);
        if c == 0.0 || (uc[k] == 0.0 && vc[k] == 0.0) {
            continue;
        }
        let gu = &u.grad()[k * d..(k + 1) * d];
        let gv = &v.grad()[k * d..(k + 1) * d];
        let part =
            picone_half(vc[k] / uc[k], s, e, gu, gv) + picone_half(uc[k] / vc[k], s, e, gv, gu);
        total += g.quad_weights[k] * c * part;
    }
    total
}

/// Picone quantity of the weighted `r`-Laplacian in expanded gradient form.
pub fn picone_single(u: &GridFunction, v: &GridFunction, r: f64, g: &Grid) -> Result<f64> {
    check_positive("u", u, g)?;
    check_positive("v", v, g)?;
    Ok(picone_pair(u, v, Some(&g.weights.cell.a), r, r, g))
}

/// Double phase Picone quantity `I₁ + I₂`: the `p`-operator tested with
/// `q`-homogeneous quotients plus the `q`-Laplacian part. Defined for `q < p` only.
pub fn picone_double(u: &GridFunction, v: &GridFunction, exp: &Exponents, g: &Grid) -> Result<f64> {
    if exp.regime() != Regime::QLessP {
        return Err(Error::RegimeError(
            "the double phase Picone inequality is only established for q < p".into(),
        ));
    }
    check_positive("u", u, g)?;
    check_positive("v", v, g)?;
    let i1 = picone_pair(u, v, Some(&g.weights.cell.a), exp.q, exp.p, g);
    let i2 = picone_pair(u, v, None, exp.q, exp.q, g);
    Ok(i1 + i2)
}

/// Magnitude used to judge Picone values: `∫a(|∇u|ʳ + |∇v|ʳ)`.
pub fn picone_scale(
    u: &GridFunction,
    v: &GridFunction,
    coef: Option<&[f64]>,
    r: f64,
    g: &Grid,
) -> f64 {
    let (nu, nv) = (u.grad_norms(g), v.grad_norms(g));
    (0..g.n_cells())
        .map(|k| g.quad_weights[k] * coef.map_or(1.0, |c| c[k]) * (nu[k].powf(r) + nv[k].powf(r)))
        .sum()
}

/// Integrated strong monotonicity bound for `z ↦ |z|^{r-2}z`:
/// returns `(∫|z₁−z₂|ʳ, C (∫X)^{θ/2} (∫|z₁|ʳ+|z₂|ʳ)^{1−θ/2})` where
/// `X = (|z₁|^{r-2}z₁ − |z₂|^{r-2}z₂)·(z₁−z₂)` and `θ = min(r, 2)`.
pub fn monotonicity_gap(z1: &[f64], z2: &[f64], r: f64, g: &Grid, c: f64) -> Result<(f64, f64)> {
    let d = g.dim();
    if z1.len() != g.n_cells() * d || z2.len() != z1.len() {
        return Err(Error::DimensionError {
            expected: g.n_cells() * d,
            got: z1.len().max(z2.len()),
        });
    }
    if !(r > 1.0) {
        return Err(Error::DomainError(format!("r = {r} must exceed 1")));
    }
    let theta = if r < 2.0 { r } else { 2.0 };
    let (mut lhs, mut mono, mut mass) = (0.0, 0.0, 0.0);
    for k in 0..g.n_cells() {
        let a = &z1[k * d..(k + 1) * d];
        let b = &z2[k * d..(k + 1) * d];
        let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
        let diff = a
            .iter()
            .zip(b)
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt();
        let wa = if na == 0.0 { 0.0 } else { na.powf(r - 2.0) };
        let wb = if nb == 0.0 { 0.0 } else { nb.powf(r - 2.0) };
        let x: f64 = a
            .iter()
            .zip(b)
            .map(|(x, y)| (wa * x - wb * y) * (x - y))
            .sum();
        let w = g.quad_weights[k];
        lhs += w * diff.powf(r);
        mono += w * x.max(0.0);
        mass += w * (na.powf(r) + nb.powf(r));
    }
    let rhs = if mass == 0.0 {
        0.0
    } else {
        c * mono.powf(theta / 2.0) * mass.powf(1.0 - theta / 2.0)
    };
    Ok((lhs, rhs))
}
