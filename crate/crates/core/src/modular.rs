//! The double phase integrand `ξ(x, t) = a(x)tᵖ + tᵠ`, its modular, the
//! Luxemburg norm and the weighted energy-space norm.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid, GridFunction};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    PLessQ,
    QLessP,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Exponents {
    pub p: f64,
    pub q: f64,
    /// Exponent of the single phase problem.
    pub r: f64,
    /// Ambient dimension.
    #[serde(rename = "N")]
    pub n: usize,
}

impl Exponents {
    pub fn new(p: f64, q: f64, r: f64, n: usize) -> Result<Self> {
        let e = Self { p, q, r, n };
        e.validate()?;
        Ok(e)
    }

    /// Convenience constructor with `r = q`.
    pub fn pq(p: f64, q: f64, n: usize) -> Result<Self> {
        Self::new(p, q, q, n)
    }

    pub fn validate(&self) -> Result<()> {
        let nn = self.n as f64;
        if self.n < 2 {
            return Err(Error::DomainError(format!("N = {} < 2", self.n)));
        }
        for (name, v) in [("p", self.p), ("q", self.q), ("r", self.r)] {
            if !(v > 1.0 && v < nn) {
                return Err(Error::DomainError(format!(
                    "{name} = {v} outside (1, N) with N = {}",
                    self.n
                )));
            }
        }
        if self.p == self.q {
            return Err(Error::DomainError("p and q must differ".into()));
        }
        Ok(())
    }

    /// Critical Sobolev exponent `qN/(N - q)`.
    pub fn q_star(&self) -> f64 {
        let nn = self.n as f64;
        self.q * nn / (nn - self.q)
    }

    pub fn regime(&self) -> Regime {
        if self.p < self.q {
            Regime::PLessQ
        } else {
            Regime::QLessP
        }
    }

    pub fn min_exp(&self) -> f64 {
        self.p.min(self.q)
    }

    pub fn max_exp(&self) -> f64 {
        self.p.max(self.q)
    }

    /// Growth constant `max(1, sup a)` of `tᵠ ≤ ξ ≤ C₀(tᵖ + tᵠ)`.
    pub fn growth_constant(&self, g: &Grid) -> f64 {
        g.weights
            .cell
            .a
            .iter()
            .chain(&g.weights.nodal.a)
            .fold(1.0f64, |m, v| m.max(*v))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct NormReport {
    pub modular: f64,
    pub luxemburg: f64,
    pub lower_sandwich: f64,
    pub upper_sandwich: f64,
    /// Only defined when the report was built from a grid function.
    pub e_norm: Option<f64>,
    pub lq_norm: f64,
}

impl NormReport {
    pub fn sandwich_holds(&self, rel_tol: f64) -> bool {
        let slack = rel_tol * self.modular.max(f64::MIN_POSITIVE);
        self.lower_sandwich <= self.modular + slack && self.modular <= self.upper_sandwich + slack
    }
}

/// `ξ(x_c, t)` at cell `c`.
pub fn xi_eval(cell: usize, t: f64, exp: &Exponents, g: &Grid) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::DomainError(format!("ξ requires t ≥ 0, got {t}")));
    }
    let a = *g.weights.cell.a.get(cell).ok_or(Error::DimensionError {
        expected: g.n_cells(),
        got: cell,
    })?;
    Ok(a * t.powf(exp.p) + t.powf(exp.q))
}

fn check_cells(f: &[f64], g: &Grid) -> Result<()> {
    if f.len() != g.n_cells() {
        return Err(Error::DimensionError {
            expected: g.n_cells(),
            got: f.len(),
        });
    }
    Ok(())
}

/// The two pieces `∫ a|f|ᵖ` and `∫ |f|ᵠ` of the modular.
pub fn modular_parts(f: &[f64], exp: &Exponents, g: &Grid) -> Result<(f64, f64)> {
    check_cells(f, g)?;
    let a = &g.weights.cell.a;
    let mut pp = 0.0;
    let mut qq = 0.0;
    for ((v, w), ac) in f.iter().zip(&g.quad_weights).zip(a) {
        let t = v.abs();
        pp += w * ac * t.powf(exp.p);
        qq += w * t.powf(exp.q);
    }
    Ok((pp, qq))
}

/// `ρ_ξ(f) = ∫ a|f|ᵖ + |f|ᵠ`.
pub fn modular(f: &[f64], exp: &Exponents, g: &Grid) -> Result<f64> {
    let (pp, qq) = modular_parts(f, exp, g)?;
    Ok(pp + qq)
}

/// `∫ a|f|ʳ`.
pub fn single_phase_modular(f: &[f64], r: f64, g: &Grid) -> Result<f64> {
    check_cells(f, g)?;
    Ok(f.iter()
        .zip(&g.quad_weights)
        .zip(&g.weights.cell.a)
        .map(|((v, w), a)| w * a * v.abs().powf(r))
        .sum())
}

/// Discrete `Lᵠ` norm of a cell field.
pub fn lq_norm(f: &[f64], q: f64, g: &Grid) -> Result<f64> {
    check_cells(f, g)?;
    let s: f64 = f
        .iter()
        .zip(&g.quad_weights)
        .map(|(v, w)| w * v.abs().powf(q))
        .sum();
    Ok(s.powf(1.0 / q))
}

/// Luxemburg norm: the unique `λ > 0` with `ρ_ξ(f/λ) = 1`.
///
/// The modular splits as `ρ_ξ(f/λ) = P λ^{-p} + Q λ^{-q}`, so after one
/// pass over the cells the root is bracketed by the sandwich bounds and
/// bisected on the scalar map. The result is accurate to `tol` absolute and
/// never coarser than 1e-13 relative.
pub fn luxemburg_norm(f: &[f64], exp: &Exponents, g: &Grid, tol: f64) -> Result<f64> {
    if !(tol > 0.0) {
        return Err(Error::DomainError(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    if let Some(v) = f.iter().find(|v| !v.is_finite()) {
        return Err(Error::NumericError(format!("field value {v}")));
    }
    let (pp, qq) = modular_parts(f, exp, g)?;
    luxemburg_from_parts(pp, qq, exp, tol)
}

pub(crate) fn luxemburg_from_parts(pp: f64, qq: f64, exp: &Exponents, tol: f64) -> Result<f64> {
    let rho = pp + qq;
    if rho == 0.0 {
        return Ok(0.0);
    }
    if !rho.is_finite() {
        return Err(Error::NumericError(format!("modular {rho}")));
    }
    let scaled = |lam: f64| pp * lam.powf(-exp.p) + qq * lam.powf(-exp.q);
    let b1 = rho.powf(1.0 / exp.min_exp());
    let b2 = rho.powf(1.0 / exp.max_exp());
    let mut lo = b1.min(b2);
    let mut hi = b1.max(b2);
    while scaled(lo) < 1.0 {
        lo *= 0.5;
    }
    while scaled(hi) > 1.0 {
        hi *= 2.0;
    }
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi || hi - lo <= tol.min(1e-13 * hi) {
            break;
        }
        if scaled(mid) > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // pick the endpoint whose modular is closer to one
    Ok(if (scaled(lo) - 1.0).abs() <= (scaled(hi) - 1.0).abs() {
        lo
    } else {
        hi
    })
}

const NORM_TOL: f64 = 1e-14;

/// `‖∇u‖_ξ + (∫ |u|ᵠ max{m₂, ω})^{1/q}`.
pub fn e_norm(u: &GridFunction, exp: &Exponents, g: &Grid) -> Result<f64> {
    let grad = u.grad_norms(g);
    let lux = luxemburg_norm(&grad, exp, g, NORM_TOL)?;
    Ok(lux + zero_order_norm(u, exp.q, g))
}

/// `(∫ |u|ᵠ max{m₂, ω})^{1/q}`.
pub fn zero_order_norm(u: &GridFunction, q: f64, g: &Grid) -> f64 {
    let cv = u.cell_values(g);
    let s: f64 = cv
        .iter()
        .zip(&g.quad_weights)
        .zip(&g.weights.cell.envelope)
        .map(|((v, w), e)| w * e * v.abs().powf(q))
        .sum();
    s.powf(1.0 / q)
}

fn sandwich(lux: f64, exp: &Exponents) -> (f64, f64) {
    if lux == 0.0 {
        (0.0, 0.0)
    } else if lux < 1.0 {
        (lux.powf(exp.max_exp()), lux.powf(exp.min_exp()))
    } else if lux > 1.0 {
        (lux.powf(exp.min_exp()), lux.powf(exp.max_exp()))
    } else {
        (1.0, 1.0)
    }
}

/// Modular, Luxemburg norm and the norm–modular bracket for a cell field.
pub fn sandwich_check(f: &[f64], exp: &Exponents, g: &Grid) -> Result<NormReport> {
    let lux = luxemburg_norm(f, exp, g, NORM_TOL)?;
    let (pp, qq) = modular_parts(f, exp, g)?;
    let (lower_sandwich, upper_sandwich) = sandwich(lux, exp);
    Ok(NormReport {
        modular: pp + qq,
        luxemburg: lux,
        lower_sandwich,
        upper_sandwich,
        e_norm: None,
        lq_norm: lq_norm(f, exp.q, g)?,
    })
}

/// [`sandwich_check`] applied to `|∇u|`, with the energy norm filled in.
pub fn norm_report(u: &GridFunction, exp: &Exponents, g: &Grid) -> Result<NormReport> {
    let grad = u.grad_norms(g);
    let mut rep = sandwich_check(&grad, exp, g)?;
    rep.e_norm = Some(rep.luxemburg + zero_order_norm(u, exp.q, g));
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Geometry, WeightDescriptor, WeightSpec};

    fn grid(radius: f64, a: f64, n: usize) -> Grid {
        let w = WeightSpec {
            a: WeightDescriptor::constant(a),
            m1: WeightDescriptor::constant(1.0),
            m2: WeightDescriptor::constant(0.0),
            omega_exponent: 3.0,
        };
        Grid::build(&Geometry::interval(radius, n, 4), &w).unwrap()
    }

    #[test]
    fn exponent_validation() {
        assert!(Exponents::pq(2.0, 3.0, 4).is_ok());
        assert!(Exponents::pq(2.0, 2.0, 4).is_err());
        assert!(Exponents::pq(1.0, 2.0, 4).is_err());
        assert!(Exponents::pq(2.0, 3.0, 3).is_err());
        let e = Exponents::pq(2.0, 3.0, 4).unwrap();
        assert_eq!(e.q_star(), 12.0);
        assert_eq!(e.regime(), Regime::PLessQ);
        assert_eq!(Exponents::pq(3.0, 2.0, 4).unwrap().regime(), Regime::QLessP);
    }

    #[test]
    fn xi_values() {
        let e = Exponents::pq(2.0, 3.0, 4).unwrap();
        let g = grid(1.0, 1.0, 8);
        assert_eq!(xi_eval(0, 2.0, &e, &g).unwrap(), 12.0);
        assert_eq!(xi_eval(3, 0.0, &e, &g).unwrap(), 0.0);
        assert!(matches!(
            xi_eval(0, -1.0, &e, &g),
            Err(Error::DomainError(_))
        ));
        // a vanishing on a cell leaves the pure q-phase
        let w = WeightSpec {
            a: WeightDescriptor::compact_bump(1.0, 0.3),
            m1: WeightDescriptor::constant(1.0),
            m2: WeightDescriptor::constant(0.0),
            omega_exponent: 3.0,
        };
        let g = Grid::build(&Geometry::interval(1.0, 8, 4), &w).unwrap();
        assert_eq!(g.weights.cell.a[0], 0.0);
        assert_eq!(xi_eval(0, 1.7, &e, &g).unwrap(), 1.7f64.powf(3.0));
    }

    #[test]
    fn modular_values() {
        let g = grid(1.0, 1.0, 8);
        let e = Exponents::pq(2.0, 3.0, 4).unwrap();
        assert_eq!(modular(&[0.0; 8], &e, &g).unwrap(), 0.0);
        assert!((modular(&[1.0; 8], &e, &g).unwrap() - 4.0).abs() < 1e-14);
        let unit = grid(0.5, 1.0, 8);
        let e24 = Exponents::pq(2.0, 4.0, 5).unwrap();
        assert!((modular(&[0.5; 8], &e24, &unit).unwrap() - 0.3125).abs() < 1e-14);
    }

    #[test]
    fn single_phase_modular_values() {
        assert_eq!(
            single_phase_modular(&[0.0; 8], 2.0, &grid(1.0, 1.0, 8)).unwrap(),
            0.0
        );
        assert!(
            (single_phase_modular(&[1.0; 8], 2.0, &grid(0.5, 1.0, 8)).unwrap() - 1.0).abs() < 1e-14
        );
        assert!(
            (single_phase_modular(&[1.0; 8], 3.0, &grid(1.0, 2.0, 8)).unwrap() - 4.0).abs() < 1e-14
        );
    }

    /// Independent root of y² + y³ = 1 by plain bisection on y.
    fn cubic_root_oracle() -> f64 {
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid * mid + mid * mid * mid < 1.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn luxemburg_against_scalar_oracle() {
        let y = cubic_root_oracle();
        let expected = 0.5 / y;
        assert!((expected - 0.662359).abs() < 1e-6);
        let g = grid(0.5, 1.0, 8);
        let e = Exponents::pq(2.0, 3.0, 4).unwrap();
        let lux = luxemburg_norm(&[0.5; 8], &e, &g, 1e-14).unwrap();
        assert!((lux - expected).abs() < 1e-12, "{lux} vs {expected}");
        assert_eq!(luxemburg_norm(&[0.0; 8], &e, &g, 1e-12).unwrap(), 0.0);
    }

    #[test]
    fn unit_modular_gives_unit_norm() {
        let g = grid(1.0, 1.0, 8);
        let e = Exponents::pq(2.0, 3.0, 4).unwrap();
        // ρ(c) = 2(c² + c³) = 1
        let c = cubic_root_oracle_scaled();
        let f = [c; 8];
        assert!((modular(&f, &e, &g).unwrap() - 1.0).abs() < 1e-12);
        let rep = sandwich_check(&f, &e, &g).unwrap();
        assert!((rep.luxemburg - 1.0).abs() < 1e-10);
        assert!((rep.lower_sandwich - 1.0).abs() < 1e-9);
        assert!((rep.upper_sandwich - 1.0).abs() < 1e-9);

        fn cubic_root_oracle_scaled() -> f64 {
            // 2(c² + c³) = 1
            let (mut lo, mut hi) = (0.0f64, 1.0f64);
            for _ in 0..200 {
                let m = 0.5 * (lo + hi);
                if 2.0 * (m * m + m * m * m) < 1.0 {
                    lo = m
                } else {
                    hi = m
                }
            }
            0.5 * (lo + hi)
        }
    }

    #[test]
    fn non_finite_rejected() {
        let g = grid(1.0, 1.0, 8);
        let e = Exponents::pq(2.0, 3.0, 4).unwrap();
        let mut f = [1.0; 8];
        f[2] = f64::NAN;
        assert!(matches!(
            luxemburg_norm(&f, &e, &g, 1e-10),
            Err(Error::NumericError(_))
        ));
    }

    #[test]
    fn zero_field_report() {
        let g = grid(1.0, 1.0, 8);
        let e = Exponents::pq(2.0, 3.0, 4).unwrap();
        let rep = norm_report(&GridFunction::zeros(&g), &e, &g).unwrap();
        assert_eq!(rep.modular, 0.0);
        assert_eq!(rep.luxemburg, 0.0);
        assert_eq!(rep.lower_sandwich, 0.0);
        assert_eq!(rep.upper_sandwich, 0.0);
        assert_eq!(rep.e_norm, Some(0.0));
        assert_eq!(rep.lq_norm, 0.0);
    }

    #[test]
    fn e_norm_properties() {
        let g = grid(2.0, 1.0, 32);
        let e = Exponents::pq(2.0, 3.0, 4).unwrap();
        let u = GridFunction::from_fn(&g, |x| (4.0 - x[0] * x[0]) * (1.0 + 0.3 * x[0]));
        let z1 = zero_order_norm(&u, e.q, &g);
        let z2 = zero_order_norm(&u.scaled(2.0), e.q, &g);
        assert!((z2 - 2.0 * z1).abs() < 1e-13 * z2);
        let lux = luxemburg_norm(&u.grad_norms(&g), &e, &g, 1e-14).unwrap();
        assert!(e_norm(&u, &e, &g).unwrap() >= lux);
    }

    #[test]
    fn json_keys() {
        let rep = NormReport {
            modular: 1.0,
            luxemburg: 1.0,
            lower_sandwich: 1.0,
            upper_sandwich: 1.0,
            e_norm: Some(2.0),
            lq_norm: 0.5,
        };
        let v = serde_json::to_value(rep).unwrap();
        let mut keys: Vec<_> = v.as_object().unwrap().keys().cloned().collect();
        keys.sort();
        assert_eq!(
            keys,
            [
                "eNorm",
                "lowerSandwich",
                "lqNorm",
                "luxemburg",
                "modular",
                "upperSandwich"
            ]
        );
    }
}
