//! Truncated discrete domains.
//!
//! Three layouts are supported: the interval `(-R, R)`, the radial reduction
//! of the ball `B_R ⊂ ℝᴺ` onto `[0, R]` (Jacobian `|S^{N-1}| r^{N-1}` folded
//! into the quadrature weights), and the square `(-R, R)²` split into
//! right triangles. Unknowns live on nodes; every integrand lives on cells.
//! A cell carries its P1 gradient coefficients and the interpolation weights
//! that turn nodal values into the cell value used for zero-order terms.
//!
//! Homogeneous Dirichlet data is imposed on the outer boundary. In radial
//! mode the node at the origin is free.

use std::f64::consts::PI;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GeometryMode {
    Interval1D,
    RadialN,
    Tensor2D,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    pub mode: GeometryMode,
    /// Ambient dimension N. Only `RadialN` uses it for quadrature.
    pub dimension: usize,
    pub radius: f64,
    /// Number of cells per axis.
    pub resolution: usize,
}

impl Geometry {
    pub fn interval(radius: f64, resolution: usize, dimension: usize) -> Self {
        Self {
            mode: GeometryMode::Interval1D,
            dimension,
            radius,
            resolution,
        }
    }

    pub fn radial(dimension: usize, radius: f64, resolution: usize) -> Self {
        Self {
            mode: GeometryMode::RadialN,
            dimension,
            radius,
            resolution,
        }
    }

    pub fn square(radius: f64, resolution: usize, dimension: usize) -> Self {
        Self {
            mode: GeometryMode::Tensor2D,
            dimension,
            radius,
            resolution,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.radius > 0.0) || !self.radius.is_finite() {
            return Err(Error::InvalidGeometry(format!(
                "radius must be positive, got {}",
                self.radius
            )));
        }
        if self.resolution < 8 {
            return Err(Error::InvalidGeometry(format!(
                "resolution must be at least 8, got {}",
                self.resolution
            )));
        }
        if self.dimension < 2 {
            return Err(Error::InvalidGeometry(format!(
                "ambient dimension must be at least 2, got {}",
                self.dimension
            )));
        }
        Ok(())
    }

    /// Spatial dimension of the discrete gradient.
    pub fn grad_dim(&self) -> usize {
        match self.mode {
            GeometryMode::Tensor2D => 2,
            _ => 1,
        }
    }

    /// Lebesgue measure of the truncated domain.
    pub fn measure(&self) -> f64 {
        let r = self.radius;
        match self.mode {
            GeometryMode::Interval1D => 2.0 * r,
            GeometryMode::Tensor2D => 4.0 * r * r,
            GeometryMode::RadialN => {
                let n = self.dimension as i32;
                sphere_area(self.dimension) * r.powi(n) / n as f64
            }
        }
    }
}

/// Surface area of the unit sphere `S^{N-1}` in ℝᴺ.
pub fn sphere_area(n: usize) -> f64 {
    match n {
        0 => 0.0,
        1 => 2.0,
        2 => 2.0 * PI,
        _ => 2.0 * PI / (n as f64 - 2.0) * sphere_area(n - 2),
    }
}

/// Closed-form weight profiles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WeightDescriptor {
    Constant {
        value: f64,
    },
    /// `amplitude · exp(-|x - center|² / width²)`
    Gaussian {
        amplitude: f64,
        width: f64,
        #[serde(default)]
        center: Vec<f64>,
    },
    /// Smooth bump `amplitude · exp(1 - 1/(1 - s²))`, `s = |x - center| / radius`,
    /// zero for `s ≥ 1`.
    CompactBump {
        amplitude: f64,
        radius: f64,
        #[serde(default)]
        center: Vec<f64>,
    },
    /// `amplitude · (1 + |x|)^(-exponent)`
    PowerDecay {
        amplitude: f64,
        exponent: f64,
    },
}

impl WeightDescriptor {
    pub fn constant(value: f64) -> Self {
        WeightDescriptor::Constant { value }
    }

    pub fn gaussian(amplitude: f64, width: f64) -> Self {
        WeightDescriptor::Gaussian {
            amplitude,
            width,
            center: Vec::new(),
        }
    }

    pub fn compact_bump(amplitude: f64, radius: f64) -> Self {
        WeightDescriptor::CompactBump {
            amplitude,
            radius,
            center: Vec::new(),
        }
    }

    fn center(&self) -> &[f64] {
        match self {
            WeightDescriptor::Gaussian { center, .. }
            | WeightDescriptor::CompactBump { center, .. } => center,
            _ => &[],
        }
    }

    pub fn is_radial(&self) -> bool {
        self.center().iter().all(|c| *c == 0.0)
    }

    fn validate(&self, name: &str, dim: usize) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidWeight(format!("{name}: {msg}")));
        match self {
            WeightDescriptor::Constant { value } if !value.is_finite() => {
                return bad("constant must be finite".into())
            }
            WeightDescriptor::Gaussian { width, .. } if !(*width > 0.0) => {
                return bad("gaussian width must be positive".into())
            }
            WeightDescriptor::CompactBump { radius, .. } if !(*radius > 0.0) => {
                return bad("bump radius must be positive".into())
            }
            WeightDescriptor::PowerDecay { exponent, .. } if !exponent.is_finite() => {
                return bad("decay exponent must be finite".into())
            }
            _ => {}
        }
        let c = self.center();
        if !c.is_empty() && c.len() != dim {
            return bad(format!(
                "center has {} coordinates, grid has {dim}",
                c.len()
            ));
        }
        Ok(())
    }

    /// Evaluates the profile at a point given in grid coordinates.
    pub fn eval(&self, x: &[f64]) -> f64 {
        let dist = |center: &[f64]| -> f64 {
            x.iter()
                .enumerate()
                .map(|(i, xi)| {
                    let d = xi - center.get(i).copied().unwrap_or(0.0);
                    d * d
                })
                .sum::<f64>()
                .sqrt()
        };
        match self {
            WeightDescriptor::Constant { value } => *value,
            WeightDescriptor::Gaussian {
                amplitude,
                width,
                center,
            } => {
                let s = dist(center) / width;
                amplitude * (-s * s).exp()
            }
            WeightDescriptor::CompactBump {
                amplitude,
                radius,
                center,
            } => {
                let s = dist(center) / radius;
                if s >= 1.0 {
                    0.0
                } else {
                    amplitude * (1.0 - 1.0 / (1.0 - s * s)).exp()
                }
            }
            WeightDescriptor::PowerDecay {
                amplitude,
                exponent,
            } => amplitude * (1.0 + dist(&[])).powf(-exponent),
        }
    }
}

/// The weights `a`, `m₁`, `m₂` of the problem; `m = m₁ - m₂`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct WeightSpec {
    pub a: WeightDescriptor,
    pub m1: WeightDescriptor,
    #[serde(default = "zero_weight")]
    pub m2: WeightDescriptor,
    /// Exponent of the Hardy weight `ω = (1 + |x|)^(-s)`; the energy space uses `s = q`.
    pub omega_exponent: f64,
}

fn zero_weight() -> WeightDescriptor {
    WeightDescriptor::constant(0.0)
}

/// Sampled weight fields on one set of points.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct WeightFields {
    pub a: Vec<f64>,
    pub m1: Vec<f64>,
    pub m2: Vec<f64>,
    /// `m₁ - m₂`
    pub m: Vec<f64>,
    pub omega: Vec<f64>,
    /// `max{m₂, ω}`
    pub envelope: Vec<f64>,
}

impl WeightFields {
    fn sample(spec: &WeightSpec, points: &[[f64; 2]], dim: usize) -> Self {
        let mut w = WeightFields::default();
        for x in points {
            let x = &x[..dim];
            let a = spec.a.eval(x);
            let m1 = spec.m1.eval(x);
            let m2 = spec.m2.eval(x);
            let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            let omega = (1.0 + r).powf(-spec.omega_exponent);
            w.a.push(a);
            w.m1.push(m1);
            w.m2.push(m2);
            w.m.push(m1 - m2);
            w.omega.push(omega);
            w.envelope.push(m2.max(omega));
        }
        w
    }
}

/// Weights sampled at nodes (for dumps and pointwise checks) and at cell
/// centres (for quadrature).
#[derive(Debug, Clone, PartialEq)]
pub struct WeightSet {
    pub nodal: WeightFields,
    pub cell: WeightFields,
}

/// One integration cell: a segment (2 nodes) or a triangle (3 nodes).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub len: usize,
    pub nodes: [usize; 3],
    /// Weights producing the cell value from nodal values; they sum to one.
    pub interp: [f64; 3],
    /// Gradient of each local basis function (only the first `grad_dim` components used).
    pub grad: [[f64; 2]; 3],
}

#[derive(Debug, Clone)]
pub struct Grid {
    pub geometry: Geometry,
    pub nodes: Vec<[f64; 2]>,
    pub centers: Vec<[f64; 2]>,
    pub quad_weights: Vec<f64>,
    pub cells: Vec<Cell>,
    pub boundary: Vec<bool>,
    pub weights: WeightSet,
    dof_of_node: Vec<Option<usize>>,
    dofs: Vec<usize>,
    bandwidth: usize,
}

impl Grid {
    pub fn build(geometry: &Geometry, spec: &WeightSpec) -> Result<Grid> {
        geometry.validate()?;
        let dim = geometry.grad_dim();
        for (name, w) in [("a", &spec.a), ("m1", &spec.m1), ("m2", &spec.m2)] {
            w.validate(name, dim)?;
            if geometry.mode == GeometryMode::RadialN && !w.is_radial() {
                return Err(Error::InvalidWeight(format!(
                    "{name}: radial mode requires weights centred at the origin"
                )));
            }
        }
        if !(spec.omega_exponent > 0.0) {
            return Err(Error::InvalidWeight(
                "Hardy weight exponent must be positive".into(),
            ));
        }

        let n = geometry.resolution;
        let big_r = geometry.radius;
        let mut nodes = Vec::new();
        let mut boundary = Vec::new();
        let mut cells = Vec::new();
        let mut centers = Vec::new();
        let mut quad_weights = Vec::new();

        match geometry.mode {
            GeometryMode::Interval1D => {
                let h = 2.0 * big_r / n as f64;
                for i in 0..=n {
                    nodes.push([-big_r + i as f64 * h, 0.0]);
                    boundary.push(i == 0 || i == n);
                }
                for i in 0..n {
                    cells.push(segment(i, 0.5, h));
                    centers.push([-big_r + (i as f64 + 0.5) * h, 0.0]);
                    quad_weights.push(h);
                }
            }
            GeometryMode::RadialN => {
                let dn = geometry.dimension as i32;
                let area = sphere_area(geometry.dimension);
                let h = big_r / n as f64;
                for i in 0..=n {
                    nodes.push([i as f64 * h, 0.0]);
                    boundary.push(i == n);
                }
                for i in 0..n {
                    let (ra, rb) = (i as f64 * h, (i + 1) as f64 * h);
                    let mass = rb.powi(dn) - ra.powi(dn);
                    // centroid with respect to r^{N-1} dr
                    let rc =
                        dn as f64 / (dn as f64 + 1.0) * (rb.powi(dn + 1) - ra.powi(dn + 1)) / mass;
                    cells.push(segment(i, (rc - ra) / h, h));
                    centers.push([rc, 0.0]);
                    quad_weights.push(area * mass / dn as f64);
                }
            }
            GeometryMode::Tensor2D => {
                let h = 2.0 * big_r / n as f64;
                let id = |i: usize, j: usize| j * (n + 1) + i;
                for j in 0..=n {
                    for i in 0..=n {
                        nodes.push([-big_r + i as f64 * h, -big_r + j as f64 * h]);
                        boundary.push(i == 0 || j == 0 || i == n || j == n);
                    }
                }
                for j in 0..n {
                    for i in 0..n {
                        for tri in [
                            [id(i, j), id(i + 1, j), id(i + 1, j + 1)],
                            [id(i, j), id(i + 1, j + 1), id(i, j + 1)],
                        ] {
                            let (cell, centroid, area) = triangle(&nodes, tri);
                            cells.push(cell);
                            centers.push(centroid);
                            quad_weights.push(area);
                        }
                    }
                }
            }
        }

        let weights = WeightSet {
            nodal: WeightFields::sample(spec, &nodes, dim),
            cell: WeightFields::sample(spec, &centers, dim),
        };
        let check_nonzero = |name: &str, v: &[f64], c: &[f64]| -> Result<()> {
            if v.iter().chain(c).any(|x| *x < 0.0 || !x.is_finite()) {
                return Err(Error::InvalidWeight(format!("{name} must be nonnegative")));
            }
            Ok(())
        };
        check_nonzero("a", &weights.nodal.a, &weights.cell.a)?;
        check_nonzero("m1", &weights.nodal.m1, &weights.cell.m1)?;
        check_nonzero("m2", &weights.nodal.m2, &weights.cell.m2)?;
        if weights.cell.a.iter().all(|v| *v == 0.0) {
            return Err(Error::InvalidWeight("a ≡ 0 violates a ≢ 0".into()));
        }
        if weights.cell.m1.iter().all(|v| *v == 0.0) {
            return Err(Error::InvalidWeight("m1 ≡ 0 violates m1 ≢ 0".into()));
        }

        let mut dof_of_node = vec![None; nodes.len()];
        let mut dofs = Vec::new();
        for (i, b) in boundary.iter().enumerate() {
            if !b {
                dof_of_node[i] = Some(dofs.len());
                dofs.push(i);
            }
        }
        let mut bandwidth = 0;
        for c in &cells {
            for a in 0..c.len {
                for b in 0..c.len {
                    if let (Some(x), Some(y)) = (dof_of_node[c.nodes[a]], dof_of_node[c.nodes[b]]) {
                        bandwidth = bandwidth.max(x.abs_diff(y));
                    }
                }
            }
        }

        Ok(Grid {
            geometry: geometry.clone(),
            nodes,
            centers,
            quad_weights,
            cells,
            boundary,
            weights,
            dof_of_node,
            dofs,
            bandwidth,
        })
    }

    pub fn dim(&self) -> usize {
        self.geometry.grad_dim()
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    /// Interior nodes, in the order used for assembled matrices.
    pub fn dofs(&self) -> &[usize] {
        &self.dofs
    }

    pub fn dof_of(&self, node: usize) -> Option<usize> {
        self.dof_of_node[node]
    }

    pub fn bandwidth(&self) -> usize {
        self.bandwidth
    }

    /// `|x|` at a node.
    pub fn node_radius(&self, i: usize) -> f64 {
        let x = &self.nodes[i][..self.dim()];
        x.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Σ f·w over cells.
    pub fn integrate(&self, f: &[f64]) -> Result<f64> {
        if f.len() != self.n_cells() {
            return Err(Error::DimensionError {
                expected: self.n_cells(),
                got: f.len(),
            });
        }
        Ok(f.iter().zip(&self.quad_weights).map(|(a, w)| a * w).sum())
    }

    /// Interpolates nodal data to cell values.
    pub fn cell_average(&self, nodal: &[f64]) -> Vec<f64> {
        self.cells
            .iter()
            .map(|c| (0..c.len).map(|k| c.interp[k] * nodal[c.nodes[k]]).sum())
            .collect()
    }

    /// Per-cell gradient, `dim` entries per cell.
    pub fn gradient(&self, nodal: &[f64]) -> Vec<f64> {
        let d = self.dim();
        let mut g = Vec::with_capacity(self.n_cells() * d);
        for c in &self.cells {
            for axis in 0..d {
                g.push(
                    (0..c.len)
                        .map(|k| c.grad[k][axis] * nodal[c.nodes[k]])
                        .sum(),
                );
            }
        }
        g
    }

    /// Scatters dof-indexed values into a full nodal vector (zeros on the boundary).
    pub fn expand(&self, dof_values: &[f64]) -> Vec<f64> {
        let mut v = vec![0.0; self.n_nodes()];
        for (k, &node) in self.dofs.iter().enumerate() {
            v[node] = dof_values[k];
        }
        v
    }

    pub fn restrict(&self, nodal: &[f64]) -> Vec<f64> {
        self.dofs.iter().map(|&i| nodal[i]).collect()
    }

    /// Fraction of `∫ m₁` carried by cells beyond 90% of the truncation radius.
    pub fn m1_tail_fraction(&self) -> f64 {
        let cut = 0.9 * self.geometry.radius;
        let mut tail = 0.0;
        let mut total = 0.0;
        for (c, x) in self.centers.iter().enumerate() {
            let v = self.weights.cell.m1[c] * self.quad_weights[c];
            total += v;
            let reach = match self.geometry.mode {
                GeometryMode::Tensor2D => x[0].abs().max(x[1].abs()),
                _ => x[0].abs(),
            };
            if reach > cut {
                tail += v;
            }
        }
        if total > 0.0 {
            tail / total
        } else {
            0.0
        }
    }

    /// Writes nodal values as `x[,y] value` lines under a `#` header.
    pub fn dump<W: Write>(&self, values: &[f64], mut out: W) -> Result<()> {
        let g = &self.geometry;
        writeln!(
            out,
            "# geometry={:?} N={} R={} n={}",
            g.mode, g.dimension, g.radius, g.resolution
        )?;
        for (x, v) in self.nodes.iter().zip(values) {
            if self.dim() == 2 {
                writeln!(out, "{:e},{:e} {:e}", x[0], x[1], v)?;
            } else {
                writeln!(out, "{:e} {:e}", x[0], v)?;
            }
        }
        Ok(())
    }
}

fn segment(i: usize, theta: f64, h: f64) -> Cell {
    Cell {
        len: 2,
        nodes: [i, i + 1, 0],
        interp: [1.0 - theta, theta, 0.0],
        grad: [[-1.0 / h, 0.0], [1.0 / h, 0.0], [0.0, 0.0]],
    }
}

fn triangle(nodes: &[[f64; 2]], tri: [usize; 3]) -> (Cell, [f64; 2], f64) {
    let p = tri.map(|i| nodes[i]);
    let det = (p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]);
    let mut grad = [[0.0; 2]; 3];
    for k in 0..3 {
        let (a, b) = (p[(k + 1) % 3], p[(k + 2) % 3]);
        grad[k] = [(a[1] - b[1]) / det, (b[0] - a[0]) / det];
    }
    let centroid = [
        (p[0][0] + p[1][0] + p[2][0]) / 3.0,
        (p[0][1] + p[1][1] + p[2][1]) / 3.0,
    ];
    let cell = Cell {
        len: 3,
        nodes: tri,
        interp: [1.0 / 3.0; 3],
        grad,
    };
    (cell, centroid, 0.5 * det.abs())
}

/// A nodal field with its cached per-cell gradient. Boundary values are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    values: Vec<f64>,
    grad: Vec<f64>,
}

impl GridFunction {
    pub fn new(g: &Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != g.n_nodes() {
            return Err(Error::DimensionError {
                expected: g.n_nodes(),
                got: values.len(),
            });
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::NumericError(format!("nodal value {v}")));
        }
        if let Some(i) = (0..values.len()).find(|&i| g.boundary[i] && values[i] != 0.0) {
            return Err(Error::DomainError(format!(
                "boundary node {i} carries {}",
                values[i]
            )));
        }
        let grad = g.gradient(&values);
        Ok(Self { values, grad })
    }

    /// Builds a field from nodal values, zeroing boundary nodes.
    pub fn from_nodal(g: &Grid, mut values: Vec<f64>) -> Self {
        assert_eq!(values.len(), g.n_nodes());
        for (v, b) in values.iter_mut().zip(&g.boundary) {
            if *b {
                *v = 0.0;
            }
        }
        let grad = g.gradient(&values);
        Self { values, grad }
    }

    pub fn from_fn(g: &Grid, f: impl Fn(&[f64]) -> f64) -> Self {
        let d = g.dim();
        let values = g.nodes.iter().map(|x| f(&x[..d])).collect();
        Self::from_nodal(g, values)
    }

    pub fn from_dofs(g: &Grid, dof_values: &[f64]) -> Self {
        let values = g.expand(dof_values);
        let grad = g.gradient(&values);
        Self { values, grad }
    }

    pub fn zeros(g: &Grid) -> Self {
        Self::from_nodal(g, vec![0.0; g.n_nodes()])
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Per-cell gradient, `dim` entries per cell.
    pub fn grad(&self) -> &[f64] {
        &self.grad
    }

    pub fn grad_norms(&self, g: &Grid) -> Vec<f64> {
        let d = g.dim();
        self.grad
            .chunks(d)
            .map(|c| c.iter().map(|v| v * v).sum::<f64>().sqrt())
            .collect()
    }

    pub fn cell_values(&self, g: &Grid) -> Vec<f64> {
        g.cell_average(&self.values)
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            values: self.values.iter().map(|v| c * v).collect(),
            grad: self.grad.iter().map(|v| c * v).collect(),
        }
    }

    pub fn abs(&self, g: &Grid) -> Self {
        Self::from_nodal(g, self.values.iter().map(|v| v.abs()).collect())
    }

    /// True when the cached gradient equals a fresh recomputation bit for bit.
    pub fn is_consistent(&self, g: &Grid) -> bool {
        g.gradient(&self.values) == self.grad
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_weights(q: f64) -> WeightSpec {
        WeightSpec {
            a: WeightDescriptor::constant(1.0),
            m1: WeightDescriptor::constant(1.0),
            m2: WeightDescriptor::constant(0.0),
            omega_exponent: q,
        }
    }

    #[test]
    fn interval_measure() {
        let g = Grid::build(&Geometry::interval(1.0, 8, 3), &unit_weights(2.0)).unwrap();
        let s: f64 = g.quad_weights.iter().sum();
        assert!((s - 2.0).abs() < 1e-12 * 2.0);
        assert_eq!(g.integrate(&[1.0; 8]).unwrap(), s);
        assert_eq!(g.integrate(&[0.0; 8]).unwrap(), 0.0);
    }

    #[test]
    fn ball_volume_in_radial_mode() {
        let g = Grid::build(&Geometry::radial(3, 1.0, 64), &unit_weights(2.0)).unwrap();
        let s: f64 = g.quad_weights.iter().sum();
        let exact = 4.0 * PI / 3.0;
        assert!((s - exact).abs() < 1e-6, "{s} vs {exact}");
        assert!((s - exact).abs() < 1e-12 * exact);
    }

    #[test]
    fn square_measure_and_triangle_area() {
        let g = Grid::build(&Geometry::square(1.5, 10, 3), &unit_weights(2.0)).unwrap();
        let s: f64 = g.quad_weights.iter().sum();
        assert!((s - 9.0).abs() < 1e-12 * 9.0);
        assert_eq!(g.n_cells(), 200);
        assert_eq!(g.dofs().len(), 81);
    }

    #[test]
    fn constants_have_zero_gradient_exactly() {
        for geo in [
            Geometry::interval(1.0, 9, 3),
            Geometry::radial(4, 2.0, 17),
            Geometry::square(1.0, 8, 3),
        ] {
            let g = Grid::build(&geo, &unit_weights(2.0)).unwrap();
            let grad = g.gradient(&vec![3.25; g.n_nodes()]);
            assert!(grad.iter().all(|v| *v == 0.0), "{:?}", geo.mode);
        }
    }

    #[test]
    fn x_squared_on_fine_interval() {
        let g = Grid::build(&Geometry::interval(1.0, 1024, 3), &unit_weights(2.0)).unwrap();
        let f: Vec<f64> = g.centers.iter().map(|c| c[0] * c[0]).collect();
        assert!((g.integrate(&f).unwrap() - 2.0 / 3.0).abs() < 1e-4);
    }

    #[test]
    fn integrate_rejects_wrong_length() {
        let g = Grid::build(&Geometry::interval(1.0, 8, 3), &unit_weights(2.0)).unwrap();
        assert!(matches!(
            g.integrate(&[1.0; 3]),
            Err(Error::DimensionError {
                expected: 8,
                got: 3
            })
        ));
    }

    #[test]
    fn invalid_inputs() {
        let w = unit_weights(2.0);
        assert!(matches!(
            Grid::build(&Geometry::interval(0.0, 8, 3), &w),
            Err(Error::InvalidGeometry(_))
        ));
        assert!(matches!(
            Grid::build(&Geometry::interval(1.0, 7, 3), &w),
            Err(Error::InvalidGeometry(_))
        ));
        let mut zero_a = w.clone();
        zero_a.a = WeightDescriptor::constant(0.0);
        match Grid::build(&Geometry::interval(1.0, 8, 3), &zero_a) {
            Err(Error::InvalidWeight(msg)) => assert!(msg.contains("a ≡ 0")),
            other => panic!("{other:?}"),
        }
        let mut zero_m1 = w.clone();
        zero_m1.m1 = WeightDescriptor::compact_bump(1.0, 0.5);
        zero_m1.m1 = match zero_m1.m1 {
            WeightDescriptor::CompactBump {
                amplitude, radius, ..
            } => WeightDescriptor::CompactBump {
                amplitude,
                radius,
                center: vec![10.0],
            },
            _ => unreachable!(),
        };
        assert!(matches!(
            Grid::build(&Geometry::interval(1.0, 8, 3), &zero_m1),
            Err(Error::InvalidWeight(_))
        ));
        let mut off_centre = w;
        off_centre.m1 = WeightDescriptor::Gaussian {
            amplitude: 1.0,
            width: 1.0,
            center: vec![0.3],
        };
        assert!(matches!(
            Grid::build(&Geometry::radial(3, 1.0, 8), &off_centre),
            Err(Error::InvalidWeight(_))
        ));
    }

    #[test]
    fn envelope_dominates_positive_hardy_weight() {
        let w = WeightSpec {
            a: WeightDescriptor::compact_bump(1.0, 2.0),
            m1: WeightDescriptor::gaussian(1.0, 1.0),
            m2: WeightDescriptor::constant(0.1),
            omega_exponent: 2.5,
        };
        let g = Grid::build(&Geometry::interval(6.0, 64, 3), &w).unwrap();
        for f in [&g.weights.nodal, &g.weights.cell] {
            for i in 0..f.omega.len() {
                assert!(f.envelope[i] >= f.omega[i] && f.omega[i] > 0.0);
                assert_eq!(f.envelope[i], f.m2[i].max(f.omega[i]));
            }
        }
        // ω decreases with |x|
        let mut order: Vec<usize> = (0..g.n_nodes()).collect();
        order.sort_by(|&i, &j| g.node_radius(i).total_cmp(&g.node_radius(j)));
        for w2 in order.windows(2) {
            let (i, j) = (w2[0], w2[1]);
            if g.node_radius(j) > g.node_radius(i) {
                assert!(g.weights.nodal.omega[j] < g.weights.nodal.omega[i]);
            }
        }
    }

    #[test]
    fn boundary_values_must_vanish() {
        let g = Grid::build(&Geometry::interval(1.0, 8, 3), &unit_weights(2.0)).unwrap();
        let mut v = vec![1.0; 9];
        assert!(matches!(
            GridFunction::new(&g, v.clone()),
            Err(Error::DomainError(_))
        ));
        v[0] = 0.0;
        v[8] = 0.0;
        let u = GridFunction::new(&g, v).unwrap();
        assert!(u.is_consistent(&g));
        let f = GridFunction::from_fn(&g, |x| 1.0 + x[0]);
        assert_eq!(f.values()[0], 0.0);
        assert_eq!(f.values()[8], 0.0);
    }

    #[test]
    fn dump_format() {
        let g = Grid::build(&Geometry::square(1.0, 8, 3), &unit_weights(2.0)).unwrap();
        let mut buf = Vec::new();
        g.dump(&vec![0.0; g.n_nodes()], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert!(lines.next().unwrap().starts_with("# geometry=Tensor2D"));
        assert_eq!(lines.clone().count(), 81);
        assert_eq!(lines.next().unwrap(), "-1e0,-1e0 0e0");
    }
}
