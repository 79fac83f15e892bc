//! Uniform interval meshes and structured rectangle triangulations with P1
//! elements and degree-5 Gauss quadrature.

use std::fmt::Write as _;
use std::sync::Arc;

use crate::{Error, Result};

/// The geometric description a mesh was built from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Geometry {
    Interval { a: f64, b: f64, n: usize },
    Rectangle { ax: f64, ay: f64, bx: f64, by: f64, nx: usize, ny: usize },
}

impl Geometry {
    pub fn dimension(&self) -> usize {
        match self {
            Geometry::Interval { .. } => 1,
            Geometry::Rectangle { .. } => 2,
        }
    }

    fn contains(&self, other: &Geometry, slack: f64) -> bool {
        match (self, other) {
            (Geometry::Interval { a, b, .. }, Geometry::Interval { a: c, b: d, .. }) => {
                *c >= a - slack && *d <= b + slack
            }
            (
                Geometry::Rectangle { ax, ay, bx, by, .. },
                Geometry::Rectangle { ax: cx, ay: cy, bx: dx, by: dy, .. },
            ) => *cx >= ax - slack && *cy >= ay - slack && *dx <= bx + slack && *dy <= by + slack,
            _ => false,
        }
    }

    pub fn diameter(&self) -> f64 {
        match *self {
            Geometry::Interval { a, b, .. } => b - a,
            Geometry::Rectangle { ax, ay, bx, by, .. } => (bx - ax).hypot(by - ay),
        }
    }
}

/// Reference quadrature: points in barycentric coordinates and weights that
/// sum to one.
struct RefRule {
    bary: Vec<[f64; 3]>,
    weights: Vec<f64>,
}

fn gauss3_interval() -> RefRule {
    let d = 0.15f64.sqrt();
    let xs = [0.5 - d, 0.5, 0.5 + d];
    RefRule {
        bary: xs.iter().map(|&x| [1.0 - x, x, 0.0]).collect(),
        weights: vec![5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0],
    }
}

fn dunavant5_triangle() -> RefRule {
    let s = 15f64.sqrt();
    let a = (6.0 - s) / 21.0;
    let b = (6.0 + s) / 21.0;
    let wa = (155.0 - s) / 1200.0;
    let wb = (155.0 + s) / 1200.0;
    let mut bary = vec![[1.0 / 3.0; 3]];
    let mut weights = vec![0.225];
    for (t, w) in [(a, wa), (b, wb)] {
        let r = 1.0 - 2.0 * t;
        bary.extend([[t, t, r], [t, r, t], [r, t, t]]);
        weights.extend([w, w, w]);
    }
    RefRule { bary, weights }
}

/// A P1 mesh with precomputed quadrature data.
#[derive(Debug, Clone)]
pub struct Mesh {
    geometry: Geometry,
    nodes: Vec<[f64; 2]>,
    cells: Vec<usize>,
    boundary: Vec<bool>,
    dof_of: Vec<Option<usize>>,
    interior: Vec<usize>,
    measures: Vec<f64>,
    grads: Vec<[[f64; 2]; 3]>,
    qp_per_cell: usize,
    ref_basis: Vec<[f64; 3]>,
    qp_coords: Vec<[f64; 2]>,
    qp_weights: Vec<f64>,
    spacing: f64,
}

impl PartialEq for Mesh {
    fn eq(&self, other: &Self) -> bool {
        self.geometry == other.geometry
    }
}

/// Uniform 1D mesh of `[a, b]` with `n` elements.
pub fn build_interval_mesh(a: f64, b: f64, n: usize) -> Result<Mesh> {
    if !(a.is_finite() && b.is_finite()) || a >= b {
        return Err(Error::Domain(format!("interval requires a < b, got ({a}, {b})")));
    }
    if n < 4 {
        return Err(Error::Domain(format!("interval mesh needs at least 4 elements, got {n}")));
    }
    Ok(Mesh::build(Geometry::Interval { a, b, n }))
}

/// Structured triangulation of `[ax, bx] × [ay, by]`; each cell is cut
/// along its lower-left to upper-right diagonal.
pub fn build_rectangle_mesh(ax: f64, ay: f64, bx: f64, by: f64, nx: usize, ny: usize) -> Result<Mesh> {
    if ![ax, ay, bx, by].iter().all(|v| v.is_finite()) || ax >= bx || ay >= by {
        return Err(Error::Domain(format!(
            "degenerate rectangle ({ax}, {ay})-({bx}, {by})"
        )));
    }
    if nx < 2 || ny < 2 {
        return Err(Error::Domain(format!(
            "rectangle mesh needs at least 2 cells per direction, got {nx}×{ny}"
        )));
    }
    Ok(Mesh::build(Geometry::Rectangle { ax, ay, bx, by, nx, ny }))
}

/// Grows the domain by `margin` on every side, keeping the element size.
pub fn dilate_domain(mesh: &Mesh, margin: f64) -> Result<Mesh> {
    if !(margin > 0.0 && margin.is_finite()) {
        return Err(Error::Domain(format!("margin must be positive, got {margin}")));
    }
    match mesh.geometry {
        Geometry::Interval { a, b, n } => {
            let m = grown_count(n, b - a, margin);
            build_interval_mesh(a - margin, b + margin, m)
        }
        Geometry::Rectangle { ax, ay, bx, by, nx, ny } => build_rectangle_mesh(
            ax - margin,
            ay - margin,
            bx + margin,
            by + margin,
            grown_count(nx, bx - ax, margin),
            grown_count(ny, by - ay, margin),
        ),
    }
}

fn grown_count(n: usize, len: f64, margin: f64) -> usize {
    ((n as f64) * (len + 2.0 * margin) / len).round().max(n as f64) as usize
}

impl Mesh {
    fn build(geometry: Geometry) -> Mesh {
        let (nodes, cells, boundary, vpc, rule, spacing) = match geometry {
            Geometry::Interval { a, b, n } => {
                let h = (b - a) / n as f64;
                let nodes: Vec<[f64; 2]> = (0..=n)
                    .map(|i| [if i == n { b } else { a + h * i as f64 }, 0.0])
                    .collect();
                let cells: Vec<usize> = (0..n).flat_map(|e| [e, e + 1]).collect();
                let boundary = (0..=n).map(|i| i == 0 || i == n).collect();
                (nodes, cells, boundary, 2, gauss3_interval(), h)
            }
            Geometry::Rectangle { ax, ay, bx, by, nx, ny } => {
                let hx = (bx - ax) / nx as f64;
                let hy = (by - ay) / ny as f64;
                let mut nodes = Vec::with_capacity((nx + 1) * (ny + 1));
                let mut boundary = Vec::with_capacity(nodes.capacity());
                for j in 0..=ny {
                    for i in 0..=nx {
                        let x = if i == nx { bx } else { ax + hx * i as f64 };
                        let y = if j == ny { by } else { ay + hy * j as f64 };
                        nodes.push([x, y]);
                        boundary.push(i == 0 || i == nx || j == 0 || j == ny);
                    }
                }
                let id = |i: usize, j: usize| j * (nx + 1) + i;
                let mut cells = Vec::with_capacity(6 * nx * ny);
                for j in 0..ny {
                    for i in 0..nx {
                        let (n00, n10, n01, n11) = (id(i, j), id(i + 1, j), id(i, j + 1), id(i + 1, j + 1));
                        cells.extend([n00, n10, n11, n00, n11, n01]);
                    }
                }
                (nodes, cells, boundary, 3, dunavant5_triangle(), (hx * hy).sqrt())
            }
        };

        let mut dof_of = vec![None; nodes.len()];
        let mut interior = Vec::new();
        for (i, &b) in boundary.iter().enumerate() {
            if !b {
                dof_of[i] = Some(interior.len());
                interior.push(i);
            }
        }

        let ncell = cells.len() / vpc;
        let nq = rule.weights.len();
        let mut measures = Vec::with_capacity(ncell);
        let mut grads = Vec::with_capacity(ncell);
        let mut qp_coords = Vec::with_capacity(ncell * nq);
        let mut qp_weights = Vec::with_capacity(ncell * nq);
        for e in 0..ncell {
            let c = &cells[e * vpc..(e + 1) * vpc];
            let (meas, g) = if vpc == 2 {
                let h = nodes[c[1]][0] - nodes[c[0]][0];
                (h, [[-1.0 / h, 0.0], [1.0 / h, 0.0], [0.0, 0.0]])
            } else {
                let [x0, y0] = nodes[c[0]];
                let [x1, y1] = nodes[c[1]];
                let [x2, y2] = nodes[c[2]];
                let det = (x1 - x0) * (y2 - y0) - (x2 - x0) * (y1 - y0);
                let g = [
                    [(y1 - y2) / det, (x2 - x1) / det],
                    [(y2 - y0) / det, (x0 - x2) / det],
                    [(y0 - y1) / det, (x1 - x0) / det],
                ];
                (0.5 * det, g)
            };
            debug_assert!(meas > 0.0);
            measures.push(meas);
            grads.push(g);
            for (bq, w) in rule.bary.iter().zip(&rule.weights) {
                let mut p = [0.0; 2];
                for (k, &v) in c.iter().enumerate() {
                    p[0] += bq[k] * nodes[v][0];
                    p[1] += bq[k] * nodes[v][1];
                }
                qp_coords.push(p);
                qp_weights.push(w * meas);
            }
        }

        Mesh {
            geometry,
            nodes,
            cells,
            boundary,
            dof_of,
            interior,
            measures,
            grads,
            qp_per_cell: nq,
            ref_basis: rule.bary,
            qp_coords,
            qp_weights,
            spacing,
        }
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    pub fn dimension(&self) -> usize {
        self.geometry.dimension()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[[f64; 2]] {
        &self.nodes
    }

    pub fn cell_count(&self) -> usize {
        self.measures.len()
    }

    pub fn vertices_per_cell(&self) -> usize {
        self.dimension() + 1
    }

    pub fn cell(&self, e: usize) -> &[usize] {
        let v = self.vertices_per_cell();
        &self.cells[e * v..(e + 1) * v]
    }

    pub fn cell_measure(&self, e: usize) -> f64 {
        self.measures[e]
    }

    /// Gradients of the local basis functions on cell `e`.
    pub fn cell_basis_gradients(&self, e: usize) -> &[[f64; 2]] {
        &self.grads[e][..self.vertices_per_cell()]
    }

    pub fn is_boundary(&self, node: usize) -> bool {
        self.boundary[node]
    }

    pub fn boundary_nodes(&self) -> Vec<usize> {
        (0..self.nodes.len()).filter(|&i| self.boundary[i]).collect()
    }

    /// Interior nodes in degree-of-freedom order.
    pub fn interior_nodes(&self) -> &[usize] {
        &self.interior
    }

    pub fn dof(&self, node: usize) -> Option<usize> {
        self.dof_of[node]
    }

    pub fn dof_count(&self) -> usize {
        self.interior.len()
    }

    /// Half-bandwidth of the interior stiffness pattern.
    pub fn dof_bandwidth(&self) -> usize {
        let mut bw = 0;
        for e in 0..self.cell_count() {
            let c = self.cell(e);
            for &a in c {
                for &b in c {
                    if let (Some(i), Some(j)) = (self.dof_of[a], self.dof_of[b]) {
                        bw = bw.max(i.abs_diff(j));
                    }
                }
            }
        }
        bw
    }

    /// Characteristic element size (length in 1D, sqrt of cell area in 2D).
    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn measure(&self) -> f64 {
        self.measures.iter().sum()
    }

    pub fn qp_per_cell(&self) -> usize {
        self.qp_per_cell
    }

    pub fn qp_count(&self) -> usize {
        self.qp_weights.len()
    }

    pub fn qp_coords(&self) -> &[[f64; 2]] {
        &self.qp_coords
    }

    pub fn qp_weights(&self) -> &[f64] {
        &self.qp_weights
    }

    /// Values of the local basis functions at local quadrature point `j`.
    pub fn qp_basis(&self, j: usize) -> &[f64] {
        &self.ref_basis[j][..self.vertices_per_cell()]
    }

    /// Quadrature approximation of the integral of a field given at every
    /// quadrature point. Summation runs in cell order, so results are
    /// reproducible bit for bit.
    pub fn integrate(&self, field: &[f64]) -> f64 {
        assert_eq!(field.len(), self.qp_count(), "field must be sampled at every quadrature point");
        field.iter().zip(&self.qp_weights).map(|(f, w)| f * w).sum()
    }

    /// Interpolates nodal values to the quadrature points.
    pub fn nodal_to_qp(&self, values: &[f64]) -> Vec<f64> {
        let nq = self.qp_per_cell;
        let mut out = Vec::with_capacity(self.qp_count());
        for e in 0..self.cell_count() {
            let c = self.cell(e);
            for j in 0..nq {
                let b = self.qp_basis(j);
                out.push(c.iter().zip(b).map(|(&v, w)| values[v] * w).sum());
            }
        }
        out
    }

    /// Gradient of a P1 field on cell `e`.
    pub fn cell_gradient(&self, e: usize, values: &[f64]) -> [f64; 2] {
        let mut g = [0.0; 2];
        for (&v, gb) in self.cell(e).iter().zip(self.cell_basis_gradients(e)) {
            g[0] += values[v] * gb[0];
            g[1] += values[v] * gb[1];
        }
        g
    }

    /// Finds the cell containing `p` and the barycentric weights of its
    /// vertices; `None` when `p` lies outside the mesh.
    pub fn locate(&self, p: [f64; 2]) -> Option<(usize, [f64; 3])> {
        let slack = 1e-12 * self.geometry.diameter();
        match self.geometry {
            Geometry::Interval { a, b, n } => {
                if p[0] < a - slack || p[0] > b + slack {
                    return None;
                }
                let h = (b - a) / n as f64;
                let e = (((p[0] - a) / h).floor().max(0.0) as usize).min(n - 1);
                let [x0, _] = self.nodes[e];
                let [x1, _] = self.nodes[e + 1];
                let t = ((p[0] - x0) / (x1 - x0)).clamp(0.0, 1.0);
                Some((e, [1.0 - t, t, 0.0]))
            }
            Geometry::Rectangle { ax, ay, bx, by, nx, ny } => {
                if p[0] < ax - slack || p[0] > bx + slack || p[1] < ay - slack || p[1] > by + slack {
                    return None;
                }
                let hx = (bx - ax) / nx as f64;
                let hy = (by - ay) / ny as f64;
                let i = (((p[0] - ax) / hx).floor().max(0.0) as usize).min(nx - 1);
                let j = (((p[1] - ay) / hy).floor().max(0.0) as usize).min(ny - 1);
                let xi = ((p[0] - ax) / hx - i as f64).clamp(0.0, 1.0);
                let eta = ((p[1] - ay) / hy - j as f64).clamp(0.0, 1.0);
                let base = 2 * (j * nx + i);
                if xi >= eta {
                    // vertices n00, n10, n11
                    Some((base, [1.0 - xi, xi - eta, eta]))
                } else {
                    // vertices n00, n11, n01
                    Some((base + 1, [1.0 - eta, xi, eta - xi]))
                }
            }
        }
    }

    /// Evaluates a nodal field at an arbitrary point inside the mesh.
    pub fn evaluate(&self, values: &[f64], p: [f64; 2]) -> Option<f64> {
        let (e, w) = self.locate(p)?;
        Some(self.cell(e).iter().zip(w).map(|(&v, w)| values[v] * w).sum())
    }

    pub fn same_as(&self, other: &Mesh) -> bool {
        std::ptr::eq(self, other) || self.geometry == other.geometry
    }
}

/// Nodal scalar field on a shared mesh.
#[derive(Debug, Clone)]
pub struct GridFunction {
    mesh: Arc<Mesh>,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(mesh: Arc<Mesh>, values: Vec<f64>) -> Result<Self> {
        if values.len() != mesh.node_count() {
            return Err(Error::InvalidInput(format!(
                "expected {} nodal values, got {}",
                mesh.node_count(),
                values.len()
            )));
        }
        Ok(GridFunction { mesh, values })
    }

    pub fn zeros(mesh: Arc<Mesh>) -> Self {
        let n = mesh.node_count();
        GridFunction { mesh, values: vec![0.0; n] }
    }

    pub fn from_fn(mesh: Arc<Mesh>, f: impl Fn([f64; 2]) -> f64) -> Self {
        let values = mesh.nodes().iter().map(|&p| f(p)).collect();
        GridFunction { mesh, values }
    }

    /// Builds a field from interior degrees of freedom, zero on the boundary.
    pub fn from_dofs(mesh: Arc<Mesh>, dofs: &[f64]) -> Self {
        let mut values = vec![0.0; mesh.node_count()];
        for (k, &node) in mesh.interior_nodes().iter().enumerate() {
            values[node] = dofs[k];
        }
        GridFunction { mesh, values }
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn dofs(&self) -> Vec<f64> {
        self.mesh.interior_nodes().iter().map(|&n| self.values[n]).collect()
    }

    pub fn is_dirichlet_zero(&self) -> bool {
        self.mesh.boundary_nodes().iter().all(|&n| self.values[n] == 0.0)
    }

    pub fn at_qp(&self) -> Vec<f64> {
        self.mesh.nodal_to_qp(&self.values)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn scaled(&self, c: f64) -> Self {
        self.map(|v| c * v)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        GridFunction {
            mesh: self.mesh.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn same_mesh(&self, other: &GridFunction) -> bool {
        Arc::ptr_eq(&self.mesh, &other.mesh) || self.mesh.same_as(&other.mesh)
    }

    /// Largest nodal distance `max |self − other|`.
    pub fn max_distance(&self, other: &GridFunction) -> Result<f64> {
        if !self.same_mesh(other) {
            return Err(Error::MeshMismatch);
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs())))
    }

    /// Piecewise-linear interpolation of this field at the nodes of `target`.
    pub fn restrict(&self, target: &Arc<Mesh>) -> Result<GridFunction> {
        let slack = 1e-12 * self.mesh.geometry().diameter();
        if !self.mesh.geometry().contains(target.geometry(), slack) {
            return Err(Error::Containment(format!(
                "{:?} does not contain {:?}",
                self.mesh.geometry(),
                target.geometry()
            )));
        }
        let values = target
            .nodes()
            .iter()
            .map(|&p| {
                self.mesh
                    .evaluate(&self.values, p)
                    .ok_or_else(|| Error::Containment(format!("node {p:?} outside source mesh")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(GridFunction { mesh: target.clone(), values })
    }

    /// CSV with header `x[,y],value`, one row per node, 17 significant digits.
    pub fn to_csv(&self) -> String {
        let two_d = self.mesh.dimension() == 2;
        let mut s = String::from(if two_d { "x,y,value\n" } else { "x,value\n" });
        for (p, v) in self.mesh.nodes().iter().zip(&self.values) {
            if two_d {
                let _ = writeln!(s, "{:.16e},{:.16e},{:.16e}", p[0], p[1], v);
            } else {
                let _ = writeln!(s, "{:.16e},{:.16e}", p[0], v);
            }
        }
        s
    }
}

/// Parsed rows of a grid-function CSV (coordinates and values), not yet
/// bound to a mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct NodalTable {
    pub dimension: usize,
    pub points: Vec<[f64; 2]>,
    pub values: Vec<f64>,
}

/// Parses the `x[,y],value` CSV format.
pub fn parse_nodal_csv(text: &str) -> Result<NodalTable> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or(Error::Parse {
        line: 1,
        column: 1,
        message: "empty CSV".into(),
    })?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    let dimension = match cols.as_slice() {
        ["x", "value"] => 1,
        ["x", "y", "value"] => 2,
        _ => {
            return Err(Error::Parse {
                line: 1,
                column: 1,
                message: format!("expected header `x,value` or `x,y,value`, got `{header}`"),
            })
        }
    };
    let mut points = Vec::new();
    let mut values = Vec::new();
    for (ln, line) in lines {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != dimension + 1 {
            return Err(Error::Parse {
                line: ln + 1,
                column: 1,
                message: format!("expected {} fields, got {}", dimension + 1, fields.len()),
            });
        }
        let mut nums = [0.0; 3];
        let mut col = 1;
        for (k, f) in fields.iter().enumerate() {
            let v: f64 = f.trim().parse().map_err(|_| Error::Parse {
                line: ln + 1,
                column: col,
                message: format!("not a number: `{}`", f.trim()),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    line: ln + 1,
                    column: col,
                    message: "non-finite value".into(),
                });
            }
            nums[k] = v;
            col += f.len() + 1;
        }
        if dimension == 1 {
            points.push([nums[0], 0.0]);
            values.push(nums[1]);
        } else {
            points.push([nums[0], nums[1]]);
            values.push(nums[2]);
        }
    }
    Ok(NodalTable { dimension, points, values })
}

impl NodalTable {
    /// Binds the table to a mesh whose nodes match the table rows in order.
    pub fn into_grid_function(self, mesh: Arc<Mesh>) -> Result<GridFunction> {
        if self.dimension != mesh.dimension() || self.values.len() != mesh.node_count() {
            return Err(Error::InvalidInput(format!(
                "table has {} rows in {}D, mesh has {} nodes in {}D",
                self.values.len(),
                self.dimension,
                mesh.node_count(),
                mesh.dimension()
            )));
        }
        let tol = 1e-9 * mesh.geometry().diameter();
        for (i, (p, q)) in self.points.iter().zip(mesh.nodes()).enumerate() {
            if (p[0] - q[0]).abs() > tol || (p[1] - q[1]).abs() > tol {
                return Err(Error::InvalidInput(format!("row {i} at {p:?} does not match node {q:?}")));
            }
        }
        GridFunction::new(mesh, self.values)
    }

    /// Infers the uniform mesh the table was exported from.
    pub fn infer_mesh(&self) -> Result<Mesh> {
        let xs = sorted_unique(self.points.iter().map(|p| p[0]));
        if self.dimension == 1 {
            if xs.len() < 2 {
                return Err(Error::InvalidInput("need at least two nodes".into()));
            }
            build_interval_mesh(xs[0], xs[xs.len() - 1], xs.len() - 1)
        } else {
            let ys = sorted_unique(self.points.iter().map(|p| p[1]));
            if xs.len() < 2 || ys.len() < 2 {
                return Err(Error::InvalidInput("need a tensor grid of nodes".into()));
            }
            build_rectangle_mesh(xs[0], ys[0], xs[xs.len() - 1], ys[ys.len() - 1], xs.len() - 1, ys.len() - 1)
        }
    }
}

fn sorted_unique(it: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut v: Vec<f64> = it.collect();
    v.sort_by(f64::total_cmp);
    let scale = v.iter().fold(1.0f64, |m, x| m.max(x.abs()));
    v.dedup_by(|a, b| (*a - *b).abs() <= 1e-9 * scale);
    v
}
