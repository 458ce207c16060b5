//! Discrete domains on uniform tensor grids.
//!
//! Only interior lattice points carry unknowns. Every grid function is
//! implicitly extended by zero outside the domain, which is what makes the
//! exterior part of the nonlocal energies computable in closed form.

use std::collections::VecDeque;
use std::sync::Arc;

use crate::error::{Error, Result};

pub type Point = [f64; 2];

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Shape {
    Interval { a: f64, b: f64 },
    Rectangle { min: Point, max: Point },
    Disk { center: Point, radius: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Domain {
    shape: Shape,
    dim: usize,
    spacing: [f64; 2],
    /// Lattice point `(i, j)` sits at `origin + (i + 1, j + 1) * spacing`.
    origin: Point,
    lattice: [usize; 2],
    node_of: Vec<Option<usize>>,
    lattice_of: Vec<[usize; 2]>,
    nodes: Vec<Point>,
    boundary_distance: Vec<f64>,
}

fn check_finite(name: &'static str, x: f64) -> Result<()> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidDomain(format!("{name} is not finite")))
    }
}

fn check_count(name: &'static str, n: usize) -> Result<()> {
    if n < 3 {
        Err(Error::InvalidDomain(format!(
            "{name} = {n}, at least 3 nodes per axis are required"
        )))
    } else {
        Ok(())
    }
}

/// Uniform interior nodes `a + i*h`, `h = (b - a)/(n + 1)`, `i = 1..=n`.
pub fn build_interval(a: f64, b: f64, n: usize) -> Result<Arc<Domain>> {
    check_finite("a", a)?;
    check_finite("b", b)?;
    if a >= b {
        return Err(Error::InvalidDomain(format!(
            "interval needs a < b, got ({a}, {b})"
        )));
    }
    check_count("n", n)?;
    let h = (b - a) / (n + 1) as f64;
    let nodes: Vec<Point> = (1..=n).map(|i| [a + i as f64 * h, 0.0]).collect();
    let boundary_distance = nodes.iter().map(|x| (x[0] - a).min(b - x[0])).collect();
    Ok(Arc::new(Domain {
        shape: Shape::Interval { a, b },
        dim: 1,
        spacing: [h, h],
        origin: [a, 0.0],
        lattice: [n, 1],
        node_of: (0..n).map(Some).collect(),
        lattice_of: (0..n).map(|i| [i, 0]).collect(),
        nodes,
        boundary_distance,
    }))
}

/// Tensor grid on the open rectangle `(ax, bx) x (ay, by)` with `nx * ny` interior nodes.
pub fn build_rectangle(
    ax: f64,
    ay: f64,
    bx: f64,
    by: f64,
    nx: usize,
    ny: usize,
) -> Result<Arc<Domain>> {
    for (name, v) in [("ax", ax), ("ay", ay), ("bx", bx), ("by", by)] {
        check_finite(name, v)?;
    }
    if ax >= bx || ay >= by {
        return Err(Error::InvalidDomain(format!(
            "degenerate rectangle ({ax}, {bx}) x ({ay}, {by})"
        )));
    }
    check_count("nx", nx)?;
    check_count("ny", ny)?;
    let hx = (bx - ax) / (nx + 1) as f64;
    let hy = (by - ay) / (ny + 1) as f64;
    let mut nodes = Vec::with_capacity(nx * ny);
    let mut lattice_of = Vec::with_capacity(nx * ny);
    let mut boundary_distance = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let x = ax + (i + 1) as f64 * hx;
            let y = ay + (j + 1) as f64 * hy;
            nodes.push([x, y]);
            lattice_of.push([i, j]);
            boundary_distance.push((x - ax).min(bx - x).min(y - ay).min(by - y));
        }
    }
    Ok(Arc::new(Domain {
        shape: Shape::Rectangle {
            min: [ax, ay],
            max: [bx, by],
        },
        dim: 2,
        spacing: [hx, hy],
        origin: [ax, ay],
        lattice: [nx, ny],
        node_of: (0..nx * ny).map(Some).collect(),
        lattice_of,
        nodes,
        boundary_distance,
    }))
}

/// Disk obtained by masking the tensor grid of its bounding square.
///
/// The boundary distance is the analytic `radius - |x - center|`, not the
/// staircase distance of the mask. Masks that are not 4-connected are rejected.
pub fn build_disk(center: Point, radius: f64, n_per_axis: usize) -> Result<Arc<Domain>> {
    check_finite("center.x", center[0])?;
    check_finite("center.y", center[1])?;
    check_finite("radius", radius)?;
    if radius <= 0.0 {
        return Err(Error::InvalidDomain(format!(
            "disk radius must be positive, got {radius}"
        )));
    }
    check_count("n_per_axis", n_per_axis)?;
    let n = n_per_axis;
    let h = 2.0 * radius / (n + 1) as f64;
    let origin = [center[0] - radius, center[1] - radius];
    let mut node_of = vec![None; n * n];
    let mut nodes = Vec::new();
    let mut lattice_of = Vec::new();
    let mut boundary_distance = Vec::new();
    for j in 0..n {
        for i in 0..n {
            let x = origin[0] + (i + 1) as f64 * h;
            let y = origin[1] + (j + 1) as f64 * h;
            let r = (x - center[0]).hypot(y - center[1]);
            if r < radius {
                node_of[j * n + i] = Some(nodes.len());
                nodes.push([x, y]);
                lattice_of.push([i, j]);
                boundary_distance.push(radius - r);
            }
        }
    }
    let domain = Domain {
        shape: Shape::Disk { center, radius },
        dim: 2,
        spacing: [h, h],
        origin,
        lattice: [n, n],
        node_of,
        lattice_of,
        nodes,
        boundary_distance,
    };
    if !domain.is_connected() {
        return Err(Error::InvalidDomain(format!(
            "disk mask at n = {n} is not 4-connected"
        )));
    }
    Ok(Arc::new(domain))
}

impl Domain {
    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Largest grid spacing over the axes.
    pub fn spacing(&self) -> f64 {
        if self.dim == 1 {
            self.spacing[0]
        } else {
            self.spacing[0].max(self.spacing[1])
        }
    }

    pub fn spacings(&self) -> [f64; 2] {
        self.spacing
    }

    /// Quadrature weight of one node, `h^dim`.
    pub fn cell_volume(&self) -> f64 {
        if self.dim == 1 {
            self.spacing[0]
        } else {
            self.spacing[0] * self.spacing[1]
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[Point] {
        &self.nodes
    }

    pub fn node(&self, i: usize) -> Point {
        self.nodes[i]
    }

    pub fn boundary_distance(&self) -> &[f64] {
        &self.boundary_distance
    }

    /// Interior lattice extent `[nx, ny]` (`ny = 1` in 1D).
    pub fn lattice_dims(&self) -> [usize; 2] {
        self.lattice
    }

    pub fn lattice_index(&self, node: usize) -> [usize; 2] {
        self.lattice_of[node]
    }

    /// Node at signed lattice coordinates; `None` outside the lattice or the mask.
    pub fn node_at(&self, i: isize, j: isize) -> Option<usize> {
        let [nx, ny] = self.lattice;
        if i < 0 || j < 0 || i as usize >= nx || j as usize >= ny {
            return None;
        }
        self.node_of[j as usize * nx + i as usize]
    }

    /// Coordinates of a lattice position, inside the domain or not.
    pub fn lattice_point(&self, i: isize, j: isize) -> Point {
        [
            self.origin[0] + (i + 1) as f64 * self.spacing[0],
            if self.dim == 1 {
                0.0
            } else {
                self.origin[1] + (j + 1) as f64 * self.spacing[1]
            },
        ]
    }

    /// Whether a point lies in the open domain.
    pub fn contains(&self, x: Point) -> bool {
        match self.shape {
            Shape::Interval { a, b } => x[0] > a && x[0] < b,
            Shape::Rectangle { min, max } => {
                x[0] > min[0] && x[0] < max[0] && x[1] > min[1] && x[1] < max[1]
            }
            Shape::Disk { center, radius } => (x[0] - center[0]).hypot(x[1] - center[1]) < radius,
        }
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        point_distance(self.nodes[i], self.nodes[j])
    }

    /// Euclidean length of a lattice offset.
    pub fn offset_length(&self, di: usize, dj: usize) -> f64 {
        let dx = di as f64 * self.spacing[0];
        if self.dim == 1 {
            dx
        } else {
            dx.hypot(dj as f64 * self.spacing[1])
        }
    }

    /// Radius of the largest ball contained in the domain.
    pub fn inradius(&self) -> f64 {
        match self.shape {
            Shape::Interval { a, b } => 0.5 * (b - a),
            Shape::Rectangle { min, max } => 0.5 * (max[0] - min[0]).min(max[1] - min[1]),
            Shape::Disk { radius, .. } => radius,
        }
    }

    /// Center of the largest inscribed ball; ties go to the lexicographically
    /// smallest coordinate.
    pub fn ball_center(&self) -> Point {
        match self.shape {
            Shape::Interval { a, b } => [0.5 * (a + b), 0.0],
            Shape::Rectangle { min, .. } => {
                let r = self.inradius();
                [min[0] + r, min[1] + r]
            }
            Shape::Disk { center, .. } => center,
        }
    }

    pub fn diameter(&self) -> f64 {
        match self.shape {
            Shape::Interval { a, b } => b - a,
            Shape::Rectangle { min, max } => (max[0] - min[0]).hypot(max[1] - min[1]),
            Shape::Disk { radius, .. } => 2.0 * radius,
        }
    }

    /// Distance from `x` (inside the domain) to the boundary along the unit direction `e`.
    pub fn ray_exit(&self, x: Point, e: Point) -> f64 {
        match self.shape {
            Shape::Interval { a, b } => {
                if e[0] > 0.0 {
                    (b - x[0]) / e[0]
                } else {
                    (a - x[0]) / e[0]
                }
            }
            Shape::Rectangle { min, max } => {
                let mut t = f64::INFINITY;
                for k in 0..2 {
                    if e[k] > 0.0 {
                        t = t.min((max[k] - x[k]) / e[k]);
                    } else if e[k] < 0.0 {
                        t = t.min((min[k] - x[k]) / e[k]);
                    }
                }
                t
            }
            Shape::Disk { center, radius } => {
                let q = [x[0] - center[0], x[1] - center[1]];
                let b = q[0] * e[0] + q[1] * e[1];
                let c = q[0] * q[0] + q[1] * q[1] - radius * radius;
                -b + (b * b - c).max(0.0).sqrt()
            }
        }
    }

    fn is_connected(&self) -> bool {
        if self.nodes.is_empty() {
            return false;
        }
        let mut seen = vec![false; self.nodes.len()];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        let mut count = 1;
        while let Some(k) = queue.pop_front() {
            let [i, j] = self.lattice_of[k];
            let (i, j) = (i as isize, j as isize);
            for (di, dj) in [(1, 0), (-1, 0), (0, 1), (0, -1)] {
                if let Some(m) = self.node_at(i + di, j + dj) {
                    if !seen[m] {
                        seen[m] = true;
                        count += 1;
                        queue.push_back(m);
                    }
                }
            }
        }
        count == self.nodes.len()
    }
}

pub fn point_distance(x: Point, y: Point) -> f64 {
    (x[0] - y[0]).hypot(x[1] - y[1])
}

/// Standalone form of [`Domain::inradius`].
pub fn inradius(domain: &Domain) -> Result<f64> {
    if domain.is_empty() {
        return Err(Error::InvalidDomain("empty domain".into()));
    }
    Ok(domain.inradius())
}

/// Real values on the interior nodes of a domain, zero outside.
#[derive(Debug, Clone)]
pub struct GridFunction {
    domain: Arc<Domain>,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(domain: &Arc<Domain>, values: Vec<f64>) -> Result<Self> {
        if values.len() != domain.len() {
            return Err(Error::DomainMismatch);
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::OutOfDomain(format!("non-finite value at node {i}")));
        }
        Ok(Self {
            domain: Arc::clone(domain),
            values,
        })
    }

    pub fn zeros(domain: &Arc<Domain>) -> Self {
        Self {
            domain: Arc::clone(domain),
            values: vec![0.0; domain.len()],
        }
    }

    pub fn from_fn(domain: &Arc<Domain>, f: impl Fn(Point) -> f64) -> Self {
        let values = domain.nodes().iter().map(|&x| f(x)).collect();
        Self {
            domain: Arc::clone(domain),
            values,
        }
    }

    pub(crate) fn from_raw(domain: &Arc<Domain>, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), domain.len());
        Self {
            domain: Arc::clone(domain),
            values,
        }
    }

    pub fn domain(&self) -> &Arc<Domain> {
        &self.domain
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn same_domain(&self, other: &GridFunction) -> bool {
        Arc::ptr_eq(&self.domain, &other.domain) || *self.domain == *other.domain
    }

    pub fn ensure_domain(&self, domain: &Domain) -> Result<()> {
        if std::ptr::eq(Arc::as_ptr(&self.domain), domain) || *self.domain == *domain {
            Ok(())
        } else {
            Err(Error::DomainMismatch)
        }
    }

    pub fn scaled(&self, c: f64) -> Self {
        self.map(|v| c * v)
    }

    pub fn abs(&self) -> Self {
        self.map(f64::abs)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            domain: Arc::clone(&self.domain),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// `d_R = dist(., boundary of B_R) / R` on the largest inscribed ball, zero elsewhere.
pub fn normalized_cone(domain: &Arc<Domain>) -> GridFunction {
    let c = domain.ball_center();
    let r = domain.inradius();
    GridFunction::from_fn(domain, |x| ((r - point_distance(x, c)) / r).max(0.0))
}
