//! Discrete energies of the coupled problem.
//!
//! * local p-energy `sum_cells |grad w|^p h^N` with forward differences and
//!   zero values outside the domain;
//! * Gagliardo energy `sum_{i != j} |w_i - w_j|^p |x_i - x_j|^{-N-tp} h^{2N}`
//!   plus the exterior contribution `2 sum_i |w_i|^p T_i h^N`, where
//!   `T_i = int_{complement} |x_i - y|^{-N-tp} dy`;
//! * the constraint `G(u, v) = 2 sum_i |u_i|^alpha |v_i|^beta h^N`;
//! * the Rayleigh quotient `J = I / G` with `I` the sum of the four energies.
//!
//! Every p-th power sum is accumulated with [`ScaledSum`], so the energies
//! stay representable for p in the hundreds.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::{invalid, Error, Result};
use crate::geometry::{Domain, GridFunction, Point, Shape};
use crate::parallel::{map_rows, sum_rows};
use crate::quadrature::adaptive_simpson;
use crate::scaled::ScaledSum;

/// Exponents of the coupled problem. `alpha + beta = p` always holds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProblemParams {
    p: f64,
    r: f64,
    s: f64,
    alpha: f64,
    beta: f64,
    gamma: f64,
}

fn open_unit(name: &'static str, x: f64) -> Result<()> {
    if x > 0.0 && x < 1.0 {
        Ok(())
    } else {
        Err(invalid(name, format!("must lie in (0, 1), got {x}")))
    }
}

/// `alpha = gamma * p` rounded to the nearest half, kept inside `[1, p - 1]`.
pub fn schedule_alpha(gamma: f64, p: f64) -> f64 {
    ((2.0 * gamma * p).round() / 2.0).clamp(1.0, p - 1.0)
}

impl ProblemParams {
    pub fn new(p: f64, r: f64, s: f64, alpha: f64, beta: f64, gamma: f64) -> Result<Self> {
        if !(p.is_finite() && p >= 2.0) {
            return Err(invalid("p", format!("must be finite and >= 2, got {p}")));
        }
        open_unit("r", r)?;
        open_unit("s", s)?;
        open_unit("gamma", gamma)?;
        if !(alpha >= 1.0) {
            return Err(invalid("alpha", format!("must be >= 1, got {alpha}")));
        }
        if !(beta >= 1.0) {
            return Err(invalid("beta", format!("must be >= 1, got {beta}")));
        }
        if (alpha + beta - p).abs() > 1e-12 * p {
            return Err(invalid(
                "alpha",
                format!("alpha + beta must equal p: {alpha} + {beta} != {p}"),
            ));
        }
        Ok(Self {
            p,
            r,
            s,
            alpha,
            beta: p - alpha,
            gamma,
        })
    }

    /// Parameters with `alpha` taken from the gamma schedule.
    pub fn with_gamma(p: f64, r: f64, s: f64, gamma: f64) -> Result<Self> {
        open_unit("gamma", gamma)?;
        if !(p.is_finite() && p >= 2.0) {
            return Err(invalid("p", format!("must be finite and >= 2, got {p}")));
        }
        let alpha = schedule_alpha(gamma, p);
        Self::new(p, r, s, alpha, p - alpha, gamma)
    }

    pub fn p(&self) -> f64 {
        self.p
    }
    pub fn r(&self) -> f64 {
        self.r
    }
    pub fn s(&self) -> f64 {
        self.s
    }
    pub fn alpha(&self) -> f64 {
        self.alpha
    }
    pub fn beta(&self) -> f64 {
        self.beta
    }
    pub fn gamma(&self) -> f64 {
        self.gamma
    }
}

/// The four energies, the constraint and the quotient, plus their logs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyBreakdown {
    pub local_u: f64,
    pub frac_u: f64,
    pub local_v: f64,
    pub frac_v: f64,
    pub constraint_g: f64,
    pub j: f64,
    /// `ln I`, the log of the summed energies.
    pub ln_numerator: f64,
    pub ln_g: f64,
    pub ln_j: f64,
}

fn check_exponent(p: f64) -> Result<()> {
    if p.is_finite() && p >= 1.0 {
        Ok(())
    } else {
        Err(invalid("p", format!("must be finite and >= 1, got {p}")))
    }
}

#[inline]
fn signed_pow_scaled(x: f64, ln_mag: f64) -> f64 {
    if x > 0.0 {
        ln_mag.exp()
    } else if x < 0.0 {
        -ln_mag.exp()
    } else {
        0.0
    }
}

// ---------------------------------------------------------------------------
// Local energy

#[derive(Debug, Clone, Copy)]
struct Cell {
    base: Option<usize>,
    xn: Option<usize>,
    yn: Option<usize>,
}

/// Forward-difference cells of a domain, including the ones touching the
/// zero boundary values.
#[derive(Debug, Clone)]
pub struct LocalStencil {
    domain: Arc<Domain>,
    cells: Vec<Cell>,
}

impl LocalStencil {
    pub fn new(domain: &Arc<Domain>) -> Self {
        let [nx, ny] = domain.lattice_dims();
        let mut cells = Vec::new();
        if domain.dim() == 1 {
            for i in -1..nx as isize {
                cells.push(Cell {
                    base: domain.node_at(i, 0),
                    xn: domain.node_at(i + 1, 0),
                    yn: None,
                });
            }
        } else {
            for j in -1..ny as isize {
                for i in -1..nx as isize {
                    let c = Cell {
                        base: domain.node_at(i, j),
                        xn: domain.node_at(i + 1, j),
                        yn: domain.node_at(i, j + 1),
                    };
                    if c.base.is_some() || c.xn.is_some() || c.yn.is_some() {
                        cells.push(c);
                    }
                }
            }
        }
        Self {
            domain: Arc::clone(domain),
            cells,
        }
    }

    #[inline]
    fn cell_gradient(&self, c: &Cell, w: &[f64]) -> (f64, f64) {
        let [hx, hy] = self.domain.spacings();
        let at = |k: Option<usize>| k.map_or(0.0, |k| w[k]);
        let b = at(c.base);
        let gx = (at(c.xn) - b) / hx;
        let gy = if self.domain.dim() == 1 {
            0.0
        } else {
            (at(c.yn) - b) / hy
        };
        (gx, gy)
    }

    /// `ln |grad w|` per cell (`-inf` for flat cells).
    pub(crate) fn ln_gradient_norms(&self, w: &[f64]) -> Vec<f64> {
        self.cells
            .iter()
            .map(|c| {
                let (gx, gy) = self.cell_gradient(c, w);
                0.5 * (gx * gx + gy * gy).ln()
            })
            .collect()
    }

    pub fn energy(&self, w: &[f64], p: f64) -> ScaledSum {
        let mut acc = ScaledSum::ZERO;
        for c in &self.cells {
            let (gx, gy) = self.cell_gradient(c, w);
            acc.push_log(0.5 * p * (gx * gx + gy * gy).ln());
        }
        acc.scale_log(self.domain.cell_volume().ln())
    }

    /// Adds `exp(-ln_scale) * d/dw sum_cells |grad w|^p h^N` into `out`.
    pub fn add_gradient_scaled(&self, w: &[f64], p: f64, ln_scale: f64, out: &mut [f64]) {
        let [hx, hy] = self.domain.spacings();
        let c0 = (p * self.domain.cell_volume()).ln() - ln_scale;
        for c in &self.cells {
            let (gx, gy) = self.cell_gradient(c, w);
            let n2 = gx * gx + gy * gy;
            if n2 == 0.0 {
                continue;
            }
            let coef = (0.5 * (p - 2.0) * n2.ln() + c0).exp();
            let (fx, fy) = (coef * gx / hx, coef * gy / hy);
            if let Some(k) = c.base {
                out[k] -= fx + fy;
            }
            if let Some(k) = c.xn {
                out[k] += fx;
            }
            if let Some(k) = c.yn {
                out[k] += fy;
            }
        }
    }

    /// Edges `(a, b, weight)` of the weighted stiffness
    /// `sum_cells w_c |grad|^2`, where `b = None` is a boundary edge.
    pub(crate) fn edges(&self, cell_weights: &[f64]) -> Vec<(usize, Option<usize>, f64)> {
        let [hx, hy] = self.domain.spacings();
        let mut edges = Vec::new();
        for (c, &wc) in self.cells.iter().zip(cell_weights) {
            let mut push = |a: Option<usize>, b: Option<usize>, w: f64| match (a, b) {
                (Some(a), b) => edges.push((a, b, w)),
                (None, Some(b)) => edges.push((b, None, w)),
                (None, None) => {}
            };
            push(c.base, c.xn, wc / (hx * hx));
            if self.domain.dim() == 2 {
                push(c.base, c.yn, wc / (hy * hy));
            }
        }
        edges
    }
}

// ---------------------------------------------------------------------------
// Exterior tail

/// `ln T(x)` with `T(x) = int_{complement of the domain} |x - y|^{-N - tp} dy`.
///
/// For convex domains `T(x) = (1/tp) int_{S^{N-1}} rho(theta)^{-tp} dtheta`
/// where `rho` is the distance to the boundary along `theta`; in 1D the
/// sphere is two points and the formula is closed.
pub fn exterior_tail_ln(domain: &Domain, x: Point, tp: f64) -> f64 {
    match domain.shape() {
        Shape::Interval { a, b } => {
            let mut s = ScaledSum::ZERO;
            s.push_log(-tp * (x[0] - a).ln());
            s.push_log(-tp * (b - x[0]).ln());
            s.ln() - tp.ln()
        }
        shape => {
            let d = match shape {
                Shape::Rectangle { min, max } => (x[0] - min[0])
                    .min(max[0] - x[0])
                    .min(x[1] - min[1])
                    .min(max[1] - x[1]),
                Shape::Disk { center, radius } => {
                    radius - (x[0] - center[0]).hypot(x[1] - center[1])
                }
                Shape::Interval { .. } => unreachable!(),
            };
            let mut breaks: Vec<f64> = match shape {
                Shape::Rectangle { min, max } => {
                    let mut b = vec![0.0, 0.5 * PI, PI, 1.5 * PI];
                    for corner in [
                        [min[0], min[1]],
                        [max[0], min[1]],
                        [max[0], max[1]],
                        [min[0], max[1]],
                    ] {
                        b.push(
                            (corner[1] - x[1])
                                .atan2(corner[0] - x[0])
                                .rem_euclid(2.0 * PI),
                        );
                    }
                    b
                }
                Shape::Disk { center, .. } => {
                    let out = (x[1] - center[1])
                        .atan2(x[0] - center[0])
                        .rem_euclid(2.0 * PI);
                    vec![0.0, out, (out + PI).rem_euclid(2.0 * PI)]
                }
                Shape::Interval { .. } => unreachable!(),
            };
            breaks.push(2.0 * PI);
            breaks.sort_by(f64::total_cmp);
            breaks.dedup_by(|a, b| (*a - *b).abs() < 1e-14);
            let f = |th: f64| {
                let rho = domain.ray_exit(x, [th.cos(), th.sin()]);
                (d / rho).powf(tp)
            };
            let integral: f64 = breaks
                .windows(2)
                .map(|w| adaptive_simpson(f, w[0], w[1], 1e-12))
                .sum();
            integral.ln() - tp * d.ln() - tp.ln()
        }
    }
}

// ---------------------------------------------------------------------------
// Gagliardo energy

/// Precomputed kernel and exterior-tail tables for one `(domain, t, p)`.
#[derive(Debug, Clone)]
pub struct FractionalKernel {
    domain: Arc<Domain>,
    t: f64,
    p: f64,
    ln_kernel: Vec<f64>,
    ln_tail: Vec<f64>,
}

impl FractionalKernel {
    pub fn new(domain: &Arc<Domain>, t: f64, p: f64) -> Result<Self> {
        open_unit("t", t)?;
        check_exponent(p)?;
        let [nx, ny] = domain.lattice_dims();
        let expo = domain.dim() as f64 + t * p;
        let mut ln_kernel = vec![f64::INFINITY; nx * ny];
        for dj in 0..ny {
            for di in 0..nx {
                if di + dj > 0 {
                    ln_kernel[dj * nx + di] = -expo * domain.offset_length(di, dj).ln();
                }
            }
        }
        let ln_tail = map_rows(domain.len(), |i| {
            exterior_tail_ln(domain, domain.node(i), t * p)
        });
        Ok(Self {
            domain: Arc::clone(domain),
            t,
            p,
            ln_kernel,
            ln_tail,
        })
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn domain(&self) -> &Arc<Domain> {
        &self.domain
    }

    /// `ln T_i` for every node.
    pub fn ln_tail(&self) -> &[f64] {
        &self.ln_tail
    }

    #[inline]
    pub(crate) fn ln_kernel(&self, i: usize, j: usize) -> f64 {
        let [a, b] = self.domain.lattice_index(i);
        let [c, d] = self.domain.lattice_index(j);
        let nx = self.domain.lattice_dims()[0];
        self.ln_kernel[a.abs_diff(c) + nx * b.abs_diff(d)]
    }

    /// Interior pair sum of node `i`: `sum_{j != i} |w_i - w_j|^p K_ij` (no volume factors).
    fn row_pairs(&self, w: &[f64], i: usize) -> ScaledSum {
        let wi = w[i];
        let mut acc = ScaledSum::ZERO;
        for (j, &wj) in w.iter().enumerate() {
            if j != i {
                acc.push_log(self.p * (wi - wj).abs().ln() + self.ln_kernel(i, j));
            }
        }
        acc
    }

    /// Interior double sum and exterior part, separately.
    pub fn energy_parts(&self, w: &[f64]) -> (ScaledSum, ScaledSum) {
        let ln_vol = self.domain.cell_volume().ln();
        let interior = sum_rows(w.len(), |i| self.row_pairs(w, i)).scale_log(2.0 * ln_vol);
        let mut exterior = ScaledSum::ZERO;
        for (i, &wi) in w.iter().enumerate() {
            exterior.push_log(self.p * wi.abs().ln() + self.ln_tail[i]);
        }
        (interior, exterior.scale_log(2f64.ln() + ln_vol))
    }

    pub fn energy(&self, w: &[f64]) -> ScaledSum {
        let (a, b) = self.energy_parts(w);
        a + b
    }

    /// Off-diagonal Hessian magnitudes `exp(-ln_scale) * |d^2E/dw_i dw_j|` for `j < i`.
    pub(crate) fn coupling_rows_scaled(&self, w: &[f64], ln_scale: f64) -> Vec<Vec<f64>> {
        let p = self.p;
        let ch = (2.0 * p * (p - 1.0)).ln() + 2.0 * self.domain.cell_volume().ln() - ln_scale;
        map_rows(w.len(), |i| {
            (0..i)
                .map(|j| {
                    let d = w[i] - w[j];
                    let lk = self.ln_kernel(i, j);
                    if d != 0.0 {
                        ((p - 2.0) * d.abs().ln() + lk + ch).exp()
                    } else if p == 2.0 {
                        (lk + ch).exp()
                    } else {
                        0.0
                    }
                })
                .collect()
        })
    }

    /// `exp(-ln_scale) * dE/dw_i` and `exp(-ln_scale) * d^2E/dw_i^2` for every node.
    pub fn gradient_scaled(&self, w: &[f64], ln_scale: f64) -> (Vec<f64>, Vec<f64>) {
        let p = self.p;
        let ln_vol = self.domain.cell_volume().ln();
        let cg = (2.0 * p).ln() + 2.0 * ln_vol - ln_scale;
        let ch = (2.0 * p * (p - 1.0)).ln() + 2.0 * ln_vol - ln_scale;
        let tg = (2.0 * p).ln() + ln_vol - ln_scale;
        let th = (2.0 * p * (p - 1.0)).ln() + ln_vol - ln_scale;
        let rows = map_rows(w.len(), |i| {
            let wi = w[i];
            let (mut g, mut hd) = (0.0, 0.0);
            for (j, &wj) in w.iter().enumerate() {
                if j == i {
                    continue;
                }
                let d = wi - wj;
                let lk = self.ln_kernel(i, j);
                if d == 0.0 {
                    if p == 2.0 {
                        hd += (lk + ch).exp();
                    }
                    continue;
                }
                let ld = d.abs().ln();
                g += signed_pow_scaled(d, (p - 1.0) * ld + lk + cg);
                hd += ((p - 2.0) * ld + lk + ch).exp();
            }
            let lt = self.ln_tail[i];
            if wi != 0.0 {
                let lw = wi.abs().ln();
                g += signed_pow_scaled(wi, (p - 1.0) * lw + lt + tg);
                hd += ((p - 2.0) * lw + lt + th).exp();
            } else if p == 2.0 {
                hd += (lt + th).exp();
            }
            (g, hd)
        });
        rows.into_iter().unzip()
    }
}

// ---------------------------------------------------------------------------
// Standalone evaluations

/// `sum_cells |grad w|^p h^N`.
pub fn local_p_energy(w: &GridFunction, p: f64) -> Result<f64> {
    check_exponent(p)?;
    Ok(LocalStencil::new(w.domain()).energy(w.values(), p).value())
}

/// Discrete Gagliardo energy of the zero extension of `w`, exterior part included.
pub fn gagliardo_energy(w: &GridFunction, t: f64, p: f64) -> Result<f64> {
    Ok(FractionalKernel::new(w.domain(), t, p)?
        .energy(w.values())
        .value())
}

fn constraint_sum(u: &[f64], v: &[f64], alpha: f64, beta: f64, ln_vol: f64) -> ScaledSum {
    let mut acc = ScaledSum::ZERO;
    for (&a, &b) in u.iter().zip(v) {
        acc.push_log(alpha * a.abs().ln() + beta * b.abs().ln());
    }
    acc.scale_log(2f64.ln() + ln_vol)
}

fn check_coupling(alpha: f64, beta: f64) -> Result<()> {
    if !(alpha >= 1.0) {
        return Err(invalid("alpha", format!("must be >= 1, got {alpha}")));
    }
    if !(beta >= 1.0) {
        return Err(invalid("beta", format!("must be >= 1, got {beta}")));
    }
    Ok(())
}

/// `G(u, v) = 2 sum_i |u_i|^alpha |v_i|^beta h^N`.
pub fn constraint_g(u: &GridFunction, v: &GridFunction, alpha: f64, beta: f64) -> Result<f64> {
    check_coupling(alpha, beta)?;
    if !u.same_domain(v) {
        return Err(Error::DomainMismatch);
    }
    Ok(constraint_sum(
        u.values(),
        v.values(),
        alpha,
        beta,
        u.domain().cell_volume().ln(),
    )
    .value())
}

/// All energy terms of the coupled problem on one domain.
#[derive(Debug, Clone)]
pub struct CoupledEnergy {
    domain: Arc<Domain>,
    params: ProblemParams,
    local: LocalStencil,
    frac_u: FractionalKernel,
    frac_v: FractionalKernel,
}

impl CoupledEnergy {
    pub fn new(domain: &Arc<Domain>, params: ProblemParams) -> Result<Self> {
        Ok(Self {
            domain: Arc::clone(domain),
            params,
            local: LocalStencil::new(domain),
            frac_u: FractionalKernel::new(domain, params.r(), params.p())?,
            frac_v: FractionalKernel::new(domain, params.s(), params.p())?,
        })
    }

    pub fn domain(&self) -> &Arc<Domain> {
        &self.domain
    }

    pub fn params(&self) -> &ProblemParams {
        &self.params
    }

    pub fn local(&self) -> &LocalStencil {
        &self.local
    }

    pub fn frac_u(&self) -> &FractionalKernel {
        &self.frac_u
    }

    pub fn frac_v(&self) -> &FractionalKernel {
        &self.frac_v
    }

    /// The four energies `(local_u, frac_u, local_v, frac_v)`.
    pub fn parts(&self, u: &[f64], v: &[f64]) -> [ScaledSum; 4] {
        let p = self.params.p();
        [
            self.local.energy(u, p),
            self.frac_u.energy(u),
            self.local.energy(v, p),
            self.frac_v.energy(v),
        ]
    }

    pub fn ln_i(&self, u: &[f64], v: &[f64]) -> f64 {
        self.parts(u, v).into_iter().sum::<ScaledSum>().ln()
    }

    pub fn ln_g(&self, u: &[f64], v: &[f64]) -> f64 {
        constraint_sum(
            u,
            v,
            self.params.alpha(),
            self.params.beta(),
            self.domain.cell_volume().ln(),
        )
        .ln()
    }

    pub fn breakdown(&self, u: &[f64], v: &[f64]) -> Result<EnergyBreakdown> {
        let parts = self.parts(u, v);
        let ln_g = self.ln_g(u, v);
        if ln_g == f64::NEG_INFINITY {
            return Err(Error::DegenerateConstraint);
        }
        let ln_numerator = parts.iter().copied().sum::<ScaledSum>().ln();
        let ln_j = ln_numerator - ln_g;
        Ok(EnergyBreakdown {
            local_u: parts[0].value(),
            frac_u: parts[1].value(),
            local_v: parts[2].value(),
            frac_v: parts[3].value(),
            constraint_g: ln_g.exp(),
            j: ln_j.exp(),
            ln_numerator,
            ln_g,
            ln_j,
        })
    }

    /// `exp(-ln_scale) * grad I` as `(d/du, d/dv)`.
    pub fn grad_i_scaled(&self, u: &[f64], v: &[f64], ln_scale: f64) -> (Vec<f64>, Vec<f64>) {
        self.grad_i_with_diag(u, v, ln_scale).0
    }

    /// Scaled gradient of `I` together with the diagonal of the scaled
    /// Hessian of the two nonlocal energies.
    #[allow(clippy::type_complexity)]
    pub(crate) fn grad_i_with_diag(
        &self,
        u: &[f64],
        v: &[f64],
        ln_scale: f64,
    ) -> ((Vec<f64>, Vec<f64>), (Vec<f64>, Vec<f64>)) {
        let p = self.params.p();
        let (mut gu, du) = self.frac_u.gradient_scaled(u, ln_scale);
        let (mut gv, dv) = self.frac_v.gradient_scaled(v, ln_scale);
        self.local.add_gradient_scaled(u, p, ln_scale, &mut gu);
        self.local.add_gradient_scaled(v, p, ln_scale, &mut gv);
        ((gu, gv), (du, dv))
    }

    /// `exp(-ln_scale) * grad G` as `(d/du, d/dv)`.
    pub fn grad_g_scaled(&self, u: &[f64], v: &[f64], ln_scale: f64) -> (Vec<f64>, Vec<f64>) {
        let (a, b) = (self.params.alpha(), self.params.beta());
        let c = 2f64.ln() + self.domain.cell_volume().ln() - ln_scale;
        let (ca, cb) = (a.ln() + c, b.ln() + c);
        u.iter()
            .zip(v)
            .map(|(&x, &y)| {
                let (lx, ly) = (x.abs().ln(), y.abs().ln());
                (
                    signed_pow_scaled(x, (a - 1.0) * lx + b * ly + ca),
                    signed_pow_scaled(y, a * lx + (b - 1.0) * ly + cb),
                )
            })
            .unzip()
    }
}

fn check_pair(u: &GridFunction, v: &GridFunction) -> Result<()> {
    if u.same_domain(v) {
        Ok(())
    } else {
        Err(Error::DomainMismatch)
    }
}

/// Energy breakdown and Rayleigh quotient `J = I / G`.
pub fn rayleigh_jp(
    u: &GridFunction,
    v: &GridFunction,
    params: &ProblemParams,
) -> Result<EnergyBreakdown> {
    check_pair(u, v)?;
    CoupledEnergy::new(u.domain(), *params)?.breakdown(u.values(), v.values())
}

fn gradient_exponent(params: &ProblemParams) -> Result<()> {
    if params.p() < 2.0 {
        return Err(invalid("p", "gradients require p >= 2"));
    }
    Ok(())
}

/// First variation of `I` with respect to the nodal values of `u` and `v`.
pub fn grad_i(
    u: &GridFunction,
    v: &GridFunction,
    params: &ProblemParams,
) -> Result<(GridFunction, GridFunction)> {
    check_pair(u, v)?;
    gradient_exponent(params)?;
    let e = CoupledEnergy::new(u.domain(), *params)?;
    let (gu, gv) = e.grad_i_scaled(u.values(), v.values(), 0.0);
    Ok((
        GridFunction::from_raw(u.domain(), gu),
        GridFunction::from_raw(u.domain(), gv),
    ))
}

/// First variation of `G` with respect to the nodal values of `u` and `v`.
pub fn grad_g(
    u: &GridFunction,
    v: &GridFunction,
    params: &ProblemParams,
) -> Result<(GridFunction, GridFunction)> {
    check_pair(u, v)?;
    gradient_exponent(params)?;
    let e = CoupledEnergy::new(u.domain(), *params)?;
    let (gu, gv) = e.grad_g_scaled(u.values(), v.values(), 0.0);
    Ok((
        GridFunction::from_raw(u.domain(), gu),
        GridFunction::from_raw(u.domain(), gv),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_disk, build_interval, build_rectangle, normalized_cone};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn hat(d: &Arc<Domain>) -> GridFunction {
        GridFunction::from_fn(d, |x| 1.0 - (x[0] - 1.0).abs())
    }

    /// Composite midpoint value of `∫∫_{Ω×Ω} + 2∫_Ω |w|^p T` on `(a, b)`.
    fn midpoint_gagliardo(w: impl Fn(f64) -> f64, a: f64, b: f64, t: f64, p: f64, m: usize) -> f64 {
        let h = (b - a) / m as f64;
        let xs: Vec<f64> = (0..m).map(|k| a + (k as f64 + 0.5) * h).collect();
        let mut inner = 0.0;
        for (i, &x) in xs.iter().enumerate() {
            for (j, &y) in xs.iter().enumerate() {
                if i != j {
                    inner += (w(x) - w(y)).abs().powf(p) / (x - y).abs().powf(1.0 + t * p) * h * h;
                }
            }
        }
        let tp = t * p;
        let tail: f64 = xs
            .iter()
            .map(|&x| w(x).abs().powf(p) * ((x - a).powf(-tp) + (b - x).powf(-tp)) / tp * h)
            .sum();
        inner + 2.0 * tail
    }

    #[test]
    fn local_energy_examples() {
        let d = build_interval(0.0, 2.0, 199).unwrap();
        assert!((local_p_energy(&hat(&d), 3.0).unwrap() - 2.0).abs() < 1e-12);
        let unit = build_interval(0.0, 1.0, 99).unwrap();
        let tent = GridFunction::from_fn(&unit, |x| x[0].min(1.0 - x[0]));
        assert!((local_p_energy(&tent, 4.0).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(local_p_energy(&GridFunction::zeros(&d), 4.0).unwrap(), 0.0);
        assert!(local_p_energy(&tent, 0.5).is_err());
    }

    #[test]
    fn local_energy_two_dimensional() {
        let d = build_rectangle(0.0, 0.0, 1.0, 2.0, 30, 45).unwrap();
        let w = GridFunction::from_fn(&d, |x| x[0] * (1.0 - x[0]) * (1.0 + x[1]));
        // zero-padded lattice, every cell with a node at one of its three points
        let [nx, ny] = d.lattice_dims();
        let [hx, hy] = d.spacings();
        let at = |i: isize, j: isize| d.node_at(i, j).map_or(0.0, |k| w.values()[k]);
        let mut oracle = 0.0;
        for j in -1..ny as isize {
            for i in -1..nx as isize {
                let gx = (at(i + 1, j) - at(i, j)) / hx;
                let gy = (at(i, j + 1) - at(i, j)) / hy;
                oracle += (gx * gx + gy * gy).powf(1.5) * hx * hy;
            }
        }
        let e = local_p_energy(&w, 3.0).unwrap();
        assert!((e / oracle - 1.0).abs() < 1e-12, "{e} {oracle}");

        let s = build_rectangle(0.0, 0.0, 1.0, 1.0, 199, 199).unwrap();
        let f = GridFunction::from_fn(&s, |x| (PI * x[0]).sin() * (PI * x[1]).sin());
        let e = local_p_energy(&f, 2.0).unwrap();
        assert!((e / (PI * PI / 2.0) - 1.0).abs() < 0.02, "{e}");
    }

    #[test]
    fn gagliardo_hat_against_midpoint_oracle() {
        let (t, p) = (0.5, 2.0);
        let e200 = gagliardo_energy(&hat(&build_interval(0.0, 2.0, 200).unwrap()), t, p).unwrap();
        let e400 = gagliardo_energy(&hat(&build_interval(0.0, 2.0, 400).unwrap()), t, p).unwrap();
        assert!((e200 / e400 - 1.0).abs() < 0.02, "{e200} {e400}");
        let f = |x: f64| 1.0 - (x - 1.0).abs();
        let o1 = midpoint_gagliardo(f, 0.0, 2.0, t, p, 1500);
        let o2 = midpoint_gagliardo(f, 0.0, 2.0, t, p, 3000);
        assert!((o1 / o2 - 1.0).abs() < 0.01, "oracle levels {o1} {o2}");
        assert!((e400 / o2 - 1.0).abs() < 0.05, "{e400} vs {o2}");
    }

    #[test]
    fn gagliardo_zero_and_even() {
        let d = build_interval(-1.0, 1.0, 60).unwrap();
        assert_eq!(
            gagliardo_energy(&GridFunction::zeros(&d), 0.4, 3.0).unwrap(),
            0.0
        );
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..5 {
            let w = GridFunction::new(
                &d,
                (0..d.len()).map(|_| rng.random::<f64>() - 0.5).collect(),
            )
            .unwrap();
            let a = gagliardo_energy(&w, 0.4, 3.0).unwrap();
            let b = gagliardo_energy(&w.scaled(-1.0), 0.4, 3.0).unwrap();
            assert_eq!(a, b);
        }
        assert!(gagliardo_energy(&GridFunction::zeros(&d), 1.0, 3.0).is_err());
        assert!(gagliardo_energy(&GridFunction::zeros(&d), 0.5, 0.5).is_err());
    }

    #[test]
    fn absolute_value_lowers_gagliardo_energy() {
        let d = build_interval(0.0, 1.0, 80).unwrap();
        let w = GridFunction::from_fn(&d, |x| (3.0 * std::f64::consts::PI * x[0]).sin());
        for p in [2.0, 5.0] {
            let a = gagliardo_energy(&w.abs(), 0.3, p).unwrap();
            let b = gagliardo_energy(&w, 0.3, p).unwrap();
            assert!(a < b);
        }
    }

    #[test]
    fn constraint_examples() {
        let d = build_interval(0.0, 1.0, 99).unwrap();
        let one = GridFunction::from_fn(&d, |_| 1.0);
        let g = constraint_g(&one, &one, 1.0, 1.0).unwrap();
        assert!((g - 2.0).abs() <= 2.0 * d.spacing() + 1e-12);
        let u = GridFunction::from_fn(&d, |x| x[0]);
        let v = GridFunction::from_fn(&d, |x| 1.0 - x[0] * x[0]);
        let g1 = constraint_g(&u, &v, 1.5, 2.5).unwrap();
        let g2 = constraint_g(&u.scaled(2.0), &v.scaled(2.0), 1.5, 2.5).unwrap();
        assert!((g2 / g1 - 16.0).abs() < 1e-12);
        assert_eq!(
            constraint_g(&GridFunction::zeros(&d), &v, 2.0, 2.0).unwrap(),
            0.0
        );
        let other = build_interval(0.0, 2.0, 99).unwrap();
        assert!(matches!(
            constraint_g(&u, &GridFunction::zeros(&other), 2.0, 2.0),
            Err(Error::DomainMismatch)
        ));
    }

    #[test]
    fn rayleigh_cone_against_quadrature() {
        let d = build_interval(0.0, 2.0, 400).unwrap();
        let params = ProblemParams::new(4.0, 0.5, 0.5, 2.0, 2.0, 0.5).unwrap();
        let c = normalized_cone(&d);
        let b = rayleigh_jp(&c, &c, &params).unwrap();
        let f = |x: f64| 1.0 - (x - 1.0).abs();
        let frac = midpoint_gagliardo(f, 0.0, 2.0, 0.5, 4.0, 2000);
        // ∫|d'|^4 = 2 and 2∫ d^4 = 4/5 for each function
        let oracle = (2.0 * 2.0 + 2.0 * frac) / 0.8;
        assert!(b.j.is_finite() && b.j > 0.0);
        assert!((b.j / oracle - 1.0).abs() < 0.05, "{} vs {oracle}", b.j);
        let sum = b.local_u + b.frac_u + b.local_v + b.frac_v;
        assert!((b.j - sum / b.constraint_g).abs() < 1e-12 * b.j);
        let b3 = rayleigh_jp(&c.scaled(3.0), &c.scaled(3.0), &params).unwrap();
        assert!((b3.j / b.j - 1.0).abs() < 1e-12);
        assert!(matches!(
            rayleigh_jp(&GridFunction::zeros(&d), &c, &params),
            Err(Error::DegenerateConstraint)
        ));
    }

    fn sample_pair(d: &Arc<Domain>, seed: u64) -> (GridFunction, GridFunction) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (a, b, c) = (
            rng.random::<f64>(),
            rng.random::<f64>(),
            rng.random::<f64>(),
        );
        let u = GridFunction::from_fn(d, |x| {
            (1.0 + a * x[0]) * (std::f64::consts::PI * x[0] / 2.0).sin()
        });
        let v = GridFunction::from_fn(d, |x| {
            (b + x[0] * (2.0 - x[0])) * (1.0 + c * (3.0 * x[0]).cos()) * x[0] * (2.0 - x[0])
        });
        (u, v)
    }

    #[test]
    fn homogeneity_of_every_component() {
        let d = build_interval(0.0, 2.0, 50).unwrap();
        let (u, v) = sample_pair(&d, 1);
        let params = ProblemParams::new(5.0, 0.3, 0.7, 2.0, 3.0, 0.4).unwrap();
        let b = rayleigh_jp(&u, &v, &params).unwrap();
        for t in [-2.0f64, 0.5] {
            let bt = rayleigh_jp(&u.scaled(t), &v.scaled(t), &params).unwrap();
            let f = t.abs().powf(5.0);
            for (x, y) in [
                (bt.local_u, b.local_u),
                (bt.frac_u, b.frac_u),
                (bt.local_v, b.local_v),
                (bt.frac_v, b.frac_v),
                (bt.constraint_g, b.constraint_g),
            ] {
                assert!(x >= 0.0);
                assert!((x / (f * y) - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn euler_identity_and_finite_differences() {
        for (d, seed) in [
            (build_interval(0.0, 2.0, 40).unwrap(), 4),
            (build_rectangle(0.0, 0.0, 2.0, 1.0, 9, 7).unwrap(), 5),
        ] {
            let (u, v) = sample_pair(&d, seed);
            let params = ProblemParams::new(3.5, 0.4, 0.6, 1.5, 2.0, 0.5).unwrap();
            let e = CoupledEnergy::new(&d, params).unwrap();
            let i = e.ln_i(u.values(), v.values()).exp();
            let (gu, gv) = grad_i(&u, &v, &params).unwrap();
            let dot: f64 = gu
                .values()
                .iter()
                .zip(u.values())
                .chain(gv.values().iter().zip(v.values()))
                .map(|(a, b)| a * b)
                .sum();
            assert!((dot / (3.5 * i) - 1.0).abs() < 1e-8, "{dot} {i}");

            let g = e.ln_g(u.values(), v.values()).exp();
            let (hu, hv) = grad_g(&u, &v, &params).unwrap();
            let dot: f64 = hu
                .values()
                .iter()
                .zip(u.values())
                .chain(hv.values().iter().zip(v.values()))
                .map(|(a, b)| a * b)
                .sum();
            assert!((dot / (3.5 * g) - 1.0).abs() < 1e-10);

            let phi: Vec<f64> = d
                .nodes()
                .iter()
                .map(|x| (x[0] + 0.3 * x[1]).cos())
                .collect();
            let eps = 1e-6 * u.sup_norm();
            let shifted = |s: f64| -> Vec<f64> {
                u.values()
                    .iter()
                    .zip(&phi)
                    .map(|(a, b)| a + s * b)
                    .collect()
            };
            let fd = (e.ln_i(&shifted(eps), v.values()).exp()
                - e.ln_i(&shifted(-eps), v.values()).exp())
                / (2.0 * eps);
            let an: f64 = gu.values().iter().zip(&phi).map(|(a, b)| a * b).sum();
            assert!((fd / an - 1.0).abs() < 1e-5, "{fd} {an}");
            let fd = (e.ln_g(&shifted(eps), v.values()).exp()
                - e.ln_g(&shifted(-eps), v.values()).exp())
                / (2.0 * eps);
            let an: f64 = hu.values().iter().zip(&phi).map(|(a, b)| a * b).sum();
            assert!((fd / an - 1.0).abs() < 1e-5, "{fd} {an}");
        }
    }

    #[test]
    fn gradient_of_g_vanishes_with_u() {
        let d = build_interval(0.0, 1.0, 20).unwrap();
        let params = ProblemParams::new(4.0, 0.5, 0.5, 2.0, 2.0, 0.5).unwrap();
        let z = GridFunction::zeros(&d);
        let v = normalized_cone(&d);
        let (a, b) = grad_g(&z, &v, &params).unwrap();
        assert!(a.values().iter().chain(b.values()).all(|&x| x == 0.0));
        let low = ProblemParams::new(2.0, 0.5, 0.5, 1.0, 1.0, 0.5).unwrap();
        assert!(grad_i(&v, &v, &low).is_ok());
    }

    fn bumps(d: &Arc<Domain>) -> Vec<GridFunction> {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        (0..20)
            .map(|k| {
                let c = 0.25 + 0.5 * rng.random::<f64>();
                let w = 0.1 + 0.15 * rng.random::<f64>();
                let a = 0.5 + rng.random::<f64>();
                GridFunction::from_fn(d, move |x| {
                    let r = ((x[0] - c) / w).abs();
                    if k % 2 == 0 {
                        a * (1.0 - r).max(0.0)
                    } else if r < 1.0 {
                        a * (1.0 - r * r).powi(2)
                    } else {
                        0.0
                    }
                })
            })
            .collect()
    }

    #[test]
    fn fractional_over_local_ratio_stays_bounded() {
        let d = build_interval(0.0, 1.0, 120).unwrap();
        for s in [0.25, 0.75] {
            let mut ratios = Vec::new();
            for w in bumps(&d) {
                for p in [2.0, 4.0, 8.0, 16.0, 32.0] {
                    let k = FractionalKernel::new(&d, s, p).unwrap();
                    let f = k.energy(w.values()).ln() / p;
                    let l = LocalStencil::new(&d).energy(w.values(), p).ln() / p;
                    ratios.push((f - l).exp());
                }
            }
            let max = ratios.iter().cloned().fold(0.0, f64::max);
            assert!(ratios.iter().all(|r| r.is_finite() && *r > 0.0));
            assert!(max < 10.0, "s={s}: {max}");
        }
    }

    #[test]
    fn large_p_root_approaches_holder_quotient() {
        let d = build_interval(0.0, 1.0, 200).unwrap();
        let t = 0.5;
        for (k, w) in bumps(&d).into_iter().enumerate() {
            // Hats peak at a corner of the quotient, which costs an extra
            // factor p^{-1/p}; they get a larger exponent.
            let p = if k % 2 == 0 { 256.0 } else { 128.0 };
            let root = (FractionalKernel::new(&d, t, p)
                .unwrap()
                .energy(w.values())
                .ln()
                / p)
                .exp();
            let vals = w.values();
            let mut sup = 0.0f64;
            for i in 0..vals.len() {
                sup = sup.max(vals[i].abs() / d.boundary_distance()[i].powf(t));
                for j in 0..i {
                    sup = sup.max((vals[i] - vals[j]).abs() / d.distance(i, j).powf(t));
                }
            }
            assert!((root / sup - 1.0).abs() < 0.05, "{k}: {root} {sup}");
        }
    }

    #[test]
    fn large_exponents_stay_finite() {
        let d = build_interval(0.0, 2.0, 100).unwrap();
        let c = normalized_cone(&d);
        let params = ProblemParams::with_gamma(128.0, 0.25, 0.75, 0.5).unwrap();
        let b = rayleigh_jp(&c, &c, &params).unwrap();
        assert!(b.ln_j.is_finite());
        assert!(b.constraint_g > 0.0);
        let (gu, _) = grad_i(&c, &c, &params).unwrap();
        assert!(gu.values().iter().all(|x| x.is_finite()));
    }

    #[test]
    fn tail_one_dimensional_closed_form() {
        let d = build_interval(0.0, 2.0, 10).unwrap();
        let l = exterior_tail_ln(&d, [0.5, 0.0], 1.5);
        let exact = (0.5f64.powf(-1.5) + 1.5f64.powf(-1.5)) / 1.5;
        assert!((l.exp() / exact - 1.0).abs() < 1e-14);
    }

    #[test]
    fn tail_at_disk_center() {
        let d = build_disk([0.0, 0.0], 1.5, 31).unwrap();
        for tp in [0.5, 3.0, 40.0] {
            let l = exterior_tail_ln(&d, [0.0, 0.0], tp);
            let exact = (2.0 * PI).ln() - tp * 1.5f64.ln() - tp.ln();
            assert!((l - exact).abs() < 1e-10, "{tp}");
        }
    }

    #[test]
    fn tail_in_square_against_cartesian_oracle() {
        let d = build_rectangle(0.0, 0.0, 1.0, 1.0, 9, 9).unwrap();
        let x = [0.3, 0.4];
        let tp = 1.5;
        let delta = 0.3;
        // T = ∫_{|y-x|>δ} - ∫_{Ω, |y-x|>δ}
        let m = 2000;
        let h = 1.0 / m as f64;
        let mut inside = 0.0;
        for i in 0..m {
            for j in 0..m {
                let y = [(i as f64 + 0.5) * h, (j as f64 + 0.5) * h];
                let r = (y[0] - x[0]).hypot(y[1] - x[1]);
                if r > delta {
                    inside += r.powf(-2.0 - tp) * h * h;
                }
            }
        }
        let oracle = 2.0 * PI * delta.powf(-tp) / tp - inside;
        let got = exterior_tail_ln(&d, x, tp).exp();
        assert!((got / oracle - 1.0).abs() < 0.01, "{got} {oracle}");
    }

    #[test]
    fn parameter_validation() {
        assert!(ProblemParams::new(4.0, 0.5, 0.5, 2.0, 2.5, 0.5).is_err());
        assert!(ProblemParams::new(1.5, 0.5, 0.5, 0.75, 0.75, 0.5).is_err());
        assert!(ProblemParams::new(4.0, 1.0, 0.5, 2.0, 2.0, 0.5).is_err());
        assert!(ProblemParams::new(4.0, 0.5, 0.5, 0.5, 3.5, 0.5).is_err());
        let p = ProblemParams::with_gamma(7.0, 0.5, 0.5, 0.3).unwrap();
        assert_eq!(p.alpha() + p.beta(), 7.0);
        assert_eq!(p.alpha(), 2.0);
        assert_eq!(schedule_alpha(0.99, 4.0), 3.0);
    }
}
