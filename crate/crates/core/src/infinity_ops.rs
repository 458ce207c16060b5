//! Hölder ∞-Laplacians, the ∞-Laplacian and residuals of the limit system.

use crate::asymptotics::{lambda_infinity, LimitParams};
use crate::energy::exterior_tail_ln;
use crate::error::{invalid, Error, Result};
use crate::geometry::{GridFunction, Point};
use crate::parallel::map_rows;
use crate::scaled::ScaledSum;

/// Relative jump of one-sided differences (against the largest difference on
/// the grid) above which a node is treated as a kink.
const KINK_JUMP: f64 = 0.25;

fn check_order(t: f64) -> Result<()> {
    if t > 0.0 && t < 1.0 {
        Ok(())
    } else {
        Err(invalid("t", format!("must lie in (0, 1), got {t}")))
    }
}

fn check_node(phi: &GridFunction, x: usize) -> Result<()> {
    if x < phi.len() {
        Ok(())
    } else {
        Err(Error::NodeOutOfRange {
            index: x,
            len: phi.len(),
        })
    }
}

/// `(L^+, L^-)` at node `x`: extreme difference quotients
/// `(φ(x) - φ(y)) / |x - y|^t` over nodes `y != x` and over the exterior,
/// where `φ = 0` and the nearest boundary point gives the extreme value.
pub fn l_infinity_pm(phi: &GridFunction, x: usize, t: f64) -> Result<(f64, f64)> {
    check_order(t)?;
    check_node(phi, x)?;
    let domain = phi.domain();
    let vals = phi.values();
    let fx = vals[x];
    let (mut hi, mut lo) = (f64::NEG_INFINITY, f64::INFINITY);
    for (y, &fy) in vals.iter().enumerate() {
        if y != x {
            let q = (fx - fy) / domain.distance(x, y).powf(t);
            hi = hi.max(q);
            lo = lo.min(q);
        }
    }
    let ext = fx / domain.boundary_distance()[x].powf(t);
    let plus = hi.max(if fx >= 0.0 { ext } else { 0.0 });
    let minus = lo.min(if fx <= 0.0 { ext } else { 0.0 });
    Ok((plus, minus))
}

/// `p`-level counterparts of [`l_infinity_pm`]:
/// `(2 ∫ ((φ(x) - φ(y))^±)^{p-1} |x - y|^{-N-tp} dy)^{1/(p-1)}`,
/// with nodal quadrature inside the domain and the exact exterior kernel mass
/// outside. Both returned roots are nonnegative; the second one measures the
/// negative part.
pub fn discrete_lp_pm(phi: &GridFunction, x: usize, t: f64, p: f64) -> Result<(f64, f64)> {
    check_order(t)?;
    check_node(phi, x)?;
    if !(p > 1.0 && p.is_finite()) {
        return Err(invalid("p", format!("must be finite and > 1, got {p}")));
    }
    let domain = phi.domain();
    let dim = domain.dim();
    if t * p <= dim as f64 {
        return Err(Error::TailDivergence { tp: t * p, dim });
    }
    let vals = phi.values();
    let fx = vals[x];
    let expo = dim as f64 + t * p;
    let ln_vol = domain.cell_volume().ln();
    let (mut plus, mut minus) = (ScaledSum::ZERO, ScaledSum::ZERO);
    for (y, &fy) in vals.iter().enumerate() {
        let d = fx - fy;
        if y == x || d == 0.0 {
            continue;
        }
        let l = (p - 1.0) * d.abs().ln() - expo * domain.distance(x, y).ln() + ln_vol;
        if d > 0.0 {
            plus.push_log(l);
        } else {
            minus.push_log(l);
        }
    }
    if fx != 0.0 {
        let l = (p - 1.0) * fx.abs().ln() + exterior_tail_ln(domain, domain.node(x), t * p);
        if fx > 0.0 {
            plus.push_log(l);
        } else {
            minus.push_log(l);
        }
    }
    let root = |s: ScaledSum| {
        if s.is_zero() {
            0.0
        } else {
            ((2f64.ln() + s.ln()) / (p - 1.0)).exp()
        }
    };
    Ok((root(plus), root(minus)))
}

/// First and second derivative along one lattice axis from the values at
/// offsets `-2..=2`; `None` for unavailable nodes. The flag reports a
/// one-sided stencil.
fn axis_derivatives(at: impl Fn(isize) -> Option<f64>, h: f64) -> Option<(f64, f64, bool)> {
    let c = at(0)?;
    match (at(-1), at(1)) {
        (Some(m), Some(p)) => Some(((p - m) / (2.0 * h), (p - 2.0 * c + m) / (h * h), false)),
        (None, Some(p1)) => {
            let p2 = at(2)?;
            Some((
                (-3.0 * c + 4.0 * p1 - p2) / (2.0 * h),
                (c - 2.0 * p1 + p2) / (h * h),
                true,
            ))
        }
        (Some(m1), None) => {
            let m2 = at(-2)?;
            Some((
                (3.0 * c - 4.0 * m1 + m2) / (2.0 * h),
                (c - 2.0 * m1 + m2) / (h * h),
                true,
            ))
        }
        (None, None) => None,
    }
}

/// Gradient, `Δ_∞ φ = <D²φ ∇φ, ∇φ>` and the one-sided flag at node `x`.
fn derivatives(phi: &GridFunction, x: usize) -> Result<([f64; 2], f64, bool)> {
    let domain = phi.domain();
    let vals = phi.values();
    let [hx, hy] = domain.spacings();
    let [i, j] = domain.lattice_index(x);
    let (i, j) = (i as isize, j as isize);
    let val = |a: isize, b: isize| domain.node_at(a, b).map(|k| vals[k]);
    let thin = || Error::InvalidDomain(format!("node {x} has no usable difference stencil"));
    let (gx, gxx, ox) = axis_derivatives(|o| val(i + o, j), hx).ok_or_else(thin)?;
    if domain.dim() == 1 {
        return Ok(([gx, 0.0], gxx * gx * gx, ox));
    }
    let (gy, gyy, oy) = axis_derivatives(|o| val(i, j + o), hy).ok_or_else(thin)?;
    let dx_at = |o: isize| axis_derivatives(|q| val(i + q, j + o), hx).map(|d| d.0);
    let (gxy, _, oxy) =
        axis_derivatives(|o| if o == 0 { Some(gx) } else { dx_at(o) }, hy).ok_or_else(thin)?;
    let lap = gxx * gx * gx + 2.0 * gxy * gx * gy + gyy * gy * gy;
    Ok(([gx, gy], lap, ox || oy || oxy))
}

/// `Δ_∞ φ(x)` and whether a one-sided (first-order) stencil was needed.
pub fn infinity_laplacian(phi: &GridFunction, x: usize) -> Result<(f64, bool)> {
    check_node(phi, x)?;
    let (_, lap, one_sided) = derivatives(phi, x)?;
    Ok((lap, one_sided))
}

/// Classification of a node for the residual report.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeFlag {
    Interior,
    /// One-sided differences were used.
    Boundary,
    /// Kink of the candidate: `Δ_∞` is not evaluated.
    Vertex,
}

impl NodeFlag {
    pub fn as_str(&self) -> &'static str {
        match self {
            NodeFlag::Interior => "interior",
            NodeFlag::Boundary => "boundary",
            NodeFlag::Vertex => "vertex",
        }
    }
}

/// Pointwise data of one function at one node for a given order `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointEval {
    pub location: Point,
    pub gradient: [f64; 2],
    pub inf_laplacian: f64,
    pub l_plus: f64,
    pub l_minus: f64,
    pub flag: NodeFlag,
}

/// Largest one-sided difference on the grid, used to scale kink detection.
fn difference_scale(phi: &GridFunction) -> f64 {
    let domain = phi.domain();
    let vals = phi.values();
    let [hx, hy] = domain.spacings();
    let mut m = 0.0f64;
    for (k, &v) in vals.iter().enumerate() {
        let [i, j] = domain.lattice_index(k);
        if let Some(e) = domain.node_at(i as isize + 1, j as isize) {
            m = m.max((vals[e] - v).abs() / hx);
        }
        if let Some(e) = domain.node_at(i as isize, j as isize + 1) {
            m = m.max((vals[e] - v).abs() / hy);
        }
    }
    m
}

fn is_kink(phi: &GridFunction, x: usize, scale: f64) -> bool {
    let domain = phi.domain();
    let vals = phi.values();
    let [hx, hy] = domain.spacings();
    let [i, j] = domain.lattice_index(x);
    let (i, j) = (i as isize, j as isize);
    let jump = |prev: Option<usize>, next: Option<usize>, h: f64| match (prev, next) {
        (Some(a), Some(b)) => {
            let dm = (vals[x] - vals[a]) / h;
            let dp = (vals[b] - vals[x]) / h;
            (dp - dm).abs() > KINK_JUMP * scale
        }
        _ => false,
    };
    jump(domain.node_at(i - 1, j), domain.node_at(i + 1, j), hx)
        || (domain.dim() == 2 && jump(domain.node_at(i, j - 1), domain.node_at(i, j + 1), hy))
}

/// Evaluates every operator of the limit system for `phi` at node `x`.
pub fn point_eval(phi: &GridFunction, x: usize, t: f64) -> Result<PointEval> {
    let scale = difference_scale(phi);
    point_eval_scaled(phi, x, t, scale)
}

fn point_eval_scaled(phi: &GridFunction, x: usize, t: f64, scale: f64) -> Result<PointEval> {
    let (l_plus, l_minus) = l_infinity_pm(phi, x, t)?;
    let (gradient, lap, one_sided) = derivatives(phi, x)?;
    let flag = if scale > 0.0 && is_kink(phi, x, scale) {
        NodeFlag::Vertex
    } else if one_sided {
        NodeFlag::Boundary
    } else {
        NodeFlag::Interior
    };
    Ok(PointEval {
        location: phi.domain().node(x),
        gradient,
        inf_laplacian: if flag == NodeFlag::Vertex {
            f64::NAN
        } else {
            lap
        },
        l_plus,
        l_minus,
        flag,
    })
}

/// `(G_1, G_2)` for one equation. At vertices `-Δ_∞` is left out of `G_2`.
fn g_pair(e: &PointEval, source: f64) -> (f64, f64) {
    let grad = e.gradient[0].hypot(e.gradient[1]);
    let g1 = (e.l_plus + e.l_minus)
        .min(e.l_plus - source)
        .min(e.l_plus - grad);
    let mut g2 = (grad - source).min(grad + e.l_minus).min(grad - e.l_plus);
    if e.flag != NodeFlag::Vertex {
        g2 = g2.min(-e.inf_laplacian);
    }
    (g1, g2)
}

/// Residuals at one node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeResidual {
    pub node: usize,
    pub location: Point,
    pub g1_r: f64,
    pub g2_r: f64,
    pub g1_s: f64,
    pub g2_s: f64,
    pub flag: NodeFlag,
}

impl NodeResidual {
    /// `max(|max(G1_r, G2_r)|, |max(G1_s, G2_s)|)`.
    pub fn defect(&self) -> f64 {
        self.g1_r
            .max(self.g2_r)
            .abs()
            .max(self.g1_s.max(self.g2_s).abs())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResidualReport {
    pub lambda_inf: f64,
    pub nodes: Vec<NodeResidual>,
    /// Largest `|max(G1, G2)|` over nodes not flagged as vertices.
    pub max_abs: f64,
    /// Largest and smallest `max(G1, G2)` over the same nodes.
    pub max_value: f64,
    pub min_value: f64,
}

/// Evaluates both equations of the limit system at `nodes` (all nodes when
/// `None`): `G^r[u, v]` for the first and `G^s[v, u]` for the second.
pub fn residuals_limit_system(
    u: &GridFunction,
    v: &GridFunction,
    lp: &LimitParams,
    nodes: Option<&[usize]>,
) -> Result<ResidualReport> {
    if !u.same_domain(v) {
        return Err(Error::DomainMismatch);
    }
    if u.values().iter().chain(v.values()).any(|&x| x < 0.0) {
        return Err(invalid(
            "u",
            "the limit system is posed for nonnegative pairs",
        ));
    }
    let lambda_inf = lambda_infinity(lp)?;
    let all: Vec<usize>;
    let nodes = match nodes {
        Some(n) => n,
        None => {
            all = (0..u.len()).collect();
            &all
        }
    };
    let (su, sv) = (difference_scale(u), difference_scale(v));
    let g = lp.gamma;
    let rows = map_rows(nodes.len(), |k| -> Result<NodeResidual> {
        let x = nodes[k];
        check_node(u, x)?;
        let eu = point_eval_scaled(u, x, lp.r, su)?;
        let ev = point_eval_scaled(v, x, lp.s, sv)?;
        let (a, b) = (u.values()[x], v.values()[x]);
        let mix = |p: f64, q: f64| lambda_inf * (g * p.ln() + (1.0 - g) * q.ln()).exp();
        let (g1_r, g2_r) = g_pair(&eu, mix(a, b));
        let (g1_s, g2_s) = g_pair(&ev, mix(b, a));
        let flag = if eu.flag == NodeFlag::Vertex || ev.flag == NodeFlag::Vertex {
            NodeFlag::Vertex
        } else if eu.flag == NodeFlag::Boundary || ev.flag == NodeFlag::Boundary {
            NodeFlag::Boundary
        } else {
            NodeFlag::Interior
        };
        Ok(NodeResidual {
            node: x,
            location: eu.location,
            g1_r,
            g2_r,
            g1_s,
            g2_s,
            flag,
        })
    });
    let nodes = rows.into_iter().collect::<Result<Vec<_>>>()?;
    let mut max_abs = 0.0f64;
    let (mut max_value, mut min_value) = (f64::NEG_INFINITY, f64::INFINITY);
    for n in nodes.iter().filter(|n| n.flag != NodeFlag::Vertex) {
        max_abs = max_abs.max(n.defect());
        for m in [n.g1_r.max(n.g2_r), n.g1_s.max(n.g2_s)] {
            max_value = max_value.max(m);
            min_value = min_value.min(m);
        }
    }
    Ok(ResidualReport {
        lambda_inf,
        nodes,
        max_abs,
        max_value,
        min_value,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_disk, build_interval, normalized_cone};
    use std::f64::consts::PI;

    #[test]
    fn cone_at_center() {
        let d = build_interval(0.0, 4.0, 399).unwrap();
        let c = normalized_cone(&d);
        let mid = 199;
        assert!((d.node(mid)[0] - 2.0).abs() < 1e-12);
        let (lp, lm) = l_infinity_pm(&c, mid, 0.5).unwrap();
        assert!((lp - 2f64.powf(-0.5)).abs() < 1e-12, "{lp}");
        assert!(lm.abs() < 1e-15);
    }

    #[test]
    fn zero_function() {
        let d = build_interval(0.0, 1.0, 50).unwrap();
        let z = GridFunction::zeros(&d);
        assert_eq!(l_infinity_pm(&z, 10, 0.3).unwrap(), (0.0, 0.0));
        assert_eq!(discrete_lp_pm(&z, 10, 0.3, 20.0).unwrap(), (0.0, 0.0));
        assert!(matches!(
            discrete_lp_pm(&z, 10, 0.3, 3.0),
            Err(Error::TailDivergence { .. })
        ));
        assert!(l_infinity_pm(&z, 50, 0.3).is_err());
    }

    #[test]
    fn quadratic_and_affine() {
        let d = build_interval(0.0, 1.0, 99).unwrap();
        let q = GridFunction::from_fn(&d, |x| x[0] * x[0]);
        let (lap, one) = infinity_laplacian(&q, 49).unwrap();
        assert!((lap - 2.0).abs() < 1e-6 && !one);
        let a = GridFunction::from_fn(&d, |x| 3.0 * x[0] - 1.0);
        assert!(infinity_laplacian(&a, 20).unwrap().0.abs() < 1e-9);
        let (lap0, one0) = infinity_laplacian(&a, 0).unwrap();
        assert!(lap0.abs() < 1e-8 && one0);
    }

    #[test]
    fn sine_second_order() {
        let exact = {
            let x: f64 = 0.25;
            (PI * (PI * x).cos()).powi(2) * (-PI * PI * (PI * x).sin())
        };
        let err = |n: usize| {
            let d = build_interval(0.0, 1.0, n).unwrap();
            let f = GridFunction::from_fn(&d, |x| (PI * x[0]).sin());
            let k = (n + 1) / 4 - 1;
            assert!((d.node(k)[0] - 0.25).abs() < 1e-12);
            (infinity_laplacian(&f, k).unwrap().0 - exact).abs()
        };
        let ratio = err(99) / err(199);
        assert!((ratio - 4.0).abs() < 0.2, "{ratio}");
    }

    #[test]
    fn two_dimensional_quadratic() {
        let d = build_disk([0.0, 0.0], 1.0, 41).unwrap();
        let f = GridFunction::from_fn(&d, |x| x[0] * x[0] + 2.0 * x[0] * x[1]);
        let k = (0..d.len())
            .find(|&k| {
                let p = d.node(k);
                (p[0] - 0.2).abs() < 1e-9 && (p[1] + 0.1).abs() < 1e-9
            })
            .unwrap_or_else(|| {
                (0..d.len())
                    .min_by(|&a, &b| {
                        let da = (d.node(a)[0] - 0.2).hypot(d.node(a)[1] + 0.1);
                        let db = (d.node(b)[0] - 0.2).hypot(d.node(b)[1] + 0.1);
                        da.total_cmp(&db)
                    })
                    .unwrap()
            });
        let [x, y] = d.node(k);
        let (gx, gy) = (2.0 * x + 2.0 * y, 2.0 * x);
        let exact = 2.0 * gx * gx + 2.0 * 2.0 * gx * gy;
        let (lap, one) = infinity_laplacian(&f, k).unwrap();
        assert!(!one);
        assert!((lap - exact).abs() < 1e-9, "{lap} {exact}");
    }

    /// Continuum value of the p-level root for `sin(πx)` at `x = 1/2`.
    fn sine_oracle(p: f64) -> f64 {
        let t = 0.5;
        let f = |y: f64| {
            let r = (0.5 - y).abs();
            if r == 0.0 {
                0.0
            } else {
                ((p - 1.0) * (1.0 - (PI * y).sin()).ln() - (1.0 + t * p) * r.ln()).exp()
            }
        };
        let inner = 2.0 * crate::quadrature::adaptive_simpson(f, 0.0, 1.0, 1e-12);
        let tail = 2.0 * 2.0 * 0.5f64.powf(-t * p) / (t * p);
        (inner + tail).powf(1.0 / (p - 1.0))
    }

    #[test]
    fn sine_p_level_matches_continuum_and_limit() {
        let d = build_interval(0.0, 1.0, 999).unwrap();
        let f = GridFunction::from_fn(&d, |x| (PI * x[0]).sin());
        let mid = 499;
        let (lp, _) = l_infinity_pm(&f, mid, 0.5).unwrap();
        assert!((lp - 2f64.sqrt()).abs() < 1e-12);
        for p in [20.0, 50.0, 200.0] {
            let got = discrete_lp_pm(&f, mid, 0.5, p).unwrap().0;
            assert!((got / sine_oracle(p) - 1.0).abs() < 1e-3, "p={p}: {got}");
        }
        let gap = |p: f64| (discrete_lp_pm(&f, mid, 0.5, p).unwrap().0 / lp - 1.0).abs();
        assert!(gap(200.0) < 0.05);
        assert!(gap(1000.0) < gap(200.0) && gap(200.0) < gap(50.0));
        let (a, b) = discrete_lp_pm(&f, mid, 0.5, 20.0).unwrap();
        let (a3, b3) = discrete_lp_pm(&f.scaled(3.0), mid, 0.5, 20.0).unwrap();
        assert!(a >= 0.0 && b >= 0.0);
        assert!((a3 / a - 3.0).abs() < 1e-10);
        assert!(b == 0.0 && b3 == 0.0);
    }

    #[test]
    fn cone_solves_limit_system() {
        let d = build_interval(0.0, 2.0, 400).unwrap();
        let c = normalized_cone(&d);
        let lp = LimitParams::for_domain(&d, 0.5, 0.5, 0.5).unwrap();
        let rep = residuals_limit_system(&c, &c, &lp, None).unwrap();
        assert_eq!(rep.lambda_inf, 1.0);
        assert!(rep.max_abs <= 0.1, "{}", rep.max_abs);
        let vertices = rep
            .nodes
            .iter()
            .filter(|n| n.flag == NodeFlag::Vertex)
            .count();
        assert!((1..=3).contains(&vertices));
    }

    #[test]
    fn zero_pair_residual() {
        let d = build_interval(0.0, 2.0, 40).unwrap();
        let z = GridFunction::zeros(&d);
        let lp = LimitParams::for_domain(&d, 0.5, 0.3, 0.6).unwrap();
        let rep = residuals_limit_system(&z, &z, &lp, None).unwrap();
        assert_eq!(rep.max_abs, 0.0);
    }
}
