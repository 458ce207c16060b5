//! Behaviour of the first eigenvalue as `p -> ∞`.

use std::sync::Arc;

use crate::energy::{schedule_alpha, ProblemParams};
use crate::error::{invalid, Error, Result};
use crate::geometry::{inradius, normalized_cone, Domain, GridFunction};
use crate::parallel::map_rows;
use crate::solver::{solve_eigenpair, EigenPair, SolverOptions};

/// Parameters of the limit problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LimitParams {
    pub gamma: f64,
    pub r: f64,
    pub s: f64,
    /// Inradius of the domain.
    pub radius: f64,
}

impl LimitParams {
    pub fn new(gamma: f64, r: f64, s: f64, radius: f64) -> Result<Self> {
        let lp = Self {
            gamma,
            r,
            s,
            radius,
        };
        lp.validate()?;
        Ok(lp)
    }

    /// Limit parameters of `domain`, with the inradius computed from the geometry.
    pub fn for_domain(domain: &Domain, gamma: f64, r: f64, s: f64) -> Result<Self> {
        Self::new(gamma, r, s, inradius(domain)?)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, x) in [("gamma", self.gamma), ("r", self.r), ("s", self.s)] {
            if !(x > 0.0 && x < 1.0) {
                return Err(invalid(name, format!("must lie in (0, 1), got {x}")));
            }
        }
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return Err(invalid(
                "radius",
                format!("must be positive, got {}", self.radius),
            ));
        }
        Ok(())
    }

    /// `gamma r + (1 - gamma) s`.
    pub fn exponent(&self) -> f64 {
        self.gamma * self.r + (1.0 - self.gamma) * self.s
    }
}

/// `max{1/R, R^{-(gamma r + (1 - gamma) s)}}`.
pub fn lambda_infinity(lp: &LimitParams) -> Result<f64> {
    lp.validate()?;
    let r = lp.radius;
    Ok((1.0 / r).max(r.powf(-lp.exponent())))
}

/// `max_{i != j} |w_i - w_j| / |x_i - x_j|^t` over pairs of nodes.
pub fn holder_seminorm(w: &GridFunction, t: f64) -> Result<f64> {
    if !(t > 0.0 && t < 1.0) {
        return Err(invalid("t", format!("must lie in (0, 1), got {t}")));
    }
    let domain = w.domain();
    let n = w.len();
    if n < 2 {
        return Err(Error::InvalidDomain(
            "the Hölder seminorm needs two nodes".into(),
        ));
    }
    let vals = w.values();
    let rows = map_rows(n, |i| {
        let mut best = 0.0f64;
        for j in i + 1..n {
            let d = domain.distance(i, j);
            best = best.max((vals[i] - vals[j]).abs() / d.powf(t));
        }
        best
    });
    Ok(rows.into_iter().fold(0.0, f64::max))
}

/// Discrete `||grad w||_∞`: largest forward difference along each lattice
/// axis, together with the boundary quotients `|w_i| / dist(x_i, ∂Ω)`.
pub fn sup_gradient(w: &GridFunction) -> f64 {
    let domain = w.domain();
    let vals = w.values();
    let [hx, hy] = domain.spacings();
    let mut best = 0.0f64;
    for (k, &wk) in vals.iter().enumerate() {
        let [i, j] = domain.lattice_index(k);
        let (i, j) = (i as isize, j as isize);
        if let Some(e) = domain.node_at(i + 1, j) {
            best = best.max((vals[e] - wk).abs() / hx);
        }
        if domain.dim() == 2 {
            if let Some(e) = domain.node_at(i, j + 1) {
                best = best.max((vals[e] - wk).abs() / hy);
            }
        }
        best = best.max(wk.abs() / domain.boundary_distance()[k]);
    }
    best
}

/// Limit quotient `max{||∇w||, |w|_r, ||∇z||, |z|_s} / max w^Γ z^{1-Γ}`.
pub fn j_infinity(w: &GridFunction, z: &GridFunction, lp: &LimitParams) -> Result<f64> {
    lp.validate()?;
    if !w.same_domain(z) {
        return Err(Error::DomainMismatch);
    }
    if w.values().iter().chain(z.values()).any(|&x| x < 0.0) {
        return Err(invalid(
            "w",
            "the limit quotient needs nonnegative functions",
        ));
    }
    let g = lp.gamma;
    let den = w
        .values()
        .iter()
        .zip(z.values())
        .map(|(&a, &b)| (g * a.ln() + (1.0 - g) * b.ln()).exp())
        .fold(0.0, f64::max);
    if !(den > 0.0) {
        return Err(Error::ZeroDenominator("max w^gamma z^(1-gamma)"));
    }
    let num = sup_gradient(w)
        .max(holder_seminorm(w, lp.r)?)
        .max(sup_gradient(z))
        .max(holder_seminorm(z, lp.s)?);
    Ok(num / den)
}

/// Test pair built on the normalized cone `d_R`: `(d_R, d_R)` when `R <= 1`,
/// otherwise `(R^{(1-Γ)(r-s)} d_R, R^{-Γ(r-s)} d_R)`.
pub fn limit_test_pair(domain: &Arc<Domain>, lp: &LimitParams) -> (GridFunction, GridFunction) {
    let cone = normalized_cone(domain);
    if lp.radius <= 1.0 {
        return (cone.clone(), cone);
    }
    let d = lp.r - lp.s;
    (
        cone.scaled(lp.radius.powf((1.0 - lp.gamma) * d)),
        cone.scaled(lp.radius.powf(-lp.gamma * d)),
    )
}

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Golden-section minimization of a unimodal function on `[lo, hi]`.
fn golden_min(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, iters: usize) -> (f64, f64) {
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..iters {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        }
    }
    if f1 <= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// Numerical value of
/// `inf { max(a/d, a/d^r, b/d, b/d^s) : a^Γ b^{1-Γ} = 1, 0 < d <= R }`.
///
/// `b` is eliminated through the constraint; for each `d` the objective is
/// quasi-convex in `ln a`, and the outer search over `d` is a log-spaced grid
/// refined by golden sections around the best grid point.
pub fn infimum_i_abd(lp: &LimitParams) -> f64 {
    let LimitParams {
        gamma,
        r,
        s,
        radius,
    } = *lp;
    let inner = |d: f64| {
        let obj = |la: f64| {
            let a = la.exp();
            let b = (-gamma / (1.0 - gamma) * la).exp();
            (a / d).max(a / d.powf(r)).max(b / d).max(b / d.powf(s))
        };
        let span = 40.0 + 10.0 * radius.ln().abs();
        golden_min(obj, -span, span, 200).1
    };
    let grid = 96;
    let lo = (radius * 1e-4).ln();
    let hi = radius.ln();
    let at = |k: usize| lo + (hi - lo) * k as f64 / grid as f64;
    let (k_best, mut best) =
        (0..=grid)
            .map(|k| (k, inner(at(k).exp())))
            .fold(
                (0, f64::INFINITY),
                |acc, x| if x.1 < acc.1 { x } else { acc },
            );
    let a = at(k_best.saturating_sub(1));
    let b = at((k_best + 1).min(grid));
    let refined = golden_min(|ld| inner(ld.exp()), a, b, 80).1;
    best = best.min(refined);
    best
}

/// One row of a p-sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRecord {
    pub p: f64,
    pub alpha: f64,
    pub beta: f64,
    pub lambda_p: f64,
    pub lambda_root: f64,
    pub lambda_inf: f64,
    pub gap: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn record_of(pair: &EigenPair, params: &ProblemParams, lambda_inf: f64) -> SweepRecord {
    let lambda_root = pair.lambda_root(params.p());
    SweepRecord {
        p: params.p(),
        alpha: params.alpha(),
        beta: params.beta(),
        lambda_p: pair.lambda,
        lambda_root,
        lambda_inf,
        gap: (lambda_root - lambda_inf).abs(),
        iterations: pair.iterations,
        converged: pair.converged,
    }
}

/// Solves once per entry of `p_list` with `alpha = gamma p` (rounded to a
/// half) and compares `lambda_p^{1/p}` with the limit eigenvalue. Rows that
/// hit the iteration limit keep their best iterate and `converged = false`.
pub fn sweep_p(
    domain: &Arc<Domain>,
    gamma: f64,
    r: f64,
    s: f64,
    p_list: &[f64],
    opts: &SolverOptions,
) -> Result<Vec<SweepRecord>> {
    if p_list.is_empty() {
        return Err(invalid("p_values", "at least one exponent is required"));
    }
    if p_list.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(invalid("p_values", "must be strictly increasing"));
    }
    let lp = LimitParams::for_domain(domain, gamma, r, s)?;
    let lambda_inf = lambda_infinity(&lp)?;
    let params = p_list
        .iter()
        .map(|&p| {
            if !(p >= 2.0) {
                return Err(invalid(
                    "p_values",
                    format!("every p must be >= 2, got {p}"),
                ));
            }
            ProblemParams::new(
                p,
                r,
                s,
                schedule_alpha(gamma, p),
                p - schedule_alpha(gamma, p),
                gamma,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    map_rows(params.len(), |k| {
        match solve_eigenpair(domain, &params[k], opts) {
            Ok(pair) => Ok(record_of(&pair, &params[k], lambda_inf)),
            Err(Error::NonConvergence { best, .. }) => Ok(record_of(&best, &params[k], lambda_inf)),
            Err(e) => Err(e),
        }
    })
    .into_iter()
    .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::build_interval;

    #[test]
    fn hand_values() {
        let l = |g, r, s, rad| lambda_infinity(&LimitParams::new(g, r, s, rad).unwrap()).unwrap();
        assert_eq!(l(0.3, 0.4, 0.6, 1.0), 1.0);
        assert_eq!(l(0.5, 0.25, 0.75, 2.0), std::f64::consts::FRAC_1_SQRT_2);
        assert_eq!(l(0.3, 0.2, 0.9, 0.5), 2.0);
        assert!(LimitParams::new(0.5, 0.5, 0.5, 0.0).is_err());
        assert!(LimitParams::new(1.0, 0.5, 0.5, 1.0).is_err());
    }

    #[test]
    fn exponent_between_orders() {
        let lp = LimitParams::new(0.3, 0.2, 0.9, 1.0).unwrap();
        assert!(lp.exponent() > 0.2 && lp.exponent() < 0.9);
    }

    #[test]
    fn infimum_known_cases() {
        let one = infimum_i_abd(&LimitParams::new(0.4, 0.3, 0.6, 1.0).unwrap());
        assert!((one - 1.0).abs() < 1e-6, "{one}");
        let two = infimum_i_abd(&LimitParams::new(0.5, 0.25, 0.75, 2.0).unwrap());
        assert!((two - 2f64.powf(-0.5)).abs() < 1e-4, "{two}");
    }

    #[test]
    fn holder_examples() {
        let d = build_interval(0.0, 1.0, 400).unwrap();
        let c = GridFunction::from_fn(&d, |_| 3.0);
        assert_eq!(holder_seminorm(&c, 0.5).unwrap(), 0.0);
        let x = GridFunction::from_fn(&d, |p| p[0]);
        let h = holder_seminorm(&x, 0.5).unwrap();
        // the widest pair spans 1 - 2h
        assert!((h - 1.0).abs() <= 2.0 * d.spacing(), "{h}");
        assert!(holder_seminorm(&x, 1.0).is_err());
    }

    #[test]
    fn cone_seminorm_on_large_interval() {
        let d = build_interval(0.0, 4.0, 400).unwrap();
        let h = holder_seminorm(&normalized_cone(&d), 0.5).unwrap();
        assert!((h / 2f64.powf(-0.5) - 1.0).abs() < 0.02, "{h}");
    }

    #[test]
    fn limit_quotient_of_test_pairs() {
        let d = build_interval(0.0, 2.0, 400).unwrap();
        let lp = LimitParams::for_domain(&d, 0.5, 0.25, 0.75).unwrap();
        let (w, z) = limit_test_pair(&d, &lp);
        let j = j_infinity(&w, &z, &lp).unwrap();
        assert!((j - 1.0).abs() < 0.02, "{j}");
        let j5 = j_infinity(&w.scaled(5.0), &z.scaled(5.0), &lp).unwrap();
        assert!((j5 / j - 1.0).abs() < 1e-12);

        let d = build_interval(0.0, 4.0, 400).unwrap();
        let lp = LimitParams::for_domain(&d, 0.5, 0.25, 0.75).unwrap();
        let (w, z) = limit_test_pair(&d, &lp);
        let j = j_infinity(&w, &z, &lp).unwrap();
        assert!((j / 2f64.powf(-0.5) - 1.0).abs() < 0.02, "{j}");
    }

    #[test]
    fn limit_quotient_errors() {
        let d = build_interval(0.0, 2.0, 20).unwrap();
        let lp = LimitParams::for_domain(&d, 0.5, 0.25, 0.75).unwrap();
        let z = GridFunction::zeros(&d);
        assert!(matches!(
            j_infinity(&z, &z, &lp),
            Err(Error::ZeroDenominator(_))
        ));
        let neg = normalized_cone(&d).scaled(-1.0);
        assert!(j_infinity(&neg, &neg, &lp).is_err());
    }

    #[test]
    fn sweep_rejects_bad_lists() {
        let d = build_interval(0.0, 2.0, 20).unwrap();
        let o = SolverOptions::default();
        assert!(sweep_p(&d, 0.5, 0.25, 0.75, &[4.0, 4.0], &o).is_err());
        assert!(sweep_p(&d, 0.5, 0.25, 0.75, &[1.5, 4.0], &o).is_err());
        assert!(sweep_p(&d, 0.5, 0.25, 0.75, &[], &o).is_err());
    }
}
