//! Numerical checks of the elementary inequalities behind the variational
//! argument: exhaustive grids plus seeded random corpora.
//!
//! Every `check_*` function returns a signed margin. For inequalities of the
//! form `lhs <= 0` the margin is `lhs` (violations are positive); for
//! `lhs >= rhs` it is `lhs - rhs` (violations are negative).

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Error, Result};
use crate::parallel::map_rows;
use crate::scaled::ScaledSum;

/// Relative tolerance applied as `TOLERANCE * (1 + largest term)`.
pub const TOLERANCE: f64 = 1e-10;

pub fn scaled_tolerance(largest: f64) -> f64 {
    TOLERANCE * (1.0 + largest.abs())
}

/// A seeded corpus specification.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBatch {
    pub count: usize,
    pub seed: u64,
    /// Sampling box `[lo, hi]` per variable.
    pub bounds: Vec<(f64, f64)>,
    pub tolerance: f64,
}

impl SampleBatch {
    pub fn new(count: usize, seed: u64, bounds: Vec<(f64, f64)>) -> Result<Self> {
        if count == 0 {
            return Err(invalid("samples", "at least one sample is required"));
        }
        if bounds.iter().any(|&(lo, hi)| !(lo <= hi)) {
            return Err(invalid("bounds", "every box needs lo <= hi"));
        }
        Ok(Self {
            count,
            seed,
            bounds,
            tolerance: TOLERANCE,
        })
    }

    /// Draws the corpus; the same seed always yields the same points.
    pub fn draw(&self) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        (0..self.count)
            .map(|_| {
                self.bounds
                    .iter()
                    .map(|&(lo, hi)| lo + (hi - lo) * rng.random::<f64>())
                    .collect()
            })
            .collect()
    }
}

fn nonneg(name: &'static str, x: f64) -> Result<()> {
    if x >= 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(invalid(
            name,
            format!("must be a finite nonnegative number, got {x}"),
        ))
    }
}

fn positive(name: &'static str, x: f64) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(invalid(
            name,
            format!("must be finite and positive, got {x}"),
        ))
    }
}

/// `(x^p + y^p)^{1/p}` without overflow.
fn pnorm2(x: f64, y: f64, p: f64) -> f64 {
    let m = x.max(y);
    if m == 0.0 {
        return 0.0;
    }
    m * ((x / m).powf(p) + (y / m).powf(p)).powf(1.0 / p)
}

/// `|(x^p+y^p)^{1/p} - (w^p+z^p)^{1/p}| - (|x-w|^p + |y-z|^p)^{1/p}`, never positive.
pub fn check_quadruple_triangle(x: f64, y: f64, w: f64, z: f64, p: f64) -> Result<f64> {
    for (n, v) in [("x", x), ("y", y), ("w", w), ("z", z)] {
        nonneg(n, v)?;
    }
    if !(p >= 1.0) {
        return Err(invalid("p", format!("must be >= 1, got {p}")));
    }
    Ok((pnorm2(x, y, p) - pnorm2(w, z, p)).abs() - pnorm2((x - w).abs(), (y - z).abs(), p))
}

/// Margin and equality detection for the product-power inequality.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProductPower {
    /// `(a^p+b^p)^{α/p}(c^p+d^p)^{β/p} - a^α c^β - b^α d^β`, never negative.
    pub margin: f64,
    /// `(a, c)` is proportional to `(b, d)`.
    pub equality: bool,
    pub largest: f64,
}

pub fn check_product_power(
    a: f64,
    b: f64,
    c: f64,
    d: f64,
    alpha: f64,
    beta: f64,
) -> Result<ProductPower> {
    for (n, v) in [
        ("a", a),
        ("b", b),
        ("c", c),
        ("d", d),
        ("alpha", alpha),
        ("beta", beta),
    ] {
        positive(n, v)?;
    }
    let p = alpha + beta;
    if !(p > 1.0) {
        return Err(invalid(
            "alpha",
            format!("alpha + beta must exceed 1, got {p}"),
        ));
    }
    let lhs = pnorm2(a, b, p).powf(alpha) * pnorm2(c, d, p).powf(beta);
    let rhs = a.powf(alpha) * c.powf(beta) + b.powf(alpha) * d.powf(beta);
    let equality = (a * d - b * c).abs() <= TOLERANCE * (a * d + b * c);
    Ok(ProductPower {
        margin: lhs - rhs,
        equality,
        largest: lhs.max(rhs),
    })
}

/// `½(|g1|^p + |g2|^p) - |gφ|^p` for the p-mean `φ` of `(a1, a2)` with
/// `gφ = ½ φ^{1-p} (a1^{p-1} g1 + a2^{p-1} g2)`; never negative.
pub fn check_hidden_convexity_pointwise(
    a1: f64,
    a2: f64,
    g1: &[f64],
    g2: &[f64],
    p: f64,
) -> Result<f64> {
    positive("a1", a1)?;
    positive("a2", a2)?;
    if !(p > 1.0) {
        return Err(invalid("p", format!("must exceed 1, got {p}")));
    }
    if g1.len() != g2.len() {
        return Err(invalid("g2", "gradients must have the same dimension"));
    }
    Ok(hidden_convexity_terms(a1, a2, g1, g2, p).0)
}

/// Margin and the largest of its two terms.
fn hidden_convexity_terms(a1: f64, a2: f64, g1: &[f64], g2: &[f64], p: f64) -> (f64, f64) {
    let m = a1.max(a2);
    let (b1, b2) = (a1 / m, a2 / m);
    let phi = ((b1.powf(p) + b2.powf(p)) / 2.0).powf(1.0 / p);
    let (c1, c2) = (b1.powf(p - 1.0), b2.powf(p - 1.0));
    let norm = |g: &[f64]| g.iter().map(|x| x * x).sum::<f64>().sqrt();
    let gphi: Vec<f64> = g1
        .iter()
        .zip(g2)
        .map(|(x, y)| 0.5 * phi.powf(1.0 - p) * (c1 * x + c2 * y))
        .collect();
    let lhs = 0.5 * (norm(g1).powf(p) + norm(g2).powf(p));
    let rhs = norm(&gphi).powf(p);
    (lhs - rhs, lhs.max(rhs))
}

/// `|(x^p+y^p)^{1/p} - (z^p+1)^{1/p}| - ((1-x)^p + |y-z|^p)^{1/p}` on the unit cube; never positive.
pub fn check_lemma_a1(x: f64, y: f64, z: f64, p: f64) -> Result<f64> {
    for (n, v) in [("x", x), ("y", y), ("z", z)] {
        if !(0.0..=1.0).contains(&v) {
            return Err(invalid(n, format!("must lie in [0, 1], got {v}")));
        }
    }
    if !(p >= 1.0) {
        return Err(invalid("p", format!("must be >= 1, got {p}")));
    }
    Ok((pnorm2(x, y, p) - pnorm2(z, 1.0, p)).abs() - pnorm2(1.0 - x, (y - z).abs(), p))
}

/// Families of functions used to check the `p -> ∞` limit of `L^p(ℝ)` norms.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum A2Family {
    /// `1` on `(0, 1)`, zero elsewhere; limit 1.
    InteriorConstant,
    /// `1` on `(0, 1)` plus height 2 on `(2, 3)`; limit 2.
    ExteriorLump,
    /// `x` on `(0, 1)`; limit 1, approached monotonically.
    InteriorRamp,
}

impl A2Family {
    pub const ALL: [A2Family; 3] = [
        A2Family::InteriorConstant,
        A2Family::ExteriorLump,
        A2Family::InteriorRamp,
    ];

    pub fn id(&self) -> &'static str {
        match self {
            A2Family::InteriorConstant => "interior-constant",
            A2Family::ExteriorLump => "exterior-lump",
            A2Family::InteriorRamp => "interior-ramp",
        }
    }

    /// `max(||f||_{L∞(0,1)}, C)`.
    pub fn limit(&self) -> f64 {
        match self {
            A2Family::ExteriorLump => 2.0,
            _ => 1.0,
        }
    }

    fn interior(&self, x: f64) -> f64 {
        match self {
            A2Family::InteriorRamp => x,
            _ => 1.0,
        }
    }

    fn exterior(&self) -> Option<(f64, f64, f64)> {
        match self {
            A2Family::ExteriorLump => Some((2.0, 3.0, 2.0)),
            _ => None,
        }
    }
}

impl fmt::Display for A2Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for A2Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        A2Family::ALL
            .into_iter()
            .find(|f| f.id() == s)
            .ok_or_else(|| invalid("family", format!("unknown family id {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct A2Report {
    pub family: A2Family,
    pub p_values: Vec<f64>,
    /// `||f||_{L^p(ℝ)}` for each `p`.
    pub norms: Vec<f64>,
    /// `||f||_{L^p(0, 1)}` for each `p`.
    pub interior_norms: Vec<f64>,
    pub limit: f64,
    /// Relative distance to the limit at the last `p`.
    pub final_gap: f64,
    /// Interior norms are nondecreasing in `p`.
    pub interior_monotone: bool,
}

const A2_CELLS: usize = 4096;

/// `ln ∫_lo^hi |f|^p` by the midpoint rule.
fn ln_power_integral(f: impl Fn(f64) -> f64, lo: f64, hi: f64, p: f64) -> ScaledSum {
    let h = (hi - lo) / A2_CELLS as f64;
    let mut acc = ScaledSum::ZERO;
    for k in 0..A2_CELLS {
        let v = f(lo + (k as f64 + 0.5) * h).abs();
        if v > 0.0 {
            acc.push_log(p * v.ln());
        }
    }
    acc.scale_log(h.ln())
}

/// Norms of the family for each `p` in `p_list` (increasing, `>= 1`).
pub fn check_lemma_a2(family: A2Family, p_list: &[f64]) -> Result<A2Report> {
    if p_list.is_empty() || p_list.iter().any(|&p| !(p >= 1.0)) {
        return Err(invalid("p_list", "needs at least one exponent, all >= 1"));
    }
    if p_list.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(invalid("p_list", "must be strictly increasing"));
    }
    let mut norms = Vec::with_capacity(p_list.len());
    let mut interior_norms = Vec::with_capacity(p_list.len());
    for &p in p_list {
        let inside = ln_power_integral(|x| family.interior(x), 0.0, 1.0, p);
        let mut total = inside;
        if let Some((lo, hi, height)) = family.exterior() {
            total = total + ln_power_integral(|_| height, lo, hi, p);
        }
        interior_norms.push((inside.ln() / p).exp());
        norms.push((total.ln() / p).exp());
    }
    let limit = family.limit();
    let last = *norms.last().expect("nonempty");
    Ok(A2Report {
        family,
        p_values: p_list.to_vec(),
        interior_monotone: interior_norms
            .windows(2)
            .all(|w| w[1] >= w[0] * (1.0 - TOLERANCE)),
        norms,
        interior_norms,
        limit,
        final_gap: (last / limit - 1.0).abs(),
    })
}

/// Outcome of one suite.
#[derive(Debug, Clone, PartialEq)]
pub struct SuiteReport {
    pub name: String,
    pub cases: usize,
    pub violations: usize,
    /// Worst signed margin in the direction of the inequality.
    pub worst_margin: f64,
    pub passed: bool,
}

/// Accumulates margins where positive values are violations.
fn upper_suite(name: &str, margins: Vec<(f64, f64)>) -> SuiteReport {
    let cases = margins.len();
    let violations = margins
        .iter()
        .filter(|(m, big)| *m > scaled_tolerance(*big))
        .count();
    let worst = margins
        .iter()
        .map(|m| m.0)
        .fold(f64::NEG_INFINITY, f64::max);
    SuiteReport {
        name: name.to_string(),
        cases,
        violations,
        worst_margin: worst,
        passed: violations == 0 && cases > 0,
    }
}

/// Same for inequalities where negative values are violations.
fn lower_suite(name: &str, margins: Vec<(f64, f64)>) -> SuiteReport {
    let mut r = upper_suite(name, margins.into_iter().map(|(m, b)| (-m, b)).collect());
    r.worst_margin = -r.worst_margin;
    r
}

fn grid(step: f64) -> Vec<f64> {
    let n = (1.0 / step).round() as usize;
    (0..=n).map(|k| k as f64 / n as f64).collect()
}

fn triangle_term(x: f64, y: f64, w: f64, z: f64, p: f64) -> (f64, f64) {
    let g = check_quadruple_triangle(x, y, w, z, p).expect("valid inputs");
    (g, pnorm2(x, y, p).max(pnorm2(w, z, p)))
}

fn a1_term(x: f64, y: f64, z: f64, p: f64) -> (f64, f64) {
    let f = check_lemma_a1(x, y, z, p).expect("valid inputs");
    (f, pnorm2(x, y, p).max(pnorm2(z, 1.0, p)))
}

/// Exhaustive `[0,1]^4` grid at resolution 0.05 for `p ∈ {1, 1.5, 2, 4, 16}`.
pub fn suite_triangle_grid() -> SuiteReport {
    let g = grid(0.05);
    let n = g.len();
    let rows = map_rows(n * n, |k| {
        let (x, y) = (g[k / n], g[k % n]);
        let mut out = Vec::with_capacity(n * n * 5);
        for &w in &g {
            for &z in &g {
                for p in [1.0, 1.5, 2.0, 4.0, 16.0] {
                    out.push(triangle_term(x, y, w, z, p));
                }
            }
        }
        out
    });
    upper_suite(
        "quadruple_triangle_grid",
        rows.into_iter().flatten().collect(),
    )
}

/// Random quadruples in `[0, 10]^4` with `p ∈ [1, 20]`.
pub fn suite_triangle_random(count: usize, seed: u64) -> Result<SuiteReport> {
    let batch = SampleBatch::new(
        count,
        seed,
        vec![(0.0, 10.0); 4]
            .into_iter()
            .chain([(1.0, 20.0)])
            .collect(),
    )?;
    let pts = batch.draw();
    let m = map_rows(pts.len(), |k| {
        let s = &pts[k];
        triangle_term(s[0], s[1], s[2], s[3], s[4])
    });
    Ok(upper_suite("quadruple_triangle_random", m))
}

/// Random `(a, b, c, d) ∈ (0, 10]^4` with `α + β ∈ {2, 3, 7}`.
pub fn suite_product_power(count: usize, seed: u64) -> Result<SuiteReport> {
    let batch = SampleBatch::new(
        count,
        seed,
        vec![(0.0, 10.0); 4]
            .into_iter()
            .chain([(0.0, 1.0), (0.0, 3.0)])
            .collect(),
    )?;
    let pts = batch.draw();
    let m = map_rows(pts.len(), |k| {
        let s = &pts[k];
        let p = [2.0, 3.0, 7.0][(s[5] as usize).min(2)];
        let alpha = p * (0.01 + 0.98 * s[4]);
        // (0, 10] rather than [0, 10)
        let v = |x: f64| 10.0 - x;
        let r = check_product_power(v(s[0]), v(s[1]), v(s[2]), v(s[3]), alpha, p - alpha)
            .expect("valid inputs");
        (r.margin, r.largest)
    });
    let mut rep = lower_suite("product_power_random", m);
    let eq = check_product_power(2.0, 1.0, 2.0, 1.0, 1.0, 1.0).expect("valid inputs");
    if !eq.equality || eq.margin.abs() > scaled_tolerance(eq.largest) {
        rep.violations += 1;
        rep.passed = false;
    }
    Ok(rep)
}

/// Random positive pairs and gradients in dimensions 1 to 3, `p ∈ {2, 3, 8}`.
pub fn suite_hidden_convexity(count: usize, seed: u64) -> Result<SuiteReport> {
    let mut bounds = vec![(1e-3, 10.0), (1e-3, 10.0), (0.0, 3.0), (0.0, 3.0)];
    bounds.extend(vec![(-10.0, 10.0); 6]);
    let pts = SampleBatch::new(count, seed, bounds)?.draw();
    let m = map_rows(pts.len(), |k| {
        let s = &pts[k];
        let dim = 1 + (s[2] as usize).min(2);
        let p = [2.0, 3.0, 8.0][(s[3] as usize).min(2)];
        hidden_convexity_terms(s[0], s[1], &s[4..4 + dim], &s[7..7 + dim], p)
    });
    Ok(lower_suite("hidden_convexity_random", m))
}

const A1_EXPONENTS: [f64; 4] = [1.0, 2.0, 5.0, 20.0];

/// Exhaustive `[0,1]^3` grid at resolution 0.02.
pub fn suite_a1_grid() -> SuiteReport {
    let g = grid(0.02);
    let n = g.len();
    let rows = map_rows(n, |i| {
        let mut out = Vec::new();
        for &y in &g {
            for &z in &g {
                for p in A1_EXPONENTS {
                    out.push(a1_term(g[i], y, z, p));
                }
            }
        }
        out
    });
    upper_suite("a1_grid", rows.into_iter().flatten().collect())
}

/// The five case families of the proof, each as its own suite.
pub fn suite_a1_steps(count: usize, seed: u64) -> Result<Vec<SuiteReport>> {
    let g = grid(0.01);
    let over_exponents = |f: &dyn Fn(f64, f64, f64) -> Vec<(f64, f64)>| -> Vec<(f64, f64)> {
        let mut out = Vec::new();
        for p in A1_EXPONENTS {
            for &a in &g {
                for &b in &g {
                    out.extend(f(a, b, p));
                }
            }
        }
        out
    };
    // Face y = z and the surface x^p + y^p = z^p + 1.
    let step1 = over_exponents(&|a, b, p| {
        let mut v = vec![a1_term(a, b, b, p)];
        let xp = b.powf(p) + 1.0 - a.powf(p);
        if xp >= 0.0 {
            let x = xp.powf(1.0 / p);
            if x <= 1.0 {
                v.push(a1_term(x, a, b, p));
            }
        }
        v
    });
    let pts = SampleBatch::new(
        count,
        seed,
        vec![(0.0, 1.0); 3]
            .into_iter()
            .chain([(1.0, 30.0)])
            .collect(),
    )?
    .draw();
    let step2 = map_rows(pts.len(), |k| {
        let s = &pts[k];
        a1_term(s[0], s[1], s[2], s[3])
    });
    let step3 = over_exponents(&|a, b, p| vec![a1_term(a, b, 0.0, p), a1_term(a, b, 1.0, p)]);
    let step4 = over_exponents(&|a, b, p| vec![a1_term(a, 0.0, b, p), a1_term(a, 1.0, b, p)]);
    let step5 = over_exponents(&|a, b, p| vec![a1_term(0.0, a, b, p), a1_term(1.0, a, b, p)]);
    Ok(vec![
        upper_suite("a1_step1_critical_sets", step1),
        upper_suite("a1_step2_interior", step2),
        upper_suite("a1_step3_z_faces", step3),
        upper_suite("a1_step4_y_faces", step4),
        upper_suite("a1_step5_x_faces", step5),
    ])
}

/// Every family at `p ∈ {2, 5, 10, 20, 50, 100, 200}` with monotone interior
/// norms; the two piecewise constant families must be within 2% of their
/// limit at the last `p`.
pub fn suite_a2() -> Result<SuiteReport> {
    let ps = [2.0, 5.0, 10.0, 20.0, 50.0, 100.0, 200.0];
    let mut worst = 0.0f64;
    let mut violations = 0;
    for fam in A2Family::ALL {
        let r = check_lemma_a2(fam, &ps)?;
        let graded = fam != A2Family::InteriorRamp;
        if graded {
            worst = worst.max(r.final_gap);
        }
        if (graded && r.final_gap > 0.02) || !r.interior_monotone {
            violations += 1;
        }
    }
    Ok(SuiteReport {
        name: "a2_norm_limits".into(),
        cases: A2Family::ALL.len(),
        violations,
        worst_margin: worst,
        passed: violations == 0,
    })
}

/// All suites with `count` samples per random corpus.
pub fn run_all_suites(count: usize, seed: u64) -> Result<Vec<SuiteReport>> {
    let mut out = vec![
        suite_triangle_grid(),
        suite_triangle_random(count, seed)?,
        suite_product_power(count, seed.wrapping_add(1))?,
        suite_hidden_convexity(count, seed.wrapping_add(2))?,
        suite_a1_grid(),
    ];
    out.extend(suite_a1_steps(count, seed.wrapping_add(3))?);
    out.push(suite_a2()?);
    Ok(out)
}
