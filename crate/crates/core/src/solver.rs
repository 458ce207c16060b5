//! First eigenpair by descent on the Rayleigh quotient over `G(u, v) = 1`.
//!
//! Each iteration takes a preconditioned gradient step on `ln J`, projects
//! onto nonnegative functions with `|.|`, and retracts exactly onto the
//! constraint manifold by the scalar `G^{-1/p}` (valid because `G` is jointly
//! p-homogeneous). Step sizes come from Armijo backtracking restarted at
//! `step0` every iteration; the run stops once the relative change of the
//! eigenvalue drops below `tol`.
//!
//! The preconditioner is the weighted stiffness matrix of the local energy,
//! `sum_c p(p-1)|grad w|_c^{p-2} |D_c .|^2`, plus the Hessian of the nonlocal
//! energy, both divided by `I`. It is rebuilt every iteration and factored
//! with Cholesky. The nonlocal part is kept in full on grids of moderate size
//! and reduced to its diagonal (banded factorization) beyond that.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::energy::{CoupledEnergy, FractionalKernel, ProblemParams};
use crate::error::{invalid, Error, Result};
use crate::geometry::{normalized_cone, Domain, GridFunction};
use crate::linalg::BandMatrix;
use crate::scaled::ScaledSum;

const ARMIJO_C: f64 = 1e-4;
/// Node count up to which the fractional coupling enters the preconditioner in full.
const DENSE_LIMIT: usize = 2500;
/// Relative floor on the preconditioner cell weights.
const WEIGHT_FLOOR: f64 = 1e-8;
const INIT_NOISE: f64 = 0.01;

#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions {
    pub max_iters: usize,
    /// Relative eigenvalue change that ends the iteration.
    pub tol: f64,
    pub step0: f64,
    pub armijo_shrink: f64,
    pub seed: u64,
    pub positivity_projection: bool,
    /// Plain gradient steps when `false`.
    pub precondition: bool,
    pub trace: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            max_iters: 5000,
            tol: 1e-10,
            step0: 1.0,
            armijo_shrink: 0.5,
            seed: 1,
            positivity_projection: true,
            precondition: true,
            trace: false,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(invalid(
                "tol",
                format!("must be positive, got {}", self.tol),
            ));
        }
        if !(self.armijo_shrink > 0.0 && self.armijo_shrink < 1.0) {
            return Err(invalid(
                "armijo_shrink",
                format!("must lie in (0, 1), got {}", self.armijo_shrink),
            ));
        }
        if self.max_iters == 0 {
            return Err(invalid("max_iters", "must be at least 1"));
        }
        if !(self.step0 > 0.0 && self.step0.is_finite()) {
            return Err(invalid(
                "step0",
                format!("must be positive, got {}", self.step0),
            ));
        }
        Ok(())
    }
}

/// One line of the optional iteration trace: the eigenvalue after the step
/// and the residual of the iterate the step started from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub iter: usize,
    pub lambda: f64,
    pub step: f64,
    pub residual: f64,
}

#[derive(Debug, Clone)]
pub struct EigenPair {
    pub u: GridFunction,
    pub v: GridFunction,
    pub lambda: f64,
    pub log_lambda: f64,
    pub iterations: usize,
    pub lambda_history: Vec<f64>,
    /// Weak-form residual of the returned iterate.
    pub residual: f64,
    pub converged: bool,
    pub trace: Vec<TraceRow>,
}

impl EigenPair {
    /// `lambda^{1/p}` evaluated through the logarithm.
    pub fn lambda_root(&self, p: f64) -> f64 {
        (self.log_lambda / p).exp()
    }
}

const NOISE_MODES: usize = 4;

/// Cone of the largest inscribed ball times `1 + 0.01 zeta`, where `zeta` is a
/// seeded random combination of a few low-frequency plane waves with
/// `|zeta| <= 1`. A smooth perturbation keeps the gradient of the initial
/// guess bounded independently of the mesh, which matters for large `p`.
pub fn initial_guess(domain: &Arc<Domain>, seed: u64) -> (GridFunction, GridFunction) {
    let cone = normalized_cone(domain);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let diam = domain.diameter();
    let dim = domain.dim();
    let mut noisy = |c: &GridFunction| {
        let waves: Vec<(f64, [f64; 2], f64)> = (1..=NOISE_MODES)
            .map(|k| {
                let amp = (2.0 * rng.random::<f64>() - 1.0) / NOISE_MODES as f64;
                let theta = if dim == 1 {
                    0.0
                } else {
                    std::f64::consts::TAU * rng.random::<f64>()
                };
                let freq = std::f64::consts::PI * k as f64 / diam;
                let phase = std::f64::consts::TAU * rng.random::<f64>();
                (amp, [freq * theta.cos(), freq * theta.sin()], phase)
            })
            .collect();
        let values = c
            .values()
            .iter()
            .zip(domain.nodes())
            .map(|(&w, x)| {
                let zeta: f64 = waves
                    .iter()
                    .map(|(a, k, ph)| a * (k[0] * x[0] + k[1] * x[1] + ph).cos())
                    .sum();
                w * (1.0 + INIT_NOISE * zeta)
            })
            .collect();
        GridFunction::from_raw(domain, values)
    };
    let u = noisy(&cone);
    let v = noisy(&cone);
    (u, v)
}

/// Iterate on the constraint manifold together with its cached energies.
struct State {
    u: Vec<f64>,
    v: Vec<f64>,
    ln_i: f64,
    ln_j: f64,
}

struct Descent<'a> {
    energy: &'a CoupledEnergy,
    opts: &'a SolverOptions,
    p: f64,
}

impl Descent<'_> {
    /// Projects (optionally), balances the two components and rescales to
    /// `G = 1`; `None` when `G` vanishes.
    ///
    /// Balancing minimizes `J(a u, v)` over `a > 0` in closed form:
    /// `a^p = alpha I_v / (beta I_u)`, where `I_u`, `I_v` are the energies of
    /// the two components. Plain gradient steps barely move along this
    /// direction.
    fn retract(&self, mut u: Vec<f64>, mut v: Vec<f64>) -> Option<State> {
        if self.opts.positivity_projection {
            u.iter_mut().for_each(|x| *x = x.abs());
            v.iter_mut().for_each(|x| *x = x.abs());
        }
        let params = self.energy.params();
        let [lu, fu, lv, fv] = self.energy.parts(&u, &v);
        let (ln_iu, ln_iv) = ((lu + fu).ln(), (lv + fv).ln());
        let ln_g = self.energy.ln_g(&u, &v);
        if !(ln_g.is_finite() && ln_iu.is_finite() && ln_iv.is_finite()) {
            return None;
        }
        let ln_a = (params.alpha().ln() + ln_iv - params.beta().ln() - ln_iu) / self.p;
        let ln_g = ln_g + params.alpha() * ln_a;
        let ln_t = -ln_g / self.p;
        let (a, t) = ((ln_a + ln_t).exp(), ln_t.exp());
        u.iter_mut().for_each(|x| *x *= a);
        v.iter_mut().for_each(|x| *x *= t);
        let mut i = ScaledSum::from_log(ln_iu + self.p * (ln_a + ln_t));
        i.push_log(ln_iv + self.p * ln_t);
        let ln_i = i.ln();
        Some(State {
            u,
            v,
            ln_i,
            ln_j: ln_i,
        })
    }

    /// Gradient of `ln J` and the nonlocal Hessian diagonal scaled by `1/I`.
    #[allow(clippy::type_complexity)]
    fn gradient(&self, s: &State) -> ((Vec<f64>, Vec<f64>), (Vec<f64>, Vec<f64>)) {
        let ((mut gu, mut gv), diag) = self.energy.grad_i_with_diag(&s.u, &s.v, s.ln_i);
        let ln_g = s.ln_i - s.ln_j;
        let (hu, hv) = self.energy.grad_g_scaled(&s.u, &s.v, ln_g);
        gu.iter_mut().zip(&hu).for_each(|(a, b)| *a -= b);
        gv.iter_mut().zip(&hv).for_each(|(a, b)| *a -= b);
        ((gu, gv), diag)
    }

    /// `(lambda / p) * ||grad ln J||_1` per component, the weak residual at `G = 1`.
    fn residual(&self, s: &State, gu: &[f64], gv: &[f64]) -> f64 {
        let scale = (s.ln_i - self.p.ln()).exp();
        let l1 = |g: &[f64]| g.iter().map(|x| x.abs()).sum::<f64>();
        scale * l1(gu).max(l1(gv))
    }

    fn precondition(
        &self,
        frac: &FractionalKernel,
        w: &[f64],
        frac_diag: &[f64],
        ln_i: f64,
        g: &[f64],
    ) -> Vec<f64> {
        let n = w.len();
        let p = self.p;
        let local = self.energy.local();
        let ln_norms = local.ln_gradient_norms(w);
        let c = (p * (p - 1.0) * self.energy.domain().cell_volume()).ln() - ln_i;
        let ln_w: Vec<f64> = ln_norms
            .iter()
            .map(|&l| if p == 2.0 { c } else { (p - 2.0) * l + c })
            .collect();
        let ln_max = ln_w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let floor = ln_max + WEIGHT_FLOOR.ln();
        let weights: Vec<f64> = ln_w.iter().map(|&l| l.max(floor).exp()).collect();
        let edges = local.edges(&weights);
        let bw = edges
            .iter()
            .filter_map(|&(a, b, _)| b.map(|b| a.abs_diff(b)))
            .max()
            .unwrap_or(0);
        let dense = n <= DENSE_LIMIT;
        let mut m = BandMatrix::zeros(n, if dense { n.saturating_sub(1) } else { bw });
        for &(a, b, wt) in &edges {
            m.add(a, a, wt);
            if let Some(b) = b {
                m.add(b, b, wt);
                m.add(a, b, -wt);
            }
        }
        for (i, &d) in frac_diag.iter().enumerate() {
            m.add(i, i, d);
        }
        // the diagonal alone overweights smooth modes badly, so keep the full coupling when affordable
        if dense {
            let rows = frac.coupling_rows_scaled(w, ln_i);
            for (i, row) in rows.iter().enumerate() {
                for (j, &c) in row.iter().enumerate() {
                    m.add(i, j, -c);
                }
            }
        }
        let mut x = g.to_vec();
        if m.cholesky() {
            m.solve(&mut x);
        }
        x
    }

    fn run(&self, u0: Vec<f64>, v0: Vec<f64>) -> Result<(State, IterLog)> {
        let mut state = self.retract(u0, v0).ok_or(Error::DegenerateConstraint)?;
        let mut log = IterLog {
            history: vec![state.ln_j.exp()],
            trace: Vec::new(),
            iterations: 0,
            converged: false,
        };
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
        // previous gradient, preconditioned gradient and direction
        let mut prev: Option<[[Vec<f64>; 2]; 3]> = None;
        for iter in 1..=self.opts.max_iters {
            let ((gu, gv), (du, dv)) = self.gradient(&state);
            let (zu, zv) = if self.opts.precondition {
                (
                    self.precondition(self.energy.frac_u(), &state.u, &du, state.ln_i, &gu),
                    self.precondition(self.energy.frac_v(), &state.v, &dv, state.ln_i, &gv),
                )
            } else {
                (gu.clone(), gv.clone())
            };
            let gz = dot(&gu, &zu) + dot(&gv, &zv);
            let (mut pu, mut pv) = (zu.clone(), zv.clone());
            if let Some([[pgu, pgv], [pzu, pzv], [pdu, pdv]]) = &prev {
                let num = gz - dot(pgu, &zu) - dot(pgv, &zv);
                let den = dot(pgu, pzu) + dot(pgv, pzv);
                let beta = if den > 0.0 { (num / den).max(0.0) } else { 0.0 };
                pu.iter_mut().zip(pdu).for_each(|(a, b)| *a += beta * b);
                pv.iter_mut().zip(pdv).for_each(|(a, b)| *a += beta * b);
            }
            let mut slope = dot(&gu, &pu) + dot(&gv, &pv);
            if !(slope > 0.0) {
                pu.clone_from(&zu);
                pv.clone_from(&zv);
                slope = gz;
            }
            let residual = self.opts.trace.then(|| self.residual(&state, &gu, &gv));

            let mut step = self.opts.step0;
            let mut accepted = None;
            while step > 1e-16 * self.opts.step0 {
                let tu = state.u.iter().zip(&pu).map(|(x, d)| x - step * d).collect();
                let tv = state.v.iter().zip(&pv).map(|(x, d)| x - step * d).collect();
                if let Some(trial) = self.retract(tu, tv) {
                    if trial.ln_j <= state.ln_j - ARMIJO_C * step * slope {
                        accepted = Some(trial);
                        break;
                    }
                }
                step *= self.opts.armijo_shrink;
            }
            log.iterations = iter;
            let previous = state.ln_j.exp();
            let Some(next) = accepted else {
                // No decrease representable in floating point: the eigenvalue
                // change is zero, which meets the stopping rule.
                log.converged = true;
                break;
            };
            state = next;
            prev = Some([[gu, gv], [zu, zv], [pu, pv]]);
            let lambda = state.ln_j.exp();
            log.history.push(lambda);
            if self.opts.trace {
                log.trace.push(TraceRow {
                    iter,
                    lambda,
                    step,
                    residual: residual.unwrap_or(f64::NAN),
                });
            }
            if (lambda - previous).abs() / lambda < self.opts.tol {
                log.converged = true;
                break;
            }
        }
        Ok((state, log))
    }
}

struct IterLog {
    history: Vec<f64>,
    trace: Vec<TraceRow>,
    iterations: usize,
    converged: bool,
}

/// Solves for the first eigenpair starting from the perturbed cone.
pub fn solve_eigenpair(
    domain: &Arc<Domain>,
    params: &ProblemParams,
    opts: &SolverOptions,
) -> Result<EigenPair> {
    let (u0, v0) = initial_guess(domain, opts.seed);
    solve_eigenpair_from(params, opts, &u0, &v0)
}

/// Solves for the first eigenpair from a given initial pair.
pub fn solve_eigenpair_from(
    params: &ProblemParams,
    opts: &SolverOptions,
    u0: &GridFunction,
    v0: &GridFunction,
) -> Result<EigenPair> {
    opts.validate()?;
    if !u0.same_domain(v0) {
        return Err(Error::DomainMismatch);
    }
    let domain = u0.domain();
    let [nx, ny] = domain.lattice_dims();
    if nx < 3 || (domain.dim() == 2 && ny < 3) {
        return Err(Error::InvalidDomain(
            "at least 3 nodes per axis are required".into(),
        ));
    }
    let energy = CoupledEnergy::new(domain, *params)?;
    let descent = Descent {
        energy: &energy,
        opts,
        p: params.p(),
    };
    let (state, log) = descent.run(u0.values().to_vec(), v0.values().to_vec())?;
    let ((gu, gv), _) = descent.gradient(&state);
    let residual = descent.residual(&state, &gu, &gv);
    let pair = EigenPair {
        u: GridFunction::new(domain, state.u)?,
        v: GridFunction::new(domain, state.v)?,
        lambda: state.ln_j.exp(),
        log_lambda: state.ln_j,
        iterations: log.iterations,
        lambda_history: log.history,
        residual,
        converged: log.converged,
        trace: log.trace,
    };
    if pair.converged {
        Ok(pair)
    } else {
        Err(Error::NonConvergence {
            iterations: pair.iterations,
            lambda: pair.lambda,
            best: Box::new(pair),
        })
    }
}

/// Dual (sup-norm test vector) norm of the weak-form defect of both equations:
/// `max(||E(u) - lambda 2 alpha/p |u|^{alpha-2} u |v|^beta||_1, same for v)`.
pub fn weak_residual(pair: &EigenPair, params: &ProblemParams) -> Result<f64> {
    if !pair.u.same_domain(&pair.v) {
        return Err(Error::DomainMismatch);
    }
    let energy = CoupledEnergy::new(pair.u.domain(), *params)?;
    let (u, v) = (pair.u.values(), pair.v.values());
    let ln_lambda = pair.lambda.ln();
    let (iu, iv) = energy.grad_i_scaled(u, v, ln_lambda);
    let (gu, gv) = energy.grad_g_scaled(u, v, 0.0);
    let l1 = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>();
    Ok(pair.lambda / params.p() * l1(&iu, &gu).max(l1(&iv, &gv)))
}
