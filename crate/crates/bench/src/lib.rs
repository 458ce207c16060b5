//! Shared fixtures for the criterion benchmarks.

use std::sync::Arc;

use plap_core::energy::schedule_alpha;
use plap_core::solver::initial_guess;
use plap_core::{build_interval, build_rectangle, Domain, GridFunction, ProblemParams};

/// The sweep interval `(0, 2)` with `n` nodes.
pub fn interval(n: usize) -> Arc<Domain> {
    build_interval(0.0, 2.0, n).expect("valid interval")
}

pub fn square(n: usize) -> Arc<Domain> {
    build_rectangle(0.0, 0.0, 1.0, 1.0, n, n).expect("valid square")
}

/// `gamma = 0.5`, `r = 0.25`, `s = 0.75` at exponent `p`.
pub fn params(p: f64) -> ProblemParams {
    let a = schedule_alpha(0.5, p);
    ProblemParams::new(p, 0.25, 0.75, a, p - a, 0.5).expect("valid parameters")
}

/// The solver's starting pair.
pub fn pair(domain: &Arc<Domain>) -> (GridFunction, GridFunction) {
    initial_guess(domain, 1)
}
