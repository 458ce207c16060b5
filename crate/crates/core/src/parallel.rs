//! Row-parallel reductions with a fixed combination order.
//!
//! In deterministic mode every row is reduced sequentially and the row
//! results are folded in index order, so the result is bit-identical for
//! any thread count. The non-deterministic mode lets rayon pick the
//! reduction tree.

use std::sync::atomic::{AtomicBool, Ordering};

use rayon::prelude::*;

use crate::scaled::ScaledSum;

static DETERMINISTIC: AtomicBool = AtomicBool::new(true);

/// Selects the reduction mode for all subsequent evaluations.
pub fn set_deterministic(on: bool) {
    DETERMINISTIC.store(on, Ordering::Relaxed);
}

pub fn is_deterministic() -> bool {
    DETERMINISTIC.load(Ordering::Relaxed)
}

/// `sum_i row(i)` over `0..n`.
pub(crate) fn sum_rows<F>(n: usize, row: F) -> ScaledSum
where
    F: Fn(usize) -> ScaledSum + Sync + Send,
{
    if is_deterministic() {
        let parts: Vec<ScaledSum> = (0..n).into_par_iter().map(row).collect();
        parts.into_iter().fold(ScaledSum::ZERO, |a, b| a + b)
    } else {
        (0..n)
            .into_par_iter()
            .map(row)
            .reduce(|| ScaledSum::ZERO, |a, b| a + b)
    }
}

/// Evaluates `row(i)` for every `i` in `0..n`, preserving order.
pub(crate) fn map_rows<T, F>(n: usize, row: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..n).into_par_iter().map(row).collect()
}
