//! Deterministic inputs shared by the benchmarks.

use polyirls_core::simulate::{generate, Replicate};
use polyirls_core::{ContingencyTable, Estimator, SimConfig};

fn config(rho: f64, n: usize, s: usize, r: Option<usize>) -> SimConfig {
    SimConfig {
        rho,
        n,
        s,
        r,
        reps: 1,
        seed: 7,
        estimators: vec![Estimator::Irls],
    }
}

/// A simulated `s×s` table of `n` observations at correlation `rho`.
pub fn table(rho: f64, n: usize, s: usize, index: u64) -> ContingencyTable {
    match generate(&config(rho, n, s, Some(s)), index).expect("valid config") {
        Replicate::Table(t) => t,
        other => panic!("expected a table, got {other:?}"),
    }
}

/// Simulated ordinal codes and continuous values.
pub fn mixed(rho: f64, n: usize, s: usize, index: u64) -> (Vec<i64>, Vec<f64>) {
    match generate(&config(rho, n, s, None), index).expect("valid config") {
        Replicate::Mixed { x, y } => (x, y),
        other => panic!("expected mixed data, got {other:?}"),
    }
}
