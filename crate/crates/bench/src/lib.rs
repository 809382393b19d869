//! Fixtures shared by the benchmarks.

use ebfv::harness::{manufactured_fields, Problem, DEFAULT_SEED};
use ebfv::GeometryName;

/// Manufactured convergence problem on the ellipse.
pub fn ellipse_problem(order: usize, n: usize) -> Problem {
    Problem::build(
        GeometryName::Ellipse,
        order,
        n,
        manufactured_fields(DEFAULT_SEED, 1.0, 1.0),
        false,
    )
    .expect("benchmark problem builds")
}

/// `(order, n)` pairs measured by every benchmark group.
pub const CASES: [(usize, usize); 4] = [(2, 64), (4, 64), (6, 64), (4, 128)];
