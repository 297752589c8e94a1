//! Fixtures shared by the benchmarks.

use funceq_core::corpus;
use funceq_core::operator::EquationSpec;

/// Default instance of a corpus entry at resolution `m`.
pub fn instance(name: &str, m: usize) -> EquationSpec {
    corpus::build(name, &[], m).expect("corpus defaults are valid").spec
}

/// Expressions of increasing size used by the parser benchmarks.
pub const EXPRESSIONS: [&str; 3] = [
    "(x+1)/2",
    "2*3*(1 - 2/(2+3)*x)^-1",
    "abs(mod1(3*x) - 0.5)*x^1.25 + floor(4*x)/4 - sign(x - 0.3)*(x^2 + 1)/(x + 2)",
];
