//! Solver and verifier for the linear functional equation
//! `φ(x) = Σ_n g_n(x)·φ(f_n(x)) + g(x)` on `[0, 1]`.

pub mod corpus;
pub mod error;
pub mod expr;
pub mod funcrep;
pub mod hypotheses;
pub mod operator;
pub mod quadrature;
pub mod solver;

pub use error::{Error, Result};
pub use expr::{differentiate, parse, Expr, ParseError};
pub use funcrep::{GridFunction, DEFAULT_RESOLUTION};
pub use hypotheses::{HypothesisReport, LocalContraction, WitnessRow};
pub use operator::{verify_change_of_variables, ChangeOfVariables, EquationSpec, Inhomogeneity, MapSpec};
pub use solver::{neumann_solve, picard_solve, SolveResult, Status};
