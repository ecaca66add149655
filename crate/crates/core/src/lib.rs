pub mod evaluation;
pub mod expr;

pub use expr::{Expr, Node, Op, Scalar};

/// Double-precision evaluation result.
pub type EvalResult = expr::EvalResult<f64>;
/// Single-precision evaluation result.
pub type EvalResult32 = expr::EvalResult<f32>;
pub mod fit;
pub mod forge;
pub mod session;
pub mod solver;
pub mod system;
