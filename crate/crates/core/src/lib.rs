//! Single-commodity min-cost network flow solved by descending the
//! Lagrange dual with hop-local approximate Newton directions, where the
//! stepsize comes from a distributed backtracking line search (a per-node
//! Armijo rule followed by a min-consensus). A synchronous round-based
//! message-passing engine runs the same iteration as an explicit protocol
//! so the locality claims are enforced structurally rather than assumed.
//!
//! The numeric kernels are generic over the scalar type via [`scalar::Real`]
//! (`f32` or `f64`); [`ExpProblem`] is the concrete `f64` alias most
//! callers want.

pub mod direction;
pub mod dual;
pub mod error;
pub mod graph;
pub mod linalg;
pub mod linesearch;
pub mod problem;
pub mod scalar;
pub mod simnet;
pub mod solver;

pub use error::{Error, Result};
pub use graph::{DirectedGraph, Neighborhood};
pub use problem::{balanced_rate_vector, EdgeCost, ExpCapacityCost, FlowProblem, QuadraticCost};
pub use scalar::Real;

/// Double-precision flow problem with the exponential capacity cost.
pub type ExpProblem = FlowProblem<f64, ExpCapacityCost<f64>>;
/// Single-precision variant.
pub type ExpProblem32 = FlowProblem<f32, ExpCapacityCost<f32>>;
