//! Exact expected time of timed probabilistic workflow nets.
//!
//! A net is explored for the structural properties the analysis relies on
//! (1-safety, confusion-freeness, soundness), then the earliest-first
//! scheduler's finite Markov chain over abstract timestamp vectors is built
//! and its reward equations are solved exactly.
//!
//! ```
//! use tpwn_core::{analysis::expected_time, samples::example_net, ratio, ExpectedTime};
//!
//! let et = expected_time(&example_net()).unwrap();
//! assert_eq!(et, ExpectedTime::Finite(ratio(47, 5)));
//! ```

pub mod analysis;
pub mod chain;
pub mod generate;
pub mod io;
pub mod linear;
pub mod net;
pub mod oracle;
pub mod pert;
pub mod samples;
pub mod scalar;
pub mod structure;
pub mod timing;

pub use analysis::{expected_time, ExpectedTime};
pub use net::{Marking, NetBuilder, WorkflowNet};
pub use scalar::Scalar;

/// Exact arbitrary-precision rational.
pub type Rational = num_rational::BigRational;

pub type ExactSystem = linear::LinearSystem<Rational>;
pub type ExactSolution = linear::Solution<Rational>;
pub type F64System = linear::LinearSystem<f64>;
pub type F64Solution = linear::Solution<f64>;
pub type F32System = linear::LinearSystem<f32>;
pub type F32Solution = linear::Solution<f32>;

/// `n/d` as a [`Rational`]. Panics if `d == 0`.
pub fn ratio(n: i64, d: i64) -> Rational {
    Rational::new(n.into(), d.into())
}
