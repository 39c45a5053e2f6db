//! Self-contained numerical building blocks: a dense feed-forward network
//! with hand-rolled backprop, an Adam optimizer over flat parameter
//! vectors, and running first/second-moment statistics.
//!
//! Everything is `f64` and single-threaded. All functions are pure with
//! respect to explicit state; identical seeds and inputs produce bitwise
//! identical parameters.
//!
//! Shape mismatches panic: these are hot paths and a wrong dimension is a
//! programming error, not a recoverable condition.

mod adam;
mod mlp;
mod stats;

pub use adam::Adam;
pub use mlp::{Activation, ForwardTrace, Mlp};
pub use stats::RunningStats;
