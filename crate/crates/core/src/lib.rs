//! Hierarchical multipartite entanglement measures.
//!
//! For a pure state on `n >= 2` finite-dimensional subsystems, the measures
//! here score every k-partition of the subsystems by the bipartite
//! concurrences of its blocks and aggregate over partitions:
//!
//! * k-GM, q-k-GM, alpha-k-GM: geometric mean of partition scores;
//! * k-ME, q-k-ME: minimum partition score.
//!
//! Mixed states are handled through convex-roof upper bounds
//! ([`bounds::convex_roof_upper_bound`]).

// `!(x > 0.0)` style checks are deliberate: they also reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod error;
pub mod io;
pub mod measures;
pub mod partitions;
pub mod random;
pub mod states;
pub mod sweep;
pub mod tensor;
pub mod verify;

pub use error::{Error, Result};
pub use measures::{evaluate, measure_value, Evaluator, Family, MeasureResult, MeasureSpec};
pub use partitions::{enumerate_k_partitions, stirling2, KPartition};
pub use tensor::{DensityMatrix, IndexSubset, PureState, Spectrum, C64};
