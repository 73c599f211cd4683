//! Path-based capacity measures and sampling compression for positive
//! homogeneous feed-forward networks.

// `!(x > 0.0)` is used on purpose so NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod alias;
pub mod analysis;
pub mod error;
pub mod fixtures;
pub mod io;
pub mod linalg;
pub mod measures;
pub mod net;
pub mod par;
pub mod rng;
pub mod sampler;
pub mod scaled;
pub mod theory;
pub mod verify;

pub use error::{Error, Result};
pub use linalg::Matrix;
pub use measures::{InputWeighting, Mode, PathChain};
pub use net::{Activation, Dataset, Network, Sign};
pub use par::Exec;
pub use scaled::LogScaled;
