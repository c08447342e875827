//! Numerical core for meta-learning low-dimensional parameter manifolds of
//! neural state-space models.
//!
//! Everything in this crate is `no_std` (with `alloc`): the Bouc-Wen
//! simulator and multisine generator that produce the meta-dataset, the
//! base architecture and its lifting / encoder networks with hand-written
//! adjoints, a small reverse-mode tape used as an independent gradient
//! route, the optimizers, and the fit metrics. IO, parallelism and the CLI
//! live in the `manifold-sysid` crate.
#![no_std]
#![forbid(unsafe_code)]
// `num_traits::Float` supplies libm math; when std is anywhere in the build
// graph its inherent f64 methods win and the import reads as unused.
#![allow(unused_imports)]
// Index loops mirror the math; `!(x > 0.0)` deliberately rejects NaN.
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod archmods;
pub mod boucwen;
pub mod diffcore;
mod error;
pub mod losses;
pub mod metrics;
pub mod optim;
pub mod rng;
pub mod signals;

pub use error::{Error, Result};
