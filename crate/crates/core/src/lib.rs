//! Totally asynchronous block-based multi-agent quadratic programming.
//!
//! Agents each own one block of the decision vector of
//! `min 1/2 x^T Q x + r^T x` and run independent gradient steps on it with
//! their own stepsize, using whatever (possibly very stale) values of other
//! blocks have reached them. The crate provides
//!
//! * [`qp`]: block-partitioned problems, minimizers and spectral quantities;
//! * [`block_norm`]: the weighted block-maximum norm and its nested sets;
//! * [`planner`]: stepsize and regularization intervals and error bounds;
//! * [`sim`]: a deterministic tick-based simulator of the asynchronous network;
//! * [`generate`]: random problems with prescribed `||Q||_2` and condition number;
//! * [`experiment`]: config-driven runs, file formats and plotting behind the `taqp` binary.

// `!(x > 0.0)` style checks are used on purpose: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod block_norm;
pub mod error;
pub mod experiment;
pub mod generate;
pub mod linalg;
pub mod planner;
pub mod qp;
pub mod rng;
pub mod sim;

pub use error::{Error, Result};
pub use linalg::Matrix;
pub use qp::{BlockPartition, QuadraticProblem};
