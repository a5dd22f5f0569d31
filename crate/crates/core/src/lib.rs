//! Distributed Hebbian Temporal Memory (DHTM) and a successor-representation
//! agent built on it.
//!
//! The crate is organized by subsystem:
//!
//! - [`sdr`]: sparse binary vectors and k-winners-take-all.
//! - [`encoder`]: spatial pooler turning event images into SDRs, plus a linear decoder.
//! - [`tm`]: the temporal memory itself (segments, belief propagation, Hebbian learning).
//! - [`oracle`]: exact dense HMM filtering and closed-form successor representations.
//! - [`sr`]: successor representation learning, value readout and surprise.
//! - [`agent`]: the decision loop tying encoder, memory, SR and a softmax policy together.
//! - [`env`]: a small pinball-like partially observable environment.
//! - [`harness`]: experiment configuration, trial orchestration, CSV/SVG output and checkpoints.
//!
//! Runnable walkthroughs of each capability live in the crate's `examples/`.

// negated comparisons are deliberate: they also reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod agent;
mod codec;
pub mod encoder;
pub mod env;
pub mod error;
pub mod harness;
pub mod oracle;
pub mod prob;
pub mod sdr;
pub mod seed;
pub mod sr;
pub mod tm;

pub use error::{Error, Result};
