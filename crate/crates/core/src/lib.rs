//! Downlink transmit power minimization under per-user QoS targets in
//! multi-cell Massive MIMO networks.
//!
//! The network is described by a [`system::NetworkScenario`]; closed-form
//! SINR expressions for maximum-ratio and zero-forcing precoding live in
//! [`system`]. Power allocations can be computed by a centralized linear
//! program ([`centralized`]) or by dual decomposition into one small
//! second-order cone program per base station ([`dual`]). Both rely on the
//! solvers in [`conic`].
//!
//! [`network`] draws random networks on a wrap-around grid, [`montecarlo`]
//! checks the closed-form SINR terms against simulated channels, and
//! [`experiment`] runs many drops and summarizes convergence and signaling.
//! Scenarios, tensors and results are read and written through [`io`].

// `!(x > 0.0)` is used on purpose so that NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod centralized;
pub mod conic;
pub mod dual;
pub mod error;
pub mod experiment;
pub mod io;
pub mod montecarlo;
pub mod network;
pub mod system;

pub use error::{Error, Result};
