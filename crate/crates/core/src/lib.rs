//! Approximate message passing for compressed sensing, centralized and
//! distributed across a simulated sensor network.
//!
//! The distributed solver splits the measurement rows across `P` sensors and
//! computes each new estimate with one of three global-computation protocols
//! (GCAMP, Modified TA, or gather-everything). All three return exactly the
//! centralized estimate; the [`simnet`] ledger records what each one costs in
//! messages.

pub mod amp;
pub mod damp;
pub mod error;
pub mod experiment;
pub mod linalg;
pub mod problem;
pub mod protocols;
mod quantile;
pub mod simnet;

pub use amp::{
    amp_step, run_fixed_tau, sigma_estimate, soft_threshold, tau_max_from_alpha, tune_tau,
    AmpState, TunedSolution, TuningSchedule,
};
pub use damp::{run_damp, DampOptions, DampRunReport};
pub use error::{Error, Result};
pub use linalg::Matrix;
pub use problem::{generate_instance, partition_rows, Partition, ProblemInstance};
pub use protocols::{gcamp, modified_ta, naive_gather, nmn, GcampParams, ProtocolKind};
pub use simnet::{MessageLedger, Network, NodeId, Phase, PhaseFilter};
