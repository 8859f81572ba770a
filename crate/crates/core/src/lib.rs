//! Tabular off-policy return-based operators.
//!
//! The crate covers the general operator
//! `R Q = Q + E_mu[sum_t gamma^t (c_1 ... c_t) delta_t]` for importance
//! sampling, `Q^pi(lambda)`, Tree-backup and Retrace traces: exact dense
//! forms for verification, the sampled every-visit learner for control,
//! and diagnostics (contraction coefficients, spectral radii, commutation
//! defects, trace variance, inter-algorithm scores).
//!
//! State-action pairs are flattened as `x * n_actions + a` in every matrix
//! and table.

pub mod analysis;
pub mod enumeration;
pub mod error;
pub mod generators;
pub mod mdp;
pub mod online;
pub mod operators;
pub mod policy;
pub mod qfunction;
pub mod rng;
pub mod solve;
pub mod traces;

pub use error::{Error, ParseError, Result};
pub use mdp::Mdp;
pub use operators::{
    bellman_operator, bellman_optimality_operator, lambda_return_operator, transition_operator,
    LinearOperatorMatrix, OperatorKind,
};
pub use policy::Policy;
pub use qfunction::QFunction;
pub use rng::SplitMix64;
pub use solve::{exact_q_pi, exact_q_star};
pub use traces::{
    apply_expected_operator, contraction_diagnostics, control_matrix_a, trace_coefficient,
    trace_matrix, ContractionReport, TraceFamily, TraceSpec,
};
