//! Soft-boundary Metropolis-Hastings for exponentially weighted aggregation
//! over sparse linear models, plus an exact small-p oracle that enumerates
//! the state space to certify spectral-gap, path-loading, and mixing-time
//! bounds.
//!
//! Module map:
//!
//! * [`subset`]: bit-mask states, neighbors, enumeration.
//! * [`instance`]: problem instances, column normalization, chain constants.
//! * [`projection`]: incremental projections onto column spans.
//! * [`posterior`]: log-weights, log-ratios, the exact distribution.
//! * [`proposal`]: proposal kernel, MH step, the sampler.
//! * [`initializer`]: thresholded lasso and its guarantee checks.
//! * [`paths`]: the parent map, path tree, loadings, and the path inequalities.
//! * [`oracle`]: exact transition matrices, spectra, TV decay, events.
//! * [`harness`]: data generation and end-to-end pipelines.
//! * [`report`]: bound ledgers and output writers.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // negated comparisons reject NaN

pub mod error;
pub mod harness;
pub mod initializer;
pub mod instance;
pub mod oracle;
pub mod paths;
pub mod posterior;
pub mod projection;
pub mod proposal;
pub mod report;
pub mod rng;
pub mod subset;

pub use error::{Error, Result};
pub use harness::{generate_instance, run_pipeline, run_seed, ExperimentConfig, Generated, Stages};
pub use initializer::{run_initializer, LassoConfig};
pub use instance::{normalize_columns, ChainConfig, ProblemInstance};
pub use oracle::{build_exact_chain, ExactChain};
pub use paths::{analyze_paths, build_tree, GTree};
pub use posterior::{exact_distribution, log_ratio, log_weight, ExactPosterior, LogWeight};
pub use projection::{restricted_nu, ProjectionState};
pub use proposal::{mh_step, run_chain, ChainTrace, ProposalKernel, ProposalMove, Sampler};
pub use report::{Ledger, Verdict};
pub use subset::{enumerate_states, Subset};
