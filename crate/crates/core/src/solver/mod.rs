//! Recovery of the block-sparse localization error: the convex block
//! basis-pursuit-denoising subproblem and the sequential convex programming
//! loop that relinearizes the measurement map around the running estimate.

mod bpdn;
mod scp;

pub use bpdn::{
    group_soft_threshold, solve_bpdn, solve_bpdn_warm, BpdnOptions, BpdnProblem, BpdnSolution, BpdnState, SolveStatus,
};
pub use scp::{
    default_support_threshold, identify_support, scp_recover, shrink_from_divisor, InnerStatus, IterationTrace, RecoveryResult,
    ScpParams, TRACE_CSV_HEADER,
};
