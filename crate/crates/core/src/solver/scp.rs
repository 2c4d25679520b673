//! Sequential convex programming for the nonlinear recovery problem.

use serde::{Deserialize, Serialize};

use super::bpdn::{solve_bpdn_warm, BpdnOptions, BpdnProblem, BpdnState, SolveStatus};
use crate::error::{Error, Result};
use crate::measurement::{residual_vector, MeasurementSet};
use crate::model::{BlockVector, Configuration, SensorGraph};
use crate::rigidity::{rigidity_matrix, rigidity_report};

/// Converts a slack-reduction value to a shrink factor in `(0, 1]`.
///
/// Values above one are read as divisors and inverted; values in `(0, 1]`
/// pass through.
pub fn shrink_from_divisor(rho: f64) -> Result<f64> {
    if !(rho > 0.0) || !rho.is_finite() {
        return Err(Error::InvalidArgument(format!("slack reduction factor must be positive, got {rho}")));
    }
    Ok(if rho > 1.0 { 1.0 / rho } else { rho })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScpParams {
    /// `N`: cap on the number of convex subproblems.
    pub max_iterations: usize,
    /// `eps_0`
    pub initial_slack: f64,
    /// Multiplier applied to the slack after every iteration that moved.
    /// Values above one are read as their reciprocal.
    pub shrink: f64,
    /// `delta`: stop once a step is shorter than this.
    pub step_tolerance: f64,
    /// Blocks with a larger norm form the identified support. `None` uses
    /// [`default_support_threshold`].
    pub support_threshold: Option<f64>,
    pub warm_start: bool,
    pub inner: BpdnOptions,
}

impl Default for ScpParams {
    fn default() -> Self {
        ScpParams {
            max_iterations: 4,
            initial_slack: 4.0,
            shrink: 1.0 / 3.0,
            step_tolerance: 1e-6,
            support_threshold: None,
            warm_start: true,
            inner: BpdnOptions::default(),
        }
    }
}

impl ScpParams {
    fn effective_shrink(&self) -> Result<f64> {
        shrink_from_divisor(self.shrink)
    }

    fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::InvalidArgument("at least one iteration is required".into()));
        }
        if !(self.initial_slack >= 0.0) {
            return Err(Error::InvalidArgument(format!("initial slack must be non-negative, got {}", self.initial_slack)));
        }
        if !(self.step_tolerance >= 0.0) {
            return Err(Error::InvalidArgument(format!("step tolerance must be non-negative, got {}", self.step_tolerance)));
        }
        if let Some(t) = self.support_threshold {
            if !(t >= 0.0) {
                return Err(Error::InvalidArgument(format!("support threshold must be non-negative, got {t}")));
            }
        }
        self.effective_shrink().map(|_| ())
    }
}

/// Subproblem outcome for one iteration.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InnerStatus {
    Converged,
    IterationCap,
    Infeasible,
}

impl From<SolveStatus> for InnerStatus {
    fn from(s: SolveStatus) -> Self {
        match s {
            SolveStatus::Converged => InnerStatus::Converged,
            SolveStatus::IterationCap => InnerStatus::IterationCap,
        }
    }
}

impl InnerStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            InnerStatus::Converged => "converged",
            InnerStatus::IterationCap => "iteration_cap",
            InnerStatus::Infeasible => "infeasible",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationTrace {
    pub iteration: usize,
    /// `||x_tilde||_2`; zero when the subproblem failed.
    pub step_norm: f64,
    /// Slack used by this iteration's subproblem.
    pub slack: f64,
    pub inner_iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub status: InnerStatus,
    /// `||x_k||_{2,1}` after the update.
    pub objective: f64,
}

pub const TRACE_CSV_HEADER: &str =
    "iteration,step_norm,slack,inner_iterations,primal_residual,dual_residual,status,objective";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecoveryResult {
    pub x_star: BlockVector,
    /// `D_hat`, ascending.
    pub support: Vec<usize>,
    pub support_threshold: f64,
    pub iterations_used: usize,
    pub trace: Vec<IterationTrace>,
    /// True when the loop stopped on the step-length test.
    pub converged: bool,
    /// Set when a subproblem could not be solved; `x_star` then holds the
    /// last successful iterate.
    pub failure: Option<String>,
    /// Iterations after the first in which `||x_k||_{2,1}` grew.
    pub objective_increases: usize,
    pub warnings: Vec<String>,
}

impl RecoveryResult {
    pub fn trace_csv(&self) -> String {
        let mut out = String::from("# sparseloc solver trace v1\n");
        out.push_str(TRACE_CSV_HEADER);
        out.push('\n');
        for t in &self.trace {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                t.iteration,
                t.step_norm,
                t.slack,
                t.inner_iterations,
                t.primal_residual,
                t.dual_residual,
                t.status.as_str(),
                t.objective
            ));
        }
        out
    }

    pub fn succeeded(&self) -> bool {
        self.failure.is_none()
    }
}

/// `1e-3 * max(1, largest block norm)`.
pub fn default_support_threshold(x: &BlockVector) -> f64 {
    1e-3 * x.block_norms().into_iter().fold(1.0, f64::max)
}

/// Agents whose error block has norm strictly above `threshold`. A zero
/// threshold keeps any numerical residue and is only useful for debugging.
pub fn identify_support(x: &BlockVector, threshold: f64) -> Vec<usize> {
    x.block_norms().iter().enumerate().filter(|(_, &n)| n > threshold).map(|(i, _)| i).collect()
}

/// Recovers the localization error `x` with `p_hat + x` consistent with `y`.
///
/// Starting from `x = 0`, every iteration relinearizes the measurement map
/// at `p_hat + x`, solves
/// `min ||x + x_tilde||_{2,1}` s.t. `||z - R x_tilde|| <= eps`, and
/// adds the step. The loop ends when a step is shorter than the tolerance;
/// otherwise the slack is multiplied by the shrink factor.
pub fn scp_recover(
    p_hat: &Configuration,
    y: &MeasurementSet,
    graph: &SensorGraph,
    params: &ScpParams,
) -> Result<RecoveryResult> {
    params.validate()?;
    let shrink = params.effective_shrink()?;
    let d = p_hat.dim();
    let n = p_hat.num_agents();
    if y.dim != d {
        return Err(Error::LengthMismatch { expected: d, actual: y.dim });
    }
    if graph.num_agents() != n {
        return Err(Error::LengthMismatch { expected: n, actual: graph.num_agents() });
    }
    let expected_len = graph.num_edges() * y.kind.rows_per_edge(d);
    if y.values.len() != expected_len {
        return Err(Error::LengthMismatch { expected: expected_len, actual: y.values.len() });
    }

    let mut warnings = Vec::new();
    let mut x = BlockVector::zeros(d, n);
    let mut eps = params.initial_slack;
    let mut trace = Vec::new();
    let mut state: Option<BpdnState> = None;
    let mut converged = false;
    let mut failure = None;

    for k in 1..=params.max_iterations {
        let estimate = p_hat.displaced(&x)?;
        let step = residual_vector(y, &estimate, graph)
            .and_then(|z| Ok((z, rigidity_matrix(y.kind, &estimate, graph)?)))
            .and_then(|(z, r)| {
                if k == 1 {
                    let report = rigidity_report(&r);
                    if !report.is_infinitesimally_rigid {
                        warnings.push(format!(
                            "estimate is not infinitesimally rigid (rank {} of {}); recovery may not be unique",
                            report.rank, report.maximal_rank
                        ));
                    }
                }
                let problem = BpdnProblem::new(r.matrix, nalgebra::DVector::from_vec(z), eps, x.clone())?;
                let warm = if params.warm_start { state.as_ref() } else { None };
                solve_bpdn_warm(&problem, &params.inner, warm)
            });
        let (solution, next_state) = match step {
            Ok(v) => v,
            Err(e) => {
                trace.push(IterationTrace {
                    iteration: k,
                    step_norm: 0.0,
                    slack: eps,
                    inner_iterations: 0,
                    primal_residual: f64::NAN,
                    dual_residual: f64::NAN,
                    status: InnerStatus::Infeasible,
                    objective: x.block_norm(1.0),
                });
                let hint = if matches!(e, Error::Infeasible { .. }) { "; a larger initial slack may help" } else { "" };
                failure = Some(format!("iteration {k}: {e}{hint}"));
                break;
            }
        };
        state = Some(next_state);
        let step_norm = solution.step.norm2();
        x = solution.w;
        trace.push(IterationTrace {
            iteration: k,
            step_norm,
            slack: solution.epsilon,
            inner_iterations: solution.iterations,
            primal_residual: solution.primal_residual,
            dual_residual: solution.dual_residual,
            status: solution.status.into(),
            objective: x.block_norm(1.0),
        });
        if step_norm < params.step_tolerance {
            converged = true;
            break;
        }
        eps *= shrink;
    }

    let objective_increases =
        trace.windows(2).skip(1).filter(|w| w[1].objective > w[0].objective * (1.0 + 1e-12)).count();
    let threshold = params.support_threshold.unwrap_or_else(|| default_support_threshold(&x));
    Ok(RecoveryResult {
        support: identify_support(&x, threshold),
        support_threshold: threshold,
        iterations_used: trace.len(),
        x_star: x,
        trace,
        converged,
        failure,
        objective_increases,
        warnings,
    })
}
