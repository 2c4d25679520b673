//! Parameter sweeps over a base scenario and their CSV output.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{run_trial_on, Network, ScenarioConfig, TrialRecord};
use crate::error::{Error, Result};
use crate::measurement::FaultMode;
use crate::solver::shrink_from_divisor;

/// Slack-reduction values for integer noise radii 0 through 5, in the
/// "divide by" convention.
const NOISE_SCHEDULE: [f64; 6] = [3.0, 2.0, 1.5, 1.5, 1.3, 1.2];

/// Shrink factor for noise radius `eps`, or `None` when `eps` is not one
/// of 0..=5.
pub fn noise_shrink_schedule(eps: f64) -> Option<f64> {
    let k = eps.round();
    if (eps - k).abs() > 1e-12 || !(0.0..=5.0).contains(&k) {
        return None;
    }
    shrink_from_divisor(NOISE_SCHEDULE[k as usize]).ok()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "axis", rename_all = "snake_case")]
pub enum SweepAxis {
    /// Every fault count under every correlation mode. With
    /// `slack_per_fault`, the initial slack becomes that value times the
    /// fault count plus the noise radius.
    FaultCount {
        counts: Vec<usize>,
        modes: Vec<FaultMode>,
        #[serde(default)]
        slack_per_fault: Option<f64>,
    },
    /// Noise-by-kappa grid. With `shrink_schedule`, the initial slack becomes
    /// the base slack plus `eps` and the shrink factor follows
    /// [`noise_shrink_schedule`].
    NoiseKappa { noise: Vec<f64>, kappa: Vec<f64>, shrink_schedule: bool },
    /// Cap on SCP iterations.
    Iterations { caps: Vec<usize> },
    Correlation { modes: Vec<FaultMode> },
}

impl SweepAxis {
    pub fn default_fault_count() -> Self {
        SweepAxis::FaultCount {
            counts: (1..=6).collect(),
            modes: vec![FaultMode::Uncorrelated, FaultMode::FullyCorrelated],
            slack_per_fault: Some(1.0),
        }
    }

    pub fn default_noise_kappa() -> Self {
        SweepAxis::NoiseKappa {
            noise: (0..=5).map(f64::from).collect(),
            kappa: vec![0.0, 0.3, 0.6, 0.9],
            shrink_schedule: true,
        }
    }

    pub fn default_iterations() -> Self {
        SweepAxis::Iterations { caps: (1..=8).collect() }
    }

    pub fn default_correlation() -> Self {
        SweepAxis::Correlation { modes: vec![FaultMode::Uncorrelated, FaultMode::FullyCorrelated] }
    }

    /// Default sweep for an axis name: `fault-count`, `noise-kappa`,
    /// `iterations` or `correlation`.
    pub fn by_name(name: &str) -> Result<Self> {
        match name.replace('_', "-").as_str() {
            "fault-count" => Ok(Self::default_fault_count()),
            "noise-kappa" => Ok(Self::default_noise_kappa()),
            "iterations" => Ok(Self::default_iterations()),
            "correlation" => Ok(Self::default_correlation()),
            other => Err(Error::InvalidArgument(format!("unknown sweep axis {other:?}"))),
        }
    }

    /// One scenario per sweep point, in row-major order of the axis lists.
    pub fn expand(&self, base: &ScenarioConfig) -> Result<Vec<(SweepPoint, ScenarioConfig)>> {
        let mut out = Vec::new();
        let mut push = |sc: ScenarioConfig| -> Result<()> {
            sc.validate()?;
            out.push((SweepPoint::of(&sc), sc));
            Ok(())
        };
        match self {
            SweepAxis::FaultCount { counts, modes, slack_per_fault } => {
                for &mode in modes {
                    for &count in counts {
                        let mut sc = base.clone();
                        sc.faults.count = count;
                        sc.faults.options.mode = mode;
                        if let Some(per_fault) = slack_per_fault {
                            sc.solver.initial_slack = per_fault * count as f64 + sc.noise;
                        }
                        push(sc)?;
                    }
                }
            }
            SweepAxis::NoiseKappa { noise, kappa, shrink_schedule } => {
                for &eps in noise {
                    for &k in kappa {
                        let mut sc = base.clone();
                        sc.noise = eps;
                        sc.kappa = k;
                        if *shrink_schedule {
                            sc.solver.shrink = noise_shrink_schedule(eps).ok_or_else(|| {
                                Error::InvalidArgument(format!("no scheduled shrink factor for noise {eps}"))
                            })?;
                            sc.solver.initial_slack = base.solver.initial_slack + eps;
                        }
                        push(sc)?;
                    }
                }
            }
            SweepAxis::Iterations { caps } => {
                for &cap in caps {
                    let mut sc = base.clone();
                    sc.solver.max_iterations = cap;
                    push(sc)?;
                }
            }
            SweepAxis::Correlation { modes } => {
                for &mode in modes {
                    let mut sc = base.clone();
                    sc.faults.options.mode = mode;
                    push(sc)?;
                }
            }
        }
        Ok(out)
    }
}

/// Parameters that identify a sweep point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub fault_count: usize,
    pub mode: FaultMode,
    pub noise: f64,
    pub kappa: f64,
    pub max_iterations: usize,
    pub initial_slack: f64,
    pub shrink: f64,
}

impl SweepPoint {
    fn of(sc: &ScenarioConfig) -> Self {
        SweepPoint {
            fault_count: sc.faults.count,
            mode: sc.faults.options.mode,
            noise: sc.noise,
            kappa: sc.kappa,
            max_iterations: sc.solver.max_iterations,
            initial_slack: sc.solver.initial_slack,
            shrink: sc.solver.shrink,
        }
    }

    fn csv_fields(&self) -> String {
        let mode = match self.mode {
            FaultMode::Uncorrelated => "uncorrelated",
            FaultMode::FullyCorrelated => "fully_correlated",
        };
        format!(
            "{},{},{},{},{},{},{}",
            self.fault_count, mode, self.noise, self.kappa, self.max_iterations, self.initial_slack, self.shrink
        )
    }
}

/// Summary of one sweep point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub trials: usize,
    pub identified: usize,
    pub identification_rate: f64,
    /// Trials with a defined relative error.
    pub defined: usize,
    pub mean_relative_error: f64,
    /// Sample standard deviation (zero for a single defined trial).
    pub std_relative_error: f64,
    pub median_relative_error: f64,
    /// Trials whose recovery reported a solver failure.
    pub failures: usize,
}

/// Folds trial records, in order, into an [`Aggregate`].
pub fn aggregate(records: &[TrialRecord]) -> Aggregate {
    let trials = records.len();
    let identified = records.iter().filter(|r| r.identified).count();
    let errors: Vec<f64> = records.iter().filter_map(|r| r.relative_error).collect();
    let defined = errors.len();
    let mean = if defined > 0 { errors.iter().sum::<f64>() / defined as f64 } else { f64::NAN };
    let std = match defined {
        0 => f64::NAN,
        1 => 0.0,
        k => (errors.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>() / (k - 1) as f64).sqrt(),
    };
    let median = if defined > 0 {
        let mut sorted = errors.clone();
        sorted.sort_by(f64::total_cmp);
        if defined % 2 == 1 {
            sorted[defined / 2]
        } else {
            0.5 * (sorted[defined / 2 - 1] + sorted[defined / 2])
        }
    } else {
        f64::NAN
    };
    Aggregate {
        trials,
        identified,
        identification_rate: if trials > 0 { identified as f64 / trials as f64 } else { 0.0 },
        defined,
        mean_relative_error: mean,
        std_relative_error: std,
        median_relative_error: median,
        failures: records.iter().filter(|r| r.status != "ok").count(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResults {
    pub points: Vec<SweepPoint>,
    /// `records[k]` holds the trials of `points[k]`, ordered by trial index.
    pub records: Vec<Vec<TrialRecord>>,
    pub aggregates: Vec<Aggregate>,
}

pub const TRIAL_CSV_HEADER: &str = "point,fault_count,mode,noise,kappa,max_iterations,initial_slack,shrink,\
trial,seed,true_support,identified_support,identified,relative_error,iterations,converged,status";

pub const AGGREGATE_CSV_HEADER: &str = "point,fault_count,mode,noise,kappa,max_iterations,initial_slack,shrink,\
trials,identified,identification_rate,defined,mean_relative_error,std_relative_error,median_relative_error,failures";

fn join(set: &[usize]) -> String {
    set.iter().map(usize::to_string).collect::<Vec<_>>().join(";")
}

fn csv_escape(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

impl SweepResults {
    /// One row per (point, trial). Wall time is omitted so that repeated
    /// runs give identical bytes.
    pub fn trials_csv(&self) -> String {
        let mut out = String::from("# sparseloc trials v1\n");
        out.push_str(TRIAL_CSV_HEADER);
        out.push('\n');
        for (k, (point, records)) in self.points.iter().zip(&self.records).enumerate() {
            let fields = point.csv_fields();
            for r in records {
                let rel = r.relative_error.map_or_else(|| "undefined".to_string(), |e| e.to_string());
                out.push_str(&format!(
                    "{k},{fields},{},{},{},{},{},{rel},{},{},{}\n",
                    r.trial,
                    r.seed,
                    join(&r.true_support),
                    join(&r.identified_support),
                    r.identified,
                    r.iterations,
                    r.converged,
                    csv_escape(&r.status)
                ));
            }
        }
        out
    }

    pub fn aggregate_csv(&self) -> String {
        let mut out = String::from("# sparseloc aggregate v1\n");
        out.push_str(AGGREGATE_CSV_HEADER);
        out.push('\n');
        for (k, (point, a)) in self.points.iter().zip(&self.aggregates).enumerate() {
            out.push_str(&format!(
                "{k},{},{},{},{},{},{},{},{},{}\n",
                point.csv_fields(),
                a.trials,
                a.identified,
                a.identification_rate,
                a.defined,
                a.mean_relative_error,
                a.std_relative_error,
                a.median_relative_error,
                a.failures
            ));
        }
        out
    }
}

/// Runs `base.trials` trials at every point of `axis` on `jobs` worker
/// threads (zero lets the pool choose). Trial `t` uses the same seed at
/// every point. Unless the scenario regenerates networks, one network is
/// resolved for the whole sweep.
pub fn monte_carlo_sweep(base: &ScenarioConfig, axis: &SweepAxis, jobs: usize) -> Result<SweepResults> {
    base.validate()?;
    let expanded = axis.expand(base)?;
    let shared = if base.regenerate_network { None } else { Some(base.network_for_trial(0)?) };

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;

    let tasks: Vec<(usize, usize)> =
        (0..expanded.len()).flat_map(|p| (0..base.trials).map(move |t| (p, t))).collect();
    let run = |&(p, t): &(usize, usize)| -> Result<TrialRecord> {
        let sc = &expanded[p].1;
        let owned: Network;
        let net = match &shared {
            Some(n) => n,
            None => {
                owned = sc.network_for_trial(t)?;
                &owned
            }
        };
        run_trial_on(sc, net, t)
    };
    let flat: Vec<TrialRecord> = pool.install(|| tasks.par_iter().map(run).collect::<Result<Vec<_>>>())?;

    let mut records: Vec<Vec<TrialRecord>> = Vec::with_capacity(expanded.len());
    let mut it = flat.into_iter();
    for _ in 0..expanded.len() {
        records.push(it.by_ref().take(base.trials).collect());
    }
    let aggregates = records.iter().map(|r| aggregate(r)).collect();
    Ok(SweepResults { points: expanded.into_iter().map(|(p, _)| p).collect(), records, aggregates })
}
