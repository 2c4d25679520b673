//! Scenario assembly and Monte Carlo experiments.
//!
//! A trial draws a fault set, injects cube-uniform localization errors,
//! perturbs the remaining estimates on a `kappa`-sphere, synthesizes
//! measurements with `eps`-sphere noise, runs the recovery and scores it.
//! Every random draw of trial `t` comes from one generator seeded with
//! [`mix_seed`]`(base_seed, t)`, so a trial can be replayed in isolation.

mod sweep;

pub use sweep::{
    aggregate, monte_carlo_sweep, noise_shrink_schedule, Aggregate, SweepAxis, SweepPoint, SweepResults,
    AGGREGATE_CSV_HEADER, TRIAL_CSV_HEADER,
};

use std::path::PathBuf;
use std::time::Instant;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measurement::{add_sphere_noise_with, inject_faults_with, measure, perturb_estimates_with};
use crate::measurement::{FaultOptions, MeasurementKind, MeasurementSet};
use crate::model::{
    complement, geometric_graph, random_geometric_network, Configuration, ErrorState, NetworkDocument, SensorGraph,
};
use crate::rigidity::analyze_rigidity;
use crate::solver::{scp_recover, ScpParams};

/// SplitMix64 finalizer applied to `base + (index + 1) * 0x9E3779B97F4A7C15`.
pub fn mix_seed(base: u64, index: u64) -> u64 {
    let mut z = base.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Named network presets.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    /// 13 agents in `[0, 10]^3`, radius chosen so that the 36 shortest
    /// pairs are edges, redrawn until the distance rigidity matrix has
    /// rank 33.
    Paperlike13,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum NetworkSource {
    Generated { n: usize, dim: usize, radius: f64, box_side: f64, seed: u64 },
    Preset { name: Preset, seed: u64 },
    File { path: PathBuf },
}

impl NetworkSource {
    fn seed(&self) -> Option<u64> {
        match self {
            NetworkSource::Generated { seed, .. } | NetworkSource::Preset { seed, .. } => Some(*seed),
            NetworkSource::File { .. } => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Network {
    pub configuration: Configuration,
    pub graph: SensorGraph,
}

/// Maximum number of redraws when looking for a rigid generated network.
pub const MAX_NETWORK_ATTEMPTS: u64 = 10_000;

/// Number of edges of the `paperlike13` preset.
pub const PAPERLIKE_EDGES: usize = 36;

/// The `paperlike13` preset for `seed`.
pub fn paperlike13(seed: u64) -> Result<Network> {
    for attempt in 0..MAX_NETWORK_ATTEMPTS {
        let (cfg, _) = random_geometric_network(13, 3, 1.0, 10.0, mix_seed(seed, attempt))?;
        let mut dists: Vec<f64> = Vec::with_capacity(78);
        for i in 0..13 {
            for j in i + 1..13 {
                dists.push(crate::model::distance(cfg.point(i), cfg.point(j)));
            }
        }
        dists.sort_by(f64::total_cmp);
        let graph = geometric_graph(&cfg, dists[PAPERLIKE_EDGES - 1]);
        if !(34..=38).contains(&graph.num_edges()) {
            continue;
        }
        let report = analyze_rigidity(MeasurementKind::Distance, &cfg, &graph)?;
        if report.rank == 33 {
            return Ok(Network { configuration: cfg, graph });
        }
    }
    Err(Error::Generation(format!("no rigid paperlike13 network after {MAX_NETWORK_ATTEMPTS} draws")))
}

/// Builds the network described by `source`, redrawing generated networks
/// until they are infinitesimally rigid for `kind`. `seed` replaces the
/// source's own seed when given.
pub fn resolve_network(source: &NetworkSource, kind: MeasurementKind, seed: Option<u64>) -> Result<Network> {
    let net = match source {
        NetworkSource::Generated { n, dim, radius, box_side, seed: own } => {
            let base = seed.unwrap_or(*own);
            let mut found = None;
            for attempt in 0..MAX_NETWORK_ATTEMPTS {
                let s = if attempt == 0 { base } else { mix_seed(base, attempt) };
                let (cfg, graph) = random_geometric_network(*n, *dim, *radius, *box_side, s)?;
                if analyze_rigidity(kind, &cfg, &graph)?.is_infinitesimally_rigid {
                    found = Some(Network { configuration: cfg, graph });
                    break;
                }
            }
            found.ok_or_else(|| Error::Generation(format!("no rigid network after {MAX_NETWORK_ATTEMPTS} draws")))?
        }
        NetworkSource::Preset { name: Preset::Paperlike13, seed: own } => {
            let net = paperlike13(seed.unwrap_or(*own))?;
            if kind != MeasurementKind::Distance {
                let report = analyze_rigidity(kind, &net.configuration, &net.graph)?;
                if !report.is_infinitesimally_rigid {
                    return Err(Error::NotRigid { rank: report.rank, max_rank: report.maximal_rank });
                }
            }
            net
        }
        NetworkSource::File { path } => {
            let text = std::fs::read_to_string(path)?;
            let (cfg, graph) = NetworkDocument::from_json(&text)?.into_network()?;
            let report = analyze_rigidity(kind, &cfg, &graph)?;
            if !report.is_infinitesimally_rigid {
                return Err(Error::NotRigid { rank: report.rank, max_rank: report.maximal_rank });
            }
            Network { configuration: cfg, graph }
        }
    };
    Ok(net)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FaultSpec {
    /// `|D|`
    pub count: usize,
    #[serde(flatten)]
    pub options: FaultOptions,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub network: NetworkSource,
    pub kind: MeasurementKind,
    pub faults: FaultSpec,
    /// `eps`: radius of the measurement noise sphere.
    #[serde(default)]
    pub noise: f64,
    /// `kappa`: radius of the estimate perturbation for agents outside `D`.
    #[serde(default)]
    pub kappa: f64,
    #[serde(default)]
    pub solver: ScpParams,
    pub trials: usize,
    pub base_seed: u64,
    /// Draw a fresh network for every trial instead of one per sweep.
    #[serde(default)]
    pub regenerate_network: bool,
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let sc: ScenarioConfig = serde_json::from_str(text)?;
        sc.validate()?;
        Ok(sc)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::InvalidArgument("trials must be at least 1".into()));
        }
        if !(self.noise >= 0.0) || !(self.kappa >= 0.0) {
            return Err(Error::InvalidArgument("noise and kappa must be non-negative".into()));
        }
        if let NetworkSource::Generated { n, .. } = self.network {
            self.check_fault_count(n)?;
        }
        if let NetworkSource::Preset { .. } = self.network {
            self.check_fault_count(13)?;
        }
        Ok(())
    }

    fn check_fault_count(&self, n: usize) -> Result<()> {
        if self.faults.count >= n {
            return Err(Error::InvalidArgument(format!(
                "fault count {} must be below the number of agents {n}",
                self.faults.count
            )));
        }
        Ok(())
    }

    /// Network used by trial `trial_index`.
    pub fn network_for_trial(&self, trial_index: usize) -> Result<Network> {
        let seed = if self.regenerate_network {
            self.network.seed().map(|s| mix_seed(s, trial_index as u64))
        } else {
            None
        };
        resolve_network(&self.network, self.kind, seed)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub seed: u64,
    /// `D`
    pub true_support: Vec<usize>,
    /// `D_hat`
    pub identified_support: Vec<usize>,
    /// `D_hat == D`
    pub identified: bool,
    /// `||x - x*|| / ||x||`. `None` stands for the "undefined" case of a
    /// zero true error with a non-zero recovery.
    pub relative_error: Option<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// `ok`, or the inner solver's failure message.
    pub status: String,
    /// Wall-clock time in seconds. Not written to CSV output.
    pub wall_time: f64,
}

/// Runs trial `trial_index` of the scenario.
pub fn run_trial(sc: &ScenarioConfig, trial_index: usize) -> Result<TrialRecord> {
    sc.validate()?;
    let net = sc.network_for_trial(trial_index)?;
    run_trial_on(sc, &net, trial_index)
}

/// Inputs of one trial: the planted errors and the measurements.
#[derive(Clone, Debug, PartialEq)]
pub struct TrialData {
    pub seed: u64,
    /// Estimates, true error and fault set.
    pub state: ErrorState,
    pub measurements: MeasurementSet,
}

/// Draws the fault set, errors, estimate perturbations and measurement noise
/// of trial `trial_index`, in that order, from one seeded generator.
pub fn prepare_trial(sc: &ScenarioConfig, net: &Network, trial_index: usize) -> Result<TrialData> {
    let cfg = &net.configuration;
    let n = cfg.num_agents();
    sc.check_fault_count(n)?;
    let seed = mix_seed(sc.base_seed, trial_index as u64);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut faulty = sample(&mut rng, n, sc.faults.count).into_vec();
    faulty.sort_unstable();
    let mut state = inject_faults_with(&mut rng, cfg, &faulty, sc.faults.options)?;
    if sc.kappa > 0.0 {
        perturb_estimates_with(&mut rng, cfg, &mut state, &complement(&faulty, n), sc.kappa)?;
    }
    let mut measurements = measure(sc.kind, cfg, &net.graph)?;
    if sc.noise > 0.0 {
        add_sphere_noise_with(&mut rng, &mut measurements, sc.noise);
    }
    Ok(TrialData { seed, state, measurements })
}

/// [`run_trial`] on an already-resolved network.
pub fn run_trial_on(sc: &ScenarioConfig, net: &Network, trial_index: usize) -> Result<TrialRecord> {
    let start = Instant::now();
    let TrialData { seed, state, measurements: y } = prepare_trial(sc, net, trial_index)?;
    let faulty = state.fault_set.clone();
    let result = scp_recover(&state.estimates, &y, &net.graph, &sc.solver)?;
    let x_norm = state.true_error.norm2();
    let relative_error = if x_norm > 0.0 {
        Some((&state.true_error - &result.x_star).norm2() / x_norm)
    } else if result.x_star.block_norms().iter().all(|&b| b <= result.support_threshold) {
        Some(0.0)
    } else {
        None
    };
    Ok(TrialRecord {
        trial: trial_index,
        seed,
        identified: result.support == faulty,
        true_support: faulty,
        identified_support: result.support,
        relative_error,
        iterations: result.iterations_used,
        converged: result.converged,
        status: result.failure.unwrap_or_else(|| "ok".into()),
        wall_time: start.elapsed().as_secs_f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measurement::FaultMode;

    pub(crate) fn scenario(count: usize) -> ScenarioConfig {
        ScenarioConfig {
            network: NetworkSource::Preset { name: Preset::Paperlike13, seed: 1 },
            kind: MeasurementKind::Distance,
            faults: FaultSpec { count, options: FaultOptions { mode: FaultMode::Uncorrelated, centered: false } },
            noise: 0.0,
            kappa: 0.0,
            solver: ScpParams::default(),
            trials: 3,
            base_seed: 42,
            regenerate_network: false,
        }
    }

    #[test]
    fn seed_mixing_is_stable() {
        assert_eq!(mix_seed(0, 0), mix_seed(0, 0));
        assert_ne!(mix_seed(0, 0), mix_seed(0, 1));
        assert_ne!(mix_seed(1, 0), mix_seed(0, 1));
        // SplitMix64 reference output for state 0 advanced once.
        assert_eq!(mix_seed(0, 0), 0xE220_A839_7B1D_CDAF);
    }

    #[test]
    fn paperlike_preset_shape() {
        let net = paperlike13(1).unwrap();
        assert_eq!(net.configuration.num_agents(), 13);
        assert_eq!(net.configuration.dim(), 3);
        assert!((34..=38).contains(&net.graph.num_edges()));
        let report = analyze_rigidity(MeasurementKind::Distance, &net.configuration, &net.graph).unwrap();
        assert_eq!(report.rank, 33);
        assert_eq!(paperlike13(1).unwrap(), net);
    }

    #[test]
    fn fault_free_trial_is_exact() {
        let rec = run_trial(&scenario(0), 0).unwrap();
        assert_eq!(rec.relative_error, Some(0.0));
        assert!(rec.identified_support.is_empty());
        assert!(rec.identified);
    }

    #[test]
    fn trials_are_reproducible() {
        let sc = scenario(2);
        let mut a = run_trial(&sc, 5).unwrap();
        let mut b = run_trial(&sc, 5).unwrap();
        a.wall_time = 0.0;
        b.wall_time = 0.0;
        assert_eq!(a, b);
        assert_eq!(a.true_support.len(), 2);
    }

    #[test]
    fn scenario_round_trips_through_json() {
        let sc = scenario(4);
        let back = ScenarioConfig::from_json(&sc.to_json().unwrap()).unwrap();
        assert_eq!(back, sc);
        let mut bad = scenario(13);
        assert!(bad.validate().is_err());
        bad.faults.count = 1;
        bad.trials = 0;
        assert!(bad.validate().is_err());
    }
}
