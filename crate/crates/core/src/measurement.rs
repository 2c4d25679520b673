//! Inter-agent measurement maps and the sampling models used to perturb
//! them.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{distance, norm, BlockVector, Configuration, ErrorState, SensorGraph, COINCIDENCE_TOL};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MeasurementKind {
    Distance,
    Bearing,
}

impl MeasurementKind {
    pub fn as_str(self) -> &'static str {
        match self {
            MeasurementKind::Distance => "distance",
            MeasurementKind::Bearing => "bearing",
        }
    }

    /// Scalars per edge.
    pub fn rows_per_edge(self, dim: usize) -> usize {
        match self {
            MeasurementKind::Distance => 1,
            MeasurementKind::Bearing => dim,
        }
    }
}

impl std::fmt::Display for MeasurementKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for MeasurementKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "distance" => Ok(Self::Distance),
            "bearing" => Ok(Self::Bearing),
            other => Err(Error::InvalidArgument(format!("unknown measurement kind {other:?}"))),
        }
    }
}

/// Stacked measurement vector `y = Phi(p) + e`, ordered by edge.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasurementSet {
    pub kind: MeasurementKind,
    pub dim: usize,
    pub values: Vec<f64>,
    /// Radius of the noise sphere `e` was drawn from; zero when noise-free.
    pub noise_radius: f64,
}

impl MeasurementSet {
    pub fn num_edges(&self) -> usize {
        self.values.len() / self.kind.rows_per_edge(self.dim)
    }
}

/// `Phi_D`: entry `k` is `0.5 * ||p_i - p_j||^2` for edge `k = (i, j)`.
pub fn distance_measurements(cfg: &Configuration, graph: &SensorGraph) -> MeasurementSet {
    let values = graph
        .edges()
        .iter()
        .map(|&(i, j)| {
            let d = distance(cfg.point(i), cfg.point(j));
            0.5 * d * d
        })
        .collect();
    MeasurementSet { kind: MeasurementKind::Distance, dim: cfg.dim(), values, noise_radius: 0.0 }
}

/// `Phi_B`: block `k` is the unit vector `(p_i - p_j) / ||p_i - p_j||`.
pub fn bearing_measurements(cfg: &Configuration, graph: &SensorGraph) -> Result<MeasurementSet> {
    let d = cfg.dim();
    let mut values = Vec::with_capacity(d * graph.num_edges());
    for &(i, j) in graph.edges() {
        let diff: Vec<f64> = cfg.point(i).iter().zip(cfg.point(j)).map(|(a, b)| a - b).collect();
        let len = norm(&diff);
        if len <= COINCIDENCE_TOL {
            return Err(Error::DegenerateEdge(i, j));
        }
        values.extend(diff.iter().map(|x| x / len));
    }
    Ok(MeasurementSet { kind: MeasurementKind::Bearing, dim: d, values, noise_radius: 0.0 })
}

/// `Phi(p)` for either measurement kind.
pub fn measure(kind: MeasurementKind, cfg: &Configuration, graph: &SensorGraph) -> Result<MeasurementSet> {
    match kind {
        MeasurementKind::Distance => Ok(distance_measurements(cfg, graph)),
        MeasurementKind::Bearing => bearing_measurements(cfg, graph),
    }
}

/// `z = y - Phi(p_hat)`.
pub fn residual_vector(y: &MeasurementSet, estimate: &Configuration, graph: &SensorGraph) -> Result<Vec<f64>> {
    if y.dim != estimate.dim() {
        return Err(Error::LengthMismatch { expected: y.dim, actual: estimate.dim() });
    }
    let predicted = measure(y.kind, estimate, graph)?;
    if predicted.values.len() != y.values.len() {
        return Err(Error::LengthMismatch { expected: predicted.values.len(), actual: y.values.len() });
    }
    Ok(y.values.iter().zip(&predicted.values).map(|(a, b)| a - b).collect())
}

/// Uniform direction on the sphere of the given radius, drawn from `rng`.
pub fn sample_sphere_with<R: Rng + ?Sized>(rng: &mut R, dim: usize, radius: f64) -> Vec<f64> {
    if radius == 0.0 {
        return vec![0.0; dim];
    }
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let len = norm(&v);
        if len > 1e-300 {
            return v.into_iter().map(|x| x * radius / len).collect();
        }
    }
}

/// Seeded version of [`sample_sphere_with`].
pub fn sample_sphere(dim: usize, radius: f64, seed: u64) -> Vec<f64> {
    sample_sphere_with(&mut ChaCha8Rng::seed_from_u64(seed), dim, radius)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FaultMode {
    /// Independent draw per faulty agent.
    #[default]
    Uncorrelated,
    /// One draw shared by every faulty agent.
    FullyCorrelated,
}

/// How localization errors are drawn for the faulty agents.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FaultOptions {
    #[serde(default)]
    pub mode: FaultMode,
    /// Draw from `[-1/2, 1/2]^d` instead of `[0, 1]^d`.
    #[serde(default)]
    pub centered: bool,
}

fn cube_draw<R: Rng + ?Sized>(rng: &mut R, dim: usize, centered: bool) -> Vec<f64> {
    let shift = if centered { 0.5 } else { 0.0 };
    (0..dim).map(|_| rng.gen::<f64>() - shift).collect()
}

/// Gives each agent in `faulty` a unit-cube localization error `x[i]` and
/// returns `p_hat = p - x`.
pub fn inject_faults_with<R: Rng + ?Sized>(
    rng: &mut R,
    cfg: &Configuration,
    faulty: &[usize],
    options: FaultOptions,
) -> Result<ErrorState> {
    let n = cfg.num_agents();
    let d = cfg.dim();
    let mut fault_set = faulty.to_vec();
    fault_set.sort_unstable();
    fault_set.dedup();
    if let Some(&bad) = fault_set.iter().find(|&&i| i >= n) {
        return Err(Error::IndexOutOfRange { index: bad, len: n });
    }
    let mut x = BlockVector::zeros(d, n);
    let shared = match options.mode {
        FaultMode::FullyCorrelated if !fault_set.is_empty() => Some(cube_draw(rng, d, options.centered)),
        _ => None,
    };
    for &i in &fault_set {
        let draw = match &shared {
            Some(s) => s.clone(),
            None => cube_draw(rng, d, options.centered),
        };
        x.block_mut(i).copy_from_slice(&draw);
    }
    let estimates = cfg.displaced(&x.scaled(-1.0))?;
    Ok(ErrorState { estimates, true_error: x, fault_set })
}

/// Seeded version of [`inject_faults_with`].
pub fn inject_faults(cfg: &Configuration, faulty: &[usize], options: FaultOptions, seed: u64) -> Result<ErrorState> {
    inject_faults_with(&mut ChaCha8Rng::seed_from_u64(seed), cfg, faulty, options)
}

/// Moves every agent in `agents` to a uniform point on the sphere of radius
/// `kappa` around its true position, updating `p_hat` and `x` together.
pub fn perturb_estimates_with<R: Rng + ?Sized>(
    rng: &mut R,
    cfg: &Configuration,
    state: &mut ErrorState,
    agents: &[usize],
    kappa: f64,
) -> Result<()> {
    let d = cfg.dim();
    let mut x = state.true_error.clone();
    for &i in agents {
        if i >= cfg.num_agents() {
            return Err(Error::IndexOutOfRange { index: i, len: cfg.num_agents() });
        }
        let offset = sample_sphere_with(rng, d, kappa);
        x.block_mut(i).copy_from_slice(&offset);
    }
    state.estimates = cfg.displaced(&x.scaled(-1.0))?;
    state.true_error = x;
    Ok(())
}

/// Adds a noise vector drawn uniformly on the sphere of radius `epsilon` in
/// the full stacked measurement space.
pub fn add_sphere_noise_with<R: Rng + ?Sized>(rng: &mut R, y: &mut MeasurementSet, epsilon: f64) {
    let e = sample_sphere_with(rng, y.values.len(), epsilon);
    for (v, n) in y.values.iter_mut().zip(e) {
        *v += n;
    }
    y.noise_radius = epsilon;
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::random_geometric_network;

    fn pair(a: &[f64], b: &[f64]) -> (Configuration, SensorGraph) {
        let cfg = Configuration::from_points(a.len(), &[a.to_vec(), b.to_vec()]).unwrap();
        (cfg, SensorGraph::complete(2))
    }

    #[test]
    fn distance_examples() {
        let (cfg, g) = pair(&[0.0, 0.0], &[3.0, 4.0]);
        assert_eq!(distance_measurements(&cfg, &g).values, vec![12.5]);
        let (cfg, g) = pair(&[1.5, 2.0, -1.0], &[0.5, 2.0, -1.0]);
        assert_eq!(distance_measurements(&cfg, &g).values, vec![0.5]);
    }

    #[test]
    fn bearing_examples() {
        let (cfg, g) = pair(&[1.0, 0.0], &[0.0, 0.0]);
        assert_eq!(bearing_measurements(&cfg, &g).unwrap().values, vec![1.0, 0.0]);
        let (cfg, g) = pair(&[1.0, 1.0, 1.0], &[0.0, 0.0, 0.0]);
        let y = bearing_measurements(&cfg, &g).unwrap();
        for v in y.values {
            assert!((v - 1.0 / 3f64.sqrt()).abs() < 1e-15);
            assert!((v - 0.57735).abs() < 1e-5);
        }
    }

    #[test]
    fn bearing_rejects_degenerate_edge() {
        let (cfg, g) = pair(&[1.0, 1.0], &[1.0, 1.0]);
        assert!(matches!(bearing_measurements(&cfg, &g), Err(Error::DegenerateEdge(0, 1))));
    }

    #[test]
    fn bearing_blocks_are_unit_and_scale_invariant() {
        let (cfg, g) = random_geometric_network(8, 3, 20.0, 5.0, 3).unwrap();
        let y = bearing_measurements(&cfg, &g).unwrap();
        for b in y.values.chunks(3) {
            assert!((norm(b) - 1.0).abs() < 1e-12);
        }
        let scaled = Configuration::new(3, cfg.as_slice().iter().map(|x| 5.0 * x).collect()).unwrap();
        let ys = bearing_measurements(&scaled, &g).unwrap();
        for (a, b) in y.values.iter().zip(&ys.values) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn residual_reconstructs_measurements() {
        let (cfg, g) = random_geometric_network(6, 2, 20.0, 5.0, 1).unwrap();
        let y = distance_measurements(&cfg, &g);
        assert!(residual_vector(&y, &cfg, &g).unwrap().iter().all(|&z| z == 0.0));

        let mut shifted = cfg.as_block_vector();
        shifted.block_mut(2)[0] += 0.3;
        let est = Configuration::new(2, shifted.into_vec()).unwrap();
        let z = residual_vector(&y, &est, &g).unwrap();
        for (k, &(i, j)) in g.edges().iter().enumerate() {
            if i != 2 && j != 2 {
                assert_eq!(z[k], 0.0);
            } else {
                assert!(z[k] != 0.0);
            }
        }
        let phi = distance_measurements(&est, &g);
        for k in 0..z.len() {
            assert!((z[k] + phi.values[k] - y.values[k]).abs() <= 1e-15 * y.values[k].abs().max(1.0));
        }
    }

    #[test]
    fn residual_rejects_length_mismatch() {
        let (cfg, g) = random_geometric_network(5, 2, 20.0, 5.0, 1).unwrap();
        let mut y = distance_measurements(&cfg, &g);
        y.values.pop();
        assert!(matches!(residual_vector(&y, &cfg, &g), Err(Error::LengthMismatch { .. })));
    }

    #[test]
    fn sphere_samples_have_exact_radius_and_zero_mean() {
        assert_eq!(sample_sphere(4, 0.0, 9), vec![0.0; 4]);
        for seed in 0..50 {
            assert!((norm(&sample_sphere(3, 2.5, seed)) - 2.5).abs() < 1e-12);
        }
        assert_eq!(sample_sphere(3, 1.0, 5), sample_sphere(3, 1.0, 5));
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let mut mean = [0.0; 3];
        let count = 10_000;
        for _ in 0..count {
            let v = sample_sphere_with(&mut rng, 3, 1.0);
            for k in 0..3 {
                mean[k] += v[k] / count as f64;
            }
        }
        assert!(mean.iter().all(|m| m.abs() < 0.05), "{mean:?}");
    }

    #[test]
    fn fault_injection_modes() {
        let (cfg, _) = random_geometric_network(10, 3, 5.0, 10.0, 11).unwrap();
        let none = inject_faults(&cfg, &[], FaultOptions::default(), 0).unwrap();
        assert_eq!(none.estimates, cfg);
        assert_eq!(none.true_error.norm2(), 0.0);

        let corr = FaultOptions { mode: FaultMode::FullyCorrelated, centered: false };
        let st = inject_faults(&cfg, &[1, 4, 7], corr, 3).unwrap();
        assert_eq!(st.true_error.block(1), st.true_error.block(4));
        assert_eq!(st.true_error.block(4), st.true_error.block(7));

        let st = inject_faults(&cfg, &[0, 2, 5, 9], FaultOptions::default(), 3).unwrap();
        assert_eq!(st.true_error.block_norm(0.0), 4.0);
        assert!(st.true_error.as_slice().iter().all(|&v| (0.0..1.0).contains(&v)));
        let recon = st.estimates.displaced(&st.true_error).unwrap();
        for (a, b) in recon.as_slice().iter().zip(cfg.as_slice()) {
            assert!((a - b).abs() < 1e-12);
        }

        let centered = FaultOptions { mode: FaultMode::Uncorrelated, centered: true };
        let st = inject_faults(&cfg, &[0, 1, 2, 3, 4, 5, 6, 7], centered, 8).unwrap();
        assert!(st.true_error.as_slice().iter().all(|&v| (-0.5..0.5).contains(&v)));
        assert!(st.true_error.as_slice().iter().any(|&v| v < 0.0));
    }

    #[test]
    fn perturbation_and_noise_have_requested_magnitudes() {
        let (cfg, g) = random_geometric_network(9, 3, 6.0, 10.0, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut st = inject_faults_with(&mut rng, &cfg, &[3], FaultOptions::default()).unwrap();
        let others: Vec<usize> = (0..9).filter(|&i| i != 3).collect();
        perturb_estimates_with(&mut rng, &cfg, &mut st, &others, 0.6).unwrap();
        for &i in &others {
            assert!((norm(st.true_error.block(i)) - 0.6).abs() < 1e-12);
        }
        let mut y = distance_measurements(&cfg, &g);
        let clean = y.clone();
        add_sphere_noise_with(&mut rng, &mut y, 2.0);
        let e: Vec<f64> = y.values.iter().zip(&clean.values).map(|(a, b)| a - b).collect();
        assert!((norm(&e) - 2.0).abs() < 1e-9);
        assert_eq!(y.noise_radius, 2.0);
    }
}
