//! Sensor graphs, agent configurations and d-block vectors.
//!
//! A configuration stacks the positions of `n` agents in `R^d` into one
//! vector of length `d * n`. Localization errors, estimates and null-space
//! vectors share the same block layout and are represented by
//! [`BlockVector`].

use std::collections::BTreeSet;
use std::ops::{Add, Sub};

use nalgebra::DVector;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Two agents closer than this (meters) are treated as coincident.
pub const COINCIDENCE_TOL: f64 = 1e-9;

/// Relative tolerance used by `||.||_{2,0}` to decide whether a block is zero.
pub const ZERO_BLOCK_RTOL: f64 = 1e-9;

fn check_dim(dim: usize) -> Result<()> {
    if dim == 2 || dim == 3 {
        Ok(())
    } else {
        Err(Error::UnsupportedDimension(dim))
    }
}

/// Undirected measurement graph over agents `0..num_agents`.
///
/// Edges are stored as `(i, j)` with `i < j` in insertion order; that order
/// fixes the row order of measurement vectors and rigidity matrices.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SensorGraph {
    num_agents: usize,
    edges: Vec<(usize, usize)>,
}

impl SensorGraph {
    /// Builds a graph, rejecting self-loops, duplicate edges and
    /// out-of-range indices.
    pub fn new(num_agents: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let graph = Self::unchecked(num_agents, edges);
        let issues = graph.issues();
        if issues.is_empty() {
            Ok(graph)
        } else {
            Err(Error::InvalidNetwork(
                issues.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "),
            ))
        }
    }

    /// Builds a graph without checking its invariants. Use
    /// [`validate_configuration`] to obtain a report afterwards.
    pub fn unchecked(num_agents: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let edges = edges
            .into_iter()
            .map(|(i, j)| if i <= j { (i, j) } else { (j, i) })
            .collect();
        Self { num_agents, edges }
    }

    /// Complete graph on `n` agents.
    pub fn complete(n: usize) -> Self {
        let edges = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j)));
        Self::unchecked(n, edges)
    }

    pub fn num_agents(&self) -> usize {
        self.num_agents
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    fn issues(&self) -> Vec<Issue> {
        let mut issues = Vec::new();
        let mut seen = BTreeSet::new();
        for (k, &(i, j)) in self.edges.iter().enumerate() {
            if i == j {
                issues.push(Issue::SelfLoop { edge: k, agent: i });
            }
            for idx in [i, j] {
                if idx >= self.num_agents {
                    issues.push(Issue::IndexOutOfRange { edge: k, index: idx });
                }
            }
            if !seen.insert((i, j)) {
                issues.push(Issue::DuplicateEdge { edge: k, pair: (i, j) });
            }
        }
        issues
    }
}

/// Ground-truth (or estimated) agent positions in `R^2` or `R^3`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Configuration {
    dim: usize,
    coords: Vec<f64>,
}

impl Configuration {
    /// Wraps a flat coordinate vector `[p0.x, p0.y, (p0.z), p1.x, ...]`.
    pub fn new(dim: usize, coords: Vec<f64>) -> Result<Self> {
        check_dim(dim)?;
        if coords.len() % dim != 0 {
            return Err(Error::LengthMismatch {
                expected: (coords.len() / dim + 1) * dim,
                actual: coords.len(),
            });
        }
        Ok(Self { dim, coords })
    }

    pub fn from_points<P: AsRef<[f64]>>(dim: usize, points: &[P]) -> Result<Self> {
        check_dim(dim)?;
        let mut coords = Vec::with_capacity(dim * points.len());
        for p in points {
            let p = p.as_ref();
            if p.len() != dim {
                return Err(Error::LengthMismatch { expected: dim, actual: p.len() });
            }
            coords.extend_from_slice(p);
        }
        Ok(Self { dim, coords })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_agents(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks_exact(self.dim)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.coords
    }

    /// The stacked position vector viewed as a block vector.
    pub fn as_block_vector(&self) -> BlockVector {
        BlockVector { dim: self.dim, data: self.coords.clone() }
    }

    /// `p + v`, blockwise.
    pub fn displaced(&self, v: &BlockVector) -> Result<Self> {
        if v.dim != self.dim || v.data.len() != self.coords.len() {
            return Err(Error::LengthMismatch { expected: self.coords.len(), actual: v.data.len() });
        }
        let coords = self.coords.iter().zip(&v.data).map(|(a, b)| a + b).collect();
        Ok(Self { dim: self.dim, coords })
    }

    /// Largest pairwise distance between agents.
    pub fn diameter(&self) -> f64 {
        let n = self.num_agents();
        let mut best = 0.0f64;
        for i in 0..n {
            for j in i + 1..n {
                best = best.max(distance(self.point(i), self.point(j)));
            }
        }
        best
    }

    /// Per-axis `(min, max)` over all agents.
    pub fn bounding_box(&self) -> Vec<(f64, f64)> {
        (0..self.dim)
            .map(|a| {
                self.points().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
                    (lo.min(p[a]), hi.max(p[a]))
                })
            })
            .collect()
    }
}

pub(crate) fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// A vector in `R^{d n}` with `n` blocks of length `d`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockVector {
    dim: usize,
    data: Vec<f64>,
}

impl BlockVector {
    pub fn zeros(dim: usize, num_blocks: usize) -> Self {
        Self { dim, data: vec![0.0; dim * num_blocks] }
    }

    pub fn new(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 || data.len() % dim != 0 {
            return Err(Error::LengthMismatch { expected: dim, actual: data.len() });
        }
        Ok(Self { dim, data })
    }

    pub fn from_blocks<P: AsRef<[f64]>>(dim: usize, blocks: &[P]) -> Result<Self> {
        let mut data = Vec::with_capacity(dim * blocks.len());
        for b in blocks {
            let b = b.as_ref();
            if b.len() != dim {
                return Err(Error::LengthMismatch { expected: dim, actual: b.len() });
            }
            data.extend_from_slice(b);
        }
        Ok(Self { dim, data })
    }

    pub fn from_dvector(dim: usize, v: &DVector<f64>) -> Result<Self> {
        Self::new(dim, v.as_slice().to_vec())
    }

    pub fn to_dvector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.data)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_blocks(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn block(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn block_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn blocks(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    /// Euclidean norm of every block.
    pub fn block_norms(&self) -> Vec<f64> {
        self.blocks().map(norm).collect()
    }

    /// Plain Euclidean norm of the stacked vector.
    pub fn norm2(&self) -> f64 {
        norm(&self.data)
    }

    /// `||v||_{2,q}`: the `q`-(quasi)norm of the vector of block norms.
    ///
    /// `q = 0` counts blocks whose norm exceeds
    /// `ZERO_BLOCK_RTOL * (1 + max block norm)`; `q = inf` is the largest
    /// block norm.
    pub fn block_norm(&self, q: f64) -> f64 {
        assert!(q >= 0.0, "block_norm requires q >= 0");
        let norms = self.block_norms();
        let max = norms.iter().cloned().fold(0.0, f64::max);
        if q == 0.0 {
            let tol = ZERO_BLOCK_RTOL * (1.0 + max);
            norms.iter().filter(|&&b| b > tol).count() as f64
        } else if q.is_infinite() {
            max
        } else if q == 1.0 {
            norms.iter().sum()
        } else {
            norms.iter().map(|b| b.powf(q)).sum::<f64>().powf(1.0 / q)
        }
    }

    /// Keeps the blocks listed in `support` and zeroes the rest.
    pub fn restrict(&self, support: &[usize]) -> Result<Self> {
        let n = self.num_blocks();
        let mut out = Self::zeros(self.dim, n);
        for &i in support {
            if i >= n {
                return Err(Error::IndexOutOfRange { index: i, len: n });
            }
            out.block_mut(i).copy_from_slice(self.block(i));
        }
        Ok(out)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self { dim: self.dim, data: self.data.iter().map(|x| x * factor).collect() }
    }
}

impl Add for &BlockVector {
    type Output = BlockVector;

    fn add(self, rhs: &BlockVector) -> BlockVector {
        assert_eq!(self.data.len(), rhs.data.len(), "block vector length mismatch");
        BlockVector {
            dim: self.dim,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &BlockVector {
    type Output = BlockVector;

    fn sub(self, rhs: &BlockVector) -> BlockVector {
        assert_eq!(self.data.len(), rhs.data.len(), "block vector length mismatch");
        BlockVector {
            dim: self.dim,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }
}

/// `||v||_{2,q}` as a free function.
pub fn block_norm(v: &BlockVector, q: f64) -> f64 {
    v.block_norm(q)
}

/// `v_S`: the restriction of `v` to the blocks in `support`.
pub fn restrict_support(v: &BlockVector, support: &[usize]) -> Result<BlockVector> {
    v.restrict(support)
}

/// Complement of `set` within `0..n`, ascending.
pub fn complement(set: &[usize], n: usize) -> Vec<usize> {
    let inside: BTreeSet<usize> = set.iter().copied().collect();
    (0..n).filter(|i| !inside.contains(i)).collect()
}

/// Position estimates together with the error that produced them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorState {
    /// `p_hat`
    pub estimates: Configuration,
    /// `x = p - p_hat`
    pub true_error: BlockVector,
    /// Agents that were given a localization error, ascending.
    pub fault_set: Vec<usize>,
}

/// One violated invariant found by [`validate_configuration`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "issue", rename_all = "snake_case")]
pub enum Issue {
    CoincidentPositions { pair: (usize, usize), distance: f64 },
    SelfLoop { edge: usize, agent: usize },
    IndexOutOfRange { edge: usize, index: usize },
    DuplicateEdge { edge: usize, pair: (usize, usize) },
    AgentCountMismatch { graph: usize, configuration: usize },
}

impl std::fmt::Display for Issue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Issue::CoincidentPositions { pair, distance } => {
                write!(f, "coincident positions: agents {} and {} ({distance:e} m apart)", pair.0, pair.1)
            }
            Issue::SelfLoop { edge, agent } => write!(f, "self-loop: edge {edge} joins agent {agent} to itself"),
            Issue::IndexOutOfRange { edge, index } => {
                write!(f, "index out of range: edge {edge} references agent {index}")
            }
            Issue::DuplicateEdge { edge, pair } => {
                write!(f, "duplicate edge: edge {edge} repeats ({}, {})", pair.0, pair.1)
            }
            Issue::AgentCountMismatch { graph, configuration } => write!(
                f,
                "agent count mismatch: graph has {graph} agents, configuration has {configuration}"
            ),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub issues: Vec<Issue>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.issues.is_empty()
    }

    pub fn into_result(self) -> Result<()> {
        if self.passed() {
            Ok(())
        } else {
            Err(Error::InvalidNetwork(
                self.issues.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "),
            ))
        }
    }
}

/// Checks every configuration and graph invariant and lists the offenders.
pub fn validate_configuration(cfg: &Configuration, graph: &SensorGraph) -> ValidationReport {
    let mut issues = Vec::new();
    let n = cfg.num_agents();
    if graph.num_agents() != n {
        issues.push(Issue::AgentCountMismatch { graph: graph.num_agents(), configuration: n });
    }
    for i in 0..n {
        for j in i + 1..n {
            let d = distance(cfg.point(i), cfg.point(j));
            if d <= COINCIDENCE_TOL {
                issues.push(Issue::CoincidentPositions { pair: (i, j), distance: d });
            }
        }
    }
    issues.extend(graph.issues());
    ValidationReport { issues }
}

/// Draws `n` agents uniformly in `[0, box_side]^dim` and joins every pair
/// within `radius`. A pure function of its arguments.
pub fn random_geometric_network(
    n: usize,
    dim: usize,
    radius: f64,
    box_side: f64,
    seed: u64,
) -> Result<(Configuration, SensorGraph)> {
    check_dim(dim)?;
    if n < dim + 1 {
        return Err(Error::InvalidArgument(format!("need at least {} agents in dimension {dim}", dim + 1)));
    }
    if radius <= 0.0 || box_side <= 0.0 {
        return Err(Error::InvalidArgument("radius and box side must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coords: Vec<f64> = (0..n * dim).map(|_| rng.gen::<f64>() * box_side).collect();
    let cfg = Configuration { dim, coords };
    let graph = geometric_graph(&cfg, radius);
    Ok((cfg, graph))
}

/// Disk graph: edge `(i, j)` iff `||p_i - p_j|| <= radius`.
pub fn geometric_graph(cfg: &Configuration, radius: f64) -> SensorGraph {
    let n = cfg.num_agents();
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if distance(cfg.point(i), cfg.point(j)) <= radius {
                edges.push((i, j));
            }
        }
    }
    SensorGraph::unchecked(n, edges)
}

/// Orthonormal basis `(u, w)` of the plane orthogonal to `normal`.
///
/// `u` comes from Gram-Schmidt on the canonical axis least aligned with the
/// normal and `w = normal x u`.
pub fn plane_basis(normal: [f64; 3]) -> Result<([f64; 3], [f64; 3], [f64; 3])> {
    let len = norm(&normal);
    if !(len > 0.0) || !len.is_finite() {
        return Err(Error::ZeroNormal);
    }
    let n = [normal[0] / len, normal[1] / len, normal[2] / len];
    let axis = (0..3)
        .min_by(|&a, &b| n[a].abs().partial_cmp(&n[b].abs()).unwrap())
        .unwrap();
    let mut u = [0.0; 3];
    u[axis] = 1.0;
    let dot = n[axis];
    for k in 0..3 {
        u[k] -= dot * n[k];
    }
    let ul = norm(&u);
    for x in &mut u {
        *x /= ul;
    }
    let w = [
        n[1] * u[2] - n[2] * u[1],
        n[2] * u[0] - n[0] * u[2],
        n[0] * u[1] - n[1] * u[0],
    ];
    Ok((n, u, w))
}

/// Orthogonal projection of a 3D configuration onto the plane through the
/// origin with the given normal, expressed in the basis of [`plane_basis`].
///
/// A non-unit normal is normalized first.
pub fn project_to_plane(cfg: &Configuration, normal: [f64; 3]) -> Result<Configuration> {
    if cfg.dim() != 3 {
        return Err(Error::UnsupportedDimension(cfg.dim()));
    }
    let (_, u, w) = plane_basis(normal)?;
    let coords = cfg
        .points()
        .flat_map(|p| {
            let a = p[0] * u[0] + p[1] * u[1] + p[2] * u[2];
            let b = p[0] * w[0] + p[1] * w[1] + p[2] * w[2];
            [a, b]
        })
        .collect();
    Ok(Configuration { dim: 2, coords })
}

/// On-disk network description: `{dim, positions: [[...]], edges: [[i, j]]}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkDocument {
    pub dim: usize,
    pub positions: Vec<Vec<f64>>,
    pub edges: Vec<[usize; 2]>,
}

impl NetworkDocument {
    pub fn from_network(cfg: &Configuration, graph: &SensorGraph) -> Self {
        Self {
            dim: cfg.dim(),
            positions: cfg.points().map(<[f64]>::to_vec).collect(),
            edges: graph.edges().iter().map(|&(i, j)| [i, j]).collect(),
        }
    }

    /// Builds the configuration and graph, failing with the full validation
    /// report if any invariant is violated.
    pub fn into_network(self) -> Result<(Configuration, SensorGraph)> {
        let cfg = Configuration::from_points(self.dim, &self.positions)?;
        let graph = SensorGraph::unchecked(cfg.num_agents(), self.edges.iter().map(|e| (e[0], e[1])));
        validate_configuration(&cfg, &graph).into_result()?;
        Ok((cfg, graph))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bv(dim: usize, blocks: &[&[f64]]) -> BlockVector {
        BlockVector::from_blocks(dim, blocks).unwrap()
    }

    #[test]
    fn triangle_passes_validation() {
        let cfg = Configuration::from_points(2, &[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]).unwrap();
        let graph = SensorGraph::complete(3);
        assert!(validate_configuration(&cfg, &graph).passed());
    }

    #[test]
    fn coincident_positions_are_reported_with_pair() {
        let cfg = Configuration::from_points(2, &[[0.0, 0.0], [1.0, 1.0], [1.0, 1.0]]).unwrap();
        let report = validate_configuration(&cfg, &SensorGraph::complete(3));
        assert!(!report.passed());
        assert!(report
            .issues
            .iter()
            .any(|i| matches!(i, Issue::CoincidentPositions { pair: (1, 2), .. })));
        assert!(report.issues[0].to_string().starts_with("coincident positions"));
    }

    #[test]
    fn self_loop_out_of_range_edge_reports_both() {
        let cfg = Configuration::from_points(2, &[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]).unwrap();
        let graph = SensorGraph::unchecked(3, [(0, 1), (5, 5)]);
        let report = validate_configuration(&cfg, &graph);
        let text: Vec<String> = report.issues.iter().map(ToString::to_string).collect();
        assert!(text.iter().any(|t| t.starts_with("self-loop")));
        assert!(text.iter().any(|t| t.starts_with("index out of range")));
        assert!(SensorGraph::new(3, [(5, 5)]).is_err());
    }

    #[test]
    fn duplicate_edges_rejected_in_either_orientation() {
        assert!(SensorGraph::new(3, [(0, 1), (1, 0)]).is_err());
        let g = SensorGraph::new(3, [(2, 0)]).unwrap();
        assert_eq!(g.edges(), &[(0, 2)]);
    }

    #[test]
    fn block_norm_examples() {
        let v = bv(2, &[&[3.0, 4.0], &[0.0, 0.0]]);
        assert_eq!(v.block_norm(0.0), 1.0);
        assert_eq!(v.block_norm(1.0), 5.0);
        let w = bv(2, &[&[1.0, 0.0], &[0.0, 2.0]]);
        assert_eq!(w.block_norm(f64::INFINITY), 2.0);
        assert!((w.block_norm(2.0) - 5f64.sqrt()).abs() < 1e-15);
        assert!((w.block_norm(0.5) - (1.0 + 2f64.sqrt()).powi(2)).abs() < 1e-12);
    }

    #[test]
    fn zero_block_tolerance_is_relative() {
        let v = bv(2, &[&[1e6, 0.0], &[1e-5, 0.0], &[0.0, 0.0]]);
        assert_eq!(v.block_norm(0.0), 1.0);
        let w = bv(2, &[&[1e-3, 0.0], &[1e-5, 0.0]]);
        assert_eq!(w.block_norm(0.0), 2.0);
    }

    #[test]
    fn restrict_support_examples() {
        let v = bv(2, &[&[1.0, 1.0], &[2.0, 2.0]]);
        assert_eq!(v.restrict(&[0]).unwrap(), bv(2, &[&[1.0, 1.0], &[0.0, 0.0]]));
        assert_eq!(v.restrict(&[]).unwrap(), BlockVector::zeros(2, 2));
        assert_eq!(v.restrict(&[0, 1]).unwrap(), v);
        assert!(matches!(v.restrict(&[2]), Err(Error::IndexOutOfRange { index: 2, len: 2 })));
    }

    #[test]
    fn diameter_bound_always_connects_two_agents() {
        for seed in 0..20 {
            for dim in [2, 3] {
                let box_side = 4.0;
                let radius = box_side * (dim as f64).sqrt();
                let n = dim + 1;
                let (_, g) = random_geometric_network(n, dim, radius, box_side, seed).unwrap();
                assert!(g.edges().contains(&(0, 1)));
                assert_eq!(g.num_edges(), n * (n - 1) / 2);
            }
        }
    }

    #[test]
    fn generator_is_deterministic_and_in_box() {
        let a = random_geometric_network(13, 3, 5.0, 10.0, 42).unwrap();
        let b = random_geometric_network(13, 3, 5.0, 10.0, 42).unwrap();
        assert_eq!(a, b);
        assert!(a.0.as_slice().iter().all(|&x| (0.0..=10.0).contains(&x)));
        let c = random_geometric_network(13, 3, 5.0, 10.0, 43).unwrap();
        assert_ne!(a.0, c.0);
    }

    #[test]
    fn generator_rejects_too_few_agents() {
        assert!(random_geometric_network(2, 2, 1.0, 1.0, 0).is_err());
        assert!(random_geometric_network(5, 4, 1.0, 1.0, 0).is_err());
    }

    #[test]
    fn axis_aligned_projection_keeps_in_plane_distances() {
        let cfg = Configuration::from_points(3, &[[3.0, 4.0, 7.0], [0.0, 0.0, -2.0]]).unwrap();
        let proj = project_to_plane(&cfg, [0.0, 0.0, 1.0]).unwrap();
        assert!((distance(proj.point(0), proj.point(1)) - 5.0).abs() < 1e-12);
        assert!((norm(proj.point(0)) - 5.0).abs() < 1e-12);
    }

    #[test]
    fn points_differing_along_normal_coincide() {
        let n = [1.0 / 3f64.sqrt(); 3];
        let cfg = Configuration::from_points(3, &[[0.2, -1.0, 0.5], [0.2 + 2.0 * n[0], -1.0 + 2.0 * n[1], 0.5 + 2.0 * n[2]]])
            .unwrap();
        let proj = project_to_plane(&cfg, n).unwrap();
        assert!(distance(proj.point(0), proj.point(1)) < 1e-12);
    }

    #[test]
    fn zero_normal_is_an_error() {
        let cfg = Configuration::from_points(3, &[[0.0, 0.0, 0.0]]).unwrap();
        assert!(matches!(project_to_plane(&cfg, [0.0; 3]), Err(Error::ZeroNormal)));
    }

    #[test]
    fn network_document_round_trip_and_validation() {
        let text = r#"{"dim": 2, "positions": [[0,0],[1,0],[0,1]], "edges": [[0,1],[2,0]]}"#;
        let (cfg, graph) = NetworkDocument::from_json(text).unwrap().into_network().unwrap();
        assert_eq!(cfg.num_agents(), 3);
        assert_eq!(graph.edges(), &[(0, 1), (0, 2)]);
        let doc = NetworkDocument::from_network(&cfg, &graph);
        let back = NetworkDocument::from_json(&doc.to_json().unwrap()).unwrap();
        assert_eq!(back, doc);

        let bad = r#"{"dim": 2, "positions": [[0,0],[0,0]], "edges": [[0,1]]}"#;
        assert!(NetworkDocument::from_json(bad).unwrap().into_network().is_err());
    }
}
