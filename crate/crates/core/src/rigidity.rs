//! Distance and bearing rigidity matrices, their analytic null spaces and
//! rank diagnostics.
//!
//! Rows follow the edge order of the [`SensorGraph`]; columns follow the
//! agent blocks of the configuration. Both matrices are the exact Jacobians
//! of the corresponding measurement maps, so for bearings the block of the
//! second endpoint carries `-P_ij / ||p_i - p_j||`.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measurement::MeasurementKind;
use crate::model::{norm, BlockVector, Configuration, SensorGraph, COINCIDENCE_TOL};

#[derive(Clone, Debug, PartialEq)]
pub struct RigidityMatrix {
    pub kind: MeasurementKind,
    pub dim: usize,
    pub num_agents: usize,
    pub edges: Vec<(usize, usize)>,
    pub matrix: DMatrix<f64>,
}

impl RigidityMatrix {
    /// Row range that belongs to edge `k`.
    pub fn edge_rows(&self, k: usize) -> std::ops::Range<usize> {
        let r = self.kind.rows_per_edge(self.dim);
        k * r..(k + 1) * r
    }

    pub fn apply(&self, v: &BlockVector) -> DVector<f64> {
        &self.matrix * v.to_dvector()
    }

    /// Row-major CSV with a `# kind=..,agents=..,edges=..` header line.
    pub fn to_csv(&self) -> String {
        let mut out = format!(
            "# kind={},dim={},agents={},edges={},rows={},cols={}\n",
            self.kind,
            self.dim,
            self.num_agents,
            self.edges.len(),
            self.matrix.nrows(),
            self.matrix.ncols()
        );
        for r in 0..self.matrix.nrows() {
            for c in 0..self.matrix.ncols() {
                if c > 0 {
                    out.push(',');
                }
                let v = self.matrix[(r, c)];
                // print -0.0 as 0
                let _ = write!(out, "{}", if v == 0.0 { 0.0 } else { v });
            }
            out.push('\n');
        }
        out
    }
}

/// Jacobian of the halved squared-distance map.
pub fn distance_rigidity_matrix(cfg: &Configuration, graph: &SensorGraph) -> RigidityMatrix {
    let d = cfg.dim();
    let n = cfg.num_agents();
    let mut m = DMatrix::zeros(graph.num_edges(), d * n);
    for (k, &(i, j)) in graph.edges().iter().enumerate() {
        for a in 0..d {
            let diff = cfg.point(i)[a] - cfg.point(j)[a];
            m[(k, i * d + a)] = diff;
            m[(k, j * d + a)] = -diff;
        }
    }
    RigidityMatrix { kind: MeasurementKind::Distance, dim: d, num_agents: n, edges: graph.edges().to_vec(), matrix: m }
}

/// `P = I - g g^T / ||g||^2`, the projector onto the orthogonal complement of `g`.
pub fn bearing_projector(g: &[f64]) -> DMatrix<f64> {
    let d = g.len();
    let len2: f64 = g.iter().map(|x| x * x).sum();
    DMatrix::from_fn(d, d, |r, c| (if r == c { 1.0 } else { 0.0 }) - g[r] * g[c] / len2)
}

/// Jacobian of the bearing map.
pub fn bearing_rigidity_matrix(cfg: &Configuration, graph: &SensorGraph) -> Result<RigidityMatrix> {
    let d = cfg.dim();
    let n = cfg.num_agents();
    let mut m = DMatrix::zeros(d * graph.num_edges(), d * n);
    for (k, &(i, j)) in graph.edges().iter().enumerate() {
        let g: Vec<f64> = cfg.point(i).iter().zip(cfg.point(j)).map(|(a, b)| a - b).collect();
        let len = norm(&g);
        if len <= COINCIDENCE_TOL {
            return Err(Error::DegenerateEdge(i, j));
        }
        let p = bearing_projector(&g) / len;
        for r in 0..d {
            for c in 0..d {
                m[(k * d + r, i * d + c)] = p[(r, c)];
                m[(k * d + r, j * d + c)] = -p[(r, c)];
            }
        }
    }
    Ok(RigidityMatrix { kind: MeasurementKind::Bearing, dim: d, num_agents: n, edges: graph.edges().to_vec(), matrix: m })
}

pub fn rigidity_matrix(kind: MeasurementKind, cfg: &Configuration, graph: &SensorGraph) -> Result<RigidityMatrix> {
    match kind {
        MeasurementKind::Distance => Ok(distance_rigidity_matrix(cfg, graph)),
        MeasurementKind::Bearing => bearing_rigidity_matrix(cfg, graph),
    }
}

/// Generators of the trivial motions that every rigidity matrix annihilates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NullBasis {
    pub kind: MeasurementKind,
    pub dim: usize,
    pub vectors: Vec<BlockVector>,
}

impl NullBasis {
    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    /// `sum_j coeffs[j] * vectors[j]`.
    pub fn combine(&self, coeffs: &[f64]) -> BlockVector {
        let len = self.vectors[0].as_slice().len();
        let acc: Vec<f64> = (0..len)
            .map(|k| self.vectors.iter().zip(coeffs).map(|(v, c)| c * v.as_slice()[k]).sum())
            .collect();
        BlockVector::new(self.dim, acc).expect("consistent block layout")
    }
}

/// Skew-symmetric generators of infinitesimal rotations.
///
/// In 3D these are the basis used for `so(3)`:
/// `[[0,1,0],[-1,0,0],[0,0,0]]`, `[[0,0,1],[0,0,0],[-1,0,0]]`,
/// `[[0,0,0],[0,0,-1],[0,1,0]]`. In 2D the single generator is
/// `[[0,1],[-1,0]]`.
pub fn skew_generators(dim: usize) -> Vec<[[f64; 3]; 3]> {
    match dim {
        2 => vec![[[0.0, 1.0, 0.0], [-1.0, 0.0, 0.0], [0.0, 0.0, 0.0]]],
        _ => vec![
            [[0.0, 1.0, 0.0], [-1.0, 0.0, 0.0], [0.0, 0.0, 0.0]],
            [[0.0, 0.0, 1.0], [0.0, 0.0, 0.0], [-1.0, 0.0, 0.0]],
            [[0.0, 0.0, 0.0], [0.0, 0.0, -1.0], [0.0, 1.0, 0.0]],
        ],
    }
}

/// Translations plus rotations (distance) or translations plus scaling
/// (bearing).
pub fn analytic_null_basis(cfg: &Configuration, kind: MeasurementKind) -> NullBasis {
    let d = cfg.dim();
    let n = cfg.num_agents();
    let mut vectors = Vec::new();
    for m in 0..d {
        let mut v = BlockVector::zeros(d, n);
        for i in 0..n {
            v.block_mut(i)[m] = 1.0;
        }
        vectors.push(v);
    }
    match kind {
        MeasurementKind::Distance => {
            for s in skew_generators(d) {
                let mut v = BlockVector::zeros(d, n);
                for i in 0..n {
                    let p = cfg.point(i);
                    let b = v.block_mut(i);
                    for r in 0..d {
                        b[r] = (0..d).map(|c| s[r][c] * p[c]).sum();
                    }
                }
                vectors.push(v);
            }
        }
        MeasurementKind::Bearing => vectors.push(cfg.as_block_vector()),
    }
    NullBasis { kind, dim: d, vectors }
}

/// Largest rank a rigidity matrix of this kind can reach.
pub fn maximal_rank(kind: MeasurementKind, dim: usize, num_agents: usize) -> usize {
    let (d, n) = (dim, num_agents);
    match kind {
        MeasurementKind::Distance if n > d => d * n - d * (d + 1) / 2,
        MeasurementKind::Distance => n * n.saturating_sub(1) / 2,
        MeasurementKind::Bearing if n >= 2 => d * n - d - 1,
        MeasurementKind::Bearing => 0,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RigidityReport {
    pub kind: MeasurementKind,
    pub rank: usize,
    pub nullity: usize,
    pub maximal_rank: usize,
    pub is_infinitesimally_rigid: bool,
    /// Smallest non-zero eigenvalue of `R^T R`.
    pub worst_case_index: f64,
    /// Eigenvalues of `R^T R`, ascending.
    pub eigenvalues: Vec<f64>,
}

/// Singular values counted as non-zero above `max(rows, cols) * eps * sigma_max`.
pub fn numerical_rank(singular_values: &[f64], rows: usize, cols: usize) -> usize {
    let smax = singular_values.iter().cloned().fold(0.0, f64::max);
    let tol = rows.max(cols) as f64 * f64::EPSILON * smax;
    singular_values.iter().filter(|&&s| s > tol).count()
}

pub fn rigidity_report(r: &RigidityMatrix) -> RigidityReport {
    let (rows, cols) = r.matrix.shape();
    let sv = if rows == 0 { Vec::new() } else { r.matrix.clone().svd(false, false).singular_values.as_slice().to_vec() };
    let rank = numerical_rank(&sv, rows, cols);
    let smallest_nonzero = sv
        .iter()
        .cloned()
        .filter(|&s| s > 0.0)
        .collect::<Vec<_>>();
    let mut sorted = smallest_nonzero;
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let worst_case_index = if rank > 0 { sorted[rank - 1] * sorted[rank - 1] } else { 0.0 };

    let gram = r.matrix.transpose() * &r.matrix;
    let mut eigenvalues = SymmetricEigen::new(gram).eigenvalues.as_slice().to_vec();
    eigenvalues.sort_by(|a, b| a.partial_cmp(b).unwrap());

    let maximal_rank = maximal_rank(r.kind, r.dim, r.num_agents);
    RigidityReport {
        kind: r.kind,
        rank,
        nullity: cols - rank,
        maximal_rank,
        is_infinitesimally_rigid: rank == maximal_rank,
        worst_case_index,
        eigenvalues,
    }
}

/// Builds the rigidity matrix for `kind` and reports on it.
pub fn analyze_rigidity(kind: MeasurementKind, cfg: &Configuration, graph: &SensorGraph) -> Result<RigidityReport> {
    Ok(rigidity_report(&rigidity_matrix(kind, cfg, graph)?))
}
