//! Constants of the noisy recovery bound
//! `||x - x*||_{2,1} <= C sigma_{1,s}(x) + C' eps`.

use serde::{Deserialize, Serialize};

use super::nsp::{furthest, plane_search, search_box, split_sums, NspSearch};
use crate::error::{Error, Result};
use crate::measurement::MeasurementKind;
use crate::model::{Configuration, SensorGraph};
use crate::rigidity::analyze_rigidity;
use crate::search::maximize_in_box;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RobustConstants {
    pub s: usize,
    /// Supremum over the null space of `||v_S||_{2,1} / ||v_{S^c}||_{2,1}`.
    pub tau_bar: f64,
    pub tau: f64,
    pub gamma: f64,
    /// `C_{1,tau}`
    pub c_q_tau: f64,
    /// `C_{1,tau,gamma}`
    pub c_q_tau_gamma: f64,
    /// Smallest non-zero eigenvalue of `R^T R` used for `gamma`.
    pub worst_case_index: f64,
    pub num_agents: usize,
    /// Centre of the rotation (or scaling) that attains `tau_bar`; empty
    /// when a pure translation attains it.
    pub witness_c: Vec<f64>,
    pub witness_normal: Option<[f64; 3]>,
    pub witness_subset: Vec<usize>,
}

/// `gamma = (1 + tau_bar + tau) * sqrt(n / lambda)`.
pub fn gamma(tau_bar: f64, tau: f64, num_agents: usize, worst_case_index: f64) -> f64 {
    (1.0 + tau_bar + tau) * (num_agents as f64 / worst_case_index).sqrt()
}

/// `(C_{q,tau}, C_{q,tau,gamma})` for `0 < q <= 1`.
pub fn error_bound_constants(q: f64, tau: f64, gamma: f64) -> (f64, f64) {
    let tq = tau.powf(q);
    let c = 2f64.powf(2.0 / q - 1.0) * ((1.0 + tq) / (1.0 - tq)).powf(1.0 / q);
    let c_gamma = 2f64.powf(2.0 / q) * (1.0 / (1.0 - tq)).powf(1.0 / q) * gamma;
    (c, c_gamma)
}

/// Worst null-space ratio found by the search, with its location.
#[derive(Clone, Debug, PartialEq)]
pub struct NullRatio {
    pub tau_bar: f64,
    pub witness_c: Vec<f64>,
    pub witness_normal: Option<[f64; 3]>,
    pub witness_subset: Vec<usize>,
}

/// Sup of `||v_S||_{2,1} / ||v_{S^c}||_{2,1}` over the analytic null space
/// with `S` the `s` largest blocks of `v`.
///
/// Translations give `s / (n - s)`. Every other null vector has block
/// norms proportional to the distances from a centre `c`, measured in the
/// configuration itself (2D distance, bearing) or in a projection plane
/// (3D distance), so the search runs over `c` (and the plane normal).
/// A screw component along the rotation axis adds the same amount to every
/// squared block norm and never raises the ratio above the planar one once
/// that exceeds `s / (n - s)`.
pub fn null_space_ratio(cfg: &Configuration, kind: MeasurementKind, s: usize, search: NspSearch) -> NullRatio {
    let n = cfg.num_agents();
    if s == 0 {
        return NullRatio { tau_bar: 0.0, witness_c: Vec::new(), witness_normal: None, witness_subset: Vec::new() };
    }
    if s >= n {
        return NullRatio {
            tau_bar: f64::INFINITY,
            witness_c: Vec::new(),
            witness_normal: None,
            witness_subset: (0..n).collect(),
        };
    }
    let translation = s as f64 / (n - s) as f64;
    let ratio = |buf: &mut Vec<f64>| {
        let (top, rest) = split_sums(buf, s, 1.0);
        if rest > 0.0 {
            top / rest
        } else {
            f64::INFINITY
        }
    };

    let (value, c, normal, dists) = if kind == MeasurementKind::Distance && cfg.dim() == 3 {
        let best = plane_search(cfg, search, &ratio);
        let mut buf = Vec::new();
        super::nsp::projected_distances(cfg, &best.normal, &best.centre, &mut buf);
        (best.value, best.centre.to_vec(), Some(best.normal), buf)
    } else {
        let (lo, hi) = search_box(cfg, search.expand);
        let objective = |c: &[f64]| {
            let mut buf: Vec<f64> =
                cfg.points().map(|p| p.iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()).collect();
            ratio(&mut buf)
        };
        let starts: Vec<Vec<f64>> = cfg.points().map(<[f64]>::to_vec).collect();
        let budget = crate::search::BoxSearch {
            per_axis: if cfg.dim() == 2 { search.grid } else { search.grid_3d },
            refine_starts: search.refine_starts,
            refine_iterations: search.refine_iterations,
        };
        let best = maximize_in_box(&objective, &lo, &hi, budget, &starts);
        let buf: Vec<f64> =
            cfg.points().map(|p| p.iter().zip(&best.point).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()).collect();
        (best.value, best.point, None, buf)
    };

    if value >= translation {
        NullRatio { tau_bar: value, witness_c: c, witness_normal: normal, witness_subset: furthest(&dists, s) }
    } else {
        NullRatio { tau_bar: translation, witness_c: Vec::new(), witness_normal: None, witness_subset: (0..s).collect() }
    }
}

/// Computes `tau_bar`, picks `tau = max(tau_bar, tau_choice)` (kept below
/// one) and evaluates `gamma` and the `q = 1` error-bound constants.
pub fn robust_constants(
    cfg: &Configuration,
    graph: &SensorGraph,
    kind: MeasurementKind,
    s: usize,
    tau_choice: f64,
    search: NspSearch,
) -> Result<RobustConstants> {
    let report = analyze_rigidity(kind, cfg, graph)?;
    if !report.is_infinitesimally_rigid {
        return Err(Error::NotRigid { rank: report.rank, max_rank: report.maximal_rank });
    }
    let ratio = null_space_ratio(cfg, kind, s, search);
    if ratio.tau_bar >= 1.0 {
        return Err(Error::NspViolated { s, tau_bar: ratio.tau_bar });
    }
    let tau = ratio.tau_bar.max(tau_choice).min(1.0 - 1e-9);
    let lambda = report.worst_case_index;
    let gamma = gamma(ratio.tau_bar, tau, cfg.num_agents(), lambda);
    let (c_q_tau, c_q_tau_gamma) = error_bound_constants(1.0, tau, gamma);
    Ok(RobustConstants {
        s,
        tau_bar: ratio.tau_bar,
        tau,
        gamma,
        c_q_tau,
        c_q_tau_gamma,
        worst_case_index: lambda,
        num_agents: cfg.num_agents(),
        witness_c: ratio.witness_c,
        witness_normal: ratio.witness_normal,
        witness_subset: ratio.witness_subset,
    })
}
