//! How many localization errors a network can recover uniquely.
//!
//! Two regimes are reported separately and never mixed: the combinatorial
//! `l2/l0` limit that follows from the block spark of a maximal-rank
//! rigidity matrix, and the `l2/lq` limit certified by searching the
//! null-space inequality.

mod nsp;
mod robust;

pub use nsp::{nsp_check_2d, nsp_check_3d_distance, nsp_check_bearing, nsp_margin_at, NspCertificate, NspSearch, NspVerdict};
pub use robust::{error_bound_constants, gamma, null_space_ratio, robust_constants, NullRatio, RobustConstants};

use crate::error::{Error, Result};
use crate::measurement::MeasurementKind;
use crate::model::{BlockVector, Configuration, SensorGraph};
use crate::rigidity::analyze_rigidity;

/// Default colinearity tolerance relative to the configuration diameter.
pub const COLINEAR_RTOL: f64 = 1e-6;

/// Size of the largest subset of agents within `tol` of a common line.
pub fn max_colinear_count(cfg: &Configuration, tol: f64) -> usize {
    let n = cfg.num_agents();
    if n <= 2 {
        return n;
    }
    let d = cfg.dim();
    let mut best = 2;
    for i in 0..n {
        for j in i + 1..n {
            let a = cfg.point(i);
            let dir: Vec<f64> = cfg.point(j).iter().zip(a).map(|(b, a)| b - a).collect();
            let len2: f64 = dir.iter().map(|x| x * x).sum();
            if len2 == 0.0 {
                continue;
            }
            let count = (0..n)
                .filter(|&k| {
                    let r: Vec<f64> = cfg.point(k).iter().zip(a).map(|(p, a)| p - a).collect();
                    let t = r.iter().zip(&dir).map(|(x, y)| x * y).sum::<f64>() / len2;
                    let off2: f64 = (0..d).map(|m| (r[m] - t * dir[m]).powi(2)).sum();
                    off2.sqrt() <= tol
                })
                .count();
            best = best.max(count);
        }
    }
    best
}

/// [`max_colinear_count`] with the default tolerance.
pub fn max_colinear_count_default(cfg: &Configuration) -> usize {
    max_colinear_count(cfg, COLINEAR_RTOL * cfg.diameter())
}

/// Number of fixed points of the non-trivial null motions: one for planar
/// rotations and for scalings, the number of agents on the axis for 3D
/// rotations.
pub fn fixed_point_count(kind: MeasurementKind, dim: usize, max_colinear: usize) -> usize {
    match (kind, dim) {
        (MeasurementKind::Distance, 3) => max_colinear,
        _ => 1,
    }
}

/// Largest error count strictly below `(n - s_tilde) / 2`.
///
/// `max_colinear` is only consulted for 3D distance networks.
pub fn l0_recovery_limit(num_agents: usize, kind: MeasurementKind, dim: usize, max_colinear: usize) -> usize {
    let s_tilde = fixed_point_count(kind, dim, max_colinear);
    match num_agents.checked_sub(s_tilde) {
        Some(m) if m >= 1 => (m - 1) / 2,
        _ => 0,
    }
}

/// Runs the certificate check that matches the measurement kind and the
/// ambient dimension.
pub fn nsp_check(cfg: &Configuration, kind: MeasurementKind, s: usize, q: f64, search: NspSearch) -> Result<NspCertificate> {
    match (kind, cfg.dim()) {
        (MeasurementKind::Distance, 2) => nsp_check_2d(cfg, s, q, search),
        (MeasurementKind::Distance, _) => nsp_check_3d_distance(cfg, s, q, search),
        (MeasurementKind::Bearing, _) => nsp_check_bearing(cfg, s, q, search),
    }
}

/// Largest `s` certified by the null-space check, scanning upward from 1
/// and stopping at the first failure.
pub fn max_certified_errors(
    cfg: &Configuration,
    graph: &SensorGraph,
    kind: MeasurementKind,
    q: f64,
    search: NspSearch,
) -> Result<usize> {
    Ok(certified_errors_with_certificates(cfg, graph, kind, q, search)?.0)
}

/// Like [`max_certified_errors`], also returning every certificate computed.
pub fn certified_errors_with_certificates(
    cfg: &Configuration,
    graph: &SensorGraph,
    kind: MeasurementKind,
    q: f64,
    search: NspSearch,
) -> Result<(usize, Vec<NspCertificate>)> {
    let report = analyze_rigidity(kind, cfg, graph)?;
    if !report.is_infinitesimally_rigid {
        return Err(Error::NotRigid { rank: report.rank, max_rank: report.maximal_rank });
    }
    let mut certs = Vec::new();
    let mut s = 1;
    loop {
        let cert = nsp_check(cfg, kind, s, q, search)?;
        let ok = cert.holds();
        certs.push(cert);
        if !ok {
            return Ok((s - 1, certs));
        }
        s += 1;
    }
}

/// `sigma_{q,s}(x)`: the `||.||_{2,q}` norm of `x` with its `s` largest
/// blocks removed (ties keep the lower index).
pub fn sigma_qs(x: &BlockVector, s: usize, q: f64) -> f64 {
    let norms = x.block_norms();
    let keep = nsp::furthest(&norms, s.min(norms.len()));
    let tail: Vec<f64> = norms
        .iter()
        .enumerate()
        .filter(|(i, _)| keep.binary_search(i).is_err())
        .map(|(_, &b)| b)
        .collect();
    if q == 1.0 {
        tail.iter().sum()
    } else {
        tail.iter().map(|b| b.powf(q)).sum::<f64>().powf(1.0 / q)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn colinear_counts() {
        let cfg = Configuration::from_points(
            3,
            &[[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [2.5, 0.0, 0.0], [-3.0, 0.0, 0.0], [0.0, 1.0, 0.5]],
        )
        .unwrap();
        assert_eq!(max_colinear_count_default(&cfg), 4);
        let two = Configuration::from_points(3, &[[0.0, 0.0, 0.0], [1.0, 2.0, 3.0]]).unwrap();
        assert_eq!(max_colinear_count_default(&two), 2);
        let (rand, _) = crate::model::random_geometric_network(13, 3, 5.0, 10.0, 17).unwrap();
        assert_eq!(max_colinear_count_default(&rand), 2);
    }

    #[test]
    fn l0_limits() {
        assert_eq!(l0_recovery_limit(13, MeasurementKind::Distance, 3, 2), 5);
        assert_eq!(l0_recovery_limit(3, MeasurementKind::Distance, 2, 0), 0);
        assert_eq!(l0_recovery_limit(10, MeasurementKind::Bearing, 3, 7), 4);
        assert_eq!(l0_recovery_limit(4, MeasurementKind::Distance, 2, 0), 1);
        assert_eq!(l0_recovery_limit(6, MeasurementKind::Distance, 2, 0), 2);
        assert_eq!(l0_recovery_limit(1, MeasurementKind::Bearing, 2, 0), 0);
    }

    #[test]
    fn sigma_examples() {
        let x = BlockVector::from_blocks(1, &[[5.0], [3.0], [1.0], [0.0]]).unwrap();
        assert_eq!(sigma_qs(&x, 2, 1.0), 1.0);
        assert_eq!(sigma_qs(&x, 4, 1.0), 0.0);
        assert_eq!(sigma_qs(&x, 0, 1.0), x.block_norm(1.0));
        let k = 0.7;
        let y = BlockVector::from_blocks(2, &[[k, 0.0], [0.0, k], [-k, 0.0], [0.0, -k], [k, 0.0]]).unwrap();
        assert!((sigma_qs(&y, 2, 1.0) - 3.0 * k).abs() < 1e-15);
    }

    #[test]
    fn square_certifies_one_error() {
        let cfg = Configuration::from_points(2, &[[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]).unwrap();
        let g = SensorGraph::complete(4);
        assert_eq!(max_certified_errors(&cfg, &g, MeasurementKind::Distance, 1.0, NspSearch::default()).unwrap(), 1);
    }

    #[test]
    fn clustered_line_certifies_nothing() {
        let cfg = Configuration::from_points(2, &[[0.0, 0.0], [0.1, 0.01], [0.2, -0.01], [10.0, 0.05]]).unwrap();
        let g = SensorGraph::complete(4);
        assert_eq!(max_certified_errors(&cfg, &g, MeasurementKind::Distance, 1.0, NspSearch::default()).unwrap(), 0);
    }

    #[test]
    fn non_rigid_input_is_rejected() {
        let cfg = Configuration::from_points(2, &[[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]).unwrap();
        let cycle = SensorGraph::new(4, [(0, 1), (1, 2), (2, 3), (0, 3)]).unwrap();
        let err = max_certified_errors(&cfg, &cycle, MeasurementKind::Distance, 1.0, NspSearch::coarse()).unwrap_err();
        assert!(matches!(err, Error::NotRigid { rank: 4, max_rank: 5 }));
    }
}
