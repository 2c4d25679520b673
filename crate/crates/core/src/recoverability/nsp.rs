//! Search-bounded certificates for the block null space property.
//!
//! For distance rigidity in the plane and for bearing rigidity, every
//! non-translational null vector has block norms proportional to
//! `||p_i - c||` for some centre `c`, so the property of order `s` reduces to
//!
//! ```text
//! sum_{i in S} ||p_i - c||^q  <  sum_{i not in S} ||p_i - c||^q
//! ```
//!
//! for every `c` and every `|S| <= s`. For fixed `c` the worst `S` is the `s`
//! agents furthest from `c`, so only `c` has to be searched. In 3D with
//! distances the same inequality must hold for the projection onto every
//! plane; planes are sampled by a spiral over the hemisphere of normals.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{plane_basis, project_to_plane, Configuration};
use crate::search::{angles, direction, hemisphere_directions, maximize_in_box, nelder_mead, BoxSearch};

/// Search budget of the certificate checks.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NspSearch {
    /// Grid points per axis for planar searches.
    pub grid: usize,
    /// Grid points per axis for searches over `R^3`.
    pub grid_3d: usize,
    /// Bounding box margin, in configuration diameters.
    pub expand: f64,
    /// Number of best grid cells refined locally.
    pub refine_starts: usize,
    /// Nelder-Mead iterations per refinement.
    pub refine_iterations: usize,
    /// Plane normals sampled for 3D distance networks.
    pub plane_count: usize,
    /// Worst planes refined jointly over normal and centre.
    pub plane_refine: usize,
}

impl Default for NspSearch {
    fn default() -> Self {
        Self {
            grid: 101,
            grid_3d: 41,
            expand: 1.0,
            refine_starts: 5,
            refine_iterations: 200,
            plane_count: 200,
            plane_refine: 5,
        }
    }
}

impl NspSearch {
    /// Smaller budget for quick scans.
    pub fn coarse() -> Self {
        Self { grid: 41, grid_3d: 21, plane_count: 60, ..Self::default() }
    }

    fn box_budget(&self, dim: usize) -> BoxSearch {
        BoxSearch {
            per_axis: if dim == 2 { self.grid } else { self.grid_3d },
            refine_starts: self.refine_starts,
            refine_iterations: self.refine_iterations,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NspVerdict {
    /// No violation found within the search budget.
    #[serde(rename = "yes")]
    Holds,
    Violated,
    /// The smallest margin found is positive but numerically zero.
    Undecided,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NspCertificate {
    pub s: usize,
    pub q: f64,
    pub holds: NspVerdict,
    /// Point of smallest margin: in the plane of the configuration, in the
    /// projection plane (3D distance), or in space (3D bearing).
    pub witness_c: Vec<f64>,
    /// Normal of the projection plane, 3D distance networks only.
    pub witness_normal: Option<[f64; 3]>,
    /// The `s` agents furthest from `witness_c`, ascending.
    pub witness_subset: Vec<usize>,
    /// `min_c [sum_{S^c} ||p_i - c||^q - sum_S ||p_i - c||^q]` over the search.
    pub margin: f64,
    pub search_budget: NspSearch,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl NspCertificate {
    pub fn holds(&self) -> bool {
        self.holds == NspVerdict::Holds
    }
}

fn check_q(q: f64) -> Result<()> {
    if q > 0.0 && q <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("q must lie in (0, 1], got {q}")))
    }
}

#[inline]
fn pow_q(x: f64, q: f64) -> f64 {
    if q == 1.0 {
        x
    } else {
        x.powf(q)
    }
}

/// `(sum of the s largest values^q, sum of the rest^q)`; sorts `buf`.
pub(crate) fn split_sums(buf: &mut [f64], s: usize, q: f64) -> (f64, f64) {
    buf.sort_unstable_by(|a, b| b.total_cmp(a));
    let top = buf[..s].iter().map(|&x| pow_q(x, q)).sum();
    let rest = buf[s..].iter().map(|&x| pow_q(x, q)).sum();
    (top, rest)
}

/// Indices of the `s` largest values, ties to the lower index, ascending.
pub(crate) fn furthest(values: &[f64], s: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    let mut top: Vec<usize> = idx.into_iter().take(s).collect();
    top.sort_unstable();
    top
}

fn distances_to(cfg: &Configuration, c: &[f64], out: &mut Vec<f64>) {
    out.clear();
    out.extend(cfg.points().map(|p| p.iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()));
}

/// Distances from `c` to every agent after projecting along `normal`.
pub(crate) fn projected_distances(cfg: &Configuration, normal: &[f64; 3], c: &[f64], out: &mut Vec<f64>) {
    out.clear();
    out.extend(cfg.points().map(|p| {
        let r = [p[0] - c[0], p[1] - c[1], p[2] - c[2]];
        let t = r[0] * normal[0] + r[1] * normal[1] + r[2] * normal[2];
        let u = [r[0] - t * normal[0], r[1] - t * normal[1], r[2] - t * normal[2]];
        (u[0] * u[0] + u[1] * u[1] + u[2] * u[2]).sqrt()
    }));
}

/// `sum_{S^c} ||p_i - c||^q - sum_S ||p_i - c||^q` with `S` the `s` agents
/// furthest from `c`.
pub fn nsp_margin_at(cfg: &Configuration, c: &[f64], s: usize, q: f64) -> f64 {
    let mut buf = Vec::with_capacity(cfg.num_agents());
    distances_to(cfg, c, &mut buf);
    let (top, rest) = split_sums(&mut buf, s, q);
    rest - top
}

/// Bounding box of the configuration grown by `expand` diameters.
pub(crate) fn search_box(cfg: &Configuration, expand: f64) -> (Vec<f64>, Vec<f64>) {
    let margin = expand * cfg.diameter().max(1e-12);
    let bb = cfg.bounding_box();
    (bb.iter().map(|b| b.0 - margin).collect(), bb.iter().map(|b| b.1 + margin).collect())
}

fn dispersion(cfg: &Configuration, q: f64) -> f64 {
    let n = cfg.num_agents() as f64;
    let d = cfg.dim();
    let centroid: Vec<f64> = (0..d).map(|a| cfg.points().map(|p| p[a]).sum::<f64>() / n).collect();
    let mut buf = Vec::new();
    distances_to(cfg, &centroid, &mut buf);
    buf.iter().map(|&x| pow_q(x, q)).sum()
}

fn verdict(margin: f64, scale: f64) -> NspVerdict {
    if margin <= 0.0 {
        NspVerdict::Violated
    } else if margin <= 1e-9 * scale {
        NspVerdict::Undecided
    } else {
        NspVerdict::Holds
    }
}

/// When `2s >= n` the property fails at every agent position: the `n - s`
/// nearest agents include the agent itself at distance zero.
fn trivially_violated(cfg: &Configuration, s: usize, q: f64, search: NspSearch) -> Option<NspCertificate> {
    let n = cfg.num_agents();
    if 2 * s < n {
        return None;
    }
    let c = cfg.point(0).to_vec();
    let mut buf = Vec::new();
    distances_to(cfg, &c, &mut buf);
    let subset = furthest(&buf, s);
    Some(NspCertificate {
        s,
        q,
        holds: NspVerdict::Violated,
        witness_c: c.clone(),
        witness_normal: None,
        witness_subset: subset,
        margin: nsp_margin_at(cfg, &c, s, q),
        search_budget: search,
        notes: vec![format!(
            "s = {s} is at least half of the {n} agents; the property cannot hold"
        )],
    })
}

/// Searches `c` over the expanded bounding box of a point set of any
/// dimension.
fn point_search(cfg: &Configuration, s: usize, q: f64, search: NspSearch) -> NspCertificate {
    if let Some(cert) = trivially_violated(cfg, s, q, search) {
        return cert;
    }
    let (lo, hi) = search_box(cfg, search.expand);
    let objective = |c: &[f64]| -nsp_margin_at(cfg, c, s, q);
    let starts: Vec<Vec<f64>> = cfg.points().map(<[f64]>::to_vec).collect();
    let best = maximize_in_box(&objective, &lo, &hi, search.box_budget(cfg.dim()), &starts);
    let margin = -best.value;
    let mut buf = Vec::new();
    distances_to(cfg, &best.point, &mut buf);
    NspCertificate {
        s,
        q,
        holds: verdict(margin, dispersion(cfg, q)),
        witness_subset: furthest(&buf, s),
        witness_c: best.point,
        witness_normal: None,
        margin,
        search_budget: search,
        notes: Vec::new(),
    }
}

/// Certificate for a planar configuration with distance measurements.
pub fn nsp_check_2d(cfg: &Configuration, s: usize, q: f64, search: NspSearch) -> Result<NspCertificate> {
    if cfg.dim() != 2 {
        return Err(Error::UnsupportedDimension(cfg.dim()));
    }
    check_q(q)?;
    Ok(point_search(cfg, s, q, search))
}

/// Certificate for bearing measurements, searched directly over `c` in
/// `R^2` or `R^3`.
pub fn nsp_check_bearing(cfg: &Configuration, s: usize, q: f64, search: NspSearch) -> Result<NspCertificate> {
    check_q(q)?;
    let mut cert = point_search(cfg, s, q, search);
    if cfg.dim() == 3 {
        cert.notes.push("3D bearing check applies the planar bearing inequality over c in R^3 (extension)".into());
    }
    Ok(cert)
}

/// Worst plane found by [`plane_search`].
pub(crate) struct PlaneOptimum {
    pub normal: [f64; 3],
    /// Point in space whose projection is the optimum centre.
    pub centre: [f64; 3],
    pub value: f64,
}

/// Maximizes `value(distances)` jointly over plane normals and centres,
/// where `distances` are projected distances from the centre to each agent.
pub(crate) fn plane_search<V>(cfg: &Configuration, search: NspSearch, value: &V) -> PlaneOptimum
where
    V: Fn(&mut Vec<f64>) -> f64 + Sync,
{
    let normals = hemisphere_directions(search.plane_count.max(1));
    let budget = BoxSearch { per_axis: search.grid, ..search.box_budget(2) };
    let per_plane: Vec<PlaneOptimum> = normals
        .par_iter()
        .map(|&n| {
            let (n, u, w) = plane_basis(n).expect("unit normal");
            let proj = project_to_plane(cfg, n).expect("3D configuration");
            let (lo, hi) = search_box(&proj, search.expand);
            let f = |c: &[f64]| {
                let mut buf = Vec::with_capacity(proj.num_agents());
                distances_to(&proj, c, &mut buf);
                value(&mut buf)
            };
            let starts: Vec<Vec<f64>> = proj.points().map(<[f64]>::to_vec).collect();
            let best = maximize_in_box(&f, &lo, &hi, budget, &starts);
            let c = &best.point;
            let centre = [c[0] * u[0] + c[1] * w[0], c[0] * u[1] + c[1] * w[1], c[0] * u[2] + c[1] * w[2]];
            PlaneOptimum { normal: n, centre, value: best.value }
        })
        .collect();

    let mut order: Vec<usize> = (0..per_plane.len()).collect();
    order.sort_by(|&a, &b| per_plane[b].value.total_cmp(&per_plane[a].value).then(a.cmp(&b)));

    let joint = |x: &[f64]| {
        let n = direction(x[0], x[1]);
        let mut buf = Vec::with_capacity(cfg.num_agents());
        projected_distances(cfg, &n, &x[2..], &mut buf);
        value(&mut buf)
    };
    let cell = 2.0 * (1.0 + search.expand) * cfg.diameter().max(1e-12) / (search.grid.max(2) - 1) as f64;
    let refined: Vec<PlaneOptimum> = order
        .iter()
        .take(search.plane_refine)
        .collect::<Vec<_>>()
        .par_iter()
        .map(|&&k| {
            let start = &per_plane[k];
            let (theta, phi) = angles(start.normal);
            let x0 = [theta, phi, start.centre[0], start.centre[1], start.centre[2]];
            let step = [0.05, 0.05, cell, cell, cell];
            let (x, neg) = nelder_mead(|x| -joint(x), &x0, &step, search.refine_iterations);
            if -neg > start.value {
                PlaneOptimum { normal: direction(x[0], x[1]), centre: [x[2], x[3], x[4]], value: -neg }
            } else {
                PlaneOptimum { normal: start.normal, centre: start.centre, value: start.value }
            }
        })
        .collect();

    let mut best = per_plane.into_iter().nth(order[0]).expect("at least one plane");
    for cand in refined {
        if cand.value > best.value {
            best = cand;
        }
    }
    best
}

/// Certificate for a 3D configuration with distance measurements: the
/// planar condition must hold for the projection onto every plane.
pub fn nsp_check_3d_distance(cfg: &Configuration, s: usize, q: f64, search: NspSearch) -> Result<NspCertificate> {
    if cfg.dim() != 3 {
        return Err(Error::UnsupportedDimension(cfg.dim()));
    }
    check_q(q)?;
    if let Some(mut cert) = trivially_violated(cfg, s, q, search) {
        let normal = [0.0, 0.0, 1.0];
        let proj = project_to_plane(cfg, normal)?;
        cert.witness_c = proj.point(0).to_vec();
        cert.witness_normal = Some(normal);
        cert.margin = nsp_margin_at(&proj, &cert.witness_c, s, q);
        return Ok(cert);
    }
    let value = |buf: &mut Vec<f64>| {
        let (top, rest) = split_sums(buf, s, q);
        top - rest
    };
    let best = plane_search(cfg, search, &value);
    let (normal, u, w) = plane_basis(best.normal)?;
    let proj = project_to_plane(cfg, normal)?;
    let c = best.centre;
    let witness_c = vec![
        c[0] * u[0] + c[1] * u[1] + c[2] * u[2],
        c[0] * w[0] + c[1] * w[1] + c[2] * w[2],
    ];
    let margin = nsp_margin_at(&proj, &witness_c, s, q);
    let mut buf = Vec::new();
    distances_to(&proj, &witness_c, &mut buf);
    Ok(NspCertificate {
        s,
        q,
        holds: verdict(margin, dispersion(&proj, q).max(dispersion(cfg, q))),
        witness_subset: furthest(&buf, s),
        witness_c,
        witness_normal: Some(normal),
        margin,
        search_budget: search,
        notes: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square() -> Configuration {
        Configuration::from_points(2, &[[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]).unwrap()
    }

    fn clustered_line() -> Configuration {
        Configuration::from_points(2, &[[0.0, 0.0], [0.1, 0.0], [0.2, 0.0], [10.0, 0.0]]).unwrap()
    }

    #[test]
    fn unit_square_holds_for_one_error() {
        let cfg = square();
        let centre_margin = nsp_margin_at(&cfg, &[0.5, 0.5], 1, 1.0);
        assert!((centre_margin - 2f64.sqrt()).abs() < 1e-12);
        let cert = nsp_check_2d(&cfg, 1, 1.0, NspSearch::default()).unwrap();
        assert!(cert.holds(), "{cert:?}");
        // The minimum sits at a corner: 1 + 1 + 0 - sqrt(2).
        assert!((cert.margin - (2.0 - 2f64.sqrt())).abs() < 1e-6, "{}", cert.margin);
        assert!(cert.margin > 0.0);
    }

    #[test]
    fn clustered_line_is_violated_with_checkable_witness() {
        let cfg = clustered_line();
        let f = -nsp_margin_at(&cfg, &[0.1, 0.0], 1, 1.0);
        assert!((f - 9.7).abs() < 1e-12);
        let cert = nsp_check_2d(&cfg, 1, 1.0, NspSearch::default()).unwrap();
        assert_eq!(cert.holds, NspVerdict::Violated);
        assert!(cert.margin <= 0.0);
        assert!(nsp_margin_at(&cfg, &cert.witness_c, 1, 1.0) <= 0.0);
        assert_eq!(cert.witness_subset, vec![3]);
    }

    #[test]
    fn half_or_more_is_immediately_violated() {
        let two = Configuration::from_points(2, &[[0.0, 0.0], [1.0, 0.0]]).unwrap();
        let cert = nsp_check_2d(&two, 1, 1.0, NspSearch::default()).unwrap();
        assert_eq!(cert.holds, NspVerdict::Violated);
        assert!(cert.margin <= 0.0);
        assert!(!cert.notes.is_empty());
        let cert = nsp_check_bearing(&square(), 2, 1.0, NspSearch::default()).unwrap();
        assert_eq!(cert.holds, NspVerdict::Violated);
    }

    #[test]
    fn bearing_check_matches_planar_examples() {
        assert!(nsp_check_bearing(&square(), 1, 1.0, NspSearch::default()).unwrap().holds());
        let cert = nsp_check_bearing(&clustered_line(), 1, 1.0, NspSearch::default()).unwrap();
        assert_eq!(cert.holds, NspVerdict::Violated);
        assert!(nsp_margin_at(&clustered_line(), &cert.witness_c, 1, 1.0) <= 0.0);
    }

    #[test]
    fn fractional_q_uses_same_path() {
        let cert = nsp_check_2d(&square(), 1, 0.5, NspSearch::coarse()).unwrap();
        assert!(cert.holds());
        assert!(nsp_check_2d(&square(), 1, 0.0, NspSearch::coarse()).is_err());
        assert!(nsp_check_2d(&square(), 1, 1.5, NspSearch::coarse()).is_err());
    }

    #[test]
    fn lifted_counterexample_violates_in_3d() {
        let pts = [[0.0, 0.0, 0.001], [0.1, 0.0, -0.002], [0.2, 0.0, 0.0015], [10.0, 0.0, -0.001]];
        let cfg = Configuration::from_points(3, &pts).unwrap();
        let cert = nsp_check_3d_distance(&cfg, 1, 1.0, NspSearch::coarse()).unwrap();
        assert_eq!(cert.holds, NspVerdict::Violated);
        let normal = cert.witness_normal.unwrap();
        let proj = project_to_plane(&cfg, normal).unwrap();
        assert!(nsp_margin_at(&proj, &cert.witness_c, 1, 1.0) <= 0.0);
        // the xy projection carries the planar counterexample
        let xy = project_to_plane(&cfg, [0.0, 0.0, 1.0]).unwrap();
        assert!(nsp_check_2d(&xy, 1, 1.0, NspSearch::coarse()).unwrap().holds == NspVerdict::Violated);
    }

    #[test]
    fn three_d_immediate_violation() {
        let pts = [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        let cfg = Configuration::from_points(3, &pts).unwrap();
        let cert = nsp_check_3d_distance(&cfg, 2, 1.0, NspSearch::coarse()).unwrap();
        assert_eq!(cert.holds, NspVerdict::Violated);
        assert!(cert.margin <= 0.0);
    }

    #[test]
    fn furthest_breaks_ties_by_index() {
        assert_eq!(furthest(&[1.0, 3.0, 3.0, 2.0], 2), vec![1, 2]);
        assert_eq!(furthest(&[5.0, 5.0, 5.0], 1), vec![0]);
    }
}
