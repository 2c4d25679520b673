//! Derivative-free search used by the recoverability certificates: a dense
//! grid over a box followed by Nelder-Mead refinement from the best cells.

use rayon::prelude::*;

/// Minimizes `f` with the Nelder-Mead simplex method for a fixed number of
/// iterations, starting from an axis-aligned simplex of edge `step`.
pub(crate) fn nelder_mead<F>(f: F, x0: &[f64], step: &[f64], iterations: usize) -> (Vec<f64>, f64)
where
    F: Fn(&[f64]) -> f64,
{
    let n = x0.len();
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    simplex.push((x0.to_vec(), f(x0)));
    for k in 0..n {
        let mut x = x0.to_vec();
        x[k] += step[k];
        let fx = f(&x);
        simplex.push((x, fx));
    }
    let by_value = |a: &(Vec<f64>, f64), b: &(Vec<f64>, f64)| a.1.total_cmp(&b.1);
    for _ in 0..iterations {
        simplex.sort_by(by_value);
        let worst = simplex[n].clone();
        let centroid: Vec<f64> = (0..n).map(|k| simplex[..n].iter().map(|p| p.0[k]).sum::<f64>() / n as f64).collect();
        let along = |t: f64| -> Vec<f64> { (0..n).map(|k| centroid[k] + t * (worst.0[k] - centroid[k])).collect() };

        let xr = along(-1.0);
        let fr = f(&xr);
        if fr < simplex[0].1 {
            let xe = along(-2.0);
            let fe = f(&xe);
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
            continue;
        }
        if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
            continue;
        }
        let (xc, fc) = if fr < worst.1 {
            let xc = along(-0.5);
            let fc = f(&xc);
            (xc, fc)
        } else {
            let xc = along(0.5);
            let fc = f(&xc);
            (xc, fc)
        };
        if fc < worst.1.min(fr) {
            simplex[n] = (xc, fc);
            continue;
        }
        let best = simplex[0].0.clone();
        for p in simplex.iter_mut().skip(1) {
            let x: Vec<f64> = (0..n).map(|k| best[k] + 0.5 * (p.0[k] - best[k])).collect();
            let fx = f(&x);
            *p = (x, fx);
        }
    }
    simplex.sort_by(by_value);
    simplex.swap_remove(0)
}

/// Regular grid with `per_axis` points per axis spanning `[lo, hi]`.
pub(crate) fn grid(lo: &[f64], hi: &[f64], per_axis: usize) -> Vec<Vec<f64>> {
    let dim = lo.len();
    let per_axis = per_axis.max(2);
    let total = per_axis.pow(dim as u32);
    (0..total)
        .map(|mut idx| {
            (0..dim)
                .map(|a| {
                    let k = idx % per_axis;
                    idx /= per_axis;
                    lo[a] + (hi[a] - lo[a]) * k as f64 / (per_axis - 1) as f64
                })
                .collect()
        })
        .collect()
}

/// Outcome of [`maximize_in_box`].
#[derive(Clone, Debug)]
pub(crate) struct BoxOptimum {
    pub point: Vec<f64>,
    pub value: f64,
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct BoxSearch {
    pub per_axis: usize,
    pub refine_starts: usize,
    pub refine_iterations: usize,
}

/// Maximizes `f` over the box: grid evaluation, then Nelder-Mead from the
/// `refine_starts` best grid points and from every extra start. Ties go to
/// the earliest candidate, so the result does not depend on thread count.
pub(crate) fn maximize_in_box<F>(f: &F, lo: &[f64], hi: &[f64], budget: BoxSearch, extra_starts: &[Vec<f64>]) -> BoxOptimum
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let points = grid(lo, hi, budget.per_axis);
    let values: Vec<f64> = points.par_iter().map(|p| f(p)).collect();
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));

    let step: Vec<f64> = lo
        .iter()
        .zip(hi)
        .map(|(l, h)| ((h - l) / (budget.per_axis.max(2) - 1) as f64).max(1e-12))
        .collect();
    let mut starts: Vec<Vec<f64>> = order.iter().take(budget.refine_starts).map(|&i| points[i].clone()).collect();
    starts.extend(extra_starts.iter().cloned());

    let mut best = BoxOptimum { point: points[order[0]].clone(), value: values[order[0]] };
    let refined: Vec<BoxOptimum> = starts
        .par_iter()
        .map(|s| {
            let start_value = f(s);
            let (x, neg) = nelder_mead(|x| -f(x), s, &step, budget.refine_iterations);
            if -neg >= start_value {
                BoxOptimum { point: x, value: -neg }
            } else {
                BoxOptimum { point: s.clone(), value: start_value }
            }
        })
        .collect();
    for cand in refined {
        if cand.value > best.value {
            best = cand;
        }
    }
    best
}

/// `count` plane normals spread over the upper hemisphere by a golden-angle
/// spiral. Opposite normals define the same plane, so the hemisphere
/// covers every plane through the origin.
pub(crate) fn hemisphere_directions(count: usize) -> Vec<[f64; 3]> {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..count)
        .map(|k| {
            let z = 1.0 - (k as f64 + 0.5) / count as f64;
            let r = (1.0 - z * z).max(0.0).sqrt();
            let phi = golden * k as f64;
            [r * phi.cos(), r * phi.sin(), z]
        })
        .collect()
}

/// Unit vector from polar angle `theta` and azimuth `phi`.
pub(crate) fn direction(theta: f64, phi: f64) -> [f64; 3] {
    [theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos()]
}

/// Inverse of [`direction`].
pub(crate) fn angles(n: [f64; 3]) -> (f64, f64) {
    (n[2].clamp(-1.0, 1.0).acos(), n[1].atan2(n[0]))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nelder_mead_finds_quadratic_minimum() {
        let (x, fx) = nelder_mead(|x| (x[0] - 1.0).powi(2) + 3.0 * (x[1] + 2.0).powi(2), &[0.0, 0.0], &[0.5, 0.5], 300);
        assert!((x[0] - 1.0).abs() < 1e-6 && (x[1] + 2.0).abs() < 1e-6, "{x:?}");
        assert!(fx < 1e-10);
    }

    #[test]
    fn box_maximization_reaches_cusp() {
        let f = |x: &[f64]| -((x[0] - 0.3).abs() + (x[1] + 0.7).abs());
        let budget = BoxSearch { per_axis: 11, refine_starts: 3, refine_iterations: 200 };
        let opt = maximize_in_box(&f, &[-1.0, -1.0], &[1.0, 1.0], budget, &[]);
        assert!(opt.value > -1e-6, "{opt:?}");
    }

    #[test]
    fn grid_covers_corners() {
        let g = grid(&[0.0, 0.0], &[1.0, 2.0], 3);
        assert_eq!(g.len(), 9);
        assert_eq!(g[0], vec![0.0, 0.0]);
        assert_eq!(g[8], vec![1.0, 2.0]);
    }

    #[test]
    fn hemisphere_directions_are_unit() {
        let dirs = hemisphere_directions(200);
        assert_eq!(dirs.len(), 200);
        for d in dirs {
            assert!((d[0] * d[0] + d[1] * d[1] + d[2] * d[2] - 1.0).abs() < 1e-12);
            assert!(d[2] > 0.0);
            let (t, p) = angles(d);
            let back = direction(t, p);
            assert!((0..3).all(|k| (back[k] - d[k]).abs() < 1e-12));
        }
    }
}
