//! Block basis pursuit denoising by operator splitting.
//!
//! The problem `min ||w0 + x||_{2,1}` subject to `||b - R x||_2 <= eps` is
//! rewritten with `w = w0 + x` as `min ||w||_{2,1}` subject to
//! `||b' - R w||_2 <= eps`, `b' = b + R w0`, and split into
//!
//! ```text
//! minimize ||z||_{2,1} + indicator(||r|| <= eps)
//! subject to w = z,  R w + r = b'
//! ```
//!
//! Each iteration solves one linear system with the cached Cholesky factor
//! of `I + R^T R`, soft-thresholds the blocks of `z` and projects `r` onto
//! the ball.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::BlockVector;

/// Proximal map of `lambda * ||.||_{2,1}`: every block `b` becomes
/// `max(0, 1 - lambda / ||b||) * b`.
pub fn group_soft_threshold(v: &BlockVector, lambda: f64) -> BlockVector {
    assert!(lambda >= 0.0, "threshold must be non-negative");
    let d = v.dim();
    let mut data = v.as_slice().to_vec();
    shrink_blocks(&mut data, d, lambda);
    BlockVector::new(d, data).expect("same layout as the input")
}

fn shrink_blocks(data: &mut [f64], d: usize, lambda: f64) {
    for block in data.chunks_mut(d) {
        let n = block.iter().map(|x| x * x).sum::<f64>().sqrt();
        let factor = if n > lambda { 1.0 - lambda / n } else { 0.0 };
        block.iter_mut().for_each(|x| *x *= factor);
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BpdnProblem {
    pub matrix: DMatrix<f64>,
    pub rhs: DVector<f64>,
    pub epsilon: f64,
    /// `w0`: the objective is evaluated at `w0 + x`.
    pub offset: BlockVector,
}

impl BpdnProblem {
    pub fn new(matrix: DMatrix<f64>, rhs: DVector<f64>, epsilon: f64, offset: BlockVector) -> Result<Self> {
        if matrix.nrows() != rhs.len() {
            return Err(Error::LengthMismatch { expected: matrix.nrows(), actual: rhs.len() });
        }
        if matrix.ncols() != offset.as_slice().len() {
            return Err(Error::LengthMismatch { expected: matrix.ncols(), actual: offset.as_slice().len() });
        }
        if !(epsilon >= 0.0) {
            return Err(Error::InvalidArgument(format!("slack must be non-negative, got {epsilon}")));
        }
        Ok(BpdnProblem { matrix, rhs, epsilon, offset })
    }

    /// Problem with `w0 = 0`.
    pub fn without_offset(matrix: DMatrix<f64>, rhs: DVector<f64>, epsilon: f64, dim: usize) -> Result<Self> {
        if dim == 0 || matrix.ncols() % dim != 0 {
            return Err(Error::InvalidArgument(format!("{} columns do not form blocks of size {dim}", matrix.ncols())));
        }
        let offset = BlockVector::zeros(dim, matrix.ncols() / dim);
        Self::new(matrix, rhs, epsilon, offset)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BpdnOptions {
    /// Stop once the primal and dual residuals are both below this value.
    pub tol: f64,
    pub max_iterations: usize,
    /// Initial splitting penalty.
    pub rho: f64,
    /// Residual balancing period; zero keeps the penalty fixed.
    pub balance_every: usize,
    pub balance_factor: f64,
    /// Lower bound on the slack so that `eps = 0` is handled by the same path.
    pub epsilon_floor: f64,
    /// Over-relaxation factor in `(0, 2)`; one gives the plain iteration.
    pub relaxation: f64,
}

impl Default for BpdnOptions {
    fn default() -> Self {
        BpdnOptions {
            tol: 1e-8,
            max_iterations: 100_000,
            rho: 1.0,
            balance_every: 50,
            balance_factor: 2.0,
            epsilon_floor: 1e-9,
            relaxation: 1.6,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Converged,
    IterationCap,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BpdnSolution {
    /// Minimizer `w = w0 + x` of the block norm.
    pub w: BlockVector,
    /// The step `x = w - w0`.
    pub step: BlockVector,
    /// Dual certificate `nu`: `R^T nu` restricted to a non-zero block `i`
    /// equals `-w_i / ||w_i||`, and has norm at most one elsewhere.
    pub dual: DVector<f64>,
    pub status: SolveStatus,
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    /// `||b' - R w||_2`.
    pub constraint_norm: f64,
    /// Slack actually enforced (after the floor).
    pub epsilon: f64,
}

/// Splitting variables carried from one solve to the next. Vectors are in
/// the solver's internal scaling, so `scale` is kept alongside.
#[derive(Clone, Debug, PartialEq)]
pub struct BpdnState {
    z: DVector<f64>,
    u: DVector<f64>,
    v: DVector<f64>,
    r: DVector<f64>,
    rho: f64,
    scale: f64,
}

pub fn solve_bpdn(problem: &BpdnProblem, options: &BpdnOptions) -> Result<BpdnSolution> {
    solve_bpdn_warm(problem, options, None).map(|(s, _)| s)
}

/// Solves the problem, optionally starting from the state of a previous solve
/// with the same dimensions, and returns the final state for reuse.
pub fn solve_bpdn_warm(
    problem: &BpdnProblem,
    options: &BpdnOptions,
    warm: Option<&BpdnState>,
) -> Result<(BpdnSolution, BpdnState)> {
    let d = problem.offset.dim();
    let (m, n) = problem.matrix.shape();
    let eps = problem.epsilon.max(options.epsilon_floor);
    let w0 = problem.offset.to_dvector();
    let b_shift = &problem.rhs + &problem.matrix * &w0;

    let gap = range_distance(&problem.matrix, &b_shift);
    let feas_tol = options.tol.max(1e-12 * (1.0 + b_shift.norm()));
    if gap > eps + feas_tol {
        return Err(Error::Infeasible { slack: eps, residual: gap });
    }

    let alpha = spectral_norm(&problem.matrix);
    if alpha == 0.0 || m == 0 {
        // Every w satisfies the constraint, so w = 0 is optimal.
        let w = BlockVector::zeros(d, n / d);
        let step = BlockVector::new(d, (-w0).as_slice().to_vec())?;
        let solution = BpdnSolution {
            w,
            step,
            dual: DVector::zeros(m),
            status: SolveStatus::Converged,
            iterations: 0,
            primal_residual: 0.0,
            dual_residual: 0.0,
            constraint_norm: b_shift.norm(),
            epsilon: eps,
        };
        let state = BpdnState {
            z: DVector::zeros(n),
            u: DVector::zeros(n),
            v: DVector::zeros(m),
            r: DVector::zeros(m),
            rho: options.rho,
            scale: 1.0,
        };
        return Ok((solution, state));
    }

    let a = &problem.matrix / alpha;
    let bb = &b_shift / alpha;
    let ee = eps / alpha;
    let at = a.transpose();
    let gram = DMatrix::<f64>::identity(n, n) + &at * &a;
    let chol: Cholesky<f64, Dyn> = Cholesky::new(gram).expect("I + A^T A is positive definite");

    let (mut z, mut u, mut v, mut r, mut rho) = match warm {
        Some(s) if s.z.len() == n && s.v.len() == m => {
            let k = s.scale / alpha;
            (s.z.clone(), s.u.clone(), &s.v * k, &s.r * k, s.rho)
        }
        _ => {
            let r = project_ball(&bb - &a * &w0, ee);
            (w0.clone(), DVector::zeros(n), DVector::zeros(m), r, options.rho)
        }
    };
    let mut primal = f64::INFINITY;
    let mut dual = f64::INFINITY;
    let mut status = SolveStatus::IterationCap;
    let mut iterations = 0;

    let mut w = DVector::zeros(n);
    let mut aw = DVector::zeros(m);
    let mut tmp_m = DVector::zeros(m);
    let mut tmp_n = DVector::zeros(n);
    let mut z_old = DVector::zeros(n);
    let mut r_old = DVector::zeros(m);
    let mut w_hat = DVector::zeros(n);
    let mut aw_hat = DVector::zeros(m);

    for k in 1..=options.max_iterations {
        iterations = k;
        // w = (I + A^T A)^{-1} ((z - u) + A^T (bb - r - v))
        tmp_m.copy_from(&bb);
        tmp_m -= &r;
        tmp_m -= &v;
        w.copy_from(&z);
        w -= &u;
        w.gemv(1.0, &at, &tmp_m, 1.0);
        chol.solve_mut(&mut w);
        aw.gemv(1.0, &a, &w, 0.0);

        // over-relaxed copies of w and A w
        let relax = options.relaxation;
        z_old.copy_from(&z);
        r_old.copy_from(&r);
        w_hat.copy_from(&w);
        w_hat *= relax;
        w_hat.axpy(1.0 - relax, &z_old, 1.0);
        aw_hat.copy_from(&bb);
        aw_hat -= &r_old;
        aw_hat *= 1.0 - relax;
        aw_hat.axpy(relax, &aw, 1.0);

        z.copy_from(&w_hat);
        z += &u;
        shrink_blocks(z.as_mut_slice(), d, 1.0 / rho);

        r.copy_from(&bb);
        r -= &aw_hat;
        r -= &v;
        let rn = r.norm();
        if rn > ee {
            r *= ee / rn;
        }

        tmp_n.copy_from(&w_hat);
        tmp_n -= &z;
        u += &tmp_n;
        tmp_m.copy_from(&aw_hat);
        tmp_m += &r;
        tmp_m -= &bb;
        v += &tmp_m;

        tmp_n.copy_from(&w);
        tmp_n -= &z;
        let coupling = tmp_n.norm();
        tmp_m.copy_from(&aw);
        tmp_m += &r;
        tmp_m -= &bb;
        let misfit = tmp_m.norm();
        let primal_scaled = coupling + misfit;
        primal = alpha * primal_scaled;
        // stationarity of the Lagrangian: rho (u + A^T v) is R^T nu + g
        tmp_n.copy_from(&u);
        tmp_n.gemv(1.0, &at, &v, 1.0);
        dual = rho * tmp_n.norm();
        if primal <= options.tol && dual <= options.tol {
            status = SolveStatus::Converged;
            break;
        }
        if options.balance_every > 0 && k % options.balance_every == 0 {
            let f = options.balance_factor;
            if primal_scaled > 10.0 * dual {
                rho *= f;
                u /= f;
                v /= f;
            } else if dual > 10.0 * primal_scaled {
                rho /= f;
                u *= f;
                v *= f;
            }
        }
    }

    let constraint_norm = (&b_shift - &problem.matrix * &z).norm();
    let dual_vec = &v * (rho / alpha);
    let w_out = BlockVector::new(d, z.as_slice().to_vec())?;
    let step = BlockVector::new(d, (&z - &w0).as_slice().to_vec())?;
    let solution = BpdnSolution {
        w: w_out,
        step,
        dual: dual_vec,
        status,
        iterations,
        primal_residual: primal,
        dual_residual: dual,
        constraint_norm,
        epsilon: eps,
    };
    Ok((solution, BpdnState { z, u, v, r, rho, scale: alpha }))
}

fn project_ball(x: DVector<f64>, radius: f64) -> DVector<f64> {
    let n = x.norm();
    if n <= radius {
        x
    } else {
        x * (radius / n)
    }
}

fn spectral_norm(a: &DMatrix<f64>) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    a.clone().svd(false, false).singular_values.max()
}

/// `min_w ||b - R w||_2`, via the pseudo-inverse.
fn range_distance(a: &DMatrix<f64>, b: &DVector<f64>) -> f64 {
    if a.is_empty() {
        return b.norm();
    }
    let svd = a.clone().svd(true, false);
    let smax = svd.singular_values.max();
    let tol = a.nrows().max(a.ncols()) as f64 * f64::EPSILON * smax;
    let u = svd.u.as_ref().expect("requested U");
    let mut proj = DVector::zeros(b.len());
    for (k, &s) in svd.singular_values.iter().enumerate() {
        if s > tol {
            let col = u.column(k);
            proj += col * col.dot(b);
        }
    }
    (b - proj).norm()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn soft_threshold_examples() {
        let v = BlockVector::from_blocks(2, &[[3.0, 4.0], [0.0, 0.0], [0.3, 0.4]]).unwrap();
        let t = group_soft_threshold(&v, 2.5);
        assert_eq!(t.block(0), &[1.5, 2.0]);
        assert_eq!(t.block(1), &[0.0, 0.0]);
        assert_eq!(t.block(2), &[0.0, 0.0]);
        assert_eq!(group_soft_threshold(&v, 0.0), v);
    }

    /// The prox value per block, compared with a fine line search along the
    /// block direction (the minimizer is a non-negative multiple of it).
    #[test]
    fn soft_threshold_is_the_proximal_map() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let b: Vec<f64> = (0..3).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let lambda = rng.gen_range(0.0..2.5);
            let v = BlockVector::new(3, b.clone()).unwrap();
            let p = group_soft_threshold(&v, lambda);
            let nb = v.norm2();
            let obj = |t: f64| lambda * t * nb + 0.5 * (1.0 - t).powi(2) * nb * nb;
            let (mut best_t, mut best) = (0.0, obj(0.0));
            for k in 0..=100_000 {
                let t = k as f64 / 100_000.0;
                if obj(t) < best {
                    best = obj(t);
                    best_t = t;
                }
            }
            for (pi, bi) in p.as_slice().iter().zip(&b) {
                assert!((pi - best_t * bi).abs() < 1e-4, "{pi} vs {}", best_t * bi);
            }
        }
    }

    #[test]
    fn identity_block_is_ball_projection() {
        let b = DVector::from_vec(vec![3.0, 4.0]);
        let p = BpdnProblem::without_offset(DMatrix::identity(2, 2), b, 1.0, 2).unwrap();
        let s = solve_bpdn(&p, &BpdnOptions::default()).unwrap();
        assert_eq!(s.status, SolveStatus::Converged);
        assert!((s.w.block(0)[0] - 2.4).abs() < 1e-7 && (s.w.block(0)[1] - 3.2).abs() < 1e-7, "{:?}", s.w);
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = DMatrix::from_fn(5, 6, |_, _| rng.gen_range(-1.0..1.0));
        for eps in [0.0, 0.5] {
            let p = BpdnProblem::without_offset(a.clone(), DVector::zeros(5), eps, 2).unwrap();
            let s = solve_bpdn(&p, &BpdnOptions::default()).unwrap();
            assert_eq!(s.w.norm2(), 0.0);
        }
    }

    #[test]
    fn infeasible_slack_is_reported() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        let b = DVector::from_vec(vec![1.0, 1.0]);
        let p = BpdnProblem::without_offset(a, b, 0.5, 1).unwrap();
        assert!(matches!(solve_bpdn(&p, &BpdnOptions::default()), Err(Error::Infeasible { .. })));
    }

    #[test]
    fn optimality_certificate_holds() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let d = 2;
        let a = DMatrix::from_fn(8, 12, |_, _| rng.gen_range(-1.0..1.0));
        let truth = DVector::from_vec(vec![1.0, -0.5, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.7, 0.2, 0.0, 0.0]);
        let b = &a * &truth;
        let offset = BlockVector::new(d, (0..12).map(|_| rng.gen_range(-0.2..0.2)).collect()).unwrap();
        let p = BpdnProblem::new(a.clone(), b - &a * offset.to_dvector(), 0.05, offset.clone()).unwrap();
        let opts = BpdnOptions::default();
        let s = solve_bpdn(&p, &opts).unwrap();
        assert_eq!(s.status, SolveStatus::Converged);
        assert!(s.constraint_norm <= 0.05 + opts.tol);
        let g = a.transpose() * &s.dual;
        for i in 0..6 {
            let wi = s.w.block(i);
            let gi = &g.as_slice()[d * i..d * i + d];
            let nw = wi.iter().map(|x| x * x).sum::<f64>().sqrt();
            if nw > 0.0 {
                for k in 0..d {
                    assert!((gi[k] + wi[k] / nw).abs() <= 10.0 * opts.tol, "block {i}: {gi:?} vs {wi:?}");
                }
            } else {
                assert!(gi.iter().map(|x| x * x).sum::<f64>().sqrt() <= 1.0 + 10.0 * opts.tol);
            }
        }
        let x = (&s.w - &offset).to_dvector();
        assert!((x - s.step.to_dvector()).norm() < 1e-12);
    }

    #[test]
    fn warm_start_reaches_same_point() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a = DMatrix::from_fn(6, 8, |_, _| rng.gen_range(-1.0..1.0));
        let b = DVector::from_fn(6, |_, _| rng.gen_range(-1.0..1.0));
        let p = BpdnProblem::without_offset(a.clone(), b.clone(), 0.1, 2).unwrap();
        let (cold, state) = solve_bpdn_warm(&p, &BpdnOptions::default(), None).unwrap();
        let p2 = BpdnProblem::without_offset(a, b * 1.01, 0.1, 2).unwrap();
        let (warm, _) = solve_bpdn_warm(&p2, &BpdnOptions::default(), Some(&state)).unwrap();
        let (again, _) = solve_bpdn_warm(&p2, &BpdnOptions::default(), None).unwrap();
        assert!((warm.w.to_dvector() - again.w.to_dvector()).norm() < 1e-6);
        assert!(cold.w.norm2() > 0.0);
    }
}
