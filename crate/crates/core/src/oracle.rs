//! Exhaustive references for small instances. Slow by design; every search
//! is bounded by a hard guard instead of being silently truncated.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measurement::sample_sphere_with;
use crate::model::BlockVector;
use crate::rigidity::{numerical_rank, NullBasis};

/// Largest number of agents accepted by [`brute_force_l0_recover`].
pub const L0_MAX_AGENTS: usize = 12;
/// Largest sparsity accepted by [`brute_force_l0_recover`].
pub const L0_MAX_SPARSITY: usize = 4;
/// Largest column count accepted by [`brute_force_block_spark`].
pub const SPARK_MAX_COLUMNS: usize = 24;
/// Relative residual below which a least-squares fit counts as exact.
pub const EXACT_FIT_RTOL: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleResult<T> {
    pub value: T,
    /// Number of candidates (supports, subsets or samples) evaluated.
    pub instances_examined: usize,
    pub unique: bool,
}

/// Sparsest exact solution of `z = R x`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct L0Solution {
    pub x: BlockVector,
    pub support: Vec<usize>,
    /// Every support of the minimal size that fits `z` exactly.
    pub fitting_supports: Vec<Vec<usize>>,
}

/// Worst sample of the null-space ratio.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NspSample {
    pub tau_hat: f64,
    pub v: BlockVector,
    pub subset: Vec<usize>,
}

/// All `k`-subsets of `0..n` in lexicographic order.
pub fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if k > n {
        return out;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        out.push(idx.clone());
        let Some(pos) = (0..k).rev().find(|&i| idx[i] != i + n - k) else {
            return out;
        };
        idx[pos] += 1;
        for j in pos + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

fn block_columns(r: &DMatrix<f64>, d: usize, subset: &[usize]) -> DMatrix<f64> {
    let mut cols = Vec::with_capacity(d * subset.len());
    for &i in subset {
        for k in 0..d {
            cols.push(r.column(d * i + k).into_owned());
        }
    }
    if cols.is_empty() {
        DMatrix::zeros(r.nrows(), 0)
    } else {
        DMatrix::from_columns(&cols)
    }
}

fn matrix_rank(m: &DMatrix<f64>) -> usize {
    if m.is_empty() {
        return 0;
    }
    let sv = m.clone().svd(false, false).singular_values;
    numerical_rank(sv.as_slice(), m.nrows(), m.ncols())
}

fn check_blocks(r: &DMatrix<f64>, d: usize) -> Result<usize> {
    if d == 0 || r.ncols() % d != 0 {
        return Err(Error::InvalidArgument(format!("{} columns do not form blocks of size {d}", r.ncols())));
    }
    Ok(r.ncols() / d)
}

/// Solves `min ||x||_{2,0}` subject to `R x = z` by trying every support of
/// size `0..=s_max` with a least-squares fit.
///
/// `unique` is false when another support of the same size also fits, or
/// when the fitting columns are rank deficient.
pub fn brute_force_l0_recover(
    r: &DMatrix<f64>,
    z: &DVector<f64>,
    d: usize,
    s_max: usize,
) -> Result<OracleResult<L0Solution>> {
    let n = check_blocks(r, d)?;
    if n > L0_MAX_AGENTS || s_max > L0_MAX_SPARSITY {
        return Err(Error::GuardExceeded(format!(
            "l0 search needs at most {L0_MAX_AGENTS} agents and sparsity {L0_MAX_SPARSITY}, got {n} and {s_max}"
        )));
    }
    if r.nrows() != z.len() {
        return Err(Error::LengthMismatch { expected: r.nrows(), actual: z.len() });
    }
    let tol = EXACT_FIT_RTOL * z.norm().max(1.0);
    let mut examined = 0;
    for k in 0..=s_max.min(n) {
        let mut fits: Vec<(Vec<usize>, DVector<f64>, bool)> = Vec::new();
        for subset in combinations(n, k) {
            examined += 1;
            let cols = block_columns(r, d, &subset);
            let (coef, full_rank) = if k == 0 {
                (DVector::zeros(0), true)
            } else {
                let svd = cols.clone().svd(true, true);
                let eps = cols.nrows().max(cols.ncols()) as f64 * f64::EPSILON * svd.singular_values.max();
                let rank = numerical_rank(svd.singular_values.as_slice(), cols.nrows(), cols.ncols());
                (svd.solve(z, eps).expect("U and V were computed"), rank == d * k)
            };
            let residual = if k == 0 { z.norm() } else { (z - &cols * &coef).norm() };
            if residual < tol {
                fits.push((subset, coef, full_rank));
            }
        }
        if let Some((support, coef, full_rank)) = fits.first().cloned() {
            let mut x = BlockVector::zeros(d, n);
            for (slot, &i) in support.iter().enumerate() {
                x.block_mut(i).copy_from_slice(&coef.as_slice()[d * slot..d * slot + d]);
            }
            let unique = fits.len() == 1 && full_rank;
            let fitting_supports = fits.into_iter().map(|f| f.0).collect();
            return Ok(OracleResult { value: L0Solution { x, support, fitting_supports }, instances_examined: examined, unique });
        }
    }
    Err(Error::NoExactSolution(s_max))
}

/// Smallest number of non-zero blocks of a non-zero kernel vector of `R`,
/// searched over block subsets of size `1..=cap`.
pub fn brute_force_block_spark(r: &DMatrix<f64>, d: usize, cap: usize) -> Result<OracleResult<usize>> {
    let n = check_blocks(r, d)?;
    if r.ncols() > SPARK_MAX_COLUMNS {
        return Err(Error::GuardExceeded(format!(
            "block spark needs at most {SPARK_MAX_COLUMNS} columns, got {}",
            r.ncols()
        )));
    }
    let mut examined = 0;
    for k in 1..=cap.min(n) {
        let mut hits = 0;
        for subset in combinations(n, k) {
            examined += 1;
            if matrix_rank(&block_columns(r, d, &subset)) < d * k {
                hits += 1;
            }
        }
        if hits > 0 {
            return Ok(OracleResult { value: k, instances_examined: examined, unique: hits == 1 });
        }
    }
    Err(Error::NoKernelWithinCap(cap))
}

fn lq(values: &[f64], q: f64) -> f64 {
    values.iter().map(|b| b.powf(q)).sum::<f64>().powf(1.0 / q)
}

/// Samples `samples` unit coefficient vectors in an orthonormalized null
/// basis and returns the largest `||v_S||_{2,q} / ||v_{S^c}||_{2,q}` with
/// `S` the `s` largest blocks of each sample.
pub fn brute_force_nsp(basis: &NullBasis, s: usize, q: f64, samples: usize, seed: u64) -> Result<OracleResult<NspSample>> {
    if samples == 0 {
        return Err(Error::InvalidArgument("at least one sample is required".into()));
    }
    if !(q > 0.0 && q <= 1.0) {
        return Err(Error::InvalidArgument(format!("q must lie in (0, 1], got {q}")));
    }
    let d = basis.dim;
    let Some(first) = basis.vectors.first() else {
        return Err(Error::InvalidArgument("null basis is empty".into()));
    };
    let n = first.num_blocks();
    let cols: Vec<DVector<f64>> = basis.vectors.iter().map(BlockVector::to_dvector).collect();
    let q_factor = DMatrix::from_columns(&cols).qr().q();
    let k = q_factor.ncols();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = NspSample { tau_hat: 0.0, v: BlockVector::zeros(d, n), subset: Vec::new() };
    for _ in 0..samples {
        let c = DVector::from_vec(sample_sphere_with(&mut rng, k, 1.0));
        let v = BlockVector::from_dvector(d, &(&q_factor * c))?;
        if s == 0 {
            if best.v.norm2() == 0.0 {
                best.v = v;
            }
            continue;
        }
        let norms = v.block_norms();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| norms[b].total_cmp(&norms[a]).then(a.cmp(&b)));
        let mut subset = order[..s.min(n)].to_vec();
        subset.sort_unstable();
        let top: Vec<f64> = subset.iter().map(|&i| norms[i]).collect();
        let rest: Vec<f64> = order[s.min(n)..].iter().map(|&i| norms[i]).collect();
        let denom = lq(&rest, q);
        let ratio = if denom > 0.0 { lq(&top, q) / denom } else { f64::INFINITY };
        if ratio > best.tau_hat {
            best = NspSample { tau_hat: ratio, v, subset };
        }
    }
    Ok(OracleResult { value: best, instances_examined: samples, unique: true })
}
