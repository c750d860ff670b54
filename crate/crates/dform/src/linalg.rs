//! Sparse matrices, an LSQR least-squares solver, and thin bridges to faer
//! for factorizations and dense decompositions.

use faer::sparse::{SparseColMat, Triplet};
use faer::Mat;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};

/// Compressed sparse rows with sorted, duplicate-free column indices.
#[derive(Clone, Debug)]
pub struct Csr {
    pub nrows: usize,
    pub ncols: usize,
    pub indptr: Vec<usize>,
    pub indices: Vec<usize>,
    pub values: Vec<f64>,
}

impl Csr {
    /// Duplicate entries are summed.
    pub fn from_triplets(nrows: usize, ncols: usize, trip: &[(usize, usize, f64)]) -> Self {
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); nrows];
        for &(r, c, v) in trip {
            debug_assert!(r < nrows && c < ncols);
            rows[r].push((c, v));
        }
        Self::from_rows(nrows, ncols, rows)
    }

    pub fn from_rows(nrows: usize, ncols: usize, mut rows: Vec<Vec<(usize, f64)>>) -> Self {
        let mut indptr = Vec::with_capacity(nrows + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        for row in rows.iter_mut() {
            row.sort_by_key(|e| e.0);
            let mut last = usize::MAX;
            for &(c, v) in row.iter() {
                if c == last {
                    *values.last_mut().unwrap() += v;
                } else {
                    indices.push(c);
                    values.push(v);
                    last = c;
                }
            }
            indptr.push(indices.len());
        }
        Self { nrows, ncols, indptr, indices, values }
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.indptr[r]..self.indptr[r + 1];
        self.indices[span.clone()].iter().copied().zip(self.values[span].iter().copied())
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.ncols);
        (0..self.nrows).into_par_iter().map(|r| self.row(r).map(|(c, v)| v * x[c]).sum()).collect()
    }

    /// `Aᵀy`, accumulated in row order so the result does not depend on the
    /// thread count.
    pub fn mul_t_vec(&self, y: &[f64]) -> Vec<f64> {
        assert_eq!(y.len(), self.nrows);
        let mut out = vec![0.0; self.ncols];
        for (r, &yr) in y.iter().enumerate() {
            if yr != 0.0 {
                for (c, v) in self.row(r) {
                    out[c] += v * yr;
                }
            }
        }
        out
    }

    /// `diag(row_w) · A · diag(col_w)`.
    pub fn scaled(&self, row_w: &[f64], col_w: &[f64]) -> Self {
        let mut out = self.clone();
        for r in 0..self.nrows {
            for i in self.indptr[r]..self.indptr[r + 1] {
                out.values[i] *= row_w[r] * col_w[self.indices[i]];
            }
        }
        out
    }

    pub fn norm_fro(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// `AᵀA`.
    pub fn gram(&self) -> Self {
        let mut trip = Vec::new();
        for r in 0..self.nrows {
            let row: Vec<(usize, f64)> = self.row(r).collect();
            for &(i, a) in &row {
                for &(j, b) in &row {
                    trip.push((i, j, a * b));
                }
            }
        }
        Self::from_triplets(self.ncols, self.ncols, &trip)
    }

    pub fn to_faer(&self) -> Result<SparseColMat<usize, f64>> {
        let trip: Vec<Triplet<usize, usize, f64>> = (0..self.nrows)
            .flat_map(|r| self.row(r).map(move |(c, v)| Triplet::new(r, c, v)))
            .collect();
        SparseColMat::try_new_from_triplets(self.nrows, self.ncols, &trip)
            .map_err(|e| Error::SolverDiverged(format!("sparse assembly: {e:?}")))
    }

    pub fn to_dense(&self) -> Mat<f64> {
        let mut m = Mat::zeros(self.nrows, self.ncols);
        for r in 0..self.nrows {
            for (c, v) in self.row(r) {
                m[(r, c)] += v;
            }
        }
        m
    }
}

/// Outcome of an iterative or direct solve.
#[derive(Clone, Debug, Default, Serialize)]
pub struct SolverStats {
    pub unknowns: usize,
    pub iterations: usize,
    /// `‖Ax − b‖ / ‖b‖` (0 when `b = 0`).
    pub relative_residual: f64,
    /// `‖Aᵀ(Ax − b)‖ / (‖A‖_F ‖Ax − b‖)`, the least-squares optimality measure.
    pub normal_residual: f64,
}

/// A sparse system together with how its unknowns are laid out.
#[derive(Clone, Debug)]
pub struct LinearSystem {
    pub matrix: Csr,
    pub rhs: Vec<f64>,
    pub layout: String,
    pub stats: SolverStats,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn residual_stats(a: &Csr, x: &[f64], b: &[f64], iterations: usize) -> SolverStats {
    let ax = a.mul_vec(x);
    let r: Vec<f64> = ax.iter().zip(b).map(|(p, q)| p - q).collect();
    let rn = norm(&r);
    let bn = norm(b);
    let atr = norm(&a.mul_t_vec(&r));
    let an = a.norm_fro();
    SolverStats {
        unknowns: a.ncols,
        iterations,
        relative_residual: if bn > 0.0 { rn / bn } else { rn },
        normal_residual: if rn > 0.0 && an > 0.0 { atr / (an * rn) } else { 0.0 },
    }
}

/// Confirmations without progress after which LSQR accepts a roundoff floor.
const STALL_CHECKS: usize = 10;

/// LSQR for `min ‖Ax − b‖` started from zero, so the iterates stay in the
/// row space and converge to the minimum-norm solution.
///
/// Stops when `‖r‖ ≤ tol·‖b‖` or `‖Aᵀr‖ ≤ tol·‖A‖·‖r‖`, or when the
/// estimates pass but the true optimality has stopped improving.
pub fn lsqr(a: &Csr, b: &[f64], tol: f64, max_iter: usize) -> Result<(Vec<f64>, SolverStats)> {
    let n = a.ncols;
    let mut x = vec![0.0; n];
    let bnorm = norm(b);
    if bnorm == 0.0 {
        return Ok((x, SolverStats { unknowns: n, ..Default::default() }));
    }
    let anorm = a.norm_fro();
    let mut u: Vec<f64> = b.iter().map(|v| v / bnorm).collect();
    let mut beta = bnorm;
    let mut v = a.mul_t_vec(&u);
    let mut alpha = norm(&v);
    if alpha == 0.0 {
        return Ok((x.clone(), residual_stats(a, &x, b, 0)));
    }
    v.iter_mut().for_each(|e| *e /= alpha);
    let mut w = v.clone();
    let mut phibar = beta;
    let mut rhobar = alpha;
    let mut best_true = f64::INFINITY;
    let mut stalled = 0;
    for it in 1..=max_iter {
        let av = a.mul_vec(&v);
        u.iter_mut().zip(&av).for_each(|(ui, avi)| *ui = avi - alpha * *ui);
        beta = norm(&u);
        if beta > 0.0 {
            u.iter_mut().for_each(|e| *e /= beta);
            let atu = a.mul_t_vec(&u);
            v.iter_mut().zip(&atu).for_each(|(vi, ai)| *vi = ai - beta * *vi);
            alpha = norm(&v);
            if alpha > 0.0 {
                v.iter_mut().for_each(|e| *e /= alpha);
            }
        }
        let rho = rhobar.hypot(beta);
        let c = rhobar / rho;
        let s = beta / rho;
        let theta = s * alpha;
        rhobar = -c * alpha;
        let phi = c * phibar;
        phibar *= s;
        let t1 = phi / rho;
        let t2 = -theta / rho;
        x.iter_mut().zip(&w).for_each(|(xi, wi)| *xi += t1 * wi);
        w.iter_mut().zip(&v).for_each(|(wi, vi)| *wi = vi + t2 * *wi);
        // phibar estimates ‖r‖ and phibar·alpha·|c| estimates ‖Aᵀr‖
        let rnorm = phibar;
        let arnorm = phibar * alpha * c.abs();
        if rnorm <= tol * bnorm || arnorm <= tol * anorm * rnorm || alpha == 0.0 || beta == 0.0 {
            let stats = residual_stats(a, &x, b, it);
            if stats.relative_residual <= tol.max(1e-14) * 10.0 || stats.normal_residual <= tol * 10.0 {
                return Ok((x, stats));
            }
            // the estimates have converged but the true measure sits on its
            // roundoff floor; iterating further only loses orthogonality
            if stats.normal_residual < 0.9 * best_true {
                best_true = stats.normal_residual;
                stalled = 0;
            } else {
                stalled += 1;
                if stalled >= STALL_CHECKS {
                    return Ok((x, stats));
                }
            }
        }
    }
    let stats = residual_stats(a, &x, b, max_iter);
    if stats.relative_residual <= tol * 10.0 || stats.normal_residual <= tol * 10.0 {
        return Ok((x, stats));
    }
    Err(Error::SolverDiverged(format!(
        "lsqr stopped after {max_iter} iterations at relative residual {:.3e}, normal residual {:.3e}",
        stats.relative_residual, stats.normal_residual
    )))
}

/// Sparse LU solve of a square system.
pub fn solve_square(a: &Csr, b: &[f64]) -> Result<(Vec<f64>, SolverStats)> {
    use faer::prelude::Solve;
    if a.nrows != a.ncols {
        return Err(Error::DimensionMismatch(a.nrows, a.ncols));
    }
    let lu = a.to_faer()?.sp_lu().map_err(|e| Error::SolverDiverged(format!("sparse LU: {e:?}")))?;
    let rhs = faer::Col::<f64>::from_fn(b.len(), |i| b[i]);
    let x = lu.solve(&rhs);
    let x: Vec<f64> = (0..x.nrows()).map(|i| x[i]).collect();
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::SolverDiverged("sparse LU produced non-finite values".into()));
    }
    let stats = residual_stats(a, &x, b, 1);
    Ok((x, stats))
}

/// Sparse Cholesky factor of a symmetric positive definite matrix, reused
/// across right-hand sides.
pub struct Cholesky {
    llt: faer::sparse::linalg::solvers::Llt<usize, f64>,
    n: usize,
}

impl Cholesky {
    pub fn new(a: &Csr) -> Result<Self> {
        let llt = a
            .to_faer()?
            .sp_cholesky(faer::Side::Lower)
            .map_err(|e| Error::SolverDiverged(format!("sparse Cholesky: {e:?}")))?;
        Ok(Self { llt, n: a.nrows })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        use faer::prelude::Solve;
        let rhs = faer::Col::<f64>::from_fn(self.n, |i| b[i]);
        let x = self.llt.solve(&rhs);
        (0..self.n).map(|i| x[i]).collect()
    }
}

/// Singular triplets of a dense matrix, values in increasing order.
pub struct SmallestSingular {
    pub values: Vec<f64>,
    /// Right singular vectors matching `values`, each of length `ncols`.
    pub vectors: Vec<Vec<f64>>,
    /// Largest singular value (an estimate for the iterative path).
    pub largest: f64,
}

/// All singular values of a dense copy of `a`; only sensible for small
/// matrices.
pub fn dense_smallest_singular(a: &Csr, count: usize) -> Result<SmallestSingular> {
    let m = a.to_dense();
    let svd = m.thin_svd().map_err(|e| Error::SolverDiverged(format!("svd: {e:?}")))?;
    let s = svd.S().column_vector();
    let k = s.nrows();
    let v = svd.V();
    // faer returns singular values in decreasing order
    let mut values = Vec::new();
    let mut vectors = Vec::new();
    for j in (0..k).rev().take(count) {
        values.push(s[j]);
        vectors.push((0..v.nrows()).map(|i| v[(i, j)]).collect());
    }
    Ok(SmallestSingular { values, vectors, largest: if k > 0 { s[0] } else { 0.0 } })
}

/// Smallest singular triplets of a sparse matrix by shift-inverted subspace
/// iteration on `AᵀA + μI`, finished with a Rayleigh–Ritz step on `A`.
pub fn sparse_smallest_singular(a: &Csr, count: usize, seed: u64) -> Result<SmallestSingular> {
    let n = a.ncols;
    let block = (count + 6).min(n);
    let gram = a.gram();
    let largest = power_largest(a, 60, seed);
    let mu = 1e-10 * largest * largest;
    let mut shifted = gram.clone();
    for r in 0..n {
        for i in shifted.indptr[r]..shifted.indptr[r + 1] {
            if shifted.indices[i] == r {
                shifted.values[i] += mu;
            }
        }
    }
    let chol = Cholesky::new(&shifted)?;
    let mut rng = crate::rng::Rng::new(seed);
    let mut q: Vec<Vec<f64>> = (0..block).map(|_| rng.vec(n)).collect();
    orthonormalize(&mut q);
    let mut prev: Vec<f64> = vec![f64::INFINITY; block];
    for _ in 0..200 {
        let mut z: Vec<Vec<f64>> = q.par_iter().map(|col| chol.solve(col)).collect();
        orthonormalize(&mut z);
        q = z;
        let (vals, _) = ritz(a, &q)?;
        let settled = vals.iter().zip(&prev).take(count).all(|(a, b)| (a - b).abs() <= 1e-13 * largest + 1e-11 * a.abs());
        prev = vals;
        if settled {
            break;
        }
    }
    let (values, vectors) = ritz(a, &q)?;
    Ok(SmallestSingular {
        values: values.into_iter().take(count).collect(),
        vectors: vectors.into_iter().take(count).collect(),
        largest,
    })
}

fn power_largest(a: &Csr, iters: usize, seed: u64) -> f64 {
    let mut v = crate::rng::Rng::new(seed ^ 0x5eed).vec(a.ncols);
    let mut s = 0.0;
    for _ in 0..iters {
        let nv = norm(&v);
        v.iter_mut().for_each(|e| *e /= nv);
        let w = a.mul_t_vec(&a.mul_vec(&v));
        s = norm(&w).sqrt();
        v = w;
    }
    s
}

/// Modified Gram–Schmidt, applied twice.
fn orthonormalize(q: &mut [Vec<f64>]) {
    for _ in 0..2 {
        for j in 0..q.len() {
            for i in 0..j {
                let (head, tail) = q.split_at_mut(j);
                let d: f64 = head[i].iter().zip(&tail[0]).map(|(a, b)| a * b).sum();
                tail[0].iter_mut().zip(&head[i]).for_each(|(t, h)| *t -= d * h);
            }
            let nq = norm(&q[j]);
            q[j].iter_mut().for_each(|e| *e /= nq);
        }
    }
}

/// Singular values of `A Q` in increasing order with the matching vectors
/// `Q v`.
fn ritz(a: &Csr, q: &[Vec<f64>]) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let p = q.len();
    let cols: Vec<Vec<f64>> = q.par_iter().map(|c| a.mul_vec(c)).collect();
    let small = Mat::<f64>::from_fn(a.nrows, p, |i, j| cols[j][i]);
    let svd = small.thin_svd().map_err(|e| Error::SolverDiverged(format!("svd: {e:?}")))?;
    let s = svd.S().column_vector();
    let v = svd.V();
    let mut vals = Vec::new();
    let mut vecs = Vec::new();
    for j in (0..s.nrows()).rev() {
        vals.push(s[j]);
        let mut x = vec![0.0; a.ncols];
        for (l, ql) in q.iter().enumerate() {
            let c = v[(l, j)];
            x.iter_mut().zip(ql).for_each(|(xi, qi)| *xi += c * qi);
        }
        vecs.push(x);
    }
    Ok((vals, vecs))
}

/// Minimum-norm least-squares solution of a dense system through the SVD,
/// discarding singular values below `rcond · σ_max`.
pub fn dense_min_norm(a: &Csr, b: &[f64], rcond: f64) -> Result<(Vec<f64>, SolverStats)> {
    let m = a.to_dense();
    let svd = m.thin_svd().map_err(|e| Error::SolverDiverged(format!("svd: {e:?}")))?;
    let s = svd.S().column_vector();
    let (u, v) = (svd.U(), svd.V());
    let smax = if s.nrows() > 0 { s[0] } else { 0.0 };
    let mut x = vec![0.0; a.ncols];
    for j in 0..s.nrows() {
        if s[j] <= rcond * smax {
            continue;
        }
        let c: f64 = (0..a.nrows).map(|i| u[(i, j)] * b[i]).sum::<f64>() / s[j];
        for (i, xi) in x.iter_mut().enumerate() {
            *xi += c * v[(i, j)];
        }
    }
    let stats = residual_stats(a, &x, b, 1);
    Ok((x, stats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    fn random_sparse(rng: &mut Rng, m: usize, n: usize) -> Csr {
        let mut trip = Vec::new();
        for r in 0..m {
            for _ in 0..3 {
                trip.push((r, rng.below(n), rng.sym()));
            }
            if r < n {
                trip.push((r, r, 2.0));
            }
        }
        Csr::from_triplets(m, n, &trip)
    }

    #[test]
    fn duplicates_are_summed() {
        let a = Csr::from_triplets(2, 2, &[(0, 1, 1.0), (0, 1, 2.0), (1, 0, -1.0)]);
        assert_eq!(a.nnz(), 2);
        assert_eq!(a.mul_vec(&[1.0, 1.0]), vec![3.0, -1.0]);
        assert_eq!(a.mul_t_vec(&[1.0, 1.0]), vec![-1.0, 3.0]);
    }

    #[test]
    fn lsqr_matches_dense_least_squares() {
        let mut rng = Rng::new(3);
        let a = random_sparse(&mut rng, 40, 25);
        let b = rng.vec(40);
        let (x, stats) = lsqr(&a, &b, 1e-12, 1000).unwrap();
        let (y, _) = dense_min_norm(&a, &b, 1e-14).unwrap();
        let err = x.iter().zip(&y).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
        assert!(err < 1e-8, "{err} {stats:?}");
    }

    #[test]
    fn lsqr_gives_the_minimum_norm_solution() {
        // x₀ + x₁ = 2 has minimum-norm solution (1, 1)
        let a = Csr::from_triplets(1, 2, &[(0, 0, 1.0), (0, 1, 1.0)]);
        let (x, _) = lsqr(&a, &[2.0], 1e-12, 10).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-12 && (x[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sparse_lu_and_cholesky_solve() {
        let mut rng = Rng::new(5);
        let a = random_sparse(&mut rng, 30, 30);
        let spd = a.gram();
        let b = rng.vec(30);
        let (x, stats) = solve_square(&a, &b).unwrap();
        assert!(stats.relative_residual < 1e-12);
        let ax = a.mul_vec(&x);
        assert!(ax.iter().zip(&b).all(|(p, q)| (p - q).abs() < 1e-10));
        let y = Cholesky::new(&spd).unwrap().solve(&b);
        let sy = spd.mul_vec(&y);
        assert!(sy.iter().zip(&b).all(|(p, q)| (p - q).abs() < 1e-9));
    }

    #[test]
    fn iterative_and_dense_singular_values_agree() {
        let mut rng = Rng::new(9);
        let mut a = random_sparse(&mut rng, 60, 40);
        // plant a two-dimensional kernel
        for r in 0..a.nrows {
            for i in a.indptr[r]..a.indptr[r + 1] {
                if a.indices[i] < 2 {
                    a.values[i] = 0.0;
                }
            }
        }
        let d = dense_smallest_singular(&a, 4).unwrap();
        let s = sparse_smallest_singular(&a, 4, 1).unwrap();
        assert!(d.values[0] < 1e-12 && d.values[1] < 1e-12);
        for (p, q) in d.values.iter().zip(&s.values).skip(2) {
            assert!((p - q).abs() < 1e-8 * p.max(1.0), "{p} {q}");
        }
        assert!(s.values[0] < 1e-6 && s.values[1] < 1e-6);
    }
}
