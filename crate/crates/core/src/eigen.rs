//! Dense symmetric matrices and their leading eigenpairs.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par;

/// Dense square matrix stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; n * n],
        }
    }

    /// Fills row `i` with `f(i, j)`; rows are built in parallel.
    pub fn from_fn<F>(n: usize, f: F) -> Self
    where
        F: Fn(usize, usize) -> f64 + Sync,
    {
        let mut data = vec![0.0; n * n];
        par::for_each_row(&mut data, n, |i, row| {
            for (j, v) in row.iter_mut().enumerate() {
                *v = f(i, j);
            }
        });
        Self { n, data }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    /// Replaces the matrix by `(S + Sᵀ)/2`.
    pub fn symmetrize(&mut self) {
        let n = self.n;
        for i in 0..n {
            for j in i + 1..n {
                let m = 0.5 * (self.data[i * n + j] + self.data[j * n + i]);
                self.data[i * n + j] = m;
                self.data[j * n + i] = m;
            }
        }
    }

    /// Largest `|S_ij - S_ji|`.
    pub fn asymmetry(&self) -> f64 {
        let n = self.n;
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                worst = worst.max((self.data[i * n + j] - self.data[j * n + i]).abs());
            }
        }
        worst
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    /// `Σ S_ij²`, equal to `tr(S²)` for symmetric `S`.
    pub fn frobenius_sq(&self) -> f64 {
        par::sum_range(self.n, |i| self.row(i).iter().map(|v| v * v).sum())
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n);
        par::map_range(self.n, |i| dot(self.row(i), x))
    }

    pub fn to_dmatrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.n, self.n, &self.data)
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Leading eigenpairs, eigenvalues in descending order.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EigenPairs {
    pub values: Vec<f64>,
    /// Unit eigenvectors, one per value.
    pub vectors: Vec<Vec<f64>>,
    /// Lanczos steps taken.
    pub iterations: usize,
    /// Largest residual `|S v - μ v|` among the returned pairs.
    pub max_residual: f64,
}

/// Settings for [`top_eigenpairs`].
#[derive(Debug, Clone, Copy)]
pub struct LanczosSettings {
    /// Residual tolerance relative to the largest eigenvalue magnitude.
    pub tolerance: f64,
    pub max_iterations: usize,
    pub seed: u64,
}

impl Default for LanczosSettings {
    fn default() -> Self {
        Self {
            tolerance: 1e-10,
            max_iterations: 2000,
            seed: 0x5eed_1a2c,
        }
    }
}

/// The `k` algebraically largest eigenpairs of a symmetric matrix, by Lanczos
/// with full reorthogonalization.
pub fn top_eigenpairs(s: &SymMatrix, k: usize) -> Result<EigenPairs> {
    top_eigenpairs_with(s, k, LanczosSettings::default())
}

pub fn top_eigenpairs_with(s: &SymMatrix, k: usize, cfg: LanczosSettings) -> Result<EigenPairs> {
    let n = s.dim();
    if k == 0 || k > n {
        return Err(Error::InvalidParameter(format!(
            "requested {k} eigenpairs of a {n}x{n} matrix"
        )));
    }
    if n <= 64 {
        return dense_top(s, k);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new();

    let mut q = random_unit(&mut rng, n, &basis).expect("nonempty space");
    let max_steps = cfg.max_iterations.min(n);
    let mut check_at = (2 * k + 20).min(max_steps);
    let mut last_residual = f64::INFINITY;
    loop {
        basis.push(q.clone());
        let mut w = s.matvec(&q);
        let a = dot(&w, &q);
        alpha.push(a);
        // Two passes of Gram-Schmidt against the whole basis.
        for _ in 0..2 {
            let coeffs: Vec<f64> = par::map_slice(&basis, |b| dot(b, &w));
            for (b, c) in basis.iter().zip(&coeffs) {
                for (wi, bi) in w.iter_mut().zip(b) {
                    *wi -= c * bi;
                }
            }
        }
        let b = norm(&w);
        let steps = basis.len();
        let scale = alpha.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);

        if steps >= check_at || steps == max_steps {
            let (vals, vecs) = tridiagonal_eigen(&alpha, &beta);
            let m = vals.len();
            let take = k.min(m);
            let residuals: Vec<f64> = (0..take).map(|i| (b * vecs[(m - 1, i)]).abs()).collect();
            let worst = residuals.iter().fold(0.0f64, |a, &r| a.max(r));
            last_residual = worst;
            let exhausted = steps == n;
            if (take == k && worst <= cfg.tolerance * scale) || exhausted {
                let mut values = Vec::with_capacity(k);
                let mut vectors = Vec::with_capacity(k);
                for i in 0..take {
                    values.push(vals[i]);
                    let mut v = vec![0.0; n];
                    for (j, bj) in basis.iter().enumerate() {
                        let c = vecs[(j, i)];
                        for (vi, x) in v.iter_mut().zip(bj) {
                            *vi += c * x;
                        }
                    }
                    let nv = norm(&v);
                    v.iter_mut().for_each(|x| *x /= nv);
                    fix_sign(&mut v);
                    vectors.push(v);
                }
                if take < k {
                    return Err(Error::ConvergenceFailure {
                        iterations: steps,
                        residual: worst,
                    });
                }
                return Ok(EigenPairs {
                    values,
                    vectors,
                    iterations: steps,
                    max_residual: worst,
                });
            }
            if steps == max_steps {
                break;
            }
            check_at = (steps + steps / 2).min(max_steps);
        }

        if b <= 1e-12 * scale {
            // Invariant subspace found: continue from a fresh direction.
            match random_unit(&mut rng, n, &basis) {
                Some(fresh) => {
                    beta.push(0.0);
                    q = fresh;
                }
                None => break,
            }
        } else {
            beta.push(b);
            q = w.into_iter().map(|x| x / b).collect();
        }
    }
    Err(Error::ConvergenceFailure {
        iterations: basis.len(),
        residual: last_residual,
    })
}

fn random_unit(rng: &mut ChaCha8Rng, n: usize, basis: &[Vec<f64>]) -> Option<Vec<f64>> {
    for _ in 0..8 {
        let mut v: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
        for _ in 0..2 {
            for b in basis {
                let c = dot(b, &v);
                for (vi, bi) in v.iter_mut().zip(b) {
                    *vi -= c * bi;
                }
            }
        }
        let nv = norm(&v);
        if nv > 1e-8 {
            v.iter_mut().for_each(|x| *x /= nv);
            return Some(v);
        }
    }
    None
}

/// Eigen-decomposition of the Lanczos tridiagonal, values descending.
fn tridiagonal_eigen(alpha: &[f64], beta: &[f64]) -> (Vec<f64>, DMatrix<f64>) {
    let m = alpha.len();
    let mut t = DMatrix::zeros(m, m);
    for i in 0..m {
        t[(i, i)] = alpha[i];
        if i + 1 < m {
            t[(i, i + 1)] = beta[i];
            t[(i + 1, i)] = beta[i];
        }
    }
    sorted_eigen(t)
}

fn sorted_eigen(mat: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let m = mat.nrows();
    let eig = SymmetricEigen::new(mat);
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = DMatrix::from_fn(m, m, |r, c| eig.eigenvectors[(r, order[c])]);
    (vals, vecs)
}

/// Largest-magnitude entry made positive.
pub fn fix_sign(v: &mut [f64]) {
    let mut best = 0.0f64;
    for &x in v.iter() {
        if x.abs() > best.abs() {
            best = x;
        }
    }
    if best < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

fn dense_top(s: &SymMatrix, k: usize) -> Result<EigenPairs> {
    let n = s.dim();
    let (vals, vecs) = sorted_eigen(s.to_dmatrix());
    let mut vectors = Vec::with_capacity(k);
    let mut worst: f64 = 0.0;
    for i in 0..k {
        let mut v: Vec<f64> = (0..n).map(|r| vecs[(r, i)]).collect();
        fix_sign(&mut v);
        let sv = s.matvec(&v);
        let res = sv
            .iter()
            .zip(&v)
            .map(|(a, b)| (a - vals[i] * b).powi(2))
            .sum::<f64>()
            .sqrt();
        worst = worst.max(res);
        vectors.push(v);
    }
    Ok(EigenPairs {
        values: vals[..k].to_vec(),
        vectors,
        iterations: 0,
        max_residual: worst,
    })
}

/// All eigenvalues, descending.
pub fn full_spectrum(s: &SymMatrix) -> Vec<f64> {
    let mut vals: Vec<f64> = SymmetricEigen::new(s.to_dmatrix()).eigenvalues.iter().copied().collect();
    vals.sort_by(|a, b| b.total_cmp(a));
    vals
}

/// Residual `|S v - μ v|` of a candidate pair.
pub fn residual(s: &SymMatrix, value: f64, vector: &[f64]) -> f64 {
    let sv = s.matvec(vector);
    let diff: Vec<f64> = sv.iter().zip(vector).map(|(a, b)| a - value * b).collect();
    norm(&diff)
}
