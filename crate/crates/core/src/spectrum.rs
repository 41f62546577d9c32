//! Eigenvalues `λ_n = 1/μ_n` and eigenfunctions `q_n` of the time-changed
//! killed process, and everything read off from them.

use std::sync::Arc;

use serde::Serialize;

use crate::eigen::{dot, fix_sign, top_eigenpairs_with, EigenPairs, LanczosSettings};
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::kernel::{build_kernel, KernelOperator};
use crate::levy::LevyModel;
use crate::mass::MassFunction;
use crate::par;

/// Default number of retained eigenpairs.
pub const DEFAULT_MODES: usize = 40;

/// Below this `√(w m)` the nodal eigenvector entry carries no information and
/// `q` is recovered from the Nyström extension instead.
const TINY_WEIGHT: f64 = 1e-150;

#[derive(Debug, Clone)]
pub struct SpectralSolution {
    op: Arc<KernelOperator>,
    /// `μ_n`, descending.
    mu: Vec<f64>,
    /// `λ_n = 1/μ_n`, ascending.
    lambda: Vec<f64>,
    /// Euclidean eigenvectors of `S`, `u = √(w m) q`.
    u: Vec<Vec<f64>>,
    /// `q_n` at the nodes.
    q: Vec<Vec<f64>>,
    /// `⟨m, q_n⟩`.
    mass_overlap: Vec<f64>,
    lanczos_iterations: usize,
    max_residual: f64,
}

/// Ground-state constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Asymptote {
    pub gamma: f64,
    /// `⟨m, q_1⟩ q_1(x)`.
    pub k: f64,
    /// The same constant written as `√(ℓ_1(x)/m(x)) ∫ √(m ℓ_1)`.
    pub k_alt: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SurvivalValue {
    /// Truncated series, clamped to `[0, 1]`.
    pub probability: f64,
    pub raw: f64,
    /// Bound on the modes left out of the series.
    pub truncation_bound: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CorrelationValue {
    pub value: f64,
    /// Limit of `e^{kC} C_k`, from the modes sharing `λ_2`.
    pub prefactor: f64,
}

pub fn solve_spectrum(
    model: LevyModel,
    mass: &MassFunction,
    kill_rate: f64,
    grid: &Grid,
    k: usize,
) -> Result<SpectralSolution> {
    let op = build_kernel(model, mass, kill_rate, grid)?;
    SpectralSolution::from_operator(Arc::new(op), k)
}

impl SpectralSolution {
    pub fn from_operator(op: Arc<KernelOperator>, k: usize) -> Result<Self> {
        Self::from_operator_with(op, k, LanczosSettings::default())
    }

    pub fn from_operator_with(
        op: Arc<KernelOperator>,
        k: usize,
        cfg: LanczosSettings,
    ) -> Result<Self> {
        let k = k.max(2).min(op.dim());
        let eig = top_eigenpairs_with(op.matrix(), k, cfg)?;
        Self::from_eigenpairs(op, eig)
    }

    /// Builds the solution from precomputed leading eigenpairs of the
    /// operator's matrix, e.g. read back from a cache.
    pub fn from_eigenpairs(op: Arc<KernelOperator>, eig: EigenPairs) -> Result<Self> {
        let n = op.dim();
        if eig.values.len() < 2 || eig.vectors.iter().any(|v| v.len() != n) {
            return Err(Error::InvalidParameter(format!(
                "eigenpairs do not match an operator of dimension {n}"
            )));
        }
        let gap = eig.values[0] - eig.values[1];
        if gap < 1e-12 {
            return Err(Error::DegenerateGap { gap });
        }
        if eig.values[0] <= 0.0 {
            return Err(Error::ConvergenceFailure {
                iterations: eig.iterations,
                residual: eig.max_residual,
            });
        }
        // Retain the positive part of the spectrum only.
        let keep = eig.values.iter().take_while(|&&m| m > 0.0).count();
        let mu: Vec<f64> = eig.values[..keep].to_vec();
        let lambda: Vec<f64> = mu.iter().map(|m| 1.0 / m).collect();
        let mut u: Vec<Vec<f64>> = eig.vectors.into_iter().take(keep).collect();

        // The ground state decays by many orders of magnitude; refine its tail
        // by power iteration, which keeps every entry a sum of positive terms.
        let first = &mut u[0];
        if first.iter().sum::<f64>() < 0.0 {
            first.iter_mut().for_each(|x| *x = -*x);
        }
        for _ in 0..60 {
            let mut next = op.matrix().matvec(first);
            let norm = dot(&next, &next).sqrt();
            next.iter_mut().for_each(|x| *x /= norm);
            *first = next;
        }

        let d = op.sqrt_wm();
        let q: Vec<Vec<f64>> = u
            .iter()
            .zip(&lambda)
            .enumerate()
            .map(|(n_mode, (un, &lam))| {
                let du: Vec<f64> = un.iter().zip(d).map(|(a, b)| a * b).collect();
                let mut qn: Vec<f64> = par::map_range(n, |i| {
                    if d[i] > TINY_WEIGHT {
                        un[i] / d[i]
                    } else {
                        lam * (0..n).map(|j| op.kernel_entry(i, j) * du[j]).sum::<f64>()
                    }
                });
                if n_mode > 0 {
                    fix_sign(&mut qn);
                }
                qn
            })
            .collect();
        // Keep u consistent with the sign convention on q.
        for (un, qn) in u.iter_mut().zip(&q) {
            let s: f64 = un.iter().zip(qn).zip(d).map(|((a, b), w)| a * b * w).sum();
            if s < 0.0 {
                un.iter_mut().for_each(|x| *x = -*x);
            }
        }
        let mass_overlap: Vec<f64> = u.iter().map(|un| dot(un, d)).collect();
        Ok(Self {
            op,
            mu,
            lambda,
            u,
            q,
            mass_overlap,
            lanczos_iterations: eig.iterations,
            max_residual: eig.max_residual,
        })
    }

    /// The leading eigenpairs of `S` in the form accepted by
    /// [`SpectralSolution::from_eigenpairs`].
    pub fn eigenpairs(&self) -> EigenPairs {
        EigenPairs {
            values: self.mu.clone(),
            vectors: self.u.clone(),
            iterations: self.lanczos_iterations,
            max_residual: self.max_residual,
        }
    }

    pub fn operator(&self) -> &KernelOperator {
        &self.op
    }

    pub fn operator_arc(&self) -> Arc<KernelOperator> {
        Arc::clone(&self.op)
    }

    pub fn grid(&self) -> &Grid {
        self.op.grid()
    }

    pub fn modes(&self) -> usize {
        self.lambda.len()
    }

    /// Nyström eigenvalues `μ_n`, descending.
    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    /// `λ^X_n`, ascending.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.lambda
    }

    pub fn eigenvector(&self, n: usize) -> &[f64] {
        &self.u[n]
    }

    /// `q_n` at the grid nodes (`n` counts from 0).
    pub fn q(&self, n: usize) -> &[f64] {
        &self.q[n]
    }

    pub fn mass_overlaps(&self) -> &[f64] {
        &self.mass_overlap
    }

    pub fn lanczos_iterations(&self) -> usize {
        self.lanczos_iterations
    }

    pub fn max_residual(&self) -> f64 {
        self.max_residual
    }

    /// Survival decay rate `γ = λ_1`.
    pub fn gamma(&self) -> f64 {
        self.lambda[0]
    }

    /// Free energy `E = log λ_1`.
    pub fn free_energy(&self) -> f64 {
        self.lambda[0].ln()
    }

    /// Spectral gap `λ_2 - λ_1`.
    pub fn gap(&self) -> f64 {
        self.lambda[1] - self.lambda[0]
    }

    /// Correlation rate `C = log(λ_2/λ_1)`.
    pub fn correlation_rate(&self) -> f64 {
        (self.lambda[1] / self.lambda[0]).ln()
    }

    /// `q_n(x)`: the stored value at a node, the Nyström extension elsewhere.
    pub fn q_at(&self, n: usize, x: f64) -> Result<f64> {
        let grid = self.grid();
        grid.bracket(x)?;
        if let Some(i) = grid.node_index(x) {
            return Ok(self.q[n][i]);
        }
        Ok(self.lambda[n] * self.op.apply_at(x, &self.q[n]))
    }

    /// `K(x) = ⟨m, q_1⟩ q_1(x)` at the nodes.
    pub fn k_values(&self) -> Vec<f64> {
        self.q[0].iter().map(|q| self.mass_overlap[0] * q).collect()
    }

    /// `ℓ_1 = m q_1²` at the nodes.
    pub fn ell1_values(&self) -> Vec<f64> {
        self.q[0]
            .iter()
            .zip(self.op.mass_values())
            .map(|(q, m)| m * q * q)
            .collect()
    }

    /// `ℓ_1` as probability weights on the nodes, `w_i m_i q_1(x_i)²`.
    pub fn ell1_weights(&self) -> Vec<f64> {
        self.u[0].iter().map(|x| x * x).collect()
    }

    /// Largest off-diagonal entry and largest diagonal deviation from 1 of
    /// the `L²(m)` Gram matrix of the retained `q_n`.
    pub fn gram_error(&self) -> (f64, f64) {
        let wm: Vec<f64> = self
            .op
            .weights()
            .iter()
            .zip(self.op.mass_values())
            .map(|(w, m)| w * m)
            .collect();
        let k = self.modes();
        let rows: Vec<(f64, f64)> = par::map_range(k, |a| {
            let mut off: f64 = 0.0;
            let mut diag: f64 = 0.0;
            for b in 0..k {
                let g: f64 = (0..wm.len())
                    .map(|i| wm[i] * self.q[a][i] * self.q[b][i])
                    .sum();
                if a == b {
                    diag = diag.max((g - 1.0).abs());
                } else {
                    off = off.max(g.abs());
                }
            }
            (off, diag)
        });
        rows.iter()
            .fold((0.0, 0.0), |(o, d), &(a, b)| (f64::max(o, a), f64::max(d, b)))
    }

    pub fn survival_probability(&self, x: f64, t: f64, n_terms: usize) -> Result<SurvivalValue> {
        let grid = self.grid();
        let (j, frac) = grid.bracket(x)?;
        let nearest = if frac < 0.5 { j } else { j + 1 };
        let terms = n_terms.clamp(1, self.modes());
        let mut raw = 0.0;
        for n in 0..terms {
            raw += (-t * self.lambda[n]).exp() * self.mass_overlap[n] * self.q_at(n, x)?;
        }
        let d = self.op.sqrt_wm()[nearest];
        let total_mass: f64 = self.op.sqrt_wm().iter().map(|x| x * x).sum();
        let captured: f64 = self.mass_overlap[..terms].iter().map(|c| c * c).sum();
        let mut cover = 0.0;
        for un in &self.u[..terms] {
            cover += un[nearest] * un[nearest];
        }
        let bound = if d > 0.0 {
            (-t * self.lambda[terms - 1]).exp()
                * (total_mass - captured).max(0.0).sqrt()
                * (1.0 - cover).max(0.0).sqrt()
                / d
        } else {
            f64::INFINITY
        };
        Ok(SurvivalValue {
            probability: raw.clamp(0.0, 1.0),
            raw,
            truncation_bound: bound,
        })
    }

    pub fn survival_asymptote(&self, x: f64) -> Result<Asymptote> {
        let q1x = self.q_at(0, x)?;
        let k = self.mass_overlap[0] * q1x;
        // ∫ √(m ℓ_1) = ∫ m q_1 and √(ℓ_1/m) = q_1.
        let m = self.mass_at(x);
        let ell1 = m * q1x * q1x;
        let integral: f64 = self
            .ell1_values()
            .iter()
            .zip(self.op.mass_values())
            .zip(self.op.weights())
            .map(|((l, m), w)| w * (m * l).sqrt())
            .sum();
        let k_alt = (ell1 / m).sqrt() * integral;
        debug_assert!((k - k_alt).abs() <= 1e-8 * k.abs().max(1e-300));
        Ok(Asymptote {
            gamma: self.gamma(),
            k,
            k_alt,
        })
    }

    fn mass_at(&self, x: f64) -> f64 {
        let grid = self.grid();
        match grid.node_index(x) {
            Some(i) => self.op.mass_values()[i],
            None => grid.interpolate(self.op.mass_values(), x).unwrap_or(0.0),
        }
    }

    /// Nodal values of an observable.
    pub fn tabulate<F: Fn(f64) -> f64>(&self, f: F) -> Vec<f64> {
        self.grid().nodes().iter().map(|&x| f(x)).collect()
    }

    /// `C_k(f, g)` from the spectral expansion over the retained modes.
    /// Small `k` needs many modes: the sum converges like `Σ (λ_1/λ_n)^k`.
    pub fn correlation(&self, f: &[f64], g: &[f64], k: u32) -> CorrelationValue {
        let (af, ag) = (self.overlaps_with(f), self.overlaps_with(g));
        let l1 = self.lambda[0];
        let value: f64 = (1..self.modes())
            .map(|n| (l1 / self.lambda[n]).powi(k as i32) * af[n] * ag[n])
            .sum();
        let l2 = self.lambda[1];
        let prefactor: f64 = (1..self.modes())
            .filter(|&n| (self.lambda[n] - l2).abs() <= 1e-8)
            .map(|n| af[n] * ag[n])
            .sum();
        CorrelationValue { value, prefactor }
    }

    /// `⟨q_1 f, q_n⟩_{L²(m)}` for every retained `n`.
    pub fn overlaps_with(&self, f: &[f64]) -> Vec<f64> {
        let u1f: Vec<f64> = self.u[0].iter().zip(f).map(|(a, b)| a * b).collect();
        self.u.iter().map(|un| dot(&u1f, un)).collect()
    }

    /// The ground-state chain `T_ij = λ_1 v(x_j - x_i) w_j m_j q_1(x_j) / q_1(x_i)`.
    pub fn groundstate_transition(&self) -> Result<TransitionKernel> {
        let n = self.op.dim();
        let l1 = self.lambda[0];
        let q1 = &self.q[0];
        let wm: Vec<f64> = self.op.sqrt_wm().iter().map(|d| d * d).collect();
        let mut data = vec![0.0; n * n];
        par::for_each_row(&mut data, n, |i, row| {
            for (j, t) in row.iter_mut().enumerate() {
                *t = l1 * self.op.kernel_entry(i, j) * wm[j] * q1[j] / q1[i];
            }
        });
        let mut raw_row_sums = Vec::with_capacity(n);
        for i in 0..n {
            let row = &mut data[i * n..(i + 1) * n];
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > 1e-2 {
                return Err(Error::RowMassError { row: i, mass: s });
            }
            row.iter_mut().for_each(|t| *t /= s);
            raw_row_sums.push(s);
        }
        Ok(TransitionKernel {
            n,
            data,
            raw_row_sums,
            stationary: self.ell1_weights(),
        })
    }

    /// The infinite-volume Gibbs state of `k` consecutive spins.
    pub fn gibbs_state_density(&self, k: usize) -> GibbsState<'_> {
        GibbsState { sol: self, k: k.max(1) }
    }
}

/// Row-stochastic kernel on the grid nodes.
#[derive(Debug, Clone)]
pub struct TransitionKernel {
    n: usize,
    data: Vec<f64>,
    raw_row_sums: Vec<f64>,
    stationary: Vec<f64>,
}

impl TransitionKernel {
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn raw_row_sums(&self) -> &[f64] {
        &self.raw_row_sums
    }

    /// Largest `|raw row sum - 1|`.
    pub fn raw_row_drift(&self) -> f64 {
        self.raw_row_sums
            .iter()
            .fold(0.0, |a, s| f64::max(a, (s - 1.0).abs()))
    }

    /// Node weights of `ℓ_1`.
    pub fn stationary(&self) -> &[f64] {
        &self.stationary
    }

    /// `p T` for a row vector `p`.
    pub fn push_forward(&self, p: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut out = vec![0.0; n];
        for (i, &pi) in p.iter().enumerate() {
            if pi == 0.0 {
                continue;
            }
            for (o, t) in out.iter_mut().zip(self.row(i)) {
                *o += pi * t;
            }
        }
        out
    }
}

/// Total variation distance between two weight vectors.
pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// Density of `L_k`, the law of `k` consecutive spins:
/// `λ_1^{k-1} q_1(y_1) m(y_1) v(y_2 - y_1) m(y_2) ⋯ v(y_k - y_{k-1}) m(y_k) q_1(y_k)`.
#[derive(Debug, Clone, Copy)]
pub struct GibbsState<'a> {
    sol: &'a SpectralSolution,
    k: usize,
}

impl GibbsState<'_> {
    pub fn len(&self) -> usize {
        self.k
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Endpoint factor `q_1` at the nodes.
    pub fn endpoint(&self) -> &[f64] {
        self.sol.q(0)
    }

    /// Chain factor between consecutive spins at nodes `i` and `j`.
    pub fn chain_kernel(&self, i: usize, j: usize) -> f64 {
        self.sol.op.kernel_entry(i, j)
    }

    /// Density at an arbitrary tuple of length `k`; `O(k)` kernel evaluations.
    pub fn eval(&self, y: &[f64]) -> Result<f64> {
        assert_eq!(y.len(), self.k);
        let sol = self.sol;
        let pd = sol.op.potential();
        let mut val = sol.lambda[0].powi(self.k as i32 - 1);
        for &yi in y {
            val *= sol.mass_at(yi);
        }
        val *= sol.q_at(0, y[0])? * sol.q_at(0, y[self.k - 1])?;
        for w in y.windows(2) {
            val *= pd.eval(w[1] - w[0]);
        }
        Ok(val)
    }

    /// Density at a tuple of node indices, using the corrected diagonal.
    pub fn eval_nodes(&self, idx: &[usize]) -> f64 {
        assert_eq!(idx.len(), self.k);
        let sol = self.sol;
        let m = sol.op.mass_values();
        let q1 = sol.q(0);
        let mut val = sol.lambda[0].powi(self.k as i32 - 1);
        for &i in idx {
            val *= m[i];
        }
        val *= q1[idx[0]] * q1[idx[self.k - 1]];
        for w in idx.windows(2) {
            val *= sol.op.kernel_entry(w[0], w[1]);
        }
        val
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn example1_small() -> SpectralSolution {
        let grid = Grid::uniform(30.0, 751).unwrap();
        solve_spectrum(
            LevyModel::brownian(1.0).unwrap(),
            &MassFunction::inv_linear(),
            0.5,
            &grid,
            12,
        )
        .unwrap()
    }

    #[test]
    fn example1_ground_state() {
        let sol = example1_small();
        assert!((sol.gamma() - 1.0).abs() < 2e-3, "{}", sol.gamma());
        let exact = |x: f64| (2.0f64 / 3.0).sqrt() * (1.0 + x.abs()) * (-x.abs()).exp();
        for x in [0.0, 1.0, -2.0, 0.3] {
            assert_relative_eq!(sol.q_at(0, x).unwrap(), exact(x), max_relative = 1e-2);
        }
        let a = sol.survival_asymptote(0.0).unwrap();
        assert!((a.k - 4.0 / 3.0).abs() < 1e-2);
        assert_relative_eq!(a.k, a.k_alt, max_relative = 1e-10);
        assert!(sol.q(0).iter().all(|&q| q > 0.0));
        let (off, diag) = sol.gram_error();
        assert!(off < 1e-6 && diag < 1e-6, "{off} {diag}");
    }

    #[test]
    fn gap_identity_and_orderings() {
        let sol = example1_small();
        let e = sol.free_energy();
        let c = sol.correlation_rate();
        assert_relative_eq!(sol.gap(), e.exp() * (c.exp() - 1.0), max_relative = 1e-12);
        assert!(sol.eigenvalues().windows(2).all(|w| w[0] <= w[1]));
        assert!(sol.eigenvalues()[1] > sol.eigenvalues()[0]);
    }

    #[test]
    fn constant_observable_has_no_correlation() {
        let sol = example1_small();
        let one = vec![1.0; sol.grid().len()];
        for k in [1, 3, 10] {
            assert!(sol.correlation(&one, &one, k).value.abs() < 1e-8);
        }
    }

    #[test]
    fn transition_kernel_rows_and_stationarity() {
        let sol = example1_small();
        let t = sol.groundstate_transition().unwrap();
        assert!(t.raw_row_drift() < 1e-6, "{}", t.raw_row_drift());
        let pi = t.stationary().to_vec();
        assert!((pi.iter().sum::<f64>() - 1.0).abs() < 1e-8);
        assert!(total_variation(&t.push_forward(&pi), &pi) < 1e-6);
    }

    #[test]
    fn survival_at_small_time_is_near_one() {
        let sol = example1_small();
        let s = sol.survival_probability(0.0, 1e-3, sol.modes()).unwrap();
        assert!((s.raw - 1.0).abs() <= s.truncation_bound);
        assert!(matches!(
            sol.survival_probability(31.0, 1.0, 4),
            Err(Error::OutOfGrid { .. })
        ));
    }
}
