//! Single-site random-walk Metropolis for the ring
//! `μ(dω) ∝ Π_j m(ω_j) v^r(ω_{j+1} - ω_j) dω`, i.e. the Gibbs measure with
//! `V_int = -log v^r` and `U_mass = -log m`.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use super::{stream_rng, Binning};
use crate::error::{Error, Result};
use crate::levy::PotentialDensity;
use crate::mass::MassFunction;
use crate::observable::Observable;
use crate::par;

/// Sweeps between proposal-scale updates during burn-in.
const TUNE_WINDOW: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GibbsConfig {
    /// Measured sweeps per chain, after burn-in.
    pub sweeps: usize,
    pub burn_in: usize,
    pub chains: usize,
    pub seed: u64,
    pub target_acceptance: f64,
    pub initial_scale: f64,
    /// Observables whose site means and pair products are accumulated.
    pub observables: Vec<Observable>,
    /// Ring distances for pair statistics.
    pub distances: Vec<usize>,
    pub hist_half_width: f64,
    pub hist_bin_width: f64,
    /// Batches per chain for batch-means errors.
    pub batches: usize,
}

impl Default for GibbsConfig {
    fn default() -> Self {
        Self {
            sweeps: 100_000,
            burn_in: 10_000,
            chains: 4,
            seed: 0,
            target_acceptance: 0.4,
            initial_scale: 1.0,
            observables: vec![Observable::BUMP],
            distances: (1..=8).collect(),
            hist_half_width: 8.0,
            hist_bin_width: 0.1,
            batches: 25,
        }
    }
}

impl GibbsConfig {
    pub fn binning(&self) -> Binning {
        Binning::symmetric(self.hist_half_width, self.hist_bin_width)
    }
}

/// Sums over the sweeps of one batch of per-sweep ring averages.
#[derive(Debug, Clone, Default, Serialize)]
struct BatchStats {
    sweeps: u64,
    site: Vec<f64>,
    pair: Vec<f64>,
    bond: f64,
}

impl BatchStats {
    fn new(n_obs: usize, n_pairs: usize) -> Self {
        Self {
            sweeps: 0,
            site: vec![0.0; n_obs],
            pair: vec![0.0; n_pairs],
            bond: 0.0,
        }
    }

    fn merge(&mut self, other: &BatchStats) {
        self.sweeps += other.sweeps;
        for (a, b) in self.site.iter_mut().zip(&other.site) {
            *a += b;
        }
        for (a, b) in self.pair.iter_mut().zip(&other.pair) {
            *a += b;
        }
        self.bond += other.bond;
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SpinChainState {
    pub n: usize,
    pub sweeps: usize,
    /// Final configuration of each chain.
    pub spins: Vec<Vec<f64>>,
    /// Pooled single-site counts (overflow last).
    pub histogram: Vec<u64>,
    pub acceptance: Vec<f64>,
    pub proposal_scale: Vec<f64>,
    pub observables: Vec<Observable>,
    pub distances: Vec<usize>,
    #[serde(skip)]
    binning: Binning,
    batches: Vec<Vec<BatchStats>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McCorrelation {
    pub k: usize,
    pub value: f64,
    /// Batch-means standard error.
    pub stderr: f64,
    /// Spread of the per-chain estimates.
    pub between_chain_sd: f64,
}

/// Metropolis acceptance probability for an energy change.
pub fn acceptance_probability(delta_energy: f64) -> f64 {
    if delta_energy <= 0.0 {
        1.0
    } else {
        (-delta_energy).exp()
    }
}

/// `H(ω) = Σ_j V_int(ω_{j+1} - ω_j) + U_mass(ω_j)` on the ring.
pub fn ring_energy(pd: &PotentialDensity, mass: &MassFunction, spins: &[f64]) -> f64 {
    let n = spins.len();
    (0..n)
        .map(|j| -mass.log_eval(spins[j]) - pd.log_eval(spins[(j + 1) % n] - spins[j]))
        .sum()
}

fn pair_slot(a: usize, b: usize, n_obs: usize) -> usize {
    let (a, b) = if a <= b { (a, b) } else { (b, a) };
    a * n_obs - a * (a + 1) / 2 + b
}

struct ChainRun {
    spins: Vec<f64>,
    hist: Vec<u64>,
    batches: Vec<BatchStats>,
    acceptance: f64,
    scale: f64,
}

fn run_chain(
    pd: &PotentialDensity,
    mass: &MassFunction,
    n: usize,
    cfg: &GibbsConfig,
    chain: usize,
) -> ChainRun {
    let mut rng = stream_rng(cfg.seed, chain as u64);
    let u_of = |x: f64| -mass.log_eval(x);
    let v_of = |d: f64| -pd.log_eval(d);
    let mut w = vec![0.0; n];
    let mut u: Vec<f64> = w.iter().map(|&x| u_of(x)).collect();
    // bond[j] joins sites j and j + 1.
    let mut bond: Vec<f64> = (0..n).map(|j| v_of(w[(j + 1) % n] - w[j])).collect();
    let mut scale = cfg.initial_scale;

    let sweep = |scale: f64, w: &mut [f64], u: &mut [f64], bond: &mut [f64], rng: &mut rand_chacha::ChaCha8Rng| {
        let mut accepted = 0usize;
        for j in 0..n {
            let left = (j + n - 1) % n;
            let right = (j + 1) % n;
            let step: f64 = rng.sample(StandardNormal);
            let x = w[j] + scale * step;
            let u_new = u_of(x);
            let b_left = v_of(x - w[left]);
            let b_right = v_of(w[right] - x);
            let delta = (u_new + b_left + b_right) - (u[j] + bond[left] + bond[j]);
            if rng.random::<f64>() < acceptance_probability(delta) {
                w[j] = x;
                u[j] = u_new;
                bond[left] = b_left;
                bond[j] = b_right;
                accepted += 1;
            }
        }
        accepted
    };

    let mut window = 0usize;
    for s in 0..cfg.burn_in {
        window += sweep(scale, &mut w, &mut u, &mut bond, &mut rng);
        if (s + 1) % TUNE_WINDOW == 0 {
            let rate = window as f64 / (TUNE_WINDOW * n) as f64;
            scale *= (2.0 * (rate - cfg.target_acceptance)).exp();
            scale = scale.clamp(1e-6, 1e6);
            window = 0;
        }
    }

    let binning = cfg.binning();
    let n_obs = cfg.observables.len();
    let n_dist = cfg.distances.len();
    let n_pairs = n_obs * (n_obs + 1) / 2 * n_dist;
    let n_batches = cfg.batches.max(1).min(cfg.sweeps.max(1));
    let per_batch = cfg.sweeps.div_ceil(n_batches).max(1);
    let mut batches: Vec<BatchStats> = Vec::with_capacity(n_batches);
    let mut hist = vec![0u64; binning.count + 1];
    let mut vals = vec![0.0; n_obs * n];
    let mut accepted = 0usize;
    for s in 0..cfg.sweeps {
        accepted += sweep(scale, &mut w, &mut u, &mut bond, &mut rng);
        if s % per_batch == 0 {
            batches.push(BatchStats::new(n_obs, n_pairs));
        }
        let stats = batches.last_mut().unwrap();
        stats.sweeps += 1;
        for &x in &w {
            hist[binning.index(x)] += 1;
        }
        for (o, obs) in cfg.observables.iter().enumerate() {
            let row = &mut vals[o * n..(o + 1) * n];
            for (r, &x) in row.iter_mut().zip(&w) {
                *r = obs.eval(x);
            }
            stats.site[o] += row.iter().sum::<f64>() / n as f64;
        }
        for a in 0..n_obs {
            for b in a..n_obs {
                let slot = pair_slot(a, b, n_obs) * n_dist;
                let (fa, fb) = (&vals[a * n..(a + 1) * n], &vals[b * n..(b + 1) * n]);
                for (di, &d) in cfg.distances.iter().enumerate() {
                    let acc: f64 = (0..n).map(|j| fa[j] * fb[(j + d) % n]).sum();
                    stats.pair[slot + di] += acc / n as f64;
                }
            }
        }
        stats.bond += bond.iter().map(|b| (-b).exp()).sum::<f64>() / n as f64;
    }
    ChainRun {
        spins: w,
        hist,
        batches,
        acceptance: accepted as f64 / (cfg.sweeps.max(1) * n) as f64,
        scale,
    }
}

/// Runs `cfg.chains` independent chains on a ring of `n` spins, all started
/// from the zero configuration.
pub fn gibbs_mcmc(
    pd: &PotentialDensity,
    mass: &MassFunction,
    n: usize,
    cfg: &GibbsConfig,
) -> Result<SpinChainState> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!("ring size must be at least 2, got {n}")));
    }
    if cfg.chains == 0 || cfg.sweeps == 0 {
        return Err(Error::InvalidParameter("need at least one chain and one sweep".into()));
    }
    if cfg.distances.iter().any(|&d| d == 0 || d >= n) {
        return Err(Error::InvalidParameter(format!(
            "pair distances must lie in 1..{n}"
        )));
    }
    let runs = par::map_range(cfg.chains, |c| run_chain(pd, mass, n, cfg, c));
    for r in &runs {
        if !(0.15..=0.6).contains(&r.acceptance) {
            return Err(Error::AcceptanceOutOfRange { rate: r.acceptance });
        }
    }
    let binning = cfg.binning();
    let mut histogram = vec![0u64; binning.count + 1];
    for r in &runs {
        for (h, c) in histogram.iter_mut().zip(&r.hist) {
            *h += c;
        }
    }
    Ok(SpinChainState {
        n,
        sweeps: cfg.sweeps,
        spins: runs.iter().map(|r| r.spins.clone()).collect(),
        histogram,
        acceptance: runs.iter().map(|r| r.acceptance).collect(),
        proposal_scale: runs.iter().map(|r| r.scale).collect(),
        observables: cfg.observables.clone(),
        distances: cfg.distances.clone(),
        binning,
        batches: runs.into_iter().map(|r| r.batches).collect(),
    })
}

fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    (m, v.sqrt())
}

impl SpinChainState {
    pub fn binning(&self) -> Binning {
        self.binning
    }

    pub fn samples(&self) -> u64 {
        self.histogram.iter().sum()
    }

    /// Bin probabilities of the empirical single-site law (overflow last).
    pub fn site_frequencies(&self) -> Vec<f64> {
        let total = self.samples() as f64;
        self.histogram.iter().map(|&c| c as f64 / total).collect()
    }

    /// `(bin centre, density)` over the histogram range.
    pub fn site_density(&self) -> Vec<(f64, f64)> {
        let freq = self.site_frequencies();
        (0..self.binning.count)
            .map(|k| {
                let (a, b) = self.binning.edges(k);
                (0.5 * (a + b), freq[k] / self.binning.width)
            })
            .collect()
    }

    fn all_batches(&self) -> impl Iterator<Item = &BatchStats> {
        self.batches.iter().flatten()
    }

    fn pooled(&self, batches: &[&BatchStats]) -> BatchStats {
        let first = batches[0];
        let mut acc = BatchStats::new(first.site.len(), first.pair.len());
        for b in batches {
            acc.merge(b);
        }
        acc
    }

    fn index_of(&self, f: &Observable) -> Result<usize> {
        self.observables
            .iter()
            .position(|o| o == f)
            .ok_or(Error::UnregisteredObservable)
    }

    /// Mean of `f(ω_0)` with a batch-means error.
    pub fn site_mean(&self, f: &Observable) -> Result<(f64, f64)> {
        let o = self.index_of(f)?;
        let per: Vec<f64> = self
            .all_batches()
            .map(|b| b.site[o] / b.sweeps as f64)
            .collect();
        let all: Vec<&BatchStats> = self.all_batches().collect();
        let pooled = self.pooled(&all);
        let (_, sd) = mean_sd(&per);
        Ok((pooled.site[o] / pooled.sweeps as f64, sd / (per.len() as f64).sqrt()))
    }

    /// Mean of `v^r(ω_1 - ω_0)` with a batch-means error.
    pub fn bond_mean(&self) -> (f64, f64) {
        let per: Vec<f64> = self
            .all_batches()
            .map(|b| b.bond / b.sweeps as f64)
            .collect();
        let all: Vec<&BatchStats> = self.all_batches().collect();
        let pooled = self.pooled(&all);
        let (_, sd) = mean_sd(&per);
        (pooled.bond / pooled.sweeps as f64, sd / (per.len() as f64).sqrt())
    }

    fn covariance(&self, stats: &BatchStats, a: usize, b: usize, di: usize) -> f64 {
        let n_obs = self.observables.len();
        let slot = pair_slot(a, b, n_obs) * self.distances.len() + di;
        let s = stats.sweeps as f64;
        stats.pair[slot] / s - (stats.site[a] / s) * (stats.site[b] / s)
    }
}

/// Plug-in estimates of `C_k(f, g) = E[f(ω_0) g(ω_k)] - E[f] E[g]`. The ring
/// measure is reflection invariant, so `C_k(f, g) = C_k(g, f)`.
pub fn mcmc_correlations(
    state: &SpinChainState,
    f: &Observable,
    g: &Observable,
    ks: &[usize],
) -> Result<Vec<McCorrelation>> {
    let (a, b) = (state.index_of(f)?, state.index_of(g)?);
    let all: Vec<&BatchStats> = state.all_batches().collect();
    let pooled = state.pooled(&all);
    ks.iter()
        .map(|&k| {
            let di = state
                .distances
                .iter()
                .position(|&d| d == k)
                .ok_or(Error::UnregisteredObservable)?;
            let per: Vec<f64> = all.iter().map(|s| state.covariance(s, a, b, di)).collect();
            let per_chain: Vec<f64> = state
                .batches
                .iter()
                .map(|chain| {
                    let refs: Vec<&BatchStats> = chain.iter().collect();
                    state.covariance(&state.pooled(&refs), a, b, di)
                })
                .collect();
            let (_, sd) = mean_sd(&per);
            Ok(McCorrelation {
                k,
                value: state.covariance(&pooled, a, b, di),
                stderr: sd / (per.len() as f64).sqrt(),
                between_chain_sd: mean_sd(&per_chain).1,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecayFit {
    /// Fitted `C` in `C_k ≈ B e^{-kC}`.
    pub rate: f64,
    pub stderr: f64,
    pub points: usize,
}

/// Weighted least squares fit of `log C_k` against `k` over the positive
/// estimates, weights `(C_k / σ_k)²`.
pub fn decay_fit(corr: &[McCorrelation]) -> Result<DecayFit> {
    let pts: Vec<(f64, f64, f64)> = corr
        .iter()
        .filter(|c| c.value > 0.0 && c.stderr > 0.0)
        .map(|c| (c.k as f64, c.value.ln(), (c.value / c.stderr).powi(2)))
        .collect();
    if pts.len() < 2 {
        return Err(Error::InvalidParameter(
            "need two positive correlation estimates to fit a decay rate".into(),
        ));
    }
    let sw: f64 = pts.iter().map(|p| p.2).sum();
    let km = pts.iter().map(|p| p.2 * p.0).sum::<f64>() / sw;
    let ym = pts.iter().map(|p| p.2 * p.1).sum::<f64>() / sw;
    let sxx: f64 = pts.iter().map(|p| p.2 * (p.0 - km).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| p.2 * (p.0 - km) * (p.1 - ym)).sum();
    Ok(DecayFit {
        rate: -sxy / sxx,
        stderr: (1.0 / sxx).sqrt(),
        points: pts.len(),
    })
}
