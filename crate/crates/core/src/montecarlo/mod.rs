//! Stochastic cross-checks: lifetimes of the time-changed process, the
//! ground-state chain, and a Metropolis sampler for the ring spin system.

mod chain;
mod mcmc;
mod paths;

pub use chain::{sample_groundstate_chain, ChainSamples};
pub use mcmc::{
    acceptance_probability, decay_fit, gibbs_mcmc, mcmc_correlations, ring_energy, DecayFit,
    GibbsConfig, McCorrelation, SpinChainState,
};
pub use paths::{
    estimate_survival, simulate_zeta, simulate_zeta_coupled, MomentEstimate, PathConfig, SurvivalEstimate, ZetaSample,
};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Independent generator for one worker: the master seed picks the key and
/// the worker index picks the stream, so results do not depend on scheduling.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Equal-width bins on `[lo, lo + width * count)` plus one overflow bin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Binning {
    pub lo: f64,
    pub width: f64,
    pub count: usize,
}

impl Binning {
    pub fn symmetric(half_width: f64, width: f64) -> Self {
        let count = (2.0 * half_width / width).round() as usize;
        Self {
            lo: -half_width,
            width,
            count,
        }
    }

    /// Bin of `x`; `count` is the overflow bin.
    pub fn index(&self, x: f64) -> usize {
        let k = ((x - self.lo) / self.width).floor();
        if k >= 0.0 && (k as usize) < self.count {
            k as usize
        } else {
            self.count
        }
    }

    pub fn edges(&self, k: usize) -> (f64, f64) {
        let a = self.lo + k as f64 * self.width;
        (a, a + self.width)
    }

    /// Probability vector (with overflow) from point masses.
    pub fn from_weights(&self, points: &[f64], weights: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.count + 1];
        for (&x, &w) in points.iter().zip(weights) {
            out[self.index(x)] += w;
        }
        out
    }

    /// Probability vector (with overflow) from a density, by Gauss–Legendre
    /// on each bin; the overflow bin receives the rest of `total`.
    pub fn from_density<F: Fn(f64) -> f64>(&self, density: F, total: f64) -> Vec<f64> {
        let rule = crate::quadrature::gl16();
        let mut out: Vec<f64> = (0..self.count)
            .map(|k| {
                let (a, b) = self.edges(k);
                rule.integrate(&density, a, b)
            })
            .collect();
        let inside: f64 = out.iter().sum();
        out.push((total - inside).max(0.0));
        out
    }

    /// Empirical frequencies (with overflow) of a sample.
    pub fn frequencies<I: IntoIterator<Item = f64>>(&self, values: I) -> Vec<f64> {
        let mut counts = vec![0u64; self.count + 1];
        let mut n = 0u64;
        for x in values {
            counts[self.index(x)] += 1;
            n += 1;
        }
        counts.iter().map(|&c| c as f64 / n.max(1) as f64).collect()
    }
}
