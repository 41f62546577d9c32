//! The ground-state chain `Y_0, Y_1, …` on the grid nodes: `Y_0 ~ ℓ_1`, then
//! steps of the row-stochastic kernel. The Poisson arrival times of the
//! continuous-time picture are integrated out in the kernel and not drawn.

use rand::Rng;
use serde::Serialize;

use super::{stream_rng, Binning};
use crate::error::Result;
use crate::par;
use crate::spectrum::SpectralSolution;

const BATCH: usize = 4096;

#[derive(Debug, Clone, Serialize)]
pub struct ChainSamples {
    /// Number of steps `k`; each path has `k + 1` entries.
    pub steps: usize,
    pub nodes: Vec<f64>,
    /// Node indices, path by path.
    pub indices: Vec<u32>,
}

impl ChainSamples {
    pub fn len(&self) -> usize {
        self.indices.len() / (self.steps + 1)
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn path(&self, s: usize) -> &[u32] {
        let w = self.steps + 1;
        &self.indices[s * w..(s + 1) * w]
    }

    /// Positions `Y_step` over all paths.
    pub fn marginal(&self, step: usize) -> impl Iterator<Item = f64> + '_ {
        (0..self.len()).map(move |s| self.nodes[self.path(s)[step] as usize])
    }

    pub fn binned_marginal(&self, step: usize, bins: &Binning) -> Vec<f64> {
        bins.frequencies(self.marginal(step))
    }

    /// Empirical law of `(Y_a, Y_b)` on `bins × bins`, row-major, overflow
    /// bins included.
    pub fn binned_joint(&self, a: usize, b: usize, bins: &Binning) -> Vec<f64> {
        let w = bins.count + 1;
        let mut out = vec![0.0; w * w];
        let n = self.len();
        for s in 0..n {
            let p = self.path(s);
            let i = bins.index(self.nodes[p[a] as usize]);
            let j = bins.index(self.nodes[p[b] as usize]);
            out[i * w + j] += 1.0;
        }
        out.iter_mut().for_each(|c| *c /= n as f64);
        out
    }
}

fn cumulative(weights: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    weights
        .iter()
        .map(|w| {
            acc += w;
            acc
        })
        .collect()
}

fn draw<R: Rng + ?Sized>(cum: &[f64], rng: &mut R) -> usize {
    let total = *cum.last().unwrap();
    let u = rng.random::<f64>() * total;
    cum.partition_point(|&c| c <= u).min(cum.len() - 1)
}

pub fn sample_groundstate_chain(
    sol: &SpectralSolution,
    k: usize,
    n_samples: usize,
    seed: u64,
) -> Result<ChainSamples> {
    let kernel = sol.groundstate_transition()?;
    let n = kernel.dim();
    let start = cumulative(kernel.stationary());
    let rows: Vec<Vec<f64>> = par::map_range(n, |i| cumulative(kernel.row(i)));
    let batches = n_samples.div_ceil(BATCH);
    let parts: Vec<Vec<u32>> = par::map_range(batches, |b| {
        let mut rng = stream_rng(seed, b as u64);
        let count = BATCH.min(n_samples - b * BATCH);
        let mut out = Vec::with_capacity(count * (k + 1));
        for _ in 0..count {
            let mut y = draw(&start, &mut rng);
            out.push(y as u32);
            for _ in 0..k {
                y = draw(&rows[y], &mut rng);
                out.push(y as u32);
            }
        }
        out
    });
    Ok(ChainSamples {
        steps: k,
        nodes: sol.grid().nodes().to_vec(),
        indices: parts.concat(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_cdf_draws() {
        let cum = cumulative(&[0.0, 0.25, 0.0, 0.75]);
        let mut rng = stream_rng(1, 0);
        let mut counts = [0usize; 4];
        for _ in 0..40_000 {
            counts[draw(&cum, &mut rng)] += 1;
        }
        assert_eq!(counts[0], 0);
        assert_eq!(counts[2], 0);
        let frac = counts[1] as f64 / 40_000.0;
        assert!((frac - 0.25).abs() < 0.01);
    }
}
