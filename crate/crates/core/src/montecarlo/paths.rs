//! Lifetimes `ζ_x = A_x(e_r)` with `A_x(s) = ∫_0^s m(x + ξ(u)) du`.

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::Serialize;

use super::stream_rng;
use crate::error::{Error, Result};
use crate::levy::LevyModel;
use crate::mass::MassFunction;
use crate::par;

/// Paths per RNG stream. Fixed so that estimates do not depend on the
/// number of worker threads.
const BATCH: usize = 1024;

/// Survivors required at the largest requested time.
const MIN_SURVIVORS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PathConfig {
    pub paths: usize,
    /// Mesh of the clock integral.
    pub dt: f64,
    pub seed: u64,
    /// Largest simulated Lévy time; defaults to `20/r`.
    pub t_cap: Option<f64>,
}

impl PathConfig {
    pub fn new(paths: usize, dt: f64, seed: u64) -> Self {
        Self {
            paths,
            dt,
            seed,
            t_cap: None,
        }
    }

    pub fn cap(&self, kill_rate: f64) -> f64 {
        self.t_cap.unwrap_or(20.0 / kill_rate)
    }

    pub fn validate(&self, kill_rate: f64) -> Result<()> {
        if !(self.dt > 0.0 && self.dt <= 1e-2) {
            return Err(Error::InvalidParameter(format!(
                "mc.dt must lie in (0, 0.01], got {}",
                self.dt
            )));
        }
        if !(kill_rate > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "kill rate must be positive, got {kill_rate}"
            )));
        }
        if self.cap(kill_rate) * kill_rate < 20.0 {
            return Err(Error::InvalidParameter(format!(
                "T_cap = {} is below 20/r",
                self.cap(kill_rate)
            )));
        }
        if self.paths == 0 {
            return Err(Error::InvalidParameter("mc.paths must be positive".into()));
        }
        Ok(())
    }
}

/// Simulated lifetimes together with the exponential clocks that ended them.
#[derive(Debug, Clone, Serialize)]
pub struct ZetaSample {
    pub x: f64,
    pub kill_rate: f64,
    pub zeta: Vec<f64>,
    pub lifetimes: Vec<f64>,
    /// Paths whose lifetime exceeded `T_cap`; their `ζ` is `A_x(T_cap)`.
    pub capped: usize,
    pub t_cap: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MomentEstimate {
    pub order: u32,
    pub mean: f64,
    pub stderr: f64,
}

impl ZetaSample {
    pub fn len(&self) -> usize {
        self.zeta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.zeta.is_empty()
    }

    /// Fails with `CapExceeded` if any path hit the cap.
    pub fn require_uncapped(&self) -> Result<()> {
        if self.capped > 0 {
            return Err(Error::CapExceeded { cap: self.t_cap });
        }
        Ok(())
    }

    /// Sample means of `ζ^n` with their standard errors.
    pub fn moments(&self, n_max: u32) -> Vec<MomentEstimate> {
        let n = self.zeta.len() as f64;
        (1..=n_max)
            .map(|order| {
                let (s1, s2) = self.zeta.iter().fold((0.0, 0.0), |(a, b), z| {
                    let p = z.powi(order as i32);
                    (a + p, b + p * p)
                });
                let mean = s1 / n;
                let var = (s2 / n - mean * mean).max(0.0) * n / (n - 1.0).max(1.0);
                MomentEstimate {
                    order,
                    mean,
                    stderr: (var / n).sqrt(),
                }
            })
            .collect()
    }

    /// `ζ ≤ e_r ‖m‖_∞` on every path.
    pub fn within_trivial_bound(&self, sup: f64) -> bool {
        self.zeta
            .iter()
            .zip(&self.lifetimes)
            .all(|(z, e)| *z <= e * sup * (1.0 + 1e-12))
    }
}

/// One lifetime: draw `e_r`, then integrate the clock along the path with the
/// trapezoid rule on the `dt` mesh, the last step shortened to end at `e_r`.
fn one_path<R: Rng + ?Sized>(
    model: &LevyModel,
    mass: &MassFunction,
    kill_rate: f64,
    x: f64,
    dt: f64,
    cap: f64,
    rng: &mut R,
) -> (f64, f64, bool) {
    let e: f64 = Exp1.sample(rng);
    let e = e / kill_rate;
    let horizon = e.min(cap);
    let mut s = 0.0;
    let mut pos = x;
    let mut m_prev = mass.eval(pos);
    let mut clock = 0.0;
    while horizon - s > 1e-14 * horizon {
        let h = dt.min(horizon - s);
        pos += model.sample_increment(rng, h);
        let m_next = mass.eval(pos);
        clock += 0.5 * h * (m_prev + m_next);
        m_prev = m_next;
        s += h;
    }
    (clock, e, e > cap)
}

/// The same lifetime and Lévy path integrated on the `dt` mesh and on the
/// `dt/2` mesh; coarse increments are sums of two fine ones.
fn one_path_coupled<R: Rng + ?Sized>(
    model: &LevyModel,
    mass: &MassFunction,
    kill_rate: f64,
    x: f64,
    dt: f64,
    cap: f64,
    rng: &mut R,
) -> ((f64, f64, bool), (f64, f64, bool)) {
    let e: f64 = Exp1.sample(rng);
    let e = e / kill_rate;
    let horizon = e.min(cap);
    let half = 0.5 * dt;
    let mut s = 0.0;
    let mut pos = x;
    let mut m_prev = mass.eval(pos);
    let mut fine = 0.0;
    let mut coarse = 0.0;
    let (mut s_c, mut m_c) = (0.0, m_prev);
    let mut steps = 0u64;
    while horizon - s > 1e-14 * horizon {
        let h = half.min(horizon - s);
        pos += model.sample_increment(rng, h);
        let m_next = mass.eval(pos);
        fine += 0.5 * h * (m_prev + m_next);
        m_prev = m_next;
        s += h;
        steps += 1;
        if steps.is_multiple_of(2) || horizon - s <= 1e-14 * horizon {
            coarse += 0.5 * (s - s_c) * (m_c + m_next);
            s_c = s;
            m_c = m_next;
        }
    }
    ((coarse, e, e > cap), (fine, e, e > cap))
}

fn collect(x: f64, kill_rate: f64, cap: f64, draws: Vec<(f64, f64, bool)>) -> ZetaSample {
    let mut zeta = Vec::with_capacity(draws.len());
    let mut lifetimes = Vec::with_capacity(draws.len());
    let mut capped = 0;
    for (z, e, c) in draws {
        zeta.push(z);
        lifetimes.push(e);
        capped += c as usize;
    }
    if capped > 0 {
        log::warn!("{capped} paths exceeded T_cap = {cap}");
    }
    ZetaSample {
        x,
        kill_rate,
        zeta,
        lifetimes,
        capped,
        t_cap: cap,
    }
}

/// Lifetimes at mesh `cfg.dt` and `cfg.dt / 2` along shared paths, so the
/// difference between the two isolates the discretization bias.
pub fn simulate_zeta_coupled(
    model: LevyModel,
    mass: &MassFunction,
    kill_rate: f64,
    x: f64,
    cfg: &PathConfig,
) -> Result<(ZetaSample, ZetaSample)> {
    cfg.validate(kill_rate)?;
    let cap = cfg.cap(kill_rate);
    let batches = cfg.paths.div_ceil(BATCH);
    let per_batch: Vec<Vec<_>> = par::map_range(batches, |b| {
        let mut rng = stream_rng(cfg.seed, b as u64);
        let count = BATCH.min(cfg.paths - b * BATCH);
        (0..count)
            .map(|_| one_path_coupled(&model, mass, kill_rate, x, cfg.dt, cap, &mut rng))
            .collect()
    });
    let (coarse, fine): (Vec<_>, Vec<_>) = per_batch.into_iter().flatten().unzip();
    Ok((collect(x, kill_rate, cap, coarse), collect(x, kill_rate, cap, fine)))
}

pub fn simulate_zeta(
    model: LevyModel,
    mass: &MassFunction,
    kill_rate: f64,
    x: f64,
    cfg: &PathConfig,
) -> Result<ZetaSample> {
    cfg.validate(kill_rate)?;
    let cap = cfg.cap(kill_rate);
    let batches = cfg.paths.div_ceil(BATCH);
    let per_batch: Vec<Vec<(f64, f64, bool)>> = par::map_range(batches, |b| {
        let mut rng = stream_rng(cfg.seed, b as u64);
        let count = BATCH.min(cfg.paths - b * BATCH);
        (0..count)
            .map(|_| one_path(&model, mass, kill_rate, x, cfg.dt, cap, &mut rng))
            .collect()
    });
    Ok(collect(x, kill_rate, cap, per_batch.into_iter().flatten().collect()))
}

#[derive(Debug, Clone, Serialize)]
pub struct SurvivalEstimate {
    pub t: Vec<f64>,
    pub probability: Vec<f64>,
    /// 95% Wilson score interval.
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// Binomial standard error `√(p(1-p)/N)`.
    pub stderr: Vec<f64>,
    pub survivors: Vec<usize>,
    pub samples: usize,
    pub window: (f64, f64),
    pub gamma_hat: f64,
    pub gamma_stderr: f64,
}

const Z95: f64 = 1.959963984540054;

fn wilson(successes: usize, n: usize) -> (f64, f64) {
    let n = n as f64;
    let p = successes as f64 / n;
    let z2 = Z95 * Z95;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = Z95 / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    // The interval contains p exactly; keep it so after rounding.
    ((centre - half).max(0.0).min(p), (centre + half).min(1.0).max(p))
}

impl SurvivalEstimate {
    /// Empirical `P(ζ > t)` on `t_grid` and a weighted least squares fit of
    /// `log P` against `t` over `window`.
    pub fn from_sample(sample: &ZetaSample, t_grid: &[f64], window: (f64, f64)) -> Result<Self> {
        let mut sorted = sample.zeta.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let n = sorted.len();
        let mut t = t_grid.to_vec();
        t.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let survivors: Vec<usize> = t
            .iter()
            .map(|&ti| n - sorted.partition_point(|&z| z <= ti))
            .collect();
        if let (Some(&last_t), Some(&last)) = (t.last(), survivors.last()) {
            if last < MIN_SURVIVORS {
                return Err(Error::InsufficientTail {
                    survivors: last,
                    t: last_t,
                    required: MIN_SURVIVORS,
                });
            }
        }
        let probability: Vec<f64> = survivors.iter().map(|&s| s as f64 / n as f64).collect();
        let (lower, upper): (Vec<f64>, Vec<f64>) = survivors.iter().map(|&s| wilson(s, n)).unzip();
        let stderr = probability
            .iter()
            .map(|p| (p * (1.0 - p) / n as f64).sqrt())
            .collect();

        let mut pts = Vec::new();
        for (i, &ti) in t.iter().enumerate() {
            let p = probability[i];
            if ti >= window.0 && ti <= window.1 && p > 0.0 && p < 1.0 {
                pts.push((ti, p.ln(), n as f64 * p / (1.0 - p)));
            }
        }
        if pts.len() < 2 {
            return Err(Error::InvalidParameter(format!(
                "need at least two times with 0 < P < 1 in [{}, {}]",
                window.0, window.1
            )));
        }
        let sw: f64 = pts.iter().map(|p| p.2).sum();
        let tm = pts.iter().map(|p| p.2 * p.0).sum::<f64>() / sw;
        let ym = pts.iter().map(|p| p.2 * p.1).sum::<f64>() / sw;
        let sxx: f64 = pts.iter().map(|p| p.2 * (p.0 - tm).powi(2)).sum();
        let sxy: f64 = pts.iter().map(|p| p.2 * (p.0 - tm) * (p.1 - ym)).sum();
        Ok(Self {
            t,
            probability,
            lower,
            upper,
            stderr,
            survivors,
            samples: n,
            window,
            gamma_hat: -sxy / sxx,
            gamma_stderr: (1.0 / sxx).sqrt(),
        })
    }

    /// Estimate at the grid time closest to `t`.
    pub fn at(&self, t: f64) -> (f64, f64) {
        let i = self
            .t
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - t).abs().partial_cmp(&(b.1 - t).abs()).unwrap())
            .map(|(i, _)| i)
            .unwrap_or(0);
        (self.probability[i], self.stderr[i])
    }

    pub fn is_monotone(&self) -> bool {
        self.probability.windows(2).all(|w| w[1] <= w[0])
    }

    /// `P(ζ > t) ≤ e^{-r t/‖m‖_∞}` up to three standard errors.
    pub fn within_trivial_bound(&self, kill_rate: f64, sup: f64) -> bool {
        self.t
            .iter()
            .zip(&self.probability)
            .zip(&self.stderr)
            .all(|((t, p), s)| *p <= (-kill_rate * t / sup).exp() + 3.0 * s)
    }
}

#[allow(clippy::too_many_arguments)]
pub fn estimate_survival(
    model: LevyModel,
    mass: &MassFunction,
    kill_rate: f64,
    x: f64,
    t_grid: &[f64],
    window: (f64, f64),
    cfg: &PathConfig,
) -> Result<SurvivalEstimate> {
    let sample = simulate_zeta(model, mass, kill_rate, x, cfg)?;
    SurvivalEstimate::from_sample(&sample, t_grid, window)
}
