//! Partition functions of the ring and open spin chains, the Fourier-dual
//! form of `Z_2`, `ζ`-moments, the two-sided bound on `λ_1` and the small-`r`
//! behaviour of the decay rate.

use std::f64::consts::PI;

use serde::Serialize;

use crate::eigen::full_spectrum;
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::kernel::{build_kernel, KernelOperator};
use crate::levy::{v0_asymptotic, LevyModel, PotentialDensity};
use crate::mass::{mass_fourier, MassFunction};
use crate::par;
use crate::quadrature::{gl16, graded_breaks, integrate_breaks, integrate_symmetric_window};
use crate::spectrum::SpectralSolution;

/// Full Nyström spectrum of an operator, kept so that `Z_n` can be read off
/// for many `n` after a single dense solve.
#[derive(Debug, Clone)]
pub struct TraceSpectrum {
    mu: Vec<f64>,
}

impl TraceSpectrum {
    pub fn new(op: &KernelOperator) -> Self {
        Self::from_values(full_spectrum(op.matrix()))
    }

    pub fn from_values(mut mu: Vec<f64>) -> Self {
        mu.sort_by(|a, b| b.partial_cmp(a).unwrap());
        Self { mu }
    }

    pub fn values(&self) -> &[f64] {
        &self.mu
    }

    /// `log Σ_j μ_j^n`, evaluated relative to the top eigenvalue.
    pub fn log_power_sum(&self, n: u32) -> f64 {
        let top = self.mu[0];
        let rel: f64 = self.mu.iter().map(|&m| (m / top).powi(n as i32)).sum();
        n as f64 * top.ln() + rel.ln()
    }

    pub fn power_sum(&self, n: u32) -> f64 {
        self.mu.iter().map(|&m| m.powi(n as i32)).sum()
    }
}

/// `Z_n = tr(S^n) = Σ_j μ_j^n` over the full spectrum.
pub fn zn_trace(op: &KernelOperator, n: u32) -> Result<f64> {
    check_order(n)?;
    Ok(TraceSpectrum::new(op).log_power_sum(n).exp())
}

/// `log Z^f_n` for the open chain: `dᵀ S^{n-1} d` with `d = √(w m)`, i.e.
/// `n` masses joined by `n - 1` factors of `v^r`.
pub fn log_zn_free(op: &KernelOperator, n: u32) -> Result<f64> {
    check_order(n)?;
    let d = op.sqrt_wm();
    let mut v = d.to_vec();
    let mut log_scale = 0.0;
    for _ in 1..n {
        v = op.matrix().matvec(&v);
        let norm = v.iter().map(|x| x.abs()).fold(0.0, f64::max);
        if norm == 0.0 {
            return Ok(f64::NEG_INFINITY);
        }
        v.iter_mut().for_each(|x| *x /= norm);
        log_scale += norm.ln();
    }
    let tail: f64 = v.iter().zip(d).map(|(a, b)| a * b).sum();
    Ok(log_scale + tail.ln())
}

pub fn zn_free(op: &KernelOperator, n: u32) -> Result<f64> {
    log_zn_free(op, n).map(f64::exp)
}

fn check_order(n: u32) -> Result<()> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!(
            "partition functions need n >= 2, got {n}"
        )));
    }
    Ok(())
}

/// `Z_2 = ∬_{[-L,L]²} m(x) m(y) v^r(x-y)² dx dy` by adaptive quadrature.
pub fn z2_direct(pd: &PotentialDensity, mass: &MassFunction, half_width: f64) -> f64 {
    z2_direct_with(|u| pd.eval(u).powi(2), pd.length_scale(), mass, half_width)
}

/// `∬_{[-L,L]²} m(x) m(y) k(x-y) dx dy` for an even kernel `k` varying on
/// the length `scale`, written as `∫ k(u) A_L(u) du` with the truncated
/// autocorrelation `A_L(u) = ∫ m(x) m(x+u) dx`.
pub fn z2_direct_with<K>(kernel: K, scale: f64, mass: &MassFunction, half_width: f64) -> f64
where
    K: Fn(f64) -> f64 + Sync,
{
    let l = half_width;
    let autocorr = |u: f64| -> f64 {
        let mut pts = vec![-l, -u, 0.0, l - u];
        pts.retain(|p| *p >= -l && *p <= l - u);
        pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        pts.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
        let mut f = |x: f64| mass.eval(x) * mass.eval(x + u);
        let mut total = 0.0;
        for w in pts.windows(2) {
            let mid = 0.5 * (w[0] + w[1]);
            let left = graded_breaks(w[0], mid, 0.125, f64::INFINITY);
            let right: Vec<f64> = graded_breaks(w[1], mid, 0.125, f64::INFINITY)
                .into_iter()
                .rev()
                .collect();
            total += integrate_breaks(&mut f, &left) + integrate_breaks(&mut f, &right);
        }
        total
    };
    let outer = graded_breaks(0.0, 2.0 * l, scale * 1e-3, (2.0 * scale).min(0.5 * l));
    let rule = gl16();
    let panels: Vec<f64> = par::map_range(outer.len() - 1, |p| {
        rule.mapped(outer[p], outer[p + 1])
            .map(|(u, w)| w * kernel(u) * autocorr(u))
            .sum()
    });
    2.0 * panels.iter().sum::<f64>()
}

/// `Ẑ_2 = (2π)^{-2} ∬ |m̂(z₁-z₂)|² / ((r-ψ(z₁))(r-ψ(z₂))) dz₁ dz₂`.
pub fn zhat2_dual(pd: &PotentialDensity, mass: &MassFunction) -> Result<f64> {
    if !mass.in_l1() {
        return Err(Error::NotIntegrable(format!(
            "{} is not in L1; the dual form of Z_2 needs m̂",
            mass.name()
        )));
    }
    zhat2_dual_with(pd, |u| mass_fourier(mass, u).map(|c| c.norm_sqr()))
}

/// Dual form with `|m̂(u)|²` supplied by the caller.
pub fn zhat2_dual_with<F>(pd: &PotentialDensity, mhat_sq: F) -> Result<f64>
where
    F: Fn(f64) -> Result<f64> + Sync,
{
    let model = pd.model();
    let r = pd.kill_rate();
    let f = |z: f64| 1.0 / (r - model.char_exponent(z));
    // Frequency scale where r - ψ doubles.
    let (alpha_near, c_near) = model
        .small_y_power_law()
        .unwrap_or((model.far_field().alpha, model.far_field().c));
    let s = (r / c_near).powf(1.0 / alpha_near);
    let alpha_far = model.far_field().alpha;
    let autocorr = |u: f64| -> f64 {
        let cutoff = (1e3 * s).max(20.0 * u.abs());
        let body = integrate_symmetric_window(|z| f(z) * f(z - u), &[0.0, u], s, cutoff);
        let fz = f(cutoff);
        body + 2.0 * fz * fz * cutoff / (2.0 * alpha_far - 1.0)
    };
    let rule = gl16();
    let panel = |a: f64, b: f64| -> Result<f64> {
        let nodes: Vec<(f64, f64)> = rule.mapped(a, b).collect();
        let vals = par::map_slice(&nodes, |&(u, w)| mhat_sq(u).map(|m2| w * m2 * autocorr(u)));
        vals.into_iter().sum()
    };

    let fine = 0.25 * s.min(1.0);
    let settle = 10.0 * s.max(1.0);
    let mut a = 0.0;
    let mut width = fine * 1e-3;
    let mut total = 0.0;
    let mut tail = 0.0;
    while a < 1e4 {
        let b = a + width;
        let piece = panel(a, b)?;
        total += piece;
        if b > settle && piece.abs() <= 1e-11 * total.abs() {
            // Power-law continuation from the last panel.
            let (ga, gb) = (endpoint(&mhat_sq, &autocorr, a)?, endpoint(&mhat_sq, &autocorr, b)?);
            if ga > 0.0 && gb > 0.0 && gb < ga {
                let p = (ga / gb).ln() / (b / a).ln();
                if p > 1.0 {
                    tail = gb * b / (p - 1.0);
                }
            }
            break;
        }
        a = b;
        width = (2.0 * width).min(fine.max(0.25 * a));
    }
    Ok(2.0 * (total + tail) / (2.0 * PI).powi(2))
}

fn endpoint<F, A>(mhat_sq: &F, autocorr: &A, u: f64) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
    A: Fn(f64) -> f64,
{
    Ok(mhat_sq(u)? * autocorr(u))
}

#[derive(Debug, Clone, Serialize)]
pub struct ZetaMoments {
    pub x: f64,
    /// `E[ζ_x^n]` for `n = 1..=n_max`.
    pub moments: Vec<f64>,
    /// `E[ζ_x^n] / n!`, the open chain started from `v^r(· - x)`.
    pub scaled: Vec<f64>,
    /// `∫ v^r(y) m(x+y) dy` evaluated directly.
    pub first_direct: f64,
}

impl ZetaMoments {
    /// `(E[ζ^n]/n!)^{1/n}`, which tends to `μ_1`.
    pub fn root_sequence(&self) -> Vec<f64> {
        self.scaled
            .iter()
            .enumerate()
            .map(|(i, s)| s.powf(1.0 / (i + 1) as f64))
            .collect()
    }

    /// Successive ratios of `E[ζ^n]/n!`, which also tend to `μ_1`.
    pub fn ratio_sequence(&self) -> Vec<f64> {
        self.scaled.windows(2).map(|w| w[1] / w[0]).collect()
    }
}

/// Moments of the lifetime `ζ_x` from repeated kernel products:
/// `E[ζ_x^n] = n! (K^n 1)(x)`.
pub fn zeta_moments(op: &KernelOperator, mass: &MassFunction, x: f64, n_max: usize) -> Result<ZetaMoments> {
    if n_max == 0 {
        return Err(Error::InvalidParameter("n_max must be at least 1".into()));
    }
    if !op.grid().contains(x) {
        return Err(Error::OutOfGrid {
            x,
            half_width: op.grid().half_width(),
        });
    }
    let mut g = vec![1.0; op.dim()];
    let mut scaled = Vec::with_capacity(n_max);
    for n in 1..=n_max {
        scaled.push(op.apply_at(x, &g));
        if n < n_max {
            g = op.apply(&g);
        }
    }
    let mut factorial = 1.0;
    let moments = scaled
        .iter()
        .enumerate()
        .map(|(i, s)| {
            factorial *= (i + 1) as f64;
            s * factorial
        })
        .collect();
    Ok(ZetaMoments {
        x,
        moments,
        scaled,
        first_direct: first_moment_direct(op.potential(), mass, x),
    })
}

/// `E[ζ_x] = ∫ v^r(y) m(x+y) dy` over the whole line.
pub fn first_moment_direct(pd: &PotentialDensity, mass: &MassFunction, x: f64) -> f64 {
    let ell = pd.length_scale();
    let scale = ell.min(1.0);
    let cutoff = 200.0 * ell.max(1.0) + 2.0 * x.abs();
    let body = integrate_symmetric_window(
        |y| pd.eval(y) * mass.eval(x + y),
        &[0.0, -x],
        scale,
        cutoff,
    );
    // Algebraic tails of v^r (pure jump models) times the mass.
    let p = pd.model().far_field().alpha + 1.0 + mass.decay_exponent();
    let edge = pd.eval(cutoff) * (mass.eval(x + cutoff) + mass.eval(x - cutoff));
    body + edge * cutoff / (p - 1.0).max(1.0)
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct EigenBounds {
    pub lower: f64,
    pub lambda1: f64,
    pub upper: f64,
    pub pass: bool,
}

/// `1/(‖m‖₁ v^r(0)) ≤ λ_1 ≤ ‖m‖₁ v^r(0) / Z_2`.
pub fn eigen_bounds(mass: &MassFunction, v0: f64, z2: f64, lambda1: f64) -> Result<EigenBounds> {
    let l1 = mass.l1_norm()?;
    let lower = 1.0 / (l1 * v0);
    let upper = l1 * v0 / z2;
    Ok(EigenBounds {
        lower,
        lambda1,
        upper,
        pass: lower <= lambda1 && lambda1 <= upper,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SmallRRow {
    pub r: f64,
    pub gamma: f64,
    pub prediction: f64,
    pub ratio: f64,
    pub half_width: f64,
    pub nodes: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct SmallRStudy {
    pub rows: Vec<SmallRRow>,
    /// Least squares slope of `log γ` against `log r`.
    pub fitted_exponent: f64,
    /// `(α - 1)/α` from the low-frequency power law of `ψ`.
    pub expected_exponent: f64,
}

impl SmallRStudy {
    /// Whether `|ratio - 1|` shrinks along the rows (ordered by decreasing `r`).
    pub fn monotone_approach(&self) -> bool {
        self.rows
            .windows(2)
            .all(|w| (w[1].ratio - 1.0).abs() < (w[0].ratio - 1.0).abs())
    }
}

/// Half width used for kill rate `r`: the kernel spreads over `r^{-1/α}`.
pub fn small_r_half_width(model: &LevyModel, r: f64) -> f64 {
    let alpha = model.small_y_power_law().map(|p| p.0).unwrap_or(2.0);
    (8.0 * r.powf(-1.0 / alpha)).max(40.0)
}

/// Solves the spectrum for each kill rate on a sinh grid wide enough for the
/// spread of `v^r` and compares `γ(r)` with `1/(‖m‖₁ v^r(0))` at leading order.
pub fn small_r_study(
    model: LevyModel,
    mass: &MassFunction,
    rates: &[f64],
    nodes: usize,
) -> Result<SmallRStudy> {
    let l1 = mass.l1_norm()?;
    let (alpha, _) = model.small_y_power_law().ok_or_else(|| {
        Error::UnsupportedModel("small-r study needs a power law for psi near 0".into())
    })?;
    let mut sorted = rates.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut rows = Vec::with_capacity(sorted.len());
    for &r in &sorted {
        let half_width = small_r_half_width(&model, r);
        let grid = Grid::sinh(half_width, nodes, 2.0)?;
        let op = build_kernel(model, mass, r, &grid)?;
        let sol = SpectralSolution::from_operator(std::sync::Arc::new(op), 2)?;
        let gamma = sol.gamma();
        let prediction = 1.0 / (l1 * v0_asymptotic(&model, r)?);
        rows.push(SmallRRow {
            r,
            gamma,
            prediction,
            ratio: gamma / prediction,
            half_width,
            nodes,
        });
    }
    let xs: Vec<f64> = rows.iter().map(|row| row.r.ln()).collect();
    let ys: Vec<f64> = rows.iter().map(|row| row.gamma.ln()).collect();
    Ok(SmallRStudy {
        rows,
        fitted_exponent: ls_slope(&xs, &ys),
        expected_exponent: (alpha - 1.0) / alpha,
    })
}

pub(crate) fn ls_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

#[derive(Debug, Clone, Serialize)]
pub struct ZnRow {
    pub n: u32,
    pub log_zn: f64,
    pub log_zn_free: f64,
    pub neg_log_zn_over_n: f64,
    pub neg_log_zn_free_over_n: f64,
}

impl ZnRow {
    pub fn zn(&self) -> f64 {
        self.log_zn.exp()
    }

    pub fn zn_free(&self) -> f64 {
        self.log_zn_free.exp()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PartitionReport {
    pub rows: Vec<ZnRow>,
    pub v0: f64,
    pub z2_trace: f64,
    pub z2_direct: f64,
    /// `None` when the mass is not integrable.
    pub zhat2: Option<f64>,
    /// `-log Z_n / n` at the largest computed `n`.
    pub free_energy_estimate: f64,
    pub free_energy: f64,
    pub bounds: Option<EigenBounds>,
}

impl PartitionReport {
    /// `Z_n > 0` and `Z_n ≤ v^r(0) Z^f_n` on every row.
    pub fn invariants_hold(&self) -> bool {
        let log_v0 = self.v0.ln();
        self.rows.iter().all(|row| {
            row.log_zn.is_finite() && row.log_zn <= log_v0 + row.log_zn_free + 1e-12
        })
    }
}

/// Tabulates `Z_n` and `Z^f_n` for the given orders and collects the `Z_2`
/// cross-checks and the eigenvalue bounds.
pub fn partition_report(sol: &SpectralSolution, mass: &MassFunction, orders: &[u32]) -> Result<PartitionReport> {
    let op = sol.operator();
    let spectrum = TraceSpectrum::new(op);
    let mut rows = Vec::with_capacity(orders.len());
    for &n in orders {
        check_order(n)?;
        let log_zn = spectrum.log_power_sum(n);
        let log_zf = log_zn_free(op, n)?;
        rows.push(ZnRow {
            n,
            log_zn,
            log_zn_free: log_zf,
            neg_log_zn_over_n: -log_zn / n as f64,
            neg_log_zn_free_over_n: -log_zf / n as f64,
        });
    }
    let pd = op.potential();
    let v0 = pd.value_at_zero();
    let z2_trace = spectrum.power_sum(2);
    let z2d = z2_direct(pd, mass, op.grid().half_width());
    let zhat2 = if mass.in_l1() {
        Some(zhat2_dual(pd, mass)?)
    } else {
        None
    };
    let bounds = if mass.in_l1() {
        Some(eigen_bounds(mass, v0, z2d, sol.gamma())?)
    } else {
        None
    };
    let free_energy_estimate = rows
        .iter()
        .max_by_key(|row| row.n)
        .map(|row| row.neg_log_zn_over_n)
        .unwrap_or(f64::NAN);
    Ok(PartitionReport {
        rows,
        v0,
        z2_trace,
        z2_direct: z2d,
        zhat2,
        free_energy_estimate,
        free_energy: sol.free_energy(),
        bounds,
    })
}
