//! Symmetric Lévy processes on the real line and the potential densities of
//! their killed versions.
//!
//! A model is described by its characteristic exponent `ψ(y) ≤ 0`, with
//! `E[exp(i y ξ(t))] = exp(t ψ(y))`. The potential density of the process
//! killed at rate `r` is
//!
//! ```text
//! v(x) = (1/2π) ∫ exp(i x y) / (r - ψ(y)) dy = (1/π) ∫_0^∞ cos(x y) / (r - ψ(y)) dy
//! ```
//!
//! and exists as a bounded continuous function as long as the tail integral
//! `∫_{|y|>1} dy / |ψ(y)|` converges.

use std::f64::consts::PI;
use std::sync::OnceLock;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Exp1, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interp::UniformSpline;
use crate::quadrature::{graded_breaks, integrate_breaks};

/// Jump-size law of a finite-activity compound Poisson component.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum JumpLaw {
    /// Jumps of size `±size` with equal probability.
    TwoPoint { size: f64 },
    /// Centered Gaussian jumps.
    Gaussian { std_dev: f64 },
}

impl JumpLaw {
    /// Characteristic function `E[exp(i y J)]` (real by symmetry).
    pub fn char_fn(&self, y: f64) -> f64 {
        match *self {
            JumpLaw::TwoPoint { size } => (size * y).cos(),
            JumpLaw::Gaussian { std_dev } => (-0.5 * std_dev * std_dev * y * y).exp(),
        }
    }

    pub fn second_moment(&self) -> f64 {
        match *self {
            JumpLaw::TwoPoint { size } => size * size,
            JumpLaw::Gaussian { std_dev } => std_dev * std_dev,
        }
    }

    fn scale(&self) -> f64 {
        match *self {
            JumpLaw::TwoPoint { size } => size,
            JumpLaw::Gaussian { std_dev } => std_dev,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            JumpLaw::TwoPoint { size } => {
                if rng.random::<bool>() {
                    size
                } else {
                    -size
                }
            }
            JumpLaw::Gaussian { std_dev } => {
                let z: f64 = StandardNormal.sample(rng);
                std_dev * z
            }
        }
    }
}

/// A symmetric Lévy process, specified by its characteristic exponent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LevyModel {
    /// `ψ(y) = -A y² / 2`.
    Brownian { a: f64 },
    /// `ψ(y) = -c |y|^α`.
    SymmetricStable { alpha: f64, c: f64 },
    /// `ψ(y) = -A y² / 2 - λ (1 - E[cos(y J)])`.
    BrownianWithJumps { a: f64, jump_rate: f64, jumps: JumpLaw },
}

/// Outcome of the tail-integrability check on `1/|ψ|`.
#[derive(Debug, Clone, PartialEq)]
pub struct Condition2Report {
    pub holds: bool,
    /// Exponent `p` with `-ψ(y) ~ |y|^p` for large `|y|`.
    pub tail_exponent: f64,
    pub diagnostic: String,
}

/// Large-frequency form `-ψ(y) ≈ c |y|^α + shift`, with a bounded
/// oscillating remainder of amplitude at most `remainder`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FarField {
    pub alpha: f64,
    pub c: f64,
    pub shift: f64,
    pub remainder: f64,
}

impl LevyModel {
    pub fn brownian(a: f64) -> Result<Self> {
        if !(a > 0.0 && a.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "Gaussian coefficient must be positive, got {a}"
            )));
        }
        Ok(LevyModel::Brownian { a })
    }

    /// Symmetric α-stable process. Only `α ∈ (1, 2]` is accepted; for
    /// `α ≤ 1` the potential density does not exist.
    pub fn stable(alpha: f64, c: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "stable scale must be positive, got {c}"
            )));
        }
        if !(alpha > 1.0 && alpha <= 2.0) {
            if alpha > 0.0 && alpha <= 1.0 {
                return Err(Error::ConditionViolated(format!(
                    "stable index alpha = {alpha} <= 1 makes the tail integral of 1/|psi| diverge"
                )));
            }
            return Err(Error::InvalidParameter(format!(
                "stable index must lie in (1, 2], got {alpha}"
            )));
        }
        Ok(LevyModel::SymmetricStable { alpha, c })
    }

    /// Constructor without the index restriction; for negative tests only.
    #[doc(hidden)]
    pub fn stable_unchecked(alpha: f64, c: f64) -> Self {
        LevyModel::SymmetricStable { alpha, c }
    }

    pub fn brownian_with_jumps(a: f64, jump_rate: f64, jumps: JumpLaw) -> Result<Self> {
        if !(a >= 0.0 && a.is_finite()) || !(jump_rate >= 0.0 && jump_rate.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "need A >= 0 and jump rate >= 0, got A = {a}, rate = {jump_rate}"
            )));
        }
        if !(jumps.scale() > 0.0) {
            return Err(Error::InvalidParameter("jump scale must be positive".into()));
        }
        Ok(LevyModel::BrownianWithJumps { a, jump_rate, jumps })
    }

    /// The characteristic exponent `ψ(y)`.
    pub fn char_exponent(&self, y: f64) -> f64 {
        match *self {
            LevyModel::Brownian { a } => -0.5 * a * y * y,
            LevyModel::SymmetricStable { alpha, c } => -c * y.abs().powf(alpha),
            LevyModel::BrownianWithJumps { a, jump_rate, jumps } => {
                -0.5 * a * y * y - jump_rate * (1.0 - jumps.char_fn(y))
            }
        }
    }

    /// Gaussian coefficient `A` (zero for pure-jump models).
    pub fn gaussian_coefficient(&self) -> f64 {
        match *self {
            LevyModel::Brownian { a } | LevyModel::BrownianWithJumps { a, .. } => a,
            LevyModel::SymmetricStable { alpha, c } if alpha == 2.0 => 2.0 * c,
            LevyModel::SymmetricStable { .. } => 0.0,
        }
    }

    pub fn far_field(&self) -> FarField {
        match *self {
            LevyModel::Brownian { a } => FarField {
                alpha: 2.0,
                c: 0.5 * a,
                shift: 0.0,
                remainder: 0.0,
            },
            LevyModel::SymmetricStable { alpha, c } => FarField {
                alpha,
                c,
                shift: 0.0,
                remainder: 0.0,
            },
            LevyModel::BrownianWithJumps { a, jump_rate, .. } => FarField {
                alpha: if a > 0.0 { 2.0 } else { 0.0 },
                c: 0.5 * a,
                shift: jump_rate,
                remainder: jump_rate,
            },
        }
    }

    /// Small-frequency power law `-ψ(y) ~ c |y|^α` as `y → 0`, when known.
    pub fn small_y_power_law(&self) -> Option<(f64, f64)> {
        match *self {
            LevyModel::Brownian { a } => Some((2.0, 0.5 * a)),
            LevyModel::SymmetricStable { alpha, c } => Some((alpha, c)),
            LevyModel::BrownianWithJumps { a, jump_rate, jumps } => {
                let var = a + jump_rate * jumps.second_moment();
                (var > 0.0).then_some((2.0, 0.5 * var))
            }
        }
    }

    /// `E[ξ(1)²]` when finite.
    pub fn variance_rate(&self) -> Option<f64> {
        match *self {
            LevyModel::Brownian { a } => Some(a),
            LevyModel::SymmetricStable { alpha, c } if alpha == 2.0 => Some(2.0 * c),
            LevyModel::SymmetricStable { .. } => None,
            LevyModel::BrownianWithJumps { a, jump_rate, jumps } => {
                Some(a + jump_rate * jumps.second_moment())
            }
        }
    }

    pub fn check_condition2(&self) -> Condition2Report {
        let ff = self.far_field();
        let p = if ff.c > 0.0 { ff.alpha } else { 0.0 };
        let holds = p > 1.0;
        let diagnostic = if holds {
            format!("-psi(y) grows like |y|^{p}; tail integral of 1/|psi| converges")
        } else if p == 0.0 {
            "-psi is bounded at infinity; tail integral of 1/|psi| diverges linearly".to_string()
        } else if p == 1.0 {
            "-psi(y) grows like |y|; tail integral of 1/|psi| diverges logarithmically".to_string()
        } else {
            format!("-psi(y) grows like |y|^{p} with p <= 1; tail integral of 1/|psi| diverges")
        };
        Condition2Report {
            holds,
            tail_exponent: p,
            diagnostic,
        }
    }

    fn require_condition2(&self) -> Result<()> {
        let rep = self.check_condition2();
        if rep.holds {
            Ok(())
        } else {
            Err(Error::ConditionViolated(rep.diagnostic))
        }
    }

    /// One increment `ξ(t + dt) - ξ(t)`.
    pub fn sample_increment<R: Rng + ?Sized>(&self, rng: &mut R, dt: f64) -> f64 {
        match *self {
            LevyModel::Brownian { a } => {
                let z: f64 = StandardNormal.sample(rng);
                (a * dt).sqrt() * z
            }
            LevyModel::SymmetricStable { alpha, c } => {
                (c * dt).powf(1.0 / alpha) * sample_symmetric_stable(rng, alpha)
            }
            LevyModel::BrownianWithJumps { a, jump_rate, jumps } => {
                let z: f64 = StandardNormal.sample(rng);
                let mut dx = (a * dt).sqrt() * z;
                let mean = jump_rate * dt;
                if mean > 0.0 {
                    let count: f64 = Poisson::new(mean).map(|p| p.sample(rng)).unwrap_or(0.0);
                    for _ in 0..count as u64 {
                        dx += jumps.sample(rng);
                    }
                }
                dx
            }
        }
    }
}

/// Chambers–Mallows–Stuck draw of a standard symmetric α-stable variable,
/// normalized so that `E[exp(i y X)] = exp(-|y|^α)`.
pub fn sample_symmetric_stable<R: Rng + ?Sized>(rng: &mut R, alpha: f64) -> f64 {
    let u: f64 = rng.random_range(-0.5 * PI..0.5 * PI);
    let w: f64 = Exp1.sample(rng);
    if (alpha - 2.0).abs() < 1e-14 {
        // Gaussian with variance 2.
        return 2.0 * u.sin() * w.sqrt();
    }
    let num = (alpha * u).sin() / u.cos().powf(1.0 / alpha);
    let tail = ((u - alpha * u).cos() / w).powf((1.0 - alpha) / alpha);
    num * tail
}

/// How the potential density is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    ClosedForm,
    FourierQuadrature,
}

/// Tuning of the Fourier-inversion quadrature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSettings {
    /// Number of half-periods of `cos(x y)` integrated before switching to
    /// the asymptotic tail.
    pub oscillation_cycles: f64,
    /// Declared absolute accuracy of `v`.
    pub tolerance: f64,
    /// Table knots per decade of `|x|`.
    pub knots_per_decade: usize,
}

impl Default for QuadratureSettings {
    fn default() -> Self {
        Self {
            oscillation_cycles: 40.0,
            tolerance: 1e-8,
            knots_per_decade: 320,
        }
    }
}

#[derive(Debug)]
struct Table {
    log_lo: f64,
    spline: UniformSpline,
    v_lo: f64,
    cusp_exponent: f64,
    v_hi: f64,
    x_hi: f64,
    hi_decay: HiDecay,
}

/// Continuation of the table beyond its last knot.
#[derive(Debug, Clone, Copy)]
enum HiDecay {
    /// `v ∝ x^{-p}` (pure jump models).
    Power(f64),
    /// `v ∝ e^{-κ x}` (models with a Gaussian part).
    Exponential(f64),
}

/// Potential density `v^r(x)` of a model killed at rate `r`.
#[derive(Debug)]
pub struct PotentialDensity {
    model: LevyModel,
    kill_rate: f64,
    backend: Backend,
    settings: QuadratureSettings,
    v0: f64,
    table: OnceLock<Table>,
}

impl Clone for PotentialDensity {
    fn clone(&self) -> Self {
        let out = Self {
            model: self.model,
            kill_rate: self.kill_rate,
            backend: self.backend,
            settings: self.settings,
            v0: self.v0,
            table: OnceLock::new(),
        };
        // The table is immutable once built; rebuild lazily in the clone.
        out
    }
}

impl PotentialDensity {
    /// Closed form where one exists, quadrature otherwise.
    pub fn new(model: LevyModel, kill_rate: f64) -> Result<Self> {
        let backend = match model {
            LevyModel::Brownian { .. } => Backend::ClosedForm,
            _ => Backend::FourierQuadrature,
        };
        Self::with_backend(model, kill_rate, backend)
    }

    pub fn with_backend(model: LevyModel, kill_rate: f64, backend: Backend) -> Result<Self> {
        Self::with_settings(model, kill_rate, backend, QuadratureSettings::default())
    }

    pub fn with_settings(
        model: LevyModel,
        kill_rate: f64,
        backend: Backend,
        settings: QuadratureSettings,
    ) -> Result<Self> {
        if !(kill_rate > 0.0 && kill_rate.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "kill rate must be positive, got {kill_rate}"
            )));
        }
        model.require_condition2()?;
        if backend == Backend::ClosedForm && !matches!(model, LevyModel::Brownian { .. }) {
            return Err(Error::UnsupportedModel(
                "closed-form potential density is only available for Brownian motion".into(),
            ));
        }
        let mut pd = Self {
            model,
            kill_rate,
            backend,
            settings,
            v0: f64::NAN,
            table: OnceLock::new(),
        };
        pd.v0 = pd.eval_direct(0.0)?;
        Ok(pd)
    }

    pub fn model(&self) -> &LevyModel {
        &self.model
    }

    pub fn kill_rate(&self) -> f64 {
        self.kill_rate
    }

    pub fn backend(&self) -> Backend {
        self.backend
    }

    /// Declared absolute accuracy of `eval`.
    pub fn accuracy(&self) -> f64 {
        match self.backend {
            Backend::ClosedForm => f64::EPSILON * self.v0,
            Backend::FourierQuadrature => self.settings.tolerance,
        }
    }

    /// Cached `v^r(0)`.
    pub fn value_at_zero(&self) -> f64 {
        self.v0
    }

    /// Spatial length scale of the density.
    pub fn length_scale(&self) -> f64 {
        let (alpha, c) = self
            .model
            .small_y_power_law()
            .unwrap_or((self.model.far_field().alpha, self.model.far_field().c));
        (c / self.kill_rate).powf(1.0 / alpha)
    }

    /// One-sided slope `v'(0+)` when `v` has a Lipschitz kink at the origin
    /// (models with a Gaussian part); `None` for cusps.
    pub fn kink_slope(&self) -> Option<f64> {
        let a = self.model.gaussian_coefficient();
        (a > 0.0).then(|| -1.0 / a)
    }

    /// `v^r(x)`: closed form, or interpolation in a lazily built table.
    pub fn eval(&self, x: f64) -> f64 {
        match self.backend {
            Backend::ClosedForm => self.closed_form(x),
            Backend::FourierQuadrature => {
                let x = x.abs();
                if x == 0.0 {
                    return self.v0;
                }
                self.table().eval(x, self.v0)
            }
        }
    }

    /// `log v^r(x)`.
    pub fn log_eval(&self, x: f64) -> f64 {
        match self.model {
            LevyModel::Brownian { a } if self.backend == Backend::ClosedForm => {
                let kappa = (2.0 * self.kill_rate / a).sqrt();
                -kappa * x.abs() - 0.5 * (2.0 * self.kill_rate * a).ln()
            }
            _ => self.eval(x).ln(),
        }
    }

    fn closed_form(&self, x: f64) -> f64 {
        let a = self.model.gaussian_coefficient();
        let kappa = (2.0 * self.kill_rate / a).sqrt();
        (-kappa * x.abs()).exp() / (2.0 * self.kill_rate * a).sqrt()
    }

    /// `v^r(x)` straight from the backend, bypassing any table.
    pub fn eval_direct(&self, x: f64) -> Result<f64> {
        match self.backend {
            Backend::ClosedForm => Ok(self.closed_form(x)),
            Backend::FourierQuadrature => match self.model {
                LevyModel::BrownianWithJumps { a, jump_rate, jumps } if a > 0.0 => {
                    Ok(self.jump_inversion(x.abs(), a, jump_rate, jumps))
                }
                _ => self.fourier_inversion(x.abs()),
            },
        }
    }

    /// Inversion for a Gaussian part plus compound Poisson jumps. With
    /// `g(y) = r + λ + A y²/2` and `φ` the jump characteristic function,
    /// `1/(g - λφ) = 1/g + λφ/g² + λ²φ²/(g²(g - λφ))`. The first term inverts
    /// to a two-sided exponential, the second is closed form for two-point
    /// jumps, and only the `O(y^{-6})` rest is integrated numerically.
    fn jump_inversion(&self, x: f64, a: f64, lambda: f64, jumps: JumpLaw) -> f64 {
        let r = self.kill_rate;
        let b = 0.5 * a;
        let g0 = r + lambda;
        let k = (g0 / b).sqrt();
        let tol = 0.1 * self.settings.tolerance;
        let g = |y: f64| g0 + b * y * y;
        // (1/π) ∫_0^∞ cos(ωy)/g(y) dy and (1/π) ∫_0^∞ cos(ωy)/g(y)² dy.
        let f1 = |w: f64| (-k * w.abs()).exp() / (2.0 * (b * g0).sqrt());
        let f2 = |w: f64| (1.0 + k * w.abs()) * (-k * w.abs()).exp() / (4.0 * b.sqrt() * g0.powf(1.5));
        let osc = if x > 0.0 { 0.5 * PI / x } else { f64::INFINITY };
        let first = (r / b).sqrt().min(1.0) * 2f64.powi(-12);
        match jumps {
            JumpLaw::TwoPoint { size } => {
                let closed = f1(x) + 0.5 * lambda * (f2(x + size) + f2(x - size));
                // ∫_Y^∞ λ²/(g²(g-λ)) ≤ λ² / (5 b³ Y⁵).
                let cutoff = (lambda * lambda / (5.0 * b.powi(3) * tol)).powf(0.2).max(10.0 * k);
                let breaks = graded_breaks(0.0, cutoff, first, osc.min(0.5 * PI / size));
                let rest = integrate_breaks(
                    &mut |y| {
                        let phi = (size * y).cos();
                        let gy = g(y);
                        (x * y).cos() * lambda * lambda * phi * phi / (gy * gy * (gy - lambda * phi))
                    },
                    &breaks,
                );
                closed + rest / PI
            }
            JumpLaw::Gaussian { std_dev } => {
                // |λφ/(g(g-λφ))| ≤ λ e^{-σ²y²/2} / (g0 r).
                let s2 = std_dev * std_dev;
                let mut cutoff = 10.0 * k;
                while lambda * (-0.5 * s2 * cutoff * cutoff).exp() / (g0 * r * s2 * cutoff) > tol {
                    cutoff *= 1.25;
                }
                let breaks = graded_breaks(0.0, cutoff, first, osc.min(0.5 / std_dev));
                let rest = integrate_breaks(
                    &mut |y| {
                        let phi = jumps.char_fn(y);
                        let gy = g(y);
                        (x * y).cos() * lambda * phi / (gy * (gy - lambda * phi))
                    },
                    &breaks,
                );
                f1(x) + rest / PI
            }
        }
    }

    fn resolvent(&self, y: f64) -> f64 {
        1.0 / (self.kill_rate - self.model.char_exponent(y))
    }

    fn fourier_inversion(&self, x: f64) -> Result<f64> {
        let ff = self.model.far_field();
        let r = self.kill_rate;
        let shifted = r + ff.shift;
        let freq_scale = (r / ff.c).powf(1.0 / ff.alpha).min(1.0);
        // Beyond y_far the oscillating jump part is negligible.
        let far_tol = 0.1 * self.settings.tolerance;
        let y_far = if ff.remainder > 0.0 {
            let p = 2.0 * ff.alpha - 1.0;
            (ff.remainder / (ff.c * ff.c * p * far_tol)).powf(1.0 / p)
        } else {
            0.0
        };
        let far_err = |y: f64| {
            if ff.remainder > 0.0 {
                let p = 2.0 * ff.alpha - 1.0;
                ff.remainder / (ff.c * ff.c * p * y.powf(p))
            } else {
                0.0
            }
        };
        let max_width = match self.model {
            LevyModel::BrownianWithJumps { jumps, .. } => 0.5 * PI / jumps.scale(),
            _ => f64::INFINITY,
        };
        let first = freq_scale * 2f64.powi(-16);

        let (body, tail, remainder, cutoff) = if x == 0.0 {
            let y_series = (10.0 * shifted / ff.c).powf(1.0 / ff.alpha);
            let cutoff = y_series.max(y_far).max(freq_scale);
            let breaks = graded_breaks(0.0, cutoff, first, max_width);
            let body = integrate_breaks(&mut |y| self.resolvent(y), &breaks);
            let tail = power_tail_series(shifted, ff.c, ff.alpha, cutoff);
            (body, tail, far_err(cutoff), cutoff)
        } else {
            let osc_width = 0.5 * PI / x;
            let cutoff = (self.settings.oscillation_cycles * PI / x).max(y_far);
            // The jump spacing only matters below y_far.
            let inner = y_far.min(cutoff);
            let mut breaks = graded_breaks(0.0, inner, first, max_width.min(osc_width));
            if cutoff > inner {
                let start = if inner > 0.0 { osc_width.min(inner) } else { first };
                breaks.pop();
                breaks.extend(graded_breaks(inner, cutoff, start, osc_width));
            }
            let body = integrate_breaks(&mut |y| (x * y).cos() * self.resolvent(y), &breaks);
            let (tail, ibp_err) = oscillatory_tail(shifted, ff.c, ff.alpha, cutoff, x);
            (body, tail, ibp_err + far_err(cutoff), cutoff)
        };
        if remainder > self.settings.tolerance {
            log::warn!("Fourier tail remainder {remainder:.2e} at cutoff {cutoff:.3e}");
            return Err(Error::CutoffTooSmall {
                remainder,
                tolerance: self.settings.tolerance,
            });
        }
        Ok((body + tail) / PI)
    }

    fn table(&self) -> &Table {
        self.table.get_or_init(|| self.build_table())
    }

    fn build_table(&self) -> Table {
        let ell = self.length_scale();
        let per_decade = self.settings.knots_per_decade as f64;
        let step = std::f64::consts::LN_10 / per_decade;
        let log_lo = (ell * 1e-7).ln();
        // Below this level the inversion is round-off and may even change
        // sign; the table stops there and the tail is extrapolated.
        let floor = 1e-11 * self.v0;
        // Extend in decades until the density reaches the floor.
        let mut log_hi = ell.ln();
        let max_hi = (ell * 1e9).ln();
        loop {
            let v = self.eval_direct(log_hi.exp()).unwrap_or(0.0);
            if v.abs() < floor || log_hi >= max_hi {
                break;
            }
            log_hi += std::f64::consts::LN_10;
        }
        let n = ((log_hi - log_lo) / step).ceil() as usize + 1;
        let mut values: Vec<f64> = crate::par::map_range(n, |i| {
            let x = (log_lo + step * i as f64).exp();
            self.eval_direct(x).unwrap_or(0.0)
        });
        let keep = values
            .iter()
            .position(|&v| v <= floor)
            .unwrap_or(n)
            .max(4);
        values.truncate(keep);
        let n = values.len();
        let v_lo = values[0];
        let v_hi = values[n - 1];
        let prev = values[n - 2];
        let log_end = log_lo + step * (n - 1) as f64;
        let x_hi = log_end.exp();
        let decaying = v_hi > 0.0 && prev > v_hi;
        let hi_decay = if self.model.gaussian_coefficient() > 0.0 {
            let dx = x_hi - (log_end - step).exp();
            HiDecay::Exponential(if decaying { (prev / v_hi).ln() / dx } else { 1.0 / self.length_scale() })
        } else {
            HiDecay::Power(if decaying { (prev / v_hi).ln() / step } else { 8.0 })
        };
        let ff = self.model.far_field();
        let cusp_exponent = (ff.alpha - 1.0).min(1.0);
        let spline = UniformSpline::new(log_lo, step, values);
        Table {
            log_lo,
            spline,
            v_lo,
            cusp_exponent,
            v_hi,
            x_hi,
            hi_decay,
        }
    }

    /// Trapezoid-free quadrature of `∫_{-L}^{L} v(x) dx`; approaches `1/r`.
    pub fn l1_check(&self, half_width: f64) -> f64 {
        let ell = self.length_scale();
        let breaks = graded_breaks(0.0, half_width, ell * 1e-6, 0.25 * ell);
        2.0 * integrate_breaks(&mut |x| self.eval(x), &breaks)
    }

    /// Estimate of `∫_{|x|>L} v(x) dx`.
    pub fn tail_mass_bound(&self, half_width: f64) -> f64 {
        let r = self.kill_rate;
        match self.model {
            LevyModel::Brownian { a } => {
                let kappa = (2.0 * r / a).sqrt();
                2.0 * (-kappa * half_width).exp() / (kappa * (2.0 * r * a).sqrt())
            }
            LevyModel::SymmetricStable { alpha, c } => {
                // v(x) ~ ν(x) / r² with Lévy density ν(x) = C |x|^{-1-α}.
                let coeff = c * libm::tgamma(1.0 + alpha) * (0.5 * PI * alpha).sin() / PI;
                2.0 * coeff * half_width.powf(-alpha) / (alpha * r * r)
            }
            LevyModel::BrownianWithJumps { .. } => {
                let h = 1e-3 * self.length_scale();
                let v1 = self.eval(half_width);
                let v2 = self.eval(half_width + h);
                if v1 <= 0.0 || v2 <= 0.0 || v2 >= v1 {
                    return 2.0 * v1.abs() * self.length_scale();
                }
                let rate = (v1 / v2).ln() / h;
                2.0 * v1 / rate
            }
        }
    }
}

impl Table {
    fn eval(&self, x: f64, v0: f64) -> f64 {
        let u = x.ln();
        if u < self.log_lo {
            let x_lo = self.log_lo.exp();
            return v0 + (self.v_lo - v0) * (x / x_lo).powf(self.cusp_exponent);
        }
        if x > self.x_hi {
            return match self.hi_decay {
                HiDecay::Power(p) => self.v_hi * (self.x_hi / x).powf(p),
                HiDecay::Exponential(k) => self.v_hi * (-k * (x - self.x_hi)).exp(),
            };
        }
        self.spline.eval(u)
    }
}

/// `∫_Y^∞ dy / (r + c y^α)` by its convergent expansion in `r / (c y^α)`.
fn power_tail_series(r: f64, c: f64, alpha: f64, y: f64) -> f64 {
    let q = r / (c * y.powf(alpha));
    debug_assert!(q < 1.0);
    let mut sum = 0.0;
    let mut coef = y.powf(1.0 - alpha) / c;
    for k in 0..200 {
        let term = coef / ((k + 1) as f64 * alpha - 1.0);
        sum += term;
        if term.abs() < 1e-17 * sum.abs() {
            break;
        }
        coef *= -q;
    }
    sum
}

/// `∫_Y^∞ cos(x y) / (r + c y^α) dy` by repeated integration by parts.
/// Returns `(value, size of the last retained term)`.
fn oscillatory_tail(r: f64, c: f64, alpha: f64, y: f64, x: f64) -> (f64, f64) {
    const TERMS: usize = 24;
    // Taylor coefficients of g(y + t) = r + c (y + t)^α.
    let mut g = [0.0; TERMS];
    g[0] = r + c * y.powf(alpha);
    let mut binom = 1.0;
    for (j, gj) in g.iter_mut().enumerate().skip(1) {
        binom *= (alpha - (j - 1) as f64) / j as f64;
        *gj = c * binom * y.powf(alpha - j as f64);
    }
    // Taylor coefficients of 1/g.
    let mut h = [0.0; TERMS];
    h[0] = 1.0 / g[0];
    for n in 1..TERMS {
        let s: f64 = (1..=n).map(|k| g[k] * h[n - k]).sum();
        h[n] = -s / g[0];
    }
    // ∫_Y^∞ e^{ixy} f = -e^{ixY} Σ_j (-1)^j f^{(j)}(Y) / (ix)^{j+1}
    let phase = Complex64::from_polar(1.0, x * y);
    let ix = Complex64::new(0.0, x);
    let mut sum = Complex64::new(0.0, 0.0);
    let mut factorial = 1.0;
    let mut denom = ix;
    let mut last = f64::INFINITY;
    for (j, hj) in h.iter().enumerate() {
        if j > 0 {
            factorial *= j as f64;
            denom *= ix;
        }
        let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
        let term = sign * factorial * hj / denom;
        let size = term.norm();
        if size > last {
            break;
        }
        sum += term;
        last = size;
        if size < 1e-18 {
            break;
        }
    }
    ((-phase * sum).re, last)
}

/// Small-`r` prediction for `v^r(0)` from the low-frequency power law of `ψ`.
pub fn v0_asymptotic(model: &LevyModel, kill_rate: f64) -> Result<f64> {
    let (alpha, c) = model.small_y_power_law().ok_or_else(|| {
        Error::UnsupportedModel("no small-frequency power law for this model".into())
    })?;
    if alpha > 1.0 {
        let integral = (PI / alpha) / (PI / alpha).sin();
        Ok(kill_rate.powf(-(alpha - 1.0) / alpha) * integral / (PI * c.powf(1.0 / alpha)))
    } else if alpha == 1.0 {
        Ok((1.0 / kill_rate).ln() / (c * PI))
    } else {
        Err(Error::UnsupportedModel(format!(
            "small-frequency exponent {alpha} < 1"
        )))
    }
}

/// `∫_0^∞ du / (1 + u^α)` for `α > 1`.
pub fn stable_integral(alpha: f64) -> f64 {
    (PI / alpha) / (PI / alpha).sin()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn char_exponent_examples() {
        let b = LevyModel::brownian(1.0).unwrap();
        assert_eq!(b.char_exponent(2.0), -2.0);
        let s = LevyModel::stable(1.5, 1.0).unwrap();
        assert_relative_eq!(s.char_exponent(-3.0), -(3f64.powf(1.5)), epsilon = 1e-12);
        assert_relative_eq!(s.char_exponent(-3.0), -5.196152422706632, epsilon = 1e-12);
        let j = LevyModel::brownian_with_jumps(1.0, 2.0, JumpLaw::TwoPoint { size: 1.0 }).unwrap();
        for m in [b, s, j] {
            assert_eq!(m.char_exponent(0.0), 0.0);
        }
        assert_relative_eq!(j.char_exponent(1.5), -0.5 * 2.25 - 2.0 * (1.0 - 1.5f64.cos()));
    }

    #[test]
    fn condition2_examples() {
        assert!(LevyModel::brownian(1.0).unwrap().check_condition2().holds);
        assert!(LevyModel::stable(1.5, 1.0).unwrap().check_condition2().holds);
        let bad = LevyModel::stable_unchecked(1.0, 1.0).check_condition2();
        assert!(!bad.holds);
        assert_eq!(bad.tail_exponent, 1.0);
        assert!(bad.diagnostic.contains("logarithm"));
        let pure_jumps =
            LevyModel::brownian_with_jumps(0.0, 1.0, JumpLaw::Gaussian { std_dev: 1.0 }).unwrap();
        assert!(!pure_jumps.check_condition2().holds);
    }

    #[test]
    fn condition2_oracle_log_divergence() {
        // ∫_1^Y dy/(c y) grows by log(100) per two decades: no finite limit.
        let f = |y: f64| 1.0 / y;
        let partial = |upper: f64| {
            let breaks = graded_breaks(1.0, upper, 0.5, f64::INFINITY);
            integrate_breaks(&mut |y| f(y), &breaks)
        };
        let (a, b, c) = (partial(1e2), partial(1e4), partial(1e6));
        assert_relative_eq!(b - a, 100f64.ln(), epsilon = 1e-8);
        assert_relative_eq!(c - b, 100f64.ln(), epsilon = 1e-8);
    }

    #[test]
    fn stable_constructor_rejects_small_index() {
        assert!(matches!(
            LevyModel::stable(0.8, 1.0),
            Err(Error::ConditionViolated(_))
        ));
        assert!(matches!(
            LevyModel::stable(2.5, 1.0),
            Err(Error::InvalidParameter(_))
        ));
        assert!(matches!(
            PotentialDensity::new(LevyModel::stable_unchecked(1.0, 1.0), 1.0),
            Err(Error::ConditionViolated(_))
        ));
    }

    #[test]
    fn brownian_closed_form_examples() {
        let pd = PotentialDensity::new(LevyModel::brownian(1.0).unwrap(), 0.5).unwrap();
        assert_eq!(pd.backend(), Backend::ClosedForm);
        assert_relative_eq!(pd.eval(0.0), 1.0, epsilon = 1e-15);
        assert_relative_eq!(pd.eval(1.0), (-1f64).exp(), epsilon = 1e-15);
        assert_relative_eq!(pd.eval(-1.0), 0.36787944117144233, epsilon = 1e-15);
        assert_eq!(pd.kink_slope(), Some(-1.0));
        assert_relative_eq!(pd.log_eval(2.5), pd.eval(2.5).ln(), epsilon = 1e-14);
    }

    #[test]
    fn stable_value_at_zero_matches_closed_form() {
        let pd = PotentialDensity::new(LevyModel::stable(1.5, 1.0).unwrap(), 1.0).unwrap();
        let exact = stable_integral(1.5) / PI;
        assert_relative_eq!(exact, 0.769_800_358_919_501, epsilon = 1e-12);
        assert!((pd.value_at_zero() - exact).abs() < 1e-9);
    }

    #[test]
    fn quadrature_matches_brownian_closed_form() {
        let model = LevyModel::brownian(1.0).unwrap();
        let quad = PotentialDensity::with_backend(model, 0.5, Backend::FourierQuadrature).unwrap();
        let exact = PotentialDensity::new(model, 0.5).unwrap();
        let mut worst: f64 = 0.0;
        for i in 0..=400 {
            let x = -20.0 + 0.1 * i as f64;
            worst = worst.max((quad.eval(x) - exact.eval(x)).abs());
            worst = worst.max((quad.eval_direct(x).unwrap() - exact.eval(x)).abs());
        }
        assert!(worst < 1e-6, "max abs error {worst:e}");
        assert!(worst < 1e-8, "max abs error {worst:e}");
    }

    #[test]
    fn table_agrees_with_direct_quadrature() {
        let pd = PotentialDensity::new(LevyModel::stable(1.5, 1.0).unwrap(), 1.0).unwrap();
        for x in [1e-9, 1e-4, 0.013, 0.5, 1.0, 3.3, 10.0, 77.0, 400.0, 2e4] {
            let a = pd.eval(x);
            let b = pd.eval_direct(x).unwrap();
            assert!((a - b).abs() < 1e-8, "x={x}: table {a} direct {b}");
        }
    }

    #[test]
    fn stable_far_tail_follows_levy_density() {
        // v(x) ~ ν(x)/r² for large |x|.
        let (alpha, c) = (1.5, 1.0);
        let pd = PotentialDensity::new(LevyModel::stable(alpha, c).unwrap(), 1.0).unwrap();
        let coeff = c * libm::tgamma(1.0 + alpha) * (0.5 * PI * alpha).sin() / PI;
        let x = 300.0;
        assert_relative_eq!(pd.eval(x), coeff * x.powf(-1.0 - alpha), max_relative = 2e-2);
    }

    #[test]
    fn v0_asymptotic_examples() {
        let b = LevyModel::brownian(1.0).unwrap();
        assert_relative_eq!(
            v0_asymptotic(&b, 0.01).unwrap(),
            1.0 / 0.02f64.sqrt(),
            epsilon = 1e-12
        );
        let one = LevyModel::stable_unchecked(1.0, 1.0);
        assert_relative_eq!(
            v0_asymptotic(&one, 1e-3).unwrap(),
            1000f64.ln() / PI,
            epsilon = 1e-12
        );
        assert_relative_eq!(v0_asymptotic(&one, 1e-3).unwrap(), 2.19881, epsilon = 1e-5);
        let s = LevyModel::stable(1.5, 1.0).unwrap();
        let pd = PotentialDensity::new(s, 1e-4).unwrap();
        let pred = v0_asymptotic(&s, 1e-4).unwrap();
        assert!((pred / pd.value_at_zero() - 1.0).abs() < 0.02);
    }

    #[test]
    fn jump_model_density() {
        let model =
            LevyModel::brownian_with_jumps(1.0, 1.0, JumpLaw::Gaussian { std_dev: 0.5 }).unwrap();
        let pd = PotentialDensity::new(model, 1.0).unwrap();
        assert!(pd.value_at_zero() > 0.0);
        assert!(pd.eval(1.0) < pd.value_at_zero());
        let total = pd.l1_check(40.0);
        assert!((total - 1.0).abs() < 1e-5, "{total}");
    }

    #[test]
    fn stable_sampler_has_unit_characteristic_function() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let alpha = 1.5;
        let n = 200_000;
        let y = 0.8;
        let mean_cos: f64 = (0..n)
            .map(|_| (y * sample_symmetric_stable(&mut rng, alpha)).cos())
            .sum::<f64>()
            / n as f64;
        let expected = (-(y.powf(alpha))).exp();
        assert!((mean_cos - expected).abs() < 5e-3, "{mean_cos} vs {expected}");
    }
}
