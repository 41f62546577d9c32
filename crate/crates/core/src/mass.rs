//! Time-change densities `m`: positive, continuous, vanishing at infinity.

use std::f64::consts::PI;
use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{graded_breaks, integrate_breaks};

/// Smallest admissible value of `m` on a sampled point.
pub const POSITIVITY_FLOOR: f64 = 1e-300;

#[derive(Debug, Clone, PartialEq)]
pub enum MassKind {
    /// `1/(1+|x|)`.
    InvLinear,
    /// `(2x²+6|x|+3)/(1+|x|)⁴`.
    Example2Rational,
    /// `exp(-a x²)`.
    Gaussian { a: f64 },
    /// `1/(1+x²)`.
    CauchyLike,
    /// Piecewise-linear data, continued by `m(x_end) |x_end/x|^p` outside.
    Tabulated {
        xs: Arc<[f64]>,
        ms: Arc<[f64]>,
        decay_exponent: f64,
    },
    /// `m ≡ c0`. Not a valid time change; used to exercise validation and
    /// simulation edge cases.
    Constant { c0: f64 },
}

/// Summary of the integrability and size of `m`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MassNorms {
    pub sup: f64,
    pub l1: Option<f64>,
    pub l2: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct MassFunction {
    kind: MassKind,
    name: String,
    in_l1: bool,
    in_l2: bool,
    norms: MassNorms,
}

/// Result of sampling the standing hypotheses on `m`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionReport {
    pub passed: bool,
    pub failing_predicate: Option<String>,
    pub in_l1: bool,
    pub in_l2: bool,
    pub samples: usize,
}

impl MassFunction {
    fn from_kind(kind: MassKind, name: impl Into<String>) -> Self {
        let p = decay_exponent_of(&kind);
        let in_l1 = p > 1.0;
        let in_l2 = p > 0.5;
        let mut out = Self {
            kind,
            name: name.into(),
            in_l1,
            in_l2,
            norms: MassNorms {
                sup: 0.0,
                l1: None,
                l2: None,
            },
        };
        out.norms = MassNorms {
            sup: out.compute_sup(),
            l1: in_l1.then(|| out.integrate_power(1.0)),
            l2: in_l2.then(|| out.integrate_power(2.0).sqrt()),
        };
        out
    }

    pub fn inv_linear() -> Self {
        Self::from_kind(MassKind::InvLinear, "inv_linear")
    }

    pub fn example2_rational() -> Self {
        Self::from_kind(MassKind::Example2Rational, "example2_rational")
    }

    pub fn gaussian(a: f64) -> Result<Self> {
        if !(a > 0.0 && a.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "gaussian mass needs a > 0, got {a}"
            )));
        }
        Ok(Self::from_kind(MassKind::Gaussian { a }, format!("gaussian({a})")))
    }

    pub fn cauchy_like() -> Self {
        Self::from_kind(MassKind::CauchyLike, "cauchy_like")
    }

    #[doc(hidden)]
    pub fn constant(c0: f64) -> Self {
        Self::from_kind(MassKind::Constant { c0 }, format!("constant({c0})"))
    }

    /// Piecewise-linear mass through `(xs[i], ms[i])`, with algebraic decay
    /// `|x|^{-decay_exponent}` outside the data range.
    pub fn tabulated(xs: Vec<f64>, ms: Vec<f64>, decay_exponent: f64) -> Result<Self> {
        if xs.len() < 2 || xs.len() != ms.len() {
            return Err(Error::InvalidParameter(
                "tabulated mass needs at least two (x, m) rows".into(),
            ));
        }
        if xs.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidParameter(
                "tabulated mass abscissae must be strictly increasing".into(),
            ));
        }
        if !(xs[0] < 0.0 && *xs.last().unwrap() > 0.0) {
            return Err(Error::InvalidParameter(
                "tabulated mass must cover both sides of the origin".into(),
            ));
        }
        if !(decay_exponent >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "decay exponent must be non-negative, got {decay_exponent}"
            )));
        }
        Ok(Self::from_kind(
            MassKind::Tabulated {
                xs: xs.into(),
                ms: ms.into(),
                decay_exponent,
            },
            "tabulated",
        ))
    }

    /// Reads a two-column CSV file (`x,m` with a header row).
    pub fn from_csv(path: &Path, decay_exponent: f64) -> Result<Self> {
        let mut reader = csv::Reader::from_path(path)?;
        let mut xs = Vec::new();
        let mut ms = Vec::new();
        for rec in reader.records() {
            let rec = rec?;
            let parse = |i: usize| -> Result<f64> {
                rec.get(i)
                    .and_then(|s| s.trim().parse().ok())
                    .ok_or_else(|| {
                        Error::InvalidParameter(format!(
                            "bad value in column {} of {}",
                            i + 1,
                            path.display()
                        ))
                    })
            };
            xs.push(parse(0)?);
            ms.push(parse(1)?);
        }
        let mut out = Self::tabulated(xs, ms, decay_exponent)?;
        out.name = format!("tabulated:{}", path.display());
        Ok(out)
    }

    pub fn kind(&self) -> &MassKind {
        &self.kind
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn in_l1(&self) -> bool {
        self.in_l1
    }

    pub fn in_l2(&self) -> bool {
        self.in_l2
    }

    pub fn norms(&self) -> MassNorms {
        self.norms
    }

    pub fn sup_norm(&self) -> f64 {
        self.norms.sup
    }

    pub fn l1_norm(&self) -> Result<f64> {
        self.norms
            .l1
            .ok_or_else(|| Error::NotIntegrable(format!("{} is not in L1", self.name)))
    }

    pub fn l2_norm(&self) -> Option<f64> {
        self.norms.l2
    }

    /// Exponent `p` with `m(x) ~ |x|^{-p}`; infinite for faster decay.
    pub fn decay_exponent(&self) -> f64 {
        decay_exponent_of(&self.kind)
    }

    /// Symmetric about the origin.
    pub fn is_even(&self) -> bool {
        match &self.kind {
            MassKind::Tabulated { xs, .. } => {
                let lo = xs[0].abs().min(*xs.last().unwrap());
                (0..=64).all(|i| {
                    let x = lo * i as f64 / 64.0;
                    (self.eval(x) - self.eval(-x)).abs() <= 1e-12 * self.eval(x).abs()
                })
            }
            _ => true,
        }
    }

    /// Half-width of the default working domain.
    pub fn default_half_width(&self) -> f64 {
        if self.in_l1 {
            40.0
        } else {
            60.0
        }
    }

    /// Jump `m'(0+) - m'(0-)` of the derivative at the origin.
    pub fn derivative_jump_at_zero(&self) -> f64 {
        match self.kind {
            MassKind::InvLinear => -2.0,
            MassKind::Example2Rational => -12.0,
            _ => 0.0,
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match &self.kind {
            MassKind::InvLinear => 1.0 / (1.0 + x.abs()),
            MassKind::Example2Rational => {
                let ax = x.abs();
                let d = 1.0 + ax;
                (2.0 * ax * ax + 6.0 * ax + 3.0) / (d * d * d * d)
            }
            MassKind::Gaussian { a } => (-a * x * x).exp(),
            MassKind::CauchyLike => 1.0 / (1.0 + x * x),
            MassKind::Constant { c0 } => *c0,
            MassKind::Tabulated {
                xs,
                ms,
                decay_exponent,
            } => {
                let n = xs.len();
                if x <= xs[0] {
                    ms[0] * (xs[0] / x).abs().powf(*decay_exponent)
                } else if x >= xs[n - 1] {
                    ms[n - 1] * (xs[n - 1] / x).abs().powf(*decay_exponent)
                } else {
                    let j = xs.partition_point(|&v| v <= x).min(n - 1);
                    let (x0, x1) = (xs[j - 1], xs[j]);
                    let t = (x - x0) / (x1 - x0);
                    ms[j - 1] * (1.0 - t) + ms[j] * t
                }
            }
        }
    }

    /// `log m(x)`, finite wherever `m` is positive even if `m(x)` underflows.
    pub fn log_eval(&self, x: f64) -> f64 {
        match self.kind {
            MassKind::Gaussian { a } => -a * x * x,
            _ => self.eval(x).ln(),
        }
    }

    fn compute_sup(&self) -> f64 {
        match &self.kind {
            MassKind::Tabulated { ms, .. } => ms.iter().copied().fold(0.0, f64::max),
            _ => self.eval(0.0),
        }
    }

    /// Natural length scale beyond which `m` is in its tail regime.
    fn core(&self) -> f64 {
        match &self.kind {
            MassKind::Gaussian { a } => 1.0 / a.sqrt(),
            MassKind::Tabulated { xs, .. } => xs[0].abs().max(*xs.last().unwrap()),
            _ => 1.0,
        }
    }

    fn breaks(&self, end: f64, max_width: f64) -> Vec<f64> {
        let core = self.core();
        match &self.kind {
            MassKind::Tabulated { xs, .. } => {
                let mut b: Vec<f64> = std::iter::once(0.0)
                    .chain(xs.iter().copied().filter(|&x| x > 0.0 && x < end))
                    .collect();
                let last = *b.last().unwrap();
                if end > last {
                    b.pop();
                    b.extend(graded_breaks(last, end, core.min(max_width), max_width));
                }
                refine(b, max_width)
            }
            _ => graded_breaks(0.0, end, 0.125 * core.min(max_width), max_width),
        }
    }

    /// `∫ m^p` over the line, for `p·decay > 1`.
    fn integrate_power(&self, p: f64) -> f64 {
        let q = p * self.decay_exponent();
        let end = 1e7 * self.core();
        let side = |sign: f64| {
            let b = self.breaks(end, f64::INFINITY);
            let body = integrate_breaks(&mut |x| self.eval(sign * x).powf(p), &b);
            let tail = if q.is_finite() {
                self.eval(sign * end).powf(p) * end / (q - 1.0)
            } else {
                0.0
            };
            body + tail
        };
        side(1.0) + side(-1.0)
    }

    /// Quadrature of `∫_{-L}^{L} m` together with the neglected tail mass.
    pub fn truncated_integral(&self, half_width: f64) -> (f64, f64) {
        let side = |sign: f64| {
            let b = self.breaks(half_width, f64::INFINITY);
            integrate_breaks(&mut |x| self.eval(sign * x), &b)
        };
        let body = side(1.0) + side(-1.0);
        let p = self.decay_exponent();
        let tail = if p.is_infinite() {
            2.0 * self.eval(half_width) / (2.0 * half_width).max(1.0)
        } else if p > 1.0 {
            (self.eval(half_width) + self.eval(-half_width)) * half_width / (p - 1.0)
        } else {
            f64::INFINITY
        };
        (body, tail)
    }
}

fn refine(breaks: Vec<f64>, max_width: f64) -> Vec<f64> {
    if !max_width.is_finite() {
        return breaks;
    }
    let mut out = vec![breaks[0]];
    for w in breaks.windows(2) {
        let k = ((w[1] - w[0]) / max_width).ceil().max(1.0) as usize;
        for j in 1..=k {
            out.push(w[0] + (w[1] - w[0]) * j as f64 / k as f64);
        }
    }
    out
}

fn decay_exponent_of(kind: &MassKind) -> f64 {
    match kind {
        MassKind::InvLinear => 1.0,
        MassKind::Example2Rational | MassKind::CauchyLike => 2.0,
        MassKind::Gaussian { .. } => f64::INFINITY,
        MassKind::Tabulated { decay_exponent, .. } => *decay_exponent,
        MassKind::Constant { .. } => 0.0,
    }
}

/// Looks up a builtin by name. `gaussian` takes its coefficient either as
/// `param` or inline as `gaussian(a)`.
pub fn builtin_mass(name: &str, param: Option<f64>) -> Result<MassFunction> {
    let name = name.trim();
    if let Some(inner) = name
        .strip_prefix("gaussian(")
        .and_then(|s| s.strip_suffix(')'))
    {
        let a: f64 = inner
            .trim()
            .parse()
            .map_err(|_| Error::InvalidParameter(format!("bad gaussian coefficient '{inner}'")))?;
        return MassFunction::gaussian(a);
    }
    match name {
        "inv_linear" => Ok(MassFunction::inv_linear()),
        "example2_rational" => Ok(MassFunction::example2_rational()),
        "gaussian" => MassFunction::gaussian(param.unwrap_or(1.0)),
        "cauchy_like" => Ok(MassFunction::cauchy_like()),
        other => Err(Error::UnknownName(format!("unknown mass '{other}'"))),
    }
}

/// Samples positivity, decay to zero, eventual monotonicity and the
/// integrability of the tail on `[-half_width, half_width]`.
pub fn validate_conditions(m: &MassFunction, half_width: f64) -> ConditionReport {
    let n = 4001;
    let mut fail: Option<String> = None;
    let xs: Vec<f64> = (0..n)
        .map(|i| -half_width + 2.0 * half_width * i as f64 / (n - 1) as f64)
        .collect();
    for &x in &xs {
        let v = m.eval(x);
        let lv = m.log_eval(x);
        if !(v.is_finite() && v >= 0.0 && lv.is_finite() && lv > POSITIVITY_FLOOR.ln() * 1e3) {
            fail = Some(format!("positivity: m({x}) = {v}"));
            break;
        }
    }
    let core = m.core().min(0.5 * half_width);
    if fail.is_none() {
        // m must fall well below its maximum by the edge of the domain and
        // keep falling beyond it.
        let edge = m.eval(half_width).max(m.eval(-half_width));
        let far = m.eval(1e3 * half_width).max(m.eval(-1e3 * half_width));
        let sup = m.sup_norm();
        if !(edge < 0.1 * sup && (far < edge || far <= 1e-12 * sup)) {
            fail = Some("vanishing at infinity: m does not decay to 0 (not C0)".into());
        }
    }
    if fail.is_none() {
        for w in xs.windows(2) {
            let (a, b) = (w[0], w[1]);
            if a >= core && m.eval(b) > m.eval(a) * (1.0 + 1e-12) {
                fail = Some(format!("monotone decay: m increases on [{a}, {b}]"));
                break;
            }
            if b <= -core && m.eval(a) > m.eval(b) * (1.0 + 1e-12) {
                fail = Some(format!("monotone decay: m decreases on [{a}, {b}]"));
                break;
            }
        }
    }
    if fail.is_none() && !m.in_l2() {
        fail = Some(format!(
            "square integrability: tail decays like |x|^-{}",
            m.decay_exponent()
        ));
    }
    ConditionReport {
        passed: fail.is_none(),
        failing_predicate: fail,
        in_l1: m.in_l1(),
        in_l2: m.in_l2(),
        samples: n,
    }
}

/// `∫_0^∞ e^{-i z x} g(x) dx` for a smooth algebraically decaying `g`.
fn half_line_transform<G: Fn(f64) -> f64>(g: G, z: f64, breaks_for: impl Fn(f64, f64) -> Vec<f64>, p: f64) -> Complex64 {
    if z == 0.0 {
        let end = 1e7;
        let body = integrate_breaks(&mut |x| g(x), &breaks_for(end, f64::INFINITY));
        let tail = if p.is_finite() {
            g(end) * end / (p - 1.0)
        } else {
            0.0
        };
        return Complex64::new(body + tail, 0.0);
    }
    let az = z.abs();
    let end = (80.0f64).max(40.0 / az);
    let breaks = breaks_for(end, 0.5 * PI / az);
    let re = integrate_breaks(&mut |x| (z * x).cos() * g(x), &breaks);
    let im = -integrate_breaks(&mut |x| (z * x).sin() * g(x), &breaks);
    let mut out = Complex64::new(re, im);
    if p.is_finite() {
        // ∫_X^∞ e^{isx} g = -e^{isX} Σ (-1)^j g^{(j)}(X) / (is)^{j+1}, s = -z
        let h = 1e-2 * end;
        let d0 = g(end);
        let d1 = (g(end + h) - g(end - h)) / (2.0 * h);
        let d2 = (g(end + h) - 2.0 * d0 + g(end - h)) / (h * h);
        let is = Complex64::new(0.0, -z);
        let phase = Complex64::from_polar(1.0, -z * end);
        let series = d0 / is - d1 / (is * is) + d2 / (is * is * is);
        out -= phase * series;
    }
    out
}

/// The Fourier transform `m̂(z) = ∫ e^{-izx} m(x) dx`.
pub fn mass_fourier(m: &MassFunction, z: f64) -> Result<Complex64> {
    if !m.in_l1() {
        return Err(Error::NotIntegrable(format!(
            "{} is not in L1; its Fourier transform is not a function",
            m.name()
        )));
    }
    let p = m.decay_exponent();
    let breaks_for = |end: f64, w: f64| m.breaks(end, w);
    let right = half_line_transform(|x| m.eval(x), z, breaks_for, p);
    if m.is_even() {
        return Ok(Complex64::new(2.0 * right.re, 0.0));
    }
    let left = half_line_transform(|x| m.eval(-x), z, breaks_for, p);
    Ok(right + left.conj())
}
