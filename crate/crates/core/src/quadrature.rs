//! Composite Gauss–Legendre quadrature on graded panels.

use std::sync::OnceLock;

/// Gauss–Legendre rule on [-1, 1].
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1);
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let half = n.div_ceil(2);
        for i in 0..half {
            // Chebyshev-like initial guess, then Newton on P_n.
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Self { nodes, weights }
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    /// Integral of `f` over [a, b].
    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut f: F, a: f64, b: f64) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (b + a);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&t, &w)| w * f(mid + half * t))
            .sum::<f64>()
            * half
    }

    /// Physical nodes and weights for [a, b].
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (b + a);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(&t, &w)| (mid + half * t, w * half))
    }
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Shared 16-point rule.
pub fn gl16() -> &'static GaussLegendre {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(16))
}

/// Breakpoints on [start, end] that start at width `first` next to `start`,
/// double in width moving away, and never exceed `max_width`.
pub fn graded_breaks(start: f64, end: f64, first: f64, max_width: f64) -> Vec<f64> {
    let dir = if end >= start { 1.0 } else { -1.0 };
    let length = (end - start).abs();
    let mut out = vec![start];
    let mut pos = 0.0;
    let mut width = first.min(max_width).max(f64::MIN_POSITIVE);
    while pos < length {
        let next = (pos + width).min(length);
        // Absorb a sliver at the end into the last panel.
        let next = if length - next < 0.25 * width { length } else { next };
        out.push(start + dir * next);
        pos = next;
        width = (2.0 * width).min(max_width);
    }
    out
}

/// Sum of panel integrals over consecutive breakpoints.
pub fn integrate_breaks<F: FnMut(f64) -> f64>(f: &mut F, breaks: &[f64]) -> f64 {
    let rule = gl16();
    breaks
        .windows(2)
        .map(|w| rule.integrate(&mut *f, w[0], w[1]))
        .sum()
}

/// Integral of a non-oscillatory `f` over [-cutoff, cutoff], with panels graded
/// towards every point in `singular` (kinks or cusps) at resolution `scale`.
pub fn integrate_symmetric_window<F: FnMut(f64) -> f64>(
    mut f: F,
    singular: &[f64],
    scale: f64,
    cutoff: f64,
) -> f64 {
    let mut pts: Vec<f64> = singular
        .iter()
        .copied()
        .filter(|p| p.abs() < cutoff)
        .collect();
    pts.push(-cutoff);
    pts.push(cutoff);
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    pts.dedup_by(|a, b| (*a - *b).abs() < 1e-14 * (1.0 + b.abs()));
    let first = scale * 2f64.powi(-12);
    let max_width = scale.max(1e-300) * 4.0;
    let mut total = 0.0;
    for w in pts.windows(2) {
        let (a, b) = (w[0], w[1]);
        let mid = 0.5 * (a + b);
        let a_sing = a > -cutoff;
        let b_sing = b < cutoff;
        let left = if a_sing {
            graded_breaks(a, mid, first, max_width.max(1e-3 * (b - a)))
        } else {
            graded_breaks(mid, a, first.max(scale), max_width.max(1e-3 * (b - a)))
                .into_iter()
                .rev()
                .collect()
        };
        let right: Vec<f64> = if b_sing {
            graded_breaks(b, mid, first, max_width.max(1e-3 * (b - a)))
                .into_iter()
                .rev()
                .collect()
        } else {
            graded_breaks(mid, b, first.max(scale), max_width.max(1e-3 * (b - a)))
        };
        total += integrate_breaks(&mut f, &left);
        total += integrate_breaks(&mut f, &right);
    }
    total
}

/// Integral of `f` over [0, ∞) for `f` with algebraic tail `~ C y^{-p}`,
/// graded from the origin. Returns `(value, tail_estimate)` where the tail
/// beyond `cutoff` is extrapolated from the local power law.
pub fn integrate_half_line<F: FnMut(f64) -> f64>(
    mut f: F,
    scale: f64,
    cutoff: f64,
    tail_exponent: Option<f64>,
) -> (f64, f64) {
    let breaks = graded_breaks(0.0, cutoff, scale * 2f64.powi(-16), f64::INFINITY);
    let body = integrate_breaks(&mut f, &breaks);
    let tail = match tail_exponent {
        Some(p) if p > 1.0 => f(cutoff) * cutoff / (p - 1.0),
        _ => 0.0,
    };
    (body + tail, tail.abs())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_is_exact_for_polynomials() {
        let rule = GaussLegendre::new(8);
        // degree 15 is integrated exactly by 8 nodes
        let val = rule.integrate(|x| x.powi(14) + 3.0 * x.powi(3), -1.0, 1.0);
        assert!((val - 2.0 / 15.0).abs() < 1e-14);
        let sum_w: f64 = rule.weights.iter().sum();
        assert!((sum_w - 2.0).abs() < 1e-14);
    }

    #[test]
    fn graded_breaks_cover_interval() {
        let b = graded_breaks(0.0, 10.0, 1e-3, 1.0);
        assert_eq!(b[0], 0.0);
        assert_eq!(*b.last().unwrap(), 10.0);
        assert!(b.windows(2).all(|w| w[1] > w[0] && w[1] - w[0] <= 1.0 + 1e-12));
        let back = graded_breaks(5.0, -5.0, 0.1, 2.0);
        assert_eq!(*back.last().unwrap(), -5.0);
    }

    #[test]
    fn kinked_integrand() {
        // ∫_{-20}^{20} e^{-|x-1|} dx = 2 - e^{-21} - e^{-19}
        let v = integrate_symmetric_window(|x: f64| (-(x - 1.0).abs()).exp(), &[1.0], 1.0, 20.0);
        let exact = 2.0 - (-21f64).exp() - (-19f64).exp();
        assert!((v - exact).abs() < 1e-12, "{v} vs {exact}");
    }

    #[test]
    fn half_line_power_tail() {
        // ∫_0^∞ dy / (1 + y^2) = π/2
        let (v, tail) = integrate_half_line(|y| 1.0 / (1.0 + y * y), 1.0, 1e4, Some(2.0));
        assert!((v - std::f64::consts::FRAC_PI_2).abs() < 1e-8);
        assert!(tail < 2e-4);
    }
}
