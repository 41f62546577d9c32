//! Natural cubic spline on a uniform abscissa.

#[derive(Debug, Clone)]
pub struct UniformSpline {
    start: f64,
    step: f64,
    values: Vec<f64>,
    second: Vec<f64>,
}

impl UniformSpline {
    pub fn new(start: f64, step: f64, values: Vec<f64>) -> Self {
        let n = values.len();
        assert!(n >= 3, "spline needs at least three knots");
        // Tridiagonal system for the second derivatives, natural end conditions.
        let mut second = vec![0.0; n];
        let mut diag = vec![4.0; n - 2];
        let mut rhs: Vec<f64> = (1..n - 1)
            .map(|i| 6.0 * (values[i + 1] - 2.0 * values[i] + values[i - 1]) / (step * step))
            .collect();
        for i in 1..n - 2 {
            let w = 1.0 / diag[i - 1];
            diag[i] -= w;
            rhs[i] -= w * rhs[i - 1];
        }
        for i in (0..n - 2).rev() {
            let upper = if i + 1 < n - 2 { second[i + 2] } else { 0.0 };
            second[i + 1] = (rhs[i] - upper) / diag[i];
        }
        Self {
            start,
            step,
            values,
            second,
        }
    }

    pub fn end(&self) -> f64 {
        self.start + self.step * (self.values.len() - 1) as f64
    }

    pub fn eval(&self, u: f64) -> f64 {
        let n = self.values.len();
        let pos = ((u - self.start) / self.step).clamp(0.0, (n - 1) as f64);
        let i = (pos.floor() as usize).min(n - 2);
        let t = pos - i as f64;
        let a = 1.0 - t;
        let h2 = self.step * self.step / 6.0;
        a * self.values[i]
            + t * self.values[i + 1]
            + ((a * a * a - a) * self.second[i] + (t * t * t - t) * self.second[i + 1]) * h2
    }
}
