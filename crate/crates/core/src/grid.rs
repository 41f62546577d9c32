//! Symmetric quadrature grids on `[-L, L]`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GridMapping {
    /// Equispaced nodes with trapezoid weights.
    Uniform,
    /// `x = a sinh(t)` with `t` equispaced; fine near the origin, coarse far out.
    Sinh { scale: f64 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Grid {
    half_width: f64,
    mapping: GridMapping,
    /// Step in the mapped variable.
    step: f64,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl Grid {
    pub fn uniform(half_width: f64, n: usize) -> Result<Self> {
        check(half_width, n)?;
        let h = 2.0 * half_width / (n - 1) as f64;
        let mid = n / 2;
        let nodes: Vec<f64> = (0..n)
            .map(|i| (i as f64 - mid as f64) * h)
            .collect();
        let mut weights = vec![h; n];
        weights[0] = 0.5 * h;
        weights[n - 1] = 0.5 * h;
        Ok(Self {
            half_width,
            mapping: GridMapping::Uniform,
            step: h,
            nodes,
            weights,
        })
    }

    /// Trapezoid rule in `t` for `x = scale · sinh(t)`.
    pub fn sinh(half_width: f64, n: usize, scale: f64) -> Result<Self> {
        check(half_width, n)?;
        if !(scale > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "sinh grid scale must be positive, got {scale}"
            )));
        }
        let t_max = (half_width / scale).asinh();
        let h = 2.0 * t_max / (n - 1) as f64;
        let mid = n / 2;
        let mut nodes = Vec::with_capacity(n);
        let mut weights = Vec::with_capacity(n);
        for i in 0..n {
            let t = (i as f64 - mid as f64) * h;
            nodes.push(scale * t.sinh());
            let end = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
            weights.push(end * h * scale * t.cosh());
        }
        nodes[0] = -half_width;
        nodes[n - 1] = half_width;
        Ok(Self {
            half_width,
            mapping: GridMapping::Sinh { scale },
            step: h,
            nodes,
            weights,
        })
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn mapping(&self) -> GridMapping {
        self.mapping
    }

    pub fn is_uniform(&self) -> bool {
        self.mapping == GridMapping::Uniform
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn center(&self) -> usize {
        self.nodes.len() / 2
    }

    pub fn contains(&self, x: f64) -> bool {
        x.abs() <= self.half_width * (1.0 + 1e-12)
    }

    /// Index of the node equal to `x` up to round-off, if any.
    pub fn node_index(&self, x: f64) -> Option<usize> {
        let (j, _) = self.bracket(x).ok()?;
        let tol = 1e-9 * (1.0 + x.abs());
        [j, j + 1]
            .into_iter()
            .find(|&i| i < self.len() && (self.nodes[i] - x).abs() <= tol)
    }

    /// `(j, t)` with `x = (1-t) x_j + t x_{j+1}`.
    pub fn bracket(&self, x: f64) -> Result<(usize, f64)> {
        if !self.contains(x) {
            return Err(Error::OutOfGrid {
                x,
                half_width: self.half_width,
            });
        }
        let n = self.len();
        let j = self
            .nodes
            .partition_point(|&v| v <= x)
            .clamp(1, n - 1)
            - 1;
        let t = ((x - self.nodes[j]) / (self.nodes[j + 1] - self.nodes[j])).clamp(0.0, 1.0);
        Ok((j, t))
    }

    /// Linear interpolation of nodal `values`.
    pub fn interpolate(&self, values: &[f64], x: f64) -> Result<f64> {
        let (j, t) = self.bracket(x)?;
        Ok(values[j] * (1.0 - t) + values[j + 1] * t)
    }

    /// Same mapping, `width_factor` times wider, with `n` nodes.
    pub fn refined(&self, width_factor: f64, n: usize) -> Result<Self> {
        match self.mapping {
            GridMapping::Uniform => Self::uniform(self.half_width * width_factor, n),
            GridMapping::Sinh { scale } => Self::sinh(self.half_width * width_factor, n, scale),
        }
    }
}

fn check(half_width: f64, n: usize) -> Result<()> {
    if !(half_width > 0.0 && half_width.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "grid half-width must be positive, got {half_width}"
        )));
    }
    if n < 3 || n.is_multiple_of(2) {
        return Err(Error::InvalidParameter(format!(
            "grid node count must be odd and at least 3, got {n}"
        )));
    }
    Ok(())
}
