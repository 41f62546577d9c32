//! Nyström discretization of `(Kq)(x) = ∫ v^r(x-y) m(y) q(y) dy` as the
//! symmetric matrix `S_ij = √(w_i m_i) v^r(x_i - x_j) √(w_j m_j)`.

use std::sync::Arc;

use serde::Serialize;

use crate::eigen::SymMatrix;
use crate::error::Result;
use crate::grid::Grid;
use crate::levy::{LevyModel, PotentialDensity};
use crate::mass::MassFunction;
use crate::par;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelOptions {
    /// Correct the trapezoid rule for the kinks of `v^r` on the diagonal and
    /// of `m` at the origin (second order end corrections). This moves the
    /// leading eigenvalues from `O(h)` to `O(h²)` accuracy.
    pub kink_correction: bool,
}

impl Default for KernelOptions {
    fn default() -> Self {
        Self {
            kink_correction: true,
        }
    }
}

/// Where the matrix came from.
#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    pub model: LevyModel,
    pub mass: String,
    pub kill_rate: f64,
    pub half_width: f64,
    pub nodes: usize,
    pub kink_correction: bool,
}

#[derive(Debug, Clone)]
pub struct KernelOperator {
    grid: Grid,
    matrix: SymMatrix,
    /// `m(x_i)`.
    mass_values: Vec<f64>,
    /// Effective quadrature weights (trapezoid plus corrections).
    weights: Vec<f64>,
    /// `√(w_i m_i)`.
    sqrt_wm: Vec<f64>,
    /// `S_ii = w_i m_i (v^r(0) + diag_shift_i)`.
    diag_shift: Vec<f64>,
    potential: Arc<PotentialDensity>,
    provenance: Provenance,
}

pub fn build_kernel(
    model: LevyModel,
    mass: &MassFunction,
    kill_rate: f64,
    grid: &Grid,
) -> Result<KernelOperator> {
    let pd = Arc::new(PotentialDensity::new(model, kill_rate)?);
    build_kernel_with(pd, mass, grid, KernelOptions::default())
}

pub fn build_kernel_with(
    pd: Arc<PotentialDensity>,
    mass: &MassFunction,
    grid: &Grid,
    opts: KernelOptions,
) -> Result<KernelOperator> {
    let n = grid.len();
    let x = grid.nodes();
    let mass_values: Vec<f64> = x.iter().map(|&xi| mass.eval(xi)).collect();
    let raw_w = grid.weights();
    let mut weights = raw_w.to_vec();
    let c = grid.center();
    if opts.kink_correction && mass_values[c] > 0.0 {
        let w0 = raw_w[c];
        weights[c] += w0 * w0 * mass.derivative_jump_at_zero() / (12.0 * mass_values[c]);
    }
    let sqrt_wm: Vec<f64> = weights
        .iter()
        .zip(&mass_values)
        .map(|(w, m)| (w * m).sqrt())
        .collect();
    let slope = if opts.kink_correction {
        pd.kink_slope().unwrap_or(0.0)
    } else {
        0.0
    };
    let diag_shift: Vec<f64> = (0..n)
        .map(|i| slope * raw_w[i] * raw_w[i] / (6.0 * weights[i]))
        .collect();

    let v0 = pd.value_at_zero();
    let matrix = if grid.is_uniform() {
        // v^r(x_i - x_j) only depends on |i - j|.
        let h = grid.step();
        let band: Vec<f64> = par::map_range(n, |d| if d == 0 { v0 } else { pd.eval(d as f64 * h) });
        SymMatrix::from_fn(n, |i, j| {
            let v = band[i.abs_diff(j)];
            let v = if i == j { v + diag_shift[i] } else { v };
            sqrt_wm[i.min(j)] * v * sqrt_wm[i.max(j)]
        })
    } else {
        let mut s = SymMatrix::from_fn(n, |i, j| {
            let v = if i == j {
                v0 + diag_shift[i]
            } else {
                pd.eval(x[i] - x[j])
            };
            sqrt_wm[i] * v * sqrt_wm[j]
        });
        s.symmetrize();
        s
    };
    let provenance = Provenance {
        model: *pd.model(),
        mass: mass.name().to_string(),
        kill_rate: pd.kill_rate(),
        half_width: grid.half_width(),
        nodes: n,
        kink_correction: opts.kink_correction,
    };
    Ok(KernelOperator {
        grid: grid.clone(),
        matrix,
        mass_values,
        weights,
        sqrt_wm,
        diag_shift,
        potential: pd,
        provenance,
    })
}

impl KernelOperator {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn matrix(&self) -> &SymMatrix {
        &self.matrix
    }

    pub fn mass_values(&self) -> &[f64] {
        &self.mass_values
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn sqrt_wm(&self) -> &[f64] {
        &self.sqrt_wm
    }

    pub fn potential(&self) -> &PotentialDensity {
        &self.potential
    }

    pub fn potential_arc(&self) -> Arc<PotentialDensity> {
        Arc::clone(&self.potential)
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn dim(&self) -> usize {
        self.grid.len()
    }

    /// The kernel value used between nodes `i` and `j`, including the
    /// diagonal correction.
    pub fn kernel_entry(&self, i: usize, j: usize) -> f64 {
        let x = self.grid.nodes();
        if i == j {
            self.potential.value_at_zero() + self.diag_shift[i]
        } else {
            self.potential.eval(x[i] - x[j])
        }
    }

    /// `Σ_j v^r(x - x_j) w_j m_j g_j`, the Nyström extension of `K g` to an
    /// arbitrary point; at a node it uses the corrected diagonal.
    pub fn apply_at(&self, x: f64, g: &[f64]) -> f64 {
        let nodes = self.grid.nodes();
        let on_node = self.grid.node_index(x);
        (0..nodes.len())
            .map(|j| {
                let v = if on_node == Some(j) {
                    self.potential.value_at_zero() + self.diag_shift[j]
                } else {
                    self.potential.eval(x - nodes[j])
                };
                v * self.weights[j] * self.mass_values[j] * g[j]
            })
            .sum()
    }

    /// `(K g)(x_i) = Σ_j v^r(x_i - x_j) w_j m_j g_j` at every node.
    pub fn apply(&self, g: &[f64]) -> Vec<f64> {
        let d = &self.sqrt_wm;
        let dg: Vec<f64> = g.iter().zip(d).map(|(a, b)| a * b).collect();
        let y = self.matrix.matvec(&dg);
        let x = self.grid.nodes();
        y.iter()
            .zip(d)
            .enumerate()
            .map(|(i, (&yi, &di))| {
                if di > 1e-150 {
                    yi / di
                } else {
                    self.apply_at(x[i], g)
                }
            })
            .collect()
    }

    /// Adds `delta` to one diagonal entry. Exists so that verification
    /// batteries can be shown to catch a corrupted operator.
    #[doc(hidden)]
    pub fn tamper(&mut self, index: usize, delta: f64) {
        let v = self.matrix.get(index, index);
        self.matrix.set(index, index, v + delta);
    }
}
