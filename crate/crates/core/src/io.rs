//! JSON and CSV output.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::error::Result;
use crate::kernel::Provenance;
use crate::montecarlo::{McCorrelation, MomentEstimate, SpinChainState, SurvivalEstimate};
use crate::partition::{PartitionReport, SmallRStudy};
use crate::spectrum::SpectralSolution;

/// Everything needed to plot or compare a solved spectrum.
#[derive(Debug, Clone, Serialize)]
pub struct SolutionDocument {
    pub provenance: Provenance,
    pub eigenvalues: Vec<f64>,
    pub mu: Vec<f64>,
    pub gamma: f64,
    pub free_energy: f64,
    pub gap: f64,
    pub correlation_rate: f64,
    pub k_at_zero: f64,
    pub mass_overlaps: Vec<f64>,
    pub lanczos_iterations: usize,
    pub max_residual: f64,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    /// `q_n` at the nodes for the first few modes.
    pub q: Vec<Vec<f64>>,
}

impl SolutionDocument {
    pub fn new(sol: &SpectralSolution, tabulated_modes: usize) -> Result<Self> {
        let op = sol.operator();
        Ok(Self {
            provenance: op.provenance().clone(),
            eigenvalues: sol.eigenvalues().to_vec(),
            mu: sol.mu().to_vec(),
            gamma: sol.gamma(),
            free_energy: sol.free_energy(),
            gap: sol.gap(),
            correlation_rate: sol.correlation_rate(),
            k_at_zero: sol.survival_asymptote(0.0)?.k,
            mass_overlaps: sol.mass_overlaps().to_vec(),
            lanczos_iterations: sol.lanczos_iterations(),
            max_residual: sol.max_residual(),
            nodes: sol.grid().nodes().to_vec(),
            weights: op.weights().to_vec(),
            q: (0..tabulated_modes.min(sol.modes()))
                .map(|n| sol.q(n).to_vec())
                .collect(),
        })
    }
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut out, value)?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

fn write_rows<I, R>(path: &Path, header: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = f64>,
{
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(row.into_iter().map(|v| format!("{v:.12e}")))?;
    }
    w.flush()?;
    Ok(())
}

/// `x, q1, ell1, K` at the nodes.
pub fn write_solution_csv(sol: &SpectralSolution, path: &Path) -> Result<()> {
    let x = sol.grid().nodes();
    let q1 = sol.q(0);
    let ell1 = sol.ell1_values();
    let k = sol.k_values();
    write_rows(
        path,
        &["x", "q1", "ell1", "K"],
        (0..x.len()).map(|i| [x[i], q1[i], ell1[i], k[i]]),
    )
}

pub fn write_zn_table(report: &PartitionReport, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["n", "Z_n", "Zf_n", "neg_log_Z_over_n", "neg_log_Zf_over_n"])?;
    for row in &report.rows {
        w.write_record([
            row.n.to_string(),
            format!("{:.12e}", row.zn()),
            format!("{:.12e}", row.zn_free()),
            format!("{:.12e}", row.neg_log_zn_over_n),
            format!("{:.12e}", row.neg_log_zn_free_over_n),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_small_r(study: &SmallRStudy, path: &Path) -> Result<()> {
    write_rows(
        path,
        &["r", "gamma", "prediction", "ratio"],
        study.rows.iter().map(|r| [r.r, r.gamma, r.prediction, r.ratio]),
    )
}

pub fn write_survival(est: &SurvivalEstimate, path: &Path) -> Result<()> {
    write_rows(
        path,
        &["t", "p_hat", "lo", "hi"],
        (0..est.t.len()).map(|i| [est.t[i], est.probability[i], est.lower[i], est.upper[i]]),
    )
}

/// Monte Carlo moments next to the kernel-chain values.
pub fn write_zeta_moments(mc: &[MomentEstimate], spectral: &[f64], path: &Path) -> Result<()> {
    write_rows(
        path,
        &["n", "mean", "stderr", "spectral"],
        mc.iter().enumerate().map(|(i, m)| {
            [
                m.order as f64,
                m.mean,
                m.stderr,
                spectral.get(i).copied().unwrap_or(f64::NAN),
            ]
        }),
    )
}

pub fn write_spin_hist(state: &SpinChainState, path: &Path) -> Result<()> {
    write_rows(
        path,
        &["bin", "density"],
        state.site_density().into_iter().map(|(c, d)| [c, d]),
    )
}

pub fn write_corr_mc(corr: &[McCorrelation], path: &Path) -> Result<()> {
    write_rows(
        path,
        &["k", "Ck", "err"],
        corr.iter().map(|c| [c.k as f64, c.value, c.stderr]),
    )
}
