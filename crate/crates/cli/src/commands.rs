use std::fs;
use std::path::Path;

use levyspin::io::{
    write_corr_mc, write_json, write_small_r, write_solution_csv, write_spin_hist, write_survival,
    write_zeta_moments, write_zn_table, SolutionDocument,
};
use levyspin::levy::v0_asymptotic;
use levyspin::montecarlo::{
    decay_fit, gibbs_mcmc, mcmc_correlations, simulate_zeta, GibbsConfig, PathConfig, SurvivalEstimate,
};
use levyspin::partition::{partition_report, small_r_study, zeta_moments};
use levyspin::spectrum::total_variation;
use levyspin::{PotentialDensity, SpectralSolution};
use log::info;
use serde_json::json;

use crate::cache::Cache;
use crate::config::{ConfigError, RunConfig};
use crate::output::Staging;
use crate::verify;

#[derive(Debug, thiserror::Error)]
pub enum CmdError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Library(#[from] levyspin::Error),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("verification failed: {}", .0.join(", "))]
    Verification(Vec<String>),
}

impl CmdError {
    pub fn exit_code(&self) -> i32 {
        use levyspin::Error as E;
        match self {
            CmdError::Config(_) => 2,
            CmdError::Library(
                E::ConditionViolated(_)
                | E::InvalidParameter(_)
                | E::UnknownName(_)
                | E::NotIntegrable(_)
                | E::UnsupportedModel(_)
                | E::OutOfGrid { .. },
            ) => 2,
            CmdError::Library(_) | CmdError::Io(_) => 3,
            CmdError::Verification(_) => 4,
        }
    }
}

pub type CmdResult = Result<(), CmdError>;

/// Everything a subcommand needs besides its own options.
pub struct Context<'a> {
    pub cfg: &'a RunConfig,
    pub out: &'a Path,
    pub cache: Cache,
}

impl Context<'_> {
    fn stage(&self, command: &str) -> Result<Staging, CmdError> {
        Ok(Staging::new(self.out, command, &self.cfg.hash())?)
    }

    fn solve(&self, modes: usize) -> levyspin::Result<SpectralSolution> {
        let grid = self.cfg.grid()?;
        self.cache.solve(self.cfg, &grid, modes)
    }
}

fn finish(st: Staging, command: &str, summary: serde_json::Value) -> CmdResult {
    write_json(&summary, &st.path(&format!("summary_{command}.json")))?;
    let manifest = st.commit()?;
    info!("{command}: wrote {} files", manifest.files.len());
    Ok(())
}

fn model_json(cfg: &RunConfig) -> serde_json::Value {
    json!({
        "model": cfg.model,
        "mass": cfg.mass.name(),
        "kill_rate": cfg.kill_rate,
        "config_hash": cfg.hash(),
    })
}

pub fn potential(ctx: &Context) -> CmdResult {
    let cfg = ctx.cfg;
    let report = cfg.model.check_condition2();
    let pd = PotentialDensity::new(cfg.model, cfg.kill_rate)?;
    let grid = cfg.grid()?;
    let st = ctx.stage("potential")?;

    let mut w = csv_writer(&st.path("potential.csv"))?;
    w.write_record(["x", "v"]).map_err(levyspin::Error::from)?;
    for &x in grid.nodes() {
        w.write_record([format!("{x:.12e}"), format!("{:.12e}", pd.eval(x))])
            .map_err(levyspin::Error::from)?;
    }
    w.flush()?;

    let mut w = csv_writer(&st.path("v0_small_r.csv"))?;
    w.write_record(["r", "v0", "asymptotic", "ratio"]).map_err(levyspin::Error::from)?;
    let mut rows = Vec::new();
    for &r in &cfg.potential_rates {
        let v0 = PotentialDensity::new(cfg.model, r)?.value_at_zero();
        let asym = v0_asymptotic(&cfg.model, r)?;
        w.write_record([r, v0, asym, v0 / asym].map(|v| format!("{v:.12e}")))
            .map_err(levyspin::Error::from)?;
        rows.push(json!({"r": r, "v0": v0, "asymptotic": asym}));
    }
    w.flush()?;

    let v0 = pd.value_at_zero();
    println!(
        "v0={v0:.6}, length_scale={:.6}, condition2={} (tail exponent {:.3})",
        pd.length_scale(),
        if report.holds { "holds" } else { "violated" },
        report.tail_exponent
    );
    finish(
        st,
        "potential",
        json!({
            "run": model_json(cfg),
            "v0": v0,
            "length_scale": pd.length_scale(),
            "condition2": {"holds": report.holds, "tail_exponent": report.tail_exponent},
            "small_r": rows,
        }),
    )
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>, CmdError> {
    Ok(csv::Writer::from_path(path).map_err(levyspin::Error::from)?)
}

pub fn spectrum(ctx: &Context) -> CmdResult {
    let sol = ctx.solve(ctx.cfg.modes)?;
    let st = ctx.stage("spectrum")?;
    let doc = SolutionDocument::new(&sol, 4)?;
    write_json(&doc, &st.path("spectrum.json"))?;
    write_solution_csv(&sol, &st.path("solution.csv"))?;
    println!(
        "gamma={:.6}, E={:.6}, gap={:.6}, C={:.6}",
        sol.gamma(),
        sol.free_energy(),
        sol.gap(),
        sol.correlation_rate()
    );
    finish(
        st,
        "spectrum",
        json!({
            "run": model_json(ctx.cfg),
            "gamma": sol.gamma(),
            "free_energy": sol.free_energy(),
            "gap": sol.gap(),
            "correlation_rate": sol.correlation_rate(),
            "k_at_zero": doc.k_at_zero,
            "modes": sol.modes(),
            "max_residual": sol.max_residual(),
        }),
    )
}

pub fn partition(ctx: &Context, orders: Option<&[u32]>) -> CmdResult {
    let orders = orders.unwrap_or(&ctx.cfg.orders);
    let sol = ctx.solve(ctx.cfg.modes)?;
    let report = partition_report(&sol, &ctx.cfg.mass, orders)?;
    let st = ctx.stage("partition")?;
    write_zn_table(&report, &st.path("zn_table.csv"))?;
    if let Some(last) = report.rows.iter().max_by_key(|r| r.n) {
        println!(
            "E={:.6}, n={}: -log Z_n/n={:.6}, -log Zf_n/n={:.6}, Z_n <= v0 Zf_n: {}",
            report.free_energy,
            last.n,
            last.neg_log_zn_over_n,
            last.neg_log_zn_free_over_n,
            report.invariants_hold()
        );
    }
    finish(
        st,
        "partition",
        json!({"run": model_json(ctx.cfg), "report": report, "invariants_hold": report.invariants_hold()}),
    )
}

pub fn moments(ctx: &Context) -> CmdResult {
    let cfg = ctx.cfg;
    let sol = ctx.solve(2)?;
    let zm = zeta_moments(sol.operator(), &cfg.mass, cfg.moments_x, cfg.moments_n_max)?;
    let st = ctx.stage("moments")?;
    let mut w = csv_writer(&st.path("zeta_moments.csv"))?;
    w.write_record(["n", "moment", "scaled", "root"]).map_err(levyspin::Error::from)?;
    let roots = zm.root_sequence();
    for i in 0..zm.moments.len() {
        w.write_record([(i + 1) as f64, zm.moments[i], zm.scaled[i], roots[i]].map(|v| format!("{v:.12e}")))
            .map_err(levyspin::Error::from)?;
    }
    w.flush()?;
    let mu1 = sol.mu()[0];
    println!(
        "E[zeta]={:.6} (direct {:.6}), root_{}={:.6}, mu1={mu1:.6}",
        zm.moments[0],
        zm.first_direct,
        roots.len(),
        roots[roots.len() - 1]
    );
    finish(st, "moments", json!({"run": model_json(cfg), "moments": zm, "mu1": mu1}))
}

fn t_grid(t_max: f64) -> Vec<f64> {
    let n = (t_max / 0.25).round() as usize;
    (0..=n).map(|i| i as f64 * 0.25).collect()
}

pub fn simulate(ctx: &Context) -> CmdResult {
    let cfg = ctx.cfg;
    let mc = &cfg.mc;
    let paths = PathConfig::new(mc.paths, mc.dt, mc.seed);
    let sample = simulate_zeta(cfg.model, &cfg.mass, cfg.kill_rate, mc.x, &paths)?;
    sample.require_uncapped()?;
    let est = SurvivalEstimate::from_sample(&sample, &t_grid(mc.t_max), mc.window)?;
    let sol = ctx.solve(cfg.modes)?;
    let n_max = cfg.moments_n_max.min(4);
    let mc_moments = sample.moments(n_max as u32);
    let spectral = zeta_moments(sol.operator(), &cfg.mass, mc.x, n_max)?;

    let st = ctx.stage("simulate")?;
    write_survival(&est, &st.path("survival.csv"))?;
    write_zeta_moments(&mc_moments, &spectral.moments, &st.path("zeta_moments_mc.csv"))?;
    println!(
        "gamma_hat={:.4} +- {:.4} (spectral {:.4}), E[zeta]={:.4} +- {:.4} (kernel {:.4})",
        est.gamma_hat,
        est.gamma_stderr,
        sol.gamma(),
        mc_moments[0].mean,
        mc_moments[0].stderr,
        spectral.moments[0]
    );
    finish(
        st,
        "simulate",
        json!({
            "run": model_json(cfg),
            "paths": mc.paths,
            "dt": mc.dt,
            "seed": mc.seed,
            "gamma_hat": est.gamma_hat,
            "gamma_stderr": est.gamma_stderr,
            "gamma_spectral": sol.gamma(),
            "window": [mc.window.0, mc.window.1],
            "trivial_bound_holds": sample.within_trivial_bound(cfg.mass.sup_norm()),
            "monotone": est.is_monotone(),
        }),
    )
}

pub(crate) fn gibbs_config(cfg: &RunConfig) -> GibbsConfig {
    let m = &cfg.mcmc;
    GibbsConfig {
        sweeps: m.sweeps,
        burn_in: m.burn_in,
        chains: m.chains,
        seed: cfg.mc.seed,
        observables: vec![m.observable],
        distances: m.distances.clone(),
        ..GibbsConfig::default()
    }
}

/// Binned `ℓ_1` from the spectral solution, on the sampler's bins.
pub(crate) fn ell1_binned(sol: &SpectralSolution, bins: &levyspin::montecarlo::Binning) -> Vec<f64> {
    let ell1 = sol.ell1_values();
    let grid = sol.grid();
    bins.from_density(|x| grid.interpolate(&ell1, x).unwrap_or(0.0), 1.0)
}

pub fn gibbs(ctx: &Context) -> CmdResult {
    let cfg = ctx.cfg;
    let pd = PotentialDensity::new(cfg.model, cfg.kill_rate)?;
    let gc = gibbs_config(cfg);
    let state = gibbs_mcmc(&pd, &cfg.mass, cfg.mcmc.ring_n, &gc)?;
    let obs = cfg.mcmc.observable;
    let corr = mcmc_correlations(&state, &obs, &obs, &cfg.mcmc.distances)?;
    // k = 1 still carries the higher modes; the rate is read off k >= 2.
    let tail: Vec<_> = corr.iter().filter(|c| c.k >= 2).cloned().collect();
    let fit = decay_fit(&tail).ok();
    let sol = ctx.solve(cfg.modes)?;
    let tv = total_variation(&state.site_frequencies(), &ell1_binned(&sol, &state.binning()));

    let st = ctx.stage("gibbs")?;
    write_spin_hist(&state, &st.path("spin_hist.csv"))?;
    write_corr_mc(&corr, &st.path("corr_mc.csv"))?;
    match fit {
        Some(f) => println!(
            "TV(site, ell1)={tv:.4}, rate={:.4} +- {:.4} vs C={:.4}",
            f.rate,
            f.stderr,
            sol.correlation_rate()
        ),
        None => println!("TV(site, ell1)={tv:.4}, rate=n/a vs C={:.4}", sol.correlation_rate()),
    }
    finish(
        st,
        "gibbs",
        json!({
            "run": model_json(cfg),
            "ring_n": cfg.mcmc.ring_n,
            "sweeps": cfg.mcmc.sweeps,
            "chains": cfg.mcmc.chains,
            "seed": cfg.mc.seed,
            "observable": obs.to_string(),
            "acceptance": state.acceptance,
            "tv_site_vs_ell1": tv,
            "decay_fit": fit,
            "correlation_rate": sol.correlation_rate(),
        }),
    )
}

pub fn smallr(ctx: &Context, rates: Option<&[f64]>) -> CmdResult {
    let cfg = ctx.cfg;
    let rates = rates.unwrap_or(&cfg.smallr_rates);
    let study = small_r_study(cfg.model, &cfg.mass, rates, cfg.smallr_nodes)?;
    let st = ctx.stage("smallr")?;
    write_small_r(&study, &st.path("small_r.csv"))?;
    for row in &study.rows {
        println!("r={:.0e}: gamma={:.6e}, prediction={:.6e}, ratio={:.4}", row.r, row.gamma, row.prediction, row.ratio);
    }
    println!(
        "exponent={:.4} (leading order {:.4}), monotone ratios: {}",
        study.fitted_exponent,
        study.expected_exponent,
        study.monotone_approach()
    );
    finish(
        st,
        "smallr",
        json!({"run": model_json(cfg), "study": study, "monotone": study.monotone_approach()}),
    )
}

pub fn verify(ctx: &Context, tamper: bool) -> CmdResult {
    let cfg = ctx.cfg;
    let verdicts = verify::battery(ctx, tamper)?;
    let st = ctx.stage("verify")?;
    write_json(&verdicts, &st.path("verify.json"))?;
    for v in &verdicts {
        println!("{}", serde_json::to_string(v).map_err(levyspin::Error::from)?);
    }
    let failed: Vec<String> = verdicts
        .iter()
        .filter(|v| v.status == verify::Status::Fail)
        .map(|v| v.check.clone())
        .collect();
    finish(
        st,
        "verify",
        json!({"run": model_json(cfg), "checks": verdicts.len(), "failed": failed, "tampered": tamper}),
    )?;
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CmdError::Verification(failed))
    }
}
