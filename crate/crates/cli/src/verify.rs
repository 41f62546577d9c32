//! Cross-check battery behind `levyspin verify`.

use std::sync::Arc;

use levyspin::montecarlo::{gibbs_mcmc, simulate_zeta, PathConfig, SurvivalEstimate};
use levyspin::partition::{eigen_bounds, first_moment_direct, small_r_study, z2_direct, zhat2_dual, TraceSpectrum};
use levyspin::spectrum::total_variation;
use levyspin::{build_kernel_with, KernelOperator, KernelOptions, MassFunction, PotentialDensity, SpectralSolution};
use log::info;
use serde::Serialize;

use crate::commands::{ell1_binned, gibbs_config, CmdError, Context};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    Skipped,
}

#[derive(Debug, Clone, Serialize)]
pub struct Verdict {
    pub check: String,
    pub status: Status,
    pub value: f64,
    pub reference: f64,
    /// Relative tolerance, or the number of standard errors for Monte Carlo checks.
    pub tolerance: f64,
    pub detail: String,
}

fn relative(check: &str, value: f64, reference: f64, tolerance: f64) -> Verdict {
    let err = (value - reference).abs() / reference.abs();
    Verdict {
        check: check.into(),
        status: if err < tolerance { Status::Pass } else { Status::Fail },
        value,
        reference,
        tolerance,
        detail: format!("relative error {err:.3e}"),
    }
}

fn within_sigma(check: &str, value: f64, stderr: f64, reference: f64, sigmas: f64) -> Verdict {
    let z = (value - reference).abs() / stderr;
    Verdict {
        check: check.into(),
        status: if z < sigmas { Status::Pass } else { Status::Fail },
        value,
        reference,
        tolerance: sigmas,
        detail: format!("{z:.2} standard errors (se {stderr:.3e})"),
    }
}

fn skipped(check: &str, why: &str) -> Verdict {
    Verdict {
        check: check.into(),
        status: Status::Skipped,
        value: f64::NAN,
        reference: f64::NAN,
        tolerance: f64::NAN,
        detail: why.into(),
    }
}

/// Test hook: adds a tenth of the trace to the centre diagonal entry.
pub fn tamper(op: &mut KernelOperator) {
    let trace = op.matrix().trace();
    let c = op.grid().center();
    op.tamper(c, 0.1 * trace);
}

pub fn battery(ctx: &Context, tamper_kernel: bool) -> Result<Vec<Verdict>, CmdError> {
    let cfg = ctx.cfg;
    let mass = &cfg.mass;
    let grid = cfg.grid()?;
    let pd = Arc::new(PotentialDensity::new(cfg.model, cfg.kill_rate)?);
    let v0 = pd.value_at_zero();
    let half_width = grid.half_width();
    let mut out = Vec::new();

    // Σμ = v(0)∫m holds for the plain trapezoid operator. The kink
    // correction sharpens the leading eigenvalues, which is what Σμ² sees,
    // but moves the diagonal by O(h).
    let plain = KernelOptions {
        kink_correction: false,
    };
    let mut trapezoid = build_kernel_with(pd.clone(), mass, &grid, plain)?;
    let mut corrected = build_kernel_with(pd.clone(), mass, &grid, KernelOptions::default())?;
    if tamper_kernel {
        tamper(&mut trapezoid);
        tamper(&mut corrected);
    }
    info!("verify: full spectra of the {}-node operators", grid.len());
    let (body, _) = mass.truncated_integral(half_width);
    let plain_spectrum = TraceSpectrum::new(&trapezoid);
    out.push(relative("trace_identity", plain_spectrum.power_sum(1), v0 * body, 1e-2));
    let spectrum = TraceSpectrum::new(&corrected);
    let z2_trace = spectrum.power_sum(2);
    out.push(relative(
        "trace_square_vs_frobenius",
        z2_trace,
        corrected.matrix().frobenius_sq(),
        1e-8,
    ));
    let z2d = z2_direct(&pd, mass, half_width);
    out.push(relative("z2_trace_vs_direct", z2_trace, z2d, 5e-3));
    if mass.in_l1() {
        let wide = (10.0 * half_width).max(400.0);
        let z2_wide = z2_direct(&pd, mass, wide);
        out.push(relative("z2_direct_vs_dual", z2_wide, zhat2_dual(&pd, mass)?, 5e-3));
    } else {
        out.push(skipped("z2_direct_vs_dual", "mass is not integrable; the dual form needs its Fourier transform"));
    }

    // A corrupted operator must neither read nor fill the cache.
    let corrected = Arc::new(corrected);
    let sol = if tamper_kernel {
        SpectralSolution::from_operator(corrected, cfg.modes)?
    } else {
        ctx.cache.solve_operator(corrected, cfg.modes)?
    };

    if mass.in_l1() {
        let b = eigen_bounds(mass, v0, z2d, sol.gamma())?;
        out.push(Verdict {
            check: "eigenvalue_bounds".into(),
            status: if b.pass { Status::Pass } else { Status::Fail },
            value: sol.gamma(),
            reference: b.lower,
            tolerance: 0.0,
            detail: format!("{:.6} <= {:.6} <= {:.6}", b.lower, sol.gamma(), b.upper),
        });
    } else {
        out.push(skipped("eigenvalue_bounds", "mass is not integrable; both bounds are trivial"));
    }

    info!("verify: {} lifetimes", cfg.mc.paths);
    out.extend(survival_checks(ctx, &sol)?);

    info!("verify: ring of {} spins, {} sweeps", cfg.mcmc.ring_n, cfg.mcmc.sweeps);
    let state = gibbs_mcmc(&pd, mass, cfg.mcmc.ring_n, &gibbs_config(cfg))?;
    let tv = total_variation(&state.site_frequencies(), &ell1_binned(&sol, &state.binning()));
    out.push(Verdict {
        check: "gibbs_site_tv".into(),
        status: if tv < 0.05 { Status::Pass } else { Status::Fail },
        value: tv,
        reference: 0.0,
        tolerance: 0.05,
        detail: "total variation between the ring's site histogram and ell_1".into(),
    });

    out.push(small_r_check(ctx)?);
    Ok(out)
}

fn survival_checks(ctx: &Context, sol: &SpectralSolution) -> Result<Vec<Verdict>, CmdError> {
    let cfg = ctx.cfg;
    let mc = &cfg.mc;
    let sample = simulate_zeta(
        cfg.model,
        &cfg.mass,
        cfg.kill_rate,
        mc.x,
        &PathConfig::new(mc.paths, mc.dt, mc.seed),
    )?;
    sample.require_uncapped()?;
    let t = 2.0;
    let est = SurvivalEstimate::from_sample(&sample, &[0.0, 1.0, t], (0.0, t))?;
    let (p, se) = est.at(t);
    let exact = sol.survival_probability(mc.x, t, sol.modes())?.probability;
    let mean = sample.moments(1)[0];
    let pd: &PotentialDensity = sol.operator().potential();
    let direct = first_moment_direct(pd, &cfg.mass, mc.x);
    let sup = cfg.mass.sup_norm();
    let bound = sample.within_trivial_bound(sup) && est.within_trivial_bound(cfg.kill_rate, sup);
    Ok(vec![
        within_sigma("survival_mc_vs_spectral", p, se, exact, 3.0),
        within_sigma("zeta_mean_mc_vs_direct", mean.mean, mean.stderr, direct, 3.0),
        Verdict {
            check: "trivial_bound".into(),
            status: if bound { Status::Pass } else { Status::Fail },
            value: sup,
            reference: cfg.kill_rate,
            tolerance: 0.0,
            detail: "zeta <= e_r sup m on every path".into(),
        },
    ])
}

/// Runs on the configured mass when it is integrable and on
/// `example2_rational` otherwise.
fn small_r_check(ctx: &Context) -> Result<Verdict, CmdError> {
    let cfg = ctx.cfg;
    let (mass, note) = if cfg.mass.in_l1() {
        (cfg.mass.clone(), String::new())
    } else {
        (
            MassFunction::example2_rational(),
            format!("{} is not integrable, used example2_rational; ", cfg.mass.name()),
        )
    };
    if cfg.model.small_y_power_law().is_none() {
        return Ok(skipped("small_r_ratios", "model has no power law for psi near 0"));
    }
    info!("verify: small-r study at {:?}", cfg.smallr_rates);
    let study = small_r_study(cfg.model, &mass, &cfg.smallr_rates, cfg.smallr_nodes)?;
    let ratios: Vec<String> = study.rows.iter().map(|r| format!("{:.4}", r.ratio)).collect();
    let last = study.rows.last().map(|r| r.ratio).unwrap_or(f64::NAN);
    Ok(Verdict {
        check: "small_r_ratios".into(),
        status: if study.monotone_approach() { Status::Pass } else { Status::Fail },
        value: last,
        reference: 1.0,
        tolerance: 0.0,
        detail: format!("{note}ratios {} should approach 1 monotonically", ratios.join(", ")),
    })
}
