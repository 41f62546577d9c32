//! Acceptance run: criteria 1 to 10, one PASS/FAIL line each.
//!
//! Built with `harness = false` so the lines are always printed and the
//! process exits non-zero when any criterion fails.

use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use levyspin::eigen::full_spectrum;
use levyspin::kernel::{build_kernel_with, KernelOptions};
use levyspin::levy::{LevyModel, PotentialDensity};
use levyspin::montecarlo::{
    decay_fit, gibbs_mcmc, mcmc_correlations, sample_groundstate_chain, simulate_zeta, Binning,
    GibbsConfig, PathConfig, SurvivalEstimate,
};
use levyspin::partition::{
    eigen_bounds, log_zn_free, small_r_study, z2_direct, zhat2_dual, TraceSpectrum,
};
use levyspin::spectrum::{solve_spectrum, total_variation, SpectralSolution};
use levyspin::{Grid, MassFunction, Observable};

struct Check {
    name: String,
    pass: bool,
    detail: String,
}

fn check(name: &str, pass: bool, detail: String) -> Check {
    Check {
        name: name.to_string(),
        pass,
        detail,
    }
}

fn example1() -> (LevyModel, MassFunction, f64) {
    (LevyModel::brownian(1.0).unwrap(), MassFunction::inv_linear(), 0.5)
}

fn example2() -> (LevyModel, MassFunction, f64) {
    (LevyModel::brownian(1.0).unwrap(), MassFunction::example2_rational(), 0.5)
}

fn solve(ex: &(LevyModel, MassFunction, f64), grid: &Grid, k: usize) -> SpectralSolution {
    solve_spectrum(ex.0, &ex.1, ex.2, grid, k).unwrap()
}

// Closed forms for Example 1.
fn q1_exact(x: f64) -> f64 {
    (2.0f64 / 3.0).sqrt() * (1.0 + x.abs()) * (-x.abs()).exp()
}

fn ell1_exact(x: f64) -> f64 {
    2.0 / 3.0 * (1.0 + x.abs()) * (-2.0 * x.abs()).exp()
}

/// `E1(1)`, the exponential integral at 1.
const E1_AT_1: f64 = 0.219_383_934_395_520_3;

fn criterion1() -> Vec<Check> {
    let t = Instant::now();
    let grid = Grid::uniform(60.0, 3001).unwrap();
    let sol = solve(&example1(), &grid, 6);
    let elapsed = t.elapsed().as_secs_f64();
    let l1 = sol.gamma();
    let e = sol.free_energy();
    let mut q_err: f64 = 0.0;
    for (i, &x) in grid.nodes().iter().enumerate() {
        if x.abs() <= 10.0 {
            q_err = q_err.max((sol.q(0)[i] - q1_exact(x)).abs() / q1_exact(x));
        }
    }
    let k0 = sol.survival_asymptote(0.0).unwrap().k;
    vec![
        check("lambda1 = 1", (l1 - 1.0).abs() < 1e-3, format!("{l1:.7}")),
        check("E = 0", e.abs() < 1e-3, format!("{e:.2e}")),
        check("q1 pointwise on |x|<=10", q_err < 1e-2, format!("max rel err {q_err:.2e}")),
        check("K(0) = 4/3", (k0 - 4.0 / 3.0).abs() < 1e-2, format!("{k0:.6}")),
        check("runtime under a minute", elapsed < 60.0, format!("{elapsed:.1}s")),
    ]
}

fn criterion2() -> Vec<Check> {
    let grid = Grid::uniform(40.0, 2001).unwrap();
    let sol = solve(&example2(), &grid, 6);
    let l1 = sol.gamma();
    let e = sol.free_energy();
    let target = -(2.0f64).ln();
    vec![
        check("lambda1 = 1/2", (l1 - 0.5).abs() < 1e-3, format!("{l1:.7}")),
        check("E = -log 2", (e - target).abs() < 2e-3, format!("{e:.7}")),
    ]
}

fn criterion3() -> Vec<Check> {
    let (model, mass, r) = example2();
    let pd = Arc::new(PotentialDensity::new(model, r).unwrap());
    // Wide window so the 1/x² tail of m is captured to well under 1%.
    let half_width = 400.0;
    let grid = Grid::sinh(half_width, 1201, 2.0).unwrap();
    let op = build_kernel_with(
        pd.clone(),
        &mass,
        &grid,
        KernelOptions {
            kink_correction: false,
        },
    )
    .unwrap();
    let mu = full_spectrum(op.matrix());
    let sum1: f64 = mu.iter().sum();
    let sum2: f64 = mu.iter().map(|m| m * m).sum();
    let norm1 = 16.0 / 3.0;
    let v0 = pd.value_at_zero();
    let target1 = v0 * norm1;
    let direct = z2_direct(&pd, &mass, half_width);
    let dual = zhat2_dual(&pd, &mass).unwrap();
    let rel = |a: f64, b: f64| (a - b).abs() / b.abs();
    vec![
        check(
            "sum mu = v(0) |m|_1",
            rel(sum1, target1) < 1e-2,
            format!("{sum1:.6} vs {target1:.6}"),
        ),
        check(
            "sum mu^2 = z2_direct",
            rel(sum2, direct) < 5e-3,
            format!("{sum2:.6} vs {direct:.6}"),
        ),
        check(
            "sum mu^2 = zhat2_dual",
            rel(sum2, dual) < 5e-3,
            format!("{sum2:.6} vs {dual:.6}"),
        ),
        check(
            "z2_direct = zhat2_dual",
            rel(direct, dual) < 5e-3,
            format!("{direct:.6} vs {dual:.6}"),
        ),
    ]
}

fn criterion4() -> Vec<Check> {
    let masses = [
        MassFunction::example2_rational(),
        MassFunction::gaussian(1.0).unwrap(),
        MassFunction::cauchy_like(),
    ];
    let models = [
        LevyModel::brownian(1.0).unwrap(),
        LevyModel::stable(1.5, 1.0).unwrap(),
    ];
    let mut out = Vec::new();
    for mass in &masses {
        assert!(mass.in_l1());
        for model in &models {
            for r in [0.25, 0.5, 1.0] {
                let pd = PotentialDensity::new(*model, r).unwrap();
                let half_width = 40.0;
                let grid = Grid::uniform(half_width, 1001).unwrap();
                let sol = solve_spectrum(*model, mass, r, &grid, 4).unwrap();
                let z2 = z2_direct(&pd, mass, mass.default_half_width().max(half_width));
                let b = eigen_bounds(mass, pd.value_at_zero(), z2, sol.gamma()).unwrap();
                out.push(check(
                    &format!("{} / {} / r={r}", mass.name(), model_name(model)),
                    b.pass,
                    format!("{:.4} <= {:.4} <= {:.4}", b.lower, b.lambda1, b.upper),
                ));
            }
        }
    }
    out
}

fn model_name(model: &LevyModel) -> String {
    match model {
        LevyModel::Brownian { .. } => "brownian".into(),
        LevyModel::SymmetricStable { alpha, .. } => format!("stable({alpha})"),
        _ => "other".into(),
    }
}

fn criterion5() -> Vec<Check> {
    let mut out = Vec::new();
    for (label, ex) in [("example1", example1()), ("example2", example2())] {
        let grid = Grid::uniform(40.0, 1201).unwrap();
        let sol = solve(&ex, &grid, 4);
        let e = sol.free_energy();
        let op = sol.operator();
        let spec = TraceSpectrum::new(op);
        let v0 = op.potential().value_at_zero();
        let n = 64u32;
        let per = -spec.log_power_sum(n) / n as f64;
        let free = -log_zn_free(op, n).unwrap() / n as f64;
        out.push(check(
            &format!("{label} periodic n=64"),
            (per - e).abs() < 1e-2,
            format!("|{per:.6} - {e:.6}| = {:.2e}", (per - e).abs()),
        ));
        out.push(check(
            &format!("{label} free n=64"),
            (free - e).abs() < 1e-2,
            format!("|{free:.6} - {e:.6}| = {:.2e}", (free - e).abs()),
        ));
        let mut worst = f64::NEG_INFINITY;
        for n in 2..=64u32 {
            let gap = spec.log_power_sum(n) - (v0.ln() + log_zn_free(op, n).unwrap());
            worst = worst.max(gap);
        }
        out.push(check(
            &format!("{label} Z_n <= v(0) Zf_n, n=2..64"),
            worst <= 1e-12,
            format!("max log(Z_n / v(0) Zf_n) = {worst:.3e}"),
        ));
    }
    out
}

fn criterion6() -> Vec<Check> {
    let mass = MassFunction::example2_rational();
    let norm1 = 16.0 / 3.0;
    let brownian = LevyModel::brownian(1.0).unwrap();
    let study = small_r_study(brownian, &mass, &[1e-2, 1e-3, 1e-4], 2001).unwrap();
    let ratios: Vec<f64> = study
        .rows
        .iter()
        .map(|row| row.gamma * norm1 / (2.0 * row.r).sqrt())
        .collect();
    let last = *ratios.last().unwrap();
    let monotone = ratios.windows(2).all(|w| (w[1] - 1.0).abs() < (w[0] - 1.0).abs());
    let stable = LevyModel::stable(1.5, 1.0).unwrap();
    let st = small_r_study(stable, &mass, &[1e-2, 1e-3, 1e-4], 2001).unwrap();
    let expo = st.fitted_exponent;
    vec![
        check(
            "brownian ratio at r=1e-4",
            (0.9..=1.1).contains(&last),
            format!("{last:.4}"),
        ),
        check("brownian monotone approach", monotone, format!("{ratios:.4?}")),
        check(
            "stable(1.5) exponent = 1/3",
            (expo - 1.0 / 3.0).abs() <= 0.05,
            format!("{expo:.4}"),
        ),
    ]
}

fn criterion7() -> Vec<Check> {
    let (model, mass, r) = example1();
    let cfg = PathConfig::new(200_000, 1e-2, 20_240_601);
    let sample = simulate_zeta(model, &mass, r, 0.0, &cfg).unwrap();
    let t_grid: Vec<f64> = (0..=24).map(|i| i as f64 * 0.25).collect();
    let est = SurvivalEstimate::from_sample(&sample, &t_grid, (2.0, 6.0)).unwrap();
    let (p4, se) = est.at(4.0);
    let target = 4.0 / 3.0 * (-4.0f64).exp();
    let z = (p4 - target) / se;
    let g = est.gamma_hat;
    let mean = sample.moments(1)[0].mean;
    let quad = 2.0 * std::f64::consts::E * E1_AT_1;
    vec![
        check(
            "survival at t=4 within 3 sigma",
            z.abs() < 3.0,
            format!("{p4:.5} vs {target:.5}, z = {z:.2}"),
        ),
        check("gamma hat over [2,6]", (g - 1.0).abs() < 0.05, format!("{g:.4}")),
        check(
            "E[zeta] vs quadrature",
            (mean - quad).abs() / quad < 0.02,
            format!("{mean:.5} vs {quad:.5}"),
        ),
    ]
}

fn criterion8() -> Vec<Check> {
    let (model, mass, r) = example1();
    let pd = PotentialDensity::new(model, r).unwrap();
    let cfg = GibbsConfig {
        sweeps: 1_000_000,
        seed: 8,
        ..GibbsConfig::default()
    };
    let state = gibbs_mcmc(&pd, &mass, 64, &cfg).unwrap();
    let bins = state.binning();
    let reference = bins.from_density(ell1_exact, 1.0);
    let tv = total_variation(&state.site_frequencies(), &reference);
    let ks: Vec<usize> = (2..=8).collect();
    let corr = mcmc_correlations(&state, &Observable::BUMP, &Observable::BUMP, &ks).unwrap();
    let fit = decay_fit(&corr).unwrap();
    let grid = Grid::uniform(60.0, 3001).unwrap();
    let c = solve(&example1(), &grid, 4).correlation_rate();
    vec![
        check("site density vs ell_1", tv < 0.05, format!("TV = {tv:.4}")),
        check(
            "decay rate vs log(l2/l1)",
            (fit.rate - c).abs() / c < 0.15,
            format!("{:.4} +- {:.4} vs {c:.4}", fit.rate, fit.stderr),
        ),
    ]
}

fn criterion9() -> Vec<Check> {
    let grid = Grid::uniform(30.0, 751).unwrap();
    let sol = solve(&example1(), &grid, 4);
    let samples = sample_groundstate_chain(&sol, 1, 100_000, 9).unwrap();
    let bins = Binning::symmetric(4.0, 0.5);
    let empirical = samples.binned_joint(0, 1, &bins);
    let w = bins.count + 1;
    let x = grid.nodes();
    let weights = sol.operator().weights();
    let state = sol.gibbs_state_density(2);
    let mut reference = vec![0.0; w * w];
    for i in 0..x.len() {
        let bi = bins.index(x[i]);
        for j in 0..x.len() {
            let bj = bins.index(x[j]);
            reference[bi * w + bj] += weights[i] * weights[j] * state.eval_nodes(&[i, j]);
        }
    }
    let total: f64 = reference.iter().sum();
    reference.iter_mut().for_each(|p| *p /= total);
    let tv = total_variation(&empirical, &reference);
    let kernel = sol.groundstate_transition().unwrap();
    let pi = kernel.stationary();
    let drift = total_variation(&kernel.push_forward(pi), pi);
    vec![
        check("joint (Y0,Y1) vs L_2", tv < 0.05, format!("TV = {tv:.4}, mass {total:.6}")),
        check("ell_1 stationary", drift < 1e-4, format!("TV = {drift:.2e}")),
    ]
}

fn criterion10() -> Vec<Check> {
    let mut out = Vec::new();
    let cases = [
        ("example1", example1(), 60.0, 3001usize),
        ("example2", example2(), 40.0, 2001usize),
    ];
    for (label, ex, half_width, n) in cases {
        let grid = Grid::uniform(half_width, n).unwrap();
        let sol = solve(&ex, &grid, 6);
        let asym = sol.operator().matrix().asymmetry();
        out.push(check(&format!("{label} kernel symmetry"), asym == 0.0, format!("{asym:.1e}")));
        let min_mu = sol.mu().iter().cloned().fold(f64::INFINITY, f64::min);
        out.push(check(
            &format!("{label} eigenvalue positivity"),
            min_mu > 0.0,
            format!("min retained mu {min_mu:.3e}"),
        ));
        let split = (sol.mu()[0] - sol.mu()[1]) / sol.mu()[0];
        out.push(check(
            &format!("{label} simple top eigenvalue"),
            split > 1e-3,
            format!("relative split {split:.4}"),
        ));
        let min_q = sol.q(0).iter().cloned().fold(f64::INFINITY, f64::min);
        out.push(check(&format!("{label} q1 positivity"), min_q > 0.0, format!("min q1 {min_q:.3e}")));
        let (off, diag) = sol.gram_error();
        out.push(check(
            &format!("{label} Gram"),
            off < 1e-6 && diag < 1e-6,
            format!("off {off:.1e}, diag {diag:.1e}"),
        ));
        let e = sol.free_energy();
        let c = sol.correlation_rate();
        let gap = sol.gap();
        let lhs = e.exp() * (c.exp() - 1.0);
        out.push(check(
            &format!("{label} gap = e^E(e^C - 1)"),
            (lhs - gap).abs() <= 1e-12 * gap,
            format!("{lhs:.12} vs {gap:.12}"),
        ));
        let fine = grid.refined(1.25, 2 * n - 1).unwrap();
        let sol_fine = solve(&ex, &fine, 2);
        let drift = (sol_fine.gamma() - sol.gamma()).abs() / sol.gamma();
        out.push(check(
            &format!("{label} Richardson lambda1"),
            drift < 1e-4,
            format!("relative drift {drift:.2e}"),
        ));
    }
    for (model, r) in [
        (LevyModel::brownian(1.0).unwrap(), 0.5),
        (LevyModel::brownian(0.5).unwrap(), 2.0),
        (LevyModel::stable(1.5, 1.0).unwrap(), 1.0),
    ] {
        let pd = PotentialDensity::new(model, r).unwrap();
        let half_width = 2000.0 * pd.length_scale();
        let integral = pd.l1_check(half_width) + pd.tail_mass_bound(half_width);
        out.push(check(
            &format!("integral of v = 1/r, {} r={r}", model_name(&model)),
            (integral * r - 1.0).abs() < 1e-4,
            format!("{:.8}", integral * r),
        ));
    }
    out
}

fn main() -> ExitCode {
    let criteria: [(u32, &str, fn() -> Vec<Check>); 10] = [
        (1, "example-1 spectrum", criterion1),
        (2, "example-2 spectrum", criterion2),
        (3, "trace identities", criterion3),
        (4, "eigenvalue bound suite", criterion4),
        (5, "free-energy convergence", criterion5),
        (6, "small-r scaling", criterion6),
        (7, "monte carlo vs spectral", criterion7),
        (8, "spin-system cross-check", criterion8),
        (9, "ground-state chain", criterion9),
        (10, "property suites", criterion10),
    ];
    let only: Option<u32> = std::env::var("ACCEPTANCE_ONLY").ok().and_then(|s| s.parse().ok());
    let mut failed = Vec::new();
    for (id, title, run) in criteria {
        if only.is_some_and(|o| o != id) {
            continue;
        }
        let t = Instant::now();
        let checks = run();
        let pass = checks.iter().all(|c| c.pass);
        println!(
            "criterion {id:>2} {}: {title} ({:.1}s)",
            if pass { "PASS" } else { "FAIL" },
            t.elapsed().as_secs_f64()
        );
        for c in &checks {
            println!("    [{}] {}: {}", if c.pass { "ok" } else { "xx" }, c.name, c.detail);
        }
        if !pass {
            failed.push(id);
        }
    }
    if failed.is_empty() {
        println!("acceptance: all criteria pass");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: failing criteria {failed:?}");
        ExitCode::FAILURE
    }
}
