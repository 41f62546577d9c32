use std::sync::{Arc, OnceLock};

use levyspin::eigen::full_spectrum;
use levyspin::levy::PotentialDensity;
use levyspin::spectrum::total_variation;
use levyspin::{
    build_kernel_with, solve_spectrum, Grid, KernelOptions, LevyModel, MassFunction,
    SpectralSolution,
};
use proptest::prelude::*;

fn brownian() -> LevyModel {
    LevyModel::brownian(1.0).unwrap()
}

fn example1() -> &'static SpectralSolution {
    static CELL: OnceLock<SpectralSolution> = OnceLock::new();
    CELL.get_or_init(|| {
        let grid = Grid::uniform(60.0, 3001).unwrap();
        solve_spectrum(brownian(), &MassFunction::inv_linear(), 0.5, &grid, 40).unwrap()
    })
}

fn example2(n: usize) -> SpectralSolution {
    let grid = Grid::uniform(40.0, n).unwrap();
    solve_spectrum(brownian(), &MassFunction::example2_rational(), 0.5, &grid, 8).unwrap()
}

fn q1_exact(x: f64) -> f64 {
    (2.0f64 / 3.0).sqrt() * (1.0 + x.abs()) * (-x.abs()).exp()
}

#[test]
fn example1_ground_state_values() {
    let sol = example1();
    assert!((sol.mu()[0] - 1.0).abs() < 1e-4);
    assert!((sol.q_at(0, 0.0).unwrap() - 0.816_496_580_927_726).abs() < 1e-4);
    assert!((sol.q_at(0, 1.0).unwrap() - 0.600_750_921_870_064).abs() < 1e-4);
    let at1 = sol.survival_asymptote(1.0).unwrap();
    assert!((at1.gamma - 1.0).abs() < 1e-4);
    assert!((at1.k - 8.0 / 3.0 * (-1.0f64).exp()).abs() < 1e-3, "{}", at1.k);
    assert!((at1.k - at1.k_alt).abs() < 1e-8);
    let ell = sol.ell1_values();
    let c = sol.grid().center();
    assert!((ell[c] - 2.0 / 3.0).abs() < 1e-4);
    let i1 = sol.grid().node_index(1.0).unwrap();
    assert!((ell[i1] - 4.0 / 3.0 * (-2.0f64).exp()).abs() < 1e-4);
}

#[test]
fn example1_survival_series() {
    let sol = example1();
    let p = sol.survival_probability(0.0, 4.0, 40).unwrap();
    assert!((p.probability - 4.0 / 3.0 * (-4.0f64).exp()).abs() < 1e-4, "{p:?}");
    let p = sol.survival_probability(0.0, 1e-3, 40).unwrap();
    assert!((p.raw - 1.0).abs() <= p.truncation_bound + 1e-3, "{p:?}");
}

#[test]
fn example2_constants_are_resolution_stable() {
    let coarse = example2(1001);
    let fine = example2(2001);
    assert!((fine.mu()[0] - 2.0).abs() < 1e-3);
    assert!((fine.free_energy() + 2.0f64.ln()).abs() < 1e-3);
    let (kc, kf) = (
        coarse.survival_asymptote(0.0).unwrap().k,
        fine.survival_asymptote(0.0).unwrap().k,
    );
    // Second order convergence: the coarse error is about four times the fine one.
    assert!((kc - kf).abs() < 1e-3, "{kc} vs {kf}");
    // K(0) by a separate quadrature of ⟨m, q_1⟩.
    let m = MassFunction::example2_rational();
    let w = fine.operator().weights();
    let x = fine.grid().nodes();
    let overlap: f64 = (0..x.len()).map(|i| w[i] * m.eval(x[i]) * fine.q(0)[i]).sum();
    assert!((overlap * fine.q_at(0, 0.0).unwrap() - kf).abs() < 1e-10);
}

#[test]
fn trace_equals_mass_quadrature_and_spectrum_sum() {
    let pd = Arc::new(PotentialDensity::new(brownian(), 0.5).unwrap());
    let m = MassFunction::example2_rational();
    let grid = Grid::uniform(40.0, 401).unwrap();
    let op = build_kernel_with(pd.clone(), &m, &grid, KernelOptions { kink_correction: false }).unwrap();
    let quad: f64 = grid.nodes().iter().zip(grid.weights()).map(|(x, w)| w * m.eval(*x)).sum();
    let trace = op.matrix().trace();
    assert!((trace - pd.value_at_zero() * quad).abs() < 1e-12 * trace);
    let spectrum = full_spectrum(op.matrix());
    let sum: f64 = spectrum.iter().sum();
    let sum2: f64 = spectrum.iter().map(|m| m * m).sum();
    assert!((sum - trace).abs() < 1e-10 * trace);
    assert!((sum2 - op.matrix().frobenius_sq()).abs() < 1e-10 * sum2);
}

#[test]
fn gibbs_pair_density_integrates_to_one() {
    let sol = example1();
    let state = sol.gibbs_state_density(2);
    // Tensor trapezoid on the solution nodes; the kinks of v and m sit on
    // grid lines, so the rule stays second order.
    let h = 0.04;
    let n = 751;
    let mut total = 0.0;
    for i in 0..n {
        let y1 = -15.0 + h * i as f64;
        let w1 = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
        for j in 0..n {
            let y2 = -15.0 + h * j as f64;
            let w2 = if j == 0 || j == n - 1 { 0.5 } else { 1.0 };
            total += w1 * w2 * state.eval(&[y1, y2]).unwrap();
        }
    }
    total *= h * h;
    assert!((total - 1.0).abs() < 1e-3, "{total}");
}

#[test]
fn correlations_of_constants_vanish() {
    let sol = example1();
    let one = vec![1.0; sol.grid().len()];
    for k in [1, 2, 5, 20] {
        assert!(sol.correlation(&one, &one, k).value.abs() < 1e-10);
    }
}

/// `C_3(f, g)` from the product form of `L_4` summed over the nodes.
fn chain_correlation(sol: &SpectralSolution, f: &[f64], g: &[f64], k: usize) -> f64 {
    let state = sol.gibbs_state_density(k + 1);
    let n = sol.grid().len();
    let wm: Vec<f64> = sol.operator().sqrt_wm().iter().map(|d| d * d).collect();
    let q1 = state.endpoint();
    let lambda = sol.eigenvalues()[0];
    let run = |f: &[f64], g: &[f64]| -> f64 {
        let mut v: Vec<f64> = (0..n).map(|i| wm[i] * q1[i] * f[i]).collect();
        for _ in 0..k {
            v = (0..n)
                .map(|j| lambda * wm[j] * (0..n).map(|i| v[i] * state.chain_kernel(i, j)).sum::<f64>())
                .collect();
        }
        (0..n).map(|j| v[j] * q1[j] * g[j]).sum()
    };
    let one = vec![1.0; n];
    let z = run(&one, &one);
    let ef = run(f, &one) / z;
    let eg = run(&one, g) / z;
    run(f, g) / z - ef * eg
}

#[test]
fn correlation_prefactor_limit() {
    let grid = Grid::uniform(30.0, 601).unwrap();
    let sol = solve_spectrum(brownian(), &MassFunction::inv_linear(), 0.5, &grid, 30).unwrap();
    let f = sol.tabulate(f64::tanh);
    let c = sol.correlation_rate();
    let direct = chain_correlation(&sol, &f, &f, 3);
    let spectral = sol.correlation(&f, &f, 3).value;
    assert!((direct - spectral).abs() < 1e-6 * direct.abs(), "{direct} vs {spectral}");
    let scaled: Vec<f64> = (18..=21)
        .map(|k| (k as f64 * c).exp() * sol.correlation(&f, &f, k).value)
        .collect();
    for w in scaled.windows(2) {
        assert!((w[1] / w[0] - 1.0).abs() < 1e-2, "{scaled:?}");
    }
    let b = sol.correlation(&f, &f, 1).prefactor;
    assert!((scaled[3] / b - 1.0).abs() < 2e-2, "{} vs {b}", scaled[3]);
}

#[test]
fn groundstate_transition_rows_and_stationarity() {
    let sol = example2(1001);
    let t = sol.groundstate_transition().unwrap();
    assert!(t.raw_row_drift() < 1e-3, "{}", t.raw_row_drift());
    let pi = t.stationary();
    assert!(total_variation(&t.push_forward(pi), pi) < 1e-4);
}

#[test]
fn structural_properties() {
    for sol in [example1(), &example2(1001)] {
        assert_eq!(sol.operator().matrix().asymmetry(), 0.0);
        assert!(sol.mu().iter().all(|&m| m > 0.0));
        assert!(sol.mu().windows(2).all(|w| w[0] >= w[1]));
        assert!(sol.q(0).iter().all(|&q| q > 0.0));
        let (off, diag) = sol.gram_error();
        assert!(off < 1e-6 && diag < 1e-6);
        let lhs = sol.free_energy().exp() * (sol.correlation_rate().exp() - 1.0);
        assert!((lhs - sol.gap()).abs() < 1e-12 * sol.gap());
        assert!(sol.gamma() >= 0.5 / sol.operator().mass_values().iter().cloned().fold(0.0, f64::max));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn nystrom_extension_tracks_closed_form(x in -10.0f64..10.0) {
        let sol = example1();
        let q = sol.q_at(0, x).unwrap();
        prop_assert!((q - q1_exact(x)).abs() < 1e-2 * q1_exact(x));
        prop_assert!((q - sol.q_at(0, -x).unwrap()).abs() < 1e-9);
    }

    #[test]
    fn survival_is_monotone_in_time(x in -5.0f64..5.0, t in 0.1f64..6.0) {
        let sol = example1();
        let a = sol.survival_probability(x, t, 40).unwrap().probability;
        let b = sol.survival_probability(x, t + 0.5, 40).unwrap().probability;
        prop_assert!(b <= a + 1e-9);
        prop_assert!((0.0..=1.0).contains(&a));
    }
}
