use levyspin::levy::PotentialDensity;
use levyspin::montecarlo::{
    estimate_survival, gibbs_mcmc, mcmc_correlations, sample_groundstate_chain, simulate_zeta,
    simulate_zeta_coupled, Binning, GibbsConfig, PathConfig, SurvivalEstimate,
};
use levyspin::spectrum::total_variation;
use levyspin::{solve_spectrum, Error, Grid, LevyModel, MassFunction, Observable};

fn brownian() -> LevyModel {
    LevyModel::brownian(1.0).unwrap()
}

fn t_grid() -> Vec<f64> {
    (0..=24).map(|i| i as f64 * 0.25).collect()
}

#[test]
fn survival_basics_and_trivial_bound() {
    let mass = MassFunction::inv_linear();
    let cfg = PathConfig::new(20_000, 1e-2, 11);
    let sample = simulate_zeta(brownian(), &mass, 0.5, 0.0, &cfg).unwrap();
    sample.require_uncapped().unwrap();
    assert!(sample.within_trivial_bound(mass.sup_norm()));
    let t: Vec<f64> = (0..=12).map(|i| i as f64 * 0.25).collect();
    let est = SurvivalEstimate::from_sample(&sample, &t, (1.0, 3.0)).unwrap();
    assert_eq!(est.at(0.0).0, 1.0);
    assert!(est.is_monotone());
    assert!(est.within_trivial_bound(0.5, mass.sup_norm()));
    assert!(est.probability.iter().all(|p| (0.0..=1.0).contains(p)));
    for i in 0..est.t.len() {
        assert!(est.lower[i] <= est.probability[i] && est.probability[i] <= est.upper[i]);
    }
}

#[test]
fn identical_seeds_reproduce() {
    let mass = MassFunction::example2_rational();
    let cfg = PathConfig::new(5000, 1e-2, 5);
    let a = simulate_zeta(brownian(), &mass, 0.5, 0.3, &cfg).unwrap();
    let b = simulate_zeta(brownian(), &mass, 0.5, 0.3, &cfg).unwrap();
    assert_eq!(a.zeta, b.zeta);
    let c = simulate_zeta(brownian(), &mass, 0.5, 0.3, &PathConfig::new(5000, 1e-2, 6)).unwrap();
    assert_ne!(a.zeta, c.zeta);
}

#[test]
fn survival_at_two_matches_spectral_series() {
    let grid = Grid::uniform(40.0, 1001).unwrap();
    let mass = MassFunction::inv_linear();
    let sol = solve_spectrum(brownian(), &mass, 0.5, &grid, 40).unwrap();
    let exact = sol.survival_probability(0.0, 2.0, 40).unwrap().probability;
    let cfg = PathConfig::new(200_000, 1e-2, 21);
    let est = estimate_survival(brownian(), &mass, 0.5, 0.0, &t_grid(), (2.0, 6.0), &cfg).unwrap();
    let (p, se) = est.at(2.0);
    assert!((p - exact).abs() < 3.0 * se, "{p} +- {se} vs {exact}");
}

#[test]
fn halving_the_mesh_moves_survival_by_less_than_a_standard_error() {
    let mass = MassFunction::inv_linear();
    let cfg = PathConfig::new(200_000, 1e-2, 31);
    let (coarse, fine) = simulate_zeta_coupled(brownian(), &mass, 0.5, 0.0, &cfg).unwrap();
    let t = [4.0];
    let a = SurvivalEstimate::from_sample(&coarse, &t_grid(), (2.0, 6.0)).unwrap();
    let b = SurvivalEstimate::from_sample(&fine, &t_grid(), (2.0, 6.0)).unwrap();
    let (pa, se) = a.at(t[0]);
    let (pb, _) = b.at(t[0]);
    assert!((pa - pb).abs() < se, "{pa} vs {pb}, se {se}");
}

#[test]
fn invalid_path_configs() {
    let mass = MassFunction::inv_linear();
    let bad = PathConfig::new(100, 0.05, 0);
    assert!(matches!(
        simulate_zeta(brownian(), &mass, 0.5, 0.0, &bad),
        Err(Error::InvalidParameter(_))
    ));
}

#[test]
fn chain_marginals_are_stationary() {
    let grid = Grid::uniform(30.0, 601).unwrap();
    let sol = solve_spectrum(brownian(), &MassFunction::inv_linear(), 0.5, &grid, 4).unwrap();
    let samples = sample_groundstate_chain(&sol, 10, 100_000, 3).unwrap();
    assert_eq!(samples.len(), 100_000);
    let bins = Binning::symmetric(5.0, 0.25);
    let m5 = samples.binned_marginal(5, &bins);
    let m10 = samples.binned_marginal(10, &bins);
    assert!(total_variation(&m5, &m10) < 0.02);
    let again = sample_groundstate_chain(&sol, 10, 1000, 3).unwrap();
    assert_eq!(&again.indices[..], &samples.indices[..again.indices.len()]);
}

/// `E[v(ω_1 - ω_0)]` on the two-site ring for Example 1, where the law is
/// `m(a) m(b) v(a - b)²` with `v(d) = e^{-|d|}` and `m = 1/(1+|x|)`.
fn two_site_bond_mean() -> f64 {
    // ∫ m(t) m(t + d) dt in closed form.
    let autocorr = |d: f64| {
        if d == 0.0 {
            2.0
        } else {
            (2.0 / d + 2.0 / (2.0 + d)) * d.ln_1p()
        }
    };
    let simpson = |f: &dyn Fn(f64) -> f64| {
        let (end, n) = (60.0, 600_000);
        let h = end / n as f64;
        let mut s = f(0.0) + f(end);
        for i in 1..n {
            s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(i as f64 * h);
        }
        s * h / 3.0
    };
    simpson(&|d| (-3.0 * d).exp() * autocorr(d)) / simpson(&|d| (-2.0 * d).exp() * autocorr(d))
}

#[test]
fn two_site_ring_matches_quadrature() {
    let pd = PotentialDensity::new(brownian(), 0.5).unwrap();
    let cfg = GibbsConfig {
        sweeps: 200_000,
        seed: 4,
        distances: vec![1],
        ..GibbsConfig::default()
    };
    let state = gibbs_mcmc(&pd, &MassFunction::inv_linear(), 2, &cfg).unwrap();
    let (mean, se) = state.bond_mean();
    let exact = two_site_bond_mean();
    assert!((mean - exact).abs() < 3.0 * se, "{mean} +- {se} vs {exact}");
    assert_eq!(state.samples(), 2 * 4 * 200_000);
}

#[test]
fn ring_correlations_against_transfer_operator() {
    let pd = PotentialDensity::new(brownian(), 0.5).unwrap();
    let mass = MassFunction::inv_linear();
    let cfg = GibbsConfig {
        sweeps: 100_000,
        seed: 12,
        observables: vec![Observable::ONE, Observable::BUMP],
        ..GibbsConfig::default()
    };
    let state = gibbs_mcmc(&pd, &mass, 64, &cfg).unwrap();
    assert!(state.acceptance.iter().all(|a| (0.3..0.5).contains(a)));
    let ones = mcmc_correlations(&state, &Observable::ONE, &Observable::ONE, &[1, 4]).unwrap();
    assert!(ones.iter().all(|c| c.value.abs() < 1e-12));
    let grid = Grid::uniform(40.0, 1001).unwrap();
    // At k = 1 the high modes still carry about 0.5% of the sum.
    let sol = solve_spectrum(brownian(), &mass, 0.5, &grid, 120).unwrap();
    let f = sol.tabulate(|x| Observable::BUMP.eval(x));
    let exact = sol.correlation(&f, &f, 1).value;
    let c1 = &mcmc_correlations(&state, &Observable::BUMP, &Observable::BUMP, &[1]).unwrap()[0];
    assert!((c1.value - exact).abs() < 3.0 * c1.stderr, "{c1:?} vs {exact}");
    assert!(matches!(
        mcmc_correlations(&state, &Observable::Tanh, &Observable::BUMP, &[1]),
        Err(Error::UnregisteredObservable)
    ));
    assert!(matches!(
        mcmc_correlations(&state, &Observable::BUMP, &Observable::BUMP, &[9]),
        Err(Error::UnregisteredObservable)
    ));
}
