use levyspin::levy::{v0_asymptotic, JumpLaw, LevyModel, PotentialDensity};
use levyspin::Error;
use proptest::prelude::*;
use std::sync::OnceLock;

fn models() -> Vec<LevyModel> {
    vec![
        LevyModel::brownian(1.0).unwrap(),
        LevyModel::brownian(0.3).unwrap(),
        LevyModel::stable(1.2, 1.0).unwrap(),
        LevyModel::stable(1.5, 1.0).unwrap(),
        LevyModel::stable(1.8, 0.5).unwrap(),
        LevyModel::brownian_with_jumps(1.0, 2.0, JumpLaw::TwoPoint { size: 1.0 }).unwrap(),
    ]
}

#[test]
fn brownian_table_and_values() {
    let pd = PotentialDensity::new(LevyModel::brownian(1.0).unwrap(), 0.5).unwrap();
    assert!((pd.eval(0.0) - 1.0).abs() < 1e-12);
    assert!((pd.eval(1.0) - (-1.0f64).exp()).abs() < 1e-9);
    let mut worst: f64 = 0.0;
    for i in 0..=400 {
        let x = -20.0 + 0.1 * i as f64;
        worst = worst.max((pd.eval_direct(x).unwrap() - (-x.abs()).exp()).abs());
    }
    assert!(worst < 1e-6, "{worst}");
}

#[test]
fn stable_value_at_zero() {
    let pd = PotentialDensity::new(LevyModel::stable(1.5, 1.0).unwrap(), 1.0).unwrap();
    // (1/π) ∫_0^∞ dy/(1+y^1.5): on [1,∞) put y = s^{-2}, giving ∫_0^1 2 ds/(1+s³),
    // then composite Simpson on both smooth pieces.
    let simpson = |f: &dyn Fn(f64) -> f64| {
        let n = 200_000;
        let h = 1.0 / n as f64;
        let mut s = f(0.0) + f(1.0);
        for i in 1..n {
            s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(i as f64 * h);
        }
        s * h / 3.0
    };
    let near = simpson(&|y: f64| 1.0 / (1.0 + y.powf(1.5)));
    let far = simpson(&|s: f64| 2.0 / (1.0 + s.powi(3)));
    let oracle = (near + far) / std::f64::consts::PI;
    assert!((pd.value_at_zero() - oracle).abs() < 1e-8, "{} vs {oracle}", pd.value_at_zero());
}

#[test]
fn integral_is_inverse_rate() {
    let pd = PotentialDensity::new(LevyModel::brownian(1.0).unwrap(), 0.5).unwrap();
    assert!((pd.l1_check(40.0) - 2.0).abs() < 1e-6);
    let pd = PotentialDensity::new(LevyModel::brownian(1.0).unwrap(), 2.0).unwrap();
    assert!((pd.l1_check(40.0) - 0.5).abs() < 1e-6);
    for model in models() {
        let r = 0.7;
        let pd = PotentialDensity::new(model, r).unwrap();
        let l = 200.0 * pd.length_scale();
        let inside = pd.l1_check(l);
        let tail = pd.tail_mass_bound(l);
        assert!(inside <= 1.0 / r + 1e-6, "{model:?}");
        assert!(1.0 / r - inside <= tail + 1e-4, "{model:?}: {inside} + {tail}");
    }
}

#[test]
fn condition2_rejects_small_index() {
    assert!(matches!(LevyModel::stable(0.8, 1.0), Err(Error::ConditionViolated(_))));
    assert!(!LevyModel::stable_unchecked(1.0, 1.0).check_condition2().holds);
    assert!(LevyModel::stable(1.5, 1.0).unwrap().check_condition2().holds);
    assert!(LevyModel::brownian(1.0).unwrap().check_condition2().holds);
}

#[test]
fn small_r_asymptotics_approach_monotonically() {
    let mut cases = vec![LevyModel::brownian(1.0).unwrap()];
    for alpha in [1.2, 1.5, 1.8] {
        cases.push(LevyModel::stable(alpha, 1.0).unwrap());
    }
    for model in cases {
        let gaps: Vec<f64> = [1e-2, 1e-3, 1e-4]
            .iter()
            .map(|&r| {
                let pd = PotentialDensity::new(model, r).unwrap();
                (v0_asymptotic(&model, r).unwrap() / pd.value_at_zero() - 1.0).abs()
            })
            .collect();
        assert!(gaps[0] + 1e-12 >= gaps[1] && gaps[1] + 1e-12 >= gaps[2], "{model:?}: {gaps:?}");
        assert!(gaps[2] < 2e-2, "{model:?}: {gaps:?}");
    }
    let brownian = LevyModel::brownian(1.0).unwrap();
    assert!((v0_asymptotic(&brownian, 0.01).unwrap() - 0.02f64.powf(-0.5)).abs() < 1e-12);
    let cauchy = LevyModel::stable_unchecked(1.0, 1.0);
    let v = v0_asymptotic(&cauchy, 1e-3).unwrap();
    assert!((v - 1e3f64.ln() / std::f64::consts::PI).abs() < 1e-12);
}

const RATES: [f64; 3] = [0.1, 0.5, 2.0];

// Table construction for the jump models is the expensive part, so the
// densities are built once and shared by all cases.
fn densities() -> &'static Vec<PotentialDensity> {
    static CELL: OnceLock<Vec<PotentialDensity>> = OnceLock::new();
    CELL.get_or_init(|| {
        models()
            .into_iter()
            .flat_map(|m| RATES.iter().map(move |&r| PotentialDensity::new(m, r).unwrap()))
            .collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn density_is_even_and_peaked(idx in 0usize..18, x in 0.0f64..30.0) {
        let pd = &densities()[idx];
        let (a, b) = (pd.eval(x), pd.eval(-x));
        prop_assert_eq!(a, b);
        prop_assert!(a <= pd.value_at_zero() * (1.0 + 1e-12), "{:?} v({}) = {} > {}", pd.model(), x, a, pd.value_at_zero());
        prop_assert!(a >= 0.0);
    }

    #[test]
    fn exponent_is_even_and_nonpositive(idx in 0usize..6, y in -50.0f64..50.0) {
        let m = models()[idx];
        prop_assert!(m.char_exponent(y) <= 0.0);
        prop_assert_eq!(m.char_exponent(y), m.char_exponent(-y));
    }
}
