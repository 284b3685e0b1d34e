use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use ranksel_core::ranksum::{ranksum_u, LossPanel};
use ranksel_core::rng::TieStream;
use ranksel_core::select::{rsr_from_panel, SelectionConfig};
use ranksel_core::simlab::{sample_ar1_gaussian, sample_student_t};

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn var(v: &[f64]) -> f64 {
    let m = mean(v);
    v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64
}

#[test]
fn u_is_centered_under_exchangeability() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let us: Vec<f64> = (0..10_000)
        .map(|r| {
            let a: Vec<f64> = (0..100).map(|_| StandardNormal.sample(&mut rng)).collect();
            let b: Vec<f64> = (0..100).map(|_| StandardNormal.sample(&mut rng)).collect();
            ranksum_u(&a, &b, &mut TieStream::new(r)).unwrap()
        })
        .collect();
    assert!((mean(&us) - 0.5).abs() < 0.01, "{}", mean(&us));
}

#[test]
fn u_is_centered_with_heavy_ties() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let us: Vec<f64> = (0..4_000)
        .map(|r| {
            let mut draw = || (sample_student_t(3.0, &mut rng).abs() * 2.0).floor();
            let a: Vec<f64> = (0..50).map(|_| draw()).collect();
            let b: Vec<f64> = (0..50).map(|_| draw()).collect();
            ranksum_u(&a, &b, &mut TieStream::new(r)).unwrap()
        })
        .collect();
    assert!((mean(&us) - 0.5).abs() < 0.01, "{}", mean(&us));
}

#[test]
fn student_t_sampler_moments() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let near_normal: Vec<f64> = (0..100_000).map(|_| sample_student_t(1e6, &mut rng)).collect();
    assert!(mean(&near_normal).abs() < 0.02);
    assert!((var(&near_normal) - 1.0).abs() < 0.02);

    let mut cauchy: Vec<f64> = (0..100_000).map(|_| sample_student_t(1.0, &mut rng)).collect();
    cauchy.sort_by(|a, b| a.partial_cmp(b).unwrap());
    assert!(cauchy[50_000].abs() < 0.02);
    // quartiles of the standard Cauchy are -1 and 1
    assert!((cauchy[75_000] - 1.0).abs() < 0.05);

    let t3: Vec<f64> = (0..400_000).map(|_| sample_student_t(3.0, &mut rng)).collect();
    assert!((var(&t3) - 3.0).abs() < 0.3, "{}", var(&t3));
}

#[test]
fn ar1_sampler_correlation() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for rho in [0.0, 0.75] {
        let draws: Vec<Vec<f64>> = (0..20_000).map(|_| sample_ar1_gaussian(10, rho, &mut rng)).collect();
        for j in [0, 4, 9] {
            let col: Vec<f64> = draws.iter().map(|d| d[j]).collect();
            assert!((var(&col) - 1.0).abs() < 0.05, "rho {rho} var {}", var(&col));
        }
        let lag1 = draws.iter().map(|d| d[3] * d[4]).sum::<f64>() / draws.len() as f64;
        let lag2 = draws.iter().map(|d| d[3] * d[5]).sum::<f64>() / draws.len() as f64;
        assert!((lag1 - rho).abs() < 0.03, "rho {rho} lag1 {lag1}");
        assert!((lag2 - rho * rho).abs() < 0.03, "rho {rho} lag2 {lag2}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    // a strictly increasing transform of every loss leaves the rank-sum set unchanged
    #[test]
    fn rsr_pvalues_invariant_under_monotone_losses(
        raw in proptest::collection::vec(proptest::collection::vec(0u8..30, 20), 3..5),
        seed in any::<u64>(),
    ) {
        let cols: Vec<Vec<f64>> = raw.into_iter().map(|c| c.into_iter().map(f64::from).collect()).collect();
        let panel = LossPanel::from_columns(cols).unwrap();
        let warped = panel.map_values(|x| (x / 7.0).exp() + x.powi(3)).unwrap();
        let cfg = SelectionConfig { draws: 200, seed, ..SelectionConfig::default() };
        let a = rsr_from_panel(&panel, &cfg).unwrap();
        let b = rsr_from_panel(&warped, &cfg).unwrap();
        prop_assert_eq!(a.p_values, b.p_values);
        prop_assert_eq!(a.selected, b.selected);
    }
}
