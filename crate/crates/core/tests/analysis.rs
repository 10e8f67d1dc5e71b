mod common;

use etaidm::analysis::{
    characterize, compare_corners, coverage_deviation, fit_edge, fit_sumexp, AnalogOracle, Corridor, DelaySampleSet,
};
use etaidm::delay::{solve_delta_min, DelayFunction, ExpTerm};
use etaidm::eta::EtaBounds;
use etaidm::sim::Polarity;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn reference_up() -> DelayFunction {
    DelayFunction::sum_exp(
        1000.0,
        vec![ExpTerm { amplitude: 300.0, rate: 0.01 }, ExpTerm { amplitude: 200.0, rate: 0.002 }],
    )
    .unwrap()
}

fn dense_points(f: &DelayFunction, n: usize) -> Vec<(f64, f64)> {
    (0..n)
        .map(|i| {
            let t = -50.0 + 5000.0 * (i as f64 / (n - 1) as f64).powi(2);
            (t, f.value(t))
        })
        .collect()
}

fn example_corridor() -> (Corridor, Vec<(f64, f64)>) {
    let pair = common::example_pair();
    let corridor = Corridor::new(pair.up.clone(), common::example_bounds());
    let pts = (0..400)
        .map(|i| {
            let t = -150.0 + 12.0 * i as f64;
            (t, pair.up.value(t))
        })
        .collect();
    (corridor, pts)
}

#[test]
fn fit_reproduces_noise_free_data() {
    let f = reference_up();
    let pts = dense_points(&f, 200);
    let fit = fit_edge(&pts, 2).unwrap();
    assert!(fit.rms <= 1e-4);
    for t in [-40.0, 0.0, 100.0, 1000.0, 4000.0] {
        assert!((fit.function.value(t) - f.value(t)).abs() < 1e-3);
    }
}

#[test]
fn single_term_fit_matches_single_term_data() {
    let f = DelayFunction::sum_exp(800.0, vec![ExpTerm { amplitude: 500.0, rate: 0.004 }]).unwrap();
    let fit = fit_edge(&dense_points(&f, 100), 1).unwrap();
    assert!(fit.rms <= 1e-6);
    assert!((fit.function.delta_inf() - 800.0).abs() < 1e-6);
}

#[test]
fn fit_with_uniform_noise_stays_below_the_noise_amplitude() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let f = reference_up();
    for a in [0.5, 2.0, 5.0] {
        let pts: Vec<(f64, f64)> =
            dense_points(&f, 300).into_iter().map(|(t, y)| (t, y + rng.gen_range(-a..a))).collect();
        let fit = fit_edge(&pts, 2).unwrap();
        assert!(fit.rms <= a, "a = {a}, rms = {}", fit.rms);
    }
}

#[test]
fn fit_is_invariant_under_reordering_and_stable_under_removal() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let f = reference_up();
    let pts: Vec<(f64, f64)> =
        dense_points(&f, 400).into_iter().map(|(t, y)| (t, y + rng.gen_range(-1.0..1.0))).collect();
    let fit = fit_edge(&pts, 2).unwrap();
    let base = fit.rms;
    let mut shuffled = pts.clone();
    shuffled.shuffle(&mut rng);
    assert!((fit_edge(&shuffled, 2).unwrap().rms - base).abs() <= 1e-9 * base.max(1.0));
    let mut by_residual: Vec<usize> = (0..pts.len()).collect();
    by_residual.sort_by(|&a, &b| {
        let r = |k: usize| (pts[k].1 - fit.function.value(pts[k].0)).abs();
        r(b).total_cmp(&r(a))
    });
    let mut removals: Vec<usize> = (0..pts.len()).step_by(10).collect();
    removals.extend(&by_residual[..5]);
    for k in removals {
        let mut fewer = pts.clone();
        fewer.remove(k);
        let rms = fit_edge(&fewer, 2).unwrap().rms;
        assert!((rms - base).abs() < 0.01 * base, "removing {k}: {rms} vs {base}");
    }
}

#[test]
fn fit_rejects_too_few_or_too_narrow_samples() {
    let f = reference_up();
    assert!(fit_edge(&dense_points(&f, 7), 2).is_err());
    let narrow: Vec<(f64, f64)> = (0..50).map(|i| (i as f64, f.value(i as f64))).collect();
    assert!(fit_edge(&narrow, 2).is_err());
}

#[test]
fn fitted_pair_recovers_a_derived_channel() {
    let pair = common::example_pair();
    let grid: Vec<f64> = (0..200).map(|i| -120.0 + 40.0 * i as f64).collect();
    let set = DelaySampleSet::from_functions("x", &grid, |t| pair.eval_up(t), |t| pair.eval_down(t)).unwrap();
    let fit = fit_sumexp(&set, 3).unwrap();
    let dmin = solve_delta_min(&fit.pair).unwrap();
    assert!((dmin - pair.delta_min()).abs() < 0.02 * pair.delta_min(), "δmin {dmin}");
}

#[test]
fn coverage_analytic_cases() {
    let (corridor, pts) = example_corridor();
    assert_eq!(coverage_deviation(&pts, &corridor).unwrap(), 0.0);
    let half: Vec<(f64, f64)> = pts.iter().map(|&(t, y)| (t, y + 0.5 * corridor.bounds.eta_plus(t))).collect();
    assert_eq!(coverage_deviation(&half, &corridor).unwrap(), 0.0);
    let above: Vec<(f64, f64)> = pts.iter().map(|&(t, _)| (t, corridor.upper(t) + 37.5)).collect();
    assert!((coverage_deviation(&above, &corridor).unwrap() - 37.5).abs() < 1e-9);
    assert!(coverage_deviation(&pts[..1], &corridor).is_err());
}

#[test]
fn symmetric_oracle_has_equal_shifts() {
    let oracle = AnalogOracle { slew: 300.0, ..AnalogOracle::first_order(120.0, 1800.0) };
    let c = characterize(&oracle, 16).unwrap();
    assert!((c.shift_plus - c.shift_minus).abs() <= 0.01);
    assert!(c.bracket < 0.01 && c.iterations <= 60);

    let plain = characterize(&AnalogOracle::first_order(195.0, 4000.0), 16).unwrap();
    assert_eq!((plain.shift_plus, plain.shift_minus), (0.0, 0.0));
    assert!((plain.delta_min - 195.0).abs() < 0.05);
}

#[test]
fn corners_identical_to_the_baseline_score_zero() {
    let pair = common::example_pair();
    let b = common::example_bounds();
    let grid: Vec<f64> = (0..100).map(|i| -100.0 + 50.0 * i as f64).collect();
    let base = DelaySampleSet::from_functions("default", &grid, |t| pair.eval_up(t), |t| pair.eval_down(t)).unwrap();
    let slow = base.map_delays("slow", |_, _, d| 1.2 * d).unwrap();
    let r = compare_corners(&pair, &[base, slow], &b.collapsed(), &b).unwrap();
    let agg = r.aggregate();
    assert_eq!(agg[0], ("default".to_string(), 0.0, 0.0));
    assert_eq!(agg[1].0, "slow");
    assert!(agg[1].1 > agg[1].2);
    assert_eq!(r.rows.iter().filter(|row| row.edge == Polarity::Falling).count(), 2);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn coverage_is_one_lipschitz(c in -500.0f64..500.0, seed in any::<u64>()) {
        let (corridor, pts) = example_corridor();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noisy: Vec<(f64, f64)> = pts.iter().map(|&(t, y)| (t, y + rng.gen_range(-900.0..900.0))).collect();
        let moved: Vec<(f64, f64)> = noisy.iter().map(|&(t, y)| (t, y + c)).collect();
        let a = coverage_deviation(&noisy, &corridor).unwrap();
        let b = coverage_deviation(&moved, &corridor).unwrap();
        prop_assert!(a >= 0.0 && b >= 0.0);
        prop_assert!((a - b).abs() <= c.abs() + 1e-9);
    }

    #[test]
    fn widening_never_increases_deviation(seed in any::<u64>(), which in 0usize..6, by in 0.0f64..300.0) {
        let (corridor, pts) = example_corridor();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noisy: Vec<(f64, f64)> = pts.iter().map(|&(t, y)| (t, y + rng.gen_range(-1500.0..1500.0))).collect();
        let mut wide: EtaBounds = corridor.bounds;
        match which {
            0 => wide.eta_plus_min += by,
            1 => wide.eta_minus_min += by,
            2 => wide.eta_plus_inf += by,
            3 => wide.eta_minus_inf += by,
            4 => wide.rho_plus += by / 300.0,
            _ => wide.rho_minus += by / 300.0,
        }
        let before = coverage_deviation(&noisy, &corridor).unwrap();
        let after = coverage_deviation(&noisy, &Corridor::new(corridor.center.clone(), wide)).unwrap();
        prop_assert!(after <= before + 1e-9);
    }
}
