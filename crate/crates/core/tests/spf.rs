mod common;

use etaidm::sim::{AdversaryStrategy, Polarity, Transition};
use etaidm::spf::{log_grid, no_short_output_pulses, BufferOutcome, SpfClass, SpfConfig, SpfSetup, Variant};

fn setup() -> SpfSetup {
    SpfSetup::new(SpfConfig::new(common::example_pair(), common::example_params())).unwrap()
}

fn adversaries() -> Vec<AdversaryStrategy> {
    let mut v = vec![
        AdversaryStrategy::Zero,
        AdversaryStrategy::CriticalLateRiseEarlyFall,
        AdversaryStrategy::Extremal,
    ];
    v.extend((0..8).map(AdversaryStrategy::UniformRandom));
    v
}

#[test]
fn long_pulses_lock_immediately() {
    let s = setup();
    for variant in [Variant::EtaIdm, Variant::EtaCidm] {
        for adv in adversaries() {
            for d in [s.upper_threshold(), 1.5 * s.upper_threshold()] {
                let o = s.classify_pulse(variant, d, &adv).unwrap();
                assert_eq!(o.class, SpfClass::LockedOne, "{variant:?} {adv} Δ0 = {d}");
                assert_eq!(o.o_buf, BufferOutcome::SingleRise);
            }
        }
    }
}

#[test]
fn short_pulses_pass_through_the_loop_unchanged() {
    let s = setup();
    for variant in [Variant::EtaIdm, Variant::EtaCidm] {
        for adv in adversaries() {
            for d in [1.0, 0.5 * s.lower_threshold(), s.lower_threshold()] {
                let o = s.classify_pulse(variant, d, &adv).unwrap();
                assert_eq!(o.class, SpfClass::InputPulseOnly, "{variant:?} {adv} Δ0 = {d}");
                assert_eq!(o.o_buf, BufferOutcome::Zero);
            }
        }
    }
}

#[test]
fn buffer_output_is_zero_or_a_single_rise() {
    let s = setup();
    let (lo, hi) = s.default_range();
    let outcomes = s.sweep(Variant::EtaCidm, &log_grid(lo, hi, 64), &adversaries()).unwrap();
    assert!(outcomes.iter().all(|o| o.o_buf != BufferOutcome::Other));
}

#[test]
fn random_adversaries_respect_the_critical_train() {
    let s = setup();
    let b = s.loop_bounds;
    let grid = log_grid(s.lower_threshold(), s.upper_threshold(), 10);
    for seed in 0..1000u64 {
        let d = grid[seed as usize % grid.len()];
        let o = s.classify_pulse(Variant::EtaIdm, d, &AdversaryStrategy::UniformRandom(seed)).unwrap();
        assert_ne!(o.class, SpfClass::Diverged);
        if let SpfClass::Oscillating { up_time, duty_cycle, .. } = o.class {
            assert!(up_time <= b.delta + 0.1 && duty_cycle <= s.gamma + 1e-3);
        }
        // once above Δ the up-times keep growing
        if let Some(k) = o.up_times.iter().skip(1).position(|&u| u > b.delta + 1e-6) {
            let tail = &o.up_times[k + 1..];
            assert!(tail.windows(2).all(|w| w[1] > b.delta), "seed {seed}: {tail:?}");
        }
    }
}

#[test]
fn short_pulse_detector() {
    assert!(no_short_output_pulses(&[], 2.0));
    assert!(no_short_output_pulses(&[Transition::new(5.0, "o", Polarity::Rising)], 2.0));
    let pulse = [Transition::new(5.0, "o", Polarity::Rising), Transition::new(6.0, "o", Polarity::Falling)];
    assert!(!no_short_output_pulses(&pulse, 2.0));
    assert!(no_short_output_pulses(&pulse, 1.0));
}

#[test]
fn variant_names_parse() {
    assert_eq!("eta-idm".parse::<Variant>().unwrap(), Variant::EtaIdm);
    assert_eq!("eta-cidm".parse::<Variant>().unwrap(), Variant::EtaCidm);
    assert!("cidm".parse::<Variant>().is_err());
}
