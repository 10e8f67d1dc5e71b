#![allow(dead_code)]

use etaidm::delay::{DelayFunction, ExpTerm, InvolutionPair};
use etaidm::eta::{check_constraints, solve_fixed_point, EtaBounds, EtaParams};
use rand::Rng;

/// Inverter-like exp channel used throughout the examples.
pub fn example_pair() -> InvolutionPair {
    InvolutionPair::symmetric_exp(195.0 + 4000.0 * std::f64::consts::LN_2, 4000.0).unwrap()
}

pub fn example_params() -> EtaParams {
    EtaParams::symmetric(63.0, 1260.0, 0.2)
}

pub fn example_bounds() -> EtaBounds {
    EtaBounds::derive(&example_pair(), &example_params()).unwrap()
}

pub fn random_exp(rng: &mut impl Rng) -> Option<DelayFunction> {
    let d_inf = rng.gen_range(800.0..5000.0);
    let tau = rng.gen_range(0.1..1.3) * d_inf;
    let shift = d_inf * rng.gen_range(0.85..1.15);
    DelayFunction::exp(d_inf, tau, shift).ok()
}

pub fn random_sumexp(rng: &mut impl Rng) -> Option<DelayFunction> {
    let d_inf = rng.gen_range(800.0..5000.0);
    let k = rng.gen_range(1..=3);
    let total = rng.gen_range(0.5..0.9) * d_inf;
    let weights: Vec<f64> = (0..k).map(|_| rng.gen_range(0.2..1.0)).collect();
    let wsum: f64 = weights.iter().sum();
    let terms = weights
        .iter()
        .map(|w| ExpTerm {
            amplitude: total * w / wsum,
            rate: (rng.gen_range((0.2f64).ln()..(5.0f64).ln())).exp() / d_inf,
        })
        .collect();
    DelayFunction::sum_exp(d_inf, terms).ok()
}

/// A derived-mode pair of either family.
pub fn random_pair(rng: &mut impl Rng) -> InvolutionPair {
    loop {
        let up = if rng.gen_bool(0.5) { random_exp(rng) } else { random_sumexp(rng) };
        if let Some(p) = up.and_then(|f| InvolutionPair::derived(f).ok()) {
            return p;
        }
    }
}

/// A pair with adversary parameters that satisfy every constraint and admit
/// a critical pulse train.
pub fn random_config(rng: &mut impl Rng) -> (InvolutionPair, EtaParams, EtaBounds) {
    loop {
        let pair = random_pair(rng);
        let dmin = pair.delta_min();
        let span = pair.up_inf().min(pair.down_inf()) - dmin;
        let p_min = rng.gen_range(0.02..0.3) * dmin;
        let m_min = rng.gen_range(0.02..0.3) * dmin;
        let params = EtaParams {
            eta_plus_min: p_min,
            eta_minus_min: m_min,
            eta_plus_inf: p_min + rng.gen_range(0.0..0.4) * span,
            eta_minus_inf: m_min + rng.gen_range(0.0..0.4) * span,
            rho_plus: rng.gen_range(0.0..0.5),
            rho_minus: rng.gen_range(0.0..0.5),
            delta_bar: Default::default(),
        };
        if !check_constraints(&pair, &params).all_hold() {
            continue;
        }
        let Ok(bounds) = EtaBounds::derive(&pair, &params) else { continue };
        if solve_fixed_point(&pair, &bounds).is_ok() {
            return (pair, params, bounds);
        }
    }
}
