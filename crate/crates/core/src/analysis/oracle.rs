//! A cheap analog stand-in for transistor-level simulation.
//!
//! The input is a piecewise-linear waveform whose edges ramp over `slew`.
//! The gate switches its drive target when the input crosses `vth_in_m`;
//! after a pure delay the target propagates through one or two cascaded
//! first-order lag stages, and the last stage is the output. All levels are
//! fractions of the supply swing.

use serde::{Deserialize, Serialize};

use crate::analysis::samples::{DelaySample, DelaySampleSet};
use crate::error::{Error, Result};
use crate::sim::Polarity;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalogOracle {
    /// Full-swing ramp time of an input edge, in fs.
    #[serde(rename = "slew_fs")]
    pub slew: f64,
    /// Input level at which input transitions are timed.
    pub vth_in: f64,
    /// Input level at which the gate switches.
    pub vth_in_m: f64,
    /// Output level at which output transitions are timed.
    pub vth_out: f64,
    /// Output level the characterization pulses must just touch.
    pub vth_out_m: f64,
    #[serde(rename = "pure_delay_fs")]
    pub pure_delay: f64,
    /// Time constants of the lag stages (one or two, distinct).
    #[serde(rename = "stages_fs")]
    pub stages: Vec<f64>,
}

impl AnalogOracle {
    /// Single lag stage, zero slew and all thresholds at half swing.
    pub fn first_order(pure_delay: f64, tau: f64) -> Self {
        AnalogOracle {
            slew: 0.0,
            vth_in: 0.5,
            vth_in_m: 0.5,
            vth_out: 0.5,
            vth_out_m: 0.5,
            pure_delay,
            stages: vec![tau],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let in_unit = |v: f64| v > 0.0 && v < 1.0;
        if !(in_unit(self.vth_in) && in_unit(self.vth_in_m) && in_unit(self.vth_out) && in_unit(self.vth_out_m)) {
            return Err(Error::invalid("thresholds must lie strictly between 0 and 1"));
        }
        if !(self.slew >= 0.0 && self.pure_delay >= 0.0) {
            return Err(Error::invalid("slew and pure delay must be non-negative"));
        }
        match self.stages.as_slice() {
            [a] if *a > 0.0 => Ok(()),
            [a, b] if *a > 0.0 && *b > 0.0 && (a - b).abs() > 1e-9 * a.max(*b) => Ok(()),
            _ => Err(Error::invalid("one stage or two stages with distinct positive time constants")),
        }
    }

    /// Time from the `vth_in` crossing to the switching point on a rising
    /// (`Δ⁺`) or falling (`Δ⁻`) input ramp.
    pub fn threshold_shift(&self, edge: Polarity) -> f64 {
        match edge {
            Polarity::Rising => (self.vth_in_m - self.vth_in) * self.slew,
            Polarity::Falling => (self.vth_in - self.vth_in_m) * self.slew,
        }
    }

    /// Output response to input edges timed at their `vth_in` crossings,
    /// alternating from `initial`.
    pub fn response(&self, initial: bool, edges: &[f64]) -> Result<PulseResponse> {
        self.validate()?;
        let level = if initial { 1.0 } else { 0.0 };
        let mut segs = vec![Segment {
            start: f64::NEG_INFINITY,
            u: level,
            state: [level; 2],
        }];
        let mut u = level;
        let mut prev_switch = f64::NEG_INFINITY;
        let mut prev_edge = f64::NEG_INFINITY;
        for (k, &tc) in edges.iter().enumerate() {
            let rising = (k % 2 == 0) != initial;
            let pol = Polarity::from_level(rising);
            if tc - prev_edge < self.slew {
                return Err(Error::invalid("input edges closer than the slew overlap"));
            }
            prev_edge = tc;
            let switch = tc + self.threshold_shift(pol) + self.pure_delay;
            if switch <= prev_switch {
                return Err(Error::invalid("switching events out of order"));
            }
            prev_switch = switch;
            let last = segs.last().expect("non-empty");
            let state = if last.start == f64::NEG_INFINITY {
                last.state
            } else {
                advance(&self.stages, last, switch - last.start).1
            };
            u = if rising { 1.0 } else { 0.0 };
            segs.push(Segment { start: switch, u, state });
        }
        let _ = u;
        Ok(PulseResponse {
            taus: self.stages.clone(),
            segs,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Segment {
    start: f64,
    u: f64,
    state: [f64; 2],
}

/// Output level and stage states `dt` after the start of `seg`.
fn advance(taus: &[f64], seg: &Segment, dt: f64) -> (f64, [f64; 2]) {
    let u = seg.u;
    let e1 = (-dt / taus[0]).exp();
    let v1 = u + (seg.state[0] - u) * e1;
    if taus.len() == 1 {
        return (v1, [v1, v1]);
    }
    let (t1, t2) = (taus[0], taus[1]);
    let a = (seg.state[0] - u) * t1 / (t1 - t2);
    let b = seg.state[1] - u - a;
    let v2 = u + a * e1 + b * (-dt / t2).exp();
    (v2, [v1, v2])
}

/// Interior extremum of the output within a segment, as an offset from its
/// start.
fn extremum(taus: &[f64], seg: &Segment) -> Option<f64> {
    if taus.len() == 1 {
        return None;
    }
    let (t1, t2) = (taus[0], taus[1]);
    let a = (seg.state[0] - seg.u) * t1 / (t1 - t2);
    let b = seg.state[1] - seg.u - a;
    // a/t1·e^{−t/t1} + b/t2·e^{−t/t2} = 0
    let ratio = -(b * t1) / (a * t2);
    if !(ratio > 0.0) || a == 0.0 {
        return None;
    }
    let t = ratio.ln() / (1.0 / t2 - 1.0 / t1);
    (t > 0.0 && t.is_finite()).then_some(t)
}

/// Piecewise closed-form output waveform.
#[derive(Debug, Clone, PartialEq)]
pub struct PulseResponse {
    taus: Vec<f64>,
    segs: Vec<Segment>,
}

impl PulseResponse {
    fn settle_time(&self) -> f64 {
        60.0 * self.taus.iter().sum::<f64>()
    }

    pub fn value(&self, t: f64) -> f64 {
        let k = self.segs.partition_point(|s| s.start <= t);
        let seg = &self.segs[k.saturating_sub(1)];
        if seg.start == f64::NEG_INFINITY {
            return seg.state[self.taus.len() - 1];
        }
        advance(&self.taus, seg, t - seg.start).0
    }

    /// Monotone pieces `[a, b]` covering the switching activity.
    fn pieces(&self) -> Vec<(f64, f64)> {
        let mut out = Vec::new();
        for (k, seg) in self.segs.iter().enumerate().skip(1) {
            let end = self
                .segs
                .get(k + 1)
                .map(|s| s.start)
                .unwrap_or(seg.start + self.settle_time());
            match extremum(&self.taus, seg) {
                Some(x) if seg.start + x < end => {
                    out.push((seg.start, seg.start + x));
                    out.push((seg.start + x, end));
                }
                _ => out.push((seg.start, end)),
            }
        }
        out
    }

    /// Times at which the output crosses `level`, with direction.
    pub fn crossings(&self, level: f64) -> Vec<(f64, Polarity)> {
        let mut out = Vec::new();
        for (a, b) in self.pieces() {
            let fa = self.value(a) - level;
            let fb = self.value(b) - level;
            if fa == 0.0 || fa.signum() == fb.signum() {
                continue;
            }
            let t = crate::roots::bisect(a, b, |t| self.value(t) - level, 0.0, 200)
                .unwrap_or(b);
            out.push((t, Polarity::from_level(fb > 0.0)));
        }
        out
    }

    /// Largest output value and where it is attained.
    pub fn peak(&self) -> (f64, f64) {
        self.extreme(|a, b| a > b)
    }

    /// Smallest output value and where it is attained.
    pub fn trough(&self) -> (f64, f64) {
        self.extreme(|a, b| a < b)
    }

    fn extreme(&self, better: impl Fn(f64, f64) -> bool) -> (f64, f64) {
        let mut best = (f64::NAN, self.value(f64::NEG_INFINITY));
        for (a, b) in self.pieces() {
            for t in [a, b] {
                let v = self.value(t);
                if better(v, best.1) {
                    best = (t, v);
                }
            }
        }
        best
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Characterization {
    /// From the negative pulse whose output just touches `vth_out_m` (the
    /// `δ↑(−x) = x` side).
    pub delta_min: f64,
    /// From the positive pulse (the `δ↓(−x) = x` side).
    pub delta_min_falling: f64,
    pub shift_plus: f64,
    pub shift_minus: f64,
    /// Critical widths of the negative and positive pulses.
    pub critical_width_negative: f64,
    pub critical_width_positive: f64,
    /// Final bisection bracket widths and iteration counts.
    pub bracket: f64,
    pub iterations: usize,
    pub samples: DelaySampleSet,
}

const BRACKET_TOL: f64 = 0.01;
const MAX_BISECTIONS: usize = 60;

/// Binary search on the pulse width until the output just touches the
/// metastable level, then long-pulse sampling of `(T, δ)` pairs.
pub fn characterize(oracle: &AnalogOracle, samples_per_edge: usize) -> Result<Characterization> {
    oracle.validate()?;
    let (wn, tn, bn, in_) = critical_pulse(oracle, true)?;
    let (wp, tp, bp, ip) = critical_pulse(oracle, false)?;
    let mut samples = Vec::new();
    samples.extend(edge_samples(oracle, true, wn, samples_per_edge)?);
    samples.extend(edge_samples(oracle, false, wp, samples_per_edge)?);
    Ok(Characterization {
        delta_min: tn - wn,
        delta_min_falling: tp - wp,
        shift_plus: oracle.threshold_shift(Polarity::Rising),
        shift_minus: oracle.threshold_shift(Polarity::Falling),
        critical_width_negative: wn,
        critical_width_positive: wp,
        bracket: bn.max(bp),
        iterations: in_.max(ip),
        samples: DelaySampleSet::new("oracle", samples)?,
    })
}

/// Returns `(width, touch time, bracket, iterations)` for a pulse starting
/// at 0 from level `initial` (true: negative pulse).
fn critical_pulse(oracle: &AnalogOracle, initial: bool) -> Result<(f64, f64, f64, usize)> {
    let level = oracle.vth_out_m;
    let reaches = |w: f64| -> Result<(bool, f64)> {
        let r = oracle.response(initial, &[0.0, w])?;
        Ok(if initial {
            let (t, v) = r.trough();
            (v <= level, t)
        } else {
            let (t, v) = r.peak();
            (v >= level, t)
        })
    };
    let mut lo = oracle.slew.max(1e-9);
    if reaches(lo)?.0 {
        return Err(Error::CharacterizationFailed(
            "even the shortest admissible pulse reaches the metastable level".into(),
        ));
    }
    let mut hi = 2.0 * lo.max(oracle.stages[0]);
    let mut grow = 0;
    while !reaches(hi)?.0 {
        hi *= 2.0;
        grow += 1;
        if grow > 200 {
            return Err(Error::CharacterizationFailed(
                "no pulse width reaches the metastable level".into(),
            ));
        }
    }
    let mut iterations = 0;
    while hi - lo >= BRACKET_TOL {
        if iterations == MAX_BISECTIONS {
            return Err(Error::CharacterizationFailed(format!(
                "bracket still {} fs wide after {MAX_BISECTIONS} bisections",
                hi - lo
            )));
        }
        let mid = 0.5 * (lo + hi);
        if reaches(mid)?.0 {
            hi = mid;
        } else {
            lo = mid;
        }
        iterations += 1;
    }
    let touch = reaches(hi)?.1;
    Ok((hi, touch, hi - lo, iterations))
}

fn edge_samples(oracle: &AnalogOracle, initial: bool, w_crit: f64, n: usize) -> Result<Vec<DelaySample>> {
    let scale: f64 = oracle.stages.iter().sum();
    let edge = if initial { Polarity::Rising } else { Polarity::Falling };
    let mut out = Vec::with_capacity(n);
    let n = n.max(2);
    for i in 0..n {
        let d = 1e-2 * (3000.0f64).powf(i as f64 / (n - 1) as f64) * scale.max(1.0) / 10.0;
        let w = w_crit + d;
        let r = oracle.response(initial, &[0.0, w])?;
        let cr = r.crossings(oracle.vth_out);
        // first output edge answers the input edge at 0, the second the one at w
        if cr.len() < 2 {
            continue;
        }
        let t_prev = cr[0].0;
        let t_out = cr[1].0;
        if cr[1].1 != edge {
            continue;
        }
        out.push(DelaySample {
            t: w - t_prev,
            delta: t_out - w,
            edge,
        });
    }
    if out.len() < 4 {
        return Err(Error::CharacterizationFailed("too few delay samples".into()));
    }
    Ok(out)
}
