//! Short-pulse filtration circuits and pulse-length sweeps.
//!
//! Both variants feed a single input pulse `[0, Δ0)` into an OR gate whose
//! output is fed back into its second input through an adversarial channel.
//! A high-threshold buffer channel behind the OR gate removes every pulse up
//! to `Θ`, so the buffered output is either constantly zero or has a single
//! rising edge.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::delay::InvolutionPair;
use crate::error::{Error, Result};
use crate::eta::{htb_parameters, solve_fixed_point, EtaBounds, EtaParams, HtbSizing};
use crate::sim::{
    make_cidm_channel, run, AdversaryStrategy, ChannelModel, GateFunction, Netlist, Polarity,
    RunOptions, RunStatus, SignalId, SimResult, Transition,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    /// Feedback and buffer input as η-IDM channels.
    EtaIdm,
    /// The same circuit built from CIDM channels.
    EtaCidm,
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "eta-idm" => Ok(Variant::EtaIdm),
            "eta-cidm" => Ok(Variant::EtaCidm),
            _ => Err(Error::Parse(format!("unknown variant {s:?} (eta-idm or eta-cidm)"))),
        }
    }
}

/// Circuit parameters shared by both variants.
#[derive(Debug, Clone, PartialEq)]
pub struct SpfConfig {
    /// Unshifted channel pair.
    pub base: InvolutionPair,
    /// Adversary parameters of the feedback channel.
    pub loop_params: EtaParams,
    /// Shifts of the feedback channel into `i2`.
    pub loop_shift_plus: f64,
    pub loop_shift_minus: f64,
    /// Constant variation bounds of the buffer and output channels.
    pub buffer_eta_plus: f64,
    pub buffer_eta_minus: f64,
    pub htb_shift_minus: f64,
    pub htb_margin: f64,
    /// Pulses at `o_or` up to this length are filtered; defaults to
    /// `max(Δ̄, δ↑∞ + η⁺∞)` of the feedback channel.
    pub theta: Option<f64>,
    pub event_cap: usize,
}

impl SpfConfig {
    pub fn new(base: InvolutionPair, loop_params: EtaParams) -> Self {
        SpfConfig {
            base,
            loop_params,
            loop_shift_plus: 0.0,
            loop_shift_minus: 0.0,
            buffer_eta_plus: loop_params.eta_plus_inf,
            buffer_eta_minus: loop_params.eta_minus_inf,
            htb_shift_minus: 0.0,
            htb_margin: 1.0,
            theta: None,
            event_cap: 20_000,
        }
    }
}

/// Derived quantities of a configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct SpfSetup {
    pub config: SpfConfig,
    /// Effective feedback pair (base seen through the loop shifts).
    pub loop_pair: InvolutionPair,
    pub loop_bounds: EtaBounds,
    pub buffer_bounds: EtaBounds,
    pub tau: f64,
    pub gamma: f64,
    pub theta: f64,
    pub htb_shift_plus: f64,
    pub htb_shift_minus: f64,
}

impl SpfSetup {
    pub fn new(config: SpfConfig) -> Result<Self> {
        let loop_pair = config
            .base
            .with_shifts(config.loop_shift_plus, config.loop_shift_minus)?;
        let loop_bounds = EtaBounds::derive(&loop_pair, &config.loop_params)?;
        let fp = solve_fixed_point(&loop_pair, &loop_bounds)?;
        let buffer_bounds = EtaBounds::constant(config.buffer_eta_plus, config.buffer_eta_minus);
        let theta = config
            .theta
            .unwrap_or_else(|| loop_bounds.delta_bar.max(loop_pair.up_inf() + loop_bounds.sup_plus()));
        let (htb_shift_plus, htb_shift_minus) = htb_parameters(
            &loop_bounds,
            &buffer_bounds,
            &config.base,
            &HtbSizing {
                theta,
                loop_shift_plus: config.loop_shift_plus,
                loop_shift_minus: config.loop_shift_minus,
                shift_minus: config.htb_shift_minus,
                margin: config.htb_margin,
            },
        )?;
        Ok(SpfSetup {
            config,
            loop_pair,
            loop_bounds,
            buffer_bounds,
            tau: fp.tau,
            gamma: fp.gamma,
            theta,
            htb_shift_plus,
            htb_shift_minus,
        })
    }

    /// `δ↑∞ + η⁺∞`: pulses at least this long lock the loop.
    pub fn upper_threshold(&self) -> f64 {
        self.loop_pair.up_inf() + self.loop_bounds.sup_plus()
    }

    /// `δ↑∞ − δmin − η⁺∞ − η⁻∞`: pulses at most this long are cancelled.
    pub fn lower_threshold(&self) -> f64 {
        self.loop_pair.up_inf()
            - self.loop_pair.delta_min()
            - self.loop_bounds.sup_plus()
            - self.loop_bounds.sup_minus()
    }

    /// Up-time of the critical pulse train.
    pub fn delta(&self) -> f64 {
        self.loop_bounds.delta
    }

    fn htb_channel(&self) -> Result<ChannelModel> {
        make_cidm_channel(
            self.config.base.clone(),
            self.htb_shift_plus,
            self.htb_shift_minus,
            self.buffer_bounds,
        )
    }

    /// Builds the circuit and returns it with the ids of `o_or` and `o_buf`.
    pub fn build(&self, variant: Variant) -> Result<SpfCircuit> {
        let mut n = Netlist::new();
        let i1 = n.add_signal("i1", false)?;
        let i2 = n.add_signal("i2", false)?;
        let o_or = n.add_signal("o_or", false)?;
        let o_buf = n.add_signal("o_buf", false)?;
        n.add_gate("or", GateFunction::Or, &[i1, i2], o_or)?;
        match variant {
            Variant::EtaIdm => {
                n.add_channel(
                    "loop",
                    o_or,
                    i2,
                    ChannelModel::EtaIdm {
                        pair: self.loop_pair.clone(),
                        bounds: self.loop_bounds,
                    },
                )?;
                n.add_channel("htb", o_or, o_buf, self.htb_channel()?)?;
            }
            Variant::EtaCidm => {
                let i_buf = n.add_signal("i_buf", false)?;
                let o = n.add_signal("o", false)?;
                n.add_channel(
                    "loop",
                    o_or,
                    i2,
                    make_cidm_channel(
                        self.config.base.clone(),
                        self.config.loop_shift_plus,
                        self.config.loop_shift_minus,
                        self.loop_bounds,
                    )?,
                )?;
                n.add_channel("htb", o_or, i_buf, self.htb_channel()?)?;
                n.add_gate("buf", GateFunction::HighThresholdBuffer, &[i_buf], o)?;
                n.add_channel(
                    "out",
                    o,
                    o_buf,
                    ChannelModel::EtaIdm {
                        pair: self.config.base.clone(),
                        bounds: self.buffer_bounds,
                    },
                )?;
            }
        }
        n.add_monitor(o_or)?;
        n.add_monitor(o_buf)?;
        Ok(SpfCircuit {
            netlist: n,
            input: "i1",
            o_or,
            o_buf,
        })
    }

    /// Simulates one input pulse of length `delta0`.
    pub fn simulate(&self, variant: Variant, delta0: f64, adversary: &AdversaryStrategy) -> Result<SimResult> {
        let c = self.build(variant)?;
        self.simulate_on(&c, delta0, adversary)
    }

    fn simulate_on(&self, c: &SpfCircuit, delta0: f64, adversary: &AdversaryStrategy) -> Result<SimResult> {
        if !(delta0 > 0.0 && delta0.is_finite()) {
            return Err(Error::invalid(format!("pulse length must be positive, got {delta0}")));
        }
        let stimulus = [
            Transition::new(0.0, c.input, Polarity::Rising),
            Transition::new(delta0, c.input, Polarity::Falling),
        ];
        let options = RunOptions {
            event_cap: self.config.event_cap,
            oscillation_signal: Some(c.o_or),
            ..RunOptions::default()
        };
        run(&c.netlist, &stimulus, adversary, &options)
    }

    /// Runs the circuit on a pulse of length `delta0` and classifies it.
    pub fn classify_pulse(&self, variant: Variant, delta0: f64, adversary: &AdversaryStrategy) -> Result<SpfOutcome> {
        let c = self.build(variant)?;
        let r = self.simulate_on(&c, delta0, adversary)?;
        Ok(classify(&r, &c, delta0, adversary))
    }

    /// Classifies every `(Δ0, adversary)` combination in parallel.
    pub fn sweep(&self, variant: Variant, delta0s: &[f64], adversaries: &[AdversaryStrategy]) -> Result<Vec<SpfOutcome>> {
        let c = self.build(variant)?;
        let jobs: Vec<(f64, &AdversaryStrategy)> = delta0s
            .iter()
            .flat_map(|&d| adversaries.iter().map(move |a| (d, a)))
            .collect();
        jobs.par_iter()
            .map(|&(d, a)| {
                let r = self.simulate_on(&c, d, a)?;
                Ok(classify(&r, &c, d, a))
            })
            .collect()
    }

    /// Default sweep interval: covers `[Δ/4, 4Δ̄]` and both thresholds.
    pub fn default_range(&self) -> (f64, f64) {
        let lo = (self.delta() / 4.0).min(self.lower_threshold() / 2.0);
        let hi = (4.0 * self.loop_bounds.delta_bar).max(1.25 * self.upper_threshold());
        (lo.max(1e-3), hi)
    }
}

pub struct SpfCircuit {
    pub netlist: Netlist,
    pub input: &'static str,
    pub o_or: SignalId,
    pub o_buf: SignalId,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "class", rename_all = "snake_case")]
pub enum SpfClass {
    /// `o_or` has a single rising edge at 0.
    LockedOne,
    /// `o_or` carries exactly the input pulse.
    InputPulseOnly,
    Oscillating { up_time: f64, period: f64, duty_cycle: f64 },
    /// A pulse train that ends at 1.
    ResolvedOne,
    /// A pulse train that ends at 0.
    ResolvedZero,
    Diverged,
}

impl SpfClass {
    pub fn name(&self) -> &'static str {
        match self {
            SpfClass::LockedOne => "locked_one",
            SpfClass::InputPulseOnly => "input_pulse_only",
            SpfClass::Oscillating { .. } => "oscillating",
            SpfClass::ResolvedOne => "resolved_one",
            SpfClass::ResolvedZero => "resolved_zero",
            SpfClass::Diverged => "diverged",
        }
    }
}

/// Shape of the buffered output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BufferOutcome {
    Zero,
    SingleRise,
    Other,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpfOutcome {
    #[serde(rename = "delta0_fs")]
    pub delta0: f64,
    pub adversary: String,
    pub class: SpfClass,
    pub o_buf: BufferOutcome,
    pub transition_count: usize,
    #[serde(rename = "last_transition_fs")]
    pub last_transition: Option<f64>,
    /// Up-times of the pulses seen at `o_or`.
    pub up_times: Vec<f64>,
}

fn classify(r: &SimResult, c: &SpfCircuit, delta0: f64, adversary: &AdversaryStrategy) -> SpfOutcome {
    let or = r.trace(c.o_or);
    let class = match r.status {
        RunStatus::Diverged => SpfClass::Diverged,
        RunStatus::Oscillating(o) => SpfClass::Oscillating {
            up_time: o.up_time,
            period: o.period,
            duty_cycle: o.duty_cycle,
        },
        _ => {
            let pols: Vec<(f64, Polarity)> = or.iter().map(|t| (t.time, t.polarity)).collect();
            match pols.as_slice() {
                [(t, Polarity::Rising)] if *t == 0.0 => SpfClass::LockedOne,
                [(t0, Polarity::Rising), (t1, Polarity::Falling)] if *t0 == 0.0 && *t1 == delta0 => {
                    SpfClass::InputPulseOnly
                }
                [.., (_, Polarity::Rising)] => SpfClass::ResolvedOne,
                _ => SpfClass::ResolvedZero,
            }
        }
    };
    let buf = r.trace(c.o_buf);
    let o_buf = match buf {
        [] => BufferOutcome::Zero,
        [t] if t.polarity == Polarity::Rising => BufferOutcome::SingleRise,
        _ => BufferOutcome::Other,
    };
    SpfOutcome {
        delta0,
        adversary: adversary.to_string(),
        class,
        o_buf,
        transition_count: or.len(),
        last_transition: or.last().map(|t| t.time),
        up_times: r.up_times.clone(),
    }
}

/// `n` log-spaced points over `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n < 2 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

/// True iff every complete pulse (of either level) in `trace` lasts at
/// least `eps`.
pub fn no_short_output_pulses(trace: &[Transition], eps: f64) -> bool {
    trace.windows(2).all(|w| w[1].time - w[0].time >= eps)
}

/// Where the sweep places the regime boundaries.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegimeReport {
    pub adversary: String,
    /// Smallest grid point from which on every point is `LockedOne`.
    pub observed_upper: Option<f64>,
    /// Largest grid point up to which every point is `InputPulseOnly`.
    pub observed_lower: Option<f64>,
    pub all_below_lower_input_only: bool,
    pub all_above_upper_locked: bool,
    /// Local grid spacing at the expected upper threshold.
    pub step_at_upper: f64,
}

/// Summarises the sweep outcomes of one adversary against the thresholds.
pub fn regime_report(outcomes: &[SpfOutcome], adversary: &str, lower: f64, upper: f64) -> RegimeReport {
    let mut pts: Vec<&SpfOutcome> = outcomes.iter().filter(|o| o.adversary == adversary).collect();
    pts.sort_by(|a, b| a.delta0.total_cmp(&b.delta0));
    let locked = |o: &SpfOutcome| o.class == SpfClass::LockedOne;
    let input_only = |o: &SpfOutcome| o.class == SpfClass::InputPulseOnly;

    let observed_upper = {
        let k = pts.iter().rposition(|o| !locked(o));
        match k {
            None => pts.first().map(|o| o.delta0),
            Some(i) => pts.get(i + 1).map(|o| o.delta0),
        }
    };
    let observed_lower = match pts.iter().position(|o| !input_only(o)) {
        None => pts.last().map(|o| o.delta0),
        Some(0) => None,
        Some(i) => Some(pts[i - 1].delta0),
    };
    let step_at_upper = pts
        .windows(2)
        .find(|w| w[1].delta0 >= upper)
        .map(|w| w[1].delta0 - w[0].delta0)
        .unwrap_or(f64::NAN);
    RegimeReport {
        adversary: adversary.to_string(),
        observed_upper,
        observed_lower,
        all_below_lower_input_only: pts.iter().filter(|o| o.delta0 <= lower).all(|o| input_only(o)),
        all_above_upper_locked: pts.iter().filter(|o| o.delta0 >= upper).all(|o| locked(o)),
        step_at_upper,
    }
}
