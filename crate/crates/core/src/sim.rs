//! Event-driven simulation of circuits built from zero-delay gates and
//! single-history channels.
//!
//! A channel computes the delay of its `n`-th transition from
//! `T = tₙ − (tₙ₋₁ + δₙ₋₁)`, the time between the current input transition
//! and the previous (possibly cancelled) output transition. A new output that
//! would not come strictly after the still-pending previous output cancels
//! it, and both disappear.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap, VecDeque};
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::delay::InvolutionPair;
use crate::error::{Error, Result};
use crate::eta::EtaBounds;

/// Default `tₙ₋₁ + δₙ₋₁` of a channel that has never switched, in fs.
pub const INITIAL_LAST_OUTPUT: f64 = -1e12;
/// Tolerance applied when checking an adversarial choice against its bounds.
pub const BOUND_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Polarity {
    /// Ordered first so that simultaneous falling edges are applied first.
    #[serde(rename = "F")]
    Falling,
    #[serde(rename = "R")]
    Rising,
}

impl Polarity {
    pub fn to_level(self) -> bool {
        self == Polarity::Rising
    }

    pub fn from_level(level: bool) -> Self {
        if level {
            Polarity::Rising
        } else {
            Polarity::Falling
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Polarity::Rising => "R",
            Polarity::Falling => "F",
        }
    }
}

impl FromStr for Polarity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "R" | "r" => Ok(Polarity::Rising),
            "F" | "f" => Ok(Polarity::Falling),
            other => Err(Error::Parse(format!("polarity must be R or F, got {other:?}"))),
        }
    }
}

/// A timestamped edge on a named signal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    #[serde(rename = "time_fs")]
    pub time: f64,
    pub signal: String,
    pub polarity: Polarity,
}

impl Transition {
    pub fn new(time: f64, signal: impl Into<String>, polarity: Polarity) -> Self {
        Transition {
            time,
            signal: signal.into(),
            polarity,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelKind {
    Idm,
    EtaIdm,
    Cidm,
}

/// Delay behaviour of one channel, without runtime state.
#[derive(Debug, Clone, PartialEq)]
pub enum ChannelModel {
    Idm {
        pair: InvolutionPair,
    },
    EtaIdm {
        pair: InvolutionPair,
        bounds: EtaBounds,
    },
    /// Pure-delay shifter in front of an IDM channel: `δ(T) = Δ± + δ̄(T + Δ±)`.
    Cidm {
        base: InvolutionPair,
        bounds: EtaBounds,
        shift_plus: f64,
        shift_minus: f64,
    },
}

impl ChannelModel {
    pub fn kind(&self) -> ChannelKind {
        match self {
            ChannelModel::Idm { .. } => ChannelKind::Idm,
            ChannelModel::EtaIdm { .. } => ChannelKind::EtaIdm,
            ChannelModel::Cidm { .. } => ChannelKind::Cidm,
        }
    }

    pub fn bounds(&self) -> Option<&EtaBounds> {
        match self {
            ChannelModel::Idm { .. } => None,
            ChannelModel::EtaIdm { bounds, .. } | ChannelModel::Cidm { bounds, .. } => Some(bounds),
        }
    }

    /// The effective `T` used both for the delay and for the bound lookup:
    /// `T` raised to the clamp floor of the relevant delay function.
    pub fn clamp_gap(&self, polarity: Polarity, t: f64) -> f64 {
        match self {
            ChannelModel::Idm { pair } | ChannelModel::EtaIdm { pair, .. } => {
                t.max(floor_of(pair, polarity))
            }
            ChannelModel::Cidm {
                base,
                shift_plus,
                shift_minus,
                ..
            } => {
                let s = shift(polarity, *shift_plus, *shift_minus);
                t.max(floor_of(base, polarity) - s)
            }
        }
    }

    /// Deterministic delay `δ↑/δ↓(T)` at the clamped gap.
    pub fn delay(&self, polarity: Polarity, t: f64) -> f64 {
        if t == f64::INFINITY {
            return self.delta_inf(polarity);
        }
        match self {
            ChannelModel::Idm { pair } | ChannelModel::EtaIdm { pair, .. } => match polarity {
                Polarity::Rising => pair.eval_up(t),
                Polarity::Falling => pair.eval_down(t),
            },
            ChannelModel::Cidm {
                base,
                shift_plus,
                shift_minus,
                ..
            } => {
                let s = shift(polarity, *shift_plus, *shift_minus);
                s + match polarity {
                    Polarity::Rising => base.eval_up(t + s),
                    Polarity::Falling => base.eval_down(t + s),
                }
            }
        }
    }

    pub fn delta_inf(&self, polarity: Polarity) -> f64 {
        match self {
            ChannelModel::Idm { pair } | ChannelModel::EtaIdm { pair, .. } => match polarity {
                Polarity::Rising => pair.up_inf(),
                Polarity::Falling => pair.down_inf(),
            },
            ChannelModel::Cidm {
                base,
                shift_plus,
                shift_minus,
                ..
            } => match polarity {
                Polarity::Rising => shift_plus + base.up_inf(),
                Polarity::Falling => shift_minus + base.down_inf(),
            },
        }
    }

    /// Admissible interval `[−η⁻(T), η⁺(T)]`; `[0, 0]` for plain IDM channels.
    pub fn eta_range(&self, t: f64) -> (f64, f64) {
        match self.bounds() {
            None => (0.0, 0.0),
            Some(b) => (-b.eta_minus(t), b.eta_plus(t)),
        }
    }
}

fn shift(polarity: Polarity, plus: f64, minus: f64) -> f64 {
    match polarity {
        Polarity::Rising => plus,
        Polarity::Falling => minus,
    }
}

fn floor_of(pair: &InvolutionPair, polarity: Polarity) -> f64 {
    match polarity {
        Polarity::Rising => pair.up.domain_floor(),
        Polarity::Falling => pair.down.domain_floor(),
    }
}

/// Builds a CIDM channel, rejecting shifts that break strict causality.
pub fn make_cidm_channel(
    base: InvolutionPair,
    shift_plus: f64,
    shift_minus: f64,
    bounds: EtaBounds,
) -> Result<ChannelModel> {
    if !(shift_plus.is_finite() && shift_minus.is_finite()) {
        return Err(Error::invalid("CIDM shifts must be finite"));
    }
    let up0 = shift_plus + base.eval_up(shift_plus);
    let down0 = shift_minus + base.eval_down(shift_minus);
    if !(up0 > 0.0 && down0 > 0.0) {
        return Err(Error::Infeasible(format!(
            "shifts ({shift_plus}, {shift_minus}) give δ↑(0) = {up0}, δ↓(0) = {down0}; \
             the channel must be strictly causal"
        )));
    }
    Ok(ChannelModel::Cidm {
        base,
        bounds,
        shift_plus,
        shift_minus,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Pending {
    time: f64,
    polarity: Polarity,
    id: u64,
}

/// Result of feeding one input transition into a channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepOutcome {
    Scheduled { time: f64, polarity: Polarity, id: u64 },
    /// The new output and the pending output `cancelled` annihilated.
    Annihilated { cancelled: u64 },
}

/// Runtime state of one single-history channel.
#[derive(Debug, Clone)]
pub struct ChannelInstance {
    pub model: ChannelModel,
    last_input_time: f64,
    last_output_time: f64,
    last_polarity: Option<Polarity>,
    last_delivered: f64,
    pending: VecDeque<Pending>,
    next_id: u64,
    inputs: usize,
    outputs: usize,
}

impl ChannelInstance {
    pub fn new(model: ChannelModel, initial_last_output: f64) -> Self {
        ChannelInstance {
            model,
            last_input_time: f64::NEG_INFINITY,
            last_output_time: initial_last_output,
            last_polarity: None,
            last_delivered: f64::NEG_INFINITY,
            pending: VecDeque::new(),
            next_id: 0,
            inputs: 0,
            outputs: 0,
        }
    }

    /// `tₙ₋₁ + δₙ₋₁` of the most recent candidate output.
    pub fn last_output_time(&self) -> f64 {
        self.last_output_time
    }

    pub fn last_input_time(&self) -> f64 {
        self.last_input_time
    }

    pub fn last_polarity(&self) -> Option<Polarity> {
        self.last_polarity
    }

    /// Input transitions seen so far.
    pub fn input_count(&self) -> usize {
        self.inputs
    }

    /// Output transitions delivered so far.
    pub fn output_count(&self) -> usize {
        self.outputs
    }

    pub fn has_pending(&self) -> bool {
        !self.pending.is_empty()
    }

    /// Clamped `T` for an input transition at `t_in`.
    pub fn input_gap(&self, t_in: f64, polarity: Polarity) -> f64 {
        self.model.clamp_gap(polarity, t_in - self.last_output_time)
    }

    /// Processes an input transition with adversarial offset `eta`.
    pub fn step(&mut self, t_in: f64, polarity: Polarity, eta: f64) -> Result<StepOutcome> {
        if !t_in.is_finite() || t_in < self.last_input_time {
            return Err(Error::invalid(format!(
                "input transition at {t_in} fs precedes the previous one at {} fs",
                self.last_input_time
            )));
        }
        let gap = self.input_gap(t_in, polarity);
        let (lo, hi) = self.model.eta_range(gap);
        if !(eta >= lo - BOUND_TOL && eta <= hi + BOUND_TOL) {
            return Err(Error::BoundViolation { eta, lo, hi, t: gap });
        }
        let delay = self.model.delay(polarity, gap) + eta;
        let candidate = t_in + delay;
        self.last_input_time = t_in;
        self.last_polarity = Some(polarity);
        self.inputs += 1;
        self.last_output_time = candidate;

        if let Some(back) = self.pending.back() {
            if candidate <= back.time {
                let cancelled = back.id;
                self.pending.pop_back();
                return Ok(StepOutcome::Annihilated { cancelled });
            }
        }
        let time = candidate.max(t_in).max(self.last_delivered);
        let id = self.next_id;
        self.next_id += 1;
        self.pending.push_back(Pending { time, polarity, id });
        Ok(StepOutcome::Scheduled { time, polarity, id })
    }

    /// Delivers the pending output `id` if it is still the head of the queue.
    pub fn deliver(&mut self, id: u64) -> Option<(f64, Polarity)> {
        match self.pending.front() {
            Some(p) if p.id == id => {
                let p = *p;
                self.pending.pop_front();
                self.last_delivered = p.time;
                self.outputs += 1;
                Some((p.time, p.polarity))
            }
            _ => None,
        }
    }
}

pub type SignalId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GateFunction {
    Or,
    Buffer,
    Inverter,
    /// Logically a buffer; the filtering threshold lives in its input channel.
    HighThresholdBuffer,
}

impl GateFunction {
    fn arity_ok(self, n: usize) -> bool {
        match self {
            GateFunction::Or => n >= 1,
            _ => n == 1,
        }
    }

    pub fn eval(self, inputs: &[bool]) -> bool {
        match self {
            GateFunction::Or => inputs.iter().any(|&v| v),
            GateFunction::Buffer | GateFunction::HighThresholdBuffer => inputs[0],
            GateFunction::Inverter => !inputs[0],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gate {
    pub name: String,
    pub function: GateFunction,
    pub inputs: Vec<SignalId>,
    pub output: SignalId,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Channel {
    pub name: String,
    pub from: SignalId,
    pub to: SignalId,
    pub model: ChannelModel,
}

#[derive(Debug, Clone, PartialEq)]
enum Driver {
    Gate(usize),
    Channel(usize),
}

/// Circuit topology: named signals, zero-delay gates and channels.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Netlist {
    names: Vec<String>,
    initial: Vec<bool>,
    gates: Vec<Gate>,
    channels: Vec<Channel>,
    monitors: Vec<SignalId>,
}

impl Netlist {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a signal; fails if the name is taken.
    pub fn add_signal(&mut self, name: &str, initial: bool) -> Result<SignalId> {
        if self.names.iter().any(|n| n == name) {
            return Err(Error::invalid(format!("duplicate signal {name:?}")));
        }
        self.names.push(name.to_string());
        self.initial.push(initial);
        Ok(self.names.len() - 1)
    }

    pub fn add_gate(
        &mut self,
        name: &str,
        function: GateFunction,
        inputs: &[SignalId],
        output: SignalId,
    ) -> Result<usize> {
        if !function.arity_ok(inputs.len()) {
            return Err(Error::invalid(format!(
                "gate {name:?} has the wrong number of inputs ({})",
                inputs.len()
            )));
        }
        self.check_ids(inputs.iter().copied().chain([output]))?;
        self.check_undriven(output)?;
        self.gates.push(Gate {
            name: name.to_string(),
            function,
            inputs: inputs.to_vec(),
            output,
        });
        Ok(self.gates.len() - 1)
    }

    pub fn add_channel(&mut self, name: &str, from: SignalId, to: SignalId, model: ChannelModel) -> Result<usize> {
        self.check_ids([from, to])?;
        self.check_undriven(to)?;
        self.channels.push(Channel {
            name: name.to_string(),
            from,
            to,
            model,
        });
        Ok(self.channels.len() - 1)
    }

    pub fn add_monitor(&mut self, signal: SignalId) -> Result<()> {
        self.check_ids([signal])?;
        if !self.monitors.contains(&signal) {
            self.monitors.push(signal);
        }
        Ok(())
    }

    fn check_ids(&self, ids: impl IntoIterator<Item = SignalId>) -> Result<()> {
        for id in ids {
            if id >= self.names.len() {
                return Err(Error::invalid(format!("unknown signal id {id}")));
            }
        }
        Ok(())
    }

    fn check_undriven(&self, s: SignalId) -> Result<()> {
        if self.driver(s).is_some() {
            return Err(Error::invalid(format!(
                "signal {:?} already has a driver",
                self.names[s]
            )));
        }
        Ok(())
    }

    fn driver(&self, s: SignalId) -> Option<Driver> {
        if let Some(g) = self.gates.iter().position(|g| g.output == s) {
            return Some(Driver::Gate(g));
        }
        self.channels
            .iter()
            .position(|c| c.to == s)
            .map(Driver::Channel)
    }

    pub fn signal_id(&self, name: &str) -> Option<SignalId> {
        self.names.iter().position(|n| n == name)
    }

    pub fn signal_name(&self, id: SignalId) -> &str {
        &self.names[id]
    }

    pub fn signal_count(&self) -> usize {
        self.names.len()
    }

    pub fn initial_value(&self, id: SignalId) -> bool {
        self.initial[id]
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn channels(&self) -> &[Channel] {
        &self.channels
    }

    pub fn channels_mut(&mut self) -> &mut [Channel] {
        &mut self.channels
    }

    pub fn monitors(&self) -> &[SignalId] {
        &self.monitors
    }

    /// Signals without a driver; only these may carry stimulus.
    pub fn primary_inputs(&self) -> Vec<SignalId> {
        (0..self.names.len())
            .filter(|&s| self.driver(s).is_none())
            .collect()
    }

    /// Rejects signals that are neither driven, read, nor monitored.
    pub fn validate(&self) -> Result<()> {
        for s in 0..self.names.len() {
            let read = self.gates.iter().any(|g| g.inputs.contains(&s))
                || self.channels.iter().any(|c| c.from == s);
            let driven = self.driver(s).is_some();
            if !read && !driven && !self.monitors.contains(&s) {
                return Err(Error::invalid(format!(
                    "signal {:?} is dangling",
                    self.names[s]
                )));
            }
        }
        Ok(())
    }

    /// Settles gate and channel outputs on the initial values, as if the
    /// circuit had been idle since `t = −∞`.
    fn settled_initial_values(&self) -> Result<Vec<bool>> {
        let mut v = self.initial.clone();
        for _ in 0..=(self.gates.len() + self.channels.len() + 1) {
            let mut changed = false;
            for g in &self.gates {
                let ins: Vec<bool> = g.inputs.iter().map(|&i| v[i]).collect();
                let out = g.function.eval(&ins);
                if v[g.output] != out {
                    v[g.output] = out;
                    changed = true;
                }
            }
            for c in &self.channels {
                if v[c.to] != v[c.from] {
                    v[c.to] = v[c.from];
                    changed = true;
                }
            }
            if !changed {
                return Ok(v);
            }
        }
        Err(Error::ModelViolation(
            "initial signal values do not settle (unstable loop)".into(),
        ))
    }
}

/// Per-edge override of a scripted adversary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScriptedChoice {
    /// Use this `η`.
    Eta(f64),
    /// Choose `η` so that the new output comes `len` after the previous
    /// output of the channel (an up- or down-time at the channel output).
    PulseLength(f64),
    /// Rising edge maximally late, falling edge maximally early.
    Extremal,
}

/// How adversarial offsets are chosen.
#[derive(Debug, Clone, PartialEq)]
pub enum AdversaryStrategy {
    Zero,
    /// Steers rising outputs onto the critical down-time `Δ′` and falling
    /// outputs onto the critical up-time `Δ`, within the bounds. Away from the
    /// critical train (`T ≥ 0`) rising edges are maximally late and falling
    /// edges maximally early.
    CriticalLateRiseEarlyFall,
    /// Rising edges maximally late, falling edges maximally early.
    Extremal,
    /// Uniform over the admissible interval, one independent stream per
    /// channel.
    UniformRandom(u64),
    /// `base` everywhere except for the listed `(channel, input index)` pairs.
    Scripted {
        base: Box<AdversaryStrategy>,
        overrides: BTreeMap<(usize, usize), ScriptedChoice>,
    },
}

impl fmt::Display for AdversaryStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AdversaryStrategy::Zero => write!(f, "zero"),
            AdversaryStrategy::CriticalLateRiseEarlyFall => write!(f, "critical"),
            AdversaryStrategy::Extremal => write!(f, "extremal"),
            AdversaryStrategy::UniformRandom(s) => write!(f, "random:{s}"),
            AdversaryStrategy::Scripted { base, .. } => write!(f, "scripted+{base}"),
        }
    }
}

impl FromStr for AdversaryStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "zero" => Ok(AdversaryStrategy::Zero),
            "critical" => Ok(AdversaryStrategy::CriticalLateRiseEarlyFall),
            "extremal" => Ok(AdversaryStrategy::Extremal),
            _ => match s.strip_prefix("random:") {
                Some(seed) => seed
                    .parse()
                    .map(AdversaryStrategy::UniformRandom)
                    .map_err(|_| Error::Parse(format!("bad random seed in {s:?}"))),
                None => Err(Error::Parse(format!(
                    "unknown adversary {s:?} (expected zero, critical, extremal or random:SEED)"
                ))),
            },
        }
    }
}

/// Everything an adversary may look at when choosing `η`.
struct Query<'a> {
    channel: usize,
    index: usize,
    polarity: Polarity,
    gap: f64,
    model: &'a ChannelModel,
}

struct Adversary {
    strategy: AdversaryStrategy,
    rngs: Vec<ChaCha8Rng>,
}

impl Adversary {
    fn new(strategy: AdversaryStrategy, channels: usize) -> Self {
        let seed = match &strategy {
            AdversaryStrategy::UniformRandom(s) => Some(*s),
            AdversaryStrategy::Scripted { base, .. } => match **base {
                AdversaryStrategy::UniformRandom(s) => Some(s),
                _ => None,
            },
            _ => None,
        };
        let rngs = match seed {
            Some(s) => (0..channels)
                .map(|c| {
                    let mut r = ChaCha8Rng::seed_from_u64(s);
                    r.set_stream(c as u64);
                    r
                })
                .collect(),
            None => Vec::new(),
        };
        Adversary { strategy, rngs }
    }

    fn choose(&mut self, q: &Query<'_>) -> f64 {
        let strategy = self.strategy.clone();
        self.choose_with(&strategy, q)
    }

    fn choose_with(&mut self, strategy: &AdversaryStrategy, q: &Query<'_>) -> f64 {
        let (lo, hi) = q.model.eta_range(q.gap);
        let extremal = match q.polarity {
            Polarity::Rising => hi,
            Polarity::Falling => lo,
        };
        match strategy {
            AdversaryStrategy::Zero => 0.0,
            AdversaryStrategy::Extremal => extremal,
            AdversaryStrategy::CriticalLateRiseEarlyFall => {
                let Some(b) = q.model.bounds() else { return 0.0 };
                if q.gap >= 0.0 {
                    return extremal;
                }
                let target = match q.polarity {
                    Polarity::Rising => b.delta_prime,
                    Polarity::Falling => b.delta,
                };
                let eta = target - q.gap - q.model.delay(q.polarity, q.gap);
                if eta.is_finite() {
                    eta.clamp(lo, hi)
                } else {
                    extremal
                }
            }
            AdversaryStrategy::UniformRandom(_) => {
                if hi <= lo {
                    return lo;
                }
                let u: f64 = self.rngs[q.channel].gen();
                lo + (hi - lo) * u
            }
            AdversaryStrategy::Scripted { base, overrides } => match overrides.get(&(q.channel, q.index)) {
                Some(ScriptedChoice::Eta(v)) => *v,
                Some(ScriptedChoice::PulseLength(len)) => len - q.gap - q.model.delay(q.polarity, q.gap),
                Some(ScriptedChoice::Extremal) => extremal,
                None => self.choose_with(base, q),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOptions {
    /// Events after this time are not processed.
    pub horizon: f64,
    /// Maximum number of processed events before giving up.
    pub event_cap: usize,
    pub initial_last_output: f64,
    /// Signal whose pulse train is watched for steady oscillation.
    pub oscillation_signal: Option<SignalId>,
    pub oscillation_window: usize,
    pub oscillation_tol: f64,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            horizon: f64::INFINITY,
            event_cap: 200_000,
            initial_last_output: INITIAL_LAST_OUTPUT,
            oscillation_signal: None,
            oscillation_window: 8,
            oscillation_tol: 0.1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Oscillation {
    #[serde(rename = "up_time_fs")]
    pub up_time: f64,
    #[serde(rename = "period_fs")]
    pub period: f64,
    pub duty_cycle: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum RunStatus {
    /// No events left.
    Quiescent,
    HorizonReached,
    Oscillating(Oscillation),
    /// The event cap was hit; the trace is partial.
    Diverged,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimResult {
    pub status: RunStatus,
    /// Recorded transitions per signal, indexed by [`SignalId`].
    pub traces: Vec<Vec<Transition>>,
    pub initial_values: Vec<bool>,
    /// `(inputs, outputs)` per channel.
    pub channel_counts: Vec<(usize, usize)>,
    /// Up-times observed on the oscillation signal, in order.
    pub up_times: Vec<f64>,
    pub events: usize,
}

impl SimResult {
    pub fn trace(&self, id: SignalId) -> &[Transition] {
        &self.traces[id]
    }

    /// Transitions of the given signals merged in time order (ties by the
    /// order of `ids`).
    pub fn merged(&self, ids: &[SignalId]) -> Vec<Transition> {
        let mut all: Vec<(usize, &Transition)> = ids
            .iter()
            .enumerate()
            .flat_map(|(k, &id)| self.traces[id].iter().map(move |t| (k, t)))
            .collect();
        all.sort_by(|a, b| a.1.time.total_cmp(&b.1.time).then(a.0.cmp(&b.0)));
        all.into_iter().map(|(_, t)| t.clone()).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Event {
    time: f64,
    seq: u64,
    channel: usize,
    id: u64,
}

impl Eq for Event {}

impl Ord for Event {
    fn cmp(&self, other: &Self) -> Ordering {
        // reversed for a min-heap
        other
            .time
            .total_cmp(&self.time)
            .then(other.seq.cmp(&self.seq))
    }
}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

struct OscillationWatch {
    signal: SignalId,
    window: usize,
    tol: f64,
    last_rise: Option<f64>,
    prev_rise: Option<f64>,
    up_times: Vec<f64>,
    found: Option<Oscillation>,
}

impl OscillationWatch {
    fn observe(&mut self, t: &Transition) {
        match t.polarity {
            Polarity::Rising => {
                self.prev_rise = self.last_rise;
                self.last_rise = Some(t.time);
            }
            Polarity::Falling => {
                let Some(rise) = self.last_rise else { return };
                let up = t.time - rise;
                self.up_times.push(up);
                let n = self.up_times.len();
                if n >= self.window {
                    let w = &self.up_times[n - self.window..];
                    let lo = w.iter().copied().fold(f64::INFINITY, f64::min);
                    let hi = w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    if hi - lo <= self.tol {
                        if let Some(prev) = self.prev_rise {
                            let period = rise - prev;
                            self.found = Some(Oscillation {
                                up_time: up,
                                period,
                                duty_cycle: up / period,
                            });
                        }
                    }
                }
            }
        }
    }
}

/// Simulates `netlist` on `stimulus` (transitions on primary inputs).
///
/// Same-time events are handled as one batch: deliveries and stimulus are
/// applied in `(signal, Falling < Rising)` order, gates settle in delta
/// cycles, and only net level changes are recorded and forwarded.
pub fn run(
    netlist: &Netlist,
    stimulus: &[Transition],
    adversary: &AdversaryStrategy,
    options: &RunOptions,
) -> Result<SimResult> {
    netlist.validate()?;
    let n_sig = netlist.signal_count();
    let mut level = netlist.settled_initial_values()?;
    let initial_values = level.clone();

    let stim = prepare_stimulus(netlist, stimulus, &initial_values)?;
    let mut stim_pos = 0;

    let mut channels: Vec<ChannelInstance> = netlist
        .channels()
        .iter()
        .map(|c| ChannelInstance::new(c.model.clone(), options.initial_last_output))
        .collect();
    let mut readers_gate: Vec<Vec<usize>> = vec![Vec::new(); n_sig];
    for (gi, g) in netlist.gates().iter().enumerate() {
        for &i in &g.inputs {
            if !readers_gate[i].contains(&gi) {
                readers_gate[i].push(gi);
            }
        }
    }
    let mut readers_chan: Vec<Vec<usize>> = vec![Vec::new(); n_sig];
    for (ci, c) in netlist.channels().iter().enumerate() {
        readers_chan[c.from].push(ci);
    }

    let mut adv = Adversary::new(adversary.clone(), channels.len());
    let mut heap: BinaryHeap<Event> = BinaryHeap::new();
    let mut seq = 0u64;
    let mut traces: Vec<Vec<Transition>> = vec![Vec::new(); n_sig];
    let mut watch = options.oscillation_signal.map(|s| OscillationWatch {
        signal: s,
        window: options.oscillation_window.max(2),
        tol: options.oscillation_tol,
        last_rise: None,
        prev_rise: None,
        up_times: Vec::new(),
        found: None,
    });
    let mut events = 0usize;
    let mut status = RunStatus::Quiescent;

    loop {
        while matches!(heap.peek(), Some(e) if channels[e.channel].pending.front().map(|p| p.id) != Some(e.id))
        {
            heap.pop();
        }
        let next_event = heap.peek().map(|e| e.time);
        let next_stim = stim.get(stim_pos).map(|s| s.0);
        let now = match (next_event, next_stim) {
            (None, None) => break,
            (Some(a), None) => a,
            (None, Some(b)) => b,
            (Some(a), Some(b)) => a.min(b),
        };
        if now > options.horizon {
            status = RunStatus::HorizonReached;
            break;
        }

        let mut batch: Vec<(SignalId, Polarity)> = Vec::new();
        while let Some(e) = heap.peek() {
            if e.time != now {
                break;
            }
            let e = heap.pop().expect("peeked");
            if let Some((_, pol)) = channels[e.channel].deliver(e.id) {
                batch.push((netlist.channels()[e.channel].to, pol));
                events += 1;
            }
        }
        while let Some(&(t, sig, pol)) = stim.get(stim_pos) {
            if t != now {
                break;
            }
            batch.push((sig, pol));
            stim_pos += 1;
            events += 1;
        }
        if events > options.event_cap {
            status = RunStatus::Diverged;
            break;
        }
        batch.sort();

        let before = level.clone();
        let mut dirty: Vec<SignalId> = Vec::new();
        for (sig, pol) in batch {
            level[sig] = pol.to_level();
            dirty.push(sig);
        }
        settle_gates(netlist, &readers_gate, &mut level, dirty)?;

        for s in 0..n_sig {
            if level[s] == before[s] {
                continue;
            }
            let tr = Transition::new(now, netlist.signal_name(s), Polarity::from_level(level[s]));
            record(&mut traces[s], tr.clone());
            if let Some(w) = watch.as_mut() {
                if w.signal == s {
                    w.observe(&tr);
                }
            }
            for &ci in &readers_chan[s] {
                let ch = &mut channels[ci];
                let pol = tr.polarity;
                let gap = ch.input_gap(now, pol);
                let q = Query {
                    channel: ci,
                    index: ch.input_count(),
                    polarity: pol,
                    gap,
                    model: &ch.model,
                };
                let eta = adv.choose(&q);
                if let StepOutcome::Scheduled { time, id, .. } = ch.step(now, pol, eta)? {
                    seq += 1;
                    heap.push(Event {
                        time,
                        seq,
                        channel: ci,
                        id,
                    });
                }
                events += 1;
            }
        }
        if let Some(osc) = watch.as_ref().and_then(|w| w.found) {
            status = RunStatus::Oscillating(osc);
            break;
        }
        if events > options.event_cap {
            status = RunStatus::Diverged;
            break;
        }
    }

    Ok(SimResult {
        status,
        traces,
        initial_values,
        channel_counts: channels
            .iter()
            .map(|c| (c.input_count(), c.output_count()))
            .collect(),
        up_times: watch.map(|w| w.up_times).unwrap_or_default(),
        events,
    })
}

/// Appends `tr`, merging an opposite edge at the same instant into nothing.
fn record(trace: &mut Vec<Transition>, tr: Transition) {
    if let Some(last) = trace.last() {
        if last.time == tr.time && last.polarity != tr.polarity {
            trace.pop();
            return;
        }
    }
    trace.push(tr);
}

fn settle_gates(
    netlist: &Netlist,
    readers: &[Vec<usize>],
    level: &mut [bool],
    mut dirty: Vec<SignalId>,
) -> Result<()> {
    let limit = 16 * (netlist.gates().len() + 1);
    for _ in 0..limit {
        if dirty.is_empty() {
            return Ok(());
        }
        let mut gates: Vec<usize> = dirty.iter().flat_map(|&s| readers[s].iter().copied()).collect();
        gates.sort_unstable();
        gates.dedup();
        dirty.clear();
        let mut updates = Vec::new();
        for gi in gates {
            let g = &netlist.gates()[gi];
            let ins: Vec<bool> = g.inputs.iter().map(|&i| level[i]).collect();
            let out = g.function.eval(&ins);
            if level[g.output] != out {
                updates.push((g.output, out));
            }
        }
        for (s, v) in updates {
            level[s] = v;
            dirty.push(s);
        }
    }
    Err(Error::ModelViolation(
        "zero-delay gate loop does not settle".into(),
    ))
}

fn prepare_stimulus(
    netlist: &Netlist,
    stimulus: &[Transition],
    initial: &[bool],
) -> Result<Vec<(f64, SignalId, Polarity)>> {
    let inputs = netlist.primary_inputs();
    let mut out = Vec::with_capacity(stimulus.len());
    let mut last: BTreeMap<SignalId, (f64, bool)> = BTreeMap::new();
    for t in stimulus {
        let id = netlist
            .signal_id(&t.signal)
            .ok_or_else(|| Error::invalid(format!("stimulus on unknown signal {:?}", t.signal)))?;
        if !inputs.contains(&id) {
            return Err(Error::invalid(format!(
                "stimulus on driven signal {:?}",
                t.signal
            )));
        }
        if !t.time.is_finite() {
            return Err(Error::invalid("stimulus times must be finite"));
        }
        let (prev_t, prev_v) = last.get(&id).copied().unwrap_or((f64::NEG_INFINITY, initial[id]));
        if t.time <= prev_t {
            return Err(Error::invalid(format!(
                "stimulus on {:?} is not strictly increasing at {} fs",
                t.signal, t.time
            )));
        }
        if t.polarity.to_level() == prev_v {
            return Err(Error::invalid(format!(
                "stimulus on {:?} does not alternate at {} fs",
                t.signal, t.time
            )));
        }
        last.insert(id, (t.time, t.polarity.to_level()));
        out.push((t.time, id, t.polarity));
    }
    out.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    Ok(out)
}
