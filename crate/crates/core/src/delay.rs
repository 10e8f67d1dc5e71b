//! Delay functions and involution pairs.
//!
//! All times are femtoseconds. A [`DelayFunction`] maps the
//! previous-output-to-input time `T` to an input-to-output delay. Two
//! parametric families are supported:
//!
//! * `Exp`: the exp-channel form `δ∞ + τ·ln(1 − e^{−(T + s)/τ})`, which has a
//!   vertical asymptote at `T = −s` and a closed-form involution partner
//!   (swap `δ∞` and `s`).
//! * `SumExp`: `δ∞ − Σ aₖ·e^{−rₖ·T}` with `aₖ, rₖ > 0`. Every member is strictly
//!   increasing and concave; its involution partner is computed by numeric
//!   inversion.
//!
//! Partners and CIDM-shifted functions are represented as wrappers around a
//! shared inner function, so a pair built in derived mode is an exact
//! involution up to root-finding tolerance.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::roots;

/// Root-finding tolerance for inversions and `δmin`, in fs.
pub const EPS_ROOT: f64 = 1e-6;
/// Admissible involution residual for derived pairs, in fs.
pub const EPS_INV: f64 = 1e-3;
/// Points per decade of the validation grids.
pub const GRID_PER_DECADE: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Exp,
    SumExp,
}

/// One `a·e^{−r·T}` term of a SumExp function.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ExpTerm {
    #[serde(rename = "amplitude_fs")]
    pub amplitude: f64,
    #[serde(rename = "rate_per_fs")]
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Shape {
    Exp { tau: f64, shift: f64 },
    SumExp { terms: Vec<ExpTerm> },
    /// `T ↦ −inner⁻¹(−T)`.
    Inverse(Arc<DelayFunction>),
    /// `T ↦ by + inner(T + by)`.
    Shifted { inner: Arc<DelayFunction>, by: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DelayFunction {
    shape: Shape,
    delta_inf: f64,
    floor: f64,
}

fn finite(name: &str, v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::invalid(format!("{name} must be finite, got {v}")))
    }
}

impl DelayFunction {
    /// Exp-channel function `δ∞ + τ·ln(1 − e^{−(T + shift)/τ})`.
    pub fn exp(delta_inf: f64, tau: f64, shift: f64) -> Result<Self> {
        finite("delta_inf", delta_inf)?;
        finite("shift", shift)?;
        if !(tau.is_finite() && tau > 0.0) {
            return Err(Error::invalid(format!("tau must be positive, got {tau}")));
        }
        Ok(DelayFunction {
            shape: Shape::Exp { tau, shift },
            delta_inf,
            floor: -shift,
        })
    }

    /// SumExp function `δ∞ − Σ aₖ·e^{−rₖ·T}`.
    pub fn sum_exp(delta_inf: f64, terms: Vec<ExpTerm>) -> Result<Self> {
        finite("delta_inf", delta_inf)?;
        if terms.is_empty() {
            return Err(Error::invalid("SumExp needs at least one term"));
        }
        for t in &terms {
            if !(t.amplitude.is_finite() && t.amplitude > 0.0) {
                return Err(Error::invalid(format!(
                    "SumExp amplitudes must be positive, got {}",
                    t.amplitude
                )));
            }
            if !(t.rate.is_finite() && t.rate > 0.0) {
                return Err(Error::invalid(format!(
                    "SumExp rates must be positive, got {}",
                    t.rate
                )));
            }
        }
        Ok(DelayFunction {
            shape: Shape::SumExp { terms },
            delta_inf,
            floor: f64::NEG_INFINITY,
        })
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    /// The family of the underlying parametric function.
    pub fn family(&self) -> Family {
        match &self.shape {
            Shape::Exp { .. } => Family::Exp,
            Shape::SumExp { .. } => Family::SumExp,
            Shape::Inverse(inner) | Shape::Shifted { inner, .. } => inner.family(),
        }
    }

    /// `lim_{T→∞} δ(T)`; `+∞` for the partner of a SumExp function.
    pub fn delta_inf(&self) -> f64 {
        self.delta_inf
    }

    /// Arguments below this value are clamped before evaluation.
    pub fn domain_floor(&self) -> f64 {
        self.floor
    }

    /// Returns a copy whose clamp floor is at least `floor`.
    pub fn with_floor(mut self, floor: f64) -> Self {
        self.floor = self.floor.max(floor);
        self
    }

    /// Largest time constant, used to size validation grids.
    pub fn time_scale(&self) -> f64 {
        match &self.shape {
            Shape::Exp { tau, .. } => *tau,
            Shape::SumExp { terms } => terms
                .iter()
                .map(|t| 1.0 / t.rate)
                .fold(0.0, f64::max),
            Shape::Inverse(inner) | Shape::Shifted { inner, .. } => inner.time_scale(),
        }
    }

    /// The involution partner `T ↦ −self⁻¹(−T)`.
    pub fn partner(&self) -> DelayFunction {
        match &self.shape {
            Shape::Exp { tau, shift } => DelayFunction {
                shape: Shape::Exp {
                    tau: *tau,
                    shift: self.delta_inf,
                },
                delta_inf: *shift,
                floor: -self.delta_inf,
            },
            Shape::Inverse(inner) => (**inner).clone(),
            _ => {
                let natural_floor = self.natural_floor();
                DelayFunction {
                    delta_inf: -natural_floor,
                    floor: -self.delta_inf,
                    shape: Shape::Inverse(Arc::new(self.clone())),
                }
            }
        }
    }

    /// `T ↦ by + self(T + by)`, the effective delay behind a pure-delay shifter.
    pub fn shifted(&self, by: f64) -> DelayFunction {
        DelayFunction {
            delta_inf: by + self.delta_inf,
            floor: self.floor - by,
            shape: Shape::Shifted {
                inner: Arc::new(self.clone()),
                by,
            },
        }
    }

    /// Floor implied by the shape alone (the singularity), ignoring clamps set
    /// by a pair.
    fn natural_floor(&self) -> f64 {
        match &self.shape {
            Shape::Exp { shift, .. } => -shift,
            Shape::SumExp { .. } => f64::NEG_INFINITY,
            Shape::Inverse(inner) => -inner.delta_inf,
            Shape::Shifted { inner, by } => inner.natural_floor() - by,
        }
    }

    /// Evaluates the clamped function. Rejects non-finite arguments.
    pub fn eval(&self, t: f64) -> Result<f64> {
        if !t.is_finite() {
            return Err(Error::invalid(format!("delay argument must be finite, got {t}")));
        }
        Ok(self.value(t))
    }

    /// Total version of [`eval`](Self::eval): `+∞` maps to `δ∞`, values at or
    /// below an Exp singularity map to `−∞`.
    pub fn value(&self, t: f64) -> f64 {
        let t = t.max(self.floor);
        match &self.shape {
            Shape::Exp { tau, shift } => {
                let z = (t + shift) / tau;
                if z <= 0.0 {
                    f64::NEG_INFINITY
                } else {
                    self.delta_inf + tau * (-(-z).exp()).ln_1p()
                }
            }
            Shape::SumExp { terms } => {
                self.delta_inf
                    - terms
                        .iter()
                        .map(|k| k.amplitude * (-k.rate * t).exp())
                        .sum::<f64>()
            }
            Shape::Inverse(inner) => {
                let y = -t;
                if y >= inner.delta_inf {
                    return f64::NEG_INFINITY;
                }
                -inner.raw_inverse(y)
            }
            Shape::Shifted { inner, by } => by + inner.value(t + by),
        }
    }

    /// Derivative at the clamped argument.
    pub fn derivative(&self, t: f64) -> Result<f64> {
        if t.is_nan() {
            return Err(Error::invalid("derivative argument is NaN"));
        }
        Ok(self.slope(t))
    }

    /// Total version of [`derivative`](Self::derivative); `+∞` at an Exp
    /// singularity.
    pub fn slope(&self, t: f64) -> f64 {
        let t = t.max(self.floor);
        match &self.shape {
            Shape::Exp { tau, shift } => {
                let z = (t + shift) / tau;
                if z <= 0.0 {
                    f64::INFINITY
                } else {
                    1.0 / z.exp_m1()
                }
            }
            Shape::SumExp { terms } => terms
                .iter()
                .map(|k| k.amplitude * k.rate * (-k.rate * t).exp())
                .sum(),
            Shape::Inverse(inner) => {
                let x = inner.raw_inverse(-t);
                1.0 / inner.slope(x)
            }
            Shape::Shifted { inner, by } => inner.slope(t + by),
        }
    }

    /// Smallest `T ≥ 0` (on a doubling ladder) where `δ∞ − δ(T)` drops below
    /// `1e−6·max(1, |δ∞|)`. Beyond it the function is numerically flat and
    /// compositions through its inverse are not resolvable in f64.
    pub fn saturation_point(&self) -> f64 {
        if !self.delta_inf.is_finite() {
            return f64::INFINITY;
        }
        let tol = 1e-6 * self.delta_inf.abs().max(1.0);
        let mut t = self.time_scale().max(1.0);
        while self.delta_inf - self.value(t) >= tol && t < 1e12 {
            t *= 2.0;
        }
        t
    }

    /// Lowest attainable value (the value at the clamp floor).
    pub fn min_value(&self) -> f64 {
        if self.floor == f64::NEG_INFINITY {
            f64::NEG_INFINITY
        } else {
            self.value(self.floor)
        }
    }

    /// Solves `δ(T) = y` for `y` strictly between the minimum value and `δ∞`.
    pub fn invert(&self, y: f64) -> Result<f64> {
        let lo = self.min_value();
        if !(y.is_finite() && y > lo && y < self.delta_inf) {
            return Err(Error::OutOfRange {
                value: y,
                lo,
                hi: self.delta_inf,
            });
        }
        Ok(self.raw_inverse(y).max(self.floor))
    }

    /// Inverse of the unclamped function; `y` must lie below `δ∞`.
    fn raw_inverse(&self, y: f64) -> f64 {
        match &self.shape {
            Shape::Exp { tau, shift } => {
                // δ∞ + τ ln(1 − e^{−z}) = y  ⇒  z = −ln(1 − e^{(y−δ∞)/τ})
                let z = -(-((y - self.delta_inf) / tau).exp_m1()).ln();
                tau * z - shift
            }
            Shape::Inverse(inner) => -inner.value(-y),
            Shape::Shifted { inner, by } => inner.raw_inverse(y - by) - by,
            Shape::SumExp { .. } => self.numeric_inverse(y),
        }
    }

    fn numeric_inverse(&self, y: f64) -> f64 {
        let scale = self.time_scale().max(1.0);
        let unclamped = |t: f64| match &self.shape {
            Shape::SumExp { terms } => {
                self.delta_inf
                    - terms
                        .iter()
                        .map(|k| k.amplitude * (-k.rate * t).exp())
                        .sum::<f64>()
            }
            _ => unreachable!(),
        };
        let mut hi = 0.0;
        let mut step = scale;
        while unclamped(hi) < y {
            hi += step;
            step *= 2.0;
            if !hi.is_finite() {
                return f64::INFINITY;
            }
        }
        let mut lo = 0.0;
        step = scale;
        while unclamped(lo) > y {
            lo -= step;
            step *= 2.0;
            if !lo.is_finite() {
                return f64::NEG_INFINITY;
            }
        }
        let tol = 1e-13 * (1.0 + lo.abs().max(hi.abs()));
        roots::bisect_newton(
            lo,
            hi,
            |t| unclamped(t) - y,
            |t| self.slope(t),
            tol,
        )
        .unwrap_or(0.5 * (lo + hi))
    }
}

/// How the falling function of a pair was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PairMode {
    /// `δ↓(T) = −δ↑⁻¹(−T)`, an exact involution.
    Derived,
    /// Both functions obtained independently; involution holds approximately.
    Fitted,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InvolutionPair {
    pub up: DelayFunction,
    pub down: DelayFunction,
    pub mode: PairMode,
    delta_min: f64,
    /// `|δ↓(−δmin) − δmin|`; zero up to tolerance for derived pairs.
    down_residual: f64,
}

impl InvolutionPair {
    /// Builds a pair from `up` with the exact partner as falling function.
    pub fn derived(up: DelayFunction) -> Result<Self> {
        let down = up.partner();
        Self::assemble(up, down, PairMode::Derived)
    }

    /// Builds a pair from two independently obtained functions.
    pub fn fitted(up: DelayFunction, down: DelayFunction) -> Result<Self> {
        Self::assemble(up, down, PairMode::Fitted)
    }

    fn assemble(up: DelayFunction, down: DelayFunction, mode: PairMode) -> Result<Self> {
        let up_floor = -down.delta_inf;
        let down_floor = -up.delta_inf;
        let mut pair = InvolutionPair {
            up: up.with_floor(up_floor),
            down: down.with_floor(down_floor),
            mode,
            delta_min: f64::NAN,
            down_residual: f64::NAN,
        };
        let dm = solve_delta_min(&pair)?;
        pair.delta_min = dm;
        pair.down_residual = (pair.down.value(-dm) - dm).abs();
        Ok(pair)
    }

    /// Symmetric exp-channel pair with `δ↑∞ = δ↓∞ = delta_inf`.
    pub fn symmetric_exp(delta_inf: f64, tau: f64) -> Result<Self> {
        Self::derived(DelayFunction::exp(delta_inf, tau, delta_inf)?)
    }

    pub fn family(&self) -> Family {
        self.up.family()
    }

    pub fn delta_min(&self) -> f64 {
        self.delta_min
    }

    pub fn down_residual(&self) -> f64 {
        self.down_residual
    }

    pub fn up_inf(&self) -> f64 {
        self.up.delta_inf
    }

    pub fn down_inf(&self) -> f64 {
        self.down.delta_inf
    }

    /// Clamped `δ↑(max{T, −δ↓∞})`.
    pub fn eval_up(&self, t: f64) -> f64 {
        self.up.value(t)
    }

    /// Clamped `δ↓(max{T, −δ↑∞})`.
    pub fn eval_down(&self, t: f64) -> f64 {
        self.down.value(t)
    }

    /// The pair seen through a pure-delay shifter: `Δ± + δ(T + Δ±)`.
    pub fn with_shifts(&self, plus: f64, minus: f64) -> Result<Self> {
        let mode = if plus == minus {
            self.mode
        } else {
            PairMode::Fitted
        };
        Self::assemble(self.up.shifted(plus), self.down.shifted(minus), mode)
    }

    /// Validation grid over `[−δ↑∞ + 1 fs, 100·τ_max]`, log-spaced in the
    /// distance from the lower end and truncated at the saturation point of
    /// `δ↓`.
    pub fn test_grid(&self) -> Vec<f64> {
        let lo = if self.up.delta_inf.is_finite() {
            -self.up.delta_inf + 1.0
        } else {
            -10.0 * self.up.time_scale()
        };
        let tau = self.up.time_scale().max(self.down.time_scale());
        let hi = (100.0 * tau).min(self.down.saturation_point());
        offset_log_grid(lo, hi, 1.0, GRID_PER_DECADE)
    }

    /// `max |−δ↑(−δ↓(T)) − T|` over `grid`.
    pub fn involution_residual(&self, grid: &[f64]) -> f64 {
        grid.iter()
            .map(|&t| {
                let d = self.down.value(t);
                (-self.up.value(-d) - t).abs()
            })
            .filter(|r| r.is_finite())
            .fold(0.0, f64::max)
    }
}

/// Points `lo + o` where `o` runs log-spaced from `first_offset` to `hi − lo`.
pub fn offset_log_grid(lo: f64, hi: f64, first_offset: f64, per_decade: usize) -> Vec<f64> {
    let span = hi - lo;
    if span <= first_offset {
        return vec![lo, hi];
    }
    let decades = (span / first_offset).log10();
    let n = ((decades * per_decade as f64).ceil() as usize).max(2);
    let mut out = Vec::with_capacity(n + 1);
    out.push(lo);
    for i in 0..n {
        let o = first_offset * 10f64.powf(decades * i as f64 / (n - 1) as f64);
        out.push(lo + o);
    }
    out
}

/// Solves `δ↑(−x) = x` for the unique positive root.
///
/// For derived pairs the second equality `δ↓(−x) = x` is checked against
/// [`EPS_ROOT`]; fitted pairs only report that residual.
pub fn solve_delta_min(pair: &InvolutionPair) -> Result<f64> {
    let up0 = pair.up.value(0.0);
    let down0 = pair.down.value(0.0);
    if !(up0 > 0.0 && down0 > 0.0) {
        return Err(Error::ModelViolation(format!(
            "channel is not strictly causal: δ↑(0) = {up0}, δ↓(0) = {down0}"
        )));
    }
    let h = |x: f64| pair.up.value(-x) - x;
    let dh = |x: f64| -pair.up.slope(-x) - 1.0;
    let root = roots::bisect_newton(0.0, up0, h, dh, 1e-12 * (1.0 + up0))
        .ok_or_else(|| Error::ModelViolation("δ↑(−x) − x has no sign change".into()))?;
    if h(root).abs() > 1e-9 {
        return Err(Error::ModelViolation(format!(
            "δmin residual {} too large",
            h(root)
        )));
    }
    if pair.mode == PairMode::Derived {
        let r = (pair.down.value(-root) - root).abs();
        if r > EPS_ROOT {
            return Err(Error::ModelViolation(format!(
                "δ↓(−δmin) differs from δmin by {r} fs"
            )));
        }
    }
    Ok(root)
}

/// Number of sign changes of `δ↑(−x) − x` on `samples` points over `[0, δ↑(0)]`.
pub fn delta_min_sign_changes(pair: &InvolutionPair, samples: usize) -> usize {
    let hi = pair.up.value(0.0);
    let mut prev: Option<f64> = None;
    let mut changes = 0;
    for i in 0..=samples {
        let x = hi * i as f64 / samples as f64;
        let v = pair.up.value(-x) - x;
        if v == 0.0 {
            continue;
        }
        if let Some(p) = prev {
            if p.signum() != v.signum() {
                changes += 1;
            }
        }
        prev = Some(v);
    }
    changes
}
