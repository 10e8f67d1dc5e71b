//! T-dependent adversarial bounds, the pulse-train maps and the constraint
//! system that guarantees faithful short-pulse filtration.
//!
//! The bounds `η⁺(T)` and `η⁻(T)` equal their minimum values only at the two
//! arguments hit by the critical pulse train (`T = −Δ` for rising and
//! `T = −Δ′` for falling transitions) and grow linearly with slopes `ρ±` in a
//! window around them. Everywhere else the adversary may use `η±∞`.

use serde::{Deserialize, Serialize};

use crate::delay::InvolutionPair;
use crate::error::{Error, Result};
use crate::roots;

/// Residual tolerance for fixed points of `f` and `g`, in fs.
pub const EPS_FIX: f64 = 1e-6;
/// Distance kept from the ends of `(0, δmin)` by the fixed-point bracket.
pub const FIX_BRACKET_MARGIN: f64 = 1e-3;
/// Finite-difference step for `g′`, in fs.
pub const G_DIFF_STEP: f64 = 1e-3;

/// Choice of the lock threshold `Δ̄`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(try_from = "DeltaBarRepr", into = "DeltaBarRepr")]
pub enum DeltaBar {
    /// Smallest admissible value.
    #[default]
    Auto,
    Fixed(f64),
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum DeltaBarRepr {
    Value(f64),
    Tag(String),
}

impl TryFrom<DeltaBarRepr> for DeltaBar {
    type Error = String;

    fn try_from(r: DeltaBarRepr) -> std::result::Result<Self, String> {
        match r {
            DeltaBarRepr::Value(v) => Ok(DeltaBar::Fixed(v)),
            DeltaBarRepr::Tag(s) if s == "auto" => Ok(DeltaBar::Auto),
            DeltaBarRepr::Tag(s) => Err(format!("expected a number or \"auto\", got {s:?}")),
        }
    }
}

impl From<DeltaBar> for DeltaBarRepr {
    fn from(d: DeltaBar) -> Self {
        match d {
            DeltaBar::Auto => DeltaBarRepr::Tag("auto".into()),
            DeltaBar::Fixed(v) => DeltaBarRepr::Value(v),
        }
    }
}

/// User-facing adversary parameters; the derived quantities `Δ`, `Δ′` and
/// `Δ̄` are filled in by [`EtaBounds::derive`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EtaParams {
    #[serde(rename = "eta_plus_min_fs")]
    pub eta_plus_min: f64,
    #[serde(rename = "eta_minus_min_fs")]
    pub eta_minus_min: f64,
    #[serde(rename = "eta_plus_inf_fs")]
    pub eta_plus_inf: f64,
    #[serde(rename = "eta_minus_inf_fs")]
    pub eta_minus_inf: f64,
    pub rho_plus: f64,
    pub rho_minus: f64,
    #[serde(rename = "delta_bar_fs", default)]
    pub delta_bar: DeltaBar,
}

impl EtaParams {
    /// Symmetric parameters: equal minima, equal maxima, equal slopes.
    pub fn symmetric(eta_min: f64, eta_inf: f64, rho: f64) -> Self {
        EtaParams {
            eta_plus_min: eta_min,
            eta_minus_min: eta_min,
            eta_plus_inf: eta_inf,
            eta_minus_inf: eta_inf,
            rho_plus: rho,
            rho_minus: rho,
            delta_bar: DeltaBar::Auto,
        }
    }

    /// T-independent bounds `[−η⁻, η⁺]`.
    pub fn constant(eta_plus: f64, eta_minus: f64) -> Self {
        EtaParams {
            eta_plus_min: eta_plus,
            eta_minus_min: eta_minus,
            eta_plus_inf: eta_plus,
            eta_minus_inf: eta_minus,
            rho_plus: 0.0,
            rho_minus: 0.0,
            delta_bar: DeltaBar::Auto,
        }
    }

    /// Checks the ordering `η∞ ≥ ηmin ≥ 0` and finiteness. Negative slopes are
    /// reported by the constraint check instead of rejected here.
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.eta_plus_min,
            self.eta_minus_min,
            self.eta_plus_inf,
            self.eta_minus_inf,
            self.rho_plus,
            self.rho_minus,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("eta parameters must be finite"));
        }
        if self.eta_plus_min < 0.0 || self.eta_minus_min < 0.0 {
            return Err(Error::invalid("minimum eta values must be non-negative"));
        }
        if self.eta_plus_inf < self.eta_plus_min || self.eta_minus_inf < self.eta_minus_min {
            return Err(Error::invalid("eta_inf must not be below eta_min"));
        }
        if let DeltaBar::Fixed(v) = self.delta_bar {
            if !v.is_finite() {
                return Err(Error::invalid("delta_bar must be finite"));
            }
        }
        Ok(())
    }

    fn is_constant(&self) -> bool {
        self.rho_plus == 0.0
            && self.rho_minus == 0.0
            && self.eta_plus_inf == self.eta_plus_min
            && self.eta_minus_inf == self.eta_minus_min
    }
}

/// Fully resolved adversary envelope.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EtaBounds {
    #[serde(rename = "eta_plus_min_fs")]
    pub eta_plus_min: f64,
    #[serde(rename = "eta_minus_min_fs")]
    pub eta_minus_min: f64,
    #[serde(rename = "eta_plus_inf_fs")]
    pub eta_plus_inf: f64,
    #[serde(rename = "eta_minus_inf_fs")]
    pub eta_minus_inf: f64,
    pub rho_plus: f64,
    pub rho_minus: f64,
    #[serde(rename = "delta_fs")]
    pub delta: f64,
    #[serde(rename = "delta_prime_fs")]
    pub delta_prime: f64,
    #[serde(rename = "delta_bar_fs")]
    pub delta_bar: f64,
}

impl EtaBounds {
    /// Resolves `Δ`, `Δ′` and `Δ̄` for `pair`.
    ///
    /// Constant parameters need no critical train and resolve with
    /// `Δ = Δ′ = Δ̄ = 0`, which makes every branch evaluate to the same value.
    pub fn derive(pair: &InvolutionPair, params: &EtaParams) -> Result<Self> {
        params.validate()?;
        if params.is_constant() {
            return Ok(Self::constant(params.eta_plus_min, params.eta_minus_min));
        }
        let delta = fixed_point_of_f(pair, params.eta_plus_min, params.eta_minus_min)?;
        let delta_prime = -rising_gap(pair, delta, params.eta_plus_min);
        let smallest = smallest_delta_bar(pair, delta, params.eta_plus_min, params.rho_plus)?;
        let delta_bar = match params.delta_bar {
            DeltaBar::Auto => smallest,
            DeltaBar::Fixed(v) if v >= delta => v,
            DeltaBar::Fixed(v) => {
                return Err(Error::invalid(format!(
                    "delta_bar = {v} fs is below the fixed point Δ = {delta} fs"
                )))
            }
        };
        Ok(EtaBounds {
            eta_plus_min: params.eta_plus_min,
            eta_minus_min: params.eta_minus_min,
            eta_plus_inf: params.eta_plus_inf,
            eta_minus_inf: params.eta_minus_inf,
            rho_plus: params.rho_plus,
            rho_minus: params.rho_minus,
            delta,
            delta_prime,
            delta_bar,
        })
    }

    /// Constant bounds `η⁺(T) ≡ plus`, `η⁻(T) ≡ minus`.
    pub fn constant(plus: f64, minus: f64) -> Self {
        EtaBounds {
            eta_plus_min: plus,
            eta_minus_min: minus,
            eta_plus_inf: plus,
            eta_minus_inf: minus,
            rho_plus: 0.0,
            rho_minus: 0.0,
            delta: 0.0,
            delta_prime: 0.0,
            delta_bar: 0.0,
        }
    }

    /// The parameters these bounds were resolved from, with `Δ̄` pinned.
    pub fn params(&self) -> EtaParams {
        EtaParams {
            eta_plus_min: self.eta_plus_min,
            eta_minus_min: self.eta_minus_min,
            eta_plus_inf: self.eta_plus_inf,
            eta_minus_inf: self.eta_minus_inf,
            rho_plus: self.rho_plus,
            rho_minus: self.rho_minus,
            delta_bar: DeltaBar::Fixed(self.delta_bar),
        }
    }

    /// The constant bounds a classic η-IDM would use: `[−η⁻min, η⁺min]`.
    pub fn collapsed(&self) -> Self {
        Self::constant(self.eta_plus_min, self.eta_minus_min)
    }

    /// Upper bound on rising-transition variation.
    pub fn eta_plus(&self, t: f64) -> f64 {
        if t < -self.delta_bar || t > -self.delta {
            self.eta_plus_inf
        } else {
            self.rho_plus * (-t - self.delta) + self.eta_plus_min
        }
    }

    /// Upper bound on falling-transition speed-up.
    pub fn eta_minus(&self, t: f64) -> f64 {
        if t < -self.delta_prime || t >= 0.0 {
            self.eta_minus_inf
        } else {
            self.rho_minus * (t + self.delta_prime) + self.eta_minus_min
        }
    }

    /// `sup_T η⁺(T)`.
    pub fn sup_plus(&self) -> f64 {
        self.eta_plus_inf
            .max(self.rho_plus * (self.delta_bar - self.delta) + self.eta_plus_min)
    }

    /// `sup_T η⁻(T)`.
    pub fn sup_minus(&self) -> f64 {
        self.eta_minus_inf
            .max(self.rho_minus * self.delta_prime + self.eta_minus_min)
    }
}

/// `x − δ↑(−x) − η`: the `T` seen by the falling edge of an up-pulse of
/// length `x` whose rising edge was delayed by `η`.
fn rising_gap(pair: &InvolutionPair, x: f64, eta: f64) -> f64 {
    x - pair.eval_up(-x) - eta
}

/// Pulse-length recurrence under constant bounds.
pub fn f_map(pair: &InvolutionPair, b: &EtaBounds, x: f64) -> f64 {
    let a = rising_gap(pair, x, b.eta_plus_min);
    a + pair.eval_down(a) - b.eta_minus_min
}

/// Pulse-length recurrence under the T-dependent bounds.
pub fn g_map(pair: &InvolutionPair, b: &EtaBounds, x: f64) -> f64 {
    let a = rising_gap(pair, x, b.eta_plus(-x));
    a + pair.eval_down(a) - b.eta_minus(a)
}

fn fixed_point_of_f(pair: &InvolutionPair, eta_plus_min: f64, eta_minus_min: f64) -> Result<f64> {
    let dmin = pair.delta_min();
    let h = |x: f64| {
        let a = rising_gap(pair, x, eta_plus_min);
        a + pair.eval_down(a) - eta_minus_min - x
    };
    let lo = FIX_BRACKET_MARGIN;
    let hi = dmin - FIX_BRACKET_MARGIN;
    if !(hi > lo) {
        return Err(Error::NoCriticalTrain(format!("δmin = {dmin} fs is too small")));
    }
    let root = roots::bisect(lo, hi, h, 0.0, 200).ok_or_else(|| {
        Error::NoCriticalTrain(format!(
            "f(x) − x has no sign change on ({lo}, {hi}); constraint C1 may be violated"
        ))
    })?;
    let r = h(root);
    if r.abs() > EPS_FIX {
        return Err(Error::NoCriticalTrain(format!(
            "fixed-point residual {r} fs exceeds tolerance"
        )));
    }
    Ok(root)
}

/// Smallest `x ≥ Δ` with `x − δ↑(−x) − ρ⁺(x − Δ) − η⁺min ≥ 0`.
fn smallest_delta_bar(pair: &InvolutionPair, delta: f64, eta_plus_min: f64, rho_plus: f64) -> Result<f64> {
    let cond = |x: f64| x - pair.eval_up(-x) - rho_plus * (x - delta) - eta_plus_min;
    if cond(delta) >= 0.0 {
        return Ok(delta);
    }
    let mut hi = delta.max(1.0);
    let mut step = hi;
    while cond(hi) < 0.0 {
        hi += step;
        step *= 2.0;
        if hi > 1e15 {
            return Err(Error::ModelViolation(
                "no finite Δ̄ satisfies the lock condition (ρ⁺ too large)".into(),
            ));
        }
    }
    roots::bisect(delta, hi, cond, 0.0, 200)
        .ok_or_else(|| Error::ModelViolation("Δ̄ bisection failed".into()))
}

/// Fixed point of the critical pulse train and its period.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FixedPoint {
    #[serde(rename = "delta_fs")]
    pub delta: f64,
    #[serde(rename = "delta_prime_fs")]
    pub delta_prime: f64,
    #[serde(rename = "tau_fs")]
    pub tau: f64,
    pub gamma: f64,
    #[serde(rename = "f_residual_fs")]
    pub f_residual: f64,
    #[serde(rename = "g_residual_fs")]
    pub g_residual: f64,
}

/// Solves `f(Δ) = Δ` on `(0, δmin)` and derives period and duty cycle.
///
/// Besides the fixed point of `f`, this checks `g(Δ) = Δ`, `Δ′ = τ − Δ` and
/// the admissible window for `τ`.
pub fn solve_fixed_point(pair: &InvolutionPair, b: &EtaBounds) -> Result<FixedPoint> {
    let delta = fixed_point_of_f(pair, b.eta_plus_min, b.eta_minus_min)?;
    let tau = pair.eval_up(-delta) + b.eta_plus_min;
    let f_residual = (f_map(pair, b, delta) - delta).abs();
    let g_residual = (g_map(pair, b, delta) - delta).abs();
    if g_residual > EPS_FIX {
        return Err(Error::ModelViolation(format!(
            "g(Δ) − Δ = {g_residual} fs; the bounds were resolved for a different Δ"
        )));
    }
    let delta_prime = tau - delta;
    let lo = b.eta_plus_min + pair.delta_min();
    let hi = (-b.eta_minus_min + pair.down_inf()).min(b.eta_plus_min + pair.up_inf());
    if !(lo < tau && tau < hi) {
        return Err(Error::ModelViolation(format!(
            "period τ = {tau} fs outside ({lo}, {hi})"
        )));
    }
    Ok(FixedPoint {
        delta,
        delta_prime,
        tau,
        gamma: delta / tau,
        f_residual,
        g_residual,
    })
}

/// One inequality of the constraint system: `holds` iff `lhs` relates to
/// `rhs` as required (`<`, `≥` or `>` depending on the constraint).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Check {
    pub holds: bool,
    pub lhs: f64,
    pub rhs: f64,
}

impl Check {
    fn less(lhs: f64, rhs: f64) -> Self {
        Check { holds: lhs < rhs, lhs, rhs }
    }

    fn greater(lhs: f64, rhs: f64) -> Self {
        Check { holds: lhs > rhs, lhs, rhs }
    }

    fn at_least(lhs: f64, rhs: f64) -> Self {
        Check { holds: lhs >= rhs, lhs, rhs }
    }

    fn undefined() -> Self {
        Check { holds: false, lhs: f64::NAN, rhs: f64::NAN }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConstraintReport {
    pub c1: Check,
    pub c2: Check,
    pub c3: Check,
    pub c4: Check,
    pub delta_bar_condition: Check,
    #[serde(rename = "delta_min_fs")]
    pub delta_min: f64,
    #[serde(rename = "delta_fs")]
    pub delta: Option<f64>,
    #[serde(rename = "delta_prime_fs")]
    pub delta_prime: Option<f64>,
    #[serde(rename = "delta_bar_fs")]
    pub delta_bar: Option<f64>,
    #[serde(rename = "tau_fs")]
    pub tau: Option<f64>,
    pub gamma: Option<f64>,
    /// Why the critical train could not be resolved, if it could not.
    pub note: Option<String>,
}

impl ConstraintReport {
    pub fn all_hold(&self) -> bool {
        self.c1.holds
            && self.c2.holds
            && self.c3.holds
            && self.c4.holds
            && self.delta_bar_condition.holds
    }

    /// Rows `(name, check)` in a fixed order, for tabular output.
    pub fn rows(&self) -> [(&'static str, Check); 5] {
        [
            ("C1", self.c1),
            ("C2", self.c2),
            ("C3", self.c3),
            ("C4", self.c4),
            ("delta_bar", self.delta_bar_condition),
        ]
    }
}

/// Evaluates C1–C4 and the lock-threshold inequality.
///
/// Never fails: quantities that depend on the critical train are reported as
/// undefined when the train does not exist.
pub fn check_constraints(pair: &InvolutionPair, params: &EtaParams) -> ConstraintReport {
    let dmin = pair.delta_min();
    let c1 = Check::less(
        params.eta_plus_min + params.eta_minus_min,
        pair.eval_down(-params.eta_plus_min) - dmin,
    );
    let c2 = Check::at_least(params.rho_plus.min(params.rho_minus), 0.0);
    let c3 = Check::less(params.eta_plus_inf + params.eta_minus_inf, pair.up_inf() - dmin);

    let resolved = EtaBounds::derive(pair, params)
        .and_then(|b| solve_fixed_point(pair, &b).map(|fp| (b, fp)));
    match resolved {
        Ok((b, fp)) => {
            let c4 = Check::greater(
                (1.0 - b.rho_minus) * (pair.up.slope(-b.delta) - b.rho_plus + 1.0),
                1.0,
            );
            let bar = Check::at_least(
                b.delta_bar,
                pair.eval_up(-b.delta_bar) + b.rho_plus * (b.delta_bar - b.delta) + b.eta_plus_min,
            );
            ConstraintReport {
                c1,
                c2,
                c3,
                c4,
                delta_bar_condition: bar,
                delta_min: dmin,
                delta: Some(b.delta),
                delta_prime: Some(b.delta_prime),
                delta_bar: Some(b.delta_bar),
                tau: Some(fp.tau),
                gamma: Some(fp.gamma),
                note: None,
            }
        }
        Err(e) => ConstraintReport {
            c1,
            c2,
            c3,
            c4: Check::undefined(),
            delta_bar_condition: Check::undefined(),
            delta_min: dmin,
            delta: None,
            delta_prime: None,
            delta_bar: None,
            tau: None,
            gamma: None,
            note: Some(e.to_string()),
        },
    }
}

/// Exact `g′(x)` on the linear branches of both bounds.
pub fn g_derivative(pair: &InvolutionPair, b: &EtaBounds, x: f64) -> f64 {
    let a = rising_gap(pair, x, b.eta_plus(-x));
    (1.0 + pair.up.slope(-x) - b.rho_plus) * (1.0 + pair.down.slope(a) - b.rho_minus)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GDerivativeReport {
    pub grid: Vec<f64>,
    pub finite_difference: Vec<f64>,
    pub analytic: Vec<f64>,
    pub min_finite_difference: f64,
    /// `(1 − ρ⁻)(δ↑′(−Δ) − ρ⁺ + 1)`.
    pub lower_bound: f64,
    /// Largest relative disagreement between the two derivative estimates.
    pub max_relative_mismatch: f64,
}

impl GDerivativeReport {
    pub fn holds(&self, tol: f64) -> bool {
        self.min_finite_difference > 1.0 && self.min_finite_difference >= self.lower_bound - tol
    }
}

/// Estimates `g′` on `points` equally spaced arguments in `[Δ, Δ̄]`.
///
/// `g` jumps at `Δ` (where `η⁺(−x)` leaves its linear branch) and where the
/// falling-edge argument reaches zero, so the grid stops `2h` short of the
/// latter and the leftmost point uses a forward difference.
pub fn g_derivative_check(pair: &InvolutionPair, b: &EtaBounds, points: usize) -> Result<GDerivativeReport> {
    let h = G_DIFF_STEP;
    let lock = smallest_delta_bar(pair, b.delta, b.eta_plus_min, b.rho_plus)?;
    let hi = b.delta_bar.min(lock) - 2.0 * h;
    if !(hi > b.delta) || points < 2 {
        return Err(Error::invalid("derivative grid is empty"));
    }
    let grid: Vec<f64> = (0..points)
        .map(|i| b.delta + (hi - b.delta) * i as f64 / (points - 1) as f64)
        .collect();
    let g = |x: f64| g_map(pair, b, x);
    let fd: Vec<f64> = grid
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            if i == 0 {
                (g(x + h) - g(x)) / h
            } else {
                (g(x + h) - g(x - h)) / (2.0 * h)
            }
        })
        .collect();
    let analytic: Vec<f64> = grid.iter().map(|&x| g_derivative(pair, b, x)).collect();
    let mismatch = fd
        .iter()
        .zip(&analytic)
        .map(|(a, b)| ((a - b) / b).abs())
        .fold(0.0, f64::max);
    Ok(GDerivativeReport {
        min_finite_difference: fd.iter().copied().fold(f64::INFINITY, f64::min),
        lower_bound: (1.0 - b.rho_minus) * (pair.up.slope(-b.delta) - b.rho_plus + 1.0),
        max_relative_mismatch: mismatch,
        grid,
        finite_difference: fd,
        analytic,
    })
}

/// Iterates `g` from `x0` until the pulse length reaches `Δ̄`.
///
/// Returns the visited pulse lengths including `x0` and the first value
/// `≥ Δ̄`, or `None` if `max_steps` iterations are not enough.
pub fn escape_sequence(pair: &InvolutionPair, b: &EtaBounds, x0: f64, max_steps: usize) -> Option<Vec<f64>> {
    let mut seq = vec![x0];
    let mut x = x0;
    for _ in 0..max_steps {
        if x >= b.delta_bar {
            return Some(seq);
        }
        x = g_map(pair, b, x);
        if !x.is_finite() {
            return None;
        }
        seq.push(x);
    }
    (x >= b.delta_bar).then_some(seq)
}

/// Inputs for sizing the high-threshold buffer channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HtbSizing {
    /// Longest `o_or` up-time that must be filtered.
    pub theta: f64,
    /// Shifts of the feedback channel into `i2`.
    pub loop_shift_plus: f64,
    pub loop_shift_minus: f64,
    /// Falling-edge shift of the buffer channel.
    pub shift_minus: f64,
    pub margin: f64,
}

/// Returns `(Δ⁺htb, Δ⁻htb)` with the smallest `Δ⁺htb` that cancels every
/// `o_or` pulse of up-time at most `Θ`, plus `margin`.
///
/// `base` is the unshifted pair of the buffer channel; it constrains
/// `Δ⁻htb` through strict causality of the shifted channel.
pub fn htb_parameters(
    b_loop: &EtaBounds,
    b_buf: &EtaBounds,
    base: &InvolutionPair,
    s: &HtbSizing,
) -> Result<(f64, f64)> {
    if !(s.theta >= b_loop.delta_bar) {
        return Err(Error::invalid(format!(
            "Θ = {} fs must be at least Δ̄ = {} fs",
            s.theta, b_loop.delta_bar
        )));
    }
    if !(s.margin >= 0.0) {
        return Err(Error::invalid("margin must be non-negative"));
    }
    let theta_prime =
        s.theta + s.loop_shift_plus + b_loop.sup_plus() + b_loop.sup_minus() - s.loop_shift_minus;
    let plus = theta_prime + s.shift_minus + b_buf.sup_plus() + b_buf.sup_minus() + s.margin;
    let minus = s.shift_minus;
    if !(minus + base.eval_down(minus) > 0.0) {
        return Err(Error::Infeasible(format!(
            "Δ⁻htb = {minus} fs violates strict causality (δ↓(0) ≤ 0)"
        )));
    }
    if !(plus + base.eval_up(plus) > 0.0) {
        return Err(Error::Infeasible(format!(
            "Δ⁺htb = {plus} fs violates strict causality (δ↑(0) ≤ 0)"
        )));
    }
    Ok((plus, minus))
}
