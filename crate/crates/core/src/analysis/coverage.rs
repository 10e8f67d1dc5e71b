use crate::delay::DelayFunction;
use crate::error::{Error, Result};
use crate::eta::EtaBounds;

/// The band `[δ(T) − η⁻(T), δ(T) + η⁺(T)]` around a delay prediction.
#[derive(Debug, Clone, PartialEq)]
pub struct Corridor {
    pub center: DelayFunction,
    pub bounds: EtaBounds,
}

impl Corridor {
    pub fn new(center: DelayFunction, bounds: EtaBounds) -> Self {
        Corridor { center, bounds }
    }

    pub fn lower(&self, t: f64) -> f64 {
        self.center.value(t) - self.bounds.eta_minus(t)
    }

    pub fn upper(&self, t: f64) -> f64 {
        self.center.value(t) + self.bounds.eta_plus(t)
    }

    /// Distance from `delta` to the band at `t`; zero inside.
    pub fn distance(&self, t: f64, delta: f64) -> f64 {
        let lo = self.lower(t);
        let hi = self.upper(t);
        if delta < lo {
            lo - delta
        } else if delta > hi {
            delta - hi
        } else {
            0.0
        }
    }
}

/// Average distance of measured delays to `corridor` over `[min T, max T]`,
/// integrated with the trapezoidal rule on the sample grid.
///
/// `points` are `(T, δ)` pairs sorted by `T`.
pub fn coverage_deviation(points: &[(f64, f64)], corridor: &Corridor) -> Result<f64> {
    if points.len() < 2 {
        return Err(Error::invalid("coverage needs at least two samples"));
    }
    if points.windows(2).any(|w| w[1].0 < w[0].0) {
        return Err(Error::invalid("samples must be sorted by T"));
    }
    let span = points[points.len() - 1].0 - points[0].0;
    if !(span > 0.0) {
        return Err(Error::invalid("samples cover an empty T interval"));
    }
    let d: Vec<f64> = points.iter().map(|&(t, y)| corridor.distance(t, y)).collect();
    let integral: f64 = points
        .windows(2)
        .zip(d.windows(2))
        .map(|(p, d)| 0.5 * (d[0] + d[1]) * (p[1].0 - p[0].0))
        .sum();
    Ok(integral / span)
}
