use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::Polarity;

/// One measured delay: the edge at `T` took `delta` to propagate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DelaySample {
    #[serde(rename = "T_fs")]
    pub t: f64,
    #[serde(rename = "delta_fs")]
    pub delta: f64,
    pub edge: Polarity,
}

/// Measured `(T, δ)` pairs of both edges for one operating condition.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DelaySampleSet {
    pub samples: Vec<DelaySample>,
    pub source_label: String,
}

impl DelaySampleSet {
    pub fn new(source_label: impl Into<String>, samples: Vec<DelaySample>) -> Result<Self> {
        if let Some(s) = samples.iter().find(|s| !(s.t.is_finite() && s.delta.is_finite())) {
            return Err(Error::invalid(format!("non-finite sample at T = {} fs", s.t)));
        }
        let mut set = DelaySampleSet {
            samples,
            source_label: source_label.into(),
        };
        set.normalize();
        Ok(set)
    }

    /// Sorts by `(edge, T)` and keeps the first sample of every repeated
    /// `(edge, T)`.
    pub fn normalize(&mut self) {
        self.samples
            .sort_by(|a, b| a.edge.cmp(&b.edge).then(a.t.total_cmp(&b.t)));
        self.samples.dedup_by(|b, a| a.edge == b.edge && a.t == b.t);
    }

    /// `(T, δ)` of one edge, sorted by `T`.
    pub fn edge(&self, edge: Polarity) -> Vec<(f64, f64)> {
        self.samples
            .iter()
            .filter(|s| s.edge == edge)
            .map(|s| (s.t, s.delta))
            .collect()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    /// Builds a set from two functions sampled on the same `T` grid.
    pub fn from_functions(
        label: impl Into<String>,
        grid: &[f64],
        up: impl Fn(f64) -> f64,
        down: impl Fn(f64) -> f64,
    ) -> Result<Self> {
        let mut v = Vec::with_capacity(2 * grid.len());
        for &t in grid {
            v.push(DelaySample { t, delta: up(t), edge: Polarity::Rising });
            v.push(DelaySample { t, delta: down(t), edge: Polarity::Falling });
        }
        Self::new(label, v)
    }

    /// Applies `f(edge, T, δ)` to every delay value.
    pub fn map_delays(&self, label: impl Into<String>, f: impl Fn(Polarity, f64, f64) -> f64) -> Result<Self> {
        let v = self
            .samples
            .iter()
            .map(|s| DelaySample {
                delta: f(s.edge, s.t, s.delta),
                ..*s
            })
            .collect();
        Self::new(label, v)
    }
}
