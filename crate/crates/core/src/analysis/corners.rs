use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::coverage::{coverage_deviation, Corridor};
use crate::analysis::samples::DelaySampleSet;
use crate::delay::InvolutionPair;
use crate::error::Result;
use crate::eta::EtaBounds;
use crate::sim::Polarity;

/// Coverage deviation of one edge of one corner under both bound sets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CornerRow {
    pub corner: String,
    pub edge: Polarity,
    #[serde(rename = "deviation_old_fs")]
    pub deviation_old: f64,
    #[serde(rename = "deviation_new_fs")]
    pub deviation_new: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CornerReport {
    pub rows: Vec<CornerRow>,
}

impl CornerReport {
    /// Mean over edges (and channels, when several sample sets share a
    /// label) per corner, in first-appearance order: `(label, old, new)`.
    pub fn aggregate(&self) -> Vec<(String, f64, f64)> {
        let mut order: Vec<String> = Vec::new();
        for r in &self.rows {
            if !order.contains(&r.corner) {
                order.push(r.corner.clone());
            }
        }
        order
            .into_iter()
            .map(|label| {
                let rows: Vec<&CornerRow> = self.rows.iter().filter(|r| r.corner == label).collect();
                let n = rows.len() as f64;
                let old = rows.iter().map(|r| r.deviation_old).sum::<f64>() / n;
                let new = rows.iter().map(|r| r.deviation_new).sum::<f64>() / n;
                (label, old, new)
            })
            .collect()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        for r in &self.rows {
            wr.serialize(r)?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: std::io::Read>(r: R) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(r);
        let rows = rd.deserialize().collect::<std::result::Result<Vec<CornerRow>, _>>()?;
        Ok(CornerReport { rows })
    }
}

/// Scores every corner's rising and falling samples against the corridors
/// of `baseline` under `old` and `new` bounds.
pub fn compare_corners(
    baseline: &InvolutionPair,
    corners: &[DelaySampleSet],
    old: &EtaBounds,
    new: &EtaBounds,
) -> Result<CornerReport> {
    let rows = corners
        .par_iter()
        .map(|set| -> Result<Vec<CornerRow>> {
            let mut out = Vec::new();
            for edge in [Polarity::Rising, Polarity::Falling] {
                let pts = set.edge(edge);
                if pts.is_empty() {
                    continue;
                }
                let center = match edge {
                    Polarity::Rising => baseline.up.clone(),
                    Polarity::Falling => baseline.down.clone(),
                };
                let d_old = coverage_deviation(&pts, &Corridor::new(center.clone(), *old))?;
                let d_new = coverage_deviation(&pts, &Corridor::new(center, *new))?;
                out.push(CornerRow {
                    corner: set.source_label.clone(),
                    edge,
                    deviation_old: d_old,
                    deviation_new: d_new,
                });
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CornerReport {
        rows: rows.into_iter().flatten().collect(),
    })
}
