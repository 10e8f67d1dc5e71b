//! Fitting, corridor scoring and characterization against measured delays.

mod corners;
mod coverage;
mod fit;
mod oracle;
mod samples;

pub use corners::{compare_corners, CornerReport, CornerRow};
pub use coverage::{coverage_deviation, Corridor};
pub use fit::{fit_edge, fit_sumexp, EdgeFit, FitResult, COND_LIMIT};
pub use oracle::{characterize, AnalogOracle, Characterization, PulseResponse};
pub use samples::{DelaySample, DelaySampleSet};
