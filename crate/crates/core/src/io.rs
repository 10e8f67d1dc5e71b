//! File formats: channel and η parameter JSON, netlist and SPF configuration
//! JSON, and the trace and delay-sample CSV files.
//!
//! Paths inside JSON files are resolved relative to the directory of the
//! file that mentions them.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::analysis::{DelaySample, DelaySampleSet};
use crate::delay::{solve_delta_min, DelayFunction, ExpTerm, Family, InvolutionPair, PairMode, Shape};
use crate::error::{Error, Result};
use crate::eta::{EtaBounds, EtaParams};
use crate::sim::{make_cidm_channel, ChannelKind, ChannelModel, GateFunction, Netlist, Transition};
use crate::spf::SpfConfig;

/// Relative tolerance when checking a stored `delta_min_fs`.
const DELTA_MIN_CHECK: f64 = 1e-6;

/// One delay function as stored on disk. Exp functions use `tau_fs` and
/// `shift_fs`, SumExp functions use `terms`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionSpec {
    pub delta_inf_fs: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau_fs: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shift_fs: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub terms: Option<Vec<ExpTerm>>,
}

impl FunctionSpec {
    fn from_function(f: &DelayFunction) -> Result<Self> {
        match f.shape() {
            Shape::Exp { tau, shift } => Ok(FunctionSpec {
                delta_inf_fs: f.delta_inf(),
                tau_fs: Some(*tau),
                shift_fs: Some(*shift),
                terms: None,
            }),
            Shape::SumExp { terms } => Ok(FunctionSpec {
                delta_inf_fs: f.delta_inf(),
                tau_fs: None,
                shift_fs: None,
                terms: Some(terms.clone()),
            }),
            _ => Err(Error::invalid(
                "only plain exp and sumexp functions can be written to a channel file",
            )),
        }
    }

    fn to_function(&self, family: Family) -> Result<DelayFunction> {
        match family {
            Family::Exp => {
                let (Some(tau), Some(shift)) = (self.tau_fs, self.shift_fs) else {
                    return Err(Error::Parse("exp function needs tau_fs and shift_fs".into()));
                };
                DelayFunction::exp(self.delta_inf_fs, tau, shift)
            }
            Family::SumExp => {
                let terms = self
                    .terms
                    .clone()
                    .ok_or_else(|| Error::Parse("sumexp function needs terms".into()))?;
                DelayFunction::sum_exp(self.delta_inf_fs, terms)
            }
        }
    }
}

/// Channel parameter file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelFile {
    pub family: Family,
    pub mode: PairMode,
    pub up: FunctionSpec,
    /// Ignored for derived pairs on read; written as `null` when the derived
    /// partner has no closed form.
    #[serde(default)]
    pub down: Option<FunctionSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_min_fs: Option<f64>,
}

impl ChannelFile {
    pub fn from_pair(pair: &InvolutionPair) -> Result<Self> {
        let down = match (pair.mode, pair.down.shape()) {
            (PairMode::Derived, Shape::Inverse(_)) => None,
            _ => Some(FunctionSpec::from_function(&pair.down)?),
        };
        Ok(ChannelFile {
            family: pair.family(),
            mode: pair.mode,
            up: FunctionSpec::from_function(&pair.up)?,
            down,
            delta_min_fs: Some(pair.delta_min()),
        })
    }

    pub fn to_pair(&self) -> Result<InvolutionPair> {
        let up = self.up.to_function(self.family)?;
        let pair = match self.mode {
            PairMode::Derived => InvolutionPair::derived(up)?,
            PairMode::Fitted => {
                let down = self
                    .down
                    .as_ref()
                    .ok_or_else(|| Error::Parse("fitted channel needs a down function".into()))?;
                InvolutionPair::fitted(up, down.to_function(self.family)?)?
            }
        };
        if let Some(stored) = self.delta_min_fs {
            let dm = solve_delta_min(&pair)?;
            if (dm - stored).abs() > DELTA_MIN_CHECK * stored.abs().max(1.0) {
                return Err(Error::ModelViolation(format!(
                    "stored delta_min_fs {stored} does not match the computed {dm}"
                )));
            }
        }
        Ok(pair)
    }
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    serde_json::from_reader(open(path)?)
        .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn read_channel(path: &Path) -> Result<InvolutionPair> {
    read_json::<ChannelFile>(path)?.to_pair()
}

pub fn write_channel(path: &Path, pair: &InvolutionPair) -> Result<()> {
    write_json(path, &ChannelFile::from_pair(pair)?)
}

pub fn read_eta_params(path: &Path) -> Result<EtaParams> {
    let p: EtaParams = read_json(path)?;
    p.validate()?;
    Ok(p)
}

pub fn read_transitions_from<R: Read>(r: R) -> Result<Vec<Transition>> {
    let mut rd = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
    let headers = rd.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != ["time_fs", "signal", "polarity"] {
        return Err(Error::Parse(format!(
            "expected header time_fs,signal,polarity, found {}",
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let v = rd.deserialize().collect::<std::result::Result<Vec<Transition>, _>>()?;
    if let Some(t) = v.iter().find(|t| !t.time.is_finite()) {
        return Err(Error::Parse(format!("non-finite time for signal {}", t.signal)));
    }
    Ok(v)
}

pub fn read_transitions(path: &Path) -> Result<Vec<Transition>> {
    read_transitions_from(open(path)?)
}

pub fn write_transitions_to<W: Write>(w: W, trace: &[Transition]) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    if trace.is_empty() {
        wr.write_record(["time_fs", "signal", "polarity"])?;
    }
    for t in trace {
        wr.serialize(t)?;
    }
    wr.flush()?;
    Ok(())
}

pub fn write_transitions(path: &Path, trace: &[Transition]) -> Result<()> {
    write_transitions_to(create(path)?, trace)
}

pub fn read_samples_from<R: Read>(r: R, label: &str) -> Result<DelaySampleSet> {
    let mut rd = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
    let v = rd.deserialize().collect::<std::result::Result<Vec<DelaySample>, _>>()?;
    DelaySampleSet::new(label, v)
}

/// Reads a sample file; the label defaults to the file stem.
pub fn read_samples(path: &Path, label: Option<&str>) -> Result<DelaySampleSet> {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    read_samples_from(open(path)?, label.unwrap_or(&stem))
}

pub fn write_samples_to<W: Write>(w: W, set: &DelaySampleSet) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    if set.is_empty() {
        wr.write_record(["T_fs", "delta_fs", "edge"])?;
    }
    for s in &set.samples {
        wr.serialize(s)?;
    }
    wr.flush()?;
    Ok(())
}

pub fn write_samples(path: &Path, set: &DelaySampleSet) -> Result<()> {
    write_samples_to(create(path)?, set)
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn base_dir(path: &Path) -> PathBuf {
    path.parent().map(Path::to_path_buf).unwrap_or_default()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SignalSpec {
    pub name: String,
    #[serde(default)]
    pub initial: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GateSpec {
    pub name: String,
    pub function: GateFunction,
    pub inputs: Vec<String>,
    pub output: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSpec {
    pub name: String,
    pub from: String,
    pub to: String,
    pub kind: ChannelKind,
    /// Channel parameter file.
    pub channel: PathBuf,
    /// η parameter file; required for `eta_idm` and `cidm`.
    #[serde(default)]
    pub eta: Option<PathBuf>,
    #[serde(default)]
    pub shift_plus_fs: f64,
    #[serde(default)]
    pub shift_minus_fs: f64,
}

/// Netlist file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetlistFile {
    pub signals: Vec<SignalSpec>,
    #[serde(default)]
    pub gates: Vec<GateSpec>,
    #[serde(default)]
    pub channels: Vec<ChannelSpec>,
    #[serde(default)]
    pub monitors: Vec<String>,
}

impl NetlistFile {
    /// Builds the netlist, loading parameter files relative to `base`.
    pub fn build(&self, base: &Path) -> Result<Netlist> {
        let mut n = Netlist::new();
        for s in &self.signals {
            n.add_signal(&s.name, s.initial)?;
        }
        let id = |n: &Netlist, name: &str| {
            n.signal_id(name)
                .ok_or_else(|| Error::Parse(format!("unknown signal {name:?}")))
        };
        for g in &self.gates {
            let inputs = g.inputs.iter().map(|s| id(&n, s)).collect::<Result<Vec<_>>>()?;
            let out = id(&n, &g.output)?;
            n.add_gate(&g.name, g.function, &inputs, out)?;
        }
        for c in &self.channels {
            let pair = read_channel(&resolve(base, &c.channel))?;
            let bounds = match &c.eta {
                Some(p) => Some(read_eta_params(&resolve(base, p))?),
                None => None,
            };
            let need = || {
                bounds.ok_or_else(|| Error::Parse(format!("channel {:?} needs an eta file", c.name)))
            };
            let model = match c.kind {
                ChannelKind::Idm => ChannelModel::Idm {
                    pair: pair.with_shifts(c.shift_plus_fs, c.shift_minus_fs)?,
                },
                ChannelKind::EtaIdm => {
                    let pair = pair.with_shifts(c.shift_plus_fs, c.shift_minus_fs)?;
                    let bounds = EtaBounds::derive(&pair, &need()?)?;
                    ChannelModel::EtaIdm { pair, bounds }
                }
                ChannelKind::Cidm => {
                    let shifted = pair.with_shifts(c.shift_plus_fs, c.shift_minus_fs)?;
                    let bounds = EtaBounds::derive(&shifted, &need()?)?;
                    make_cidm_channel(pair, c.shift_plus_fs, c.shift_minus_fs, bounds)?
                }
            };
            let (from, to) = (id(&n, &c.from)?, id(&n, &c.to)?);
            n.add_channel(&c.name, from, to, model)?;
        }
        for m in &self.monitors {
            let s = id(&n, m)?;
            n.add_monitor(s)?;
        }
        n.validate()?;
        Ok(n)
    }
}

pub fn read_netlist(path: &Path) -> Result<Netlist> {
    read_json::<NetlistFile>(path)?.build(&base_dir(path))
}

/// SPF circuit configuration file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpfFile {
    pub channel: PathBuf,
    pub eta: PathBuf,
    #[serde(default)]
    pub loop_shift_plus_fs: f64,
    #[serde(default)]
    pub loop_shift_minus_fs: f64,
    /// Constant bounds of the buffer and output channels; default to the
    /// loop's `η∞` values.
    #[serde(default)]
    pub buffer_eta_plus_fs: Option<f64>,
    #[serde(default)]
    pub buffer_eta_minus_fs: Option<f64>,
    #[serde(default)]
    pub htb_shift_minus_fs: f64,
    #[serde(default)]
    pub htb_margin_fs: Option<f64>,
    #[serde(default)]
    pub theta_fs: Option<f64>,
    #[serde(default)]
    pub event_cap: Option<usize>,
}

impl SpfFile {
    pub fn build(&self, base: &Path) -> Result<SpfConfig> {
        let pair = read_channel(&resolve(base, &self.channel))?;
        let params = read_eta_params(&resolve(base, &self.eta))?;
        let mut c = SpfConfig::new(pair, params);
        c.loop_shift_plus = self.loop_shift_plus_fs;
        c.loop_shift_minus = self.loop_shift_minus_fs;
        if let Some(v) = self.buffer_eta_plus_fs {
            c.buffer_eta_plus = v;
        }
        if let Some(v) = self.buffer_eta_minus_fs {
            c.buffer_eta_minus = v;
        }
        c.htb_shift_minus = self.htb_shift_minus_fs;
        if let Some(v) = self.htb_margin_fs {
            c.htb_margin = v;
        }
        c.theta = self.theta_fs;
        if let Some(v) = self.event_cap {
            c.event_cap = v;
        }
        Ok(c)
    }
}

pub fn read_spf_config(path: &Path) -> Result<SpfConfig> {
    read_json::<SpfFile>(path)?.build(&base_dir(path))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derived_sumexp_writes_null_down() {
        let up = DelayFunction::sum_exp(900.0, vec![ExpTerm { amplitude: 300.0, rate: 0.004 }]).unwrap();
        let pair = InvolutionPair::derived(up).unwrap();
        let file = ChannelFile::from_pair(&pair).unwrap();
        assert!(file.down.is_none());
        let json = serde_json::to_string(&file).unwrap();
        assert!(json.contains("\"down\":null"));
        let back: ChannelFile = serde_json::from_str(&json).unwrap();
        assert_eq!(back.to_pair().unwrap(), pair);
    }

    #[test]
    fn wrong_delta_min_is_rejected() {
        let pair = InvolutionPair::symmetric_exp(1000.0, 300.0).unwrap();
        let mut file = ChannelFile::from_pair(&pair).unwrap();
        file.delta_min_fs = Some(file.delta_min_fs.unwrap() + 1.0);
        assert!(matches!(file.to_pair(), Err(Error::ModelViolation(_))));
    }

    #[test]
    fn transition_header_is_checked() {
        let bad = "t,signal,polarity\n1,a,R\n";
        assert!(read_transitions_from(bad.as_bytes()).is_err());
        let good = "time_fs,signal,polarity\n1.5,a,R\n";
        assert_eq!(read_transitions_from(good.as_bytes()).unwrap().len(), 1);
    }
}
