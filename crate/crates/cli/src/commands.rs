use std::path::{Path, PathBuf};

use clap::Args;
use serde::Serialize;
use serde_json::json;

use etaidm::analysis::{
    characterize, compare_corners, coverage_deviation, fit_sumexp, AnalogOracle, Corridor, DelaySampleSet,
};
use etaidm::config::Tolerances;
use etaidm::delay::InvolutionPair;
use etaidm::eta::{check_constraints, solve_fixed_point, EtaBounds};
use etaidm::io;
use etaidm::plot::{corner_bar_chart, corridor_svg};
use etaidm::sim::{run, AdversaryStrategy, Polarity, RunOptions, RunStatus};
use etaidm::spf::{log_grid, regime_report, SpfClass, SpfSetup, Variant};
use etaidm::units::parse_time;
use etaidm::Error;

use crate::{Cli, Command, Global};

pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Failure { code: 2, message: message.into() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Io(_) | Error::Parse(_) | Error::Json(_) | Error::Csv(_) | Error::InvalidArgument(_) => 2,
            _ => 1,
        };
        Failure { code, message: e.to_string() }
    }
}

type CmdResult = Result<u8, Failure>;

struct Ctx<'a> {
    global: &'a Global,
    tolerances: Tolerances,
}

impl Ctx<'_> {
    fn out(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.global.out_dir.join(p)
        }
    }

    /// Random streams are derived from the global seed so that one flag
    /// fixes every random choice of a run.
    fn adversary(&self, token: &str) -> Result<AdversaryStrategy, Failure> {
        let token = token.trim();
        if token == "random" {
            return Ok(AdversaryStrategy::UniformRandom(mix(self.global.seed, 0)));
        }
        match token.parse::<AdversaryStrategy>()? {
            AdversaryStrategy::UniformRandom(n) => Ok(AdversaryStrategy::UniformRandom(mix(self.global.seed, n))),
            a => Ok(a),
        }
    }
}

fn mix(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn dispatch(cli: &Cli) -> CmdResult {
    let tolerances = match &cli.global.tolerance_overrides {
        Some(p) => Tolerances::load(p)?,
        None => Tolerances::default(),
    };
    let ctx = Ctx { global: &cli.global, tolerances };
    match &cli.command {
        Command::Check(a) => check(&ctx, a),
        Command::Simulate(a) => simulate(&ctx, a),
        Command::SpfSweep(a) => spf_sweep(&ctx, a),
        Command::Fit(a) => fit(&ctx, a),
        Command::Coverage(a) => coverage(&ctx, a),
        Command::Characterize(a) => characterize_cmd(&ctx, a),
        Command::CompareCorners(a) => compare(&ctx, a),
        Command::Plot(a) => plot(&ctx, a),
    }
}

fn write_text(path: &Path, text: &str) -> Result<(), Failure> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(Error::from)?;
    }
    std::fs::write(path, text).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

fn to_json<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("serializable")
}

fn parse_edges(s: &str) -> Result<Vec<Polarity>, Failure> {
    match s {
        "both" => Ok(vec![Polarity::Rising, Polarity::Falling]),
        other => Ok(vec![other.parse::<Polarity>()?]),
    }
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    /// Channel parameter file.
    #[arg(long)]
    pub channel: PathBuf,
    /// Eta parameter file.
    #[arg(long)]
    pub eta: PathBuf,
    /// Also write the JSON report to this file.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn check(ctx: &Ctx, a: &CheckArgs) -> CmdResult {
    let pair = io::read_channel(&a.channel)?;
    let params = io::read_eta_params(&a.eta)?;
    let report = check_constraints(&pair, &params);
    let fixed_point = EtaBounds::derive(&pair, &params)
        .and_then(|b| solve_fixed_point(&pair, &b))
        .ok();
    println!("{:<10} {:>6} {:>16} {:>16}", "constraint", "holds", "lhs", "rhs");
    for (name, c) in report.rows() {
        println!("{name:<10} {:>6} {:>16.6} {:>16.6}", c.holds, c.lhs, c.rhs);
    }
    let show = |name: &str, v: Option<f64>| match v {
        Some(v) => println!("{name:<10} {v:.6}"),
        None => println!("{name:<10} -"),
    };
    show("delta_min", Some(report.delta_min));
    show("Delta", report.delta);
    show("Delta'", report.delta_prime);
    show("Delta_bar", report.delta_bar);
    show("tau", report.tau);
    show("gamma", report.gamma);
    if let Some(note) = &report.note {
        println!("note: {note}");
    }
    let fp_ok = fixed_point.is_some_and(|fp| {
        fp.f_residual <= ctx.tolerances.fixed_point_fs && fp.g_residual <= ctx.tolerances.fixed_point_fs
    });
    let doc = json!({ "constraints": report, "fixed_point": fixed_point });
    let text = to_json(&doc);
    println!("{text}");
    if let Some(p) = &a.out {
        write_text(&ctx.out(p), &(text + "\n"))?;
    }
    Ok(if report.all_hold() && fp_ok { 0 } else { 1 })
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Netlist file.
    #[arg(long)]
    pub netlist: PathBuf,
    /// Stimulus CSV (`time_fs,signal,polarity`).
    #[arg(long)]
    pub stimulus: PathBuf,
    /// zero, critical, extremal, random or random:N.
    #[arg(long, default_value = "zero")]
    pub adversary: String,
    /// Simulation horizon, with optional fs/ps/ns suffix.
    #[arg(long, default_value = "1e6fs")]
    pub horizon: String,
    /// Output trace CSV.
    #[arg(long, default_value = "trace.csv")]
    pub out: PathBuf,
}

fn simulate(ctx: &Ctx, a: &SimulateArgs) -> CmdResult {
    let netlist = io::read_netlist(&a.netlist)?;
    let stimulus = io::read_transitions(&a.stimulus)?;
    let adversary = ctx.adversary(&a.adversary)?;
    let options = RunOptions {
        horizon: parse_time(&a.horizon)?,
        ..RunOptions::default()
    };
    let result = run(&netlist, &stimulus, &adversary, &options)?;
    let ids: Vec<usize> = if netlist.monitors().is_empty() {
        (0..netlist.signal_count()).collect()
    } else {
        netlist.monitors().to_vec()
    };
    let trace = result.merged(&ids);
    let out = ctx.out(&a.out);
    io::write_transitions(&out, &trace)?;
    let status = match result.status {
        RunStatus::Quiescent => "quiescent",
        RunStatus::HorizonReached => "horizon_reached",
        RunStatus::Oscillating(_) => "oscillating",
        RunStatus::Diverged => "diverged",
    };
    println!("status {status}, {} transitions, {} events -> {}", trace.len(), result.events, out.display());
    Ok(if matches!(result.status, RunStatus::Diverged) { 1 } else { 0 })
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// SPF configuration file.
    #[arg(long)]
    pub config: PathBuf,
    /// eta-idm or eta-cidm.
    #[arg(long, default_value = "eta-cidm")]
    pub variant: String,
    /// Comma-separated adversaries; `random:A..B` expands to a seed range.
    #[arg(long, default_value = "zero,critical,random:1..32")]
    pub adversaries: String,
    /// Number of log-spaced pulse lengths.
    #[arg(long, default_value_t = 256)]
    pub points: usize,
    /// Pulse length range `LO,HI`; defaults to a range around both thresholds.
    #[arg(long)]
    pub range: Option<String>,
    #[arg(long, default_value = "sweep.csv")]
    pub out: PathBuf,
}

#[derive(Serialize)]
struct SweepRow<'a> {
    delta0_fs: f64,
    adversary: &'a str,
    class: &'a str,
    up_time_fs: Option<f64>,
    period_fs: Option<f64>,
    duty_cycle: Option<f64>,
    last_transition_fs: Option<f64>,
}

fn expand_adversaries(list: &str) -> Result<Vec<String>, Failure> {
    let mut out = Vec::new();
    for tok in list.split(',').map(str::trim).filter(|t| !t.is_empty()) {
        match tok.strip_prefix("random:").and_then(|r| r.split_once("..")) {
            Some((a, b)) => {
                let (a, b): (u64, u64) = (
                    a.parse().map_err(|_| Failure::usage(format!("bad seed range {tok:?}")))?,
                    b.parse().map_err(|_| Failure::usage(format!("bad seed range {tok:?}")))?,
                );
                if a > b {
                    return Err(Failure::usage(format!("empty seed range {tok:?}")));
                }
                out.extend((a..=b).map(|k| format!("random:{k}")));
            }
            None => out.push(tok.to_string()),
        }
    }
    if out.is_empty() {
        return Err(Failure::usage("no adversaries given"));
    }
    Ok(out)
}

fn spf_sweep(ctx: &Ctx, a: &SweepArgs) -> CmdResult {
    let config = io::read_spf_config(&a.config)?;
    let variant: Variant = a.variant.parse()?;
    let setup = SpfSetup::new(config)?;
    let labels = expand_adversaries(&a.adversaries)?;
    let advs = labels.iter().map(|l| ctx.adversary(l)).collect::<Result<Vec<_>, _>>()?;
    let (lo, hi) = match &a.range {
        Some(r) => {
            let (l, h) = r
                .split_once(',')
                .ok_or_else(|| Failure::usage("--range expects LO,HI"))?;
            (parse_time(l)?, parse_time(h)?)
        }
        None => setup.default_range(),
    };
    if !(lo > 0.0 && hi > lo) || a.points < 2 {
        return Err(Failure::usage("need 0 < LO < HI and at least two points"));
    }
    let grid = log_grid(lo, hi, a.points);
    let mut outcomes = setup.sweep(variant, &grid, &advs)?;
    // report the user's adversary names rather than the derived seeds
    for o in &mut outcomes {
        if let Some(k) = advs.iter().position(|adv| adv.to_string() == o.adversary) {
            o.adversary = labels[k].clone();
        }
    }
    outcomes.sort_by(|x, y| {
        let kx = labels.iter().position(|l| *l == x.adversary);
        let ky = labels.iter().position(|l| *l == y.adversary);
        x.delta0.total_cmp(&y.delta0).then(kx.cmp(&ky))
    });

    let out = ctx.out(&a.out);
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(Error::from)?;
    }
    let mut w = csv::Writer::from_path(&out).map_err(Error::from)?;
    for o in &outcomes {
        let (up, period, duty) = match o.class {
            SpfClass::Oscillating { up_time, period, duty_cycle } => (Some(up_time), Some(period), Some(duty_cycle)),
            _ => (None, None, None),
        };
        w.serialize(SweepRow {
            delta0_fs: o.delta0,
            adversary: &o.adversary,
            class: o.class.name(),
            up_time_fs: up,
            period_fs: period,
            duty_cycle: duty,
            last_transition_fs: o.last_transition,
        })
        .map_err(Error::from)?;
    }
    w.flush().map_err(Error::from)?;

    let (lower, upper) = (setup.lower_threshold(), setup.upper_threshold());
    println!(
        "Delta {:.6} fs, gamma {:.6}, thresholds lower {:.3} fs upper {:.3} fs, theta {:.3} fs",
        setup.delta(),
        setup.gamma,
        lower,
        upper,
        setup.theta
    );
    let mut ok = true;
    println!("{:<12} {:>14} {:>14} {:>8} {:>8}", "adversary", "obs_lower", "obs_upper", "below", "above");
    for l in &labels {
        let r = regime_report(&outcomes, l, lower, upper);
        ok &= r.all_below_lower_input_only && r.all_above_upper_locked;
        let fmt = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.3}"));
        println!(
            "{l:<12} {:>14} {:>14} {:>8} {:>8}",
            fmt(r.observed_lower),
            fmt(r.observed_upper),
            r.all_below_lower_input_only,
            r.all_above_upper_locked
        );
    }
    for o in &outcomes {
        match o.class {
            SpfClass::Oscillating { up_time, duty_cycle, .. } => {
                ok &= up_time <= setup.delta() + ctx.tolerances.oscillation_fs
                    && duty_cycle <= setup.gamma + ctx.tolerances.duty_cycle;
            }
            SpfClass::Diverged => ok = false,
            _ => {}
        }
    }
    println!("{} runs -> {}", outcomes.len(), out.display());
    Ok(if ok { 0 } else { 1 })
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Delay samples CSV (`T_fs,delta_fs,edge`).
    #[arg(long)]
    pub samples: PathBuf,
    /// Number of exponential terms per edge.
    #[arg(long, default_value_t = 2)]
    pub terms: usize,
    /// Output channel parameter file.
    #[arg(long, default_value = "channel.json")]
    pub out: PathBuf,
}

fn fit(ctx: &Ctx, a: &FitArgs) -> CmdResult {
    let samples = io::read_samples(&a.samples, None)?;
    let r = fit_sumexp(&samples, a.terms)?;
    let out = ctx.out(&a.out);
    io::write_channel(&out, &r.pair)?;
    println!(
        "rising: {} terms, rms {:.6e} fs, condition {:.3e}",
        r.rising.terms, r.rising.rms, r.rising.condition
    );
    println!(
        "falling: {} terms, rms {:.6e} fs, condition {:.3e}",
        r.falling.terms, r.falling.rms, r.falling.condition
    );
    println!("delta_min {:.6} fs", r.pair.delta_min());
    println!("involution residual {:.6e} fs (reported only)", r.involution_residual);
    println!("-> {}", out.display());
    Ok(0)
}

#[derive(Debug, Args)]
pub struct CoverageArgs {
    #[arg(long)]
    pub samples: PathBuf,
    /// Channel whose delay functions are the corridor centers.
    #[arg(long)]
    pub channel: PathBuf,
    /// Eta parameter file defining the corridor width.
    #[arg(long)]
    pub eta: PathBuf,
    /// R, F or both.
    #[arg(long, default_value = "both")]
    pub edge: String,
}

fn coverage(_ctx: &Ctx, a: &CoverageArgs) -> CmdResult {
    let samples = io::read_samples(&a.samples, None)?;
    let pair = io::read_channel(&a.channel)?;
    let bounds = EtaBounds::derive(&pair, &io::read_eta_params(&a.eta)?)?;
    println!("edge,deviation_fs");
    for edge in parse_edges(&a.edge)? {
        let corridor = Corridor::new(center(&pair, edge), bounds);
        let d = coverage_deviation(&samples.edge(edge), &corridor)?;
        println!("{},{d}", edge.symbol());
    }
    Ok(0)
}

fn center(pair: &InvolutionPair, edge: Polarity) -> etaidm::delay::DelayFunction {
    match edge {
        Polarity::Rising => pair.up.clone(),
        Polarity::Falling => pair.down.clone(),
    }
}

#[derive(Debug, Args)]
pub struct CharacterizeArgs {
    /// Analog oracle description (JSON).
    #[arg(long)]
    pub oracle: PathBuf,
    /// Long-pulse samples per edge.
    #[arg(long, default_value_t = 64)]
    pub samples_per_edge: usize,
    /// Output delay samples CSV.
    #[arg(long, default_value = "samples.csv")]
    pub out: PathBuf,
    /// Label stored with the samples.
    #[arg(long, default_value = "oracle")]
    pub label: String,
}

fn characterize_cmd(ctx: &Ctx, a: &CharacterizeArgs) -> CmdResult {
    let text = std::fs::read_to_string(&a.oracle)
        .map_err(|e| Failure::usage(format!("{}: {e}", a.oracle.display())))?;
    let oracle: AnalogOracle =
        serde_json::from_str(&text).map_err(|e| Failure::usage(format!("{}: {e}", a.oracle.display())))?;
    let c = characterize(&oracle, a.samples_per_edge)?;
    let samples = DelaySampleSet {
        source_label: a.label.clone(),
        ..c.samples.clone()
    };
    let out = ctx.out(&a.out);
    io::write_samples(&out, &samples)?;
    let doc = json!({
        "delta_min_fs": c.delta_min,
        "delta_min_falling_fs": c.delta_min_falling,
        "shift_plus_fs": c.shift_plus,
        "shift_minus_fs": c.shift_minus,
        "critical_width_negative_fs": c.critical_width_negative,
        "critical_width_positive_fs": c.critical_width_positive,
        "bracket_fs": c.bracket,
        "iterations": c.iterations,
        "samples": samples.len(),
    });
    println!("{}", to_json(&doc));
    println!("-> {}", out.display());
    Ok(0)
}

#[derive(Debug, Args)]
pub struct CornersArgs {
    /// Baseline channel (corridor centers).
    #[arg(long)]
    pub baseline: PathBuf,
    /// Eta parameters of the old corridor.
    #[arg(long)]
    pub old: PathBuf,
    /// Eta parameters of the new corridor.
    #[arg(long)]
    pub new: PathBuf,
    /// Corner sample files; the label is the file stem.
    #[arg(long, num_args = 1.., required = true)]
    pub corners: Vec<PathBuf>,
    #[arg(long, default_value = "corners.csv")]
    pub out_csv: PathBuf,
    #[arg(long, default_value = "corners.svg")]
    pub out_svg: PathBuf,
}

fn compare(ctx: &Ctx, a: &CornersArgs) -> CmdResult {
    let baseline = io::read_channel(&a.baseline)?;
    let old = EtaBounds::derive(&baseline, &io::read_eta_params(&a.old)?)?;
    let new = EtaBounds::derive(&baseline, &io::read_eta_params(&a.new)?)?;
    let sets = a
        .corners
        .iter()
        .map(|p| io::read_samples(p, None))
        .collect::<Result<Vec<_>, _>>()?;
    let report = compare_corners(&baseline, &sets, &old, &new)?;
    let csv_path = ctx.out(&a.out_csv);
    let mut buf = Vec::new();
    report.write_csv(&mut buf)?;
    write_text(&csv_path, std::str::from_utf8(&buf).expect("utf-8 csv"))?;
    let svg_path = ctx.out(&a.out_svg);
    write_text(&svg_path, &corner_bar_chart("Coverage deviation per corner", &report)?)?;
    println!("{:<12} {:>16} {:>16}", "corner", "old_fs", "new_fs");
    let mut ordered = true;
    for (label, o, n) in report.aggregate() {
        println!("{label:<12} {o:>16.6} {n:>16.6}");
        ordered &= n <= o;
    }
    println!("-> {}, {}", csv_path.display(), svg_path.display());
    Ok(if ordered { 0 } else { 1 })
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    #[arg(long)]
    pub samples: PathBuf,
    #[arg(long)]
    pub channel: PathBuf,
    #[arg(long)]
    pub old: PathBuf,
    #[arg(long)]
    pub new: PathBuf,
    /// R or F.
    #[arg(long, default_value = "R")]
    pub edge: String,
    #[arg(long, default_value = "corridor.svg")]
    pub out: PathBuf,
}

fn plot(ctx: &Ctx, a: &PlotArgs) -> CmdResult {
    let samples = io::read_samples(&a.samples, None)?;
    let pair = io::read_channel(&a.channel)?;
    let old = EtaBounds::derive(&pair, &io::read_eta_params(&a.old)?)?;
    let new = EtaBounds::derive(&pair, &io::read_eta_params(&a.new)?)?;
    let edge: Polarity = a.edge.parse()?;
    let pts = samples.edge(edge);
    if pts.is_empty() {
        return Err(Failure {
            code: 1,
            message: format!("no {} samples to plot", edge.symbol()),
        });
    }
    let c = center(&pair, edge);
    let title = format!("{} ({} edge)", samples.source_label, edge.symbol());
    let svg = corridor_svg(&title, &pts, &Corridor::new(c.clone(), old), &Corridor::new(c, new))?;
    let out = ctx.out(&a.out);
    write_text(&out, &svg)?;
    println!("-> {}", out.display());
    Ok(0)
}
