//! Command-line front end for the `had-doa` simulator.
//!
//! Exit codes: 0 on success, 2 on argument or geometry errors, 1 on runtime failures.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use had_doa_core::receiver::synthesize_stage1_slot;
use had_doa_core::{
    complexity_flops, delay_ratio, estimate, run_rmse_sweep, seeded_rng, Angle, ArrayConfig, DoaError,
    EstimatorOptions, ExperimentConfig, Method, OffsetRule, RootSelector, SourceScenario,
};
use serde_json::json;

pub const THREADS_ENV: &str = "HAD_DOA_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "had-doa",
    version,
    about = "Two-stage DOA estimation for hybrid analog-digital arrays"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Monte Carlo RMSE-vs-SNR sweep written as CSV.
    Sweep(SweepArgs),
    /// Single estimate printed as one JSON line.
    Estimate(EstimateArgs),
    /// Closed-form FLOP counts and delay ratio.
    Complexity(GeometryArgs),
}

#[derive(Debug, Args)]
struct GeometryArgs {
    /// Total antenna count N.
    #[arg(long)]
    antennas: usize,
    /// Antennas per subarray M.
    #[arg(long)]
    subarray_size: usize,
    /// Optional subarray count K; must equal N / M.
    #[arg(long)]
    subarrays: Option<usize>,
    /// Element spacing in wavelengths.
    #[arg(long, default_value_t = 0.5)]
    spacing: f64,
    /// Snapshots per slot L.
    #[arg(long, default_value_t = 8)]
    snapshots: usize,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SelectorArg {
    Dpa,
    Nearest,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum OffsetArg {
    Contiguous,
    AsPrinted,
}

#[derive(Debug, Args)]
struct EstimatorArgs {
    /// Stage-1 root selection rule.
    #[arg(long, value_enum, default_value_t = SelectorArg::Dpa)]
    selector: SelectorArg,
    /// Analog phase offset rule for the grouped slot.
    #[arg(long, value_enum, default_value_t = OffsetArg::Contiguous)]
    offset_rule: OffsetArg,
}

impl EstimatorArgs {
    fn options(&self) -> EstimatorOptions {
        EstimatorOptions {
            selector: match self.selector {
                SelectorArg::Dpa => RootSelector::Dpa,
                SelectorArg::Nearest => RootSelector::NearestUnitCircle,
            },
            offset_rule: match self.offset_rule {
                OffsetArg::Contiguous => OffsetRule::Contiguous,
                OffsetArg::AsPrinted => OffsetRule::AsPrinted,
            },
        }
    }
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[command(flatten)]
    geometry: GeometryArgs,
    #[command(flatten)]
    estimator: EstimatorArgs,
    /// True direction in degrees.
    #[arg(long, allow_hyphen_values = true)]
    theta0: f64,
    /// Comma-separated SNR grid in dB (`inf` disables noise).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
    snr: Vec<f64>,
    #[arg(long, default_value_t = 2000)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Comma-separated subset of `fast,baseline`.
    #[arg(long, value_delimiter = ',', default_value = "fast,baseline")]
    methods: Vec<String>,
    /// Output CSV path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EstimateArgs {
    #[command(flatten)]
    geometry: GeometryArgs,
    #[command(flatten)]
    estimator: EstimatorArgs,
    #[arg(long, allow_hyphen_values = true)]
    theta0: f64,
    #[arg(long, allow_hyphen_values = true)]
    snr: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "fast")]
    method: String,
    /// Also write the stage-1 slot as a HADS binary dump.
    #[arg(long)]
    dump_stage1: Option<PathBuf>,
}

enum Failure {
    Usage(String),
    Runtime(String),
}

impl Failure {
    fn code(&self) -> i32 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Runtime(_) => 1,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Runtime(m) => m,
        }
    }
}

fn usage(e: DoaError) -> Failure {
    Failure::Usage(e.to_string())
}

fn runtime(e: impl std::fmt::Display) -> Failure {
    Failure::Runtime(e.to_string())
}

fn array(g: &GeometryArgs) -> Result<ArrayConfig, Failure> {
    let cfg = ArrayConfig::new(g.antennas, g.subarray_size, g.spacing).map_err(usage)?;
    if let Some(k) = g.subarrays {
        if k != cfg.n_subarrays() {
            return Err(Failure::Usage(format!(
                "inconsistent geometry: N = {} but K·M = {}",
                g.antennas,
                k * g.subarray_size
            )));
        }
    }
    if g.snapshots == 0 {
        return Err(usage(DoaError::EmptySlot));
    }
    Ok(cfg)
}

fn methods(list: &[String]) -> Result<Vec<Method>, Failure> {
    let mut out = Vec::new();
    for m in list {
        let m: Method = m.parse().map_err(usage)?;
        if !out.contains(&m) {
            out.push(m);
        }
    }
    Ok(out)
}

fn sweep(a: &SweepArgs, out: &mut dyn Write) -> Result<(), Failure> {
    let ec = ExperimentConfig {
        array: array(&a.geometry)?,
        theta0: Angle::from_degrees(a.theta0).map_err(usage)?,
        snapshots_per_slot: a.geometry.snapshots,
        snr_grid_db: a.snr.clone(),
        trials: a.trials,
        master_seed: a.seed,
        methods: methods(&a.methods)?,
        options: a.estimator.options(),
    };
    ec.validate().map_err(usage)?;
    let table = run_rmse_sweep(&ec).map_err(runtime)?;
    match &a.out {
        Some(path) => {
            let file = File::create(path).map_err(|e| runtime(format!("{}: {e}", path.display())))?;
            let mut w = BufWriter::new(file);
            table.write_csv(&mut w).and_then(|_| w.flush()).map_err(runtime)
        }
        None => table.write_csv(out).map_err(runtime),
    }
}

fn estimate_cmd(a: &EstimateArgs, out: &mut dyn Write) -> Result<(), Failure> {
    let cfg = array(&a.geometry)?;
    let theta0 = Angle::from_degrees(a.theta0).map_err(usage)?;
    let scn = SourceScenario::new(theta0, a.snr, a.geometry.snapshots).map_err(usage)?;
    let method: Method = a.method.parse().map_err(usage)?;
    if method == Method::Fast && !cfg.fast_applicable() {
        return Err(usage(DoaError::FastNotApplicable {
            k: cfg.n_subarrays(),
            m: cfg.subarray_size(),
        }));
    }
    if let Some(path) = &a.dump_stage1 {
        // the estimator draws its stage-1 slot first, so a fresh stream reproduces it
        let slot = synthesize_stage1_slot(&scn, &cfg, 1, &mut seeded_rng(a.seed));
        let file = File::create(path).map_err(|e| runtime(format!("{}: {e}", path.display())))?;
        let mut w = BufWriter::new(file);
        slot.write_to(&mut w).and_then(|_| w.flush()).map_err(runtime)?;
    }
    let res = estimate(method, &scn, &cfg, &a.estimator.options(), &mut seeded_rng(a.seed)).map_err(runtime)?;
    let candidates: Vec<_> = res
        .profile
        .per_candidate
        .iter()
        .map(|c| json!({ "angle_deg": c.angle.degrees(), "power": c.power }))
        .collect();
    let line = json!({
        "method": res.method.as_str(),
        "theta_hat": res.theta_hat.degrees(),
        "base_phase": res.candidates.base_phase.radians(),
        "candidates": candidates,
        "selected_index": res.profile.selected_index,
        "slots_consumed": res.slots_consumed,
    });
    writeln!(out, "{line}").map_err(runtime)
}

fn complexity_cmd(g: &GeometryArgs, out: &mut dyn Write) -> Result<(), Failure> {
    let cfg = array(g)?;
    let rep = complexity_flops(&cfg, g.snapshots);
    let line = json!({
        "c_original": rep.c_original,
        "c_proposed": rep.c_proposed,
        "flop_ratio": rep.c_proposed as f64 / rep.c_original as f64,
        "reduction_term_ratio": rep.reduction_term_ratio,
        "delay_ratio": delay_ratio(&cfg),
    });
    writeln!(out, "{line}").map_err(runtime)
}

fn configure_threads() {
    if let Some(n) = std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
    {
        if n > 0 {
            // a pool may already exist when called repeatedly in-process
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
}

/// Parses `args` (including the program name), runs the command and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    run_with_output(args, &mut std::io::stdout().lock())
}

pub fn run_with_output<I, T>(args: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    configure_threads();
    let result = match &cli.command {
        Command::Sweep(a) => sweep(a, out),
        Command::Estimate(a) => estimate_cmd(a, out),
        Command::Complexity(g) => complexity_cmd(g, out),
    };
    match result {
        Ok(()) => 0,
        Err(f) => {
            eprintln!("error: {}", f.message());
            f.code()
        }
    }
}
