//! Command-line front end for the session simulator.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use qa4ml_sim::estimate::{fit_profile_from_log, records_from_session, write_op_log};
use qa4ml_sim::mock::ConfusionMatrix;
use qa4ml_sim::profile::{builtin_profile, Layout, TimingProfile, BUILTIN_PROFILE_IDS};
use qa4ml_sim::rank::RankMethodSpec;
use qa4ml_sim::report::{
    read_results_csv, render_chart_svg, write_atomic, write_results_csv,
};
use qa4ml_sim::session::{simulate_session, SessionConfig};
use qa4ml_sim::strategy::{Command, CommandSet, UserProfile, DEFAULT_U_RMEC};
use qa4ml_sim::sweep::{
    aggregate, check_ushape, find_optimal_layout, preset, run_sweep,
    sweep_config_from_toml, AggregateRow, SweepConfig, PRESET_NAMES,
};
use qa4ml_sim::SimError;

const SEED_ENV: &str = "QA4ML_SIM_SEED";

#[derive(Parser)]
#[command(
    name = "qa4ml-sim",
    version,
    about = "Deterministic simulator of quality-assurance labeling sessions"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one session from a TOML config and print the result
    Simulate(SimulateArgs),
    /// Run a parameter sweep and write a results CSV plus manifest
    Sweep(SweepArgs),
    /// Fit a timing profile from an operation log CSV
    Estimate(EstimateArgs),
    /// Render charts and a summary from a results CSV
    Report(ReportArgs),
    /// List the bundled sweep presets and timing profiles
    Presets,
}

#[derive(Args)]
struct SimulateArgs {
    /// Session config TOML
    #[arg(long)]
    config: PathBuf,
    /// Also dump the operation log as CSV
    #[arg(long)]
    oplog: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    /// Bundled preset name (see `presets`)
    #[arg(long, conflicts_with = "config")]
    preset: Option<String>,
    /// Sweep config TOML (full config or preset reference)
    #[arg(long, required_unless_present = "preset")]
    config: Option<PathBuf>,
    /// Timing profile: bundled id or path to a profile TOML
    #[arg(long)]
    timing: Option<String>,
    /// Results CSV path
    #[arg(long)]
    out: PathBuf,
    /// Override the seed base
    #[arg(long)]
    seed_base: Option<String>,
    /// Override the trial count
    #[arg(long)]
    trials: Option<u32>,
    /// Override the object count per session
    #[arg(long)]
    n: Option<usize>,
    /// Worker threads (default: machine logical cores)
    #[arg(long)]
    parallelism: Option<usize>,
}

#[derive(Args)]
struct EstimateArgs {
    /// Operation log CSV
    log: PathBuf,
    /// Output timing profile TOML
    #[arg(long)]
    out: PathBuf,
    /// Id recorded in the fitted profile
    #[arg(long, default_value = "estimated")]
    id: String,
}

#[derive(Args)]
struct ReportArgs {
    /// Results CSV produced by `sweep`
    results: PathBuf,
    /// Output directory for charts and summary
    #[arg(long)]
    out: PathBuf,
    /// Noise tolerance for curve shape classification
    #[arg(long, default_value_t = 0.0)]
    epsilon: f64,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<(), SimError> {
    match cli.command {
        Cmd::Simulate(args) => cmd_simulate(args),
        Cmd::Sweep(args) => cmd_sweep(args),
        Cmd::Estimate(args) => cmd_estimate(args),
        Cmd::Report(args) => cmd_report(args),
        Cmd::Presets => {
            println!("sweep presets:");
            for name in PRESET_NAMES {
                println!("  {name}");
            }
            println!("timing profiles:");
            for id in BUILTIN_PROFILE_IDS {
                println!("  {id}");
            }
            Ok(())
        }
    }
}

fn read_to_string(path: &Path) -> Result<String, SimError> {
    std::fs::read_to_string(path).map_err(|e| SimError::io(path.display().to_string(), e))
}

/// A bundled profile id, or a path to a profile TOML.
fn load_profile(spec: &str) -> Result<TimingProfile, SimError> {
    if let Some(profile) = builtin_profile(spec) {
        return Ok(profile);
    }
    let path = Path::new(spec);
    if path.exists() {
        return TimingProfile::from_toml(&read_to_string(path)?);
    }
    Err(SimError::InvalidConfig(format!(
        "unknown timing profile '{spec}': not a bundled id ({}) or a readable file",
        BUILTIN_PROFILE_IDS.join(", ")
    )))
}

/// On-disk shape of a single-session config.
#[derive(Deserialize)]
struct SessionSpec {
    n: usize,
    #[serde(default)]
    seed: u64,
    rows: u32,
    cols: u32,
    /// Confusion matrix rows, true label by assigned label.
    cm: Vec<Vec<f64>>,
    /// Bundled profile id or path to a profile TOML.
    timing: String,
    /// Available edit commands; defaults to all four.
    clist: Option<Vec<Command>>,
    user: Option<UserSpec>,
    #[serde(default)]
    rlist: Vec<RankMethodSpec>,
}

#[derive(Deserialize)]
struct UserSpec {
    u_gcsl: f64,
    u_gcsu: f64,
    u_rmal: Option<u32>,
    u_rmec: Option<f64>,
}

fn cmd_simulate(args: SimulateArgs) -> Result<(), SimError> {
    let spec: SessionSpec =
        toml::from_str(&read_to_string(&args.config)?).map_err(|e| SimError::Parse {
            line: 0,
            message: format!("session config: {e}"),
        })?;
    let layout = Layout::new(spec.rows, spec.cols)?;
    let timing = load_profile(&spec.timing)?;
    let user = match spec.user {
        Some(u) => UserProfile::new(
            u.u_gcsl,
            u.u_gcsu,
            u.u_rmal,
            u.u_rmec.unwrap_or(DEFAULT_U_RMEC),
        )?,
        None => UserProfile::optimal(None),
    };
    let seed = seed_override()?.unwrap_or(spec.seed);
    let config = SessionConfig {
        n: spec.n,
        cm: ConfusionMatrix::new(spec.cm)?,
        layout,
        timing: timing.clone(),
        clist: match spec.clist {
            Some(commands) => CommandSet::new(commands)?,
            None => CommandSet::full(),
        },
        profile: user,
        rlist: spec.rlist,
        seed,
    };
    let (log, result) = simulate_session(&config)?;
    if let Some(path) = args.oplog {
        let records =
            records_from_session(&log, &result.batches, &timing, layout, "session-0")?;
        let mut buf = Vec::new();
        write_op_log(&records, &mut buf)?;
        write_atomic(&path, &buf)?;
    }
    let printed = serde_json::to_string_pretty(&result).expect("result serializes");
    println!("{printed}");
    Ok(())
}

/// `QA4ML_SIM_SEED` overrides both single-session seeds and sweep seed
/// bases.
fn seed_override() -> Result<Option<u64>, SimError> {
    match std::env::var(SEED_ENV) {
        Ok(text) => text
            .parse::<u64>()
            .map(Some)
            .map_err(|_| SimError::InvalidConfig(format!("{SEED_ENV} must be a u64"))),
        Err(_) => Ok(None),
    }
}

#[derive(Serialize)]
struct RunManifest {
    tool_version: String,
    config_digest: String,
    seed_base: String,
    timestamp_unix_s: u64,
    outputs: Vec<String>,
}

fn config_digest(config: &SweepConfig) -> String {
    // Digest of the canonical (struct-ordered) serialization, so the TOML
    // key order a user happened to write never changes the digest.
    let canonical = serde_json::to_vec(config).expect("config serializes");
    let mut hasher = Sha256::new();
    hasher.update(&canonical);
    format!("sha256:{:x}", hasher.finalize())
}

fn cmd_sweep(args: SweepArgs) -> Result<(), SimError> {
    let mut config = match (&args.preset, &args.config) {
        (Some(name), None) => preset(name)?,
        (None, Some(path)) => sweep_config_from_toml_lenient(&read_to_string(path)?)?,
        _ => unreachable!("clap enforces exactly one source"),
    };
    let mut extra_profiles = Vec::new();
    if let Some(timing) = &args.timing {
        let profile = load_profile(timing)?;
        config.profile_id = profile.id.clone();
        extra_profiles.push(profile);
    }
    if let Some(seed_base) = args.seed_base {
        config.seed_base = seed_base;
    }
    if let Some(seed) = std::env::var(SEED_ENV).ok() {
        // Env wins over file and flag, per the reproducibility contract.
        config.seed_base = seed;
    }
    if let Some(trials) = args.trials {
        config.trials = trials;
    }
    if let Some(n) = args.n {
        config.n = n;
    }
    config.validate()?;
    if let Some(threads) = args.parallelism {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| SimError::InvalidConfig(format!("parallelism: {e}")))?;
    }
    let rows = run_sweep(&config, &extra_profiles)?;
    let mut csv = Vec::new();
    write_results_csv(&rows, &mut csv)?;
    write_atomic(&args.out, &csv)?;
    let manifest = RunManifest {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        config_digest: config_digest(&config),
        seed_base: config.seed_base.clone(),
        timestamp_unix_s: std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
        outputs: vec![args.out.display().to_string()],
    };
    let manifest_path = args.out.with_extension("manifest.json");
    let body = serde_json::to_vec_pretty(&manifest).expect("manifest serializes");
    write_atomic(&manifest_path, &body)?;
    eprintln!(
        "wrote {} rows to {} (manifest: {})",
        rows.len(),
        args.out.display(),
        manifest_path.display()
    );
    Ok(())
}

/// Full sweep configs must validate on read; preset references may still
/// be missing their timing profile, which `--timing` supplies afterwards.
fn sweep_config_from_toml_lenient(text: &str) -> Result<SweepConfig, SimError> {
    match sweep_config_from_toml(text) {
        Ok(config) => Ok(config),
        Err(SimError::InvalidConfig(msg)) if msg.contains("no timing profile") => {
            // Re-read without validation by deferring to the caller.
            let table: toml::Value = toml::from_str(text).map_err(|e| SimError::Parse {
                line: 0,
                message: format!("sweep config: {e}"),
            })?;
            if let Some(name) = table.get("preset").and_then(|v| v.as_str()) {
                let mut config = preset(name)?;
                if let Some(v) = table.get("seed_base").and_then(|v| v.as_str()) {
                    config.seed_base = v.to_string();
                }
                if let Some(v) = table.get("n").and_then(|v| v.as_integer()) {
                    config.n = v as usize;
                }
                if let Some(v) = table.get("trials").and_then(|v| v.as_integer()) {
                    config.trials = v as u32;
                }
                return Ok(config);
            }
            Err(SimError::InvalidConfig(msg))
        }
        Err(e) => Err(e),
    }
}

fn cmd_estimate(args: EstimateArgs) -> Result<(), SimError> {
    let text = read_to_string(&args.log)?;
    let profile = fit_profile_from_log(text.as_bytes(), &args.id)?;
    write_atomic(&args.out, profile.to_toml().as_bytes())?;
    eprintln!(
        "fitted profile '{}' with {} layouts to {}",
        profile.id,
        profile.layouts.len(),
        args.out.display()
    );
    Ok(())
}

fn cmd_report(args: ReportArgs) -> Result<(), SimError> {
    let rows = read_results_csv(read_to_string(&args.results)?.as_bytes())?;
    if rows.is_empty() {
        return Err(SimError::InvalidConfig("results file has no rows".into()));
    }
    let agg = aggregate(&rows);
    std::fs::create_dir_all(&args.out)
        .map_err(|e| SimError::io(args.out.display().to_string(), e))?;

    // All conditions on one chart, plus one chart per condition family.
    let combined = render_chart_svg("all conditions", &agg)?;
    write_atomic(&args.out.join("all-conditions.svg"), combined.as_bytes())?;

    let mut families: Vec<&str> = Vec::new();
    let mut by_family: BTreeMap<&str, Vec<AggregateRow>> = BTreeMap::new();
    for a in &agg {
        if !families.contains(&a.condition.as_str()) {
            families.push(&a.condition);
        }
        by_family.entry(&a.condition).or_default().push(a.clone());
    }
    let mut summary = String::new();
    for family in families {
        let mut rows = by_family[family].clone();
        rows.sort_by_key(|r| r.n_batch);
        let svg = render_chart_svg(family, &rows)?;
        let file = format!("{}.svg", sanitize_filename(family));
        write_atomic(&args.out.join(&file), svg.as_bytes())?;
        let means: Vec<f64> = rows.iter().map(|r| r.mean_t).collect();
        let shape = check_ushape(&means, args.epsilon);
        let best = find_optimal_layout(&rows).expect("non-empty family");
        summary.push_str(&format!(
            "{family}: optimal layout {}x{} (batch {}, mean {:.2} s{}), curve {} \
             (argmin index {})\n",
            best.rows,
            best.cols,
            best.n_batch,
            best.mean_t,
            if best.boundary { ", at sweep boundary" } else { "" },
            shape.shape,
            shape.argmin,
        ));
    }
    write_atomic(&args.out.join("summary.txt"), summary.as_bytes())?;
    print!("{summary}");
    Ok(())
}

fn sanitize_filename(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}
