mod config;

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use mpg::checks::{mfun_table, run_suite, Check, MFUN_TOLERANCE, MONTE_CARLO_SUITES, ORACLE_SUITES};
use mpg::estimators::VarianceReport;
use mpg::trainer::{episodes_to_reach, final_mean, train, write_episodes_csv, Agent};
use mpg::EstimatorKind;
use serde::Serialize;

use config::{FileConfig, Mode};

#[derive(Parser)]
#[command(name = "mpg", version, about = "Angular and clipped-action policy-gradient experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train A2C agents on Platform2D and write per-episode CSVs.
    Train(Common),
    /// Compare standard and angular estimator variance.
    Variance(Common),
    /// Run check suites: mfun, grads, normalization, polar, capg (the
    /// default set), and the slower Monte Carlo suites unbiased, variance.
    Check(CheckArgs),
    /// Print the M-function recurrence against quadrature as CSV.
    Mcheck,
}

#[derive(Args)]
struct Common {
    /// Flat TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, env = "MPG_OUT_DIR", default_value = "mpg-out")]
    out: PathBuf,
    /// standard, angular or wrapped_angle.
    #[arg(long)]
    estimator: Option<EstimatorKind>,
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    episodes: Option<usize>,
    /// Trained-model checkpoint for `variance`.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
}

#[derive(Args)]
struct CheckArgs {
    /// Suites to run; the oracle suites when omitted.
    suites: Vec<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

enum Failure {
    Usage(String),
    Checks,
}

impl From<mpg::Error> for Failure {
    fn from(e: mpg::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

#[derive(Serialize)]
struct RunManifest<'a> {
    command: &'a str,
    version: &'a str,
    config: &'a FileConfig,
    init: &'a str,
    seeds: Vec<u64>,
    outputs: Vec<String>,
    started_unix: u64,
    finished_unix: u64,
}

const INIT_SCHEME: &str = "uniform(-1/sqrt(fan_in), 1/sqrt(fan_in))";

fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_secs())
}

fn resolve(common: &Common) -> Result<FileConfig, Failure> {
    let mut cfg = FileConfig::load(common.config.as_deref()).map_err(Failure::Usage)?;
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(k) = common.estimator {
        cfg.estimators = vec![k];
    }
    if let Some(r) = common.runs {
        cfg.runs = r;
    }
    if let Some(e) = common.episodes {
        cfg.episodes = e;
    }
    if common.checkpoint.is_some() {
        cfg.mode = Mode::Trained;
    }
    cfg.validate().map_err(Failure::Usage)?;
    Ok(cfg)
}

fn write_manifest(out: &Path, name: &str, manifest: &RunManifest) -> Result<PathBuf, Failure> {
    let path = out.join(name);
    let text = serde_json::to_string_pretty(manifest).map_err(|e| Failure::Usage(e.to_string()))?;
    fs::write(&path, text + "\n")?;
    Ok(path)
}

fn cmd_train(common: &Common) -> Result<(), Failure> {
    let cfg = resolve(common)?;
    let started = unix_now();
    fs::create_dir_all(&common.out)?;
    let optimum = cfg.train(EstimatorKind::Angular, 0).platform().optimal_return(cfg.gamma);
    let manifest_path = common.out.join("manifest_train.json");
    let summary_path = common.out.join("summary.csv");
    let mut summary = BufWriter::new(File::create(&summary_path)?);
    writeln!(
        summary,
        "run_id,estimator,seed,episodes,final_mean_100,episodes_to_90,episodes_to_95,optimum,manifest"
    )?;
    let mut outputs = vec![summary_path.display().to_string()];
    let mut seeds = Vec::new();
    for &kind in &cfg.estimators {
        for run in 0..cfg.runs {
            let seed = cfg.seed.wrapping_add(run as u64);
            seeds.push(seed);
            let run_id = format!("{kind}-{run}");
            let result = train::<f64>(&cfg.train(kind, seed))?;
            let csv_path = common.out.join(format!("episodes_{run_id}.csv"));
            write_episodes_csv(BufWriter::new(File::create(&csv_path)?), &run_id, &result.records)?;
            let ckpt_path = common.out.join(format!("checkpoint_{run_id}.txt"));
            result.agent.save_file(&ckpt_path)?;
            let fmt = |v: Option<usize>| v.map_or(String::new(), |v| v.to_string());
            writeln!(
                summary,
                "{run_id},{kind},{seed},{},{},{},{},{optimum},{}",
                result.records.len(),
                final_mean(&result.records, 100).map_or(String::new(), |v| v.to_string()),
                fmt(episodes_to_reach(&result.records, 0.9 * optimum, 100)),
                fmt(episodes_to_reach(&result.records, 0.95 * optimum, 100)),
                manifest_path.display(),
            )?;
            eprintln!("{run_id}: {} episodes -> {}", result.records.len(), csv_path.display());
            outputs.push(csv_path.display().to_string());
            outputs.push(ckpt_path.display().to_string());
        }
    }
    summary.flush()?;
    seeds.sort_unstable();
    seeds.dedup();
    let manifest = RunManifest {
        command: "train",
        version: env!("CARGO_PKG_VERSION"),
        config: &cfg,
        init: INIT_SCHEME,
        seeds,
        outputs,
        started_unix: started,
        finished_unix: unix_now(),
    };
    write_manifest(&common.out, "manifest_train.json", &manifest)?;
    Ok(())
}

#[derive(Serialize)]
struct VarianceOutput<'a> {
    #[serde(flatten)]
    report: &'a VarianceReport,
    ratio: f64,
    mode: Mode,
    manifest: String,
}

fn cmd_variance(common: &Common) -> Result<(), Failure> {
    let cfg = resolve(common)?;
    let started = unix_now();
    let agent = match (cfg.mode, &common.checkpoint) {
        (Mode::Trained, Some(path)) => Agent::<f64>::load_file(path)
            .map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?,
        (Mode::Trained, None) => {
            return Err(Failure::Usage("mode = \"trained\" needs --checkpoint".into()))
        }
        (Mode::Init, _) => {
            let kind = cfg.estimators.first().copied().unwrap_or(EstimatorKind::Angular);
            if kind == EstimatorKind::WrappedAngle {
                return Err(Failure::Usage("variance needs a standard or angular policy".into()));
            }
            Agent::new(&cfg.train(kind, cfg.seed))?
        }
    };
    if agent.estimator() == EstimatorKind::WrappedAngle {
        return Err(Failure::Usage("wrapped_angle checkpoints have no marginal estimator".into()));
    }
    let platform = cfg.train(agent.estimator(), cfg.seed).platform();
    let report = mpg::study::platform_variance(&agent, platform, cfg.gamma, &cfg.study())?;
    fs::create_dir_all(&common.out)?;
    let mode = match cfg.mode {
        Mode::Init => "init",
        Mode::Trained => "trained",
    };
    let json_path = common.out.join(format!("variance_{mode}.json"));
    let manifest_name = format!("manifest_variance_{mode}.json");
    let out = VarianceOutput {
        report: &report,
        ratio: report.ratio(),
        mode: cfg.mode,
        manifest: common.out.join(&manifest_name).display().to_string(),
    };
    let text = serde_json::to_string_pretty(&out).map_err(|e| Failure::Usage(e.to_string()))?;
    fs::write(&json_path, format!("{text}\n"))?;
    println!("{text}");
    let mut outputs = vec![json_path.display().to_string()];
    if let Some(p) = &common.checkpoint {
        outputs.push(p.display().to_string());
    }
    let manifest = RunManifest {
        command: "variance",
        version: env!("CARGO_PKG_VERSION"),
        config: &cfg,
        init: INIT_SCHEME,
        seeds: vec![cfg.seed],
        outputs,
        started_unix: started,
        finished_unix: unix_now(),
    };
    write_manifest(&common.out, &manifest_name, &manifest)?;
    Ok(())
}

fn cmd_check(args: &CheckArgs) -> Result<(), Failure> {
    let available: Vec<&str> = ORACLE_SUITES.iter().chain(&MONTE_CARLO_SUITES).copied().collect();
    let suites: Vec<&str> = if args.suites.is_empty() {
        ORACLE_SUITES.to_vec()
    } else {
        args.suites.iter().map(String::as_str).collect()
    };
    if let Some(bad) = suites.iter().find(|s| !available.contains(s)) {
        return Err(Failure::Usage(format!(
            "unknown suite `{bad}` (expected one of: {})",
            available.join(", ")
        )));
    }
    let mut checks: Vec<Check> = Vec::new();
    for s in suites {
        checks.extend(run_suite(s, args.seed)?);
    }
    for c in &checks {
        println!("{c}");
    }
    let failed = checks.iter().filter(|c| !c.passed()).count();
    println!("{} checks, {failed} failed", checks.len());
    if failed > 0 {
        Err(Failure::Checks)
    } else {
        Ok(())
    }
}

fn cmd_mcheck() -> Result<(), Failure> {
    let rows = mfun_table()?;
    let mut out = std::io::stdout().lock();
    writeln!(out, "d,alpha,recursion,quadrature,rel_err")?;
    for r in &rows {
        writeln!(out, "{},{},{:e},{:e},{:e}", r.d, r.alpha, r.recursion, r.quadrature, r.rel_err)?;
    }
    if rows.iter().all(|r| r.rel_err <= MFUN_TOLERANCE) {
        Ok(())
    } else {
        Err(Failure::Checks)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Train(c) => cmd_train(c),
        Command::Variance(c) => cmd_variance(c),
        Command::Check(a) => cmd_check(a),
        Command::Mcheck => cmd_mcheck(),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Checks) => ExitCode::from(1),
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
