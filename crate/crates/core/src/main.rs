use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use neurovolve::augment::{expand_dataset, ExpandOptions};
use neurovolve::config::{ToolConfig, SEED_ENV};
use neurovolve::ensemble::{fuse_case_set, FusionMode};
use neurovolve::metrics::{report_json, score_case_set, write_csv};
use neurovolve::phantom::{generate_dataset, Jitter, PhantomSpec};
use neurovolve::preview::write_preview;
use neurovolve::{load_case, Error};

const EXIT_PARTIAL: u8 = 1;
const EXIT_USAGE: u8 = 2;

#[derive(Parser)]
#[command(name = "neurovolve", version, about = "Brain-tumour MRI volume toolkit")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct GlobalArgs {
    /// JSON configuration file (strict schema; defaults when omitted).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads; 1 runs serially.
    #[arg(long, global = true, value_parser = clap::value_parser!(u64).range(1..))]
    workers: Option<u64>,
    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
}

#[derive(Subcommand)]
enum Command {
    /// Write augmented replicates of every case in a BraTS-layout tree.
    Expand {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        replicates: u64,
        /// Also copy the unmodified source cases.
        #[arg(long)]
        include_originals: bool,
    },
    /// Score predictions against ground truth (LSD and NSD per region).
    Score {
        #[arg(long)]
        gt: PathBuf,
        #[arg(long)]
        pred: PathBuf,
        /// CSV output.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Fuse predictions of several models.
    Fuse {
        #[arg(long, num_args = 1.., required = true)]
        members: Vec<PathBuf>,
        #[arg(long)]
        output: PathBuf,
        /// Overrides `ensemble.mode` from the config.
        #[arg(long, value_parser = parse_mode)]
        mode: Option<FusionMode>,
    },
    /// Generate synthetic phantom cases.
    Phantom {
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        count: u64,
        #[arg(long)]
        output: PathBuf,
        /// PhantomSpec JSON.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Tumour centre jitter (mm).
        #[arg(long, default_value_t = 0.0)]
        jitter_center_mm: f64,
        /// Tumour radius jitter (mm).
        #[arg(long, default_value_t = 0.0)]
        jitter_radius_mm: f64,
        /// Put the last N cases under `validation/` and the rest under `training/`.
        #[arg(long, default_value_t = 0)]
        validation: usize,
    },
    /// Render an axial slice montage with segmentation overlay.
    Preview {
        #[arg(long = "case")]
        case_dir: PathBuf,
        #[arg(long)]
        slice: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

fn parse_mode(s: &str) -> Result<FusionMode, String> {
    match s {
        "probability_mean" | "mean" => Ok(FusionMode::ProbabilityMean),
        "majority_vote" | "vote" => Ok(FusionMode::MajorityVote),
        other => Err(format!("unknown fusion mode `{other}` (probability_mean, majority_vote)")),
    }
}

/// Configuration and argument errors exit 2; anything else that aborts a
/// command exits 1.
fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Config(_) | Error::Json(_) | Error::Phantom(_) | Error::SliceOutOfRange { .. } => EXIT_USAGE,
        _ => EXIT_PARTIAL,
    }
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> neurovolve::Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn load_config(global: &GlobalArgs) -> neurovolve::Result<ToolConfig> {
    let mut cfg = match &global.config {
        Some(p) => ToolConfig::load(p)?,
        None => ToolConfig::default(),
    };
    cfg.resolve_seed()?;
    Ok(cfg)
}

fn run(cli: Cli) -> neurovolve::Result<u8> {
    let cfg = load_config(&cli.global)?;
    let workers = cli.global.workers.map(|w| w as usize).or(cfg.workers);
    if let Some(n) = workers {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    }
    match cli.command {
        Command::Expand {
            input,
            output,
            replicates,
            include_originals,
        } => {
            let options = ExpandOptions {
                replicates,
                include_originals,
            };
            let report = expand_dataset(&input, &output, &cfg.pipeline, &cfg.labels, &options)?;
            let path = output.join("expansion_report.json");
            write_json(&path, &report)?;
            println!("{}", path.display());
            if report.skipped.is_empty() {
                Ok(0)
            } else {
                eprintln!("{} case(s) failed; see report", report.skipped.len());
                Ok(EXIT_PARTIAL)
            }
        }
        Command::Score { gt, pred, out, json } => {
            let set = score_case_set(&gt, &pred, &cfg.labels, &cfg.metrics)?;
            let mut csv = Vec::new();
            write_csv(&mut csv, &set.rows, set.report.as_ref()).map_err(|e| Error::Io {
                path: out.clone(),
                source: e,
            })?;
            fs::write(&out, csv).map_err(|e| Error::Io {
                path: out.clone(),
                source: e,
            })?;
            if let Some(j) = json {
                let mut value = report_json(&set.rows, set.report.as_ref(), &set.missing);
                value["failed"] = serde_json::to_value(&set.failed)?;
                write_json(&j, &value)?;
            }
            for id in &set.missing {
                eprintln!("missing counterpart: {id}");
            }
            for f in &set.failed {
                eprintln!("failed {}: {}", f.case_id, f.error);
            }
            if let Some(rep) = &set.report {
                println!("AVG lsd {:.3} nsd {:.3}", rep.avg.lsd, rep.avg.nsd);
            }
            Ok(if set.is_complete() { 0 } else { EXIT_PARTIAL })
        }
        Command::Fuse { members, output, mode } => {
            let mut spec = cfg.ensemble.clone();
            if let Some(m) = mode {
                spec.mode = m;
            }
            let report = fuse_case_set(&members, &output, &spec, &cfg.labels)?;
            let path = output.join("fusion_report.json");
            write_json(&path, &report)?;
            println!("{}", path.display());
            Ok(if report.skipped.is_empty() && !report.fused.is_empty() {
                0
            } else {
                EXIT_PARTIAL
            })
        }
        Command::Phantom {
            count,
            output,
            spec,
            seed,
            jitter_center_mm,
            jitter_radius_mm,
            validation,
        } => {
            let mut base: PhantomSpec = match spec {
                Some(p) => {
                    let text = fs::read_to_string(&p).map_err(|e| Error::Io { path: p.clone(), source: e })?;
                    serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?
                }
                None => PhantomSpec::default(),
            };
            base.labels = cfg.labels;
            // NEUROVOLVE_SEED > --seed > spec file
            if std::env::var_os(SEED_ENV).is_some() {
                base.seed = cfg.pipeline.global_seed;
            } else if let Some(s) = seed {
                base.seed = s;
            }
            let jitter = Jitter {
                center_mm: jitter_center_mm,
                radius_mm: jitter_radius_mm,
            };
            let dirs = generate_dataset(count as usize, &base, &jitter, &output, validation)?;
            println!("{} case(s) written to {}", dirs.len(), output.display());
            Ok(0)
        }
        Command::Preview { case_dir, slice, out } => {
            let case = load_case(&case_dir, &cfg.labels)?;
            write_preview(&case, slice, &cfg.labels, &out)?;
            println!("{}", out.display());
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.global.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}
