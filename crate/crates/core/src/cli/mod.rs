//! The `eye-affect` command line.
//!
//! Exit codes: 0 success, 2 usage error, 3 data error, 4 numeric failure.

pub mod config;
pub mod report;
pub mod stages;

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::corpus::SynthConfig;
use crate::error::{Error, Result};
use crate::eval::EvalReport;
use crate::model::Checkpoint;
use crate::selection::read_sweep_csv;
pub use config::{ProtocolChoice, RunConfig};
pub use stages::{fuse, pipeline, PipelineOptions, PipelineOutcome, RunManifest, Selection, CACHE_ENV};

#[derive(Debug, Parser)]
#[command(name = "eye-affect", version, about = "Continuous arousal/valence prediction from eye tracking")]
pub struct Cli {
    /// INI configuration file; flags override its values.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Print the effective configuration and exit.
    #[arg(long, global = true)]
    pub show_config: bool,

    /// Repeat for more log output.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(flatten)]
    pub overrides: Overrides,

    #[command(subcommand)]
    pub command: Option<Command>,
}

/// Configuration overrides accepted by every subcommand.
#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    /// arousal or valence.
    #[arg(long, global = true)]
    pub dimension: Option<String>,
    /// before, during, after, none or all.
    #[arg(long, global = true)]
    pub protocol: Option<String>,
    /// Comma-separated MI thresholds in nats.
    #[arg(long, global = true, value_name = "LIST")]
    pub thresholds: Option<String>,
    /// `start:end:step` or a comma-separated list, in seconds.
    #[arg(long, global = true, value_name = "RANGE")]
    pub shifts: Option<String>,
    /// Run the delay sweep at every threshold.
    #[arg(long, global = true)]
    pub each_threshold: bool,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub learning_rate: Option<f64>,
    #[arg(long, global = true)]
    pub momentum: Option<f64>,
    #[arg(long, global = true)]
    pub max_epochs: Option<usize>,
    #[arg(long, global = true)]
    pub patience: Option<usize>,
    #[arg(long, global = true)]
    pub noise_sd: Option<f64>,
    /// Units per direction per layer, e.g. `40,30`.
    #[arg(long, global = true, value_name = "LIST")]
    pub hidden: Option<String>,
    /// Sweep again on fused features instead of reusing the eye selection.
    #[arg(long, global = true)]
    pub retune_fused: bool,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Derive per-frame eye descriptors from tracker CSVs.
    Ingest {
        #[arg(long)]
        frames: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Windowed 292-column feature rows from descriptor CSVs.
    Features {
        #[arg(long)]
        descriptors: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Feature cache directory.
        #[arg(long, env = CACHE_ENV)]
        cache_dir: Option<PathBuf>,
    },
    /// MI filtering and delay sweep; writes sweep.csv and selection.json.
    Select {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the BLSTM on a selection.
    Train {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        selection: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a trained model on one split.
    Eval {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value = "validation")]
        split: String,
        #[arg(long, default_value = "eye")]
        system: String,
        /// Eval CSV to write; printed to stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        predictions: Option<PathBuf>,
    },
    /// Concatenate eye features with external per-frame features.
    Fuse {
        #[arg(long)]
        eye: PathBuf,
        #[arg(long)]
        external: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Annotator-agreement CCC of a split.
    BaselineHumans {
        #[arg(long)]
        annotations: PathBuf,
        #[arg(long)]
        partition: Option<PathBuf>,
        #[arg(long, default_value = "train")]
        split: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a synthetic corpus with a planted annotation delay.
    Synth {
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value_t = 12)]
        subjects: usize,
        #[arg(long, default_value_t = 2.0)]
        minutes: f64,
        /// Planted delay in seconds.
        #[arg(long, default_value_t = 2.0)]
        lag: f64,
        #[arg(long, default_value_t = 3)]
        annotators: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Threshold tables and a CCC-versus-delay chart from a sweep CSV.
    Report {
        #[arg(long)]
        sweep: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Every stage from tracker CSVs to evaluation, with a run manifest.
    Pipeline {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Directory of external feature CSVs to fuse with the eye features.
        #[arg(long)]
        external: Option<PathBuf>,
        #[arg(long, env = CACHE_ENV)]
        cache_dir: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    /// Directory of feature CSVs.
    #[arg(long)]
    pub features: PathBuf,
    /// Directory of annotation CSVs for the configured dimension.
    #[arg(long)]
    pub annotations: PathBuf,
    /// Partition INI; the standard split when absent.
    #[arg(long)]
    pub partition: Option<PathBuf>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut RunConfig) -> Result<()> {
        let mut set = |section: &str, key: &str, value: Option<String>| -> Result<()> {
            match value {
                Some(v) => cfg.set(section, key, &v),
                None => Ok(()),
            }
        };
        set("run", "dimension", self.dimension.clone())?;
        set("run", "protocol", self.protocol.clone())?;
        set("selection", "thresholds", self.thresholds.clone())?;
        set("selection", "shifts", self.shifts.clone())?;
        set("model", "seed", self.seed.map(|v| v.to_string()))?;
        set("model", "learning_rate", self.learning_rate.map(|v| v.to_string()))?;
        set("model", "momentum", self.momentum.map(|v| v.to_string()))?;
        set("model", "max_epochs", self.max_epochs.map(|v| v.to_string()))?;
        set("model", "patience_epochs", self.patience.map(|v| v.to_string()))?;
        set("model", "input_noise_sd", self.noise_sd.map(|v| v.to_string()))?;
        set("model", "hidden_sizes", self.hidden.clone())?;
        if self.each_threshold {
            cfg.sweep.during_all_thresholds = true;
        }
        if self.retune_fused {
            cfg.retune_fused = true;
        }
        cfg.validate()
    }
}

/// Configuration from the optional INI file plus flag overrides.
pub fn resolve_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::from_ini_str(&fs::read_to_string(path)?)?,
        None => RunConfig::default(),
    };
    cli.overrides.apply(&mut cfg)?;
    Ok(cfg)
}

/// A failure tagged with the stage that produced it.
#[derive(Debug)]
pub struct StageError {
    pub stage: String,
    pub error: Error,
}

impl std::fmt::Display for StageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "stage `{}` failed: {}", self.stage, self.error)
    }
}

fn at<T>(stage: &str, r: Result<T>) -> std::result::Result<T, StageError> {
    r.map_err(|error| StageError {
        stage: stage.to_string(),
        error,
    })
}

fn open(path: &Path) -> Result<fs::File> {
    fs::File::open(path).map_err(|e| Error::Format(format!("cannot open {}: {e}", path.display())))
}

fn print_eval(reports: &[EvalReport], out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => stages::write_eval(reports, path),
        None => crate::eval::write_eval_csv(reports, std::io::stdout().lock()),
    }
}

fn load_sets(
    data: &DataArgs,
    cfg: &RunConfig,
) -> Result<(
    crate::corpus::Partition,
    std::collections::BTreeMap<String, crate::features::FeatureMatrix>,
    std::collections::BTreeMap<String, Vec<crate::corpus::AnnotationTrace>>,
)> {
    let partition = stages::load_partition(data.partition.as_deref())?;
    let features = stages::read_feature_dir(&data.features)?;
    let annotations = stages::read_annotation_dir(&data.annotations, cfg.dimension)?;
    Ok((partition, features, annotations))
}

/// Execute one parsed command line.
pub fn run(cli: &Cli) -> std::result::Result<(), StageError> {
    let cfg = at("config", resolve_config(cli))?;
    if cli.show_config {
        print!("{}", cfg.to_ini_string());
        return Ok(());
    }
    let Some(command) = &cli.command else {
        return Err(StageError {
            stage: "config".into(),
            error: Error::Argument("no subcommand given (see --help)".into()),
        });
    };
    match command {
        Command::Ingest { frames, out } => {
            at("ingest", stages::ingest(frames, out, &cfg))?;
        }
        Command::Features {
            descriptors,
            out,
            cache_dir,
        } => {
            at("features", stages::features(descriptors, out, cache_dir.as_deref()))?;
        }
        Command::Select { data, out } => {
            let (partition, features, ann) = at("select", load_sets(data, &cfg))?;
            let train = at("select", stages::split_subjects(&partition, "train", &features, &ann))?;
            let val = at("select", stages::split_subjects(&partition, "validation", &features, &ann))?;
            let (sel, _) = at("select", stages::select(&train, &val, &cfg, out))?;
            println!(
                "selected {} at D_s = {:.2} s: {} features, validation CCC {}",
                sel.threshold.map_or_else(|| "no MI filter".into(), |t| format!("MI threshold {t}")),
                sel.shift_s,
                sel.retained.len(),
                sel.val_ccc.map_or_else(|| "n/a".into(), |c| format!("{c:.4}"))
            );
        }
        Command::Train { data, selection, out } => {
            let sel = at("train", Selection::read(selection))?;
            let mut cfg = cfg.clone();
            cfg.dimension = sel.dimension;
            let (partition, features, ann) = at("train", load_sets(data, &cfg))?;
            let train = at("train", stages::split_subjects(&partition, "train", &features, &ann))?;
            let val = at("train", stages::split_subjects(&partition, "validation", &features, &ann))?;
            let (ck, _) = at("train", stages::train(&train, &val, &sel, &cfg, out))?;
            println!("trained {} features, best epoch {}", ck.feature_names.len(), ck.best_epoch);
        }
        Command::Eval {
            data,
            model,
            split,
            system,
            out,
            predictions,
        } => {
            let file = at("eval", open(model))?;
            let ck = at("eval", Checkpoint::read(std::io::BufReader::new(file), None))?;
            let (partition, features, ann) = at("eval", load_sets(data, &cfg))?;
            let set = at("eval", stages::split_subjects(&partition, split, &features, &ann))?;
            let report = at(
                "eval",
                stages::evaluate(&ck, &set, system, cfg.dimension, split, predictions.as_deref()),
            )?;
            at("eval", print_eval(&[report], out.as_deref()))?;
        }
        Command::Fuse { eye, external, out } => {
            at("fuse", stages::fuse_dirs(eye, external, out))?;
        }
        Command::BaselineHumans {
            annotations,
            partition,
            split,
            out,
        } => {
            let partition = at("baseline-humans", stages::load_partition(partition.as_deref()))?;
            let ann = at("baseline-humans", stages::read_annotation_dir(annotations, cfg.dimension))?;
            let ids = at("baseline-humans", stages::split_ids(&partition, split))?;
            let report = at("baseline-humans", stages::human_baseline(&ann, ids, cfg.dimension, split))?;
            at("baseline-humans", print_eval(&[report], out.as_deref()))?;
        }
        Command::Synth {
            seed,
            subjects,
            minutes,
            lag,
            annotators,
            out,
        } => {
            let synth = SynthConfig {
                seed: *seed,
                n_subjects: *subjects,
                duration: minutes * 60.0,
                lag: *lag,
                n_annotators: *annotators,
            };
            at("synth", stages::synth(&synth, out))?;
        }
        Command::Report { sweep, out } => {
            let file = at("report", open(sweep))?;
            let rows = at("report", read_sweep_csv(std::io::BufReader::new(file)))?;
            at("report", stages::report(&rows, out))?;
        }
        Command::Pipeline {
            data,
            out,
            external,
            cache_dir,
        } => {
            let opts = PipelineOptions {
                data: data.clone(),
                out: out.clone(),
                external: external.clone(),
                cache: cache_dir.clone(),
            };
            let outcome = stages::pipeline(&opts, &cfg).map_err(|(stage, error)| StageError { stage, error })?;
            for r in &outcome.evaluations {
                println!("{} {} {}: CCC {:.4}", r.system, r.dimension, r.split, r.ccc);
            }
        }
    }
    Ok(())
}

/// Parse, run, and map the outcome to an exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).try_init();
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.stage == "config" && matches!(e.error, Error::Argument(_) | Error::Config(_)) {
                2
            } else {
                e.error.exit_code()
            }
        }
    }
}
