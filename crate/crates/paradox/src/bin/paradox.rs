//! Command-line front end. All logic lives in the library; this binary
//! parses flags, wires the pipeline, and maps errors to exit codes
//! (0 success, 1 validation error, 2 provider failure).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use paradox::config::PipelineConfig;
use paradox::error::Error;
use paradox::eval::ReportFormat;
use paradox::pipeline;

#[derive(Parser)]
#[command(
    name = "paradox",
    about = "Build, verify, reverse, and score adversarial paralinguistic speech benchmarks; \
             run the probing and mixer numerics lab.",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// Pipeline configuration file (TOML). Defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Run offline against the deterministic stub providers.
    #[arg(long)]
    stub: bool,
    /// Global seed override.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (0 = one per CPU).
    #[arg(long)]
    jobs: Option<usize>,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<PipelineConfig, Error> {
        let mut config = match &self.config {
            Some(path) => PipelineConfig::load(path)?,
            None => PipelineConfig::default(),
        };
        if self.stub {
            config.stub = true;
        }
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        if let Some(jobs) = self.jobs {
            config.jobs = jobs;
        }
        Ok(config)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Build a benchmark manifest plus audio sidecars.
    Build {
        #[command(flatten)]
        common: ConfigArgs,
        /// Output directory for manifest.jsonl and audio/.
        #[arg(long, default_value = "dataset")]
        out: PathBuf,
        /// Items per task.
        #[arg(long)]
        items_per_task: Option<usize>,
        /// Comma-separated task subset (default: all ten).
        #[arg(long, value_delimiter = ',')]
        tasks: Vec<String>,
        /// Mark the output as training data rather than an eval benchmark.
        #[arg(long)]
        training: bool,
    },
    /// Run the verification gates over a manifest.
    Verify {
        #[command(flatten)]
        common: ConfigArgs,
        #[arg(long)]
        manifest: PathBuf,
        /// Disable the exact-transcript ASR gate.
        #[arg(long)]
        skip_transcript_gate: bool,
        /// Disable the lexical contradiction gate.
        #[arg(long)]
        skip_lexical_gate: bool,
        /// Disable the reversed-audio emotion referee.
        #[arg(long)]
        skip_emotion_referee: bool,
    },
    /// Score model responses against a manifest.
    Eval {
        #[arg(long)]
        manifest: PathBuf,
        /// Responses JSONL: {"item_id", "raw_text", "model_id"} per line.
        #[arg(long)]
        responses: PathBuf,
        /// json | table | csv
        #[arg(long, default_value = "table")]
        format: String,
        /// Write the report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Rewrite labels for time-reversed audio before scoring.
        #[arg(long)]
        reversed_labels: bool,
    },
    /// Derive the reversed-audio dataset (flipping labels of temporally
    /// dependent tasks).
    Reverse {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Worker threads (0 = one per CPU).
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Train layer probes over a feature dump and emit the accuracy curve.
    Probe {
        /// Feature dump file.
        #[arg(long)]
        dump: Option<PathBuf>,
        /// Generate a synthetic dump planted at this layer id instead.
        #[arg(long)]
        synth_planted: Option<i64>,
        /// Probe depth: 1 (linear), 3, or 5.
        #[arg(long, default_value_t = 3)]
        depth: usize,
        #[arg(long, default_value_t = 10)]
        folds: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Training epochs (default 200).
        #[arg(long)]
        epochs: Option<usize>,
        /// Hidden width (default 256).
        #[arg(long)]
        hidden_dim: Option<usize>,
        /// Curve JSON output path.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Curve CSV output path (for external plotting).
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Run the mixer/preference numerics checks and print a JSON report.
    Mix {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn with_jobs<T>(jobs: Option<usize>, f: impl FnOnce() -> Result<T, Error> + Send) -> Result<T, Error>
where
    T: Send,
{
    match jobs {
        Some(n) if n > 0 => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::InvalidInput(format!("cannot size worker pool: {e}")))?
            .install(f),
        _ => f(),
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Build { common, out, items_per_task, tasks, training } => {
            let mut config = common.resolve()?;
            if let Some(n) = items_per_task {
                config.items_per_task = n;
            }
            if !tasks.is_empty() {
                config.tasks = tasks;
            }
            if training {
                config.purpose = "training".into();
            }
            let jobs = (config.jobs > 0).then_some(config.jobs);
            let manifest = with_jobs(jobs, || pipeline::cmd_build(&config, &out))?;
            println!("{}", manifest.display());
            Ok(())
        }
        Command::Verify {
            common,
            manifest,
            skip_transcript_gate,
            skip_lexical_gate,
            skip_emotion_referee,
        } => {
            let mut config = common.resolve()?;
            config.gates.transcript &= !skip_transcript_gate;
            config.gates.lexical &= !skip_lexical_gate;
            config.gates.emotion_referee &= !skip_emotion_referee;
            let jobs = (config.jobs > 0).then_some(config.jobs);
            let summary = with_jobs(jobs, || pipeline::cmd_verify(&manifest, &config))?;
            println!(
                "kept {} rejected {} held {} -> {}",
                summary.kept,
                summary.rejected,
                summary.held,
                summary.kept_path.display()
            );
            Ok(())
        }
        Command::Eval { manifest, responses, format, out, reversed_labels } => {
            let format = ReportFormat::parse(&format)?;
            let (_, rendered) =
                pipeline::cmd_eval(&manifest, &responses, format, reversed_labels)?;
            match out {
                Some(path) => std::fs::write(path, rendered)?,
                None => {
                    use std::io::Write;
                    std::io::stdout().write_all(&rendered)?;
                }
            }
            Ok(())
        }
        Command::Reverse { manifest, out, jobs } => {
            let path = with_jobs(jobs, || pipeline::cmd_reverse(&manifest, &out))?;
            println!("{}", path.display());
            Ok(())
        }
        Command::Probe { dump, synth_planted, depth, folds, seed, epochs, hidden_dim, out, csv, jobs } => {
            let args = pipeline::ProbeArgs {
                dump,
                synth_planted,
                depth,
                folds,
                seed,
                epochs,
                hidden_dim,
                out,
                csv,
            };
            let curve = with_jobs(jobs, || pipeline::cmd_probe(&args))?;
            for entry in &curve.entries {
                println!(
                    "layer {:>5}  acc {:.3} ± {:.3}",
                    entry.layer_id, entry.mean_accuracy, entry.std_accuracy
                );
            }
            if let Some(gap) = curve.utilization_gap() {
                println!("utilization gap: {gap:.3}");
            }
            Ok(())
        }
        Command::Mix { seed, out } => {
            let report = pipeline::cmd_mix(seed)?;
            let rendered = serde_json::to_string_pretty(&report)
                .map_err(|e| Error::Format(e.to_string()))?;
            match out {
                Some(path) => std::fs::write(path, rendered + "\n")?,
                None => println!("{rendered}"),
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    // flag/usage errors are validation errors (exit 1), not clap's default 2,
    // which is reserved for provider failures
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e)
            if matches!(
                e.kind(),
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion
            ) =>
        {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e @ (Error::Provider { .. } | Error::EmptyBatch(_))) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
