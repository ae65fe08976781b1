//! `nalm` — appliance-level load monitoring from a single aggregate meter.
//!
//! Subcommands cover every pipeline stage (ingest raw samples, derive the
//! virtual-meter aggregate and labels, train, predict, evaluate, report),
//! the measurement storage service, and an end-to-end `pipeline` command
//! driven by one TOML config. Exit codes: 0 ok, 1 usage error, 2 runtime
//! error.

mod ops;

use std::net::SocketAddr;
use std::path::PathBuf;

use chrono::NaiveDate;
use clap::{ArgGroup, Args, Parser, Subcommand};

use nalm::disagg::BackendKind;

#[derive(Parser)]
#[command(
    name = "nalm",
    version,
    about = "Appliance-level load monitoring: disaggregate a single meter signal \
             into per-appliance usage and natural-language reports.",
    propagate_version = true
)]
struct Cli {
    /// Seed for every randomized stage (scenario synthesis, model training).
    #[arg(long, global = true, default_value_t = 42)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Convert per-appliance sample files into a one-day trace archive.
    Ingest(IngestArgs),
    /// Derive the virtual-meter aggregate and ON/OFF labels from an archive.
    Synthesize(SynthesizeArgs),
    /// Write a bundled synthetic scenario: traces, truth, ready-to-run config.
    Scenario(ScenarioArgs),
    /// Train a disaggregation model from an aggregate trace and labels.
    Train(TrainArgs),
    /// Predict per-appliance ON/OFF states from an aggregate trace.
    Predict(PredictArgs),
    /// Print the metric table from predictions and truth, or from counts.
    Evaluate(EvaluateArgs),
    /// Turn a predicted mask into usage intervals and a report.
    Report(ReportArgs),
    /// Run the measurement storage service until Ctrl-C.
    Serve(ServeArgs),
    /// Upload an aggregate trace to the storage service as raw measurements.
    Push(PushArgs),
    /// Run the whole pipeline from one config file.
    Pipeline(PipelineArgs),
}

#[derive(Args)]
pub struct IngestArgs {
    /// Appliance sample files as NAME:TYPE=PATH (e.g. Kettle:kettle=day1.csv).
    #[arg(required = true, value_name = "NAME:TYPE=PATH")]
    pub files: Vec<String>,
    /// Day the archive must cover (YYYY-MM-DD).
    #[arg(long)]
    pub day: NaiveDate,
    /// Output trace-archive path.
    #[arg(long)]
    pub out: PathBuf,
    /// Longest sensor gap in seconds bridged by repeating the last sample;
    /// longer gaps read as 0 W (plug meters drop out briefly, but a long
    /// silence means OFF).
    #[arg(long, default_value_t = 10)]
    pub gap_fill: u32,
}

#[derive(Args)]
pub struct SynthesizeArgs {
    /// Trace archive with per-appliance traces.
    pub archive: PathBuf,
    /// Output path for the summed aggregate trace.
    #[arg(long)]
    pub aggregate: PathBuf,
    /// Output path for the threshold-derived ON/OFF mask.
    #[arg(long)]
    pub labels: PathBuf,
    /// Config file supplying the [label] thresholds.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Args)]
pub struct ScenarioArgs {
    /// Scenario name: demo, separable, or overlapping.
    pub name: String,
    /// Directory for the generated files.
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Args)]
pub struct TrainArgs {
    /// Aggregate trace file to learn from.
    #[arg(long)]
    pub aggregate: PathBuf,
    /// ON/OFF mask file aligned with the aggregate.
    #[arg(long)]
    pub labels: PathBuf,
    /// Output model path.
    #[arg(long)]
    pub out: PathBuf,
    /// Config file supplying the [train] section.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override the configured backend (forest or margin).
    #[arg(long)]
    pub backend: Option<BackendKind>,
}

#[derive(Args)]
pub struct PredictArgs {
    /// Trained model file.
    #[arg(long)]
    pub model: PathBuf,
    /// Aggregate trace file to disaggregate.
    #[arg(long)]
    pub aggregate: PathBuf,
    /// Output mask path.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
#[command(group(
    ArgGroup::new("input").args(["pred", "counts"]).required(true)
))]
pub struct EvaluateArgs {
    /// Predicted mask file (pairs with --truth).
    #[arg(long, requires = "truth")]
    pub pred: Option<PathBuf>,
    /// Ground-truth mask file.
    #[arg(long, requires = "pred", conflicts_with = "counts")]
    pub truth: Option<PathBuf>,
    /// Confusion-count CSV to score instead of mask files.
    #[arg(long)]
    pub counts: Option<PathBuf>,
    /// Write the metric rows as CSV.
    #[arg(long)]
    pub metrics_out: Option<PathBuf>,
    /// Write the confusion counts as CSV (mask mode only).
    #[arg(long, conflicts_with = "counts")]
    pub counts_out: Option<PathBuf>,
}

#[derive(Args)]
pub struct ReportArgs {
    /// Predicted ON/OFF mask file.
    #[arg(long)]
    pub mask: PathBuf,
    /// Person named in the report sentences.
    #[arg(long)]
    pub user: String,
    /// Home identifier recorded in the behavior document.
    #[arg(long, default_value = "home")]
    pub home: String,
    /// Config file supplying the [debounce] and [template] sections.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Also write the report text here.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Write the behavior document (XML) here.
    #[arg(long)]
    pub model_out: Option<PathBuf>,
    /// Write the usage intervals (CSV) here.
    #[arg(long)]
    pub usages_out: Option<PathBuf>,
}

#[derive(Args)]
pub struct ServeArgs {
    /// Config file with listen/data_dir/max_batch.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Listen address, e.g. 127.0.0.1:8080 (0 picks a free port).
    #[arg(long)]
    pub listen: Option<SocketAddr>,
    /// Directory for the append-only measurement logs.
    #[arg(long)]
    pub data_dir: Option<PathBuf>,
    /// Largest accepted POST batch.
    #[arg(long)]
    pub max_batch: Option<usize>,
}

#[derive(Args)]
pub struct PushArgs {
    /// Base URL of the storage service, e.g. http://127.0.0.1:8080.
    #[arg(long)]
    pub url: String,
    /// Home the measurements belong to.
    #[arg(long)]
    pub home: String,
    /// Aggregate trace file whose samples become measurements.
    #[arg(long)]
    pub aggregate: PathBuf,
    /// Measurements per POST request.
    #[arg(long, default_value_t = 5000)]
    pub batch: usize,
}

#[derive(Args)]
pub struct PipelineArgs {
    /// Pipeline config (TOML). Relative paths resolve against its directory.
    #[arg(long)]
    pub config: PathBuf,
    /// Directory for every produced artifact.
    #[arg(long)]
    pub out_dir: PathBuf,
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    let result = match cli.command {
        Command::Ingest(args) => ops::ingest(args),
        Command::Synthesize(args) => ops::synthesize(args),
        Command::Scenario(args) => ops::scenario(args, cli.seed),
        Command::Train(args) => ops::train(args, cli.seed),
        Command::Predict(args) => ops::predict(args),
        Command::Evaluate(args) => ops::evaluate(args),
        Command::Report(args) => ops::report(args),
        Command::Serve(args) => ops::serve(args),
        Command::Push(args) => ops::push(args),
        Command::Pipeline(args) => ops::pipeline(args, cli.seed),
    };
    if let Err(failure) = result {
        eprintln!("error: {failure}");
        std::process::exit(failure.exit_code());
    }
}
