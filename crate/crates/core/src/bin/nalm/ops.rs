//! Subcommand implementations.
//!
//! Every command reads and writes the documented external formats, so each
//! stage is independently runnable and `pipeline` is byte-identical to the
//! individual commands run in sequence with the same seed.

use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use nalm::archive;
use nalm::config::{PipelineConfig, SectionConfig, StorageFileConfig};
use nalm::disagg::{self, DisaggModel, TrainConfig};
use nalm::eval::{self, ConfusionCounts};
use nalm::events::{extract_usages, DebounceParams};
use nalm::ingest::{self, RawSample, RawSampleFile};
use nalm::report::{build_model, render_report, serialize_model};
use nalm::storage::{self, StorageConfig};
use nalm::synth::{self, SynthError};
use nalm::trace::{self, ApplianceId, LabelConfig, PowerTrace, StateMask, TraceOrigin, TraceSet};

use crate::{
    EvaluateArgs, IngestArgs, PipelineArgs, PredictArgs, PushArgs, ReportArgs, ScenarioArgs,
    ServeArgs, SynthesizeArgs, TrainArgs,
};

/// Why a command failed, split by exit class.
#[derive(Debug)]
pub enum Failure {
    /// The invocation itself is wrong (exit 1).
    Usage(String),
    /// The invocation is fine but the work failed (exit 2).
    Runtime(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Runtime(_) => 2,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Usage(message) | Failure::Runtime(message) => f.write_str(message),
        }
    }
}

fn usage(message: impl Display) -> Failure {
    Failure::Usage(message.to_string())
}

fn runtime(message: impl Display) -> Failure {
    Failure::Runtime(message.to_string())
}

// ---------------------------------------------------------------------------
// Shared file plumbing
// ---------------------------------------------------------------------------

fn read_text(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| runtime(format!("cannot read {}: {e}", path.display())))
}

fn read_bytes(path: &Path) -> Result<Vec<u8>, Failure> {
    fs::read(path).map_err(|e| runtime(format!("cannot read {}: {e}", path.display())))
}

fn ensure_parent(path: &Path) -> Result<(), Failure> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)
                .map_err(|e| runtime(format!("cannot create {}: {e}", parent.display())))?;
        }
    }
    Ok(())
}

fn write_text(path: &Path, text: &str) -> Result<(), Failure> {
    ensure_parent(path)?;
    fs::write(path, text).map_err(|e| runtime(format!("cannot write {}: {e}", path.display())))
}

fn load_sections(path: Option<&Path>) -> Result<SectionConfig, Failure> {
    match path {
        Some(path) => SectionConfig::load(path).map_err(usage),
        None => Ok(SectionConfig::default()),
    }
}

fn load_trace_set(path: &Path) -> Result<TraceSet, Failure> {
    archive::read_trace_set(&read_text(path)?)
        .map_err(|e| runtime(format!("{}: {e}", path.display())))
}

fn load_aggregate(path: &Path) -> Result<PowerTrace, Failure> {
    archive::read_aggregate(&read_text(path)?)
        .map_err(|e| runtime(format!("{}: {e}", path.display())))
}

fn load_mask(path: &Path) -> Result<StateMask, Failure> {
    archive::read_mask(&read_text(path)?).map_err(|e| runtime(format!("{}: {e}", path.display())))
}

fn day_start_epoch(day: NaiveDate) -> i64 {
    day.and_hms_opt(0, 0, 0)
        .expect("midnight exists")
        .and_utc()
        .timestamp()
}

/// Wire shape of one measurement, matching the storage service JSON.
#[derive(Serialize, Deserialize)]
struct WireMeasurement {
    t: i64,
    w: f64,
}

// ---------------------------------------------------------------------------
// ingest
// ---------------------------------------------------------------------------

fn parse_appliance_file(spec: &str) -> Result<(ApplianceId, PathBuf), Failure> {
    let bad = || {
        usage(format!(
            "'{spec}' is not NAME:TYPE=PATH (e.g. Kettle:kettle=kettle.csv)"
        ))
    };
    let (head, path) = spec.split_once('=').ok_or_else(bad)?;
    let (name, type_tag) = head.split_once(':').ok_or_else(bad)?;
    if path.is_empty() {
        return Err(bad());
    }
    let id = ApplianceId::new(name, type_tag).map_err(|e| usage(format!("'{spec}': {e}")))?;
    Ok((id, PathBuf::from(path)))
}

pub fn ingest(args: IngestArgs) -> Result<(), Failure> {
    let mut entries = Vec::new();
    for spec in &args.files {
        let (id, path) = parse_appliance_file(spec)?;
        let bytes = read_bytes(&path)?;
        let raw = ingest::parse_trace_file(&bytes, &path.display().to_string())
            .map_err(|e| runtime(format!("{}: {e}", path.display())))?;
        entries.push((id, raw));
    }
    let expected: Vec<ApplianceId> = entries.iter().map(|(id, _)| id.clone()).collect();
    let set = ingest::build_day(&expected, &entries, args.day, args.gap_fill).map_err(runtime)?;
    write_text(&args.out, &archive::write_trace_set(&set))?;
    println!(
        "wrote {} traces for {} to {}",
        set.len(),
        set.day(),
        args.out.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// synthesize
// ---------------------------------------------------------------------------

pub fn synthesize(args: SynthesizeArgs) -> Result<(), Failure> {
    let sections = load_sections(args.config.as_deref())?;
    let set = load_trace_set(&args.archive)?;
    let aggregate = trace::aggregate(&set).map_err(runtime)?;
    let labels = trace::label_set(&set, &sections.label).map_err(runtime)?;
    write_text(&args.aggregate, &archive::write_aggregate(&aggregate))?;
    write_text(&args.labels, &archive::write_mask(&labels))?;
    println!(
        "wrote aggregate ({} samples) to {}",
        aggregate.len(),
        args.aggregate.display()
    );
    println!(
        "wrote labels ({} appliances) to {}",
        labels.len(),
        args.labels.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// scenario
// ---------------------------------------------------------------------------

/// Pipeline config written next to generated scenario files: the scalar
/// fields first, then the sections, exactly the shape `pipeline` loads.
#[derive(Serialize)]
struct ScenarioPipelineConfig<'a> {
    user: &'a str,
    home: &'a str,
    day: NaiveDate,
    train_archive: &'a str,
    test_archive: &'a str,
    label: &'a LabelConfig,
    debounce: &'a DebounceParams,
    train: &'a TrainConfig,
}

fn scenario_config_toml(scene: &synth::Scenario) -> Result<String, Failure> {
    let doc = ScenarioPipelineConfig {
        user: &scene.user,
        home: &scene.home,
        day: scene.test.day(),
        train_archive: "train.traces",
        test_archive: "test.traces",
        label: &scene.label,
        debounce: &scene.debounce,
        train: &scene.train_config,
    };
    toml::to_string(&doc).map_err(|e| runtime(format!("cannot serialize scenario config: {e}")))
}

pub fn scenario(args: ScenarioArgs, seed: u64) -> Result<(), Failure> {
    let scene = synth::generate(&args.name, seed).map_err(|e| match e {
        SynthError::UnknownScenario(_) => usage(e),
        other => runtime(other),
    })?;
    let dir = &args.out_dir;
    let files = [
        ("train.traces", archive::write_trace_set(&scene.train)),
        ("train-truth.mask", archive::write_mask(&scene.train_truth)),
        ("test.traces", archive::write_trace_set(&scene.test)),
        ("test-truth.mask", archive::write_mask(&scene.test_truth)),
        ("pipeline.toml", scenario_config_toml(&scene)?),
    ];
    for (name, text) in &files {
        let path = dir.join(name);
        write_text(&path, text)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// train / predict
// ---------------------------------------------------------------------------

pub fn train(args: TrainArgs, seed: u64) -> Result<(), Failure> {
    let sections = load_sections(args.config.as_deref())?;
    let mut train_config = sections.train;
    if let Some(backend) = args.backend {
        train_config.backend = backend;
    }
    let aggregate = load_aggregate(&args.aggregate)?;
    let labels = load_mask(&args.labels)?;
    let started = Instant::now();
    let model = disagg::train(&aggregate, &labels, &train_config, seed).map_err(runtime)?;
    log::info!("trained in {:.2?}", started.elapsed());
    ensure_parent(&args.out)?;
    model
        .save(&args.out)
        .map_err(|e| runtime(format!("cannot write {}: {e}", args.out.display())))?;
    println!(
        "trained {} model for {} appliances -> {}",
        train_config.backend,
        labels.len(),
        args.out.display()
    );
    Ok(())
}

pub fn predict(args: PredictArgs) -> Result<(), Failure> {
    let model = DisaggModel::load(&args.model)
        .map_err(|e| runtime(format!("{}: {e}", args.model.display())))?;
    let aggregate = load_aggregate(&args.aggregate)?;
    let mask = disagg::predict(&model, &aggregate).map_err(runtime)?;
    write_text(&args.out, &archive::write_mask(&mask))?;
    println!(
        "wrote predicted mask ({} appliances, {} samples) to {}",
        mask.len(),
        mask.sample_len(),
        args.out.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// evaluate
// ---------------------------------------------------------------------------

pub fn evaluate(args: EvaluateArgs) -> Result<(), Failure> {
    let (rows, counts) = if let Some(counts_path) = &args.counts {
        let counted = archive::read_counts_csv(&read_text(counts_path)?)
            .map_err(|e| runtime(format!("{}: {e}", counts_path.display())))?;
        (eval::metric_rows_from_counts(&counted).map_err(runtime)?, None)
    } else {
        let pred = load_mask(args.pred.as_ref().expect("clap requires --pred"))?;
        let truth = load_mask(args.truth.as_ref().expect("clap requires --truth"))?;
        let evaluation = eval::confusion(&pred, &truth).map_err(runtime)?;
        let counts: Vec<(String, ConfusionCounts)> = evaluation
            .per_appliance
            .iter()
            .map(|(id, c)| (id.name.clone(), *c))
            .collect();
        (eval::metric_rows(&evaluation).map_err(runtime)?, Some(counts))
    };
    print!("{}", eval::format_table(&rows));
    if let Some(path) = &args.metrics_out {
        write_text(path, &eval::metrics_csv(&rows))?;
    }
    if let Some(path) = &args.counts_out {
        let counts = counts.expect("clap forbids --counts-out with --counts");
        write_text(path, &archive::write_counts_csv(&counts))?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// report
// ---------------------------------------------------------------------------

pub fn report(args: ReportArgs) -> Result<(), Failure> {
    let sections = load_sections(args.config.as_deref())?;
    let mask = load_mask(&args.mask)?;
    let usages = extract_usages(&mask, sections.debounce);
    let catalog: Vec<ApplianceId> = mask.appliances().cloned().collect();
    let model = build_model(&args.user, &args.home, usages, &catalog).map_err(usage)?;
    let text = render_report(&model, &sections.template).map_err(runtime)?;
    if let Some(path) = &args.out {
        write_text(path, &text)?;
    }
    if let Some(path) = &args.model_out {
        write_text(path, &serialize_model(&model))?;
    }
    if let Some(path) = &args.usages_out {
        write_text(path, &archive::write_usages(model.usages()))?;
    }
    print!("{text}");
    Ok(())
}

// ---------------------------------------------------------------------------
// serve
// ---------------------------------------------------------------------------

fn env_parse<T: FromStr>(name: &str) -> Result<Option<T>, Failure>
where
    T::Err: Display,
{
    match std::env::var(name) {
        Ok(value) => value
            .parse::<T>()
            .map(Some)
            .map_err(|e| usage(format!("{name}='{value}' is invalid: {e}"))),
        Err(std::env::VarError::NotPresent) => Ok(None),
        Err(e) => Err(usage(format!("{name}: {e}"))),
    }
}

pub fn serve(args: ServeArgs) -> Result<(), Failure> {
    let file = args
        .config
        .as_deref()
        .map(StorageFileConfig::load)
        .transpose()
        .map_err(usage)?;
    // Precedence: flag, then NALM_STORE_* environment, then config file.
    let listen = match args.listen {
        Some(listen) => listen,
        None => match env_parse("NALM_STORE_LISTEN")? {
            Some(listen) => listen,
            None => file.as_ref().map_or_else(
                || "127.0.0.1:8080".parse().expect("valid literal"),
                |f| f.listen,
            ),
        },
    };
    let data_dir = args
        .data_dir
        .or_else(|| std::env::var_os("NALM_STORE_DATA_DIR").map(PathBuf::from))
        .or_else(|| file.as_ref().map(|f| f.data_dir.clone()))
        .ok_or_else(|| {
            usage(
                "a data directory is required: pass --data-dir, set NALM_STORE_DATA_DIR, \
                 or put data_dir in the config",
            )
        })?;
    let max_batch = match args.max_batch {
        Some(n) => n,
        None => match env_parse("NALM_STORE_MAX_BATCH")? {
            Some(n) => n,
            None => file
                .as_ref()
                .map_or(storage::DEFAULT_MAX_BATCH, |f| f.max_batch),
        },
    };
    if max_batch == 0 {
        return Err(usage("max batch must be >= 1"));
    }
    let config = StorageConfig {
        listen,
        data_dir,
        max_batch,
    };
    storage::run_server(&config).map_err(runtime)
}

// ---------------------------------------------------------------------------
// push
// ---------------------------------------------------------------------------

#[derive(Deserialize)]
struct Accepted {
    accepted: u64,
}

pub fn push(args: PushArgs) -> Result<(), Failure> {
    if args.batch == 0 {
        return Err(usage("--batch must be >= 1"));
    }
    if !storage::valid_home_id(&args.home) {
        return Err(usage(format!("'{}' is not a valid home id", args.home)));
    }
    let base = args.url.trim_end_matches('/');
    if !(base.starts_with("http://") || base.starts_with("https://")) {
        return Err(usage("--url must start with http:// or https://"));
    }
    let aggregate = load_aggregate(&args.aggregate)?;
    let day_start = day_start_epoch(aggregate.day());
    let rows: Vec<WireMeasurement> = aggregate
        .samples()
        .iter()
        .enumerate()
        .map(|(i, &w)| WireMeasurement {
            t: day_start + i as i64,
            w,
        })
        .collect();
    let endpoint = format!("{base}/homes/{}/measurements", args.home);
    let client = reqwest::blocking::Client::new();
    let mut accepted = 0u64;
    let mut batches = 0u32;
    for chunk in rows.chunks(args.batch) {
        let response = client
            .post(&endpoint)
            .json(chunk)
            .send()
            .map_err(|e| runtime(format!("POST {endpoint}: {e}")))?;
        let status = response.status();
        if !status.is_success() {
            let body = response.text().unwrap_or_default();
            return Err(runtime(format!(
                "POST {endpoint} failed with {status}: {body}"
            )));
        }
        let ack: Accepted = response
            .json()
            .map_err(|e| runtime(format!("POST {endpoint}: invalid response: {e}")))?;
        accepted += ack.accepted;
        batches += 1;
    }
    println!(
        "pushed {accepted} measurements for home {} in {batches} batches",
        args.home
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// pipeline
// ---------------------------------------------------------------------------

fn fetch_day_aggregate(
    base_url: &str,
    home: &str,
    day: NaiveDate,
    gap_fill: u32,
) -> Result<PowerTrace, Failure> {
    let base = base_url.trim_end_matches('/');
    let start = day_start_epoch(day);
    let url = format!(
        "{base}/homes/{home}/measurements?from={start}&to={}",
        start + 86_400
    );
    let response =
        reqwest::blocking::get(&url).map_err(|e| runtime(format!("GET {url}: {e}")))?;
    let status = response.status();
    if !status.is_success() {
        let body = response.text().unwrap_or_default();
        return Err(runtime(format!("GET {url} failed with {status}: {body}")));
    }
    let rows: Vec<WireMeasurement> = response
        .json()
        .map_err(|e| runtime(format!("GET {url}: invalid response: {e}")))?;
    if rows.is_empty() {
        return Err(runtime(format!(
            "the service has no measurements for home {home} on {day}"
        )));
    }
    let raw = RawSampleFile::from_rows(
        url.clone(),
        rows.into_iter()
            .map(|m| RawSample {
                epoch: m.t,
                watts: m.w,
            })
            .collect(),
    )
    .map_err(|e| runtime(format!("{url}: {e}")))?;
    ingest::resample_to_1hz(&raw, gap_fill, TraceOrigin::Aggregate)
        .map_err(|e| runtime(format!("{url}: {e}")))
}

pub fn pipeline(args: PipelineArgs, seed: u64) -> Result<(), Failure> {
    let config = PipelineConfig::load(&args.config).map_err(usage)?;
    let config_dir = args
        .config
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .map_or_else(|| PathBuf::from("."), Path::to_path_buf);
    let resolve = |p: &Path| -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            config_dir.join(p)
        }
    };
    let out = |name: &str| args.out_dir.join(name);

    // Training data: per-appliance traces -> virtual meter + labels.
    let train_set = load_trace_set(&resolve(&config.train_archive))?;
    let train_aggregate = trace::aggregate(&train_set).map_err(runtime)?;
    let train_labels = trace::label_set(&train_set, &config.label).map_err(runtime)?;
    write_text(
        &out("train-aggregate.trace"),
        &archive::write_aggregate(&train_aggregate),
    )?;
    write_text(&out("train-labels.mask"), &archive::write_mask(&train_labels))?;

    // Model.
    let started = Instant::now();
    let model =
        disagg::train(&train_aggregate, &train_labels, &config.train, seed).map_err(runtime)?;
    log::info!(
        "trained {} model in {:.2?}",
        config.train.backend,
        started.elapsed()
    );
    let model_path = out("model.json");
    ensure_parent(&model_path)?;
    model
        .save(&model_path)
        .map_err(|e| runtime(format!("cannot write {}: {e}", model_path.display())))?;

    // The analyzed day: service measurements win over the archive.
    let test_set = match &config.test_archive {
        Some(path) => {
            let set = load_trace_set(&resolve(path))?;
            if set.day() != config.day {
                return Err(runtime(format!(
                    "test archive covers {} but the config day is {}",
                    set.day(),
                    config.day
                )));
            }
            Some(set)
        }
        None => None,
    };
    let test_aggregate = match &config.service_url {
        Some(url) => {
            fetch_day_aggregate(url, &config.home, config.day, config.gap_fill_seconds)?
        }
        None => trace::aggregate(test_set.as_ref().expect("config validation requires a source"))
            .map_err(runtime)?,
    };
    write_text(
        &out("test-aggregate.trace"),
        &archive::write_aggregate(&test_aggregate),
    )?;

    // Predictions.
    let predicted = disagg::predict(&model, &test_aggregate).map_err(runtime)?;
    write_text(&out("predicted.mask"), &archive::write_mask(&predicted))?;

    // Metrics whenever ground truth is available.
    if let Some(set) = &test_set {
        let truth = trace::label_set(set, &config.label).map_err(runtime)?;
        write_text(&out("test-labels.mask"), &archive::write_mask(&truth))?;
        let evaluation = eval::confusion(&predicted, &truth).map_err(runtime)?;
        let counts: Vec<(String, ConfusionCounts)> = evaluation
            .per_appliance
            .iter()
            .map(|(id, c)| (id.name.clone(), *c))
            .collect();
        write_text(&out("counts.csv"), &archive::write_counts_csv(&counts))?;
        let rows = eval::metric_rows(&evaluation).map_err(runtime)?;
        write_text(&out("metrics.csv"), &eval::metrics_csv(&rows))?;
    }

    // Usages, behavior document, report.
    let usages = extract_usages(&predicted, config.debounce);
    let catalog: Vec<ApplianceId> = predicted.appliances().cloned().collect();
    let behavior = build_model(&config.user, &config.home, usages, &catalog).map_err(runtime)?;
    write_text(&out("usages.csv"), &archive::write_usages(behavior.usages()))?;
    write_text(&out("behavior.xml"), &serialize_model(&behavior))?;
    let text = render_report(&behavior, &config.template).map_err(runtime)?;
    write_text(&out("report.txt"), &text)?;
    print!("{text}");
    Ok(())
}
