//! One function per subcommand.

use std::fs::File;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use telemetry_anomaly::costmodel::{
    budget_table, format_table, profile as cost_profile, BudgetRow, CostReport, PlatformBudget,
};
use telemetry_anomaly::data::{
    apply_normalizer, fit_normalizer, read_csv, synthesize, write_csv, CsvSchema, NormParams,
    SyntheticSpec, TimeSeries, WindowSpec,
};
use telemetry_anomaly::detectors::{
    detect_classify, detect_forecast, detect_image, flags_from_events, forecast_dataset,
    image_dataset, window_dataset, ClassifyConfig, DetectionReport, ForecastConfig, ImageConfig,
    Pipeline, ThresholdParams,
};
use telemetry_anomaly::gaf::{export_pgm, gaf_stack, save_stack, GafConfig};
use telemetry_anomaly::metrics::{evaluate as evaluate_events, EventReport, MetricConfig};
use telemetry_anomaly::nn::{
    load_weights, save_weights, train as train_model, Dataset, Model, ModelSpec, TrainConfig,
};
use telemetry_anomaly::rng::derive_seed;
use telemetry_anomaly::search::{
    export_front, family_loss, run_search, save_trials, ArchitectureConfig, ParetoFront,
    RandomSampler, SearchConfig, TrialData, TrialStatus,
};

use crate::config::{ensure_dir, load, read_json, write_json, write_text, Loaded};
use crate::error::{io_context, CliError};

const WEIGHTS_FILE: &str = "model.tadw";
const BUNDLE_FILE: &str = "bundle.json";

fn yes() -> bool {
    true
}

fn default_validation() -> f64 {
    0.2
}

fn default_probability() -> f64 {
    0.5
}

fn load_series<T>(
    job: &Loaded<T>,
    data: &Path,
    schema: &CsvSchema,
) -> Result<TimeSeries, CliError> {
    let path = job.path(data);
    let file = File::open(&path).map_err(io_context(format!("cannot open {}", path.display())))?;
    Ok(read_csv(file, schema)?)
}

pub fn synth(config: &Path, out: &Path, seed: Option<u64>) -> Result<(), CliError> {
    let job: Loaded<SyntheticSpec> = load(config)?;
    let mut spec = job.value;
    if let Some(root) = seed {
        spec.seed = derive_seed(root, "synth");
    }
    let series = synthesize(&spec)?;
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        ensure_dir(dir)?;
    }
    write_csv(&series, out)?;
    Ok(())
}

/// How a series becomes training samples; shared by `train` and `search`.
// Flattened into the job structs, which rules out `deny_unknown_fields` there.
#[derive(Debug, Clone, Deserialize)]
struct DataSetup {
    data: PathBuf,
    #[serde(default)]
    schema: CsvSchema,
    /// Trailing share of the series held out for validation.
    #[serde(default = "default_validation")]
    validation_fraction: f64,
    /// Min-max scale channels with parameters fitted on the training part.
    #[serde(default = "yes")]
    normalize: bool,
    /// Window for classifiers; for forecasters only `length` (the history) is used.
    #[serde(default)]
    window: WindowSpec,
    /// Forecast target channels; all when absent.
    #[serde(default)]
    targets: Option<Vec<usize>>,
    #[serde(default)]
    gaf: GafConfig,
}

struct Prepared {
    data: TrialData,
    normalizer: Option<NormParams>,
    channel_names: Vec<String>,
}

fn prepare(
    setup: &DataSetup,
    series: &TimeSeries,
    pipeline: Pipeline,
) -> Result<Prepared, CliError> {
    let vf = setup.validation_fraction;
    if !(vf > 0.0 && vf < 1.0) {
        return Err(CliError::invalid("validation_fraction must be in (0, 1)"));
    }
    setup.window.validate()?;
    let n = series.len();
    let n_val = (n as f64 * vf).floor() as usize;
    let cut = n - n_val;
    let (mut train, mut val) = (series.slice(0..cut), series.slice(cut..n));
    let normalizer = if setup.normalize {
        let params = fit_normalizer(&train)?;
        train = apply_normalizer(&train, &params)?;
        val = apply_normalizer(&val, &params)?;
        Some(params)
    } else {
        None
    };
    let c = series.n_channels();
    let w = setup.window.length;
    let (train_set, val_set, input_shape, n_outputs): (Dataset, Dataset, Vec<usize>, usize) =
        match pipeline {
            Pipeline::Forecast => {
                let targets =
                    forecast_setup(setup, ThresholdParams::default()).target_channels(c)?;
                (
                    forecast_dataset(&train, w, &targets, true)?,
                    forecast_dataset(&val, w, &targets, true)?,
                    vec![w, c],
                    targets.len(),
                )
            }
            Pipeline::Classify => (
                window_dataset(&train, &setup.window)?,
                window_dataset(&val, &setup.window)?,
                vec![w, c],
                1,
            ),
            Pipeline::Image => {
                let s = setup.gaf.resolution;
                (
                    image_dataset(&train, &setup.window, &setup.gaf)?,
                    image_dataset(&val, &setup.window, &setup.gaf)?,
                    vec![s, s, c],
                    1,
                )
            }
        };
    Ok(Prepared {
        data: TrialData {
            train: train_set,
            validation: val_set,
            input_shape,
            n_outputs,
        },
        normalizer,
        channel_names: series.channel_names().to_vec(),
    })
}

fn forecast_setup(setup: &DataSetup, threshold: ThresholdParams) -> ForecastConfig {
    ForecastConfig {
        window: setup.window.length,
        targets: setup.targets.clone(),
        threshold,
    }
}

/// Everything `detect` needs besides the weights.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Bundle {
    pipeline: Pipeline,
    channel_names: Vec<String>,
    normalizer: Option<NormParams>,
    window: WindowSpec,
    targets: Option<Vec<usize>>,
    gaf: GafConfig,
}

#[derive(Debug, Deserialize)]
struct TrainJob {
    pipeline: Pipeline,
    #[serde(flatten)]
    setup: DataSetup,
    #[serde(default)]
    model: Option<ModelSpec>,
    #[serde(default)]
    architecture: Option<ArchitectureConfig>,
    #[serde(default)]
    train: TrainConfig,
}

pub fn train(config: &Path, out: &Path, seed: Option<u64>) -> Result<(), CliError> {
    let job: Loaded<TrainJob> = load(config)?;
    let setup = &job.value.setup;
    let pipeline = job.value.pipeline;
    let series = load_series(&job, &setup.data, &setup.schema)?;
    let prepared = prepare(setup, &series, pipeline)?;
    let data = &prepared.data;

    let spec = match (&job.value.model, &job.value.architecture) {
        (Some(m), None) => m.clone(),
        (None, Some(a)) => {
            if a.family != pipeline {
                return Err(CliError::invalid("architecture.family must match pipeline"));
            }
            a.to_model_spec(&data.input_shape, data.n_outputs)?
        }
        _ => {
            return Err(CliError::invalid(
                "exactly one of `model` or `architecture` is required",
            ))
        }
    };
    if spec.input_shape != data.input_shape {
        return Err(CliError::invalid(format!(
            "model.input_shape {:?} does not match the data samples {:?}",
            spec.input_shape, data.input_shape
        )));
    }
    let mut cfg = job.value.train.clone();
    cfg.validate()?;
    let root = seed.unwrap_or(cfg.seed);
    cfg.loss = family_loss(pipeline);
    cfg.seed = derive_seed(root, "train");
    let mut model = Model::new(spec, derive_seed(root, "init"))?;
    let report = train_model(&mut model, &data.train, &data.validation, &cfg)?;

    ensure_dir(out)?;
    save_weights(&model, out.join(WEIGHTS_FILE))?;
    let bundle = Bundle {
        pipeline,
        channel_names: prepared.channel_names.clone(),
        normalizer: prepared.normalizer.clone(),
        window: setup.window,
        targets: setup.targets.clone(),
        gaf: setup.gaf,
    };
    write_json(&bundle, &out.join(BUNDLE_FILE))?;
    write_json(&report, &out.join("train_report.json"))?;
    Ok(())
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct DetectJob {
    data: PathBuf,
    #[serde(default)]
    schema: CsvSchema,
    /// Directory written by `train`.
    model: PathBuf,
    #[serde(default)]
    threshold: ThresholdParams,
    /// Window probability at which classifiers flag.
    #[serde(default = "default_probability")]
    probability: f64,
    /// Window stride at detection time; the training stride when absent.
    #[serde(default)]
    stride: Option<usize>,
}

pub fn detect(config: &Path, out: &Path) -> Result<(), CliError> {
    let job: Loaded<DetectJob> = load(config)?;
    let j = &job.value;
    let dir = job.path(&j.model);
    let bundle: Bundle = read_json(&dir.join(BUNDLE_FILE))?;
    let model = load_weights(dir.join(WEIGHTS_FILE))?;
    let mut series = load_series(&job, &j.data, &j.schema)?;
    if series.channel_names() != bundle.channel_names.as_slice() {
        return Err(CliError::invalid(format!(
            "data channels {:?} differ from the trained channels {:?}",
            series.channel_names(),
            bundle.channel_names
        )));
    }
    if let Some(norm) = &bundle.normalizer {
        series = apply_normalizer(&series, norm)?;
    }
    let mut window = bundle.window;
    if let Some(stride) = j.stride {
        window.stride = stride;
    }
    let result = match bundle.pipeline {
        Pipeline::Forecast => {
            let cfg = ForecastConfig {
                window: window.length,
                targets: bundle.targets.clone(),
                threshold: j.threshold.clone(),
            };
            detect_forecast(&series, &model, &cfg)?
        }
        Pipeline::Classify => {
            let cfg = ClassifyConfig {
                window,
                threshold: j.probability,
            };
            detect_classify(&series, &model, &cfg)?
        }
        Pipeline::Image => {
            let cfg = ImageConfig {
                window,
                gaf: bundle.gaf,
                threshold: j.probability,
            };
            detect_image(&series, &model, &cfg)?
        }
    };
    write_json(&result.report(), out)
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct EvaluateJob {
    /// Series carrying the ground-truth labels.
    data: PathBuf,
    #[serde(default)]
    schema: CsvSchema,
    /// Output of `detect` on the same series.
    detection: PathBuf,
    #[serde(default)]
    metric: MetricConfig,
}

pub fn evaluate(config: &Path, out: &Path) -> Result<(), CliError> {
    let job: Loaded<EvaluateJob> = load(config)?;
    let j = &job.value;
    let series = load_series(&job, &j.data, &j.schema)?;
    let detection: DetectionReport = read_json(&job.path(&j.detection))?;
    let flags = flags_from_events(&detection.events, series.timestamps());
    let report = evaluate_events(&flags, series.labels(), series.timestamps(), &j.metric)?;
    write_json(&report, out)
}

fn first_window() -> Vec<usize> {
    vec![0]
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct GafJob {
    data: PathBuf,
    #[serde(default)]
    schema: CsvSchema,
    #[serde(default)]
    window: WindowSpec,
    #[serde(default)]
    gaf: GafConfig,
    /// Window indices to export.
    #[serde(default = "first_window")]
    windows: Vec<usize>,
    /// Min-max scale with parameters fitted on the whole series.
    #[serde(default = "yes")]
    normalize: bool,
}

pub fn gaf(config: &Path, out: &Path) -> Result<(), CliError> {
    let job: Loaded<GafJob> = load(config)?;
    let j = &job.value;
    j.window.validate()?;
    j.gaf.validate()?;
    let mut series = load_series(&job, &j.data, &j.schema)?;
    if j.normalize {
        series = apply_normalizer(&series, &fit_normalizer(&series)?)?;
    }
    let count = j.window.count(series.len());
    let c = series.n_channels();
    let s = j.gaf.resolution;
    ensure_dir(out)?;
    for &id in &j.windows {
        if id >= count {
            return Err(CliError::invalid(format!(
                "windows: index {id} out of range ({count} windows)"
            )));
        }
        let start = id * j.window.stride;
        let values = &series.values()[start * c..(start + j.window.length) * c];
        let stack = gaf_stack(values, c, &j.gaf, id)?;
        for (ch, name) in series.channel_names().iter().enumerate() {
            export_pgm(
                stack.image(ch),
                s,
                out.join(format!("window_{id}_{name}.pgm")),
            )?;
        }
        save_stack(
            &stack,
            series.channel_names(),
            j.gaf.variant,
            out,
            &format!("window_{id}"),
        )?;
    }
    Ok(())
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum PlatformRef {
    Name(String),
    Custom(PlatformBudget),
}

fn builtin_platforms() -> Vec<PlatformRef> {
    vec![
        PlatformRef::Name("cubesat".into()),
        PlatformRef::Name("ops-sat".into()),
    ]
}

fn resolve_platforms(refs: &[PlatformRef]) -> Result<Vec<PlatformBudget>, CliError> {
    refs.iter()
        .map(|r| match r {
            PlatformRef::Name(n) => Ok(PlatformBudget::by_name(n)?),
            PlatformRef::Custom(p) => Ok(PlatformBudget::new(
                p.name.clone(),
                p.ram_bytes,
                p.rom_bytes,
            )?),
        })
        .collect()
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProfileJob {
    #[serde(default)]
    name: Option<String>,
    #[serde(default)]
    model: Option<ModelSpec>,
    /// Weight file whose embedded architecture is profiled.
    #[serde(default)]
    weights: Option<PathBuf>,
    #[serde(default = "builtin_platforms")]
    platforms: Vec<PlatformRef>,
}

pub fn profile(config: &Path, out: &Path) -> Result<(), CliError> {
    let job: Loaded<ProfileJob> = load(config)?;
    let j = &job.value;
    let spec = match (&j.model, &j.weights) {
        (Some(m), None) => m.clone(),
        (None, Some(w)) => load_weights(job.path(w))?.spec().clone(),
        _ => {
            return Err(CliError::invalid(
                "exactly one of `model` or `weights` is required",
            ))
        }
    };
    let platforms = resolve_platforms(&j.platforms)?;
    let cost = cost_profile(&spec)?;
    let row = BudgetRow {
        system: j.name.clone().unwrap_or_else(|| "model".into()),
        ram_kb: cost.ram_kb,
        rom_kb: cost.rom_kb,
    };
    let table = budget_table(&[row], &platforms);
    ensure_dir(out)?;
    write_json(&cost, &out.join("cost.json"))?;
    write_text(&table, &out.join("budget.txt"))?;
    print!("{table}");
    Ok(())
}

#[derive(Debug, Deserialize)]
struct SearchJob {
    #[serde(flatten)]
    setup: DataSetup,
    search: SearchConfig,
}

#[derive(Debug, Serialize)]
struct SearchSummary {
    n_trials: usize,
    completed: usize,
    pruned: usize,
    failed: usize,
    front: Option<ParetoFront>,
}

pub fn search(
    config: &Path,
    out: &Path,
    seed: Option<u64>,
    workers: Option<usize>,
) -> Result<(), CliError> {
    let job: Loaded<SearchJob> = load(config)?;
    let mut cfg = job.value.search.clone();
    if let Some(w) = workers {
        cfg.workers = w;
    }
    cfg.validate()?;
    let setup = &job.value.setup;
    let series = load_series(&job, &setup.data, &setup.schema)?;
    let prepared = prepare(setup, &series, cfg.space.family)?;
    let root = seed.unwrap_or(cfg.train.seed);
    let mut sampler = RandomSampler::new(derive_seed(root, "sampler"));
    let outcome = run_search(
        &cfg,
        &prepared.data,
        &mut sampler,
        derive_seed(root, "search"),
    )?;

    ensure_dir(out)?;
    save_trials(&outcome.trials, out.join("trials.jsonl"))?;
    export_front(
        &outcome.trials,
        outcome.front.as_ref(),
        out.join("front.csv"),
    )?;
    let count = |s| outcome.trials.iter().filter(|t| t.status == s).count();
    let summary = SearchSummary {
        n_trials: outcome.trials.len(),
        completed: count(TrialStatus::Completed),
        pruned: count(TrialStatus::Pruned),
        failed: count(TrialStatus::Failed),
        front: outcome.front,
    };
    write_json(&summary, &out.join("summary.json"))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SystemEntry {
    name: String,
    /// `cost.json` from `profile`.
    #[serde(default)]
    cost: Option<PathBuf>,
    /// Explicit footprint; takes precedence over `cost`.
    #[serde(default)]
    ram_kb: Option<u64>,
    #[serde(default)]
    rom_kb: Option<u64>,
    /// Output of `evaluate`.
    #[serde(default)]
    evaluation: Option<PathBuf>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ReportJob {
    systems: Vec<SystemEntry>,
    #[serde(default = "builtin_platforms")]
    platforms: Vec<PlatformRef>,
}

fn pct(v: f64) -> String {
    format!("{:.1}", v * 100.0)
}

pub fn report(config: &Path, out: &Path) -> Result<(), CliError> {
    let job: Loaded<ReportJob> = load(config)?;
    let j = &job.value;
    if j.systems.is_empty() {
        return Err(CliError::invalid("systems must not be empty"));
    }
    let platforms = resolve_platforms(&j.platforms)?;
    let mut costs = Vec::new();
    let mut evals = Vec::new();
    let mut rows = Vec::new();
    for (i, s) in j.systems.iter().enumerate() {
        let cost: Option<CostReport> = s
            .cost
            .as_ref()
            .map(|p| read_json(&job.path(p)))
            .transpose()?;
        let eval: Option<EventReport> = s
            .evaluation
            .as_ref()
            .map(|p| read_json(&job.path(p)))
            .transpose()?;
        let ram = s.ram_kb.or(cost.as_ref().map(|c| c.ram_kb));
        let rom = s.rom_kb.or(cost.as_ref().map(|c| c.rom_kb));
        let (Some(ram_kb), Some(rom_kb)) = (ram, rom) else {
            return Err(CliError::invalid(format!(
                "systems[{i}]: needs `cost` or both `ram_kb` and `rom_kb`"
            )));
        };
        rows.push(BudgetRow {
            system: s.name.clone(),
            ram_kb,
            rom_kb,
        });
        costs.push(cost);
        evals.push(eval);
    }

    let mut header = vec!["Metric".to_string()];
    header.extend(j.systems.iter().map(|s| s.name.clone()));
    let dash = || "-".to_string();
    let metric_row = |label: &str, f: &dyn Fn(usize) -> Option<String>| {
        let mut r = vec![label.to_string()];
        r.extend((0..j.systems.len()).map(|i| f(i).unwrap_or_else(dash)));
        r
    };
    let performance = vec![
        metric_row("Precision (%)", &|i| {
            evals[i].as_ref().map(|e| pct(e.precision))
        }),
        metric_row("Recall (%)", &|i| evals[i].as_ref().map(|e| pct(e.recall))),
        metric_row("F0.5 (%)", &|i| evals[i].as_ref().map(|e| pct(e.f_beta))),
        metric_row("Parameters", &|i| {
            costs[i].as_ref().map(|c| c.total_params.to_string())
        }),
        metric_row("MACs", &|i| {
            costs[i].as_ref().map(|c| c.total_macs.to_string())
        }),
        metric_row("RAM (KB)", &|i| Some(rows[i].ram_kb.to_string())),
        metric_row("ROM (KB)", &|i| Some(rows[i].rom_kb.to_string())),
    ];
    let mut text = String::from("Performance\n");
    text.push_str(&format_table(&header, &performance));
    text.push_str("\nResource usage relative to on-board resources\n");
    text.push_str(&budget_table(&rows, &platforms));
    write_text(&text, out)?;
    print!("{text}");
    Ok(())
}
