use telemetry_anomaly::data::{suite_case, synthesize, TimeSeries};
use telemetry_anomaly::detectors::{
    detect_forecast, forecast_dataset, reference_forecaster, DetectionResult, ForecastConfig,
};
use telemetry_anomaly::metrics::{evaluate, EventReport, MetricConfig};
use telemetry_anomaly::nn::{train, Model, TrainConfig};
use telemetry_anomaly::rng::derive_seed;

pub const WINDOW: usize = 32;
pub const LEARNING_RATE: f64 = 5e-3;

/// Reference forecaster fitted on the first three quarters of `nominal`,
/// validated on the rest, at the default 2,048-step budget.
pub fn trained_forecaster(nominal: &TimeSeries, seed: u64) -> Model {
    let targets: Vec<usize> = (0..nominal.n_channels()).collect();
    let cut = nominal.len() * 3 / 4;
    let tr = forecast_dataset(&nominal.slice(0..cut), WINDOW, &targets, true).unwrap();
    let va = forecast_dataset(&nominal.slice(cut..nominal.len()), WINDOW, &targets, true).unwrap();
    let spec = reference_forecaster(WINDOW, nominal.n_channels());
    let mut model = Model::new(spec, derive_seed(seed, "init")).unwrap();
    let cfg = TrainConfig {
        learning_rate: LEARNING_RATE,
        seed: derive_seed(seed, "train"),
        ..Default::default()
    };
    let report = train(&mut model, &tr, &va, &cfg).unwrap();
    assert_eq!(report.val_trace.len(), 8);
    model
}

pub struct SuiteRun {
    pub model: Model,
    pub detection: DetectionResult,
    pub report: EventReport,
}

/// Trains on the case's nominal series and scores the anomalous one.
pub fn run_case(seed: u64) -> SuiteRun {
    let case = suite_case(seed);
    let nominal = synthesize(&case.nominal).unwrap();
    let test = synthesize(&case.test).unwrap();
    let model = trained_forecaster(&nominal, seed);
    let detection = detect_forecast(&test, &model, &ForecastConfig::new(WINDOW)).unwrap();
    let report = evaluate(
        &detection.flags,
        test.labels(),
        test.timestamps(),
        &MetricConfig::default(),
    )
    .unwrap();
    SuiteRun {
        model,
        detection,
        report,
    }
}
