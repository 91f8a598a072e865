//! Detection pipelines turning a series into point scores, flags and events.

mod classify;
mod forecast;
mod threshold;

pub use classify::{
    detect_classify, detect_image, image_dataset, window_dataset, window_flags, ClassifyConfig,
    ImageConfig, WindowClassifier,
};
pub use forecast::{
    detect_forecast, forecast_dataset, forecast_errors, reference_forecaster, ForecastConfig,
    Forecaster, Persistence,
};
pub use threshold::{
    dynamic_threshold, mean_std, prune_anomalies, pruned_count, smooth_errors, threshold_score,
    ThresholdOutcome, ThresholdParams,
};

use serde::{Deserialize, Serialize};

use crate::data::{AnomalyEvent, TimeSeries};
use crate::error::{Error, Result};
use crate::metrics::extract_events;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pipeline {
    Forecast,
    Classify,
    Image,
}

impl Pipeline {
    pub fn as_str(self) -> &'static str {
        match self {
            Pipeline::Forecast => "forecast",
            Pipeline::Classify => "classify",
            Pipeline::Image => "image",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionResult {
    pub pipeline: Pipeline,
    pub config: serde_json::Value,
    pub scores: Vec<f64>,
    pub flags: Vec<u8>,
    /// Maximal runs of flagged points, unmerged.
    pub events: Vec<AnomalyEvent>,
}

impl DetectionResult {
    pub fn new(
        pipeline: Pipeline,
        config: serde_json::Value,
        series: &TimeSeries,
        scores: Vec<f64>,
        flags: Vec<u8>,
    ) -> Result<Self> {
        if scores.len() != series.len() {
            return Err(Error::shape(
                "detection scores",
                &[series.len()],
                &[scores.len()],
            ));
        }
        let events = extract_events(&flags, series.timestamps())?;
        Ok(Self {
            pipeline,
            config,
            scores,
            flags,
            events,
        })
    }

    pub fn n_flagged(&self) -> usize {
        self.flags.iter().filter(|&&f| f == 1).count()
    }

    pub fn report(&self) -> DetectionReport {
        DetectionReport {
            pipeline: self.pipeline,
            config: self.config.clone(),
            events: self.events.clone(),
            n_flagged: self.n_flagged(),
            score_summary: ScoreSummary::of(&self.scores),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreSummary {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
}

impl ScoreSummary {
    fn of(scores: &[f64]) -> Self {
        if scores.is_empty() {
            return Self {
                min: 0.0,
                max: 0.0,
                mean: 0.0,
            };
        }
        Self {
            min: scores.iter().copied().fold(f64::INFINITY, f64::min),
            max: scores.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            mean: scores.iter().sum::<f64>() / scores.len() as f64,
        }
    }
}

/// Serialized form of a [`DetectionResult`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionReport {
    pub pipeline: Pipeline,
    pub config: serde_json::Value,
    pub events: Vec<AnomalyEvent>,
    pub n_flagged: usize,
    pub score_summary: ScoreSummary,
}

/// Point flags for `timestamps`, set where a timestamp falls inside an event.
///
/// Inverse of event extraction for events produced on the same timestamps.
pub fn flags_from_events(events: &[AnomalyEvent], timestamps: &[f64]) -> Vec<u8> {
    let mut flags = vec![0u8; timestamps.len()];
    let mut e = 0;
    for (f, &t) in flags.iter_mut().zip(timestamps) {
        while e < events.len() && events[e].end < t {
            e += 1;
        }
        if e < events.len() && events[e].start <= t {
            *f = 1;
        }
    }
    flags
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::WindowSpec;
    use crate::nn::{ActivationFn, Head, LayerSpec, Model, ModelSpec};
    use proptest::prelude::*;

    fn series(values: &[f64]) -> TimeSeries {
        let n = values.len();
        TimeSeries::new(
            vec!["a".into()],
            (0..n).map(|i| i as f64).collect(),
            values.to_vec(),
            vec![0; n],
        )
        .unwrap()
    }

    #[test]
    fn persistence_errors() {
        let s = series(&[0.0, 0.0, 0.0, 10.0, 0.0]);
        assert_eq!(
            forecast_errors(&Persistence, &s, 1, &[0]).unwrap(),
            vec![0.0, 0.0, 10.0, 10.0]
        );
        let c = series(&[3.0; 20]);
        assert!(forecast_errors(&Persistence, &c, 4, &[0])
            .unwrap()
            .iter()
            .all(|&e| e == 0.0));
        assert!(forecast_errors(&Persistence, &c, 20, &[0]).is_err());
    }

    struct Oracle(Vec<f64>);

    impl Forecaster for Oracle {
        fn predict(
            &self,
            windows: &[f64],
            n: usize,
            window: usize,
            _: usize,
            _: &[usize],
        ) -> Result<Vec<f64>> {
            // windows are consecutive, so the first value locates the window
            let first = windows[0];
            let start = self.0.iter().position(|&v| v == first).unwrap();
            Ok((0..n).map(|k| self.0[start + window + k]).collect())
        }
    }

    #[test]
    fn oracle_errors_vanish() {
        let v: Vec<f64> = (0..700).map(|i| i as f64 * 0.5).collect();
        let errs = forecast_errors(&Oracle(v.clone()), &series(&v), 8, &[0]).unwrap();
        assert_eq!(errs.len(), 692);
        assert!(errs.iter().all(|&e| e == 0.0));
    }

    #[test]
    fn model_forecaster_checks_shape() {
        let spec = ModelSpec {
            input_shape: vec![4, 1],
            layers: vec![
                LayerSpec::Flatten,
                LayerSpec::Dense {
                    inputs: 4,
                    outputs: 1,
                },
            ],
            head: Head::Regression { n_outputs: 1 },
        };
        let model = Model::new(spec, 1).unwrap();
        let s = series(&(0..30).map(f64::from).collect::<Vec<_>>());
        assert_eq!(forecast_errors(&model, &s, 4, &[0]).unwrap().len(), 26);
        assert!(forecast_errors(&model, &s, 5, &[0]).is_err());
    }

    #[test]
    fn noiseless_spike_one_event() {
        let mut v: Vec<f64> = (0..400).map(|i| (i as f64 * 0.05).sin()).collect();
        v[200] += 5.0;
        let s = series(&v);
        let r = detect_forecast(&s, &Persistence, &ForecastConfig::new(4)).unwrap();
        assert_eq!(r.events.len(), 1, "{:?}", r.events);
        let e = r.events[0];
        assert!(e.start <= 200.0 && e.end >= 201.0, "{e:?}");
        assert!(r.flags[..4].iter().all(|&f| f == 0));
    }

    #[test]
    fn zero_flags_zero_events() {
        let s = series(&[1.0; 50]);
        let r = detect_forecast(&s, &Persistence, &ForecastConfig::new(3)).unwrap();
        assert!(r.events.is_empty());
        assert_eq!(r.n_flagged(), 0);
    }

    struct Fixed(Vec<f64>);

    impl WindowClassifier for Fixed {
        fn probabilities(&self, _: &[f64], n: usize) -> Result<Vec<f64>> {
            Ok(self.0[..n].to_vec())
        }
    }

    #[test]
    fn window_union_rule() {
        let spec = WindowSpec::new(224, 1).unwrap();
        let n = 400;
        let mut probs = vec![0.0; spec.count(n)];
        let (_, flags) = window_flags(n, &spec, &probs, 0.5);
        assert!(flags.iter().all(|&f| f == 0));

        probs[30] = 0.9;
        let (scores, flags) = window_flags(n, &spec, &probs, 0.5);
        let runs = crate::metrics::flag_runs(&flags);
        assert_eq!(runs, vec![(30, 253)]);
        assert_eq!(scores[30], 0.9);
        assert_eq!(scores[254], 0.0);

        probs[100] = 0.6;
        let (_, flags) = window_flags(n, &spec, &probs, 0.5);
        assert_eq!(crate::metrics::flag_runs(&flags), vec![(30, 323)]);
    }

    #[test]
    fn classify_pipeline_uses_windows() {
        let s = series(&(0..20).map(f64::from).collect::<Vec<_>>());
        let config = ClassifyConfig {
            window: WindowSpec::new(5, 5).unwrap(),
            threshold: 0.5,
        };
        let r = detect_classify(&s, &Fixed(vec![0.1, 0.7, 0.2, 0.4]), &config).unwrap();
        assert_eq!(r.events, vec![AnomalyEvent::new(5.0, 9.0)]);
        assert_eq!(r.report().n_flagged, 5);
    }

    fn tiny_image_model(s: usize) -> Model {
        let spec = ModelSpec {
            input_shape: vec![s, s, 1],
            layers: vec![
                LayerSpec::Conv2d {
                    in_channels: 1,
                    out_channels: 2,
                    kernel_size: 3,
                    stride: 2,
                    padding: 1,
                },
                LayerSpec::Activation {
                    function: ActivationFn::Relu,
                },
                LayerSpec::GlobalAvgPool,
                LayerSpec::Dense {
                    inputs: 2,
                    outputs: 1,
                },
            ],
            head: Head::BinaryClassifier,
        };
        Model::new(spec, 3).unwrap()
    }

    #[test]
    fn image_pipeline_is_deterministic() {
        let s = series(&[0.25; 64]);
        let model = tiny_image_model(32);
        let config = ImageConfig {
            window: WindowSpec::new(32, 8).unwrap(),
            gaf: crate::gaf::GafConfig {
                resolution: 32,
                ..Default::default()
            },
            threshold: 0.5,
        };
        let a = detect_image(&s, &model, &config).unwrap();
        let b = detect_image(&s, &model, &config).unwrap();
        assert_eq!(a, b);
        assert!(a.scores[..32].windows(2).all(|w| w[0] == w[1]));
    }

    #[test]
    fn report_json_shape() {
        let s = series(&[0.0, 1.0, 1.0, 0.0]);
        let r = DetectionResult::new(
            Pipeline::Classify,
            serde_json::json!({}),
            &s,
            vec![0.0, 0.9, 0.9, 0.0],
            vec![0, 1, 1, 0],
        )
        .unwrap();
        let v = serde_json::to_value(r.report()).unwrap();
        assert_eq!(v["pipeline"], "classify");
        assert_eq!(v["n_flagged"], 2);
        assert_eq!(v["events"][0]["start"], 1.0);
        assert_eq!(v["score_summary"]["max"], 0.9);
    }

    proptest! {
        #[test]
        fn raising_threshold_never_adds_flags(
            probs in proptest::collection::vec(0.0f64..1.0, 1..40),
            lo in 0.0f64..1.0,
            hi in 0.0f64..1.0,
        ) {
            let (lo, hi) = if lo <= hi { (lo, hi) } else { (hi, lo) };
            let spec = WindowSpec::new(6, 2).unwrap();
            let n = (probs.len() - 1) * 2 + 6;
            let count = |t| window_flags(n, &spec, &probs, t).1.iter().filter(|&&f| f == 1).count();
            prop_assert!(count(hi) <= count(lo));
        }

        #[test]
        fn events_reconstruct_flags(flags in proptest::collection::vec(0u8..2, 1..80)) {
            let t: Vec<f64> = (0..flags.len()).map(|i| i as f64 * 3.0).collect();
            let events = extract_events(&flags, &t).unwrap();
            prop_assert_eq!(flags_from_events(&events, &t), flags);
        }
    }
}
