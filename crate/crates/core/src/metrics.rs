//! Event-wise scoring of point-wise anomaly flags.
//!
//! Both prediction and ground truth are turned into events (maximal runs of
//! flagged points), events closer than the merge tolerance are coalesced,
//! and a ground-truth event counts as detected when some predicted event
//! touches it or the early-detection window in front of it.

use serde::{Deserialize, Serialize, Serializer};

use crate::data::AnomalyEvent;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricConfig {
    /// Seconds; events with a smaller gap are merged.
    #[serde(default = "MetricConfig::default_tolerance")]
    pub merge_tolerance: f64,
    /// Seconds before a ground-truth start in which a prediction still counts.
    #[serde(default = "MetricConfig::default_tolerance")]
    pub early_tolerance: f64,
    #[serde(default = "MetricConfig::default_beta")]
    pub beta: f64,
}

impl MetricConfig {
    fn default_tolerance() -> f64 {
        60.0
    }

    fn default_beta() -> f64 {
        0.5
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.merge_tolerance >= 0.0) {
            return Err(Error::config("metric.merge_tolerance", "must be >= 0"));
        }
        if !(self.early_tolerance >= 0.0) {
            return Err(Error::config("metric.early_tolerance", "must be >= 0"));
        }
        if !(self.beta > 0.0) || !self.beta.is_finite() {
            return Err(Error::config("metric.beta", "must be positive"));
        }
        Ok(())
    }
}

impl Default for MetricConfig {
    fn default() -> Self {
        Self {
            merge_tolerance: 60.0,
            early_tolerance: 60.0,
            beta: 0.5,
        }
    }
}

fn six_decimals<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_f64((v * 1e6).round() / 1e6)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventReport {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    #[serde(serialize_with = "six_decimals")]
    pub precision: f64,
    #[serde(serialize_with = "six_decimals")]
    pub recall: f64,
    #[serde(serialize_with = "six_decimals")]
    pub f_beta: f64,
    pub beta: f64,
    /// `(predicted event, ground-truth event)` index pairs that overlap.
    pub matched_pairs: Vec<(usize, usize)>,
    pub pred_events: Vec<AnomalyEvent>,
    pub gt_events: Vec<AnomalyEvent>,
}

/// Maximal runs of non-zero flags as inclusive `[first, last]` timestamps.
pub fn extract_events(flags: &[u8], timestamps: &[f64]) -> Result<Vec<AnomalyEvent>> {
    if flags.len() != timestamps.len() {
        return Err(Error::shape(
            "extract_events",
            &[timestamps.len()],
            &[flags.len()],
        ));
    }
    Ok(flag_runs(flags)
        .into_iter()
        .map(|(s, e)| AnomalyEvent::new(timestamps[s], timestamps[e]))
        .collect())
}

/// Inclusive index ranges of the maximal runs of non-zero flags.
pub fn flag_runs(flags: &[u8]) -> Vec<(usize, usize)> {
    let mut runs = Vec::new();
    let mut start = None;
    for (i, &f) in flags.iter().enumerate() {
        match (f != 0, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                runs.push((s, i - 1));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        runs.push((s, flags.len() - 1));
    }
    runs
}

/// Coalesces consecutive events whose gap `next.start - prev.end` is below
/// `tolerance`. Input must be sorted and non-overlapping.
pub fn merge_events(events: &[AnomalyEvent], tolerance: f64) -> Result<Vec<AnomalyEvent>> {
    if let Some(i) = events.windows(2).position(|w| !(w[1].start > w[0].end)) {
        return Err(Error::config(
            "events",
            format!("event {} is not after event {}", i + 1, i),
        ));
    }
    let mut out: Vec<AnomalyEvent> = Vec::with_capacity(events.len());
    for &e in events {
        match out.last_mut() {
            Some(last) if e.start - last.end < tolerance => last.end = e.end,
            _ => out.push(e),
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MatchCounts {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub pairs: Vec<(usize, usize)>,
}

/// Matches sorted predicted events against sorted ground-truth events,
/// extending each ground-truth interval `early_tolerance` seconds backwards.
pub fn match_events(
    pred: &[AnomalyEvent],
    gt: &[AnomalyEvent],
    early_tolerance: f64,
) -> MatchCounts {
    let mut detected = vec![false; gt.len()];
    let mut pred_hit = vec![false; pred.len()];
    let mut pairs = Vec::new();
    // both lists sorted: sweep gt with a lower bound over pred
    let mut lo = 0;
    for (g, ev) in gt.iter().enumerate() {
        let from = ev.start - early_tolerance;
        while lo < pred.len() && pred[lo].end < from {
            lo += 1;
        }
        let mut p = lo;
        while p < pred.len() && pred[p].start <= ev.end {
            if pred[p].end >= from {
                detected[g] = true;
                pred_hit[p] = true;
                pairs.push((p, g));
            }
            p += 1;
        }
    }
    pairs.sort_unstable();
    let tp = detected.iter().filter(|&&d| d).count();
    MatchCounts {
        tp,
        fp: pred_hit.iter().filter(|&&h| !h).count(),
        fn_: gt.len() - tp,
        pairs,
    }
}

/// `(1 + β²)·P·R / (β²·P + R)`, zero when both are zero.
pub fn f_beta(precision: f64, recall: f64, beta: f64) -> f64 {
    let b2 = beta * beta;
    let denom = b2 * precision + recall;
    if denom == 0.0 {
        0.0
    } else {
        (1.0 + b2) * precision * recall / denom
    }
}

/// Precision and recall with the zero conventions: no predictions and no
/// truths is perfect; otherwise an empty denominator gives 0.
pub fn precision_recall(tp: usize, fp: usize, fn_: usize) -> (f64, f64) {
    if tp + fp + fn_ == 0 {
        return (1.0, 1.0);
    }
    let p = if tp + fp == 0 {
        0.0
    } else {
        tp as f64 / (tp + fp) as f64
    };
    let r = if tp + fn_ == 0 {
        0.0
    } else {
        tp as f64 / (tp + fn_) as f64
    };
    (p, r)
}

pub fn evaluate(
    pred_flags: &[u8],
    gt_labels: &[u8],
    timestamps: &[f64],
    config: &MetricConfig,
) -> Result<EventReport> {
    config.validate()?;
    if gt_labels.len() != timestamps.len() {
        return Err(Error::shape(
            "evaluate labels",
            &[timestamps.len()],
            &[gt_labels.len()],
        ));
    }
    let pred = merge_events(
        &extract_events(pred_flags, timestamps)?,
        config.merge_tolerance,
    )?;
    let gt = merge_events(
        &extract_events(gt_labels, timestamps)?,
        config.merge_tolerance,
    )?;
    let m = match_events(&pred, &gt, config.early_tolerance);
    let (precision, recall) = precision_recall(m.tp, m.fp, m.fn_);
    let f = if pred.is_empty() && gt.is_empty() {
        1.0
    } else {
        f_beta(precision, recall, config.beta)
    };
    Ok(EventReport {
        tp: m.tp,
        fp: m.fp,
        fn_: m.fn_,
        precision,
        recall,
        f_beta: f,
        beta: config.beta,
        matched_pairs: m.pairs,
        pred_events: pred,
        gt_events: gt,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ev(s: f64, e: f64) -> AnomalyEvent {
        AnomalyEvent::new(s, e)
    }

    #[test]
    fn extract_runs() {
        let t: Vec<f64> = (0..5).map(f64::from).collect();
        assert_eq!(
            extract_events(&[0, 1, 1, 0, 1], &t).unwrap(),
            vec![ev(1.0, 2.0), ev(4.0, 4.0)]
        );
        assert!(extract_events(&[0; 5], &t).unwrap().is_empty());
        assert_eq!(extract_events(&[1; 5], &t).unwrap(), vec![ev(0.0, 4.0)]);
    }

    #[test]
    fn merge_examples() {
        assert_eq!(
            merge_events(&[ev(0.0, 5.0), ev(35.0, 40.0)], 60.0).unwrap(),
            vec![ev(0.0, 40.0)]
        );
        let apart = [ev(0.0, 5.0), ev(100.0, 110.0)];
        assert_eq!(merge_events(&apart, 60.0).unwrap(), apart.to_vec());
        let e = [ev(0.0, 1.0), ev(2.0, 3.0)];
        assert_eq!(merge_events(&e, 0.0).unwrap(), e.to_vec());
        assert!(merge_events(&[ev(5.0, 6.0), ev(0.0, 1.0)], 1.0).is_err());
    }

    #[test]
    fn merge_is_transitive() {
        let e = [
            ev(0.0, 1.0),
            ev(50.0, 51.0),
            ev(100.0, 101.0),
            ev(300.0, 301.0),
        ];
        assert_eq!(
            merge_events(&e, 60.0).unwrap(),
            vec![ev(0.0, 101.0), ev(300.0, 301.0)]
        );
    }

    #[test]
    fn match_examples() {
        let gt = [ev(10.0, 20.0), ev(50.0, 60.0)];
        let pred = [ev(14.0, 16.0), ev(95.0, 105.0)];
        let m = match_events(&pred, &gt, 0.0);
        assert_eq!((m.tp, m.fp, m.fn_), (1, 1, 1));
        assert_eq!(m.pairs, vec![(0, 0)]);

        let m = match_events(&[ev(-30.0, -20.0)], &[ev(0.0, 10.0)], 60.0);
        assert_eq!((m.tp, m.fp, m.fn_), (1, 0, 0));
        // tolerance is directional: late predictions do not count
        let m = match_events(&[ev(30.0, 40.0)], &[ev(0.0, 10.0)], 60.0);
        assert_eq!((m.tp, m.fp, m.fn_), (0, 1, 1));

        let m = match_events(&gt, &gt, 60.0);
        assert_eq!((m.tp, m.fp, m.fn_), (2, 0, 0));
    }

    #[test]
    fn one_prediction_covering_two_truths() {
        let gt = [ev(10.0, 20.0), ev(30.0, 40.0)];
        let m = match_events(&[ev(15.0, 35.0)], &gt, 0.0);
        assert_eq!((m.tp, m.fp, m.fn_), (2, 0, 0));
    }

    #[test]
    fn f_beta_examples() {
        assert!((f_beta(0.5, 0.5, 0.5) - 0.5).abs() < 1e-15);
        assert_eq!(f_beta(1.0, 1.0, 0.5), 1.0);
        assert_eq!(f_beta(0.0, 0.0, 0.5), 0.0);
    }

    #[test]
    fn evaluate_conventions() {
        let t: Vec<f64> = (0..200).map(|i| i as f64 * 10.0).collect();
        let mut gt = vec![0u8; 200];
        gt[50..60].iter_mut().for_each(|v| *v = 1);
        let r = evaluate(&gt, &gt, &t, &MetricConfig::default()).unwrap();
        assert_eq!((r.precision, r.recall, r.f_beta), (1.0, 1.0, 1.0));

        let r = evaluate(&[0; 200], &gt, &t, &MetricConfig::default()).unwrap();
        assert_eq!((r.tp, r.fp, r.fn_), (0, 0, 1));
        assert_eq!((r.precision, r.recall, r.f_beta), (0.0, 0.0, 0.0));

        let r = evaluate(&[0; 200], &[0; 200], &t, &MetricConfig::default()).unwrap();
        assert_eq!((r.precision, r.recall, r.f_beta), (1.0, 1.0, 1.0));
    }

    #[test]
    fn report_json_rounds_scores() {
        let t: Vec<f64> = (0..10).map(|i| i as f64 * 100.0).collect();
        let gt = [1, 0, 0, 1, 0, 0, 1, 0, 0, 0];
        let pred = [1, 0, 0, 0, 0, 0, 0, 0, 0, 0];
        let r = evaluate(&pred, &gt, &t, &MetricConfig::default()).unwrap();
        let json = serde_json::to_string(&r).unwrap();
        assert!(json.contains("\"recall\":0.333333"), "{json}");
        assert!(json.contains("\"fn\":2"), "{json}");
    }

    fn events_strategy() -> impl Strategy<Value = Vec<AnomalyEvent>> {
        proptest::collection::vec((1.0f64..50.0, 0.0f64..20.0), 0..20).prop_map(|parts| {
            let mut t = 0.0;
            parts
                .into_iter()
                .map(|(gap, len)| {
                    let s = t + gap;
                    t = s + len;
                    AnomalyEvent::new(s, t)
                })
                .collect()
        })
    }

    proptest! {
        #[test]
        fn merge_idempotent(e in events_strategy(), tol in 0.0f64..40.0) {
            let once = merge_events(&e, tol).unwrap();
            prop_assert_eq!(merge_events(&once, tol).unwrap(), once.clone());
            prop_assert!(once.windows(2).all(|w| w[1].start - w[0].end >= tol));
        }

        #[test]
        fn count_identities(p in events_strategy(), g in events_strategy(), tol in 0.0f64..30.0) {
            let m = match_events(&p, &g, tol);
            prop_assert_eq!(m.tp + m.fn_, g.len());
            prop_assert!(m.fp <= p.len());
        }

        #[test]
        fn translation_invariant(
            pred in proptest::collection::vec(0u8..2, 40),
            gt in proptest::collection::vec(0u8..2, 40),
            shift in -1e4f64..1e4,
        ) {
            let t: Vec<f64> = (0..40).map(|i| i as f64 * 16.0).collect();
            let moved: Vec<f64> = t.iter().map(|v| v + shift.round()).collect();
            let cfg = MetricConfig::default();
            let a = evaluate(&pred, &gt, &t, &cfg).unwrap();
            let b = evaluate(&pred, &gt, &moved, &cfg).unwrap();
            prop_assert_eq!((a.tp, a.fp, a.fn_), (b.tp, b.fp, b.fn_));
            prop_assert_eq!(a.f_beta, b.f_beta);
        }

        #[test]
        fn precision_weighted_beats_recall_weighted(p in 0.0f64..=1.0, r in 0.0f64..=1.0) {
            prop_assume!(p > r);
            prop_assert!(f_beta(p, r, 0.5) > f_beta(p, r, 2.0));
        }
    }
}
