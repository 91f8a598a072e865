use std::thread;

use telemetry_anomaly::metrics::{evaluate, MetricConfig};
use telemetry_anomaly::rng::{uniform, uniform_int, Generator};

/// `(tp, fp, fn)` and the matched `(pred, gt)` pairs.
pub type Counts = (usize, usize, usize, Vec<(usize, usize)>);

/// Quadratic matcher: every predicted event against every truth event.
pub fn brute_force(pred: &[u8], gt: &[u8], ts: &[f64], cfg: &MetricConfig) -> Counts {
    let p = merged(pred, ts, cfg.merge_tolerance);
    let g = merged(gt, ts, cfg.merge_tolerance);
    let mut pairs = Vec::new();
    for (i, a) in p.iter().enumerate() {
        for (j, b) in g.iter().enumerate() {
            if a.0 <= b.1 && a.1 >= b.0 - cfg.early_tolerance {
                pairs.push((i, j));
            }
        }
    }
    let tp = (0..g.len())
        .filter(|j| pairs.iter().any(|q| q.1 == *j))
        .count();
    let fp = (0..p.len())
        .filter(|i| !pairs.iter().any(|q| q.0 == *i))
        .count();
    (tp, fp, g.len() - tp, pairs)
}

/// Maximal runs as time intervals, then every pair of runs closer than the
/// tolerance joined by union-find.
pub fn merged(flags: &[u8], ts: &[f64], tol: f64) -> Vec<(f64, f64)> {
    let mut runs: Vec<(usize, usize)> = Vec::new();
    for i in 0..flags.len() {
        if flags[i] == 0 {
            continue;
        }
        if i > 0 && flags[i - 1] != 0 {
            runs.last_mut().unwrap().1 = i;
        } else {
            runs.push((i, i));
        }
    }
    let iv: Vec<(f64, f64)> = runs.iter().map(|&(s, e)| (ts[s], ts[e])).collect();
    let mut parent: Vec<usize> = (0..iv.len()).collect();
    fn root(parent: &[usize], mut x: usize) -> usize {
        while parent[x] != x {
            x = parent[x];
        }
        x
    }
    for i in 0..iv.len() {
        for j in i + 1..iv.len() {
            if iv[j].0 - iv[i].1 < tol {
                let (a, b) = (root(&parent, i), root(&parent, j));
                parent[a.max(b)] = a.min(b);
            }
        }
    }
    let mut out: Vec<(f64, f64)> = Vec::new();
    for i in 0..iv.len() {
        let r = root(&parent, i);
        if r == i {
            out.push(iv[i]);
        } else {
            let k = out.iter().position(|o| o.0 == iv[r].0).unwrap();
            out[k].1 = out[k].1.max(iv[i].1);
        }
    }
    out
}

/// `None` when the library and the reference agree exactly.
pub fn disagreement(pred: &[u8], gt: &[u8], ts: &[f64], cfg: &MetricConfig) -> Option<String> {
    let r = evaluate(pred, gt, ts, cfg).unwrap();
    let (tp, fp, fn_, pairs) = brute_force(pred, gt, ts, cfg);
    if (r.tp, r.fp, r.fn_) == (tp, fp, fn_) && r.matched_pairs == pairs {
        None
    } else {
        Some(format!(
            "pred {pred:?} gt {gt:?}: library {:?} reference {:?}",
            (r.tp, r.fp, r.fn_),
            (tp, fp, fn_)
        ))
    }
}

pub fn bits(v: u32, n: usize) -> Vec<u8> {
    (0..n).map(|i| ((v >> i) & 1) as u8).collect()
}

/// Every (prediction, truth) pair of flag vectors with length up to `max_len`
/// on unit-spaced timestamps. Returns the number of pairs checked and the
/// first disagreement.
pub fn exhaustive(max_len: usize, cfg: &MetricConfig) -> (u64, Option<String>) {
    let mut checked = 0;
    for n in 0..=max_len {
        let ts: Vec<f64> = (0..n).map(|i| i as f64).collect();
        let total = 1u32 << n;
        let workers = thread::available_parallelism()
            .map_or(4, |p| p.get())
            .min(total as usize);
        let first = thread::scope(|s| {
            let handles: Vec<_> = (0..workers)
                .map(|w| {
                    let ts = &ts;
                    s.spawn(move || {
                        let mut pv = w as u32;
                        while pv < total {
                            let pred = bits(pv, n);
                            for gv in 0..total {
                                if let Some(d) = disagreement(&pred, &bits(gv, n), ts, cfg) {
                                    return Some(d);
                                }
                            }
                            pv += workers as u32;
                        }
                        None
                    })
                })
                .collect();
            handles.into_iter().find_map(|h| h.join().unwrap())
        });
        checked += u64::from(total) * u64::from(total);
        if first.is_some() {
            return (checked, first);
        }
    }
    (checked, None)
}

fn random_flags(g: &mut Generator, n: usize) -> Vec<u8> {
    let mut v = Vec::with_capacity(n);
    while v.len() < n {
        let on = uniform(g) < 0.4;
        let len = uniform_int(g, 1, 12);
        v.extend(std::iter::repeat_n(on as u8, len));
    }
    v.truncate(n);
    v
}

/// Random lengths, irregular timestamps and tolerances.
pub fn random_case(g: &mut Generator) -> (Vec<u8>, Vec<u8>, Vec<f64>, MetricConfig) {
    let n = uniform_int(g, 1, 300);
    let pred = random_flags(g, n);
    let gt = random_flags(g, n);
    let mut t = 0.0;
    let ts = (0..n)
        .map(|_| {
            t += 0.1 + 4.9 * uniform(g);
            t
        })
        .collect();
    let cfg = MetricConfig {
        merge_tolerance: 20.0 * uniform(g),
        early_tolerance: 20.0 * uniform(g),
        beta: 0.5,
    };
    (pred, gt, ts, cfg)
}
