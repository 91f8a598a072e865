//! Pareto front and knee against the textbook dominance definition.

mod common;

use common::pareto::{brute_front, dominated_by, knee_of, random_points};
use telemetry_anomaly::rng::{seeded, uniform_int};
use telemetry_anomaly::search::pareto_indices;

#[test]
fn front_equals_dominance_filter() {
    for seed in 0..100 {
        let mut g = seeded(seed);
        let points = random_points(&mut g);
        let mut got = pareto_indices(&points);
        got.sort_unstable();
        assert_eq!(got, brute_front(&points), "seed {seed}");
    }
}

#[test]
fn knee_fixture() {
    let points = [(1.0, 5), (2.0, 3), (4.0, 1)];
    let front = pareto_indices(&points);
    assert_eq!(front.len(), 3);
    assert_eq!(knee_of(&points, &front), 1);
}

#[test]
fn dominated_insertions_change_nothing() {
    for seed in 0..100 {
        let mut g = seeded(1000 + seed);
        let mut points = random_points(&mut g);
        let mut front = pareto_indices(&points);
        front.sort_unstable();
        let knee = knee_of(&points, &front);
        for _ in 0..20 {
            let anchor = points[front[uniform_int(&mut g, 0, front.len() - 1)]];
            points.push(dominated_by(anchor, &mut g));
            let mut after = pareto_indices(&points);
            after.sort_unstable();
            assert_eq!(after, front, "seed {seed}");
            assert_eq!(knee_of(&points, &after), knee, "seed {seed}");
        }
    }
}

#[test]
fn knee_is_a_front_member_with_minimal_normalized_distance() {
    for seed in 0..100 {
        let mut g = seeded(5000 + seed);
        let points = random_points(&mut g);
        let front = pareto_indices(&points);
        let knee = knee_of(&points, &front);
        assert!(front.contains(&knee));
        let norm = |v: &dyn Fn(usize) -> f64| {
            let lo = front.iter().map(|&i| v(i)).fold(f64::INFINITY, f64::min);
            let hi = front
                .iter()
                .map(|&i| v(i))
                .fold(f64::NEG_INFINITY, f64::max);
            move |x: f64| if hi > lo { (x - lo) / (hi - lo) } else { 0.0 }
        };
        let nl = norm(&|i| points[i].0);
        let nm = norm(&|i| points[i].1 as f64);
        let d = |i: usize| nl(points[i].0).hypot(nm(points[i].1 as f64));
        let best = front.iter().map(|&i| d(i)).fold(f64::INFINITY, f64::min);
        assert_eq!(d(knee), best, "seed {seed}");
    }
}
