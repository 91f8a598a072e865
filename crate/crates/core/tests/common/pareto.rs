use telemetry_anomaly::rng::{uniform_int, Generator};
use telemetry_anomaly::search::knee_point;

pub fn dominates(a: (f64, u64), b: (f64, u64)) -> bool {
    a.0 <= b.0 && a.1 <= b.1 && (a.0 < b.0 || a.1 < b.1)
}

/// Indices of points no other point dominates, ascending.
pub fn brute_front(points: &[(f64, u64)]) -> Vec<usize> {
    (0..points.len())
        .filter(|&i| !points.iter().any(|&q| dominates(q, points[i])))
        .collect()
}

/// Up to 500 points on small integer grids so ties and exact duplicates are
/// common.
pub fn random_points(g: &mut Generator) -> Vec<(f64, u64)> {
    let n = uniform_int(g, 1, 500);
    let span = uniform_int(g, 2, 60);
    (0..n)
        .map(|_| {
            (
                uniform_int(g, 0, span) as f64 * 0.25,
                uniform_int(g, 0, span) as u64 * 1000,
            )
        })
        .collect()
}

pub fn knee_of(points: &[(f64, u64)], front: &[usize]) -> usize {
    let members: Vec<(usize, f64, u64)> = front
        .iter()
        .map(|&i| (i, points[i].0, points[i].1))
        .collect();
    knee_point(&members)
}

/// A point strictly worse than `anchor` in at least one objective and no
/// better in the other.
pub fn dominated_by(anchor: (f64, u64), g: &mut Generator) -> (f64, u64) {
    match uniform_int(g, 0, 2) {
        0 => (anchor.0 + 0.25, anchor.1),
        1 => (anchor.0, anchor.1 + 1000),
        _ => (anchor.0 + 1.0, anchor.1 + 7),
    }
}
