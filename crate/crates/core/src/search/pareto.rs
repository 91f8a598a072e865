//! Non-dominated filtering, knee selection and plot export.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Trial, TrialStatus};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParetoFront {
    /// Trial ids in ascending order.
    pub members: Vec<usize>,
    pub knee: usize,
}

/// Indices of the points `(loss, macs)` not dominated by any other point,
/// ascending. Equal points do not dominate each other.
pub fn pareto_indices(points: &[(f64, u64)]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| {
        points[a]
            .1
            .cmp(&points[b].1)
            .then(points[a].0.total_cmp(&points[b].0))
    });
    let mut front = Vec::new();
    // lowest loss among points with strictly fewer MACs
    let mut best = f64::INFINITY;
    let mut i = 0;
    while i < order.len() {
        let macs = points[order[i]].1;
        let group_min = points[order[i]].0;
        let mut j = i;
        while j < order.len() && points[order[j]].1 == macs {
            let loss = points[order[j]].0;
            if loss == group_min && loss < best {
                front.push(order[j]);
            }
            j += 1;
        }
        best = best.min(group_min);
        i = j;
    }
    front.sort_unstable();
    front
}

fn completed(trials: &[Trial]) -> Vec<(&Trial, f64)> {
    trials
        .iter()
        .filter(|t| t.status == TrialStatus::Completed)
        .filter_map(|t| t.val_loss.map(|l| (t, l)))
        .collect()
}

/// Non-dominated completed trials and their knee.
pub fn pareto_front(trials: &[Trial]) -> Result<ParetoFront> {
    let done = completed(trials);
    if done.is_empty() {
        return Err(Error::Empty("no completed trials".into()));
    }
    let points: Vec<(f64, u64)> = done.iter().map(|(t, l)| (*l, t.macs)).collect();
    let mut members: Vec<(usize, f64, u64)> = pareto_indices(&points)
        .into_iter()
        .map(|i| (done[i].0.id, points[i].0, points[i].1))
        .collect();
    members.sort_by_key(|m| m.0);
    let knee = knee_point(&members);
    Ok(ParetoFront {
        members: members.iter().map(|m| m.0).collect(),
        knee,
    })
}

fn normalizer(values: impl Iterator<Item = f64> + Clone) -> impl Fn(f64) -> f64 {
    let lo = values.clone().fold(f64::INFINITY, f64::min);
    let hi = values.fold(f64::NEG_INFINITY, f64::max);
    move |v| if hi > lo { (v - lo) / (hi - lo) } else { 0.0 }
}

/// Member `(id, loss, macs)` closest to the origin after min-max scaling
/// both objectives over the members. Ties go to fewer MACs, then lower id.
///
/// # Panics
/// On an empty slice.
pub fn knee_point(members: &[(usize, f64, u64)]) -> usize {
    assert!(!members.is_empty(), "knee of an empty front");
    let nl = normalizer(members.iter().map(|m| m.1));
    let nm = normalizer(members.iter().map(|m| m.2 as f64));
    members
        .iter()
        .map(|&(id, l, m)| (nl(l).hypot(nm(m as f64)), m, id))
        .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)))
        .unwrap()
        .2
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Dominated,
    Front,
    Knee,
}

#[derive(Serialize)]
struct FrontRow {
    trial_id: usize,
    macs: u64,
    val_loss: f64,
    role: Role,
}

/// CSV rows `trial_id,macs,val_loss,role` for every completed trial by id.
pub fn write_front<W: Write>(trials: &[Trial], front: Option<&ParetoFront>, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut done = completed(trials);
    done.sort_by_key(|(t, _)| t.id);
    if done.is_empty() {
        w.write_record(["trial_id", "macs", "val_loss", "role"])?;
    }
    for (t, loss) in done {
        let role = match front {
            Some(f) if f.knee == t.id => Role::Knee,
            Some(f) if f.members.binary_search(&t.id).is_ok() => Role::Front,
            _ => Role::Dominated,
        };
        w.serialize(FrontRow {
            trial_id: t.id,
            macs: t.macs,
            val_loss: loss,
            role,
        })?;
    }
    w.flush()?;
    Ok(())
}

pub fn export_front(
    trials: &[Trial],
    front: Option<&ParetoFront>,
    path: impl AsRef<Path>,
) -> Result<()> {
    write_front(trials, front, std::fs::File::create(path)?)
}
