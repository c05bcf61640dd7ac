//! Seeded instance generators. Instance `j` of a corpus is drawn from its own
//! stream of the master seed, so any instance can be regenerated alone.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Gamma;

use super::{dirichlet_row, trial_rng};
use crate::channel::Channel;
use crate::funnel::threshold;
use crate::infotheory::JointTable;
use crate::model::{ComponentModel, DataModel, Target};

fn unit_gamma() -> Gamma<f64> {
    Gamma::new(1.0, 1.0).expect("unit gamma")
}

/// A pmf from a flat Dirichlet; with probability `sparsity` each entry is
/// zeroed, keeping at least one positive entry.
pub fn random_pmf(rng: &mut ChaCha8Rng, n: usize, sparsity: f64) -> Vec<f64> {
    let mut row = dirichlet_row(rng, &unit_gamma(), n);
    if sparsity > 0.0 && n > 1 {
        let keep = rng.random_range(0..n);
        for (j, v) in row.iter_mut().enumerate() {
            if j != keep && rng.random_bool(sparsity) {
                *v = 0.0;
            }
        }
        let total: f64 = row.iter().sum();
        row.iter_mut().for_each(|v| *v /= total);
    }
    row
}

/// A component on `n` symbols with a random onto private map.
pub fn component_with_size(rng: &mut ChaCha8Rng, n: usize) -> ComponentModel {
    let n_s = rng.random_range(1..=n);
    let mut map: Vec<usize> = (0..n)
        .map(|j| if j < n_s { j } else { rng.random_range(0..n_s) })
        .collect();
    map.shuffle(rng);
    // relabel so private symbols appear in first-use order
    let mut order = vec![usize::MAX; n_s];
    let mut next = 0;
    for s in map.iter_mut() {
        if order[*s] == usize::MAX {
            order[*s] = next;
            next += 1;
        }
        *s = order[*s];
    }
    let pmf = random_pmf(rng, n, 0.1);
    ComponentModel::from_indices(pmf, map).expect("generated component is valid")
}

pub fn random_component(rng: &mut ChaCha8Rng, max_x: usize) -> ComponentModel {
    let n = rng.random_range(1..=max_x.max(1));
    component_with_size(rng, n)
}

/// `count` components with at most `max_x` symbols each.
pub fn component_corpus(seed: u64, count: usize, max_x: usize) -> Vec<ComponentModel> {
    (0..count as u64)
        .map(|j| random_component(&mut trial_rng(seed, j), max_x))
        .collect()
}

pub fn random_joint(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> JointTable {
    JointTable::from_probs(rows, cols, random_pmf(rng, rows * cols, 0.15))
        .expect("generated joint is valid")
}

/// `count` joint tables with `2..=max_rows` rows and `1..=max_cols` columns.
pub fn joint_corpus(seed: u64, count: usize, max_rows: usize, max_cols: usize) -> Vec<JointTable> {
    (0..count as u64)
        .map(|j| {
            let mut rng = trial_rng(seed, j);
            let rows = rng.random_range(2..=max_rows.max(2));
            let cols = rng.random_range(1..=max_cols.max(1));
            random_joint(&mut rng, rows, cols)
        })
        .collect()
}

/// A channel with Dirichlet rows over `y0..`; a fifth of the channels get
/// sparse rows so that zero probabilities are exercised.
pub fn random_channel(rng: &mut ChaCha8Rng, in_alphabet: Vec<String>, n_out: usize) -> Channel {
    let sparsity = if rng.random_bool(0.2) { 0.3 } else { 0.0 };
    let rows = (0..in_alphabet.len())
        .map(|_| random_pmf(rng, n_out, sparsity))
        .collect();
    Channel::new(
        in_alphabet,
        (0..n_out).map(|y| format!("y{y}")).collect(),
        rows,
    )
    .expect("generated channel is valid")
}

fn random_tasks(rng: &mut ChaCha8Rng, n: usize, k: usize) -> Vec<Vec<usize>> {
    (0..k)
        .map(|_| {
            let mut members: Vec<usize> = (0..n).filter(|_| rng.random_bool(0.5)).collect();
            if members.is_empty() {
                members.push(rng.random_range(0..n));
            }
            members
        })
        .collect()
}

/// A model with `1..=3` components, joint alphabet at most 64, and a
/// non-product channel with `2..=4` outputs.
pub fn parallelization_case(rng: &mut ChaCha8Rng) -> (DataModel, Channel) {
    let n = rng.random_range(1..=3);
    let mut comps = Vec::with_capacity(n);
    for _ in 0..n {
        let size = rng.random_range(2..=4);
        comps.push(component_with_size(rng, size));
    }
    let k = rng.random_range(1..=3);
    let tasks = random_tasks(rng, n, k)
        .into_iter()
        .map(|c| (c, Target::GammaBits(0.0)))
        .collect();
    let model = DataModel::new(comps, tasks).expect("generated model is valid");
    let n_out = rng.random_range(2..=4);
    let ch = random_channel(rng, model.joint_alphabet().expect("within cap"), n_out);
    (model, ch)
}

pub fn parallelization_corpus(seed: u64, count: usize) -> Vec<(DataModel, Channel)> {
    (0..count as u64)
        .map(|j| parallelization_case(&mut trial_rng(seed, j)))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpKind {
    Random,
    Infeasible,
    /// Targets sitting exactly on `sum tau` or `sum H`, plus components with
    /// `tau = 0` or `tau = H`.
    Degenerate,
}

/// An allocation instance with `1..=5` components and `1..=4` tasks.
pub fn lp_case(rng: &mut ChaCha8Rng, kind: LpKind) -> DataModel {
    let n = rng.random_range(1..=5);
    let comps: Vec<ComponentModel> = (0..n)
        .map(|_| {
            let size = rng.random_range(2..=4);
            if kind == LpKind::Degenerate && rng.random_bool(0.4) {
                let pmf = random_pmf(rng, size, 0.0);
                let map = if rng.random_bool(0.5) {
                    (0..size).collect()
                } else {
                    vec![0; size]
                };
                ComponentModel::from_indices(pmf, map).expect("valid")
            } else {
                component_with_size(rng, size)
            }
        })
        .collect();
    let k = rng.random_range(1..=4);
    let members = random_tasks(rng, n, k);
    let taus: Vec<f64> = comps.iter().map(threshold).collect();
    let highs: Vec<f64> = comps.iter().map(|c| c.entropy_x()).collect();
    let bad = rng.random_range(0..k);
    let tasks = members
        .into_iter()
        .enumerate()
        .map(|(t, c)| {
            let tau: f64 = c.iter().map(|&i| taus[i]).sum();
            let high: f64 = c.iter().map(|&i| highs[i]).sum();
            let gamma = match kind {
                LpKind::Random => rng.random_range(0.0..=high),
                LpKind::Infeasible if t == bad => high + rng.random_range(0.1..1.0),
                LpKind::Infeasible => rng.random_range(0.0..=high),
                LpKind::Degenerate => match rng.random_range(0..3) {
                    0 => tau,
                    1 => high,
                    _ => 0.0,
                },
            };
            (c, Target::GammaBits(gamma))
        })
        .collect();
    DataModel::new(comps, tasks).expect("generated model is valid")
}

/// Allocation instances cycling through random, infeasible and degenerate kinds.
pub fn lp_corpus(seed: u64, count: usize) -> Vec<(LpKind, DataModel)> {
    const KINDS: [LpKind; 3] = [LpKind::Random, LpKind::Infeasible, LpKind::Degenerate];
    (0..count as u64)
        .map(|j| {
            let kind = KINDS[j as usize % KINDS.len()];
            (kind, lp_case(&mut trial_rng(seed, j), kind))
        })
        .collect()
}
