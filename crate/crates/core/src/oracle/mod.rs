//! Brute-force verifiers that share no code path with the solvers they check.
//!
//! The randomized searches are falsifiers: they can expose a mechanism that
//! beats a claimed optimum but never prove optimality. Known-good witnesses
//! are always injected so a search is never vacuous.

pub mod corpus;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::funnel::{synthesize, threshold};
use crate::infotheory::{
    entropy_bits, expected_log_loss, optimal_soft_decoder, JointTable, SoftDecoder,
};
use crate::model::{ComponentModel, DataModel};

/// Slack on the released-information constraint during search.
pub const SEARCH_FEASIBILITY_SLACK: f64 = 1e-6;

/// Feasibility tolerance of the vertex enumeration.
pub const VERTEX_TOLERANCE: f64 = 1e-9;

/// Largest instance the vertex enumeration accepts.
pub const MAX_VERTEX_COMPONENTS: usize = 5;
pub const MAX_VERTEX_TASKS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchConfig {
    pub trials: usize,
    pub out_alphabet_size: usize,
    pub seed: u64,
    /// Concentration of the symmetric Dirichlet used for every row.
    pub dirichlet_alpha: f64,
}

impl SearchConfig {
    pub fn new(trials: usize, out_alphabet_size: usize, seed: u64) -> Self {
        Self {
            trials,
            out_alphabet_size,
            seed,
            dirichlet_alpha: 1.0,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.trials == 0 || self.out_alphabet_size == 0 {
            return Err(Error::OutOfRange(
                "search needs at least one trial and one output symbol".into(),
            ));
        }
        if !(self.dirichlet_alpha.is_finite() && self.dirichlet_alpha > 0.0) {
            return Err(Error::OutOfRange(format!(
                "dirichlet_alpha = {}",
                self.dirichlet_alpha
            )));
        }
        Ok(())
    }
}

/// Deterministic generator for trial `trial` of a run seeded with `seed`.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// One row drawn from a symmetric Dirichlet via normalized gamma variates.
pub fn dirichlet_row<R: Rng + ?Sized>(rng: &mut R, gamma: &Gamma<f64>, n: usize) -> Vec<f64> {
    let mut row: Vec<f64> = (0..n).map(|_| gamma.sample(rng)).collect();
    let total: f64 = row.iter().sum();
    if total > 0.0 && total.is_finite() {
        row.iter_mut().for_each(|v| *v /= total);
    } else {
        row = vec![1.0 / n as f64; n];
    }
    row
}

/// `(I(S;Y), I(X;Y))` for a row-major channel on one component.
fn leakage_and_rate(comp: &ComponentModel, rows: &[f64], n_y: usize) -> (f64, f64) {
    let mut py = vec![0.0; n_y];
    let mut psy = vec![0.0; comp.size_s() * n_y];
    let mut h_y_given_x = 0.0;
    for (x, (&p, &s)) in comp.pmf().iter().zip(comp.private_map()).enumerate() {
        if p <= 0.0 {
            continue;
        }
        let row = &rows[x * n_y..(x + 1) * n_y];
        h_y_given_x += p * entropy_bits(row);
        for (y, &q) in row.iter().enumerate() {
            py[y] += p * q;
            psy[s * n_y + y] += p * q;
        }
    }
    let h_y = entropy_bits(&py);
    let leak = h_y + comp.entropy_s() - entropy_bits(&psy);
    ((leak).max(0.0), (h_y - h_y_given_x).max(0.0))
}

fn witness_points(comp: &ComponentModel, alphas: &[f64]) -> Vec<(f64, f64)> {
    let n_x = comp.size_x();
    let mut points = Vec::new();
    let mut push = |rows: &[f64], n_y: usize| points.push(leakage_and_rate(comp, rows, n_y));
    for &a in alphas {
        if let Ok(sol) = synthesize(comp, a.min(comp.entropy_x())) {
            push(sol.channel.probs(), sol.channel.n_out());
        }
    }
    push(&vec![1.0; n_x], 1);
    let mut identity = vec![0.0; n_x * n_x];
    for x in 0..n_x {
        identity[x * n_x + x] = 1.0;
    }
    push(&identity, n_x);
    points
}

/// Least leakage found for each target in `alphas`, sharing one set of
/// sampled channels across all targets. `+inf` where nothing was feasible.
pub fn search_min_leakage_grid(
    comp: &ComponentModel,
    alphas: &[f64],
    cfg: &SearchConfig,
) -> Result<Vec<f64>> {
    cfg.validate()?;
    let gamma =
        Gamma::new(cfg.dirichlet_alpha, 1.0).map_err(|e| Error::OutOfRange(e.to_string()))?;
    let (n_x, n_y) = (comp.size_x(), cfg.out_alphabet_size);
    let mut points = witness_points(comp, alphas);
    let sampled: Vec<(f64, f64)> = (0..cfg.trials as u64)
        .into_par_iter()
        .map(|t| {
            let mut rng = trial_rng(cfg.seed, t);
            let rows: Vec<f64> = (0..n_x)
                .flat_map(|_| dirichlet_row(&mut rng, &gamma, n_y))
                .collect();
            leakage_and_rate(comp, &rows, n_y)
        })
        .collect();
    points.extend(sampled);
    Ok(alphas
        .iter()
        .map(|&a| {
            points
                .iter()
                .filter(|(_, rate)| *rate >= a - SEARCH_FEASIBILITY_SLACK)
                .map(|(leak, _)| *leak)
                .fold(f64::INFINITY, f64::min)
        })
        .collect())
}

/// Least leakage found among channels releasing at least `alpha` bits.
pub fn search_min_leakage(comp: &ComponentModel, alpha: f64, cfg: &SearchConfig) -> Result<f64> {
    Ok(search_min_leakage_grid(comp, &[alpha], cfg)?[0])
}

#[derive(Debug, Clone, PartialEq)]
pub enum VertexOutcome {
    Optimal { objective: f64, alphas: Vec<f64> },
    Infeasible,
}

impl VertexOutcome {
    pub fn objective(&self) -> f64 {
        match self {
            Self::Optimal { objective, .. } => *objective,
            Self::Infeasible => f64::INFINITY,
        }
    }
}

/// Advances `idx` to the next `k`-subset of `0..n` in lexicographic order.
fn next_combination(idx: &mut [usize], n: usize) -> bool {
    let k = idx.len();
    for pos in (0..k).rev() {
        if idx[pos] < n - k + pos {
            idx[pos] += 1;
            for j in pos + 1..k {
                idx[j] = idx[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Minimum of the allocation program by enumerating every basic solution
/// of `tau_i <= alpha_i <= H(X_i)`, `sum_{i in C_k} alpha_i >= gamma_k`.
pub fn enumerate_lp_vertices(model: &DataModel) -> Result<VertexOutcome> {
    let n = model.num_components();
    let k = model.tasks().len();
    if n > MAX_VERTEX_COMPONENTS || k > MAX_VERTEX_TASKS {
        return Err(Error::DimensionCap(format!(
            "vertex enumeration supports N <= {MAX_VERTEX_COMPONENTS}, K <= {MAX_VERTEX_TASKS}; got N = {n}, K = {k}"
        )));
    }
    if n == 0 {
        return Ok(VertexOutcome::Optimal {
            objective: 0.0,
            alphas: Vec::new(),
        });
    }
    let taus: Vec<f64> = model.components().iter().map(threshold).collect();
    let highs: Vec<f64> = model.components().iter().map(|c| c.entropy_x()).collect();

    // every constraint as a.alpha >= b
    let mut rows: Vec<(Vec<f64>, f64)> = Vec::with_capacity(2 * n + k);
    for i in 0..n {
        let mut a = vec![0.0; n];
        a[i] = 1.0;
        rows.push((a.clone(), taus[i]));
        a[i] = -1.0;
        rows.push((a, -highs[i]));
    }
    for task in model.tasks() {
        let mut a = vec![0.0; n];
        for &i in task.components() {
            a[i] = 1.0;
        }
        rows.push((a, task.gamma_bits()));
    }

    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut idx: Vec<usize> = (0..n).collect();
    loop {
        let a = DMatrix::from_fn(n, n, |r, c| rows[idx[r]].0[c]);
        let b = DVector::from_fn(n, |r, _| rows[idx[r]].1);
        let lu = a.lu();
        if lu.is_invertible() {
            if let Some(x) = lu.solve(&b) {
                let feasible = rows.iter().all(|(a, b)| {
                    a.iter().zip(x.iter()).map(|(u, v)| u * v).sum::<f64>() >= b - VERTEX_TOLERANCE
                });
                if feasible {
                    let objective: f64 = x.iter().zip(&taus).map(|(a, t)| a - t).sum();
                    if best.as_ref().is_none_or(|(o, _)| objective < *o) {
                        best = Some((objective, x.iter().copied().collect()));
                    }
                }
            }
        }
        if !next_combination(&mut idx, rows.len()) {
            break;
        }
    }
    Ok(match best {
        Some((objective, alphas)) => VertexOutcome::Optimal { objective, alphas },
        None => VertexOutcome::Infeasible,
    })
}

/// Least expected log loss over the posterior decoder and `trials` random
/// decoders for a joint over `(C, Y)`.
pub fn sweep_decoders(joint: &JointTable, trials: usize, seed: u64) -> Result<f64> {
    let gamma = Gamma::new(1.0, 1.0).map_err(|e| Error::OutOfRange(e.to_string()))?;
    let posterior = expected_log_loss(joint, &optimal_soft_decoder(joint))?;
    let losses = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let mut rng = trial_rng(seed, t);
            let table = (0..joint.cols())
                .map(|_| dirichlet_row(&mut rng, &gamma, joint.rows()))
                .collect();
            expected_log_loss(joint, &SoftDecoder::new(table)?)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(losses.into_iter().fold(posterior, f64::min))
}
