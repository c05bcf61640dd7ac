//! Verification suites over seeded corpora. Each suite reports how many
//! cases it checked, how many failed and the largest deviation it observed.
//! Results depend only on the seed and sizes, never on scheduling.

use rayon::prelude::*;
use serde::Serialize;

use crate::allocation::{solve_allocation, solve_and_synthesize, AllocationStatus};
use crate::channel::{component_information, evaluate_mechanism, Channel, MechanismMetrics};
use crate::dp::{epsilon, group_property_gap, verify_dp_parallelization};
use crate::error::Result;
use crate::frl::{component_private_joint, functional_representation, leakage_free_privatizer};
use crate::funnel::{funnel_leakage, synthesize, threshold};
use crate::infotheory::{conditional_entropy, expected_log_loss, optimal_soft_decoder};
use crate::model::{ComponentModel, DataModel, Target};
use crate::oracle::corpus::{component_corpus, joint_corpus, lp_corpus, parallelization_corpus};
use crate::oracle::{
    enumerate_lp_vertices, search_min_leakage_grid, sweep_decoders, SearchConfig, VertexOutcome,
};
use crate::parallelize::{parallelize_compression, parallelize_privatization};

/// Tolerance for information identities.
pub const IDENTITY_TOLERANCE: f64 = 1e-9;
/// How far a random search may undercut a closed form before it counts.
pub const CONVERSE_TOLERANCE: f64 = 1e-6;
/// Tolerance on the posterior decoder matching `H(C|Y)`.
pub const POSTERIOR_TOLERANCE: f64 = 1e-12;

const MAX_NOTES: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteResult {
    pub name: String,
    pub passed: bool,
    pub cases: usize,
    pub failures: usize,
    /// Largest deviation observed on any checked identity or bound.
    #[serde(serialize_with = "crate::json::serialize_extended")]
    pub max_error: f64,
    /// First few failure descriptions.
    pub notes: Vec<String>,
}

/// Outcome of one case: deviation and, when failing, why.
struct Case {
    error: f64,
    failure: Option<String>,
}

impl Case {
    fn check(error: f64, ok: bool, what: impl FnOnce() -> String) -> Self {
        Self {
            error,
            failure: (!ok).then(what),
        }
    }

    /// Combines several checks of one case.
    fn all(parts: Vec<Case>) -> Self {
        let error = parts.iter().map(|c| c.error).fold(0.0, f64::max);
        let failure = parts.into_iter().find_map(|c| c.failure);
        Self { error, failure }
    }
}

fn tally(name: &str, cases: Vec<Result<Case>>) -> SuiteResult {
    let mut result = SuiteResult {
        name: name.to_string(),
        passed: true,
        cases: cases.len(),
        failures: 0,
        max_error: 0.0,
        notes: Vec::new(),
    };
    for (j, case) in cases.into_iter().enumerate() {
        let failure = match case {
            Ok(c) => {
                if c.error.is_finite() {
                    result.max_error = result.max_error.max(c.error);
                }
                c.failure
            }
            Err(e) => Some(e.to_string()),
        };
        if let Some(msg) = failure {
            result.failures += 1;
            if result.notes.len() < MAX_NOTES {
                result.notes.push(format!("case {j}: {msg}"));
            }
        }
    }
    result.passed = result.failures == 0;
    result
}

/// Decorrelates the corpora of different suites drawn from one master seed.
pub fn suite_seed(seed: u64, tag: u64) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(tag)
}

/// Closed-form funnel: achievability of the synthesized mechanism and a
/// randomized converse with output alphabets up to `|X| + 1`.
pub fn funnel_suite(seed: u64, components: usize, grid: usize, trials: usize) -> SuiteResult {
    let seed = suite_seed(seed, 1);
    let corpus = component_corpus(seed, components, 6);
    let cases = corpus
        .par_iter()
        .enumerate()
        .map(|(j, comp)| -> Result<Case> {
            let model = DataModel::new(vec![comp.clone()], vec![])?;
            let tau = threshold(comp);
            let steps = grid.max(2) - 1;
            let alphas: Vec<f64> = (0..grid.max(1))
                .map(|g| comp.entropy_x() * g as f64 / steps as f64)
                .collect();
            let mut parts = Vec::new();
            for &alpha in &alphas {
                let sol = synthesize(comp, alpha)?;
                let (leak, rate) = component_information(&model, 0, &sol.channel)?;
                let expected = funnel_leakage(alpha, tau);
                parts.push(Case::check(
                    (leak - expected).abs().max(alpha - rate),
                    rate >= alpha - IDENTITY_TOLERANCE && (leak - expected).abs() <= IDENTITY_TOLERANCE,
                    || format!("alpha = {alpha}: I(X;Y) = {rate}, I(S;Y) = {leak}, expected {expected}"),
                ));
            }
            let cfg = SearchConfig::new(trials, comp.size_x() + 1, suite_seed(seed, j as u64));
            let found = search_min_leakage_grid(comp, &alphas, &cfg)?;
            for (&alpha, &best) in alphas.iter().zip(&found) {
                let bound = funnel_leakage(alpha, tau);
                parts.push(Case::check(
                    (bound - best).max(0.0),
                    best >= bound - CONVERSE_TOLERANCE,
                    || format!("alpha = {alpha}: search found leakage {best} below {bound}"),
                ));
            }
            Ok(Case::all(parts))
        })
        .collect();
    tally("funnel", cases)
}

/// Functional representation on random joints and the leakage-free privatizer.
pub fn frl_suite(seed: u64, joints: usize) -> SuiteResult {
    let seed = suite_seed(seed, 2);
    let corpus = joint_corpus(seed, joints, 6, 6);
    let components = component_corpus(seed, joints, 6);
    let cases = corpus
        .par_iter()
        .zip(components.par_iter())
        .map(|(joint, comp)| -> Result<Case> {
            let check = functional_representation(joint).verify(joint);
            let worst = check
                .independence_tv
                .max(check.residual_entropy_bits)
                .max(check.reconstruction_error);
            let frl = Case::check(worst, worst <= IDENTITY_TOLERANCE, || format!("{check:?}"));

            let model = DataModel::new(vec![comp.clone()], vec![])?;
            let ch = leakage_free_privatizer(comp)?;
            let (leak, rate) = component_information(&model, 0, &ch)?;
            let tau = threshold(comp);
            let err = (rate - tau).abs().max(leak);
            let privatizer = Case::check(err, err <= IDENTITY_TOLERANCE, || {
                format!("privatizer: I(X;Y) = {rate}, tau = {tau}, I(S;Y) = {leak}")
            });
            // the representation with W = S must also pass its own checks
            let joint_s = component_private_joint(comp);
            let check_s = functional_representation(&joint_s).verify(&joint_s);
            let worst_s = check_s.independence_tv.max(check_s.residual_entropy_bits);
            let special = Case::check(worst_s, worst_s <= IDENTITY_TOLERANCE, || {
                format!("W = S: {check_s:?}")
            });
            Ok(Case::all(vec![frl, privatizer, special]))
        })
        .collect();
    tally("frl", cases)
}

/// Simplex against vertex enumeration, plus the synthesized mechanism
/// reaching the optimum on feasible instances.
pub fn lp_suite(seed: u64, instances: usize) -> SuiteResult {
    let seed = suite_seed(seed, 3);
    let corpus = lp_corpus(seed, instances);
    let cases = corpus
        .par_iter()
        .map(|(kind, model)| -> Result<Case> {
            let simplex = solve_allocation(model)?;
            let vertices = enumerate_lp_vertices(model)?;
            match (&simplex.status, &vertices) {
                (AllocationStatus::Infeasible { .. }, VertexOutcome::Infeasible) => {
                    Ok(Case::check(0.0, true, String::new))
                }
                (AllocationStatus::Optimal, VertexOutcome::Optimal { objective, .. }) => {
                    let gap = (simplex.total_leakage_bits - objective).abs();
                    let lp = Case::check(gap, gap <= IDENTITY_TOLERANCE, || {
                        format!(
                            "{kind:?}: simplex {} vs vertices {objective}",
                            simplex.total_leakage_bits
                        )
                    });
                    let bundle = solve_and_synthesize(model)?;
                    let achieved = (bundle.metrics.leakage_bits - simplex.total_leakage_bits).abs();
                    let synth = Case::check(achieved, achieved <= IDENTITY_TOLERANCE, || {
                        format!("{kind:?}: mechanism leaks {}", bundle.metrics.leakage_bits)
                    });
                    Ok(Case::all(vec![lp, synth]))
                }
                _ => Ok(Case::check(f64::INFINITY, false, || {
                    format!(
                        "{kind:?}: simplex {:?} vs vertices {vertices:?}",
                        simplex.status
                    )
                })),
            }
        })
        .collect();
    tally("lp_equivalence", cases)
}

/// Parallelized privatization keeps leakage and never loses utility.
pub fn privatization_suite(seed: u64, instances: usize) -> SuiteResult {
    let corpus = parallelization_corpus(suite_seed(seed, 4), instances);
    let cases = corpus
        .par_iter()
        .map(|(model, ch)| -> Result<Case> {
            let (_, report) = parallelize_privatization(model, ch)?;
            let error = report
                .deltas
                .iter()
                .filter(|d| d.claim == "leakage" || d.claim == "independence_tv" || d.gap < 0.0)
                .map(|d| d.gap.abs())
                .fold(0.0, f64::max);
            Ok(Case::check(error, report.all_hold(), || {
                let bad: Vec<_> = report.deltas.iter().filter(|d| !d.holds).collect();
                format!(
                    "product form {}, failing claims {bad:?}",
                    report.product_form_ok
                )
            }))
        })
        .collect();
    tally("parallel_privatization", cases)
}

/// Parallelized compression keeps `H(X|Y)` and never loses information.
pub fn compression_suite(seed: u64, instances: usize) -> SuiteResult {
    let corpus = parallelization_corpus(suite_seed(seed, 4), instances);
    let cases = corpus
        .par_iter()
        .map(|(model, ch)| -> Result<Case> {
            let (_, report) = parallelize_compression(model, ch)?;
            let error = report
                .deltas
                .iter()
                .filter(|d| {
                    d.claim == "conditional_entropy" || d.claim == "independence_tv" || d.gap < 0.0
                })
                .map(|d| d.gap.abs())
                .fold(0.0, f64::max);
            Ok(Case::check(error, report.all_hold(), || {
                let bad: Vec<_> = report.deltas.iter().filter(|d| !d.holds).collect();
                format!(
                    "product form {}, failing claims {bad:?}",
                    report.product_form_ok
                )
            }))
        })
        .collect();
    tally("parallel_compression", cases)
}

/// The posterior decoder attains `H(C|Y)` and no sampled decoder beats it.
pub fn log_loss_suite(seed: u64, joints: usize, decoders: usize) -> SuiteResult {
    let seed = suite_seed(seed, 5);
    let corpus = joint_corpus(seed, joints, 6, 6);
    let cases = corpus
        .iter()
        .enumerate()
        .map(|(j, joint)| -> Result<Case> {
            let h = conditional_entropy(joint);
            let posterior = expected_log_loss(joint, &optimal_soft_decoder(joint))?;
            let best = sweep_decoders(joint, decoders, suite_seed(seed, j as u64))?;
            let err = (posterior - h).abs();
            Ok(Case::all(vec![
                Case::check(err, err <= POSTERIOR_TOLERANCE, || {
                    format!("posterior loss {posterior} vs H(C|Y) {h}")
                }),
                Case::check((h - best).max(0.0), best >= h - IDENTITY_TOLERANCE, || {
                    format!("decoder with loss {best} below H(C|Y) {h}")
                }),
            ]))
        })
        .collect();
    tally("log_loss", cases)
}

/// Randomized response on a binary private feature flipped with probability 1/4.
pub fn randomized_response_epsilon() -> Result<f64> {
    let comp = ComponentModel::from_indices(vec![0.5, 0.5], vec![0, 1])?;
    let model = DataModel::new(vec![comp.clone()], vec![])?;
    let ch = Channel::new(
        comp.alphabet_x().to_vec(),
        comp.alphabet_x().to_vec(),
        vec![vec![0.75, 0.25], vec![0.25, 0.75]],
    )?;
    Ok(epsilon(&model, &ch)?.epsilon_nats)
}

/// Parallelized privatization never increases epsilon; group property at
/// Hamming distance two; randomized response gives `ln 3`.
pub fn dp_suite(seed: u64, instances: usize) -> SuiteResult {
    let corpus = parallelization_corpus(suite_seed(seed, 4), instances);
    let mut cases: Vec<Result<Case>> = corpus
        .par_iter()
        .map(|(model, ch)| -> Result<Case> {
            let check = verify_dp_parallelization(model, ch)?;
            let (e, e_par) = (check.original.epsilon_nats, check.parallelized.epsilon_nats);
            let excess = if e.is_infinite() {
                0.0
            } else {
                (e_par - e).max(0.0)
            };
            let group = group_property_gap(model, ch, e)?.max(0.0);
            Ok(Case::all(vec![
                Case::check(excess, check.ok, || {
                    format!("epsilon rose from {e} to {e_par}")
                }),
                Case::check(group, group <= IDENTITY_TOLERANCE, || {
                    format!("group property off by {group}")
                }),
            ]))
        })
        .collect();
    cases.push(randomized_response_epsilon().map(|eps| {
        let err = (eps - 3f64.ln()).abs();
        Case::check(err, err <= IDENTITY_TOLERANCE, || {
            format!("randomized response epsilon {eps}")
        })
    }));
    tally("dp", cases)
}

/// Two uniform 4-ary components whose private feature is the parity, with
/// targets 1.5 bits on the first component and 2.5 bits on both.
pub fn parity_example() -> DataModel {
    let comp =
        ComponentModel::from_indices(vec![0.25; 4], vec![0, 1, 0, 1]).expect("valid component");
    DataModel::new(
        vec![comp.clone(), comp],
        vec![
            (vec![0], Target::GammaBits(1.5)),
            (vec![0, 1], Target::GammaBits(2.5)),
        ],
    )
    .expect("valid model")
}

pub fn worked_example_suite() -> SuiteResult {
    let case = || -> Result<Case> {
        let model = parity_example();
        let bundle = solve_and_synthesize(&model)?;
        let alloc = &bundle.allocation;
        let err = (alloc.total_leakage_bits - 0.5)
            .abs()
            .max((alloc.alphas[0] - 1.5).abs())
            .max((alloc.alphas[1] - 1.0).abs())
            .max((bundle.metrics.leakage_bits - 0.5).abs());
        Ok(Case::check(err, err <= IDENTITY_TOLERANCE, || {
            format!("alphas {:?}, L* {}", alloc.alphas, alloc.total_leakage_bits)
        }))
    };
    tally("worked_example", vec![case()])
}

/// Re-evaluates a given mechanism: every task target must be met and, when
/// recorded metrics accompany it, they must match the recomputed ones.
pub fn mechanism_suite(
    model: &DataModel,
    ch: &Channel,
    recorded: Option<&MechanismMetrics>,
) -> SuiteResult {
    let case = || -> Result<Case> {
        let metrics = evaluate_mechanism(model, ch)?;
        let mut parts: Vec<Case> = metrics
            .utility_bits
            .iter()
            .zip(model.tasks())
            .enumerate()
            .map(|(k, (u, t))| {
                let short = (t.gamma_bits() - u).max(0.0);
                Case::check(short, short <= IDENTITY_TOLERANCE, || {
                    format!("task {k}: I(C;Y) = {u} below gamma = {}", t.gamma_bits())
                })
            })
            .collect();
        if let Some(rec) = recorded {
            let mut diffs = vec![
                (rec.leakage_bits - metrics.leakage_bits).abs(),
                (rec.rate_bits - metrics.rate_bits).abs(),
            ];
            if rec.utility_bits.len() != metrics.utility_bits.len() {
                diffs.push(f64::INFINITY);
            }
            diffs.extend(
                rec.utility_bits
                    .iter()
                    .zip(&metrics.utility_bits)
                    .map(|(a, b)| (a - b).abs()),
            );
            let worst = diffs.into_iter().fold(0.0, f64::max);
            parts.push(Case::check(worst, worst <= IDENTITY_TOLERANCE, || {
                format!(
                    "recorded leakage {} vs recomputed {}",
                    rec.leakage_bits, metrics.leakage_bits
                )
            }));
        }
        Ok(Case::all(parts))
    };
    tally("mechanism", vec![case()])
}

/// Corpus sizes for a full verification run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VerifyConfig {
    pub seed: u64,
    pub search_trials: usize,
    pub decoder_trials: usize,
    pub funnel_components: usize,
    pub funnel_grid: usize,
    pub frl_joints: usize,
    pub lp_instances: usize,
    pub parallel_instances: usize,
    pub log_loss_joints: usize,
}

impl VerifyConfig {
    pub fn new(seed: u64, trials: usize) -> Self {
        Self {
            seed,
            search_trials: trials,
            decoder_trials: (trials / 10).max(1),
            funnel_components: 100,
            funnel_grid: 5,
            frl_joints: 200,
            lp_instances: 300,
            parallel_instances: 100,
            log_loss_joints: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationSummary {
    pub config: VerifyConfig,
    pub passed: bool,
    pub suites: Vec<SuiteResult>,
}

pub fn run_verification(cfg: &VerifyConfig) -> VerificationSummary {
    let suites = vec![
        funnel_suite(
            cfg.seed,
            cfg.funnel_components,
            cfg.funnel_grid,
            cfg.search_trials,
        ),
        frl_suite(cfg.seed, cfg.frl_joints),
        lp_suite(cfg.seed, cfg.lp_instances),
        privatization_suite(cfg.seed, cfg.parallel_instances),
        compression_suite(cfg.seed, cfg.parallel_instances),
        log_loss_suite(cfg.seed, cfg.log_loss_joints, cfg.decoder_trials),
        dp_suite(cfg.seed, cfg.parallel_instances),
        worked_example_suite(),
    ];
    VerificationSummary {
        config: *cfg,
        passed: suites.iter().all(|s| s.passed),
        suites,
    }
}
