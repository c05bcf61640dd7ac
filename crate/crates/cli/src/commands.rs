//! Command implementations. Each returns the outcome that decides the exit
//! code; errors are reported by the caller.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use funnelkit::allocation::AllocationStatus;
use funnelkit::dp::{epsilon_parallel, DpWitness};
use funnelkit::verify::{mechanism_suite, run_verification, VerifyConfig};
use funnelkit::{
    epsilon, evaluate_mechanism, evaluate_parallel, load_model, parallelize_compression,
    parallelize_privatization, product_channel, solve_allocation, solve_and_synthesize, threshold,
    Channel, DataModel, DpReport, MechanismMetrics,
};
use rayon::prelude::*;
use serde::Serialize;

use crate::output::{load_mechanism, print_json, round_significant, Mechanism};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Success,
    VerificationFailed,
    Infeasible,
}

/// Tolerance used when reporting whether a task target is met.
const SATISFIED_TOLERANCE: f64 = 1e-9;

/// Parses a `k=v` task-target override.
pub fn parse_gamma(s: &str) -> std::result::Result<(usize, f64), String> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| format!("expected TASK=BITS, got {s:?}"))?;
    let k = k
        .trim()
        .parse()
        .map_err(|e| format!("task index {k:?}: {e}"))?;
    let v: f64 = v.trim().parse().map_err(|e| format!("gamma {v:?}: {e}"))?;
    if !v.is_finite() {
        return Err(format!("gamma must be finite, got {v}"));
    }
    Ok((k, v))
}

/// Grid of target multipliers.
#[derive(Debug, Clone, PartialEq)]
pub struct Scales(pub Vec<f64>);

/// Parses `start:stop:step` into the grid `start, start + step, ..., <= stop`.
pub fn parse_scales(s: &str) -> std::result::Result<Scales, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let [a, b, step] = parts.as_slice() else {
        return Err(format!("expected START:STOP:STEP, got {s:?}"));
    };
    let num = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("{t:?}: {e}"));
    let (a, b, step) = (num(a)?, num(b)?, num(step)?);
    if !(a.is_finite() && b.is_finite() && step.is_finite()) || a < 0.0 || b < a || step <= 0.0 {
        return Err("scales need 0 <= START <= STOP and STEP > 0".into());
    }
    let count = ((b - a) / step + 1e-9).floor() as usize + 1;
    if count > 100_000 {
        return Err(format!("{count} grid points is too many"));
    }
    Ok(Scales((0..count).map(|j| a + j as f64 * step).collect()))
}

fn load_with_overrides(path: &Path, overrides: &[(usize, f64)]) -> Result<DataModel> {
    let model = load_model(path).with_context(|| format!("loading model {}", path.display()))?;
    if overrides.is_empty() {
        return Ok(model);
    }
    let mut gammas = model.gammas();
    for &(k, v) in overrides {
        if k >= gammas.len() {
            bail!(
                "--gamma refers to task {k} but the model has {} tasks",
                gammas.len()
            );
        }
        gammas[k] = v;
    }
    Ok(model.with_gammas(&gammas)?)
}

#[derive(Serialize)]
struct ComponentReport {
    index: usize,
    size_x: usize,
    size_s: usize,
    entropy_x_bits: f64,
    entropy_s_bits: f64,
    tau_bits: f64,
}

#[derive(Serialize)]
struct TaskReport {
    index: usize,
    components: Vec<usize>,
    gamma_bits: f64,
    task_entropy_bits: f64,
    /// Sum of thresholds: the most this task gets without any leakage.
    leakage_free_bits: f64,
    feasible: bool,
    leakage_free: bool,
}

#[derive(Serialize)]
struct AnalyzeReport {
    components: Vec<ComponentReport>,
    tasks: Vec<TaskReport>,
    joint_alphabet_size: Option<usize>,
    within_product_cap: bool,
}

pub fn analyze(model_path: &Path) -> Result<Outcome> {
    let model = load_with_overrides(model_path, &[])?;
    let components: Vec<ComponentReport> = model
        .components()
        .iter()
        .enumerate()
        .map(|(index, c)| ComponentReport {
            index,
            size_x: c.size_x(),
            size_s: c.size_s(),
            entropy_x_bits: c.entropy_x(),
            entropy_s_bits: c.entropy_s(),
            tau_bits: threshold(c),
        })
        .collect();
    let tasks = model
        .tasks()
        .iter()
        .enumerate()
        .map(|(index, t)| {
            let free: f64 = t.components().iter().map(|&i| components[i].tau_bits).sum();
            let h = model.task_entropy(index);
            TaskReport {
                index,
                components: t.components().to_vec(),
                gamma_bits: t.gamma_bits(),
                task_entropy_bits: h,
                leakage_free_bits: free,
                feasible: t.gamma_bits() <= h + SATISFIED_TOLERANCE,
                leakage_free: t.gamma_bits() <= free + SATISFIED_TOLERANCE,
            }
        })
        .collect();
    let size = model.x_radix().ok().map(|r| r.total());
    print_json(&AnalyzeReport {
        components,
        tasks,
        joint_alphabet_size: size,
        within_product_cap: size.is_some(),
    })?;
    Ok(Outcome::Success)
}

pub fn solve(
    model_path: &Path,
    overrides: &[(usize, f64)],
    emit: Option<&Path>,
) -> Result<Outcome> {
    let model = load_with_overrides(model_path, overrides)?;
    let allocation = solve_allocation(&model)?;
    if let AllocationStatus::Infeasible { violated_tasks } = &allocation.status {
        print_json(&allocation)?;
        eprintln!("infeasible: tasks {violated_tasks:?} ask for more than their components carry");
        return Ok(Outcome::Infeasible);
    }
    if let Some(out) = emit {
        let bundle = solve_and_synthesize(&model)?;
        std::fs::write(out, bundle.to_json())
            .with_context(|| format!("writing {}", out.display()))?;
    }
    print_json(&allocation)?;
    Ok(Outcome::Success)
}

#[derive(Serialize)]
struct TaskCheck {
    index: usize,
    gamma_bits: f64,
    utility_bits: f64,
    satisfied: bool,
}

#[derive(Serialize)]
struct EvalReport {
    #[serde(flatten)]
    metrics: MechanismMetrics,
    tasks: Vec<TaskCheck>,
    all_satisfied: bool,
    #[serde(serialize_with = "funnelkit::json::serialize_extended")]
    dp_epsilon_nats: f64,
    dp_witness: Option<DpWitness>,
}

fn metrics_and_epsilon(
    model: &DataModel,
    mechanism: &Mechanism,
) -> Result<(MechanismMetrics, DpReport)> {
    Ok(match mechanism {
        Mechanism::Joint(ch) => (evaluate_mechanism(model, ch)?, epsilon(model, ch)?),
        Mechanism::Parallel(chans) => (
            evaluate_parallel(model, chans)?,
            epsilon_parallel(model, chans)?,
        ),
    })
}

pub fn eval(model_path: &Path, mechanism_path: &Path) -> Result<Outcome> {
    let model = load_with_overrides(model_path, &[])?;
    let file = load_mechanism(mechanism_path)?;
    let (metrics, dp) = metrics_and_epsilon(&model, &file.mechanism)?;
    let tasks: Vec<TaskCheck> = model
        .tasks()
        .iter()
        .zip(&metrics.utility_bits)
        .enumerate()
        .map(|(index, (t, &u))| TaskCheck {
            index,
            gamma_bits: t.gamma_bits(),
            utility_bits: u,
            satisfied: u >= t.gamma_bits() - SATISFIED_TOLERANCE,
        })
        .collect();
    print_json(&EvalReport {
        all_satisfied: tasks.iter().all(|t| t.satisfied),
        tasks,
        metrics,
        dp_epsilon_nats: dp.epsilon_nats,
        dp_witness: dp.witness,
    })?;
    Ok(Outcome::Success)
}

/// One point of the tradeoff curve.
#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub scale: f64,
    pub l_star_bits: f64,
    pub feasible: bool,
    /// `sum_{i in C_k} alpha_i - gamma_k` per task; empty when infeasible.
    pub slack: Vec<f64>,
}

fn format_number(v: f64) -> String {
    if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.to_string()
    } else {
        round_significant(v).to_string()
    }
}

pub fn sweep(
    model_path: &Path,
    overrides: &[(usize, f64)],
    scales: &[f64],
    out: &Path,
) -> Result<Outcome> {
    let model = load_with_overrides(model_path, overrides)?;
    let base = model.gammas();
    let rows = scales
        .par_iter()
        .map(|&scale| -> Result<SweepRow> {
            let gammas: Vec<f64> = base.iter().map(|g| g * scale).collect();
            let scaled = model.with_gammas(&gammas)?;
            let alloc = solve_allocation(&scaled)?;
            let slack = if alloc.is_optimal() {
                scaled
                    .tasks()
                    .iter()
                    .map(|t| {
                        t.components().iter().map(|&i| alloc.alphas[i]).sum::<f64>()
                            - t.gamma_bits()
                    })
                    .collect()
            } else {
                Vec::new()
            };
            Ok(SweepRow {
                scale,
                l_star_bits: alloc.total_leakage_bits,
                feasible: alloc.is_optimal(),
                slack,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut writer =
        csv::Writer::from_path(out).with_context(|| format!("creating {}", out.display()))?;
    let mut header = vec![
        "scale".to_string(),
        "L_star_bits".to_string(),
        "feasible".to_string(),
    ];
    header.extend((0..base.len()).map(|k| format!("slack_{k}")));
    writer.write_record(&header)?;
    for row in &rows {
        let mut record = vec![
            format_number(row.scale),
            format_number(row.l_star_bits),
            row.feasible.to_string(),
        ];
        if row.feasible {
            record.extend(row.slack.iter().map(|&s| format_number(s)));
        } else {
            record.extend((0..base.len()).map(|_| String::new()));
        }
        writer.write_record(&record)?;
    }
    writer.flush()?;

    #[derive(Serialize)]
    struct Summary<'a> {
        out: &'a Path,
        rows: usize,
        feasible_rows: usize,
    }
    print_json(&Summary {
        out,
        rows: rows.len(),
        feasible_rows: rows.iter().filter(|r| r.feasible).count(),
    })?;
    Ok(Outcome::Success)
}

fn joint_channel(mechanism: Mechanism) -> Result<Channel> {
    match mechanism {
        Mechanism::Joint(ch) => Ok(ch),
        Mechanism::Parallel(chans) => Ok(product_channel(&chans)?),
    }
}

pub fn parallelize(
    model_path: &Path,
    mechanism_path: &Path,
    compression: bool,
    emit: Option<&PathBuf>,
) -> Result<Outcome> {
    let model = load_with_overrides(model_path, &[])?;
    let ch = joint_channel(load_mechanism(mechanism_path)?.mechanism)?;
    let (par, report) = if compression {
        parallelize_compression(&model, &ch)?
    } else {
        parallelize_privatization(&model, &ch)?
    };
    if let Some(out) = emit {
        let text = serde_json::to_string_pretty(&par)?;
        std::fs::write(out, text).with_context(|| format!("writing {}", out.display()))?;
    }
    print_json(&report)?;
    Ok(if report.all_hold() {
        Outcome::Success
    } else {
        Outcome::VerificationFailed
    })
}

pub fn dp_eps(model_path: &Path, mechanism_path: &Path) -> Result<Outcome> {
    let model = load_with_overrides(model_path, &[])?;
    let file = load_mechanism(mechanism_path)?;
    let report = match &file.mechanism {
        Mechanism::Joint(ch) => epsilon(&model, ch)?,
        Mechanism::Parallel(chans) => epsilon_parallel(&model, chans)?,
    };
    #[derive(Serialize)]
    struct Output {
        #[serde(flatten)]
        report: DpReport,
        units: &'static str,
    }
    print_json(&Output {
        report,
        units: "nats",
    })?;
    Ok(Outcome::Success)
}

pub fn verify(seed: u64, trials: usize, mechanism: Option<(&Path, &Path)>) -> Result<Outcome> {
    if trials == 0 {
        bail!("--trials must be at least 1");
    }
    let mut summary = run_verification(&VerifyConfig::new(seed, trials));
    if let Some((model_path, mechanism_path)) = mechanism {
        let model = load_with_overrides(model_path, &[])?;
        let file = load_mechanism(mechanism_path)?;
        let ch = joint_channel(file.mechanism)?;
        summary
            .suites
            .push(mechanism_suite(&model, &ch, file.recorded.as_ref()));
        summary.passed = summary.suites.iter().all(|s| s.passed);
    }
    print_json(&summary)?;
    Ok(if summary.passed {
        Outcome::Success
    } else {
        Outcome::VerificationFailed
    })
}
