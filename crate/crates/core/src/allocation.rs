//! Minimum-leakage allocation of released information across components.
//!
//! Each component `i` releases `alpha_i` bits at leakage cost
//! `max(0, alpha_i - tau_i)`. Choosing the `alpha_i` is a linear program:
//! minimize the total leakage subject to `sum_{i in C_k} alpha_i >= gamma_k`
//! for every task and `tau_i <= alpha_i <= H(X_i)`. Substituting
//! `beta_i = alpha_i - tau_i` gives a program in standard form.

use serde::Serialize;

use crate::channel::{
    evaluate_mechanism, evaluate_parallel, product_channel, Channel, MechanismMetrics,
};
use crate::error::{Error, Result};
use crate::funnel::{synthesize, threshold, ComponentSolution};
use crate::model::{DataModel, PRODUCT_CAP};
use crate::simplex::{LinearProgram, LpOutcome, Relation, LP_TOLERANCE};

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum AllocationStatus {
    Optimal,
    Infeasible { violated_tasks: Vec<usize> },
}

/// Optimal per-component released information and the resulting leakage.
///
/// When infeasible, `alphas` and `leakage_per_component` are empty and
/// `total_leakage_bits` is `+inf`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Allocation {
    pub alphas: Vec<f64>,
    pub taus: Vec<f64>,
    pub entropies: Vec<f64>,
    pub leakage_per_component: Vec<f64>,
    #[serde(serialize_with = "crate::json::serialize_extended")]
    pub total_leakage_bits: f64,
    pub status: AllocationStatus,
}

impl Allocation {
    pub fn is_optimal(&self) -> bool {
        self.status == AllocationStatus::Optimal
    }
}

/// Tasks whose target exceeds the entropy of their components.
pub fn violated_tasks(model: &DataModel) -> Vec<usize> {
    (0..model.tasks().len())
        .filter(|&k| model.tasks()[k].gamma_bits() > model.task_entropy(k) + LP_TOLERANCE)
        .collect()
}

/// The allocation program in `beta` coordinates, without objective.
fn base_program(model: &DataModel, taus: &[f64], entropies: &[f64]) -> LinearProgram {
    let n = model.num_components();
    let mut lp = LinearProgram::new(n);
    for i in 0..n {
        let mut row = vec![0.0; n];
        row[i] = 1.0;
        lp.add_constraint(row, Relation::Le, (entropies[i] - taus[i]).max(0.0));
    }
    for task in model.tasks() {
        let mut row = vec![0.0; n];
        let mut free = 0.0;
        for &i in task.components() {
            row[i] = 1.0;
            free += taus[i];
        }
        let need = task.gamma_bits() - free;
        // targets already covered by the leakage-free region impose nothing
        if need > 0.0 {
            lp.add_constraint(row, Relation::Ge, need);
        }
    }
    lp
}

fn expect_optimal(outcome: LpOutcome) -> Result<Vec<f64>> {
    match outcome {
        LpOutcome::Optimal { x, .. } => Ok(x),
        LpOutcome::Infeasible => Err(Error::Solver("tie-break stage became infeasible".into())),
        LpOutcome::Unbounded => Err(Error::Solver("bounded program reported unbounded".into())),
    }
}

/// Solves the allocation program with the simplex method. Among optimal
/// allocations the lexicographically smallest `alpha` is returned.
pub fn solve_allocation(model: &DataModel) -> Result<Allocation> {
    let n = model.num_components();
    let taus: Vec<f64> = model.components().iter().map(threshold).collect();
    let entropies: Vec<f64> = model.components().iter().map(|c| c.entropy_x()).collect();
    let infeasible = |violated: Vec<usize>| Allocation {
        alphas: Vec::new(),
        taus: taus.clone(),
        entropies: entropies.clone(),
        leakage_per_component: Vec::new(),
        total_leakage_bits: f64::INFINITY,
        status: AllocationStatus::Infeasible {
            violated_tasks: violated,
        },
    };

    let violated = violated_tasks(model);
    if !violated.is_empty() {
        return Ok(infeasible(violated));
    }

    let mut lp = base_program(model, &taus, &entropies);
    lp.set_objective(vec![1.0; n]);
    let (first, optimum) = match lp.solve()? {
        LpOutcome::Optimal { x, objective } => (x, objective),
        LpOutcome::Infeasible => return Ok(infeasible(violated_tasks(model))),
        LpOutcome::Unbounded => {
            return Err(Error::Solver(
                "allocation program reported unbounded".into(),
            ))
        }
    };

    // Lexicographic pass: keep the total at its optimum, then push each
    // coordinate down in component order.
    let mut fixed: Vec<(usize, f64)> = Vec::new();
    for j in 0..n {
        if entropies[j] - taus[j] <= 0.0 {
            fixed.push((j, 0.0));
            continue;
        }
        let mut stage = base_program(model, &taus, &entropies);
        stage.add_constraint(vec![1.0; n], Relation::Le, optimum + LP_TOLERANCE * 1e-3);
        for &(i, v) in &fixed {
            let mut row = vec![0.0; n];
            row[i] = 1.0;
            stage.add_constraint(row, Relation::Le, v);
        }
        let mut objective = vec![0.0; n];
        objective[j] = 1.0;
        stage.set_objective(objective);
        let x = expect_optimal(stage.solve()?)?;
        fixed.push((j, x[j].max(0.0)));
    }
    // each coordinate is read off the stage that minimized it; later stages
    // only drift earlier coordinates within the solver tolerance
    let mut beta = first;
    for &(j, v) in &fixed {
        beta[j] = v;
    }

    let alphas: Vec<f64> = (0..n)
        .map(|i| (taus[i] + beta[i]).clamp(taus[i], entropies[i].max(taus[i])))
        .collect();
    let leakage_per_component: Vec<f64> = alphas
        .iter()
        .zip(&taus)
        .map(|(a, t)| (a - t).max(0.0))
        .collect();
    Ok(Allocation {
        total_leakage_bits: leakage_per_component.iter().sum(),
        alphas,
        taus,
        entropies,
        leakage_per_component,
        status: AllocationStatus::Optimal,
    })
}

/// Optimal allocation together with the synthesized mechanism.
#[derive(Debug, Clone, Serialize)]
pub struct MechanismBundle {
    pub allocation: Allocation,
    pub solutions: Vec<ComponentSolution>,
    /// Product of the component channels; omitted when the joint alphabet
    /// exceeds [`PRODUCT_CAP`].
    pub product: Option<Channel>,
    pub metrics: MechanismMetrics,
}

impl MechanismBundle {
    pub fn component_channels(&self) -> Vec<Channel> {
        self.solutions.iter().map(|s| s.channel.clone()).collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("bundle serializes")
    }
}

/// Solves the allocation, synthesizes every component, assembles the
/// product channel and checks the achieved metrics against the optimum.
pub fn solve_and_synthesize(model: &DataModel) -> Result<MechanismBundle> {
    let allocation = solve_allocation(model)?;
    if let AllocationStatus::Infeasible { violated_tasks } = &allocation.status {
        return Err(Error::Infeasible(violated_tasks.clone()));
    }
    let solutions = model
        .components()
        .iter()
        .zip(&allocation.alphas)
        .map(|(c, &a)| synthesize(c, a))
        .collect::<Result<Vec<_>>>()?;
    let channels: Vec<Channel> = solutions.iter().map(|s| s.channel.clone()).collect();

    let joint_size = model.components().iter().try_fold(1usize, |acc, c| {
        acc.checked_mul(c.size_x()).filter(|&v| v <= PRODUCT_CAP)
    });
    let product_outputs = channels.iter().try_fold(1usize, |acc, c| {
        acc.checked_mul(c.n_out()).filter(|&v| v <= PRODUCT_CAP)
    });
    let (product, metrics) = match (joint_size, product_outputs) {
        (Some(_), Some(_)) => {
            let product = product_channel(&channels)?;
            let metrics = evaluate_mechanism(model, &product)?;
            (Some(product), metrics)
        }
        _ => (None, evaluate_parallel(model, &channels)?),
    };

    if (metrics.leakage_bits - allocation.total_leakage_bits).abs() > LP_TOLERANCE {
        return Err(Error::Solver(format!(
            "synthesized leakage {} differs from the optimum {}",
            metrics.leakage_bits, allocation.total_leakage_bits
        )));
    }
    if let Some(k) = metrics
        .satisfied(model, LP_TOLERANCE)
        .iter()
        .position(|ok| !ok)
    {
        return Err(Error::Solver(format!(
            "synthesized mechanism misses task {k}: {} < {}",
            metrics.utility_bits[k],
            model.tasks()[k].gamma_bits()
        )));
    }
    Ok(MechanismBundle {
        allocation,
        solutions,
        product,
        metrics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ComponentModel, Target};

    fn parity() -> ComponentModel {
        ComponentModel::from_indices(vec![0.25; 4], vec![0, 1, 0, 1]).unwrap()
    }

    fn parity_model(gammas: &[(Vec<usize>, f64)]) -> DataModel {
        DataModel::new(
            vec![parity(), parity()],
            gammas
                .iter()
                .map(|(c, g)| (c.clone(), Target::GammaBits(*g)))
                .collect(),
        )
        .unwrap()
    }

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-9
    }

    #[test]
    fn parity_example() {
        let model = parity_model(&[(vec![0], 1.5), (vec![0, 1], 2.5)]);
        let alloc = solve_allocation(&model).unwrap();
        assert!(alloc.is_optimal());
        assert!(
            close(alloc.alphas[0], 1.5) && close(alloc.alphas[1], 1.0),
            "{:?}",
            alloc.alphas
        );
        assert!(close(alloc.total_leakage_bits, 0.5));
    }

    #[test]
    fn covering_task_in_leakage_free_region() {
        let model = parity_model(&[(vec![0, 1], 1.7)]);
        let alloc = solve_allocation(&model).unwrap();
        assert_eq!(alloc.alphas, alloc.taus);
        assert_eq!(alloc.total_leakage_bits, 0.0);
    }

    #[test]
    fn disjoint_tasks_are_separable() {
        let comps = vec![
            parity(),
            ComponentModel::from_indices(vec![0.5, 0.5], vec![0, 1]).unwrap(),
            ComponentModel::from_indices(vec![0.1, 0.2, 0.3, 0.4], vec![0, 0, 1, 1]).unwrap(),
        ];
        let taus: Vec<f64> = comps.iter().map(threshold).collect();
        let tasks = vec![(vec![0], 1.8), (vec![1, 2], 1.5)];
        let expected: f64 = tasks
            .iter()
            .map(|(c, g)| (g - c.iter().map(|&i| taus[i]).sum::<f64>()).max(0.0))
            .sum();
        let model = DataModel::new(
            comps,
            tasks
                .into_iter()
                .map(|(c, g)| (c, Target::GammaBits(g)))
                .collect(),
        )
        .unwrap();
        let alloc = solve_allocation(&model).unwrap();
        assert!(close(alloc.total_leakage_bits, expected));
    }

    #[test]
    fn tie_break_prefers_later_components() {
        // any split of 1 bit between the two components is optimal
        let model = parity_model(&[(vec![0, 1], 3.0)]);
        let alloc = solve_allocation(&model).unwrap();
        assert!(
            close(alloc.alphas[0], 1.0) && close(alloc.alphas[1], 2.0),
            "{:?}",
            alloc.alphas
        );
    }

    #[test]
    fn infeasible_reports_violated_tasks() {
        let model = parity_model(&[(vec![0], 1.0), (vec![1], 2.5), (vec![0, 1], 4.5)]);
        let alloc = solve_allocation(&model).unwrap();
        assert_eq!(
            alloc.status,
            AllocationStatus::Infeasible {
                violated_tasks: vec![1, 2]
            }
        );
        assert_eq!(alloc.total_leakage_bits, f64::INFINITY);
        assert!(
            matches!(solve_and_synthesize(&model), Err(Error::Infeasible(v)) if v == vec![1, 2])
        );
    }

    #[test]
    fn bundle_for_parity_example() {
        let model = parity_model(&[(vec![0], 1.5), (vec![0, 1], 2.5)]);
        let bundle = solve_and_synthesize(&model).unwrap();
        assert!(close(bundle.metrics.leakage_bits, 0.5));
        assert!(close(bundle.metrics.utility_bits[0], 1.5));
        assert!(close(bundle.metrics.utility_bits[1], 2.5));
        let product = bundle.product.as_ref().unwrap();
        assert_eq!(
            product,
            &product_channel(&bundle.component_channels()).unwrap()
        );
    }

    #[test]
    fn all_zero_targets_emit_privatizers() {
        let model = parity_model(&[(vec![0], 0.0), (vec![1], 0.0)]);
        let bundle = solve_and_synthesize(&model).unwrap();
        assert!(bundle.solutions.iter().all(|s| s.mix_p.is_none()));
        assert!(bundle.metrics.leakage_bits.abs() < 1e-12);
    }

    #[test]
    fn forced_corner_releases_everything() {
        let model = parity_model(&[(vec![0, 1], 4.0)]);
        let bundle = solve_and_synthesize(&model).unwrap();
        assert!(close(bundle.allocation.total_leakage_bits, 2.0));
        for s in &bundle.solutions {
            assert_eq!(s.mix_p, Some(0.0));
            assert_eq!(
                s.channel.probs(),
                Channel::identity(parity().alphabet_x()).probs()
            );
        }
    }

    #[test]
    fn negative_slack_targets_are_inactive() {
        let model = parity_model(&[(vec![0], 0.3), (vec![1], -0.0)]);
        let alloc = solve_allocation(&model).unwrap();
        assert_eq!(alloc.total_leakage_bits, 0.0);
    }
}
