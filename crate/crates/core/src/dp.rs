//! Differential privacy of a mechanism with respect to the private vector `S`.
//!
//! `epsilon` is the smallest constant with
//! `p(y | s) <= exp(epsilon) * p(y | s')` for every output `y` and every pair
//! `s, s'` at Hamming distance one. It is reported in nats and may be
//! infinite. Private vectors of probability zero have no conditional and are
//! skipped.
//!
//! This inequality is used as the definition for mechanisms on `X`; no
//! stronger neighbouring notion on `X` itself is assumed.

use serde::Serialize;

use crate::channel::Channel;
use crate::error::{Error, Result};
use crate::model::{DataModel, MixedRadix};
use crate::parallelize::parallelize_privatization;

/// Slack allowed when comparing two epsilons.
pub const EPSILON_TOLERANCE: f64 = 1e-9;

/// Output and neighboring private vectors attaining the reported epsilon.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DpWitness {
    /// Set when the epsilon comes from a single component of a product.
    pub component: Option<usize>,
    pub output: String,
    pub s: String,
    pub s_prime: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DpReport {
    #[serde(serialize_with = "crate::json::serialize_extended")]
    pub epsilon_nats: f64,
    /// Absent when no neighboring pair has positive probability on both sides.
    pub witness: Option<DpWitness>,
}

/// `p(y | s)` over the joint private alphabet; `None` for `p(s) = 0`.
struct Conditionals {
    radix: MixedRadix,
    s_labels: Vec<String>,
    rows: Vec<Option<Vec<f64>>>,
}

fn conditionals(model: &DataModel, ch: &Channel) -> Result<Conditionals> {
    let alphabet = model.joint_alphabet()?;
    if ch.in_alphabet() != alphabet.as_slice() {
        return Err(Error::AlphabetMismatch(format!(
            "channel input alphabet ({} symbols) does not match the model's joint alphabet ({} symbols)",
            ch.n_in(),
            alphabet.len()
        )));
    }
    let radix = model.s_radix()?;
    let s_map = model.joint_private_map()?;
    let all: Vec<usize> = (0..model.num_components()).collect();
    let px = crate::model::joint_pmf(model, &all)?;
    let n_y = ch.n_out();
    let mut mass = vec![0.0; radix.total()];
    let mut acc = vec![vec![0.0; n_y]; radix.total()];
    for (x, &p) in px.iter().enumerate() {
        if p > 0.0 {
            mass[s_map[x]] += p;
            for (a, q) in acc[s_map[x]].iter_mut().zip(ch.row(x)) {
                *a += p * q;
            }
        }
    }
    let rows = acc
        .into_iter()
        .zip(&mass)
        .map(|(row, &m)| (m > 0.0).then(|| row.into_iter().map(|v| v / m).collect()))
        .collect();
    Ok(Conditionals {
        radix,
        s_labels: model.private_joint_alphabet()?,
        rows,
    })
}

fn log_ratio(a: f64, b: f64) -> f64 {
    match (a > 0.0, b > 0.0) {
        (true, true) => (a.ln() - b.ln()).abs(),
        (false, false) => 0.0,
        _ => f64::INFINITY,
    }
}

/// Visits every unordered pair of private vectors at Hamming distance `d`
/// (1 or 2) where both have positive probability.
fn for_each_pair(
    radix: &MixedRadix,
    rows: &[Option<Vec<f64>>],
    d: usize,
    mut visit: impl FnMut(usize, usize),
) {
    let sizes = radix.sizes();
    let n = sizes.len();
    for s in 0..radix.total() {
        if rows[s].is_none() {
            continue;
        }
        let digits = radix.decode(s);
        let mut other = digits.clone();
        let change =
            |coords: &[usize], other: &mut Vec<usize>, visit: &mut dyn FnMut(usize, usize)| {
                // enumerate all replacements of the chosen coordinates
                let mut values: Vec<usize> = coords.iter().map(|_| 0).collect();
                loop {
                    if coords.iter().zip(&values).all(|(&c, &v)| v != digits[c]) {
                        for (&c, &v) in coords.iter().zip(&values) {
                            other[c] = v;
                        }
                        let t = radix.encode(other);
                        if t > s && rows[t].is_some() {
                            visit(s, t);
                        }
                        for &c in coords {
                            other[c] = digits[c];
                        }
                    }
                    let mut k = 0;
                    loop {
                        if k == coords.len() {
                            return;
                        }
                        values[k] += 1;
                        if values[k] < sizes[coords[k]] {
                            break;
                        }
                        values[k] = 0;
                        k += 1;
                    }
                }
            };
        match d {
            1 => (0..n).for_each(|a| change(&[a], &mut other, &mut visit)),
            2 => {
                for a in 0..n {
                    for b in a + 1..n {
                        change(&[a, b], &mut other, &mut visit);
                    }
                }
            }
            _ => unreachable!("only distances 1 and 2 are enumerated"),
        }
    }
}

/// Epsilon of a mechanism over the joint alphabet.
pub fn epsilon(model: &DataModel, ch: &Channel) -> Result<DpReport> {
    let cond = conditionals(model, ch)?;
    let mut best = (0.0, None);
    for_each_pair(&cond.radix, &cond.rows, 1, |s, t| {
        let (a, b) = (
            cond.rows[s].as_ref().unwrap(),
            cond.rows[t].as_ref().unwrap(),
        );
        for y in 0..a.len() {
            let r = log_ratio(a[y], b[y]);
            if r > best.0 || (best.1.is_none() && r == best.0) {
                best = (r, Some((y, s, t)));
            }
        }
    });
    Ok(DpReport {
        epsilon_nats: best.0,
        witness: best.1.map(|(y, s, t)| DpWitness {
            component: None,
            output: ch.out_alphabet()[y].clone(),
            s: cond.s_labels[s].clone(),
            s_prime: cond.s_labels[t].clone(),
        }),
    })
}

/// Epsilon of a product of per-component channels: the largest
/// per-component epsilon, since neighbors differ in a single coordinate and
/// the remaining factors cancel.
pub fn epsilon_parallel(model: &DataModel, channels: &[Channel]) -> Result<DpReport> {
    if channels.len() != model.num_components() {
        return Err(Error::AlphabetMismatch(format!(
            "{} channels for {} components",
            channels.len(),
            model.num_components()
        )));
    }
    let mut best = DpReport {
        epsilon_nats: 0.0,
        witness: None,
    };
    for (i, (comp, ch)) in model.components().iter().zip(channels).enumerate() {
        let single = DataModel::new(vec![comp.clone()], vec![])?;
        let mut report = epsilon(&single, ch)?;
        if report.epsilon_nats > best.epsilon_nats
            || (best.witness.is_none() && report.witness.is_some())
        {
            if let Some(w) = report.witness.as_mut() {
                w.component = Some(i);
            }
            best = report;
        }
    }
    Ok(best)
}

/// Largest `|ln p(y|s) - ln p(y|s')| - 2 epsilon` over pairs at Hamming
/// distance two; non-positive whenever the group property holds.
pub fn group_property_gap(model: &DataModel, ch: &Channel, epsilon_nats: f64) -> Result<f64> {
    let cond = conditionals(model, ch)?;
    let mut worst = f64::NEG_INFINITY;
    if epsilon_nats.is_infinite() {
        return Ok(worst);
    }
    for_each_pair(&cond.radix, &cond.rows, 2, |s, t| {
        let (a, b) = (
            cond.rows[s].as_ref().unwrap(),
            cond.rows[t].as_ref().unwrap(),
        );
        for y in 0..a.len() {
            worst = worst.max(log_ratio(a[y], b[y]) - 2.0 * epsilon_nats);
        }
    });
    Ok(worst)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DpParallelizationCheck {
    pub original: DpReport,
    pub parallelized: DpReport,
    pub ok: bool,
}

/// Compares the epsilon of a mechanism with that of its parallelized
/// privatization.
pub fn verify_dp_parallelization(
    model: &DataModel,
    ch: &Channel,
) -> Result<DpParallelizationCheck> {
    let original = epsilon(model, ch)?;
    let (par, _) = parallelize_privatization(model, ch)?;
    let parallelized = epsilon_parallel(model, &par.components)?;
    let ok = original.epsilon_nats.is_infinite()
        || parallelized.epsilon_nats <= original.epsilon_nats + EPSILON_TOLERANCE;
    Ok(DpParallelizationCheck {
        original,
        parallelized,
        ok,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::product_channel;
    use crate::model::{ComponentModel, Target};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn binary_identity_model(n: usize) -> DataModel {
        let comp = ComponentModel::from_indices(vec![0.4, 0.6], vec![0, 1]).unwrap();
        DataModel::new(vec![comp; n], vec![(vec![0], Target::GammaBits(0.0))]).unwrap()
    }

    fn randomized_response(flip: f64) -> Channel {
        let labels = vec!["0".to_string(), "1".to_string()];
        Channel::new(
            labels.clone(),
            labels,
            vec![vec![1.0 - flip, flip], vec![flip, 1.0 - flip]],
        )
        .unwrap()
    }

    fn random_channel(model: &DataModel, n_out: usize, rng: &mut ChaCha8Rng) -> Channel {
        let alphabet = model.joint_alphabet().unwrap();
        let rows = (0..alphabet.len())
            .map(|_| {
                let w: Vec<f64> = (0..n_out).map(|_| rng.random::<f64>() + 1e-3).collect();
                let t: f64 = w.iter().sum();
                w.iter().map(|v| v / t).collect()
            })
            .collect();
        Channel::new(
            alphabet,
            (0..n_out).map(|y| format!("y{y}")).collect(),
            rows,
        )
        .unwrap()
    }

    #[test]
    fn constant_channel_is_zero() {
        let model = binary_identity_model(2);
        let ch = Channel::constant(&model.joint_alphabet().unwrap(), "c");
        assert_eq!(epsilon(&model, &ch).unwrap().epsilon_nats, 0.0);
    }

    #[test]
    fn releasing_s_is_infinite() {
        let model = binary_identity_model(1);
        let report = epsilon(&model, &Channel::identity(&model.joint_alphabet().unwrap())).unwrap();
        assert_eq!(report.epsilon_nats, f64::INFINITY);
        assert!(report.witness.is_some());
    }

    #[test]
    fn randomized_response_is_ln3() {
        let model = binary_identity_model(1);
        let report = epsilon(&model, &randomized_response(0.25)).unwrap();
        assert!((report.epsilon_nats - 3f64.ln()).abs() < 1e-12);

        let pair = binary_identity_model(2);
        let product =
            product_channel(&[randomized_response(0.25), randomized_response(0.1)]).unwrap();
        let direct = epsilon(&pair, &product).unwrap().epsilon_nats;
        let split = epsilon_parallel(
            &pair,
            &[randomized_response(0.25), randomized_response(0.1)],
        )
        .unwrap();
        assert!((direct - 9f64.ln()).abs() < 1e-12);
        assert!((split.epsilon_nats - direct).abs() < 1e-12);
        assert_eq!(split.witness.unwrap().component, Some(1));
    }

    #[test]
    fn zero_probability_private_values_are_skipped() {
        let comp = ComponentModel::from_indices(vec![0.0, 1.0], vec![0, 1]).unwrap();
        let model = DataModel::new(vec![comp], vec![]).unwrap();
        let report = epsilon(&model, &Channel::identity(&model.joint_alphabet().unwrap())).unwrap();
        assert_eq!(report.epsilon_nats, 0.0);
        assert!(report.witness.is_none());
    }

    #[test]
    fn product_matches_per_component_maximum() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let comps = vec![
            ComponentModel::from_indices(vec![0.2, 0.3, 0.5], vec![0, 1, 1]).unwrap(),
            ComponentModel::from_indices(vec![0.5, 0.25, 0.25], vec![0, 1, 2]).unwrap(),
        ];
        let model = DataModel::new(comps.clone(), vec![]).unwrap();
        for _ in 0..20 {
            let chans: Vec<Channel> = comps
                .iter()
                .map(|c| {
                    let single = DataModel::new(vec![c.clone()], vec![]).unwrap();
                    random_channel(&single, 3, &mut rng)
                })
                .collect();
            let direct = epsilon(&model, &product_channel(&chans).unwrap())
                .unwrap()
                .epsilon_nats;
            let split = epsilon_parallel(&model, &chans).unwrap().epsilon_nats;
            assert!((direct - split).abs() < 1e-9);
        }
    }

    #[test]
    fn group_property_on_random_channels() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let model = binary_identity_model(3);
        for _ in 0..20 {
            let ch = random_channel(&model, 4, &mut rng);
            let eps = epsilon(&model, &ch).unwrap().epsilon_nats;
            assert!(group_property_gap(&model, &ch, eps).unwrap() <= 1e-9);
        }
    }

    #[test]
    fn parallelization_never_increases_epsilon() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let model = binary_identity_model(2);
        for _ in 0..20 {
            let ch = random_channel(&model, 3, &mut rng);
            let check = verify_dp_parallelization(&model, &ch).unwrap();
            assert!(check.ok, "{check:?}");
        }
        let constant = Channel::constant(&model.joint_alphabet().unwrap(), "c");
        let check = verify_dp_parallelization(&model, &constant).unwrap();
        assert!(
            check.ok && check.parallelized.epsilon_nats < 1e-12,
            "{check:?}"
        );
    }

    #[test]
    fn parallelizing_a_product_keeps_epsilon() {
        let model = binary_identity_model(2);
        let product =
            product_channel(&[randomized_response(0.25), randomized_response(0.4)]).unwrap();
        let check = verify_dp_parallelization(&model, &product).unwrap();
        assert!((check.original.epsilon_nats - check.parallelized.epsilon_nats).abs() < 1e-9);
    }

    #[test]
    fn rejects_foreign_alphabet() {
        let model = binary_identity_model(2);
        assert!(matches!(
            epsilon(&model, &randomized_response(0.2)),
            Err(Error::AlphabetMismatch(_))
        ));
    }
}
