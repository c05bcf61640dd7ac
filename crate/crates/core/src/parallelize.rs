//! Turning an arbitrary mechanism over the joint data into a product of
//! per-component mechanisms without losing utility.
//!
//! Privatization: component `i` releases `Y'_i = (U_i, Z_i)` where
//! `U_i ~ p(Y, S_1..S_{i-1} | S_i = f_i(X_i))` and `Z_i` is the functional
//! representation of `X_i` given `(U_i, S_i)`. The leakage is unchanged and
//! no task loses information.
//!
//! Compression: component `i` releases `Y''_i ~ p(X_1..X_{i-1}, Y | X_i)`,
//! which preserves `H(X | Y)` and never lowers any utility.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::channel::{
    evaluate_mechanism, evaluate_parallel, product_channel, Channel, MechanismMetrics,
};
use crate::error::{Error, Result};
use crate::frl::functional_representation;
use crate::infotheory::JointTable;
use crate::model::{product_label, DataModel, PRODUCT_CAP};

/// Tolerance on every claimed relation.
pub const CLAIM_TOLERANCE: f64 = 1e-9;

/// A mechanism given as independent per-component channels.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParallelizedChannel {
    pub components: Vec<Channel>,
}

impl ParallelizedChannel {
    /// The product channel over the joint alphabet.
    pub fn materialize(&self) -> Result<Channel> {
        product_channel(&self.components)
    }

    fn fits_cap(&self, model: &DataModel) -> bool {
        let fits = |sizes: Vec<usize>| {
            sizes
                .into_iter()
                .try_fold(1usize, |acc, n| {
                    acc.checked_mul(n).filter(|&v| v <= PRODUCT_CAP)
                })
                .is_some()
        };
        fits(model.components().iter().map(|c| c.size_x()).collect())
            && fits(self.components.iter().map(|c| c.n_out()).collect())
    }
}

/// One claimed relation and its signed numeric gap.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClaimDelta {
    pub claim: String,
    #[serde(serialize_with = "crate::json::serialize_extended")]
    pub gap: f64,
    pub holds: bool,
}

impl ClaimDelta {
    fn equal(claim: String, gap: f64) -> Self {
        Self {
            claim,
            gap,
            holds: gap.abs() <= CLAIM_TOLERANCE,
        }
    }

    fn at_least(claim: String, gap: f64) -> Self {
        Self {
            claim,
            gap,
            holds: gap >= -CLAIM_TOLERANCE,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParallelizationReport {
    pub original: MechanismMetrics,
    pub transformed: MechanismMetrics,
    pub product_form_ok: bool,
    pub deltas: Vec<ClaimDelta>,
}

impl ParallelizationReport {
    pub fn all_hold(&self) -> bool {
        self.product_form_ok && self.deltas.iter().all(|d| d.holds)
    }
}

/// For component `i`, accumulates `p(key | x_i)` for every `x_i`, where the
/// key is computed from the full joint symbol and the output. Only keys that
/// receive positive mass under some `x_i` are kept, in ascending order.
fn conditional_on_component<K>(
    model: &DataModel,
    ch: &Channel,
    i: usize,
    key: K,
) -> Result<BTreeMap<usize, Vec<f64>>>
where
    K: Fn(&[usize], usize) -> usize,
{
    let radix = model.x_radix()?;
    let comps = model.components();
    let n_i = comps[i].size_x();
    let mut table: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for x in 0..radix.total() {
        let digits = radix.decode(x);
        let weight: f64 = comps
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .map(|(j, c)| c.pmf()[digits[j]])
            .product();
        if weight <= 0.0 {
            continue;
        }
        for (y, &q) in ch.row(x).iter().enumerate() {
            if q > 0.0 {
                table
                    .entry(key(&digits, y))
                    .or_insert_with(|| vec![0.0; n_i])[digits[i]] += weight * q;
            }
        }
    }
    if table.len() > PRODUCT_CAP {
        return Err(Error::CapExceeded {
            size: table.len(),
            cap: PRODUCT_CAP,
        });
    }
    Ok(table)
}

fn check_input(model: &DataModel, ch: &Channel) -> Result<MechanismMetrics> {
    evaluate_mechanism(model, ch)
}

/// `U_i` for every component: a channel `X_i -> U_i` whose rows depend on
/// `x_i` only through `s_i = f_i(x_i)`.
pub fn build_u(model: &DataModel, ch: &Channel) -> Result<Vec<Channel>> {
    check_input(model, ch)?;
    (0..model.num_components())
        .map(|i| u_channel(model, ch, i))
        .collect()
}

fn u_channel(model: &DataModel, ch: &Channel, i: usize) -> Result<Channel> {
    let comps = model.components();
    let comp = &comps[i];
    let prefix_sizes: Vec<usize> = comps[..i].iter().map(|c| c.size_s()).collect();
    let prefix_total: usize = prefix_sizes.iter().product();
    let key = |digits: &[usize], y: usize| {
        let s_code = (0..i).fold(0usize, |acc, j| {
            acc * prefix_sizes[j] + comps[j].private_map()[digits[j]]
        });
        y * prefix_total + s_code
    };
    let by_x = conditional_on_component(model, ch, i, key)?;

    // average p(u | x_i) over the preimage of each s_i
    let n_s = comp.size_s();
    let mut s_mass = vec![0.0; n_s];
    let mut s_count = vec![0usize; n_s];
    for (x, &s) in comp.private_map().iter().enumerate() {
        s_mass[s] += comp.pmf()[x];
        s_count[s] += 1;
    }
    let row_for_s = |cond: &[f64], s: usize| -> f64 {
        let members = comp
            .private_map()
            .iter()
            .enumerate()
            .filter(|&(_, &t)| t == s);
        if s_mass[s] > 0.0 {
            members.map(|(x, _)| comp.pmf()[x] * cond[x]).sum::<f64>() / s_mass[s]
        } else {
            members.map(|(x, _)| cond[x]).sum::<f64>() / s_count[s] as f64
        }
    };
    let keys: Vec<usize> = by_x.keys().copied().collect();
    let per_s: Vec<Vec<f64>> = by_x
        .values()
        .map(|cond| (0..n_s).map(|s| row_for_s(cond, s)).collect())
        .collect();
    let keep: Vec<usize> = (0..keys.len())
        .filter(|&u| per_s[u].iter().any(|&p| p > 0.0))
        .collect();

    let labels: Vec<String> = keep
        .iter()
        .map(|&u| {
            let (y, mut s_code) = (keys[u] / prefix_total, keys[u] % prefix_total);
            let mut parts = vec![String::new(); i + 1];
            parts[0] = ch.out_alphabet()[y].clone();
            for j in (0..i).rev() {
                parts[j + 1] = comps[j].alphabet_s()[s_code % prefix_sizes[j]].clone();
                s_code /= prefix_sizes[j];
            }
            product_label(&parts)
        })
        .collect();
    let rows = comp
        .private_map()
        .iter()
        .map(|&s| keep.iter().map(|&u| per_s[u][s]).collect())
        .collect();
    Channel::new(comp.alphabet_x().to_vec(), labels, rows)
}

/// `Y'_i = (U_i, Z_i)` from the `U_i` channel of component `i`.
fn privatized_component(model: &DataModel, i: usize, u: &Channel) -> Result<Channel> {
    let comp = &model.components()[i];
    let (n_x, n_u) = (comp.size_x(), u.n_out());

    // joint of X_i and W = (U_i, S_i), restricted to columns with mass
    let mut w_index: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for x in 0..n_x {
        let s = comp.private_map()[x];
        for k in 0..n_u {
            if comp.pmf()[x] * u.get(x, k) > 0.0 {
                w_index.insert((k, s), 0);
            }
        }
    }
    for (col, slot) in w_index.values_mut().enumerate() {
        *slot = col;
    }
    let n_w = w_index.len();
    let mut probs = vec![0.0; n_x * n_w];
    for x in 0..n_x {
        let s = comp.private_map()[x];
        for k in 0..n_u {
            if let Some(&w) = w_index.get(&(k, s)) {
                probs[x * n_w + w] += comp.pmf()[x] * u.get(x, k);
            }
        }
    }
    let joint = JointTable::from_probs(n_x, n_w, probs)?;
    let rep = functional_representation(&joint);
    let n_z = rep.n_z();

    let mut out: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for x in 0..n_x {
        let s = comp.private_map()[x];
        for k in 0..n_u {
            let pu = u.get(x, k);
            if pu <= 0.0 {
                continue;
            }
            let z_law = match w_index.get(&(k, s)) {
                Some(&w) => rep.z_given_xw(x, w),
                None => rep.z_pmf().to_vec(),
            };
            for (z, q) in z_law.into_iter().enumerate() {
                if q > 0.0 {
                    out.entry(k * n_z + z).or_insert_with(|| vec![0.0; n_x])[x] += pu * q;
                }
            }
        }
    }
    if out.len() > PRODUCT_CAP {
        return Err(Error::CapExceeded {
            size: out.len(),
            cap: PRODUCT_CAP,
        });
    }
    let labels = out
        .keys()
        .map(|&code| product_label(&[&u.out_alphabet()[code / n_z], &rep.z_alphabet()[code % n_z]]))
        .collect();
    let columns: Vec<&Vec<f64>> = out.values().collect();
    let rows = (0..n_x)
        .map(|x| columns.iter().map(|c| c[x]).collect())
        .collect();
    Channel::new(comp.alphabet_x().to_vec(), labels, rows)
}

/// `Y''_i ~ p(X_1..X_{i-1}, Y | X_i)`.
fn compression_component(model: &DataModel, ch: &Channel, i: usize) -> Result<Channel> {
    let comps = model.components();
    let n_y = ch.n_out();
    let prefix_sizes: Vec<usize> = comps[..i].iter().map(|c| c.size_x()).collect();
    let key = |digits: &[usize], y: usize| {
        let x_code = (0..i).fold(0usize, |acc, j| acc * prefix_sizes[j] + digits[j]);
        x_code * n_y + y
    };
    let table = conditional_on_component(model, ch, i, key)?;
    let labels = table
        .keys()
        .map(|&code| {
            let (mut x_code, y) = (code / n_y, code % n_y);
            let mut parts = vec![String::new(); i + 1];
            parts[i] = ch.out_alphabet()[y].clone();
            for j in (0..i).rev() {
                parts[j] = comps[j].alphabet_x()[x_code % prefix_sizes[j]].clone();
                x_code /= prefix_sizes[j];
            }
            product_label(&parts)
        })
        .collect();
    let columns: Vec<&Vec<f64>> = table.values().collect();
    let rows = (0..comps[i].size_x())
        .map(|x| columns.iter().map(|c| c[x]).collect())
        .collect();
    Channel::new(comps[i].alphabet_x().to_vec(), labels, rows)
}

/// When the product fits under the cap, checks that the materialized product
/// evaluates to the per-component metrics and that `(X, Y')` factorizes.
fn product_form_check(
    model: &DataModel,
    par: &ParallelizedChannel,
    transformed: &MechanismMetrics,
) -> Result<(bool, Option<ClaimDelta>)> {
    if !par.fits_cap(model) {
        return Ok((true, None));
    }
    let product = par.materialize()?;
    let direct = evaluate_mechanism(model, &product)?;
    let close = |a: f64, b: f64| (a - b).abs() <= CLAIM_TOLERANCE;
    let metrics_ok = close(direct.leakage_bits, transformed.leakage_bits)
        && close(direct.rate_bits, transformed.rate_bits)
        && direct
            .utility_bits
            .iter()
            .zip(&transformed.utility_bits)
            .all(|(a, b)| close(*a, *b));

    // total variation between p(x, y') and prod_i p(x_i, y'_i)
    let x_radix = model.x_radix()?;
    let sizes: Vec<usize> = par.components.iter().map(|c| c.n_out()).collect();
    let y_radix = crate::model::MixedRadix::new(&sizes)?;
    let comps = model.components();
    let mut tv = 0.0;
    for x in 0..x_radix.total() {
        let xd = x_radix.decode(x);
        let px: f64 = comps.iter().zip(&xd).map(|(c, &d)| c.pmf()[d]).product();
        for y in 0..y_radix.total() {
            let factored: f64 = (0..comps.len())
                .map(|i| {
                    let yi = y_radix.digit(y, i);
                    comps[i].pmf()[xd[i]] * par.components[i].get(xd[i], yi)
                })
                .product();
            tv += (px * product.get(x, y) - factored).abs();
        }
    }
    let independence = ClaimDelta::equal("independence_tv".into(), 0.5 * tv);
    Ok((metrics_ok, Some(independence)))
}

fn utility_deltas(original: &MechanismMetrics, transformed: &MechanismMetrics) -> Vec<ClaimDelta> {
    original
        .utility_bits
        .iter()
        .zip(&transformed.utility_bits)
        .enumerate()
        .map(|(k, (a, b))| ClaimDelta::at_least(format!("utility[{k}]"), b - a))
        .collect()
}

/// Parallelized privatization `Y' = [Y'_1..Y'_N]` of a joint mechanism.
pub fn parallelize_privatization(
    model: &DataModel,
    ch: &Channel,
) -> Result<(ParallelizedChannel, ParallelizationReport)> {
    let original = check_input(model, ch)?;
    let components = (0..model.num_components())
        .map(|i| {
            let u = u_channel(model, ch, i)?;
            privatized_component(model, i, &u)
        })
        .collect::<Result<Vec<_>>>()?;
    let par = ParallelizedChannel { components };
    let transformed = evaluate_parallel(model, &par.components)?;

    let mut deltas = vec![ClaimDelta::equal(
        "leakage".into(),
        transformed.leakage_bits - original.leakage_bits,
    )];
    deltas.extend(utility_deltas(&original, &transformed));
    let (product_form_ok, independence) = product_form_check(model, &par, &transformed)?;
    deltas.extend(independence);
    Ok((
        par,
        ParallelizationReport {
            original,
            transformed,
            product_form_ok,
            deltas,
        },
    ))
}

/// Parallelized compression `Y'' = [Y''_1..Y''_N]` of a joint mechanism.
pub fn parallelize_compression(
    model: &DataModel,
    ch: &Channel,
) -> Result<(ParallelizedChannel, ParallelizationReport)> {
    let original = check_input(model, ch)?;
    let components = (0..model.num_components())
        .map(|i| compression_component(model, ch, i))
        .collect::<Result<Vec<_>>>()?;
    let par = ParallelizedChannel { components };
    let transformed = evaluate_parallel(model, &par.components)?;

    // H(X | Y) = H(X) - I(X; Y)
    let mut deltas = vec![ClaimDelta::equal(
        "conditional_entropy".into(),
        original.rate_bits - transformed.rate_bits,
    )];
    deltas.extend(utility_deltas(&original, &transformed));
    deltas.extend(
        original
            .per_component_bits
            .iter()
            .zip(&transformed.per_component_bits)
            .enumerate()
            .map(|(i, (a, b))| ClaimDelta::at_least(format!("component[{i}]"), b - a)),
    );
    let (product_form_ok, independence) = product_form_check(model, &par, &transformed)?;
    deltas.extend(independence);
    Ok((
        par,
        ParallelizationReport {
            original,
            transformed,
            product_form_ok,
            deltas,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::component_information;
    use crate::model::{ComponentModel, Target};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_rows(rng: &mut ChaCha8Rng, n_in: usize, n_out: usize) -> Vec<Vec<f64>> {
        (0..n_in)
            .map(|_| {
                let w: Vec<f64> = (0..n_out).map(|_| rng.random::<f64>()).collect();
                let t: f64 = w.iter().sum();
                w.iter().map(|v| v / t).collect()
            })
            .collect()
    }

    fn random_channel(model: &DataModel, n_out: usize, seed: u64) -> Channel {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let alphabet = model.joint_alphabet().unwrap();
        let rows = random_rows(&mut rng, alphabet.len(), n_out);
        Channel::new(
            alphabet,
            (0..n_out).map(|y| format!("y{y}")).collect(),
            rows,
        )
        .unwrap()
    }

    fn parity_pair() -> DataModel {
        let parity = ComponentModel::from_indices(vec![0.25; 4], vec![0, 1, 0, 1]).unwrap();
        DataModel::new(
            vec![parity.clone(), parity],
            vec![
                (vec![0], Target::GammaBits(1.5)),
                (vec![0, 1], Target::GammaBits(2.5)),
            ],
        )
        .unwrap()
    }

    fn binary_model(n: usize, seed: u64) -> DataModel {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let comps = (0..n)
            .map(|_| {
                let p = rng.random_range(0.1..0.9);
                let map = if rng.random_bool(0.5) {
                    vec![0, 1]
                } else {
                    vec![0, 0]
                };
                ComponentModel::from_indices(vec![p, 1.0 - p], map).unwrap()
            })
            .collect();
        let tasks = (0..n)
            .map(|i| (vec![i], Target::GammaBits(0.0)))
            .chain([((0..n).collect(), Target::GammaBits(0.0))]);
        DataModel::new(comps, tasks.collect()).unwrap()
    }

    fn mutual_s_u(model: &DataModel, us: &[Channel]) -> f64 {
        (0..us.len())
            .map(|i| component_information(model, i, &us[i]).unwrap().0)
            .sum()
    }

    #[test]
    fn single_component_u_is_y_given_s() {
        let comp = ComponentModel::from_indices(vec![0.2, 0.3, 0.5], vec![0, 1, 1]).unwrap();
        let model = DataModel::new(vec![comp], vec![]).unwrap();
        let ch = random_channel(&model, 3, 1);
        let us = build_u(&model, &ch).unwrap();
        assert_eq!(us[0].out_alphabet(), ch.out_alphabet());
        // rows of x = 1 and x = 2 share s and so share p(y | s)
        let expected: Vec<f64> = (0..3)
            .map(|y| (0.3 * ch.get(1, y) + 0.5 * ch.get(2, y)) / 0.8)
            .collect();
        for (y, &e) in expected.iter().enumerate() {
            assert!((us[0].get(1, y) - e).abs() < 1e-15);
            assert_eq!(us[0].get(1, y), us[0].get(2, y));
            assert_eq!(us[0].get(0, y), ch.get(0, y));
        }
        let leak = evaluate_mechanism(&model, &ch).unwrap().leakage_bits;
        assert!((mutual_s_u(&model, &us) - leak).abs() < 1e-12);
    }

    #[test]
    fn constant_output_gives_uninformative_u() {
        let model = binary_model(3, 7);
        let ch = Channel::constant(&model.joint_alphabet().unwrap(), "c");
        let us = build_u(&model, &ch).unwrap();
        assert!(mutual_s_u(&model, &us).abs() < 1e-12);
    }

    #[test]
    fn telescoping_on_binary_pairs() {
        for seed in 0..20 {
            let model = binary_model(2, seed);
            let ch = random_channel(&model, 3, 100 + seed);
            let leak = evaluate_mechanism(&model, &ch).unwrap().leakage_bits;
            let us = build_u(&model, &ch).unwrap();
            assert!((mutual_s_u(&model, &us) - leak).abs() < 1e-9, "seed {seed}");
        }
    }

    #[test]
    fn privatization_of_identity_keeps_everything() {
        let model = parity_pair();
        let ch = Channel::identity(&model.joint_alphabet().unwrap());
        let (_, report) = parallelize_privatization(&model, &ch).unwrap();
        assert!(report.all_hold(), "{report:?}");
        assert!((report.transformed.leakage_bits - 2.0).abs() < 1e-9);
        assert!((report.transformed.utility_bits[1] - 4.0).abs() < 1e-9);
    }

    #[test]
    fn privatization_of_constant_leaks_nothing() {
        let model = parity_pair();
        let ch = Channel::constant(&model.joint_alphabet().unwrap(), "c");
        let (_, report) = parallelize_privatization(&model, &ch).unwrap();
        assert!(report.all_hold());
        assert!(report.transformed.leakage_bits.abs() < 1e-12);
    }

    #[test]
    fn privatization_of_random_parity_channel() {
        let model = parity_pair();
        for seed in 0..10 {
            let ch = random_channel(&model, 3, seed);
            let (par, report) = parallelize_privatization(&model, &ch).unwrap();
            assert!(report.all_hold(), "seed {seed}: {report:?}");
            assert_eq!(par.components.len(), 2);
            let independence = report
                .deltas
                .iter()
                .find(|d| d.claim == "independence_tv")
                .unwrap();
            assert!(independence.gap <= 1e-9);
        }
    }

    #[test]
    fn compression_single_component_is_identity_transform() {
        let comp = ComponentModel::from_indices(vec![0.2, 0.3, 0.5], vec![0, 1, 1]).unwrap();
        let model = DataModel::new(vec![comp], vec![(vec![0], Target::GammaBits(0.5))]).unwrap();
        let ch = random_channel(&model, 4, 9);
        let (par, report) = parallelize_compression(&model, &ch).unwrap();
        assert_eq!(par.components[0].probs(), ch.probs());
        assert!(report.deltas.iter().all(|d| d.gap.abs() < 1e-12));
    }

    #[test]
    fn compression_of_identity_preserves_everything() {
        let model = binary_model(3, 11);
        let ch = Channel::identity(&model.joint_alphabet().unwrap());
        let (_, report) = parallelize_compression(&model, &ch).unwrap();
        assert!(report.all_hold());
        assert!(report.deltas.iter().all(|d| d.gap.abs() < 1e-9));
    }

    #[test]
    fn compression_on_binary_triples() {
        for seed in 0..10 {
            let model = binary_model(3, seed);
            let ch = random_channel(&model, 4, 50 + seed);
            let (_, report) = parallelize_compression(&model, &ch).unwrap();
            assert!(report.all_hold(), "seed {seed}: {report:?}");
        }
    }

    #[test]
    fn compression_construction_is_not_private() {
        // Y = b_1 xor s_2, with b_1 the bit of x_1 that its parity does not
        // carry: independent of S, but Y''_2 = (x_1, y) pins down s_2
        let model = parity_pair();
        let radix = model.x_radix().unwrap();
        let rows = (0..radix.total())
            .map(|x| {
                let d = radix.decode(x);
                let y = (d[0] / 2) ^ (d[1] % 2);
                (0..2).map(|k| if k == y { 1.0 } else { 0.0 }).collect()
            })
            .collect();
        let ch = Channel::new(
            model.joint_alphabet().unwrap(),
            vec!["0".into(), "1".into()],
            rows,
        )
        .unwrap();
        let (_, compressed) = parallelize_compression(&model, &ch).unwrap();
        assert!(compressed.all_hold());
        assert!(compressed.original.leakage_bits.abs() < 1e-12);
        assert!((compressed.transformed.leakage_bits - 1.0).abs() < 1e-9);
        let (_, privatized) = parallelize_privatization(&model, &ch).unwrap();
        assert!(privatized.all_hold());
        assert!(privatized.transformed.leakage_bits.abs() < 1e-9);
    }

    #[test]
    fn rejects_foreign_alphabet() {
        let model = parity_pair();
        let ch = Channel::identity(&["a".to_string(), "b".to_string()]);
        assert!(matches!(
            parallelize_privatization(&model, &ch),
            Err(Error::AlphabetMismatch(_))
        ));
    }
}
