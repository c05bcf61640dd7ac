//! Data model: independent discrete components, their deterministic private
//! features, and the set of candidate tasks.
//!
//! Each component `X_i` carries a pmf over an ordered alphabet and a total map
//! `f_i` onto an ordered private alphabet, so `S_i = f_i(X_i)`. The joint law of
//! `X = [X_1..X_N]` is the product of the component pmfs. A task is a
//! sub-vector `C_k` of `X` together with a utility target `gamma(C_k)` in bits,
//! given either directly or as a log-loss distortion `D_k` with
//! `gamma(C_k) = H(C_k) - D_k`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::infotheory::entropy_bits;

/// Tolerance for pmf normalization and target range checks.
pub const PMF_TOLERANCE: f64 = 1e-9;

/// Largest product alphabet any operation will materialize.
pub const PRODUCT_CAP: usize = 4096;

/// Separator used when labelling symbols of a product alphabet.
pub const PRODUCT_LABEL_SEPARATOR: &str = ",";

/// Mixed-radix indexing of a product alphabet. The first coordinate is the
/// most significant, so enumeration order is lexicographic by component.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MixedRadix {
    sizes: Vec<usize>,
    strides: Vec<usize>,
    total: usize,
}

impl MixedRadix {
    pub fn new(sizes: &[usize]) -> Result<Self> {
        let mut total: usize = 1;
        for &s in sizes {
            total = total.checked_mul(s).ok_or(Error::CapExceeded {
                size: usize::MAX,
                cap: PRODUCT_CAP,
            })?;
            if total > PRODUCT_CAP {
                return Err(Error::CapExceeded {
                    size: sizes.iter().fold(1usize, |a, &b| a.saturating_mul(b)),
                    cap: PRODUCT_CAP,
                });
            }
        }
        let mut strides = vec![1; sizes.len()];
        for i in (0..sizes.len().saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * sizes[i + 1];
        }
        Ok(Self {
            sizes: sizes.to_vec(),
            strides,
            total,
        })
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn total(&self) -> usize {
        self.total
    }

    pub fn digit(&self, index: usize, coordinate: usize) -> usize {
        (index / self.strides[coordinate]) % self.sizes[coordinate]
    }

    pub fn decode(&self, mut index: usize) -> Vec<usize> {
        let mut digits = vec![0; self.sizes.len()];
        for (d, &stride) in digits.iter_mut().zip(&self.strides) {
            *d = index / stride;
            index %= stride;
        }
        digits
    }

    pub fn encode(&self, digits: &[usize]) -> usize {
        digits.iter().zip(&self.strides).map(|(d, s)| d * s).sum()
    }
}

/// Label of a product symbol built from component labels.
pub fn product_label<S: AsRef<str>>(parts: &[S]) -> String {
    parts
        .iter()
        .map(|p| p.as_ref())
        .collect::<Vec<_>>()
        .join(PRODUCT_LABEL_SEPARATOR)
}

/// Lexicographic product of ordered alphabets.
pub fn product_alphabet(alphabets: &[&[String]]) -> Result<Vec<String>> {
    let sizes: Vec<usize> = alphabets.iter().map(|a| a.len()).collect();
    let radix = MixedRadix::new(&sizes)?;
    Ok((0..radix.total())
        .map(|idx| {
            let digits = radix.decode(idx);
            let parts: Vec<&str> = digits
                .iter()
                .zip(alphabets)
                .map(|(&d, a)| a[d].as_str())
                .collect();
            product_label(&parts)
        })
        .collect())
}

/// Validates a probability vector and returns its sum.
pub(crate) fn check_pmf(pmf: &[f64], context: &str) -> Result<f64> {
    if pmf.is_empty() {
        return Err(Error::InvalidPmf {
            context: context.to_string(),
            reason: "empty".into(),
        });
    }
    for (j, &p) in pmf.iter().enumerate() {
        if !p.is_finite() || !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidPmf {
                context: context.to_string(),
                reason: format!("entry {j} = {p} is not in [0, 1]"),
            });
        }
    }
    let sum: f64 = pmf.iter().sum();
    if (sum - 1.0).abs() > PMF_TOLERANCE {
        return Err(Error::InvalidPmf {
            context: context.to_string(),
            reason: format!("entries sum to {sum}"),
        });
    }
    Ok(sum)
}

/// One independent component `X_i` with its private feature `S_i = f_i(X_i)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentModel {
    #[serde(rename = "alphabet")]
    alphabet_x: Vec<String>,
    pmf: Vec<f64>,
    private_map: Vec<usize>,
    #[serde(rename = "private_alphabet")]
    alphabet_s: Vec<String>,
}

impl ComponentModel {
    /// Builds and validates a component. A pmf whose sum is off by more than
    /// 1e-12 (but within tolerance) is renormalized here and only here.
    pub fn new(
        alphabet_x: Vec<String>,
        pmf: Vec<f64>,
        private_map: Vec<usize>,
        alphabet_s: Vec<String>,
    ) -> Result<Self> {
        Self::validated(0, alphabet_x, pmf, private_map, alphabet_s)
    }

    fn validated(
        index: usize,
        alphabet_x: Vec<String>,
        mut pmf: Vec<f64>,
        private_map: Vec<usize>,
        alphabet_s: Vec<String>,
    ) -> Result<Self> {
        let context = format!(" of component {index}");
        if alphabet_x.len() != pmf.len() {
            return Err(Error::InvalidPmf {
                context,
                reason: format!(
                    "alphabet has {} symbols but pmf has {} entries",
                    alphabet_x.len(),
                    pmf.len()
                ),
            });
        }
        let sum = check_pmf(&pmf, &context)?;
        if (sum - 1.0).abs() > 1e-12 {
            pmf.iter_mut().for_each(|p| *p /= sum);
        }
        if private_map.len() != alphabet_x.len() {
            return Err(Error::InvalidPrivateMap {
                component: index,
                reason: format!(
                    "map has {} entries for {} symbols",
                    private_map.len(),
                    alphabet_x.len()
                ),
            });
        }
        let mut hit = vec![false; alphabet_s.len()];
        for (j, &s) in private_map.iter().enumerate() {
            if s >= alphabet_s.len() {
                return Err(Error::InvalidPrivateMap {
                    component: index,
                    reason: format!(
                        "symbol {j} maps to {s} but the private alphabet has {} symbols",
                        alphabet_s.len()
                    ),
                });
            }
            hit[s] = true;
        }
        if let Some(unused) = hit.iter().position(|h| !h) {
            return Err(Error::InvalidPrivateMap {
                component: index,
                reason: format!("private symbol {unused} is not in the image of the map"),
            });
        }
        Ok(Self {
            alphabet_x,
            pmf,
            private_map,
            alphabet_s,
        })
    }

    /// Component over symbols `"0".."n-1"` with private labels `"s0".."s{m-1}"`.
    pub fn from_indices(pmf: Vec<f64>, private_map: Vec<usize>) -> Result<Self> {
        let n_s = private_map.iter().max().map_or(0, |m| m + 1);
        Self::new(
            (0..pmf.len()).map(|j| j.to_string()).collect(),
            pmf,
            private_map,
            (0..n_s).map(|j| format!("s{j}")).collect(),
        )
    }

    pub fn alphabet_x(&self) -> &[String] {
        &self.alphabet_x
    }

    pub fn alphabet_s(&self) -> &[String] {
        &self.alphabet_s
    }

    pub fn pmf(&self) -> &[f64] {
        &self.pmf
    }

    pub fn private_map(&self) -> &[usize] {
        &self.private_map
    }

    pub fn size_x(&self) -> usize {
        self.alphabet_x.len()
    }

    pub fn size_s(&self) -> usize {
        self.alphabet_s.len()
    }

    /// Induced pmf of `S_i`.
    pub fn private_pmf(&self) -> Vec<f64> {
        let mut ps = vec![0.0; self.size_s()];
        for (p, &s) in self.pmf.iter().zip(&self.private_map) {
            ps[s] += p;
        }
        ps
    }

    pub fn entropy_x(&self) -> f64 {
        entropy_bits(&self.pmf)
    }

    pub fn entropy_s(&self) -> f64 {
        entropy_bits(&self.private_pmf())
    }
}

/// Utility target of a task as written in the model file.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Target {
    GammaBits(f64),
    DistortionBits(f64),
}

/// A candidate task `C_k` with its resolved utility target.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskSpec {
    components: Vec<usize>,
    target: Target,
    gamma_bits: f64,
}

impl TaskSpec {
    pub fn components(&self) -> &[usize] {
        &self.components
    }

    pub fn target(&self) -> Target {
        self.target
    }

    /// `gamma(C_k)` in bits.
    pub fn gamma_bits(&self) -> f64 {
        self.gamma_bits
    }
}

/// Independent components plus task definitions. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct DataModel {
    components: Vec<ComponentModel>,
    tasks: Vec<TaskSpec>,
}

impl DataModel {
    /// Structural validation: task indices, finiteness of targets. Targets are
    /// resolved to bits but not range-checked; see [`DataModel::check_targets`].
    pub fn new(components: Vec<ComponentModel>, tasks: Vec<(Vec<usize>, Target)>) -> Result<Self> {
        let entropies: Vec<f64> = components.iter().map(|c| c.entropy_x()).collect();
        let mut specs = Vec::with_capacity(tasks.len());
        for (k, (mut idx, target)) in tasks.into_iter().enumerate() {
            if idx.is_empty() {
                return Err(Error::InvalidTask {
                    task: k,
                    reason: "empty component set".into(),
                });
            }
            idx.sort_unstable();
            if idx.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::InvalidTask {
                    task: k,
                    reason: "duplicate component index".into(),
                });
            }
            if let Some(&bad) = idx.iter().find(|&&i| i >= components.len()) {
                return Err(Error::InvalidTask {
                    task: k,
                    reason: format!(
                        "component index {bad} out of range (model has {})",
                        components.len()
                    ),
                });
            }
            let h_task: f64 = idx.iter().map(|&i| entropies[i]).sum();
            let gamma_bits = match target {
                Target::GammaBits(g) => g,
                Target::DistortionBits(d) => h_task - d,
            };
            if !gamma_bits.is_finite() {
                return Err(Error::InvalidTask {
                    task: k,
                    reason: "target is not finite".into(),
                });
            }
            specs.push(TaskSpec {
                components: idx,
                target,
                gamma_bits,
            });
        }
        Ok(Self {
            components,
            tasks: specs,
        })
    }

    /// Rejects any task whose target lies outside `[0, sum_{i in C_k} H(X_i)]`.
    pub fn check_targets(&self) -> Result<()> {
        for (k, task) in self.tasks.iter().enumerate() {
            let max = self.task_entropy(k);
            let g = task.gamma_bits;
            if g < -PMF_TOLERANCE || g > max + PMF_TOLERANCE {
                return Err(Error::InfeasibleModel {
                    task: k,
                    gamma: g,
                    max,
                });
            }
        }
        Ok(())
    }

    /// Copy of this model with every task target replaced by an explicit
    /// gamma in bits.
    pub fn with_gammas(&self, gammas: &[f64]) -> Result<Self> {
        if gammas.len() != self.tasks.len() {
            return Err(Error::OutOfRange(format!(
                "{} gamma values for {} tasks",
                gammas.len(),
                self.tasks.len()
            )));
        }
        let tasks = self
            .tasks
            .iter()
            .zip(gammas)
            .map(|(t, &g)| (t.components.clone(), Target::GammaBits(g)))
            .collect();
        Self::new(self.components.clone(), tasks)
    }

    pub fn components(&self) -> &[ComponentModel] {
        &self.components
    }

    pub fn tasks(&self) -> &[TaskSpec] {
        &self.tasks
    }

    pub fn num_components(&self) -> usize {
        self.components.len()
    }

    pub fn gammas(&self) -> Vec<f64> {
        self.tasks.iter().map(|t| t.gamma_bits).collect()
    }

    /// `H(C_k)`, the sum of the member component entropies.
    pub fn task_entropy(&self, k: usize) -> f64 {
        self.tasks[k]
            .components
            .iter()
            .map(|&i| self.components[i].entropy_x())
            .sum()
    }

    pub fn x_radix(&self) -> Result<MixedRadix> {
        MixedRadix::new(
            &self
                .components
                .iter()
                .map(|c| c.size_x())
                .collect::<Vec<_>>(),
        )
    }

    pub fn s_radix(&self) -> Result<MixedRadix> {
        MixedRadix::new(
            &self
                .components
                .iter()
                .map(|c| c.size_s())
                .collect::<Vec<_>>(),
        )
    }

    /// Labels of the joint alphabet of `X`, lexicographic by component.
    pub fn joint_alphabet(&self) -> Result<Vec<String>> {
        let alphabets: Vec<&[String]> = self.components.iter().map(|c| c.alphabet_x()).collect();
        product_alphabet(&alphabets)
    }

    /// Labels of the joint alphabet of `S`.
    pub fn private_joint_alphabet(&self) -> Result<Vec<String>> {
        let alphabets: Vec<&[String]> = self.components.iter().map(|c| c.alphabet_s()).collect();
        product_alphabet(&alphabets)
    }

    /// Map from joint `x` index to joint `s` index.
    pub fn joint_private_map(&self) -> Result<Vec<usize>> {
        let xr = self.x_radix()?;
        let sr = self.s_radix()?;
        Ok((0..xr.total())
            .map(|x| {
                let digits: Vec<usize> = xr
                    .decode(x)
                    .iter()
                    .zip(&self.components)
                    .map(|(&d, c)| c.private_map[d])
                    .collect();
                sr.encode(&digits)
            })
            .collect())
    }

    /// Map from joint `x` index to the index of the sub-vector on `indices`
    /// (taken in ascending order) within its own product alphabet.
    pub fn projection_map(&self, indices: &[usize]) -> Result<(Vec<usize>, usize)> {
        let idx = self.normalize_indices(indices)?;
        let xr = self.x_radix()?;
        let sub = MixedRadix::new(
            &idx.iter()
                .map(|&i| self.components[i].size_x())
                .collect::<Vec<_>>(),
        )?;
        let map = (0..xr.total())
            .map(|x| {
                let digits: Vec<usize> = idx.iter().map(|&i| xr.digit(x, i)).collect();
                sub.encode(&digits)
            })
            .collect();
        Ok((map, sub.total()))
    }

    fn normalize_indices(&self, indices: &[usize]) -> Result<Vec<usize>> {
        if indices.is_empty() {
            return Err(Error::EmptyIndexSet);
        }
        let mut idx = indices.to_vec();
        idx.sort_unstable();
        idx.dedup();
        if let Some(&bad) = idx.iter().find(|&&i| i >= self.components.len()) {
            return Err(Error::OutOfRange(format!("component index {bad}")));
        }
        Ok(idx)
    }

    /// Serializes to the model-file JSON format.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&ModelFile::from(self)).expect("model serialization")
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })
    }

    /// Parses and fully validates a model from JSON text.
    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile =
            serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        let components = file
            .components
            .into_iter()
            .enumerate()
            .map(|(i, c)| {
                ComponentModel::validated(i, c.alphabet_x, c.pmf, c.private_map, c.alphabet_s)
            })
            .collect::<Result<Vec<_>>>()?;
        let tasks = file
            .tasks
            .into_iter()
            .enumerate()
            .map(|(k, t)| {
                let target = match (t.gamma_bits, t.distortion_bits) {
                    (Some(g), None) => Target::GammaBits(g),
                    (None, Some(d)) => Target::DistortionBits(d),
                    _ => {
                        return Err(Error::InvalidTask {
                            task: k,
                            reason: "exactly one of gamma_bits or distortion_bits is required"
                                .into(),
                        })
                    }
                };
                Ok((t.components, target))
            })
            .collect::<Result<Vec<_>>>()?;
        let model = Self::new(components, tasks)?;
        model.check_targets()?;
        Ok(model)
    }
}

/// Reads, parses and validates a model-spec file.
pub fn load_model(path: impl AsRef<Path>) -> Result<DataModel> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    DataModel::from_json(&text)
}

/// Product pmf of the components in `indices` (ascending component order),
/// lexicographic over the ordered alphabets.
pub fn joint_pmf(model: &DataModel, indices: &[usize]) -> Result<Vec<f64>> {
    let idx = model.normalize_indices(indices)?;
    let sizes: Vec<usize> = idx.iter().map(|&i| model.components[i].size_x()).collect();
    let radix = MixedRadix::new(&sizes)?;
    Ok((0..radix.total())
        .map(|j| {
            idx.iter()
                .enumerate()
                .map(|(pos, &i)| model.components[i].pmf[radix.digit(j, pos)])
                .product()
        })
        .collect())
}

#[derive(Debug, Serialize, Deserialize)]
struct ModelFile {
    components: Vec<ComponentModel>,
    #[serde(default)]
    tasks: Vec<TaskFile>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TaskFile {
    components: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    gamma_bits: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    distortion_bits: Option<f64>,
}

impl From<&DataModel> for ModelFile {
    fn from(model: &DataModel) -> Self {
        Self {
            components: model.components.clone(),
            tasks: model
                .tasks
                .iter()
                .map(|t| {
                    let (gamma_bits, distortion_bits) = match t.target {
                        Target::GammaBits(g) => (Some(g), None),
                        Target::DistortionBits(d) => (None, Some(d)),
                    };
                    TaskFile {
                        components: t.components.clone(),
                        gamma_bits,
                        distortion_bits,
                    }
                })
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    pub(crate) fn parity_json() -> &'static str {
        r#"{
          "components": [
            {"alphabet": ["0","1","2","3"], "pmf": [0.25,0.25,0.25,0.25], "private_map": [0,1,0,1], "private_alphabet": ["even","odd"]},
            {"alphabet": ["0","1","2","3"], "pmf": [0.25,0.25,0.25,0.25], "private_map": [0,1,0,1], "private_alphabet": ["even","odd"]}
          ],
          "tasks": [
            {"components": [0], "gamma_bits": 1.5},
            {"components": [0,1], "gamma_bits": 2.5}
          ]
        }"#
    }

    #[test]
    fn loads_parity_model() {
        let m = DataModel::from_json(parity_json()).unwrap();
        assert_eq!(m.num_components(), 2);
        assert_eq!(m.tasks().len(), 2);
        assert_eq!(m.gammas(), vec![1.5, 2.5]);
        assert_eq!(m.components()[0].private_pmf(), vec![0.5, 0.5]);
    }

    #[test]
    fn distortion_targets_become_gamma() {
        let text = parity_json().replace(r#""gamma_bits": 2.5"#, r#""distortion_bits": 0.5"#);
        let m = DataModel::from_json(&text).unwrap();
        assert!((m.tasks()[1].gamma_bits() - 3.5).abs() < 1e-12);
        assert_eq!(m.tasks()[1].target(), Target::DistortionBits(0.5));
    }

    #[test]
    fn rejects_bad_pmf_sum() {
        let text = r#"{"components":[{"alphabet":["a","b"],"pmf":[0.5,0.6],"private_map":[0,0],"private_alphabet":["s"]}],"tasks":[]}"#;
        assert!(matches!(
            DataModel::from_json(text),
            Err(Error::InvalidPmf { .. })
        ));
    }

    #[test]
    fn rejects_non_total_or_non_onto_map() {
        let short = r#"{"components":[{"alphabet":["a","b"],"pmf":[0.5,0.5],"private_map":[0],"private_alphabet":["s"]}]}"#;
        assert!(matches!(
            DataModel::from_json(short),
            Err(Error::InvalidPrivateMap { .. })
        ));
        let not_onto = r#"{"components":[{"alphabet":["a","b"],"pmf":[0.5,0.5],"private_map":[0,0],"private_alphabet":["s","t"]}]}"#;
        assert!(matches!(
            DataModel::from_json(not_onto),
            Err(Error::InvalidPrivateMap { .. })
        ));
    }

    #[test]
    fn rejects_invalid_task_index() {
        let text = parity_json().replace("[0,1]", "[0,5]");
        assert!(matches!(
            DataModel::from_json(&text),
            Err(Error::InvalidTask { task: 1, .. })
        ));
    }

    #[test]
    fn gamma_above_entropy_is_infeasible() {
        let text = r#"{"components":[{"alphabet":["a","b"],"pmf":[0.5,0.5],"private_map":[0,1],"private_alphabet":["a","b"]}],
                       "tasks":[{"components":[0],"gamma_bits":3.0}]}"#;
        match DataModel::from_json(text) {
            Err(Error::InfeasibleModel { task, gamma, max }) => {
                assert_eq!(task, 0);
                assert_eq!(gamma, 3.0);
                assert!((max - 1.0).abs() < 1e-12);
            }
            other => panic!("expected infeasible model, got {other:?}"),
        }
    }

    #[test]
    fn task_needs_exactly_one_target() {
        let text = parity_json().replace(
            r#""gamma_bits": 1.5"#,
            r#""gamma_bits": 1.5, "distortion_bits": 0.1"#,
        );
        assert!(matches!(
            DataModel::from_json(&text),
            Err(Error::InvalidTask { task: 0, .. })
        ));
    }

    #[test]
    fn joint_pmf_examples() {
        let a = ComponentModel::from_indices(vec![0.5, 0.5], vec![0, 1]).unwrap();
        let b = ComponentModel::from_indices(vec![0.5, 0.5], vec![0, 0]).unwrap();
        let m = DataModel::new(vec![a.clone(), b], vec![]).unwrap();
        assert_eq!(joint_pmf(&m, &[0, 1]).unwrap(), vec![0.25; 4]);
        assert_eq!(joint_pmf(&m, &[1]).unwrap(), vec![0.5, 0.5]);
        assert!(matches!(joint_pmf(&m, &[]), Err(Error::EmptyIndexSet)));

        let c = ComponentModel::from_indices(vec![0.25, 0.75], vec![0, 1]).unwrap();
        let m = DataModel::new(vec![c, a], vec![]).unwrap();
        assert_eq!(
            joint_pmf(&m, &[0, 1]).unwrap(),
            vec![0.125, 0.125, 0.375, 0.375]
        );
    }

    #[test]
    fn mixed_radix_round_trip() {
        let r = MixedRadix::new(&[2, 3, 4]).unwrap();
        assert_eq!(r.total(), 24);
        for i in 0..24 {
            assert_eq!(r.encode(&r.decode(i)), i);
        }
        assert_eq!(r.decode(23), vec![1, 2, 3]);
        assert_eq!(r.digit(23, 1), 2);
        assert!(matches!(
            MixedRadix::new(&[64, 64, 2]),
            Err(Error::CapExceeded { .. })
        ));
    }

    #[test]
    fn product_labels_are_lexicographic() {
        let a = vec!["a".to_string(), "b".to_string()];
        let b = vec!["0".to_string(), "1".to_string()];
        assert_eq!(
            product_alphabet(&[&a, &b]).unwrap(),
            vec!["a,0", "a,1", "b,0", "b,1"]
        );
    }

    fn arb_component() -> impl Strategy<Value = ComponentModel> {
        (1usize..=5)
            .prop_flat_map(|n| {
                (
                    prop::collection::vec(0.01f64..1.0, n),
                    prop::collection::vec(0usize..n, n),
                )
            })
            .prop_map(|(w, map)| {
                let total: f64 = w.iter().sum();
                let pmf = w.iter().map(|x| x / total).collect();
                // compact the map onto its image
                let mut image: Vec<usize> = map.clone();
                image.sort_unstable();
                image.dedup();
                let map = map
                    .iter()
                    .map(|m| image.iter().position(|v| v == m).unwrap())
                    .collect();
                ComponentModel::from_indices(pmf, map).unwrap()
            })
    }

    proptest! {
        #[test]
        fn joint_entropy_is_additive(comps in prop::collection::vec(arb_component(), 1..4)) {
            let n = comps.len();
            let model = DataModel::new(comps, vec![]).unwrap();
            let all: Vec<usize> = (0..n).collect();
            let h_joint = entropy_bits(&joint_pmf(&model, &all).unwrap());
            let h_sum: f64 = model.components().iter().map(|c| c.entropy_x()).sum();
            prop_assert!((h_joint - h_sum).abs() < 1e-9);
            let total: f64 = joint_pmf(&model, &all).unwrap().iter().sum();
            prop_assert!((total - 1.0).abs() < 1e-12);
        }

        #[test]
        fn save_load_round_trip_is_bit_exact(comps in prop::collection::vec(arb_component(), 1..4)) {
            let n = comps.len();
            let model = DataModel::new(comps, vec![((0..n).collect(), Target::GammaBits(0.0))]).unwrap();
            let back = DataModel::from_json(&model.to_json()).unwrap();
            for (a, b) in model.components().iter().zip(back.components()) {
                let bits_a: Vec<u64> = a.pmf().iter().map(|p| p.to_bits()).collect();
                let bits_b: Vec<u64> = b.pmf().iter().map(|p| p.to_bits()).collect();
                prop_assert_eq!(bits_a, bits_b);
            }
            prop_assert_eq!(model, back);
        }
    }
}
