//! Finite channels `p_{Out|In}` and the algebra used to build mechanisms:
//! products, tagged mixtures, pushforwards, and full mechanism evaluation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::infotheory::{mutual_information, JointTable};
use crate::model::{joint_pmf, product_label, DataModel, MixedRadix, PMF_TOLERANCE, PRODUCT_CAP};

/// Row-stochastic table with labelled input and output alphabets.
#[derive(Debug, Clone, PartialEq)]
pub struct Channel {
    in_alphabet: Vec<String>,
    out_alphabet: Vec<String>,
    probs: Vec<f64>,
}

impl Channel {
    pub fn new(
        in_alphabet: Vec<String>,
        out_alphabet: Vec<String>,
        rows: Vec<Vec<f64>>,
    ) -> Result<Self> {
        if rows.len() != in_alphabet.len() {
            return Err(Error::InvalidChannel(format!(
                "{} rows for {} input symbols",
                rows.len(),
                in_alphabet.len()
            )));
        }
        let n_out = out_alphabet.len();
        let mut probs = Vec::with_capacity(rows.len() * n_out);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n_out {
                return Err(Error::InvalidChannel(format!(
                    "row {i} has {} entries for {n_out} output symbols",
                    row.len()
                )));
            }
            probs.extend_from_slice(row);
        }
        Self::from_flat(in_alphabet, out_alphabet, probs)
    }

    /// `probs` is row-major, one row per input symbol.
    pub fn from_flat(
        in_alphabet: Vec<String>,
        out_alphabet: Vec<String>,
        probs: Vec<f64>,
    ) -> Result<Self> {
        if in_alphabet.is_empty() || out_alphabet.is_empty() {
            return Err(Error::InvalidChannel("empty alphabet".into()));
        }
        if probs.len() != in_alphabet.len() * out_alphabet.len() {
            return Err(Error::InvalidChannel(
                "table size does not match alphabets".into(),
            ));
        }
        for (i, row) in probs.chunks(out_alphabet.len()).enumerate() {
            if let Some(p) = row
                .iter()
                .find(|p| !p.is_finite() || !(0.0..=1.0).contains(*p))
            {
                return Err(Error::InvalidChannel(format!(
                    "row {i} has entry {p} outside [0, 1]"
                )));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > PMF_TOLERANCE {
                return Err(Error::InvalidChannel(format!("row {i} sums to {sum}")));
            }
        }
        Ok(Self {
            in_alphabet,
            out_alphabet,
            probs,
        })
    }

    /// Noiseless channel: output label equals input label.
    pub fn identity(alphabet: &[String]) -> Self {
        let n = alphabet.len();
        let mut probs = vec![0.0; n * n];
        for i in 0..n {
            probs[i * n + i] = 1.0;
        }
        Self {
            in_alphabet: alphabet.to_vec(),
            out_alphabet: alphabet.to_vec(),
            probs,
        }
    }

    /// Channel with a single output symbol.
    pub fn constant(in_alphabet: &[String], out_label: &str) -> Self {
        Self {
            in_alphabet: in_alphabet.to_vec(),
            out_alphabet: vec![out_label.to_string()],
            probs: vec![1.0; in_alphabet.len()],
        }
    }

    pub fn in_alphabet(&self) -> &[String] {
        &self.in_alphabet
    }

    pub fn out_alphabet(&self) -> &[String] {
        &self.out_alphabet
    }

    pub fn n_in(&self) -> usize {
        self.in_alphabet.len()
    }

    pub fn n_out(&self) -> usize {
        self.out_alphabet.len()
    }

    pub fn row(&self, input: usize) -> &[f64] {
        let n = self.n_out();
        &self.probs[input * n..(input + 1) * n]
    }

    pub fn get(&self, input: usize, output: usize) -> f64 {
        self.probs[input * self.n_out() + output]
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Same channel with new output labels.
    pub fn relabel_outputs(&self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.n_out() {
            return Err(Error::AlphabetMismatch(format!(
                "{} labels for {} outputs",
                labels.len(),
                self.n_out()
            )));
        }
        Ok(Self {
            out_alphabet: labels,
            ..self.clone()
        })
    }

    /// Same channel with a new input alphabet of equal size.
    pub fn with_in_alphabet(&self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.n_in() {
            return Err(Error::AlphabetMismatch(format!(
                "{} labels for {} inputs",
                labels.len(),
                self.n_in()
            )));
        }
        Ok(Self {
            in_alphabet: labels,
            ..self.clone()
        })
    }

    /// Drops output symbols that no input can produce.
    pub fn without_unused_outputs(&self) -> Self {
        let n = self.n_out();
        let keep: Vec<usize> = (0..n)
            .filter(|&o| (0..self.n_in()).any(|i| self.get(i, o) > 0.0))
            .collect();
        if keep.len() == n || keep.is_empty() {
            return self.clone();
        }
        let probs = (0..self.n_in())
            .flat_map(|i| keep.iter().map(move |&o| (i, o)))
            .map(|(i, o)| self.get(i, o))
            .collect();
        Self {
            in_alphabet: self.in_alphabet.clone(),
            out_alphabet: keep.iter().map(|&o| self.out_alphabet[o].clone()).collect(),
            probs,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&ChannelFile::from(self)).expect("channel serialization")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ChannelFile =
            serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        file.try_into()
    }
}

/// Wire format `{"in": [...], "out": [...], "rows": [[...], ...]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChannelFile {
    #[serde(rename = "in")]
    pub in_alphabet: Vec<String>,
    #[serde(rename = "out")]
    pub out_alphabet: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl From<&Channel> for ChannelFile {
    fn from(ch: &Channel) -> Self {
        Self {
            in_alphabet: ch.in_alphabet.clone(),
            out_alphabet: ch.out_alphabet.clone(),
            rows: (0..ch.n_in()).map(|i| ch.row(i).to_vec()).collect(),
        }
    }
}

impl TryFrom<ChannelFile> for Channel {
    type Error = Error;

    fn try_from(file: ChannelFile) -> Result<Self> {
        Channel::new(file.in_alphabet, file.out_alphabet, file.rows)
    }
}

impl Serialize for Channel {
    fn serialize<S: serde::Serializer>(
        &self,
        serializer: S,
    ) -> std::result::Result<S::Ok, S::Error> {
        ChannelFile::from(self).serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Channel {
    fn deserialize<D: serde::Deserializer<'de>>(
        deserializer: D,
    ) -> std::result::Result<Self, D::Error> {
        let file = ChannelFile::deserialize(deserializer)?;
        Channel::try_from(file).map_err(serde::de::Error::custom)
    }
}

/// `p_{X,Y} = p_X * p_{Y|X}` with `X` on rows.
pub fn push_joint(input_pmf: &[f64], ch: &Channel) -> Result<JointTable> {
    if input_pmf.len() != ch.n_in() {
        return Err(Error::AlphabetMismatch(format!(
            "input pmf has {} entries, channel has {} inputs",
            input_pmf.len(),
            ch.n_in()
        )));
    }
    let probs = input_pmf
        .iter()
        .enumerate()
        .flat_map(|(i, &p)| ch.row(i).iter().map(move |&q| p * q))
        .collect();
    JointTable::new(ch.in_alphabet.clone(), ch.out_alphabet.clone(), probs)
}

/// Aggregates the rows of a joint through `map` (row symbol -> feature index),
/// giving the joint of `(map(row), col)`.
pub fn relabel_through(
    map: &[usize],
    feature_alphabet: &[String],
    joint: &JointTable,
) -> Result<JointTable> {
    if map.len() != joint.rows() {
        return Err(Error::AlphabetMismatch(format!(
            "map covers {} symbols, joint has {} rows",
            map.len(),
            joint.rows()
        )));
    }
    let nf = feature_alphabet.len();
    if let Some(&bad) = map.iter().find(|&&f| f >= nf) {
        return Err(Error::OutOfRange(format!("feature index {bad} >= {nf}")));
    }
    let cols = joint.cols();
    let mut probs = vec![0.0; nf * cols];
    for (r, &f) in map.iter().enumerate() {
        for c in 0..cols {
            probs[f * cols + c] += joint.get(r, c);
        }
    }
    JointTable::new(
        feature_alphabet.to_vec(),
        joint.col_alphabet().to_vec(),
        probs,
    )
}

fn numeric_labels(n: usize) -> Vec<String> {
    (0..n).map(|i| i.to_string()).collect()
}

/// Product channel `prod_i p_{Y_i|X_i}` over lexicographic product alphabets.
pub fn product_channel(channels: &[Channel]) -> Result<Channel> {
    if channels.is_empty() {
        return Err(Error::InvalidChannel("product of zero channels".into()));
    }
    if channels.len() == 1 {
        return Ok(channels[0].clone());
    }
    let in_radix = MixedRadix::new(&channels.iter().map(Channel::n_in).collect::<Vec<_>>())?;
    let out_radix = MixedRadix::new(&channels.iter().map(Channel::n_out).collect::<Vec<_>>())?;
    let n_out = out_radix.total();
    if in_radix.total() * n_out > PRODUCT_CAP * PRODUCT_CAP {
        return Err(Error::CapExceeded {
            size: in_radix.total() * n_out,
            cap: PRODUCT_CAP * PRODUCT_CAP,
        });
    }
    let label = |radix: &MixedRadix, idx: usize, pick: &dyn Fn(&Channel) -> &[String]| {
        let parts: Vec<&str> = radix
            .decode(idx)
            .iter()
            .zip(channels)
            .map(|(&d, ch)| pick(ch)[d].as_str())
            .collect();
        product_label(&parts)
    };
    let in_alphabet = (0..in_radix.total())
        .map(|i| label(&in_radix, i, &|c| c.in_alphabet()))
        .collect();
    let out_alphabet = (0..n_out)
        .map(|o| label(&out_radix, o, &|c| c.out_alphabet()))
        .collect();
    let mut probs = Vec::with_capacity(in_radix.total() * n_out);
    for x in 0..in_radix.total() {
        let xs = in_radix.decode(x);
        for y in 0..n_out {
            let mut p = 1.0;
            for (k, ch) in channels.iter().enumerate() {
                p *= ch.get(xs[k], out_radix.digit(y, k));
                if p == 0.0 {
                    break;
                }
            }
            probs.push(p);
        }
    }
    Ok(Channel {
        in_alphabet,
        out_alphabet,
        probs,
    })
}

/// Tag prefixes of the two branches of a mixture.
pub const MIX_TAG_A: &str = "a:";
pub const MIX_TAG_B: &str = "b:";

/// Releases `a` with probability `p` and `b` otherwise, with the branch
/// observable in the output (tagged disjoint union of output alphabets).
/// At `p = 1` (resp. `p = 0`) only the live branch's outputs are kept.
pub fn mixture_channel(a: &Channel, b: &Channel, p: f64) -> Result<Channel> {
    if a.in_alphabet != b.in_alphabet {
        return Err(Error::AlphabetMismatch(
            "mixture branches have different inputs".into(),
        ));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::OutOfRange(format!("mixing probability {p}")));
    }
    let use_a = p > 0.0;
    let use_b = p < 1.0;
    let mut out_alphabet = Vec::new();
    if use_a {
        out_alphabet.extend(a.out_alphabet.iter().map(|l| format!("{MIX_TAG_A}{l}")));
    }
    if use_b {
        out_alphabet.extend(b.out_alphabet.iter().map(|l| format!("{MIX_TAG_B}{l}")));
    }
    let mut probs = Vec::with_capacity(a.n_in() * out_alphabet.len());
    for x in 0..a.n_in() {
        if use_a {
            probs.extend(a.row(x).iter().map(|q| p * q));
        }
        if use_b {
            probs.extend(b.row(x).iter().map(|q| (1.0 - p) * q));
        }
    }
    Ok(Channel {
        in_alphabet: a.in_alphabet.clone(),
        out_alphabet,
        probs,
    })
}

/// Leakage, utilities and rate of a mechanism, all in bits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MechanismMetrics {
    /// `I(S; Y)`
    pub leakage_bits: f64,
    /// `I(C_k; Y)` per task
    pub utility_bits: Vec<f64>,
    /// `I(X; Y)`
    pub rate_bits: f64,
    /// `I(X_i; Y)` per component
    pub per_component_bits: Vec<f64>,
}

impl MechanismMetrics {
    /// Per-task flags for `I(C_k; Y) >= gamma(C_k) - tol`.
    pub fn satisfied(&self, model: &DataModel, tol: f64) -> Vec<bool> {
        self.utility_bits
            .iter()
            .zip(model.tasks())
            .map(|(u, t)| *u >= t.gamma_bits() - tol)
            .collect()
    }
}

/// Evaluates a channel over the joint alphabet of `X`.
pub fn evaluate_mechanism(model: &DataModel, ch: &Channel) -> Result<MechanismMetrics> {
    let alphabet = model.joint_alphabet()?;
    if ch.in_alphabet() != alphabet.as_slice() {
        return Err(Error::AlphabetMismatch(format!(
            "channel input alphabet ({} symbols) does not match the model's joint alphabet ({} symbols)",
            ch.n_in(),
            alphabet.len()
        )));
    }
    let all: Vec<usize> = (0..model.num_components()).collect();
    let joint = push_joint(&joint_pmf(model, &all)?, ch)?;

    let s_map = model.joint_private_map()?;
    let leakage_bits = mutual_information(&relabel_through(
        &s_map,
        &model.private_joint_alphabet()?,
        &joint,
    )?);

    let project = |indices: &[usize]| -> Result<f64> {
        let (map, n) = model.projection_map(indices)?;
        Ok(mutual_information(&relabel_through(
            &map,
            &numeric_labels(n),
            &joint,
        )?))
    };
    let utility_bits = model
        .tasks()
        .iter()
        .map(|t| project(t.components()))
        .collect::<Result<Vec<_>>>()?;
    let per_component_bits = (0..model.num_components())
        .map(|i| project(&[i]))
        .collect::<Result<Vec<_>>>()?;

    Ok(MechanismMetrics {
        leakage_bits,
        utility_bits,
        rate_bits: mutual_information(&joint),
        per_component_bits,
    })
}

/// Per-component information of a parallel mechanism `Y = [Y_1..Y_N]`:
/// `(I(S_i; Y_i), I(X_i; Y_i))`.
pub fn component_information(model: &DataModel, i: usize, ch: &Channel) -> Result<(f64, f64)> {
    let comp = &model.components()[i];
    if ch.n_in() != comp.size_x() {
        return Err(Error::AlphabetMismatch(format!(
            "component {i} channel has {} inputs, component has {} symbols",
            ch.n_in(),
            comp.size_x()
        )));
    }
    let joint = push_joint(comp.pmf(), ch)?;
    let s_joint = relabel_through(comp.private_map(), comp.alphabet_s(), &joint)?;
    Ok((mutual_information(&s_joint), mutual_information(&joint)))
}

/// Metrics of the product mechanism built from per-component channels,
/// computed without materializing the product. Independence of the
/// components gives `I(S;Y) = sum_i I(S_i;Y_i)` and
/// `I(C_k;Y) = sum_{i in C_k} I(X_i;Y_i)`.
pub fn evaluate_parallel(model: &DataModel, channels: &[Channel]) -> Result<MechanismMetrics> {
    if channels.len() != model.num_components() {
        return Err(Error::AlphabetMismatch(format!(
            "{} channels for {} components",
            channels.len(),
            model.num_components()
        )));
    }
    let info = channels
        .iter()
        .enumerate()
        .map(|(i, ch)| component_information(model, i, ch))
        .collect::<Result<Vec<_>>>()?;
    let per_component_bits: Vec<f64> = info.iter().map(|(_, ix)| *ix).collect();
    Ok(MechanismMetrics {
        leakage_bits: info.iter().map(|(is, _)| is).sum(),
        utility_bits: model
            .tasks()
            .iter()
            .map(|t| t.components().iter().map(|&i| per_component_bits[i]).sum())
            .collect(),
        rate_bits: per_component_bits.iter().sum(),
        per_component_bits,
    })
}
