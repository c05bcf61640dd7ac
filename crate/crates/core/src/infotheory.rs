//! Information measures in bits over finite alphabets.
//!
//! Conventions: `0 log 0 = 0` and `0 log(0/q) = 0` are applied explicitly by
//! skipping zero-mass terms. `p log(p/0)` with `p > 0` yields `f64::INFINITY`,
//! which is a value, not an error.

use crate::error::{Error, Result};
use crate::model::{check_pmf, PMF_TOLERANCE};

/// Shannon entropy in bits without validating the input.
pub fn entropy_bits(pmf: &[f64]) -> f64 {
    let h: f64 = pmf
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| -p * p.log2())
        .sum();
    h.max(0.0)
}

/// Shannon entropy `H(p)` in bits.
pub fn entropy(pmf: &[f64]) -> Result<f64> {
    check_pmf(pmf, "")?;
    Ok(entropy_bits(pmf))
}

/// `D(p || q)` in bits. Infinite when `q` misses mass that `p` has.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::AlphabetMismatch(format!(
            "kl_divergence over alphabets of size {} and {}",
            p.len(),
            q.len()
        )));
    }
    check_pmf(p, " (p)")?;
    check_pmf(q, " (q)")?;
    Ok(kl_bits(p, q))
}

pub(crate) fn kl_bits(p: &[f64], q: &[f64]) -> f64 {
    let mut d = 0.0;
    for (&pi, &qi) in p.iter().zip(q) {
        if pi > 0.0 {
            if qi <= 0.0 {
                return f64::INFINITY;
            }
            d += pi * (pi / qi).log2();
        }
    }
    d.max(0.0)
}

/// Joint law of a (row, column) pair of discrete variables.
#[derive(Debug, Clone, PartialEq)]
pub struct JointTable {
    row_alphabet: Vec<String>,
    col_alphabet: Vec<String>,
    probs: Vec<f64>,
}

impl JointTable {
    /// `probs` is row-major with `row_alphabet.len() * col_alphabet.len()` entries.
    pub fn new(
        row_alphabet: Vec<String>,
        col_alphabet: Vec<String>,
        probs: Vec<f64>,
    ) -> Result<Self> {
        if row_alphabet.is_empty() || col_alphabet.is_empty() {
            return Err(Error::InvalidJoint("empty alphabet".into()));
        }
        if probs.len() != row_alphabet.len() * col_alphabet.len() {
            return Err(Error::InvalidJoint(format!(
                "{} entries for a {}x{} table",
                probs.len(),
                row_alphabet.len(),
                col_alphabet.len()
            )));
        }
        if let Some(p) = probs.iter().find(|p| !p.is_finite() || **p < 0.0) {
            return Err(Error::InvalidJoint(format!(
                "entry {p} is negative or not finite"
            )));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > PMF_TOLERANCE {
            return Err(Error::InvalidJoint(format!("entries sum to {total}")));
        }
        Ok(Self {
            row_alphabet,
            col_alphabet,
            probs,
        })
    }

    /// Table with numeric labels `"0".."n-1"` on both axes.
    pub fn from_probs(rows: usize, cols: usize, probs: Vec<f64>) -> Result<Self> {
        Self::new(
            (0..rows).map(|i| i.to_string()).collect(),
            (0..cols).map(|i| i.to_string()).collect(),
            probs,
        )
    }

    /// Independent coupling `p_row x p_col`.
    pub fn product(row_pmf: &[f64], col_pmf: &[f64]) -> Result<Self> {
        let probs = row_pmf
            .iter()
            .flat_map(|&a| col_pmf.iter().map(move |&b| a * b))
            .collect();
        Self::from_probs(row_pmf.len(), col_pmf.len(), probs)
    }

    pub fn row_alphabet(&self) -> &[String] {
        &self.row_alphabet
    }

    pub fn col_alphabet(&self) -> &[String] {
        &self.col_alphabet
    }

    pub fn rows(&self) -> usize {
        self.row_alphabet.len()
    }

    pub fn cols(&self) -> usize {
        self.col_alphabet.len()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.probs[row * self.cols() + col]
    }

    pub fn row_marginal(&self) -> Vec<f64> {
        self.probs
            .chunks(self.cols())
            .map(|r| r.iter().sum())
            .collect()
    }

    pub fn col_marginal(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.cols()];
        for row in self.probs.chunks(self.cols()) {
            for (acc, p) in m.iter_mut().zip(row) {
                *acc += p;
            }
        }
        m
    }

    pub fn transpose(&self) -> Self {
        let (r, c) = (self.rows(), self.cols());
        let mut probs = vec![0.0; r * c];
        for i in 0..r {
            for j in 0..c {
                probs[j * r + i] = self.probs[i * c + j];
            }
        }
        Self {
            row_alphabet: self.col_alphabet.clone(),
            col_alphabet: self.row_alphabet.clone(),
            probs,
        }
    }

    /// `p_{row | col = j}`; `None` when the column has zero mass.
    pub fn row_conditional(&self, col: usize) -> Option<Vec<f64>> {
        let column: Vec<f64> = (0..self.rows()).map(|i| self.get(i, col)).collect();
        let mass: f64 = column.iter().sum();
        (mass > 0.0).then(|| column.iter().map(|p| p / mass).collect())
    }

    pub fn joint_entropy(&self) -> f64 {
        entropy_bits(&self.probs)
    }
}

/// `I(row; col) = H(row) + H(col) - H(row, col)`, clamped at zero.
pub fn mutual_information(joint: &JointTable) -> f64 {
    let i = entropy_bits(&joint.row_marginal()) + entropy_bits(&joint.col_marginal())
        - joint.joint_entropy();
    debug_assert!(i > -1e-9, "mutual information {i} is negative");
    i.max(0.0)
}

/// `H(row | col) = H(row, col) - H(col)`, clamped at zero.
pub fn conditional_entropy(joint: &JointTable) -> f64 {
    (joint.joint_entropy() - entropy_bits(&joint.col_marginal())).max(0.0)
}

/// A soft estimate of the row variable: one pmf per column symbol.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftDecoder {
    table: Vec<Vec<f64>>,
}

impl SoftDecoder {
    pub fn new(table: Vec<Vec<f64>>) -> Result<Self> {
        if table.is_empty() {
            return Err(Error::InvalidJoint("decoder has no rows".into()));
        }
        let width = table[0].len();
        for (y, row) in table.iter().enumerate() {
            if row.len() != width {
                return Err(Error::AlphabetMismatch(format!(
                    "decoder row {y} has {} entries, expected {width}",
                    row.len()
                )));
            }
            check_pmf(row, &format!(" (decoder row {y})"))?;
        }
        Ok(Self { table })
    }

    /// Same pmf for every output symbol.
    pub fn constant(pmf: &[f64], outputs: usize) -> Result<Self> {
        Self::new(vec![pmf.to_vec(); outputs])
    }

    pub fn row(&self, y: usize) -> &[f64] {
        &self.table[y]
    }

    pub fn outputs(&self) -> usize {
        self.table.len()
    }

    pub fn task_size(&self) -> usize {
        self.table[0].len()
    }
}

fn check_decoder_shape(joint: &JointTable, decoder: &SoftDecoder) -> Result<()> {
    if decoder.outputs() != joint.cols() || decoder.task_size() != joint.rows() {
        return Err(Error::AlphabetMismatch(format!(
            "decoder is {}x{} but the joint over (C, Y) is {}x{}",
            decoder.outputs(),
            decoder.task_size(),
            joint.rows(),
            joint.cols()
        )));
    }
    Ok(())
}

/// Expected log loss `E[log2 1 / c_hat_Y(C)]` for a joint over `(C, Y)`.
pub fn expected_log_loss(joint: &JointTable, decoder: &SoftDecoder) -> Result<f64> {
    check_decoder_shape(joint, decoder)?;
    let mut loss = 0.0;
    for c in 0..joint.rows() {
        for y in 0..joint.cols() {
            let p = joint.get(c, y);
            if p > 0.0 {
                let q = decoder.row(y)[c];
                if q <= 0.0 {
                    return Ok(f64::INFINITY);
                }
                loss -= p * q.log2();
            }
        }
    }
    Ok(loss)
}

/// Splits the expected log loss into `E_Y[D(p_{C|Y} || c_hat_Y)]` and `H(C|Y)`.
pub fn log_loss_decomposition(joint: &JointTable, decoder: &SoftDecoder) -> Result<(f64, f64)> {
    check_decoder_shape(joint, decoder)?;
    let py = joint.col_marginal();
    let mut kl = 0.0;
    for (y, &mass) in py.iter().enumerate() {
        if let Some(post) = joint.row_conditional(y) {
            kl += mass * kl_bits(&post, decoder.row(y));
        }
    }
    Ok((kl, conditional_entropy(joint)))
}

/// The posterior decoder `c_hat_y = p_{C|Y=y}`; zero-mass outputs get the prior `p_C`.
pub fn optimal_soft_decoder(joint: &JointTable) -> SoftDecoder {
    let prior = joint.row_marginal();
    let table = (0..joint.cols())
        .map(|y| joint.row_conditional(y).unwrap_or_else(|| prior.clone()))
        .collect();
    SoftDecoder { table }
}
