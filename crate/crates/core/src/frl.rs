//! Constructive functional representation: for a joint law of `(X, W)` build
//! `Z` independent of `W` such that `X = g(W, Z)`.
//!
//! The construction is the quantile one. For every `w` with positive mass the
//! conditional `p_{X|W=w}` is stacked over `[0, 1)` in alphabet order. The
//! union of all cumulative breakpoints cuts `[0, 1)` into intervals; `Z` is
//! the interval index with probability equal to its length, and `g(w, z)` is
//! the symbol whose band under `W = w` covers interval `z`. Interval lengths
//! do not depend on `w`, so `Z` is independent of `W` exactly.

use crate::channel::Channel;
use crate::error::Result;
use crate::infotheory::{entropy_bits, JointTable};
use crate::model::ComponentModel;

/// Two cumulative sums closer than this are the same breakpoint.
pub const BREAKPOINT_MERGE_TOLERANCE: f64 = 1e-12;

/// Witness `(Z, g)` for a joint `(X, W)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FrlRepresentation {
    z_alphabet: Vec<String>,
    z_pmf: Vec<f64>,
    intervals: Vec<(f64, f64)>,
    assign: Vec<usize>,
    n_x: usize,
    n_w: usize,
}

impl FrlRepresentation {
    pub fn z_alphabet(&self) -> &[String] {
        &self.z_alphabet
    }

    pub fn z_pmf(&self) -> &[f64] {
        &self.z_pmf
    }

    /// `[lo, hi)` breakpoints of each `z`.
    pub fn intervals(&self) -> &[(f64, f64)] {
        &self.intervals
    }

    pub fn n_z(&self) -> usize {
        self.z_pmf.len()
    }

    /// `g(w, z)`.
    pub fn assign(&self, w: usize, z: usize) -> usize {
        self.assign[w * self.n_z() + z]
    }

    /// `P(Z = z | X = x, W = w)` for the coupling realised by the witness.
    /// Falls back to `p_Z` when `x` receives no interval under `w`.
    pub fn z_given_xw(&self, x: usize, w: usize) -> Vec<f64> {
        let mass: f64 = (0..self.n_z())
            .filter(|&z| self.assign(w, z) == x)
            .map(|z| self.z_pmf[z])
            .sum();
        if mass <= 0.0 {
            return self.z_pmf.clone();
        }
        (0..self.n_z())
            .map(|z| {
                if self.assign(w, z) == x {
                    self.z_pmf[z] / mass
                } else {
                    0.0
                }
            })
            .collect()
    }

    /// Numerically checks the witness against the joint it was built from.
    pub fn verify(&self, joint: &JointTable) -> FrlCheck {
        let (n_x, n_w, n_z) = (self.n_x, self.n_w, self.n_z());
        let pw = joint.col_marginal();

        // joint of (X, W, Z) obtained by drawing Z from P(Z | X, W)
        let mut xwz = vec![0.0; n_x * n_w * n_z];
        for x in 0..n_x {
            for w in 0..n_w {
                let p = joint.get(x, w);
                if p > 0.0 {
                    for (z, q) in self.z_given_xw(x, w).into_iter().enumerate() {
                        xwz[(x * n_w + w) * n_z + z] = p * q;
                    }
                }
            }
        }
        let mut wz = vec![0.0; n_w * n_z];
        for x in 0..n_x {
            for (acc, p) in wz.iter_mut().zip(&xwz[x * n_w * n_z..(x + 1) * n_w * n_z]) {
                *acc += p;
            }
        }
        let residual_entropy_bits = (entropy_bits(&xwz) - entropy_bits(&wz)).max(0.0);

        let mut pz = vec![0.0; n_z];
        for w in 0..n_w {
            for z in 0..n_z {
                pz[z] += wz[w * n_z + z];
            }
        }
        let independence_tv = (0..n_w)
            .filter(|&w| pw[w] > 0.0)
            .map(|w| {
                0.5 * (0..n_z)
                    .map(|z| (wz[w * n_z + z] / pw[w] - pz[z]).abs())
                    .sum::<f64>()
            })
            .fold(0.0, f64::max);

        let mut reconstruction_error: f64 = 0.0;
        for (w, &p_w) in pw.iter().enumerate().take(n_w) {
            for x in 0..n_x {
                let via_g: f64 = (0..n_z)
                    .filter(|&z| self.assign(w, z) == x)
                    .map(|z| self.z_pmf[z])
                    .sum::<f64>()
                    * p_w;
                reconstruction_error = reconstruction_error.max((via_g - joint.get(x, w)).abs());
            }
        }

        FrlCheck {
            independence_tv,
            residual_entropy_bits,
            reconstruction_error,
        }
    }
}

/// Numeric gaps of a representation against its defining properties.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrlCheck {
    /// Largest total-variation distance between `p_{Z|W=w}` and `p_Z`.
    pub independence_tv: f64,
    /// `H(X | W, Z)` in bits.
    pub residual_entropy_bits: f64,
    /// Largest per-entry error of `p_W(w) * P(g(w, Z) = x)` against `p_{X,W}`.
    pub reconstruction_error: f64,
}

fn cumulative(pmf: &[f64]) -> Vec<f64> {
    let mut c = Vec::with_capacity(pmf.len() + 1);
    let mut acc = 0.0;
    c.push(0.0);
    for p in pmf {
        acc += p;
        c.push(acc);
    }
    c
}

/// Builds the quantile witness for a joint with `X` on rows and `W` on columns.
pub fn functional_representation(joint: &JointTable) -> FrlRepresentation {
    let (n_x, n_w) = (joint.rows(), joint.cols());
    let conditionals: Vec<Option<Vec<f64>>> = (0..n_w).map(|w| joint.row_conditional(w)).collect();
    let cumulatives: Vec<Option<Vec<f64>>> = conditionals
        .iter()
        .map(|c| c.as_deref().map(cumulative))
        .collect();

    let mut points: Vec<f64> = vec![0.0, 1.0];
    for c in cumulatives.iter().flatten() {
        points.extend(c.iter().map(|v| v.clamp(0.0, 1.0)));
    }
    points.sort_by(f64::total_cmp);

    // cluster heads (lowest member) and the boundary each cluster stands for
    let mut heads: Vec<f64> = vec![points[0]];
    for &v in &points[1..] {
        if v - heads[heads.len() - 1] >= BREAKPOINT_MERGE_TOLERANCE {
            heads.push(v);
        }
    }
    let mut bounds = heads.clone();
    bounds[0] = 0.0;
    *bounds.last_mut().unwrap() = 1.0;
    let cluster_of = |v: f64| heads.partition_point(|&h| h <= v.clamp(0.0, 1.0)) - 1;

    let n_z = bounds.len() - 1;
    let intervals: Vec<(f64, f64)> = bounds.windows(2).map(|b| (b[0], b[1])).collect();
    let z_pmf: Vec<f64> = intervals.iter().map(|(lo, hi)| hi - lo).collect();

    let marginal_cdf = cumulative(&joint.row_marginal());
    let mut assign = vec![0usize; n_w * n_z];
    for w in 0..n_w {
        match &cumulatives[w] {
            Some(c) => {
                for x in 0..n_x {
                    let (lo, hi) = (cluster_of(c[x]), cluster_of(c[x + 1]));
                    for z in lo..hi {
                        assign[w * n_z + z] = x;
                    }
                }
            }
            None => {
                for (z, (lo, hi)) in intervals.iter().enumerate() {
                    let mid = 0.5 * (lo + hi);
                    assign[w * n_z + z] = (0..n_x)
                        .find(|&x| marginal_cdf[x + 1] > mid)
                        .unwrap_or(n_x - 1);
                }
            }
        }
    }

    FrlRepresentation {
        z_alphabet: (0..n_z).map(|z| format!("z{z}")).collect(),
        z_pmf,
        intervals,
        assign,
        n_x,
        n_w,
    }
}

/// Joint law of `(X_i, S_i)` for a component, `X` on rows.
pub fn component_private_joint(comp: &ComponentModel) -> JointTable {
    let n_s = comp.size_s();
    let mut probs = vec![0.0; comp.size_x() * n_s];
    for (x, (&p, &s)) in comp.pmf().iter().zip(comp.private_map()).enumerate() {
        probs[x * n_s + s] = p;
    }
    JointTable::new(
        comp.alphabet_x().to_vec(),
        comp.alphabet_s().to_vec(),
        probs,
    )
    .expect("component joint is a valid pmf")
}

/// The leakage-free privatizer `Y^f = Z` obtained with `W = S_i`:
/// `P(Y^f = z | X = x) = |z| / p(x | f(x))` on the intervals assigned to `x`.
/// Zero-probability symbols emit `Z` with its own law.
pub fn leakage_free_privatizer(comp: &ComponentModel) -> Result<Channel> {
    let joint = component_private_joint(comp);
    let rep = functional_representation(&joint);
    let rows = (0..comp.size_x())
        .map(|x| rep.z_given_xw(x, comp.private_map()[x]))
        .collect();
    Channel::new(comp.alphabet_x().to_vec(), rep.z_alphabet().to_vec(), rows)
}
