//! Dense two-phase primal simplex with Bland's anti-cycling rule.
//!
//! Sized for the allocation problems in this crate (tens of variables), so
//! the full tableau is kept in memory.

use crate::error::{Error, Result};

/// Feasibility and optimality tolerance.
pub const LP_TOLERANCE: f64 = 1e-9;

const PIVOT_TOLERANCE: f64 = 1e-12;
const MAX_PIVOTS: usize = 50_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

/// `minimize c.x  subject to  a_i.x (<=|>=|=) b_i,  x >= 0`.
#[derive(Debug, Clone)]
pub struct LinearProgram {
    num_vars: usize,
    objective: Vec<f64>,
    constraints: Vec<(Vec<f64>, Relation, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal { x: Vec<f64>, objective: f64 },
    Infeasible,
    Unbounded,
}

impl LinearProgram {
    pub fn new(num_vars: usize) -> Self {
        Self {
            num_vars,
            objective: vec![0.0; num_vars],
            constraints: Vec::new(),
        }
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn set_objective(&mut self, coeffs: Vec<f64>) -> &mut Self {
        assert_eq!(coeffs.len(), self.num_vars, "objective length");
        self.objective = coeffs;
        self
    }

    pub fn add_constraint(&mut self, coeffs: Vec<f64>, relation: Relation, rhs: f64) -> &mut Self {
        assert_eq!(coeffs.len(), self.num_vars, "constraint length");
        self.constraints.push((coeffs, relation, rhs));
        self
    }

    pub fn solve(&self) -> Result<LpOutcome> {
        Tableau::build(self).solve(&self.objective)
    }
}

struct Tableau {
    /// constraint rows, last entry is the right-hand side
    rows: Vec<Vec<f64>>,
    basis: Vec<usize>,
    num_vars: usize,
    num_cols: usize,
    artificial: Vec<bool>,
}

impl Tableau {
    fn build(lp: &LinearProgram) -> Self {
        let m = lp.constraints.len();
        let normalized: Vec<(Vec<f64>, Relation, f64)> = lp
            .constraints
            .iter()
            .map(|(a, rel, b)| {
                if *b < 0.0 {
                    let flipped = match rel {
                        Relation::Le => Relation::Ge,
                        Relation::Ge => Relation::Le,
                        Relation::Eq => Relation::Eq,
                    };
                    (a.iter().map(|v| -v).collect(), flipped, -b)
                } else {
                    (a.clone(), *rel, *b)
                }
            })
            .collect();
        let n_slack = normalized
            .iter()
            .filter(|(_, r, _)| *r != Relation::Eq)
            .count();
        let n_art = normalized
            .iter()
            .filter(|(_, r, _)| *r != Relation::Le)
            .count();
        let num_cols = lp.num_vars + n_slack + n_art;
        let mut artificial = vec![false; num_cols];
        let mut rows = Vec::with_capacity(m);
        let mut basis = Vec::with_capacity(m);
        let (mut next_slack, mut next_art) = (lp.num_vars, lp.num_vars + n_slack);
        for (a, rel, b) in normalized {
            let mut row = vec![0.0; num_cols + 1];
            row[..lp.num_vars].copy_from_slice(&a);
            row[num_cols] = b;
            match rel {
                Relation::Le => {
                    row[next_slack] = 1.0;
                    basis.push(next_slack);
                    next_slack += 1;
                }
                Relation::Ge => {
                    row[next_slack] = -1.0;
                    next_slack += 1;
                    row[next_art] = 1.0;
                    artificial[next_art] = true;
                    basis.push(next_art);
                    next_art += 1;
                }
                Relation::Eq => {
                    row[next_art] = 1.0;
                    artificial[next_art] = true;
                    basis.push(next_art);
                    next_art += 1;
                }
            }
            rows.push(row);
        }
        Self {
            rows,
            basis,
            num_vars: lp.num_vars,
            num_cols,
            artificial,
        }
    }

    /// Reduced-cost row for cost vector `c`; the last entry is minus the objective.
    fn reduced_costs(&self, c: &[f64]) -> Vec<f64> {
        let mut obj = vec![0.0; self.num_cols + 1];
        obj[..c.len()].copy_from_slice(c);
        for (row, &b) in self.rows.iter().zip(&self.basis) {
            let cb = c.get(b).copied().unwrap_or(0.0);
            if cb != 0.0 {
                for (o, v) in obj.iter_mut().zip(row) {
                    *o -= cb * v;
                }
            }
        }
        obj
    }

    fn pivot(&mut self, obj: &mut [f64], r: usize, c: usize) {
        let p = self.rows[r][c];
        self.rows[r].iter_mut().for_each(|v| *v /= p);
        let pivot_row = self.rows[r].clone();
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i != r {
                let f = row[c];
                if f != 0.0 {
                    for (v, pv) in row.iter_mut().zip(&pivot_row) {
                        *v -= f * pv;
                    }
                    row[c] = 0.0;
                }
            }
        }
        let f = obj[c];
        if f != 0.0 {
            for (v, pv) in obj.iter_mut().zip(&pivot_row) {
                *v -= f * pv;
            }
            obj[c] = 0.0;
        }
        self.basis[r] = c;
    }

    /// Runs Bland's rule to optimality. Returns `false` when unbounded.
    fn optimize(&mut self, obj: &mut [f64], allowed: &[bool]) -> Result<bool> {
        let rhs = self.num_cols;
        for _ in 0..MAX_PIVOTS {
            let Some(enter) = (0..self.num_cols).find(|&j| allowed[j] && obj[j] < -LP_TOLERANCE)
            else {
                return Ok(true);
            };
            let mut leave: Option<(usize, f64)> = None;
            for (i, row) in self.rows.iter().enumerate() {
                let a = row[enter];
                if a > PIVOT_TOLERANCE {
                    let ratio = row[rhs].max(0.0) / a;
                    leave = match leave {
                        None => Some((i, ratio)),
                        Some((best, best_ratio)) => {
                            if ratio < best_ratio - PIVOT_TOLERANCE
                                || (ratio <= best_ratio + PIVOT_TOLERANCE
                                    && self.basis[i] < self.basis[best])
                            {
                                Some((i, ratio.min(best_ratio)))
                            } else {
                                Some((best, best_ratio))
                            }
                        }
                    };
                }
            }
            match leave {
                None => return Ok(false),
                Some((r, _)) => self.pivot(obj, r, enter),
            }
        }
        Err(Error::Solver(format!(
            "no convergence after {MAX_PIVOTS} pivots"
        )))
    }

    fn solve(mut self, cost: &[f64]) -> Result<LpOutcome> {
        let rhs = self.num_cols;
        if self.artificial.iter().any(|&a| a) {
            let phase1: Vec<f64> = self
                .artificial
                .iter()
                .map(|&a| if a { 1.0 } else { 0.0 })
                .collect();
            let mut obj = self.reduced_costs(&phase1);
            let allowed = vec![true; self.num_cols];
            self.optimize(&mut obj, &allowed)?;
            if -obj[rhs] > LP_TOLERANCE {
                return Ok(LpOutcome::Infeasible);
            }
            // drive remaining (zero-valued) artificials out of the basis
            let mut r = 0;
            while r < self.rows.len() {
                if self.artificial[self.basis[r]] {
                    let replacement = (0..self.num_cols)
                        .find(|&j| !self.artificial[j] && self.rows[r][j].abs() > PIVOT_TOLERANCE);
                    match replacement {
                        Some(j) => {
                            let mut scratch = vec![0.0; self.num_cols + 1];
                            self.pivot(&mut scratch, r, j);
                        }
                        None => {
                            // redundant constraint
                            self.rows.remove(r);
                            self.basis.remove(r);
                            continue;
                        }
                    }
                }
                r += 1;
            }
        }
        let allowed: Vec<bool> = self.artificial.iter().map(|&a| !a).collect();
        let mut obj = self.reduced_costs(cost);
        if !self.optimize(&mut obj, &allowed)? {
            return Ok(LpOutcome::Unbounded);
        }
        let mut x = vec![0.0; self.num_vars];
        for (row, &b) in self.rows.iter().zip(&self.basis) {
            if b < self.num_vars {
                x[b] = row[rhs].max(0.0);
            }
        }
        let objective = cost.iter().zip(&x).map(|(c, v)| c * v).sum();
        Ok(LpOutcome::Optimal { x, objective })
    }
}
