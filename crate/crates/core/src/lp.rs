//! Dense two-phase simplex for small linear programs.
//!
//! Solves `maximize c·z subject to A z ≤ b, z ≥ 0`. Pivoting follows Bland's
//! rule in both phases, so the method terminates on degenerate problems and the
//! pivot sequence is a deterministic function of the input.

use crate::error::{Error, Result};

const EPS: f64 = 1e-11;
const MAX_PIVOTS: usize = 50_000;

#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    objective: Vec<f64>,
    rows: Vec<Vec<f64>>,
    rhs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal { value: f64, point: Vec<f64> },
    Infeasible,
    Unbounded,
}

impl LinearProgram {
    /// An LP over `objective.len()` non-negative variables.
    pub fn maximize(objective: Vec<f64>) -> Self {
        LinearProgram {
            objective,
            rows: Vec::new(),
            rhs: Vec::new(),
        }
    }

    pub fn vars(&self) -> usize {
        self.objective.len()
    }

    /// Add the row `coeffs · z ≤ rhs`.
    pub fn less_equal(&mut self, coeffs: Vec<f64>, rhs: f64) -> &mut Self {
        assert_eq!(
            coeffs.len(),
            self.vars(),
            "row length must match variable count"
        );
        self.rows.push(coeffs);
        self.rhs.push(rhs);
        self
    }

    pub fn solve(&self) -> Result<LpOutcome> {
        Tableau::build(self).run(self)
    }
}

struct Tableau {
    /// `m` constraint rows, each `cols` coefficients followed by the right-hand side.
    cells: Vec<Vec<f64>>,
    basis: Vec<usize>,
    cols: usize,
    /// Columns `>= artificial_start` are phase-one artificials.
    artificial_start: usize,
    pivots: usize,
}

impl Tableau {
    fn build(lp: &LinearProgram) -> Self {
        let n = lp.vars();
        let m = lp.rows.len();
        let needs_artificial: Vec<bool> = lp.rhs.iter().map(|&b| b < 0.0).collect();
        let n_art = needs_artificial.iter().filter(|&&a| a).count();
        let artificial_start = n + m;
        let cols = n + m + n_art;
        let mut cells = Vec::with_capacity(m);
        let mut basis = Vec::with_capacity(m);
        let mut next_art = artificial_start;
        for (i, (row, &b)) in lp.rows.iter().zip(&lp.rhs).enumerate() {
            let mut r = vec![0.0; cols + 1];
            let sign = if needs_artificial[i] { -1.0 } else { 1.0 };
            for (j, &a) in row.iter().enumerate() {
                r[j] = sign * a;
            }
            // slack (or surplus after the sign flip)
            r[n + i] = sign;
            r[cols] = sign * b;
            if needs_artificial[i] {
                r[next_art] = 1.0;
                basis.push(next_art);
                next_art += 1;
            } else {
                basis.push(n + i);
            }
            cells.push(r);
        }
        Tableau {
            cells,
            basis,
            cols,
            artificial_start,
            pivots: 0,
        }
    }

    fn rhs(&self, i: usize) -> f64 {
        self.cells[i][self.cols]
    }

    fn pivot(&mut self, row: usize, col: usize) -> Result<()> {
        self.pivots += 1;
        if self.pivots > MAX_PIVOTS {
            return Err(Error::Lp(format!(
                "no convergence after {MAX_PIVOTS} pivots"
            )));
        }
        let p = self.cells[row][col];
        for v in self.cells[row].iter_mut() {
            *v /= p;
        }
        let pivot_row = self.cells[row].clone();
        for (i, r) in self.cells.iter_mut().enumerate() {
            if i == row {
                continue;
            }
            let f = r[col];
            if f != 0.0 {
                for (v, &pv) in r.iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                }
                r[col] = 0.0;
            }
        }
        self.basis[row] = col;
        Ok(())
    }

    /// Maximize `cost` over the current tableau with Bland's rule, considering
    /// only columns below `allowed`. Returns `false` if unbounded.
    fn optimize(&mut self, cost: &[f64], allowed: usize) -> Result<bool> {
        loop {
            let entering = (0..allowed).find(|&j| {
                if self.basis.contains(&j) {
                    return false;
                }
                let reduced = cost[j]
                    - self
                        .basis
                        .iter()
                        .enumerate()
                        .map(|(i, &b)| cost[b] * self.cells[i][j])
                        .sum::<f64>();
                reduced > EPS
            });
            let Some(col) = entering else {
                return Ok(true);
            };
            let mut leaving: Option<(usize, f64)> = None;
            for i in 0..self.cells.len() {
                let a = self.cells[i][col];
                if a > EPS {
                    let ratio = self.rhs(i) / a;
                    leaving = match leaving {
                        None => Some((i, ratio)),
                        Some((best, r)) => {
                            if ratio < r - EPS
                                || (ratio <= r + EPS && self.basis[i] < self.basis[best])
                            {
                                Some((i, ratio))
                            } else {
                                Some((best, r))
                            }
                        }
                    };
                }
            }
            let Some((row, _)) = leaving else {
                return Ok(false);
            };
            self.pivot(row, col)?;
        }
    }

    fn objective_value(&self, cost: &[f64]) -> f64 {
        self.basis
            .iter()
            .enumerate()
            .map(|(i, &b)| cost[b] * self.rhs(i))
            .sum()
    }

    fn run(mut self, lp: &LinearProgram) -> Result<LpOutcome> {
        let n = lp.vars();
        if self.artificial_start < self.cols {
            let mut phase_one = vec![0.0; self.cols];
            phase_one[self.artificial_start..].fill(-1.0);
            self.optimize(&phase_one, self.cols)?;
            let scale = 1.0 + lp.rhs.iter().fold(0.0f64, |m, b| m.max(b.abs()));
            if self.objective_value(&phase_one) < -1e-9 * scale {
                return Ok(LpOutcome::Infeasible);
            }
            // drive remaining artificials out of the basis
            for i in 0..self.cells.len() {
                if self.basis[i] >= self.artificial_start {
                    if let Some(j) =
                        (0..self.artificial_start).find(|&j| self.cells[i][j].abs() > EPS)
                    {
                        self.pivot(i, j)?;
                    }
                }
            }
        }
        let mut cost = vec![0.0; self.cols];
        cost[..n].copy_from_slice(&lp.objective);
        if !self.optimize(&cost, self.artificial_start)? {
            return Ok(LpOutcome::Unbounded);
        }
        let mut point = vec![0.0; n];
        for (i, &b) in self.basis.iter().enumerate() {
            if b < n {
                point[b] = self.rhs(i).max(0.0);
            }
        }
        let value = lp.objective.iter().zip(&point).map(|(c, z)| c * z).sum();
        Ok(LpOutcome::Optimal { value, point })
    }
}
