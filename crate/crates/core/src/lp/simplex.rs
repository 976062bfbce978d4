//! Dense two-phase bounded-variable primal simplex with Bland's rule.
//!
//! Variables are shifted to `0 <= x' <= u - l`; every row gets an
//! artificial column and inequality rows a (possibly bounded) slack, so the
//! artificial basis is always a valid start. Nonbasic variables sit at one of
//! their two bounds and may flip between them without a basis change.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use super::{Bound, LinearProgram, LpSolution, LpStatus};
use crate::{LpError, Result, Tolerances};

const PIVOT_EPS: f64 = 1e-11;
const COST_EPS: f64 = 1e-11;
const TIE_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
enum Column {
    Structural(usize),
    Slack(usize),
    Artificial(usize),
}

struct Tableau {
    rows: usize,
    cols: usize,
    /// Row-major `rows x cols` matrix `B^-1 A`.
    t: Vec<f64>,
    upper: Vec<f64>,
    x: Vec<f64>,
    basis: Vec<usize>,
    is_basic: Vec<bool>,
    at_upper: Vec<bool>,
    kinds: Vec<Column>,
    iterations: usize,
    limit: usize,
}

enum Phase {
    Optimal,
    Unbounded,
}

impl Tableau {
    #[inline]
    fn at(&self, i: usize, j: usize) -> f64 {
        self.t[i * self.cols + j]
    }

    fn reduced_cost(&self, cost: &[f64], j: usize) -> f64 {
        let mut d = cost[j];
        for i in 0..self.rows {
            let a = self.at(i, j);
            if a != 0.0 {
                d -= cost[self.basis[i]] * a;
            }
        }
        d
    }

    fn pivot(&mut self, r: usize, j: usize) {
        let cols = self.cols;
        let p = self.at(r, j);
        for v in &mut self.t[r * cols..(r + 1) * cols] {
            *v /= p;
        }
        for i in 0..self.rows {
            if i == r {
                continue;
            }
            let f = self.at(i, j);
            if f == 0.0 {
                continue;
            }
            for c in 0..cols {
                let pr = self.t[r * cols + c];
                if pr != 0.0 {
                    self.t[i * cols + c] -= f * pr;
                }
            }
            self.t[i * cols + j] = 0.0;
        }
        let leaving = self.basis[r];
        self.is_basic[leaving] = false;
        self.is_basic[j] = true;
        self.basis[r] = j;
    }

    /// Primal simplex on `cost`; only columns `< enter_limit` may enter.
    fn run(&mut self, cost: &[f64], enter_limit: usize) -> Result<Phase> {
        loop {
            let entering = (0..enter_limit).find_map(|j| {
                if self.is_basic[j] || self.upper[j] <= PIVOT_EPS {
                    return None;
                }
                let d = self.reduced_cost(cost, j);
                if !self.at_upper[j] && d < -COST_EPS {
                    Some((j, 1.0))
                } else if self.at_upper[j] && d > COST_EPS {
                    Some((j, -1.0))
                } else {
                    None
                }
            });
            let Some((j, dir)) = entering else {
                return Ok(Phase::Optimal);
            };
            self.iterations += 1;
            if self.iterations > self.limit {
                return Err(LpError::IterationLimit { limit: self.limit }.into());
            }

            // Ratio test; ties go to the smallest basic variable index.
            let mut best: Option<(usize, f64, bool)> = None;
            for i in 0..self.rows {
                let alpha = dir * self.at(i, j);
                let b = self.basis[i];
                let (ratio, to_upper) = if alpha > PIVOT_EPS {
                    (self.x[b] / alpha, false)
                } else if alpha < -PIVOT_EPS && self.upper[b].is_finite() {
                    ((self.upper[b] - self.x[b]) / -alpha, true)
                } else {
                    continue;
                };
                let ratio = ratio.max(0.0);
                let better = match best {
                    None => true,
                    Some((r, br, _)) => {
                        ratio < br - TIE_EPS || (ratio <= br + TIE_EPS && b < self.basis[r])
                    }
                };
                if better {
                    best = Some((i, ratio, to_upper));
                }
            }

            let flip = self.upper[j];
            let step = match best {
                Some((_, ratio, _)) if ratio < flip => ratio,
                _ if flip.is_finite() => flip,
                _ => return Ok(Phase::Unbounded),
            };
            for i in 0..self.rows {
                let a = self.at(i, j);
                if a != 0.0 {
                    let b = self.basis[i];
                    self.x[b] -= dir * step * a;
                }
            }
            match best {
                Some((r, ratio, to_upper)) if ratio < flip => {
                    let leaving = self.basis[r];
                    self.x[j] += dir * step;
                    self.x[leaving] = if to_upper { self.upper[leaving] } else { 0.0 };
                    self.at_upper[leaving] = to_upper;
                    self.pivot(r, j);
                    self.at_upper[j] = false;
                }
                _ => {
                    self.at_upper[j] = !self.at_upper[j];
                    self.x[j] = if self.at_upper[j] { self.upper[j] } else { 0.0 };
                }
            }
        }
    }
}

/// Solves `lp` to optimality, or reports it infeasible or unbounded.
///
/// Phase one minimizes the sum of artificial variables; the program is
/// declared infeasible when that minimum exceeds `tol.optimization`.
/// Pivoting is deterministic, so identical inputs give bit-identical
/// outputs.
pub fn solve_lp(lp: &LinearProgram, tol: &Tolerances) -> Result<LpSolution> {
    let n = lp.variables().len();
    let lower: Vec<f64> = lp.variables().iter().map(|v| v.lower).collect();
    for v in lp.variables() {
        if v.lower.is_nan() || v.upper.is_nan() {
            return Err(LpError::NotANumber {
                what: v.name.clone(),
            }
            .into());
        }
        if !v.lower.is_finite() {
            return Err(LpError::UnboundedBelow {
                name: v.name.clone(),
            }
            .into());
        }
    }
    for row in lp.constraints() {
        let bad_bound = match row.bound {
            Bound::Eq(b) | Bound::Le(b) | Bound::Ge(b) => b.is_nan(),
            Bound::Range(lo, hi) => lo.is_nan() || hi.is_nan(),
        };
        if bad_bound || row.terms.iter().any(|(_, a)| !a.is_finite()) {
            return Err(LpError::NotANumber {
                what: row.name.clone(),
            }
            .into());
        }
    }

    let infeasible = |iterations| LpSolution {
        status: LpStatus::Infeasible,
        objective_value: f64::NAN,
        values: lower.clone(),
        basis: Vec::new(),
        at_upper: Vec::new(),
        iterations,
    };
    if lp
        .variables()
        .iter()
        .any(|v| v.upper < v.lower - tol.optimization)
    {
        return Ok(infeasible(0));
    }
    if lp
        .constraints()
        .iter()
        .any(|r| matches!(r.bound, Bound::Range(lo, hi) if hi < lo - tol.optimization))
    {
        return Ok(infeasible(0));
    }

    let rows = lp.constraints().len();
    let slacks = lp
        .constraints()
        .iter()
        .filter(|r| !matches!(r.bound, Bound::Eq(_)))
        .count();
    let cols = n + slacks + rows;

    let mut kinds = Vec::with_capacity(cols);
    let mut upper = Vec::with_capacity(cols);
    for (j, v) in lp.variables().iter().enumerate() {
        kinds.push(Column::Structural(j));
        upper.push((v.upper - v.lower).max(0.0));
    }
    let mut t = vec![0.0; rows * cols];
    let mut x = vec![0.0; cols];
    let mut basis = Vec::with_capacity(rows);
    let mut slack_col = n;
    let mut slack_cols = Vec::new();
    for (i, row) in lp.constraints().iter().enumerate() {
        let shift: f64 = row.terms.iter().map(|(v, a)| a * lower[v.0]).sum();
        for (v, a) in &row.terms {
            t[i * cols + v.0] += a;
        }
        let (rhs, slack) = match row.bound {
            Bound::Eq(b) => (b - shift, None),
            Bound::Le(b) => (b - shift, Some((1.0, f64::INFINITY))),
            Bound::Ge(b) => (b - shift, Some((-1.0, f64::INFINITY))),
            Bound::Range(lo, hi) => (hi - shift, Some((1.0, (hi - lo).max(0.0)))),
        };
        if let Some((coef, cap)) = slack {
            t[i * cols + slack_col] = coef;
            slack_cols.push((slack_col, cap, i));
            slack_col += 1;
        }
        if rhs < 0.0 {
            for v in &mut t[i * cols..(i + 1) * cols] {
                *v = -*v;
            }
        }
        t[i * cols + n + slacks + i] = 1.0;
        basis.push(n + slacks + i);
        x[n + slacks + i] = rhs.abs();
    }
    for (_, cap, i) in &slack_cols {
        kinds.push(Column::Slack(*i));
        upper.push(*cap);
    }
    for i in 0..rows {
        kinds.push(Column::Artificial(i));
        upper.push(f64::INFINITY);
    }
    let mut is_basic = vec![false; cols];
    for &b in &basis {
        is_basic[b] = true;
    }

    let mut tab = Tableau {
        rows,
        cols,
        t,
        upper,
        x,
        basis,
        is_basic,
        at_upper: vec![false; cols],
        kinds,
        iterations: 0,
        limit: 50 * (rows + cols) + 1000,
    };

    // Phase one.
    let art_start = n + slacks;
    let mut cost = vec![0.0; cols];
    cost[art_start..].iter_mut().for_each(|c| *c = 1.0);
    tab.run(&cost, cols)?;
    let residual: f64 = tab.x[art_start..].iter().sum();
    if residual > tol.optimization {
        return Ok(infeasible(tab.iterations));
    }

    // Drive remaining artificials out of the basis where possible; rows
    // where that fails are redundant and keep a zero artificial.
    for r in 0..rows {
        if tab.basis[r] < art_start {
            continue;
        }
        let candidate = (0..art_start)
            .filter(|&j| !tab.is_basic[j] && tab.at(r, j).abs() > 1e-9)
            .max_by(|&a, &b| tab.at(r, a).abs().total_cmp(&tab.at(r, b).abs()));
        let leaving = tab.basis[r];
        tab.x[leaving] = 0.0;
        if let Some(j) = candidate {
            tab.pivot(r, j);
            tab.at_upper[leaving] = false;
        }
    }
    for j in art_start..cols {
        tab.upper[j] = 0.0;
        if !tab.is_basic[j] {
            tab.x[j] = 0.0;
        }
    }

    // Phase two.
    let mut cost = vec![0.0; cols];
    cost[..n].copy_from_slice(lp.objective());
    let phase = tab.run(&cost, art_start)?;

    let values: Vec<f64> = (0..n)
        .map(|j| {
            let v = &lp.variables()[j];
            (lower[j] + tab.x[j]).clamp(v.lower, v.upper)
        })
        .collect();
    let objective_value = lp.objective().iter().zip(&values).map(|(c, v)| c * v).sum();
    let column_name = |j: usize| -> String {
        match tab.kinds[j] {
            Column::Structural(k) => lp.variables()[k].name.clone(),
            Column::Slack(i) => format!("slack[{}]", lp.constraints()[i].name),
            Column::Artificial(i) => format!("artificial[{}]", lp.constraints()[i].name),
        }
    };
    Ok(LpSolution {
        status: match phase {
            Phase::Optimal => LpStatus::Optimal,
            Phase::Unbounded => LpStatus::Unbounded,
        },
        objective_value,
        values,
        basis: tab.basis.iter().map(|&b| column_name(b)).collect(),
        at_upper: (0..cols)
            .filter(|&j| !tab.is_basic[j] && tab.at_upper[j])
            .map(column_name)
            .collect(),
        iterations: tab.iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lp::Bound;
    use alloc::vec;

    const TOL: Tolerances = Tolerances::DEFAULT;

    #[test]
    fn single_variable_lower_bound() {
        let mut lp = LinearProgram::new();
        let x = lp.add_variable("x", 0.0, 1.0);
        lp.set_objective(x, 1.0).unwrap();
        lp.add_constraint("floor", vec![(x, 1.0)], Bound::Ge(0.25))
            .unwrap();
        let s = solve_lp(&lp, &TOL).unwrap();
        assert!(s.is_optimal());
        assert!((s.objective_value - 0.25).abs() < 1e-12);
    }

    #[test]
    fn gap_objective() {
        let mut lp = LinearProgram::new();
        let alpha = lp.add_variable("alpha", -10.0, f64::INFINITY);
        let x = lp.add_variable("x", -10.0, 10.0);
        let y = lp.add_variable("y", -10.0, 10.0);
        lp.set_objective(alpha, 1.0).unwrap();
        lp.add_constraint(
            "gap",
            vec![(alpha, 1.0), (x, -1.0), (y, 1.0)],
            Bound::Ge(0.0),
        )
        .unwrap();
        lp.add_constraint("x", vec![(x, 1.0)], Bound::Eq(1.0))
            .unwrap();
        lp.add_constraint("y", vec![(y, 1.0)], Bound::Eq(0.0))
            .unwrap();
        let s = solve_lp(&lp, &TOL).unwrap();
        assert!(s.is_optimal());
        assert!((s.objective_value - 1.0).abs() < 1e-12);
        assert!(lp.max_violation(&s.values) < 1e-12);
    }

    #[test]
    fn infeasible_and_unbounded() {
        let mut lp = LinearProgram::new();
        let x = lp.add_variable("x", 0.0, 1.0);
        lp.add_constraint("too_big", vec![(x, 1.0)], Bound::Ge(2.0))
            .unwrap();
        assert_eq!(solve_lp(&lp, &TOL).unwrap().status, LpStatus::Infeasible);

        let mut lp = LinearProgram::new();
        let x = lp.add_variable("x", 0.0, f64::INFINITY);
        lp.set_objective(x, -1.0).unwrap();
        assert_eq!(solve_lp(&lp, &TOL).unwrap().status, LpStatus::Unbounded);

        let mut lp = LinearProgram::new();
        lp.add_variable("x", f64::NEG_INFINITY, 0.0);
        assert!(solve_lp(&lp, &TOL).is_err());
    }

    #[test]
    fn ranged_rows_and_bound_flips() {
        // max x + y  s.t. 0.5 <= x + y <= 1.5, x, y in [0, 1]
        let mut lp = LinearProgram::new();
        let x = lp.add_variable("x", 0.0, 1.0);
        let y = lp.add_variable("y", 0.0, 1.0);
        lp.set_objective(x, -1.0).unwrap();
        lp.set_objective(y, -1.0).unwrap();
        lp.add_constraint("band", vec![(x, 1.0), (y, 1.0)], Bound::Range(0.5, 1.5))
            .unwrap();
        let s = solve_lp(&lp, &TOL).unwrap();
        assert!((s.objective_value + 1.5).abs() < 1e-12);

        lp.set_objective(x, 1.0).unwrap();
        lp.set_objective(y, 1.0).unwrap();
        let s = solve_lp(&lp, &TOL).unwrap();
        assert!((s.objective_value - 0.5).abs() < 1e-12);
    }

    #[test]
    fn redundant_equalities() {
        let mut lp = LinearProgram::new();
        let x = lp.add_variable("x", 0.0, 1.0);
        let y = lp.add_variable("y", 0.0, 1.0);
        lp.set_objective(x, 1.0).unwrap();
        lp.add_constraint("a", vec![(x, 1.0), (y, 1.0)], Bound::Eq(1.0))
            .unwrap();
        lp.add_constraint("b", vec![(x, 2.0), (y, 2.0)], Bound::Eq(2.0))
            .unwrap();
        let s = solve_lp(&lp, &TOL).unwrap();
        assert!(s.is_optimal());
        assert!(s.objective_value.abs() < 1e-12);
        assert!((s.values[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_klee_minty_style_terminates() {
        // A small degenerate program that cycles under naive largest-coefficient
        // pivoting (Beale's example), solved over boxed variables.
        let mut lp = LinearProgram::new();
        let x: Vec<_> = (0..4)
            .map(|i| lp.add_variable(alloc::format!("x{i}"), 0.0, f64::INFINITY))
            .collect();
        for (v, c) in x.iter().zip([-0.75, 150.0, -0.02, 6.0]) {
            lp.set_objective(*v, c).unwrap();
        }
        lp.add_constraint(
            "r1",
            vec![(x[0], 0.25), (x[1], -60.0), (x[2], -0.04), (x[3], 9.0)],
            Bound::Le(0.0),
        )
        .unwrap();
        lp.add_constraint(
            "r2",
            vec![(x[0], 0.5), (x[1], -90.0), (x[2], -0.02), (x[3], 3.0)],
            Bound::Le(0.0),
        )
        .unwrap();
        lp.add_constraint("r3", vec![(x[2], 1.0)], Bound::Le(1.0))
            .unwrap();
        let s = solve_lp(&lp, &TOL).unwrap();
        assert!(s.is_optimal());
        assert!((s.objective_value + 0.05).abs() < 1e-9);
    }

    #[test]
    fn shifted_lower_bounds() {
        let mut lp = LinearProgram::new();
        let x = lp.add_variable("x", 2.0, 5.0);
        let y = lp.add_variable("y", -1.0, 1.0);
        lp.set_objective(x, 1.0).unwrap();
        lp.set_objective(y, 2.0).unwrap();
        lp.add_constraint("sum", vec![(x, 1.0), (y, 1.0)], Bound::Ge(3.5))
            .unwrap();
        let s = solve_lp(&lp, &TOL).unwrap();
        // cheapest: y at -1 costs 2 per unit, x costs 1 -> x = 4.5, y = -1
        assert!((s.value(x) - 4.5).abs() < 1e-12);
        assert!((s.value(y) + 1.0).abs() < 1e-12);
        assert!((s.objective_value - 2.5).abs() < 1e-12);
    }
}
