//! Linear programs over the feasible polytope of the stratum means.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::{self, Write as _};

use crate::{LpError, Result};

mod polytope;
mod simplex;

pub use polytope::{
    build_polytope, check_h0_compatibility, h0_violation, solve_delta_max_slb, DeltaMaxBound,
    MeanVariables, Polytope,
};
pub use simplex::solve_lp;

/// Index of a declared variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct VarId(pub usize);

/// A decision variable with box bounds. Lower bounds must be finite.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Variable {
    /// Name used in dumps and certificates.
    pub name: String,
    /// Lower bound.
    pub lower: f64,
    /// Upper bound, possibly `f64::INFINITY`.
    pub upper: f64,
}

/// Right-hand side of a linear constraint.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Bound {
    /// `a.x = b`
    Eq(f64),
    /// `a.x <= b`
    Le(f64),
    /// `a.x >= b`
    Ge(f64),
    /// `lo <= a.x <= hi`
    Range(f64, f64),
}

/// A named linear constraint.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Constraint {
    /// Row name.
    pub name: String,
    /// Nonzero coefficients.
    pub terms: Vec<(VarId, f64)>,
    /// Right-hand side.
    pub bound: Bound,
}

/// `minimize c.x` subject to linear rows and box bounds.
#[derive(Debug, Clone, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LinearProgram {
    variables: Vec<Variable>,
    objective: Vec<f64>,
    constraints: Vec<Constraint>,
}

impl LinearProgram {
    /// An empty program.
    pub fn new() -> Self {
        Self::default()
    }

    /// Declares a variable with bounds `[lower, upper]`.
    pub fn add_variable(&mut self, name: impl Into<String>, lower: f64, upper: f64) -> VarId {
        self.variables.push(Variable {
            name: name.into(),
            lower,
            upper,
        });
        self.objective.push(0.0);
        VarId(self.variables.len() - 1)
    }

    /// Sets the objective coefficient of `var`.
    pub fn set_objective(&mut self, var: VarId, coeff: f64) -> Result<()> {
        match self.objective.get_mut(var.0) {
            Some(c) => {
                *c = coeff;
                Ok(())
            }
            None => Err(LpError::UnknownVariable {
                constraint: String::from("objective"),
                var: var.0,
            }
            .into()),
        }
    }

    /// Adds a row; every term must reference a declared variable.
    pub fn add_constraint(
        &mut self,
        name: impl Into<String>,
        terms: Vec<(VarId, f64)>,
        bound: Bound,
    ) -> Result<()> {
        let name = name.into();
        if let Some((v, _)) = terms.iter().find(|(v, _)| v.0 >= self.variables.len()) {
            return Err(LpError::UnknownVariable {
                constraint: name,
                var: v.0,
            }
            .into());
        }
        self.constraints.push(Constraint { name, terms, bound });
        Ok(())
    }

    /// Declared variables.
    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    /// Dense objective vector.
    pub fn objective(&self) -> &[f64] {
        &self.objective
    }

    /// Rows in insertion order.
    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    /// `a.x` for a row at point `x`.
    pub fn row_activity(&self, row: &Constraint, x: &[f64]) -> f64 {
        row.terms.iter().map(|(v, a)| a * x[v.0]).sum()
    }

    /// Largest violation of any row or bound at `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for (v, &xi) in self.variables.iter().zip(x) {
            worst = worst.max(v.lower - xi).max(xi - v.upper);
        }
        for row in &self.constraints {
            let ax = self.row_activity(row, x);
            let (lo, hi) = match row.bound {
                Bound::Eq(b) => (b, b),
                Bound::Le(b) => (f64::NEG_INFINITY, b),
                Bound::Ge(b) => (b, f64::INFINITY),
                Bound::Range(lo, hi) => (lo, hi),
            };
            worst = worst.max(lo - ax).max(ax - hi);
        }
        worst
    }

    /// Renders the program in CPLEX LP text format for cross-checking with
    /// external solvers. Ranged rows are split into two inequalities.
    pub fn to_lp_format(&self) -> String {
        let mut out = String::new();
        // Writing into a String never fails.
        let _ = self.write_lp(&mut out);
        out
    }

    fn write_lp(&self, out: &mut String) -> fmt::Result {
        let name = |v: &VarId| lp_name(&self.variables[v.0].name);
        writeln!(out, "\\ strata-bounds linear program")?;
        writeln!(out, "Minimize")?;
        let obj: Vec<(VarId, f64)> = self
            .objective
            .iter()
            .enumerate()
            .filter(|(_, c)| **c != 0.0)
            .map(|(i, c)| (VarId(i), *c))
            .collect();
        write!(out, " obj:")?;
        if obj.is_empty() {
            write!(
                out,
                " 0 {}",
                self.variables
                    .first()
                    .map_or(String::from("x"), |v| lp_name(&v.name))
            )?;
        }
        for (v, c) in &obj {
            write!(out, " {} {}", signed(*c), name(v))?;
        }
        writeln!(out)?;
        writeln!(out, "Subject To")?;
        for row in &self.constraints {
            let mut lhs = String::new();
            for (v, a) in &row.terms {
                write!(lhs, " {} {}", signed(*a), name(v))?;
            }
            if lhs.is_empty() {
                lhs.push_str(" 0 ");
                lhs.push_str(
                    &self
                        .variables
                        .first()
                        .map_or(String::from("x"), |v| lp_name(&v.name)),
                );
            }
            let rname = lp_name(&row.name);
            match row.bound {
                Bound::Eq(b) => writeln!(out, " {rname}:{lhs} = {b:?}")?,
                Bound::Le(b) => writeln!(out, " {rname}:{lhs} <= {b:?}")?,
                Bound::Ge(b) => writeln!(out, " {rname}:{lhs} >= {b:?}")?,
                Bound::Range(lo, hi) => {
                    writeln!(out, " {rname}_lo:{lhs} >= {lo:?}")?;
                    writeln!(out, " {rname}_hi:{lhs} <= {hi:?}")?;
                }
            }
        }
        writeln!(out, "Bounds")?;
        for v in &self.variables {
            let n = lp_name(&v.name);
            if v.upper.is_finite() {
                writeln!(out, " {:?} <= {n} <= {:?}", v.lower, v.upper)?;
            } else {
                writeln!(out, " {n} >= {:?}", v.lower)?;
            }
        }
        writeln!(out, "End")
    }
}

fn signed(c: f64) -> String {
    if c < 0.0 {
        format!("- {:?}", -c)
    } else {
        format!("+ {c:?}")
    }
}

fn lp_name(name: &str) -> String {
    name.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

/// Termination status of the simplex method.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum LpStatus {
    /// An optimal vertex was found.
    Optimal,
    /// No point satisfies the constraints.
    Infeasible,
    /// The objective decreases without bound.
    Unbounded,
}

/// Result of [`solve_lp`].
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LpSolution {
    /// Termination status.
    pub status: LpStatus,
    /// Objective at `values` (meaningful when optimal).
    pub objective_value: f64,
    /// Value of every declared variable.
    pub values: Vec<f64>,
    /// Names of the basic variables, one per row, at termination.
    pub basis: Vec<String>,
    /// Nonbasic variables sitting at their upper bound.
    pub at_upper: Vec<String>,
    /// Simplex iterations over both phases.
    pub iterations: usize,
}

impl LpSolution {
    /// Whether the status is [`LpStatus::Optimal`].
    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }

    /// Value of one variable.
    pub fn value(&self, var: VarId) -> f64 {
        self.values[var.0]
    }

    /// `(name, value)` pairs in declaration order.
    pub fn assignment<'a>(&'a self, lp: &'a LinearProgram) -> impl Iterator<Item = (&'a str, f64)> {
        lp.variables()
            .iter()
            .zip(&self.values)
            .map(|(v, x)| (v.name.as_str(), *x))
    }
}
