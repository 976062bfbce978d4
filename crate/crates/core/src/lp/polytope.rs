//! The feasible polytope of the stratum means `mu_g^z` implied by the
//! observed law, and the programs built on it.
//!
//! Arm `z` constrains its survivors' mean through the mixture identity
//! `m(z) = sum_{g <= z} p_g^z mu_g^z`. The top stratum `D^m L` appears in a
//! single arm only, so its mean is projected out and the arm-`m` identity
//! becomes a ranged row over the remaining strata.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use super::{solve_lp, Bound, LinearProgram, LpSolution, LpStatus, VarId};
use crate::strata::{stratum_label, Contrast, ObservedDistribution, StrataProfile};
use crate::{Error, Result, Tolerances};

/// Map from `(g, z)` to the variable holding `mu_g^z`.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanVariables {
    max_level: usize,
    ids: Vec<Vec<Option<VarId>>>,
}

impl MeanVariables {
    /// Variable of `mu_g^z`, if it is part of the program.
    pub fn get(&self, g: usize, z: usize) -> Option<VarId> {
        self.ids
            .get(g)
            .and_then(|row| row.get(z))
            .copied()
            .flatten()
    }

    /// Highest treatment level `m`.
    pub fn max_level(&self) -> usize {
        self.max_level
    }

    /// All `(g, z, var)` triples, ordered by stratum then level.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, VarId)> + '_ {
        self.ids.iter().enumerate().flat_map(|(g, row)| {
            row.iter()
                .enumerate()
                .filter_map(move |(z, v)| v.map(|v| (g, z, v)))
        })
    }
}

/// The mean polytope as a linear program with a zero objective.
#[derive(Debug, Clone, PartialEq)]
pub struct Polytope {
    /// Rows and box bounds.
    pub lp: LinearProgram,
    /// Variable layout.
    pub vars: MeanVariables,
}

fn mean_name(g: usize, z: usize, m: usize) -> String {
    format!("mu_{}^{}", stratum_label(g, m), z)
}

/// Builds the polytope of stratum means compatible with `obs`.
///
/// Variables are `mu_g^z in [0, 1]` for nonempty strata `g < m` and levels
/// `z >= g`.
pub fn build_polytope(
    obs: &ObservedDistribution,
    profile: &StrataProfile,
    tol: &Tolerances,
) -> Result<Polytope> {
    let m = obs.max_level();
    if profile.max_level() != m {
        return Err(Error::LengthMismatch {
            what: "strata profile",
            expected: m + 2,
            found: profile.proportions().len(),
        });
    }
    let mut lp = LinearProgram::new();
    let mut ids = vec![vec![None; m + 1]; m];
    for (g, row) in ids.iter_mut().enumerate() {
        if profile.is_empty(g) {
            continue;
        }
        for (z, slot) in row.iter_mut().enumerate().skip(g) {
            *slot = Some(lp.add_variable(mean_name(g, z, m), 0.0, 1.0));
        }
    }
    let vars = MeanVariables { max_level: m, ids };

    for z in 0..=m {
        if obs.survival()[z] <= tol.identity {
            continue;
        }
        let terms: Vec<(VarId, f64)> = (0..=z.min(m - 1))
            .filter_map(|g| vars.get(g, z).map(|v| (v, profile.conditional(g, z))))
            .collect();
        let mean = obs.mean(z);
        let bound = if z < m {
            Bound::Eq(mean)
        } else {
            let top = profile.conditional(m, m);
            Bound::Range((mean - top).max(0.0), (1.0 - top).min(mean))
        };
        lp.add_constraint(format!("arm_{z}"), terms, bound)?;
    }
    Ok(Polytope { lp, vars })
}

/// Sharp lower bound on the maximal within-stratum effect.
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaMaxBound {
    /// `min` over the polytope of `max_{g, z1 > z2} (mu_g^z1 - mu_g^z2)`,
    /// floored at zero.
    pub value: f64,
    /// The program that was solved; the gap variable is named `alpha`.
    pub lp: LinearProgram,
    /// Layout of the mean variables in `lp`.
    pub vars: MeanVariables,
    /// Solver output, including a minimizing point.
    pub solution: LpSolution,
}

impl DeltaMaxBound {
    /// Value of `mu_g^z` at the minimizing point.
    pub fn mean(&self, g: usize, z: usize) -> Option<f64> {
        self.vars.get(g, z).map(|v| self.solution.value(v))
    }

    /// Contrasts whose gap equals the bound at the minimizing point.
    pub fn binding_contrasts(&self, slack: f64) -> Vec<Contrast> {
        let m = self.vars.max_level();
        Contrast::all(m)
            .into_iter()
            .filter(
                |c| match (self.mean(c.stratum, c.high), self.mean(c.stratum, c.low)) {
                    (Some(h), Some(l)) => h - l >= self.value - slack,
                    _ => false,
                },
            )
            .collect()
    }
}

/// Solves `min alpha` subject to the polytope and
/// `mu_g^z1 - mu_g^z2 <= alpha` for every `z1 > z2 >= g`, with `alpha >= 0`.
pub fn solve_delta_max_slb(
    obs: &ObservedDistribution,
    profile: &StrataProfile,
    tol: &Tolerances,
) -> Result<DeltaMaxBound> {
    let Polytope { mut lp, vars } = build_polytope(obs, profile, tol)?;
    let m = vars.max_level();
    let alpha = lp.add_variable("alpha", 0.0, f64::INFINITY);
    lp.set_objective(alpha, 1.0)?;
    for c in Contrast::all(m) {
        if let (Some(h), Some(l)) = (vars.get(c.stratum, c.high), vars.get(c.stratum, c.low)) {
            lp.add_constraint(
                format!("gap_{}_{}_{}", stratum_label(c.stratum, m), c.high, c.low),
                vec![(h, 1.0), (l, -1.0), (alpha, -1.0)],
                Bound::Le(0.0),
            )?;
        }
    }
    let solution = solve_lp(&lp, tol)?;
    match solution.status {
        LpStatus::Optimal => {}
        LpStatus::Infeasible | LpStatus::Unbounded => return Err(Error::InfeasiblePolytope),
    }
    Ok(DeltaMaxBound {
        value: solution.objective_value.max(0.0),
        lp,
        vars,
        solution,
    })
}

fn h0_program(
    obs: &ObservedDistribution,
    profile: &StrataProfile,
    tol: &Tolerances,
) -> Result<Polytope> {
    let Polytope { mut lp, vars } = build_polytope(obs, profile, tol)?;
    let m = vars.max_level();
    for g in 0..m {
        let Some(base) = vars.get(g, g) else { continue };
        for z in g + 1..=m {
            if let Some(v) = vars.get(g, z) {
                lp.add_constraint(
                    format!("h0_{}_{}", stratum_label(g, m), z),
                    vec![(v, 1.0), (base, -1.0)],
                    Bound::Eq(0.0),
                )?;
            }
        }
    }
    Ok(Polytope { lp, vars })
}

/// Whether some point of the polytope has `mu_g^z` constant in `z` for every
/// stratum, i.e. whether the global null is compatible with `obs`.
pub fn check_h0_compatibility(
    obs: &ObservedDistribution,
    profile: &StrataProfile,
    tol: &Tolerances,
) -> Result<bool> {
    let program = h0_program(obs, profile, tol)?;
    Ok(solve_lp(&program.lp, tol)?.status != LpStatus::Infeasible)
}

/// Smallest `t >= 0` such that, with one common mean per stratum, every
/// arm identity holds up to `t`. Zero exactly when the null is compatible.
pub fn h0_violation(
    obs: &ObservedDistribution,
    profile: &StrataProfile,
    tol: &Tolerances,
) -> Result<f64> {
    let program = h0_program(obs, profile, tol)?;
    let mut lp = LinearProgram::new();
    for v in program.lp.variables() {
        lp.add_variable(v.name.clone(), v.lower, v.upper);
    }
    let t = lp.add_variable("t", 0.0, f64::INFINITY);
    lp.set_objective(t, 1.0)?;
    for row in program.lp.constraints() {
        let (lo, hi) = match row.bound {
            Bound::Eq(b) if row.name.starts_with("h0_") => {
                lp.add_constraint(row.name.clone(), row.terms.clone(), Bound::Eq(b))?;
                continue;
            }
            Bound::Eq(b) => (b, b),
            Bound::Range(lo, hi) => (lo, hi),
            Bound::Le(b) => (f64::NEG_INFINITY, b),
            Bound::Ge(b) => (b, f64::INFINITY),
        };
        let mut terms = row.terms.clone();
        terms.push((t, 1.0));
        if lo.is_finite() {
            lp.add_constraint(format!("{}_lo", row.name), terms.clone(), Bound::Ge(lo))?;
        }
        if hi.is_finite() {
            if let Some(last) = terms.last_mut() {
                last.1 = -1.0;
            }
            lp.add_constraint(format!("{}_hi", row.name), terms, Bound::Le(hi))?;
        }
    }
    let solution = solve_lp(&lp, tol)?;
    if !solution.is_optimal() {
        return Err(Error::InfeasiblePolytope);
    }
    Ok(solution.objective_value.max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stepdown::test_global;
    use crate::strata::identify_strata;

    const TOL: Tolerances = Tolerances::DEFAULT;

    fn setup(pi: &[f64], means: &[f64]) -> (ObservedDistribution, StrataProfile) {
        let obs = ObservedDistribution::from_strata(pi, means).unwrap();
        let p = identify_strata(&obs, &TOL).unwrap();
        (obs, p)
    }

    #[test]
    fn masked_effect_bound() {
        let (obs, p) = setup(&[0.3, 0.3, 0.3, 0.1], &[0.3, 0.0, 0.5]);
        let d = solve_delta_max_slb(&obs, &p, &TOL).unwrap();
        assert!((d.value - 0.25).abs() < 1e-9, "{}", d.value);
        assert!(d.lp.max_violation(&d.solution.values) < 1e-9);
        assert!(!check_h0_compatibility(&obs, &p, &TOL).unwrap());
        assert!(h0_violation(&obs, &p, &TOL).unwrap() > 1e-3);
    }

    #[test]
    fn coarsened_gap_case() {
        let (obs, p) = setup(&[0.3, 0.3, 0.3, 0.1], &[0.5, 0.5, 0.75]);
        let d = solve_delta_max_slb(&obs, &p, &TOL).unwrap();
        assert!((d.value - 0.125).abs() < 1e-9, "{}", d.value);
        assert!(!d.binding_contrasts(1e-9).is_empty());
    }

    #[test]
    fn two_arm_point_identified() {
        // Everybody survives under both arms: no trimming, the contrast is
        // the difference in means.
        let (obs, p) = setup(&[1.0, 0.0, 0.0], &[0.3, 0.55]);
        let d = solve_delta_max_slb(&obs, &p, &TOL).unwrap();
        assert!((d.value - 0.25).abs() < 1e-9);
        assert!((d.mean(0, 1).unwrap() - 0.55).abs() < 1e-9);

        let (obs, p) = setup(&[1.0, 0.0, 0.0], &[0.55, 0.3]);
        let d = solve_delta_max_slb(&obs, &p, &TOL).unwrap();
        assert_eq!(d.value, 0.0);
    }

    #[test]
    fn polytope_layout() {
        let (obs, p) = setup(&[0.2, 0.1, 0.2, 0.1, 0.4], &[0.5, 0.5, 0.5, 0.5]);
        let poly = build_polytope(&obs, &p, &TOL).unwrap();
        assert_eq!(poly.vars.max_level(), 3);
        // g = 0: 4 levels, g = 1: 3, g = 2: 2
        assert_eq!(poly.lp.variables().len(), 9);
        assert_eq!(poly.lp.constraints().len(), 4);
        assert!(poly.vars.get(3, 3).is_none());
        assert_eq!(
            poly.lp.variables()[poly.vars.get(1, 2).unwrap().0].name,
            "mu_DLLL^2"
        );
        assert!(matches!(poly.lp.constraints()[3].bound, Bound::Range(_, _)));
        assert!(check_h0_compatibility(&obs, &p, &TOL).unwrap());
        assert!(h0_violation(&obs, &p, &TOL).unwrap() < 1e-9);
    }

    #[test]
    fn empty_strata_drop_out() {
        let (obs, p) = setup(&[0.3, 0.0, 0.3, 0.4], &[0.3, 0.3, 0.6]);
        let poly = build_polytope(&obs, &p, &TOL).unwrap();
        assert!(poly.vars.get(1, 1).is_none());
        assert_eq!(poly.vars.iter().count(), 3);
    }

    #[test]
    fn agrees_with_step_down() {
        let cases: [(&[f64], &[f64]); 5] = [
            (&[0.3, 0.3, 0.3, 0.1], &[0.3, 0.0, 0.5]),
            (&[0.1, 0.1, 0.1, 0.7], &[0.9, 0.7, 0.9]),
            (&[0.2, 0.1, 0.3, 0.4], &[0.65, 0.1, 0.9]),
            (&[0.25, 0.15, 0.2, 0.4], &[0.35, 0.6, 0.55]),
            (&[0.5, 0.5, 0.0], &[0.2, 0.6]),
        ];
        for (pi, means) in cases {
            let (obs, p) = setup(pi, means);
            let step = test_global(&obs, &p, &TOL).unwrap();
            let lp = check_h0_compatibility(&obs, &p, &TOL).unwrap();
            assert_eq!(step.rejected, !lp, "{pi:?} {means:?}");
        }
    }

    #[test]
    fn deterministic_certificate() {
        let (obs, p) = setup(&[0.25, 0.15, 0.2, 0.4], &[0.35, 0.6, 0.55]);
        let a = solve_delta_max_slb(&obs, &p, &TOL).unwrap();
        let b = solve_delta_max_slb(&obs, &p, &TOL).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.solution.basis.len(), a.lp.constraints().len());
    }
}
