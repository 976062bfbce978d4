//! Brute-force verifiers for the closed forms and the linear programs.
//!
//! These are deliberately naive and only meant for tests.
//!
//! The grid searches range over the same mean variables as the polytope,
//! but solve each arm identity for one variable instead of relaxing it, so
//! every grid point they accept is exactly feasible. The grid value of the
//! maximal-effect bound therefore never undercuts the exact one.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::bounds::FeasibleInterval;
use crate::strata::{ObservedDistribution, StrataProfile};
use crate::{Error, Result};

/// Resolution of a grid search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    /// Points per free coordinate, spanning `[0, 1]`.
    pub points_per_axis: usize,
    /// Slack on arm identities for [`grid_h0_compatible`].
    pub tolerance: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            points_per_axis: 51,
            tolerance: 0.02,
        }
    }
}

const MAX_POINTS: f64 = 2e8;
const SLACK: f64 = 1e-12;

fn check_grid(obs: &ObservedDistribution, grid: &GridSpec, dims: usize) -> Result<()> {
    if obs.max_level() > 3 {
        return Err(Error::Oracle(format!(
            "grid search supports at most 4 arms, got {}",
            obs.max_level() + 1
        )));
    }
    if grid.points_per_axis < 2 {
        return Err(Error::Oracle("points_per_axis must be at least 2".into()));
    }
    if (grid.points_per_axis as f64).powi(dims as i32) > MAX_POINTS {
        return Err(Error::Oracle(format!(
            "{} points per axis in {dims} dimensions is too many",
            grid.points_per_axis
        )));
    }
    Ok(())
}

/// Calls `f` with every point of the `dims`-dimensional grid.
fn for_each_point(dims: usize, points: usize, mut f: impl FnMut(&[f64])) {
    let step = 1.0 / (points - 1) as f64;
    let mut idx = vec![0usize; dims];
    let mut x = vec![0.0; dims];
    loop {
        f(&x);
        let mut d = 0;
        loop {
            if d == dims {
                return;
            }
            idx[d] += 1;
            if idx[d] < points {
                x[d] = idx[d] as f64 * step;
                break;
            }
            idx[d] = 0;
            x[d] = 0.0;
            d += 1;
        }
    }
}

/// One arm identity: `sum_g p_g^z mu_g^z` over the listed strata.
struct ArmRow {
    level: usize,
    /// `(stratum, coefficient)`; the first entry is solved for.
    terms: Vec<(usize, f64)>,
    lo: f64,
    hi: f64,
}

fn arm_rows(obs: &ObservedDistribution, profile: &StrataProfile) -> Vec<ArmRow> {
    let m = obs.max_level();
    let mut rows = Vec::new();
    for z in 0..=m {
        if obs.survival()[z] <= SLACK {
            continue;
        }
        let mut terms: Vec<(usize, f64)> = (0..=z.min(m - 1))
            .filter(|&g| !profile.is_empty(g))
            .map(|g| (g, profile.conditional(g, z)))
            .collect();
        // Solve for the largest coefficient; ties go to the lowest stratum.
        if let Some(best) =
            (0..terms.len()).reduce(|a, b| if terms[b].1 > terms[a].1 { b } else { a })
        {
            terms.swap(0, best);
        }
        let mean = obs.mean(z);
        let (lo, hi) = if z < m {
            (mean, mean)
        } else {
            let top = profile.conditional(m, m);
            ((mean - top).max(0.0), (1.0 - top).min(mean))
        };
        rows.push(ArmRow {
            level: z,
            terms,
            lo,
            hi,
        });
    }
    rows
}

/// Grid approximation of the sharp lower bound on the maximal effect.
///
/// Each arm identity is solved for its largest-weight variable and the
/// other means are scanned on the grid. In the top arm the solved variable
/// only ever enters a gap as the higher level, so it is set to the smallest
/// value the ranged identity allows.
pub fn grid_delta_max_slb(
    obs: &ObservedDistribution,
    profile: &StrataProfile,
    grid: &GridSpec,
) -> Result<f64> {
    let m = obs.max_level();
    let rows = arm_rows(obs, profile);
    let dims: usize = rows.iter().map(|r| r.terms.len().saturating_sub(1)).sum();
    check_grid(obs, grid, dims)?;

    // mu[g][z], NaN where undefined.
    let mut mu = vec![vec![f64::NAN; m + 1]; m];
    let mut best = f64::INFINITY;
    for_each_point(dims, grid.points_per_axis, |x| {
        let mut next = 0;
        for row in &rows {
            let mut rest = 0.0;
            for &(g, p) in &row.terms[1.min(row.terms.len())..] {
                mu[g][row.level] = x[next];
                rest += p * x[next];
                next += 1;
            }
            let Some(&(g0, p0)) = row.terms.first() else {
                if row.lo > SLACK || row.hi < -SLACK {
                    return;
                }
                continue;
            };
            let lo = ((row.lo - rest) / p0).max(0.0);
            let hi = ((row.hi - rest) / p0).min(1.0);
            if lo > hi + SLACK {
                return;
            }
            mu[g0][row.level] = lo.min(hi);
        }
        let mut gap: f64 = 0.0;
        for (g, levels) in mu.iter().enumerate() {
            if profile.is_empty(g) {
                continue;
            }
            for hi in g + 1..=m {
                for lo in g..hi {
                    gap = gap.max(levels[hi] - levels[lo]);
                }
            }
        }
        best = best.min(gap);
    });
    if best.is_finite() {
        Ok(best)
    } else {
        Err(Error::Oracle(
            "no feasible grid point; refine the grid".into(),
        ))
    }
}

/// Smallest largest arm-identity violation over grid points where every
/// stratum has one common mean across levels.
pub fn grid_h0_violation(
    obs: &ObservedDistribution,
    profile: &StrataProfile,
    grid: &GridSpec,
) -> Result<f64> {
    let m = obs.max_level();
    let strata: Vec<usize> = profile.nonempty_upto(m - 1).collect();
    check_grid(obs, grid, strata.len())?;
    let rows = arm_rows(obs, profile);
    let mut common = vec![0.0; m];
    let mut best = f64::INFINITY;
    for_each_point(strata.len(), grid.points_per_axis, |x| {
        for (&g, &v) in strata.iter().zip(x) {
            common[g] = v;
        }
        let worst = rows
            .iter()
            .map(|row| {
                let s: f64 = row.terms.iter().map(|&(g, p)| p * common[g]).sum();
                (row.lo - s).max(s - row.hi).max(0.0)
            })
            .fold(0.0, f64::max);
        best = best.min(worst);
    });
    Ok(best)
}

/// Whether some grid point with one common mean per stratum satisfies every
/// arm identity within `grid.tolerance`.
pub fn grid_h0_compatible(
    obs: &ObservedDistribution,
    profile: &StrataProfile,
    grid: &GridSpec,
) -> Result<bool> {
    Ok(grid_h0_violation(obs, profile, grid)? <= grid.tolerance)
}

/// Range of the mean of a subgroup of mass `omega` carved out of a
/// Bernoulli(`p`) population, by trying every split of the ones-mass in
/// units of `1 / steps`.
///
/// Exact whenever `p` and `omega` are multiples of `1 / steps`.
pub fn enumerate_trim(p: f64, omega: f64, steps: usize) -> FeasibleInterval {
    if omega.is_nan() || omega <= 0.0 || steps == 0 {
        return FeasibleInterval::EMPTY;
    }
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for j in 0..=steps {
        let ones = j as f64 / steps as f64;
        let zeros = omega - ones;
        // Retained ones and zeros must fit in what the population has.
        if ones <= p + SLACK && zeros >= -SLACK && zeros <= 1.0 - p + SLACK {
            let mean = ones / omega;
            lo = lo.min(mean);
            hi = hi.max(mean);
        }
    }
    if lo > hi {
        FeasibleInterval::EMPTY
    } else {
        FeasibleInterval::new(lo.min(1.0), hi.min(1.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::trim_bounds;
    use crate::strata::identify_strata;
    use crate::Tolerances;

    fn setup(pi: &[f64], means: &[f64]) -> (ObservedDistribution, StrataProfile) {
        let obs = ObservedDistribution::from_strata(pi, means).unwrap();
        let p = identify_strata(&obs, &Tolerances::DEFAULT).unwrap();
        (obs, p)
    }

    #[test]
    fn grid_examples() {
        let g = GridSpec::default();
        let (obs, p) = setup(&[0.3, 0.3, 0.3, 0.1], &[0.3, 0.0, 0.5]);
        assert!((grid_delta_max_slb(&obs, &p, &g).unwrap() - 0.25).abs() <= 0.02);
        assert!(!grid_h0_compatible(&obs, &p, &g).unwrap());

        let (obs, p) = setup(&[0.3, 0.3, 0.3, 0.1], &[0.5, 0.5, 0.75]);
        assert!((grid_delta_max_slb(&obs, &p, &g).unwrap() - 0.125).abs() <= 0.02);

        let (obs, p) = setup(&[1.0, 0.0, 0.0, 0.0], &[0.4, 0.4, 0.4]);
        assert_eq!(grid_delta_max_slb(&obs, &p, &g).unwrap(), 0.0);
        assert!(grid_h0_compatible(&obs, &p, &g).unwrap());
    }

    #[test]
    fn finer_grid_is_no_worse() {
        let (obs, p) = setup(&[0.25, 0.15, 0.2, 0.4], &[0.35, 0.9, 0.55]);
        let coarse = GridSpec {
            points_per_axis: 26,
            ..GridSpec::default()
        };
        let fine = GridSpec {
            points_per_axis: 51,
            ..GridSpec::default()
        };
        let exact = crate::lp::solve_delta_max_slb(&obs, &p, &Tolerances::DEFAULT)
            .unwrap()
            .value;
        let e_coarse = grid_delta_max_slb(&obs, &p, &coarse).unwrap() - exact;
        let e_fine = grid_delta_max_slb(&obs, &p, &fine).unwrap() - exact;
        assert!(e_coarse >= -1e-9 && e_fine >= -1e-9);
        assert!(e_fine <= e_coarse + 1e-12);
    }

    #[test]
    fn guards() {
        let (obs, p) = setup(&[0.2, 0.1, 0.1, 0.1, 0.1, 0.4], &[0.5; 5]);
        assert!(grid_delta_max_slb(&obs, &p, &GridSpec::default()).is_err());
        let (obs, p) = setup(&[0.3, 0.3, 0.4], &[0.5, 0.5]);
        let bad = GridSpec {
            points_per_axis: 1,
            ..GridSpec::default()
        };
        assert!(grid_h0_compatible(&obs, &p, &bad).is_err());
    }

    #[test]
    fn trim_enumeration_matches_examples() {
        assert_eq!(
            enumerate_trim(0.5, 1.0, 100),
            trim_bounds(0.5, 1.0).unwrap()
        );
        let e = enumerate_trim(0.3, 0.5, 100);
        assert!((e.lo() - 0.0).abs() < 1e-12 && (e.hi() - 0.6).abs() < 1e-12);
        let e = enumerate_trim(0.9, 0.5, 100);
        assert!((e.lo() - 0.8).abs() < 1e-12 && (e.hi() - 1.0).abs() < 1e-12);
        assert!(enumerate_trim(0.5, 0.0, 100).is_empty());
    }
}
