//! Trimming bounds for Bernoulli mixtures.
//!
//! If a Bernoulli law with mean `p` is a mixture in which a subgroup holds a
//! fraction `omega` of the mass, the subgroup mean ranges over
//! `[max(0, (p - (1 - omega)) / omega), min(1, p / omega)]`: the lower end
//! keeps the lowest `omega` quantile of the outcome, the upper end the
//! highest.

use crate::strata::{Contrast, ObservedDistribution, StrataProfile};
use crate::{Error, Result, Tolerances};

/// A closed interval, possibly empty or a single point.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FeasibleInterval {
    lo: f64,
    hi: f64,
    empty: bool,
}

impl FeasibleInterval {
    /// The empty set.
    pub const EMPTY: FeasibleInterval = FeasibleInterval {
        lo: f64::NAN,
        hi: f64::NAN,
        empty: true,
    };

    /// `[lo, hi]`, or the empty set when `lo > hi`.
    pub fn new(lo: f64, hi: f64) -> Self {
        if lo <= hi {
            FeasibleInterval {
                lo,
                hi,
                empty: false,
            }
        } else {
            Self::EMPTY
        }
    }

    /// The singleton `{v}`.
    pub fn point(v: f64) -> Self {
        Self::new(v, v)
    }

    /// Lower end (NaN when empty).
    pub fn lo(&self) -> f64 {
        self.lo
    }

    /// Upper end (NaN when empty).
    pub fn hi(&self) -> f64 {
        self.hi
    }

    /// Whether the interval holds no point.
    pub fn is_empty(&self) -> bool {
        self.empty
    }

    /// Whether the interval is a single point.
    pub fn is_point(&self) -> bool {
        !self.empty && self.lo == self.hi
    }

    /// Membership with `slack` on both ends.
    pub fn contains(&self, v: f64, slack: f64) -> bool {
        !self.empty && v >= self.lo - slack && v <= self.hi + slack
    }

    /// Set intersection.
    pub fn intersect(&self, other: &FeasibleInterval) -> FeasibleInterval {
        if self.empty || other.empty {
            return Self::EMPTY;
        }
        Self::new(self.lo.max(other.lo), self.hi.min(other.hi))
    }

    /// Whether `0` lies outside the interval by more than `slack`.
    pub fn excludes_zero(&self, slack: f64) -> bool {
        !self.contains(0.0, slack)
    }
}

/// Mean of the coarsened group's outcome law together with the fraction of
/// that group taken up by the target stratum.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CoarsenedMean {
    /// Bernoulli mean of the coarsened group, clamped to `[0, 1]`.
    pub value: f64,
    /// Trimming fraction of the target stratum within the group.
    pub weight: f64,
}

/// Outcome of [`coarsened_mean`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Coarsening {
    /// A well-defined group mean.
    Mean(CoarsenedMean),
    /// The coarsened group has no mass.
    EmptyGroup,
    /// The residual mean falls outside `[0, 1]`: the supplied lower-stratum
    /// means are incompatible with the observed law.
    Incompatible {
        /// Unclamped residual mean.
        value: f64,
    },
}

/// Sharp range of the mean of a subgroup holding fraction `omega` of a
/// Bernoulli(`p`) population.
pub fn trim_bounds(p: f64, omega: f64) -> Result<FeasibleInterval> {
    if !(omega > 0.0 && omega <= 1.0) {
        return Err(Error::EmptySubgroup { omega });
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::MeanOutOfRange { value: p });
    }
    let lo = ((p - (1.0 - omega)) / omega).max(0.0);
    let hi = (p / omega).min(1.0);
    // Rounding can invert a degenerate interval by an ulp.
    Ok(FeasibleInterval::new(lo.min(hi), hi))
}

/// Mean of the survivors of arm `z` that belong to strata `l..=z`, once the
/// contribution of the lower strata `0..l` is removed using their means
/// `lower_means[g]` (`None` for empty strata), together with the fraction
/// `omega` of that group taken up by stratum `l`.
///
/// Residual means within `tol.optimization` of `[0, 1]` are clamped.
pub fn coarsened_mean(
    obs: &ObservedDistribution,
    profile: &StrataProfile,
    z: usize,
    l: usize,
    lower_means: &[Option<f64>],
    tol: &Tolerances,
) -> Coarsening {
    debug_assert!(l <= z && z <= obs.max_level());
    let row = profile.conditional_row(z);
    let group_mass: f64 = row[l..=z].iter().sum();
    if group_mass <= tol.identity {
        return Coarsening::EmptyGroup;
    }
    let explained: f64 = (0..l)
        .filter_map(|g| lower_means.get(g).copied().flatten().map(|mu| row[g] * mu))
        .sum();
    let value = (obs.mean(z) - explained) / group_mass;
    if value < -tol.optimization || value > 1.0 + tol.optimization {
        return Coarsening::Incompatible { value };
    }
    Coarsening::Mean(CoarsenedMean {
        value: value.clamp(0.0, 1.0),
        weight: (row[l] / group_mass).min(1.0),
    })
}

fn check_defined(profile: &StrataProfile, g: usize, z: usize) -> Result<()> {
    let m = profile.max_level();
    if z > m || g > z {
        return Err(Error::IllDefinedContrast {
            stratum: g,
            high: z,
            low: z,
            max_level: m,
        });
    }
    if profile.is_empty(g) {
        return Err(Error::EmptyStratum { stratum: g });
    }
    Ok(())
}

/// Sharp marginal feasible region of `mu_g^z`, using only the observed law
/// of arm `z`.
pub fn marginal_mu_interval(
    obs: &ObservedDistribution,
    profile: &StrataProfile,
    g: usize,
    z: usize,
) -> Result<FeasibleInterval> {
    check_defined(profile, g, z)?;
    trim_bounds(obs.mean(z), profile.conditional(g, z).min(1.0))
}

/// Sharp marginal feasible region of `mu_g^high - mu_g^low`, clipped to
/// `[-1, 1]`.
pub fn marginal_contrast_interval(
    obs: &ObservedDistribution,
    profile: &StrataProfile,
    c: &Contrast,
) -> Result<FeasibleInterval> {
    Contrast::new(c.stratum, c.high, c.low, profile.max_level())?;
    let high = marginal_mu_interval(obs, profile, c.stratum, c.high)?;
    let low = marginal_mu_interval(obs, profile, c.stratum, c.low)?;
    Ok(FeasibleInterval::new(
        (high.lo() - low.hi()).max(-1.0),
        (high.hi() - low.lo()).min(1.0),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::strata::identify_strata;
    use alloc::vec;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    fn masked_effect() -> (ObservedDistribution, StrataProfile) {
        let obs =
            ObservedDistribution::from_strata(&[0.3, 0.3, 0.3, 0.1], &[0.3, 0.0, 0.5]).unwrap();
        let p = identify_strata(&obs, &Tolerances::DEFAULT).unwrap();
        (obs, p)
    }

    #[test]
    fn trim_examples() {
        assert_eq!(trim_bounds(0.5, 1.0).unwrap(), FeasibleInterval::point(0.5));
        assert_eq!(trim_bounds(0.0, 0.5).unwrap(), FeasibleInterval::point(0.0));
        assert_eq!(
            trim_bounds(0.5, 1.0 / 3.0).unwrap(),
            FeasibleInterval::new(0.0, 1.0)
        );
        assert!(matches!(
            trim_bounds(0.5, 0.0),
            Err(Error::EmptySubgroup { .. })
        ));
        assert!(trim_bounds(1.5, 0.5).is_err());
    }

    #[test]
    fn interval_algebra() {
        let a = FeasibleInterval::new(0.0, 0.5);
        let b = FeasibleInterval::new(0.4, 1.0);
        assert_eq!(a.intersect(&b), FeasibleInterval::new(0.4, 0.5));
        assert!(a.intersect(&FeasibleInterval::point(0.7)).is_empty());
        assert!(FeasibleInterval::new(1.0, 0.0).is_empty());
        assert!(FeasibleInterval::EMPTY.excludes_zero(0.0));
        assert!(FeasibleInterval::point(1e-10).contains(0.0, 1e-9));
    }

    #[test]
    fn coarsened_mean_masked_effect() {
        let (obs, p) = masked_effect();
        let tol = Tolerances::DEFAULT;
        match coarsened_mean(&obs, &p, 1, 0, &[], &tol) {
            Coarsening::Mean(c) => {
                assert_eq!(c.value, 0.0);
                assert!(close(c.weight, 0.5, 1e-12));
            }
            other => panic!("{other:?}"),
        }
        match coarsened_mean(&obs, &p, 2, 1, &[Some(0.0)], &tol) {
            Coarsening::Mean(c) => {
                assert!(close(c.value, 0.75, 1e-12));
                assert!(close(c.weight, 0.5, 1e-12));
            }
            other => panic!("{other:?}"),
        }
        match coarsened_mean(&obs, &p, 0, 0, &[], &tol) {
            Coarsening::Mean(c) => {
                assert_eq!(c.weight, 1.0);
                assert!(close(c.value, 0.3, 1e-15));
            }
            other => panic!("{other:?}"),
        }
        // mu_LLL = 0.3 leaves -0.3 for DLL at level 1.
        assert!(matches!(
            coarsened_mean(&obs, &p, 1, 1, &[Some(0.3)], &tol),
            Coarsening::Incompatible { value } if close(value, -0.3, 1e-12)
        ));
    }

    #[test]
    fn coarsened_mean_empty_group() {
        let obs = ObservedDistribution::from_strata(&[0.5, 0.0, 0.5], &[0.2, 0.2]).unwrap();
        let p = identify_strata(&obs, &Tolerances::DEFAULT).unwrap();
        assert_eq!(
            coarsened_mean(&obs, &p, 1, 1, &[Some(0.2)], &Tolerances::DEFAULT),
            Coarsening::EmptyGroup
        );
    }

    #[test]
    fn marginal_mu_masked_effect() {
        let (obs, p) = masked_effect();
        let i = marginal_mu_interval(&obs, &p, 0, 2).unwrap();
        assert!(close(i.lo(), 0.0, 1e-12) && close(i.hi(), 1.0, 1e-12));
        let i = marginal_mu_interval(&obs, &p, 0, 0).unwrap();
        assert!(i.is_point() && close(i.lo(), 0.3, 1e-15));
        assert!(marginal_mu_interval(&obs, &p, 1, 0).is_err());
    }

    #[test]
    fn marginal_whole_population() {
        let obs = ObservedDistribution::new(vec![1.0, 1.0], vec![Some(0.4), Some(0.6)]).unwrap();
        let p = identify_strata(&obs, &Tolerances::DEFAULT).unwrap();
        assert_eq!(
            marginal_mu_interval(&obs, &p, 0, 1).unwrap(),
            FeasibleInterval::point(0.6)
        );
        assert!(matches!(
            marginal_mu_interval(&obs, &p, 1, 1),
            Err(Error::EmptyStratum { stratum: 1 })
        ));
    }

    #[test]
    fn marginal_contrasts_masked_effect() {
        let (obs, p) = masked_effect();
        for c in [
            Contrast {
                stratum: 0,
                high: 2,
                low: 1,
            },
            Contrast {
                stratum: 1,
                high: 2,
                low: 1,
            },
        ] {
            let i = marginal_contrast_interval(&obs, &p, &c).unwrap();
            assert!(
                close(i.lo(), 0.0, 1e-9) && close(i.hi(), 1.0, 1e-9),
                "{i:?}"
            );
        }
    }

    #[test]
    fn marginal_contrast_identical_arms() {
        let obs = ObservedDistribution::new(vec![1.0, 1.0], vec![Some(0.4), Some(0.4)]).unwrap();
        let p = identify_strata(&obs, &Tolerances::DEFAULT).unwrap();
        let c = Contrast {
            stratum: 0,
            high: 1,
            low: 0,
        };
        assert_eq!(
            marginal_contrast_interval(&obs, &p, &c).unwrap(),
            FeasibleInterval::point(0.0)
        );
    }
}
