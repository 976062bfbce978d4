//! Trial data model and identification of principal-stratum proportions.
//!
//! Under monotone survival the only basic principal strata are
//! `D^k L^(m+1-k)` for `k = 0..=m+1`. Stratum `k` survives exactly under the
//! levels `z >= k`, so its members are observed among the survivors of every
//! arm `z >= k` and the survival probability of arm `z` is the cumulative
//! mass of strata `0..=z`.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::{Error, Result, Tolerances};

/// Observed cell counts of one treatment arm.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ArmCounts {
    /// Survivors with `Y = 1`.
    pub survived_y1: u64,
    /// Survivors with `Y = 0`.
    pub survived_y0: u64,
    /// Survivors whose outcome was not recorded.
    #[cfg_attr(feature = "serde", serde(default))]
    pub survived_y_missing: u64,
    /// Subjects with `S = 0`.
    pub died: u64,
}

impl ArmCounts {
    /// Counts with no missing outcomes.
    pub const fn new(survived_y1: u64, survived_y0: u64, died: u64) -> Self {
        ArmCounts {
            survived_y1,
            survived_y0,
            survived_y_missing: 0,
            died,
        }
    }

    /// Sets the number of survivors with a missing outcome.
    pub const fn with_missing(mut self, survived_y_missing: u64) -> Self {
        self.survived_y_missing = survived_y_missing;
        self
    }

    /// Survivors with a recorded outcome.
    pub fn observed_survivors(&self) -> u64 {
        self.survived_y1 + self.survived_y0
    }

    /// All subjects in the arm, including missing outcomes.
    pub fn total(&self) -> u64 {
        self.survived_y1 + self.survived_y0 + self.survived_y_missing + self.died
    }
}

/// Per-arm counts, indexed by treatment level `z = 0..=m`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct TrialCounts {
    arms: Vec<ArmCounts>,
}

impl TrialCounts {
    /// Validates at least two arms, each with at least one subject with a
    /// known survival status and outcome (or death).
    pub fn new(arms: Vec<ArmCounts>) -> Result<Self> {
        if arms.len() < 2 {
            return Err(Error::TooFewArms { found: arms.len() });
        }
        if let Some(z) = arms
            .iter()
            .position(|a| a.survived_y1 + a.survived_y0 + a.died == 0)
        {
            return Err(Error::EmptyArm { z });
        }
        Ok(TrialCounts { arms })
    }

    /// The arms in treatment order.
    pub fn arms(&self) -> &[ArmCounts] {
        &self.arms
    }

    /// Highest treatment level `m`.
    pub fn max_level(&self) -> usize {
        self.arms.len() - 1
    }

    /// Multiplies every cell by `factor` and rounds to the nearest integer.
    ///
    /// Keeps the observed frequencies (approximately) fixed while changing
    /// the sample size.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        let scale = |n: u64| -> u64 {
            let v = n as f64 * factor;
            // round half away from zero without std
            let r = (v + 0.5) as u64;
            if v < 0.0 {
                0
            } else {
                r
            }
        };
        TrialCounts::new(
            self.arms
                .iter()
                .map(|a| ArmCounts {
                    survived_y1: scale(a.survived_y1),
                    survived_y0: scale(a.survived_y0),
                    survived_y_missing: scale(a.survived_y_missing),
                    died: scale(a.died),
                })
                .collect(),
        )
    }
}

/// Identifiable summary of the observed law: survival probabilities and
/// survivor outcome means per arm.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct ObservedDistribution {
    surv: Vec<f64>,
    means: Vec<Option<f64>>,
}

impl ObservedDistribution {
    /// `surv[z] = P(S=1|Z=z)` and `means[z] = P(Y=1|Z=z,S=1)`; a mean may
    /// be `None` only for an arm without survivors.
    pub fn new(surv: Vec<f64>, means: Vec<Option<f64>>) -> Result<Self> {
        if surv.len() < 2 {
            return Err(Error::TooFewArms { found: surv.len() });
        }
        if means.len() != surv.len() {
            return Err(Error::LengthMismatch {
                what: "survivor means",
                expected: surv.len(),
                found: means.len(),
            });
        }
        for (z, (&s, &mean)) in surv.iter().zip(&means).enumerate() {
            check_probability("survival probability", z, s)?;
            match mean {
                Some(v) => check_probability("survivor outcome mean", z, v)?,
                None if s > 0.0 => return Err(Error::MissingMean { z }),
                None => {}
            }
        }
        Ok(ObservedDistribution { surv, means })
    }

    /// Unchecked constructor for values that are valid by construction.
    pub(crate) fn from_parts(surv: Vec<f64>, means: Vec<Option<f64>>) -> Self {
        debug_assert!(surv.len() >= 2 && surv.len() == means.len());
        ObservedDistribution { surv, means }
    }

    /// Builds the observed law implied by stratum proportions
    /// `pi[k] = P(G = D^k L^(m+1-k))`, `k = 0..=m+1`, and survivor means.
    pub fn from_strata(pi: &[f64], means: &[f64]) -> Result<Self> {
        if pi.len() != means.len() + 1 {
            return Err(Error::LengthMismatch {
                what: "stratum proportions",
                expected: means.len() + 1,
                found: pi.len(),
            });
        }
        let mut acc = 0.0;
        let surv: Vec<f64> = pi[..means.len()]
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        ObservedDistribution::new(surv, means.iter().copied().map(Some).collect())
    }

    /// Highest treatment level `m`.
    pub fn max_level(&self) -> usize {
        self.surv.len() - 1
    }

    /// Survival probabilities `P(S=1|Z=z)`.
    pub fn survival(&self) -> &[f64] {
        &self.surv
    }

    /// Survivor outcome means `m(z)`; `None` for arms without survivors.
    pub fn means(&self) -> &[Option<f64>] {
        &self.means
    }

    /// `m(z)`, or 0 for an arm without survivors (it then carries no mass).
    pub fn mean(&self, z: usize) -> f64 {
        self.means[z].unwrap_or(0.0)
    }

    /// Whether survival is nondecreasing in `z` up to `slack`.
    pub fn is_monotone(&self, slack: f64) -> bool {
        self.surv.windows(2).all(|w| w[1] >= w[0] - slack)
    }
}

fn check_probability(what: &'static str, z: usize, value: f64) -> Result<()> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(Error::ProbabilityOutOfRange { what, z, value })
    }
}

/// Reduces counts to survival probabilities and survivor outcome means.
///
/// With `drop_missing`, survivors with a missing outcome are removed from
/// their arm entirely (missing completely at random). Otherwise they stay in
/// the survival numerator and denominator but not in the outcome mean.
pub fn summarize(counts: &TrialCounts, drop_missing: bool) -> Result<ObservedDistribution> {
    let mut surv = Vec::with_capacity(counts.arms.len());
    let mut means = Vec::with_capacity(counts.arms.len());
    for (z, arm) in counts.arms.iter().enumerate() {
        let observed = arm.observed_survivors();
        let (survivors, total) = if drop_missing {
            (observed, observed + arm.died)
        } else {
            (observed + arm.survived_y_missing, arm.total())
        };
        if total == 0 {
            return Err(Error::EmptyArm { z });
        }
        surv.push(survivors as f64 / total as f64);
        means.push((observed > 0).then(|| arm.survived_y1 as f64 / observed as f64));
    }
    // Retained missing outcomes can leave survivors without a mean.
    for (z, (s, m)) in surv.iter().zip(means.iter_mut()).enumerate() {
        if *s > 0.0 && m.is_none() {
            return Err(Error::MissingMean { z });
        }
    }
    ObservedDistribution::new(surv, means)
}

/// Principal-stratum proportions and their conditional versions among the
/// survivors of each arm.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct StrataProfile {
    pi: Vec<f64>,
    /// `conditional[z][g] = P(G=g | Z=z, S=1)` for `g <= z`.
    conditional: Vec<Vec<f64>>,
    empty_slack: f64,
}

impl StrataProfile {
    /// Highest treatment level `m`.
    pub fn max_level(&self) -> usize {
        self.pi.len() - 2
    }

    /// Stratum proportions `pi[k] = P(G = D^k L^(m+1-k))`, `k = 0..=m+1`.
    pub fn proportions(&self) -> &[f64] {
        &self.pi
    }

    /// `P(G=g)`.
    pub fn proportion(&self, g: usize) -> f64 {
        self.pi[g]
    }

    /// `p_g^z = P(G=g | Z=z, S=1)`; zero when `g > z` or arm `z` has no
    /// survivors.
    pub fn conditional(&self, g: usize, z: usize) -> f64 {
        self.conditional[z].get(g).copied().unwrap_or(0.0)
    }

    /// Row `z` of the conditional table, indexed by `g = 0..=z`.
    pub fn conditional_row(&self, z: usize) -> &[f64] {
        &self.conditional[z]
    }

    /// Whether stratum `g` has (numerically) zero mass.
    pub fn is_empty(&self, g: usize) -> bool {
        self.pi[g] <= self.empty_slack
    }

    /// Strata with positive mass among `0..=upto`.
    pub fn nonempty_upto(&self, upto: usize) -> impl Iterator<Item = usize> + '_ {
        (0..=upto).filter(move |&g| !self.is_empty(g))
    }
}

/// Solves the cumulative survival identities for the stratum proportions.
///
/// `pi[0] = surv[0]`, `pi[z] = surv[z] - surv[z-1]`, `pi[m+1] = 1 - surv[m]`.
/// A decrease in survival larger than `tol.identity` is refused; smaller
/// ones are treated as ties (empty strata).
pub fn identify_strata(obs: &ObservedDistribution, tol: &Tolerances) -> Result<StrataProfile> {
    let surv = &obs.surv;
    let m = obs.max_level();
    let mut pi = Vec::with_capacity(m + 2);
    pi.push(surv[0]);
    for z in 1..=m {
        let d = surv[z] - surv[z - 1];
        if d < -tol.identity {
            return Err(Error::MonotonicityViolated {
                z,
                previous: surv[z - 1],
                current: surv[z],
            });
        }
        pi.push(d.max(0.0));
    }
    pi.push(1.0 - surv[m]);

    let conditional = (0..=m)
        .map(|z| {
            if surv[z] > 0.0 {
                pi[..=z].iter().map(|p| p / surv[z]).collect()
            } else {
                alloc::vec![0.0; z + 1]
            }
        })
        .collect();
    Ok(StrataProfile {
        pi,
        conditional,
        empty_slack: tol.identity,
    })
}

/// Name of stratum `k` in a trial with highest level `m`, e.g. `DLL`.
pub fn stratum_label(k: usize, m: usize) -> String {
    let mut s = String::with_capacity(m + 1);
    (0..=m).for_each(|z| s.push(if z < k { 'D' } else { 'L' }));
    s
}

/// A within-stratum comparison `mu_g^high - mu_g^low`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Contrast {
    /// Stratum index `k`.
    pub stratum: usize,
    /// Higher treatment level `z1`.
    pub high: usize,
    /// Lower treatment level `z2`.
    pub low: usize,
}

impl Contrast {
    /// Checks `m >= high > low >= stratum`.
    pub fn new(stratum: usize, high: usize, low: usize, max_level: usize) -> Result<Self> {
        if high <= low || low < stratum || high > max_level {
            return Err(Error::IllDefinedContrast {
                stratum,
                high,
                low,
                max_level,
            });
        }
        Ok(Contrast { stratum, high, low })
    }

    /// Display helper that knows `m`.
    pub fn display(&self, max_level: usize) -> ContrastDisplay {
        ContrastDisplay {
            contrast: *self,
            max_level,
        }
    }

    /// Every well-defined strict contrast for highest level `m`, ordered by
    /// stratum, then higher level, then lower level.
    pub fn all(max_level: usize) -> Vec<Contrast> {
        let mut out = Vec::new();
        for stratum in 0..max_level {
            for high in stratum + 1..=max_level {
                for low in stratum..high {
                    out.push(Contrast { stratum, high, low });
                }
            }
        }
        out
    }
}

/// `(LLL;2,1)` style rendering of a [`Contrast`].
pub struct ContrastDisplay {
    contrast: Contrast,
    max_level: usize,
}

impl fmt::Display for ContrastDisplay {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = self.contrast;
        write!(
            f,
            "({};{},{})",
            stratum_label(c.stratum, self.max_level),
            c.high,
            c.low
        )
    }
}

/// All well-defined strict contrasts whose stratum has positive mass.
pub fn enumerate_contrasts(profile: &StrataProfile) -> Vec<Contrast> {
    Contrast::all(profile.max_level())
        .into_iter()
        .filter(|c| !profile.is_empty(c.stratum))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn summarize_hvtn_cd4_200_control_arm() {
        let counts = TrialCounts::new(vec![
            ArmCounts::new(29, 4, 363).with_missing(4),
            ArmCounts::new(16, 0, 94).with_missing(2),
        ])
        .unwrap();
        let obs = summarize(&counts, true).unwrap();
        assert!(close(obs.survival()[0], 33.0 / 396.0, 1e-15));
        assert!(close(obs.mean(0), 29.0 / 33.0, 1e-15));
        assert!(close(obs.survival()[0], 0.083333, 1e-6));
        assert!(close(obs.mean(0), 0.878788, 1e-6));

        let kept = summarize(&counts, false).unwrap();
        assert!(close(kept.survival()[0], 37.0 / 400.0, 1e-15));
        assert!(close(kept.mean(0), 29.0 / 33.0, 1e-15));
    }

    #[test]
    fn summarize_degenerate_arms() {
        let counts =
            TrialCounts::new(vec![ArmCounts::new(0, 5, 5), ArmCounts::new(5, 0, 0)]).unwrap();
        let obs = summarize(&counts, true).unwrap();
        assert_eq!(obs.survival(), &[0.5, 1.0]);
        assert_eq!(obs.means(), &[Some(0.0), Some(1.0)]);
    }

    #[test]
    fn arm_without_survivors_has_undefined_mean() {
        let counts =
            TrialCounts::new(vec![ArmCounts::new(0, 0, 5), ArmCounts::new(1, 1, 3)]).unwrap();
        let obs = summarize(&counts, true).unwrap();
        assert_eq!(obs.means()[0], None);
        assert_eq!(obs.survival()[0], 0.0);
    }

    #[test]
    fn counts_validation() {
        assert_eq!(
            TrialCounts::new(vec![ArmCounts::new(1, 1, 1)]),
            Err(Error::TooFewArms { found: 1 })
        );
        assert_eq!(
            TrialCounts::new(vec![
                ArmCounts::new(1, 1, 1),
                ArmCounts::default().with_missing(3)
            ]),
            Err(Error::EmptyArm { z: 1 })
        );
    }

    #[test]
    fn identify_masked_effect_profile() {
        let obs =
            ObservedDistribution::from_strata(&[0.3, 0.3, 0.3, 0.1], &[0.3, 0.0, 0.5]).unwrap();
        let p = identify_strata(&obs, &Tolerances::DEFAULT).unwrap();
        for (got, want) in p.proportions().iter().zip([0.3, 0.3, 0.3, 0.1]) {
            assert!(close(*got, want, 1e-12));
        }
        assert!(close(p.conditional(0, 1), 0.5, 1e-12));
        for g in 0..3 {
            assert!(close(p.conditional(g, 2), 1.0 / 3.0, 1e-12));
        }
        assert_eq!(p.conditional(2, 1), 0.0);
    }

    #[test]
    fn identify_no_deaths() {
        let obs = ObservedDistribution::new(vec![1.0, 1.0], vec![Some(0.4), Some(0.4)]).unwrap();
        let p = identify_strata(&obs, &Tolerances::DEFAULT).unwrap();
        assert_eq!(p.proportions(), &[1.0, 0.0, 0.0]);
        assert!(p.is_empty(1) && p.is_empty(2));
    }

    #[test]
    fn identify_hvtn_cd4_200() {
        let obs = ObservedDistribution::new(
            vec![33.0 / 396.0, 16.0 / 110.0, 44.0 / 287.0],
            vec![Some(29.0 / 33.0), Some(1.0), Some(1.0)],
        )
        .unwrap();
        let p = identify_strata(&obs, &Tolerances::DEFAULT).unwrap();
        for (got, want) in p
            .proportions()
            .iter()
            .zip([0.083333, 0.062121, 0.007856, 0.846690])
        {
            assert!(close(*got, want, 1e-6), "{got} vs {want}");
        }
    }

    #[test]
    fn identify_refuses_decreasing_survival() {
        let obs = ObservedDistribution::new(vec![0.5, 0.4], vec![Some(0.1), Some(0.1)]).unwrap();
        let err = identify_strata(&obs, &Tolerances::DEFAULT).unwrap_err();
        assert!(matches!(err, Error::MonotonicityViolated { z: 1, .. }));
        assert!(alloc::format!("{err}").starts_with("monotonicity violated"));
    }

    #[test]
    fn contrasts_three_arms() {
        let obs =
            ObservedDistribution::from_strata(&[0.3, 0.3, 0.3, 0.1], &[0.3, 0.0, 0.5]).unwrap();
        let p = identify_strata(&obs, &Tolerances::DEFAULT).unwrap();
        let labels: Vec<String> = enumerate_contrasts(&p)
            .iter()
            .map(|c| alloc::format!("{}", c.display(2)))
            .collect();
        assert_eq!(labels, ["(LLL;1,0)", "(LLL;2,0)", "(LLL;2,1)", "(DLL;2,1)"]);
    }

    #[test]
    fn contrasts_two_arms_and_empty_stratum() {
        let obs = ObservedDistribution::new(vec![0.5, 0.7], vec![Some(0.1), Some(0.2)]).unwrap();
        let p = identify_strata(&obs, &Tolerances::DEFAULT).unwrap();
        assert_eq!(
            enumerate_contrasts(&p),
            vec![Contrast {
                stratum: 0,
                high: 1,
                low: 0
            }]
        );

        let obs =
            ObservedDistribution::from_strata(&[0.3, 0.0, 0.3, 0.4], &[0.3, 0.3, 0.5]).unwrap();
        let p = identify_strata(&obs, &Tolerances::DEFAULT).unwrap();
        let c = enumerate_contrasts(&p);
        assert_eq!(c.len(), 3);
        assert!(c.iter().all(|c| c.stratum == 0));
    }

    #[test]
    fn labels() {
        assert_eq!(stratum_label(0, 2), "LLL");
        assert_eq!(stratum_label(1, 2), "DLL");
        assert_eq!(stratum_label(3, 2), "DDD");
        assert!(Contrast::new(1, 1, 0, 2).is_err());
        assert!(Contrast::new(0, 3, 0, 2).is_err());
    }

    #[test]
    fn scaling_preserves_frequencies() {
        let counts =
            TrialCounts::new(vec![ArmCounts::new(29, 4, 363), ArmCounts::new(16, 0, 94)]).unwrap();
        let big = counts.scaled(2.0).unwrap();
        assert_eq!(big.arms()[0], ArmCounts::new(58, 8, 726));
    }
}

#[cfg(test)]
mod proptests {
    use super::*;
    use alloc::vec::Vec;
    use proptest::prelude::*;

    fn monotone_surv() -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(0.0f64..1.0, 2..7).prop_map(|mut v| {
            v.sort_by(f64::total_cmp);
            v
        })
    }

    proptest! {
        #[test]
        fn cumulative_proportions_reproduce_survival(surv in monotone_surv()) {
            let means = surv.iter().map(|_| Some(0.5)).collect();
            let obs = ObservedDistribution::new(surv.clone(), means).unwrap();
            let p = identify_strata(&obs, &Tolerances::DEFAULT).unwrap();
            let mut acc = 0.0;
            for (z, s) in surv.iter().enumerate() {
                acc += p.proportion(z);
                prop_assert!((acc - s).abs() <= 1e-12);
            }
            let total: f64 = p.proportions().iter().sum();
            prop_assert!((total - 1.0).abs() <= 1e-12);
            prop_assert!(p.proportions().iter().all(|&x| x >= 0.0));
            for (z, s) in surv.iter().enumerate() {
                if *s > 0.0 {
                    let row: f64 = p.conditional_row(z).iter().sum();
                    prop_assert!((row - 1.0).abs() <= 1e-12);
                    for g in 0..=z {
                        prop_assert!((p.conditional(g, z) - p.proportion(g) / s).abs() <= 1e-12);
                    }
                }
            }
        }

        #[test]
        fn decreasing_survival_always_errors(
            mut surv in monotone_surv(),
            drop in 1e-6f64..0.5,
            at in 0usize..6,
        ) {
            let z = 1 + at % (surv.len() - 1);
            surv[z] = (surv[z - 1] - drop).max(0.0);
            prop_assume!(surv[z] < surv[z - 1] - 1e-12);
            let means = surv.iter().map(|_| Some(0.5)).collect();
            let obs = ObservedDistribution::new(surv, means).unwrap();
            prop_assert!(identify_strata(&obs, &Tolerances::DEFAULT).is_err());
        }
    }
}
