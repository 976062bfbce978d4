//! Sharp step-down test of the global null of no effect in any basic
//! principal stratum.
//!
//! Stage `k` targets stratum `D^k L^(m+1-k)`. Under the equalities imposed
//! at the earlier stages the means of strata `0..k` are identified, which in
//! turn identifies the stage-`k` stratum mean at its lowest level `k`. The
//! stage passes when that value lies in the feasible region `B_kz` of the
//! stratum mean at every higher level `z`; otherwise the null is rejected at
//! `k`. A passed stage imposes equality of the stratum mean across levels
//! and moves on.

use alloc::vec;
use alloc::vec::Vec;

use crate::bounds::{coarsened_mean, trim_bounds, Coarsening, FeasibleInterval};
use crate::strata::{ObservedDistribution, StrataProfile};
use crate::{Error, Result, Tolerances};

/// A stratum mean identified under the working equalities.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct IdentifiedMean {
    /// Stratum index.
    pub stratum: usize,
    /// Identified value, unclamped.
    pub value: f64,
    /// Whether `value` lies in `[0, 1]` up to the optimization slack.
    pub in_range: bool,
}

/// Feasible region `B_kz` of the stage-`k` stratum mean at level `z`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct StageInterval {
    /// Treatment level `z`.
    pub level: usize,
    /// The region; empty when the working equalities are incompatible.
    pub interval: FeasibleInterval,
}

/// Audit record of one stage.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct StageRecord {
    /// Stage index `k`.
    pub stage: usize,
    /// `true` when the target stratum is empty and the stage was vacuous.
    pub skipped: bool,
    /// `B_kz` for `z = k..=m` (empty when skipped).
    pub intervals: Vec<StageInterval>,
}

/// Output of [`test_global`].
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct StepDownResult {
    /// Whether the global null is incompatible with the observed law.
    pub rejected: bool,
    /// Stage at which the intersection came out empty.
    pub reject_stage: Option<usize>,
    /// Means identified by the accumulated working equalities, indexed by
    /// stratum; `None` for empty strata and strata never reached.
    pub identified_mu: Vec<Option<f64>>,
    /// Every stage that was evaluated.
    pub stages: Vec<StageRecord>,
}

fn identified_value(
    obs: &ObservedDistribution,
    profile: &StrataProfile,
    k: usize,
    lower: &[Option<f64>],
) -> Option<f64> {
    if profile.is_empty(k) {
        return None;
    }
    let row = profile.conditional_row(k);
    let explained: f64 = (0..k).filter_map(|g| lower[g].map(|mu| row[g] * mu)).sum();
    Some((obs.mean(k) - explained) / row[k])
}

/// Stratum means of strata `0..=k` identified when every stratum below `k`
/// is assumed to have equal means across levels.
///
/// Each value solves `m(j) = sum_{g < j} p_g^j mu_g + p_j^j mu_j` in turn.
/// Values outside `[0, 1]` are returned unclamped with `in_range = false`;
/// later strata are solved with them as they are. Empty strata are skipped.
pub fn identify_mu_chain(
    obs: &ObservedDistribution,
    profile: &StrataProfile,
    k: usize,
    tol: &Tolerances,
) -> Vec<IdentifiedMean> {
    let m = obs.max_level();
    let mut means: Vec<Option<f64>> = vec![None; m + 1];
    let mut out = Vec::new();
    for j in 0..=k.min(m) {
        if let Some(value) = identified_value(obs, profile, j, &means) {
            means[j] = Some(value);
            out.push(IdentifiedMean {
                stratum: j,
                value,
                in_range: (-tol.optimization..=1.0 + tol.optimization).contains(&value),
            });
        }
    }
    out
}

/// Feasible regions `B_kz`, `z = k..=m`, of the stage-`k` stratum mean given
/// the means `lower_means[g]` of the strata below `k`.
///
/// `B_kk` is the single identified value. Returns an empty list when the
/// target stratum is empty.
pub fn stage_intervals(
    obs: &ObservedDistribution,
    profile: &StrataProfile,
    k: usize,
    lower_means: &[Option<f64>],
    tol: &Tolerances,
) -> Vec<StageInterval> {
    let m = obs.max_level();
    if k > m || profile.is_empty(k) {
        return Vec::new();
    }
    (k..=m)
        .map(|z| {
            let interval = match coarsened_mean(obs, profile, z, k, lower_means, tol) {
                Coarsening::Mean(c) if z == k => FeasibleInterval::point(c.value),
                Coarsening::Mean(c) => {
                    trim_bounds(c.value, c.weight).unwrap_or(FeasibleInterval::EMPTY)
                }
                Coarsening::Incompatible { .. } => FeasibleInterval::EMPTY,
                // Unreachable with a nonempty target stratum.
                Coarsening::EmptyGroup => FeasibleInterval::new(0.0, 1.0),
            };
            StageInterval { level: z, interval }
        })
        .collect()
}

/// Runs the step-down test on a known observed law.
///
/// Because `B_kk` is a single point, the stage intersection is non-empty
/// exactly when that point lies in every `B_kz` (up to
/// `tol.optimization`).
pub fn test_global(
    obs: &ObservedDistribution,
    profile: &StrataProfile,
    tol: &Tolerances,
) -> Result<StepDownResult> {
    let m = obs.max_level();
    if let Some(z) = (1..=m).find(|&z| obs.survival()[z] < obs.survival()[z - 1] - tol.identity) {
        return Err(Error::MonotonicityViolated {
            z,
            previous: obs.survival()[z - 1],
            current: obs.survival()[z],
        });
    }
    let mut identified: Vec<Option<f64>> = vec![None; m + 1];
    let mut stages = Vec::with_capacity(m + 1);
    for k in 0..=m {
        let intervals = stage_intervals(obs, profile, k, &identified, tol);
        if intervals.is_empty() {
            stages.push(StageRecord {
                stage: k,
                skipped: true,
                intervals,
            });
            continue;
        }
        let anchor = intervals[0].interval;
        let compatible = !anchor.is_empty()
            && intervals[1..]
                .iter()
                .all(|b| b.interval.contains(anchor.lo(), tol.optimization));
        stages.push(StageRecord {
            stage: k,
            skipped: false,
            intervals,
        });
        if !compatible {
            return Ok(StepDownResult {
                rejected: true,
                reject_stage: Some(k),
                identified_mu: identified,
                stages,
            });
        }
        identified[k] = Some(anchor.lo());
    }
    Ok(StepDownResult {
        rejected: false,
        reject_stage: None,
        identified_mu: identified,
        stages,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::strata::identify_strata;
    use alloc::vec;

    const TOL: Tolerances = Tolerances::DEFAULT;

    fn setup(pi: &[f64], means: &[f64]) -> (ObservedDistribution, StrataProfile) {
        let obs = ObservedDistribution::from_strata(pi, means).unwrap();
        let p = identify_strata(&obs, &TOL).unwrap();
        (obs, p)
    }

    #[test]
    fn masked_effect_rejects_at_stage_zero() {
        let (obs, p) = setup(&[0.3, 0.3, 0.3, 0.1], &[0.3, 0.0, 0.5]);
        let intervals = stage_intervals(&obs, &p, 0, &[], &TOL);
        assert_eq!(intervals[0].interval, FeasibleInterval::point(0.3));
        assert_eq!(intervals[1].interval, FeasibleInterval::point(0.0));
        let r = test_global(&obs, &p, &TOL).unwrap();
        assert!(r.rejected);
        assert_eq!(r.reject_stage, Some(0));
        assert_eq!(r.stages.len(), 1);
    }

    #[test]
    fn masked_effect_chain_goes_negative() {
        let (obs, p) = setup(&[0.3, 0.3, 0.3, 0.1], &[0.3, 0.0, 0.5]);
        let chain = identify_mu_chain(&obs, &p, 1, &TOL);
        assert_eq!(chain.len(), 2);
        assert!((chain[0].value - 0.3).abs() < 1e-15 && chain[0].in_range);
        assert!((chain[1].value + 0.3).abs() < 1e-12);
        assert!(!chain[1].in_range);
    }

    #[test]
    fn trivial_data_fails_to_reject() {
        let (obs, p) = setup(&[1.0, 0.0, 0.0], &[0.4, 0.4]);
        let r = test_global(&obs, &p, &TOL).unwrap();
        assert!(!r.rejected);
        assert_eq!(r.identified_mu[0], Some(0.4));
        assert!(r.stages[1].skipped);

        let chain = identify_mu_chain(&obs, &p, 1, &TOL);
        assert_eq!(chain.len(), 1);
        assert_eq!(chain[0].value, 0.4);
    }

    #[test]
    fn stage_zero_anchor_is_control_mean() {
        let (obs, p) = setup(&[0.2, 0.1, 0.3, 0.4], &[0.65, 0.1, 0.9]);
        let b = stage_intervals(&obs, &p, 0, &[], &TOL);
        assert_eq!(b[0].interval, FeasibleInterval::point(0.65));
        assert_eq!(b.len(), 3);
    }

    #[test]
    fn empty_target_stratum_is_skipped() {
        let (obs, p) = setup(&[0.3, 0.0, 0.3, 0.4], &[0.3, 0.3, 0.5]);
        assert!(stage_intervals(&obs, &p, 1, &[Some(0.3)], &TOL).is_empty());
        let r = test_global(&obs, &p, &TOL).unwrap();
        assert!(r.stages[1].skipped);
    }

    #[test]
    fn hvtn_cd4_200_point_estimate_rejects() {
        let obs = ObservedDistribution::new(
            vec![33.0 / 396.0, 16.0 / 110.0, 44.0 / 287.0],
            vec![Some(29.0 / 33.0), Some(1.0), Some(1.0)],
        )
        .unwrap();
        let p = identify_strata(&obs, &TOL).unwrap();
        let chain = identify_mu_chain(&obs, &p, 0, &TOL);
        assert!((chain[0].value - 0.878788).abs() < 1e-6);
        let r = test_global(&obs, &p, &TOL).unwrap();
        assert_eq!(r.reject_stage, Some(0));
        assert_eq!(
            r.stages[0].intervals[1].interval,
            FeasibleInterval::point(1.0)
        );
    }

    #[test]
    fn three_arm_rejection_at_second_stage() {
        // The hypothetical three-arm study with n1 = 36 as a known distribution.
        let (obs, p) = setup(&[0.1, 0.1, 0.1, 0.7], &[0.9, 0.7, 0.9]);
        let r = test_global(&obs, &p, &TOL).unwrap();
        assert_eq!(r.reject_stage, Some(1));
        let b12 = r.stages[1].intervals[1].interval;
        assert!((b12.lo() - 0.8).abs() < 1e-12 && (b12.hi() - 1.0).abs() < 1e-12);
        assert!((r.stages[1].intervals[0].interval.lo() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn non_monotone_input_errors() {
        let obs = ObservedDistribution::new(vec![0.5, 0.4], vec![Some(0.1), Some(0.1)]).unwrap();
        let p = identify_strata(
            &ObservedDistribution::new(vec![0.4, 0.5], vec![Some(0.1), Some(0.1)]).unwrap(),
            &TOL,
        )
        .unwrap();
        assert!(test_global(&obs, &p, &TOL).is_err());
    }

    #[test]
    fn deterministic() {
        let (obs, p) = setup(&[0.25, 0.15, 0.2, 0.4], &[0.35, 0.6, 0.55]);
        let a = test_global(&obs, &p, &TOL).unwrap();
        let b = test_global(&obs, &p, &TOL).unwrap();
        assert_eq!(a, b);
    }
}
