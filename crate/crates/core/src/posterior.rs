//! Bayesian uncertainty for the bounds and tests.
//!
//! Each arm's observed law over (survived with `Y=1`, survived with `Y=0`,
//! died) gets an independent Dirichlet prior, so the posterior is Dirichlet
//! with the counts added. Draws that violate monotone survival are
//! discarded; every retained draw is analysed as if it were the true
//! observed law, and the per-draw results are aggregated into posterior
//! probabilities and equal-tailed credible intervals.
//!
//! Draw `i` is generated from its own ChaCha stream selected by `i`, so the
//! draws can be evaluated in any order or in parallel. [`evaluate_draw`] and
//! [`aggregate`] expose the two halves for callers that parallelize.

use alloc::vec;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Dirichlet, Distribution};

use crate::bounds::{marginal_contrast_interval, FeasibleInterval};
use crate::lp::solve_delta_max_slb;
use crate::stepdown::test_global;
use crate::strata::{identify_strata, Contrast, ObservedDistribution, TrialCounts};
use crate::{Error, Result, Tolerances};

/// Per-arm Dirichlet hyperparameters over
/// `(survived Y=1, survived Y=0, died)`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PriorSpec {
    alpha: Vec<[f64; 3]>,
}

impl PriorSpec {
    /// Validates that every hyperparameter is finite and positive.
    pub fn new(alpha: Vec<[f64; 3]>) -> Result<Self> {
        if let Some(z) = alpha
            .iter()
            .position(|a| a.iter().any(|&x| !(x.is_finite() && x > 0.0)))
        {
            return Err(Error::InvalidPrior { z });
        }
        Ok(PriorSpec { alpha })
    }

    /// `Dir(1, 1, 1)` in each of `arms` arms.
    pub fn uniform(arms: usize) -> Self {
        PriorSpec {
            alpha: vec![[1.0; 3]; arms],
        }
    }

    /// Hyperparameters indexed by arm.
    pub fn alpha(&self) -> &[[f64; 3]] {
        &self.alpha
    }
}

/// Settings of a posterior run.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PosteriorConfig {
    /// Number of posterior draws `M`.
    pub n_draws: usize,
    /// Master seed.
    pub seed: u64,
    /// Clinically relevant margin; enables the clinical rejection
    /// probabilities.
    pub delta0: Option<f64>,
    /// Minimal fraction of draws with monotone survival.
    pub retention_floor: f64,
    /// Coverage of the equal-tailed credible intervals.
    pub credible_level: f64,
    /// Numerical slack.
    pub tolerances: Tolerances,
}

impl Default for PosteriorConfig {
    fn default() -> Self {
        PosteriorConfig {
            n_draws: 4000,
            seed: 0,
            delta0: None,
            retention_floor: 0.01,
            credible_level: 0.95,
            tolerances: Tolerances::DEFAULT,
        }
    }
}

/// Posterior of the observed law, ready to produce reproducible draws.
#[derive(Debug, Clone)]
pub struct DrawSampler {
    posteriors: Vec<Dirichlet<f64, 3>>,
    seed: u64,
}

impl DrawSampler {
    /// Posterior `Dir(alpha + n)` for every arm. Subjects whose outcome is
    /// missing are left out.
    pub fn new(counts: &TrialCounts, prior: &PriorSpec, seed: u64) -> Result<Self> {
        let cells: Vec<[u64; 3]> = counts
            .arms()
            .iter()
            .map(|a| [a.survived_y1, a.survived_y0, a.died])
            .collect();
        Self::from_cells(&cells, prior, seed)
    }

    /// Posterior from raw `(survived Y=1, survived Y=0, died)` counts per
    /// arm. Arms may be empty, in which case the draw follows the prior.
    pub fn from_cells(cells: &[[u64; 3]], prior: &PriorSpec, seed: u64) -> Result<Self> {
        if prior.alpha.len() != cells.len() {
            return Err(Error::LengthMismatch {
                what: "prior",
                expected: cells.len(),
                found: prior.alpha.len(),
            });
        }
        let posteriors = cells
            .iter()
            .zip(&prior.alpha)
            .enumerate()
            .map(|(z, (n, a))| {
                let post = [a[0] + n[0] as f64, a[1] + n[1] as f64, a[2] + n[2] as f64];
                Dirichlet::new(post).map_err(|_| Error::InvalidPrior { z })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(DrawSampler { posteriors, seed })
    }

    /// Number of arms.
    pub fn arms(&self) -> usize {
        self.posteriors.len()
    }

    /// Raw cell probabilities of draw `index`, one triple per arm.
    pub fn cells(&self, index: u64) -> Vec<[f64; 3]> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(index);
        self.posteriors.iter().map(|d| d.sample(&mut rng)).collect()
    }

    /// Draw `index` as an observed law. The same `(seed, index)` always
    /// yields the same draw.
    pub fn draw(&self, index: u64) -> ObservedDistribution {
        let cells = self.cells(index);
        let surv: Vec<f64> = cells.iter().map(|c| (c[0] + c[1]).min(1.0)).collect();
        let means = cells
            .iter()
            .map(|c| Some((c[0] / (c[0] + c[1])).clamp(0.0, 1.0)))
            .collect();
        ObservedDistribution::from_parts(surv, means)
    }
}

/// Iterator over posterior draws.
#[derive(Debug, Clone)]
pub struct Draws {
    sampler: DrawSampler,
    next: u64,
    end: u64,
}

impl Iterator for Draws {
    type Item = ObservedDistribution;

    fn next(&mut self) -> Option<Self::Item> {
        if self.next >= self.end {
            return None;
        }
        let d = self.sampler.draw(self.next);
        self.next += 1;
        Some(d)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let n = (self.end - self.next) as usize;
        (n, Some(n))
    }
}

impl ExactSizeIterator for Draws {}

/// The first `n_draws` posterior draws of the observed law.
pub fn sample_posterior(
    counts: &TrialCounts,
    prior: &PriorSpec,
    n_draws: usize,
    seed: u64,
) -> Result<Draws> {
    Ok(Draws {
        sampler: DrawSampler::new(counts, prior, seed)?,
        next: 0,
        end: n_draws as u64,
    })
}

/// Whether survival is nondecreasing in the treatment level (ties allowed).
pub fn filter_monotone(draw: &ObservedDistribution) -> bool {
    draw.survival().windows(2).all(|w| w[0] <= w[1])
}

/// Everything computed from one observed law.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DrawAnalysis {
    /// Whether the law had monotone survival; other fields are only
    /// meaningful when it did.
    pub retained: bool,
    /// Step-down rejection of the global null.
    pub simultaneous_reject: bool,
    /// Stage of the step-down rejection.
    pub reject_stage: Option<usize>,
    /// Some marginal contrast interval excludes zero.
    pub marginal_reject: bool,
    /// Sharp lower bound on the maximal effect.
    pub slb: f64,
    /// Largest marginal lower bound, floored at zero.
    pub mlb: f64,
    /// Marginal interval of every contrast in [`Contrast::all`] order;
    /// `None` when the stratum is empty.
    pub contrasts: Vec<Option<FeasibleInterval>>,
}

impl DrawAnalysis {
    fn discarded() -> Self {
        DrawAnalysis {
            retained: false,
            simultaneous_reject: false,
            reject_stage: None,
            marginal_reject: false,
            slb: 0.0,
            mlb: 0.0,
            contrasts: Vec::new(),
        }
    }
}

/// Runs the step-down test, the sharp lower bound and every marginal
/// contrast interval on one observed law.
pub fn analyze_distribution(obs: &ObservedDistribution, tol: &Tolerances) -> Result<DrawAnalysis> {
    let profile = identify_strata(obs, tol)?;
    let step = test_global(obs, &profile, tol)?;
    let slb = solve_delta_max_slb(obs, &profile, tol)?.value;
    let contrasts = Contrast::all(obs.max_level())
        .iter()
        .map(|c| {
            if profile.is_empty(c.stratum) {
                Ok(None)
            } else {
                marginal_contrast_interval(obs, &profile, c).map(Some)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let defined = || contrasts.iter().flatten();
    let marginal_reject = defined().any(|i| i.excludes_zero(tol.optimization));
    let mlb = defined().map(|i| i.lo().max(0.0)).fold(0.0, f64::max);
    Ok(DrawAnalysis {
        retained: true,
        simultaneous_reject: step.rejected,
        reject_stage: step.reject_stage,
        marginal_reject,
        slb,
        mlb,
        contrasts,
    })
}

/// Generates and analyses draw `index`. Non-monotone draws come back with
/// `retained = false`.
pub fn evaluate_draw(sampler: &DrawSampler, index: u64, tol: &Tolerances) -> Result<DrawAnalysis> {
    let obs = sampler.draw(index);
    if !filter_monotone(&obs) {
        return Ok(DrawAnalysis::discarded());
    }
    analyze_distribution(&obs, tol)
}

/// Equal-tailed credible interval.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CredibleInterval {
    /// Lower quantile.
    pub lo: f64,
    /// Upper quantile.
    pub hi: f64,
}

/// Posterior summary of one contrast's marginal feasible interval.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ContrastSummary {
    /// The contrast.
    pub contrast: Contrast,
    /// Retained draws in which the contrast was defined.
    pub n_defined: usize,
    /// Credible interval for the contrast: the lower quantile of the
    /// interval's lower end and the upper quantile of its upper end.
    pub ci: CredibleInterval,
    /// Credible interval of the lower end.
    pub lower_end_ci: CredibleInterval,
    /// Credible interval of the upper end.
    pub upper_end_ci: CredibleInterval,
    /// Fraction of defined draws whose interval excludes zero.
    pub excludes_zero_prob: f64,
}

/// Rejection probabilities for the clinically relevant null
/// `Delta <= delta0`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ClinicalSummary {
    /// The margin.
    pub delta0: f64,
    /// Fraction of retained draws with the sharp bound above `delta0`.
    pub reject_prob_simultaneous: f64,
    /// Fraction of retained draws with the marginal bound above `delta0`.
    pub reject_prob_marginal: f64,
}

/// Aggregated posterior results.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PosteriorSummary {
    /// Draws generated.
    pub n_drawn: usize,
    /// Draws with monotone survival.
    pub n_retained: usize,
    /// `n_retained / n_drawn`.
    pub retention_rate: f64,
    /// Fraction of retained draws where the step-down test rejects.
    pub reject_prob_simultaneous: f64,
    /// Fraction of retained draws where a marginal interval excludes zero.
    pub reject_prob_marginal: f64,
    /// Number of rejections at each step-down stage.
    pub reject_stage_counts: Vec<usize>,
    /// Credible interval of the sharp lower bound on the maximal effect.
    pub slb_ci: CredibleInterval,
    /// Credible interval of the marginal lower bound.
    pub mlb_ci: CredibleInterval,
    /// Posterior mean of the sharp lower bound.
    pub slb_mean: f64,
    /// Posterior mean of the marginal lower bound.
    pub mlb_mean: f64,
    /// Posterior median of the sharp lower bound.
    pub slb_median: f64,
    /// Posterior median of the marginal lower bound.
    pub mlb_median: f64,
    /// One entry per contrast, in [`Contrast::all`] order.
    pub contrasts: Vec<ContrastSummary>,
    /// Present when a margin was configured.
    pub clinical: Option<ClinicalSummary>,
    /// Coverage of the credible intervals.
    pub credible_level: f64,
}

/// Sample quantile by linear interpolation between order statistics
/// (type 7). `sorted` must be ascending and nonempty.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let h = (sorted.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let i = h as usize;
    match sorted.get(i + 1) {
        Some(&next) => sorted[i] + (h - i as f64) * (next - sorted[i]),
        None => sorted[i],
    }
}

fn credible(values: &mut [f64], level: f64) -> CredibleInterval {
    if values.is_empty() {
        return CredibleInterval {
            lo: f64::NAN,
            hi: f64::NAN,
        };
    }
    values.sort_by(f64::total_cmp);
    let tail = (1.0 - level) / 2.0;
    CredibleInterval {
        lo: quantile(values, tail),
        hi: quantile(values, 1.0 - tail),
    }
}

fn fraction(count: usize, total: usize) -> f64 {
    if total == 0 {
        0.0
    } else {
        count as f64 / total as f64
    }
}

/// Combines per-draw analyses, listed in draw order, into a summary for a
/// trial with highest level `max_level`.
///
/// The result depends only on the multiset of analyses, not on how they
/// were computed.
pub fn aggregate(
    analyses: &[DrawAnalysis],
    max_level: usize,
    config: &PosteriorConfig,
) -> Result<PosteriorSummary> {
    let n_drawn = analyses.len();
    if n_drawn == 0 {
        return Err(Error::NoDraws);
    }
    let kept: Vec<&DrawAnalysis> = analyses.iter().filter(|a| a.retained).collect();
    let n_retained = kept.len();
    let retention_rate = fraction(n_retained, n_drawn);
    if n_retained == 0 || retention_rate < config.retention_floor {
        return Err(Error::RetentionTooLow {
            retained: n_retained,
            drawn: n_drawn,
            floor: config.retention_floor,
        });
    }
    let count = |f: &dyn Fn(&DrawAnalysis) -> bool| kept.iter().filter(|a| f(a)).count();
    let level = config.credible_level;

    let mut reject_stage_counts = vec![0; max_level + 1];
    for a in &kept {
        if let Some(k) = a.reject_stage {
            reject_stage_counts[k] += 1;
        }
    }

    let mut slb: Vec<f64> = kept.iter().map(|a| a.slb).collect();
    let slb_mean = slb.iter().sum::<f64>() / n_retained as f64;
    let mut mlb: Vec<f64> = kept.iter().map(|a| a.mlb).collect();
    let mlb_mean = mlb.iter().sum::<f64>() / n_retained as f64;
    let slb_ci = credible(&mut slb, level);
    let mlb_ci = credible(&mut mlb, level);

    let contrasts = Contrast::all(max_level)
        .into_iter()
        .enumerate()
        .map(|(i, contrast)| {
            let intervals: Vec<FeasibleInterval> = kept
                .iter()
                .filter_map(|a| a.contrasts.get(i).copied().flatten())
                .collect();
            let mut lo: Vec<f64> = intervals.iter().map(|iv| iv.lo()).collect();
            let mut hi: Vec<f64> = intervals.iter().map(|iv| iv.hi()).collect();
            let lower_end_ci = credible(&mut lo, level);
            let upper_end_ci = credible(&mut hi, level);
            let excluding = intervals
                .iter()
                .filter(|iv| iv.excludes_zero(config.tolerances.optimization))
                .count();
            ContrastSummary {
                contrast,
                n_defined: intervals.len(),
                ci: CredibleInterval {
                    lo: lower_end_ci.lo,
                    hi: upper_end_ci.hi,
                },
                lower_end_ci,
                upper_end_ci,
                excludes_zero_prob: fraction(excluding, intervals.len()),
            }
        })
        .collect();

    let clinical = config.delta0.map(|delta0| ClinicalSummary {
        delta0,
        reject_prob_simultaneous: fraction(count(&|a| a.slb > delta0), n_retained),
        reject_prob_marginal: fraction(count(&|a| a.mlb > delta0), n_retained),
    });

    Ok(PosteriorSummary {
        n_drawn,
        n_retained,
        retention_rate,
        reject_prob_simultaneous: fraction(count(&|a| a.simultaneous_reject), n_retained),
        reject_prob_marginal: fraction(count(&|a| a.marginal_reject), n_retained),
        reject_stage_counts,
        slb_mean,
        mlb_mean,
        slb_median: quantile(&slb, 0.5),
        mlb_median: quantile(&mlb, 0.5),
        slb_ci,
        mlb_ci,
        contrasts,
        clinical,
        credible_level: level,
    })
}

/// Draws, filters, analyses and aggregates sequentially.
pub fn summarize_posterior(
    counts: &TrialCounts,
    prior: &PriorSpec,
    config: &PosteriorConfig,
) -> Result<PosteriorSummary> {
    if config.n_draws == 0 {
        return Err(Error::NoDraws);
    }
    let sampler = DrawSampler::new(counts, prior, config.seed)?;
    let analyses = (0..config.n_draws as u64)
        .map(|i| evaluate_draw(&sampler, i, &config.tolerances))
        .collect::<Result<Vec<_>>>()?;
    aggregate(&analyses, counts.max_level(), config)
}
