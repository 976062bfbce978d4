//! Embedded datasets used by the `reproduce` commands.
//!
//! The HVTN 503 counts are per arm (placebo, one injection, two or more
//! injections): infected survivors whose median CD4 count stayed above the
//! threshold, fell below it, or was not measured, and trial participants
//! who were not infected ("died" in the truncation-by-death framing).

use clap::ValueEnum;
use strata_bounds_core::{ArmCounts, TrialCounts};

use crate::error::{CliError, Result};

/// Embedded dataset names.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Dataset {
    /// HVTN 503, outcome median CD4 > 350 cells/mm^3.
    #[value(name = "hvtn503-cd4-350")]
    Hvtn503Cd4_350,
    /// HVTN 503, outcome median CD4 > 200 cells/mm^3.
    #[value(name = "hvtn503-cd4-200")]
    Hvtn503Cd4_200,
    /// Hypothetical three-arm study parametrized by `n1`.
    #[value(name = "sim")]
    Sim,
}

impl Dataset {
    pub fn name(self) -> &'static str {
        match self {
            Dataset::Hvtn503Cd4_350 => "hvtn503-cd4-350",
            Dataset::Hvtn503Cd4_200 => "hvtn503-cd4-200",
            Dataset::Sim => "sim",
        }
    }

    /// Counts of the dataset; `n1` is required for `sim`.
    pub fn counts(self, n1: Option<u64>) -> Result<TrialCounts> {
        match self {
            Dataset::Hvtn503Cd4_350 => Ok(hvtn503_cd4_350()),
            Dataset::Hvtn503Cd4_200 => Ok(hvtn503_cd4_200()),
            Dataset::Sim => {
                let n1 = n1.ok_or_else(|| CliError::Usage("dataset sim requires --n1".into()))?;
                simulation(n1)
            }
        }
    }
}

/// HVTN 503 with outcome median CD4 > 350.
pub fn hvtn503_cd4_350() -> TrialCounts {
    hvtn503([(19, 14), (12, 4), (34, 10)])
}

/// HVTN 503 with outcome median CD4 > 200.
pub fn hvtn503_cd4_200() -> TrialCounts {
    hvtn503([(29, 4), (16, 0), (44, 0)])
}

fn hvtn503(outcomes: [(u64, u64); 3]) -> TrialCounts {
    const MISSING: [u64; 3] = [4, 2, 1];
    const UNINFECTED: [u64; 3] = [363, 94, 243];
    let arms = (0..3)
        .map(|z| {
            ArmCounts::new(outcomes[z].0, outcomes[z].1, UNINFECTED[z]).with_missing(MISSING[z])
        })
        .collect();
    TrialCounts::new(arms).expect("embedded counts are valid")
}

/// Infection rate per arm counting infected participants with a missing
/// outcome, i.e. the rates as usually quoted for the trial.
pub fn hvtn503_infection_rates() -> [f64; 3] {
    let c = hvtn503_cd4_200();
    let mut rates = [0.0; 3];
    for (r, a) in rates.iter_mut().zip(c.arms()) {
        *r = (a.survived_y1 + a.survived_y0 + a.survived_y_missing) as f64 / a.total() as f64;
    }
    rates
}

/// The hypothetical study with `n1` of the 40 control-arm survivors
/// having `Y = 1`.
pub fn simulation(n1: u64) -> Result<TrialCounts> {
    if n1 > 40 {
        return Err(CliError::Usage(format!(
            "--n1 must lie in 0..=40, got {n1}"
        )));
    }
    Ok(TrialCounts::new(vec![
        ArmCounts::new(n1, 40 - n1, 360),
        ArmCounts::new(56, 24, 320),
        ArmCounts::new(108, 12, 280),
    ])?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use strata_bounds_core::summarize;

    #[test]
    fn hvtn_summaries() {
        let obs = summarize(&hvtn503_cd4_200(), true).unwrap();
        assert!((obs.survival()[0] - 33.0 / 396.0).abs() < 1e-12);
        assert!((obs.mean(0) - 29.0 / 33.0).abs() < 1e-12);
        assert_eq!(obs.mean(2), 1.0);
        // Quoted infection rates include subjects with a missing outcome.
        let r = hvtn503_infection_rates();
        assert!((r[0] - 0.0925).abs() < 5e-5);
        assert!((r[1] - 0.1607).abs() < 5e-5);
        assert!((r[2] - 0.1563).abs() < 5e-5);
        let totals: Vec<u64> = hvtn503_cd4_350().arms().iter().map(|a| a.total()).collect();
        assert_eq!(totals, [400, 112, 288]);
    }

    #[test]
    fn simulation_table() {
        let c = simulation(36).unwrap();
        assert_eq!(c.arms()[0], ArmCounts::new(36, 4, 360));
        assert!(simulation(41).is_err());
        assert!(Dataset::Sim.counts(None).is_err());
    }
}
