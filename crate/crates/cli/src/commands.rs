//! Command implementations. Each returns a JSON result tree and a flat
//! table for CSV output.

use std::path::Path;

use serde_json::{json, Map, Value};
use strata_bounds_core::oracle::{grid_delta_max_slb, grid_h0_violation, GridSpec};
use strata_bounds_core::posterior::{analyze_distribution, CredibleInterval};
use strata_bounds_core::{
    check_h0_compatibility, enumerate_contrasts, identify_strata, marginal_contrast_interval,
    solve_delta_max_slb, stratum_label, summarize, test_global, Contrast, FeasibleInterval,
    LinearProgram, ObservedDistribution, PosteriorConfig, PosteriorSummary, PriorSpec, Tolerances,
    TrialCounts,
};

use crate::datasets::{self, Dataset};
use crate::error::{CliError, Result};
use crate::ingest::{counts_to_json, read_input, Input};
use crate::parallel::summarize_parallel;
use crate::report::{cell, sha256_hex, Table};

/// Loaded input together with its provenance.
#[derive(Debug, Clone)]
pub struct Source {
    pub label: String,
    pub digest: String,
    pub input: Input,
}

impl Source {
    pub fn from_path(path: &Path) -> Result<Self> {
        let (input, bytes) = read_input(path)?;
        Ok(Source {
            label: path.display().to_string(),
            digest: sha256_hex(&bytes),
            input,
        })
    }

    pub fn from_counts(label: impl Into<String>, counts: TrialCounts) -> Self {
        Source {
            label: label.into(),
            digest: sha256_hex(counts_to_json(&counts).to_string().as_bytes()),
            input: Input::Counts(counts),
        }
    }

    pub fn from_dataset(dataset: Dataset, n1: Option<u64>) -> Result<Self> {
        let counts = dataset.counts(n1)?;
        let label = match (dataset, n1) {
            (Dataset::Sim, Some(n1)) => format!("sim (n1 = {n1})"),
            _ => dataset.name().to_string(),
        };
        Ok(Source::from_counts(label, counts))
    }

    /// The observed law; counts drop subjects with a missing outcome unless
    /// `keep_missing` is set.
    pub fn observed(&self, keep_missing: bool) -> Result<ObservedDistribution> {
        match &self.input {
            Input::Counts(c) => Ok(summarize(c, !keep_missing)?),
            Input::Distribution(d) => Ok(d.clone()),
        }
    }

    pub fn counts(&self) -> Result<&TrialCounts> {
        match &self.input {
            Input::Counts(c) => Ok(c),
            Input::Distribution(_) => Err(CliError::Usage(
                "posterior analysis needs arm counts, not an observed distribution".into(),
            )),
        }
    }
}

/// Result of a command.
#[derive(Debug, Clone, PartialEq)]
pub struct Output {
    pub result: Value,
    pub table: Table,
}

fn interval_json(iv: &FeasibleInterval) -> Value {
    if iv.is_empty() {
        Value::Null
    } else {
        json!({ "lo": iv.lo(), "hi": iv.hi() })
    }
}

fn ci_json(ci: &CredibleInterval) -> Value {
    json!([ci.lo, ci.hi])
}

fn contrast_label(c: &Contrast, m: usize) -> String {
    c.display(m).to_string()
}

pub fn identify(obs: &ObservedDistribution, tol: &Tolerances) -> Result<Output> {
    let profile = identify_strata(obs, tol)?;
    let m = obs.max_level();
    let mut table = Table::new(["stratum", "label", "proportion"]);
    let strata: Vec<Value> = profile
        .proportions()
        .iter()
        .enumerate()
        .map(|(k, &p)| {
            table.push([k.to_string(), stratum_label(k, m), cell(p)]);
            json!({ "stratum": k, "label": stratum_label(k, m), "proportion": p })
        })
        .collect();
    let conditional: Vec<Value> = (0..=m)
        .map(|z| {
            let row: Map<String, Value> = profile
                .conditional_row(z)
                .iter()
                .enumerate()
                .map(|(g, &p)| (stratum_label(g, m), json!(p)))
                .collect();
            json!({ "level": z, "proportions": row })
        })
        .collect();
    let contrasts: Vec<String> = enumerate_contrasts(&profile)
        .iter()
        .map(|c| contrast_label(c, m))
        .collect();
    Ok(Output {
        result: json!({
            "max_level": m,
            "survival": obs.survival(),
            "means": obs.means(),
            "strata": strata,
            "conditional": conditional,
            "contrasts": contrasts,
        }),
        table,
    })
}

pub fn test_global_cmd(obs: &ObservedDistribution, tol: &Tolerances) -> Result<Output> {
    let profile = identify_strata(obs, tol)?;
    let m = obs.max_level();
    let r = test_global(obs, &profile, tol)?;
    let polytope_compatible = check_h0_compatibility(obs, &profile, tol)?;
    let mut table = Table::new(["stage", "stratum", "level", "lo", "hi", "empty"]);
    let stages: Vec<Value> = r
        .stages
        .iter()
        .map(|s| {
            let intervals: Vec<Value> = s
                .intervals
                .iter()
                .map(|b| {
                    table.push([
                        s.stage.to_string(),
                        stratum_label(s.stage, m),
                        b.level.to_string(),
                        cell(b.interval.lo()),
                        cell(b.interval.hi()),
                        b.interval.is_empty().to_string(),
                    ]);
                    json!({ "level": b.level, "region": interval_json(&b.interval) })
                })
                .collect();
            json!({
                "stage": s.stage,
                "stratum": stratum_label(s.stage, m),
                "skipped": s.skipped,
                "regions": intervals,
            })
        })
        .collect();
    let identified: Vec<Value> = r
        .identified_mu
        .iter()
        .enumerate()
        .filter_map(|(k, v)| v.map(|v| json!({ "stratum": stratum_label(k, m), "mu": v })))
        .collect();
    Ok(Output {
        result: json!({
            "rejected": r.rejected,
            "reject_stage": r.reject_stage,
            "reject_stratum": r.reject_stage.map(|k| stratum_label(k, m)),
            "identified_mu": identified,
            "stages": stages,
            "polytope_compatible": polytope_compatible,
        }),
        table,
    })
}

fn oracle_grid(m: usize) -> GridSpec {
    GridSpec {
        points_per_axis: if m >= 3 { 16 } else { 101 },
        ..GridSpec::default()
    }
}

pub fn deltamax(
    obs: &ObservedDistribution,
    tol: &Tolerances,
    oracle_check: bool,
) -> Result<(Output, LinearProgram)> {
    let profile = identify_strata(obs, tol)?;
    let m = obs.max_level();
    let d = solve_delta_max_slb(obs, &profile, tol)?;
    let mut table = Table::new(["variable", "value"]);
    table.push(["delta_max_slb".to_string(), cell(d.value)]);
    let mut witness = Map::new();
    for (name, v) in d.solution.assignment(&d.lp) {
        if name != "alpha" {
            witness.insert(name.to_string(), json!(v));
            table.push([name.to_string(), cell(v)]);
        }
    }
    let binding: Vec<String> = d
        .binding_contrasts(tol.optimization)
        .iter()
        .map(|c| contrast_label(c, m))
        .collect();
    let mut result = json!({
        "delta_max_slb": d.value,
        "binding_contrasts": binding,
        "witness": witness,
        "lp": {
            "variables": d.lp.variables().len(),
            "constraints": d.lp.constraints().len(),
            "iterations": d.solution.iterations,
            "basis": d.solution.basis,
            "at_upper": d.solution.at_upper,
        },
    });
    if oracle_check {
        let grid = oracle_grid(m);
        let oracle = match (
            grid_delta_max_slb(obs, &profile, &grid),
            grid_h0_violation(obs, &profile, &grid),
        ) {
            (Ok(g), Ok(h0)) => json!({
                "points_per_axis": grid.points_per_axis,
                "grid_delta_max_slb": g,
                "difference": g - d.value,
                "within_tolerance": (g - d.value).abs() <= grid.tolerance,
                "grid_h0_violation": h0,
            }),
            (Err(e), _) | (_, Err(e)) => json!({ "error": e.to_string() }),
        };
        result["oracle"] = oracle;
    }
    Ok((Output { result, table }, d.lp))
}

pub fn marginal(
    obs: &ObservedDistribution,
    tol: &Tolerances,
    delta0: Option<f64>,
) -> Result<Output> {
    let profile = identify_strata(obs, tol)?;
    let m = obs.max_level();
    let mut table = Table::new(["contrast", "lo", "hi", "excludes_zero"]);
    let mut mlb: f64 = 0.0;
    let mut any = false;
    let contrasts: Vec<Value> = enumerate_contrasts(&profile)
        .iter()
        .map(|c| -> Result<Value> {
            let iv = marginal_contrast_interval(obs, &profile, c)?;
            let excludes = iv.excludes_zero(tol.optimization);
            any |= excludes;
            mlb = mlb.max(iv.lo().max(0.0));
            table.push([
                contrast_label(c, m),
                cell(iv.lo()),
                cell(iv.hi()),
                excludes.to_string(),
            ]);
            Ok(json!({
                "contrast": contrast_label(c, m),
                "stratum": c.stratum,
                "high": c.high,
                "low": c.low,
                "lo": iv.lo(),
                "hi": iv.hi(),
                "excludes_zero": excludes,
            }))
        })
        .collect::<Result<_>>()?;
    let mut result = json!({
        "contrasts": contrasts,
        "delta_max_mlb": mlb,
        "marginal_reject": any,
    });
    if let Some(d0) = delta0 {
        result["clinical"] = json!({ "delta0": d0, "reject": mlb > d0 });
    }
    Ok(Output { result, table })
}

fn summary_json(s: &PosteriorSummary, m: usize) -> Result<Value> {
    let mut v = serde_json::to_value(s).map_err(|e| CliError::Internal(e.to_string()))?;
    if let Some(list) = v["contrasts"].as_array_mut() {
        for (entry, cs) in list.iter_mut().zip(&s.contrasts) {
            entry["label"] = json!(contrast_label(&cs.contrast, m));
        }
    }
    Ok(v)
}

fn summary_table(s: &PosteriorSummary, m: usize) -> Table {
    let mut t = Table::new(["quantity", "estimate", "ci_lo", "ci_hi"]);
    t.push([
        "retention_rate".into(),
        cell(s.retention_rate),
        String::new(),
        String::new(),
    ]);
    t.push([
        "reject_prob_simultaneous".into(),
        cell(s.reject_prob_simultaneous),
        String::new(),
        String::new(),
    ]);
    t.push([
        "reject_prob_marginal".into(),
        cell(s.reject_prob_marginal),
        String::new(),
        String::new(),
    ]);
    t.push([
        "delta_max_slb".into(),
        cell(s.slb_mean),
        cell(s.slb_ci.lo),
        cell(s.slb_ci.hi),
    ]);
    t.push([
        "delta_max_mlb".into(),
        cell(s.mlb_mean),
        cell(s.mlb_ci.lo),
        cell(s.mlb_ci.hi),
    ]);
    for cs in &s.contrasts {
        t.push([
            contrast_label(&cs.contrast, m),
            cell(cs.excludes_zero_prob),
            cell(cs.ci.lo),
            cell(cs.ci.hi),
        ]);
    }
    if let Some(c) = &s.clinical {
        t.push([
            format!("reject_prob_clinical_simultaneous(delta0={})", c.delta0),
            cell(c.reject_prob_simultaneous),
            String::new(),
            String::new(),
        ]);
        t.push([
            format!("reject_prob_clinical_marginal(delta0={})", c.delta0),
            cell(c.reject_prob_marginal),
            String::new(),
            String::new(),
        ]);
    }
    t
}

pub fn posterior(
    counts: &TrialCounts,
    prior: &PriorSpec,
    config: &PosteriorConfig,
) -> Result<(Output, PosteriorSummary)> {
    let s = summarize_parallel(counts, prior, config)?;
    let m = counts.max_level();
    Ok((
        Output {
            result: summary_json(&s, m)?,
            table: summary_table(&s, m),
        },
        s,
    ))
}

/// Point-estimate analysis of the same counts, reported next to posterior
/// results. `None` when the empirical survival is not monotone.
fn point_estimate(counts: &TrialCounts, tol: &Tolerances) -> Result<Value> {
    let obs = summarize(counts, true)?;
    if !obs.is_monotone(tol.identity) {
        return Ok(Value::Null);
    }
    let a = analyze_distribution(&obs, tol)?;
    Ok(json!({
        "rejected": a.simultaneous_reject,
        "reject_stage": a.reject_stage,
        "marginal_reject": a.marginal_reject,
        "delta_max_slb": a.slb,
        "delta_max_mlb": a.mlb,
    }))
}

fn method_rows(table: &mut Table, prefix: &[String], s: &PosteriorSummary) {
    let mut row = |method: &str, p: f64, ci: &CredibleInterval| {
        let mut r = prefix.to_vec();
        r.extend([method.to_string(), cell(p), cell(ci.lo), cell(ci.hi)]);
        table.rows.push(r);
    };
    row("simultaneous", s.reject_prob_simultaneous, &s.slb_ci);
    row("marginal", s.reject_prob_marginal, &s.mlb_ci);
}

/// Posterior analysis of both HVTN 503 outcomes, plus the contrast of the
/// always-infected stratum had the trial enrolled 3000 participants.
pub fn reproduce_hvtn(prior: Option<&PriorSpec>, config: &PosteriorConfig) -> Result<Output> {
    let mut table = Table::new(["outcome", "method", "reject_prob", "ci_lo", "ci_hi"]);
    let mut outcomes = Vec::new();
    for dataset in [Dataset::Hvtn503Cd4_350, Dataset::Hvtn503Cd4_200] {
        let counts = dataset.counts(None)?;
        let prior = prior.cloned().unwrap_or_else(|| PriorSpec::uniform(3));
        let s = summarize_parallel(&counts, &prior, config)?;
        method_rows(&mut table, &[dataset.name().to_string()], &s);
        outcomes.push(json!({
            "dataset": dataset.name(),
            "simultaneous": { "reject_prob": s.reject_prob_simultaneous, "delta_max_slb_ci": ci_json(&s.slb_ci) },
            "marginal": { "reject_prob": s.reject_prob_marginal, "delta_max_mlb_ci": ci_json(&s.mlb_ci) },
            "retention_rate": s.retention_rate,
            "point_estimate": point_estimate(&counts, &config.tolerances)?,
        }));
    }

    let base = datasets::hvtn503_cd4_200();
    let total: u64 = base.arms().iter().map(|a| a.total()).sum();
    let scaled = base.scaled(3000.0 / total as f64)?;
    let prior3 = prior.cloned().unwrap_or_else(|| PriorSpec::uniform(3));
    let s = summarize_parallel(&scaled, &prior3, config)?;
    let target = Contrast::new(0, 2, 0, 2)?;
    let cs = s
        .contrasts
        .iter()
        .find(|c| c.contrast == target)
        .ok_or_else(|| CliError::Internal("contrast (LLL;2,0) missing".into()))?;
    table.rows.push(vec![
        "hvtn503-cd4-200 (N = 3000)".into(),
        "contrast (LLL;2,0)".into(),
        cell(cs.excludes_zero_prob),
        cell(cs.ci.lo),
        cell(cs.ci.hi),
    ]);
    Ok(Output {
        result: json!({
            "outcomes": outcomes,
            "infection_rates_with_missing": datasets::hvtn503_infection_rates(),
            "sample_size_3000": {
                "counts": counts_to_json(&scaled),
                "contrast": "(LLL;2,0)",
                "ci": ci_json(&cs.ci),
                "lower_end_ci": ci_json(&cs.lower_end_ci),
                "upper_end_ci": ci_json(&cs.upper_end_ci),
            },
        }),
        table,
    })
}

/// The hypothetical three-arm study at one `n1`, or the full sweep over
/// `n1 = 0..=40` when `n1` is `None`.
pub fn reproduce_sim(
    n1: Option<u64>,
    prior: Option<&PriorSpec>,
    config: &PosteriorConfig,
) -> Result<Output> {
    let prior = prior.cloned().unwrap_or_else(|| PriorSpec::uniform(3));
    if let Some(n1) = n1 {
        let counts = datasets::simulation(n1)?;
        let s = summarize_parallel(&counts, &prior, config)?;
        let mut table = Table::new(["n1", "method", "reject_prob", "ci_lo", "ci_hi"]);
        method_rows(&mut table, &[n1.to_string()], &s);
        let mut result = summary_json(&s, 2)?;
        result["n1"] = json!(n1);
        result["point_estimate"] = point_estimate(&counts, &config.tolerances)?;
        return Ok(Output { result, table });
    }
    let mut table = Table::new([
        "n1",
        "retention_rate",
        "reject_prob_simultaneous",
        "reject_prob_marginal",
        "slb_mean",
        "slb_ci_lo",
        "slb_ci_hi",
        "mlb_mean",
        "mlb_ci_lo",
        "mlb_ci_hi",
    ]);
    let mut series = Vec::new();
    for n1 in 0..=40 {
        let counts = datasets::simulation(n1)?;
        let s = summarize_parallel(&counts, &prior, config)?;
        table.push([
            n1.to_string(),
            cell(s.retention_rate),
            cell(s.reject_prob_simultaneous),
            cell(s.reject_prob_marginal),
            cell(s.slb_mean),
            cell(s.slb_ci.lo),
            cell(s.slb_ci.hi),
            cell(s.mlb_mean),
            cell(s.mlb_ci.lo),
            cell(s.mlb_ci.hi),
        ]);
        series.push(json!({
            "n1": n1,
            "retention_rate": s.retention_rate,
            "reject_prob_simultaneous": s.reject_prob_simultaneous,
            "reject_prob_marginal": s.reject_prob_marginal,
            "slb_mean": s.slb_mean,
            "slb_ci": ci_json(&s.slb_ci),
            "mlb_mean": s.mlb_mean,
            "mlb_ci": ci_json(&s.mlb_ci),
        }));
    }
    Ok(Output {
        result: json!({ "series": series }),
        table,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn masked_effect() -> ObservedDistribution {
        ObservedDistribution::from_strata(&[0.3, 0.3, 0.3, 0.1], &[0.3, 0.0, 0.5]).unwrap()
    }

    #[test]
    fn masked_effect_outputs() {
        let tol = Tolerances::DEFAULT;
        let (out, lp) = deltamax(&masked_effect(), &tol, true).unwrap();
        assert!((out.result["delta_max_slb"].as_f64().unwrap() - 0.25).abs() < 1e-9);
        assert!(out.result["oracle"]["within_tolerance"].as_bool().unwrap());
        assert!(lp.to_lp_format().contains("alpha"));

        let out = test_global_cmd(&masked_effect(), &tol).unwrap();
        assert_eq!(out.result["reject_stage"], json!(0));
        assert_eq!(out.result["polytope_compatible"], json!(false));

        let out = marginal(&masked_effect(), &tol, Some(0.1)).unwrap();
        let list = out.result["contrasts"].as_array().unwrap();
        assert_eq!(list.len(), 4);
        assert_eq!(list[2]["contrast"], "(LLL;2,1)");
        assert_eq!(list[3]["contrast"], "(DLL;2,1)");
        assert_eq!(out.result["clinical"]["reject"], json!(false));
    }

    #[test]
    fn identify_all_survive() {
        let obs = ObservedDistribution::new(vec![1.0, 1.0], vec![Some(0.2), Some(0.4)]).unwrap();
        let out = identify(&obs, &Tolerances::DEFAULT).unwrap();
        assert_eq!(out.result["strata"][0]["label"], "LL");
        assert_eq!(out.result["strata"][0]["proportion"], json!(1.0));
        assert_eq!(out.table.rows.len(), 3);
    }
}
