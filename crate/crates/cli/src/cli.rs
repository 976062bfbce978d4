//! Argument parsing and dispatch.

use std::fs;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use strata_bounds_core::{PosteriorConfig, PriorSpec, Tolerances};

use crate::commands::{self, Output, Source};
use crate::datasets::Dataset;
use crate::error::{CliError, Result};
use crate::report::{Provenance, ReportDocument};

#[derive(Debug, Parser)]
#[command(
    name = "strata-bounds",
    version,
    about = "Bounds and tests for survivor causal effects in multiarm trials"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Output format.
    #[arg(long, value_enum, default_value_t = Format::Json, global = true)]
    pub format: Format,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Stratum proportions and the well-defined contrasts.
    Identify(DataArgs),
    /// Sharp step-down test of no effect in any principal stratum.
    TestGlobal(DataArgs),
    /// Sharp lower bound on the maximal within-stratum effect.
    Deltamax {
        #[command(flatten)]
        data: DataArgs,
        /// Cross-check the linear program against a grid search.
        #[arg(long)]
        oracle_check: bool,
        /// Write the linear program in LP format to this file.
        #[arg(long, value_name = "PATH")]
        dump_lp: Option<PathBuf>,
    },
    /// Marginal feasible intervals of every contrast.
    Marginal {
        #[command(flatten)]
        data: DataArgs,
        /// Clinically relevant margin.
        #[arg(long)]
        delta0: Option<f64>,
    },
    /// Posterior probabilities and credible intervals.
    Posterior {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        posterior: PosteriorArgs,
    },
    /// Regenerate published results from the embedded datasets.
    Reproduce {
        #[command(subcommand)]
        target: ReproduceTarget,
    },
}

#[derive(Debug, Subcommand)]
pub enum ReproduceTarget {
    /// Both HVTN 503 outcomes, and the N = 3000 contrast.
    Hvtn503(PosteriorArgs),
    /// The hypothetical three-arm study; sweeps n1 = 0..=40 without --n1.
    Sim {
        #[arg(long)]
        n1: Option<u64>,
        #[command(flatten)]
        posterior: PosteriorArgs,
    },
}

#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    /// Counts (JSON or CSV) or observed-distribution (JSON) file.
    #[arg(
        long,
        value_name = "PATH",
        conflicts_with = "dataset",
        required_unless_present = "dataset"
    )]
    pub input: Option<PathBuf>,
    /// Embedded dataset.
    #[arg(long, value_enum)]
    pub dataset: Option<Dataset>,
    /// Number of control survivors with Y = 1 for the `sim` dataset.
    #[arg(long)]
    pub n1: Option<u64>,
    /// Keep survivors with a missing outcome in the survival denominators.
    #[arg(long)]
    pub keep_missing: bool,
}

#[derive(Debug, Clone, Args)]
pub struct PosteriorArgs {
    /// Dirichlet hyperparameters `a,b,c` for (Y=1, Y=0, died); give once for
    /// all arms or once per arm.
    #[arg(long, value_name = "A,B,C", value_parser = parse_alpha)]
    pub prior_alpha: Vec<[f64; 3]>,
    /// Number of posterior draws.
    #[arg(long, default_value_t = 4000)]
    pub draws: usize,
    /// Random seed.
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Clinically relevant margin.
    #[arg(long)]
    pub delta0: Option<f64>,
    /// Minimal fraction of draws with monotone survival.
    #[arg(long, default_value_t = 0.01)]
    pub retention_floor: f64,
}

fn parse_alpha(s: &str) -> std::result::Result<[f64; 3], String> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("{p:?}: {e}")))
        .collect::<std::result::Result<_, _>>()?;
    <[f64; 3]>::try_from(parts).map_err(|p| format!("expected three values, got {}", p.len()))
}

impl PosteriorArgs {
    fn prior(&self, arms: usize) -> Result<Option<PriorSpec>> {
        match self.prior_alpha.len() {
            0 => Ok(None),
            1 => Ok(Some(PriorSpec::new(vec![self.prior_alpha[0]; arms])?)),
            n if n == arms => Ok(Some(PriorSpec::new(self.prior_alpha.clone())?)),
            n => Err(CliError::Usage(format!(
                "--prior-alpha given {n} times for {arms} arms; give it once or once per arm"
            ))),
        }
    }

    fn config(&self) -> Result<PosteriorConfig> {
        if self.draws == 0 {
            return Err(CliError::Usage("--draws must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.retention_floor) {
            return Err(CliError::Usage(
                "--retention-floor must lie in [0, 1]".into(),
            ));
        }
        Ok(PosteriorConfig {
            n_draws: self.draws,
            seed: self.seed,
            delta0: self.delta0,
            retention_floor: self.retention_floor,
            ..PosteriorConfig::default()
        })
    }

    fn provenance(&self, input: String, digest: String, prior: &PriorSpec) -> Provenance {
        Provenance {
            input,
            input_digest: digest,
            seed: Some(self.seed),
            prior: Some(prior.alpha().to_vec()),
            draws: Some(self.draws),
            version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }
}

impl DataArgs {
    fn source(&self) -> Result<Source> {
        match (&self.input, self.dataset) {
            (Some(path), None) => Source::from_path(path),
            (None, Some(d)) => Source::from_dataset(d, self.n1),
            _ => Err(CliError::Usage(
                "give exactly one of --input or --dataset".into(),
            )),
        }
    }
}

fn plain_provenance(source: &Source) -> Provenance {
    Provenance {
        input: source.label.clone(),
        input_digest: source.digest.clone(),
        seed: None,
        prior: None,
        draws: None,
        version: env!("CARGO_PKG_VERSION").to_string(),
    }
}

/// What a command produced, before formatting.
pub struct Run {
    pub document: ReportDocument,
    pub output: Output,
    /// Line to print on stderr, e.g. the retention rate.
    pub note: Option<String>,
}

impl Run {
    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Json => self.document.to_json(),
            Format::Csv => self.output.table.to_csv(),
        }
    }
}

fn retention_note(n_retained: usize, n_drawn: usize) -> String {
    format!(
        "retained {n_retained} of {n_drawn} draws with monotone survival ({:.1}%)",
        100.0 * n_retained as f64 / n_drawn as f64
    )
}

/// Executes a parsed command line.
pub fn execute(command: &Command) -> Result<Run> {
    let tol = Tolerances::DEFAULT;
    let (name, output, provenance, note) = match command {
        Command::Identify(data) => {
            let src = data.source()?;
            let out = commands::identify(&src.observed(data.keep_missing)?, &tol)?;
            ("identify", out, plain_provenance(&src), None)
        }
        Command::TestGlobal(data) => {
            let src = data.source()?;
            let out = commands::test_global_cmd(&src.observed(data.keep_missing)?, &tol)?;
            ("test-global", out, plain_provenance(&src), None)
        }
        Command::Deltamax {
            data,
            oracle_check,
            dump_lp,
        } => {
            let src = data.source()?;
            let (out, lp) =
                commands::deltamax(&src.observed(data.keep_missing)?, &tol, *oracle_check)?;
            if let Some(path) = dump_lp {
                fs::write(path, lp.to_lp_format()).map_err(|source| CliError::Write {
                    path: path.clone(),
                    source,
                })?;
            }
            ("deltamax", out, plain_provenance(&src), None)
        }
        Command::Marginal { data, delta0 } => {
            let src = data.source()?;
            let out = commands::marginal(&src.observed(data.keep_missing)?, &tol, *delta0)?;
            ("marginal", out, plain_provenance(&src), None)
        }
        Command::Posterior { data, posterior } => {
            if data.keep_missing {
                return Err(CliError::Usage(
                    "--keep-missing applies to point estimates only; the posterior always drops missing outcomes".into(),
                ));
            }
            let src = data.source()?;
            let counts = src.counts()?;
            let arms = counts.arms().len();
            let prior = posterior
                .prior(arms)?
                .unwrap_or_else(|| PriorSpec::uniform(arms));
            let (out, s) = commands::posterior(counts, &prior, &posterior.config()?)?;
            let prov = posterior.provenance(src.label.clone(), src.digest.clone(), &prior);
            (
                "posterior",
                out,
                prov,
                Some(retention_note(s.n_retained, s.n_drawn)),
            )
        }
        Command::Reproduce { target } => match target {
            ReproduceTarget::Hvtn503(posterior) => {
                let prior = posterior.prior(3)?;
                let out = commands::reproduce_hvtn(prior.as_ref(), &posterior.config()?)?;
                let used = prior.unwrap_or_else(|| PriorSpec::uniform(3));
                let src = Source::from_dataset(Dataset::Hvtn503Cd4_200, None)?;
                let a = Source::from_dataset(Dataset::Hvtn503Cd4_350, None)?;
                let digest =
                    crate::report::sha256_hex(format!("{}{}", a.digest, src.digest).as_bytes());
                let prov = posterior.provenance("hvtn503".into(), digest, &used);
                let note = out.result["outcomes"].as_array().map(|list| {
                    list.iter()
                        .map(|o| {
                            format!(
                                "{}: retention {:.3}",
                                o["dataset"].as_str().unwrap_or("?"),
                                o["retention_rate"].as_f64().unwrap_or(f64::NAN)
                            )
                        })
                        .collect::<Vec<_>>()
                        .join("; ")
                });
                ("reproduce hvtn503", out, prov, note)
            }
            ReproduceTarget::Sim { n1, posterior } => {
                let prior = posterior.prior(3)?;
                let out = commands::reproduce_sim(*n1, prior.as_ref(), &posterior.config()?)?;
                let used = prior.unwrap_or_else(|| PriorSpec::uniform(3));
                let src = match n1 {
                    Some(n1) => Source::from_dataset(Dataset::Sim, Some(*n1))?,
                    None => {
                        Source::from_counts("sim (n1 = 0..=40)", crate::datasets::simulation(0)?)
                    }
                };
                let prov = posterior.provenance(src.label.clone(), src.digest.clone(), &used);
                let note = out.result["retention_rate"]
                    .as_f64()
                    .map(|r| format!("retention {r:.3}"));
                ("reproduce sim", out, prov, note)
            }
        },
    };
    Ok(Run {
        document: ReportDocument {
            command: name.to_string(),
            result: output.result.clone(),
            provenance,
        },
        output,
        note,
    })
}
