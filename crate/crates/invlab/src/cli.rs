//! Command-line front end. Exit codes: 0 pass, 1 failed verdict, 2 bad input or error.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use rkhs_invlab_core::filters::log_grid;
use rkhs_invlab_core::*;

use crate::config::{StudyConfig, StudyKind};
use crate::error::{Error, Result};
use crate::experiments::run_study;
use crate::export::{write_text, RateReport};
use crate::report::{write_report, ReportFormat, StudyReport};

#[derive(Debug, Parser)]
#[command(
    name = "rkhs-invlab",
    version,
    about = "Spectral inverse-problem / kernel-learning studies"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Variant {
    General,
    Tikhonov,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the study described by a config file and write its reports.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Dotted-path override, e.g. `problem.J=50` (repeatable).
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Run the built-in property suite.
    Verify,
    /// Rate conversion calculator.
    Rates {
        #[arg(long)]
        r: f64,
        #[arg(long)]
        b: f64,
        #[arg(long, value_enum, default_value = "general")]
        variant: Variant,
        /// Defaults to r + 1/2.
        #[arg(long)]
        gamma: Option<f64>,
    },
    /// Print problem diagnostics.
    Info {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        /// Number of log-spaced lambda values in `[mu_J, mu_1]`.
        #[arg(long, default_value_t = 8)]
        lambdas: usize,
    },
}

pub fn main<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let mut out = std::io::stdout().lock();
    match dispatch(cli.command, &mut out) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

fn dispatch(command: Command, out: &mut impl Write) -> Result<i32> {
    match command {
        Command::Run {
            config,
            out: dir,
            seed,
            overrides,
        } => {
            let mut cfg = StudyConfig::load(&config)?;
            if !overrides.is_empty() {
                cfg = cfg.with_overrides(&overrides)?;
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let report = run_study(&cfg)?;
            write_outputs(&report, &dir)?;
            let status = if report.pass { "pass" } else { "fail" };
            for v in &report.verdicts {
                let _ = writeln!(
                    out,
                    "  {} {} (value {:e}, threshold {:e})",
                    v.name,
                    if v.pass { "ok" } else { "FAILED" },
                    v.value,
                    v.threshold
                );
            }
            let _ = writeln!(out, "STUDY {} {status}", report.kind);
            Ok(if report.pass { 0 } else { 1 })
        }
        Command::Verify => {
            let outcomes = crate::verify::run_all();
            for o in &outcomes {
                let _ = writeln!(
                    out,
                    "CHECK {} {} {}",
                    o.name,
                    if o.pass { "pass" } else { "fail" },
                    o.detail
                );
            }
            let pass = outcomes.iter().all(|o| o.pass);
            let _ = writeln!(out, "VERIFY {}", if pass { "pass" } else { "fail" });
            Ok(if pass { 0 } else { 1 })
        }
        Command::Rates {
            r,
            b,
            variant,
            gamma,
        } => {
            let text = rates_json(r, b, variant, gamma)?;
            let _ = writeln!(out, "{text}");
            Ok(0)
        }
        Command::Info {
            config,
            overrides,
            lambdas,
        } => {
            let mut cfg = match &config {
                Some(p) => StudyConfig::load(p)?,
                None => StudyConfig::preset(StudyKind::StatRate),
            };
            if !overrides.is_empty() {
                cfg = cfg.with_overrides(&overrides)?;
            }
            let text = info_json(&cfg, lambdas)?;
            let _ = writeln!(out, "{text}");
            Ok(0)
        }
    }
}

fn core_err(context: &str) -> impl FnOnce(rkhs_invlab_core::Error) -> Error + '_ {
    move |source| Error::Core {
        context: context.to_string(),
        source,
    }
}

pub fn rates_json(r: f64, b: f64, variant: Variant, gamma: Option<f64>) -> Result<String> {
    let gamma = gamma.unwrap_or(r + 0.5);
    let tau_variant = match variant {
        Variant::General => TauVariant::General,
        Variant::Tikhonov => TauVariant::Tikhonov,
    };
    let tau = loss_factor_tau(r, b, tau_variant).map_err(core_err("loss factor"))?;
    let upper =
        RateExponents::statistical_upper(r, b, gamma).map_err(core_err("upper exponents"))?;
    let lower = RateExponents::classical_lower(r, gamma).map_err(core_err("lower exponents"))?;
    let up = convert_upper(&upper).map_err(core_err("convert_upper"))?;
    let low = convert_lower(&lower).map_err(core_err("convert_lower"))?;
    let doc = json!({
        "inputs": {"r": r, "b": b, "gamma": gamma, "variant": format!("{variant:?}").to_lowercase()},
        "tau": tau,
        "convert_upper": RateReport::new(upper, up, None),
        "convert_lower": RateReport::new(lower, low, None),
    });
    serde_json::to_string_pretty(&doc).map_err(|e| Error::Report(e.to_string()))
}

pub fn info_json(cfg: &StudyConfig, lambdas: usize) -> Result<String> {
    let (problem, truth) = cfg.problem.build().map_err(core_err("problem"))?;
    let mut rows = Vec::new();
    for lambda in log_grid(problem.mu_min(), problem.mu_max(), lambdas.max(2)) {
        let filter = FilterSpec::new(cfg.filter, lambda).map_err(core_err("filter"))?;
        let hs = rates::hs_norm(&problem, &filter);
        let eps = epsilon_lambda(&problem, &filter, &truth).ok();
        rows.push(json!({
            "lambda": lambda,
            "hs_norm": hs,
            "operator_norm": rates::operator_norm(&problem, &filter),
            "epsilon": eps,
        }));
    }
    let doc = json!({
        "problem": cfg.problem,
        "filter": cfg.filter.to_string(),
        "mu": problem.mu,
        "c_squared": problem.c_squared(),
        "truth_norm": truth.coeffs.iter().map(|v| v * v).sum::<f64>().sqrt(),
        "lambda_grid": rows,
    });
    serde_json::to_string_pretty(&doc).map_err(|e| Error::Report(e.to_string()))
}

/// `<kind>.json`, `<kind>.csv` and, for rate studies, `<kind>-rates.json`.
pub fn write_outputs(report: &StudyReport, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.display().to_string(),
        source,
    })?;
    let stem = report.kind.to_string();
    write_report(
        report,
        ReportFormat::Json,
        &dir.join(format!("{stem}.json")),
    )?;
    write_report(report, ReportFormat::Csv, &dir.join(format!("{stem}.csv")))?;
    let cfg = &report.config;
    let gamma = cfg.gamma.unwrap_or(cfg.problem.r + 0.5);
    let rate = match report.kind {
        StudyKind::StatRate => {
            let e = RateExponents::statistical_upper(cfg.problem.r, cfg.problem.b, gamma)
                .map_err(core_err("exponents"))?;
            Some(RateReport::new(
                e,
                convert_upper(&e).map_err(core_err("convert_upper"))?,
                report.fit.as_ref(),
            ))
        }
        StudyKind::DetRate => {
            let e = RateExponents::classical_lower(cfg.problem.r, gamma)
                .map_err(core_err("exponents"))?;
            Some(RateReport::new(
                e,
                convert_lower(&e).map_err(core_err("convert_lower"))?,
                report.fit.as_ref(),
            ))
        }
        _ => None,
    };
    if let Some(rate) = rate {
        write_text(&dir.join(format!("{stem}-rates.json")), &rate.to_json()?)?;
    }
    Ok(())
}
