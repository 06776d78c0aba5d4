//! Study reports, their verdicts and the JSON / CSV writers.
//!
//! Verdicts are a pure function of the recorded statistics: [`judge`] is
//! called once when the study finishes and can be called again on a report
//! read back from disk to reproduce them.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use rkhs_invlab_core::rates::rank_correlation;
use rkhs_invlab_core::{fit_rate, RateFit};

use crate::config::{StudyConfig, StudyKind};
use crate::error::{Context, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointRecord {
    /// `n`, `delta`, `lambda` or the trial index, depending on the study.
    pub x: f64,
    pub lambda: f64,
    pub err_mean: f64,
    pub err_se: f64,
    /// Median over replicates; kept out of the CSV.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub err_median: Option<f64>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub extra: BTreeMap<String, f64>,
}

impl PointRecord {
    pub fn new(x: f64, lambda: f64, err_mean: f64, err_se: f64) -> Self {
        Self {
            x,
            lambda,
            err_mean,
            err_se,
            err_median: None,
            extra: BTreeMap::new(),
        }
    }

    pub fn with(mut self, key: &str, value: f64) -> Self {
        self.extra.insert(key.to_string(), value);
        self
    }

    fn get(&self, key: &str) -> Result<f64> {
        self.extra
            .get(key)
            .copied()
            .ok_or_else(|| Error::Report(format!("record at x = {} lacks '{key}'", self.x)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub name: String,
    pub pass: bool,
    pub value: f64,
    pub threshold: f64,
}

impl Verdict {
    fn at_most(name: &str, value: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            pass: value <= threshold,
            value,
            threshold,
        }
    }

    fn at_least(name: &str, value: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            pass: value >= threshold,
            value,
            threshold,
        }
    }

    fn below(name: &str, value: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            pass: value < threshold,
            value,
            threshold,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub kind: StudyKind,
    pub config: StudyConfig,
    pub records: Vec<PointRecord>,
    /// Study-level statistics (lemma-check, equivalence-check, ...).
    #[serde(default)]
    pub summary: BTreeMap<String, f64>,
    #[serde(default)]
    pub theory: BTreeMap<String, f64>,
    pub fit: Option<RateFit>,
    pub verdicts: Vec<Verdict>,
    pub pass: bool,
    pub runtime_seconds: f64,
}

impl StudyReport {
    /// Fills `fit`, `verdicts` and `pass` from the recorded data.
    pub fn finalize(mut self) -> Result<Self> {
        let (fit, verdicts) = judge(&self)?;
        self.fit = fit;
        self.pass = verdicts.iter().all(|v| v.pass);
        self.verdicts = verdicts;
        Ok(self)
    }

    pub fn verdict(&self, name: &str) -> Option<&Verdict> {
        self.verdicts.iter().find(|v| v.name == name)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Report(e.to_string()))
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Report(e.to_string()))
    }

    /// Columns `kind,x,lambda,err_mean,err_se` followed by the sorted extra keys.
    pub fn to_csv(&self) -> String {
        let extras: Vec<&String> = self
            .records
            .first()
            .map(|r| r.extra.keys().collect())
            .unwrap_or_default();
        let mut out = String::from("kind,x,lambda,err_mean,err_se");
        for k in &extras {
            out.push(',');
            out.push_str(k);
        }
        out.push('\n');
        for r in &self.records {
            let _ = write!(
                out,
                "{},{},{},{},{}",
                self.kind, r.x, r.lambda, r.err_mean, r.err_se
            );
            for k in &extras {
                match r.extra.get(*k) {
                    Some(v) => {
                        let _ = write!(out, ",{v}");
                    }
                    None => out.push(','),
                }
            }
            out.push('\n');
        }
        out
    }
}

fn summary(report: &StudyReport, key: &str) -> Result<f64> {
    report
        .summary
        .get(key)
        .copied()
        .ok_or_else(|| Error::Report(format!("summary lacks '{key}'")))
}

fn theory(report: &StudyReport, key: &str) -> Result<f64> {
    report
        .theory
        .get(key)
        .copied()
        .ok_or_else(|| Error::Report(format!("theory lacks '{key}'")))
}

fn first_last(report: &StudyReport, value: impl Fn(&PointRecord) -> f64) -> Result<(f64, f64)> {
    match (report.records.first(), report.records.last()) {
        (Some(a), Some(b)) => Ok((value(a), value(b))),
        _ => Err(Error::Report("report has no records".into())),
    }
}

/// Rate fit and verdicts implied by the recorded statistics.
pub fn judge(report: &StudyReport) -> Result<(Option<RateFit>, Vec<Verdict>)> {
    let tol = &report.config.tolerances;
    let recs = &report.records;
    let mut verdicts = Vec::new();
    let mut fit = None;
    match report.kind {
        StudyKind::StatRate => {
            let pts: Vec<(f64, f64)> = recs.iter().map(|r| (1.0 / r.x, r.err_mean)).collect();
            let f = fit_rate(&pts).context(|| "stat-rate fit".into())?;
            let alpha = theory(report, "alpha")?;
            verdicts.push(Verdict::at_most(
                "rate-slope",
                (f.slope - alpha).abs(),
                tol.slope,
            ));
            let medians: Vec<f64> = recs
                .iter()
                .map(|r| r.err_median.unwrap_or(r.err_mean))
                .collect();
            let xs: Vec<f64> = recs.iter().map(|r| r.x).collect();
            let skip = 2.min(xs.len().saturating_sub(2));
            let rho = rank_correlation(&xs[skip..], &medians[skip..])
                .context(|| "median rank correlation".into())?;
            verdicts.push(Verdict::below(
                "median-decreasing",
                rho,
                -tol.rank_correlation,
            ));
            let (first, last) = (medians[0], medians[medians.len() - 1]);
            verdicts.push(Verdict::below(
                "median-final",
                last,
                first * tol.decrease_ratio,
            ));
            fit = Some(f);
        }
        StudyKind::DetRate => {
            let pts: Vec<(f64, f64)> = recs.iter().map(|r| (r.x, r.err_mean)).collect();
            let f = fit_rate(&pts).context(|| "det-rate fit".into())?;
            let exponent = theory(report, "exponent")?;
            verdicts.push(Verdict::at_most(
                "rate-slope",
                (f.slope - exponent).abs(),
                tol.det_slope,
            ));
            fit = Some(f);
        }
        StudyKind::LemmaCheck => {
            let k = tol.se_multiplier;
            let mse = summary(report, "mse")?;
            let mse_se = summary(report, "mse_se")?;
            let var_term = summary(report, "variance_term")?;
            let bias_sq = summary(report, "bias_sq")?;
            let slack = 1e-12 * (var_term + bias_sq).max(f64::MIN_POSITIVE);
            verdicts.push(Verdict::at_least(
                "lemma-inequality",
                mse - (var_term + bias_sq),
                -k * mse_se - slack,
            ));
            verdicts.push(Verdict::at_most(
                "mean-matches-continuous",
                summary(report, "component_worst_ratio")?,
                1.0,
            ));
            let var_mc = summary(report, "variance_mc")?;
            let gap = (mse - bias_sq - var_mc).abs();
            let reps = report.config.replicates as f64;
            let limit = k * summary(report, "decomposition_se")? + 2.0 * var_mc / reps + slack;
            verdicts.push(Verdict::at_most("bias-variance-decomposition", gap, limit));
            for mode in ["random-unit", "fixed-mode", "filter-adversarial"] {
                let det = summary(report, &format!("det_err_{mode}"))?;
                verdicts.push(Verdict::at_most(
                    &format!("key-inequality-{mode}"),
                    det,
                    mse + k * mse_se + slack,
                ));
            }
        }
        StudyKind::GammaStudy => {
            let xs: Vec<f64> = recs.iter().map(|r| r.x).collect();
            let hk: Vec<f64> = recs.iter().map(|r| r.err_mean).collect();
            let rho = rank_correlation(&xs, &hk).context(|| "error rank correlation".into())?;
            verdicts.push(Verdict::below(
                "error-decreasing",
                rho,
                -tol.rank_correlation,
            ));
            let (first, last) = first_last(report, |r| r.err_mean)?;
            verdicts.push(Verdict::below(
                "final-error",
                last,
                first * tol.decrease_ratio,
            ));
            let mut worst: f64 = 0.0;
            for r in recs {
                worst = worst.max((r.err_mean - r.get("h1_error")?).abs());
            }
            verdicts.push(Verdict::at_most(
                "hk-h1-agreement",
                worst,
                tol.norm_agreement,
            ));
        }
        StudyKind::EquivalenceCheck => {
            for (key, limit) in [
                ("methods", tol.equivalence),
                ("norm", tol.equivalence),
                ("isometry", tol.equivalence),
                ("roundtrip", tol.equivalence),
                ("representer", tol.representer),
            ] {
                let mut worst: f64 = 0.0;
                for r in recs {
                    worst = worst.max(r.get(key)?);
                }
                verdicts.push(Verdict::at_most(&format!("{key}-deviation"), worst, limit));
            }
        }
        StudyKind::VarianceSweep => {
            let pts: Vec<(f64, f64)> = recs.iter().map(|r| (r.x, r.err_mean)).collect();
            let f = fit_rate(&pts).context(|| "variance fit".into())?;
            let b = report.config.problem.b;
            verdicts.push(Verdict::at_least(
                "variance-slope",
                f.slope,
                -(1.0 + 1.0 / b) - tol.variance_slope,
            ));
            fit = Some(f);
        }
    }
    Ok((fit, verdicts))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Json,
    Csv,
}

/// Writes through a temporary file in the target directory and renames it
/// into place, so a failed write leaves nothing behind.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let io = |source| Error::Io {
        path: path.display().to_string(),
        source,
    };
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(bytes).map_err(io)?;
    tmp.as_file().sync_all().map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

pub fn write_report(report: &StudyReport, format: ReportFormat, path: &Path) -> Result<()> {
    let text = match format {
        ReportFormat::Json => report.to_json()?,
        ReportFormat::Csv => report.to_csv(),
    };
    write_atomic(path, text.as_bytes())
}

pub fn read_report(path: &Path) -> Result<StudyReport> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    StudyReport::from_json(&text)
}
