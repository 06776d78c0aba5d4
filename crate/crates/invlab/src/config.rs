//! Study configuration: one JSON document per study.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use rkhs_invlab_core::{FilterKind, ProblemDescriptor, Scheme, WName, WSpec};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StudyKind {
    StatRate,
    DetRate,
    LemmaCheck,
    GammaStudy,
    EquivalenceCheck,
    VarianceSweep,
}

impl fmt::Display for StudyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StudyKind::StatRate => "stat-rate",
            StudyKind::DetRate => "det-rate",
            StudyKind::LemmaCheck => "lemma-check",
            StudyKind::GammaStudy => "gamma-study",
            StudyKind::EquivalenceCheck => "equivalence-check",
            StudyKind::VarianceSweep => "variance-sweep",
        })
    }
}

/// Which sampled estimator the Monte-Carlo studies use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimatorKind {
    /// `s(mu_j) sigma_j (1/n) sum_i Y_i u_j(X_i)`.
    Paper,
    /// `s(A*_x A_x) A*_x y` on the empirical operator.
    Learn,
}

/// Reference exponent for det-rate studies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DetTheory {
    /// `4r/(2r+1)` with `lambda ~ delta^{2/(2r+1)}`.
    Classical,
    /// The statistical upper rate carried over by `convert_upper`.
    Converted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PerturbationChoice {
    RandomUnit,
    FixedMode(usize),
    FilterAdversarial,
}

/// `lambda = c n^{-exponent}` or `lambda = c delta^{exponent}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub c: f64,
    pub exponent: f64,
}

/// Log-spaced `lambda` values; bounds default to `[10 mu_J, mu_1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LambdaRange {
    #[serde(default)]
    pub lo: Option<f64>,
    #[serde(default)]
    pub hi: Option<f64>,
    pub count: usize,
}

impl Default for LambdaRange {
    fn default() -> Self {
        Self {
            lo: None,
            hi: None,
            count: 12,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    /// Allowed `|fitted - theory|` for rate slopes (det-rate uses `det_slope`).
    pub slope: f64,
    pub det_slope: f64,
    /// Required rank correlation is below `-rank_correlation`.
    pub rank_correlation: f64,
    /// Final error must be below `initial * decrease_ratio`.
    pub decrease_ratio: f64,
    /// Multiplier on Monte-Carlo standard errors.
    pub se_multiplier: f64,
    /// `|H_K - H_1|` agreement of the gamma-study distances.
    pub norm_agreement: f64,
    /// Relative deviations of the equivalence identities.
    pub equivalence: f64,
    /// Relative deviation of the iterative representer solve.
    pub representer: f64,
    /// Slack below the variance-bound slope `-(1 + 1/b)`.
    pub variance_slope: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            slope: 0.12,
            det_slope: 0.15,
            rank_correlation: 0.9,
            decrease_ratio: 0.1,
            se_multiplier: 3.0,
            norm_agreement: 1e-10,
            equivalence: 1e-10,
            representer: 1e-6,
            variance_slope: 0.15,
        }
    }
}

fn default_problem() -> ProblemDescriptor {
    ProblemDescriptor {
        modes: 100,
        b: 2.0,
        d: 10.0,
        r: 1.0,
        w_spec: WSpec::Named(WName::Harmonic),
        seed: 0,
        radius: 1.0,
    }
}

fn default_filter() -> FilterKind {
    FilterKind::Tikhonov
}

fn default_estimator() -> EstimatorKind {
    EstimatorKind::Learn
}

fn default_sigma() -> f64 {
    0.1
}

fn default_scheme() -> Scheme {
    Scheme::Grid
}

fn default_replicates() -> u64 {
    100
}

fn default_det_theory() -> DetTheory {
    DetTheory::Classical
}

fn default_perturbation() -> PerturbationChoice {
    PerturbationChoice::FilterAdversarial
}

fn default_trials() -> usize {
    20
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyConfig {
    pub kind: StudyKind,
    #[serde(default = "default_problem")]
    pub problem: ProblemDescriptor,
    #[serde(default = "default_filter")]
    pub filter: FilterKind,
    #[serde(default = "default_estimator")]
    pub estimator: EstimatorKind,
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    #[serde(default = "default_scheme")]
    pub scheme: Scheme,
    #[serde(default)]
    pub n_grid: Vec<u64>,
    #[serde(default)]
    pub delta_grid: Vec<f64>,
    /// Fixed sample size (lemma-check, variance-sweep).
    #[serde(default)]
    pub n: Option<u64>,
    /// Fixed regularization parameter (lemma-check, gamma-study, equivalence-check).
    #[serde(default)]
    pub lambda: Option<f64>,
    #[serde(default)]
    pub lambda_range: LambdaRange,
    /// Defaults to the theory exponent of the study when absent.
    #[serde(default)]
    pub schedule: Option<Schedule>,
    #[serde(default = "default_det_theory")]
    pub det_theory: DetTheory,
    /// `gamma` fed to the rate conversion; defaults to `r + 1/2`.
    #[serde(default)]
    pub gamma: Option<f64>,
    #[serde(default = "default_perturbation")]
    pub perturbation: PerturbationChoice,
    #[serde(default = "default_replicates")]
    pub replicates: u64,
    /// Random problems drawn by equivalence-check.
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub tolerances: Tolerances,
}

impl StudyConfig {
    /// Preset matching the default study of each kind.
    pub fn preset(kind: StudyKind) -> Self {
        let mut c = StudyConfig {
            kind,
            problem: default_problem(),
            filter: default_filter(),
            estimator: default_estimator(),
            sigma: default_sigma(),
            scheme: default_scheme(),
            n_grid: Vec::new(),
            delta_grid: Vec::new(),
            n: None,
            lambda: None,
            lambda_range: LambdaRange::default(),
            schedule: None,
            det_theory: default_det_theory(),
            gamma: None,
            perturbation: default_perturbation(),
            replicates: default_replicates(),
            trials: default_trials(),
            seed: 20240917,
            tolerances: Tolerances::default(),
        };
        match kind {
            StudyKind::StatRate => {
                c.n_grid = (5..=12).map(|k| 1u64 << k).collect();
                c.schedule = Some(Schedule {
                    c: 1.0,
                    exponent: 1.0 / 3.5,
                });
            }
            StudyKind::DetRate => {
                c.delta_grid = (3..=10).rev().map(|k| 2f64.powi(-k)).collect();
                c.replicates = 1;
            }
            StudyKind::LemmaCheck => {
                c.n = Some(200);
                c.lambda = Some(0.05);
                c.estimator = EstimatorKind::Paper;
                c.replicates = 2000;
            }
            StudyKind::GammaStudy => {
                c.problem.modes = 1024;
                c.n_grid = (2..=9).map(|k| 1u64 << k).collect();
                c.lambda = Some(0.1);
                c.sigma = 0.0;
                c.replicates = 1;
            }
            StudyKind::EquivalenceCheck => {
                c.lambda = None;
                c.replicates = 1;
            }
            StudyKind::VarianceSweep => {
                c.n = Some(500);
                c.replicates = 500;
            }
        }
        c
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let config: StudyConfig =
            serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// Applies `key=value` overrides with dotted paths, e.g.
    /// `problem.J=50` or `tolerances.slope=0.2`. Values are parsed as JSON
    /// and fall back to a plain string. Keys must already exist in the
    /// fully populated config.
    pub fn with_overrides<S: AsRef<str>>(&self, overrides: &[S]) -> Result<Self> {
        let mut doc = serde_json::to_value(self).map_err(|e| Error::Config(e.to_string()))?;
        for item in overrides {
            let item = item.as_ref();
            let (key, raw) = item
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("override '{item}' is not KEY=VALUE")))?;
            let value: Value =
                serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
            let mut slot = &mut doc;
            for part in key.split('.') {
                slot = match slot {
                    Value::Object(map) => map
                        .get_mut(part)
                        .ok_or_else(|| Error::Config(format!("unknown config key '{key}'")))?,
                    _ => return Err(Error::Config(format!("unknown config key '{key}'"))),
                };
            }
            *slot = value;
        }
        let config: StudyConfig =
            serde_json::from_value(doc).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    /// Collects every offending field instead of stopping at the first.
    pub fn validate(&self) -> Result<()> {
        let mut bad: Vec<String> = Vec::new();
        let p = &self.problem;
        if p.modes == 0 {
            bad.push("problem.J must be >= 1".into());
        }
        if !(p.b > 1.0) || !p.b.is_finite() {
            bad.push("problem.b must exceed 1".into());
        }
        if !(p.d > 0.0) || !p.d.is_finite() {
            bad.push("problem.d must be positive".into());
        }
        if !(p.r > 0.0) || !p.r.is_finite() {
            bad.push("problem.r must be positive".into());
        }
        if let WSpec::Explicit(w) = &p.w_spec {
            if w.len() != p.modes {
                bad.push(format!(
                    "problem.w_spec has {} entries, expected J = {}",
                    w.len(),
                    p.modes
                ));
            }
        }
        if !(self.sigma >= 0.0) || !self.sigma.is_finite() {
            bad.push("sigma must be nonnegative".into());
        }
        if self.replicates < 1 {
            bad.push("replicates must be >= 1".into());
        }
        if !strictly_increasing(self.n_grid.iter().map(|&n| n as f64))
            || self.n_grid.first() == Some(&0)
        {
            bad.push("n_grid must be strictly increasing and positive".into());
        }
        if !strictly_increasing(self.delta_grid.iter().copied())
            || self.delta_grid.iter().any(|d| !(*d > 0.0))
        {
            bad.push("delta_grid must be strictly increasing and positive".into());
        }
        if let Some(l) = self.lambda {
            if !(l > 0.0) || !l.is_finite() {
                bad.push("lambda must be positive".into());
            }
        }
        if let Some(s) = self.schedule {
            if !(s.c > 0.0) || !(s.exponent > 0.0) {
                bad.push("schedule.c and schedule.exponent must be positive".into());
            }
        }
        if let Some(g) = self.gamma {
            if !(g > 0.0) {
                bad.push("gamma must be positive".into());
            }
        }
        let lr = &self.lambda_range;
        if lr.count < 2 {
            bad.push("lambda_range.count must be >= 2".into());
        }
        if let (Some(lo), Some(hi)) = (lr.lo, lr.hi) {
            if !(lo > 0.0) || !(hi > lo) {
                bad.push("lambda_range needs 0 < lo < hi".into());
            }
        }
        if let PerturbationChoice::FixedMode(j) = self.perturbation {
            if j == 0 || j > p.modes {
                bad.push(format!("perturbation fixed mode {j} outside 1..=J"));
            }
        }
        let t = &self.tolerances;
        for (name, v) in [
            ("slope", t.slope),
            ("det_slope", t.det_slope),
            ("rank_correlation", t.rank_correlation),
            ("decrease_ratio", t.decrease_ratio),
            ("se_multiplier", t.se_multiplier),
            ("norm_agreement", t.norm_agreement),
            ("equivalence", t.equivalence),
            ("representer", t.representer),
            ("variance_slope", t.variance_slope),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                bad.push(format!("tolerances.{name} must be positive"));
            }
        }

        match self.kind {
            StudyKind::StatRate => {
                if self.n_grid.len() < 3 {
                    bad.push("stat-rate needs at least 3 n_grid points".into());
                }
            }
            StudyKind::DetRate => {
                if self.delta_grid.len() < 2 {
                    bad.push("det-rate needs at least 2 delta_grid points".into());
                }
            }
            StudyKind::LemmaCheck => {
                if self.n.is_none() {
                    bad.push("lemma-check needs n".into());
                }
                if self.lambda.is_none() {
                    bad.push("lemma-check needs lambda".into());
                }
                if self.replicates < 2 {
                    bad.push("lemma-check needs at least 2 replicates".into());
                }
            }
            StudyKind::GammaStudy => {
                if self.n_grid.len() < 2 {
                    bad.push("gamma-study needs at least 2 n_grid points".into());
                }
                if self.lambda.is_none() {
                    bad.push("gamma-study needs lambda".into());
                }
                if self.filter != FilterKind::Tikhonov {
                    bad.push("gamma-study is defined for the tikhonov filter only".into());
                }
            }
            StudyKind::EquivalenceCheck => {
                if self.trials == 0 {
                    bad.push("trials must be >= 1".into());
                }
            }
            StudyKind::VarianceSweep => {
                if self.n.is_none() {
                    bad.push("variance-sweep needs n".into());
                }
                if self.replicates < 2 {
                    bad.push("variance-sweep needs at least 2 replicates".into());
                }
                if !(self.sigma > 0.0) {
                    bad.push("variance-sweep needs sigma > 0".into());
                }
            }
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(bad))
        }
    }
}

fn strictly_increasing(mut it: impl Iterator<Item = f64>) -> bool {
    let Some(mut prev) = it.next() else {
        return true;
    };
    for v in it {
        if !(v > prev) {
            return false;
        }
        prev = v;
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_are_valid_and_round_trip() {
        for kind in [
            StudyKind::StatRate,
            StudyKind::DetRate,
            StudyKind::LemmaCheck,
            StudyKind::GammaStudy,
            StudyKind::EquivalenceCheck,
            StudyKind::VarianceSweep,
        ] {
            let c = StudyConfig::preset(kind);
            c.validate().unwrap();
            let text = serde_json::to_string(&c).unwrap();
            assert_eq!(StudyConfig::from_json(&text).unwrap(), c);
        }
    }

    #[test]
    fn minimal_document_uses_defaults() {
        let c = StudyConfig::from_json(
            r#"{"kind": "gamma-study", "n_grid": [4, 8, 16], "lambda": 0.1}"#,
        )
        .unwrap();
        assert_eq!(c.problem.modes, 100);
        assert_eq!(c.filter, FilterKind::Tikhonov);
    }

    #[test]
    fn validation_lists_every_offending_field() {
        let mut c = StudyConfig::preset(StudyKind::StatRate);
        c.n_grid = vec![64, 32, 128];
        c.replicates = 0;
        c.tolerances.slope = 0.0;
        match c.validate() {
            Err(Error::Validation(fields)) => {
                assert_eq!(fields.len(), 3, "{fields:?}");
                assert!(fields.iter().any(|f| f.contains("n_grid")));
                assert!(fields.iter().any(|f| f.contains("replicates")));
                assert!(fields.iter().any(|f| f.contains("tolerances.slope")));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn dotted_overrides() {
        let c = StudyConfig::preset(StudyKind::StatRate);
        let o = c
            .with_overrides(&[
                "problem.J=50",
                "sigma=0.2",
                "scheme=iid-uniform",
                "tolerances.slope=0.2",
            ])
            .unwrap();
        assert_eq!(o.problem.modes, 50);
        assert_eq!(o.sigma, 0.2);
        assert_eq!(o.scheme, Scheme::IidUniform);
        assert_eq!(o.tolerances.slope, 0.2);
        assert!(matches!(
            c.with_overrides(&["problem.nope=1"]),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            c.with_overrides(&["sigma"]),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            c.with_overrides(&["replicates=0"]),
            Err(Error::Validation(_))
        ));
    }
}
