//! Error calculus linking sample size and noise level.
//!
//! * `hs_norm`: `||L^lambda||_HS` with `L^lambda = s_lambda(A*A) A*`.
//! * `epsilon_lambda`: `eps(lambda) = ||f^lambda - f|| / ||L^lambda||_HS`.
//! * `delta_of` / `n_of`: the noise level matched to `n` samples and back,
//!   `Delta(n) = (sigma^2/n) / (sqrt(sigma^2/n + eps^2) + eps)` and
//!   `N(delta) = sigma^2 / (delta^2 + 2 delta eps)`.
//! * `convert_upper` / `convert_lower`: rate exponents carried across the
//!   two settings.

use alloc::format;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{parameter, shape, Error, Result};
use crate::filters::FilterSpec;
use crate::regularization::solve_continuous;
use crate::spectral::{forward_data, GroundTruth, SpectralProblem};

/// `sqrt(sum_j s_lambda(mu_j)^2 mu_j)`.
pub fn hs_norm(problem: &SpectralProblem, filter: &FilterSpec) -> f64 {
    libm::sqrt(
        problem
            .mu
            .iter()
            .map(|&m| {
                let s = filter.eval(m);
                s * s * m
            })
            .sum::<f64>(),
    )
}

/// `max_j s_lambda(mu_j) sqrt(mu_j)`.
pub fn operator_norm(problem: &SpectralProblem, filter: &FilterSpec) -> f64 {
    problem
        .mu
        .iter()
        .zip(&problem.sigma_sv)
        .map(|(&m, &s)| filter.eval(m) * s)
        .fold(0.0, f64::max)
}

/// `||f^lambda - f||` for clean data.
pub fn bias_norm(
    problem: &SpectralProblem,
    filter: &FilterSpec,
    f_true: &GroundTruth,
) -> Result<f64> {
    let y = forward_data(problem, &f_true.coeffs)?;
    let est = solve_continuous(problem, filter, &y)?;
    Ok(libm::sqrt(
        est.coeffs
            .iter()
            .zip(&f_true.coeffs)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>(),
    ))
}

pub fn epsilon_lambda(
    problem: &SpectralProblem,
    filter: &FilterSpec,
    f_true: &GroundTruth,
) -> Result<f64> {
    let hs = hs_norm(problem, filter);
    if hs == 0.0 {
        return Err(Error::DegenerateFilter(format!(
            "{} filter with lambda = {} cuts every mode",
            filter.kind, filter.lambda
        )));
    }
    Ok(bias_norm(problem, filter, f_true)? / hs)
}

/// Noise standard deviation paired with `eps(lambda)` at one `lambda`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateLink {
    pub sigma: f64,
    pub epsilon: f64,
    pub lambda: f64,
}

impl RateLink {
    pub fn new(sigma: f64, epsilon: f64, lambda: f64) -> Result<Self> {
        if !(sigma >= 0.0) || !(epsilon >= 0.0) || !(lambda > 0.0) {
            return Err(parameter(format!(
                "rate link needs sigma >= 0, epsilon >= 0, lambda > 0 (got {sigma}, {epsilon}, {lambda})"
            )));
        }
        Ok(Self {
            sigma,
            epsilon,
            lambda,
        })
    }

    pub fn from_problem(
        problem: &SpectralProblem,
        filter: &FilterSpec,
        f_true: &GroundTruth,
        sigma: f64,
    ) -> Result<Self> {
        Self::new(
            sigma,
            epsilon_lambda(problem, filter, f_true)?,
            filter.lambda,
        )
    }
}

pub fn delta_of(n: u64, link: &RateLink) -> Result<f64> {
    if n == 0 {
        return Err(Error::Domain("sample size must be at least 1".into()));
    }
    let v = link.sigma * link.sigma / n as f64;
    let denom = libm::sqrt(v + link.epsilon * link.epsilon) + link.epsilon;
    Ok(if denom == 0.0 { 0.0 } else { v / denom })
}

/// `(N(delta), floor(N(delta)))`.
pub fn n_of(delta: f64, link: &RateLink) -> Result<(f64, u64)> {
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(Error::Domain(format!(
            "noise level must be positive, got {delta}"
        )));
    }
    let n = link.sigma * link.sigma / (delta * delta + 2.0 * delta * link.epsilon);
    Ok((n, libm::floor(n) as u64))
}

/// Exponents entering a conversion.
///
/// `schedule` is `p` (`lambda_n ~ n^{-p}`) for [`convert_upper`] and
/// `p*` (`lambda_delta ~ delta^{p*}`) for [`convert_lower`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateExponents {
    pub alpha: f64,
    pub schedule: f64,
    pub gamma: f64,
}

impl RateExponents {
    pub fn new(alpha: f64, schedule: f64, gamma: f64) -> Result<Self> {
        let e = Self {
            alpha,
            schedule,
            gamma,
        };
        e.validate()?;
        Ok(e)
    }

    fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("alpha", self.alpha),
            ("schedule exponent", self.schedule),
            ("gamma", self.gamma),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(parameter(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    /// Optimal statistical upper rate under `omega(r, R)` and `mu_j <= d j^{-b}`:
    /// `alpha = 2r/(2r+1+1/b)`, `p = 1/(2r+1+1/b)`.
    pub fn statistical_upper(r: f64, b: f64, gamma: f64) -> Result<Self> {
        let k = 2.0 * r + 1.0 + 1.0 / b;
        Self::new(2.0 * r / k, 1.0 / k, gamma)
    }

    /// Classical deterministic lower rate `||.||^2 ~ delta^{4r/(2r+1)}` with
    /// `lambda ~ delta^{2/(2r+1)}`.
    pub fn classical_lower(r: f64, gamma: f64) -> Result<Self> {
        let k = 2.0 * r + 1.0;
        Self::new(4.0 * r / k, 2.0 / k, gamma)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Branch {
    Fast,
    Slow,
}

impl fmt::Display for Branch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Branch::Fast => "fast",
            Branch::Slow => "slow",
        })
    }
}

/// Result of a conversion: the converted rate exponent and the matching
/// exponent of the regularization schedule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Conversion {
    pub rate_exponent: f64,
    pub lambda_exponent: f64,
    pub branch: Branch,
}

/// Statistical upper rate `n^{-alpha}` to a noise-level rate `delta^{...}`.
pub fn convert_upper(exp: &RateExponents) -> Result<Conversion> {
    exp.validate()?;
    let pg = exp.schedule * exp.gamma;
    Ok(if pg >= 0.5 {
        Conversion {
            rate_exponent: 2.0 * exp.alpha,
            lambda_exponent: 2.0 * exp.schedule,
            branch: Branch::Fast,
        }
    } else {
        Conversion {
            rate_exponent: exp.alpha / (1.0 - pg),
            lambda_exponent: exp.schedule / (1.0 - pg),
            branch: Branch::Slow,
        }
    })
}

/// Deterministic lower rate `delta^{alpha}` to a sample-size rate `n^{-...}`.
pub fn convert_lower(exp: &RateExponents) -> Result<Conversion> {
    exp.validate()?;
    let pg = exp.schedule * exp.gamma;
    Ok(if pg >= 1.0 {
        Conversion {
            rate_exponent: exp.alpha / 2.0,
            lambda_exponent: exp.schedule / 2.0,
            branch: Branch::Fast,
        }
    } else {
        Conversion {
            rate_exponent: exp.alpha / (1.0 + pg),
            lambda_exponent: exp.schedule / (1.0 + pg),
            branch: Branch::Slow,
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TauVariant {
    General,
    Tikhonov,
}

/// Ratio of the classical deterministic exponent to the converted one.
pub fn loss_factor_tau(r: f64, b: f64, variant: TauVariant) -> Result<f64> {
    if !(r > 0.0) || !r.is_finite() {
        return Err(parameter(format!("r must be positive, got {r}")));
    }
    if !(b > 1.0) {
        return Err(parameter(format!("b must exceed 1, got {b}")));
    }
    let extra = match variant {
        TauVariant::General => 1.0 / b,
        TauVariant::Tikhonov => 2.0 / b,
    };
    Ok((2.0 * r + 1.0 + extra) / (2.0 * r + 1.0))
}

/// Ordinary least squares in log-log coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    /// Standard error of the slope (0 with only two points).
    pub stderr: f64,
    /// `(ln x, ln y)` pairs used in the fit.
    pub points: Vec<(f64, f64)>,
}

pub fn fit_rate(points: &[(f64, f64)]) -> Result<RateFit> {
    if let Some((x, y)) = points.iter().find(|(x, y)| !(*x > 0.0) || !(*y > 0.0)) {
        return Err(Error::Domain(format!(
            "log-log fit needs positive data, got ({x}, {y})"
        )));
    }
    let logs: Vec<(f64, f64)> = points
        .iter()
        .map(|(x, y)| (libm::log(*x), libm::log(*y)))
        .collect();
    let m = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / m;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    if logs.len() < 2 || !(sxx > 0.0) {
        return Err(shape("rate fit needs at least two distinct x values"));
    }
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let stderr = if logs.len() > 2 {
        let ssr: f64 = logs
            .iter()
            .map(|p| {
                let r = p.1 - intercept - slope * p.0;
                r * r
            })
            .sum();
        libm::sqrt(ssr / (m - 2.0) / sxx)
    } else {
        0.0
    };
    Ok(RateFit {
        slope,
        intercept,
        stderr,
        points: logs,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScheduleKind {
    /// `c n^{-exponent}`.
    ByN,
    /// `c delta^{exponent}`.
    ByDelta,
}

pub fn lambda_schedule(kind: ScheduleKind, c: f64, exponent: f64, value: f64) -> Result<f64> {
    if !(c > 0.0) || !(exponent > 0.0) || !(value > 0.0) {
        return Err(parameter(format!(
            "schedule needs c, exponent, value > 0 (got {c}, {exponent}, {value})"
        )));
    }
    Ok(match kind {
        ScheduleKind::ByN => c * libm::pow(value, -exponent),
        ScheduleKind::ByDelta => c * libm::pow(value, exponent),
    })
}

/// Spearman rank correlation (average ranks for ties).
pub fn rank_correlation(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(shape(
            "rank correlation needs two equal-length sequences of length >= 2",
        ));
    }
    let rx = ranks(xs);
    let ry = ranks(ys);
    let m = rx.len() as f64;
    let mx = rx.iter().sum::<f64>() / m;
    let my = ry.iter().sum::<f64>() / m;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Ok(0.0);
    }
    Ok(sxy / libm::sqrt(sxx * syy))
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut out = alloc::vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            out[k] = avg;
        }
        i = j + 1;
    }
    out
}
