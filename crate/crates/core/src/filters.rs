//! Spectral regularization filters `s_lambda`.
//!
//! A filter turns `f = B^{-1} A* y` into `f^lambda = s_lambda(B) A* y`. Each
//! family carries the constants of its three defining bounds:
//!
//! * `sup_t |t s_lambda(t)| <= D`
//! * `sup_t |lambda s_lambda(t)| <= E`
//! * `sup_t t^nu |1 - t s_lambda(t)| <= C_nu lambda^nu` for `0 <= nu <= q`
//!
//! [`certify`] checks all three numerically on a grid of spectral values.

use alloc::format;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{parameter, Error, Result};
use crate::spectral::SpectralProblem;

/// Qualification reported for families with infinite qualification.
pub const QUALIFICATION_CAP: f64 = 8.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FilterKind {
    Tikhonov,
    /// Spectral cut-off (truncated SVD).
    Cutoff,
    Landweber,
}

impl fmt::Display for FilterKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FilterKind::Tikhonov => "tikhonov",
            FilterKind::Cutoff => "cutoff",
            FilterKind::Landweber => "landweber",
        })
    }
}

impl FromStr for FilterKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tikhonov" => Ok(FilterKind::Tikhonov),
            "cutoff" | "tsvd" => Ok(FilterKind::Cutoff),
            "landweber" => Ok(FilterKind::Landweber),
            other => Err(parameter(format!("unknown filter kind '{other}'"))),
        }
    }
}

/// `C_nu` for one value of `nu`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QualificationConstant {
    pub nu: f64,
    pub c: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterConstants {
    #[serde(rename = "D")]
    pub d: f64,
    #[serde(rename = "E")]
    pub e: f64,
    /// Qualification, capped at [`QUALIFICATION_CAP`].
    pub q: f64,
    pub c_nu: Vec<QualificationConstant>,
}

impl FilterConstants {
    fn for_kind(kind: FilterKind) -> Self {
        let half_steps = |top: f64| (0..=(2.0 * top) as usize).map(|k| k as f64 / 2.0);
        match kind {
            FilterKind::Tikhonov => FilterConstants {
                d: 1.0,
                e: 1.0,
                q: 1.0,
                c_nu: alloc::vec![
                    QualificationConstant { nu: 0.0, c: 1.0 },
                    QualificationConstant { nu: 0.5, c: 0.5 },
                    QualificationConstant { nu: 1.0, c: 1.0 },
                ],
            },
            FilterKind::Cutoff => FilterConstants {
                d: 1.0,
                e: 1.0,
                q: QUALIFICATION_CAP,
                c_nu: half_steps(QUALIFICATION_CAP)
                    .map(|nu| QualificationConstant { nu, c: 1.0 })
                    .collect(),
            },
            // sup_{t in [0,1]} t^nu (1-t)^m <= (nu/m)^nu = nu^nu lambda^nu.
            FilterKind::Landweber => FilterConstants {
                d: 1.0,
                e: 1.0,
                q: QUALIFICATION_CAP,
                c_nu: half_steps(QUALIFICATION_CAP)
                    .map(|nu| QualificationConstant {
                        nu,
                        c: libm::pow(nu, nu),
                    })
                    .collect(),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterSpec {
    pub kind: FilterKind,
    /// Regularization parameter; for Landweber exactly `1 / iterations`.
    pub lambda: f64,
    /// Landweber iteration count `m`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iterations: Option<u64>,
    pub constants: FilterConstants,
}

impl FilterSpec {
    /// Landweber rounds `1/lambda` to the nearest iteration count (at least one).
    pub fn new(kind: FilterKind, lambda: f64) -> Result<Self> {
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(parameter(format!(
                "lambda must be positive and finite, got {lambda}"
            )));
        }
        match kind {
            FilterKind::Landweber => {
                let m = libm::round(1.0 / lambda).max(1.0);
                if m > u64::MAX as f64 {
                    return Err(parameter("Landweber iteration count overflows"));
                }
                Self::landweber(m as u64)
            }
            _ => Ok(Self {
                kind,
                lambda,
                iterations: None,
                constants: FilterConstants::for_kind(kind),
            }),
        }
    }

    pub fn tikhonov(lambda: f64) -> Result<Self> {
        Self::new(FilterKind::Tikhonov, lambda)
    }

    pub fn cutoff(lambda: f64) -> Result<Self> {
        Self::new(FilterKind::Cutoff, lambda)
    }

    pub fn landweber(iterations: u64) -> Result<Self> {
        if iterations == 0 {
            return Err(parameter("Landweber needs at least one iteration"));
        }
        Ok(Self {
            kind: FilterKind::Landweber,
            lambda: 1.0 / iterations as f64,
            iterations: Some(iterations),
            constants: FilterConstants::for_kind(FilterKind::Landweber),
        })
    }

    /// `s_lambda(t)` without domain checks. `t = 0` yields the continuous limit
    /// (`1/lambda`, `0`, `m`), which is what null directions of an empirical
    /// operator need.
    pub fn eval(&self, t: f64) -> f64 {
        match self.kind {
            FilterKind::Tikhonov => 1.0 / (t + self.lambda),
            FilterKind::Cutoff => {
                if t >= self.lambda && t > 0.0 {
                    1.0 / t
                } else {
                    0.0
                }
            }
            FilterKind::Landweber => {
                let m = self.iterations.unwrap_or(1);
                if t == 0.0 {
                    m as f64
                } else if t > 0.0 && t <= 1.0 {
                    // 1 - (1-t)^m computed without cancellation for small t.
                    -libm::expm1(m as f64 * libm::log1p(-t)) / t
                } else {
                    (1.0 - libm::pow(1.0 - t, m as f64)) / t
                }
            }
        }
    }

    /// Rejects filters that cannot be applied on `problem`'s spectrum.
    pub fn check_spectrum(&self, problem: &SpectralProblem) -> Result<()> {
        if self.kind == FilterKind::Landweber && problem.mu_max() > 1.0 {
            return Err(Error::Model(format!(
                "Landweber requires mu_1 <= 1 but mu_1 = {}; rescale the problem with normalized()",
                problem.mu_max()
            )));
        }
        Ok(())
    }
}

/// Checked `s_lambda(t)` for `t` in the spectrum (`0 < t`, and `t <= 1` for Landweber).
pub fn filter_value(filter: &FilterSpec, t: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::Domain(format!(
            "spectral value must be positive, got {t}"
        )));
    }
    if filter.kind == FilterKind::Landweber && t > 1.0 {
        return Err(Error::Model(format!(
            "Landweber evaluated at t = {t} > 1; the operator must be rescaled so mu_1 <= 1"
        )));
    }
    Ok(filter.eval(t))
}

/// Slack of each defining bound; a property holds when its margin is `>= 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub lambda: f64,
    pub d_margin: f64,
    pub e_margin: f64,
    /// `(nu, C_nu lambda^nu - sup_t t^nu |1 - t s(t)|)`.
    pub qualification_margins: Vec<(f64, f64)>,
}

impl Certificate {
    pub fn worst_margin(&self) -> f64 {
        self.qualification_margins
            .iter()
            .map(|(_, m)| *m)
            .fold(self.d_margin.min(self.e_margin), f64::min)
    }
}

/// Evaluates the three defining suprema of `filter` over `t_grid`.
pub fn certify(filter: &FilterSpec, t_grid: &[f64]) -> Certificate {
    let lambda = filter.lambda;
    let mut sup_d: f64 = 0.0;
    let mut sup_e: f64 = 0.0;
    let mut sup_q = alloc::vec![0.0_f64; filter.constants.c_nu.len()];
    for &t in t_grid {
        let s = filter.eval(t);
        sup_d = sup_d.max((t * s).abs());
        sup_e = sup_e.max((lambda * s).abs());
        let residual = (1.0 - t * s).abs();
        for (slot, qc) in sup_q.iter_mut().zip(&filter.constants.c_nu) {
            *slot = slot.max(libm::pow(t, qc.nu) * residual);
        }
    }
    Certificate {
        lambda,
        d_margin: filter.constants.d - sup_d,
        e_margin: filter.constants.e - sup_e,
        qualification_margins: filter
            .constants
            .c_nu
            .iter()
            .zip(&sup_q)
            .map(|(qc, sup)| (qc.nu, qc.c * libm::pow(lambda, qc.nu) - sup))
            .collect(),
    }
}

/// `count` log-spaced points covering `[lo, hi]` inclusive.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return alloc::vec![lo];
    }
    let (a, b) = (libm::log(lo), libm::log(hi));
    (0..count)
        .map(|k| {
            if k == 0 {
                lo
            } else if k + 1 == count {
                hi
            } else {
                libm::exp(a + (b - a) * k as f64 / (count - 1) as f64)
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::build_power_law_problem;
    use approx::assert_relative_eq;

    #[test]
    fn value_examples() {
        let tik = FilterSpec::tikhonov(1.0).unwrap();
        assert_eq!(filter_value(&tik, 1.0).unwrap(), 0.5);
        let cut = FilterSpec::cutoff(0.25).unwrap();
        assert_eq!(filter_value(&cut, 0.5).unwrap(), 2.0);
        assert_eq!(filter_value(&cut, 0.1).unwrap(), 0.0);
        let lw = FilterSpec::landweber(2).unwrap();
        assert_eq!(lw.lambda, 0.5);
        assert_relative_eq!(filter_value(&lw, 0.5).unwrap(), 1.5, max_relative = 1e-15);
        assert_eq!(FilterSpec::new(FilterKind::Landweber, 0.5).unwrap(), lw);
    }

    #[test]
    fn value_errors() {
        let tik = FilterSpec::tikhonov(1.0).unwrap();
        assert!(matches!(filter_value(&tik, 0.0), Err(Error::Domain(_))));
        assert!(matches!(filter_value(&tik, -1.0), Err(Error::Domain(_))));
        let lw = FilterSpec::landweber(3).unwrap();
        assert!(matches!(filter_value(&lw, 1.5), Err(Error::Model(_))));
        let big = build_power_law_problem(3, 2.0, 4.0).unwrap();
        assert!(matches!(lw.check_spectrum(&big), Err(Error::Model(_))));
        assert!(lw.check_spectrum(&big.normalized()).is_ok());
        assert!(FilterSpec::tikhonov(0.0).is_err());
        assert!(FilterSpec::landweber(0).is_err());
    }

    #[test]
    fn landweber_matches_geometric_sum() {
        let lw = FilterSpec::landweber(7).unwrap();
        for &t in &[1e-12, 1e-6, 0.01, 0.3, 0.999, 1.0, 1.4] {
            let direct: f64 = (0..7).map(|k| libm::pow(1.0 - t, k as f64)).sum();
            assert_relative_eq!(lw.eval(t), direct, max_relative = 1e-12);
        }
        assert_eq!(lw.eval(0.0), 7.0);
    }

    #[test]
    fn parse_kind() {
        assert_eq!("cutoff".parse::<FilterKind>().unwrap(), FilterKind::Cutoff);
        assert!("spline".parse::<FilterKind>().is_err());
    }

    #[test]
    fn certificates_hold_for_all_families() {
        let p = build_power_law_problem(100, 2.0, 1.0).unwrap();
        let grid = log_grid(p.mu_min(), p.mu_max(), 2000);
        for lambda in log_grid(1e-4, 1.0, 12) {
            for kind in [
                FilterKind::Tikhonov,
                FilterKind::Cutoff,
                FilterKind::Landweber,
            ] {
                let f = FilterSpec::new(kind, lambda).unwrap();
                let c = certify(&f, &grid);
                assert!(c.worst_margin() >= -1e-12, "{kind} lambda={lambda}: {c:?}");
            }
        }
    }

    #[test]
    fn log_grid_endpoints() {
        let g = log_grid(1e-3, 10.0, 5);
        assert_eq!(g[0], 1e-3);
        assert_eq!(g[4], 10.0);
        assert_relative_eq!(g[2], libm::sqrt(1e-2), max_relative = 1e-12);
    }
}
