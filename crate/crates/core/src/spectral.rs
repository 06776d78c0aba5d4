//! Diagonal spectral test model.
//!
//! The forward operator is diagonal in the sine basis
//! `u_j(x) = v_j(x) = sqrt(2) sin(j pi x)` on `[0, 1]` with Lebesgue measure,
//! so `A v_j = sigma_j u_j` and `B = A*A` has eigenvalues `mu_j = sigma_j^2`.
//! All objects are truncated to the first `J` modes.

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::{PI, SQRT_2};

use serde::{Deserialize, Serialize};

use crate::error::{check_len, parameter, Error, Result};
use crate::rng::{Purpose, RngKey};

/// `sqrt(2) sin(j pi x)`, the `j`-th (1-based) basis function.
#[inline]
pub fn sine_basis(j: usize, x: f64) -> f64 {
    SQRT_2 * libm::sin(j as f64 * PI * x)
}

/// Fills `out[k] = sqrt(2) sin((k+1) pi x)` using the Chebyshev recurrence
/// `s_{k+1} = 2 cos(theta) s_k - s_{k-1}`.
pub fn sine_row(x: f64, out: &mut [f64]) {
    let theta = PI * x;
    let two_cos = 2.0 * libm::cos(theta);
    let mut prev = 0.0;
    let mut cur = libm::sin(theta);
    for slot in out.iter_mut() {
        *slot = SQRT_2 * cur;
        let next = two_cos * cur - prev;
        prev = cur;
        cur = next;
    }
}

pub(crate) fn check_unit_interval(x: f64) -> Result<()> {
    if (0.0..=1.0).contains(&x) {
        Ok(())
    } else {
        Err(Error::Domain(format!("point {x} outside [0, 1]")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Basis {
    #[default]
    Sine,
}

/// Which side of `A` a coefficient sequence lives on. Both use the sine basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Space {
    Input,
    Output,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralProblem {
    #[serde(rename = "J")]
    pub modes: usize,
    /// Eigenvalues `mu_j` of `B = A*A`.
    pub mu: Vec<f64>,
    /// Singular values `sigma_j = sqrt(mu_j)`.
    pub sigma_sv: Vec<f64>,
    pub decay_b: f64,
    pub decay_d: f64,
    pub basis: Basis,
    /// Factor the spectrum was divided by when normalised (1 if untouched).
    pub scale: f64,
}

/// `mu_j = d j^{-b}` for `j = 1..=J`.
pub fn build_power_law_problem(modes: usize, b: f64, d: f64) -> Result<SpectralProblem> {
    if modes == 0 {
        return Err(parameter("truncation order J must be at least 1"));
    }
    if !(b > 1.0) || !b.is_finite() {
        return Err(parameter(format!(
            "decay exponent b must exceed 1, got {b}"
        )));
    }
    if !(d > 0.0) || !d.is_finite() {
        return Err(parameter(format!(
            "decay constant d must be positive, got {d}"
        )));
    }
    let mu: Vec<f64> = (1..=modes).map(|j| d * libm::pow(j as f64, -b)).collect();
    let sigma_sv = mu.iter().map(|&m| libm::sqrt(m)).collect();
    Ok(SpectralProblem {
        modes,
        mu,
        sigma_sv,
        decay_b: b,
        decay_d: d,
        basis: Basis::Sine,
        scale: 1.0,
    })
}

impl SpectralProblem {
    pub fn len(&self) -> usize {
        self.modes
    }

    pub fn is_empty(&self) -> bool {
        self.modes == 0
    }

    pub fn mu_max(&self) -> f64 {
        self.mu[0]
    }

    pub fn mu_min(&self) -> f64 {
        self.mu[self.modes - 1]
    }

    /// `c^2 = sup_x K(x, x) = 2 sum_j mu_j`.
    pub fn c_squared(&self) -> f64 {
        2.0 * self.mu.iter().sum::<f64>()
    }

    /// Copy with the spectrum divided so that `mu_1 <= 1`; `scale` records the divisor.
    /// Used before Landweber iterations, which need `||B|| <= 1`.
    pub fn normalized(&self) -> SpectralProblem {
        let top = self.mu_max();
        if top <= 1.0 {
            return self.clone();
        }
        let mu: Vec<f64> = self.mu.iter().map(|m| m / top).collect();
        SpectralProblem {
            modes: self.modes,
            sigma_sv: mu.iter().map(|&m| libm::sqrt(m)).collect(),
            mu,
            decay_b: self.decay_b,
            decay_d: self.decay_d / top,
            basis: self.basis,
            scale: self.scale * top,
        }
    }

    /// Smallest slack of `a j^{-b} <= mu_j <= d j^{-b}` over all modes,
    /// relative to the bound. Nonnegative means the certificate holds.
    pub fn decay_certificate(&self, a: f64) -> f64 {
        let mut worst = f64::INFINITY;
        for (idx, &m) in self.mu.iter().enumerate() {
            let jb = libm::pow((idx + 1) as f64, -self.decay_b);
            let upper = self.decay_d * jb;
            let lower = a * jb;
            worst = worst.min((upper - m) / upper).min((m - lower) / upper);
        }
        worst
    }
}

/// Source-condition solution `f = B^r w`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub coeffs: Vec<f64>,
    pub r: f64,
    #[serde(rename = "R")]
    pub radius: f64,
    pub w: Vec<f64>,
}

pub fn make_source_solution(problem: &SpectralProblem, r: f64, w: &[f64]) -> Result<GroundTruth> {
    check_len("source element w", w.len(), problem.modes)?;
    if !(r > 0.0) {
        return Err(parameter(format!("smoothness r must be positive, got {r}")));
    }
    let coeffs = problem
        .mu
        .iter()
        .zip(w)
        .map(|(&m, &wj)| libm::pow(m, r) * wj)
        .collect();
    let radius = libm::sqrt(w.iter().map(|v| v * v).sum::<f64>());
    Ok(GroundTruth {
        coeffs,
        r,
        radius,
        w: w.to_vec(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DataKind {
    Clean,
    Perturbed,
}

/// Output-side function `y` in u-basis coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataFunction {
    pub coeffs: Vec<f64>,
    pub kind: DataKind,
    pub delta: f64,
}

/// `y = A f`, i.e. `y_j = sigma_j f_j`.
pub fn forward_data(problem: &SpectralProblem, f: &[f64]) -> Result<DataFunction> {
    check_len("input coefficients", f.len(), problem.modes)?;
    let coeffs = problem.sigma_sv.iter().zip(f).map(|(s, v)| s * v).collect();
    Ok(DataFunction {
        coeffs,
        kind: DataKind::Clean,
        delta: 0.0,
    })
}

/// Point value `sum_j c_j sqrt(2) sin(j pi x)`.
pub fn eval_function(
    problem: &SpectralProblem,
    coeffs: &[f64],
    _space: Space,
    x: f64,
) -> Result<f64> {
    check_len("coefficients", coeffs.len(), problem.modes)?;
    check_unit_interval(x)?;
    Ok(eval_unchecked(coeffs, x))
}

pub(crate) fn eval_unchecked(coeffs: &[f64], x: f64) -> f64 {
    let mut row = alloc::vec![0.0; coeffs.len()];
    sine_row(x, &mut row);
    row.iter().zip(coeffs).map(|(u, c)| u * c).sum()
}

/// How the source element `w` is chosen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum WSpec {
    Named(WName),
    Explicit(Vec<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WName {
    /// `w_j = 1`.
    Ones,
    /// I.i.d. random signs scaled to `||w|| = R`.
    UnitRandom,
    /// `w_j = 1/j`, square summable so `||w||` stays bounded as `J` grows.
    Harmonic,
}

fn default_radius() -> f64 {
    1.0
}

/// Serializable problem descriptor `{J, b, d, r, w_spec, seed}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemDescriptor {
    #[serde(rename = "J")]
    pub modes: usize,
    pub b: f64,
    pub d: f64,
    pub r: f64,
    pub w_spec: WSpec,
    #[serde(default)]
    pub seed: u64,
    /// Target `||w||` for `unit-random`.
    #[serde(rename = "R", default = "default_radius")]
    pub radius: f64,
}

impl ProblemDescriptor {
    pub fn build(&self) -> Result<(SpectralProblem, GroundTruth)> {
        let problem = build_power_law_problem(self.modes, self.b, self.d)?;
        let w = self.source_element()?;
        let truth = make_source_solution(&problem, self.r, &w)?;
        Ok((problem, truth))
    }

    pub fn source_element(&self) -> Result<Vec<f64>> {
        let n = self.modes;
        Ok(match &self.w_spec {
            WSpec::Named(WName::Ones) => alloc::vec![1.0; n],
            WSpec::Named(WName::Harmonic) => (1..=n).map(|j| 1.0 / j as f64).collect(),
            WSpec::Named(WName::UnitRandom) => {
                if !(self.radius >= 0.0) {
                    return Err(parameter("radius R must be nonnegative"));
                }
                let mut rng = RngKey::from(self.seed).stream(Purpose::Source);
                let amp = self.radius / libm::sqrt(n as f64);
                crate::rng::uniform_vec(&mut rng, n)
                    .into_iter()
                    .map(|u| if u < 0.5 { -amp } else { amp })
                    .collect()
            }
            WSpec::Explicit(w) => {
                check_len("explicit w_spec", w.len(), n)?;
                w.clone()
            }
        })
    }
}
