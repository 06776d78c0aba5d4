//! Sampling operator: turns a continuous output function into `n` noisy
//! point values, and produces bounded perturbations `y^delta` of the whole
//! function.

use alloc::format;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{check_len, parameter, shape, Error, Result};
use crate::filters::FilterSpec;
use crate::rkhs::DesignBasis;
use crate::rng::{normal_vec, uniform_vec, Purpose, RngKey};
use crate::spectral::{forward_data, DataFunction, DataKind, GroundTruth, SpectralProblem};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    /// Midpoint grid `x_i = (i - 1/2)/n`.
    Grid,
    /// I.i.d. uniform draws on `[0, 1]`.
    IidUniform,
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::Grid => "grid",
            Scheme::IidUniform => "iid-uniform",
        })
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "grid" => Ok(Scheme::Grid),
            "iid-uniform" => Ok(Scheme::IidUniform),
            other => Err(parameter(format!("unknown sampling scheme '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseKind {
    None,
    Gaussian,
}

/// Conditional law of `Y` given `X = x`: a Dirac mass at `y(x)` or
/// `N(y(x), sigma^2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub kind: NoiseKind,
    pub sigma: f64,
}

impl NoiseModel {
    pub const NONE: NoiseModel = NoiseModel {
        kind: NoiseKind::None,
        sigma: 0.0,
    };

    pub fn gaussian(sigma: f64) -> Result<Self> {
        if !(sigma >= 0.0) || !sigma.is_finite() {
            return Err(parameter(format!(
                "noise sigma must be nonnegative, got {sigma}"
            )));
        }
        Ok(NoiseModel {
            kind: NoiseKind::Gaussian,
            sigma,
        })
    }

    pub fn sigma(&self) -> f64 {
        match self.kind {
            NoiseKind::None => 0.0,
            NoiseKind::Gaussian => self.sigma,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSet {
    pub design: Vec<f64>,
    pub outputs: Vec<f64>,
    pub scheme: Scheme,
    pub noise: NoiseModel,
    pub seed: u64,
    #[serde(default)]
    pub replicate: u64,
}

impl SampleSet {
    pub fn len(&self) -> usize {
        self.design.len()
    }

    pub fn is_empty(&self) -> bool {
        self.design.is_empty()
    }
}

pub fn sample_design(scheme: Scheme, n: usize, key: impl Into<RngKey>) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(shape("sample size n must be at least 1"));
    }
    Ok(match scheme {
        Scheme::Grid => (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect(),
        Scheme::IidUniform => uniform_vec(&mut key.into().stream(Purpose::Design), n),
    })
}

/// `Y_i = (A f)(x_i) + zeta_i` with `zeta_i ~ N(0, sigma^2)` i.i.d.
pub fn sample_outputs(
    problem: &SpectralProblem,
    f_true: &GroundTruth,
    design: &[f64],
    scheme: Scheme,
    noise: NoiseModel,
    key: impl Into<RngKey>,
) -> Result<SampleSet> {
    let y = forward_data(problem, &f_true.coeffs)?;
    let basis = DesignBasis::new(problem, design)?;
    sample_on_basis(&basis, &y.coeffs, scheme, noise, key)
}

/// [`sample_outputs`] for data given directly in u-coordinates on a precomputed basis.
pub fn sample_on_basis(
    basis: &DesignBasis,
    y_coeffs: &[f64],
    scheme: Scheme,
    noise: NoiseModel,
    key: impl Into<RngKey>,
) -> Result<SampleSet> {
    check_len("data coefficients", y_coeffs.len(), basis.values.ncols())?;
    let key = key.into();
    let y = nalgebra::DVector::from_column_slice(y_coeffs);
    let mut outputs: Vec<f64> = (&basis.values * y).iter().copied().collect();
    let sigma = noise.sigma();
    if noise.kind == NoiseKind::Gaussian && sigma > 0.0 {
        let z = normal_vec(&mut key.stream(Purpose::Noise), outputs.len());
        for (o, zi) in outputs.iter_mut().zip(z) {
            *o += sigma * zi;
        }
    }
    Ok(SampleSet {
        design: basis.points.clone(),
        outputs,
        scheme,
        noise,
        seed: key.seed,
        replicate: key.replicate,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PerturbationMode {
    /// Direction uniform on the unit sphere of the `J` modes.
    RandomUnit,
    /// `e = u_j` (1-based).
    FixedMode(usize),
    /// `e = u_{j*}` with `j* = argmax_j s_lambda(mu_j) sqrt(mu_j)`, the mode
    /// the reconstruction amplifies most.
    FilterAdversarial(FilterSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationSpec {
    pub delta: f64,
    pub mode: PerturbationMode,
}

/// Mode (1-based) maximising `s_lambda(mu_j) sqrt(mu_j)`; ties go to the lowest index.
pub fn adversarial_mode(problem: &SpectralProblem, filter: &FilterSpec) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (idx, (&m, &s)) in problem.mu.iter().zip(&problem.sigma_sv).enumerate() {
        let gain = filter.eval(m) * s;
        if gain > best.1 {
            best = (idx, gain);
        }
    }
    best.0 + 1
}

/// `y^delta = y + delta e` with `||e|| = 1`.
pub fn perturb_data(
    problem: &SpectralProblem,
    y: &DataFunction,
    spec: &PerturbationSpec,
    key: impl Into<RngKey>,
) -> Result<DataFunction> {
    let modes = problem.modes;
    check_len("data coefficients", y.coeffs.len(), modes)?;
    let delta = spec.delta;
    if !(delta >= 0.0) || !delta.is_finite() {
        return Err(parameter(format!(
            "noise level delta must be nonnegative, got {delta}"
        )));
    }
    let direction = match &spec.mode {
        PerturbationMode::RandomUnit => {
            let mut rng = key.into().stream(Purpose::Perturbation);
            let mut e = normal_vec(&mut rng, modes);
            let mut norm = libm::sqrt(e.iter().map(|v| v * v).sum::<f64>());
            while norm == 0.0 {
                e = normal_vec(&mut rng, modes);
                norm = libm::sqrt(e.iter().map(|v| v * v).sum::<f64>());
            }
            e.iter_mut().for_each(|v| *v /= norm);
            e
        }
        PerturbationMode::FixedMode(j) => {
            if *j == 0 || *j > modes {
                return Err(shape(format!("fixed mode {j} outside 1..={modes}")));
            }
            unit(modes, j - 1)
        }
        PerturbationMode::FilterAdversarial(filter) => {
            unit(modes, adversarial_mode(problem, filter) - 1)
        }
    };
    let coeffs = y
        .coeffs
        .iter()
        .zip(&direction)
        .map(|(c, e)| c + delta * e)
        .collect();
    Ok(DataFunction {
        coeffs,
        kind: if delta > 0.0 {
            DataKind::Perturbed
        } else {
            y.kind
        },
        delta: y.delta + delta,
    })
}

fn unit(len: usize, idx: usize) -> Vec<f64> {
    let mut e = alloc::vec![0.0; len];
    e[idx] = 1.0;
    e
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{build_power_law_problem, make_source_solution};
    use alloc::vec;
    use approx::assert_relative_eq;

    #[test]
    fn design_examples() {
        assert_eq!(
            sample_design(Scheme::Grid, 2, 99).unwrap(),
            vec![0.25, 0.75]
        );
        assert_eq!(sample_design(Scheme::Grid, 1, 0).unwrap(), vec![0.5]);
        let u = sample_design(Scheme::IidUniform, 1000, 7).unwrap();
        let mean = u.iter().sum::<f64>() / 1000.0;
        assert!((mean - 0.5).abs() < 0.05, "mean {mean}");
        assert!(u.iter().all(|x| (0.0..1.0).contains(x)));
        assert!(matches!(
            sample_design(Scheme::Grid, 0, 0),
            Err(Error::Shape(_))
        ));
        assert!(matches!(
            "sobol".parse::<Scheme>(),
            Err(Error::Parameter(_))
        ));
    }

    #[test]
    fn outputs_noiseless_example() {
        let p = build_power_law_problem(2, 2.0, 1.0).unwrap();
        let t = make_source_solution(&p, 1.0, &[1.0, 2.0]).unwrap();
        assert_eq!(t.coeffs, vec![1.0, 0.5]);
        let s = sample_outputs(&p, &t, &[0.25, 0.75], Scheme::Grid, NoiseModel::NONE, 3).unwrap();
        assert_relative_eq!(s.outputs[0], 1.353553, epsilon = 1e-6);
        assert_relative_eq!(s.outputs[1], 0.646447, epsilon = 1e-6);
    }

    #[test]
    fn outputs_noise_mean_clt() {
        let p = build_power_law_problem(3, 2.0, 1.0).unwrap();
        let t = make_source_solution(&p, 1.0, &[1.0, 1.0, 1.0]).unwrap();
        let design = vec![0.5; 10_000];
        let noise = NoiseModel::gaussian(0.1).unwrap();
        let s = sample_outputs(&p, &t, &design, Scheme::Grid, noise, 5).unwrap();
        let exact = sample_outputs(&p, &t, &[0.5], Scheme::Grid, NoiseModel::NONE, 5)
            .unwrap()
            .outputs[0];
        let mean = s.outputs.iter().sum::<f64>() / 1e4;
        assert!((mean - exact).abs() <= 3.0 * 0.1 / 100.0);
    }

    #[test]
    fn perturbation_examples() {
        let p = build_power_law_problem(2, 2.0, 1.0).unwrap();
        let y = forward_data(&p, &[1.0, 0.5]).unwrap();
        let same = perturb_data(
            &p,
            &y,
            &PerturbationSpec {
                delta: 0.0,
                mode: PerturbationMode::RandomUnit,
            },
            1,
        )
        .unwrap();
        assert_eq!(same.coeffs, y.coeffs);

        let tik = FilterSpec::tikhonov(1.0).unwrap();
        assert_eq!(adversarial_mode(&p, &tik), 1);

        let fixed = perturb_data(
            &p,
            &y,
            &PerturbationSpec {
                delta: 0.3,
                mode: PerturbationMode::FixedMode(2),
            },
            1,
        )
        .unwrap();
        assert_relative_eq!(fixed.coeffs[0], 1.0);
        assert_relative_eq!(fixed.coeffs[1], 0.55, epsilon = 1e-15);
        assert_eq!(fixed.kind, DataKind::Perturbed);

        let bad = PerturbationSpec {
            delta: -1.0,
            mode: PerturbationMode::RandomUnit,
        };
        assert!(matches!(
            perturb_data(&p, &y, &bad, 0),
            Err(Error::Parameter(_))
        ));
        let oob = PerturbationSpec {
            delta: 1.0,
            mode: PerturbationMode::FixedMode(3),
        };
        assert!(matches!(
            perturb_data(&p, &y, &oob, 0),
            Err(Error::Shape(_))
        ));
    }
}
