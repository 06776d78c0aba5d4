//! Regularized solutions.
//!
//! Four estimators of `f`:
//!
//! | function | object |
//! |---|---|
//! | [`solve_continuous`] | `f^lambda = s_lambda(A*A) A* y` (or `y^delta`) |
//! | [`estimator_paper`] | `s_lambda(A*A) A*_x y`, full-operator filter applied to sampled data |
//! | [`estimator_learn`] | `s_lambda(A*_x A_x) A*_x y`, the usual learning estimator |
//! | [`kernel_tikhonov`] | `g = sum_i beta_i K_{x_i}`, `(K + lambda n I) beta = y` |
//!
//! Here `A*_x c = (1/n) sum_i c_i phi_{x_i}` and `A_x f = (<f, phi_{x_i}>)_i`.
//! [`erm_representer_solve`] minimises a regularized empirical risk over the
//! span of the kernel sections by first-order descent.

use alloc::format;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{check_len, parameter, Error, Result};
use crate::filters::{FilterKind, FilterSpec};
use crate::rkhs::DesignBasis;
use crate::sampling::SampleSet;
use crate::spectral::{DataFunction, DataKind, SpectralProblem};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    Continuous,
    #[serde(rename = "noisy-delta")]
    NoisyDelta,
    PaperN,
    LearnN,
    KernelTikhonov,
    Erm,
}

/// v-basis coefficients of a reconstruction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub provenance: Provenance,
    pub lambda: f64,
    /// Sample size for sampled estimators, noise level for `noisy-delta`.
    pub n_or_delta: Option<f64>,
    pub coeffs: Vec<f64>,
}

pub fn solve_continuous(
    problem: &SpectralProblem,
    filter: &FilterSpec,
    y: &DataFunction,
) -> Result<Estimate> {
    check_len("data coefficients", y.coeffs.len(), problem.modes)?;
    filter.check_spectrum(problem)?;
    let coeffs = problem
        .mu
        .iter()
        .zip(&problem.sigma_sv)
        .zip(&y.coeffs)
        .map(|((&m, &s), &yj)| filter.eval(m) * s * yj)
        .collect();
    let (provenance, n_or_delta) = match y.kind {
        DataKind::Clean => (Provenance::Continuous, None),
        DataKind::Perturbed => (Provenance::NoisyDelta, Some(y.delta)),
    };
    Ok(Estimate {
        provenance,
        lambda: filter.lambda,
        n_or_delta,
        coeffs,
    })
}

/// `(1/n) sum_i Y_i u_j(X_i)` for every mode `j`.
fn empirical_projection(basis: &DesignBasis, outputs: &[f64]) -> Result<DVector<f64>> {
    check_len("sample outputs", outputs.len(), basis.len())?;
    let y = DVector::from_column_slice(outputs);
    Ok(basis.values.tr_mul(&y) / basis.len() as f64)
}

pub fn estimator_paper(
    problem: &SpectralProblem,
    filter: &FilterSpec,
    samples: &SampleSet,
) -> Result<Estimate> {
    check_len(
        "sample outputs",
        samples.outputs.len(),
        samples.design.len(),
    )?;
    let basis = DesignBasis::new(problem, &samples.design)?;
    estimator_paper_on(problem, &basis, filter, &samples.outputs)
}

/// [`estimator_paper`] on a precomputed design basis.
pub fn estimator_paper_on(
    problem: &SpectralProblem,
    basis: &DesignBasis,
    filter: &FilterSpec,
    outputs: &[f64],
) -> Result<Estimate> {
    filter.check_spectrum(problem)?;
    let proj = empirical_projection(basis, outputs)?;
    let coeffs = problem
        .mu
        .iter()
        .zip(&problem.sigma_sv)
        .zip(proj.iter())
        .map(|((&m, &s), &p)| filter.eval(m) * s * p)
        .collect();
    Ok(Estimate {
        provenance: Provenance::PaperN,
        lambda: filter.lambda,
        n_or_delta: Some(basis.len() as f64),
        coeffs,
    })
}

fn cholesky(matrix: DMatrix<f64>) -> Result<nalgebra::Cholesky<f64, nalgebra::Dyn>> {
    matrix
        .cholesky()
        .ok_or_else(|| Error::Numerical("regularized system is not positive definite".into()))
}

fn cholesky_solve(matrix: DMatrix<f64>, rhs: &[f64]) -> Result<DVector<f64>> {
    let x = cholesky(matrix)?.solve(&DVector::from_column_slice(rhs));
    if x.iter().all(|v| v.is_finite()) {
        Ok(x)
    } else {
        Err(Error::Numerical(
            "non-finite solution of the Gram system".into(),
        ))
    }
}

fn shifted_gram(basis: &DesignBasis, problem: &SpectralProblem, shift: f64) -> DMatrix<f64> {
    let mut k = basis.gram(problem);
    for i in 0..k.nrows() {
        k[(i, i)] += shift;
    }
    k
}

/// `s_lambda(A*_x A_x) A*_x y`.
///
/// Works in whichever of the two equivalent spaces is smaller: the `J x J`
/// empirical operator `A*_x A_x = Phi^T Phi / n`, or the `n x n` kernel side
/// through `s(A*_x A_x) A*_x = A*_x s(A_x A*_x)` with `A_x A*_x = K / n`.
/// Tikhonov uses Cholesky solves, other filters an eigendecomposition.
pub fn estimator_learn(
    problem: &SpectralProblem,
    filter: &FilterSpec,
    samples: &SampleSet,
) -> Result<Estimate> {
    check_len(
        "sample outputs",
        samples.outputs.len(),
        samples.design.len(),
    )?;
    let basis = DesignBasis::new(problem, &samples.design)?;
    estimator_learn_on(problem, &basis, filter, &samples.outputs)
}

/// [`estimator_learn`] on a precomputed design basis.
pub fn estimator_learn_on(
    problem: &SpectralProblem,
    basis: &DesignBasis,
    filter: &FilterSpec,
    outputs: &[f64],
) -> Result<Estimate> {
    check_len("sample outputs", outputs.len(), basis.len())?;
    let map = learn_matrix(problem, basis, filter)?;
    let coeffs = map * DVector::from_column_slice(outputs);
    Ok(Estimate {
        provenance: Provenance::LearnN,
        lambda: filter.lambda,
        n_or_delta: Some(basis.len() as f64),
        coeffs: coeffs.iter().copied().collect(),
    })
}

/// The `J x n` matrix of the linear map `y -> s_lambda(A*_x A_x) A*_x y`.
///
/// For a fixed design this can be built once and applied to many outputs.
pub fn learn_matrix(
    problem: &SpectralProblem,
    basis: &DesignBasis,
    filter: &FilterSpec,
) -> Result<DMatrix<f64>> {
    filter.check_spectrum(problem)?;
    let n = basis.len();
    let nf = n as f64;
    let phi = basis.features(problem);
    let map = if problem.modes <= n {
        let phi_t = phi.transpose() / nf;
        let cov = &phi_t * &phi;
        if filter.kind == FilterKind::Tikhonov {
            let mut shifted = cov;
            for j in 0..shifted.nrows() {
                shifted[(j, j)] += filter.lambda;
            }
            cholesky(shifted)?.solve(&phi_t)
        } else {
            let eig = SymmetricEigen::new(cov);
            let q = &eig.eigenvectors;
            let mut qt = q.transpose();
            for (mut row, &t) in qt.row_iter_mut().zip(eig.eigenvalues.iter()) {
                row *= filter.eval(t.max(0.0));
            }
            q * qt * phi_t
        }
    } else if filter.kind == FilterKind::Tikhonov {
        let inv = cholesky(shifted_gram(basis, problem, filter.lambda * nf))?.inverse();
        phi.tr_mul(&inv)
    } else {
        let eig = SymmetricEigen::new(basis.gram(problem) / nf);
        let q = &eig.eigenvectors;
        let mut qt = q.transpose();
        for (mut row, &t) in qt.row_iter_mut().zip(eig.eigenvalues.iter()) {
            row *= filter.eval(t.max(0.0));
        }
        phi.tr_mul(&(q * qt)) / nf
    };
    if map.iter().all(|v| v.is_finite()) {
        Ok(map)
    } else {
        Err(Error::Numerical("non-finite learning map".into()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelSolution {
    pub beta: Vec<f64>,
    /// u-basis coordinates of `g = sum_i beta_i K_{x_i}`.
    pub g_coeffs: Vec<f64>,
}

/// Kernel ridge regression: `(K + lambda n I) beta = y`.
pub fn kernel_tikhonov(
    problem: &SpectralProblem,
    samples: &SampleSet,
    lambda: f64,
) -> Result<KernelSolution> {
    check_len(
        "sample outputs",
        samples.outputs.len(),
        samples.design.len(),
    )?;
    let basis = DesignBasis::new(problem, &samples.design)?;
    kernel_tikhonov_on(problem, &basis, &samples.outputs, lambda)
}

pub fn kernel_tikhonov_on(
    problem: &SpectralProblem,
    basis: &DesignBasis,
    outputs: &[f64],
    lambda: f64,
) -> Result<KernelSolution> {
    if !(lambda > 0.0) {
        return Err(parameter(format!(
            "kernel Tikhonov needs lambda > 0, got {lambda}"
        )));
    }
    check_len("sample outputs", outputs.len(), basis.len())?;
    let beta = cholesky_solve(
        shifted_gram(basis, problem, lambda * basis.len() as f64),
        outputs,
    )?;
    let beta: Vec<f64> = beta.iter().copied().collect();
    Ok(KernelSolution {
        g_coeffs: basis.kernel_expansion(problem, &beta),
        beta,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum LossKind {
    /// `(y - v)^2`.
    Square,
    /// `|y - v|`.
    Absolute,
    /// `(y - v)^2 / (2 sigma^2)`, the Gaussian negative log-likelihood without its constant.
    GaussianNll { sigma: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossSpec {
    pub kind: LossKind,
    /// Lipschitz constant of `v -> V(y, v)` for `|y|, |v| <= data_bound`.
    pub lipschitz: f64,
}

impl LossSpec {
    pub fn new(kind: LossKind, data_bound: f64) -> Result<Self> {
        if !(data_bound >= 0.0) {
            return Err(parameter("data bound must be nonnegative"));
        }
        let lipschitz = match kind {
            LossKind::Square => 4.0 * data_bound,
            LossKind::Absolute => 1.0,
            LossKind::GaussianNll { sigma } => {
                if !(sigma > 0.0) {
                    return Err(parameter(format!(
                        "Gaussian likelihood needs sigma > 0, got {sigma}"
                    )));
                }
                2.0 * data_bound / (sigma * sigma)
            }
        };
        Ok(Self { kind, lipschitz })
    }

    pub fn square() -> Self {
        Self {
            kind: LossKind::Square,
            lipschitz: f64::INFINITY,
        }
    }

    pub fn absolute() -> Self {
        Self {
            kind: LossKind::Absolute,
            lipschitz: 1.0,
        }
    }

    /// `V(y, v)`.
    pub fn value(&self, y: f64, v: f64) -> f64 {
        let r = y - v;
        match self.kind {
            LossKind::Square => r * r,
            LossKind::Absolute => r.abs(),
            LossKind::GaussianNll { sigma } => r * r / (2.0 * sigma * sigma),
        }
    }

    /// Pseudo-Huber smoothing of the absolute loss with width `eta`; exact for the others.
    fn smoothed(&self, y: f64, v: f64, eta: f64) -> (f64, f64) {
        let r = y - v;
        match self.kind {
            LossKind::Absolute => {
                let h = libm::hypot(r, eta);
                (h - eta, -r / h)
            }
            _ => (self.value(y, v), self.derivative(y, v)),
        }
    }

    /// `dV/dv`; the absolute loss returns the subgradient `-sign(y - v)` (0 at a kink).
    pub fn derivative(&self, y: f64, v: f64) -> f64 {
        let r = y - v;
        match self.kind {
            LossKind::Square => -2.0 * r,
            LossKind::Absolute => {
                if r > 0.0 {
                    -1.0
                } else if r < 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            LossKind::GaussianNll { sigma } => -r / (sigma * sigma),
        }
    }
}

/// Penalty `psi(||g||_K)`; only `psi(t) = t^2` is supported.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum PenaltySpec {
    #[default]
    Square,
}

impl PenaltySpec {
    pub fn psi(&self, t: f64) -> f64 {
        match self {
            PenaltySpec::Square => t * t,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErmOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Final pseudo-Huber width for the absolute loss.
    pub smoothing: f64,
}

impl Default for ErmOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 100_000,
            smoothing: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErmDiagnostics {
    pub iterations: usize,
    /// `||grad_g F||_K` at the returned point.
    pub optimality: f64,
    pub objective: f64,
    /// Smoothing width in force at termination (0 for smooth losses).
    pub smoothing: f64,
    /// Optimality measure recorded every 100 iterations.
    pub trace: Vec<f64>,
    /// True when solved in closed form (`lambda = 0` with square loss).
    pub closed_form: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErmSolution {
    pub beta: Vec<f64>,
    pub g_coeffs: Vec<f64>,
    pub diagnostics: ErmDiagnostics,
}

/// Orthogonal projector onto `range(K)` and the pseudo-inverse on it, plus the
/// projector onto eigendirections of `K` below `slow_below` (null space included).
struct RangeSplit {
    projector: DMatrix<f64>,
    pinv: DMatrix<f64>,
    slow: DMatrix<f64>,
}

impl RangeSplit {
    fn new(k: &DMatrix<f64>, slow_below: f64) -> Self {
        let n = k.nrows();
        let eig = SymmetricEigen::new(k.clone());
        let top = eig.eigenvalues.iter().cloned().fold(0.0_f64, f64::max);
        let cut = top * n as f64 * f64::EPSILON * 16.0;
        let mut projector = DMatrix::zeros(n, n);
        let mut pinv = DMatrix::zeros(n, n);
        let mut slow = DMatrix::zeros(n, n);
        for (idx, &ev) in eig.eigenvalues.iter().enumerate() {
            let q = eig.eigenvectors.column(idx);
            let outer = q * q.transpose();
            if ev < slow_below || ev <= cut {
                slow += &outer;
            }
            if ev > cut {
                projector += &outer;
                pinv += outer / ev;
            }
        }
        Self {
            projector,
            pinv,
            slow,
        }
    }
}

/// Minimises `(1/n) sum_i V(Y_i, g(x_i)) + lambda psi(||g||_K)` over
/// `g = sum_i beta_i K_{x_i}`.
///
/// The descent direction is the RKHS gradient expressed in `beta`
/// (`(1/n) V'(Y, K beta) + 2 lambda beta`, projected on `range(K)`), with
/// Armijo backtracking, with iterates in `range(K)`. On exit `beta` is moved
/// onto the stationarity condition `beta = -V'(Y, K beta) / (2 lambda n)`
/// along the eigendirections of `K` below `lambda n`, where that fixed point
/// contracts. This leaves `g` unchanged up to the tolerance and makes `beta`
/// the closed form `(K + lambda n I)^{-1} Y` for the square loss even when `K`
/// is singular. `lambda = 0` with the square loss is solved directly by the
/// pseudo-inverse (minimum-norm `beta`). The absolute loss is handled by
/// pseudo-Huber continuation down to `options.smoothing`.
pub fn erm_representer_solve(
    problem: &SpectralProblem,
    samples: &SampleSet,
    loss: &LossSpec,
    penalty: PenaltySpec,
    lambda: f64,
    options: &ErmOptions,
) -> Result<ErmSolution> {
    check_len(
        "sample outputs",
        samples.outputs.len(),
        samples.design.len(),
    )?;
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(parameter(format!(
            "lambda must be nonnegative, got {lambda}"
        )));
    }
    let basis = DesignBasis::new(problem, &samples.design)?;
    let k = basis.gram(problem);
    let n = basis.len();
    let y = DVector::from_column_slice(&samples.outputs);
    let split = RangeSplit::new(&k, lambda * n as f64);

    let finish = |beta: DVector<f64>, diagnostics: ErmDiagnostics| {
        let beta: Vec<f64> = beta.iter().copied().collect();
        ErmSolution {
            g_coeffs: basis.kernel_expansion(problem, &beta),
            beta,
            diagnostics,
        }
    };

    if lambda == 0.0 && matches!(loss.kind, LossKind::Square | LossKind::GaussianNll { .. }) {
        let beta = &split.pinv * &y;
        let fitted = &k * &beta;
        let objective = fitted
            .iter()
            .zip(y.iter())
            .map(|(v, yi)| loss.value(*yi, *v))
            .sum::<f64>()
            / n as f64;
        return Ok(finish(
            beta,
            ErmDiagnostics {
                iterations: 0,
                optimality: 0.0,
                objective,
                smoothing: 0.0,
                trace: Vec::new(),
                closed_form: true,
            },
        ));
    }

    let objective = |beta: &DVector<f64>, eta: f64| -> (f64, DVector<f64>) {
        let fitted = &k * beta;
        let mut risk = 0.0;
        let mut dloss = DVector::zeros(n);
        for i in 0..n {
            let (v, d) = loss.smoothed(y[i], fitted[i], eta);
            risk += v;
            dloss[i] = d;
        }
        let norm_sq = beta.dot(&fitted).max(0.0);
        let value = risk / n as f64 + lambda * penalty.psi(libm::sqrt(norm_sq));
        (value, dloss / n as f64)
    };

    let stages: Vec<f64> = match loss.kind {
        LossKind::Absolute => {
            let scale = y.amax().max(1.0);
            let mut eta = 1e-1 * scale;
            let mut v = Vec::new();
            while eta > options.smoothing {
                v.push(eta);
                eta *= 0.1;
            }
            v.push(options.smoothing);
            v
        }
        _ => alloc::vec![0.0],
    };

    let mut beta = DVector::zeros(n);
    let mut step = 1.0 / (k.trace() / n as f64 + lambda).max(f64::MIN_POSITIVE);
    let mut iterations = 0;
    let mut trace = Vec::new();
    let mut optimality = f64::INFINITY;
    let mut value = 0.0;
    let last_stage = stages.len() - 1;

    for (stage_idx, &eta) in stages.iter().enumerate() {
        let stage_tol = if stage_idx == last_stage {
            options.tol
        } else {
            options.tol.max(eta * 1e-3)
        };
        let (mut f_cur, mut dloss) = objective(&beta, eta);
        loop {
            let direction = &split.projector * (&dloss + &beta * (2.0 * lambda));
            let kd = &k * &direction;
            let slope = direction.dot(&kd).max(0.0);
            optimality = libm::sqrt(slope);
            value = f_cur;
            if iterations % 100 == 0 {
                trace.push(optimality);
            }
            if optimality <= stage_tol {
                break;
            }
            if iterations >= options.max_iter {
                return Err(Error::NoConvergence {
                    iterations,
                    optimality,
                    trace,
                });
            }
            iterations += 1;
            step *= 2.0;
            let mut accepted = false;
            let mut stalled = false;
            for _ in 0..200 {
                let candidate = &beta - &direction * step;
                let (f_new, d_new) = objective(&candidate, eta);
                // Armijo while the predicted decrease is resolvable in F; below
                // its rounding level, a nonpositive directional derivative at the
                // candidate (the objective is convex, so F does not increase).
                let predicted = 1e-4 * step * slope;
                let ok = if predicted > 1e-12 * f_cur.abs().max(f64::MIN_POSITIVE) {
                    f_new <= f_cur - predicted
                } else {
                    kd.dot(&(&d_new + &candidate * (2.0 * lambda))) >= 0.0
                };
                if ok {
                    if candidate == beta {
                        stalled = true;
                        break;
                    }
                    beta = candidate;
                    f_cur = f_new;
                    dloss = d_new;
                    accepted = true;
                    break;
                }
                step *= 0.5;
                if step < f64::MIN_POSITIVE {
                    break;
                }
            }
            // The step no longer moves beta: the gradient is at its rounding
            // floor. Accept if that floor is close to the requested tolerance.
            if stalled && optimality <= 1e3 * stage_tol {
                break;
            }
            if !accepted {
                return Err(Error::NoConvergence {
                    iterations,
                    optimality,
                    trace,
                });
            }
        }
    }

    if lambda > 0.0 {
        let (_, dloss) = objective(&beta, *stages.last().unwrap_or(&0.0));
        beta -= &split.slow * (&beta + dloss / (2.0 * lambda));
    }

    Ok(finish(
        beta,
        ErmDiagnostics {
            iterations,
            optimality,
            objective: value,
            smoothing: *stages.last().unwrap_or(&0.0),
            trace,
            closed_form: false,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::{sample_design, sample_outputs, NoiseModel, Scheme};
    use crate::spectral::{build_power_law_problem, forward_data, make_source_solution};
    use alloc::vec;
    use approx::assert_relative_eq;
    use core::f64::consts::SQRT_2;

    fn samples(design: Vec<f64>, outputs: Vec<f64>) -> SampleSet {
        SampleSet {
            design,
            outputs,
            scheme: Scheme::Grid,
            noise: NoiseModel::NONE,
            seed: 0,
            replicate: 0,
        }
    }

    #[test]
    fn continuous_examples() {
        let one = build_power_law_problem(1, 2.0, 1.0).unwrap();
        let tik = FilterSpec::tikhonov(1.0).unwrap();
        let y = forward_data(&one, &[1.0]).unwrap();
        let est = solve_continuous(&one, &tik, &y).unwrap();
        assert_eq!(est.coeffs, vec![0.5]);
        assert_eq!(est.provenance, Provenance::Continuous);

        let p = build_power_law_problem(5, 2.0, 1.0).unwrap();
        let t = make_source_solution(&p, 1.0, &[1.0, -2.0, 0.5, 3.0, 1.0]).unwrap();
        let y = forward_data(&p, &t.coeffs).unwrap();
        let cut = FilterSpec::cutoff(p.mu_min()).unwrap();
        let est = solve_continuous(&p, &cut, &y).unwrap();
        for (a, b) in est.coeffs.iter().zip(&t.coeffs) {
            assert_relative_eq!(a, b, max_relative = 1e-14);
        }
        let zero = forward_data(&p, &[0.0; 5]).unwrap();
        assert!(solve_continuous(&p, &tik, &zero)
            .unwrap()
            .coeffs
            .iter()
            .all(|v| *v == 0.0));
    }

    #[test]
    fn projection_estimator_examples() {
        let one = build_power_law_problem(1, 2.0, 1.0).unwrap();
        let tik = FilterSpec::tikhonov(1.0).unwrap();
        let s = samples(vec![0.5], vec![SQRT_2]);
        let est = estimator_paper(&one, &tik, &s).unwrap();
        assert_relative_eq!(est.coeffs[0], 1.0, epsilon = 1e-14);
        let zeros = samples(vec![0.2, 0.7], vec![0.0, 0.0]);
        assert!(estimator_paper(&one, &tik, &zeros)
            .unwrap()
            .coeffs
            .iter()
            .all(|v| *v == 0.0));
    }

    #[test]
    fn projection_estimator_converges_to_continuous_on_grid() {
        // Riemann oracle: midpoint sums of smooth integrands converge at O(1/n^2).
        let p = build_power_law_problem(6, 2.0, 1.0).unwrap();
        let t = make_source_solution(&p, 1.0, &[1.0; 6]).unwrap();
        let tik = FilterSpec::tikhonov(0.1).unwrap();
        let cont = solve_continuous(&p, &tik, &forward_data(&p, &t.coeffs).unwrap()).unwrap();
        for n in [8usize, 32, 128] {
            let design = sample_design(Scheme::Grid, n, 0).unwrap();
            let s = sample_outputs(&p, &t, &design, Scheme::Grid, NoiseModel::NONE, 0).unwrap();
            let est = estimator_paper(&p, &tik, &s).unwrap();
            let diff: f64 = est
                .coeffs
                .iter()
                .zip(&cont.coeffs)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            // Midpoint sine sums are exact once n exceeds the number of modes.
            assert!(diff < 1e-13, "n={n} diff={diff}");
        }
    }

    #[test]
    fn learn_estimator_examples() {
        let one = build_power_law_problem(1, 2.0, 1.0).unwrap();
        let tik = FilterSpec::tikhonov(1.0).unwrap();
        let s = samples(vec![0.5], vec![SQRT_2]);
        let est = estimator_learn(&one, &tik, &s).unwrap();
        assert_relative_eq!(est.coeffs[0], 2.0 / 3.0, epsilon = 1e-14);
        let zeros = samples(vec![0.5], vec![0.0]);
        assert_eq!(
            estimator_learn(&one, &tik, &zeros).unwrap().coeffs,
            vec![0.0]
        );
    }

    /// Explicit 2x2 inverse of `K + I` with `K = [[1.5, 0.5], [0.5, 1.5]]`, `det = 6`.
    fn two_by_two_oracle(y: [f64; 2]) -> [f64; 2] {
        let (a, b, d) = (2.5, 0.5, 2.5);
        let det = a * d - b * b;
        [(d * y[0] - b * y[1]) / det, (a * y[1] - b * y[0]) / det]
    }

    #[test]
    fn kernel_tikhonov_worked_case() {
        let p = build_power_law_problem(2, 2.0, 1.0).unwrap();
        let t = make_source_solution(&p, 1.0, &[1.0, 2.0]).unwrap();
        let design = vec![0.25, 0.75];
        let s = sample_outputs(&p, &t, &design, Scheme::Grid, NoiseModel::NONE, 0).unwrap();
        let oracle = two_by_two_oracle([s.outputs[0], s.outputs[1]]);
        assert_relative_eq!(oracle[0], 0.510110, epsilon = 1e-6);
        assert_relative_eq!(oracle[1], 0.156557, epsilon = 1e-6);
        let sol = kernel_tikhonov(&p, &s, 0.5).unwrap();
        assert_relative_eq!(sol.beta[0], oracle[0], epsilon = 1e-14);
        assert_relative_eq!(sol.beta[1], oracle[1], epsilon = 1e-14);

        let learn = estimator_learn(&p, &FilterSpec::tikhonov(0.5).unwrap(), &s).unwrap();
        let pulled = crate::rkhs::correspondence_pullback(&p, &sol.g_coeffs).unwrap();
        for (a, b) in learn.coeffs.iter().zip(&pulled) {
            assert_relative_eq!(a, b, epsilon = 1e-14);
        }

        let zero = samples(design, vec![0.0, 0.0]);
        let z = kernel_tikhonov(&p, &zero, 0.5).unwrap();
        assert!(z.beta.iter().chain(&z.g_coeffs).all(|v| *v == 0.0));
        assert!(matches!(
            kernel_tikhonov(&p, &s, 0.0),
            Err(Error::Parameter(_))
        ));
    }

    #[test]
    fn kernel_tikhonov_scalar_case() {
        let one = build_power_law_problem(1, 2.0, 1.0).unwrap();
        let s = samples(vec![0.5], vec![SQRT_2]);
        let sol = kernel_tikhonov(&one, &s, 1.0).unwrap();
        assert_relative_eq!(sol.beta[0], SQRT_2 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn primal_and_dual_routes_agree() {
        // The same estimator through the J x J operator (n >= J) and through
        // the n x n kernel system (n < J), for the Cholesky and eigen paths.
        let t_small = |modes: usize, n: usize, filter: &FilterSpec| {
            let p = build_power_law_problem(modes, 2.0, 1.0).unwrap();
            let w = vec![1.0; modes];
            let t = make_source_solution(&p, 1.0, &w).unwrap();
            let design = sample_design(Scheme::IidUniform, n, 4).unwrap();
            let s = sample_outputs(
                &p,
                &t,
                &design,
                Scheme::IidUniform,
                NoiseModel::gaussian(0.05).unwrap(),
                4,
            )
            .unwrap();
            (p, s, filter.clone())
        };
        for filter in [
            FilterSpec::tikhonov(0.01).unwrap(),
            FilterSpec::cutoff(0.01).unwrap(),
        ] {
            // J = n: primal; compare with an explicit dual computation.
            let (p, s, f) = t_small(9, 9, &filter);
            let primal = estimator_learn(&p, &f, &s).unwrap();
            let basis = DesignBasis::new(&p, &s.design).unwrap();
            let n = s.design.len() as f64;
            let eig = SymmetricEigen::new(basis.gram(&p) / n);
            let mut c = eig
                .eigenvectors
                .tr_mul(&DVector::from_column_slice(&s.outputs));
            for (ci, &t) in c.iter_mut().zip(eig.eigenvalues.iter()) {
                *ci *= f.eval(t.max(0.0));
            }
            let dual = basis.features(&p).tr_mul(&(&eig.eigenvectors * c)) / n;
            for (a, b) in primal.coeffs.iter().zip(dual.iter()) {
                assert!(
                    (a - b).abs() < 1e-8 * (1.0 + a.abs()),
                    "{:?}: {a} vs {b}",
                    f.kind
                );
            }
        }
    }

    #[test]
    fn learn_cutoff_and_landweber_run() {
        let p = build_power_law_problem(10, 2.0, 0.3).unwrap();
        let t = make_source_solution(&p, 1.0, &[1.0; 10]).unwrap();
        let design = sample_design(Scheme::Grid, 40, 0).unwrap();
        let s = sample_outputs(&p, &t, &design, Scheme::Grid, NoiseModel::NONE, 0).unwrap();
        // Midpoint grid with n > J: A_x A*_x restricted to the modes is B, so
        // the learning estimator coincides with the continuous one.
        let y = forward_data(&p, &t.coeffs).unwrap();
        for f in [
            FilterSpec::cutoff(1e-3).unwrap(),
            FilterSpec::landweber(25).unwrap(),
        ] {
            let learn = estimator_learn(&p, &f, &s).unwrap();
            let cont = solve_continuous(&p, &f, &y).unwrap();
            for (a, b) in learn.coeffs.iter().zip(&cont.coeffs) {
                assert!((a - b).abs() < 1e-9, "{:?}: {a} vs {b}", f.kind);
            }
        }
    }

    #[test]
    fn erm_square_matches_closed_form() {
        let p = build_power_law_problem(2, 2.0, 1.0).unwrap();
        let t = make_source_solution(&p, 1.0, &[1.0, 2.0]).unwrap();
        let s = sample_outputs(&p, &t, &[0.25, 0.75], Scheme::Grid, NoiseModel::NONE, 0).unwrap();
        let sol = erm_representer_solve(
            &p,
            &s,
            &LossSpec::square(),
            PenaltySpec::Square,
            0.5,
            &ErmOptions::default(),
        )
        .unwrap();
        assert_relative_eq!(sol.beta[0], 0.510110, epsilon = 1e-5);
        assert_relative_eq!(sol.beta[1], 0.156557, epsilon = 1e-5);
    }

    #[test]
    fn erm_zero_data_gives_zero() {
        let p = build_power_law_problem(4, 2.0, 1.0).unwrap();
        let s = samples(vec![0.1, 0.5, 0.8], vec![0.0; 3]);
        for loss in [
            LossSpec::square(),
            LossSpec::absolute(),
            LossSpec::new(LossKind::GaussianNll { sigma: 0.5 }, 1.0).unwrap(),
        ] {
            let sol = erm_representer_solve(
                &p,
                &s,
                &loss,
                PenaltySpec::Square,
                0.1,
                &ErmOptions::default(),
            )
            .unwrap();
            assert!(sol.beta.iter().all(|b| *b == 0.0));
        }
    }

    #[test]
    fn erm_absolute_loss_takes_median_at_repeated_point() {
        let one = build_power_law_problem(1, 2.0, 1.0).unwrap();
        let s = samples(vec![0.5; 3], vec![1.0, 1.0, 5.0]);
        let lambda = 1e-8;
        let sol = erm_representer_solve(
            &one,
            &s,
            &LossSpec::absolute(),
            PenaltySpec::Square,
            lambda,
            &ErmOptions::default(),
        )
        .unwrap();
        let fitted = crate::spectral::eval_unchecked(&sol.g_coeffs, 0.5);
        // Brute-force scan of the 1-D objective in the fitted value v:
        // g = c K_x, v = 2c, ||g||_K^2 = v^2 / 2.
        let mut best = (f64::INFINITY, 0.0);
        for k in 0..=60_000 {
            let v = k as f64 * 1e-4;
            let obj = ((1.0 - v).abs() * 2.0 + (5.0 - v).abs()) / 3.0 + lambda * v * v / 2.0;
            if obj < best.0 {
                best = (obj, v);
            }
        }
        assert!((best.1 - 1.0).abs() < 1e-4);
        assert!((fitted - best.1).abs() < 1e-4, "fitted {fitted}");
    }

    #[test]
    fn erm_lambda_zero_square_is_min_norm() {
        let one = build_power_law_problem(1, 2.0, 1.0).unwrap();
        let s = samples(vec![0.5, 0.5], vec![1.0, 3.0]);
        let sol = erm_representer_solve(
            &one,
            &s,
            &LossSpec::square(),
            PenaltySpec::Square,
            0.0,
            &ErmOptions::default(),
        )
        .unwrap();
        assert!(sol.diagnostics.closed_form);
        // K = 2 * ones: least squares fit is the mean, min-norm beta is symmetric.
        assert_relative_eq!(sol.beta[0], sol.beta[1], epsilon = 1e-14);
        let fitted = crate::spectral::eval_unchecked(&sol.g_coeffs, 0.5);
        assert_relative_eq!(fitted, 2.0, epsilon = 1e-12);
    }

    #[test]
    fn loss_catalog_properties() {
        let losses = [
            LossSpec::square(),
            LossSpec::absolute(),
            LossSpec::new(LossKind::GaussianNll { sigma: 2.0 }, 1.0).unwrap(),
        ];
        for l in losses {
            for &y in &[-1.0, 0.0, 2.5] {
                assert_eq!(l.value(y, y), 0.0);
                assert!(l.value(y, y + 0.3) > 0.0);
            }
        }
        assert_eq!(LossSpec::new(LossKind::Square, 2.0).unwrap().lipschitz, 8.0);
        assert!(LossSpec::new(LossKind::GaussianNll { sigma: 0.0 }, 1.0).is_err());
        assert_eq!(PenaltySpec::Square.psi(3.0), 9.0);
    }
}
