//! The RKHS carried by `Im(A)`.
//!
//! With feature map `(phi_x)_j = sigma_j u_j(x)` the kernel is
//! `K(x, x') = sum_j mu_j u_j(x) u_j(x')`, and `g = A f` has RKHS norm
//! `||g||_K^2 = sum_j g_j^2 / mu_j = ||f||^2` (`Ker A = {0}` here).

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{check_len, shape, Result};
use crate::spectral::{check_unit_interval, sine_row, SpectralProblem};

/// Basis functions evaluated on a design: `values[(i, j)] = u_{j+1}(x_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignBasis {
    pub points: Vec<f64>,
    pub values: DMatrix<f64>,
}

impl DesignBasis {
    pub fn new(problem: &SpectralProblem, points: &[f64]) -> Result<Self> {
        if points.is_empty() {
            return Err(shape("design must contain at least one point"));
        }
        for &x in points {
            check_unit_interval(x)?;
        }
        let modes = problem.modes;
        let mut values = DMatrix::zeros(points.len(), modes);
        let mut row = alloc::vec![0.0; modes];
        for (i, &x) in points.iter().enumerate() {
            sine_row(x, &mut row);
            for (j, v) in row.iter().enumerate() {
                values[(i, j)] = *v;
            }
        }
        Ok(Self {
            points: points.to_vec(),
            values,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Rows are the feature vectors `phi_{x_i}` in v-coordinates.
    pub fn features(&self, problem: &SpectralProblem) -> DMatrix<f64> {
        let mut phi = self.values.clone();
        for (j, s) in problem.sigma_sv.iter().enumerate() {
            phi.column_mut(j).scale_mut(*s);
        }
        phi
    }

    /// `K = Phi Phi^T`, mirrored so the result is exactly symmetric.
    pub fn gram(&self, problem: &SpectralProblem) -> DMatrix<f64> {
        let phi = self.features(problem);
        let mut k = &phi * phi.transpose();
        let n = k.nrows();
        for i in 0..n {
            for j in (i + 1)..n {
                k[(j, i)] = k[(i, j)];
            }
        }
        k
    }

    /// u-basis coordinates of `sum_i beta_i K_{x_i}`: `g_j = mu_j sum_i beta_i u_j(x_i)`.
    pub fn kernel_expansion(&self, problem: &SpectralProblem, beta: &[f64]) -> Vec<f64> {
        let b = DVector::from_column_slice(beta);
        let s = self.values.tr_mul(&b);
        s.iter().zip(&problem.mu).map(|(v, m)| v * m).collect()
    }
}

pub fn kernel_eval(problem: &SpectralProblem, x: f64, x2: f64) -> Result<f64> {
    check_unit_interval(x)?;
    check_unit_interval(x2)?;
    let mut a = alloc::vec![0.0; problem.modes];
    let mut b = alloc::vec![0.0; problem.modes];
    sine_row(x, &mut a);
    sine_row(x2, &mut b);
    Ok(problem
        .mu
        .iter()
        .zip(a.iter().zip(&b))
        .map(|(m, (ua, ub))| m * ua * ub)
        .sum())
}

#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix {
    pub points: Vec<f64>,
    pub entries: DMatrix<f64>,
}

pub fn gram_matrix(problem: &SpectralProblem, points: &[f64]) -> Result<GramMatrix> {
    let basis = DesignBasis::new(problem, points)?;
    Ok(GramMatrix {
        entries: basis.gram(problem),
        points: basis.points,
    })
}

impl GramMatrix {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn trace(&self) -> f64 {
        self.entries.trace()
    }

    /// Largest `|K_ij - K_ji|`.
    pub fn asymmetry(&self) -> f64 {
        let k = &self.entries;
        let mut worst: f64 = 0.0;
        for i in 0..k.nrows() {
            for j in 0..i {
                worst = worst.max((k[(i, j)] - k[(j, i)]).abs());
            }
        }
        worst
    }

    /// `(smallest, largest)` eigenvalue.
    pub fn extreme_eigenvalues(&self) -> (f64, f64) {
        let eig = SymmetricEigen::new(self.entries.clone());
        let lo = eig
            .eigenvalues
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        let hi = eig
            .eigenvalues
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    }

    /// Smallest eigenvalue `>= -rel_tol * largest`.
    pub fn is_psd(&self, rel_tol: f64) -> bool {
        let (lo, hi) = self.extreme_eigenvalues();
        lo >= -rel_tol * hi.abs()
    }
}

/// `sqrt(sum_j g_j^2 / mu_j)`.
pub fn rkhs_norm(problem: &SpectralProblem, g_coeffs: &[f64]) -> Result<f64> {
    check_len("u-basis coefficients", g_coeffs.len(), problem.modes)?;
    Ok(libm::sqrt(
        g_coeffs
            .iter()
            .zip(&problem.mu)
            .map(|(g, m)| g * g / m)
            .sum::<f64>(),
    ))
}

/// `f = A^{-1} g`, componentwise `f_j = g_j / sigma_j`.
pub fn correspondence_pullback(problem: &SpectralProblem, g_coeffs: &[f64]) -> Result<Vec<f64>> {
    check_len("u-basis coefficients", g_coeffs.len(), problem.modes)?;
    Ok(g_coeffs
        .iter()
        .zip(&problem.sigma_sv)
        .map(|(g, s)| g / s)
        .collect())
}

/// H_K inner product `sum_j a_j b_j / mu_j`.
pub fn rkhs_inner(problem: &SpectralProblem, a: &[f64], b: &[f64]) -> Result<f64> {
    check_len("left coefficients", a.len(), problem.modes)?;
    check_len("right coefficients", b.len(), problem.modes)?;
    Ok(a.iter()
        .zip(b)
        .zip(&problem.mu)
        .map(|((x, y), m)| x * y / m)
        .sum())
}

/// u-coordinates of the kernel section `K_x`: `mu_j u_j(x)`.
pub fn kernel_section(problem: &SpectralProblem, x: f64) -> Result<Vec<f64>> {
    check_unit_interval(x)?;
    let mut row = alloc::vec![0.0; problem.modes];
    sine_row(x, &mut row);
    Ok(row.iter().zip(&problem.mu).map(|(u, m)| u * m).collect())
}
