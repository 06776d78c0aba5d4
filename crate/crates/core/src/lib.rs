//! Numerical core of `rkhs-invlab`.
//!
//! A fully diagonal test model in which a linear inverse problem `y = A f`
//! and kernel regression on `Im(A)` can be solved side by side:
//!
//! * [`spectral`]: the operator (sine basis, power-law spectrum) and
//!   source-condition ground truths.
//! * [`rkhs`]: kernel, Gram matrices, RKHS norm and the pullback `A^{-1}`.
//! * [`sampling`]: point samples under grid or i.i.d. designs, and bounded
//!   perturbations of the whole data function.
//! * [`filters`] / [`regularization`]: spectral filters and the
//!   regularized estimators, including kernel ridge regression and a
//!   representer-based empirical risk solver.
//! * [`rates`]: Hilbert-Schmidt norms, the `n <-> delta` conversion and
//!   log-log rate fits.
//!
//! The crate is `no_std` and only needs `alloc`.

#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub use nalgebra;

pub mod error;
pub mod filters;
pub mod rates;
pub mod regularization;
pub mod rkhs;
pub mod rng;
pub mod sampling;
pub mod spectral;

pub use error::{Error, Result};
pub use filters::{certify, filter_value, Certificate, FilterKind, FilterSpec};
pub use rates::{
    convert_lower, convert_upper, delta_of, epsilon_lambda, fit_rate, hs_norm, lambda_schedule,
    loss_factor_tau, n_of, Branch, Conversion, RateExponents, RateFit, RateLink, ScheduleKind,
    TauVariant,
};
pub use regularization::{
    erm_representer_solve, estimator_learn, estimator_learn_on, estimator_paper, kernel_tikhonov,
    solve_continuous, ErmOptions, ErmSolution, Estimate, KernelSolution, LossKind, LossSpec,
    PenaltySpec, Provenance,
};
pub use rkhs::{
    correspondence_pullback, gram_matrix, kernel_eval, rkhs_norm, DesignBasis, GramMatrix,
};
pub use rng::RngKey;
pub use sampling::{
    perturb_data, sample_design, sample_outputs, NoiseKind, NoiseModel, PerturbationMode,
    PerturbationSpec, SampleSet, Scheme,
};
pub use spectral::{
    build_power_law_problem, eval_function, forward_data, make_source_solution, DataFunction,
    DataKind, GroundTruth, ProblemDescriptor, Space, SpectralProblem, WName, WSpec,
};
