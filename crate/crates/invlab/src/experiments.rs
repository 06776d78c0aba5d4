//! Monte-Carlo and sweep studies.
//!
//! Replicates run on a rayon pool; each one draws from its own counter-based
//! stream `(seed, replicate)`, and results are collected in replicate order
//! before any reduction, so reports do not depend on scheduling.

use std::collections::BTreeMap;
use std::time::Instant;

use rayon::prelude::*;

use rkhs_invlab_core::filters::log_grid;
use rkhs_invlab_core::rates::{bias_norm, rank_correlation};
use rkhs_invlab_core::regularization::{estimator_paper_on, kernel_tikhonov_on, learn_matrix};
use rkhs_invlab_core::rkhs::DesignBasis;
use rkhs_invlab_core::rng::{normal_vec, uniform_vec, Purpose};
use rkhs_invlab_core::sampling::sample_on_basis;
use rkhs_invlab_core::*;

use crate::config::{DetTheory, EstimatorKind, PerturbationChoice, StudyConfig, StudyKind};
use crate::error::{Context, Error, Result};
use crate::report::{PointRecord, StudyReport};

pub const THREADS_ENV: &str = "RKHS_INVLAB_THREADS";

fn thread_pool() -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(raw) = std::env::var(THREADS_ENV) {
        match raw.trim().parse::<usize>() {
            Ok(k) if k > 0 => builder = builder.num_threads(k),
            _ => {
                return Err(Error::Config(format!(
                    "{THREADS_ENV} must be a positive integer, got '{raw}'"
                )))
            }
        }
    }
    builder
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))
}

pub fn run_study(config: &StudyConfig) -> Result<StudyReport> {
    config.validate()?;
    let start = Instant::now();
    let pool = thread_pool()?;
    let mut report = pool.install(|| match config.kind {
        StudyKind::StatRate => stat_rate(config),
        StudyKind::DetRate => det_rate(config),
        StudyKind::LemmaCheck => lemma_check(config),
        StudyKind::GammaStudy => gamma_study(config),
        StudyKind::EquivalenceCheck => equivalence_check(config),
        StudyKind::VarianceSweep => variance_sweep(config),
    })?;
    report.runtime_seconds = start.elapsed().as_secs_f64();
    report.finalize()
}

fn empty_report(config: &StudyConfig) -> StudyReport {
    StudyReport {
        kind: config.kind,
        config: config.clone(),
        records: Vec::new(),
        summary: BTreeMap::new(),
        theory: BTreeMap::new(),
        fit: None,
        verdicts: Vec::new(),
        pass: false,
        runtime_seconds: 0.0,
    }
}

struct Setup {
    problem: SpectralProblem,
    truth: GroundTruth,
    y: DataFunction,
    noise: NoiseModel,
}

fn setup(config: &StudyConfig) -> Result<Setup> {
    let (problem, truth) = config.problem.build().context(|| "problem".into())?;
    let y = forward_data(&problem, &truth.coeffs).context(|| "forward data".into())?;
    let noise = if config.sigma > 0.0 {
        NoiseModel::gaussian(config.sigma).context(|| "noise".into())?
    } else {
        NoiseModel::NONE
    };
    Ok(Setup {
        problem,
        truth,
        y,
        noise,
    })
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn mean_se(values: &[f64]) -> (f64, f64) {
    let m = values.len() as f64;
    let mean = values.iter().sum::<f64>() / m;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (m - 1.0);
    (mean, (var / m).sqrt())
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let k = v.len();
    if k % 2 == 1 {
        v[k / 2]
    } else {
        0.5 * (v[k / 2 - 1] + v[k / 2])
    }
}

/// Draws one sampled estimate for replicate `key`.
struct Sampler<'a> {
    config: &'a StudyConfig,
    setup: &'a Setup,
    n: usize,
    filter: FilterSpec,
    grid_basis: Option<DesignBasis>,
    /// `y -> f` of the learning estimator on the fixed grid.
    grid_map: Option<rkhs_invlab_core::nalgebra::DMatrix<f64>>,
}

impl<'a> Sampler<'a> {
    fn new(
        config: &'a StudyConfig,
        setup: &'a Setup,
        n: usize,
        filter: FilterSpec,
    ) -> Result<Self> {
        let grid_basis = if config.scheme == Scheme::Grid {
            let design = sample_design(Scheme::Grid, n, 0).context(|| "design".into())?;
            Some(DesignBasis::new(&setup.problem, &design).context(|| "design basis".into())?)
        } else {
            None
        };
        let grid_map = match (&grid_basis, config.estimator) {
            (Some(b), EstimatorKind::Learn) => Some(
                learn_matrix(&setup.problem, b, &filter)
                    .context(|| format!("learning map at n = {n}"))?,
            ),
            _ => None,
        };
        Ok(Self {
            config,
            setup,
            n,
            filter,
            grid_basis,
            grid_map,
        })
    }

    fn estimate(&self, key: RngKey) -> Result<Vec<f64>> {
        let p = &self.setup.problem;
        let owned;
        let basis = match &self.grid_basis {
            Some(b) => b,
            None => {
                let design =
                    sample_design(self.config.scheme, self.n, key).context(|| "design".into())?;
                owned = DesignBasis::new(p, &design).context(|| "design basis".into())?;
                &owned
            }
        };
        let ctx = || format!("replicate {} (n = {})", key.replicate, self.n);
        let samples = sample_on_basis(
            basis,
            &self.setup.y.coeffs,
            self.config.scheme,
            self.setup.noise,
            key,
        )
        .context(ctx)?;
        let est = match self.config.estimator {
            EstimatorKind::Paper => {
                estimator_paper_on(p, basis, &self.filter, &samples.outputs).context(ctx)?
            }
            EstimatorKind::Learn => match &self.grid_map {
                Some(map) => {
                    let f = map
                        * rkhs_invlab_core::nalgebra::DVector::from_column_slice(&samples.outputs);
                    return Ok(f.iter().copied().collect());
                }
                None => {
                    estimator_learn_on(p, basis, &self.filter, &samples.outputs).context(ctx)?
                }
            },
        };
        Ok(est.coeffs)
    }

    /// Estimates for replicates `offset .. offset + count`, in order.
    fn replicates(&self, offset: u64, count: u64) -> Result<Vec<Vec<f64>>> {
        (0..count)
            .into_par_iter()
            .map(|r| self.estimate(RngKey::new(self.config.seed, offset + r)))
            .collect()
    }
}

fn gamma_of(config: &StudyConfig) -> f64 {
    config.gamma.unwrap_or(config.problem.r + 0.5)
}

fn filter_for(config: &StudyConfig, lambda: f64) -> Result<FilterSpec> {
    FilterSpec::new(config.filter, lambda).context(|| format!("filter at lambda = {lambda}"))
}

fn stat_rate(config: &StudyConfig) -> Result<StudyReport> {
    let s = setup(config)?;
    let (r, b) = (config.problem.r, config.problem.b);
    let theory =
        RateExponents::statistical_upper(r, b, gamma_of(config)).context(|| "theory".into())?;
    let schedule = config.schedule.unwrap_or(crate::config::Schedule {
        c: 1.0,
        exponent: theory.schedule,
    });
    let mut report = empty_report(config);
    report.theory.insert("alpha".into(), theory.alpha);
    report
        .theory
        .insert("lambda_exponent".into(), schedule.exponent);
    for (idx, &n) in config.n_grid.iter().enumerate() {
        let lambda = lambda_schedule(ScheduleKind::ByN, schedule.c, schedule.exponent, n as f64)
            .context(|| "schedule".into())?;
        let sampler = Sampler::new(config, &s, n as usize, filter_for(config, lambda)?)?;
        let ests = sampler.replicates(idx as u64 * config.replicates, config.replicates)?;
        let errs: Vec<f64> = ests.iter().map(|e| sq_dist(e, &s.truth.coeffs)).collect();
        let (mean, se) = mean_se(&errs);
        let mut rec = PointRecord::new(n as f64, lambda, mean, se);
        rec.err_median = Some(median(&errs));
        report.records.push(rec);
    }
    Ok(report)
}

fn perturbation_mode(choice: PerturbationChoice, filter: &FilterSpec) -> PerturbationMode {
    match choice {
        PerturbationChoice::RandomUnit => PerturbationMode::RandomUnit,
        PerturbationChoice::FixedMode(j) => PerturbationMode::FixedMode(j),
        PerturbationChoice::FilterAdversarial => {
            PerturbationMode::FilterAdversarial(filter.clone())
        }
    }
}

/// `||f^lambda_delta - f||^2` for one perturbation draw.
fn det_error(
    s: &Setup,
    filter: &FilterSpec,
    delta: f64,
    mode: PerturbationMode,
    key: RngKey,
) -> Result<f64> {
    let spec = PerturbationSpec { delta, mode };
    let yd = perturb_data(&s.problem, &s.y, &spec, key)
        .context(|| format!("perturbation at delta = {delta}"))?;
    let est = solve_continuous(&s.problem, filter, &yd)
        .context(|| format!("solve at delta = {delta}"))?;
    Ok(sq_dist(&est.coeffs, &s.truth.coeffs))
}

fn det_rate(config: &StudyConfig) -> Result<StudyReport> {
    let s = setup(config)?;
    let (r, b) = (config.problem.r, config.problem.b);
    let gamma = gamma_of(config);
    let (exponent, lambda_exponent) = match config.det_theory {
        DetTheory::Classical => {
            let e = RateExponents::classical_lower(r, gamma).context(|| "theory".into())?;
            (e.alpha, e.schedule)
        }
        DetTheory::Converted => {
            let up = RateExponents::statistical_upper(r, b, gamma).context(|| "theory".into())?;
            let c = convert_upper(&up).context(|| "conversion".into())?;
            (c.rate_exponent, c.lambda_exponent)
        }
    };
    let schedule = config.schedule.unwrap_or(crate::config::Schedule {
        c: 1.0,
        exponent: lambda_exponent,
    });
    let mut report = empty_report(config);
    report.theory.insert("exponent".into(), exponent);
    report
        .theory
        .insert("lambda_exponent".into(), schedule.exponent);
    report.theory.insert("gamma".into(), gamma);
    for (idx, &delta) in config.delta_grid.iter().enumerate() {
        let lambda = lambda_schedule(ScheduleKind::ByDelta, schedule.c, schedule.exponent, delta)
            .context(|| "schedule".into())?;
        let filter = filter_for(config, lambda)?;
        filter
            .check_spectrum(&s.problem)
            .context(|| "filter".into())?;
        let mode = perturbation_mode(config.perturbation, &filter);
        let offset = idx as u64 * config.replicates;
        let errs: Vec<f64> = (0..config.replicates)
            .into_par_iter()
            .map(|k| {
                det_error(
                    &s,
                    &filter,
                    delta,
                    mode.clone(),
                    RngKey::new(config.seed, offset + k),
                )
            })
            .collect::<Result<_>>()?;
        let (mean, se) = mean_se(&errs);
        let mut rec = PointRecord::new(delta, lambda, mean, se);
        if config.perturbation == PerturbationChoice::FilterAdversarial {
            rec = rec.with(
                "mode",
                rkhs_invlab_core::sampling::adversarial_mode(&s.problem, &filter) as f64,
            );
        }
        report.records.push(rec);
    }
    Ok(report)
}

fn lemma_check(config: &StudyConfig) -> Result<StudyReport> {
    let s = setup(config)?;
    let n = config.n.unwrap_or(0);
    let lambda = config.lambda.unwrap_or(0.0);
    let filter = filter_for(config, lambda)?;
    let reps = config.replicates;
    let modes = s.problem.modes;
    let k = config.tolerances.se_multiplier;

    let continuous =
        solve_continuous(&s.problem, &filter, &s.y).context(|| "continuous solve".into())?;
    let bias_sq = sq_dist(&continuous.coeffs, &s.truth.coeffs);
    let hs = hs_norm(&s.problem, &filter);
    let variance_term = config.sigma * config.sigma / n as f64 * hs * hs;

    let sampler = Sampler::new(config, &s, n as usize, filter.clone())?;
    let ests = sampler.replicates(0, reps)?;
    let errs: Vec<f64> = ests.iter().map(|e| sq_dist(e, &s.truth.coeffs)).collect();
    let (mse, mse_se) = mean_se(&errs);

    let rf = reps as f64;
    let mut mean = vec![0.0; modes];
    for e in &ests {
        for (m, v) in mean.iter_mut().zip(e) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= rf);
    let mut var = vec![0.0; modes];
    for e in &ests {
        for ((acc, v), m) in var.iter_mut().zip(e).zip(&mean) {
            *acc += (v - m) * (v - m);
        }
    }
    // Plug-in variance (divisor R): with it, mse = variance_mc + ||mean - f||^2 exactly.
    let variance_mc: f64 = var.iter().sum::<f64>() / rf;
    let unbiased: Vec<f64> = var.iter().map(|v| v / (rf - 1.0)).collect();

    let mut worst_ratio: f64 = 0.0;
    for j in 0..modes {
        let se = (unbiased[j] / rf).sqrt();
        let diff = (mean[j] - continuous.coeffs[j]).abs();
        let allowed = k * se + 1e-12 * (1.0 + continuous.coeffs[j].abs());
        worst_ratio = worst_ratio.max(diff / allowed);
    }
    // ||mean - f||^2 - ||f^lambda - f||^2 = 2 <mean - f^lambda, f^lambda - f> + ||mean - f^lambda||^2;
    // the first term has standard deviation 2 sqrt(sum_j b_j^2 var_j / R).
    let decomposition_se = 2.0
        * (continuous
            .coeffs
            .iter()
            .zip(&s.truth.coeffs)
            .zip(&unbiased)
            .map(|((c, t), v)| (c - t) * (c - t) * v)
            .sum::<f64>()
            / rf)
            .sqrt();

    let link = RateLink::from_problem(&s.problem, &filter, &s.truth, config.sigma)
        .context(|| "rate link".into())?;
    let delta = delta_of(n, &link).context(|| "delta".into())?;
    let fixed = match config.perturbation {
        PerturbationChoice::FixedMode(j) => j,
        _ => 1,
    };
    let probe = RngKey::new(config.seed, reps);
    let det_random = det_error(&s, &filter, delta, PerturbationMode::RandomUnit, probe)?;
    let det_fixed = det_error(
        &s,
        &filter,
        delta,
        PerturbationMode::FixedMode(fixed),
        probe,
    )?;
    let det_adv = det_error(
        &s,
        &filter,
        delta,
        PerturbationMode::FilterAdversarial(filter.clone()),
        probe,
    )?;

    let mut report = empty_report(config);
    report.records.push(
        PointRecord::new(n as f64, lambda, mse, mse_se)
            .with("variance_term", variance_term)
            .with("bias_sq", bias_sq)
            .with("variance_mc", variance_mc),
    );
    for (key, v) in [
        ("mse", mse),
        ("mse_se", mse_se),
        ("variance_term", variance_term),
        ("bias_sq", bias_sq),
        ("hs_norm", hs),
        ("epsilon", link.epsilon),
        ("delta", delta),
        ("variance_mc", variance_mc),
        ("component_worst_ratio", worst_ratio),
        ("decomposition_se", decomposition_se),
        ("det_err_random-unit", det_random),
        ("det_err_fixed-mode", det_fixed),
        ("det_err_filter-adversarial", det_adv),
    ] {
        report.summary.insert(key.into(), v);
    }
    report
        .theory
        .insert("lower_bound".into(), variance_term + bias_sq);
    Ok(report)
}

/// `||g_n - g||_{H_K}` and the pulled-back distance for one grid size.
pub fn gamma_distances(
    problem: &SpectralProblem,
    y: &DataFunction,
    n: usize,
    lambda: f64,
) -> Result<(f64, f64)> {
    let design = sample_design(Scheme::Grid, n, 0).context(|| "design".into())?;
    let basis = DesignBasis::new(problem, &design).context(|| "design basis".into())?;
    let samples = sample_on_basis(&basis, &y.coeffs, Scheme::Grid, NoiseModel::NONE, 0)
        .context(|| "samples".into())?;
    let sol = kernel_tikhonov_on(problem, &basis, &samples.outputs, lambda)
        .context(|| format!("kernel solve at n = {n}"))?;
    let limit: Vec<f64> = problem
        .mu
        .iter()
        .zip(&y.coeffs)
        .map(|(m, yj)| m / (m + lambda) * yj)
        .collect();
    let diff: Vec<f64> = sol
        .g_coeffs
        .iter()
        .zip(&limit)
        .map(|(a, b)| a - b)
        .collect();
    let hk = rkhs_norm(problem, &diff).context(|| "H_K norm".into())?;
    let fa = correspondence_pullback(problem, &sol.g_coeffs).context(|| "pullback".into())?;
    let fb = correspondence_pullback(problem, &limit).context(|| "pullback".into())?;
    Ok((hk, sq_dist(&fa, &fb).sqrt()))
}

fn gamma_study(config: &StudyConfig) -> Result<StudyReport> {
    let s = setup(config)?;
    let lambda = config.lambda.unwrap_or(0.0);
    let rows: Vec<(f64, f64)> = config
        .n_grid
        .par_iter()
        .map(|&n| gamma_distances(&s.problem, &s.y, n as usize, lambda))
        .collect::<Result<_>>()?;
    let mut report = empty_report(config);
    for (&n, (hk, h1)) in config.n_grid.iter().zip(rows) {
        report
            .records
            .push(PointRecord::new(n as f64, lambda, hk, 0.0).with("h1_error", h1));
    }
    Ok(report)
}

/// Largest relative deviations of the correspondence identities on one instance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquivalenceDeviations {
    /// `||A f_learn - g_kernel|| / ||g_kernel||`.
    pub methods: f64,
    /// `| ||g||_{H_K} - ||f|| | / ||f||`.
    pub norm: f64,
    /// `| ||A f||_{H_K} - ||f|| | / ||f||` for the reference element.
    pub isometry: f64,
    /// `||A^{-1} A f - f|| / ||f||`.
    pub roundtrip: f64,
    /// Iterative representer coefficients against `(K + lambda n I)^{-1} y`.
    pub representer: f64,
}

fn rel(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num / den
    } else {
        num
    }
}

pub fn equivalence_deviations(
    problem: &SpectralProblem,
    samples: &SampleSet,
    f_ref: &[f64],
    lambda: f64,
) -> Result<EquivalenceDeviations> {
    let ctx = || "equivalence instance".to_string();
    let learn = estimator_learn(
        problem,
        &FilterSpec::tikhonov(lambda).context(ctx)?,
        samples,
    )
    .context(ctx)?;
    let kernel = kernel_tikhonov(problem, samples, lambda).context(ctx)?;
    let af = forward_data(problem, &learn.coeffs).context(ctx)?;
    let g_norm = sq_dist(&kernel.g_coeffs, &vec![0.0; problem.modes]).sqrt();
    let methods = rel(sq_dist(&af.coeffs, &kernel.g_coeffs).sqrt(), g_norm);
    let f_norm = sq_dist(&learn.coeffs, &vec![0.0; problem.modes]).sqrt();
    let hk = rkhs_norm(problem, &kernel.g_coeffs).context(ctx)?;
    let norm = rel((hk - f_norm).abs(), f_norm);

    let ref_norm = sq_dist(f_ref, &vec![0.0; f_ref.len()]).sqrt();
    let image = forward_data(problem, f_ref).context(ctx)?;
    let isometry = rel(
        (rkhs_norm(problem, &image.coeffs).context(ctx)? - ref_norm).abs(),
        ref_norm,
    );
    let back = correspondence_pullback(problem, &image.coeffs).context(ctx)?;
    let roundtrip = rel(sq_dist(&back, f_ref).sqrt(), ref_norm);

    let erm = erm_representer_solve(
        problem,
        samples,
        &LossSpec::square(),
        PenaltySpec::Square,
        lambda,
        &ErmOptions::default(),
    )
    .context(ctx)?;
    let beta_norm = sq_dist(&kernel.beta, &vec![0.0; kernel.beta.len()]).sqrt();
    let representer = rel(sq_dist(&erm.beta, &kernel.beta).sqrt(), beta_norm);
    Ok(EquivalenceDeviations {
        methods,
        norm,
        isometry,
        roundtrip,
        representer,
    })
}

/// Random instance `t`: `J <= 50`, `n <= 30`, `lambda` log-uniform in `[1e-4, 1]`.
fn equivalence_instance(config: &StudyConfig, t: u64) -> Result<(f64, EquivalenceDeviations)> {
    let key = RngKey::new(config.seed, t);
    let mut rng = key.stream(Purpose::Source);
    let u = uniform_vec(&mut rng, 5);
    let modes = 1 + (u[0] * 50.0) as usize;
    let b = 1.5 + 1.5 * u[1];
    let d = 0.5 + 1.5 * u[2];
    let n = 1 + (u[3] * 30.0) as usize;
    let lambda = 10f64.powf(-4.0 + 4.0 * u[4]);
    let problem = build_power_law_problem(modes, b, d).context(|| format!("trial {t}"))?;
    let f_ref = normal_vec(&mut rng, modes);
    let y = forward_data(&problem, &f_ref).context(|| format!("trial {t}"))?;
    let design = sample_design(config.scheme, n, key).context(|| format!("trial {t}"))?;
    let basis = DesignBasis::new(&problem, &design).context(|| format!("trial {t}"))?;
    let noise = if config.sigma > 0.0 {
        NoiseModel::gaussian(config.sigma).context(|| "noise".into())?
    } else {
        NoiseModel::NONE
    };
    let samples = sample_on_basis(&basis, &y.coeffs, config.scheme, noise, key)
        .context(|| format!("trial {t}"))?;
    Ok((
        lambda,
        equivalence_deviations(&problem, &samples, &f_ref, lambda)?,
    ))
}

fn equivalence_check(config: &StudyConfig) -> Result<StudyReport> {
    let rows: Vec<(f64, EquivalenceDeviations)> = (0..config.trials as u64)
        .into_par_iter()
        .map(|t| equivalence_instance(config, t))
        .collect::<Result<_>>()?;
    let mut report = empty_report(config);
    for (t, (lambda, dev)) in rows.into_iter().enumerate() {
        let worst = dev.methods.max(dev.norm);
        report.records.push(
            PointRecord::new(t as f64, lambda, worst, 0.0)
                .with("methods", dev.methods)
                .with("norm", dev.norm)
                .with("isometry", dev.isometry)
                .with("roundtrip", dev.roundtrip)
                .with("representer", dev.representer),
        );
    }
    Ok(report)
}

fn variance_sweep(config: &StudyConfig) -> Result<StudyReport> {
    let s = setup(config)?;
    let n = config.n.unwrap_or(0);
    let lo = config.lambda_range.lo.unwrap_or(10.0 * s.problem.mu_min());
    let hi = config.lambda_range.hi.unwrap_or(s.problem.mu_max());
    let lambdas = log_grid(lo, hi, config.lambda_range.count);
    let reps = config.replicates;
    let mut report = empty_report(config);
    let mut eps_points = Vec::new();
    for (idx, &lambda) in lambdas.iter().enumerate() {
        let filter = filter_for(config, lambda)?;
        let sampler = Sampler::new(config, &s, n as usize, filter.clone())?;
        let ests = sampler.replicates(idx as u64 * reps, reps)?;
        let modes = s.problem.modes;
        let mut mean = vec![0.0; modes];
        for e in &ests {
            for (m, v) in mean.iter_mut().zip(e) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= reps as f64);
        let spread: Vec<f64> = ests.iter().map(|e| sq_dist(e, &mean)).collect();
        let scale = reps as f64 / (reps as f64 - 1.0);
        let (v, se) = mean_se(&spread);
        let hs = hs_norm(&s.problem, &filter);
        let eps = epsilon_lambda(&s.problem, &filter, &s.truth).context(|| "epsilon".into())?;
        eps_points.push((lambda, eps));
        report.records.push(
            PointRecord::new(lambda, lambda, v * scale, se * scale)
                .with(
                    "variance_term",
                    config.sigma * config.sigma / n as f64 * hs * hs,
                )
                .with("epsilon", eps)
                .with(
                    "bias",
                    bias_norm(&s.problem, &filter, &s.truth).context(|| "bias".into())?,
                ),
        );
    }
    if let Ok(f) = fit_rate(&eps_points) {
        report.summary.insert("gamma_hat".into(), f.slope);
        report.summary.insert("gamma_hat_stderr".into(), f.stderr);
    }
    let ranks: Vec<f64> = lambdas.clone();
    let vars: Vec<f64> = report.records.iter().map(|r| r.err_mean).collect();
    if let Ok(rho) = rank_correlation(&ranks, &vars) {
        report
            .summary
            .insert("variance_rank_correlation".into(), rho);
    }
    report
        .theory
        .insert("gamma_nominal".into(), config.problem.r + 0.5);
    report.theory.insert(
        "variance_slope_bound".into(),
        -(1.0 + 1.0 / config.problem.b),
    );
    Ok(report)
}
