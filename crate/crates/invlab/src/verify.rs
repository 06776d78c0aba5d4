//! Built-in self-test: the model invariants checked on fixed random draws.

use rkhs_invlab_core::filters::log_grid;
use rkhs_invlab_core::regularization::kernel_tikhonov_on;
use rkhs_invlab_core::rkhs::{kernel_section, rkhs_inner, DesignBasis};
use rkhs_invlab_core::rng::{normal_vec, uniform_vec, Purpose};
use rkhs_invlab_core::spectral::sine_row;
use rkhs_invlab_core::*;

use crate::config::{StudyConfig, StudyKind};
use crate::experiments::run_study;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

type Check = fn() -> std::result::Result<String, String>;

const SEED: u64 = 0x5eed;

fn rng(t: u64) -> rkhs_invlab_core::rng::ChaCha20Rng {
    RngKey::new(SEED, t).stream(Purpose::Source)
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn fail<T>(msg: String) -> std::result::Result<T, String> {
    Err(msg)
}

fn core<T>(r: rkhs_invlab_core::Result<T>) -> std::result::Result<T, String> {
    r.map_err(|e| e.to_string())
}

fn parseval() -> std::result::Result<String, String> {
    let mut worst: f64 = 0.0;
    for t in 0..5 {
        let c = normal_vec(&mut rng(t), 12);
        let n = 10_000;
        let mut row = vec![0.0; c.len()];
        let mut total = 0.0;
        for i in 0..n {
            sine_row((i as f64 + 0.5) / n as f64, &mut row);
            let v: f64 = row.iter().zip(&c).map(|(u, a)| u * a).sum();
            total += v * v;
        }
        let exact = norm(&c).powi(2);
        worst = worst.max((total / n as f64 - exact).abs() / exact);
    }
    if worst < 1e-3 {
        Ok(format!("max relative error {worst:.3e}"))
    } else {
        fail(format!("relative error {worst:.3e}"))
    }
}

fn decay_and_linearity() -> std::result::Result<String, String> {
    let p = core(build_power_law_problem(100, 2.0, 1.0))?;
    let margin = p.decay_certificate(p.decay_d);
    if margin < -1e-15 {
        return fail(format!("decay certificate margin {margin:e}"));
    }
    let mut r = rng(10);
    let f = normal_vec(&mut r, 100);
    let g = normal_vec(&mut r, 100);
    let alpha = 1.7;
    let combo: Vec<f64> = f.iter().zip(&g).map(|(a, b)| alpha * a + b).collect();
    let lhs = core(forward_data(&p, &combo))?.coeffs;
    let fa = core(forward_data(&p, &f))?.coeffs;
    let fb = core(forward_data(&p, &g))?.coeffs;
    let mut worst: f64 = 0.0;
    for ((l, a), b) in lhs.iter().zip(&fa).zip(&fb) {
        let scale = alpha * a.abs() + b.abs();
        if scale > 0.0 {
            worst = worst.max((l - (alpha * a + b)).abs() / scale);
        }
    }
    if worst <= 1e-14 {
        Ok(format!("linearity defect {worst:.1e}"))
    } else {
        fail(format!("linearity defect {worst:e}"))
    }
}

fn isometry_and_reproducing() -> std::result::Result<String, String> {
    let p = core(build_power_law_problem(60, 2.5, 2.0))?;
    let mut worst_iso: f64 = 0.0;
    let mut worst_rep: f64 = 0.0;
    for t in 0..100 {
        let mut r = rng(100 + t);
        let f = normal_vec(&mut r, p.modes);
        let g = core(forward_data(&p, &f))?.coeffs;
        worst_iso = worst_iso.max((core(rkhs_norm(&p, &g))? - norm(&f)).abs() / norm(&f));
        let x = uniform_vec(&mut r, 1)[0];
        let direct = core(eval_function(&p, &g, Space::Output, x))?;
        let inner = core(rkhs_inner(&p, &g, &core(kernel_section(&p, x))?))?;
        worst_rep = worst_rep.max((direct - inner).abs());
    }
    if worst_iso <= 1e-10 && worst_rep <= 1e-10 {
        Ok(format!(
            "isometry {worst_iso:.1e}, reproducing {worst_rep:.1e}"
        ))
    } else {
        fail(format!("isometry {worst_iso:e}, reproducing {worst_rep:e}"))
    }
}

fn gram_psd() -> std::result::Result<String, String> {
    let p = core(build_power_law_problem(50, 2.0, 1.0))?;
    let mut worst = f64::INFINITY;
    for t in 0..50 {
        let mut r = rng(200 + t);
        let n = 1 + (uniform_vec(&mut r, 1)[0] * 20.0) as usize;
        let pts = uniform_vec(&mut r, n);
        let g = core(gram_matrix(&p, &pts))?;
        let (lo, hi) = g.extreme_eigenvalues();
        worst = worst.min(lo / hi.abs().max(f64::MIN_POSITIVE));
        if !g.is_psd(1e-10) {
            return fail(format!(
                "set {t}: smallest eigenvalue {lo:e}, largest {hi:e}"
            ));
        }
    }
    Ok(format!("min eigenvalue ratio {worst:.1e}"))
}

fn perturbation_and_reproducibility() -> std::result::Result<String, String> {
    let p = core(build_power_law_problem(30, 2.0, 1.0))?;
    let t = core(make_source_solution(&p, 1.0, &vec![1.0; 30]))?;
    let y = core(forward_data(&p, &t.coeffs))?;
    let filter = core(FilterSpec::tikhonov(0.01))?;
    for mode in [
        PerturbationMode::RandomUnit,
        PerturbationMode::FixedMode(7),
        PerturbationMode::FilterAdversarial(filter),
    ] {
        let yd = core(perturb_data(
            &p,
            &y,
            &PerturbationSpec { delta: 0.37, mode },
            3,
        ))?;
        let diff: Vec<f64> = yd
            .coeffs
            .iter()
            .zip(&y.coeffs)
            .map(|(a, b)| a - b)
            .collect();
        if (norm(&diff) - 0.37).abs() > 1e-14 {
            return fail(format!("perturbation norm {}", norm(&diff)));
        }
    }
    let noise = core(NoiseModel::gaussian(0.2))?;
    let key = RngKey::new(9, 4);
    let draw = || -> std::result::Result<SampleSet, String> {
        let d = core(sample_design(Scheme::IidUniform, 50, key))?;
        core(sample_outputs(&p, &t, &d, Scheme::IidUniform, noise, key))
    };
    if draw()? != draw()? {
        return fail("identical keys gave different samples".into());
    }
    Ok("exact perturbation norms, bit-identical resampling".into())
}

fn riemann() -> std::result::Result<String, String> {
    let y = |x: f64| (2.3 * x).exp();
    let g = |x: f64| x * x - 0.3;
    let m = 200_000;
    let h = 1.0 / m as f64;
    let f = |x: f64| (y(x) - g(x)).powi(2);
    let mut simpson = f(0.0) + f(1.0);
    for i in 1..m {
        simpson += if i % 2 == 1 { 4.0 } else { 2.0 } * f(i as f64 * h);
    }
    let exact = simpson * h / 3.0;
    let loss = LossSpec::square();
    let mut pts = Vec::new();
    for n in [8usize, 16, 32, 64, 128, 256] {
        let d = core(sample_design(Scheme::Grid, n, 0))?;
        let risk = d.iter().map(|&x| loss.value(y(x), g(x))).sum::<f64>() / n as f64;
        pts.push((n as f64, (risk - exact).abs()));
    }
    let fit = core(fit_rate(&pts))?;
    if (fit.slope + 2.0).abs() < 0.1 {
        Ok(format!("slope {:.3}", fit.slope))
    } else {
        fail(format!("slope {}", fit.slope))
    }
}

fn filter_certificates() -> std::result::Result<String, String> {
    let p = core(build_power_law_problem(100, 2.0, 1.0))?;
    let grid = log_grid(p.mu_min(), p.mu_max(), 10_000);
    let mut worst = f64::INFINITY;
    for lambda in log_grid(1e-5, 1.0, 50) {
        for kind in [
            FilterKind::Tikhonov,
            FilterKind::Cutoff,
            FilterKind::Landweber,
        ] {
            let f = core(FilterSpec::new(kind, lambda))?;
            let m = certify(&f, &grid).worst_margin();
            worst = worst.min(m);
            if m < -1e-12 {
                return fail(format!("{kind} at lambda = {lambda}: margin {m:e}"));
            }
        }
    }
    Ok(format!("worst margin {worst:.2e}"))
}

fn rate_identities() -> std::result::Result<String, String> {
    let mut worst_conj: f64 = 0.0;
    let mut worst_inv: f64 = 0.0;
    for t in 0..1000 {
        let u = uniform_vec(&mut rng(1000 + t), 2);
        let link = core(RateLink::new(5.0 * u[0], 5.0 * u[1], 0.1))?;
        for n in 1..=10_000u64 {
            let d = core(delta_of(n, &link))?;
            let v = link.sigma * link.sigma / n as f64;
            let naive = (v + link.epsilon * link.epsilon).sqrt() - link.epsilon;
            worst_conj = worst_conj.max((d - naive).abs() / v.max(1.0));
            if d > 0.0 {
                let (back, _) = core(n_of(d, &link))?;
                worst_inv = worst_inv.max((back - n as f64).abs() / n as f64);
            }
        }
    }
    let up = core(convert_upper(&core(RateExponents::new(
        2.0 / 3.5,
        1.0 / 3.5,
        1.5,
    ))?))?;
    let low = core(convert_lower(&core(RateExponents::new(
        4.0 / 3.0,
        2.0 / 3.0,
        1.5,
    ))?))?;
    let tau_g = core(loss_factor_tau(1.0, 2.0, TauVariant::General))?;
    let tau_t = core(loss_factor_tau(1.0, 2.0, TauVariant::Tikhonov))?;
    let exact = up.rate_exponent == 1.0
        && low.rate_exponent == 2.0 / 3.0
        && tau_g == 7.0 / 6.0
        && tau_t == 4.0 / 3.0;
    if worst_conj <= 1e-12 && worst_inv <= 1e-9 && exact {
        Ok(format!(
            "conjugate {worst_conj:.1e}, inversion {worst_inv:.1e}, conversions exact"
        ))
    } else {
        fail(format!(
            "conjugate {worst_conj:e}, inversion {worst_inv:e}, conversions exact: {exact}"
        ))
    }
}

fn representer_limit() -> std::result::Result<String, String> {
    let p = core(build_power_law_problem(40, 2.0, 1.0))?;
    let mut worst_res: f64 = 0.0;
    for n in [3usize, 8, 15, 20] {
        let design = core(sample_design(Scheme::Grid, n, 0))?;
        let ys: Vec<f64> = design.iter().map(|x| (3.0 * x).cos() - 0.5 * x).collect();
        let basis = core(DesignBasis::new(&p, &design))?;
        let scale = basis.gram(&p).trace() / n as f64;
        let mut prev: Option<Vec<f64>> = None;
        let mut last_gap = f64::INFINITY;
        for k in 2..=8 {
            let sol = core(kernel_tikhonov_on(&p, &basis, &ys, 10f64.powi(-k) * scale))?;
            if let Some(q) = &prev {
                let gap = norm(
                    &q.iter()
                        .zip(&sol.beta)
                        .map(|(a, b)| a - b)
                        .collect::<Vec<_>>(),
                );
                if gap > last_gap * 1.01 + 1e-9 {
                    return fail(format!(
                        "n = {n}: beta increments grow ({last_gap:e} -> {gap:e})"
                    ));
                }
                last_gap = gap;
            }
            prev = Some(sol.beta);
        }
        let sol = core(kernel_tikhonov_on(&p, &basis, &ys, 1e-10 * scale))?;
        for (x, y) in design.iter().zip(&ys) {
            worst_res = worst_res
                .max((core(eval_function(&p, &sol.g_coeffs, Space::Output, *x))? - y).abs());
        }
    }
    if worst_res <= 1e-6 {
        Ok(format!("interpolation residual {worst_res:.1e}"))
    } else {
        fail(format!("interpolation residual {worst_res:e}"))
    }
}

fn study(kind: StudyKind) -> std::result::Result<String, String> {
    let report = run_study(&StudyConfig::preset(kind)).map_err(|e| e.to_string())?;
    let failed: Vec<&str> = report
        .verdicts
        .iter()
        .filter(|v| !v.pass)
        .map(|v| v.name.as_str())
        .collect();
    if failed.is_empty() {
        Ok(format!("{} verdicts pass", report.verdicts.len()))
    } else {
        fail(format!("failed: {}", failed.join(", ")))
    }
}

fn equivalence_study() -> std::result::Result<String, String> {
    study(StudyKind::EquivalenceCheck)
}

fn gamma_study() -> std::result::Result<String, String> {
    study(StudyKind::GammaStudy)
}

fn lemma_study() -> std::result::Result<String, String> {
    study(StudyKind::LemmaCheck)
}

pub const CHECKS: &[(&str, Check)] = &[
    ("parseval", parseval),
    ("decay-and-linearity", decay_and_linearity),
    ("isometry-and-reproducing", isometry_and_reproducing),
    ("gram-psd", gram_psd),
    (
        "perturbation-and-reproducibility",
        perturbation_and_reproducibility,
    ),
    ("grid-riemann", riemann),
    ("filter-certificates", filter_certificates),
    ("rate-identities", rate_identities),
    ("representer-limit", representer_limit),
    ("equivalence-study", equivalence_study),
    ("gamma-study", gamma_study),
    ("lemma-study", lemma_study),
];

pub fn run_all() -> Vec<CheckOutcome> {
    CHECKS
        .iter()
        .map(|(name, check)| match check() {
            Ok(detail) => CheckOutcome {
                name,
                pass: true,
                detail,
            },
            Err(detail) => CheckOutcome {
                name,
                pass: false,
                detail,
            },
        })
        .collect()
}
