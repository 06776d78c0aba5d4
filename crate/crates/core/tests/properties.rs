use proptest::prelude::*;

use rkhs_invlab_core::filters::log_grid;
use rkhs_invlab_core::regularization::kernel_tikhonov_on;
use rkhs_invlab_core::rkhs::{kernel_section, rkhs_inner};
use rkhs_invlab_core::spectral::sine_row;
use rkhs_invlab_core::*;

fn problem_strategy() -> impl Strategy<Value = SpectralProblem> {
    (1usize..=40, 1.2f64..4.0, 0.2f64..5.0)
        .prop_map(|(j, b, d)| build_power_law_problem(j, b, d).unwrap())
}

fn coeffs(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-3.0f64..3.0, len)
}

fn problem_and_coeffs() -> impl Strategy<Value = (SpectralProblem, Vec<f64>)> {
    problem_strategy().prop_flat_map(|p| {
        let j = p.modes;
        (Just(p), coeffs(j))
    })
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

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

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn parseval_by_midpoint_quadrature(c in coeffs(8)) {
        prop_assume!(norm(&c) > 1e-3);
        let n = 10_000;
        let mut row = vec![0.0; c.len()];
        let mut total = 0.0;
        for i in 0..n {
            sine_row((i as f64 + 0.5) / n as f64, &mut row);
            let v: f64 = row.iter().zip(&c).map(|(u, a)| u * a).sum();
            total += v * v;
        }
        let exact: f64 = c.iter().map(|a| a * a).sum();
        prop_assert!(((total / n as f64) - exact).abs() / exact < 1e-3);
    }

    #[test]
    fn forward_data_is_linear((p, f) in problem_and_coeffs(), alpha in -4.0f64..4.0, seed in any::<u64>()) {
        let g: Vec<f64> = f.iter().enumerate().map(|(k, v)| v * 0.3 + (seed % 7) as f64 - k as f64 * 0.1).collect();
        let combo: Vec<f64> = f.iter().zip(&g).map(|(a, b)| alpha * a + b).collect();
        let lhs = forward_data(&p, &combo).unwrap().coeffs;
        let fa = forward_data(&p, &f).unwrap().coeffs;
        let fb = forward_data(&p, &g).unwrap().coeffs;
        for ((l, a), b) in lhs.iter().zip(&fa).zip(&fb) {
            let rhs = alpha * a + b;
            prop_assert!((l - rhs).abs() <= 1e-14 * (alpha.abs() * a.abs() + b.abs()).max(1e-300) * 4.0);
        }
    }

    #[test]
    fn decay_certificate_holds_at_equality(p in problem_strategy()) {
        prop_assert!(p.decay_certificate(p.decay_d) >= -1e-15 * p.decay_d);
    }

    #[test]
    fn forward_map_is_an_isometry_onto_its_image((p, f) in problem_and_coeffs()) {
        prop_assume!(norm(&f) > 1e-8);
        let g = forward_data(&p, &f).unwrap();
        let hk = rkhs_norm(&p, &g.coeffs).unwrap();
        prop_assert!((hk - norm(&f)).abs() <= 1e-10 * norm(&f));
        let back = correspondence_pullback(&p, &g.coeffs).unwrap();
        for (a, b) in back.iter().zip(&f) {
            prop_assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn reproducing_property((p, g) in problem_and_coeffs(), x in 0.0f64..=1.0) {
        let direct = eval_function(&p, &g, Space::Output, x).unwrap();
        let section = kernel_section(&p, x).unwrap();
        let inner = rkhs_inner(&p, &g, &section).unwrap();
        let mut row = vec![0.0; p.modes];
        sine_row(x, &mut row);
        let manual: f64 = g.iter().zip(&row).map(|(a, u)| a * u).sum();
        let scale = 1.0 + g.iter().map(|v| v.abs()).sum::<f64>();
        prop_assert!((direct - manual).abs() <= 1e-10 * scale);
        prop_assert!((direct - inner).abs() <= 1e-10 * scale);
    }

    #[test]
    fn perturbation_has_exact_norm((p, f) in problem_and_coeffs(), delta in 0.0f64..2.0, mode in 0usize..3, seed in any::<u64>()) {
        let y = forward_data(&p, &f).unwrap();
        let mode = match mode {
            0 => PerturbationMode::RandomUnit,
            1 => PerturbationMode::FixedMode(1 + (seed as usize) % p.modes),
            _ => PerturbationMode::FilterAdversarial(FilterSpec::tikhonov(0.01).unwrap()),
        };
        let yd = perturb_data(&p, &y, &PerturbationSpec { delta, mode }, seed).unwrap();
        let diff: Vec<f64> = yd.coeffs.iter().zip(&y.coeffs).map(|(a, b)| a - b).collect();
        let scale = 1.0 + norm(&y.coeffs);
        prop_assert!((norm(&diff) - delta).abs() <= 1e-14 * scale * 4.0);
    }

    #[test]
    fn identical_seeds_give_identical_samples(seed in any::<u64>(), replicate in 0u64..1000, n in 1usize..200) {
        let p = build_power_law_problem(10, 2.0, 1.0).unwrap();
        let t = make_source_solution(&p, 1.0, &[1.0; 10]).unwrap();
        let key = RngKey { seed, replicate };
        let design = sample_design(Scheme::IidUniform, n, key).unwrap();
        let noise = NoiseModel::gaussian(0.3).unwrap();
        let a = sample_outputs(&p, &t, &design, Scheme::IidUniform, noise, key).unwrap();
        let b = sample_outputs(&p, &t, &sample_design(Scheme::IidUniform, n, key).unwrap(), Scheme::IidUniform, noise, key).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn conjugate_identity(n in 1u64..=10_000, sigma in 0.0f64..5.0, eps in 0.0f64..5.0) {
        let link = RateLink::new(sigma, eps, 0.1).unwrap();
        let d = delta_of(n, &link).unwrap();
        let v = sigma * sigma / n as f64;
        let naive = (v + eps * eps).sqrt() - eps;
        prop_assert!((d - naive).abs() <= 1e-12 * v.max(1.0));
        if d > 0.0 {
            let (back, _) = n_of(d, &link).unwrap();
            prop_assert!((back - n as f64).abs() <= 1e-9 * n as f64);
        }
    }

    #[test]
    fn methods_equivalence(p in problem_strategy(), n in 1usize..30, lambda in 1e-4f64..1.0, seed in any::<u64>()) {
        let design = sample_design(Scheme::IidUniform, n, seed).unwrap();
        let ys: Vec<f64> = design.iter().map(|x| (7.0 * x).sin() + x).collect();
        let s = samples(design, ys);
        let f = estimator_learn(&p, &FilterSpec::tikhonov(lambda).unwrap(), &s).unwrap();
        let g = kernel_tikhonov(&p, &s, lambda).unwrap();
        let af = forward_data(&p, &f.coeffs).unwrap().coeffs;
        let gn = norm(&g.g_coeffs);
        prop_assume!(gn > 1e-200);
        let diff: Vec<f64> = af.iter().zip(&g.g_coeffs).map(|(a, b)| a - b).collect();
        prop_assert!(norm(&diff) <= 1e-10 * gn);
        let hk = rkhs_norm(&p, &g.g_coeffs).unwrap();
        prop_assert!((hk - norm(&f.coeffs)).abs() <= 1e-10 * hk);
    }

    #[test]
    fn gram_is_psd_and_symmetric(p in problem_strategy(), pts in prop::collection::vec(0.0f64..=1.0, 1..=20)) {
        let g = gram_matrix(&p, &pts).unwrap();
        prop_assert_eq!(g.asymmetry(), 0.0);
        let (lo, hi) = g.extreme_eigenvalues();
        prop_assert!(lo >= -1e-10 * hi.abs().max(f64::MIN_POSITIVE));
    }

    #[test]
    fn gram_invariant_under_point_permutation(p in problem_strategy(), pts in prop::collection::vec(0.0f64..=1.0, 2..=12), rot in 1usize..12) {
        let mut shuffled = pts.clone();
        let k = rot % pts.len();
        shuffled.rotate_left(k);
        let a = gram_matrix(&p, &pts).unwrap();
        let b = gram_matrix(&p, &shuffled).unwrap();
        let m = pts.len();
        for i in 0..m {
            for j in 0..m {
                let bi = (i + m - k) % m;
                let bj = (j + m - k) % m;
                prop_assert!((a.entries[(i, j)] - b.entries[(bi, bj)]).abs() <= 1e-13 * (1.0 + a.entries[(i, j)].abs()));
            }
        }
    }

    #[test]
    fn sign_flip_of_a_mode_preserves_norms((p, f) in problem_and_coeffs(), flip in 0usize..40) {
        // u_j -> -u_j together with v_j -> -v_j is a unitary change of basis
        // that leaves the operator unchanged; norms must not see it.
        let j = flip % p.modes;
        let mut g = f.clone();
        g[j] = -g[j];
        let a = rkhs_norm(&p, &forward_data(&p, &f).unwrap().coeffs).unwrap();
        let b = rkhs_norm(&p, &forward_data(&p, &g).unwrap().coeffs).unwrap();
        prop_assert!((a - b).abs() <= 1e-14 * a.max(1e-300));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn representer_limit_is_cauchy_and_interpolates(n in 2usize..=12, seed in any::<u64>()) {
        let p = build_power_law_problem(40, 2.0, 1.0).unwrap();
        let design = sample_design(Scheme::Grid, n, seed).unwrap();
        let ys: Vec<f64> = design.iter().map(|x| (3.0 * x).cos() - 0.5 * x).collect();
        let basis = rkhs_invlab_core::rkhs::DesignBasis::new(&p, &design).unwrap();
        let trace_over_n = basis.gram(&p).trace() / n as f64;
        let mut prev: Option<Vec<f64>> = None;
        let mut gaps = Vec::new();
        for k in 2..=8 {
            let lambda = 10f64.powi(-k) * trace_over_n;
            let sol = kernel_tikhonov_on(&p, &basis, &ys, lambda).unwrap();
            // The solution lives in the span of the kernel sections.
            let rebuilt = basis.kernel_expansion(&p, &sol.beta);
            for (a, b) in rebuilt.iter().zip(&sol.g_coeffs) {
                prop_assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()));
            }
            if let Some(q) = &prev {
                let d: Vec<f64> = q.iter().zip(&sol.beta).map(|(a, b)| a - b).collect();
                gaps.push(norm(&d));
            }
            prev = Some(sol.beta);
        }
        for w in gaps.windows(2) {
            prop_assert!(w[1] <= w[0] * 1.01 + 1e-9);
        }
        let lambda = 1e-10 * trace_over_n;
        let sol = kernel_tikhonov_on(&p, &basis, &ys, lambda).unwrap();
        let mut worst: f64 = 0.0;
        for (x, y) in design.iter().zip(&ys) {
            let v = eval_function(&p, &sol.g_coeffs, Space::Output, *x).unwrap();
            worst = worst.max((v - y).abs());
        }
        prop_assert!(worst <= 1e-6, "residual {worst}");
    }
}

#[test]
fn filter_certificates_for_every_family() {
    let p = build_power_law_problem(100, 2.0, 1.0).unwrap();
    let grid = log_grid(p.mu_min(), p.mu_max(), 10_000);
    for lambda in log_grid(1e-5, 1.0, 50) {
        for filter in [
            FilterSpec::tikhonov(lambda).unwrap(),
            FilterSpec::cutoff(lambda).unwrap(),
            FilterSpec::new(FilterKind::Landweber, lambda).unwrap(),
        ] {
            let cert = certify(&filter, &grid);
            assert!(
                cert.worst_margin() >= -1e-12,
                "{:?} lambda={lambda}: {cert:?}",
                filter.kind
            );
        }
    }
}

#[test]
fn grid_riemann_sum_converges_at_second_order() {
    // Square-loss empirical risk on the midpoint grid versus the integral,
    // for smooth functions that are not band limited by the grid.
    let y = |x: f64| (x * 2.3).exp();
    let g = |x: f64| x * x - 0.3;
    // Closed form of the integral of (y - g)^2 over [0, 1], by high-order quadrature.
    let exact = {
        let m = 200_000;
        let h = 1.0 / m as f64;
        let f = |x: f64| (y(x) - g(x)).powi(2);
        let mut s = f(0.0) + f(1.0);
        for i in 1..m {
            s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(i as f64 * h);
        }
        s * h / 3.0
    };
    let mut pts = Vec::new();
    for n in [8usize, 16, 32, 64, 128, 256] {
        let design = sample_design(Scheme::Grid, n, 0).unwrap();
        let loss = LossSpec::square();
        let risk = design.iter().map(|&x| loss.value(y(x), g(x))).sum::<f64>() / n as f64;
        pts.push((n as f64, (risk - exact).abs()));
    }
    let fit = fit_rate(&pts).unwrap();
    assert!((fit.slope + 2.0).abs() < 0.1, "slope {}", fit.slope);
}

#[test]
fn conversion_values_are_exact() {
    let up = convert_upper(&RateExponents::new(2.0 / 3.5, 1.0 / 3.5, 1.5).unwrap()).unwrap();
    assert_eq!(up.rate_exponent, 1.0);
    let low = convert_lower(&RateExponents::new(4.0 / 3.0, 2.0 / 3.0, 1.5).unwrap()).unwrap();
    assert_eq!(low.rate_exponent, 2.0 / 3.0);
    assert_eq!(
        loss_factor_tau(1.0, 2.0, TauVariant::General).unwrap(),
        7.0 / 6.0
    );
    assert_eq!(
        loss_factor_tau(1.0, 2.0, TauVariant::Tikhonov).unwrap(),
        4.0 / 3.0
    );
}
