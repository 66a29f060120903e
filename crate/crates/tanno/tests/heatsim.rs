use nalgebra::DMatrix;
use tanno::heatsim::*;
use tanno_core::frame::{point_to_matrix, structure_functions};
use tanno_core::jets::{Monomial, Point, Polynomial, ScalarField};
use tanno_core::linalg::expm;
use tanno_core::models;
use tanno_core::ContactModel;

fn poly(d: usize, terms: &[(f64, &[u32])]) -> ScalarField {
    ScalarField::Polynomial(Polynomial::new(d, terms.iter().map(|(c, p)| Monomial::new(*c, p.to_vec())).collect()).unwrap())
}

fn within(est: &Estimate, exact: f64, k: f64) -> bool {
    (est.mean - exact).abs() <= k * est.stderr.max(1e-12)
}

#[test]
fn zero_time_keeps_paths_at_their_starts() {
    for m in [models::heisenberg(1).unwrap(), models::twisted(-1.0, 1.0).unwrap()] {
        let x = tanno::verify::random_point(&m, 5);
        let ens = simulate_paths(&SimConfig::new(&m, 0.0, 0.01, 8, 1).with_start(x.clone())).unwrap();
        assert!(ens.paths.iter().all(|p| p.point == x && p.escaped_at.is_none()));
    }
}

#[test]
fn bad_configs_are_rejected() {
    let m = models::heisenberg(1).unwrap();
    assert!(matches!(simulate_paths(&SimConfig::new(&m, 1.0, 0.0, 8, 1)), Err(SimError::Config(_))));
    assert!(matches!(simulate_paths(&SimConfig::new(&m, -1.0, 0.1, 8, 1)), Err(SimError::Config(_))));
    assert!(matches!(simulate_paths(&SimConfig::new(&m, 1.0, 0.1, 0, 1)), Err(SimError::Config(_))));
    let bad = SimConfig::new(&m, 1.0, 0.1, 8, 1).with_start(Point(vec![0.0; 2]));
    assert!(simulate_paths(&bad).is_err());
}

#[test]
fn heisenberg_moments() {
    // x, y are √2 B; z is a Lévy area with mean zero
    let m = models::heisenberg(1).unwrap();
    let t = 0.7;
    let cfg = SimConfig::new(&m, t, 0.01, 20_000, 3);
    let ens = simulate_paths(&cfg).unwrap();
    let r2 = Estimate::from_samples(&values_at_ends(&ens, &poly(3, &[(1.0, &[2, 0, 0]), (1.0, &[0, 2, 0])])));
    let z = Estimate::from_samples(&values_at_ends(&ens, &poly(3, &[(1.0, &[0, 0, 1])])));
    assert!(within(&r2, 4.0 * t, 3.0), "{r2:?}");
    assert!(within(&z, 0.0, 3.0), "{z:?}");
    // E[z²] = t² for the area (1/2)∫(x dy - y dx) driven by √2 B
    let z2 = Estimate::from_samples(&values_at_ends(&ens, &poly(3, &[(1.0, &[0, 0, 2])])));
    assert!(within(&z2, t * t, 4.0), "{z2:?}");
}

#[test]
fn mass_is_conserved() {
    let one = poly(3, &[(1.0, &[0, 0, 0])]);
    let g = models::twisted(-1.0, 1.0).unwrap();
    let one9 = ScalarField::Polynomial(Polynomial::constant(g.ambient_dim(), 1.0));
    assert_eq!(estimate_semigroup(&SimConfig::new(&g, 1.0, 0.01, 500, 0), &one9).unwrap().mean, 1.0);
    let h = models::heisenberg(1).unwrap();
    assert!(estimate_semigroup(&SimConfig::new(&h, 1.0, 0.01, 2000, 0), &one).unwrap().mean >= 0.999);
    let c = completeness(&SimConfig::new(&h, 1.0, 0.01, 2000, 0)).unwrap();
    assert_eq!(c.escaped, 0);
    assert!(!c.structural);
    // a tiny ball forces escapes
    let mut cfg = SimConfig::new(&h, 1.0, 0.01, 200, 0);
    cfg.escape_radius = Some(0.1);
    let c = completeness(&cfg).unwrap();
    assert!(c.escaped_fraction > 0.9);
    assert!((c.mass.mean - (1.0 - c.escaped_fraction)).abs() < 1e-12);
}

fn ensemble_in_pool(threads: usize, m: &ContactModel) -> PathEnsemble {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
    pool.install(|| simulate_paths(&SimConfig::new(m, 0.5, 0.01, 300, 42)).unwrap())
}

#[test]
fn results_do_not_depend_on_thread_count() {
    for m in [models::heisenberg(1).unwrap(), models::twisted(-1.0, 1.0).unwrap(), models::builtin("shear", &[]).unwrap()] {
        let a = ensemble_in_pool(1, &m);
        let b = ensemble_in_pool(4, &m);
        assert_eq!(a, b);
        for (i, p) in a.paths.iter().enumerate() {
            assert_eq!(p.stream, i as u64);
        }
    }
}

#[test]
fn seeds_change_paths() {
    let m = models::heisenberg(1).unwrap();
    let a = simulate_paths(&SimConfig::new(&m, 0.5, 0.01, 10, 1)).unwrap();
    let b = simulate_paths(&SimConfig::new(&m, 0.5, 0.01, 10, 2)).unwrap();
    assert_ne!(a, b);
}

#[test]
fn compact_group_stays_orthogonal() {
    let m = models::twisted(-1.0, 1.0).unwrap();
    let ens = simulate_paths(&SimConfig::new(&m, 10.0, 0.01, 4, 9)).unwrap();
    for p in &ens.paths {
        let y = point_to_matrix(&p.point, 3);
        assert!((y.transpose() * &y - DMatrix::identity(3, 3)).amax() < 1e-8);
    }
}

#[test]
fn group_mean_matches_matrix_exponential() {
    // E[Y_t] = exp(t(A_1² + A_2²)) when the drift vanishes
    let m = models::twisted(-1.0, 1.0).unwrap();
    let tanno_core::frame::Backend::Lie(lie) = m.backend() else { unreachable!() };
    let a = &lie.generators;
    let t = 0.5;
    let exact = expm(&((&a[0] * &a[0] + &a[1] * &a[1]) * t));
    let ens = simulate_paths(&SimConfig::new(&m, t, 0.005, 20_000, 11)).unwrap();
    for r in 0..3 {
        for c in 0..3 {
            let v: Vec<f64> = ens.paths.iter().map(|p| point_to_matrix(&p.point, 3)[(r, c)]).collect();
            let e = Estimate::from_samples(&v);
            assert!((e.mean - exact[(r, c)]).abs() <= 4.0 * e.stderr + 1e-3, "({r},{c}) {e:?} vs {}", exact[(r, c)]);
        }
    }
}

#[test]
fn chart_discretization_error_shrinks() {
    // shear paths at two step sizes agree within sampling noise
    let m = models::builtin("shear", &[]).unwrap();
    let f = poly(3, &[(1.0, &[1, 1, 0]), (0.5, &[0, 0, 1]), (1.0, &[0, 2, 0])]);
    let a = estimate_semigroup(&SimConfig::new(&m, 0.5, 0.02, 20_000, 4), &f).unwrap();
    let b = estimate_semigroup(&SimConfig::new(&m, 0.5, 0.005, 20_000, 4), &f).unwrap();
    let se = (a.stderr * a.stderr + b.stderr * b.stderr).sqrt();
    assert!((a.mean - b.mean).abs() <= 4.0 * se, "{a:?} {b:?}");
}

#[test]
fn chart_drift_matches_structure_functions() {
    let m = models::builtin("shear", &[]).unwrap();
    for x in tanno::verify::sample_points(&m, 10, 3) {
        let c = chart_drift_coefficients(&m, &x).unwrap();
        let sd = structure_functions(&m, &x).unwrap();
        for i in 0..2 {
            assert!((c[i] - sd.c()[i]).abs() < 1e-10, "{c:?} vs {}", sd.c());
        }
    }
    let h = models::heisenberg(1).unwrap();
    assert_eq!(chart_drift_coefficients(&h, &h.base_point()).unwrap(), vec![0.0, 0.0]);
    assert!(chart_drift_coefficients(&models::twisted(0.0, 1.0).unwrap(), &Point(vec![0.0; 9])).is_none());
}

#[test]
fn first_variation_starts_at_identity() {
    let m = models::twisted(-1.0, 1.0).unwrap();
    let fv = first_variation(&SimConfig::new(&m, 0.0, 0.01, 4, 0)).unwrap();
    assert!(fv.alphas.iter().all(|a| *a == DMatrix::identity(3, 3)));
    assert!(fv.holds);
}

#[test]
fn heisenberg_horizontal_block_is_frozen() {
    let m = models::heisenberg(1).unwrap();
    let fv = first_variation(&SimConfig::new(&m, 0.5, 0.01, 50, 0)).unwrap();
    for a in &fv.alphas {
        assert!((a.view((0, 0), (2, 2)) - DMatrix::<f64>::identity(2, 2)).amax() < 1e-12);
    }
    assert!(fv.holds);
}

#[test]
fn first_variation_bound_holds_on_groups() {
    for (a, b) in [(-1.0, 1.0), (0.0, 1.0), (1.0, 1.0)] {
        let m = models::twisted(a, b).unwrap();
        let fv = first_variation(&SimConfig::new(&m, 1.0, 0.01, 500, 2)).unwrap();
        assert!(fv.holds, "{a},{b}: {:?} > {}", fv.mean_norm, fv.bound);
        assert!((fv.c1 - 3f64.sqrt()).abs() < 1e-15);
    }
}

#[test]
fn gradient_bound_at_time_zero_is_an_equality() {
    let m = models::builtin("shear", &[]).unwrap();
    let f = poly(3, &[(1.0, &[1, 1, 0]), (0.5, &[0, 0, 2]), (-1.0, &[1, 0, 0])]);
    let x = Point(vec![0.3, -0.2, 0.1]);
    let g = check_gradient_bound(&SimConfig::new(&m, 0.0, 0.01, 4, 0).with_start(x), &f, 0.5, 2.0).unwrap();
    assert!((g.lhs - g.rhs).abs() < 1e-6 * (1.0 + g.rhs.abs()), "{g:?}");
    assert!(g.holds);
}

#[test]
fn gradient_bound_on_heisenberg() {
    let m = models::heisenberg(1).unwrap();
    let f = poly(3, &[(1.0, &[1, 1, 0]), (1.0, &[0, 0, 1]), (0.3, &[2, 0, 0])]);
    let g = check_gradient_bound(&SimConfig::new(&m, 0.3, 0.01, 4000, 5), &f, 0.0, 1.0).unwrap();
    assert!(g.holds, "{g:?}");
}

#[test]
fn killing_form_detects_compactness() {
    assert!(is_compact(&models::twisted(-1.0, 1.0).unwrap()).unwrap());
    assert!(!is_compact(&models::twisted(1.0, 1.0).unwrap()).unwrap());
    assert!(!is_compact(&models::twisted(0.0, 1.0).unwrap()).unwrap());
    assert!(!is_compact(&models::twisted(0.0, 0.0).unwrap()).unwrap());
    assert!(!is_compact(&models::heisenberg(1).unwrap()).unwrap());
    let m = models::twisted(-1.0, 1.0).unwrap();
    let k = killing_form(&structure_functions(&m, &m.base_point()).unwrap());
    assert!((k.clone() - DMatrix::identity(3, 3) * -2.0).amax() < 1e-12, "{k}");
}

fn y00(m: &ContactModel) -> ScalarField {
    let mut p = vec![0u32; m.ambient_dim()];
    p[0] = 1;
    ScalarField::Polynomial(Polynomial::new(m.ambient_dim(), vec![Monomial::new(1.0, p)]).unwrap())
}

#[test]
fn variance_decay_preconditions() {
    let h = models::heisenberg(1).unwrap();
    let f = poly(3, &[(1.0, &[1, 0, 0])]);
    let r = variance_decay_rate(&h, &f, &[0.0, 0.5], 0.01, 40, 2, 1.0, 0);
    assert!(matches!(r, Err(SimError::NonCompact(_))));
    let m = models::twisted(-1.0, 1.0).unwrap();
    assert!(matches!(variance_decay_rate(&m, &y00(&m), &[0.0, 0.5], 0.01, 40, 3, 1.0, 0), Err(SimError::Config(_))));
    assert!(matches!(variance_decay_rate(&m, &y00(&m), &[0.0, 0.5], 0.01, 39, 2, 1.0, 0), Err(SimError::Config(_))));
    assert!(matches!(variance_decay_rate(&m, &y00(&m), &[0.5, 0.5], 0.01, 40, 2, 1.0, 0), Err(SimError::Config(_))));
}

#[test]
fn constant_function_has_degenerate_variance() {
    let m = models::twisted(-1.0, 1.0).unwrap();
    let one = ScalarField::Polynomial(Polynomial::constant(9, 2.5));
    let v = variance_decay_rate(&m, &one, &[0.0, 0.25, 0.5], 0.01, 40, 4, 1.0, 0).unwrap();
    assert!(v.degenerate);
    assert_eq!(v.rate, None);
    assert_eq!(v.ci_half_width, None);
}

#[test]
fn variance_rate_and_confidence_width() {
    // Y_00 lies in the first nonzero eigenspace, eigenvalue 1, so Var P_t f ∝ e^{-2t}
    let m = models::twisted(-1.0, 1.0).unwrap();
    let f = y00(&m);
    let times = [0.0, 0.25, 0.5, 0.75];
    let small = variance_decay_rate(&m, &f, &times, 0.01, 400, 20, 5.0, 7).unwrap();
    let large = variance_decay_rate(&m, &f, &times, 0.01, 1600, 20, 5.0, 8).unwrap();
    let (rs, cs) = (small.rate.unwrap(), small.ci_half_width.unwrap());
    let (rl, cl) = (large.rate.unwrap(), large.ci_half_width.unwrap());
    assert!((rs - 2.0).abs() <= 1.5 * cs, "{rs} ± {cs}");
    assert!((rl - 2.0).abs() <= 1.5 * cl, "{rl} ± {cl}");
    let ratio = cl / cs;
    assert!((ratio - 0.5).abs() <= 0.15, "ci ratio {ratio}");
    // burn-in diagnostic: the stationary mean of Y_00 is 0
    assert!(large.stationary_mean.mean.abs() <= 4.0 * large.stationary_mean.stderr);
}
