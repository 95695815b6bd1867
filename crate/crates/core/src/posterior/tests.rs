use super::*;
use crate::geometry::ConeFrame;
use crate::model::model_from_id;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde_json::json;

fn dv(v: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(v)
}

fn gaussian(theta_bar: &[f64]) -> ModelSpec {
    model_from_id("gaussian-location", &json!({}), theta_bar).unwrap()
}

fn laplace(theta_bar: &[f64]) -> ModelSpec {
    model_from_id("laplace-location", &json!({}), theta_bar).unwrap()
}

fn halfspace2() -> ConstraintSet {
    ConstraintSet::from_id_params(
        "halfspace",
        &json!({"normal": [1.0, 0.0], "offset": 0.0}),
        2,
    )
    .unwrap()
}

fn ball2() -> ConstraintSet {
    ConstraintSet::from_id_params("ball", &json!({"center": [0.0, 0.0], "radius": 1.0}), 2)
        .unwrap()
}

fn dataset(rows: &[&[f64]]) -> Dataset {
    Dataset {
        observations: rows.iter().map(|r| r.to_vec()).collect(),
        seed: 0,
        n: rows.len(),
    }
}

fn frame_for(model: &ModelSpec, cs: &ConstraintSet, theta_star: &DVector<f64>) -> ConeFrame {
    ConeFrame::build(
        cs,
        theta_star,
        model.pop_grad(theta_star).unwrap(),
        model.pop_hess(theta_star).unwrap(),
    )
    .unwrap()
}

#[test]
fn theta_star_ball_projection() {
    let model = gaussian(&[2.0, 0.0]);
    let cs = ball2();
    let ts = solve_theta_star(&model, &cs).unwrap();
    assert!((ts - dv(&[1.0, 0.0])).norm() < 1e-8);
}

#[test]
fn theta_star_interior_is_truth() {
    let model = gaussian(&[0.3, -0.4]);
    let cs = ConstraintSet::unconstrained(2);
    let ts = solve_theta_star(&model, &cs).unwrap();
    assert!((ts - dv(&[0.3, -0.4])).norm() < 1e-9);

    let model = laplace(&[0.7]);
    let cs = ConstraintSet::unconstrained(1);
    let ts = solve_theta_star(&model, &cs).unwrap();
    assert!((ts - dv(&[0.7])).norm() < 1e-7);
}

#[test]
fn classify_regime_examples() {
    let model = gaussian(&[-0.5, 0.2]);
    let cs = halfspace2();
    let ts = solve_theta_star(&model, &cs).unwrap();
    let label = classify_regime(&model, &cs, &ts).unwrap();
    assert_eq!(label.regime, Regime::WellSpecified);
    assert!(label.interior);

    let model = gaussian(&[0.0, 0.0]);
    let ts = solve_theta_star(&model, &cs).unwrap();
    let label = classify_regime(&model, &cs, &ts).unwrap();
    assert_eq!(label.regime, Regime::NearlyMisspecified);
    assert!(!label.interior);
    assert!(label.grad_norm < 1e-8);

    let model = gaussian(&[2.0, 0.0]);
    let cs = ball2();
    let ts = solve_theta_star(&model, &cs).unwrap();
    let label = classify_regime(&model, &cs, &ts).unwrap();
    assert_eq!(label.regime, Regime::Misspecified);
    let u = model.pop_grad(&ts).unwrap();
    assert!((u - dv(&[-1.0, 0.0])).norm() < 1e-7);
}

#[test]
fn map_estimate_sample_mean() {
    let model = gaussian(&[0.0, 0.0]);
    let cs = ConstraintSet::unconstrained(2);
    let data = dataset(&[&[1.0, 2.0], &[0.0, 1.0], &[-0.5, 0.0]]);
    let hat = map_estimate(&model, &cs, &data).unwrap();
    let mean = dv(&[0.5 / 3.0, 1.0]);
    assert!((hat - mean).norm() < 1e-8);
}

#[test]
fn map_estimate_halfspace_clamp() {
    let model = gaussian(&[0.0, 0.0]);
    let cs = halfspace2();
    // Sample mean (0.3, 0.7) → constrained optimum (0, 0.7).
    let data = dataset(&[&[0.6, 1.4], &[0.0, 0.0]]);
    let hat = map_estimate(&model, &cs, &data).unwrap();
    assert!((&hat - dv(&[0.0, 0.7])).norm() < 1e-7, "hat = {hat:?}");
}

#[test]
fn map_estimate_laplace_median() {
    let model = laplace(&[0.0]);
    let cs = ConstraintSet::unconstrained(1);
    let data = dataset(&[&[2.0], &[1.0], &[-1.0]]);
    let hat = map_estimate(&model, &cs, &data).unwrap();
    assert!((hat[0] - 1.0).abs() < 1e-7, "hat = {}", hat[0]);
    // Objective value matches the median objective to 1e−9 relative.
    let emp = EmpiricalRisk::compile(&model, &data);
    let f_opt = emp.value(&dv(&[1.0]));
    assert!((emp.value(&hat) - f_opt).abs() <= 1e-9 * (1.0 + f_opt.abs()));
}

#[test]
fn g_n_gaussian_is_exact_quadratic() {
    let model = gaussian(&[0.4, -0.2]);
    let cs = ConstraintSet::unconstrained(2);
    let data = model.sample(50, 3);
    let ts = solve_theta_star(&model, &cs).unwrap();
    let frame = frame_for(&model, &cs, &ts);
    let post = RescaledPosterior::build(&model, &cs, &frame, Regime::WellSpecified, &data).unwrap();
    let mut rng = ChaCha12Rng::seed_from_u64(4);
    for _ in 0..100 {
        let t = dv(&[rng.random_range(-3.0f64..3.0), rng.random_range(-3.0f64..3.0)]);
        let g = post.g_n(&t).unwrap();
        assert!(
            (g - 0.5 * t.norm_squared()).abs() < 1e-12,
            "Gₙ(t) − ‖t‖²/2 = {:.3e}",
            g - 0.5 * t.norm_squared()
        );
    }
    assert_eq!(post.g_n(&dv(&[0.0, 0.0])).unwrap(), 0.0);
}

#[test]
fn g_n_laplace_cross_checked_against_direct_formula() {
    let model = laplace(&[0.0]);
    let cs = ConstraintSet::unconstrained(1);
    let data = dataset(&[&[1.0], &[-1.0]]);
    let ts = dv(&[0.0]);
    let frame = frame_for(&model, &cs, &ts);
    let post = RescaledPosterior::build(&model, &cs, &frame, Regime::WellSpecified, &data).unwrap();
    let t = dv(&[0.1]);
    let got = post.g_n(&t).unwrap();
    // Independent scalar re-evaluation through the raw observation list.
    let n = 2.0f64;
    let phi = |theta: f64| ((1.0f64 - theta).abs() + (-1.0f64 - theta).abs()) / 2.0;
    let y_n = ((-1.0f64) + 1.0) / n.sqrt();
    let direct = n * (phi(0.1 / n.sqrt()) - phi(0.0)) - 0.1 * y_n;
    assert!((got - direct).abs() < 1e-12, "got {got}, direct {direct}");
    // Kink at t/√n = ±1 makes the value nonzero for larger t.
    let t = dv(&[2.0]);
    let got = post.g_n(&t).unwrap();
    let direct = n * (phi(2.0 / n.sqrt()) - phi(0.0));
    assert!((got - direct).abs() < 1e-12);
}

#[test]
fn g_n_misspec_gaussian_expansion() {
    let model = gaussian(&[2.0, 0.0]);
    let cs = ball2();
    let ts = solve_theta_star(&model, &cs).unwrap();
    let frame = frame_for(&model, &cs, &ts);
    let data = model.sample(400, 9);
    let post = RescaledPosterior::build(&model, &cs, &frame, Regime::Misspecified, &data).unwrap();
    assert_eq!(
        post.g_n_misspec(&dv(&[0.0, 0.0]), &dv(&[0.0, 0.0])).unwrap(),
        0.0
    );
    // Exact quadratic expansion: Gₙ(t,s) = t·Yₙ + ‖t‖²/2 + s·∇Φₙ(θ*)
    // + t·s/√n + ‖s‖²/(2n), with ∇Φₙ(θ*) = θ* − x̄.
    let nf = 400.0f64;
    let grad_emp = post.empirical().subgradient(&frame.theta_star);
    let u_face = frame.face.as_ref().unwrap();
    let t = &u_face.l_basis * dv(&[0.7]);
    let s = &u_face.lperp_basis * dv(&[-1.3]);
    let got = post.g_n_misspec(&t, &s).unwrap();
    let expect = t.dot(post.y_n()) + 0.5 * t.norm_squared() + s.dot(&grad_emp)
        + t.dot(&s) / nf.sqrt()
        + s.norm_squared() / (2.0 * nf);
    assert!((got - expect).abs() < 1e-10, "got {got}, expect {expect}");
}

#[test]
fn rescaled_density_gaussian_complete_square() {
    let model = gaussian(&[0.1, 0.1]);
    let cs = ConstraintSet::unconstrained(2);
    let data = model.sample(64, 21);
    let ts = solve_theta_star(&model, &cs).unwrap();
    let frame = frame_for(&model, &cs, &ts);
    let post = RescaledPosterior::build(&model, &cs, &frame, Regime::WellSpecified, &data).unwrap();
    let y = post.y_n().clone();
    // log qₙ(t) − log qₙ(t') = −½(‖t+Y‖² − ‖t'+Y‖²) exactly.
    let mut rng = ChaCha12Rng::seed_from_u64(2);
    for _ in 0..50 {
        let a = dv(&[rng.random_range(-2.0f64..2.0), rng.random_range(-2.0f64..2.0)]);
        let b = dv(&[rng.random_range(-2.0f64..2.0), rng.random_range(-2.0f64..2.0)]);
        let lhs = post.log_density_t(&a) - post.log_density_t(&b);
        let rhs = -0.5 * ((&a + &y).norm_squared() - (&b + &y).norm_squared());
        assert!((lhs - rhs).abs() < 1e-10);
    }
    // Mode at −Yₙ for Θ = R^d.
    let g0 = post.log_density_t(&(-&y));
    for _ in 0..50 {
        let p = dv(&[rng.random_range(-3.0f64..3.0), rng.random_range(-3.0f64..3.0)]);
        assert!(post.log_density_t(&p) <= g0 + 1e-12);
    }
}

#[test]
fn rescaled_density_outside_support_is_neg_infinity() {
    let model = gaussian(&[0.0, 0.0]);
    let cs = halfspace2();
    let data = model.sample(16, 1);
    let ts = solve_theta_star(&model, &cs).unwrap();
    let frame = frame_for(&model, &cs, &ts);
    let post =
        RescaledPosterior::build(&model, &cs, &frame, Regime::NearlyMisspecified, &data).unwrap();
    assert_eq!(post.log_density_t(&dv(&[1.0, 0.0])), f64::NEG_INFINITY);
    assert!(post.log_density_t(&dv(&[-1.0, 0.0])).is_finite());
}

/// Mode consistency: the density argmax over Tₙ equals √n(θ̂ₙ − θ*).
#[test]
fn mode_matches_scaled_map() {
    let model = gaussian(&[0.0, 0.0]);
    let cs = halfspace2();
    let data = model.sample(100, 33);
    let ts = solve_theta_star(&model, &cs).unwrap();
    let frame = frame_for(&model, &cs, &ts);
    let post =
        RescaledPosterior::build(&model, &cs, &frame, Regime::NearlyMisspecified, &data).unwrap();
    let hat = map_estimate(&model, &cs, &data).unwrap();
    let expected = (&hat - &ts) * (100f64).sqrt();

    let tn = cs.rescaled(&ts, 10.0);
    let nf = 100.0;
    let emp = post.empirical().clone();
    let t_mode = projected_gradient(
        |t| Ok(nf * emp.delta(&ts, &(t / 10.0))),
        |t| Ok(emp.subgradient(&(&ts + t / 10.0)) * 10.0),
        &tn,
        &DVector::zeros(2),
        2000,
        1e-12,
    )
    .unwrap();
    assert!(
        (&t_mode - &expected).norm() < 1e-6,
        "density mode {t_mode:?} vs scaled MAP {expected:?}"
    );
}

/// Log-concavity along random support segments.
#[test]
fn rescaled_density_log_concave_segments() {
    let model = laplace(&[0.0]);
    let cs = ConstraintSet::unconstrained(1);
    let data = model.sample(31, 6);
    let ts = solve_theta_star(&model, &cs).unwrap();
    let frame = frame_for(&model, &cs, &ts);
    let post = RescaledPosterior::build(&model, &cs, &frame, Regime::WellSpecified, &data).unwrap();
    let mut rng = ChaCha12Rng::seed_from_u64(44);
    for _ in 0..1000 {
        let a = dv(&[rng.random_range(-5.0f64..5.0)]);
        let b = dv(&[rng.random_range(-5.0f64..5.0)]);
        let m = (&a + &b) * 0.5;
        let lm = post.log_density_t(&m);
        let avg = 0.5 * (post.log_density_t(&a) + post.log_density_t(&b));
        assert!(lm >= avg - 1e-9);
    }
}

#[test]
fn decompose_examples() {
    // Half-space, S = I: L = span{e₂}.
    let model = gaussian(&[1.0, 0.0]);
    let cs = halfspace2();
    let ts = solve_theta_star(&model, &cs).unwrap();
    let frame = frame_for(&model, &cs, &ts);
    let theta = &ts + dv(&[0.03, 0.5]);
    let (t, s) = decompose(&frame, &theta, 100).unwrap();
    assert!((t - dv(&[0.0, 5.0])).norm() < 1e-10);
    assert!((s - dv(&[3.0, 0.0])).norm() < 1e-10);

    let (t, s) = decompose(&frame, &ts, 100).unwrap();
    assert!(t.norm() < 1e-12 && s.norm() < 1e-12);

    // Anisotropic S: recomposition must be exact.
    let model = model_from_id(
        "gaussian-location",
        &json!({"sigma": [1.0, 0.5]}),
        &[1.0, 0.0],
    )
    .unwrap();
    let ts = solve_theta_star(&model, &cs).unwrap();
    let frame = frame_for(&model, &cs, &ts);
    let theta = &ts + dv(&[-0.02, 0.4]);
    let (t, s) = decompose(&frame, &theta, 64).unwrap();
    let recomposed = &ts + &t / 8.0 + &s / 64.0;
    assert!((recomposed - &theta).norm() < 1e-12);
    // t ∈ L and s ∈ L^{⊥_S} with S-orthogonality.
    let fisher = model.pop_hess(&ts).unwrap();
    assert!(t.dot(&(&fisher * &s)).abs() < 1e-10);
}

proptest::proptest! {
    /// Two-rate decomposition round-trips for arbitrary displacements and
    /// anisotropic diagonal metrics, with exact S-orthogonality.
    #[test]
    fn decompose_roundtrip(
        a in -2.0f64..2.0,
        b in -2.0f64..2.0,
        s2 in 0.3f64..3.0,
        n in 1usize..10_000,
    ) {
        let model = model_from_id(
            "gaussian-location",
            &json!({"sigma": [1.0, s2]}),
            &[1.0, 0.0],
        )
        .unwrap();
        let cs = halfspace2();
        let ts = solve_theta_star(&model, &cs).unwrap();
        let frame = frame_for(&model, &cs, &ts);
        let theta = &ts + dv(&[a, b]);
        let (t, s) = decompose(&frame, &theta, n).unwrap();
        let nf = n as f64;
        let recomposed = &ts + &t / nf.sqrt() + &s / nf;
        proptest::prop_assert!((recomposed - &theta).norm() < 1e-12 * (1.0 + theta.norm()));
        // S-orthogonality of the unscaled split components.
        let fisher = model.pop_hess(&ts).unwrap();
        let cross = (&t / nf.sqrt()).dot(&(&fisher * (&s / nf))).abs();
        proptest::prop_assert!(cross < 1e-10 * (1.0 + theta.norm_squared()));
    }
}

#[test]
fn properness_gaussian_margin_matches_quadratic_oracle() {
    let model = gaussian(&[0.0]);
    let cs = ConstraintSet::unconstrained(1);
    let data = model.sample(10, 17);
    let ts = solve_theta_star(&model, &cs).unwrap();
    let cert = properness_certificate(&model, &cs, &ts, &data).unwrap();
    assert!(cert.certified);
    // Quadratic oracle in d = 1: margin(r) = r²/2 − r|∇Φₙ(θ*)| exactly.
    let emp = EmpiricalRisk::compile(&model, &data);
    let slope = emp.subgradient(&ts)[0].abs();
    let r = cert.radius;
    let expect = 0.5 * r * r - r * slope;
    assert!(
        (cert.margin - expect).abs() < 1e-12,
        "margin {} vs oracle {expect}",
        cert.margin
    );
    assert!(cert.log_normalizer_bound.is_finite());
}

#[test]
fn properness_laplace_certificates() {
    let model = laplace(&[0.0]);
    let cs = ConstraintSet::unconstrained(1);
    // Single-point dataset: V-shaped risk still yields a positive margin.
    let data = dataset(&[&[0.7]]);
    let cert = properness_certificate(&model, &cs, &dv(&[0.0]), &data).unwrap();
    assert!(cert.certified, "cert: {cert:?}");
    assert!(cert.margin > 0.0);

    let data = model.sample(100, 5);
    let ts = solve_theta_star(&model, &cs).unwrap();
    let cert = properness_certificate(&model, &cs, &ts, &data).unwrap();
    assert!(cert.certified);
    assert!(cert.log_normalizer_bound.is_finite());
}

#[test]
fn properness_compact_support() {
    // Θ = small ball: every sphere in the ladder leaves Θ, so the bound is
    // the ball volume term alone.
    let model = gaussian(&[0.0, 0.0]);
    let cs = ConstraintSet::from_id_params(
        "ball",
        &json!({"center": [0.0, 0.0], "radius": 0.2}),
        2,
    )
    .unwrap();
    let data = model.sample(20, 2);
    let cert = properness_certificate(&model, &cs, &dv(&[0.0, 0.0]), &data).unwrap();
    assert!(cert.certified && cert.compact);
    assert!(cert.log_normalizer_bound.is_finite());
}

#[test]
fn mle_residuals_shrink_with_n() {
    // Spot check at two sample sizes for the well-specified Gaussian.
    let model = gaussian(&[0.0, 0.0]);
    let cs = ConstraintSet::unconstrained(2);
    let ts = solve_theta_star(&model, &cs).unwrap();
    let frame = frame_for(&model, &cs, &ts);
    let mut med = Vec::new();
    for n in [64usize, 4096] {
        let mut vals = Vec::new();
        for seed in 0..10u64 {
            let data = model.sample(n, 1000 + seed);
            let summary = subgradient_summary(&model, &data, &ts).unwrap();
            let hat = map_estimate(&model, &cs, &data).unwrap();
            let r = mle_residual_wellspec(&frame, &hat, n, &summary.y_n).unwrap();
            // Both reported conventions coincide when S = I.
            assert!((r.literal_version - r.inverse_version).abs() < 1e-12);
            vals.push(r.inverse_version);
        }
        vals.sort_by(f64::total_cmp);
        med.push(vals[vals.len() / 2]);
    }
    // For the Gaussian the identity is exact up to solver error.
    assert!(med[0] < 1e-6 && med[1] < 1e-6, "medians {med:?}");
}

#[test]
fn projection_s_metric_halfspace() {
    let model = gaussian(&[0.0, 0.0]);
    let cs = halfspace2();
    let ts = dv(&[0.0, 0.0]);
    let fisher = model.pop_hess(&ts).unwrap();
    // π_{Tₙ}((1, 1)) onto {t₁ ≤ 0} is (0, 1) in the identity metric.
    let p = project_tangent_s_metric(&cs, &ts, 100, &fisher, &dv(&[1.0, 1.0])).unwrap();
    assert!((p - dv(&[0.0, 1.0])).norm() < 1e-9);
}

#[test]
fn g_n_domain_violation_errors() {
    let model = model_from_id(
        "gaussian-location",
        &json!({"domain": {"lower": [-1.0], "upper": [1.0]}}),
        &[0.0],
    )
    .unwrap();
    let cs = ConstraintSet::unconstrained(1);
    let data = model.sample(4, 8);
    let ts = solve_theta_star(&model, &cs).unwrap();
    let frame = frame_for(&model, &cs, &ts);
    let post = RescaledPosterior::build(&model, &cs, &frame, Regime::WellSpecified, &data).unwrap();
    // t/√n = 50 leaves the open box.
    assert!(matches!(post.g_n(&dv(&[100.0])), Err(Error::Domain(_))));
    assert_eq!(post.log_density_t(&dv(&[100.0])), f64::NEG_INFINITY);
}
