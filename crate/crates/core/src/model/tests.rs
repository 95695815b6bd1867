use super::*;
use crate::error::Error;
use serde_json::json;

fn gaussian(theta_bar: &[f64]) -> ModelSpec {
    model_from_id("gaussian-location", &json!({}), theta_bar).unwrap()
}

fn laplace(theta_bar: &[f64]) -> ModelSpec {
    model_from_id("laplace-location", &json!({}), theta_bar).unwrap()
}

fn dataset(rows: &[&[f64]]) -> Dataset {
    Dataset {
        observations: rows.iter().map(|r| r.to_vec()).collect(),
        seed: 0,
        n: rows.len(),
    }
}

fn dv(v: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(v)
}

#[test]
fn empirical_risk_gaussian_single_centered_point() {
    let m = gaussian(&[0.0]);
    let d = dataset(&[&[0.0]]);
    assert_eq!(empirical_risk(&m, &d, &dv(&[0.0])).unwrap(), 0.0);
}

#[test]
fn empirical_risk_gaussian_symmetric_pair() {
    let m = gaussian(&[0.0]);
    let d = dataset(&[&[1.0], &[-1.0]]);
    assert!((empirical_risk(&m, &d, &dv(&[0.0])).unwrap() - 0.5).abs() < 1e-15);
}

#[test]
fn empirical_risk_laplace_direct_sum() {
    let m = laplace(&[0.0]);
    let d = dataset(&[&[2.0], &[-1.0], &[0.0]]);
    let got = empirical_risk(&m, &d, &dv(&[0.5])).unwrap();
    // Independent scalar evaluation of (|2−0.5| + |−1−0.5| + |0.5|)/3.
    let expect = ((2.0f64 - 0.5).abs() + (-1.0f64 - 0.5).abs() + 0.5f64.abs()) / 3.0;
    assert!((got - expect).abs() < 1e-15);
    assert!((got - 3.5 / 3.0).abs() < 1e-12);
}

#[test]
fn empirical_risk_rejects_domain_violation() {
    let m = model_from_id(
        "gaussian-location",
        &json!({"domain": {"lower": [-1.0], "upper": [1.0]}}),
        &[0.0],
    )
    .unwrap();
    let d = dataset(&[&[0.3]]);
    match empirical_risk(&m, &d, &dv(&[2.0])) {
        Err(Error::Domain(_)) => {}
        other => panic!("expected domain error, got {other:?}"),
    }
}

#[test]
fn subgradient_summary_symmetric_gaussian() {
    let m = gaussian(&[0.0]);
    let d = dataset(&[&[1.0], &[-1.0]]);
    let s = subgradient_summary(&m, &d, &dv(&[0.0])).unwrap();
    assert!(s.y_n[0].abs() < 1e-15);
}

#[test]
fn subgradient_summary_laplace_signs() {
    let m = laplace(&[0.0]);
    let d = dataset(&[&[2.0], &[-1.0]]);
    let s = subgradient_summary(&m, &d, &dv(&[0.0])).unwrap();
    assert!(s.y_n[0].abs() < 1e-15);

    let d = dataset(&[&[2.0], &[1.0], &[-1.0]]);
    let s = subgradient_summary(&m, &d, &dv(&[0.0])).unwrap();
    // (−1 − 1 + 1)/√3
    assert!((s.y_n[0] - (-1.0 / 3.0f64.sqrt())).abs() < 1e-15);
    assert!((s.y_n[0] + 0.5773502691896258).abs() < 1e-12);
    // Yₙ recomputable from u_list exactly.
    let resum: f64 = s.u_list.iter().map(|u| u[0]).sum::<f64>() / 3.0f64.sqrt();
    assert_eq!(resum, s.y_n[0]);
}

#[test]
fn assumption_check_gaussian_and_laplace() {
    let m = gaussian(&[0.0]);
    let r = assumption_check(&m, &dv(&[0.0]), 20_000, 7).unwrap();
    assert!((r.min_hessian_eigenvalue - 1.0).abs() < 1e-12);
    assert!(r.second_moment_ci.0 < 1.0 && 1.0 < r.second_moment_ci.1);
    assert!(r.ok());

    let m = laplace(&[0.0]);
    let r = assumption_check(&m, &dv(&[0.0]), 1000, 7).unwrap();
    // |sign| = 1 almost surely, so the estimate is exactly 1.
    assert_eq!(r.second_moment_estimate, 1.0);
    assert!(r.ok());
}

#[test]
fn assumption_check_logistic_monte_carlo_oracle() {
    let m = model_from_id("logistic-regression", &json!({}), &[1.0, 0.0]).unwrap();
    let theta_star = dv(&[1.0, 0.0]);
    let r = assumption_check(&m, &theta_star, 100_000, 11).unwrap();
    assert!(r.hessian_pd, "Fisher matrix must be PD");
    assert!(r.ok(), "report: {r:?}");

    // Independent Monte-Carlo oracle for E‖U‖² with 10⁶ draws. At θ* = θ̄
    // the subgradient is x(σ(xᵀθ̄) − y).
    let probe = m.sample(1_000_000, 99);
    let mut s = 0.0;
    for obs in &probe.observations {
        s += m.loss_subgradient(obs, &theta_star).norm_squared();
    }
    let oracle = s / 1e6;
    assert!(
        (r.second_moment_estimate - oracle).abs() < 5.0 * oracle / (100f64).sqrt(),
        "estimate {} vs oracle {oracle}",
        r.second_moment_estimate
    );
}

#[test]
fn builtin_gaussian_population_closed_form() {
    let m = gaussian(&[0.5, -0.5]);
    let theta = dv(&[1.0, 1.0]);
    // Φ(θ) = ½‖θ−θ̄‖² + d/2 for unit sigma.
    let expect = 0.5 * ((1.0f64 - 0.5).powi(2) + (1.0f64 + 0.5).powi(2)) + 1.0;
    assert!((m.pop_risk(&theta).unwrap() - expect).abs() < 1e-14);
}

#[test]
fn builtin_laplace_unit_fisher() {
    let m = laplace(&[0.0]);
    let h = m.pop_hess(&dv(&[0.0])).unwrap();
    assert!((h[(0, 0)] - 1.0).abs() < 1e-14);
}

#[test]
fn builtin_unknown_id_is_catalog_error() {
    match model_from_id("no-such-model", &json!({}), &[0.0]) {
        Err(Error::Config(msg)) => assert!(msg.contains("unknown model id")),
        other => panic!("expected config error, got {other:?}"),
    }
}

#[test]
fn dataset_regeneration_is_bit_identical() {
    for id in builtin_model_ids() {
        let theta_bar: &[f64] = if *id == "exponential-rate" {
            &[0.3]
        } else {
            &[0.3, -0.2]
        };
        let m = model_from_id(id, &json!({}), theta_bar).unwrap();
        let a = m.sample(257, 42);
        let b = m.sample(257, 42);
        assert_eq!(a.observations.len(), 257);
        for (ra, rb) in a.observations.iter().zip(&b.observations) {
            for (va, vb) in ra.iter().zip(rb) {
                assert_eq!(va.to_bits(), vb.to_bits());
            }
        }
        let c = m.sample(257, 43);
        assert!(a
            .observations
            .iter()
            .zip(&c.observations)
            .any(|(ra, rc)| ra != rc));
    }
}

/// Convexity and subgradient-validity probes for every bundled model:
/// 1000 random (x, θ, θ') triples each.
#[test]
fn loss_convexity_and_subgradient_validity() {
    use rand::Rng;
    let mut rng = ChaCha12Rng::seed_from_u64(1234);
    for id in builtin_model_ids() {
        let theta_bar: &[f64] = if *id == "exponential-rate" {
            &[0.2]
        } else {
            &[0.5, -0.3]
        };
        let m = model_from_id(id, &json!({}), theta_bar).unwrap();
        let d = m.dim();
        let data = m.sample(1000, 5);
        for trial in 0..1000 {
            let obs = &data.observations[trial % data.n];
            let ta = DVector::from_fn(d, |_, _| rng.random_range(-2.0..2.0));
            let tb = DVector::from_fn(d, |_, _| rng.random_range(-2.0..2.0));
            let lam: f64 = rng.random_range(0.01..0.99);
            let mid = &ta * lam + &tb * (1.0 - lam);
            let lhs = m.loss(obs, &mid);
            let rhs = lam * m.loss(obs, &ta) + (1.0 - lam) * m.loss(obs, &tb);
            assert!(lhs <= rhs + 1e-9, "{id}: convexity violated");

            let g = m.loss_subgradient(obs, &ta);
            let gap = m.loss(obs, &tb) - m.loss(obs, &ta) - g.dot(&(&tb - &ta));
            assert!(gap >= -1e-9, "{id}: invalid subgradient, gap {gap}");
        }
    }
}

/// E[U₁] ≈ ∇Φ(θ*) over 10⁵ draws, componentwise within 4 standard errors.
#[test]
fn subgradient_mean_matches_population_gradient() {
    for id in builtin_model_ids() {
        let theta_bar: &[f64] = if *id == "exponential-rate" {
            &[0.1]
        } else {
            &[0.4, -0.1]
        };
        let m = model_from_id(id, &json!({}), theta_bar).unwrap();
        let d = m.dim();
        let theta_star = DVector::from_fn(d, |k, _| theta_bar[k] + 0.2 * (k as f64 + 1.0));
        let n = 100_000usize;
        let data = m.sample(n, 3);
        let mut mean: DVector<f64> = DVector::zeros(d);
        let mut mean_sq: DVector<f64> = DVector::zeros(d);
        for obs in &data.observations {
            let u = m.loss_subgradient(obs, &theta_star);
            for k in 0..d {
                mean[k] += u[k];
                mean_sq[k] += u[k] * u[k];
            }
        }
        mean /= n as f64;
        let grad = m.pop_grad(&theta_star).unwrap();
        for k in 0..d {
            let var = (mean_sq[k] / n as f64 - mean[k] * mean[k]).max(1e-12);
            let dev = (mean[k] - grad[k]).abs();
            assert!(
                dev < 4.0 * (var / n as f64).sqrt(),
                "{id}: component {k}: mean {} vs grad {}",
                mean[k],
                grad[k]
            );
        }
    }
}

/// Population gradients match central finite differences of the risk to
/// relative tolerance 1e−5 at sampled points.
#[test]
fn population_gradient_matches_finite_differences() {
    use rand::Rng;
    let mut rng = ChaCha12Rng::seed_from_u64(8);
    for id in builtin_model_ids() {
        let theta_bar: &[f64] = if *id == "exponential-rate" {
            &[0.25]
        } else {
            &[0.5, -0.25]
        };
        let m = model_from_id(id, &json!({}), theta_bar).unwrap();
        let d = m.dim();
        for _ in 0..10 {
            let mut theta = DVector::from_fn(d, |_, _| rng.random_range(-1.5..1.5));
            if *id == "laplace-location" {
                // ∇²Φ jumps at θ̄; keep FD stencils off the kink.
                for k in 0..d {
                    if (theta[k] - theta_bar[k]).abs() < 0.05 {
                        theta[k] += 0.1;
                    }
                }
            }
            let g = m.pop_grad(&theta).unwrap();
            let fd = fd_gradient(|x| m.pop_risk(x).unwrap(), &theta, 1e-6);
            let rel = (&fd - &g).norm() / (1.0 + g.norm());
            assert!(rel < 1e-5, "{id}: fd mismatch {rel} at {theta:?}");
        }
    }
}

/// The compiled empirical risk is the same function as the direct average.
#[test]
fn compiled_empirical_risk_matches_direct_average() {
    use rand::Rng;
    let mut rng = ChaCha12Rng::seed_from_u64(77);
    for id in builtin_model_ids() {
        let theta_bar: &[f64] = if *id == "exponential-rate" {
            &[0.0]
        } else {
            &[0.2, 0.6]
        };
        let m = model_from_id(id, &json!({}), theta_bar).unwrap();
        let data = m.sample(203, 13);
        let emp = EmpiricalRisk::compile(&m, &data);
        for _ in 0..200 {
            let theta = DVector::from_fn(m.dim(), |_, _| rng.random_range(-2.0..2.0));
            let direct = empirical_risk(&m, &data, &theta).unwrap();
            assert!(
                (emp.value(&theta) - direct).abs() < 1e-12 * (1.0 + direct.abs()),
                "{id}: fast path diverges from direct sum"
            );
            let base = DVector::from_fn(m.dim(), |_, _| rng.random_range(-1.0..1.0));
            let delta = emp.delta(&base, &theta);
            let direct_delta = emp.value(&(&base + &theta)) - emp.value(&base);
            assert!((delta - direct_delta).abs() < 1e-10);
        }
    }
}

/// Subgradients of the compiled risk are valid subgradients of its value.
#[test]
fn compiled_subgradient_validity() {
    use rand::Rng;
    let mut rng = ChaCha12Rng::seed_from_u64(99);
    let m = laplace(&[0.0, 0.0]);
    let data = m.sample(59, 4);
    let emp = EmpiricalRisk::compile(&m, &data);
    for _ in 0..500 {
        let a = DVector::from_fn(2, |_, _| rng.random_range(-2.0..2.0));
        let b = DVector::from_fn(2, |_, _| rng.random_range(-2.0..2.0));
        let g = emp.subgradient(&a);
        assert!(emp.value(&b) - emp.value(&a) - g.dot(&(&b - &a)) >= -1e-10);
    }
}

#[test]
fn theta_bar_outside_domain_rejected() {
    let r = model_from_id(
        "gaussian-location",
        &json!({"domain": {"lower": [0.0], "upper": [null]}}),
        &[-1.0],
    );
    assert!(matches!(r, Err(Error::Config(_))));
}
