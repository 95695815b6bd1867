//! One-dimensional quadrature rules and log-domain accumulation helpers.

use nalgebra::DMatrix;
use std::sync::OnceLock;

/// Gauss–Hermite rule for ∫ f(z) e^{−z²/2}/√(2π) dz ≈ Σ wᵢ f(zᵢ)
/// (probabilists' convention: weights sum to 1).
///
/// Nodes/weights come from the eigendecomposition of the symmetric
/// tridiagonal Jacobi matrix (Golub–Welsch).
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut jac = DMatrix::zeros(n, n);
    for i in 1..n {
        let b = (i as f64).sqrt();
        jac[(i - 1, i)] = b;
        jac[(i, i - 1)] = b;
    }
    let eig = jac.symmetric_eigen();
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let node = eig.eigenvalues[i];
            let w = eig.eigenvectors[(0, i)].powi(2);
            (node, w)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.into_iter().unzip()
}

/// Cached 80-node rule used for population quantities of models without
/// closed forms.
pub fn gauss_hermite_80() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_hermite(80))
}

/// E[f(σ Z)] for Z standard normal via the cached Gauss-Hermite rule.
pub fn gaussian_expectation<F: Fn(f64) -> f64>(sigma: f64, f: F) -> f64 {
    let (nodes, weights) = gauss_hermite_80();
    nodes
        .iter()
        .zip(weights)
        .map(|(&z, &w)| w * f(sigma * z))
        .sum()
}

/// Complementary error function, rational Chebyshev approximation
/// (fractional error below 1.2e−7 — far inside the quadrature contracts
/// it feeds).
pub fn erfc(x: f64) -> f64 {
    let z = x.abs();
    let t = 1.0 / (1.0 + 0.5 * z);
    let ans = t
        * (-z * z - 1.26551223
            + t * (1.00002368
                + t * (0.37409196
                    + t * (0.09678418
                        + t * (-0.18628806
                            + t * (0.27886807
                                + t * (-1.13520398
                                    + t * (1.48851587
                                        + t * (-0.82215223 + t * 0.17087277)))))))))
        .exp();
    if x >= 0.0 {
        ans
    } else {
        2.0 - ans
    }
}

/// ∫ e^{−(a x² + b x + c)} dx over `[lo, hi]` (either bound may be
/// infinite), returned as a log; `a > 0`.
pub fn log_gaussian_segment(a: f64, b: f64, c: f64, lo: f64, hi: f64) -> f64 {
    if hi <= lo {
        return f64::NEG_INFINITY;
    }
    // Complete the square: a(x + b/2a)² + c − b²/4a.
    let shift = b / (2.0 * a);
    let sa = a.sqrt();
    let (zl, zh) = (sa * (lo + shift), sa * (hi + shift));
    // ∫ e^{−z²} dz / √a over [zl, zh], via erfc differences on the stable
    // side.
    let half_diff = if zl >= 0.0 {
        0.5 * (erfc(zl) - erfc(zh))
    } else if zh <= 0.0 {
        0.5 * (erfc(-zh) - erfc(-zl))
    } else {
        1.0 - 0.5 * (erfc(-zl) + erfc(zh))
    };
    if half_diff <= 0.0 {
        return f64::NEG_INFINITY;
    }
    (std::f64::consts::PI.sqrt() / sa * half_diff).ln() + b * b / (4.0 * a) - c
}

/// Advance a mixed-radix counter over `radix` positions. Returns `false`
/// once the counter wraps back to all zeros (iteration complete).
pub fn advance_odometer(idx: &mut [usize], radix: &[usize]) -> bool {
    for (i, r) in idx.iter_mut().zip(radix) {
        *i += 1;
        if *i < *r {
            return true;
        }
        *i = 0;
    }
    false
}

/// log Σ exp(xᵢ) with the usual max shift; −∞ entries are skipped.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let m = values
        .iter()
        .cloned()
        .filter(|v| v.is_finite())
        .fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return f64::NEG_INFINITY;
    }
    let s: f64 = values
        .iter()
        .filter(|v| v.is_finite())
        .map(|&v| (v - m).exp())
        .sum();
    m + s.ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hermite_integrates_moments() {
        let (nodes, weights) = gauss_hermite(40);
        let m0: f64 = weights.iter().sum();
        let m2: f64 = nodes.iter().zip(&weights).map(|(z, w)| w * z * z).sum();
        let m4: f64 = nodes.iter().zip(&weights).map(|(z, w)| w * z.powi(4)).sum();
        assert!((m0 - 1.0).abs() < 1e-13);
        assert!((m2 - 1.0).abs() < 1e-12);
        assert!((m4 - 3.0).abs() < 1e-11);
    }

    #[test]
    fn gaussian_expectation_of_exponential() {
        // E[e^{σZ}] = e^{σ²/2}
        let got = gaussian_expectation(0.7, f64::exp);
        assert!((got - (0.49f64 / 2.0).exp()).abs() < 1e-10);
    }

    #[test]
    fn erfc_reference_values() {
        // erfc(0) = 1, erfc(1) ≈ 0.15729920705028513.
        assert!((erfc(0.0) - 1.0).abs() < 1e-7);
        assert!((erfc(1.0) - 0.157299207050285) < 1e-7);
        assert!((erfc(-1.0) - (2.0 - 0.157299207050285)).abs() < 1e-7);
        assert!(erfc(10.0) < 1e-40);
    }

    /// Fractional error against an independent implementation stays inside
    /// the documented 1.2e−7 bound.
    #[test]
    fn erfc_matches_external_oracle() {
        for i in 0..4000 {
            let x = -6.0 + 12.0 * i as f64 / 3999.0;
            let reference = statrs::function::erf::erfc(x);
            let got = erfc(x);
            let denom = reference.abs().max(1e-300);
            assert!(
                ((got - reference) / denom).abs() < 1.2e-7,
                "erfc({x}): {got} vs {reference}"
            );
        }
    }

    #[test]
    fn gaussian_segment_full_line() {
        // ∫ e^{−x²/2} = √(2π)
        let got = log_gaussian_segment(0.5, 0.0, 0.0, f64::NEG_INFINITY, f64::INFINITY);
        assert!((got - 0.5 * (2.0 * std::f64::consts::PI).ln()).abs() < 1e-7);
        // Half line is half the mass.
        let half = log_gaussian_segment(0.5, 0.0, 0.0, 0.0, f64::INFINITY);
        assert!((half - (got - std::f64::consts::LN_2)).abs() < 1e-7);
        // Shifted segment against the plain one.
        let a = log_gaussian_segment(1.0, 2.0, 0.3, -1.0, 0.5);
        let mut acc = 0.0;
        let m = 200_000;
        let h = 1.5 / m as f64;
        for i in 0..m {
            let x = -1.0 + (i as f64 + 0.5) * h;
            acc += (-(x * x) - 2.0 * x - 0.3f64).exp() * h;
        }
        assert!((a - acc.ln()).abs() < 1e-6);
    }

    #[test]
    fn log_sum_exp_basic() {
        let v = [0.0f64.ln(), 1.0f64.ln(), 2.0f64.ln(), f64::NEG_INFINITY];
        assert!((log_sum_exp(&v) - 3.0f64.ln()).abs() < 1e-12);
        assert_eq!(log_sum_exp(&[f64::NEG_INFINITY]), f64::NEG_INFINITY);
    }
}
