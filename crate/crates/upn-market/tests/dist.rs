use approx::assert_abs_diff_eq;
use statrs::distribution::{Beta, ContinuousCDF};
use upn_market::dist::{adaptive_simpson, TypeDistribution};

#[test]
fn uniform_basics() {
    let f = TypeDistribution::Uniform;
    assert_eq!(f.pdf(0.3), 1.0);
    assert_eq!(f.pdf(-0.1), 0.0);
    assert_eq!(f.pdf(1.1), 0.0);
    assert_eq!(f.cdf(0.25), 0.25);
    assert_eq!(f.cdf(-1.0), 0.0);
    assert_eq!(f.cdf(2.0), 1.0);
    assert_eq!(f.quantile(0.4), 0.4);
    assert_abs_diff_eq!(f.interval_measure(0.2, 0.7), 0.5, epsilon = 1e-15);
    assert_eq!(f.interval_measure(0.7, 0.2), 0.0);
    assert!(f.is_normalized());
}

#[test]
fn uniform_partial_moment_closed_form() {
    let f = TypeDistribution::Uniform;
    // ∫_a^b θ dθ = (b² − a²)/2.
    assert_abs_diff_eq!(f.partial_moment(&[(0.2, 0.9)]), (0.81 - 0.04) / 2.0, epsilon = 1e-15);
    assert_abs_diff_eq!(f.partial_moment(&[(0.0, 1.0)]), 0.5, epsilon = 1e-15);
    // Additivity over disjoint pieces.
    let split = f.partial_moment(&[(0.0, 0.3), (0.3, 1.0)]);
    assert_abs_diff_eq!(split, 0.5, epsilon = 1e-15);
}

#[test]
fn uniform_conditional_mean_is_interval_midpoint() {
    let f = TypeDistribution::Uniform;
    assert_abs_diff_eq!(f.conditional_mean(&[(0.2, 0.6)]), 0.4, epsilon = 1e-12);
    assert_abs_diff_eq!(f.conditional_mean(&[(0.0, 1.0)]), 0.5, epsilon = 1e-12);
    // Empty-class convention: no mass means mean 0.
    assert_eq!(f.conditional_mean(&[]), 0.0);
    assert_eq!(f.conditional_mean(&[(0.4, 0.4)]), 0.0);
}

#[test]
fn beta_constructor_rejects_bad_shapes() {
    assert!(TypeDistribution::beta(2.0, 3.0).is_some());
    assert!(TypeDistribution::beta(0.0, 1.0).is_none());
    assert!(TypeDistribution::beta(1.0, -2.0).is_none());
    assert!(TypeDistribution::beta(f64::NAN, 1.0).is_none());
    assert!(TypeDistribution::beta(f64::INFINITY, 1.0).is_none());
}

#[test]
fn beta_one_one_matches_uniform() {
    let f = TypeDistribution::beta(1.0, 1.0).unwrap();
    for x in [0.0, 0.1, 0.37, 0.5, 0.93, 1.0] {
        assert_abs_diff_eq!(f.cdf(x), x, epsilon = 1e-12);
        assert_abs_diff_eq!(f.quantile(x), x, epsilon = 1e-12);
    }
    assert_abs_diff_eq!(f.partial_moment(&[(0.2, 0.9)]), (0.81 - 0.04) / 2.0, epsilon = 1e-9);
    assert!(f.is_normalized());
}

#[test]
fn beta_two_one_partial_moment_closed_form() {
    // Beta(2, 1) has pdf 2θ, so ∫_a^b θ·2θ dθ = 2(b³ − a³)/3.
    let f = TypeDistribution::beta(2.0, 1.0).unwrap();
    let (a, b) = (0.25f64, 0.8f64);
    let exact = 2.0 * (b.powi(3) - a.powi(3)) / 3.0;
    assert_abs_diff_eq!(f.partial_moment(&[(a, b)]), exact, epsilon = 1e-9);
}

/// Identity oracle: the partial moment of Beta(α, β) equals
/// mean · [F_{α+1,β}(b) − F_{α+1,β}(a)], exercising the quadrature
/// against an independent special-function path.
#[test]
fn beta_partial_moment_matches_shifted_cdf_identity() {
    for (alpha, beta) in [(2.0, 3.0), (0.5, 0.5), (5.0, 1.5), (1.3, 4.2)] {
        let f = TypeDistribution::beta(alpha, beta).unwrap();
        let shifted = Beta::new(alpha + 1.0, beta).unwrap();
        let mean = alpha / (alpha + beta);
        for (a, b) in [(0.0, 1.0), (0.1, 0.4), (0.37, 0.93), (0.0, 0.2), (0.8, 1.0)] {
            let expect = mean * (shifted.cdf(b) - shifted.cdf(a));
            assert_abs_diff_eq!(f.partial_moment(&[(a, b)]), expect, epsilon = 1e-8);
        }
    }
}

#[test]
fn beta_endpoint_singularities_are_integrable() {
    // Shapes below one blow the density up at the endpoints; the
    // measure and moment must still come out finite and correct.
    let f = TypeDistribution::beta(0.5, 0.5).unwrap();
    assert_abs_diff_eq!(f.measure(&[(0.0, 1.0)]), 1.0, epsilon = 1e-9);
    assert_abs_diff_eq!(f.partial_moment(&[(0.0, 1.0)]), 0.5, epsilon = 1e-8);
    assert_abs_diff_eq!(f.conditional_mean(&[(0.0, 1.0)]), 0.5, epsilon = 1e-8);
    assert!(f.is_normalized());
}

#[test]
fn beta_quantile_inverts_cdf() {
    let f = TypeDistribution::beta(2.5, 1.7).unwrap();
    for q in [0.01, 0.2, 0.5, 0.77, 0.99] {
        let x = f.quantile(q);
        assert_abs_diff_eq!(f.cdf(x), q, epsilon = 1e-9);
    }
    assert_eq!(f.quantile(0.0), 0.0);
    assert_eq!(f.quantile(1.0), 1.0);
}

#[test]
fn adaptive_simpson_is_exact_on_cubics_and_tight_on_transcendentals() {
    // Simpson's rule integrates cubics exactly:
    // ∫₀² (3x³ − x + 2) dx = 12 − 2 + 4 = 14.
    let cubic = |x: f64| 3.0 * x.powi(3) - x + 2.0;
    assert_abs_diff_eq!(adaptive_simpson(&cubic, 0.0, 2.0, 1e-12), 14.0, epsilon = 1e-12);
    let expon = |x: f64| x.exp();
    assert_abs_diff_eq!(
        adaptive_simpson(&expon, 0.0, 1.0, 1e-12),
        std::f64::consts::E - 1.0,
        epsilon = 1e-11
    );
    // Degenerate interval integrates to zero.
    assert_eq!(adaptive_simpson(&expon, 0.5, 0.5, 1e-12), 0.0);
}

#[test]
fn conditional_mean_stays_in_unit_interval() {
    let f = TypeDistribution::beta(0.8, 3.0).unwrap();
    for iv in [(0.0, 0.1), (0.45, 0.55), (0.9, 1.0)] {
        let m = f.conditional_mean(&[iv]);
        assert!((0.0..=1.0).contains(&m), "conditional mean {m} out of range");
        assert!(m >= iv.0 - 1e-9 && m <= iv.1 + 1e-9, "mean {m} outside {iv:?}");
    }
}

mod properties {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn measures_are_monotone_and_bounded(
            a in 0.0f64..1.0,
            w in 0.0f64..1.0,
            alpha in 0.3f64..5.0,
            beta in 0.3f64..5.0,
        ) {
            let b = (a + w).min(1.0);
            for f in [TypeDistribution::Uniform, TypeDistribution::beta(alpha, beta).unwrap()] {
                let m = f.interval_measure(a, b);
                prop_assert!((0.0..=1.0 + 1e-12).contains(&m));
                // θ ≤ 1 pointwise, so the partial moment never exceeds the measure.
                let pm = f.partial_moment(&[(a, b)]);
                prop_assert!(pm <= m + 1e-9);
                prop_assert!(pm >= 0.0 - 1e-12);
            }
        }

        #[test]
        fn cdf_is_nondecreasing(
            x in 0.0f64..1.0,
            y in 0.0f64..1.0,
            alpha in 0.3f64..5.0,
            beta in 0.3f64..5.0,
        ) {
            let f = TypeDistribution::beta(alpha, beta).unwrap();
            let (lo, hi) = if x <= y { (x, y) } else { (y, x) };
            prop_assert!(f.cdf(lo) <= f.cdf(hi) + 1e-12);
        }
    }
}
