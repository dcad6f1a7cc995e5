//! User-type distributions on the unit interval.
//!
//! Every user carries a type θ ∈ [0, 1] — the probability of requesting a
//! unit of data in a slot — drawn from a density f.  The default is the
//! uniform density; a Beta(α, β) family is available for skewed
//! populations.  The solver only ever needs three primitives from f:
//! interval measures (membership fractions), partial first moments (class
//! mean types), and quantiles (to rebuild threshold partitions from
//! fractions).
//!
//! The uniform density takes exact closed-form paths throughout.  For
//! non-uniform densities, interval measures come from the CDF and partial
//! moments from adaptive Simpson quadrature with absolute tolerance 1e-10.

use statrs::distribution::{Beta, Continuous, ContinuousCDF};

/// Absolute tolerance for the adaptive quadrature used on non-uniform
/// densities.
const QUAD_TOL: f64 = 1e-10;

/// A probability density for user types on [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub enum TypeDistribution {
    /// The uniform density f(θ) = 1 on [0, 1].
    Uniform,
    /// A Beta(α, β) density, α > 0 and β > 0.
    Beta { alpha: f64, beta: f64 },
}

impl Default for TypeDistribution {
    fn default() -> Self {
        TypeDistribution::Uniform
    }
}

impl TypeDistribution {
    /// Creates a Beta(α, β) type distribution.
    ///
    /// Returns `None` when either shape parameter is non-positive or
    /// non-finite.
    pub fn beta(alpha: f64, beta: f64) -> Option<Self> {
        if alpha.is_finite() && beta.is_finite() && alpha > 0.0 && beta > 0.0 {
            Some(TypeDistribution::Beta { alpha, beta })
        } else {
            None
        }
    }

    /// Density f(θ); zero outside [0, 1].
    ///
    /// Beta shapes below 1 diverge at the support endpoints; those
    /// measure-zero points are reported as 0 so that quadrature stays
    /// finite.
    pub fn pdf(&self, theta: f64) -> f64 {
        if !(0.0..=1.0).contains(&theta) {
            return 0.0;
        }
        match self {
            TypeDistribution::Uniform => 1.0,
            TypeDistribution::Beta { alpha, beta } => {
                let v = Beta::new(*alpha, *beta).expect("validated shapes").pdf(theta);
                if v.is_finite() {
                    v
                } else {
                    0.0
                }
            }
        }
    }

    /// Cumulative distribution F(θ), clamped to [0, 1] outside the support.
    pub fn cdf(&self, theta: f64) -> f64 {
        if theta <= 0.0 {
            return 0.0;
        }
        if theta >= 1.0 {
            return 1.0;
        }
        match self {
            TypeDistribution::Uniform => theta,
            TypeDistribution::Beta { alpha, beta } => {
                Beta::new(*alpha, *beta).expect("validated shapes").cdf(theta)
            }
        }
    }

    /// Quantile F⁻¹(q) for q ∈ [0, 1].
    pub fn quantile(&self, q: f64) -> f64 {
        let q = q.clamp(0.0, 1.0);
        match self {
            TypeDistribution::Uniform => q,
            TypeDistribution::Beta { alpha, beta } => {
                if q == 0.0 {
                    return 0.0;
                }
                if q == 1.0 {
                    return 1.0;
                }
                // The generic inverse CDF is a coarse bisection; polish
                // it with safeguarded Newton on F(x) − q until the
                // bracket collapses.
                let seed = Beta::new(*alpha, *beta)
                    .expect("validated shapes")
                    .inverse_cdf(q)
                    .clamp(0.0, 1.0);
                let (mut lo, mut hi) = (0.0f64, 1.0f64);
                let mut x = seed;
                for _ in 0..80 {
                    let fx = self.cdf(x) - q;
                    if fx == 0.0 {
                        break;
                    }
                    if fx > 0.0 {
                        hi = x;
                    } else {
                        lo = x;
                    }
                    let d = self.pdf(x);
                    let mut next = if d.is_finite() && d > 0.0 { x - fx / d } else { f64::NAN };
                    if !(next > lo && next < hi) {
                        next = 0.5 * (lo + hi);
                    }
                    if (next - x).abs() <= 1e-16 * (1.0 + x.abs()) {
                        x = next;
                        break;
                    }
                    x = next;
                }
                x
            }
        }
    }

    /// f-measure of a single interval [a, b]; zero when b ≤ a.
    pub fn interval_measure(&self, a: f64, b: f64) -> f64 {
        if b <= a {
            return 0.0;
        }
        (self.cdf(b) - self.cdf(a)).max(0.0)
    }

    /// f-measure of a list of disjoint intervals.
    pub fn measure(&self, intervals: &[(f64, f64)]) -> f64 {
        // Folded from +0.0 rather than `.sum()`: the standard library's
        // empty float sum is -0.0, and a negative zero would survive the
        // callers' clamps into reported fractions.
        intervals
            .iter()
            .map(|&(a, b)| self.interval_measure(a, b))
            .fold(0.0, |acc, m| acc + m)
    }

    /// Partial first moment ∫ θ f(θ) dθ over a list of disjoint intervals.
    pub fn partial_moment(&self, intervals: &[(f64, f64)]) -> f64 {
        intervals
            .iter()
            .map(|&(a, b)| {
                if b <= a {
                    return 0.0;
                }
                match self {
                    TypeDistribution::Uniform => 0.5 * (b * b - a * a),
                    TypeDistribution::Beta { .. } => {
                        // Integrate by parts, ∫θ dF = b·F(b) − a·F(a) − ∫F dθ,
                        // so the quadrature only ever sees the bounded CDF,
                        // even when a shape below one blows the density up at
                        // an endpoint.
                        let (a, b) = (a.max(0.0), b.min(1.0));
                        let tail = adaptive_simpson(&|t| self.cdf(t), a, b, QUAD_TOL);
                        b * self.cdf(b) - a * self.cdf(a) - tail
                    }
                }
            })
            .fold(0.0, |acc, m| acc + m)
    }

    /// Conditional mean of θ over a list of disjoint intervals.
    ///
    /// Returns 0 when the intervals have (numerically) zero measure — the
    /// empty-class convention.  Any payoff term built from such a mean is
    /// multiplied by the same zero measure, so the convention never leaks
    /// into observable quantities.
    pub fn conditional_mean(&self, intervals: &[(f64, f64)]) -> f64 {
        let mass = self.measure(intervals);
        if mass <= 1e-15 {
            return 0.0;
        }
        (self.partial_moment(intervals) / mass).clamp(0.0, 1.0)
    }

    /// Checks that the density integrates to 1 over [0, 1].
    ///
    /// The uniform density is exact by construction.  Non-uniform
    /// densities are checked in two parts: the CDF must span [0, 1]
    /// exactly, and quadrature of the density over an interior window
    /// (clear of any endpoint singularity) must agree with the CDF
    /// increment to 1e-9.
    pub fn is_normalized(&self) -> bool {
        match self {
            TypeDistribution::Uniform => true,
            TypeDistribution::Beta { .. } => {
                let span_ok = self.cdf(0.0) == 0.0 && self.cdf(1.0) == 1.0;
                let window = adaptive_simpson(&|t| self.pdf(t), 0.25, 0.75, QUAD_TOL);
                span_ok && (window - (self.cdf(0.75) - self.cdf(0.25))).abs() < 1e-9
            }
        }
    }
}

/// Adaptive Simpson quadrature of `f` over [a, b] to absolute tolerance
/// `tol`.
///
/// Classic recursive bisection with the Richardson error estimate
/// |S_left + S_right − S| / 15; depth is capped to keep endpoint
/// singularities (Beta shapes below 1) from recursing unboundedly.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = simpson(a, b, fa, fm, fb);
    simpson_recurse(f, a, b, fa, fm, fb, whole, tol, 48)
}

fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn simpson_recurse(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let (flm, frm) = (f(lm), f(rm));
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    let err = left + right - whole;
    if depth == 0 || err.abs() <= 15.0 * tol {
        return left + right + err / 15.0;
    }
    let half = 0.5 * tol;
    simpson_recurse(f, a, m, fa, flm, fm, left, half, depth - 1)
        + simpson_recurse(f, m, b, fm, frm, fb, right, half, depth - 1)
}
