//! Globally adaptive 21-point Gauss–Kronrod quadrature.

use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::collections::BinaryHeap;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureResult {
    pub value: f64,
    pub abs_error_estimate: f64,
    pub converged: bool,
    pub evaluations: usize,
}

/// Converged once the summed error estimate is at most `max(abs, rel·|I|)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
}

impl Tolerance {
    pub fn absolute(abs: f64) -> Self {
        Self { abs, rel: 0.0 }
    }

    fn target(&self, value: f64) -> f64 {
        self.abs.max(self.rel * value.abs())
    }
}

// Kronrod abscissae on [-1, 1]; odd indices are the 10-point Gauss nodes.
#[allow(clippy::excessive_precision)]
const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

#[allow(clippy::excessive_precision)]
const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_208_965_012_140,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

#[allow(clippy::excessive_precision)]
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

#[derive(Debug, Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error.total_cmp(&other.error) == Ordering::Equal
    }
}

impl Eq for Segment {}

impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn gauss_kronrod_21<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> Segment {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let f_center = f(center);
    let mut kronrod = f_center * WGK[10];
    let mut gauss = 0.0;
    let mut res_abs = kronrod.abs();
    let mut fv1 = [0.0; 10];
    let mut fv2 = [0.0; 10];
    for j in 0..10 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        fv1[j] = f1;
        fv2[j] = f2;
        kronrod += WGK[j] * (f1 + f2);
        res_abs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            gauss += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * kronrod;
    let mut res_asc = WGK[10] * (f_center - mean).abs();
    for j in 0..10 {
        res_asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let value = kronrod * half;
    res_abs *= half.abs();
    res_asc *= half.abs();
    let mut error = ((kronrod - gauss) * half).abs();
    if res_asc != 0.0 && error != 0.0 {
        error = res_asc * (200.0 * error / res_asc).powf(1.5).min(1.0);
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        error = error.max(50.0 * f64::EPSILON * res_abs);
    }
    if !value.is_finite() {
        error = f64::INFINITY;
    }
    Segment { a, b, value, error }
}

/// Adaptive integrator; each call bisects the worst segment until the
/// tolerance is met or the subdivision budget runs out.
#[derive(Debug, Clone, Copy)]
pub struct AdaptiveQuadrature {
    pub tolerance: Tolerance,
    pub max_subdivisions: usize,
}

impl AdaptiveQuadrature {
    pub fn new(tolerance: Tolerance) -> Self {
        Self {
            tolerance,
            max_subdivisions: 2000,
        }
    }

    pub fn with_max_subdivisions(mut self, n: usize) -> Self {
        self.max_subdivisions = n;
        self
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, f: F, a: f64, b: f64) -> QuadratureResult {
        self.integrate_pieces(f, &[a, b])
    }

    /// Integrates over consecutive breakpoints `points[0] < points[1] < ...`.
    pub fn integrate_pieces<F: FnMut(f64) -> f64>(
        &self,
        mut f: F,
        points: &[f64],
    ) -> QuadratureResult {
        let mut heap = BinaryHeap::new();
        for w in points.windows(2) {
            if w[1] > w[0] {
                heap.push(gauss_kronrod_21(&mut f, w[0], w[1]));
            }
        }
        let mut evaluations = 21 * heap.len();
        let mut subdivisions = heap.len();
        loop {
            let (value, error) = totals(&heap);
            if error <= self.tolerance.target(value) {
                return QuadratureResult {
                    value,
                    abs_error_estimate: error,
                    converged: true,
                    evaluations,
                };
            }
            let worst = match heap.peek() {
                Some(s) => *s,
                None => {
                    return QuadratureResult {
                        value: 0.0,
                        abs_error_estimate: 0.0,
                        converged: true,
                        evaluations,
                    }
                }
            };
            let mid = 0.5 * (worst.a + worst.b);
            let resolvable = mid > worst.a && mid < worst.b;
            if subdivisions >= self.max_subdivisions || !resolvable {
                return QuadratureResult {
                    value,
                    abs_error_estimate: error,
                    converged: false,
                    evaluations,
                };
            }
            heap.pop();
            heap.push(gauss_kronrod_21(&mut f, worst.a, mid));
            heap.push(gauss_kronrod_21(&mut f, mid, worst.b));
            evaluations += 42;
            subdivisions += 1;
        }
    }
}

fn totals(heap: &BinaryHeap<Segment>) -> (f64, f64) {
    // Summation order must not depend on heap layout for reproducibility.
    let mut segs: Vec<&Segment> = heap.iter().collect();
    segs.sort_by(|x, y| x.a.total_cmp(&y.a));
    segs.iter()
        .fold((0.0, 0.0), |(v, e), s| (v + s.value, e + s.error))
}

/// ∫₀¹ f(t) dt to absolute tolerance `tol`. The cubic map t = u²(3 - 2u)
/// removes inverse-square-root singularities at either endpoint, so `f`
/// need only be finite on the open interval.
pub fn integrate<F: Fn(f64) -> f64>(f: F, tol: f64) -> QuadratureResult {
    let mapped = |u: f64| {
        let v = 1.0 - u;
        let t = u * u * (3.0 - 2.0 * u);
        if t <= 0.0 || t >= 1.0 {
            return 0.0;
        }
        f(t) * 6.0 * u * v
    };
    AdaptiveQuadrature::new(Tolerance::absolute(tol)).integrate(mapped, 0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::special::ln_gamma;

    #[test]
    fn kronrod_rule_is_exact_for_polynomials() {
        let q = AdaptiveQuadrature::new(Tolerance::absolute(1e-300)).with_max_subdivisions(1);
        for k in 0..=31 {
            let r = q.integrate(|x: f64| x.powi(k), 0.0, 1.0);
            let exact = 1.0 / (k as f64 + 1.0);
            assert!((r.value - exact).abs() < 1e-14, "x^{k}: {}", r.value);
        }
        // Gauss part alone is exact to degree 19: K - G vanishes there.
        let seg = gauss_kronrod_21(&mut |x: f64| x.powi(19), -0.3, 0.8);
        assert!(seg.error < 1e-14);
    }

    #[test]
    fn simple_integrals() {
        let r = integrate(|t| t, 1e-12);
        assert!(r.converged);
        assert!((r.value - 0.5).abs() < 1e-12);

        let lb = ln_gamma(2.0) + ln_gamma(5.0) - ln_gamma(7.0);
        let r = integrate(|t: f64| (t.ln() + 4.0 * (1.0 - t).ln() - lb).exp(), 1e-12);
        assert!((r.value - 1.0).abs() < 1e-10);
    }

    #[test]
    fn arcsine_density_normalizes() {
        let r = integrate(
            |t: f64| 1.0 / (std::f64::consts::PI * (t * (1.0 - t)).sqrt()),
            1e-10,
        );
        assert!(r.converged);
        assert!((r.value - 1.0).abs() < 1e-8, "{}", r.value);
    }

    #[test]
    fn error_estimates_are_conservative() {
        type Case = (Box<dyn Fn(f64) -> f64>, f64);
        let cases: Vec<Case> = vec![
            (Box::new(|x: f64| x.exp()), std::f64::consts::E - 1.0),
            (
                Box::new(|x: f64| (10.0 * x).sin()),
                (1.0 - 10f64.cos()) / 10.0,
            ),
            (
                Box::new(|x: f64| 1.0 / (1.0 + x * x)),
                std::f64::consts::FRAC_PI_4,
            ),
            (Box::new(|x: f64| x.sqrt()), 2.0 / 3.0),
            (Box::new(|x: f64| x.ln()), -1.0),
            (Box::new(|x: f64| 1.0 / x.sqrt()), 2.0),
            (Box::new(|x: f64| (-x * x).exp()), 0.746_824_132_812_427),
            (
                Box::new(|x: f64| x.powi(7) * (1.0 - x).powi(3)),
                1.0 / 1320.0,
            ),
            (Box::new(|x: f64| (x - 0.3).abs()), 0.29),
            (
                Box::new(|x: f64| (50.0 * x).cos().powi(2)),
                0.5 + (100f64).sin() / 200.0,
            ),
        ];
        for (i, (f, exact)) in cases.iter().enumerate() {
            for tol in [1e-6, 1e-10] {
                let r = AdaptiveQuadrature::new(Tolerance::absolute(tol)).integrate(f, 0.0, 1.0);
                assert!(r.converged, "case {i}");
                let err = (r.value - exact).abs();
                assert!(
                    err <= r.abs_error_estimate,
                    "case {i} tol {tol}: true {err:e} > estimate {:e}",
                    r.abs_error_estimate
                );
                assert!(r.abs_error_estimate <= tol);
            }
        }
    }

    #[test]
    fn budget_exhaustion_is_reported() {
        let q = AdaptiveQuadrature::new(Tolerance::absolute(1e-14)).with_max_subdivisions(3);
        let r = q.integrate(|x: f64| (1.0 / (x + 1e-9)).sin(), 0.0, 1.0);
        assert!(!r.converged);
    }
}
