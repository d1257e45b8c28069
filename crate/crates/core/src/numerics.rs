//! Normal-distribution special functions and the quadrature rules built on them.
//!
//! Everything downstream (test statistics, Dunnett adjustment, design
//! verification) reduces to evaluating Gaussian integrals, so this module keeps
//! its own high-accuracy kernels instead of leaning on approximations whose
//! error would be hard to budget in the operating-characteristic tolerances.

use std::sync::OnceLock;

use crate::error::{Error, Result};

pub const SQRT_PI: f64 = 1.772_453_850_905_516;
const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;
const PI_POW_NEG_QUARTER: f64 = 0.751_125_544_464_942_5;

/// Standard normal density.
pub fn std_normal_pdf(x: f64) -> f64 {
    FRAC_1_SQRT_2PI * (-0.5 * x * x).exp()
}

/// Standard normal CDF, accurate to ~1e-15 absolute over the whole line.
///
/// Saturates to exactly 0 or 1 beyond |x| = 40, where the true tail mass is
/// far below machine epsilon anyway.
pub fn std_normal_cdf(x: f64) -> f64 {
    if x >= 40.0 {
        return 1.0;
    }
    if x <= -40.0 {
        return 0.0;
    }
    0.5 * erfc_cody(-x * std::f64::consts::FRAC_1_SQRT_2)
}

/// Complementary error function, Cody's rational-approximation scheme.
///
/// Relative error a few ulp on each branch; erfc underflows to 0 only past
/// x ~ 26.6, which the CDF saturation above never reaches with a live value.
fn erfc_cody(x: f64) -> f64 {
    const A: [f64; 5] = [
        3.161_123_743_870_565_6e0,
        1.138_641_541_510_501_56e2,
        3.774_852_376_853_020_2e2,
        3.209_377_589_138_469_47e3,
        1.857_777_061_846_031_53e-1,
    ];
    const B: [f64; 4] = [
        2.360_129_095_234_412_09e1,
        2.440_246_379_344_441_73e2,
        1.282_616_526_077_372_28e3,
        2.844_236_833_439_170_62e3,
    ];
    const C: [f64; 9] = [
        5.641_884_969_886_700_9e-1,
        8.883_149_794_388_375_94e0,
        6.611_919_063_714_162_95e1,
        2.986_351_381_974_001_31e2,
        8.819_522_212_417_690_9e2,
        1.712_047_612_634_070_58e3,
        2.051_078_377_826_071_47e3,
        1.230_339_354_797_997_25e3,
        2.153_115_354_744_038_46e-8,
    ];
    const D: [f64; 8] = [
        1.574_492_611_070_983_47e1,
        1.176_939_508_913_124_99e2,
        5.371_811_018_620_098_58e2,
        1.621_389_574_566_690_19e3,
        3.290_799_235_733_459_63e3,
        4.362_619_090_143_247_16e3,
        3.439_367_674_143_721_64e3,
        1.230_339_354_803_749_42e3,
    ];
    const P: [f64; 6] = [
        3.053_266_349_612_323_44e-1,
        3.603_448_999_498_044_39e-1,
        1.257_817_261_112_292_46e-1,
        1.608_378_514_874_227_66e-2,
        6.587_491_615_298_378_03e-4,
        1.631_538_713_730_209_78e-2,
    ];
    const Q: [f64; 5] = [
        2.568_520_192_289_822_42e0,
        1.872_952_849_923_460_47e0,
        5.279_051_029_514_284_12e-1,
        6.051_834_131_244_131_91e-2,
        2.335_204_976_268_691_85e-3,
    ];
    const FRAC_1_SQRT_PI: f64 = 5.641_895_835_477_562_9e-1;

    let y = x.abs();
    let result = if y <= 0.46875 {
        let ysq = if y > 1e-300 { y * y } else { 0.0 };
        let mut num = A[4] * ysq;
        let mut den = ysq;
        for i in 0..3 {
            num = (num + A[i]) * ysq;
            den = (den + B[i]) * ysq;
        }
        let erf = x * (num + A[3]) / (den + B[3]);
        return 1.0 - erf;
    } else if y <= 4.0 {
        let mut num = C[8] * y;
        let mut den = y;
        for i in 0..7 {
            num = (num + C[i]) * y;
            den = (den + D[i]) * y;
        }
        let r = (num + C[7]) / (den + D[7]);
        scale_by_exp_neg_sq(y, r)
    } else if y < 26.6 {
        let ysq = 1.0 / (y * y);
        let mut num = P[5] * ysq;
        let mut den = ysq;
        for i in 0..4 {
            num = (num + P[i]) * ysq;
            den = (den + Q[i]) * ysq;
        }
        let r = ysq * (num + P[4]) / (den + Q[4]);
        let r = (FRAC_1_SQRT_PI - r) / y;
        scale_by_exp_neg_sq(y, r)
    } else {
        0.0
    };
    if x < 0.0 {
        2.0 - result
    } else {
        result
    }
}

/// Multiplies `r` by exp(-y^2) split into an exact-square part and a small
/// remainder so the product keeps full precision for large y.
fn scale_by_exp_neg_sq(y: f64, r: f64) -> f64 {
    let ysq = (y * 16.0).trunc() / 16.0;
    let del = (y - ysq) * (y + ysq);
    (-ysq * ysq).exp() * (-del).exp() * r
}

/// Standard normal quantile: rational initial guess refined by Newton steps
/// against [`std_normal_cdf`], so the pair satisfies the round-trip identity
/// to ~1e-15.
pub fn std_normal_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::OutOfDomain {
            name: "p",
            range: "(0, 1)",
            value: p,
        });
    }
    let mut x = acklam_guess(p);
    for _ in 0..2 {
        let pdf = std_normal_pdf(x);
        if pdf <= 0.0 {
            break;
        }
        let err = std_normal_cdf(x) - p;
        // Halley step: one extra derivative term buys an order of convergence.
        let u = err / pdf;
        x -= u / (1.0 + 0.5 * x * u);
    }
    Ok(x)
}

fn acklam_guess(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969_683_028_665_376e1,
        2.209_460_984_245_205e2,
        -2.759_285_104_469_687e2,
        1.383_577_518_672_690e2,
        -3.066_479_806_614_716e1,
        2.506_628_277_459_239e0,
    ];
    const B: [f64; 5] = [
        -5.447_609_879_822_406e1,
        1.615_858_368_580_409e2,
        -1.556_989_798_598_866e2,
        6.680_131_188_771_972e1,
        -1.328_068_155_288_572e1,
    ];
    const C: [f64; 6] = [
        -7.784_894_002_430_293e-3,
        -3.223_964_580_411_365e-1,
        -2.400_758_277_161_838e0,
        -2.549_732_539_343_734e0,
        4.374_664_141_464_968e0,
        2.938_163_982_698_783e0,
    ];
    const D: [f64; 4] = [
        7.784_695_709_041_462e-3,
        3.224_671_290_700_398e-1,
        2.445_134_137_142_996e0,
        3.754_408_661_907_416e0,
    ];
    const P_LOW: f64 = 0.02425;

    if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    }
}

/// What a [`QuadratureRule`]'s nodes and weights integrate against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuadratureKind {
    /// Weight exp(-x^2) over the whole line; node count fixed at build time.
    GaussHermite,
    /// Plain weight on a finite interval, composite panels of Gauss-Legendre.
    AdaptiveInterval,
}

/// A fixed quadrature rule: strictly increasing nodes with positive weights.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    kind: QuadratureKind,
}

impl QuadratureRule {
    /// Gauss-Hermite rule with `n` nodes for integrals of f(x) exp(-x^2).
    ///
    /// Nodes come from Sturm bisection on the symmetric Jacobi matrix
    /// (Gershgorin-bounded), then two Newton polish steps on the orthonormal
    /// Hermite recurrence; weights are 2 / p_n'(x)^2 from the same recurrence.
    pub fn gauss_hermite(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidConfig(
                "quadrature rule needs at least one node".into(),
            ));
        }
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        // Off-diagonal^2 of the Jacobi matrix: b_k^2 = k/2.
        let bsq: Vec<f64> = (1..n).map(|k| k as f64 / 2.0).collect();
        let bound = 2.0 * ((n as f64) / 2.0).sqrt() + 1.0;

        // Symmetric spectrum: bisect only the non-negative half and mirror.
        for i in (n + 1) / 2..n {
            let mut lo = -bound;
            let mut hi = bound;
            while hi - lo > 1e-14 * (1.0 + lo.abs().max(hi.abs())) {
                let mid = 0.5 * (lo + hi);
                if sturm_count_below(&bsq, mid) <= i {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let mut z = 0.5 * (lo + hi);
            let mut deriv_scaled = (0.0, 0);
            for _ in 0..2 {
                let (pn, pn1, e) = hermite_orthonormal(n, z);
                let dpn = (2.0 * n as f64).sqrt() * pn1;
                if dpn != 0.0 {
                    z -= pn / dpn;
                }
                deriv_scaled = (pn1, e);
            }
            nodes[i] = z;
            // w = 2 / p_n'(x)^2 = 1 / (n * p_{n-1}(x)^2), with the scale
            // factor restored through the tracked exponent.
            let (pn1, e) = deriv_scaled;
            let w = (1.0 / (n as f64 * pn1 * pn1)) * pow2(-2 * e);
            weights[i] = w.max(f64::MIN_POSITIVE);
        }
        for i in (n + 1) / 2..n {
            nodes[n - 1 - i] = -nodes[i];
            weights[n - 1 - i] = weights[i];
        }
        if n % 2 == 1 {
            let mid = (n - 1) / 2;
            nodes[mid] = 0.0;
            let (_, pn1, e) = hermite_orthonormal(n, 0.0);
            let w = (1.0 / (n as f64 * pn1 * pn1)) * pow2(-2 * e);
            weights[mid] = w.max(f64::MIN_POSITIVE);
        }
        QuadratureRule {
            nodes,
            weights,
            kind: QuadratureKind::GaussHermite,
        }
        .validated()
    }

    /// Composite Gauss-Legendre rule: `panels` equal panels over [a, b],
    /// 16 points each.
    pub fn composite_legendre(a: f64, b: f64, panels: usize) -> Result<Self> {
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err(Error::InvalidConfig(format!(
                "interval [{a}, {b}] is not a finite increasing range"
            )));
        }
        if panels == 0 {
            return Err(Error::InvalidConfig(
                "composite rule needs at least one panel".into(),
            ));
        }
        let (base_x, base_w) = legendre_16();
        let h = (b - a) / panels as f64;
        let mut nodes = Vec::with_capacity(16 * panels);
        let mut weights = Vec::with_capacity(16 * panels);
        for p in 0..panels {
            let lo = a + h * p as f64;
            let c = lo + 0.5 * h;
            for (&x, &w) in base_x.iter().zip(&base_w) {
                nodes.push(c + 0.5 * h * x);
                weights.push(0.5 * h * w);
            }
        }
        QuadratureRule {
            nodes,
            weights,
            kind: QuadratureKind::AdaptiveInterval,
        }
        .validated()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn kind(&self) -> QuadratureKind {
        self.kind
    }

    /// Applies the rule to `f` in its native measure (including the exp(-x^2)
    /// factor for Gauss-Hermite, which the weights absorb).
    pub fn apply(&self, mut f: impl FnMut(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }

    fn validated(self) -> Result<Self> {
        for pair in self.nodes.windows(2) {
            if !(pair[0] < pair[1]) {
                return Err(Error::Degenerate("quadrature nodes not strictly increasing"));
            }
        }
        if self.weights.iter().any(|&w| !(w > 0.0)) {
            return Err(Error::Degenerate("quadrature weight not positive"));
        }
        if self.kind == QuadratureKind::GaussHermite {
            let total: f64 = self.weights.iter().sum();
            if (total - SQRT_PI).abs() > 1e-12 {
                return Err(Error::Degenerate("Gauss-Hermite weights do not sum to sqrt(pi)"));
            }
        }
        Ok(self)
    }
}

/// Number of eigenvalues of the Jacobi matrix strictly below `x`, by the
/// Sturm sequence of its shifted LDL^T pivots.
fn sturm_count_below(bsq: &[f64], x: f64) -> usize {
    const PIVMIN: f64 = 1e-300;
    let mut count = 0usize;
    let mut d = -x;
    if d < 0.0 {
        count += 1;
    }
    for &b2 in bsq {
        if d.abs() < PIVMIN {
            d = -PIVMIN;
        }
        d = -x - b2 / d;
        if d < 0.0 {
            count += 1;
        }
    }
    count
}

/// Orthonormal Hermite values (p_n(z), p_{n-1}(z)) scaled by 2^-e to dodge
/// overflow; true values are the returned pair times 2^e.
fn hermite_orthonormal(n: usize, z: f64) -> (f64, f64, i32) {
    let mut e: i32 = 0;
    let mut p1 = PI_POW_NEG_QUARTER;
    let mut p0 = 0.0f64;
    for j in 1..=n {
        let jf = j as f64;
        let p_next = z * (2.0 / jf).sqrt() * p1 - ((jf - 1.0) / jf).sqrt() * p0;
        p0 = p1;
        p1 = p_next;
        let m = p1.abs().max(p0.abs());
        if m > 1e140 {
            p1 *= pow2(-512);
            p0 *= pow2(-512);
            e += 512;
        }
    }
    (p1, p0, e)
}

fn pow2(e: i32) -> f64 {
    2.0f64.powi(e)
}

/// 16-point Gauss-Legendre nodes/weights on [-1, 1], built by Newton on the
/// Legendre recurrence from the Chebyshev initial guesses.
fn legendre_16() -> (Vec<f64>, Vec<f64>) {
    let n = 16usize;
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n / 2 {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut pp = 0.0;
        for _ in 0..100 {
            let mut p1 = 1.0f64;
            let mut p2 = 0.0f64;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = ((2.0 * jf + 1.0) * z * p2 - jf * p3) / (jf + 1.0);
            }
            pp = n as f64 * (z * p1 - p2) / (z * z - 1.0);
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() < 1e-15 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * pp * pp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

const GH_SIZES: [usize; 7] = [16, 32, 64, 128, 256, 512, 1024];
static GH_CACHE: [OnceLock<QuadratureRule>; 7] = [const { OnceLock::new() }; 7];

fn gauss_hermite_cached(idx: usize) -> &'static QuadratureRule {
    GH_CACHE[idx].get_or_init(|| {
        QuadratureRule::gauss_hermite(GH_SIZES[idx]).expect("fixed sizes are valid")
    })
}

/// Integrates f against the standard normal density over the whole line by
/// Gauss-Hermite rules of doubling size, stopping when consecutive estimates
/// agree within `tol`.
pub fn integrate_weighted_normal(f: impl Fn(f64) -> f64, tol: f64) -> Result<f64> {
    if !(tol > 0.0) {
        return Err(Error::OutOfDomain {
            name: "tol",
            range: "(0, inf)",
            value: tol,
        });
    }
    let eval = |rule: &QuadratureRule| -> f64 {
        // Substitution x = sqrt(2) t maps the N(0,1) integral onto the
        // exp(-t^2) measure with an overall 1/sqrt(pi).
        rule.apply(|t| f(std::f64::consts::SQRT_2 * t)) / SQRT_PI
    };
    let mut prev = eval(gauss_hermite_cached(0));
    let mut delta = f64::INFINITY;
    for idx in 1..GH_SIZES.len() {
        let est = eval(gauss_hermite_cached(idx));
        delta = (est - prev).abs();
        if delta < tol {
            return Ok(est);
        }
        prev = est;
    }
    Err(Error::QuadratureNonConvergence {
        tol,
        delta,
        nodes: GH_SIZES[GH_SIZES.len() - 1],
    })
}

/// Interval analogue of [`integrate_weighted_normal`]: composite 16-point
/// Legendre panels doubling until agreement within `tol`. Kept mainly as an
/// independent cross-check on the Hermite path.
pub fn integrate_interval(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> Result<f64> {
    if !(tol > 0.0) {
        return Err(Error::OutOfDomain {
            name: "tol",
            range: "(0, inf)",
            value: tol,
        });
    }
    let mut panels = 1usize;
    let mut prev = QuadratureRule::composite_legendre(a, b, panels)?.apply(&f);
    let mut delta = f64::INFINITY;
    for _ in 0..8 {
        panels *= 2;
        let est = QuadratureRule::composite_legendre(a, b, panels)?.apply(&f);
        delta = (est - prev).abs();
        if delta < tol {
            return Ok(est);
        }
        prev = est;
    }
    Err(Error::QuadratureNonConvergence {
        tol,
        delta,
        nodes: 16 * panels,
    })
}

/// P(max_i Z_i > c) for equicorrelated-with-common-control normals: each
/// Z_i = lambda_i U + sqrt(1 - lambda_i^2) V_i with U, V_i independent
/// standard normal, so conditioning on U factorizes the joint tail:
///
///   P = 1 - E_U prod_i Phi((c - lambda_i U) / sqrt(1 - lambda_i^2)).
pub fn mvn_common_control_exceedance(c: f64, lambdas: &[f64]) -> Result<f64> {
    if lambdas.is_empty() {
        return Err(Error::InvalidConfig(
            "common-control exceedance needs at least one arm".into(),
        ));
    }
    for &l in lambdas {
        if !(l > 0.0 && l < 1.0) {
            return Err(Error::OutOfDomain {
                name: "lambda",
                range: "(0, 1)",
                value: l,
            });
        }
    }
    let scales: Vec<f64> = lambdas.iter().map(|&l| (1.0 - l * l).sqrt()).collect();
    let inner = integrate_weighted_normal(
        |u| {
            lambdas
                .iter()
                .zip(&scales)
                .map(|(&l, &s)| std_normal_cdf((c - l * u) / s))
                .product::<f64>()
        },
        1e-9,
    )?;
    // Guard rounding: the integral of a product of CDFs cannot exceed 1.
    Ok((1.0 - inner).clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cdf_matches_reference_points() {
        // Bisection-refined reference values for Phi.
        let cases = [
            (0.0, 0.5),
            (1.0, 0.841_344_746_068_542_9),
            (-1.0, 0.158_655_253_931_457_07),
            (1.959_963_984_540_054, 0.975),
            (2.575_829_303_548_901, 0.995),
            (-3.0, 1.349_898_031_630_094_4e-3),
            (5.0, 0.999_999_713_348_428),
        ];
        for (x, want) in cases {
            assert!(
                (std_normal_cdf(x) - want).abs() < 1e-12,
                "Phi({x}) = {} != {want}",
                std_normal_cdf(x)
            );
        }
    }

    #[test]
    fn cdf_deep_tail_against_asymptotic_series() {
        // Phi(-x) = phi(x)/x (1 - 1/x^2 + 3/x^4 - 15/x^6 + ...) for large x.
        // The series is asymptotic, so compare only to within its own first
        // omitted term (945/x^10 relative).
        for x in [8.0f64, 10.0, 15.0, 20.0] {
            let series = std_normal_pdf(x) / x
                * (1.0 - 1.0 / (x * x) + 3.0 / x.powi(4) - 15.0 / x.powi(6)
                    + 105.0 / x.powi(8));
            let got = std_normal_cdf(-x);
            let tol = (3.0 * 945.0 / x.powi(10)).max(1e-13);
            assert!(
                ((got - series) / series).abs() < tol,
                "tail at {x}: {got:e} vs {series:e}"
            );
        }
    }

    #[test]
    fn cdf_symmetry_and_saturation() {
        for x in [0.3, 1.7, 5.5, 11.0, 24.0, 36.0] {
            let s = std_normal_cdf(x) + std_normal_cdf(-x);
            assert!((s - 1.0).abs() < 1e-15, "symmetry at {x}: {s}");
        }
        assert_eq!(std_normal_cdf(40.0), 1.0);
        assert_eq!(std_normal_cdf(41.5), 1.0);
        assert_eq!(std_normal_cdf(-40.0), 0.0);
        assert_eq!(std_normal_cdf(-123.0), 0.0);
    }

    #[test]
    fn cdf_monotone_on_grid() {
        let mut prev = -1.0;
        let mut x = -41.0;
        while x <= 41.0 {
            let p = std_normal_cdf(x);
            assert!(p >= prev, "Phi not monotone at {x}");
            prev = p;
            x += 0.01;
        }
    }

    #[test]
    fn quantile_round_trip() {
        let mut p = 1e-10;
        while p < 1.0 {
            let x = std_normal_quantile(p).unwrap();
            assert!(
                (std_normal_cdf(x) - p).abs() <= 1e-10,
                "round trip at p={p}: x={x}, Phi(x)={}",
                std_normal_cdf(x)
            );
            p += 7.03e-4;
        }
        let z = std_normal_quantile(0.975).unwrap();
        assert!((z - 1.959_963_984_540_054).abs() < 1e-9);
        let z = std_normal_quantile(0.025).unwrap();
        assert!((z + 1.959_963_984_540_054).abs() < 1e-9);
    }

    #[test]
    fn quantile_rejects_out_of_domain() {
        for p in [0.0, 1.0, -0.25, 1.75, f64::NAN] {
            assert!(std_normal_quantile(p).is_err(), "p={p} should be rejected");
        }
    }

    #[test]
    fn gauss_hermite_four_node_closed_form() {
        // n = 4 admits closed-form nodes sqrt((3 +- sqrt(6))/2).
        let rule = QuadratureRule::gauss_hermite(4).unwrap();
        let outer = ((3.0 + 6.0f64.sqrt()) / 2.0).sqrt();
        let inner = ((3.0 - 6.0f64.sqrt()) / 2.0).sqrt();
        let want_nodes = [-outer, -inner, inner, outer];
        for (got, want) in rule.nodes().iter().zip(want_nodes) {
            assert!((got - want).abs() < 1e-13, "{got} vs {want}");
        }
        let want_weights = [
            0.081_312_835_447_245_18,
            0.804_914_090_005_512_8,
            0.804_914_090_005_512_8,
            0.081_312_835_447_245_18,
        ];
        for (got, want) in rule.weights().iter().zip(want_weights) {
            assert!((got - want).abs() < 1e-13, "{got} vs {want}");
        }
    }

    #[test]
    fn gauss_hermite_moment_exactness() {
        // An n-node rule integrates x^(2k) exp(-x^2) exactly up to 2n-1:
        // the value is (2k-1)!! sqrt(pi) / 2^k.
        for n in [16usize, 32, 64] {
            let rule = QuadratureRule::gauss_hermite(n).unwrap();
            let mut want = SQRT_PI;
            for k in 1..=(n - 1) {
                want *= (2 * k - 1) as f64 / 2.0;
                let got = rule.apply(|x| x.powi(2 * k as i32));
                assert!(
                    ((got - want) / want).abs() < 1e-11,
                    "n={n} moment 2k={}: {got} vs {want}",
                    2 * k
                );
            }
        }
    }

    #[test]
    fn gauss_hermite_invariants_all_cached_sizes() {
        for n in GH_SIZES {
            let rule = QuadratureRule::gauss_hermite(n).unwrap();
            assert_eq!(rule.nodes().len(), n);
            assert_eq!(rule.kind(), QuadratureKind::GaussHermite);
            let total: f64 = rule.weights().iter().sum();
            assert!(
                (total - SQRT_PI).abs() < 1e-12,
                "n={n}: weight sum {total}"
            );
            for pair in rule.nodes().windows(2) {
                assert!(pair[0] < pair[1]);
            }
            for w in rule.weights() {
                assert!(*w > 0.0);
            }
        }
    }

    #[test]
    fn normal_integrator_known_integrals() {
        // E[1] = 1, Var = 1, E[Phi(Z)] = 1/2, E[cos Z] = exp(-1/2).
        let one = integrate_weighted_normal(|_| 1.0, 1e-12).unwrap();
        assert!((one - 1.0).abs() < 1e-12);
        let var = integrate_weighted_normal(|z| z * z, 1e-12).unwrap();
        assert!((var - 1.0).abs() < 1e-11);
        let half = integrate_weighted_normal(std_normal_cdf, 1e-12).unwrap();
        assert!((half - 0.5).abs() < 1e-11);
        let cosz = integrate_weighted_normal(f64::cos, 1e-12).unwrap();
        assert!((cosz - (-0.5f64).exp()).abs() < 1e-11);
    }

    #[test]
    fn normal_integrator_agrees_with_interval_rule() {
        // Same integrand through the independent Legendre path; the normal
        // tail outside [-12, 12] is ~1e-33 and cannot affect 1e-9 agreement.
        let f = |z: f64| (1.0 - std_normal_cdf(1.8 - 0.6 * z)) * std_normal_cdf(z + 0.4);
        let hermite = integrate_weighted_normal(f, 1e-11).unwrap();
        let legendre =
            integrate_interval(|z| std_normal_pdf(z) * f(z), -12.0, 12.0, 1e-11).unwrap();
        assert!(
            (hermite - legendre).abs() < 1e-9,
            "{hermite} vs {legendre}"
        );
    }

    #[test]
    fn interval_rule_polynomial_exactness() {
        let rule = QuadratureRule::composite_legendre(-1.0, 3.0, 4).unwrap();
        assert_eq!(rule.kind(), QuadratureKind::AdaptiveInterval);
        // x^5 over [-1, 3]: (3^6 - 1)/6.
        let got = rule.apply(|x| x.powi(5));
        let want = (3.0f64.powi(6) - 1.0) / 6.0;
        assert!((got - want).abs() < 1e-10 * want.abs());
    }

    #[test]
    fn exceedance_single_arm_reduces_to_adjusted_tail() {
        // One arm: P(Z > c) with Z standard normal regardless of lambda.
        for (c, l) in [(1.5, 0.3), (2.2, 0.9), (0.0, 0.5)] {
            let got = mvn_common_control_exceedance(c, &[l]).unwrap();
            let want = 1.0 - std_normal_cdf(c);
            assert!((got - want).abs() < 1e-9, "c={c} l={l}: {got} vs {want}");
        }
    }

    #[test]
    fn exceedance_monotone_in_threshold_and_arm_count() {
        let l = std::f64::consts::FRAC_1_SQRT_2;
        let p1 = mvn_common_control_exceedance(2.0, &[l, l]).unwrap();
        let p2 = mvn_common_control_exceedance(2.3, &[l, l]).unwrap();
        assert!(p1 > p2);
        let p3 = mvn_common_control_exceedance(2.0, &[l, l, l]).unwrap();
        assert!(p3 > p1);
        // Bounded by the Bonferroni union and below by the single tail.
        let tail = 1.0 - std_normal_cdf(2.0);
        assert!(p1 > tail && p1 < 2.0 * tail);
    }

    #[test]
    fn exceedance_matches_monte_carlo_oracle() {
        use rand::Rng;
        use rand::SeedableRng;
        // 1e7-draw oracle for c = 2, lambda = (1/sqrt(2), 1/sqrt(2)): draw
        // U, V1, V2 and count max exceedances directly.
        let l = std::f64::consts::FRAC_1_SQRT_2;
        let s = (1.0 - l * l).sqrt();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x9e3779b97f4a7c15);
        let draws = 10_000_000u64;
        let mut hits = 0u64;
        for _ in 0..draws {
            let u: f64 = rng.sample(rand_distr::StandardNormal);
            let v1: f64 = rng.sample(rand_distr::StandardNormal);
            let v2: f64 = rng.sample(rand_distr::StandardNormal);
            if (l * u + s * v1).max(l * u + s * v2) > 2.0 {
                hits += 1;
            }
        }
        let mc = hits as f64 / draws as f64;
        let got = mvn_common_control_exceedance(2.0, &[l, l]).unwrap();
        assert!(
            (got - mc).abs() < 5e-4,
            "quadrature {got} vs MC oracle {mc}"
        );
    }

    #[test]
    fn exceedance_rejects_bad_lambda() {
        assert!(mvn_common_control_exceedance(2.0, &[]).is_err());
        for l in [0.0, 1.0, -0.4, 1.3] {
            assert!(mvn_common_control_exceedance(2.0, &[0.5, l]).is_err());
        }
    }
}
