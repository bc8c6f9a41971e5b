//! Special functions backing the t and normal distributions.
//!
//! Everything here is written against [`Scalar`] so the same code serves
//! `f32` and `f64`; iteration stops at the scalar's machine epsilon.

use crate::scalar::Scalar;

const MAX_CF_ITER: usize = 20_000;

/// Lanczos approximation (g = 7, n = 9).
const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEF: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// Natural log of the gamma function for `x > 0`.
pub fn ln_gamma<T: Scalar>(x: T) -> T {
    let half = T::lit(0.5);
    if x < half {
        // Reflection: Γ(x)Γ(1−x) = π / sin(πx)
        let pi = T::PI();
        return (pi / (pi * x).sin()).ln() - ln_gamma(T::one() - x);
    }
    let x = x - T::one();
    let mut acc = T::lit(LANCZOS_COEF[0]);
    for (i, &c) in LANCZOS_COEF.iter().enumerate().skip(1) {
        acc = acc + T::lit(c) / (x + T::count(i));
    }
    let t = x + T::lit(LANCZOS_G) + half;
    half * (T::lit(2.0) * T::PI()).ln() + (x + half) * t.ln() - t + acc.ln()
}

/// `ln B(a, b)`.
pub fn ln_beta<T: Scalar>(a: T, b: T) -> T {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

/// Regularized incomplete beta `I_x(a, b)`.
///
/// Returns `None` outside the domain `a, b > 0`, `0 ≤ x ≤ 1`, or if the
/// continued fraction fails to converge.
pub fn regularized_beta<T: Scalar>(a: T, b: T, x: T) -> Option<T> {
    regularized_beta_split(a, b, x, T::one() - x)
}

/// `I_x(a, b)` where the caller also supplies `y = 1 − x` computed without
/// cancellation. Needed when `x` is within rounding of 1.
pub fn regularized_beta_split<T: Scalar>(a: T, b: T, x: T, y: T) -> Option<T> {
    let zero = T::zero();
    let one = T::one();
    if !(a > zero && b > zero) || !(zero..=one).contains(&x) || !(zero..=one).contains(&y) {
        return None;
    }
    if x == zero {
        return Some(zero);
    }
    if y == zero {
        return Some(one);
    }
    if x > (a + one) / (a + b + T::lit(2.0)) {
        beta_continued_fraction(b, a, y, x).map(|v| one - v)
    } else {
        beta_continued_fraction(a, b, x, y)
    }
}

/// Modified Lentz evaluation of the incomplete beta continued fraction.
fn beta_continued_fraction<T: Scalar>(a: T, b: T, x: T, y: T) -> Option<T> {
    let one = T::one();
    let two = T::lit(2.0);
    let tiny = T::min_positive_value() / T::epsilon();
    let eps = T::epsilon();

    let ln_prefix = a * x.ln() + b * y.ln() - ln_beta(a, b);
    let prefix = ln_prefix.exp() / a;

    let qab = a + b;
    let qap = a + one;
    let qam = a - one;

    let mut c = one;
    let mut d = one - qab * x / qap;
    if d.abs() < tiny {
        d = tiny;
    }
    d = one / d;
    let mut f = d;

    for m in 1..=MAX_CF_ITER {
        let fm = T::count(m);
        let m2 = two * fm;

        let even = fm * (b - fm) * x / ((qam + m2) * (a + m2));
        d = one + even * d;
        if d.abs() < tiny {
            d = tiny;
        }
        c = one + even / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = one / d;
        f = f * d * c;

        let odd = -(a + fm) * (qab + fm) * x / ((a + m2) * (qap + m2));
        d = one + odd * d;
        if d.abs() < tiny {
            d = tiny;
        }
        c = one + odd / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = one / d;
        let delta = d * c;
        f = f * delta;

        if (delta - one).abs() <= eps {
            return Some(prefix * f);
        }
    }
    None
}

/// Regularized upper incomplete gamma `Q(a, x)` for `a > 0`, `x ≥ 0`.
pub fn regularized_gamma_upper<T: Scalar>(a: T, x: T) -> Option<T> {
    let zero = T::zero();
    let one = T::one();
    if !(a > zero) || !(x >= zero) {
        return None;
    }
    if x == zero {
        return Some(one);
    }
    if x < a + one {
        gamma_series(a, x).map(|p| one - p)
    } else {
        gamma_continued_fraction(a, x)
    }
}

/// Lower regularized gamma `P(a, x)` by its power series.
fn gamma_series<T: Scalar>(a: T, x: T) -> Option<T> {
    let eps = T::epsilon();
    let mut ap = a;
    let mut term = T::one() / a;
    let mut sum = term;
    for _ in 0..MAX_CF_ITER {
        ap = ap + T::one();
        term = term * x / ap;
        sum = sum + term;
        if term.abs() < sum.abs() * eps {
            return Some(sum * (-x + a * x.ln() - ln_gamma(a)).exp());
        }
    }
    None
}

/// Upper regularized gamma `Q(a, x)` by Lentz's continued fraction.
fn gamma_continued_fraction<T: Scalar>(a: T, x: T) -> Option<T> {
    let one = T::one();
    let two = T::lit(2.0);
    let tiny = T::min_positive_value() / T::epsilon();
    let eps = T::epsilon();

    let mut b = x + one - a;
    let mut c = one / tiny;
    let mut d = one / b;
    let mut h = d;
    for i in 1..=MAX_CF_ITER {
        let fi = T::count(i);
        let an = -fi * (fi - a);
        b = b + two;
        d = an * d + b;
        if d.abs() < tiny {
            d = tiny;
        }
        c = b + an / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = one / d;
        let delta = d * c;
        h = h * delta;
        if (delta - one).abs() <= eps {
            return Some((-x + a * x.ln() - ln_gamma(a)).exp() * h);
        }
    }
    None
}

/// Complementary error function.
pub fn erfc<T: Scalar>(x: T) -> T {
    let half = T::lit(0.5);
    if x.is_nan() {
        return x;
    }
    let q = regularized_gamma_upper(half, x * x).unwrap_or(T::zero());
    if x >= T::zero() {
        q
    } else {
        T::lit(2.0) - q
    }
}

/// Standard normal CDF `Φ(x)`.
pub fn normal_cdf<T: Scalar>(x: T) -> T {
    T::lit(0.5) * erfc(-x / T::SQRT_2())
}

/// Standard normal density `φ(x)`.
pub fn normal_pdf<T: Scalar>(x: T) -> T {
    (-(x * x) / T::lit(2.0)).exp() / (T::lit(2.0) * T::PI()).sqrt()
}

/// Standard normal quantile `Φ⁻¹(p)` for `0 < p < 1`.
///
/// Acklam's rational approximation followed by one Halley step.
pub fn normal_quantile<T: Scalar>(p: T) -> Option<T> {
    let zero = T::zero();
    let one = T::one();
    if !(p > zero && p < one) {
        return None;
    }
    const A: [f64; 6] = [
        -3.969_683_028_665_376e1,
        2.209_460_984_245_205e2,
        -2.759_285_104_469_687e2,
        1.383_577_518_672_69e2,
        -3.066_479_806_614_716e1,
        2.506_628_277_459_239,
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
        -2.400_758_277_161_838,
        -2.549_732_539_343_734,
        4.374_664_141_464_968,
        2.938_163_982_698_783,
    ];
    const D: [f64; 4] = [
        7.784_695_709_041_462e-3,
        3.224_671_290_700_398e-1,
        2.445_134_137_142_996,
        3.754_408_661_907_416,
    ];
    let pf = p.to_f64_lossy();
    let low = 0.024_25;
    let x0 = if pf < low {
        let q = (-2.0 * pf.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if pf <= 1.0 - low {
        let q = pf - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - pf).ln()).sqrt();
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };
    let mut x = T::lit(x0);
    let e = normal_cdf(x) - p;
    let u = e * (T::lit(2.0) * T::PI()).sqrt() * (x * x / T::lit(2.0)).exp();
    x = x - u / (one + x * u / T::lit(2.0));
    Some(x)
}
