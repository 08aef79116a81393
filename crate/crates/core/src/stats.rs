//! Small statistics toolkit: normal distribution, moments, quantiles, Pearson
//! correlation and histogram binning.

use crate::num::Scalar;

fn poly<T: Scalar>(coeffs: &[f64], x: T) -> T {
    coeffs
        .iter()
        .rev()
        .fold(T::zero(), |acc, &c| acc * x + T::lit(c))
}

/// Complementary error function (Cody's rational Chebyshev approximations).
pub fn erfc<T: Scalar>(x: T) -> T {
    const A: [f64; 5] = [
        3.161_123_743_870_565_6,
        113.864_154_151_050_16,
        377.485_237_685_302,
        3_209.377_589_138_469_5,
        0.185_777_706_184_603_15,
    ];
    const B: [f64; 4] = [
        23.601_290_952_344_122,
        244.024_637_934_444_17,
        1_282.616_526_077_372_3,
        2_844.236_833_439_171,
    ];
    const C: [f64; 9] = [
        0.564_188_496_988_670_1,
        8.883_149_794_388_376,
        66.119_190_637_141_63,
        298.635_138_197_400_1,
        881.952_221_241_769,
        1_712.047_612_634_070_6,
        2_051.078_377_826_071_5,
        1_230.339_354_797_997_2,
        2.153_115_354_744_038_5e-8,
    ];
    const D: [f64; 8] = [
        15.744_926_110_709_835,
        117.693_950_891_312_5,
        537.181_101_862_009_9,
        1_621.389_574_566_690_2,
        3_290.799_235_733_459_7,
        4_362.619_090_143_247,
        3_439.367_674_143_721_6,
        1_230.339_354_803_749_4,
    ];
    const P: [f64; 6] = [
        0.305_326_634_961_232_34,
        0.360_344_899_949_804_44,
        0.125_781_726_111_229_25,
        0.016_083_785_148_742_28,
        6.587_491_615_298_378e-4,
        0.016_315_387_137_302_097,
    ];
    const Q: [f64; 5] = [
        2.568_520_192_289_822,
        1.872_952_849_923_467_3,
        0.527_905_102_951_428_4,
        0.060_518_341_312_441_32,
        0.002_335_204_976_268_691_8,
    ];
    let one = T::one();
    let y = x.abs();
    if x.is_nan() {
        return x;
    }
    // exp(-y^2) split to limit rounding error for large y
    let scaled_exp = |y: T| {
        let ysq = (y * T::lit(16.0)).trunc() / T::lit(16.0);
        let del = (y - ysq) * (y + ysq);
        (-ysq * ysq).exp() * (-del).exp()
    };
    if y <= T::lit(0.46875) {
        let ysq = if y > T::lit(1.11e-16) {
            y * y
        } else {
            T::zero()
        };
        let mut xnum = T::lit(A[4]) * ysq;
        let mut xden = ysq;
        for i in 0..3 {
            xnum = (xnum + T::lit(A[i])) * ysq;
            xden = (xden + T::lit(B[i])) * ysq;
        }
        let erf = x * (xnum + T::lit(A[3])) / (xden + T::lit(B[3]));
        return one - erf;
    }
    let tail = if y <= T::lit(4.0) {
        let mut xnum = T::lit(C[8]) * y;
        let mut xden = y;
        for i in 0..7 {
            xnum = (xnum + T::lit(C[i])) * y;
            xden = (xden + T::lit(D[i])) * y;
        }
        (xnum + T::lit(C[7])) / (xden + T::lit(D[7])) * scaled_exp(y)
    } else if y >= T::lit(26.6) {
        T::zero()
    } else {
        let ysq = one / (y * y);
        let mut xnum = T::lit(P[5]) * ysq;
        let mut xden = ysq;
        for i in 0..4 {
            xnum = (xnum + T::lit(P[i])) * ysq;
            xden = (xden + T::lit(Q[i])) * ysq;
        }
        let r = ysq * (xnum + T::lit(P[4])) / (xden + T::lit(Q[4]));
        (T::FRAC_2_SQRT_PI() * T::lit(0.5) - r) / y * scaled_exp(y)
    };
    if x < T::zero() {
        T::lit(2.0) - tail
    } else {
        tail
    }
}

pub fn normal_cdf<T: Scalar>(x: T) -> T {
    T::lit(0.5) * erfc(-x * T::FRAC_1_SQRT_2())
}

pub fn normal_pdf<T: Scalar>(x: T) -> T {
    (-(x * x) * T::lit(0.5)).exp() * T::FRAC_1_SQRT_2() * T::FRAC_2_SQRT_PI() * T::lit(0.5)
}

/// Standard normal quantile, Wichura's AS 241 (relative accuracy about 1e-16).
///
/// Returns `-inf`/`+inf` at 0 and 1 and NaN outside `[0, 1]`.
pub fn normal_quantile<T: Scalar>(p: T) -> T {
    const A: [f64; 8] = [
        3.387_132_872_796_366_5,
        133.141_667_891_784_38,
        1_971.590_950_306_551_3,
        13_731.693_765_509_46,
        45_921.953_931_549_87,
        67_265.770_927_008_7,
        33_430.575_583_588_13,
        2_509.080_928_730_122_7,
    ];
    const B: [f64; 8] = [
        1.0,
        42.313_330_701_600_91,
        687.187_007_492_057_9,
        5_394.196_021_424_751,
        21_213.794_301_586_597,
        39_307.895_800_092_71,
        28_729.085_735_721_943,
        5_226.495_278_852_854,
    ];
    const C: [f64; 8] = [
        1.423_437_110_749_683_5,
        4.630_337_846_156_546,
        5.769_497_221_460_691,
        3.647_848_324_763_204_5,
        1.270_458_252_452_368_4,
        0.241_780_725_177_450_6,
        0.022_723_844_989_269_184,
        7.745_450_142_783_414e-4,
    ];
    const D: [f64; 8] = [
        1.0,
        2.053_191_626_637_759,
        1.676_384_830_183_803_8,
        0.689_767_334_985_1,
        0.148_103_976_427_480_08,
        0.015_198_666_563_616_457,
        5.475_938_084_995_345e-4,
        1.050_750_071_644_416_8e-9,
    ];
    const E: [f64; 8] = [
        6.657_904_643_501_103,
        5.463_784_911_164_114,
        1.784_826_539_917_291_3,
        0.296_560_571_828_504_9,
        0.026_532_189_526_576_124,
        0.001_242_660_947_388_078_4,
        2.711_555_568_743_487_6e-5,
        2.010_334_399_292_288_1e-7,
    ];
    const F: [f64; 8] = [
        1.0,
        0.599_832_206_555_887_9,
        0.136_929_880_922_735_8,
        0.014_875_361_290_850_615,
        7.868_691_311_456_133e-4,
        1.846_318_317_510_054_8e-5,
        1.421_511_758_316_446e-7,
        2.044_263_103_389_939_7e-15,
    ];
    let zero = T::zero();
    let one = T::one();
    if p.is_nan() || p < zero || p > one {
        return T::nan();
    }
    if p == zero {
        return T::neg_infinity();
    }
    if p == one {
        return T::infinity();
    }
    let q = p - T::lit(0.5);
    if q.abs() <= T::lit(0.425) {
        let r = T::lit(0.180625) - q * q;
        return q * poly(&A, r) / poly(&B, r);
    }
    let r = if q < zero { p } else { one - p };
    let mut r = (-r.ln()).sqrt();
    let x = if r <= T::lit(5.0) {
        r = r - T::lit(1.6);
        poly(&C, r) / poly(&D, r)
    } else {
        r = r - T::lit(5.0);
        poly(&E, r) / poly(&F, r)
    };
    if q < zero {
        -x
    } else {
        x
    }
}

pub fn mean<T: Scalar>(xs: &[T]) -> T {
    if xs.is_empty() {
        return T::nan();
    }
    xs.iter().fold(T::zero(), |a, &x| a + x) / T::lit(xs.len() as f64)
}

/// Unbiased sample variance (divides by `n - 1`).
pub fn sample_variance<T: Scalar>(xs: &[T]) -> T {
    if xs.len() < 2 {
        return T::nan();
    }
    let m = mean(xs);
    let ss = xs.iter().fold(T::zero(), |a, &x| a + (x - m) * (x - m));
    ss / T::lit((xs.len() - 1) as f64)
}

/// Linear-interpolation quantile of already sorted data (R type 7).
pub fn quantile_sorted<T: Scalar>(sorted: &[T], p: T) -> T {
    if sorted.is_empty() {
        return T::nan();
    }
    let h = T::lit((sorted.len() - 1) as f64) * p;
    let lo = h.floor().to_usize().unwrap_or(0).min(sorted.len() - 1);
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - T::lit(lo as f64)) * (sorted[hi] - sorted[lo])
}

/// Pearson correlation; `None` when either series is constant.
pub fn pearson<T: Scalar>(x: &[T], y: &[T]) -> Option<T> {
    assert_eq!(x.len(), y.len(), "series lengths differ");
    if x.len() < 2 {
        return None;
    }
    let mx = mean(x);
    let my = mean(y);
    let (mut sxy, mut sxx, mut syy) = (T::zero(), T::zero(), T::zero());
    for (&a, &b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy = sxy + da * db;
        sxx = sxx + da * da;
        syy = syy + db * db;
    }
    if !(sxx > T::zero()) || !(syy > T::zero()) {
        return None;
    }
    let r = sxy / (sxx.sqrt() * syy.sqrt());
    Some(r.max(-T::one()).min(T::one()))
}

/// Histogram with a common bin width over `[min, max]`.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize, schemars::JsonSchema)]
pub struct Histogram {
    /// Left edges of the bins followed by the right edge of the last one.
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

/// Histogram with Freedman–Diaconis bin width `2 IQR n^{-1/3}`. Falls back to
/// Sturges' bin count when the IQR is zero but the range is not, and to a
/// single bin when all values coincide.
pub fn freedman_diaconis(values: &[f64]) -> Histogram {
    let mut sorted: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    if n == 0 {
        return Histogram {
            edges: vec![],
            counts: vec![],
        };
    }
    let (lo, hi) = (sorted[0], sorted[n - 1]);
    let range = hi - lo;
    if !(range > 0.0) {
        return Histogram {
            edges: vec![lo, hi],
            counts: vec![n],
        };
    }
    let iqr = quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25);
    let bins = if iqr > 0.0 {
        let width = 2.0 * iqr / (n as f64).cbrt();
        ((range / width).ceil() as usize).clamp(1, 10_000)
    } else {
        ((n as f64).log2().ceil() as usize + 1).max(1)
    };
    let width = range / bins as f64;
    let edges: Vec<f64> = (0..=bins)
        .map(|i| if i == bins { hi } else { lo + i as f64 * width })
        .collect();
    let mut counts = vec![0usize; bins];
    for &x in &sorted {
        let i = (((x - lo) / width) as usize).min(bins - 1);
        counts[i] += 1;
    }
    Histogram { edges, counts }
}
