//! Globally adaptive Gauss–Kronrod (7/15 point) quadrature.

use crate::num::Scalar;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_225,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
// Gauss weights for XGK[1], XGK[3], XGK[5], XGK[7]
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult<T> {
    pub value: T,
    pub error: T,
    pub evaluations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy)]
struct Segment<T> {
    a: T,
    b: T,
    value: T,
    error: T,
}

fn gk15<T: Scalar, F: FnMut(T) -> T>(f: &mut F, a: T, b: T) -> Segment<T> {
    let half = T::lit(0.5);
    let center = half * (a + b);
    let h = half * (b - a);
    let fc = f(center);
    let mut kronrod = fc * T::lit(WGK[7]);
    let mut gauss = fc * T::lit(WG[3]);
    for j in 0..7 {
        let dx = h * T::lit(XGK[j]);
        let s = f(center - dx) + f(center + dx);
        kronrod = kronrod + T::lit(WGK[j]) * s;
        if j % 2 == 1 {
            gauss = gauss + T::lit(WG[j / 2]) * s;
        }
    }
    Segment {
        a,
        b,
        value: kronrod * h,
        error: ((kronrod - gauss) * h).abs(),
    }
}

/// Integrates `f` over `[a, b]` to absolute tolerance `tol`, bisecting the
/// segment with the largest error estimate until the summed estimate drops
/// below `tol` or `max_segments` is reached.
pub fn integrate<T: Scalar, F: FnMut(T) -> T>(
    mut f: F,
    a: T,
    b: T,
    tol: T,
    max_segments: usize,
) -> QuadResult<T> {
    let mut segments = vec![gk15(&mut f, a, b)];
    let mut evaluations = 15;
    loop {
        let (value, error) = segments.iter().fold((T::zero(), T::zero()), |(v, e), s| {
            (v + s.value, e + s.error)
        });
        let converged = error <= tol;
        if converged || segments.len() >= max_segments || !value.is_finite() {
            return QuadResult {
                value,
                error,
                evaluations,
                converged: converged && value.is_finite(),
            };
        }
        let worst = segments
            .iter()
            .enumerate()
            .max_by(|x, y| {
                x.1.error
                    .partial_cmp(&y.1.error)
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
            .map(|(i, _)| i)
            .expect("non-empty");
        let s = segments.swap_remove(worst);
        let mid = T::lit(0.5) * (s.a + s.b);
        if !(mid > s.a && mid < s.b) {
            // interval cannot be split further in this precision
            return QuadResult {
                value,
                error,
                evaluations,
                converged: false,
            };
        }
        segments.push(gk15(&mut f, s.a, mid));
        segments.push(gk15(&mut f, mid, s.b));
        evaluations += 30;
    }
}

#[derive(Debug, Clone)]
struct VecSegment<T> {
    a: T,
    b: T,
    value: Vec<T>,
    error: Vec<T>,
    worst: T,
}

fn gk15_many<T: Scalar, F: FnMut(T, &mut [T])>(
    f: &mut F,
    a: T,
    b: T,
    buf: &mut [T],
    tmp: &mut [T],
) -> VecSegment<T> {
    let dim = buf.len();
    let half = T::lit(0.5);
    let center = half * (a + b);
    let h = half * (b - a);
    let mut kronrod = vec![T::zero(); dim];
    let mut gauss = vec![T::zero(); dim];
    f(center, buf);
    for d in 0..dim {
        kronrod[d] = buf[d] * T::lit(WGK[7]);
        gauss[d] = buf[d] * T::lit(WG[3]);
    }
    for j in 0..7 {
        let dx = h * T::lit(XGK[j]);
        f(center - dx, buf);
        f(center + dx, tmp);
        for d in 0..dim {
            let s = buf[d] + tmp[d];
            kronrod[d] = kronrod[d] + T::lit(WGK[j]) * s;
            if j % 2 == 1 {
                gauss[d] = gauss[d] + T::lit(WG[j / 2]) * s;
            }
        }
    }
    let mut worst = T::zero();
    let mut error = vec![T::zero(); dim];
    for d in 0..dim {
        error[d] = ((kronrod[d] - gauss[d]) * h).abs();
        // NaN propagates so that non-finite segments are refined first
        worst = if error[d] > worst || error[d].is_nan() {
            error[d]
        } else {
            worst
        };
        kronrod[d] = kronrod[d] * h;
    }
    VecSegment {
        a,
        b,
        value: kronrod,
        error,
        worst,
    }
}

/// Result of [`integrate_many`]; `error` is the largest per-component estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadResultMany<T> {
    pub values: Vec<T>,
    pub error: T,
    pub evaluations: usize,
    pub converged: bool,
}

/// Vector-valued version of [`integrate`]: `f(x, out)` fills all `dim`
/// components at once, and every component must meet `tol`.
pub fn integrate_many<T: Scalar, F: FnMut(T, &mut [T])>(
    mut f: F,
    dim: usize,
    a: T,
    b: T,
    tol: T,
    max_segments: usize,
) -> QuadResultMany<T> {
    let mut buf = vec![T::zero(); dim];
    let mut tmp = vec![T::zero(); dim];
    let mut segments = vec![gk15_many(&mut f, a, b, &mut buf, &mut tmp)];
    let mut evaluations = 15;
    loop {
        let mut values = vec![T::zero(); dim];
        let mut errors = vec![T::zero(); dim];
        for s in &segments {
            for d in 0..dim {
                values[d] = values[d] + s.value[d];
                errors[d] = errors[d] + s.error[d];
            }
        }
        let error = errors
            .iter()
            .fold(T::zero(), |m, &e| if e > m || e.is_nan() { e } else { m });
        let finite = values.iter().all(|v| v.is_finite());
        let converged = error <= tol;
        if converged || segments.len() >= max_segments || !finite {
            return QuadResultMany {
                values,
                error,
                evaluations,
                converged: converged && finite,
            };
        }
        let worst = segments
            .iter()
            .enumerate()
            .max_by(|x, y| {
                x.1.worst
                    .partial_cmp(&y.1.worst)
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
            .map(|(i, _)| i)
            .expect("non-empty");
        let s = segments.swap_remove(worst);
        let mid = T::lit(0.5) * (s.a + s.b);
        if !(mid > s.a && mid < s.b) {
            return QuadResultMany {
                values,
                error,
                evaluations,
                converged: false,
            };
        }
        segments.push(gk15_many(&mut f, s.a, mid, &mut buf, &mut tmp));
        segments.push(gk15_many(&mut f, mid, s.b, &mut buf, &mut tmp));
        evaluations += 30;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomials_are_exact() {
        let r = integrate(|x: f64| x.powi(7) - 3.0 * x * x, 0.0, 2.0, 1e-13, 1);
        assert!((r.value - (32.0 - 8.0)).abs() < 1e-12);
        assert!(r.converged);
    }

    #[test]
    fn oscillatory_integrand() {
        let r = integrate(
            |x: f64| (20.0 * x).cos() / (1.0 + x * x),
            0.0,
            10.0,
            1e-12,
            500,
        );
        assert!(r.converged);
        // independent check with a fine composite Simpson rule
        let n = 200_000;
        let h = 10.0 / n as f64;
        let g = |x: f64| (20.0 * x).cos() / (1.0 + x * x);
        let mut s = g(0.0) + g(10.0);
        for i in 1..n {
            s += if i % 2 == 1 { 4.0 } else { 2.0 } * g(i as f64 * h);
        }
        s *= h / 3.0;
        assert!((r.value - s).abs() < 1e-10, "{} vs {}", r.value, s);
    }

    #[test]
    fn gaussian_integral() {
        let r = integrate(|x: f64| (-x * x).exp(), -8.0, 8.0, 1e-13, 200);
        assert!((r.value - std::f64::consts::PI.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn vector_version_meets_tolerance_per_component() {
        let r = integrate_many(
            |x: f64, out: &mut [f64]| {
                out[0] = (-x * x).exp();
                out[1] = (20.0 * x).cos() / (1.0 + x * x);
                out[2] = x.powi(3);
            },
            3,
            0.0,
            4.0,
            1e-12,
            500,
        );
        assert!(r.converged);
        let g = integrate(|x: f64| (-x * x).exp(), 0.0, 4.0, 1e-13, 500).value;
        let o = integrate(
            |x: f64| (20.0 * x).cos() / (1.0 + x * x),
            0.0,
            4.0,
            1e-13,
            500,
        )
        .value;
        assert!((r.values[0] - g).abs() < 2e-12);
        assert!((r.values[1] - o).abs() < 2e-12);
        assert!((r.values[2] - 64.0).abs() < 1e-11);
    }

    #[test]
    fn segment_cap_reports_non_convergence() {
        let r = integrate(|x: f64| (1.0 / x).sin(), 1e-6, 1.0, 1e-14, 4);
        assert!(!r.converged);
    }
}
