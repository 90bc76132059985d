//! Quadrature and finite-difference helpers.
//!
//! `adaptive` is a globally adaptive Gauss–Kronrod (7, 15) scheme; the
//! uniform-grid helpers serve the boundary-value solvers, whose samples live
//! on equispaced nodes.

use crate::error::{Error, Result};
use crate::scalar::{lit, Real};

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
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_94,
    0.417_959_183_673_469_4,
];

#[derive(Debug, Clone, Copy)]
pub struct QuadOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_intervals: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self {
            abs_tol: 1e-13,
            rel_tol: 1e-12,
            max_intervals: 4000,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct QuadResult<T> {
    pub value: T,
    pub error: T,
    pub evaluations: usize,
}

fn kronrod<T: Real, F: FnMut(T) -> T>(f: &mut F, a: T, b: T) -> (T, T) {
    let half = lit::<T>(0.5);
    let c = half * (a + b);
    let h = half * (b - a);
    let fc = f(c);
    let mut resk = fc * lit(WGK[7]);
    let mut resg = fc * lit(WG[3]);
    for j in 0..7 {
        let x = h * lit(XGK[j]);
        let s = f(c - x) + f(c + x);
        resk += s * lit(WGK[j]);
        if j % 2 == 1 {
            resg += s * lit(WG[j / 2]);
        }
    }
    (resk * h, ((resk - resg) * h).abs())
}

/// Globally adaptive Gauss–Kronrod quadrature on `[a, b]`, starting from
/// `pieces` equal subintervals.
pub fn adaptive<T: Real, F: FnMut(T) -> T>(
    mut f: F,
    a: T,
    b: T,
    pieces: usize,
    opts: &QuadOptions,
) -> Result<QuadResult<T>> {
    let pieces = pieces.max(1);
    let width = (b - a) / crate::scalar::from_usize(pieces);
    let mut intervals: Vec<(T, T, T, T)> = (0..pieces)
        .map(|i| {
            let lo = a + width * crate::scalar::from_usize(i);
            let hi = if i + 1 == pieces { b } else { lo + width };
            let (v, e) = kronrod(&mut f, lo, hi);
            (lo, hi, v, e)
        })
        .collect();
    let mut evaluations = 15 * pieces;
    loop {
        let total: T = intervals.iter().fold(T::zero(), |s, iv| s + iv.2);
        let err: T = intervals.iter().fold(T::zero(), |s, iv| s + iv.3);
        let goal = lit::<T>(opts.abs_tol).max(lit::<T>(opts.rel_tol) * total.abs());
        if err <= goal {
            return Ok(QuadResult {
                value: total,
                error: err,
                evaluations,
            });
        }
        if intervals.len() >= opts.max_intervals {
            return Err(Error::Quadrature {
                estimate: crate::scalar::to_f64(err),
            });
        }
        let (worst, _) = intervals
            .iter()
            .enumerate()
            .fold((0, T::neg_infinity()), |(bi, be), (i, iv)| {
                if iv.3 > be {
                    (i, iv.3)
                } else {
                    (bi, be)
                }
            });
        let (lo, hi, _, _) = intervals.swap_remove(worst);
        let mid = lit::<T>(0.5) * (lo + hi);
        if !(mid > lo && mid < hi) {
            // interval exhausted at machine resolution
            return Err(Error::Quadrature {
                estimate: crate::scalar::to_f64(err),
            });
        }
        let (v1, e1) = kronrod(&mut f, lo, mid);
        let (v2, e2) = kronrod(&mut f, mid, hi);
        evaluations += 30;
        intervals.push((lo, mid, v1, e1));
        intervals.push((mid, hi, v2, e2));
    }
}

/// Composite Simpson rule over equispaced samples. An odd number of
/// intervals is handled by closing with a 3/8 panel.
pub fn simpson<T: Real>(y: &[T], h: T) -> T {
    let n = y.len();
    match n {
        0 | 1 => T::zero(),
        2 => lit::<T>(0.5) * h * (y[0] + y[1]),
        3 => h / lit(3.0) * (y[0] + lit::<T>(4.0) * y[1] + y[2]),
        _ => {
            let intervals = n - 1;
            let (simpson_end, tail) = if intervals % 2 == 0 {
                (n - 1, T::zero())
            } else {
                let k = n - 4;
                let t = lit::<T>(3.0) * h / lit(8.0)
                    * (y[k] + lit::<T>(3.0) * (y[k + 1] + y[k + 2]) + y[k + 3]);
                (k, t)
            };
            let mut s = y[0] + y[simpson_end];
            for (i, &v) in y.iter().enumerate().take(simpson_end).skip(1) {
                s += if i % 2 == 1 { lit::<T>(4.0) * v } else { lit::<T>(2.0) * v };
            }
            s * h / lit(3.0) + tail
        }
    }
}

/// Fourth-order finite-difference derivative of equispaced samples, using
/// one-sided five-point stencils near both ends.
pub fn derivative4<T: Real>(y: &[T], h: T) -> Vec<T> {
    let n = y.len();
    assert!(n >= 5, "derivative4 needs at least five samples");
    let c = |a: f64| lit::<T>(a);
    let inv = T::one() / (c(12.0) * h);
    let mut d = vec![T::zero(); n];
    d[0] = (c(-25.0) * y[0] + c(48.0) * y[1] - c(36.0) * y[2] + c(16.0) * y[3] - c(3.0) * y[4]) * inv;
    d[1] = (c(-3.0) * y[0] - c(10.0) * y[1] + c(18.0) * y[2] - c(6.0) * y[3] + y[4]) * inv;
    for i in 2..n - 2 {
        d[i] = (y[i - 2] - c(8.0) * y[i - 1] + c(8.0) * y[i + 1] - y[i + 2]) * inv;
    }
    d[n - 2] = (-y[n - 5] + c(6.0) * y[n - 4] - c(18.0) * y[n - 3] + c(10.0) * y[n - 2] + c(3.0) * y[n - 1]) * inv;
    d[n - 1] = (c(3.0) * y[n - 5] - c(16.0) * y[n - 4] + c(36.0) * y[n - 3] - c(48.0) * y[n - 2]
        + c(25.0) * y[n - 1])
        * inv;
    d
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_kronrod_polynomial_and_gaussian() {
        let r = adaptive(|x: f64| x.powi(5) - 2.0 * x, 0.0, 2.0, 1, &QuadOptions::default()).unwrap();
        assert!((r.value - (64.0 / 6.0 - 4.0)).abs() < 1e-13);
        let r = adaptive(|x: f64| (-x * x).exp(), -10.0, 10.0, 4, &QuadOptions::default()).unwrap();
        assert!((r.value - std::f64::consts::PI.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn simpson_and_derivative_orders() {
        for n in [41usize, 42] {
            let h = 1.0 / (n - 1) as f64;
            let y: Vec<f64> = (0..n).map(|i| (i as f64 * h).exp()).collect();
            assert!((simpson(&y, h) - (1f64.exp() - 1.0)).abs() < 1e-8);
            let d = derivative4(&y, h);
            for (i, di) in d.iter().enumerate() {
                assert!((di - (i as f64 * h).exp()).abs() < 1e-6, "i={i}");
            }
        }
    }
}
