//! Angles on the flat torus and the sup-metric used for balls and nets.

use crate::scalar::{lit, two_pi, Real};

/// Reduces an angle into `[0, 2π)`.
#[inline]
pub fn wrap<T: Real>(x: T) -> T {
    let tau = two_pi::<T>();
    let mut r = x % tau;
    if r < T::zero() {
        r += tau;
    }
    if r >= tau {
        r -= tau;
    }
    r
}

/// Signed representative of `x` in `[-π, π)`.
#[inline]
pub fn wrap_signed<T: Real>(x: T) -> T {
    let pi = T::PI();
    wrap(x + pi) - pi
}

/// Shortest angular distance between two angles.
#[inline]
pub fn circle_distance<T: Real>(a: T, b: T) -> T {
    wrap_signed(a - b).abs()
}

/// Torus sup-metric: the largest componentwise shortest angular distance.
pub fn torus_distance<T: Real>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(&x, &y)| circle_distance(x, y))
        .fold(T::zero(), T::max)
}

/// Sup-norm of a vector.
pub fn sup_norm<T: Real>(v: &[T]) -> T {
    v.iter().map(|x| x.abs()).fold(T::zero(), T::max)
}

pub fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

/// `ω·k` for an integer mode.
pub fn dot_int<T: Real>(omega: &[T], k: &[i64]) -> T {
    omega
        .iter()
        .zip(k)
        .fold(T::zero(), |acc, (&w, &ki)| acc + w * crate::scalar::from_i64(ki))
}

/// Euclidean norm of an integer mode.
pub fn int_norm<T: Real>(k: &[i64]) -> T {
    let s: i64 = k.iter().map(|x| x * x).sum();
    crate::scalar::from_i64::<T>(s).sqrt()
}

/// `A + s ω`, wrapped.
pub fn shift<T: Real>(a: &[T], omega: &[T], s: T) -> Vec<T> {
    a.iter().zip(omega).map(|(&x, &w)| wrap(x + w * s)).collect()
}

#[inline]
pub fn half<T: Real>() -> T {
    lit(0.5)
}
