//! Integer modes and discrete Fourier transforms on uniform torus grids.

use num_complex::Complex;

use crate::scalar::{from_i64, from_usize, Real};

/// Integer Fourier mode.
pub type Mode = Vec<i64>;

pub fn sup_norm_int(k: &[i64]) -> i64 {
    k.iter().map(|x| x.abs()).max().unwrap_or(0)
}

/// Calls `f` on every `k ∈ Z^n` with `|k|_∞ = shell`, in lexicographic order.
pub fn for_each_in_shell(n: usize, shell: i64, mut f: impl FnMut(&[i64])) {
    if n == 0 {
        return;
    }
    let mut k = vec![-shell; n];
    loop {
        if sup_norm_int(&k) == shell {
            f(&k);
        }
        let mut i = n;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            if k[i] < shell {
                k[i] += 1;
                for kj in k.iter_mut().skip(i + 1) {
                    *kj = -shell;
                }
                break;
            }
        }
    }
}

/// All modes with `|k|_∞ ≤ max`, shell by shell starting at `k = 0`.
pub fn modes_in_box(n: usize, max: i64) -> Vec<Mode> {
    let mut out = vec![vec![0; n]];
    for s in 1..=max {
        for_each_in_shell(n, s, |k| out.push(k.to_vec()));
    }
    out
}

/// Signed frequency of DFT bin `m` on an axis of `len` points.
pub fn bin_to_mode(m: usize, len: usize) -> i64 {
    let m = m as i64;
    let len = len as i64;
    if m < len - len / 2 {
        m
    } else {
        m - len
    }
}

pub fn mode_to_bin(k: i64, len: usize) -> Option<usize> {
    let l = len as i64;
    let lo = -(l / 2);
    let hi = l - l / 2 - 1;
    if k < lo || k > hi {
        None
    } else {
        Some(k.rem_euclid(l) as usize)
    }
}

/// Row-major linear index of a multi-index.
pub fn linear_index(idx: &[usize], shape: &[usize]) -> usize {
    idx.iter().zip(shape).fold(0, |acc, (&i, &n)| acc * n + i)
}

pub fn multi_index(mut lin: usize, shape: &[usize]) -> Vec<usize> {
    let mut idx = vec![0; shape.len()];
    for d in (0..shape.len()).rev() {
        idx[d] = lin % shape[d];
        lin /= shape[d];
    }
    idx
}

/// Separable forward DFT of real samples on the uniform grid
/// `A_j = 2π j / N` per axis, normalized so that `v(A) = Σ c_k e^{i k·A}`.
/// The output uses the same bin layout as the input.
pub fn dft_forward<T: Real>(values: &[T], shape: &[usize]) -> Vec<Complex<T>> {
    let mut data: Vec<Complex<T>> = values.iter().map(|&v| Complex::new(v, T::zero())).collect();
    let total: usize = shape.iter().product();
    assert_eq!(values.len(), total);
    for axis in 0..shape.len() {
        transform_axis(&mut data, shape, axis, -T::one());
    }
    let norm = T::one() / from_usize::<T>(total);
    data.iter_mut().for_each(|c| *c = *c * norm);
    data
}

/// Inverse of [`dft_forward`] (no normalization), returning complex samples.
pub fn dft_inverse<T: Real>(coeffs: &[Complex<T>], shape: &[usize]) -> Vec<Complex<T>> {
    let mut data = coeffs.to_vec();
    for axis in 0..shape.len() {
        transform_axis(&mut data, shape, axis, T::one());
    }
    data
}

fn transform_axis<T: Real>(data: &mut [Complex<T>], shape: &[usize], axis: usize, sign: T) {
    let len = shape[axis];
    let stride: usize = shape[axis + 1..].iter().product();
    let outer: usize = shape[..axis].iter().product();
    let tau = T::TAU();
    let twiddle: Vec<Complex<T>> = (0..len)
        .map(|j| {
            let ang = sign * tau * from_usize::<T>(j) / from_usize::<T>(len);
            Complex::new(ang.cos(), ang.sin())
        })
        .collect();
    let mut line = vec![Complex::new(T::zero(), T::zero()); len];
    for o in 0..outer {
        for s in 0..stride {
            let base = o * len * stride + s;
            for (j, l) in line.iter_mut().enumerate() {
                *l = data[base + j * stride];
            }
            for m in 0..len {
                let mut acc = Complex::new(T::zero(), T::zero());
                for (j, &l) in line.iter().enumerate() {
                    acc = acc + l * twiddle[(m * j) % len];
                }
                data[base + m * stride] = acc;
            }
        }
    }
}

/// `e^{i k·x}` for a batch of modes.
pub fn phases<T: Real>(modes: &[Mode], x: &[T]) -> Vec<Complex<T>> {
    modes
        .iter()
        .map(|k| {
            let ang = k
                .iter()
                .zip(x)
                .fold(T::zero(), |s, (&ki, &xi)| s + from_i64::<T>(ki) * xi);
            Complex::new(ang.cos(), ang.sin())
        })
        .collect()
}
