//! Small direct solvers: a banded LU with partial pivoting for the
//! boundary-value problems, and a dense LU for the torus Newton step.

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone)]
struct BandRow<T> {
    start: usize,
    vals: Vec<T>,
}

impl<T: Real> BandRow<T> {
    fn end(&self) -> usize {
        self.start + self.vals.len()
    }

    fn get(&self, c: usize) -> T {
        if c < self.start || c >= self.end() {
            T::zero()
        } else {
            self.vals[c - self.start]
        }
    }

    fn cover(&mut self, lo: usize, hi: usize) {
        if self.vals.is_empty() {
            self.start = lo;
            self.vals = vec![T::zero(); hi - lo];
            return;
        }
        if lo < self.start {
            let mut v = vec![T::zero(); self.start - lo];
            v.extend_from_slice(&self.vals);
            self.vals = v;
            self.start = lo;
        }
        if hi > self.end() {
            let extra = hi - self.end();
            self.vals.extend(std::iter::repeat(T::zero()).take(extra));
        }
    }
}

/// Square matrix with at most `lower` sub-diagonals, assembled entry by entry.
#[derive(Debug, Clone)]
pub struct BandedMatrix<T> {
    lower: usize,
    rows: Vec<BandRow<T>>,
}

impl<T: Real> BandedMatrix<T> {
    pub fn new(n: usize, lower: usize) -> Self {
        Self {
            lower,
            rows: (0..n)
                .map(|_| BandRow {
                    start: 0,
                    vals: Vec::new(),
                })
                .collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.rows.len()
    }

    pub fn add(&mut self, r: usize, c: usize, v: T) {
        debug_assert!(c + self.lower >= r, "entry outside the declared lower band");
        let row = &mut self.rows[r];
        row.cover(c, c + 1);
        row.vals[c - row.start] += v;
    }

    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        self.rows
            .iter()
            .map(|row| {
                row.vals
                    .iter()
                    .enumerate()
                    .fold(T::zero(), |s, (j, &a)| s + a * x[row.start + j])
            })
            .collect()
    }

    /// Gaussian elimination with partial pivoting restricted to the band.
    pub fn solve(mut self, rhs: &[T]) -> Result<Vec<T>> {
        let n = self.dim();
        assert_eq!(rhs.len(), n);
        let mut b = rhs.to_vec();
        for i in 0..n {
            let last = (i + self.lower + 1).min(n);
            let mut piv = i;
            let mut best = self.rows[i].get(i).abs();
            for r in i + 1..last {
                let v = self.rows[r].get(i).abs();
                if v > best {
                    best = v;
                    piv = r;
                }
            }
            if best == T::zero() || !best.is_finite() {
                return Err(Error::NonConvergence {
                    residual: f64::NAN,
                    context: format!("singular banded matrix at column {i}"),
                });
            }
            if piv != i {
                self.rows.swap(i, piv);
                b.swap(i, piv);
            }
            let (head, tail) = self.rows.split_at_mut(i + 1);
            let prow = &head[i];
            let pval = prow.get(i);
            let bi = b[i];
            for (off, row) in tail.iter_mut().take(last - i - 1).enumerate() {
                let a = row.get(i);
                if a == T::zero() {
                    continue;
                }
                let factor = a / pval;
                // entries left of column i are already eliminated
                row.cover(i, prow.end().max(row.end()));
                for c in i..prow.end() {
                    let idx = c - row.start;
                    row.vals[idx] -= factor * prow.vals[c - prow.start];
                }
                b[i + 1 + off] -= factor * bi;
            }
        }
        let mut x = vec![T::zero(); n];
        for i in (0..n).rev() {
            let row = &self.rows[i];
            let mut s = b[i];
            for c in (i + 1)..row.end() {
                s -= row.vals[c - row.start] * x[c];
            }
            x[i] = s / row.get(i);
        }
        Ok(x)
    }
}

/// Dense row-major square matrix.
#[derive(Debug, Clone)]
pub struct DenseMatrix<T> {
    n: usize,
    data: Vec<T>,
}

impl<T: Real> DenseMatrix<T> {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![T::zero(); n * n],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> T {
        self.data[r * self.n + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: T) {
        self.data[r * self.n + c] = v;
    }

    #[inline]
    pub fn add(&mut self, r: usize, c: usize, v: T) {
        self.data[r * self.n + c] += v;
    }

    /// LU with partial pivoting, consuming the matrix.
    pub fn solve(mut self, rhs: &[T]) -> Result<Vec<T>> {
        let n = self.n;
        let mut b = rhs.to_vec();
        for k in 0..n {
            let (piv, best) = (k..n)
                .map(|r| (r, self.get(r, k).abs()))
                .fold((k, T::neg_infinity()), |acc, x| if x.1 > acc.1 { x } else { acc });
            if best == T::zero() || !best.is_finite() {
                return Err(Error::NonConvergence {
                    residual: f64::NAN,
                    context: format!("singular dense matrix at column {k}"),
                });
            }
            if piv != k {
                for c in 0..n {
                    self.data.swap(k * n + c, piv * n + c);
                }
                b.swap(k, piv);
            }
            let p = self.get(k, k);
            let bk = b[k];
            for r in k + 1..n {
                let f = self.get(r, k) / p;
                if f == T::zero() {
                    continue;
                }
                for c in k..n {
                    let v = self.get(k, c);
                    self.data[r * n + c] -= f * v;
                }
                b[r] -= f * bk;
            }
        }
        let mut x = vec![T::zero(); n];
        for i in (0..n).rev() {
            let mut s = b[i];
            for c in i + 1..n {
                s -= self.get(i, c) * x[c];
            }
            x[i] = s / self.get(i, i);
        }
        Ok(x)
    }
}
