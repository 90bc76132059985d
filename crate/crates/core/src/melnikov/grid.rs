//! Homoclinic functions sampled on uniform grids, their discrete Fourier
//! coefficients, and synthesis of local patches from those coefficients.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use num_complex::Complex;
use rayon::prelude::*;

use crate::angles::wrap_signed;
use crate::error::{Error, Result};
use crate::fourier::{bin_to_mode, dft_forward, linear_index, mode_to_bin, multi_index, Mode};
use crate::frequencies::PerturbationSeries;
use crate::pendulum::{InvariantTorus, SolverOptions};
use crate::scalar::{from_i64, from_usize, lit, Real};

/// Which function a grid samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridKind {
    /// `G_μ(A) = F_μ(A, 0)`.
    Glued,
    /// `G̃_μ(A)` from the constrained problem.
    Reduced,
    /// `𝒢_μ(A)` from the translated problem.
    General,
    /// `Γ(A)`.
    Melnikov,
    /// `M(A)`.
    MelnikovGeneral,
    /// Values supplied by the caller or synthesized from coefficients.
    Sampled,
}

impl GridKind {
    pub fn name(self) -> &'static str {
        match self {
            GridKind::Glued => "glued",
            GridKind::Reduced => "reduced",
            GridKind::General => "general",
            GridKind::Melnikov => "melnikov",
            GridKind::MelnikovGeneral => "melnikov-general",
            GridKind::Sampled => "sampled",
        }
    }
}

impl FromStr for GridKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "glued" => GridKind::Glued,
            "reduced" => GridKind::Reduced,
            "general" => GridKind::General,
            "melnikov" => GridKind::Melnikov,
            "melnikov-general" => GridKind::MelnikovGeneral,
            "sampled" => GridKind::Sampled,
            other => return Err(Error::Config(format!("unknown grid kind '{other}'"))),
        })
    }
}

/// Lattice `origin + i ⊙ spacing`, `0 ≤ i < shape`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec<T> {
    pub shape: Vec<usize>,
    pub origin: Vec<T>,
    pub spacing: Vec<T>,
}

impl<T: Real> GridSpec<T> {
    /// `A_j = 2π j / N` on every axis.
    pub fn full_torus(shape: &[usize]) -> Self {
        Self {
            shape: shape.to_vec(),
            origin: vec![T::zero(); shape.len()],
            spacing: shape.iter().map(|&n| T::TAU() / from_usize::<T>(n)).collect(),
        }
    }

    /// Patch of `shape` points centred on `center` with the given spacing.
    pub fn centered_patch(center: &[T], spacing: T, shape: &[usize]) -> Self {
        let half = lit::<T>(0.5);
        Self {
            shape: shape.to_vec(),
            origin: center
                .iter()
                .zip(shape)
                .map(|(&c, &n)| c - half * spacing * from_usize::<T>(n - 1))
                .collect(),
            spacing: vec![spacing; shape.len()],
        }
    }

    pub fn dim(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_full_torus(&self) -> bool {
        self.shape.iter().zip(&self.spacing).all(|(&n, &h)| {
            let span = h * from_usize::<T>(n);
            (span - T::TAU()).abs() <= lit::<T>(1e-12) * T::TAU()
        })
    }

    pub fn max_spacing(&self) -> T {
        self.spacing.iter().fold(T::zero(), |m, &h| m.max(h))
    }

    pub fn point(&self, lin: usize) -> Vec<T> {
        let idx = multi_index(lin, &self.shape);
        idx.iter()
            .zip(&self.origin)
            .zip(&self.spacing)
            .map(|((&i, &o), &h)| o + h * from_usize::<T>(i))
            .collect()
    }

    fn validate(&self) -> Result<()> {
        let n = self.shape.len();
        if n == 0 || self.origin.len() != n || self.spacing.len() != n {
            return Err(Error::invalid("grid shape, origin and spacing must have equal length"));
        }
        if self.shape.iter().any(|&s| s < 2) {
            return Err(Error::invalid("every grid axis needs at least two points"));
        }
        if self.spacing.iter().any(|&h| !(h > T::zero()) || !h.is_finite()) {
            return Err(Error::invalid("grid spacing must be positive"));
        }
        Ok(())
    }
}

/// A homoclinic function sampled on a [`GridSpec`], values in row-major order.
#[derive(Debug, Clone)]
pub struct HomoclinicGrid<T> {
    pub kind: GridKind,
    pub mu: T,
    pub spec: GridSpec<T>,
    pub values: Vec<T>,
}

impl<T: Real> HomoclinicGrid<T> {
    pub fn new(kind: GridKind, mu: T, spec: GridSpec<T>, values: Vec<T>) -> Result<Self> {
        spec.validate()?;
        if values.len() != spec.len() {
            return Err(Error::invalid(format!(
                "grid has {} points but {} values were given",
                spec.len(),
                values.len()
            )));
        }
        Ok(Self { kind, mu, spec, values })
    }

    /// Samples `value(A)` at every grid point.
    pub fn from_fn(kind: GridKind, mu: T, spec: GridSpec<T>, value: impl Fn(&[T]) -> T + Sync) -> Result<Self> {
        spec.validate()?;
        let values = (0..spec.len()).into_par_iter().map(|i| value(&spec.point(i))).collect();
        Self::new(kind, mu, spec, values)
    }

    pub fn dim(&self) -> usize {
        self.spec.dim()
    }

    /// Smallest sample and its linear index (first one on ties).
    pub fn argmin(&self) -> (usize, T) {
        let mut best = (0, self.values[0]);
        for (i, &v) in self.values.iter().enumerate() {
            if v < best.1 {
                best = (i, v);
            }
        }
        best
    }

    pub fn range(&self) -> (T, T) {
        self.values
            .iter()
            .fold((T::infinity(), T::neg_infinity()), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }

    /// Offset of `x` from the origin along each axis in grid units; angles
    /// are reduced to the representative nearest to the patch.
    pub fn local_coordinates(&self, x: &[T]) -> Vec<T> {
        let half = lit::<T>(0.5);
        (0..self.dim())
            .map(|d| {
                let h = self.spec.spacing[d];
                let mid = self.spec.origin[d] + half * h * from_usize::<T>(self.spec.shape[d] - 1);
                let off = mid + wrap_signed(x[d] - mid) - self.spec.origin[d];
                off / h
            })
            .collect()
    }

    /// Multilinear interpolation; periodic on full-torus grids, `None`
    /// outside a patch.
    pub fn interpolate(&self, x: &[T]) -> Option<T> {
        let n = self.dim();
        let full = self.spec.is_full_torus();
        let u = self.local_coordinates(x);
        let mut base = vec![0usize; n];
        let mut frac = vec![T::zero(); n];
        let eps = lit::<T>(1e-9);
        for d in 0..n {
            let len = self.spec.shape[d];
            let mut ud = u[d];
            if full {
                let l = from_usize::<T>(len);
                ud = ud - (ud / l).floor() * l;
            } else if ud < -eps || ud > from_usize::<T>(len - 1) + eps {
                return None;
            }
            let mut i = ud.floor().to_usize().unwrap_or(0);
            if !full && i >= len - 1 {
                i = len - 2;
            }
            if full && i >= len {
                i = len - 1;
            }
            base[d] = i;
            frac[d] = (ud - from_usize::<T>(i)).max(T::zero()).min(T::one());
        }
        let mut acc = T::zero();
        let mut idx = vec![0usize; n];
        for corner in 0..(1usize << n) {
            let mut w = T::one();
            for d in 0..n {
                let up = (corner >> d) & 1 == 1;
                let i = if up { base[d] + 1 } else { base[d] };
                idx[d] = if full { i % self.spec.shape[d] } else { i };
                w *= if up { frac[d] } else { T::one() - frac[d] };
            }
            if w != T::zero() {
                acc += w * self.values[linear_index(&idx, &self.spec.shape)];
            }
        }
        Some(acc)
    }

    /// Text form: `#` header lines, then one row per index of all but the
    /// last axis.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# kind {}", self.kind.name());
        let _ = writeln!(s, "# mu {:.17e}", self.mu);
        let _ = writeln!(s, "# shape {}", join(&self.spec.shape, |x| x.to_string()));
        let _ = writeln!(s, "# origin {}", join(&self.spec.origin, |x| format!("{x:.17e}")));
        let _ = writeln!(s, "# spacing {}", join(&self.spec.spacing, |x| format!("{x:.17e}")));
        let row = *self.spec.shape.last().unwrap();
        for chunk in self.values.chunks(row) {
            let _ = writeln!(s, "{}", join(chunk, |x| format!("{x:.17e}")));
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut kind = GridKind::Sampled;
        let mut mu = T::zero();
        let mut shape: Option<Vec<usize>> = None;
        let mut origin: Option<Vec<T>> = None;
        let mut spacing: Option<Vec<T>> = None;
        let mut values = Vec::new();
        for (ln, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let perr = |msg: String| Error::Parse { line: ln + 1, msg };
            if let Some(rest) = line.strip_prefix('#') {
                let mut it = rest.split_whitespace();
                let key = it.next().unwrap_or("");
                let vals: Vec<&str> = it.collect();
                match key {
                    "kind" => kind = vals.first().copied().unwrap_or("sampled").parse()?,
                    "mu" => mu = parse_num(vals.first().copied().unwrap_or(""), ln)?,
                    "shape" => {
                        shape = Some(
                            vals.iter()
                                .map(|v| v.parse::<usize>().map_err(|e| perr(e.to_string())))
                                .collect::<Result<_>>()?,
                        )
                    }
                    "origin" => origin = Some(vals.iter().map(|v| parse_num(v, ln)).collect::<Result<_>>()?),
                    "spacing" => spacing = Some(vals.iter().map(|v| parse_num(v, ln)).collect::<Result<_>>()?),
                    _ => {}
                }
                continue;
            }
            for tok in line.split_whitespace() {
                values.push(parse_num(tok, ln)?);
            }
        }
        let shape = shape.ok_or_else(|| Error::Parse { line: 0, msg: "missing '# shape' header".into() })?;
        let spec = match (origin, spacing) {
            (Some(o), Some(h)) => GridSpec { shape, origin: o, spacing: h },
            _ => GridSpec::full_torus(&shape),
        };
        Self::new(kind, mu, spec, values)
    }
}

fn parse_num<T: Real>(tok: &str, ln: usize) -> Result<T> {
    let v: f64 = tok.parse().map_err(|e: std::num::ParseFloatError| Error::Parse {
        line: ln + 1,
        msg: format!("'{tok}': {e}"),
    })?;
    Ok(lit(v))
}

fn join<X>(xs: &[X], f: impl Fn(&X) -> String) -> String {
    xs.iter().map(f).collect::<Vec<_>>().join(" ")
}

/// Samples one of the homoclinic functions on a grid with `θ = 0`. Points
/// are processed in parallel and collected in grid order.
pub fn evaluate_grid<T: Real>(
    kind: GridKind,
    mu: T,
    spec: GridSpec<T>,
    omega: &[T],
    f: &PerturbationSeries<T>,
    torus: Option<&InvariantTorus<T>>,
    opts: &SolverOptions<T>,
) -> Result<HomoclinicGrid<T>> {
    spec.validate()?;
    if spec.dim() != omega.len() || f.dim() != omega.len() {
        return Err(Error::invalid("grid, frequency and perturbation dimensions differ"));
    }
    let theta = T::zero();
    let values: Result<Vec<T>> = (0..spec.len())
        .into_par_iter()
        .map(|i| {
            let a = spec.point(i);
            match kind {
                GridKind::Glued => super::action_glued(mu, &a, theta, omega, f, opts),
                GridKind::Reduced => super::action_reduced(mu, &a, theta, omega, f, opts),
                GridKind::General => {
                    let torus = torus.ok_or_else(|| Error::invalid("general grid needs an invariant torus"))?;
                    super::action_general(mu, &a, theta, torus, f, opts)
                }
                GridKind::Melnikov => Ok(super::melnikov_series(&a, omega, f).0),
                GridKind::MelnikovGeneral => super::melnikov_general(&a, omega, f),
                GridKind::Sampled => Err(Error::invalid("sampled grids cannot be evaluated")),
            }
        })
        .collect();
    HomoclinicGrid::new(kind, mu, spec, values?)
}

/// Fourier coefficients of a full-torus grid.
#[derive(Debug, Clone)]
pub struct FourierTable<T> {
    pub kind: GridKind,
    pub mu: T,
    pub shape: Vec<usize>,
    /// Coefficients in DFT bin layout.
    pub bins: Vec<Complex<T>>,
    /// Largest `|c_k|` on the outermost resolved shell; aliasing of the
    /// retained coefficients is of this order.
    pub aliasing_bound: T,
}

impl<T: Real> FourierTable<T> {
    pub fn coefficient(&self, k: &[i64]) -> Option<Complex<T>> {
        let idx: Option<Vec<usize>> = k.iter().zip(&self.shape).map(|(&kd, &n)| mode_to_bin(kd, n)).collect();
        idx.map(|i| self.bins[linear_index(&i, &self.shape)])
    }

    pub fn modes(&self) -> BTreeMap<Mode, Complex<T>> {
        (0..self.bins.len())
            .map(|lin| {
                let idx = multi_index(lin, &self.shape);
                let k: Mode = idx.iter().zip(&self.shape).map(|(&m, &n)| bin_to_mode(m, n)).collect();
                (k, self.bins[lin])
            })
            .collect()
    }

    /// `Re Σ c_k e^{i k·A}`.
    pub fn evaluate(&self, a: &[T]) -> T {
        self.modes()
            .iter()
            .map(|(k, c)| {
                let ang = crate::angles::dot_int(a, k);
                (c * Complex::new(ang.cos(), ang.sin())).re
            })
            .fold(T::zero(), |s, x| s + x)
    }

    /// `Σ_{k_rest} c_{(k_0, k_rest)} e^{i k_rest·A_rest}` for a fixed first
    /// index, as a function of the remaining angles.
    pub fn slice_first(&self, k0: i64, rest: &[T]) -> Complex<T> {
        self.modes()
            .iter()
            .filter(|(k, _)| k[0] == k0)
            .fold(Complex::new(T::zero(), T::zero()), |acc, (k, c)| {
                let ang = crate::angles::dot_int(rest, &k[1..]);
                acc + c * Complex::new(ang.cos(), ang.sin())
            })
    }

    /// Text table `k_1 … k_n re im`, one mode per line.
    pub fn to_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# fourier kind {} mu {:.17e}", self.kind.name(), self.mu);
        let _ = writeln!(s, "# shape {}", join(&self.shape, |x| x.to_string()));
        let _ = writeln!(s, "# aliasing_bound {:.17e}", self.aliasing_bound);
        for (k, c) in self.modes() {
            let _ = writeln!(s, "{} {:.17e} {:.17e}", join(&k, |x| x.to_string()), c.re, c.im);
        }
        s
    }
}

/// DFT of a full-torus grid. Patches and non-uniform grids are refused.
pub fn fourier_of_grid<T: Real>(grid: &HomoclinicGrid<T>) -> Result<FourierTable<T>> {
    let spec = &grid.spec;
    if !spec.is_full_torus() {
        return Err(Error::NonUniformGrid("the grid does not span the full torus with spacing 2π/N".into()));
    }
    if spec.origin.iter().any(|o| o.abs() > lit(1e-12)) {
        return Err(Error::NonUniformGrid("full-torus grids must start at A = 0".into()));
    }
    let bins = dft_forward(&grid.values, &spec.shape);
    let mut alias = T::zero();
    for (lin, c) in bins.iter().enumerate() {
        let idx = multi_index(lin, &spec.shape);
        let outer = idx
            .iter()
            .zip(&spec.shape)
            .any(|(&m, &n)| bin_to_mode(m, n).unsigned_abs() as usize >= n / 2);
        if outer {
            alias = alias.max(c.norm());
        }
    }
    Ok(FourierTable {
        kind: grid.kind,
        mu: grid.mu,
        shape: spec.shape.clone(),
        bins,
        aliasing_bound: alias,
    })
}

/// Evaluates a coefficient table on an arbitrary lattice by separable
/// synthesis, one axis at a time.
pub fn synthesize_grid<T: Real>(table: &FourierTable<T>, spec: GridSpec<T>) -> Result<HomoclinicGrid<T>> {
    spec.validate()?;
    let n = table.shape.len();
    if spec.dim() != n {
        return Err(Error::invalid("table and grid dimensions differ"));
    }
    let zero = Complex::new(T::zero(), T::zero());
    let mut data = table.bins.clone();
    let mut dims = table.shape.clone();
    for axis in 0..n {
        let len_in = dims[axis];
        let len_out = spec.shape[axis];
        let modes: Vec<i64> = (0..len_in).map(|m| bin_to_mode(m, len_in)).collect();
        let basis: Vec<Complex<T>> = (0..len_out)
            .flat_map(|p| {
                let x = spec.origin[axis] + spec.spacing[axis] * from_usize::<T>(p);
                modes
                    .iter()
                    .map(move |&k| {
                        let a = from_i64::<T>(k) * x;
                        Complex::new(a.cos(), a.sin())
                    })
                    .collect::<Vec<_>>()
            })
            .collect();
        let outer: usize = dims[..axis].iter().product();
        let inner: usize = dims[axis + 1..].iter().product();
        let mut out = vec![zero; outer * len_out * inner];
        out.par_chunks_mut(len_out * inner).enumerate().for_each(|(o, block)| {
            let src = &data[o * len_in * inner..(o + 1) * len_in * inner];
            for p in 0..len_out {
                let row = &basis[p * len_in..(p + 1) * len_in];
                let dst = &mut block[p * inner..(p + 1) * inner];
                for (m, &b) in row.iter().enumerate() {
                    let s = &src[m * inner..(m + 1) * inner];
                    for (d, &v) in dst.iter_mut().zip(s) {
                        *d = *d + b * v;
                    }
                }
            }
        });
        data = out;
        dims[axis] = len_out;
    }
    let values = data.into_iter().map(|c| c.re).collect();
    HomoclinicGrid::new(GridKind::Sampled, table.mu, spec, values)
}
