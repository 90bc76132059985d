//! Minimum detection on grids and callables, and the coarse window search.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::fourier::{linear_index, multi_index};
use crate::melnikov::HomoclinicGrid;
use crate::scalar::{lit, to_f64, Real};

use super::{evaluate_window, Ball, SplittingReport, SplittingWindow};

/// Located minimum with its local quadratic model.
#[derive(Debug, Clone)]
pub struct MinimumReport<T> {
    pub point: Vec<T>,
    pub value: T,
    pub gradient: Vec<T>,
    pub hessian: Vec<Vec<T>>,
    /// Ascending.
    pub eigenvalues: Vec<T>,
    /// All eigenvalues exceed `1e-6 · max |λ|` and are positive.
    pub nondegenerate: bool,
}

fn to_matrix<T: Real>(h: &[Vec<T>]) -> DMatrix<f64> {
    let n = h.len();
    DMatrix::from_fn(n, n, |i, j| 0.5 * (to_f64(h[i][j]) + to_f64(h[j][i])))
}

fn spectrum<T: Real>(h: &[Vec<T>]) -> (Vec<T>, bool) {
    let eig = SymmetricEigen::new(to_matrix(h));
    let mut ev: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let scale = ev.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let nondeg = scale > 0.0 && ev.iter().all(|&v| v > 1e-6 * scale);
    (ev.into_iter().map(lit).collect(), nondeg)
}

/// Newton step `−H⁻¹ g`, or `None` when `H` is singular.
fn newton_step<T: Real>(h: &[Vec<T>], g: &[T]) -> Option<Vec<T>> {
    let m = to_matrix(h);
    let rhs = DVector::from_iterator(g.len(), g.iter().map(|&x| -to_f64(x)));
    m.lu().solve(&rhs).map(|s| s.iter().map(|&x| lit(x)).collect())
}

/// Grid argmin refined by one Newton step on the central-difference
/// quadratic model. On a patch only interior points are considered.
pub fn find_minimum<T: Real>(grid: &HomoclinicGrid<T>) -> Result<MinimumReport<T>> {
    let spec = &grid.spec;
    let n = grid.dim();
    let full = spec.is_full_torus();
    if spec.shape.iter().any(|&s| s < 3) {
        return Err(Error::Resolution("second differences need three points per axis".into()));
    }
    let interior = |idx: &[usize]| full || idx.iter().zip(&spec.shape).all(|(&i, &s)| i > 0 && i + 1 < s);
    let mut best: Option<(usize, T)> = None;
    for (lin, &v) in grid.values.iter().enumerate() {
        if !interior(&multi_index(lin, &spec.shape)) {
            continue;
        }
        if best.map_or(true, |(_, b)| v < b) {
            best = Some((lin, v));
        }
    }
    let (lin, v0) = best.ok_or_else(|| Error::Resolution("patch has no interior points".into()))?;
    let idx = multi_index(lin, &spec.shape);
    let at = |off: &[i64]| -> T {
        let j: Vec<usize> = idx
            .iter()
            .zip(off)
            .zip(&spec.shape)
            .map(|((&i, &o), &s)| (i as i64 + o).rem_euclid(s as i64) as usize)
            .collect();
        grid.values[linear_index(&j, &spec.shape)]
    };
    let mut grad = vec![T::zero(); n];
    let mut hess = vec![vec![T::zero(); n]; n];
    let two = lit::<T>(2.0);
    for d in 0..n {
        let hd = spec.spacing[d];
        let mut e = vec![0i64; n];
        e[d] = 1;
        let vp = at(&e);
        e[d] = -1;
        let vm = at(&e);
        grad[d] = (vp - vm) / (two * hd);
        hess[d][d] = (vp - two * v0 + vm) / (hd * hd);
        for f in 0..d {
            let hf = spec.spacing[f];
            let mut o = vec![0i64; n];
            let mut corner = |sd: i64, sf: i64| {
                o[d] = sd;
                o[f] = sf;
                at(&o)
            };
            let v = (corner(1, 1) - corner(1, -1) - corner(-1, 1) + corner(-1, -1)) / (lit::<T>(4.0) * hd * hf);
            hess[d][f] = v;
            hess[f][d] = v;
        }
    }
    let base = spec.point(lin);
    let (eigenvalues, nondegenerate) = spectrum(&hess);
    let mut point = base.clone();
    let mut value = v0;
    if nondegenerate {
        if let Some(s) = newton_step(&hess, &grad) {
            if s.iter().zip(&spec.spacing).all(|(&x, &h)| x.abs() <= h) {
                let mut quad = T::zero();
                for d in 0..n {
                    point[d] = base[d] + s[d];
                    quad += grad[d] * s[d];
                    for f in 0..n {
                        quad += lit::<T>(0.5) * s[d] * hess[d][f] * s[f];
                    }
                }
                value = v0 + quad;
            }
        }
    }
    Ok(MinimumReport {
        point,
        value,
        gradient: grad,
        hessian: hess,
        eigenvalues,
        nondegenerate,
    })
}

/// Damped Newton on a callable with central differences of width `step`.
pub fn find_minimum_of<T: Real>(f: impl Fn(&[T]) -> T, start: &[T], step: T) -> MinimumReport<T> {
    let n = start.len();
    let two = lit::<T>(2.0);
    let model = |x: &[T]| {
        let f0 = f(x);
        let mut g = vec![T::zero(); n];
        let mut h = vec![vec![T::zero(); n]; n];
        let mut y = x.to_vec();
        for d in 0..n {
            y[d] = x[d] + step;
            let p = f(&y);
            y[d] = x[d] - step;
            let m = f(&y);
            y[d] = x[d];
            g[d] = (p - m) / (two * step);
            h[d][d] = (p - two * f0 + m) / (step * step);
            for e in 0..d {
                let mut c = |sd: T, se: T| {
                    y[d] = x[d] + sd * step;
                    y[e] = x[e] + se * step;
                    let v = f(&y);
                    y[d] = x[d];
                    y[e] = x[e];
                    v
                };
                let one = T::one();
                let v = (c(one, one) - c(one, -one) - c(-one, one) + c(-one, -one)) / (lit::<T>(4.0) * step * step);
                h[d][e] = v;
                h[e][d] = v;
            }
        }
        (f0, g, h)
    };
    let mut x = start.to_vec();
    let (mut fx, mut g, mut h) = model(&x);
    for _ in 0..60 {
        let (_, pd) = spectrum(&h);
        let gnorm = g.iter().fold(T::zero(), |m, v| m.max(v.abs()));
        let mut s = match (pd, newton_step(&h, &g)) {
            (true, Some(s)) => s,
            _ if gnorm > T::zero() => g.iter().map(|&v| -v / gnorm * step).collect(),
            _ => break,
        };
        let cap = step * lit(10.0);
        let smax = s.iter().fold(T::zero(), |m, v| m.max(v.abs()));
        if smax > cap {
            s.iter_mut().for_each(|v| *v = *v * cap / smax);
        }
        let mut lambda = T::one();
        let mut moved = false;
        while lambda > lit(1e-6) {
            let trial: Vec<T> = x.iter().zip(&s).map(|(&a, &b)| a + lambda * b).collect();
            let ft = f(&trial);
            if ft <= fx {
                x = trial;
                moved = true;
                break;
            }
            lambda *= lit(0.5);
        }
        let size = s.iter().fold(T::zero(), |m, v| m.max(v.abs())) * lambda;
        if !moved {
            break;
        }
        let next = model(&x);
        fx = next.0;
        g = next.1;
        h = next.2;
        if size < step * lit(1e-8) {
            break;
        }
    }
    let (eigenvalues, nondegenerate) = spectrum(&h);
    MinimumReport {
        point: x,
        value: fx,
        gradient: g,
        hessian: h,
        eigenvalues,
        nondegenerate,
    }
}

/// Candidate lists for [`suggest_window_from_minimum`].
#[derive(Debug, Clone)]
pub struct WindowSearch<T> {
    pub rho: Vec<T>,
    /// Fractions of the boundary depth `inf_∂B_ρ − inf_B_ρ` tried for `δ`,
    /// largest first.
    pub delta_fractions: Vec<T>,
    pub alpha_shrink: T,
}

impl<T: Real> Default for WindowSearch<T> {
    fn default() -> Self {
        Self {
            rho: [3.0, 2.5, 2.0, 1.5, 1.0, 0.75, 0.5, 0.35, 0.25, 0.15, 0.1]
                .iter()
                .map(|&x| lit(x))
                .collect(),
            delta_fractions: (1..=19).rev().map(|j| lit(j as f64 * 0.05)).collect(),
            alpha_shrink: lit(0.8),
        }
    }
}

/// Coarse search for the window with the largest `δ` that passes
/// [`super::check_splitting_condition`], ties broken by larger `α`.
pub fn suggest_window_from_minimum<T: Real>(
    grid: &HomoclinicGrid<T>,
    center: &[T],
    search: &WindowSearch<T>,
) -> Result<(SplittingWindow<T>, SplittingReport<T>)> {
    let h = grid.spec.max_spacing();
    let four_h = h * lit(4.0);
    let mut best: Option<(SplittingWindow<T>, SplittingReport<T>)> = None;
    for &rho in &search.rho {
        if rho > T::PI() || rho <= four_h * lit(2.0) {
            continue;
        }
        let ball = match Ball::new(grid, center, rho) {
            Ok(b) => b,
            Err(Error::Resolution(_)) => continue,
            Err(e) => return Err(e),
        };
        let depth = ball.inf_boundary - ball.inf_ball;
        if !(depth > T::zero()) {
            continue;
        }
        'fractions: for &frac in &search.delta_fractions {
            let delta = frac * depth;
            if let Some((w, _)) = &best {
                if delta < w.delta || (delta == w.delta && rho <= w.rho) {
                    break;
                }
            }
            let (d, _, _) = ball.level_distance(delta * lit(0.5), delta * lit(0.75));
            let gap = d.map(|d| d - h).unwrap_or(T::infinity());
            let mut alpha = (gap * lit(0.5)).min(rho) * lit(0.999);
            while alpha >= four_h {
                if ball.sup_inner(alpha)? < ball.inf_ball + delta * lit(0.25) {
                    let window = SplittingWindow::new(center.to_vec(), rho, alpha, delta)?;
                    let report = evaluate_window(&ball, &window, h)?;
                    if report.holds() {
                        best = Some((window, report));
                        break 'fractions;
                    }
                }
                alpha *= search.alpha_shrink;
            }
        }
    }
    best.ok_or_else(|| Error::Infeasible("no window passes the splitting condition on this grid".into()))
}
