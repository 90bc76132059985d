//! The splitting condition on sampled homoclinic functions, minimum
//! detection, window search, diffusion-time bounds and the
//! three-time-scale analysis.
//!
//! Balls `B_r(A_0)` use the sup-metric on the torus.

mod minimum;
mod threescale;

pub use minimum::{find_minimum, find_minimum_of, suggest_window_from_minimum, MinimumReport, WindowSearch};
pub use threescale::{
    check_3ts_window, three_timescale_analysis, ThreeScaleConstants, ThreeScaleOptions, ThreeScaleOutcome, ThreeScaleProfiles,
    ThreeScaleReport, ThreeScaleRow,
};

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::fourier::linear_index;
use crate::melnikov::HomoclinicGrid;
use crate::scalar::{from_usize, lit, to_f64, Real};

/// `(A_0, ρ, α, δ)` of the splitting condition.
#[derive(Debug, Clone, PartialEq)]
pub struct SplittingWindow<T> {
    pub center: Vec<T>,
    pub rho: T,
    pub alpha: T,
    pub delta: T,
}

impl<T: Real> SplittingWindow<T> {
    pub fn new(center: Vec<T>, rho: T, alpha: T, delta: T) -> Result<Self> {
        if !(alpha > T::zero() && alpha < rho && rho <= T::PI()) {
            return Err(Error::invalid(format!(
                "window radii must satisfy 0 < alpha < rho <= pi (alpha {alpha}, rho {rho})"
            )));
        }
        if !(delta > T::zero()) || !delta.is_finite() {
            return Err(Error::invalid("window depth delta must be positive"));
        }
        Ok(Self { center, rho, alpha, delta })
    }
}

/// Outcome of [`check_splitting_condition`]; each margin is positive
/// exactly when its condition holds.
#[derive(Debug, Clone)]
pub struct SplittingReport<T> {
    pub window: SplittingWindow<T>,
    pub cond_i: bool,
    pub cond_ii: bool,
    pub cond_iii: bool,
    /// `inf_∂B_ρ G − inf_B_ρ G − δ`.
    pub margin_i: T,
    /// `inf_B_ρ G + δ/4 − sup_B_α G`.
    pub margin_ii: T,
    /// `gap − 2α`.
    pub margin_iii: T,
    pub inf_ball: T,
    pub inf_boundary: T,
    pub sup_inner: T,
    /// Lower bound on the sup-distance between `{G < inf + δ/2}` and
    /// `{G ≥ inf + 3δ/4}` inside `B_ρ`: grid distance minus one cell.
    /// Infinite when the superlevel set is empty.
    pub sublevel_gap: T,
    /// Largest extent of `{G < inf + δ/2}` and smallest of `{G ≥ inf + 3δ/4}`
    /// from `A_0`, on the grid.
    pub sublevel_radius: T,
    pub superlevel_radius: T,
    pub spacing: T,
}

impl<T: Real> SplittingReport<T> {
    pub fn holds(&self) -> bool {
        self.cond_i && self.cond_ii && self.cond_iii
    }

    /// `key=value` lines.
    pub fn to_text(&self) -> String {
        let w = &self.window;
        let mut s = String::new();
        let center: Vec<String> = w.center.iter().map(|x| format!("{x:.17e}")).collect();
        let _ = writeln!(s, "center={}", center.join(","));
        for (k, v) in [("rho", w.rho), ("alpha", w.alpha), ("delta", w.delta), ("spacing", self.spacing)] {
            let _ = writeln!(s, "{k}={v:.17e}");
        }
        let _ = writeln!(s, "cond_i={}", self.cond_i);
        let _ = writeln!(s, "cond_ii={}", self.cond_ii);
        let _ = writeln!(s, "cond_iii={}", self.cond_iii);
        for (k, v) in [
            ("margin_i", self.margin_i),
            ("margin_ii", self.margin_ii),
            ("margin_iii", self.margin_iii),
            ("inf_ball", self.inf_ball),
            ("inf_boundary", self.inf_boundary),
            ("sup_inner", self.sup_inner),
            ("sublevel_gap", self.sublevel_gap),
            ("sublevel_radius", self.sublevel_radius),
            ("superlevel_radius", self.superlevel_radius),
        ] {
            let _ = writeln!(s, "{k}={v:.17e}");
        }
        s
    }

    pub fn csv_header() -> &'static str {
        "rho,alpha,delta,cond_i,cond_ii,cond_iii,margin_i,margin_ii,margin_iii,sublevel_gap"
    }

    pub fn csv_row(&self) -> String {
        let w = &self.window;
        format!(
            "{:.17e},{:.17e},{:.17e},{},{},{},{:.17e},{:.17e},{:.17e},{:.17e}",
            w.rho,
            w.alpha,
            w.delta,
            self.cond_i,
            self.cond_ii,
            self.cond_iii,
            self.margin_i,
            self.margin_ii,
            self.margin_iii,
            self.sublevel_gap
        )
    }
}

/// Grid samples inside the sup-ball `B_ρ(A_0)`, gathered into their
/// bounding box (the ball itself in the sup-metric).
pub(crate) struct Ball<'a, T> {
    grid: &'a HomoclinicGrid<T>,
    center: Vec<T>,
    pub dims: Vec<usize>,
    pub values: Vec<T>,
    /// Sup-distance of each box sample to `A_0`.
    pub dist: Vec<T>,
    pub inf_ball: T,
    pub inf_boundary: T,
}

impl<'a, T: Real> Ball<'a, T> {
    pub fn new(grid: &'a HomoclinicGrid<T>, center: &[T], rho: T) -> Result<Self> {
        let n = grid.dim();
        if center.len() != n {
            return Err(Error::invalid("window centre and grid dimensions differ"));
        }
        let spec = &grid.spec;
        let full = spec.is_full_torus();
        let u = grid.local_coordinates(center);
        let tol = lit::<T>(1e-9);
        let mut axis_idx = Vec::with_capacity(n);
        let mut axis_dist = Vec::with_capacity(n);
        for d in 0..n {
            let h = spec.spacing[d];
            let len = spec.shape[d];
            let r = rho / h;
            if !full && (u[d] - r < -tol || u[d] + r > from_usize::<T>(len - 1) + tol) {
                return Err(Error::Resolution(format!("grid patch does not cover B_rho along axis {d}")));
            }
            let lo = (u[d] - r - tol).ceil().to_i64().unwrap_or(0);
            let hi = (u[d] + r + tol).floor().to_i64().unwrap_or(0);
            let mut idx = Vec::new();
            let mut dist = Vec::new();
            for j in lo..=hi {
                let g = if full { j.rem_euclid(len as i64) as usize } else { j.clamp(0, len as i64 - 1) as usize };
                idx.push(g);
                dist.push((crate::scalar::from_i64::<T>(j) - u[d]).abs() * h);
            }
            if idx.is_empty() {
                return Err(Error::Resolution("B_rho contains no grid points".into()));
            }
            axis_idx.push(idx);
            axis_dist.push(dist);
        }
        let dims: Vec<usize> = axis_idx.iter().map(|v| v.len()).collect();
        let total: usize = dims.iter().product();
        let mut values = Vec::with_capacity(total);
        let mut dist = Vec::with_capacity(total);
        let mut cur = vec![0usize; n];
        let mut gidx = vec![0usize; n];
        for _ in 0..total {
            let mut dmax = T::zero();
            for d in 0..n {
                gidx[d] = axis_idx[d][cur[d]];
                dmax = dmax.max(axis_dist[d][cur[d]]);
            }
            values.push(grid.values[linear_index(&gidx, &spec.shape)]);
            dist.push(dmax);
            for d in (0..n).rev() {
                cur[d] += 1;
                if cur[d] < dims[d] {
                    break;
                }
                cur[d] = 0;
            }
        }
        let mut ball = Self {
            grid,
            center: center.to_vec(),
            dims,
            values,
            dist,
            inf_ball: T::infinity(),
            inf_boundary: T::infinity(),
        };
        let step = spec.spacing.iter().fold(T::infinity(), |m, &h| m.min(h)) * lit(0.5);
        let faces = ball.sphere_samples(rho, step)?;
        ball.inf_boundary = faces.iter().fold(T::infinity(), |m, &v| m.min(v));
        ball.inf_ball = ball.values.iter().fold(ball.inf_boundary, |m, &v| m.min(v));
        Ok(ball)
    }

    /// Interpolated values on the faces of the sup-sphere of radius `r`.
    pub fn sphere_samples(&self, r: T, step: T) -> Result<Vec<T>> {
        let n = self.center.len();
        let m = ((r + r) / step).ceil().to_usize().unwrap_or(1).max(4) + 1;
        let offs: Vec<T> = (0..m)
            .map(|j| -r + (r + r) * from_usize::<T>(j) / from_usize::<T>(m - 1))
            .collect();
        let mut out = Vec::new();
        let count = m.pow((n - 1) as u32);
        let mut x = vec![T::zero(); n];
        for d in 0..n {
            for sign in [-T::one(), T::one()] {
                for lin in 0..count {
                    let mut rest = lin;
                    for e in 0..n {
                        if e == d {
                            x[e] = self.center[e] + sign * r;
                        } else {
                            x[e] = self.center[e] + offs[rest % m];
                            rest /= m;
                        }
                    }
                    let v = self
                        .grid
                        .interpolate(&x)
                        .ok_or_else(|| Error::Resolution("sphere sample outside the grid patch".into()))?;
                    out.push(v);
                }
            }
        }
        Ok(out)
    }

    /// `sup_{B_α} G` over grid samples, sphere samples and the centre.
    pub fn sup_inner(&self, alpha: T) -> Result<T> {
        let step = self.grid.spec.spacing.iter().fold(T::infinity(), |m, &h| m.min(h)) * lit(0.5);
        let step = step.min(alpha * lit(0.25));
        let mut sup = self
            .grid
            .interpolate(&self.center)
            .ok_or_else(|| Error::Resolution("centre outside the grid patch".into()))?;
        for (&v, &d) in self.values.iter().zip(&self.dist) {
            if d <= alpha {
                sup = sup.max(v);
            }
        }
        for v in self.sphere_samples(alpha, step)? {
            sup = sup.max(v);
        }
        Ok(sup)
    }

    /// Grid sup-distance between `{G < inf + lo}` and `{G ≥ inf + hi}`,
    /// together with the extents of the two sets from `A_0`.
    pub fn level_distance(&self, lo: T, hi: T) -> (Option<T>, T, T) {
        let a = self.inf_ball + lo;
        let b = self.inf_ball + hi;
        let sub: Vec<bool> = self.values.iter().map(|&v| v < a).collect();
        let sup: Vec<bool> = self.values.iter().map(|&v| v >= b).collect();
        let sub_r = self
            .dist
            .iter()
            .zip(&sub)
            .filter(|(_, &s)| s)
            .fold(T::zero(), |m, (&d, _)| m.max(d));
        let sup_r = self
            .dist
            .iter()
            .zip(&sup)
            .filter(|(_, &s)| s)
            .fold(T::infinity(), |m, (&d, _)| m.min(d));
        if !sup.iter().any(|&s| s) || !sub.iter().any(|&s| s) {
            return (None, sub_r, sup_r);
        }
        let spacing = &self.grid.spec.spacing;
        let mut cands: Vec<T> = Vec::new();
        for (d, &h) in spacing.iter().enumerate() {
            for m in 1..=self.dims[d] {
                cands.push(h * from_usize::<T>(m));
            }
        }
        cands.sort_by(|x, y| x.partial_cmp(y).unwrap());
        cands.dedup();
        let hits = |r: T| {
            let radius: Vec<usize> = spacing
                .iter()
                .map(|&h| (r / h + lit(1e-9)).floor().to_usize().unwrap_or(0))
                .collect();
            let grown = dilate(&sub, &self.dims, &radius);
            grown.iter().zip(&sup).any(|(&g, &s)| g && s)
        };
        let (mut lo_i, mut hi_i) = (0usize, cands.len() - 1);
        if !hits(cands[hi_i]) {
            return (None, sub_r, sup_r);
        }
        while lo_i < hi_i {
            let mid = (lo_i + hi_i) / 2;
            if hits(cands[mid]) {
                hi_i = mid;
            } else {
                lo_i = mid + 1;
            }
        }
        (Some(cands[lo_i]), sub_r, sup_r)
    }

}

/// Sup-metric dilation of a boolean mask on a box, per-axis radii.
fn dilate(mask: &[bool], dims: &[usize], radius: &[usize]) -> Vec<bool> {
    let mut cur = mask.to_vec();
    let mut prefix = Vec::new();
    for axis in 0..dims.len() {
        let r = radius[axis];
        if r == 0 {
            continue;
        }
        let len = dims[axis];
        let stride: usize = dims[axis + 1..].iter().product();
        let outer: usize = dims[..axis].iter().product();
        let mut next = vec![false; cur.len()];
        for o in 0..outer {
            for s in 0..stride {
                let base = o * len * stride + s;
                prefix.clear();
                prefix.push(0usize);
                for j in 0..len {
                    let last = *prefix.last().unwrap();
                    prefix.push(last + cur[base + j * stride] as usize);
                }
                for j in 0..len {
                    let a = j.saturating_sub(r);
                    let b = (j + r + 1).min(len);
                    next[base + j * stride] = prefix[b] > prefix[a];
                }
            }
        }
        cur = next;
    }
    cur
}

/// Evaluates items (i)–(iii) of the splitting condition on a sampled grid.
///
/// Infima and suprema combine the grid samples inside the ball with
/// multilinearly interpolated samples on the relevant sup-spheres.
pub fn check_splitting_condition<T: Real>(
    grid: &HomoclinicGrid<T>,
    window: &SplittingWindow<T>,
) -> Result<SplittingReport<T>> {
    let h = grid.spec.max_spacing();
    if h > window.alpha * lit(0.25) {
        return Err(Error::Resolution(format!(
            "grid spacing {} is coarser than alpha/4 = {}",
            to_f64(h),
            to_f64(window.alpha) / 4.0
        )));
    }
    let ball = Ball::new(grid, &window.center, window.rho)?;
    evaluate_window(&ball, window, h)
}

pub(crate) fn evaluate_window<T: Real>(ball: &Ball<'_, T>, window: &SplittingWindow<T>, h: T) -> Result<SplittingReport<T>> {
    let delta = window.delta;
    let sup_inner = ball.sup_inner(window.alpha)?;
    let (d, sub_r, sup_r) = ball.level_distance(delta * lit(0.5), delta * lit(0.75));
    let gap = d.map(|d| d - h).unwrap_or(T::infinity());
    let margin_i = ball.inf_boundary - ball.inf_ball - delta;
    let margin_ii = ball.inf_ball + delta * lit(0.25) - sup_inner;
    let margin_iii = gap - window.alpha * lit(2.0);
    Ok(SplittingReport {
        window: window.clone(),
        cond_i: margin_i > T::zero(),
        cond_ii: margin_ii > T::zero(),
        cond_iii: margin_iii > T::zero(),
        margin_i,
        margin_ii,
        margin_iii,
        inf_ball: ball.inf_ball,
        inf_boundary: ball.inf_boundary,
        sup_inner,
        sublevel_gap: gap,
        sublevel_radius: sub_r,
        superlevel_radius: sup_r,
        spacing: h,
    })
}

/// Breakdown of the diffusion-time bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiffusionBound<T> {
    pub value: T,
    /// `k = |I_0 − I_0'| / δ`.
    pub transitions: T,
    /// `ρ max(|ln δ|, α^{−τ})`.
    pub per_transition: T,
    /// `C |ln η|`.
    pub tail: T,
}

/// `C (dI/δ) ρ max(|ln δ|, α^{−τ}) + C |ln η|`.
pub fn diffusion_time_bound<T: Real>(action_distance: T, window: &SplittingWindow<T>, tau: T, eta: T, c: T) -> DiffusionBound<T> {
    let transitions = action_distance / window.delta;
    let per_transition = window.rho * window.delta.ln().abs().max(window.alpha.powf(-tau));
    let tail = c * eta.ln().abs();
    DiffusionBound {
        value: c * transitions * per_transition + tail,
        transitions,
        per_transition,
        tail,
    }
}
