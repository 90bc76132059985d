use crate::angles::{circle_distance, wrap};
use crate::error::{Error, Result};
use crate::scalar::{from_usize, lit, to_f64, Real};

use super::FrequencyVector;

#[derive(Debug, Clone, Copy)]
pub struct ErgodizationOptions<T> {
    /// Time step of the sampled linear flow; defaults to `2π / (4096 |ω|_∞)`.
    pub time_step: Option<T>,
    pub max_time: T,
    pub max_grid_points: usize,
}

impl<T: Real> Default for ErgodizationOptions<T> {
    fn default() -> Self {
        Self {
            time_step: None,
            max_time: lit(1e5),
            max_grid_points: 4_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErgodizationEstimate<T> {
    /// Measured covering time.
    pub time: T,
    /// The `1/α^τ` proxy.
    pub proxy: T,
    pub points_per_axis: usize,
}

/// Smallest `T` such that `{ωt mod 2π : 0 ≤ t ≤ T}` is an α-net of the torus,
/// measured on a dyadic grid of spacing at most `α/4`.
///
/// Grids for different `α` are nested and the flow samples do not depend on
/// `α`, so the estimate is exactly nonincreasing in `α`.
pub fn ergodization_time<T: Real>(
    alpha: T,
    omega: &FrequencyVector<T>,
    opts: &ErgodizationOptions<T>,
) -> Result<ErgodizationEstimate<T>> {
    let pi = T::PI();
    if !(alpha > T::zero() && alpha <= pi) {
        return Err(Error::invalid("alpha must lie in (0, π]"));
    }
    let n = omega.dim();
    let w = omega.omega();
    let wmax = w.iter().map(|x| x.abs()).fold(T::zero(), T::max);
    let dt = opts
        .time_step
        .unwrap_or_else(|| T::TAU() / (lit::<T>(4096.0) * wmax));

    let mut per_axis = 1usize;
    while T::TAU() / from_usize::<T>(per_axis) > alpha / lit(4.0) {
        per_axis *= 2;
    }
    let h = T::TAU() / from_usize::<T>(per_axis);
    let total = per_axis
        .checked_pow(n as u32)
        .filter(|&t| t <= opts.max_grid_points)
        .ok_or_else(|| {
            Error::Resolution(format!(
                "alpha = {:e} needs {per_axis}^{n} grid points (limit {})",
                to_f64(alpha),
                opts.max_grid_points
            ))
        })?;
    if wmax * dt > h / lit(2.0) {
        return Err(Error::Resolution(format!(
            "alpha = {:e} is below the flow sampling resolution (|ω|dt = {:e})",
            to_f64(alpha),
            to_f64(wmax * dt)
        )));
    }

    let mut covered = vec![false; total];
    let mut remaining = total;
    let reach = (alpha / h).floor().to_usize().unwrap_or(0);
    let span = (2 * reach + 1).min(per_axis);
    let mut step: u64 = 0;
    let mut ranges: Vec<Vec<usize>> = vec![Vec::with_capacity(span + 2); n];
    loop {
        let t = dt * T::from_u64(step).unwrap();
        if t > opts.max_time {
            return Err(Error::NotCovered {
                horizon: to_f64(opts.max_time),
            });
        }
        for d in 0..n {
            let phi = wrap(w[d] * t);
            let centre = (phi / h).round().to_i64().unwrap_or(0);
            let r = &mut ranges[d];
            r.clear();
            if span == per_axis {
                r.extend(0..per_axis);
                continue;
            }
            for off in -(reach as i64) - 1..=(reach as i64) + 1 {
                let idx = (centre + off).rem_euclid(per_axis as i64) as usize;
                if circle_distance(phi, h * from_usize::<T>(idx)) <= alpha && !r.contains(&idx) {
                    r.push(idx);
                }
            }
        }
        let mut counter = vec![0usize; n];
        if ranges.iter().all(|r| !r.is_empty()) {
            'cells: loop {
                let lin = (0..n).fold(0usize, |acc, d| acc * per_axis + ranges[d][counter[d]]);
                if !covered[lin] {
                    covered[lin] = true;
                    remaining -= 1;
                }
                let mut d = n;
                loop {
                    if d == 0 {
                        break 'cells;
                    }
                    d -= 1;
                    counter[d] += 1;
                    if counter[d] < ranges[d].len() {
                        break;
                    }
                    counter[d] = 0;
                }
            }
        }
        if remaining == 0 {
            return Ok(ErgodizationEstimate {
                time: t,
                proxy: T::one() / alpha.powf(omega.tau()),
                points_per_axis: per_axis,
            });
        }
        step += 1;
    }
}
