use crate::error::{Error, Result};
use crate::frequencies::{PerturbationSeries, QMode};
use crate::scalar::Real;

use super::bvp::{build_orbit, solve_glued, Force, Grid};
use super::{separatrix, PseudoOrbit, SolverOptions};

/// `q̈ = sin q (1 − μ g(ωt + A))` for the factor-mode coupling.
pub(crate) struct FactorForce<T> {
    pub mu: T,
    pub g: Vec<T>,
}

impl<T: Real> Force<T> for FactorForce<T> {
    fn force(&self, i: usize, q: T) -> (T, T) {
        let w = T::one() - self.mu * self.g[i];
        let (s, c) = q.sin_cos();
        (s * w, c * w)
    }

    fn potential(&self, i: usize, q: T, _right: bool) -> T {
        let c = q.cos();
        c - T::one() + self.mu * (T::one() - c) * self.g[i]
    }
}

pub(crate) fn check_factor<T: Real>(f: &PerturbationSeries<T>, omega: &[T], phase: &[T]) -> Result<()> {
    if f.mode() != QMode::FactorOneMinusCosQ {
        return Err(Error::WrongMode("this solver needs f = (1 − cos q) g(φ)".into()));
    }
    if omega.len() != f.dim() || phase.len() != f.dim() {
        return Err(Error::invalid("dimension mismatch between ω, A and f"));
    }
    Ok(())
}

/// Glued pseudo-heteroclinic orbit `q^μ_{A,θ}` of `−q̈ + sin q = μ sin q g(ωt + A)`:
/// true solutions on each side of `θ`, continuous with `q(θ) = π`, and
/// asymptotic to `0` and `2π`. Newton starts from `q_θ`.
pub fn solve_glued_heteroclinic<T: Real>(
    mu: T,
    phase: &[T],
    theta: T,
    omega: &[T],
    f: &PerturbationSeries<T>,
    opts: &SolverOptions<T>,
) -> Result<PseudoOrbit<T>> {
    check_factor(f, omega, phase)?;
    opts.check_mu(mu)?;
    let (half, h) = opts.half_points(omega);
    let grid = Grid::new(theta, half, h);
    let g = f.angular_along_line(omega, phase, &grid.t);
    let force = FactorForce { mu, g };
    let init: Vec<T> = grid.t.iter().map(|&t| separatrix(t, theta).0).collect();
    let (q, defect, iters) = solve_glued(&force, &grid, init, opts)?;
    build_orbit(&force, grid, q, defect, iters, mu, phase, true, opts)
}
