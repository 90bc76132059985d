//! Numerov discretisation of `q̈ = F(t, q)` on a uniform grid, closed by
//! exact-exponential Robin conditions at both ends, and damped Newton.

use crate::error::{Error, Result};
use crate::linalg::BandedMatrix;
use crate::quadrature::derivative4;
use crate::scalar::{from_usize, lit, to_f64, Real};

use super::{PseudoOrbit, SolverOptions};

/// Right-hand side of `q̈ = F(t_i, q)` and the Lagrangian potential.
pub(crate) trait Force<T: Real> {
    /// `(F, ∂F/∂q)` at grid index `i`.
    fn force(&self, i: usize, q: T) -> (T, T);
    /// `V` in `L = q̇²/2 − V`; `right` selects the right-half potential at `θ`.
    fn potential(&self, i: usize, q: T, right: bool) -> T;
}

#[derive(Debug, Clone)]
pub(crate) struct Grid<T> {
    pub t: Vec<T>,
    pub h: T,
    pub center: usize,
}

impl<T: Real> Grid<T> {
    pub fn new(theta: T, half: usize, h: T) -> Self {
        let t = (0..=2 * half)
            .map(|i| theta + h * (from_usize::<T>(i) - from_usize::<T>(half)))
            .collect();
        Self { t, h, center: half }
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }
}

pub(crate) fn decay_rates<T: Real, F: Force<T>>(force: &F, n: usize) -> Result<(T, T)> {
    let l = force.force(0, T::zero()).1;
    let r = force.force(n - 1, T::TAU()).1;
    if !(l > T::zero() && r > T::zero()) {
        return Err(Error::invalid(
            "equilibria are not hyperbolic at the window ends; coupling too large",
        ));
    }
    Ok((l.sqrt(), r.sqrt()))
}

/// Numerov row `q_{i+1} − 2q_i + q_{i−1} − h²/12 (F_{i+1} + 10 F_i + F_{i−1})`.
pub(crate) fn numerov_row<T: Real>(h2: T, q: [T; 3], f: [T; 3]) -> T {
    q[2] - lit::<T>(2.0) * q[1] + q[0] - h2 / lit(12.0) * (f[2] + lit::<T>(10.0) * f[1] + f[0])
}

/// Solves the two half-line problems glued at `q(θ) = π`.
pub(crate) fn solve_glued<T: Real, F: Force<T>>(
    force: &F,
    grid: &Grid<T>,
    init: Vec<T>,
    opts: &SolverOptions<T>,
) -> Result<(Vec<T>, T, usize)> {
    let n = grid.len();
    let c = grid.center;
    let h = grid.h;
    let h2 = h * h;
    let (ll, lr) = decay_rates(force, n)?;
    let el = (ll * h).exp();
    let er = (lr * h).exp();
    let pi = T::PI();
    let tau = T::TAU();

    let residual = |q: &[T]| -> (Vec<T>, T) {
        let fv: Vec<T> = (0..n).map(|i| force.force(i, q[i]).0).collect();
        let mut r = vec![T::zero(); n];
        let mut defect = T::zero();
        r[0] = q[1] - el * q[0];
        r[n - 1] = (tau - q[n - 2]) - er * (tau - q[n - 1]);
        r[c] = q[c] - pi;
        for i in 1..n - 1 {
            if i == c {
                continue;
            }
            r[i] = numerov_row(h2, [q[i - 1], q[i], q[i + 1]], [fv[i - 1], fv[i], fv[i + 1]]);
            defect = defect.max(r[i].abs() / h2);
        }
        (r, defect)
    };

    let mut q = init;
    let (mut r, mut defect) = residual(&q);
    for iter in 0..opts.max_iter {
        let dv: Vec<T> = (0..n).map(|i| force.force(i, q[i]).1).collect();
        let mut jac = BandedMatrix::new(n, 1);
        jac.add(0, 0, -el);
        jac.add(0, 1, T::one());
        jac.add(n - 1, n - 2, -T::one());
        jac.add(n - 1, n - 1, er);
        jac.add(c, c, T::one());
        let k = h2 / lit(12.0);
        for i in 1..n - 1 {
            if i == c {
                continue;
            }
            jac.add(i, i - 1, T::one() - k * dv[i - 1]);
            jac.add(i, i, -lit::<T>(2.0) - lit::<T>(10.0) * k * dv[i]);
            jac.add(i, i + 1, T::one() - k * dv[i + 1]);
        }
        let rhs: Vec<T> = r.iter().map(|&x| -x).collect();
        let step = jac.solve(&rhs)?;
        let norm0 = r.iter().fold(T::zero(), |m, x| m.max(x.abs()));
        let mut lambda = T::one();
        loop {
            let trial: Vec<T> = q.iter().zip(&step).map(|(&a, &d)| a + lambda * d).collect();
            let (rt, dt) = residual(&trial);
            let norm = rt.iter().fold(T::zero(), |m, x| m.max(x.abs()));
            if norm <= norm0 * (T::one() - lit::<T>(1e-4) * lambda) || lambda < lit(1e-3) || norm0 < lit(1e-14) {
                q = trial;
                r = rt;
                defect = dt;
                break;
            }
            lambda *= lit(0.5);
        }
        let size = step.iter().fold(T::zero(), |m, x| m.max(x.abs())) * lambda;
        if !q.iter().all(|x| x.is_finite()) {
            break;
        }
        if size <= lit(1e-13) && defect <= opts.tol {
            return Ok((q, defect, iter + 1));
        }
    }
    Err(Error::NonConvergence {
        residual: to_f64(defect),
        context: "glued heteroclinic Newton iteration".into(),
    })
}

/// Assembles a [`PseudoOrbit`] from converged samples.
#[allow(clippy::too_many_arguments)]
pub(crate) fn build_orbit<T: Real, F: Force<T>>(
    force: &F,
    grid: Grid<T>,
    q: Vec<T>,
    residual: T,
    iterations: usize,
    mu: T,
    phase: &[T],
    glued: bool,
    opts: &SolverOptions<T>,
) -> Result<PseudoOrbit<T>> {
    let n = grid.len();
    let c = grid.center;
    let h = grid.h;
    let (qdot, right) = if glued {
        let left = derivative4(&q[..=c], h);
        let rightv = derivative4(&q[c..], h);
        let mut d = left;
        d.extend_from_slice(&rightv[1..]);
        (d, rightv[0])
    } else {
        let d = derivative4(&q, h);
        let v = d[c];
        (d, v)
    };
    let potential: Vec<T> = (0..n).map(|i| force.potential(i, q[i], glued && i > c)).collect();
    let pr = force.potential(c, q[c], true);
    let rates = decay_rates(force, n)?;
    let theta = grid.t[c];

    let mut far = T::zero();
    for (i, &x) in q.iter().enumerate() {
        far = far.max((x - super::separatrix(grid.t[i], theta).0).abs());
    }
    if far > T::FRAC_PI_2() {
        return Err(Error::NonConvergence {
            residual: to_f64(far),
            context: "solution left the neighbourhood of the separatrix".into(),
        });
    }
    let (b0, b1) = (q[0], q[n - 1]);
    if !(b0 > T::zero() && b0 < opts.boundary_tol && b1 < T::TAU() && b1 > T::TAU() - opts.boundary_tol) {
        return Err(Error::NonConvergence {
            residual: to_f64(b0.abs().max((T::TAU() - b1).abs())),
            context: "asymptotic boundary values outside the tolerance band".into(),
        });
    }
    Ok(PseudoOrbit {
        mu,
        phase: phase.to_vec(),
        theta,
        step: h,
        center: c,
        t: grid.t,
        q,
        qdot,
        qdot_right_at_theta: right,
        residual,
        multiplier: None,
        potential,
        potential_right_at_theta: pr,
        decay_rates: rates,
        action_offset: T::zero(),
        constraint_defect: None,
        newton_iterations: iterations,
    })
}
