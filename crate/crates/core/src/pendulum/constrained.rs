use crate::error::{Error, Result};
use crate::frequencies::PerturbationSeries;
use crate::linalg::BandedMatrix;
use crate::quadrature::simpson;
use crate::scalar::{lit, to_f64, Real};

use super::bvp::{build_orbit, decay_rates, numerov_row, Force, Grid};
use super::glued::{check_factor, FactorForce};
use super::{psi0, separatrix, PseudoOrbit, SolverOptions};

/// Full-line orbit `Q^μ_{A,θ}` and multiplier `α^μ_{A,θ}` solving
/// `−Q̈ + sin Q = μ sin Q g(ωt + A) + α ψ_θ(t)` with `∫(Q − q_θ) ψ_θ dt = 0`.
///
/// The constraint integral is carried as a running trapezoid sum `s_i` and the
/// multiplier as a node-wise constant `α_i = α_{i+1}`, so the bordered system
/// stays banded and the near-null translation mode never has to be inverted.
pub fn solve_constrained_heteroclinic<T: Real>(
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
    let n = grid.len();
    let g = f.angular_along_line(omega, phase, &grid.t);
    let force = FactorForce { mu, g };
    let sep: Vec<T> = grid.t.iter().map(|&t| separatrix(t, theta).0).collect();
    let w: Vec<T> = grid.t.iter().map(|&t| psi0(t - theta)).collect();

    let (ll, lr) = decay_rates(&force, n)?;
    let el = (ll * h).exp();
    let er = (lr * h).exp();
    let h2 = h * h;
    let hh = h * lit(0.5);
    let tau = T::TAU();
    let m = 3 * n;

    let residual = |x: &[T]| -> (Vec<T>, T) {
        let mut r = vec![T::zero(); m];
        let fv: Vec<T> = (0..n)
            .map(|i| force.force(i, x[3 * i]).0 - x[3 * i + 2] * w[i])
            .collect();
        let wq: Vec<T> = (0..n).map(|i| (x[3 * i] - sep[i]) * w[i]).collect();
        let mut defect = T::zero();
        r[0] = x[3] - el * x[0];
        r[3 * (n - 1)] = (tau - x[3 * (n - 2)]) - er * (tau - x[3 * (n - 1)]);
        for i in 1..n - 1 {
            let v = numerov_row(h2, [x[3 * i - 3], x[3 * i], x[3 * i + 3]], [fv[i - 1], fv[i], fv[i + 1]]);
            r[3 * i] = v;
            defect = defect.max(v.abs() / h2);
        }
        r[1] = x[1] - hh * wq[0];
        for i in 1..n {
            r[3 * i + 1] = x[3 * i + 1] - x[3 * i - 2] - hh * (wq[i - 1] + wq[i]);
        }
        for i in 0..n - 1 {
            r[3 * i + 2] = x[3 * i + 5] - x[3 * i + 2];
        }
        r[3 * n - 1] = x[3 * n - 2];
        (r, defect)
    };

    let mut x = vec![T::zero(); m];
    for i in 0..n {
        x[3 * i] = sep[i];
    }
    let (mut r, mut defect) = residual(&x);
    let mut converged = None;
    for iter in 0..opts.max_iter {
        let mut jac = BandedMatrix::new(m, 4);
        let k = h2 / lit(12.0);
        let dv: Vec<T> = (0..n).map(|i| force.force(i, x[3 * i]).1).collect();
        jac.add(0, 0, -el);
        jac.add(0, 3, T::one());
        jac.add(3 * (n - 1), 3 * (n - 2), -T::one());
        jac.add(3 * (n - 1), 3 * (n - 1), er);
        for i in 1..n - 1 {
            let row = 3 * i;
            for (j, wt) in [(i - 1, T::one()), (i, lit::<T>(10.0)), (i + 1, T::one())] {
                let lap = if j == i { -lit::<T>(2.0) } else { T::one() };
                jac.add(row, 3 * j, lap - k * wt * dv[j]);
                jac.add(row, 3 * j + 2, k * wt * w[j]);
            }
        }
        jac.add(1, 1, T::one());
        jac.add(1, 0, -hh * w[0]);
        for i in 1..n {
            let row = 3 * i + 1;
            jac.add(row, 3 * i + 1, T::one());
            jac.add(row, 3 * i - 2, -T::one());
            jac.add(row, 3 * i - 3, -hh * w[i - 1]);
            jac.add(row, 3 * i, -hh * w[i]);
        }
        for i in 0..n - 1 {
            jac.add(3 * i + 2, 3 * i + 5, T::one());
            jac.add(3 * i + 2, 3 * i + 2, -T::one());
        }
        jac.add(3 * n - 1, 3 * n - 2, T::one());

        let rhs: Vec<T> = r.iter().map(|&v| -v).collect();
        let step = jac.solve(&rhs)?;
        let norm0 = r.iter().fold(T::zero(), |a, v| a.max(v.abs()));
        let mut lambda = T::one();
        loop {
            let trial: Vec<T> = x.iter().zip(&step).map(|(&a, &d)| a + lambda * d).collect();
            let (rt, dt) = residual(&trial);
            let norm = rt.iter().fold(T::zero(), |a, v| a.max(v.abs()));
            if norm <= norm0 * (T::one() - lit::<T>(1e-4) * lambda) || lambda < lit(1e-3) || norm0 < lit(1e-14) {
                x = trial;
                r = rt;
                defect = dt;
                break;
            }
            lambda *= lit(0.5);
        }
        let size = (0..n).fold(T::zero(), |a, i| a.max(step[3 * i].abs())) * lambda;
        if !x.iter().all(|v| v.is_finite()) {
            break;
        }
        if size <= lit(1e-13) && defect <= opts.tol {
            converged = Some(iter + 1);
            break;
        }
    }
    let iters = converged.ok_or_else(|| Error::NonConvergence {
        residual: to_f64(defect),
        context: "constrained heteroclinic Newton iteration".into(),
    })?;
    let q: Vec<T> = (0..n).map(|i| x[3 * i]).collect();
    let alpha = x[3 * n - 1];
    let wq: Vec<T> = (0..n).map(|i| (q[i] - sep[i]) * w[i]).collect();
    let constraint = simpson(&wq, h).abs();
    let mut orbit = build_orbit(&force, grid, q, defect, iters, mu, phase, false, opts)?;
    orbit.multiplier = Some(alpha);
    orbit.constraint_defect = Some(constraint);
    Ok(orbit)
}
