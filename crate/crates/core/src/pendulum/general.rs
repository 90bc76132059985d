use num_complex::Complex;

use crate::error::{Error, Result};
use crate::frequencies::PerturbationSeries;
use crate::scalar::{from_i64, lit, Real};

use super::bvp::{build_orbit, solve_glued, Force, Grid};
use super::{separatrix, InvariantTorus, PseudoOrbit, SolverOptions};

/// `ü = sin(Q + u) − sin Q − μ (∂_q f(ψ, Q + u) − ∂_q f(ψ, Q))` along
/// `ψ = ωt + A`, with the potentials `P_0` (left) and `P_1` (right).
struct TranslatedForce<T> {
    mu: T,
    q: Vec<T>,
    harmonics: Vec<(i64, Vec<Complex<T>>)>,
    center: usize,
}

impl<T: Real> TranslatedForce<T> {
    /// `(f, ∂_q f, ∂²_q f)` at sample `i` and pendulum angle `x`.
    fn coupling(&self, i: usize, x: T) -> (T, T, T) {
        let mut out = (T::zero(), T::zero(), T::zero());
        for (l, h) in &self.harmonics {
            let lf = from_i64::<T>(*l);
            let e = h[i] * Complex::new((lf * x).cos(), (lf * x).sin());
            out.0 += e.re;
            out.1 -= lf * e.im;
            out.2 -= lf * lf * e.re;
        }
        out
    }
}

impl<T: Real> Force<T> for TranslatedForce<T> {
    fn force(&self, i: usize, u: T) -> (T, T) {
        let qi = self.q[i];
        let (_, d0, _) = self.coupling(i, qi);
        let (_, d1, d2) = self.coupling(i, qi + u);
        (
            (qi + u).sin() - qi.sin() - self.mu * (d1 - d0),
            (qi + u).cos() - self.mu * d2,
        )
    }

    fn potential(&self, i: usize, u: T, right: bool) -> T {
        // V = cos u − 1 + P_{0,1}; the (1 − cos u) parts cancel
        let qi = self.q[i];
        let (f0, d0, _) = self.coupling(i, qi);
        let (f1, _, _) = self.coupling(i, qi + u);
        let lin = if right && i >= self.center { u - T::TAU() } else { u };
        (qi + u).cos() - qi.cos() + qi.sin() * lin + self.mu * (f1 - f0 - d0 * lin)
    }
}

/// Pseudo-heteroclinic orbit `u^μ_{A,θ}` of the problem translated to the
/// perturbed torus, glued at `u(θ) = π` and asymptotic to `0` and `2π`.
///
/// The returned orbit's `action_offset` holds `2π q̇^μ_A(θ)` with
/// `q^μ_A(t) = Q^μ(ωt + A)`.
pub fn solve_general_heteroclinic<T: Real>(
    mu: T,
    phase: &[T],
    theta: T,
    torus: &InvariantTorus<T>,
    f: &PerturbationSeries<T>,
    opts: &SolverOptions<T>,
) -> Result<PseudoOrbit<T>> {
    opts.check_mu(mu)?;
    let omega = &torus.omega;
    if f.dim() != omega.len() || phase.len() != omega.len() {
        return Err(Error::invalid("dimension mismatch between torus, A and f"));
    }
    if (torus.mu - mu).abs() > lit::<T>(1e-14) * (T::one() + mu.abs()) {
        return Err(Error::invalid("torus was solved for a different coupling"));
    }
    let general = f.to_general();
    let (half, h) = opts.half_points(omega);
    let grid = Grid::new(theta, half, h);
    let (q, _) = torus.along_line(phase, &grid.t);
    let harmonics = general.q_harmonics_along_line(omega, phase, &grid.t);
    let force = TranslatedForce {
        mu,
        q,
        harmonics,
        center: grid.center,
    };
    let init: Vec<T> = grid.t.iter().map(|&t| separatrix(t, theta).0).collect();
    let (u, defect, iters) = solve_glued(&force, &grid, init, opts)?;
    let psi: Vec<T> = phase
        .iter()
        .zip(omega)
        .map(|(&a, &w)| a + w * theta)
        .collect();
    let offset = T::TAU() * torus.p_at(&psi);
    let mut orbit = build_orbit(&force, grid, u, defect, iters, mu, phase, true, opts)?;
    orbit.action_offset = offset;
    Ok(orbit)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frequencies::{golden, FrequencyVector, QMode};
    use crate::pendulum::{solve_glued_heteroclinic, solve_invariant_torus, TorusOptions};

    #[test]
    fn trivial_torus_reduces_to_glued_problem() {
        let f = PerturbationSeries::cosines(2, &[(vec![1, 0], 1.0), (vec![1, -1], 0.5)]);
        let w = golden::<f64>();
        let mu = 1e-2;
        let torus = InvariantTorus::trivial(mu, &w);
        let a = [0.4, 2.0];
        let g = solve_general_heteroclinic(mu, &a, 0.3, &torus, &f, &Default::default()).unwrap();
        let r = solve_glued_heteroclinic(mu, &a, 0.3, &w, &f, &Default::default()).unwrap();
        let err = g.q.iter().zip(&r.q).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        assert!(err < 1e-10, "err = {err}");
        let perr = g.potential.iter().zip(&r.potential).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        assert!(perr < 1e-12, "perr = {perr}");
        assert_eq!(g.action_offset, 0.0);
    }

    #[test]
    fn moving_torus_defect_is_small() {
        let mut f = PerturbationSeries::new(2, QMode::GeneralInQ);
        f.add_sine(&[0, 0], 1, 0.0);
        // sin q cos φ_1 = [sin(q + φ_1) + sin(q − φ_1)]/2
        f.add_sine(&[1, 0], 1, 0.5);
        f.add_sine(&[-1, 0], 1, 0.5);
        let w = FrequencyVector::new(golden::<f64>(), 0.05, 1.0).unwrap();
        let mu = 1e-3;
        let torus = solve_invariant_torus(mu, &w, &f, &TorusOptions { k_modes: 4, ..Default::default() }).unwrap();
        assert!(!torus.is_trivial());
        let o = solve_general_heteroclinic(mu, &[0.3, 0.0], 0.0, &torus, &f, &Default::default()).unwrap();
        assert!(o.residual < 1e-9, "defect {}", o.residual);
    }
}
