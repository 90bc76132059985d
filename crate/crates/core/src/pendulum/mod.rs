//! The unperturbed separatrix, glued and constrained pseudo-heteroclinic
//! boundary-value solvers, the invariant-torus solver, and the translated
//! problem for couplings that move the torus.

mod bvp;
mod constrained;
mod general;
mod glued;
mod torus;

use std::fmt::Write as _;

pub use constrained::solve_constrained_heteroclinic;
pub use general::solve_general_heteroclinic;
pub use glued::solve_glued_heteroclinic;
pub use torus::{solve_invariant_torus, InvariantTorus, TorusOptions};

use crate::scalar::{lit, Real};

/// `(q_θ(t), q̇_θ(t))` on the separatrix `q_θ(t) = 4 arctan e^{t−θ}`.
pub fn separatrix<T: Real>(t: T, theta: T) -> (T, T) {
    let s = t - theta;
    // arctan(e^s) = π/2 − arctan(e^{−s}) keeps full precision near 2π
    let q = if s <= T::zero() {
        lit::<T>(4.0) * s.exp().atan()
    } else {
        T::TAU() - lit::<T>(4.0) * (-s).exp().atan()
    };
    (q, lit::<T>(2.0) / s.cosh())
}

/// `sin q_0(t) = −2 sinh t / cosh² t`, the separatrix acceleration.
pub fn separatrix_accel<T: Real>(t: T) -> T {
    let c = t.cosh();
    -lit::<T>(2.0) * t.sinh() / (c * c)
}

/// Constraint weight `ψ_0(t) = cosh² t / (1 + cosh t)³`, evaluated as
/// `2u(1+u²)²/(1+u)⁶` with `u = e^{−|t|}`.
pub fn psi0<T: Real>(t: T) -> T {
    let u = (-t.abs()).exp();
    let one = T::one();
    let a = one + u * u;
    let b = one + u;
    lit::<T>(2.0) * u * a * a / b.powi(6)
}

/// Settings shared by the boundary-value solvers.
#[derive(Debug, Clone, Copy)]
pub struct SolverOptions<T> {
    /// Largest accepted ODE defect (in units of `q̈`).
    pub tol: T,
    /// Half-length of the truncated time window; defaults to `max(|ln tol| + 5, 20)`.
    pub t_cut: Option<T>,
    /// Grid step; defaults to `min((tol/0.03)^{1/4}, 0.15 / |ω|_∞)`, which keeps
    /// the fourth-order discretisation error of the separatrix below `tol/2`.
    pub step: Option<T>,
    pub max_iter: usize,
    /// Couplings above this are refused.
    pub mu_max: T,
    /// Asymptotic boundary tolerance `ε_bc`.
    pub boundary_tol: T,
}

impl<T: Real> Default for SolverOptions<T> {
    fn default() -> Self {
        Self {
            tol: lit(1e-10),
            t_cut: None,
            step: None,
            max_iter: 60,
            mu_max: lit(0.1),
            boundary_tol: lit(1e-6),
        }
    }
}

impl<T: Real> SolverOptions<T> {
    pub fn t_cut(&self) -> T {
        self.t_cut
            .unwrap_or_else(|| (self.tol.ln().abs() + lit(5.0)).max(lit(20.0)))
    }

    pub fn step_for(&self, omega: &[T]) -> T {
        self.step.unwrap_or_else(|| {
            let wmax = omega.iter().fold(T::zero(), |m, w| m.max(w.abs()));
            let base = (self.tol / lit(0.03)).powf(lit(0.25)).min(lit(0.05));
            if wmax > T::zero() {
                base.min(lit::<T>(0.15) / wmax)
            } else {
                base
            }
        })
    }

    /// Grid `θ + (i − N) h`, `i = 0..=2N`, with `N` even and `N h ≥ T_cut`.
    pub(crate) fn half_points(&self, omega: &[T]) -> (usize, T) {
        let h0 = self.step_for(omega);
        let mut n = (self.t_cut() / h0).ceil().to_usize().unwrap_or(2).max(4);
        if n % 2 == 1 {
            n += 1;
        }
        (n, h0)
    }

    pub(crate) fn check_mu(&self, mu: T) -> crate::Result<()> {
        if !mu.is_finite() || mu.abs() > self.mu_max {
            return Err(crate::Error::MuTooLarge {
                mu: crate::scalar::to_f64(mu),
                threshold: crate::scalar::to_f64(self.mu_max),
            });
        }
        Ok(())
    }
}

/// A pendulum orbit sampled on `[θ − T_cut, θ + T_cut]`.
///
/// The sample at index `center` sits at `t = θ`. Glued orbits have a
/// derivative jump there; `qdot[center]` is the left limit and
/// `qdot_right_at_theta` the right one.
#[derive(Debug, Clone)]
pub struct PseudoOrbit<T> {
    pub mu: T,
    pub phase: Vec<T>,
    pub theta: T,
    pub step: T,
    pub center: usize,
    pub t: Vec<T>,
    pub q: Vec<T>,
    pub qdot: Vec<T>,
    pub qdot_right_at_theta: T,
    /// Largest interior ODE defect.
    pub residual: T,
    /// Constrained orbits only.
    pub multiplier: Option<T>,
    /// Potential part `V` of the Lagrangian `q̇²/2 − V` at each sample; the
    /// value at `center` belongs to the left half.
    pub potential: Vec<T>,
    pub potential_right_at_theta: T,
    /// Exponential rates of the asymptotic tails at the two ends.
    pub decay_rates: (T, T),
    /// Constant added to the action (the `2π q̇` term of the translated problem).
    pub action_offset: T,
    /// `|∫(q − q_θ) ψ_θ dt|` for constrained orbits.
    pub constraint_defect: Option<T>,
    pub newton_iterations: usize,
}

impl<T: Real> PseudoOrbit<T> {
    pub fn derivative_jump(&self) -> T {
        self.qdot_right_at_theta - self.qdot[self.center]
    }

    pub fn boundary_values(&self) -> (T, T) {
        (self.q[0], *self.q.last().unwrap())
    }

    /// Text table `t q qdot`, with a small header.
    pub fn to_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# pseudo-orbit mu {:.17e} theta {:.17e}", self.mu, self.theta);
        let _ = write!(s, "# phase");
        for a in &self.phase {
            let _ = write!(s, " {a:.17e}");
        }
        let _ = writeln!(s);
        let _ = writeln!(s, "# residual {:.17e}", self.residual);
        if let Some(m) = self.multiplier {
            let _ = writeln!(s, "# multiplier {m:.17e}");
        }
        let _ = writeln!(s, "# t q qdot");
        for i in 0..self.t.len() {
            let _ = writeln!(s, "{:.17e} {:.17e} {:.17e}", self.t[i], self.q[i], self.qdot[i]);
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::{adaptive, QuadOptions};

    #[test]
    fn separatrix_at_gluing_time() {
        let (q, v) = separatrix(1.3f64, 1.3);
        assert!((q - std::f64::consts::PI).abs() < 1e-15);
        assert!((v - 2.0).abs() < 1e-15);
        let (q, v) = separatrix(60.0f64, 0.0);
        assert!((q - std::f64::consts::TAU).abs() < 1e-15 && v < 1e-25);
    }

    #[test]
    fn separatrix_has_zero_energy() {
        for i in -400..=400 {
            let t = i as f64 * 0.1;
            let (q, v) = separatrix(t, 0.0);
            assert!((0.5 * v * v + q.cos() - 1.0).abs() < 1e-12, "t={t}");
        }
    }

    #[test]
    fn weight_projection_is_nonzero() {
        let o = QuadOptions::default();
        let r = adaptive(|t: f64| psi0(t) * separatrix(t, 0.0).1, -40.0, 40.0, 16, &o).unwrap();
        assert!((r.value - 0.8).abs() < 1e-12);
        let r = adaptive(|t: f64| psi0(t), -40.0, 40.0, 16, &o).unwrap();
        assert!((r.value - 14.0 / 15.0).abs() < 1e-12);
        let t = 0.7f64;
        let direct = t.cosh().powi(2) / (1.0 + t.cosh()).powi(3);
        assert!((psi0(t) - direct).abs() < 1e-15);
    }
}
