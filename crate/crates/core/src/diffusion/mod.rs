//! Long-time integration of the full system, numerically realized
//! transition chains and diffusion-time scaling.

mod chain;

pub use chain::{
    launch_geometry, run_scaling_study, run_transition_chain, scaling_study, single_transition, ChainConfig, DiffusionRun, RunBudget,
    ScalingInput, ScalingReport, ScalingRow, StopReason, TransitionEvent,
};

use crate::angles::wrap;
use crate::error::{Error, Result};
use crate::frequencies::{PerturbationSeries, QMode};
use crate::melnikov::{evaluate_grid, fourier_of_grid, synthesize_grid, GridKind, GridSpec};
use crate::pendulum::SolverOptions;
use crate::scalar::{lit, Real};
use crate::splitting::{find_minimum, suggest_window_from_minimum, MinimumReport, SplittingReport, SplittingWindow, WindowSearch};

/// Point of the extended phase space `(φ, I, q, p)` at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct FullState<T> {
    /// Angles in `[0, 2π)`.
    pub phi: Vec<T>,
    pub action: Vec<T>,
    pub q: T,
    pub p: T,
    pub t: T,
}

impl<T: Real> FullState<T> {
    pub fn new(phi: Vec<T>, action: Vec<T>, q: T, p: T, t: T) -> Result<Self> {
        if phi.len() != action.len() {
            return Err(Error::invalid("angle and action dimensions differ"));
        }
        if !action.iter().all(|x| x.is_finite()) || !p.is_finite() || !q.is_finite() {
            return Err(Error::invalid("state must be finite"));
        }
        Ok(Self { phi: phi.into_iter().map(wrap).collect(), action, q, p, t })
    }

    /// `p²/2 + cos q − 1`.
    pub fn pendulum_energy(&self) -> T {
        lit::<T>(0.5) * self.p * self.p + self.q.cos() - T::one()
    }

    /// `ω·I + p²/2 + cos q − 1 + μ f(φ, q)`.
    pub fn energy(&self, mu: T, omega: &[T], f: &PerturbationSeries<T>) -> T {
        crate::angles::dot(omega, &self.action) + self.pendulum_energy() + mu * f.evaluate(&self.phi, self.q)
    }
}

/// Fixed-step splitting scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    /// Strang splitting, second order.
    Leapfrog,
    /// Triple-jump composition of the Strang step, fourth order.
    Yoshida4,
}

/// Kick–drift integrator for `H = ω·I + p²/2 + V(φ, q)` with
/// `V = cos q − 1 + μ f(φ, q)`. The rotator angles are never integrated:
/// they are evaluated as `φ(0) + ω t` from the integer step count.
pub struct Integrator<'a, T> {
    pub mu: T,
    pub omega: &'a [T],
    pub f: &'a PerturbationSeries<T>,
    pub dt: T,
    pub scheme: Scheme,
    phi0: Vec<T>,
    t0: T,
    steps: u64,
    pub action: Vec<T>,
    pub q: T,
    pub p: T,
}

impl<'a, T: Real> Integrator<'a, T> {
    pub fn new(state: &FullState<T>, mu: T, omega: &'a [T], f: &'a PerturbationSeries<T>, dt: T, scheme: Scheme) -> Result<Self> {
        if !(dt > T::zero()) {
            return Err(Error::invalid("time step must be positive"));
        }
        if omega.len() != state.phi.len() || f.dim() != omega.len() {
            return Err(Error::invalid("state, frequency and perturbation dimensions differ"));
        }
        Ok(Self {
            mu,
            omega,
            f,
            dt,
            scheme,
            phi0: state.phi.clone(),
            t0: state.t,
            steps: 0,
            action: state.action.clone(),
            q: state.q,
            p: state.p,
        })
    }

    pub fn time(&self) -> T {
        self.t0 + self.dt * lit::<T>(self.steps as f64)
    }

    /// Unwrapped rotator angles at `time() + s`.
    pub fn phase_at(&self, s: T) -> Vec<T> {
        let t = self.dt * lit::<T>(self.steps as f64) + s;
        self.phi0.iter().zip(self.omega).map(|(&a, &w)| a + w * t).collect()
    }

    pub fn state(&self) -> FullState<T> {
        FullState {
            phi: self.phase_at(T::zero()).into_iter().map(wrap).collect(),
            action: self.action.clone(),
            q: self.q,
            p: self.p,
            t: self.time(),
        }
    }

    fn kick(&mut self, s: T, tau: T) {
        // on the torus q = p = 0 the factor coupling exerts no force at all
        if self.q == T::zero() && self.f.mode() == QMode::FactorOneMinusCosQ {
            return;
        }
        let phi = self.phase_at(s);
        let jet = self.f.jet(&phi, self.q);
        self.p += tau * (self.q.sin() - self.mu * jet.df_dq);
        if self.mu != T::zero() {
            for (a, g) in self.action.iter_mut().zip(&jet.grad_phi) {
                *a -= tau * self.mu * *g;
            }
        }
    }

    fn strang(&mut self, s: T, tau: T) {
        let half = lit::<T>(0.5) * tau;
        self.kick(s, half);
        self.q += tau * self.p;
        self.kick(s + tau, half);
    }

    pub fn step(&mut self) {
        let dt = self.dt;
        match self.scheme {
            Scheme::Leapfrog => self.strang(T::zero(), dt),
            Scheme::Yoshida4 => {
                let cbrt2 = lit::<T>(2.0).cbrt();
                let w1 = T::one() / (lit::<T>(2.0) - cbrt2);
                let w0 = -cbrt2 * w1;
                self.strang(T::zero(), w1 * dt);
                self.strang(w1 * dt, w0 * dt);
                self.strang((w1 + w0) * dt, w1 * dt);
            }
        }
        self.steps += 1;
    }
}

/// Checkpointed trajectory.
#[derive(Debug, Clone)]
pub struct Trajectory<T> {
    pub states: Vec<FullState<T>>,
    /// `max_t |ℋ_μ(t) − ℋ_μ(0)|` over the checkpoints.
    pub energy_drift: T,
    /// Same for the pendulum energy `p²/2 + cos q − 1`.
    pub pendulum_drift: T,
}

/// Integrates for `t_final` (a multiple of `dt`), keeping every
/// `checkpoint_every`-th state.
#[allow(clippy::too_many_arguments)]
pub fn integrate<T: Real>(
    state: &FullState<T>,
    mu: T,
    omega: &[T],
    f: &PerturbationSeries<T>,
    t_final: T,
    dt: T,
    scheme: Scheme,
    checkpoint_every: usize,
) -> Result<Trajectory<T>> {
    let steps_f = t_final / dt;
    let steps = steps_f.round();
    if (steps_f - steps).abs() > lit(1e-6) || steps < T::zero() {
        return Err(Error::invalid("integration time must be a non-negative multiple of dt"));
    }
    let steps = steps.to_u64().unwrap_or(0);
    let every = checkpoint_every.max(1) as u64;
    let mut it = Integrator::new(state, mu, omega, f, dt, scheme)?;
    let h0 = state.energy(mu, omega, f);
    let e0 = state.pendulum_energy();
    let mut states = vec![it.state()];
    let (mut drift, mut pdrift) = (T::zero(), T::zero());
    for k in 1..=steps {
        it.step();
        if k % every == 0 || k == steps {
            let s = it.state();
            drift = drift.max((s.energy(mu, omega, f) - h0).abs());
            pdrift = pdrift.max((s.pendulum_energy() - e0).abs());
            states.push(s);
        }
    }
    Ok(Trajectory {
        states,
        energy_drift: drift,
        pendulum_drift: pdrift,
    })
}

/// Splitting window around the minimum of `G_μ`: the glued homoclinic
/// function is sampled on a `coarse` full-torus grid, Fourier-interpolated to
/// `fine`, and searched with [`suggest_window_from_minimum`].
pub fn experiment_window<T: Real>(
    mu: T,
    omega: &[T],
    f: &PerturbationSeries<T>,
    coarse: &[usize],
    fine: &[usize],
    opts: &SolverOptions<T>,
    search: &WindowSearch<T>,
) -> Result<(SplittingWindow<T>, SplittingReport<T>, MinimumReport<T>)> {
    let grid = evaluate_grid(GridKind::Glued, mu, GridSpec::full_torus(coarse), omega, f, None, opts)?;
    let table = fourier_of_grid(&grid)?;
    let dense = synthesize_grid(&table, GridSpec::full_torus(fine))?;
    let minimum = find_minimum(&dense)?;
    let (window, report) = suggest_window_from_minimum(&dense, &minimum.point, search)?;
    Ok((window, report, minimum))
}
