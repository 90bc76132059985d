//! Action functionals on pseudo-orbits, Poincaré–Melnikov primitives and
//! their Fourier coefficients.
//!
//! With the Lagrangian `q̇²/2 + (1 − cos q) − μ f`, the first-order term of
//! every homoclinic function is `−μ Γ` (or `−μ M`): `G_μ = 8 − μΓ + O(μ²)`.

mod grid;

pub use grid::{
    evaluate_grid, fourier_of_grid, synthesize_grid, FourierTable, GridKind, GridSpec, HomoclinicGrid,
};

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::frequencies::{PerturbationSeries, QMode};
use crate::pendulum::{
    separatrix, solve_constrained_heteroclinic, solve_general_heteroclinic, solve_glued_heteroclinic,
    InvariantTorus, PseudoOrbit, SolverOptions,
};
use crate::quadrature::{adaptive, simpson, QuadOptions};
use crate::scalar::{from_i64, lit, to_f64, Real};

/// The unperturbed action `∫ q̇_0² dt`.
pub const UNPERTURBED_ACTION: f64 = 8.0;

/// Action of a sampled orbit: composite Simpson on each side of `θ`, the
/// exponential tails beyond the window, and the orbit's constant offset.
pub fn orbit_action<T: Real>(orbit: &PseudoOrbit<T>) -> T {
    let c = orbit.center;
    let half = lit::<T>(0.5);
    let lag: Vec<T> = orbit
        .qdot
        .iter()
        .zip(&orbit.potential)
        .map(|(&v, &p)| half * v * v - p)
        .collect();
    let left = simpson(&lag[..=c], orbit.step);
    let mut right_vals = lag[c..].to_vec();
    right_vals[0] = half * orbit.qdot_right_at_theta * orbit.qdot_right_at_theta - orbit.potential_right_at_theta;
    let right = simpson(&right_vals, orbit.step);
    let (l0, l1) = orbit.decay_rates;
    let (b0, b1) = orbit.boundary_values();
    let d1 = T::TAU() - b1;
    let tails = half * (l0 * b0 * b0 + l1 * d1 * d1);
    left + right + tails + orbit.action_offset
}

/// `F_μ(A, θ)`: action along the glued orbit `q^μ_{A,θ}`.
pub fn action_glued<T: Real>(
    mu: T,
    phase: &[T],
    theta: T,
    omega: &[T],
    f: &PerturbationSeries<T>,
    opts: &SolverOptions<T>,
) -> Result<T> {
    solve_glued_heteroclinic(mu, phase, theta, omega, f, opts).map(|o| orbit_action(&o))
}

/// `F̃_μ(A, θ)`: full-line action along the constrained orbit `Q^μ_{A,θ}`.
pub fn action_reduced<T: Real>(
    mu: T,
    phase: &[T],
    theta: T,
    omega: &[T],
    f: &PerturbationSeries<T>,
    opts: &SolverOptions<T>,
) -> Result<T> {
    solve_constrained_heteroclinic(mu, phase, theta, omega, f, opts).map(|o| orbit_action(&o))
}

/// `ℱ_μ(A, θ)`: action of the translated problem with `P_0` before `θ`,
/// `P_1` after it, plus `2π q̇^μ_A(θ)`.
pub fn action_general<T: Real>(
    mu: T,
    phase: &[T],
    theta: T,
    torus: &InvariantTorus<T>,
    f: &PerturbationSeries<T>,
    opts: &SolverOptions<T>,
) -> Result<T> {
    solve_general_heteroclinic(mu, phase, theta, torus, f, opts).map(|o| orbit_action(&o))
}

/// `x ↦ 2πx / sinh(πx/2)`, with the removable singularity filled by its
/// series and large `|x|` evaluated as `4π|x| e^{−π|x|/2} / (1 − e^{−π|x|})`.
pub fn melnikov_kernel<T: Real>(x: T) -> T {
    let y = T::FRAC_PI_2() * x.abs();
    if y < lit(1e-4) {
        let y2 = y * y;
        lit::<T>(4.0) * (T::one() - y2 / lit(6.0) + lit::<T>(7.0) * y2 * y2 / lit(360.0))
    } else {
        lit::<T>(8.0) * y * (-y).exp() / (T::one() - (-(y + y)).exp())
    }
}

/// `ln` of [`melnikov_kernel`], finite for every `x` where the kernel
/// itself underflows.
pub fn log_melnikov_kernel<T: Real>(x: T) -> T {
    let y = T::FRAC_PI_2() * x.abs();
    if y < lit(1e-4) {
        return melnikov_kernel(x).ln();
    }
    (lit::<T>(8.0) * y).ln() - y - (-(-(y + y)).exp()).ln_1p()
}

/// `Γ_k = f_k · 2π(k·ω) / sinh(k·ω π/2)`.
pub fn melnikov_coefficient<T: Real>(k: &[i64], omega: &[T], fk: Complex<T>) -> Complex<T> {
    fk * melnikov_kernel(crate::angles::dot_int(omega, k))
}

/// `Γ(A)` and `∇Γ(A)` by Fourier synthesis of the closed-form coefficients.
pub fn melnikov_series<T: Real>(phase: &[T], omega: &[T], f: &PerturbationSeries<T>) -> (T, Vec<T>) {
    let mut val = T::zero();
    let mut grad = vec![T::zero(); phase.len()];
    for (key, fk) in f.coefficients() {
        let g = melnikov_coefficient(&key.k, omega, *fk);
        let ang = crate::angles::dot_int(phase, &key.k);
        let e = g * Complex::new(ang.cos(), ang.sin());
        val += e.re;
        for (gd, &kd) in grad.iter_mut().zip(&key.k) {
            *gd -= from_i64::<T>(kd) * e.im;
        }
    }
    (val, grad)
}

/// Integration half-window used by the quadratures along the separatrix.
const QUAD_WINDOW: f64 = 40.0;

fn line_pieces<T: Real>(omega: &[T]) -> usize {
    let wmax = omega.iter().fold(0.0f64, |m, w| m.max(to_f64(w.abs())));
    (2.0 * QUAD_WINDOW * wmax / std::f64::consts::PI).ceil() as usize + 32
}

/// `Γ(A) = ∫ (1 − cos q_0(t)) g(ωt + A) dt` by adaptive quadrature on
/// `|t| ≤ 40`; the discarded tails are below `8‖g‖ e^{−80}`.
pub fn melnikov_primitive<T: Real>(phase: &[T], omega: &[T], f: &PerturbationSeries<T>) -> Result<T> {
    if f.mode() != QMode::FactorOneMinusCosQ {
        return Err(Error::WrongMode("Γ needs f = (1 − cos q) g(φ)".into()));
    }
    let w = lit::<T>(QUAD_WINDOW);
    let opts = QuadOptions::default();
    let integrand = |t: T| {
        let c = t.cosh();
        let phi: Vec<T> = phase.iter().zip(omega).map(|(&a, &wi)| a + wi * t).collect();
        lit::<T>(2.0) / (c * c) * f.synthesize(&phi, T::zero()).re
    };
    adaptive(integrand, -w, w, line_pieces(omega), &opts).map(|r| r.value)
}

/// `M(A) = ∫ [f(ωt + A, q_0(t)) − f(ωt + A, 0)] dt`.
pub fn melnikov_general<T: Real>(phase: &[T], omega: &[T], f: &PerturbationSeries<T>) -> Result<T> {
    let w = lit::<T>(QUAD_WINDOW);
    let opts = QuadOptions::default();
    let integrand = |t: T| {
        let q0 = separatrix(t, T::zero()).0;
        let phi: Vec<T> = phase.iter().zip(omega).map(|(&a, &wi)| a + wi * t).collect();
        f.evaluate(&phi, q0) - f.evaluate(&phi, T::zero())
    };
    adaptive(integrand, -w, w, line_pieces(omega), &opts).map(|r| r.value)
}

/// First-order action jump `ΔI = −μ ∇Γ(A)` along a transition at phase `A`.
pub fn melnikov_jump<T: Real>(mu: T, phase: &[T], omega: &[T], f: &PerturbationSeries<T>) -> Vec<T> {
    melnikov_series(phase, omega, f).1.into_iter().map(|g| -mu * g).collect()
}

/// `ΔI = −μ ∫ (1 − cos q) ∇_φ g(ωt + A) dt` along a computed orbit, with the
/// orbit's own grid and Simpson weights on both halves.
pub fn action_jump_along<T: Real>(orbit: &PseudoOrbit<T>, omega: &[T], f: &PerturbationSeries<T>) -> Vec<T> {
    let n = omega.len();
    let c = orbit.center;
    let mut out = vec![T::zero(); n];
    for d in 0..n {
        let vals: Vec<T> = orbit
            .t
            .iter()
            .zip(&orbit.q)
            .map(|(&t, &q)| {
                let phi: Vec<T> = orbit.phase.iter().zip(omega).map(|(&a, &w)| a + w * t).collect();
                (T::one() - q.cos()) * f.angular_part(&phi).1[d]
            })
            .collect();
        out[d] = -orbit.mu * (simpson(&vals[..=c], orbit.step) + simpson(&vals[c..], orbit.step));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn golden() -> Vec<f64> {
        crate::frequencies::golden()
    }

    #[test]
    fn kernel_limit_and_large_argument() {
        assert!((melnikov_kernel(0.0f64) - 4.0).abs() < 1e-15);
        for x in [1e-6f64, 1e-3, 0.5, 2.0, 30.0] {
            let direct = 2.0 * std::f64::consts::PI * x / (std::f64::consts::FRAC_PI_2 * x).sinh();
            assert!((melnikov_kernel(x) - direct).abs() < 1e-13 * direct.max(1.0), "x={x}");
        }
        let k = melnikov_kernel(2000.0f64);
        assert!(k.is_finite() && k >= 0.0);
        let lk = log_melnikov_kernel(2000.0f64);
        assert!((lk - ((8000.0 * std::f64::consts::PI).ln() - 1000.0 * std::f64::consts::PI)).abs() < 1e-12);
        assert!((log_melnikov_kernel(3.0f64) - melnikov_kernel(3.0f64).ln()).abs() < 1e-14);
        assert_eq!(melnikov_kernel(-2.0f64), melnikov_kernel(2.0));
        let g = melnikov_coefficient(&[1, 1], &[1.0, 1.0], Complex::new(1.0, 0.0));
        let expect = 4.0 * std::f64::consts::PI / std::f64::consts::PI.sinh();
        assert!((g.re - expect).abs() < 1e-14);
    }

    #[test]
    fn constant_coupling_primitive_is_four() {
        let f = PerturbationSeries::cosines(2, &[(vec![0, 0], 1.0)]);
        let v = melnikov_primitive(&[0.3, 0.2], &golden(), &f).unwrap();
        assert!((v - 4.0).abs() < 1e-12);
    }

    #[test]
    fn primitive_matches_coefficients_and_shift() {
        let f = PerturbationSeries::cosines(2, &[(vec![1, 0], 1.0), (vec![2, -1], 0.4), (vec![0, 1], 0.3)]);
        let w = golden();
        for a in [[0.0, 0.0], [1.0, 2.5], [4.0, 0.3]] {
            let q = melnikov_primitive(&a, &w, &f).unwrap();
            let (s, _) = melnikov_series(&a, &w, &f);
            assert!((q - s).abs() < 1e-10);
        }
        let s = 0.77;
        let a = [0.4, 1.1];
        let shifted: Vec<f64> = a.iter().zip(&w).map(|(x, wi)| x + wi * s).collect();
        let lhs = melnikov_primitive(&shifted, &w, &f).unwrap();
        let opts = QuadOptions::default();
        let rhs = adaptive(
            |t: f64| {
                let c = (t - s).cosh();
                let phi: Vec<f64> = a.iter().zip(&w).map(|(x, wi)| x + wi * t).collect();
                2.0 / (c * c) * f.synthesize(&phi, 0.0).re
            },
            -40.0 + s,
            40.0 + s,
            80,
            &opts,
        )
        .unwrap()
        .value;
        assert!((lhs - rhs).abs() < 1e-10);
    }

    #[test]
    fn general_melnikov_examples() {
        let w = golden();
        let g = PerturbationSeries::cosines(2, &[(vec![1, 0], 1.0), (vec![1, 1], 0.5)]);
        let gen = g.to_general();
        let a = [0.6, 1.9];
        let m = melnikov_general(&a, &w, &gen).unwrap();
        assert!((m - melnikov_primitive(&a, &w, &g).unwrap()).abs() < 1e-11);
        let mut flat = PerturbationSeries::new(2, QMode::GeneralInQ);
        flat.add_cosine(&[1, 0], 0, 1.0);
        assert!(melnikov_general(&a, &w, &flat).unwrap().abs() < 1e-14);
        let mut sq = PerturbationSeries::new(2, QMode::GeneralInQ);
        sq.add_sine(&[1, 0], 1, 0.5);
        sq.add_sine(&[-1, 0], 1, 0.5);
        let m: f64 = melnikov_general(&[0.7, 0.0], &[1.0, 1.618], &sq).unwrap();
        assert!((m - 1.6131730530551422).abs() < 1e-10, "M = {m}");
    }

    #[test]
    fn unperturbed_actions_are_eight() {
        let f = PerturbationSeries::cosines(2, &[(vec![1, 0], 1.0)]);
        let o = SolverOptions::default();
        let g = action_glued(0.0, &[0.1, 0.2], 0.0, &golden(), &f, &o).unwrap();
        let r = action_reduced(0.0, &[0.1, 0.2], 0.0, &golden(), &f, &o).unwrap();
        assert!((g - 8.0).abs() < 1e-9, "glued {g}");
        assert!((r - 8.0).abs() < 1e-9, "reduced {r}");
        assert!((g - r).abs() < 1e-9);
    }

    #[test]
    fn first_order_term_is_minus_mu_gamma() {
        let w = golden();
        let f = PerturbationSeries::cosines(2, &[(vec![1, 0], 1.0), (vec![1, 1], 0.5)]);
        let o = SolverOptions::default();
        let a = [0.3, 1.2];
        let gamma = melnikov_primitive(&a, &w, &f).unwrap();
        let mut prev = [0.0; 3];
        for (j, mu) in [4e-3, 2e-3, 1e-3].into_iter().enumerate() {
            let g = action_glued(mu, &a, 0.0, &w, &f, &o).unwrap();
            let r = action_reduced(mu, &a, 0.0, &w, &f, &o).unwrap();
            let t = crate::pendulum::InvariantTorus::trivial(mu, &w);
            let e = action_general(mu, &a, 0.0, &t, &f, &o).unwrap();
            let rem = [g - 8.0 + mu * gamma, r - 8.0 + mu * gamma, e - 8.0 + mu * gamma];
            eprintln!("mu {mu}: {rem:?}");
            if j > 0 {
                for d in 0..3 {
                    let ratio = prev[d] / rem[d];
                    assert!((ratio - 4.0).abs() < 0.4, "component {d} ratio {ratio}");
                }
            }
            prev = rem;
        }
    }
}
