use std::collections::BTreeMap;
use std::fmt::Write as _;

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::fourier::{dft_forward, linear_index, mode_to_bin, modes_in_box, multi_index, Mode};
use crate::frequencies::{FrequencyVector, PerturbationSeries};
use crate::linalg::DenseMatrix;
use crate::scalar::{from_i64, from_usize, lit, to_f64, Real};

#[derive(Debug, Clone, Copy)]
pub struct TorusOptions<T> {
    /// Truncation `|k|_∞ ≤ K`.
    pub k_modes: i64,
    pub tol: T,
    pub max_iter: usize,
    /// Largest accepted `1/|ω·k|` over the retained modes.
    pub max_amplification: T,
    /// Cap on the real dimension of the dense Newton system.
    pub max_unknowns: usize,
    pub mu_max: T,
}

impl<T: Real> Default for TorusOptions<T> {
    fn default() -> Self {
        Self {
            k_modes: 8,
            tol: lit(1e-11),
            max_iter: 40,
            max_amplification: lit(1e6),
            max_unknowns: 4000,
            mu_max: lit(0.1),
        }
    }
}

type ModeMap<T> = BTreeMap<Vec<i64>, Complex<T>>;

/// Fourier representation of the perturbed torus
/// `ψ ↦ (I_0 + a(ψ), ψ, Q(ψ), P(ψ))`, invariant under `ψ ↦ ψ + ωt`.
#[derive(Debug, Clone)]
pub struct InvariantTorus<T> {
    pub mu: T,
    pub omega: Vec<T>,
    pub k_modes: i64,
    pub q_hat: ModeMap<T>,
    pub p_hat: ModeMap<T>,
    /// One coefficient map per action component.
    pub a_hat: Vec<ModeMap<T>>,
    pub energy: T,
    /// Spread of the energy over the test grid.
    pub energy_spread: T,
    pub invariance_residual: T,
    pub newton_iterations: usize,
}

fn synth<T: Real>(map: &ModeMap<T>, psi: &[T]) -> T {
    map.iter().fold(T::zero(), |s, (k, c)| {
        let ang = k.iter().zip(psi).fold(T::zero(), |a, (&ki, &x)| a + from_i64::<T>(ki) * x);
        s + c.re * ang.cos() - c.im * ang.sin()
    })
}

fn synth_along<T: Real>(map: &ModeMap<T>, omega: &[T], phase: &[T], times: &[T]) -> Vec<T> {
    let mut out = vec![T::zero(); times.len()];
    for (k, c) in map {
        let freq = crate::angles::dot_int(omega, k);
        let p0 = crate::angles::dot_int(phase, k);
        for (o, &t) in out.iter_mut().zip(times) {
            let ang = p0 + freq * t;
            *o += c.re * ang.cos() - c.im * ang.sin();
        }
    }
    out
}

fn sup<T: Real>(map: &ModeMap<T>) -> T {
    map.values().fold(T::zero(), |s, c| s + c.norm())
}

impl<T: Real> InvariantTorus<T> {
    pub fn q_at(&self, psi: &[T]) -> T {
        synth(&self.q_hat, psi)
    }

    pub fn p_at(&self, psi: &[T]) -> T {
        synth(&self.p_hat, psi)
    }

    pub fn a_at(&self, psi: &[T]) -> Vec<T> {
        self.a_hat.iter().map(|m| synth(m, psi)).collect()
    }

    /// `(Q(ωt + A), P(ωt + A))` on a batch of times.
    pub fn along_line(&self, phase: &[T], times: &[T]) -> (Vec<T>, Vec<T>) {
        (
            synth_along(&self.q_hat, &self.omega, phase, times),
            synth_along(&self.p_hat, &self.omega, phase, times),
        )
    }

    /// `Σ|c_k|` bounds for `(Q, P, a)`.
    pub fn coefficient_norms(&self) -> (T, T, T) {
        let a = self.a_hat.iter().fold(T::zero(), |m, x| m.max(sup(x)));
        (sup(&self.q_hat), sup(&self.p_hat), a)
    }

    pub fn is_trivial(&self) -> bool {
        let (q, p, a) = self.coefficient_norms();
        q == T::zero() && p == T::zero() && a == T::zero()
    }

    /// The unperturbed torus `Q = P = a = 0`.
    pub fn trivial(mu: T, omega: &[T]) -> Self {
        Self {
            mu,
            omega: omega.to_vec(),
            k_modes: 0,
            q_hat: BTreeMap::new(),
            p_hat: BTreeMap::new(),
            a_hat: vec![BTreeMap::new(); omega.len()],
            energy: T::zero(),
            energy_spread: T::zero(),
            invariance_residual: T::zero(),
            newton_iterations: 0,
        }
    }

    /// Mode tables for each field, preceded by a header with `μ`, the
    /// residual and `E_μ`.
    pub fn to_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# invariant-torus mu {:.17e}", self.mu);
        let _ = writeln!(s, "# residual {:.17e}", self.invariance_residual);
        let _ = writeln!(s, "# energy {:.17e}", self.energy);
        let _ = writeln!(s, "# k_modes {}", self.k_modes);
        let mut fields: Vec<(String, &ModeMap<T>)> = vec![("Q".into(), &self.q_hat), ("P".into(), &self.p_hat)];
        for (j, m) in self.a_hat.iter().enumerate() {
            fields.push((format!("a{}", j + 1), m));
        }
        for (name, map) in fields {
            let _ = writeln!(s, "[{name}]");
            for (k, c) in map {
                for ki in k {
                    let _ = write!(s, "{ki} ");
                }
                let _ = writeln!(s, "{:.17e} {:.17e}", c.re, c.im);
            }
        }
        s
    }
}

fn shape_for(n: usize, k: i64) -> Vec<usize> {
    vec![(4 * k + 2) as usize; n]
}

fn grid_points<T: Real>(shape: &[usize], offset: T) -> Vec<Vec<T>> {
    let total: usize = shape.iter().product();
    (0..total)
        .map(|lin| {
            multi_index(lin, shape)
                .iter()
                .zip(shape)
                .map(|(&i, &len)| T::TAU() * (from_usize::<T>(i) + offset) / from_usize::<T>(len))
                .collect()
        })
        .collect()
}

fn coefficient_at<T: Real>(c: &[Complex<T>], shape: &[usize], k: &[i64]) -> Complex<T> {
    let idx: Option<Vec<usize>> = k.iter().zip(shape).map(|(&ki, &len)| mode_to_bin(ki, len)).collect();
    idx.map(|i| c[linear_index(&i, shape)]).unwrap_or_default()
}

/// Fourier–Newton solution of the invariance equations
/// `−D²Q + sin Q = μ ∂_q f(ψ, Q)`, `P = DQ`, `D a = −μ ∂_φ f(ψ, Q)` with
/// `D = ω·∂_ψ` and mean-zero `a`, truncated at `|k|_∞ ≤ K`.
pub fn solve_invariant_torus<T: Real>(
    mu: T,
    omega: &FrequencyVector<T>,
    f: &PerturbationSeries<T>,
    opts: &TorusOptions<T>,
) -> Result<InvariantTorus<T>> {
    let n = omega.dim();
    if f.dim() != n {
        return Err(Error::invalid("dimension mismatch between ω and f"));
    }
    if !mu.is_finite() || mu.abs() > opts.mu_max {
        return Err(Error::MuTooLarge {
            mu: to_f64(mu),
            threshold: to_f64(opts.mu_max),
        });
    }
    if opts.k_modes < 1 {
        return Err(Error::invalid("torus truncation K must be at least 1"));
    }
    let modes: Vec<Mode> = modes_in_box(n, opts.k_modes);
    let m = modes.len();
    if 2 * m > opts.max_unknowns {
        return Err(Error::Budget {
            needed: 2 * m as u128,
            budget: opts.max_unknowns as u128,
        });
    }
    let w = omega.omega();
    let divisors: Vec<T> = modes.iter().map(|k| omega.dot(k)).collect();
    for (k, &d) in modes.iter().zip(&divisors).skip(1) {
        let guard = omega.divisor_guard(k);
        if d.abs() < guard || T::one() / d.abs() > opts.max_amplification {
            return Err(Error::SmallDivisor {
                k: k.clone(),
                divisor: to_f64(d.abs()),
                guard: to_f64(guard.max(T::one() / opts.max_amplification)),
            });
        }
    }

    let shape = shape_for(n, opts.k_modes);
    let pts = grid_points::<T>(&shape, T::zero());
    let index: BTreeMap<Vec<i64>, usize> = modes.iter().cloned().enumerate().map(|(i, k)| (k, i)).collect();

    let mut qk = vec![Complex::<T>::default(); m];
    let synth_grid = |qk: &[Complex<T>]| -> Vec<T> {
        let mut full = vec![Complex::<T>::default(); pts.len()];
        for (k, c) in modes.iter().zip(qk) {
            let bins: Vec<usize> = k.iter().zip(&shape).map(|(&ki, &len)| mode_to_bin(ki, len).unwrap()).collect();
            full[linear_index(&bins, &shape)] = *c;
        }
        crate::fourier::dft_inverse(&full, &shape).iter().map(|z| z.re).collect()
    };

    let mut iterations = 0;
    let mut last_step = T::infinity();
    for iter in 0..opts.max_iter {
        let qv = synth_grid(&qk);
        let mut res = vec![T::zero(); pts.len()];
        let mut lin = vec![T::zero(); pts.len()];
        for (j, p) in pts.iter().enumerate() {
            let jet = f.jet(p, qv[j]);
            res[j] = qv[j].sin() - mu * jet.df_dq;
            lin[j] = qv[j].cos() - mu * jet.d2f_dq2;
        }
        let rc = dft_forward(&res, &shape);
        let lc = dft_forward(&lin, &shape);
        let mut rhs = vec![T::zero(); 2 * m];
        let mut rnorm = T::zero();
        for (i, k) in modes.iter().enumerate() {
            let r = rc_at(&rc, &shape, k) + qk[i] * (divisors[i] * divisors[i]);
            rhs[i] = -r.re;
            rhs[m + i] = -r.im;
            rnorm = rnorm.max(r.norm());
        }
        if rnorm <= opts.tol * lit(1e-3) || (last_step <= lit(1e-15) && rnorm <= opts.tol) {
            iterations = iter;
            break;
        }
        let mut jac = DenseMatrix::zeros(2 * m);
        for (i, k) in modes.iter().enumerate() {
            for (jj, kp) in modes.iter().enumerate() {
                let diff: Vec<i64> = k.iter().zip(kp).map(|(a, b)| a - b).collect();
                let mut c = coefficient_at(&lc, &shape, &diff);
                if i == jj {
                    c.re += divisors[i] * divisors[i];
                }
                jac.set(i, jj, c.re);
                jac.set(i, m + jj, -c.im);
                jac.set(m + i, jj, c.im);
                jac.set(m + i, m + jj, c.re);
            }
        }
        let step = jac.solve(&rhs)?;
        last_step = T::zero();
        for i in 0..m {
            let d = Complex::new(step[i], step[m + i]);
            qk[i] += d;
            last_step = last_step.max(d.norm());
        }
        // restore reality symmetry
        let snapshot = qk.clone();
        for (i, k) in modes.iter().enumerate() {
            let neg: Vec<i64> = k.iter().map(|x| -x).collect();
            let j = index[&neg];
            qk[i] = (snapshot[i] + snapshot[j].conj()) * lit::<T>(0.5);
        }
        iterations = iter + 1;
        if iter + 1 == opts.max_iter {
            return Err(Error::NonConvergence {
                residual: to_f64(rnorm),
                context: "invariant torus Newton iteration".into(),
            });
        }
    }

    let mut q_hat = BTreeMap::new();
    let mut p_hat = BTreeMap::new();
    for (i, k) in modes.iter().enumerate() {
        if qk[i].norm() > T::zero() {
            q_hat.insert(k.clone(), qk[i]);
            p_hat.insert(k.clone(), qk[i] * Complex::new(T::zero(), divisors[i]));
        }
    }

    let qv = synth_grid(&qk);
    let mut a_hat = vec![BTreeMap::new(); n];
    let mut grads: Vec<Vec<T>> = vec![vec![T::zero(); pts.len()]; n];
    for (j, p) in pts.iter().enumerate() {
        let jet = f.jet(p, qv[j]);
        for d in 0..n {
            grads[d][j] = jet.grad_phi[d];
        }
    }
    for d in 0..n {
        let gc = dft_forward(&grads[d], &shape);
        for (i, k) in modes.iter().enumerate().skip(1) {
            let c = rc_at(&gc, &shape, k);
            let a = c * (-mu) / Complex::new(T::zero(), divisors[i]);
            if a.norm() > T::zero() {
                a_hat[d].insert(k.clone(), a);
            }
        }
    }

    let mut torus = InvariantTorus {
        mu,
        omega: w.to_vec(),
        k_modes: opts.k_modes,
        q_hat,
        p_hat,
        a_hat,
        energy: T::zero(),
        energy_spread: T::zero(),
        invariance_residual: T::zero(),
        newton_iterations: iterations,
    };
    let (res, e_mean, e_spread) = invariance_check(&torus, f, &shape);
    torus.invariance_residual = res;
    torus.energy = e_mean;
    torus.energy_spread = e_spread;
    Ok(torus)
}

fn rc_at<T: Real>(c: &[Complex<T>], shape: &[usize], k: &[i64]) -> Complex<T> {
    coefficient_at(c, shape, k)
}

/// Equations of motion along the flow, checked on a grid offset by half a
/// cell from the collocation grid. Returns `(max defect, mean energy, energy spread)`.
fn invariance_check<T: Real>(torus: &InvariantTorus<T>, f: &PerturbationSeries<T>, shape: &[usize]) -> (T, T, T) {
    let n = torus.omega.len();
    let pts = grid_points::<T>(shape, lit(0.5));
    let derive = |map: &ModeMap<T>| -> ModeMap<T> {
        map.iter()
            .map(|(k, c)| (k.clone(), c * Complex::new(T::zero(), crate::angles::dot_int(&torus.omega, k))))
            .collect()
    };
    let dp = derive(&torus.p_hat);
    let dq = derive(&torus.q_hat);
    let da: Vec<ModeMap<T>> = torus.a_hat.iter().map(derive).collect();
    let mut worst = T::zero();
    let mut energies = Vec::with_capacity(pts.len());
    for p in &pts {
        let q = synth(&torus.q_hat, p);
        let pv = synth(&torus.p_hat, p);
        let jet = f.jet(p, q);
        worst = worst.max((synth(&dq, p) - pv).abs());
        worst = worst.max((synth(&dp, p) - (q.sin() - torus.mu * jet.df_dq)).abs());
        let mut wa = T::zero();
        for d in 0..n {
            worst = worst.max((synth(&da[d], p) + torus.mu * jet.grad_phi[d]).abs());
            wa += torus.omega[d] * synth(&torus.a_hat[d], p);
        }
        energies.push(wa + pv * pv * lit(0.5) + q.cos() - T::one() + torus.mu * jet.f);
    }
    let mean = energies.iter().fold(T::zero(), |s, &e| s + e) / from_usize::<T>(energies.len());
    let spread = energies.iter().fold(T::zero(), |s, &e| s.max((e - mean).abs()));
    (worst, mean, spread)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frequencies::{golden, QMode};

    fn omega() -> FrequencyVector<f64> {
        FrequencyVector::new(golden(), 0.05, 1.0).unwrap()
    }

    #[test]
    fn factor_coupling_leaves_torus_untouched() {
        let f = PerturbationSeries::cosines(2, &[(vec![1, 0], 1.0), (vec![1, 1], 0.3)]);
        let t = solve_invariant_torus(1e-2, &omega(), &f, &TorusOptions { k_modes: 4, ..Default::default() }).unwrap();
        assert!(t.is_trivial());
        assert_eq!(t.invariance_residual, 0.0);
    }

    #[test]
    fn q_independent_coupling_gives_closed_form_actions() {
        let mut f = PerturbationSeries::new(2, QMode::GeneralInQ);
        f.add_cosine(&[1, 0], 0, 0.7);
        f.add_sine(&[1, -1], 0, 0.4);
        f.add_cosine(&[2, 1], 0, 0.1);
        let mu = 1e-2;
        let w = omega();
        let t = solve_invariant_torus(mu, &w, &f, &TorusOptions { k_modes: 4, ..Default::default() }).unwrap();
        assert!(t.q_hat.is_empty() && t.p_hat.is_empty());
        for (key, fk) in f.coefficients() {
            let wk = w.dot(&key.k);
            for d in 0..2 {
                let expect = *fk * (-mu * key.k[d] as f64 / wk);
                let got = t.a_hat[d].get(&key.k).copied().unwrap_or_default();
                assert!((got - expect).norm() < 1e-10, "k={:?} d={d}", key.k);
            }
        }
        assert!(t.invariance_residual < 1e-12);
    }

    #[test]
    fn small_divisor_is_refused_with_mode() {
        let w = FrequencyVector::new(vec![1.0f64, 1.0 + 1e-9], 0.01, 1.0).unwrap();
        let mut f = PerturbationSeries::new(2, QMode::GeneralInQ);
        f.add_cosine(&[1, 0], 1, 1.0);
        match solve_invariant_torus(1e-3, &w, &f, &TorusOptions { k_modes: 2, ..Default::default() }) {
            Err(Error::SmallDivisor { k, .. }) => assert_eq!(k.iter().map(|x| x.abs()).sum::<i64>(), 2),
            other => panic!("expected small divisor, got {other:?}"),
        }
    }
}
