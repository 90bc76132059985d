//! Three-time-scale frequencies `ω_ε = (1/√ε, ε^a)`: exponentially small
//! `k_1 ≠ 0` coefficients of the reduced homoclinic function and the
//! window of the exponentially small splitting theorem.

use std::fmt::Write as _;

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::frequencies::{FrequencyVector, PerturbationSeries, QMode};
use crate::melnikov::{
    evaluate_grid, fourier_of_grid, melnikov_coefficient, synthesize_grid, FourierTable, GridKind, GridSpec,
};
use crate::pendulum::SolverOptions;
use crate::scalar::{from_i64, from_usize, lit, to_f64, Real};

use super::{check_splitting_condition, find_minimum_of, SplittingReport, SplittingWindow};

/// Settings of [`three_timescale_analysis`].
#[derive(Debug, Clone)]
pub struct ThreeScaleOptions<T> {
    /// Exponent of the slow frequency `ω_2 = ε^a`.
    pub a: T,
    /// `μ = mu_coefficient · ε^{mu_power}`.
    pub mu_coefficient: T,
    pub mu_power: T,
    /// Reduced-function grid on the full torus.
    pub shape: [usize; 2],
    pub solver: SolverOptions<T>,
    /// `|G̃_{(1,0)}|` below this is treated as numerical noise and the `ε` is dropped.
    pub floor: T,
}

impl<T: Real> Default for ThreeScaleOptions<T> {
    fn default() -> Self {
        Self {
            a: T::one(),
            mu_coefficient: T::one(),
            mu_power: lit(2.0),
            shape: [8, 8],
            solver: SolverOptions::default(),
            floor: lit(1e-12),
        }
    }
}

impl<T: Real> ThreeScaleOptions<T> {
    pub fn mu(&self, eps: T) -> T {
        self.mu_coefficient * eps.powf(self.mu_power)
    }

    pub fn omega(&self, eps: T) -> Vec<T> {
        vec![T::one() / eps.sqrt(), eps.powf(self.a)]
    }
}

/// One `ε` of the sweep.
#[derive(Debug, Clone)]
pub struct ThreeScaleRow<T> {
    pub eps: T,
    pub mu: T,
    /// `Γ_{(1,0)}` from the closed form.
    pub gamma_10: T,
    /// `f_{(1,0)} (4π/√ε) e^{−π/(2√ε)}`.
    pub gamma_10_asymptotic: T,
    /// `|G̃_{(1,0)}|` from the computed grid.
    pub g1: T,
    /// `|G̃_{(1,0)}| / (μ Γ_{(1,0)})`.
    pub first_order_ratio: T,
    /// `sup |G̃_0 − ⟨G̃_0⟩ + μ(Γ_0 − ⟨Γ_0⟩)| / (μ² ‖f‖²)`.
    pub r0_ratio: T,
    /// `sup |G̃_1 + μ Γ_1| / ((μ² ‖f‖² / ε²) e^{−π/(2√ε)})`.
    pub r1_ratio: T,
    pub aliasing_bound: T,
}

/// Sweep result with log-slope fits against `1/√ε`.
#[derive(Debug, Clone)]
pub struct ThreeScaleReport<T> {
    pub rows: Vec<ThreeScaleRow<T>>,
    /// Fit of `ln(√ε Γ_{(1,0)})`.
    pub slope_closed_form: T,
    /// Fit of `ln(√ε |G̃_{(1,0)}| / μ)`, the headline number; `−π/2` expected.
    pub slope_normalized: T,
    /// Fit of `ln |G̃_{(1,0)}|` with no prefactor removed.
    pub slope_raw: T,
    pub warnings: Vec<String>,
}

impl<T: Real> ThreeScaleReport<T> {
    pub fn to_csv(&self) -> String {
        let mut s = String::from(
            "eps,mu,gamma_10,gamma_10_asymptotic,g1,first_order_ratio,r0_ratio,r1_ratio,aliasing_bound\n",
        );
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}",
                r.eps,
                r.mu,
                r.gamma_10,
                r.gamma_10_asymptotic,
                r.g1,
                r.first_order_ratio,
                r.r0_ratio,
                r.r1_ratio,
                r.aliasing_bound
            );
        }
        s
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "slope_closed_form={:.17e}", self.slope_closed_form);
        let _ = writeln!(s, "slope_normalized={:.17e}", self.slope_normalized);
        let _ = writeln!(s, "slope_raw={:.17e}", self.slope_raw);
        let _ = writeln!(s, "slope_target={:.17e}", -std::f64::consts::FRAC_PI_2);
        for w in &self.warnings {
            let _ = writeln!(s, "warning={w}");
        }
        s
    }
}

fn slope<T: Real>(x: &[T], y: &[T]) -> T {
    let n = from_usize::<T>(x.len());
    let mx = x.iter().fold(T::zero(), |a, &v| a + v) / n;
    let my = y.iter().fold(T::zero(), |a, &v| a + v) / n;
    let (mut sxy, mut sxx) = (T::zero(), T::zero());
    for (&a, &b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
    }
    sxy / sxx
}

/// The `k_1 = 0` and `k_1 = 1` Fourier profiles of a function of
/// `(A_1, A_2)`: `Φ(A) = Φ_0(A_2) + 2 Re(Φ_1(A_2) e^{i A_1}) + …`.
#[derive(Debug, Clone)]
pub struct ThreeScaleProfiles<T> {
    pub p0: Vec<(i64, Complex<T>)>,
    pub p1: Vec<(i64, Complex<T>)>,
}

impl<T: Real> ThreeScaleProfiles<T> {
    /// `Γ_0`, `Γ_1` from the closed-form coefficients.
    pub fn melnikov(omega: &[T], f: &PerturbationSeries<T>) -> Result<Self> {
        if f.mode() != QMode::FactorOneMinusCosQ || f.dim() != 2 {
            return Err(Error::WrongMode("three-time-scale profiles need a two-angle factor coupling".into()));
        }
        let mut p0 = Vec::new();
        let mut p1 = Vec::new();
        for (key, c) in f.coefficients() {
            let g = melnikov_coefficient(&key.k, omega, *c);
            match key.k[0] {
                0 => p0.push((key.k[1], g)),
                1 => p1.push((key.k[1], g)),
                _ => {}
            }
        }
        Ok(Self { p0, p1 })
    }

    /// Profiles of a coefficient table.
    pub fn from_table(t: &FourierTable<T>) -> Self {
        let mut p0 = Vec::new();
        let mut p1 = Vec::new();
        for (k, c) in t.modes() {
            match k[0] {
                0 => p0.push((k[1], c)),
                1 => p1.push((k[1], c)),
                _ => {}
            }
        }
        Self { p0, p1 }
    }

    pub fn scaled(&self, s: T) -> Self {
        let m = |v: &Vec<(i64, Complex<T>)>| v.iter().map(|&(k, c)| (k, c * s)).collect();
        Self { p0: m(&self.p0), p1: m(&self.p1) }
    }

    fn eval(v: &[(i64, Complex<T>)], a2: T) -> Complex<T> {
        v.iter().fold(Complex::new(T::zero(), T::zero()), |acc, &(k, c)| {
            let ang = from_i64::<T>(k) * a2;
            acc + c * Complex::new(ang.cos(), ang.sin())
        })
    }

    pub fn profile0(&self, a2: T) -> T {
        Self::eval(&self.p0, a2).re
    }

    pub fn profile1(&self, a2: T) -> Complex<T> {
        Self::eval(&self.p1, a2)
    }

    pub fn mean0(&self) -> T {
        self.p0.iter().filter(|(k, _)| *k == 0).fold(T::zero(), |a, (_, c)| a + c.re)
    }
}

/// Runs the sweep over `eps_list`: closed-form coefficients, the computed
/// reduced grid and its `k_1`-split, remainder ratios and slope fits.
pub fn three_timescale_analysis<T: Real>(
    eps_list: &[T],
    f: &PerturbationSeries<T>,
    opts: &ThreeScaleOptions<T>,
) -> Result<ThreeScaleReport<T>> {
    if eps_list.len() < 2 {
        return Err(Error::invalid("the slope fit needs at least two values of epsilon"));
    }
    let fnorm = f.l1_norm();
    let f10 = f.coefficient(&[1, 0], 0).norm();
    if f10 == T::zero() {
        return Err(Error::invalid("the coupling has no (1, 0) mode"));
    }
    let mut rows = Vec::new();
    let mut warnings = Vec::new();
    for &eps in eps_list {
        let mu = opts.mu(eps);
        let omega = opts.omega(eps);
        FrequencyVector::new(omega.clone(), T::one(), T::one())?;
        let gamma = ThreeScaleProfiles::melnikov(&omega, f)?;
        let gamma_10 = melnikov_coefficient(&[1, 0], &omega, Complex::new(f10, T::zero())).re;
        let se = eps.sqrt();
        let expo = (-T::FRAC_PI_2() / se).exp();
        let asym = f10 * lit::<T>(4.0) * T::PI() / se * expo;
        let grid = evaluate_grid(
            GridKind::Reduced,
            mu,
            GridSpec::full_torus(&opts.shape),
            &omega,
            f,
            None,
            &opts.solver,
        )?;
        let table = fourier_of_grid(&grid)?;
        let g1 = table.coefficient(&[1, 0]).map(|c| c.norm()).unwrap_or(T::zero());
        if !(g1 > opts.floor) {
            warnings.push(format!(
                "eps={} dropped: |G_(1,0)| = {:e} below floor {:e}",
                to_f64(eps),
                to_f64(g1),
                to_f64(opts.floor)
            ));
            continue;
        }
        let comp = ThreeScaleProfiles::from_table(&table);
        let samples = 256;
        let (mut r0, mut r1) = (T::zero(), T::zero());
        for j in 0..samples {
            let a2 = T::TAU() * from_usize::<T>(j) / from_usize::<T>(samples);
            let d0 = comp.profile0(a2) - comp.mean0() + mu * (gamma.profile0(a2) - gamma.mean0());
            let d1 = comp.profile1(a2) + gamma.profile1(a2) * mu;
            r0 = r0.max(d0.abs());
            r1 = r1.max(d1.norm());
        }
        let m2 = mu * mu * fnorm * fnorm;
        rows.push(ThreeScaleRow {
            eps,
            mu,
            gamma_10,
            gamma_10_asymptotic: asym,
            g1,
            first_order_ratio: g1 / (mu * gamma_10),
            r0_ratio: r0 / m2,
            r1_ratio: r1 / (m2 / (eps * eps) * expo),
            aliasing_bound: table.aliasing_bound,
        });
    }
    if rows.len() < 2 {
        return Err(Error::Infeasible("fewer than two values of epsilon above the numerical floor".into()));
    }
    let x: Vec<T> = rows.iter().map(|r| T::one() / r.eps.sqrt()).collect();
    let closed: Vec<T> = rows.iter().map(|r| (r.eps.sqrt() * r.gamma_10).ln()).collect();
    let norm: Vec<T> = rows.iter().map(|r| (r.eps.sqrt() * r.g1 / r.mu).ln()).collect();
    let raw: Vec<T> = rows.iter().map(|r| r.g1.ln()).collect();
    Ok(ThreeScaleReport {
        slope_closed_form: slope(&x, &closed),
        slope_normalized: slope(&x, &norm),
        slope_raw: slope(&x, &raw),
        rows,
        warnings,
    })
}

/// Result of [`check_3ts_window`].
#[derive(Debug, Clone)]
pub enum ThreeScaleOutcome<T> {
    /// The hypotheses hold and the constructed window passes.
    Validated { window: SplittingWindow<T>, report: SplittingReport<T> },
    /// The hypotheses hold but the window fails on the grid.
    Rejected { window: SplittingWindow<T>, report: SplittingReport<T> },
    /// A hypothesis of the theorem fails.
    HypothesisFailed { inequality: String, at: T, lhs: T, rhs: T },
}

impl<T: Real> ThreeScaleOutcome<T> {
    pub fn is_validated(&self) -> bool {
        matches!(self, ThreeScaleOutcome::Validated { .. })
    }

    pub fn to_text(&self) -> String {
        match self {
            ThreeScaleOutcome::Validated { report, .. } => format!("outcome=validated\n{}", report.to_text()),
            ThreeScaleOutcome::Rejected { report, .. } => format!("outcome=rejected\n{}", report.to_text()),
            ThreeScaleOutcome::HypothesisFailed { inequality, at, lhs, rhs } => format!(
                "outcome=hypothesis_failed\ninequality={inequality}\nat={at:.17e}\nlhs={lhs:.17e}\nrhs={rhs:.17e}\n"
            ),
        }
    }
}

/// Constants of the window construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThreeScaleConstants<T> {
    pub c: T,
    pub d: T,
    /// `C̄` in `α = C̄ e^{−π/(2√ε)}`.
    pub c_bar: T,
    /// Outer radius of the window.
    pub rho: T,
}

/// Checks the hypotheses on `(Φ_0, Φ_1)` (the profiles of the first-order
/// part of `G̃/μ`), builds `α = C̄ e^{−π/(2√ε)}`,
/// `δ = cμ/(2√ε) e^{−π/(2√ε)}`, and validates the window on a patch
/// synthesized from `model` around its minimum.
pub fn check_3ts_window<T: Real>(
    eps: T,
    mu: T,
    profiles: &ThreeScaleProfiles<T>,
    consts: &ThreeScaleConstants<T>,
    model: &FourierTable<T>,
) -> Result<ThreeScaleOutcome<T>> {
    let ThreeScaleConstants { c, d, c_bar, rho } = *consts;
    let se = eps.sqrt();
    let expo = (-T::FRAC_PI_2() / se).exp();
    let samples = 8192;
    let mut a2bar = T::zero();
    let mut best = T::infinity();
    for j in 0..samples {
        let a2 = T::TAU() * from_usize::<T>(j) / from_usize::<T>(samples);
        let v = profiles.profile0(a2);
        if v < best {
            best = v;
            a2bar = a2;
        }
    }
    let refined = find_minimum_of(|x: &[T]| profiles.profile0(x[0]), &[a2bar], lit(1e-4));
    a2bar = refined.point[0];
    let p0bar = profiles.profile0(a2bar);

    let bound1 = c / se * expo;
    let n_check = 2000;
    for j in 0..=n_check {
        let a2 = a2bar - d + (d + d) * from_usize::<T>(j) / from_usize::<T>(n_check);
        if (a2 - a2bar).abs() >= d {
            continue;
        }
        let lhs = profiles.profile1(a2).norm();
        if !(lhs > bound1) {
            return Ok(ThreeScaleOutcome::HypothesisFailed {
                inequality: "|Gamma_1(A_2)| > (c/sqrt(eps)) exp(-pi/(2 sqrt(eps))) for |A_2 - A2bar| < d".into(),
                at: a2,
                lhs,
                rhs: bound1,
            });
        }
    }
    for s in [-T::one(), T::one()] {
        let a2 = a2bar + s * d;
        let lhs = profiles.profile0(a2);
        if !(lhs > p0bar + c) {
            return Ok(ThreeScaleOutcome::HypothesisFailed {
                inequality: "Gamma_0(A2bar +- d) > Gamma_0(A2bar) + c".into(),
                at: a2,
                lhs,
                rhs: p0bar + c,
            });
        }
    }

    let alpha = c_bar * expo;
    let delta = c * mu / (lit::<T>(2.0) * se) * expo;
    let p1 = profiles.profile1(a2bar);
    let a1 = T::PI() - p1.im.atan2(p1.re);
    let c0 = model.coefficient(&[0, 0]).map(|z| z.re).unwrap_or(T::zero());
    let start = [crate::angles::wrap(a1), a2bar];
    let min = find_minimum_of(|x: &[T]| model.evaluate(x) - c0, &start, lit(1e-3));
    let center = vec![crate::angles::wrap(min.point[0]), crate::angles::wrap(min.point[1])];
    let window = SplittingWindow::new(center.clone(), rho, alpha, delta)?;
    let h = alpha * lit(0.24);
    let m = (lit::<T>(2.0) * rho / h).ceil().to_usize().unwrap_or(2) + 3;
    let patch = synthesize_grid(model, GridSpec::centered_patch(&center, h, &[m, m]))?;
    let report = check_splitting_condition(&patch, &window)?;
    Ok(if report.holds() {
        ThreeScaleOutcome::Validated { window, report }
    } else {
        ThreeScaleOutcome::Rejected { window, report }
    })
}
