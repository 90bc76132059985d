//! Rotator frequencies, Diophantine diagnostics, ergodization times and the
//! Fourier representation of the coupling.

mod ergodic;
mod series;

pub use ergodic::{ergodization_time, ErgodizationEstimate, ErgodizationOptions};
pub use series::{evaluate_perturbation, ModeKey, PerturbationJet, PerturbationSeries, QMode};

use crate::angles::{dot_int, int_norm};
use crate::error::{Error, Result};
use crate::fourier::for_each_in_shell;
use crate::scalar::{lit, Real};

/// Default cap on the number of modes a Diophantine scan may visit.
pub const DEFAULT_SCAN_BUDGET: u128 = 50_000_000;

/// Result of a finite-K Diophantine scan.
#[derive(Debug, Clone, PartialEq)]
pub struct DiophantineMargin<T> {
    pub margin: T,
    pub worst_k: Vec<i64>,
    pub max_order: i64,
}

/// Frequencies `ω` of the isochronous rotators with Diophantine constants.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyVector<T> {
    omega: Vec<T>,
    gamma: T,
    tau: T,
    certificate: Option<DiophantineMargin<T>>,
}

impl<T: Real> FrequencyVector<T> {
    pub fn new(omega: Vec<T>, gamma: T, tau: T) -> Result<Self> {
        let n = omega.len();
        if n == 0 {
            return Err(Error::invalid("frequency vector must have at least one component"));
        }
        if omega.iter().any(|w| !w.is_finite()) {
            return Err(Error::invalid("frequency components must be finite"));
        }
        if omega.iter().all(|w| *w == T::zero()) {
            return Err(Error::invalid("frequency vector must be nonzero"));
        }
        if !(gamma > T::zero()) {
            return Err(Error::invalid("Diophantine constant gamma must be positive"));
        }
        if !(tau >= crate::scalar::from_usize::<T>(n) - T::one()) {
            return Err(Error::invalid(format!("Diophantine exponent tau must be at least n-1 = {}", n - 1)));
        }
        Ok(Self {
            omega,
            gamma,
            tau,
            certificate: None,
        })
    }

    /// Three-time-scale frequencies `(1/√ε, ε^a β_2, …, ε^a β_n)`: one fast
    /// rotator at scale `ε^{-1/2}` and slow ones at scale `ε^a`.
    pub fn three_time_scale(eps: T, a: T, slow: &[T], gamma: T, tau: T) -> Result<Self> {
        if !(eps > T::zero()) {
            return Err(Error::invalid("epsilon must be positive"));
        }
        let mut omega = vec![T::one() / eps.sqrt()];
        let scale = eps.powf(a);
        omega.extend(slow.iter().map(|&b| b * scale));
        Self::new(omega, gamma, tau)
    }

    pub fn omega(&self) -> &[T] {
        &self.omega
    }

    pub fn dim(&self) -> usize {
        self.omega.len()
    }

    pub fn gamma(&self) -> T {
        self.gamma
    }

    pub fn tau(&self) -> T {
        self.tau
    }

    pub fn certificate(&self) -> Option<&DiophantineMargin<T>> {
        self.certificate.as_ref()
    }

    /// Scans `0 < |k|_∞ ≤ order` and attaches the result as a certificate when
    /// the margin dominates `γ`.
    pub fn certify(mut self, order: i64) -> Result<Self> {
        let m = diophantine_margin(&self, order, DEFAULT_SCAN_BUDGET)?;
        if m.margin < self.gamma {
            return Err(Error::invalid(format!(
                "margin {:e} at k = {:?} is below gamma = {:e}",
                m.margin, m.worst_k, self.gamma
            )));
        }
        self.certificate = Some(m);
        Ok(self)
    }

    /// Small-divisor guard `γ / |k|^τ` for a mode.
    pub fn divisor_guard(&self, k: &[i64]) -> T {
        self.gamma / int_norm::<T>(k).powf(self.tau)
    }

    pub fn dot(&self, k: &[i64]) -> T {
        dot_int(&self.omega, k)
    }
}

/// `min_{0<|k|_∞≤K} |ω·k| |k|^τ`, with `|k|` the Euclidean norm. Shells are
/// visited in increasing sup-norm and ties keep the first mode found.
pub fn diophantine_margin<T: Real>(
    omega: &FrequencyVector<T>,
    order: i64,
    budget: u128,
) -> Result<DiophantineMargin<T>> {
    if order < 1 {
        return Err(Error::invalid("Diophantine scan order must be at least 1"));
    }
    let n = omega.dim() as u32;
    let side = 2 * order as u128 + 1;
    let needed = side.checked_pow(n).map(|v| v - 1).unwrap_or(u128::MAX);
    if needed > budget {
        return Err(Error::Budget { needed, budget });
    }
    let mut margin = T::infinity();
    let mut worst = vec![0; omega.dim()];
    for s in 1..=order {
        for_each_in_shell(omega.dim(), s, |k| {
            // k and -k give the same value; keep the half with a positive leading entry
            if k.iter().find(|&&x| x != 0).copied().unwrap_or(0) < 0 {
                return;
            }
            let v = omega.dot(k).abs() * int_norm::<T>(k).powf(omega.tau);
            if v < margin {
                margin = v;
                worst = k.to_vec();
            }
        });
    }
    Ok(DiophantineMargin {
        margin,
        worst_k: worst,
        max_order: order,
    })
}

/// Golden-mean frequency `(1, (1+√5)/2)`.
pub fn golden<T: Real>() -> Vec<T> {
    vec![T::one(), (T::one() + lit::<T>(5.0).sqrt()) / lit(2.0)]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_resonance_has_zero_margin() {
        let w = FrequencyVector::new(vec![1.0f64, 1.0], 0.1, 1.0).unwrap();
        let m = diophantine_margin(&w, 2, DEFAULT_SCAN_BUDGET).unwrap();
        assert_eq!(m.margin, 0.0);
        assert_eq!(m.worst_k, vec![1, -1]);
    }

    #[test]
    fn budget_is_enforced() {
        let w = FrequencyVector::new(vec![1.0f64, 2f64.sqrt(), 3f64.sqrt()], 0.1, 3.0).unwrap();
        assert!(matches!(diophantine_margin(&w, 1000, 1000), Err(Error::Budget { .. })));
    }

    #[test]
    fn constructor_rejects_bad_input() {
        assert!(FrequencyVector::new(vec![0.0f64, 0.0], 0.1, 2.0).is_err());
        assert!(FrequencyVector::new(vec![1.0f64, f64::NAN], 0.1, 2.0).is_err());
        assert!(FrequencyVector::new(vec![1.0f64, 2.0], 0.1, 0.5).is_err());
        assert!(FrequencyVector::new(vec![1.0f64], -1.0, 0.5).is_err());
    }

    #[test]
    fn certificate_requires_margin_above_gamma() {
        let w = FrequencyVector::new(golden::<f64>(), 1e-3, 1.0).unwrap();
        let c = w.clone().certify(50).unwrap();
        assert!(c.certificate().unwrap().margin >= 1e-3);
        let bad = FrequencyVector::new(golden::<f64>(), 10.0, 1.0).unwrap();
        assert!(bad.certify(50).is_err());
    }

    #[test]
    fn three_time_scale_components() {
        let w = FrequencyVector::three_time_scale(0.04f64, 1.0, &[1.0], 1e-6, 2.0).unwrap();
        assert!((w.omega()[0] - 5.0).abs() < 1e-12);
        assert!((w.omega()[1] - 0.04).abs() < 1e-15);
    }
}
