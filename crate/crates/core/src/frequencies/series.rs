use std::collections::BTreeMap;
use std::fmt::Write as _;

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::scalar::{from_i64, lit, Real};

/// How the coupling depends on the pendulum angle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QMode {
    /// `f(φ, q) = (1 − cos q) g(φ)`; the stored series is `g`.
    FactorOneMinusCosQ,
    /// `f(φ, q) = Σ f_{k,l} e^{i(k·φ + l q)}`.
    GeneralInQ,
}

impl QMode {
    pub fn name(self) -> &'static str {
        match self {
            QMode::FactorOneMinusCosQ => "factor",
            QMode::GeneralInQ => "general",
        }
    }
}

/// A Fourier mode `(k, l)`; `l` is the index over `q` and stays 0 in factor mode.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ModeKey {
    pub k: Vec<i64>,
    pub l: i64,
}

impl ModeKey {
    pub fn negated(&self) -> Self {
        Self {
            k: self.k.iter().map(|x| -x).collect(),
            l: -self.l,
        }
    }
}

/// Value and derivatives of the coupling at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationJet<T> {
    pub f: T,
    pub df_dq: T,
    pub d2f_dq2: T,
    pub grad_phi: Vec<T>,
}

/// Truncated Fourier series of the coupling `f`.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationSeries<T> {
    n: usize,
    mode: QMode,
    coefficients: BTreeMap<ModeKey, Complex<T>>,
    widths: Vec<T>,
    decay_order: u32,
    decay_constant: T,
}

impl<T: Real> PerturbationSeries<T> {
    pub fn new(n: usize, mode: QMode) -> Self {
        Self {
            n,
            mode,
            coefficients: BTreeMap::new(),
            widths: vec![T::zero(); n],
            decay_order: 0,
            decay_constant: T::zero(),
        }
    }

    /// Factor-mode series `g(φ) = Σ_j amp_j cos(k_j·φ)`.
    pub fn cosines(n: usize, terms: &[(Vec<i64>, T)]) -> Self {
        let mut s = Self::new(n, QMode::FactorOneMinusCosQ);
        for (k, amp) in terms {
            s.add_cosine(k, 0, *amp);
        }
        s.fit_decay_constant();
        s
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn mode(&self) -> QMode {
        self.mode
    }

    pub fn widths(&self) -> &[T] {
        &self.widths
    }

    pub fn decay_order(&self) -> u32 {
        self.decay_order
    }

    pub fn decay_constant(&self) -> T {
        self.decay_constant
    }

    pub fn set_widths(&mut self, widths: Vec<T>) -> Result<()> {
        if widths.len() != self.n || widths.iter().any(|a| !(*a >= T::zero())) {
            return Err(Error::invalid("analyticity widths must be n nonnegative numbers"));
        }
        self.widths = widths;
        Ok(())
    }

    pub fn set_decay(&mut self, order: u32, constant: T) {
        self.decay_order = order;
        self.decay_constant = constant;
    }

    pub fn coefficients(&self) -> &BTreeMap<ModeKey, Complex<T>> {
        &self.coefficients
    }

    pub fn coefficient(&self, k: &[i64], l: i64) -> Complex<T> {
        self.coefficients
            .get(&ModeKey { k: k.to_vec(), l })
            .copied()
            .unwrap_or_else(|| Complex::new(T::zero(), T::zero()))
    }

    pub fn insert(&mut self, k: Vec<i64>, l: i64, c: Complex<T>) {
        assert_eq!(k.len(), self.n, "mode dimension mismatch");
        if self.mode == QMode::FactorOneMinusCosQ {
            assert_eq!(l, 0, "factor mode carries no q index");
        }
        self.coefficients.insert(ModeKey { k, l }, c);
    }

    /// Adds `amp·cos(k·φ + l q)` keeping reality symmetry.
    pub fn add_cosine(&mut self, k: &[i64], l: i64, amp: T) {
        self.add_exp_pair(k, l, Complex::new(amp / lit(2.0), T::zero()));
    }

    /// Adds `amp·sin(k·φ + l q)`.
    pub fn add_sine(&mut self, k: &[i64], l: i64, amp: T) {
        self.add_exp_pair(k, l, Complex::new(T::zero(), -amp / lit(2.0)));
    }

    fn add_exp_pair(&mut self, k: &[i64], l: i64, c: Complex<T>) {
        let key = ModeKey { k: k.to_vec(), l };
        let neg = key.negated();
        if key == neg {
            *self.coefficients.entry(key).or_insert_with(Complex::default) += c + c.conj();
        } else {
            *self.coefficients.entry(key).or_insert_with(Complex::default) += c;
            *self.coefficients.entry(neg).or_insert_with(Complex::default) += c.conj();
        }
    }

    /// Largest `|f_{-k} − conj(f_k)|` over stored modes.
    pub fn reality_defect(&self) -> T {
        self.coefficients
            .iter()
            .map(|(key, c)| {
                let other = self
                    .coefficients
                    .get(&key.negated())
                    .copied()
                    .unwrap_or_default();
                (other - c.conj()).norm()
            })
            .fold(T::zero(), T::max)
    }

    fn decay_envelope(&self, key: &ModeKey) -> T {
        let kn: T = crate::angles::int_norm(&key.k);
        let poly = if kn > T::zero() {
            kn.powi(self.decay_order as i32)
        } else {
            T::one()
        };
        let expo = key
            .k
            .iter()
            .zip(&self.widths)
            .fold(T::zero(), |s, (&ki, &a)| s + a * from_i64::<T>(ki.abs()));
        poly * expo.exp()
    }

    /// Smallest `C_s` with `|f_k| ≤ C_s |k|^{-s} e^{-Σ a_i|k_i|}` on the stored modes.
    pub fn required_decay_constant(&self) -> T {
        self.coefficients
            .iter()
            .map(|(key, c)| c.norm() * self.decay_envelope(key))
            .fold(T::zero(), T::max)
    }

    pub fn fit_decay_constant(&mut self) {
        self.decay_constant = self.required_decay_constant();
    }

    /// Checks both series invariants.
    pub fn validate(&self, tol: T) -> Result<()> {
        let d = self.reality_defect();
        if d > tol {
            return Err(Error::invalid(format!("reality symmetry violated by {d:e}")));
        }
        let need = self.required_decay_constant();
        if need > self.decay_constant * (T::one() + tol) + tol {
            return Err(Error::invalid(format!(
                "decay bound needs C_s = {need:e} but {:e} is stored",
                self.decay_constant
            )));
        }
        Ok(())
    }

    /// `Σ |f_k|`, an upper bound for the sup norm on the real torus.
    pub fn l1_norm(&self) -> T {
        self.coefficients.values().fold(T::zero(), |s, c| s + c.norm())
    }

    /// `Σ |f_k| e^{Σ a_i |k_i|}`, bounding the sup norm over the complex strip.
    pub fn strip_norm(&self) -> T {
        self.coefficients.iter().fold(T::zero(), |s, (key, c)| {
            let e = key
                .k
                .iter()
                .zip(&self.widths)
                .fold(T::zero(), |a, (&ki, &w)| a + w * from_i64::<T>(ki.abs()));
            s + c.norm() * e.exp()
        })
    }

    /// Complex Fourier synthesis of `g(φ)` (factor mode) or `f(φ, q)`.
    pub fn synthesize(&self, phi: &[T], q: T) -> Complex<T> {
        self.coefficients
            .iter()
            .fold(Complex::new(T::zero(), T::zero()), |acc, (key, c)| {
                let ang = key
                    .k
                    .iter()
                    .zip(phi)
                    .fold(from_i64::<T>(key.l) * q, |s, (&ki, &x)| s + from_i64::<T>(ki) * x);
                acc + c * Complex::new(ang.cos(), ang.sin())
            })
    }

    /// `f(φ, q)` as a complex number; the imaginary part is the reality residue.
    pub fn evaluate_complex(&self, phi: &[T], q: T) -> Complex<T> {
        match self.mode {
            QMode::FactorOneMinusCosQ => self.synthesize(phi, T::zero()) * (T::one() - q.cos()),
            QMode::GeneralInQ => self.synthesize(phi, q),
        }
    }

    pub fn evaluate(&self, phi: &[T], q: T) -> T {
        self.evaluate_complex(phi, q).re
    }

    /// `g(φ)` and `∇g(φ)` for factor mode.
    pub fn angular_part(&self, phi: &[T]) -> (T, Vec<T>) {
        let mut g = T::zero();
        let mut grad = vec![T::zero(); self.n];
        for (key, c) in &self.coefficients {
            let ang = key
                .k
                .iter()
                .zip(phi)
                .fold(T::zero(), |s, (&ki, &x)| s + from_i64::<T>(ki) * x);
            let e = c * Complex::new(ang.cos(), ang.sin());
            g += e.re;
            for (gj, &kj) in grad.iter_mut().zip(&key.k) {
                // d/dφ_j Re(c e^{ik·φ}) = Re(i k_j c e^{ik·φ}) = -k_j Im(...)
                *gj -= from_i64::<T>(kj) * e.im;
            }
        }
        (g, grad)
    }

    /// Value, `q`-derivatives and `φ`-gradient of the full coupling.
    pub fn jet(&self, phi: &[T], q: T) -> PerturbationJet<T> {
        match self.mode {
            QMode::FactorOneMinusCosQ => {
                let (g, grad) = self.angular_part(phi);
                let (s, c) = q.sin_cos();
                let w = T::one() - c;
                PerturbationJet {
                    f: w * g,
                    df_dq: s * g,
                    d2f_dq2: c * g,
                    grad_phi: grad.into_iter().map(|x| w * x).collect(),
                }
            }
            QMode::GeneralInQ => {
                let mut jet = PerturbationJet {
                    f: T::zero(),
                    df_dq: T::zero(),
                    d2f_dq2: T::zero(),
                    grad_phi: vec![T::zero(); self.n],
                };
                for (key, c) in &self.coefficients {
                    let l = from_i64::<T>(key.l);
                    let ang = key
                        .k
                        .iter()
                        .zip(phi)
                        .fold(l * q, |s, (&ki, &x)| s + from_i64::<T>(ki) * x);
                    let e = c * Complex::new(ang.cos(), ang.sin());
                    jet.f += e.re;
                    jet.df_dq -= l * e.im;
                    jet.d2f_dq2 -= l * l * e.re;
                    for (gj, &kj) in jet.grad_phi.iter_mut().zip(&key.k) {
                        *gj -= from_i64::<T>(kj) * e.im;
                    }
                }
                jet
            }
        }
    }

    /// Angular factor `g` sampled along the line `φ = ω t + A` (factor mode).
    pub fn angular_along_line(&self, omega: &[T], a: &[T], times: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); times.len()];
        for (key, c) in &self.coefficients {
            let freq = crate::angles::dot_int(omega, &key.k);
            let phase0 = crate::angles::dot_int(a, &key.k);
            for (o, &t) in out.iter_mut().zip(times) {
                let ang = phase0 + freq * t;
                *o += c.re * ang.cos() - c.im * ang.sin();
            }
        }
        out
    }

    /// The same coupling written in general mode: `(1 − cos q) g` becomes
    /// `g − g e^{iq}/2 − g e^{−iq}/2`.
    pub fn to_general(&self) -> Self {
        if self.mode == QMode::GeneralInQ {
            return self.clone();
        }
        let mut out = Self::new(self.n, QMode::GeneralInQ);
        out.widths = self.widths.clone();
        let half = lit::<T>(0.5);
        for (key, c) in &self.coefficients {
            out.insert(key.k.clone(), 0, *c);
            out.insert(key.k.clone(), 1, -*c * half);
            out.insert(key.k.clone(), -1, -*c * half);
        }
        out.fit_decay_constant();
        out
    }

    /// `h_l(t) = Σ_k f_{k,l} e^{ik·(ωt + A)}`, so that
    /// `f(ωt + A, q) = Re Σ_l h_l(t) e^{ilq}` (general mode).
    pub fn q_harmonics_along_line(&self, omega: &[T], a: &[T], times: &[T]) -> Vec<(i64, Vec<Complex<T>>)> {
        let mut out: BTreeMap<i64, Vec<Complex<T>>> = BTreeMap::new();
        for (key, c) in &self.coefficients {
            let freq = crate::angles::dot_int(omega, &key.k);
            let phase0 = crate::angles::dot_int(a, &key.k);
            let row = out
                .entry(key.l)
                .or_insert_with(|| vec![Complex::default(); times.len()]);
            for (o, &t) in row.iter_mut().zip(times) {
                let ang = phase0 + freq * t;
                *o += c * Complex::new(ang.cos(), ang.sin());
            }
        }
        out.into_iter().collect()
    }

    /// Text table: `#` header lines, then one line `k_1 … k_n [l] re im` per mode.
    pub fn to_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# mode {}", self.mode.name());
        let _ = writeln!(s, "# n {}", self.n);
        let _ = write!(s, "# widths");
        for w in &self.widths {
            let _ = write!(s, " {:.17e}", w);
        }
        let _ = writeln!(s);
        let _ = writeln!(s, "# decay {} {:.17e}", self.decay_order, self.decay_constant);
        for (key, c) in &self.coefficients {
            for k in &key.k {
                let _ = write!(s, "{k} ");
            }
            if self.mode == QMode::GeneralInQ {
                let _ = write!(s, "{} ", key.l);
            }
            let _ = writeln!(s, "{:.17e} {:.17e}", c.re, c.im);
        }
        s
    }

    pub fn from_table(text: &str) -> Result<Self> {
        let mut mode = QMode::FactorOneMinusCosQ;
        let mut n: Option<usize> = None;
        let mut widths: Option<Vec<T>> = None;
        let mut decay: Option<(u32, T)> = None;
        let mut rows: Vec<(usize, Vec<i64>, T, T)> = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = lineno + 1;
            let perr = |msg: String| Error::Parse { line, msg };
            let t = raw.trim();
            if t.is_empty() {
                continue;
            }
            if let Some(h) = t.strip_prefix('#') {
                let mut it = h.split_whitespace();
                match it.next() {
                    Some("mode") => {
                        mode = match it.next() {
                            Some("factor") => QMode::FactorOneMinusCosQ,
                            Some("general") => QMode::GeneralInQ,
                            other => return Err(perr(format!("unknown mode {other:?}"))),
                        }
                    }
                    Some("n") => {
                        n = Some(
                            it.next()
                                .and_then(|v| v.parse().ok())
                                .ok_or_else(|| perr("bad n".into()))?,
                        )
                    }
                    Some("widths") => {
                        widths = Some(
                            it.map(|v| v.parse::<f64>().map(lit))
                                .collect::<std::result::Result<_, _>>()
                                .map_err(|e| perr(format!("bad width: {e}")))?,
                        )
                    }
                    Some("decay") => {
                        let s = it.next().and_then(|v| v.parse().ok());
                        let c = it.next().and_then(|v| v.parse::<f64>().ok());
                        match (s, c) {
                            (Some(s), Some(c)) => decay = Some((s, lit(c))),
                            _ => return Err(perr("bad decay header".into())),
                        }
                    }
                    _ => {}
                }
                continue;
            }
            let cols: Vec<&str> = t.split_whitespace().collect();
            if cols.len() < 3 {
                return Err(perr("expected integer indices followed by re im".into()));
            }
            let split = cols.len() - 2;
            let ints = cols[..split]
                .iter()
                .map(|v| v.parse::<i64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| perr(format!("bad mode index: {e}")))?;
            let re: f64 = cols[split].parse().map_err(|e| perr(format!("bad re: {e}")))?;
            let im: f64 = cols[split + 1].parse().map_err(|e| perr(format!("bad im: {e}")))?;
            rows.push((line, ints, lit(re), lit(im)));
        }
        let extra = usize::from(mode == QMode::GeneralInQ);
        let n = match n {
            Some(n) => n,
            None => rows
                .first()
                .map(|r| r.1.len().saturating_sub(extra))
                .ok_or(Error::Parse {
                    line: 0,
                    msg: "empty mode table without an n header".into(),
                })?,
        };
        let mut s = Self::new(n, mode);
        for (line, ints, re, im) in rows {
            if ints.len() != n + extra {
                return Err(Error::Parse {
                    line,
                    msg: format!("expected {} indices, found {}", n + extra, ints.len()),
                });
            }
            let l = if extra == 1 { ints[n] } else { 0 };
            s.insert(ints[..n].to_vec(), l, Complex::new(re, im));
        }
        if let Some(w) = widths {
            s.set_widths(w)?;
        }
        match decay {
            Some((order, c)) => s.set_decay(order, c),
            None => s.fit_decay_constant(),
        }
        Ok(s)
    }
}

/// Evaluates `f(φ, q)`; in factor mode this is `(1 − cos q) Σ f_k e^{ik·φ}`.
pub fn evaluate_perturbation<T: Real>(f: &PerturbationSeries<T>, phi: &[T], q: T) -> T {
    f.evaluate(phi, q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn factor_mode_examples() {
        let mut f = PerturbationSeries::<f64>::new(2, QMode::FactorOneMinusCosQ);
        f.insert(vec![0, 0], 0, Complex::new(1.0, 0.0));
        assert!((evaluate_perturbation(&f, &[0.3, 1.0], PI) - 2.0).abs() < 1e-15);
        assert_eq!(evaluate_perturbation(&f, &[0.3, 1.0], 0.0), 0.0);
        let g = PerturbationSeries::cosines(2, &[(vec![1, 0], 1.0)]);
        assert!((evaluate_perturbation(&g, &[0.0, 0.0], PI) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn jet_matches_finite_differences() {
        let mut f = PerturbationSeries::<f64>::new(2, QMode::GeneralInQ);
        f.add_sine(&[1, 0], 1, 0.7);
        f.add_cosine(&[1, -1], 2, 0.3);
        f.add_cosine(&[0, 0], 1, 0.2);
        let (phi, q, h) = ([0.4, -1.1], 0.9, 1e-5);
        let j = f.jet(&phi, q);
        let fd = (f.evaluate(&phi, q + h) - f.evaluate(&phi, q - h)) / (2.0 * h);
        assert!((j.df_dq - fd).abs() < 1e-8);
        let fd2 = (f.evaluate(&phi, q + h) - 2.0 * j.f + f.evaluate(&phi, q - h)) / (h * h);
        assert!((j.d2f_dq2 - fd2).abs() < 1e-4);
        let fp = (f.evaluate(&[phi[0], phi[1] + h], q) - f.evaluate(&[phi[0], phi[1] - h], q)) / (2.0 * h);
        assert!((j.grad_phi[1] - fp).abs() < 1e-8);
    }

    #[test]
    fn table_round_trip_and_errors() {
        let mut f = PerturbationSeries::<f64>::new(2, QMode::GeneralInQ);
        f.add_sine(&[1, 0], 1, 1.0);
        f.set_widths(vec![0.5, 1.0]).unwrap();
        f.fit_decay_constant();
        let back = PerturbationSeries::<f64>::from_table(&f.to_table()).unwrap();
        assert_eq!(back, f);
        assert!(PerturbationSeries::<f64>::from_table("1 x 0.5 0.0\n").is_err());
        assert!(PerturbationSeries::<f64>::from_table("# n 2\n1 0.5 0.0\n").is_err());
    }

    #[test]
    fn decay_validation() {
        let mut f = PerturbationSeries::<f64>::cosines(1, &[(vec![1], 1.0), (vec![3], 0.5)]);
        f.set_widths(vec![1.0]).unwrap();
        assert!(f.validate(1e-12).is_err());
        f.fit_decay_constant();
        f.validate(1e-12).unwrap();
    }
}
