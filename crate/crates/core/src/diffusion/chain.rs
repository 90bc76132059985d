use std::fmt::Write as _;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{FullState, Integrator, Scheme};
use crate::angles::{dot, torus_distance, wrap};
use crate::error::{Error, Result};
use crate::frequencies::{PerturbationSeries, QMode};
use crate::melnikov::melnikov_series;
use crate::scalar::{from_usize, lit, to_f64, two_pi, Real};
use crate::splitting::{diffusion_time_bound, find_minimum_of, SplittingWindow};

/// Stopping limits of a chain. Exhausting any of them ends the run without
/// a diffusion time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunBudget {
    /// Simulated time.
    pub max_time: f64,
    pub max_transitions: usize,
    pub wall_clock: Option<Duration>,
}

impl Default for RunBudget {
    fn default() -> Self {
        Self {
            max_time: 1e7,
            max_transitions: 100_000,
            wall_clock: None,
        }
    }
}

/// Parameters of one transition-chain experiment.
#[derive(Debug, Clone)]
pub struct ChainConfig<T> {
    pub omega: Vec<T>,
    pub mu: T,
    pub f: PerturbationSeries<T>,
    pub source: Vec<T>,
    pub target: Vec<T>,
    pub window: SplittingWindow<T>,
    /// Stopping radius around the target torus.
    pub eta: T,
    /// Distance from the equilibrium at which excursions start and end,
    /// measured as `|p|` on the separatrix. Defaults to `eta`.
    pub launch_radius: Option<T>,
    pub dt: T,
    pub scheme: Scheme,
    pub seed: u64,
    pub budget: RunBudget,
}

impl<T: Real> ChainConfig<T> {
    pub fn new(omega: Vec<T>, mu: T, f: PerturbationSeries<T>, source: Vec<T>, target: Vec<T>, window: SplittingWindow<T>, eta: T) -> Self {
        Self {
            omega,
            mu,
            f,
            source,
            target,
            window,
            eta,
            launch_radius: None,
            dt: lit(1e-3),
            scheme: Scheme::Yoshida4,
            seed: 0,
            budget: RunBudget::default(),
        }
    }

    fn validate(&self) -> Result<()> {
        let n = self.omega.len();
        if self.source.len() != n || self.target.len() != n || self.window.center.len() != n || self.f.dim() != n {
            return Err(Error::invalid("dimension mismatch between frequencies, actions, window and perturbation"));
        }
        if self.f.mode() != QMode::FactorOneMinusCosQ {
            return Err(Error::WrongMode("transition chains use the factor coupling (1 - cos q) g".into()));
        }
        let scale = T::one() + dot(&self.omega, &self.source).abs() + dot(&self.omega, &self.target).abs();
        if (dot(&self.omega, &self.source) - dot(&self.omega, &self.target)).abs() > lit::<T>(1e-9) * scale {
            return Err(Error::invalid("source and target actions lie on different resonance levels of omega"));
        }
        if !(self.eta > T::zero()) || !(self.dt > T::zero()) || self.mu < T::zero() {
            return Err(Error::invalid("eta and dt must be positive and mu non-negative"));
        }
        let r = self.launch_radius.unwrap_or(self.eta);
        if !(r > T::zero() && r < lit(1.0)) {
            return Err(Error::invalid("launch radius must lie in (0, 1)"));
        }
        Ok(())
    }
}

/// Launch point on the unperturbed unstable branch with momentum `r`:
/// returns `(q_L, p_L, τ_π)` where `τ_π` is the unperturbed travel time from
/// the launch point to `q = π`.
pub fn launch_geometry<T: Real>(r: T) -> (T, T, T) {
    let q = lit::<T>(2.0) * (r / lit(2.0)).asin();
    let tau = -(q / lit(4.0)).tan().ln();
    (q, r, tau)
}

/// One pendulum excursion.
#[derive(Debug, Clone)]
pub struct TransitionEvent<T> {
    pub index: usize,
    pub t_launch: T,
    pub t_exit: T,
    /// Time spent on the torus before the launch.
    pub wait: T,
    /// Phase the steering rule asked for at `q = π`.
    pub target_phase: Vec<T>,
    /// Rotator phase at the actual crossing of `q = π`, if any.
    pub phase_at_pi: Option<Vec<T>>,
    pub action_before: Vec<T>,
    pub delta_i: Vec<T>,
    /// `−μ∇Γ` at the requested phase.
    pub predicted: Vec<T>,
    /// `p²/2 + cos q − 1` when the excursion ended.
    pub exit_energy: T,
    /// The excursion did not cross `q = π`.
    pub turned_back: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    Reached,
    NoAdmissibleTransition,
    TimeBudget,
    TransitionBudget,
    WallClock,
}

impl StopReason {
    pub fn name(self) -> &'static str {
        match self {
            StopReason::Reached => "reached",
            StopReason::NoAdmissibleTransition => "no_admissible_transition",
            StopReason::TimeBudget => "time_budget",
            StopReason::TransitionBudget => "transition_budget",
            StopReason::WallClock => "wall_clock",
        }
    }

    pub fn budget_exhausted(self) -> bool {
        matches!(self, StopReason::TimeBudget | StopReason::TransitionBudget | StopReason::WallClock)
    }
}

#[derive(Debug, Clone)]
pub struct DiffusionRun<T> {
    pub mu: T,
    pub source: Vec<T>,
    pub target: Vec<T>,
    pub eta: T,
    pub seed: u64,
    pub dt: T,
    pub initial_phase: Vec<T>,
    /// `(t, I)` at the start, after every transition and at the end.
    pub checkpoints: Vec<(T, Vec<T>)>,
    pub events: Vec<TransitionEvent<T>>,
    pub t_d: Option<T>,
    pub final_time: T,
    pub final_action: Vec<T>,
    pub stop: StopReason,
}

impl<T: Real> DiffusionRun<T> {
    pub fn net_delta(&self) -> Vec<T> {
        self.final_action.iter().zip(&self.source).map(|(a, b)| *a - *b).collect()
    }

    /// Mean action jump per transition.
    pub fn mean_delta(&self) -> Vec<T> {
        let k = from_usize::<T>(self.events.len().max(1));
        self.net_delta().into_iter().map(|d| d / k).collect()
    }

    pub fn to_checkpoint_csv(&self) -> String {
        let n = self.source.len();
        let mut s = String::from("t");
        for d in 0..n {
            let _ = write!(s, ",I{}", d + 1);
        }
        s.push('\n');
        for (t, a) in &self.checkpoints {
            let _ = write!(s, "{:.17e}", to_f64(*t));
            for x in a {
                let _ = write!(s, ",{:.17e}", to_f64(*x));
            }
            s.push('\n');
        }
        s
    }

    pub fn to_event_csv(&self) -> String {
        let n = self.source.len();
        let mut s = String::from("index,t_launch,t_exit,wait");
        for d in 0..n {
            let _ = write!(s, ",target_A{0},dI{0},predicted_dI{0}", d + 1);
        }
        s.push_str(",exit_energy,turned_back\n");
        for e in &self.events {
            let _ = write!(s, "{},{:.17e},{:.17e},{:.17e}", e.index, to_f64(e.t_launch), to_f64(e.t_exit), to_f64(e.wait));
            for d in 0..n {
                let _ = write!(
                    s,
                    ",{:.17e},{:.17e},{:.17e}",
                    to_f64(e.target_phase[d]),
                    to_f64(e.delta_i[d]),
                    to_f64(e.predicted[d])
                );
            }
            let _ = writeln!(s, ",{:.17e},{}", to_f64(e.exit_energy), e.turned_back);
        }
        s
    }

    pub fn to_summary(&self) -> String {
        let vec = |v: &[T]| v.iter().map(|x| format!("{:.17e}", to_f64(*x))).collect::<Vec<_>>().join(" ");
        let mut s = String::new();
        let _ = writeln!(s, "mu={:.17e}", to_f64(self.mu));
        let _ = writeln!(s, "source={}", vec(&self.source));
        let _ = writeln!(s, "target={}", vec(&self.target));
        let _ = writeln!(s, "eta={:.17e}", to_f64(self.eta));
        let _ = writeln!(s, "dt={:.17e}", to_f64(self.dt));
        let _ = writeln!(s, "seed={}", self.seed);
        let _ = writeln!(s, "initial_phase={}", vec(&self.initial_phase));
        match self.t_d {
            Some(t) => {
                let _ = writeln!(s, "T_d={:.17e}", to_f64(t));
            }
            None => s.push_str("T_d=none\n"),
        }
        let _ = writeln!(s, "stop={}", self.stop.name());
        let _ = writeln!(s, "transitions={}", self.events.len());
        let _ = writeln!(s, "final_time={:.17e}", to_f64(self.final_time));
        let _ = writeln!(s, "final_action={}", vec(&self.final_action));
        let _ = writeln!(s, "net_delta={}", vec(&self.net_delta()));
        let _ = writeln!(s, "mean_delta={}", vec(&self.mean_delta()));
        s
    }
}

/// Samples of the sup-ball `B_ρ(c)` on a regular grid with `m` points per axis.
fn ball_samples<T: Real>(c: &[T], rho: T, m: usize) -> Vec<Vec<T>> {
    let n = c.len();
    let total = m.pow(n as u32);
    (0..total)
        .map(|mut lin| {
            let mut a = Vec::with_capacity(n);
            for &cd in c {
                let i = lin % m;
                lin /= m;
                let s = from_usize::<T>(2 * i + 1) / from_usize::<T>(2 * m) * lit(2.0) - T::one();
                a.push(cd + rho * s);
            }
            a
        })
        .collect()
}

/// Minimizes `cost` over the sup-ball, sampling then polishing.
fn minimize_in_ball<T: Real>(cost: impl Fn(&[T]) -> T, c: &[T], rho: T) -> Vec<T> {
    let m = if c.len() <= 2 { 64 } else { 16 };
    let mut best = c.to_vec();
    let mut best_v = cost(c);
    for a in ball_samples(c, rho, m) {
        let v = cost(&a);
        if v < best_v {
            best_v = v;
            best = a;
        }
    }
    let step = rho / from_usize::<T>(4 * m);
    let polished = find_minimum_of(&cost, &best, step);
    let inside = polished.point.iter().zip(c).all(|(a, b)| (*a - *b).abs() <= rho);
    if inside && polished.value.is_finite() && polished.value < best_v {
        polished.point
    } else {
        best
    }
}

/// Phase at `q = π` for the next transition: over the window ball,
/// maximizes `d·J − |J|²/(2|Δ|)` where `J = −μ∇Γ`, `Δ` is the remaining
/// displacement and `d = Δ/|Δ|`. Far from the target this is the phase of
/// largest projection on `d`; close to it, the jump that lands nearest.
/// `None` when no phase brings the action closer.
fn steer<T: Real>(cfg: &ChainConfig<T>, action: &[T]) -> Option<Vec<T>> {
    let delta: Vec<T> = cfg.target.iter().zip(action).map(|(a, b)| *a - *b).collect();
    let dist = dot(&delta, &delta).sqrt();
    if !(dist > T::zero()) || cfg.mu == T::zero() {
        return None;
    }
    let residual = |a: &[T]| -> T {
        let (_, g) = melnikov_series(a, &cfg.omega, &cfg.f);
        g.iter().zip(&delta).fold(T::zero(), |acc, (g, d)| {
            let r = *d + cfg.mu * *g;
            acc + r * r
        })
    };
    let best = minimize_in_ball(residual, &cfg.window.center, cfg.window.rho);
    (residual(&best).sqrt() < dist).then_some(best)
}

struct Excursion<T> {
    phase_at_pi: Option<Vec<T>>,
    exit_energy: T,
    turned_back: bool,
}

/// Runs the integrator from a launch point until the excursion ends: past
/// `q = π` the momentum falls to the launch radius or `q` reaches the mirror
/// of the launch point, the pendulum turns around, or `limit` time units pass.
fn excursion<T: Real>(it: &mut Integrator<'_, T>, radius: T, limit: T) -> Excursion<T> {
    let pi = T::PI();
    let far = two_pi::<T>() - lit::<T>(2.0) * (radius / lit(2.0)).asin();
    let t_end = it.time() + limit;
    let mut phase_at_pi = None;
    loop {
        let (q_prev, t_prev) = (it.q, it.time());
        it.step();
        if phase_at_pi.is_none() && q_prev < pi && it.q >= pi {
            let s = (pi - q_prev) / (it.q - q_prev) * it.dt;
            let back = t_prev + s - it.time();
            phase_at_pi = Some(it.phase_at(back).into_iter().map(wrap).collect());
        }
        let past = phase_at_pi.is_some();
        let done = (past && (it.p <= radius || it.q >= far)) || it.p <= T::zero() || it.time() >= t_end;
        if done {
            let exit_energy = lit::<T>(0.5) * it.p * it.p + it.q.cos() - T::one();
            return Excursion {
                turned_back: !past,
                phase_at_pi,
                exit_energy,
            };
        }
    }
}

/// Launches from the unperturbed unstable branch so that the unperturbed
/// orbit would cross `q = π` at rotator phase `phase`, and integrates one
/// excursion. Returns the event with `ΔI` and the first-order prediction.
#[allow(clippy::too_many_arguments)]
pub fn single_transition<T: Real>(
    mu: T,
    omega: &[T],
    f: &PerturbationSeries<T>,
    phase: &[T],
    action: &[T],
    radius: T,
    dt: T,
    scheme: Scheme,
) -> Result<TransitionEvent<T>> {
    let (q_l, p_l, tau) = launch_geometry(radius);
    let start: Vec<T> = phase.iter().zip(omega).map(|(a, w)| *a - *w * tau).collect();
    let state = FullState::new(start, action.to_vec(), q_l, p_l, T::zero())?;
    let mut it = Integrator::new(&state, mu, omega, f, dt, scheme)?;
    let ex = excursion(&mut it, radius, lit::<T>(4.0) * tau + lit(40.0));
    Ok(TransitionEvent {
        index: 0,
        t_launch: T::zero(),
        t_exit: it.time(),
        wait: T::zero(),
        target_phase: phase.to_vec(),
        phase_at_pi: ex.phase_at_pi,
        action_before: action.to_vec(),
        delta_i: it.action.iter().zip(action).map(|(a, b)| *a - *b).collect(),
        predicted: melnikov_series(phase, omega, f).1.into_iter().map(|g| -mu * g).collect(),
        exit_energy: ex.exit_energy,
        turned_back: ex.turned_back,
    })
}

/// Realizes a chain of heteroclinic transitions from the torus at `source`
/// towards the torus at `target`. Between excursions the system sits on the
/// torus `q = p = 0` and is integrated step by step until the rotator phase
/// enters the α-ball around the launch phase chosen by the steering rule.
pub fn run_transition_chain<T: Real>(cfg: &ChainConfig<T>) -> Result<DiffusionRun<T>> {
    cfg.validate()?;
    let clock = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let initial_phase: Vec<T> = (0..cfg.omega.len()).map(|_| lit::<T>(rng.gen::<f64>()) * two_pi::<T>()).collect();
    let radius = cfg.launch_radius.unwrap_or(cfg.eta);
    let (q_l, p_l, tau) = launch_geometry(radius);
    let limit = lit::<T>(4.0) * tau + lit(40.0);
    let max_time = lit::<T>(cfg.budget.max_time);

    let state = FullState::new(initial_phase.clone(), cfg.source.clone(), T::zero(), T::zero(), T::zero())?;
    let mut it = Integrator::new(&state, cfg.mu, &cfg.omega, &cfg.f, cfg.dt, cfg.scheme)?;
    let mut checkpoints = vec![(T::zero(), cfg.source.clone())];
    let mut events: Vec<TransitionEvent<T>> = Vec::new();
    let distance = |a: &[T]| -> T { a.iter().zip(&cfg.target).fold(T::zero(), |acc, (x, y)| acc + (*x - *y) * (*x - *y)).sqrt() };

    let stop = 'outer: loop {
        if distance(&it.action) < cfg.eta {
            break StopReason::Reached;
        }
        if events.len() >= cfg.budget.max_transitions {
            break StopReason::TransitionBudget;
        }
        let Some(target_phase) = steer(cfg, &it.action) else {
            break StopReason::NoAdmissibleTransition;
        };
        let launch: Vec<T> = target_phase.iter().zip(&cfg.omega).map(|(a, w)| wrap(*a - *w * tau)).collect();
        let wait_start = it.time();
        let mut counter = 0u32;
        loop {
            let phi: Vec<T> = it.phase_at(T::zero()).into_iter().map(wrap).collect();
            if torus_distance(&phi, &launch) < cfg.window.alpha {
                break;
            }
            if it.time() >= max_time {
                break 'outer StopReason::TimeBudget;
            }
            counter += 1;
            if counter % 65_536 == 0 {
                if let Some(w) = cfg.budget.wall_clock {
                    if clock.elapsed() > w {
                        break 'outer StopReason::WallClock;
                    }
                }
            }
            it.step();
        }
        let t_launch = it.time();
        let before = it.action.clone();
        it.q = q_l;
        it.p = p_l;
        let ex = excursion(&mut it, radius, limit);
        it.q = T::zero();
        it.p = T::zero();
        events.push(TransitionEvent {
            index: events.len(),
            t_launch,
            t_exit: it.time(),
            wait: t_launch - wait_start,
            predicted: melnikov_series(&target_phase, &cfg.omega, &cfg.f).1.into_iter().map(|g| -cfg.mu * g).collect(),
            target_phase,
            phase_at_pi: ex.phase_at_pi,
            delta_i: it.action.iter().zip(&before).map(|(a, b)| *a - *b).collect(),
            action_before: before,
            exit_energy: ex.exit_energy,
            turned_back: ex.turned_back,
        });
        checkpoints.push((it.time(), it.action.clone()));
        if let Some(w) = cfg.budget.wall_clock {
            if clock.elapsed() > w {
                break StopReason::WallClock;
            }
        }
    };
    let final_time = it.time();
    if checkpoints.last().map(|c| c.0) != Some(final_time) {
        checkpoints.push((final_time, it.action.clone()));
    }
    Ok(DiffusionRun {
        mu: cfg.mu,
        source: cfg.source.clone(),
        target: cfg.target.clone(),
        eta: cfg.eta,
        seed: cfg.seed,
        dt: cfg.dt,
        initial_phase,
        checkpoints,
        events,
        t_d: (stop == StopReason::Reached).then_some(final_time),
        final_time,
        final_action: it.action.clone(),
        stop,
    })
}

/// Input row of the scaling fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalingInput<T> {
    pub mu: T,
    pub t_d: Option<T>,
    /// `diffusion_time_bound` evaluated with `C = 1`.
    pub bound_unit: Option<T>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalingRow<T> {
    pub mu: T,
    pub t_d: T,
    /// `T_d μ / ln(1/μ)`.
    pub ratio: T,
    /// `C_fit (1/μ) ln(1/μ)`.
    pub fitted: T,
    /// Bound with the single fitted `C`.
    pub bound: Option<T>,
}

#[derive(Debug, Clone)]
pub struct ScalingReport<T> {
    pub rows: Vec<ScalingRow<T>>,
    /// Least-squares coefficient of `T_d ≈ C_fit (1/μ) ln(1/μ)`.
    pub c_fit: T,
    /// Largest over smallest ratio.
    pub spread: T,
    /// Smallest `C` for which every run sits at or below the bound.
    pub bound_c: Option<T>,
    pub excluded: Vec<String>,
}

impl<T: Real> ScalingReport<T> {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("mu,T_d,ratio,fitted,bound\n");
        for r in &self.rows {
            let b = r.bound.map(|b| format!("{:.17e}", to_f64(b))).unwrap_or_else(|| "none".into());
            let _ = writeln!(s, "{:.17e},{:.17e},{:.17e},{:.17e},{}", to_f64(r.mu), to_f64(r.t_d), to_f64(r.ratio), to_f64(r.fitted), b);
        }
        s
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "c_fit={:.17e}", to_f64(self.c_fit));
        let _ = writeln!(s, "spread={:.17e}", to_f64(self.spread));
        match self.bound_c {
            Some(c) => {
                let _ = writeln!(s, "bound_C={:.17e}", to_f64(c));
            }
            None => s.push_str("bound_C=none\n"),
        }
        for e in &self.excluded {
            let _ = writeln!(s, "excluded={e}");
        }
        s
    }
}

/// Fits measured diffusion times against `(1/μ) ln(1/μ)`. Runs without a
/// diffusion time are excluded and listed.
pub fn scaling_study<T: Real>(runs: &[ScalingInput<T>]) -> Result<ScalingReport<T>> {
    let mut excluded = Vec::new();
    let mut complete = Vec::new();
    for r in runs {
        match r.t_d {
            Some(t) if r.mu > T::zero() && r.mu < T::one() => complete.push((r.mu, t, r.bound_unit)),
            _ => excluded.push(format!("mu={:e} has no diffusion time", to_f64(r.mu))),
        }
    }
    if complete.is_empty() {
        return Err(Error::Infeasible("no complete runs to fit".into()));
    }
    let law = |mu: T| (T::one() / mu).ln() / mu;
    let (mut num, mut den) = (T::zero(), T::zero());
    for &(mu, t, _) in &complete {
        num += t * law(mu);
        den += law(mu) * law(mu);
    }
    let c_fit = num / den;
    let bound_c = complete
        .iter()
        .map(|&(_, t, b)| b.map(|b| t / b))
        .collect::<Option<Vec<T>>>()
        .map(|v| v.into_iter().fold(T::zero(), T::max));
    let rows: Vec<ScalingRow<T>> = complete
        .iter()
        .map(|&(mu, t, b)| ScalingRow {
            mu,
            t_d: t,
            ratio: t / law(mu),
            fitted: c_fit * law(mu),
            bound: b.and_then(|b| bound_c.map(|c| c * b)),
        })
        .collect();
    let (lo, hi) = rows.iter().fold((T::infinity(), T::zero()), |(lo, hi), r| (lo.min(r.ratio), hi.max(r.ratio)));
    Ok(ScalingReport {
        rows,
        c_fit,
        spread: hi / lo,
        bound_c,
        excluded,
    })
}

/// Runs one chain per `μ` in parallel and fits the results. `make` builds
/// the experiment for a given `μ`; the bound uses the run's own window.
pub fn run_scaling_study<T: Real>(
    mu_list: &[T],
    tau: T,
    make: impl Fn(T) -> Result<ChainConfig<T>> + Sync,
) -> Result<(Vec<DiffusionRun<T>>, ScalingReport<T>)> {
    let out: Vec<Result<(DiffusionRun<T>, T)>> = mu_list
        .par_iter()
        .map(|&mu| {
            let cfg = make(mu)?;
            let run = run_transition_chain(&cfg)?;
            let d: Vec<T> = cfg.target.iter().zip(&cfg.source).map(|(a, b)| *a - *b).collect();
            let bound = diffusion_time_bound(dot(&d, &d).sqrt(), &cfg.window, tau, cfg.eta, T::one()).value;
            Ok((run, bound))
        })
        .collect();
    let mut runs = Vec::new();
    let mut inputs = Vec::new();
    for r in out {
        let (run, bound) = r?;
        inputs.push(ScalingInput {
            mu: run.mu,
            t_d: run.t_d,
            bound_unit: Some(bound),
        });
        runs.push(run);
    }
    let report = scaling_study(&inputs)?;
    Ok((runs, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pendulum::{solve_glued_heteroclinic, SolverOptions};
    use crate::melnikov::action_jump_along;

    fn f() -> PerturbationSeries<f64> {
        PerturbationSeries::cosines(2, &[(vec![1, 0], 1.0), (vec![1, 1], 1.0)])
    }

    fn golden() -> Vec<f64> {
        crate::frequencies::golden::<f64>()
    }

    fn config(mu: f64) -> ChainConfig<f64> {
        let w = golden();
        let kernel = [-w[1], w[0]];
        let norm = (kernel[0] * kernel[0] + kernel[1] * kernel[1]).sqrt();
        let target = vec![0.5 * kernel[0] / norm, 0.5 * kernel[1] / norm];
        let window = SplittingWindow::new(vec![0.0, 0.0], 2.0, 0.05, 0.5 * mu.max(1e-3)).unwrap();
        let mut c = ChainConfig::new(w, mu, f(), vec![0.0, 0.0], target, window, 0.02);
        c.seed = 3;
        c
    }

    #[test]
    fn launch_geometry_hits_pi() {
        let (q, p, tau) = launch_geometry(1e-3f64);
        let (qs, ps) = crate::pendulum::separatrix(-tau, 0.0);
        assert!((q - qs).abs() < 1e-12 && (p - ps).abs() < 1e-12);
    }

    #[test]
    fn zero_coupling_makes_no_transition() {
        let run = run_transition_chain(&config(0.0)).unwrap();
        assert!(run.t_d.is_none());
        assert_eq!(run.events.len(), 0);
        assert_eq!(run.stop, StopReason::NoAdmissibleTransition);
        assert_eq!(run.net_delta(), vec![0.0, 0.0]);
    }

    #[test]
    fn rejects_off_resonance_target() {
        let mut c = config(1e-2);
        c.target = vec![0.1, 0.1];
        assert!(run_transition_chain(&c).is_err());
    }

    #[test]
    fn jump_matches_quadrature_along_glued_orbit() {
        let w = golden();
        let a = [0.7, -1.2];
        let mu = 2e-3;
        let ev = single_transition(mu, &w, &f(), &a, &[0.0, 0.0], 1e-3, 1e-3, Scheme::Yoshida4).unwrap();
        let orbit = solve_glued_heteroclinic(mu, &a, 0.0, &w, &f(), &SolverOptions::default()).unwrap();
        let quad = action_jump_along(&orbit, &w, &f());
        for d in 0..2 {
            assert!((ev.delta_i[d] - quad[d]).abs() < 5.0 * mu * mu, "{:?} {:?}", ev.delta_i, quad);
            assert!((ev.delta_i[d] - ev.predicted[d]).abs() < 5.0 * mu * mu);
        }
        assert!(!ev.turned_back);
    }

    #[test]
    fn chain_moves_along_the_kernel_direction() {
        let mut c = config(1e-2);
        c.budget.max_time = 1e6;
        let run = run_transition_chain(&c).unwrap();
        assert_eq!(run.stop, StopReason::Reached, "{}", run.to_summary());
        let d = run.net_delta();
        assert!((d[0] * d[0] + d[1] * d[1]).sqrt() >= 0.48);
        assert_eq!(run.checkpoints.len(), run.events.len() + 1);
    }

    #[test]
    fn larger_stopping_radius_stops_sooner() {
        let mut c = config(2e-2);
        c.launch_radius = Some(0.02);
        let mut last = f64::INFINITY;
        for eta in [0.02, 0.05, 0.1, 0.2] {
            c.eta = eta;
            let t = run_transition_chain(&c).unwrap().t_d.unwrap();
            assert!(t <= last);
            last = t;
        }
    }

    #[test]
    fn synthetic_scaling_recovers_ratio() {
        let runs: Vec<ScalingInput<f64>> = [2e-2, 1e-2, 5e-3, 2.5e-3]
            .iter()
            .map(|&mu: &f64| ScalingInput {
                mu,
                t_d: Some(7.0 * (1.0 / mu) * (1.0 / mu).ln()),
                bound_unit: Some(1.0 / mu),
            })
            .chain(std::iter::once(ScalingInput { mu: 1e-3, t_d: None, bound_unit: None }))
            .collect();
        let r = scaling_study(&runs).unwrap();
        for row in &r.rows {
            assert!((row.ratio - 7.0).abs() < 1e-12);
        }
        assert!((r.c_fit - 7.0).abs() < 1e-12);
        assert!((r.spread - 1.0).abs() < 1e-12);
        assert_eq!(r.excluded.len(), 1);
        for row in &r.rows {
            assert!(row.t_d <= row.bound.unwrap() * (1.0 + 1e-12));
        }
    }

    #[test]
    fn wall_clock_budget_ends_run() {
        let mut c = config(1e-3);
        c.budget.wall_clock = Some(Duration::from_millis(1));
        c.window.alpha = 1e-3;
        let run = run_transition_chain(&c).unwrap();
        assert!(run.stop.budget_exhausted());
        assert!(run.t_d.is_none());
    }
}
