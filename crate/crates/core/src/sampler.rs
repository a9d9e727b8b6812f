//! Random trace generation. Each unit step draws `J` uniform time points,
//! keeps the ones where each outgoing guard strictly holds, and fires a
//! transition with probability proportional to its number of hits. With no
//! hits at all the mode is kept for the whole unit.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::automaton::{ConcreteState, HybridAutomaton, Jump, ModeId, Trace, TransitionId};
use crate::expr::{EvalError, Guard};
use crate::ode::{Integrator, OdeError, Trajectory};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplerConfig {
    /// Time points per unit step.
    pub points: usize,
    /// Unit steps per trace.
    pub steps: usize,
    pub seed: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig { points: 64, steps: 5, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SampleError {
    #[error(transparent)]
    Ode(#[from] OdeError),
    #[error("guard of transition {transition}: {source}")]
    Guard { transition: usize, source: EvalError },
    #[error("sampler needs at least one time point and one step")]
    BadConfig,
}

/// The stream for trace number `index` under `seed`.
pub fn trace_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Sampled enabled time points for one transition.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledWindow {
    pub transition: TransitionId,
    pub points: Vec<f64>,
}

/// Uniform draw from the open unit interval.
fn open_unit<R: Rng>(rng: &mut R) -> f64 {
    loop {
        let t: f64 = rng.random();
        if t > 0.0 {
            return t;
        }
    }
}

fn guard_holds(guard: &Guard, x: &[f64], t: f64, id: TransitionId) -> Result<bool, SampleError> {
    guard.holds(x, t).map_err(|source| SampleError::Guard { transition: id.0, source })
}

/// Monte Carlo window estimate along an already integrated unit of flow.
pub fn estimate_windows_on<R: Rng>(
    integ: &Integrator<'_>,
    traj: &Trajectory<'_, '_>,
    points: usize,
    rng: &mut R,
) -> Result<Vec<SampledWindow>, SampleError> {
    let h = integ.automaton();
    let outgoing = h.outgoing(traj.mode()).expect("trajectory mode is declared");
    let mut windows: Vec<SampledWindow> =
        outgoing.iter().map(|&transition| SampledWindow { transition, points: Vec::new() }).collect();
    if outgoing.is_empty() {
        return Ok(windows);
    }
    for _ in 0..points {
        let t = open_unit(rng);
        let x = traj.at(t)?;
        for w in windows.iter_mut() {
            if guard_holds(&h.transition(w.transition).guard, &x, traj.start() + t, w.transition)? {
                w.points.push(t);
            }
        }
    }
    Ok(windows)
}

pub fn estimate_windows<R: Rng>(
    integ: &Integrator<'_>,
    q: ModeId,
    v: &[f64],
    step_index: usize,
    points: usize,
    rng: &mut R,
) -> Result<Vec<SampledWindow>, SampleError> {
    let traj = integ.trajectory(q, v, step_index as f64)?;
    estimate_windows_on(integ, &traj, points, rng)
}

/// One unit step from `s`, which is reached at trace step `step_index`.
pub fn random_step<R: Rng>(
    integ: &Integrator<'_>,
    s: &ConcreteState,
    step_index: usize,
    points: usize,
    rng: &mut R,
) -> Result<(ConcreteState, Jump), SampleError> {
    let start = step_index as f64;
    let traj = integ.trajectory(s.mode, &s.valuation, start)?;
    let windows = estimate_windows_on(integ, &traj, points, rng)?;
    let total: usize = windows.iter().map(|w| w.points.len()).sum();
    if total == 0 {
        let next = ConcreteState { mode: s.mode, valuation: traj.end().to_vec() };
        return Ok((next, Jump::Stay));
    }
    let mut pick = rng.random_range(0..total);
    let chosen = windows
        .iter()
        .find(|w| {
            if pick < w.points.len() {
                true
            } else {
                pick -= w.points.len();
                false
            }
        })
        .expect("pick is below the total");
    let time = chosen.points[rng.random_range(0..chosen.points.len())];
    let h = integ.automaton();
    let target = h.transition(chosen.transition).target;
    let mid = traj.at(time)?;
    let end = integ.flow_from(target, &mid, start + time, 1.0 - time)?;
    Ok((ConcreteState { mode: target, valuation: end }, Jump::Fire { transition: chosen.transition, time }))
}

/// Uniform point of the initial box.
pub fn initial_state<R: Rng>(h: &HybridAutomaton, rng: &mut R) -> ConcreteState {
    let valuation = h
        .initial_box
        .iter()
        .map(|&(l, u)| if l == u { l } else { l + (u - l) * rng.random::<f64>() })
        .collect();
    ConcreteState { mode: h.initial_mode, valuation }
}

/// Extends `prefix` with random steps until it has `cfg.steps` jumps.
pub fn extend_trace<R: Rng>(
    integ: &Integrator<'_>,
    mut prefix: Trace,
    cfg: &SamplerConfig,
    rng: &mut R,
) -> Result<Trace, SampleError> {
    while prefix.jumps.len() < cfg.steps {
        let k = prefix.jumps.len();
        let (next, jump) = random_step(integ, &prefix.states[k], k, cfg.points, rng)?;
        prefix.states.push(next);
        prefix.jumps.push(jump);
    }
    Ok(prefix)
}

/// Trace number `index` of the run seeded by `cfg.seed`.
pub fn sample_trace(integ: &Integrator<'_>, cfg: &SamplerConfig, index: u64) -> Result<Trace, SampleError> {
    if cfg.points == 0 || cfg.steps == 0 {
        return Err(SampleError::BadConfig);
    }
    let mut rng = trace_rng(cfg.seed, index);
    let s0 = initial_state(integ.automaton(), &mut rng);
    extend_trace(integ, Trace { states: vec![s0], jumps: Vec::new() }, cfg, &mut rng)
}

pub fn is_counterexample(h: &HybridAutomaton, tr: &Trace) -> bool {
    tr.states.iter().any(|s| h.is_negative(s.mode))
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TraceError {
    #[error("trace has {states} states for {jumps} jumps")]
    Shape { states: usize, jumps: usize },
    #[error("trace does not start in the initial mode")]
    InitialMode,
    #[error("initial valuation lies outside the initial box")]
    InitialBox,
    #[error("step {step}: transition does not match the recorded modes")]
    ModeMismatch { step: usize },
    #[error("step {step}: guard does not hold at the recorded firing time")]
    GuardFails { step: usize },
    #[error("step {step}: re-simulated valuation differs from the recorded one")]
    ValuationMismatch { step: usize },
    #[error("step {step}: {source}")]
    Simulation { step: usize, source: SampleError },
}

/// Re-simulates every step and checks the recorded firing times against
/// guards relaxed by `delta`. Valuations must agree to a relative 1e-9.
pub fn verify_trace(integ: &Integrator<'_>, tr: &Trace, delta: f64) -> Result<(), TraceError> {
    let h = integ.automaton();
    if tr.states.len() != tr.jumps.len() + 1 {
        return Err(TraceError::Shape { states: tr.states.len(), jumps: tr.jumps.len() });
    }
    let s0 = &tr.states[0];
    if s0.mode != h.initial_mode {
        return Err(TraceError::InitialMode);
    }
    if s0.valuation.len() != h.dim()
        || s0.valuation.iter().zip(&h.initial_box).any(|(x, &(l, u))| *x < l || *x > u)
    {
        return Err(TraceError::InitialBox);
    }
    for (k, jump) in tr.jumps.iter().enumerate() {
        let (from, to) = (&tr.states[k], &tr.states[k + 1]);
        let start = k as f64;
        let sim = |e: OdeError| TraceError::Simulation { step: k, source: SampleError::Ode(e) };
        let expected = match *jump {
            Jump::Stay => {
                if from.mode != to.mode {
                    return Err(TraceError::ModeMismatch { step: k });
                }
                integ.flow_from(from.mode, &from.valuation, start, 1.0).map_err(sim)?
            }
            Jump::Fire { transition, time } => {
                let tr_def = h.transitions.get(transition.0).ok_or(TraceError::ModeMismatch { step: k })?;
                if tr_def.source != from.mode || tr_def.target != to.mode {
                    return Err(TraceError::ModeMismatch { step: k });
                }
                if !(time > 0.0 && time < 1.0) {
                    return Err(TraceError::GuardFails { step: k });
                }
                let mid = integ.flow_from(from.mode, &from.valuation, start, time).map_err(sim)?;
                let ok = tr_def.guard.holds_weakened(&mid, start + time, delta).map_err(|source| {
                    TraceError::Simulation {
                        step: k,
                        source: SampleError::Guard { transition: transition.0, source },
                    }
                })?;
                if !ok {
                    return Err(TraceError::GuardFails { step: k });
                }
                integ.flow_from(to.mode, &mid, start + time, 1.0 - time).map_err(sim)?
            }
        };
        let close = expected
            .iter()
            .zip(&to.valuation)
            .all(|(a, b)| (a - b).abs() <= 1e-9 * (1.0 + a.abs().max(b.abs())));
        if expected.len() != to.valuation.len() || !close {
            return Err(TraceError::ValuationMismatch { step: k });
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowSource {
    /// Dense grid scan with bisection of every sign change.
    Grid,
    /// Produced by the constraint solver.
    Solver,
}

/// Disjoint open sub-intervals of (0,1) where a guard holds along a unit of
/// flow.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeWindowSet {
    pub intervals: Vec<(f64, f64)>,
    pub measure: f64,
    pub source: WindowSource,
}

impl TimeWindowSet {
    pub fn from_intervals(intervals: Vec<(f64, f64)>, source: WindowSource) -> TimeWindowSet {
        let measure = intervals.iter().map(|(a, b)| b - a).sum();
        TimeWindowSet { intervals, measure, source }
    }

    pub fn contains(&self, t: f64) -> bool {
        self.intervals.iter().any(|&(a, b)| a < t && t < b)
    }
}

/// Window of `guard` along `traj`, found by evaluating every grid point and
/// bisecting each change of truth value to 1e-13. Windows narrower than one
/// grid step that start and end between the same two grid points are missed.
pub fn grid_windows(traj: &Trajectory<'_, '_>, guard: &Guard) -> Result<TimeWindowSet, SampleError> {
    let n = traj.grid_len();
    let at = |t: f64| -> Result<bool, SampleError> {
        let x = traj.at(t)?;
        guard.holds(&x, traj.start() + t).map_err(|source| SampleError::Guard { transition: usize::MAX, source })
    };
    let mut truth = Vec::with_capacity(n);
    for j in 0..n {
        let x = traj.grid_state(j);
        truth.push(
            guard
                .holds(x, traj.start() + traj.grid_time(j))
                .map_err(|source| SampleError::Guard { transition: usize::MAX, source })?,
        );
    }
    let edge = |lo: f64, hi: f64, lo_val: bool| -> Result<f64, SampleError> {
        // Invariant: truth(lo) = lo_val, truth(hi) = !lo_val.
        let (mut a, mut b) = (lo, hi);
        while b - a > 1e-13 {
            let m = 0.5 * (a + b);
            if at(m)? == lo_val {
                a = m;
            } else {
                b = m;
            }
        }
        Ok(0.5 * (a + b))
    };
    let mut intervals = Vec::new();
    let mut open: Option<f64> = if truth[0] { Some(0.0) } else { None };
    for j in 1..n {
        if truth[j] == truth[j - 1] {
            continue;
        }
        let c = edge(traj.grid_time(j - 1), traj.grid_time(j), truth[j - 1])?;
        if truth[j] {
            open = Some(c);
        } else if let Some(a) = open.take() {
            intervals.push((a, c));
        }
    }
    if let Some(a) = open {
        intervals.push((a, 1.0));
    }
    Ok(TimeWindowSet::from_intervals(intervals, WindowSource::Grid))
}
