//! Fixed-step RK4 trajectories inside a mode, and the one-step composition
//! "flow in the source mode until the firing time, then in the target mode
//! for the rest of the unit".
//!
//! Time in right-hand sides is absolute: a unit step that starts at trace
//! step `k` integrates over `[k, k + 1]`.

use std::sync::atomic::{AtomicU64, Ordering};

use thiserror::Error;

use crate::automaton::{HybridAutomaton, ModeId, TransitionId};
use crate::expr::EvalError;

/// Any coordinate beyond this magnitude aborts integration.
pub const DIVERGENCE_BOUND: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct IntegratorConfig {
    pub step: f64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig { step: 1e-3 }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OdeError {
    #[error("integrator step must satisfy 0 < h <= 0.1 with 1/h an integer, got {0}")]
    BadStep(f64),
    #[error("trajectory diverged in mode `{mode}` at time {time}")]
    Divergence { mode: String, time: f64 },
    #[error("in mode `{mode}`: {source}")]
    Eval { mode: String, source: EvalError },
    #[error("firing time {0} is outside the open unit interval")]
    FiringTime(f64),
    #[error("query time {0} is outside [0, 1]")]
    QueryTime(f64),
}

impl IntegratorConfig {
    /// Number of full steps per unit interval.
    pub fn steps_per_unit(&self) -> Result<usize, OdeError> {
        let h = self.step;
        if !(h > 0.0 && h <= 0.1) {
            return Err(OdeError::BadStep(h));
        }
        let n = (1.0 / h).round();
        if ((1.0 / h) - n).abs() > 1e-9 * n {
            return Err(OdeError::BadStep(h));
        }
        Ok(n as usize)
    }
}

/// RK4 integrator bound to an automaton. Counts every RK4 step it takes.
#[derive(Debug)]
pub struct Integrator<'a> {
    h: &'a HybridAutomaton,
    step: f64,
    per_unit: usize,
    work: AtomicU64,
}

impl<'a> Integrator<'a> {
    pub fn new(h: &'a HybridAutomaton, cfg: IntegratorConfig) -> Result<Self, OdeError> {
        let per_unit = cfg.steps_per_unit()?;
        Ok(Integrator { h, step: 1.0 / per_unit as f64, per_unit, work: AtomicU64::new(0) })
    }

    pub fn automaton(&self) -> &'a HybridAutomaton {
        self.h
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn steps_per_unit(&self) -> usize {
        self.per_unit
    }

    /// Total RK4 steps taken so far.
    pub fn work(&self) -> u64 {
        self.work.load(Ordering::Relaxed)
    }

    fn rhs(&self, q: ModeId, x: &[f64], t: f64, out: &mut [f64]) -> Result<(), OdeError> {
        let mode = &self.h.modes[q.0];
        for (o, e) in out.iter_mut().zip(&mode.flow) {
            *o = e.eval(x, t).map_err(|source| OdeError::Eval { mode: mode.name.clone(), source })?;
        }
        Ok(())
    }

    fn rk4(&self, q: ModeId, x: &mut [f64], t: f64, h: f64, scratch: &mut Scratch) -> Result<(), OdeError> {
        let n = x.len();
        let Scratch { k1, k2, k3, k4, tmp } = scratch;
        self.rhs(q, x, t, k1)?;
        for i in 0..n {
            tmp[i] = x[i] + 0.5 * h * k1[i];
        }
        self.rhs(q, tmp, t + 0.5 * h, k2)?;
        for i in 0..n {
            tmp[i] = x[i] + 0.5 * h * k2[i];
        }
        self.rhs(q, tmp, t + 0.5 * h, k3)?;
        for i in 0..n {
            tmp[i] = x[i] + h * k3[i];
        }
        self.rhs(q, tmp, t + h, k4)?;
        for i in 0..n {
            x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        self.work.fetch_add(1, Ordering::Relaxed);
        if x.iter().any(|v| !v.is_finite() || v.abs() > DIVERGENCE_BOUND) {
            return Err(OdeError::Divergence { mode: self.h.modes[q.0].name.clone(), time: t + h });
        }
        Ok(())
    }

    /// Splits a duration into full grid steps and a residual.
    fn split(&self, dur: f64) -> (usize, f64) {
        let j = ((dur * self.per_unit as f64).floor() as usize).min(self.per_unit);
        let rem = dur - j as f64 * self.step;
        (j, if rem > 0.0 { rem } else { 0.0 })
    }

    /// Flow for `dur` time units in mode `q` from `v`, starting at absolute
    /// time `start`.
    pub fn flow_from(&self, q: ModeId, v: &[f64], start: f64, dur: f64) -> Result<Vec<f64>, OdeError> {
        if !(0.0..=1.0).contains(&dur) {
            return Err(OdeError::QueryTime(dur));
        }
        let (j, rem) = self.split(dur);
        let mut x = v.to_vec();
        let mut scratch = Scratch::new(x.len());
        for i in 0..j {
            self.rk4(q, &mut x, start + i as f64 * self.step, self.step, &mut scratch)?;
        }
        if rem > 0.0 {
            self.rk4(q, &mut x, start + j as f64 * self.step, rem, &mut scratch)?;
        }
        Ok(x)
    }

    /// `θ_q(v, t)` for a step starting at absolute time zero.
    pub fn flow(&self, q: ModeId, v: &[f64], t: f64) -> Result<Vec<f64>, OdeError> {
        self.flow_from(q, v, 0.0, t)
    }

    /// Grid states over one unit interval.
    pub fn trajectory(&self, q: ModeId, v: &[f64], start: f64) -> Result<Trajectory<'_, 'a>, OdeError> {
        let n = v.len();
        let mut grid = Vec::with_capacity(n * (self.per_unit + 1));
        grid.extend_from_slice(v);
        let mut x = v.to_vec();
        let mut scratch = Scratch::new(n);
        for i in 0..self.per_unit {
            self.rk4(q, &mut x, start + i as f64 * self.step, self.step, &mut scratch)?;
            grid.extend_from_slice(&x);
        }
        Ok(Trajectory { integ: self, mode: q, start, dim: n, grid })
    }

    /// End-of-unit valuation after firing `trans` at local time `t`.
    pub fn compose_step(
        &self,
        q: ModeId,
        v: &[f64],
        trans: TransitionId,
        t: f64,
        start: f64,
    ) -> Result<Vec<f64>, OdeError> {
        if !(t > 0.0 && t < 1.0) {
            return Err(OdeError::FiringTime(t));
        }
        let target = self.h.transitions[trans.0].target;
        debug_assert_eq!(self.h.transitions[trans.0].source, q);
        let mid = self.flow_from(q, v, start, t)?;
        self.flow_from(target, &mid, start + t, 1.0 - t)
    }
}

struct Scratch {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
}

impl Scratch {
    fn new(n: usize) -> Scratch {
        Scratch { k1: vec![0.0; n], k2: vec![0.0; n], k3: vec![0.0; n], k4: vec![0.0; n], tmp: vec![0.0; n] }
    }
}

/// Dense view of one unit of flow in a single mode.
pub struct Trajectory<'i, 'a> {
    integ: &'i Integrator<'a>,
    mode: ModeId,
    start: f64,
    dim: usize,
    grid: Vec<f64>,
}

impl<'i, 'a> Trajectory<'i, 'a> {
    pub fn mode(&self) -> ModeId {
        self.mode
    }

    pub fn start(&self) -> f64 {
        self.start
    }

    pub fn grid_len(&self) -> usize {
        self.integ.per_unit + 1
    }

    pub fn grid_time(&self, j: usize) -> f64 {
        j as f64 * self.integ.step
    }

    pub fn grid_state(&self, j: usize) -> &[f64] {
        &self.grid[j * self.dim..(j + 1) * self.dim]
    }

    pub fn end(&self) -> &[f64] {
        self.grid_state(self.integ.per_unit)
    }

    /// State at local time `t`: nearest grid point below plus one partial
    /// step. Agrees bit-for-bit with `Integrator::flow_from`.
    pub fn at(&self, t: f64) -> Result<Vec<f64>, OdeError> {
        if !(0.0..=1.0).contains(&t) {
            return Err(OdeError::QueryTime(t));
        }
        let (j, rem) = self.integ.split(t);
        let mut x = self.grid_state(j).to_vec();
        if rem > 0.0 {
            let mut scratch = Scratch::new(self.dim);
            self.integ.rk4(self.mode, &mut x, self.start + j as f64 * self.integ.step, rem, &mut scratch)?;
        }
        Ok(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::automaton::AutomatonBuilder;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn damped() -> HybridAutomaton {
        AutomatonBuilder::new("osc", &["x", "v"])
            .param("w", 2.0 * PI)
            .mode("q0", &["v", "-v - w^2*x"])
            .initial("q0", &[(0.0, 0.0), (2.0 * PI, 2.0 * PI)])
            .build()
            .unwrap()
    }

    /// Closed-form x(t) for x'' + x' + 4π²x = 0, x(0) = 0, x'(0) = v0.
    fn damped_exact(v0: f64, t: f64) -> f64 {
        let wd = (4.0 * PI * PI - 0.25).sqrt();
        v0 / wd * (-t / 2.0).exp() * (wd * t).sin()
    }

    #[test]
    fn zero_dynamics_is_identity() {
        let h = AutomatonBuilder::new("z", &["x", "y"])
            .mode("q", &["0", "0"])
            .initial("q", &[(0.0, 0.0), (0.0, 0.0)])
            .build()
            .unwrap();
        let integ = Integrator::new(&h, IntegratorConfig::default()).unwrap();
        assert_eq!(integ.flow(ModeId(0), &[3.5, -1.0], 0.77).unwrap(), vec![3.5, -1.0]);
    }

    #[test]
    fn falling_ball_matches_closed_form() {
        let h = AutomatonBuilder::new("ball", &["x", "v"])
            .param("g", 9.8)
            .mode("falling", &["-v", "g"])
            .initial("falling", &[(10.0, 10.0), (0.0, 0.0)])
            .build()
            .unwrap();
        let integ = Integrator::new(&h, IntegratorConfig::default()).unwrap();
        let end = integ.flow(ModeId(0), &[10.0, 0.0], 1.0).unwrap();
        assert!((end[0] - 5.1).abs() < 1e-6, "{end:?}");
        assert!((end[1] - 9.8).abs() < 1e-6, "{end:?}");
    }

    #[test]
    fn oscillator_quarter_unit() {
        let h = damped();
        let integ = Integrator::new(&h, IntegratorConfig::default()).unwrap();
        let x = integ.flow(ModeId(0), &[0.0, 2.0 * PI], 0.25).unwrap();
        assert!((x[0] - damped_exact(2.0 * PI, 0.25)).abs() < 1e-4);
    }

    #[test]
    fn compose_linear_steps() {
        let h = AutomatonBuilder::new("lin", &["x"])
            .mode("q", &["1"])
            .mode("p0", &["0"])
            .mode("p2", &["2"])
            .transition("q", "x > 0", "p0")
            .transition("q", "x > 0", "p2")
            .initial("q", &[(0.0, 0.0)])
            .build()
            .unwrap();
        let integ = Integrator::new(&h, IntegratorConfig::default()).unwrap();
        let a = integ.compose_step(ModeId(0), &[0.0], TransitionId(0), 0.3, 0.0).unwrap();
        assert!((a[0] - 0.3).abs() < 1e-12);
        let b = integ.compose_step(ModeId(0), &[0.0], TransitionId(1), 0.3, 0.0).unwrap();
        assert!((b[0] - 1.7).abs() < 1e-12);
        assert_eq!(integ.compose_step(ModeId(0), &[0.0], TransitionId(0), 0.0, 0.0), Err(OdeError::FiringTime(0.0)));
        assert_eq!(integ.compose_step(ModeId(0), &[0.0], TransitionId(0), 1.0, 0.0), Err(OdeError::FiringTime(1.0)));
    }

    #[test]
    fn divergence_is_reported() {
        let h = AutomatonBuilder::new("blow", &["x"])
            .mode("q", &["x^2"])
            .initial("q", &[(1e6, 1e6)])
            .build()
            .unwrap();
        let integ = Integrator::new(&h, IntegratorConfig::default()).unwrap();
        assert!(matches!(integ.flow(ModeId(0), &[1e6], 1.0), Err(OdeError::Divergence { .. })));
    }

    #[test]
    fn step_validation() {
        assert!(IntegratorConfig { step: 0.2 }.steps_per_unit().is_err());
        assert!(IntegratorConfig { step: 0.3 }.steps_per_unit().is_err());
        assert!(IntegratorConfig { step: 0.0 }.steps_per_unit().is_err());
        assert_eq!(IntegratorConfig { step: 0.01 }.steps_per_unit().unwrap(), 100);
        assert_eq!(IntegratorConfig { step: 1e-3 }.steps_per_unit().unwrap(), 1000);
    }

    #[test]
    fn dense_view_agrees_with_direct_flow() {
        let h = damped();
        let integ = Integrator::new(&h, IntegratorConfig::default()).unwrap();
        let v = [0.1, 3.0];
        let traj = integ.trajectory(ModeId(0), &v, 2.0).unwrap();
        assert_eq!(traj.at(0.0).unwrap(), v.to_vec());
        for &t in &[0.0, 1e-4, 0.2345678, 0.5, 0.999, 1.0] {
            assert_eq!(traj.at(t).unwrap(), integ.flow_from(ModeId(0), &v, 2.0, t).unwrap());
        }
        assert_eq!(traj.end(), integ.flow_from(ModeId(0), &v, 2.0, 1.0).unwrap().as_slice());
    }

    #[test]
    fn fourth_order_convergence() {
        let h = damped();
        let max_err = |step: f64| {
            let integ = Integrator::new(&h, IntegratorConfig { step }).unwrap();
            let mut x = vec![0.0, 2.0 * PI];
            let mut worst: f64 = 0.0;
            for k in 0..5 {
                x = integ.flow_from(ModeId(0), &x, k as f64, 1.0).unwrap();
                worst = worst.max((x[0] - damped_exact(2.0 * PI, (k + 1) as f64)).abs());
            }
            worst
        };
        let coarse = max_err(0.02);
        let fine = max_err(0.01);
        assert!(coarse / fine >= 12.0, "ratio {}", coarse / fine);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn semigroup_on_linear_systems(
            a in proptest::array::uniform4(-1.0f64..1.0),
            x0 in proptest::array::uniform2(-1.0f64..1.0),
            s in 0.0f64..1.0,
            frac in 0.0f64..1.0,
        ) {
            let u = (1.0 - s) * frac;
            let h = AutomatonBuilder::new("lin", &["x", "y"])
                .param("a", a[0]).param("b", a[1]).param("c", a[2]).param("d", a[3])
                .mode("q", &["a*x + b*y", "c*x + d*y"])
                .initial("q", &[(0.0, 0.0), (0.0, 0.0)])
                .build()
                .unwrap();
            let cfg = IntegratorConfig::default();
            let integ = Integrator::new(&h, cfg).unwrap();
            let direct = integ.flow(ModeId(0), &x0, s + u).unwrap();
            let mid = integ.flow(ModeId(0), &x0, s).unwrap();
            let split = integ.flow_from(ModeId(0), &mid, s, u).unwrap();
            let tol = 10.0 * cfg.step.powi(4);
            for i in 0..2 {
                prop_assert!((direct[i] - split[i]).abs() <= tol, "{} vs {}", direct[i], split[i]);
            }
        }
    }
}
