//! δ-decision feasibility of guard windows and bounded path conditions.
//!
//! A path condition asks for firing times (and, optionally, a start point in
//! the initial box) such that every guard along a fixed sequence of
//! transitions strictly holds at its firing time on the simulated
//! trajectory. The answer is one of
//!
//! * `Sat`: a witness that has been re-simulated and checked against the
//!   strict guards,
//! * `Unsat`: every part of the search space was bounded below `-δ` in guard
//!   robustness, so even the guards relaxed by `δ` cannot be met,
//! * `Unknown`: neither could be established within the depth or budget.
//!
//! Firing times are searched by a recursive chain of one-dimensional
//! best-first subdivisions, one per step. The free coordinates of the
//! initial box are searched jointly by best-first subdivision of box cells.
//! Upper bounds come from sampled values plus a slope term estimated from
//! nearby differences. There are no symbolic enclosures; the bounds are
//! heuristic, which is what the `Unknown` answer is for.

use std::collections::{BTreeSet, BinaryHeap};
use std::cmp::Ordering;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::automaton::{ConcreteState, HybridAutomaton, Jump, ModeId, Trace, TransitionId};
use crate::ode::Integrator;
use crate::sampler::{grid_windows, TimeWindowSet, WindowSource};

/// Slope multiplier in interval bounds.
const KAPPA: f64 = 2.0;
/// Values below `-CLIP * δ` are flattened before estimating slopes. Later
/// steps of a path are explored wherever a margin is above that level.
const CLIP: f64 = 4.0;
/// Samples per candidate time range of an intermediate step.
const INITIAL_SAMPLES: usize = 9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Robustness margin `δ` separating `Unsat` from `Unknown`.
    pub precision: f64,
    /// Bisection depth limit per search dimension.
    pub max_depth: u32,
    /// Wall-clock budget per query.
    pub budget: Duration,
    /// Trajectory and point evaluations allowed per query. This cap, not the
    /// wall-clock budget, normally ends a query, which keeps answers
    /// reproducible.
    pub max_evaluations: u64,
    /// Longest path condition accepted.
    pub max_path_len: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            precision: 1e-3,
            max_depth: 30,
            budget: Duration::from_secs(10),
            max_evaluations: 5_000,
            max_path_len: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolveError {
    #[error("solver precision must be positive and depth at least 10")]
    BadConfig,
    #[error("path is empty")]
    EmptyPath,
    #[error("path has {len} steps, more than the limit of {max}")]
    TooLong { len: usize, max: usize },
    #[error("path step {0} does not continue from the previous mode")]
    Disconnected(usize),
    #[error("start valuation has the wrong dimension")]
    Dimension,
}

/// One unit step of a path condition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", content = "id", rename_all = "snake_case")]
pub enum PathStep {
    Jump(TransitionId),
    /// No transition during the unit: an unconstrained flow in the mode.
    Stay(ModeId),
}

impl PathStep {
    pub fn from_jump(h: &HybridAutomaton, mode: ModeId, j: &Jump) -> PathStep {
        match *j {
            Jump::Stay => PathStep::Stay(mode),
            Jump::Fire { transition, .. } => {
                debug_assert_eq!(h.transition(transition).source, mode);
                PathStep::Jump(transition)
            }
        }
    }

    pub fn source(&self, h: &HybridAutomaton) -> ModeId {
        match *self {
            PathStep::Jump(t) => h.transition(t).source,
            PathStep::Stay(q) => q,
        }
    }

    pub fn target(&self, h: &HybridAutomaton) -> ModeId {
        match *self {
            PathStep::Jump(t) => h.transition(t).target,
            PathStep::Stay(q) => q,
        }
    }
}

/// Verified solution of a path condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub start: Vec<f64>,
    /// Firing time per step, `None` for stays.
    pub times: Vec<Option<f64>>,
    /// Valuations at every unit boundary, starting with `start`.
    pub states: Vec<Vec<f64>>,
    /// Full enabled window of a one-step query.
    pub window: Option<TimeWindowSet>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "result", content = "detail", rename_all = "snake_case")]
pub enum SatResult {
    Sat(Witness),
    Unsat,
    Unknown(String),
}

impl SatResult {
    pub fn label(&self) -> &'static str {
        match self {
            SatResult::Sat(_) => "sat",
            SatResult::Unsat => "unsat",
            SatResult::Unknown(_) => "unknown",
        }
    }
}

/// Paths proven infeasible from every point of the initial box, starting at
/// trace step zero.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct InfCache {
    entries: BTreeSet<Vec<PathStep>>,
}

impl InfCache {
    pub fn insert(&mut self, path: Vec<PathStep>) {
        self.entries.insert(path);
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> impl Iterator<Item = &Vec<PathStep>> {
        self.entries.iter()
    }

    /// A cached path that is a prefix of `path` rules it out.
    pub fn covers(&self, path: &[PathStep]) -> bool {
        (1..=path.len()).any(|k| self.entries.contains(&path[..k]))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QueryKind {
    OneStep,
    PathFrom,
    PathAny,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditEntry {
    pub kind: QueryKind,
    /// Steps as `source->target` or `stay:mode`.
    pub path: Vec<String>,
    pub start_step: usize,
    pub result: String,
    /// Node count of the path condition's guards and right-hand sides.
    pub formula_length: usize,
    pub evaluations: u64,
    pub cached: bool,
    pub elapsed_ms: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolverStats {
    pub queries: u64,
    pub sat: u64,
    pub unsat: u64,
    pub unknown: u64,
    pub cache_hits: u64,
    pub evaluations: u64,
}

/// Outcome of the backtracking search for a run that takes a given
/// transition.
#[derive(Debug, Clone, PartialEq)]
pub enum Backtrack {
    /// A trace prefix whose last jump is the requested transition.
    Found(Trace),
    /// Proven infeasible; the path was cached.
    Infeasible,
    Unknown(String),
}

pub struct Solver<'i, 'a> {
    integ: &'i Integrator<'a>,
    cfg: SolverConfig,
    pub cache: InfCache,
    pub audit: Vec<AuditEntry>,
    pub stats: SolverStats,
}

#[derive(Debug)]
enum Abort {
    Budget,
    Evaluations,
}

#[derive(Debug, Clone)]
struct Partial {
    times: Vec<Option<f64>>,
    states: Vec<Vec<f64>>,
}

/// Best robustness observed, tagged with how many jumps of the path had a
/// margin above `-δ` there. Margins are only comparable at equal depth.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Seen {
    depth: u32,
    margin: f64,
}

impl Seen {
    const NONE: Seen = Seen { depth: 0, margin: f64::NEG_INFINITY };

    fn at(margin: f64) -> Seen {
        Seen { depth: 0, margin: sanitize_low(margin) }
    }

    fn max(self, other: Seen) -> Seen {
        if (other.depth, other.margin).partial_cmp(&(self.depth, self.margin)) == Some(Ordering::Greater) {
            other
        } else {
            self
        }
    }
}

#[derive(Debug, Clone)]
struct Value {
    low: f64,
    seen: Seen,
    up: f64,
    unknown: bool,
    witness: Option<Partial>,
}

struct Point<W> {
    low: f64,
    seen: Seen,
    up: f64,
    witness: Option<W>,
}

struct SearchResult<W> {
    sat: Option<(f64, W)>,
    low: f64,
    seen: Seen,
    up: f64,
    unknown: bool,
}

#[derive(Debug, Clone, Copy)]
struct Interval {
    a: f64,
    b: f64,
    fa: f64,
    fb: f64,
    slope: f64,
    bound: f64,
    depth: u32,
}

impl PartialEq for Interval {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Interval {}
impl PartialOrd for Interval {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Interval {
    fn cmp(&self, other: &Self) -> Ordering {
        // Highest bound first; earlier intervals win ties.
        self.bound.total_cmp(&other.bound).then_with(|| other.a.total_cmp(&self.a))
    }
}

struct Engine<'i, 'a> {
    integ: &'i Integrator<'a>,
    cfg: SolverConfig,
    deadline: Instant,
    evaluations: u64,
}

fn sanitize_up(x: f64) -> f64 {
    if x.is_nan() {
        f64::INFINITY
    } else {
        x
    }
}

fn sanitize_low(x: f64) -> f64 {
    if x.is_nan() {
        f64::NEG_INFINITY
    } else {
        x
    }
}

impl<'i, 'a> Engine<'i, 'a> {
    fn tick(&mut self) -> Result<(), Abort> {
        self.evaluations += 1;
        if self.evaluations > self.cfg.max_evaluations {
            return Err(Abort::Evaluations);
        }
        if self.evaluations % 64 == 0 && Instant::now() > self.deadline {
            return Err(Abort::Budget);
        }
        Ok(())
    }

    fn clip(&self, x: f64) -> f64 {
        x.max(-CLIP * self.cfg.precision)
    }

    fn bound(&self, fa: f64, fb: f64, slope: f64, w: f64) -> f64 {
        let top = self.clip(fa).max(self.clip(fb));
        if slope.is_finite() {
            top + KAPPA * slope * w / 2.0
        } else {
            f64::INFINITY
        }
    }

    fn secant(&self, fa: f64, fb: f64, w: f64) -> f64 {
        let d = (self.clip(fb) - self.clip(fa)).abs();
        if d.is_nan() {
            f64::INFINITY
        } else {
            d / w
        }
    }

    /// Best-first maximisation of a robustness function on `[lo, hi]`.
    /// `xs` are the initial sample locations (sorted, spanning the range).
    /// A point is accepted as a witness only if `admissible(x)`.
    fn search_1d<W, F>(
        &mut self,
        xs: &[f64],
        slope_floor: f64,
        admissible: impl Fn(f64) -> bool,
        mut f: F,
    ) -> Result<SearchResult<W>, Abort>
    where
        F: FnMut(&mut Self, f64) -> Result<Point<W>, Abort>,
    {
        let delta = self.cfg.precision;
        let mut low = f64::NEG_INFINITY;
        let mut seen = Seen::NONE;
        let mut vals = Vec::with_capacity(xs.len());
        for &x in xs {
            let p = f(self, x)?;
            low = low.max(p.low);
            seen = seen.max(p.seen);
            if p.low > 0.0 && admissible(x) {
                if let Some(w) = p.witness {
                    return Ok(SearchResult { sat: Some((x, w)), low, seen, up: p.up, unknown: false });
                }
            }
            vals.push(sanitize_up(p.up));
        }
        let span = xs[xs.len() - 1] - xs[0];
        let min_width = span * 0.5f64.powi(self.cfg.max_depth as i32);
        let secants: Vec<f64> = xs.windows(2).zip(vals.windows(2)).map(|(x, v)| self.secant(v[0], v[1], x[1] - x[0])).collect();
        let mut heap = BinaryHeap::new();
        for i in 0..secants.len() {
            let w = xs[i + 1] - xs[i];
            if w <= 0.0 {
                continue;
            }
            let mut slope = secants[i].max(slope_floor);
            if i > 0 {
                slope = slope.max(secants[i - 1]);
            }
            if i + 1 < secants.len() {
                slope = slope.max(secants[i + 1]);
            }
            let bound = self.bound(vals[i], vals[i + 1], slope, w);
            heap.push(Interval { a: xs[i], b: xs[i + 1], fa: vals[i], fb: vals[i + 1], slope, bound, depth: 0 });
        }
        let mut up = f64::NEG_INFINITY;
        let mut unknown = false;
        while let Some(iv) = heap.pop() {
            if iv.bound <= -delta {
                up = up.max(iv.bound);
                break;
            }
            let top = self.clip(iv.fa).max(self.clip(iv.fb));
            let stalled = iv.bound <= 0.0 && top > -delta && iv.bound - top < delta / 4.0;
            if stalled || iv.b - iv.a <= min_width || iv.depth >= self.cfg.max_depth {
                up = up.max(iv.bound);
                unknown = true;
                continue;
            }
            let mid = 0.5 * (iv.a + iv.b);
            let p = f(self, mid)?;
            low = low.max(p.low);
            seen = seen.max(p.seen);
            if p.low > 0.0 && admissible(mid) {
                if let Some(w) = p.witness {
                    return Ok(SearchResult { sat: Some((mid, w)), low, seen, up: f64::INFINITY, unknown: false });
                }
            }
            let fm = sanitize_up(p.up);
            let half = 0.5 * (iv.b - iv.a);
            let slope = iv.slope.max(self.secant(iv.fa, fm, half)).max(self.secant(fm, iv.fb, half));
            for (a, b, fa, fb) in [(iv.a, mid, iv.fa, fm), (mid, iv.b, fm, iv.fb)] {
                let bound = self.bound(fa, fb, slope, b - a);
                heap.push(Interval { a, b, fa, fb, slope, bound, depth: iv.depth + 1 });
            }
        }
        Ok(SearchResult { sat: None, low, seen, up, unknown })
    }

    fn margins(&self, traj: &crate::ode::Trajectory<'_, '_>, tid: TransitionId) -> Vec<f64> {
        let guard = &self.integ.automaton().transition(tid).guard;
        (0..traj.grid_len())
            .map(|j| {
                let t = traj.start() + traj.grid_time(j);
                guard.margin(traj.grid_state(j), t).unwrap_or(f64::NAN)
            })
            .collect()
    }

    /// Grid-interval bounds of a margin profile.
    fn grid_bounds(&self, m: &[f64], h: f64) -> (Vec<f64>, Vec<f64>) {
        let n = m.len() - 1;
        let secants: Vec<f64> = (0..n).map(|j| self.secant(sanitize_up(m[j]), sanitize_up(m[j + 1]), h)).collect();
        let mut slopes = Vec::with_capacity(n);
        let mut bounds = Vec::with_capacity(n);
        for j in 0..n {
            let mut s = secants[j];
            if j > 0 {
                s = s.max(secants[j - 1]);
            }
            if j + 1 < n {
                s = s.max(secants[j + 1]);
            }
            slopes.push(s);
            bounds.push(self.bound(sanitize_up(m[j]), sanitize_up(m[j + 1]), s, h));
        }
        (slopes, bounds)
    }

    /// Robustness of `steps` starting from `v` at absolute step `k0`.
    fn path_value(&mut self, steps: &[PathStep], k0: usize, v: &[f64]) -> Result<Value, Abort> {
        let Some((first, rest)) = steps.split_first() else {
            return Ok(Value {
                low: f64::INFINITY,
                seen: Seen { depth: 0, margin: f64::INFINITY },
                up: f64::INFINITY,
                unknown: false,
                witness: Some(Partial { times: Vec::new(), states: Vec::new() }),
            });
        };
        match *first {
            PathStep::Stay(q) => {
                self.tick()?;
                let next = match self.integ.flow_from(q, v, k0 as f64, 1.0) {
                    Ok(x) => x,
                    Err(_) => return Ok(broken()),
                };
                let mut val = self.path_value(rest, k0 + 1, &next)?;
                if let Some(w) = val.witness.as_mut() {
                    w.times.insert(0, None);
                    w.states.insert(0, next);
                }
                Ok(val)
            }
            PathStep::Jump(tid) => self.jump_value(tid, rest, k0, v),
        }
    }

    fn jump_value(&mut self, tid: TransitionId, rest: &[PathStep], k0: usize, v: &[f64]) -> Result<Value, Abort> {
        let h = self.integ.automaton();
        let tr = h.transition(tid);
        let start = k0 as f64;
        self.tick()?;
        let traj = match self.integ.trajectory(tr.source, v, start) {
            Ok(t) => t,
            Err(_) => return Ok(broken()),
        };
        let m = self.margins(&traj, tid);
        let n = m.len() - 1;
        let step = traj.grid_time(1);
        let delta = self.cfg.precision;
        let last = rest.is_empty();

        // Point evaluation at local time t.
        let point = |eng: &mut Self, t: f64| -> Result<Point<Partial>, Abort> {
            eng.tick()?;
            let x = match traj.at(t) {
                Ok(x) => x,
                Err(_) => return Ok(Point { low: f64::NEG_INFINITY, seen: Seen::NONE, up: f64::INFINITY, witness: None }),
            };
            let mm = tr.guard.margin(&x, start + t).unwrap_or(f64::NAN);
            let interior = t > 0.0 && t < 1.0;
            if last || !(sanitize_up(mm) > -CLIP * delta) {
                let witness = if mm > 0.0 && interior {
                    match eng.integ.flow_from(tr.target, &x, start + t, 1.0 - t) {
                        Ok(end) => Some(Partial { times: vec![Some(t)], states: vec![end] }),
                        Err(_) => None,
                    }
                } else {
                    None
                };
                return Ok(Point { low: sanitize_low(mm), seen: Seen::at(mm), up: sanitize_up(mm), witness });
            }
            let next = match eng.integ.flow_from(tr.target, &x, start + t, 1.0 - t) {
                Ok(y) => y,
                Err(_) => return Ok(Point { low: f64::NEG_INFINITY, seen: Seen::NONE, up: f64::INFINITY, witness: None }),
            };
            let r = eng.path_value(rest, k0 + 1, &next)?;
            let low = sanitize_low(mm).min(r.low);
            let seen = Seen { depth: r.seen.depth + 1, margin: sanitize_low(mm).min(r.seen.margin) };
            let up = sanitize_up(mm).min(r.up);
            let witness = match r.witness {
                Some(mut w) if low > 0.0 && interior => {
                    w.times.insert(0, Some(t));
                    w.states.insert(0, next);
                    Some(w)
                }
                _ => None,
            };
            Ok(Point { low, seen, up, witness })
        };

        if last {
            // Smallest grid time where the guard strictly holds.
            for j in 1..n {
                if m[j] > 0.0 {
                    let p = point(self, traj.grid_time(j))?;
                    if let (true, Some(w)) = (p.low > 0.0, p.witness) {
                        return Ok(Value { low: p.low, seen: p.seen, up: f64::INFINITY, unknown: false, witness: Some(w) });
                    }
                }
            }
        }
        let (slopes, bounds) = self.grid_bounds(&m, step);
        let mut up = f64::NEG_INFINITY;
        let mut low = m.iter().copied().map(sanitize_low).fold(f64::NEG_INFINITY, f64::max);
        let mut seen = Seen::at(low);
        let mut unknown = false;
        let mut j = 0;
        while j < n {
            if !(bounds[j] > -delta) {
                up = up.max(bounds[j]);
                j += 1;
                continue;
            }
            // Maximal run of candidate grid intervals.
            let ja = j;
            while j < n && bounds[j] > -delta {
                j += 1;
            }
            let jb = j;
            let (xs, floor) = if last {
                // Each candidate grid interval is refined on its own.
                for i in ja..jb {
                    let xs = [traj.grid_time(i), traj.grid_time(i + 1)];
                    let r = self.search_1d(&xs, slopes[i], |t| t > 0.0 && t < 1.0, &point)?;
                    if let Some((_, w)) = r.sat {
                        return Ok(Value { low: r.low, seen: r.seen, up: f64::INFINITY, unknown: false, witness: Some(w) });
                    }
                    low = low.max(r.low);
                    seen = seen.max(r.seen);
                    up = up.max(r.up);
                    unknown |= r.unknown;
                }
                continue;
            } else {
                let count = (jb - ja).min(INITIAL_SAMPLES - 1);
                let idx: Vec<usize> = (0..=count).map(|k| ja + (k * (jb - ja)) / count).collect();
                (idx.into_iter().map(|i| traj.grid_time(i)).collect::<Vec<_>>(), 0.0)
            };
            let r = self.search_1d(&xs, floor, |t| t > 0.0 && t < 1.0, &point)?;
            if let Some((_, w)) = r.sat {
                return Ok(Value { low: r.low, seen: r.seen, up: f64::INFINITY, unknown: false, witness: Some(w) });
            }
            low = low.max(r.low);
            seen = seen.max(r.seen);
            up = up.max(r.up);
            unknown |= r.unknown;
        }
        Ok(Value { low, seen, up, unknown, witness: None })
    }

    /// Best-first subdivision of the free coordinates `dims` of a box, with
    /// the remaining coordinates fixed in `base`. Each cell is scored at its
    /// centre; bounds add a slope term from a running estimate of how fast
    /// the observed robustness changes between centres that got equally far
    /// along the path, in coordinates scaled to the unit cube.
    fn box_value(
        &mut self,
        steps: &[PathStep],
        bx: &[(f64, f64)],
        dims: &[usize],
        base: &[f64],
    ) -> Result<(Value, Option<Vec<f64>>), Abort> {
        if dims.is_empty() {
            let val = self.path_value(steps, 0, base)?;
            let start = val.witness.as_ref().map(|_| base.to_vec());
            return Ok((val, start));
        }
        let delta = self.cfg.precision;
        let d = dims.len();
        let per: usize = match d {
            1 => 8,
            2 => 4,
            _ => 3,
        };
        let point = |unit: &[f64]| -> Vec<f64> {
            let mut v = base.to_vec();
            for (k, &i) in dims.iter().enumerate() {
                let (l, u) = bx[i];
                v[i] = l + (u - l) * unit[k];
            }
            v
        };
        let mut low = f64::NEG_INFINITY;
        let mut best = Seen::NONE;
        // Scores one cell centre; returns early on a witness.
        let mut score = |eng: &mut Self, c: &[f64]| -> Result<Result<(f64, Seen), (Partial, Vec<f64>)>, Abort> {
            let v = point(c);
            let val = eng.path_value(steps, 0, &v)?;
            low = low.max(val.low);
            best = best.max(val.seen);
            if val.low > 0.0 {
                if let Some(w) = val.witness {
                    return Ok(Err((w, v)));
                }
            }
            // Far below the threshold the clipped bound says little; the
            // observed margin, with the clip level as slack, is tighter.
            let up = if val.unknown {
                sanitize_up(val.up.max(-delta / 2.0))
            } else if val.seen.margin.is_finite() {
                sanitize_up(val.up).min(val.seen.margin + CLIP * delta)
            } else {
                sanitize_up(val.up)
            };
            Ok(Ok((up, val.seen)))
        };
        let sat = |w: Partial, v: Vec<f64>, low: f64| {
            let seen = Seen { depth: steps.len() as u32, margin: low };
            (Value { low, seen, up: f64::INFINITY, unknown: false, witness: Some(w) }, Some(v))
        };
        // Observed margins are unclipped, so a rise hidden under clipped
        // bounds still shows up here.
        let secant = |a: Seen, b: Seen, dist: f64| -> f64 {
            if a.depth != b.depth || !a.margin.is_finite() || !b.margin.is_finite() {
                0.0
            } else {
                (a.margin - b.margin).abs() / dist
            }
        };

        struct Cell {
            lo: Vec<f64>,
            hi: Vec<f64>,
            f: f64,
            g: Seen,
            depth: u32,
        }
        let centre = |c: &Cell| -> Vec<f64> { c.lo.iter().zip(&c.hi).map(|(a, b)| 0.5 * (a + b)).collect() };
        let radius = |c: &Cell| -> f64 { 0.5 * c.lo.iter().zip(&c.hi).map(|(a, b)| (b - a) * (b - a)).sum::<f64>().sqrt() };
        let dist = |a: &[f64], b: &[f64]| -> f64 { a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt() };

        let mut cells: Vec<Cell> = Vec::new();
        let mut centres: Vec<Vec<f64>> = Vec::new();
        let total = per.pow(d as u32);
        for idx in 0..total {
            let mut lo = vec![0.0; d];
            let mut hi = vec![0.0; d];
            let mut rem = idx;
            for k in (0..d).rev() {
                let j = rem % per;
                rem /= per;
                lo[k] = j as f64 / per as f64;
                hi[k] = (j + 1) as f64 / per as f64;
            }
            let mut cell = Cell { lo, hi, f: 0.0, g: Seen::NONE, depth: 0 };
            let c = centre(&cell);
            match score(self, &c)? {
                Err((w, v)) => return Ok(sat(w, v, low)),
                Ok((f, g)) => (cell.f, cell.g) = (f, g),
            }
            centres.push(c);
            cells.push(cell);
        }
        let mut slope: f64 = 0.0;
        for i in 0..cells.len() {
            for j in i + 1..cells.len() {
                slope = slope.max(secant(cells[i].g, cells[j].g, dist(&centres[i], &centres[j])));
            }
        }
        let bound = |c: &Cell, slope: f64| -> f64 {
            let r = radius(c);
            if slope.is_finite() {
                c.f + KAPPA * slope * r
            } else {
                f64::INFINITY
            }
        };
        let min_width = 0.5f64.powi(self.cfg.max_depth as i32);
        let mut up = f64::NEG_INFINITY;
        let mut unknown = false;
        loop {
            // Bounds grow with the slope estimate, so rescore everything
            // before each pick.
            let Some((best, b)) = cells
                .iter()
                .enumerate()
                .map(|(i, c)| (i, bound(c, slope)))
                .max_by(|x, y| x.1.total_cmp(&y.1).then_with(|| y.0.cmp(&x.0)))
            else {
                break;
            };
            if b <= -delta {
                up = up.max(b);
                break;
            }
            let cell = cells.swap_remove(best);
            let width = cell.lo.iter().zip(&cell.hi).map(|(a, b)| b - a).fold(0.0, f64::max);
            let stalled = b <= 0.0 && cell.f > -delta && b - cell.f < delta / 4.0;
            if stalled || width <= min_width || cell.depth >= self.cfg.max_depth * d as u32 {
                up = up.max(b);
                unknown = true;
                continue;
            }
            let axis = (0..d)
                .max_by(|&i, &j| (cell.hi[i] - cell.lo[i]).total_cmp(&(cell.hi[j] - cell.lo[j])).then(j.cmp(&i)))
                .expect("at least one free coordinate");
            let mid = 0.5 * (cell.lo[axis] + cell.hi[axis]);
            let parent = centre(&cell);
            for half in 0..2 {
                let mut lo = cell.lo.clone();
                let mut hi = cell.hi.clone();
                if half == 0 {
                    hi[axis] = mid;
                } else {
                    lo[axis] = mid;
                }
                let mut child = Cell { lo, hi, f: 0.0, g: Seen::NONE, depth: cell.depth + 1 };
                let c = centre(&child);
                match score(self, &c)? {
                    Err((w, v)) => return Ok(sat(w, v, low)),
                    Ok((f, g)) => (child.f, child.g) = (f, g),
                }
                slope = slope.max(secant(child.g, cell.g, dist(&c, &parent)));
                cells.push(child);
            }
        }
        Ok((Value { low, seen: best, up, unknown, witness: None }, None))
    }
}

fn broken() -> Value {
    Value { low: f64::NEG_INFINITY, seen: Seen::NONE, up: f64::INFINITY, unknown: true, witness: None }
}

/// Re-simulates a candidate and checks every guard strictly. Returns the
/// boundary valuations on success.
pub fn replay_witness(
    integ: &Integrator<'_>,
    steps: &[PathStep],
    start_step: usize,
    start: &[f64],
    times: &[Option<f64>],
) -> Option<Vec<Vec<f64>>> {
    let h = integ.automaton();
    if times.len() != steps.len() {
        return None;
    }
    let mut v = start.to_vec();
    let mut out = vec![v.clone()];
    for (i, (s, t)) in steps.iter().zip(times).enumerate() {
        let k0 = (start_step + i) as f64;
        v = match (*s, *t) {
            (PathStep::Stay(q), None) => integ.flow_from(q, &v, k0, 1.0).ok()?,
            (PathStep::Jump(tid), Some(t)) if t > 0.0 && t < 1.0 => {
                let tr = h.transition(tid);
                let x = integ.flow_from(tr.source, &v, k0, t).ok()?;
                if !tr.guard.holds(&x, k0 + t).ok()? {
                    return None;
                }
                integ.flow_from(tr.target, &x, k0 + t, 1.0 - t).ok()?
            }
            _ => return None,
        };
        out.push(v.clone());
    }
    Some(out)
}

/// Node count of the guards and right-hand sides a path condition mentions.
pub fn formula_length(h: &HybridAutomaton, steps: &[PathStep]) -> usize {
    let flow_len = |q: ModeId| h.modes[q.0].flow.iter().map(|e| e.length().0).sum::<usize>();
    steps
        .iter()
        .map(|s| match *s {
            PathStep::Stay(q) => flow_len(q),
            PathStep::Jump(t) => {
                let tr = h.transition(t);
                tr.guard.length().0 + flow_len(tr.source) + flow_len(tr.target)
            }
        })
        .sum()
}

fn describe_path(h: &HybridAutomaton, steps: &[PathStep]) -> Vec<String> {
    steps
        .iter()
        .map(|s| match *s {
            PathStep::Stay(q) => format!("stay:{}", h.mode_name(q)),
            PathStep::Jump(t) => {
                let tr = h.transition(t);
                format!("{}->{}", h.mode_name(tr.source), h.mode_name(tr.target))
            }
        })
        .collect()
}

impl<'i, 'a> Solver<'i, 'a> {
    pub fn new(integ: &'i Integrator<'a>, cfg: SolverConfig) -> Result<Self, SolveError> {
        if !(cfg.precision > 0.0) || cfg.max_depth < 10 || cfg.max_path_len == 0 {
            return Err(SolveError::BadConfig);
        }
        Ok(Solver { integ, cfg, cache: InfCache::default(), audit: Vec::new(), stats: SolverStats::default() })
    }

    pub fn config(&self) -> &SolverConfig {
        &self.cfg
    }

    pub fn integrator(&self) -> &'i Integrator<'a> {
        self.integ
    }

    fn check_path(&self, steps: &[PathStep], first_mode: ModeId) -> Result<(), SolveError> {
        let h = self.integ.automaton();
        if steps.is_empty() {
            return Err(SolveError::EmptyPath);
        }
        if steps.len() > self.cfg.max_path_len {
            return Err(SolveError::TooLong { len: steps.len(), max: self.cfg.max_path_len });
        }
        let mut at = first_mode;
        for (i, s) in steps.iter().enumerate() {
            if s.source(h) != at {
                return Err(SolveError::Disconnected(i));
            }
            at = s.target(h);
        }
        Ok(())
    }

    fn engine(&self) -> Engine<'i, 'a> {
        Engine { integ: self.integ, cfg: self.cfg, deadline: Instant::now() + self.cfg.budget, evaluations: 0 }
    }

    fn record(
        &mut self,
        kind: QueryKind,
        steps: &[PathStep],
        start_step: usize,
        result: &SatResult,
        evaluations: u64,
        cached: bool,
        began: Instant,
    ) {
        let h = self.integ.automaton();
        self.stats.queries += 1;
        self.stats.evaluations += evaluations;
        if cached {
            self.stats.cache_hits += 1;
        }
        match result {
            SatResult::Sat(_) => self.stats.sat += 1,
            SatResult::Unsat => self.stats.unsat += 1,
            SatResult::Unknown(_) => self.stats.unknown += 1,
        }
        self.audit.push(AuditEntry {
            kind,
            path: describe_path(h, steps),
            start_step,
            result: result.label().to_string(),
            formula_length: formula_length(h, steps),
            evaluations,
            cached,
            elapsed_ms: began.elapsed().as_secs_f64() * 1e3,
        });
    }

    fn finish(
        &self,
        steps: &[PathStep],
        start_step: usize,
        outcome: Result<(Value, Option<Vec<f64>>), Abort>,
    ) -> SatResult {
        match outcome {
            Err(Abort::Budget) => SatResult::Unknown("time budget exhausted".into()),
            Err(Abort::Evaluations) => SatResult::Unknown("evaluation budget exhausted".into()),
            Ok((val, start)) => match (val.witness, start) {
                (Some(w), Some(start)) => match replay_witness(self.integ, steps, start_step, &start, &w.times) {
                    Some(states) => SatResult::Sat(Witness { start, times: w.times, states, window: None }),
                    None => SatResult::Unknown("candidate witness failed re-simulation".into()),
                },
                _ if val.unknown => SatResult::Unknown(format!(
                    "ambiguous region at depth limit (best robustness {:.3e})",
                    val.low
                )),
                _ if val.up <= -self.cfg.precision => SatResult::Unsat,
                _ => SatResult::Unknown(format!("unresolved bound {:.3e}", val.up)),
            },
        }
    }

    fn in_box(&self, v: &[f64]) -> bool {
        let b = &self.integ.automaton().initial_box;
        v.len() == b.len() && v.iter().zip(b).all(|(x, &(l, u))| l <= *x && *x <= u)
    }

    fn path_from(&mut self, kind: QueryKind, v: &[f64], steps: &[PathStep], start_step: usize, mode: ModeId) -> Result<SatResult, SolveError> {
        self.check_path(steps, mode)?;
        if v.len() != self.integ.automaton().dim() {
            return Err(SolveError::Dimension);
        }
        let began = Instant::now();
        let at_root = start_step == 0 && mode == self.integ.automaton().initial_mode && self.in_box(v);
        if at_root && self.cache.covers(steps) {
            let r = SatResult::Unsat;
            self.record(kind, steps, start_step, &r, 0, true, began);
            return Ok(r);
        }
        let mut eng = self.engine();
        let outcome = eng.path_value(steps, start_step, v).map(|val| {
            let start = val.witness.as_ref().map(|_| v.to_vec());
            (val, start)
        });
        let mut r = self.finish(steps, start_step, outcome);
        if let (SatResult::Sat(w), [PathStep::Jump(tid)]) = (&mut r, steps) {
            let tr = self.integ.automaton().transition(*tid);
            if let Ok(traj) = self.integ.trajectory(tr.source, v, start_step as f64) {
                if let Ok(mut win) = grid_windows(&traj, &tr.guard) {
                    win.source = WindowSource::Solver;
                    w.window = Some(win);
                }
            }
        }
        self.record(kind, steps, start_step, &r, eng.evaluations, false, began);
        Ok(r)
    }

    /// Can `trans` fire during the unit that starts in state `s` at trace
    /// step `step_index`?
    pub fn solve_one_step(&mut self, s: &ConcreteState, step_index: usize, trans: TransitionId) -> Result<SatResult, SolveError> {
        self.path_from(QueryKind::OneStep, &s.valuation, &[PathStep::Jump(trans)], step_index, s.mode)
    }

    /// Feasibility of `steps` from a fixed valuation in the path's first
    /// mode at trace step `start_step`.
    pub fn solve_path_from(&mut self, v: &[f64], steps: &[PathStep], start_step: usize) -> Result<SatResult, SolveError> {
        let first = steps.first().ok_or(SolveError::EmptyPath)?.source(self.integ.automaton());
        self.path_from(QueryKind::PathFrom, v, steps, start_step, first)
    }

    /// Feasibility of `steps` from some point of `bx`, starting at trace
    /// step zero in the initial mode. Infeasible paths are cached.
    pub fn solve_path_any(&mut self, steps: &[PathStep], bx: &[(f64, f64)]) -> Result<SatResult, SolveError> {
        let h = self.integ.automaton();
        self.check_path(steps, h.initial_mode)?;
        if bx.len() != h.dim() {
            return Err(SolveError::Dimension);
        }
        let began = Instant::now();
        let whole_box = bx == h.initial_box.as_slice();
        if self.cache.covers(steps) && bx.iter().zip(&h.initial_box).all(|(a, b)| b.0 <= a.0 && a.1 <= b.1) {
            let r = SatResult::Unsat;
            self.record(QueryKind::PathAny, steps, 0, &r, 0, true, began);
            return Ok(r);
        }
        let dims: Vec<usize> = (0..bx.len()).filter(|&i| bx[i].0 < bx[i].1).collect();
        let v: Vec<f64> = bx.iter().map(|b| b.0).collect();
        let mut eng = self.engine();
        let outcome = eng.box_value(steps, bx, &dims, &v);
        let r = self.finish(steps, 0, outcome);
        if r == SatResult::Unsat && whole_box {
            self.cache.insert(steps.to_vec());
        }
        self.record(QueryKind::PathAny, steps, 0, &r, eng.evaluations, false, began);
        Ok(r)
    }

    /// Looks for a run that agrees with `run` up to some step and then takes
    /// `trans` at step `k`. Path conditions grow backwards from `trans`,
    /// each first tried from the run's own state at the earlier step. At the
    /// first step the path is also tried from the whole initial box, which
    /// can prove it infeasible.
    pub fn backtrack_solve(&mut self, run: &Trace, k: usize, trans: TransitionId) -> Result<Backtrack, SolveError> {
        let h = self.integ.automaton();
        if k >= run.states.len() || h.transition(trans).source != run.states[k].mode {
            return Err(SolveError::Disconnected(0));
        }
        let mut path = vec![PathStep::Jump(trans)];
        let mut i = k;
        let mut unknown: Option<String> = None;
        loop {
            match self.solve_path_from(&run.states[i].valuation, &path, i)? {
                SatResult::Sat(w) => return Ok(Backtrack::Found(splice(h, run, i, &path, &w))),
                SatResult::Unknown(why) => unknown = Some(why),
                SatResult::Unsat => {}
            }
            if i == 0 {
                let bx = h.initial_box.clone();
                return Ok(match self.solve_path_any(&path, &bx)? {
                    SatResult::Sat(w) => Backtrack::Found(splice(h, run, 0, &path, &w)),
                    SatResult::Unsat => Backtrack::Infeasible,
                    SatResult::Unknown(why) => Backtrack::Unknown(why),
                });
            }
            if path.len() >= self.cfg.max_path_len {
                return Ok(Backtrack::Unknown(
                    unknown.unwrap_or_else(|| "path length limit reached before the first step".into()),
                ));
            }
            i -= 1;
            path.insert(0, PathStep::from_jump(h, run.states[i].mode, &run.jumps[i]));
        }
    }
}

/// The run's first `i` steps followed by the witness for `path`.
pub fn splice(h: &HybridAutomaton, run: &Trace, i: usize, path: &[PathStep], w: &Witness) -> Trace {
    let mut states: Vec<ConcreteState> = run.states[..i].to_vec();
    let mut jumps: Vec<Jump> = run.jumps[..i].to_vec();
    let mut mode = path[0].source(h);
    states.push(ConcreteState { mode, valuation: w.start.clone() });
    for (s, (t, v)) in path.iter().zip(w.times.iter().zip(&w.states[1..])) {
        jumps.push(match (*s, *t) {
            (PathStep::Jump(tid), Some(time)) => Jump::Fire { transition: tid, time },
            _ => Jump::Stay,
        });
        mode = s.target(h);
        states.push(ConcreteState { mode, valuation: v.clone() });
    }
    Trace { states, jumps }
}
