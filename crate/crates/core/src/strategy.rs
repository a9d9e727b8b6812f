//! The concolic controller. Keeps a cost model for random traces and solver
//! calls, picks the cheapest way to reach an unvisited child of the explored
//! tree, and turns solver witnesses back into full traces.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::automaton::{HybridAutomaton, Jump, ModeId, Trace, TransitionId};
use crate::exploretree::{estimate_q, Discovery, ExploreTree, NodeId, NodeSummary, TreeError};
use crate::inference::{confidence_report, ConfidenceReport, ConfidenceVerdict, Effectiveness, InferenceError, SampleTally};
use crate::ode::{Integrator, IntegratorConfig, OdeError};
use crate::sampler::{extend_trace, is_counterexample, sample_trace, trace_rng, SampleError, SamplerConfig};
use crate::solver::{
    formula_length, splice, AuditEntry, Backtrack, PathStep, SatResult, SolveError, Solver, SolverConfig,
};

/// Stream used for particle picks, disjoint from trace and reservoir
/// streams.
const PICK_STREAM: u64 = 1 << 61;
/// Most transition sequences tried for one mode path in a global query.
const MAX_COMBINATIONS: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyMode {
    Random,
    Local,
    Global,
    Dynamic,
}

impl StrategyMode {
    pub const ALL: [StrategyMode; 4] = [StrategyMode::Random, StrategyMode::Local, StrategyMode::Global, StrategyMode::Dynamic];

    pub fn as_str(self) -> &'static str {
        match self {
            StrategyMode::Random => "random",
            StrategyMode::Local => "local",
            StrategyMode::Global => "global",
            StrategyMode::Dynamic => "dynamic",
        }
    }
}

impl fmt::Display for StrategyMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for StrategyMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        StrategyMode::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| format!("unknown strategy `{s}` (expected random, local, global or dynamic)"))
    }
}

/// What `l` means in the solver cost curve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LengthMetric {
    /// Number of unit steps in the query.
    Steps,
    /// Node count of the guards and right-hand sides in the query.
    NodeCount,
}

/// How the cost of a random trace is measured.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Clock {
    /// Integration steps times a fixed price. Reproducible across machines.
    Nominal { seconds_per_step: f64 },
    Wall,
}

impl Default for Clock {
    fn default() -> Self {
        Clock::Nominal { seconds_per_step: 2e-6 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostModel {
    /// Seconds per random trace; unset until the first observation.
    pub c_t: Option<f64>,
    pub slope: f64,
    pub offset: f64,
    /// EWMA weight of a new observation.
    pub weight: f64,
}

impl Default for CostModel {
    fn default() -> Self {
        CostModel { c_t: None, slope: 1.73, offset: 1.65, weight: 0.2 }
    }
}

impl CostModel {
    /// Seconds for a solver query of length `l`.
    pub fn c_s(&self, l: f64) -> f64 {
        ((self.slope * l - self.offset).exp() - 1.0).max(1e-6)
    }

    pub fn update(&mut self, observation: f64) {
        let obs = observation.max(1e-12);
        self.c_t = Some(match self.c_t {
            None => obs,
            Some(c) => (1.0 - self.weight) * c + self.weight * obs,
        });
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StrategyConfig {
    pub mode: StrategyMode,
    pub timeout: Duration,
    /// Random traces per decision.
    pub batch: usize,
    /// Total trace budget, random and solver-produced.
    pub max_traces: u64,
    pub length_metric: LengthMetric,
    pub clock: Clock,
    pub cost: CostModel,
    /// Error-probability tolerance of the confidence report.
    pub delta: f64,
    pub confidence_target: f64,
    /// Worker cap for random batches; `None` uses every core.
    pub jobs: Option<usize>,
    /// Failed local queries at one frontier pair before it is retired.
    pub local_attempts: u32,
}

impl Default for StrategyConfig {
    fn default() -> Self {
        StrategyConfig {
            mode: StrategyMode::Local,
            timeout: Duration::from_secs(60),
            batch: 16,
            max_traces: 2000,
            length_metric: LengthMetric::Steps,
            clock: Clock::default(),
            cost: CostModel::default(),
            delta: 0.01,
            confidence_target: 0.99,
            jobs: None,
            local_attempts: 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub integrator: IntegratorConfig,
    pub sampler: SamplerConfig,
    pub solver: SolverConfig,
    pub strategy: StrategyConfig,
}

impl RunConfig {
    pub fn new(seed: u64, mode: StrategyMode) -> RunConfig {
        RunConfig {
            integrator: IntegratorConfig::default(),
            sampler: SamplerConfig { seed, ..SamplerConfig::default() },
            solver: SolverConfig::default(),
            strategy: StrategyConfig { mode, ..StrategyConfig::default() },
        }
    }
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Ode(#[from] OdeError),
    #[error(transparent)]
    Sample(#[from] SampleError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error(transparent)]
    Inference(#[from] InferenceError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Action {
    RandomBatch,
    Symbolic { node: NodeId, target: ModeId },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Counterexample,
    Pass,
    TimeoutInconclusive,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tallies {
    pub traces: u64,
    pub random_traces: u64,
    pub solver_traces: u64,
    pub symbolic_actions: u64,
    pub solver_calls: u64,
    pub sat: u64,
    pub unsat: u64,
    pub unknown: u64,
    pub cache_hits: u64,
    pub retired_pairs: u64,
    pub integration_steps: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub total_seconds: f64,
    pub sampling_seconds: f64,
    pub solving_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub verdict: Verdict,
    pub reason: String,
    pub counterexample: Option<Trace>,
    /// Position of the counterexample in the run's trace stream.
    pub counterexample_index: Option<u64>,
    pub tallies: Tallies,
    /// Computed from random traces only, with effectiveness exponent 1.
    pub confidence: ConfidenceReport,
    pub tree: Vec<NodeSummary>,
    pub audit: Vec<AuditEntry>,
    /// Paths proven infeasible from the initial box.
    pub inf_cache: Vec<Vec<String>>,
    pub final_c_t: Option<f64>,
    pub timing: Timing,
}

/// Query length of a symbolic action under `metric`.
pub fn symbolic_length(
    h: &HybridAutomaton,
    tree: &ExploreTree,
    node: NodeId,
    target: ModeId,
    mode: StrategyMode,
    metric: LengthMetric,
) -> f64 {
    let path = &tree.node(node).path;
    let global = mode == StrategyMode::Global;
    match metric {
        LengthMetric::Steps => {
            if global {
                path.len() as f64
            } else {
                1.0
            }
        }
        LengthMetric::NodeCount => {
            let pair_len = |a: ModeId, b: ModeId| -> usize {
                let mut best: Option<usize> = None;
                for t in h.outgoing(a).unwrap_or_default() {
                    if h.transition(t).target == b {
                        let l = formula_length(h, &[PathStep::Jump(t)]);
                        best = Some(best.map_or(l, |x| x.min(l)));
                    }
                }
                if a == b {
                    let l = formula_length(h, &[PathStep::Stay(a)]);
                    best = Some(best.map_or(l, |x| x.min(l)));
                }
                best.unwrap_or(0)
            };
            let last = *path.last().expect("paths are nonempty");
            let mut l = pair_len(last, target);
            if global {
                l += path.windows(2).map(|w| pair_len(w[0], w[1])).sum::<usize>();
            }
            l as f64
        }
    }
}

/// The controller's decision rule: the frontier pair minimising
/// `min(c_t / E(q), c_s(l))`, sampled at random if the random cost is the
/// smaller one there. Ties go to the earlier pair in frontier order.
pub fn choose_action(
    h: &HybridAutomaton,
    tree: &ExploreTree,
    qbad: &BTreeSet<ModeId>,
    cost: &CostModel,
    cfg: &StrategyConfig,
) -> Action {
    let Some(c_t) = cost.c_t else {
        return Action::RandomBatch;
    };
    let mut best: Option<(f64, f64, f64, NodeId, ModeId)> = None;
    for (node, target) in tree.frontier(h, qbad) {
        let n = tree.node(node);
        let random = c_t / estimate_q(n.m, n.n);
        let symbolic = cost.c_s(symbolic_length(h, tree, node, target, cfg.mode, cfg.length_metric));
        let score = random.min(symbolic);
        if best.is_none_or(|b| score < b.0) {
            best = Some((score, random, symbolic, node, target));
        }
    }
    match best {
        Some((_, random, symbolic, node, target)) if random >= symbolic => Action::Symbolic { node, target },
        _ => Action::RandomBatch,
    }
}

/// Receives every trace the run produces, in stream order.
pub type Observer<'o> = dyn FnMut(u64, &Trace, bool) + 'o;

struct Run<'i, 'a, 'o> {
    h: &'a HybridAutomaton,
    integ: &'i Integrator<'a>,
    cfg: RunConfig,
    tree: ExploreTree,
    qbad: BTreeSet<ModeId>,
    cost: CostModel,
    solver: Solver<'i, 'a>,
    store: Vec<Trace>,
    picks: ChaCha8Rng,
    tallies: Tallies,
    random_negative: u64,
    attempts: BTreeMap<(NodeId, ModeId), u32>,
    counterexample: Option<(u64, Trace)>,
    began: Instant,
    sampling: Duration,
    solving: Duration,
    pool: Option<rayon::ThreadPool>,
    observer: Option<&'o mut Observer<'o>>,
}

impl<'i, 'a, 'o> Run<'i, 'a, 'o> {
    fn next_id(&self) -> u64 {
        self.store.len() as u64
    }

    fn out_of_budget(&self) -> bool {
        self.tallies.traces >= self.cfg.strategy.max_traces || self.began.elapsed() >= self.cfg.strategy.timeout
    }

    /// Adds a trace to the stream. Jumps before `solved` came from the
    /// solver.
    fn admit(&mut self, tr: Trace, solved: usize) -> Result<(), RunError> {
        let id = self.next_id();
        let mark = |k: usize| if k < solved { Discovery::Solver } else { Discovery::Random };
        self.tree.record_trace_marked(self.h, &tr, id, mark)?;
        let negative = is_counterexample(self.h, &tr);
        self.tallies.traces += 1;
        if solved == 0 {
            self.tallies.random_traces += 1;
            self.random_negative += u64::from(negative);
        } else {
            self.tallies.solver_traces += 1;
        }
        if let Some(obs) = self.observer.as_mut() {
            obs(id, &tr, solved > 0);
        }
        if negative && self.counterexample.is_none() {
            self.counterexample = Some((id, tr.clone()));
        }
        self.store.push(tr);
        Ok(())
    }

    fn random_batch(&mut self, size: usize) -> Result<(), RunError> {
        let remaining = self.cfg.strategy.max_traces - self.tallies.traces;
        let count = (size as u64).min(remaining);
        if count == 0 {
            return Ok(());
        }
        let first = self.next_id();
        let started = Instant::now();
        let work = self.integ.work();
        let scfg = self.cfg.sampler;
        let integ = self.integ;
        let sample = || -> Vec<Result<Trace, SampleError>> {
            (first..first + count).into_par_iter().map(|i| sample_trace(integ, &scfg, i)).collect()
        };
        let traces = match &self.pool {
            Some(p) => p.install(sample),
            None => sample(),
        };
        let elapsed = started.elapsed();
        self.sampling += elapsed;
        let per_trace = match self.cfg.strategy.clock {
            Clock::Nominal { seconds_per_step } => (self.integ.work() - work) as f64 * seconds_per_step / count as f64,
            Clock::Wall => elapsed.as_secs_f64() / count as f64,
        };
        self.cost.update(per_trace);
        for tr in traces {
            self.admit(tr?, 0)?;
            if self.counterexample.is_some() {
                break;
            }
        }
        Ok(())
    }

    /// Extends a solver-produced prefix to full length and admits it.
    fn admit_solved(&mut self, prefix: Trace) -> Result<(), RunError> {
        let solved = prefix.jumps.len();
        let mut rng = trace_rng(self.cfg.sampler.seed, self.next_id());
        let full = if solved < self.cfg.sampler.steps {
            extend_trace(self.integ, prefix, &self.cfg.sampler, &mut rng)?
        } else {
            prefix
        };
        self.admit(full, solved)
    }

    fn retire(&mut self, node: NodeId, target: ModeId) {
        self.tree.retire(node, target);
        self.tallies.retired_pairs += 1;
    }

    fn transitions_between(&self, a: ModeId, b: ModeId) -> Vec<TransitionId> {
        self.h.outgoing(a).unwrap_or_default().into_iter().filter(|&t| self.h.transition(t).target == b).collect()
    }

    fn fail_attempt(&mut self, node: NodeId, target: ModeId) {
        let n = self.attempts.entry((node, target)).or_insert(0);
        *n += 1;
        if *n >= self.cfg.strategy.local_attempts {
            self.retire(node, target);
        }
    }

    /// One-step query from a particle of `node`, backtracking through the
    /// particle's own run when the step alone is infeasible.
    fn local(&mut self, node: NodeId, target: ModeId) -> Result<(), RunError> {
        let particles = self.tree.node(node).particles.items();
        if particles.is_empty() {
            self.retire(node, target);
            return Ok(());
        }
        let p = particles[self.picks.random_range(0..particles.len())].clone();
        let run = &self.store[p.trace as usize];
        let prefix = Trace { states: run.states[..=p.step].to_vec(), jumps: run.jumps[..p.step].to_vec() };
        let mut infeasible = true;
        for tid in self.transitions_between(self.tree.node(node).mode(), target) {
            match self.solver.backtrack_solve(&prefix, p.step, tid)? {
                Backtrack::Found(tr) => return self.admit_solved(tr),
                Backtrack::Infeasible => {}
                Backtrack::Unknown(_) => infeasible = false,
            }
        }
        if infeasible {
            self.retire(node, target);
        } else {
            self.fail_attempt(node, target);
        }
        Ok(())
    }

    /// Path query over the initial box for the node's mode path extended by
    /// `target`.
    fn global(&mut self, node: NodeId, target: ModeId) -> Result<(), RunError> {
        let mut modes = self.tree.node(node).path.clone();
        modes.push(target);
        if modes.len() - 1 > self.solver.config().max_path_len {
            self.retire(node, target);
            return Ok(());
        }
        let mut options: Vec<Vec<PathStep>> = Vec::new();
        for w in modes.windows(2) {
            let mut o: Vec<PathStep> = self.transitions_between(w[0], w[1]).into_iter().map(PathStep::Jump).collect();
            if w[0] == w[1] {
                o.push(PathStep::Stay(w[0]));
            }
            options.push(o);
        }
        let mut combos: Vec<Vec<PathStep>> = vec![Vec::new()];
        for o in &options {
            combos = combos
                .iter()
                .flat_map(|c| o.iter().map(move |s| c.iter().copied().chain([*s]).collect::<Vec<_>>()))
                .take(MAX_COMBINATIONS)
                .collect();
        }
        let bx = self.h.initial_box.clone();
        let mut infeasible = true;
        for path in combos {
            match self.solver.solve_path_any(&path, &bx)? {
                SatResult::Sat(w) => {
                    let empty = Trace { states: Vec::new(), jumps: Vec::new() };
                    let tr = splice(self.h, &empty, 0, &path, &w);
                    return self.admit_solved(tr);
                }
                SatResult::Unsat => {}
                SatResult::Unknown(_) => infeasible = false,
            }
        }
        if infeasible {
            self.retire(node, target);
        } else {
            self.fail_attempt(node, target);
        }
        Ok(())
    }

    fn symbolic(&mut self, node: NodeId, target: ModeId) -> Result<(), RunError> {
        let started = Instant::now();
        self.tallies.symbolic_actions += 1;
        let r = match self.cfg.strategy.mode {
            StrategyMode::Global => self.global(node, target),
            _ => self.local(node, target),
        };
        self.solving += started.elapsed();
        r
    }

    fn concolic_loop(&mut self) -> Result<(), RunError> {
        while self.counterexample.is_none() && !self.out_of_budget() {
            let action = if self.cfg.strategy.mode == StrategyMode::Random {
                Action::RandomBatch
            } else {
                choose_action(self.h, &self.tree, &self.qbad, &self.cost, &self.cfg.strategy)
            };
            match action {
                Action::RandomBatch => self.random_batch(self.cfg.strategy.batch)?,
                Action::Symbolic { node, target } => self.symbolic(node, target)?,
            }
        }
        Ok(())
    }

    /// Concolic-testing baseline: a random trace, then depth-first flips of
    /// its branches, deepest first, each solved from the initial box.
    fn dynamic_loop(&mut self) -> Result<(), RunError> {
        let mut stack: Vec<u64> = Vec::new();
        let mut tried: BTreeSet<Vec<PathStep>> = BTreeSet::new();
        let max_len = self.solver.config().max_path_len;
        let bx = self.h.initial_box.clone();
        while self.counterexample.is_none() && !self.out_of_budget() {
            let Some(&id) = stack.last() else {
                self.random_batch(1)?;
                stack.push(self.next_id() - 1);
                continue;
            };
            let tr = &self.store[id as usize];
            let steps: Vec<PathStep> =
                tr.jumps.iter().enumerate().map(|(k, j)| PathStep::from_jump(self.h, tr.states[k].mode, j)).collect();
            let mut flip = None;
            'search: for k in (0..tr.jumps.len()).rev() {
                if k + 1 > max_len {
                    continue;
                }
                let taken = match tr.jumps[k] {
                    Jump::Fire { transition, .. } => Some(transition),
                    Jump::Stay => None,
                };
                for alt in self.h.outgoing(tr.states[k].mode).unwrap_or_default() {
                    if Some(alt) == taken {
                        continue;
                    }
                    let mut path = steps[..k].to_vec();
                    path.push(PathStep::Jump(alt));
                    if !tried.contains(&path) {
                        flip = Some(path);
                        break 'search;
                    }
                }
            }
            let Some(path) = flip else {
                stack.pop();
                continue;
            };
            tried.insert(path.clone());
            let started = Instant::now();
            self.tallies.symbolic_actions += 1;
            let r = self.solver.solve_path_any(&path, &bx)?;
            self.solving += started.elapsed();
            if let SatResult::Sat(w) = r {
                let empty = Trace { states: Vec::new(), jumps: Vec::new() };
                self.admit_solved(splice(self.h, &empty, 0, &path, &w))?;
                stack.push(self.next_id() - 1);
            }
        }
        Ok(())
    }
}

pub fn run_concolic(h: &HybridAutomaton, cfg: &RunConfig) -> Result<RunReport, RunError> {
    run_concolic_observed(h, cfg, None)
}

pub fn run_concolic_observed<'o>(
    h: &HybridAutomaton,
    cfg: &RunConfig,
    observer: Option<&'o mut Observer<'o>>,
) -> Result<RunReport, RunError> {
    let s = &cfg.strategy;
    if s.timeout.is_zero() {
        return Err(RunError::Config("timeout must be positive".into()));
    }
    if s.batch == 0 {
        return Err(RunError::Config("batch size must be positive".into()));
    }
    if cfg.sampler.points == 0 || cfg.sampler.steps == 0 {
        return Err(SampleError::BadConfig.into());
    }
    let eff = Effectiveness::PLAIN;
    // Validate the confidence parameters before doing any work.
    confidence_report(SampleTally::default(), s.delta, eff, s.confidence_target)?;
    let integ = Integrator::new(h, cfg.integrator)?;
    let pool = match s.jobs {
        Some(n) => Some(
            rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build().map_err(|e| RunError::Config(e.to_string()))?,
        ),
        None => None,
    };
    let mut run = Run {
        h,
        integ: &integ,
        cfg: *cfg,
        tree: ExploreTree::new(h.initial_mode, cfg.sampler.steps, cfg.sampler.seed),
        qbad: h.backward_reachable_modes(),
        cost: s.cost,
        solver: Solver::new(&integ, cfg.solver)?,
        store: Vec::new(),
        picks: trace_rng(cfg.sampler.seed, PICK_STREAM),
        tallies: Tallies::default(),
        random_negative: 0,
        attempts: BTreeMap::new(),
        counterexample: None,
        began: Instant::now(),
        sampling: Duration::ZERO,
        solving: Duration::ZERO,
        pool,
        observer,
    };
    let pruned = !run.qbad.contains(&h.initial_mode);
    if !pruned {
        match s.mode {
            StrategyMode::Dynamic => run.dynamic_loop()?,
            _ => run.concolic_loop()?,
        }
    }
    let st = run.solver.stats;
    run.tallies.solver_calls = st.queries;
    run.tallies.sat = st.sat;
    run.tallies.unsat = st.unsat;
    run.tallies.unknown = st.unknown;
    run.tallies.cache_hits = st.cache_hits;
    run.tallies.integration_steps = integ.work();
    let tally = SampleTally::new(run.tallies.random_traces - run.random_negative, run.random_negative);
    let confidence = confidence_report(tally, s.delta, eff, s.confidence_target)?;
    let (verdict, reason) = if let Some((id, _)) = &run.counterexample {
        (Verdict::Counterexample, format!("trace {id} visits a negative mode"))
    } else if pruned {
        (Verdict::Pass, "no negative mode is reachable from the initial mode in the mode graph".to_string())
    } else if confidence.verdict == ConfidenceVerdict::Pass {
        (Verdict::Pass, format!("confidence {:.6} meets the target {}", confidence.confidence, s.confidence_target))
    } else {
        let why = if run.tallies.traces >= s.max_traces { "trace budget" } else { "timeout" };
        (
            Verdict::TimeoutInconclusive,
            format!("{why} reached with confidence {:.6} below the target {}", confidence.confidence, s.confidence_target),
        )
    };
    let inf_cache = run
        .solver
        .cache
        .entries()
        .map(|p| {
            p.iter()
                .map(|s| match *s {
                    PathStep::Stay(q) => format!("stay:{}", h.mode_name(q)),
                    PathStep::Jump(t) => {
                        let tr = h.transition(t);
                        format!("{}->{}", h.mode_name(tr.source), h.mode_name(tr.target))
                    }
                })
                .collect()
        })
        .collect();
    let (counterexample_index, counterexample) = match run.counterexample {
        Some((i, t)) => (Some(i), Some(t)),
        None => (None, None),
    };
    Ok(RunReport {
        verdict,
        reason,
        counterexample,
        counterexample_index,
        tallies: run.tallies,
        confidence,
        tree: run.tree.summary(h),
        audit: std::mem::take(&mut run.solver.audit),
        inf_cache,
        final_c_t: run.cost.c_t,
        timing: Timing {
            total_seconds: run.began.elapsed().as_secs_f64(),
            sampling_seconds: run.sampling.as_secs_f64(),
            solving_seconds: run.solving.as_secs_f64(),
        },
    })
}
