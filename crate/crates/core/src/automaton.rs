//! Hybrid automaton model, validation, and graph pre-analysis.

use std::collections::{BTreeSet, HashSet, VecDeque};
use std::fmt;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{parse_expr, parse_guard, Expr, Guard, ParseError, Scope};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ModeId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TransitionId(pub usize);

#[derive(Debug, Clone)]
pub struct Mode {
    pub name: String,
    /// One right-hand side per state variable.
    pub flow: Vec<Expr>,
}

#[derive(Debug, Clone)]
pub struct Transition {
    pub source: ModeId,
    pub guard: Guard,
    pub target: ModeId,
}

#[derive(Debug, Clone)]
pub struct HybridAutomaton {
    pub name: String,
    pub variables: Vec<String>,
    pub modes: Vec<Mode>,
    pub initial_mode: ModeId,
    pub initial_box: Vec<(f64, f64)>,
    pub transitions: Vec<Transition>,
    pub negative: BTreeSet<ModeId>,
}

/// A located validation or loading problem.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub location: String,
    pub message: String,
}

impl Diagnostic {
    pub fn new(location: impl Into<String>, message: impl Into<String>) -> Diagnostic {
        Diagnostic { location: location.into(), message: message.into() }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.location, self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("unknown mode {0:?}")]
    UnknownMode(ModeId),
    #[error("unknown mode `{0}`")]
    UnknownModeName(String),
    #[error("invalid model:\n{}", render(.0))]
    Invalid(Vec<Diagnostic>),
}

fn render(diags: &[Diagnostic]) -> String {
    diags.iter().map(|d| format!("  {d}")).collect::<Vec<_>>().join("\n")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcreteState {
    pub mode: ModeId,
    pub valuation: Vec<f64>,
}

/// What happened during one unit step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Jump {
    Stay,
    Fire { transition: TransitionId, time: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub states: Vec<ConcreteState>,
    pub jumps: Vec<Jump>,
}

impl Trace {
    pub fn modes(&self) -> impl Iterator<Item = ModeId> + '_ {
        self.states.iter().map(|s| s.mode)
    }

    pub fn steps(&self) -> usize {
        self.jumps.len()
    }
}

impl HybridAutomaton {
    pub fn dim(&self) -> usize {
        self.variables.len()
    }

    pub fn mode(&self, q: ModeId) -> Result<&Mode, ModelError> {
        self.modes.get(q.0).ok_or(ModelError::UnknownMode(q))
    }

    pub fn mode_name(&self, q: ModeId) -> &str {
        self.modes.get(q.0).map(|m| m.name.as_str()).unwrap_or("<unknown>")
    }

    pub fn mode_id(&self, name: &str) -> Result<ModeId, ModelError> {
        self.modes
            .iter()
            .position(|m| m.name == name)
            .map(ModeId)
            .ok_or_else(|| ModelError::UnknownModeName(name.to_string()))
    }

    pub fn transition(&self, id: TransitionId) -> &Transition {
        &self.transitions[id.0]
    }

    /// Transitions leaving `q`, in declaration order.
    pub fn outgoing(&self, q: ModeId) -> Result<Vec<TransitionId>, ModelError> {
        self.mode(q)?;
        Ok(self
            .transitions
            .iter()
            .enumerate()
            .filter(|(_, t)| t.source == q)
            .map(|(i, _)| TransitionId(i))
            .collect())
    }

    /// Distinct one-step targets of `q`, in order of first declaration.
    pub fn successor_modes(&self, q: ModeId) -> Result<Vec<ModeId>, ModelError> {
        let mut seen = Vec::new();
        for id in self.outgoing(q)? {
            let target = self.transitions[id.0].target;
            if !seen.contains(&target) {
                seen.push(target);
            }
        }
        Ok(seen)
    }

    pub fn is_negative(&self, q: ModeId) -> bool {
        self.negative.contains(&q)
    }

    /// Modes with a path of length zero or more to a negative mode.
    pub fn backward_reachable_modes(&self) -> BTreeSet<ModeId> {
        let mut reverse: Vec<Vec<ModeId>> = vec![Vec::new(); self.modes.len()];
        for t in &self.transitions {
            if t.target.0 < reverse.len() && t.source.0 < reverse.len() {
                reverse[t.target.0].push(t.source);
            }
        }
        let mut seen: BTreeSet<ModeId> = BTreeSet::new();
        let mut queue: VecDeque<ModeId> = VecDeque::new();
        for &q in &self.negative {
            if q.0 < self.modes.len() && seen.insert(q) {
                queue.push_back(q);
            }
        }
        while let Some(q) = queue.pop_front() {
            for &p in &reverse[q.0] {
                if seen.insert(p) {
                    queue.push_back(p);
                }
            }
        }
        seen
    }

    pub fn validate(&self) -> Vec<Diagnostic> {
        let mut out = Vec::new();
        let n = self.dim();
        let modes = self.modes.len();
        if n == 0 {
            out.push(Diagnostic::new("variables", "at least one state variable is required"));
        }
        let mut names = HashSet::new();
        for (i, v) in self.variables.iter().enumerate() {
            if !names.insert(v.as_str()) {
                out.push(Diagnostic::new(format!("variables[{i}]"), format!("duplicate variable `{v}`")));
            }
            if v == "t" {
                out.push(Diagnostic::new(format!("variables[{i}]"), "`t` is reserved for time"));
            }
        }
        if modes == 0 {
            out.push(Diagnostic::new("modes", "at least one mode is required"));
        }
        let mut mode_names = HashSet::new();
        for m in &self.modes {
            let loc = format!("modes.{}", m.name);
            if !mode_names.insert(m.name.as_str()) {
                out.push(Diagnostic::new(&loc, "duplicate mode name"));
            }
            if m.flow.len() != n {
                out.push(Diagnostic::new(
                    &loc,
                    format!("expected {n} right-hand sides, found {}", m.flow.len()),
                ));
            }
            for (j, e) in m.flow.iter().enumerate() {
                if e.max_var_index().is_some_and(|k| k >= n) {
                    out.push(Diagnostic::new(format!("{loc}[{j}]"), "references an undeclared variable"));
                }
            }
        }
        if self.initial_mode.0 >= modes {
            out.push(Diagnostic::new("initial_mode", "initial mode is not declared"));
        }
        if self.initial_box.len() != n {
            out.push(Diagnostic::new(
                "initial_box",
                format!("expected {n} intervals, found {}", self.initial_box.len()),
            ));
        }
        for (i, &(l, u)) in self.initial_box.iter().enumerate() {
            let var = self.variables.get(i).map(String::as_str).unwrap_or("?");
            let loc = format!("initial_box.{var}");
            if !l.is_finite() || !u.is_finite() {
                out.push(Diagnostic::new(&loc, "bounds must be finite"));
            } else if l > u {
                out.push(Diagnostic::new(&loc, format!("lower bound {l} exceeds upper bound {u}")));
            }
        }
        for (i, t) in self.transitions.iter().enumerate() {
            let loc = format!("transitions[{i}]");
            if t.source.0 >= modes {
                out.push(Diagnostic::new(&loc, "source mode is not declared"));
            }
            if t.target.0 >= modes {
                out.push(Diagnostic::new(&loc, "target mode is not declared"));
            }
            if t.guard.max_var_index().is_some_and(|k| k >= n) {
                out.push(Diagnostic::new(&loc, "guard references an undeclared variable"));
            }
        }
        for q in &self.negative {
            if q.0 >= modes {
                out.push(Diagnostic::new("negative", format!("mode {} is not declared", q.0)));
            }
        }
        out
    }

    pub fn validated(self) -> Result<HybridAutomaton, ModelError> {
        let diags = self.validate();
        if diags.is_empty() {
            Ok(self)
        } else {
            Err(ModelError::Invalid(diags))
        }
    }
}

/// Assembles an automaton from source strings, collecting every problem as
/// a located diagnostic.
#[derive(Debug, Clone, Default)]
pub struct AutomatonBuilder {
    name: String,
    variables: Vec<String>,
    params: IndexMap<String, f64>,
    modes: Vec<(String, Vec<String>)>,
    transitions: Vec<(String, String, String)>,
    initial_mode: String,
    initial_box: Vec<(f64, f64)>,
    negative: Vec<String>,
}

impl AutomatonBuilder {
    pub fn new<S: AsRef<str>>(name: &str, variables: &[S]) -> Self {
        AutomatonBuilder {
            name: name.to_string(),
            variables: variables.iter().map(|v| v.as_ref().to_string()).collect(),
            ..Default::default()
        }
    }

    pub fn param(mut self, name: &str, value: f64) -> Self {
        self.params.insert(name.to_string(), value);
        self
    }

    pub fn mode<S: AsRef<str>>(mut self, name: &str, flow: &[S]) -> Self {
        self.modes.push((name.to_string(), flow.iter().map(|s| s.as_ref().to_string()).collect()));
        self
    }

    pub fn transition(mut self, source: &str, guard: &str, target: &str) -> Self {
        self.transitions.push((source.to_string(), guard.to_string(), target.to_string()));
        self
    }

    pub fn initial(mut self, mode: &str, bounds: &[(f64, f64)]) -> Self {
        self.initial_mode = mode.to_string();
        self.initial_box = bounds.to_vec();
        self
    }

    pub fn negative<S: AsRef<str>>(mut self, modes: &[S]) -> Self {
        self.negative = modes.iter().map(|s| s.as_ref().to_string()).collect();
        self
    }

    pub fn build(self) -> Result<HybridAutomaton, ModelError> {
        let scope = Scope::new(&self.variables).with_params(self.params.clone());
        let mut diags = Vec::new();
        for (name, _) in &self.params {
            if self.variables.contains(name) || name == "t" {
                diags.push(Diagnostic::new(
                    format!("parameters.{name}"),
                    "parameter name clashes with a variable or `t`",
                ));
            }
        }
        let lookup = |name: &str| self.modes.iter().position(|(m, _)| m == name).map(ModeId);
        let mut modes = Vec::new();
        for (name, flow) in &self.modes {
            let mut exprs = Vec::new();
            for (j, text) in flow.iter().enumerate() {
                match parse_expr(text, &scope) {
                    Ok(e) => exprs.push(e),
                    Err(e) => diags.push(Diagnostic::new(format!("modes.{name}[{j}]"), describe_parse(&e, text))),
                }
            }
            modes.push(Mode { name: name.clone(), flow: exprs });
        }
        let mut transitions = Vec::new();
        for (i, (src, guard, dst)) in self.transitions.iter().enumerate() {
            let loc = format!("transitions[{i}]");
            let source = lookup(src);
            let target = lookup(dst);
            if source.is_none() {
                diags.push(Diagnostic::new(format!("{loc}.source"), format!("undeclared mode `{src}`")));
            }
            if target.is_none() {
                diags.push(Diagnostic::new(format!("{loc}.target"), format!("undeclared mode `{dst}`")));
            }
            let parsed = match parse_guard(guard, &scope) {
                Ok(g) => Some(g),
                Err(e) => {
                    diags.push(Diagnostic::new(format!("{loc}.guard"), describe_parse(&e, guard)));
                    None
                }
            };
            if let (Some(source), Some(target), Some(guard)) = (source, target, parsed) {
                transitions.push(Transition { source, guard, target });
            }
        }
        let initial_mode = match lookup(&self.initial_mode) {
            Some(q) => q,
            None => {
                diags.push(Diagnostic::new(
                    "initial_mode",
                    format!("undeclared mode `{}`", self.initial_mode),
                ));
                ModeId(usize::MAX)
            }
        };
        let mut negative = BTreeSet::new();
        for (i, name) in self.negative.iter().enumerate() {
            match lookup(name) {
                Some(q) => {
                    negative.insert(q);
                }
                None => diags.push(Diagnostic::new(format!("negative[{i}]"), format!("undeclared mode `{name}`"))),
            }
        }
        let h = HybridAutomaton {
            name: self.name,
            variables: self.variables,
            modes,
            initial_mode,
            initial_box: self.initial_box,
            transitions,
            negative,
        };
        if !diags.is_empty() {
            // Report structural problems too, minus the ones already covered
            // by name resolution.
            for d in h.validate() {
                if d.location != "initial_mode" && !d.message.contains("right-hand sides") {
                    diags.push(d);
                }
            }
            return Err(ModelError::Invalid(diags));
        }
        h.validated()
    }
}

fn describe_parse(e: &ParseError, text: &str) -> String {
    format!("{e} in `{text}`")
}
