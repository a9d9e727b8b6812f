//! The sampled part of the mode-path tree. Each node is a sequence of modes
//! starting at the initial mode, with particles (concrete states reached
//! there) and the counters behind the discovery estimate.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::automaton::{HybridAutomaton, Jump, ModeId, Trace};
use crate::reservoir::Reservoir;
use crate::sampler::trace_rng;

pub const DEFAULT_PARTICLES: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NodeId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Discovery {
    Root,
    Random,
    Solver,
}

/// A concrete state reached at a node, with the trace that reached it.
#[derive(Debug, Clone, PartialEq)]
pub struct Particle {
    pub valuation: Vec<f64>,
    pub trace: u64,
    pub step: usize,
}

#[derive(Debug, Clone)]
pub struct ExploreNode {
    pub path: Vec<ModeId>,
    pub parent: Option<NodeId>,
    pub children: BTreeMap<ModeId, NodeId>,
    pub child_visits: BTreeMap<ModeId, u64>,
    /// Steps from here that went to an existing child.
    pub m: u64,
    /// Steps from here that created a child.
    pub n: u64,
    pub particles: Reservoir<Particle>,
    /// Targets the strategy gave up on.
    pub retired: BTreeSet<ModeId>,
    pub discovered_by: Discovery,
}

impl ExploreNode {
    pub fn mode(&self) -> ModeId {
        *self.path.last().expect("paths are nonempty")
    }

    pub fn attempts(&self) -> u64 {
        self.m + self.n
    }
}

/// Posterior mean of the probability that one more sample from a node
/// discovers a new child, under a uniform prior.
pub fn estimate_q(m: u64, n: u64) -> f64 {
    (n as f64 + 1.0) / (m as f64 + n as f64 + 2.0)
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TreeError {
    #[error("trace starts in mode {found:?}, tree root is {expected:?}")]
    WrongRoot { expected: ModeId, found: ModeId },
    #[error("trace has {0} steps, more than the tree bound")]
    TooLong(usize),
    #[error("step {0} of the trace is inconsistent with the model")]
    Inconsistent(usize),
    #[error("node has no recorded sampling attempts")]
    NoData,
}

#[derive(Debug, Clone)]
pub struct ExploreTree {
    nodes: Vec<ExploreNode>,
    max_steps: usize,
    capacity: usize,
    seed: u64,
}

/// Reservoir streams live far away from trace streams.
const RESERVOIR_STREAM_BASE: u64 = 1 << 62;

impl ExploreTree {
    pub fn new(root: ModeId, max_steps: usize, seed: u64) -> ExploreTree {
        Self::with_capacity(root, max_steps, seed, DEFAULT_PARTICLES)
    }

    pub fn with_capacity(root: ModeId, max_steps: usize, seed: u64, capacity: usize) -> ExploreTree {
        let mut tree = ExploreTree { nodes: Vec::new(), max_steps, capacity, seed };
        tree.push(vec![root], None, Discovery::Root);
        tree
    }

    fn push(&mut self, path: Vec<ModeId>, parent: Option<NodeId>, discovered_by: Discovery) -> NodeId {
        let id = NodeId(self.nodes.len());
        let rng = trace_rng(self.seed, RESERVOIR_STREAM_BASE + id.0 as u64);
        self.nodes.push(ExploreNode {
            path,
            parent,
            children: BTreeMap::new(),
            child_visits: BTreeMap::new(),
            m: 0,
            n: 0,
            particles: Reservoir::new(self.capacity, rng),
            retired: BTreeSet::new(),
            discovered_by,
        });
        id
    }

    pub fn root(&self) -> NodeId {
        NodeId(0)
    }

    pub fn node(&self, id: NodeId) -> &ExploreNode {
        &self.nodes[id.0]
    }

    pub fn nodes(&self) -> impl Iterator<Item = (NodeId, &ExploreNode)> {
        self.nodes.iter().enumerate().map(|(i, n)| (NodeId(i), n))
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn max_steps(&self) -> usize {
        self.max_steps
    }

    pub fn find(&self, path: &[ModeId]) -> Option<NodeId> {
        let (first, rest) = path.split_first()?;
        if *first != self.nodes[0].path[0] {
            return None;
        }
        let mut at = self.root();
        for q in rest {
            at = *self.nodes[at.0].children.get(q)?;
        }
        Some(at)
    }

    pub fn retire(&mut self, node: NodeId, target: ModeId) {
        self.nodes[node.0].retired.insert(target);
    }

    pub fn estimate_q(&self, node: NodeId) -> f64 {
        let n = &self.nodes[node.0];
        estimate_q(n.m, n.n)
    }

    /// Walks `tr`, updating counters and particles. Returns the nodes this
    /// trace created, in path order.
    pub fn record_trace(
        &mut self,
        h: &HybridAutomaton,
        tr: &Trace,
        trace_id: u64,
        source: Discovery,
    ) -> Result<Vec<NodeId>, TreeError> {
        self.record_trace_marked(h, tr, trace_id, |_| source)
    }

    /// As `record_trace`, with the discovery label of a node created by
    /// jump `k` given by `mark(k)`.
    pub fn record_trace_marked(
        &mut self,
        h: &HybridAutomaton,
        tr: &Trace,
        trace_id: u64,
        mark: impl Fn(usize) -> Discovery,
    ) -> Result<Vec<NodeId>, TreeError> {
        let root_mode = self.nodes[0].path[0];
        let first = tr.states.first().ok_or(TreeError::Inconsistent(0))?;
        if first.mode != root_mode {
            return Err(TreeError::WrongRoot { expected: root_mode, found: first.mode });
        }
        if tr.jumps.len() > self.max_steps {
            return Err(TreeError::TooLong(tr.jumps.len()));
        }
        if tr.states.len() != tr.jumps.len() + 1 {
            return Err(TreeError::Inconsistent(tr.jumps.len()));
        }
        // Check everything before mutating.
        for (k, jump) in tr.jumps.iter().enumerate() {
            let (from, to) = (tr.states[k].mode, tr.states[k + 1].mode);
            if to.0 >= h.modes.len() {
                return Err(TreeError::Inconsistent(k));
            }
            let ok = match *jump {
                Jump::Stay => from == to,
                Jump::Fire { transition, .. } => h
                    .transitions
                    .get(transition.0)
                    .is_some_and(|t| t.source == from && t.target == to),
            };
            if !ok {
                return Err(TreeError::Inconsistent(k));
            }
        }
        self.nodes[0].particles.insert(Particle { valuation: first.valuation.clone(), trace: trace_id, step: 0 });
        let mut created = Vec::new();
        let mut at = self.root();
        for k in 0..tr.jumps.len() {
            let next = &tr.states[k + 1];
            let child = match self.nodes[at.0].children.get(&next.mode) {
                Some(&c) => {
                    self.nodes[at.0].m += 1;
                    c
                }
                None => {
                    let mut path = self.nodes[at.0].path.clone();
                    path.push(next.mode);
                    let c = self.push(path, Some(at), mark(k));
                    let node = &mut self.nodes[at.0];
                    node.children.insert(next.mode, c);
                    node.n += 1;
                    created.push(c);
                    c
                }
            };
            *self.nodes[at.0].child_visits.entry(next.mode).or_insert(0) += 1;
            self.nodes[child.0].particles.insert(Particle {
                valuation: next.valuation.clone(),
                trace: trace_id,
                step: k + 1,
            });
            at = child;
        }
        Ok(created)
    }

    /// Targets one transition away from a node that no trace has reached
    /// there yet and that can still lead to a negative mode.
    pub fn unvisited_targets(&self, h: &HybridAutomaton, node: NodeId, qbad: &BTreeSet<ModeId>) -> Vec<ModeId> {
        let n = &self.nodes[node.0];
        if n.path.len() > self.max_steps {
            return Vec::new();
        }
        h.successor_modes(n.mode())
            .unwrap_or_default()
            .into_iter()
            .filter(|q| !n.children.contains_key(q) && !n.retired.contains(q) && qbad.contains(q))
            .collect()
    }

    /// Every (node, unvisited target) pair, ordered by the node's path of
    /// mode names and then by the target's name.
    pub fn frontier(&self, h: &HybridAutomaton, qbad: &BTreeSet<ModeId>) -> Vec<(NodeId, ModeId)> {
        let mut out: Vec<(Vec<&str>, &str, NodeId, ModeId)> = Vec::new();
        for (id, node) in self.nodes() {
            for target in self.unvisited_targets(h, id, qbad) {
                let names = node.path.iter().map(|&q| h.mode_name(q)).collect();
                out.push((names, h.mode_name(target), id, target));
            }
        }
        out.sort_by(|a, b| (&a.0, a.1).cmp(&(&b.0, b.1)));
        out.into_iter().map(|(_, _, id, t)| (id, t)).collect()
    }

    /// Child visit counts normalised to sum to one.
    pub fn empirical_transition_probabilities(&self, node: NodeId) -> Result<BTreeMap<ModeId, f64>, TreeError> {
        let n = &self.nodes[node.0];
        let total: u64 = n.child_visits.values().sum();
        if total == 0 {
            return Err(TreeError::NoData);
        }
        Ok(n.child_visits.iter().map(|(&q, &c)| (q, c as f64 / total as f64)).collect())
    }

    pub fn summary(&self, h: &HybridAutomaton) -> Vec<NodeSummary> {
        self.nodes
            .iter()
            .map(|n| NodeSummary {
                path: n.path.iter().map(|&q| h.mode_name(q).to_string()).collect(),
                m: n.m,
                n: n.n,
                q_hat: estimate_q(n.m, n.n),
                particles: n.particles.len(),
                discovered_by: n.discovered_by,
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeSummary {
    pub path: Vec<String>,
    pub m: u64,
    pub n: u64,
    pub q_hat: f64,
    pub particles: usize,
    pub discovered_by: Discovery,
}
