//! Falsification of hybrid automata by concolic sampling: random simulation
//! guided by Bayesian discovery estimates, interleaved with constraint
//! solving for rarely enabled transitions.

pub mod automaton;
pub mod expr;
pub mod ode;
pub mod sampler;
pub mod exploretree;
pub mod inference;
pub mod quadrature;
pub mod reservoir;
pub mod solver;
pub mod strategy;
pub mod modelfile;
pub mod report;
pub mod simulate;
pub mod bench;
