//! Trajectory dumps and mode-sequence statistics for sampled traces.

use std::collections::BTreeMap;
use std::io::Write;

use crate::automaton::{HybridAutomaton, Jump, Trace};
use crate::ode::{Integrator, OdeError};

#[derive(Debug, thiserror::Error)]
pub enum SimulateError {
    #[error(transparent)]
    Ode(#[from] OdeError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Writes the header `trace,step,mode,t,<vars>`.
pub fn write_header<W: Write>(h: &HybridAutomaton, out: &mut W) -> std::io::Result<()> {
    write!(out, "trace,step,mode,t")?;
    for v in &h.variables {
        write!(out, ",{v}")?;
    }
    writeln!(out)
}

/// One row per integration grid point of the trace, plus the final state.
/// Within a unit the row's mode switches at the firing time.
pub fn write_trace_rows<W: Write>(
    integ: &Integrator<'_>,
    index: u64,
    tr: &Trace,
    out: &mut W,
) -> Result<usize, SimulateError> {
    let h = integ.automaton();
    let n = integ.steps_per_unit();
    let mut rows = 0;
    let row = |out: &mut W, k: usize, mode: usize, t: f64, vals: &[f64]| -> std::io::Result<()> {
        write!(out, "{index},{k},{},{t}", h.modes[mode].name)?;
        for x in vals {
            write!(out, ",{x}")?;
        }
        writeln!(out)
    };
    for (k, jump) in tr.jumps.iter().enumerate() {
        let s = &tr.states[k];
        let start = k as f64;
        let traj = integ.trajectory(s.mode, &s.valuation, start)?;
        let switch = match *jump {
            Jump::Stay => None,
            Jump::Fire { transition, time } => {
                let x = traj.at(time)?;
                Some((h.transition(transition).target, time, x))
            }
        };
        // After the switch, integrate forward from the previous row.
        let mut after: Option<(f64, Vec<f64>)> = switch.as_ref().map(|(_, time, x)| (*time, x.clone()));
        for j in 0..n {
            let local = traj.grid_time(j);
            match (&switch, after.as_mut()) {
                (Some((target, time, _)), Some((at, y))) if local >= *time => {
                    *y = integ.flow_from(*target, y, start + *at, local - *at)?;
                    *at = local;
                    row(out, k, target.0, start + local, y)?;
                }
                _ => row(out, k, s.mode.0, start + local, traj.grid_state(j))?,
            }
            rows += 1;
        }
    }
    let last = tr.states.last().expect("traces are nonempty");
    row(out, tr.jumps.len(), last.mode.0, tr.jumps.len() as f64, &last.valuation)?;
    Ok(rows + 1)
}

/// Counts of `source->target` over every fired jump.
pub fn transition_histogram(h: &HybridAutomaton, traces: &[Trace]) -> BTreeMap<String, u64> {
    let mut out = BTreeMap::new();
    for tr in traces {
        for j in &tr.jumps {
            if let Jump::Fire { transition, .. } = *j {
                let t = h.transition(transition);
                *out.entry(format!("{}->{}", h.mode_name(t.source), h.mode_name(t.target))).or_insert(0) += 1;
            }
        }
    }
    out
}

/// Counts of whole mode sequences such as `normal,draining,normal`.
pub fn mode_sequence_histogram(h: &HybridAutomaton, traces: &[Trace]) -> BTreeMap<String, u64> {
    let mut out = BTreeMap::new();
    for tr in traces {
        let key = tr.modes().map(|q| h.mode_name(q)).collect::<Vec<_>>().join(",");
        *out.entry(key).or_insert(0) += 1;
    }
    out
}
