use hyc_core::automaton::{AutomatonBuilder, Jump, Trace, TransitionId};
use hyc_core::bench::bundled_model;
use hyc_core::ode::{Integrator, IntegratorConfig};
use hyc_core::sampler::{sample_trace, verify_trace, SamplerConfig};
use hyc_core::solver::{splice, Backtrack, PathStep, QueryKind, SatResult, Solver, SolverConfig};

#[test]
fn backtracking_reaches_the_oscillator_event() {
    let (m, h) = bundled_model("oscillator.json").unwrap().unwrap();
    let integ = Integrator::new(&h, IntegratorConfig::default()).unwrap();
    let cfg = SamplerConfig { steps: m.steps.unwrap(), points: 64, seed: 9 };
    let tid = TransitionId(0);
    // The damping leaves too little amplitude after the first unit: the
    // event is reachable at step 0 only.
    let mut tried = 0;
    for i in 0..20 {
        let run = sample_trace(&integ, &cfg, i).unwrap();
        if run.jumps[0] != Jump::Stay {
            continue;
        }
        tried += 1;
        let mut s = Solver::new(&integ, SolverConfig::default()).unwrap();
        let Backtrack::Found(tr) = s.backtrack_solve(&run, 0, tid).unwrap() else { panic!("run {i}") };
        verify_trace(&integ, &tr, 1e-9).unwrap();
        assert!(matches!(tr.jumps[..], [Jump::Fire { transition, .. }] if transition == tid));

        assert_eq!(s.backtrack_solve(&run, 1, tid).unwrap(), Backtrack::Infeasible);
        let stay_then_jump = vec![PathStep::Stay(h.initial_mode), PathStep::Jump(tid)];
        assert!(s.cache.entries().any(|e| *e == stay_then_jump));
    }
    assert!(tried >= 10);
}

#[test]
fn box_witness_splices_into_a_valid_trace() {
    let (_, h) = bundled_model("sewerage.json").unwrap().unwrap();
    let integ = Integrator::new(&h, IntegratorConfig::default()).unwrap();
    let flood = h
        .transitions
        .iter()
        .position(|t| h.mode_name(t.target) == "flooding")
        .map(TransitionId)
        .unwrap();
    let path = [PathStep::Jump(flood)];
    let mut s = Solver::new(&integ, SolverConfig::default()).unwrap();
    let SatResult::Sat(w) = s.solve_path_any(&path, &h.initial_box).unwrap() else { panic!("flooding is reachable") };
    assert!(w.start[0] >= 4.0 && w.start[0] <= 6.0);
    let empty = Trace { states: Vec::new(), jumps: Vec::new() };
    let tr = splice(&h, &empty, 0, &path, &w);
    verify_trace(&integ, &tr, 1e-9).unwrap();
}

#[test]
fn cached_prefix_answers_longer_paths() {
    let h = AutomatonBuilder::new("ramp", &["x"])
        .mode("a", &["1"])
        .mode("b", &["1"])
        .mode("c", &["0"])
        .transition("a", "x > 5", "b")
        .transition("b", "x > 0", "c")
        .initial("a", &[(0.0, 1.0)])
        .build()
        .unwrap();
    let integ = Integrator::new(&h, IntegratorConfig::default()).unwrap();
    let mut s = Solver::new(&integ, SolverConfig::default()).unwrap();
    let bx = h.initial_box.clone();
    let short = [PathStep::Jump(TransitionId(0))];
    assert_eq!(s.solve_path_any(&short, &bx).unwrap(), SatResult::Unsat);
    assert_eq!(s.cache.len(), 1);
    let long = [PathStep::Jump(TransitionId(0)), PathStep::Jump(TransitionId(1))];
    assert_eq!(s.solve_path_any(&long, &bx).unwrap(), SatResult::Unsat);
    let last = s.audit.last().unwrap();
    assert_eq!(last.kind, QueryKind::PathAny);
    assert!(last.cached);
    assert_eq!(last.evaluations, 0);
    assert_eq!(s.stats.cache_hits, 1);
    // A sub-box is covered as well.
    assert_eq!(s.solve_path_any(&long, &[(0.2, 0.4)]).unwrap(), SatResult::Unsat);
    assert_eq!(s.stats.cache_hits, 2);
}
