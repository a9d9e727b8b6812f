use std::time::Duration;

use hyc_core::bench::{bench_config, bundled_model, render_table, BenchSettings, BUNDLED_MODELS};
use hyc_core::strategy::{run_concolic, StrategyMode};

fn rows(file: &str, settings: &BenchSettings) -> Vec<(String, u64, u64)> {
    let (m, h) = bundled_model(file).unwrap().unwrap();
    StrategyMode::ALL
        .iter()
        .map(|&mode| {
            let r = run_concolic(&h, &bench_config(&m, mode, settings)).unwrap();
            (format!("{:?}", r.verdict), r.tallies.traces, r.tallies.solver_calls)
        })
        .collect()
}

#[test]
fn bench_rows_are_reproducible() {
    let settings = BenchSettings { max_traces: 200, timeout: Duration::from_secs(60), ..BenchSettings::default() };
    for file in ["oscillator.json", "sewerage.json"] {
        assert_eq!(rows(file, &settings), rows(file, &settings), "{file}");
    }
}

#[test]
fn bundled_models_declare_their_trace_length() {
    for (file, _) in BUNDLED_MODELS {
        let (m, _) = bundled_model(file).unwrap().unwrap();
        assert!(m.steps.is_some_and(|k| k > 0), "{file}");
        assert!(m.comment.is_some(), "{file}");
    }
    assert!(render_table(&[]).starts_with("model"));
}
