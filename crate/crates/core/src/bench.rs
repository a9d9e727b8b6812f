//! The bundled benchmark suite: every model under every strategy with fixed
//! seeds.

use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::automaton::HybridAutomaton;
use crate::modelfile::{ModelFile, ModelFileError};
use crate::strategy::{run_concolic, RunConfig, RunError, StrategyMode, Verdict};

pub const SUITES: [&str; 1] = ["standard"];

/// (file name, contents) of every bundled model.
pub const BUNDLED_MODELS: [(&str, &str); 5] = [
    ("oscillator.json", include_str!("../../../models/oscillator.json")),
    ("bouncing_ball.json", include_str!("../../../models/bouncing_ball.json")),
    ("sewerage.json", include_str!("../../../models/sewerage.json")),
    ("room_heating_2x1.json", include_str!("../../../models/room_heating_2x1.json")),
    ("navigation_3x3.json", include_str!("../../../models/navigation_3x3.json")),
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BenchSettings {
    pub seed: u64,
    pub max_traces: u64,
    pub timeout: Duration,
    pub jobs: Option<usize>,
}

impl Default for BenchSettings {
    fn default() -> Self {
        BenchSettings { seed: 2024, max_traces: 400, timeout: Duration::from_secs(60), jobs: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub model: String,
    pub strategy: StrategyMode,
    pub verdict: Verdict,
    pub traces: u64,
    pub solver_calls: u64,
    pub seconds: f64,
}

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("unknown suite `{0}` (available: standard)")]
    UnknownSuite(String),
    #[error("{0}: {1}")]
    Model(String, ModelFileError),
    #[error("{0}: {1}")]
    Run(String, RunError),
}

pub fn bundled_model(file: &str) -> Option<Result<(ModelFile, HybridAutomaton), ModelFileError>> {
    BUNDLED_MODELS.iter().find(|(f, _)| *f == file).map(|(_, text)| {
        let m = ModelFile::from_json(text)?;
        let h = m.to_automaton()?;
        Ok((m, h))
    })
}

/// Run configuration used for one model of the suite.
pub fn bench_config(model: &ModelFile, mode: StrategyMode, settings: &BenchSettings) -> RunConfig {
    let mut cfg = RunConfig::new(settings.seed, mode);
    if let Some(k) = model.steps {
        cfg.sampler.steps = k;
    }
    cfg.strategy.max_traces = settings.max_traces;
    cfg.strategy.timeout = settings.timeout;
    cfg.strategy.jobs = settings.jobs;
    cfg
}

pub fn run_suite(suite: &str, settings: &BenchSettings) -> Result<Vec<BenchRow>, BenchError> {
    if !SUITES.contains(&suite) {
        return Err(BenchError::UnknownSuite(suite.to_string()));
    }
    let mut rows = Vec::new();
    for (file, text) in BUNDLED_MODELS {
        let model = ModelFile::from_json(text).map_err(|e| BenchError::Model(file.to_string(), e))?;
        let h = model.to_automaton().map_err(|e| BenchError::Model(file.to_string(), e))?;
        for mode in StrategyMode::ALL {
            let cfg = bench_config(&model, mode, settings);
            let r = run_concolic(&h, &cfg).map_err(|e| BenchError::Run(format!("{file} / {mode}"), e))?;
            rows.push(BenchRow {
                model: h.name.clone(),
                strategy: mode,
                verdict: r.verdict,
                traces: r.tallies.traces,
                solver_calls: r.tallies.solver_calls,
                seconds: r.timing.total_seconds,
            });
        }
    }
    Ok(rows)
}

fn verdict_label(v: Verdict) -> &'static str {
    match v {
        Verdict::Counterexample => "ct-eg found",
        Verdict::Pass => "pass",
        Verdict::TimeoutInconclusive => "timeout",
    }
}

/// Plain-text table, one line per (model, strategy).
pub fn render_table(rows: &[BenchRow]) -> String {
    let mut out = format!(
        "{:<18} {:<8} {:<12} {:>8} {:>8} {:>9}\n",
        "model", "strategy", "result", "#samples", "#solver", "time(s)"
    );
    for r in rows {
        out.push_str(&format!(
            "{:<18} {:<8} {:<12} {:>8} {:>8} {:>9.3}\n",
            r.model,
            r.strategy.as_str(),
            verdict_label(r.verdict),
            r.traces,
            r.solver_calls,
            r.seconds
        ));
    }
    out
}
