//! Run reports as JSON documents.

use serde::{Deserialize, Serialize};

use crate::automaton::HybridAutomaton;
use crate::strategy::{RunConfig, RunReport, Timing, Verdict};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportFile {
    pub schema_version: u32,
    pub tool: String,
    pub tool_version: String,
    pub model: String,
    pub seed: u64,
    /// Mode names indexed by the mode ids used in traces.
    pub modes: Vec<String>,
    /// Transitions as `source->target`, indexed by transition id.
    pub transitions: Vec<String>,
    pub config: RunConfig,
    pub run: RunReport,
}

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error("malformed report: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported report schema version {0}")]
    Version(u32),
    #[error("verdict and counterexample disagree")]
    Inconsistent,
}

impl ReportFile {
    pub fn new(h: &HybridAutomaton, config: RunConfig, run: RunReport) -> ReportFile {
        ReportFile {
            schema_version: SCHEMA_VERSION,
            tool: env!("CARGO_PKG_NAME").to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            model: h.name.clone(),
            seed: config.sampler.seed,
            modes: h.modes.iter().map(|m| m.name.clone()).collect(),
            transitions: h
                .transitions
                .iter()
                .map(|t| format!("{}->{}", h.mode_name(t.source), h.mode_name(t.target)))
                .collect(),
            config,
            run,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports always serialize")
    }

    pub fn from_json(text: &str) -> Result<ReportFile, ReportError> {
        let r: ReportFile = serde_json::from_str(text)?;
        if r.schema_version != SCHEMA_VERSION {
            return Err(ReportError::Version(r.schema_version));
        }
        if r.run.counterexample.is_some() != (r.run.verdict == Verdict::Counterexample) {
            return Err(ReportError::Inconsistent);
        }
        Ok(r)
    }

    /// The report with every wall-clock measurement zeroed, for comparing
    /// runs.
    pub fn without_timing(&self) -> ReportFile {
        let mut r = self.clone();
        r.run.timing = Timing::default();
        for a in &mut r.run.audit {
            a.elapsed_ms = 0.0;
        }
        if matches!(r.config.strategy.clock, crate::strategy::Clock::Wall) {
            r.run.final_c_t = None;
        }
        r
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modelfile::ModelFile;
    use crate::strategy::{run_concolic, StrategyMode};

    fn oscillator() -> HybridAutomaton {
        ModelFile::from_json(include_str!("../../../models/oscillator.json")).unwrap().to_automaton().unwrap()
    }

    #[test]
    fn round_trip() {
        let h = oscillator();
        let cfg = RunConfig::new(7, StrategyMode::Local);
        let run = run_concolic(&h, &cfg).unwrap();
        let file = ReportFile::new(&h, cfg, run);
        let back = ReportFile::from_json(&file.to_json()).unwrap();
        assert_eq!(back, file);
        assert_eq!(back.modes, vec!["q0", "qe"]);
    }

    #[test]
    fn rejects_other_versions_and_inconsistent_verdicts() {
        let h = oscillator();
        let cfg = RunConfig::new(7, StrategyMode::Local);
        let run = run_concolic(&h, &cfg).unwrap();
        let mut file = ReportFile::new(&h, cfg, run);
        file.schema_version = 99;
        assert!(matches!(ReportFile::from_json(&file.to_json()), Err(ReportError::Version(99))));
        file.schema_version = SCHEMA_VERSION;
        file.run.verdict = Verdict::Pass;
        assert!(matches!(ReportFile::from_json(&file.to_json()), Err(ReportError::Inconsistent)));
    }
}
