//! JSON model files.
//!
//! ```json
//! {
//!   "name": "oscillator",
//!   "variables": ["x", "v"],
//!   "parameters": { "w": 6.283185307179586 },
//!   "modes": { "q0": ["v", "-v - w^2*x"], "qe": ["0", "0"] },
//!   "transitions": [ { "source": "q0", "guard": "x > 0.785", "target": "qe" } ],
//!   "initial_mode": "q0",
//!   "initial_box": { "x": [0, 0], "v": [0, 6.283185307179586] },
//!   "negative": ["qe"],
//!   "steps": 5
//! }
//! ```
//!
//! Mode order in the file fixes mode ids. Unknown keys are rejected.

use std::path::Path;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::automaton::{AutomatonBuilder, Diagnostic, HybridAutomaton, ModelError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransitionSpec {
    pub source: String,
    pub guard: String,
    pub target: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub name: String,
    /// Free text; where the constants come from.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub comment: Option<String>,
    pub variables: Vec<String>,
    #[serde(default)]
    pub parameters: IndexMap<String, f64>,
    /// Per-parameter remarks.
    #[serde(default, skip_serializing_if = "IndexMap::is_empty")]
    pub notes: IndexMap<String, String>,
    pub modes: IndexMap<String, Vec<String>>,
    #[serde(default)]
    pub transitions: Vec<TransitionSpec>,
    pub initial_mode: String,
    pub initial_box: IndexMap<String, [f64; 2]>,
    #[serde(default)]
    pub negative: Vec<String>,
    /// Default trace length.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
}

#[derive(Debug, Error)]
pub enum ModelFileError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("line {line}, column {column}: {message}")]
    Json { line: usize, column: usize, message: String },
    #[error("temporal-logic properties (`bltl`) are not accepted; declare the modes to avoid under `negative`")]
    Bltl,
    #[error(transparent)]
    Model(#[from] ModelError),
}

impl ModelFile {
    pub fn from_json(text: &str) -> Result<ModelFile, ModelFileError> {
        let json = |e: serde_json::Error| ModelFileError::Json { line: e.line(), column: e.column(), message: e.to_string() };
        let raw: serde_json::Value = serde_json::from_str(text).map_err(json)?;
        if raw.get("bltl").is_some() {
            return Err(ModelFileError::Bltl);
        }
        serde_json::from_str(text).map_err(json)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model files always serialize")
    }

    pub fn to_automaton(&self) -> Result<HybridAutomaton, ModelFileError> {
        let mut diags = Vec::new();
        let mut bounds = Vec::new();
        for v in &self.variables {
            match self.initial_box.get(v) {
                Some(&[l, u]) => bounds.push((l, u)),
                None => {
                    diags.push(Diagnostic::new(format!("initial_box.{v}"), "missing bounds for variable"));
                    bounds.push((0.0, 0.0));
                }
            }
        }
        for k in self.initial_box.keys() {
            if !self.variables.contains(k) {
                diags.push(Diagnostic::new(format!("initial_box.{k}"), "not a declared variable"));
            }
        }
        if let Some(0) = self.steps {
            diags.push(Diagnostic::new("steps", "trace length must be positive"));
        }
        let mut b = AutomatonBuilder::new(&self.name, &self.variables);
        for (k, &v) in &self.parameters {
            b = b.param(k, v);
        }
        for (name, flow) in &self.modes {
            b = b.mode(name, flow);
        }
        for t in &self.transitions {
            b = b.transition(&t.source, &t.guard, &t.target);
        }
        let built = b.initial(&self.initial_mode, &bounds).negative(&self.negative).build();
        match built {
            Ok(h) if diags.is_empty() => Ok(h),
            Ok(_) => Err(ModelError::Invalid(diags).into()),
            Err(ModelError::Invalid(mut more)) => {
                more.extend(diags);
                Err(ModelError::Invalid(more).into())
            }
            Err(e) => Err(e.into()),
        }
    }
}

pub fn load_model(path: &Path) -> Result<(ModelFile, HybridAutomaton), ModelFileError> {
    let text = std::fs::read_to_string(path)
        .map_err(|source| ModelFileError::Io { path: path.display().to_string(), source })?;
    let file = ModelFile::from_json(&text)?;
    let h = file.to_automaton()?;
    Ok((file, h))
}
