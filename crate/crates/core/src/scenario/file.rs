use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::concept::{ActorRole, PropertyValue};
use crate::engines::{Backend, EngineRole};
use crate::learning::TrainConfig;
use crate::sequencer::{Mode, RewardConfig, TaskSequence};

pub const SCENARIO_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioMode {
    Execute,
    Train,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskDef {
    pub id: String,
    /// Registry key of the concept model.
    pub model: String,
    /// Known-parameter overrides.
    #[serde(default)]
    pub parameters: BTreeMap<String, f64>,
    /// Frozen policy parameters for a learned model, relative to the scenario file.
    #[serde(default)]
    pub params_file: Option<String>,
    #[serde(default)]
    pub max_steps: Option<usize>,
}

impl TaskDef {
    pub fn new(id: &str, model: &str) -> Self {
        Self {
            id: id.into(),
            model: model.into(),
            parameters: BTreeMap::new(),
            params_file: None,
            max_steps: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputPaths {
    /// Output directory, relative to the scenario file unless `--out` is given.
    pub dir: String,
    pub trajectory: String,
    pub metrics: String,
    pub params: String,
}

impl Default for OutputPaths {
    fn default() -> Self {
        Self {
            dir: "out".into(),
            trajectory: "trajectory.log".into(),
            metrics: "metrics.log".into(),
            params: "policy.params".into(),
        }
    }
}

/// Actor property overrides, applied to every task whose actor
/// configuration declares the property.
pub type ActorOverrides = BTreeMap<ActorRole, BTreeMap<String, PropertyValue>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub version: u32,
    pub seed: u64,
    pub mode: ScenarioMode,
    #[serde(default)]
    pub train_task: Option<String>,
    pub sequence: Vec<String>,
    pub tasks: Vec<TaskDef>,
    #[serde(default)]
    pub actors: ActorOverrides,
    /// Backend per engine role; roles not listed run locally.
    #[serde(default)]
    pub engines: BTreeMap<EngineRole, Backend>,
    #[serde(default)]
    pub reward: RewardConfig,
    #[serde(default)]
    pub train: TrainConfig,
    /// Episodes to run (execute) or to evaluate the trained policy on (train).
    #[serde(default = "default_episodes")]
    pub episodes: u64,
    #[serde(default)]
    pub output: OutputPaths,
}

fn default_episodes() -> u64 {
    1
}

impl Scenario {
    pub fn task(&self, id: &str) -> Option<&TaskDef> {
        self.tasks.iter().find(|t| t.id == id)
    }

    /// The sequence in the scenario's mode.
    pub fn task_sequence(&self) -> TaskSequence {
        match (self.mode, &self.train_task) {
            (ScenarioMode::Train, Some(t)) => {
                let k = self.sequence.iter().position(|s| s == t).unwrap_or(0);
                TaskSequence {
                    tasks: self.sequence.clone(),
                    mode: Mode::Train(k),
                }
            }
            _ => TaskSequence::execute(self.sequence.iter().cloned()),
        }
    }

    /// The sequence run front to back, as used to evaluate a trained task.
    pub fn execute_sequence(&self) -> TaskSequence {
        TaskSequence::execute(self.sequence.iter().cloned())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}, column {column}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

/// Line and column (1-based) of byte offset `at`.
fn position(text: &str, at: usize) -> (usize, usize) {
    let before = &text[..at];
    let line = before.matches('\n').count() + 1;
    let column = at - before.rfind('\n').map_or(0, |i| i + 1) + 1;
    (line, column)
}

/// Position of the first occurrence of `needle`, or 1:1.
fn locate(text: &str, needle: &str) -> (usize, usize) {
    text.find(needle).map_or((1, 1), |at| position(text, at))
}

fn error_at(text: &str, needle: &str, message: String) -> ParseError {
    let (line, column) = locate(text, needle);
    ParseError { line, column, message }
}

/// Parses a scenario file. Unknown fields are rejected; structural rules
/// (unique task ids, defined sequence ids, train-mode fields) are checked
/// here, model-level compatibility by [`super::validate_scenario`].
pub fn parse_scenario(text: &str) -> Result<Scenario, ParseError> {
    let s: Scenario = serde_json::from_str(text).map_err(|e| ParseError {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;

    let mut seen = BTreeSet::new();
    for t in &s.tasks {
        if !seen.insert(t.id.as_str()) {
            // Point at the second definition.
            let needle = format!("\"{}\"", t.id);
            let at = text.match_indices(&needle).nth(1).map_or(0, |(i, _)| i);
            let (line, column) = position(text, at);
            return Err(ParseError {
                line,
                column,
                message: format!("tasks: duplicate task id {:?}", t.id),
            });
        }
    }
    for id in &s.sequence {
        if !seen.contains(id.as_str()) {
            return Err(error_at(
                text,
                "\"sequence\"",
                format!("sequence: task id {id:?} is not defined in tasks"),
            ));
        }
    }
    match (s.mode, &s.train_task) {
        (ScenarioMode::Train, None) => {
            return Err(error_at(
                text,
                "\"mode\"",
                "train_task: required in train mode".into(),
            ))
        }
        (ScenarioMode::Train, Some(t)) if !s.sequence.contains(t) => {
            return Err(error_at(
                text,
                "\"train_task\"",
                format!("train_task: {t:?} is not in the sequence"),
            ))
        }
        (ScenarioMode::Execute, Some(_)) => {
            return Err(error_at(
                text,
                "\"train_task\"",
                "train_task: only allowed in train mode".into(),
            ))
        }
        _ => {}
    }
    Ok(s)
}

/// Canonical text of a scenario: every field explicit, two-space indented,
/// reals in shortest round-trip decimal form.
pub fn serialize_scenario(s: &Scenario) -> String {
    let mut text = serde_json::to_string_pretty(s).expect("scenario serializes");
    text.push('\n');
    text
}
