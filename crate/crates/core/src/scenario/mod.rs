//! Scenario files and the drivers behind `run` and `train`.
//!
//! A scenario is a JSON document with plain decimal reals naming the task
//! blocks, the sequence to run or train, actor and reward overrides, and
//! the engine backends. Unknown fields are rejected.

mod driver;
mod file;
mod validate;

pub use driver::{
    load_scenario, run_scenario, train_scenario, EvaluationSummary, LoadedScenario, ParamsFile,
    RunOptions, ScenarioError, TrainOutcome,
};
pub use file::{
    parse_scenario, serialize_scenario, ActorOverrides, OutputPaths, ParseError, Scenario,
    ScenarioMode, TaskDef, SCENARIO_VERSION,
};
pub use validate::{build_models, endpoint_well_formed, validate_scenario, Diagnostic};
