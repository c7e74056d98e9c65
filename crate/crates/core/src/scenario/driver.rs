use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::concept::PolicySource;
use crate::engines::{EnginePipeline, PipelineSpec};
use crate::learning::{cem_train, evaluate, evaluation_seed, SequenceObjective, TrainReport};
use crate::sequencer::{goals_satisfied, EpisodeSummary, Sequencer, TaskRegistry};
use crate::wire::hexfloat::{serde_f64, serde_vec};
use crate::wire::to_canonical;

use super::file::{parse_scenario, ParseError, Scenario, ScenarioMode};
use super::validate::{build_models, validate_scenario, Diagnostic};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("{path}: {source}")]
    Parse { path: String, source: ParseError },
    #[error("invalid scenario:\n{}", .0.iter().map(|d| format!("  {d}")).collect::<Vec<_>>().join("\n"))]
    Invalid(Vec<Diagnostic>),
    #[error("params file {path}: {message}")]
    Params { path: String, message: String },
    #[error("{path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("{0}")]
    Runtime(String),
}

impl ScenarioError {
    /// 1 for problems with the scenario or its inputs, 2 for runtime failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Parse { .. } | Self::Invalid(_) | Self::Params { .. } => 1,
            Self::Io { .. } | Self::Runtime(_) => 2,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> ScenarioError + '_ {
    move |source| ScenarioError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Frozen policy parameters: the file contract between `train` and `run`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsFile {
    pub family: String,
    pub dim: usize,
    #[serde(with = "serde_vec")]
    pub params: Vec<f64>,
}

impl ParamsFile {
    pub fn to_text(&self) -> String {
        let mut s = to_canonical(self).expect("finite parameters");
        s.push('\n');
        s
    }

    pub fn read(path: &Path) -> Result<Self, ScenarioError> {
        let text = fs::read_to_string(path).map_err(|e| ScenarioError::Params {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        let file: Self = serde_json::from_str(&text).map_err(|e| ScenarioError::Params {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        if file.params.len() != file.dim {
            return Err(ScenarioError::Params {
                path: path.display().to_string(),
                message: format!("dim {} but {} values", file.dim, file.params.len()),
            });
        }
        Ok(file)
    }

    pub fn write(&self, path: &Path) -> Result<(), ScenarioError> {
        fs::write(path, self.to_text()).map_err(io_err(path))
    }
}

/// Command-line overrides of scenario settings.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Output directory; replaces the scenario's `output.dir`.
    pub out_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
}

/// A scenario file together with the directory its relative paths refer to.
#[derive(Debug, Clone)]
pub struct LoadedScenario {
    pub scenario: Scenario,
    pub base_dir: PathBuf,
}

pub fn load_scenario(path: &Path) -> Result<LoadedScenario, ScenarioError> {
    let text = fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let scenario = parse_scenario(&text).map_err(|source| ScenarioError::Parse {
        path: path.display().to_string(),
        source,
    })?;
    let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok(LoadedScenario { scenario, base_dir })
}

impl LoadedScenario {
    pub fn seed(&self, opts: &RunOptions) -> u64 {
        opts.seed.unwrap_or(self.scenario.seed)
    }

    pub fn out_dir(&self, opts: &RunOptions) -> PathBuf {
        opts.out_dir
            .clone()
            .unwrap_or_else(|| self.base_dir.join(&self.scenario.output.dir))
    }

    pub fn pipeline_spec(&self) -> PipelineSpec {
        self.scenario
            .engines
            .iter()
            .fold(PipelineSpec::default(), |spec, (role, backend)| {
                spec.with_backend(*role, backend.clone())
            })
    }

    /// Validates the scenario and builds its task registry, loading frozen
    /// parameters for learned tasks.
    pub fn registry(&self) -> Result<TaskRegistry, ScenarioError> {
        let diagnostics = validate_scenario(&self.scenario);
        if !diagnostics.is_empty() {
            return Err(ScenarioError::Invalid(diagnostics));
        }
        let (models, _) = build_models(&self.scenario);
        let mut registry = TaskRegistry::default();
        for (id, model) in models {
            let def = self.scenario.task(&id).expect("model built from a task");
            let params = match (&def.params_file, model.policy.family()) {
                (Some(file), Some(family)) => {
                    let path = self.base_dir.join(file);
                    let loaded = ParamsFile::read(&path)?;
                    if loaded.family != family.name || loaded.dim != family.dim {
                        return Err(ScenarioError::Params {
                            path: path.display().to_string(),
                            message: format!(
                                "holds {} ({}), task {id} needs {} ({})",
                                loaded.family, loaded.dim, family.name, family.dim
                            ),
                        });
                    }
                    Some(loaded.params)
                }
                _ => None,
            };
            registry.insert(&id, model, params);
        }
        Ok(registry)
    }
}

fn create_out_dir(dir: &Path) -> Result<(), ScenarioError> {
    fs::create_dir_all(dir).map_err(io_err(dir))
}

fn canonical_line<T: Serialize>(value: &T) -> Result<String, ScenarioError> {
    let mut s = to_canonical(value).map_err(|e| ScenarioError::Runtime(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluationSummary {
    pub episodes: u64,
    pub successes: u64,
    #[serde(with = "serde_f64")]
    pub success_rate: f64,
}

impl EvaluationSummary {
    fn new(episodes: u64, successes: u64) -> Self {
        let success_rate = if episodes == 0 {
            0.0
        } else {
            successes as f64 / episodes as f64
        };
        Self {
            episodes,
            successes,
            success_rate,
        }
    }
}

#[derive(Serialize)]
struct SummaryLine<'a> {
    summary: &'a EpisodeSummary,
}

#[derive(Serialize)]
struct EvaluationLine<'a> {
    evaluation: &'a EvaluationSummary,
}

#[derive(Serialize)]
struct FinalLine<'a> {
    #[serde(with = "serde_vec")]
    final_params: &'a Vec<f64>,
    evaluation: &'a EvaluationSummary,
}

/// Runs an execute-mode scenario: `episodes` seeded episodes, each logged
/// step by step to the trajectory log and closed with a summary line.
/// The metrics log receives the overall success count.
pub fn run_scenario(loaded: &LoadedScenario, opts: &RunOptions) -> Result<EvaluationSummary, ScenarioError> {
    let s = &loaded.scenario;
    if s.mode != ScenarioMode::Execute {
        return Err(ScenarioError::Invalid(vec![Diagnostic {
            field: "mode".into(),
            message: "run needs an execute-mode scenario; use train".into(),
        }]));
    }
    let registry = loaded.registry()?;
    let mut pipeline =
        EnginePipeline::from_spec(&loaded.pipeline_spec()).map_err(|e| ScenarioError::Runtime(e.to_string()))?;
    let out = loaded.out_dir(opts);
    create_out_dir(&out)?;
    let trajectory_path = out.join(&s.output.trajectory);
    let mut log = BufWriter::new(File::create(&trajectory_path).map_err(io_err(&trajectory_path))?);

    let seed = loaded.seed(opts);
    let seq = s.execute_sequence();
    let mut sequencer = Sequencer::new(&registry, &mut pipeline).with_reward(s.reward);
    let mut successes = 0;
    for episode in 0..s.episodes {
        let episode_seed = evaluation_seed(seed, episode);
        let result = sequencer
            .run_sequence(&seq, None, episode_seed)
            .map_err(|e| ScenarioError::Runtime(e.to_string()))?;
        for step in &result.trajectory {
            log.write_all(canonical_line(step)?.as_bytes())
                .map_err(io_err(&trajectory_path))?;
        }
        let satisfied = goals_satisfied(&registry, &result);
        if result.outcome.is_success() && satisfied {
            successes += 1;
        }
        let summary = EpisodeSummary {
            episode,
            seed: episode_seed,
            outcome: result.outcome.clone(),
            steps: result.trajectory.len() as u64,
            goals_satisfied: satisfied,
            ret: result.ret,
        };
        log::info!("episode {episode}: {:?}", summary.outcome);
        log.write_all(canonical_line(&SummaryLine { summary: &summary })?.as_bytes())
            .map_err(io_err(&trajectory_path))?;
    }
    log.flush().map_err(io_err(&trajectory_path))?;

    let summary = EvaluationSummary::new(s.episodes, successes);
    let metrics_path = out.join(&s.output.metrics);
    fs::write(&metrics_path, canonical_line(&EvaluationLine { evaluation: &summary })?)
        .map_err(io_err(&metrics_path))?;
    Ok(summary)
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub report: TrainReport,
    pub evaluation: EvaluationSummary,
    pub params_path: PathBuf,
}

/// Trains the scenario's `train_task` with the cross-entropy method, writes
/// one metrics line per iteration plus a final evaluation line, and freezes
/// the resulting parameters to the params file.
pub fn train_scenario(loaded: &LoadedScenario, opts: &RunOptions) -> Result<TrainOutcome, ScenarioError> {
    let s = &loaded.scenario;
    if s.mode != ScenarioMode::Train {
        return Err(ScenarioError::Invalid(vec![Diagnostic {
            field: "mode".into(),
            message: "train needs a train-mode scenario; use run".into(),
        }]));
    }
    let registry = Arc::new(loaded.registry()?);
    let task = s.train_task.clone().expect("checked at parse");
    let family = match &registry.get(&task).expect("validated").model.policy {
        PolicySource::Learned { family, .. } => family.clone(),
        _ => unreachable!("validated as learned"),
    };

    let spec = loaded.pipeline_spec();
    let remote = s.engines.values().any(|b| matches!(b, crate::engines::Backend::Remote(_)));
    let mut config = s.train.clone();
    config.seed = loaded.seed(opts);
    config.workers = if remote {
        if opts.workers.is_some_and(|w| w > 1) {
            log::warn!("remote engines accept one connection; training with one worker");
        }
        Some(1)
    } else {
        opts.workers
    };

    let sequence = s.task_sequence();
    let reward = s.reward;
    let factory = || SequenceObjective::new(Arc::clone(&registry), &spec, sequence.clone(), reward);
    let report = cem_train(factory, family.dim, &config).map_err(|e| ScenarioError::Runtime(e.to_string()))?;
    log::info!("training took {:.1} s", report.wall_clock_seconds);

    let mut frozen = (*registry).clone();
    frozen.set_params(&task, report.final_params.clone());
    let mut pipeline = EnginePipeline::from_spec(&spec).map_err(|e| ScenarioError::Runtime(e.to_string()))?;
    let rate = evaluate(&frozen, &mut pipeline, &s.execute_sequence(), s.episodes, config.seed)
        .map_err(|e| ScenarioError::Runtime(e.to_string()))?;
    let evaluation = EvaluationSummary::new(s.episodes, (rate * s.episodes as f64).round() as u64);

    let out = loaded.out_dir(opts);
    create_out_dir(&out)?;
    let metrics_path = out.join(&s.output.metrics);
    let mut metrics = String::new();
    for it in &report.iterations {
        metrics.push_str(&canonical_line(it)?);
    }
    metrics.push_str(&canonical_line(&FinalLine {
        final_params: &report.final_params,
        evaluation: &evaluation,
    })?);
    fs::write(&metrics_path, metrics).map_err(io_err(&metrics_path))?;

    let params_path = out.join(&s.output.params);
    ParamsFile {
        family: family.name.clone(),
        dim: family.dim,
        params: report.final_params.clone(),
    }
    .write(&params_path)?;
    Ok(TrainOutcome {
        report,
        evaluation,
        params_path,
    })
}
