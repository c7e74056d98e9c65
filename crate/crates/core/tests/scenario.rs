use std::fs;

use taskseq_core::engines::{Backend, EngineRole};
use taskseq_core::scenario::{
    load_scenario, parse_scenario, run_scenario, serialize_scenario, validate_scenario, ParamsFile,
    RunOptions, ScenarioMode, SCENARIO_VERSION,
};
use taskseq_core::sequencer::RewardConfig;
use taskseq_core::tasks::{GraspPolicyParams, GRASP_FAMILY, GRASP_PARAM_DIM};

const FIVE_TASK: &str = r#"{
  "version": 1,
  "seed": 11,
  "mode": "execute",
  "sequence": ["grasp", "pick", "bring", "place", "release"],
  "tasks": [
    {"id": "grasp", "model": "grasp", "params_file": "grasp.params"},
    {"id": "pick", "model": "pick"},
    {"id": "bring", "model": "bring", "parameters": {"dx": -0.2, "dy": 0.2}},
    {"id": "place", "model": "place"},
    {"id": "release", "model": "release"}
  ],
  "actors": {"target-object": {"width": [0.08, 0.08]}},
  "episodes": 5
}"#;

fn messages(text: &str) -> Vec<String> {
    validate_scenario(&parse_scenario(text).unwrap())
        .iter()
        .map(ToString::to_string)
        .collect()
}

#[test]
fn minimal_scenario_gets_defaults() {
    let s = parse_scenario(
        r#"{"version": 1, "seed": 3, "mode": "execute", "sequence": ["g"],
            "tasks": [{"id": "g", "model": "grasp", "params_file": "p"}]}"#,
    )
    .unwrap();
    assert_eq!(s.version, SCENARIO_VERSION);
    assert_eq!(s.mode, ScenarioMode::Execute);
    assert_eq!(s.reward, RewardConfig::default());
    assert_eq!(s.train.population, 64);
    assert_eq!(s.episodes, 1);
    assert_eq!(s.output.trajectory, "trajectory.log");
    assert!(s.engines.is_empty() && s.actors.is_empty());
}

#[test]
fn structural_errors_are_parse_errors() {
    let dup = "{\"version\": 1, \"seed\": 0, \"mode\": \"execute\", \"sequence\": [],\n \"tasks\": [{\"id\": \"a\", \"model\": \"pick\"},\n {\"id\": \"a\", \"model\": \"bring\"}]}";
    let e = parse_scenario(dup).unwrap_err();
    assert!(e.message.contains("\"a\"") && e.message.contains("duplicate"), "{e}");
    assert_eq!(e.line, 3);

    let e = parse_scenario(r#"{"version": 1, "seed": 0, "mode": "train", "sequence": [], "tasks": []}"#)
        .unwrap_err();
    assert!(e.message.contains("train_task"), "{e}");

    let e = parse_scenario(r#"{"version": 1, "seed": 0, "mode": "execute", "sequence": ["x"], "tasks": []}"#)
        .unwrap_err();
    assert!(e.message.contains("sequence"), "{e}");

    let e = parse_scenario(r#"{"version": 1, "seed": 0, "mode": "execute", "sequence": [], "tasks": [], "sead": 1}"#)
        .unwrap_err();
    assert!(e.message.contains("sead"), "{e}");
    assert_eq!(e.line, 1);
}

#[test]
fn validation_diagnostics() {
    assert_eq!(messages(FIVE_TASK), Vec::<String>::new());

    let pick_alone = r#"{"version": 1, "seed": 0, "mode": "execute", "sequence": ["pick"],
        "tasks": [{"id": "pick", "model": "pick"}]}"#;
    let m = messages(pick_alone);
    assert_eq!(m.len(), 1);
    assert!(m[0].contains("pick requires end-effector attachment"), "{m:?}");

    let fly = r#"{"version": 1, "seed": 0, "mode": "execute", "sequence": ["f"],
        "tasks": [{"id": "f", "model": "fly"}]}"#;
    let m = messages(fly);
    assert!(m.iter().any(|d| d.contains("fly")), "{m:?}");

    let gap = r#"{"version": 1, "seed": 0, "mode": "execute", "sequence": ["g", "r", "p"],
        "tasks": [{"id": "g", "model": "grasp", "params_file": "x"},
                  {"id": "r", "model": "release"}, {"id": "p", "model": "pick"}]}"#;
    let m = messages(gap);
    assert!(m.iter().any(|d| d.contains("pick requires") && d.contains("release")), "{m:?}");

    let endpoint = FIVE_TASK.replace("\"episodes\"", "\"engines\": {\"physics\": {\"remote\": \"host:99999\"}}, \"episodes\"");
    let m = messages(&endpoint);
    assert!(m.iter().any(|d| d.contains("engines.physics")), "{m:?}");

    let no_params = FIVE_TASK.replace(", \"params_file\": \"grasp.params\"", "");
    assert!(messages(&no_params).iter().any(|d| d.contains("params_file")));
}

#[test]
fn canonical_serialization_round_trips() {
    let mut s = parse_scenario(FIVE_TASK).unwrap();
    s.engines.insert(EngineRole::Physics, Backend::Remote("127.0.0.1:7471".into()));
    s.reward.alpha = 0.1;
    let text = serialize_scenario(&s);
    let back = parse_scenario(&text).unwrap();
    assert_eq!(back, s);
    assert_eq!(serialize_scenario(&back), text);
}

#[test]
fn run_writes_identical_outputs_for_identical_inputs() {
    let dir = tempfile::tempdir().unwrap();
    let params = ParamsFile {
        family: GRASP_FAMILY.into(),
        dim: GRASP_PARAM_DIM,
        params: GraspPolicyParams::hand_built().weights.to_vec(),
    };
    params.write(&dir.path().join("grasp.params")).unwrap();
    let path = dir.path().join("five.json");
    fs::write(&path, FIVE_TASK).unwrap();
    let loaded = load_scenario(&path).unwrap();

    let mut outputs = Vec::new();
    for name in ["a", "b"] {
        let opts = RunOptions {
            out_dir: Some(dir.path().join(name)),
            ..RunOptions::default()
        };
        let summary = run_scenario(&loaded, &opts).unwrap();
        assert_eq!(summary.episodes, 5);
        assert_eq!(summary.successes, 5);
        let read = |f: &str| fs::read(dir.path().join(name).join(f)).unwrap();
        outputs.push((read("trajectory.log"), read("metrics.log")));
    }
    assert_eq!(outputs[0], outputs[1]);

    let log = String::from_utf8(outputs[0].0.clone()).unwrap();
    let summaries = log.lines().filter(|l| l.starts_with("{\"summary\"")).count();
    assert_eq!(summaries, 5);

    // A params file for another family or dimension is refused.
    let wrong = ParamsFile {
        family: "other".into(),
        ..params
    };
    wrong.write(&dir.path().join("grasp.params")).unwrap();
    let err = load_scenario(&path).unwrap().registry().unwrap_err();
    assert_eq!(err.exit_code(), 1);
}
