//! Acceptance suite: one PASS/FAIL line per criterion. Scenario files are
//! copied into a scratch directory and driven through the `taskseq` binary;
//! oracles and replays use the library directly.

use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::fs;
use std::io::{BufRead, BufReader};
use std::panic::{self, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Stdio};
use std::time::Instant;

use rand::Rng;
use rand_distr::StandardNormal;
use serde_json::Value;
use taskseq_core::engines::{inverse_kinematics, EnginePipeline};
use taskseq_core::learning::{cem_train, evaluate_params, evaluation_seed, EpisodeObjective, TrainConfig, TrainError};
use taskseq_core::scenario::{load_scenario, parse_scenario, LoadedScenario};
use taskseq_core::sequencer::{Sequencer, StepLog};
use taskseq_core::tasks::{circle_fit, door_act, DoorEstimatorState, DoorSettings, DOOR_PROBE_STEPS, GRASP_PARAM_DIM};
use taskseq_core::wire::{decode_state, encode_state};
use taskseq_core::world::JointVector;
use taskseq_core::{seed, Pose};

const ORACLE_BUDGET_SECONDS: f64 = 30.0;

type Verdict = Result<String, String>;
type Criterion = (&'static str, fn(&Workspace) -> Verdict);

struct Workspace {
    _tmp: tempfile::TempDir,
    dir: PathBuf,
}

impl Workspace {
    fn new() -> Self {
        let tmp = tempfile::tempdir().unwrap();
        let dir = tmp.path().to_path_buf();
        let shipped = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios");
        for entry in fs::read_dir(shipped).unwrap() {
            let path = entry.unwrap().path();
            if path.extension().is_some_and(|e| e == "json") {
                fs::copy(&path, dir.join(path.file_name().unwrap())).unwrap();
            }
        }
        Self { _tmp: tmp, dir }
    }

    fn path(&self, rel: &str) -> PathBuf {
        self.dir.join(rel)
    }

    fn read(&self, rel: &str) -> Vec<u8> {
        fs::read(self.path(rel)).unwrap_or_else(|e| panic!("{rel}: {e}"))
    }

    /// Runs `taskseq` and returns wall-clock seconds; a non-zero exit is a failure.
    fn taskseq(&self, args: &[&str]) -> Result<f64, String> {
        let started = Instant::now();
        let out = Command::new(env!("CARGO_BIN_EXE_taskseq"))
            .args(args)
            .current_dir(&self.dir)
            .output()
            .map_err(|e| e.to_string())?;
        if !out.status.success() {
            return Err(format!(
                "taskseq {} exited {:?}: {}",
                args.join(" "),
                out.status.code(),
                String::from_utf8_lossy(&out.stderr).trim()
            ));
        }
        Ok(started.elapsed().as_secs_f64())
    }

    fn load(&self, file: &str) -> LoadedScenario {
        load_scenario(&self.path(file)).unwrap()
    }
}

/// `(successes, episodes)` from the evaluation line of a metrics log.
fn evaluation(metrics: &[u8]) -> (u64, u64) {
    let text = String::from_utf8_lossy(metrics);
    let line = text.lines().last().expect("metrics line");
    let v: Value = serde_json::from_str(line).unwrap();
    let e = &v["evaluation"];
    (e["successes"].as_u64().unwrap(), e["episodes"].as_u64().unwrap())
}

/// Steps of each episode in a trajectory log.
fn episodes(log: &[u8]) -> Vec<Vec<StepLog>> {
    let mut out = vec![Vec::new()];
    for line in String::from_utf8_lossy(log).lines() {
        if line.starts_with("{\"summary\"") {
            out.push(Vec::new());
        } else {
            out.last_mut().unwrap().push(serde_json::from_str(line).unwrap());
        }
    }
    out.pop();
    out
}

fn check(cond: bool, detail: String) -> Verdict {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn criterion_1(ws: &Workspace) -> Verdict {
    let serial = ws.taskseq(&["--workers", "1", "train", "grasp_train.json"])?;
    let parallel = ws.taskseq(&["--workers", "4", "--out", "runs/grasp_w4", "train", "grasp_train.json"])?;
    let (ok, n) = evaluation(&ws.read("runs/grasp/metrics.log"));
    let rate = ok as f64 / n as f64;

    let loaded = ws.load("grasp_train.json");
    let registry = loaded.registry().map_err(|e| e.to_string())?;
    let seq = loaded.scenario.execute_sequence();
    let held_out = loaded.scenario.seed;
    let zero = evaluate_params(&registry, "grasp", &[0.0; GRASP_PARAM_DIM], &seq, 100, held_out)
        .map_err(|e| e.to_string())?;
    let mut rng = seed::rng(seed::derive(held_out, &[seed::label("random-baseline")]));
    let mut random = 0.0;
    for i in 0..100 {
        let params: Vec<f64> = (0..GRASP_PARAM_DIM).map(|_| rng.sample(StandardNormal)).collect();
        random += evaluate_params(&registry, "grasp", &params, &seq, 10, seed::derive(held_out, &[i]))
            .map_err(|e| e.to_string())?;
    }
    random /= 100.0;

    let detail = format!(
        "trained {rate:.2} over {n} episodes (>= 0.90); zero {zero:.2} (= 0); random mean {random:.3} (<= 0.40); \
         {serial:.1} s on 1 worker (<= 600), {parallel:.1} s on 4 workers (<= 180)"
    );
    check(
        n == 100 && rate >= 0.90 && zero == 0.0 && random <= 0.40 && serial <= 600.0 && parallel <= 180.0,
        detail,
    )
}

fn criterion_2(ws: &Workspace) -> Verdict {
    let base = parse_scenario(&String::from_utf8_lossy(&ws.read("grasp_train.json"))).unwrap();
    let mut small = parse_scenario(&String::from_utf8_lossy(&ws.read("grasp_train_small_gripper.json"))).unwrap();
    let changed: Vec<String> = small.actors.values().flat_map(|m| m.keys().cloned()).collect();
    small.actors = base.actors.clone();
    small.output = base.output.clone();
    let same_otherwise = small == base;

    ws.taskseq(&["train", "grasp_train_small_gripper.json"])?;
    let (ok, n) = evaluation(&ws.read("runs/grasp_small_gripper/metrics.log"));
    let rate = ok as f64 / n as f64;
    check(
        same_otherwise && rate >= 0.90,
        format!("files differ only in actors {changed:?} and output dir: {same_otherwise}; retrained {rate:.2} (>= 0.90)"),
    )
}

fn criterion_3(ws: &Workspace) -> Verdict {
    ws.taskseq(&["run", "door_open.json"])?;
    let (ok, n) = evaluation(&ws.read("runs/door/metrics.log"));
    let logged = episodes(&ws.read("runs/door/trajectory.log"));

    let loaded = ws.load("door_open.json");
    let registry = loaded.registry().map_err(|e| e.to_string())?;
    let model = &registry.get("door").unwrap().model;
    let force_limit = model.parameter("force_limit").unwrap();
    let settings = DoorSettings {
        target_angle: model.parameter("target_angle_deg").unwrap().to_radians(),
        arc_step: model.parameter("arc_step").unwrap(),
        probe_steps: DOOR_PROBE_STEPS,
    };
    let bootstrap = DOOR_PROBE_STEPS + 1;

    let mut force_violations = 0;
    let mut worst_radius: f64 = 0.0;
    let mut replay_mismatches = 0;
    let mut pipeline = EnginePipeline::local();
    let mut sequencer = Sequencer::new(&registry, &mut pipeline);
    for (i, steps) in logged.iter().enumerate() {
        force_violations += steps
            .iter()
            .skip(bootstrap)
            .filter(|s| s.world.wrist_force > force_limit || s.necessary_cost != 0.0)
            .count();

        // Replay the estimator on the logged end-effector path to recover its final radius.
        let result = sequencer
            .run_sequence(&loaded.scenario.execute_sequence(), None, evaluation_seed(loaded.scenario.seed, i as u64))
            .map_err(|e| e.to_string())?;
        if result.trajectory != *steps {
            replay_mismatches += 1;
        }
        let start = &result.spans[0].start;
        let (_, true_radius) = start.hinge_of(start.target.as_deref().unwrap()).unwrap();
        let mut est = DoorEstimatorState::default();
        let mut ee = start.ee;
        for s in steps {
            let (action, next) = door_act(&est, &s.observation, &ee, &settings);
            let command = if action.terminate { taskseq_core::engines::Command::zero() } else { action.command.clamped() };
            if command != s.command || action.terminate != s.terminate {
                replay_mismatches += 1;
            }
            est = next;
            ee = s.world.ee;
        }
        let r = est.radius_est.unwrap_or(f64::INFINITY);
        worst_radius = worst_radius.max((r - true_radius).abs() / true_radius);
    }
    let hinge = loaded.scenario.actors.values().find_map(|m| m.get("hinge_radius")).copied();
    check(
        ok >= 95 && n == 100 && force_violations == 0 && worst_radius < 0.01 && replay_mismatches == 0,
        format!(
            "{ok}/{n} within 2 deg of 60 deg (>= 95); hinge radius {hinge:?}; {force_violations} steps over {force_limit} N \
             after the {bootstrap}-step bootstrap; worst radius error {:.4}% (< 1%); estimator replay mismatches {replay_mismatches}",
            worst_radius * 100.0
        ),
    )
}

fn criterion_4(ws: &Workspace) -> Verdict {
    let before = ws.read("runs/grasp/policy.params");
    ws.taskseq(&["run", "grasp_pick_bring_place_release.json"])?;
    let after = ws.read("runs/grasp/policy.params");
    let (ok, n) = evaluation(&ws.read("runs/five_task/metrics.log"));
    check(
        ok >= 85 && n == 100 && before == after,
        format!("{ok}/{n} Success (>= 85); policy file unchanged: {}", before == after),
    )
}

fn criterion_5(ws: &Workspace) -> Verdict {
    let mut details = Vec::new();
    let mut pass = true;
    let mut blocks = BTreeSet::new();
    for (file, dir) in [("pick_and_place.json", "pick_and_place"), ("pick_and_throw.json", "pick_and_throw")] {
        ws.taskseq(&["run", file])?;
        let (ok, n) = evaluation(&ws.read(&format!("runs/{dir}/metrics.log")));
        pass &= ok >= 85 && n == 100;
        details.push(format!("{dir} {ok}/{n}"));
        for t in &ws.load(file).scenario.tasks {
            blocks.insert(t.model.clone());
        }
    }
    let library: BTreeSet<String> = ["grasp", "pick", "bring", "place", "release"].map(String::from).into();
    pass &= blocks.is_subset(&library);
    check(pass, format!("{} (>= 85 each); blocks used {blocks:?}", details.join(", ")))
}

struct Server(Child);

impl Drop for Server {
    fn drop(&mut self) {
        let _ = self.0.kill();
        let _ = self.0.wait();
    }
}

fn criterion_6(ws: &Workspace) -> Verdict {
    let mut child = Command::new(env!("CARGO_BIN_EXE_taskseq"))
        .args(["serve-engine", "--role", "physics", "--port", "0"])
        .stdout(Stdio::piped())
        .spawn()
        .map_err(|e| e.to_string())?;
    let stdout = child.stdout.take().unwrap();
    let server = Server(child);
    let mut banner = String::new();
    BufReader::new(stdout).read_line(&mut banner).map_err(|e| e.to_string())?;
    let addr = banner.trim().rsplit(' ').next().unwrap_or_default().to_string();

    let text = String::from_utf8_lossy(&ws.read("five_task_remote_physics.json")).replace("127.0.0.1:7471", &addr);
    fs::write(ws.path("five_task_remote_physics.json"), text).unwrap();
    ws.taskseq(&["run", "five_task_remote_physics.json"])?;
    drop(server);

    let local = ws.read("runs/five_task/trajectory.log");
    let remote = ws.read("runs/five_task_remote/trajectory.log");
    check(
        local == remote,
        format!("remote physics at {addr}: {} vs {} bytes, identical: {}", remote.len(), local.len(), local == remote),
    )
}

fn criterion_7(ws: &Workspace) -> Verdict {
    ws.taskseq(&["--out", "runs/five_task_again", "run", "grasp_pick_bring_place_release.json"])?;
    ws.taskseq(&["--out", "runs/door_again", "run", "door_open.json"])?;
    let pairs = [
        ("runs/five_task/trajectory.log", "runs/five_task_again/trajectory.log"),
        ("runs/five_task/metrics.log", "runs/five_task_again/metrics.log"),
        ("runs/door/trajectory.log", "runs/door_again/trajectory.log"),
        ("runs/door/metrics.log", "runs/door_again/metrics.log"),
        ("runs/grasp/metrics.log", "runs/grasp_w4/metrics.log"),
        ("runs/grasp/policy.params", "runs/grasp_w4/policy.params"),
    ];
    let differing: Vec<&str> = pairs.iter().filter(|(a, b)| ws.read(a) != ws.read(b)).map(|(a, _)| *a).collect();
    check(
        differing.is_empty(),
        format!("{} output pairs compared (run twice; train on 1 vs 4 workers); differing: {differing:?}", pairs.len()),
    )
}

fn fk(q: [f64; 3]) -> (f64, f64, f64) {
    let (a, b, c) = (q[0], q[0] + q[1], q[0] + q[1] + q[2]);
    (a.cos() + b.cos() + 0.5 * c.cos(), a.sin() + b.sin() + 0.5 * c.sin(), c)
}

fn wrap(a: f64) -> f64 {
    (a + PI).rem_euclid(2.0 * PI) - PI
}

struct Quadratic;

impl EpisodeObjective for Quadratic {
    fn episode_return(&mut self, params: &[f64], _seed: u64) -> Result<f64, TrainError> {
        Ok(-(params[0] - 3.0).powi(2))
    }
}

fn criterion_8(ws: &Workspace) -> Verdict {
    let mut rng = seed::rng(8);
    let mut times = Vec::new();

    let t = Instant::now();
    let mut ik_worst: f64 = 0.0;
    for _ in 0..1000 {
        let q: [f64; 3] = std::array::from_fn(|_| rng.random_range(-PI..PI));
        let target = fk(q);
        let start = JointVector(std::array::from_fn(|_| rng.random_range(-PI..PI)));
        let sol = inverse_kinematics(&Pose::new(target.0, target.1, wrap(target.2)), &start)
            .map_err(|e| format!("IK failed: {e:?}"))?;
        let (x, y, th) = fk(sol.0);
        ik_worst = ik_worst.max((x - target.0).hypot(y - target.1) + wrap(th - target.2).abs());
    }
    times.push(t.elapsed().as_secs_f64());

    let t = Instant::now();
    let mut circle_worst: f64 = 0.0;
    for _ in 0..1000 {
        let c = [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)];
        let r: f64 = rng.random_range(0.1..2.0);
        let a0: f64 = rng.random_range(-PI..PI);
        let n = rng.random_range(3..12);
        let pts: Vec<[f64; 2]> = (0..n)
            .map(|i| {
                let a = a0 + 1.5 * i as f64 / n as f64;
                [c[0] + r * a.cos(), c[1] + r * a.sin()]
            })
            .collect();
        let (fc, fr) = circle_fit(&pts).map_err(|e| format!("circle fit failed: {e:?}"))?;
        circle_worst = circle_worst.max((fc[0] - c[0]).abs().max((fc[1] - c[1]).abs()).max((fr - r).abs()));
    }
    times.push(t.elapsed().as_secs_f64());

    // Reachable states: worlds logged by the five-task and door runs.
    let t = Instant::now();
    let mut worlds: Vec<_> = episodes(&ws.read("runs/five_task/trajectory.log"))
        .into_iter()
        .chain(episodes(&ws.read("runs/door/trajectory.log")))
        .flatten()
        .map(|s| s.world)
        .collect();
    let stride = (worlds.len() / 1000).max(1);
    worlds = worlds.into_iter().step_by(stride).take(1000).collect();
    let mut codec_failures = 0;
    for w in &worlds {
        let bytes = encode_state(w).map_err(|e| e.to_string())?;
        let back = decode_state(&bytes).map_err(|e| e.to_string())?;
        if encode_state(&back).map_err(|e| e.to_string())? != bytes || &back != w {
            codec_failures += 1;
        }
    }
    times.push(t.elapsed().as_secs_f64());

    let t = Instant::now();
    let config = TrainConfig {
        iterations: 20,
        episodes_per_candidate: 1,
        seed: 8,
        workers: Some(1),
        ..TrainConfig::default()
    };
    let report = cem_train(|| Ok(Quadratic), 1, &config).map_err(|e| e.to_string())?;
    let cem_error = (report.final_params[0] - 3.0).abs();
    times.push(t.elapsed().as_secs_f64());

    let slowest = times.iter().cloned().fold(0.0, f64::max);
    check(
        ik_worst <= 1e-6
            && circle_worst <= 1e-6
            && worlds.len() == 1000
            && codec_failures == 0
            && cem_error <= 0.01
            && slowest <= ORACLE_BUDGET_SECONDS,
        format!(
            "IK worst residual {ik_worst:.1e} (<= 1e-6); circle fit worst error {circle_worst:.1e} (<= 1e-6); \
             codec {} states, {codec_failures} mismatches; CEM |mu - 3| = {cem_error:.1e} (<= 0.01); \
             suite times {:?} s (<= 30 each)",
            worlds.len(),
            times.iter().map(|t| format!("{t:.2}")).collect::<Vec<_>>()
        ),
    )
}

fn main() {
    let ws = Workspace::new();
    let criteria: [Criterion; 8] = [
        ("grasp training", criterion_1),
        ("actor-configuration reuse", criterion_2),
        ("door open", criterion_3),
        ("learning-to-execution handoff", criterion_4),
        ("recomposition", criterion_5),
        ("backend transparency", criterion_6),
        ("determinism", criterion_7),
        ("oracle suites", criterion_8),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let verdict = panic::catch_unwind(AssertUnwindSafe(|| run(&ws)))
            .unwrap_or_else(|p| Err(format!("panicked: {:?}", p.downcast_ref::<String>().map(String::as_str).or(p.downcast_ref::<&str>().copied()))));
        let (tag, detail) = match verdict {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("criterion {} {tag} {name}: {detail}", i + 1);
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
