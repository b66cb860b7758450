mod common;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use loa::cli::{read_report, write_report, write_scene};
use loa::datagen::{generate, GeneratorConfig};
use loa::engine::ErrorReport;

fn loa(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_loa"));
    for (k, _) in std::env::vars() {
        if k.starts_with("LOA_") {
            cmd.env_remove(k);
        }
    }
    cmd.envs(env.iter().copied()).args(args).output().unwrap()
}

fn s(p: &Path) -> String {
    p.to_str().unwrap().to_string()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn files(dir: &Path, suffix: &str) -> Vec<PathBuf> {
    let mut out: Vec<PathBuf> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.to_str().unwrap().ends_with(suffix))
        .collect();
    out.sort();
    out
}

fn strs(paths: &[PathBuf]) -> Vec<String> {
    paths.iter().map(|p| s(p)).collect()
}

/// Synthesizes `count` small scenes and fits a model on them.
fn fixture(dir: &Path, count: usize) -> (Vec<String>, Vec<String>, String) {
    let synth = dir.join("synth");
    let config = dir.join("gen.toml");
    fs::write(&config, "frame_count = 60\nobject_count = 15\n[errors]\nhuman_track_drop = 0.3\n").unwrap();
    let o = loa(&["synth", "--config", &s(&config), "--out", &s(&synth), "--seed", "40", "--count", &count.to_string()], &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    let scenes = strs(&files(&synth, ".jsonl"));
    let truths = strs(&files(&synth, ".truth.json"));
    let model = s(&dir.join("model.json"));
    let mut args = vec!["fit", "--out", &model];
    args.extend(scenes.iter().map(String::as_str));
    let o = loa(&args, &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    (scenes, truths, model)
}

#[test]
fn synth_is_byte_identical_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for d in [&a, &b] {
        let o = loa(&["synth", "--out", &s(d), "--seed", "7", "--count", "2"], &[]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let fa = files(&a, "");
    assert_eq!(fa.len(), 4);
    for p in fa {
        let q = b.join(p.file_name().unwrap());
        assert_eq!(fs::read(&p).unwrap(), fs::read(&q).unwrap(), "{}", p.display());
    }
}

#[test]
fn synth_writes_one_scene_and_truth_per_request() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("gen.toml");
    fs::write(&config, "scene_count = 10\nframe_count = 20\nobject_count = 4\n").unwrap();
    let o = loa(&["synth", "--config", &s(&config), "--out", &s(&dir.path().join("out"))], &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(files(&dir.path().join("out"), ".jsonl").len(), 10);
    assert_eq!(files(&dir.path().join("out"), ".truth.json").len(), 10);
}

#[test]
fn synth_names_the_bad_key() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("gen.toml");
    fs::write(&config, "object_count = -3\n").unwrap();
    let o = loa(&["synth", "--config", &s(&config), "--out", &s(dir.path())], &[]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("object_count"), "{}", stderr(&o));
}

#[test]
fn fit_without_scenes_is_a_usage_error() {
    let o = loa(&["fit", "--out", "model.json"], &[]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn fit_to_unwritable_path_fails() {
    let dir = tempfile::tempdir().unwrap();
    let g = generate(&GeneratorConfig { seed: 1, frame_count: 30, object_count: 8, ..Default::default() }).unwrap();
    let scene = dir.path().join("s.jsonl");
    fs::write(&scene, write_scene(&g.scene)).unwrap();
    let out = dir.path().join("missing-dir").join("model.json");
    let o = loa(&["fit", "--out", &s(&out), &s(&scene)], &[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("missing-dir"), "{}", stderr(&o));
}

#[test]
fn fit_writes_class_keyed_entries() {
    let dir = tempfile::tempdir().unwrap();
    let (_, _, model) = fixture(dir.path(), 3);
    let text = fs::read_to_string(&model).unwrap();
    assert!(text.starts_with("{\n  \"format\": \"loa-model\""));
    for class in ["car", "truck"] {
        assert!(text.contains(&format!("\"feature\": \"volume\",\n      \"class\": \"{class}\"")), "{class}");
    }
}

#[test]
fn clean_scene_gives_an_empty_missing_tracks_report() {
    let dir = tempfile::tempdir().unwrap();
    let (_, _, model) = fixture(dir.path(), 3);
    let config = dir.path().join("clean.toml");
    fs::write(
        &config,
        "frame_count = 40\nobject_count = 10\n[errors]\nhuman_track_drop = 0.0\nhuman_box_drop = 0.0\nghost_rate = 0.0\n",
    )
    .unwrap();
    let clean = dir.path().join("clean");
    assert!(loa(&["synth", "--config", &s(&config), "--out", &s(&clean), "--seed", "3"], &[]).status.success());
    let scene = s(&files(&clean, ".jsonl")[0]);
    let report = s(&dir.path().join("r.jsonl"));
    let o = loa(&["rank", "--model", &model, "--app", "missing-tracks", "--out", &report, &scene], &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(read_report(&fs::read_to_string(&report).unwrap()).unwrap().is_empty());
}

#[test]
fn rank_prints_a_table_and_eval_a_summary() {
    let dir = tempfile::tempdir().unwrap();
    let (scenes, truths, model) = fixture(dir.path(), 3);
    let report = s(&dir.path().join("r.jsonl"));
    let mut args = vec!["rank", "--model", &model, "--app", "missing-tracks", "--k", "5", "--out", &report];
    args.extend(scenes.iter().map(String::as_str));
    let o = loa(&args, &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    let table = stdout(&o);
    assert!(table.starts_with("rank"));
    assert!(table.lines().count() <= 7);

    let mut args = vec!["eval", "--report", &report, "--truth"];
    args.extend(truths.iter().map(String::as_str));
    args.push("--scenes");
    args.extend(scenes.iter().map(String::as_str));
    let o = loa(&args, &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    for method in ["engine", "ma_random", "ma_confidence", "uncertainty"] {
        assert!(out.contains(method), "{method}");
    }
    let summary: serde_json::Value = serde_json::from_str(out.lines().last().unwrap()).unwrap();
    assert_eq!(summary["record"], "summary");
    assert!(summary["methods"]["engine"]["precision_at_k"].as_f64().unwrap() > 0.5);
}

#[test]
fn perfect_report_scores_one() {
    let dir = tempfile::tempdir().unwrap();
    let (scenes, truths, model) = fixture(dir.path(), 2);
    let report_path = dir.path().join("r.jsonl");
    let mut args = vec!["rank", "--model", &model, "--app", "missing-tracks", "--out"];
    let rp = s(&report_path);
    args.push(&rp);
    args.extend(scenes.iter().map(String::as_str));
    assert!(loa(&args, &[]).status.success());

    let truth_sets: Vec<_> = truths
        .iter()
        .map(|t| loa::cli::read_truth(&fs::read_to_string(t).unwrap()).unwrap())
        .collect();
    let report = read_report(&fs::read_to_string(&report_path).unwrap()).unwrap();
    let perfect = ErrorReport {
        entries: report
            .entries
            .iter()
            .filter(|e| truth_sets.iter().any(|t| t.missing_track.contains(&e.id)))
            .cloned()
            .collect(),
        ..report
    };
    assert!(!perfect.is_empty());
    fs::write(&report_path, write_report(&perfect)).unwrap();
    let mut args = vec!["eval", "--report", &rp, "--truth"];
    args.extend(truths.iter().map(String::as_str));
    let o = loa(&args, &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    let engine = stdout(&o).lines().find(|l| l.starts_with("engine")).unwrap().to_string();
    assert!(engine.contains("1.000"), "{engine}");
}

#[test]
fn eval_rejects_zero_k_and_mismatched_ids() {
    let dir = tempfile::tempdir().unwrap();
    let (scenes, truths, model) = fixture(dir.path(), 2);
    let report = s(&dir.path().join("r.jsonl"));
    assert!(loa(&["rank", "--model", &model, "--app", "missing-tracks", "--out", &report, &scenes[0]], &[]).status.success());

    let o = loa(&["eval", "--report", &report, "--truth", &truths[0], "--k", "0"], &[]);
    assert_eq!(o.status.code(), Some(2));

    let o = loa(&["eval", "--report", &report, "--truth", &truths[1]], &[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("id mismatch"), "{}", stderr(&o));
}

#[test]
fn flags_beat_environment_beats_config() {
    let dir = tempfile::tempdir().unwrap();
    let (scenes, _, model) = fixture(dir.path(), 1);
    let config = dir.path().join("run.toml");
    fs::write(&config, "app = \"missing-obs\"\n").unwrap();
    let report = s(&dir.path().join("r.jsonl"));
    let app_of = |o: &Output| {
        assert!(o.status.success(), "{}", stderr(o));
        read_report(&fs::read_to_string(&report).unwrap()).unwrap().application
    };
    let base = ["rank", "--model", &model, "--config", &s(&config), "--out", &report, &scenes[0]];
    assert_eq!(app_of(&loa(&base, &[])), "missing_observations");
    assert_eq!(app_of(&loa(&base, &[("LOA_APP", "model-errors")])), "model_errors");
    let mut flagged = base.to_vec();
    flagged.extend(["--app", "missing-tracks"]);
    assert_eq!(app_of(&loa(&flagged, &[("LOA_APP", "model-errors")])), "missing_tracks");
}

#[test]
fn unknown_application_and_missing_distribution_fail() {
    let dir = tempfile::tempdir().unwrap();
    let scene = dir.path().join("worked.jsonl");
    let model = dir.path().join("m.json");
    fs::write(&scene, write_scene(&common::worked_scene())).unwrap();
    fs::write(&model, common::worked_model().to_json()).unwrap();
    let out = s(&dir.path().join("r.jsonl"));
    let o = loa(&["rank", "--model", &s(&model), "--app", "ghosts", "--out", &out, &s(&scene)], &[]);
    assert_eq!(o.status.code(), Some(2));
    // the worked model has no distance distribution
    let o = loa(&["rank", "--model", &s(&model), "--app", "missing-tracks", "--out", &out, &s(&scene)], &[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("distance"), "{}", stderr(&o));
}

#[test]
fn unknown_scene_fields_warn_but_succeed() {
    let dir = tempfile::tempdir().unwrap();
    let text = write_scene(&common::worked_scene()).replacen("\"record\":\"observation\"", "\"record\":\"observation\",\"ring\":3", 1);
    let scene = dir.path().join("worked.jsonl");
    let model = dir.path().join("m.json");
    let config = dir.path().join("run.toml");
    fs::write(&scene, text).unwrap();
    fs::write(&model, common::worked_model().to_json()).unwrap();
    fs::write(&config, "features = [\"volume\", \"velocity\"]\n").unwrap();
    let out = s(&dir.path().join("r.jsonl"));
    let o = loa(
        &["rank", "--config", &s(&config), "--model", &s(&model), "--app", "missing-tracks", "--out", &out, &s(&scene)],
        &[],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stderr(&o).contains("warning") && stderr(&o).contains("ring"));
    let report = read_report(&fs::read_to_string(&out).unwrap()).unwrap();
    assert!((report.entries[0].score - common::worked_expected()).abs() < 1e-12);
}

#[test]
fn help_exits_zero() {
    let o = loa(&["--help"], &[]);
    assert_eq!(o.status.code(), Some(0));
    for cmd in ["fit", "rank", "eval", "synth"] {
        assert!(stdout(&o).contains(cmd));
    }
}
