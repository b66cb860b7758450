//! The `loa` command line: `fit`, `rank`, `eval` and `synth`.
//!
//! Settings resolve as flag, then `LOA_*` environment variable, then config
//! file key, then built-in default.

mod config;
pub mod formats;

use std::collections::{BTreeMap, BTreeSet};
use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::json;
use thiserror::Error;

pub use config::{RunConfig, UncertaintyConfig};
pub use formats::{
    read_report, read_scene, read_truth, write_report, write_scene, write_truth, FormatError, ParsedScene,
};

use crate::datagen::metrics::{rankings_by_scene, BatchMetrics, MetricError, Ranked, TruthKind};
use crate::datagen::{evaluate_rankings, generate, ConfigError, GeneratorConfig, GroundTruthErrors};
use crate::dists::{fit_from_scenes, load_model, save_model, DistError};
use crate::engine::baselines::{ma_ranking, uncertainty_ranking, MaOrder};
use crate::engine::{rank, Application, ComponentKind, EngineError, ErrorReport, RankOptions};
use crate::features::{FeatureError, FeatureRegistry};
use crate::scene::Scene;

pub const DEFAULT_K: usize = 10;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("config: {0}")]
    Config(String),
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("{path}: {source}")]
    Format { path: PathBuf, source: FormatError },
    #[error(transparent)]
    Dist(#[from] DistError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Generator(#[from] ConfigError),
    #[error("id mismatch: {0}")]
    Mismatch(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Config(_) => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "loa", version, about = "Rank perception labels and predictions by learned plausibility")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit feature distributions from labeled scenes.
    Fit(FitArgs),
    /// Rank the components of scenes for one application.
    Rank(RankArgs),
    /// Score a report against truth sidecars, next to the baselines.
    Eval(EvalArgs),
    /// Write synthetic scenes and their truth sidecars.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
struct FitArgs {
    #[arg(long, env = "LOA_CONFIG")]
    config: Option<PathBuf>,
    /// Model file to write.
    #[arg(long, env = "LOA_OUT")]
    out: PathBuf,
    #[arg(required = true)]
    scenes: Vec<PathBuf>,
}

#[derive(Debug, Args)]
struct RankArgs {
    #[arg(long, env = "LOA_CONFIG")]
    config: Option<PathBuf>,
    #[arg(long, env = "LOA_MODEL")]
    model: PathBuf,
    /// missing-tracks, missing-obs or model-errors.
    #[arg(long, env = "LOA_APP")]
    app: Option<String>,
    /// Rows of the printed table.
    #[arg(long, env = "LOA_K", value_parser = clap::value_parser!(u64).range(1..))]
    k: Option<u64>,
    /// Report file to write.
    #[arg(long, env = "LOA_OUT")]
    out: PathBuf,
    #[arg(required = true)]
    scenes: Vec<PathBuf>,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long, env = "LOA_CONFIG")]
    config: Option<PathBuf>,
    #[arg(long, env = "LOA_REPORT")]
    report: PathBuf,
    /// Truth sidecars, one per scene in the report.
    #[arg(long, num_args = 1.., required = true)]
    truth: Vec<PathBuf>,
    /// Scene files; when given, the baselines are scored too.
    #[arg(long, num_args = 1..)]
    scenes: Vec<PathBuf>,
    #[arg(long, env = "LOA_K", value_parser = clap::value_parser!(u64).range(1..))]
    k: Option<u64>,
    /// Seed of the random-order baseline.
    #[arg(long, env = "LOA_SEED")]
    seed: Option<u64>,
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// Generator config; defaults apply when omitted.
    #[arg(long, env = "LOA_CONFIG")]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, env = "LOA_OUT")]
    out: PathBuf,
    /// First seed; overrides the config.
    #[arg(long, env = "LOA_SEED")]
    seed: Option<u64>,
    /// Number of scenes; overrides the config.
    #[arg(long)]
    count: Option<usize>,
}

/// Runs the CLI with the process's stdout and stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_with(args, &mut stdout.lock(), &mut stderr.lock())
}

/// Runs the CLI and returns the exit status: 0 on success, 1 on a runtime
/// failure, 2 on a usage or config error.
pub fn run_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let text = e.render().to_string();
            let _ = if code == 0 { out.write_all(text.as_bytes()) } else { err.write_all(text.as_bytes()) };
            return code;
        }
    };
    let result = match cli.command {
        Command::Fit(a) => cmd_fit(a, out, err),
        Command::Rank(a) => cmd_rank(a, out, err),
        Command::Eval(a) => cmd_eval(a, out, err),
        Command::Synth(a) => cmd_synth(a, out),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| io_err(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| io_err(path, e))
}

fn load_config(path: Option<&Path>) -> Result<RunConfig, CliError> {
    match path {
        Some(p) => RunConfig::from_toml(&read_text(p)?).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", p.display())),
            other => other,
        }),
        None => Ok(RunConfig::default()),
    }
}

fn load_scenes(paths: &[PathBuf], config: &RunConfig, err: &mut dyn Write) -> Result<Vec<Scene>, CliError> {
    let mut scenes = Vec::with_capacity(paths.len());
    let mut seen = BTreeSet::new();
    for p in paths {
        let parsed = read_scene(&read_text(p)?, &config.association).map_err(|source| CliError::Format {
            path: p.clone(),
            source,
        })?;
        for w in &parsed.warnings {
            let _ = writeln!(err, "warning: {}: {w}", p.display());
        }
        if !seen.insert(parsed.scene.scene_id.clone()) {
            return Err(CliError::Usage(format!("scene `{}` given twice", parsed.scene.scene_id)));
        }
        scenes.push(parsed.scene);
    }
    Ok(scenes)
}

fn select_specs(registry: &FeatureRegistry, names: &[String]) -> Result<Vec<crate::features::FeatureSpec>, CliError> {
    registry.select(names).map_err(|e| match e {
        FeatureError::Unknown(name) => CliError::Config(format!("unknown feature `{name}`")),
        other => CliError::Config(other.to_string()),
    })
}

fn cmd_fit(args: FitArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    let config = load_config(args.config.as_deref())?;
    let scenes = load_scenes(&args.scenes, &config, err)?;
    let registry = FeatureRegistry::builtin();
    let specs = select_specs(&registry, &config.fit_features)?;
    let model = fit_from_scenes(&scenes, &specs, &config.fit)?;
    save_model(&model, &args.out)?;
    let _ = writeln!(out, "{:<16} {:<12} {:<12} {:>8}", "feature", "class", "family", "samples");
    for (key, dist) in &model.entries {
        let class = key.class.as_deref().unwrap_or("*");
        let _ = writeln!(
            out,
            "{:<16} {:<12} {:<12} {:>8}",
            key.feature,
            class,
            dist.family_name(),
            dist.sample_count
        );
    }
    for (feature, classes) in &model.metadata.fallback_classes {
        let _ = writeln!(out, "fallback {feature}: {} use the pooled fit", classes.join(", "));
    }
    let _ = writeln!(
        out,
        "fitted {} distributions from {} scenes -> {}",
        model.entries.len(),
        scenes.len(),
        args.out.display()
    );
    Ok(())
}

fn resolve_application(flag: Option<&str>, config: &RunConfig) -> Result<Application, CliError> {
    let name = flag
        .or(config.app.as_deref())
        .ok_or_else(|| CliError::Usage("no application given; pass --app or set `app` in the config".into()))?;
    name.parse::<Application>()
        .map_err(|_| CliError::Usage(format!("unknown application `{name}` (expected missing-tracks, missing-obs or model-errors)")))
}

fn cmd_rank(args: RankArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    let config = load_config(args.config.as_deref())?;
    let app = resolve_application(args.app.as_deref(), &config)?;
    let k = args.k.map(|k| k as usize).or(config.k).unwrap_or(DEFAULT_K);
    let model = load_model(&args.model)?;
    let scenes = load_scenes(&args.scenes, &config, err)?;
    let options = RankOptions {
        normalization: config.normalization,
        features: config.features.clone(),
        score_hook: None,
    };
    let report = rank(&scenes, &model, &FeatureRegistry::builtin(), app, &options)?;
    write_text(&args.out, &write_report(&report))?;
    print_table(out, &report, k);
    Ok(())
}

fn print_table(out: &mut dyn Write, report: &ErrorReport, k: usize) {
    let _ = writeln!(out, "{:>4} {:>10} {:<12} {:<16} {:<40}", "rank", "score", "class", "scene", "id");
    for (i, e) in report.entries.iter().take(k).enumerate() {
        let _ = writeln!(
            out,
            "{:>4} {:>10.4} {:<12} {:<16} {:<40}",
            i + 1,
            e.score,
            e.class_key,
            e.scene_id,
            e.id
        );
    }
    let _ = writeln!(
        out,
        "{}: {} ranked, {} excluded, {} candidates",
        report.application,
        report.len(),
        report.excluded_count,
        report.candidate_count
    );
}

fn truth_kind(app: Application) -> TruthKind {
    match app {
        Application::MissingTracks => TruthKind::MissingTrack,
        Application::MissingObservations => TruthKind::MissingObservation,
        Application::ModelErrors => TruthKind::GhostTrack,
    }
}

/// Checks that the report, truth and scene files describe the same scenes
/// and that every ranked id exists in its scene's truth id space.
fn check_ids(report: &ErrorReport, truths: &BTreeMap<String, GroundTruthErrors>) -> Result<(), CliError> {
    let reported: BTreeSet<&str> = report.scene_ids.iter().map(String::as_str).collect();
    let truthed: BTreeSet<&str> = truths.keys().map(String::as_str).collect();
    if reported != truthed {
        let missing: Vec<_> = reported.difference(&truthed).collect();
        let extra: Vec<_> = truthed.difference(&reported).collect();
        return Err(CliError::Mismatch(format!(
            "report scenes without truth: {missing:?}; truth scenes not in report: {extra:?}"
        )));
    }
    for e in &report.entries {
        let truth = truths
            .get(&e.scene_id)
            .ok_or_else(|| CliError::Mismatch(format!("entry `{}` names unreported scene `{}`", e.id, e.scene_id)))?;
        let space = match e.kind {
            ComponentKind::Track => &truth.track_ids,
            ComponentKind::Bundle => &truth.bundle_ids,
            ComponentKind::Observation => {
                return Err(CliError::Mismatch("observation reports have no truth id space".into()))
            }
        };
        if !space.contains(&e.id) {
            return Err(CliError::Mismatch(format!(
                "{:?} `{}` is not in the truth of scene `{}`",
                e.kind, e.id, e.scene_id
            )));
        }
    }
    Ok(())
}

fn metrics_or_none(
    rankings: &BTreeMap<String, Vec<Ranked>>,
    truths: &[GroundTruthErrors],
    kind: TruthKind,
    k: usize,
) -> Result<Option<BatchMetrics>, CliError> {
    match evaluate_rankings(rankings, truths, kind, k) {
        Ok(m) => Ok(Some(m)),
        Err(MetricError::EmptyTruth) => Ok(None),
        Err(e) => Err(e.into()),
    }
}

fn as_ranked(items: Vec<(String, String)>) -> Vec<Ranked> {
    items.into_iter().map(|(id, class_key)| Ranked { id, class_key }).collect()
}

fn cmd_eval(args: EvalArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    let config = load_config(args.config.as_deref())?;
    let k = args.k.map(|k| k as usize).or(config.k).unwrap_or(DEFAULT_K);
    let seed = args.seed.or(config.seed).unwrap_or(0);
    let report = read_report(&read_text(&args.report)?).map_err(|source| CliError::Format {
        path: args.report.clone(),
        source,
    })?;
    let app: Application = report.application.parse()?;
    let kind = truth_kind(app);

    let mut truths = BTreeMap::new();
    for p in &args.truth {
        let t = read_truth(&read_text(p)?).map_err(|source| CliError::Format {
            path: p.clone(),
            source,
        })?;
        if truths.insert(t.scene_id.clone(), t).is_some() {
            return Err(CliError::Usage(format!("{}: duplicate truth for a scene", p.display())));
        }
    }
    check_ids(&report, &truths)?;
    let truth_list: Vec<GroundTruthErrors> = truths.values().cloned().collect();

    let mut rows: Vec<(&str, Option<BatchMetrics>)> = Vec::new();
    rows.push(("engine", metrics_or_none(&rankings_by_scene(&report), &truth_list, kind, k)?));
    if !args.scenes.is_empty() {
        let scenes = load_scenes(&args.scenes, &config, err)?;
        let ids: BTreeSet<&str> = scenes.iter().map(|s| s.scene_id.as_str()).collect();
        if ids != truths.keys().map(String::as_str).collect() {
            return Err(CliError::Mismatch("scene files and truth files cover different scenes".into()));
        }
        let baseline = |f: &dyn Fn(&Scene) -> Vec<(String, String)>| {
            scenes
                .iter()
                .map(|s| (s.scene_id.clone(), as_ranked(f(s))))
                .collect::<BTreeMap<_, _>>()
        };
        let random = baseline(&|s| ma_ranking(s, app, MaOrder::Random(seed)));
        let confidence = baseline(&|s| ma_ranking(s, app, MaOrder::Confidence));
        let u = &config.uncertainty;
        let uncertainty = baseline(&|s| uncertainty_ranking(s, app.target(), u.threshold, u.band));
        rows.push(("ma_random", metrics_or_none(&random, &truth_list, kind, k)?));
        rows.push(("ma_confidence", metrics_or_none(&confidence, &truth_list, kind, k)?));
        rows.push(("uncertainty", metrics_or_none(&uncertainty, &truth_list, kind, k)?));
    }

    let _ = writeln!(out, "{:<16} {:>8} {:>12}", "method", format!("P@{k}"), format!("R@{k}/class"));
    for (name, m) in &rows {
        match m {
            Some(m) => {
                let _ = writeln!(out, "{name:<16} {:>8.3} {:>12.3}", m.precision_at_k, m.recall_per_class_at_k);
            }
            None => {
                let _ = writeln!(out, "{name:<16} {:>8} {:>12}", "n/a", "n/a");
            }
        }
    }
    let summary = json!({
        "record": "summary",
        "application": report.application,
        "truth_kind": kind,
        "k": k,
        "scenes": truth_list.len(),
        "methods": rows.iter().map(|(n, m)| (n.to_string(), json!(m))).collect::<serde_json::Map<_, _>>(),
    });
    let _ = writeln!(out, "{summary}");
    Ok(())
}

fn cmd_synth(args: SynthArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let mut config = match &args.config {
        Some(p) => GeneratorConfig::from_toml(&read_text(p)?).map_err(|e| match e {
            ConfigError::Parse(m) => CliError::Config(format!("{}: {m}", p.display())),
            other => CliError::Config(format!("{}: {other}", p.display())),
        })?,
        None => GeneratorConfig::default(),
    };
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(n) = args.count {
        config.scene_count = n;
    }
    fs::create_dir_all(&args.out).map_err(|e| io_err(&args.out, e))?;
    let base = config.seed;
    for i in 0..config.scene_count {
        config.seed = base + i as u64;
        let g = generate(&config)?;
        let id = &g.scene.scene_id;
        let scene_path = args.out.join(format!("{id}.jsonl"));
        let truth_path = args.out.join(format!("{id}.truth.json"));
        write_text(&scene_path, &write_scene(&g.scene))?;
        write_text(&truth_path, &write_truth(&g.truth))?;
        let _ = writeln!(
            out,
            "{id}: {} observations, {} tracks, {} missing tracks, {} missing observations, {} ghost tracks",
            g.scene.observation_count(),
            g.scene.tracks().len(),
            g.truth.missing_track.len(),
            g.truth.missing_observation.len(),
            g.truth.ghost_track.len()
        );
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_capture(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = run_with(std::iter::once("loa").chain(args.iter().copied()), &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn fit_without_scenes_is_a_usage_error() {
        let (code, _, err) = run_capture(&["fit", "--out", "m.json"]);
        assert_eq!(code, 2, "{err}");
    }

    #[test]
    fn zero_k_is_a_usage_error() {
        let (code, _, _) = run_capture(&["eval", "--report", "r", "--truth", "t", "--k", "0"]);
        assert_eq!(code, 2);
    }

    #[test]
    fn unknown_application_is_rejected() {
        let c = RunConfig::default();
        assert!(resolve_application(Some("ghosts"), &c).is_err());
        assert_eq!(resolve_application(Some("missing-obs"), &c).unwrap(), Application::MissingObservations);
    }
}
