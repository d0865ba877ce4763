use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use pmarl::engine::{run_experiment, ExperimentReport, Method, PredictionMode, RunConfig};
use pmarl::fixtures::{regen_manifest, FixtureError, Manifest};
use pmarl::forecast::{mape, predict_day, save_model, train_forecaster};
use pmarl::scenario::{
    load_history, synth_baseload_with, write_history, HistoryWindow, ScenarioConfig, SynthParams,
};

use crate::svg;
use crate::{Common, Experiment};

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Runtime(String),
}

impl CliError {
    pub fn code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) | CliError::Runtime(m) => f.write_str(m),
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn runtime(e: impl fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

fn load_config(common: &Common) -> Result<ScenarioConfig> {
    let path = &common.config;
    if !path.is_file() {
        return Err(CliError::Config(format!(
            "config file not found: {}",
            path.display()
        )));
    }
    let mut cfg = ScenarioConfig::from_toml_file(path)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    if let Some(seed) = common.seed {
        cfg.rng_seed = seed;
    }
    // Absolute, so the echoed config still works from the output directory.
    if let Some(csv) = &cfg.history_csv {
        let abs = fs::canonicalize(csv)
            .map_err(|e| CliError::Config(format!("history csv {}: {e}", csv.display())))?;
        cfg.history_csv = Some(abs);
    }
    Ok(cfg)
}

/// Refuses to clobber any of `files` unless forced; creates `dir`.
fn prepare_out(dir: &Path, files: &[PathBuf], force: bool) -> Result<()> {
    if !force {
        if let Some(f) = files.iter().find(|f| f.exists()) {
            return Err(CliError::Config(format!(
                "{} already exists (use --force to overwrite)",
                f.display()
            )));
        }
    }
    fs::create_dir_all(dir).map_err(|e| runtime(format!("{}: {e}", dir.display())))
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| runtime(format!("{}: {e}", path.display())))
}

fn synth_history(cfg: &ScenarioConfig, days: usize) -> Result<HistoryWindow> {
    let clock = cfg.clock().map_err(|e| CliError::Config(e.to_string()))?;
    let params = SynthParams {
        households: cfg.n_households as f64,
        ..SynthParams::default()
    };
    Ok(synth_baseload_with(days, &clock, cfg.rng_seed, &params))
}

pub fn synth(common: &Common, days: Option<usize>) -> Result<()> {
    let cfg = load_config(common)?;
    let days = days.unwrap_or(cfg.history_days);
    if days == 0 {
        return Err(CliError::Config("--days must be at least 1".into()));
    }
    let path = common.out.join("history.csv");
    prepare_out(&common.out, std::slice::from_ref(&path), common.force)?;
    let h = synth_history(&cfg, days)?;
    let clock = cfg.clock().map_err(runtime)?;
    write_history(&h, &clock, &path).map_err(runtime)?;
    println!("wrote {} days to {}", h.len(), path.display());
    Ok(())
}

pub fn train(common: &Common, history: Option<PathBuf>) -> Result<()> {
    let cfg = load_config(common)?;
    let clock = cfg.clock().map_err(|e| CliError::Config(e.to_string()))?;
    let all = match history.or_else(|| cfg.history_csv.clone()) {
        Some(p) => {
            if !p.is_file() {
                return Err(CliError::Config(format!(
                    "history file not found: {}",
                    p.display()
                )));
            }
            load_history(&p, &clock)
                .map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?
        }
        None => synth_history(&cfg, cfg.history_days + 1)?,
    };
    if all.len() < 3 {
        return Err(CliError::Config(format!(
            "need at least 3 days of history, got {}",
            all.len()
        )));
    }
    let model = common.out.join("forecaster.json");
    prepare_out(&common.out, std::slice::from_ref(&model), common.force)?;

    let held_out = all.last().expect("non-empty").clone();
    let train = all.prefix(all.len() - 1);
    let (net, trace) = train_forecaster(&train, &cfg.forecast, cfg.rng_seed).map_err(runtime)?;
    let f = predict_day(&net, &train, held_out.kind).map_err(runtime)?;
    let err = mape(held_out.samples(), f.samples()).map_err(runtime)?;
    save_model(&net, &model).map_err(runtime)?;
    println!(
        "trained on {} days, best mse {:.6}; held-out day {} mape {:.2}%",
        train.len(),
        trace.best(),
        held_out.date_tag,
        err
    );
    println!("wrote {}", model.display());
    Ok(())
}

pub fn run(exp: &Experiment, methods: Vec<Method>, modes: Vec<PredictionMode>) -> Result<()> {
    let mut cfg = load_config(&exp.common)?;
    if let Some(r) = exp.runs {
        cfg.n_runs = r;
    }
    if let Some(t) = exp.change_threshold {
        cfg.drift.change_threshold_pct = t;
    }
    let rc = RunConfig {
        n_runs: cfg.n_runs,
        scenario: cfg.clone(),
        methods,
        modes,
    };
    rc.validate().map_err(|e| CliError::Config(e.to_string()))?;

    let out = &exp.common.out;
    let echo = out.join("config.toml");
    prepare_out(
        out,
        &[out.join("report.json"), echo.clone()],
        exp.common.force,
    )?;
    let report = run_experiment(&rc).map_err(runtime)?;
    report.write_to_dir(out).map_err(runtime)?;
    write(&echo, &cfg.to_toml_string())?;
    print!("{}", report.table_text());
    println!("wrote {}", out.join("report.json").display());
    Ok(())
}

pub fn plot(report: &Path, out: Option<PathBuf>, force: bool) -> Result<()> {
    if !report.is_file() {
        return Err(CliError::Config(format!(
            "report not found: {}",
            report.display()
        )));
    }
    let r = ExperimentReport::load(report)
        .map_err(|e| CliError::Config(format!("{}: {e}", report.display())))?;
    let dir = out.unwrap_or_else(|| report.parent().map(Path::to_path_buf).unwrap_or_default());
    let mut files: Vec<(PathBuf, String)> = r
        .modes
        .iter()
        .map(|&mode| {
            (
                dir.join(format!("overlay_{}.svg", mode.name())),
                svg::overlay(&r, mode),
            )
        })
        .collect();
    match svg::learning_curve(&r) {
        Some(s) => files.push((dir.join("learning_curve.svg"), s)),
        None => {
            eprintln!("warning: report has no per-episode efficiencies; learning curve skipped")
        }
    }
    let paths: Vec<PathBuf> = files.iter().map(|(p, _)| p.clone()).collect();
    prepare_out(&dir, &paths, force)?;
    for (p, s) in &files {
        write(p, s)?;
        println!("wrote {}", p.display());
    }
    Ok(())
}

pub fn regen(manifest: &Path, check: bool) -> Result<()> {
    if !manifest.is_file() {
        return Err(CliError::Config(format!(
            "manifest not found: {}",
            manifest.display()
        )));
    }
    let m = Manifest::load(manifest).map_err(|e| CliError::Config(e.to_string()))?;
    let dir = manifest.parent().unwrap_or(Path::new("."));
    let (updated, changes) = regen_manifest(&m, dir).map_err(|e| match e {
        FixtureError::Malformed(_) | FixtureError::UnknownOracle(_) => {
            CliError::Config(e.to_string())
        }
        _ => runtime(e),
    })?;
    for c in &changes {
        println!("{c}");
    }
    if changes.is_empty() {
        println!("no changes");
    } else if !check {
        write(manifest, &updated.to_toml_string())?;
    }
    Ok(())
}
