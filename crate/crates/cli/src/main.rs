//! `cfstab`: train, retrain, generate, evaluate, verify and plot from one
//! experiment config.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use cfstab_core::generators::write_records;
use cfstab_core::geometry::run_verification;
use cfstab_core::harness::{
    build_ensembles, generate_records, load_dataset, report_emit, resolve_max_eps, run_experiment,
    run_plot, select_origins, train_base, with_threads, ExperimentConfig, RecordEvaluation,
    ReportFormat,
};
use cfstab_core::nn::save_model;
use cfstab_core::{Error, Result};

const SEED_OFFSET_VAR: &str = "CFSTAB_SEED_OFFSET";

#[derive(Parser, Debug)]
#[command(name = "cfstab", version, about = "Counterfactual stability laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train the base model; writes model.json and train_log.csv.
    Train(Common),
    /// Train the base model and its LOO/RS retraining ensembles.
    Ensemble(Common),
    /// Generate counterfactuals for the validation origins; writes records.jsonl.
    Generate(Common),
    /// Full pipeline; writes report.json, records.jsonl and evaluations.jsonl.
    Evaluate(Common),
    /// Run the configured verifier sweeps; exit 5 on any violation.
    Verify(Common),
    /// Class and agreement rasters (PGM + JSON) for 2-D datasets.
    Plot(Common),
    /// Full pipeline; writes the report in the configured formats.
    Report(Common),
}

#[derive(Args, Debug)]
struct Common {
    /// Experiment config (TOML or JSON); defaults are used when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Dotted-path override, e.g. `train.epochs=20`; repeatable.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Output directory (created if missing).
    #[arg(long)]
    out: PathBuf,
    /// Worker threads (0 = all cores); results do not depend on it.
    #[arg(long, default_value_t = 0)]
    threads: usize,
}

fn seed_offset_from_env() -> Result<u64> {
    match std::env::var(SEED_OFFSET_VAR) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("{SEED_OFFSET_VAR} must be a non-negative integer, got `{v}`"))),
        Err(std::env::VarError::NotPresent) => Ok(0),
        Err(e) => Err(Error::Config(format!("{SEED_OFFSET_VAR}: {e}"))),
    }
}

fn load_config(args: &Common) -> Result<ExperimentConfig> {
    if let Some(p) = &args.config {
        if !p.is_file() {
            return Err(Error::Config(format!("config file {} not found", p.display())));
        }
    }
    let cfg = ExperimentConfig::load(args.config.as_deref(), &args.overrides)?;
    Ok(cfg.shifted(seed_offset_from_env()?))
}

fn prepare_out(dir: &Path, cfg: &ExperimentConfig) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join("effective_config.json");
    let text = serde_json::to_string_pretty(cfg)?;
    std::fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn write_evaluations(path: &Path, items: &[RecordEvaluation]) -> Result<()> {
    let mut text = String::new();
    for item in items {
        text.push_str(&serde_json::to_string(item)?);
        text.push('\n');
    }
    write_text(path, &text)
}

fn cmd_train(cfg: &ExperimentConfig, out: &Path, threads: usize) -> Result<()> {
    let (base, log) = with_threads(threads, || {
        let (train_set, _) = load_dataset(cfg).map_err(Error::in_stage("dataset"))?;
        train_base(cfg, &train_set).map_err(Error::in_stage("train"))
    })?;
    save_model(&base, &out.join("model.json"))?;
    write_text(&out.join("train_log.csv"), &log.to_csv())?;
    println!("model {} written to {}", base.fingerprint(), out.display());
    Ok(())
}

fn cmd_ensemble(cfg: &ExperimentConfig, out: &Path, threads: usize) -> Result<()> {
    let (base, ensembles) = with_threads(threads, || {
        let (train_set, _) = load_dataset(cfg).map_err(Error::in_stage("dataset"))?;
        let (base, _) = train_base(cfg, &train_set).map_err(Error::in_stage("train"))?;
        let ens = build_ensembles(cfg, &base, &train_set).map_err(Error::in_stage("ensemble"))?;
        Ok((base, ens))
    })?;
    save_model(&base, &out.join("model.json"))?;
    let dir = out.join("ensembles");
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let mut manifest = serde_json::Map::new();
    for (kind, members) in &ensembles {
        let mut names = Vec::new();
        for (k, m) in members.iter().enumerate() {
            let name = format!("{}_{:03}.json", kind.key(), k + 1);
            save_model(m, &dir.join(&name))?;
            names.push(serde_json::json!({ "file": name, "fingerprint": m.fingerprint() }));
        }
        manifest.insert(kind.key().to_string(), serde_json::Value::Array(names));
    }
    let text = serde_json::to_string_pretty(&serde_json::json!({
        "base": base.fingerprint(),
        "members": manifest,
    }))?;
    write_text(&dir.join("manifest.json"), &(text + "\n"))?;
    println!("{} ensembles written to {}", ensembles.len(), dir.display());
    Ok(())
}

fn cmd_generate(cfg: &ExperimentConfig, out: &Path, threads: usize) -> Result<()> {
    let (base, records) = with_threads(threads, || {
        let (train_set, validation) = load_dataset(cfg).map_err(Error::in_stage("dataset"))?;
        let (base, _) = train_base(cfg, &train_set).map_err(Error::in_stage("train"))?;
        let origins = select_origins(cfg, &base, &validation);
        let max_eps = resolve_max_eps(cfg, &train_set);
        let records = generate_records(cfg, &base, &validation, &origins, max_eps)
            .map_err(Error::in_stage("generate"))?;
        Ok((base, records))
    })?;
    save_model(&base, &out.join("model.json"))?;
    write_records(&out.join("records.jsonl"), &records)?;
    let ok = records.iter().filter(|r| r.success).count();
    println!("{ok}/{} successful records written to {}", records.len(), out.display());
    Ok(())
}

fn cmd_evaluate(cfg: &ExperimentConfig, out: &Path, threads: usize) -> Result<()> {
    let run = run_experiment(cfg, threads)?;
    save_model(&run.base, &out.join("model.json"))?;
    write_records(&out.join("records.jsonl"), &run.records)?;
    write_evaluations(&out.join("evaluations.jsonl"), &run.evaluations)?;
    report_emit(&run.report, out, &[ReportFormat::Json])?;
    print!("{}", run.report.to_text());
    Ok(())
}

fn cmd_report(cfg: &ExperimentConfig, out: &Path, threads: usize) -> Result<()> {
    let run = run_experiment(cfg, threads)?;
    let written = report_emit(&run.report, out, &cfg.report.formats)?;
    print!("{}", run.report.to_text());
    for p in written {
        println!("wrote {}", p.display());
    }
    Ok(())
}

fn cmd_verify(cfg: &ExperimentConfig, out: &Path, threads: usize) -> Result<()> {
    cfg.verify.validate()?;
    let reports = with_threads(threads, || run_verification(&cfg.verify))?;
    let mut failing = Vec::new();
    for r in &reports {
        let path = out.join(format!("verify_{}.json", r.name));
        r.write_json(&path)?;
        let worst = r.worst_margin.map_or("n/a".to_string(), |m| format!("{m:.3e}"));
        println!("{}: {}/{} passed, worst margin {worst}", r.name, r.passed, r.checked);
        if !r.is_clean() {
            failing.push(path);
        }
    }
    if failing.is_empty() {
        return Ok(());
    }
    let list: Vec<String> = failing.iter().map(|p| p.display().to_string()).collect();
    Err(Error::Verification(format!(
        "violations found; counterexamples in {}",
        list.join(", ")
    )))
}

fn cmd_plot(cfg: &ExperimentConfig, out: &Path, threads: usize) -> Result<()> {
    let plot = with_threads(threads, || run_plot(cfg, &cfg.plot))?;
    for (stem, grid) in &plot.grids {
        grid.write(out, stem)?;
        match grid.disagreement_fraction() {
            Some(f) => println!("{stem}: disagreement {f:.4}"),
            None => println!("{stem}"),
        }
    }
    if let Some(overlay) = &plot.overlay {
        let text = serde_json::to_string_pretty(overlay)?;
        write_text(&out.join("overlay.json"), &(text + "\n"))?;
    }
    Ok(())
}

type Handler = fn(&ExperimentConfig, &Path, usize) -> Result<()>;

fn run(cli: Cli) -> Result<()> {
    let (args, f): (&Common, Handler) = match &cli.command {
        Command::Train(a) => (a, cmd_train),
        Command::Ensemble(a) => (a, cmd_ensemble),
        Command::Generate(a) => (a, cmd_generate),
        Command::Evaluate(a) => (a, cmd_evaluate),
        Command::Verify(a) => (a, cmd_verify),
        Command::Plot(a) => (a, cmd_plot),
        Command::Report(a) => (a, cmd_report),
    };
    let cfg = load_config(args)?;
    prepare_out(&args.out, &cfg)?;
    f(&cfg, &args.out, args.threads)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
