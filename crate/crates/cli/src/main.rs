//! `adanav`: synthesize sessions, train the simulated user, search controller
//! gains and report ER-SCR / MSDV outcomes.

mod config;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use adanav::io::{read_manifest, read_session, write_atomic, write_dataset};
use adanav::metrics::msdv_svg;
use adanav::{
    build_report, heldout_mae, optimize, simulate_session, synth_cohort, train_surrogate, DetectorMethod, Manifest,
    Objective, PidGains, Report, SessionRecord, Split, SurrogateModel,
};
use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use rayon::prelude::*;

use config::{Resolved, RunConfig, OUTPUT_DIR_ENV};

#[derive(Parser, Debug)]
#[command(name = "adanav", version, about = "EDA-driven adaptive navigation: simulation and gain search")]
struct Cli {
    /// TOML run configuration.
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides the config and ADANAV_OUTPUT_DIR).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Optimizer trial budget.
    #[arg(long, global = true)]
    budget: Option<usize>,
    /// Config override, e.g. `--set optimizer.patience=20`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Generate a synthetic cohort and its train/eval manifest.
    Synth,
    /// Fit the surrogate on the train split.
    Train,
    /// Search gains on the eval split.
    Optimize,
    /// Simulate the eval split with the saved gains and write the report.
    Evaluate,
    /// Re-render the report from a saved sessions.csv.
    Report,
    /// synth, train, optimize and evaluate in one go.
    Run,
    /// Print the effective configuration as TOML.
    Config,
}

fn resolve(cli: &Cli) -> Result<(RunConfig, Resolved)> {
    let mut table = config::load_table(cli.config.as_deref())?;
    for s in &cli.set {
        config::apply_override(&mut table, s)?;
    }
    if let Some(seed) = cli.seed {
        config::apply_override(&mut table, &format!("run.seed={seed}"))?;
    }
    if let Some(b) = cli.budget {
        config::apply_override(&mut table, &format!("optimizer.budget={b}"))?;
    }
    let mut cfg = RunConfig::from_table(table)?;
    if let Some(dir) = std::env::var_os(OUTPUT_DIR_ENV).filter(|v| !v.is_empty()) {
        cfg.run.out = dir.into();
    }
    if let Some(out) = &cli.out {
        cfg.run.out = out.clone();
    }
    let resolved = cfg.resolve()?;
    Ok((cfg, resolved))
}

fn load_split(dir: &Path, split: Split) -> Result<Vec<SessionRecord<f64>>> {
    let manifest = read_manifest(dir).with_context(|| format!("reading manifest in {}", dir.display()))?;
    let records = manifest
        .ids(split)
        .map(|id| read_session(dir, id).with_context(|| format!("reading session {id}")))
        .collect::<Result<Vec<_>>>()?;
    if records.is_empty() {
        bail!("{} split of {} is empty", split, dir.display());
    }
    Ok(records)
}

fn load_model(r: &Resolved) -> Result<SurrogateModel<f64>> {
    let p = r.model_path();
    let text = fs::read_to_string(&p).with_context(|| format!("reading {} (run `adanav train` first)", p.display()))?;
    Ok(SurrogateModel::from_text(&text)?)
}

fn load_gains(r: &Resolved) -> Result<PidGains<f64>> {
    let p = r.gains_path();
    let text = fs::read_to_string(&p).with_context(|| format!("reading {} (run `adanav optimize` first)", p.display()))?;
    Ok(PidGains::from_text(&text)?)
}

fn synth(r: &Resolved) -> Result<()> {
    let records = synth_cohort(&r.cohort)?;
    let manifest = Manifest::split(records.iter().map(|s| s.id.clone()), r.train_fraction)?;
    write_dataset(&r.dataset_dir, &records, &manifest)?;
    println!(
        "wrote {} sessions ({} train, {} eval) to {}",
        records.len(),
        manifest.ids(Split::Train).count(),
        manifest.ids(Split::Eval).count(),
        r.dataset_dir.display()
    );
    Ok(())
}

fn train(r: &Resolved) -> Result<()> {
    let train = load_split(&r.dataset_dir, Split::Train)?;
    let eval = load_split(&r.dataset_dir, Split::Eval)?;
    let model = train_surrogate(&train, &r.train)?;
    let held = heldout_mae(&eval, &model, &r.train)?;
    fs::create_dir_all(&r.out)?;
    write_atomic(&r.model_path(), &model.to_text())?;
    println!("train MAE {:.4}, held-out MAE {:.4}", model.train_mae(), held);
    println!("model written to {}", r.model_path().display());
    Ok(())
}

fn run_optimize(r: &Resolved) -> Result<()> {
    let model = load_model(r)?;
    let eval = load_split(&r.dataset_dir, Split::Eval)?;
    let objective = Objective::new(&eval, &model, r.sim)?;
    let (best, history) = optimize(&objective, &r.ranges, &r.optimizer)?;
    let names = DetectorMethod::ALL.map(DetectorMethod::as_str);
    write_atomic(&r.gains_path(), &best.to_text())?;
    write_atomic(&r.history_path(), &history.to_csv(&names))?;
    let b = history.best();
    println!(
        "best P_pn {:.1} after {} trials (trial {}, {} sessions with higher MSDV)",
        b.objective,
        history.trials().len(),
        b.index,
        b.msdv_worse
    );
    print!("{}", best.to_text());
    Ok(())
}

fn print_report(report: &Report<f64>) {
    println!(
        "{:<10} {:>9} {:>7} {:>9} {:>7} {:>6} {:>7}",
        "method", "positive", "pct", "chi2", "p", "phi", "dir"
    );
    let rows = report
        .detectors
        .iter()
        .map(|(m, s)| (m.as_str(), s))
        .chain([("msdv_l", &report.msdv_l), ("msdv_r", &report.msdv_r)]);
    for (name, s) in rows {
        println!(
            "{:<10} {:>9} {:>6.1}% {:>9.3} {:>7} {:>6.3} {:>7}",
            name,
            format!("{}/{}", s.positives, s.total),
            s.percentage(),
            s.chi2,
            s.significant_at.label(),
            s.phi,
            s.direction.label()
        );
    }
}

fn write_report(r: &Resolved, report: &Report<f64>, with_sessions: bool) -> Result<()> {
    let dir = r.report_dir();
    fs::create_dir_all(&dir)?;
    write_atomic(&dir.join("table.csv"), &report.table_csv())?;
    if with_sessions {
        write_atomic(&dir.join("sessions.csv"), &report.sessions_csv())?;
    }
    write_atomic(&dir.join("msdv.svg"), &msdv_svg(&report.sessions))?;
    Ok(())
}

fn evaluate(r: &Resolved) -> Result<()> {
    let model = load_model(r)?;
    let gains = load_gains(r)?;
    let eval = load_split(&r.dataset_dir, Split::Eval)?;
    let results = eval
        .par_iter()
        .map(|rec| simulate_session(rec, &gains, &model, &r.sim))
        .collect::<adanav::Result<Vec<_>>>()?;
    let methods = r.sim.detectors.map(|d| d.method);
    let report = build_report(&results, &methods)?;
    write_report(r, &report, true)?;
    print_report(&report);
    Ok(())
}

fn report(r: &Resolved) -> Result<()> {
    let p = r.report_dir().join("sessions.csv");
    let text = fs::read_to_string(&p).with_context(|| format!("reading {} (run `adanav evaluate` first)", p.display()))?;
    let report = Report::from_sessions_csv(&text)?;
    write_report(r, &report, false)?;
    print_report(&report);
    Ok(())
}

fn execute(cmd: Command, cfg: &RunConfig, r: &Resolved) -> Result<()> {
    match cmd {
        Command::Synth => synth(r),
        Command::Train => train(r),
        Command::Optimize => run_optimize(r),
        Command::Evaluate => evaluate(r),
        Command::Report => report(r),
        Command::Run => {
            synth(r)?;
            train(r)?;
            run_optimize(r)?;
            evaluate(r)
        }
        Command::Config => {
            print!("{}", toml::to_string(cfg)?);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let (cfg, resolved) = match resolve(&cli) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(1);
        }
    };
    if resolved.threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(resolved.threads).build_global() {
            eprintln!("error: thread pool: {e}");
            return ExitCode::from(2);
        }
    }
    match execute(cli.command, &cfg, &resolved) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
