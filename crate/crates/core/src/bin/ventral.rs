use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ventral::config::{ExperimentConfig, StimulusSpec};
use ventral::error::{Error, Result};
use ventral::experiment::{export, run_experiment, StimulusOutcome};
use ventral::synthetic::default_catalog;
use ventral::{pgm, v4};

const OUT_DIR_ENV: &str = "VENTRAL_OUT_DIR";

#[derive(Parser)]
#[command(name = "ventral", version, about = "Layered visual recognition experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
#[allow(clippy::large_enum_variant)]
enum Command {
    /// Run an experiment and export all artifacts.
    Run(RunArgs),
    /// Summarize an exported artifact file.
    Inspect {
        /// A file produced by `run` (pgm, features.txt, objects.txt, csv).
        path: PathBuf,
    },
    /// Survival and acceleration summaries for an export directory.
    Stats {
        /// Directory previously populated by `run`.
        dir: PathBuf,
    },
}

/// Every configuration field is also a flag; flags override the file.
#[derive(Args)]
struct RunArgs {
    /// Key=value configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (falls back to VENTRAL_OUT_DIR, then ./out).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    kernel_size: Option<usize>,
    #[arg(long)]
    kernel_zero_mean: Option<bool>,
    #[arg(long)]
    kernel_unit_norm: Option<bool>,
    #[arg(long)]
    blank_fraction: Option<f64>,
    #[arg(long)]
    tile_stride: Option<usize>,
    #[arg(long)]
    novelty_fraction: Option<f64>,
    #[arg(long)]
    var_fraction: Option<f64>,
    #[arg(long)]
    global_beta: Option<bool>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    grid_radius: Option<i64>,
    #[arg(long)]
    indicator_metric: Option<bool>,
    #[arg(long)]
    coherence_threshold: Option<f64>,
    #[arg(long)]
    feedback: Option<bool>,
    #[arg(long)]
    reset_counters: Option<bool>,
    #[arg(long)]
    resize: Option<bool>,
    #[arg(long)]
    seed: Option<u64>,
    /// Stimulus spec (repeatable); together with --default-catalog this
    /// replaces the file's stimulus list.
    #[arg(long = "stimulus")]
    stimuli: Vec<String>,
    /// Append the built-in ten-stimulus synthetic catalog.
    #[arg(long)]
    default_catalog: bool,
}

/// Dying quietly when a pipe reader stops is the expected CLI behavior;
/// Rust's default ignores SIGPIPE and panics on the failed write instead.
#[cfg(unix)]
fn restore_default_sigpipe() {
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
}

#[cfg(not(unix))]
fn restore_default_sigpipe() {}

fn main() -> ExitCode {
    restore_default_sigpipe();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => cmd_run(&args),
        Command::Inspect { path } => cmd_inspect(&path),
        Command::Stats { dir } => cmd_stats(&dir),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn assemble_config(args: &RunArgs) -> Result<ExperimentConfig> {
    let mut config = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)?;
            ExperimentConfig::parse(&text)?
        }
        None => ExperimentConfig::default(),
    };
    macro_rules! override_field {
        ($($field:ident),* $(,)?) => {
            $(if let Some(v) = args.$field {
                config.$field = v;
            })*
        };
    }
    override_field!(
        sigma,
        lambda,
        gamma,
        kernel_size,
        kernel_zero_mean,
        kernel_unit_norm,
        blank_fraction,
        tile_stride,
        novelty_fraction,
        var_fraction,
        global_beta,
        epsilon,
        alpha,
        grid_radius,
        indicator_metric,
        coherence_threshold,
        feedback,
        reset_counters,
        resize,
        seed,
    );
    if !args.stimuli.is_empty() || args.default_catalog {
        config.stimuli.clear();
    }
    for s in &args.stimuli {
        config.stimuli.push(StimulusSpec::parse(s)?);
    }
    if args.default_catalog {
        config
            .stimuli
            .extend(default_catalog().into_iter().map(StimulusSpec::Synthetic));
    }
    config.validate()?;
    Ok(config)
}

fn out_dir(args: &RunArgs) -> PathBuf {
    args.out
        .clone()
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"))
}

fn cmd_run(args: &RunArgs) -> Result<()> {
    let config = assemble_config(args)?;
    let report = run_experiment(&config)?;
    for t in &report.traces {
        let outcome = match t.outcome {
            StimulusOutcome::StoredNew(id) => format!("stored as object {id}"),
            StimulusOutcome::Recognized(id) => format!("recognized object {id}"),
            StimulusOutcome::NovelUnstored => "novel, blank map left unstored".into(),
        };
        let early = if t.terminated_early { ", early" } else { "" };
        println!(
            "stimulus {:3}  {:<42} {} ({} steps{early})",
            t.index,
            t.source,
            outcome,
            t.steps.len()
        );
    }
    println!(
        "dictionary: {} features; objects: {}",
        report.features.len(),
        report.objects.len()
    );
    let dir = out_dir(args);
    let manifest = export(&report, &dir)?;
    println!("wrote {} files to {}", manifest.len() + 1, dir.display());
    Ok(())
}

fn file_name(path: &Path) -> &str {
    path.file_name().and_then(|n| n.to_str()).unwrap_or("")
}

fn cmd_inspect(path: &Path) -> Result<()> {
    let name = file_name(path);
    if name.ends_with(".pgm") {
        let map = pgm::read(path)?;
        let (h, w) = map.pixels.dims();
        let max = map.pixels.iter().copied().max().unwrap_or(0);
        println!("graymap {w}x{h}, maxval {}, max sample {max}", map.maxval);
    } else if name == "features.txt" {
        let text = std::fs::read_to_string(path)?;
        let repo = v4::parse_repository(&text, 0.1, 0.1, false)?;
        let total: u64 = repo.prototypes.iter().map(|p| p.tau).sum();
        println!("feature dictionary: {} prototypes, total usage {total}", repo.len());
        for p in &repo.prototypes {
            let codes: Vec<String> = p.vector.iter().map(|c| c.to_string()).collect();
            println!("  {:3}  [{}]  tau={}", p.id, codes.join(" "), p.tau);
        }
    } else if name == "objects.txt" {
        let text = std::fs::read_to_string(path)?;
        let mut count = 0usize;
        for line in text.lines() {
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() == 3 {
                if let (Ok(id), Ok(h), Ok(w)) = (
                    fields[0].parse::<u32>(),
                    fields[1].parse::<usize>(),
                    fields[2].parse::<usize>(),
                ) {
                    println!("object {id}: {h}x{w} map");
                    count += 1;
                    let _ = (h, w);
                }
            }
        }
        println!("{count} stored objects");
    } else if name.ends_with(".csv") {
        let text = std::fs::read_to_string(path)?;
        let mut lines = text.lines();
        let header = lines.next().unwrap_or("");
        let rows = lines.count();
        if header.contains(',') && header.chars().any(|c| c.is_ascii_alphabetic()) {
            println!("csv: {rows} rows, columns: {header}");
        } else {
            let cols = header.split(',').count();
            println!("grid csv: {} rows x {cols} cols", rows + 1);
        }
    } else if name.starts_with("waves_") && name.ends_with(".txt") {
        let text = std::fs::read_to_string(path)?;
        let steps = text.lines().filter(|l| l.starts_with("step ")).count();
        let fired: usize = text
            .lines()
            .filter(|l| !l.starts_with("step "))
            .map(|l| l.split(' ').filter(|c| *c == "1").count())
            .sum();
        println!("wave dump: {steps} steps, {fired} tiles fired");
    } else if name.ends_with(".txt") {
        let text = std::fs::read_to_string(path)?;
        let rows = text.lines().count();
        let cols = text.lines().next().map_or(0, |l| l.split_whitespace().count());
        println!("text grid: {rows} rows x {cols} cols");
    } else {
        return Err(Error::Config(format!("don't know how to inspect {name}")));
    }
    Ok(())
}

fn split_csv_line(line: &str) -> Vec<String> {
    let mut fields = Vec::new();
    let mut field = String::new();
    let mut quoted = false;
    let mut chars = line.chars().peekable();
    while let Some(c) = chars.next() {
        match c {
            '"' if quoted && chars.peek() == Some(&'"') => {
                field.push('"');
                chars.next();
            }
            '"' => quoted = !quoted,
            ',' if !quoted => fields.push(std::mem::take(&mut field)),
            _ => field.push(c),
        }
    }
    fields.push(field);
    fields
}

fn read_csv(path: &Path) -> Result<Vec<Vec<String>>> {
    let text = std::fs::read_to_string(path)?;
    Ok(text.lines().skip(1).map(split_csv_line).collect())
}

fn cmd_stats(dir: &Path) -> Result<()> {
    let survival = read_csv(&dir.join("survival.csv"))?;
    println!("survival ({} stimuli):", survival.len());
    for row in &survival {
        if row.len() < 5 {
            continue;
        }
        println!(
            "  stimulus {:>3}: {} -> {} features (rate {}), first cohort {}",
            row[0], row[1], row[2], row[4], row[3]
        );
    }

    let outcomes = read_csv(&dir.join("outcomes.csv"))?;
    let mut recognized = Vec::new();
    let mut stored = Vec::new();
    let mut early = 0usize;
    for row in &outcomes {
        if row.len() < 7 {
            continue;
        }
        let steps: f64 = row[4].parse().unwrap_or(0.0);
        match row[2].as_str() {
            "recognized" => recognized.push(steps),
            "stored" => stored.push(steps),
            _ => {}
        }
        if row[5] == "true" {
            early += 1;
        }
    }
    let mean = |v: &[f64]| {
        if v.is_empty() {
            0.0
        } else {
            v.iter().sum::<f64>() / v.len() as f64
        }
    };
    println!("acceleration:");
    println!(
        "  recognized: {} stimuli, mean {:.2} steps, {} terminated early",
        recognized.len(),
        mean(&recognized),
        early
    );
    println!(
        "  stored novel: {} stimuli, mean {:.2} steps to exhaustion",
        stored.len(),
        mean(&stored)
    );
    Ok(())
}
