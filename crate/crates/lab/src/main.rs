use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, ValueEnum};
use enkf_lab::experiments::lorenz::{run_lorenz_experiment, table1_header, table1_row, summary_line, TABLE1};
use enkf_lab::{resolve, run_experiment, Artifacts, ConfigFile, ExperimentKind, LabError, Overrides};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Experiment {
    Scalar,
    Ungm,
    Batch,
    Lorenz96,
}

impl From<Experiment> for ExperimentKind {
    fn from(e: Experiment) -> Self {
        match e {
            Experiment::Scalar => ExperimentKind::Scalar,
            Experiment::Ungm => ExperimentKind::Ungm,
            Experiment::Batch => ExperimentKind::Batch,
            Experiment::Lorenz96 => ExperimentKind::Lorenz96,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Switch {
    On,
    Off,
}

/// Runs one benchmark experiment and writes its CSV tables and summary.
#[derive(Debug, Parser)]
#[command(name = "enkf-lab", version)]
struct Cli {
    experiment: Experiment,
    #[arg(long)]
    ensemble_size: Option<usize>,
    #[arg(long)]
    inflation: Option<f64>,
    #[arg(long, value_enum)]
    taper: Option<Switch>,
    #[arg(long)]
    taper_length: Option<f64>,
    /// sample | model | ls | auto
    #[arg(long)]
    gain: Option<String>,
    /// natural | reverse | random
    #[arg(long)]
    order: Option<String>,
    /// Process measurement components one at a time.
    #[arg(long)]
    sequential: Option<bool>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; 0 picks one per core.
    #[arg(long)]
    threads: Option<usize>,
    /// TOML file with `[common]` and per-experiment sections.
    #[arg(long)]
    config: Option<PathBuf>,
    /// lorenz96 only: run every benchmark grid configuration instead of one.
    #[arg(long)]
    table1: bool,
}

impl Cli {
    fn overrides(&self) -> Overrides {
        Overrides {
            ensemble_size: self.ensemble_size,
            inflation: self.inflation,
            taper: self.taper.map(|s| matches!(s, Switch::On)),
            taper_length: self.taper_length,
            gain: self.gain.clone(),
            order: self.order.clone(),
            sequential: self.sequential,
            steps: self.steps,
            runs: self.runs,
            seed: self.seed,
            out: self.out.clone(),
            threads: self.threads,
        }
    }
}

fn table1(base: &enkf_lab::ExperimentConfig) -> Result<Artifacts, LabError> {
    let mut artifacts = Artifacts::default();
    let mut table = table1_header();
    table.push_column("reported")?;
    artifacts.summary.push("N     c     taper    eps_bar".into());
    for row in TABLE1 {
        let cfg = row.config(base);
        let start = Instant::now();
        let res = run_lorenz_experiment(&cfg)?;
        for (i, r) in res.runs.iter().enumerate() {
            let mut cells = table1_row(&cfg, i, r);
            cells.push(row.reported.map_or_else(|| ">1".into(), |v| v.to_string()));
            table.push(cells)?;
            artifacts.summary.push(summary_line(&cfg, i, r));
        }
        log::info!("N={} c={} taper={} done in {:.1?}", cfg.ensemble_size, cfg.inflation, cfg.taper, start.elapsed());
    }
    artifacts.add("table1.csv", table);
    Ok(artifacts)
}

fn run(cli: &Cli) -> Result<(), LabError> {
    let kind = ExperimentKind::from(cli.experiment);
    let file = cli.config.as_deref().map(ConfigFile::load).transpose()?;
    let cfg = resolve(kind, file.as_ref(), &cli.overrides())?;
    log::info!("{cfg:?}");
    let start = Instant::now();
    let artifacts = if cli.table1 {
        if kind != ExperimentKind::Lorenz96 {
            return Err(LabError::Config("--table1 applies to lorenz96 only".into()));
        }
        table1(&cfg)?
    } else {
        run_experiment(&cfg)?
    };
    artifacts.write(&cfg.out)?;
    for line in &artifacts.summary {
        println!("{line}");
    }
    println!("wrote {} tables to {} in {:.1?}", artifacts.tables.len(), cfg.out.display(), start.elapsed());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
