use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use bifi_core::BiFiBasis;
use bifi_experiments::config;
use bifi_experiments::error::io_err;
use bifi_experiments::output::{self, Timing};
use bifi_experiments::pipeline::{self, Models};
use bifi_experiments::{ExpResult, ScenarioConfig, ScenarioName};

/// Bi-fidelity uncertainty quantification for kinetic epidemic transport.
#[derive(Parser)]
#[command(name = "bifi", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Full pipeline: selection, statistics and error tables.
    Run(Common),
    /// Low-fidelity sweep and greedy point selection only.
    Select(Common),
    /// High-fidelity runs at a previously selected basis and statistics.
    Stats(Common),
    /// Error tables from previously written statistics.
    Errors(Common),
}

#[derive(Args)]
struct Common {
    /// test1a, test1b, test2a, test2b or custom.
    scenario: ScenarioName,
    /// TOML file with key/value overrides.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Number of high-fidelity points to select.
    #[arg(long)]
    n: Option<usize>,
    /// Size of the candidate set.
    #[arg(long)]
    candidates: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    nx: Option<usize>,
    #[arg(long)]
    nv: Option<usize>,
}

impl Common {
    fn scenario(&self) -> ExpResult<ScenarioConfig> {
        let mut cfg = match &self.config {
            Some(path) => config::load(path, self.scenario)?,
            None => ScenarioConfig::build(self.scenario)?,
        };
        if let Some(v) = self.n {
            cfg.n_select = v;
        }
        if let Some(v) = self.candidates {
            cfg.candidates = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = &self.out {
            cfg.out_dir = v.clone();
        }
        if let Some(v) = self.nx {
            cfg.nx = v;
        }
        if let Some(v) = self.nv {
            cfg.nv = v;
        }
        cfg.validate()?;
        std::fs::create_dir_all(&cfg.out_dir).map_err(io_err(&cfg.out_dir))?;
        Ok(cfg)
    }
}

fn finish(cfg: &ScenarioConfig, timings: &[Timing]) -> ExpResult<()> {
    output::write_timing(&cfg.out_dir.join("timing.csv"), timings)?;
    for t in timings {
        eprintln!("{:<16} {:>10.3} s  ({} runs)", t.stage, t.seconds, t.runs);
    }
    Ok(())
}

fn execute(command: Command) -> ExpResult<()> {
    match command {
        Command::Run(c) => {
            let cfg = c.scenario()?;
            let report = pipeline::run_pipeline(&cfg)?;
            for t in &report.timings {
                eprintln!("{:<16} {:>10.3} s  ({} runs)", t.stage, t.seconds, t.runs);
            }
            print!("{}", report.errors.summary());
            println!("artifacts in {}", cfg.out_dir.display());
        }
        Command::Select(c) => {
            let cfg = c.scenario()?;
            let models = Models::new(&cfg)?;
            let mut timings = Vec::new();
            let sel = pipeline::select(&models, &cfg.out_dir, &mut timings)?;
            finish(&cfg, &timings)?;
            println!("selected {} of {} candidates", sel.basis.n(), sel.candidates.len());
        }
        Command::Stats(c) => {
            let cfg = c.scenario()?;
            let models = Models::new(&cfg)?;
            let basis = BiFiBasis::read_csv(cfg.out_dir.join("basis.csv"))?;
            let mut timings = Vec::new();
            let st = pipeline::statistics(&models, basis, &cfg.out_dir, &mut timings)?;
            finish(&cfg, &timings)?;
            println!("statistics for {} basis sizes on {} rule nodes", st.bf.len(), st.rule.len());
        }
        Command::Errors(c) => {
            let cfg = c.scenario()?;
            let labels = cfg.compartments().labels();
            let dir = &cfg.out_dir;
            let hf = output::read_fields(&dir.join("fields_hf.csv"), &labels)?;
            let lf = output::read_fields(&dir.join("fields_lf.csv"), &labels)?;
            let bf = output::read_bf_decay(&dir.join("bf_decay.csv"), &labels)?;
            let table = pipeline::error_table(&hf, &lf, &bf, &labels, cfg.grid()?.dx())?;
            table.write_csv(&dir.join("error_decay.csv"))?;
            print!("{}", table.summary());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
