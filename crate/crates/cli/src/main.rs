use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use htl_cli::config::{ExperimentConfig, ExperimentKind};
use htl_cli::runner::synthetic_seed_data;
use htl_cli::{run_experiment, write_artifacts, CliError};
use htl_core::write_csv;

#[derive(Parser)]
#[command(name = "htl", version, about = "Transformation-function transfer learning experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the first seed's synthetic source/target/validation/test samples as CSV.
    Synth(Common),
    /// Run an experiment of any kind.
    Run(Common),
    /// Run a selection experiment.
    Select(Common),
    /// Run a rate sweep.
    Rate(Common),
}

#[derive(Args)]
struct Common {
    /// Experiment configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated seeds; override `seeds`.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
}

impl Common {
    fn load(&self) -> Result<ExperimentConfig, CliError> {
        let mut cfg = ExperimentConfig::load(&self.config)?;
        if let Some(out) = &self.out {
            cfg.output_dir = out.clone();
        }
        if let Some(seeds) = &self.seeds {
            cfg.seeds = seeds.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn synth(cfg: &ExperimentConfig) -> Result<(), CliError> {
    let spec = cfg
        .synthetic()
        .ok_or_else(|| CliError::Config("synth needs a synthetic experiment kind".into()))?;
    let data = synthetic_seed_data(cfg, &spec, cfg.seeds[0])?;
    std::fs::create_dir_all(&cfg.output_dir).map_err(|e| CliError::Config(format!("{}: {e}", cfg.output_dir.display())))?;
    let mut parts = vec![("source", &data.source), ("target", &data.target), ("test", &data.test)];
    if let Some(v) = &data.validation {
        parts.push(("validation", v));
    }
    for (name, d) in parts {
        let path = cfg.output_dir.join(format!("{name}.csv"));
        write_csv(d, &path)?;
        println!("wrote {} ({} rows)", path.display(), d.n());
    }
    Ok(())
}

fn run(common: &Common, expected: Option<ExperimentKind>) -> Result<usize, CliError> {
    let cfg = common.load()?;
    if let Some(kind) = expected {
        if cfg.experiment_kind != kind {
            return Err(CliError::Config(format!(
                "this verb needs experiment_kind {kind:?}, config has {:?}",
                cfg.experiment_kind
            )));
        }
    }
    let report = run_experiment(&cfg)?;
    for path in write_artifacts(&report, &cfg.output_dir)? {
        println!("wrote {}", path.display());
    }
    for a in &report.aggregates {
        if let Some(m) = a.mse {
            println!(
                "{:<28} n_ta={:<6} mse {:.6} ± {} ({} ok, {} failed)",
                a.method,
                a.n_ta,
                m.mean,
                m.sd.map_or("n/a".to_string(), |sd| format!("{sd:.6}")),
                m.count,
                a.n_failed
            );
        }
    }
    for r in &report.rate_fits {
        println!("{:<28} slope {:.4}", r.method, r.fit.slope);
    }
    Ok(report.failures)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let outcome = match &cli.command {
        Command::Synth(c) => c.load().and_then(|cfg| synth(&cfg)).map(|_| 0),
        Command::Run(c) => run(c, None),
        Command::Select(c) => run(c, Some(ExperimentKind::Selection)),
        Command::Rate(c) => run(c, Some(ExperimentKind::RateSweep)),
    };
    match outcome {
        Ok(0) => ExitCode::SUCCESS,
        Ok(failures) => {
            eprintln!("{failures} method run(s) failed; see rows.csv");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
