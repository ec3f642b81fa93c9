//! `fri-lab`: Monte Carlo experiments on finitary random interlacements.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use fri_core::estimators::McConfig;
use fri_core::exploration::RunTrace;
use fri_core::FriError;

use fri_lab::config::{self, load, to_toml, validate, ConfigError, ExperimentConfig};
use fri_lab::output;
use fri_lab::registry::{self, Ctx, REGISTRY};

const EXIT_CONFIG: u8 = 2;
const EXIT_GUARD: u8 = 3;
const THREADS_ENV: &str = "FRI_LAB_THREADS";

#[derive(Parser)]
#[command(name = "fri-lab", version, about = "Monte Carlo lab for finitary random interlacements")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write its CSV and manifest.
    Run(ConfigArgs),
    /// List registered experiments with their parameters.
    List,
    /// Validate a configuration without sampling.
    Validate(ConfigArgs),
    /// Print the default configuration.
    Defaults {
        #[arg(long)]
        experiment: Option<String>,
    },
    /// Re-run a dumped exploration trace and compare every step.
    ReplayTrace { file: PathBuf },
}

#[derive(Args)]
struct ConfigArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    experiment: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long)]
    shards: Option<usize>,
    #[arg(long)]
    output: Option<PathBuf>,
    /// Override any config key, e.g. `--set protocol.slab=0.5`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<ExperimentConfig, ConfigError> {
        let text = match &self.config {
            Some(p) => Some(std::fs::read_to_string(p).map_err(|source| ConfigError::Io { path: p.clone(), source })?),
            None => None,
        };
        let mut overrides = Vec::new();
        if let Some(e) = &self.experiment {
            overrides.push(format!("experiment=\"{e}\""));
        }
        if let Some(s) = self.seed {
            overrides.push(format!("seed={s}"));
        }
        if let Some(t) = self.trials {
            overrides.push(format!("trials={t}"));
        }
        if let Some(s) = self.shards {
            overrides.push(format!("shards={s}"));
        }
        if let Some(o) = &self.output {
            overrides.push(format!("output={:?}", o.display().to_string()));
        }
        overrides.extend(self.set.iter().cloned());
        load(text.as_deref(), &overrides)
    }
}

fn checked(args: &ConfigArgs) -> Result<ExperimentConfig, ExitCode> {
    let cfg = args.resolve().map_err(|e| {
        eprintln!("error: {e}");
        ExitCode::from(EXIT_CONFIG)
    })?;
    let diag = validate(&cfg);
    for w in &diag.warnings {
        eprintln!("warning: {w}");
    }
    if !diag.ok() {
        eprintln!("error: {}", ConfigError::Invalid(diag.errors));
        return Err(ExitCode::from(EXIT_CONFIG));
    }
    Ok(cfg)
}

fn exit_for(e: &FriError) -> ExitCode {
    match e {
        FriError::InvalidParameter(_) | FriError::DimensionMismatch { .. } | FriError::OffGrid(_) => ExitCode::from(EXIT_CONFIG),
        _ => ExitCode::from(EXIT_GUARD),
    }
}

fn run(args: &ConfigArgs) -> ExitCode {
    let cfg = match checked(args) {
        Ok(c) => c,
        Err(code) => return code,
    };
    let mc = match McConfig::new(cfg.seed, cfg.shards, cfg.intrusion_tol) {
        Ok(m) => m,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    let exp = registry::find(&cfg.experiment).expect("validated");
    let start = Instant::now();
    let result = if cfg.trials == 0 { Ok(Vec::new()) } else { (exp.run)(&Ctx { cfg: &cfg, mc }) };
    let elapsed = start.elapsed().as_secs_f64();
    let (rows, status, code) = match result {
        Ok(rows) => (rows, "complete".to_string(), ExitCode::SUCCESS),
        Err(e) => {
            eprintln!("error: {e}");
            (Vec::new(), format!("failed: {e}"), exit_for(&e))
        }
    };
    let manifest = output::RunManifest::new(&cfg, elapsed, &status, rows.len());
    let written = match &cfg.output {
        Some(path) => std::fs::File::create(path)
            .map_err(|e| e.to_string())
            .and_then(|f| output::write_csv(&rows, f).map_err(|e| e.to_string()))
            .and_then(|_| std::fs::write(output::manifest_path(path), manifest.to_toml()).map_err(|e| e.to_string())),
        None => output::write_csv(&rows, std::io::stdout().lock()).map_err(|e| e.to_string()),
    };
    if let Err(e) = written {
        eprintln!("error: cannot write output: {e}");
        return ExitCode::from(EXIT_GUARD);
    }
    code
}

fn list() {
    for e in REGISTRY {
        println!("{:<20} {}", e.name, e.summary);
        println!("{:<20}   params: {}", "", e.params);
    }
}

fn replay(file: &PathBuf) -> ExitCode {
    let text = match std::fs::read_to_string(file) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", file.display());
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    match RunTrace::replay(&text) {
        Ok(t) => {
            println!("replay ok: {} steps, outcome {}", t.decisions.len(), u8::from(t.outcome));
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("replay failed: {e}");
            ExitCode::from(EXIT_GUARD)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = std::env::var(THREADS_ENV).ok().and_then(|s| s.parse::<usize>().ok()) {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("warning: {THREADS_ENV} ignored: {e}");
        }
    }
    match &cli.command {
        Command::Run(a) => run(a),
        Command::List => {
            list();
            ExitCode::SUCCESS
        }
        Command::Validate(a) => match checked(a) {
            Ok(cfg) => {
                println!("ok: {} (config hash {})", cfg.experiment, config::config_hash(&cfg));
                ExitCode::SUCCESS
            }
            Err(code) => code,
        },
        Command::Defaults { experiment } => {
            let cfg = ExperimentConfig { experiment: experiment.clone().unwrap_or_default(), ..ExperimentConfig::default() };
            print!("{}", to_toml(&cfg));
            ExitCode::SUCCESS
        }
        Command::ReplayTrace { file } => replay(file),
    }
}
