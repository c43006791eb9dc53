use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use qlockin_cli::config::{parse_config, Experiment, RunConfig};
use qlockin_cli::run::{resolve_seed, run, RunError};

/// Dual-channel single-spin lock-in magnetometry experiments.
#[derive(Debug, Parser)]
#[command(name = "qlockin", version)]
struct Cli {
    /// One of: sweep-amplitude, sweep-phase, sensitivity, telegraph,
    /// random-phase, freq-shift, two-tone, time-constants, frequencies.
    experiment: String,
    /// TOML configuration file.
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Built-in configuration (fig2c, fig2d, fig3, fig4a, fig4b, si_s4,
    /// si_s5, si_s6, frequencies).
    #[arg(long)]
    preset: Option<String>,
    /// Master seed. Overrides QLOCKIN_SEED and the config file.
    #[arg(long)]
    seed: Option<u64>,
    /// Monte Carlo trials per point. Overrides the config file.
    #[arg(long)]
    trials: Option<u32>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn load(cli: &Cli) -> Result<(Experiment, RunConfig), RunError> {
    let experiment: Experiment = cli.experiment.parse()?;
    let mut config = match (&cli.config, &cli.preset) {
        (Some(path), _) => {
            let text = std::fs::read_to_string(path).map_err(|e| RunError::Io {
                path: path.clone(),
                source: e,
            })?;
            parse_config(&text)?
        }
        (None, Some(name)) => RunConfig::preset(name).ok_or_else(|| {
            qlockin_cli::config::ConfigError {
                key: "preset".into(),
                reason: format!("unknown preset `{name}`, expected one of {}", RunConfig::PRESETS.join(", ")),
            }
        })?,
        (None, None) => RunConfig::default(),
    };
    if let Some(t) = cli.trials {
        config.trials = t;
    }
    config.validate_for(experiment)?;
    config.experiment = Some(experiment);
    Ok((experiment, config))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = load(&cli).and_then(|(experiment, config)| {
        let env = std::env::var("QLOCKIN_SEED").ok();
        let (seed, source) = resolve_seed(cli.seed, env.as_deref(), config.seed)?;
        let out = cli
            .out
            .clone()
            .or_else(|| config.output.as_ref().map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("."));
        run(experiment, &config, seed, source, &out)
    });
    match result {
        Ok(summary) => {
            for f in &summary.files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("qlockin: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
