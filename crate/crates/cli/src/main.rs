use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use multistrain_cli::config::{build_scenario, load_config, validate, Overrides, ScenarioConfig};
use multistrain_cli::error::CliError;
use multistrain_cli::presets::{preset, PRESETS};
use multistrain_cli::run::{format_outcome, run_scenario, sweep, Mode};

#[derive(Parser)]
#[command(
    name = "multistrain",
    version,
    about = "Multi-strain SEIR scenarios and optimal lockdown control"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate a scenario under its configured control.
    Simulate {
        config: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Solve for the optimal lockdown schedule.
    Optimize {
        config: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Run a scenario once per value of one numeric field.
    Sweep {
        config: PathBuf,
        /// Dotted path, e.g. `control.c2_factor` or `strains.1.beta_ratio`.
        #[arg(long)]
        param: String,
        /// Comma-separated values.
        #[arg(
            long,
            value_delimiter = ',',
            required = true,
            allow_negative_numbers = true
        )]
        values: Vec<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// Built-in scenarios.
    Presets {
        #[command(subcommand)]
        action: PresetAction,
    },
}

#[derive(Subcommand)]
enum PresetAction {
    List,
    /// Write a preset's TOML to a file.
    Write {
        name: String,
        path: PathBuf,
    },
}

#[derive(Args)]
struct Common {
    /// Output directory (default: output.dir, else `out/<name>`).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    horizon: Option<f64>,
    /// Activation day for every strain that starts after t0.
    #[arg(long = "seed-day")]
    seed_day: Option<f64>,
    #[arg(long)]
    quiet: bool,
    #[arg(long = "no-svg")]
    no_svg: bool,
}

impl Common {
    fn overrides(&self) -> Overrides {
        Overrides {
            dt: self.dt,
            horizon: self.horizon,
            seed_day: self.seed_day,
        }
    }
}

fn load(path: &Path, common: &Common) -> Result<ScenarioConfig, CliError> {
    let mut cfg = load_config(path)?;
    let ov = common.overrides();
    if ov != Overrides::default() {
        ov.apply(&mut cfg);
        validate(&cfg, path.parent())?;
    }
    Ok(cfg)
}

fn out_dir(common: &Common, cfg: &ScenarioConfig) -> PathBuf {
    common
        .out
        .clone()
        .or_else(|| cfg.output.dir.clone())
        .unwrap_or_else(|| PathBuf::from("out").join(cfg.name.as_deref().unwrap_or("scenario")))
}

fn run(cli: Cli) -> Result<ExitCode, CliError> {
    match cli.command {
        Command::Simulate { config, common } => single(&config, &common, Mode::Simulate),
        Command::Optimize { config, common } => single(&config, &common, Mode::Optimize),
        Command::Sweep {
            config,
            param,
            values,
            common,
        } => {
            let cfg = load(&config, &common)?;
            let root = out_dir(&common, &cfg);
            let points = sweep(
                &cfg,
                config.parent(),
                &param,
                &values,
                &root,
                Mode::Auto,
                cfg.output.svg && !common.no_svg,
            )?;
            let mut all_converged = true;
            for p in &points {
                all_converged &= p.outcome.converged();
                if !common.quiet {
                    println!("{param} = {}", p.value);
                    print!("{}", format_outcome(&p.outcome));
                }
            }
            if !common.quiet {
                println!("wrote {}", root.join("sweep_summary.csv").display());
            }
            Ok(if all_converged {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(3)
            })
        }
        Command::Presets { action } => match action {
            PresetAction::List => {
                for (name, about) in PRESETS {
                    println!("{name:<12} {about}");
                }
                Ok(ExitCode::SUCCESS)
            }
            PresetAction::Write { name, path } => {
                let text = preset(&name).ok_or_else(|| CliError::Validation {
                    field: "preset".into(),
                    message: format!("unknown preset `{name}`; see `presets list`"),
                })?;
                multistrain_cli::output::write_text(&path, &text)?;
                Ok(ExitCode::SUCCESS)
            }
        },
    }
}

fn single(config: &Path, common: &Common, mode: Mode) -> Result<ExitCode, CliError> {
    let cfg = load(config, common)?;
    let scenario = build_scenario(&cfg, config.parent())?;
    let dir = out_dir(common, &cfg);
    let outcome = run_scenario(&scenario, &dir, mode, scenario.svg && !common.no_svg)?;
    if !common.quiet {
        print!("{}", format_outcome(&outcome));
    }
    if let Some(r) = outcome.report.as_ref().filter(|r| !r.converged) {
        let err = CliError::NotConverged {
            iterations: r.iterations,
            residual: r.residual,
        };
        eprintln!("error: {err}");
        return Ok(ExitCode::from(err.exit_code() as u8));
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
