//! `vat` command-line workflows: generate materials, solve them, query a
//! model endpoint, and turn the transcripts into report tables and fits.

pub mod commands;
pub mod config;
pub mod dataset;
pub mod error;
pub mod report;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use vat_core::eval::PromptMode;
use vat_core::instance::TminConvention;

use crate::commands::StrategyChoice;
use crate::config::{MockKind, RunConfig, RESOLVED_CONFIG};
use crate::dataset::{now, RunDir};
use crate::error::CliResult;

#[derive(Debug, Parser)]
#[command(name = "vat", version, about = "Variable attribution task experiments")]
pub struct Cli {
    #[command(flatten)]
    pub opts: GlobalOpts,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum TminChoice {
    PerFunction,
    PerNMax,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum ModeChoice {
    Reasoning,
    Direct,
}

#[derive(Debug, Args)]
pub struct GlobalOpts {
    /// Run directory.
    #[arg(long, global = true, default_value = "run")]
    pub out: PathBuf,
    /// JSON run configuration; defaults to the run directory's config.resolved.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Grid JSON file, or clauses like "n=3,4,5;offsets=0,1;samples=5".
    #[arg(long, global = true)]
    pub grid: Option<String>,
    /// Comma-separated function names or ids.
    #[arg(long, global = true)]
    pub functions: Option<String>,
    #[arg(long, global = true, value_enum)]
    pub tmin_convention: Option<TminChoice>,
    /// Keep going when some grid cells fail to generate.
    #[arg(long, global = true)]
    pub allow_holes: bool,
    /// JSON endpoint configuration for the evaluated model.
    #[arg(long, global = true)]
    pub endpoint: Option<PathBuf>,
    /// JSON endpoint configuration for the strategy judge.
    #[arg(long, global = true)]
    pub judge_endpoint: Option<PathBuf>,
    /// Serve answers from a local scripted endpoint instead.
    #[arg(long, global = true, value_enum)]
    pub mock: Option<MockKind>,
    /// Cost model parameters as c_check,c_slot.
    #[arg(long, global = true)]
    pub cost: Option<String>,
    /// Use log(rho) instead of rho in the comparison models.
    #[arg(long, global = true)]
    pub rho_log: bool,
    #[arg(long, global = true, value_enum)]
    pub mode: Option<ModeChoice>,
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute T_min and generate the instance grid.
    Gen,
    /// Render the prompt for every instance.
    Export,
    /// Run the reference solvers on every instance.
    Solve {
        #[arg(long, value_enum, default_value = "both")]
        strategy: StrategyChoice,
    },
    /// Query the model, grade the answers and judge the strategies.
    Run {
        /// Skip the strategy judge.
        #[arg(long)]
        no_judge: bool,
    },
    /// Build report tables from the transcripts.
    Report,
    /// Fit and compare the strategy-selection models.
    Fit,
    /// Write the fitted decision landscape.
    Landscape,
    /// Predict strategies from the cost model.
    Predict,
    /// gen, solve, run, report, fit and landscape in sequence.
    All,
}

impl GlobalOpts {
    /// Base config (explicit file, then the run directory's resolved config,
    /// then defaults) with command-line overrides applied.
    pub fn resolve(&self) -> CliResult<RunConfig> {
        let existing = self.out.join(RESOLVED_CONFIG);
        let mut cfg = match (&self.config, existing.is_file()) {
            (Some(path), _) => RunConfig::load(path)?,
            (None, true) => RunConfig::load(&existing)?,
            (None, false) => RunConfig::default(),
        };
        if let Some(seed) = self.seed {
            cfg.master_seed = seed;
        }
        if let Some(spec) = &self.grid {
            config::apply_grid_spec(&mut cfg.grid, spec)?;
        }
        if let Some(list) = &self.functions {
            cfg.grid.function_ids = config::parse_functions(list)?;
        }
        if let Some(t) = self.tmin_convention {
            cfg.tmin_convention = match t {
                TminChoice::PerFunction => TminConvention::PerFunction,
                TminChoice::PerNMax => TminConvention::PerNMax,
            };
        }
        if self.allow_holes {
            cfg.allow_holes = true;
        }
        if let Some(p) = &self.endpoint {
            cfg.endpoint = Some(config::load_endpoint(p)?);
            cfg.mock = None;
        }
        if let Some(p) = &self.judge_endpoint {
            cfg.judge_endpoint = Some(config::load_endpoint(p)?);
        }
        if let Some(m) = self.mock {
            cfg.mock = Some(m);
            cfg.endpoint = None;
        }
        if let Some(c) = &self.cost {
            cfg.cost = config::parse_cost(c)?;
        }
        if self.rho_log {
            cfg.rho_log = true;
        }
        if let Some(m) = self.mode {
            cfg.prompt_mode = match m {
                ModeChoice::Reasoning => PromptMode::Reasoning,
                ModeChoice::Direct => PromptMode::DirectAnswer,
            };
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn run_command(command: &Command, cfg: &RunConfig, dir: &RunDir) -> CliResult<()> {
    match command {
        Command::Gen => {
            let s = commands::cmd_gen(cfg, dir)?;
            println!("generated {} instances ({} failed cells)", s.instances, s.failed_cells);
        }
        Command::Export => {
            let n = commands::cmd_export(cfg, dir)?;
            println!("rendered {n} prompts");
        }
        Command::Solve { strategy } => {
            let s = commands::cmd_solve(dir, *strategy)?;
            println!(
                "solved {} instances, {} traces, agreement rate {:.4}",
                s.instances, s.trace_rows, s.agreement_rate
            );
        }
        Command::Run { no_judge } => {
            let s = commands::cmd_run(cfg, dir, !no_judge)?;
            println!(
                "{} records: {} correct, {} unparsed, {} judged",
                s.records, s.correct, s.unparsed, s.judged
            );
        }
        Command::Report => {
            let b = report::cmd_report(dir)?;
            println!(
                "reported {} records, accuracy {}",
                b.overall.records,
                dataset::fmt_opt(b.overall.accuracy())
            );
        }
        Command::Fit => {
            let f = commands::cmd_fit(cfg, dir)?;
            if let Some(best) = f.comparison.as_ref().and_then(|c| c.best()) {
                println!("best model: {} (AIC {:.2})", best.model, best.aic);
            }
        }
        Command::Landscape => {
            let l = commands::cmd_landscape(cfg, dir)?;
            println!("landscape with {} cells, {} contour points", l.cells.len(), l.contour.len());
        }
        Command::Predict => {
            let n = commands::cmd_predict(cfg, dir)?;
            println!("predicted {n} cells");
        }
        Command::All => {
            for c in [
                Command::Gen,
                Command::Solve {
                    strategy: StrategyChoice::Both,
                },
                Command::Run { no_judge: false },
                Command::Report,
                Command::Fit,
                Command::Landscape,
            ] {
                run_command(&c, cfg, dir)?;
            }
        }
    }
    Ok(())
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Gen => "gen",
        Command::Export => "export",
        Command::Solve { .. } => "solve",
        Command::Run { .. } => "run",
        Command::Report => "report",
        Command::Fit => "fit",
        Command::Landscape => "landscape",
        Command::Predict => "predict",
        Command::All => "all",
    }
}

/// Resolves the configuration, records it in the run directory and runs the command.
pub fn execute(cli: &Cli) -> CliResult<()> {
    let cfg = cli.opts.resolve()?;
    let dir = RunDir::new(&cli.opts.out);
    cfg.write_resolved(dir.root())?;
    let started = now();
    let result = run_command(&cli.command, &cfg, &dir);
    dir.stamp(command_name(&cli.command), &started)?;
    result
}

/// Entry point used by the binary; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let level = match cli.opts.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).try_init();
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

