//! `rosternet`: command-line front end for the scheduling pipeline.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rosternet::harness::{
    apply_flags, base_config, run, Command, HarnessError, Inputs, RunConfig, RunManifest, StaffingReport,
};
use rosternet::model::{ScenarioSpec, ScheduleTable};
use rosternet::TrainedModel;

#[derive(Parser)]
#[command(name = "rosternet", version, about = "Staffing optimisation, roster generation and roster forecasting")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Optimise the staffing vector; writes staffing.json and the solver log.
    Solve(Opts),
    /// Build a roster from staffing.json (solved inline if absent).
    Generate(Opts),
    /// Train a network on the roster's training days.
    Train(Opts),
    /// Forecast the held-out days and score them.
    Forecast(Opts),
    /// Train and rank several networks.
    Compare(Opts),
    /// Compare optimizers and loss functions on one network.
    StrategyStudy(Opts),
    /// Built-in supermarket experiment.
    MarketDemo(Opts),
    /// Built-in eight-route bus experiment.
    BusDemo(Opts),
}

#[derive(Args, Clone)]
struct Opts {
    /// Scenario JSON file.
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Full run configuration, e.g. the `config` object of a manifest.json.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (created if absent).
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Dotted-path override, e.g. `ga.population_size=100`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Network preset (FDNN, RBFNN, RNN, LSTM, GRU); comma-separated for compare.
    #[arg(long)]
    network: Option<String>,
    #[arg(long)]
    optimizer: Option<String>,
    #[arg(long)]
    loss: Option<String>,
    #[arg(long)]
    iterations: Option<usize>,
}

impl Cmd {
    fn split(self) -> (Command, Opts) {
        match self {
            Cmd::Solve(o) => (Command::Solve, o),
            Cmd::Generate(o) => (Command::Generate, o),
            Cmd::Train(o) => (Command::Train, o),
            Cmd::Forecast(o) => (Command::Forecast, o),
            Cmd::Compare(o) => (Command::Compare, o),
            Cmd::StrategyStudy(o) => (Command::StrategyStudy, o),
            Cmd::MarketDemo(o) => (Command::MarketDemo, o),
            Cmd::BusDemo(o) => (Command::BusDemo, o),
        }
    }
}

fn read(path: &Path) -> Result<String, HarnessError> {
    std::fs::read_to_string(path).map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))
}

fn resolve(command: Command, opts: &Opts) -> Result<(RunConfig, Vec<(String, String)>), HarnessError> {
    let mut cfg = match &opts.config {
        Some(p) => serde_json::from_str(&read(p)?)
            .map_err(|e| HarnessError::Usage(format!("{}: {e}", p.display())))?,
        None => base_config(command),
    };
    if let Some(p) = &opts.scenario {
        let sc: ScenarioSpec =
            serde_json::from_str(&read(p)?).map_err(|e| HarnessError::Usage(format!("{}: {e}", p.display())))?;
        sc.validate().map_err(|e| HarnessError::Usage(format!("{}: {e}", p.display())))?;
        cfg.scenario = sc;
    }
    cfg = cfg.with_seed(opts.seed);
    apply_flags(&mut cfg, opts.network.as_deref(), opts.optimizer.as_deref(), opts.loss.as_deref(), opts.iterations)?;
    let mut overrides = Vec::new();
    for kv in &opts.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| HarnessError::Usage(format!("--set expects KEY=VALUE, got `{kv}`")))?;
        cfg.set(k.trim(), v.trim())?;
        overrides.push((k.trim().to_string(), v.trim().to_string()));
    }
    cfg.scenario.validate().map_err(|e| HarnessError::Usage(e.to_string()))?;
    Ok((cfg, overrides))
}

/// Upstream artifacts already present in the output directory. The demos
/// always start from scratch.
fn load_inputs(command: Command, dir: &Path) -> Result<Inputs, HarnessError> {
    let mut inputs = Inputs::default();
    if matches!(command, Command::Solve | Command::MarketDemo | Command::BusDemo) {
        return Ok(inputs);
    }
    let staffing = dir.join("staffing.json");
    if staffing.exists() {
        let rep: StaffingReport = serde_json::from_str(&read(&staffing)?)
            .map_err(|e| HarnessError::Usage(format!("{}: {e}", staffing.display())))?;
        if rep.feasible {
            inputs.staffing = Some(rep.staffing);
        }
    }
    if command == Command::Generate {
        return Ok(inputs);
    }
    let roster = dir.join("roster.csv");
    if roster.exists() {
        inputs.roster = Some(
            ScheduleTable::from_csv(&read(&roster)?)
                .map_err(|e| HarnessError::Usage(format!("{}: {e}", roster.display())))?,
        );
    }
    let model = dir.join("model.json");
    if command == Command::Forecast && model.exists() {
        let m: TrainedModel = serde_json::from_str(&read(&model)?)
            .map_err(|e| HarnessError::Usage(format!("{}: {e}", model.display())))?;
        inputs.model = Some(m);
    }
    Ok(inputs)
}

fn execute(command: Command, opts: &Opts) -> Result<(), HarnessError> {
    let (cfg, overrides) = resolve(command, opts)?;
    let manifest = RunManifest {
        scenario_path: opts.scenario.as_ref().map(|p| p.display().to_string()),
        command,
        output_dir: opts.out.display().to_string(),
        seed: opts.seed,
        overrides,
        config: cfg.clone(),
    };
    let inputs = load_inputs(command, &opts.out)?;
    let mut outcome = run(command, &cfg, inputs);
    outcome.artifacts.put_json("manifest.json", &manifest);
    outcome.artifacts.write_to(&opts.out)?;
    for name in outcome.artifacts.files.keys() {
        println!("wrote {}", opts.out.join(name).display());
    }
    match outcome.error {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, opts) = cli.command.split();
    match execute(command, &opts) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("rosternet {}: {e}", command.name());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
