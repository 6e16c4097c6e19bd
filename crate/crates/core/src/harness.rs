//! Built-in scenarios and the solve → generate → train → forecast pipeline
//! behind the command-line tool.
//!
//! Every stage returns its files as an [`Artifacts`] map so callers decide
//! where they go; nothing here touches input files.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::forecast::{
    evaluate_vcc, fit, predict_schedule, run_comparison, run_strategy_study, ComparisonResult, ForecastConfig,
    ForecastError, ForecastReport, TrainedModel,
};
use crate::model::{
    ConstraintExpr, Employee, EmployeeId, ObjectiveKind, Position, PositionId, ScenarioSpec, ScheduleTable,
    StaffingVector,
};
use crate::neural::{encode_parameters, LossKind, NeuralError, OptimizerConfig, OptimizerKind, Preset, StopRule};
use crate::roster::{generate, GenerateError};
use crate::solver::{solve_ga, solve_sa, violated_atoms, GaParams, SaParams, SolveResult, SolverError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Solve,
    Generate,
    Train,
    Forecast,
    Compare,
    StrategyStudy,
    MarketDemo,
    BusDemo,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::Generate => "generate",
            Command::Train => "train",
            Command::Forecast => "forecast",
            Command::Compare => "compare",
            Command::StrategyStudy => "strategy-study",
            Command::MarketDemo => "market-demo",
            Command::BusDemo => "bus-demo",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Config,
    Solve,
    Generate,
    Train,
    Forecast,
    Compare,
    Study,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Stage::Config => "config",
            Stage::Solve => "solve",
            Stage::Generate => "generate",
            Stage::Train => "train",
            Stage::Forecast => "forecast",
            Stage::Compare => "compare",
            Stage::Study => "strategy-study",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HarnessError {
    #[error("{0}")]
    Usage(String),
    #[error("i/o: {0}")]
    Io(String),
    #[error("{stage} stage infeasible: {detail}")]
    Infeasible { stage: Stage, detail: String },
    #[error("{stage} stage diverged: {detail}")]
    Diverged { stage: Stage, detail: String },
    #[error("{stage} stage failed: {detail}")]
    Failed { stage: Stage, detail: String },
}

impl HarnessError {
    /// 1 usage or I/O, 2 infeasible, 3 training divergence.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Usage(_) | HarnessError::Io(_) | HarnessError::Failed { .. } => 1,
            HarnessError::Infeasible { .. } => 2,
            HarnessError::Diverged { .. } => 3,
        }
    }

    fn from_solver(e: SolverError) -> Self {
        match e {
            SolverError::InfeasibleBounds(d) => HarnessError::Infeasible { stage: Stage::Solve, detail: d },
            other => HarnessError::Failed { stage: Stage::Solve, detail: other.to_string() },
        }
    }

    fn from_generate(e: GenerateError) -> Self {
        match e {
            GenerateError::Model(m) => HarnessError::Failed { stage: Stage::Generate, detail: m.to_string() },
            GenerateError::AuditFailed(atoms) => {
                HarnessError::Infeasible { stage: Stage::Generate, detail: format!("roster violates {}", atom_list(&atoms)) }
            }
            other => HarnessError::Infeasible { stage: Stage::Generate, detail: other.to_string() },
        }
    }

    fn from_forecast(stage: Stage, e: ForecastError) -> Self {
        match e {
            ForecastError::Neural(NeuralError::Diverged { .. }) | ForecastError::Neural(NeuralError::NonFiniteGradient) => {
                HarnessError::Diverged { stage, detail: e.to_string() }
            }
            other => HarnessError::Failed { stage, detail: other.to_string() },
        }
    }
}

fn atom_list(atoms: &[u8]) -> String {
    atoms.iter().map(|k| format!("φ{k}")).collect::<Vec<_>>().join(", ")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SolverChoice {
    #[default]
    Ga,
    Sa,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StudyConfig {
    pub optimizers: Vec<OptimizerKind>,
    pub losses: Vec<LossKind<f64>>,
}

impl Default for StudyConfig {
    fn default() -> Self {
        StudyConfig { optimizers: OptimizerKind::ALL.to_vec(), losses: LossKind::all().to_vec() }
    }
}

/// Fully resolved run configuration; echoed into `manifest.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub scenario: ScenarioSpec,
    pub solver: SolverChoice,
    pub ga: GaParams,
    pub sa: SaParams,
    pub forecast: ForecastConfig,
    /// Trailing days held out for forecasting.
    pub test_days: u32,
    pub networks: Vec<Preset>,
    pub study: StudyConfig,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        market_config()
    }
}

impl RunConfig {
    /// Propagates `seed` to every stochastic component.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self.ga.rng_seed = seed;
        self.sa.rng_seed = seed;
        self.forecast.seed = seed;
        self.scenario.rng_seed = seed;
        self
    }

    pub fn train_days(&self) -> Result<u32, HarnessError> {
        let h = self.scenario.day_horizon;
        if self.test_days == 0 || self.test_days >= h {
            return Err(HarnessError::Usage(format!("test_days {} must lie in 1..{h}", self.test_days)));
        }
        Ok(h - self.test_days)
    }

    /// Sets a dotted-path key such as `ga.population_size`. The value is
    /// read as JSON when it parses, as a string otherwise.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), HarnessError> {
        let mut root = serde_json::to_value(&*self).map_err(|e| HarnessError::Usage(e.to_string()))?;
        let mut node = &mut root;
        for part in key.split('.') {
            node = match node {
                Value::Object(map) => map.get_mut(part),
                Value::Array(items) => part.parse::<usize>().ok().and_then(move |i| items.get_mut(i)),
                _ => None,
            }
            .ok_or_else(|| HarnessError::Usage(format!("unknown configuration key `{key}`")))?;
        }
        *node = serde_json::from_str(value).unwrap_or_else(|_| Value::String(value.to_string()));
        *self = serde_json::from_value(root).map_err(|e| HarnessError::Usage(format!("{key}={value}: {e}")))?;
        Ok(())
    }
}

fn shop_employee(id: u32, position: u32, proficiency: f64, wage: f64) -> Employee {
    Employee {
        id: EmployeeId(id),
        position_id: PositionId(position),
        proficiency,
        wage_rate: wage,
        max_hours_per_cycle: 40.0,
        min_hours_per_cycle: 0.0,
        min_rest_days_per_cycle: 2,
        max_consecutive_days: None,
    }
}

/// Supermarket with cashiers and floor staff on two 8-hour shifts over four
/// weeks; total staffing capped at 60.
pub fn market_scenario() -> ScenarioSpec {
    // (name, required per shift, headcount max, staff, wage, urgent)
    let table: [(&str, [u32; 2], u32, u32, f64, bool); 6] = [
        ("cashier", [4, 3], 12, 12, 14.0, true),
        ("stocker", [2, 2], 8, 7, 13.0, false),
        ("deli", [2, 1], 6, 5, 15.0, false),
        ("customer service", [1, 1], 4, 4, 15.5, false),
        ("security", [1, 1], 4, 4, 16.0, false),
        ("supervisor", [1, 1], 3, 4, 22.0, false),
    ];
    let mut positions = Vec::new();
    let mut employees = Vec::new();
    for (p, (name, req, max, staff, wage, urgent)) in table.into_iter().enumerate() {
        let pid = p as u32 + 1;
        positions.push(Position {
            id: PositionId(pid),
            name: name.to_string(),
            shift_hours: vec![8.0, 8.0],
            required_per_shift: req.to_vec(),
            headcount_min: 0,
            headcount_max: max,
            urgent,
            cooperation_group: None,
        });
        for k in 0..staff {
            let id = employees.len() as u32 + 1;
            employees.push(shop_employee(id, pid, 1.0 + 0.1 * (k % 3) as f64, wage));
        }
    }
    ScenarioSpec {
        positions,
        employees,
        day_horizon: 28,
        cycle_length_days: 7,
        total_headcount_min: 0,
        total_headcount_max: 60,
        payroll_min: 0.0,
        payroll_max: f64::MAX,
        rotation_order: None,
        constraint_expr: ConstraintExpr::all_of([1, 2, 3, 4, 5, 6, 7, 8, 10]),
        objective: ObjectiveKind::Headcount,
        rng_seed: 0,
    }
}

/// Eight bus routes, two drivers each, one 8-hour duty per day, two rest
/// days per week, two weeks.
pub fn bus_scenario() -> ScenarioSpec {
    let positions = (1..=8)
        .map(|r| Position {
            id: PositionId(r),
            name: format!("route {r}"),
            shift_hours: vec![8.0],
            required_per_shift: vec![1],
            headcount_min: 1,
            headcount_max: 2,
            urgent: false,
            cooperation_group: None,
        })
        .collect();
    let employees = (0..16).map(|i| shop_employee(i + 1, i / 2 + 1, 1.0, 18.0)).collect();
    ScenarioSpec {
        positions,
        employees,
        day_horizon: 14,
        cycle_length_days: 7,
        total_headcount_min: 0,
        total_headcount_max: 16,
        payroll_min: 0.0,
        payroll_max: f64::MAX,
        rotation_order: None,
        constraint_expr: ConstraintExpr::all_of([1, 2, 3, 6, 10]),
        objective: ObjectiveKind::Headcount,
        rng_seed: 0,
    }
}

pub fn market_config() -> RunConfig {
    RunConfig {
        scenario: market_scenario(),
        solver: SolverChoice::Ga,
        ga: GaParams::default(),
        sa: SaParams::default(),
        forecast: ForecastConfig {
            stop: StopRule { max_iterations: 2000, target_loss: 1e-7 },
            ..ForecastConfig::default()
        },
        test_days: 7,
        networks: Preset::ALL.to_vec(),
        study: StudyConfig::default(),
        seed: 0,
    }
}

pub fn bus_config() -> RunConfig {
    let mut cfg = market_config();
    cfg.scenario = bus_scenario();
    cfg.forecast.per_position = false;
    cfg.networks = vec![Preset::Fdnn];
    cfg
}

/// Named output files.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Artifacts {
    pub files: BTreeMap<String, Vec<u8>>,
}

impl Artifacts {
    pub fn put(&mut self, name: impl Into<String>, content: impl Into<Vec<u8>>) {
        self.files.insert(name.into(), content.into());
    }

    pub fn put_json<S: Serialize>(&mut self, name: &str, value: &S) {
        let text = serde_json::to_string_pretty(value).expect("serializable");
        self.put(name, text + "\n");
    }

    pub fn get(&self, name: &str) -> Option<&[u8]> {
        self.files.get(name).map(Vec::as_slice)
    }

    /// Writes every file under `dir`, creating it if needed.
    pub fn write_to(&self, dir: &Path) -> Result<(), HarnessError> {
        std::fs::create_dir_all(dir).map_err(|e| HarnessError::Io(format!("{}: {e}", dir.display())))?;
        for (name, content) in &self.files {
            let path = dir.join(name);
            std::fs::write(&path, content).map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))?;
        }
        Ok(())
    }
}

/// Upstream results found on disk; missing ones are computed inline.
#[derive(Debug, Clone, Default)]
pub struct Inputs {
    pub staffing: Option<StaffingVector>,
    pub roster: Option<ScheduleTable>,
    pub model: Option<TrainedModel<f64>>,
}

/// Contents of `staffing.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StaffingReport {
    pub solver: SolverChoice,
    pub staffing: StaffingVector,
    pub total_headcount: u64,
    pub objective: ObjectiveKind,
    pub best_objective: f64,
    pub feasible: bool,
    pub violated_atoms: Vec<u8>,
    pub evaluations: u64,
}

/// Files and the error, if any, that stopped the pipeline.
#[derive(Debug, Clone, Default)]
pub struct RunOutcome {
    pub artifacts: Artifacts,
    pub error: Option<HarnessError>,
}

impl RunOutcome {
    pub fn exit_code(&self) -> i32 {
        self.error.as_ref().map_or(0, HarnessError::exit_code)
    }
}

struct Pipeline<'a> {
    cfg: &'a RunConfig,
    inputs: Inputs,
    out: Artifacts,
}

impl<'a> Pipeline<'a> {
    fn solve(&mut self) -> Result<StaffingVector, HarnessError> {
        if let Some(s) = &self.inputs.staffing {
            return Ok(s.clone());
        }
        let sc = &self.cfg.scenario;
        let (result, log): (SolveResult, &str) = match self.cfg.solver {
            SolverChoice::Ga => (solve_ga(sc, &self.cfg.ga).map_err(HarnessError::from_solver)?, "ga_log.csv"),
            SolverChoice::Sa => (solve_sa(sc, &self.cfg.sa).map_err(HarnessError::from_solver)?, "sa_log.csv"),
        };
        let violated = violated_atoms(sc, &result.best)
            .map_err(|e| HarnessError::Failed { stage: Stage::Solve, detail: e.to_string() })?;
        self.out.put(log, result.log_csv());
        self.out.put_json(
            "staffing.json",
            &StaffingReport {
                solver: self.cfg.solver,
                staffing: result.best.clone(),
                total_headcount: result.best.total(),
                objective: sc.objective,
                best_objective: result.best_objective,
                feasible: result.feasible,
                violated_atoms: violated.clone(),
                evaluations: result.evaluations,
            },
        );
        if !result.feasible {
            return Err(HarnessError::Infeasible {
                stage: Stage::Solve,
                detail: format!("best staffing violates {}", atom_list(&violated)),
            });
        }
        self.inputs.staffing = Some(result.best.clone());
        Ok(result.best)
    }

    fn generate(&mut self) -> Result<ScheduleTable, HarnessError> {
        if let Some(t) = &self.inputs.roster {
            return Ok(t.clone());
        }
        let staffing = self.solve()?;
        let table = generate(&self.cfg.scenario, &staffing, self.cfg.seed).map_err(HarnessError::from_generate)?;
        self.out.put("roster.csv", table.to_csv());
        self.inputs.roster = Some(table.clone());
        Ok(table)
    }

    fn train(&mut self) -> Result<(TrainedModel<f64>, ScheduleTable), HarnessError> {
        let roster = self.generate()?;
        let train_days = self.cfg.train_days()?;
        let train = roster.slice_days(0..train_days);
        if let Some(m) = &self.inputs.model {
            return Ok((m.clone(), roster));
        }
        let cfg = &self.cfg.forecast;
        let model = fit::<f64>(&train, Some(&self.cfg.scenario), cfg)
            .map_err(|e| HarnessError::from_forecast(Stage::Train, e))?;
        let name = cfg.preset.name();
        let mut curve = String::from("iteration,loss\n");
        for (i, l) in model.loss_curve() {
            curve.push_str(&format!("{i},{l}\n"));
        }
        self.out.put(format!("{name}_loss.csv"), curve);
        for (g, group) in model.groups.iter().enumerate() {
            let bytes = encode_parameters(&group.state.parameters)
                .map_err(|e| HarnessError::Failed { stage: Stage::Train, detail: e.to_string() })?;
            self.out.put(format!("{name}_{g}.rfnn"), bytes);
        }
        self.out.put_json("model.json", &model);
        self.inputs.model = Some(model.clone());
        Ok((model, roster))
    }

    fn forecast(&mut self) -> Result<ForecastReport, HarnessError> {
        let (model, roster) = self.train()?;
        let train_days = self.cfg.train_days()?;
        let train = roster.slice_days(0..train_days);
        let test = roster.slice_days(train_days..roster.day_horizon());
        let fail = |e| HarnessError::from_forecast(Stage::Forecast, e);
        let predicted = predict_schedule(&model, test.day_horizon(), &train).map_err(fail)?;
        let score = evaluate_vcc(&predicted, &test).map_err(fail)?;
        self.out.put("forecast.csv", predicted.to_csv());
        let report = ForecastReport {
            network_name: model.config.preset.name().to_string(),
            optimizer: model.config.optimizer.kind.name().to_string(),
            loss: model.config.loss.name().to_string(),
            v_cc: score.v_cc,
            matched_days: score.matched_days,
            test_days: score.test_days,
            cell_accuracy: score.cell_accuracy,
            final_train_loss: model.final_loss(),
            iterations_run: model.iterations_run(),
            loss_curve: model.loss_curve(),
            failed: false,
            error: None,
            predicted: Some(predicted),
        };
        self.out.put_json("report.json", &report);
        Ok(report)
    }

    fn emit_comparison(&mut self, result: &ComparisonResult, file: &str) {
        for r in &result.reports {
            self.out.put(r.loss_file_name(), r.loss_csv());
        }
        self.out.put_json(file, result);
    }

    fn compare(&mut self) -> Result<ComparisonResult, HarnessError> {
        let roster = self.generate()?;
        let train_days = self.cfg.train_days()?;
        if self.cfg.networks.is_empty() {
            return Err(HarnessError::Usage("no networks selected".into()));
        }
        let result =
            run_comparison::<f64>(&roster, Some(&self.cfg.scenario), &self.cfg.networks, &self.cfg.forecast, train_days);
        self.emit_comparison(&result, "report.json");
        for r in &result.reports {
            if let Some(t) = &r.predicted {
                self.out.put(format!("forecast_{}.csv", r.network_name), t.to_csv());
            }
        }
        let best = result.ranking.first().and_then(|n| result.reports.iter().find(|r| &r.network_name == n));
        if let Some(t) = best.and_then(|r| r.predicted.as_ref()) {
            self.out.put("forecast.csv", t.to_csv());
        }
        Ok(result)
    }

    fn study(&mut self) -> Result<ComparisonResult, HarnessError> {
        let roster = self.generate()?;
        let train_days = self.cfg.train_days()?;
        let s = &self.cfg.study;
        let result = run_strategy_study::<f64>(
            &roster,
            Some(&self.cfg.scenario),
            &self.cfg.forecast,
            &s.optimizers,
            &s.losses,
            train_days,
        );
        self.emit_comparison(&result, "study.json");
        Ok(result)
    }
}

/// Runs `command`; partial artifacts are kept when a later stage fails.
pub fn run(command: Command, cfg: &RunConfig, inputs: Inputs) -> RunOutcome {
    let mut p = Pipeline { cfg, inputs, out: Artifacts::default() };
    let result = match command {
        Command::Solve => p.solve().map(|_| ()),
        Command::Generate => p.generate().map(|_| ()),
        Command::Train => p.train().map(|_| ()),
        Command::Forecast | Command::BusDemo => p.forecast().map(|_| ()),
        Command::Compare | Command::MarketDemo => p.compare().map(|_| ()),
        Command::StrategyStudy => p.study().map(|_| ()),
    };
    RunOutcome { artifacts: p.out, error: result.err() }
}

/// Base configuration of each command: the demos carry their own
/// scenarios, everything else starts from the market defaults.
pub fn base_config(command: Command) -> RunConfig {
    match command {
        Command::BusDemo => bus_config(),
        _ => market_config(),
    }
}

/// Applies the shared command-line strategy flags.
pub fn apply_flags(
    cfg: &mut RunConfig,
    network: Option<&str>,
    optimizer: Option<&str>,
    loss: Option<&str>,
    iterations: Option<usize>,
) -> Result<(), HarnessError> {
    if let Some(n) = network {
        let presets = n
            .split(',')
            .map(|s| Preset::parse(s.trim()).ok_or_else(|| HarnessError::Usage(format!("unknown network `{s}`"))))
            .collect::<Result<Vec<_>, _>>()?;
        cfg.forecast.preset = presets[0];
        cfg.networks = presets;
    }
    if let Some(o) = optimizer {
        let kind = OptimizerKind::parse(o).ok_or_else(|| HarnessError::Usage(format!("unknown optimizer `{o}`")))?;
        cfg.forecast.optimizer = OptimizerConfig::new(kind);
    }
    if let Some(l) = loss {
        cfg.forecast.loss = LossKind::parse(l).ok_or_else(|| HarnessError::Usage(format!("unknown loss `{l}`")))?;
    }
    if let Some(i) = iterations {
        cfg.forecast.stop.max_iterations = i;
    }
    Ok(())
}

/// Echo of a run, sufficient to reproduce it: `config` can be fed back
/// with `--config`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub scenario_path: Option<String>,
    pub command: Command,
    pub output_dir: String,
    pub seed: u64,
    pub overrides: Vec<(String, String)>,
    pub config: RunConfig,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_scenarios_validate() {
        market_scenario().validate().unwrap();
        bus_scenario().validate().unwrap();
        assert_eq!(market_scenario().total_headcount_max, 60);
        let bus = bus_scenario();
        assert_eq!((bus.positions.len(), bus.day_horizon), (8, 14));
    }

    #[test]
    fn dotted_overrides() {
        let mut cfg = market_config();
        cfg.set("ga.population_size", "12").unwrap();
        cfg.set("forecast.stop.max_iterations", "5").unwrap();
        cfg.set("scenario.positions.0.name", "till").unwrap();
        cfg.set("forecast.preset", "\"GRU\"").unwrap();
        assert_eq!(cfg.ga.population_size, 12);
        assert_eq!(cfg.forecast.stop.max_iterations, 5);
        assert_eq!(cfg.scenario.positions[0].name, "till");
        assert_eq!(cfg.forecast.preset, Preset::Gru);
        cfg.set("forecast.preset", "LSTM").unwrap();
        assert_eq!(cfg.forecast.preset, Preset::Lstm);
        assert!(matches!(cfg.set("ga.nope", "1"), Err(HarnessError::Usage(_))));
        assert!(matches!(cfg.set("ga.population_size", "many"), Err(HarnessError::Usage(_))));
    }

    #[test]
    fn seed_reaches_every_component() {
        let cfg = market_config().with_seed(42);
        assert_eq!(
            (cfg.ga.rng_seed, cfg.sa.rng_seed, cfg.forecast.seed, cfg.scenario.rng_seed),
            (42, 42, 42, 42)
        );
    }

    #[test]
    fn config_round_trips() {
        let cfg = bus_config().with_seed(3);
        let back: RunConfig = serde_json::from_str(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn impossible_bounds_exit_2() {
        let mut cfg = market_config();
        cfg.scenario.positions[0].headcount_max = 0;
        let out = run(Command::Solve, &cfg, Inputs::default());
        assert_eq!(out.exit_code(), 2);
        assert!(out.error.unwrap().to_string().contains("φ"));
        assert!(out.artifacts.get("staffing.json").is_some());
    }
}
