//! Trains networks on rosters, predicts future rosters and scores them
//! by whole-day matching.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{build_dataset, encode_binary32, normalize_window, DatasetError, Encoding, FeatureSpec};
use crate::model::{ModelError, ScenarioSpec, ScheduleTable};
use crate::neural::activation::sigmoid;
use crate::neural::{
    forward, LossKind, NetworkConfig, NeuralError, OptimizerConfig, OptimizerKind, Preset, StopRule, TrainOptions,
    TrainState,
};
use crate::Scalar;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ForecastError {
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Neural(#[from] NeuralError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("recurrent model needs {needed} context days, got {got}")]
    MissingContext { needed: usize, got: usize },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureMode {
    Summary,
    AttendanceRow,
}

/// Everything needed to fit one architecture to a roster.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForecastConfig {
    pub preset: Preset,
    /// Overrides the preset depth (neuron layers or stacked cells).
    pub layer_count: Option<usize>,
    pub hidden_width: Option<usize>,
    pub optimizer: OptimizerConfig,
    pub loss: LossKind<f64>,
    pub stop: StopRule,
    pub batch_size: Option<usize>,
    pub window_length: usize,
    pub features: FeatureMode,
    /// One model per position; `false` trains a single model on the whole
    /// table.
    pub per_position: bool,
    pub seed: u64,
}

impl Default for ForecastConfig {
    fn default() -> Self {
        ForecastConfig {
            preset: Preset::Fdnn,
            layer_count: None,
            hidden_width: None,
            optimizer: OptimizerConfig::new(OptimizerKind::Adamax),
            loss: LossKind::Mse,
            stop: StopRule::default(),
            batch_size: None,
            window_length: 7,
            features: FeatureMode::Summary,
            per_position: true,
            seed: 0,
        }
    }
}

impl ForecastConfig {
    pub fn with_preset(mut self, preset: Preset) -> Self {
        self.preset = preset;
        self
    }

    /// Network shape for a group with `feature_count` per-step features and
    /// `outputs` targets.
    pub fn network(&self, feature_count: usize, outputs: usize) -> NetworkConfig {
        let mut cfg = self.preset.config(outputs);
        if self.preset.is_recurrent() {
            cfg.input_units = feature_count;
        }
        if let Some(l) = self.layer_count {
            cfg.layer_count = l;
        }
        if let Some(h) = self.hidden_width {
            cfg.hidden_width = h;
        }
        if self.loss.is_logit() {
            cfg.output_activation = crate::neural::ActivationKind::Identity;
        }
        cfg
    }

    pub fn encoding(&self) -> Encoding {
        self.preset.encoding()
    }
}

/// One network covering a subset of table rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct GroupModel<T: Scalar> {
    /// Employee row indices in the full table.
    pub rows: Vec<usize>,
    pub feature_spec: FeatureSpec,
    pub normalization_bounds: Vec<(f64, f64)>,
    pub state: TrainState<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct TrainedModel<T: Scalar> {
    pub config: ForecastConfig,
    pub encoding: Encoding,
    pub window_length: usize,
    pub employee_count: usize,
    pub shift_count: usize,
    pub groups: Vec<GroupModel<T>>,
}

impl<T: Scalar> TrainedModel<T> {
    /// Element-weighted mean of the group losses, i.e. the loss over the
    /// whole table.
    pub fn final_loss(&self) -> f64 {
        let (mut num, mut den) = (0.0, 0.0);
        for g in &self.groups {
            let w = g.state.config.output_units as f64;
            num += w * g.state.final_loss.unwrap_or(f64::NAN);
            den += w;
        }
        num / den
    }

    pub fn iterations_run(&self) -> usize {
        self.groups.iter().map(|g| g.state.iteration).max().unwrap_or(0)
    }

    /// Element-weighted loss per iteration; groups that stopped early
    /// contribute their last recorded value. A run with no iterations
    /// yields the initial loss as a single point.
    pub fn loss_curve(&self) -> Vec<(usize, f64)> {
        let len = self.groups.iter().map(|g| g.state.loss_history.len()).max().unwrap_or(0);
        if len == 0 {
            return vec![(0, self.final_loss())];
        }
        (0..len)
            .map(|i| {
                let (mut num, mut den) = (0.0, 0.0);
                for g in &self.groups {
                    let h = &g.state.loss_history;
                    let v = h.get(i).or(h.last()).map_or(g.state.final_loss.unwrap_or(f64::NAN), |p| p.1);
                    let w = g.state.config.output_units as f64;
                    num += w * v;
                    den += w;
                }
                (i, num / den)
            })
            .collect()
    }
}

fn loss_as<T: Scalar>(l: &LossKind<f64>) -> LossKind<T> {
    match *l {
        LossKind::Mse => LossKind::Mse,
        LossKind::L1 => LossKind::L1,
        LossKind::SmoothL1 { delta } => LossKind::SmoothL1 { delta: T::lit(delta) },
        LossKind::BceWithLogits { weight } => LossKind::BceWithLogits { weight: T::lit(weight) },
    }
}

/// Row groups and their summary features: one per position (employees of
/// that position) or one for the whole table.
fn groups(
    table: &ScheduleTable,
    scenario: Option<&ScenarioSpec>,
    per_position: bool,
) -> Result<Vec<(Vec<usize>, FeatureSpec)>, ForecastError> {
    let shifts = table.shift_count();
    let summary = |positions: &[usize]| -> FeatureSpec {
        let Some(sc) = scenario else {
            return FeatureSpec::Summary { required_per_day: 0.0, shift_required: Vec::new() };
        };
        let mut shift_required = vec![0u32; shifts];
        for &p in positions {
            for (s, r) in sc.positions[p].required_per_shift.iter().enumerate().take(shifts) {
                shift_required[s] += r;
            }
        }
        let total: u32 = shift_required.iter().sum();
        FeatureSpec::Summary { required_per_day: total as f64, shift_required }
    };
    match scenario {
        Some(sc) if per_position => {
            if table.employee_count() != sc.employees.len() || table.shift_count() != sc.shift_count() {
                return Err(ForecastError::Dimension(format!(
                    "table has {} employees and {} shifts, scenario has {} and {}",
                    table.employee_count(),
                    table.shift_count(),
                    sc.employees.len(),
                    sc.shift_count()
                )));
            }
            Ok((0..sc.positions.len())
                .map(|p| (sc.members_of(p), summary(&[p])))
                .filter(|(rows, _)| !rows.is_empty())
                .collect())
        }
        _ => {
            let all: Vec<usize> = scenario.map_or(Vec::new(), |sc| (0..sc.positions.len()).collect());
            Ok(vec![((0..table.employee_count()).collect(), summary(&all))])
        }
    }
}

/// Fits one network per row group on the whole of `train`.
pub fn fit<T: Scalar>(
    train: &ScheduleTable,
    scenario: Option<&ScenarioSpec>,
    config: &ForecastConfig,
) -> Result<TrainedModel<T>, ForecastError> {
    let encoding = config.encoding();
    let window = if encoding == Encoding::Windowed { config.window_length } else { 0 };
    let loss = loss_as::<T>(&config.loss);
    let options = TrainOptions { stop: config.stop, batch_size: config.batch_size };
    let mut out = Vec::new();
    for (gi, (rows, summary)) in groups(train, scenario, config.per_position)?.into_iter().enumerate() {
        let sub = train.select_employees(&rows);
        let spec = match config.features {
            FeatureMode::Summary => summary,
            FeatureMode::AttendanceRow => FeatureSpec::AttendanceRow,
        };
        let ds = build_dataset::<T>(&sub, encoding, window, &spec)?;
        let net = config.network(ds.feature_count, ds.target_width);
        let seed = config.seed.wrapping_add(gi as u64);
        let state = crate::neural::train(&net, &ds, &loss, config.optimizer, &options, seed)?;
        out.push(GroupModel {
            rows,
            feature_spec: spec,
            normalization_bounds: ds.normalization_bounds.iter().map(|(a, b)| (a.as_f64(), b.as_f64())).collect(),
            state,
        });
    }
    Ok(TrainedModel {
        config: config.clone(),
        encoding,
        window_length: window,
        employee_count: train.employee_count(),
        shift_count: train.shift_count(),
        groups: out,
    })
}

fn threshold<T: Scalar>(outputs: &[T], logits: bool) -> Vec<u8> {
    outputs
        .iter()
        .map(|&v| {
            let p = if logits { sigmoid(v) } else { v };
            u8::from(p >= T::lit(0.5))
        })
        .collect()
}

/// Predicts days `start_day .. start_day + horizon_days`. Recurrent models
/// read the `window_length` days of `context` before `start_day` and then
/// feed back their own thresholded predictions.
pub fn predict_range<T: Scalar>(
    model: &TrainedModel<T>,
    start_day: u32,
    horizon_days: u32,
    context: &ScheduleTable,
) -> Result<ScheduleTable, ForecastError> {
    if horizon_days == 0 {
        return Err(ForecastError::Dimension("horizon must be at least one day".into()));
    }
    if context.employee_count() != model.employee_count || context.shift_count() != model.shift_count {
        return Err(ForecastError::Dimension(format!(
            "context is {}x{} but the model was trained on {}x{}",
            context.employee_count(),
            context.shift_count(),
            model.employee_count,
            model.shift_count
        )));
    }
    let logits = model.config.loss.is_logit();
    let mut out = ScheduleTable::new(context.employee_ids().to_vec(), horizon_days, model.shift_count);
    for g in &model.groups {
        let mut sub = ScheduleTable::new(g.rows.iter().map(|&r| context.employee_ids()[r]).collect(), horizon_days, model.shift_count);
        match model.encoding {
            Encoding::Binary32 => {
                for i in 0..horizon_days {
                    let x = encode_binary32::<T>(start_day as u64 + i as u64)?;
                    let y = forward(&g.state.config, &g.state.parameters, &x)?.output;
                    sub.set_day_row(i, &threshold(&y, logits));
                }
            }
            Encoding::Windowed => {
                let w = model.window_length;
                if (start_day as usize) < w || context.day_horizon() < start_day {
                    return Err(ForecastError::MissingContext {
                        needed: w,
                        got: start_day.min(context.day_horizon()) as usize,
                    });
                }
                let ctx = context.select_employees(&g.rows);
                let bounds: Vec<(T, T)> =
                    g.normalization_bounds.iter().map(|&(a, b)| (T::lit(a), T::lit(b))).collect();
                let mut window: Vec<Vec<T>> = (start_day - w as u32..start_day)
                    .map(|d| g.feature_spec.day_features(&ctx.day_row(d), d, model.shift_count))
                    .collect();
                for i in 0..horizon_days {
                    let raw: Vec<T> = window.iter().flatten().copied().collect();
                    let x = normalize_window(&raw, &bounds);
                    let y = forward(&g.state.config, &g.state.parameters, &x)?.output;
                    let row = threshold(&y, logits);
                    let day = start_day + i;
                    window.remove(0);
                    window.push(g.feature_spec.day_features(&row, day, model.shift_count));
                    sub.set_day_row(i, &row);
                }
            }
        }
        out.merge_rows(&g.rows, &sub);
    }
    Ok(out)
}

/// Predicts the `horizon_days` days that follow `context`.
pub fn predict_schedule<T: Scalar>(
    model: &TrainedModel<T>,
    horizon_days: u32,
    context: &ScheduleTable,
) -> Result<ScheduleTable, ForecastError> {
    predict_range(model, context.day_horizon(), horizon_days, context)
}

/// Whole-day match counts; `cell_accuracy` is the per-cell diagnostic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VccScore {
    pub matched_days: u32,
    pub test_days: u32,
    pub v_cc: f64,
    pub cell_accuracy: f64,
}

pub fn evaluate_vcc(predicted: &ScheduleTable, actual: &ScheduleTable) -> Result<VccScore, ForecastError> {
    if !predicted.same_shape(actual) {
        return Err(ForecastError::Dimension(format!(
            "{}x{}x{} vs {}x{}x{}",
            predicted.employee_count(),
            predicted.day_horizon(),
            predicted.shift_count(),
            actual.employee_count(),
            actual.day_horizon(),
            actual.shift_count()
        )));
    }
    let days = actual.day_horizon();
    let mut matched = 0;
    let mut cells = 0usize;
    let mut equal = 0usize;
    for d in 0..days {
        let (p, a) = (predicted.day_row(d), actual.day_row(d));
        if p == a {
            matched += 1;
        }
        cells += a.len();
        equal += p.iter().zip(&a).filter(|(x, y)| x == y).count();
    }
    let ratio = |n: f64, d: f64| if d == 0.0 { 0.0 } else { n / d };
    Ok(VccScore {
        matched_days: matched,
        test_days: days,
        v_cc: ratio(matched as f64, days as f64),
        cell_accuracy: ratio(equal as f64, cells as f64),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastReport {
    pub network_name: String,
    pub optimizer: String,
    pub loss: String,
    pub v_cc: f64,
    pub matched_days: u32,
    pub test_days: u32,
    pub cell_accuracy: f64,
    pub final_train_loss: f64,
    pub iterations_run: usize,
    pub loss_curve: Vec<(usize, f64)>,
    pub failed: bool,
    pub error: Option<String>,
    #[serde(skip)]
    pub predicted: Option<ScheduleTable>,
}

impl ForecastReport {
    pub fn loss_csv(&self) -> String {
        let mut s = String::from("iteration,loss\n");
        for (i, l) in &self.loss_curve {
            s.push_str(&format!("{i},{l}\n"));
        }
        s
    }

    /// `<network>_loss.csv`, with characters unsafe in file names replaced.
    pub fn loss_file_name(&self) -> String {
        let clean: String = self
            .network_name
            .chars()
            .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
            .collect();
        format!("{clean}_loss.csv")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonResult {
    pub reports: Vec<ForecastReport>,
    pub ranking: Vec<String>,
}

/// Names ordered by V_cc descending, then final training loss ascending
/// (failed runs last), then name.
pub fn rank(reports: &[ForecastReport]) -> Vec<String> {
    let key = |r: &ForecastReport| if r.failed || !r.final_train_loss.is_finite() { f64::INFINITY } else { r.final_train_loss };
    let mut order: Vec<&ForecastReport> = reports.iter().collect();
    order.sort_by(|a, b| {
        b.v_cc
            .total_cmp(&a.v_cc)
            .then(key(a).total_cmp(&key(b)))
            .then(a.network_name.cmp(&b.network_name))
    });
    order.into_iter().map(|r| r.network_name.clone()).collect()
}

/// Trains on days `0..train_days` and scores the prediction of the rest.
pub fn evaluate_config<T: Scalar>(
    name: &str,
    table: &ScheduleTable,
    scenario: Option<&ScenarioSpec>,
    config: &ForecastConfig,
    train_days: u32,
) -> ForecastReport {
    let mut report = ForecastReport {
        network_name: name.to_string(),
        optimizer: config.optimizer.kind.name().to_string(),
        loss: config.loss.name().to_string(),
        v_cc: 0.0,
        matched_days: 0,
        test_days: table.day_horizon().saturating_sub(train_days),
        cell_accuracy: 0.0,
        final_train_loss: f64::NAN,
        iterations_run: 0,
        loss_curve: Vec::new(),
        failed: false,
        error: None,
        predicted: None,
    };
    let run = || -> Result<(TrainedModel<T>, ScheduleTable, VccScore), ForecastError> {
        if train_days == 0 || train_days >= table.day_horizon() {
            return Err(ForecastError::Dimension(format!(
                "train_days {train_days} must lie strictly inside the {}-day table",
                table.day_horizon()
            )));
        }
        let train = table.slice_days(0..train_days);
        let test = table.slice_days(train_days..table.day_horizon());
        let model = fit::<T>(&train, scenario, config)?;
        let predicted = predict_schedule(&model, test.day_horizon(), &train)?;
        let score = evaluate_vcc(&predicted, &test)?;
        Ok((model, predicted, score))
    };
    match run() {
        Ok((model, predicted, score)) => {
            report.v_cc = score.v_cc;
            report.matched_days = score.matched_days;
            report.cell_accuracy = score.cell_accuracy;
            report.final_train_loss = model.final_loss();
            report.iterations_run = model.iterations_run();
            report.loss_curve = model.loss_curve();
            report.predicted = Some(predicted);
        }
        Err(e) => {
            report.failed = true;
            report.error = Some(e.to_string());
        }
    }
    report
}

/// Trains every preset with the same strategy and ranks them.
pub fn run_comparison<T: Scalar>(
    table: &ScheduleTable,
    scenario: Option<&ScenarioSpec>,
    presets: &[Preset],
    base: &ForecastConfig,
    train_days: u32,
) -> ComparisonResult {
    let reports: Vec<ForecastReport> = presets
        .par_iter()
        .map(|&p| evaluate_config::<T>(p.name(), table, scenario, &base.clone().with_preset(p), train_days))
        .collect();
    let ranking = rank(&reports);
    ComparisonResult { reports, ranking }
}

/// One run per optimizer (with the base loss) and one per loss (with the
/// base optimizer), all on the base network.
pub fn run_strategy_study<T: Scalar>(
    table: &ScheduleTable,
    scenario: Option<&ScenarioSpec>,
    base: &ForecastConfig,
    optimizers: &[OptimizerKind],
    losses: &[LossKind<f64>],
    train_days: u32,
) -> ComparisonResult {
    let net = base.preset.name();
    let mut variants: Vec<(String, ForecastConfig)> = Vec::new();
    for &k in optimizers {
        let mut c = base.clone();
        let lr = if base.optimizer.kind == k { base.optimizer.learning_rate } else { OptimizerConfig::new(k).learning_rate };
        c.optimizer = OptimizerConfig { kind: k, learning_rate: lr, ..base.optimizer };
        variants.push((format!("{net}-{}", k.name()), c));
    }
    for l in losses {
        let mut c = base.clone();
        c.loss = *l;
        variants.push((format!("{net}-{}", l.name()), c));
    }
    let reports: Vec<ForecastReport> = variants
        .par_iter()
        .map(|(name, c)| evaluate_config::<T>(name, table, scenario, c, train_days))
        .collect();
    let ranking = rank(&reports);
    ComparisonResult { reports, ranking }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::EmployeeId;

    fn table(days: u32, employees: u32, f: impl Fn(u32, u32) -> bool) -> ScheduleTable {
        let mut t = ScheduleTable::new((0..employees).map(EmployeeId).collect(), days, 1);
        for e in 0..employees {
            for d in 0..days {
                t.set(e as usize, d, 0, f(e, d));
            }
        }
        t
    }

    #[test]
    fn vcc_counts() {
        let a = table(30, 3, |e, d| (e + d) % 2 == 0);
        assert_eq!(evaluate_vcc(&a, &a).unwrap().v_cc, 1.0);
        let b = table(30, 3, |e, d| (e + d) % 2 == 1);
        let s = evaluate_vcc(&a, &b).unwrap();
        assert_eq!((s.v_cc, s.matched_days, s.cell_accuracy), (0.0, 0, 0.0));
        let mut half = a.clone();
        for d in 0..15 {
            half.set(0, d * 2, 0, !a.get(0, d * 2, 0));
        }
        let s = evaluate_vcc(&a, &half).unwrap();
        assert_eq!((s.matched_days, s.test_days, s.v_cc), (15, 30, 0.5));
        assert!(evaluate_vcc(&a, &table(29, 3, |_, _| true)).is_err());
    }

    fn constant_model(bias: f64, recurrent: bool) -> (TrainedModel<f64>, ScheduleTable) {
        let ctx = table(10, 2, |_, _| false);
        let config = ForecastConfig {
            preset: if recurrent { Preset::Gru } else { Preset::Fdnn },
            layer_count: Some(if recurrent { 1 } else { 2 }),
            stop: StopRule { max_iterations: 0, target_loss: 0.0 },
            features: FeatureMode::AttendanceRow,
            per_position: false,
            window_length: 3,
            loss: LossKind::Mse,
            ..ForecastConfig::default()
        };
        let mut model = fit::<f64>(&ctx, None, &config).unwrap();
        let params = &mut model.groups[0].state.parameters;
        params.iter_mut().for_each(|p| *p = 0.0);
        let n = params.len();
        // output biases are the last entries
        for p in &mut params[n - 2..] {
            *p = bias;
        }
        (model, ctx)
    }

    #[test]
    fn threshold_rule() {
        for recurrent in [false, true] {
            let (m, ctx) = constant_model(0.9, recurrent);
            let t = predict_schedule(&m, 5, &ctx).unwrap();
            assert!((0..5).all(|d| t.day_row(d) == vec![1, 1]));
            let (m, ctx) = constant_model(0.5, recurrent);
            let t = predict_schedule(&m, 5, &ctx).unwrap();
            assert!((0..5).all(|d| t.day_row(d) == vec![1, 1]));
            let (m, ctx) = constant_model(0.2, recurrent);
            let t = predict_schedule(&m, 5, &ctx).unwrap();
            assert!((0..5).all(|d| t.day_row(d) == vec![0, 0]));
        }
    }

    #[test]
    fn recurrent_needs_context() {
        let (m, _) = constant_model(0.9, true);
        let short = table(2, 2, |_, _| true);
        assert!(matches!(predict_schedule(&m, 1, &short), Err(ForecastError::MissingContext { .. })));
    }

    #[test]
    fn ranking_order() {
        let r = |name: &str, v: f64, l: f64, failed: bool| ForecastReport {
            network_name: name.into(),
            optimizer: String::new(),
            loss: String::new(),
            v_cc: v,
            matched_days: 0,
            test_days: 0,
            cell_accuracy: 0.0,
            final_train_loss: l,
            iterations_run: 0,
            loss_curve: vec![],
            failed,
            error: None,
            predicted: None,
        };
        let reports = vec![r("A", 0.5, 0.1, false), r("B", 0.9, 0.3, false), r("C", 0.5, 0.01, false), r("D", 0.0, f64::NAN, true)];
        assert_eq!(rank(&reports), vec!["B", "C", "A", "D"]);
    }
}
