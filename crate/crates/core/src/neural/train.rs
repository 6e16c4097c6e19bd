//! Full-batch (or fixed-order mini-batch) training loop.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::loss::LossKind;
use super::network::{batch_loss, batch_loss_and_gradient, init_parameters, NetworkConfig};
use super::optim::{scalar_vec, Optimizer, OptimizerConfig};
use super::NeuralError;
use crate::dataset::Dataset;
use crate::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StopRule {
    pub max_iterations: usize,
    pub target_loss: f64,
}

impl Default for StopRule {
    fn default() -> Self {
        StopRule { max_iterations: 2000, target_loss: 1e-7 }
    }
}

/// `batch_size = None` trains on the whole dataset every iteration;
/// otherwise consecutive chunks are visited in dataset order.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainOptions {
    pub stop: StopRule,
    pub batch_size: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct TrainState<T: Scalar> {
    pub config: NetworkConfig,
    #[serde(with = "scalar_vec")]
    pub parameters: Vec<T>,
    pub optimizer: Optimizer<T>,
    pub iteration: usize,
    /// `(iteration, loss)` measured before each update.
    pub loss_history: Vec<(usize, f64)>,
    pub rng_seed: u64,
    /// Full-dataset loss of the final parameters.
    pub final_loss: Option<f64>,
}

impl<T: Scalar> TrainState<T> {
    /// Fresh parameters from `rng_seed`; RBF centers are sampled from
    /// `rbf_inputs` when given.
    pub fn new(
        config: NetworkConfig,
        optimizer: OptimizerConfig,
        rng_seed: u64,
        rbf_inputs: Option<&[Vec<T>]>,
    ) -> Result<Self, NeuralError> {
        let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
        let parameters = init_parameters(&config, &mut rng, rbf_inputs)?;
        let optimizer = Optimizer::new(optimizer, parameters.len())?;
        Ok(TrainState { config, parameters, optimizer, iteration: 0, loss_history: Vec::new(), rng_seed, final_loss: None })
    }

    pub fn log_csv(&self) -> String {
        let mut s = String::from("iteration,loss\n");
        for (i, l) in &self.loss_history {
            s.push_str(&format!("{i},{l}\n"));
        }
        s
    }
}

/// Initializes a network for `dataset` and trains it.
pub fn train<T: Scalar>(
    config: &NetworkConfig,
    dataset: &Dataset<T>,
    loss_kind: &LossKind<T>,
    optimizer: OptimizerConfig,
    options: &TrainOptions,
    rng_seed: u64,
) -> Result<TrainState<T>, NeuralError> {
    if dataset.is_empty() {
        return Err(NeuralError::Shape("empty dataset".into()));
    }
    let in_width = if config.is_recurrent() { dataset.feature_count } else { config.input_units };
    if in_width != config.input_units || dataset.target_width != config.output_units {
        return Err(NeuralError::Shape(format!(
            "dataset {}→{} does not fit network {}→{}",
            in_width, dataset.target_width, config.input_units, config.output_units
        )));
    }
    let inputs: Vec<Vec<T>> = dataset.samples.iter().map(|s| s.input.clone()).collect();
    let mut state = TrainState::new(config.clone(), optimizer, rng_seed, Some(&inputs))?;
    let batch: Vec<(&[T], &[T])> = dataset.samples.iter().map(|s| (&s.input[..], &s.target[..])).collect();
    resume(&mut state, &batch, loss_kind, options)?;
    Ok(state)
}

/// Continues training `state` on `(input, target)` pairs.
pub fn resume<T: Scalar>(
    state: &mut TrainState<T>,
    batch: &[(&[T], &[T])],
    loss_kind: &LossKind<T>,
    options: &TrainOptions,
) -> Result<(), NeuralError> {
    if batch.is_empty() {
        return Err(NeuralError::Shape("empty dataset".into()));
    }
    let chunk = options.batch_size.unwrap_or(batch.len()).clamp(1, batch.len());
    let chunks: Vec<&[(&[T], &[T])]> = batch.chunks(chunk).collect();
    let full_batch = chunks.len() == 1;
    for _ in 0..options.stop.max_iterations {
        let part = chunks[state.iteration % chunks.len()];
        let (loss, grad) = batch_loss_and_gradient(&state.config, &state.parameters, part, loss_kind)?;
        let loss = loss.as_f64();
        if !loss.is_finite() {
            return Err(NeuralError::Diverged { iteration: state.iteration });
        }
        state.loss_history.push((state.iteration, loss));
        if full_batch && loss <= options.stop.target_loss {
            break;
        }
        state.optimizer.step(&mut state.parameters, &grad).map_err(|e| match e {
            NeuralError::NonFiniteGradient => NeuralError::Diverged { iteration: state.iteration },
            other => other,
        })?;
        state.iteration += 1;
        if state.parameters.iter().any(|p| !p.is_finite()) {
            return Err(NeuralError::Diverged { iteration: state.iteration });
        }
        if !full_batch && options.stop.target_loss > 0.0 {
            let full = batch_loss(&state.config, &state.parameters, batch, loss_kind)?.as_f64();
            if full <= options.stop.target_loss {
                break;
            }
        }
    }
    let final_loss = batch_loss(&state.config, &state.parameters, batch, loss_kind)?.as_f64();
    if !final_loss.is_finite() {
        return Err(NeuralError::Diverged { iteration: state.iteration });
    }
    state.final_loss = Some(final_loss);
    Ok(())
}
