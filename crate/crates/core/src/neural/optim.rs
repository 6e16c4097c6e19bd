//! First-order optimizers over a flat parameter vector.

use serde::{Deserialize, Serialize};

use super::NeuralError;
use crate::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum OptimizerKind {
    Adam,
    AdamW,
    Adamax,
    RmsProp,
}

impl OptimizerKind {
    pub const ALL: [OptimizerKind; 4] =
        [OptimizerKind::Adam, OptimizerKind::AdamW, OptimizerKind::Adamax, OptimizerKind::RmsProp];

    pub fn name(self) -> &'static str {
        match self {
            OptimizerKind::Adam => "Adam",
            OptimizerKind::AdamW => "AdamW",
            OptimizerKind::Adamax => "Adamax",
            OptimizerKind::RmsProp => "RMSprop",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        match name.to_ascii_lowercase().as_str() {
            "adam" => Some(OptimizerKind::Adam),
            "adamw" => Some(OptimizerKind::AdamW),
            "adamax" => Some(OptimizerKind::Adamax),
            "rmsprop" | "rms_prop" => Some(OptimizerKind::RmsProp),
            _ => None,
        }
    }
}

/// Hyperparameters. `rho` is the RMSprop decay; `weight_decay` only
/// affects AdamW.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub kind: OptimizerKind,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub rho: f64,
    pub epsilon: f64,
    pub weight_decay: f64,
}

impl OptimizerConfig {
    pub fn new(kind: OptimizerKind) -> Self {
        OptimizerConfig {
            kind,
            learning_rate: if kind == OptimizerKind::Adamax { 0.002 } else { 0.001 },
            beta1: 0.9,
            beta2: 0.999,
            rho: 0.9,
            epsilon: 1e-8,
            weight_decay: 1e-2,
        }
    }

    pub fn with_learning_rate(mut self, lr: f64) -> Self {
        self.learning_rate = lr;
        self
    }

    pub fn validate(&self) -> Result<(), NeuralError> {
        let in_unit = |v: f64| (0.0..1.0).contains(&v);
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(NeuralError::Config("learning_rate must be positive".into()));
        }
        if !in_unit(self.beta1) || !in_unit(self.beta2) || !in_unit(self.rho) {
            return Err(NeuralError::Config("decay rates must lie in [0, 1)".into()));
        }
        if !(self.epsilon > 0.0) || !(self.weight_decay >= 0.0) {
            return Err(NeuralError::Config("epsilon must be positive, weight_decay non-negative".into()));
        }
        Ok(())
    }
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig::new(OptimizerKind::Adam)
    }
}

/// Optimizer with its moment buffers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Optimizer<T: Scalar> {
    pub config: OptimizerConfig,
    pub step: u64,
    #[serde(with = "scalar_vec")]
    pub m: Vec<T>,
    #[serde(with = "scalar_vec")]
    pub v: Vec<T>,
}

impl<T: Scalar> Optimizer<T> {
    pub fn new(config: OptimizerConfig, parameter_count: usize) -> Result<Self, NeuralError> {
        config.validate()?;
        Ok(Optimizer { config, step: 0, m: vec![T::zero(); parameter_count], v: vec![T::zero(); parameter_count] })
    }

    /// Applies one update in place.
    pub fn step(&mut self, params: &mut [T], grad: &[T]) -> Result<(), NeuralError> {
        if params.len() != grad.len() || params.len() != self.m.len() {
            return Err(NeuralError::Shape(format!(
                "optimizer state {} vs parameters {} vs gradient {}",
                self.m.len(),
                params.len(),
                grad.len()
            )));
        }
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(NeuralError::NonFiniteGradient);
        }
        let c = &self.config;
        let lr = T::lit(c.learning_rate);
        let (b1, b2, eps) = (T::lit(c.beta1), T::lit(c.beta2), T::lit(c.epsilon));
        let one = T::one();
        self.step += 1;
        let t = self.step as i32;
        match c.kind {
            OptimizerKind::Adam | OptimizerKind::AdamW => {
                if c.kind == OptimizerKind::AdamW {
                    let decay = one - lr * T::lit(c.weight_decay);
                    params.iter_mut().for_each(|p| *p *= decay);
                }
                let bc1 = one - b1.powi(t);
                let bc2 = one - b2.powi(t);
                for i in 0..params.len() {
                    let g = grad[i];
                    self.m[i] = b1 * self.m[i] + (one - b1) * g;
                    self.v[i] = b2 * self.v[i] + (one - b2) * g * g;
                    let m_hat = self.m[i] / bc1;
                    let v_hat = self.v[i] / bc2;
                    params[i] -= lr * m_hat / (v_hat.sqrt() + eps);
                }
            }
            OptimizerKind::Adamax => {
                let bc1 = one - b1.powi(t);
                for i in 0..params.len() {
                    let g = grad[i];
                    self.m[i] = b1 * self.m[i] + (one - b1) * g;
                    self.v[i] = (b2 * self.v[i]).max(g.abs());
                    params[i] -= lr / bc1 * self.m[i] / (self.v[i] + eps);
                }
            }
            OptimizerKind::RmsProp => {
                let rho = T::lit(c.rho);
                for i in 0..params.len() {
                    let g = grad[i];
                    self.v[i] = rho * self.v[i] + (one - rho) * g * g;
                    params[i] -= lr * g / (self.v[i] + eps).sqrt();
                }
            }
        }
        Ok(())
    }
}

pub(crate) mod scalar_vec {
    use crate::Scalar;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<T: Scalar, S: Serializer>(v: &[T], s: S) -> Result<S::Ok, S::Error> {
        v.iter().map(|x| x.as_f64()).collect::<Vec<f64>>().serialize(s)
    }

    pub fn deserialize<'de, T: Scalar, D: Deserializer<'de>>(d: D) -> Result<Vec<T>, D::Error> {
        Ok(Vec::<f64>::deserialize(d)?.into_iter().map(T::lit).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimize(kind: OptimizerKind, steps: usize) -> f64 {
        let mut opt = Optimizer::<f64>::new(OptimizerConfig::new(kind), 1).unwrap();
        let mut theta = [1.0];
        let mut best = f64::INFINITY;
        for _ in 0..steps {
            let g = [2.0 * theta[0]];
            opt.step(&mut theta, &g).unwrap();
            best = best.min(theta[0].abs());
        }
        best
    }

    #[test]
    fn quadratic_converges() {
        for kind in OptimizerKind::ALL {
            let t = minimize(kind, 10_000);
            assert!(t < 1e-3, "{kind:?} reached only {t}");
        }
    }

    #[test]
    fn closed_form_first_steps() {
        let mut ax = Optimizer::<f64>::new(OptimizerConfig::new(OptimizerKind::Adamax), 1).unwrap();
        let mut p = [0.0];
        ax.step(&mut p, &[3.0]).unwrap();
        assert!((p[0] + 0.002).abs() < 1e-10);

        let g = 0.7;
        let mut rms = Optimizer::<f64>::new(OptimizerConfig::new(OptimizerKind::RmsProp), 1).unwrap();
        let mut p = [0.0];
        rms.step(&mut p, &[g]).unwrap();
        assert!((p[0] + 0.001 * g / (0.1 * g * g + 1e-8f64).sqrt()).abs() < 1e-15);

        for kind in OptimizerKind::ALL {
            let mut cfg = OptimizerConfig::new(kind);
            cfg.weight_decay = 0.0;
            let mut o = Optimizer::<f64>::new(cfg, 2).unwrap();
            let mut p = [0.4, -2.0];
            o.step(&mut p, &[0.0, 0.0]).unwrap();
            assert_eq!(p, [0.4, -2.0]);
            assert_eq!(o.step, 1);
        }
    }

    #[test]
    fn adam_first_step_is_learning_rate() {
        let mut opt = Optimizer::<f64>::new(OptimizerConfig::new(OptimizerKind::Adam), 2).unwrap();
        let mut p = [1.0, -1.0];
        opt.step(&mut p, &[0.3, -7.0]).unwrap();
        assert!((p[0] - 0.999).abs() < 1e-9);
        assert!((p[1] + 0.999).abs() < 1e-9);
    }

    #[test]
    fn adamw_decays_with_zero_gradient() {
        let mut opt = Optimizer::<f64>::new(OptimizerConfig::new(OptimizerKind::AdamW), 1).unwrap();
        let mut p = [2.0];
        opt.step(&mut p, &[0.0]).unwrap();
        assert!((p[0] - 2.0 * (1.0 - 0.001 * 0.01)).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_input() {
        let mut opt = Optimizer::<f64>::new(OptimizerConfig::default(), 1).unwrap();
        assert!(matches!(opt.step(&mut [1.0], &[f64::NAN]), Err(NeuralError::NonFiniteGradient)));
        assert!(matches!(opt.step(&mut [1.0, 2.0], &[0.0, 0.0]), Err(NeuralError::Shape(_))));
        let bad = OptimizerConfig::default().with_learning_rate(-1.0);
        assert!(Optimizer::<f64>::new(bad, 1).is_err());
    }
}
