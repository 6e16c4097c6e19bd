use serde::{Deserialize, Serialize};

use super::NeuralError;
use crate::neural::activation::sigmoid;
use crate::Scalar;

/// Cost functions, each reduced by the mean over all elements.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum LossKind<T> {
    Mse,
    L1,
    /// `½r²` for `|r| ≤ δ`, `δ|r| − ½δ²` beyond.
    SmoothL1 { delta: T },
    /// `−w[y log σ(ŷ) + (1−y) log(1−σ(ŷ))]` on raw logits `ŷ`.
    BceWithLogits { weight: T },
}

impl<T: Scalar> LossKind<T> {
    pub fn smooth_l1() -> Self {
        LossKind::SmoothL1 { delta: T::one() }
    }

    pub fn bce_with_logits() -> Self {
        LossKind::BceWithLogits { weight: T::one() }
    }

    /// The four kinds with default parameters.
    pub fn all() -> [Self; 4] {
        [LossKind::Mse, LossKind::L1, Self::smooth_l1(), Self::bce_with_logits()]
    }

    pub fn name(&self) -> &'static str {
        match self {
            LossKind::Mse => "MSE",
            LossKind::L1 => "L1",
            LossKind::SmoothL1 { .. } => "SMOOTH_L1",
            LossKind::BceWithLogits { .. } => "BCE_WITH_LOGITS",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        match name.to_ascii_uppercase().replace('-', "_").as_str() {
            "MSE" => Some(LossKind::Mse),
            "L1" => Some(LossKind::L1),
            "SMOOTH_L1" | "SMOOTHL1" => Some(Self::smooth_l1()),
            "BCE_WITH_LOGITS" | "BCE" => Some(Self::bce_with_logits()),
            _ => None,
        }
    }

    pub fn is_logit(&self) -> bool {
        matches!(self, LossKind::BceWithLogits { .. })
    }

    fn check(&self, predictions: &[T], targets: &[T]) -> Result<(), NeuralError> {
        if predictions.len() != targets.len() || predictions.is_empty() {
            return Err(NeuralError::Shape(format!(
                "loss over {} predictions and {} targets",
                predictions.len(),
                targets.len()
            )));
        }
        if self.is_logit() && targets.iter().any(|&y| y < T::zero() || y > T::one()) {
            return Err(NeuralError::TargetRange);
        }
        Ok(())
    }

    fn element(&self, p: T, y: T) -> T {
        let r = p - y;
        match *self {
            LossKind::Mse => r * r,
            LossKind::L1 => r.abs(),
            LossKind::SmoothL1 { delta } => {
                let a = r.abs();
                if a <= delta {
                    T::lit(0.5) * r * r
                } else {
                    delta * a - T::lit(0.5) * delta * delta
                }
            }
            // max(p,0) − p·y + ln(1 + e^{−|p|})
            LossKind::BceWithLogits { weight } => {
                weight * (p.max(T::zero()) - p * y + (-p.abs()).exp().ln_1p())
            }
        }
    }

    fn element_grad(&self, p: T, y: T) -> T {
        let r = p - y;
        match *self {
            LossKind::Mse => T::lit(2.0) * r,
            LossKind::L1 => {
                if r > T::zero() {
                    T::one()
                } else if r < T::zero() {
                    -T::one()
                } else {
                    T::zero()
                }
            }
            LossKind::SmoothL1 { delta } => {
                if r.abs() <= delta {
                    r
                } else {
                    delta * r.signum()
                }
            }
            LossKind::BceWithLogits { weight } => weight * (sigmoid(p) - y),
        }
    }

    /// Mean-reduced loss.
    pub fn value(&self, predictions: &[T], targets: &[T]) -> Result<T, NeuralError> {
        self.check(predictions, targets)?;
        let n = T::lit(predictions.len() as f64);
        Ok(predictions.iter().zip(targets).map(|(&p, &y)| self.element(p, y)).sum::<T>() / n)
    }

    /// Mean-reduced loss and its gradient with respect to the predictions.
    pub fn value_and_grad(&self, predictions: &[T], targets: &[T]) -> Result<(T, Vec<T>), NeuralError> {
        let value = self.value(predictions, targets)?;
        let n = T::lit(predictions.len() as f64);
        let grad = predictions.iter().zip(targets).map(|(&p, &y)| self.element_grad(p, y) / n).collect();
        Ok((value, grad))
    }
}

/// Mean-reduced loss of `kind` over `predictions` against `targets`.
pub fn loss<T: Scalar>(kind: &LossKind<T>, predictions: &[T], targets: &[T]) -> Result<T, NeuralError> {
    kind.value(predictions, targets)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn closed_forms() {
        assert_eq!(loss(&LossKind::Mse, &[0.3, 0.7], &[0.3, 0.7]).unwrap(), 0.0);
        assert_eq!(loss(&LossKind::L1, &[1.0], &[0.0]).unwrap(), 1.0);
        let bce = loss(&LossKind::bce_with_logits(), &[0.0f64], &[0.5]).unwrap();
        assert_abs_diff_eq!(bce, std::f64::consts::LN_2, epsilon = 1e-12);
    }

    #[test]
    fn smooth_l1_branches_meet() {
        let delta = 0.8f64;
        let quadratic = 0.5 * delta * delta;
        let linear = delta * delta - 0.5 * delta * delta;
        assert_abs_diff_eq!(quadratic, linear, epsilon = 1e-15);
        let k = LossKind::SmoothL1 { delta };
        assert_abs_diff_eq!(k.value(&[delta], &[0.0]).unwrap(), delta * delta / 2.0, epsilon = 1e-15);
        // derivative from both sides
        let (_, below) = k.value_and_grad(&[delta - 1e-12], &[0.0]).unwrap();
        let (_, above) = k.value_and_grad(&[delta + 1e-12], &[0.0]).unwrap();
        assert_abs_diff_eq!(below[0], above[0], epsilon = 1e-9);
    }

    #[test]
    fn shape_and_range_errors() {
        assert!(matches!(LossKind::<f64>::Mse.value(&[1.0], &[1.0, 2.0]), Err(NeuralError::Shape(_))));
        assert_eq!(LossKind::<f64>::bce_with_logits().value(&[0.0], &[1.5]), Err(NeuralError::TargetRange));
    }

    proptest! {
        #[test]
        fn non_negative_and_zero_iff_equal(
            p in proptest::collection::vec(-3.0f64..3.0, 1..8),
            shift in -2.0f64..2.0,
        ) {
            let y: Vec<f64> = p.iter().map(|v| v + shift).collect();
            for kind in [LossKind::Mse, LossKind::L1, LossKind::smooth_l1()] {
                let l = kind.value(&p, &y).unwrap();
                prop_assert!(l >= 0.0);
                prop_assert!(kind.value(&p, &p).unwrap() == 0.0);
                if shift.abs() > 1e-6 {
                    prop_assert!(l > 0.0);
                }
            }
        }
    }
}
