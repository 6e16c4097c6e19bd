use serde::{Deserialize, Serialize};

use crate::Scalar;

/// Unit nonlinearities. `Gaussian` is only meaningful inside an RBF layer,
/// where each unit carries a center and the layer a shared width.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ActivationKind {
    Sigmoid,
    Gaussian,
    Tanh,
    Identity,
}

#[inline]
pub fn sigmoid<T: Scalar>(x: T) -> T {
    // split to keep exp() from overflowing
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

/// `exp(-‖x − center‖² / (2σ²))`
pub fn gaussian<T: Scalar>(x: &[T], center: &[T], sigma: T) -> T {
    let d2: T = x.iter().zip(center).map(|(&a, &b)| (a - b) * (a - b)).sum();
    (-d2 / (T::lit(2.0) * sigma * sigma)).exp()
}

impl ActivationKind {
    /// Pointwise application. Gaussian is applied as `exp(-x²/2)` here (a
    /// unit-width bump around zero); RBF layers use [`gaussian`] directly.
    #[inline]
    pub fn apply<T: Scalar>(self, x: T) -> T {
        match self {
            ActivationKind::Sigmoid => sigmoid(x),
            ActivationKind::Tanh => x.tanh(),
            ActivationKind::Identity => x,
            ActivationKind::Gaussian => (-x * x / T::lit(2.0)).exp(),
        }
    }

    /// Derivative expressed through the pre-activation `x` and output `y`.
    #[inline]
    pub fn derivative<T: Scalar>(self, x: T, y: T) -> T {
        match self {
            ActivationKind::Sigmoid => y * (T::one() - y),
            ActivationKind::Tanh => T::one() - y * y,
            ActivationKind::Identity => T::one(),
            ActivationKind::Gaussian => -x * y,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ActivationKind::Sigmoid => "SIGMOID",
            ActivationKind::Gaussian => "GAUSSIAN",
            ActivationKind::Tanh => "TANH",
            ActivationKind::Identity => "IDENTITY",
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn fixed_points() {
        assert_eq!(sigmoid(0.0f64), 0.5);
        assert_eq!(ActivationKind::Tanh.apply(0.0f64), 0.0);
        assert_eq!(gaussian(&[0.3f64, -1.0], &[0.3, -1.0], 0.7), 1.0);
        assert!(sigmoid(-800.0f64).is_finite() && sigmoid(800.0f64) == 1.0);
    }

    proptest! {
        #[test]
        fn sigmoid_symmetry(x in -30.0f64..30.0) {
            prop_assert!((sigmoid(-x) - (1.0 - sigmoid(x))).abs() < 1e-12);
        }

        #[test]
        fn tanh_is_odd(x in -10.0f64..10.0) {
            let t = ActivationKind::Tanh;
            prop_assert!((t.apply(-x) + t.apply(x)).abs() < 1e-12);
        }

        #[test]
        fn gaussian_peaks_at_center(
            c in proptest::collection::vec(-2.0f64..2.0, 3),
            d in proptest::collection::vec(-2.0f64..2.0, 3),
            sigma in 0.1f64..3.0,
        ) {
            let x: Vec<f64> = c.iter().zip(&d).map(|(a, b)| a + b).collect();
            let g = gaussian(&x, &c, sigma);
            prop_assert!(g <= 1.0);
            if d.iter().any(|v| v.abs() > 1e-3) {
                prop_assert!(g < 1.0);
            }
        }
    }
}
