mod common;

use common::{fd_partial, relative_error};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rosternet::neural::{
    backward, forward, init_parameters, ActivationKind, Architecture, CellKind, LossKind, NetworkConfig, Preset,
};

const STEP: f64 = 1e-5;
const TOL: f64 = 1e-4;

fn analytic(cfg: &NetworkConfig, p: &[f64], batch: &[(&[f64], &[f64])], loss: &LossKind<f64>) -> Vec<f64> {
    let mut g = vec![0.0; p.len()];
    for (x, y) in batch {
        let fwd = forward(cfg, p, x).unwrap();
        for (a, b) in g.iter_mut().zip(backward(cfg, p, &fwd, loss, y).unwrap()) {
            *a += b / batch.len() as f64;
        }
    }
    g
}

fn sample_inputs(cfg: &NetworkConfig, rng: &mut ChaCha8Rng, n: usize) -> Vec<(Vec<f64>, Vec<f64>)> {
    let width = if cfg.is_recurrent() { cfg.input_units * 5 } else { cfg.input_units };
    (0..n)
        .map(|_| {
            let x = (0..width).map(|_| rng.gen_range(0.0..1.0)).collect();
            let y = (0..cfg.output_units).map(|_| f64::from(rng.gen_range(0..2u8))).collect();
            (x, y)
        })
        .collect()
}

fn check(cfg: &NetworkConfig, loss: &LossKind<f64>, probes: usize, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = sample_inputs(cfg, &mut rng, 3);
    let xs: Vec<Vec<f64>> = data.iter().map(|d| d.0.clone()).collect();
    let p = init_parameters(cfg, &mut rng, Some(&xs)).unwrap();
    let batch: Vec<(&[f64], &[f64])> = data.iter().map(|(x, y)| (&x[..], &y[..])).collect();
    let g = analytic(cfg, &p, &batch, loss);
    for _ in 0..probes {
        let i = rng.gen_range(0..p.len());
        let fd = fd_partial(cfg, &p, &batch, loss, i, STEP);
        let e = relative_error(g[i], fd);
        assert!(e < TOL, "{:?} param {i}: analytic {} vs fd {fd} (rel {e})", cfg.architecture, g[i]);
    }
}

#[test]
fn presets_match_finite_differences() {
    for (k, preset) in Preset::ALL.into_iter().enumerate() {
        check(&preset.config(3), &LossKind::Mse, 100, 11 + k as u64);
    }
}

#[test]
fn every_loss_matches_finite_differences() {
    for (k, loss) in LossKind::<f64>::all().into_iter().enumerate() {
        let mut cfg = Preset::Fdnn.config(4);
        cfg.hidden_width = 8;
        if loss.is_logit() {
            cfg.output_activation = ActivationKind::Identity;
        }
        check(&cfg, &loss, 100, 40 + k as u64);
    }
}

#[test]
fn small_variants_match_finite_differences() {
    let mut seed = 70;
    for cell in [CellKind::Elman, CellKind::Lstm, CellKind::Gru] {
        for act in [ActivationKind::Tanh, ActivationKind::Sigmoid] {
            let cfg = NetworkConfig {
                architecture: Architecture::Recurrent(cell),
                input_units: 3,
                layer_count: 2,
                hidden_width: 5,
                activation: act,
                output_units: 2,
                output_activation: ActivationKind::Identity,
                rbf_trainable_centers: true,
            };
            check(&cfg, &LossKind::Mse, 150, seed);
            seed += 1;
        }
    }
    let rbf = NetworkConfig {
        architecture: Architecture::Rbf,
        input_units: 4,
        layer_count: 4,
        hidden_width: 6,
        activation: ActivationKind::Gaussian,
        output_units: 2,
        output_activation: ActivationKind::Sigmoid,
        rbf_trainable_centers: true,
    };
    check(&rbf, &LossKind::smooth_l1(), 150, seed);
}

#[test]
fn frozen_rbf_centers_get_no_gradient() {
    let mut cfg = Preset::Rbfnn.config(2);
    cfg.rbf_trainable_centers = false;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let x: Vec<f64> = (0..32).map(|_| rng.gen_range(0.0..1.0)).collect();
    let p = init_parameters(&cfg, &mut rng, Some(std::slice::from_ref(&x))).unwrap();
    let fwd = forward(&cfg, &p, &x).unwrap();
    let g = backward(&cfg, &p, &fwd, &LossKind::Mse, &[1.0, 0.0]).unwrap();
    let frozen = cfg.hidden_width * cfg.input_units + 1;
    assert!(g[..frozen].iter().all(|&v| v == 0.0));
    assert!(g[frozen..].iter().any(|&v| v != 0.0));
}
