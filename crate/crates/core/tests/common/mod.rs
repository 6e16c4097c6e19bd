#![allow(dead_code)]

use rosternet::model::{ScenarioSpec, StaffingVector};
use rosternet::neural::{batch_loss, LossKind, NetworkConfig};

/// Central finite difference of the batch loss with respect to one
/// parameter.
pub fn fd_partial(
    cfg: &NetworkConfig,
    params: &[f64],
    batch: &[(&[f64], &[f64])],
    loss: &LossKind<f64>,
    index: usize,
    step: f64,
) -> f64 {
    let mut p = params.to_vec();
    p[index] = params[index] + step;
    let up = batch_loss(cfg, &p, batch, loss).unwrap();
    p[index] = params[index] - step;
    let down = batch_loss(cfg, &p, batch, loss).unwrap();
    (up - down) / (2.0 * step)
}

pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

/// Every staffing vector with `0 ≤ x_ij ≤ headcount_max`.
pub fn enumerate_staffing(scenario: &ScenarioSpec) -> Vec<StaffingVector> {
    let shifts = scenario.shift_count();
    let caps: Vec<u32> = scenario
        .positions
        .iter()
        .flat_map(|p| std::iter::repeat_n(p.headcount_max, shifts))
        .collect();
    let mut out = Vec::new();
    let mut cur = vec![0u32; caps.len()];
    loop {
        let counts = cur.chunks(shifts.max(1)).map(<[u32]>::to_vec).collect();
        out.push(StaffingVector::new(counts));
        let mut i = 0;
        loop {
            if i == cur.len() {
                return out;
            }
            if cur[i] < caps[i] {
                cur[i] += 1;
                break;
            }
            cur[i] = 0;
            i += 1;
        }
    }
}
