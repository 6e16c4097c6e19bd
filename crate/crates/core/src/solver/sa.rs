use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{check_bounds, finish, gene_caps, random_individual, scored, HistoryPoint, SolveResult, SolverError};
use crate::model::ScenarioSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SaParams {
    pub initial_temp: f64,
    /// Geometric factor applied to the temperature after every step.
    pub cooling_rate: f64,
    pub steps: usize,
    pub penalty_weight: f64,
    pub rng_seed: u64,
}

impl Default for SaParams {
    fn default() -> Self {
        SaParams { initial_temp: 10.0, cooling_rate: 0.999, steps: 10_000, penalty_weight: 1e6, rng_seed: 0 }
    }
}

impl SaParams {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.rng_seed = seed;
        self
    }
}

/// Simulated annealing with a ±1 move on one random gene and Metropolis
/// acceptance. The best state ever visited is returned.
pub fn solve_sa(scenario: &ScenarioSpec, params: &SaParams) -> Result<SolveResult, SolverError> {
    check_bounds(scenario)?;
    if !(params.initial_temp >= 0.0) || !(0.0..=1.0).contains(&params.cooling_rate) {
        return Err(SolverError::InvalidParams("initial_temp must be >= 0 and cooling_rate in [0, 1]".into()));
    }
    if !(params.penalty_weight > 0.0) {
        return Err(SolverError::InvalidParams("penalty_weight must be > 0".into()));
    }
    let caps = gene_caps(scenario);
    let w = params.penalty_weight;
    let mut rng = ChaCha8Rng::seed_from_u64(params.rng_seed);

    let mut current = random_individual(scenario, &caps, &mut rng);
    let (mut current_f, mut current_feasible) = scored(scenario, &current, w)?;
    let mut best = current.clone();
    let (mut best_f, mut best_feasible) = (current_f, current_feasible);
    let mut history = vec![HistoryPoint { generation: 0, best_objective: best_f, feasible: best_feasible }];
    let mut evaluations = 1u64;
    let mut temp = params.initial_temp;
    let genes = caps.len();

    for step in 1..=params.steps {
        if genes > 0 {
            let g = rng.gen_range(0..genes);
            let up = rng.gen_bool(0.5);
            let mut candidate = current.clone();
            let gene = candidate.flat_mut().nth(g).expect("gene index");
            let moved = if up { (*gene + 1).min(caps[g]) } else { gene.saturating_sub(1) };
            if moved != *gene {
                *gene = moved;
                let (f, feasible) = scored(scenario, &candidate, w)?;
                evaluations += 1;
                let delta = f - current_f;
                let accept = delta <= 0.0 || (temp > 0.0 && rng.gen::<f64>() < (-delta / temp).exp());
                if accept {
                    current = candidate;
                    current_f = f;
                    current_feasible = feasible;
                    if current_f < best_f {
                        best = current.clone();
                        best_f = current_f;
                        best_feasible = current_feasible;
                    }
                }
            }
        }
        temp *= params.cooling_rate;
        history.push(HistoryPoint { generation: step, best_objective: best_f, feasible: best_feasible });
    }

    finish(scenario, best, history, evaluations)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::tests::tiny;

    #[test]
    fn forced_coverage_minimum() {
        let sc = tiny(2);
        let r = solve_sa(&sc, &SaParams::default().with_seed(5)).unwrap();
        assert_eq!(r.best_objective, 2.0);
        assert!(r.feasible);
    }

    #[test]
    fn zero_steps_returns_initial() {
        let sc = tiny(2);
        let p = SaParams { steps: 0, ..SaParams::default() }.with_seed(9);
        let r = solve_sa(&sc, &p).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let expected = random_individual(&sc, &gene_caps(&sc), &mut rng);
        assert_eq!(r.best, expected);
        assert_eq!(r.history.len(), 1);
        assert_eq!(r.feasible, expected.counts[0][0] >= 2);
    }
}
