use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{check_bounds, finish, gene_caps, random_individual, scored, HistoryPoint, SolveResult, SolverError};
use crate::model::{ModelError, ScenarioSpec, StaffingVector};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GaParams {
    pub population_size: usize,
    pub generations: usize,
    pub crossover_rate: f64,
    pub mutation_rate: f64,
    pub tournament_size: usize,
    pub penalty_weight: f64,
    pub rng_seed: u64,
}

impl Default for GaParams {
    fn default() -> Self {
        GaParams {
            population_size: 50,
            generations: 200,
            crossover_rate: 0.9,
            mutation_rate: 0.1,
            tournament_size: 3,
            penalty_weight: 1e6,
            rng_seed: 0,
        }
    }
}

impl GaParams {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.rng_seed = seed;
        self
    }

    fn validate(&self) -> Result<(), SolverError> {
        let bad = |m: &str| Err(SolverError::InvalidParams(m.to_string()));
        if self.population_size < 2 {
            return bad("population_size must be >= 2");
        }
        if self.tournament_size == 0 || self.tournament_size > self.population_size {
            return bad("tournament_size must lie in [1, population_size]");
        }
        if !(0.0..=1.0).contains(&self.crossover_rate) || !(0.0..=1.0).contains(&self.mutation_rate) {
            return bad("crossover_rate and mutation_rate must lie in [0, 1]");
        }
        if !(self.penalty_weight > 0.0) {
            return bad("penalty_weight must be > 0");
        }
        Ok(())
    }
}

struct Scored {
    x: StaffingVector,
    fitness: f64,
    feasible: bool,
}

fn evaluate(scenario: &ScenarioSpec, pop: Vec<StaffingVector>, w: f64) -> Result<Vec<Scored>, ModelError> {
    // scores depend only on the individual, so parallel order is irrelevant
    pop.into_par_iter()
        .map(|x| scored(scenario, &x, w).map(|(fitness, feasible)| Scored { x, fitness, feasible }))
        .collect()
}

fn tournament<'a>(pop: &'a [Scored], k: usize, rng: &mut impl Rng) -> &'a Scored {
    let mut best = &pop[rng.gen_range(0..pop.len())];
    for _ in 1..k {
        let c = &pop[rng.gen_range(0..pop.len())];
        if c.fitness < best.fitness {
            best = c;
        }
    }
    best
}

/// Elitist genetic algorithm over staffing count matrices: tournament
/// selection, uniform per-gene crossover, ±1 mutation clamped to
/// `[0, headcount_max]`.
pub fn solve_ga(scenario: &ScenarioSpec, params: &GaParams) -> Result<SolveResult, SolverError> {
    check_bounds(scenario)?;
    params.validate()?;
    let caps = gene_caps(scenario);
    let w = params.penalty_weight;
    let mut rng = ChaCha8Rng::seed_from_u64(params.rng_seed);

    // the requirement vector and the cap vector join the random population:
    // count-of-atoms penalties give no gradient towards coverage otherwise
    let mut required = StaffingVector::from_required(scenario);
    for (g, cap) in required.flat_mut().zip(&caps) {
        *g = (*g).min(*cap);
    }
    let mut ceiling = StaffingVector::zeros(scenario);
    for (g, cap) in ceiling.flat_mut().zip(&caps) {
        *g = *cap;
    }
    let mut initial: Vec<StaffingVector> = [required, ceiling].into_iter().take(params.population_size).collect();
    while initial.len() < params.population_size {
        initial.push(random_individual(scenario, &caps, &mut rng));
    }
    let mut pop = evaluate(scenario, initial, w)?;
    let mut evaluations = pop.len() as u64;

    let mut elite = 0;
    for (i, s) in pop.iter().enumerate() {
        if s.fitness < pop[elite].fitness {
            elite = i;
        }
    }
    let mut best_x = pop[elite].x.clone();
    let mut best_f = pop[elite].fitness;
    let mut best_feasible = pop[elite].feasible;
    let mut history = vec![HistoryPoint { generation: 0, best_objective: best_f, feasible: best_feasible }];

    for generation in 1..=params.generations {
        let mut next = Vec::with_capacity(params.population_size);
        next.push(best_x.clone());
        while next.len() < params.population_size {
            let a = tournament(&pop, params.tournament_size, &mut rng);
            let b = tournament(&pop, params.tournament_size, &mut rng);
            let mut child = a.x.clone();
            if rng.gen_bool(params.crossover_rate) {
                for (gene, other) in child.flat_mut().zip(b.x.flat()) {
                    if rng.gen_bool(0.5) {
                        *gene = other;
                    }
                }
            }
            for (gene, cap) in child.flat_mut().zip(&caps) {
                if rng.gen_bool(params.mutation_rate) {
                    *gene = if rng.gen_bool(0.5) { gene.saturating_sub(1) } else { (*gene + 1).min(*cap) };
                }
            }
            next.push(child);
        }
        pop = evaluate(scenario, next, w)?;
        evaluations += pop.len() as u64;
        for s in &pop {
            if s.fitness < best_f {
                best_f = s.fitness;
                best_x = s.x.clone();
                best_feasible = s.feasible;
            }
        }
        history.push(HistoryPoint { generation, best_objective: best_f, feasible: best_feasible });
    }

    finish(scenario, best_x, history, evaluations)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ConstraintExpr;
    use crate::solver::tests::tiny;

    #[test]
    fn forced_coverage_minimum() {
        let sc = tiny(2);
        let r = solve_ga(&sc, &GaParams::default().with_seed(3)).unwrap();
        assert_eq!(r.best.counts, vec![vec![2]]);
        assert_eq!(r.best_objective, 2.0);
        assert!(r.feasible);
        assert_eq!(r.history.len(), 201);
    }

    #[test]
    fn unconstrained_minimum_is_zero() {
        let mut sc = tiny(2);
        sc.constraint_expr = ConstraintExpr::vacuous();
        let r = solve_ga(&sc, &GaParams::default()).unwrap();
        assert_eq!(r.best.counts, vec![vec![0]]);
        assert_eq!(r.best_objective, 0.0);
    }

    #[test]
    fn elitist_and_deterministic() {
        let sc = tiny(3);
        let p = GaParams { generations: 40, ..GaParams::default() }.with_seed(11);
        let a = solve_ga(&sc, &p).unwrap();
        let b = solve_ga(&sc, &p).unwrap();
        assert_eq!(a, b);
        assert!(a.history.windows(2).all(|w| w[1].best_objective <= w[0].best_objective));
    }

    #[test]
    fn rejects_bad_params() {
        let sc = tiny(1);
        let p = GaParams { population_size: 1, ..GaParams::default() };
        assert!(matches!(solve_ga(&sc, &p), Err(SolverError::InvalidParams(_))));
        let p = GaParams { tournament_size: 99, ..GaParams::default() };
        assert!(matches!(solve_ga(&sc, &p), Err(SolverError::InvalidParams(_))));
    }
}
