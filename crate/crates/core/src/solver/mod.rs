//! Staffing optimisation: minimise the scenario objective subject to its
//! constraint expression.
//!
//! Individuals are staffing count matrices. Infeasibility is handled by a
//! penalty: `fitness = objective + penalty_weight × violated atoms`, with
//! roster-level atoms read through their table-free necessary conditions
//! (see [`relaxed`]).

mod ga;
pub mod relaxed;
mod sa;

use std::fmt::Write as _;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use crate::model::StaffingVector;
use crate::model::{objective_value, ModelError, ScenarioSpec};
pub use ga::{solve_ga, GaParams};
pub use relaxed::{evaluate_atom_relaxed, evaluate_expr_relaxed, violated_atoms};
pub use sa::{solve_sa, SaParams};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolverError {
    #[error("infeasible bounds: {0}")]
    InfeasibleBounds(String),
    #[error("invalid solver parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistoryPoint {
    /// Generation (GA) or step (SA).
    pub generation: usize,
    /// Penalised score of the incumbent; equals the objective once the
    /// incumbent is feasible.
    pub best_objective: f64,
    pub feasible: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    pub best: StaffingVector,
    /// Raw objective value of `best`.
    pub best_objective: f64,
    pub feasible: bool,
    pub history: Vec<HistoryPoint>,
    pub evaluations: u64,
}

impl SolveResult {
    /// Optimisation log: `generation,best_objective,feasible`.
    pub fn log_csv(&self) -> String {
        let mut out = String::from("generation,best_objective,feasible\n");
        for h in &self.history {
            let _ = writeln!(out, "{},{},{}", h.generation, h.best_objective, h.feasible as u8);
        }
        out
    }
}

/// Penalised objective; lower is better.
pub fn fitness(scenario: &ScenarioSpec, staffing: &StaffingVector, penalty_weight: f64) -> Result<f64, ModelError> {
    let objective = objective_value(scenario.objective, scenario, staffing)?;
    let violations = scenario
        .constraint_expr
        .violation_count(&mut |k| evaluate_atom_relaxed(k, scenario, staffing))?;
    Ok(objective + penalty_weight * violations as f64)
}

/// Upper bound of every gene: the owning position's `headcount_max`.
pub(crate) fn gene_caps(scenario: &ScenarioSpec) -> Vec<u32> {
    scenario
        .positions
        .iter()
        .flat_map(|p| std::iter::repeat_n(p.headcount_max, p.shift_count()))
        .collect()
}

/// Rejects scenarios whose bounds leave no staffing vector at all.
pub fn check_bounds(scenario: &ScenarioSpec) -> Result<(), SolverError> {
    scenario.validate()?;
    for p in &scenario.positions {
        if p.headcount_min > p.headcount_max {
            return Err(SolverError::InfeasibleBounds(format!(
                "position {} has headcount_min {} > headcount_max {}",
                p.id, p.headcount_min, p.headcount_max
            )));
        }
    }
    if scenario.total_headcount_min > scenario.total_headcount_max {
        return Err(SolverError::InfeasibleBounds(format!(
            "total_headcount_min {} > total_headcount_max {}",
            scenario.total_headcount_min, scenario.total_headcount_max
        )));
    }
    if scenario.payroll_min > scenario.payroll_max {
        return Err(SolverError::InfeasibleBounds("payroll_min > payroll_max".into()));
    }
    Ok(())
}

pub(crate) fn random_individual(scenario: &ScenarioSpec, caps: &[u32], rng: &mut impl Rng) -> StaffingVector {
    let mut x = StaffingVector::zeros(scenario);
    for (g, cap) in x.flat_mut().zip(caps) {
        *g = rng.gen_range(0..=*cap);
    }
    x
}

pub(crate) fn scored(scenario: &ScenarioSpec, x: &StaffingVector, w: f64) -> Result<(f64, bool), ModelError> {
    let f = fitness(scenario, x, w)?;
    let feasible = evaluate_expr_relaxed(&scenario.constraint_expr, scenario, x)?;
    Ok((f, feasible))
}

pub(crate) fn finish(
    scenario: &ScenarioSpec,
    best: StaffingVector,
    history: Vec<HistoryPoint>,
    evaluations: u64,
) -> Result<SolveResult, SolverError> {
    let best_objective = objective_value(scenario.objective, scenario, &best)?;
    let feasible = evaluate_expr_relaxed(&scenario.constraint_expr, scenario, &best)?;
    Ok(SolveResult { best, best_objective, feasible, history, evaluations })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ConstraintExpr, Employee, EmployeeId, ObjectiveKind, Position, PositionId};

    pub(crate) fn tiny(required: u32) -> ScenarioSpec {
        ScenarioSpec {
            positions: vec![Position {
                id: PositionId(1),
                name: "desk".into(),
                shift_hours: vec![8.0],
                required_per_shift: vec![required],
                headcount_min: 0,
                headcount_max: 10,
                urgent: false,
                cooperation_group: None,
            }],
            employees: (0..10)
                .map(|i| Employee {
                    id: EmployeeId(i),
                    position_id: PositionId(1),
                    proficiency: 1.0,
                    wage_rate: 12.0,
                    max_hours_per_cycle: 56.0,
                    min_hours_per_cycle: 0.0,
                    min_rest_days_per_cycle: 0,
                    max_consecutive_days: None,
                })
                .collect(),
            day_horizon: 7,
            cycle_length_days: 7,
            total_headcount_min: 0,
            total_headcount_max: 60,
            payroll_min: 0.0,
            payroll_max: f64::MAX,
            rotation_order: None,
            constraint_expr: ConstraintExpr::all_of([1, 2]),
            objective: ObjectiveKind::Headcount,
            rng_seed: 0,
        }
    }

    #[test]
    fn fitness_penalty_counts_atoms() {
        let mut sc = tiny(2);
        let ok = StaffingVector::new(vec![vec![2]]);
        assert_eq!(fitness(&sc, &ok, 1000.0).unwrap(), 2.0);
        let short = StaffingVector::new(vec![vec![1]]);
        assert_eq!(fitness(&sc, &short, 1000.0).unwrap(), 1.0 + 1000.0);
        // φ2 and φ5 both violated
        sc.total_headcount_min = 5;
        sc.constraint_expr = ConstraintExpr::all_of([2, 5]);
        assert!(!evaluate_atom_relaxed(2, &sc, &short).unwrap());
        assert!(!evaluate_atom_relaxed(5, &sc, &short).unwrap());
        assert_eq!(fitness(&sc, &short, 1000.0).unwrap(), 1.0 + 2000.0);
    }

    #[test]
    fn bounds_are_checked() {
        let mut sc = tiny(1);
        sc.positions[0].headcount_min = 5;
        sc.positions[0].headcount_max = 4;
        assert!(matches!(check_bounds(&sc), Err(SolverError::InfeasibleBounds(_))));
    }

    #[test]
    fn log_format() {
        let r = SolveResult {
            best: StaffingVector::new(vec![vec![1]]),
            best_objective: 1.0,
            feasible: true,
            history: vec![HistoryPoint { generation: 0, best_objective: 1.5, feasible: false }],
            evaluations: 1,
        };
        assert_eq!(r.log_csv(), "generation,best_objective,feasible\n0,1.5,0\n");
    }
}
