//! Domain vocabulary: employees, positions, scenarios, rosters and the
//! constraint atoms evaluated over them.

mod atoms;
mod expr;
mod staffing;
mod table;

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use atoms::{
    evaluate_atom, evaluate_expr, mean_wage, objective_value, payroll_from_staffing,
    payroll_from_table, ATOM_COUNT,
};
pub use expr::ConstraintExpr;
pub use staffing::StaffingVector;
pub use table::{ScheduleTable, TableCsvError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EmployeeId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PositionId(pub u32);

impl fmt::Display for EmployeeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for PositionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Employee {
    pub id: EmployeeId,
    pub position_id: PositionId,
    #[serde(default = "default_proficiency")]
    pub proficiency: f64,
    /// Currency per hour.
    #[serde(default)]
    pub wage_rate: f64,
    pub max_hours_per_cycle: f64,
    #[serde(default)]
    pub min_hours_per_cycle: f64,
    #[serde(default)]
    pub min_rest_days_per_cycle: u32,
    /// Longest allowed run of consecutive working days. Checked together
    /// with the rest-day rule (φ6).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_consecutive_days: Option<u32>,
}

fn default_proficiency() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Position {
    pub id: PositionId,
    pub name: String,
    /// Hours worked per shift, indexed by shift.
    pub shift_hours: Vec<f64>,
    pub required_per_shift: Vec<u32>,
    #[serde(default)]
    pub headcount_min: u32,
    pub headcount_max: u32,
    #[serde(default)]
    pub urgent: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cooperation_group: Option<u32>,
}

impl Position {
    pub fn shift_count(&self) -> usize {
        self.shift_hours.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ObjectiveKind {
    /// Σ staffing counts.
    Headcount,
    /// Staffed hours over the horizon.
    TotalTime,
    /// Staffed hours priced at the position's mean wage.
    TotalCost,
}

impl ObjectiveKind {
    pub fn name(&self) -> &'static str {
        match self {
            ObjectiveKind::Headcount => "HEADCOUNT",
            ObjectiveKind::TotalTime => "TOTAL_TIME",
            ObjectiveKind::TotalCost => "TOTAL_COST",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub positions: Vec<Position>,
    pub employees: Vec<Employee>,
    pub day_horizon: u32,
    #[serde(default = "default_cycle_length")]
    pub cycle_length_days: u32,
    #[serde(default)]
    pub total_headcount_min: u32,
    pub total_headcount_max: u32,
    #[serde(default)]
    pub payroll_min: f64,
    #[serde(default = "default_payroll_max")]
    pub payroll_max: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rotation_order: Option<Vec<EmployeeId>>,
    pub constraint_expr: ConstraintExpr,
    pub objective: ObjectiveKind,
    #[serde(default)]
    pub rng_seed: u64,
}

fn default_cycle_length() -> u32 {
    7
}

fn default_payroll_max() -> f64 {
    f64::MAX
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("constraint index {0} is outside 1..=11")]
    AtomOutOfRange(u8),
    #[error("atom φ{0} inspects a roster but no schedule table was supplied")]
    MissingTable(u8),
    #[error("atom φ{0} needs a staffing vector but none was supplied")]
    MissingStaffing(u8),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("invalid constraint expression: {0}")]
    InvalidExpr(String),
}

impl ScenarioSpec {
    /// Structural validation. Bound consistency (min ≤ max headcounts) is
    /// left to the solver, which reports it as an empty search space.
    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: String| Err(ModelError::InvalidScenario(m));
        if self.positions.is_empty() {
            return bad("scenario has no positions".into());
        }
        if self.day_horizon == 0 {
            return bad("day_horizon must be >= 1".into());
        }
        if self.cycle_length_days == 0 {
            return bad("cycle_length_days must be >= 1".into());
        }
        let mut pos_ids = HashSet::new();
        for p in &self.positions {
            if !pos_ids.insert(p.id) {
                return bad(format!("duplicate position id {}", p.id));
            }
            if p.shift_hours.is_empty() || p.shift_hours.len() != p.required_per_shift.len() {
                return bad(format!(
                    "position {}: shift_hours and required_per_shift must have equal length >= 1",
                    p.id
                ));
            }
            if p.shift_hours.iter().any(|h| !h.is_finite() || *h < 0.0) {
                return bad(format!("position {}: shift hours must be finite and >= 0", p.id));
            }
        }
        let mut emp_ids = HashSet::new();
        for e in &self.employees {
            if !emp_ids.insert(e.id) {
                return bad(format!("duplicate employee id {}", e.id));
            }
            if !pos_ids.contains(&e.position_id) {
                return bad(format!("employee {} refers to unknown position {}", e.id, e.position_id));
            }
            if e.min_hours_per_cycle > e.max_hours_per_cycle {
                return bad(format!("employee {}: min_hours_per_cycle > max_hours_per_cycle", e.id));
            }
            if e.proficiency < 0.0 || e.wage_rate < 0.0 {
                return bad(format!("employee {}: proficiency and wage_rate must be >= 0", e.id));
            }
        }
        if let Some(order) = &self.rotation_order {
            for id in order {
                if !emp_ids.contains(id) {
                    return bad(format!("rotation_order names unknown employee {id}"));
                }
            }
        }
        self.constraint_expr.validate()
    }

    pub fn shift_count(&self) -> usize {
        self.positions.iter().map(Position::shift_count).max().unwrap_or(0)
    }

    pub fn position_index(&self, id: PositionId) -> Option<usize> {
        self.positions.iter().position(|p| p.id == id)
    }

    pub fn employee_index(&self, id: EmployeeId) -> Option<usize> {
        self.employees.iter().position(|e| e.id == id)
    }

    /// Indices (into `employees`) of the staff attached to the position at
    /// `position_idx`, in scenario order.
    pub fn members_of(&self, position_idx: usize) -> Vec<usize> {
        let pid = self.positions[position_idx].id;
        self.employees
            .iter()
            .enumerate()
            .filter(|(_, e)| e.position_id == pid)
            .map(|(i, _)| i)
            .collect()
    }

    /// Day ranges of the scheduling cycles covering the horizon. The last
    /// window may be shorter than `cycle_length_days`.
    pub fn cycle_windows(&self) -> Vec<std::ops::Range<u32>> {
        let len = self.cycle_length_days.max(1);
        (0..self.day_horizon)
            .step_by(len as usize)
            .map(|start| start..(start + len).min(self.day_horizon))
            .collect()
    }

    pub fn cycle_of(&self, day: u32) -> std::ops::Range<u32> {
        let len = self.cycle_length_days.max(1);
        let start = day / len * len;
        start..(start + len).min(self.day_horizon)
    }
}
