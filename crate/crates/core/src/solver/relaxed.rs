//! Table-free necessary conditions for the constraint atoms.
//!
//! Staffing is optimised before any roster exists, so atoms that inspect a
//! roster are replaced by conditions any roster realising the staffing would
//! have to meet. Atoms that are already staffing-level (φ4, φ5, φ8) use
//! their full semantics.

use std::collections::BTreeMap;

use crate::model::{payroll_from_staffing, ConstraintExpr, ModelError, ScenarioSpec, StaffingVector};

pub fn evaluate_atom_relaxed(k: u8, scenario: &ScenarioSpec, x: &StaffingVector) -> Result<bool, ModelError> {
    if !(1..=11).contains(&k) {
        return Err(ModelError::AtomOutOfRange(k));
    }
    x.check_dims(scenario)?;
    let positions = &scenario.positions;
    Ok(match k {
        // nobody covers a slot outside their own position, and nobody holds
        // two seats on the same shift
        1 => (0..positions.len()).all(|p| {
            let members = scenario.members_of(p).len() as u32;
            x.counts[p].iter().all(|&c| c <= members)
        }),
        2 => positions
            .iter()
            .enumerate()
            .all(|(p, pos)| pos.required_per_shift.iter().enumerate().all(|(s, &r)| x.get(p, s) >= r)),
        3 => hours_capacity(scenario, x),
        4 => {
            let payroll = payroll_from_staffing(scenario, x);
            payroll + 1e-9 >= scenario.payroll_min && payroll <= scenario.payroll_max + 1e-9
        }
        5 => {
            let t = x.total();
            t >= scenario.total_headcount_min as u64 && t <= scenario.total_headcount_max as u64
        }
        6 => rest_capacity(scenario, x),
        7 => positions
            .iter()
            .enumerate()
            .filter(|(_, pos)| pos.urgent)
            .all(|(p, pos)| pos.required_per_shift.iter().enumerate().all(|(s, &r)| x.get(p, s) >= r)),
        8 => positions.iter().enumerate().all(|(p, pos)| {
            let n = x.position_total(p);
            n >= pos.headcount_min as u64 && n <= pos.headcount_max as u64
        }),
        9 => true,
        10 => positions
            .iter()
            .enumerate()
            .all(|(p, pos)| pos.required_per_shift.iter().enumerate().all(|(s, &r)| r == 0 || x.get(p, s) >= 1)),
        11 => {
            let mut groups: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
            for (p, pos) in positions.iter().enumerate() {
                if let Some(g) = pos.cooperation_group {
                    groups.entry(g).or_default().push(p);
                }
            }
            groups.values().all(|members| {
                (0..scenario.shift_count()).all(|s| {
                    let having: Vec<usize> =
                        members.iter().copied().filter(|&p| s < positions[p].shift_count()).collect();
                    let any = having.iter().any(|&p| x.get(p, s) > 0);
                    !any || having.iter().all(|&p| x.get(p, s) > 0)
                })
            })
        }
        _ => unreachable!(),
    })
}

/// First cycle window length: the longest stretch any per-cycle limit sees.
fn first_window(scenario: &ScenarioSpec) -> u32 {
    scenario.cycle_length_days.min(scenario.day_horizon)
}

fn hours_capacity(scenario: &ScenarioSpec, x: &StaffingVector) -> bool {
    let len = first_window(scenario) as f64;
    let complete = scenario.day_horizon >= scenario.cycle_length_days;
    scenario.positions.iter().enumerate().all(|(p, pos)| {
        let demand: f64 = pos.shift_hours.iter().enumerate().map(|(s, h)| x.get(p, s) as f64 * h * len).sum();
        let members = scenario.members_of(p);
        let cap: f64 = members.iter().map(|&e| scenario.employees[e].max_hours_per_cycle).sum();
        let floor: f64 = members.iter().map(|&e| scenario.employees[e].min_hours_per_cycle).sum();
        demand <= cap + 1e-9 && (!complete || demand + 1e-9 >= floor)
    })
}

/// Most days one employee may work within a window of `len` days.
pub(crate) fn workable_days(scenario: &ScenarioSpec, e: usize, len: u32) -> u32 {
    let emp = &scenario.employees[e];
    let by_rest = scenario.cycle_length_days.saturating_sub(emp.min_rest_days_per_cycle);
    let by_run = match emp.max_consecutive_days {
        Some(m) => len - len / (m + 1),
        None => len,
    };
    len.min(by_rest).min(by_run)
}

fn rest_capacity(scenario: &ScenarioSpec, x: &StaffingVector) -> bool {
    let len = first_window(scenario);
    scenario.positions.iter().enumerate().all(|(p, pos)| {
        let cap: u64 = scenario
            .members_of(p)
            .iter()
            .map(|&e| workable_days(scenario, e, len) as u64)
            .sum();
        (0..pos.shift_count()).all(|s| x.get(p, s) as u64 * len as u64 <= cap)
    })
}

pub fn evaluate_expr_relaxed(
    expr: &ConstraintExpr,
    scenario: &ScenarioSpec,
    x: &StaffingVector,
) -> Result<bool, ModelError> {
    expr.evaluate_with(&mut |k| evaluate_atom_relaxed(k, scenario, x))
}

/// Atoms of the scenario's expression that are false (table-free reading).
pub fn violated_atoms(scenario: &ScenarioSpec, x: &StaffingVector) -> Result<Vec<u8>, ModelError> {
    let mut out = Vec::new();
    for k in scenario.constraint_expr.atoms() {
        if !evaluate_atom_relaxed(k, scenario, x)? {
            out.push(k);
        }
    }
    Ok(out)
}
