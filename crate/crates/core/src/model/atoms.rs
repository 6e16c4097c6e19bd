//! Truth semantics of the eleven constraint atoms.
//!
//! | atom | holds when |
//! |------|------------|
//! | φ1  | every assignment lies on a shift of the employee's own position |
//! | φ2  | per day/position/shift the assigned count equals the demand, and the demand meets `required_per_shift` |
//! | φ3  | per-employee hours within `[min, max]` per cycle (min only on complete cycles) |
//! | φ4  | payroll over the horizon within `[payroll_min, payroll_max]` |
//! | φ5  | Σ staffing within `[total_headcount_min, total_headcount_max]` |
//! | φ6  | each employee works at most `cycle − min_rest_days` days per cycle and respects `max_consecutive_days` |
//! | φ7  | no day has an urgent position under-covered while a non-urgent one is fully covered |
//! | φ8  | per-position Σ staffing within `[headcount_min, headcount_max]` |
//! | φ9  | each day the working members of `rotation_order` form one contiguous cyclic run |
//! | φ10 | every shift with `required_per_shift > 0` has at least one assignee every day |
//! | φ11 | positions sharing a cooperation group are staffed together on every shift |
//!
//! "Demand" is the staffing count when a staffing vector is supplied and
//! `required_per_shift` otherwise.

use std::collections::BTreeMap;

use super::{ConstraintExpr, ModelError, ObjectiveKind, ScenarioSpec, ScheduleTable, StaffingVector};

pub const ATOM_COUNT: u8 = 11;

const HOURS_EPS: f64 = 1e-9;

fn needs_table(k: u8) -> bool {
    matches!(k, 1 | 2 | 3 | 6 | 7 | 9 | 10 | 11)
}

fn needs_staffing(k: u8) -> bool {
    matches!(k, 5 | 8)
}

fn check_available(
    k: u8,
    staffing: Option<&StaffingVector>,
    table: Option<&ScheduleTable>,
) -> Result<(), ModelError> {
    if !(1..=ATOM_COUNT).contains(&k) {
        return Err(ModelError::AtomOutOfRange(k));
    }
    if needs_table(k) && table.is_none() {
        return Err(ModelError::MissingTable(k));
    }
    if needs_staffing(k) && staffing.is_none() {
        return Err(ModelError::MissingStaffing(k));
    }
    if k == 4 && staffing.is_none() && table.is_none() {
        return Err(ModelError::MissingStaffing(k));
    }
    Ok(())
}

/// Truth value of atom φk. Pure.
pub fn evaluate_atom(
    k: u8,
    scenario: &ScenarioSpec,
    staffing: Option<&StaffingVector>,
    table: Option<&ScheduleTable>,
) -> Result<bool, ModelError> {
    check_available(k, staffing, table)?;
    if let Some(s) = staffing {
        s.check_dims(scenario)?;
    }
    if let Some(t) = table {
        t.check_dims(scenario)?;
    }
    let ctx = Ctx { scenario, staffing, table };
    Ok(match k {
        1 => ctx.fixed_job(),
        2 => ctx.exact_coverage(),
        3 => ctx.hours_within_limits(),
        4 => ctx.payroll_within_limits(),
        5 => ctx.total_headcount_within_limits(),
        6 => ctx.rest_respected(),
        7 => ctx.urgent_first(),
        8 => ctx.position_headcount_within_limits(),
        9 => ctx.rotation_respected(),
        10 => ctx.shifts_covered(),
        11 => ctx.cooperation_respected(),
        _ => unreachable!("checked above"),
    })
}

/// Evaluates a constraint tree. Availability of every atom in the tree is
/// checked up front so errors do not depend on short-circuiting.
pub fn evaluate_expr(
    expr: &ConstraintExpr,
    scenario: &ScenarioSpec,
    staffing: Option<&StaffingVector>,
    table: Option<&ScheduleTable>,
) -> Result<bool, ModelError> {
    for k in expr.atoms() {
        check_available(k, staffing, table)?;
    }
    expr.evaluate_with(&mut |k| evaluate_atom(k, scenario, staffing, table))
}

pub fn objective_value(
    kind: ObjectiveKind,
    scenario: &ScenarioSpec,
    staffing: &StaffingVector,
) -> Result<f64, ModelError> {
    staffing.check_dims(scenario)?;
    Ok(match kind {
        ObjectiveKind::Headcount => staffing.total() as f64,
        ObjectiveKind::TotalTime => staffed_hours(scenario, staffing, |_| 1.0),
        ObjectiveKind::TotalCost => payroll_from_staffing(scenario, staffing),
    })
}

fn staffed_hours(scenario: &ScenarioSpec, staffing: &StaffingVector, price: impl Fn(usize) -> f64) -> f64 {
    let horizon = scenario.day_horizon as f64;
    scenario
        .positions
        .iter()
        .enumerate()
        .map(|(p, pos)| {
            let hours: f64 = pos
                .shift_hours
                .iter()
                .enumerate()
                .map(|(s, h)| staffing.get(p, s) as f64 * h)
                .sum();
            hours * horizon * price(p)
        })
        .sum()
}

/// Mean wage of the employees attached to a position; 0 when it has none.
pub fn mean_wage(scenario: &ScenarioSpec, position_idx: usize) -> f64 {
    let members = scenario.members_of(position_idx);
    if members.is_empty() {
        return 0.0;
    }
    members.iter().map(|&e| scenario.employees[e].wage_rate).sum::<f64>() / members.len() as f64
}

/// Payroll over the horizon estimated from staffing alone (mean wages).
pub fn payroll_from_staffing(scenario: &ScenarioSpec, staffing: &StaffingVector) -> f64 {
    staffed_hours(scenario, staffing, |p| mean_wage(scenario, p))
}

/// Exact payroll over the horizon from a roster.
pub fn payroll_from_table(scenario: &ScenarioSpec, table: &ScheduleTable) -> f64 {
    let mut total = 0.0;
    for (e, emp) in scenario.employees.iter().enumerate() {
        let Some(p) = scenario.position_index(emp.position_id) else { continue };
        let hours = &scenario.positions[p].shift_hours;
        for d in 0..table.day_horizon() {
            for (s, h) in hours.iter().enumerate() {
                if table.get(e, d, s) {
                    total += h * emp.wage_rate;
                }
            }
        }
    }
    total
}

struct Ctx<'a> {
    scenario: &'a ScenarioSpec,
    staffing: Option<&'a StaffingVector>,
    table: Option<&'a ScheduleTable>,
}

impl Ctx<'_> {
    fn table(&self) -> &ScheduleTable {
        self.table.expect("availability checked")
    }

    fn staffing(&self) -> &StaffingVector {
        self.staffing.expect("availability checked")
    }

    fn demand(&self, p: usize, s: usize) -> u32 {
        match self.staffing {
            Some(x) => x.get(p, s),
            None => self.scenario.positions[p].required_per_shift[s],
        }
    }

    fn position_of(&self, e: usize) -> usize {
        self.scenario
            .position_index(self.scenario.employees[e].position_id)
            .expect("validated scenario")
    }

    /// Assigned counts indexed [position][day][shift].
    fn assigned(&self) -> Vec<Vec<Vec<u32>>> {
        let t = self.table();
        let mut out: Vec<Vec<Vec<u32>>> = self
            .scenario
            .positions
            .iter()
            .map(|_| vec![vec![0; t.shift_count()]; t.day_horizon() as usize])
            .collect();
        for e in 0..t.employee_count() {
            let p = self.position_of(e);
            for d in 0..t.day_horizon() {
                for s in 0..t.shift_count() {
                    if t.get(e, d, s) {
                        out[p][d as usize][s] += 1;
                    }
                }
            }
        }
        out
    }

    fn fixed_job(&self) -> bool {
        let t = self.table();
        (0..t.employee_count()).all(|e| {
            let own_shifts = self.scenario.positions[self.position_of(e)].shift_count();
            (0..t.day_horizon()).all(|d| (own_shifts..t.shift_count()).all(|s| !t.get(e, d, s)))
        })
    }

    fn exact_coverage(&self) -> bool {
        let assigned = self.assigned();
        self.scenario.positions.iter().enumerate().all(|(p, pos)| {
            (0..pos.shift_count()).all(|s| {
                let demand = self.demand(p, s);
                demand >= pos.required_per_shift[s] && assigned[p].iter().all(|day| day[s] == demand)
            })
        })
    }

    fn hours_within_limits(&self) -> bool {
        let t = self.table();
        let windows = self.scenario.cycle_windows();
        let full = self.scenario.cycle_length_days;
        (0..t.employee_count()).all(|e| {
            let emp = &self.scenario.employees[e];
            let hours = &self.scenario.positions[self.position_of(e)].shift_hours;
            windows.iter().all(|w| {
                let worked: f64 = w
                    .clone()
                    .flat_map(|d| hours.iter().enumerate().map(move |(s, h)| (d, s, h)))
                    .filter(|(d, s, _)| t.get(e, *d, *s))
                    .map(|(_, _, h)| h)
                    .sum();
                let upper_ok = worked <= emp.max_hours_per_cycle + HOURS_EPS;
                let lower_ok = w.len() < full as usize || worked + HOURS_EPS >= emp.min_hours_per_cycle;
                upper_ok && lower_ok
            })
        })
    }

    fn payroll_within_limits(&self) -> bool {
        let payroll = match self.table {
            Some(t) => payroll_from_table(self.scenario, t),
            None => payroll_from_staffing(self.scenario, self.staffing()),
        };
        payroll + HOURS_EPS >= self.scenario.payroll_min && payroll <= self.scenario.payroll_max + HOURS_EPS
    }

    fn total_headcount_within_limits(&self) -> bool {
        let total = self.staffing().total();
        total >= self.scenario.total_headcount_min as u64 && total <= self.scenario.total_headcount_max as u64
    }

    fn rest_respected(&self) -> bool {
        let t = self.table();
        let windows = self.scenario.cycle_windows();
        let cycle = self.scenario.cycle_length_days;
        (0..t.employee_count()).all(|e| {
            let emp = &self.scenario.employees[e];
            let allowed = cycle.saturating_sub(emp.min_rest_days_per_cycle);
            let per_cycle_ok = windows
                .iter()
                .all(|w| w.clone().filter(|&d| t.works_on(e, d)).count() as u32 <= allowed);
            let run_ok = match emp.max_consecutive_days {
                None => true,
                Some(max_run) => {
                    let mut run = 0u32;
                    (0..t.day_horizon()).all(|d| {
                        run = if t.works_on(e, d) { run + 1 } else { 0 };
                        run <= max_run
                    })
                }
            };
            per_cycle_ok && run_ok
        })
    }

    fn urgent_first(&self) -> bool {
        let assigned = self.assigned();
        let positions = &self.scenario.positions;
        (0..self.table().day_horizon() as usize).all(|d| {
            let under = |p: usize| (0..positions[p].shift_count()).any(|s| assigned[p][d][s] < self.demand(p, s));
            let fully = |p: usize| {
                let demand: u32 = (0..positions[p].shift_count()).map(|s| self.demand(p, s)).sum();
                demand > 0 && !under(p)
            };
            let urgent_under = (0..positions.len()).any(|p| positions[p].urgent && under(p));
            let other_full = (0..positions.len()).any(|p| !positions[p].urgent && fully(p));
            !(urgent_under && other_full)
        })
    }

    fn position_headcount_within_limits(&self) -> bool {
        let staffing = self.staffing();
        self.scenario.positions.iter().enumerate().all(|(p, pos)| {
            let n = staffing.position_total(p);
            n >= pos.headcount_min as u64 && n <= pos.headcount_max as u64
        })
    }

    fn rotation_respected(&self) -> bool {
        let Some(order) = &self.scenario.rotation_order else { return true };
        let t = self.table();
        let rows: Vec<usize> = order
            .iter()
            .filter_map(|id| self.scenario.employee_index(*id))
            .collect();
        (0..t.day_horizon()).all(|d| {
            let working: Vec<bool> = rows.iter().map(|&e| t.works_on(e, d)).collect();
            is_cyclic_run(&working)
        })
    }

    fn shifts_covered(&self) -> bool {
        let assigned = self.assigned();
        self.scenario.positions.iter().enumerate().all(|(p, pos)| {
            pos.required_per_shift
                .iter()
                .enumerate()
                .filter(|(_, &r)| r > 0)
                .all(|(s, _)| assigned[p].iter().all(|day| day[s] >= 1))
        })
    }

    fn cooperation_respected(&self) -> bool {
        let assigned = self.assigned();
        let mut groups: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
        for (p, pos) in self.scenario.positions.iter().enumerate() {
            if let Some(g) = pos.cooperation_group {
                groups.entry(g).or_default().push(p);
            }
        }
        let t = self.table();
        groups.values().filter(|m| m.len() > 1).all(|members| {
            (0..t.day_horizon() as usize).all(|d| {
                (0..t.shift_count()).all(|s| {
                    let having: Vec<usize> = members
                        .iter()
                        .copied()
                        .filter(|&p| s < self.scenario.positions[p].shift_count())
                        .collect();
                    let any = having.iter().any(|&p| assigned[p][d][s] > 0);
                    !any || having.iter().all(|&p| assigned[p][d][s] > 0)
                })
            })
        })
    }
}

/// True iff the set bits form a single contiguous run on the cycle (or the
/// set is empty or full).
pub(crate) fn is_cyclic_run(bits: &[bool]) -> bool {
    let n = bits.len();
    let ones = bits.iter().filter(|&&b| b).count();
    if ones == 0 || ones == n {
        return true;
    }
    let starts = (0..n).filter(|&i| bits[i] && !bits[(i + n - 1) % n]).count();
    starts == 1
}
