//! Day-by-day roster generation from a solved staffing vector.
//!
//! Each day, slots are filled position by position (urgent positions first,
//! cooperation groups together). For each seat a candidate is drawn at
//! random from the position's staff; if the candidate is unsuitable a
//! replacement is chosen by least attendance, and proficiency decides
//! between the two when the candidate only breaks a soft preference.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::model::{
    evaluate_atom, evaluate_expr, Employee, EmployeeId, ModelError, PositionId, ScenarioSpec, ScheduleTable,
    StaffingVector,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GenerateError {
    #[error("no suitable employee for day {day}, position {position}, shift {shift}")]
    CoverageImpossible { day: u32, position: PositionId, shift: usize },
    #[error("no suitable replacement for employee {0}")]
    NoCandidate(EmployeeId),
    #[error("generated roster violates atoms {0:?}")]
    AuditFailed(Vec<u8>),
    #[error("unknown employee {0}")]
    UnknownEmployee(EmployeeId),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Why a candidate cannot take a seat.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Unsuitable {
    WrongPosition,
    AlreadyAssigned,
    HourCap,
    RestDays,
    ConsecutiveDays,
    Rotation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViolationKind {
    Hard,
    Soft,
}

impl Unsuitable {
    /// Position, double-booking and hour-cap failures are always hard. Rest
    /// and rotation failures are hard only when the scenario's expression
    /// mentions the corresponding atom (φ6, φ9); otherwise they are
    /// preferences that proficiency may override.
    pub fn kind(&self, scenario: &ScenarioSpec) -> ViolationKind {
        let hard = match self {
            Unsuitable::WrongPosition | Unsuitable::AlreadyAssigned | Unsuitable::HourCap => true,
            Unsuitable::RestDays | Unsuitable::ConsecutiveDays => scenario.constraint_expr.mentions(6),
            Unsuitable::Rotation => scenario.constraint_expr.mentions(9),
        };
        if hard {
            ViolationKind::Hard
        } else {
            ViolationKind::Soft
        }
    }
}

/// A seat to fill: day, position index, shift.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Slot {
    pub day: u32,
    pub position: usize,
    pub shift: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct GeneratorOptions {
    /// Apply the proficiency override to every failure, hard ones included,
    /// and skip the final audit. For studying the unguarded procedure.
    pub faithful: bool,
}

#[derive(Debug, Clone)]
pub struct GenerationState {
    pub worker_list: Vec<EmployeeId>,
    /// Attendance count per employee.
    pub workable: BTreeMap<EmployeeId, u32>,
    /// Accumulated hours per employee.
    pub worktime: BTreeMap<EmployeeId, f64>,
    pub day_counter: u32,
    pub required: StaffingVector,
    pub rng_seed: u64,
    pub table: ScheduleTable,
    rotation_cursor: usize,
}

impl GenerationState {
    pub fn new(scenario: &ScenarioSpec, required: StaffingVector, rng_seed: u64) -> Self {
        let ids: Vec<EmployeeId> = scenario.employees.iter().map(|e| e.id).collect();
        GenerationState {
            workable: ids.iter().map(|&id| (id, 0)).collect(),
            worktime: ids.iter().map(|&id| (id, 0.0)).collect(),
            worker_list: ids,
            day_counter: 0,
            required,
            rng_seed,
            table: ScheduleTable::empty_for(scenario),
            rotation_cursor: 0,
        }
    }

    fn assign(&mut self, scenario: &ScenarioSpec, e: usize, slot: Slot) {
        if self.table.get(e, slot.day, slot.shift) {
            return;
        }
        self.table.set(e, slot.day, slot.shift, true);
        let id = scenario.employees[e].id;
        *self.workable.get_mut(&id).expect("known employee") += 1;
        let hours = scenario.positions[slot.position].shift_hours.get(slot.shift).copied().unwrap_or(0.0);
        *self.worktime.get_mut(&id).expect("known employee") += hours;
    }
}

fn employee_index(scenario: &ScenarioSpec, id: EmployeeId) -> Result<usize, GenerateError> {
    scenario.employee_index(id).ok_or(GenerateError::UnknownEmployee(id))
}

fn rotation_rows(scenario: &ScenarioSpec) -> Option<Vec<usize>> {
    scenario
        .rotation_order
        .as_ref()
        .map(|order| order.iter().filter_map(|id| scenario.employee_index(*id)).collect())
}

/// Index in `rows` where the next rotation pick must come from, given who
/// already works on `day`. `None` when everyone in the rotation works.
fn rotation_next(rows: &[usize], table: &ScheduleTable, day: u32, cursor: usize) -> Option<usize> {
    let n = rows.len();
    if n == 0 {
        return None;
    }
    let working: Vec<bool> = rows.iter().map(|&e| table.works_on(e, day)).collect();
    if working.iter().all(|&w| w) {
        return None;
    }
    if !working.iter().any(|&w| w) {
        return Some(cursor % n);
    }
    // successor of the run end
    (0..n).find(|&i| working[i] && !working[(i + 1) % n]).map(|end| (end + 1) % n)
}

fn consecutive_before(table: &ScheduleTable, e: usize, day: u32) -> u32 {
    (0..day).rev().take_while(|&d| table.works_on(e, d)).count() as u32
}

/// All reasons `e` cannot take `slot`, hard ones first.
pub fn check_suitability(
    scenario: &ScenarioSpec,
    state: &GenerationState,
    e: usize,
    slot: Slot,
) -> Vec<Unsuitable> {
    let emp = &scenario.employees[e];
    let table = &state.table;
    let mut reasons = Vec::new();
    let pos = &scenario.positions[slot.position];
    if emp.position_id != pos.id || slot.shift >= pos.shift_count() {
        reasons.push(Unsuitable::WrongPosition);
        return reasons;
    }
    if table.get(e, slot.day, slot.shift) {
        reasons.push(Unsuitable::AlreadyAssigned);
    }
    let cycle = scenario.cycle_of(slot.day);
    let hours_so_far: f64 = cycle
        .clone()
        .flat_map(|d| pos.shift_hours.iter().enumerate().map(move |(s, h)| (d, s, *h)))
        .filter(|&(d, s, _)| table.get(e, d, s))
        .map(|(_, _, h)| h)
        .sum();
    if hours_so_far + pos.shift_hours[slot.shift] > emp.max_hours_per_cycle + 1e-9 {
        reasons.push(Unsuitable::HourCap);
    }
    let new_day = !table.works_on(e, slot.day);
    if new_day {
        let worked = cycle.filter(|&d| table.works_on(e, d)).count() as u32;
        let allowed = scenario.cycle_length_days.saturating_sub(emp.min_rest_days_per_cycle);
        if worked + 1 > allowed {
            reasons.push(Unsuitable::RestDays);
        }
        if let Some(max_run) = emp.max_consecutive_days {
            if consecutive_before(table, e, slot.day) + 1 > max_run {
                reasons.push(Unsuitable::ConsecutiveDays);
            }
        }
    }
    if let Some(rows) = rotation_rows(scenario) {
        if let Some(pos_in_rotation) = rows.iter().position(|&r| r == e) {
            let anyone_today = rows.iter().any(|&r| table.works_on(r, slot.day));
            if new_day && anyone_today {
                let next = rotation_next(&rows, table, slot.day, state.rotation_cursor);
                if next != Some(pos_in_rotation) {
                    reasons.push(Unsuitable::Rotation);
                }
            }
        }
    }
    reasons.sort_by_key(|r| r.kind(scenario) == ViolationKind::Soft);
    reasons
}

/// True iff `man` may take the seat.
pub fn suitable(
    man: EmployeeId,
    slot: Slot,
    state: &GenerationState,
    scenario: &ScenarioSpec,
) -> Result<bool, GenerateError> {
    let e = employee_index(scenario, man)?;
    Ok(check_suitability(scenario, state, e, slot).is_empty())
}

/// Replacement for `man`: the suitable same-position colleague with the
/// fewest attendances, ties broken by lower id.
pub fn change_order(
    man: EmployeeId,
    slot: Slot,
    state: &GenerationState,
    scenario: &ScenarioSpec,
) -> Result<EmployeeId, GenerateError> {
    let e = employee_index(scenario, man)?;
    let position = scenario.employees[e].position_id;
    scenario
        .employees
        .iter()
        .enumerate()
        .filter(|(i, c)| *i != e && c.position_id == position)
        .filter(|(i, _)| check_suitability(scenario, state, *i, slot).is_empty())
        .min_by_key(|(_, c)| (state.workable.get(&c.id).copied().unwrap_or(0), c.id))
        .map(|(_, c)| c.id)
        .ok_or(GenerateError::NoCandidate(man))
}

/// Keeps `man` over `new_man` on a soft failure when his proficiency is at
/// least as high; a hard failure always hands the seat to `new_man`.
pub fn proficiency_arbitrate(man: &Employee, new_man: &Employee, kind: ViolationKind) -> EmployeeId {
    match kind {
        ViolationKind::Soft if man.proficiency >= new_man.proficiency => man.id,
        _ => new_man.id,
    }
}

/// Processing order of positions within a day: urgent first, then scenario
/// order; members of a cooperation group form one block.
fn position_blocks(scenario: &ScenarioSpec) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..scenario.positions.len()).collect();
    order.sort_by_key(|&p| (!scenario.positions[p].urgent, p));
    let mut blocks: Vec<Vec<usize>> = Vec::new();
    let mut group_block: BTreeMap<u32, usize> = BTreeMap::new();
    for p in order {
        match scenario.positions[p].cooperation_group {
            Some(g) => match group_block.get(&g) {
                Some(&b) => blocks[b].push(p),
                None => {
                    group_block.insert(g, blocks.len());
                    blocks.push(vec![p]);
                }
            },
            None => blocks.push(vec![p]),
        }
    }
    blocks
}

struct Generator<'a> {
    scenario: &'a ScenarioSpec,
    options: GeneratorOptions,
    state: GenerationState,
    rng: ChaCha8Rng,
    rotation: Option<Vec<usize>>,
}

impl Generator<'_> {
    fn pick(&mut self, candidates: &[usize], slot: Slot) -> usize {
        if let Some(rows) = &self.rotation {
            if let Some(next) = rotation_next(rows, &self.state.table, slot.day, self.state.rotation_cursor) {
                let n = rows.len();
                if let Some(&e) = (0..n).map(|k| &rows[(next + k) % n]).find(|e| candidates.contains(e)) {
                    return e;
                }
            }
        }
        *candidates.choose(&mut self.rng).expect("non-empty candidates")
    }

    fn fill(&mut self, slot: Slot) -> Result<(), GenerateError> {
        let sc = self.scenario;
        let need = self.state.required.get(slot.position, slot.shift);
        let members = sc.members_of(slot.position);
        let mut tried: BTreeSet<usize> = BTreeSet::new();
        let mut filled = 0;
        let impossible = || GenerateError::CoverageImpossible {
            day: slot.day,
            position: sc.positions[slot.position].id,
            shift: slot.shift,
        };
        let mut attempts = 0usize;
        while filled < need {
            if attempts > sc.employees.len() {
                return Err(impossible());
            }
            let candidates: Vec<usize> = members
                .iter()
                .copied()
                .filter(|&e| !tried.contains(&e) && !self.state.table.get(e, slot.day, slot.shift))
                .collect();
            if candidates.is_empty() {
                return Err(impossible());
            }
            let man = self.pick(&candidates, slot);
            tried.insert(man);
            let reasons = check_suitability(sc, &self.state, man, slot);
            let Some(reason) = reasons.first() else {
                self.state.assign(sc, man, slot);
                filled += 1;
                continue;
            };
            let kind = if self.options.faithful { ViolationKind::Soft } else { reason.kind(sc) };
            let man_id = sc.employees[man].id;
            match change_order(man_id, slot, &self.state, sc) {
                Ok(new_id) => {
                    let new_man = employee_index(sc, new_id)?;
                    let chosen = proficiency_arbitrate(&sc.employees[man], &sc.employees[new_man], kind);
                    let chosen = if chosen == man_id { man } else { new_man };
                    tried.insert(new_man);
                    self.state.assign(sc, chosen, slot);
                    filled += 1;
                }
                Err(GenerateError::NoCandidate(_)) if kind == ViolationKind::Soft => {
                    self.state.assign(sc, man, slot);
                    filled += 1;
                }
                Err(GenerateError::NoCandidate(_)) => attempts += 1,
                Err(e) => return Err(e),
            }
        }
        Ok(())
    }

    fn run(mut self) -> Result<GenerationState, GenerateError> {
        let blocks = position_blocks(self.scenario);
        let shift_count = self.scenario.shift_count();
        while self.state.day_counter < self.scenario.day_horizon {
            let day = self.state.day_counter;
            for block in &blocks {
                for shift in 0..shift_count {
                    for &position in block {
                        if shift < self.scenario.positions[position].shift_count() {
                            self.fill(Slot { day, position, shift })?;
                        }
                    }
                }
            }
            if let Some(rows) = &self.rotation {
                let anyone = rows.iter().any(|&e| self.state.table.works_on(e, day));
                if anyone {
                    if let Some(next) = rotation_next(rows, &self.state.table, day, self.state.rotation_cursor) {
                        self.state.rotation_cursor = next;
                    }
                }
            }
            self.state.day_counter += 1;
        }
        Ok(self.state)
    }
}

/// Builds a roster meeting `required` exactly on every day. The result is
/// audited against the scenario's constraint expression.
pub fn generate(
    scenario: &ScenarioSpec,
    required: &StaffingVector,
    rng_seed: u64,
) -> Result<ScheduleTable, GenerateError> {
    generate_with(scenario, required, rng_seed, GeneratorOptions::default()).map(|s| s.table)
}

pub fn generate_with(
    scenario: &ScenarioSpec,
    required: &StaffingVector,
    rng_seed: u64,
    options: GeneratorOptions,
) -> Result<GenerationState, GenerateError> {
    scenario.validate()?;
    required.check_dims(scenario)?;
    let generator = Generator {
        scenario,
        options,
        state: GenerationState::new(scenario, required.clone(), rng_seed),
        rng: ChaCha8Rng::seed_from_u64(rng_seed),
        rotation: rotation_rows(scenario),
    };
    let state = generator.run()?;
    if !options.faithful && !evaluate_expr(&scenario.constraint_expr, scenario, Some(required), Some(&state.table))? {
        let mut violated = Vec::new();
        for k in scenario.constraint_expr.atoms() {
            if !evaluate_atom(k, scenario, Some(required), Some(&state.table))? {
                violated.push(k);
            }
        }
        return Err(GenerateError::AuditFailed(violated));
    }
    Ok(state)
}
