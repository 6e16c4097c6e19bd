use std::fmt::Write as _;

use thiserror::Error;

use super::{EmployeeId, ModelError, ScenarioSpec};

/// Binary attendance roster indexed by (employee, day, shift).
///
/// Rows follow the order of `employee_ids`, which for tables built from a
/// scenario is the scenario's employee order.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ScheduleTable {
    employee_ids: Vec<EmployeeId>,
    day_horizon: u32,
    shift_count: usize,
    attendance: Vec<u8>,
}

#[derive(Debug, Error)]
pub enum TableCsvError {
    #[error("missing or wrong header, expected \"employee_id,day,shift,attendance\"")]
    Header,
    #[error("line {line}: {msg}")]
    Row { line: usize, msg: String },
}

pub const CSV_HEADER: &str = "employee_id,day,shift,attendance";

impl ScheduleTable {
    pub fn new(employee_ids: Vec<EmployeeId>, day_horizon: u32, shift_count: usize) -> Self {
        let n = employee_ids.len() * day_horizon as usize * shift_count;
        ScheduleTable { employee_ids, day_horizon, shift_count, attendance: vec![0; n] }
    }

    /// All-zero table shaped by the scenario.
    pub fn empty_for(scenario: &ScenarioSpec) -> Self {
        Self::new(
            scenario.employees.iter().map(|e| e.id).collect(),
            scenario.day_horizon,
            scenario.shift_count(),
        )
    }

    pub fn employee_ids(&self) -> &[EmployeeId] {
        &self.employee_ids
    }

    pub fn employee_count(&self) -> usize {
        self.employee_ids.len()
    }

    pub fn day_horizon(&self) -> u32 {
        self.day_horizon
    }

    pub fn shift_count(&self) -> usize {
        self.shift_count
    }

    #[inline]
    fn idx(&self, e: usize, day: u32, shift: usize) -> usize {
        debug_assert!(e < self.employee_ids.len() && day < self.day_horizon && shift < self.shift_count);
        (e * self.day_horizon as usize + day as usize) * self.shift_count + shift
    }

    #[inline]
    pub fn get(&self, e: usize, day: u32, shift: usize) -> bool {
        self.attendance[self.idx(e, day, shift)] != 0
    }

    #[inline]
    pub fn set(&mut self, e: usize, day: u32, shift: usize, on: bool) {
        let i = self.idx(e, day, shift);
        self.attendance[i] = on as u8;
    }

    /// Attendance for one day, flattened employee-major then shift.
    pub fn day_row(&self, day: u32) -> Vec<u8> {
        let mut row = Vec::with_capacity(self.employee_ids.len() * self.shift_count);
        for e in 0..self.employee_ids.len() {
            for s in 0..self.shift_count {
                row.push(self.attendance[self.idx(e, day, s)]);
            }
        }
        row
    }

    pub fn set_day_row(&mut self, day: u32, row: &[u8]) {
        assert_eq!(row.len(), self.employee_ids.len() * self.shift_count, "day row width");
        for e in 0..self.employee_ids.len() {
            for s in 0..self.shift_count {
                let i = self.idx(e, day, s);
                self.attendance[i] = (row[e * self.shift_count + s] != 0) as u8;
            }
        }
    }

    pub fn row_width(&self) -> usize {
        self.employee_ids.len() * self.shift_count
    }

    pub fn works_on(&self, e: usize, day: u32) -> bool {
        (0..self.shift_count).any(|s| self.get(e, day, s))
    }

    /// Number of 1-entries for employee row `e`.
    pub fn attendance_count(&self, e: usize) -> u32 {
        let start = self.idx(e, 0, 0);
        let len = self.day_horizon as usize * self.shift_count;
        self.attendance[start..start + len].iter().map(|&v| v as u32).sum()
    }

    pub fn same_shape(&self, other: &ScheduleTable) -> bool {
        self.employee_ids == other.employee_ids
            && self.day_horizon == other.day_horizon
            && self.shift_count == other.shift_count
    }

    pub fn check_dims(&self, scenario: &ScenarioSpec) -> Result<(), ModelError> {
        let ids: Vec<_> = scenario.employees.iter().map(|e| e.id).collect();
        if ids != self.employee_ids || self.day_horizon != scenario.day_horizon || self.shift_count != scenario.shift_count() {
            return Err(ModelError::DimensionMismatch(format!(
                "table is {}x{}x{}, scenario expects {}x{}x{}",
                self.employee_ids.len(),
                self.day_horizon,
                self.shift_count,
                ids.len(),
                scenario.day_horizon,
                scenario.shift_count()
            )));
        }
        Ok(())
    }

    /// Sub-table keeping the given employee rows (in the given order).
    pub fn select_employees(&self, rows: &[usize]) -> ScheduleTable {
        let mut out = ScheduleTable::new(
            rows.iter().map(|&r| self.employee_ids[r]).collect(),
            self.day_horizon,
            self.shift_count,
        );
        for (new_e, &e) in rows.iter().enumerate() {
            for d in 0..self.day_horizon {
                for s in 0..self.shift_count {
                    out.set(new_e, d, s, self.get(e, d, s));
                }
            }
        }
        out
    }

    /// Days `range` as a new table re-indexed from day 0.
    pub fn slice_days(&self, range: std::ops::Range<u32>) -> ScheduleTable {
        let range = range.start.min(self.day_horizon)..range.end.min(self.day_horizon);
        let mut out = ScheduleTable::new(self.employee_ids.clone(), range.end - range.start, self.shift_count);
        for d in range.clone() {
            out.set_day_row(d - range.start, &self.day_row(d));
        }
        out
    }

    /// Writes rows into `self` from a sub-table whose employees are the rows
    /// `rows` of `self`.
    pub fn merge_rows(&mut self, rows: &[usize], sub: &ScheduleTable) {
        assert_eq!(rows.len(), sub.employee_count());
        assert_eq!(self.day_horizon, sub.day_horizon);
        assert_eq!(self.shift_count, sub.shift_count);
        for (sub_e, &e) in rows.iter().enumerate() {
            for d in 0..self.day_horizon {
                for s in 0..self.shift_count {
                    self.set(e, d, s, sub.get(sub_e, d, s));
                }
            }
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(16 * self.attendance.len() + CSV_HEADER.len() + 1);
        out.push_str(CSV_HEADER);
        out.push('\n');
        for (e, id) in self.employee_ids.iter().enumerate() {
            for d in 0..self.day_horizon {
                for s in 0..self.shift_count {
                    let _ = writeln!(out, "{},{},{},{}", id, d, s, self.get(e, d, s) as u8);
                }
            }
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self, TableCsvError> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        match lines.next() {
            Some((_, h)) if h.trim() == CSV_HEADER => {}
            _ => return Err(TableCsvError::Header),
        }
        let mut rows = Vec::new();
        let (mut max_day, mut max_shift) = (0u32, 0usize);
        let mut ids: Vec<EmployeeId> = Vec::new();
        for (i, line) in lines {
            let err = |msg: &str| TableCsvError::Row { line: i + 1, msg: msg.to_string() };
            let f: Vec<&str> = line.split(',').map(str::trim).collect();
            if f.len() != 4 {
                return Err(err("expected 4 fields"));
            }
            let id = EmployeeId(f[0].parse().map_err(|_| err("bad employee_id"))?);
            let day: u32 = f[1].parse().map_err(|_| err("bad day"))?;
            let shift: usize = f[2].parse().map_err(|_| err("bad shift"))?;
            let att = match f[3] {
                "0" => false,
                "1" => true,
                _ => return Err(err("attendance must be 0 or 1")),
            };
            if !ids.contains(&id) {
                ids.push(id);
            }
            max_day = max_day.max(day);
            max_shift = max_shift.max(shift);
            rows.push((id, day, shift, att));
        }
        if rows.is_empty() {
            return Ok(ScheduleTable::new(Vec::new(), 0, 0));
        }
        let mut table = ScheduleTable::new(ids.clone(), max_day + 1, max_shift + 1);
        for (id, d, s, a) in rows {
            let e = ids.iter().position(|x| *x == id).expect("id collected");
            table.set(e, d, s, a);
        }
        Ok(table)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_roundtrip() {
        let mut t = ScheduleTable::new(vec![EmployeeId(3), EmployeeId(7)], 3, 2);
        t.set(0, 1, 1, true);
        t.set(1, 2, 0, true);
        let csv = t.to_csv();
        assert!(csv.starts_with("employee_id,day,shift,attendance\n3,0,0,0\n"));
        assert_eq!(csv.lines().count(), 1 + 2 * 3 * 2);
        assert_eq!(ScheduleTable::from_csv(&csv).unwrap(), t);
    }

    #[test]
    fn csv_rejects_non_binary() {
        let bad = "employee_id,day,shift,attendance\n1,0,0,2\n";
        assert!(matches!(ScheduleTable::from_csv(bad), Err(TableCsvError::Row { .. })));
        assert!(matches!(ScheduleTable::from_csv("a,b\n"), Err(TableCsvError::Header)));
    }

    #[test]
    fn select_and_merge() {
        let mut t = ScheduleTable::new(vec![EmployeeId(1), EmployeeId(2), EmployeeId(3)], 2, 1);
        t.set(2, 1, 0, true);
        let sub = t.select_employees(&[2, 0]);
        assert!(sub.get(0, 1, 0));
        let mut blank = ScheduleTable::new(t.employee_ids().to_vec(), 2, 1);
        blank.merge_rows(&[2, 0], &sub);
        assert_eq!(blank, t);
        assert_eq!(t.slice_days(1..2).day_row(0), vec![0, 0, 1]);
    }
}
