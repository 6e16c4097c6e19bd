use serde::{Deserialize, Serialize};

use super::{ModelError, ScenarioSpec};

/// Per-position, per-shift staffing counts: the decision vector of the
/// staffing problem. Rows follow `ScenarioSpec::positions`; row `p` has one
/// entry per shift of position `p`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StaffingVector {
    pub counts: Vec<Vec<u32>>,
}

impl StaffingVector {
    pub fn new(counts: Vec<Vec<u32>>) -> Self {
        StaffingVector { counts }
    }

    pub fn zeros(scenario: &ScenarioSpec) -> Self {
        StaffingVector {
            counts: scenario.positions.iter().map(|p| vec![0; p.shift_count()]).collect(),
        }
    }

    /// Staffing equal to each position's `required_per_shift`.
    pub fn from_required(scenario: &ScenarioSpec) -> Self {
        StaffingVector {
            counts: scenario.positions.iter().map(|p| p.required_per_shift.clone()).collect(),
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().map(|&c| c as u64).sum()
    }

    pub fn position_total(&self, p: usize) -> u64 {
        self.counts[p].iter().map(|&c| c as u64).sum()
    }

    pub fn get(&self, p: usize, s: usize) -> u32 {
        self.counts.get(p).and_then(|row| row.get(s)).copied().unwrap_or(0)
    }

    /// Number of genes (flattened entries).
    pub fn len(&self) -> usize {
        self.counts.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn flat(&self) -> Vec<u32> {
        self.counts.iter().flatten().copied().collect()
    }

    pub fn flat_mut(&mut self) -> impl Iterator<Item = &mut u32> {
        self.counts.iter_mut().flatten()
    }

    /// (position, shift) coordinates in flattened order.
    pub fn coords(&self) -> Vec<(usize, usize)> {
        self.counts
            .iter()
            .enumerate()
            .flat_map(|(p, row)| (0..row.len()).map(move |s| (p, s)))
            .collect()
    }

    pub fn check_dims(&self, scenario: &ScenarioSpec) -> Result<(), ModelError> {
        if self.counts.len() != scenario.positions.len() {
            return Err(ModelError::DimensionMismatch(format!(
                "staffing has {} rows, scenario has {} positions",
                self.counts.len(),
                scenario.positions.len()
            )));
        }
        for (p, (row, pos)) in self.counts.iter().zip(&scenario.positions).enumerate() {
            if row.len() != pos.shift_count() {
                return Err(ModelError::DimensionMismatch(format!(
                    "staffing row {p} has {} shifts, position {} has {}",
                    row.len(),
                    pos.id,
                    pos.shift_count()
                )));
            }
        }
        Ok(())
    }
}
