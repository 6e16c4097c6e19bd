//! Supervised datasets built from rosters.
//!
//! Two encodings are supported:
//!
//! - [`Encoding::Binary32`]: one sample per day, the input is the day index
//!   as 32 bits (most significant first), the target is that day's
//!   attendance row.
//! - [`Encoding::Windowed`]: one sample per day `t >= window`, the input is
//!   the per-day features of days `t - window .. t` (time-major), min-max
//!   normalised per feature, the target is day `t`'s attendance row.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::ScheduleTable;
use crate::Scalar;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DatasetError {
    #[error("day index {0} does not fit in 32 bits")]
    DayOutOfRange(u64),
    #[error("window length {window} must be >= 1 and < day horizon {horizon}")]
    WindowTooLong { window: usize, horizon: u32 },
    #[error("schedule table is empty")]
    EmptyTable,
    #[error("train fraction {0} must lie strictly between 0 and 1")]
    BadFraction(f64),
    #[error("split of {n} samples at fraction {fraction} leaves one side empty")]
    EmptySide { n: usize, fraction: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Encoding {
    Binary32,
    Windowed,
}

/// Per-day feature vector used by windowed datasets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureSpec {
    /// Four features: attendance fraction (assigned / `required_per_day`),
    /// day index, day of week / 6, and a 0/1 flag that every shift with
    /// positive requirement has someone on it.
    Summary { required_per_day: f64, shift_required: Vec<u32> },
    /// The raw attendance row.
    AttendanceRow,
}

impl FeatureSpec {
    pub fn width(&self, table: &ScheduleTable) -> usize {
        match self {
            FeatureSpec::Summary { .. } => 4,
            FeatureSpec::AttendanceRow => table.row_width(),
        }
    }

    /// Unnormalised features of one day given its attendance row.
    pub fn day_features<T: Scalar>(&self, row: &[u8], day: u32, shift_count: usize) -> Vec<T> {
        match self {
            FeatureSpec::Summary { required_per_day, shift_required } => {
                let assigned: f64 = row.iter().map(|&v| v as f64).sum();
                let denom = if *required_per_day > 0.0 { *required_per_day } else { row.len().max(1) as f64 };
                let employees = if shift_count == 0 { 0 } else { row.len() / shift_count };
                let covered = (0..shift_count)
                    .filter(|&s| shift_required.get(s).is_none_or(|&r| r > 0))
                    .all(|s| (0..employees).any(|e| row[e * shift_count + s] != 0));
                vec![
                    T::lit(assigned / denom),
                    T::lit(day as f64),
                    T::lit((day % 7) as f64 / 6.0),
                    if covered { T::one() } else { T::zero() },
                ]
            }
            FeatureSpec::AttendanceRow => row.iter().map(|&v| T::lit(v as f64)).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample<T> {
    pub input: Vec<T>,
    pub target: Vec<T>,
    pub day_index: u32,
    /// `input` before normalisation.
    pub raw_input: Vec<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<T> {
    pub samples: Vec<Sample<T>>,
    pub input_width: usize,
    pub target_width: usize,
    pub encoding: Encoding,
    /// Zero for `Binary32`.
    pub window_length: usize,
    /// Features per time step (32 for `Binary32`).
    pub feature_count: usize,
    /// Per-feature `(min, max)`; empty for `Binary32`.
    pub normalization_bounds: Vec<(T, T)>,
    pub feature_spec: FeatureSpec,
}

/// Day index as 32 bits, most significant bit first.
pub fn encode_binary32<T: Scalar>(day_index: u64) -> Result<Vec<T>, DatasetError> {
    if day_index > u32::MAX as u64 {
        return Err(DatasetError::DayOutOfRange(day_index));
    }
    Ok((0..32).rev().map(|b| if (day_index >> b) & 1 == 1 { T::one() } else { T::zero() }).collect())
}

/// `(v - min) / (max - min)`; a degenerate range maps everything to 0.
pub fn minmax_normalize<T: Scalar>(values: &[T], bounds: (T, T)) -> Vec<T> {
    let (lo, hi) = bounds;
    let span = hi - lo;
    if span <= T::zero() {
        return vec![T::zero(); values.len()];
    }
    values.iter().map(|&v| (v - lo) / span).collect()
}

fn feature_bounds<T: Scalar>(samples: &[Sample<T>], features: usize) -> Vec<(T, T)> {
    let mut bounds = vec![(T::infinity(), T::neg_infinity()); features];
    for s in samples {
        for (i, &v) in s.raw_input.iter().enumerate() {
            let b = &mut bounds[i % features];
            b.0 = b.0.min(v);
            b.1 = b.1.max(v);
        }
    }
    for b in &mut bounds {
        if b.0 > b.1 {
            *b = (T::zero(), T::zero());
        }
    }
    bounds
}

/// Normalises a time-major window with per-feature bounds.
pub fn normalize_window<T: Scalar>(raw: &[T], bounds: &[(T, T)]) -> Vec<T> {
    let f = bounds.len();
    raw.iter()
        .enumerate()
        .map(|(i, &v)| minmax_normalize(&[v], bounds[i % f])[0])
        .collect()
}

fn target_row<T: Scalar>(table: &ScheduleTable, day: u32) -> Vec<T> {
    table.day_row(day).into_iter().map(|v| T::lit(v as f64)).collect()
}

pub fn build_dataset<T: Scalar>(
    table: &ScheduleTable,
    encoding: Encoding,
    window_length: usize,
    feature_spec: &FeatureSpec,
) -> Result<Dataset<T>, DatasetError> {
    let horizon = table.day_horizon();
    if horizon == 0 || table.row_width() == 0 {
        return Err(DatasetError::EmptyTable);
    }
    let target_width = table.row_width();
    match encoding {
        Encoding::Binary32 => {
            let samples = (0..horizon)
                .map(|d| {
                    let input = encode_binary32::<T>(d as u64)?;
                    Ok(Sample { raw_input: input.clone(), input, target: target_row(table, d), day_index: d })
                })
                .collect::<Result<Vec<_>, DatasetError>>()?;
            Ok(Dataset {
                samples,
                input_width: 32,
                target_width,
                encoding,
                window_length: 0,
                feature_count: 32,
                normalization_bounds: Vec::new(),
                feature_spec: feature_spec.clone(),
            })
        }
        Encoding::Windowed => {
            if window_length == 0 || window_length >= horizon as usize {
                return Err(DatasetError::WindowTooLong { window: window_length, horizon });
            }
            let features = feature_spec.width(table);
            let per_day: Vec<Vec<T>> = (0..horizon)
                .map(|d| feature_spec.day_features(&table.day_row(d), d, table.shift_count()))
                .collect();
            let mut samples: Vec<Sample<T>> = (window_length as u32..horizon)
                .map(|t| {
                    let raw: Vec<T> = (t as usize - window_length..t as usize)
                        .flat_map(|d| per_day[d].iter().copied())
                        .collect();
                    Sample { input: Vec::new(), raw_input: raw, target: target_row(table, t), day_index: t }
                })
                .collect();
            let bounds = feature_bounds(&samples, features);
            for s in &mut samples {
                s.input = normalize_window(&s.raw_input, &bounds);
            }
            Ok(Dataset {
                samples,
                input_width: window_length * features,
                target_width,
                encoding,
                window_length,
                feature_count: features,
                normalization_bounds: bounds,
                feature_spec: feature_spec.clone(),
            })
        }
    }
}

impl<T: Scalar> Dataset<T> {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    fn with_samples(&self, samples: Vec<Sample<T>>, bounds: Vec<(T, T)>) -> Self {
        Dataset { samples, normalization_bounds: bounds, feature_spec: self.feature_spec.clone(), ..*self }
    }

    /// Chronological split; normalisation bounds are recomputed from the
    /// training side and applied to both sides.
    pub fn split(&self, train_fraction: f64) -> Result<(Dataset<T>, Dataset<T>), DatasetError> {
        if !(train_fraction > 0.0 && train_fraction < 1.0) {
            return Err(DatasetError::BadFraction(train_fraction));
        }
        let n = self.samples.len();
        let n_train = (n as f64 * train_fraction).ceil() as usize;
        if n_train == 0 || n_train >= n {
            return Err(DatasetError::EmptySide { n, fraction: train_fraction });
        }
        let (train, test) = self.samples.split_at(n_train);
        let (mut train, mut test) = (train.to_vec(), test.to_vec());
        let bounds = match self.encoding {
            Encoding::Binary32 => Vec::new(),
            Encoding::Windowed => {
                let b = feature_bounds(&train, self.feature_count);
                for s in train.iter_mut().chain(test.iter_mut()) {
                    s.input = normalize_window(&s.raw_input, &b);
                }
                b
            }
        };
        Ok((self.with_samples(train, bounds.clone()), self.with_samples(test, bounds)))
    }

    /// `day_index,input_0..,target_0..`
    pub fn to_csv(&self) -> String {
        let mut out = String::from("day_index");
        for i in 0..self.input_width {
            let _ = write!(out, ",input_{i}");
        }
        for i in 0..self.target_width {
            let _ = write!(out, ",target_{i}");
        }
        out.push('\n');
        for s in &self.samples {
            let _ = write!(out, "{}", s.day_index);
            for v in s.input.iter().chain(&s.target) {
                let _ = write!(out, ",{v}");
            }
            out.push('\n');
        }
        out
    }
}

/// Chronological split; see [`Dataset::split`].
pub fn split<T: Scalar>(dataset: &Dataset<T>, train_fraction: f64) -> Result<(Dataset<T>, Dataset<T>), DatasetError> {
    dataset.split(train_fraction)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::EmployeeId;
    use proptest::prelude::*;

    fn table(days: u32, employees: u32) -> ScheduleTable {
        ScheduleTable::new((0..employees).map(EmployeeId).collect(), days, 1)
    }

    #[test]
    fn binary_encoding() {
        assert_eq!(encode_binary32::<f64>(0).unwrap(), vec![0.0; 32]);
        let five = encode_binary32::<f64>(5).unwrap();
        assert!(five[..29].iter().all(|&b| b == 0.0));
        assert_eq!(&five[29..], &[1.0, 0.0, 1.0]);
        assert_eq!(encode_binary32::<f32>(u32::MAX as u64).unwrap(), vec![1.0; 32]);
        assert_eq!(encode_binary32::<f64>(1 << 32), Err(DatasetError::DayOutOfRange(1 << 32)));
    }

    #[test]
    fn normalization() {
        assert_eq!(minmax_normalize(&[2.0, 4.0, 6.0], (2.0, 6.0)), vec![0.0, 0.5, 1.0]);
        assert_eq!(minmax_normalize(&[3.0, 3.0], (3.0, 3.0)), vec![0.0, 0.0]);
        assert_eq!(minmax_normalize(&[1.0, 3.0], (0.0, 4.0)), vec![0.25, 0.75]);
    }

    #[test]
    fn sample_counts() {
        let t = table(10, 2);
        let spec = FeatureSpec::Summary { required_per_day: 1.0, shift_required: vec![1] };
        let b = build_dataset::<f64>(&t, Encoding::Binary32, 0, &spec).unwrap();
        assert_eq!(b.len(), 10);
        assert!(b.samples.iter().all(|s| s.input.len() == 32));
        let w = build_dataset::<f64>(&t, Encoding::Windowed, 7, &spec).unwrap();
        assert_eq!(w.len(), 3);
        assert_eq!(w.input_width, 28);
        assert_eq!(
            build_dataset::<f64>(&t, Encoding::Windowed, 10, &spec),
            Err(DatasetError::WindowTooLong { window: 10, horizon: 10 })
        );
    }

    #[test]
    fn lag_seven_copy() {
        // every cell takes both values somewhere, so row features normalise to themselves
        let mut t = table(21, 3);
        for d in 0..21 {
            for e in 0..3usize {
                t.set(e, d, 0, (d as usize % 7 + e).is_multiple_of(3));
            }
        }
        let w = build_dataset::<f64>(&t, Encoding::Windowed, 7, &FeatureSpec::AttendanceRow).unwrap();
        for s in &w.samples {
            assert_eq!(&s.input[..3], s.target.as_slice());
            let direct: Vec<f64> = t.day_row(s.day_index - 7).iter().map(|&v| v as f64).collect();
            assert_eq!(s.target, direct);
        }
    }

    #[test]
    fn splits() {
        let t = table(10, 1);
        let d = build_dataset::<f64>(&t, Encoding::Binary32, 0, &FeatureSpec::AttendanceRow).unwrap();
        let (a, b) = d.split(0.7).unwrap();
        assert_eq!((a.len(), b.len()), (7, 3));
        let two = build_dataset::<f64>(&table(2, 1), Encoding::Binary32, 0, &FeatureSpec::AttendanceRow).unwrap();
        let (a, b) = two.split(0.5).unwrap();
        assert_eq!((a.len(), b.len()), (1, 1));
        assert!(matches!(two.split(0.99), Err(DatasetError::EmptySide { .. })));
        assert!(matches!(two.split(1.0), Err(DatasetError::BadFraction(_))));
    }

    #[test]
    fn train_bounds_applied_to_test() {
        // staffing ramps up over time, so the test days carry a larger
        // attendance fraction than anything seen in training
        let mut t = table(12, 4);
        for d in 0..12u32 {
            let on = if d < 9 { 1 } else { 4 };
            for e in 0..on {
                t.set(e, d, 0, true);
            }
        }
        let spec = FeatureSpec::Summary { required_per_day: 4.0, shift_required: vec![1] };
        let d = build_dataset::<f64>(&t, Encoding::Windowed, 2, &spec).unwrap();
        let (train, test) = d.split(0.6).unwrap();
        assert_eq!(train.normalization_bounds, test.normalization_bounds);
        assert!(test.samples.iter().flat_map(|s| &s.input).any(|&v| v > 1.0));
        assert!(train.samples.iter().flat_map(|s| &s.input).all(|&v| (0.0..=1.0).contains(&v)));
    }

    proptest! {
        #[test]
        fn binary_roundtrip(day in 0u64..=u32::MAX as u64) {
            let bits = encode_binary32::<f64>(day).unwrap();
            let back = bits.iter().fold(0u64, |acc, &b| acc * 2 + b as u64);
            prop_assert_eq!(back, day);
        }

        #[test]
        fn normalization_is_monotone(mut v in proptest::collection::vec(-1e3f64..1e3, 2..20)) {
            v.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let lo = v[0];
            let hi = v[v.len() - 1];
            let out = minmax_normalize(&v, (lo, hi));
            prop_assert!(out.windows(2).all(|w| w[0] <= w[1]));
        }

        #[test]
        fn split_keeps_order(n in 2u32..40, f in 0.05f64..0.95) {
            let d = build_dataset::<f64>(&table(n, 1), Encoding::Binary32, 0, &FeatureSpec::AttendanceRow).unwrap();
            if let Ok((a, b)) = d.split(f) {
                prop_assert_eq!(a.len() + b.len(), d.len());
                let days: Vec<u32> = a.samples.iter().chain(&b.samples).map(|s| s.day_index).collect();
                prop_assert_eq!(days, (0..n).collect::<Vec<_>>());
            }
        }
    }
}
