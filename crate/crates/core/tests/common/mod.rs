#![allow(dead_code)]

use chrono::{NaiveDate, NaiveDateTime};
use proptest::prelude::*;

use cgm_refine::SubjectSeries;

pub fn t0() -> NaiveDateTime {
    NaiveDate::from_ymd_opt(2024, 3, 1)
        .unwrap()
        .and_hms_opt(0, 0, 0)
        .unwrap()
}

pub fn series(id: &str, glucose: Vec<Option<f64>>, hr: Option<Vec<Option<f64>>>) -> SubjectSeries {
    SubjectSeries::new(id, "prop", t0(), glucose, hr).unwrap()
}

/// A channel of glucose-like values with random missing slots and whole-number
/// or fractional readings.
pub fn channel(
    len: impl Into<prop::collection::SizeRange>,
    lo: f64,
    hi: f64,
) -> impl Strategy<Value = Vec<Option<f64>>> {
    prop::collection::vec(
        prop_oneof![
            1 => Just(None),
            6 => (lo..hi).prop_map(Some),
            2 => (lo as i64..hi as i64).prop_map(|v| Some(v as f64)),
        ],
        len,
    )
}
