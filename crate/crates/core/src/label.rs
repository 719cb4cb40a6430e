//! Time-to-hypoglycemia class assignment.
//!
//! | class | minutes to the nearest future glucose ≤ threshold |
//! |-------|-----------------------------------------------------|
//! | 0     | the sample itself is at or below the threshold       |
//! | 1     | 5, 10                                               |
//! | 2     | 15 – 25                                             |
//! | 3     | 30 – 55                                             |
//! | 4     | 60 – 120                                            |
//! | 5     | more than 120, or no later event                    |
//!
//! Distance is counted along the grid, through missing slots.

use std::io::Write;

use crate::ingest::TIMESTAMP_FORMAT;
use crate::series::{SubjectSeries, STEP_MINUTES};

pub const DEFAULT_HYPO_THRESHOLD: f64 = 70.0;

/// Largest class index.
pub const MAX_CLASS: u8 = 5;

/// Farthest look-ahead, in grid steps, that still yields a pre-event class.
pub const HORIZON_STEPS: usize = 24;

/// Class for a sample `steps` grid slots before the nearest event
/// (0 = the sample is itself hypoglycemic).
pub fn class_for_steps(steps: usize) -> u8 {
    match steps {
        0 => 0,
        1..=2 => 1,
        3..=5 => 2,
        6..=11 => 3,
        12..=HORIZON_STEPS => 4,
        _ => 5,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabeledSample {
    pub index: usize,
    pub glucose: f64,
    pub class: u8,
    /// Minutes to the nearest future event, `None` when there is none.
    pub minutes_to_onset: Option<u32>,
}

/// Per-slot class labels for a glucose channel, `None` on missing slots.
pub fn class_per_slot(glucose: &[Option<f64>], threshold: f64) -> Vec<Option<u8>> {
    let mut out = vec![None; glucose.len()];
    let mut next_event: Option<usize> = None;
    for i in (0..glucose.len()).rev() {
        let Some(g) = glucose[i] else { continue };
        if g <= threshold {
            next_event = Some(i);
        }
        out[i] = Some(match next_event {
            Some(e) => class_for_steps(e - i),
            None => MAX_CLASS,
        });
    }
    out
}

/// Labels every present glucose sample of `series`.
pub fn assign_classes(series: &SubjectSeries, threshold: f64) -> Vec<LabeledSample> {
    let mut out = Vec::with_capacity(series.len());
    let mut next_event: Option<usize> = None;
    for i in (0..series.len()).rev() {
        let Some(g) = series.glucose[i] else { continue };
        if g <= threshold {
            next_event = Some(i);
        }
        let steps = next_event.map(|e| e - i);
        out.push(LabeledSample {
            index: i,
            glucose: g,
            class: steps.map_or(MAX_CLASS, class_for_steps),
            minutes_to_onset: steps.map(|s| (s as i64 * STEP_MINUTES) as u32),
        });
    }
    out.reverse();
    out
}

/// A series together with its per-slot classes.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSeries {
    pub series: SubjectSeries,
    pub classes: Vec<Option<u8>>,
}

impl LabeledSeries {
    pub fn new(series: SubjectSeries, threshold: f64) -> Self {
        let classes = class_per_slot(&series.glucose, threshold);
        Self { series, classes }
    }

    /// `subject_id,timestamp,glucose,heart_rate,class`, one row per labeled slot.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["subject_id", "timestamp", "glucose", "heart_rate", "class"])?;
        let s = &self.series;
        for (i, class) in self.classes.iter().enumerate() {
            let (Some(class), Some(g)) = (class, s.glucose[i]) else {
                continue;
            };
            let hr = s.heart_rate.as_ref().and_then(|h| h[i]);
            w.write_record([
                s.subject_id.clone(),
                s.timestamp(i).format(TIMESTAMP_FORMAT).to_string(),
                g.to_string(),
                hr.map(|v| v.to_string()).unwrap_or_default(),
                class.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}
