//! Uniform 5-minute grid series shared by every pipeline stage.

use std::fmt;

use chrono::{Duration, NaiveDateTime};
use serde::{Deserialize, Serialize};

/// Grid spacing in minutes.
pub const STEP_MINUTES: i64 = 5;

/// Grid spacing in seconds.
pub const STEP_SECONDS: i64 = STEP_MINUTES * 60;

/// A sensor channel carried by a [`SubjectSeries`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    Glucose,
    HeartRate,
}

impl Channel {
    pub const ALL: [Channel; 2] = [Channel::Glucose, Channel::HeartRate];

    pub fn as_str(self) -> &'static str {
        match self {
            Channel::Glucose => "glucose",
            Channel::HeartRate => "heart_rate",
        }
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One subject's glucose (mg/dL) and optional heart rate (bpm) on a uniform
/// 5-minute grid. `None` marks a missing slot; `Some(0.0)` is a real zero.
#[derive(Debug, Clone, PartialEq)]
pub struct SubjectSeries {
    pub subject_id: String,
    pub dataset_tag: String,
    pub grid_start: NaiveDateTime,
    pub glucose: Vec<Option<f64>>,
    pub heart_rate: Option<Vec<Option<f64>>>,
}

impl SubjectSeries {
    /// Builds a series, checking that both channels share one length.
    pub fn new(
        subject_id: impl Into<String>,
        dataset_tag: impl Into<String>,
        grid_start: NaiveDateTime,
        glucose: Vec<Option<f64>>,
        heart_rate: Option<Vec<Option<f64>>>,
    ) -> Result<Self, SeriesError> {
        if let Some(hr) = &heart_rate {
            if hr.len() != glucose.len() {
                return Err(SeriesError::LengthMismatch {
                    glucose: glucose.len(),
                    heart_rate: hr.len(),
                });
            }
        }
        Ok(Self {
            subject_id: subject_id.into(),
            dataset_tag: dataset_tag.into(),
            grid_start,
            glucose,
            heart_rate,
        })
    }

    pub fn len(&self) -> usize {
        self.glucose.len()
    }

    pub fn is_empty(&self) -> bool {
        self.glucose.is_empty()
    }

    pub fn has_heart_rate(&self) -> bool {
        self.heart_rate.is_some()
    }

    /// Timestamp of grid slot `index`.
    pub fn timestamp(&self, index: usize) -> NaiveDateTime {
        self.grid_start + Duration::minutes(STEP_MINUTES * index as i64)
    }

    pub fn channel(&self, channel: Channel) -> Option<&[Option<f64>]> {
        match channel {
            Channel::Glucose => Some(&self.glucose),
            Channel::HeartRate => self.heart_rate.as_deref(),
        }
    }

    pub fn channel_mut(&mut self, channel: Channel) -> Option<&mut Vec<Option<f64>>> {
        match channel {
            Channel::Glucose => Some(&mut self.glucose),
            Channel::HeartRate => self.heart_rate.as_mut(),
        }
    }

    /// Channels actually present on this series.
    pub fn channels(&self) -> impl Iterator<Item = Channel> + '_ {
        Channel::ALL.into_iter().filter(move |c| self.channel(*c).is_some())
    }

    pub fn missing_count(&self, channel: Channel) -> Option<usize> {
        self.channel(channel)
            .map(|values| values.iter().filter(|v| v.is_none()).count())
    }

    /// Sort key used to merge per-subject results deterministically.
    pub fn key(&self) -> (&str, &str) {
        (&self.dataset_tag, &self.subject_id)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SeriesError {
    #[error("channel length mismatch: glucose has {glucose} slots, heart rate has {heart_rate}")]
    LengthMismatch { glucose: usize, heart_rate: usize },
}
