//! Zero masking, hard physiological bounds, and per-subject IQR fences.
//!
//! Order is fixed: zeros become missing first, fences are then computed once
//! per subject and channel on the zero-masked values, and a value is masked
//! when it breaks either the hard bounds or the fences.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::series::{Channel, SubjectSeries};

/// Fewest values for which quartiles are computed.
pub const MIN_IQR_VALUES: usize = 4;

/// Fence multiplier applied to the interquartile range.
pub const IQR_MULTIPLIER: f64 = 1.5;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum QualityError {
    #[error("insufficient data for IQR: {0} values, need at least {MIN_IQR_VALUES}")]
    InsufficientData(usize),
    #[error("invalid {channel} bounds: min {min} must be below max {max}")]
    InvalidBounds { channel: Channel, min: f64, max: f64 },
}

/// Hard limits outside which a reading is physiologically implausible.
/// Values equal to a limit survive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhysiologicalBounds {
    pub glucose_min: f64,
    pub glucose_max: f64,
    pub heart_rate_min: f64,
    pub heart_rate_max: f64,
}

impl Default for PhysiologicalBounds {
    fn default() -> Self {
        Self {
            glucose_min: 40.0,
            glucose_max: 500.0,
            heart_rate_min: 30.0,
            heart_rate_max: 200.0,
        }
    }
}

impl PhysiologicalBounds {
    pub fn range(&self, channel: Channel) -> (f64, f64) {
        match channel {
            Channel::Glucose => (self.glucose_min, self.glucose_max),
            Channel::HeartRate => (self.heart_rate_min, self.heart_rate_max),
        }
    }

    pub fn validate(&self) -> Result<(), QualityError> {
        for channel in Channel::ALL {
            let (min, max) = self.range(channel);
            if min.partial_cmp(&max) != Some(std::cmp::Ordering::Less) {
                return Err(QualityError::InvalidBounds { channel, min, max });
            }
        }
        Ok(())
    }
}

/// Quartiles and the 1.5·IQR fences derived from them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IqrFences {
    pub q1: f64,
    pub q3: f64,
    pub lower: f64,
    pub upper: f64,
}

impl IqrFences {
    pub fn iqr(&self) -> f64 {
        self.q3 - self.q1
    }

    pub fn contains(&self, v: f64) -> bool {
        v >= self.lower && v <= self.upper
    }
}

/// Percentile of already-sorted values by linear interpolation between order
/// statistics at position `(n - 1) * p`.
pub fn sorted_percentile(sorted: &[f64], p: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let frac = h - lo as f64;
    match sorted.get(lo + 1) {
        Some(next) => sorted[lo] + frac * (next - sorted[lo]),
        None => sorted[lo],
    }
}

/// Quartiles and fences of one subject's channel. Needs at least four values.
pub fn iqr_fences(values: &[f64]) -> Result<IqrFences, QualityError> {
    if values.len() < MIN_IQR_VALUES {
        return Err(QualityError::InsufficientData(values.len()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let q1 = sorted_percentile(&sorted, 0.25);
    let q3 = sorted_percentile(&sorted, 0.75);
    let spread = IQR_MULTIPLIER * (q3 - q1);
    Ok(IqrFences {
        q1,
        q3,
        lower: q1 - spread,
        upper: q3 + spread,
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ZeroCounts {
    pub glucose: usize,
    pub heart_rate: usize,
}

impl ZeroCounts {
    pub fn get(&self, channel: Channel) -> usize {
        match channel {
            Channel::Glucose => self.glucose,
            Channel::HeartRate => self.heart_rate,
        }
    }
}

/// Replaces every exact zero with missing, in both channels.
pub fn mask_zeros(mut series: SubjectSeries) -> (SubjectSeries, ZeroCounts) {
    let mut counts = ZeroCounts::default();
    for channel in Channel::ALL {
        let Some(values) = series.channel_mut(channel) else {
            continue;
        };
        let mut n = 0;
        for v in values.iter_mut().filter(|v| **v == Some(0.0)) {
            *v = None;
            n += 1;
        }
        match channel {
            Channel::Glucose => counts.glucose = n,
            Channel::HeartRate => counts.heart_rate = n,
        }
    }
    (series, counts)
}

/// Quality outcome for one subject and channel.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChannelQuality {
    pub dataset_tag: String,
    pub subject_id: String,
    pub channel: Channel,
    pub zeros_masked: usize,
    /// Values outside the hard bounds (counted here even when also beyond a fence).
    pub bounds_masked: usize,
    /// Values inside the hard bounds but outside the fences.
    pub iqr_masked: usize,
    /// `None` when fewer than four values were available.
    pub fences: Option<IqrFences>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct QualityReport {
    pub rows: Vec<ChannelQuality>,
}

impl QualityReport {
    pub fn merge(&mut self, other: QualityReport) {
        self.rows.extend(other.rows);
        self.rows.sort_by(|a, b| {
            (&a.dataset_tag, &a.subject_id, a.channel).cmp(&(&b.dataset_tag, &b.subject_id, b.channel))
        });
    }

    pub fn total_masked(&self) -> usize {
        self.rows
            .iter()
            .map(|r| r.zeros_masked + r.bounds_masked + r.iqr_masked)
            .sum()
    }

    /// `dataset_tag,subject_id,channel,zeros_masked,bounds_masked,iqr_masked,q1,q3,lower_fence,upper_fence`
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "dataset_tag",
            "subject_id",
            "channel",
            "zeros_masked",
            "bounds_masked",
            "iqr_masked",
            "q1",
            "q3",
            "lower_fence",
            "upper_fence",
        ])?;
        for r in &self.rows {
            let f =
                |pick: fn(&IqrFences) -> f64| r.fences.as_ref().map(pick).map(|v| v.to_string()).unwrap_or_default();
            w.write_record([
                r.dataset_tag.clone(),
                r.subject_id.clone(),
                r.channel.to_string(),
                r.zeros_masked.to_string(),
                r.bounds_masked.to_string(),
                r.iqr_masked.to_string(),
                f(|x| x.q1),
                f(|x| x.q3),
                f(|x| x.lower),
                f(|x| x.upper),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Masks hard-bound violations and IQR outliers. Expects zeros already masked.
pub fn mask_outliers(mut series: SubjectSeries, bounds: &PhysiologicalBounds) -> (SubjectSeries, QualityReport) {
    let mut report = QualityReport::default();
    let (dataset_tag, subject_id) = (series.dataset_tag.clone(), series.subject_id.clone());
    for channel in Channel::ALL {
        let Some(values) = series.channel_mut(channel) else {
            continue;
        };
        let present: Vec<f64> = values.iter().flatten().copied().collect();
        let fences = match iqr_fences(&present) {
            Ok(f) => Some(f),
            Err(e) => {
                log::debug!("{dataset_tag}/{subject_id} {channel}: {e}; hard bounds only");
                None
            }
        };
        let (min, max) = bounds.range(channel);
        let (mut bounds_masked, mut iqr_masked) = (0, 0);
        for slot in values.iter_mut() {
            let Some(v) = *slot else { continue };
            if v < min || v > max {
                bounds_masked += 1;
                *slot = None;
            } else if fences.is_some_and(|f| !f.contains(v)) {
                iqr_masked += 1;
                *slot = None;
            }
        }
        report.rows.push(ChannelQuality {
            dataset_tag: dataset_tag.clone(),
            subject_id: subject_id.clone(),
            channel,
            zeros_masked: 0,
            bounds_masked,
            iqr_masked,
            fences,
        });
    }
    (series, report)
}

/// Full quality stage for one subject: [`mask_zeros`] then [`mask_outliers`].
pub fn clean(series: SubjectSeries, bounds: &PhysiologicalBounds) -> (SubjectSeries, QualityReport) {
    let (series, zeros) = mask_zeros(series);
    let (series, mut report) = mask_outliers(series, bounds);
    for row in &mut report.rows {
        row.zeros_masked = zeros.get(row.channel);
    }
    (series, report)
}
