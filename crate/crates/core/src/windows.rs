//! Min-max normalization, sliding windows, chronological splitting and
//! seeded undersampling.

use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::label::LabeledSeries;
use crate::series::{Channel, SubjectSeries};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum WindowError {
    #[error("degenerate {0} channel: need at least two distinct values to normalize")]
    DegenerateChannel(Channel),
    #[error("empty class in split: class {class} has no {split} windows")]
    EmptyClass { split: Split, class: u8 },
    #[error("subject {0} has no heart-rate channel but the run requires glucose+hr")]
    MixedChannels(String),
    #[error("invalid window config: {0}")]
    InvalidConfig(String),
}

/// Channels fed into windows.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum ChannelSet {
    #[default]
    #[serde(rename = "glucose")]
    Glucose,
    #[serde(rename = "glucose+hr")]
    GlucoseHeartRate,
}

impl ChannelSet {
    pub fn count(self) -> usize {
        match self {
            ChannelSet::Glucose => 1,
            ChannelSet::GlucoseHeartRate => 2,
        }
    }

    pub fn includes_heart_rate(self) -> bool {
        self == ChannelSet::GlucoseHeartRate
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormScope {
    /// Pooled over every subject and every slot.
    #[default]
    Global,
    /// Pooled over the slots covered by training windows only.
    TrainOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinMax {
    pub min: f64,
    pub max: f64,
}

impl MinMax {
    fn fit(channel: Channel, values: impl Iterator<Item = f64>) -> Result<Self, WindowError> {
        let (min, max) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
        if min < max {
            Ok(Self { min, max })
        } else {
            Err(WindowError::DegenerateChannel(channel))
        }
    }

    /// Affine map; values outside the fitted range are not clipped.
    pub fn apply(&self, v: f64) -> f64 {
        (v - self.min) / (self.max - self.min)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizationParams {
    pub scope: NormScope,
    pub glucose: MinMax,
    pub heart_rate: Option<MinMax>,
}

impl NormalizationParams {
    pub fn channel(&self, channel: Channel) -> Option<&MinMax> {
        match channel {
            Channel::Glucose => Some(&self.glucose),
            Channel::HeartRate => self.heart_rate.as_ref(),
        }
    }
}

/// Location of one window: subject ordinal, first grid slot, label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct WindowSpan {
    pub subject: usize,
    pub start: usize,
    pub label: u8,
}

/// Fits min/max per channel. `TrainOnly` uses the slots under `train_windows`
/// (subject ordinals index into `series`); `Global` ignores them.
pub fn fit_normalization(
    series: &[LabeledSeries],
    channels: ChannelSet,
    scope: NormScope,
    train_windows: &[WindowSpan],
    window_length: usize,
) -> Result<NormalizationParams, WindowError> {
    let fit = |channel: Channel| -> Result<MinMax, WindowError> {
        let values = |s: &SubjectSeries| s.channel(channel).unwrap_or(&[]).to_vec();
        match scope {
            NormScope::Global => MinMax::fit(channel, series.iter().flat_map(|l| values(&l.series)).flatten()),
            NormScope::TrainOnly => {
                let mut covered: Vec<Vec<bool>> = series.iter().map(|l| vec![false; l.series.len()]).collect();
                for w in train_windows {
                    covered[w.subject][w.start..w.start + window_length].fill(true);
                }
                MinMax::fit(
                    channel,
                    series.iter().zip(&covered).flat_map(|(l, mask)| {
                        values(&l.series)
                            .into_iter()
                            .zip(mask.clone())
                            .filter_map(|(v, keep)| if keep { v } else { None })
                    }),
                )
            }
        }
    };
    Ok(NormalizationParams {
        scope,
        glucose: fit(Channel::Glucose)?,
        heart_rate: if channels.includes_heart_rate() {
            Some(fit(Channel::HeartRate)?)
        } else {
            None
        },
    })
}

/// Applies min-max scaling to every channel that has parameters.
pub fn normalize(mut series: SubjectSeries, params: &NormalizationParams) -> SubjectSeries {
    for channel in Channel::ALL {
        let Some(mm) = params.channel(channel).copied() else {
            continue;
        };
        if let Some(values) = series.channel_mut(channel) {
            for v in values.iter_mut().flatten() {
                *v = mm.apply(*v);
            }
        }
    }
    series
}

/// Missing heart-rate slots become 0.0; glucose is untouched.
pub fn fill_hr_zero(mut series: SubjectSeries) -> SubjectSeries {
    if let Some(hr) = series.heart_rate.as_mut() {
        for v in hr.iter_mut().filter(|v| v.is_none()) {
            *v = Some(0.0);
        }
    }
    series
}

/// Every start (stepping by `stride`) whose `length` slots hold no missing
/// glucose, labeled with the class of the last slot.
pub fn window_spans(labeled: &LabeledSeries, subject: usize, length: usize, stride: usize) -> Vec<WindowSpan> {
    let n = labeled.series.len();
    if length == 0 || n < length {
        return Vec::new();
    }
    let mut missing_prefix = vec![0usize; n + 1];
    for (i, v) in labeled.series.glucose.iter().enumerate() {
        missing_prefix[i + 1] = missing_prefix[i] + usize::from(v.is_none());
    }
    (0..=n - length)
        .step_by(stride.max(1))
        .filter(|&s| missing_prefix[s + length] == missing_prefix[s])
        .map(|s| WindowSpan {
            subject,
            start: s,
            label: labeled.classes[s + length - 1].expect("present glucose is always labeled"),
        })
        .collect()
}

/// A materialized window: `length × channels` values in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct Window {
    pub subject_id: String,
    pub start_index: usize,
    pub label: u8,
    pub length: usize,
    pub channels: usize,
    pub values: Vec<f32>,
}

/// Copies the slots under `span` out of a normalized, HR-filled series.
pub fn materialize(series: &SubjectSeries, span: &WindowSpan, length: usize, channels: ChannelSet) -> Window {
    let mut values = Vec::with_capacity(length * channels.count());
    for i in span.start..span.start + length {
        values.push(series.glucose[i].expect("window spans contain no missing glucose") as f32);
        if channels.includes_heart_rate() {
            let hr = series.heart_rate.as_ref().and_then(|h| h[i]).unwrap_or(0.0);
            values.push(hr as f32);
        }
    }
    Window {
        subject_id: series.subject_id.clone(),
        start_index: span.start,
        label: span.label,
        length,
        channels: channels.count(),
        values,
    }
}

/// All gap-free windows of a normalized labeled series.
pub fn generate_windows(labeled: &LabeledSeries, length: usize, stride: usize, channels: ChannelSet) -> Vec<Window> {
    window_spans(labeled, 0, length, stride)
        .iter()
        .map(|span| materialize(&labeled.series, span, length, channels))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Fractions taken from the end of each subject's windows: `test` of all
/// windows, then `val` of what remains.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitRatios {
    pub test: f64,
    pub val: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        Self {
            test: 0.15,
            val: 0.1765,
        }
    }
}

impl SplitRatios {
    pub fn validate(&self) -> Result<(), WindowError> {
        for (name, r) in [("test", self.test), ("val", self.val)] {
            if !(r > 0.0 && r < 1.0) {
                return Err(WindowError::InvalidConfig(format!(
                    "{name} ratio {r} must lie in (0, 1)"
                )));
            }
        }
        Ok(())
    }

    /// (train, val, test) counts for `n` windows; later splits round up.
    pub fn counts(&self, n: usize) -> (usize, usize, usize) {
        let test = ceil_count(self.test, n);
        let rest = n - test;
        let val = ceil_count(self.val, rest);
        (rest - val, val, test)
    }
}

/// `ceil(ratio · n)`, ignoring binary round-off just above an integer.
fn ceil_count(ratio: f64, n: usize) -> usize {
    let exact = ratio * n as f64;
    ((exact - 1e-9).ceil().max(0.0) as usize).min(n)
}

/// Split membership of one subject's windows.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SubjectSplit {
    pub train: Vec<WindowSpan>,
    pub val: Vec<WindowSpan>,
    pub test: Vec<WindowSpan>,
}

impl SubjectSplit {
    pub fn get(&self, split: Split) -> &[WindowSpan] {
        match split {
            Split::Train => &self.train,
            Split::Val => &self.val,
            Split::Test => &self.test,
        }
    }
}

/// Splits one subject's windows (ordered by start) chronologically.
pub fn chronological_split(windows: &[WindowSpan], ratios: &SplitRatios) -> SubjectSplit {
    debug_assert!(windows.windows(2).all(|w| w[0].start < w[1].start));
    let (train, val, _) = ratios.counts(windows.len());
    SubjectSplit {
        train: windows[..train].to_vec(),
        val: windows[train..train + val].to_vec(),
        test: windows[train + val..].to_vec(),
    }
}

/// Reduces every class in `windows` to the minority count by seeded uniform
/// sampling without replacement. Input order does not matter; the result is
/// sorted by (subject, start).
pub fn undersample(
    windows: &[WindowSpan],
    classes: &[u8],
    split: Split,
    seed: u64,
) -> Result<Vec<WindowSpan>, WindowError> {
    let mut sorted = windows.to_vec();
    sorted.sort();
    let by_class: Vec<Vec<WindowSpan>> = classes
        .iter()
        .map(|&c| sorted.iter().copied().filter(|w| w.label == c).collect())
        .collect();
    if let Some((i, _)) = by_class.iter().enumerate().find(|(_, v)| v.is_empty()) {
        return Err(WindowError::EmptyClass {
            split,
            class: classes[i],
        });
    }
    let minority = by_class.iter().map(Vec::len).min().unwrap_or(0);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(split as u64);
    let mut selected = Vec::with_capacity(minority * classes.len());
    for pool in &by_class {
        let mut picks = rand::seq::index::sample(&mut rng, pool.len(), minority).into_vec();
        picks.sort_unstable();
        selected.extend(picks.into_iter().map(|i| pool[i]));
    }
    selected.sort();
    Ok(selected)
}

/// Stable window identifier used in the manifest.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct WindowId {
    pub dataset_tag: String,
    pub subject_id: String,
    pub start_index: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitExtent {
    pub count: usize,
    /// First and last window start in this split, when non-empty.
    pub first_start: Option<usize>,
    pub last_start: Option<usize>,
}

impl SplitExtent {
    fn of(spans: &[WindowSpan]) -> Self {
        Self {
            count: spans.len(),
            first_start: spans.first().map(|w| w.start),
            last_start: spans.last().map(|w| w.start),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubjectManifest {
    pub dataset_tag: String,
    pub subject_id: String,
    pub windows: usize,
    pub train: SplitExtent,
    pub val: SplitExtent,
    pub test: SplitExtent,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassSelection {
    pub class: u8,
    pub available: usize,
    pub selected: Vec<WindowId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSelection {
    pub split: Split,
    pub per_class: usize,
    pub classes: Vec<ClassSelection>,
}

/// Deterministic record of split membership and undersampling picks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitManifest {
    pub seed: u64,
    pub window_length: usize,
    pub stride: usize,
    pub label_set_size: u8,
    pub normalization: NormalizationParams,
    /// Subjects that produced at least one window.
    pub subjects: Vec<SubjectManifest>,
    pub excluded_subjects: Vec<String>,
    pub splits: Vec<SplitSelection>,
}

impl SplitManifest {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WindowConfig {
    pub length: usize,
    pub stride: usize,
    pub ratios: SplitRatios,
    pub normalization: NormScope,
    pub include_class5: bool,
    pub channels: ChannelSet,
}

impl Default for WindowConfig {
    fn default() -> Self {
        Self {
            length: 25,
            stride: 1,
            ratios: SplitRatios::default(),
            normalization: NormScope::Global,
            include_class5: false,
            channels: ChannelSet::Glucose,
        }
    }
}

impl WindowConfig {
    pub fn validate(&self) -> Result<(), WindowError> {
        if self.length < 2 {
            return Err(WindowError::InvalidConfig(format!(
                "window length {} must be at least 2",
                self.length
            )));
        }
        if self.stride == 0 {
            return Err(WindowError::InvalidConfig("stride must be positive".into()));
        }
        self.ratios.validate()
    }

    pub fn label_set(&self) -> Vec<u8> {
        let top = if self.include_class5 { 5 } else { 4 };
        (0..=top).collect()
    }
}

/// Balanced, normalized windows for each split.
#[derive(Debug, Clone)]
pub struct Datasets {
    pub manifest: SplitManifest,
    pub train: Vec<Window>,
    pub val: Vec<Window>,
    pub test: Vec<Window>,
}

impl Datasets {
    pub fn get(&self, split: Split) -> &[Window] {
        match split {
            Split::Train => &self.train,
            Split::Val => &self.val,
            Split::Test => &self.test,
        }
    }
}

/// Rejects a glucose+hr run containing a subject without heart rate.
pub fn check_channels(series: &[LabeledSeries], channels: ChannelSet) -> Result<(), WindowError> {
    if channels.includes_heart_rate() {
        if let Some(l) = series.iter().find(|l| !l.series.has_heart_rate()) {
            return Err(WindowError::MixedChannels(l.series.subject_id.clone()));
        }
    }
    Ok(())
}

/// Windows → split → normalization fit → HR zero-fill → undersampling.
///
/// `series` must be sorted by (dataset_tag, subject_id) and carry
/// unnormalized values.
pub fn build_datasets(series: &[LabeledSeries], cfg: &WindowConfig, seed: u64) -> Result<Datasets, WindowError> {
    cfg.validate()?;
    check_channels(series, cfg.channels)?;
    let labels = cfg.label_set();

    let per_subject: Vec<Vec<WindowSpan>> = series
        .par_iter()
        .enumerate()
        .map(|(i, l)| {
            let mut spans = window_spans(l, i, cfg.length, cfg.stride);
            spans.retain(|w| labels.contains(&w.label));
            spans
        })
        .collect();
    let splits: Vec<SubjectSplit> = per_subject
        .iter()
        .map(|w| chronological_split(w, &cfg.ratios))
        .collect();

    let train_spans: Vec<WindowSpan> = splits.iter().flat_map(|s| s.train.iter().copied()).collect();
    let params = fit_normalization(series, cfg.channels, cfg.normalization, &train_spans, cfg.length)?;
    let prepared: Vec<SubjectSeries> = series
        .par_iter()
        .map(|l| fill_hr_zero(normalize(l.series.clone(), &params)))
        .collect();

    let id = |w: &WindowSpan| WindowId {
        dataset_tag: series[w.subject].series.dataset_tag.clone(),
        subject_id: series[w.subject].series.subject_id.clone(),
        start_index: w.start,
    };

    let mut selections = Vec::new();
    let mut out: [Vec<Window>; 3] = Default::default();
    for split in Split::ALL {
        let pool: Vec<WindowSpan> = splits.iter().flat_map(|s| s.get(split).iter().copied()).collect();
        let chosen = undersample(&pool, &labels, split, seed)?;
        let per_class = chosen.len() / labels.len();
        selections.push(SplitSelection {
            split,
            per_class,
            classes: labels
                .iter()
                .map(|&c| ClassSelection {
                    class: c,
                    available: pool.iter().filter(|w| w.label == c).count(),
                    selected: chosen.iter().filter(|w| w.label == c).map(id).collect(),
                })
                .collect(),
        });
        out[split as usize] = chosen
            .par_iter()
            .map(|w| materialize(&prepared[w.subject], w, cfg.length, cfg.channels))
            .collect();
    }

    let mut subjects = Vec::new();
    let mut excluded = Vec::new();
    for (l, (spans, split)) in series.iter().zip(per_subject.iter().zip(&splits)) {
        if spans.is_empty() {
            excluded.push(l.series.subject_id.clone());
            continue;
        }
        subjects.push(SubjectManifest {
            dataset_tag: l.series.dataset_tag.clone(),
            subject_id: l.series.subject_id.clone(),
            windows: spans.len(),
            train: SplitExtent::of(&split.train),
            val: SplitExtent::of(&split.val),
            test: SplitExtent::of(&split.test),
        });
    }

    let [train, val, test] = out;
    Ok(Datasets {
        manifest: SplitManifest {
            seed,
            window_length: cfg.length,
            stride: cfg.stride,
            label_set_size: labels.len() as u8,
            normalization: params,
            subjects,
            excluded_subjects: excluded,
            splits: selections,
        },
        train,
        val,
        test,
    })
}
