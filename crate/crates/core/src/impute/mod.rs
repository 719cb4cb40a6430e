//! Gap detection and duration-stratified imputation.
//!
//! Short bounded gaps are filled linearly, medium bounded gaps with Stineman
//! interpolation over a small local context, and long or edge gaps are left
//! missing. Knots always come from the pre-imputation values, so gaps in one
//! channel are filled independently of each other.

pub mod stineman;

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::series::{Channel, SubjectSeries, STEP_MINUTES};
pub use stineman::{stineman_slopes, SlopeEstimate, Stineman, StinemanError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GapCategory {
    Short,
    Medium,
    Long,
}

impl GapCategory {
    pub const ALL: [GapCategory; 3] = [GapCategory::Short, GapCategory::Medium, GapCategory::Long];

    pub fn as_str(self) -> &'static str {
        match self {
            GapCategory::Short => "short",
            GapCategory::Medium => "medium",
            GapCategory::Long => "long",
        }
    }

    fn ordinal(self) -> usize {
        self as usize
    }
}

/// Category limits in grid slots. Defaults: short ≤ 5 slots (25 min),
/// medium 6..=23 slots (30–115 min), long ≥ 24 slots (2 h).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GapBoundaries {
    pub short_max_slots: usize,
    pub medium_max_slots: usize,
}

impl Default for GapBoundaries {
    fn default() -> Self {
        Self {
            short_max_slots: 5,
            medium_max_slots: 23,
        }
    }
}

impl GapBoundaries {
    pub fn categorize(&self, length: usize) -> GapCategory {
        if length <= self.short_max_slots {
            GapCategory::Short
        } else if length <= self.medium_max_slots {
            GapCategory::Medium
        } else {
            GapCategory::Long
        }
    }

    pub fn is_valid(&self) -> bool {
        self.short_max_slots >= 1 && self.short_max_slots < self.medium_max_slots
    }
}

/// A maximal run of missing slots.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GapSegment {
    pub start_index: usize,
    pub length: usize,
    pub category: GapCategory,
    /// Present values exist on both sides.
    pub bounded: bool,
}

impl GapSegment {
    pub fn end_index(&self) -> usize {
        self.start_index + self.length
    }

    pub fn duration_minutes(&self) -> i64 {
        self.length as i64 * STEP_MINUTES
    }
}

/// All maximal missing runs in `values`, in index order.
pub fn find_gaps(values: &[Option<f64>], boundaries: &GapBoundaries) -> Vec<GapSegment> {
    let mut gaps = Vec::new();
    let mut i = 0;
    while i < values.len() {
        if values[i].is_some() {
            i += 1;
            continue;
        }
        let start = i;
        while i < values.len() && values[i].is_none() {
            i += 1;
        }
        let length = i - start;
        gaps.push(GapSegment {
            start_index: start,
            length,
            category: boundaries.categorize(length),
            bounded: start > 0 && i < values.len(),
        });
    }
    gaps
}

/// Why a gap was left missing.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SkipReason {
    Unbounded,
    LongGap,
    InsufficientKnots,
}

/// (index, value) of a present slot.
type Knot = (usize, f64);

fn bounding_knots(values: &[Option<f64>], gap: &GapSegment) -> Result<(Knot, Knot), SkipReason> {
    if !gap.bounded {
        return Err(SkipReason::Unbounded);
    }
    let l = gap.start_index - 1;
    let r = gap.end_index();
    match (values.get(l).copied().flatten(), values.get(r).copied().flatten()) {
        (Some(yl), Some(yr)) => Ok(((l, yl), (r, yr))),
        _ => Err(SkipReason::Unbounded),
    }
}

/// Fills a gap on the straight line between its bounding knots. Returns the
/// number of slots filled.
pub fn linear_fill(values: &mut [Option<f64>], gap: &GapSegment) -> Result<usize, SkipReason> {
    let ((il, yl), (ir, yr)) = bounding_knots(values, gap)?;
    let span = (ir - il) as f64;
    for (j, slot) in values
        .iter_mut()
        .enumerate()
        .take(gap.end_index())
        .skip(gap.start_index)
    {
        *slot = Some(yl + (yr - yl) * (j - il) as f64 / span);
    }
    Ok(gap.length)
}

/// Local knot context for Stineman slopes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StinemanContext {
    /// Present knots gathered on each side of a gap.
    pub knots_per_side: usize,
    /// Knots farther than this many slots from the gap's bounding knot are ignored.
    pub max_span_slots: usize,
    /// Gaps with fewer context knots in total are skipped.
    pub min_knots: usize,
}

impl Default for StinemanContext {
    fn default() -> Self {
        Self {
            knots_per_side: 3,
            max_span_slots: 24,
            min_knots: 2,
        }
    }
}

/// Present knots around `gap` in `original`: up to `knots_per_side` on each
/// side, within `max_span_slots` of the bounding knot. Ordered by index.
pub fn context_knots(original: &[Option<f64>], gap: &GapSegment, ctx: &StinemanContext) -> Vec<(usize, f64)> {
    let mut knots = Vec::with_capacity(2 * ctx.knots_per_side);
    if gap.start_index > 0 {
        let edge = gap.start_index - 1;
        let floor = edge.saturating_sub(ctx.max_span_slots);
        knots.extend(
            (floor..=edge)
                .rev()
                .filter_map(|i| original[i].map(|v| (i, v)))
                .take(ctx.knots_per_side),
        );
        knots.reverse();
    }
    let edge = gap.end_index();
    if edge < original.len() {
        let ceil = (edge + ctx.max_span_slots).min(original.len() - 1);
        knots.extend(
            (edge..=ceil)
                .filter_map(|i| original[i].map(|v| (i, v)))
                .take(ctx.knots_per_side),
        );
    }
    knots
}

/// Fills a gap by Stineman interpolation through knots taken from
/// `original`. Returns the number of slots filled.
pub fn stineman_fill(
    values: &mut [Option<f64>],
    original: &[Option<f64>],
    gap: &GapSegment,
    ctx: &StinemanContext,
) -> Result<usize, SkipReason> {
    bounding_knots(original, gap)?;
    let knots = context_knots(original, gap, ctx);
    if knots.len() < ctx.min_knots.max(2) {
        return Err(SkipReason::InsufficientKnots);
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = knots.iter().map(|&(i, v)| (i as f64, v)).unzip();
    let curve = Stineman::new(xs, ys).map_err(|_| SkipReason::InsufficientKnots)?;
    for (j, slot) in values
        .iter_mut()
        .enumerate()
        .take(gap.end_index())
        .skip(gap.start_index)
    {
        *slot = Some(curve.eval(j as f64).expect("gap lies between its bounding knots"));
    }
    Ok(gap.length)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImputeMode {
    /// Linear for short gaps, Stineman for medium gaps, long gaps untouched.
    #[default]
    Stratified,
    /// Linear interpolation across every bounded gap, whatever its length.
    AllLinear,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ImputePolicy {
    pub mode: ImputeMode,
    pub gaps: GapBoundaries,
    pub stineman: StinemanContext,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct CategoryCounts {
    pub gaps_total: usize,
    pub gaps_filled: usize,
    pub gaps_skipped: usize,
    pub slots_filled: usize,
}

/// Imputation outcome for one subject and channel.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ChannelImputation {
    pub dataset_tag: String,
    pub subject_id: String,
    pub channel: Channel,
    /// Indexed by [`GapCategory`] order: short, medium, long.
    pub categories: [CategoryCounts; 3],
    pub missing_before: usize,
    pub missing_after: usize,
}

impl ChannelImputation {
    pub fn counts(&self, category: GapCategory) -> &CategoryCounts {
        &self.categories[category.ordinal()]
    }

    pub fn slots_filled(&self) -> usize {
        self.categories.iter().map(|c| c.slots_filled).sum()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ImputationReport {
    pub rows: Vec<ChannelImputation>,
}

impl ImputationReport {
    pub fn merge(&mut self, other: ImputationReport) {
        self.rows.extend(other.rows);
        self.rows.sort_by(|a, b| {
            (&a.dataset_tag, &a.subject_id, a.channel).cmp(&(&b.dataset_tag, &b.subject_id, b.channel))
        });
    }

    /// `dataset_tag,subject_id,channel,category,gaps_total,gaps_filled,gaps_skipped,slots_filled`
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "dataset_tag",
            "subject_id",
            "channel",
            "category",
            "gaps_total",
            "gaps_filled",
            "gaps_skipped",
            "slots_filled",
        ])?;
        for r in &self.rows {
            for cat in GapCategory::ALL {
                let c = r.counts(cat);
                w.write_record([
                    r.dataset_tag.clone(),
                    r.subject_id.clone(),
                    r.channel.to_string(),
                    cat.as_str().to_string(),
                    c.gaps_total.to_string(),
                    c.gaps_filled.to_string(),
                    c.gaps_skipped.to_string(),
                    c.slots_filled.to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Imputes one channel slice in place under `policy`.
pub fn impute_channel(values: &mut [Option<f64>], policy: &ImputePolicy) -> ([CategoryCounts; 3], usize, usize) {
    let original = values.to_vec();
    let gaps = find_gaps(&original, &policy.gaps);
    let missing_before = gaps.iter().map(|g| g.length).sum();
    let mut counts = [CategoryCounts::default(); 3];
    for gap in &gaps {
        let result = match (policy.mode, gap.category) {
            (ImputeMode::AllLinear, _) | (ImputeMode::Stratified, GapCategory::Short) => linear_fill(values, gap),
            (ImputeMode::Stratified, GapCategory::Medium) => stineman_fill(values, &original, gap, &policy.stineman),
            (ImputeMode::Stratified, GapCategory::Long) => Err(SkipReason::LongGap),
        };
        let c = &mut counts[gap.category.ordinal()];
        c.gaps_total += 1;
        match result {
            Ok(n) => {
                c.gaps_filled += 1;
                c.slots_filled += n;
            }
            Err(_) => c.gaps_skipped += 1,
        }
    }
    let filled: usize = counts.iter().map(|c| c.slots_filled).sum();
    (counts, missing_before, missing_before - filled)
}

/// Imputes every channel of a series.
pub fn impute_all(mut series: SubjectSeries, policy: &ImputePolicy) -> (SubjectSeries, ImputationReport) {
    let mut report = ImputationReport::default();
    let (dataset_tag, subject_id) = (series.dataset_tag.clone(), series.subject_id.clone());
    for channel in Channel::ALL {
        let Some(values) = series.channel_mut(channel) else {
            continue;
        };
        let (categories, missing_before, missing_after) = impute_channel(values, policy);
        report.rows.push(ChannelImputation {
            dataset_tag: dataset_tag.clone(),
            subject_id: subject_id.clone(),
            channel,
            categories,
            missing_before,
            missing_after,
        });
    }
    (series, report)
}

/// One slot of the raw / linear / Stineman comparison trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub index: usize,
    pub raw: Option<f64>,
    pub linear: Option<f64>,
    pub stineman: Option<f64>,
}

/// Slot-by-slot comparison of the raw channel, the all-linear fill, and the
/// stratified fill.
pub fn imputation_trace(series: &SubjectSeries, channel: Channel, policy: &ImputePolicy) -> Vec<TraceRow> {
    let Some(raw) = series.channel(channel) else {
        return Vec::new();
    };
    let mut linear = raw.to_vec();
    impute_channel(
        &mut linear,
        &ImputePolicy {
            mode: ImputeMode::AllLinear,
            ..*policy
        },
    );
    let mut stratified = raw.to_vec();
    impute_channel(
        &mut stratified,
        &ImputePolicy {
            mode: ImputeMode::Stratified,
            ..*policy
        },
    );
    (0..raw.len())
        .map(|i| TraceRow {
            index: i,
            raw: raw[i],
            linear: linear[i],
            stineman: stratified[i],
        })
        .collect()
}

/// `subject_id,channel,index,raw,linear,stineman`
pub fn write_trace_csv<W: Write>(rows: &[(String, Channel, Vec<TraceRow>)], out: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["subject_id", "channel", "index", "raw", "linear", "stineman"])?;
    let f = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for (subject, channel, trace) in rows {
        for r in trace {
            w.write_record([
                subject.clone(),
                channel.to_string(),
                r.index.to_string(),
                f(r.raw),
                f(r.linear),
                f(r.stineman),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;

    const V: Option<f64> = Some(1.0);
    const M: Option<f64> = None;

    fn series(glucose: Vec<Option<f64>>) -> SubjectSeries {
        let start = NaiveDate::from_ymd_opt(2024, 1, 1)
            .unwrap()
            .and_hms_opt(0, 0, 0)
            .unwrap();
        SubjectSeries::new("s", "d", start, glucose, None).unwrap()
    }

    #[test]
    fn bounded_short_gap() {
        let gaps = find_gaps(&[V, M, M, V], &GapBoundaries::default());
        assert_eq!(
            gaps,
            vec![GapSegment {
                start_index: 1,
                length: 2,
                category: GapCategory::Short,
                bounded: true
            }]
        );
        assert_eq!(gaps[0].duration_minutes(), 10);
    }

    #[test]
    fn leading_gap_is_unbounded() {
        let gaps = find_gaps(&[M, V, V], &GapBoundaries::default());
        assert_eq!(gaps.len(), 1);
        assert_eq!(gaps[0].length, 1);
        assert!(!gaps[0].bounded);
    }

    #[test]
    fn category_boundaries() {
        let b = GapBoundaries::default();
        assert_eq!(b.categorize(5), GapCategory::Short);
        assert_eq!(b.categorize(6), GapCategory::Medium);
        assert_eq!(b.categorize(23), GapCategory::Medium);
        assert_eq!(b.categorize(24), GapCategory::Long);
        let mut v = vec![V];
        v.extend(vec![M; 23]);
        v.push(V);
        let g = find_gaps(&v, &b);
        assert_eq!((g[0].category, g[0].duration_minutes()), (GapCategory::Medium, 115));
        v.insert(1, M);
        let g = find_gaps(&v, &b);
        assert_eq!((g[0].category, g[0].duration_minutes()), (GapCategory::Long, 120));
    }

    #[test]
    fn linear_values() {
        let mut v = vec![Some(100.0), M, M, Some(130.0)];
        let gap = find_gaps(&v, &GapBoundaries::default())[0];
        assert_eq!(linear_fill(&mut v, &gap), Ok(2));
        assert_eq!(v, vec![Some(100.0), Some(110.0), Some(120.0), Some(130.0)]);
    }

    #[test]
    fn linear_constant() {
        let mut v = vec![Some(90.0), M, M, M, Some(90.0)];
        let gap = find_gaps(&v, &GapBoundaries::default())[0];
        linear_fill(&mut v, &gap).unwrap();
        assert!(v.iter().all(|x| *x == Some(90.0)));
    }

    #[test]
    fn linear_skips_unbounded() {
        let mut v = vec![M, M, Some(1.0)];
        let gap = find_gaps(&v, &GapBoundaries::default())[0];
        assert_eq!(linear_fill(&mut v, &gap), Err(SkipReason::Unbounded));
        assert_eq!(v[0], None);
    }

    #[test]
    fn context_respects_side_count_and_span() {
        let mut v: Vec<Option<f64>> = (0..60).map(|i| Some(i as f64)).collect();
        for slot in &mut v[30..40] {
            *slot = None;
        }
        v[28] = None;
        let gap = find_gaps(&v, &GapBoundaries::default())
            .into_iter()
            .find(|g| g.start_index == 30)
            .unwrap();
        let idx: Vec<usize> = context_knots(&v, &gap, &StinemanContext::default())
            .iter()
            .map(|k| k.0)
            .collect();
        assert_eq!(idx, vec![26, 27, 29, 40, 41, 42]);

        let tight = StinemanContext {
            max_span_slots: 1,
            ..Default::default()
        };
        let idx: Vec<usize> = context_knots(&v, &gap, &tight).iter().map(|k| k.0).collect();
        assert_eq!(idx, vec![29, 40, 41]);
    }

    #[test]
    fn stineman_fill_hits_bounding_knots_and_line() {
        let mut v: Vec<Option<f64>> = (0..30).map(|i| Some(3.0 * i as f64 + 50.0)).collect();
        let truth = v.clone();
        for slot in &mut v[10..20] {
            *slot = None;
        }
        let original = v.clone();
        let gap = find_gaps(&v, &GapBoundaries::default())[0];
        assert_eq!(gap.category, GapCategory::Medium);
        assert_eq!(
            stineman_fill(&mut v, &original, &gap, &StinemanContext::default()),
            Ok(10)
        );
        for (a, b) in v.iter().zip(&truth) {
            assert!((a.unwrap() - b.unwrap()).abs() < 1e-9);
        }
        assert_eq!(v[9], truth[9]);
        assert_eq!(v[20], truth[20]);
    }

    #[test]
    fn stratified_policy() {
        let mut g = vec![Some(100.0); 10];
        g.extend([M; 3]);
        g.extend(vec![Some(120.0); 10]);
        g.extend(vec![M; 30]);
        g.extend(vec![Some(110.0); 5]);
        let (s, r) = impute_all(series(g), &ImputePolicy::default());
        assert!(s.glucose[10..13].iter().all(Option::is_some));
        assert!(s.glucose[23..53].iter().all(Option::is_none));
        let row = &r.rows[0];
        assert_eq!(row.counts(GapCategory::Short).gaps_filled, 1);
        assert_eq!(row.counts(GapCategory::Long).gaps_skipped, 1);
        assert_eq!((row.missing_before, row.missing_after), (33, 30));
    }

    #[test]
    fn no_gaps_is_identity() {
        let input = series(vec![Some(100.0), Some(101.0)]);
        let (s, r) = impute_all(input.clone(), &ImputePolicy::default());
        assert_eq!(s, input);
        assert_eq!(r.rows[0].slots_filled(), 0);
    }

    #[test]
    fn medium_gap_without_enough_knots_is_counted() {
        // edge gap: only right-hand knots exist
        let mut g = vec![M; 8];
        g.extend(vec![Some(100.0); 5]);
        let (s, r) = impute_all(series(g.clone()), &ImputePolicy::default());
        assert_eq!(s.glucose, g);
        assert_eq!(r.rows[0].counts(GapCategory::Medium).gaps_skipped, 1);

        // bounded, but the policy demands more knots than the context holds
        let mut g = vec![Some(100.0)];
        g.extend(vec![M; 8]);
        g.push(Some(110.0));
        let policy = ImputePolicy {
            stineman: StinemanContext {
                min_knots: 3,
                ..Default::default()
            },
            ..Default::default()
        };
        let (s, r) = impute_all(series(g), &policy);
        assert_eq!(s.missing_count(Channel::Glucose), Some(8));
        assert_eq!(r.rows[0].counts(GapCategory::Medium).gaps_skipped, 1);
    }

    #[test]
    fn all_linear_fills_long_gaps() {
        let mut g = vec![Some(100.0)];
        g.extend(vec![M; 30]);
        g.push(Some(131.0));
        let policy = ImputePolicy {
            mode: ImputeMode::AllLinear,
            ..Default::default()
        };
        let (s, _) = impute_all(series(g), &policy);
        assert_eq!(s.glucose[5], Some(105.0));
    }

    #[test]
    fn trace_columns() {
        let mut g: Vec<Option<f64>> = (0..40).map(|i| Some((i as f64 / 4.0).sin() * 40.0 + 120.0)).collect();
        for slot in &mut g[10..20] {
            *slot = None;
        }
        let s = series(g);
        let rows = imputation_trace(&s, Channel::Glucose, &ImputePolicy::default());
        assert_eq!(rows.len(), 40);
        assert!(rows[15].raw.is_none());
        assert!(rows[15].linear.is_some() && rows[15].stineman.is_some());
        assert_ne!(rows[15].linear, rows[15].stineman);
        assert_eq!(rows[5].linear, rows[5].raw);
    }
}
