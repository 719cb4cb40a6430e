//! Glucose/heart-rate rank correlation per class and gap-duration histograms.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write;

use serde::Serialize;

use crate::impute::{find_gaps, GapBoundaries, GapCategory};
use crate::label::{LabeledSeries, MAX_CLASS};
use crate::series::{Channel, SubjectSeries};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CorrelationError {
    #[error("inputs differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("too few complete pairs: {0}, need at least 3")]
    TooFewPairs(usize),
    #[error("zero rank variance")]
    ZeroVariance,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AnalysisError {
    #[error("subject {0} has no heart-rate channel")]
    NoHeartRate(String),
    #[error("series lists do not line up: {0}")]
    Mismatch(String),
}

/// 1-based ranks; tied values share the mean of the ranks they span.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && values[order[j]] == values[order[i]] {
            j += 1;
        }
        // positions i..j hold ranks i+1..=j
        let rank = (i + 1 + j) as f64 / 2.0;
        for &k in &order[i..j] {
            ranks[k] = rank;
        }
        i = j;
    }
    ranks
}

fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Spearman's rho with average ranks for ties. Pairs where either member is
/// NaN are dropped first.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64, CorrelationError> {
    if x.len() != y.len() {
        return Err(CorrelationError::LengthMismatch(x.len(), y.len()));
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = x
        .iter()
        .zip(y)
        .filter(|(a, b)| !a.is_nan() && !b.is_nan())
        .map(|(a, b)| (*a, *b))
        .unzip();
    if xs.len() < 3 {
        return Err(CorrelationError::TooFewPairs(xs.len()));
    }
    pearson(&average_ranks(&xs), &average_ranks(&ys)).ok_or(CorrelationError::ZeroVariance)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassCorrelation {
    /// `None` for the overall row.
    pub class: Option<u8>,
    pub n: usize,
    /// `None` when undefined (too few pairs or constant ranks).
    pub rho: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrelationReport {
    pub overall: ClassCorrelation,
    pub per_class: Vec<ClassCorrelation>,
}

impl CorrelationReport {
    fn rows(&self) -> impl Iterator<Item = &ClassCorrelation> {
        std::iter::once(&self.overall).chain(&self.per_class)
    }

    /// `class,n,rho`; the overall row has class `all`, undefined rho is empty.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["class", "n", "rho"])?;
        for r in self.rows() {
            w.write_record([
                r.class.map_or_else(|| "all".to_string(), |c| c.to_string()),
                r.n.to_string(),
                r.rho.map(|v| v.to_string()).unwrap_or_default(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn summary_table(&self) -> String {
        let mut s = String::from("Spearman correlation, glucose vs heart rate\n");
        let _ = writeln!(s, "{:<8}{:>12}{:>10}", "class", "pairs", "rho");
        for r in self.rows() {
            let class = r.class.map_or_else(|| "all".to_string(), |c| c.to_string());
            let rho = r.rho.map_or_else(|| "n/a".to_string(), |v| format!("{v:.3}"));
            let _ = writeln!(s, "{class:<8}{:>12}{rho:>10}", r.n);
        }
        s
    }
}

/// Spearman correlation between glucose and heart rate, overall and per
/// class, over slots where both channels are present.
pub fn per_class_correlation(series: &[LabeledSeries]) -> Result<CorrelationReport, AnalysisError> {
    let mut groups: Vec<(Vec<f64>, Vec<f64>)> = vec![Default::default(); MAX_CLASS as usize + 1];
    for l in series {
        let hr = l
            .series
            .heart_rate
            .as_ref()
            .ok_or_else(|| AnalysisError::NoHeartRate(l.series.subject_id.clone()))?;
        for ((g, h), class) in l.series.glucose.iter().zip(hr).zip(&l.classes) {
            if let (Some(g), Some(h), Some(c)) = (g, h, class) {
                groups[*c as usize].0.push(*g);
                groups[*c as usize].1.push(*h);
            }
        }
    }
    let entry = |class: Option<u8>, x: &[f64], y: &[f64]| ClassCorrelation {
        class,
        n: x.len(),
        rho: spearman(x, y).ok(),
    };
    let (all_x, all_y): (Vec<f64>, Vec<f64>) = groups
        .iter()
        .flat_map(|(x, y)| x.iter().copied().zip(y.iter().copied()))
        .unzip();
    Ok(CorrelationReport {
        overall: entry(None, &all_x, &all_y),
        per_class: groups
            .iter()
            .enumerate()
            .map(|(c, (x, y))| entry(Some(c as u8), x, y))
            .collect(),
    })
}

/// Gap counts by duration bucket for one dataset and channel.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct GapHistogram {
    pub before: [usize; 3],
    pub after: [usize; 3],
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct MissingnessReport {
    /// Keyed by (dataset_tag, channel).
    pub datasets: BTreeMap<(String, Channel), GapHistogram>,
}

const BUCKET_LABELS: [&str; 3] = ["5-25", "30-115", "120+"];

impl MissingnessReport {
    /// `dataset_tag,channel,bucket,before,after`
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["dataset_tag", "channel", "bucket", "before", "after"])?;
        for ((tag, channel), h) in &self.datasets {
            for (b, label) in BUCKET_LABELS.iter().enumerate() {
                w.write_record([
                    tag.clone(),
                    channel.to_string(),
                    format!("{label} min"),
                    h.before[b].to_string(),
                    h.after[b].to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn summary_table(&self) -> String {
        let mut s = String::from("Gaps by duration, before / after imputation\n");
        let _ = writeln!(
            s,
            "{:<16}{:<12}{:>16}{:>16}{:>16}",
            "dataset", "channel", BUCKET_LABELS[0], BUCKET_LABELS[1], BUCKET_LABELS[2]
        );
        for ((tag, channel), h) in &self.datasets {
            let cell = |b: usize| format!("{} / {}", h.before[b], h.after[b]);
            let _ = writeln!(
                s,
                "{tag:<16}{:<12}{:>16}{:>16}{:>16}",
                channel.as_str(),
                cell(0),
                cell(1),
                cell(2)
            );
        }
        s
    }
}

fn bucket(category: GapCategory) -> usize {
    match category {
        GapCategory::Short => 0,
        GapCategory::Medium => 1,
        GapCategory::Long => 2,
    }
}

/// Per-dataset gap histograms of the same subjects before and after imputation.
pub fn missingness_report(
    before: &[SubjectSeries],
    after: &[SubjectSeries],
    boundaries: &GapBoundaries,
) -> Result<MissingnessReport, AnalysisError> {
    if before.len() != after.len() {
        return Err(AnalysisError::Mismatch(format!(
            "{} vs {} subjects",
            before.len(),
            after.len()
        )));
    }
    let mut report = MissingnessReport::default();
    for (b, a) in before.iter().zip(after) {
        if b.key() != a.key() {
            return Err(AnalysisError::Mismatch(format!(
                "{}/{} vs {}/{}",
                b.dataset_tag, b.subject_id, a.dataset_tag, a.subject_id
            )));
        }
        for channel in b.channels() {
            let h = report.datasets.entry((b.dataset_tag.clone(), channel)).or_default();
            for g in find_gaps(b.channel(channel).unwrap(), boundaries) {
                h.before[bucket(g.category)] += 1;
            }
            for g in find_gaps(a.channel(channel).unwrap_or(&[]), boundaries) {
                h.after[bucket(g.category)] += 1;
            }
        }
    }
    Ok(report)
}
