//! Deterministic synthetic CGM + heart-rate input used as a test fixture and
//! for demos. The output exercises every pipeline path: jittered and
//! oversampled timestamps, duplicate rows, malformed rows, zeros, hard-bound
//! and statistical outliers, gaps of every duration class, and recurring
//! hypoglycemic dips.

use std::f64::consts::TAU;
use std::fmt::Write as _;

use chrono::{Duration, NaiveDate, NaiveDateTime};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::ingest::TIMESTAMP_FORMAT;
use crate::series::STEP_MINUTES;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixtureSpec {
    pub subjects: usize,
    pub days: usize,
    pub seed: u64,
}

impl Default for FixtureSpec {
    fn default() -> Self {
        Self {
            subjects: 5,
            days: 7,
            seed: 20240101,
        }
    }
}

fn start() -> NaiveDateTime {
    NaiveDate::from_ymd_opt(2024, 1, 1)
        .unwrap()
        .and_hms_opt(0, 0, 0)
        .unwrap()
}

/// Header of the generated CSV.
pub const HEADER: &str = "timestamp,subject_id,dataset,glucose,heart_rate";

/// Glucose and heart-rate traces for one subject, before corruption.
fn clean_traces(rng: &mut ChaCha8Rng, slots: usize) -> (Vec<f64>, Vec<f64>) {
    let day = (24 * 60 / STEP_MINUTES) as f64;
    let (p1, p2) = (rng.gen_range(0.0..TAU), rng.gen_range(0.0..TAU));
    let level = rng.gen_range(135.0..165.0);
    let mut drift = 0.0;
    let mut glucose: Vec<f64> = (0..slots)
        .map(|k| {
            drift = 0.95 * drift + rng.gen_range(-4.0..4.0);
            let k = k as f64;
            level + 35.0 * (TAU * k / day + p1).sin() + 20.0 * (TAU * k / (day / 3.0) + p2).sin() + drift
        })
        .collect();

    // hypoglycemic dips every 9–14 hours
    let mut center = rng.gen_range(40..120usize);
    while center < slots {
        let width = rng.gen_range(8.0..16.0);
        let floor = rng.gen_range(48.0..64.0);
        let depth = (glucose[center] - floor).max(0.0);
        for (k, g) in glucose.iter_mut().enumerate() {
            let z = (k as f64 - center as f64) / width;
            *g -= depth * (-z * z).exp();
        }
        center += rng.gen_range(108..168usize);
    }

    let hr_level = rng.gen_range(62.0..80.0);
    let heart_rate = glucose
        .iter()
        .enumerate()
        .map(|(k, g)| {
            let k = k as f64;
            hr_level + 10.0 * (TAU * k / day + p1 + 0.7).sin() + 0.08 * (g - 120.0) + rng.gen_range(-5.0..5.0)
        })
        .collect();
    (glucose.iter().map(|g| g.clamp(42.0, 420.0)).collect(), heart_rate)
}

/// Generates the fixture CSV text.
pub fn generate_csv(spec: &FixtureSpec) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let slots = spec.days * (24 * 60 / STEP_MINUTES as usize);
    let mut out = String::new();
    out.push_str(HEADER);
    out.push('\n');

    for subject in 0..spec.subjects {
        let id = format!("syn-{:02}", subject + 1);
        let dataset = if subject < 3 { "SYNTH-A" } else { "SYNTH-B" };
        let (mut glucose, mut heart_rate) = clean_traces(&mut rng, slots);
        let mut g_cell: Vec<Option<String>> = glucose.iter_mut().map(|g| Some(format!("{:.0}", g))).collect();
        let mut hr_cell: Vec<Option<String>> = heart_rate.iter_mut().map(|h| Some(format!("{:.0}", h))).collect();
        let mut row_absent = vec![false; slots];

        let pick = |rng: &mut ChaCha8Rng| rng.gen_range(30..slots - 30);
        for _ in 0..6 {
            let k = pick(&mut rng);
            g_cell[k] = Some("0".into());
        }
        for _ in 0..8 {
            let k = pick(&mut rng);
            hr_cell[k] = Some("0".into());
        }
        for v in ["600", "520", "25", "35", "380", "395"] {
            let k = pick(&mut rng);
            g_cell[k] = Some(v.into());
        }
        for v in ["240", "205", "18", "25", "150", "165"] {
            let k = pick(&mut rng);
            hr_cell[k] = Some(v.into());
        }
        // gaps: (count, min length, max length)
        for (count, lo, hi) in [(10, 1, 5), (4, 6, 23), (1, 30, 60)] {
            for _ in 0..count {
                let len = rng.gen_range(lo..=hi);
                let k = rng.gen_range(30..slots - 30 - len);
                let absent = rng.gen_bool(0.5);
                for j in k..k + len {
                    if absent {
                        row_absent[j] = true;
                    } else {
                        g_cell[j] = None;
                    }
                }
            }
        }
        // heart-rate only dropout
        let k = pick(&mut rng);
        for slot in hr_cell.iter_mut().skip(k).take(rng.gen_range(3..40)) {
            *slot = None;
        }

        let cell = |v: &Option<String>| v.clone().unwrap_or_default();
        for k in 0..slots {
            if row_absent[k] {
                continue;
            }
            let jitter = rng.gen_range(-40..=40);
            let ts = start() + Duration::minutes(STEP_MINUTES * k as i64) + Duration::seconds(jitter);
            let _ = writeln!(
                out,
                "{},{id},{dataset},{},{}",
                ts.format(TIMESTAMP_FORMAT),
                cell(&g_cell[k]),
                cell(&hr_cell[k])
            );
            if rng.gen_bool(0.01) {
                // oversampled reading between slots, dropped by alignment
                let extra = ts + Duration::seconds(rng.gen_range(160..=200));
                let _ = writeln!(
                    out,
                    "{},{id},{dataset},{:.0},",
                    extra.format(TIMESTAMP_FORMAT),
                    glucose[k] + 30.0
                );
            }
            if rng.gen_bool(0.003) {
                let _ = writeln!(
                    out,
                    "{},{id},{dataset},{:.0},",
                    ts.format(TIMESTAMP_FORMAT),
                    glucose[k] - 20.0
                );
            }
        }
        let _ = writeln!(out, "not-a-time,{id},{dataset},120,70");
        let _ = writeln!(out, "{},{id},{dataset},12O,70", start().format(TIMESTAMP_FORMAT));
    }
    out
}
