mod common;

use proptest::prelude::*;

use cgm_refine::label::LabeledSeries;
use cgm_refine::window_file::{decode_windows, encode_windows, HEADER_LEN};
use cgm_refine::windows::{build_datasets, ChannelSet, NormScope, Split, Window, WindowConfig};
use cgm_refine::Channel;

use common::series;

/// A subject with a dip every `period` slots, noise, and a few missing runs.
fn subject() -> impl Strategy<Value = (Vec<Option<f64>>, Vec<Option<f64>>)> {
    (
        300usize..700,
        15usize..24,
        prop::collection::vec(0.0f64..20.0, 700),
        prop::collection::vec((0usize..700, 1usize..6), 0..5),
    )
        .prop_map(|(n, period, noise, holes)| {
            let mut g: Vec<Option<f64>> = (0..n)
                .map(|k| {
                    Some(if k % period == period - 1 {
                        55.0 + noise[k] / 2.0
                    } else {
                        110.0 + 3.0 * (k % period) as f64 + noise[k]
                    })
                })
                .collect();
            let mut h: Vec<Option<f64>> = (0..n).map(|k| Some(60.0 + noise[(k * 7) % 700] * 2.0)).collect();
            for (at, len) in holes {
                for i in at..(at + len).min(n) {
                    g[i] = None;
                    h[i] = None;
                }
            }
            (g, h)
        })
}

fn fixture() -> impl Strategy<Value = Vec<LabeledSeries>> {
    prop::collection::vec(subject(), 1..4).prop_map(|subjects| {
        subjects
            .into_iter()
            .enumerate()
            .map(|(i, (g, h))| LabeledSeries::new(series(&format!("s{i}"), g, Some(h)), 70.0))
            .collect()
    })
}

fn config() -> impl Strategy<Value = WindowConfig> {
    (any::<bool>(), any::<bool>()).prop_map(|(train_only, hr)| WindowConfig {
        normalization: if train_only {
            NormScope::TrainOnly
        } else {
            NormScope::Global
        },
        channels: if hr {
            ChannelSet::GlucoseHeartRate
        } else {
            ChannelSet::Glucose
        },
        ..Default::default()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn splits_are_chronological_balanced_and_exact(fixture in fixture(), cfg in config(), seed in any::<u64>()) {
        let d = match build_datasets(&fixture, &cfg, seed) {
            Ok(d) => d,
            Err(e) => return Err(TestCaseError::reject(e.to_string())),
        };
        let labels = cfg.label_set();
        let params = d.manifest.normalization;

        for s in &d.manifest.subjects {
            let order = [s.train, s.val, s.test];
            let filled: Vec<_> = order.iter().filter(|e| e.count > 0).collect();
            for w in filled.windows(2) {
                prop_assert!(w[0].last_start < w[1].first_start);
            }
        }
        for split in Split::ALL {
            let windows = d.get(split);
            let mut counts = vec![0usize; labels.len()];
            for w in windows {
                counts[w.label as usize] += 1;
            }
            prop_assert!(counts.iter().all(|&c| c == counts[0]));

            for w in windows {
                let l = fixture.iter().find(|l| l.series.subject_id == w.subject_id).unwrap();
                prop_assert_eq!(Some(w.label), l.classes[w.start_index + cfg.length - 1]);
                prop_assert_eq!(w.values.len(), cfg.length * cfg.channels.count());
                for (k, row) in w.values.chunks(w.channels).enumerate() {
                    let slot = w.start_index + k;
                    let g = l.series.glucose[slot].unwrap();
                    prop_assert_eq!(row[0], params.glucose.apply(g) as f32);
                    if cfg.channels.includes_heart_rate() {
                        let hr = l.series.channel(Channel::HeartRate).unwrap()[slot];
                        let expected = hr.map_or(0.0, |v| params.heart_rate.unwrap().apply(v)) as f32;
                        prop_assert_eq!(row[1], expected);
                    }
                }
            }

            // each subject's windows in a later split end after those in earlier ones
            for later in Split::ALL.iter().filter(|s| (**s as usize) > split as usize) {
                for w in windows {
                    let after = d.get(*later).iter().filter(|o| o.subject_id == w.subject_id);
                    for o in after {
                        prop_assert!(o.start_index > w.start_index);
                    }
                }
            }
        }

        let again = build_datasets(&fixture, &cfg, seed).unwrap();
        prop_assert_eq!(again.manifest.to_json(), d.manifest.to_json());
        prop_assert_eq!(&again.train, &d.train);
        prop_assert_eq!(&again.test, &d.test);
    }

    #[test]
    fn window_files_round_trip(
        length in 2usize..30,
        channels in 1usize..3,
        labels in prop::collection::vec(0u8..5, 0..40),
        fill in -10.0f32..10.0,
    ) {
        let windows: Vec<Window> = labels
            .iter()
            .enumerate()
            .map(|(i, &label)| Window {
                subject_id: "w".into(),
                start_index: i,
                label,
                length,
                channels,
                values: (0..length * channels).map(|k| fill + (i * 31 + k) as f32 * 0.25).collect(),
            })
            .collect();
        let bytes = encode_windows(&windows, length, channels, 5).unwrap();
        prop_assert_eq!(bytes.len(), HEADER_LEN + windows.len() * (length * channels * 4 + 1));
        let set = decode_windows(&bytes).unwrap();
        prop_assert_eq!(set.len(), windows.len());
        for (i, w) in windows.iter().enumerate() {
            let (values, label) = set.window(i).unwrap();
            prop_assert_eq!(values, w.values.as_slice());
            prop_assert_eq!(label, w.label);
        }
        // any truncation is rejected
        if !bytes.is_empty() {
            prop_assert!(decode_windows(&bytes[..bytes.len() - 1]).is_err());
        }
    }
}
