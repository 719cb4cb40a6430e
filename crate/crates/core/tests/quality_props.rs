mod common;

use proptest::prelude::*;

use cgm_refine::quality::{clean, iqr_fences, PhysiologicalBounds};
use cgm_refine::Channel;

use common::{channel, series};

fn raw_channel(n: usize, lo: f64, hi: f64) -> impl Strategy<Value = Vec<Option<f64>>> {
    // widen the range past the hard bounds and mix in zeros
    channel(n, lo, hi).prop_map(|v| {
        v.into_iter()
            .enumerate()
            .map(|(i, x)| if i % 17 == 3 { Some(0.0) } else { x })
            .collect()
    })
}

proptest! {
    #[test]
    fn cleaning_only_removes(
        (g, h) in (1usize..300).prop_flat_map(|n| (raw_channel(n, 0.0, 650.0), raw_channel(n, 0.0, 260.0)))
    ) {
        let bounds = PhysiologicalBounds::default();
        let raw = series("q", g, Some(h));
        let (out, report) = clean(raw.clone(), &bounds);
        let mut removed = 0;
        for channel in Channel::ALL {
            let (before, after) = (raw.channel(channel).unwrap(), out.channel(channel).unwrap());
            prop_assert_eq!(before.len(), after.len());
            for (b, a) in before.iter().zip(after) {
                if let Some(a) = a {
                    prop_assert_eq!(Some(*a), *b);
                    let (min, max) = bounds.range(channel);
                    prop_assert!(*a != 0.0 && *a >= min && *a <= max);
                } else if b.is_some() {
                    removed += 1;
                }
            }
        }
        prop_assert_eq!(report.total_masked(), removed);
        for row in &report.rows {
            if let Some(f) = row.fences {
                for v in out.channel(row.channel).unwrap().iter().flatten() {
                    prop_assert!(f.contains(*v));
                }
            }
        }
    }

    #[test]
    fn second_pass_is_stable_where_it_should_be(
        g in channel(4usize..300, 20.0, 560.0)
    ) {
        let bounds = PhysiologicalBounds::default();
        let (once, first) = clean(series("q", g, None), &bounds);
        let (_, second) = clean(once.clone(), &bounds);
        prop_assert_eq!(second.rows[0].zeros_masked, 0);
        prop_assert_eq!(second.rows[0].bounds_masked, 0);
        // refitting can tighten the fences, but the first-pass fences admit every survivor
        if let Some(f) = first.rows[0].fences {
            prop_assert!(once.glucose.iter().flatten().all(|v| f.contains(*v)));
        }
    }

    #[test]
    fn fences_are_ordered(values in prop::collection::vec(-1e6f64..1e6, 4..400)) {
        let f = iqr_fences(&values).unwrap();
        prop_assert!(f.lower <= f.q1 && f.q1 <= f.q3 && f.q3 <= f.upper);
        prop_assert!((f.upper - f.q3 - 1.5 * f.iqr()).abs() <= 1e-9 * f.iqr().max(1.0));
    }
}
