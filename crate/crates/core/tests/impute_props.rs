mod common;

use proptest::prelude::*;

use cgm_refine::impute::{
    find_gaps, impute_all, impute_channel, GapBoundaries, GapCategory, ImputeMode, ImputePolicy, Stineman,
};
use cgm_refine::Channel;

use common::{channel, series};

proptest! {
    #[test]
    fn present_values_are_untouched(values in channel(1usize..400, 40.0, 400.0), all_linear in any::<bool>()) {
        let policy = ImputePolicy {
            mode: if all_linear { ImputeMode::AllLinear } else { ImputeMode::Stratified },
            ..Default::default()
        };
        let mut filled = values.clone();
        impute_channel(&mut filled, &policy);
        for (a, b) in values.iter().zip(&filled) {
            if a.is_some() {
                prop_assert_eq!(a, b);
            }
        }
    }

    #[test]
    fn missing_counts_reconcile(g in channel(1usize..400, 40.0, 400.0)) {
        let policy = ImputePolicy::default();
        let s = series("i", g, None);
        let gaps = find_gaps(&s.glucose, &policy.gaps);
        let (out, report) = impute_all(s.clone(), &policy);
        let row = &report.rows[0];
        prop_assert_eq!(row.channel, Channel::Glucose);
        prop_assert_eq!(row.missing_before, s.missing_count(Channel::Glucose).unwrap());
        prop_assert_eq!(row.missing_after, out.missing_count(Channel::Glucose).unwrap());
        prop_assert_eq!(row.missing_before - row.missing_after, row.slots_filled());
        for category in GapCategory::ALL {
            let c = row.counts(category);
            prop_assert_eq!(c.gaps_total, gaps.iter().filter(|g| g.category == category).count());
            prop_assert_eq!(c.gaps_total, c.gaps_filled + c.gaps_skipped);
        }
        // long and unbounded gaps are always left alone
        for gap in gaps.iter().filter(|g| g.category == GapCategory::Long || !g.bounded) {
            prop_assert!(out.glucose[gap.start_index..gap.end_index()].iter().all(Option::is_none));
        }
    }

    #[test]
    fn lines_are_reconstructed(
        a in 40.0f64..300.0,
        b in -3.0f64..3.0,
        mask in prop::collection::vec(any::<bool>(), 30..200),
    ) {
        let policy = ImputePolicy { mode: ImputeMode::AllLinear, ..Default::default() };
        let truth: Vec<f64> = (0..mask.len()).map(|k| a + b * k as f64).collect();
        let mut values: Vec<Option<f64>> = truth.iter().zip(&mask).map(|(t, m)| (!m).then_some(*t)).collect();
        impute_channel(&mut values, &policy);
        for (v, t) in values.iter().zip(&truth) {
            if let Some(v) = v {
                prop_assert!((v - t).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn stineman_stays_within_convex_or_concave_monotone_knots(
        mut steps in prop::collection::vec((0.5f64..5.0, 0.01f64..30.0), 2..10),
        rising in any::<bool>(),
        convex in any::<bool>(),
    ) {
        // secants sorted ascending give a convex run, descending a concave one
        steps.sort_by(|a, b| (a.1 / a.0).total_cmp(&(b.1 / b.0)));
        if !convex {
            steps.reverse();
        }
        let (mut x, mut y) = (0.0, 100.0);
        let mut xs = vec![x];
        let mut ys = vec![y];
        for (dx, dy) in steps {
            x += dx;
            y += if rising { dy } else { -dy };
            xs.push(x);
            ys.push(y);
        }
        let curve = Stineman::new(xs.clone(), ys.clone()).unwrap();
        let mut prev = ys[0];
        for k in 0..=400 {
            let q = (xs[0] + (x - xs[0]) * k as f64 / 400.0).min(x);
            let v = curve.eval(q).unwrap();
            let tol = 1e-9;
            let seg = xs.partition_point(|&k| k < q).clamp(1, xs.len() - 1);
            let (lo, hi) = (ys[seg - 1].min(ys[seg]), ys[seg - 1].max(ys[seg]));
            prop_assert!(v >= lo - tol && v <= hi + tol, "value {} outside [{}, {}]", v, lo, hi);
            if rising { prop_assert!(v >= prev - tol) } else { prop_assert!(v <= prev + tol) }
            prev = v;
        }
    }

    #[test]
    fn gaps_cover_exactly_the_missing_slots(values in channel(0usize..300, 40.0, 400.0)) {
        let boundaries = GapBoundaries::default();
        let gaps = find_gaps(&values, &boundaries);
        let mut covered = vec![false; values.len()];
        for g in &gaps {
            prop_assert_eq!(g.category, boundaries.categorize(g.length));
            for c in &mut covered[g.start_index..g.end_index()] {
                *c = true;
            }
            prop_assert!(g.start_index == 0 || values[g.start_index - 1].is_some());
            prop_assert!(g.end_index() == values.len() || values[g.end_index()].is_some());
        }
        for (c, v) in covered.iter().zip(&values) {
            prop_assert_eq!(*c, v.is_none());
        }
    }
}

/// A flat run inside falling data keeps non-zero circle slopes at its ends,
/// so the rational segment dips below the flat level.
#[test]
fn flat_segment_between_falling_ones_is_not_bounded() {
    let xs = vec![0.0, 0.5, 5.25, 5.75];
    let ys = vec![100.0, 97.25, 97.25, 75.875];
    let curve = Stineman::new(xs, ys).unwrap();
    let slopes = curve.slopes().as_slice();
    assert!(slopes[1] < 0.0 && slopes[2] < 0.0);
    assert!(curve.eval(1.0).unwrap() < 97.25);
}

/// Monotone context around a gap with a shallow rise across it: both end
/// tangents are steeper than the gap secant and the fill overshoots.
#[test]
fn s_shaped_monotone_context_overshoots() {
    let xs = vec![7.0, 8.0, 9.0, 26.0, 27.0, 28.0];
    let ys = vec![103.344, 106.813, 110.287, 113.741, 115.416, 116.569];
    let curve = Stineman::new(xs, ys).unwrap();
    let peak = (90..260)
        .map(|k| curve.eval(k as f64 / 10.0).unwrap())
        .fold(f64::MIN, f64::max);
    assert!(peak > 113.741);
}
