//! Stineman piecewise-rational interpolation.
//!
//! Knot slopes come from the circle through each interior knot and its two
//! neighbours; the two end slopes are extrapolated from the adjacent secant
//! and clamped to zero when they disagree with it in sign. Between two knots
//! the curve is the secant line plus a rational correction built from the
//! deviations of the two tangent lines. On convex or concave monotone runs the
//! result stays between the bounding knots; flat or S-shaped neighbourhoods
//! can still overshoot.

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum StinemanError {
    #[error("insufficient knots: {0}, need at least 2")]
    InsufficientKnots(usize),
    #[error("knot abscissae must be strictly increasing")]
    NotIncreasing,
    #[error("knot arrays differ in length ({xs} vs {ys})")]
    LengthMismatch { xs: usize, ys: usize },
    #[error("query {0} lies outside the knot range")]
    OutOfRange(f64),
}

/// Slope estimate at every knot, in value units per abscissa unit.
#[derive(Debug, Clone, PartialEq)]
pub struct SlopeEstimate(pub Vec<f64>);

impl SlopeEstimate {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

fn check(xs: &[f64], ys: &[f64]) -> Result<(), StinemanError> {
    if xs.len() != ys.len() {
        return Err(StinemanError::LengthMismatch {
            xs: xs.len(),
            ys: ys.len(),
        });
    }
    if xs.len() < 2 {
        return Err(StinemanError::InsufficientKnots(xs.len()));
    }
    if xs
        .windows(2)
        .any(|w| w[1].partial_cmp(&w[0]) != Some(std::cmp::Ordering::Greater))
    {
        return Err(StinemanError::NotIncreasing);
    }
    Ok(())
}

/// Tangent slope at `(x1, y1)` of the circle through the three knots; the
/// common secant slope when they are collinear.
pub fn circle_slope(x0: f64, y0: f64, x1: f64, y1: f64, x2: f64, y2: f64) -> f64 {
    let (dx0, dy0) = (x1 - x0, y1 - y0);
    let (dx1, dy1) = (x2 - x1, y2 - y1);
    let sq0 = dx0 * dx0 + dy0 * dy0;
    let sq1 = dx1 * dx1 + dy1 * dy1;
    (dy1 * sq0 + dy0 * sq1) / (dx1 * sq0 + dx0 * sq1)
}

fn extrapolate_end(secant: f64, inner: f64) -> f64 {
    let t = 2.0 * secant - inner;
    if (t > 0.0 && secant <= 0.0) || (t < 0.0 && secant >= 0.0) {
        0.0
    } else {
        t
    }
}

/// Slopes at every knot.
pub fn stineman_slopes(xs: &[f64], ys: &[f64]) -> Result<SlopeEstimate, StinemanError> {
    check(xs, ys)?;
    let n = xs.len();
    let secant = |i: usize| (ys[i + 1] - ys[i]) / (xs[i + 1] - xs[i]);
    if n == 2 {
        let s = secant(0);
        return Ok(SlopeEstimate(vec![s, s]));
    }
    let mut t = vec![0.0; n];
    for i in 1..n - 1 {
        t[i] = circle_slope(xs[i - 1], ys[i - 1], xs[i], ys[i], xs[i + 1], ys[i + 1]);
    }
    t[0] = extrapolate_end(secant(0), t[1]);
    t[n - 1] = extrapolate_end(secant(n - 2), t[n - 2]);
    Ok(SlopeEstimate(t))
}

/// Value at `x` on the segment between knots `(x0, y0)` and `(x1, y1)` with
/// slopes `t0`, `t1`.
pub fn segment_value(x0: f64, y0: f64, t0: f64, x1: f64, y1: f64, t1: f64, x: f64) -> f64 {
    if x == x0 {
        return y0;
    }
    if x == x1 {
        return y1;
    }
    let s = (y1 - y0) / (x1 - x0);
    let base = y0 + s * (x - x0);
    let d0 = y0 + t0 * (x - x0) - base;
    let d1 = y1 + t1 * (x - x1) - base;
    let prod = d0 * d1;
    if prod > 0.0 {
        base + prod / (d0 + d1)
    } else if prod < 0.0 {
        base + prod * (2.0 * x - x0 - x1) / ((d0 - d1) * (x1 - x0))
    } else {
        base
    }
}

/// Knots plus their slopes, ready for evaluation.
#[derive(Debug, Clone)]
pub struct Stineman {
    xs: Vec<f64>,
    ys: Vec<f64>,
    slopes: SlopeEstimate,
}

impl Stineman {
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self, StinemanError> {
        let slopes = stineman_slopes(&xs, &ys)?;
        Ok(Self { xs, ys, slopes })
    }

    pub fn slopes(&self) -> &SlopeEstimate {
        &self.slopes
    }

    /// Interpolated value at `x`, which must lie within the knot range.
    pub fn eval(&self, x: f64) -> Result<f64, StinemanError> {
        let (first, last) = (self.xs[0], self.xs[self.xs.len() - 1]);
        if !(x >= first && x <= last) {
            return Err(StinemanError::OutOfRange(x));
        }
        // index of the segment's right knot
        let j = self.xs.partition_point(|&k| k < x).max(1);
        let i = j - 1;
        let t = &self.slopes.0;
        Ok(segment_value(
            self.xs[i], self.ys[i], t[i], self.xs[j], self.ys[j], t[j], x,
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn collinear_knots_share_the_line_slope() {
        let xs = [0.0, 1.0, 3.0, 4.0, 7.0];
        let ys: Vec<f64> = xs.iter().map(|x| 2.5 * x - 1.0).collect();
        let t = stineman_slopes(&xs, &ys).unwrap();
        for s in t.as_slice() {
            assert!((s - 2.5).abs() < 1e-12);
        }
    }

    #[test]
    fn tent_has_flat_peak() {
        let t = stineman_slopes(&[0.0, 1.0, 2.0], &[0.0, 1.0, 0.0]).unwrap();
        assert_eq!(t.as_slice()[1], 0.0);
        // ends: 2·1 − 0 = 2 and 2·(−1) − 0 = −2, both agree with their secants
        assert_eq!(t.as_slice(), &[2.0, 0.0, -2.0]);
    }

    #[test]
    fn two_knots_use_the_secant() {
        let t = stineman_slopes(&[2.0, 5.0], &[1.0, 7.0]).unwrap();
        assert_eq!(t.as_slice(), &[2.0, 2.0]);
    }

    #[test]
    fn end_slope_is_clamped_on_sign_disagreement() {
        // steep rise then small rise: interior slope large, end extrapolation 2·s − t < 0
        let t = stineman_slopes(&[0.0, 1.0, 2.0], &[0.0, 0.1, 5.0]).unwrap();
        assert!(t.as_slice()[1] > 0.2);
        assert_eq!(t.as_slice()[0], 0.0);
    }

    #[test]
    fn errors() {
        assert_eq!(
            stineman_slopes(&[1.0], &[1.0]),
            Err(StinemanError::InsufficientKnots(1))
        );
        assert_eq!(
            stineman_slopes(&[1.0, 1.0], &[1.0, 2.0]),
            Err(StinemanError::NotIncreasing)
        );
        assert!(matches!(
            stineman_slopes(&[1.0, 2.0], &[1.0]),
            Err(StinemanError::LengthMismatch { .. })
        ));
        let s = Stineman::new(vec![0.0, 1.0], vec![0.0, 1.0]).unwrap();
        assert_eq!(s.eval(1.5), Err(StinemanError::OutOfRange(1.5)));
    }

    #[test]
    fn passes_through_knots() {
        let s = Stineman::new(vec![0.0, 2.0, 3.0, 7.0], vec![1.0, 4.0, -2.0, 6.0]).unwrap();
        for (x, y) in [(0.0, 1.0), (2.0, 4.0), (3.0, -2.0), (7.0, 6.0)] {
            assert_eq!(s.eval(x).unwrap(), y);
        }
    }

    #[test]
    fn mixed_sign_deviations_use_the_second_branch() {
        // t0 above the secant, t1 above too → deviations of opposite sign
        let v = segment_value(0.0, 0.0, 2.0, 2.0, 2.0, 2.0, 0.5);
        let (base, d0, d1) = (0.5, 0.5, -1.5);
        let expected = base + d0 * d1 * (1.0 - 2.0) / ((d0 - d1) * 2.0);
        assert!((v - expected).abs() < 1e-15);
    }
}
