/// Mean and 95% normal-approximation half-width `1.96 * s / sqrt(n)` with the
/// sample (n - 1) standard deviation. The half-width is 0 for `n <= 1`; the
/// mean of an empty sample is NaN.
pub fn ci95(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, 0.0);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    let s = (ss / (n - 1) as f64).sqrt();
    (mean, 1.96 * s / (n as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn constant_sample_has_zero_width() {
        assert_eq!(ci95(&[2.0, 2.0, 2.0, 2.0]), (2.0, 0.0));
    }

    #[test]
    fn two_point_closed_form() {
        let (m, h) = ci95(&[0.0, 1.0]);
        assert_eq!(m, 0.5);
        assert!((h - 1.96 * 0.5f64.sqrt() / 2f64.sqrt()).abs() < 1e-15);
        assert!((h - 0.98).abs() < 1e-12);
    }

    #[test]
    fn degenerate_sizes() {
        assert_eq!(ci95(&[3.5]), (3.5, 0.0));
        let (m, h) = ci95(&[]);
        assert!(m.is_nan());
        assert_eq!(h, 0.0);
    }

    /// Two-pass oracle written independently: Welford's running variance.
    fn welford(values: &[f64]) -> (f64, f64) {
        let (mut mean, mut m2) = (0.0, 0.0);
        for (i, &v) in values.iter().enumerate() {
            let d = v - mean;
            mean += d / (i + 1) as f64;
            m2 += d * (v - mean);
        }
        let n = values.len() as f64;
        (mean, 1.96 * (m2 / (n - 1.0)).sqrt() / n.sqrt())
    }

    proptest! {
        #[test]
        fn agrees_with_welford(values in proptest::collection::vec(-100.0f64..100.0, 2..200)) {
            let (m, h) = ci95(&values);
            let (wm, wh) = welford(&values);
            prop_assert!((m - wm).abs() <= 1e-12 * (1.0 + wm.abs()));
            prop_assert!((h - wh).abs() <= 1e-12 * (1.0 + wh.abs()));
            prop_assert!(h >= 0.0);
        }
    }
}
