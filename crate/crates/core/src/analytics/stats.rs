use serde::Serialize;
use statrs::function::beta::beta_reg;

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TTest {
    pub t: f64,
    pub df: usize,
    pub p_value: f64,
    /// Differences have zero spread but a non-zero mean.
    pub degenerate_variance: bool,
}

/// Two-tailed paired t-test on `a - b`.
pub fn paired_t_test(a: &[f64], b: &[f64]) -> Result<TTest> {
    if a.len() != b.len() {
        return Err(Error::invalid(format!("paired samples differ in length: {} vs {}", a.len(), b.len())));
    }
    let n = a.len();
    if n < 2 {
        return Err(Error::invalid("paired t-test needs at least two pairs"));
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let mean = d.iter().sum::<f64>() / n as f64;
    let var = d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let sd = var.sqrt();
    let df = n - 1;
    if sd == 0.0 {
        return Ok(if mean == 0.0 {
            TTest { t: 0.0, df, p_value: 1.0, degenerate_variance: false }
        } else {
            TTest { t: mean.signum() * f64::INFINITY, df, p_value: 0.0, degenerate_variance: true }
        });
    }
    let t = mean * (n as f64).sqrt() / sd;
    Ok(TTest { t, df, p_value: two_tailed_p(t, df), degenerate_variance: false })
}

/// `I_{df/(df+t^2)}(df/2, 1/2)`.
pub fn two_tailed_p(t: f64, df: usize) -> f64 {
    let df = df as f64;
    let x = df / (df + t * t);
    beta_reg(df / 2.0, 0.5, x).clamp(0.0, 1.0)
}

/// Linear interpolation between closest ranks; `q` in `[0, 100]`.
pub fn percentile(values: &[f64], q: f64) -> Option<f64> {
    if values.is_empty() || !(0.0..=100.0).contains(&q) {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let pos = q / 100.0 * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    Some(sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64))
}

pub fn median(values: &[f64]) -> Option<f64> {
    percentile(values, 50.0)
}

pub fn mean(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

pub fn population_variance(values: &[f64]) -> Option<f64> {
    let m = mean(values)?;
    Some(values.iter().map(|x| (x - m).powi(2)).sum::<f64>() / values.len() as f64)
}

/// Mean squared difference.
pub fn mse(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / a.len().max(1) as f64
}

/// Index of the first maximum.
pub fn argmax(values: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, v) in values.iter().enumerate() {
        if best.is_none_or(|b| *v > values[b]) {
            best = Some(i);
        }
    }
    best
}

/// Index of the first minimum.
pub fn argmin(values: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, v) in values.iter().enumerate() {
        if best.is_none_or(|b| *v < values[b]) {
            best = Some(i);
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn t_test_reference_values() {
        // scipy.stats.ttest_rel
        let r = paired_t_test(&[1.0, 2.0, 3.0, 4.0, 5.0], &[0.0; 5]).unwrap();
        assert!((r.t - 4.242_640_687_119_285).abs() < 1e-12);
        assert_eq!(r.df, 4);
        assert!((r.p_value - 0.013_235_599_563_682_695).abs() < 1e-12);
        let r = paired_t_test(&[0.5, 0.9, 0.7, 0.8, 0.6, 1.0], &[0.1, 0.2, 0.4, 0.3, 0.2, 0.5]).unwrap();
        assert!((r.t - 8.366_600_265_340_756).abs() < 1e-9);
        assert!((r.p_value - 0.000_399_283_376_392_059_2).abs() < 1e-12);
    }

    #[test]
    fn t_test_degenerate_cases() {
        let r = paired_t_test(&[0.3; 4], &[0.3; 4]).unwrap();
        assert_eq!((r.t, r.p_value, r.degenerate_variance), (0.0, 1.0, false));
        let r = paired_t_test(&[1.0; 4], &[0.0; 4]).unwrap();
        assert_eq!(r.p_value, 0.0);
        assert!(r.degenerate_variance);
        assert!(paired_t_test(&[1.0], &[0.0]).is_err());
        assert!(paired_t_test(&[1.0, 2.0], &[0.0]).is_err());
    }

    #[test]
    fn percentile_interpolates() {
        assert_eq!(percentile(&[0.0, 0.36], 75.0), Some(0.27));
        assert_eq!(percentile(&[3.0, 1.0, 2.0], 50.0), Some(2.0));
        assert_eq!(median(&[1.0, 2.0, 3.0, 4.0]), Some(2.5));
        assert_eq!(percentile(&[], 50.0), None);
        assert_eq!(population_variance(&[0.6, -0.6]), Some(0.36));
    }

    #[test]
    fn arg_extrema_prefer_lowest_index() {
        assert_eq!(argmax(&[1.0, 3.0, 3.0]), Some(1));
        assert_eq!(argmin(&[2.0, 1.0, 1.0]), Some(1));
        assert_eq!(argmax(&[]), None);
    }

    proptest! {
        #[test]
        fn swapping_samples_negates_t(pairs in prop::collection::vec((-10.0f64..10.0, -10.0f64..10.0), 2..20)) {
            let (a, b): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            let x = paired_t_test(&a, &b).unwrap();
            let y = paired_t_test(&b, &a).unwrap();
            prop_assert!((x.t + y.t).abs() <= 1e-9 * x.t.abs().max(1.0) || (x.degenerate_variance && y.degenerate_variance));
            prop_assert!((x.p_value - y.p_value).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(&x.p_value));
        }

        #[test]
        fn p_decreases_in_abs_t(df in 1usize..60, t1 in 0.0f64..20.0, dt in 0.0f64..20.0) {
            prop_assert!(two_tailed_p(t1 + dt, df) <= two_tailed_p(t1, df) + 1e-15);
        }

        #[test]
        fn mse_is_symmetric(v in prop::collection::vec((0.0f64..5.0, 0.0f64..5.0), 1..10)) {
            let (a, b): (Vec<f64>, Vec<f64>) = v.into_iter().unzip();
            prop_assert_eq!(mse(&a, &b), mse(&b, &a));
        }
    }
}
