//! Shared statistics: Pearson correlation and error metrics.
//!
//! Pearson uses the sample covariance, whose normalization cancels. Error
//! metrics average over `n`.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("series lengths differ ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("series too short: need at least {needed} values, got {got}")]
    TooShort { needed: usize, got: usize },
    #[error("non-finite value at index {0}")]
    NonFinite(usize),
    #[error("zero variance: {0} series is constant")]
    ZeroVariance(&'static str),
}

/// Two equal-length, finite series.
#[derive(Debug, Clone, Copy)]
pub struct PairedSeries<'a> {
    x: &'a [f64],
    y: &'a [f64],
}

impl<'a> PairedSeries<'a> {
    pub fn new(x: &'a [f64], y: &'a [f64]) -> Result<Self, MetricsError> {
        if x.len() != y.len() {
            return Err(MetricsError::LengthMismatch(x.len(), y.len()));
        }
        if x.is_empty() {
            return Err(MetricsError::TooShort { needed: 1, got: 0 });
        }
        if let Some(i) = x
            .iter()
            .zip(y)
            .position(|(a, b)| !a.is_finite() || !b.is_finite())
        {
            return Err(MetricsError::NonFinite(i));
        }
        Ok(Self { x, y })
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn x(&self) -> &'a [f64] {
        self.x
    }

    pub fn y(&self) -> &'a [f64] {
        self.y
    }

    /// Sample Pearson correlation, clamped to `[-1, 1]`.
    pub fn pearson(&self) -> Result<f64, MetricsError> {
        let n = self.len();
        if n < 2 {
            return Err(MetricsError::TooShort { needed: 2, got: n });
        }
        let mean_x = mean(self.x);
        let mean_y = mean(self.y);
        let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
        for (a, b) in self.x.iter().zip(self.y) {
            let dx = a - mean_x;
            let dy = b - mean_y;
            sxy += dx * dy;
            sxx += dx * dx;
            syy += dy * dy;
        }
        if sxx == 0.0 {
            return Err(MetricsError::ZeroVariance("x"));
        }
        if syy == 0.0 {
            return Err(MetricsError::ZeroVariance("y"));
        }
        Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
    }

    pub fn mse(&self) -> f64 {
        self.x
            .iter()
            .zip(self.y)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            / self.len() as f64
    }

    pub fn rmse(&self) -> f64 {
        self.mse().sqrt()
    }

    pub fn mae(&self) -> f64 {
        self.x
            .iter()
            .zip(self.y)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
            / self.len() as f64
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64, MetricsError> {
    PairedSeries::new(x, y)?.pearson()
}

pub fn mse(x: &[f64], y: &[f64]) -> Result<f64, MetricsError> {
    Ok(PairedSeries::new(x, y)?.mse())
}

pub fn rmse(x: &[f64], y: &[f64]) -> Result<f64, MetricsError> {
    Ok(PairedSeries::new(x, y)?.rmse())
}

pub fn mae(x: &[f64], y: &[f64]) -> Result<f64, MetricsError> {
    Ok(PairedSeries::new(x, y)?.mae())
}

/// Arithmetic mean and sample standard deviation (0 for a single value).
pub fn mean_and_std(values: &[f64]) -> Option<(f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let m = mean(values);
    if values.len() == 1 {
        return Some((m, 0.0));
    }
    let var = values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (values.len() - 1) as f64;
    Some((m, var.sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn perfect_correlations() {
        assert_eq!(pearson(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]).unwrap(), 1.0);
        assert_eq!(pearson(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap(), -1.0);
    }

    #[test]
    fn pearson_matches_hand_derivation() {
        // x deviations (-1,0,1), y = (1,2,4) deviations (-4/3,-1/3,5/3):
        // sxy = 3, sxx = 2, syy = 42/9, r = 3 / sqrt(2 * 42/9) = 9 / (2 sqrt 21).
        let oracle = 9.0 / (2.0 * 21f64.sqrt());
        assert_abs_diff_eq!(oracle, 0.98198, epsilon = 1e-5);
        let r = pearson(&[1.0, 2.0, 3.0], &[1.0, 2.0, 4.0]).unwrap();
        assert_abs_diff_eq!(r, oracle, epsilon = 1e-12);
    }

    #[test]
    fn constant_series_is_an_error() {
        assert_eq!(
            pearson(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]),
            Err(MetricsError::ZeroVariance("x"))
        );
        assert_eq!(
            pearson(&[1.0, 2.0, 3.0], &[0.5, 0.5, 0.5]),
            Err(MetricsError::ZeroVariance("y"))
        );
    }

    #[test]
    fn invalid_series() {
        assert!(matches!(
            PairedSeries::new(&[1.0], &[1.0, 2.0]),
            Err(MetricsError::LengthMismatch(1, 2))
        ));
        assert!(matches!(
            PairedSeries::new(&[1.0, f64::NAN], &[1.0, 2.0]),
            Err(MetricsError::NonFinite(1))
        ));
        assert!(matches!(
            pearson(&[1.0], &[1.0]),
            Err(MetricsError::TooShort { needed: 2, got: 1 })
        ));
    }

    #[test]
    fn error_metrics() {
        let z = [0.0, 0.0];
        assert_eq!(mse(&z, &z).unwrap(), 0.0);
        assert_eq!(rmse(&z, &z).unwrap(), 0.0);
        assert_eq!(mae(&z, &z).unwrap(), 0.0);

        let s = PairedSeries::new(&z, &[1.0, 1.0]).unwrap();
        assert_eq!((s.mse(), s.rmse(), s.mae()), (1.0, 1.0, 1.0));

        // (1 + 9) / 2 = 5; mean(|1|, |3|) = 2.
        let s = PairedSeries::new(&z, &[1.0, 3.0]).unwrap();
        assert_eq!(s.mse(), 5.0);
        assert_abs_diff_eq!(s.rmse(), 2.23607, epsilon = 1e-5);
        assert_eq!(s.mae(), 2.0);
    }

    #[test]
    fn mean_std() {
        assert_eq!(mean_and_std(&[]), None);
        assert_eq!(mean_and_std(&[3.0]), Some((3.0, 0.0)));
        let (m, s) = mean_and_std(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(m, 2.0);
        assert_abs_diff_eq!(s, 1.0, epsilon = 1e-15);
    }

    fn series() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (3usize..40).prop_flat_map(|n| {
            (
                prop::collection::vec(-100.0f64..100.0, n),
                prop::collection::vec(-100.0f64..100.0, n),
            )
        })
    }

    proptest! {
        #[test]
        fn pearson_affine_invariance((x, y) in series(), a in 0.1f64..10.0, b in -5.0f64..5.0) {
            if let Ok(r) = pearson(&x, &y) {
                let scaled: Vec<f64> = x.iter().map(|v| a * v + b).collect();
                let flipped: Vec<f64> = x.iter().map(|v| -a * v + b).collect();
                prop_assert!((pearson(&scaled, &y).unwrap() - r).abs() < 1e-9);
                prop_assert!((pearson(&flipped, &y).unwrap() + r).abs() < 1e-9);
                prop_assert!((-1.0..=1.0).contains(&r));
            }
        }

        #[test]
        fn rmse_mae_relations((x, y) in series()) {
            let s = PairedSeries::new(&x, &y).unwrap();
            let (mse, rmse, mae) = (s.mse(), s.rmse(), s.mae());
            prop_assert!(((rmse * rmse) - mse).abs() <= 1e-12 * mse.max(f64::MIN_POSITIVE));
            prop_assert!(mae <= rmse + 1e-12);
        }
    }
}
