use serde::{Deserialize, Serialize};

/// Location and spread of a sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Distribution {
    pub count: usize,
    pub mean: f64,
    pub median: f64,
    /// Sample standard deviation; zero for a single value.
    pub std_dev: f64,
    /// 95th percentile by linear interpolation between order statistics.
    pub p95: f64,
    pub max: f64,
}

impl Distribution {
    /// `None` for an empty sample.
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len();
        let mean = sorted.iter().sum::<f64>() / n as f64;
        let var = if n > 1 {
            sorted.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64
        } else {
            0.0
        };
        Some(Self {
            count: n,
            mean,
            median: quantile(&sorted, 0.5),
            std_dev: var.sqrt(),
            p95: quantile(&sorted, 0.95),
            max: sorted[n - 1],
        })
    }
}

/// Quantile of sorted data, interpolating linearly at rank `q (n - 1)`.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_hand_computed_values() {
        let d = Distribution::of(&[4.0, 1.0, 3.0, 2.0]).unwrap();
        assert_eq!(d.mean, 2.5);
        assert_eq!(d.median, 2.5);
        assert!((d.std_dev - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert!((d.p95 - 3.85).abs() < 1e-12);
        assert_eq!(d.max, 4.0);
        assert!(Distribution::of(&[]).is_none());
        assert_eq!(Distribution::of(&[7.0]).unwrap().std_dev, 0.0);
    }
}
