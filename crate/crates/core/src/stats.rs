//! Aggregation of per-seed evaluation scores into the mean / std / range
//! form used by the summary tables, with half-even rounding for display.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunStats {
    pub n: usize,
    pub mean: f64,
    /// Sample standard deviation (n - 1 denominator); zero for a single run.
    pub std: f64,
    pub min: f64,
    pub max: f64,
}

/// Aggregates one score per seed. Returns None for an empty slice.
pub fn aggregate_seeds(values: &[f64]) -> Option<RunStats> {
    if values.is_empty() {
        return None;
    }
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let std = if n > 1 {
        let ss = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>();
        (ss / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Some(RunStats { n, mean, std, min, max })
}

/// Rounds to `decimals` places with ties going to the even digit.
pub fn round_half_even(x: f64, decimals: u32) -> f64 {
    let scale = 10f64.powi(decimals as i32);
    (x * scale).round_ties_even() / scale
}

/// Fixed-point display of a half-even-rounded value, e.g. `0.472`.
pub fn format_rounded(x: f64, decimals: u32) -> String {
    format!("{:.*}", decimals as usize, round_half_even(x, decimals))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_triples_aggregate_to_the_reported_rows() {
        // Three-seed accuracy triples and the table rows they produce.
        let rows: [(&[f64], &str, &str, &str, &str); 3] = [
            (&[0.446, 0.486, 0.484], "0.472", "0.023", "0.446", "0.486"),
            (&[0.490, 0.490, 0.494], "0.491", "0.002", "0.490", "0.494"),
            (&[0.460, 0.414, 0.446], "0.440", "0.024", "0.414", "0.460"),
        ];
        for (values, mean, std, min, max) in rows {
            let stats = aggregate_seeds(values).unwrap();
            assert_eq!(format_rounded(stats.mean, 3), mean, "{values:?}");
            assert_eq!(format_rounded(stats.std, 3), std, "{values:?}");
            assert_eq!(format_rounded(stats.min, 3), min, "{values:?}");
            assert_eq!(format_rounded(stats.max, 3), max, "{values:?}");
            assert_eq!(stats.n, 3);
        }
    }

    #[test]
    fn single_run_has_zero_std_and_empty_input_none() {
        let stats = aggregate_seeds(&[0.5]).unwrap();
        assert_eq!(stats.std, 0.0);
        assert_eq!(stats.mean, 0.5);
        assert_eq!((stats.min, stats.max), (0.5, 0.5));
        assert!(aggregate_seeds(&[]).is_none());
    }

    #[test]
    fn mean_sits_inside_the_range() {
        use rand::Rng;
        let mut rng = crate::seeds::rng(41, "stats-test", 0);
        for _ in 0..200 {
            let n = rng.gen_range(1..12);
            let values: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let s = aggregate_seeds(&values).unwrap();
            assert!(s.min <= s.mean + 1e-12 && s.mean <= s.max + 1e-12);
            assert!(s.std >= 0.0);
            assert!(s.std <= (s.max - s.min) + 1e-12);
        }
    }

    #[test]
    fn ties_round_to_the_even_neighbour() {
        assert_eq!(round_half_even(2.5, 0), 2.0);
        assert_eq!(round_half_even(3.5, 0), 4.0);
        assert_eq!(round_half_even(-2.5, 0), -2.0);
        // 0.125 is exact in binary, so the tie at the second decimal is real.
        assert_eq!(round_half_even(0.125, 2), 0.12);
        assert_eq!(round_half_even(0.375, 2), 0.38);
        assert_eq!(format_rounded(0.125, 2), "0.12");
    }
}
