//! Exact summary statistics over nanosecond samples.

use alloc::vec::Vec;

use crate::Nanos;

#[derive(Debug, Clone, Default)]
pub struct NanosStats {
    samples: Vec<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NanosSummary {
    pub min: Nanos,
    pub max: Nanos,
    /// ns
    pub mean: f64,
    /// Population variance, ns².
    pub variance: f64,
    /// Nearest-rank 99th percentile.
    pub p99: Nanos,
}

impl NanosStats {
    pub fn push(&mut self, v: Nanos) {
        self.samples.push(v.0);
    }

    /// Variance is computed in integers so identical samples give exactly 0.
    pub fn summary(&self) -> Option<NanosSummary> {
        let n = self.samples.len();
        if n == 0 {
            return None;
        }
        let sum: u128 = self.samples.iter().map(|&v| v as u128).sum();
        let n128 = n as i128;
        let scaled_sq: i128 = self
            .samples
            .iter()
            .map(|&v| {
                let d = v as i128 * n128 - sum as i128;
                d * d
            })
            .sum();
        let mut sorted = self.samples.clone();
        sorted.sort_unstable();
        let rank = libm::ceil(0.99 * n as f64) as usize;
        Some(NanosSummary {
            min: Nanos(sorted[0]),
            max: Nanos(sorted[n - 1]),
            mean: sum as f64 / n as f64,
            variance: scaled_sq as f64 / (n as f64 * n as f64 * n as f64),
            p99: Nanos(sorted[rank.max(1) - 1]),
        })
    }
}

impl FromIterator<Nanos> for NanosStats {
    fn from_iter<I: IntoIterator<Item = Nanos>>(iter: I) -> Self {
        NanosStats { samples: iter.into_iter().map(|v| v.0).collect() }
    }
}
