//! Per-cell rate statistics: means, spreads and empirical CDFs.

use crate::algorithms::AlgorithmKind;

use super::sweep::TrialRecord;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CdfPoint {
    pub rate: f64,
    /// Fraction of samples at or below `rate`.
    pub fraction: f64,
}

/// Empirical CDF: the samples in ascending order with fractions `i/N`.
/// Non-finite samples are dropped.
pub fn compute_cdf(rates: &[f64]) -> Vec<CdfPoint> {
    let mut sorted: Vec<f64> = rates.iter().copied().filter(|r| r.is_finite()).collect();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    sorted.into_iter().enumerate().map(|(i, rate)| CdfPoint { rate, fraction: (i + 1) as f64 / n }).collect()
}

pub fn mean(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

/// Sample standard deviation (zero for a single sample).
pub fn std_dev(values: &[f64]) -> Option<f64> {
    let m = mean(values)?;
    if values.len() < 2 {
        return Some(0.0);
    }
    Some((values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (values.len() - 1) as f64).sqrt())
}

/// Statistics of one (sweep value, algorithm) group. Failed trials are counted
/// but excluded from the moments.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub value: f64,
    pub algorithm: AlgorithmKind,
    pub completed: usize,
    pub failed: usize,
    pub mean_rate: f64,
    pub std_rate: f64,
    pub std_error: f64,
}

impl SummaryRow {
    pub fn all_failed(&self) -> bool {
        self.completed == 0
    }
}

/// Records grouped by (value, algorithm) in order of first appearance.
pub fn group(records: &[TrialRecord]) -> Vec<((f64, AlgorithmKind), Vec<&TrialRecord>)> {
    let mut groups: Vec<((f64, AlgorithmKind), Vec<&TrialRecord>)> = Vec::new();
    for r in records {
        match groups.iter_mut().find(|((v, a), _)| v.to_bits() == r.value.to_bits() && *a == r.algorithm) {
            Some((_, members)) => members.push(r),
            None => groups.push(((r.value, r.algorithm), vec![r])),
        }
    }
    groups
}

fn completed_rates(members: &[&TrialRecord]) -> Vec<f64> {
    members.iter().filter(|r| !r.failed()).map(|r| r.per_cell_sum_rate).collect()
}

pub fn summarize(records: &[TrialRecord]) -> Vec<SummaryRow> {
    group(records)
        .into_iter()
        .map(|((value, algorithm), members)| {
            let rates = completed_rates(&members);
            let std_rate = std_dev(&rates).unwrap_or(f64::NAN);
            SummaryRow {
                value,
                algorithm,
                completed: rates.len(),
                failed: members.len() - rates.len(),
                mean_rate: mean(&rates).unwrap_or(f64::NAN),
                std_rate,
                std_error: std_rate / (rates.len() as f64).sqrt(),
            }
        })
        .collect()
}

/// CDF of one (value, algorithm) group with its mean.
#[derive(Debug, Clone, PartialEq)]
pub struct CdfSeries {
    pub value: f64,
    pub algorithm: AlgorithmKind,
    pub points: Vec<CdfPoint>,
    pub mean: f64,
}

pub fn cdf_series(records: &[TrialRecord]) -> Vec<CdfSeries> {
    group(records)
        .into_iter()
        .map(|((value, algorithm), members)| {
            let rates = completed_rates(&members);
            CdfSeries { value, algorithm, points: compute_cdf(&rates), mean: mean(&rates).unwrap_or(f64::NAN) }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cdf_examples() {
        let pts = compute_cdf(&[3.0, 1.0, 2.0]);
        let pairs: Vec<(f64, f64)> = pts.iter().map(|p| (p.rate, p.fraction)).collect();
        assert_eq!(pairs, vec![(1.0, 1.0 / 3.0), (2.0, 2.0 / 3.0), (3.0, 1.0)]);
        assert_eq!(compute_cdf(&[4.5]), vec![CdfPoint { rate: 4.5, fraction: 1.0 }]);
        assert_eq!(mean(&[1.0, 2.0, 3.0]), Some(2.0));
        assert_eq!(std_dev(&[1.0, 2.0, 3.0]), Some(1.0));
        assert_eq!(mean(&[]), None);
    }
}
