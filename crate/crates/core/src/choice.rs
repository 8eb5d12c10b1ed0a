//! Stochastic choice data and preference distributions.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{dim_check, RasError, Result};

/// Tolerance for row sums of probability matrices.
pub const ROW_SUM_TOL: f64 = 1e-9;

/// Choice frequencies π(a | t): one row per stopping-time period, one column per item.
#[derive(Debug, Clone, PartialEq)]
pub struct ChoiceDataset {
    pi: DMatrix<f64>,
    period_counts: Option<Vec<u64>>,
    period_labels: Vec<String>,
}

impl ChoiceDataset {
    pub fn new(pi: DMatrix<f64>) -> Result<Self> {
        Self::with_tolerance(pi, ROW_SUM_TOL)
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        Self::new(rows_to_matrix(rows)?)
    }

    /// Accepts rows summing to 1 within `tol`, then rescales each row to sum to 1
    /// exactly. Useful for frequencies printed to a fixed number of decimals.
    pub fn renormalized(rows: &[Vec<f64>], tol: f64) -> Result<Self> {
        let mut pi = rows_to_matrix(rows)?;
        validate_rows(&pi, tol)?;
        for mut row in pi.row_iter_mut() {
            let s = row.sum();
            row /= s;
        }
        Self::new(pi)
    }

    fn with_tolerance(pi: DMatrix<f64>, tol: f64) -> Result<Self> {
        if pi.nrows() == 0 || pi.ncols() < 2 {
            return Err(RasError::Validation(format!(
                "choice data must have at least one period and two items, got {}x{}",
                pi.nrows(),
                pi.ncols()
            )));
        }
        validate_rows(&pi, tol)?;
        let period_labels = (1..=pi.nrows()).map(|t| t.to_string()).collect();
        Ok(Self {
            pi,
            period_counts: None,
            period_labels,
        })
    }

    /// Builds frequencies from per-period choice counts and records the sample sizes.
    pub fn from_counts(counts: &[Vec<u64>]) -> Result<Self> {
        let mut rows = Vec::with_capacity(counts.len());
        let mut totals = Vec::with_capacity(counts.len());
        for (t, row) in counts.iter().enumerate() {
            let total: u64 = row.iter().sum();
            if total == 0 {
                return Err(RasError::Validation(format!(
                    "period {} has no observations",
                    t + 1
                )));
            }
            rows.push(row.iter().map(|&c| c as f64 / total as f64).collect());
            totals.push(total);
        }
        Self::from_rows(&rows)?.with_counts(totals)
    }

    pub fn with_counts(mut self, counts: Vec<u64>) -> Result<Self> {
        dim_check("period counts", self.n_periods(), counts.len())?;
        if let Some(t) = counts.iter().position(|&c| c == 0) {
            return Err(RasError::Validation(format!(
                "period {} has a zero count",
                t + 1
            )));
        }
        self.period_counts = Some(counts);
        Ok(self)
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        dim_check("period labels", self.n_periods(), labels.len())?;
        self.period_labels = labels;
        Ok(self)
    }

    pub fn pi(&self) -> &DMatrix<f64> {
        &self.pi
    }

    pub fn n_periods(&self) -> usize {
        self.pi.nrows()
    }

    pub fn n_items(&self) -> usize {
        self.pi.ncols()
    }

    pub fn get(&self, t: usize, item: usize) -> f64 {
        self.pi[(t, item)]
    }

    pub fn period_counts(&self) -> Option<&[u64]> {
        self.period_counts.as_deref()
    }

    pub fn total_count(&self) -> Option<u64> {
        self.period_counts.as_ref().map(|c| c.iter().sum())
    }

    pub fn period_labels(&self) -> &[String] {
        &self.period_labels
    }

    /// Row-major stacking over (period, item).
    pub fn vec(&self) -> DVector<f64> {
        DVector::from_iterator(
            self.pi.len(),
            self.pi
                .row_iter()
                .flat_map(|r| r.iter().copied().collect::<Vec<_>>()),
        )
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.pi
            .row_iter()
            .map(|r| r.iter().copied().collect())
            .collect()
    }

    /// Items with zero probability in every period.
    pub fn never_chosen(&self, tol: f64) -> Vec<usize> {
        (0..self.n_items())
            .filter(|&j| self.pi.column(j).iter().all(|&v| v <= tol))
            .collect()
    }
}

pub(crate) fn rows_to_matrix(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let Some(first) = rows.first() else {
        return Err(RasError::Validation("no rows".into()));
    };
    let ncols = first.len();
    for (t, r) in rows.iter().enumerate() {
        if r.len() != ncols {
            return Err(RasError::Dimension(format!(
                "row {} has {} entries, expected {ncols}",
                t + 1,
                r.len()
            )));
        }
    }
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

fn validate_rows(pi: &DMatrix<f64>, tol: f64) -> Result<()> {
    for (t, row) in pi.row_iter().enumerate() {
        if let Some(v) = row.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(RasError::Validation(format!(
                "period {} has entry {v} outside [0, 1]",
                t + 1
            )));
        }
        let s = row.sum();
        if (s - 1.0).abs() > tol {
            return Err(RasError::Validation(format!(
                "period {} sums to {s}, not 1",
                t + 1
            )));
        }
    }
    Ok(())
}

/// A distribution over the candidate orderings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct PreferenceDistribution {
    p: Vec<f64>,
}

impl PreferenceDistribution {
    pub fn new(p: Vec<f64>) -> Result<Self> {
        if p.is_empty() {
            return Err(RasError::Validation("empty preference distribution".into()));
        }
        if let Some(v) = p.iter().find(|v| !(**v >= 0.0)) {
            return Err(RasError::Validation(format!("negative or NaN weight {v}")));
        }
        let s: f64 = p.iter().sum();
        if (s - 1.0).abs() > ROW_SUM_TOL {
            return Err(RasError::Validation(format!("weights sum to {s}, not 1")));
        }
        Ok(Self { p })
    }

    pub fn uniform(d: usize) -> Self {
        Self {
            p: vec![1.0 / d as f64; d],
        }
    }

    /// Point mass on ordering `i`.
    pub fn degenerate(d: usize, i: usize) -> Self {
        let mut p = vec![0.0; d];
        p[i] = 1.0;
        Self { p }
    }

    /// Clamps tiny negatives produced by floating point and rescales onto the simplex.
    pub(crate) fn from_solver(mut p: Vec<f64>) -> Self {
        for v in &mut p {
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        let s: f64 = p.iter().sum();
        for v in &mut p {
            *v /= s;
        }
        Self { p }
    }

    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.p
    }

    pub fn to_dvector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.p)
    }
}

impl TryFrom<Vec<f64>> for PreferenceDistribution {
    type Error = RasError;

    fn try_from(p: Vec<f64>) -> Result<Self> {
        Self::new(p)
    }
}

impl From<PreferenceDistribution> for Vec<f64> {
    fn from(p: PreferenceDistribution) -> Self {
        p.p
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rows_must_be_stochastic() {
        assert!(ChoiceDataset::from_rows(&[vec![0.5, 0.5], vec![0.2, 0.8]]).is_ok());
        assert!(ChoiceDataset::from_rows(&[vec![0.5, 0.6]]).is_err());
        assert!(ChoiceDataset::from_rows(&[vec![-0.1, 1.1]]).is_err());
        assert!(ChoiceDataset::from_rows(&[vec![0.5, 0.5], vec![1.0]]).is_err());
    }

    #[test]
    fn renormalized_accepts_rounded_rows() {
        let d = ChoiceDataset::renormalized(&[vec![0.333333, 0.333333, 0.333333]], 1e-5).unwrap();
        assert!((d.pi().row(0).sum() - 1.0).abs() < 1e-15);
        assert!(ChoiceDataset::renormalized(&[vec![0.3, 0.3, 0.3]], 1e-5).is_err());
    }

    #[test]
    fn counts_give_frequencies() {
        let d = ChoiceDataset::from_counts(&[vec![1, 3], vec![2, 2]]).unwrap();
        assert_eq!(d.get(0, 1), 0.75);
        assert_eq!(d.period_counts(), Some(&[4u64, 4][..]));
        assert_eq!(d.total_count(), Some(8));
        assert!(ChoiceDataset::from_counts(&[vec![0, 0]]).is_err());
    }

    #[test]
    fn vec_is_row_major() {
        let d = ChoiceDataset::from_rows(&[vec![0.1, 0.9], vec![0.3, 0.7]]).unwrap();
        assert_eq!(d.vec().as_slice(), &[0.1, 0.9, 0.3, 0.7]);
    }

    #[test]
    fn never_chosen_items() {
        let d = ChoiceDataset::from_rows(&[vec![0.0, 1.0, 0.0], vec![1.0, 0.0, 0.0]]).unwrap();
        assert_eq!(d.never_chosen(0.0), vec![2]);
    }

    #[test]
    fn preference_distribution_validation() {
        assert!(PreferenceDistribution::new(vec![0.5, 0.5]).is_ok());
        assert!(PreferenceDistribution::new(vec![0.5, 0.6]).is_err());
        assert!(PreferenceDistribution::new(vec![1.5, -0.5]).is_err());
        let p = PreferenceDistribution::from_solver(vec![0.7, 0.3 + 1e-14, -1e-16]);
        assert_eq!(p.as_slice()[2], 0.0);
        assert!((p.as_slice().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}
