//! Grouping raw stopping times into periods: zero-second answers form period 1, positive
//! times are split by exact one-dimensional k-means.

use serde::{Deserialize, Serialize};

use crate::choice::ChoiceDataset;
use crate::error::{RasError, Result};
use crate::menu::Menu;

/// One respondent's answer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawObservation {
    pub respondent_id: String,
    pub stopping_time: f64,
    pub choice: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeClustering {
    /// Period (0-based) of each observation, in input order.
    pub assignments: Vec<usize>,
    /// Mean stopping time per period.
    pub centroids: Vec<f64>,
    /// Smallest and largest time in each period.
    pub ranges: Vec<(f64, f64)>,
    pub period_counts: Vec<u64>,
    /// Whether period 1 holds the zero-time answers.
    pub zero_period: bool,
}

/// Exact 1-D k-means on `xs` into `k` contiguous groups. Returns the group of each value.
///
/// Equal values always share a group. Ties between equally good splits go to the
/// earliest split point.
pub fn kmeans_1d(xs: &[f64], k: usize) -> Result<Vec<usize>> {
    if xs.iter().any(|x| !x.is_finite()) {
        return Err(RasError::Validation("times must be finite".into()));
    }
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    // distinct values with multiplicities
    let mut values: Vec<f64> = Vec::new();
    let mut weights: Vec<f64> = Vec::new();
    for &i in &order {
        if values.last() == Some(&xs[i]) {
            *weights.last_mut().expect("non-empty") += 1.0;
        } else {
            values.push(xs[i]);
            weights.push(1.0);
        }
    }
    let m = values.len();
    if k == 0 || k > m {
        return Err(RasError::Validation(format!(
            "cannot form {k} groups from {m} distinct times"
        )));
    }
    let mut w = vec![0.0; m + 1];
    let mut s = vec![0.0; m + 1];
    let mut s2 = vec![0.0; m + 1];
    for j in 0..m {
        w[j + 1] = w[j] + weights[j];
        s[j + 1] = s[j] + weights[j] * values[j];
        s2[j + 1] = s2[j] + weights[j] * values[j] * values[j];
    }
    // within-group sum of squares of distinct values i..j
    let cost = |i: usize, j: usize| {
        let (ww, ss) = (w[j] - w[i], s[j] - s[i]);
        (s2[j] - s2[i] - ss * ss / ww).max(0.0)
    };
    let mut best = vec![vec![f64::INFINITY; m + 1]; k + 1];
    let mut split = vec![vec![0usize; m + 1]; k + 1];
    best[0][0] = 0.0;
    for c in 1..=k {
        for j in c..=m {
            for i in c - 1..j {
                let v = best[c - 1][i] + cost(i, j);
                if v < best[c][j] {
                    best[c][j] = v;
                    split[c][j] = i;
                }
            }
        }
    }
    let mut group_of_value = vec![0usize; m];
    let mut j = m;
    for c in (1..=k).rev() {
        let i = split[c][j];
        group_of_value[i..j].fill(c - 1);
        j = i;
    }
    let mut out = vec![0usize; xs.len()];
    let mut v = 0;
    for &i in &order {
        while values[v] != xs[i] {
            v += 1;
        }
        out[i] = group_of_value[v];
    }
    Ok(out)
}

/// Splits observations into `k` periods and tabulates choice frequencies per period.
///
/// Period 1 is exactly the zero-second observations and the positive times form the
/// other `k − 1` periods. If nothing was answered at zero seconds this is an error,
/// unless `allow_empty_first` is set, in which case all `k` periods come from k-means.
/// If every answer took zero seconds a single period is returned.
pub fn cluster_times(
    observations: &[RawObservation],
    menu: &Menu,
    k: usize,
    allow_empty_first: bool,
) -> Result<(TimeClustering, ChoiceDataset)> {
    if k < 2 {
        return Err(RasError::Config(format!(
            "at least 2 periods are required, got {k}"
        )));
    }
    if observations.is_empty() {
        return Err(RasError::Validation("no observations".into()));
    }
    let choices = observations
        .iter()
        .map(|o| {
            if !(o.stopping_time.is_finite() && o.stopping_time >= 0.0) {
                return Err(RasError::Validation(format!(
                    "respondent {}: stopping time {} is not a finite non-negative number",
                    o.respondent_id, o.stopping_time
                )));
            }
            menu.index_of(&o.choice)
        })
        .collect::<Result<Vec<_>>>()?;

    let positive: Vec<usize> = (0..observations.len())
        .filter(|&i| observations[i].stopping_time > 0.0)
        .collect();
    let n_zero = observations.len() - positive.len();
    let zero_period = n_zero > 0;
    if !zero_period && !allow_empty_first {
        return Err(RasError::Validation(
            "no zero-second observations for the first period".into(),
        ));
    }
    let mut assignments = vec![0usize; observations.len()];
    let n_periods = if positive.is_empty() {
        1
    } else {
        let groups = if zero_period { k - 1 } else { k };
        let times: Vec<f64> = positive
            .iter()
            .map(|&i| observations[i].stopping_time)
            .collect();
        let labels = kmeans_1d(&times, groups)?;
        let offset = usize::from(zero_period);
        for (&i, g) in positive.iter().zip(labels) {
            assignments[i] = g + offset;
        }
        groups + offset
    };

    let mut counts = vec![vec![0u64; menu.len()]; n_periods];
    let mut sums = vec![0.0; n_periods];
    let mut ranges = vec![(f64::INFINITY, f64::NEG_INFINITY); n_periods];
    for (i, &p) in assignments.iter().enumerate() {
        let x = observations[i].stopping_time;
        counts[p][choices[i]] += 1;
        sums[p] += x;
        ranges[p] = (ranges[p].0.min(x), ranges[p].1.max(x));
    }
    let period_counts: Vec<u64> = counts.iter().map(|r| r.iter().sum()).collect();
    let centroids = sums
        .iter()
        .zip(&period_counts)
        .map(|(s, &c)| s / c as f64)
        .collect();
    let labels = (1..=n_periods).map(|t| format!("t{t}")).collect();
    let data = ChoiceDataset::from_counts(&counts)?.with_labels(labels)?;
    Ok((
        TimeClustering {
            assignments,
            centroids,
            ranges,
            period_counts,
            zero_period,
        },
        data,
    ))
}
