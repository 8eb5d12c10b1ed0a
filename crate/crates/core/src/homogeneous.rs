//! Revealed preference under a single common ordering: tail-sum rejection of candidate
//! orderings and the prefix-pruned survivor search.

use serde::Serialize;

use crate::choice::ChoiceDataset;
use crate::error::{dim_check, RasError, Result};
use crate::menu::{OrderingSet, PreferenceOrdering};

/// Default tolerance for the strict inequality in the rejection test.
pub const REJECTION_TOL: f64 = 1e-9;

/// Largest menu for which survivors are enumerated.
pub const MAX_SEARCH_ITEMS: usize = 10;

/// Σ π(x | t) over the items ranked at or below `y`.
pub fn lower_contour_sum(
    pi: &ChoiceDataset,
    ordering: &PreferenceOrdering,
    y: usize,
    t: usize,
) -> f64 {
    let cut = ordering.position(y);
    ordering.rank()[cut..].iter().map(|&x| pi.get(t, x)).sum()
}

/// Evidence that a tail set gained choice probability over time.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailWitness {
    /// Zero-based rank position where the tail starts.
    pub rank: usize,
    pub tail: Vec<usize>,
    pub t: usize,
    pub t_later: usize,
    pub sum_t: f64,
    pub sum_t_later: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum RejectionOutcome {
    Survives,
    Rejected(TailWitness),
}

impl RejectionOutcome {
    pub fn survives(&self) -> bool {
        matches!(self, RejectionOutcome::Survives)
    }
}

fn tail_sums(pi: &ChoiceDataset, tail: &[usize]) -> Vec<f64> {
    (0..pi.n_periods())
        .map(|t| tail.iter().map(|&x| pi.get(t, x)).sum())
        .collect()
}

/// First (t, t′) with t < t′ where the tail sum rises by more than `tol`.
fn rising_pair(sums: &[f64], tol: f64) -> Option<(usize, usize)> {
    for t in 0..sums.len() {
        for t_later in t + 1..sums.len() {
            if sums[t_later] > sums[t] + tol {
                return Some((t, t_later));
            }
        }
    }
    None
}

fn witness(pi: &ChoiceDataset, rank: usize, tail: &[usize], tol: f64) -> Option<TailWitness> {
    let sums = tail_sums(pi, tail);
    rising_pair(&sums, tol).map(|(t, t_later)| TailWitness {
        rank,
        tail: tail.to_vec(),
        t,
        t_later,
        sum_t: sums[t],
        sum_t_later: sums[t_later],
    })
}

/// Rejects `ordering` if some inclusive tail {x : rank(x) ≥ i} gains probability
/// between an earlier and a later period.
pub fn rejection_test(
    pi: &ChoiceDataset,
    ordering: &PreferenceOrdering,
    tol: f64,
) -> Result<RejectionOutcome> {
    dim_check("ordering length", pi.n_items(), ordering.len())?;
    if pi.n_periods() < 2 {
        return Err(RasError::Domain(
            "the rejection test needs at least two periods".into(),
        ));
    }
    let rank = ordering.rank();
    for i in 0..rank.len() {
        if let Some(w) = witness(pi, i, &rank[i..], tol) {
            return Ok(RejectionOutcome::Rejected(w));
        }
    }
    Ok(RejectionOutcome::Survives)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum PrefixRejection {
    TailIncrease(TailWitness),
    /// `item` is never chosen yet was ranked above an item that is.
    NeverChosen {
        item: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RejectedPrefix {
    pub prefix: Vec<usize>,
    #[serde(flatten)]
    pub reason: PrefixRejection,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SurvivorReport {
    pub survivors: Vec<PreferenceOrdering>,
    pub rejected: Vec<RejectedPrefix>,
    /// Fewer than two periods: nothing can be rejected.
    pub vacuous: bool,
}

impl SurvivorReport {
    pub fn survivor_set(&self) -> Option<OrderingSet> {
        OrderingSet::new(self.survivors.clone()).ok()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurvivalOptions {
    pub tol: f64,
    /// Also reject prefixes ranking a never-chosen item above an item that is chosen.
    pub never_chosen_rule: bool,
}

impl Default for SurvivalOptions {
    fn default() -> Self {
        Self {
            tol: REJECTION_TOL,
            never_chosen_rule: true,
        }
    }
}

/// Depth-first search over ranking prefixes. A prefix is pruned as soon as the tail
/// that follows it gains probability over time, so every completion is rejected too.
pub fn survivor_search(pi: &ChoiceDataset, opts: &SurvivalOptions) -> Result<SurvivorReport> {
    let n = pi.n_items();
    if n > MAX_SEARCH_ITEMS {
        return Err(RasError::Config(format!(
            "survivor search is limited to {MAX_SEARCH_ITEMS} items, got {n}"
        )));
    }
    let mut report = SurvivorReport {
        survivors: Vec::new(),
        rejected: Vec::new(),
        vacuous: pi.n_periods() < 2,
    };
    if report.vacuous {
        report.survivors = OrderingSet::all(n)?.iter().cloned().collect();
        return Ok(report);
    }
    let never: Vec<bool> = {
        let ids = pi.never_chosen(opts.tol);
        (0..n).map(|i| ids.contains(&i)).collect()
    };
    let mut prefix = Vec::with_capacity(n);
    let mut placed = vec![false; n];
    descend(pi, opts, &never, &mut prefix, &mut placed, &mut report)?;
    Ok(report)
}

fn descend(
    pi: &ChoiceDataset,
    opts: &SurvivalOptions,
    never: &[bool],
    prefix: &mut Vec<usize>,
    placed: &mut [bool],
    report: &mut SurvivorReport,
) -> Result<()> {
    let n = placed.len();
    if prefix.len() == n {
        report
            .survivors
            .push(PreferenceOrdering::new(prefix.clone())?);
        return Ok(());
    }
    for item in 0..n {
        if placed[item] {
            continue;
        }
        prefix.push(item);
        placed[item] = true;
        let chosen_left = (0..n).any(|x| !placed[x] && !never[x]);
        let tail: Vec<usize> = (0..n).filter(|&x| !placed[x]).collect();
        let reason = if opts.never_chosen_rule && never[item] && chosen_left {
            Some(PrefixRejection::NeverChosen { item })
        } else if tail.is_empty() {
            None
        } else {
            witness(pi, prefix.len(), &tail, opts.tol).map(PrefixRejection::TailIncrease)
        };
        match reason {
            Some(reason) => report.rejected.push(RejectedPrefix {
                prefix: prefix.clone(),
                reason,
            }),
            None => descend(pi, opts, never, prefix, placed, report)?,
        }
        prefix.pop();
        placed[item] = false;
    }
    Ok(())
}
