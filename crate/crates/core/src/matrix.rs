//! The linear form U·A·P = Π of the model and the design matrix used to solve for P.

use nalgebra::DMatrix;

use crate::attention::AttentionRule;
use crate::choice::{ChoiceDataset, PreferenceDistribution};
use crate::error::{dim_check, RasError, Result};
use crate::lattice::SetIndex;
use crate::menu::OrderingSet;

/// The 0/1 matrix mapping (preference, consideration set) rows to (item, preference)
/// columns: row `i * d_c + s` has its single 1 in column `best(i, s) * d_pref + i`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChoiceTransform {
    a: DMatrix<f64>,
    best: Vec<usize>,
    n_items: usize,
    d_pref: usize,
    d_c: usize,
}

pub fn build_choice_transform(sets: &SetIndex, orderings: &OrderingSet) -> Result<ChoiceTransform> {
    dim_check("ordering length", sets.n_items(), orderings.n_items())?;
    let n = sets.n_items();
    let d_pref = orderings.len();
    let d_c = sets.len();
    let mut best = Vec::with_capacity(d_pref * d_c);
    for ord in orderings {
        for &set in sets.sets() {
            best.push(ord.best_in(set)?);
        }
    }
    let mut a = DMatrix::zeros(d_pref * d_c, n * d_pref);
    for (row, &item) in best.iter().enumerate() {
        a[(row, item * d_pref + row / d_c)] = 1.0;
    }
    Ok(ChoiceTransform {
        a,
        best,
        n_items: n,
        d_pref,
        d_c,
    })
}

impl ChoiceTransform {
    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    /// The item chosen by preference `pref` from canonical set `set`.
    pub fn best(&self, pref: usize, set: usize) -> usize {
        self.best[pref * self.d_c + set]
    }

    pub fn n_items(&self) -> usize {
        self.n_items
    }

    pub fn d_pref(&self) -> usize {
        self.d_pref
    }

    pub fn d_c(&self) -> usize {
        self.d_c
    }

    fn check_rule(&self, rule: &AttentionRule) -> Result<()> {
        dim_check("rule preferences", self.d_pref, rule.d_pref())?;
        dim_check("rule consideration sets", self.d_c, rule.d_c())?;
        dim_check("rule items", self.n_items, rule.n_items())
    }
}

/// P: `n` copies of `p` stacked block-diagonally, (n·d_pref) × n.
pub fn block_diag(p: &PreferenceDistribution, n: usize) -> DMatrix<f64> {
    let d = p.len();
    let mut out = DMatrix::zeros(n * d, n);
    for b in 0..n {
        for (i, &v) in p.as_slice().iter().enumerate() {
            out[(b * d + i, b)] = v;
        }
    }
    out
}

/// U·A, the choice probabilities conditional on each preference, d_t × (n·d_pref).
pub fn conditional_choices(
    rule: &AttentionRule,
    transform: &ChoiceTransform,
) -> Result<DMatrix<f64>> {
    transform.check_rule(rule)?;
    Ok(rule.u() * transform.a())
}

/// Π = U·A·P.
pub fn predict_choices(
    rule: &AttentionRule,
    transform: &ChoiceTransform,
    p: &PreferenceDistribution,
) -> Result<ChoiceDataset> {
    dim_check("preference distribution", transform.d_pref, p.len())?;
    let pi = conditional_choices(rule, transform)? * block_diag(p, transform.n_items);
    // entries can drift a few ulps past [0, 1]
    let pi = pi.map(|v| v.clamp(0.0, 1.0));
    ChoiceDataset::new(pi).map_err(|e| match e {
        RasError::Validation(msg) => RasError::Domain(format!("predicted choices invalid: {msg}")),
        other => other,
    })
}

/// M with `M[t*n + j, i] = Σ_s μ(s | t, ≻_i)·1(best(i, s) = j)`, so that M·p = vec(U·A·P)
/// with row-major vec over (period, item).
pub fn design_matrix(rule: &AttentionRule, transform: &ChoiceTransform) -> Result<DMatrix<f64>> {
    transform.check_rule(rule)?;
    let n = transform.n_items;
    let mut m = DMatrix::zeros(rule.d_t() * n, transform.d_pref);
    for t in 0..rule.d_t() {
        for i in 0..transform.d_pref {
            for s in 0..transform.d_c {
                let mu = rule.mu(i, t, s);
                if mu != 0.0 {
                    m[(t * n + transform.best(i, s), i)] += mu;
                }
            }
        }
    }
    Ok(m)
}
