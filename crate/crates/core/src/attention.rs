//! Attention rules μ(A | t, ≻_i), accumulated attention and the time-monotonicity check.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::choice::ROW_SUM_TOL;
use crate::error::{RasError, Result};
use crate::lattice::SetIndex;
use crate::menu::ConsiderationSet;

/// Default tolerance for [`check_time_monotonicity`].
pub const MONOTONICITY_TOL: f64 = 1e-9;

/// Consideration-set probabilities by period and preference.
///
/// `u` has one row per period and `d_pref * d_c` columns; column `i * d_c + s` holds
/// μ(set s | t, ≻_i).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RuleRepr", into = "RuleRepr")]
pub struct AttentionRule {
    u: DMatrix<f64>,
    set_index: SetIndex,
    d_pref: usize,
}

impl AttentionRule {
    pub fn new(u: DMatrix<f64>, set_index: SetIndex, d_pref: usize) -> Result<Self> {
        let d_c = set_index.len();
        if d_pref == 0 || u.nrows() == 0 {
            return Err(RasError::Validation(
                "attention rule needs at least one period and preference".into(),
            ));
        }
        if u.ncols() != d_pref * d_c {
            return Err(RasError::Dimension(format!(
                "attention rule has {} columns, expected {d_pref} x {d_c}",
                u.ncols()
            )));
        }
        if let Some(v) = u.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(RasError::Validation(format!(
                "attention probability {v} outside [0, 1]"
            )));
        }
        for t in 0..u.nrows() {
            for i in 0..d_pref {
                let s: f64 = u.row(t).columns(i * d_c, d_c).sum();
                if (s - 1.0).abs() > ROW_SUM_TOL {
                    return Err(RasError::Validation(format!(
                        "period {} preference {i} sums to {s}, not 1",
                        t + 1
                    )));
                }
            }
        }
        Ok(Self {
            u,
            set_index,
            d_pref,
        })
    }

    /// Builds a rule from `rows[pref][t][set]`.
    pub fn from_blocks(set_index: SetIndex, rows: &[Vec<Vec<f64>>]) -> Result<Self> {
        let d_pref = rows.len();
        let d_c = set_index.len();
        let d_t = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|b| b.len() != d_t) || rows.iter().flatten().any(|r| r.len() != d_c) {
            return Err(RasError::Dimension(format!(
                "attention blocks must all be {d_t} x {d_c}"
            )));
        }
        let u = DMatrix::from_fn(d_t, d_pref * d_c, |t, col| rows[col / d_c][t][col % d_c]);
        Self::new(u, set_index, d_pref)
    }

    /// Single-preference rule from `rows[t][set]`.
    pub fn homogeneous(set_index: SetIndex, rows: Vec<Vec<f64>>) -> Result<Self> {
        Self::from_blocks(set_index, &[rows])
    }

    /// The same block repeated for each of `d_pref` preferences.
    pub fn replicate(&self, d_pref: usize) -> Result<Self> {
        if self.d_pref != 1 {
            return Err(RasError::Config(
                "only single-preference rules can be replicated".into(),
            ));
        }
        let d_c = self.d_c();
        let u = DMatrix::from_fn(self.d_t(), d_pref * d_c, |t, col| self.u[(t, col % d_c)]);
        Self::new(u, self.set_index.clone(), d_pref)
    }

    pub fn u(&self) -> &DMatrix<f64> {
        &self.u
    }

    pub fn set_index(&self) -> &SetIndex {
        &self.set_index
    }

    pub fn d_t(&self) -> usize {
        self.u.nrows()
    }

    pub fn d_pref(&self) -> usize {
        self.d_pref
    }

    pub fn d_c(&self) -> usize {
        self.set_index.len()
    }

    pub fn n_items(&self) -> usize {
        self.set_index.n_items()
    }

    /// μ(set | t, ≻_pref) by canonical set index.
    pub fn mu(&self, pref: usize, t: usize, set: usize) -> f64 {
        self.u[(t, pref * self.d_c() + set)]
    }

    /// The μ row of one preference block at period `t`.
    pub fn block_row(&self, pref: usize, t: usize) -> Vec<f64> {
        let d_c = self.d_c();
        (0..d_c).map(|s| self.u[(t, pref * d_c + s)]).collect()
    }

    /// Accumulated attention over the canonical sets for one block row.
    pub fn accumulated_row(&self, pref: usize, t: usize) -> Vec<f64> {
        self.set_index
            .zeta(&self.block_row(pref, t))
            .expect("block rows match the set index")
    }

    fn check_indices(&self, pref: usize, t: usize) -> Result<()> {
        if pref >= self.d_pref || t >= self.d_t() {
            return Err(RasError::Validation(format!(
                "index (pref {pref}, period {t}) out of range for a {} x {} rule",
                self.d_t(),
                self.d_pref
            )));
        }
        Ok(())
    }
}

/// α(A | t, ≻_pref) = Σ_{B ⊆ A} μ(B | t, ≻_pref).
pub fn accumulated_attention(
    rule: &AttentionRule,
    pref: usize,
    t: usize,
    set: ConsiderationSet,
) -> Result<f64> {
    rule.check_indices(pref, t)?;
    if set.mask() >> rule.n_items() != 0 {
        return Err(RasError::Validation(format!(
            "set {:#b} has items outside a {}-item menu",
            set.mask(),
            rule.n_items()
        )));
    }
    Ok(rule
        .set_index()
        .sets()
        .iter()
        .enumerate()
        .filter(|(_, b)| b.is_subset_of(set))
        .map(|(s, _)| rule.mu(pref, t, s))
        .sum())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    /// α(A | t′) exceeds α(A | t) for some t < t′.
    Increase,
    /// α(S | t) differs from 1.
    FullSetMass,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityViolation {
    pub kind: ViolationKind,
    pub pref: usize,
    pub set: ConsiderationSet,
    pub t: usize,
    /// Later period for an [`ViolationKind::Increase`]; equal to `t` otherwise.
    pub t_later: usize,
    /// Amount by which the inequality fails.
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityReport {
    pub passes: bool,
    pub violations: Vec<MonotonicityViolation>,
}

/// Checks α(A|t) ≥ α(A|t′) − tol for every proper admissible A and t < t′, and
/// α(S|t) = 1. All violations are listed.
pub fn check_time_monotonicity(rule: &AttentionRule, tol: f64) -> MonotonicityReport {
    let full = rule.set_index().full_index();
    let mut violations = Vec::new();
    for pref in 0..rule.d_pref() {
        let alpha: Vec<Vec<f64>> = (0..rule.d_t())
            .map(|t| rule.accumulated_row(pref, t))
            .collect();
        for (t, row) in alpha.iter().enumerate() {
            let gap = (row[full] - 1.0).abs();
            if gap > tol {
                violations.push(MonotonicityViolation {
                    kind: ViolationKind::FullSetMass,
                    pref,
                    set: rule.set_index().set(full),
                    t,
                    t_later: t,
                    gap,
                });
            }
        }
        for s in 0..full {
            for t in 0..rule.d_t() {
                for t_later in t + 1..rule.d_t() {
                    let gap = alpha[t_later][s] - alpha[t][s];
                    if gap > tol {
                        violations.push(MonotonicityViolation {
                            kind: ViolationKind::Increase,
                            pref,
                            set: rule.set_index().set(s),
                            t,
                            t_later,
                            gap,
                        });
                    }
                }
            }
        }
    }
    MonotonicityReport {
        passes: violations.is_empty(),
        violations,
    }
}

#[derive(Serialize, Deserialize)]
struct RuleRepr {
    n_items: usize,
    forced_item: Option<usize>,
    d_pref: usize,
    /// `u[t]` is one full row of the rule.
    u: Vec<Vec<f64>>,
}

impl TryFrom<RuleRepr> for AttentionRule {
    type Error = RasError;

    fn try_from(r: RuleRepr) -> Result<Self> {
        let set_index = SetIndex::build(r.n_items, r.forced_item)?;
        let u = crate::choice::rows_to_matrix(&r.u)?;
        Self::new(u, set_index, r.d_pref)
    }
}

impl From<AttentionRule> for RuleRepr {
    fn from(rule: AttentionRule) -> Self {
        Self {
            n_items: rule.n_items(),
            forced_item: rule.set_index.forced_item(),
            d_pref: rule.d_pref,
            u: rule
                .u
                .row_iter()
                .map(|r| r.iter().copied().collect())
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::menu::Menu;

    fn set(items: &[usize]) -> ConsiderationSet {
        ConsiderationSet::from_items(items).unwrap()
    }

    fn point_mass(idx: &SetIndex, items: &[usize]) -> Vec<f64> {
        let mut row = vec![0.0; idx.len()];
        row[idx.index_of(set(items)).unwrap()] = 1.0;
        row
    }

    /// t=1: μ({a})=μ({b,c})=0.5; t=2: μ({a,b})=μ({c})=0.5.
    pub(crate) fn example_two() -> AttentionRule {
        let idx = SetIndex::full(3).unwrap();
        let mut r1 = vec![0.0; 7];
        r1[idx.index_of(set(&[0])).unwrap()] = 0.5;
        r1[idx.index_of(set(&[1, 2])).unwrap()] = 0.5;
        let mut r2 = vec![0.0; 7];
        r2[idx.index_of(set(&[0, 1])).unwrap()] = 0.5;
        r2[idx.index_of(set(&[2])).unwrap()] = 0.5;
        AttentionRule::homogeneous(idx, vec![r1, r2]).unwrap()
    }

    #[test]
    fn example_two_accumulated_attention() {
        let rule = example_two();
        let full = set(&[0, 1, 2]);
        for t in 0..2 {
            assert_eq!(accumulated_attention(&rule, 0, t, full).unwrap(), 1.0);
        }
        assert_eq!(
            accumulated_attention(&rule, 0, 0, set(&[1, 2])).unwrap(),
            0.5
        );
        assert_eq!(accumulated_attention(&rule, 0, 1, set(&[2])).unwrap(), 0.5);
        assert!(accumulated_attention(&rule, 0, 2, full).is_err());
    }

    #[test]
    fn example_two_fails_on_singleton_c() {
        let rule = example_two();
        let report = check_time_monotonicity(&rule, MONOTONICITY_TOL);
        assert!(!report.passes);
        let c = report
            .violations
            .iter()
            .find(|v| v.set == set(&[2]))
            .expect("{c} must be reported");
        assert_eq!((c.t, c.t_later), (0, 1));
        assert!((c.gap - 0.5).abs() < 1e-15);
        // marginal consideration of every item weakly rises, yet the rule fails
        let marginal = |t: usize, item: usize| -> f64 {
            let idx = rule.set_index();
            (0..idx.len())
                .filter(|&s| idx.set(s).contains(item))
                .map(|s| rule.mu(0, t, s))
                .sum()
        };
        for item in 0..3 {
            assert!(marginal(1, item) >= marginal(0, item));
        }
    }

    #[test]
    fn top_n_and_constant_rules_pass() {
        let idx = SetIndex::full(3).unwrap();
        let rows = vec![
            point_mass(&idx, &[0]),
            point_mass(&idx, &[0, 1]),
            point_mass(&idx, &[0, 1, 2]),
        ];
        let rule = AttentionRule::homogeneous(idx.clone(), rows).unwrap();
        assert!(check_time_monotonicity(&rule, MONOTONICITY_TOL).passes);

        let row = vec![1.0 / 7.0; 7];
        let constant =
            AttentionRule::homogeneous(idx, vec![row.clone(), row.clone(), row]).unwrap();
        assert!(check_time_monotonicity(&constant, 0.0).passes);
    }

    #[test]
    fn rule_validation() {
        let idx = SetIndex::full(2).unwrap();
        assert!(AttentionRule::homogeneous(idx.clone(), vec![vec![0.5, 0.5]]).is_err());
        assert!(AttentionRule::homogeneous(idx.clone(), vec![vec![0.5, 0.6, -0.1]]).is_err());
        let r = AttentionRule::homogeneous(idx, vec![vec![0.2, 0.3, 0.5]]).unwrap();
        let r3 = r.replicate(3).unwrap();
        assert_eq!(r3.u().ncols(), 9);
        assert_eq!(r3.mu(2, 0, 2), 0.5);
    }

    #[test]
    fn outside_mode_alpha_of_outside_singleton() {
        let menu = Menu::new(["a", "o"]).unwrap().with_outside(1).unwrap();
        let idx = SetIndex::new(&menu, true).unwrap();
        let rule = AttentionRule::homogeneous(idx, vec![vec![1.0, 0.0], vec![0.25, 0.75]]).unwrap();
        assert_eq!(accumulated_attention(&rule, 0, 0, set(&[1])).unwrap(), 1.0);
        assert_eq!(accumulated_attention(&rule, 0, 1, set(&[1])).unwrap(), 0.25);
        assert_eq!(accumulated_attention(&rule, 0, 1, set(&[0])).unwrap(), 0.0);
        assert!(check_time_monotonicity(&rule, MONOTONICITY_TOL).passes);
    }

    #[test]
    fn serde_round_trip() {
        let rule = example_two().replicate(2).unwrap();
        let json = serde_json::to_string(&rule).unwrap();
        let back: AttentionRule = serde_json::from_str(&json).unwrap();
        assert_eq!(back, rule);
    }
}
