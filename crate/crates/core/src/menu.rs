//! Menus, consideration sets and strict preference orderings.

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{RasError, Result};

/// Largest menu the bitmask representation supports.
pub const MAX_ITEMS: usize = 63;

/// A fixed, observed menu of mutually exclusive alternatives.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Menu {
    items: Vec<String>,
    outside_index: Option<usize>,
}

impl Menu {
    pub fn new<S: Into<String>>(items: impl IntoIterator<Item = S>) -> Result<Self> {
        let items: Vec<String> = items.into_iter().map(Into::into).collect();
        if items.len() < 2 {
            return Err(RasError::Validation(format!(
                "a menu needs at least 2 items, got {}",
                items.len()
            )));
        }
        if items.len() > MAX_ITEMS {
            return Err(RasError::Validation(format!(
                "menus are limited to {MAX_ITEMS} items, got {}",
                items.len()
            )));
        }
        let mut seen = HashSet::new();
        for label in &items {
            if !seen.insert(label.as_str()) {
                return Err(RasError::Validation(format!(
                    "duplicate item label {label:?}"
                )));
            }
        }
        Ok(Self {
            items,
            outside_index: None,
        })
    }

    /// Marks `index` as the always-available outside option.
    pub fn with_outside(mut self, index: usize) -> Result<Self> {
        if index >= self.items.len() {
            return Err(RasError::Validation(format!(
                "outside index {index} out of range for {} items",
                self.items.len()
            )));
        }
        self.outside_index = Some(index);
        Ok(self)
    }

    pub fn with_outside_label(self, label: &str) -> Result<Self> {
        let index = self.index_of(label)?;
        self.with_outside(index)
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn items(&self) -> &[String] {
        &self.items
    }

    pub fn label(&self, index: usize) -> &str {
        &self.items[index]
    }

    pub fn outside_index(&self) -> Option<usize> {
        self.outside_index
    }

    pub fn index_of(&self, label: &str) -> Result<usize> {
        self.items
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| RasError::Validation(format!("unknown item label {label:?}")))
    }

    /// Bitmask with every menu item set.
    pub fn full_mask(&self) -> u64 {
        full_mask(self.items.len())
    }
}

pub(crate) fn full_mask(n: usize) -> u64 {
    if n >= 64 {
        u64::MAX
    } else {
        (1u64 << n) - 1
    }
}

/// A non-empty subset of the menu, stored as a bitmask over item indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ConsiderationSet(u64);

impl ConsiderationSet {
    pub fn new(mask: u64) -> Result<Self> {
        if mask == 0 {
            return Err(RasError::Domain(
                "consideration sets cannot be empty".into(),
            ));
        }
        Ok(Self(mask))
    }

    pub fn from_items(items: &[usize]) -> Result<Self> {
        let mut mask = 0u64;
        for &i in items {
            if i >= MAX_ITEMS {
                return Err(RasError::Validation(format!("item index {i} out of range")));
            }
            mask |= 1 << i;
        }
        Self::new(mask)
    }

    pub fn mask(self) -> u64 {
        self.0
    }

    pub fn contains(self, item: usize) -> bool {
        item < 64 && self.0 & (1 << item) != 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn is_subset_of(self, other: ConsiderationSet) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn items(self) -> impl Iterator<Item = usize> {
        let mask = self.0;
        (0..64).filter(move |i| mask & (1 << i) != 0)
    }

    pub fn display<'a>(self, menu: &'a Menu) -> impl fmt::Display + 'a {
        SetDisplay { set: self, menu }
    }
}

struct SetDisplay<'a> {
    set: ConsiderationSet,
    menu: &'a Menu,
}

impl fmt::Display for SetDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let labels: Vec<&str> = self.set.items().map(|i| self.menu.label(i)).collect();
        write!(f, "{{{}}}", labels.join(","))
    }
}

/// A strict ranking of menu items, best first.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct PreferenceOrdering {
    rank: Vec<usize>,
    position: Vec<usize>,
}

impl PreferenceOrdering {
    pub fn new(rank: Vec<usize>) -> Result<Self> {
        let n = rank.len();
        let mut position = vec![usize::MAX; n];
        for (pos, &item) in rank.iter().enumerate() {
            if item >= n || position[item] != usize::MAX {
                return Err(RasError::Validation(format!(
                    "ranking {rank:?} is not a permutation of 0..{n}"
                )));
            }
            position[item] = pos;
        }
        Ok(Self { rank, position })
    }

    pub fn from_labels<S: AsRef<str>>(menu: &Menu, labels: &[S]) -> Result<Self> {
        if labels.len() != menu.len() {
            return Err(RasError::Validation(format!(
                "ordering names {} items but the menu has {}",
                labels.len(),
                menu.len()
            )));
        }
        let rank = labels
            .iter()
            .map(|l| menu.index_of(l.as_ref()))
            .collect::<Result<Vec<_>>>()?;
        Self::new(rank)
    }

    /// Identity ordering 0 ≻ 1 ≻ … ≻ n−1.
    pub fn identity(n: usize) -> Self {
        Self::new((0..n).collect()).expect("identity is a permutation")
    }

    pub fn len(&self) -> usize {
        self.rank.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rank.is_empty()
    }

    /// Items best-first.
    pub fn rank(&self) -> &[usize] {
        &self.rank
    }

    /// Zero-based rank position of `item`.
    pub fn position(&self, item: usize) -> usize {
        self.position[item]
    }

    pub fn prefers(&self, a: usize, b: usize) -> bool {
        self.position[a] < self.position[b]
    }

    /// The member of `set` ranked highest.
    pub fn best_in(&self, set: ConsiderationSet) -> Result<usize> {
        if set.is_empty() {
            return Err(RasError::Domain("best_in on an empty set".into()));
        }
        self.rank
            .iter()
            .copied()
            .find(|&item| set.contains(item))
            .ok_or_else(|| {
                RasError::Domain(format!(
                    "set {:#b} has no member among {} ranked items",
                    set.mask(),
                    self.rank.len()
                ))
            })
    }

    pub fn labels(&self, menu: &Menu) -> Vec<String> {
        self.rank
            .iter()
            .map(|&i| menu.label(i).to_string())
            .collect()
    }

    pub fn display<'a>(&'a self, menu: &'a Menu) -> impl fmt::Display + 'a {
        OrderingDisplay {
            ordering: self,
            menu,
        }
    }
}

impl TryFrom<Vec<usize>> for PreferenceOrdering {
    type Error = RasError;

    fn try_from(rank: Vec<usize>) -> Result<Self> {
        Self::new(rank)
    }
}

impl From<PreferenceOrdering> for Vec<usize> {
    fn from(o: PreferenceOrdering) -> Self {
        o.rank
    }
}

struct OrderingDisplay<'a> {
    ordering: &'a PreferenceOrdering,
    menu: &'a Menu,
}

impl fmt::Display for OrderingDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let labels = self.ordering.labels(self.menu);
        write!(f, "{}", labels.join(" > "))
    }
}

/// The candidate preference types, indexed 0..d_pref.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<PreferenceOrdering>", into = "Vec<PreferenceOrdering>")]
pub struct OrderingSet {
    orderings: Vec<PreferenceOrdering>,
}

impl OrderingSet {
    pub fn new(orderings: Vec<PreferenceOrdering>) -> Result<Self> {
        let Some(first) = orderings.first() else {
            return Err(RasError::Validation("ordering set is empty".into()));
        };
        let n = first.len();
        let mut seen = HashSet::new();
        for o in &orderings {
            if o.len() != n {
                return Err(RasError::Validation(format!(
                    "orderings disagree on menu size ({} vs {n})",
                    o.len()
                )));
            }
            if !seen.insert(o.rank()) {
                return Err(RasError::Validation(format!(
                    "duplicate ordering {:?}",
                    o.rank()
                )));
            }
        }
        // distinct permutations of n items can never exceed n!, so no explicit cap is needed
        Ok(Self { orderings })
    }

    pub fn single(ordering: PreferenceOrdering) -> Self {
        Self {
            orderings: vec![ordering],
        }
    }

    /// All n! orderings in lexicographic order of their rank vectors.
    pub fn all(n: usize) -> Result<Self> {
        if n == 0 || n > 10 {
            return Err(RasError::Config(format!(
                "refusing to enumerate all orderings of {n} items"
            )));
        }
        let mut out = Vec::new();
        let mut perm: Vec<usize> = (0..n).collect();
        loop {
            out.push(PreferenceOrdering::new(perm.clone())?);
            if !next_permutation(&mut perm) {
                break;
            }
        }
        Self::new(out)
    }

    pub fn len(&self) -> usize {
        self.orderings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.orderings.is_empty()
    }

    pub fn n_items(&self) -> usize {
        self.orderings[0].len()
    }

    pub fn get(&self, i: usize) -> &PreferenceOrdering {
        &self.orderings[i]
    }

    pub fn iter(&self) -> std::slice::Iter<'_, PreferenceOrdering> {
        self.orderings.iter()
    }

    pub fn position(&self, ordering: &PreferenceOrdering) -> Option<usize> {
        self.orderings.iter().position(|o| o == ordering)
    }
}

impl TryFrom<Vec<PreferenceOrdering>> for OrderingSet {
    type Error = RasError;

    fn try_from(v: Vec<PreferenceOrdering>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<OrderingSet> for Vec<PreferenceOrdering> {
    fn from(s: OrderingSet) -> Self {
        s.orderings
    }
}

impl<'a> IntoIterator for &'a OrderingSet {
    type Item = &'a PreferenceOrdering;
    type IntoIter = std::slice::Iter<'a, PreferenceOrdering>;

    fn into_iter(self) -> Self::IntoIter {
        self.orderings.iter()
    }
}

/// Advances `perm` to the next lexicographic permutation; false once it wraps.
pub(crate) fn next_permutation(perm: &mut [usize]) -> bool {
    let n = perm.len();
    if n < 2 {
        return false;
    }
    let mut i = n - 1;
    while i > 0 && perm[i - 1] >= perm[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = n - 1;
    while perm[j] <= perm[i - 1] {
        j -= 1;
    }
    perm.swap(i - 1, j);
    perm[i..].reverse();
    true
}

#[cfg(test)]
mod tests {
    use super::*;

    fn abc() -> Menu {
        Menu::new(["a", "b", "c"]).unwrap()
    }

    #[test]
    fn menu_rejects_duplicates_and_small_menus() {
        assert!(Menu::new(["a"]).is_err());
        assert!(Menu::new(["a", "a"]).is_err());
        assert!(abc().with_outside(3).is_err());
        assert_eq!(
            abc().with_outside_label("c").unwrap().outside_index(),
            Some(2)
        );
    }

    #[test]
    fn best_in_examples() {
        let menu = abc();
        let ord = PreferenceOrdering::from_labels(&menu, &["a", "b", "c"]).unwrap();
        let bc = ConsiderationSet::from_items(&[1, 2]).unwrap();
        assert_eq!(ord.best_in(bc).unwrap(), 1);
        let c = ConsiderationSet::from_items(&[2]).unwrap();
        assert_eq!(ord.best_in(c).unwrap(), 2);

        let ab = Menu::new(["a", "b"]).unwrap();
        let ord2 = PreferenceOrdering::identity(2);
        let full = ConsiderationSet::new(ab.full_mask()).unwrap();
        assert_eq!(ord2.best_in(full).unwrap(), 0);
    }

    #[test]
    fn empty_sets_are_rejected() {
        assert!(ConsiderationSet::new(0).is_err());
        assert!(ConsiderationSet::from_items(&[]).is_err());
    }

    #[test]
    fn best_in_matches_brute_force_argmax() {
        for n in 1..=4usize {
            let all = OrderingSet::all(n).unwrap();
            for ord in &all {
                for mask in 1..(1u64 << n) {
                    let set = ConsiderationSet::new(mask).unwrap();
                    // argmin of rank position over members
                    let mut best = None;
                    for item in 0..n {
                        if mask & (1 << item) == 0 {
                            continue;
                        }
                        let better = match best {
                            None => true,
                            Some(b) => {
                                let pos_item = ord.rank().iter().position(|&x| x == item).unwrap();
                                let pos_b = ord.rank().iter().position(|&x| x == b).unwrap();
                                pos_item < pos_b
                            }
                        };
                        if better {
                            best = Some(item);
                        }
                    }
                    assert_eq!(ord.best_in(set).unwrap(), best.unwrap());
                }
            }
        }
    }

    #[test]
    fn all_orderings_counts_and_uniqueness() {
        assert_eq!(OrderingSet::all(3).unwrap().len(), 6);
        assert_eq!(OrderingSet::all(5).unwrap().len(), 120);
        let o = PreferenceOrdering::identity(3);
        assert!(OrderingSet::new(vec![o.clone(), o]).is_err());
        assert!(PreferenceOrdering::new(vec![0, 0, 1]).is_err());
    }

    #[test]
    fn ordering_serde_uses_rank_vector() {
        let o = PreferenceOrdering::new(vec![2, 0, 1]).unwrap();
        let s = serde_json::to_string(&o).unwrap();
        assert_eq!(s, "[2,0,1]");
        let back: PreferenceOrdering = serde_json::from_str(&s).unwrap();
        assert_eq!(back, o);
        assert!(serde_json::from_str::<PreferenceOrdering>("[1,1,0]").is_err());
    }
}
