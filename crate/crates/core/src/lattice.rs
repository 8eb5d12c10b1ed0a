//! Canonical enumeration of consideration sets and the subset-sum (zeta / Möbius)
//! transforms over it.
//!
//! Sets are enumerated by ascending bitmask. In outside-option mode the outside bit is
//! forced on and dropped from the enumerated bits, so the singleton `{outside}` is
//! index 0 and there are `2^(n-1)` sets; otherwise the `2^n - 1` non-empty masks are
//! listed in order. The full menu is always the last index.

use serde::{Deserialize, Serialize};

use crate::error::{dim_check, RasError, Result};
use crate::menu::{ConsiderationSet, Menu};

/// Largest number of enumerated bits accepted (2^20 sets per row).
pub const MAX_FREE_BITS: usize = 20;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SetIndex {
    n_items: usize,
    forced: u64,
    free_items: Vec<usize>,
    sets: Vec<ConsiderationSet>,
}

/// Enumerates the admissible consideration sets of `menu` in canonical order.
pub fn enumerate_sets(menu: &Menu, outside_mode: bool) -> Result<SetIndex> {
    SetIndex::new(menu, outside_mode)
}

impl SetIndex {
    pub fn new(menu: &Menu, outside_mode: bool) -> Result<Self> {
        let n = menu.len();
        let forced_item = if outside_mode {
            Some(menu.outside_index().ok_or_else(|| {
                RasError::Config(
                    "outside-option mode requires an outside option in the menu".into(),
                )
            })?)
        } else {
            None
        };
        Self::build(n, forced_item)
    }

    /// Index over all non-empty subsets of an `n`-item menu.
    pub fn full(n: usize) -> Result<Self> {
        Self::build(n, None)
    }

    pub(crate) fn build(n: usize, forced_item: Option<usize>) -> Result<Self> {
        if n == 0 || n > crate::menu::MAX_ITEMS || forced_item.is_some_and(|i| i >= n) {
            return Err(RasError::Config(format!(
                "invalid lattice: {n} items, forced item {forced_item:?}"
            )));
        }
        let free_items: Vec<usize> = (0..n).filter(|&i| Some(i) != forced_item).collect();
        if free_items.len() > MAX_FREE_BITS {
            return Err(RasError::Config(format!(
                "{} free items would enumerate more than 2^{MAX_FREE_BITS} sets",
                free_items.len()
            )));
        }
        let forced = forced_item.map_or(0, |i| 1u64 << i);
        let offset = usize::from(forced == 0);
        let count = (1usize << free_items.len()) - offset;
        let mut sets = Vec::with_capacity(count);
        for reduced in offset..(1usize << free_items.len()) {
            let mut mask = forced;
            for (bit, &item) in free_items.iter().enumerate() {
                if reduced & (1 << bit) != 0 {
                    mask |= 1 << item;
                }
            }
            sets.push(ConsiderationSet::new(mask)?);
        }
        Ok(Self {
            n_items: n,
            forced,
            free_items,
            sets,
        })
    }

    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }

    pub fn n_items(&self) -> usize {
        self.n_items
    }

    pub fn outside_mode(&self) -> bool {
        self.forced != 0
    }

    /// Item forced into every set, if any.
    pub fn forced_item(&self) -> Option<usize> {
        (self.forced != 0).then(|| self.forced.trailing_zeros() as usize)
    }

    pub fn sets(&self) -> &[ConsiderationSet] {
        &self.sets
    }

    pub fn set(&self, index: usize) -> ConsiderationSet {
        self.sets[index]
    }

    pub fn full_index(&self) -> usize {
        self.sets.len() - 1
    }

    pub fn index_of(&self, set: ConsiderationSet) -> Option<usize> {
        let mask = set.mask();
        if mask & self.forced != self.forced || mask >> self.n_items != 0 {
            return None;
        }
        let mut reduced = 0usize;
        for (bit, &item) in self.free_items.iter().enumerate() {
            if mask & (1 << item) != 0 {
                reduced |= 1 << bit;
            }
        }
        let offset = self.offset();
        (reduced >= offset).then(|| reduced - offset)
    }

    fn offset(&self) -> usize {
        usize::from(self.forced == 0)
    }

    fn lattice_len(&self) -> usize {
        1usize << self.free_items.len()
    }

    /// Accumulated values: `out[A] = Σ_{B ⊆ A} mu[B]`.
    pub fn zeta(&self, mu: &[f64]) -> Result<Vec<f64>> {
        dim_check("zeta input length", self.len(), mu.len())?;
        let mut buf = self.lift(mu);
        subset_sums(&mut buf);
        Ok(self.lower(buf))
    }

    /// Inverse of [`SetIndex::zeta`].
    pub fn moebius(&self, alpha: &[f64]) -> Result<Vec<f64>> {
        dim_check("moebius input length", self.len(), alpha.len())?;
        let mut buf = self.lift(alpha);
        inverse_subset_sums(&mut buf);
        Ok(self.lower(buf))
    }

    fn lift(&self, v: &[f64]) -> Vec<f64> {
        let mut buf = vec![0.0; self.lattice_len()];
        buf[self.offset()..].copy_from_slice(v);
        buf
    }

    fn lower(&self, mut buf: Vec<f64>) -> Vec<f64> {
        if self.offset() == 1 {
            buf.remove(0);
        }
        buf
    }
}

/// In-place subset-sum transform over a power-of-two sized lattice.
pub fn subset_sums(xs: &mut [f64]) {
    kronecker(xs, |lo, hi| *hi += lo);
}

/// In-place inverse of [`subset_sums`].
pub fn inverse_subset_sums(xs: &mut [f64]) {
    kronecker(xs, |lo, hi| *hi -= lo);
}

fn kronecker(xs: &mut [f64], op: impl Fn(f64, &mut f64)) {
    let n = xs.len();
    assert!(n.is_power_of_two(), "lattice length must be a power of two");
    let mut half = 1;
    while half < n {
        for block in xs.chunks_exact_mut(half * 2) {
            let (lo, hi) = block.split_at_mut(half);
            for (l, h) in lo.iter().zip(hi.iter_mut()) {
                op(*l, h);
            }
        }
        half *= 2;
    }
}
