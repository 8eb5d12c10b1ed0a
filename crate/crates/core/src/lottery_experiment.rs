//! The lottery-choice experiment: five risky lotteries plus a sure payment of 12 tokens
//! as the outside option, and the per-period choice counts after time clustering.

use crate::choice::ChoiceDataset;
use crate::crra::{crra_ordering_table, Lottery};
use crate::error::Result;
use crate::menu::{Menu, OrderingSet, PreferenceOrdering};

pub const LABELS: [&str; 6] = ["l1", "l2", "l3", "l4", "l5", "lO"];
pub const OUTSIDE_INDEX: usize = 5;

/// Choice counts for l1..l5, lO in each of the six periods. Period 1 is everyone who
/// answered in zero seconds; its size is not reported, 98 is assumed.
pub const PERIOD_COUNTS: [[u64; 6]; 6] = [
    [0, 0, 0, 0, 0, 98],
    [14, 20, 14, 17, 11, 22],
    [15, 32, 20, 13, 10, 8],
    [14, 45, 12, 5, 11, 11],
    [20, 38, 11, 2, 20, 5],
    [14, 31, 17, 11, 17, 10],
];

/// The five risky lotteries l1..l5.
pub fn lotteries() -> Vec<Lottery> {
    let l =
        |name: &str, o: Vec<(f64, f64)>| Lottery::new(name, o).expect("bundled lottery is valid");
    vec![
        l("l1", vec![(50.0, 0.5), (0.0, 0.5)]),
        l("l2", vec![(30.0, 0.5), (10.0, 0.5)]),
        l(
            "l3",
            vec![(50.0, 0.25), (30.0, 0.25), (10.0, 0.25), (0.0, 0.25)],
        ),
        l(
            "l4",
            vec![(50.0, 0.25), (48.0, 0.2), (14.0, 0.15), (0.0, 0.4)],
        ),
        // the zero payoff has probability 3/20 so that the lottery sums to one
        l(
            "l5",
            vec![
                (48.0, 0.2),
                (30.0, 0.25),
                (14.0, 0.15),
                (10.0, 0.25),
                (0.0, 0.15),
            ],
        ),
    ]
}

pub fn outside_lottery() -> Lottery {
    Lottery::new("lO", vec![(12.0, 1.0)]).expect("bundled lottery is valid")
}

pub fn menu() -> Menu {
    Menu::new(LABELS)
        .and_then(|m| m.with_outside(OUTSIDE_INDEX))
        .expect("bundled menu is valid")
}

pub fn choice_data() -> ChoiceDataset {
    let counts: Vec<Vec<u64>> = PERIOD_COUNTS.iter().map(|r| r.to_vec()).collect();
    ChoiceDataset::from_counts(&counts)
        .and_then(|d| d.with_labels((1..=6).map(|t| t.to_string()).collect()))
        .expect("bundled counts are valid")
}

/// The CRRA rankings of l1..l5 for σ in [−1, 1], each with the outside option appended last.
pub fn crra_orderings() -> Result<OrderingSet> {
    let table = crra_ordering_table(&lotteries(), 1e-4)?;
    let orderings = table
        .into_iter()
        .map(|row| {
            let mut rank = row.rank;
            rank.push(OUTSIDE_INDEX);
            PreferenceOrdering::new(rank)
        })
        .collect::<Result<Vec<_>>>()?;
    OrderingSet::new(orderings)
}
