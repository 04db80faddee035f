#![allow(dead_code)]

use confsample_core::formula::{opt, Configuration, Formula, Space};
use proptest::prelude::*;

pub const NAMES: [&str; 6] = ["A", "B", "C", "D", "E", "F"];

pub fn arb_formula(vars: usize) -> impl Strategy<Value = Formula> {
    let leaf = prop_oneof![
        1 => Just(Formula::True),
        1 => Just(Formula::False),
        8 => (0..vars).prop_map(|i| Formula::var(NAMES[i])),
    ];
    leaf.prop_recursive(5, 40, 2, |inner| {
        prop_oneof![
            inner.clone().prop_map(Formula::not),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Formula::and(a, b)),
            (inner.clone(), inner).prop_map(|(a, b)| Formula::or(a, b)),
        ]
    })
}

pub fn space(n: usize) -> Space {
    Space::new(NAMES[..n].iter().map(|s| opt(s)))
}

/// Every configuration of `space`, ordered as the binary counter with the
/// first option as the most significant bit.
pub fn all_configurations(space: &Space) -> Vec<Configuration> {
    let n = space.len();
    (0..1u32 << n)
        .map(|mask| {
            let bits = (0..n).map(|i| mask >> (n - 1 - i) & 1 == 1).collect();
            Configuration::new(space.clone(), bits)
        })
        .collect()
}
