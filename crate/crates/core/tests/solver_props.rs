mod common;

use common::{all_configurations, arb_formula, space};
use confsample_core::formula::{evaluate, Configuration};
use confsample_core::satsolver::{count_or_enumerate, max_polarity_model, ConstraintModel, Polarity, SolveError};
use proptest::prelude::*;

fn polarity_count(c: &Configuration, p: Polarity) -> usize {
    c.values().iter().filter(|&&v| v == p.value()).count()
}

/// Key ordering configurations by preference: options in name order, the
/// polarity value before its opposite.
fn preference_key(c: &Configuration, p: Polarity) -> Vec<bool> {
    c.values().iter().map(|&v| v != p.value()).collect()
}

proptest! {
    #[test]
    fn max_polarity_matches_brute_force(f in arb_formula(6), n in 1usize..=6, enabled in any::<bool>()) {
        let p = if enabled { Polarity::Enabled } else { Polarity::Disabled };
        let s = space(n);
        let f_vars = f.vars();
        prop_assume!(f_vars.iter().all(|v| s.contains(v.as_str())));
        let model = ConstraintModel::new(s.clone(), f.clone(), "prop").unwrap();
        let valid: Vec<_> = all_configurations(&s).into_iter().filter(|c| evaluate(&f, c).unwrap()).collect();
        match max_polarity_model(&model, p) {
            Err(SolveError::Unsatisfiable) => prop_assert!(valid.is_empty()),
            Err(e) => prop_assert!(false, "unexpected error {e}"),
            Ok(c) => {
                let best = valid.iter().map(|c| polarity_count(c, p)).max().unwrap();
                let expected = valid
                    .iter()
                    .filter(|c| polarity_count(c, p) == best)
                    .min_by_key(|c| preference_key(c, p))
                    .unwrap();
                prop_assert_eq!(&c, expected);
            }
        }
    }

    #[test]
    fn enumeration_matches_brute_force(f in arb_formula(5), limit in 1usize..40) {
        let s = space(5);
        let model = ConstraintModel::new(s.clone(), f.clone(), "prop").unwrap();
        let valid = all_configurations(&s).into_iter().filter(|c| evaluate(&f, c).unwrap()).count();
        let e = count_or_enumerate(&model, limit).unwrap();
        prop_assert_eq!(e.configurations.len(), valid.min(limit));
        prop_assert_eq!(e.exhaustive, valid < limit || (valid == limit && e.exhaustive));
        let distinct: std::collections::HashSet<_> = e.configurations.iter().collect();
        prop_assert_eq!(distinct.len(), e.configurations.len());
        for c in &e.configurations {
            prop_assert!(evaluate(&f, c).unwrap());
        }
    }
}
