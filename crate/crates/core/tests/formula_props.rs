mod common;

use common::{all_configurations, arb_formula, space};
use confsample_core::formula::{evaluate, parse_formula, to_cnf, CnfFormula, Formula};
use confsample_core::satsolver::solve;
use proptest::prelude::*;

proptest! {
    #[test]
    fn print_parse_round_trip(f in arb_formula(6)) {
        let printed = f.to_string();
        let parsed = parse_formula(&printed).unwrap();
        prop_assert_eq!(parsed.to_string(), printed.clone());
        for c in all_configurations(&space(6)) {
            prop_assert_eq!(evaluate(&parsed, &c), evaluate(&f, &c));
        }
    }

    #[test]
    fn cnf_is_equisatisfiable_and_projects_to_the_formula(f in arb_formula(4)) {
        let cnf = to_cnf(&f);
        let back = CnfFormula::from_dimacs(&cnf.to_dimacs()).unwrap();
        prop_assert_eq!(&back.clauses, &cnf.clauses);
        prop_assert!(back.named_vars().eq(cnf.named_vars()));
        let brute = all_configurations(&space(4)).iter().any(|c| evaluate(&f, c).unwrap());
        let result = solve(&cnf).unwrap();
        prop_assert_eq!(result.is_sat(), brute);
        if let confsample_core::satsolver::SolveStatus::Sat(model) = result.status {
            let lookup = |o: &confsample_core::formula::OptionId| model.get(o.as_str()).or(Some(false));
            prop_assert_eq!(f.eval_with(&lookup), Ok(true));
        }
    }

    #[test]
    fn evaluation_is_a_homomorphism(a in arb_formula(3), b in arb_formula(3)) {
        for c in all_configurations(&space(3)) {
            let (x, y) = (evaluate(&a, &c).unwrap(), evaluate(&b, &c).unwrap());
            prop_assert_eq!(evaluate(&Formula::and(a.clone(), b.clone()), &c).unwrap(), x && y);
            prop_assert_eq!(evaluate(&Formula::or(a.clone(), b.clone()), &c).unwrap(), x || y);
            prop_assert_eq!(evaluate(&Formula::not(a.clone()), &c).unwrap(), !x);
            prop_assert_eq!(evaluate(&Formula::conjoin(a.clone(), b.clone()), &c).unwrap(), x && y);
            prop_assert_eq!(evaluate(&Formula::disjoin(a.clone(), b.clone()), &c).unwrap(), x || y);
            prop_assert_eq!(evaluate(&Formula::negate(a.clone()), &c).unwrap(), !x);
        }
    }
}
