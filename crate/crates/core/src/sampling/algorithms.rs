use std::collections::{BTreeMap, HashSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Algorithm, AlgorithmId, DeadBlock, Mode, SampleSet, SamplingContext, SamplingError, Skip};
use crate::covering::{generate_covering_array_with, TWiseSpec};
use crate::cppscan::{normalize_path, FileVariabilityModel};
use crate::formula::{Configuration, Formula, OptionId, Space};
use crate::satsolver::{ModelSolver, Polarity, SolveError};

fn start(model: &FileVariabilityModel, alg: Algorithm, ctx: &SamplingContext) -> (SampleSet, Space) {
    let set = SampleSet::new(AlgorithmId::Single(alg), model, ctx.mode());
    let space = set.space.clone();
    (set, space)
}

/// Two configurations: as many options enabled as possible, then as many
/// disabled as possible.
pub fn most_enabled_disabled(model: &FileVariabilityModel, ctx: &SamplingContext) -> Result<SampleSet, SamplingError> {
    let (mut set, space) = start(model, Algorithm::MostEnabledDisabled, ctx);
    match ctx.mode() {
        Mode::Unconstrained => {
            set.push(Configuration::uniform(space.clone(), true));
            set.push(Configuration::uniform(space, false));
        }
        Mode::Constrained => {
            let solver = ModelSolver::new(&ctx.model_for(&space), &space, ctx.solver);
            for p in [Polarity::Enabled, Polarity::Disabled] {
                let c = solver.optimize(&[], p)?.ok_or(SolveError::Unsatisfiable)?;
                set.push(c);
            }
        }
    }
    Ok(set)
}

/// Per option, a configuration setting it to `!background` and as many other
/// options as possible to `background`.
fn one_flipped(
    model: &FileVariabilityModel,
    ctx: &SamplingContext,
    alg: Algorithm,
    background: bool,
) -> Result<SampleSet, SamplingError> {
    let (mut set, space) = start(model, alg, ctx);
    if space.is_empty() {
        return empty_space_default(set, ctx);
    }
    let solver =
        (ctx.mode() == Mode::Constrained).then(|| ModelSolver::new(&ctx.model_for(&space), &space, ctx.solver));
    let polarity = if background { Polarity::Enabled } else { Polarity::Disabled };
    for (i, option) in space.options().iter().enumerate() {
        let c = match &solver {
            None => {
                let mut values = vec![background; space.len()];
                values[i] = !background;
                Some(Configuration::new(space.clone(), values))
            }
            Some(solver) => solver.optimize(&[solver.focus_lit(i, !background)], polarity)?,
        };
        match c {
            Some(c) => {
                set.push(c);
            }
            None => set.skips.push(Skip {
                option: option.clone(),
                value: !background,
                reason: format!(
                    "no valid configuration has {option} {}",
                    if background { "disabled" } else { "enabled" }
                ),
            }),
        }
    }
    if set.is_empty() {
        return empty_space_default(set, ctx);
    }
    Ok(set)
}

pub fn one_disabled(model: &FileVariabilityModel, ctx: &SamplingContext) -> Result<SampleSet, SamplingError> {
    one_flipped(model, ctx, Algorithm::OneDisabled, true)
}

pub fn one_enabled(model: &FileVariabilityModel, ctx: &SamplingContext) -> Result<SampleSet, SamplingError> {
    one_flipped(model, ctx, Algorithm::OneEnabled, false)
}

/// A single configuration with every option disabled where the constraints
/// allow it.
fn empty_space_default(mut set: SampleSet, ctx: &SamplingContext) -> Result<SampleSet, SamplingError> {
    let space = set.space.clone();
    let c = match ctx.mode() {
        Mode::Unconstrained => Configuration::uniform(space, false),
        Mode::Constrained => ModelSolver::new(&ctx.model_for(&space), &space, ctx.solver)
            .find_preferring(&[], false)?
            .ok_or(SolveError::Unsatisfiable)?,
    };
    set.push(c);
    Ok(set)
}

fn fnv64(text: &str) -> u64 {
    text.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3))
}

/// `n` distinct valid configurations drawn uniformly (rejecting invalid and
/// repeated draws), or all valid configurations when there are at most `n`.
/// The generator is seeded from `seed` and the file path.
pub fn random_sample(
    model: &FileVariabilityModel,
    ctx: &SamplingContext,
    n: usize,
    seed: u64,
) -> Result<SampleSet, SamplingError> {
    assert!(n >= 1, "random sampling needs n >= 1");
    let (mut set, space) = start(model, Algorithm::Random { n, seed }, ctx);
    let solver = ModelSolver::new(&ctx.model_for(&space), &space, ctx.solver);
    let small = space.len() < usize::BITS as usize && (1usize << space.len()) <= n;
    let enumeration = if small || ctx.mode() == Mode::Constrained { Some(solver.enumerate(n + 1)?) } else { None };
    if let Some(e) = enumeration.filter(|e| e.exhaustive) {
        set.configurations = e.configurations;
        set.exhaustive = Some(true);
        return Ok(set);
    }
    set.exhaustive = Some(false);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ fnv64(&normalize_path(&model.file)));
    let mut seen = HashSet::new();
    let mut attempts = 0u64;
    while set.len() < n {
        attempts += 1;
        if attempts > ctx.rejection_cap {
            return Err(SamplingError::RejectionLimit { attempts: ctx.rejection_cap });
        }
        let values: Vec<bool> = (0..space.len()).map(|_| rng.gen::<bool>()).collect();
        if !seen.insert(values.clone()) {
            continue;
        }
        if ctx.mode() == Mode::Constrained {
            let lits: Vec<_> = values.iter().enumerate().map(|(i, &v)| solver.focus_lit(i, v)).collect();
            if !solver.satisfiable(&lits)? {
                continue;
            }
        }
        set.push(Configuration::new(space.clone(), values));
    }
    Ok(set)
}

/// Greedy cover of the conditional blocks: each new configuration starts
/// from the first uncovered block and adds further uncovered blocks, in file
/// order, while they stay jointly satisfiable. Open options are disabled.
pub fn statement_coverage(model: &FileVariabilityModel, ctx: &SamplingContext) -> Result<SampleSet, SamplingError> {
    let (mut set, space) = start(model, Algorithm::StatementCoverage, ctx);
    let blocks: Vec<_> = model.coverage_blocks(ctx.include_header_blocks).collect();
    let pcs: Vec<Formula> = blocks.iter().map(|b| model.effective_pc(b)).collect();
    let (solver, lits) = ModelSolver::with_indicators(&ctx.model_for(&space), &space, &pcs, ctx.solver);
    if !solver.satisfiable(&[])? {
        return Err(SolveError::Unsatisfiable.into());
    }

    let mut uncovered: Vec<usize> = Vec::new();
    for (i, b) in blocks.iter().enumerate() {
        if solver.satisfiable(&[lits[i]])? {
            uncovered.push(i);
        } else {
            set.dead_blocks.push(DeadBlock {
                file: b.file.clone(),
                start_line: b.start_line,
                presence_condition: pcs[i].clone(),
            });
        }
    }
    while let Some(&first) = uncovered.first() {
        let mut working = vec![lits[first]];
        for &b in &uncovered[1..] {
            working.push(lits[b]);
            if !solver.satisfiable(&working)? {
                working.pop();
            }
        }
        let c = solver.find_preferring(&working, false)?.expect("working set is satisfiable");
        uncovered.retain(|&b| !pcs[b].eval_or(&c, false));
        set.push(c);
    }
    if set.is_empty() {
        return empty_space_default(set, ctx);
    }
    Ok(set)
}

/// Option order for covering-array generation: most frequent in block
/// conditions first, then by name.
fn parameter_order(model: &FileVariabilityModel, space: &Space) -> Vec<OptionId> {
    let mut counts: BTreeMap<&OptionId, usize> = space.options().iter().map(|o| (o, 0)).collect();
    for b in &model.blocks {
        for v in b.presence_condition.vars() {
            if let Some(c) = counts.get_mut(&v) {
                *c += 1;
            }
        }
    }
    let mut order: Vec<OptionId> = space.options().to_vec();
    order.sort_by(|a, b| counts[b].cmp(&counts[a]).then_with(|| a.cmp(b)));
    order
}

/// Covering array of strength `t` over the model's options.
pub fn t_wise(model: &FileVariabilityModel, ctx: &SamplingContext, t: usize) -> Result<SampleSet, SamplingError> {
    assert!((1..=u8::MAX as usize).contains(&t), "strength out of range");
    let (mut set, space) = start(model, Algorithm::TWise(t as u8), ctx);
    let spec = TWiseSpec::new(t, parameter_order(model, &space), ctx.model_for(&space));
    for c in generate_covering_array_with(&spec, &ctx.covering)? {
        set.push(c);
    }
    Ok(set)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cppscan::scan_file;
    use crate::formula::{evaluate, parse_formula};
    use crate::satsolver::ConstraintModel;

    fn three_options() -> FileVariabilityModel {
        scan_file(
            "#ifdef A\ncode1\n#endif\n#ifdef B\ncode2\n#else\ncode3\n#endif\n#ifdef C\ncode4\n#endif\n",
            "three_options.c",
        )
        .unwrap()
    }

    fn with_options(names: &str) -> FileVariabilityModel {
        let cond = names.split_whitespace().collect::<Vec<_>>().join(" && ");
        let text = if cond.is_empty() { String::new() } else { format!("#if {cond}\n#endif\n") };
        scan_file(&text, "f.c").unwrap()
    }

    fn constrained(text: &str) -> SamplingContext {
        SamplingContext::constrained(ConstraintModel::from_formula(parse_formula(text).unwrap(), "t"))
    }

    fn bits(set: &SampleSet) -> Vec<String> {
        set.configurations.iter().map(|c| c.to_bits()).collect()
    }

    #[test]
    fn most_enabled_disabled_examples() {
        let ctx = SamplingContext::default();
        assert_eq!(bits(&most_enabled_disabled(&three_options(), &ctx).unwrap()), ["111", "000"]);
        assert_eq!(bits(&most_enabled_disabled(&with_options(""), &ctx).unwrap()), [""]);
        let set = most_enabled_disabled(&with_options("A B C"), &constrained("A || B")).unwrap();
        assert_eq!(set.configurations[1].enabled_count(), 1);
    }

    #[test]
    fn one_disabled_and_enabled_examples() {
        let ctx = SamplingContext::default();
        assert_eq!(bits(&one_disabled(&three_options(), &ctx).unwrap()), ["011", "101", "110"]);
        assert_eq!(bits(&one_enabled(&three_options(), &ctx).unwrap()), ["100", "010", "001"]);
        assert_eq!(bits(&one_enabled(&with_options("A"), &ctx).unwrap()), ["1"]);

        let set = one_disabled(&with_options("A B C"), &constrained("A")).unwrap();
        assert_eq!(bits(&set), ["101", "110"]);
        assert_eq!(set.skips.len(), 1);
        assert_eq!(set.skips[0].option.as_str(), "A");
    }

    #[test]
    fn random_examples() {
        let ctx = SamplingContext::default();
        let all = random_sample(&with_options("A B"), &ctx, 10, 1).unwrap();
        assert_eq!(all.len(), 4);
        assert_eq!(all.exhaustive, Some(true));

        let big = with_options("A B C D E F G H");
        let once = random_sample(&big, &ctx, 1, 42).unwrap();
        assert_eq!(once, random_sample(&big, &ctx, 1, 42).unwrap());
        assert_eq!(once.exhaustive, Some(false));
        let five = random_sample(&big, &ctx, 5, 42).unwrap();
        assert_eq!(five.len(), 5);

        let only = random_sample(&with_options("A B"), &constrained("!A && !B"), 5, 3).unwrap();
        assert_eq!(bits(&only), ["00"]);
        assert_eq!(only.exhaustive, Some(true));
    }

    #[test]
    fn sparse_constraints_hit_the_rejection_cap() {
        let model = with_options("A B C D E F G H I J K L");
        let ctx = SamplingContext { rejection_cap: 20, ..constrained("A && B && C && D && E && F && G && (H || I)") };
        let err = random_sample(&model, &ctx, 2, 0).unwrap_err();
        assert!(err.is_resource_limit());
    }

    #[test]
    fn statement_coverage_examples() {
        let ctx = SamplingContext::default();
        let set = statement_coverage(&three_options(), &ctx).unwrap();
        assert_eq!(bits(&set), ["111", "000"]);

        let none = statement_coverage(&with_options(""), &ctx).unwrap();
        assert_eq!(none.len(), 1);

        let split = scan_file("#ifdef A\n#endif\n#ifndef A\n#endif\n", "s.c").unwrap();
        assert_eq!(statement_coverage(&split, &ctx).unwrap().len(), 2);

        let dead = scan_file("#if 0\n#endif\n#ifdef A\n#endif\n", "d.c").unwrap();
        let set = statement_coverage(&dead, &ctx).unwrap();
        assert_eq!(set.dead_blocks.len(), 1);
        assert_eq!(bits(&set), ["1"]);
    }

    #[test]
    fn statement_coverage_respects_constraints() {
        let ctx = constrained("!(A && B)");
        let m = scan_file("#ifdef A\n#endif\n#ifdef B\n#endif\n#if A && B\n#endif\n", "c.c").unwrap();
        let set = statement_coverage(&m, &ctx).unwrap();
        assert_eq!(set.dead_blocks.len(), 1);
        assert_eq!(set.len(), 2);
        let f = parse_formula("!(A && B)").unwrap();
        assert!(set.configurations.iter().all(|c| evaluate(&f, c).unwrap()));
    }

    #[test]
    fn t_wise_sizes() {
        let ctx = SamplingContext::default();
        assert_eq!(t_wise(&three_options(), &ctx, 2).unwrap().len(), 4);
        assert_eq!(t_wise(&three_options(), &ctx, 3).unwrap().len(), 8);
        assert_eq!(t_wise(&with_options("A B"), &ctx, 6).unwrap().len(), 4);
        assert_eq!(
            parameter_order(&three_options(), &three_options().options.iter().cloned().collect()),
            ["B", "A", "C"].map(crate::formula::opt)
        );
    }
}
