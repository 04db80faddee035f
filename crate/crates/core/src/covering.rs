//! t-wise covering arrays over boolean options, with optional constraints.
//!
//! Generation is a greedy in-parameter-order construction: start from every
//! value combination of the first `t` parameters, then add one parameter at
//! a time, first choosing its value in existing rows to cover the most new
//! tuples (horizontal growth), then adding or filling rows for whatever is
//! left (vertical growth). Under constraints every partial row is kept
//! extendable to a valid configuration by a satisfiability check, and rows
//! are completed by the solver at the end.

use std::collections::HashMap;
use std::io::Write;

use serde::Serialize;
use thiserror::Error;

use crate::formula::{Configuration, Lit, OptionId, Space};
use crate::satsolver::{ConstraintModel, ModelSolver, SolveError, SolverConfig};

pub const DEFAULT_TUPLE_BUDGET: u64 = 50_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CoveringError {
    #[error("{needed} tuples exceed the tuple budget of {budget}")]
    TupleBudget { needed: u128, budget: u64 },
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error("configuration does not assign option `{0}`")]
    SpaceMismatch(OptionId),
}

impl CoveringError {
    pub fn is_resource_limit(&self) -> bool {
        matches!(self, CoveringError::TupleBudget { .. } | CoveringError::Solve(SolveError::ResourceLimit { .. }))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CoveringConfig {
    pub solver: SolverConfig,
    pub tuple_budget: u64,
}

impl Default for CoveringConfig {
    fn default() -> Self {
        CoveringConfig { solver: SolverConfig::default(), tuple_budget: DEFAULT_TUPLE_BUDGET }
    }
}

/// Strength, parameters in processing order, and constraints.
#[derive(Debug, Clone, PartialEq)]
pub struct TWiseSpec {
    pub t: usize,
    pub options: Vec<OptionId>,
    pub constraints: ConstraintModel,
}

impl TWiseSpec {
    pub fn new(t: usize, options: Vec<OptionId>, constraints: ConstraintModel) -> Self {
        assert!(t >= 1, "strength must be at least 1");
        let mut seen = std::collections::HashSet::new();
        let options = options.into_iter().filter(|o| seen.insert(o.clone())).collect();
        TWiseSpec { t, options, constraints }
    }

    pub fn unconstrained(t: usize, options: Vec<OptionId>) -> Self {
        let space = Space::new(options.iter().cloned());
        Self::new(t, options, ConstraintModel::unconstrained(space))
    }

    pub fn space(&self) -> Space {
        Space::new(self.options.iter().cloned())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum GapReason {
    Uncovered,
    /// No valid configuration contains the tuple.
    InvalidUnderConstraints,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CoverageGap {
    pub options: Vec<OptionId>,
    pub values: Vec<bool>,
    pub reason: GapReason,
}

/// True when no gap is a genuinely uncovered tuple.
pub fn fully_covered(gaps: &[CoverageGap]) -> bool {
    gaps.iter().all(|g| g.reason != GapReason::Uncovered)
}

/// Smallest possible array size without constraints.
pub fn size_lower_bound(t: usize, n: usize) -> usize {
    1usize << t.min(n)
}

fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc.saturating_mul((n - i) as u128) / (i as u128 + 1))
}

fn check_budget(n: usize, t: usize, budget: u64) -> Result<(), CoveringError> {
    let needed = binomial(n, t).saturating_mul(1u128 << t);
    if needed > u128::from(budget) {
        return Err(CoveringError::TupleBudget { needed, budget });
    }
    Ok(())
}

/// All `k`-subsets of `0..n` in lexicographic order.
fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur: Vec<usize> = (0..k).collect();
    if k > n {
        return out;
    }
    loop {
        out.push(cur.clone());
        let Some(i) = (0..k).rev().find(|&i| cur[i] < n - k + i) else { return out };
        cur[i] += 1;
        for j in i + 1..k {
            cur[j] = cur[j - 1] + 1;
        }
    }
}

/// Value of column `j` (of `t`) in tuple index `bits`; the first column is
/// the most significant bit and `1` means enabled.
fn tuple_value(bits: usize, j: usize, t: usize) -> bool {
    bits >> (t - 1 - j) & 1 == 1
}

/// Answers "can this partial assignment be extended to a valid
/// configuration?", caching solver calls.
struct Feasibility {
    solver: Option<ModelSolver>,
    /// Parameter index → index in the focus space.
    focus_index: Vec<usize>,
    cache: HashMap<Vec<Lit>, bool>,
}

impl Feasibility {
    fn new(spec: &TWiseSpec, config: SolverConfig) -> Self {
        let space = spec.space();
        let focus_index = spec.options.iter().map(|o| space.index_of(o.as_str()).unwrap()).collect();
        let solver = (!spec.constraints.is_trivial())
            .then(|| ModelSolver::new(&spec.constraints.extended(&space), &space, config));
        Feasibility { solver, focus_index, cache: HashMap::new() }
    }

    fn check<I: IntoIterator<Item = (usize, bool)>>(&mut self, assigned: I) -> Result<bool, SolveError> {
        let Some(solver) = &self.solver else { return Ok(true) };
        let mut lits: Vec<Lit> = assigned.into_iter().map(|(p, v)| solver.focus_lit(self.focus_index[p], v)).collect();
        lits.sort_unstable();
        if let Some(&known) = self.cache.get(&lits) {
            return Ok(known);
        }
        let answer = solver.satisfiable(&lits)?;
        self.cache.insert(lits, answer);
        Ok(answer)
    }

    fn row(&mut self, row: &[Option<bool>], extra: &[(usize, bool)]) -> Result<bool, SolveError> {
        let assigned = row.iter().enumerate().filter_map(|(p, v)| v.map(|v| (p, v))).chain(extra.iter().copied());
        self.check(assigned)
    }
}

pub fn generate_covering_array(spec: &TWiseSpec) -> Result<Vec<Configuration>, CoveringError> {
    generate_covering_array_with(spec, &CoveringConfig::default())
}

/// Builds a covering array: every `t`-tuple of option values that occurs in
/// some valid configuration occurs in some returned row, and every row is
/// valid. Rows are distinct configurations over `spec.space()`.
pub fn generate_covering_array_with(
    spec: &TWiseSpec,
    config: &CoveringConfig,
) -> Result<Vec<Configuration>, CoveringError> {
    let n = spec.options.len();
    let space = spec.space();
    let model = spec.constraints.extended(&space);
    let solver = ModelSolver::new(&model, &space, config.solver);
    if !solver.satisfiable(&[])? {
        return Err(SolveError::Unsatisfiable.into());
    }
    if spec.t >= n {
        return Ok(solver.enumerate(usize::MAX)?.configurations);
    }
    let t = spec.t;
    check_budget(n, t, config.tuple_budget)?;
    let mut feasible = Feasibility::new(spec, config.solver);

    let mut rows: Vec<Vec<Option<bool>>> = Vec::new();
    for bits in (0..1usize << t).rev() {
        let assigned: Vec<(usize, bool)> = (0..t).map(|j| (j, tuple_value(bits, j, t))).collect();
        if feasible.check(assigned.iter().copied())? {
            let mut row = vec![None; n];
            for (p, v) in assigned {
                row[p] = Some(v);
            }
            rows.push(row);
        }
    }

    for i in t..n {
        let groups: Vec<Vec<usize>> = subsets(i, t - 1)
            .into_iter()
            .map(|mut s| {
                s.push(i);
                s
            })
            .collect();
        let mut covered = vec![vec![false; 1 << t]; groups.len()];
        let index_in_row = |row: &[Option<bool>], cols: &[usize], last: bool| -> Option<usize> {
            let mut bits = 0;
            for &c in &cols[..t - 1] {
                bits = bits << 1 | usize::from(row[c]?);
            }
            Some(bits << 1 | usize::from(last))
        };

        for row in rows.iter_mut() {
            let mut best: Option<(usize, bool)> = None;
            for v in [true, false] {
                let gain = groups
                    .iter()
                    .zip(&covered)
                    .filter(|(cols, cov)| index_in_row(row, cols, v).is_some_and(|b| !cov[b]))
                    .count();
                if gain > best.map_or(0, |(g, _)| g) && feasible.row(row, &[(i, v)])? {
                    best = Some((gain, v));
                }
            }
            if let Some((_, v)) = best {
                row[i] = Some(v);
                for (cols, cov) in groups.iter().zip(covered.iter_mut()) {
                    if let Some(b) = index_in_row(row, cols, v) {
                        cov[b] = true;
                    }
                }
            }
        }

        for (g, cols) in groups.iter().enumerate() {
            for bits in (0..1usize << t).rev() {
                if covered[g][bits] {
                    continue;
                }
                let tuple: Vec<(usize, bool)> =
                    cols.iter().enumerate().map(|(j, &c)| (c, tuple_value(bits, j, t))).collect();
                if !feasible.check(tuple.iter().copied())? {
                    continue;
                }
                let mut placed = false;
                for row in rows.iter_mut() {
                    if tuple.iter().any(|&(c, v)| row[c].is_some_and(|x| x != v)) {
                        continue;
                    }
                    let missing: Vec<(usize, bool)> =
                        tuple.iter().copied().filter(|&(c, _)| row[c].is_none()).collect();
                    if missing.is_empty() || feasible.row(row, &missing)? {
                        for (c, v) in missing {
                            row[c] = Some(v);
                        }
                        placed = true;
                        break;
                    }
                }
                if !placed {
                    let mut row = vec![None; n];
                    for (c, v) in tuple {
                        row[c] = Some(v);
                    }
                    rows.push(row);
                }
                covered[g][bits] = true;
            }
        }
    }

    let mut out: Vec<Configuration> = Vec::with_capacity(rows.len());
    for row in rows {
        let configuration = if row.iter().all(Option::is_some) {
            to_configuration(&space, &spec.options, row.iter().map(|v| v.unwrap()))
        } else if spec.constraints.is_trivial() {
            to_configuration(&space, &spec.options, row.iter().map(|v| v.unwrap_or(true)))
        } else {
            let lits: Vec<Lit> = row
                .iter()
                .enumerate()
                .filter_map(|(p, v)| v.map(|v| solver.focus_lit(feasible.focus_index[p], v)))
                .collect();
            solver.find(&lits)?.expect("partial rows are kept satisfiable")
        };
        if !out.contains(&configuration) {
            out.push(configuration);
        }
    }
    Ok(out)
}

fn to_configuration<I: Iterator<Item = bool>>(space: &Space, order: &[OptionId], values: I) -> Configuration {
    let mut bits = vec![false; space.len()];
    for (o, v) in order.iter().zip(values) {
        bits[space.index_of(o.as_str()).unwrap()] = v;
    }
    Configuration::new(space.clone(), bits)
}

pub fn verify_coverage(configs: &[Configuration], spec: &TWiseSpec) -> Result<Vec<CoverageGap>, CoveringError> {
    verify_coverage_with(configs, spec, &CoveringConfig::default())
}

/// Lists every `t`-tuple (`t` capped at the number of options) that no row
/// covers, classifying each as uncovered or impossible under the
/// constraints. An empty result means full coverage.
pub fn verify_coverage_with(
    configs: &[Configuration],
    spec: &TWiseSpec,
    config: &CoveringConfig,
) -> Result<Vec<CoverageGap>, CoveringError> {
    let n = spec.options.len();
    let t = spec.t.min(n);
    if t == 0 {
        return Ok(Vec::new());
    }
    check_budget(n, t, config.tuple_budget)?;
    let matrix: Vec<Vec<bool>> = configs
        .iter()
        .map(|c| {
            spec.options
                .iter()
                .map(|o| c.get(o.as_str()).ok_or_else(|| CoveringError::SpaceMismatch(o.clone())))
                .collect()
        })
        .collect::<Result<_, _>>()?;
    let mut feasible = Feasibility::new(spec, config.solver);
    let mut gaps = Vec::new();
    for cols in subsets(n, t) {
        let mut seen = vec![false; 1 << t];
        for row in &matrix {
            seen[cols.iter().fold(0, |b, &c| b << 1 | usize::from(row[c]))] = true;
        }
        for (bits, _) in seen.iter().enumerate().filter(|(_, s)| !**s) {
            let values: Vec<bool> = (0..t).map(|j| tuple_value(bits, j, t)).collect();
            let valid = feasible.check(cols.iter().copied().zip(values.iter().copied()))?;
            gaps.push(CoverageGap {
                options: cols.iter().map(|&c| spec.options[c].clone()).collect(),
                values,
                reason: if valid { GapReason::Uncovered } else { GapReason::InvalidUnderConstraints },
            });
        }
    }
    Ok(gaps)
}

/// CSV with a header of option names and one `0`/`1` row per configuration.
pub fn write_csv<W: Write>(space: &Space, configs: &[Configuration], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(space.options().iter().map(|o| o.as_str()))?;
    for c in configs {
        let projected = if c.space() == space { c.clone() } else { c.project(space) };
        w.write_record(projected.values().iter().map(|&v| if v { "1" } else { "0" }))?;
    }
    w.flush()?;
    Ok(())
}
