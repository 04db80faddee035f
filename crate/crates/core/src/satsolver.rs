//! DPLL satisfiability with unit propagation and pure-literal elimination,
//! plus branch-and-bound search for models with the most options set to a
//! given polarity.
//!
//! Branching is chronological and deterministic: variables are decided in
//! ascending order (option variables first) and the preferred value is tried
//! first. A decision budget turns intractable instances into
//! [`SolveError::ResourceLimit`].

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::formula::{
    parse_formula, CnfBuilder, CnfFormula, Configuration, Formula, FormulaError, Lit, OptionId, PartialAssignment,
    Space, VarOrigin,
};

pub const DEFAULT_DECISION_BUDGET: u64 = 10_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SolveError {
    #[error("decision budget of {budget} exhausted")]
    ResourceLimit { budget: u64 },
    #[error("no valid configuration exists")]
    Unsatisfiable,
    #[error("constraint mentions undeclared option `{0}`")]
    UndeclaredOption(OptionId),
    #[error(transparent)]
    Formula(#[from] FormulaError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SolverConfig {
    pub decision_budget: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig { decision_budget: DEFAULT_DECISION_BUDGET }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Polarity {
    Enabled,
    Disabled,
}

impl Polarity {
    pub fn value(self) -> bool {
        self == Polarity::Enabled
    }

    pub fn flip(self) -> Polarity {
        match self {
            Polarity::Enabled => Polarity::Disabled,
            Polarity::Disabled => Polarity::Enabled,
        }
    }
}

impl fmt::Display for Polarity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(if self.value() { "enabled" } else { "disabled" })
    }
}

/// Which configurations are valid: `formula` over the options in `space`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConstraintModel {
    space: Space,
    formula: Formula,
    pub source: String,
}

impl ConstraintModel {
    pub fn new(space: Space, formula: Formula, source: impl Into<String>) -> Result<Self, SolveError> {
        if let Some(missing) = formula.vars().into_iter().find(|v| !space.contains(v.as_str())) {
            return Err(SolveError::UndeclaredOption(missing));
        }
        Ok(ConstraintModel { space, formula, source: source.into() })
    }

    /// Space is exactly the options mentioned by `formula`.
    pub fn from_formula(formula: Formula, source: impl Into<String>) -> Self {
        ConstraintModel { space: Space::new(formula.vars()), formula, source: source.into() }
    }

    pub fn unconstrained(space: Space) -> Self {
        ConstraintModel { space, formula: Formula::True, source: "none".into() }
    }

    /// Parses a constraint file: DIMACS (with `c map` names) when it has a
    /// `p cnf` line, otherwise one formula per line, conjoined; `#` starts a
    /// comment.
    pub fn parse(text: &str, source: impl Into<String>) -> Result<Self, SolveError> {
        let is_dimacs = text.lines().any(|l| l.trim_start().starts_with("p cnf"));
        let formula = if is_dimacs {
            CnfFormula::from_dimacs(text)?.to_formula()
        } else {
            let mut parts = Vec::new();
            for (i, raw) in text.lines().enumerate() {
                let line = raw.split('#').next().unwrap_or("").trim();
                if line.is_empty() {
                    continue;
                }
                let f = parse_formula(line).map_err(|e| match e {
                    FormulaError::Syntax { message, .. } => {
                        FormulaError::Syntax { position: i + 1, message: format!("line {}: {message}", i + 1) }
                    }
                    other => other,
                })?;
                parts.push(f);
            }
            Formula::conjoin_all(parts)
        };
        Ok(Self::from_formula(formula, source))
    }

    pub fn space(&self) -> &Space {
        &self.space
    }

    pub fn formula(&self) -> &Formula {
        &self.formula
    }

    pub fn is_trivial(&self) -> bool {
        self.formula == Formula::True
    }

    /// Same constraints over a larger space.
    pub fn extended(&self, extra: &Space) -> Self {
        ConstraintModel { space: self.space.union(extra), formula: self.formula.clone(), source: self.source.clone() }
    }

    pub fn is_valid(&self, c: &Configuration) -> Result<bool, FormulaError> {
        crate::formula::evaluate(&self.formula, c)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct SolveStats {
    pub decisions: u64,
    pub propagations: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SolveStatus {
    /// Model restricted to the named (non-auxiliary) variables.
    Sat(Configuration),
    Unsat,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SolveResult {
    pub status: SolveStatus,
    pub stats: SolveStats,
}

impl SolveResult {
    pub fn is_sat(&self) -> bool {
        matches!(self.status, SolveStatus::Sat(_))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Enumeration {
    pub configurations: Vec<Configuration>,
    /// True when every valid configuration was returned.
    pub exhaustive: bool,
}

fn code(l: Lit) -> usize {
    2 * (l.unsigned_abs() as usize - 1) + usize::from(l < 0)
}

fn occurrence_lists(clauses: &[Vec<Lit>], num_vars: usize) -> Vec<Vec<u32>> {
    let mut occ = vec![Vec::new(); 2 * num_vars];
    for (ci, clause) in clauses.iter().enumerate() {
        for &l in clause {
            occ[code(l)].push(ci as u32);
        }
    }
    occ
}

#[derive(Debug, Clone, Copy)]
struct Frame {
    trail_len: usize,
    var: u32,
    value: bool,
    flipped: bool,
    order_pos: usize,
}

enum Flow {
    Stop,
    Continue,
}

struct Objective<'a> {
    vars: &'a [u32],
    polarity: bool,
    best: Option<usize>,
}

struct Engine<'a> {
    base: &'a [Vec<Lit>],
    base_occ: &'a [Vec<u32>],
    extra: &'a [Vec<Lit>],
    extra_occ: Vec<Vec<u32>>,
    value: Vec<i8>,
    trail: Vec<Lit>,
    qhead: usize,
    frames: Vec<Frame>,
    order: &'a [u32],
    prefer: &'a [bool],
    pure_literals: bool,
    budget: u64,
    stats: SolveStats,
}

impl<'a> Engine<'a> {
    fn clause(&self, ci: usize) -> &'a [Lit] {
        if ci < self.base.len() {
            &self.base[ci]
        } else {
            &self.extra[ci - self.base.len()]
        }
    }

    fn lit_value(&self, l: Lit) -> Option<bool> {
        match self.value[l.unsigned_abs() as usize] {
            0 => None,
            v => Some((v > 0) == (l > 0)),
        }
    }

    fn assign(&mut self, l: Lit) {
        self.value[l.unsigned_abs() as usize] = if l > 0 { 1 } else { -1 };
        self.trail.push(l);
    }

    /// Checks one clause after one of its literals became false; returns
    /// false on conflict.
    fn visit(&mut self, ci: usize) -> bool {
        let clause = self.clause(ci);
        let mut open = None;
        let mut count = 0;
        for &m in clause {
            match self.lit_value(m) {
                Some(true) => return true,
                Some(false) => {}
                None => {
                    count += 1;
                    open = Some(m);
                }
            }
        }
        match count {
            0 => false,
            1 => {
                self.stats.propagations += 1;
                self.assign(open.unwrap());
                true
            }
            _ => true,
        }
    }

    fn propagate(&mut self) -> bool {
        while self.qhead < self.trail.len() {
            let falsified = code(-self.trail[self.qhead]);
            self.qhead += 1;
            for k in 0..self.base_occ[falsified].len() {
                if !self.visit(self.base_occ[falsified][k] as usize) {
                    return false;
                }
            }
            for k in 0..self.extra_occ[falsified].len() {
                let ci = self.base.len() + self.extra_occ[falsified][k] as usize;
                if !self.visit(ci) {
                    return false;
                }
            }
        }
        true
    }

    fn assign_pure_literals(&mut self) {
        let n = self.value.len() - 1;
        let mut seen = vec![0u8; n + 1];
        for ci in 0..self.base.len() + self.extra.len() {
            let clause = self.clause(ci);
            if clause.iter().any(|&l| self.lit_value(l) == Some(true)) {
                continue;
            }
            for &l in clause {
                if self.lit_value(l).is_none() {
                    seen[l.unsigned_abs() as usize] |= if l > 0 { 1 } else { 2 };
                }
            }
        }
        for (v, &mark) in seen.iter().enumerate().take(n + 1).skip(1) {
            match mark {
                1 => self.assign(v as Lit),
                2 => self.assign(-(v as Lit)),
                _ => {}
            }
        }
        self.qhead = self.trail.len();
    }

    fn undo_to(&mut self, len: usize) {
        for l in self.trail.drain(len..) {
            self.value[l.unsigned_abs() as usize] = 0;
        }
        self.qhead = len;
    }

    /// Flips the most recent unflipped decision; false when the tree is exhausted.
    fn backtrack(&mut self) -> bool {
        while let Some(frame) = self.frames.pop() {
            self.undo_to(frame.trail_len);
            if !frame.flipped {
                let value = !frame.value;
                self.frames.push(Frame { value, flipped: true, ..frame });
                self.assign(if value { frame.var as Lit } else { -(frame.var as Lit) });
                return true;
            }
        }
        false
    }

    fn pruned(&self, objective: &Option<Objective<'_>>) -> bool {
        let Some(obj) = objective else { return false };
        let Some(best) = obj.best else { return false };
        let mut bound = 0;
        for &v in obj.vars {
            match self.value[v as usize] {
                0 => bound += 1,
                x if (x > 0) == obj.polarity => bound += 1,
                _ => {}
            }
        }
        bound <= best
    }

    fn objective_count(&self, obj: &Objective<'_>) -> usize {
        obj.vars.iter().filter(|&&v| (self.value[v as usize] > 0) == obj.polarity).count()
    }

    fn run<F>(
        &mut self,
        assumptions: &[Lit],
        mut objective: Option<Objective<'_>>,
        mut on_model: F,
    ) -> Result<(), SolveError>
    where
        F: FnMut(&Self) -> Flow,
    {
        for ci in 0..self.base.len() + self.extra.len() {
            match self.clause(ci) {
                [] => return Ok(()),
                [l] => match self.lit_value(*l) {
                    Some(false) => return Ok(()),
                    Some(true) => {}
                    None => self.assign(*l),
                },
                _ => {}
            }
        }
        for &l in assumptions {
            match self.lit_value(l) {
                Some(false) => return Ok(()),
                Some(true) => {}
                None => self.assign(l),
            }
        }
        loop {
            if !self.propagate() || self.pruned(&objective) {
                if !self.backtrack() {
                    return Ok(());
                }
                continue;
            }
            if self.pure_literals {
                self.assign_pure_literals();
            }
            let start = self.frames.last().map_or(0, |f| f.order_pos + 1);
            let next = (start..self.order.len()).find(|&p| self.value[self.order[p] as usize] == 0);
            match next {
                None => {
                    if let Some(obj) = objective.as_mut() {
                        obj.best = Some(self.objective_count(obj));
                    }
                    match on_model(self) {
                        Flow::Stop => return Ok(()),
                        Flow::Continue => {
                            if !self.backtrack() {
                                return Ok(());
                            }
                        }
                    }
                }
                Some(order_pos) => {
                    self.stats.decisions += 1;
                    if self.stats.decisions > self.budget {
                        return Err(SolveError::ResourceLimit { budget: self.budget });
                    }
                    let var = self.order[order_pos];
                    let value = self.prefer[var as usize];
                    self.frames.push(Frame { trail_len: self.trail.len(), var, value, flipped: false, order_pos });
                    self.assign(if value { var as Lit } else { -(var as Lit) });
                }
            }
        }
    }
}

/// Decides satisfiability of `cnf` with the default budget.
pub fn solve(cnf: &CnfFormula) -> Result<SolveResult, SolveError> {
    solve_with(cnf, &SolverConfig::default())
}

pub fn solve_with(cnf: &CnfFormula, config: &SolverConfig) -> Result<SolveResult, SolveError> {
    let n = cnf.num_vars();
    let occ = occurrence_lists(&cnf.clauses, n);
    let order: Vec<u32> = (1..=n as u32).collect();
    let prefer = vec![true; n + 1];
    let mut engine = Engine {
        base: &cnf.clauses,
        base_occ: &occ,
        extra: &[],
        extra_occ: vec![Vec::new(); 2 * n],
        value: vec![0; n + 1],
        trail: Vec::new(),
        qhead: 0,
        frames: Vec::new(),
        order: &order,
        prefer: &prefer,
        pure_literals: true,
        budget: config.decision_budget,
        stats: SolveStats::default(),
    };
    let mut model = None;
    engine.run(&[], None, |e| {
        model = Some(e.value.clone());
        Flow::Stop
    })?;
    let stats = engine.stats;
    let status = match model {
        Some(values) => {
            let named: Vec<(u32, &OptionId)> = cnf.named_vars().collect();
            let space = Space::new(named.iter().map(|(_, id)| (*id).clone()));
            let mut bits = vec![false; space.len()];
            for (v, id) in named {
                bits[space.index_of(id.as_str()).unwrap()] = values[v as usize] > 0;
            }
            SolveStatus::Sat(Configuration::new(space, bits))
        }
        None => SolveStatus::Unsat,
    };
    Ok(SolveResult { status, stats })
}

/// A constraint model compiled once for repeated queries.
///
/// Configurations are reported over the `focus` space. Options of the model
/// outside the focus are existentially quantified: a focus configuration is
/// valid when some assignment of the remaining options satisfies the model.
#[derive(Debug, Clone)]
pub struct ModelSolver {
    cnf: CnfFormula,
    occ: Vec<Vec<u32>>,
    focus: Space,
    focus_vars: Vec<u32>,
    order: Vec<u32>,
    formula: Formula,
    config: SolverConfig,
}

impl ModelSolver {
    pub fn new(model: &ConstraintModel, focus: &Space, config: SolverConfig) -> Self {
        Self::with_indicators(model, focus, &[], config).0
    }

    /// Also encodes each of `indicators` as a literal equivalent to it,
    /// usable as an assumption in later queries.
    pub fn with_indicators(
        model: &ConstraintModel,
        focus: &Space,
        indicators: &[Formula],
        config: SolverConfig,
    ) -> (Self, Vec<Lit>) {
        let mut builder = CnfBuilder::new();
        let focus_vars: Vec<u32> = focus.options().iter().map(|o| builder.register(o)).collect();
        for o in model.space().options() {
            builder.register(o);
        }
        for f in indicators {
            for v in f.vars() {
                builder.register(&v);
            }
        }
        builder.assert(model.formula());
        let lits: Vec<Lit> = indicators.iter().map(|f| builder.encode(f)).collect();
        let cnf = builder.finish();
        let n = cnf.num_vars() as u32;
        let named: Vec<u32> =
            (1..=n).filter(|v| matches!(cnf.origins[*v as usize - 1], VarOrigin::Option(_))).collect();
        let mut order = focus_vars.clone();
        order.extend(named.iter().copied().filter(|v| !focus_vars.contains(v)));
        order.extend((1..=n).filter(|v| matches!(cnf.origins[*v as usize - 1], VarOrigin::Aux(_))));
        let occ = occurrence_lists(&cnf.clauses, cnf.num_vars());
        let solver =
            ModelSolver { cnf, occ, focus: focus.clone(), focus_vars, order, formula: model.formula().clone(), config };
        (solver, lits)
    }

    pub fn focus(&self) -> &Space {
        &self.focus
    }

    /// Assumption literal pinning focus option `index` to `value`.
    pub fn focus_lit(&self, index: usize, value: bool) -> Lit {
        let v = self.focus_vars[index] as Lit;
        if value {
            v
        } else {
            -v
        }
    }

    /// Assumption literals for a partial assignment over focus options.
    pub fn assumptions(&self, fixed: &PartialAssignment) -> Result<Vec<Lit>, SolveError> {
        fixed
            .iter()
            .map(|(o, v)| {
                self.focus
                    .index_of(o.as_str())
                    .map(|i| self.focus_lit(i, *v))
                    .ok_or_else(|| SolveError::UndeclaredOption(o.clone()))
            })
            .collect()
    }

    fn engine<'s>(&'s self, extra: &'s [Vec<Lit>], prefer: &'s [bool], pure: bool) -> Engine<'s> {
        let n = self.cnf.num_vars();
        Engine {
            base: &self.cnf.clauses,
            base_occ: &self.occ,
            extra,
            extra_occ: occurrence_lists(extra, n),
            value: vec![0; n + 1],
            trail: Vec::new(),
            qhead: 0,
            frames: Vec::new(),
            order: &self.order,
            prefer,
            pure_literals: pure,
            budget: self.config.decision_budget,
            stats: SolveStats::default(),
        }
    }

    fn project(&self, values: &[i8]) -> Configuration {
        let bits = self.focus_vars.iter().map(|&v| values[v as usize] > 0).collect();
        Configuration::new(self.focus.clone(), bits)
    }

    fn check_model(&self, values: &[i8]) {
        if cfg!(debug_assertions) {
            let ok =
                self.formula.eval_with(&|o: &OptionId| self.cnf.var_of(o.as_str()).map(|v| values[v as usize] > 0));
            debug_assert_eq!(ok, Ok(true), "solver model violates the constraint formula");
        }
    }

    pub fn satisfiable(&self, assumptions: &[Lit]) -> Result<bool, SolveError> {
        let prefer = vec![true; self.cnf.num_vars() + 1];
        let mut engine = self.engine(&[], &prefer, true);
        let mut found = false;
        engine.run(assumptions, None, |_| {
            found = true;
            Flow::Stop
        })?;
        Ok(found)
    }

    /// First model in branching order (positive polarity first).
    pub fn find(&self, assumptions: &[Lit]) -> Result<Option<Configuration>, SolveError> {
        self.find_preferring(assumptions, true)
    }

    /// First model when every variable is tried at `value` first, so options
    /// the constraints leave open come out as `value`.
    pub fn find_preferring(&self, assumptions: &[Lit], value: bool) -> Result<Option<Configuration>, SolveError> {
        let prefer = vec![value; self.cnf.num_vars() + 1];
        let mut engine = self.engine(&[], &prefer, false);
        let mut model = None;
        engine.run(assumptions, None, |e| {
            model = Some(e.value.clone());
            Flow::Stop
        })?;
        Ok(model.map(|values| {
            self.check_model(&values);
            self.project(&values)
        }))
    }

    /// Model maximizing the number of focus options equal to `polarity`;
    /// ties go to the first model in branching order, where the preferred
    /// value of each focus option is `polarity` and options are taken in
    /// name order.
    pub fn optimize(&self, assumptions: &[Lit], polarity: Polarity) -> Result<Option<Configuration>, SolveError> {
        let mut prefer = vec![true; self.cnf.num_vars() + 1];
        for &v in &self.focus_vars {
            prefer[v as usize] = polarity.value();
        }
        let mut engine = self.engine(&[], &prefer, false);
        let objective = Objective { vars: &self.focus_vars, polarity: polarity.value(), best: None };
        let mut best: Option<Vec<i8>> = None;
        engine.run(assumptions, Some(objective), |e| {
            best = Some(e.value.clone());
            Flow::Continue
        })?;
        Ok(best.map(|values| {
            self.check_model(&values);
            self.project(&values)
        }))
    }

    /// Up to `limit` distinct focus configurations, in branching order.
    pub fn enumerate(&self, limit: usize) -> Result<Enumeration, SolveError> {
        assert!(limit >= 1, "enumeration limit must be positive");
        let prefer = vec![true; self.cnf.num_vars() + 1];
        let mut blocking: Vec<Vec<Lit>> = Vec::new();
        let mut configurations = Vec::new();
        loop {
            if configurations.len() == limit {
                return Ok(Enumeration { configurations, exhaustive: false });
            }
            let mut engine = self.engine(&blocking, &prefer, false);
            let mut model = None;
            engine.run(&[], None, |e| {
                model = Some(e.value.clone());
                Flow::Stop
            })?;
            let Some(values) = model else {
                return Ok(Enumeration { configurations, exhaustive: true });
            };
            self.check_model(&values);
            let config = self.project(&values);
            if self.focus_vars.is_empty() {
                return Ok(Enumeration { configurations: vec![config], exhaustive: true });
            }
            blocking.push(
                self.focus_vars.iter().map(|&v| if values[v as usize] > 0 { -(v as Lit) } else { v as Lit }).collect(),
            );
            configurations.push(config);
        }
    }
}

/// Valid configuration with the most options set to `polarity`.
pub fn max_polarity_model(m: &ConstraintModel, polarity: Polarity) -> Result<Configuration, SolveError> {
    constrained_extreme(m, &PartialAssignment::new(), polarity)
}

/// [`max_polarity_model`] with some options pinned by `fixed`.
pub fn constrained_extreme(
    m: &ConstraintModel,
    fixed: &PartialAssignment,
    polarity: Polarity,
) -> Result<Configuration, SolveError> {
    constrained_extreme_with(m, fixed, polarity, SolverConfig::default())
}

pub fn constrained_extreme_with(
    m: &ConstraintModel,
    fixed: &PartialAssignment,
    polarity: Polarity,
    config: SolverConfig,
) -> Result<Configuration, SolveError> {
    let focus = m.space().union(&Space::new(fixed.keys().cloned()));
    let solver = ModelSolver::new(m, &focus, config);
    let assumptions = solver.assumptions(fixed)?;
    solver.optimize(&assumptions, polarity)?.ok_or(SolveError::Unsatisfiable)
}

/// Up to `limit` distinct valid configurations over `m.space()`.
pub fn count_or_enumerate(m: &ConstraintModel, limit: usize) -> Result<Enumeration, SolveError> {
    ModelSolver::new(m, m.space(), SolverConfig::default()).enumerate(limit)
}
