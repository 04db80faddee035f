//! Clause-form translation and DIMACS exchange.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt::Write as _;

use super::{is_identifier, opt, Formula, FormulaError, OptionId};

/// A DIMACS-style literal: `+v` or `-v` for a 1-based variable index.
pub type Lit = i32;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum VarOrigin {
    Option(OptionId),
    /// Tseitin auxiliary standing for the printed source node.
    Aux(String),
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CnfFormula {
    pub clauses: Vec<Vec<Lit>>,
    /// `origins[v - 1]` describes variable `v`.
    pub origins: Vec<VarOrigin>,
}

const AUX_PREFIX: &str = "__AUX_";

impl CnfFormula {
    pub fn num_vars(&self) -> usize {
        self.origins.len()
    }

    pub fn var_of(&self, name: &str) -> Option<u32> {
        self.origins
            .iter()
            .position(|o| matches!(o, VarOrigin::Option(id) if id.as_str() == name))
            .map(|i| i as u32 + 1)
    }

    pub fn named_vars(&self) -> impl Iterator<Item = (u32, &OptionId)> + '_ {
        self.origins.iter().enumerate().filter_map(|(i, o)| match o {
            VarOrigin::Option(id) => Some((i as u32 + 1, id)),
            VarOrigin::Aux(_) => None,
        })
    }

    fn var_name(&self, v: u32) -> String {
        match &self.origins[v as usize - 1] {
            VarOrigin::Option(id) => id.to_string(),
            VarOrigin::Aux(_) => format!("{AUX_PREFIX}{v}"),
        }
    }

    /// Writes DIMACS with one `c map <index> <name>` line per variable.
    pub fn to_dimacs(&self) -> String {
        let mut out = String::new();
        for v in 1..=self.num_vars() as u32 {
            let _ = writeln!(out, "c map {v} {}", self.var_name(v));
        }
        let _ = writeln!(out, "p cnf {} {}", self.num_vars(), self.clauses.len());
        for clause in &self.clauses {
            for lit in clause {
                let _ = write!(out, "{lit} ");
            }
            out.push_str("0\n");
        }
        out
    }

    pub fn from_dimacs(text: &str) -> Result<CnfFormula, FormulaError> {
        let err = |line: usize, msg: &str| FormulaError::Syntax {
            position: line,
            message: format!("DIMACS line {line}: {msg}"),
        };
        let mut names: HashMap<u32, String> = HashMap::new();
        let mut declared: Option<(usize, usize)> = None;
        let mut clauses = Vec::new();
        let mut current = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let lineno = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('%') {
                continue;
            }
            if let Some(rest) = line.strip_prefix('c') {
                let mut parts = rest.split_whitespace();
                if parts.next() == Some("map") {
                    let index = parts.next().and_then(|s| s.parse::<u32>().ok());
                    let name = parts.next();
                    match (index, name) {
                        (Some(i), Some(n)) if i > 0 && is_identifier(n) => {
                            names.insert(i, n.to_string());
                        }
                        _ => return Err(err(lineno, "malformed `c map` line")),
                    }
                }
                continue;
            }
            if let Some(rest) = line.strip_prefix('p') {
                let parts: Vec<&str> = rest.split_whitespace().collect();
                match parts.as_slice() {
                    ["cnf", v, c] => {
                        let v = v.parse().map_err(|_| err(lineno, "bad variable count"))?;
                        let c = c.parse().map_err(|_| err(lineno, "bad clause count"))?;
                        declared = Some((v, c));
                    }
                    _ => return Err(err(lineno, "malformed problem line")),
                }
                continue;
            }
            let (num_vars, _) = declared.ok_or_else(|| err(lineno, "clause before problem line"))?;
            for tok in line.split_whitespace() {
                let lit: Lit = tok.parse().map_err(|_| err(lineno, "bad literal"))?;
                if lit == 0 {
                    clauses.push(std::mem::take(&mut current));
                } else {
                    if lit.unsigned_abs() as usize > num_vars {
                        return Err(err(lineno, "literal exceeds declared variable count"));
                    }
                    current.push(lit);
                }
            }
        }
        let (num_vars, _) = declared.ok_or_else(|| err(0, "missing problem line"))?;
        if !current.is_empty() {
            clauses.push(current);
        }
        let origins = (1..=num_vars as u32)
            .map(|v| match names.get(&v) {
                Some(n) if n.starts_with(AUX_PREFIX) => VarOrigin::Aux(n.clone()),
                Some(n) => VarOrigin::Option(opt(n)),
                None => VarOrigin::Aux(format!("{AUX_PREFIX}{v}")),
            })
            .collect();
        Ok(CnfFormula { clauses, origins })
    }

    /// Conjunction of clause disjunctions. Auxiliary variables become
    /// ordinary options named `__AUX_<index>`.
    pub fn to_formula(&self) -> Formula {
        let lit = |l: Lit| {
            let v = Formula::Var(opt(&self.var_name(l.unsigned_abs())));
            if l < 0 {
                Formula::not(v)
            } else {
                v
            }
        };
        Formula::conjoin_all(self.clauses.iter().map(|c| Formula::disjoin_all(c.iter().map(|l| lit(*l)))))
    }
}

/// Incremental Tseitin encoder sharing one variable table.
#[derive(Debug, Default)]
pub struct CnfBuilder {
    cnf: CnfFormula,
    index: HashMap<OptionId, u32>,
    seen: HashSet<Vec<Lit>>,
    true_var: Option<u32>,
}

impl CnfBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns the variable for `id`, allocating it on first use.
    pub fn register(&mut self, id: &OptionId) -> u32 {
        if let Some(v) = self.index.get(id) {
            return *v;
        }
        self.cnf.origins.push(VarOrigin::Option(id.clone()));
        let v = self.cnf.origins.len() as u32;
        self.index.insert(id.clone(), v);
        v
    }

    pub fn var(&self, id: &OptionId) -> Option<u32> {
        self.index.get(id).copied()
    }

    fn fresh(&mut self, node: &Formula) -> u32 {
        let mut text = node.to_string();
        if text.len() > 120 {
            text.truncate(text.floor_char_boundary(117));
            text.push_str("...");
        }
        self.cnf.origins.push(VarOrigin::Aux(text));
        self.cnf.origins.len() as u32
    }

    pub fn add_clause(&mut self, mut clause: Vec<Lit>) {
        clause.dedup();
        if self.seen.insert(clause.clone()) {
            self.cnf.clauses.push(clause);
        }
    }

    fn true_lit(&mut self) -> Lit {
        if let Some(v) = self.true_var {
            return v as Lit;
        }
        let v = self.fresh(&Formula::True);
        self.true_var = Some(v);
        self.add_clause(vec![v as Lit]);
        v as Lit
    }

    /// Returns a literal equivalent to `f`, adding defining clauses.
    pub fn encode(&mut self, f: &Formula) -> Lit {
        match f {
            Formula::True => self.true_lit(),
            Formula::False => -self.true_lit(),
            Formula::Var(id) => self.register(id) as Lit,
            Formula::Not(inner) => -self.encode(inner),
            Formula::And(a, b) => {
                let (la, lb) = (self.encode(a), self.encode(b));
                let x = self.fresh(f) as Lit;
                self.add_clause(vec![-x, la]);
                self.add_clause(vec![-x, lb]);
                self.add_clause(vec![x, -la, -lb]);
                x
            }
            Formula::Or(a, b) => {
                let (la, lb) = (self.encode(a), self.encode(b));
                let x = self.fresh(f) as Lit;
                self.add_clause(vec![x, -la]);
                self.add_clause(vec![x, -lb]);
                self.add_clause(vec![-x, la, lb]);
                x
            }
        }
    }

    /// Adds `f` as a hard constraint. Top-level conjunctions are split and
    /// plain disjunctions of literals become single clauses; everything else
    /// goes through [`CnfBuilder::encode`].
    pub fn assert(&mut self, f: &Formula) {
        match f {
            Formula::True => {}
            Formula::And(a, b) => {
                self.assert(a);
                self.assert(b);
            }
            _ => {
                let mut lits = Vec::new();
                match self.literal_clause(f, &mut lits) {
                    Some(true) => {}
                    Some(false) => self.add_clause(lits),
                    None => {
                        let l = self.encode(f);
                        self.add_clause(vec![l]);
                    }
                }
            }
        }
    }

    /// Collects the literals of a disjunction of literals. `Some(true)` means
    /// the clause is trivially satisfied, `None` that `f` is not such a clause.
    fn literal_clause(&mut self, f: &Formula, out: &mut Vec<Lit>) -> Option<bool> {
        match f {
            Formula::True => Some(true),
            Formula::False => Some(false),
            Formula::Var(id) => {
                out.push(self.register(id) as Lit);
                Some(false)
            }
            Formula::Not(inner) => match inner.as_ref() {
                Formula::Var(id) => {
                    out.push(-(self.register(id) as Lit));
                    Some(false)
                }
                Formula::True => Some(false),
                Formula::False => Some(true),
                _ => None,
            },
            Formula::Or(a, b) => {
                if !is_literal_disjunction(f) {
                    return None;
                }
                let left = self.literal_clause(a, out)?;
                let right = self.literal_clause(b, out)?;
                Some(left || right)
            }
            Formula::And(..) => None,
        }
    }

    pub fn finish(self) -> CnfFormula {
        self.cnf
    }
}

fn is_literal_disjunction(f: &Formula) -> bool {
    match f {
        Formula::True | Formula::False | Formula::Var(_) => true,
        Formula::Not(inner) => matches!(**inner, Formula::Var(_) | Formula::True | Formula::False),
        Formula::Or(a, b) => is_literal_disjunction(a) && is_literal_disjunction(b),
        Formula::And(..) => false,
    }
}

/// Tseitin translation. Options are numbered first, in ascending name order;
/// the root literal is asserted as a unit clause.
pub fn to_cnf(f: &Formula) -> CnfFormula {
    let mut builder = CnfBuilder::new();
    let vars: BTreeSet<OptionId> = f.vars();
    for v in &vars {
        builder.register(v);
    }
    let root = builder.encode(f);
    builder.add_clause(vec![root]);
    builder.finish()
}
