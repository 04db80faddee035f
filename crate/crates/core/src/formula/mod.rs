//! Propositional formulas over configuration options.
//!
//! Presence conditions, constraints and fault conditions all share the
//! [`Formula`] type. The textual form accepted by [`parse_formula`] and
//! produced by `Display` is the C-preprocessor subset `!`, `&&`, `||`,
//! parentheses, `defined(NAME)`, bare `NAME`, and the literals `1`/`0`.

mod cnf;
mod parse;

use std::borrow::Borrow;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::hash::{Hash, Hasher};
use std::sync::Arc;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

pub use cnf::{to_cnf, CnfBuilder, CnfFormula, Lit, VarOrigin};
pub use parse::{parse_formula, parse_formula_lenient, OpaqueAtom};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FormulaError {
    #[error("syntax error at offset {position}: {message}")]
    Syntax { position: usize, message: String },
    #[error("unsupported expression `{text}`")]
    UnsupportedExpression { text: String },
    #[error("option `{0}` is not assigned in the configuration")]
    UnboundOption(OptionId),
    #[error("`{0}` is not a valid option name")]
    InvalidName(String),
}

/// Name of a configuration option (a C macro name).
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct OptionId(Arc<str>);

impl OptionId {
    pub fn new(name: &str) -> Result<Self, FormulaError> {
        if is_identifier(name) {
            Ok(OptionId(Arc::from(name)))
        } else {
            Err(FormulaError::InvalidName(name.to_string()))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

pub(crate) fn is_identifier(name: &str) -> bool {
    let mut chars = name.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

impl fmt::Debug for OptionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for OptionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl Borrow<str> for OptionId {
    fn borrow(&self) -> &str {
        &self.0
    }
}

impl Serialize for OptionId {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.0)
    }
}

impl<'de> Deserialize<'de> for OptionId {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        OptionId::new(&s).map_err(serde::de::Error::custom)
    }
}

/// Shorthand used throughout the tests and fixtures; panics on invalid names.
pub fn opt(name: &str) -> OptionId {
    OptionId::new(name).expect("valid option name")
}

/// A propositional formula tree.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Formula {
    True,
    False,
    Var(OptionId),
    Not(Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
}

impl Formula {
    pub fn var(name: &str) -> Formula {
        Formula::Var(opt(name))
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(f: Formula) -> Formula {
        Formula::Not(Box::new(f))
    }

    pub fn and(a: Formula, b: Formula) -> Formula {
        Formula::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: Formula, b: Formula) -> Formula {
        Formula::Or(Box::new(a), Box::new(b))
    }

    /// Conjunction that folds away boolean constants.
    pub fn conjoin(a: Formula, b: Formula) -> Formula {
        match (a, b) {
            (Formula::True, x) | (x, Formula::True) => x,
            (Formula::False, _) | (_, Formula::False) => Formula::False,
            (a, b) => Formula::and(a, b),
        }
    }

    /// Left-folded [`Formula::conjoin`] over an iterator; empty input is `True`.
    pub fn conjoin_all<I: IntoIterator<Item = Formula>>(items: I) -> Formula {
        items.into_iter().fold(Formula::True, Formula::conjoin)
    }

    /// Disjunction that folds away boolean constants.
    pub fn disjoin(a: Formula, b: Formula) -> Formula {
        match (a, b) {
            (Formula::False, x) | (x, Formula::False) => x,
            (Formula::True, _) | (_, Formula::True) => Formula::True,
            (a, b) => Formula::or(a, b),
        }
    }

    pub fn disjoin_all<I: IntoIterator<Item = Formula>>(items: I) -> Formula {
        items.into_iter().fold(Formula::False, Formula::disjoin)
    }

    /// Negation that folds constants and double negation.
    pub fn negate(f: Formula) -> Formula {
        match f {
            Formula::True => Formula::False,
            Formula::False => Formula::True,
            Formula::Not(inner) => *inner,
            other => Formula::not(other),
        }
    }

    pub fn vars(&self) -> BTreeSet<OptionId> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    pub(crate) fn collect_vars(&self, out: &mut BTreeSet<OptionId>) {
        match self {
            Formula::True | Formula::False => {}
            Formula::Var(v) => {
                out.insert(v.clone());
            }
            Formula::Not(f) => f.collect_vars(out),
            Formula::And(a, b) | Formula::Or(a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
        }
    }

    pub fn node_count(&self) -> usize {
        match self {
            Formula::True | Formula::False | Formula::Var(_) => 1,
            Formula::Not(f) => 1 + f.node_count(),
            Formula::And(a, b) | Formula::Or(a, b) => 1 + a.node_count() + b.node_count(),
        }
    }

    /// Evaluates under an arbitrary lookup; `None` from the lookup is an error.
    pub fn eval_with<F>(&self, lookup: &F) -> Result<bool, FormulaError>
    where
        F: Fn(&OptionId) -> Option<bool>,
    {
        Ok(match self {
            Formula::True => true,
            Formula::False => false,
            Formula::Var(v) => lookup(v).ok_or_else(|| FormulaError::UnboundOption(v.clone()))?,
            Formula::Not(f) => !f.eval_with(lookup)?,
            Formula::And(a, b) => a.eval_with(lookup)? && b.eval_with(lookup)?,
            Formula::Or(a, b) => a.eval_with(lookup)? || b.eval_with(lookup)?,
        })
    }

    /// Evaluates treating options missing from `config` as `default`.
    pub fn eval_or(&self, config: &Configuration, default: bool) -> bool {
        self.eval_with(&|v: &OptionId| Some(config.get(v.as_str()).unwrap_or(default))).expect("total lookup")
    }

    fn precedence(&self) -> u8 {
        match self {
            Formula::Or(..) => 1,
            Formula::And(..) => 2,
            Formula::Not(_) => 3,
            _ => 4,
        }
    }
}

/// Standard boolean semantics; fails if a variable is not assigned in `c`.
pub fn evaluate(f: &Formula, c: &Configuration) -> Result<bool, FormulaError> {
    f.eval_with(&|v: &OptionId| c.get(v.as_str()))
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn child(out: &mut fmt::Formatter<'_>, node: &Formula, parens: bool) -> fmt::Result {
            if parens {
                write!(out, "({node})")
            } else {
                write!(out, "{node}")
            }
        }
        match self {
            Formula::True => f.write_str("1"),
            Formula::False => f.write_str("0"),
            Formula::Var(v) => write!(f, "{v}"),
            Formula::Not(inner) => {
                f.write_str("!")?;
                child(f, inner, inner.precedence() < 3)
            }
            Formula::And(a, b) | Formula::Or(a, b) => {
                let prec = self.precedence();
                let op = if prec == 2 { " && " } else { " || " };
                // Binary nodes associate to the left, so a right operand of
                // equal precedence keeps its parentheses.
                child(f, a, a.precedence() < prec)?;
                f.write_str(op)?;
                child(f, b, b.precedence() <= prec)
            }
        }
    }
}

impl Serialize for Formula {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Formula {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        parse_formula(&s).map_err(serde::de::Error::custom)
    }
}

/// A sorted, duplicate-free list of options shared between configurations.
#[derive(Clone, Default)]
pub struct Space(Arc<[OptionId]>);

impl Space {
    pub fn new<I: IntoIterator<Item = OptionId>>(options: I) -> Self {
        let set: BTreeSet<OptionId> = options.into_iter().collect();
        Space(set.into_iter().collect::<Vec<_>>().into())
    }

    pub fn empty() -> Self {
        Space::default()
    }

    pub fn options(&self) -> &[OptionId] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.0.binary_search_by(|o| o.as_str().cmp(name)).ok()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.index_of(name).is_some()
    }

    pub fn union(&self, other: &Space) -> Space {
        Space::new(self.0.iter().chain(other.0.iter()).cloned())
    }
}

impl PartialEq for Space {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0) || self.0 == other.0
    }
}

impl Eq for Space {}

impl fmt::Debug for Space {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.0.iter()).finish()
    }
}

impl FromIterator<OptionId> for Space {
    fn from_iter<I: IntoIterator<Item = OptionId>>(iter: I) -> Self {
        Space::new(iter)
    }
}

/// A total assignment over a [`Space`].
#[derive(Clone)]
pub struct Configuration {
    space: Space,
    values: Vec<bool>,
}

impl Configuration {
    pub fn new(space: Space, values: Vec<bool>) -> Self {
        assert_eq!(space.len(), values.len(), "configuration must be total over its space");
        Configuration { space, values }
    }

    pub fn uniform(space: Space, value: bool) -> Self {
        let values = vec![value; space.len()];
        Configuration { space, values }
    }

    /// Builds a configuration from `(name, value)` pairs; the space is the set of names.
    pub fn from_pairs<'a, I: IntoIterator<Item = (&'a str, bool)>>(pairs: I) -> Self {
        let map: BTreeMap<OptionId, bool> = pairs.into_iter().map(|(n, v)| (opt(n), v)).collect();
        let space = Space::new(map.keys().cloned());
        Configuration { space, values: map.into_values().collect() }
    }

    pub fn space(&self) -> &Space {
        &self.space
    }

    pub fn values(&self) -> &[bool] {
        &self.values
    }

    pub fn get(&self, name: &str) -> Option<bool> {
        self.space.index_of(name).map(|i| self.values[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (&OptionId, bool)> + '_ {
        self.space.options().iter().zip(self.values.iter().copied())
    }

    pub fn enabled_count(&self) -> usize {
        self.values.iter().filter(|v| **v).count()
    }

    /// Restricts to `space`, which must be a subset of this configuration's space.
    pub fn project(&self, space: &Space) -> Configuration {
        let values =
            space.options().iter().map(|o| self.get(o.as_str()).expect("projection onto a subspace")).collect();
        Configuration { space: space.clone(), values }
    }

    /// `0`/`1` string in space order.
    pub fn to_bits(&self) -> String {
        self.values.iter().map(|v| if *v { '1' } else { '0' }).collect()
    }

    pub fn from_bits(space: Space, bits: &str) -> Option<Self> {
        let values: Option<Vec<bool>> = bits
            .chars()
            .map(|c| match c {
                '1' => Some(true),
                '0' => Some(false),
                _ => None,
            })
            .collect();
        let values = values?;
        (values.len() == space.len()).then_some(Configuration { space, values })
    }
}

impl PartialEq for Configuration {
    fn eq(&self, other: &Self) -> bool {
        self.values == other.values && self.space == other.space
    }
}

impl Eq for Configuration {}

impl Hash for Configuration {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.values.hash(state);
    }
}

impl fmt::Debug for Configuration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, (o, v)) in self.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{o}:{}", if v { "on" } else { "off" })?;
        }
        f.write_str("}")
    }
}

/// A partial assignment used to pin options during solving.
pub type PartialAssignment = BTreeMap<OptionId, bool>;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn option_names_follow_c_identifier_rules() {
        assert!(OptionId::new("CONFIG_NET").is_ok());
        assert!(OptionId::new("_x1").is_ok());
        assert!(OptionId::new("1abc").is_err());
        assert!(OptionId::new("a-b").is_err());
        assert!(OptionId::new("").is_err());
        assert_ne!(opt("Abc"), opt("abc"));
    }

    #[test]
    fn evaluate_examples() {
        let fault = Formula::and(Formula::var("SPLT"), Formula::not(Formula::var("POINTER")));
        let c = Configuration::from_pairs([("SPLT", true), ("POINTER", false)]);
        assert_eq!(evaluate(&fault, &c), Ok(true));

        assert_eq!(evaluate(&Formula::True, &Configuration::from_pairs([])), Ok(true));

        let xor = parse_formula("(!A && B) || (A && !B)").unwrap();
        let both = Configuration::from_pairs([("A", true), ("B", true)]);
        assert_eq!(evaluate(&xor, &both), Ok(false));
    }

    #[test]
    fn evaluate_reports_unbound_options() {
        let c = Configuration::from_pairs([("A", true)]);
        assert_eq!(evaluate(&Formula::var("B"), &c), Err(FormulaError::UnboundOption(opt("B"))));
        assert!(!Formula::var("B").eval_or(&c, false));
    }

    #[test]
    fn canonical_printing_uses_minimal_parentheses() {
        let f = Formula::or(Formula::var("A"), Formula::and(Formula::var("B"), Formula::not(Formula::var("C"))));
        assert_eq!(f.to_string(), "A || B && !C");
        let g = Formula::and(Formula::or(Formula::var("A"), Formula::var("B")), Formula::var("C"));
        assert_eq!(g.to_string(), "(A || B) && C");
        let right = Formula::and(Formula::var("A"), Formula::and(Formula::var("B"), Formula::var("C")));
        assert_eq!(right.to_string(), "A && (B && C)");
        assert_eq!(Formula::not(Formula::not(Formula::var("A"))).to_string(), "!!A");
        assert_eq!(Formula::not(g).to_string(), "!((A || B) && C)");
    }

    #[test]
    fn smart_constructors_fold_constants() {
        let a = Formula::var("A");
        assert_eq!(Formula::conjoin(Formula::True, a.clone()), a);
        assert_eq!(Formula::conjoin(a.clone(), Formula::False), Formula::False);
        assert_eq!(Formula::disjoin(Formula::False, a.clone()), a);
        assert_eq!(Formula::negate(Formula::not(a.clone())), a);
        assert_eq!(Formula::conjoin_all([]), Formula::True);
    }

    #[test]
    fn configuration_equality_is_by_assignment() {
        let a = Configuration::from_pairs([("A", true), ("B", false)]);
        let b = Configuration::from_pairs([("B", false), ("A", true)]);
        assert_eq!(a, b);
        assert_eq!(a.to_bits(), "10");
        let c = Configuration::from_bits(a.space().clone(), "11").unwrap();
        assert_ne!(a, c);
        assert!(Configuration::from_bits(a.space().clone(), "1").is_none());
    }
}
