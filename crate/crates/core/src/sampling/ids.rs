use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::SamplingError;

/// One sampling algorithm. `Ord` follows the listing order used in reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Algorithm {
    /// Covering array of strength `t`.
    TWise(u8),
    StatementCoverage,
    MostEnabledDisabled,
    OneEnabled,
    OneDisabled,
    /// At most `n` configurations per file, drawn from a generator seeded
    /// with `seed`.
    Random {
        n: usize,
        seed: u64,
    },
}

const T_NAMES: [&str; 7] = ["", "one-wise", "pair-wise", "three-wise", "four-wise", "five-wise", "six-wise"];

impl Algorithm {
    pub const PAIR_WISE: Algorithm = Algorithm::TWise(2);
    pub const THREE_WISE: Algorithm = Algorithm::TWise(3);
    pub const FOUR_WISE: Algorithm = Algorithm::TWise(4);
    pub const FIVE_WISE: Algorithm = Algorithm::TWise(5);
    pub const SIX_WISE: Algorithm = Algorithm::TWise(6);

    /// The ten algorithms, with the given random parameters.
    pub fn all(random_n: usize, seed: u64) -> Vec<Algorithm> {
        let mut v: Vec<Algorithm> = (2..=6).map(Algorithm::TWise).collect();
        v.extend([
            Algorithm::StatementCoverage,
            Algorithm::MostEnabledDisabled,
            Algorithm::OneEnabled,
            Algorithm::OneDisabled,
            Algorithm::Random { n: random_n, seed },
        ]);
        v
    }

    /// Whether the algorithm may take part in a combination.
    pub fn combinable(self) -> bool {
        !matches!(self, Algorithm::Random { .. } | Algorithm::TWise(5..))
    }

    /// Short name without random parameters.
    pub fn name(self) -> String {
        match self {
            Algorithm::TWise(t) => T_NAMES.get(t as usize).map_or_else(|| format!("{t}-wise"), |s| s.to_string()),
            Algorithm::StatementCoverage => "statement-coverage".into(),
            Algorithm::MostEnabledDisabled => "most-enabled-disabled".into(),
            Algorithm::OneEnabled => "one-enabled".into(),
            Algorithm::OneDisabled => "one-disabled".into(),
            Algorithm::Random { .. } => "random".into(),
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Algorithm::Random { n, seed } => write!(f, "random(n={n},seed={seed})"),
            other => f.write_str(&other.name()),
        }
    }
}

impl FromStr for Algorithm {
    type Err = SamplingError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || SamplingError::UnknownAlgorithm(s.to_string());
        let s = s.trim();
        if let Some(t) = T_NAMES.iter().position(|n| !n.is_empty() && *n == s) {
            return Ok(Algorithm::TWise(t as u8));
        }
        if let Some(t) = s.strip_suffix("-wise").and_then(|t| t.parse::<u8>().ok()) {
            return if t >= 1 { Ok(Algorithm::TWise(t)) } else { Err(bad()) };
        }
        match s {
            "statement-coverage" => return Ok(Algorithm::StatementCoverage),
            "most-enabled-disabled" => return Ok(Algorithm::MostEnabledDisabled),
            "one-enabled" => return Ok(Algorithm::OneEnabled),
            "one-disabled" => return Ok(Algorithm::OneDisabled),
            _ => {}
        }
        let params = s.strip_prefix("random(").and_then(|r| r.strip_suffix(')')).ok_or_else(bad)?;
        let (mut n, mut seed) = (None, None);
        for kv in params.split(',') {
            match kv.trim().split_once('=') {
                Some(("n", v)) => n = v.trim().parse().ok(),
                Some(("seed", v)) => seed = v.trim().parse().ok(),
                _ => return Err(bad()),
            }
        }
        match (n, seed) {
            (Some(n), Some(seed)) if n >= 1 => Ok(Algorithm::Random { n, seed }),
            _ => Err(bad()),
        }
    }
}

/// A single algorithm or the union of 2–3 combinable ones.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AlgorithmId {
    Single(Algorithm),
    Combination(Vec<Algorithm>),
}

impl AlgorithmId {
    /// Normalizes member order and duplicates; a single distinct member
    /// collapses to [`AlgorithmId::Single`].
    pub fn combination<I: IntoIterator<Item = Algorithm>>(members: I) -> Result<AlgorithmId, SamplingError> {
        let mut members: Vec<Algorithm> = members.into_iter().collect();
        members.sort();
        members.dedup();
        if let Some(bad) = members.iter().find(|a| !a.combinable()) {
            return Err(SamplingError::InvalidCombination(format!("{bad} cannot be combined")));
        }
        match members.len() {
            1 => Ok(AlgorithmId::Single(members[0])),
            2 | 3 => Ok(AlgorithmId::Combination(members)),
            n => Err(SamplingError::InvalidCombination(format!("{n} members; expected 2 or 3"))),
        }
    }

    pub fn members(&self) -> Vec<Algorithm> {
        match self {
            AlgorithmId::Single(a) => vec![*a],
            AlgorithmId::Combination(m) => m.clone(),
        }
    }

    pub fn is_combination(&self) -> bool {
        matches!(self, AlgorithmId::Combination(_))
    }

    /// File-name friendly form.
    pub fn slug(&self) -> String {
        self.members()
            .iter()
            .map(|a| match a {
                Algorithm::Random { n, seed } => format!("random-n{n}-s{seed}"),
                other => other.name(),
            })
            .collect::<Vec<_>>()
            .join("+")
    }
}

impl From<Algorithm> for AlgorithmId {
    fn from(a: Algorithm) -> Self {
        AlgorithmId::Single(a)
    }
}

impl fmt::Display for AlgorithmId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AlgorithmId::Single(a) => a.fmt(f),
            AlgorithmId::Combination(m) => {
                let names: Vec<String> = m.iter().map(|a| a.to_string()).collect();
                f.write_str(&names.join("+"))
            }
        }
    }
}

impl FromStr for AlgorithmId {
    type Err = SamplingError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split('+').collect();
        if parts.len() == 1 {
            return Ok(AlgorithmId::Single(s.parse()?));
        }
        AlgorithmId::combination(parts.into_iter().map(str::parse).collect::<Result<Vec<_>, _>>()?)
    }
}

impl Serialize for AlgorithmId {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for AlgorithmId {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Every 2- and 3-subset of the seven combinable algorithms, 56 in all.
pub fn combination_lattice() -> Vec<AlgorithmId> {
    let pool = [
        Algorithm::PAIR_WISE,
        Algorithm::THREE_WISE,
        Algorithm::FOUR_WISE,
        Algorithm::StatementCoverage,
        Algorithm::MostEnabledDisabled,
        Algorithm::OneEnabled,
        Algorithm::OneDisabled,
    ];
    let mut out = Vec::new();
    for i in 0..pool.len() {
        for j in i + 1..pool.len() {
            out.push(AlgorithmId::Combination(vec![pool[i], pool[j]]));
            for k in j + 1..pool.len() {
                out.push(AlgorithmId::Combination(vec![pool[i], pool[j], pool[k]]));
            }
        }
    }
    out.sort();
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for a in Algorithm::all(7, 3) {
            assert_eq!(a.to_string().parse::<Algorithm>().unwrap(), a);
        }
        assert_eq!("9-wise".parse::<Algorithm>().unwrap(), Algorithm::TWise(9));
        assert!("random".parse::<Algorithm>().is_err());
        assert!("two-wise".parse::<Algorithm>().is_err());
    }

    #[test]
    fn combinations() {
        let c1: AlgorithmId = "one-disabled+pair-wise".parse().unwrap();
        assert_eq!(c1.to_string(), "pair-wise+one-disabled");
        assert_eq!(
            AlgorithmId::combination([Algorithm::OneEnabled, Algorithm::OneEnabled]).unwrap(),
            AlgorithmId::Single(Algorithm::OneEnabled)
        );
        assert!(AlgorithmId::combination([Algorithm::SIX_WISE, Algorithm::OneEnabled]).is_err());
        assert!(AlgorithmId::combination([Algorithm::Random { n: 1, seed: 0 }, Algorithm::OneEnabled]).is_err());
        assert!("pair-wise+three-wise+four-wise+one-enabled".parse::<AlgorithmId>().is_err());
    }

    #[test]
    fn lattice_has_every_two_and_three_subset() {
        let lattice = combination_lattice();
        assert_eq!(lattice.len(), 21 + 35);
        let distinct: std::collections::HashSet<_> = lattice.iter().collect();
        assert_eq!(distinct.len(), lattice.len());
    }
}
