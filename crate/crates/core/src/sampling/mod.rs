//! The sampling algorithms, their combinations, and project-level driving.

mod algorithms;
mod ids;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::covering::{CoveringConfig, CoveringError};
use crate::cppscan::{merge_global, FileVariabilityModel};
use crate::formula::{Configuration, Formula, OptionId, Space};
use crate::satsolver::{ConstraintModel, SolveError, SolverConfig};

pub use algorithms::{most_enabled_disabled, one_disabled, one_enabled, random_sample, statement_coverage, t_wise};
pub use ids::{combination_lattice, Algorithm, AlgorithmId};

pub const DEFAULT_GLOBAL_THRESHOLD: usize = 200;
pub const DEFAULT_REJECTION_CAP: u64 = 1_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SamplingError {
    #[error("{algorithm} is infeasible at global scope: {options} options exceed the threshold of {threshold}")]
    InfeasibleAtScale { algorithm: String, options: usize, threshold: usize },
    #[error("random sampling gave up after {attempts} rejected draws")]
    RejectionLimit { attempts: u64 },
    #[error("sample sets disagree on {0}")]
    SpaceMismatch(String),
    #[error("invalid combination: {0}")]
    InvalidCombination(String),
    #[error("unknown algorithm `{0}`")]
    UnknownAlgorithm(String),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Covering(#[from] CoveringError),
    #[error("{file}: {error}")]
    InFile { file: PathBuf, error: Box<SamplingError> },
}

impl SamplingError {
    /// The error without file context.
    pub fn root(&self) -> &SamplingError {
        match self {
            SamplingError::InFile { error, .. } => error.root(),
            other => other,
        }
    }

    pub fn is_resource_limit(&self) -> bool {
        match self.root() {
            SamplingError::RejectionLimit { .. } | SamplingError::Solve(SolveError::ResourceLimit { .. }) => true,
            SamplingError::Covering(e) => e.is_resource_limit(),
            _ => false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Unconstrained,
    Constrained,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind", content = "file", rename_all = "kebab-case")]
pub enum Scope {
    PerFile(PathBuf),
    Global,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScopeKind {
    PerFile,
    Global,
}

/// A pick the solver proved impossible, e.g. disabling a mandatory option.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Skip {
    pub option: OptionId,
    pub value: bool,
    pub reason: String,
}

/// A block no valid configuration can enable.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeadBlock {
    pub file: PathBuf,
    pub start_line: usize,
    pub presence_condition: Formula,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "SampleSetDoc", try_from = "SampleSetDoc")]
pub struct SampleSet {
    pub algorithm: AlgorithmId,
    pub scope: Scope,
    pub mode: Mode,
    pub space: Space,
    /// Distinct, in selection order.
    pub configurations: Vec<Configuration>,
    pub skips: Vec<Skip>,
    pub dead_blocks: Vec<DeadBlock>,
    /// Build condition of each file the set stands for.
    pub file_conditions: BTreeMap<PathBuf, Formula>,
    /// Random sampling only: whether every valid configuration was taken.
    pub exhaustive: Option<bool>,
    pub elapsed_ms: f64,
}

impl SampleSet {
    pub fn new(algorithm: AlgorithmId, model: &FileVariabilityModel, mode: Mode) -> Self {
        SampleSet {
            algorithm,
            scope: Scope::PerFile(model.file.clone()),
            mode,
            space: Space::new(model.options.iter().cloned()),
            configurations: Vec::new(),
            skips: Vec::new(),
            dead_blocks: Vec::new(),
            file_conditions: BTreeMap::from([(model.file.clone(), model.file_pc.clone())]),
            exhaustive: None,
            elapsed_ms: 0.0,
        }
    }

    pub fn len(&self) -> usize {
        self.configurations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.configurations.is_empty()
    }

    /// Appends unless already present; returns whether it was new.
    pub fn push(&mut self, c: Configuration) -> bool {
        if self.configurations.contains(&c) {
            return false;
        }
        self.configurations.push(c);
        true
    }

    pub fn file(&self) -> Option<&Path> {
        match &self.scope {
            Scope::PerFile(p) => Some(p),
            Scope::Global => None,
        }
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        crate::covering::write_csv(&self.space, &self.configurations, &mut buf).expect("writing CSV to memory");
        String::from_utf8(buf).expect("CSV is UTF-8")
    }
}

#[derive(Serialize, Deserialize)]
struct SampleSetDoc {
    algorithm: AlgorithmId,
    scope: Scope,
    mode: Mode,
    options: Vec<OptionId>,
    /// One `0`/`1` string per configuration, in `options` order.
    configurations: Vec<String>,
    skips: Vec<Skip>,
    dead_blocks: Vec<DeadBlock>,
    file_conditions: BTreeMap<PathBuf, Formula>,
    exhaustive: Option<bool>,
    elapsed_ms: f64,
}

impl From<SampleSet> for SampleSetDoc {
    fn from(s: SampleSet) -> Self {
        SampleSetDoc {
            algorithm: s.algorithm,
            scope: s.scope,
            mode: s.mode,
            options: s.space.options().to_vec(),
            configurations: s.configurations.iter().map(Configuration::to_bits).collect(),
            skips: s.skips,
            dead_blocks: s.dead_blocks,
            file_conditions: s.file_conditions,
            exhaustive: s.exhaustive,
            elapsed_ms: s.elapsed_ms,
        }
    }
}

impl TryFrom<SampleSetDoc> for SampleSet {
    type Error = String;

    fn try_from(d: SampleSetDoc) -> Result<Self, String> {
        let space = Space::new(d.options.iter().cloned());
        if space.options() != d.options.as_slice() {
            return Err("options must be sorted and distinct".into());
        }
        let configurations = d
            .configurations
            .iter()
            .map(|bits| {
                Configuration::from_bits(space.clone(), bits)
                    .ok_or_else(|| format!("row `{bits}` does not match {} options", space.len()))
            })
            .collect::<Result<_, _>>()?;
        Ok(SampleSet {
            algorithm: d.algorithm,
            scope: d.scope,
            mode: d.mode,
            space,
            configurations,
            skips: d.skips,
            dead_blocks: d.dead_blocks,
            file_conditions: d.file_conditions,
            exhaustive: d.exhaustive,
            elapsed_ms: d.elapsed_ms,
        })
    }
}

/// Settings shared by every sampling run.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplingContext {
    /// `Some` selects constrained mode.
    pub constraints: Option<ConstraintModel>,
    pub solver: SolverConfig,
    pub covering: CoveringConfig,
    /// Let statement coverage also target blocks found in headers.
    pub include_header_blocks: bool,
    /// Largest global option count for t-wise and statement coverage.
    pub global_threshold: usize,
    pub rejection_cap: u64,
}

impl Default for SamplingContext {
    fn default() -> Self {
        SamplingContext {
            constraints: None,
            solver: SolverConfig::default(),
            covering: CoveringConfig::default(),
            include_header_blocks: false,
            global_threshold: DEFAULT_GLOBAL_THRESHOLD,
            rejection_cap: DEFAULT_REJECTION_CAP,
        }
    }
}

impl SamplingContext {
    pub fn constrained(constraints: ConstraintModel) -> Self {
        SamplingContext { constraints: Some(constraints), ..Default::default() }
    }

    pub fn mode(&self) -> Mode {
        if self.constraints.is_some() {
            Mode::Constrained
        } else {
            Mode::Unconstrained
        }
    }

    /// Constraint model over `space`: the configured constraints (their other
    /// options stay existentially quantified), or none.
    pub fn model_for(&self, space: &Space) -> ConstraintModel {
        match &self.constraints {
            Some(c) => c.extended(space),
            None => ConstraintModel::unconstrained(space.clone()),
        }
    }
}

/// Deduplicated union of sets over the same scope and space.
pub fn combine(sets: &[SampleSet]) -> Result<SampleSet, SamplingError> {
    let first = sets.first().ok_or_else(|| SamplingError::InvalidCombination("no sets".into()))?;
    for s in &sets[1..] {
        if s.scope != first.scope {
            return Err(SamplingError::SpaceMismatch("scope".into()));
        }
        if s.space != first.space {
            return Err(SamplingError::SpaceMismatch("option space".into()));
        }
        if s.mode != first.mode {
            return Err(SamplingError::SpaceMismatch("mode".into()));
        }
    }
    let algorithm = AlgorithmId::combination(sets.iter().flat_map(|s| s.algorithm.members()))?;
    let mut out = SampleSet { algorithm, exhaustive: None, ..first.clone() };
    out.elapsed_ms = sets.iter().map(|s| s.elapsed_ms).sum();
    for s in &sets[1..] {
        for c in &s.configurations {
            out.push(c.clone());
        }
        for skip in &s.skips {
            if !out.skips.contains(skip) {
                out.skips.push(skip.clone());
            }
        }
        for d in &s.dead_blocks {
            if !out.dead_blocks.contains(d) {
                out.dead_blocks.push(d.clone());
            }
        }
    }
    Ok(out)
}

fn run_single(model: &FileVariabilityModel, alg: Algorithm, ctx: &SamplingContext) -> Result<SampleSet, SamplingError> {
    let start = Instant::now();
    let mut set = match alg {
        Algorithm::TWise(t) => t_wise(model, ctx, t as usize)?,
        Algorithm::StatementCoverage => statement_coverage(model, ctx)?,
        Algorithm::MostEnabledDisabled => most_enabled_disabled(model, ctx)?,
        Algorithm::OneEnabled => one_enabled(model, ctx)?,
        Algorithm::OneDisabled => one_disabled(model, ctx)?,
        Algorithm::Random { n, seed } => random_sample(model, ctx, n, seed)?,
    };
    set.elapsed_ms = start.elapsed().as_secs_f64() * 1e3;
    Ok(set)
}

/// Samples one model with a single algorithm or a combination.
pub fn sample_file(
    model: &FileVariabilityModel,
    algorithm: &AlgorithmId,
    ctx: &SamplingContext,
) -> Result<SampleSet, SamplingError> {
    let sets = algorithm.members().into_iter().map(|a| run_single(model, a, ctx)).collect::<Result<Vec<_>, _>>()?;
    match sets.len() {
        1 => Ok(sets.into_iter().next().unwrap()),
        _ => combine(&sets),
    }
}

/// One set per file (sorted by path), or a single set over the merged model.
pub fn sample_project(
    models: &[FileVariabilityModel],
    algorithm: &AlgorithmId,
    scope: ScopeKind,
    ctx: &SamplingContext,
) -> Result<Vec<SampleSet>, SamplingError> {
    match scope {
        ScopeKind::PerFile => {
            let mut sets = models
                .par_iter()
                .map(|m| {
                    sample_file(m, algorithm, ctx)
                        .map_err(|e| SamplingError::InFile { file: m.file.clone(), error: Box::new(e) })
                })
                .collect::<Result<Vec<_>, _>>()?;
            sets.sort_by(|a, b| a.scope.cmp(&b.scope));
            Ok(sets)
        }
        ScopeKind::Global => {
            if models.is_empty() {
                return Ok(Vec::new());
            }
            let merged = merge_global(models);
            for a in algorithm.members() {
                let heavy = matches!(a, Algorithm::TWise(_) | Algorithm::StatementCoverage);
                if heavy && merged.options.len() > ctx.global_threshold {
                    return Err(SamplingError::InfeasibleAtScale {
                        algorithm: a.to_string(),
                        options: merged.options.len(),
                        threshold: ctx.global_threshold,
                    });
                }
            }
            let mut set = sample_file(&merged, algorithm, ctx)?;
            set.scope = Scope::Global;
            set.file_conditions = models.iter().map(|m| (m.file.clone(), m.file_pc.clone())).collect();
            Ok(vec![set])
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cppscan::scan_file;

    fn model(text: &str, path: &str) -> FileVariabilityModel {
        scan_file(text, path).unwrap()
    }

    fn bits(set: &SampleSet) -> Vec<String> {
        set.configurations.iter().map(|c| c.to_bits()).collect()
    }

    #[test]
    fn combine_is_a_deduplicated_union() {
        let m = model("#if A && B && C\n#endif\n", "f.c");
        let ctx = SamplingContext::default();
        let med = most_enabled_disabled(&m, &ctx).unwrap();
        let od = one_disabled(&m, &ctx).unwrap();
        let both = combine(&[med.clone(), od]).unwrap();
        assert_eq!(bits(&both), ["111", "000", "011", "101", "110"]);
        assert_eq!(both.algorithm.to_string(), "most-enabled-disabled+one-disabled");
        assert_eq!(combine(&[med.clone(), med.clone()]).unwrap().configurations, med.configurations);

        let other = most_enabled_disabled(&model("#ifdef A\n#endif\n", "f.c"), &ctx).unwrap();
        assert!(matches!(combine(&[med, other]), Err(SamplingError::SpaceMismatch(_))));
    }

    #[test]
    fn project_scopes() {
        let models = vec![model("#ifdef B\n#endif\n", "b.c"), model("#if A && C\n#endif\n", "a.c")];
        let ctx = SamplingContext::default();
        let alg = AlgorithmId::Single(Algorithm::MostEnabledDisabled);
        let per_file = sample_project(&models, &alg, ScopeKind::PerFile, &ctx).unwrap();
        assert_eq!(per_file.len(), 2);
        assert_eq!(per_file[0].file(), Some(Path::new("a.c")));
        assert!(per_file.iter().all(|s| s.len() <= 2));
        let global = sample_project(&models, &alg, ScopeKind::Global, &ctx).unwrap();
        assert_eq!(global.len(), 1);
        assert_eq!(global[0].space.len(), 3);
        assert_eq!(global[0].len(), 2);
    }

    #[test]
    fn global_threshold() {
        let text: String = (0..10).map(|i| format!("#ifdef O{i}\n#endif\n")).collect();
        let models = vec![model(&text, "big.c")];
        let ctx = SamplingContext { global_threshold: 5, ..Default::default() };
        let err = sample_project(&models, &Algorithm::PAIR_WISE.into(), ScopeKind::Global, &ctx).unwrap_err();
        assert!(matches!(err, SamplingError::InfeasibleAtScale { options: 10, threshold: 5, .. }));
        assert!(sample_project(&models, &Algorithm::PAIR_WISE.into(), ScopeKind::PerFile, &ctx).is_ok());
    }

    #[test]
    fn json_round_trip() {
        let m = model("#if A && !B\n#endif\n", "x/y.c");
        let set = sample_file(&m, &"pair-wise+one-enabled".parse().unwrap(), &SamplingContext::default()).unwrap();
        let json = serde_json::to_string(&set).unwrap();
        let back: SampleSet = serde_json::from_str(&json).unwrap();
        assert_eq!(back, set);
        assert_eq!(set.to_csv().lines().next(), Some("A,B"));
    }
}
