//! Fault corpora, detection against sample sets, efficiency scores, ranking
//! and Pareto fronts.
//!
//! Corpus format, one fault per line (`#` starts a comment line):
//!
//! ```text
//! id :: file-or-global :: kind :: presence condition [:: origin note]
//! splt-1 :: pngset.c :: syntax :: SPLT && !POINTER
//! ```

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::cppscan::normalize_path;
use crate::formula::{parse_formula, to_cnf, Configuration, Formula};
use crate::sampling::{combine, AlgorithmId, SampleSet, SamplingError, Scope};
use crate::satsolver::{solve, SolveError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("corpus line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("corpus line {line}: presence condition of `{id}` is unsatisfiable")]
    UnsatisfiablePc { line: usize, id: String },
    #[error("corpus line {line}: duplicate fault id `{id}`")]
    DuplicateId { line: usize, id: String },
    #[error("corpus contains no faults")]
    EmptyCorpus,
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Sampling(#[from] SamplingError),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
#[serde(tag = "kind", content = "path", rename_all = "kebab-case")]
pub enum FaultScope {
    File(PathBuf),
    /// Spans several files; only a global sample set can expose it.
    Global,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FaultRecord {
    pub id: String,
    pub file: FaultScope,
    pub presence_condition: Formula,
    pub kind: String,
    pub origin: String,
}

pub fn ingest_corpus(text: &str) -> Result<Vec<FaultRecord>, EvalError> {
    let mut faults = Vec::new();
    let mut ids = HashSet::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split("::").map(str::trim).collect();
        if !(4..=5).contains(&fields.len()) {
            return Err(EvalError::Parse {
                line,
                message: format!("expected 4 or 5 `::`-separated fields, found {}", fields.len()),
            });
        }
        let id = fields[0].to_string();
        if id.is_empty() || fields[1].is_empty() {
            return Err(EvalError::Parse { line, message: "empty id or file".into() });
        }
        let pc = parse_formula(fields[3]).map_err(|e| EvalError::Parse { line, message: e.to_string() })?;
        if !solve(&to_cnf(&pc))?.is_sat() {
            return Err(EvalError::UnsatisfiablePc { line, id });
        }
        if !ids.insert(id.clone()) {
            return Err(EvalError::DuplicateId { line, id });
        }
        let file = match fields[1] {
            "global" => FaultScope::Global,
            f => FaultScope::File(PathBuf::from(normalize_path(Path::new(f)))),
        };
        faults.push(FaultRecord {
            id,
            file,
            presence_condition: pc,
            kind: fields[2].to_string(),
            origin: fields.get(4).map_or_else(String::new, |s| s.to_string()),
        });
    }
    Ok(faults)
}

fn serialize_witness<S: Serializer>(w: &Option<Configuration>, s: S) -> Result<S::Ok, S::Error> {
    let map: Option<BTreeMap<&str, bool>> = w.as_ref().map(|c| c.iter().map(|(o, v)| (o.as_str(), v)).collect());
    map.serialize(s)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DetectionResult {
    pub fault: String,
    pub algorithm: AlgorithmId,
    pub detected: bool,
    /// First configuration satisfying the fault condition.
    #[serde(serialize_with = "serialize_witness")]
    pub witness: Option<Configuration>,
}

/// Whether some configuration of `samples` satisfies the fault's presence
/// condition conjoined with its file's build condition. Options the sample
/// space lacks count as disabled.
pub fn detect(fault: &FaultRecord, samples: &SampleSet) -> DetectionResult {
    let file_pc = match &fault.file {
        FaultScope::File(f) => samples
            .file_conditions
            .iter()
            .find(|(p, _)| normalize_path(p) == normalize_path(f))
            .map_or(Formula::True, |(_, pc)| pc.clone()),
        FaultScope::Global => Formula::True,
    };
    let condition = Formula::conjoin(fault.presence_condition.clone(), file_pc);
    let missing: Vec<String> =
        condition.vars().into_iter().filter(|v| !samples.space.contains(v.as_str())).map(|v| v.to_string()).collect();
    if !missing.is_empty() {
        log::warn!(
            "fault {}: options {} are not in the sampled space of {}; treating them as disabled",
            fault.id,
            missing.join(", "),
            samples.algorithm
        );
    }
    let witness = samples.configurations.iter().find(|c| condition.eval_or(c, false)).cloned();
    DetectionResult {
        fault: fault.id.clone(),
        algorithm: samples.algorithm.clone(),
        detected: witness.is_some(),
        witness,
    }
}

/// Picks the set responsible for the fault among one algorithm's sets.
fn relevant<'a>(fault: &FaultRecord, sets: &'a [SampleSet]) -> Option<&'a SampleSet> {
    if let Some(global) = sets.iter().find(|s| s.scope == Scope::Global) {
        return Some(global);
    }
    let FaultScope::File(f) = &fault.file else { return None };
    let wanted = normalize_path(f);
    sets.iter().find(|s| s.file().is_some_and(|p| normalize_path(p) == wanted))
}

/// Detection over one algorithm's sets (per-file or global). A fault whose
/// file has no set is not detected.
pub fn detect_in(fault: &FaultRecord, algorithm: &AlgorithmId, sets: &[SampleSet]) -> DetectionResult {
    match relevant(fault, sets) {
        Some(s) => detect(fault, s),
        None => {
            DetectionResult { fault: fault.id.clone(), algorithm: algorithm.clone(), detected: false, witness: None }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EfficiencyScore {
    pub algorithm: AlgorithmId,
    /// Total configurations across all sets.
    pub sample_size: usize,
    pub sets: usize,
    pub samples_per_file: f64,
    pub faults_detected: usize,
    /// `sample_size / faults_detected`; `None` when nothing was detected.
    pub efficiency: Option<f64>,
}

pub fn score(algorithm: &AlgorithmId, sets: &[SampleSet], corpus: &[FaultRecord]) -> EfficiencyScore {
    let sample_size: usize = sets.iter().map(SampleSet::len).sum();
    let faults_detected = corpus.iter().filter(|f| detect_in(f, algorithm, sets).detected).count();
    EfficiencyScore {
        algorithm: algorithm.clone(),
        sample_size,
        sets: sets.len(),
        samples_per_file: if sets.is_empty() { 0.0 } else { sample_size as f64 / sets.len() as f64 },
        faults_detected,
        efficiency: (faults_detected > 0).then(|| sample_size as f64 / faults_detected as f64),
    }
}

/// Ascending efficiency, undefined last; ties by smaller size, then name.
pub fn rank(mut scores: Vec<EfficiencyScore>) -> Vec<EfficiencyScore> {
    scores.sort_by(|a, b| {
        let e = match (a.efficiency, b.efficiency) {
            (Some(x), Some(y)) => x.total_cmp(&y),
            (Some(_), None) => std::cmp::Ordering::Less,
            (None, Some(_)) => std::cmp::Ordering::Greater,
            (None, None) => std::cmp::Ordering::Equal,
        };
        e.then(a.sample_size.cmp(&b.sample_size)).then_with(|| a.algorithm.to_string().cmp(&b.algorithm.to_string()))
    });
    scores
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParetoPoint {
    pub id: String,
    pub sample_size: f64,
    pub faults_detected: usize,
    pub on_front: bool,
}

impl ParetoPoint {
    pub fn new(id: impl Into<String>, sample_size: f64, faults_detected: usize) -> Self {
        ParetoPoint { id: id.into(), sample_size, faults_detected, on_front: false }
    }
}

/// Marks each point not dominated by another (no larger size, no fewer
/// faults, one of them strictly better). Sorted by size, then faults
/// descending, then id.
pub fn pareto_front(mut points: Vec<ParetoPoint>) -> Vec<ParetoPoint> {
    points.sort_by(|a, b| {
        a.sample_size
            .total_cmp(&b.sample_size)
            .then(b.faults_detected.cmp(&a.faults_detected))
            .then_with(|| a.id.cmp(&b.id))
    });
    let mut best_smaller: Option<usize> = None;
    let mut i = 0;
    while i < points.len() {
        let size = points[i].sample_size;
        let group_end = (i..points.len()).find(|&j| points[j].sample_size != size).unwrap_or(points.len());
        // Sorted by faults descending inside the group.
        let group_best = points[i].faults_detected;
        for p in &mut points[i..group_end] {
            let beaten_by_smaller = best_smaller.is_some_and(|b| b >= p.faults_detected);
            p.on_front = !beaten_by_smaller && p.faults_detected >= group_best;
        }
        best_smaller = Some(best_smaller.map_or(group_best, |b| b.max(group_best)));
        i = group_end;
    }
    points
}

/// Member sets unioned file by file. Files missing from any member are left out.
pub fn combine_sets(id: &AlgorithmId, members: &[&[SampleSet]]) -> Result<Vec<SampleSet>, EvalError> {
    let mut out = Vec::new();
    let Some((first, rest)) = members.split_first() else { return Ok(out) };
    for s in first.iter() {
        let mut parts = vec![s.clone()];
        for m in rest {
            match m.iter().find(|x| x.scope == s.scope) {
                Some(x) => parts.push(x.clone()),
                None => break,
            }
        }
        if parts.len() == members.len() {
            let mut c = combine(&parts)?;
            c.algorithm = id.clone();
            out.push(c);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankedScore {
    pub rank: usize,
    #[serde(flatten)]
    pub score: EfficiencyScore,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvaluationReport {
    pub faults: usize,
    pub ranking: Vec<RankedScore>,
    /// Sizes are samples per file.
    pub pareto: Vec<ParetoPoint>,
    pub detections: Vec<DetectionResult>,
}

/// Scores every algorithm's sets against the corpus. `groups` maps each
/// algorithm (or combination) to its sets.
pub fn evaluate(
    corpus: &[FaultRecord],
    groups: &BTreeMap<AlgorithmId, Vec<SampleSet>>,
) -> Result<EvaluationReport, EvalError> {
    if corpus.is_empty() {
        return Err(EvalError::EmptyCorpus);
    }
    let scores: Vec<EfficiencyScore> = groups.iter().map(|(id, sets)| score(id, sets, corpus)).collect();
    let pareto = pareto_front(
        scores
            .iter()
            .map(|s| ParetoPoint::new(s.algorithm.to_string(), s.samples_per_file, s.faults_detected))
            .collect(),
    );
    let detections = groups.iter().flat_map(|(id, sets)| corpus.iter().map(move |f| detect_in(f, id, sets))).collect();
    let ranking = rank(scores).into_iter().enumerate().map(|(i, score)| RankedScore { rank: i + 1, score }).collect();
    Ok(EvaluationReport { faults: corpus.len(), ranking, pareto, detections })
}

impl EvaluationReport {
    /// Plain-text table: rank, algorithm, faults, samples per file, E, and
    /// Pareto membership.
    pub fn table(&self) -> String {
        let on_front: HashSet<&str> = self.pareto.iter().filter(|p| p.on_front).map(|p| p.id.as_str()).collect();
        let names: Vec<String> = self.ranking.iter().map(|r| r.score.algorithm.to_string()).collect();
        let width = names.iter().map(String::len).max().unwrap_or(9).max(9);
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:>4}  {:<width$}  {:>6}  {:>12}  {:>8}  {:>6}",
            "rank", "algorithm", "faults", "samples/file", "E", "pareto"
        );
        for (r, name) in self.ranking.iter().zip(&names) {
            let e = r.score.efficiency.map_or_else(|| "-".to_string(), |e| format!("{e:.3}"));
            let _ = writeln!(
                out,
                "{:>4}  {:<width$}  {:>6}  {:>12.2}  {:>8}  {:>6}",
                r.rank,
                name,
                format!("{}/{}", r.score.faults_detected, self.faults),
                r.score.samples_per_file,
                e,
                if on_front.contains(name.as_str()) { "*" } else { "" },
            );
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::{opt, Space};
    use crate::sampling::{Algorithm, Mode};

    fn set(alg: Algorithm, file: &str, names: &[&str], rows: &[&str]) -> SampleSet {
        let space = Space::new(names.iter().map(|n| opt(n)));
        SampleSet {
            algorithm: alg.into(),
            scope: Scope::PerFile(file.into()),
            mode: Mode::Unconstrained,
            configurations: rows.iter().map(|b| Configuration::from_bits(space.clone(), b).unwrap()).collect(),
            space,
            skips: vec![],
            dead_blocks: vec![],
            file_conditions: BTreeMap::from([(PathBuf::from(file), Formula::True)]),
            exhaustive: None,
            elapsed_ms: 0.0,
        }
    }

    fn fault(pc: &str) -> FaultRecord {
        ingest_corpus(&format!("f1 :: pngset.c :: syntax :: {pc}")).unwrap().remove(0)
    }

    #[test]
    fn ingest_examples() {
        let f = fault("SPLT && !POINTER");
        assert_eq!(f.presence_condition.to_string(), "SPLT && !POINTER");
        assert_eq!(f.file, FaultScope::File("pngset.c".into()));
        assert!(matches!(ingest_corpus("a :: b :: c"), Err(EvalError::Parse { line: 1, .. })));
        assert!(matches!(ingest_corpus("a :: f.c :: k :: A && !A"), Err(EvalError::UnsatisfiablePc { .. })));
        assert!(matches!(
            ingest_corpus("a :: f.c :: k :: A\n# c\na :: g.c :: k :: B"),
            Err(EvalError::DuplicateId { line: 3, .. })
        ));
        let g = ingest_corpus("x :: global :: memory :: A :: reported upstream").unwrap();
        assert_eq!(g[0].file, FaultScope::Global);
        assert_eq!(g[0].origin, "reported upstream");
    }

    #[test]
    fn detect_examples() {
        let names = ["POINTER", "SPLT"];
        let f = fault("SPLT && !POINTER");
        let med = set(Algorithm::MostEnabledDisabled, "pngset.c", &names, &["11", "00"]);
        assert!(!detect(&f, &med).detected);
        let od = set(Algorithm::OneDisabled, "pngset.c", &names, &["01", "10"]);
        let r = detect(&f, &od);
        assert!(r.detected);
        assert_eq!(r.witness.unwrap().to_bits(), "01");
        assert!(detect(&fault("1"), &med).detected);
    }

    #[test]
    fn absent_options_count_as_disabled() {
        let s = set(Algorithm::OneEnabled, "pngset.c", &["A"], &["1"]);
        assert!(detect(&fault("A && !H"), &s).detected);
        assert!(!detect(&fault("A && H"), &s).detected);
    }

    #[test]
    fn build_condition_limits_detection() {
        let mut s = set(Algorithm::OneEnabled, "pngset.c", &["A", "NET"], &["10"]);
        s.file_conditions.insert("pngset.c".into(), Formula::var("NET"));
        assert!(!detect(&fault("A"), &s).detected);
    }

    #[test]
    fn scores_and_ranking() {
        let mk = |name: &str, size, faults| EfficiencyScore {
            algorithm: name.parse().unwrap(),
            sample_size: size,
            sets: 1,
            samples_per_file: size as f64,
            faults_detected: faults,
            efficiency: (faults > 0).then(|| size as f64 / faults as f64),
        };
        assert_eq!(mk("pair-wise", 270, 135).efficiency, Some(2.0));
        let ranked = rank(vec![
            mk("pair-wise", 20, 10),
            mk("one-enabled", 13, 10),
            mk("three-wise", 41, 10),
            mk("six-wise", 5, 0),
        ]);
        let order: Vec<String> = ranked.iter().map(|s| s.algorithm.to_string()).collect();
        assert_eq!(order, ["one-enabled", "pair-wise", "three-wise", "six-wise"]);
        let tie = rank(vec![mk("pair-wise", 20, 10), mk("one-enabled", 10, 5)]);
        assert_eq!(tie[0].sample_size, 10);
    }

    #[test]
    fn pareto_examples() {
        let pts = pareto_front(vec![
            ParetoPoint::new("C1", 3.5, 131),
            ParetoPoint::new("C2", 4.8, 132),
            ParetoPoint::new("C3", 4.8, 133),
            ParetoPoint::new("C4", 5.3, 134),
        ]);
        let front: Vec<&str> = pts.iter().filter(|p| p.on_front).map(|p| p.id.as_str()).collect();
        assert_eq!(front, ["C1", "C3", "C4"]);
        assert!(pareto_front(vec![ParetoPoint::new("x", 1.0, 1)])[0].on_front);
        let dup = pareto_front(vec![ParetoPoint::new("a", 2.0, 3), ParetoPoint::new("b", 2.0, 3)]);
        assert!(dup.iter().all(|p| p.on_front));
    }

    #[test]
    fn report_requires_faults() {
        assert_eq!(evaluate(&[], &BTreeMap::new()).unwrap_err(), EvalError::EmptyCorpus);
    }
}
