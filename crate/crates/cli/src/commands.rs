use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;
use confsample_core::covering::CoveringConfig;
use confsample_core::cppscan::normalize_path;
use confsample_core::eval::{combine_sets, evaluate as evaluate_corpus, ingest_corpus, EvaluationReport};
use confsample_core::sampling::{
    combination_lattice, sample_project, Algorithm, AlgorithmId, SampleSet, SamplingContext, SamplingError, ScopeKind,
};
use confsample_core::satsolver::{ConstraintModel, SolverConfig};
use serde::{Deserialize, Serialize};

use crate::project::{self, ScanSettings};
use crate::{ScanOpts, EXIT_DIAGNOSTICS, EXIT_INFEASIBLE};

impl ScanOpts {
    fn settings(&self) -> ScanSettings {
        ScanSettings {
            root: self.root.clone(),
            headers: self.headers,
            include_paths: self.include_paths.clone(),
            header_depth: self.header_depth,
            build_manifest: self.build_manifest.clone(),
        }
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn scan(opts: &ScanOpts, emit_model: Option<&Path>) -> Result<u8> {
    let project = project::load(&opts.settings())?;
    for m in &project.models {
        println!("{}: {} options, {} blocks", m.file.display(), m.options.len(), m.blocks.len());
        for d in &m.diagnostics {
            log::info!("{}:{}: {}", d.file.display(), d.line, d.message);
        }
        if let Some(dir) = emit_model {
            write_json(&dir.join(format!("{}.json", normalize_path(&m.file))), m)?;
        }
    }
    for f in &project.failures {
        eprintln!("diagnostic: {f}");
    }
    Ok(if project.failures.is_empty() { 0 } else { EXIT_DIAGNOSTICS })
}

#[derive(Args)]
pub struct SampleArgs {
    #[command(flatten)]
    scan: ScanOpts,
    /// Algorithm name, `a+b` combination, `t-wise` (with --t), `random`, or
    /// `all`. Repeatable.
    #[arg(long = "alg", required = true)]
    algs: Vec<String>,
    /// Strength for `--alg t-wise`.
    #[arg(long)]
    t: Option<u8>,
    /// Constraint file; selects constrained mode.
    #[arg(long)]
    constraints: Option<PathBuf>,
    /// One sample set over the union of all files' options.
    #[arg(long)]
    global: bool,
    /// Maximum configurations per file for random sampling.
    #[arg(long, default_value_t = 10)]
    random_n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Random sampling for several n, e.g. `1..40` or `1,5,10`.
    #[arg(long)]
    n_grid: Option<String>,
    /// Random runs per n, seeded `seed`, `seed+1`, ...
    #[arg(long, default_value_t = 1)]
    repeat: u64,
    #[arg(long, default_value = "samples")]
    out: PathBuf,
    /// Largest global option count for t-wise and statement coverage.
    #[arg(long, default_value_t = confsample_core::sampling::DEFAULT_GLOBAL_THRESHOLD)]
    threshold: usize,
    /// Let statement coverage also target blocks in headers.
    #[arg(long)]
    include_header_blocks: bool,
    #[arg(long, env = "CONFSAMPLE_DECISION_BUDGET", default_value_t = confsample_core::satsolver::DEFAULT_DECISION_BUDGET)]
    decision_budget: u64,
    #[arg(long, env = "CONFSAMPLE_TUPLE_BUDGET", default_value_t = confsample_core::covering::DEFAULT_TUPLE_BUDGET)]
    tuple_budget: u64,
}

/// Everything that determines a sampling run's output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub scan: ScanSettings,
    pub constraints: Option<PathBuf>,
    pub scope: String,
    pub algorithms: Vec<String>,
    pub random_n: usize,
    pub seed: u64,
    pub n_grid: Option<String>,
    pub repeat: u64,
    pub threshold: usize,
    pub include_header_blocks: bool,
    pub decision_budget: u64,
    pub tuple_budget: u64,
}

#[derive(Serialize, Deserialize)]
struct SamplesDocument {
    tool: String,
    version: String,
    run_config: RunConfig,
    scan_failures: Vec<String>,
    results: Vec<AlgorithmSamples>,
}

#[derive(Serialize, Deserialize)]
struct AlgorithmSamples {
    algorithm: AlgorithmId,
    sets: Vec<SampleSet>,
}

fn parse_grid(text: &str) -> Result<Vec<usize>> {
    let bad = || anyhow::anyhow!("invalid --n-grid `{text}`");
    let values: Vec<usize> = if let Some((a, b)) = text.split_once("..") {
        let (a, b): (usize, usize) = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
        (a..=b).collect()
    } else {
        text.split(',').map(|s| s.trim().parse().map_err(|_| bad())).collect::<Result<_>>()?
    };
    if values.is_empty() || values.contains(&0) {
        return Err(bad());
    }
    Ok(values)
}

fn resolve_algorithms(args: &SampleArgs) -> Result<Vec<AlgorithmId>> {
    let randoms: Vec<Algorithm> = {
        let grid = match &args.n_grid {
            Some(g) => parse_grid(g)?,
            None => vec![args.random_n],
        };
        grid.iter()
            .flat_map(|&n| (0..args.repeat.max(1)).map(move |r| (n, r)))
            .map(|(n, r)| Algorithm::Random { n, seed: args.seed.wrapping_add(r) })
            .collect()
    };
    let mut out = Vec::new();
    for name in &args.algs {
        match name.as_str() {
            "all" => {
                out.extend(Algorithm::all(1, 0).into_iter().filter(|a| a.name() != "random").map(AlgorithmId::from));
                out.extend(randoms.iter().copied().map(AlgorithmId::from));
            }
            "random" => out.extend(randoms.iter().copied().map(AlgorithmId::from)),
            "t-wise" => {
                let t = args.t.context("--alg t-wise needs --t")?;
                if t == 0 {
                    bail!("--t must be at least 1");
                }
                out.push(Algorithm::TWise(t).into());
            }
            other => out.push(other.parse().with_context(|| format!("--alg {other}"))?),
        }
    }
    let mut seen = std::collections::HashSet::new();
    out.retain(|a| seen.insert(a.clone()));
    Ok(out)
}

pub fn sample(args: &SampleArgs) -> Result<u8> {
    if args.random_n == 0 {
        bail!("--random-n must be at least 1");
    }
    let algorithms = resolve_algorithms(args)?;
    let constraints = match &args.constraints {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            Some(
                ConstraintModel::parse(&text, p.display().to_string())
                    .with_context(|| format!("in {}", p.display()))?,
            )
        }
        None => None,
    };
    let solver = SolverConfig { decision_budget: args.decision_budget };
    let ctx = SamplingContext {
        constraints,
        solver,
        covering: CoveringConfig { solver, tuple_budget: args.tuple_budget },
        include_header_blocks: args.include_header_blocks,
        global_threshold: args.threshold,
        ..Default::default()
    };
    let scope = if args.global { ScopeKind::Global } else { ScopeKind::PerFile };
    let project = project::load(&args.scan.settings())?;
    for f in &project.failures {
        eprintln!("diagnostic: {f} (file skipped)");
    }

    let mut results = Vec::new();
    for alg in &algorithms {
        let sets = match sample_project(&project.models, alg, scope, &ctx) {
            Ok(sets) => sets,
            Err(e) => {
                if let SamplingError::InfeasibleAtScale { algorithm, .. } = e.root() {
                    eprintln!("error: {algorithm}: {e}");
                    return Ok(EXIT_INFEASIBLE);
                }
                return Err(e).with_context(|| format!("sampling with {alg}"));
            }
        };
        let total: usize = sets.iter().map(SampleSet::len).sum();
        println!("{alg}: {total} configurations in {} sets", sets.len());
        for s in &sets {
            let name = s.file().map_or_else(|| "global".to_string(), |p| normalize_path(p).replace('/', "__"));
            let path = args.out.join("csv").join(alg.slug()).join(format!("{name}.csv"));
            fs::create_dir_all(path.parent().unwrap())?;
            fs::write(&path, s.to_csv()).with_context(|| format!("writing {}", path.display()))?;
        }
        results.push(AlgorithmSamples { algorithm: alg.clone(), sets });
    }

    let doc = SamplesDocument {
        tool: "confsample".into(),
        version: confsample_core::VERSION.into(),
        run_config: RunConfig {
            scan: args.scan.settings(),
            constraints: args.constraints.clone(),
            scope: if args.global { "global" } else { "per-file" }.into(),
            algorithms: algorithms.iter().map(ToString::to_string).collect(),
            random_n: args.random_n,
            seed: args.seed,
            n_grid: args.n_grid.clone(),
            repeat: args.repeat,
            threshold: args.threshold,
            include_header_blocks: args.include_header_blocks,
            decision_budget: args.decision_budget,
            tuple_budget: args.tuple_budget,
        },
        scan_failures: project.failures.iter().map(ToString::to_string).collect(),
        results,
    };
    write_json(&args.out.join("samples.json"), &doc)?;
    Ok(if project.failures.is_empty() { 0 } else { EXIT_DIAGNOSTICS })
}

#[derive(Args)]
pub struct EvaluateArgs {
    /// Fault corpus: `id :: file|global :: kind :: formula` per line.
    #[arg(long)]
    corpus: PathBuf,
    /// Output directory of `confsample sample` (or its samples.json).
    #[arg(long)]
    samples: PathBuf,
    /// Also score every 2- and 3-way combination of the sampled algorithms.
    #[arg(long)]
    combinations: bool,
    /// Write the report as JSON to this file.
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Serialize)]
struct ReportDocument<'a> {
    tool: &'static str,
    version: &'static str,
    corpus: &'a Path,
    run_config: &'a RunConfig,
    report: &'a EvaluationReport,
}

pub fn evaluate(args: &EvaluateArgs) -> Result<u8> {
    let corpus_text = fs::read_to_string(&args.corpus).with_context(|| format!("reading {}", args.corpus.display()))?;
    let corpus = ingest_corpus(&corpus_text).with_context(|| format!("in {}", args.corpus.display()))?;
    let samples_path = if args.samples.is_dir() { args.samples.join("samples.json") } else { args.samples.clone() };
    let doc: SamplesDocument = serde_json::from_str(
        &fs::read_to_string(&samples_path).with_context(|| format!("reading {}", samples_path.display()))?,
    )
    .with_context(|| format!("parsing {}", samples_path.display()))?;

    let mut groups: BTreeMap<AlgorithmId, Vec<SampleSet>> =
        doc.results.into_iter().map(|r| (r.algorithm, r.sets)).collect();
    if args.combinations {
        for id in combination_lattice() {
            if groups.contains_key(&id) {
                continue;
            }
            let members: Option<Vec<&[SampleSet]>> =
                id.members().into_iter().map(|a| groups.get(&AlgorithmId::Single(a)).map(Vec::as_slice)).collect();
            if let Some(members) = members {
                let sets = combine_sets(&id, &members)?;
                groups.insert(id, sets);
            }
        }
    }
    let report = evaluate_corpus(&corpus, &groups)?;
    print!("{}", report.table());
    println!("\nPareto front (samples/file, faults):");
    for p in report.pareto.iter().filter(|p| p.on_front) {
        println!("  {:<50} {:>8.2} {:>6}", p.id, p.sample_size, p.faults_detected);
    }
    if let Some(path) = &args.json {
        let out = ReportDocument {
            tool: "confsample",
            version: confsample_core::VERSION,
            corpus: &args.corpus,
            run_config: &doc.run_config,
            report: &report,
        };
        write_json(path, &out)?;
    }
    Ok(0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grids() {
        assert_eq!(parse_grid("1..3").unwrap(), [1, 2, 3]);
        assert_eq!(parse_grid("4, 8").unwrap(), [4, 8]);
        assert!(parse_grid("0..2").is_err());
        assert!(parse_grid("x").is_err());
    }
}
