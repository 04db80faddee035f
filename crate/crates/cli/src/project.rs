//! Loading a source tree into variability models.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use confsample_core::cppscan::{
    apply_build_manifest, normalize_path, resolve_headers_with, scan_file, BuildManifest, FileVariabilityModel,
    HeaderSource, ScanError,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use walkdir::WalkDir;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScanSettings {
    pub root: PathBuf,
    pub headers: bool,
    pub include_paths: Vec<PathBuf>,
    pub header_depth: usize,
    pub build_manifest: Option<PathBuf>,
}

/// Reads headers relative to the project root.
struct RootedHeaders<'a> {
    root: &'a Path,
}

impl HeaderSource for RootedHeaders<'_> {
    fn read(&self, path: &Path) -> Option<String> {
        let full = self.root.join(path);
        if !full.is_file() {
            return None;
        }
        std::fs::read(full).ok().map(|b| String::from_utf8_lossy(&b).into_owned())
    }
}

pub struct Project {
    /// Sorted by path.
    pub models: Vec<FileVariabilityModel>,
    pub failures: Vec<ScanError>,
}

fn source_files(root: &Path) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for entry in WalkDir::new(root).sort_by_file_name() {
        let entry = entry.with_context(|| format!("walking {}", root.display()))?;
        if entry.file_type().is_file() && entry.path().extension().is_some_and(|e| e == "c") {
            let rel = entry.path().strip_prefix(root).unwrap_or(entry.path());
            files.push(PathBuf::from(normalize_path(rel)));
        }
    }
    Ok(files)
}

pub fn load(settings: &ScanSettings) -> Result<Project> {
    let root = &settings.root;
    if !root.is_dir() {
        anyhow::bail!("{} is not a directory", root.display());
    }
    let manifest = match &settings.build_manifest {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            Some(BuildManifest::parse(&text).with_context(|| format!("in {}", p.display()))?)
        }
        None => None,
    };
    let mut include_paths = vec![PathBuf::new()];
    include_paths.extend(settings.include_paths.iter().map(|p| {
        let abs = std::path::absolute(p).unwrap_or_else(|_| p.clone());
        let root_abs = std::path::absolute(root).unwrap_or_else(|_| root.clone());
        abs.strip_prefix(&root_abs).map(Path::to_path_buf).unwrap_or(abs)
    }));
    let files = source_files(root)?;
    let results: Vec<Result<FileVariabilityModel, ScanError>> = files
        .par_iter()
        .map(|rel| {
            let bytes = std::fs::read(root.join(rel)).unwrap_or_default();
            let mut model = scan_file(&String::from_utf8_lossy(&bytes), rel)?;
            if settings.headers {
                let source = RootedHeaders { root };
                model = resolve_headers_with(&model, &source, &include_paths, settings.header_depth);
            }
            if let Some(m) = &manifest {
                model = apply_build_manifest(&model, m);
            }
            Ok(model)
        })
        .collect();
    let mut project = Project { models: Vec::new(), failures: Vec::new() };
    for r in results {
        match r {
            Ok(m) => project.models.push(m),
            Err(e) => {
                log::warn!("{e}");
                project.failures.push(e);
            }
        }
    }
    Ok(project)
}
