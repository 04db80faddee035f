//! Per-file build conditions, a declarative stand-in for build-system
//! variability.
//!
//! ```text
//! # comment
//! declare CONFIG_NET CONFIG_USB
//! net/socket.c :: CONFIG_NET
//! drivers/usb.c :: CONFIG_USB && !CONFIG_NET
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use thiserror::Error;

use super::FileVariabilityModel;
use crate::formula::{parse_formula, Formula, OptionId};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("build manifest line {line}: {message}")]
pub struct ManifestError {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct BuildManifest {
    /// Normalized project-relative path → build condition.
    pub entries: BTreeMap<String, Formula>,
    /// Options named by `declare` lines. When non-empty, every condition
    /// must use only declared options.
    pub declared: BTreeSet<OptionId>,
}

/// Forward slashes, no `./` segments, no leading `./` or `/`.
pub fn normalize_path(path: &Path) -> String {
    let s = path.to_string_lossy().replace('\\', "/");
    s.split('/').filter(|seg| !seg.is_empty() && *seg != ".").collect::<Vec<_>>().join("/")
}

impl BuildManifest {
    pub fn parse(text: &str) -> Result<Self, ManifestError> {
        let mut manifest = BuildManifest::default();
        let mut seen_lines: BTreeMap<String, usize> = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let err = |message: String| ManifestError { line: line_no, message };
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(names) = line.strip_prefix("declare ") {
                for name in names.split_whitespace() {
                    let id = OptionId::new(name).map_err(|e| err(e.to_string()))?;
                    manifest.declared.insert(id);
                }
                continue;
            }
            let Some((path, cond)) = line.split_once("::") else {
                return Err(err("expected `path :: formula`".into()));
            };
            let path = normalize_path(Path::new(path.trim()));
            if path.is_empty() {
                return Err(err("empty path".into()));
            }
            let f = parse_formula(cond.trim()).map_err(|e| err(e.to_string()))?;
            if let Some(first) = seen_lines.insert(path.clone(), line_no) {
                return Err(err(format!("`{path}` already listed on line {first}")));
            }
            manifest.entries.insert(path, f);
        }
        if !manifest.declared.is_empty() {
            for (path, f) in &manifest.entries {
                if let Some(v) = f.vars().into_iter().find(|v| !manifest.declared.contains(v)) {
                    return Err(ManifestError {
                        line: seen_lines[path],
                        message: format!("option `{v}` is not declared"),
                    });
                }
            }
        }
        Ok(manifest)
    }

    /// Build condition for `path`; `True` for unlisted files.
    pub fn condition_for(&self, path: &Path) -> Formula {
        self.entries.get(&normalize_path(path)).cloned().unwrap_or(Formula::True)
    }
}

/// Sets `file_pc` from the manifest and adds its options to the model.
pub fn apply_build_manifest(model: &FileVariabilityModel, manifest: &BuildManifest) -> FileVariabilityModel {
    let mut out = model.clone();
    out.file_pc = manifest.condition_for(&model.file);
    out.file_pc.collect_vars(&mut out.options);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cppscan::scan_file;

    #[test]
    fn file_condition_wraps_blocks() {
        let manifest = BuildManifest::parse("# build\nf.c :: CONFIG_NET\n").unwrap();
        let m = scan_file("#ifdef A\n#endif\n", "./f.c").unwrap();
        let applied = apply_build_manifest(&m, &manifest);
        assert_eq!(applied.effective_pc(&applied.blocks[0]).to_string(), "CONFIG_NET && A");
        assert!(applied.options.contains("CONFIG_NET"));

        let other = scan_file("#ifdef A\n#endif\n", "g.c").unwrap();
        let unchanged = apply_build_manifest(&other, &manifest);
        assert_eq!(unchanged.effective_pc(&unchanged.blocks[0]).to_string(), "A");
    }

    #[test]
    fn never_built_file() {
        let manifest = BuildManifest::parse("dead.c :: 0").unwrap();
        let m = apply_build_manifest(&scan_file("#ifdef A\n#endif\n", "dead.c").unwrap(), &manifest);
        assert_eq!(m.effective_pc(&m.blocks[0]), Formula::False);
    }

    #[test]
    fn parse_errors_and_declarations() {
        assert_eq!(BuildManifest::parse("a.c CONFIG_X").unwrap_err().line, 1);
        assert_eq!(BuildManifest::parse("\na.c :: X &&").unwrap_err().line, 2);
        assert!(BuildManifest::parse("a.c :: X\n./a.c :: Y").is_err());
        assert!(BuildManifest::parse("declare X\na.c :: X && Y").is_err());
        let ok = BuildManifest::parse("declare X Y\nsrc\\a.c :: X && Y").unwrap();
        assert_eq!(ok.condition_for(Path::new("src/a.c")).to_string(), "X && Y");
    }
}
