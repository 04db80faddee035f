//! Transitive `#include` resolution.

use std::collections::{BTreeMap, HashSet};
use std::path::{Path, PathBuf};

use super::{scan_file, BlockOrigin, Diagnostic, DiagnosticKind, FileVariabilityModel};

/// Where header text comes from.
pub trait HeaderSource {
    fn read(&self, path: &Path) -> Option<String>;
}

/// Reads headers from the file system; invalid UTF-8 is replaced.
#[derive(Debug, Clone, Copy, Default)]
pub struct FsHeaders;

impl HeaderSource for FsHeaders {
    fn read(&self, path: &Path) -> Option<String> {
        if !path.is_file() {
            return None;
        }
        std::fs::read(path).ok().map(|b| String::from_utf8_lossy(&b).into_owned())
    }
}

impl HeaderSource for BTreeMap<PathBuf, String> {
    fn read(&self, path: &Path) -> Option<String> {
        self.get(path).cloned()
    }
}

struct Resolver<'a, S: HeaderSource> {
    source: &'a S,
    include_paths: &'a [PathBuf],
    depth_limit: usize,
    visited: HashSet<PathBuf>,
    stack: Vec<PathBuf>,
}

impl<S: HeaderSource> Resolver<'_, S> {
    fn locate(&self, from: &Path, target: &str, quoted: bool) -> Option<(PathBuf, String)> {
        let local = quoted.then(|| from.parent().unwrap_or(Path::new("")).join(target));
        local
            .into_iter()
            .chain(self.include_paths.iter().map(|p| p.join(target)))
            .find_map(|candidate| self.source.read(&candidate).map(|text| (candidate, text)))
    }

    fn visit(&mut self, model: &mut FileVariabilityModel, includer: &FileVariabilityModel, depth: usize) {
        if depth > self.depth_limit {
            return;
        }
        for inc in &includer.includes {
            let Some((path, text)) = self.locate(&includer.file, &inc.target, inc.quoted) else {
                log::info!("{}:{}: cannot resolve include `{}`", includer.file.display(), inc.line, inc.target);
                model.diagnostics.push(Diagnostic {
                    file: includer.file.clone(),
                    line: inc.line,
                    kind: DiagnosticKind::UnresolvedInclude,
                    message: format!("include `{}` not found", inc.target),
                });
                continue;
            };
            if self.stack.contains(&path) {
                model.diagnostics.push(Diagnostic {
                    file: includer.file.clone(),
                    line: inc.line,
                    kind: DiagnosticKind::IncludeCycle,
                    message: format!("include cycle through {}", path.display()),
                });
                continue;
            }
            if !self.visited.insert(path.clone()) {
                continue;
            }
            let header = match scan_file(&text, &path) {
                Ok(h) => h,
                Err(e) => {
                    model.diagnostics.push(Diagnostic {
                        file: path.clone(),
                        line: e.line(),
                        kind: DiagnosticKind::UnbalancedDirectives,
                        message: e.to_string(),
                    });
                    continue;
                }
            };
            for b in &header.blocks {
                model.header_options.extend(b.presence_condition.vars());
                let mut b = b.clone();
                b.origin = BlockOrigin::Header(path.clone());
                model.blocks.push(b);
            }
            for atom in &header.opaque {
                if !model.opaque.contains(atom) {
                    model.opaque.push(atom.clone());
                }
            }
            model.diagnostics.extend(header.diagnostics.iter().cloned());
            self.stack.push(path);
            self.visit(model, &header, depth + 1);
            self.stack.pop();
        }
    }
}

/// Follows includes from the file system. See [`resolve_headers_with`].
pub fn resolve_headers(
    model: &FileVariabilityModel,
    include_paths: &[PathBuf],
    depth_limit: usize,
) -> FileVariabilityModel {
    resolve_headers_with(model, &FsHeaders, include_paths, depth_limit)
}

/// Scans headers reachable from `model` within `depth_limit` include levels
/// and adds their blocks (flagged as header-origin) and options. Quoted
/// includes are looked up next to the including file first, then in
/// `include_paths`; angle includes only in `include_paths`. Each header is
/// scanned once.
pub fn resolve_headers_with<S: HeaderSource>(
    model: &FileVariabilityModel,
    source: &S,
    include_paths: &[PathBuf],
    depth_limit: usize,
) -> FileVariabilityModel {
    let mut out = model.clone();
    let mut resolver = Resolver {
        source,
        include_paths,
        depth_limit,
        visited: HashSet::from([model.file.clone()]),
        stack: vec![model.file.clone()],
    };
    resolver.visit(&mut out, model, 1);
    out.options.extend(out.header_options.iter().cloned());
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::opt;

    fn files(entries: &[(&str, &str)]) -> BTreeMap<PathBuf, String> {
        entries.iter().map(|(p, t)| (PathBuf::from(p), t.to_string())).collect()
    }

    #[test]
    fn no_includes_leaves_model_unchanged() {
        let m = scan_file("#ifdef A\n#endif\n", "src/a.c").unwrap();
        assert_eq!(resolve_headers_with(&m, &files(&[]), &[], 5), m);
    }

    #[test]
    fn header_conditionals_add_options() {
        let src = files(&[("src/h.h", "#ifdef H1\nint x;\n#endif\n")]);
        let m = scan_file("#include \"h.h\"\n#ifdef A\n#endif\n", "src/a.c").unwrap();
        let r = resolve_headers_with(&m, &src, &[], 5);
        assert_eq!(r.header_options, [opt("H1")].into_iter().collect());
        assert_eq!(r.options, [opt("A"), opt("H1")].into_iter().collect());
        assert_eq!(r.blocks.len(), 2);
        assert_eq!(r.coverage_blocks(false).count(), 1);
        assert_eq!(r.blocks[1].origin, BlockOrigin::Header(PathBuf::from("src/h.h")));
    }

    #[test]
    fn mutual_includes_terminate() {
        let src = files(&[
            ("inc/x.h", "#include <y.h>\n#ifdef X\n#endif\n"),
            ("inc/y.h", "#include <x.h>\n#ifdef Y\n#endif\n"),
        ]);
        let m = scan_file("#include <x.h>\n", "a.c").unwrap();
        let r = resolve_headers_with(&m, &src, &[PathBuf::from("inc")], 10);
        assert_eq!(r.header_options, [opt("X"), opt("Y")].into_iter().collect());
        assert_eq!(r.blocks.len(), 2);
        assert!(r.diagnostics.iter().any(|d| d.kind == DiagnosticKind::IncludeCycle));
    }

    #[test]
    fn depth_limit_and_unresolved() {
        let src = files(&[("x.h", "#include \"y.h\"\n"), ("y.h", "#ifdef Y\n#endif\n")]);
        let m = scan_file("#include \"x.h\"\n#include \"missing.h\"\n", "a.c").unwrap();
        assert!(resolve_headers_with(&m, &src, &[], 1).header_options.is_empty());
        let deep = resolve_headers_with(&m, &src, &[], 2);
        assert_eq!(deep.header_options, [opt("Y")].into_iter().collect());
        assert!(deep.diagnostics.iter().any(|d| d.kind == DiagnosticKind::UnresolvedInclude));
        assert!(resolve_headers_with(&m, &src, &[], 0).blocks.is_empty());
    }
}
