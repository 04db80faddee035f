//! Extraction of conditional-compilation structure from C sources.
//!
//! The scanner is line oriented: it joins backslash continuations, strips
//! comments, and interprets only the conditional directives and `#include`.
//! Macro definitions are not tracked, so every option is a free boolean.

mod headers;
mod manifest;

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

use crate::formula::{parse_formula_lenient, Formula, OpaqueAtom, OptionId};

pub use headers::{resolve_headers, resolve_headers_with, FsHeaders, HeaderSource};
pub use manifest::{apply_build_manifest, normalize_path, BuildManifest, ManifestError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScanError {
    #[error("{file}:{line}: unbalanced conditional directives: {message}")]
    UnbalancedDirectives { file: String, line: usize, message: String },
}

impl ScanError {
    pub fn line(&self) -> usize {
        match self {
            ScanError::UnbalancedDirectives { line, .. } => *line,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", content = "path", rename_all = "kebab-case")]
pub enum BlockOrigin {
    Source,
    Header(PathBuf),
}

/// One branch of a conditional chain, from its directive line up to the line
/// before the next directive of the same chain.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConditionalBlock {
    pub file: PathBuf,
    pub start_line: usize,
    pub end_line: usize,
    pub local_condition: Formula,
    pub presence_condition: Formula,
    pub depth: usize,
    pub origin: BlockOrigin,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DiagnosticKind {
    OpaqueCondition,
    UnbalancedDirectives,
    UnresolvedInclude,
    IncludeCycle,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    pub file: PathBuf,
    pub line: usize,
    pub kind: DiagnosticKind,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Include {
    pub line: usize,
    pub target: String,
    /// `"..."` rather than `<...>`.
    pub quoted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FileVariabilityModel {
    pub file: PathBuf,
    pub options: BTreeSet<OptionId>,
    pub blocks: Vec<ConditionalBlock>,
    pub file_pc: Formula,
    pub header_options: BTreeSet<OptionId>,
    pub includes: Vec<Include>,
    pub opaque: Vec<OpaqueAtom>,
    pub diagnostics: Vec<Diagnostic>,
}

impl FileVariabilityModel {
    pub fn empty(file: impl Into<PathBuf>) -> Self {
        FileVariabilityModel {
            file: file.into(),
            options: BTreeSet::new(),
            blocks: Vec::new(),
            file_pc: Formula::True,
            header_options: BTreeSet::new(),
            includes: Vec::new(),
            opaque: Vec::new(),
            diagnostics: Vec::new(),
        }
    }

    /// `file_pc ∧ block.presence_condition`.
    pub fn effective_pc(&self, block: &ConditionalBlock) -> Formula {
        Formula::conjoin(self.file_pc.clone(), block.presence_condition.clone())
    }

    /// Blocks that sampling should cover: source blocks, plus header blocks
    /// when `with_headers`.
    pub fn coverage_blocks(&self, with_headers: bool) -> impl Iterator<Item = &ConditionalBlock> {
        self.blocks.iter().filter(move |b| with_headers || b.origin == BlockOrigin::Source)
    }
}

/// Joins continuation lines and removes comments. Each logical line keeps
/// the number of its first physical line.
fn logical_lines(text: &str) -> Vec<(usize, String)> {
    let mut joined: Vec<(usize, String)> = Vec::new();
    let mut pending: Option<(usize, String)> = None;
    for (i, raw) in text.lines().enumerate() {
        let raw = raw.strip_suffix('\r').unwrap_or(raw);
        let (start, mut acc) = pending.take().unwrap_or((i + 1, String::new()));
        match raw.strip_suffix('\\') {
            Some(head) => {
                acc.push_str(head);
                pending = Some((start, acc));
            }
            None => {
                acc.push_str(raw);
                joined.push((start, acc));
            }
        }
    }
    joined.extend(pending);

    let mut in_comment = false;
    joined.into_iter().map(|(n, line)| (n, strip_comments(&line, &mut in_comment))).collect()
}

fn strip_comments(line: &str, in_comment: &mut bool) -> String {
    let chars: Vec<char> = line.chars().collect();
    let mut out = String::with_capacity(line.len());
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let next = chars.get(i + 1).copied();
        if *in_comment {
            if c == '*' && next == Some('/') {
                *in_comment = false;
                out.push(' ');
                i += 2;
            } else {
                i += 1;
            }
            continue;
        }
        match (c, next) {
            ('/', Some('/')) => break,
            ('/', Some('*')) => {
                *in_comment = true;
                i += 2;
            }
            ('"', _) | ('\'', _) => {
                out.push(c);
                i += 1;
                while i < chars.len() {
                    out.push(chars[i]);
                    if chars[i] == '\\' && i + 1 < chars.len() {
                        out.push(chars[i + 1]);
                        i += 2;
                        continue;
                    }
                    i += 1;
                    if chars[i - 1] == c {
                        break;
                    }
                }
            }
            _ => {
                out.push(c);
                i += 1;
            }
        }
    }
    out
}

/// Splits `#  keyword rest` into `(keyword, rest)`.
fn directive(line: &str) -> Option<(&str, &str)> {
    let body = line.trim_start().strip_prefix('#')?.trim_start();
    let end = body.find(|c: char| !(c.is_ascii_alphanumeric() || c == '_')).unwrap_or(body.len());
    Some((&body[..end], body[end..].trim()))
}

fn parse_include(rest: &str) -> Option<(String, bool)> {
    let rest = rest.trim();
    let (close, quoted) = match rest.chars().next()? {
        '"' => ('"', true),
        '<' => ('>', false),
        _ => return None,
    };
    let inner = &rest[1..];
    let end = inner.find(close)?;
    Some((inner[..end].to_string(), quoted))
}

struct Chain {
    line: usize,
    parent_pc: Formula,
    earlier: Vec<Formula>,
    local: Formula,
    start: usize,
    has_else: bool,
}

struct Scanner<'a> {
    path: &'a Path,
    model: FileVariabilityModel,
    stack: Vec<Chain>,
}

impl<'a> Scanner<'a> {
    fn unbalanced(&self, line: usize, message: &str) -> ScanError {
        ScanError::UnbalancedDirectives { file: self.path.display().to_string(), line, message: message.to_string() }
    }

    fn condition(&mut self, line: usize, keyword: &str, rest: &str) -> Formula {
        let name = rest.split_whitespace().next().unwrap_or("");
        let negated = matches!(keyword, "ifndef" | "elifndef");
        if matches!(keyword, "ifdef" | "ifndef" | "elifdef" | "elifndef") {
            if let Ok(id) = OptionId::new(name) {
                let v = Formula::Var(id);
                return if negated { Formula::not(v) } else { v };
            }
        }
        let (f, atoms) = match parse_formula_lenient(rest) {
            Ok(parsed) => parsed,
            Err(_) => {
                let atom = OpaqueAtom::for_text(&format!("{keyword} {rest}"));
                (Formula::Var(atom.option.clone()), vec![atom])
            }
        };
        for atom in atoms {
            log::warn!("{}:{line}: condition `{}` modeled as {}", self.path.display(), atom.text, atom.option);
            self.model.diagnostics.push(Diagnostic {
                file: self.path.to_path_buf(),
                line,
                kind: DiagnosticKind::OpaqueCondition,
                message: format!("`{}` modeled as opaque option {}", atom.text, atom.option),
            });
            if !self.model.opaque.contains(&atom) {
                self.model.opaque.push(atom);
            }
        }
        f
    }

    fn current_pc(&self) -> Formula {
        self.stack.last().map_or(Formula::True, |c| {
            Formula::conjoin_all(
                std::iter::once(c.parent_pc.clone())
                    .chain(c.earlier.iter().cloned().map(Formula::negate))
                    .chain(std::iter::once(c.local.clone())),
            )
        })
    }

    /// Emits the open branch of the innermost chain, ending at `line - 1`.
    fn close_branch(&mut self, line: usize) {
        let pc = self.current_pc();
        let depth = self.stack.len();
        let chain = self.stack.last().expect("open chain");
        self.model.blocks.push(ConditionalBlock {
            file: self.path.to_path_buf(),
            start_line: chain.start,
            end_line: line - 1,
            local_condition: chain.local.clone(),
            presence_condition: pc,
            depth,
            origin: BlockOrigin::Source,
        });
    }

    fn handle(&mut self, line: usize, keyword: &str, rest: &str) -> Result<(), ScanError> {
        match keyword {
            "if" | "ifdef" | "ifndef" => {
                let local = self.condition(line, keyword, rest);
                let parent_pc = self.current_pc();
                self.stack.push(Chain { line, parent_pc, earlier: Vec::new(), local, start: line, has_else: false });
            }
            "elif" | "elifdef" | "elifndef" | "else" => {
                match self.stack.last() {
                    None => return Err(self.unbalanced(line, &format!("#{keyword} without #if"))),
                    Some(c) if c.has_else => return Err(self.unbalanced(line, &format!("#{keyword} after #else"))),
                    Some(_) => {}
                }
                self.close_branch(line);
                let local = if keyword == "else" { Formula::True } else { self.condition(line, keyword, rest) };
                let chain = self.stack.last_mut().expect("open chain");
                let previous = std::mem::replace(&mut chain.local, local);
                chain.earlier.push(previous);
                chain.start = line;
                chain.has_else = keyword == "else";
            }
            "endif" => {
                if self.stack.is_empty() {
                    return Err(self.unbalanced(line, "#endif without #if"));
                }
                self.close_branch(line);
                self.stack.pop();
            }
            "include" | "include_next" => {
                if let Some((target, quoted)) = parse_include(rest) {
                    self.model.includes.push(Include { line, target, quoted });
                }
            }
            _ => {}
        }
        Ok(())
    }
}

/// Scans one C source or header.
pub fn scan_file(text: &str, path: impl AsRef<Path>) -> Result<FileVariabilityModel, ScanError> {
    let path = path.as_ref();
    let mut scanner = Scanner { path, model: FileVariabilityModel::empty(path), stack: Vec::new() };
    for (line, content) in logical_lines(text) {
        if let Some((keyword, rest)) = directive(&content) {
            scanner.handle(line, keyword, rest)?;
        }
    }
    if let Some(open) = scanner.stack.last() {
        return Err(scanner.unbalanced(open.line, "conditional not closed by #endif"));
    }
    let mut model = scanner.model;
    model.blocks.sort_by_key(|b| b.start_line);
    for b in &model.blocks {
        b.presence_condition.collect_vars(&mut model.options);
    }
    Ok(model)
}

/// Union of several models: one option space, every block rewritten to its
/// effective presence condition and tagged with its own file.
pub fn merge_global(models: &[FileVariabilityModel]) -> FileVariabilityModel {
    assert!(!models.is_empty(), "merge_global needs at least one model");
    if let [single] = models {
        return single.clone();
    }
    let mut merged = FileVariabilityModel::empty("<global>");
    for m in models {
        merged.options.extend(m.options.iter().cloned());
        merged.header_options.extend(m.header_options.iter().cloned());
        merged
            .blocks
            .extend(m.blocks.iter().map(|b| ConditionalBlock { presence_condition: m.effective_pc(b), ..b.clone() }));
        merged.includes.extend(m.includes.iter().cloned());
        for atom in &m.opaque {
            if !merged.opaque.contains(atom) {
                merged.opaque.push(atom.clone());
            }
        }
        merged.diagnostics.extend(m.diagnostics.iter().cloned());
    }
    merged
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::{opt, parse_formula};

    fn pcs(text: &str) -> Vec<String> {
        scan_file(text, "t.c").unwrap().blocks.iter().map(|b| b.presence_condition.to_string()).collect()
    }

    #[test]
    fn nested_ifdef_and_ifndef() {
        assert_eq!(pcs("#ifdef X\n#ifndef Y\ncode\n#endif\n#endif\n"), ["X", "X && !Y"]);
    }

    #[test]
    fn elif_chain_excludes_earlier_branches() {
        let text = "#if A\nb1\n#elif B\nb2\n#else\nb3\n#endif\n";
        assert_eq!(pcs(text), ["A", "!A && B", "!A && !B"]);
        let m = scan_file(text, "t.c").unwrap();
        let spans: Vec<_> = m.blocks.iter().map(|b| (b.start_line, b.end_line)).collect();
        assert_eq!(spans, [(1, 2), (3, 4), (5, 6)]);
    }

    #[test]
    fn motivating_snippet() {
        let text = "\
#ifdef SPLT
#  ifdef POINTER
png_sPLT_tp p;
#  else
png_sPLT_t p;
#  endif
  use(p);
#endif
";
        let m = scan_file(text, "pngset.c").unwrap();
        let got: Vec<_> = m.blocks.iter().map(|b| (b.start_line, b.presence_condition.to_string())).collect();
        assert_eq!(got, [(1, "SPLT".to_string()), (2, "SPLT && POINTER".into()), (4, "SPLT && !POINTER".into())]);
        assert_eq!(m.options, [opt("POINTER"), opt("SPLT")].into_iter().collect());
    }

    #[test]
    fn directives_in_comments_and_strings_are_ignored() {
        let text = "/* #ifdef A\n#endif */\nconst char *s = \"#ifdef B\";\n// #if C\n#if D /* x */ // y\n#endif\n";
        assert_eq!(pcs(text), ["D"]);
    }

    #[test]
    fn continuations_and_spacing() {
        assert_eq!(pcs("  #  if defined(A) && \\\n   defined(B)\n#endif\n"), ["A && B"]);
    }

    #[test]
    fn unbalanced_directives_are_errors() {
        assert_eq!(scan_file("#endif\n", "t.c").unwrap_err().line(), 1);
        assert_eq!(scan_file("x\n#ifdef A\n", "t.c").unwrap_err().line(), 2);
        assert_eq!(scan_file("#if A\n#else\n#else\n#endif\n", "t.c").unwrap_err().line(), 3);
        assert_eq!(scan_file("#else\n", "t.c").unwrap_err().line(), 1);
    }

    #[test]
    fn unsupported_conditions_become_opaque_options() {
        let m = scan_file("#if VERSION > 2 && A\n#endif\n", "t.c").unwrap();
        assert_eq!(m.opaque.len(), 1);
        assert_eq!(m.opaque[0].text, "VERSION > 2");
        assert!(m.options.contains(&m.opaque[0].option));
        assert!(m.options.contains("A"));
        assert_eq!(m.diagnostics[0].kind, DiagnosticKind::OpaqueCondition);
        let broken = scan_file("#if A &&\n#endif\n", "t.c").unwrap();
        assert_eq!(broken.opaque.len(), 1);
    }

    #[test]
    fn includes_are_recorded() {
        let m = scan_file("#include \"a.h\"\n# include <sys/b.h>\n", "t.c").unwrap();
        assert_eq!(
            m.includes,
            [
                Include { line: 1, target: "a.h".into(), quoted: true },
                Include { line: 2, target: "sys/b.h".into(), quoted: false },
            ]
        );
    }

    #[test]
    fn merge_keeps_files_and_applies_file_pc() {
        let a = scan_file("#ifdef A\n#endif\n", "a.c").unwrap();
        let mut b = scan_file("#ifdef B\n#endif\n", "b.c").unwrap();
        b.file_pc = parse_formula("NET").unwrap();
        b.options.insert(opt("NET"));
        assert_eq!(merge_global(std::slice::from_ref(&a)), a);
        let g = merge_global(&[a, b]);
        assert_eq!(g.options, [opt("A"), opt("B"), opt("NET")].into_iter().collect());
        assert_eq!(g.blocks[1].presence_condition.to_string(), "NET && B");
        assert_eq!(g.blocks[1].file, PathBuf::from("b.c"));
    }
}
