//! Package manifests: the on-disk description of a compiled-in package.
//!
//! ```text
//! package mylib.strings
//! % comments and blank lines are ignored
//! oracle contains/2 ii
//! ```

use std::fmt;
use std::path::{Path, PathBuf};

use oraclelog_core::term::is_symbol_name;
use oraclelog_core::{Package, Pattern};

pub const EXTENSION: &str = "pkg";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OracleDecl {
    pub predicate: String,
    pub arity: usize,
    pub pattern: Pattern,
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Manifest {
    pub path: PathBuf,
    pub package: String,
    pub oracles: Vec<OracleDecl>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestError {
    pub path: PathBuf,
    pub line: usize,
    pub message: String,
}

impl fmt::Display for ManifestError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}", self.path.display(), self.line, self.message)
    }
}

impl std::error::Error for ManifestError {}

pub fn parse_manifest(text: &str, path: &Path) -> Result<Manifest, ManifestError> {
    let err = |line: usize, message: String| ManifestError {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('%').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());

    let (line, first) = lines.next().ok_or_else(|| err(1, "empty manifest".into()))?;
    let package = match first.split_whitespace().collect::<Vec<_>>()[..] {
        ["package", name] if name.split('.').all(is_symbol_name) => name.to_string(),
        _ => {
            return Err(err(
                line,
                format!("expected `package <dotted.path>`, found `{first}`"),
            ))
        }
    };

    let mut oracles = Vec::new();
    for (line, text) in lines {
        let fields: Vec<&str> = text.split_whitespace().collect();
        let ["oracle", signature, pattern] = fields[..] else {
            return Err(err(
                line,
                format!("expected `oracle <pred>/<arity> <pattern>`, found `{text}`"),
            ));
        };
        let (predicate, arity) = signature
            .split_once('/')
            .and_then(|(p, a)| Some((p, a.parse::<usize>().ok()?)))
            .filter(|(p, _)| is_symbol_name(p))
            .ok_or_else(|| err(line, format!("bad predicate signature `{signature}`")))?;
        let pattern: Pattern = pattern.parse().map_err(|e| err(line, format!("{e}")))?;
        if pattern.len() != arity {
            return Err(err(
                line,
                format!("pattern {pattern} does not have arity {arity}"),
            ));
        }
        oracles.push(OracleDecl {
            predicate: predicate.to_string(),
            arity,
            pattern,
            line,
        });
    }
    Ok(Manifest {
        path: path.to_path_buf(),
        package,
        oracles,
    })
}

impl Manifest {
    /// Every declared oracle must be provided by `package`.
    pub fn check_against(&self, package: &Package) -> Result<(), String> {
        for decl in &self.oracles {
            let at = format!("{}:{}", self.path.display(), decl.line);
            let Some(pred) = package.predicate(&decl.predicate) else {
                return Err(format!("{at}: #{} is declared but not provided", decl.predicate));
            };
            if pred.arity != decl.arity {
                return Err(format!(
                    "{at}: #{} is declared with arity {} but provided with arity {}",
                    decl.predicate, decl.arity, pred.arity
                ));
            }
            if pred.oracle(&decl.pattern).is_none() {
                return Err(format!(
                    "{at}: oracle {} of #{} is declared but not provided",
                    decl.pattern, decl.predicate
                ));
            }
        }
        Ok(())
    }
}
