//! Locating package manifests on a `;`-separated directory path.

use std::fs;
use std::path::{Path, PathBuf};

use oraclelog_core::{ImportError, Package, PackageLocator};

use crate::manifest::{parse_manifest, Manifest, EXTENSION};

pub const DEFAULT_DIR: &str = "./lib";
pub const ENV_VAR: &str = "ORACLELOG_PATH";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SearchPath {
    dirs: Vec<PathBuf>,
}

impl SearchPath {
    pub fn new(dirs: Vec<PathBuf>) -> Self {
        SearchPath { dirs }
    }

    /// Splits `a;b;` into directories, ignoring empty segments.
    pub fn parse(spec: &str) -> Self {
        SearchPath { dirs: split(spec) }
    }

    /// `env` directories first, then `flag` or the default `./lib`.
    pub fn resolve(flag: Option<&str>, env: Option<&str>) -> Self {
        let mut dirs = env.map(split).unwrap_or_default();
        match flag {
            Some(spec) => dirs.extend(split(spec)),
            None => dirs.push(PathBuf::from(DEFAULT_DIR)),
        }
        SearchPath { dirs }
    }

    pub fn dirs(&self) -> &[PathBuf] {
        &self.dirs
    }

    /// First manifest declaring `package`, scanning directories in order
    /// and files by name within each.
    pub fn find(&self, package: &str) -> Result<Option<Manifest>, String> {
        for dir in &self.dirs {
            for path in manifests_in(dir) {
                let text = fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
                let manifest = parse_manifest(&text, &path).map_err(|e| e.to_string())?;
                if manifest.package == package {
                    return Ok(Some(manifest));
                }
            }
        }
        Ok(None)
    }
}

impl Default for SearchPath {
    fn default() -> Self {
        SearchPath::resolve(None, None)
    }
}

fn split(spec: &str) -> Vec<PathBuf> {
    spec.split(';')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(PathBuf::from)
        .collect()
}

fn manifests_in(dir: &Path) -> Vec<PathBuf> {
    let Ok(entries) = fs::read_dir(dir) else {
        return Vec::new();
    };
    let mut paths: Vec<PathBuf> = entries
        .filter_map(Result::ok)
        .map(|e| e.path())
        .filter(|p| p.is_file() && p.extension().is_some_and(|e| e == EXTENSION))
        .collect();
    paths.sort();
    paths
}

impl PackageLocator for SearchPath {
    fn locate(&self, package: &Package, directive: usize) -> Result<(), ImportError> {
        let manifest_error = |message| ImportError::Manifest {
            package: package.name.clone(),
            message,
            directive,
        };
        match self.find(&package.name).map_err(manifest_error)? {
            Some(manifest) => manifest.check_against(package).map_err(manifest_error),
            None => Err(ImportError::PackageNotFound {
                package: package.name.clone(),
                searched: self.searched(),
                directive,
            }),
        }
    }

    fn searched(&self) -> Vec<String> {
        self.dirs.iter().map(|d| d.display().to_string()).collect()
    }
}
