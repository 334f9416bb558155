//! Packages of external predicates and import resolution.
//!
//! Packages are registered up front and stay inactive until an import
//! directive (or the implicit prelude) activates them. Resolution produces a
//! frozen [`Bindings`] value mapping each unqualified external predicate
//! name to exactly one definition; qualified atoms `#pkg.name` look the
//! package up directly.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;

use crate::ast::{Atom, ImportDirective};
use crate::oracle::ExternalPredicate;
use crate::term::is_symbol_name;

/// Identifiers that can never name an external predicate.
pub const RESERVED_NAMES: &[&str] = &["sum", "count", "times", "min", "max", "avg", "template"];

#[derive(Debug, Clone)]
pub struct Package {
    pub name: String,
    pub predicates: Vec<Arc<ExternalPredicate>>,
}

impl Package {
    pub fn new(name: impl Into<String>) -> Self {
        Package {
            name: name.into(),
            predicates: Vec::new(),
        }
    }

    pub fn with(mut self, mut predicate: ExternalPredicate) -> Self {
        predicate.package = self.name.clone();
        self.predicates.push(Arc::new(predicate));
        self
    }

    pub fn predicate(&self, name: &str) -> Option<&Arc<ExternalPredicate>> {
        self.predicates.iter().find(|p| p.name == name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RegistryError {
    InvalidPackagePath(String),
    DuplicatePackagePath(String),
    ReservedName {
        package: String,
        predicate: String,
    },
    MissingBaseOracle {
        package: String,
        predicate: String,
    },
    DuplicatePattern {
        package: String,
        predicate: String,
        pattern: String,
    },
    DuplicatePredicate {
        package: String,
        predicate: String,
    },
    PatternArity {
        package: String,
        predicate: String,
        pattern: String,
        arity: usize,
    },
}

impl fmt::Display for RegistryError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RegistryError::InvalidPackagePath(p) => write!(f, "invalid package path `{p}`"),
            RegistryError::DuplicatePackagePath(p) => write!(f, "package {p} is already registered"),
            RegistryError::ReservedName { package, predicate } => write!(
                f,
                "{package}: #{predicate} is a reserved identifier and cannot be redefined"
            ),
            RegistryError::MissingBaseOracle { package, predicate } => {
                write!(f, "{package}: #{predicate} has no base (all-input) oracle")
            }
            RegistryError::DuplicatePattern {
                package,
                predicate,
                pattern,
            } => write!(f, "{package}: #{predicate} defines pattern {pattern} twice"),
            RegistryError::DuplicatePredicate { package, predicate } => {
                write!(f, "{package}: #{predicate} is defined twice")
            }
            RegistryError::PatternArity {
                package,
                predicate,
                pattern,
                arity,
            } => write!(
                f,
                "{package}: pattern {pattern} does not match arity {arity} of #{predicate}"
            ),
        }
    }
}

impl core::error::Error for RegistryError {}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ImportError {
    PackageNotFound {
        package: String,
        searched: Vec<String>,
        directive: usize,
    },
    PredicateNotFound {
        package: String,
        predicate: String,
        directive: usize,
    },
    /// The on-disk description of a package disagrees with what is registered.
    Manifest {
        package: String,
        message: String,
        directive: usize,
    },
}

impl ImportError {
    /// Index of the offending import directive.
    pub fn directive(&self) -> usize {
        match self {
            ImportError::PackageNotFound { directive, .. }
            | ImportError::PredicateNotFound { directive, .. }
            | ImportError::Manifest { directive, .. } => *directive,
        }
    }
}

impl fmt::Display for ImportError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ImportError::PackageNotFound {
                package, searched, ..
            } => {
                write!(f, "package {package} not found")?;
                if !searched.is_empty() {
                    write!(f, " (searched: {})", searched.join(";"))?;
                }
                Ok(())
            }
            ImportError::PredicateNotFound {
                package, predicate, ..
            } => write!(f, "package {package} does not define #{predicate}"),
            ImportError::Manifest { package, message, .. } => write!(f, "package {package}: {message}"),
        }
    }
}

impl core::error::Error for ImportError {}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ImportWarning {
    /// A later import rebinds an unqualified predicate name.
    PredicateShadowed {
        predicate: String,
        shadowed: String,
        by: String,
        directive: usize,
    },
}

impl fmt::Display for ImportWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ImportWarning::PredicateShadowed {
                predicate,
                shadowed,
                by,
                ..
            } => write!(
                f,
                "#{predicate} from {by} shadows #{predicate} from {shadowed}; use #{shadowed}.{predicate} to select the latter"
            ),
        }
    }
}

/// Decides whether an imported package can actually be loaded.
pub trait PackageLocator {
    fn locate(&self, package: &Package, directive: usize) -> Result<(), ImportError>;

    /// Locations consulted, for diagnostics.
    fn searched(&self) -> Vec<String> {
        Vec::new()
    }
}

/// Treats every registered package as loadable.
#[derive(Debug, Clone, Copy, Default)]
pub struct InMemory;

impl PackageLocator for InMemory {
    fn locate(&self, _package: &Package, _directive: usize) -> Result<(), ImportError> {
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Registry {
    packages: BTreeMap<String, Package>,
    prelude: Vec<String>,
    reserved: BTreeSet<String>,
}

impl Default for Registry {
    fn default() -> Self {
        Self::new()
    }
}

impl Registry {
    /// An empty registry without the standard library.
    pub fn new() -> Self {
        Registry {
            packages: BTreeMap::new(),
            prelude: Vec::new(),
            reserved: RESERVED_NAMES.iter().map(|s| s.to_string()).collect(),
        }
    }

    /// A registry whose standard library packages are active without imports.
    pub fn with_stdlib() -> Self {
        let mut registry = Self::new();
        for package in crate::stdlib::stdlib() {
            registry
                .register_prelude(package)
                .expect("standard library is well formed");
        }
        registry
    }

    pub fn is_reserved(&self, name: &str) -> bool {
        self.reserved.contains(name)
    }

    pub fn package(&self, path: &str) -> Option<&Package> {
        self.packages.get(path)
    }

    pub fn packages(&self) -> impl Iterator<Item = &Package> {
        self.packages.values()
    }

    /// Stores `package`; it becomes active only through an import.
    pub fn register_package(&mut self, package: Package) -> Result<(), RegistryError> {
        self.validate(&package)?;
        self.packages.insert(package.name.clone(), package);
        Ok(())
    }

    /// Stores `package` and activates it for every program.
    pub fn register_prelude(&mut self, package: Package) -> Result<(), RegistryError> {
        let name = package.name.clone();
        self.register_package(package)?;
        self.prelude.push(name);
        Ok(())
    }

    fn validate(&self, package: &Package) -> Result<(), RegistryError> {
        let valid_path = !package.name.is_empty() && package.name.split('.').all(is_symbol_name);
        if !valid_path {
            return Err(RegistryError::InvalidPackagePath(package.name.clone()));
        }
        if self.packages.contains_key(&package.name) {
            return Err(RegistryError::DuplicatePackagePath(package.name.clone()));
        }
        let mut names = BTreeSet::new();
        for pred in &package.predicates {
            let err_pkg = || package.name.clone();
            if self.is_reserved(&pred.name) {
                return Err(RegistryError::ReservedName {
                    package: err_pkg(),
                    predicate: pred.name.clone(),
                });
            }
            if !names.insert(pred.name.as_str()) {
                return Err(RegistryError::DuplicatePredicate {
                    package: err_pkg(),
                    predicate: pred.name.clone(),
                });
            }
            let mut patterns = BTreeSet::new();
            for pattern in pred.patterns() {
                if pattern.len() != pred.arity {
                    return Err(RegistryError::PatternArity {
                        package: err_pkg(),
                        predicate: pred.name.clone(),
                        pattern: pattern.to_string(),
                        arity: pred.arity,
                    });
                }
                if !patterns.insert(pattern) {
                    return Err(RegistryError::DuplicatePattern {
                        package: err_pkg(),
                        predicate: pred.name.clone(),
                        pattern: pattern.to_string(),
                    });
                }
            }
            if pred.base_oracle().is_none() {
                return Err(RegistryError::MissingBaseOracle {
                    package: err_pkg(),
                    predicate: pred.name.clone(),
                });
            }
        }
        Ok(())
    }

    /// Activates the prelude, then each import in order. A later import
    /// rebinding a name wins and produces a [`ImportWarning::PredicateShadowed`].
    pub fn resolve_imports(
        &self,
        imports: &[ImportDirective],
        locator: &dyn PackageLocator,
    ) -> Result<Resolution, ImportError> {
        let mut active: BTreeMap<String, Arc<ExternalPredicate>> = BTreeMap::new();
        for name in &self.prelude {
            for pred in &self.packages[name].predicates {
                active.insert(pred.name.clone(), Arc::clone(pred));
            }
        }
        let mut warnings = Vec::new();
        for (directive, import) in imports.iter().enumerate() {
            let (package, only) = self.target(import, directive, locator)?;
            if !self.prelude.contains(&package.name) {
                locator.locate(package, directive)?;
            }
            let selected = package
                .predicates
                .iter()
                .filter(|p| only.is_none_or(|name| p.name == name));
            for pred in selected {
                if let Some(prev) = active.insert(pred.name.clone(), Arc::clone(pred)) {
                    if !Arc::ptr_eq(&prev, pred) {
                        warnings.push(ImportWarning::PredicateShadowed {
                            predicate: pred.name.clone(),
                            shadowed: prev.package.clone(),
                            by: pred.package.clone(),
                            directive,
                        });
                    }
                }
            }
        }
        Ok(Resolution {
            bindings: Bindings {
                active,
                packages: self.packages.clone(),
            },
            warnings,
        })
    }

    /// `a.b.*` names package `a.b`; `a.b.c` names predicate `c` of package
    /// `a.b`, or failing that the whole package `a.b.c`.
    fn target<'r>(
        &'r self,
        import: &ImportDirective,
        directive: usize,
        locator: &dyn PackageLocator,
    ) -> Result<(&'r Package, Option<&'r str>), ImportError> {
        let dotted = import.dotted();
        let not_found = |package: String| ImportError::PackageNotFound {
            package,
            searched: locator.searched(),
            directive,
        };
        if import.wildcard {
            return self
                .packages
                .get(&dotted)
                .map(|p| (p, None))
                .ok_or_else(|| not_found(dotted));
        }
        if import.path.len() > 1 {
            let prefix = import.path[..import.path.len() - 1].join(".");
            let name = import.path.last().expect("non-empty path");
            if let Some(package) = self.packages.get(&prefix) {
                return match package.predicate(name) {
                    Some(pred) => Ok((package, Some(pred.name.as_str()))),
                    None if self.packages.contains_key(&dotted) => Ok((&self.packages[&dotted], None)),
                    None => Err(ImportError::PredicateNotFound {
                        package: prefix,
                        predicate: name.clone(),
                        directive,
                    }),
                };
            }
        }
        self.packages
            .get(&dotted)
            .map(|p| (p, None))
            .ok_or_else(|| not_found(dotted))
    }
}

#[derive(Debug, Clone)]
pub struct Resolution {
    pub bindings: Bindings,
    pub warnings: Vec<ImportWarning>,
}

/// Frozen name resolution for one program.
#[derive(Debug, Clone, Default)]
pub struct Bindings {
    active: BTreeMap<String, Arc<ExternalPredicate>>,
    packages: BTreeMap<String, Package>,
}

impl Bindings {
    /// Resolves an external atom, qualified or not.
    pub fn lookup(&self, atom: &Atom) -> Option<&Arc<ExternalPredicate>> {
        match &atom.package {
            Some(pkg) => self.packages.get(pkg)?.predicate(&atom.predicate),
            None => self.active.get(&atom.predicate),
        }
    }

    pub fn active(&self) -> impl Iterator<Item = &Arc<ExternalPredicate>> {
        self.active.values()
    }

    /// One line per active predicate: `#name/arity package [patterns]`, the
    /// base pattern starred.
    pub fn listing(&self) -> String {
        let mut out = String::new();
        for pred in self.active.values() {
            let patterns: Vec<String> = pred
                .patterns()
                .map(|p| {
                    if p.is_base() {
                        format!("{p}*")
                    } else {
                        p.to_string()
                    }
                })
                .collect();
            out.push_str(&format!(
                "#{}/{} {} [{}]\n",
                pred.name,
                pred.arity,
                pred.package,
                patterns.join(", ")
            ));
        }
        out
    }
}
