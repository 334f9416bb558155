//! Program representation.
//!
//! Ordinary predicates `p` and external predicates `#p` live in separate
//! namespaces; [`PredicateKey`] is what distinguishes them. External atoms are
//! only ever found in rule bodies, and the parser enforces this before an
//! [`Atom`] of kind [`AtomKind::External`] can reach a head.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::term::Term;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum AtomKind {
    Ordinary,
    External,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Atom {
    pub predicate: String,
    /// Dotted package path of a qualified external atom (`#pkg.sub.name(..)`).
    pub package: Option<String>,
    pub kind: AtomKind,
    pub args: Vec<Term>,
}

impl Atom {
    pub fn ordinary(predicate: impl Into<String>, args: Vec<Term>) -> Self {
        Atom {
            predicate: predicate.into(),
            package: None,
            kind: AtomKind::Ordinary,
            args,
        }
    }

    pub fn external(predicate: impl Into<String>, args: Vec<Term>) -> Self {
        Atom {
            predicate: predicate.into(),
            package: None,
            kind: AtomKind::External,
            args,
        }
    }

    pub fn qualified(package: impl Into<String>, predicate: impl Into<String>, args: Vec<Term>) -> Self {
        Atom {
            predicate: predicate.into(),
            package: Some(package.into()),
            kind: AtomKind::External,
            args,
        }
    }

    pub fn arity(&self) -> usize {
        self.args.len()
    }

    pub fn is_external(&self) -> bool {
        self.kind == AtomKind::External
    }

    pub fn is_ground(&self) -> bool {
        self.args.iter().all(|t| !t.is_var())
    }

    pub fn key(&self) -> PredicateKey {
        PredicateKey {
            kind: self.kind,
            package: self.package.clone(),
            name: self.predicate.clone(),
        }
    }

    pub fn variables(&self) -> impl Iterator<Item = &str> {
        self.args.iter().filter_map(Term::as_var)
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_external() {
            f.write_str("#")?;
        }
        if let Some(pkg) = &self.package {
            write!(f, "{pkg}.")?;
        }
        f.write_str(&self.predicate)?;
        if !self.args.is_empty() {
            f.write_str("(")?;
            for (i, t) in self.args.iter().enumerate() {
                if i > 0 {
                    f.write_str(",")?;
                }
                write!(f, "{t}")?;
            }
            f.write_str(")")?;
        }
        Ok(())
    }
}

/// Identity of a predicate symbol: kind, optional package qualifier and name.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PredicateKey {
    pub kind: AtomKind,
    pub package: Option<String>,
    pub name: String,
}

impl fmt::Display for PredicateKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.kind == AtomKind::External {
            f.write_str("#")?;
        }
        if let Some(pkg) = &self.package {
            write!(f, "{pkg}.")?;
        }
        f.write_str(&self.name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Polarity {
    Positive,
    DefaultNegated,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Literal {
    pub atom: Atom,
    pub polarity: Polarity,
}

impl Literal {
    pub fn positive(atom: Atom) -> Self {
        Literal {
            atom,
            polarity: Polarity::Positive,
        }
    }

    pub fn negated(atom: Atom) -> Self {
        Literal {
            atom,
            polarity: Polarity::DefaultNegated,
        }
    }

    pub fn is_positive(&self) -> bool {
        self.polarity == Polarity::Positive
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if !self.is_positive() {
            f.write_str("not ")?;
        }
        self.atom.fmt(f)
    }
}

/// A rule, fact (empty body) or integrity constraint (no head).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Rule {
    pub head: Option<Atom>,
    pub body: Vec<Literal>,
}

impl Rule {
    pub fn is_fact(&self) -> bool {
        self.body.is_empty() && self.head.as_ref().is_some_and(Atom::is_ground)
    }

    pub fn is_constraint(&self) -> bool {
        self.head.is_none()
    }

    /// Every variable of the rule, in first-occurrence order (head first).
    pub fn variables(&self) -> Vec<String> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        let atoms = self.head.iter().chain(self.body.iter().map(|l| &l.atom));
        for atom in atoms {
            for v in atom.variables() {
                if seen.insert(v) {
                    out.push(String::from(v));
                }
            }
        }
        out
    }

    pub fn head_variables(&self) -> BTreeSet<&str> {
        self.head.iter().flat_map(Atom::variables).collect()
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(head) = &self.head {
            head.fmt(f)?;
            if !self.body.is_empty() {
                f.write_str(" ")?;
            }
        }
        if !self.body.is_empty() {
            f.write_str(":- ")?;
            for (i, lit) in self.body.iter().enumerate() {
                if i > 0 {
                    f.write_str(", ")?;
                }
                lit.fmt(f)?;
            }
        }
        f.write_str(".")
    }
}

/// `#import a.b.*` or `#import a.b.name`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ImportDirective {
    pub path: Vec<String>,
    pub wildcard: bool,
}

impl ImportDirective {
    pub fn wildcard(path: &str) -> Self {
        ImportDirective {
            path: path.split('.').map(String::from).collect(),
            wildcard: true,
        }
    }

    pub fn named(path: &str) -> Self {
        ImportDirective {
            path: path.split('.').map(String::from).collect(),
            wildcard: false,
        }
    }

    pub fn dotted(&self) -> String {
        self.path.join(".")
    }
}

impl fmt::Display for ImportDirective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#import {}", self.dotted())?;
        if self.wildcard {
            f.write_str(".*")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Program {
    pub imports: Vec<ImportDirective>,
    pub rules: Vec<Rule>,
}

impl Program {
    /// Concatenates several source units. Imports keep their relative order.
    pub fn merge(units: impl IntoIterator<Item = Program>) -> Program {
        let mut out = Program::default();
        for unit in units {
            out.imports.extend(unit.imports);
            out.rules.extend(unit.rules);
        }
        out
    }
}

impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for imp in &self.imports {
            writeln!(f, "{imp}")?;
        }
        for rule in &self.rules {
            writeln!(f, "{rule}")?;
        }
        Ok(())
    }
}
