//! Talkative oracles and external predicate definitions.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;

use crate::pattern::Pattern;
use crate::term::Constant;

pub type Tuple = Vec<Constant>;

/// The answer of an oracle: every output tuple it accepts. Empty means the
/// call failed.
pub type Answers = BTreeSet<Tuple>;

pub type OracleFn = dyn Fn(&[Constant]) -> Result<Answers, OracleError> + Send + Sync;

/// Raised by external code when it cannot evaluate a call at all (wrong
/// constant kind, arithmetic overflow). Distinct from an empty answer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OracleError {
    pub message: String,
}

impl OracleError {
    pub fn new(message: impl Into<String>) -> Self {
        OracleError {
            message: message.into(),
        }
    }
}

impl fmt::Display for OracleError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl core::error::Error for OracleError {}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct OracleSignature {
    pub predicate: String,
    pub arity: usize,
    pub pattern: Pattern,
}

/// An evaluation function bound to one pattern of an external predicate.
///
/// `evaluate` receives one constant per input slot and answers with output
/// tuples, one constant per output slot. It must be deterministic within a
/// run and consistent with the predicate's base oracle.
#[derive(Clone)]
pub struct TalkativeOracle {
    signature: OracleSignature,
    function: Arc<OracleFn>,
}

impl TalkativeOracle {
    pub fn new<F>(predicate: impl Into<String>, pattern: Pattern, function: F) -> Self
    where
        F: Fn(&[Constant]) -> Result<Answers, OracleError> + Send + Sync + 'static,
    {
        TalkativeOracle {
            signature: OracleSignature {
                predicate: predicate.into(),
                arity: pattern.len(),
                pattern,
            },
            function: Arc::new(function),
        }
    }

    pub fn signature(&self) -> &OracleSignature {
        &self.signature
    }

    pub fn pattern(&self) -> &Pattern {
        &self.signature.pattern
    }

    /// Runs the external function, checking tuple widths on both sides.
    pub fn evaluate(&self, inputs: &[Constant]) -> Result<Answers, OracleError> {
        let pattern = self.pattern();
        if inputs.len() != pattern.input_count() {
            return Err(OracleError::new(alloc::format!(
                "oracle {}/{} {} expects {} inputs, got {}",
                self.signature.predicate,
                self.signature.arity,
                pattern,
                pattern.input_count(),
                inputs.len()
            )));
        }
        let answers = (self.function)(inputs)?;
        let width = pattern.output_count();
        if let Some(bad) = answers.iter().find(|t| t.len() != width) {
            return Err(OracleError::new(alloc::format!(
                "oracle {}/{} {} returned a tuple of width {}, expected {}",
                self.signature.predicate,
                self.signature.arity,
                pattern,
                bad.len(),
                width
            )));
        }
        Ok(answers)
    }
}

impl fmt::Debug for TalkativeOracle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TalkativeOracle")
            .field("signature", &self.signature)
            .finish_non_exhaustive()
    }
}

/// An external predicate with all its oracles.
#[derive(Debug, Clone)]
pub struct ExternalPredicate {
    pub name: String,
    pub arity: usize,
    /// Dotted path of the owning package; filled in when added to a package.
    pub package: String,
    pub oracles: Vec<TalkativeOracle>,
}

impl ExternalPredicate {
    pub fn new(name: impl Into<String>, arity: usize) -> Self {
        ExternalPredicate {
            name: name.into(),
            arity,
            package: String::new(),
            oracles: Vec::new(),
        }
    }

    /// Adds an oracle for `pattern` (written as an `i`/`O` string).
    ///
    /// Panics on a malformed pattern string; patterns are fixed in code.
    pub fn with_oracle<F>(mut self, pattern: &str, function: F) -> Self
    where
        F: Fn(&[Constant]) -> Result<Answers, OracleError> + Send + Sync + 'static,
    {
        let pattern: Pattern = pattern.parse().expect("valid oracle pattern");
        self.oracles
            .push(TalkativeOracle::new(self.name.clone(), pattern, function));
        self
    }

    pub fn qualified_name(&self) -> String {
        if self.package.is_empty() {
            self.name.clone()
        } else {
            alloc::format!("{}.{}", self.package, self.name)
        }
    }

    pub fn base_oracle(&self) -> Option<&TalkativeOracle> {
        self.oracles.iter().find(|o| o.pattern().is_base())
    }

    pub fn oracle(&self, pattern: &Pattern) -> Option<&TalkativeOracle> {
        self.oracles.iter().find(|o| o.pattern() == pattern)
    }

    pub fn patterns(&self) -> impl Iterator<Item = &Pattern> {
        self.oracles.iter().map(TalkativeOracle::pattern)
    }

    /// Decides a fully ground atom with the base oracle.
    pub fn holds(&self, args: &[Constant]) -> Result<bool, OracleError> {
        let base = self
            .base_oracle()
            .ok_or_else(|| OracleError::new("no base oracle"))?;
        Ok(!base.evaluate(args)?.is_empty())
    }
}

/// `Ok` with the single empty tuple when `holds`, else the empty set.
pub fn truth(holds: bool) -> Answers {
    let mut answers = Answers::new();
    if holds {
        answers.insert(Vec::new());
    }
    answers
}

/// A one-tuple answer.
pub fn single(values: Tuple) -> Answers {
    let mut answers = Answers::new();
    answers.insert(values);
    answers
}
