//! Subsumption-ordered memo of oracle calls.
//!
//! A call is a term tuple with constants at the input positions of the
//! oracle it targets and placeholders at the output positions. A call `c1`
//! subsumes `c2` when instantiating the placeholders of `c1` yields `c2`.
//! Once a call has been performed, every true ground tuple it covers is in
//! the cache, so any call it subsumes can be answered without the oracle.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::oracle::{Answers, ExternalPredicate, OracleError, TalkativeOracle, Tuple};
use crate::pattern::{pattern_of_terms, Pattern, Slot};
use crate::term::{Constant, Term};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Call {
    pub terms: Vec<Term>,
}

impl Call {
    pub fn new(terms: Vec<Term>) -> Self {
        Call { terms }
    }

    /// The call an oracle with `pattern` receives for `inputs`; output
    /// positions get distinct placeholders.
    pub fn for_pattern(pattern: &Pattern, inputs: &[Constant]) -> Self {
        let mut ins = inputs.iter();
        let terms = pattern
            .slots()
            .iter()
            .enumerate()
            .map(|(i, s)| match s {
                Slot::Input => Term::Const(ins.next().expect("input per slot").clone()),
                Slot::Output => Term::Var(format!("_O{i}")),
            })
            .collect();
        Call { terms }
    }

    pub fn pattern(&self) -> Pattern {
        pattern_of_terms(&self.terms)
    }
}

impl fmt::Display for Call {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        for (i, t) in self.terms.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{t}")?;
        }
        f.write_str(")")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CallArityMismatch {
    pub left: usize,
    pub right: usize,
}

impl fmt::Display for CallArityMismatch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "cannot compare calls of arity {} and {}",
            self.left, self.right
        )
    }
}

impl core::error::Error for CallArityMismatch {}

/// True iff some substitution of `general`'s placeholders turns it into
/// `specific`.
pub fn call_subsumes(general: &Call, specific: &Call) -> Result<bool, CallArityMismatch> {
    if general.terms.len() != specific.terms.len() {
        return Err(CallArityMismatch {
            left: general.terms.len(),
            right: specific.terms.len(),
        });
    }
    let mut subst: BTreeMap<&str, &Term> = BTreeMap::new();
    for (g, s) in general.terms.iter().zip(&specific.terms) {
        match g {
            Term::Const(_) => {
                if g != s {
                    return Ok(false);
                }
            }
            Term::Var(v) => match subst.get(v.as_str()) {
                Some(prev) if *prev != s => return Ok(false),
                Some(_) => {}
                None => {
                    subst.insert(v, s);
                }
            },
        }
    }
    Ok(true)
}

/// Raised when the external function of an oracle fails.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OracleFailure {
    pub predicate: String,
    pub pattern: Pattern,
    pub inputs: Tuple,
    pub message: String,
}

impl fmt::Display for OracleFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "oracle #{} {} failed on (", self.predicate, self.pattern)?;
        for (i, c) in self.inputs.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, "): {}", self.message)
    }
}

impl core::error::Error for OracleFailure {}

/// The known extension of one external predicate and the calls that built it.
#[derive(Debug, Clone)]
pub struct ExternalPredicateCache {
    ground_atoms: BTreeSet<Tuple>,
    /// Input tuples of performed calls, grouped by pattern.
    performed: BTreeMap<Pattern, BTreeSet<Tuple>>,
    /// pattern -> inputs -> outputs, over `ground_atoms`; built lazily.
    indexes: BTreeMap<Pattern, BTreeMap<Tuple, BTreeSet<Tuple>>>,
    invocations: u64,
    enabled: bool,
}

impl Default for ExternalPredicateCache {
    fn default() -> Self {
        Self::new()
    }
}

impl ExternalPredicateCache {
    pub fn new() -> Self {
        ExternalPredicateCache {
            ground_atoms: BTreeSet::new(),
            performed: BTreeMap::new(),
            indexes: BTreeMap::new(),
            invocations: 0,
            enabled: true,
        }
    }

    /// A cache that records nothing and forwards every call to the oracle.
    pub fn disabled() -> Self {
        ExternalPredicateCache {
            enabled: false,
            ..Self::new()
        }
    }

    pub fn ground_atoms(&self) -> &BTreeSet<Tuple> {
        &self.ground_atoms
    }

    pub fn performed_calls(&self) -> Vec<Call> {
        self.performed
            .iter()
            .flat_map(|(p, set)| set.iter().map(move |inputs| Call::for_pattern(p, inputs)))
            .collect()
    }

    /// Number of times an external function was actually run.
    pub fn invocations(&self) -> u64 {
        self.invocations
    }

    fn is_subsumed(&self, pattern: &Pattern, inputs: &[Constant]) -> bool {
        // Placeholders of a performed call are distinct, so it subsumes this
        // call iff its input positions are inputs here with equal values.
        let mut positional: Vec<Option<&Constant>> = alloc::vec![None; pattern.len()];
        for (pos, value) in pattern.input_positions().zip(inputs) {
            positional[pos] = Some(value);
        }
        self.performed.iter().any(|(done, set)| {
            done.inputs_within(pattern) && {
                let key: Tuple = done
                    .input_positions()
                    .map(|p| positional[p].expect("contained input").clone())
                    .collect();
                set.contains(&key)
            }
        })
    }

    fn insert_ground(&mut self, tuple: Tuple) {
        if self.ground_atoms.contains(&tuple) {
            return;
        }
        for (pattern, index) in &mut self.indexes {
            index
                .entry(pattern.project_inputs(&tuple))
                .or_default()
                .insert(pattern.project_outputs(&tuple));
        }
        self.ground_atoms.insert(tuple);
    }

    fn lookup(&mut self, pattern: &Pattern, inputs: &[Constant]) -> Answers {
        if !self.indexes.contains_key(pattern) {
            let mut index: BTreeMap<Tuple, BTreeSet<Tuple>> = BTreeMap::new();
            for t in &self.ground_atoms {
                index
                    .entry(pattern.project_inputs(t))
                    .or_default()
                    .insert(pattern.project_outputs(t));
            }
            self.indexes.insert(pattern.clone(), index);
        }
        self.indexes[pattern].get(inputs).cloned().unwrap_or_default()
    }

    /// Answers `inputs` for `oracle`, invoking it only when no performed call
    /// subsumes this one.
    pub fn answer_call(
        &mut self,
        predicate: &ExternalPredicate,
        oracle: &TalkativeOracle,
        inputs: &[Constant],
    ) -> Result<Answers, OracleFailure> {
        let pattern = oracle.pattern();
        let fail = |e: OracleError| OracleFailure {
            predicate: predicate.qualified_name(),
            pattern: pattern.clone(),
            inputs: inputs.to_vec(),
            message: e.message,
        };
        if !self.enabled {
            self.invocations += 1;
            return oracle.evaluate(inputs).map_err(fail);
        }
        if !self.is_subsumed(pattern, inputs) {
            let outputs = oracle.evaluate(inputs).map_err(fail)?;
            self.invocations += 1;
            for out in outputs {
                let tuple = pattern.assemble(inputs, &out);
                self.insert_ground(tuple);
            }
            self.performed
                .entry(pattern.clone())
                .or_default()
                .insert(inputs.to_vec());
        }
        Ok(self.lookup(pattern, inputs))
    }
}

/// One cache per external predicate, keyed by its qualified name.
#[derive(Debug, Clone, Default)]
pub struct OracleCaches {
    caches: BTreeMap<String, ExternalPredicateCache>,
    disabled: bool,
}

impl OracleCaches {
    pub fn new() -> Self {
        Self::default()
    }

    /// Caches that always forward to the oracle.
    pub fn uncached() -> Self {
        OracleCaches {
            caches: BTreeMap::new(),
            disabled: true,
        }
    }

    pub fn for_predicate(&mut self, predicate: &ExternalPredicate) -> &mut ExternalPredicateCache {
        let disabled = self.disabled;
        self.caches.entry(predicate.qualified_name()).or_insert_with(|| {
            if disabled {
                ExternalPredicateCache::disabled()
            } else {
                ExternalPredicateCache::new()
            }
        })
    }

    pub fn get(&self, qualified_name: &str) -> Option<&ExternalPredicateCache> {
        self.caches.get(qualified_name)
    }

    pub fn total_invocations(&self) -> u64 {
        self.caches.values().map(|c| c.invocations()).sum()
    }

    pub fn invocations_of(&self, qualified_name: &str) -> u64 {
        self.caches.get(qualified_name).map_or(0, |c| c.invocations())
    }
}
