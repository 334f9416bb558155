//! Interpretations, ground rules and rule instantiation.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;

use crate::ast::Atom;
use crate::cache::{OracleCaches, OracleFailure};
use crate::intern::{ConstId, ConstantRegistry};
use crate::safety::{CompletelyDefinedRule, OracleChoice};
use crate::term::{Constant, Term};

pub type IdTuple = Vec<ConstId>;

/// Ground ordinary atoms, grouped by predicate, plus the constants they use.
#[derive(Debug, Clone, Default)]
pub struct Interpretation {
    relations: BTreeMap<String, BTreeSet<IdTuple>>,
    constants: ConstantRegistry,
}

impl Interpretation {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn constants(&self) -> &ConstantRegistry {
        &self.constants
    }

    pub fn constants_mut(&mut self) -> &mut ConstantRegistry {
        &mut self.constants
    }

    pub fn insert(&mut self, predicate: &str, tuple: IdTuple) -> bool {
        match self.relations.get_mut(predicate) {
            Some(rel) => rel.insert(tuple),
            None => {
                self.relations
                    .insert(predicate.to_string(), BTreeSet::from([tuple]));
                true
            }
        }
    }

    pub fn contains(&self, predicate: &str, tuple: &[ConstId]) -> bool {
        self.relations
            .get(predicate)
            .is_some_and(|rel| rel.contains(tuple))
    }

    pub fn insert_atom(&mut self, predicate: &str, args: &[Constant]) -> bool {
        let tuple = args.iter().map(|c| self.constants.intern(c)).collect();
        self.insert(predicate, tuple)
    }

    pub fn contains_atom(&self, predicate: &str, args: &[Constant]) -> bool {
        let tuple: Option<IdTuple> = args.iter().map(|c| self.constants.lookup(c)).collect();
        tuple.is_some_and(|t| self.contains(predicate, &t))
    }

    pub fn relation(&self, predicate: &str) -> Option<&BTreeSet<IdTuple>> {
        self.relations.get(predicate)
    }

    pub fn predicates(&self) -> impl Iterator<Item = &str> {
        self.relations.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.relations.values().map(BTreeSet::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Every atom, sorted by predicate and then by argument constants.
    pub fn atoms(&self) -> Vec<(String, Vec<Constant>)> {
        let mut out: Vec<(String, Vec<Constant>)> = self
            .relations
            .iter()
            .flat_map(|(p, rel)| {
                rel.iter().map(move |t| {
                    (
                        p.clone(),
                        t.iter().map(|id| self.constants.get(*id).clone()).collect(),
                    )
                })
            })
            .collect();
        out.sort();
        out
    }

    pub fn render_atom(&self, predicate: &str, tuple: &[ConstId]) -> String {
        render_atom(&self.constants, predicate, tuple)
    }
}

fn render_atom(constants: &ConstantRegistry, predicate: &str, tuple: &[ConstId]) -> String {
    let args = tuple
        .iter()
        .map(|id| Term::Const(constants.get(*id).clone()))
        .collect();
    Atom::ordinary(predicate, args).to_string()
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GroundAtom {
    pub predicate: String,
    pub args: IdTuple,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum GroundLiteral {
    Positive(GroundAtom),
    Negative(GroundAtom),
    /// A satisfied external atom, kept only on request. `predicate` is the
    /// name as written, without `#`.
    External {
        atom: GroundAtom,
        positive: bool,
    },
}

impl GroundLiteral {
    pub fn is_external(&self) -> bool {
        matches!(self, GroundLiteral::External { .. })
    }
}

type ValueAtom = (String, Vec<Constant>);
type ValueKey = (Option<ValueAtom>, Vec<(u8, String, Vec<Constant>)>);

/// A variable-free rule. External atoms have already been decided and are
/// absent unless instantiation was asked to keep them.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GroundRule {
    pub head: Option<GroundAtom>,
    pub body: Vec<GroundLiteral>,
}

impl GroundRule {
    pub fn render(&self, constants: &ConstantRegistry) -> String {
        let mut out = String::new();
        if let Some(h) = &self.head {
            out.push_str(&render_atom(constants, &h.predicate, &h.args));
        }
        if !self.body.is_empty() {
            if self.head.is_some() {
                out.push(' ');
            }
            out.push_str(":- ");
            for (i, lit) in self.body.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                match lit {
                    GroundLiteral::Positive(a) => {
                        out.push_str(&render_atom(constants, &a.predicate, &a.args))
                    }
                    GroundLiteral::Negative(a) => {
                        out.push_str("not ");
                        out.push_str(&render_atom(constants, &a.predicate, &a.args));
                    }
                    GroundLiteral::External { atom, positive } => {
                        if !positive {
                            out.push_str("not ");
                        }
                        out.push('#');
                        out.push_str(&render_atom(constants, &atom.predicate, &atom.args));
                    }
                }
            }
        }
        out.push('.');
        out
    }

    /// Ordering by constant values rather than interning order.
    pub fn cmp_by_value(&self, other: &GroundRule, constants: &ConstantRegistry) -> Ordering {
        let key = |r: &GroundRule| -> ValueKey {
            let resolve = |a: &GroundAtom| {
                (
                    a.predicate.clone(),
                    a.args.iter().map(|i| constants.get(*i).clone()).collect(),
                )
            };
            let head = r.head.as_ref().map(resolve);
            let body = r
                .body
                .iter()
                .map(|l| match l {
                    GroundLiteral::Positive(a) => {
                        let (p, args) = resolve(a);
                        (0u8, p, args)
                    }
                    GroundLiteral::Negative(a) => {
                        let (p, args) = resolve(a);
                        (1, p, args)
                    }
                    GroundLiteral::External { atom, positive } => {
                        let (p, args) = resolve(atom);
                        (if *positive { 2 } else { 3 }, p, args)
                    }
                })
                .collect();
            (head, body)
        };
        key(self).cmp(&key(other))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct InstantiateOptions {
    /// Keep satisfied external atoms in emitted ground rules.
    pub keep_external: bool,
}

/// An oracle failed while instantiating a rule.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InstantiationError {
    pub failure: OracleFailure,
    /// Variable bindings in effect when the oracle was called.
    pub bindings: Vec<(String, Constant)>,
}

impl fmt::Display for InstantiationError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.failure.fmt(f)?;
        if !self.bindings.is_empty() {
            f.write_str(" with ")?;
            for (i, (v, c)) in self.bindings.iter().enumerate() {
                if i > 0 {
                    f.write_str(", ")?;
                }
                write!(f, "{v}={c}")?;
            }
        }
        Ok(())
    }
}

impl core::error::Error for InstantiationError {}

/// Restricts one body literal to a subset of its relation.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Delta<'a> {
    pub literal: usize,
    pub tuples: &'a BTreeSet<IdTuple>,
}

/// All ground instances of `cdr` whose bodies hold in `interp`.
///
/// Positive ordinary literals are matched against `interp`; external atoms
/// are answered through `caches` with the chosen oracle, binding output
/// variables to the returned constants (interned on the fly); negated
/// literals are absence checks. Literals are visited in `cdr.body_order`.
pub fn instantiate_rule(
    cdr: &CompletelyDefinedRule,
    interp: &mut Interpretation,
    caches: &mut OracleCaches,
    options: InstantiateOptions,
) -> Result<BTreeSet<GroundRule>, InstantiationError> {
    Ok(instantiate_with_delta(cdr, interp, caches, options, None)?
        .into_iter()
        .collect())
}

pub(crate) fn instantiate_with_delta(
    cdr: &CompletelyDefinedRule,
    interp: &mut Interpretation,
    caches: &mut OracleCaches,
    options: InstantiateOptions,
    delta: Option<Delta<'_>>,
) -> Result<Vec<GroundRule>, InstantiationError> {
    let Interpretation { relations, constants } = interp;
    let compiled = Compiled::new(cdr, constants);
    let mut join = Join {
        compiled: &compiled,
        relations,
        constants,
        caches,
        delta,
        keep_external: options.keep_external,
        env: vec![None; compiled.vars.len()],
        body: vec![None; cdr.source.body.len()],
        out: Vec::new(),
    };
    join.run(0)?;
    Ok(join.out)
}

#[derive(Debug, Clone, Copy)]
enum Arg {
    Const(ConstId),
    Var(usize),
}

enum StepKind<'r> {
    Scan,
    Absent,
    Call {
        choice: &'r OracleChoice,
        positive: bool,
    },
}

struct Step<'r> {
    literal: usize,
    predicate: String,
    args: Vec<Arg>,
    kind: StepKind<'r>,
}

struct Compiled<'r> {
    vars: Vec<String>,
    head: Option<(String, Vec<Arg>)>,
    steps: Vec<Step<'r>>,
}

impl<'r> Compiled<'r> {
    fn new(cdr: &'r CompletelyDefinedRule, constants: &mut ConstantRegistry) -> Self {
        let vars = cdr.source.variables();
        let slot = |name: &str| vars.iter().position(|v| v == name).expect("rule variable");
        let mut args_of = |atom: &Atom| -> Vec<Arg> {
            atom.args
                .iter()
                .map(|t| match t {
                    Term::Const(c) => Arg::Const(constants.intern(c)),
                    Term::Var(v) => Arg::Var(slot(v)),
                })
                .collect()
        };
        let head = cdr
            .source
            .head
            .as_ref()
            .map(|h| (h.predicate.clone(), args_of(h)));
        let steps = cdr
            .ordered_body()
            .map(|(i, lit)| {
                let kind = match cdr.oracle_choice.get(&i) {
                    Some(choice) => StepKind::Call {
                        choice,
                        positive: lit.is_positive(),
                    },
                    None if lit.is_positive() => StepKind::Scan,
                    None => StepKind::Absent,
                };
                let predicate = match &lit.atom.package {
                    Some(pkg) => alloc::format!("{pkg}.{}", lit.atom.predicate),
                    None => lit.atom.predicate.clone(),
                };
                Step {
                    literal: i,
                    predicate,
                    args: args_of(&lit.atom),
                    kind,
                }
            })
            .collect();
        Compiled { vars, head, steps }
    }
}

struct Join<'a> {
    compiled: &'a Compiled<'a>,
    relations: &'a BTreeMap<String, BTreeSet<IdTuple>>,
    constants: &'a mut ConstantRegistry,
    caches: &'a mut OracleCaches,
    delta: Option<Delta<'a>>,
    keep_external: bool,
    env: Vec<Option<ConstId>>,
    body: Vec<Option<GroundLiteral>>,
    out: Vec<GroundRule>,
}

impl Join<'_> {
    fn value(&self, arg: Arg) -> Option<ConstId> {
        match arg {
            Arg::Const(c) => Some(c),
            Arg::Var(i) => self.env[i],
        }
    }

    fn bound_tuple(&self, args: &[Arg]) -> IdTuple {
        args.iter()
            .map(|a| self.value(*a).expect("safety guarantees bound arguments"))
            .collect()
    }

    /// Binds `args` against `values`; returns newly bound slots, or `None`
    /// (with nothing left bound) on mismatch.
    fn unify<'v>(
        &mut self,
        args: impl Iterator<Item = Arg>,
        values: impl Iterator<Item = &'v ConstId>,
    ) -> Option<Vec<usize>> {
        let mut newly = Vec::new();
        for (arg, &val) in args.zip(values) {
            let ok = match arg {
                Arg::Const(c) => c == val,
                Arg::Var(i) => match self.env[i] {
                    Some(v) => v == val,
                    None => {
                        self.env[i] = Some(val);
                        newly.push(i);
                        true
                    }
                },
            };
            if !ok {
                self.undo(&newly);
                return None;
            }
        }
        Some(newly)
    }

    fn undo(&mut self, slots: &[usize]) {
        for &i in slots {
            self.env[i] = None;
        }
    }

    fn run(&mut self, depth: usize) -> Result<(), InstantiationError> {
        let compiled = self.compiled;
        let Some(step) = compiled.steps.get(depth) else {
            self.emit();
            return Ok(());
        };
        match step.kind {
            StepKind::Scan => {
                let tuples = match self.delta {
                    Some(d) if d.literal == step.literal => d.tuples,
                    _ => match self.relations.get(&step.predicate) {
                        Some(rel) => rel,
                        None => return Ok(()),
                    },
                };
                // Bound leading arguments select a contiguous range.
                let prefix: IdTuple = step.args.iter().map_while(|a| self.value(*a)).collect();
                let candidates = tuples
                    .range(prefix.clone()..)
                    .take_while(|t| t.starts_with(&prefix));
                for tuple in candidates {
                    let Some(newly) = self.unify(step.args.iter().copied(), tuple.iter()) else {
                        continue;
                    };
                    self.body[step.literal] = Some(GroundLiteral::Positive(GroundAtom {
                        predicate: step.predicate.clone(),
                        args: tuple.clone(),
                    }));
                    let res = self.run(depth + 1);
                    self.undo(&newly);
                    res?;
                }
                self.body[step.literal] = None;
            }
            StepKind::Absent => {
                let tuple = self.bound_tuple(&step.args);
                let present = self
                    .relations
                    .get(&step.predicate)
                    .is_some_and(|rel| rel.contains(&tuple));
                if !present {
                    self.body[step.literal] = Some(GroundLiteral::Negative(GroundAtom {
                        predicate: step.predicate.clone(),
                        args: tuple,
                    }));
                    self.run(depth + 1)?;
                    self.body[step.literal] = None;
                }
            }
            StepKind::Call { choice, positive } => {
                let pattern = &choice.pattern;
                let inputs: Vec<Constant> = pattern
                    .input_positions()
                    .map(|p| {
                        let id = self.value(step.args[p]).expect("inputs bound by ordering");
                        self.constants.get(id).clone()
                    })
                    .collect();
                let predicate = &choice.predicate;
                let answers = self
                    .caches
                    .for_predicate(predicate)
                    .answer_call(predicate, choice.oracle(), &inputs)
                    .map_err(|failure| InstantiationError {
                        failure,
                        bindings: self.named_bindings(),
                    })?;
                if !positive {
                    if answers.is_empty() {
                        if self.keep_external {
                            self.body[step.literal] = Some(GroundLiteral::External {
                                atom: GroundAtom {
                                    predicate: step.predicate.clone(),
                                    args: self.bound_tuple(&step.args),
                                },
                                positive: false,
                            });
                        }
                        self.run(depth + 1)?;
                        self.body[step.literal] = None;
                    }
                    return Ok(());
                }
                for outputs in answers {
                    let ids: Vec<ConstId> = outputs.iter().map(|c| self.constants.intern(c)).collect();
                    let out_args: Vec<Arg> = pattern.output_positions().map(|p| step.args[p]).collect();
                    let Some(newly) = self.unify(out_args.into_iter(), ids.iter()) else {
                        continue;
                    };
                    if self.keep_external {
                        self.body[step.literal] = Some(GroundLiteral::External {
                            atom: GroundAtom {
                                predicate: step.predicate.clone(),
                                args: self.bound_tuple(&step.args),
                            },
                            positive: true,
                        });
                    }
                    let res = self.run(depth + 1);
                    self.undo(&newly);
                    res?;
                }
                self.body[step.literal] = None;
            }
        }
        Ok(())
    }

    fn named_bindings(&self) -> Vec<(String, Constant)> {
        self.compiled
            .vars
            .iter()
            .zip(&self.env)
            .filter_map(|(v, id)| id.map(|id| (v.clone(), self.constants.get(id).clone())))
            .collect()
    }

    fn emit(&mut self) {
        let head = self.compiled.head.as_ref().map(|(p, args)| GroundAtom {
            predicate: p.clone(),
            args: self.bound_tuple(args),
        });
        let body = self.body.iter().flatten().cloned().collect();
        self.out.push(GroundRule { head, body });
    }
}
