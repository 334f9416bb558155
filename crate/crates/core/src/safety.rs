//! Safety classification, oracle selection and body reordering.
//!
//! Three notions of safety are checked:
//!
//! * usual: every variable occurs in a positive ordinary body atom;
//! * weak: a variable may instead be bound at an output position of the
//!   oracle chosen for an external atom, provided that oracle's input
//!   positions are themselves safe;
//! * strong: weak, plus every head variable is usually safe. Required only
//!   for rules lying on a cycle of the rule dependency graph, where
//!   invented values could otherwise feed themselves forever.
//!
//! Weak safety is decided constructively by [`complete_rule`], which fixes a
//! left-to-right body order and one oracle per external atom using a greedy
//! procedure without backtracking.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::ast::{Literal, Program, Rule};
use crate::graph::{build_dependency_graph, requires_strong_safety, RuleDependencyGraph};
use crate::oracle::{ExternalPredicate, TalkativeOracle};
use crate::pattern::Pattern;
use crate::registry::Bindings;
use crate::term::Term;

/// The oracle selected for one external literal.
#[derive(Debug, Clone)]
pub struct OracleChoice {
    pub predicate: Arc<ExternalPredicate>,
    pub pattern: Pattern,
}

impl OracleChoice {
    pub fn oracle(&self) -> &TalkativeOracle {
        self.predicate
            .oracle(&self.pattern)
            .expect("choice refers to an existing oracle")
    }
}

/// A rule with a fixed instantiation order and one oracle per external atom.
#[derive(Debug, Clone)]
pub struct CompletelyDefinedRule {
    pub source: Rule,
    /// Permutation of body literal indices.
    pub body_order: Vec<usize>,
    /// Keyed by body literal index; present for every external literal.
    pub oracle_choice: BTreeMap<usize, OracleChoice>,
}

impl CompletelyDefinedRule {
    pub fn ordered_body(&self) -> impl Iterator<Item = (usize, &Literal)> {
        self.body_order.iter().map(|&i| (i, &self.source.body[i]))
    }

    /// The rule with its body written in instantiation order.
    pub fn reordered(&self) -> Rule {
        Rule {
            head: self.source.head.clone(),
            body: self.ordered_body().map(|(_, l)| l.clone()).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SafetyError {
    /// Some literal can never be placed, or a head variable is never bound.
    WeaklyUnsafe {
        variables: Vec<String>,
    },
    /// The rule is recursive and these head variables are not usually safe.
    StronglyUnsafe {
        variables: Vec<String>,
    },
    UnknownExternalPredicate {
        predicate: String,
    },
    ExternalArity {
        predicate: String,
        expected: usize,
        found: usize,
    },
}

impl fmt::Display for SafetyError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SafetyError::WeaklyUnsafe { variables } => write!(
                f,
                "variables {} cannot be bound by any ordering of the body",
                variables.join(", ")
            ),
            SafetyError::StronglyUnsafe { variables } => write!(
                f,
                "recursive rule binds head variables {} only through external atoms",
                variables.join(", ")
            ),
            SafetyError::UnknownExternalPredicate { predicate } => {
                write!(f, "unknown external predicate {predicate}")
            }
            SafetyError::ExternalArity {
                predicate,
                expected,
                found,
            } => write!(
                f,
                "{predicate} has arity {expected} but is used with {found} arguments"
            ),
        }
    }
}

impl core::error::Error for SafetyError {}

/// Per-variable usual safety: true iff the variable occurs in a positive
/// ordinary body atom.
pub fn check_usual_safety(rule: &Rule) -> BTreeMap<String, bool> {
    let safe: BTreeSet<&str> = rule
        .body
        .iter()
        .filter(|l| l.is_positive() && !l.atom.is_external())
        .flat_map(|l| l.atom.variables())
        .collect();
    rule.variables()
        .into_iter()
        .map(|v| {
            let ok = safe.contains(v.as_str());
            (v, ok)
        })
        .collect()
}

pub fn is_usually_safe(rule: &Rule) -> bool {
    check_usual_safety(rule).values().all(|ok| *ok)
}

/// Orders the body of `rule` and picks an oracle for each external atom.
///
/// Starting with no bound variables, repeatedly place:
/// 1. the textually first positive external atom that has an admissible
///    oracle (every input position bound), choosing the admissible oracle
///    with the fewest outputs, ties broken by pattern string;
/// 2. otherwise the first negated literal whose variables are all bound
///    (negated external atoms use the base oracle);
/// 3. otherwise the first positive ordinary literal.
///
/// Variables of placed literals (output positions, for external atoms)
/// become bound.
pub fn complete_rule(
    rule: &Rule,
    bindings: &Bindings,
    strong_required: bool,
) -> Result<CompletelyDefinedRule, SafetyError> {
    let mut externals: BTreeMap<usize, Arc<ExternalPredicate>> = BTreeMap::new();
    for (i, lit) in rule.body.iter().enumerate() {
        if !lit.atom.is_external() {
            continue;
        }
        let pred = bindings
            .lookup(&lit.atom)
            .ok_or_else(|| SafetyError::UnknownExternalPredicate {
                predicate: lit.atom.key().to_string(),
            })?;
        if pred.arity != lit.atom.arity() {
            return Err(SafetyError::ExternalArity {
                predicate: lit.atom.key().to_string(),
                expected: pred.arity,
                found: lit.atom.arity(),
            });
        }
        externals.insert(i, Arc::clone(pred));
    }

    let n = rule.body.len();
    let mut placed = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut choice = BTreeMap::new();
    let mut bound: BTreeSet<&str> = BTreeSet::new();

    fn is_bound(bound: &BTreeSet<&str>, t: &Term) -> bool {
        t.as_var().is_none_or(|v| bound.contains(v))
    }

    while order.len() < n {
        // 1. positive external atoms with an admissible oracle
        let external = (0..n).find_map(|i| {
            let lit = &rule.body[i];
            if placed[i] || !lit.is_positive() || !lit.atom.is_external() {
                return None;
            }
            let pred = &externals[&i];
            pred.patterns()
                .filter(|p| {
                    p.input_positions()
                        .all(|pos| is_bound(&bound, &lit.atom.args[pos]))
                })
                .min_by(|a, b| {
                    a.output_count()
                        .cmp(&b.output_count())
                        .then_with(|| a.to_string().cmp(&b.to_string()))
                })
                .map(|p| (i, p.clone()))
        });
        if let Some((i, pattern)) = external {
            let atom = &rule.body[i].atom;
            for pos in pattern.output_positions() {
                if let Term::Var(v) = &atom.args[pos] {
                    bound.insert(v);
                }
            }
            choice.insert(
                i,
                OracleChoice {
                    predicate: Arc::clone(&externals[&i]),
                    pattern,
                },
            );
            placed[i] = true;
            order.push(i);
            continue;
        }

        // 2. negated literals once fully bound
        let negated = (0..n).find(|&i| {
            let lit = &rule.body[i];
            !placed[i] && !lit.is_positive() && lit.atom.args.iter().all(|t| is_bound(&bound, t))
        });
        if let Some(i) = negated {
            if let Some(pred) = externals.get(&i) {
                choice.insert(
                    i,
                    OracleChoice {
                        predicate: Arc::clone(pred),
                        pattern: Pattern::base(pred.arity),
                    },
                );
            }
            placed[i] = true;
            order.push(i);
            continue;
        }

        // 3. positive ordinary literals
        let ordinary = (0..n).find(|&i| {
            let lit = &rule.body[i];
            !placed[i] && lit.is_positive() && !lit.atom.is_external()
        });
        if let Some(i) = ordinary {
            bound.extend(rule.body[i].atom.variables());
            placed[i] = true;
            order.push(i);
            continue;
        }

        let mut stuck = Vec::new();
        for (i, lit) in rule.body.iter().enumerate() {
            if placed[i] {
                continue;
            }
            for v in lit.atom.variables() {
                if !bound.contains(v) && !stuck.iter().any(|s: &String| s == v) {
                    stuck.push(v.to_string());
                }
            }
        }
        return Err(SafetyError::WeaklyUnsafe { variables: stuck });
    }

    let unbound_head: Vec<String> = ordered_head_variables(rule)
        .into_iter()
        .filter(|v| !bound.contains(v.as_str()))
        .collect();
    if !unbound_head.is_empty() {
        return Err(SafetyError::WeaklyUnsafe {
            variables: unbound_head,
        });
    }

    if strong_required {
        let usual = check_usual_safety(rule);
        let bad: Vec<String> = ordered_head_variables(rule)
            .into_iter()
            .filter(|v| !usual.get(v).copied().unwrap_or(false))
            .collect();
        if !bad.is_empty() {
            return Err(SafetyError::StronglyUnsafe { variables: bad });
        }
    }

    Ok(CompletelyDefinedRule {
        source: rule.clone(),
        body_order: order,
        oracle_choice: choice,
    })
}

fn ordered_head_variables(rule: &Rule) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    if let Some(head) = &rule.head {
        for v in head.variables() {
            if !out.iter().any(|o| o == v) {
                out.push(v.to_string());
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    UsuallySafe,
    WeaklySafe,
    StronglySafe,
    Unsafe(SafetyError),
}

impl Verdict {
    pub fn is_safe(&self) -> bool {
        !matches!(self, Verdict::Unsafe(_))
    }

    /// Offending variables of an unsafe verdict.
    pub fn variables(&self) -> &[String] {
        match self {
            Verdict::Unsafe(SafetyError::WeaklyUnsafe { variables })
            | Verdict::Unsafe(SafetyError::StronglyUnsafe { variables }) => variables,
            _ => &[],
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Verdict::UsuallySafe => "UsuallySafe",
            Verdict::WeaklySafe => "WeaklySafe",
            Verdict::StronglySafe => "StronglySafe",
            Verdict::Unsafe(SafetyError::WeaklyUnsafe { .. }) => "WeaklyUnsafe",
            Verdict::Unsafe(SafetyError::StronglyUnsafe { .. }) => "StronglyUnsafe",
            Verdict::Unsafe(_) => "Unresolved",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RuleReport {
    pub verdict: Verdict,
    pub recursive: bool,
    /// Set when strong safety was required, failed, and was waived.
    pub waived: Option<SafetyError>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SafetyReport {
    pub rules: Vec<RuleReport>,
}

impl SafetyReport {
    pub fn all_safe(&self) -> bool {
        self.rules.iter().all(|r| r.verdict.is_safe())
    }

    /// `rule <n>: <verdict> [recursive]`, followed by the offending
    /// variables and reason for unsafe rules. Rules are numbered from 1.
    pub fn render_line(&self, index: usize) -> String {
        let r = &self.rules[index];
        let mut line = format!("rule {}: {}", index + 1, r.verdict.name());
        if r.recursive {
            line.push_str(" recursive");
        }
        if let Verdict::Unsafe(err) = &r.verdict {
            let vars = r.verdict.variables();
            if !vars.is_empty() {
                line.push_str(&format!(" [{}]", vars.join(", ")));
            }
            line.push_str(&format!(": {err}"));
        }
        if let Some(waived) = &r.waived {
            line.push_str(&format!(" (strong safety waived: {waived})"));
        }
        line
    }
}

impl fmt::Display for SafetyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.rules.len() {
            writeln!(f, "{}", self.render_line(i))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct AnalysisOptions {
    /// Downgrade strong-safety failures to a waiver noted in the report.
    pub allow_unsafe_recursion: bool,
}

#[derive(Debug, Clone)]
pub struct Analysis {
    pub rules: Vec<CompletelyDefinedRule>,
    pub report: SafetyReport,
    pub graph: RuleDependencyGraph,
}

#[derive(Debug, Clone)]
pub struct AnalysisError {
    pub report: SafetyReport,
    /// `(rule index, error)` for every rejected rule.
    pub errors: Vec<(usize, SafetyError)>,
}

impl fmt::Display for AnalysisError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, (rule, err)) in self.errors.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "rule {}: {err}", rule + 1)?;
        }
        Ok(())
    }
}

impl core::error::Error for AnalysisError {}

/// Completes every rule, requiring strong safety on dependency cycles.
/// Every rule is examined before failing so the report is complete.
pub fn analyze_program(
    program: &Program,
    bindings: &Bindings,
    options: AnalysisOptions,
) -> Result<Analysis, AnalysisError> {
    let graph = build_dependency_graph(program);
    let mut report = SafetyReport::default();
    let mut completed = Vec::with_capacity(program.rules.len());
    let mut errors = Vec::new();

    for (idx, rule) in program.rules.iter().enumerate() {
        let recursive = requires_strong_safety(idx, &graph);
        let mut waived = None;
        let mut outcome = complete_rule(rule, bindings, recursive);
        if options.allow_unsafe_recursion {
            if let Err(err @ SafetyError::StronglyUnsafe { .. }) = &outcome {
                waived = Some(err.clone());
                outcome = complete_rule(rule, bindings, false);
            }
        }
        let verdict = match outcome {
            Ok(cdr) => {
                completed.push(cdr);
                if is_usually_safe(rule) {
                    Verdict::UsuallySafe
                } else if waived.is_none() && head_usually_safe(rule) {
                    Verdict::StronglySafe
                } else {
                    Verdict::WeaklySafe
                }
            }
            Err(err) => {
                errors.push((idx, err.clone()));
                Verdict::Unsafe(err)
            }
        };
        report.rules.push(RuleReport {
            verdict,
            recursive,
            waived,
        });
    }

    if errors.is_empty() {
        Ok(Analysis {
            rules: completed,
            report,
            graph,
        })
    } else {
        Err(AnalysisError { report, errors })
    }
}

fn head_usually_safe(rule: &Rule) -> bool {
    let usual = check_usual_safety(rule);
    rule.head_variables()
        .iter()
        .all(|v| usual.get(*v).copied().unwrap_or(false))
}
