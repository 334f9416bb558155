//! Datalog with external predicates backed by talkative oracles.
//!
//! A program is parsed into an [`ast::Program`], its `#import` directives
//! are resolved against a [`registry::Registry`], every rule is checked for
//! safety and given an evaluation order ([`safety::analyze_program`]), and
//! the result is grounded bottom-up ([`eval::Engine`]). Oracle calls go
//! through per-predicate caches so equivalent calls run once.
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod ast;
pub mod cache;
pub mod eval;
pub mod graph;
pub mod ground;
pub mod intern;
pub mod oracle;
pub mod parser;
pub mod pattern;
pub mod registry;
pub mod safety;
pub mod stdlib;
pub mod stratify;
pub mod term;

pub use ast::{Atom, AtomKind, ImportDirective, Literal, Polarity, PredicateKey, Program, Rule};
pub use cache::{call_subsumes, Call, ExternalPredicateCache, OracleCaches, OracleFailure};
pub use eval::{
    evaluate, Engine, EvalError, EvalOptions, EvalStats, EvalWarning, Evaluation, GroundingLimits, LimitKind,
    Strategy,
};
pub use ground::{instantiate_rule, GroundRule, InstantiateOptions, Interpretation};
pub use intern::{intern_constant, ConstId, ConstantRegistry};
pub use oracle::{Answers, ExternalPredicate, OracleError, TalkativeOracle, Tuple};
pub use parser::{parse_program, parse_rule, ParseError, ParseErrorKind};
pub use pattern::{Pattern, Slot};
pub use registry::{
    Bindings, ImportError, ImportWarning, InMemory, Package, PackageLocator, Registry, Resolution,
};
pub use safety::{
    analyze_program, check_usual_safety, complete_rule, Analysis, AnalysisOptions, CompletelyDefinedRule,
    SafetyError, SafetyReport, Verdict,
};
pub use stratify::{stratify, Stratification};
pub use term::{Constant, Term};
