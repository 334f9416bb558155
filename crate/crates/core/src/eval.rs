//! Stratified bottom-up evaluation with on-demand oracle calls.
//!
//! Facts are loaded first. Each stratum is then iterated to a fixpoint
//! (a round that derives no new atom ends it), after which integrity
//! constraints are instantiated against the final model; any satisfied
//! ground constraint aborts evaluation. Constants returned by oracles are
//! interned as they appear, and [`GroundingLimits`] bounds both the number
//! of rounds and the number of such invented constants.

use alloc::boxed::Box;
use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::ast::Program;
use crate::cache::OracleCaches;
use crate::ground::{
    instantiate_with_delta, Delta, GroundAtom, GroundRule, IdTuple, InstantiateOptions, InstantiationError,
    Interpretation,
};
use crate::registry::Bindings;
use crate::safety::{analyze_program, Analysis, AnalysisError, AnalysisOptions, CompletelyDefinedRule};
use crate::stratify::{stratify, NotStratifiable, Stratification};
use crate::term::Term;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GroundingLimits {
    pub max_iterations: usize,
    pub max_new_constants: usize,
}

impl Default for GroundingLimits {
    fn default() -> Self {
        GroundingLimits {
            max_iterations: 10_000,
            max_new_constants: 1_000_000,
        }
    }
}

/// How each stratum reaches its fixpoint.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum Strategy {
    /// Re-evaluate every rule against the whole interpretation each round.
    Naive,
    /// Only consider derivations that use an atom new in the previous round.
    #[default]
    SemiNaive,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EvalOptions {
    pub limits: GroundingLimits,
    pub strategy: Strategy,
    pub keep_external: bool,
    pub allow_unsafe_recursion: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LimitKind {
    Iterations,
    Constants,
}

impl fmt::Display for LimitKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LimitKind::Iterations => "iterations",
            LimitKind::Constants => "invented constants",
        })
    }
}

#[derive(Debug, Clone)]
pub enum EvalError {
    Unsafe(AnalysisError),
    NotStratifiable(NotStratifiable),
    /// `rule` is the index of the violated constraint in the program.
    ConstraintViolation {
        rule: usize,
        ground: String,
    },
    LimitExceeded {
        kind: LimitKind,
        limit: usize,
        rule: usize,
    },
    OracleFailure {
        rule: usize,
        error: Box<InstantiationError>,
    },
}

impl EvalError {
    /// Program rule the error is attributed to, if any.
    pub fn rule(&self) -> Option<usize> {
        match self {
            EvalError::ConstraintViolation { rule, .. }
            | EvalError::LimitExceeded { rule, .. }
            | EvalError::OracleFailure { rule, .. } => Some(*rule),
            EvalError::Unsafe(err) => err.errors.first().map(|(r, _)| *r),
            EvalError::NotStratifiable(_) => None,
        }
    }
}

impl fmt::Display for EvalError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EvalError::Unsafe(e) => write!(f, "unsafe program: {e}"),
            EvalError::NotStratifiable(e) => e.fmt(f),
            EvalError::ConstraintViolation { ground, .. } => {
                write!(f, "constraint violated: {ground}")
            }
            EvalError::LimitExceeded { kind, limit, .. } => {
                write!(f, "limit exceeded: more than {limit} {kind}")
            }
            EvalError::OracleFailure { error, .. } => error.fmt(f),
        }
    }
}

impl core::error::Error for EvalError {}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EvalWarning {
    /// `rule` is the last rule that derived a new atom.
    NearLimit {
        kind: LimitKind,
        used: usize,
        limit: usize,
        rule: Option<usize>,
    },
}

impl fmt::Display for EvalWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EvalWarning::NearLimit {
                kind, used, limit, ..
            } => {
                write!(f, "{used} of {limit} allowed {kind} used")
            }
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EvalStats {
    pub iterations: usize,
    pub invented_constants: usize,
    /// Raw oracle invocations made by this evaluation.
    pub oracle_invocations: u64,
}

#[derive(Debug, Clone)]
pub struct Evaluation {
    pub model: Interpretation,
    pub ground_rules: BTreeSet<GroundRule>,
    pub warnings: Vec<EvalWarning>,
    pub stats: EvalStats,
}

impl Evaluation {
    /// One atom per line, sorted by predicate then arguments.
    pub fn render_model(&self) -> String {
        let mut out = String::new();
        for (pred, args) in self.model.atoms() {
            let atom = crate::ast::Atom::ordinary(pred, args.into_iter().map(Term::Const).collect());
            out.push_str(&alloc::format!("{atom}\n"));
        }
        out
    }

    /// One ground rule per line in source syntax, facts as `atom.`.
    pub fn render_ground_program(&self) -> String {
        let constants = self.model.constants();
        let mut rules: Vec<&GroundRule> = self.ground_rules.iter().collect();
        rules.sort_by(|a, b| a.cmp_by_value(b, constants));
        let mut out = String::new();
        for r in rules {
            out.push_str(&r.render(constants));
            out.push('\n');
        }
        out
    }
}

/// An evaluation context owning the oracle caches. Reusing an engine
/// across evaluations lets later runs answer from earlier calls.
#[derive(Debug)]
pub struct Engine<'b> {
    bindings: &'b Bindings,
    caches: OracleCaches,
}

impl<'b> Engine<'b> {
    pub fn new(bindings: &'b Bindings) -> Self {
        Engine {
            bindings,
            caches: OracleCaches::new(),
        }
    }

    pub fn with_caches(bindings: &'b Bindings, caches: OracleCaches) -> Self {
        Engine { bindings, caches }
    }

    pub fn caches(&self) -> &OracleCaches {
        &self.caches
    }

    /// Analyzes and evaluates `program`.
    pub fn evaluate(&mut self, program: &Program, options: EvalOptions) -> Result<Evaluation, EvalError> {
        let analysis = analyze_program(
            program,
            self.bindings,
            AnalysisOptions {
                allow_unsafe_recursion: options.allow_unsafe_recursion,
            },
        )
        .map_err(EvalError::Unsafe)?;
        self.evaluate_analyzed(program, &analysis, options)
    }

    /// Evaluates an already analyzed program.
    pub fn evaluate_analyzed(
        &mut self,
        program: &Program,
        analysis: &Analysis,
        options: EvalOptions,
    ) -> Result<Evaluation, EvalError> {
        let strata = stratify(program).map_err(EvalError::NotStratifiable)?;
        let before = self.caches.total_invocations();
        let mut run = Run::new(program, analysis, &strata, &mut self.caches, options);
        run.load_facts();
        run.evaluate_strata()?;
        run.check_constraints()?;
        let mut warnings = Vec::new();
        let limits = options.limits;
        let near = |used: usize, limit: usize| used.saturating_mul(10) >= limit.saturating_mul(9);
        if near(run.iterations, limits.max_iterations) {
            warnings.push(EvalWarning::NearLimit {
                kind: LimitKind::Iterations,
                used: run.iterations,
                limit: limits.max_iterations,
                rule: run.last_producer,
            });
        }
        let invented = run.invented();
        if near(invented, limits.max_new_constants) {
            warnings.push(EvalWarning::NearLimit {
                kind: LimitKind::Constants,
                used: invented,
                limit: limits.max_new_constants,
                rule: run.last_producer,
            });
        }
        let stats = EvalStats {
            iterations: run.iterations,
            invented_constants: invented,
            oracle_invocations: 0,
        };
        let Run { interp, ground, .. } = run;
        Ok(Evaluation {
            model: interp,
            ground_rules: ground,
            warnings,
            stats: EvalStats {
                oracle_invocations: self.caches.total_invocations() - before,
                ..stats
            },
        })
    }
}

/// Analyzes and evaluates `program` with fresh caches.
pub fn evaluate(
    program: &Program,
    bindings: &Bindings,
    limits: GroundingLimits,
) -> Result<Evaluation, EvalError> {
    Engine::new(bindings).evaluate(
        program,
        EvalOptions {
            limits,
            ..EvalOptions::default()
        },
    )
}

struct Run<'a> {
    program: &'a Program,
    analysis: &'a Analysis,
    strata: &'a Stratification,
    caches: &'a mut OracleCaches,
    options: EvalOptions,
    interp: Interpretation,
    ground: BTreeSet<GroundRule>,
    iterations: usize,
    baseline_constants: usize,
    last_producer: Option<usize>,
}

impl<'a> Run<'a> {
    fn new(
        program: &'a Program,
        analysis: &'a Analysis,
        strata: &'a Stratification,
        caches: &'a mut OracleCaches,
        options: EvalOptions,
    ) -> Self {
        let mut interp = Interpretation::new();
        for rule in &program.rules {
            for atom in rule.head.iter().chain(rule.body.iter().map(|l| &l.atom)) {
                for c in atom.args.iter().filter_map(Term::as_const) {
                    interp.constants_mut().intern(c);
                }
            }
        }
        let baseline_constants = interp.constants().len();
        Run {
            program,
            analysis,
            strata,
            caches,
            options,
            interp,
            ground: BTreeSet::new(),
            iterations: 0,
            baseline_constants,
            last_producer: None,
        }
    }

    fn invented(&self) -> usize {
        self.interp.constants().len() - self.baseline_constants
    }

    fn instantiate_options(&self) -> InstantiateOptions {
        InstantiateOptions {
            keep_external: self.options.keep_external,
        }
    }

    fn load_facts(&mut self) {
        for rule in &self.program.rules {
            if !rule.is_fact() {
                continue;
            }
            let head = rule.head.as_ref().expect("facts have heads");
            let args: IdTuple = head
                .args
                .iter()
                .map(|t| {
                    let c = t.as_const().expect("ground fact");
                    self.interp.constants_mut().intern(c)
                })
                .collect();
            self.interp.insert(&head.predicate, args.clone());
            self.ground.insert(GroundRule {
                head: Some(GroundAtom {
                    predicate: head.predicate.clone(),
                    args,
                }),
                body: Vec::new(),
            });
        }
    }

    fn evaluate_strata(&mut self) -> Result<(), EvalError> {
        for stratum in &self.strata.strata {
            let rules: Vec<(usize, &'a CompletelyDefinedRule)> = self
                .analysis
                .rules
                .iter()
                .enumerate()
                .filter(|(_, cdr)| {
                    !cdr.source.is_fact()
                        && cdr
                            .source
                            .head
                            .as_ref()
                            .is_some_and(|h| stratum.contains(&h.predicate))
                })
                .collect();
            if rules.is_empty() {
                continue;
            }
            match self.options.strategy {
                Strategy::Naive => self.naive(&rules)?,
                Strategy::SemiNaive => self.semi_naive(&rules, stratum)?,
            }
        }
        Ok(())
    }

    fn instantiate(
        &mut self,
        index: usize,
        cdr: &CompletelyDefinedRule,
        delta: Option<Delta<'_>>,
    ) -> Result<Vec<GroundRule>, EvalError> {
        let options = self.instantiate_options();
        let out =
            instantiate_with_delta(cdr, &mut self.interp, self.caches, options, delta).map_err(|error| {
                EvalError::OracleFailure {
                    rule: index,
                    error: Box::new(error),
                }
            })?;
        if self.invented() > self.options.limits.max_new_constants {
            return Err(EvalError::LimitExceeded {
                kind: LimitKind::Constants,
                limit: self.options.limits.max_new_constants,
                rule: index,
            });
        }
        Ok(out)
    }

    /// Records ground rules; returns head atoms not yet in the model, per
    /// predicate, along with the rule that first produced each batch.
    fn absorb(
        &mut self,
        index: usize,
        produced: Vec<GroundRule>,
        fresh: &mut BTreeMap<String, BTreeSet<IdTuple>>,
        first_producer: &mut Option<usize>,
    ) {
        for g in produced {
            if let Some(h) = &g.head {
                if !self.interp.contains(&h.predicate, &h.args)
                    && fresh
                        .entry(h.predicate.clone())
                        .or_default()
                        .insert(h.args.clone())
                {
                    first_producer.get_or_insert(index);
                    self.last_producer = Some(index);
                }
            }
            self.ground.insert(g);
        }
    }

    fn commit(&mut self, fresh: &BTreeMap<String, BTreeSet<IdTuple>>) {
        for (pred, tuples) in fresh {
            for t in tuples {
                self.interp.insert(pred, t.clone());
            }
        }
    }

    fn next_round(&mut self, rule: usize) -> Result<(), EvalError> {
        self.iterations += 1;
        if self.iterations > self.options.limits.max_iterations {
            return Err(EvalError::LimitExceeded {
                kind: LimitKind::Iterations,
                limit: self.options.limits.max_iterations,
                rule,
            });
        }
        Ok(())
    }

    fn naive(&mut self, rules: &[(usize, &'a CompletelyDefinedRule)]) -> Result<(), EvalError> {
        let mut last_rule = rules[0].0;
        loop {
            self.next_round(last_rule)?;
            let mut fresh = BTreeMap::new();
            let mut producer = None;
            for &(index, cdr) in rules {
                let produced = self.instantiate(index, cdr, None)?;
                self.absorb(index, produced, &mut fresh, &mut producer);
            }
            if fresh.is_empty() {
                return Ok(());
            }
            last_rule = producer.unwrap_or(last_rule);
            self.commit(&fresh);
        }
    }

    fn semi_naive(
        &mut self,
        rules: &[(usize, &'a CompletelyDefinedRule)],
        stratum: &BTreeSet<String>,
    ) -> Result<(), EvalError> {
        // First round: everything against the current model.
        self.next_round(rules[0].0)?;
        let mut delta = BTreeMap::new();
        let mut producer = None;
        for &(index, cdr) in rules {
            let produced = self.instantiate(index, cdr, None)?;
            self.absorb(index, produced, &mut delta, &mut producer);
        }
        self.commit(&delta);

        while !delta.is_empty() {
            self.next_round(producer.unwrap_or(rules[0].0))?;
            let mut fresh = BTreeMap::new();
            producer = None;
            for &(index, cdr) in rules {
                for (lit_index, lit) in cdr.source.body.iter().enumerate() {
                    if !lit.is_positive() || lit.atom.is_external() || !stratum.contains(&lit.atom.predicate)
                    {
                        continue;
                    }
                    let Some(tuples) = delta.get(&lit.atom.predicate) else {
                        continue;
                    };
                    let d = Delta {
                        literal: lit_index,
                        tuples,
                    };
                    let produced = self.instantiate(index, cdr, Some(d))?;
                    self.absorb(index, produced, &mut fresh, &mut producer);
                }
            }
            self.commit(&fresh);
            delta = fresh;
        }
        Ok(())
    }

    fn check_constraints(&mut self) -> Result<(), EvalError> {
        let analysis = self.analysis;
        for (index, cdr) in analysis.rules.iter().enumerate() {
            if !cdr.source.is_constraint() {
                continue;
            }
            let produced = self.instantiate(index, cdr, None)?;
            let mut produced: Vec<_> = produced.into_iter().collect();
            if !produced.is_empty() {
                let constants = self.interp.constants();
                produced.sort_by(|a, b| a.cmp_by_value(b, constants));
                return Err(EvalError::ConstraintViolation {
                    rule: index,
                    ground: produced[0].render(constants),
                });
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse_program;
    use crate::registry::{InMemory, Registry};
    use crate::term::Constant;
    use alloc::string::ToString;

    fn std_bindings() -> Bindings {
        Registry::with_stdlib()
            .resolve_imports(&[], &InMemory)
            .unwrap()
            .bindings
    }

    #[test]
    fn squares_model() {
        let p = parse_program("number(2). number(3). squares(S) :- number(N), #sqr(N,S).").unwrap();
        let b = std_bindings();
        let ev = evaluate(&p, &b, GroundingLimits::default()).unwrap();
        assert_eq!(
            ev.render_model(),
            "number(2)\nnumber(3)\nsquares(4)\nsquares(9)\n"
        );
        assert!(ev.model.constants().contains(&Constant::Int(4)));
        assert!(ev.model.constants().contains(&Constant::Int(9)));
        assert_eq!(ev.stats.invented_constants, 2);
        assert_eq!(
            ev.render_ground_program(),
            "number(2).\nnumber(3).\nsquares(4) :- number(2).\nsquares(9) :- number(3).\n"
        );
    }

    #[test]
    fn value_inventing_recursion_hits_limit() {
        let p = parse_program("int(0). int(X) :- int(Y), #succ(Y,X).").unwrap();
        let b = std_bindings();
        let mut engine = Engine::new(&b);
        let err = engine
            .evaluate(
                &p,
                EvalOptions {
                    limits: GroundingLimits {
                        max_iterations: 10_000,
                        max_new_constants: 100,
                    },
                    allow_unsafe_recursion: true,
                    ..EvalOptions::default()
                },
            )
            .unwrap_err();
        assert!(matches!(
            err,
            EvalError::LimitExceeded {
                kind: LimitKind::Constants,
                limit: 100,
                rule: 1
            }
        ));
        // rejected outright without the waiver
        assert!(matches!(
            Engine::new(&b).evaluate(&p, EvalOptions::default()),
            Err(EvalError::Unsafe(_))
        ));
    }

    #[test]
    fn iteration_limit() {
        let p = parse_program("int(0). int(X) :- int(Y), #succ(Y,X).").unwrap();
        let b = std_bindings();
        let err = Engine::new(&b)
            .evaluate(
                &p,
                EvalOptions {
                    limits: GroundingLimits {
                        max_iterations: 50,
                        max_new_constants: 1_000,
                    },
                    allow_unsafe_recursion: true,
                    ..EvalOptions::default()
                },
            )
            .unwrap_err();
        assert!(matches!(
            err,
            EvalError::LimitExceeded {
                kind: LimitKind::Iterations,
                ..
            }
        ));
    }

    #[test]
    fn constraint_violation() {
        let p = parse_program("p(a). :- p(a).").unwrap();
        let err = evaluate(&p, &Bindings::default(), GroundingLimits::default()).unwrap_err();
        match err {
            EvalError::ConstraintViolation { rule, ground } => {
                assert_eq!(rule, 1);
                assert_eq!(ground, ":- p(a).");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn satisfied_constraints_pass() {
        let p = parse_program("p(1). p(5). :- p(X), #gt(X,10).").unwrap();
        assert!(evaluate(&p, &std_bindings(), GroundingLimits::default()).is_ok());
    }

    #[test]
    fn stratified_negation() {
        let p = parse_program("d(a). d(b). q(a). p(X) :- d(X), not q(X). r(X) :- d(X), not p(X).").unwrap();
        let ev = evaluate(&p, &Bindings::default(), GroundingLimits::default()).unwrap();
        assert!(ev.model.contains_atom("p", &[Constant::sym("b")]));
        assert!(!ev.model.contains_atom("p", &[Constant::sym("a")]));
        assert!(ev.model.contains_atom("r", &[Constant::sym("a")]));
        assert!(!ev.model.contains_atom("r", &[Constant::sym("b")]));
    }

    #[test]
    fn unstratifiable() {
        let p = parse_program("d(a). p(X) :- d(X), not p(X).").unwrap();
        assert!(matches!(
            evaluate(&p, &Bindings::default(), GroundingLimits::default()),
            Err(EvalError::NotStratifiable(_))
        ));
    }

    #[test]
    fn naive_and_semi_naive_agree() {
        let text = "e(1,2). e(2,3). e(3,4). t(X,Y) :- e(X,Y). t(X,Z) :- t(X,Y), t(Y,Z). \
                    s(Z) :- t(X,Y), #add(X,Y,Z).";
        let p = parse_program(text).unwrap();
        let b = std_bindings();
        let run = |strategy| {
            Engine::new(&b)
                .evaluate(
                    &p,
                    EvalOptions {
                        strategy,
                        ..EvalOptions::default()
                    },
                )
                .unwrap()
        };
        let naive = run(Strategy::Naive);
        let semi = run(Strategy::SemiNaive);
        assert_eq!(naive.model.atoms(), semi.model.atoms());
        assert_eq!(naive.render_ground_program(), semi.render_ground_program());
        assert!(naive.model.contains_atom("s", &[Constant::Int(7)]));
    }

    #[test]
    fn cached_replay_invokes_nothing() {
        let p =
            parse_program("n(1). n(2). n(3). f(Y) :- n(X), #fatt(X,Y). g(X) :- f(Y), #fatt(X,Y).").unwrap();
        let b = std_bindings();
        let mut engine = Engine::new(&b);
        let first = engine.evaluate(&p, EvalOptions::default()).unwrap();
        assert!(first.stats.oracle_invocations > 0);
        let second = engine.evaluate(&p, EvalOptions::default()).unwrap();
        assert_eq!(second.stats.oracle_invocations, 0);
        assert_eq!(first.render_model(), second.render_model());
        assert_eq!(
            second
                .render_model()
                .to_string()
                .lines()
                .filter(|l| l.starts_with("g("))
                .count(),
            4
        );
    }
}
