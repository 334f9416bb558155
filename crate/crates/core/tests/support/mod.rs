//! Generated programs and a reference evaluator over materialized tables.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::sync::{Arc, Mutex, OnceLock};

use oraclelog_core::safety::complete_rule;
use oraclelog_core::{
    parse_program, parse_rule, Bindings, CompletelyDefinedRule, Constant, InMemory, Program, Registry, Term,
};
use proptest::prelude::*;

pub const DOMAIN: std::ops::RangeInclusive<i64> = -50..=50;

pub type Atoms = BTreeSet<(String, Vec<Constant>)>;

pub fn std_bindings() -> Bindings {
    Registry::with_stdlib()
        .resolve_imports(&[], &InMemory)
        .expect("stdlib resolves")
        .bindings
}

// Derived predicates and their arities; level k may use p_j for j <= k
// positively and only j < k under negation.
const DERIVED: [(&str, usize); 3] = [("p", 1), ("q", 2), ("r", 1)];
const EXTERNALS: [(&str, usize); 6] = [
    ("succ", 2),
    ("sqr", 2),
    ("fatt", 2),
    ("add", 3),
    ("div", 3),
    ("gt", 2),
];
const VARS: [&str; 4] = ["X", "Y", "Z", "W"];

/// A body-variable pick resolved at render time against the variables
/// bound so far, so most generated rules are completable.
#[derive(Debug, Clone)]
enum Arg {
    Bound(usize),
    Int(i64),
}

#[derive(Debug, Clone)]
struct RuleShape {
    level: usize,
    head: Vec<usize>,
    positives: Vec<(usize, Vec<usize>)>,
    /// (predicate, positive, args, position left free)
    externals: Vec<(usize, bool, Vec<Arg>, Option<usize>)>,
    negated: Option<(usize, Vec<usize>)>,
    seed: u64,
}

fn arg() -> impl Strategy<Value = Arg> {
    prop_oneof![4 => (0usize..8).prop_map(Arg::Bound), 1 => (-3i64..=3).prop_map(Arg::Int)]
}

fn picks(n: usize) -> impl Strategy<Value = Vec<usize>> {
    proptest::collection::vec(0usize..8, n)
}

fn rule_shape() -> impl Strategy<Value = RuleShape> {
    (0..DERIVED.len()).prop_flat_map(|level| {
        // ordinary choices: 0 = n/1, 1 = e/2, 2.. = derived
        let positive = (0..level + 3).prop_flat_map(|p| {
            proptest::collection::vec(0..3usize, ordinary_arity(p)).prop_map(move |v| (p, v))
        });
        let negative = (0..level + 2).prop_flat_map(|p| picks(ordinary_arity(p)).prop_map(move |v| (p, v)));
        let external = (0..EXTERNALS.len(), proptest::bool::weighted(0.8)).prop_flat_map(|(e, pos)| {
            let arity = EXTERNALS[e].1;
            (
                proptest::collection::vec(arg(), arity),
                proptest::option::weighted(0.6, 0..arity),
            )
                .prop_map(move |(a, free)| (e, pos, a, free))
        });
        (
            Just(level),
            picks(DERIVED[level].1),
            proptest::collection::vec(positive, 1..=2),
            proptest::collection::vec(external, 0..=2),
            proptest::option::weighted(0.3, negative),
            any::<u64>(),
        )
            .prop_map(|(level, head, positives, externals, negated, seed)| RuleShape {
                level,
                head,
                positives,
                externals,
                negated,
                seed,
            })
    })
}

fn ordinary_name(p: usize) -> &'static str {
    match p {
        0 => "n",
        1 => "e",
        d => DERIVED[d - 2].0,
    }
}

fn ordinary_arity(p: usize) -> usize {
    match p {
        0 => 1,
        1 => 2,
        d => DERIVED[d - 2].1,
    }
}

fn atom(name: &str, args: &[&str]) -> String {
    format!("{name}({})", args.join(","))
}

impl RuleShape {
    fn render(&self) -> String {
        let mut bound: Vec<&str> = Vec::new();
        let mut body: Vec<String> = Vec::new();
        for (p, v) in &self.positives {
            let args: Vec<&str> = v.iter().map(|&i| VARS[i]).collect();
            for a in &args {
                if !bound.contains(a) {
                    bound.push(a);
                }
            }
            body.push(atom(ordinary_name(*p), &args));
        }
        let pick = |bound: &[&'static str], i: usize| bound[i % bound.len()];
        for (e, positive, args, free) in &self.externals {
            let mut fresh = None;
            let rendered: Vec<String> = args
                .iter()
                .enumerate()
                .map(|(pos, a)| match (a, *free == Some(pos) && *positive) {
                    (_, true) => {
                        let v = VARS.iter().copied().find(|v| !bound.contains(v)).unwrap_or("V");
                        fresh = Some(v);
                        v.to_string()
                    }
                    (Arg::Bound(i), false) => pick(&bound, *i).to_string(),
                    (Arg::Int(v), false) => v.to_string(),
                })
                .collect();
            bound.extend(fresh);
            let neg = if *positive { "" } else { "not " };
            body.push(format!("{neg}#{}({})", EXTERNALS[*e].0, rendered.join(",")));
        }
        if let Some((p, v)) = &self.negated {
            let args: Vec<&str> = v.iter().map(|&i| pick(&bound, i)).collect();
            body.push(format!("not {}", atom(ordinary_name(*p), &args)));
        }
        // deterministic shuffle so binders may follow their users
        let mut state = self.seed | 1;
        for i in (1..body.len()).rev() {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            body.swap(i, (state % (i as u64 + 1)) as usize);
        }
        let head: Vec<&str> = self.head.iter().map(|&i| pick(&bound, i)).collect();
        format!("{} :- {}.", atom(DERIVED[self.level].0, &head), body.join(", "))
    }
}

/// A generated program: facts over `n/1` and `e/2` plus up to five rules,
/// each individually completable under the stdlib.
#[derive(Debug, Clone)]
pub struct Generated {
    pub text: String,
    pub rules: usize,
}

pub fn program() -> impl Strategy<Value = Generated> {
    (
        proptest::collection::btree_set(-6i64..=6, 1..6),
        proptest::collection::btree_set((-6i64..=6, -6i64..=6), 0..6),
        proptest::collection::vec(rule_shape(), 1..=5),
    )
        .prop_map(|(ns, es, shapes)| {
            let bindings = std_bindings();
            let mut text = String::new();
            for n in ns {
                text.push_str(&format!("n({n}).\n"));
            }
            for (a, b) in es {
                text.push_str(&format!("e({a},{b}).\n"));
            }
            let mut rules = 0;
            for shape in shapes {
                let line = shape.render();
                let rule = parse_rule(&line).expect("generated rule parses");
                let head = rule.head.as_ref().expect("head").predicate.clone();
                let recursive = rule
                    .body
                    .iter()
                    .any(|l| l.is_positive() && !l.atom.is_external() && l.atom.predicate == head);
                if complete_rule(&rule, &bindings, recursive).is_ok() {
                    text.push_str(&line);
                    text.push('\n');
                    rules += 1;
                }
            }
            Generated { text, rules }
        })
}

pub fn parse(g: &Generated) -> Program {
    parse_program(&g.text).expect("generated program parses")
}

/// Every true tuple of the base oracle of `#name` over `DOMAIN`.
type Table = Arc<BTreeSet<Vec<Constant>>>;

fn table(bindings: &Bindings, name: &str, arity: usize) -> Table {
    static TABLES: OnceLock<Mutex<BTreeMap<String, Table>>> = OnceLock::new();
    let tables = TABLES.get_or_init(Default::default);
    if let Some(t) = tables.lock().unwrap().get(name) {
        return Arc::clone(t);
    }
    let probe = oraclelog_core::Atom::external(name, vec![Term::int(0); arity]);
    let pred = bindings.lookup(&probe).expect("stdlib predicate");
    let mut out = BTreeSet::new();
    let mut tuple = vec![*DOMAIN.start(); arity];
    loop {
        let args: Vec<Constant> = tuple.iter().map(|&v| Constant::Int(v)).collect();
        if pred.holds(&args).unwrap_or(false) {
            out.insert(args);
        }
        let mut i = 0;
        loop {
            if i == arity {
                let t = Arc::new(out);
                tables.lock().unwrap().insert(name.to_string(), Arc::clone(&t));
                return t;
            }
            if tuple[i] < *DOMAIN.end() {
                tuple[i] += 1;
                break;
            }
            tuple[i] = *DOMAIN.start();
            i += 1;
        }
    }
}

struct Lit {
    relation: String,
    table: Option<Table>,
    args: Vec<Term>,
    positive: bool,
}

/// Stratified naive evaluation with every external atom replaced by a
/// lookup in its materialized table.
pub fn brute_force(program: &Program, bindings: &Bindings) -> Atoms {
    let mut facts: BTreeMap<String, BTreeSet<Vec<Constant>>> = BTreeMap::new();
    let mut rules = Vec::new();
    for rule in &program.rules {
        let head = rule.head.as_ref().expect("no constraints generated");
        if rule.body.is_empty() {
            let args = head.args.iter().map(|t| t.as_const().unwrap().clone()).collect();
            facts.entry(head.predicate.clone()).or_default().insert(args);
            continue;
        }
        let lits: Vec<Lit> = rule
            .body
            .iter()
            .map(|l| Lit {
                relation: l.atom.predicate.clone(),
                table: l
                    .atom
                    .is_external()
                    .then(|| table(bindings, &l.atom.predicate, l.atom.arity())),
                args: l.atom.args.clone(),
                positive: l.is_positive(),
            })
            .collect();
        rules.push((head.predicate.clone(), head.args.clone(), lits));
    }

    // level(p) = max over its rules of level(q) (+1 under negation)
    let mut level: BTreeMap<String, usize> = BTreeMap::new();
    loop {
        let mut changed = false;
        for (head, _, lits) in &rules {
            let need = lits
                .iter()
                .filter(|l| l.table.is_none())
                .map(|l| level.get(&l.relation).copied().unwrap_or(0) + usize::from(!l.positive))
                .max()
                .unwrap_or(0);
            let cur = level.entry(head.clone()).or_insert(0);
            if need > *cur {
                *cur = need;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    let top = level.values().copied().max().unwrap_or(0);
    for l in 0..=top {
        loop {
            let mut fresh = Vec::new();
            for (head, head_args, lits) in rules.iter().filter(|(h, _, _)| level[h] == l) {
                let mut env = BTreeMap::new();
                let mut done = vec![false; lits.len()];
                join(lits, &mut done, &mut env, &facts, &mut |env| {
                    let args: Vec<Constant> = head_args.iter().map(|t| value(t, env).unwrap()).collect();
                    fresh.push((head.clone(), args));
                });
            }
            let mut grew = false;
            for (p, args) in fresh {
                grew |= facts.entry(p).or_default().insert(args);
            }
            if !grew {
                break;
            }
        }
    }
    facts
        .into_iter()
        .flat_map(|(p, set)| set.into_iter().map(move |t| (p.clone(), t)))
        .collect()
}

fn value(t: &Term, env: &BTreeMap<String, Constant>) -> Option<Constant> {
    match t {
        Term::Const(c) => Some(c.clone()),
        Term::Var(v) => env.get(v).cloned(),
    }
}

fn relation_of<'a>(
    l: &'a Lit,
    facts: &'a BTreeMap<String, BTreeSet<Vec<Constant>>>,
    empty: &'a BTreeSet<Vec<Constant>>,
) -> &'a BTreeSet<Vec<Constant>> {
    match &l.table {
        Some(t) => t,
        None => facts.get(&l.relation).unwrap_or(empty),
    }
}

fn join(
    lits: &[Lit],
    done: &mut Vec<bool>,
    env: &mut BTreeMap<String, Constant>,
    facts: &BTreeMap<String, BTreeSet<Vec<Constant>>>,
    emit: &mut dyn FnMut(&BTreeMap<String, Constant>),
) {
    let empty = BTreeSet::new();
    let relation = |l| relation_of(l, facts, &empty);
    let next = (0..lits.len())
        .filter(|&i| !done[i] && lits[i].positive)
        .max_by_key(|&i| {
            let bound = lits[i].args.iter().filter(|t| value(t, env).is_some()).count();
            (
                bound,
                std::cmp::Reverse(relation(&lits[i]).len()),
                std::cmp::Reverse(i),
            )
        });
    let Some(i) = next else {
        for (l, d) in lits.iter().zip(done.iter()) {
            if !*d {
                let tuple: Vec<Constant> = l
                    .args
                    .iter()
                    .map(|t| value(t, env).expect("negated literal fully bound"))
                    .collect();
                if relation(l).contains(&tuple) {
                    return;
                }
            }
        }
        emit(env);
        return;
    };
    done[i] = true;
    for tuple in relation(&lits[i]) {
        let mut added = Vec::new();
        let mut ok = true;
        for (t, c) in lits[i].args.iter().zip(tuple) {
            match value(t, env) {
                Some(v) if &v != c => {
                    ok = false;
                    break;
                }
                Some(_) => {}
                None => {
                    let name = t.as_var().unwrap().to_string();
                    env.insert(name.clone(), c.clone());
                    added.push(name);
                }
            }
        }
        if ok {
            join(lits, done, env, facts, emit);
        }
        for v in added {
            env.remove(&v);
        }
    }
    done[i] = false;
}

pub fn in_domain(c: &Constant) -> bool {
    c.as_int().is_some_and(|v| DOMAIN.contains(&v))
}

/// Walks a completed rule in its fixed order and counts oracle inputs,
/// negated literals and head variables that are unbound when reached.
pub fn replay_violations(cdr: &CompletelyDefinedRule) -> usize {
    let mut bound: BTreeSet<&str> = BTreeSet::new();
    let mut violations = 0;
    let is_bound = |t: &Term, bound: &BTreeSet<&str>| t.as_var().is_none_or(|v| bound.contains(v));
    for (i, lit) in cdr.ordered_body() {
        if let Some(choice) = cdr.oracle_choice.get(&i) {
            for p in choice.pattern.input_positions() {
                violations += usize::from(!is_bound(&lit.atom.args[p], &bound));
            }
            if lit.is_positive() {
                bound.extend(lit.atom.variables());
            }
        } else if lit.is_positive() {
            bound.extend(lit.atom.variables());
        } else {
            violations += lit.atom.args.iter().filter(|t| !is_bound(t, &bound)).count();
        }
    }
    if let Some(h) = &cdr.source.head {
        violations += h.args.iter().filter(|t| !is_bound(t, &bound)).count();
    }
    violations
}

/// Checks every stdlib predicate and pattern on inputs in -20..20 (a few
/// strings for text predicates): each
/// answer must satisfy the base oracle, and each base-true tuple over the
/// same range must be produced by every pattern. Returns (checks, mismatches).
pub fn oracle_mismatches() -> (usize, Vec<String>) {
    let mut checks = 0;
    let mut mismatches = Vec::new();
    for package in oraclelog_core::stdlib::stdlib() {
        let domain: Vec<Constant> = if package.name == "std.strings" {
            ["", "a", "ab", "ba", "abc", "b c"]
                .into_iter()
                .map(Constant::str)
                .chain([Constant::sym("ab")])
                .collect()
        } else {
            (-20i64..=20).map(Constant::Int).collect()
        };
        for pred in &package.predicates {
            let base = pred.base_oracle().expect("base oracle");
            let arity = pred.arity;
            let mut tuples: Vec<Vec<Constant>> = vec![Vec::new()];
            for _ in 0..arity {
                tuples = tuples
                    .into_iter()
                    .flat_map(|t| {
                        domain.iter().map(move |v| {
                            let mut t = t.clone();
                            t.push(v.clone());
                            t
                        })
                    })
                    .collect();
            }
            let truths: BTreeSet<Vec<Constant>> = tuples
                .iter()
                .filter(|t| base.evaluate(t).map(|a| !a.is_empty()).unwrap_or(false))
                .cloned()
                .collect();
            for pattern in pred.patterns() {
                let oracle = pred.oracle(pattern).unwrap();
                let mut inputs_seen = BTreeSet::new();
                for t in &tuples {
                    let inputs = pattern.project_inputs(t);
                    if !inputs_seen.insert(inputs.clone()) {
                        continue;
                    }
                    match oracle.evaluate(&inputs) {
                        Ok(answers) => {
                            for out in answers {
                                checks += 1;
                                let full = pattern.assemble(&inputs, &out);
                                if !pred.holds(&full).unwrap_or(false) {
                                    mismatches
                                        .push(format!("#{}^{pattern}{inputs:?} gave {out:?}", pred.name));
                                }
                            }
                        }
                        Err(e) => mismatches.push(format!("#{}^{pattern}{inputs:?} failed: {e}", pred.name)),
                    }
                }
                for t in &truths {
                    checks += 1;
                    let answers = oracle.evaluate(&pattern.project_inputs(t)).unwrap_or_default();
                    if !answers.contains(&pattern.project_outputs(t)) {
                        mismatches.push(format!("#{}^{pattern} misses {t:?}", pred.name));
                    }
                }
            }
        }
    }
    (checks, mismatches)
}
