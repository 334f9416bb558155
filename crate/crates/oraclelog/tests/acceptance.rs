//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion
//! and exits non-zero if any fails.

#[path = "../../core/tests/support/mod.rs"]
mod support;

use std::fs;
use std::process::Command;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use oraclelog::{cli, CliConfig, SearchPath};
use oraclelog_core::registry::RegistryError;
use oraclelog_core::safety::complete_rule;
use oraclelog_core::{
    analyze_program, call_subsumes, parse_program, parse_rule, stdlib, AnalysisOptions, Call, Constant,
    Engine, EvalOptions, ExternalPredicate, ExternalPredicateCache, InMemory, OracleCaches, Package, Pattern,
    Registry, Term,
};
use proptest::strategy::{Strategy, ValueTree};
use proptest::test_runner::TestRunner;

type Outcome = Result<String, String>;
type Check = fn() -> Outcome;

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn within(elapsed: Duration, limit: Duration) -> Result<(), String> {
    ensure(elapsed < limit, format!("took {elapsed:.2?}, limit {limit:.0?}"))
}

fn std_pred(name: &str) -> Arc<ExternalPredicate> {
    stdlib::stdlib()
        .into_iter()
        .find_map(|p| p.predicate(name).cloned())
        .unwrap()
}

/// `pred` exposed with only the listed patterns.
fn restricted(name: &str, patterns: &[&str]) -> ExternalPredicate {
    let full = std_pred(name);
    patterns
        .iter()
        .fold(ExternalPredicate::new(name, full.arity), |p, pat| {
            let full = Arc::clone(&full);
            let pattern: Pattern = pat.parse().unwrap();
            p.with_oracle(pat, move |inputs| full.oracle(&pattern).unwrap().evaluate(inputs))
        })
}

fn generated(n: usize) -> Vec<support::Generated> {
    let mut runner = TestRunner::deterministic();
    (0..n)
        .map(|_| support::program().new_tree(&mut runner).unwrap().current())
        .collect()
}

fn safety_examples() -> Outcome {
    let start = Instant::now();
    // sqr and fatt each with a forward oracle only
    let mut registry = Registry::new();
    registry
        .register_prelude(
            Package::new("std.math")
                .with(restricted("sqr", &["ii", "iO"]))
                .with(restricted("fatt", &["ii", "iO"])),
        )
        .map_err(|e| e.to_string())?;
    let forward = registry.resolve_imports(&[], &InMemory).unwrap().bindings;
    let full = Registry::with_stdlib()
        .resolve_imports(&[], &InMemory)
        .unwrap()
        .bindings;
    let cases = [
        ("H(S) :- number(N), #sqr(N,S).", &forward, "WeaklySafe"),
        (
            "H(S1) :- number(N), #fatt(N,S), #sqr(S,S1).",
            &forward,
            "WeaklySafe",
        ),
        ("H(S) :- number(S), #sqr(N,S).", &forward, "WeaklyUnsafe"),
        (
            "H(S1) :- number(S), #fatt(N,S), #sqr(S,S1).",
            &forward,
            "WeaklyUnsafe",
        ),
        ("int(X) :- int(Y), #succ(X,Y).", &full, "StronglyUnsafe"),
    ];
    let mut matched = 0;
    let mut wrong = Vec::new();
    for (text, bindings, expected) in cases {
        let program = parse_program(text).map_err(|e| e.to_string())?;
        let report = match analyze_program(&program, bindings, AnalysisOptions::default()) {
            Ok(a) => a.report,
            Err(e) => e.report,
        };
        let got = report.rules[0].verdict.name();
        if got == expected {
            matched += 1;
        } else {
            wrong.push(format!("{text} => {got}"));
        }
    }
    within(start.elapsed(), Duration::from_secs(1))?;
    ensure(
        wrong.is_empty(),
        format!("{matched}/5 verdicts; wrong: {}", wrong.join("; ")),
    )?;
    Ok(format!("5/5 verdicts in {:.2?}", start.elapsed()))
}

fn oracle_consistency() -> Outcome {
    let start = Instant::now();
    let (checks, mismatches) = support::oracle_mismatches();
    let fatt = std_pred("fatt");
    let eval = |pat: &str, v: i64| {
        fatt.oracle(&pat.parse().unwrap())
            .unwrap()
            .evaluate(&[Constant::Int(v)])
            .unwrap()
            .into_iter()
            .collect::<Vec<_>>()
    };
    ensure(
        eval("iO", 3) == vec![vec![Constant::Int(6)]],
        "fatt iO(3) != {(6)}",
    )?;
    ensure(
        eval("Oi", 6) == vec![vec![Constant::Int(3)]],
        "fatt Oi(6) != {(3)}",
    )?;
    within(start.elapsed(), Duration::from_secs(5))?;
    if let Some(first) = mismatches.first() {
        return Err(format!("{} mismatches, first: {first}", mismatches.len()));
    }
    Ok(format!(
        "0 mismatches over {checks} checks in {:.2?}",
        start.elapsed()
    ))
}

fn materialization() -> Outcome {
    let bindings = support::std_bindings();
    let mut compared = 0;
    for g in generated(400) {
        if g.rules == 0 {
            continue;
        }
        let program = support::parse(&g);
        let mut engine = Engine::new(&bindings);
        let Ok(ev) = engine.evaluate(&program, EvalOptions::default()) else {
            continue;
        };
        let in_domain = ["succ", "sqr", "fatt", "add", "div", "gt"].iter().all(|n| {
            engine
                .caches()
                .get(&format!("std.math.{n}"))
                .is_none_or(|c| c.ground_atoms().iter().flatten().all(support::in_domain))
        });
        if !in_domain {
            continue;
        }
        let model: support::Atoms = ev.model.atoms().into_iter().collect();
        if model != support::brute_force(&program, &bindings) {
            return Err(format!("mismatch on program:\n{}", g.text));
        }
        compared += 1;
    }
    ensure(compared >= 100, format!("only {compared} programs compared"))?;
    Ok(format!("{compared} programs, all models equal"))
}

/// Stdlib math with every oracle call logged.
fn logged_math(log: &Arc<Mutex<Vec<(String, Call)>>>) -> Package {
    let mut package = Package::new("std.math");
    for pred in stdlib::math().predicates {
        let mut wrapped = ExternalPredicate::new(pred.name.clone(), pred.arity);
        for pattern in pred.patterns().cloned().collect::<Vec<_>>() {
            let (pred, log, name) = (Arc::clone(&pred), Arc::clone(log), pred.name.clone());
            let text = pattern.to_string();
            wrapped = wrapped.with_oracle(&text, move |inputs| {
                log.lock()
                    .unwrap()
                    .push((name.clone(), Call::for_pattern(&pattern, inputs)));
                pred.oracle(&pattern).unwrap().evaluate(inputs)
            });
        }
        package = package.with(wrapped);
    }
    package
}

fn cache_behavior() -> Outcome {
    let text = "n(0). n(1). n(2). n(3). n(4). n(5). n(6).\n\
                f(Y) :- n(X), #fatt(X,Y).\n\
                g(X) :- f(Y), #fatt(X,Y).\n\
                s(Z) :- n(X), n(Y), #add(X,Y,Z).\n\
                big(X) :- n(X), #sqr(X,Y), #gt(Y,10).\n\
                back(X) :- s(Z), #sqr(X,Z).\n\
                check(X) :- n(X), f(Y), #fatt(X,Y).\n";
    let program = parse_program(text).map_err(|e| e.to_string())?;
    let log = Arc::new(Mutex::new(Vec::new()));
    let mut registry = Registry::new();
    registry
        .register_prelude(logged_math(&log))
        .map_err(|e| e.to_string())?;
    let bindings = registry.resolve_imports(&[], &InMemory).unwrap().bindings;

    // every call the grounder issues, in order
    Engine::with_caches(&bindings, OracleCaches::uncached())
        .evaluate(&program, EvalOptions::default())
        .map_err(|e| e.to_string())?;
    let issued = std::mem::take(&mut *log.lock().unwrap());
    let mut bound = 0;
    for (i, (pred, call)) in issued.iter().enumerate() {
        let subsumed = issued[..i]
            .iter()
            .any(|(p, earlier)| p == pred && call_subsumes(earlier, call).unwrap_or(false));
        bound += usize::from(!subsumed);
    }

    let mut engine = Engine::new(&bindings);
    let first = engine
        .evaluate(&program, EvalOptions::default())
        .map_err(|e| e.to_string())?;
    let second = engine
        .evaluate(&program, EvalOptions::default())
        .map_err(|e| e.to_string())?;
    ensure(
        first.stats.oracle_invocations as usize <= bound,
        format!(
            "{} invocations exceed {bound} non-subsumed calls",
            first.stats.oracle_invocations
        ),
    )?;
    ensure(
        (first.stats.oracle_invocations as usize) < issued.len(),
        "no issued call was answered by subsumption",
    )?;
    ensure(
        second.stats.oracle_invocations == 0,
        format!("replay made {} invocations", second.stats.oracle_invocations),
    )?;

    let abx = Call::new(vec![Term::sym("a"), Term::sym("b"), Term::var("X")]);
    let abc = Call::new(vec![Term::sym("a"), Term::sym("b"), Term::sym("c")]);
    ensure(
        call_subsumes(&abx, &abc) == Ok(true),
        "(a,b,X) does not subsume (a,b,c)",
    )?;
    let fatt = std_pred("fatt");
    let mut cache = ExternalPredicateCache::new();
    let io = fatt.oracle(&"iO".parse().unwrap()).unwrap();
    cache
        .answer_call(&fatt, io, &[Constant::Int(3)])
        .map_err(|e| e.to_string())?;
    let truth = cache
        .answer_call(
            &fatt,
            fatt.base_oracle().unwrap(),
            &[Constant::Int(3), Constant::Int(6)],
        )
        .map_err(|e| e.to_string())?;
    ensure(
        !truth.is_empty() && cache.invocations() == 1,
        "base check (3,6) was not answered from (3,X)",
    )?;
    Ok(format!(
        "first run {} invocations for {} issued calls ({bound} non-subsumed), replay 0",
        first.stats.oracle_invocations,
        issued.len()
    ))
}

fn reordering() -> Outcome {
    let mut registry = Registry::new();
    let r = ExternalPredicate::new("r", 3)
        .with_oracle("iii", |_| Ok(oraclelog_core::oracle::truth(true)))
        .with_oracle("iiO", |_| Ok(oraclelog_core::oracle::truth(true)));
    registry
        .register_prelude(Package::new("ex").with(r))
        .map_err(|e| e.to_string())?;
    let bindings = registry.resolve_imports(&[], &InMemory).unwrap().bindings;
    let rule =
        parse_rule("p(X) :- q(X, Y), s(Y, T), m(Z), n(Z, T), #r(Y, Z, T).").map_err(|e| e.to_string())?;
    let render = || -> Result<Vec<String>, String> {
        let cdr = complete_rule(&rule, &bindings, false).map_err(|e| e.to_string())?;
        Ok(cdr.ordered_body().map(|(_, l)| l.to_string()).collect())
    };
    let order = render()?;
    for _ in 0..10 {
        ensure(render()? == order, "completion is not deterministic")?;
    }
    let expected = ["q(X,Y)", "s(Y,T)", "m(Z)", "#r(Y,Z,T)", "n(Z,T)"];
    ensure(order == expected, format!("order {order:?}"))?;

    let bindings = support::std_bindings();
    let (mut rules, mut violations) = (0, 0);
    for g in generated(400) {
        let program = support::parse(&g);
        let analysis =
            analyze_program(&program, &bindings, AnalysisOptions::default()).map_err(|e| e.to_string())?;
        for cdr in &analysis.rules {
            rules += 1;
            violations += support::replay_violations(cdr);
        }
    }
    ensure(
        violations == 0,
        format!("{violations} unbound inputs over {rules} rules"),
    )?;
    Ok(format!(
        "order {}; 0 violations over {rules} completed rules",
        order.join(", ")
    ))
}

fn non_termination_guard() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let file = dir.path().join("recursive.dl");
    fs::write(&file, "int(0).\nint(X) :- int(Y), #succ(Y,X).\n").map_err(|e| e.to_string())?;
    let start = Instant::now();
    let out = Command::new(env!("CARGO_BIN_EXE_oraclelog"))
        .arg("--allow-unsafe-recursion")
        .arg(&file)
        .current_dir(dir.path())
        .output()
        .map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let stderr = String::from_utf8_lossy(&out.stderr);
    ensure(
        out.status.code() == Some(3),
        format!("exit {:?}: {stderr}", out.status.code()),
    )?;
    ensure(stderr.contains("limit exceeded"), format!("stderr: {stderr}"))?;
    within(elapsed, Duration::from_secs(10))?;
    Ok(format!("exit 3 in {elapsed:.2?}"))
}

fn import_semantics() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    fs::write(dir.path().join("a.pkg"), "package a\noracle p/1 i\n").map_err(|e| e.to_string())?;
    fs::write(dir.path().join("b.pkg"), "package b\noracle p/1 i\n").map_err(|e| e.to_string())?;
    let prog = dir.path().join("prog.dl");
    fs::write(
        &prog,
        "#import a.*\n#import b.*\nd(1). d(2).\nq(X) :- d(X), #p(X).\n",
    )
    .map_err(|e| e.to_string())?;

    let only = |v: i64| {
        ExternalPredicate::new("p", 1).with_oracle("i", move |x| {
            Ok(oraclelog_core::oracle::truth(x[0] == Constant::Int(v)))
        })
    };
    let mut registry = Registry::with_stdlib();
    registry
        .register_package(Package::new("a").with(only(1)))
        .map_err(|e| e.to_string())?;
    registry
        .register_package(Package::new("b").with(only(2)))
        .map_err(|e| e.to_string())?;

    let mut config = CliConfig::new(vec![prog.clone()]);
    config.search_path = SearchPath::new(vec![dir.path().to_path_buf()]);
    let out = cli::run(&config, &registry);
    let warnings: Vec<&str> = out.stderr.lines().filter(|l| l.contains("warning")).collect();
    ensure(out.status == 0, format!("exit {}: {}", out.status, out.stderr))?;
    ensure(
        warnings.len() == 1,
        format!("{} warnings: {}", warnings.len(), out.stderr),
    )?;
    ensure(
        warnings[0].contains("from b shadows #p from a"),
        warnings[0].to_string(),
    )?;
    ensure(
        out.stdout.contains("q(2)") && !out.stdout.contains("q(1)"),
        format!("model: {}", out.stdout),
    )?;

    let reserved = Registry::new().register_package(
        Package::new("agg")
            .with(ExternalPredicate::new("sum", 2).with_oracle("ii", |_| Ok(Default::default()))),
    );
    ensure(
        matches!(reserved, Err(RegistryError::ReservedName { .. })),
        format!("#sum registration gave {reserved:?}"),
    )?;
    Ok(format!("one warning ({}); #sum rejected", warnings[0].trim()))
}

fn performance() -> Outcome {
    let mut text = String::with_capacity(200_000);
    for i in 0..10_000 {
        text.push_str(&format!("number({i}).\n"));
    }
    text.push_str("squares(S) :- number(N), #sqr(N,S).\n");
    let bindings = support::std_bindings();
    let start = Instant::now();
    let program = parse_program(&text).map_err(|e| e.to_string())?;
    let mut engine = Engine::new(&bindings);
    let ev = engine
        .evaluate(&program, EvalOptions::default())
        .map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let calls = engine.caches().invocations_of("std.math.sqr");
    let squares = ev.model.relation("squares").map_or(0, |r| r.len());
    ensure(calls == 10_000, format!("{calls} #sqr invocations"))?;
    ensure(squares == 10_000, format!("{squares} squares derived"))?;
    within(elapsed, Duration::from_secs(2))?;
    Ok(format!("10000 invocations in {elapsed:.2?}"))
}

fn main() {
    let criteria: [(&str, Check); 8] = [
        ("safety verdicts of the reordering examples", safety_examples),
        ("stdlib oracle consistency", oracle_consistency),
        ("materialization equivalence", materialization),
        ("cache behavior", cache_behavior),
        ("reordering determinism and soundness", reordering),
        ("non-termination guard", non_termination_guard),
        ("import semantics", import_semantics),
        ("desk-scale performance", performance),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(detail) => println!("PASS [{}] {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL [{}] {name}: {detail}", i + 1);
            }
        }
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
