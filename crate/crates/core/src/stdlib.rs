//! Built-in oracles shipped with every registry created by
//! [`Registry::with_stdlib`](crate::registry::Registry::with_stdlib).
//!
//! Integer oracles work on signed 64-bit values. Arithmetic that would
//! overflow while computing an output is an [`OracleError`]; a base check
//! whose true value is not representable is simply false.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::oracle::{single, truth, Answers, ExternalPredicate, OracleError};
use crate::registry::Package;
use crate::term::Constant;

/// `std.math` and `std.strings`.
pub fn stdlib() -> Vec<Package> {
    vec![math(), strings()]
}

pub fn math() -> Package {
    Package::new("std.math")
        .with(succ())
        .with(sqr())
        .with(fatt())
        .with(add())
        .with(div())
        .with(gt())
}

pub fn strings() -> Package {
    Package::new("std.strings").with(contains())
}

fn int(c: &Constant) -> Result<i64, OracleError> {
    c.as_int()
        .ok_or_else(|| OracleError::new(format!("expected an integer, got {} {c}", c.kind_name())))
}

fn text(c: &Constant) -> Result<&str, OracleError> {
    c.as_text()
        .ok_or_else(|| OracleError::new(format!("expected a string or symbol, got {} {c}", c.kind_name())))
}

fn overflow(what: &str) -> OracleError {
    OracleError::new(format!("integer overflow computing {what}"))
}

fn one(v: i64) -> Answers {
    single(vec![Constant::Int(v)])
}

/// `succ(a, b)` iff `b = a + 1`.
fn succ() -> ExternalPredicate {
    ExternalPredicate::new("succ", 2)
        .with_oracle("ii", |a| {
            let (x, y) = (int(&a[0])?, int(&a[1])?);
            Ok(truth(x.checked_add(1) == Some(y)))
        })
        .with_oracle("iO", |a| {
            let x = int(&a[0])?;
            x.checked_add(1).map(one).ok_or_else(|| overflow("successor"))
        })
        .with_oracle("Oi", |a| {
            let y = int(&a[0])?;
            y.checked_sub(1).map(one).ok_or_else(|| overflow("predecessor"))
        })
}

/// `sqr(a, b)` iff `b = a * a`.
fn sqr() -> ExternalPredicate {
    ExternalPredicate::new("sqr", 2)
        .with_oracle("ii", |a| {
            let (x, y) = (int(&a[0])?, int(&a[1])?);
            Ok(truth(x.checked_mul(x) == Some(y)))
        })
        .with_oracle("iO", |a| {
            let x = int(&a[0])?;
            x.checked_mul(x).map(one).ok_or_else(|| overflow("square"))
        })
        .with_oracle("Oi", |a| {
            let y = int(&a[0])?;
            let mut answers = Answers::new();
            if y >= 0 {
                let root = y.isqrt();
                if root * root == y {
                    answers.insert(vec![Constant::Int(root)]);
                    answers.insert(vec![Constant::Int(-root)]);
                }
            }
            Ok(answers)
        })
}

fn factorial(n: i64) -> Option<i64> {
    if n < 0 {
        return None;
    }
    (1..=n).try_fold(1i64, |acc, k| acc.checked_mul(k))
}

/// `fatt(a, b)` iff `a >= 0` and `b = a!`.
fn fatt() -> ExternalPredicate {
    ExternalPredicate::new("fatt", 2)
        .with_oracle("ii", |a| {
            let (x, y) = (int(&a[0])?, int(&a[1])?);
            Ok(truth(x >= 0 && factorial(x) == Some(y)))
        })
        .with_oracle("iO", |a| {
            let x = int(&a[0])?;
            if x < 0 {
                return Ok(Answers::new());
            }
            factorial(x).map(one).ok_or_else(|| overflow("factorial"))
        })
        .with_oracle("Oi", |a| {
            let y = int(&a[0])?;
            let mut answers = Answers::new();
            let mut n = 0i64;
            let mut f = 1i64;
            while f <= y {
                if f == y {
                    answers.insert(vec![Constant::Int(n)]);
                }
                n += 1;
                match f.checked_mul(n) {
                    Some(next) => f = next,
                    None => break,
                }
            }
            Ok(answers)
        })
}

/// `add(x, y, z)` iff `z = x + y`.
fn add() -> ExternalPredicate {
    ExternalPredicate::new("add", 3)
        .with_oracle("iii", |a| {
            let (x, y, z) = (int(&a[0])?, int(&a[1])?, int(&a[2])?);
            Ok(truth(x.checked_add(y) == Some(z)))
        })
        .with_oracle("iiO", |a| {
            let (x, y) = (int(&a[0])?, int(&a[1])?);
            x.checked_add(y).map(one).ok_or_else(|| overflow("sum"))
        })
        .with_oracle("iOi", |a| {
            let (x, z) = (int(&a[0])?, int(&a[1])?);
            z.checked_sub(x).map(one).ok_or_else(|| overflow("difference"))
        })
        .with_oracle("Oii", |a| {
            let (y, z) = (int(&a[0])?, int(&a[1])?);
            z.checked_sub(y).map(one).ok_or_else(|| overflow("difference"))
        })
}

/// `div(x, y, z)` iff `y != 0` and `z` is `x / y` truncated toward zero.
fn div() -> ExternalPredicate {
    ExternalPredicate::new("div", 3)
        .with_oracle("iii", |a| {
            let (x, y, z) = (int(&a[0])?, int(&a[1])?, int(&a[2])?);
            Ok(truth(x.checked_div(y) == Some(z)))
        })
        .with_oracle("iiO", |a| {
            let (x, y) = (int(&a[0])?, int(&a[1])?);
            if y == 0 {
                return Ok(Answers::new());
            }
            x.checked_div(y).map(one).ok_or_else(|| overflow("quotient"))
        })
}

/// `gt(x, y)` iff `x > y`.
fn gt() -> ExternalPredicate {
    ExternalPredicate::new("gt", 2).with_oracle("ii", |a| Ok(truth(int(&a[0])? > int(&a[1])?)))
}

/// `contains(s, t)` iff `t` is a substring of `s`.
fn contains() -> ExternalPredicate {
    ExternalPredicate::new("contains", 2)
        .with_oracle("ii", |a| Ok(truth(text(&a[0])?.contains(text(&a[1])?))))
}
