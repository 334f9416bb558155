//! Constants and terms.

use alloc::string::String;
use core::fmt;

/// A ground value.
///
/// Constants of different kinds never compare equal: the integer `1`, the
/// symbol `a1` and the string `"1"` are three unrelated values. The derived
/// ordering puts integers first, then symbols, then strings; model output
/// relies on it.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Constant {
    Int(i64),
    Sym(String),
    Str(String),
}

impl Constant {
    pub fn sym(name: impl Into<String>) -> Self {
        Constant::Sym(name.into())
    }

    pub fn str(text: impl Into<String>) -> Self {
        Constant::Str(text.into())
    }

    pub fn as_int(&self) -> Option<i64> {
        match self {
            Constant::Int(v) => Some(*v),
            _ => None,
        }
    }

    /// Text of a symbol or string constant.
    pub fn as_text(&self) -> Option<&str> {
        match self {
            Constant::Sym(s) | Constant::Str(s) => Some(s),
            Constant::Int(_) => None,
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Constant::Int(_) => "integer",
            Constant::Sym(_) => "symbol",
            Constant::Str(_) => "string",
        }
    }
}

impl From<i64> for Constant {
    fn from(v: i64) -> Self {
        Constant::Int(v)
    }
}

impl fmt::Display for Constant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Constant::Int(v) => write!(f, "{v}"),
            Constant::Sym(s) => f.write_str(s),
            Constant::Str(s) => {
                f.write_str("\"")?;
                for ch in s.chars() {
                    match ch {
                        '"' => f.write_str("\\\"")?,
                        '\\' => f.write_str("\\\\")?,
                        '\n' => f.write_str("\\n")?,
                        '\t' => f.write_str("\\t")?,
                        c => write!(f, "{c}")?,
                    }
                }
                f.write_str("\"")
            }
        }
    }
}

/// A constant or a variable.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Term {
    Const(Constant),
    Var(String),
}

impl Term {
    pub fn var(name: impl Into<String>) -> Self {
        Term::Var(name.into())
    }

    pub fn int(v: i64) -> Self {
        Term::Const(Constant::Int(v))
    }

    pub fn sym(name: impl Into<String>) -> Self {
        Term::Const(Constant::Sym(name.into()))
    }

    pub fn str(text: impl Into<String>) -> Self {
        Term::Const(Constant::Str(text.into()))
    }

    pub fn is_var(&self) -> bool {
        matches!(self, Term::Var(_))
    }

    pub fn as_var(&self) -> Option<&str> {
        match self {
            Term::Var(v) => Some(v),
            Term::Const(_) => None,
        }
    }

    pub fn as_const(&self) -> Option<&Constant> {
        match self {
            Term::Const(c) => Some(c),
            Term::Var(_) => None,
        }
    }
}

impl From<Constant> for Term {
    fn from(c: Constant) -> Self {
        Term::Const(c)
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Const(c) => c.fmt(f),
            Term::Var(v) => f.write_str(v),
        }
    }
}

/// `[A-Z_][A-Za-z0-9_]*`
pub fn is_variable_name(name: &str) -> bool {
    let mut chars = name.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_uppercase() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// `[a-z][A-Za-z0-9_]*`
pub fn is_symbol_name(name: &str) -> bool {
    let mut chars = name.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_lowercase())
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}
