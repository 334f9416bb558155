//! Hand-written lexer and recursive-descent parser for program text.
//!
//! Syntax restrictions are enforced here rather than during analysis:
//! external atoms may not appear in heads, may not carry classical
//! negation, imports come before every rule, and each predicate keeps one
//! arity throughout a source unit.

use alloc::collections::BTreeMap;
use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use crate::ast::{Atom, AtomKind, ImportDirective, Literal, PredicateKey, Program, Rule};
use crate::term::{Constant, Term};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParseErrorKind {
    ExternalInHead {
        predicate: String,
    },
    ClassicallyNegatedExternal {
        predicate: String,
    },
    ImportAfterRule,
    ArityMismatch {
        predicate: String,
        expected: usize,
        found: usize,
    },
    Syntax(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub kind: ParseErrorKind,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}, column {}: {}", self.line, self.column, self.kind)
    }
}

impl fmt::Display for ParseErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParseErrorKind::ExternalInHead { predicate } => write!(
                f,
                "external atom {predicate} may appear only in rule bodies and constraints"
            ),
            ParseErrorKind::ClassicallyNegatedExternal { predicate } => {
                write!(f, "external atom {predicate} cannot be classically negated")
            }
            ParseErrorKind::ImportAfterRule => f.write_str("import directives must precede every rule"),
            ParseErrorKind::ArityMismatch {
                predicate,
                expected,
                found,
            } => write!(
                f,
                "predicate {predicate} used with arity {found}, previously {expected}"
            ),
            ParseErrorKind::Syntax(msg) => f.write_str(msg),
        }
    }
}

impl core::error::Error for ParseError {}

/// A non-fatal remark produced while parsing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseNote {
    pub line: usize,
    pub message: String,
}

/// A program together with source positions of its statements.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedProgram {
    pub program: Program,
    /// 1-based line of each rule, parallel to `program.rules`.
    pub rule_lines: Vec<usize>,
    /// 1-based line of each import, parallel to `program.imports`.
    pub import_lines: Vec<usize>,
    pub notes: Vec<ParseNote>,
}

pub fn parse_program(text: &str) -> Result<Program, ParseError> {
    parse_program_with_notes(text).map(|p| p.program)
}

pub fn parse_program_with_notes(text: &str) -> Result<ParsedProgram, ParseError> {
    let tokens = lex(text)?;
    let mut parser = Parser::new(tokens);
    parser.program()
}

/// Parses exactly one rule, fact or constraint.
pub fn parse_rule(text: &str) -> Result<Rule, ParseError> {
    let tokens = lex(text)?;
    let mut parser = Parser::new(tokens);
    let (line, column) = parser.position();
    if parser.at_directive() {
        return Err(parser.syntax_at(line, column, "expected a rule, found an import directive"));
    }
    let rule = parser.rule()?;
    parser.check_arities(&rule, line, column)?;
    if !parser.at_end() {
        let (line, column) = parser.position();
        return Err(parser.syntax_at(line, column, "trailing input after rule"));
    }
    Ok(rule)
}

/// Checks that every predicate keeps one arity across `rules`.
///
/// Returns the index of the first offending rule with the error.
pub fn validate_arities(rules: &[Rule]) -> Result<(), (usize, ParseErrorKind)> {
    let mut seen: BTreeMap<PredicateKey, usize> = BTreeMap::new();
    for (idx, rule) in rules.iter().enumerate() {
        for atom in rule.head.iter().chain(rule.body.iter().map(|l| &l.atom)) {
            if let Err(kind) = record_arity(&mut seen, atom) {
                return Err((idx, kind));
            }
        }
    }
    Ok(())
}

fn record_arity(seen: &mut BTreeMap<PredicateKey, usize>, atom: &Atom) -> Result<(), ParseErrorKind> {
    let key = atom.key();
    match seen.get(&key) {
        Some(&expected) if expected != atom.arity() => Err(ParseErrorKind::ArityMismatch {
            predicate: key.to_string(),
            expected,
            found: atom.arity(),
        }),
        Some(_) => Ok(()),
        None => {
            seen.insert(key, atom.arity());
            Ok(())
        }
    }
}

// ---------------------------------------------------------------------------
// Lexer

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Int(String),
    Str(String),
    Hash,
    LParen,
    RParen,
    Comma,
    Dot,
    Star,
    If,
    Minus,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
    column: usize,
    start: usize,
    end: usize,
}

fn lex(text: &str) -> Result<Vec<Token>, ParseError> {
    let bytes: Vec<(usize, char)> = text.char_indices().collect();
    let mut out = Vec::new();
    let mut i = 0;
    let mut line = 1;
    let mut line_start = 0;
    let err = |line: usize, column: usize, msg: String| ParseError {
        line,
        column,
        kind: ParseErrorKind::Syntax(msg),
    };
    while i < bytes.len() {
        let (pos, ch) = bytes[i];
        let column = text[line_start..pos].chars().count() + 1;
        let single = |tok| Token {
            tok,
            line,
            column,
            start: pos,
            end: pos + 1,
        };
        match ch {
            '\n' => {
                line += 1;
                line_start = pos + 1;
                i += 1;
            }
            c if c.is_whitespace() => i += 1,
            '%' => {
                while i < bytes.len() && bytes[i].1 != '\n' {
                    i += 1;
                }
            }
            '(' => {
                out.push(single(Tok::LParen));
                i += 1;
            }
            ')' => {
                out.push(single(Tok::RParen));
                i += 1;
            }
            ',' => {
                out.push(single(Tok::Comma));
                i += 1;
            }
            '.' => {
                out.push(single(Tok::Dot));
                i += 1;
            }
            '*' => {
                out.push(single(Tok::Star));
                i += 1;
            }
            '#' => {
                out.push(single(Tok::Hash));
                i += 1;
            }
            '-' => {
                out.push(single(Tok::Minus));
                i += 1;
            }
            ':' => {
                if bytes.get(i + 1).map(|b| b.1) == Some('-') {
                    out.push(Token {
                        tok: Tok::If,
                        line,
                        column,
                        start: pos,
                        end: pos + 2,
                    });
                    i += 2;
                } else {
                    return Err(err(line, column, "expected `:-`".into()));
                }
            }
            '"' => {
                let mut value = String::new();
                i += 1;
                loop {
                    let Some(&(_, c)) = bytes.get(i) else {
                        return Err(err(line, column, "unterminated string literal".into()));
                    };
                    match c {
                        '"' => break,
                        '\n' => return Err(err(line, column, "unterminated string literal".into())),
                        '\\' => {
                            let escaped = bytes.get(i + 1).map(|b| b.1);
                            match escaped {
                                Some('"') => value.push('"'),
                                Some('\\') => value.push('\\'),
                                Some('n') => value.push('\n'),
                                Some('t') => value.push('\t'),
                                _ => {
                                    return Err(err(line, column, "invalid escape in string literal".into()))
                                }
                            }
                            i += 2;
                        }
                        c => {
                            value.push(c);
                            i += 1;
                        }
                    }
                }
                let end = bytes[i].0 + 1;
                i += 1;
                out.push(Token {
                    tok: Tok::Str(value),
                    line,
                    column,
                    start: pos,
                    end,
                });
            }
            c if c.is_ascii_digit() => {
                let mut j = i;
                while j < bytes.len() && bytes[j].1.is_ascii_digit() {
                    j += 1;
                }
                let end = bytes.get(j).map_or(text.len(), |b| b.0);
                if bytes
                    .get(j)
                    .is_some_and(|b| b.1.is_ascii_alphabetic() || b.1 == '_')
                {
                    return Err(err(line, column, "identifiers may not start with a digit".into()));
                }
                out.push(Token {
                    tok: Tok::Int(text[pos..end].to_string()),
                    line,
                    column,
                    start: pos,
                    end,
                });
                i = j;
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let mut j = i;
                while j < bytes.len() && (bytes[j].1.is_ascii_alphanumeric() || bytes[j].1 == '_') {
                    j += 1;
                }
                let end = bytes.get(j).map_or(text.len(), |b| b.0);
                out.push(Token {
                    tok: Tok::Ident(text[pos..end].to_string()),
                    line,
                    column,
                    start: pos,
                    end,
                });
                i = j;
            }
            other => return Err(err(line, column, format!("unexpected character `{other}`"))),
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Parser

const ANONYMOUS: &str = "_";

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    arities: BTreeMap<PredicateKey, usize>,
}

impl Parser {
    fn new(tokens: Vec<Token>) -> Self {
        Parser {
            tokens,
            pos: 0,
            arities: BTreeMap::new(),
        }
    }

    fn at_end(&self) -> bool {
        self.pos >= self.tokens.len()
    }

    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.pos).map(|t| &t.tok)
    }

    fn peek_at(&self, offset: usize) -> Option<&Tok> {
        self.tokens.get(self.pos + offset).map(|t| &t.tok)
    }

    fn position(&self) -> (usize, usize) {
        match self.tokens.get(self.pos).or_else(|| self.tokens.last()) {
            Some(t) => (t.line, t.column),
            None => (1, 1),
        }
    }

    /// True when the token at `offset` starts exactly where the previous one ends.
    fn adjacent(&self, offset: usize) -> bool {
        let idx = self.pos + offset;
        idx > 0 && idx < self.tokens.len() && self.tokens[idx - 1].end == self.tokens[idx].start
    }

    fn bump(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    fn syntax_at(&self, line: usize, column: usize, msg: &str) -> ParseError {
        ParseError {
            line,
            column,
            kind: ParseErrorKind::Syntax(msg.to_string()),
        }
    }

    fn error(&self, kind: ParseErrorKind) -> ParseError {
        let (line, column) = self.position();
        ParseError { line, column, kind }
    }

    fn expected(&self, what: &str) -> ParseError {
        let (line, column) = self.position();
        let found = match self.peek() {
            None => "end of input".to_string(),
            Some(t) => describe(t),
        };
        self.syntax_at(line, column, &format!("expected {what}, found {found}"))
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<Token, ParseError> {
        if self.peek() == Some(&tok) {
            Ok(self.bump().expect("peeked"))
        } else {
            Err(self.expected(what))
        }
    }

    fn at_directive(&self) -> bool {
        matches!(self.peek(), Some(Tok::Hash))
            && matches!(self.peek_at(1), Some(Tok::Ident(k)) if k == "import" || k == "include")
            && self.adjacent(1)
    }

    fn program(&mut self) -> Result<ParsedProgram, ParseError> {
        let mut parsed = ParsedProgram {
            program: Program::default(),
            rule_lines: Vec::new(),
            import_lines: Vec::new(),
            notes: Vec::new(),
        };
        while !self.at_end() {
            let (line, column) = self.position();
            if self.at_directive() {
                if !parsed.program.rules.is_empty() {
                    return Err(self.error(ParseErrorKind::ImportAfterRule));
                }
                let (directive, legacy) = self.directive()?;
                if legacy {
                    parsed.notes.push(ParseNote {
                        line,
                        message: "`#include` is deprecated, use `#import`".to_string(),
                    });
                }
                parsed.program.imports.push(directive);
                parsed.import_lines.push(line);
            } else {
                let rule = self.rule()?;
                self.check_arities(&rule, line, column)?;
                parsed.program.rules.push(rule);
                parsed.rule_lines.push(line);
            }
        }
        Ok(parsed)
    }

    /// `#import seg(.seg)*(.*)?` on a single line, with an optional final `.`.
    fn directive(&mut self) -> Result<(ImportDirective, bool), ParseError> {
        let hash = self.bump().expect("at directive");
        let keyword = match self.bump().map(|t| t.tok) {
            Some(Tok::Ident(k)) => k,
            _ => unreachable!("at_directive checked the keyword"),
        };
        let line = hash.line;
        let on_line = |p: &Self, off: usize| p.tokens.get(p.pos + off).is_some_and(|t| t.line == line);
        let mut path = Vec::new();
        let mut wildcard = false;
        match self.peek() {
            Some(Tok::Ident(_)) if on_line(self, 0) => {
                if let Some(Tok::Ident(s)) = self.bump().map(|t| t.tok) {
                    path.push(s);
                }
            }
            _ => return Err(self.expected("a package path after the import keyword")),
        }
        while self.peek() == Some(&Tok::Dot) && on_line(self, 0) && self.adjacent(0) {
            match self.peek_at(1) {
                Some(Tok::Ident(s)) if on_line(self, 1) && self.adjacent(1) => {
                    path.push(s.clone());
                    self.pos += 2;
                }
                Some(Tok::Star) if on_line(self, 1) && self.adjacent(1) => {
                    wildcard = true;
                    self.pos += 2;
                    break;
                }
                _ => break,
            }
        }
        // Optional terminating period.
        if self.peek() == Some(&Tok::Dot) && on_line(self, 0) {
            self.pos += 1;
        }
        if on_line(self, 0) {
            return Err(self.expected("end of line after import directive"));
        }
        Ok((ImportDirective { path, wildcard }, keyword == "include"))
    }

    fn rule(&mut self) -> Result<Rule, ParseError> {
        let head = match self.peek() {
            Some(Tok::If) => None,
            Some(Tok::Hash) => {
                let (line, column) = self.position();
                let atom = self.atom()?;
                return Err(ParseError {
                    line,
                    column,
                    kind: ParseErrorKind::ExternalInHead {
                        predicate: atom.key().to_string(),
                    },
                });
            }
            Some(Tok::Minus) => return Err(self.classical_negation()),
            Some(Tok::Ident(_)) => Some(self.atom()?),
            _ => return Err(self.expected("a rule head, `:-` or an import directive")),
        };
        let mut body = Vec::new();
        if self.peek() == Some(&Tok::If) {
            self.pos += 1;
            loop {
                body.push(self.literal()?);
                match self.peek() {
                    Some(Tok::Comma) => self.pos += 1,
                    _ => break,
                }
            }
        } else if head.is_none() {
            return Err(self.expected("`:-`"));
        }
        self.expect(Tok::Dot, "`.` at end of rule")?;
        let mut rule = Rule { head, body };
        expand_anonymous(&mut rule);
        Ok(rule)
    }

    fn classical_negation(&mut self) -> ParseError {
        let (line, column) = self.position();
        self.pos += 1;
        if self.peek() == Some(&Tok::Hash) {
            let predicate = match self.atom() {
                Ok(atom) => atom.key().to_string(),
                Err(e) => return e,
            };
            ParseError {
                line,
                column,
                kind: ParseErrorKind::ClassicallyNegatedExternal { predicate },
            }
        } else {
            self.syntax_at(line, column, "classical negation is not supported")
        }
    }

    fn literal(&mut self) -> Result<Literal, ParseError> {
        let negated = matches!(self.peek(), Some(Tok::Ident(k)) if k == "not")
            && matches!(self.peek_at(1), Some(Tok::Ident(_) | Tok::Hash | Tok::Minus));
        if negated {
            self.pos += 1;
        }
        if self.peek() == Some(&Tok::Minus) {
            return Err(self.classical_negation());
        }
        let atom = self.atom()?;
        Ok(if negated {
            Literal::negated(atom)
        } else {
            Literal::positive(atom)
        })
    }

    fn atom(&mut self) -> Result<Atom, ParseError> {
        let external = self.peek() == Some(&Tok::Hash);
        if external {
            self.pos += 1;
            if !self.adjacent(0) {
                return Err(self.expected("a predicate name directly after `#`"));
            }
        }
        let mut segments = match self.peek() {
            Some(Tok::Ident(name)) => {
                let name = name.clone();
                self.pos += 1;
                alloc::vec![name]
            }
            _ => return Err(self.expected("a predicate name")),
        };
        if external {
            while self.peek() == Some(&Tok::Dot)
                && self.adjacent(0)
                && matches!(self.peek_at(1), Some(Tok::Ident(_)))
                && self.adjacent(1)
            {
                if let Some(Tok::Ident(s)) = self.peek_at(1) {
                    segments.push(s.clone());
                }
                self.pos += 2;
            }
        }
        let predicate = segments.pop().expect("at least one segment");
        let package = if segments.is_empty() {
            None
        } else {
            Some(segments.join("."))
        };
        let mut args = Vec::new();
        if self.peek() == Some(&Tok::LParen) {
            self.pos += 1;
            if self.peek() != Some(&Tok::RParen) {
                loop {
                    args.push(self.term()?);
                    match self.peek() {
                        Some(Tok::Comma) => self.pos += 1,
                        _ => break,
                    }
                }
            }
            self.expect(Tok::RParen, "`)` or `,` in argument list")?;
        }
        Ok(Atom {
            predicate,
            package,
            kind: if external {
                AtomKind::External
            } else {
                AtomKind::Ordinary
            },
            args,
        })
    }

    fn term(&mut self) -> Result<Term, ParseError> {
        let (line, column) = self.position();
        match self.peek().cloned() {
            Some(Tok::Ident(name)) => {
                self.pos += 1;
                if name.starts_with(|c: char| c.is_ascii_uppercase() || c == '_') {
                    Ok(Term::Var(name))
                } else {
                    Ok(Term::Const(Constant::Sym(name)))
                }
            }
            Some(Tok::Str(s)) => {
                self.pos += 1;
                Ok(Term::Const(Constant::Str(s)))
            }
            Some(Tok::Int(digits)) => {
                self.pos += 1;
                parse_int(&digits)
                    .map(Term::int)
                    .ok_or_else(|| self.syntax_at(line, column, "integer literal out of range"))
            }
            Some(Tok::Minus) => {
                if let Some(Tok::Int(digits)) = self.peek_at(1).cloned() {
                    if self.adjacent(1) {
                        self.pos += 2;
                        let mut text = String::from("-");
                        text.push_str(&digits);
                        return parse_int(&text)
                            .map(Term::int)
                            .ok_or_else(|| self.syntax_at(line, column, "integer literal out of range"));
                    }
                }
                Err(self.expected("a term"))
            }
            _ => Err(self.expected("a term")),
        }
    }

    fn check_arities(&mut self, rule: &Rule, line: usize, column: usize) -> Result<(), ParseError> {
        for atom in rule.head.iter().chain(rule.body.iter().map(|l| &l.atom)) {
            record_arity(&mut self.arities, atom).map_err(|kind| ParseError { line, column, kind })?;
        }
        Ok(())
    }
}

fn parse_int(text: &str) -> Option<i64> {
    text.parse::<i64>().ok()
}

fn describe(tok: &Tok) -> String {
    match tok {
        Tok::Ident(s) => format!("`{s}`"),
        Tok::Int(s) => format!("`{s}`"),
        Tok::Str(s) => format!("string {s:?}"),
        Tok::Hash => "`#`".into(),
        Tok::LParen => "`(`".into(),
        Tok::RParen => "`)`".into(),
        Tok::Comma => "`,`".into(),
        Tok::Dot => "`.`".into(),
        Tok::Star => "`*`".into(),
        Tok::If => "`:-`".into(),
        Tok::Minus => "`-`".into(),
    }
}

/// Replaces every `_` with a variable that occurs nowhere else in the rule.
fn expand_anonymous(rule: &mut Rule) {
    let used: BTreeSet<String> = rule.variables().into_iter().collect();
    if !used.contains(ANONYMOUS) {
        return;
    }
    let mut counter = 0usize;
    let mut fresh = || loop {
        counter += 1;
        let name = format!("_{counter}");
        if !used.contains(&name) {
            return name;
        }
    };
    let atoms = rule
        .head
        .iter_mut()
        .chain(rule.body.iter_mut().map(|l| &mut l.atom));
    for atom in atoms {
        for term in &mut atom.args {
            if matches!(term, Term::Var(v) if v == ANONYMOUS) {
                *term = Term::Var(fresh());
            }
        }
    }
}
