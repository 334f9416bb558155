//! Binding patterns over external atom arguments.
//!
//! A pattern marks each argument position as input (`i`, must be a known
//! constant when the oracle is called) or output (`O`, produced by the
//! oracle). The all-input pattern is the base pattern.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::term::Term;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Slot {
    Input,
    Output,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Pattern(Vec<Slot>);

impl Pattern {
    pub fn new(slots: Vec<Slot>) -> Self {
        Pattern(slots)
    }

    pub fn base(arity: usize) -> Self {
        Pattern(alloc::vec![Slot::Input; arity])
    }

    pub fn slots(&self) -> &[Slot] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_base(&self) -> bool {
        self.0.iter().all(|s| *s == Slot::Input)
    }

    pub fn input_count(&self) -> usize {
        self.0.iter().filter(|s| **s == Slot::Input).count()
    }

    pub fn output_count(&self) -> usize {
        self.len() - self.input_count()
    }

    pub fn input_positions(&self) -> impl Iterator<Item = usize> + '_ {
        self.0
            .iter()
            .enumerate()
            .filter(|(_, s)| **s == Slot::Input)
            .map(|(i, _)| i)
    }

    pub fn output_positions(&self) -> impl Iterator<Item = usize> + '_ {
        self.0
            .iter()
            .enumerate()
            .filter(|(_, s)| **s == Slot::Output)
            .map(|(i, _)| i)
    }

    /// True when every input position of `self` is also an input of `other`.
    pub fn inputs_within(&self, other: &Pattern) -> bool {
        self.len() == other.len()
            && self
                .0
                .iter()
                .zip(&other.0)
                .all(|(a, b)| *a == Slot::Output || *b == Slot::Input)
    }

    /// Projects `values` onto the input positions.
    pub fn project_inputs<T: Clone>(&self, values: &[T]) -> Vec<T> {
        self.input_positions().map(|i| values[i].clone()).collect()
    }

    pub fn project_outputs<T: Clone>(&self, values: &[T]) -> Vec<T> {
        self.output_positions().map(|i| values[i].clone()).collect()
    }

    /// Builds a full tuple from an input tuple and an output tuple.
    pub fn assemble<T: Clone>(&self, inputs: &[T], outputs: &[T]) -> Vec<T> {
        let (mut ins, mut outs) = (inputs.iter(), outputs.iter());
        self.0
            .iter()
            .map(|s| match s {
                Slot::Input => ins.next(),
                Slot::Output => outs.next(),
            })
            .map(|v| v.expect("tuple length matches pattern").clone())
            .collect()
    }
}

/// Constants map to input slots, variables to output slots.
pub fn pattern_of_terms(terms: &[Term]) -> Pattern {
    Pattern(
        terms
            .iter()
            .map(|t| if t.is_var() { Slot::Output } else { Slot::Input })
            .collect(),
    )
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in &self.0 {
            f.write_str(match s {
                Slot::Input => "i",
                Slot::Output => "O",
            })?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InvalidPattern(pub String);

impl fmt::Display for InvalidPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid pattern `{}`: expected only `i` and `O`", self.0)
    }
}

impl core::error::Error for InvalidPattern {}

impl FromStr for Pattern {
    type Err = InvalidPattern;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.chars()
            .map(|c| match c {
                'i' => Ok(Slot::Input),
                'O' => Ok(Slot::Output),
                _ => Err(InvalidPattern(String::from(s))),
            })
            .collect::<Result<Vec<_>, _>>()
            .map(Pattern)
    }
}
