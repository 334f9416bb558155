//! Stratification of ordinary predicates for default negation.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::ast::Program;
use crate::graph::strongly_connected_components;

/// Ordered layers of ordinary predicates. A predicate depends positively
/// only on its own layer or lower ones, and negatively only on strictly
/// lower ones. External predicates belong to no layer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stratification {
    pub strata: Vec<BTreeSet<String>>,
}

impl Stratification {
    pub fn stratum_of(&self, predicate: &str) -> Option<usize> {
        self.strata.iter().position(|s| s.contains(predicate))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NotStratifiable {
    /// Predicates of a cycle that passes through default negation.
    pub predicates: Vec<String>,
}

impl fmt::Display for NotStratifiable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "program is not stratifiable: negation inside the cycle through {}",
            self.predicates.join(", ")
        )
    }
}

impl core::error::Error for NotStratifiable {}

pub fn stratify(program: &Program) -> Result<Stratification, NotStratifiable> {
    let mut ids: BTreeMap<&str, usize> = BTreeMap::new();
    let mut names: Vec<&str> = Vec::new();
    // (body predicate, head predicate, negative)
    let mut edges: Vec<(usize, usize, bool)> = Vec::new();
    for rule in &program.rules {
        let head = rule
            .head
            .as_ref()
            .map(|h| intern(&mut ids, &mut names, &h.predicate));
        for lit in &rule.body {
            if lit.atom.is_external() {
                continue;
            }
            let body = intern(&mut ids, &mut names, &lit.atom.predicate);
            if let Some(h) = head {
                edges.push((body, h, !lit.is_positive()));
            }
        }
    }

    let n = names.len();
    let mut adjacency = vec![Vec::new(); n];
    for &(from, to, _) in &edges {
        adjacency[from].push(to);
    }
    let components = strongly_connected_components(&adjacency);
    let mut component_of = vec![0; n];
    for (c, members) in components.iter().enumerate() {
        for &m in members {
            component_of[m] = c;
        }
    }
    for &(from, to, negative) in &edges {
        if negative && component_of[from] == component_of[to] {
            let mut predicates: Vec<String> = components[component_of[from]]
                .iter()
                .map(|&i| names[i].to_string())
                .collect();
            predicates.sort();
            return Err(NotStratifiable { predicates });
        }
    }

    // Components arrive sinks first; walk them sources first.
    let mut incoming: Vec<Vec<(usize, bool)>> = vec![Vec::new(); components.len()];
    for &(from, to, negative) in &edges {
        let (cf, ct) = (component_of[from], component_of[to]);
        if cf != ct {
            incoming[ct].push((cf, negative));
        }
    }
    let mut level = vec![0usize; components.len()];
    for c in (0..components.len()).rev() {
        level[c] = incoming[c]
            .iter()
            .map(|&(src, negative)| level[src] + usize::from(negative))
            .max()
            .unwrap_or(0);
    }
    let depth = level.iter().copied().max().map_or(0, |m| m + 1);
    let mut strata = vec![BTreeSet::new(); depth];
    for (c, members) in components.iter().enumerate() {
        for &m in members {
            strata[level[c]].insert(names[m].to_string());
        }
    }
    Ok(Stratification { strata })
}

fn intern<'p>(ids: &mut BTreeMap<&'p str, usize>, names: &mut Vec<&'p str>, name: &'p str) -> usize {
    *ids.entry(name).or_insert_with(|| {
        names.push(name);
        names.len() - 1
    })
}
