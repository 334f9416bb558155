//! Rule dependency graph and strongly connected components.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec;
use alloc::vec::Vec;

use crate::ast::Program;

/// Nodes are rules (by index); `r1 -> r2` iff the head predicate of `r1`
/// occurs, positively or negated, in the body of `r2`. External predicates
/// have no defining rules and so never contribute edges.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RuleDependencyGraph {
    successors: Vec<BTreeSet<usize>>,
    on_cycle: Vec<bool>,
}

pub fn build_dependency_graph(program: &Program) -> RuleDependencyGraph {
    let mut readers: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (idx, rule) in program.rules.iter().enumerate() {
        for lit in &rule.body {
            if !lit.atom.is_external() {
                let entry = readers.entry(lit.atom.predicate.as_str()).or_default();
                if entry.last() != Some(&idx) {
                    entry.push(idx);
                }
            }
        }
    }
    let successors: Vec<BTreeSet<usize>> = program
        .rules
        .iter()
        .map(|rule| match &rule.head {
            Some(head) => readers
                .get(head.predicate.as_str())
                .map(|r| r.iter().copied().collect())
                .unwrap_or_default(),
            None => BTreeSet::new(),
        })
        .collect();
    let adjacency: Vec<Vec<usize>> = successors.iter().map(|s| s.iter().copied().collect()).collect();
    let mut on_cycle = vec![false; successors.len()];
    for component in strongly_connected_components(&adjacency) {
        let cyclic = component.len() > 1 || successors[component[0]].contains(&component[0]);
        if cyclic {
            for node in component {
                on_cycle[node] = true;
            }
        }
    }
    RuleDependencyGraph { successors, on_cycle }
}

impl RuleDependencyGraph {
    pub fn len(&self) -> usize {
        self.successors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.successors.is_empty()
    }

    pub fn has_edge(&self, from: usize, to: usize) -> bool {
        self.successors[from].contains(&to)
    }

    pub fn successors(&self, node: usize) -> impl Iterator<Item = usize> + '_ {
        self.successors[node].iter().copied()
    }

    pub fn edge_count(&self) -> usize {
        self.successors.iter().map(BTreeSet::len).sum()
    }
}

/// True iff the rule lies on a directed cycle, self-loops included.
pub fn requires_strong_safety(rule: usize, graph: &RuleDependencyGraph) -> bool {
    graph.on_cycle[rule]
}

/// Tarjan's algorithm, iterative. Components come out in reverse
/// topological order of the condensation (sinks first).
pub fn strongly_connected_components(adjacency: &[Vec<usize>]) -> Vec<Vec<usize>> {
    const UNVISITED: usize = usize::MAX;
    let n = adjacency.len();
    let mut index = vec![UNVISITED; n];
    let mut low = vec![0; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut components = Vec::new();
    let mut next = 0;
    // (node, position in its adjacency list)
    let mut frames: Vec<(usize, usize)> = Vec::new();

    for root in 0..n {
        if index[root] != UNVISITED {
            continue;
        }
        frames.push((root, 0));
        while let Some(&(node, edge)) = frames.last() {
            if edge == 0 && index[node] == UNVISITED {
                index[node] = next;
                low[node] = next;
                next += 1;
                stack.push(node);
                on_stack[node] = true;
            }
            if let Some(&succ) = adjacency[node].get(edge) {
                frames.last_mut().expect("current frame").1 += 1;
                if index[succ] == UNVISITED {
                    frames.push((succ, 0));
                } else if on_stack[succ] {
                    low[node] = low[node].min(index[succ]);
                }
                continue;
            }
            frames.pop();
            if let Some(&(parent, _)) = frames.last() {
                low[parent] = low[parent].min(low[node]);
            }
            if low[node] == index[node] {
                let mut component = Vec::new();
                loop {
                    let w = stack.pop().expect("node on stack");
                    on_stack[w] = false;
                    component.push(w);
                    if w == node {
                        break;
                    }
                }
                component.sort_unstable();
                components.push(component);
            }
        }
    }
    components
}
