//! BDD variable orders over the basic events of a fault tree.

use std::collections::{HashMap, HashSet, VecDeque};

use thiserror::Error;

use crate::model::{FaultTree, NodeId};

/// A permutation of a tree's basic events; position = BDD level.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VariableOrder {
    bes: Vec<NodeId>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum OrderError {
    #[error("order is missing basic event(s): {}", .0.join(", "))]
    Missing(Vec<String>),
    #[error("order names unknown basic event(s): {}", .0.join(", "))]
    Unknown(Vec<String>),
    #[error("order lists `{0}` more than once")]
    Duplicate(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OrderingHeuristic {
    #[default]
    Dfs,
    Tdlr,
}

impl VariableOrder {
    pub fn as_slice(&self) -> &[NodeId] {
        &self.bes
    }

    pub fn len(&self) -> usize {
        self.bes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bes.is_empty()
    }

    pub fn names(&self, ft: &FaultTree) -> Vec<String> {
        self.bes.iter().map(|&b| ft.name(b).to_string()).collect()
    }

    /// Level of each basic event.
    pub fn levels(&self) -> HashMap<NodeId, usize> {
        self.bes.iter().enumerate().map(|(i, &b)| (b, i)).collect()
    }

    pub fn from_heuristic(ft: &FaultTree, heuristic: OrderingHeuristic) -> Self {
        match heuristic {
            OrderingHeuristic::Dfs => dfs_order(ft),
            OrderingHeuristic::Tdlr => tdlr_order(ft),
        }
    }

    /// Takes a list of node ids verbatim (e.g. the file declaration order).
    pub fn from_ids(ft: &FaultTree, ids: &[NodeId]) -> Result<Self, OrderError> {
        let names: Vec<&str> = ids.iter().map(|&i| ft.name(i)).collect();
        order_from_list(ft, &names)
    }
}

/// Roots to traverse: the top event, then constraint nodes not reached from
/// it (in index order) so that every basic event ends up ordered.
fn traversal_roots(ft: &FaultTree) -> Vec<NodeId> {
    let mut roots = vec![ft.top()];
    roots.extend(ft.ids().filter(|&id| ft.kind(id).is_constraint()));
    roots
}

/// Basic events in first-visit order of a depth-first traversal from the top,
/// children in declared order.
pub fn dfs_order(ft: &FaultTree) -> VariableOrder {
    let mut seen = vec![false; ft.len()];
    let mut bes = Vec::new();
    for root in traversal_roots(ft) {
        if seen[root.index()] {
            continue;
        }
        let mut stack = vec![root];
        while let Some(v) = stack.pop() {
            if seen[v.index()] {
                continue;
            }
            seen[v.index()] = true;
            if ft.node(v).is_be() {
                bes.push(v);
            }
            stack.extend(ft.children(v).iter().rev().filter(|c| !seen[c.index()]));
        }
    }
    VariableOrder { bes }
}

/// Basic events level by level (shortest distance from the top), left to
/// right within a level.
pub fn tdlr_order(ft: &FaultTree) -> VariableOrder {
    let mut seen = vec![false; ft.len()];
    let mut bes = Vec::new();
    for root in traversal_roots(ft) {
        if seen[root.index()] {
            continue;
        }
        seen[root.index()] = true;
        let mut queue = VecDeque::from([root]);
        while let Some(v) = queue.pop_front() {
            if ft.node(v).is_be() {
                bes.push(v);
            }
            for &c in ft.children(v) {
                if !seen[c.index()] {
                    seen[c.index()] = true;
                    queue.push_back(c);
                }
            }
        }
    }
    VariableOrder { bes }
}

/// A user-supplied order. Every basic event must be listed exactly once.
pub fn order_from_list<S: AsRef<str>>(ft: &FaultTree, names: &[S]) -> Result<VariableOrder, OrderError> {
    let mut bes = Vec::with_capacity(names.len());
    let mut unknown = Vec::new();
    let mut listed = HashSet::new();
    for name in names {
        let name = name.as_ref();
        match ft.find(name).filter(|&id| ft.node(id).is_be()) {
            Some(id) => {
                if !listed.insert(id) {
                    return Err(OrderError::Duplicate(name.to_string()));
                }
                bes.push(id);
            }
            None => unknown.push(name.to_string()),
        }
    }
    if !unknown.is_empty() {
        return Err(OrderError::Unknown(unknown));
    }
    let missing: Vec<String> = ft
        .basic_events()
        .filter(|b| !listed.contains(b))
        .map(|b| ft.name(b).to_string())
        .collect();
    if !missing.is_empty() {
        return Err(OrderError::Missing(missing));
    }
    Ok(VariableOrder { bes })
}

/// Reads an order file: one name per line, blank lines and `#` comments
/// ignored, surrounding quotes optional.
pub fn parse_order_file(text: &str) -> Vec<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| l.trim_matches('"').to_string())
        .collect()
}
