//! Reduced ordered binary decision diagrams.
//!
//! A [`BddManager`] owns a fixed variable order and a unique table, so two
//! handles are equal iff they denote the same Boolean function. There are two
//! terminals and no complement edges. Variables are identified by their
//! position in the order (level 0 is tested first).
//!
//! Besides the usual combinators the manager implements the set-family
//! operations used for minimal cut sets: a BDD is also read as the family of
//! its *solutions*, one per path to ⊤, holding the variables whose 1-edge the
//! path takes.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::sync::atomic::{AtomicU32, Ordering};

use thiserror::Error;

const FALSE: u32 = 0;
const TRUE: u32 = 1;
const TERMINAL_LEVEL: u32 = u32::MAX;

static NEXT_MANAGER: AtomicU32 = AtomicU32::new(0);

/// Handle to a node of one particular [`BddManager`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BddRef {
    manager: u32,
    index: u32,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BddError {
    #[error("BDD handle belongs to a different manager")]
    ForeignHandle,
    #[error("unknown variable index {0}")]
    UnknownVariable(usize),
    #[error("more than {cap} solutions")]
    TooManySolutions { cap: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
struct Node {
    level: u32,
    high: u32,
    low: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Op {
    And,
    Or,
    Ite,
    Restrict,
    Without,
    Minsol,
    Containing,
    Closure,
}

pub const DEFAULT_SOLUTION_CAP: usize = 1_000_000;

#[derive(Debug)]
pub struct BddManager {
    id: u32,
    names: Vec<String>,
    nodes: Vec<Node>,
    unique: HashMap<Node, u32>,
    cache: HashMap<(Op, u32, u32, u32), u32>,
    solution_cap: usize,
}

impl BddManager {
    /// A manager whose variable order is `names` (first name = level 0).
    pub fn new(names: Vec<String>) -> Self {
        let terminal = |v| Node {
            level: TERMINAL_LEVEL,
            high: v,
            low: v,
        };
        BddManager {
            id: NEXT_MANAGER.fetch_add(1, Ordering::Relaxed),
            names,
            nodes: vec![terminal(FALSE), terminal(TRUE)],
            unique: HashMap::new(),
            cache: HashMap::new(),
            solution_cap: DEFAULT_SOLUTION_CAP,
        }
    }

    pub fn with_solution_cap(mut self, cap: usize) -> Self {
        self.solution_cap = cap;
        self
    }

    pub fn set_solution_cap(&mut self, cap: usize) {
        self.solution_cap = cap;
    }

    pub fn num_vars(&self) -> usize {
        self.names.len()
    }

    pub fn var_name(&self, level: usize) -> &str {
        &self.names[level]
    }

    pub fn var_names(&self) -> &[String] {
        &self.names
    }

    /// Total number of internal nodes ever created.
    pub fn size(&self) -> usize {
        self.nodes.len() - 2
    }

    /// Drops the operation cache; nodes stay valid.
    pub fn clear_cache(&mut self) {
        self.cache.clear();
    }

    fn handle(&self, index: u32) -> BddRef {
        BddRef {
            manager: self.id,
            index,
        }
    }

    fn own(&self, f: BddRef) -> Result<u32, BddError> {
        if f.manager == self.id {
            Ok(f.index)
        } else {
            Err(BddError::ForeignHandle)
        }
    }

    pub fn zero(&self) -> BddRef {
        self.handle(FALSE)
    }

    pub fn one(&self) -> BddRef {
        self.handle(TRUE)
    }

    pub fn constant(&self, value: bool) -> BddRef {
        if value {
            self.one()
        } else {
            self.zero()
        }
    }

    pub fn is_zero(&self, f: BddRef) -> bool {
        f == self.zero()
    }

    pub fn is_one(&self, f: BddRef) -> bool {
        f == self.one()
    }

    pub fn is_terminal(&self, f: BddRef) -> bool {
        f.index <= TRUE
    }

    /// Level of the variable tested at the root, `None` for terminals.
    pub fn top_var(&self, f: BddRef) -> Option<usize> {
        let n = self.nodes[f.index as usize];
        (n.level != TERMINAL_LEVEL).then_some(n.level as usize)
    }

    pub fn high(&self, f: BddRef) -> BddRef {
        self.handle(self.nodes[f.index as usize].high)
    }

    pub fn low(&self, f: BddRef) -> BddRef {
        self.handle(self.nodes[f.index as usize].low)
    }

    fn level(&self, f: u32) -> u32 {
        self.nodes[f as usize].level
    }

    fn mk(&mut self, level: u32, high: u32, low: u32) -> u32 {
        if high == low {
            return low;
        }
        debug_assert!(level < self.level(high) && level < self.level(low));
        let node = Node { level, high, low };
        if let Some(&i) = self.unique.get(&node) {
            return i;
        }
        let i = self.nodes.len() as u32;
        self.nodes.push(node);
        self.unique.insert(node, i);
        i
    }

    /// The projection function of variable `level`.
    pub fn var(&mut self, level: usize) -> Result<BddRef, BddError> {
        if level >= self.names.len() {
            return Err(BddError::UnknownVariable(level));
        }
        let i = self.mk(level as u32, TRUE, FALSE);
        Ok(self.handle(i))
    }

    pub fn and(&mut self, f: BddRef, g: BddRef) -> Result<BddRef, BddError> {
        let (f, g) = (self.own(f)?, self.own(g)?);
        let r = self.and_rec(f, g);
        Ok(self.handle(r))
    }

    pub fn or(&mut self, f: BddRef, g: BddRef) -> Result<BddRef, BddError> {
        let (f, g) = (self.own(f)?, self.own(g)?);
        let r = self.or_rec(f, g);
        Ok(self.handle(r))
    }

    pub fn not(&mut self, f: BddRef) -> Result<BddRef, BddError> {
        let f = self.own(f)?;
        let r = self.ite_rec(f, FALSE, TRUE);
        Ok(self.handle(r))
    }

    /// `if f then g else h`.
    pub fn ite(&mut self, f: BddRef, g: BddRef, h: BddRef) -> Result<BddRef, BddError> {
        let (f, g, h) = (self.own(f)?, self.own(g)?, self.own(h)?);
        let r = self.ite_rec(f, g, h);
        Ok(self.handle(r))
    }

    fn cofactors(&self, f: u32, level: u32) -> (u32, u32) {
        let n = self.nodes[f as usize];
        if n.level == level {
            (n.high, n.low)
        } else {
            (f, f)
        }
    }

    fn and_rec(&mut self, f: u32, g: u32) -> u32 {
        if f == FALSE || g == FALSE {
            return FALSE;
        }
        if f == TRUE {
            return g;
        }
        if g == TRUE || f == g {
            return f;
        }
        let (f, g) = if f < g { (f, g) } else { (g, f) };
        if let Some(&r) = self.cache.get(&(Op::And, f, g, 0)) {
            return r;
        }
        let level = self.level(f).min(self.level(g));
        let (f1, f0) = self.cofactors(f, level);
        let (g1, g0) = self.cofactors(g, level);
        let high = self.and_rec(f1, g1);
        let low = self.and_rec(f0, g0);
        let r = self.mk(level, high, low);
        self.cache.insert((Op::And, f, g, 0), r);
        r
    }

    fn or_rec(&mut self, f: u32, g: u32) -> u32 {
        if f == TRUE || g == TRUE {
            return TRUE;
        }
        if f == FALSE {
            return g;
        }
        if g == FALSE || f == g {
            return f;
        }
        let (f, g) = if f < g { (f, g) } else { (g, f) };
        if let Some(&r) = self.cache.get(&(Op::Or, f, g, 0)) {
            return r;
        }
        let level = self.level(f).min(self.level(g));
        let (f1, f0) = self.cofactors(f, level);
        let (g1, g0) = self.cofactors(g, level);
        let high = self.or_rec(f1, g1);
        let low = self.or_rec(f0, g0);
        let r = self.mk(level, high, low);
        self.cache.insert((Op::Or, f, g, 0), r);
        r
    }

    fn ite_rec(&mut self, f: u32, g: u32, h: u32) -> u32 {
        if f == TRUE {
            return g;
        }
        if f == FALSE {
            return h;
        }
        if g == h {
            return g;
        }
        if g == TRUE && h == FALSE {
            return f;
        }
        if let Some(&r) = self.cache.get(&(Op::Ite, f, g, h)) {
            return r;
        }
        let level = self.level(f).min(self.level(g)).min(self.level(h));
        let (f1, f0) = self.cofactors(f, level);
        let (g1, g0) = self.cofactors(g, level);
        let (h1, h0) = self.cofactors(h, level);
        let high = self.ite_rec(f1, g1, h1);
        let low = self.ite_rec(f0, g0, h0);
        let r = self.mk(level, high, low);
        self.cache.insert((Op::Ite, f, g, h), r);
        r
    }

    /// Shannon cofactor `f|x=value`.
    pub fn restrict(&mut self, f: BddRef, level: usize, value: bool) -> Result<BddRef, BddError> {
        let f = self.own(f)?;
        if level >= self.names.len() {
            return Err(BddError::UnknownVariable(level));
        }
        let r = self.restrict_rec(f, level as u32, value);
        Ok(self.handle(r))
    }

    fn restrict_rec(&mut self, f: u32, level: u32, value: bool) -> u32 {
        let n = self.nodes[f as usize];
        if n.level > level {
            return f;
        }
        if n.level == level {
            return if value { n.high } else { n.low };
        }
        let key = (Op::Restrict, f, level, value as u32);
        if let Some(&r) = self.cache.get(&key) {
            return r;
        }
        let high = self.restrict_rec(n.high, level, value);
        let low = self.restrict_rec(n.low, level, value);
        let r = self.mk(n.level, high, low);
        self.cache.insert(key, r);
        r
    }

    /// Solutions of `f` that contain no solution of `g` as a subset.
    ///
    /// `f` must be a minimal-solution diagram (for instance the output of
    /// [`Self::minsol`]); `g` must be monotone. Under these conditions the
    /// result is exact.
    pub fn without(&mut self, f: BddRef, g: BddRef) -> Result<BddRef, BddError> {
        let (f, g) = (self.own(f)?, self.own(g)?);
        let r = self.without_rec(f, g);
        Ok(self.handle(r))
    }

    /// Whether the all-zero path of `g` reaches ⊤, i.e. ∅ is a solution.
    fn has_empty_solution(&self, mut g: u32) -> bool {
        while g > TRUE {
            g = self.nodes[g as usize].low;
        }
        g == TRUE
    }

    fn without_rec(&mut self, f: u32, g: u32) -> u32 {
        if f == FALSE || g == TRUE {
            return FALSE;
        }
        if g == FALSE {
            return f;
        }
        if f == TRUE {
            return if self.has_empty_solution(g) { FALSE } else { TRUE };
        }
        if f == g {
            return FALSE;
        }
        let key = (Op::Without, f, g, 0);
        if let Some(&r) = self.cache.get(&key) {
            return r;
        }
        let fn_ = self.nodes[f as usize];
        let gn = self.nodes[g as usize];
        let r = if fn_.level < gn.level {
            let high = self.without_rec(fn_.high, g);
            let low = self.without_rec(fn_.low, g);
            self.mk(fn_.level, high, low)
        } else if fn_.level > gn.level {
            // No solution of f contains g's top variable.
            self.without_rec(f, gn.low)
        } else {
            let partial = self.without_rec(fn_.high, gn.high);
            let high = self.without_rec(partial, gn.low);
            let low = self.without_rec(fn_.low, gn.low);
            self.mk(fn_.level, high, low)
        };
        self.cache.insert(key, r);
        r
    }

    /// Diagram whose solutions are exactly the inclusion-minimal solutions of
    /// the monotone function `f`.
    pub fn minsol(&mut self, f: BddRef) -> Result<BddRef, BddError> {
        let f = self.own(f)?;
        let r = self.minsol_rec(f);
        Ok(self.handle(r))
    }

    fn minsol_rec(&mut self, f: u32) -> u32 {
        if f <= TRUE {
            return f;
        }
        let key = (Op::Minsol, f, 0, 0);
        if let Some(&r) = self.cache.get(&key) {
            return r;
        }
        let n = self.nodes[f as usize];
        let k = self.minsol_rec(n.high);
        let low = self.minsol_rec(n.low);
        let high = self.without_rec(k, low);
        let r = self.mk(n.level, high, low);
        self.cache.insert(key, r);
        r
    }

    /// The sub-family of solutions that contain variable `level`.
    pub fn containing(&mut self, f: BddRef, level: usize) -> Result<BddRef, BddError> {
        let f = self.own(f)?;
        if level >= self.names.len() {
            return Err(BddError::UnknownVariable(level));
        }
        let r = self.containing_rec(f, level as u32);
        Ok(self.handle(r))
    }

    fn containing_rec(&mut self, f: u32, level: u32) -> u32 {
        let n = self.nodes[f as usize];
        if n.level > level {
            return FALSE;
        }
        if n.level == level {
            return self.mk(level, n.high, FALSE);
        }
        let key = (Op::Containing, f, level, 0);
        if let Some(&r) = self.cache.get(&key) {
            return r;
        }
        let high = self.containing_rec(n.high, level);
        let low = self.containing_rec(n.low, level);
        let r = self.mk(n.level, high, low);
        self.cache.insert(key, r);
        r
    }

    /// The monotone function whose satisfying sets are the supersets of the
    /// solutions of `f`.
    pub fn upward_closure(&mut self, f: BddRef) -> Result<BddRef, BddError> {
        let f = self.own(f)?;
        let r = self.closure_rec(f);
        Ok(self.handle(r))
    }

    fn closure_rec(&mut self, f: u32) -> u32 {
        if f <= TRUE {
            return f;
        }
        let key = (Op::Closure, f, 0, 0);
        if let Some(&r) = self.cache.get(&key) {
            return r;
        }
        let n = self.nodes[f as usize];
        let high = self.closure_rec(n.high);
        let low = self.closure_rec(n.low);
        let high = self.or_rec(high, low);
        let r = self.mk(n.level, high, low);
        self.cache.insert(key, r);
        r
    }

    /// All solutions (variable levels on 1-edges) of `f`, one per path to ⊤,
    /// 1-edges explored first.
    pub fn enumerate_solutions(&self, f: BddRef) -> Result<Vec<Vec<usize>>, BddError> {
        let f = self.own(f)?;
        let mut out = Vec::new();
        let mut path = Vec::new();
        self.enumerate_rec(f, &mut path, &mut out)?;
        Ok(out)
    }

    fn enumerate_rec(
        &self,
        f: u32,
        path: &mut Vec<usize>,
        out: &mut Vec<Vec<usize>>,
    ) -> Result<(), BddError> {
        match f {
            FALSE => Ok(()),
            TRUE => {
                if out.len() >= self.solution_cap {
                    return Err(BddError::TooManySolutions {
                        cap: self.solution_cap,
                    });
                }
                out.push(path.clone());
                Ok(())
            }
            _ => {
                let n = self.nodes[f as usize];
                path.push(n.level as usize);
                self.enumerate_rec(n.high, path, out)?;
                path.pop();
                self.enumerate_rec(n.low, path, out)
            }
        }
    }

    /// Internal nodes reachable from `f` (terminals excluded).
    pub fn internal_node_count(&self, f: BddRef) -> usize {
        self.reachable(f.index).len()
    }

    /// Reachable internal node indices in increasing index order, which is a
    /// children-first order.
    fn reachable(&self, f: u32) -> Vec<u32> {
        let mut seen = std::collections::HashSet::new();
        let mut stack = vec![f];
        while let Some(v) = stack.pop() {
            if v > TRUE && seen.insert(v) {
                let n = self.nodes[v as usize];
                stack.push(n.high);
                stack.push(n.low);
            }
        }
        let mut out: Vec<u32> = seen.into_iter().collect();
        out.sort_unstable();
        out
    }

    /// Evaluates `f` under `assignment[level]`.
    pub fn evaluate(&self, f: BddRef, assignment: &[bool]) -> bool {
        let mut v = f.index;
        while v > TRUE {
            let n = self.nodes[v as usize];
            v = if assignment[n.level as usize] { n.high } else { n.low };
        }
        v == TRUE
    }

    /// Flat copy of the diagram rooted at `f`, for repeated numeric passes.
    pub fn compact(&self, f: BddRef) -> CompactBdd {
        let order = self.reachable(f.index);
        let mut pos = HashMap::with_capacity(order.len());
        let map = |pos: &HashMap<u32, u32>, x: u32| if x <= TRUE { x } else { pos[&x] };
        let mut nodes = Vec::with_capacity(order.len());
        for (i, &v) in order.iter().enumerate() {
            let n = self.nodes[v as usize];
            nodes.push(CompactNode {
                level: n.level as usize,
                high: map(&pos, n.high),
                low: map(&pos, n.low),
            });
            pos.insert(v, i as u32 + 2);
        }
        CompactBdd {
            nodes,
            root: map(&pos, f.index),
        }
    }

    /// Graphviz rendering: solid 1-edges, dashed 0-edges.
    pub fn to_dot(&self, f: BddRef) -> String {
        let mut out = String::from("digraph bdd {\n");
        out.push_str("  n0 [shape=box,label=\"0\"];\n  n1 [shape=box,label=\"1\"];\n");
        for v in self.reachable(f.index) {
            let n = self.nodes[v as usize];
            let name = self.names[n.level as usize].replace('"', "\\\"");
            writeln!(out, "  n{v} [shape=circle,label=\"{name}\"];").unwrap();
            writeln!(out, "  n{v} -> n{} [style=solid];", n.high).unwrap();
            writeln!(out, "  n{v} -> n{} [style=dashed];", n.low).unwrap();
        }
        writeln!(out, "  root [shape=plaintext,label=\"\"];\n  root -> n{};", f.index).unwrap();
        out.push_str("}\n");
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CompactNode {
    pub level: usize,
    pub high: u32,
    pub low: u32,
}

/// Nodes listed children-first. Child references 0 and 1 are the terminals;
/// `k >= 2` refers to `nodes[k - 2]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompactBdd {
    pub nodes: Vec<CompactNode>,
    pub root: u32,
}
