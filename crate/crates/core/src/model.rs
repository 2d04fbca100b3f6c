//! In-memory fault trees.
//!
//! A [`FaultTree`] is a DAG of named nodes with ordered children and a single
//! top event. Basic events carry a failure [`Distribution`]. Static trees only
//! use `AND`, `OR` and voting gates; dynamic trees may additionally contain
//! priority gates (`PAND`, `POR`), probabilistic dependencies (`PDEP`),
//! sequence enforcers (`SEQ`) and `SPARE` gates.
//!
//! `PDEP` and `SEQ` nodes never fail themselves. They may appear as children
//! of ordinary gates or float freely; in both cases they couple their children
//! (see [`FaultTree::coupled_reach`]).

use std::collections::{HashMap, VecDeque};
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::curve::TimeCurve;

/// Index of a node inside its owning [`FaultTree`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(pub(crate) usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Keyword a spare gate was declared with. All variants share SPARE semantics;
/// the keyword is kept so serialization reproduces the input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SpareKind {
    Warm,
    Cold,
    Hot,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NodeType {
    Be,
    And,
    Or,
    /// Fails when at least `k` children failed.
    Vot(usize),
    Pand,
    Por,
    /// The first child triggers; each remaining child then fails with
    /// probability `p`. `p == 1` is a functional dependency.
    Pdep(f64),
    Seq,
    Spare(SpareKind),
}

impl NodeType {
    pub fn is_gate(&self) -> bool {
        !matches!(self, NodeType::Be)
    }

    pub fn is_static(&self) -> bool {
        matches!(
            self,
            NodeType::Be | NodeType::And | NodeType::Or | NodeType::Vot(_)
        )
    }

    pub fn is_dynamic(&self) -> bool {
        !self.is_static()
    }

    /// `PDEP` and `SEQ` restrict behaviour but have no failure status.
    pub fn is_constraint(&self) -> bool {
        matches!(self, NodeType::Pdep(_) | NodeType::Seq)
    }

    fn min_children(&self) -> usize {
        match self {
            NodeType::Be => 0,
            NodeType::Pdep(_) | NodeType::Seq | NodeType::Spare(_) => 2,
            _ => 1,
        }
    }
}

impl fmt::Display for NodeType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NodeType::Be => write!(f, "BE"),
            NodeType::And => write!(f, "AND"),
            NodeType::Or => write!(f, "OR"),
            NodeType::Vot(k) => write!(f, "VOT({k})"),
            NodeType::Pand => write!(f, "PAND"),
            NodeType::Por => write!(f, "POR"),
            NodeType::Pdep(p) => write!(f, "PDEP({p})"),
            NodeType::Seq => write!(f, "SEQ"),
            NodeType::Spare(_) => write!(f, "SPARE"),
        }
    }
}

/// Failure behaviour of a basic event.
#[derive(Debug, Clone, PartialEq)]
pub enum Distribution {
    /// Exponential failure with `rate` while active and `dormancy * rate`
    /// while dormant.
    Exponential { rate: f64, dormancy: f64 },
    /// Fixed failure probability, independent of time. Static analysis only.
    Constant { probability: f64 },
    /// Failure probabilities given at fixed time points; produced when a
    /// dynamic module is replaced by a single event.
    Tabulated(Arc<TimeCurve>),
}

impl Distribution {
    pub fn exponential(rate: f64) -> Self {
        Distribution::Exponential {
            rate,
            dormancy: 1.0,
        }
    }

    /// Probability of having failed by time `t` (always-active component).
    pub fn probability_at(&self, t: f64) -> Result<f64, DistributionError> {
        match self {
            Distribution::Exponential { rate, .. } => Ok(-(-rate * t).exp_m1()),
            Distribution::Constant { probability } => Ok(*probability),
            Distribution::Tabulated(curve) => curve
                .value_at(t)
                .ok_or(DistributionError::OutsideSupport { time: t }),
        }
    }

    pub fn is_exponential(&self) -> bool {
        matches!(self, Distribution::Exponential { .. })
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DistributionError {
    #[error("time {time} is outside the support of a tabulated basic event")]
    OutsideSupport { time: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    name: String,
    kind: NodeType,
    children: Vec<NodeId>,
    distribution: Option<Distribution>,
}

impl Node {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn kind(&self) -> NodeType {
        self.kind
    }

    pub fn children(&self) -> &[NodeId] {
        &self.children
    }

    pub fn distribution(&self) -> Option<&Distribution> {
        self.distribution.as_ref()
    }

    pub fn is_be(&self) -> bool {
        self.kind == NodeType::Be
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BuildError {
    #[error("duplicate declaration of `{0}`")]
    Duplicate(String),
    #[error("`{parent}` references undeclared node `{child}`")]
    UndeclaredReference { parent: String, child: String },
    #[error("top event `{0}` is not declared")]
    UnknownTop(String),
    #[error("no top event set")]
    MissingTop,
}

/// One broken invariant, naming the node at fault.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub node: String,
    pub rule: Rule,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rule {
    GateWithoutChildren,
    TooFewChildren,
    KExceedsChildCount,
    KNotPositive,
    BeWithChildren,
    MissingDistribution,
    UnexpectedDistribution,
    InvalidRate,
    InvalidDormancy,
    InvalidProbability,
    InvalidDependencyProbability,
    DependentNotBe,
    SequenceChildNotBe,
    Cycle,
    Disconnected,
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Rule::GateWithoutChildren => "gate without children",
            Rule::TooFewChildren => "too few children for gate type",
            Rule::KExceedsChildCount => "k exceeds child count",
            Rule::KNotPositive => "k must be positive",
            Rule::BeWithChildren => "basic event with children",
            Rule::MissingDistribution => "basic event without distribution",
            Rule::UnexpectedDistribution => "gate with a failure distribution",
            Rule::InvalidRate => "failure rate must be positive",
            Rule::InvalidDormancy => "dormancy must lie in [0, 1]",
            Rule::InvalidProbability => "probability must lie in [0, 1]",
            Rule::InvalidDependencyProbability => "dependency probability must lie in (0, 1]",
            Rule::DependentNotBe => "dependent event is not a basic event",
            Rule::SequenceChildNotBe => "sequence child is not a basic event",
            Rule::Cycle => "node lies on a cycle",
            Rule::Disconnected => "node not connected to the top event",
        };
        f.write_str(s)
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.node, self.rule)
    }
}

/// Immutable fault tree. Node indices follow declaration order.
#[derive(Debug, Clone)]
pub struct FaultTree {
    nodes: Vec<Node>,
    top: NodeId,
    by_name: HashMap<String, NodeId>,
}

impl FaultTree {
    pub fn builder() -> FaultTreeBuilder {
        FaultTreeBuilder::default()
    }

    pub fn top(&self) -> NodeId {
        self.top
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id.0]
    }

    pub fn name(&self, id: NodeId) -> &str {
        &self.nodes[id.0].name
    }

    pub fn kind(&self, id: NodeId) -> NodeType {
        self.nodes[id.0].kind
    }

    pub fn children(&self, id: NodeId) -> &[NodeId] {
        &self.nodes[id.0].children
    }

    pub fn find(&self, name: &str) -> Option<NodeId> {
        self.by_name.get(name).copied()
    }

    pub fn ids(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.nodes.len()).map(NodeId)
    }

    pub fn nodes(&self) -> impl Iterator<Item = (NodeId, &Node)> {
        self.nodes.iter().enumerate().map(|(i, n)| (NodeId(i), n))
    }

    /// Basic events in declaration order.
    pub fn basic_events(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.nodes().filter(|(_, n)| n.is_be()).map(|(id, _)| id)
    }

    pub fn be_count(&self) -> usize {
        self.basic_events().count()
    }

    /// Real (non-coupling) parents of every node, in index order.
    pub fn parents(&self) -> Vec<Vec<NodeId>> {
        let mut parents = vec![Vec::new(); self.nodes.len()];
        for (id, node) in self.nodes() {
            for &c in &node.children {
                if !parents[c.0].contains(&id) {
                    parents[c.0].push(id);
                }
            }
        }
        parents
    }

    /// Edges used for reachability: every child edge, plus an edge from each
    /// child of a `PDEP`/`SEQ` back to that constraint node. Coupled nodes are
    /// therefore always reached together.
    pub fn coupled_successors(&self) -> Vec<Vec<NodeId>> {
        let mut succ: Vec<Vec<NodeId>> = self.nodes.iter().map(|n| n.children.clone()).collect();
        for (id, node) in self.nodes() {
            if node.kind.is_constraint() {
                for &c in &node.children {
                    if !succ[c.0].contains(&id) {
                        succ[c.0].push(id);
                    }
                }
            }
        }
        succ
    }

    /// Nodes reachable from `root` over [`Self::coupled_successors`], in
    /// index order. A basic event root yields only itself.
    pub fn coupled_reach(&self, root: NodeId) -> Vec<NodeId> {
        if self.node(root).is_be() {
            return vec![root];
        }
        let succ = self.coupled_successors();
        let mut seen = vec![false; self.nodes.len()];
        let mut queue = VecDeque::from([root]);
        seen[root.0] = true;
        while let Some(v) = queue.pop_front() {
            for &w in &succ[v.0] {
                if !seen[w.0] {
                    seen[w.0] = true;
                    queue.push_back(w);
                }
            }
        }
        (0..self.nodes.len())
            .filter(|&i| seen[i])
            .map(NodeId)
            .collect()
    }

    /// Checks every structural invariant; an empty list means the tree is
    /// valid.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let mut flag = |id: NodeId, rule: Rule| {
            out.push(Violation {
                node: self.name(id).to_string(),
                rule,
            })
        };
        for (id, node) in self.nodes() {
            let n = node.children.len();
            match node.kind {
                NodeType::Be => {
                    if n > 0 {
                        flag(id, Rule::BeWithChildren);
                    }
                    match &node.distribution {
                        None => flag(id, Rule::MissingDistribution),
                        Some(Distribution::Exponential { rate, dormancy }) => {
                            if !(*rate > 0.0 && rate.is_finite()) {
                                flag(id, Rule::InvalidRate);
                            }
                            if !(0.0..=1.0).contains(dormancy) {
                                flag(id, Rule::InvalidDormancy);
                            }
                        }
                        Some(Distribution::Constant { probability }) => {
                            if !(0.0..=1.0).contains(probability) {
                                flag(id, Rule::InvalidProbability);
                            }
                        }
                        Some(Distribution::Tabulated(curve)) => {
                            if curve.values().iter().any(|p| !(0.0..=1.0).contains(p)) {
                                flag(id, Rule::InvalidProbability);
                            }
                        }
                    }
                }
                kind => {
                    if node.distribution.is_some() {
                        flag(id, Rule::UnexpectedDistribution);
                    }
                    if n == 0 {
                        flag(id, Rule::GateWithoutChildren);
                    } else if n < kind.min_children() {
                        flag(id, Rule::TooFewChildren);
                    }
                    match kind {
                        NodeType::Vot(k) => {
                            if k == 0 {
                                flag(id, Rule::KNotPositive);
                            } else if k > n {
                                flag(id, Rule::KExceedsChildCount);
                            }
                        }
                        NodeType::Pdep(p) => {
                            if !(p > 0.0 && p <= 1.0) {
                                flag(id, Rule::InvalidDependencyProbability);
                            }
                            if node.children.iter().skip(1).any(|&c| !self.node(c).is_be()) {
                                flag(id, Rule::DependentNotBe);
                            }
                        }
                        NodeType::Seq if node.children.iter().any(|&c| !self.node(c).is_be()) => {
                            flag(id, Rule::SequenceChildNotBe);
                        }
                        _ => {}
                    }
                }
            }
        }
        for id in self.cyclic_nodes() {
            flag(id, Rule::Cycle);
        }
        let reach = self.coupled_reach(self.top);
        if reach.len() != self.nodes.len() {
            let mut connected = vec![false; self.nodes.len()];
            for id in reach {
                connected[id.0] = true;
            }
            for id in self.ids().filter(|id| !connected[id.0]) {
                flag(id, Rule::Disconnected);
            }
        }
        out
    }

    pub fn is_valid(&self) -> bool {
        self.validate().is_empty()
    }

    /// True iff every node is a basic event, `AND`, `OR` or voting gate.
    pub fn is_static(&self) -> bool {
        self.nodes.iter().all(|n| n.kind.is_static())
    }

    /// Nodes on a cycle of the child relation (Kahn's algorithm leftovers).
    fn cyclic_nodes(&self) -> Vec<NodeId> {
        let n = self.nodes.len();
        let mut indeg = vec![0usize; n];
        for node in &self.nodes {
            for c in &node.children {
                indeg[c.0] += 1;
            }
        }
        let mut queue: VecDeque<usize> = (0..n).filter(|&i| indeg[i] == 0).collect();
        let mut removed = vec![false; n];
        while let Some(v) = queue.pop_front() {
            removed[v] = true;
            for c in &self.nodes[v].children {
                indeg[c.0] -= 1;
                if indeg[c.0] == 0 {
                    queue.push_back(c.0);
                }
            }
        }
        (0..n).filter(|&i| !removed[i]).map(NodeId).collect()
    }

    /// Children-before-parents order over all nodes. Requires acyclicity.
    pub fn topological_order(&self) -> Vec<NodeId> {
        let mut order = Vec::with_capacity(self.nodes.len());
        let mut state = vec![0u8; self.nodes.len()];
        for start in 0..self.nodes.len() {
            if state[start] != 0 {
                continue;
            }
            let mut stack = vec![(start, 0usize)];
            state[start] = 1;
            while let Some(&mut (v, ref mut i)) = stack.last_mut() {
                if let Some(&c) = self.nodes[v].children.get(*i) {
                    *i += 1;
                    if state[c.0] == 0 {
                        state[c.0] = 1;
                        stack.push((c.0, 0));
                    }
                } else {
                    state[v] = 2;
                    order.push(NodeId(v));
                    stack.pop();
                }
            }
        }
        order
    }

    /// The tree induced by everything reachable from `root` (including
    /// coupled constraint nodes), with `root` as top. Relative declaration
    /// order is preserved.
    pub fn sub_tree(&self, root: NodeId) -> FaultTree {
        let keep = self.coupled_reach(root);
        self.restricted_to(&keep, root)
    }

    fn restricted_to(&self, keep: &[NodeId], top: NodeId) -> FaultTree {
        let mut remap = vec![None; self.nodes.len()];
        for (new, old) in keep.iter().enumerate() {
            remap[old.0] = Some(NodeId(new));
        }
        let nodes: Vec<Node> = keep
            .iter()
            .map(|&old| {
                let n = &self.nodes[old.0];
                Node {
                    name: n.name.clone(),
                    kind: n.kind,
                    children: n
                        .children
                        .iter()
                        .map(|c| remap[c.0].expect("reach is closed under children"))
                        .collect(),
                    distribution: n.distribution.clone(),
                }
            })
            .collect();
        let by_name = nodes
            .iter()
            .enumerate()
            .map(|(i, n)| (n.name.clone(), NodeId(i)))
            .collect();
        FaultTree {
            nodes,
            top: remap[top.0].unwrap(),
            by_name,
        }
    }

    /// Replaces `root` by a basic event named `name` with `distribution` and
    /// drops `members` (which must contain `root`). The new event keeps the
    /// root's position in declaration order.
    pub(crate) fn replace_with_be(
        &self,
        root: NodeId,
        members: &[NodeId],
        name: String,
        distribution: Distribution,
    ) -> FaultTree {
        let mut drop = vec![false; self.nodes.len()];
        for m in members {
            drop[m.0] = true;
        }
        drop[root.0] = false;
        let keep: Vec<NodeId> = self.ids().filter(|id| !drop[id.0]).collect();
        let mut tree = self.restricted_to_lenient(&keep, &drop);
        let new_root = tree.by_name[self.name(root)];
        tree.by_name.remove(self.name(root));
        let node = &mut tree.nodes[new_root.0];
        node.name = name.clone();
        node.kind = NodeType::Be;
        node.children.clear();
        node.distribution = Some(distribution);
        tree.by_name.insert(name, new_root);
        tree
    }

    /// Like `restricted_to` but silently drops child edges into removed
    /// nodes (only the replaced root's edges do that).
    fn restricted_to_lenient(&self, keep: &[NodeId], dropped: &[bool]) -> FaultTree {
        let mut remap = vec![None; self.nodes.len()];
        for (new, old) in keep.iter().enumerate() {
            remap[old.0] = Some(NodeId(new));
        }
        let nodes: Vec<Node> = keep
            .iter()
            .map(|&old| {
                let n = &self.nodes[old.0];
                Node {
                    name: n.name.clone(),
                    kind: n.kind,
                    children: n
                        .children
                        .iter()
                        .filter(|c| !dropped[c.0])
                        .map(|c| remap[c.0].unwrap())
                        .collect(),
                    distribution: n.distribution.clone(),
                }
            })
            .collect();
        let by_name = nodes
            .iter()
            .enumerate()
            .map(|(i, n)| (n.name.clone(), NodeId(i)))
            .collect();
        FaultTree {
            nodes,
            top: remap[self.top.0].unwrap(),
            by_name,
        }
    }

    /// Evaluates the Boolean failure function of a static tree for a given
    /// set of failed basic events (indexed by node id).
    pub fn evaluate_static(&self, failed: &dyn Fn(NodeId) -> bool) -> bool {
        let mut value = vec![false; self.nodes.len()];
        for id in self.topological_order() {
            let node = self.node(id);
            let count = || node.children.iter().filter(|c| value[c.0]).count();
            value[id.0] = match node.kind {
                NodeType::Be => failed(id),
                NodeType::And => count() == node.children.len(),
                NodeType::Or => count() > 0,
                NodeType::Vot(k) => count() >= k,
                _ => false,
            };
        }
        value[self.top.0]
    }
}

impl PartialEq for FaultTree {
    /// Structural equality: same nodes in the same order and the same top.
    fn eq(&self, other: &Self) -> bool {
        self.top == other.top && self.nodes == other.nodes
    }
}

/// Collects named node declarations in any order and resolves references.
#[derive(Debug, Default)]
pub struct FaultTreeBuilder {
    decls: Vec<(String, NodeType, Vec<String>, Option<Distribution>)>,
    top: Option<String>,
}

impl FaultTreeBuilder {
    pub fn basic_event(mut self, name: &str, distribution: Distribution) -> Self {
        self.add_basic_event(name, distribution);
        self
    }

    pub fn gate(mut self, name: &str, kind: NodeType, children: &[&str]) -> Self {
        self.add_gate(name, kind, children.iter().map(|s| s.to_string()).collect());
        self
    }

    pub fn top(mut self, name: &str) -> Self {
        self.set_top(name);
        self
    }

    pub fn add_basic_event(&mut self, name: &str, distribution: Distribution) {
        self.decls
            .push((name.to_string(), NodeType::Be, Vec::new(), Some(distribution)));
    }

    pub fn add_gate(&mut self, name: &str, kind: NodeType, children: Vec<String>) {
        self.decls.push((name.to_string(), kind, children, None));
    }

    pub fn set_top(&mut self, name: &str) {
        self.top = Some(name.to_string());
    }

    /// Resolves names. Structural invariants are not checked here; call
    /// [`FaultTree::validate`].
    pub fn build(self) -> Result<FaultTree, BuildError> {
        let mut by_name = HashMap::with_capacity(self.decls.len());
        for (i, (name, ..)) in self.decls.iter().enumerate() {
            if by_name.insert(name.clone(), NodeId(i)).is_some() {
                return Err(BuildError::Duplicate(name.clone()));
            }
        }
        let mut nodes = Vec::with_capacity(self.decls.len());
        for (name, kind, children, distribution) in self.decls {
            let children = children
                .into_iter()
                .map(|c| {
                    by_name
                        .get(&c)
                        .copied()
                        .ok_or_else(|| BuildError::UndeclaredReference {
                            parent: name.clone(),
                            child: c,
                        })
                })
                .collect::<Result<Vec<_>, _>>()?;
            nodes.push(Node {
                name,
                kind,
                children,
                distribution,
            });
        }
        let top_name = self.top.ok_or(BuildError::MissingTop)?;
        let top = *by_name
            .get(&top_name)
            .ok_or(BuildError::UnknownTop(top_name))?;
        Ok(FaultTree {
            nodes,
            top,
            by_name,
        })
    }
}
