//! Dynamic fault tree analysis by modularisation: independent dynamic
//! sub-trees are solved as Markov chains, replaced by basic events carrying
//! the computed failure probabilities, and the remaining static tree is
//! handled with a BDD.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;
use rayon::prelude::*;
use thiserror::Error;

use crate::analysis::{AnalysisError, StaticAnalysis};
use crate::ctmc::{build_ctmc_with_cap, transient_failure_prob, Ctmc, CtmcError, DEFAULT_STATE_CAP};
use crate::curve::{check_times, CurveError, TimeCurve};
use crate::model::{Distribution, FaultTree, NodeId, Violation};
use crate::ordering::{OrderingHeuristic, VariableOrder};
use crate::translate::TranslateOptions;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModularError {
    #[error("invalid fault tree: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Violation>),
    #[error("`{parent}` outside module `{module}` references its member `{child}`")]
    DanglingReference {
        module: String,
        parent: String,
        child: String,
    },
    #[error("no time points given")]
    EmptyTimes,
    #[error(transparent)]
    Curve(#[from] CurveError),
    #[error(transparent)]
    Ctmc(#[from] CtmcError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
}

/// An independent sub-tree: nothing outside reaches a member other than the
/// root, including through `PDEP`/`SEQ` couplings.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Module {
    pub root: NodeId,
    /// All members in index order, root included.
    pub members: Vec<NodeId>,
}

impl Module {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, id: NodeId) -> bool {
        self.members.binary_search(&id).is_ok()
    }

    pub fn member_names<'a>(&self, ft: &'a FaultTree) -> Vec<&'a str> {
        self.members.iter().map(|&m| ft.name(m)).collect()
    }

    pub fn is_dynamic(&self, ft: &FaultTree) -> bool {
        self.members.iter().any(|&m| ft.kind(m).is_dynamic())
    }
}

/// A basic event standing in for a solved module.
#[derive(Debug, Clone, PartialEq)]
pub struct TabulatedBE {
    pub name: String,
    pub curve: Arc<TimeCurve>,
}

impl TabulatedBE {
    pub fn new(name: impl Into<String>, curve: TimeCurve) -> Result<Self, CurveError> {
        if !curve.is_nondecreasing() {
            return Err(CurveError::NotAProbability(f64::NAN));
        }
        Ok(TabulatedBE {
            name: name.into(),
            curve: Arc::new(curve),
        })
    }
}

/// Visit dates of a left-most depth-first traversal from the top over the
/// coupled graph: first visit, and last date the node was touched (revisits
/// and its own exit).
struct Dates {
    first: Vec<usize>,
    last: Vec<usize>,
    exit: Vec<usize>,
}

fn visit_dates(ft: &FaultTree, succ: &[Vec<NodeId>]) -> Dates {
    let n = ft.len();
    let mut d = Dates {
        first: vec![usize::MAX; n],
        last: vec![0; n],
        exit: vec![0; n],
    };
    let mut clock = 0usize;
    let mut tick = || {
        clock += 1;
        clock
    };
    let top = ft.top().index();
    d.first[top] = tick();
    let mut stack = vec![(top, 0usize)];
    while let Some(&mut (v, ref mut i)) = stack.last_mut() {
        if let Some(&w) = succ[v].get(*i) {
            *i += 1;
            let w = w.index();
            let t = tick();
            if d.first[w] == usize::MAX {
                d.first[w] = t;
                stack.push((w, 0));
            } else {
                d.last[w] = d.last[w].max(t);
            }
        } else {
            let t = tick();
            d.exit[v] = t;
            d.last[v] = d.last[v].max(t);
            stack.pop();
        }
    }
    d
}

/// Module roots by the visit-date criterion: `v` is a root iff every other
/// node reachable from it is first visited after `v` and last touched before
/// `v` is left. Reachability follows child edges and `PDEP`/`SEQ` couplings;
/// the min/max over reachable sets are aggregated on the condensation so the
/// whole pass is linear. Basic events and constraint nodes are not
/// candidates. Modules are listed in order of first visit.
pub fn detect_modules(ft: &FaultTree) -> Vec<Module> {
    let succ = ft.coupled_successors();
    let dates = visit_dates(ft, &succ);

    let mut graph = DiGraph::<usize, ()>::with_capacity(ft.len(), 0);
    let idx: Vec<_> = (0..ft.len()).map(|i| graph.add_node(i)).collect();
    for (v, ws) in succ.iter().enumerate() {
        for w in ws {
            graph.add_edge(idx[v], idx[w.index()], ());
        }
    }
    // Reverse topological order: every SCC comes after those it reaches.
    let sccs = tarjan_scc(&graph);
    let mut comp = vec![0usize; ft.len()];
    for (c, scc) in sccs.iter().enumerate() {
        for &x in scc {
            comp[graph[x]] = c;
        }
    }
    // (min first, max last) over everything reachable from a component,
    // the component itself included; and over strict successors only.
    let mut full = vec![(usize::MAX, 0usize); sccs.len()];
    let mut below = vec![(usize::MAX, 0usize); sccs.len()];
    for (c, scc) in sccs.iter().enumerate() {
        let mut acc = (usize::MAX, 0usize);
        for &x in scc {
            for w in &succ[graph[x]] {
                let cw = comp[w.index()];
                if cw != c {
                    acc = (acc.0.min(full[cw].0), acc.1.max(full[cw].1));
                }
            }
        }
        below[c] = acc;
        let mut all = acc;
        for &x in scc {
            let v = graph[x];
            all = (all.0.min(dates.first[v]), all.1.max(dates.last[v]));
        }
        full[c] = all;
    }

    let mut roots = Vec::new();
    for v in ft.ids() {
        let kind = ft.kind(v);
        if !kind.is_gate() || kind.is_constraint() || dates.first[v.index()] == usize::MAX {
            continue;
        }
        let c = comp[v.index()];
        let mut range = below[c];
        for &x in &sccs[c] {
            let w = graph[x];
            if w != v.index() {
                range = (range.0.min(dates.first[w]), range.1.max(dates.last[w]));
            }
        }
        let i = v.index();
        if range.0 > dates.first[i] && range.1 < dates.exit[i] {
            roots.push(v);
        }
    }
    roots.sort_by_key(|r| dates.first[r.index()]);
    roots
        .into_iter()
        .map(|root| Module {
            root,
            members: ft.coupled_reach(root),
        })
        .collect()
}

/// Keeps the dynamic modules that must be solved as Markov chains. Modules
/// are taken by decreasing member count (ties in `modules` order); one is
/// dropped when the members it does not share with another remaining module
/// are all static. The kept modules are pairwise disjoint.
pub fn select_dynamic_modules(ft: &FaultTree, modules: &[Module]) -> Vec<Module> {
    let mut order: Vec<usize> = (0..modules.len()).collect();
    order.sort_by_key(|&i| std::cmp::Reverse(modules[i].len()));
    let mut remaining = vec![true; modules.len()];
    for &i in &order {
        let own_dynamic = modules[i].members.iter().any(|&m| {
            ft.kind(m).is_dynamic()
                && !(0..modules.len()).any(|j| j != i && remaining[j] && modules[j].contains(m))
        });
        if !own_dynamic {
            remaining[i] = false;
        }
    }
    order
        .into_iter()
        .filter(|&i| remaining[i])
        .map(|i| modules[i].clone())
        .collect()
}

/// Replaces `module` by a basic event carrying `tabulated`. The new event
/// takes the root's place, so references to the root now point at it.
pub fn replace_module(
    ft: &FaultTree,
    module: &Module,
    tabulated: &TabulatedBE,
) -> Result<FaultTree, ModularError> {
    for (id, node) in ft.nodes() {
        if module.contains(id) {
            continue;
        }
        if let Some(&c) = node
            .children()
            .iter()
            .find(|&&c| c != module.root && module.contains(c))
        {
            return Err(ModularError::DanglingReference {
                module: ft.name(module.root).to_string(),
                parent: node.name().to_string(),
                child: ft.name(c).to_string(),
            });
        }
    }
    Ok(ft.replace_with_be(
        module.root,
        &module.members,
        tabulated.name.clone(),
        Distribution::Tabulated(tabulated.curve.clone()),
    ))
}

/// Name for the event replacing `root`: the root name with a prime, primed
/// further while it clashes.
pub fn replacement_name(ft: &FaultTree, root: NodeId) -> String {
    let mut name = format!("{}'", ft.name(root));
    while ft.find(&name).is_some() {
        name.push('\'');
    }
    name
}

#[derive(Debug, Clone)]
pub struct DftOptions {
    pub modularise: bool,
    /// Variable order heuristic for the residual static tree.
    pub ordering: OrderingHeuristic,
    pub state_cap: usize,
    pub chunk_size: usize,
}

impl Default for DftOptions {
    fn default() -> Self {
        DftOptions {
            modularise: true,
            ordering: OrderingHeuristic::Dfs,
            state_cap: DEFAULT_STATE_CAP,
            chunk_size: crate::analysis::DEFAULT_CHUNK_SIZE,
        }
    }
}

#[derive(Debug, Clone)]
pub struct DftResult {
    pub curve: TimeCurve,
    /// Roots of the modules solved as Markov chains.
    pub dynamic_modules: Vec<String>,
    /// Total number of CTMC states generated.
    pub ctmc_states: usize,
}

/// Runs the modular pipeline and keeps the Markov chains of solved modules
/// for later queries on the same tree.
#[derive(Debug)]
pub struct DftAnalyzer {
    ft: FaultTree,
    options: DftOptions,
    chains: Mutex<HashMap<String, Arc<Ctmc>>>,
}

impl DftAnalyzer {
    pub fn new(ft: FaultTree, options: DftOptions) -> Result<Self, ModularError> {
        let violations = ft.validate();
        if !violations.is_empty() {
            return Err(ModularError::Invalid(violations));
        }
        Ok(DftAnalyzer {
            ft,
            options,
            chains: Mutex::new(HashMap::new()),
        })
    }

    pub fn tree(&self) -> &FaultTree {
        &self.ft
    }

    /// Chain of the sub-tree rooted at `root`, from the cache when present.
    fn chain(&self, root: NodeId) -> Result<Arc<Ctmc>, ModularError> {
        let key = self.ft.name(root).to_string();
        if let Some(c) = self.chains.lock().unwrap().get(&key) {
            return Ok(c.clone());
        }
        let sub = if root == self.ft.top() {
            self.ft.clone()
        } else {
            self.ft.sub_tree(root)
        };
        let chain = Arc::new(build_ctmc_with_cap(&sub, self.options.state_cap)?);
        self.chains
            .lock()
            .unwrap()
            .entry(key)
            .or_insert_with(|| chain.clone());
        Ok(chain)
    }

    pub fn cached_chains(&self) -> usize {
        self.chains.lock().unwrap().len()
    }

    /// Chains solved so far, by module root name.
    pub fn solved_chains(&self) -> Vec<(String, Arc<Ctmc>)> {
        let mut v: Vec<(String, Arc<Ctmc>)> = self
            .chains
            .lock()
            .unwrap()
            .iter()
            .map(|(k, c)| (k.clone(), c.clone()))
            .collect();
        v.sort_by(|a, b| a.0.cmp(&b.0));
        v
    }

    /// The static tree left after replacing every dynamic module by a
    /// tabulated event evaluated at `times`.
    pub fn residual_tree(&self, times: &[f64]) -> Result<(FaultTree, Vec<String>, usize), ModularError> {
        let modules = select_dynamic_modules(&self.ft, &detect_modules(&self.ft));
        let solved: Vec<Result<(TimeCurve, usize), ModularError>> = modules
            .par_iter()
            .map(|m| {
                let chain = self.chain(m.root)?;
                Ok((transient_failure_prob(&chain, times)?, chain.state_count()))
            })
            .collect();
        let mut tree = self.ft.clone();
        let mut states = 0;
        let mut roots = Vec::with_capacity(modules.len());
        for (m, result) in modules.iter().zip(solved) {
            let (curve, n) = result?;
            states += n;
            let root_name = self.ft.name(m.root);
            roots.push(root_name.to_string());
            // Ids shift with every replacement; resolve the module by name.
            let root = tree.find(root_name).expect("disjoint modules survive");
            let members = m
                .members
                .iter()
                .map(|&x| tree.find(self.ft.name(x)).expect("disjoint modules survive"))
                .collect::<Vec<_>>();
            let mut members = members;
            members.sort();
            let local = Module { root, members };
            let tab = TabulatedBE::new(replacement_name(&tree, root), curve)?;
            tree = replace_module(&tree, &local, &tab)?;
        }
        debug_assert!(tree.is_static());
        Ok((tree, roots, states))
    }

    pub fn analyze(&self, times: &[f64]) -> Result<DftResult, ModularError> {
        if times.is_empty() {
            return Err(ModularError::EmptyTimes);
        }
        check_times(times)?;
        if !self.options.modularise && !self.ft.is_static() {
            let chain = self.chain(self.ft.top())?;
            return Ok(DftResult {
                curve: transient_failure_prob(&chain, times)?,
                dynamic_modules: vec![self.ft.name(self.ft.top()).to_string()],
                ctmc_states: chain.state_count(),
            });
        }
        let (tree, dynamic_modules, ctmc_states) = self.residual_tree(times)?;
        let order = VariableOrder::from_heuristic(&tree, self.options.ordering);
        let analysis = StaticAnalysis::new(&tree, &order, TranslateOptions::default())?;
        Ok(DftResult {
            curve: analysis.curve(times, self.options.chunk_size)?,
            dynamic_modules,
            ctmc_states,
        })
    }
}

/// Unreliability of a (possibly dynamic) tree at `times`, modularised.
pub fn analyze_dft(ft: &FaultTree, times: &[f64], chunk_size: usize) -> Result<DftResult, ModularError> {
    DftAnalyzer::new(
        ft.clone(),
        DftOptions {
            chunk_size,
            ..DftOptions::default()
        },
    )?
    .analyze(times)
}

/// The whole tree as one Markov chain.
pub fn analyze_dft_monolithic(ft: &FaultTree, times: &[f64]) -> Result<DftResult, ModularError> {
    let violations = ft.validate();
    if !violations.is_empty() {
        return Err(ModularError::Invalid(violations));
    }
    let chain = build_ctmc_with_cap(ft, DEFAULT_STATE_CAP)?;
    Ok(DftResult {
        curve: transient_failure_prob(&chain, times)?,
        dynamic_modules: vec![ft.name(ft.top()).to_string()],
        ctmc_states: chain.state_count(),
    })
}
