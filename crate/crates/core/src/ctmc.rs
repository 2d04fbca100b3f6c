//! State-space generation for dynamic fault trees and transient analysis of
//! the resulting continuous-time Markov chain.
//!
//! A state records the status of every node, which child each `SPARE`
//! currently uses, which basic events are active and which `PDEP`s have
//! fired. Each transition is the failure of one basic event; its effects are
//! resolved as follows:
//!
//! 1. the event is marked failed;
//! 2. until nothing changes: gates are re-evaluated bottom-up, triggered
//!    `PDEP`s fire (in index order), and `SPARE`s whose used child failed
//!    claim the leftmost available child (in index order) or fail;
//! 3. successors where the failed children of some `SEQ` do not form a
//!    prefix are discarded;
//! 4. activation is propagated from the top through used spare children.
//!
//! `PAND`/`POR` compare against their status at the start of the transition,
//! so children failing in the same transition count as failing in order.
//! A `PDEP` with `p < 1` splits the transition into one successor per outcome
//! with the rate scaled by `p^fired · (1 - p)^spared`.

use std::collections::{HashMap, VecDeque};
use std::fmt::Write as _;

use thiserror::Error;

use crate::curve::{check_times, CurveError, TimeCurve};
use crate::model::{Distribution, FaultTree, NodeId, NodeType, Violation};

pub const DEFAULT_STATE_CAP: usize = 1_000_000;

/// Bound on the neglected Poisson mass per time point.
const POISSON_TAIL: f64 = 1e-11;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CtmcError {
    #[error("invalid fault tree: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Violation>),
    #[error("basic event `{0}` is not exponentially distributed")]
    NonExponential(String),
    #[error("state space exceeds {cap} states")]
    StateCap { cap: usize },
    #[error("spare gates `{first}` and `{second}` both start on `{child}`")]
    Nondeterminism {
        first: String,
        second: String,
        child: String,
    },
    #[error("no time points given")]
    EmptyTimes,
    #[error(transparent)]
    Curve(#[from] CurveError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Operational,
    Failed,
    FailSafe,
}

const OPERATIONAL: u8 = 0;
const FAILED: u8 = 1;
const FAIL_SAFE: u8 = 2;

fn status_of(b: u8) -> Status {
    match b {
        FAILED => Status::Failed,
        FAIL_SAFE => Status::FailSafe,
        _ => Status::Operational,
    }
}

/// Byte offsets of the parts of an encoded state.
#[derive(Debug, Clone)]
struct Layout {
    nodes: usize,
    spares: Vec<NodeId>,
    pdeps: Vec<NodeId>,
    /// Slot of each SPARE in `spares`, by node index.
    spare_slot: Vec<Option<usize>>,
}

impl Layout {
    fn len(&self) -> usize {
        2 * self.nodes + self.spares.len() + self.pdeps.len()
    }

    fn active(&self, v: usize) -> usize {
        self.nodes + v
    }

    fn claim(&self, slot: usize) -> usize {
        2 * self.nodes + slot
    }

    fn fired(&self, slot: usize) -> usize {
        2 * self.nodes + self.spares.len() + slot
    }
}

/// Sparse chain with failed states absorbing. State 0 is initial.
#[derive(Debug, Clone)]
pub struct Ctmc {
    tree: FaultTree,
    layout: Layout,
    states: Vec<Box<[u8]>>,
    row_start: Vec<usize>,
    targets: Vec<u32>,
    rates: Vec<f64>,
    failed: Vec<bool>,
}

impl Ctmc {
    pub fn state_count(&self) -> usize {
        self.states.len()
    }

    pub fn transition_count(&self) -> usize {
        self.targets.len()
    }

    pub fn initial(&self) -> usize {
        0
    }

    pub fn is_failed(&self, state: usize) -> bool {
        self.failed[state]
    }

    /// `(target, rate)` pairs leaving `state`.
    pub fn transitions(&self, state: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_start[state]..self.row_start[state + 1];
        self.targets[range.clone()]
            .iter()
            .zip(&self.rates[range])
            .map(|(&t, &r)| (t as usize, r))
    }

    pub fn exit_rate(&self, state: usize) -> f64 {
        self.transitions(state).map(|(_, r)| r).sum()
    }

    /// Status of node `name` in `state`.
    pub fn node_status(&self, state: usize, name: &str) -> Option<Status> {
        let id = self.tree.find(name)?;
        Some(status_of(self.states[state][id.index()]))
    }

    pub fn is_active(&self, state: usize, name: &str) -> Option<bool> {
        let id = self.tree.find(name)?;
        Some(self.states[state][self.layout.active(id.index())] != 0)
    }

    /// Human-readable summary of one state.
    pub fn describe(&self, state: usize) -> String {
        let s = &self.states[state];
        let ft = &self.tree;
        let pick = |want: u8| -> Vec<&str> {
            ft.ids()
                .filter(|id| s[id.index()] == want)
                .map(|id| ft.name(id))
                .collect()
        };
        let mut out = String::new();
        if self.failed[state] {
            out.push_str("[failed] ");
        }
        write!(out, "failed={}", pick(FAILED).join(",")).unwrap();
        let safe = pick(FAIL_SAFE);
        if !safe.is_empty() {
            write!(out, " failsafe={}", safe.join(",")).unwrap();
        }
        for (slot, &sp) in self.layout.spares.iter().enumerate() {
            let child = ft.children(sp)[s[self.layout.claim(slot)] as usize];
            write!(out, " {}->{}", ft.name(sp), ft.name(child)).unwrap();
        }
        let dormant: Vec<&str> = ft
            .basic_events()
            .filter(|b| s[self.layout.active(b.index())] == 0)
            .map(|b| ft.name(b))
            .collect();
        if !dormant.is_empty() {
            write!(out, " dormant={}", dormant.join(",")).unwrap();
        }
        out
    }

    /// One `# state` annotation per state followed by one `src tgt rate`
    /// line per transition.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        writeln!(
            out,
            "# states {} transitions {} initial 0",
            self.state_count(),
            self.transition_count()
        )
        .unwrap();
        for i in 0..self.state_count() {
            writeln!(out, "# state {i} {}", self.describe(i)).unwrap();
        }
        for i in 0..self.state_count() {
            for (j, r) in self.transitions(i) {
                writeln!(out, "{i} {j} {r}").unwrap();
            }
        }
        out
    }
}

/// Static description of the tree used during exploration.
struct Explorer<'a> {
    ft: &'a FaultTree,
    layout: Layout,
    topo: Vec<NodeId>,
    /// Children that can fail (constraint nodes excluded).
    effective: Vec<Vec<NodeId>>,
    /// Non-constraint parents, for activation.
    parents: Vec<Vec<NodeId>>,
    seqs: Vec<NodeId>,
    rates: Vec<(NodeId, f64, f64)>,
}

enum Outcome {
    Done(Vec<u8>, f64),
    Dropped,
}

impl<'a> Explorer<'a> {
    fn new(ft: &'a FaultTree) -> Result<Self, CtmcError> {
        let violations = ft.validate();
        if !violations.is_empty() {
            return Err(CtmcError::Invalid(violations));
        }
        let mut rates = Vec::new();
        for b in ft.basic_events() {
            match ft.node(b).distribution() {
                Some(Distribution::Exponential { rate, dormancy }) => {
                    rates.push((b, *rate, rate * dormancy))
                }
                _ => return Err(CtmcError::NonExponential(ft.name(b).to_string())),
            }
        }
        let spares: Vec<NodeId> = ft
            .ids()
            .filter(|&v| matches!(ft.kind(v), NodeType::Spare(_)))
            .collect();
        let pdeps: Vec<NodeId> = ft
            .ids()
            .filter(|&v| matches!(ft.kind(v), NodeType::Pdep(_)))
            .collect();
        let mut spare_slot = vec![None; ft.len()];
        for (i, s) in spares.iter().enumerate() {
            spare_slot[s.index()] = Some(i);
        }
        let effective = ft
            .ids()
            .map(|v| {
                ft.children(v)
                    .iter()
                    .copied()
                    .filter(|&c| !ft.kind(c).is_constraint())
                    .collect()
            })
            .collect();
        let parents = ft
            .parents()
            .into_iter()
            .map(|ps| ps.into_iter().filter(|&p| !ft.kind(p).is_constraint()).collect())
            .collect();
        Ok(Explorer {
            ft,
            layout: Layout {
                nodes: ft.len(),
                spares,
                pdeps,
                spare_slot,
            },
            topo: ft.topological_order(),
            effective,
            parents,
            seqs: ft.ids().filter(|&v| ft.kind(v) == NodeType::Seq).collect(),
            rates,
        })
    }

    fn initial(&self) -> Result<Vec<u8>, CtmcError> {
        let mut s = vec![0u8; self.layout.len()];
        let mut owner: HashMap<NodeId, NodeId> = HashMap::new();
        for &sp in &self.layout.spares {
            let primary = self.ft.children(sp)[0];
            if let Some(&first) = owner.get(&primary) {
                return Err(CtmcError::Nondeterminism {
                    first: self.ft.name(first).to_string(),
                    second: self.ft.name(sp).to_string(),
                    child: self.ft.name(primary).to_string(),
                });
            }
            owner.insert(primary, sp);
        }
        self.activate(&mut s);
        Ok(s)
    }

    fn claimed_child(&self, s: &[u8], slot: usize) -> NodeId {
        let sp = self.layout.spares[slot];
        self.ft.children(sp)[s[self.layout.claim(slot)] as usize]
    }

    fn is_claimed_by_other(&self, s: &[u8], child: NodeId, slot: usize) -> bool {
        (0..self.layout.spares.len()).any(|o| o != slot && self.claimed_child(s, o) == child)
    }

    /// Re-evaluates every non-spare gate; `start` supplies the statuses at
    /// the beginning of the transition.
    fn evaluate_gates(&self, start: &[u8], s: &mut [u8]) {
        for &v in &self.topo {
            let i = v.index();
            let kids = &self.effective[i];
            let failed = |c: &NodeId| s[c.index()] == FAILED;
            let new = match self.ft.kind(v) {
                NodeType::Be | NodeType::Spare(_) | NodeType::Pdep(_) | NodeType::Seq => continue,
                _ if start[i] != OPERATIONAL => start[i],
                NodeType::And => {
                    if kids.iter().all(failed) {
                        FAILED
                    } else {
                        OPERATIONAL
                    }
                }
                NodeType::Or => {
                    if kids.iter().any(failed) {
                        FAILED
                    } else {
                        OPERATIONAL
                    }
                }
                NodeType::Vot(k) => {
                    if kids.iter().filter(|c| failed(c)).count() >= k {
                        FAILED
                    } else {
                        OPERATIONAL
                    }
                }
                NodeType::Pand => {
                    if kids.iter().all(failed) {
                        FAILED
                    } else if kids
                        .iter()
                        .enumerate()
                        .any(|(j, c)| failed(c) && kids[..j].iter().any(|b| !failed(b)))
                    {
                        FAIL_SAFE
                    } else {
                        OPERATIONAL
                    }
                }
                NodeType::Por => {
                    if kids.first().is_some_and(failed) {
                        FAILED
                    } else if kids.iter().skip(1).any(failed) {
                        FAIL_SAFE
                    } else {
                        OPERATIONAL
                    }
                }
            };
            s[i] = new;
        }
    }

    /// Moves every `SPARE` whose used child failed to its next child.
    fn claim(&self, s: &mut [u8]) -> bool {
        let mut changed = false;
        for (slot, &sp) in self.layout.spares.iter().enumerate() {
            if s[sp.index()] != OPERATIONAL || s[self.claimed_child(s, slot).index()] != FAILED {
                continue;
            }
            let next = self.ft.children(sp).iter().position(|&c| {
                s[c.index()] != FAILED && !self.is_claimed_by_other(s, c, slot)
            });
            match next {
                Some(pos) => s[self.layout.claim(slot)] = pos as u8,
                None => s[sp.index()] = FAILED,
            }
            changed = true;
        }
        changed
    }

    /// Monotone activation: a node is active if it has no failing parent, or
    /// an active parent that is not a `SPARE` or is a `SPARE` using it.
    fn activate(&self, s: &mut [u8]) {
        for &v in self.topo.iter().rev() {
            let i = v.index();
            if s[self.layout.active(i)] != 0 {
                continue;
            }
            let ps = &self.parents[i];
            let active = ps.is_empty()
                || ps.iter().any(|&p| {
                    s[self.layout.active(p.index())] != 0
                        && match self.layout.spare_slot[p.index()] {
                            Some(slot) => self.claimed_child(s, slot) == v,
                            None => true,
                        }
                })
                || v == self.ft.top();
            if active {
                s[self.layout.active(i)] = 1;
            }
        }
    }

    fn seq_ok(&self, s: &[u8]) -> bool {
        self.seqs.iter().all(|&q| {
            let kids = self.ft.children(q);
            let prefix = kids.iter().take_while(|c| s[c.index()] == FAILED).count();
            kids[prefix..].iter().all(|c| s[c.index()] != FAILED)
        })
    }

    /// Resolves one partial successor. Firing a probabilistic dependency
    /// pushes the outcome branches onto `pending` instead.
    fn settle(
        &self,
        start: &[u8],
        mut s: Vec<u8>,
        weight: f64,
        pending: &mut Vec<(Vec<u8>, f64)>,
    ) -> Option<Outcome> {
        loop {
            self.evaluate_gates(start, &mut s);
            let mut changed = false;
            for (slot, &d) in self.layout.pdeps.iter().enumerate() {
                let kids = self.ft.children(d);
                if s[self.layout.fired(slot)] != 0 || s[kids[0].index()] != FAILED {
                    continue;
                }
                s[self.layout.fired(slot)] = 1;
                changed = true;
                let deps: Vec<NodeId> = kids[1..]
                    .iter()
                    .copied()
                    .filter(|c| s[c.index()] != FAILED)
                    .collect();
                let NodeType::Pdep(p) = self.ft.kind(d) else {
                    unreachable!()
                };
                if p >= 1.0 || deps.is_empty() {
                    for c in deps {
                        s[c.index()] = FAILED;
                    }
                    continue;
                }
                for mask in 0u64..1 << deps.len() {
                    let mut b = s.clone();
                    let mut w = weight;
                    for (j, c) in deps.iter().enumerate() {
                        if mask >> j & 1 == 1 {
                            b[c.index()] = FAILED;
                            w *= p;
                        } else {
                            w *= 1.0 - p;
                        }
                    }
                    pending.push((b, w));
                }
                return None;
            }
            changed |= self.claim(&mut s);
            if !changed {
                break;
            }
        }
        if !self.seq_ok(&s) {
            return Some(Outcome::Dropped);
        }
        self.activate(&mut s);
        Some(Outcome::Done(s, weight))
    }

    /// Successor states and rates for the failure of `be` in state `s`.
    fn fire(&self, s: &[u8], be: NodeId, rate: f64) -> Vec<(Vec<u8>, f64)> {
        let mut first = s.to_vec();
        first[be.index()] = FAILED;
        let mut pending = vec![(first, rate)];
        let mut out = Vec::new();
        while let Some((b, w)) = pending.pop() {
            if let Some(Outcome::Done(state, w)) = self.settle(s, b, w, &mut pending) {
                out.push((state, w));
            }
        }
        out
    }
}

/// Builds the chain of `ft` with the default state cap.
pub fn build_ctmc(ft: &FaultTree) -> Result<Ctmc, CtmcError> {
    build_ctmc_with_cap(ft, DEFAULT_STATE_CAP)
}

/// Breadth-first exploration from the all-operational state. Failed states
/// get no outgoing transitions; fail-safe states are explored normally.
pub fn build_ctmc_with_cap(ft: &FaultTree, cap: usize) -> Result<Ctmc, CtmcError> {
    let ex = Explorer::new(ft)?;
    let top = ft.top().index();
    let mut index: HashMap<Box<[u8]>, u32> = HashMap::new();
    let mut states: Vec<Box<[u8]>> = Vec::new();
    let init: Box<[u8]> = ex.initial()?.into_boxed_slice();
    index.insert(init.clone(), 0);
    states.push(init);
    let mut queue = VecDeque::from([0usize]);
    let mut rows: Vec<Vec<(u32, f64)>> = Vec::new();
    while let Some(i) = queue.pop_front() {
        let s = states[i].clone();
        let mut row: Vec<(u32, f64)> = Vec::new();
        if s[top] != FAILED {
            for &(b, active_rate, dormant_rate) in &ex.rates {
                if s[b.index()] == FAILED {
                    continue;
                }
                let rate = if s[ex.layout.active(b.index())] != 0 {
                    active_rate
                } else {
                    dormant_rate
                };
                if rate <= 0.0 {
                    continue;
                }
                for (succ, r) in ex.fire(&s, b, rate) {
                    let succ = succ.into_boxed_slice();
                    let j = match index.get(&succ) {
                        Some(&j) => j,
                        None => {
                            if states.len() >= cap {
                                return Err(CtmcError::StateCap { cap });
                            }
                            let j = states.len() as u32;
                            index.insert(succ.clone(), j);
                            states.push(succ);
                            queue.push_back(j as usize);
                            j
                        }
                    };
                    match row.iter_mut().find(|(t, _)| *t == j) {
                        Some(e) => e.1 += r,
                        None => row.push((j, r)),
                    }
                }
            }
        }
        if rows.len() <= i {
            rows.resize(i + 1, Vec::new());
        }
        rows[i] = row;
    }
    rows.resize(states.len(), Vec::new());
    let mut row_start = Vec::with_capacity(states.len() + 1);
    let mut targets = Vec::new();
    let mut rates = Vec::new();
    row_start.push(0);
    for row in rows {
        for (t, r) in row {
            targets.push(t);
            rates.push(r);
        }
        row_start.push(targets.len());
    }
    let failed = states.iter().map(|s| s[top] == FAILED).collect();
    Ok(Ctmc {
        tree: ft.clone(),
        layout: ex.layout,
        states,
        row_start,
        targets,
        rates,
        failed,
    })
}

/// Poisson(λ) weights from the first retained index, normalized over the
/// retained window. The dropped mass on each side is below `POISSON_TAIL`.
fn poisson_window(lambda: f64) -> (usize, Vec<f64>) {
    if lambda <= 0.0 {
        return (0, vec![1.0]);
    }
    let mode = lambda.floor() as usize;
    let mut left = Vec::new();
    let mut w = 1.0f64;
    let mut k = mode;
    while k > 0 {
        let r = k as f64 / lambda;
        if r < 1.0 && w * r / (1.0 - r) < POISSON_TAIL {
            break;
        }
        w *= r;
        k -= 1;
        left.push(w);
    }
    let first = k;
    let mut right = Vec::new();
    let mut w = 1.0f64;
    let mut k = mode;
    loop {
        let r = lambda / (k + 1) as f64;
        if r < 1.0 && w * r / (1.0 - r) < POISSON_TAIL {
            break;
        }
        w *= r;
        k += 1;
        right.push(w);
    }
    let mut weights: Vec<f64> = left.into_iter().rev().collect();
    weights.push(1.0);
    weights.extend(right);
    let total: f64 = weights.iter().sum();
    for w in &mut weights {
        *w /= total;
    }
    (first, weights)
}

/// Uniformized chain: `P = I + Q / Λ` with `Λ` the maximum exit rate.
struct Uniformized<'a> {
    ctmc: &'a Ctmc,
    lambda: f64,
    stay: Vec<f64>,
}

impl<'a> Uniformized<'a> {
    fn new(ctmc: &'a Ctmc) -> Self {
        let exits: Vec<f64> = (0..ctmc.state_count()).map(|i| ctmc.exit_rate(i)).collect();
        let lambda = exits.iter().copied().fold(0.0, f64::max);
        let stay = exits
            .iter()
            .map(|e| if lambda > 0.0 { 1.0 - e / lambda } else { 1.0 })
            .collect();
        Uniformized { ctmc, lambda, stay }
    }

    fn step(&self, pi: &[f64], next: &mut [f64]) {
        for (n, (p, s)) in next.iter_mut().zip(pi.iter().zip(&self.stay)) {
            *n = p * s;
        }
        for (i, &p) in pi.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            for (j, r) in self.ctmc.transitions(i) {
                next[j] += p * r / self.lambda;
            }
        }
    }
}

/// Probability of having reached a failed state by each time in `times`
/// (nonnegative, strictly increasing).
pub fn transient_failure_prob(ctmc: &Ctmc, times: &[f64]) -> Result<TimeCurve, CtmcError> {
    if times.is_empty() {
        return Err(CtmcError::EmptyTimes);
    }
    check_times(times)?;
    let u = Uniformized::new(ctmc);
    let windows: Vec<(usize, Vec<f64>)> = times.iter().map(|&t| poisson_window(u.lambda * t)).collect();
    let k_max = windows.iter().map(|(f, w)| f + w.len() - 1).max().unwrap_or(0);

    // Failed mass after k uniformized steps.
    let n = ctmc.state_count();
    let mut pi = vec![0.0; n];
    pi[0] = 1.0;
    let mut next = vec![0.0; n];
    let mut failed_mass = Vec::with_capacity(k_max + 1);
    let mass = |pi: &[f64]| -> f64 {
        pi.iter()
            .zip(&ctmc.failed)
            .filter(|(_, &f)| f)
            .map(|(p, _)| p)
            .sum()
    };
    failed_mass.push(mass(&pi));
    for _ in 0..k_max {
        u.step(&pi, &mut next);
        std::mem::swap(&mut pi, &mut next);
        failed_mass.push(mass(&pi));
    }

    let mut values = Vec::with_capacity(times.len());
    let mut prev = 0.0f64;
    for (first, weights) in windows {
        let v: f64 = weights
            .iter()
            .enumerate()
            .map(|(j, w)| w * failed_mass[first + j])
            .sum();
        // Truncation noise must not break monotonicity or leave [0, 1].
        let v = v.clamp(0.0, 1.0).max(prev);
        prev = v;
        values.push(v);
    }
    Ok(TimeCurve::new(times.to_vec(), values)?)
}

/// Full state distribution at time `t`.
pub fn transient_distribution(ctmc: &Ctmc, t: f64) -> Vec<f64> {
    let u = Uniformized::new(ctmc);
    let (first, weights) = poisson_window(u.lambda * t);
    let n = ctmc.state_count();
    let mut pi = vec![0.0; n];
    pi[0] = 1.0;
    let mut next = vec![0.0; n];
    let mut out = vec![0.0; n];
    for k in 0..first + weights.len() {
        if k >= first {
            let w = weights[k - first];
            for (o, p) in out.iter_mut().zip(&pi) {
                *o += w * p;
            }
        }
        u.step(&pi, &mut next);
        std::mem::swap(&mut pi, &mut next);
    }
    out
}
