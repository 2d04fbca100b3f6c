//! Random tree generators and brute-force oracles shared by the integration
//! tests and the acceptance runner.
#![allow(dead_code)]

use std::collections::BTreeSet;

use ftkit::model::{Distribution, FaultTree, NodeId, NodeType, SpareKind};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Coherent static tree over `n_bes` events. Gates combine 2-4 nodes from a
/// shrinking pool; some gates also pick up an already used node, which
/// creates shared sub-trees.
pub fn random_sft<R: Rng>(rng: &mut R, n_bes: usize) -> FaultTree {
    let mut b = FaultTree::builder();
    let mut pool: Vec<String> = (0..n_bes).map(|i| format!("e{i}")).collect();
    for name in &pool {
        b.add_basic_event(name, Distribution::exponential(rng.gen_range(0.1..2.0)));
    }
    let mut used: Vec<String> = Vec::new();
    let mut g = 0;
    while pool.len() > 1 || g == 0 {
        let k = rng.gen_range(2..=4).min(pool.len());
        pool.shuffle(rng);
        let mut kids: Vec<String> = pool.drain(..k).collect();
        if !used.is_empty() && rng.gen_bool(0.3) {
            let s = used.choose(rng).unwrap().clone();
            if !kids.contains(&s) {
                kids.push(s);
            }
        }
        let kind = match rng.gen_range(0..5) {
            0 | 1 => NodeType::And,
            2 | 3 => NodeType::Or,
            _ => NodeType::Vot(rng.gen_range(1..=kids.len())),
        };
        let name = format!("g{g}");
        g += 1;
        b.add_gate(&name, kind, kids.clone());
        used.extend(kids);
        pool.push(name);
    }
    b.set_top(&pool[0]);
    let ft = b.build().unwrap();
    assert!(ft.is_valid(), "{:?}", ft.validate());
    ft
}

/// Basic events of `ft` in declaration order with their names.
pub fn be_names(ft: &FaultTree) -> Vec<(NodeId, String)> {
    ft.basic_events().map(|b| (b, ft.name(b).to_string())).collect()
}

/// Minimal cut sets straight from the definition: failing assignments none
/// of whose proper subsets fail. Monotonicity makes it enough to check the
/// sets one smaller.
pub fn brute_force_mcs(ft: &FaultTree) -> BTreeSet<BTreeSet<String>> {
    let bes = be_names(ft);
    let n = bes.len();
    let fails = |bits: u64| {
        ft.evaluate_static(&|id: NodeId| {
            bes.iter()
                .position(|(b, _)| *b == id)
                .is_some_and(|i| bits >> i & 1 == 1)
        })
    };
    let mut out = BTreeSet::new();
    for bits in 0..1u64 << n {
        if !fails(bits) {
            continue;
        }
        let minimal = (0..n)
            .filter(|i| bits >> i & 1 == 1)
            .all(|i| !fails(bits & !(1 << i)));
        if minimal {
            out.insert(
                (0..n)
                    .filter(|i| bits >> i & 1 == 1)
                    .map(|i| bes[i].1.clone())
                    .collect(),
            );
        }
    }
    out
}

/// Sum of `Π p / Π (1 - p)` over all failing assignments; `probs` is indexed
/// like [`be_names`].
pub fn minterm_unreliability(ft: &FaultTree, probs: &[f64]) -> f64 {
    let bes = be_names(ft);
    let n = bes.len();
    let mut total = 0.0;
    for bits in 0..1u64 << n {
        let failed = ft.evaluate_static(&|id: NodeId| {
            bes.iter()
                .position(|(b, _)| *b == id)
                .is_some_and(|i| bits >> i & 1 == 1)
        });
        if failed {
            let mut w = 1.0;
            for (i, p) in probs.iter().enumerate() {
                w *= if bits >> i & 1 == 1 { *p } else { 1.0 - p };
            }
            total += w;
        }
    }
    total
}

pub fn exp_prob(ft: &FaultTree, id: NodeId, t: f64) -> f64 {
    ft.node(id).distribution().unwrap().probability_at(t).unwrap()
}

struct DftGen<'r, R: Rng> {
    rng: &'r mut R,
    b: ftkit::model::FaultTreeBuilder,
    next: usize,
    bes: usize,
}

impl<R: Rng> DftGen<'_, R> {
    fn fresh(&mut self) -> String {
        self.next += 1;
        format!("n{}", self.next)
    }

    fn be(&mut self) -> String {
        let name = self.fresh();
        let rate = self.rng.gen_range(0.2..2.0);
        self.b.add_basic_event(&name, Distribution::exponential(rate));
        self.bes += 1;
        name
    }

    fn dormant_be(&mut self) -> String {
        let name = self.fresh();
        let rate = self.rng.gen_range(0.2..2.0);
        let dormancy = *[0.0, 0.3, 1.0].choose(self.rng).unwrap();
        self.b
            .add_basic_event(&name, Distribution::Exponential { rate, dormancy });
        self.bes += 1;
        name
    }

    fn gate(&mut self, kind: NodeType, kids: Vec<String>) -> String {
        let name = self.fresh();
        self.b.add_gate(&name, kind, kids);
        name
    }

    fn static_kind(&mut self, n: usize) -> NodeType {
        match self.rng.gen_range(0..3) {
            0 => NodeType::And,
            1 => NodeType::Or,
            _ => NodeType::Vot(self.rng.gen_range(1..=n)),
        }
    }

    /// One self-contained component; returns its root and whether it is
    /// dynamic.
    fn component(&mut self, dynamic: bool) -> (String, Vec<String>) {
        if !dynamic {
            let n = self.rng.gen_range(2..=3);
            let kids: Vec<String> = (0..n).map(|_| self.be()).collect();
            let kind = self.static_kind(n);
            return (self.gate(kind, kids.clone()), kids);
        }
        let root = match self.rng.gen_range(0..6) {
            0 => {
                let n = self.rng.gen_range(2..=3);
                let mut kids = Vec::new();
                for _ in 0..n {
                    if self.rng.gen_bool(0.3) {
                        let a = self.be();
                        let b = self.be();
                        kids.push(self.gate(NodeType::Or, vec![a, b]));
                    } else {
                        kids.push(self.be());
                    }
                }
                self.gate(NodeType::Pand, kids)
            }
            1 => {
                let n = self.rng.gen_range(2..=3);
                let kids = (0..n).map(|_| self.be()).collect();
                self.gate(NodeType::Por, kids)
            }
            2 => {
                let primary = self.be();
                let n = self.rng.gen_range(1..=2);
                let mut kids = vec![primary];
                for _ in 0..n {
                    kids.push(self.dormant_be());
                }
                self.gate(NodeType::Spare(SpareKind::Warm), kids)
            }
            3 => {
                let a = self.be();
                let b = self.be();
                let s = self.dormant_be();
                let s1 = self.gate(NodeType::Spare(SpareKind::Warm), vec![a, s.clone()]);
                let s2 = self.gate(NodeType::Spare(SpareKind::Warm), vec![b, s]);
                let kind = if self.rng.gen_bool(0.5) {
                    NodeType::And
                } else {
                    NodeType::Or
                };
                self.gate(kind, vec![s1, s2])
            }
            4 => {
                let n = self.rng.gen_range(2..=3);
                let kids: Vec<String> = (0..n).map(|_| self.be()).collect();
                self.gate(NodeType::Seq, kids.clone());
                let kind = self.static_kind(n);
                self.gate(kind, kids)
            }
            _ => {
                let a = self.be();
                let b = self.be();
                let t = self.be();
                let p = *[1.0, 0.5].choose(self.rng).unwrap();
                self.gate(NodeType::Pdep(p), vec![t, a.clone()]);
                let kind = if self.rng.gen_bool(0.5) {
                    NodeType::And
                } else {
                    NodeType::Or
                };
                self.gate(kind, vec![a, b])
            }
        };
        (root, Vec::new())
    }
}

/// Random dynamic tree with at most `max_bes` events: 2-4 independent
/// components (at least one dynamic) joined by static gates; static
/// components may share events with the joining gates.
pub fn random_dft<R: Rng>(rng: &mut R, max_bes: usize) -> FaultTree {
    loop {
        let mut g = DftGen {
            rng: &mut *rng,
            b: FaultTree::builder(),
            next: 0,
            bes: 0,
        };
        let count = g.rng.gen_range(2..=4);
        let mut roots = Vec::new();
        let mut shareable = Vec::new();
        for i in 0..count {
            let dynamic = i == 0 || g.rng.gen_bool(0.5);
            let (root, bes) = g.component(dynamic);
            roots.push(root);
            shareable.extend(bes);
        }
        while roots.len() > 1 {
            let k = g.rng.gen_range(2..=3).min(roots.len());
            roots.shuffle(g.rng);
            let mut kids: Vec<String> = roots.drain(..k).collect();
            if !shareable.is_empty() && g.rng.gen_bool(0.4) {
                let s = shareable.choose(g.rng).unwrap().clone();
                if !kids.contains(&s) {
                    kids.push(s);
                }
            }
            let n = kids.len();
            let kind = g.static_kind(n);
            let name = g.gate(kind, kids);
            roots.push(name);
        }
        if g.bes > max_bes {
            continue;
        }
        g.b.set_top(&roots[0]);
        let ft = g.b.build().unwrap();
        assert!(ft.is_valid(), "{:?}", ft.validate());
        return ft;
    }
}

/// Event-driven simulation of a dynamic tree. Gate failure times are derived
/// from the failure times of their children; `SPARE` claiming, `PDEP` firing
/// and activation are replayed after every basic event failure. Returns the
/// failure time of the top event per sample (infinite if it did not fail
/// before `horizon`).
pub struct Simulator<'a> {
    ft: &'a FaultTree,
    topo: Vec<NodeId>,
    parents: Vec<Vec<NodeId>>,
    spares: Vec<NodeId>,
    pdeps: Vec<(NodeId, f64)>,
    seqs: Vec<NodeId>,
    /// (id, active rate, dormant rate)
    bes: Vec<(NodeId, f64, f64)>,
}

#[derive(Clone)]
struct SimState {
    time: Vec<f64>,
    uses: Vec<usize>,
    fired: Vec<bool>,
    active: Vec<bool>,
}

impl<'a> Simulator<'a> {
    pub fn new(ft: &'a FaultTree) -> Self {
        let topo = ft.topological_order();
        let mut parents = vec![Vec::new(); ft.len()];
        for v in ft.ids() {
            if ft.kind(v).is_constraint() {
                continue;
            }
            for &c in ft.children(v) {
                parents[c.index()].push(v);
            }
        }
        let bes = ft
            .basic_events()
            .map(|b| match ft.node(b).distribution() {
                Some(Distribution::Exponential { rate, dormancy }) => (b, *rate, rate * dormancy),
                _ => panic!("simulation needs exponential events"),
            })
            .collect();
        Simulator {
            ft,
            topo,
            parents,
            spares: ft
                .ids()
                .filter(|&v| matches!(ft.kind(v), NodeType::Spare(_)))
                .collect(),
            pdeps: ft
                .ids()
                .filter_map(|v| match ft.kind(v) {
                    NodeType::Pdep(p) => Some((v, p)),
                    _ => None,
                })
                .collect(),
            seqs: ft.ids().filter(|&v| ft.kind(v) == NodeType::Seq).collect(),
            bes,
        }
    }

    fn kids(&self, v: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        self.ft
            .children(v)
            .iter()
            .copied()
            .filter(|&c| !self.ft.kind(c).is_constraint())
    }

    /// Failure time of every non-spare gate from its children's times.
    fn gates(&self, st: &mut SimState) {
        for &v in &self.topo {
            let t: Vec<f64> = self.kids(v).map(|c| st.time[c.index()]).collect();
            let value = match self.ft.kind(v) {
                NodeType::And => t.iter().copied().fold(0.0, f64::max),
                NodeType::Or => t.iter().copied().fold(f64::INFINITY, f64::min),
                NodeType::Vot(k) => {
                    let mut s = t.clone();
                    s.sort_by(f64::total_cmp);
                    s[k - 1]
                }
                NodeType::Pand => {
                    if t.windows(2).all(|w| w[0] <= w[1]) {
                        t[t.len() - 1]
                    } else {
                        f64::INFINITY
                    }
                }
                NodeType::Por => {
                    if t[1..].iter().all(|&x| x >= t[0]) {
                        t[0]
                    } else {
                        f64::INFINITY
                    }
                }
                _ => continue,
            };
            st.time[v.index()] = value;
        }
    }

    fn activate(&self, st: &mut SimState) {
        for &v in self.topo.iter().rev() {
            let i = v.index();
            if st.active[i] {
                continue;
            }
            let ps = &self.parents[i];
            st.active[i] = v == self.ft.top()
                || ps.is_empty()
                || ps.iter().any(|&p| {
                    st.active[p.index()]
                        && match self.spares.iter().position(|&s| s == p) {
                            Some(slot) => self.ft.children(p)[st.uses[slot]] == v,
                            None => true,
                        }
                });
        }
    }

    fn initial(&self) -> SimState {
        let mut st = SimState {
            time: vec![f64::INFINITY; self.ft.len()],
            uses: vec![0; self.spares.len()],
            fired: vec![false; self.pdeps.len()],
            active: vec![false; self.ft.len()],
        };
        self.activate(&mut st);
        st
    }

    /// Applies the failure of `be` at `now`; returns false if a sequence
    /// constraint forbids the outcome.
    fn apply<R: Rng>(&self, st: &mut SimState, be: NodeId, now: f64, rng: &mut R) -> bool {
        st.time[be.index()] = now;
        loop {
            self.gates(st);
            let mut changed = false;
            for (slot, &(d, p)) in self.pdeps.iter().enumerate() {
                let kids = self.ft.children(d);
                if st.fired[slot] || st.time[kids[0].index()] > now {
                    continue;
                }
                st.fired[slot] = true;
                changed = true;
                for &c in &kids[1..] {
                    if st.time[c.index()].is_infinite() && (p >= 1.0 || rng.gen_bool(p)) {
                        st.time[c.index()] = now;
                    }
                }
            }
            for (slot, &sp) in self.spares.iter().enumerate() {
                let kids = self.ft.children(sp);
                if st.time[sp.index()] <= now || st.time[kids[st.uses[slot]].index()] > now {
                    continue;
                }
                let free = kids.iter().position(|&c| {
                    st.time[c.index()] > now
                        && !self
                            .spares
                            .iter()
                            .enumerate()
                            .any(|(o, &s2)| o != slot && self.ft.children(s2)[st.uses[o]] == c)
                });
                match free {
                    Some(j) => st.uses[slot] = j,
                    None => st.time[sp.index()] = now,
                }
                changed = true;
            }
            if !changed {
                break;
            }
        }
        for &q in &self.seqs {
            let kids = self.ft.children(q);
            let failed: Vec<bool> = kids.iter().map(|c| st.time[c.index()] <= now).collect();
            if failed.windows(2).any(|w| !w[0] && w[1]) {
                return false;
            }
        }
        self.activate(st);
        true
    }

    /// One sample; the top event's failure time or infinity.
    pub fn sample<R: Rng>(&self, horizon: f64, rng: &mut R) -> f64 {
        let mut st = self.initial();
        let top = self.ft.top().index();
        let mut now = 0.0;
        let mut rates = vec![0.0; self.bes.len()];
        loop {
            let mut total = 0.0;
            for (i, &(b, a, d)) in self.bes.iter().enumerate() {
                rates[i] = if st.time[b.index()].is_finite() {
                    0.0
                } else if st.active[b.index()] {
                    a
                } else {
                    d
                };
                total += rates[i];
            }
            if total == 0.0 {
                return f64::INFINITY;
            }
            let u: f64 = rng.gen();
            now += -(1.0 - u).ln() / total;
            if now > horizon {
                return f64::INFINITY;
            }
            let mut pick = rng.gen::<f64>() * total;
            let mut chosen = self.bes.len() - 1;
            for (i, r) in rates.iter().enumerate() {
                if pick < *r {
                    chosen = i;
                    break;
                }
                pick -= r;
            }
            let before = st.clone();
            if !self.apply(&mut st, self.bes[chosen].0, now, rng) {
                st = before;
                continue;
            }
            if st.time[top] <= now {
                return now;
            }
        }
    }

    /// Fraction of `samples` runs failing by each of `times`.
    pub fn estimate(&self, times: &[f64], samples: usize, seed: u64) -> Vec<f64> {
        let horizon = times.iter().copied().fold(0.0, f64::max);
        let mut rng = rng(seed);
        let mut counts = vec![0usize; times.len()];
        for _ in 0..samples {
            let t = self.sample(horizon, &mut rng);
            for (c, &q) in counts.iter_mut().zip(times) {
                if t <= q {
                    *c += 1;
                }
            }
        }
        counts.iter().map(|&c| c as f64 / samples as f64).collect()
    }
}

/// Three-event fixtures, one per dynamic construct.
pub fn dynamic_fixtures() -> Vec<(&'static str, FaultTree)> {
    let exp = Distribution::exponential;
    let warm = |rate: f64, dormancy: f64| Distribution::Exponential { rate, dormancy };
    let mut out = Vec::new();
    out.push((
        "pand",
        FaultTree::builder()
            .gate("T", NodeType::Pand, &["a", "b", "c"])
            .basic_event("a", exp(1.5))
            .basic_event("b", exp(1.0))
            .basic_event("c", exp(0.7))
            .top("T")
            .build()
            .unwrap(),
    ));
    out.push((
        "por",
        FaultTree::builder()
            .gate("T", NodeType::Por, &["a", "b", "c"])
            .basic_event("a", exp(1.0))
            .basic_event("b", exp(0.5))
            .basic_event("c", exp(0.8))
            .top("T")
            .build()
            .unwrap(),
    ));
    out.push((
        "spare",
        FaultTree::builder()
            .gate("T", NodeType::Spare(SpareKind::Warm), &["a", "b", "c"])
            .basic_event("a", exp(1.0))
            .basic_event("b", warm(0.8, 0.3))
            .basic_event("c", warm(1.2, 0.0))
            .top("T")
            .build()
            .unwrap(),
    ));
    out.push((
        "shared spare",
        FaultTree::builder()
            .gate("T", NodeType::Or, &["S1", "S2"])
            .gate("S1", NodeType::Spare(SpareKind::Warm), &["a", "s"])
            .gate("S2", NodeType::Spare(SpareKind::Warm), &["b", "s"])
            .basic_event("a", exp(0.9))
            .basic_event("b", exp(0.6))
            .basic_event("s", warm(1.1, 0.5))
            .top("T")
            .build()
            .unwrap(),
    ));
    out.push((
        "pdep",
        FaultTree::builder()
            .gate("T", NodeType::And, &["a", "b"])
            .gate("D", NodeType::Pdep(0.6), &["t", "a", "b"])
            .basic_event("a", exp(0.4))
            .basic_event("b", exp(0.7))
            .basic_event("t", exp(1.0))
            .top("T")
            .build()
            .unwrap(),
    ));
    out.push((
        "seq",
        FaultTree::builder()
            .gate("T", NodeType::Vot(2), &["a", "b", "c"])
            .gate("Q", NodeType::Seq, &["a", "b", "c"])
            .basic_event("a", exp(1.0))
            .basic_event("b", exp(2.0))
            .basic_event("c", exp(1.5))
            .top("T")
            .build()
            .unwrap(),
    ));
    out
}
