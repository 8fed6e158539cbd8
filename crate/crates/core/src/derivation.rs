//! Derivation trees for ELRO_u (six rules) and ELIO_u (four rules), lifting to unfoldings
//! and support ABoxes.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::cell::RefCell;
use std::rc::Rc;
use std::sync::Arc;

use serde_json::{json, Value};

use crate::el_engine::{Atom, Child, DirectedUnfolding, Origin, Saturation, Tbox, Word};
use crate::eli_engine::{EliElem, EliJust, EliOracle, EliSaturation, Fact, Prem, UChild, UWord, UndirectedUnfolding};
use crate::types::*;
use crate::{Error, Result};

/// Elements of derivation-tree labels: ABox individuals or canonical concept/nominal nodes.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DElem<I> {
    Ind(I),
    Node(Atom),
}

impl<I> DElem<I> {
    pub fn ind(&self) -> Option<&I> {
        match self {
            DElem::Ind(i) => Some(i),
            DElem::Node(_) => None,
        }
    }
}

/// How consecutive chain elements `a_{2i+1}, a_{2i+2}` are identified.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Link {
    Same,
    Nominal(Sym),
}

/// Justification of a chain edge: an ABox assertion or a fact plus a TBox consequence.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Hat {
    Abox,
    Fact(Atom),
}

/// Side data of the RI rule. `links[i]` joins `elems[2i]` and `elems[2i+1]`, `hats[i]` is the
/// `roles[i]`-edge from `elems[2i+1]` to `elems[2i+2]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Chain<I> {
    pub role: Sym,
    pub filler: Atom,
    pub elems: Vec<DElem<I>>,
    pub roles: Vec<Sym>,
    pub hats: Vec<Hat>,
    pub links: Vec<Link>,
}

impl<I> Chain<I> {
    pub fn last(&self) -> &DElem<I> {
        self.elems.last().expect("chains are nonempty")
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ElRule<I> {
    Base,
    NonEmpty,
    Reach,
    Conj,
    Nominal(Sym),
    Chain(Chain<I>),
    Universal,
}

impl<I> ElRule<I> {
    pub fn name(&self) -> &'static str {
        match self {
            ElRule::Base => "base",
            ElRule::NonEmpty => "nonempty",
            ElRule::Reach => "reach",
            ElRule::Conj => "conj",
            ElRule::Nominal(_) => "nominal",
            ElRule::Chain(_) => "chain",
            ElRule::Universal => "universal",
        }
    }
}

#[derive(Clone, Debug)]
pub struct Tree<E, C, R> {
    pub elem: E,
    pub concept: C,
    pub rule: R,
    pub children: Vec<Rc<Tree<E, C, R>>>,
}

pub type ElTree<I> = Tree<DElem<I>, Atom, ElRule<I>>;

impl<E: Clone + Ord, C: Clone + Ord, R> Tree<E, C, R> {
    pub fn depth(&self) -> usize {
        let mut memo = HashMap::new();
        depth_memo(self, &mut memo)
    }

    /// Node count of the unshared tree (saturating).
    pub fn size(&self) -> usize {
        let mut memo = HashMap::new();
        size_memo(self, &mut memo)
    }

    pub fn max_outdegree(&self) -> usize {
        let mut best = 0;
        self.walk(&mut |n| best = best.max(n.children.len()));
        best
    }

    /// Visits every distinct shared node once.
    pub fn walk(&self, f: &mut impl FnMut(&Tree<E, C, R>)) {
        let mut seen = std::collections::HashSet::new();
        let mut stack: Vec<&Tree<E, C, R>> = vec![self];
        while let Some(n) = stack.pop() {
            if !seen.insert(n as *const _) {
                continue;
            }
            f(n);
            for c in &n.children {
                stack.push(c);
            }
        }
    }

    pub fn labels(&self) -> BTreeSet<(E, C)> {
        let mut out = BTreeSet::new();
        self.walk(&mut |n| {
            out.insert((n.elem.clone(), n.concept.clone()));
        });
        out
    }

    pub fn to_json(&self, show_e: &dyn Fn(&E) -> String, show_c: &dyn Fn(&C) -> String, rule: &dyn Fn(&R) -> Value) -> Value {
        json!({
            "elem": show_e(&self.elem),
            "concept": show_c(&self.concept),
            "rule": rule(&self.rule),
            "children": self.children.iter().map(|c| c.to_json(show_e, show_c, rule)).collect::<Vec<_>>(),
        })
    }

    pub fn to_dot(&self, show_e: &dyn Fn(&E) -> String, show_c: &dyn Fn(&C) -> String, rule: &dyn Fn(&R) -> String) -> String {
        let mut ids: HashMap<*const Tree<E, C, R>, usize> = HashMap::new();
        let mut out = String::from("digraph derivation {\n  node [shape=box];\n");
        let mut stack: Vec<&Tree<E, C, R>> = vec![self];
        let mut edges = vec![];
        while let Some(n) = stack.pop() {
            let k = n as *const _;
            if ids.contains_key(&k) {
                continue;
            }
            let id = ids.len();
            ids.insert(k, id);
            let lbl = format!("({}, {})\\n{}", show_e(&n.elem), show_c(&n.concept), rule(&n.rule)).replace('"', "\\\"");
            out += &format!("  n{id} [label=\"{lbl}\"];\n");
            for c in &n.children {
                edges.push((k, Rc::as_ptr(c)));
                stack.push(c);
            }
        }
        for (a, b) in edges {
            out += &format!("  n{} -> n{};\n", ids[&a], ids[&b]);
        }
        out.push_str("}\n");
        out
    }
}

fn depth_memo<E, C, R>(t: &Tree<E, C, R>, memo: &mut HashMap<*const Tree<E, C, R>, usize>) -> usize {
    if let Some(d) = memo.get(&(t as *const _)) {
        return *d;
    }
    let d = t.children.iter().map(|c| 1 + depth_memo(c, memo)).max().unwrap_or(0);
    memo.insert(t as *const _, d);
    d
}

fn size_memo<E, C, R>(t: &Tree<E, C, R>, memo: &mut HashMap<*const Tree<E, C, R>, usize>) -> usize {
    if let Some(d) = memo.get(&(t as *const _)) {
        return *d;
    }
    let d = t.children.iter().fold(1usize, |acc, c| acc.saturating_add(size_memo(c, memo)));
    memo.insert(t as *const _, d);
    d
}

/// Tree-construction limits.
#[derive(Clone, Debug)]
pub struct DerivationConfig {
    /// Maximal number of edges in an expanded RI chain.
    pub max_chain: usize,
    /// Maximal number of nodes created while lifting.
    pub max_lift_nodes: usize,
}

impl Default for DerivationConfig {
    fn default() -> Self {
        DerivationConfig { max_chain: 1 << 16, max_lift_nodes: 1 << 22 }
    }
}

fn query_abox(atoms: &[&Atom]) -> (ABox, Var) {
    let mut ab = ABox::new();
    let x = ab.fresh();
    ab.add_top(x);
    for a in atoms {
        match a {
            Atom::Top => {}
            Atom::Name(n) => ab.add_concept(n, x),
            Atom::Nom(n) => ab.add_nominal(n, x),
        }
    }
    (ab, x)
}

fn origin_atom(o: &Origin) -> Option<Atom> {
    match o {
        Origin::Concept(a) => Some(Atom::Name(a.clone())),
        Origin::Nominal(a) => Some(Atom::Nom(a.clone())),
        Origin::Top => Some(Atom::Top),
        Origin::Var(_) => None,
    }
}

/// Memoized TBox consequences used by the EL rules, each answered by a small saturation.
pub struct ElOracle {
    pub tbox: Arc<Tbox>,
    conj: HashMap<(Atom, Atom), Rc<BTreeSet<Atom>>>,
    reach: HashMap<Atom, Rc<BTreeSet<Sym>>>,
    succ: HashMap<Atom, Rc<Vec<(Sym, Atom)>>>,
    ex_left: HashMap<(Sym, Atom), Rc<BTreeSet<Atom>>>,
    univ: HashMap<Atom, Rc<BTreeSet<Atom>>>,
}

impl ElOracle {
    pub fn new(tbox: Arc<Tbox>) -> Self {
        ElOracle {
            tbox,
            conj: HashMap::new(),
            reach: HashMap::new(),
            succ: HashMap::new(),
            ex_left: HashMap::new(),
            univ: HashMap::new(),
        }
    }

    fn run(&self, abox: &ABox) -> Saturation {
        Saturation::run(&self.tbox, abox, &[])
    }

    fn everything(&self) -> BTreeSet<Atom> {
        let sig = signature_of(&self.tbox.ontology);
        let mut s: BTreeSet<Atom> = sig.concepts.into_iter().map(Atom::Name).collect();
        s.extend(sig.individuals.into_iter().map(Atom::Nom));
        s.insert(Atom::Top);
        s
    }

    /// Atoms `C` with `O ⊨ C1 ⊓ C2 ⊑ C`.
    pub fn conj(&mut self, c1: &Atom, c2: &Atom) -> Rc<BTreeSet<Atom>> {
        let key = if c1 <= c2 { (c1.clone(), c2.clone()) } else { (c2.clone(), c1.clone()) };
        if let Some(r) = self.conj.get(&key) {
            return r.clone();
        }
        let (ab, x) = query_abox(&[c1, c2]);
        let s = self.run(&ab);
        let out = if s.inconsistent() { self.everything() } else { s.atoms_at(&Origin::Var(x)) };
        let out = Rc::new(out);
        self.conj.insert(key, out.clone());
        out
    }

    /// Concept names `A` with `O ⊨ C ⊑ ∃u.A`.
    pub fn reach(&mut self, c: &Atom) -> Rc<BTreeSet<Sym>> {
        if let Some(r) = self.reach.get(c) {
            return r.clone();
        }
        let (ab, x) = query_abox(&[c]);
        let s = self.run(&ab);
        let mut out = s.realized();
        out.extend(s.atoms_at(&Origin::Var(x)).into_iter().filter_map(|a| match a {
            Atom::Name(n) => Some(n),
            _ => None,
        }));
        let out = Rc::new(out);
        self.reach.insert(c.clone(), out.clone());
        out
    }

    /// Pairs `(r, D)` with `O ⊨ C ⊑ ∃r.D`, `D` an atom.
    pub fn succ(&mut self, c: &Atom) -> Rc<Vec<(Sym, Atom)>> {
        if let Some(r) = self.succ.get(c) {
            return r.clone();
        }
        let (ab, x) = query_abox(&[c]);
        let s = self.run(&ab);
        let mut out = BTreeSet::new();
        for (r, members) in s.successors(&Origin::Var(x)) {
            if let Some(m) = members.iter().next() {
                for a in s.atoms_at(m) {
                    out.insert((r.clone(), a));
                }
            }
            for m in &members {
                if let Some(a) = origin_atom(m) {
                    out.insert((r.clone(), a));
                }
            }
        }
        let out = Rc::new(out.into_iter().collect::<Vec<_>>());
        self.succ.insert(c.clone(), out.clone());
        out
    }

    /// Atoms `X` with `O ⊨ ∃r.C ⊑ X`.
    pub fn ex_left(&mut self, r: &Sym, c: &Atom) -> Rc<BTreeSet<Atom>> {
        let key = (r.clone(), c.clone());
        if let Some(v) = self.ex_left.get(&key) {
            return v.clone();
        }
        let (mut ab, y) = query_abox(&[c]);
        let x = ab.fresh();
        ab.add_top(x);
        ab.add_role(r, x, y);
        let s = self.run(&ab);
        let out = if s.inconsistent() { self.everything() } else { s.atoms_at(&Origin::Var(x)) };
        let out = Rc::new(out);
        self.ex_left.insert(key, out.clone());
        out
    }

    /// Atoms `X` with `O ⊨ ∃u.C ⊑ X`.
    pub fn univ(&mut self, c: &Atom) -> Rc<BTreeSet<Atom>> {
        if let Some(v) = self.univ.get(c) {
            return v.clone();
        }
        let (mut ab, _) = query_abox(&[c]);
        let x = ab.fresh();
        ab.add_top(x);
        let s = self.run(&ab);
        let out = if s.inconsistent() { self.everything() } else { s.atoms_at(&Origin::Var(x)) };
        let out = Rc::new(out);
        self.univ.insert(c.clone(), out.clone());
        out
    }
}

#[derive(Clone, Debug)]
enum Prov {
    Step { link: Link, a2: usize, hat: Hat },
    Sub(Sym),
    Comp(Sym, Sym, usize),
}

struct Step {
    a1: usize,
    link: Link,
    a2: usize,
    role: Sym,
    hat: Hat,
    a3: usize,
}

type Key = (usize, Atom);

/// The layered fixpoint `F_0 ⊆ F_1 ⊆ …` over `Δ × Θ`, each fact with its first justification.
pub struct ElDerivations {
    pub oracle: ElOracle,
    pub elems: Vec<DElem<Var>>,
    elem_ix: HashMap<DElem<Var>, usize>,
    facts: BTreeMap<Key, Rc<ElTree<Var>>>,
    at: Vec<BTreeSet<Atom>>,
    theta: BTreeSet<Atom>,
    abox: ABox,
    pub rounds: usize,
    pub depth_bound: usize,
    config: DerivationConfig,
}

/// A candidate justification, turned into a tree node once the fact is new.
enum Just {
    Simple(ElRule<Var>, Vec<Key>),
    Chain { role: Sym, filler: Atom, path: Vec<Step>, last: usize, last_link: Link },
}

impl ElDerivations {
    pub fn new(o: &Ontology, abox: &ABox, config: DerivationConfig) -> Result<ElDerivations> {
        let tbox = Tbox::compile(o)?;
        let sig = signature_of(&tbox.ontology);
        let mut d = ElDerivations {
            oracle: ElOracle::new(tbox),
            elems: vec![],
            elem_ix: HashMap::new(),
            facts: BTreeMap::new(),
            at: vec![],
            theta: BTreeSet::new(),
            abox: abox.clone(),
            rounds: 0,
            depth_bound: 0,
            config,
        };
        let asig = signature_of(abox);
        d.theta.insert(Atom::Top);
        for a in sig.concepts.iter().chain(&asig.concepts) {
            d.theta.insert(Atom::Name(a.clone()));
        }
        for a in sig.individuals.iter().chain(&asig.individuals) {
            d.theta.insert(Atom::Nom(a.clone()));
        }
        for x in abox.vars() {
            d.elem(DElem::Ind(x));
        }
        for a in d.theta.clone() {
            d.elem(DElem::Node(a));
        }
        let norm = abox.len() + abox.vars().len() + tbox_size(&d.oracle.tbox.ontology);
        d.depth_bound = norm * tbox_size(&d.oracle.tbox.ontology).max(1);
        d.saturate()?;
        Ok(d)
    }

    fn elem(&mut self, e: DElem<Var>) -> usize {
        if let Some(i) = self.elem_ix.get(&e) {
            return *i;
        }
        self.elems.push(e.clone());
        self.elem_ix.insert(e, self.elems.len() - 1);
        self.at.push(BTreeSet::new());
        self.elems.len() - 1
    }

    fn add(&mut self, k: Key, rule: ElRule<Var>, children: Vec<Rc<ElTree<Var>>>) {
        let t = Tree { elem: self.elems[k.0].clone(), concept: k.1.clone(), rule, children };
        self.at[k.0].insert(k.1.clone());
        self.facts.insert(k, Rc::new(t));
    }

    fn has(&self, e: usize, a: &Atom) -> bool {
        self.at[e].contains(a)
    }

    fn exists(&self, e: usize) -> bool {
        matches!(self.elems[e], DElem::Ind(_)) || !self.at[e].is_empty()
    }

    fn saturate(&mut self) -> Result<()> {
        for e in 0..self.elems.len() {
            match self.elems[e].clone() {
                DElem::Ind(x) => {
                    self.add((e, Atom::Top), ElRule::Base, vec![]);
                    for c in self.abox.concepts_at(x) {
                        self.add((e, Atom::Name(c)), ElRule::Base, vec![]);
                    }
                    for c in self.abox.nominals_at(x) {
                        self.add((e, Atom::Nom(c)), ElRule::Base, vec![]);
                    }
                }
                DElem::Node(Atom::Nom(a)) => self.add((e, Atom::Nom(a)), ElRule::Base, vec![]),
                DElem::Node(Atom::Top) => self.add((e, Atom::Top), ElRule::Base, vec![]),
                DElem::Node(Atom::Name(_)) => {}
            }
        }
        loop {
            let new = self.round()?;
            if new.is_empty() {
                break;
            }
            self.rounds += 1;
            for (k, j) in new {
                self.realize(k, j)?;
            }
        }
        assert!(self.rounds <= self.depth_bound.max(1), "derivation depth bound exceeded");
        Ok(())
    }

    fn realize(&mut self, k: Key, j: Just) -> Result<()> {
        match j {
            Just::Simple(rule, prem) => {
                let ch = prem.iter().map(|p| self.facts[p].clone()).collect();
                self.add(k, rule, ch);
            }
            Just::Chain { role, filler, path, last, last_link } => {
                let mut elems = vec![];
                let mut roles = vec![];
                let mut hats = vec![];
                let mut links = vec![];
                for s in &path {
                    elems.push(self.elems[s.a1].clone());
                    elems.push(self.elems[s.a2].clone());
                    links.push(s.link.clone());
                    roles.push(s.role.clone());
                    hats.push(s.hat.clone());
                }
                elems.push(self.elems[path.last().unwrap().a3].clone());
                elems.push(self.elems[last].clone());
                links.push(last_link);
                let chain = Chain { role, filler, elems, roles, hats, links };
                let prem = chain_premises(&chain, &|e: &DElem<Var>| e.clone());
                let ch = prem
                    .iter()
                    .map(|(e, a)| self.facts[&(self.elem_ix[e], a.clone())].clone())
                    .collect();
                self.add(k, ElRule::Chain(chain), ch);
            }
        }
        Ok(())
    }

    fn holders(&self) -> BTreeMap<Sym, Vec<usize>> {
        let mut h: BTreeMap<Sym, Vec<usize>> = BTreeMap::new();
        for ((e, a), _) in &self.facts {
            if let Atom::Nom(c) = a {
                h.entry(c.clone()).or_default().push(*e);
            }
        }
        h
    }

    fn round(&mut self) -> Result<BTreeMap<Key, Just>> {
        let mut new: BTreeMap<Key, Just> = BTreeMap::new();
        let facts: Vec<Key> = self.facts.keys().cloned().collect();
        let offer = |new: &mut BTreeMap<Key, Just>, at: &Vec<BTreeSet<Atom>>, k: Key, j: Just| {
            if !at[k.0].contains(&k.1) && !new.contains_key(&k) {
                new.insert(k, j);
            }
        };
        // 1 and 2: nonemptiness of concept names.
        for (e, c) in &facts {
            if let Atom::Name(a) = c {
                let n = self.elem_ix[&DElem::Node(c.clone())];
                let _ = a;
                offer(&mut new, &self.at, (n, c.clone()), Just::Simple(ElRule::NonEmpty, vec![(*e, c.clone())]));
            }
        }
        for (e, c) in &facts {
            for a in self.oracle.reach(c).iter() {
                let at = Atom::Name(a.clone());
                if let Some(&n) = self.elem_ix.get(&DElem::Node(at.clone())) {
                    offer(&mut new, &self.at, (n, at), Just::Simple(ElRule::Reach, vec![(*e, c.clone())]));
                }
            }
        }
        // 3: conjunction.
        for e in 0..self.elems.len() {
            let here: Vec<Atom> = self.at[e].iter().cloned().collect();
            for (i, c1) in here.iter().enumerate() {
                for c2 in &here[i..] {
                    for c in self.oracle.conj(c1, c2).iter() {
                        if !self.theta.contains(c) {
                            continue;
                        }
                        let prem = if c1 == c2 { vec![(e, c1.clone())] } else { vec![(e, c1.clone()), (e, c2.clone())] };
                        offer(&mut new, &self.at, (e, c.clone()), Just::Simple(ElRule::Conj, prem));
                    }
                }
            }
        }
        // 4: nominal transfer.
        let holders = self.holders();
        for (c, hs) in &holders {
            let nom = Atom::Nom(c.clone());
            for &a in hs {
                for &b in hs {
                    if a == b {
                        continue;
                    }
                    for x in self.at[b].clone() {
                        let prem = vec![(b, x.clone()), (a, nom.clone()), (b, nom.clone())];
                        offer(&mut new, &self.at, (a, x), Just::Simple(ElRule::Nominal(c.clone()), prem));
                    }
                }
            }
        }
        // 5: role inclusions.
        for (k, j) in self.chain_candidates(&holders)? {
            offer(&mut new, &self.at, k, j);
        }
        // 6: universal role.
        for (b, c) in &facts {
            let out = self.oracle.univ(c);
            if out.is_empty() {
                continue;
            }
            for a in 0..self.elems.len() {
                if !self.exists(a) {
                    continue;
                }
                for x in out.iter() {
                    if self.theta.contains(x) {
                        offer(&mut new, &self.at, (a, x.clone()), Just::Simple(ElRule::Universal, vec![(*b, c.clone())]));
                    }
                }
            }
        }
        Ok(new)
    }

    /// Elements identified with `a` by equality or a shared nominal.
    fn approx(&self, a: usize, holders: &BTreeMap<Sym, Vec<usize>>) -> Vec<(usize, Link)> {
        let mut out = vec![(a, Link::Same)];
        let mut seen = BTreeSet::from([a]);
        for x in &self.at[a] {
            if let Atom::Nom(c) = x {
                for &b in &holders[c] {
                    if seen.insert(b) {
                        out.push((b, Link::Nominal(c.clone())));
                    }
                }
            }
        }
        out
    }

    fn chain_candidates(&mut self, holders: &BTreeMap<Sym, Vec<usize>>) -> Result<Vec<(Key, Just)>> {
        let tbox = self.oracle.tbox.clone();
        // Hat edges a2 -r-> a3.
        let mut hats: BTreeMap<(usize, Sym, usize), Hat> = BTreeMap::new();
        for (r, x, y) in self.abox.role_edges() {
            hats.entry((self.elem_ix[&DElem::Ind(x)], r.clone(), self.elem_ix[&DElem::Ind(y)])).or_insert(Hat::Abox);
        }
        let facts: Vec<Key> = self.facts.keys().cloned().collect();
        for (e, c) in &facts {
            for (r, t) in self.oracle.succ(c).iter() {
                let Some(&ti) = self.elem_ix.get(&DElem::Node(t.clone())) else { continue };
                if self.exists(ti) {
                    hats.entry((*e, r.clone(), ti)).or_insert(Hat::Fact(c.clone()));
                }
            }
        }
        let subs = tbox.ri_subs();
        let comps = tbox.ri_comps();
        if subs.is_empty() && comps.is_empty() && hats.is_empty() {
            return Ok(vec![]);
        }
        let mut sub_of: HashMap<Sym, Vec<Sym>> = HashMap::new();
        for (r, s) in &subs {
            sub_of.entry(r.clone()).or_default().push(s.clone());
        }
        let mut left: HashMap<Sym, Vec<(Sym, Sym)>> = HashMap::new();
        let mut right: HashMap<Sym, Vec<(Sym, Sym)>> = HashMap::new();
        for (r, s, t) in &comps {
            left.entry(r.clone()).or_default().push((s.clone(), t.clone()));
            right.entry(s.clone()).or_default().push((r.clone(), t.clone()));
        }
        let mut rel: BTreeMap<(Sym, usize, usize), Prov> = BTreeMap::new();
        let mut from: HashMap<(Sym, usize), Vec<usize>> = HashMap::new();
        let mut to: HashMap<(Sym, usize), Vec<usize>> = HashMap::new();
        let mut queue: VecDeque<(Sym, usize, usize)> = VecDeque::new();
        let push = |rel: &mut BTreeMap<(Sym, usize, usize), Prov>, q: &mut VecDeque<_>, k: (Sym, usize, usize), p: Prov| {
            if !rel.contains_key(&k) {
                rel.insert(k.clone(), p);
                q.push_back(k);
            }
        };
        for ((a2, r, a3), hat) in &hats {
            for (a1, link) in self.approx(*a2, holders) {
                push(&mut rel, &mut queue, (r.clone(), a1, *a3), Prov::Step { link, a2: *a2, hat: hat.clone() });
            }
        }
        while let Some((r, a, b)) = queue.pop_front() {
            from.entry((r.clone(), a)).or_default().push(b);
            to.entry((r.clone(), b)).or_default().push(a);
            for s in sub_of.get(&r).cloned().unwrap_or_default() {
                push(&mut rel, &mut queue, (s, a, b), Prov::Sub(r.clone()));
            }
            for (s, t) in left.get(&r).cloned().unwrap_or_default() {
                for c in from.get(&(s.clone(), b)).cloned().unwrap_or_default() {
                    push(&mut rel, &mut queue, (t.clone(), a, c), Prov::Comp(r.clone(), s.clone(), b));
                }
            }
            for (l, t) in right.get(&r).cloned().unwrap_or_default() {
                for z in to.get(&(l.clone(), a)).cloned().unwrap_or_default() {
                    push(&mut rel, &mut queue, (t.clone(), z, b), Prov::Comp(l.clone(), r.clone(), a));
                }
            }
        }
        let mut out = vec![];
        let mut done: BTreeSet<Key> = BTreeSet::new();
        for (r, a1, b) in rel.keys() {
            if tbox.is_internal_role(r) {
                continue;
            }
            for (last, last_link) in self.approx(*b, holders) {
                for c in self.at[last].clone() {
                    for x in self.oracle.ex_left(r, &c).iter() {
                        let k = (*a1, x.clone());
                        if !self.theta.contains(x) || self.has(k.0, &k.1) || done.contains(&k) {
                            continue;
                        }
                        let mut path = vec![];
                        expand(&rel, r, *a1, *b, &mut path, self.config.max_chain)?;
                        done.insert(k.clone());
                        out.push((
                            k,
                            Just::Chain { role: r.clone(), filler: c.clone(), path, last, last_link: last_link.clone() },
                        ));
                    }
                }
            }
        }
        Ok(out)
    }

    pub fn holds(&self, e: &DElem<Var>, a: &Atom) -> bool {
        self.elem_ix.get(e).is_some_and(|i| self.has(*i, a))
    }

    pub fn tree(&self, e: &DElem<Var>, a: &Atom) -> Option<Rc<ElTree<Var>>> {
        let i = self.elem_ix.get(e)?;
        self.facts.get(&(*i, a.clone())).cloned()
    }

    pub fn fact_count(&self) -> usize {
        self.facts.len()
    }
}

fn tbox_size(o: &Ontology) -> usize {
    o.size().max(1)
}

fn expand(
    rel: &BTreeMap<(Sym, usize, usize), Prov>,
    r: &Sym,
    a: usize,
    b: usize,
    out: &mut Vec<Step>,
    cap: usize,
) -> Result<()> {
    // Iterative to keep deep chains off the call stack.
    let mut stack = vec![(r.clone(), a, b)];
    while let Some((r, a, b)) = stack.pop() {
        match &rel[&(r.clone(), a, b)] {
            Prov::Step { link, a2, hat } => {
                if out.len() >= cap {
                    return Err(Error::resource("RI chain length", cap as u64, None));
                }
                out.push(Step { a1: a, link: link.clone(), a2: *a2, role: r.clone(), hat: hat.clone(), a3: b });
            }
            Prov::Sub(s) => stack.push((s.clone(), a, b)),
            Prov::Comp(l, rr, mid) => {
                stack.push((rr.clone(), *mid, b));
                stack.push((l.clone(), a, *mid));
            }
        }
    }
    Ok(())
}

/// Atom certifying that a chain element exists.
fn witness_atom<I>(e: &DElem<I>) -> Atom {
    match e {
        DElem::Ind(_) => Atom::Top,
        DElem::Node(a) => a.clone(),
    }
}

/// Premises of an RI-rule node, in order: links, hat facts, the filler fact, then existence witnesses
/// for elements not yet covered. `key` maps elements to the form used for coverage.
fn chain_premises<I: Clone + Eq, K: Eq>(c: &Chain<I>, key: &dyn Fn(&DElem<I>) -> K) -> Vec<(DElem<I>, Atom)> {
    let mut out: Vec<(DElem<I>, Atom)> = vec![];
    let push = |out: &mut Vec<(DElem<I>, Atom)>, e: &DElem<I>, a: Atom| {
        if !out.iter().any(|(f, b)| f == e && *b == a) {
            out.push((e.clone(), a));
        }
    };
    for (i, l) in c.links.iter().enumerate() {
        if let Link::Nominal(n) = l {
            push(&mut out, &c.elems[2 * i], Atom::Nom(n.clone()));
            push(&mut out, &c.elems[2 * i + 1], Atom::Nom(n.clone()));
        }
    }
    for (i, h) in c.hats.iter().enumerate() {
        if let Hat::Fact(a) = h {
            push(&mut out, &c.elems[2 * i + 1], a.clone());
        }
    }
    push(&mut out, c.last(), c.filler.clone());
    let first = key(&c.elems[0]);
    for e in &c.elems[1..] {
        let k = key(e);
        if k != first && !out.iter().any(|(f, _)| key(f) == k) {
            push(&mut out, e, witness_atom(e));
        }
    }
    out
}

pub fn build_tree_el(o: &Ontology, abox: &ABox, x: Var, c: &Atom) -> Result<Option<Rc<ElTree<Var>>>> {
    let d = ElDerivations::new(o, abox, DerivationConfig::default())?;
    Ok(d.tree(&DElem::Ind(x), c))
}

/// Read access to an ABox for rule checking.
pub trait AboxView<I> {
    fn is_ind(&self, i: &I) -> bool;
    fn asserted(&self, i: &I, a: &Atom) -> bool;
    fn edge(&self, r: &Sym, i: &I, j: &I) -> bool;
}

impl AboxView<Var> for ABox {
    fn is_ind(&self, i: &Var) -> bool {
        self.vars().contains(i)
    }

    fn asserted(&self, i: &Var, a: &Atom) -> bool {
        match a {
            Atom::Top => self.contains(&Assertion::Top(*i)),
            Atom::Name(n) => self.contains(&Assertion::Concept(n.clone(), *i)),
            Atom::Nom(n) => self.contains(&Assertion::Nominal(n.clone(), *i)),
        }
    }

    fn edge(&self, r: &Sym, i: &Var, j: &Var) -> bool {
        self.contains(&Assertion::Role(r.clone(), *i, *j))
    }
}

impl AboxView<Word> for DirectedUnfolding {
    fn is_ind(&self, w: &Word) -> bool {
        self.is_word(w)
    }

    fn asserted(&self, w: &Word, a: &Atom) -> bool {
        match a {
            Atom::Top => true,
            Atom::Name(n) => self.base.concepts_at(w.tail()).contains(n),
            Atom::Nom(n) => w.is_empty() && self.anchored.contains_key(&w.start) && self.base.nominals_at(w.start).contains(n),
        }
    }

    fn edge(&self, r: &Sym, v: &Word, w: &Word) -> bool {
        self.children(v).into_iter().any(|c| match c {
            Child::Word(s, w2) => s == *r && w2 == *w,
            Child::Anchor(s, x) => s == *r && *w == Word::root(x),
        })
    }
}

/// Re-checks every node of an EL derivation tree against a reasoner, independently of the
/// memoized oracle used during construction.
pub struct ElChecker<'a> {
    pub o: &'a Ontology,
    cache: HashMap<(Concept, Concept), bool>,
    chains: HashMap<(Vec<Sym>, Sym), bool>,
}

impl<'a> ElChecker<'a> {
    pub fn new(o: &'a Ontology) -> Self {
        ElChecker { o, cache: HashMap::new(), chains: HashMap::new() }
    }

    fn entails(&mut self, c: Concept, d: Concept) -> Result<bool> {
        let k = (c, d);
        if let Some(b) = self.cache.get(&k) {
            return Ok(*b);
        }
        let b = crate::el_engine::entails_ci(self.o, &k.0, &k.1)?;
        self.cache.insert(k, b);
        Ok(b)
    }

    fn chain_entailed(&mut self, roles: &[Sym], r: &Sym) -> Result<bool> {
        let k = (roles.to_vec(), r.clone());
        if let Some(b) = self.chains.get(&k) {
            return Ok(*b);
        }
        let b = if roles.len() == 1 && roles[0] == *r {
            true
        } else {
            let mut ab = ABox::new();
            let x0 = ab.fresh();
            ab.add_top(x0);
            let mut cur = x0;
            for s in roles {
                let y = ab.fresh();
                ab.add_top(y);
                ab.add_role(s, cur, y);
                cur = y;
            }
            let avoid = signature_of(self.o).union(&signature_of(&ab));
            let q = crate::normalize::FreshNames::new("C", &avoid).plain("Q");
            ab.add_concept(&q, cur);
            crate::el_engine::entails_assertion(self.o, &ab, &Concept::exists(RoleExpr::Name(r.clone()), Concept::name_sym(q)), x0)?
        };
        self.chains.insert(k, b);
        Ok(b)
    }

    /// Validates the whole tree; returns a description of the first violation.
    pub fn check<I: Clone + Ord + std::fmt::Debug>(&mut self, t: &ElTree<I>, view: &dyn AboxView<I>) -> Result<std::result::Result<(), String>> {
        let mut seen = std::collections::HashSet::new();
        let mut stack = vec![t];
        while let Some(n) = stack.pop() {
            if !seen.insert(n as *const ElTree<I>) {
                continue;
            }
            if let Err(e) = self.check_node(n, view)? {
                return Ok(Err(format!("({:?}, {}) [{}]: {e}", n.elem, n.concept, n.rule.name())));
            }
            for c in &n.children {
                stack.push(c);
            }
        }
        Ok(Ok(()))
    }

    fn check_node<I: Clone + Ord + std::fmt::Debug>(&mut self, n: &ElTree<I>, view: &dyn AboxView<I>) -> Result<std::result::Result<(), String>> {
        let has = |e: &DElem<I>, a: &Atom| n.children.iter().any(|c| c.elem == *e && c.concept == *a);
        if let DElem::Ind(i) = &n.elem {
            if !view.is_ind(i) {
                return Ok(Err("not an individual".into()));
            }
        }
        let fail = |m: &str| Ok(Err(m.to_string()));
        match &n.rule {
            ElRule::Base => {
                let ok = match (&n.elem, &n.concept) {
                    (DElem::Ind(_), Atom::Top) => true,
                    (DElem::Ind(i), a) => view.asserted(i, a),
                    (DElem::Node(Atom::Nom(a)), Atom::Nom(b)) => a == b,
                    (DElem::Node(Atom::Top), Atom::Top) => true,
                    _ => false,
                };
                if !ok {
                    return fail("base condition");
                }
            }
            ElRule::NonEmpty | ElRule::Reach => {
                let Atom::Name(a) = &n.concept else { return fail("not a concept name") };
                if n.elem != DElem::Node(n.concept.clone()) || n.children.len() != 1 {
                    return fail("shape");
                }
                let c = &n.children[0].concept;
                let ok = if matches!(n.rule, ElRule::NonEmpty) {
                    c == &n.concept
                } else {
                    self.entails(c.concept(), Concept::exists(RoleExpr::Universal, Concept::name_sym(a.clone())))?
                };
                if !ok {
                    return fail("nonemptiness");
                }
            }
            ElRule::Conj => {
                if n.children.is_empty() || n.children.len() > 2 || n.children.iter().any(|c| c.elem != n.elem) {
                    return fail("shape");
                }
                let l = Concept::conj(n.children.iter().map(|c| c.concept.concept()));
                if !self.entails(l, n.concept.concept())? {
                    return fail("conjunction not entailed");
                }
            }
            ElRule::Nominal(c) => {
                let nom = Atom::Nom(c.clone());
                let ok = n.children.len() == 3
                    && n.children[0].concept == n.concept
                    && has(&n.elem, &nom)
                    && has(&n.children[0].elem, &nom);
                if !ok {
                    return fail("nominal transfer");
                }
            }
            ElRule::Universal => {
                if n.children.len() != 1 {
                    return fail("shape");
                }
                let l = Concept::exists(RoleExpr::Universal, n.children[0].concept.concept());
                if !self.entails(l, n.concept.concept())? {
                    return fail("universal consequence not entailed");
                }
            }
            ElRule::Chain(ch) => {
                let k = ch.links.len();
                if ch.elems.len() != 2 * k || ch.hats.len() + 1 != k || ch.roles.len() + 1 != k || k < 2 {
                    return fail("chain shape");
                }
                if ch.elems[0] != n.elem {
                    return fail("chain start");
                }
                for (i, l) in ch.links.iter().enumerate() {
                    let (a, b) = (&ch.elems[2 * i], &ch.elems[2 * i + 1]);
                    let ok = match l {
                        Link::Same => a == b,
                        Link::Nominal(c) => has(a, &Atom::Nom(c.clone())) && has(b, &Atom::Nom(c.clone())),
                    };
                    if !ok {
                        return fail("chain link");
                    }
                }
                for (i, h) in ch.hats.iter().enumerate() {
                    let (a, b, r) = (&ch.elems[2 * i + 1], &ch.elems[2 * i + 2], &ch.roles[i]);
                    let ok = match (h, a, b) {
                        (Hat::Abox, DElem::Ind(x), DElem::Ind(y)) => view.edge(r, x, y),
                        (Hat::Fact(c), _, DElem::Node(t)) => {
                            has(a, c) && self.entails(c.concept(), Concept::exists(RoleExpr::Name(r.clone()), t.concept()))?
                        }
                        _ => false,
                    };
                    if !ok {
                        return fail("chain edge");
                    }
                }
                if !has(ch.last(), &ch.filler) {
                    return fail("chain filler");
                }
                for e in &ch.elems[1..] {
                    if *e != n.elem && !n.children.iter().any(|c| c.elem == *e) {
                        return fail("chain element without a fact");
                    }
                }
                let l = Concept::exists(RoleExpr::Name(ch.role.clone()), ch.filler.concept());
                if !self.entails(l, n.concept.concept())? {
                    return fail("existential consequence not entailed");
                }
                if !self.chain_entailed(&ch.roles, &ch.role)? {
                    return fail("role chain not entailed");
                }
            }
        }
        Ok(Ok(()))
    }
}

/// Rebuilds a tree over the directed unfolding: each label `(x, C)` becomes `(w, C)` for a word
/// `w` with tail `x`; RI chains are re-threaded along unfolded paths.
pub fn lift_tree_el(t: &Rc<ElTree<Var>>, u: &DirectedUnfolding, config: &DerivationConfig) -> Result<Rc<ElTree<Word>>> {
    let mut l = Lifter { u, memo: HashMap::new(), default: HashMap::new(), created: 0, cap: config.max_lift_nodes };
    let root = l.default_elem(&t.elem);
    l.lift(t, root)
}

struct Lifter<'a> {
    u: &'a DirectedUnfolding,
    memo: HashMap<(*const ElTree<Var>, DElem<Word>), Rc<ElTree<Word>>>,
    default: HashMap<Var, Word>,
    created: usize,
    cap: usize,
}

impl Lifter<'_> {
    fn default_elem(&mut self, e: &DElem<Var>) -> DElem<Word> {
        match e {
            DElem::Ind(x) => {
                let u = self.u;
                DElem::Ind(self.default.entry(*x).or_insert_with(|| u.word_to(*x)).clone())
            }
            DElem::Node(a) => DElem::Node(a.clone()),
        }
    }

    fn lift(&mut self, n: &Rc<ElTree<Var>>, e: DElem<Word>) -> Result<Rc<ElTree<Word>>> {
        let key = (Rc::as_ptr(n), e.clone());
        if let Some(t) = self.memo.get(&key) {
            return Ok(t.clone());
        }
        self.created += 1;
        if self.created > self.cap {
            return Err(Error::resource("lifted derivation tree nodes", self.cap as u64, None));
        }
        let (rule, children) = match &n.rule {
            ElRule::Base => (ElRule::Base, vec![]),
            ElRule::NonEmpty | ElRule::Reach | ElRule::Universal => {
                let c = &n.children[0];
                let ce = self.default_elem(&c.elem);
                (n.rule_map(), vec![self.lift(c, ce)?])
            }
            ElRule::Conj => {
                let mut ch = vec![];
                for c in &n.children {
                    ch.push(self.lift(c, e.clone())?);
                }
                (ElRule::Conj, ch)
            }
            ElRule::Nominal(c) => {
                let be = self.default_elem(&n.children[0].elem);
                let ch = vec![
                    self.lift(&n.children[0], be.clone())?,
                    self.lift(&n.children[1], e.clone())?,
                    self.lift(&n.children[2], be)?,
                ];
                (ElRule::Nominal(c.clone()), ch)
            }
            ElRule::Chain(ch) => self.lift_chain(n, ch, e.clone())?,
        };
        let t = Rc::new(Tree { elem: e, concept: n.concept.clone(), rule, children });
        self.memo.insert(key, t.clone());
        Ok(t)
    }

    fn lift_chain(&mut self, n: &Rc<ElTree<Var>>, ch: &Chain<Var>, e: DElem<Word>) -> Result<(ElRule<Word>, Vec<Rc<ElTree<Word>>>)> {
        let k = ch.links.len();
        let mut b: Vec<DElem<Word>> = Vec::with_capacity(2 * k);
        b.push(e);
        for i in 0..k {
            let next = match &ch.links[i] {
                Link::Same => b[2 * i].clone(),
                Link::Nominal(_) => self.default_elem(&ch.elems[2 * i + 1]),
            };
            b.push(next);
            if i + 1 < k {
                let tgt = match (&ch.hats[i], &ch.elems[2 * i + 2], &b[2 * i + 1]) {
                    (Hat::Abox, DElem::Ind(y), DElem::Ind(w)) => {
                        if self.u.anchored.contains_key(y) {
                            DElem::Ind(Word::root(*y))
                        } else {
                            DElem::Ind(w.extend(&ch.roles[i], *y))
                        }
                    }
                    (_, other, _) => self.default_elem_keep(other),
                };
                b.push(tgt);
            }
        }
        let lifted = Chain {
            role: ch.role.clone(),
            filler: ch.filler.clone(),
            elems: b.clone(),
            roles: ch.roles.clone(),
            hats: ch.hats.clone(),
            links: ch.links.clone(),
        };
        // Premises by position, so each lifted premise knows its original element.
        let orig_of: HashMap<DElem<Word>, DElem<Var>> = b.iter().cloned().zip(ch.elems.iter().cloned()).collect();
        let prem = chain_premises(&lifted, &|x: &DElem<Word>| x.clone());
        let mut out = vec![];
        for (le, a) in prem {
            let oe = &orig_of[&le];
            let found = n.children.iter().find(|c| c.elem == *oe && c.concept == a).cloned();
            let child = match found {
                Some(c) => self.lift(&c, le)?,
                None => {
                    // An existence witness at a new word: reuse any fact about the same individual.
                    match n.children.iter().find(|c| c.elem == *oe).cloned() {
                        Some(c) => self.lift(&c, le)?,
                        None => Rc::new(Tree { elem: le, concept: Atom::Top, rule: ElRule::Base, children: vec![] }),
                    }
                }
            };
            if !out.iter().any(|c: &Rc<ElTree<Word>>| c.elem == child.elem && c.concept == child.concept) {
                out.push(child);
            }
        }
        Ok((ElRule::Chain(lifted), out))
    }

    fn default_elem_keep(&mut self, e: &DElem<Var>) -> DElem<Word> {
        self.default_elem(e)
    }
}

impl ElTree<Var> {
    fn rule_map(&self) -> ElRule<Word> {
        match &self.rule {
            ElRule::Base => ElRule::Base,
            ElRule::NonEmpty => ElRule::NonEmpty,
            ElRule::Reach => ElRule::Reach,
            ElRule::Conj => ElRule::Conj,
            ElRule::Nominal(c) => ElRule::Nominal(c.clone()),
            ElRule::Universal => ElRule::Universal,
            ElRule::Chain(_) => unreachable!("chains are lifted separately"),
        }
    }
}

/// Restriction of the unfolding to the words occurring in labels (prefix-closed). With
/// `rooted`, anchors used by the tree are connected back to the root by a shortest path.
pub fn support_abox(t: &ElTree<Word>, u: &DirectedUnfolding, rooted: bool) -> (PointedABox, BTreeMap<Word, Var>) {
    let mut words: BTreeSet<Word> = BTreeSet::new();
    t.walk(&mut |n| {
        if let DElem::Ind(w) = &n.elem {
            words.insert(w.clone());
        }
        if let ElRule::Chain(c) = &n.rule {
            for e in &c.elems {
                if let DElem::Ind(w) = e {
                    words.insert(w.clone());
                }
            }
        }
    });
    if rooted {
        connect_anchors(u, &mut words);
    }
    u.restrict(&words)
}

/// Adds, for every used word starting at an anchor, a word from the root with an edge into it.
fn connect_anchors(u: &DirectedUnfolding, words: &mut BTreeSet<Word>) {
    let starts: BTreeSet<Var> = words.iter().map(|w| w.start).filter(|s| *s != u.root).collect();
    if starts.is_empty() {
        return;
    }
    // BFS over words, jumping into anchors; remember how each anchor was reached.
    let mut via: BTreeMap<Var, Option<(Var, Word)>> = BTreeMap::new();
    via.insert(u.root, None);
    let mut queue = VecDeque::from([Word::root(u.root)]);
    let mut seen: BTreeSet<Word> = BTreeSet::from([Word::root(u.root)]);
    while let Some(w) = queue.pop_front() {
        if starts.iter().all(|s| via.contains_key(s)) {
            break;
        }
        for c in u.children(&w) {
            match c {
                Child::Word(_, w2) => {
                    if w2.len() <= u.base.vars().len() && seen.insert(w2.clone()) {
                        queue.push_back(w2);
                    }
                }
                Child::Anchor(_, x) => {
                    if let std::collections::btree_map::Entry::Vacant(e) = via.entry(x) {
                        e.insert(Some((w.start, w.clone())));
                        queue.push_back(Word::root(x));
                    }
                }
            }
        }
    }
    for s in starts {
        let mut cur = s;
        while let Some(Some((prev, w))) = via.get(&cur) {
            words.insert(w.clone());
            cur = *prev;
        }
    }
}

/// Rules of ELIO_u derivation trees.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum EliRule {
    /// An ABox assertion, `{a}` at `x_a`, or `⊤`.
    Base,
    /// `O ⊨ ⊤ ⊑ C`.
    Top,
    /// Rule 1: premises at the same element and at nominals.
    Local,
    /// Rule 2: `∃u.A` from another element.
    Universal,
    /// Rule 3 along a role edge (possibly inverse) to the child.
    Step(RoleExpr),
    /// Rule 4: premises around an ABox element entail `∃u.({a} ⊓ C)`.
    Nominal,
}

impl EliRule {
    pub fn name(&self) -> &'static str {
        match self {
            EliRule::Base => "base",
            EliRule::Top => "top",
            EliRule::Local => "local",
            EliRule::Universal => "universal",
            EliRule::Step(_) => "step",
            EliRule::Nominal => "nominal",
        }
    }
}

pub type EliTree<I> = Tree<EliElem<I>, Fact, EliRule>;

/// Derivation trees read off the ELIO_u rule fixpoint; each fact keeps its
/// first-round justification, with rule-1 and rule-4 premises minimized greedily.
pub struct EliDerivations {
    pub sat: EliSaturation,
    memo: RefCell<HashMap<(EliElem<Var>, Fact), Rc<EliTree<Var>>>>,
}

impl EliDerivations {
    pub fn new(o: &Ontology, abox: &ABox) -> Result<EliDerivations> {
        Ok(EliDerivations { sat: EliSaturation::new(o, abox)?, memo: RefCell::new(HashMap::new()) })
    }

    pub fn with_oracle(oracle: Arc<EliOracle>, abox: &ABox) -> Result<EliDerivations> {
        Ok(EliDerivations { sat: EliSaturation::with_oracle(oracle, abox)?, memo: RefCell::new(HashMap::new()) })
    }

    pub fn holds(&self, e: &EliElem<Var>, f: &Fact) -> bool {
        *f == Fact::Atom(Atom::Top) || self.sat.holds(e, f)
    }

    fn minimize(&self, prem: BTreeSet<Prem>, ok: &dyn Fn(&BTreeSet<Prem>) -> Result<bool>) -> Result<BTreeSet<Prem>> {
        let mut cur = prem;
        for p in cur.clone() {
            let mut smaller = cur.clone();
            smaller.remove(&p);
            if ok(&smaller)? {
                cur = smaller;
            }
        }
        Ok(cur)
    }

    fn premise_children(&self, x: Var, prem: &BTreeSet<Prem>) -> Result<Vec<Rc<EliTree<Var>>>> {
        let mut out = vec![];
        for p in prem {
            let (e, f) = match p {
                Prem::Here(f) => (EliElem::Ind(x), f.clone()),
                Prem::At(a, f) => (EliElem::Nom(a.clone()), f.clone()),
            };
            out.push(self.tree(&e, &f)?.ok_or_else(|| Error::Invalid(format!("premise {f} at {e} has no tree")))?);
        }
        Ok(out)
    }

    /// A derivation tree for `f` at `e`, or `None` when the fact is not derived. Inconsistent
    /// inputs have no trees.
    pub fn tree(&self, e: &EliElem<Var>, f: &Fact) -> Result<Option<Rc<EliTree<Var>>>> {
        let key = (e.clone(), f.clone());
        if let Some(t) = self.memo.borrow().get(&key) {
            return Ok(Some(t.clone()));
        }
        let leaf = |rule| Rc::new(Tree { elem: e.clone(), concept: f.clone(), rule, children: vec![] });
        let t = if *f == Fact::Atom(Atom::Top) {
            leaf(EliRule::Base)
        } else {
            if self.sat.inconsistent() {
                return Ok(None);
            }
            let Some((round, just)) = self.sat.justification(e, f).cloned() else { return Ok(None) };
            let oracle = self.sat.oracle.clone();
            match just {
                EliJust::Base => leaf(EliRule::Base),
                EliJust::Top => leaf(EliRule::Top),
                EliJust::Local => {
                    let EliElem::Ind(x) = e else { unreachable!("rule 1 concludes at individuals") };
                    let prem = self.minimize(self.sat.premises_at(*x, round), &|p| oracle.entails_at_x(p, f))?;
                    let children = self.premise_children(*x, &prem)?;
                    Rc::new(Tree { elem: e.clone(), concept: f.clone(), rule: EliRule::Local, children })
                }
                EliJust::Nominal(x) => {
                    let EliElem::Nom(a) = e else { unreachable!("rule 4 concludes at nominals") };
                    let prem = self.minimize(self.sat.premises_at(x, round), &|p| oracle.entails_at_nominal(p, a, f))?;
                    let mut children = self.premise_children(x, &prem)?;
                    if children.iter().all(|c| c.elem.ind().is_none()) {
                        // rule 4 is anchored at an ABox element even when no premise sits there
                        children.push(self.tree(&EliElem::Ind(x), &Fact::Atom(Atom::Top))?.unwrap());
                    }
                    Rc::new(Tree { elem: e.clone(), concept: f.clone(), rule: EliRule::Nominal, children })
                }
                EliJust::Universal(y) => {
                    let child = self.tree(&y, f)?.ok_or_else(|| Error::Invalid(format!("{f} at {y} has no tree")))?;
                    Rc::new(Tree { elem: e.clone(), concept: f.clone(), rule: EliRule::Universal, children: vec![child] })
                }
                EliJust::Step { role, to, atom } => {
                    let g = Fact::Atom(atom);
                    let child = self.tree(&EliElem::Ind(to), &g)?.ok_or_else(|| Error::Invalid(format!("{g} has no tree")))?;
                    Rc::new(Tree { elem: e.clone(), concept: f.clone(), rule: EliRule::Step(role), children: vec![child] })
                }
            }
        };
        self.memo.borrow_mut().insert(key, t.clone());
        Ok(Some(t))
    }
}

impl EliElem<Var> {
    pub fn ind(&self) -> Option<&Var> {
        match self {
            EliElem::Ind(x) => Some(x),
            EliElem::Nom(_) => None,
        }
    }
}

impl EliElem<UWord> {
    pub fn word(&self) -> Option<&UWord> {
        match self {
            EliElem::Ind(w) => Some(w),
            EliElem::Nom(_) => None,
        }
    }
}

pub fn build_tree_eli(o: &Ontology, abox: &ABox, x: Var, goal: &Fact) -> Result<Option<Rc<EliTree<Var>>>> {
    EliDerivations::new(o, abox)?.tree(&EliElem::Ind(x), goal)
}

/// Read access for checking ELIO_u trees.
pub trait EliView<I> {
    fn is_ind(&self, i: &I) -> bool;
    fn asserted(&self, i: &I, a: &Atom) -> bool;
    fn edge(&self, r: &RoleExpr, i: &I, j: &I) -> bool;
}

impl EliView<Var> for ABox {
    fn is_ind(&self, i: &Var) -> bool {
        self.vars().contains(i)
    }

    fn asserted(&self, i: &Var, a: &Atom) -> bool {
        AboxView::asserted(self, i, a)
    }

    fn edge(&self, r: &RoleExpr, i: &Var, j: &Var) -> bool {
        match r {
            RoleExpr::Name(s) => self.contains(&Assertion::Role(s.clone(), *i, *j)),
            RoleExpr::Inv(s) => self.contains(&Assertion::Role(s.clone(), *j, *i)),
            RoleExpr::Universal => false,
        }
    }
}

impl EliView<UWord> for UndirectedUnfolding {
    fn is_ind(&self, w: &UWord) -> bool {
        self.is_word(w)
    }

    fn asserted(&self, w: &UWord, a: &Atom) -> bool {
        match a {
            Atom::Top => true,
            Atom::Name(n) => self.base.abox.concepts_at(w.tail()).contains(n),
            Atom::Nom(n) => w.is_empty() && self.base.abox.nominals_at(w.start).contains(n),
        }
    }

    fn edge(&self, r: &RoleExpr, v: &UWord, w: &UWord) -> bool {
        self.children(v).into_iter().any(|c| match c {
            UChild::Word(s, w2) => s == *r && w2 == *w,
            UChild::Anchor(s, x) => s == *r && *w == UWord::root(x),
        })
    }
}

/// Re-checks ELIO_u trees with the completion procedure, independently of the rule fixpoint.
pub struct EliChecker<'a> {
    pub o: &'a Ontology,
    cache: HashMap<(Concept, Concept), bool>,
}

impl<'a> EliChecker<'a> {
    pub fn new(o: &'a Ontology) -> Self {
        EliChecker { o, cache: HashMap::new() }
    }

    fn entails(&mut self, c: Concept, d: Concept) -> Result<bool> {
        let k = (c, d);
        if let Some(b) = self.cache.get(&k) {
            return Ok(*b);
        }
        let b = crate::eli_engine::entails_ci_completion(self.o, &k.0, &k.1)?;
        self.cache.insert(k, b);
        Ok(b)
    }

    pub fn check<I: Clone + Ord + std::fmt::Debug>(&mut self, t: &EliTree<I>, view: &dyn EliView<I>) -> Result<std::result::Result<(), String>> {
        let mut seen = std::collections::HashSet::new();
        let mut stack = vec![t];
        while let Some(n) = stack.pop() {
            if !seen.insert(n as *const EliTree<I>) {
                continue;
            }
            if let Err(msg) = self.check_node(n, view)? {
                return Ok(Err(format!("{:?} {}: {msg}", n.elem, n.concept)));
            }
            for c in &n.children {
                stack.push(c);
            }
        }
        Ok(Ok(()))
    }

    fn premise<I: PartialEq>(&self, here: &EliElem<I>, c: &EliTree<I>) -> Option<Concept> {
        match &c.elem {
            EliElem::Nom(a) => Some(Prem::At(a.clone(), c.concept.clone()).concept()),
            e if e == here => Some(c.concept.concept()),
            _ => None,
        }
    }

    fn check_node<I: Clone + Ord + std::fmt::Debug>(&mut self, n: &EliTree<I>, view: &dyn EliView<I>) -> Result<std::result::Result<(), String>> {
        let goal = n.concept.concept();
        if let EliElem::Ind(x) = &n.elem {
            if !view.is_ind(x) {
                return Ok(Err("not an individual of the ABox".into()));
            }
        }
        let ok = match &n.rule {
            EliRule::Base => match (&n.elem, &n.concept) {
                (_, Fact::Atom(Atom::Top)) => true,
                (EliElem::Ind(x), Fact::Atom(a)) => view.asserted(x, a),
                (EliElem::Nom(a), Fact::Atom(Atom::Nom(b))) => a == b,
                _ => false,
            },
            EliRule::Top => self.entails(Concept::top(), goal)?,
            EliRule::Local => {
                let EliElem::Ind(_) = &n.elem else { return Ok(Err("rule 1 at a nominal".into())) };
                let mut prem = vec![];
                for c in &n.children {
                    match self.premise(&n.elem, c) {
                        Some(p) => prem.push(p),
                        None => return Ok(Err("premise at a different individual".into())),
                    }
                }
                self.entails(Concept::conj(prem), goal)?
            }
            EliRule::Nominal => {
                let EliElem::Nom(a) = &n.elem else { return Ok(Err("rule 4 at an individual".into())) };
                let inds: BTreeSet<&I> = n.children.iter().filter_map(|c| c.elem.ind_ref()).collect();
                if inds.len() != 1 {
                    return Ok(Err("rule 4 needs exactly one individual".into()));
                }
                let prem: Vec<Concept> = n
                    .children
                    .iter()
                    .map(|c| match &c.elem {
                        EliElem::Nom(b) => Prem::At(b.clone(), c.concept.clone()).concept(),
                        EliElem::Ind(_) => c.concept.concept(),
                    })
                    .collect();
                let target = Prem::At(a.clone(), n.concept.clone()).concept();
                self.entails(Concept::conj(prem), target)?
            }
            EliRule::Universal => {
                matches!(n.concept, Fact::SomeU(_)) && n.children.len() == 1 && n.children[0].concept == n.concept
            }
            EliRule::Step(r) => {
                let [c] = n.children.as_slice() else { return Ok(Err("rule 3 needs one premise".into())) };
                let (EliElem::Ind(x), EliElem::Ind(y), Fact::Atom(_)) = (&n.elem, &c.elem, &c.concept) else {
                    return Ok(Err("rule 3 premise shape".into()));
                };
                view.edge(r, x, y) && self.entails(Concept::exists(r.clone(), c.concept.concept()), goal)?
            }
        };
        Ok(if ok { Ok(()) } else { Err(format!("{} rule not justified", n.rule.name())) })
    }
}

impl<I> EliElem<I> {
    fn ind_ref(&self) -> Option<&I> {
        match self {
            EliElem::Ind(x) => Some(x),
            EliElem::Nom(_) => None,
        }
    }
}

/// Relabels an ELIO_u tree over the undirected unfolding; the tree shape is kept.
pub fn lift_tree_eli(t: &Rc<EliTree<Var>>, u: &UndirectedUnfolding, config: &DerivationConfig) -> Result<Rc<EliTree<UWord>>> {
    let mut l = EliLifter { u, memo: HashMap::new(), default: HashMap::new(), created: 0, cap: config.max_lift_nodes };
    let root = l.default_elem(&t.elem);
    l.lift(t, root)
}

struct EliLifter<'a> {
    u: &'a UndirectedUnfolding,
    memo: HashMap<(*const EliTree<Var>, EliElem<UWord>), Rc<EliTree<UWord>>>,
    default: HashMap<Var, UWord>,
    created: usize,
    cap: usize,
}

impl EliLifter<'_> {
    fn default_elem(&mut self, e: &EliElem<Var>) -> EliElem<UWord> {
        match e {
            EliElem::Ind(x) => {
                let u = self.u;
                EliElem::Ind(self.default.entry(*x).or_insert_with(|| u.word_to(*x)).clone())
            }
            EliElem::Nom(a) => EliElem::Nom(a.clone()),
        }
    }

    fn lift(&mut self, n: &Rc<EliTree<Var>>, e: EliElem<UWord>) -> Result<Rc<EliTree<UWord>>> {
        let key = (Rc::as_ptr(n), e.clone());
        if let Some(t) = self.memo.get(&key) {
            return Ok(t.clone());
        }
        self.created += 1;
        if self.created > self.cap {
            return Err(Error::resource("lifted derivation tree nodes", self.cap as u64, None));
        }
        let mut children = vec![];
        match &n.rule {
            EliRule::Base | EliRule::Top => {}
            EliRule::Local => {
                for c in &n.children {
                    let ce = match &c.elem {
                        EliElem::Ind(_) => e.clone(),
                        EliElem::Nom(a) => EliElem::Nom(a.clone()),
                    };
                    children.push(self.lift(c, ce)?);
                }
            }
            EliRule::Nominal | EliRule::Universal => {
                for c in &n.children {
                    let ce = self.default_elem(&c.elem);
                    children.push(self.lift(c, ce)?);
                }
            }
            EliRule::Step(r) => {
                let c = &n.children[0];
                let (EliElem::Ind(w), EliElem::Ind(y)) = (&e, &c.elem) else { unreachable!("rule 3 links individuals") };
                let target = if self.u.anchored.contains_key(y) { UWord::root(*y) } else { w.extend(r, *y) };
                children.push(self.lift(c, EliElem::Ind(target))?);
            }
        }
        let t = Rc::new(Tree { elem: e, concept: n.concept.clone(), rule: n.rule.clone(), children });
        self.memo.insert(key, t.clone());
        Ok(t)
    }
}

/// The words of a lifted tree, prefix-closed. With `rooted`, words starting at anchors other
/// than the root are connected to it by a shortest word reaching the anchor.
pub fn support_abox_eli(t: &EliTree<UWord>, u: &UndirectedUnfolding, rooted: bool) -> (PointedABox, BTreeMap<UWord, Var>) {
    let mut words: BTreeSet<UWord> = BTreeSet::new();
    t.walk(&mut |n| {
        if let EliElem::Ind(w) = &n.elem {
            let mut cur = Some(w.clone());
            while let Some(p) = cur {
                cur = p.parent();
                words.insert(p);
            }
        }
    });
    if rooted {
        let starts: BTreeSet<Var> = words.iter().map(|w| w.start).filter(|s| *s != u.base.root).collect();
        for s in starts {
            if let Some(w) = path_to_anchor(u, s) {
                let mut cur = Some(w);
                while let Some(p) = cur {
                    cur = p.parent();
                    words.insert(p);
                }
            }
        }
    }
    u.restrict(&words)
}

/// A shortest root word with an edge into the anchored variable `s`.
fn path_to_anchor(u: &UndirectedUnfolding, s: Var) -> Option<UWord> {
    let mut queue = VecDeque::from([u.root()]);
    let mut seen = BTreeSet::from([u.base.root]);
    while let Some(w) = queue.pop_front() {
        for c in u.children(&w) {
            match c {
                UChild::Anchor(_, x) if x == s => return Some(w),
                UChild::Word(_, w2) => {
                    if seen.insert(w2.tail()) {
                        queue.push_back(w2);
                    }
                }
                UChild::Anchor(..) => {}
            }
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::el_engine::{canonical_model, saturate, sigma_reduct_abox};
    use crate::textio::{o_p, parse_ontology};

    fn abox_from(i: &[(&str, &str)], edges: &[(&str, &str, &str)]) -> (ABox, BTreeMap<String, Var>) {
        let mut ab = ABox::new();
        let mut vars = BTreeMap::new();
        let mut v = |ab: &mut ABox, n: &str| {
            *vars.entry(n.to_string()).or_insert_with(|| {
                let x = ab.fresh_named(n);
                ab.add_top(x);
                x
            })
        };
        for (c, x) in i {
            let x = v(&mut ab, x);
            ab.add_concept(c, x);
        }
        for (r, x, y) in edges {
            let (x, y) = (v(&mut ab, x), v(&mut ab, y));
            ab.add_role(r, x, y);
        }
        (ab, vars)
    }

    #[test]
    fn top_is_a_leaf() {
        let o = parse_ontology("A <= B").unwrap();
        let (ab, v) = abox_from(&[("A", "x")], &[]);
        let t = build_tree_el(&o, &ab, v["x"], &Atom::Top).unwrap().unwrap();
        assert_eq!(t.rule, ElRule::Base);
        assert!(t.children.is_empty());
    }

    #[test]
    fn simple_chain_of_consequences() {
        let o = parse_ontology("A <= B\nB & C <= D\nexists r.D <= E").unwrap();
        let (ab, v) = abox_from(&[("A", "y"), ("C", "y")], &[("r", "x", "y")]);
        let t = build_tree_el(&o, &ab, v["x"], &Atom::Name(sym("E"))).unwrap().unwrap();
        assert!(ElChecker::new(&o).check(&t, &ab).unwrap().is_ok());
        assert!(build_tree_el(&o, &ab, v["y"], &Atom::Name(sym("E"))).unwrap().is_none());
    }

    fn o_p_setup(n: usize) -> (Ontology, PointedABox) {
        let o = o_p(n);
        let cm = canonical_model(&o, &sym("A")).unwrap();
        let sigma = Signature::from_names(&["B"], &["r0"], &[]);
        (o.clone(), sigma_reduct_abox(&cm.interp, cm.root, &sigma))
    }

    #[test]
    fn o_p_root_has_single_premise() {
        let (o, p) = o_p_setup(1);
        let t = build_tree_el(&o, &p.abox, p.root, &Atom::Name(sym("A"))).unwrap().unwrap();
        assert!(ElChecker::new(&o).check(&t, &p.abox).unwrap().is_ok());
        assert_eq!(t.children.len(), 1);
        assert_eq!(t.children[0].concept, Atom::Name(sym("B")));
        let ElRule::Chain(c) = &t.rule else { panic!("expected the RI rule, got {:?}", t.rule) };
        assert_eq!(c.elems.len(), 4);
    }

    /// The tree using `r0^(2^n) ⊑ rn` as a single chain, built by hand.
    fn o_p_long_chain(n: usize, p: &PointedABox) -> Rc<ElTree<Var>> {
        let y = p.abox.role_edges().find(|(_, x, _)| *x == p.root).unwrap().2;
        let yb = Rc::new(Tree { elem: DElem::Ind(y), concept: Atom::Name(sym("B")), rule: ElRule::Base, children: vec![] });
        let steps = 1usize << n;
        let mut elems = vec![DElem::Ind(p.root), DElem::Ind(p.root)];
        for _ in 0..steps {
            elems.push(DElem::Ind(y));
            elems.push(DElem::Ind(y));
        }
        let chain = Chain {
            role: sym(&format!("r{n}")),
            filler: Atom::Name(sym("B")),
            elems,
            roles: vec![sym("r0"); steps],
            hats: vec![Hat::Abox; steps],
            links: vec![Link::Same; steps + 1],
        };
        Rc::new(Tree { elem: DElem::Ind(p.root), concept: Atom::Name(sym("A")), rule: ElRule::Chain(chain), children: vec![yb] })
    }

    #[test]
    fn o_p_lift_fans_out() {
        for n in 1..=3usize {
            let (o, p) = o_p_setup(n);
            let t = o_p_long_chain(n, &p);
            assert!(ElChecker::new(&o).check(&t, &p.abox).unwrap().is_ok());
            let u = DirectedUnfolding::new(&p, &BTreeSet::new());
            let l = lift_tree_el(&t, &u, &DerivationConfig::default()).unwrap();
            assert!(ElChecker::new(&o).check(&l, &u).unwrap().is_ok());
            assert_eq!(l.depth(), t.depth());
            assert_eq!(l.children.len(), 1 << n);
            assert!(l.children.iter().all(|c| c.concept == Atom::Name(sym("B"))));
            let (s, _) = support_abox(&l, &u, true);
            assert_eq!(s.abox.role_edges().count(), 1 << n);
            assert!(saturate(&o, &s.abox).unwrap().holds_atom(s.root, &Atom::Name(sym("A"))));
        }
    }

    #[test]
    fn built_trees_lift_and_support() {
        for n in 1..=3usize {
            let (o, p) = o_p_setup(n);
            let t = build_tree_el(&o, &p.abox, p.root, &Atom::Name(sym("A"))).unwrap().unwrap();
            let u = DirectedUnfolding::new(&p, &BTreeSet::new());
            let l = lift_tree_el(&t, &u, &DerivationConfig::default()).unwrap();
            assert!(ElChecker::new(&o).check(&l, &u).unwrap().is_ok());
            let (s, _) = support_abox(&l, &u, true);
            assert!(saturate(&o, &s.abox).unwrap().holds_atom(s.root, &Atom::Name(sym("A"))));
        }
    }

    #[test]
    fn nominal_transfer_and_universal() {
        let o = parse_ontology("A <= {a}\nB <= {a}\nA <= E\nexists u.F <= G").unwrap();
        let (ab, v) = abox_from(&[("A", "x"), ("B", "y"), ("F", "z")], &[]);
        let d = ElDerivations::new(&o, &ab, DerivationConfig::default()).unwrap();
        let t = d.tree(&DElem::Ind(v["y"]), &Atom::Name(sym("E"))).unwrap();
        assert!(ElChecker::new(&o).check(&t, &ab).unwrap().is_ok());
        let g = d.tree(&DElem::Ind(v["x"]), &Atom::Name(sym("G"))).unwrap();
        assert_eq!(g.rule, ElRule::Universal);
        assert!(ElChecker::new(&o).check(&g, &ab).unwrap().is_ok());
    }

    #[test]
    fn json_and_dot_export() {
        let o = parse_ontology("A <= B").unwrap();
        let (ab, v) = abox_from(&[("A", "x")], &[]);
        let t = build_tree_el(&o, &ab, v["x"], &Atom::Name(sym("B"))).unwrap().unwrap();
        let show = |e: &DElem<Var>| format!("{e:?}");
        let j = t.to_json(&show, &|c: &Atom| c.to_string(), &|r: &ElRule<Var>| json!(r.name()));
        assert_eq!(j["concept"], "B");
        assert!(t.to_dot(&show, &|c: &Atom| c.to_string(), &|r: &ElRule<Var>| r.name().to_string()).contains("->"));
    }

    #[test]
    fn eli_nominal_leaf() {
        let o = parse_ontology("A <= {a}").unwrap();
        let (ab, _) = abox_from(&[("A", "x")], &[]);
        let d = EliDerivations::new(&o, &ab).unwrap();
        let t = d.tree(&EliElem::Nom(sym("a")), &Fact::Atom(Atom::Nom(sym("a")))).unwrap().unwrap();
        assert!(t.children.is_empty());
        assert_eq!(t.rule, EliRule::Base);
    }

    #[test]
    fn eli_inverse_step_is_checked() {
        let o = parse_ontology(crate::textio::O_I).unwrap();
        let (ab, v) = abox_from(&[("A", "x"), ("C", "y")], &[("r", "x", "y")]);
        let t = build_tree_eli(&o, &ab, v["y"], &Fact::Atom(Atom::Name(sym("E")))).unwrap().unwrap();
        let mut steps = vec![];
        t.walk(&mut |n| {
            if let EliRule::Step(r) = &n.rule {
                steps.push(r.clone());
            }
        });
        assert!(steps.contains(&RoleExpr::Inv(sym("r"))));
        assert_eq!(EliChecker::new(&o).check(&t, &ab).unwrap(), Ok(()));
        let x = build_tree_eli(&o, &ab, v["x"], &Fact::Atom(Atom::Name(sym("A")))).unwrap().unwrap();
        assert_eq!(EliChecker::new(&o).check(&x, &ab).unwrap(), Ok(()));
        assert!(build_tree_eli(&o, &ab, v["x"], &Fact::Atom(Atom::Name(sym("E")))).unwrap().is_none());
    }

    #[test]
    fn eli_lift_keeps_shape() {
        let o = parse_ontology("exists inv(r).A <= C\nexists r.C <= D\nD & {a} <= F\nexists u.F <= G\n").unwrap();
        let (mut ab, v) = abox_from(&[("A", "x")], &[("r", "x", "y"), ("r", "z", "y")]);
        ab.add_nominal("a", v["z"]);
        let t = build_tree_eli(&o, &ab, v["x"], &Fact::Atom(Atom::Name(sym("G")))).unwrap().unwrap();
        assert_eq!(EliChecker::new(&o).check(&t, &ab).unwrap(), Ok(()));
        let u = UndirectedUnfolding::new(&PointedABox { abox: ab.clone(), root: v["x"] }, &BTreeSet::from([sym("a")]));
        let l = lift_tree_eli(&t, &u, &DerivationConfig::default()).unwrap();
        assert_eq!(l.size(), t.size());
        assert_eq!(l.depth(), t.depth());
        assert_eq!(EliChecker::new(&o).check(&l, &u).unwrap(), Ok(()));
        let (sup, _) = support_abox_eli(&l, &u, false);
        assert!(crate::eli_engine::entails_assertion(&o, &sup.abox, &Concept::name("G"), sup.root).unwrap());
    }
}
