//! Tree automata for ELIO_u interpolant existence: the tree/ABox codec, NTAs, two-way
//! alternating automata, their conversion and product emptiness, and the existence decision.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::Arc;

use crate::el_engine::Atom;
use crate::eli_engine::{compute_types, EliConfig, EliOracle, Fact, Prem, TypeGraph};
use crate::types::*;
use crate::{Error, Result};

/// Letters of the tree alphabet Λ.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Letter {
    Name(Sym),
    Nominal(Sym),
    /// The link to the parent: `r` for `r(parent, x)`, `inv(r)` for `r(x, parent)`.
    Role(RoleExpr),
    /// `∃r.{a}` or `∃inv(r).{a}`: an edge to the element named `a`.
    ExNom(RoleExpr, Sym),
}

impl std::fmt::Display for Letter {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Letter::Name(a) => write!(f, "{a}"),
            Letter::Nominal(a) => write!(f, "{{{a}}}"),
            Letter::Role(r) => write!(f, "{r}"),
            Letter::ExNom(r, a) => write!(f, "exists {r}.{{{a}}}"),
        }
    }
}

pub type Label = BTreeSet<Letter>;

/// A finite labeled tree; children are ordered.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LTree {
    pub label: Label,
    pub children: Vec<LTree>,
}

impl LTree {
    pub fn leaf(label: Label) -> LTree {
        LTree { label, children: vec![] }
    }

    pub fn size(&self) -> usize {
        1 + self.children.iter().map(|c| c.size()).sum::<usize>()
    }

    pub fn max_arity(&self) -> usize {
        self.children.iter().map(|c| c.max_arity()).max().unwrap_or(0).max(self.children.len())
    }

    /// Children sorted recursively, for comparisons up to sibling order.
    pub fn canonical(&self) -> LTree {
        let mut children: Vec<LTree> = self.children.iter().map(|c| c.canonical()).collect();
        children.sort();
        LTree { label: self.label.clone(), children }
    }

    fn nodes(&self) -> Vec<&LTree> {
        let mut out = vec![self];
        let mut i = 0;
        while i < out.len() {
            let n = out[i];
            out.extend(n.children.iter());
            i += 1;
        }
        out
    }
}

/// `A_(T,L)`: one variable per node and one per nominal named in an `∃r.{a}` letter.
pub fn abox_from_tree(t: &LTree) -> PointedABox {
    let mut a = ABox::new();
    let mut anchors: BTreeMap<Sym, Var> = BTreeMap::new();
    fn go(t: &LTree, path: String, parent: Option<Var>, a: &mut ABox, anchors: &mut BTreeMap<Sym, Var>) -> Var {
        let x = a.fresh_named(if path.is_empty() { "e".to_string() } else { path.clone() });
        a.add_top(x);
        for l in &t.label {
            match l {
                Letter::Name(n) => a.add_concept(n, x),
                Letter::Nominal(n) => a.add_nominal(n, x),
                Letter::Role(r) => {
                    if let Some(p) = parent {
                        match r {
                            RoleExpr::Name(s) => a.add_role(s, p, x),
                            RoleExpr::Inv(s) => a.add_role(s, x, p),
                            RoleExpr::Universal => {}
                        }
                    }
                }
                Letter::ExNom(r, n) => {
                    let z = *anchors.entry(n.clone()).or_insert_with(|| {
                        let z = a.fresh_named(format!("x_{n}"));
                        a.add_top(z);
                        a.add_nominal(n, z);
                        z
                    });
                    match r {
                        RoleExpr::Name(s) => a.add_role(s, x, z),
                        RoleExpr::Inv(s) => a.add_role(s, z, x),
                        RoleExpr::Universal => {}
                    }
                }
            }
        }
        for (i, c) in t.children.iter().enumerate() {
            let p = if path.is_empty() { format!("{}", i + 1) } else { format!("{path}.{}", i + 1) };
            go(c, p, Some(x), a, anchors);
        }
        x
    }
    let root = go(t, String::new(), None, &mut a, &mut anchors);
    PointedABox { abox: a, root }
}

/// Inverse of [`abox_from_tree`] on its image: variables other than the root that carry only
/// `⊤` and one nominal and have no tree edges become `∃r.{a}` letters of their neighbours.
pub fn tree_from_abox(p: &PointedABox, k: usize) -> Result<LTree> {
    let a = &p.abox;
    let anchor_of = |x: Var| -> Option<Sym> {
        if x == p.root {
            return None;
        }
        let noms = a.nominals_at(x);
        if noms.len() == 1 && a.concepts_at(x).is_empty() {
            noms.into_iter().next()
        } else {
            None
        }
    };
    let mut adj: BTreeMap<Var, Vec<(RoleExpr, Var)>> = BTreeMap::new();
    let mut exnom: BTreeMap<Var, Vec<Letter>> = BTreeMap::new();
    for (r, x, y) in a.role_edges() {
        match (anchor_of(x), anchor_of(y)) {
            (None, None) => {
                adj.entry(x).or_default().push((RoleExpr::Name(r.clone()), y));
                adj.entry(y).or_default().push((RoleExpr::Inv(r.clone()), x));
            }
            (None, Some(n)) => exnom.entry(x).or_default().push(Letter::ExNom(RoleExpr::Name(r.clone()), n)),
            (Some(n), None) => exnom.entry(y).or_default().push(Letter::ExNom(RoleExpr::Inv(r.clone()), n)),
            (Some(_), Some(_)) => return Err(Error::ShapeViolation(format!("edge {r} between two nominal anchors"))),
        }
    }
    let mut seen = BTreeSet::from([p.root]);
    fn build(
        x: Var,
        link: Option<RoleExpr>,
        a: &ABox,
        adj: &BTreeMap<Var, Vec<(RoleExpr, Var)>>,
        exnom: &BTreeMap<Var, Vec<Letter>>,
        seen: &mut BTreeSet<Var>,
        k: usize,
    ) -> Result<LTree> {
        let mut label: Label = a.concepts_at(x).into_iter().map(Letter::Name).collect();
        label.extend(a.nominals_at(x).into_iter().map(Letter::Nominal));
        label.extend(exnom.get(&x).cloned().unwrap_or_default());
        if let Some(r) = link {
            label.insert(Letter::Role(r));
        }
        let mut children = vec![];
        let mut back = 0;
        for (r, y) in adj.get(&x).into_iter().flatten() {
            if seen.contains(y) {
                back += 1;
                continue;
            }
            seen.insert(*y);
            children.push(build(*y, Some(r.clone()), a, adj, exnom, seen, k)?);
        }
        let allowed_back = usize::from(label.iter().any(|l| matches!(l, Letter::Role(_))));
        if back > allowed_back {
            return Err(Error::ShapeViolation("the ABox is not tree-shaped".into()));
        }
        if children.len() > k {
            return Err(Error::Arity(format!("{} children exceed arity {k}", children.len())));
        }
        Ok(LTree { label, children })
    }
    let t = build(p.root, None, a, &adj, &exnom, &mut seen, k)?;
    let anchors = a.vars().into_iter().filter(|x| anchor_of(*x).is_some()).count();
    if seen.len() + anchors != a.vars().len() {
        return Err(Error::ShapeViolation("the ABox is not connected through tree edges".into()));
    }
    Ok(t)
}

/// Nondeterministic top-down tree automaton over finite trees with explicit transitions.
#[derive(Clone, Debug, Default)]
pub struct Nta {
    pub states: usize,
    pub initial: BTreeSet<usize>,
    pub transitions: Vec<(usize, Label, Vec<usize>)>,
    pub arity: usize,
}

impl Nta {
    /// States that admit a run on each subtree, computed bottom-up.
    fn run_states(&self, t: &LTree) -> BTreeSet<usize> {
        let kids: Vec<BTreeSet<usize>> = t.children.iter().map(|c| self.run_states(c)).collect();
        self.transitions
            .iter()
            .filter(|(_, a, qs)| *a == t.label && qs.len() == kids.len() && qs.iter().zip(&kids).all(|(q, s)| s.contains(q)))
            .map(|(q, _, _)| *q)
            .collect()
    }

    pub fn accepts(&self, t: &LTree) -> bool {
        t.max_arity() <= self.arity && self.run_states(t).iter().any(|q| self.initial.contains(q))
    }

    /// States from which some finite tree is accepted.
    pub fn productive(&self) -> BTreeSet<usize> {
        let mut good = BTreeSet::new();
        loop {
            let before = good.len();
            for (q, _, qs) in &self.transitions {
                if qs.iter().all(|p| good.contains(p)) {
                    good.insert(*q);
                }
            }
            if good.len() == before {
                return good;
            }
        }
    }

    pub fn is_empty(&self) -> bool {
        self.productive().is_disjoint(&self.initial)
    }
}

/// Whether `L(n1) ∩ L(n2)` is empty, by reachability in the product.
pub fn product_emptiness(n1: &Nta, n2: &Nta) -> bool {
    let mut by_label: HashMap<(&Label, usize), Vec<(usize, &Vec<usize>)>> = HashMap::new();
    for (q, a, qs) in &n2.transitions {
        by_label.entry((a, qs.len())).or_default().push((*q, qs));
    }
    let mut good: BTreeSet<(usize, usize)> = BTreeSet::new();
    loop {
        let before = good.len();
        for (q1, a, qs1) in &n1.transitions {
            for (q2, qs2) in by_label.get(&(a, qs1.len())).into_iter().flatten() {
                if qs1.iter().zip(qs2.iter()).all(|(p1, p2)| good.contains(&(*p1, *p2))) {
                    good.insert((*q1, *q2));
                }
            }
        }
        if good.len() == before {
            break;
        }
    }
    !good.iter().any(|(a, b)| n1.initial.contains(a) && n2.initial.contains(b))
}

/// Directions: `-1` parent, `0` here, `i ≥ 1` the i-th child.
pub type Dir = i32;

/// Positive Boolean formulas over `Dir × Q`. `Monotone` is a monotone function of its atoms
/// given by a test on the set of atoms that hold (it is positive: adding true atoms never
/// falsifies it).
#[derive(Clone)]
pub enum Formula {
    True,
    False,
    Atom(Dir, usize),
    And(Vec<Formula>),
    Or(Vec<Formula>),
    Monotone(Vec<(Dir, usize)>, Arc<dyn Fn(&[bool]) -> bool + Send + Sync>),
}

impl std::fmt::Debug for Formula {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Formula::True => write!(f, "true"),
            Formula::False => write!(f, "false"),
            Formula::Atom(d, q) => write!(f, "({d},{q})"),
            Formula::And(v) => write!(f, "And{v:?}"),
            Formula::Or(v) => write!(f, "Or{v:?}"),
            Formula::Monotone(v, _) => write!(f, "Monotone{v:?}"),
        }
    }
}

impl Formula {
    pub fn eval(&self, holds: &mut dyn FnMut(Dir, usize) -> bool) -> bool {
        match self {
            Formula::True => true,
            Formula::False => false,
            Formula::Atom(d, q) => holds(*d, *q),
            Formula::And(v) => v.iter().all(|g| g.eval(holds)),
            Formula::Or(v) => v.iter().any(|g| g.eval(holds)),
            Formula::Monotone(atoms, test) => {
                let vals: Vec<bool> = atoms.iter().map(|(d, q)| holds(*d, *q)).collect();
                test(&vals)
            }
        }
    }

    pub fn or(v: Vec<Formula>) -> Formula {
        if v.is_empty() {
            Formula::False
        } else {
            Formula::Or(v)
        }
    }
}

pub type Transition = Arc<dyn Fn(usize, &Label) -> Formula + Send + Sync>;

/// Two-way alternating tree automaton over finite trees; runs are finite, so acceptance is a
/// least fixpoint.
#[derive(Clone)]
pub struct TwoAta {
    pub states: usize,
    pub initial: usize,
    pub arity: usize,
    pub delta: Transition,
    /// Labels used when the automaton is converted into an NTA.
    pub alphabet: Vec<Label>,
}

impl TwoAta {
    /// Pairs (node, state) with an accepting run, nodes in breadth-first order.
    pub fn run(&self, t: &LTree) -> Vec<BTreeSet<usize>> {
        let nodes = t.nodes();
        let mut index: HashMap<*const LTree, usize> = HashMap::new();
        for (i, n) in nodes.iter().enumerate() {
            index.insert(*n as *const _, i);
        }
        let mut parent = vec![None; nodes.len()];
        let mut kids = vec![vec![]; nodes.len()];
        for (i, n) in nodes.iter().enumerate() {
            for c in &n.children {
                let j = index[&(c as *const _)];
                parent[j] = Some(i);
                kids[i].push(j);
            }
        }
        let formulas: Vec<Vec<Formula>> =
            nodes.iter().map(|n| (0..self.states).map(|q| (self.delta)(q, &n.label)).collect()).collect();
        let mut s: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); nodes.len()];
        loop {
            let mut changed = false;
            for i in 0..nodes.len() {
                for q in 0..self.states {
                    if s[i].contains(&q) {
                        continue;
                    }
                    let cur = &s;
                    let mut holds = |d: Dir, p: usize| -> bool {
                        let j = match d {
                            0 => Some(i),
                            -1 => parent[i],
                            d if d >= 1 => kids[i].get(d as usize - 1).copied(),
                            _ => None,
                        };
                        j.is_some_and(|j| cur[j].contains(&p))
                    };
                    if formulas[i][q].eval(&mut holds) {
                        s[i].insert(q);
                        changed = true;
                    }
                }
            }
            if !changed {
                return s;
            }
        }
    }

    pub fn accepts(&self, t: &LTree) -> bool {
        t.max_arity() <= self.arity && self.run(t)[0].contains(&self.initial)
    }
}

/// Summary of a subtree: for each set of states assumed at the parent (a bitmask), the states
/// that hold at the subtree's root.
type Table = Vec<u64>;

fn summarize(ata: &TwoAta, label: &Label, kids: &[&Table]) -> Table {
    let q = ata.states;
    let formulas: Vec<Formula> = (0..q).map(|s| (ata.delta)(s, label)).collect();
    (0..(1u64 << q))
        .map(|parent| {
            let mut here = 0u64;
            loop {
                let mut next = here;
                for (s, f) in formulas.iter().enumerate() {
                    if next & (1 << s) != 0 {
                        continue;
                    }
                    let mut holds = |d: Dir, p: usize| match d {
                        0 => here & (1 << p) != 0,
                        -1 => parent & (1 << p) != 0,
                        d if d >= 1 => kids.get(d as usize - 1).is_some_and(|t| t[here as usize] & (1 << p) != 0),
                        _ => false,
                    };
                    if f.eval(&mut holds) {
                        next |= 1 << s;
                    }
                }
                if next == here {
                    break here;
                }
                here = next;
            }
        })
        .collect()
}

/// An NTA accepting the same trees (over the ATA's alphabet): its states are subtree
/// summaries, generated bottom-up until no new summary appears.
pub fn ata_to_nta(ata: &TwoAta, max_states: usize) -> Result<Nta> {
    if ata.states > 12 {
        return Err(Error::resource("alternating automaton states for conversion", 12, None));
    }
    let mut tables: Vec<Table> = vec![];
    let mut index: HashMap<Table, usize> = HashMap::new();
    let mut transitions: BTreeSet<(usize, Label, Vec<usize>)> = BTreeSet::new();
    loop {
        let known = tables.len();
        let mut fresh = vec![];
        for arity in 0..=ata.arity {
            let mut tuple = vec![0usize; arity];
            loop {
                if known > 0 || arity == 0 {
                    let kids: Vec<&Table> = tuple.iter().map(|i| &tables[*i]).collect();
                    for a in &ata.alphabet {
                        let t = summarize(ata, a, &kids);
                        let id = match index.get(&t) {
                            Some(i) => *i,
                            None => {
                                let i = tables.len() + fresh.len();
                                index.insert(t.clone(), i);
                                fresh.push(t);
                                if index.len() > max_states {
                                    return Err(Error::resource("NTA states", max_states as u64, None));
                                }
                                i
                            }
                        };
                        transitions.insert((id, a.clone(), tuple.clone()));
                    }
                }
                // next tuple over the known tables
                let mut i = 0;
                while i < arity {
                    tuple[i] += 1;
                    if tuple[i] < known.max(1) {
                        break;
                    }
                    tuple[i] = 0;
                    i += 1;
                }
                if i == arity || known == 0 {
                    break;
                }
            }
        }
        tables.extend(fresh);
        if tables.len() == known {
            break;
        }
    }
    let initial = tables.iter().enumerate().filter(|(_, t)| t[0] & (1 << ata.initial) != 0).map(|(i, _)| i).collect();
    Ok(Nta { states: tables.len(), initial, transitions: transitions.into_iter().collect(), arity: ata.arity })
}

/// The tree shapes admitted by 𝔄₁: every node carries a state (parent type, own type).
#[derive(Clone, Debug)]
pub struct A1 {
    pub graph: Arc<TypeGraph>,
    pub sigma: Signature,
    pub arity: usize,
    /// Require a parent link at every non-root node.
    pub weakly_rooted: bool,
}

impl A1 {
    /// The part of a type that may appear in labels.
    pub fn max_label(&self, t: usize) -> Label {
        let ty = &self.graph.types[t];
        let mut l: Label = ty
            .names()
            .filter(|n| self.sigma.concepts.contains(*n))
            .map(|n| Letter::Name(n.clone()))
            .collect();
        l.extend(ty.nominals().filter(|n| self.sigma.individuals.contains(*n)).map(|n| Letter::Nominal(n.clone())));
        for (r, a) in ty.nominal_edges() {
            if self.sigma.has_role_expr(&r) && self.sigma.individuals.contains(&a) {
                l.insert(Letter::ExNom(r, a));
            }
        }
        l
    }

    fn allowed(&self, parent: Option<usize>, t: usize, label: &Label) -> bool {
        let max = self.max_label(t);
        let mut linked = false;
        for l in label {
            match l {
                Letter::Role(r) => {
                    let Some(p) = parent else { return false };
                    if !self.sigma.has_role_expr(r) || !self.graph.succ.contains(&(p, r.clone(), t)) {
                        return false;
                    }
                    linked = true;
                }
                other => {
                    if !max.contains(other) {
                        return false;
                    }
                }
            }
        }
        !(self.weakly_rooted && parent.is_some() && !linked)
    }

    fn states_for(&self, t: &LTree, parent_type: Option<usize>) -> bool {
        let types = self.graph.types.len();
        (0..types).any(|ty| {
            let anchored = parent_type.is_some() || ty == self.graph.root;
            anchored
                && self.allowed(parent_type, ty, &t.label)
                && t.children.iter().all(|c| self.states_for(c, Some(ty)))
        })
    }

    /// Membership: some assignment of states `(⊥, τ_A)` at the root satisfies every transition.
    pub fn accepts(&self, t: &LTree) -> bool {
        t.max_arity() <= self.arity && self.allowed(None, self.graph.root, &t.label) && t.children.iter().all(|c| self.states_for(c, Some(self.graph.root)))
    }
}

/// `A1` for `O1 ∪ O2`, the concept name `A` and signature Σ.
pub fn build_a1(o1: &Ontology, o2: &Ontology, a: &Sym, sigma: &Signature, k: usize, weakly_rooted: bool) -> Result<A1> {
    let g = compute_types(&o1.union(o2), a, &EliConfig::default())?;
    Ok(A1 { graph: Arc::new(g), sigma: sigma.clone(), arity: k, weakly_rooted })
}

/// States of 𝔄₂.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Q2 {
    /// `q_C` for a concept name or nominal.
    Fact(Atom),
    /// `q_∃R.A'`.
    Ex(RoleExpr, Sym),
    /// `q_∃u.A'`.
    SomeU(Sym),
    /// `q_∃u.({a} ⊓ C)` with `C` a name or nominal.
    At(Sym, Atom),
    /// Label tests.
    Role(RoleExpr),
    ExNom(RoleExpr, Sym),
}

/// 𝔄₂ as an explicit state space over the shared oracle.
pub struct A2 {
    pub states: Vec<Q2>,
    pub index: HashMap<Q2, usize>,
    pub oracle: Arc<EliOracle>,
    pub ata: TwoAta,
}

impl A2 {
    pub fn state(&self, q: &Q2) -> Option<usize> {
        self.index.get(q).copied()
    }

    pub fn accepts(&self, t: &LTree) -> bool {
        self.ata.accepts(t)
    }
}

/// `A2` for `O1 ∪ O2`, the goal `B` at the root, Σ and arity `k`.
pub fn build_a2(o1: &Ontology, o2: &Ontology, b: &Sym, sigma: &Signature, k: usize) -> Result<A2> {
    let oracle = EliOracle::new(&o1.union(o2), EliConfig::default())?;
    let mut names: BTreeSet<Sym> = oracle.names.iter().filter(|n| !crate::normalize::is_fresh_name(n) && n.as_ref() != BOT_MARK).cloned().collect();
    names.extend(sigma.concepts.iter().cloned());
    names.insert(b.clone());
    let mut inds: BTreeSet<Sym> = oracle.nominals.clone();
    inds.extend(sigma.individuals.iter().cloned());
    let roles: BTreeSet<Sym> = signature_of(&oracle.tbox.ontology).roles.union(&sigma.roles).cloned().collect();
    let atoms: Vec<Atom> =
        names.iter().map(|n| Atom::Name(n.clone())).chain(inds.iter().map(|a| Atom::Nom(a.clone()))).collect();
    let mut states = vec![];
    for a in &atoms {
        states.push(Q2::Fact(a.clone()));
    }
    for r in &roles {
        for n in &names {
            states.push(Q2::Ex(RoleExpr::Name(r.clone()), n.clone()));
            states.push(Q2::Ex(RoleExpr::Inv(r.clone()), n.clone()));
        }
    }
    for n in &names {
        states.push(Q2::SomeU(n.clone()));
    }
    for a in &inds {
        for c in &atoms {
            states.push(Q2::At(a.clone(), c.clone()));
        }
    }
    for r in &sigma.roles {
        states.push(Q2::Role(RoleExpr::Name(r.clone())));
        states.push(Q2::Role(RoleExpr::Inv(r.clone())));
        for a in &sigma.individuals {
            states.push(Q2::ExNom(RoleExpr::Name(r.clone()), a.clone()));
            states.push(Q2::ExNom(RoleExpr::Inv(r.clone()), a.clone()));
        }
    }
    let index: HashMap<Q2, usize> = states.iter().cloned().enumerate().map(|(i, q)| (q, i)).collect();
    let initial = index[&Q2::Fact(Atom::Name(b.clone()))];

    // rule-1 premises: facts here, ∃u facts and facts at nominals
    let mut prem_atoms: Vec<(Dir, usize)> = vec![];
    let mut prem_of: Vec<Prem> = vec![];
    for a in &atoms {
        prem_atoms.push((0, index[&Q2::Fact(a.clone())]));
        prem_of.push(Prem::Here(Fact::Atom(a.clone())));
    }
    for n in &names {
        prem_atoms.push((0, index[&Q2::SomeU(n.clone())]));
        prem_of.push(Prem::Here(Fact::SomeU(n.clone())));
    }
    for a in &inds {
        for c in &atoms {
            prem_atoms.push((0, index[&Q2::At(a.clone(), c.clone())]));
            prem_of.push(Prem::At(a.clone(), Fact::Atom(c.clone())));
        }
    }
    let prem_of = Arc::new(prem_of);
    let prem_atoms = Arc::new(prem_atoms);
    let rule1 = {
        let oracle = oracle.clone();
        let prem_of = prem_of.clone();
        let prem_atoms = prem_atoms.clone();
        move |goal: Prem| -> Formula {
            let oracle = oracle.clone();
            let prem_of = prem_of.clone();
            Formula::Monotone(
                (*prem_atoms).clone(),
                Arc::new(move |vals: &[bool]| {
                    let set: BTreeSet<Prem> = vals.iter().zip(prem_of.iter()).filter(|(v, _)| **v).map(|(_, p)| p.clone()).collect();
                    match &goal {
                        Prem::Here(f) => oracle.entails_at_x(&set, f).unwrap_or(false),
                        Prem::At(a, f) => oracle.entails_at_nominal(&set, a, f).unwrap_or(false),
                    }
                }),
            )
        }
    };
    // `∃R.B'` shapes that entail a fact
    let mut ex_into: BTreeMap<Fact, Vec<usize>> = BTreeMap::new();
    for r in &roles {
        for n in &names {
            for role in [RoleExpr::Name(r.clone()), RoleExpr::Inv(r.clone())] {
                let facts = oracle.ex(&role, n)?;
                let q = index[&Q2::Ex(role.clone(), n.clone())];
                for f in facts.iter() {
                    ex_into.entry(f.clone()).or_default().push(q);
                }
            }
        }
    }
    let top = oracle.local(&BTreeSet::new())?;
    let broadcast = move |q: usize| -> Vec<Formula> {
        std::iter::once(-1).chain(1..=k as Dir).map(|d| Formula::Atom(d, q)).collect()
    };
    let st = states.clone();
    let ix = index.clone();
    let gamma = sigma.individuals.clone();
    let delta: Transition = Arc::new(move |q: usize, label: &Label| -> Formula {
        match &st[q] {
            Q2::Role(r) => {
                if label.contains(&Letter::Role(r.clone())) {
                    Formula::True
                } else {
                    Formula::False
                }
            }
            Q2::ExNom(r, a) => {
                if label.contains(&Letter::ExNom(r.clone(), a.clone())) {
                    Formula::True
                } else {
                    Formula::False
                }
            }
            Q2::Fact(c) => {
                let f = Fact::Atom(c.clone());
                let in_label = match c {
                    Atom::Top => true,
                    Atom::Name(n) => label.contains(&Letter::Name(n.clone())),
                    Atom::Nom(n) => label.contains(&Letter::Nominal(n.clone())),
                };
                if in_label || top.here.contains(&f) {
                    return Formula::True;
                }
                let mut v = vec![rule1(Prem::Here(f.clone()))];
                v.extend(ex_into.get(&f).into_iter().flatten().map(|e| Formula::Atom(0, *e)));
                Formula::or(v)
            }
            Q2::Ex(r, a) => {
                let qa = ix[&Q2::Fact(Atom::Name(a.clone()))];
                let mut v = vec![];
                if let Some(&back) = ix.get(&Q2::Role(r.inverse())) {
                    v.push(Formula::And(vec![Formula::Atom(0, back), Formula::Atom(-1, qa)]));
                }
                if let Some(&down) = ix.get(&Q2::Role(r.clone())) {
                    for i in 1..=k as Dir {
                        v.push(Formula::And(vec![Formula::Atom(i, qa), Formula::Atom(i, down)]));
                    }
                }
                for b in &gamma {
                    if let Some(&e) = ix.get(&Q2::ExNom(r.clone(), b.clone())) {
                        v.push(Formula::And(vec![Formula::Atom(0, e), Formula::Atom(0, ix[&Q2::At(b.clone(), Atom::Name(a.clone()))])]));
                    }
                }
                Formula::or(v)
            }
            Q2::SomeU(a) => {
                let f = Fact::SomeU(a.clone());
                if top.here.contains(&f) {
                    return Formula::True;
                }
                let mut v = vec![rule1(Prem::Here(f.clone()))];
                v.extend(broadcast(q));
                v.extend(ex_into.get(&f).into_iter().flatten().map(|e| Formula::Atom(0, *e)));
                Formula::or(v)
            }
            Q2::At(a, c) => {
                if *c == Atom::Nom(a.clone()) {
                    return Formula::True;
                }
                let f = Fact::Atom(c.clone());
                if top.at.get(a).is_some_and(|s| s.contains(&f)) {
                    return Formula::True;
                }
                let mut v = vec![rule1(Prem::At(a.clone(), f))];
                v.extend(broadcast(q));
                Formula::or(v)
            }
        }
    });
    let ata = TwoAta { states: states.len(), initial, arity: k, delta, alphabet: vec![] };
    Ok(A2 { states, index, oracle, ata })
}

/// Arity used for encodings: the number of CIs plus the number of Σ-individuals.
pub fn default_arity(o: &Ontology, sigma: &Signature) -> usize {
    (o.cis.len() + sigma.individuals.len()).max(1)
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
enum Key {
    /// A word without a visible parent: `ρ_A`, an anchor, or a subtree cut off from its parent
    /// by a role outside Σ.
    Top(usize),
    /// A word reached over a Σ-role, with the names that hold at its parent.
    Child(RoleExpr, usize, BTreeSet<Sym>),
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
struct Globals {
    nom: BTreeMap<Sym, BTreeSet<Fact>>,
    someu: BTreeSet<Sym>,
    /// Facts pushed into anchor words over nominal edges.
    hub_in: BTreeMap<usize, BTreeSet<Fact>>,
    inconsistent: bool,
}

/// Least fixpoint of the facts derivable in the Σ-reduct of the canonical model, one entry per
/// kind of word. This explores exactly the trees of 𝔄₁ that are maximal for their shape, and the
/// facts it derives are those 𝔄₂ proves; both are monotone, so nonemptiness of the product
/// reduces to the maximal trees.
struct Decider<'a> {
    g: &'a TypeGraph,
    oracle: Arc<EliOracle>,
    sigma: &'a Signature,
    table: BTreeMap<Key, BTreeSet<Fact>>,
    glob: Globals,
    cap: usize,
}

fn names_of(s: &BTreeSet<Fact>) -> BTreeSet<Sym> {
    s.iter().filter_map(|f| if let Fact::Atom(Atom::Name(n)) = f { Some(n.clone()) } else { None }).collect()
}

impl Decider<'_> {
    fn visible(&self, r: &RoleExpr) -> bool {
        self.sigma.has_role_expr(r)
    }

    fn label(&self, t: usize, top: bool) -> BTreeSet<Fact> {
        let ty = &self.g.types[t];
        let mut s: BTreeSet<Fact> = ty
            .names()
            .filter(|n| self.sigma.concepts.contains(*n))
            .map(|n| Fact::Atom(Atom::Name(n.clone())))
            .collect();
        if top {
            s.extend(ty.nominals().filter(|n| self.sigma.individuals.contains(*n)).map(|n| Fact::Atom(Atom::Nom(n.clone()))));
        }
        s
    }

    fn absorb(&mut self, s: &mut BTreeSet<Fact>, facts: &BTreeSet<Fact>) -> bool {
        let mut grew = false;
        for f in facts {
            if *f == Fact::Atom(Atom::Name(sym(BOT_MARK))) {
                self.glob.inconsistent = true;
            }
            grew |= s.insert(f.clone());
        }
        grew
    }

    fn eval(&mut self, key: &Key, next: &mut Globals) -> Result<BTreeSet<Fact>> {
        let (t, parent) = match key {
            Key::Top(t) => (*t, None),
            Key::Child(r, t, h) => (*t, Some((r.clone(), h.clone()))),
        };
        let is_top = parent.is_none();
        let mut s = self.label(t, is_top);
        if is_top {
            if let Some(h) = self.glob.hub_in.get(&t) {
                s.extend(h.iter().cloned());
            }
        }
        s.extend(self.glob.someu.iter().map(|b| Fact::SomeU(b.clone())));
        let succ = self.g.successors(t);
        let noms = self.g.types[t].nominal_edges();
        loop {
            let mut grew = false;
            let mut prem: BTreeSet<Prem> = s.iter().map(|f| Prem::Here(f.clone())).collect();
            for (a, fs) in &self.glob.nom {
                prem.extend(fs.iter().map(|f| Prem::At(a.clone(), f.clone())));
            }
            let c = self.oracle.local(&prem)?;
            if c.inconsistent {
                self.glob.inconsistent = true;
                return Ok(s);
            }
            grew |= self.absorb(&mut s, &c.here);
            for (a, fs) in &c.at {
                next.nom.entry(a.clone()).or_default().extend(fs.iter().cloned());
            }
            if let Some((r, h)) = &parent {
                for n in h {
                    let e = self.oracle.ex(&r.inverse(), n)?;
                    grew |= self.absorb(&mut s, &e);
                }
            }
            for (r, u) in &succ {
                if !self.visible(r) {
                    continue;
                }
                let k = Key::Child(r.clone(), *u, names_of(&s));
                let cs = match self.table.get(&k) {
                    Some(cs) => cs.clone(),
                    None => {
                        if self.table.len() >= self.cap {
                            return Err(Error::resource("existence table entries", self.cap as u64, None));
                        }
                        self.table.insert(k, BTreeSet::new());
                        BTreeSet::new()
                    }
                };
                for n in names_of(&cs) {
                    let e = self.oracle.ex(r, &n)?;
                    grew |= self.absorb(&mut s, &e);
                }
            }
            for (r, a) in &noms {
                if !self.visible(r) {
                    continue;
                }
                let Some(hub) = self.g.nominal_type(a) else { continue };
                let hs = self.table.get(&Key::Top(hub)).cloned().unwrap_or_default();
                for n in names_of(&hs) {
                    let e = self.oracle.ex(r, &n)?;
                    grew |= self.absorb(&mut s, &e);
                }
            }
            if !grew {
                break;
            }
        }
        for (r, a) in &noms {
            if !self.visible(r) {
                continue;
            }
            let Some(hub) = self.g.nominal_type(a) else { continue };
            for n in names_of(&s) {
                let e = self.oracle.ex(&r.inverse(), &n)?;
                next.hub_in.entry(hub).or_default().extend(e.iter().cloned());
            }
        }
        next.someu.extend(s.iter().filter_map(|f| if let Fact::SomeU(b) = f { Some(b.clone()) } else { None }));
        Ok(s)
    }

    /// Parts of the Σ-reduct: anchors and cut-off subtrees, restricted to the component of the
    /// root when the universal role is not available.
    fn parts(&self, universal: bool) -> BTreeSet<usize> {
        let mut cands: BTreeSet<usize> = self.g.roots().into_iter().collect();
        cands.insert(self.g.root);
        for (_, r, u) in &self.g.succ {
            if !self.visible(r) {
                cands.insert(*u);
            }
        }
        if universal {
            return cands;
        }
        // hubs touched by the visible subtree of each type
        let n = self.g.types.len();
        let mut touch: Vec<BTreeSet<usize>> = (0..n)
            .map(|t| {
                self.g.types[t]
                    .nominal_edges()
                    .into_iter()
                    .filter(|(r, _)| self.visible(r))
                    .filter_map(|(_, a)| self.g.nominal_type(&a))
                    .collect()
            })
            .collect();
        loop {
            let mut changed = false;
            for (t, r, u) in &self.g.succ {
                if self.visible(r) && *t != *u {
                    let add: Vec<usize> = touch[*u].difference(&touch[*t]).copied().collect();
                    if !add.is_empty() {
                        touch[*t].extend(add);
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }
        let mut comp: BTreeSet<usize> = BTreeSet::from([self.g.root]);
        loop {
            let mut changed = false;
            for &p in &cands {
                let linked = comp.contains(&p) || touch[p].iter().any(|h| comp.contains(h));
                if linked {
                    changed |= comp.insert(p);
                    for h in &touch[p] {
                        changed |= comp.insert(*h);
                    }
                }
            }
            if !changed {
                return comp;
            }
        }
    }

    fn solve(&mut self, universal: bool) -> Result<()> {
        for p in self.parts(universal) {
            self.table.insert(Key::Top(p), BTreeSet::new());
        }
        loop {
            let mut next = Globals { inconsistent: self.glob.inconsistent, ..self.glob.clone() };
            let mut changed = false;
            let keys: Vec<Key> = self.table.keys().cloned().collect();
            for k in &keys {
                let s = self.eval(k, &mut next)?;
                if self.glob.inconsistent {
                    return Ok(());
                }
                if self.table.get(k) != Some(&s) {
                    self.table.insert(k.clone(), s);
                    changed = true;
                }
            }
            if self.table.len() > keys.len() {
                changed = true;
            }
            if next != self.glob {
                self.glob = next;
                changed = true;
            }
            if !changed {
                return Ok(());
            }
        }
    }
}

/// Options of the existence decision.
#[derive(Clone, Debug)]
pub struct ExistenceConfig {
    pub eli: EliConfig,
    pub max_entries: usize,
}

impl Default for ExistenceConfig {
    fn default() -> Self {
        ExistenceConfig { eli: EliConfig::default(), max_entries: 1 << 16 }
    }
}

/// `O1 ∪ O2, A^Σ ⊨ B(ρ_A)` for normal-form inputs, where `A^Σ` is the Σ-reduct of the
/// canonical model of `A` (its component of `ρ_A` without the universal role).
pub fn interpolant_exists_eli(o1: &Ontology, o2: &Ontology, a: &Sym, b: &Sym, sigma: &Signature, universal: bool, cfg: &ExistenceConfig) -> Result<bool> {
    let o = o1.union(o2);
    let g = compute_types(&o, a, &cfg.eli)?;
    let oracle = EliOracle::from_tbox(crate::eli_engine::EliTbox::compile(&g.ontology)?, cfg.eli.clone());
    let mut d = Decider { g: &g, oracle, sigma, table: BTreeMap::new(), glob: Globals::default(), cap: cfg.max_entries };
    d.solve(universal)?;
    if d.glob.inconsistent {
        return Ok(true);
    }
    Ok(d.table.get(&Key::Top(g.root)).is_some_and(|s| s.contains(&Fact::Atom(Atom::Name(b.clone())))))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::textio::parse_ontology;

    fn lab(ls: &[Letter]) -> Label {
        ls.iter().cloned().collect()
    }

    fn name(n: &str) -> Letter {
        Letter::Name(sym(n))
    }

    #[test]
    fn codec_examples() {
        let p = abox_from_tree(&LTree::leaf(lab(&[name("B")])));
        assert_eq!(p.abox.len(), 2);
        let t = LTree { label: lab(&[]), children: vec![LTree::leaf(lab(&[Letter::Role(RoleExpr::name("r")), name("C")]))] };
        let p = abox_from_tree(&t);
        assert!(p.abox.contains(&Assertion::Role(sym("r"), p.root, Var(1))));
        assert!(p.abox.contains(&Assertion::Concept(sym("C"), Var(1))));
        let t = LTree::leaf(lab(&[Letter::ExNom(RoleExpr::name("s"), sym("c"))]));
        let p = abox_from_tree(&t);
        let z = Var(1);
        assert!(p.abox.contains(&Assertion::Role(sym("s"), p.root, z)));
        assert!(p.abox.contains(&Assertion::Nominal(sym("c"), z)));
        assert_eq!(tree_from_abox(&p, 2).unwrap(), t);
    }

    #[test]
    fn empty_initial_means_empty_language() {
        let n = Nta { states: 1, initial: BTreeSet::new(), transitions: vec![(0, Label::new(), vec![])], arity: 1 };
        assert!(n.is_empty());
        let m = Nta { initial: BTreeSet::from([0]), ..n.clone() };
        assert!(!m.is_empty());
        assert!(product_emptiness(&n, &m) && product_emptiness(&m, &n));
        assert!(!product_emptiness(&m, &m));
    }

    #[test]
    fn a2_label_tests() {
        let o = parse_ontology("A <= {a}\nexists r.B <= C").unwrap();
        let sigma = Signature::from_names(&["B"], &["r"], &["a"]);
        let a2 = build_a2(&o, &Ontology::empty(), &sym("C"), &sigma, 2).unwrap();
        let q = a2.state(&Q2::Role(RoleExpr::name("r"))).unwrap();
        assert!(matches!((a2.ata.delta)(q, &lab(&[Letter::Role(RoleExpr::name("r"))])), Formula::True));
        assert!(matches!((a2.ata.delta)(q, &lab(&[])), Formula::False));
        let q = a2.state(&Q2::At(sym("a"), Atom::Nom(sym("a")))).unwrap();
        assert!(matches!((a2.ata.delta)(q, &lab(&[])), Formula::True));
        let t = LTree { label: lab(&[]), children: vec![LTree::leaf(lab(&[Letter::Role(RoleExpr::name("r")), name("B")]))] };
        assert!(a2.accepts(&t));
        assert!(!a2.accepts(&LTree::leaf(lab(&[name("B")]))));
    }

    #[test]
    fn inverse_interpolant_exists() {
        let o1 = parse_ontology("A <= exists inv(r).E").unwrap();
        let o2 = parse_ontology("exists inv(r).E <= B").unwrap();
        let sigma = Signature::from_names(&["E"], &["r"], &[]);
        let cfg = ExistenceConfig::default();
        assert!(interpolant_exists_eli(&o1, &o2, &sym("A"), &sym("B"), &sigma, true, &cfg).unwrap());
        assert!(interpolant_exists_eli(&o1, &o2, &sym("A"), &sym("B"), &sigma, false, &cfg).unwrap());
        let small = Signature::from_names(&["E"], &[], &[]);
        assert!(!interpolant_exists_eli(&o1, &o2, &sym("A"), &sym("B"), &small, true, &cfg).unwrap());
    }

    fn role(r: &str) -> Letter {
        Letter::Role(RoleExpr::name(r))
    }

    fn inv(r: &str) -> Letter {
        Letter::Role(RoleExpr::Inv(sym(r)))
    }

    /// All trees with at most `max` nodes, root labels from `roots`, other labels from `inner`.
    fn trees(max: usize, roots: &[Label], inner: &[Label]) -> Vec<LTree> {
        fn forests(budget: usize, inner: &[Label]) -> Vec<(Vec<LTree>, usize)> {
            // ordered forests of total size <= budget
            let mut out = vec![(vec![], 0)];
            for first in 1..=budget {
                for t in subtrees(first, inner) {
                    for (rest, used) in forests(budget - first, inner) {
                        let mut f = vec![t.clone()];
                        f.extend(rest);
                        out.push((f, first + used));
                    }
                }
            }
            out
        }
        fn subtrees(size: usize, inner: &[Label]) -> Vec<LTree> {
            let mut out = vec![];
            for (kids, used) in forests(size - 1, inner) {
                if used == size - 1 {
                    for l in inner {
                        out.push(LTree { label: l.clone(), children: kids.clone() });
                    }
                }
            }
            out
        }
        let mut out = vec![];
        for (kids, _) in forests(max - 1, inner) {
            for l in roots {
                out.push(LTree { label: l.clone(), children: kids.clone() });
            }
        }
        out
    }

    fn subsets(letters: &[Letter]) -> Vec<Label> {
        (0..1u32 << letters.len())
            .map(|m| letters.iter().enumerate().filter(|(i, _)| m & (1 << i) != 0).map(|(_, l)| l.clone()).collect())
            .collect()
    }

    #[test]
    fn tree_enumeration_counts() {
        let one = [Label::new()];
        // ordered trees by size: 1, 1, 2, 5
        assert_eq!(trees(1, &one, &one).len(), 1);
        assert_eq!(trees(3, &one, &one).len(), 1 + 1 + 2);
        assert_eq!(trees(4, &one, &one).len(), 1 + 1 + 2 + 5);
    }

    fn a2_agrees_with_completion(o1: &Ontology, o2: &Ontology, b: &str, sigma: &Signature, roots: &[Label], inner: &[Label]) -> (usize, usize) {
        let a2 = build_a2(o1, o2, &sym(b), sigma, 3).unwrap();
        let tb = crate::eli_engine::EliTbox::compile(&o1.union(o2)).unwrap();
        let mut positive = 0;
        let all = trees(4, roots, inner);
        for t in &all {
            let p = abox_from_tree(t);
            let c = crate::eli_engine::Completion::run(&tb, &p.abox, &[], &EliConfig::default()).unwrap();
            let expected = c.inconsistent() || c.holds_atom(p.root, &Atom::Name(sym(b)));
            assert_eq!(a2.accepts(t), expected, "{t:?}");
            positive += usize::from(expected);
        }
        (positive, all.len())
    }

    #[test]
    fn a2_membership_matches_entailment_on_small_trees() {
        let o1 = parse_ontology("A <= exists inv(r).E").unwrap();
        let o2 = parse_ontology("exists inv(r).E <= B\nexists r.D <= E\nE & D <= F\nexists inv(s).F <= B").unwrap();
        let sigma = Signature::from_names(&["D", "E", "F"], &["r", "s"], &[]);
        let roots = subsets(&[name("D"), name("E")]);
        let mut inner = vec![];
        for r in [role("r"), inv("r"), role("s")] {
            for mut l in subsets(&[name("D"), name("E")]) {
                l.insert(r.clone());
                inner.push(l);
            }
        }
        let (pos, total) = a2_agrees_with_completion(&o1, &o2, "B", &sigma, &roots, &inner);
        assert!(pos > 0 && pos < total, "{pos}/{total}");
    }

    #[test]
    fn a2_membership_on_inverse_example() {
        let o = parse_ontology(crate::textio::O_I).unwrap();
        let sigma = Signature::from_names(&["B", "D", "E"], &["r"], &[]);
        let p = crate::interp_el::DefinabilityProblem { o: o.clone(), a: sym("A"), sigma: sigma.clone(), universal: true }.to_interpolation();
        let goal = p.c2.as_name().unwrap().to_string();
        let roots = vec![lab(&[]), lab(&[name("B")]), lab(&[name("B"), name("E")])];
        let inner = vec![
            lab(&[role("r")]),
            lab(&[role("r"), name("D")]),
            lab(&[role("r"), name("D"), name("E")]),
            lab(&[inv("r"), name("B")]),
            lab(&[role("r"), name("B")]),
            lab(&[inv("r")]),
        ];
        a2_agrees_with_completion(&p.o1, &p.o2, &goal, &sigma, &roots, &inner);
    }

    #[test]
    fn a1_on_empty_ontology() {
        let sigma = Signature::from_names(&["A", "B"], &["r"], &[]);
        let a1 = build_a1(&Ontology::empty(), &Ontology::empty(), &sym("A"), &sigma, 2, false).unwrap();
        assert!(a1.accepts(&LTree::leaf(lab(&[name("A")]))));
        assert!(a1.accepts(&LTree::leaf(lab(&[]))));
        assert!(!a1.accepts(&LTree::leaf(lab(&[name("B")]))));
        let t = LTree { label: lab(&[name("A")]), children: vec![LTree::leaf(lab(&[role("r")]))] };
        assert!(!a1.accepts(&t));
    }

    #[test]
    fn a1_accepts_the_inverse_example_tree() {
        let o = parse_ontology(crate::textio::O_I).unwrap();
        let sigma = Signature::from_names(&["B", "D", "E"], &["r"], &[]);
        let a1 = build_a1(&o, &Ontology::empty(), &sym("A"), &sigma, 3, false).unwrap();
        let t = LTree { label: lab(&[name("B")]), children: vec![LTree::leaf(lab(&[role("r"), name("D"), name("E")]))] };
        assert!(a1.accepts(&t));
        let deeper = LTree { label: lab(&[name("B")]), children: vec![LTree { label: lab(&[role("r"), name("D")]), children: vec![LTree::leaf(lab(&[role("r")]))] }] };
        assert!(!a1.accepts(&deeper));
        assert!(!a1.accepts(&LTree { label: lab(&[name("B")]), children: vec![LTree::leaf(lab(&[inv("r"), name("D")]))] }));
    }

    /// Brute-force homomorphism between ABoxes, root to root.
    fn maps_into(src: &PointedABox, dst: &PointedABox) -> bool {
        let vars: Vec<Var> = src.abox.vars().into_iter().collect();
        let targets: Vec<Var> = dst.abox.vars().into_iter().collect();
        let edges: BTreeSet<(Sym, Var, Var)> = dst.abox.role_edges().map(|(r, x, y)| (r.clone(), x, y)).collect();
        fn go(i: usize, vars: &[Var], targets: &[Var], m: &mut BTreeMap<Var, Var>, src: &PointedABox, dst: &PointedABox, edges: &BTreeSet<(Sym, Var, Var)>) -> bool {
            if i == vars.len() {
                return true;
            }
            let x = vars[i];
            let cands: Vec<Var> = if x == src.root { vec![dst.root] } else { targets.to_vec() };
            for y in cands {
                if !src.abox.concepts_at(x).is_subset(&dst.abox.concepts_at(y)) || !src.abox.nominals_at(x).is_subset(&dst.abox.nominals_at(y)) {
                    continue;
                }
                m.insert(x, y);
                let ok = src.abox.role_edges().all(|(r, a, b)| match (m.get(&a), m.get(&b)) {
                    (Some(a2), Some(b2)) => edges.contains(&(r.clone(), *a2, *b2)),
                    _ => true,
                });
                if ok && go(i + 1, vars, targets, m, src, dst, edges) {
                    return true;
                }
                m.remove(&x);
            }
            false
        }
        go(0, &vars, &targets, &mut BTreeMap::new(), src, dst, &edges)
    }

    #[test]
    fn a1_trees_map_into_the_canonical_tree() {
        let o = parse_ontology("A <= exists r.B & exists inv(s).C\nB <= exists r.C\nC & exists inv(r).B <= D").unwrap();
        let sigma = Signature::from_names(&["B", "C", "D"], &["r", "s"], &[]);
        let a1 = build_a1(&o, &Ontology::empty(), &sym("A"), &sigma, 2, false).unwrap();
        let g = Arc::new(compute_types(&o, &sym("A"), &EliConfig::default()).unwrap());
        let (canon, _) = crate::eli_engine::canonical_tree(&g, 4, 1 << 12).unwrap().to_abox(Some(&sigma));
        let roots = vec![lab(&[])];
        let mut inner = vec![];
        for r in [role("r"), inv("s"), inv("r")] {
            for mut l in subsets(&[name("B"), name("C"), name("D")]) {
                l.insert(r.clone());
                inner.push(l);
            }
        }
        let mut accepted = 0;
        for t in trees(4, &roots, &inner) {
            if a1.accepts(&t) {
                accepted += 1;
                assert!(maps_into(&abox_from_tree(&t), &canon), "{t:?}");
            }
        }
        assert!(accepted > 3);
    }

    #[test]
    fn codec_round_trip() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        fn gen(rng: &mut rand_chacha::ChaCha8Rng, depth: usize, root: bool) -> LTree {
            let mut label = Label::new();
            for n in ["A", "B"] {
                if rng.gen_bool(0.4) {
                    label.insert(Letter::Name(sym(n)));
                }
            }
            if !label.is_empty() && rng.gen_bool(0.2) {
                label.insert(Letter::Nominal(sym("a")));
            }
            if rng.gen_bool(0.2) {
                let r = if rng.gen_bool(0.5) { RoleExpr::name("s") } else { RoleExpr::Inv(sym("s")) };
                label.insert(Letter::ExNom(r, sym(if rng.gen_bool(0.5) { "b" } else { "c" })));
            }
            if !root {
                let r = if rng.gen_bool(0.5) { RoleExpr::name("r") } else { RoleExpr::Inv(sym("r")) };
                label.insert(Letter::Role(r));
            }
            let kids = if depth == 0 { 0 } else { rng.gen_range(0..=3) };
            LTree { label, children: (0..kids).map(|_| gen(rng, depth - 1, false)).collect() }
        }
        for _ in 0..1000 {
            let t = gen(&mut rng, 3, true);
            let back = tree_from_abox(&abox_from_tree(&t), 3).unwrap();
            assert_eq!(back.canonical(), t.canonical());
        }
        let wide = LTree { label: lab(&[]), children: vec![LTree::leaf(lab(&[role("r")])); 3] };
        assert!(matches!(tree_from_abox(&abox_from_tree(&wide), 2), Err(Error::Arity(_))));
    }

    #[test]
    fn ata_to_nta_preserves_membership() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let alphabet = vec![lab(&[]), lab(&[name("X")])];
        fn atom(rng: &mut rand_chacha::ChaCha8Rng, q: usize) -> Formula {
            match rng.gen_range(0..10) {
                0 => Formula::True,
                1 => Formula::False,
                _ => Formula::Atom(rng.gen_range(-1..=2), rng.gen_range(0..q)),
            }
        }
        fn formula(rng: &mut rand_chacha::ChaCha8Rng, q: usize, depth: usize) -> Formula {
            if depth == 0 || rng.gen_bool(0.3) {
                return atom(rng, q);
            }
            let parts = (0..rng.gen_range(1..=3)).map(|_| formula(rng, q, depth - 1)).collect();
            if rng.gen_bool(0.5) {
                Formula::And(parts)
            } else {
                Formula::Or(parts)
            }
        }
        let shapes = trees(3, &alphabet, &alphabet);
        for _ in 0..20 {
            let q = 3;
            let table: Vec<Vec<Formula>> = (0..q).map(|_| (0..alphabet.len()).map(|_| formula(&mut rng, q, 2)).collect()).collect();
            let labels = alphabet.clone();
            let delta: Transition = Arc::new(move |s, l| {
                let i = labels.iter().position(|x| x == l).unwrap();
                table[s][i].clone()
            });
            let ata = TwoAta { states: q, initial: 0, arity: 2, delta, alphabet: alphabet.clone() };
            let nta = ata_to_nta(&ata, 1 << 12).unwrap();
            for t in &shapes {
                assert_eq!(nta.accepts(t), ata.accepts(t), "{t:?}");
            }
        }
    }

    #[test]
    fn product_emptiness_is_symmetric() {
        let a = Nta { states: 2, initial: BTreeSet::from([0]), transitions: vec![(1, lab(&[]), vec![]), (0, lab(&[name("X")]), vec![1])], arity: 1 };
        let b = Nta { states: 1, initial: BTreeSet::from([0]), transitions: vec![(0, lab(&[]), vec![])], arity: 1 };
        assert_eq!(product_emptiness(&a, &b), product_emptiness(&b, &a));
        assert!(product_emptiness(&a, &b));
        assert!(!product_emptiness(&a, &a));
    }

    #[test]
    fn automata_existence_matches_el_pipeline() {
        for e in crate::textio::load_corpus() {
            if e.ontology.inferred_dialect().inverse_roles || !e.ontology.ris.is_empty() {
                continue;
            }
            for u in [true, false] {
                let p = crate::interp_el::DefinabilityProblem { o: e.ontology.clone(), a: e.focus.clone(), sigma: e.sigma.clone(), universal: u };
                let el = crate::interp_el::explicit_def_exists(&p).unwrap();
                let eli = crate::interp_eli::explicit_def_exists(&p).unwrap();
                assert_eq!(el, eli, "{} u={u}", e.name);
            }
        }
    }

}
