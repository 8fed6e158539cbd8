//! Reasoning for ELIO_u: a completion procedure over contexts, the rule fixpoint for
//! assertion entailment, Ω-types, bounded canonical trees and undirected unfoldings.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet, VecDeque};
use std::sync::{Arc, Mutex};

pub use crate::el_engine::Atom;
use crate::normalize::{is_normal, to_normal_form_salted, FreshNames};
use crate::types::*;
use crate::{Error, Result};

#[derive(Clone, Debug)]
pub struct EliConfig {
    pub max_contexts: usize,
    pub max_types: usize,
    pub max_rounds: usize,
}

impl Default for EliConfig {
    fn default() -> Self {
        EliConfig { max_contexts: 1 << 16, max_types: 1 << 12, max_rounds: 1 << 16 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Concl {
    Atom(usize),
    Bot,
    Exists(usize, usize),
    ExistsU(usize),
}

/// A normal-form ELIO_u ontology compiled into rule indexes. Role ids come in pairs:
/// `2k` is a role name and `2k + 1` its inverse.
#[derive(Clone, Debug)]
pub struct EliTbox {
    pub ontology: Ontology,
    atoms: Vec<Atom>,
    atom_ix: HashMap<Atom, usize>,
    roles: Vec<RoleExpr>,
    role_ix: HashMap<RoleExpr, usize>,
    unary: HashMap<usize, Vec<Concl>>,
    binary: HashMap<usize, Vec<(usize, Concl)>>,
    ex_left: HashMap<(usize, usize), Vec<usize>>,
    u_left: HashMap<usize, Vec<usize>>,
    /// For a role `R`: the atoms a node passes on to a fresh `R`-successor.
    relevant: HashMap<usize, BTreeSet<usize>>,
    pub individuals: BTreeSet<Sym>,
}

fn inv(r: usize) -> usize {
    r ^ 1
}

/// Rewrites `∃R.⊤ ⊑ A` and `∃R.{a} ⊑ A` to `∃R.X ⊑ A` with `⊤ ⊑ X` or `{a} ⊑ X`, so that
/// every left-hand existential has a concept name as filler.
fn name_existential_fillers(o: &Ontology) -> Ontology {
    let mut fresh = FreshNames::new("F", &signature_of(o));
    let mut named: BTreeMap<Concept, Sym> = BTreeMap::new();
    let mut cis = Vec::new();
    for ci in &o.cis {
        match ci.lhs.node() {
            Node::Exists(r, d) if d.is_top() || d.as_nominal().is_some() => {
                let x = named.entry(d.clone()).or_insert_with(|| fresh.plain("filler")).clone();
                cis.push(CI::new(Concept::exists(r.clone(), Concept::name_sym(x)), ci.rhs.clone()));
            }
            _ => cis.push(ci.clone()),
        }
    }
    for (d, x) in named {
        cis.push(CI::new(d, Concept::name_sym(x)));
    }
    let mut out = Ontology::new(cis, o.ris.clone());
    out.dialect = out.dialect.join(o.dialect);
    out
}

fn intern_atom(atoms: &mut Vec<Atom>, ix: &mut HashMap<Atom, usize>, a: &Atom) -> usize {
    if let Some(i) = ix.get(a) {
        return *i;
    }
    atoms.push(a.clone());
    ix.insert(a.clone(), atoms.len() - 1);
    atoms.len() - 1
}

fn intern_role(roles: &mut Vec<RoleExpr>, ix: &mut HashMap<RoleExpr, usize>, r: &RoleExpr) -> usize {
    if let Some(i) = ix.get(r) {
        return *i;
    }
    let base = r.base().expect("named role").clone();
    let n = roles.len();
    roles.push(RoleExpr::Name(base.clone()));
    roles.push(RoleExpr::Inv(base.clone()));
    ix.insert(RoleExpr::Name(base.clone()), n);
    ix.insert(RoleExpr::Inv(base), n + 1);
    ix[r]
}

impl EliTbox {
    pub fn compile(o: &Ontology) -> Result<Arc<EliTbox>> {
        if !o.ris.is_empty() {
            return Err(Error::Dialect("role inclusions are not supported together with inverse roles".into()));
        }
        let o = if o.cis.iter().all(is_normal) { o.clone() } else { to_normal_form_salted(o, "I").ontology };
        let o = name_existential_fillers(&o);
        let mut t = EliTbox {
            ontology: o.clone(),
            atoms: vec![],
            atom_ix: HashMap::new(),
            roles: vec![],
            role_ix: HashMap::new(),
            unary: HashMap::new(),
            binary: HashMap::new(),
            ex_left: HashMap::new(),
            u_left: HashMap::new(),
            relevant: HashMap::new(),
            individuals: signature_of(&o).individuals,
        };
        t.atom(&Atom::Top);
        let bot = t.atom(&Atom::Name(sym(BOT_MARK)));
        t.unary.entry(bot).or_default().push(Concl::Bot);
        for ci in &o.cis {
            t.add_ci(ci)?;
        }
        for &(r, a) in t.ex_left.keys() {
            t.relevant.entry(inv(r)).or_default().insert(a);
        }
        Ok(Arc::new(t))
    }

    fn atom(&mut self, a: &Atom) -> usize {
        intern_atom(&mut self.atoms, &mut self.atom_ix, a)
    }

    fn role(&mut self, r: &RoleExpr) -> usize {
        intern_role(&mut self.roles, &mut self.role_ix, r)
    }

    fn atom_of(&mut self, c: &Concept) -> Result<usize> {
        let a = Atom::of(c).ok_or_else(|| Error::Invalid(format!("expected an atomic concept, found {c}")))?;
        Ok(self.atom(&a))
    }

    fn concl(&mut self, c: &Concept) -> Result<Option<Concl>> {
        Ok(Some(match c.node() {
            Node::Bot => Concl::Bot,
            Node::Top => return Ok(None),
            Node::Name(_) | Node::Nominal(_) => Concl::Atom(self.atom_of(c)?),
            Node::Exists(RoleExpr::Universal, d) => Concl::ExistsU(self.atom_of(d)?),
            Node::Exists(r, d) => {
                let r = self.role(r);
                Concl::Exists(r, self.atom_of(d)?)
            }
            _ => return Err(Error::Invalid(format!("unexpected right-hand side {c}"))),
        }))
    }

    fn add_ci(&mut self, ci: &CI) -> Result<()> {
        let Some(concl) = self.concl(&ci.rhs)? else { return Ok(()) };
        match ci.lhs.node() {
            Node::Bot => {}
            Node::And(cs) if cs.len() == 2 => {
                let a = self.atom_of(&cs[0])?;
                let b = self.atom_of(&cs[1])?;
                self.binary.entry(a).or_default().push((b, concl));
                self.binary.entry(b).or_default().push((a, concl));
            }
            Node::Exists(r, d) => {
                let Concl::Atom(x) = concl else {
                    return Err(Error::Invalid(format!("unexpected CI {ci}")));
                };
                let a = self.atom_of(d)?;
                match r {
                    RoleExpr::Universal => self.u_left.entry(a).or_default().push(x),
                    r => {
                        let r = self.role(r);
                        self.ex_left.entry((r, a)).or_default().push(x);
                    }
                }
            }
            _ => {
                let a = self.atom_of(&ci.lhs)?;
                self.unary.entry(a).or_default().push(concl);
            }
        }
        Ok(())
    }

    /// Concept names of the compiled (normal-form) ontology.
    pub fn names(&self) -> BTreeSet<Sym> {
        signature_of(&self.ontology).concepts
    }
}

/// Node keys of a completion. Generic contexts stand for every element that is an
/// `R`-successor of something whose relevant atoms are `mask` and that satisfies `filler`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Ctx {
    Var(Var),
    Nominal(Sym),
    Gen { filler: usize, role: Option<usize>, mask: Vec<usize> },
}

#[derive(Clone, Copy, Debug)]
enum Task {
    Label(usize, usize),
    Edge(usize, usize, usize),
    Merge(usize, usize),
    Fire(usize, usize, usize),
}

/// Least fixpoint of the completion rules. Information flows from a successor to its
/// predecessor along every edge, and into a node only when that node is unique
/// (an ABox individual or a nominal); generic contexts get their inverse-role input
/// from the mask in their key.
#[derive(Clone, Debug)]
pub struct Completion {
    pub tbox: Arc<EliTbox>,
    atoms: Vec<Atom>,
    atom_ix: HashMap<Atom, usize>,
    roles: Vec<RoleExpr>,
    role_ix: HashMap<RoleExpr, usize>,
    nodes: Vec<Ctx>,
    node_ix: HashMap<Ctx, usize>,
    uf: Vec<usize>,
    unique: Vec<bool>,
    labels: Vec<HashSet<usize>>,
    succ: Vec<Vec<(usize, usize)>>,
    pred: Vec<Vec<(usize, usize)>>,
    edges: HashSet<(usize, usize, usize)>,
    fired: Vec<Vec<(usize, usize)>>,
    present: HashSet<usize>,
    global: Vec<usize>,
    global_set: HashSet<usize>,
    inconsistent: bool,
    queue: VecDeque<Task>,
    cap: usize,
}

impl Completion {
    pub fn run(tbox: &Arc<EliTbox>, abox: &ABox, activate: &[Sym], cfg: &EliConfig) -> Result<Completion> {
        let mut c = Completion {
            tbox: tbox.clone(),
            atoms: tbox.atoms.clone(),
            atom_ix: tbox.atom_ix.clone(),
            roles: tbox.roles.clone(),
            role_ix: tbox.role_ix.clone(),
            nodes: vec![],
            node_ix: HashMap::new(),
            uf: vec![],
            unique: vec![],
            labels: vec![],
            succ: vec![],
            pred: vec![],
            edges: HashSet::new(),
            fired: vec![],
            present: HashSet::new(),
            global: vec![],
            global_set: HashSet::new(),
            inconsistent: false,
            queue: VecDeque::new(),
            cap: cfg.max_contexts,
        };
        for a in &tbox.individuals {
            c.node(Ctx::Nominal(a.clone()));
        }
        for v in abox.vars() {
            c.node(Ctx::Var(v));
        }
        for asr in &abox.assertions {
            match asr {
                Assertion::Top(_) => {}
                Assertion::Concept(a, x) => {
                    let at = c.atom(&Atom::Name(a.clone()));
                    let n = c.node(Ctx::Var(*x));
                    c.queue.push_back(Task::Label(n, at));
                }
                Assertion::Nominal(a, x) => {
                    let at = c.atom(&Atom::Nom(a.clone()));
                    let n = c.node(Ctx::Var(*x));
                    c.queue.push_back(Task::Label(n, at));
                }
                Assertion::Role(r, x, y) => {
                    let rid = c.role(&RoleExpr::Name(r.clone()));
                    let (nx, ny) = (c.node(Ctx::Var(*x)), c.node(Ctx::Var(*y)));
                    c.queue.push_back(Task::Edge(nx, rid, ny));
                }
            }
        }
        for a in activate {
            let at = c.atom(&Atom::Name(a.clone()));
            c.node(Ctx::Gen { filler: at, role: None, mask: vec![] });
        }
        c.saturate()?;
        Ok(c)
    }

    fn atom(&mut self, a: &Atom) -> usize {
        intern_atom(&mut self.atoms, &mut self.atom_ix, a)
    }

    fn role(&mut self, r: &RoleExpr) -> usize {
        intern_role(&mut self.roles, &mut self.role_ix, r)
    }

    fn find(&self, mut n: usize) -> usize {
        while self.uf[n] != n {
            n = self.uf[n];
        }
        n
    }

    fn node(&mut self, key: Ctx) -> usize {
        if let Some(&n) = self.node_ix.get(&key) {
            return self.find(n);
        }
        let n = self.nodes.len();
        self.nodes.push(key.clone());
        self.node_ix.insert(key.clone(), n);
        self.uf.push(n);
        self.unique.push(matches!(key, Ctx::Var(_) | Ctx::Nominal(_)));
        self.labels.push(HashSet::new());
        self.succ.push(vec![]);
        self.pred.push(vec![]);
        self.fired.push(vec![]);
        self.queue.push_back(Task::Label(n, 0));
        match &key {
            Ctx::Nominal(a) => {
                let at = self.atom(&Atom::Nom(a.clone()));
                self.queue.push_back(Task::Label(n, at));
            }
            Ctx::Gen { filler, role, mask } => {
                self.queue.push_back(Task::Label(n, *filler));
                if let Some(r) = role {
                    for a in mask {
                        if let Some(bs) = self.tbox.ex_left.get(&(inv(*r), *a)) {
                            for &b in bs {
                                self.queue.push_back(Task::Label(n, b));
                            }
                        }
                    }
                }
            }
            Ctx::Var(_) => {}
        }
        for &g in &self.global {
            self.queue.push_back(Task::Label(n, g));
        }
        n
    }

    fn apply(&mut self, n: usize, c: Concl) {
        match c {
            Concl::Atom(b) => self.queue.push_back(Task::Label(n, b)),
            Concl::Bot => self.inconsistent = true,
            Concl::ExistsU(b) => {
                self.node(Ctx::Gen { filler: b, role: None, mask: vec![] });
            }
            Concl::Exists(r, b) => {
                if !self.fired[n].contains(&(r, b)) {
                    self.fired[n].push((r, b));
                }
                self.queue.push_back(Task::Fire(n, r, b));
            }
        }
    }

    fn make_global(&mut self, b: usize) {
        if !self.global_set.insert(b) {
            return;
        }
        self.global.push(b);
        for n in 0..self.nodes.len() {
            if self.uf[n] == n {
                self.queue.push_back(Task::Label(n, b));
            }
        }
    }

    fn push_ex(&mut self, target: usize, r: usize, a: usize) {
        if let Some(bs) = self.tbox.ex_left.get(&(r, a)) {
            for &b in bs {
                self.queue.push_back(Task::Label(target, b));
            }
        }
    }

    fn saturate(&mut self) -> Result<()> {
        while let Some(t) = self.queue.pop_front() {
            if self.inconsistent {
                self.queue.clear();
                break;
            }
            if self.nodes.len() > self.cap {
                return Err(Error::resource("completion contexts", self.cap as u64, None));
            }
            match t {
                Task::Label(n, a) => {
                    let n = self.find(n);
                    if !self.labels[n].insert(a) {
                        continue;
                    }
                    if self.present.insert(a) {
                        if let Some(bs) = self.tbox.u_left.get(&a).cloned() {
                            for b in bs {
                                self.make_global(b);
                            }
                        }
                    }
                    if let Atom::Nom(c) = self.atoms[a].clone() {
                        let m = self.node(Ctx::Nominal(c));
                        if m != n {
                            self.queue.push_back(Task::Merge(n, m));
                        }
                    }
                    if let Some(cs) = self.tbox.unary.get(&a).cloned() {
                        for c in cs {
                            self.apply(n, c);
                        }
                    }
                    if let Some(cs) = self.tbox.binary.get(&a).cloned() {
                        for (b, c) in cs {
                            if self.labels[n].contains(&b) {
                                self.apply(n, c);
                            }
                        }
                    }
                    for (r, p) in self.pred[n].clone() {
                        let p = self.find(p);
                        self.push_ex(p, r, a);
                    }
                    for (r, m) in self.succ[n].clone() {
                        let m = self.find(m);
                        if self.unique[m] {
                            self.push_ex(m, inv(r), a);
                        }
                    }
                    for (r, f) in self.fired[n].clone() {
                        if self.tbox.relevant.get(&r).is_some_and(|s| s.contains(&a)) {
                            self.queue.push_back(Task::Fire(n, r, f));
                        }
                    }
                }
                Task::Fire(n, r, b) => {
                    let n = self.find(n);
                    let mut mask: Vec<usize> = match self.tbox.relevant.get(&r) {
                        Some(rel) => self.labels[n].iter().copied().filter(|a| rel.contains(a)).collect(),
                        None => vec![],
                    };
                    mask.sort_unstable();
                    let y = self.node(Ctx::Gen { filler: b, role: Some(r), mask });
                    self.queue.push_back(Task::Edge(n, r, y));
                }
                Task::Edge(x, r, y) => {
                    let (x, y) = (self.find(x), self.find(y));
                    if !self.edges.insert((x, r, y)) {
                        continue;
                    }
                    self.succ[x].push((r, y));
                    self.pred[y].push((r, x));
                    for a in self.labels[y].clone() {
                        self.push_ex(x, r, a);
                    }
                    if self.unique[y] {
                        for a in self.labels[x].clone() {
                            self.push_ex(y, inv(r), a);
                        }
                    }
                }
                Task::Merge(a, b) => {
                    let (a, b) = (self.find(a), self.find(b));
                    if a == b {
                        continue;
                    }
                    let (keep, gone) = (a.min(b), a.max(b));
                    self.uf[gone] = keep;
                    let was_unique = self.unique[keep];
                    self.unique[keep] = true;
                    for l in self.labels[gone].clone() {
                        self.queue.push_back(Task::Label(keep, l));
                    }
                    for (r, f) in self.fired[gone].clone() {
                        self.apply(keep, Concl::Exists(r, f));
                    }
                    for (r, m) in self.succ[gone].clone() {
                        self.queue.push_back(Task::Edge(keep, r, m));
                    }
                    for (r, p) in self.pred[gone].clone() {
                        self.queue.push_back(Task::Edge(p, r, keep));
                    }
                    if !was_unique {
                        for (r, p) in self.pred[keep].clone() {
                            let p = self.find(p);
                            for l in self.labels[p].clone() {
                                self.push_ex(keep, inv(r), l);
                            }
                        }
                    }
                }
            }
        }
        Ok(())
    }

    pub fn inconsistent(&self) -> bool {
        self.inconsistent
    }

    pub fn var_node(&self, x: Var) -> Option<usize> {
        self.node_ix.get(&Ctx::Var(x)).map(|n| self.find(*n))
    }

    pub fn nominal_node(&self, a: &str) -> Option<usize> {
        self.node_ix.get(&Ctx::Nominal(sym(a))).map(|n| self.find(*n))
    }

    pub fn atoms_of(&self, n: usize) -> BTreeSet<Atom> {
        self.labels[self.find(n)].iter().map(|i| self.atoms[*i].clone()).collect()
    }

    pub fn holds_atom(&self, x: Var, a: &Atom) -> bool {
        if self.inconsistent {
            return true;
        }
        match (self.var_node(x), self.atom_ix.get(a)) {
            (Some(n), Some(i)) => self.labels[n].contains(i),
            (Some(_), None) => false,
            (None, _) => *a == Atom::Top,
        }
    }

    /// Concept names that hold somewhere, i.e. `O, A ⊨ ∃u.B`.
    pub fn present_names(&self) -> BTreeSet<Sym> {
        self.present
            .iter()
            .filter_map(|i| if let Atom::Name(b) = &self.atoms[*i] { Some(b.clone()) } else { None })
            .collect()
    }

    /// Existentials that fired at a node, as (role, filler).
    pub fn fired_at(&self, n: usize) -> Vec<(RoleExpr, Atom)> {
        let n = self.find(n);
        let mut v: Vec<(RoleExpr, Atom)> =
            self.fired[n].iter().map(|(r, b)| (self.roles[*r].clone(), self.atoms[*b].clone())).collect();
        v.sort();
        v.dedup();
        v
    }

    /// `∃R.A` at a unique node, read off the edges in both directions.
    pub fn holds_exists(&self, n: usize, r: &RoleExpr, a: &Atom) -> bool {
        let n = self.find(n);
        let (Some(&rid), Some(&aid)) = (self.role_ix.get(r), self.atom_ix.get(a)) else { return false };
        self.succ[n].iter().any(|&(s, m)| s == rid && self.labels[self.find(m)].contains(&aid))
            || self.pred[n].iter().any(|&(s, p)| s == inv(rid) && self.labels[self.find(p)].contains(&aid))
    }

    /// Structural evaluation at a unique node of the concept shapes that occur in normal forms.
    pub fn holds_concept(&self, n: usize, c: &Concept) -> Option<bool> {
        if self.inconsistent {
            return Some(true);
        }
        let n = self.find(n);
        Some(match c.node() {
            Node::Top => true,
            Node::Bot => false,
            Node::Name(_) | Node::Nominal(_) => {
                let a = Atom::of(c).unwrap();
                self.atom_ix.get(&a).is_some_and(|i| self.labels[n].contains(i))
            }
            Node::And(cs) => {
                for d in cs {
                    if !self.holds_concept(n, d)? {
                        return Some(false);
                    }
                }
                true
            }
            Node::Exists(RoleExpr::Universal, d) => {
                let a = Atom::of(d)?;
                a == Atom::Top || self.atom_ix.get(&a).is_some_and(|i| self.present.contains(i))
            }
            Node::Exists(r, d) => self.holds_exists(n, r, &Atom::of(d)?),
        })
    }
}

/// Completion-based `O, A ⊨ C(x)`: a fresh name for complex `C`.
pub fn entails_assertion_completion(o: &Ontology, abox: &ABox, c: &Concept, x: Var) -> Result<bool> {
    let cfg = EliConfig::default();
    if let Some(a) = Atom::of(c) {
        let t = EliTbox::compile(o)?;
        return Ok(Completion::run(&t, abox, &[], &cfg)?.holds_atom(x, &a));
    }
    if c.is_bot() {
        let t = EliTbox::compile(o)?;
        return Ok(Completion::run(&t, abox, &[], &cfg)?.inconsistent());
    }
    let (ext, q) = extend_with_query(o, abox, c);
    let t = EliTbox::compile(&ext)?;
    Ok(Completion::run(&t, abox, &[], &cfg)?.holds_atom(x, &Atom::Name(q)))
}

pub fn entails_ci_completion(o: &Ontology, c: &Concept, d: &Concept) -> Result<bool> {
    let (p, _) = concept_to_pointed_abox(c, &Signature::new());
    entails_assertion_completion(o, &p.abox, d, p.root)
}

fn extend_with_query(o: &Ontology, abox: &ABox, c: &Concept) -> (Ontology, Sym) {
    let avoid = signature_of(o).union(&signature_of(abox)).union(&signature_of(c));
    let q = FreshNames::new("Q", &avoid).plain("Q");
    let mut ext = o.clone();
    ext.add_ci(CI::new(c.clone(), Concept::name_sym(q.clone())));
    (ext, q)
}

/// Concepts of `Θ2`: names, nominals and `∃u.A`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Fact {
    Atom(Atom),
    SomeU(Sym),
}

impl Fact {
    pub fn concept(&self) -> Concept {
        match self {
            Fact::Atom(a) => a.concept(),
            Fact::SomeU(b) => Concept::exists(RoleExpr::Universal, Concept::name_sym(b.clone())),
        }
    }

    pub fn of(c: &Concept) -> Option<Fact> {
        match c.node() {
            Node::Name(_) | Node::Nominal(_) => Atom::of(c).map(Fact::Atom),
            Node::Exists(RoleExpr::Universal, d) => d.as_name().map(|b| Fact::SomeU(b.clone())),
            _ => None,
        }
    }
}

impl std::fmt::Display for Fact {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.concept())
    }
}

/// A premise of a TBox query: a fact at the current element or `∃u.({a} ⊓ C)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Prem {
    Here(Fact),
    At(Sym, Fact),
}

impl Prem {
    pub fn concept(&self) -> Concept {
        match self {
            Prem::Here(f) => f.concept(),
            Prem::At(a, f) => Concept::exists(
                RoleExpr::Universal,
                Concept::and(Concept::nominal_sym(a.clone()), f.concept()),
            ),
        }
    }
}

/// Everything a premise set entails, at the current element and at each nominal.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Consequences {
    pub here: BTreeSet<Fact>,
    pub at: BTreeMap<Sym, BTreeSet<Fact>>,
    pub inconsistent: bool,
}

/// Memoized TBox queries of the shapes used by the rule fixpoint, derivation trees
/// and the automata.
pub struct EliOracle {
    pub tbox: Arc<EliTbox>,
    pub cfg: EliConfig,
    pub names: BTreeSet<Sym>,
    pub nominals: BTreeSet<Sym>,
    local: Mutex<HashMap<BTreeSet<Prem>, Arc<Consequences>>>,
    ex: Mutex<HashMap<(RoleExpr, Atom), Arc<BTreeSet<Fact>>>>,
}

impl EliOracle {
    pub fn new(o: &Ontology, cfg: EliConfig) -> Result<Arc<EliOracle>> {
        let tbox = EliTbox::compile(o)?;
        Ok(Self::from_tbox(tbox, cfg))
    }

    pub fn from_tbox(tbox: Arc<EliTbox>, cfg: EliConfig) -> Arc<EliOracle> {
        let sig = signature_of(&tbox.ontology);
        Arc::new(EliOracle {
            names: sig.concepts,
            nominals: sig.individuals,
            tbox,
            cfg,
            local: Mutex::new(HashMap::new()),
            ex: Mutex::new(HashMap::new()),
        })
    }

    fn read(&self, c: &Completion, n: usize) -> BTreeSet<Fact> {
        let mut out: BTreeSet<Fact> = c
            .atoms_of(n)
            .into_iter()
            .filter(|a| match a {
                Atom::Top => false,
                Atom::Name(b) => self.names.contains(b),
                Atom::Nom(b) => self.nominals.contains(b),
            })
            .map(Fact::Atom)
            .collect();
        out.extend(c.present_names().into_iter().filter(|b| self.names.contains(b)).map(Fact::SomeU));
        out
    }

    /// Consequences of `⊓ premises`.
    pub fn local(&self, prem: &BTreeSet<Prem>) -> Result<Arc<Consequences>> {
        if let Some(c) = self.local.lock().unwrap().get(prem) {
            return Ok(c.clone());
        }
        let mut a = ABox::new();
        let x = a.fresh();
        a.add_top(x);
        let mut anchor: BTreeMap<Sym, Var> = BTreeMap::new();
        let put = |a: &mut ABox, v: Var, f: &Fact| match f {
            Fact::Atom(Atom::Top) => a.add_top(v),
            Fact::Atom(Atom::Name(b)) => a.add_concept(b, v),
            Fact::Atom(Atom::Nom(b)) => a.add_nominal(b, v),
            Fact::SomeU(b) => {
                let z = a.fresh();
                a.add_top(z);
                a.add_concept(b, z);
            }
        };
        for p in prem {
            match p {
                Prem::Here(f) => put(&mut a, x, f),
                Prem::At(n, f) => {
                    let z = *anchor.entry(n.clone()).or_insert_with(|| {
                        let z = a.fresh();
                        a.add_top(z);
                        a.add_nominal(n, z);
                        z
                    });
                    put(&mut a, z, f);
                }
            }
        }
        let c = Completion::run(&self.tbox, &a, &[], &self.cfg)?;
        let mut out = Consequences { inconsistent: c.inconsistent(), ..Default::default() };
        if !out.inconsistent {
            out.here = self.read(&c, c.var_node(x).unwrap());
            for n in &self.nominals {
                if let Some(m) = c.nominal_node(n) {
                    out.at.insert(n.clone(), self.read(&c, m));
                }
            }
        }
        let out = Arc::new(out);
        self.local.lock().unwrap().insert(prem.clone(), out.clone());
        Ok(out)
    }

    /// Facts entailed at `x` by `∃R.B`.
    pub fn ex(&self, r: &RoleExpr, b: &Sym) -> Result<Arc<BTreeSet<Fact>>> {
        self.ex_atom(r, &Atom::Name(b.clone()))
    }

    /// Facts entailed at `x` by `∃R.B` for a name, nominal or `⊤`.
    pub fn ex_atom(&self, r: &RoleExpr, b: &Atom) -> Result<Arc<BTreeSet<Fact>>> {
        let key = (r.clone(), b.clone());
        if let Some(c) = self.ex.lock().unwrap().get(&key) {
            return Ok(c.clone());
        }
        let mut a = ABox::new();
        let (x, y) = (a.fresh(), a.fresh());
        a.add_top(x);
        a.add_top(y);
        match b {
            Atom::Top => {}
            Atom::Name(n) => a.add_concept(n, y),
            Atom::Nom(n) => a.add_nominal(n, y),
        }
        let base = r.base().expect("a named role").clone();
        if r.is_inverse() {
            a.add_role(&base, y, x);
        } else {
            a.add_role(&base, x, y);
        }
        let c = Completion::run(&self.tbox, &a, &[], &self.cfg)?;
        let out = if c.inconsistent() {
            let mut all: BTreeSet<Fact> = self.names.iter().map(|n| Fact::Atom(Atom::Name(n.clone()))).collect();
            all.insert(Fact::Atom(Atom::Name(sym(BOT_MARK))));
            all
        } else {
            self.read(&c, c.var_node(x).unwrap())
        };
        let out = Arc::new(out);
        self.ex.lock().unwrap().insert(key, out.clone());
        Ok(out)
    }

    /// `O ⊨ ⊓ premises ⊑ goal` for a single fact.
    pub fn entails_at_x(&self, prem: &BTreeSet<Prem>, goal: &Fact) -> Result<bool> {
        let c = self.local(prem)?;
        Ok(c.inconsistent || c.here.contains(goal))
    }

    /// `O ⊨ ⊓ premises ⊑ ∃u.({a} ⊓ goal)`.
    pub fn entails_at_nominal(&self, prem: &BTreeSet<Prem>, a: &Sym, goal: &Fact) -> Result<bool> {
        let c = self.local(prem)?;
        Ok(c.inconsistent || c.at.get(a).is_some_and(|s| s.contains(goal)) || *goal == Fact::Atom(Atom::Nom(a.clone())))
    }
}

/// Elements of the rule fixpoint: ABox individuals and one element per nominal.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EliElem<I> {
    Ind(I),
    Nom(Sym),
}

impl<I: std::fmt::Display> std::fmt::Display for EliElem<I> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            EliElem::Ind(x) => write!(f, "{x}"),
            EliElem::Nom(a) => write!(f, "x_{a}"),
        }
    }
}

/// Why a fact entered the fixpoint.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum EliJust {
    /// Asserted in the ABox, or `{a}` at the element of `a`.
    Base,
    /// `O ⊨ ⊤ ⊑ C`.
    Top,
    /// Rule 1: premises at the same individual and at nominals.
    Local,
    /// Rule 2: `∃u.A` copied from another element.
    Universal(EliElem<Var>),
    /// Rule 3: `r(x, y)` (or its inverse) and `A(y)` with `O ⊨ ∃r.A ⊑ C`.
    Step { role: RoleExpr, to: Var, atom: Atom },
    /// Rule 4: premises around the individual `x` yield `∃u.({a} ⊓ C)`.
    Nominal(Var),
}

/// The least fixpoint of rules 1–4 over `A ∪ {{a}(x_a)}`; every fact records the round
/// it was first derived in and how.
pub struct EliSaturation {
    pub oracle: Arc<EliOracle>,
    pub abox: ABox,
    facts: BTreeMap<(EliElem<Var>, Fact), (usize, EliJust)>,
    by_elem: BTreeMap<EliElem<Var>, BTreeSet<Fact>>,
    inconsistent: bool,
    pub rounds: usize,
}

impl EliSaturation {
    pub fn new(o: &Ontology, abox: &ABox) -> Result<EliSaturation> {
        Self::with_oracle(EliOracle::new(o, EliConfig::default())?, abox)
    }

    pub fn with_oracle(oracle: Arc<EliOracle>, abox: &ABox) -> Result<EliSaturation> {
        let mut s = EliSaturation {
            oracle,
            abox: abox.clone(),
            facts: BTreeMap::new(),
            by_elem: BTreeMap::new(),
            inconsistent: false,
            rounds: 0,
        };
        s.run()?;
        Ok(s)
    }

    fn nominals(&self) -> BTreeSet<Sym> {
        let mut n = self.oracle.nominals.clone();
        n.extend(signature_of(&self.abox).individuals);
        n
    }

    fn elems(&self) -> Vec<EliElem<Var>> {
        let mut v: Vec<EliElem<Var>> = self.abox.vars().into_iter().map(EliElem::Ind).collect();
        v.extend(self.nominals().into_iter().map(EliElem::Nom));
        v
    }

    fn insert(&mut self, e: EliElem<Var>, f: Fact, round: usize, j: EliJust) -> bool {
        if self.facts.contains_key(&(e.clone(), f.clone())) {
            return false;
        }
        self.by_elem.entry(e.clone()).or_default().insert(f.clone());
        self.facts.insert((e, f), (round, j));
        true
    }

    fn round_of(&self, e: &EliElem<Var>, f: &Fact) -> usize {
        self.facts[&(e.clone(), f.clone())].0
    }

    pub fn premises_at(&self, x: Var, before: usize) -> BTreeSet<Prem> {
        let mut p = BTreeSet::new();
        if let Some(fs) = self.by_elem.get(&EliElem::Ind(x)) {
            for f in fs {
                if self.round_of(&EliElem::Ind(x), f) < before {
                    p.insert(Prem::Here(f.clone()));
                }
            }
        }
        for (e, fs) in self.by_elem.range(EliElem::Nom(Sym::from(""))..) {
            if let EliElem::Nom(a) = e {
                for f in fs {
                    if self.round_of(e, f) < before {
                        p.insert(Prem::At(a.clone(), f.clone()));
                    }
                }
            }
        }
        p
    }

    fn run(&mut self) -> Result<()> {
        let elems = self.elems();
        let vars: Vec<Var> = self.abox.vars().into_iter().collect();
        let asserted: Vec<(Var, Fact)> = self
            .abox
            .assertions
            .iter()
            .filter_map(|asr| match asr {
                Assertion::Concept(a, x) => Some((*x, Fact::Atom(Atom::Name(a.clone())))),
                Assertion::Nominal(a, x) => Some((*x, Fact::Atom(Atom::Nom(a.clone())))),
                _ => None,
            })
            .collect();
        for (x, f) in asserted {
            self.insert(EliElem::Ind(x), f, 0, EliJust::Base);
        }
        for a in self.nominals() {
            self.insert(EliElem::Nom(a.clone()), Fact::Atom(Atom::Nom(a)), 0, EliJust::Base);
        }
        let top = self.oracle.local(&BTreeSet::new())?;
        if top.inconsistent {
            self.inconsistent = true;
            return Ok(());
        }
        for e in &elems {
            for f in &top.here {
                self.insert(e.clone(), f.clone(), 0, EliJust::Top);
            }
        }
        // edges into each variable, seen from the other end
        let mut incoming: BTreeMap<Var, Vec<(Var, RoleExpr)>> = BTreeMap::new();
        for (r, x, y) in self.abox.role_edges() {
            incoming.entry(y).or_default().push((x, RoleExpr::Name(r.clone())));
            incoming.entry(x).or_default().push((y, RoleExpr::Inv(r.clone())));
        }
        // facts added in the previous round: everything at the start
        let mut fresh: Vec<(EliElem<Var>, Fact)> = self.facts.keys().cloned().collect();
        let mut spread: BTreeSet<Sym> = BTreeSet::new();
        let mut round = 0;
        loop {
            round += 1;
            if round > self.oracle.cfg.max_rounds {
                return Err(Error::resource("saturation rounds", self.oracle.cfg.max_rounds as u64, None));
            }
            let nominal_changed = fresh.iter().any(|(e, _)| matches!(e, EliElem::Nom(_)));
            let dirty: BTreeSet<Var> = if nominal_changed || round == 1 {
                vars.iter().copied().collect()
            } else {
                fresh.iter().filter_map(|(e, _)| if let EliElem::Ind(x) = e { Some(*x) } else { None }).collect()
            };
            let mut new: BTreeMap<(EliElem<Var>, Fact), EliJust> = BTreeMap::new();
            let mut add = |facts: &BTreeMap<(EliElem<Var>, Fact), (usize, EliJust)>, k: (EliElem<Var>, Fact), j: EliJust| {
                if !facts.contains_key(&k) {
                    new.entry(k).or_insert(j);
                }
            };
            for &x in &dirty {
                let prem = self.premises_at(x, round);
                let c = self.oracle.local(&prem)?;
                if c.inconsistent {
                    self.inconsistent = true;
                    self.rounds = round;
                    return Ok(());
                }
                for f in &c.here {
                    add(&self.facts, (EliElem::Ind(x), f.clone()), EliJust::Local);
                }
                for (a, fs) in &c.at {
                    for f in fs {
                        add(&self.facts, (EliElem::Nom(a.clone()), f.clone()), EliJust::Nominal(x));
                    }
                }
            }
            for (y, f) in &fresh {
                if let Fact::SomeU(b) = f {
                    if !spread.insert(b.clone()) {
                        continue;
                    }
                    for e in &elems {
                        add(&self.facts, (e.clone(), Fact::SomeU(b.clone())), EliJust::Universal(y.clone()));
                    }
                }
            }
            for (e, f) in &fresh {
                let (EliElem::Ind(to), Fact::Atom(a)) = (e, f) else { continue };
                for (from, role) in incoming.get(to).map(|v| v.as_slice()).unwrap_or(&[]) {
                    for g in self.oracle.ex_atom(role, a)?.iter() {
                        if *g == Fact::Atom(Atom::Name(sym(BOT_MARK))) {
                            self.inconsistent = true;
                            self.rounds = round;
                            return Ok(());
                        }
                        add(&self.facts, (EliElem::Ind(*from), g.clone()), EliJust::Step { role: role.clone(), to: *to, atom: a.clone() });
                    }
                }
            }
            if new.is_empty() {
                self.rounds = round;
                return Ok(());
            }
            fresh = new.keys().cloned().collect();
            for ((e, f), j) in new {
                self.insert(e, f, round, j);
            }
        }
    }

    pub fn inconsistent(&self) -> bool {
        self.inconsistent
    }

    pub fn holds(&self, e: &EliElem<Var>, f: &Fact) -> bool {
        self.inconsistent || *f == Fact::Atom(Atom::Top) || self.facts.contains_key(&(e.clone(), f.clone()))
    }

    pub fn justification(&self, e: &EliElem<Var>, f: &Fact) -> Option<&(usize, EliJust)> {
        self.facts.get(&(e.clone(), f.clone()))
    }

    pub fn facts_at(&self, e: &EliElem<Var>) -> BTreeSet<Fact> {
        self.by_elem.get(e).cloned().unwrap_or_default()
    }

    pub fn fact_count(&self) -> usize {
        self.facts.len()
    }
}

/// `O, A ⊨ C(x)` via the rule fixpoint (fresh name for complex `C`).
pub fn entails_assertion(o: &Ontology, abox: &ABox, c: &Concept, x: Var) -> Result<bool> {
    entails_assertion_completion(o, abox, c, x)
}

/// `O, A ⊨ C(x)` read off the rule fixpoint of rules 1–4.
pub fn entails_assertion_saturation(o: &Ontology, abox: &ABox, c: &Concept, x: Var) -> Result<bool> {
    if c.is_top() {
        return Ok(true);
    }
    if c.is_bot() {
        return Ok(EliSaturation::new(o, abox)?.inconsistent());
    }
    if let Some(a) = Atom::of(c) {
        return Ok(EliSaturation::new(o, abox)?.holds(&EliElem::Ind(x), &Fact::Atom(a)));
    }
    // `∃u.A` goes through a query name too: the fixpoint only tracks `∃u.A` for names of `O`
    let (ext, q) = extend_with_query(o, abox, c);
    Ok(EliSaturation::new(&ext, abox)?.holds(&EliElem::Ind(x), &Fact::Atom(Atom::Name(q))))
}

/// `O ⊨ C ⊑ D`, reduced to assertion entailment over the ABox of `C`.
pub fn entails_ci(o: &Ontology, c: &Concept, d: &Concept) -> Result<bool> {
    let (p, _) = concept_to_pointed_abox(c, &Signature::new());
    entails_assertion(o, &p.abox, d, p.root)
}

pub fn entails_ci_eli(o: &Ontology, c: &Concept, d: &Concept) -> Result<bool> {
    entails_ci(o, c, d)
}

pub fn entails_assertion_eli(o: &Ontology, abox: &ABox, c: &Concept, x: Var) -> Result<bool> {
    entails_assertion(o, abox, c, x)
}

/// A set of concepts from `sub(O) ∪ sub^∃(O)` closed under consequence.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct OmegaType(pub BTreeSet<Concept>);

impl OmegaType {
    pub fn contains(&self, c: &Concept) -> bool {
        self.0.contains(c)
    }

    pub fn names(&self) -> impl Iterator<Item = &Sym> + '_ {
        self.0.iter().filter_map(|c| c.as_name())
    }

    pub fn nominals(&self) -> impl Iterator<Item = &Sym> + '_ {
        self.0.iter().filter_map(|c| c.as_nominal())
    }

    /// `(R, a)` for every `∃R.{a}` in the type.
    pub fn nominal_edges(&self) -> Vec<(RoleExpr, Sym)> {
        self.0
            .iter()
            .filter_map(|c| match c.node() {
                Node::Exists(r, d) if *r != RoleExpr::Universal => d.as_nominal().map(|a| (r.clone(), a.clone())),
                _ => None,
            })
            .collect()
    }

    pub fn concept(&self) -> Concept {
        Concept::conj(self.0.iter().cloned())
    }
}

/// The Ω-types reachable from the anchors `S`, with the successor relation `⇝`.
#[derive(Clone, Debug)]
pub struct TypeGraph {
    /// The normal form the types are taken over.
    pub ontology: Ontology,
    pub seed: Sym,
    pub candidates: Vec<Concept>,
    pub types: Vec<OmegaType>,
    pub succ: BTreeSet<(usize, RoleExpr, usize)>,
    /// `τ_B` for every `B` with `O ⊨ A ⊑ ∃u.B`.
    pub concept_anchors: BTreeMap<Sym, usize>,
    /// `τ_a` for every individual of the ontology.
    pub nominal_anchors: BTreeMap<Sym, usize>,
    pub root: usize,
}

impl TypeGraph {
    /// The anchor types `S`, in index order.
    pub fn roots(&self) -> Vec<usize> {
        let mut v: BTreeSet<usize> = self.concept_anchors.values().copied().collect();
        v.extend(self.nominal_anchors.values().copied());
        v.into_iter().collect()
    }

    pub fn is_nominal_type(&self, t: usize) -> bool {
        self.types[t].nominals().next().is_some()
    }

    pub fn successors(&self, t: usize) -> Vec<(RoleExpr, usize)> {
        self.succ.iter().filter(|(s, _, _)| *s == t).map(|(_, r, u)| (r.clone(), *u)).collect()
    }

    /// The anchor type an element satisfying `{a}` has.
    pub fn nominal_type(&self, a: &Sym) -> Option<usize> {
        self.nominal_anchors.get(a).copied()
    }
}

struct TypeBuilder {
    tbox: Arc<EliTbox>,
    cfg: EliConfig,
    seed_u: Concept,
    candidates: Vec<Concept>,
    types: Vec<OmegaType>,
    index: HashMap<OmegaType, usize>,
}

impl TypeBuilder {
    fn type_at(&self, c: &Completion, n: usize) -> Result<OmegaType> {
        let mut out = BTreeSet::new();
        for cand in &self.candidates {
            let holds = match c.holds_concept(n, cand) {
                Some(b) => b,
                None => return Err(Error::Invalid(format!("candidate {cand} is not in normal-form shape"))),
            };
            if holds {
                out.insert(cand.clone());
            }
        }
        Ok(OmegaType(out))
    }

    fn abox_of(&self, seed: &[Concept]) -> PointedABox {
        let mut all: Vec<Concept> = seed.to_vec();
        all.push(self.seed_u.clone());
        concept_to_pointed_abox(&Concept::conj(all), &Signature::new()).0
    }

    fn closure(&self, seed: &[Concept]) -> Result<(OmegaType, bool)> {
        let p = self.abox_of(seed);
        let c = Completion::run(&self.tbox, &p.abox, &[], &self.cfg)?;
        if c.inconsistent() {
            return Ok((OmegaType(self.candidates.iter().cloned().collect()), true));
        }
        Ok((self.type_at(&c, c.var_node(p.root).unwrap())?, false))
    }

    fn intern(&mut self, t: OmegaType) -> Result<usize> {
        if let Some(&i) = self.index.get(&t) {
            return Ok(i);
        }
        if self.types.len() >= self.cfg.max_types {
            return Err(Error::resource("Ω-types", self.cfg.max_types as u64, None));
        }
        self.types.push(t.clone());
        self.index.insert(t, self.types.len() - 1);
        Ok(self.types.len() - 1)
    }

    /// Maximal types among the witnesses of the existentials that fire at `τ`.
    fn successors(&self, t: &OmegaType) -> Result<Vec<(RoleExpr, OmegaType)>> {
        let seed: Vec<Concept> = t.0.iter().cloned().collect();
        let p = self.abox_of(&seed);
        let c = Completion::run(&self.tbox, &p.abox, &[], &self.cfg)?;
        let root = c.var_node(p.root).unwrap();
        let mut found: BTreeMap<RoleExpr, Vec<OmegaType>> = BTreeMap::new();
        for (r, b) in c.fired_at(root) {
            let mut a = p.abox.clone();
            let y = a.fresh();
            a.add_top(y);
            match &b {
                Atom::Name(n) => a.add_concept(n, y),
                Atom::Nom(n) => a.add_nominal(n, y),
                Atom::Top => {}
            }
            let base = r.base().unwrap().clone();
            if r.is_inverse() {
                a.add_role(&base, y, p.root);
            } else {
                a.add_role(&base, p.root, y);
            }
            let cy = Completion::run(&self.tbox, &a, &[], &self.cfg)?;
            let ty = self.type_at(&cy, cy.var_node(y).unwrap())?;
            if ty.nominals().next().is_some() {
                continue;
            }
            found.entry(r).or_default().push(ty);
        }
        let mut out = vec![];
        for (r, ts) in found {
            let mut ts: Vec<OmegaType> = ts.into_iter().collect::<BTreeSet<_>>().into_iter().collect();
            let all = ts.clone();
            ts.retain(|t| !all.iter().any(|u| u != t && t.0.is_subset(&u.0)));
            out.extend(ts.into_iter().map(|t| (r.clone(), t)));
        }
        Ok(out)
    }
}

/// `sub(O) ∪ sub^∃(O)` for the normal form, plus `∃u.A` and `A`.
pub fn type_candidates(o: &Ontology, a0: &Sym) -> Vec<Concept> {
    let mut out: BTreeSet<Concept> = BTreeSet::new();
    for ci in &o.cis {
        out.extend(ci.lhs.subconcepts());
        out.extend(ci.rhs.subconcepts());
    }
    let a = Concept::name_sym(a0.clone());
    out.insert(Concept::exists(RoleExpr::Universal, a.clone()));
    out.insert(a);
    let sig = signature_of(o);
    for r in &sig.roles {
        for n in &sig.individuals {
            let nom = Concept::nominal_sym(n.clone());
            out.insert(Concept::exists(RoleExpr::Name(r.clone()), nom.clone()));
            out.insert(Concept::exists(RoleExpr::Inv(r.clone()), nom));
        }
    }
    out.remove(&Concept::bot());
    out.remove(&Concept::name(BOT_MARK));
    out.into_iter().collect()
}

/// Ω-types of `O` reachable from the anchors of `A`.
pub fn compute_types(o: &Ontology, a0: &Sym, cfg: &EliConfig) -> Result<TypeGraph> {
    let tbox = EliTbox::compile(o)?;
    let norm = tbox.ontology.clone();
    let a = Concept::name_sym(a0.clone());
    let mut b = TypeBuilder {
        candidates: type_candidates(&norm, a0),
        seed_u: Concept::exists(RoleExpr::Universal, a.clone()),
        tbox,
        cfg: cfg.clone(),
        types: vec![],
        index: HashMap::new(),
    };
    let start = Completion::run(&b.tbox, &seed_abox(a0), &[], cfg)?;
    let (root_t, _) = b.closure(std::slice::from_ref(&a))?;
    let root = b.intern(root_t)?;
    let mut concept_anchors = BTreeMap::new();
    concept_anchors.insert(a0.clone(), root);
    let realized: BTreeSet<Sym> = if start.inconsistent() { BTreeSet::new() } else { start.present_names() };
    for n in realized {
        if n == *a0 || normalize_internal(&n) {
            continue;
        }
        let (t, _) = b.closure(&[Concept::name_sym(n.clone())])?;
        if t.nominals().next().is_some() {
            continue;
        }
        let i = b.intern(t)?;
        concept_anchors.insert(n, i);
    }
    let mut nominal_anchors = BTreeMap::new();
    for n in signature_of(&norm).individuals {
        let (t, _) = b.closure(&[Concept::nominal_sym(n.clone())])?;
        let i = b.intern(t)?;
        nominal_anchors.insert(n, i);
    }
    let mut succ = BTreeSet::new();
    let mut done = 0;
    while done < b.types.len() {
        let t = b.types[done].clone();
        for (r, u) in b.successors(&t)? {
            let j = b.intern(u)?;
            succ.insert((done, r, j));
        }
        done += 1;
    }
    Ok(TypeGraph {
        ontology: norm,
        seed: a0.clone(),
        candidates: b.candidates,
        types: b.types,
        succ,
        concept_anchors,
        nominal_anchors,
        root,
    })
}

fn normalize_internal(n: &str) -> bool {
    crate::normalize::is_fresh_name(n)
}

fn seed_abox(a: &Sym) -> ABox {
    crate::el_engine::seed_abox(a)
}

/// A word `τ0 r1 τ1 … rn τn` of the canonical model.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CanonWord {
    pub types: Vec<usize>,
    pub roles: Vec<RoleExpr>,
}

impl CanonWord {
    pub fn tail(&self) -> usize {
        *self.types.last().unwrap()
    }

    pub fn len(&self) -> usize {
        self.roles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.roles.is_empty()
    }
}

/// The canonical model materialized up to a word length.
#[derive(Clone, Debug)]
pub struct BoundedCanonicalTree {
    pub graph: Arc<TypeGraph>,
    pub words: Vec<CanonWord>,
    pub index: HashMap<CanonWord, usize>,
    pub depth: usize,
    pub root: usize,
}

impl BoundedCanonicalTree {
    pub fn is_frontier(&self, w: usize) -> bool {
        self.words[w].len() == self.depth
    }

    /// Role edges `(r, from, to)` with `r` a role name.
    pub fn edges(&self) -> Vec<(Sym, usize, usize)> {
        let mut out = vec![];
        for (i, w) in self.words.iter().enumerate() {
            if let Some(r) = w.roles.last() {
                let mut p = w.clone();
                p.types.pop();
                p.roles.pop();
                let pi = self.index[&p];
                match r {
                    RoleExpr::Name(s) => out.push((s.clone(), pi, i)),
                    RoleExpr::Inv(s) => out.push((s.clone(), i, pi)),
                    RoleExpr::Universal => {}
                }
            }
            for (r, a) in self.graph.types[w.tail()].nominal_edges() {
                let Some(t) = self.graph.nominal_type(&a) else { continue };
                let target = CanonWord { types: vec![t], roles: vec![] };
                let Some(&j) = self.index.get(&target) else { continue };
                match r {
                    RoleExpr::Name(s) => out.push((s, i, j)),
                    RoleExpr::Inv(s) => out.push((s, j, i)),
                    RoleExpr::Universal => {}
                }
            }
        }
        out.sort();
        out.dedup();
        out
    }

    /// The tree as an ABox, restricted to `sigma` when given; one variable per word.
    pub fn to_abox(&self, sigma: Option<&Signature>) -> (PointedABox, Vec<Var>) {
        let mut a = ABox::new();
        let vars: Vec<Var> = (0..self.words.len()).map(|i| a.fresh_named(format!("w{i}"))).collect();
        let keep_c = |n: &Sym| sigma.is_none_or(|s| s.concepts.contains(n));
        let keep_r = |n: &Sym| sigma.is_none_or(|s| s.roles.contains(n));
        let keep_i = |n: &Sym| sigma.is_none_or(|s| s.individuals.contains(n));
        for (i, w) in self.words.iter().enumerate() {
            a.add_top(vars[i]);
            let t = &self.graph.types[w.tail()];
            for n in t.names() {
                if keep_c(n) && !crate::normalize::is_fresh_name(n) {
                    a.add_concept(n, vars[i]);
                }
            }
            if w.is_empty() {
                for n in t.nominals() {
                    if keep_i(n) {
                        a.add_nominal(n, vars[i]);
                    }
                }
            }
        }
        for (r, x, y) in self.edges() {
            if keep_r(&r) {
                a.add_role(&r, vars[x], vars[y]);
            }
        }
        (PointedABox { abox: a, root: vars[self.root] }, vars)
    }
}

/// Materializes words up to length `depth`, starting from every anchor type.
pub fn canonical_tree(graph: &Arc<TypeGraph>, depth: usize, max_words: usize) -> Result<BoundedCanonicalTree> {
    let mut words = vec![];
    let mut index = HashMap::new();
    let mut queue = VecDeque::new();
    for t in graph.roots() {
        let w = CanonWord { types: vec![t], roles: vec![] };
        index.insert(w.clone(), words.len());
        words.push(w.clone());
        queue.push_back(w);
    }
    while let Some(w) = queue.pop_front() {
        if w.len() >= depth {
            continue;
        }
        for (r, u) in graph.successors(w.tail()) {
            let mut c = w.clone();
            c.types.push(u);
            c.roles.push(r);
            if index.contains_key(&c) {
                continue;
            }
            if words.len() >= max_words {
                return Err(Error::resource("canonical tree words", max_words as u64, Some(w.len())));
            }
            index.insert(c.clone(), words.len());
            words.push(c.clone());
            queue.push_back(c);
        }
    }
    let root = index[&CanonWord { types: vec![graph.root], roles: vec![] }];
    Ok(BoundedCanonicalTree { graph: graph.clone(), words, index, depth, root })
}

/// A word `x0 r1 x1 … rn xn` of the undirected unfolding; steps may use inverse roles.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct UWord {
    pub start: Var,
    pub steps: Vec<(RoleExpr, Var)>,
}

impl UWord {
    pub fn root(x: Var) -> UWord {
        UWord { start: x, steps: vec![] }
    }

    pub fn tail(&self) -> Var {
        self.steps.last().map(|s| s.1).unwrap_or(self.start)
    }

    pub fn extend(&self, r: &RoleExpr, x: Var) -> UWord {
        let mut w = self.clone();
        w.steps.push((r.clone(), x));
        w
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn parent(&self) -> Option<UWord> {
        if self.steps.is_empty() {
            return None;
        }
        let mut w = self.clone();
        w.steps.pop();
        Some(w)
    }

    pub fn show(&self, a: &ABox) -> String {
        let mut s = a.display(self.start);
        for (r, x) in &self.steps {
            s.push_str(&format!(" {r} {}", a.display(*x)));
        }
        s
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum UChild {
    Word(RoleExpr, UWord),
    Anchor(RoleExpr, Var),
}

/// The undirected unfolding of a pointed ABox modulo the variables carrying a nominal
/// from `Γ`, generated lazily.
#[derive(Clone, Debug)]
pub struct UndirectedUnfolding {
    pub base: PointedABox,
    pub anchored: BTreeMap<Var, Sym>,
    out: BTreeMap<Var, Vec<(Sym, Var)>>,
    inn: BTreeMap<Var, Vec<(Sym, Var)>>,
}

impl UndirectedUnfolding {
    pub fn new(p: &PointedABox, gamma: &BTreeSet<Sym>) -> UndirectedUnfolding {
        let anchored = crate::types::anchor_vars(&p.abox, gamma);
        let mut out: BTreeMap<Var, Vec<(Sym, Var)>> = BTreeMap::new();
        let mut inn: BTreeMap<Var, Vec<(Sym, Var)>> = BTreeMap::new();
        for (r, x, y) in p.abox.role_edges() {
            out.entry(x).or_default().push((r.clone(), y));
            inn.entry(y).or_default().push((r.clone(), x));
        }
        UndirectedUnfolding { base: p.clone(), anchored, out, inn }
    }

    pub fn root(&self) -> UWord {
        UWord::root(self.base.root)
    }

    pub fn children(&self, w: &UWord) -> Vec<UChild> {
        let t = w.tail();
        let mut v = vec![];
        for (r, y) in self.out.get(&t).into_iter().flatten() {
            let role = RoleExpr::Name(r.clone());
            if self.anchored.contains_key(y) {
                v.push(UChild::Anchor(role, *y));
            } else {
                v.push(UChild::Word(role.clone(), w.extend(&role, *y)));
            }
        }
        for (r, y) in self.inn.get(&t).into_iter().flatten() {
            let role = RoleExpr::Inv(r.clone());
            if self.anchored.contains_key(y) {
                v.push(UChild::Anchor(role, *y));
            } else {
                v.push(UChild::Word(role.clone(), w.extend(&role, *y)));
            }
        }
        v
    }

    /// Whether `x r y` (or `r(y, x)` for an inverse step) is an edge of the base ABox.
    pub fn has_step(&self, x: Var, r: &RoleExpr, y: Var) -> bool {
        match r {
            RoleExpr::Name(s) => self.out.get(&x).is_some_and(|v| v.contains(&(s.clone(), y))),
            RoleExpr::Inv(s) => self.inn.get(&x).is_some_and(|v| v.contains(&(s.clone(), y))),
            RoleExpr::Universal => false,
        }
    }

    pub fn is_word(&self, w: &UWord) -> bool {
        let mut cur = w.start;
        for (r, y) in &w.steps {
            if !self.has_step(cur, r, *y) || self.anchored.contains_key(y) {
                return false;
            }
            cur = *y;
        }
        w.start == self.base.root || self.anchored.contains_key(&w.start) || self.base.abox.vars().contains(&w.start)
    }

    /// The sub-ABox on a set of words; anchored variables appear as length-0 words.
    pub fn restrict(&self, words: &BTreeSet<UWord>) -> (PointedABox, BTreeMap<UWord, Var>) {
        let src = &self.base.abox;
        let mut a = ABox::new();
        let mut map: BTreeMap<UWord, Var> = BTreeMap::new();
        let mut all = words.clone();
        all.insert(self.root());
        for w in &all {
            let v = a.fresh_named(w.show(src));
            map.insert(w.clone(), v);
            a.add_top(v);
            for c in src.concepts_at(w.tail()) {
                a.add_concept(&c, v);
            }
            if w.is_empty() {
                for n in src.nominals_at(w.start) {
                    a.add_nominal(&n, v);
                }
            }
        }
        for w in &all {
            for ch in self.children(w) {
                let (r, target) = match &ch {
                    UChild::Word(r, c) => (r, c.clone()),
                    UChild::Anchor(r, y) => (r, UWord::root(*y)),
                };
                let Some(&t) = map.get(&target) else { continue };
                let s = map[w];
                match r {
                    RoleExpr::Name(n) => {
                        a.add_role(n, s, t);
                    }
                    RoleExpr::Inv(n) => {
                        a.add_role(n, t, s);
                    }
                    RoleExpr::Universal => {}
                }
            }
        }
        let root = map[&self.root()];
        (PointedABox { abox: a, root }, map)
    }

    /// All words up to length `depth`; only those reachable from the root when `rooted`.
    /// The flag reports whether some word was cut off.
    pub fn materialize(&self, depth: usize, rooted: bool) -> (PointedABox, BTreeMap<UWord, Var>, bool) {
        let mut words = BTreeSet::new();
        let mut queue = VecDeque::new();
        let mut starts = vec![self.base.root];
        starts.extend(self.anchored.keys().copied());
        if !rooted {
            starts.extend(self.base.abox.vars());
        }
        for s in starts {
            let w = UWord::root(s);
            if words.insert(w.clone()) {
                queue.push_back(w);
            }
        }
        let mut cut = false;
        while let Some(w) = queue.pop_front() {
            for ch in self.children(&w) {
                if let UChild::Word(_, c) = ch {
                    if c.len() > depth {
                        cut = true;
                        continue;
                    }
                    if words.insert(c.clone()) {
                        queue.push_back(c);
                    }
                }
            }
        }
        if rooted {
            let (p, map) = self.restrict(&words);
            let keep = reachable(&p.abox, p.root, false);
            let q = PointedABox { abox: p.abox.restrict_to(&keep), root: p.root };
            let map = map.into_iter().filter(|(_, v)| keep.contains(v)).collect();
            return (q, map, cut);
        }
        let (p, map) = self.restrict(&words);
        (p, map, cut)
    }

    /// A shortest word ending in `x`: from the root, else from an anchor, else `x` itself.
    pub fn word_to(&self, x: Var) -> UWord {
        if let Some(w) = self.search(&self.root(), x) {
            return w;
        }
        let anchors: Vec<Var> = self.anchored.keys().copied().collect();
        for a in anchors {
            if let Some(w) = self.search(&UWord::root(a), x) {
                return w;
            }
        }
        UWord::root(x)
    }

    fn search(&self, from: &UWord, x: Var) -> Option<UWord> {
        if from.tail() == x {
            return Some(from.clone());
        }
        let mut seen = BTreeSet::from([from.tail()]);
        let mut queue = VecDeque::from([from.clone()]);
        while let Some(w) = queue.pop_front() {
            for ch in self.children(&w) {
                if let UChild::Word(_, c) = ch {
                    if c.tail() == x {
                        return Some(c);
                    }
                    if seen.insert(c.tail()) {
                        queue.push_back(c);
                    }
                }
            }
        }
        None
    }
}

pub fn undirected_unfolding(p: &PointedABox, gamma: &BTreeSet<Sym>, depth: usize, rooted: bool) -> (PointedABox, bool) {
    let u = UndirectedUnfolding::new(p, gamma);
    let (q, _, cut) = u.materialize(depth, rooted);
    (q, cut)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::textio::{parse_concept, parse_ontology, O_I, O_NOMINAL};

    fn c(s: &str) -> Concept {
        parse_concept(s).unwrap()
    }

    fn both(o: &Ontology, l: &str, r: &str) -> bool {
        let a = entails_ci(o, &c(l), &c(r)).unwrap();
        let b = entails_ci_completion(o, &c(l), &c(r)).unwrap();
        assert_eq!(a, b, "{l} <= {r}");
        a
    }

    #[test]
    fn inverse_example() {
        let o = parse_ontology(O_I).unwrap();
        assert!(both(&o, "A", "B"));
        assert!(both(&o, "A", "exists r.(C & E)"));
        assert!(!both(&o, "B", "exists r.E"));
        assert!(both(&o, "B & exists r.(C & E)", "A"));
        assert!(!both(&o, "B & exists r.(D & E)", "A"));
    }

    #[test]
    fn inverse_feeds_generic_context() {
        let o = parse_ontology(
            "A <= exists r.B\nexists inv(r).A <= C\nB & C <= exists s.D\nexists s.D <= F\nexists r.F <= G\n",
        )
        .unwrap();
        assert!(both(&o, "A", "G"));
        assert!(!both(&o, "exists r.B", "G"));
        assert!(both(&o, "exists inv(r).A", "C"));
    }

    #[test]
    fn nominals_and_universal_role() {
        let o = parse_ontology(O_NOMINAL).unwrap();
        assert!(both(&o, "B", "exists s.exists r.B"));
        assert!(both(&o, "A", "{b}"));
        assert!(!both(&o, "B", "{b}"));
        let o = parse_ontology("X <= exists r.{a}\nexists inv(r).X <= Y\n{a} & Y <= W\nZ <= exists u.X\n").unwrap();
        assert!(both(&o, "X", "exists r.({a} & Y)"));
        assert!(both(&o, "Z", "exists u.W"));
        assert!(!both(&o, "Top", "exists u.({a} & Y)"));
        assert!(both(&o, "exists u.X", "exists u.({a} & W)"));
    }

    #[test]
    fn bottom_and_merging() {
        let o = parse_ontology("A <= {a}\nB <= {a}\nA & B <= Bot\nC <= exists r.A & exists s.B\n").unwrap();
        assert!(both(&o, "C", "Bot"));
        assert!(both(&o, "exists u.C", "D"));
        assert!(!both(&o, "A", "Bot"));
    }

    #[test]
    fn agrees_with_el_engine_on_el_input() {
        let o = parse_ontology("A <= exists r.B\nB <= C & exists s.D\nexists r.C <= E\nE & A <= F\n").unwrap();
        for (l, r) in [("A", "F"), ("A", "exists r.exists s.D"), ("B", "F"), ("exists r.B", "E")] {
            let el = crate::el_engine::entails_ci(&o, &c(l), &c(r)).unwrap();
            assert_eq!(both(&o, l, r), el, "{l} <= {r}");
        }
    }

    #[test]
    fn empty_ontology_has_single_type() {
        let g = compute_types(&Ontology::empty(), &sym("A"), &EliConfig::default()).unwrap();
        assert_eq!(g.types.len(), 1);
        assert!(g.types[0].contains(&c("A")));
        assert!(g.types[0].contains(&c("exists u.A")));
        assert!(g.succ.is_empty());
    }

    #[test]
    fn successor_types_are_maximal() {
        let o = parse_ontology(O_I).unwrap();
        let g = compute_types(&o, &sym("A"), &EliConfig::default()).unwrap();
        let root = &g.types[g.root];
        assert!(root.contains(&c("B")));
        let succ = g.successors(g.root);
        assert!(!succ.is_empty());
        for (r, u) in succ {
            let t = &g.types[u];
            assert!(t.contains(&c("E")), "{r}");
            // no candidate can be added while keeping the root's existential satisfied
            let lhs = Concept::and(root.concept(), Concept::exists(RoleExpr::Universal, c("A")));
            for cand in &g.candidates {
                if t.contains(cand) {
                    continue;
                }
                let ext = Concept::exists(r.clone(), Concept::and(t.concept(), cand.clone()));
                assert!(!entails_ci(&g.ontology, &lhs, &ext).unwrap(), "{cand}");
            }
        }
    }

    #[test]
    fn undirected_unfolding_walks_back() {
        let mut a = ABox::new();
        let x = a.fresh_named("x");
        let y = a.fresh_named("y");
        a.add_role("r", x, y);
        let u = UndirectedUnfolding::new(&PointedABox { abox: a, root: y }, &BTreeSet::new());
        let kids = u.children(&u.root());
        assert_eq!(kids, vec![UChild::Word(RoleExpr::Inv(sym("r")), UWord::root(y).extend(&RoleExpr::Inv(sym("r")), x))]);
        let (p, cut) = undirected_unfolding(&u.base, &BTreeSet::new(), 3, true);
        assert!(cut);
        assert_eq!(p.abox.vars().len(), 4);
    }
}
