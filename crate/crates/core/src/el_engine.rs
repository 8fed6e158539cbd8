//! Completion-based reasoning for ELRO_u: saturation over ABox individuals, nominals and
//! concept-name nodes, canonical models, Σ-reducts and directed unfoldings.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet, VecDeque};
use std::sync::Arc;

use crate::normalize::{is_normal, to_normal_form_salted, FreshNames};
use crate::semantics::{Elem, Interpretation};
use crate::types::*;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Atom {
    Top,
    Name(Sym),
    Nom(Sym),
}

impl Atom {
    pub fn of(c: &Concept) -> Option<Atom> {
        match c.node() {
            Node::Top => Some(Atom::Top),
            Node::Name(a) => Some(Atom::Name(a.clone())),
            Node::Nominal(a) => Some(Atom::Nom(a.clone())),
            _ => None,
        }
    }

    pub fn concept(&self) -> Concept {
        match self {
            Atom::Top => Concept::top(),
            Atom::Name(a) => Concept::name_sym(a.clone()),
            Atom::Nom(a) => Concept::nominal_sym(a.clone()),
        }
    }
}

impl std::fmt::Display for Atom {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.concept())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Concl {
    Atom(usize),
    Bot,
    Exists(usize, usize),
    ExistsU(usize),
}

/// A normal-form ELRO_u ontology compiled into rule indexes.
#[derive(Clone, Debug)]
pub struct Tbox {
    pub ontology: Ontology,
    atoms: Vec<Atom>,
    atom_ix: HashMap<Atom, usize>,
    roles: Vec<Sym>,
    role_ix: HashMap<Sym, usize>,
    internal: Vec<bool>,
    unary: HashMap<usize, Vec<Concl>>,
    binary: HashMap<usize, Vec<(usize, Concl)>>,
    ex_left: HashMap<(usize, usize), Vec<usize>>,
    u_left: HashMap<usize, Vec<usize>>,
    ri_sub: HashMap<usize, Vec<usize>>,
    ri_left: HashMap<usize, Vec<(usize, usize)>>,
    ri_right: HashMap<usize, Vec<(usize, usize)>>,
    individuals: Vec<Sym>,
}

fn intern<T: Clone + Eq + std::hash::Hash>(v: &mut Vec<T>, ix: &mut HashMap<T, usize>, x: &T) -> usize {
    if let Some(i) = ix.get(x) {
        return *i;
    }
    v.push(x.clone());
    ix.insert(x.clone(), v.len() - 1);
    v.len() - 1
}

impl Tbox {
    /// Normalizes if needed and builds the indexes. Rejects inverse roles.
    pub fn compile(o: &Ontology) -> Result<Arc<Tbox>> {
        let has_inverse = o.cis.iter().any(|ci| ci.lhs.dialect().inverse_roles || ci.rhs.dialect().inverse_roles);
        if has_inverse {
            return Err(Error::Dialect("the EL engine does not handle inverse roles".into()));
        }
        let o = if o.cis.iter().all(is_normal) { o.clone() } else { to_normal_form_salted(o, "E").ontology };
        let mut t = Tbox {
            ontology: o.clone(),
            atoms: vec![],
            atom_ix: HashMap::new(),
            roles: vec![],
            role_ix: HashMap::new(),
            internal: vec![],
            unary: HashMap::new(),
            binary: HashMap::new(),
            ex_left: HashMap::new(),
            u_left: HashMap::new(),
            ri_sub: HashMap::new(),
            ri_left: HashMap::new(),
            ri_right: HashMap::new(),
            individuals: signature_of(&o).individuals.into_iter().collect(),
        };
        t.atom(&Atom::Top);
        for ci in &o.cis {
            t.add_ci(ci)?;
        }
        for (k, ri) in o.ris.iter().enumerate() {
            let chain: Vec<usize> = ri.chain.iter().map(|r| t.role(r)).collect();
            let head = t.role(&ri.head);
            match chain.len() {
                0 => {}
                1 => t.ri_sub.entry(chain[0]).or_default().push(head),
                _ => {
                    let mut acc = chain[0];
                    for (j, &r) in chain.iter().enumerate().skip(1) {
                        let out = if j + 1 == chain.len() {
                            head
                        } else {
                            let q = sym(&format!("#ri{k}.{j}"));
                            let id = t.role(&q);
                            t.internal[id] = true;
                            id
                        };
                        t.ri_left.entry(acc).or_default().push((r, out));
                        t.ri_right.entry(r).or_default().push((acc, out));
                        acc = out;
                    }
                }
            }
        }
        Ok(Arc::new(t))
    }

    fn atom(&mut self, a: &Atom) -> usize {
        intern(&mut self.atoms, &mut self.atom_ix, a)
    }

    fn role(&mut self, r: &Sym) -> usize {
        let n = self.roles.len();
        let id = intern(&mut self.roles, &mut self.role_ix, r);
        if id == n {
            self.internal.push(false);
        }
        id
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
            Node::Exists(RoleExpr::Name(r), d) => {
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
                    RoleExpr::Name(r) => {
                        let r = self.role(r);
                        self.ex_left.entry((r, a)).or_default().push(x);
                    }
                    RoleExpr::Inv(_) => unreachable!(),
                }
            }
            _ => {
                let a = self.atom_of(&ci.lhs)?;
                self.unary.entry(a).or_default().push(concl);
            }
        }
        Ok(())
    }

    pub fn role_name(&self, r: usize) -> &Sym {
        &self.roles[r]
    }

    pub fn role_id(&self, r: &str) -> Option<usize> {
        self.role_ix.get(r).copied()
    }

    pub fn atom_id(&self, a: &Atom) -> Option<usize> {
        self.atom_ix.get(a).copied()
    }

    /// Binarized role inclusions: `(r, s)` for `r ⊑ s`.
    pub fn ri_subs(&self) -> Vec<(Sym, Sym)> {
        let mut v: Vec<(Sym, Sym)> = self
            .ri_sub
            .iter()
            .flat_map(|(r, ss)| ss.iter().map(move |s| (self.roles[*r].clone(), self.roles[*s].clone())))
            .collect();
        v.sort();
        v
    }

    /// Binarized role inclusions: `(r, s, t)` for `r ∘ s ⊑ t`; intermediate roles are internal.
    pub fn ri_comps(&self) -> Vec<(Sym, Sym, Sym)> {
        let mut v: Vec<(Sym, Sym, Sym)> = self
            .ri_left
            .iter()
            .flat_map(|(r, ps)| {
                ps.iter().map(move |(s, t)| (self.roles[*r].clone(), self.roles[*s].clone(), self.roles[*t].clone()))
            })
            .collect();
        v.sort();
        v
    }

    pub fn is_internal_role(&self, r: &str) -> bool {
        self.role_ix.get(r).is_some_and(|i| self.internal[*i])
    }
}

/// Where a saturation node comes from.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Origin {
    Var(Var),
    Nominal(Sym),
    Concept(Sym),
    Top,
}

#[derive(Clone, Copy, Debug)]
enum Task {
    Label(usize, usize),
    Edge(usize, usize, usize),
    Activate(usize),
}

/// Least fixpoint of the completion rules. Nodes carrying the same nominal are merged.
#[derive(Clone, Debug)]
pub struct Saturation {
    pub tbox: Arc<Tbox>,
    atoms: Vec<Atom>,
    atom_ix: HashMap<Atom, usize>,
    roles: Vec<Sym>,
    role_ix: HashMap<Sym, usize>,
    nodes: Vec<Origin>,
    node_ix: HashMap<Origin, usize>,
    uf: Vec<usize>,
    labels: Vec<HashSet<usize>>,
    succ: Vec<Vec<(usize, usize)>>,
    pred: Vec<Vec<(usize, usize)>>,
    edges: HashSet<(usize, usize, usize)>,
    active: Vec<bool>,
    /// Nodes that must appear in the model (not merely activated by a label).
    needed: Vec<bool>,
    present: HashSet<usize>,
    global: Vec<usize>,
    global_set: HashSet<usize>,
    inconsistent: bool,
    queue: VecDeque<Task>,
    pub rounds: usize,
}

impl Saturation {
    pub fn run(tbox: &Arc<Tbox>, abox: &ABox, activate: &[Sym]) -> Saturation {
        let mut s = Saturation {
            tbox: tbox.clone(),
            atoms: tbox.atoms.clone(),
            atom_ix: tbox.atom_ix.clone(),
            roles: tbox.roles.clone(),
            role_ix: tbox.role_ix.clone(),
            nodes: vec![],
            node_ix: HashMap::new(),
            uf: vec![],
            labels: vec![],
            succ: vec![],
            pred: vec![],
            edges: HashSet::new(),
            active: vec![],
            needed: vec![],
            present: HashSet::new(),
            global: vec![],
            global_set: HashSet::new(),
            inconsistent: false,
            queue: VecDeque::new(),
            rounds: 0,
        };
        let mut noms: BTreeSet<Sym> = tbox.individuals.iter().cloned().collect();
        noms.extend(signature_of(abox).individuals);
        for a in &noms {
            let n = s.node(Origin::Nominal(a.clone()));
            s.queue.push_back(Task::Activate(n));
        }
        for x in abox.vars() {
            let n = s.node(Origin::Var(x));
            s.queue.push_back(Task::Activate(n));
        }
        for asr in &abox.assertions {
            match asr {
                Assertion::Top(_) => {}
                Assertion::Concept(a, x) if a.as_ref() == BOT_MARK => {
                    let _ = x;
                    s.inconsistent = true;
                }
                Assertion::Concept(a, x) => {
                    let n = s.node(Origin::Var(*x));
                    let at = s.atom(Atom::Name(a.clone()));
                    s.queue.push_back(Task::Label(n, at));
                }
                Assertion::Nominal(a, x) => {
                    let n = s.node(Origin::Var(*x));
                    let at = s.atom(Atom::Nom(a.clone()));
                    s.queue.push_back(Task::Label(n, at));
                }
                Assertion::Role(r, x, y) => {
                    let (n, m) = (s.node(Origin::Var(*x)), s.node(Origin::Var(*y)));
                    let r = s.role(r);
                    s.queue.push_back(Task::Edge(n, r, m));
                }
            }
        }
        for a in activate {
            let n = s.node(Origin::Concept(a.clone()));
            s.need(n);
        }
        s.fixpoint();
        s
    }

    fn atom(&mut self, a: Atom) -> usize {
        intern(&mut self.atoms, &mut self.atom_ix, &a)
    }

    fn role(&mut self, r: &Sym) -> usize {
        intern(&mut self.roles, &mut self.role_ix, r)
    }

    fn node(&mut self, o: Origin) -> usize {
        if let Some(n) = self.node_ix.get(&o) {
            return *n;
        }
        let n = self.nodes.len();
        self.nodes.push(o.clone());
        self.node_ix.insert(o, n);
        self.uf.push(n);
        self.labels.push(HashSet::new());
        self.succ.push(vec![]);
        self.pred.push(vec![]);
        self.active.push(false);
        self.needed.push(!o_kind_concept(&self.nodes[n]));
        n
    }

    fn need(&mut self, n: usize) {
        self.needed[n] = true;
        self.queue.push_back(Task::Activate(n));
    }

    fn find(&self, mut n: usize) -> usize {
        while self.uf[n] != n {
            n = self.uf[n];
        }
        n
    }

    fn target(&mut self, a: usize) -> usize {
        let o = match &self.atoms[a] {
            Atom::Top => Origin::Top,
            Atom::Name(b) => Origin::Concept(b.clone()),
            Atom::Nom(b) => Origin::Nominal(b.clone()),
        };
        self.node(o)
    }

    fn fixpoint(&mut self) {
        while let Some(t) = self.queue.pop_front() {
            self.rounds += 1;
            if self.inconsistent {
                self.queue.clear();
                return;
            }
            match t {
                Task::Activate(n) => self.activate(n),
                Task::Label(n, a) => self.label(n, a),
                Task::Edge(n, r, m) => self.edge(n, r, m),
            }
        }
    }

    fn activate(&mut self, n: usize) {
        let n = self.find(n);
        if self.active[n] {
            return;
        }
        self.active[n] = true;
        self.queue.push_back(Task::Label(n, 0));
        match self.nodes[n].clone() {
            Origin::Concept(a) => {
                let at = self.atom(Atom::Name(a));
                self.queue.push_back(Task::Label(n, at));
            }
            Origin::Nominal(a) => {
                let at = self.atom(Atom::Nom(a));
                self.queue.push_back(Task::Label(n, at));
            }
            _ => {}
        }
        for g in self.global.clone() {
            self.queue.push_back(Task::Label(n, g));
        }
    }

    fn conclude(&mut self, n: usize, c: Concl) {
        match c {
            Concl::Atom(x) => self.queue.push_back(Task::Label(n, x)),
            Concl::Bot => self.inconsistent = true,
            Concl::Exists(r, y) => {
                let t = self.target(y);
                self.need(t);
                self.queue.push_back(Task::Edge(n, r, t));
            }
            Concl::ExistsU(y) => {
                let t = self.target(y);
                self.need(t);
            }
        }
    }

    fn label(&mut self, n: usize, a: usize) {
        let n = self.find(n);
        if !self.active[n] {
            self.activate(n);
        }
        if !self.labels[n].insert(a) {
            return;
        }
        if self.present.insert(a) {
            for x in self.tbox.u_left.get(&a).cloned().unwrap_or_default() {
                if self.global_set.insert(x) {
                    self.global.push(x);
                    for m in 0..self.nodes.len() {
                        if self.find(m) == m && self.active[m] {
                            self.queue.push_back(Task::Label(m, x));
                        }
                    }
                }
            }
        }
        match self.atoms[a].clone() {
            Atom::Name(b) => {
                let t = self.node(Origin::Concept(b));
                self.queue.push_back(Task::Activate(t));
            }
            Atom::Nom(b) => {
                let t = self.node(Origin::Nominal(b));
                self.merge(n, t);
            }
            Atom::Top => {}
        }
        let n = self.find(n);
        for c in self.tbox.unary.get(&a).cloned().unwrap_or_default() {
            self.conclude(n, c);
        }
        for (b, c) in self.tbox.binary.get(&a).cloned().unwrap_or_default() {
            if self.labels[n].contains(&b) {
                self.conclude(n, c);
            }
        }
        for (r, p) in self.pred[n].clone() {
            for x in self.tbox.ex_left.get(&(r, a)).cloned().unwrap_or_default() {
                self.queue.push_back(Task::Label(p, x));
            }
        }
    }

    fn edge(&mut self, n: usize, r: usize, m: usize) {
        let (n, m) = (self.find(n), self.find(m));
        if !self.edges.insert((n, r, m)) {
            return;
        }
        self.succ[n].push((r, m));
        self.pred[m].push((r, n));
        let lm: Vec<usize> = self.labels[m].iter().copied().collect();
        for a in lm {
            for x in self.tbox.ex_left.get(&(r, a)).cloned().unwrap_or_default() {
                self.queue.push_back(Task::Label(n, x));
            }
        }
        for s in self.tbox.ri_sub.get(&r).cloned().unwrap_or_default() {
            self.queue.push_back(Task::Edge(n, s, m));
        }
        for (s, t) in self.tbox.ri_left.get(&r).cloned().unwrap_or_default() {
            for (s2, k) in self.succ[m].clone() {
                if s2 == s {
                    self.queue.push_back(Task::Edge(n, t, k));
                }
            }
        }
        for (q, t) in self.tbox.ri_right.get(&r).cloned().unwrap_or_default() {
            for (q2, p) in self.pred[n].clone() {
                if q2 == q {
                    self.queue.push_back(Task::Edge(p, t, m));
                }
            }
        }
    }

    fn merge(&mut self, a: usize, b: usize) {
        let (a, b) = (self.find(a), self.find(b));
        if a == b {
            return;
        }
        let (keep, gone) = if a < b { (a, b) } else { (b, a) };
        self.uf[gone] = keep;
        self.active[keep] = true;
        self.needed[keep] = true;
        let labels = std::mem::take(&mut self.labels[gone]);
        let succ = std::mem::take(&mut self.succ[gone]);
        let pred = std::mem::take(&mut self.pred[gone]);
        for l in labels {
            self.queue.push_back(Task::Label(keep, l));
        }
        for (r, m) in succ {
            self.queue.push_back(Task::Edge(keep, r, m));
        }
        for (r, p) in pred {
            self.queue.push_back(Task::Edge(p, r, keep));
        }
    }

    pub fn inconsistent(&self) -> bool {
        self.inconsistent
    }

    fn var_rep(&self, x: Var) -> Option<usize> {
        self.node_ix.get(&Origin::Var(x)).map(|n| self.find(*n))
    }

    pub fn origin_rep(&self, o: &Origin) -> Option<usize> {
        self.node_ix.get(o).map(|n| self.find(*n)).filter(|n| self.active[*n])
    }

    /// Whether the atom holds at the ABox individual `x`.
    pub fn holds_atom(&self, x: Var, a: &Atom) -> bool {
        if self.inconsistent {
            return true;
        }
        match (self.var_rep(x), self.atom_ix.get(a)) {
            (Some(n), Some(i)) => self.labels[n].contains(i),
            (Some(_), None) => false,
            (None, _) => *a == Atom::Top,
        }
    }

    /// Atoms derived at a node.
    pub fn atoms_at(&self, o: &Origin) -> BTreeSet<Atom> {
        match self.origin_rep(o) {
            Some(n) => self.labels[n].iter().map(|i| self.atoms[*i].clone()).collect(),
            None => BTreeSet::new(),
        }
    }

    /// Concept names whose node is active (nonempty in every model).
    pub fn realized(&self) -> BTreeSet<Sym> {
        self.nodes
            .iter()
            .enumerate()
            .filter_map(|(i, o)| match o {
                Origin::Concept(a) if self.active[self.find(i)] => Some(a.clone()),
                _ => None,
            })
            .collect()
    }

    /// Role successors of a node (real roles only), as origins of the target representatives.
    pub fn successors(&self, o: &Origin) -> Vec<(Sym, BTreeSet<Origin>)> {
        let Some(n) = self.origin_rep(o) else { return vec![] };
        let mut out = vec![];
        for &(r, m) in &self.succ[n] {
            if r < self.tbox.internal.len() && self.tbox.internal[r] {
                continue;
            }
            out.push((self.roles[r].clone(), self.members(self.find(m))));
        }
        out.sort();
        out.dedup();
        out
    }

    fn members(&self, rep: usize) -> BTreeSet<Origin> {
        (0..self.nodes.len()).filter(|i| self.find(*i) == rep).map(|i| self.nodes[i].clone()).collect()
    }

    /// The saturated structure as an interpretation: one element per active class.
    pub fn model(&self) -> (Interpretation, BTreeMap<Var, Elem>, Vec<BTreeSet<Origin>>) {
        let mut interp = Interpretation::new();
        let mut elem_of: HashMap<usize, Elem> = HashMap::new();
        let mut origins: Vec<BTreeSet<Origin>> = vec![];
        let mut used_names: HashSet<String> = HashSet::new();
        let mut reps: Vec<usize> =
            (0..self.nodes.len()).filter(|i| self.find(*i) == *i && self.active[*i] && self.needed[*i]).collect();
        reps.sort_by_key(|r| self.nodes[*r].clone());
        for r in reps {
            let mem = self.members(r);
            let noms: Vec<String> =
                mem.iter().filter_map(|o| if let Origin::Nominal(a) = o { Some(a.to_string()) } else { None }).collect();
            let base = if !noms.is_empty() {
                format!("[{}]", noms.join("="))
            } else {
                match &self.nodes[r] {
                    Origin::Var(v) => v.to_string(),
                    Origin::Concept(a) => a.to_string(),
                    Origin::Top => "Top".to_string(),
                    Origin::Nominal(a) => format!("[{a}]"),
                }
            };
            let mut name = base.clone();
            while !used_names.insert(name.clone()) {
                name.push('\'');
            }
            let e = interp.add_elem(name);
            elem_of.insert(r, e);
            origins.push(mem);
        }
        for (&r, &e) in &elem_of {
            for &a in &self.labels[r] {
                match &self.atoms[a] {
                    Atom::Name(b) => interp.add_concept(b, e),
                    Atom::Nom(b) => interp.set_individual(b, e),
                    Atom::Top => {}
                }
            }
        }
        for (i, a) in self.atoms.iter().enumerate() {
            if let Atom::Name(b) = a {
                let _ = i;
                interp.concepts.entry(b.clone()).or_default();
            }
        }
        for (ri, r) in self.roles.iter().enumerate() {
            if ri < self.tbox.internal.len() && self.tbox.internal[ri] {
                continue;
            }
            interp.roles.entry(r.clone()).or_default();
        }
        for &(x, r, y) in &self.edges {
            if r < self.tbox.internal.len() && self.tbox.internal[r] {
                continue;
            }
            let (x, y) = (self.find(x), self.find(y));
            if let (Some(&ex), Some(&ey)) = (elem_of.get(&x), elem_of.get(&y)) {
                interp.add_role(&self.roles[r], ex, ey);
            }
        }
        let mut assign = BTreeMap::new();
        for (o, &n) in &self.node_ix {
            if let Origin::Var(v) = o {
                if let Some(&e) = elem_of.get(&self.find(n)) {
                    assign.insert(*v, e);
                }
            }
        }
        (interp, assign, origins)
    }
}

fn o_kind_concept(o: &Origin) -> bool {
    matches!(o, Origin::Concept(_))
}

/// The ABox `{A(x0)}`.
pub fn seed_abox(a: &Sym) -> ABox {
    let mut ab = ABox::new();
    let x = ab.fresh();
    ab.add_top(x);
    ab.add_concept(a, x);
    ab
}

pub fn saturate(o: &Ontology, abox: &ABox) -> Result<Saturation> {
    let t = Tbox::compile(o)?;
    Ok(Saturation::run(&t, abox, &[]))
}

/// `O, A ⊨ C(x)`, via a fresh name for `C`.
pub fn entails_assertion(o: &Ontology, abox: &ABox, c: &Concept, x: Var) -> Result<bool> {
    if let Some(a) = Atom::of(c) {
        return Ok(saturate(o, abox)?.holds_atom(x, &a));
    }
    if c.is_bot() {
        return Ok(saturate(o, abox)?.inconsistent());
    }
    let mut avoid = signature_of(o).union(&signature_of(abox));
    avoid = avoid.union(&signature_of(c));
    let q = FreshNames::new("Q", &avoid).plain("Q");
    let mut ext = o.clone();
    ext.add_ci(CI::new(c.clone(), Concept::name_sym(q.clone())));
    let s = saturate(&ext, abox)?;
    Ok(s.holds_atom(x, &Atom::Name(q)))
}

/// `O ⊨ C ⊑ D`.
pub fn entails_ci(o: &Ontology, c: &Concept, d: &Concept) -> Result<bool> {
    let (p, _) = concept_to_pointed_abox(c, &Signature::new());
    entails_assertion(o, &p.abox, d, p.root)
}

/// `O ∪ O_Σ ⊨ A ≡ A'` with `O_Σ` the copy of `O` renamed outside Σ.
pub fn implicitly_definable(o: &Ontology, a: &Sym, sigma: &Signature) -> Result<bool> {
    let (renamed, ren) = crate::normalize::rename_outside_sigma(o, sigma);
    let both = o.union(&renamed);
    let a1 = Concept::name_sym(a.clone());
    let a2 = Concept::name_sym(ren.concept(a));
    Ok(entails_ci(&both, &a1, &a2)? && entails_ci(&both, &a2, &a1)?)
}

/// Canonical model for a concept name: nominal classes plus non-absorbed realized names.
#[derive(Clone, Debug)]
pub struct CanonicalModel {
    pub interp: Interpretation,
    pub root: Elem,
    pub provenance: Vec<BTreeSet<Origin>>,
    pub inconsistent: bool,
}

impl CanonicalModel {
    pub fn interpretation(&self) -> (&Interpretation, Elem) {
        (&self.interp, self.root)
    }
}

pub fn canonical_model(o: &Ontology, a0: &Sym) -> Result<CanonicalModel> {
    let t = Tbox::compile(o)?;
    let s = Saturation::run(&t, &ABox::new(), std::slice::from_ref(a0));
    let (interp, _, provenance) = s.model();
    let mut sig = signature_of(o);
    sig.concepts.insert(a0.clone());
    let mut interp = interp.reduct(&sig);
    interp.declare(&sig);
    let root = provenance
        .iter()
        .position(|m| m.contains(&Origin::Concept(a0.clone())))
        .expect("the seed concept is active");
    Ok(CanonicalModel { interp, root, provenance, inconsistent: s.inconsistent() })
}

pub fn canonical_model_abox(o: &Ontology, abox: &ABox) -> Result<(Interpretation, BTreeMap<Var, Elem>)> {
    let s = saturate(o, abox)?;
    let (interp, assign, _) = s.model();
    let sig = signature_of(o).union(&signature_of(abox));
    let mut interp = interp.reduct(&sig);
    interp.declare(&sig);
    Ok((interp, assign))
}

/// Σ-reduct of an interpretation read as a pointed ABox (one variable per element).
pub fn sigma_reduct_abox(i: &Interpretation, root: Elem, sigma: &Signature) -> PointedABox {
    let mut a = ABox::new();
    let vars: Vec<Var> = i.domain.iter().map(|d| a.fresh_named(d.clone())).collect();
    for &v in &vars {
        a.add_top(v);
    }
    for (c, ext) in &i.concepts {
        if sigma.concepts.contains(c) {
            for &d in ext {
                a.add_concept(c, vars[d]);
            }
        }
    }
    for (n, &d) in &i.individuals {
        if sigma.individuals.contains(n) {
            a.add_nominal(n, vars[d]);
        }
    }
    for (r, ps) in &i.roles {
        if sigma.roles.contains(r) {
            for &(d, e) in ps {
                a.add_role(r, vars[d], vars[e]);
            }
        }
    }
    PointedABox { abox: a, root: vars[root] }
}

/// Sub-ABox of the variables reachable from the root along role edges.
pub fn rooted_part(p: &PointedABox) -> PointedABox {
    let keep = reachable(&p.abox, p.root, true);
    PointedABox { abox: p.abox.restrict_to(&keep), root: p.root }
}

/// Word `x0 r1 x1 … rn xn` of the directed unfolding.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Word {
    pub start: Var,
    pub steps: Vec<(Sym, Var)>,
}

impl Word {
    pub fn root(x: Var) -> Word {
        Word { start: x, steps: vec![] }
    }

    pub fn tail(&self) -> Var {
        self.steps.last().map(|s| s.1).unwrap_or(self.start)
    }

    pub fn extend(&self, r: &Sym, x: Var) -> Word {
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

    pub fn parent(&self) -> Option<Word> {
        if self.steps.is_empty() {
            None
        } else {
            let mut w = self.clone();
            w.steps.pop();
            Some(w)
        }
    }

    pub fn prefixes(&self) -> Vec<Word> {
        (0..=self.steps.len()).map(|k| Word { start: self.start, steps: self.steps[..k].to_vec() }).collect()
    }

    pub fn show(&self, a: &ABox) -> String {
        let mut s = a.display(self.start);
        for (r, x) in &self.steps {
            s += &format!(".{r}.{}", a.display(*x));
        }
        s
    }
}

/// Directed unfolding modulo Γ, generated lazily.
#[derive(Clone, Debug)]
pub struct DirectedUnfolding {
    pub base: ABox,
    pub root: Var,
    pub anchored: BTreeMap<Var, Sym>,
    out: BTreeMap<Var, Vec<(Sym, Var)>>,
}

/// A child of a word: either a fresh word or a direct edge back to an anchored variable.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Child {
    Word(Sym, Word),
    Anchor(Sym, Var),
}

impl DirectedUnfolding {
    pub fn new(p: &PointedABox, gamma: &BTreeSet<Sym>) -> DirectedUnfolding {
        let mut anchored = BTreeMap::new();
        for asr in &p.abox.assertions {
            if let Assertion::Nominal(a, x) = asr {
                if gamma.contains(a) {
                    anchored.entry(*x).or_insert_with(|| a.clone());
                }
            }
        }
        let mut out: BTreeMap<Var, Vec<(Sym, Var)>> = BTreeMap::new();
        for (r, x, y) in p.abox.role_edges() {
            out.entry(x).or_default().push((r.clone(), y));
        }
        DirectedUnfolding { base: p.abox.clone(), root: p.root, anchored, out }
    }

    pub fn children(&self, w: &Word) -> Vec<Child> {
        self.out
            .get(&w.tail())
            .map(|es| {
                es.iter()
                    .map(|(r, x)| {
                        if self.anchored.contains_key(x) {
                            Child::Anchor(r.clone(), *x)
                        } else {
                            Child::Word(r.clone(), w.extend(r, *x))
                        }
                    })
                    .collect()
            })
            .unwrap_or_default()
    }

    pub fn is_word(&self, w: &Word) -> bool {
        let mut cur = w.start;
        for (r, x) in &w.steps {
            if self.anchored.contains_key(x) || !self.base.contains(&Assertion::Role(r.clone(), cur, *x)) {
                return false;
            }
            cur = *x;
        }
        self.base.vars().contains(&w.start)
    }

    /// Materializes the restriction of the unfolding to a prefix-closed set of words.
    pub fn restrict(&self, words: &BTreeSet<Word>) -> (PointedABox, BTreeMap<Word, Var>) {
        let mut closed: BTreeSet<Word> = BTreeSet::new();
        for w in words {
            closed.extend(w.prefixes());
        }
        closed.insert(Word::root(self.root));
        let mut a = ABox::new();
        let mut var_of: BTreeMap<Word, Var> = BTreeMap::new();
        for w in &closed {
            let v = a.fresh_named(w.show(&self.base));
            var_of.insert(w.clone(), v);
        }
        for (w, &v) in &var_of {
            a.add_top(v);
            for c in self.base.concepts_at(w.tail()) {
                a.add_concept(&c, v);
            }
            if w.is_empty() {
                if let Some(n) = self.anchored.get(&w.start) {
                    for m in self.base.nominals_at(w.start) {
                        let _ = n;
                        a.add_nominal(&m, v);
                    }
                }
            }
            for ch in self.children(w) {
                match ch {
                    Child::Word(r, w2) => {
                        if let Some(&v2) = var_of.get(&w2) {
                            a.add_role(&r, v, v2);
                        }
                    }
                    Child::Anchor(r, x) => {
                        if let Some(&v2) = var_of.get(&Word::root(x)) {
                            a.add_role(&r, v, v2);
                        }
                    }
                }
            }
        }
        let root = var_of[&Word::root(self.root)];
        (PointedABox { abox: a, root }, var_of)
    }

    /// All words up to `depth` (rooted: only words starting at the root and the anchors).
    pub fn materialize(&self, depth: usize, rooted: bool) -> (PointedABox, BTreeMap<Word, Var>, bool) {
        let mut starts: Vec<Var> = vec![self.root];
        if !rooted {
            starts.extend(self.base.vars().into_iter().filter(|v| *v != self.root));
        } else {
            starts.extend(self.anchored.keys().copied().filter(|v| *v != self.root));
        }
        let mut words = BTreeSet::new();
        let mut truncated = false;
        let mut frontier: Vec<Word> = starts.into_iter().map(Word::root).collect();
        for _ in 0..=depth {
            let mut next = vec![];
            for w in frontier {
                if !words.insert(w.clone()) {
                    continue;
                }
                for ch in self.children(&w) {
                    if let Child::Word(_, w2) = ch {
                        next.push(w2);
                    }
                }
            }
            frontier = next;
        }
        if !frontier.is_empty() {
            truncated = true;
        }
        let (p, m) = self.restrict(&words);
        (p, m, truncated)
    }

    /// Shortest word from the root or an anchor whose tail is `x` (anchored variables map to themselves).
    pub fn word_to(&self, x: Var) -> Word {
        if self.anchored.contains_key(&x) || x == self.root {
            return Word::root(x);
        }
        let mut seen = BTreeSet::from([self.root]);
        seen.extend(self.anchored.keys().copied());
        let mut queue = VecDeque::from([Word::root(self.root)]);
        queue.extend(self.anchored.keys().filter(|a| **a != self.root).map(|a| Word::root(*a)));
        while let Some(w) = queue.pop_front() {
            for ch in self.children(&w) {
                if let Child::Word(_, w2) = ch {
                    if w2.tail() == x {
                        return w2;
                    }
                    if seen.insert(w2.tail()) {
                        queue.push_back(w2);
                    }
                }
            }
        }
        Word::root(x)
    }
}

/// Shape witness of a materialized unfolding: edges into anchors are set aside.
pub fn unfolding_witness(p: &PointedABox, gamma: &BTreeSet<Sym>) -> ShapeWitness {
    ShapeWitness::infer(p, gamma)
}

pub fn directed_unfolding(p: &PointedABox, gamma: &BTreeSet<Sym>, depth: usize, rooted: bool) -> (PointedABox, bool) {
    let u = DirectedUnfolding::new(p, gamma);
    let (q, _, truncated) = u.materialize(depth, rooted);
    (q, truncated)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::semantics::{check_model, eval_concept};
    use crate::textio::{o_p, parse_concept, parse_ontology, O_NOMINAL, O_R, O_U};

    fn c(s: &str) -> Concept {
        parse_concept(s).unwrap()
    }

    #[test]
    fn trivial_saturation() {
        let s = saturate(&Ontology::empty(), &seed_abox(&sym("A"))).unwrap();
        assert!(s.holds_atom(Var(0), &Atom::Name(sym("A"))));
        assert!(s.holds_atom(Var(0), &Atom::Top));
        assert_eq!(s.realized(), BTreeSet::from([sym("A")]));
    }

    #[test]
    fn simple_existential() {
        let o = parse_ontology("A <= exists r.B").unwrap();
        assert!(entails_assertion(&o, &seed_abox(&sym("A")), &c("exists r.B"), Var(0)).unwrap());
        assert!(!entails_assertion(&o, &seed_abox(&sym("A")), &c("exists r.A"), Var(0)).unwrap());
        assert!(entails_ci(&Ontology::empty(), &c("A"), &Concept::top()).unwrap());
    }

    #[test]
    fn universal_role_fires_at_c_node() {
        let o = parse_ontology(O_U).unwrap();
        assert!(entails_assertion(&o, &seed_abox(&sym("A")), &c("B & exists r.(C & E)"), Var(0)).unwrap());
    }

    #[test]
    fn canonical_model_of_o_u() {
        let o = parse_ontology(O_U).unwrap();
        let m = canonical_model(&o, &sym("A")).unwrap();
        let (i, root) = m.interpretation();
        assert_eq!(i.size(), 2);
        let root_concepts: BTreeSet<Sym> =
            i.concepts.iter().filter(|(_, e)| e.contains(&root)).map(|(k, _)| k.clone()).collect();
        assert_eq!(root_concepts, BTreeSet::from([sym("A"), sym("B")]));
        assert_eq!(check_model(i, &o).unwrap(), None);
    }

    #[test]
    fn canonical_model_nominal_root() {
        let o = parse_ontology(O_NOMINAL).unwrap();
        let m = canonical_model(&o, &sym("A")).unwrap();
        assert!(m.provenance[m.root].contains(&Origin::Nominal(sym("b"))));
        assert_eq!(check_model(&m.interp, &o).unwrap(), None);
        let sigma = Signature::from_names(&["B"], &[], &["b"]);
        let p = sigma_reduct_abox(&m.interp, m.root, &sigma);
        assert_eq!(p.abox.vars().len(), 2);
        let r = rooted_part(&p);
        assert_eq!(r.abox.vars().len(), 1);
        assert!(r.abox.nominals_at(r.root).contains("b"));
    }

    #[test]
    fn o_r_definable() {
        let o = parse_ontology(O_R).unwrap();
        assert!(implicitly_definable(&o, &sym("A"), &Signature::from_names(&["E"], &["s"], &[])).unwrap());
    }

    #[test]
    fn o_u_definable() {
        let o = parse_ontology(O_U).unwrap();
        assert!(implicitly_definable(&o, &sym("A"), &Signature::from_names(&["B", "D", "E"], &["r"], &[])).unwrap());
    }

    #[test]
    fn role_chain_doubling() {
        let path = |k: usize| (0..k).fold(Concept::name("B"), |c, _| Concept::some("r0", c));
        for n in 1..=3 {
            let o = o_p(n);
            assert!(entails_ci(&o, &path(1 << n), &Concept::name("A")).unwrap(), "n={n}");
            assert!(!entails_ci(&o, &Concept::top(), &Concept::name("A")).unwrap(), "n={n}");
            // without the B-loop only paths of length 2^n reach r_n
            let mut bare = o.clone();
            bare.cis.retain(|ci| ci.lhs != Concept::name("B"));
            assert!(entails_ci(&bare, &path(1 << n), &Concept::name("A")).unwrap());
            assert!(!entails_ci(&bare, &path((1 << n) - 1), &Concept::name("A")).unwrap());
        }
    }

    #[test]
    fn nominal_merge_transfers_labels() {
        let o = parse_ontology("A <= {a}\n{a} <= B\nC <= {a}\nC <= exists r.D").unwrap();
        let mut ab = ABox::new();
        let x = ab.fresh();
        let y = ab.fresh();
        ab.add_concept("A", x);
        ab.add_concept("C", y);
        let s = saturate(&o, &ab).unwrap();
        assert!(s.holds_atom(x, &Atom::Name(sym("B"))));
        assert!(entails_assertion(&o, &ab, &c("exists r.D"), x).unwrap());
    }

    #[test]
    fn bottom_detected() {
        let o = parse_ontology("A & B <= Bot\nC <= A\nC <= B").unwrap();
        assert!(entails_ci(&o, &c("C"), &Concept::bot()).unwrap());
        assert!(!entails_ci(&o, &c("A"), &Concept::bot()).unwrap());
    }

    #[test]
    fn model_evaluation_agrees() {
        let o = parse_ontology(O_U).unwrap();
        let (i, v) = canonical_model_abox(&o, &seed_abox(&sym("A"))).unwrap();
        let x = v[&Var(0)];
        for s in ["B", "exists r.(C & E)", "exists r.D", "A & exists u.E"] {
            let e = eval_concept(&i, &c(s)).unwrap();
            assert_eq!(e.contains(&x), entails_assertion(&o, &seed_abox(&sym("A")), &c(s), Var(0)).unwrap(), "{s}");
        }
    }

    #[test]
    fn loop_unfolds_to_path() {
        let mut a = ABox::new();
        let x = a.fresh();
        a.add_role("r", x, x);
        let p = PointedABox { abox: a, root: x };
        let (q, trunc) = directed_unfolding(&p, &BTreeSet::new(), 2, true);
        assert!(trunc);
        assert_eq!(q.abox.vars().len(), 3);
        assert_eq!(q.abox.role_edges().count(), 2);
    }

    #[test]
    fn anchored_target_keeps_direct_edge() {
        let mut a = ABox::new();
        let w = a.fresh();
        let x = a.fresh();
        a.add_nominal("a", x);
        a.add_role("r", w, x);
        a.add_role("s", x, w);
        let p = PointedABox { abox: a, root: w };
        let u = DirectedUnfolding::new(&p, &BTreeSet::from([sym("a")]));
        assert_eq!(u.children(&Word::root(w)), vec![Child::Anchor(sym("r"), x)]);
        let (q, _, _) = u.materialize(3, true);
        assert!(q.abox.role_edges().any(|(r, _, y)| r.as_ref() == "r" && q.abox.nominals_at(y).contains("a")));
    }
}
