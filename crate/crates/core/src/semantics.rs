//! Finite interpretations, evaluation, model checking, simulations and diagrams.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::types::*;
use crate::{Error, Result};

pub type Elem = usize;

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Interpretation {
    pub domain: Vec<String>,
    pub concepts: BTreeMap<Sym, BTreeSet<Elem>>,
    pub roles: BTreeMap<Sym, BTreeSet<(Elem, Elem)>>,
    pub individuals: BTreeMap<Sym, Elem>,
}

#[derive(Serialize, Deserialize)]
struct InterpJson {
    domain: Vec<String>,
    #[serde(default)]
    concepts: BTreeMap<String, Vec<String>>,
    #[serde(default)]
    roles: BTreeMap<String, Vec<(String, String)>>,
    #[serde(default)]
    individuals: BTreeMap<String, String>,
}

impl Interpretation {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_elem(&mut self, name: impl Into<String>) -> Elem {
        self.domain.push(name.into());
        self.domain.len() - 1
    }

    pub fn elem(&self, name: &str) -> Option<Elem> {
        self.domain.iter().position(|d| d == name)
    }

    pub fn size(&self) -> usize {
        self.domain.len()
    }

    pub fn add_concept(&mut self, a: &str, d: Elem) {
        self.concepts.entry(sym(a)).or_default().insert(d);
    }

    pub fn add_role(&mut self, r: &str, d: Elem, e: Elem) {
        self.roles.entry(sym(r)).or_default().insert((d, e));
    }

    pub fn set_individual(&mut self, a: &str, d: Elem) {
        self.individuals.insert(sym(a), d);
    }

    /// Make every symbol of `sig` known (with empty extension when new).
    pub fn declare(&mut self, sig: &Signature) {
        for a in &sig.concepts {
            self.concepts.entry(a.clone()).or_default();
        }
        for r in &sig.roles {
            self.roles.entry(r.clone()).or_default();
        }
    }

    pub fn signature(&self) -> Signature {
        Signature {
            concepts: self.concepts.keys().cloned().collect(),
            roles: self.roles.keys().cloned().collect(),
            individuals: self.individuals.keys().cloned().collect(),
        }
    }

    /// Σ-reduct: drops symbols outside Σ.
    pub fn reduct(&self, sigma: &Signature) -> Interpretation {
        Interpretation {
            domain: self.domain.clone(),
            concepts: self.concepts.iter().filter(|(k, _)| sigma.concepts.contains(*k)).map(|(k, v)| (k.clone(), v.clone())).collect(),
            roles: self.roles.iter().filter(|(k, _)| sigma.roles.contains(*k)).map(|(k, v)| (k.clone(), v.clone())).collect(),
            individuals: self
                .individuals
                .iter()
                .filter(|(k, _)| sigma.individuals.contains(*k))
                .map(|(k, v)| (k.clone(), *v))
                .collect(),
        }
    }

    /// Pairs of `ρ` (named or inverse role) as (from, to).
    pub fn role_pairs(&self, r: &RoleExpr) -> Vec<(Elem, Elem)> {
        match r {
            RoleExpr::Name(s) => self.roles.get(s).map(|p| p.iter().copied().collect()).unwrap_or_default(),
            RoleExpr::Inv(s) => self.roles.get(s).map(|p| p.iter().map(|(a, b)| (*b, *a)).collect()).unwrap_or_default(),
            RoleExpr::Universal => {
                let n = self.size();
                (0..n).flat_map(|a| (0..n).map(move |b| (a, b))).collect()
            }
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        let name = |d: &Elem| self.domain[*d].clone();
        let j = InterpJson {
            domain: self.domain.clone(),
            concepts: self.concepts.iter().map(|(k, v)| (k.to_string(), v.iter().map(name).collect())).collect(),
            roles: self.roles.iter().map(|(k, v)| (k.to_string(), v.iter().map(|(a, b)| (name(a), name(b))).collect())).collect(),
            individuals: self.individuals.iter().map(|(k, v)| (k.to_string(), name(v))).collect(),
        };
        serde_json::to_value(j).expect("serializable")
    }

    pub fn from_json(v: &serde_json::Value) -> Result<Interpretation> {
        let j: InterpJson = serde_json::from_value(v.clone()).map_err(|e| Error::Invalid(e.to_string()))?;
        let mut i = Interpretation::new();
        for d in &j.domain {
            i.add_elem(d.clone());
        }
        let look = |i: &Interpretation, d: &str| i.elem(d).ok_or_else(|| Error::UnknownSymbol(format!("element {d}")));
        for (a, ds) in &j.concepts {
            i.concepts.entry(sym(a)).or_default();
            for d in ds {
                let e = look(&i, d)?;
                i.add_concept(a, e);
            }
        }
        for (r, ps) in &j.roles {
            i.roles.entry(sym(r)).or_default();
            for (a, b) in ps {
                let (x, y) = (look(&i, a)?, look(&i, b)?);
                i.add_role(r, x, y);
            }
        }
        for (a, d) in &j.individuals {
            let e = look(&i, d)?;
            i.set_individual(a, e);
        }
        Ok(i)
    }
}

pub fn eval_concept(i: &Interpretation, c: &Concept) -> Result<BTreeSet<Elem>> {
    let all: BTreeSet<Elem> = (0..i.size()).collect();
    Ok(match c.node() {
        Node::Top => all,
        Node::Bot => BTreeSet::new(),
        Node::Name(a) => i.concepts.get(a).cloned().ok_or_else(|| Error::UnknownSymbol(a.to_string()))?,
        Node::Nominal(a) => {
            let d = i.individuals.get(a).ok_or_else(|| Error::UnknownSymbol(format!("{{{a}}}")))?;
            BTreeSet::from([*d])
        }
        Node::And(cs) => {
            let mut acc = all;
            for d in cs {
                let e = eval_concept(i, d)?;
                acc = acc.intersection(&e).copied().collect();
            }
            acc
        }
        Node::Exists(RoleExpr::Universal, d) => {
            if eval_concept(i, d)?.is_empty() {
                BTreeSet::new()
            } else {
                all
            }
        }
        Node::Exists(r, d) => {
            let base = r.base().unwrap();
            if !i.roles.contains_key(base) {
                return Err(Error::UnknownSymbol(base.to_string()));
            }
            let ext = eval_concept(i, d)?;
            i.role_pairs(r).into_iter().filter(|(_, y)| ext.contains(y)).map(|(x, _)| x).collect()
        }
    })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Axiom {
    Ci(CI),
    Ri(RI),
}

impl std::fmt::Display for Axiom {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Axiom::Ci(c) => write!(f, "{c}"),
            Axiom::Ri(r) => write!(f, "{r}"),
        }
    }
}

/// `Ok(None)` if `i` is a model of `o`, otherwise the first violated axiom.
pub fn check_model(i: &Interpretation, o: &Ontology) -> Result<Option<Axiom>> {
    for ci in &o.cis {
        let l = eval_concept(i, &ci.lhs)?;
        let r = eval_concept(i, &ci.rhs)?;
        if !l.is_subset(&r) {
            return Ok(Some(Axiom::Ci(ci.clone())));
        }
    }
    for ri in &o.ris {
        let get = |r: &Sym| i.roles.get(r).cloned().ok_or_else(|| Error::UnknownSymbol(r.to_string()));
        let mut comp = get(&ri.chain[0])?;
        for r in &ri.chain[1..] {
            let next = get(r)?;
            let mut out = BTreeSet::new();
            for (a, b) in &comp {
                for (c, d) in next.range((*b, 0)..(*b + 1, 0)) {
                    debug_assert_eq!(b, c);
                    out.insert((*a, *d));
                }
            }
            comp = out;
        }
        let head = get(&ri.head)?;
        if !comp.is_subset(&head) {
            return Ok(Some(Axiom::Ri(ri.clone())));
        }
    }
    Ok(None)
}

pub fn is_model(i: &Interpretation, o: &Ontology) -> bool {
    matches!(check_model(i, o), Ok(None))
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Removal {
    Concept(Sym),
    Nominal(Sym),
    Edge(RoleExpr, Elem),
}

#[derive(Clone, Debug)]
pub struct SimulationRelation {
    pub pairs: BTreeSet<(Elem, Elem)>,
    pub dialect: Dialect,
    pub sigma: Signature,
    /// Every element of the left interpretation is simulated by some element of the right one.
    pub total: bool,
    removed: BTreeMap<(Elem, Elem), Removal>,
}

impl SimulationRelation {
    pub fn contains(&self, d: Elem, e: Elem) -> bool {
        self.pairs.contains(&(d, e))
    }

    /// Whether `(I,d)` is simulated by `(J,e)` in the dialect's sense (totality for _u).
    pub fn simulates(&self, d: Elem, e: Elem) -> bool {
        self.contains(d, e) && (!self.dialect.universal_role || self.total)
    }

    /// A Σ-concept true at `d` in I and false at `e` in J, built from the pruning history.
    /// Only defined for pairs outside the relation.
    pub fn distinguishing_concept(&self, i: &Interpretation, j: &Interpretation, d: Elem, e: Elem) -> Option<Concept> {
        let why = self.removed.get(&(d, e))?;
        Some(match why {
            Removal::Concept(a) => Concept::name_sym(a.clone()),
            Removal::Nominal(a) => Concept::nominal_sym(a.clone()),
            Removal::Edge(r, d2) => {
                let succ: Vec<Elem> = j.role_pairs(r).into_iter().filter(|(x, _)| *x == e).map(|(_, y)| y).collect();
                let mut parts = Vec::new();
                for e2 in succ {
                    parts.push(self.distinguishing_concept(i, j, *d2, e2)?);
                }
                Concept::exists(r.clone(), Concept::conj(parts))
            }
        })
    }
}

/// Greatest Σ-simulation from `i` to `j` for the dialect (nominal condition only with nominals,
/// inverse edges only with inverses; totality reported separately).
pub fn max_simulation(i: &Interpretation, j: &Interpretation, sigma: &Signature, dialect: Dialect) -> SimulationRelation {
    let mut roles: Vec<RoleExpr> = Vec::new();
    for r in &sigma.roles {
        roles.push(RoleExpr::Name(r.clone()));
        if dialect.inverse_roles {
            roles.push(RoleExpr::Inv(r.clone()));
        }
    }
    let succ = |m: &Interpretation, r: &RoleExpr| -> Vec<Vec<Elem>> {
        let mut v = vec![Vec::new(); m.size()];
        for (a, b) in m.role_pairs(r) {
            v[a].push(b);
        }
        v
    };
    let si: Vec<Vec<Vec<Elem>>> = roles.iter().map(|r| succ(i, r)).collect();
    let sj: Vec<Vec<Vec<Elem>>> = roles.iter().map(|r| succ(j, r)).collect();
    let empty = BTreeSet::new();
    let mut rel = vec![vec![true; j.size()]; i.size()];
    let mut removed = BTreeMap::new();
    for d in 0..i.size() {
        for e in 0..j.size() {
            for a in &sigma.concepts {
                let di = i.concepts.get(a).unwrap_or(&empty).contains(&d);
                if di && !j.concepts.get(a).unwrap_or(&empty).contains(&e) {
                    rel[d][e] = false;
                    removed.insert((d, e), Removal::Concept(a.clone()));
                    break;
                }
            }
            if rel[d][e] && dialect.nominals {
                for a in &sigma.individuals {
                    if i.individuals.get(a) == Some(&d) && j.individuals.get(a) != Some(&e) {
                        rel[d][e] = false;
                        removed.insert((d, e), Removal::Nominal(a.clone()));
                        break;
                    }
                }
            }
        }
    }
    let mut changed = true;
    while changed {
        changed = false;
        for d in 0..i.size() {
            for e in 0..j.size() {
                if !rel[d][e] {
                    continue;
                }
                'roles: for (k, r) in roles.iter().enumerate() {
                    for &d2 in &si[k][d] {
                        if !sj[k][e].iter().any(|&e2| rel[d2][e2]) {
                            rel[d][e] = false;
                            removed.insert((d, e), Removal::Edge(r.clone(), d2));
                            changed = true;
                            break 'roles;
                        }
                    }
                }
            }
        }
    }
    let mut pairs = BTreeSet::new();
    for (d, row) in rel.iter().enumerate() {
        for (e, ok) in row.iter().enumerate() {
            if *ok {
                pairs.insert((d, e));
            }
        }
    }
    let total = (0..i.size()).all(|d| rel[d].iter().any(|x| *x));
    SimulationRelation { pairs, dialect, sigma: sigma.clone(), total, removed }
}

/// Diagram of `i` over fresh names `X_d`. Returns the ontology and the name of every element.
pub fn diagram(i: &Interpretation, sigma: &Signature, with_universal: bool) -> (Ontology, Vec<Sym>) {
    let names: Vec<Sym> = (0..i.size()).map(|d| sym(&format!("_X{d}"))).collect();
    let x = |d: Elem| Concept::name_sym(names[d].clone());
    let mut cis = Vec::new();
    for (a, ext) in &i.concepts {
        if sigma.concepts.contains(a) {
            for &d in ext {
                cis.push(CI::new(x(d), Concept::name_sym(a.clone())));
            }
        }
    }
    for (b, &d) in &i.individuals {
        if sigma.individuals.contains(b) {
            cis.push(CI::new(x(d), Concept::nominal_sym(b.clone())));
        }
    }
    for (r, ps) in &i.roles {
        if sigma.roles.contains(r) {
            for &(d, e) in ps {
                cis.push(CI::new(x(d), Concept::some(r, x(e))));
            }
        }
    }
    if with_universal {
        for d in 0..i.size() {
            for e in 0..i.size() {
                cis.push(CI::new(x(d), Concept::exists(RoleExpr::Universal, x(e))));
            }
        }
    }
    (Ontology::new(cis, vec![]), names)
}

/// Existence of an ELO(_u)-interpolant for `A ⊑ B` via the diagram of the canonical model.
pub fn interpolant_exists_via_diagram(o1: &Ontology, o2: &Ontology, a: &Sym, b: &Sym, with_universal: bool) -> Result<bool> {
    let mut s1 = signature_of(o1);
    s1.concepts.insert(a.clone());
    let mut s2 = signature_of(o2);
    s2.concepts.insert(b.clone());
    let sigma = s1.intersect(&s2);
    let o = o1.union(o2);
    let cm = crate::el_engine::canonical_model(&o, a)?;
    let (interp, root) = cm.interpretation();
    let (d, names) = diagram(&interp.reduct(&sigma), &sigma, with_universal);
    let full = o.union(&d);
    crate::el_engine::entails_ci(&full, &Concept::name_sym(names[root].clone()), &Concept::name_sym(b.clone()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::textio::{parse_concept, parse_ontology, O_R, O_U};

    pub(crate) fn fig1_left() -> Interpretation {
        let mut i = Interpretation::new();
        let a = i.add_elem("a");
        let b = i.add_elem("b");
        i.declare(&Signature::from_names(&["A", "B", "C", "D", "E"], &["r"], &[]));
        i.add_concept("A", a);
        i.add_concept("B", a);
        for c in ["C", "D", "E"] {
            i.add_concept(c, b);
        }
        i.add_role("r", a, b);
        i
    }

    pub(crate) fn fig1_right() -> Interpretation {
        let mut i = Interpretation::new();
        let a = i.add_elem("a'");
        let b1 = i.add_elem("b'");
        let b2 = i.add_elem("b''");
        i.declare(&Signature::from_names(&["A", "B", "C", "D", "E"], &["r"], &[]));
        i.add_concept("B", a);
        i.add_concept("D", b1);
        i.add_concept("E", b1);
        i.add_concept("C", b2);
        i.add_concept("D", b2);
        i.add_role("r", a, b1);
        i.add_role("r", a, b2);
        i
    }

    #[test]
    fn evaluation_on_fig1() {
        let l = fig1_left();
        assert_eq!(eval_concept(&l, &parse_concept("A").unwrap()).unwrap(), BTreeSet::from([0]));
        assert_eq!(eval_concept(&l, &Concept::top()).unwrap().len(), 2);
        let r = fig1_right();
        let c = parse_concept("B & exists r.(D & E)").unwrap();
        assert_eq!(eval_concept(&r, &c).unwrap(), BTreeSet::from([0]));
        assert!(matches!(eval_concept(&r, &parse_concept("Q").unwrap()), Err(Error::UnknownSymbol(_))));
    }

    #[test]
    fn fig1_models() {
        let o = parse_ontology(O_U).unwrap();
        assert_eq!(check_model(&fig1_left(), &o).unwrap(), None);
        assert_eq!(check_model(&fig1_right(), &o).unwrap(), None);
        assert_eq!(check_model(&fig1_left(), &Ontology::empty()).unwrap(), None);
    }

    #[test]
    fn fig1_simulation() {
        let sigma = Signature::from_names(&["B", "D", "E"], &["r"], &[]);
        let s = max_simulation(&fig1_left(), &fig1_right(), &sigma, Dialect::EL_U);
        assert!(s.contains(0, 0) && s.contains(1, 1));
        assert!(s.total);
    }

    pub(crate) fn fig3() -> (Interpretation, Interpretation) {
        let decl = Signature::from_names(&["A", "B", "E"], &["r", "s"], &[]);
        let mut l = Interpretation::new();
        let (a, b, c) = (l.add_elem("a"), l.add_elem("b"), l.add_elem("c"));
        l.declare(&decl);
        l.add_concept("A", a);
        l.add_concept("B", b);
        l.add_concept("E", c);
        l.add_concept("A", c);
        l.add_role("s", a, b);
        l.add_role("r", a, c);
        l.add_role("s", c, b);
        l.add_role("r", c, c);
        let mut r = Interpretation::new();
        let a1 = r.add_elem("a'");
        let b1 = r.add_elem("b'");
        let c1 = r.add_elem("c'");
        let c2 = r.add_elem("c''");
        let b2 = r.add_elem("b''");
        r.declare(&decl);
        for c in [c1, c2] {
            r.add_concept("E", c);
            r.add_concept("A", c);
        }
        r.add_concept("B", b2);
        r.add_role("s", a1, b1);
        r.add_role("s", c1, b1);
        r.add_role("s", c1, b2);
        r.add_role("r", c1, c2);
        r.add_role("s", c2, b2);
        r.add_role("r", c2, c2);
        (l, r)
    }

    #[test]
    fn fig3_models() {
        let o = parse_ontology(O_R).unwrap();
        let (l, r) = fig3();
        assert_eq!(check_model(&l, &o).unwrap(), None);
        assert_eq!(check_model(&r, &o).unwrap(), None);
        let s = max_simulation(&l, &r, &Signature::from_names(&["E"], &["s"], &[]), Dialect::EL_U);
        assert!(s.contains(0, 0) && s.contains(1, 1) && s.contains(2, 2));
    }

    #[test]
    fn fig2_simulation() {
        let decl = Signature::from_names(&["A", "E", "Q1", "Q2"], &["r", "s"], &["c"]);
        let mut l = Interpretation::new();
        let (a, b, c) = (l.add_elem("a"), l.add_elem("b"), l.add_elem("c"));
        l.declare(&decl);
        l.add_concept("A", a);
        for x in ["A", "Q2", "Q1"] {
            l.add_concept(x, b);
        }
        for x in ["E", "A"] {
            l.add_concept(x, c);
        }
        l.set_individual("c", c);
        for (r, x, y) in [("s", a, b), ("r", a, c), ("r", b, c), ("r", c, c), ("s", b, c), ("s", c, b), ("s", b, b)] {
            l.add_role(r, x, y);
        }
        let mut r = Interpretation::new();
        let a1 = r.add_elem("a'");
        let b1 = r.add_elem("b'");
        let c1 = r.add_elem("c'");
        let b2 = r.add_elem("b''");
        r.declare(&decl);
        r.add_concept("Q1", b1);
        r.add_concept("Q2", b2);
        r.set_individual("c", c1);
        for (x, y) in [(a1, b1), (c1, b1), (b1, c1), (b1, b1), (b2, b2), (b1, b2), (a1, b2), (b2, c1), (c1, b2)] {
            r.add_role("s", x, y);
        }
        let o = parse_ontology(crate::textio::O_N).unwrap();
        assert_eq!(check_model(&l, &o).unwrap(), None);
        assert_eq!(check_model(&r, &o).unwrap(), None);
        let s = max_simulation(&l, &r, &Signature::from_names(&["Q1"], &["s"], &["c"]), Dialect::ELO_U);
        assert!(s.contains(a, a1) && s.contains(b, b1) && s.contains(c, c1));
        assert!(s.total);
    }

    #[test]
    fn identity_simulation() {
        let l = fig1_left();
        let s = max_simulation(&l, &l, &l.signature(), Dialect::ELIO_U);
        for d in 0..l.size() {
            assert!(s.contains(d, d));
        }
    }

    #[test]
    fn diagram_of_fig1() {
        let sigma = Signature::from_names(&["B", "D", "E"], &["r"], &[]);
        let (d, n) = diagram(&fig1_left().reduct(&sigma), &sigma, false);
        let x = |k: usize| Concept::name_sym(n[k].clone());
        for ci in [
            CI::new(x(0), Concept::name("B")),
            CI::new(x(1), Concept::name("D")),
            CI::new(x(1), Concept::name("E")),
            CI::new(x(0), Concept::some("r", x(1))),
        ] {
            assert!(d.cis.contains(&ci));
        }
        assert_eq!(d.cis.len(), 4);
        let (du, _) = diagram(&fig1_left(), &sigma, true);
        assert_eq!(du.cis.len(), 8);
        let (e, _) = diagram(&fig1_left(), &Signature::new(), false);
        assert!(e.cis.is_empty());
    }

    #[test]
    fn json_round_trip() {
        let l = fig1_left();
        assert_eq!(Interpretation::from_json(&l.to_json()).unwrap(), l);
    }
}
