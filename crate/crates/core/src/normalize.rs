//! Normal forms, conservative rewrites, ⊥ elimination, Σ-renaming and the Horn reduction.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use sha2::{Digest, Sha256};

use crate::types::*;
use crate::{Error, Result};

/// Horn concepts: negation, `∀`, `⊔` and `→` are only accepted in the right polarities.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum HornConcept {
    Top,
    Bot,
    Name(Sym),
    Nominal(Sym),
    Not(Box<HornConcept>),
    And(Vec<HornConcept>),
    Or(Vec<HornConcept>),
    Implies(Box<HornConcept>, Box<HornConcept>),
    Exists(RoleExpr, Box<HornConcept>),
    Forall(RoleExpr, Box<HornConcept>),
}

impl fmt::Display for HornConcept {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use HornConcept::*;
        let wrap = |c: &HornConcept| match c {
            And(_) | Or(_) | Implies(..) => format!("({c})"),
            _ => c.to_string(),
        };
        match self {
            Top => write!(f, "Top"),
            Bot => write!(f, "Bot"),
            Name(a) => write!(f, "{a}"),
            Nominal(a) => write!(f, "{{{a}}}"),
            Not(c) => write!(f, "not {}", wrap(c)),
            And(cs) => write!(f, "{}", cs.iter().map(wrap).collect::<Vec<_>>().join(" & ")),
            Or(cs) => write!(f, "{}", cs.iter().map(wrap).collect::<Vec<_>>().join(" | ")),
            Implies(l, r) => write!(f, "{} -> {}", wrap(l), wrap(r)),
            Exists(r, c) => write!(f, "exists {r}.{}", wrap(c)),
            Forall(r, c) => write!(f, "forall {r}.{}", wrap(c)),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HornCI {
    pub lhs: HornConcept,
    pub rhs: HornConcept,
}

#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct HornOntology {
    pub cis: Vec<HornCI>,
    pub ris: Vec<RI>,
}

impl fmt::Display for HornOntology {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.cis {
            writeln!(f, "{} <= {}", c.lhs, c.rhs)?;
        }
        for r in &self.ris {
            writeln!(f, "{r}")?;
        }
        Ok(())
    }
}

/// An ontology all of whose CIs have one of the normal shapes
/// `⊤⊑A`, `A₁⊓A₂⊑B`, `A⊑{a}`, `{a}⊑A`, `A⊑∃r.B`, `∃r.B⊑A` (r a role or u),
/// where `A`, `B` are concept names or ⊤ and `⊥` may appear as the right side of a conjunction rule.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NormalFormOntology {
    pub ontology: Ontology,
}

impl NormalFormOntology {
    pub fn validate(o: Ontology) -> Result<Self> {
        for ci in &o.cis {
            if !is_normal(ci) {
                return Err(Error::Invalid(format!("not in normal form: {ci}")));
            }
        }
        Ok(NormalFormOntology { ontology: o })
    }

    pub fn into_inner(self) -> Ontology {
        self.ontology
    }
}

fn is_atom(c: &Concept) -> bool {
    matches!(c.node(), Node::Top | Node::Name(_))
}

pub fn is_normal(ci: &CI) -> bool {
    let (l, r) = (&ci.lhs, &ci.rhs);
    let lhs_conj = match l.node() {
        Node::And(cs) => cs.len() == 2 && cs.iter().all(is_atom),
        _ => is_atom(l),
    };
    match (l.node(), r.node()) {
        (_, Node::Name(_) | Node::Bot) if lhs_conj => true,
        (Node::Name(_) | Node::Top, Node::Nominal(_)) => true,
        (Node::Nominal(_), Node::Name(_)) => true,
        (Node::Name(_) | Node::Top, Node::Exists(_, b)) => is_atom(b),
        (Node::Exists(_, b), Node::Name(_)) => is_atom(b),
        _ => false,
    }
}

/// Deterministic fresh names: reserved `_` prefix, a kind tag, the caller's salt and a hash.
pub struct FreshNames {
    salt: String,
    taken: BTreeSet<Sym>,
    memo: BTreeMap<(char, Concept), Sym>,
}

impl FreshNames {
    pub fn new(salt: &str, avoid: &Signature) -> Self {
        FreshNames { salt: salt.to_string(), taken: avoid.concepts.clone(), memo: BTreeMap::new() }
    }

    pub fn name_for(&mut self, kind: char, c: &Concept) -> Sym {
        if let Some(s) = self.memo.get(&(kind, c.clone())) {
            return s.clone();
        }
        let mut h = Sha256::new();
        h.update(self.salt.as_bytes());
        h.update([kind as u8]);
        h.update(c.to_string().as_bytes());
        let digest = h.finalize();
        let hex: String = digest.iter().take(5).map(|b| format!("{b:02x}")).collect();
        let mut name = format!("_{kind}{}{hex}", self.salt);
        let mut k = 1;
        while self.taken.contains(name.as_str()) {
            name = format!("_{kind}{}{hex}_{k}", self.salt);
            k += 1;
        }
        let s = sym(&name);
        self.taken.insert(s.clone());
        self.memo.insert((kind, c.clone()), s.clone());
        s
    }

    pub fn plain(&mut self, base: &str) -> Sym {
        let mut name = format!("_{base}{}", self.salt);
        let mut k = 1;
        while self.taken.contains(name.as_str()) {
            name = format!("_{base}{}_{k}", self.salt);
            k += 1;
        }
        let s = sym(&name);
        self.taken.insert(s.clone());
        s
    }
}

pub fn is_fresh_name(s: &str) -> bool {
    s.starts_with('_')
}

struct Normalizer<'a> {
    names: &'a mut FreshNames,
    out: Vec<CI>,
}

impl Normalizer<'_> {
    fn emit(&mut self, l: Concept, r: Concept) {
        let ci = CI::new(l, r);
        if !self.out.contains(&ci) {
            self.out.push(ci);
        }
    }

    /// Returns an atom X (name or ⊤) with C ⊑ X guaranteed; `None` when C is ⊥.
    fn lhs(&mut self, c: &Concept) -> Option<Concept> {
        match c.node() {
            Node::Top | Node::Name(_) => Some(c.clone()),
            Node::Bot => None,
            Node::Nominal(_) => {
                let x = Concept::name_sym(self.names.name_for('N', c));
                self.emit(c.clone(), x.clone());
                Some(x)
            }
            Node::And(cs) => {
                let mut atoms = Vec::new();
                for d in cs {
                    atoms.push(self.lhs(d)?);
                }
                atoms.retain(|a| !a.is_top());
                atoms.sort();
                atoms.dedup();
                match atoms.len() {
                    0 => Some(Concept::top()),
                    1 => Some(atoms.pop().unwrap()),
                    _ => {
                        let x = Concept::name_sym(self.names.name_for('L', c));
                        let mut acc = atoms[0].clone();
                        for (i, a) in atoms.iter().enumerate().skip(1) {
                            let target = if i + 1 == atoms.len() {
                                x.clone()
                            } else {
                                let prefix = Concept::conj(atoms[..=i].iter().cloned());
                                Concept::name_sym(self.names.name_for('L', &prefix))
                            };
                            self.emit(Concept::and(acc.clone(), a.clone()), target.clone());
                            acc = target;
                        }
                        Some(x)
                    }
                }
            }
            Node::Exists(r, d) => {
                let y = self.lhs(d)?;
                let x = Concept::name_sym(self.names.name_for('L', c));
                self.emit(Concept::exists(r.clone(), y), x.clone());
                Some(x)
            }
        }
    }

    /// Ensures `y ⊑ d` for an atom `y`.
    fn rhs(&mut self, y: &Concept, d: &Concept) {
        match d.node() {
            Node::Top => {}
            Node::Name(_) | Node::Bot => {
                if y != d {
                    self.emit(y.clone(), d.clone());
                }
            }
            Node::Nominal(_) => self.emit(y.clone(), d.clone()),
            Node::And(ds) => ds.iter().for_each(|e| self.rhs(y, e)),
            Node::Exists(r, e) => {
                let z = self.filler(e);
                self.emit(y.clone(), Concept::exists(r.clone(), z));
            }
        }
    }

    fn filler(&mut self, e: &Concept) -> Concept {
        if is_atom(e) || e.is_bot() {
            if e.is_bot() {
                let z = Concept::name_sym(self.names.name_for('R', e));
                self.emit(z.clone(), Concept::bot());
                return z;
            }
            return e.clone();
        }
        let z = Concept::name_sym(self.names.name_for('R', e));
        self.rhs(&z, e);
        z
    }

    fn ci(&mut self, ci: &CI) {
        if is_normal(ci) {
            self.emit(ci.lhs.clone(), ci.rhs.clone());
            return;
        }
        // Direct shapes avoid a detour through a fresh name.
        if let (Node::Name(_) | Node::Top, Node::Exists(r, e)) = (ci.lhs.node(), ci.rhs.node()) {
            let z = self.filler(e);
            self.emit(ci.lhs.clone(), Concept::exists(r.clone(), z));
            return;
        }
        if let (Node::Exists(r, d), Node::Name(_)) = (ci.lhs.node(), ci.rhs.node()) {
            if let Some(y) = self.lhs(d) {
                self.emit(Concept::exists(r.clone(), y), ci.rhs.clone());
            }
            return;
        }
        if let (Node::And(cs), Node::Name(_) | Node::Bot) = (ci.lhs.node(), ci.rhs.node()) {
            let mut atoms = Vec::new();
            for d in cs {
                match self.lhs(d) {
                    Some(a) => atoms.push(a),
                    None => return,
                }
            }
            let l = Concept::conj(atoms);
            if is_normal(&CI::new(l.clone(), ci.rhs.clone())) {
                self.emit(l, ci.rhs.clone());
                return;
            }
        }
        let Some(x) = self.lhs(&ci.lhs) else { return };
        self.rhs(&x, &ci.rhs);
    }
}

/// Normal-form conservative extension (fresh names tagged with `salt`).
pub fn to_normal_form_salted(o: &Ontology, salt: &str) -> NormalFormOntology {
    let mut names = FreshNames::new(salt, &signature_of(o));
    let mut n = Normalizer { names: &mut names, out: Vec::new() };
    for ci in &o.cis {
        n.ci(ci);
    }
    let mut out = Ontology::new(n.out, o.ris.clone());
    out.dialect = out.dialect.join(o.dialect);
    NormalFormOntology { ontology: out }
}

pub fn to_normal_form(o: &Ontology) -> NormalFormOntology {
    to_normal_form_salted(o, "")
}

#[derive(Clone, Debug)]
pub struct Prepared {
    pub o1: Ontology,
    pub o2: Ontology,
    pub a: Sym,
    pub b: Sym,
}

/// Lemma-style preparation: normal forms of `O1 ∪ {A ≡ C1}` and `O2 ∪ {B ≡ C2}` with fresh A, B.
pub fn prepare_interpolation_input(o1: &Ontology, c1: &Concept, o2: &Ontology, c2: &Concept) -> Prepared {
    let all = signature_of(o1).union(&signature_of(o2)).union(&signature_of(c1)).union(&signature_of(c2));
    let mut names = FreshNames::new("", &all);
    let a = names.plain("A");
    let b = names.plain("B");
    let mut e1 = o1.clone();
    e1.add_ci(CI::new(Concept::name_sym(a.clone()), c1.clone()));
    e1.add_ci(CI::new(c1.clone(), Concept::name_sym(a.clone())));
    let mut e2 = o2.clone();
    e2.add_ci(CI::new(Concept::name_sym(b.clone()), c2.clone()));
    e2.add_ci(CI::new(c2.clone(), Concept::name_sym(b.clone())));
    Prepared {
        o1: to_normal_form_salted(&e1, "1").ontology,
        o2: to_normal_form_salted(&e2, "2").ontology,
        a,
        b,
    }
}

#[derive(Clone, Debug)]
pub enum BotElimination {
    /// `O1 ∪ O2 ⊨ C1 ⊑ ⊥`: ⊥ itself is an interpolant.
    Trivial { interpolant: Concept },
    /// ⊥-free inputs; `marker` stands in for ⊥ (None when nothing changed).
    Rewritten { o1: Ontology, o2: Ontology, c1: Concept, c2: Concept, marker: Option<Sym> },
}

fn has_bot(c: &Concept) -> bool {
    let mut b = false;
    c.visit(&mut |d| b |= d.is_bot());
    b
}

fn replace_bot(c: &Concept, m: &Concept) -> Concept {
    c.map(&mut |d| if d.is_bot() { m.clone() } else { d })
}

pub fn eliminate_bot(o1: &Ontology, o2: &Ontology, c1: &Concept, c2: &Concept) -> Result<BotElimination> {
    let uses_bot = o1.cis.iter().chain(&o2.cis).any(|ci| has_bot(&ci.lhs) || has_bot(&ci.rhs))
        || has_bot(c1)
        || has_bot(c2);
    if !uses_bot {
        return Ok(BotElimination::Rewritten {
            o1: o1.clone(),
            o2: o2.clone(),
            c1: c1.clone(),
            c2: c2.clone(),
            marker: None,
        });
    }
    let union = o1.union(o2);
    if crate::reason::unsatisfiable(&union, c1)? {
        return Ok(BotElimination::Trivial { interpolant: Concept::bot() });
    }
    let all = signature_of(o1).union(&signature_of(o2)).union(&signature_of(c1)).union(&signature_of(c2));
    let marker = FreshNames::new("", &all).plain("Bot");
    let m = Concept::name_sym(marker.clone());
    let dialect = union.dialect.join(c1.dialect()).join(c2.dialect());
    let rewrite = |o: &Ontology, c: &Concept| -> Ontology {
        let mut cis: Vec<CI> = o
            .cis
            .iter()
            .filter(|ci| !has_bot(&ci.lhs))
            .map(|ci| CI::new(ci.lhs.clone(), replace_bot(&ci.rhs, &m)))
            .collect();
        let mut s = signature_of(o).union(&signature_of(c));
        s.concepts.insert(marker.clone());
        let mut roles: Vec<RoleExpr> = Vec::new();
        for r in &s.roles {
            roles.push(RoleExpr::Name(r.clone()));
            if dialect.inverse_roles {
                roles.push(RoleExpr::Inv(r.clone()));
            }
        }
        if dialect.universal_role {
            roles.push(RoleExpr::Universal);
        }
        for r in roles {
            cis.push(CI::new(Concept::exists(r.clone(), m.clone()), m.clone()));
            cis.push(CI::new(m.clone(), Concept::exists(r, m.clone())));
        }
        for a in &s.concepts {
            cis.push(CI::new(m.clone(), Concept::name_sym(a.clone())));
        }
        if dialect.nominals {
            for a in &s.individuals {
                cis.push(CI::new(m.clone(), Concept::nominal_sym(a.clone())));
            }
        }
        let mut out = Ontology::new(cis, o.ris.clone());
        out.dialect = out.dialect.join(o.dialect).with_bottom(false);
        out
    };
    Ok(BotElimination::Rewritten {
        o1: rewrite(o1, c1),
        o2: rewrite(o2, c2),
        c1: replace_bot(c1, &m),
        c2: replace_bot(c2, &m),
        marker: Some(marker),
    })
}

/// Maps the ⊥ stand-in back to ⊥ in a computed concept.
pub fn restore_bot(c: &Concept, marker: &Option<Sym>) -> Concept {
    match marker {
        None => c.clone(),
        Some(m) => c.map(&mut |d| if d.as_name() == Some(m) { Concept::bot() } else { d }),
    }
}

/// Renames every symbol outside Σ to a primed copy.
pub fn rename_outside_sigma(o: &Ontology, sigma: &Signature) -> (Ontology, Renaming) {
    let s = signature_of(o);
    let all = s.union(sigma);
    let mut r = Renaming::default();
    let prime = |x: &Sym, used: &BTreeSet<Sym>| -> Sym {
        let mut n = format!("{x}'");
        while used.contains(n.as_str()) {
            n.push('\'');
        }
        sym(&n)
    };
    for c in s.concepts.difference(&sigma.concepts) {
        r.concepts.insert(c.clone(), prime(c, &all.concepts));
    }
    for c in s.roles.difference(&sigma.roles) {
        r.roles.insert(c.clone(), prime(c, &all.roles));
    }
    for c in s.individuals.difference(&sigma.individuals) {
        r.individuals.insert(c.clone(), prime(c, &all.individuals));
    }
    (o.rename(&r), r)
}

struct HornNormalizer<'a> {
    n: Normalizer<'a>,
}

fn horn_key(c: &HornConcept) -> Concept {
    // Fresh names for Horn subterms are keyed by their printed form.
    Concept::name(&format!("{c}"))
}

impl HornNormalizer<'_> {
    fn fresh(&mut self, kind: char, c: &HornConcept) -> Concept {
        Concept::name_sym(self.n.names.name_for(kind, &horn_key(c)))
    }

    fn lhs(&mut self, c: &HornConcept) -> Result<Option<Concept>> {
        use HornConcept::*;
        Ok(match c {
            Top => Some(Concept::top()),
            Bot => None,
            Name(a) => Some(Concept::name_sym(a.clone())),
            Nominal(a) => {
                let x = self.fresh('N', c);
                self.n.emit(Concept::nominal_sym(a.clone()), x.clone());
                Some(x)
            }
            And(cs) => {
                let mut atoms = Vec::new();
                for d in cs {
                    match self.lhs(d)? {
                        Some(a) => atoms.push(a),
                        None => return Ok(None),
                    }
                }
                let lhs = Concept::conj(atoms);
                if is_atom(&lhs) {
                    Some(lhs)
                } else {
                    self.n.lhs(&lhs)
                }
            }
            Or(cs) => {
                let x = self.fresh('D', c);
                for d in cs {
                    if let Some(a) = self.lhs(d)? {
                        self.n.emit(a, x.clone());
                    }
                }
                Some(x)
            }
            Exists(r, d) => match self.lhs(d)? {
                None => None,
                Some(y) => {
                    let x = self.fresh('L', c);
                    self.n.emit(Concept::exists(r.clone(), y), x.clone());
                    Some(x)
                }
            },
            Not(_) | Implies(..) | Forall(..) => {
                return Err(Error::Polarity(format!("'{c}' may not occur on the left of an inclusion")))
            }
        })
    }

    fn rhs(&mut self, y: &Concept, c: &HornConcept) -> Result<()> {
        use HornConcept::*;
        match c {
            Top => {}
            Bot => self.n.emit(y.clone(), Concept::bot()),
            Name(a) => self.n.emit(y.clone(), Concept::name_sym(a.clone())),
            Nominal(a) => self.n.emit(y.clone(), Concept::nominal_sym(a.clone())),
            Not(inner) => match &**inner {
                Name(a) => self.n.emit(Concept::and(y.clone(), Concept::name_sym(a.clone())), Concept::bot()),
                Nominal(a) => {
                    let z = self.fresh('N', inner);
                    self.n.emit(Concept::nominal_sym(a.clone()), z.clone());
                    self.n.emit(Concept::and(y.clone(), z), Concept::bot());
                }
                other => return Err(Error::Polarity(format!("negation of '{other}' is not Horn"))),
            },
            And(cs) => {
                for d in cs {
                    self.rhs(y, d)?;
                }
            }
            Implies(l, r) => {
                if let Some(x) = self.lhs(l)? {
                    let w = self.fresh('I', c);
                    self.n.emit(Concept::and(y.clone(), x), w.clone());
                    self.rhs(&w, r)?;
                }
            }
            Exists(r, d) => {
                let z = self.target('E', d)?;
                self.n.emit(y.clone(), Concept::exists(r.clone(), z));
            }
            Forall(r, d) => {
                let z = self.target('F', d)?;
                self.n.emit(Concept::exists(r.inverse(), y.clone()), z);
            }
            Or(_) => return Err(Error::Polarity(format!("disjunction '{c}' may not occur on the right"))),
        }
        Ok(())
    }

    fn target(&mut self, kind: char, d: &HornConcept) -> Result<Concept> {
        if let HornConcept::Name(a) = d {
            return Ok(Concept::name_sym(a.clone()));
        }
        if let HornConcept::Top = d {
            return Ok(Concept::top());
        }
        let z = self.fresh(kind, d);
        self.rhs(&z, d)?;
        Ok(z)
    }
}

/// Horn-ALCIO_u ontology to an ELIO_u (possibly ⊥) normal form conservative extension.
pub fn horn_to_normal_form(h: &HornOntology) -> Result<Ontology> {
    let mut sig = Signature::new();
    fn collect(c: &HornConcept, s: &mut Signature) {
        use HornConcept::*;
        match c {
            Name(a) => {
                s.concepts.insert(a.clone());
            }
            Nominal(a) => {
                s.individuals.insert(a.clone());
            }
            Not(d) => collect(d, s),
            And(cs) | Or(cs) => cs.iter().for_each(|d| collect(d, s)),
            Implies(l, r) => {
                collect(l, s);
                collect(r, s)
            }
            Exists(r, d) | Forall(r, d) => {
                if let Some(b) = r.base() {
                    s.roles.insert(b.clone());
                }
                collect(d, s)
            }
            _ => {}
        }
    }
    for ci in &h.cis {
        collect(&ci.lhs, &mut sig);
        collect(&ci.rhs, &mut sig);
    }
    let mut names = FreshNames::new("H", &sig);
    let mut hn = HornNormalizer { n: Normalizer { names: &mut names, out: Vec::new() } };
    for ci in &h.cis {
        if let Some(x) = hn.lhs(&ci.lhs)? {
            hn.rhs(&x, &ci.rhs)?;
        }
    }
    let out = hn.n.out;
    // Collapse `X ⊑ Y` conjunction rules coming from single-atom left sides into normal shapes.
    let o = Ontology::new(out, h.ris.clone());
    let nf = to_normal_form_salted(&o, "H");
    Ok(nf.ontology)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::textio::{parse_concept, parse_ontology};

    fn c(s: &str) -> Concept {
        parse_concept(s).unwrap()
    }

    #[test]
    fn normal_shapes() {
        for s in ["Top <= A", "A & B <= C", "A <= {a}", "{a} <= A", "A <= exists r.B", "exists inv(r).B <= A", "exists u.B <= A", "A & B <= Bot"] {
            let o = parse_ontology(s).unwrap();
            assert!(is_normal(&o.cis[0]), "{s}");
        }
        assert!(!is_normal(&CI::new(c("A"), c("B & C"))));
    }

    #[test]
    fn existential_filler_split() {
        let o = parse_ontology("A <= exists r.(B & C)").unwrap();
        let n = to_normal_form(&o).ontology;
        assert_eq!(n.cis.len(), 3);
        assert!(n.cis.iter().all(is_normal));
        assert!(n.cis.iter().any(|ci| ci.lhs == c("A") && matches!(ci.rhs.node(), Node::Exists(..))));
    }

    #[test]
    fn nested_existential_left() {
        let o = parse_ontology("exists r.exists s.B <= A").unwrap();
        let n = to_normal_form(&o).ontology;
        assert_eq!(n.cis.len(), 2);
        assert_eq!(n.cis[0].lhs, c("exists s.B"));
        assert_eq!(n.cis[1].rhs, c("A"));
        let y = n.cis[0].rhs.clone();
        assert_eq!(n.cis[1].lhs, Concept::some("r", y));
    }

    #[test]
    fn o_u_already_normal_except_split() {
        let o = parse_ontology(crate::textio::O_U).unwrap();
        let n = to_normal_form(&o).ontology;
        assert!(n.cis.iter().all(is_normal));
        assert_eq!(n.cis.len(), 8);
    }

    #[test]
    fn normalization_is_idempotent() {
        let o = parse_ontology("A <= exists r.(B & exists s.C)\nexists r.(B & C) <= D").unwrap();
        let n1 = to_normal_form(&o).ontology;
        let n2 = to_normal_form(&n1).ontology;
        assert_eq!(n1, n2);
    }

    #[test]
    fn renaming() {
        let o = parse_ontology(crate::textio::O_U).unwrap();
        let sigma = Signature::from_names(&["B", "D", "E"], &["r"], &[]);
        let (os, m) = rename_outside_sigma(&o, &sigma);
        assert_eq!(m.concepts.get("A").map(|s| &**s), Some("A'"));
        assert_eq!(m.concepts.get("C").map(|s| &**s), Some("C'"));
        assert_eq!(m.concepts.len(), 2);
        assert_eq!(os.rename(&m.inverse()), o);
        let (same, id) = rename_outside_sigma(&o, &signature_of(&o));
        assert!(id.is_identity());
        assert_eq!(same, o);
    }

    #[test]
    fn fresh_names_do_not_cross_sides() {
        let o = parse_ontology("A <= exists r.(B & C)").unwrap();
        let p = prepare_interpolation_input(&o, &c("A"), &o, &c("exists r.(B & C)"));
        let s1 = signature_of(&p.o1);
        let s2 = signature_of(&p.o2);
        let shared = s1.intersect(&s2);
        assert!(shared.concepts.iter().all(|x| !is_fresh_name(x)));
        assert!(s1.has_concept(&p.a) && s2.has_concept(&p.b));
    }

    #[test]
    fn forall_becomes_inverse_existential() {
        let h = crate::textio::parse_horn_ontology("B <= forall r.F").unwrap();
        let o = horn_to_normal_form(&h).unwrap();
        assert_eq!(o.cis, vec![CI::new(c("exists inv(r).B"), c("F"))]);
    }

    #[test]
    fn polarity_errors() {
        let h = crate::textio::parse_horn_ontology("forall r.A <= B").unwrap();
        assert!(matches!(horn_to_normal_form(&h), Err(Error::Polarity(_))));
        let h = crate::textio::parse_horn_ontology("A <= B | C").unwrap();
        assert!(matches!(horn_to_normal_form(&h), Err(Error::Polarity(_))));
    }

    #[test]
    fn left_disjunction_splits() {
        let h = crate::textio::parse_horn_ontology("A <= (B | C) -> D").unwrap();
        let o = horn_to_normal_form(&h).unwrap();
        assert!(o.cis.iter().all(is_normal));
        // B and C each imply the fresh disjunction name.
        let x = o.cis.iter().find(|ci| ci.lhs == c("B")).unwrap().rhs.clone();
        assert!(o.cis.contains(&CI::new(c("C"), x)));
    }
}
