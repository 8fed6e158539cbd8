//! Concepts, roles, ontologies, signatures and ABoxes.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::hash::{Hash, Hasher};
use std::sync::{Arc, Mutex, OnceLock};

pub type Sym = Arc<str>;

pub fn sym(s: &str) -> Sym {
    Arc::from(s)
}

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub enum RoleExpr {
    Name(Sym),
    Inv(Sym),
    Universal,
}

impl RoleExpr {
    pub fn name(s: &str) -> Self {
        RoleExpr::Name(sym(s))
    }

    pub fn inverse(&self) -> Self {
        match self {
            RoleExpr::Name(r) => RoleExpr::Inv(r.clone()),
            RoleExpr::Inv(r) => RoleExpr::Name(r.clone()),
            RoleExpr::Universal => RoleExpr::Universal,
        }
    }

    pub fn base(&self) -> Option<&Sym> {
        match self {
            RoleExpr::Name(r) | RoleExpr::Inv(r) => Some(r),
            RoleExpr::Universal => None,
        }
    }

    pub fn is_inverse(&self) -> bool {
        matches!(self, RoleExpr::Inv(_))
    }
}

impl fmt::Display for RoleExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RoleExpr::Name(r) => write!(f, "{r}"),
            RoleExpr::Inv(r) => write!(f, "inv({r})"),
            RoleExpr::Universal => write!(f, "u"),
        }
    }
}

#[derive(PartialEq, Eq, Hash, Debug)]
pub enum Node {
    Top,
    Bot,
    Name(Sym),
    Nominal(Sym),
    /// Flattened, sorted, duplicate-free, at least two conjuncts, none of them a conjunction.
    And(Vec<Concept>),
    Exists(RoleExpr, Concept),
}

/// A hash-consed concept. Equal concepts share one allocation.
#[derive(Clone)]
pub struct Concept(Arc<Node>);

fn intern(node: Node) -> Concept {
    static NODES: OnceLock<Mutex<HashSet<NodeRef>>> = OnceLock::new();
    let mut m = NODES.get_or_init(|| Mutex::new(HashSet::new())).lock().unwrap();
    let probe = NodeRef(Arc::new(node));
    if let Some(c) = m.get(&probe) {
        return Concept(c.0.clone());
    }
    let c = Concept(probe.0.clone());
    m.insert(probe);
    c
}

// Children compare by pointer, so structural lookup on a node is shallow.
#[derive(PartialEq, Eq, Hash)]
struct NodeRef(Arc<Node>);

impl PartialEq for Concept {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0)
    }
}
impl Eq for Concept {}

impl Hash for Concept {
    fn hash<H: Hasher>(&self, state: &mut H) {
        (Arc::as_ptr(&self.0) as usize).hash(state)
    }
}

impl Ord for Concept {
    fn cmp(&self, other: &Self) -> Ordering {
        if self == other {
            return Ordering::Equal;
        }
        let rank = |n: &Node| match n {
            Node::Top => 0,
            Node::Bot => 1,
            Node::Name(_) => 2,
            Node::Nominal(_) => 3,
            Node::Exists(..) => 4,
            Node::And(_) => 5,
        };
        let (a, b) = (self.node(), other.node());
        rank(a).cmp(&rank(b)).then_with(|| match (a, b) {
            (Node::Name(x), Node::Name(y)) | (Node::Nominal(x), Node::Nominal(y)) => x.cmp(y),
            (Node::Exists(r, c), Node::Exists(s, d)) => r.cmp(s).then_with(|| c.cmp(d)),
            (Node::And(xs), Node::And(ys)) => xs.cmp(ys),
            _ => Ordering::Equal,
        })
    }
}

impl PartialOrd for Concept {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for Concept {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for Concept {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.node() {
            Node::Top => write!(f, "Top"),
            Node::Bot => write!(f, "Bot"),
            Node::Name(a) => write!(f, "{a}"),
            Node::Nominal(a) => write!(f, "{{{a}}}"),
            Node::And(cs) => {
                for (i, c) in cs.iter().enumerate() {
                    if i > 0 {
                        write!(f, " & ")?;
                    }
                    write!(f, "{c}")?;
                }
                Ok(())
            }
            Node::Exists(r, c) => {
                if matches!(c.node(), Node::And(_)) {
                    write!(f, "exists {r}.({c})")
                } else {
                    write!(f, "exists {r}.{c}")
                }
            }
        }
    }
}

impl Concept {
    pub fn node(&self) -> &Node {
        &self.0
    }

    pub fn top() -> Self {
        intern(Node::Top)
    }

    pub fn bot() -> Self {
        intern(Node::Bot)
    }

    pub fn name(a: &str) -> Self {
        intern(Node::Name(sym(a)))
    }

    pub fn name_sym(a: Sym) -> Self {
        intern(Node::Name(a))
    }

    pub fn nominal(a: &str) -> Self {
        intern(Node::Nominal(sym(a)))
    }

    pub fn nominal_sym(a: Sym) -> Self {
        intern(Node::Nominal(a))
    }

    pub fn exists(r: RoleExpr, c: Concept) -> Self {
        intern(Node::Exists(r, c))
    }

    pub fn some(r: &str, c: Concept) -> Self {
        Self::exists(RoleExpr::name(r), c)
    }

    pub fn and(a: Concept, b: Concept) -> Self {
        Self::conj([a, b])
    }

    /// ACI-normalized conjunction. The empty conjunction is ⊤.
    pub fn conj<I: IntoIterator<Item = Concept>>(items: I) -> Self {
        let mut flat = Vec::new();
        for c in items {
            match c.node() {
                Node::And(cs) => flat.extend(cs.iter().cloned()),
                _ => flat.push(c),
            }
        }
        flat.sort();
        flat.dedup();
        match flat.len() {
            0 => Self::top(),
            1 => flat.pop().unwrap(),
            _ => intern(Node::And(flat)),
        }
    }

    /// Conjuncts of a top-level conjunction (the concept itself otherwise).
    pub fn conjuncts(&self) -> Vec<Concept> {
        match self.node() {
            Node::And(cs) => cs.clone(),
            _ => vec![self.clone()],
        }
    }

    pub fn is_top(&self) -> bool {
        matches!(self.node(), Node::Top)
    }

    pub fn is_bot(&self) -> bool {
        matches!(self.node(), Node::Bot)
    }

    pub fn as_name(&self) -> Option<&Sym> {
        match self.node() {
            Node::Name(a) => Some(a),
            _ => None,
        }
    }

    pub fn as_nominal(&self) -> Option<&Sym> {
        match self.node() {
            Node::Nominal(a) => Some(a),
            _ => None,
        }
    }

    /// Symbol count: atoms count one, `∃r.` adds one, every binary `⊓` adds one.
    pub fn size(&self) -> usize {
        match self.node() {
            Node::Top | Node::Bot | Node::Name(_) | Node::Nominal(_) => 1,
            Node::And(cs) => cs.iter().map(|c| c.size()).sum::<usize>() + cs.len() - 1,
            Node::Exists(_, c) => 1 + c.size(),
        }
    }

    pub fn depth(&self) -> usize {
        match self.node() {
            Node::And(cs) => cs.iter().map(|c| c.depth()).max().unwrap_or(0),
            Node::Exists(_, c) => 1 + c.depth(),
            _ => 0,
        }
    }

    pub fn dialect(&self) -> Dialect {
        let mut d = Dialect::EL;
        self.visit(&mut |c| match c.node() {
            Node::Bot => d.bottom = true,
            Node::Nominal(_) => d.nominals = true,
            Node::Exists(RoleExpr::Inv(_), _) => d.inverse_roles = true,
            Node::Exists(RoleExpr::Universal, _) => d.universal_role = true,
            _ => {}
        });
        d
    }

    pub fn visit(&self, f: &mut impl FnMut(&Concept)) {
        f(self);
        match self.node() {
            Node::And(cs) => cs.iter().for_each(|c| c.visit(f)),
            Node::Exists(_, c) => c.visit(f),
            _ => {}
        }
    }

    /// All subconcepts, including the concept itself.
    pub fn subconcepts(&self) -> BTreeSet<Concept> {
        let mut out = BTreeSet::new();
        self.visit(&mut |c| {
            out.insert(c.clone());
        });
        out
    }

    /// Rebuild bottom-up, applying `f` to every node after its children.
    pub fn map(&self, f: &mut impl FnMut(Concept) -> Concept) -> Concept {
        let rebuilt = match self.node() {
            Node::And(cs) => Concept::conj(cs.iter().map(|c| c.map(f)).collect::<Vec<_>>()),
            Node::Exists(r, c) => Concept::exists(r.clone(), c.map(f)),
            _ => self.clone(),
        };
        f(rebuilt)
    }

    pub fn rename(&self, m: &Renaming) -> Concept {
        self.map(&mut |c| match c.node() {
            Node::Name(a) => Concept::name_sym(m.concept(a)),
            Node::Nominal(a) => Concept::nominal_sym(m.individual(a)),
            Node::Exists(r, d) => Concept::exists(m.role_expr(r), d.clone()),
            _ => c,
        })
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug, Default, serde::Serialize, serde::Deserialize)]
pub struct Dialect {
    pub inverse_roles: bool,
    pub nominals: bool,
    pub universal_role: bool,
    pub role_inclusions: bool,
    pub bottom: bool,
}

impl Dialect {
    pub const EL: Dialect = Dialect {
        inverse_roles: false,
        nominals: false,
        universal_role: false,
        role_inclusions: false,
        bottom: false,
    };
    pub const EL_U: Dialect = Dialect { universal_role: true, ..Self::EL };
    pub const ELO: Dialect = Dialect { nominals: true, ..Self::EL };
    pub const ELO_U: Dialect = Dialect { nominals: true, universal_role: true, ..Self::EL };
    pub const ELR: Dialect = Dialect { role_inclusions: true, ..Self::EL };
    pub const ELRO: Dialect = Dialect { role_inclusions: true, nominals: true, ..Self::EL };
    pub const ELRO_U: Dialect = Dialect { role_inclusions: true, nominals: true, universal_role: true, ..Self::EL };
    pub const ELI: Dialect = Dialect { inverse_roles: true, ..Self::EL };
    pub const ELI_U: Dialect = Dialect { inverse_roles: true, universal_role: true, ..Self::EL };
    pub const ELIO: Dialect = Dialect { inverse_roles: true, nominals: true, ..Self::EL };
    pub const ELIO_U: Dialect = Dialect { inverse_roles: true, nominals: true, universal_role: true, ..Self::EL };

    pub fn join(self, o: Dialect) -> Dialect {
        Dialect {
            inverse_roles: self.inverse_roles || o.inverse_roles,
            nominals: self.nominals || o.nominals,
            universal_role: self.universal_role || o.universal_role,
            role_inclusions: self.role_inclusions || o.role_inclusions,
            bottom: self.bottom || o.bottom,
        }
    }

    /// Whether everything expressible in `o` is expressible here.
    pub fn includes(self, o: Dialect) -> bool {
        self.join(o) == self
    }

    pub fn with_universal(self, u: bool) -> Dialect {
        Dialect { universal_role: u, ..self }
    }

    pub fn with_bottom(self, b: bool) -> Dialect {
        Dialect { bottom: b, ..self }
    }

    pub fn parse(s: &str) -> Option<Dialect> {
        let lower = s.to_ascii_lowercase();
        let (body, bot) = match lower.strip_suffix("_bot") {
            Some(b) => (b.to_string(), true),
            None => (lower.clone(), false),
        };
        let (body, u) = match body.strip_suffix("_u") {
            Some(b) => (b.to_string(), true),
            None => (body, false),
        };
        let rest = body.strip_prefix("el")?;
        let mut d = Dialect::EL;
        for ch in rest.chars() {
            match ch {
                'i' => d.inverse_roles = true,
                'o' => d.nominals = true,
                'r' => d.role_inclusions = true,
                _ => return None,
            }
        }
        d.universal_role = u;
        d.bottom = bot;
        Some(d)
    }
}

impl fmt::Display for Dialect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "EL")?;
        if self.inverse_roles {
            write!(f, "I")?;
        }
        if self.role_inclusions {
            write!(f, "R")?;
        }
        if self.nominals {
            write!(f, "O")?;
        }
        if self.universal_role {
            write!(f, "_u")?;
        }
        if self.bottom {
            write!(f, "_bot")?;
        }
        Ok(())
    }
}

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct CI {
    pub lhs: Concept,
    pub rhs: Concept,
}

impl CI {
    pub fn new(lhs: Concept, rhs: Concept) -> Self {
        CI { lhs, rhs }
    }
}

impl fmt::Display for CI {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} <= {}", self.lhs, self.rhs)
    }
}

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct RI {
    pub chain: Vec<Sym>,
    pub head: Sym,
}

impl RI {
    pub fn new(chain: &[&str], head: &str) -> Self {
        assert!(!chain.is_empty(), "role inclusion with empty chain");
        RI { chain: chain.iter().map(|s| sym(s)).collect(), head: sym(head) }
    }
}

impl fmt::Display for RI {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<&str> = self.chain.iter().map(|s| &**s).collect();
        write!(f, "{} <= {}", parts.join(" o "), self.head)
    }
}

#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct Ontology {
    pub cis: Vec<CI>,
    pub ris: Vec<RI>,
    pub dialect: Dialect,
}

impl Ontology {
    /// Builds an ontology whose dialect is the least one covering its axioms.
    pub fn new(cis: Vec<CI>, ris: Vec<RI>) -> Self {
        let mut o = Ontology { cis: Vec::new(), ris: Vec::new(), dialect: Dialect::EL };
        for ci in cis {
            o.add_ci(ci);
        }
        for ri in ris {
            o.add_ri(ri);
        }
        o
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn add_ci(&mut self, ci: CI) {
        if !self.cis.contains(&ci) {
            self.dialect = self.dialect.join(ci.lhs.dialect()).join(ci.rhs.dialect());
            self.cis.push(ci);
        }
    }

    pub fn add_ri(&mut self, ri: RI) {
        if !self.ris.contains(&ri) {
            self.dialect.role_inclusions = true;
            self.ris.push(ri);
        }
    }

    pub fn union(&self, other: &Ontology) -> Ontology {
        let mut o = self.clone();
        for ci in &other.cis {
            o.add_ci(ci.clone());
        }
        for ri in &other.ris {
            o.add_ri(ri.clone());
        }
        o.dialect = o.dialect.join(other.dialect);
        o
    }

    pub fn conforms(&self, d: Dialect) -> bool {
        d.includes(self.inferred_dialect())
    }

    pub fn inferred_dialect(&self) -> Dialect {
        Ontology::new(self.cis.clone(), self.ris.clone()).dialect
    }

    /// ‖O‖: total number of symbols in the axioms.
    pub fn size(&self) -> usize {
        self.cis.iter().map(|c| c.lhs.size() + c.rhs.size()).sum::<usize>()
            + self.ris.iter().map(|r| r.chain.len() + 1).sum::<usize>()
    }

    pub fn rename(&self, m: &Renaming) -> Ontology {
        let cis = self.cis.iter().map(|c| CI::new(c.lhs.rename(m), c.rhs.rename(m))).collect();
        let ris = self
            .ris
            .iter()
            .map(|r| RI { chain: r.chain.iter().map(|s| m.role(s)).collect(), head: m.role(&r.head) })
            .collect();
        let mut o = Ontology::new(cis, ris);
        o.dialect = o.dialect.join(self.dialect);
        o
    }
}

impl fmt::Display for Ontology {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for ci in &self.cis {
            writeln!(f, "{ci}")?;
        }
        for ri in &self.ris {
            writeln!(f, "{ri}")?;
        }
        Ok(())
    }
}

#[derive(Clone, PartialEq, Eq, Debug, Default, PartialOrd, Ord, Hash)]
pub struct Signature {
    pub concepts: BTreeSet<Sym>,
    pub roles: BTreeSet<Sym>,
    pub individuals: BTreeSet<Sym>,
}

impl Signature {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_names(concepts: &[&str], roles: &[&str], individuals: &[&str]) -> Self {
        Signature {
            concepts: concepts.iter().map(|s| sym(s)).collect(),
            roles: roles.iter().map(|s| sym(s)).collect(),
            individuals: individuals.iter().map(|s| sym(s)).collect(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.concepts.is_empty() && self.roles.is_empty() && self.individuals.is_empty()
    }

    pub fn len(&self) -> usize {
        self.concepts.len() + self.roles.len() + self.individuals.len()
    }

    pub fn union(&self, o: &Signature) -> Signature {
        Signature {
            concepts: self.concepts.union(&o.concepts).cloned().collect(),
            roles: self.roles.union(&o.roles).cloned().collect(),
            individuals: self.individuals.union(&o.individuals).cloned().collect(),
        }
    }

    pub fn intersect(&self, o: &Signature) -> Signature {
        Signature {
            concepts: self.concepts.intersection(&o.concepts).cloned().collect(),
            roles: self.roles.intersection(&o.roles).cloned().collect(),
            individuals: self.individuals.intersection(&o.individuals).cloned().collect(),
        }
    }

    pub fn is_subset(&self, o: &Signature) -> bool {
        self.concepts.is_subset(&o.concepts)
            && self.roles.is_subset(&o.roles)
            && self.individuals.is_subset(&o.individuals)
    }

    pub fn has_concept(&self, a: &str) -> bool {
        self.concepts.contains(a)
    }

    pub fn has_role(&self, r: &str) -> bool {
        self.roles.contains(r)
    }

    pub fn has_individual(&self, a: &str) -> bool {
        self.individuals.contains(a)
    }

    /// Whether a role expression only uses symbols of this signature (u always qualifies).
    pub fn has_role_expr(&self, r: &RoleExpr) -> bool {
        r.base().map_or(true, |b| self.roles.contains(b))
    }

    pub fn without_concept(&self, a: &str) -> Signature {
        let mut s = self.clone();
        s.concepts.remove(a);
        s
    }
}

impl fmt::Display for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts: Vec<String> = Vec::new();
        parts.extend(self.concepts.iter().map(|s| s.to_string()));
        parts.extend(self.roles.iter().map(|s| s.to_string()));
        parts.extend(self.individuals.iter().map(|s| format!("{{{s}}}")));
        write!(f, "{{{}}}", parts.join(", "))
    }
}

pub trait HasSignature {
    fn add_symbols(&self, sig: &mut Signature);
}

pub fn signature_of<T: HasSignature + ?Sized>(x: &T) -> Signature {
    let mut s = Signature::new();
    x.add_symbols(&mut s);
    s
}

impl HasSignature for Concept {
    fn add_symbols(&self, sig: &mut Signature) {
        self.visit(&mut |c| match c.node() {
            Node::Name(a) => {
                sig.concepts.insert(a.clone());
            }
            Node::Nominal(a) => {
                sig.individuals.insert(a.clone());
            }
            Node::Exists(r, _) => {
                if let Some(b) = r.base() {
                    sig.roles.insert(b.clone());
                }
            }
            _ => {}
        });
    }
}

impl HasSignature for CI {
    fn add_symbols(&self, sig: &mut Signature) {
        self.lhs.add_symbols(sig);
        self.rhs.add_symbols(sig);
    }
}

impl HasSignature for RI {
    fn add_symbols(&self, sig: &mut Signature) {
        sig.roles.extend(self.chain.iter().cloned());
        sig.roles.insert(self.head.clone());
    }
}

impl HasSignature for Ontology {
    fn add_symbols(&self, sig: &mut Signature) {
        self.cis.iter().for_each(|c| c.add_symbols(sig));
        self.ris.iter().for_each(|r| r.add_symbols(sig));
    }
}

impl HasSignature for ABox {
    fn add_symbols(&self, sig: &mut Signature) {
        for a in &self.assertions {
            match a {
                Assertion::Top(_) => {}
                Assertion::Concept(c, _) => {
                    sig.concepts.insert(c.clone());
                }
                Assertion::Nominal(n, _) => {
                    sig.individuals.insert(n.clone());
                }
                Assertion::Role(r, _, _) => {
                    sig.roles.insert(r.clone());
                }
            }
        }
    }
}

impl<T: HasSignature> HasSignature for [T] {
    fn add_symbols(&self, sig: &mut Signature) {
        self.iter().for_each(|x| x.add_symbols(sig));
    }
}

/// Symbol renaming; symbols absent from the maps are left alone.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Renaming {
    pub concepts: BTreeMap<Sym, Sym>,
    pub roles: BTreeMap<Sym, Sym>,
    pub individuals: BTreeMap<Sym, Sym>,
}

impl Renaming {
    pub fn concept(&self, a: &Sym) -> Sym {
        self.concepts.get(a).cloned().unwrap_or_else(|| a.clone())
    }

    pub fn role(&self, r: &Sym) -> Sym {
        self.roles.get(r).cloned().unwrap_or_else(|| r.clone())
    }

    pub fn individual(&self, a: &Sym) -> Sym {
        self.individuals.get(a).cloned().unwrap_or_else(|| a.clone())
    }

    pub fn role_expr(&self, r: &RoleExpr) -> RoleExpr {
        match r {
            RoleExpr::Name(s) => RoleExpr::Name(self.role(s)),
            RoleExpr::Inv(s) => RoleExpr::Inv(self.role(s)),
            RoleExpr::Universal => RoleExpr::Universal,
        }
    }

    pub fn inverse(&self) -> Renaming {
        let flip = |m: &BTreeMap<Sym, Sym>| m.iter().map(|(k, v)| (v.clone(), k.clone())).collect();
        Renaming { concepts: flip(&self.concepts), roles: flip(&self.roles), individuals: flip(&self.individuals) }
    }

    pub fn is_identity(&self) -> bool {
        self.concepts.iter().all(|(k, v)| k == v)
            && self.roles.iter().all(|(k, v)| k == v)
            && self.individuals.iter().all(|(k, v)| k == v)
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct Var(pub u32);

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "x{}", self.0)
    }
}

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub enum Assertion {
    Top(Var),
    Concept(Sym, Var),
    Nominal(Sym, Var),
    Role(Sym, Var, Var),
}

impl Assertion {
    pub fn vars(&self) -> (Var, Option<Var>) {
        match self {
            Assertion::Top(x) | Assertion::Concept(_, x) | Assertion::Nominal(_, x) => (*x, None),
            Assertion::Role(_, x, y) => (*x, Some(*y)),
        }
    }

    fn remap(&self, f: &impl Fn(Var) -> Var) -> Assertion {
        match self {
            Assertion::Top(x) => Assertion::Top(f(*x)),
            Assertion::Concept(a, x) => Assertion::Concept(a.clone(), f(*x)),
            Assertion::Nominal(a, x) => Assertion::Nominal(a.clone(), f(*x)),
            Assertion::Role(r, x, y) => Assertion::Role(r.clone(), f(*x), f(*y)),
        }
    }
}

/// A finite set of assertions over opaque variables.
#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct ABox {
    pub assertions: BTreeSet<Assertion>,
    pub names: BTreeMap<Var, String>,
    next: u32,
}

impl ABox {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn fresh(&mut self) -> Var {
        let v = Var(self.next);
        self.next += 1;
        v
    }

    pub fn fresh_named(&mut self, name: impl Into<String>) -> Var {
        let v = self.fresh();
        self.names.insert(v, name.into());
        v
    }

    pub fn display(&self, v: Var) -> String {
        self.names.get(&v).cloned().unwrap_or_else(|| v.to_string())
    }

    fn bump(&mut self, v: Var) {
        if v.0 >= self.next {
            self.next = v.0 + 1;
        }
    }

    pub fn insert(&mut self, a: Assertion) -> bool {
        let (x, y) = a.vars();
        self.bump(x);
        if let Some(y) = y {
            self.bump(y);
        }
        self.assertions.insert(a)
    }

    pub fn add_top(&mut self, x: Var) {
        self.insert(Assertion::Top(x));
    }

    pub fn add_concept(&mut self, a: &str, x: Var) {
        self.insert(Assertion::Concept(sym(a), x));
    }

    pub fn add_nominal(&mut self, a: &str, x: Var) {
        self.insert(Assertion::Nominal(sym(a), x));
    }

    pub fn add_role(&mut self, r: &str, x: Var, y: Var) {
        self.insert(Assertion::Role(sym(r), x, y));
    }

    pub fn contains(&self, a: &Assertion) -> bool {
        self.assertions.contains(a)
    }

    pub fn len(&self) -> usize {
        self.assertions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assertions.is_empty()
    }

    pub fn vars(&self) -> BTreeSet<Var> {
        let mut out = BTreeSet::new();
        for a in &self.assertions {
            let (x, y) = a.vars();
            out.insert(x);
            if let Some(y) = y {
                out.insert(y);
            }
        }
        out
    }

    pub fn concepts_at(&self, x: Var) -> BTreeSet<Sym> {
        self.assertions
            .iter()
            .filter_map(|a| match a {
                Assertion::Concept(c, y) if *y == x => Some(c.clone()),
                _ => None,
            })
            .collect()
    }

    pub fn nominals_at(&self, x: Var) -> BTreeSet<Sym> {
        self.assertions
            .iter()
            .filter_map(|a| match a {
                Assertion::Nominal(c, y) if *y == x => Some(c.clone()),
                _ => None,
            })
            .collect()
    }

    pub fn role_edges(&self) -> impl Iterator<Item = (&Sym, Var, Var)> {
        self.assertions.iter().filter_map(|a| match a {
            Assertion::Role(r, x, y) => Some((r, *x, *y)),
            _ => None,
        })
    }

    pub fn union_with(&mut self, other: &ABox) {
        for a in &other.assertions {
            self.insert(a.clone());
        }
        for (v, n) in &other.names {
            self.names.entry(*v).or_insert_with(|| n.clone());
        }
    }

    pub fn restrict_to(&self, keep: &BTreeSet<Var>) -> ABox {
        let mut out = ABox { next: self.next, ..ABox::new() };
        for a in &self.assertions {
            let (x, y) = a.vars();
            if keep.contains(&x) && y.map_or(true, |y| keep.contains(&y)) {
                out.assertions.insert(a.clone());
            }
        }
        out.names = self.names.iter().filter(|(v, _)| keep.contains(v)).map(|(v, n)| (*v, n.clone())).collect();
        out
    }

    /// Σ-reduct: only assertions whose symbol is in Σ (⊤ assertions are kept).
    pub fn reduct(&self, sigma: &Signature) -> ABox {
        let mut out = ABox { next: self.next, names: self.names.clone(), ..ABox::new() };
        for a in &self.assertions {
            let keep = match a {
                Assertion::Top(_) => true,
                Assertion::Concept(c, _) => sigma.concepts.contains(c),
                Assertion::Nominal(n, _) => sigma.individuals.contains(n),
                Assertion::Role(r, _, _) => sigma.roles.contains(r),
            };
            if keep {
                out.assertions.insert(a.clone());
            }
        }
        out
    }

    /// Identify variables sharing a nominal from `only` (all nominals when `None`).
    /// Returns the merged ABox and the representative of every original variable.
    pub fn factorize_by(&self, only: Option<&BTreeSet<Sym>>) -> (ABox, BTreeMap<Var, Var>) {
        let vars: Vec<Var> = self.vars().into_iter().collect();
        let mut parent: BTreeMap<Var, Var> = vars.iter().map(|v| (*v, *v)).collect();
        fn find(p: &mut BTreeMap<Var, Var>, v: Var) -> Var {
            let mut r = v;
            while p[&r] != r {
                r = p[&r];
            }
            let mut c = v;
            while p[&c] != r {
                let n = p[&c];
                p.insert(c, r);
                c = n;
            }
            r
        }
        let mut owner: BTreeMap<Sym, Var> = BTreeMap::new();
        for a in &self.assertions {
            if let Assertion::Nominal(n, x) = a {
                if only.map_or(true, |s| s.contains(n)) {
                    match owner.get(n) {
                        Some(&y) => {
                            let (rx, ry) = (find(&mut parent, *x), find(&mut parent, y));
                            if rx != ry {
                                let (lo, hi) = if rx < ry { (rx, ry) } else { (ry, rx) };
                                parent.insert(hi, lo);
                            }
                        }
                        None => {
                            owner.insert(n.clone(), *x);
                        }
                    }
                }
            }
        }
        let rep: BTreeMap<Var, Var> = vars.iter().map(|v| (*v, find(&mut parent, *v))).collect();
        let mut out = ABox { next: self.next, ..ABox::new() };
        for a in &self.assertions {
            out.assertions.insert(a.remap(&|v| rep[&v]));
        }
        for (v, n) in &self.names {
            if let Some(r) = rep.get(v) {
                out.names.entry(*r).or_insert_with(|| n.clone());
            }
        }
        (out, rep)
    }

    pub fn factorize(&self) -> ABox {
        self.factorize_by(None).0
    }

    pub fn is_factorized(&self) -> bool {
        let mut seen: BTreeMap<&Sym, Var> = BTreeMap::new();
        for a in &self.assertions {
            if let Assertion::Nominal(n, x) = a {
                if let Some(y) = seen.insert(n, *x) {
                    if y != *x {
                        return false;
                    }
                }
            }
        }
        true
    }

    /// Copy `other` in with fresh variables; returns the variable map.
    pub fn import(&mut self, other: &ABox) -> BTreeMap<Var, Var> {
        let mut m = BTreeMap::new();
        for v in other.vars() {
            let n = self.fresh();
            if let Some(name) = other.names.get(&v) {
                self.names.insert(n, name.clone());
            }
            m.insert(v, n);
        }
        for a in &other.assertions {
            self.insert(a.remap(&|v| m[&v]));
        }
        m
    }

    pub fn dialect(&self) -> Dialect {
        let mut d = Dialect::EL;
        d.nominals = self.assertions.iter().any(|a| matches!(a, Assertion::Nominal(..)));
        d
    }
}

impl fmt::Display for ABox {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for a in &self.assertions {
            if !first {
                write!(f, ", ")?;
            }
            first = false;
            match a {
                Assertion::Top(x) => write!(f, "Top({})", self.display(*x))?,
                Assertion::Concept(c, x) => write!(f, "{c}({})", self.display(*x))?,
                Assertion::Nominal(c, x) => write!(f, "{{{c}}}({})", self.display(*x))?,
                Assertion::Role(r, x, y) => write!(f, "{r}({}, {})", self.display(*x), self.display(*y))?,
            }
        }
        Ok(())
    }
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct PointedABox {
    pub abox: ABox,
    pub root: Var,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ShapeKind {
    Ditree,
    RootedDitree,
    Tree,
    WeaklyRootedTree,
}

impl ShapeKind {
    pub fn directed(self) -> bool {
        matches!(self, ShapeKind::Ditree | ShapeKind::RootedDitree)
    }

    pub fn rooted(self) -> bool {
        matches!(self, ShapeKind::RootedDitree | ShapeKind::WeaklyRootedTree)
    }
}

/// Evidence that an ABox is tree-shaped once the edges touching anchor variables
/// (those carrying a nominal from `modulus`) are set aside.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct ShapeWitness {
    pub kind: ShapeKind,
    pub dropped_edges: BTreeSet<(Sym, Var, Var)>,
    pub modulus: BTreeSet<Sym>,
}

impl ShapeWitness {
    /// Computes the witness for a pointed ABox given the anchoring nominals.
    pub fn infer(p: &PointedABox, modulus: &BTreeSet<Sym>) -> ShapeWitness {
        let anchors = anchor_vars(&p.abox, modulus);
        let dropped: BTreeSet<(Sym, Var, Var)> = p
            .abox
            .role_edges()
            .filter(|(_, x, y)| anchors.contains_key(x) || anchors.contains_key(y))
            .map(|(r, x, y)| (r.clone(), x, y))
            .collect();
        let mut w = ShapeWitness { kind: ShapeKind::Tree, dropped_edges: dropped, modulus: modulus.clone() };
        let children = outgoing(&p.abox, &w);
        let has_in = incoming_counts(&p.abox, &w);
        let directed = p.abox.vars().iter().all(|v| has_in.get(v).copied().unwrap_or(0) <= 1)
            && has_in.get(&p.root).copied().unwrap_or(0) == 0;
        let reach_dir = reachable(&p.abox, p.root, true);
        let reach_und = reachable(&p.abox, p.root, false);
        let all = p.abox.vars();
        let _ = children;
        w.kind = match (directed, reach_dir == all, reach_und == all) {
            (true, true, _) => ShapeKind::RootedDitree,
            (true, false, _) => ShapeKind::Ditree,
            (false, _, true) => ShapeKind::WeaklyRootedTree,
            (false, _, false) => ShapeKind::Tree,
        };
        w
    }
}

pub(crate) fn anchor_vars(a: &ABox, modulus: &BTreeSet<Sym>) -> BTreeMap<Var, Sym> {
    let mut out = BTreeMap::new();
    for asr in &a.assertions {
        if let Assertion::Nominal(n, x) = asr {
            if modulus.contains(n) {
                out.entry(*x).or_insert_with(|| n.clone());
            }
        }
    }
    out
}

fn outgoing(a: &ABox, w: &ShapeWitness) -> BTreeMap<Var, Vec<(Sym, Var)>> {
    let mut m: BTreeMap<Var, Vec<(Sym, Var)>> = BTreeMap::new();
    for (r, x, y) in a.role_edges() {
        if !w.dropped_edges.contains(&(r.clone(), x, y)) {
            m.entry(x).or_default().push((r.clone(), y));
        }
    }
    m
}

fn incoming_counts(a: &ABox, w: &ShapeWitness) -> BTreeMap<Var, usize> {
    let mut m = BTreeMap::new();
    for (r, x, y) in a.role_edges() {
        if !w.dropped_edges.contains(&(r.clone(), x, y)) {
            *m.entry(y).or_insert(0) += 1;
        }
    }
    m
}

/// Variables reachable from `from` along role edges (following direction if `directed`).
pub fn reachable(a: &ABox, from: Var, directed: bool) -> BTreeSet<Var> {
    let mut adj: BTreeMap<Var, Vec<Var>> = BTreeMap::new();
    for (_, x, y) in a.role_edges() {
        adj.entry(x).or_default().push(y);
        if !directed {
            adj.entry(y).or_default().push(x);
        }
    }
    let mut seen = BTreeSet::from([from]);
    let mut stack = vec![from];
    while let Some(v) = stack.pop() {
        for &n in adj.get(&v).map(|v| v.as_slice()).unwrap_or(&[]) {
            if seen.insert(n) {
                stack.push(n);
            }
        }
    }
    seen
}

/// Encodes a concept as a pointed ABox, one shared variable per Σ-nominal.
pub fn concept_to_pointed_abox(c: &Concept, sigma: &Signature) -> (PointedABox, ShapeWitness) {
    fn go(c: &Concept, x: Var, a: &mut ABox) {
        match c.node() {
            Node::Top => a.add_top(x),
            Node::Bot => {
                a.insert(Assertion::Concept(sym(BOT_MARK), x));
            }
            Node::Name(n) => {
                a.insert(Assertion::Concept(n.clone(), x));
            }
            Node::Nominal(n) => {
                a.insert(Assertion::Nominal(n.clone(), x));
            }
            Node::And(cs) => cs.iter().for_each(|d| go(d, x, a)),
            Node::Exists(r, d) => {
                let y = a.fresh();
                match r {
                    RoleExpr::Name(s) => {
                        a.insert(Assertion::Role(s.clone(), x, y));
                    }
                    RoleExpr::Inv(s) => {
                        a.insert(Assertion::Role(s.clone(), y, x));
                    }
                    RoleExpr::Universal => {}
                }
                go(d, y, a);
                if matches!(r, RoleExpr::Universal) && a.vars().get(&y).is_none() {
                    a.add_top(y);
                }
            }
        }
    }
    let mut a = ABox::new();
    let root = a.fresh();
    go(c, root, &mut a);
    a.add_top(root);
    let modulus: BTreeSet<Sym> = signature_of(c).individuals.intersection(&sigma.individuals).cloned().collect();
    let (fa, rep) = a.factorize_by(Some(&modulus));
    let p = PointedABox { abox: fa, root: rep[&root] };
    let w = ShapeWitness::infer(&p, &modulus);
    (p, w)
}

/// Reserved concept name standing for ⊥ inside ABoxes.
pub const BOT_MARK: &str = "_bot";

/// Reads a pointed ABox back as a concept.
pub fn pointed_abox_to_concept(p: &PointedABox, w: &ShapeWitness, dialect: Dialect) -> crate::Result<Concept> {
    use crate::Error;
    let a = &p.abox;
    let anchors = anchor_vars(a, &w.modulus);
    let mut vars = a.vars();
    vars.insert(p.root);
    for (r, x, y) in &w.dropped_edges {
        if !a.contains(&Assertion::Role(r.clone(), *x, *y)) {
            return Err(Error::ShapeViolation(format!("dropped edge {r}({x},{y}) not in the ABox")));
        }
        if !anchors.contains_key(x) && !anchors.contains_key(y) {
            return Err(Error::ShapeViolation(format!("dropped edge {r}({x},{y}) touches no anchor")));
        }
    }
    // Undirected adjacency over kept edges; each entry is (role, neighbour, forward?).
    let mut adj: BTreeMap<Var, Vec<(Sym, Var, bool)>> = BTreeMap::new();
    let mut pairs = BTreeSet::new();
    for (r, x, y) in a.role_edges() {
        if w.dropped_edges.contains(&(r.clone(), x, y)) {
            continue;
        }
        let key = (x.min(y), x.max(y));
        if x == y || !pairs.insert(key) {
            return Err(Error::ShapeViolation(format!("edge {r}({x},{y}) repeats or loops")));
        }
        adj.entry(x).or_default().push((r.clone(), y, true));
        adj.entry(y).or_default().push((r.clone(), x, false));
    }
    // References to anchors from the dropped edges, indexed by the non-anchor (or source) end.
    let mut refs: BTreeMap<Var, Vec<(RoleExpr, Var)>> = BTreeMap::new();
    for (r, x, y) in &w.dropped_edges {
        refs.entry(*x).or_default().push((RoleExpr::Name(r.clone()), *y));
        refs.entry(*y).or_default().push((RoleExpr::Inv(r.clone()), *x));
    }
    let mut placed: BTreeSet<Var> = BTreeSet::new();
    let mut used: BTreeSet<(Var, Var, RoleExpr)> = BTreeSet::new();

    // Collect the component of `start`, rooted there; fails on cycles or wrong orientation.
    fn component(
        start: Var,
        adj: &BTreeMap<Var, Vec<(Sym, Var, bool)>>,
        dialect: Dialect,
        placed: &mut BTreeSet<Var>,
    ) -> crate::Result<Vec<(Var, Option<Var>)>> {
        let mut order = vec![];
        let mut stack = vec![(start, None)];
        while let Some((v, parent)) = stack.pop() {
            if !placed.insert(v) {
                return Err(Error::ShapeViolation(format!("cycle through {v}")));
            }
            order.push((v, parent));
            for (r, n, fwd) in adj.get(&v).map(|v| v.as_slice()).unwrap_or(&[]) {
                if Some(*n) == parent {
                    continue;
                }
                if !fwd && !dialect.inverse_roles {
                    return Err(Error::ShapeViolation(format!("edge {r}({n},{v}) points towards the root")));
                }
                stack.push((*n, Some(v)));
            }
        }
        Ok(order)
    }

    let directed = !dialect.inverse_roles;
    let can_root = |v: Var| -> bool {
        !directed || adj.get(&v).map_or(true, |es| es.iter().all(|e| e.2))
    };
    let mut roots: Vec<(Var, Option<(Var, RoleExpr)>)> = Vec::new();
    let mut attach: BTreeMap<(Var, RoleExpr, Var), ()> = BTreeMap::new();
    let mut with_u: Vec<Var> = Vec::new();

    if !can_root(p.root) {
        return Err(Error::ShapeViolation("root has an incoming edge".into()));
    }
    let mut comp_of_root = component(p.root, &adj, dialect, &mut placed)?;
    let mut frontier: Vec<Var> = comp_of_root.iter().map(|(v, _)| *v).collect();
    roots.push((p.root, None));
    let mut extra_components = 0usize;
    loop {
        while let Some(v) = frontier.pop() {
            for (role, other) in refs.get(&v).cloned().unwrap_or_default() {
                if placed.contains(&other) || !can_root(other) {
                    continue;
                }
                if role.is_inverse() && !dialect.inverse_roles {
                    continue;
                }
                let comp = component(other, &adj, dialect, &mut placed)?;
                used.insert((v, other, role.clone()));
                attach.insert((v, role.clone(), other), ());
                roots.push((other, Some((v, role))));
                frontier.extend(comp.iter().map(|(x, _)| *x));
                comp_of_root.extend(comp);
            }
        }
        let rest: Vec<Var> = vars.iter().copied().filter(|v| !placed.contains(v)).collect();
        if rest.is_empty() {
            break;
        }
        // Prefer an anchor or a source as the new component root.
        let pick = rest
            .iter()
            .copied()
            .filter(|v| can_root(*v))
            .min_by_key(|v| (!anchors.contains_key(v), *v));
        let Some(pick) = pick else {
            return Err(Error::ShapeViolation("component without a root".into()));
        };
        extra_components += 1;
        if !dialect.universal_role {
            let comps = count_components(&rest, &adj);
            return Err(Error::UniversalRoleRequired(comps));
        }
        let comp = component(pick, &adj, dialect, &mut placed)?;
        with_u.push(pick);
        roots.push((pick, None));
        frontier.extend(comp.iter().map(|(x, _)| *x));
        comp_of_root.extend(comp);
    }
    let _ = extra_components;

    // Children of each node in the chosen orientation.
    let mut kids: BTreeMap<Var, Vec<(RoleExpr, Var)>> = BTreeMap::new();
    for (v, parent) in &comp_of_root {
        if let Some(pv) = parent {
            let (r, _, fwd) = adj[pv].iter().find(|(_, n, _)| n == v).unwrap().clone();
            let role = if fwd { RoleExpr::Name(r) } else { RoleExpr::Inv(r) };
            kids.entry(*pv).or_default().push((role, *v));
        }
    }
    for ((v, role, other), _) in &attach {
        kids.entry(*v).or_default().push((role.clone(), *other));
    }

    fn build(
        v: Var,
        a: &ABox,
        kids: &BTreeMap<Var, Vec<(RoleExpr, Var)>>,
        reads: &BTreeMap<Var, Vec<(RoleExpr, Sym)>>,
    ) -> crate::Result<Concept> {
        let mut parts = Vec::new();
        for c in a.concepts_at(v) {
            if &*c == BOT_MARK {
                parts.push(Concept::bot());
            } else {
                parts.push(Concept::name_sym(c));
            }
        }
        for n in a.nominals_at(v) {
            parts.push(Concept::nominal_sym(n));
        }
        for (role, child) in kids.get(&v).map(|v| v.as_slice()).unwrap_or(&[]) {
            let sub = build(*child, a, kids, reads)?;
            parts.push(Concept::exists(role.clone(), sub));
        }
        for (role, name) in reads.get(&v).map(|v| v.as_slice()).unwrap_or(&[]) {
            parts.push(Concept::exists(role.clone(), Concept::nominal_sym(name.clone())));
        }
        Ok(Concept::conj(parts))
    }

    // Dropped edges not used to attach a component become nominal references.
    let mut reads: BTreeMap<Var, Vec<(RoleExpr, Sym)>> = BTreeMap::new();
    for (r, x, y) in &w.dropped_edges {
        let fwd = RoleExpr::Name(r.clone());
        let bwd = RoleExpr::Inv(r.clone());
        if used.contains(&(*x, *y, fwd.clone())) || used.contains(&(*y, *x, bwd.clone())) {
            continue;
        }
        if let Some(n) = anchors.get(y) {
            reads.entry(*x).or_default().push((fwd, n.clone()));
        } else if dialect.inverse_roles {
            reads.entry(*y).or_default().push((bwd, anchors[x].clone()));
        } else {
            return Err(Error::ShapeViolation(format!("edge {r}({x},{y}) cannot be expressed without inverses")));
        }
    }

    let mut root_c = build(p.root, a, &kids, &reads)?;
    for v in with_u {
        let c = build(v, a, &kids, &reads)?;
        root_c = Concept::and(root_c, Concept::exists(RoleExpr::Universal, c));
    }
    Ok(root_c)
}

fn count_components(rest: &[Var], adj: &BTreeMap<Var, Vec<(Sym, Var, bool)>>) -> usize {
    let mut seen = BTreeSet::new();
    let mut n = 0;
    for &v in rest {
        if seen.contains(&v) {
            continue;
        }
        n += 1;
        let mut st = vec![v];
        seen.insert(v);
        while let Some(x) = st.pop() {
            for (_, y, _) in adj.get(&x).map(|v| v.as_slice()).unwrap_or(&[]) {
                if seen.insert(*y) {
                    st.push(*y);
                }
            }
        }
    }
    n
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interning_shares_nodes() {
        let a = Concept::and(Concept::name("B"), Concept::some("r", Concept::name("C")));
        let b = Concept::conj([Concept::some("r", Concept::name("C")), Concept::name("B"), Concept::name("B")]);
        assert_eq!(a, b);
        assert_eq!(a.size(), 4);
    }

    #[test]
    fn inverse_is_involution() {
        let r = RoleExpr::name("r");
        assert_eq!(r.inverse().inverse(), r);
        assert_eq!(RoleExpr::Universal.inverse(), RoleExpr::Universal);
    }

    #[test]
    fn universal_role_not_in_signature() {
        let c = Concept::exists(RoleExpr::Universal, Concept::name("B"));
        let s = signature_of(&c);
        assert_eq!(s, Signature::from_names(&["B"], &[], &[]));
        assert!(signature_of(&Concept::top()).is_empty());
    }

    #[test]
    fn simple_abox_encoding() {
        let c = Concept::and(Concept::name("A"), Concept::some("r", Concept::name("B")));
        let (p, w) = concept_to_pointed_abox(&c, &Signature::new());
        assert_eq!(p.abox.concepts_at(p.root), BTreeSet::from([sym("A")]));
        assert_eq!(p.abox.role_edges().count(), 1);
        assert_eq!(w.kind, ShapeKind::RootedDitree);
        let back = pointed_abox_to_concept(&p, &w, Dialect::EL).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn shared_nominal_variable() {
        let c = Concept::and(Concept::some("r", Concept::nominal("c")), Concept::some("s", Concept::nominal("c")));
        let sigma = Signature::from_names(&[], &["r", "s"], &["c"]);
        let (p, w) = concept_to_pointed_abox(&c, &sigma);
        let targets: BTreeSet<Var> = p.abox.role_edges().map(|e| e.2).collect();
        assert_eq!(targets.len(), 1);
        assert_eq!(w.dropped_edges.len(), 2);
        let back = pointed_abox_to_concept(&p, &w, Dialect::ELO).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn disconnected_component_needs_u() {
        let mut a = ABox::new();
        let x = a.fresh();
        let y = a.fresh();
        a.add_nominal("b", x);
        a.add_concept("B", y);
        let p = PointedABox { abox: a, root: x };
        let w = ShapeWitness::infer(&p, &BTreeSet::from([sym("b")]));
        let c = pointed_abox_to_concept(&p, &w, Dialect::ELO_U).unwrap();
        assert_eq!(c, Concept::and(Concept::nominal("b"), Concept::exists(RoleExpr::Universal, Concept::name("B"))));
        assert!(matches!(
            pointed_abox_to_concept(&p, &w, Dialect::ELO),
            Err(crate::Error::UniversalRoleRequired(1))
        ));
    }

    #[test]
    fn dialect_names_round_trip() {
        for d in [Dialect::EL, Dialect::ELO_U, Dialect::ELRO_U, Dialect::ELIO_U, Dialect::ELI_U] {
            assert_eq!(Dialect::parse(&d.to_string()), Some(d));
        }
    }
}
