//! Interpolants and explicit definitions for ELIO_u and its fragments: bounded canonical trees,
//! ELIO_u derivation trees over the undirected unfolding, and transfer-sequence pruning.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::sync::Arc;
use std::time::Instant;

use serde::Serialize;
use serde_json::{json, Value};

use crate::derivation::{lift_tree_eli, support_abox_eli, DerivationConfig, EliDerivations};
use crate::el_engine::Atom;
use crate::eli_automata::{interpolant_exists_eli, ExistenceConfig};
use crate::eli_engine::{canonical_tree, compute_types, Completion, EliConfig, EliElem, EliTbox, Fact, UWord, UndirectedUnfolding};
use crate::interp_el::{verify_interpolant, DefinabilityProblem, InterpolationProblem};
use crate::normalize::{eliminate_bot, prepare_interpolation_input, restore_bot, BotElimination};
use crate::types::*;
use crate::{Error, Result};

#[derive(Clone, Debug)]
pub struct EliInterpOptions {
    /// Start depth of the adaptive search over bounded canonical trees.
    pub start_depth: usize,
    /// Fixed depth instead of doubling.
    pub depth: Option<usize>,
    /// Hard cap on the depth; the default bound `2^(x²)` is far beyond it for every input.
    pub max_depth: usize,
    pub max_words: usize,
    /// Replace subtrees with matching transfer sequences.
    pub prune: bool,
    /// Skip pruning for supports with more variables than this.
    pub max_prune_vars: usize,
    pub existence: ExistenceConfig,
    pub derivation: DerivationConfig,
}

impl Default for EliInterpOptions {
    fn default() -> Self {
        EliInterpOptions {
            start_depth: 1,
            depth: None,
            max_depth: 64,
            max_words: 1 << 16,
            prune: true,
            max_prune_vars: 256,
            existence: ExistenceConfig::default(),
            derivation: DerivationConfig::default(),
        }
    }
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct EliStats {
    pub types: usize,
    pub depth: usize,
    pub tree_words: usize,
    pub tree_size: usize,
    pub support_vars: usize,
    pub pruned_vars: usize,
    pub replacements: usize,
    pub rejected_replacements: usize,
    pub ms: u128,
}

#[derive(Clone, Debug)]
pub struct EliInterpolationResult {
    pub exists: bool,
    pub interpolant: Option<Concept>,
    pub verified: bool,
    pub stats: EliStats,
}

impl EliInterpolationResult {
    pub fn to_json(&self) -> Value {
        json!({
            "exists": self.exists,
            "interpolant": self.interpolant.as_ref().map(|c| c.to_string()),
            "verified": self.verified,
            "stats": self.stats,
        })
    }
}

/// The default depth bound `2^q(‖O‖)` with `q(x) = x²`, saturated at `usize::MAX`.
pub fn depth_bound(o: &Ontology) -> usize {
    let n = o.size() as u32;
    let q = n.saturating_mul(n);
    if q >= usize::BITS - 1 {
        usize::MAX
    } else {
        1usize << q
    }
}

struct Reduced {
    o1: Ontology,
    o2: Ontology,
    a: Sym,
    b: Sym,
    sigma: Signature,
    marker: Option<Sym>,
}

enum Stage {
    Trivial(Concept),
    Reduced(Reduced),
}

fn reduce(p: &InterpolationProblem) -> Result<Stage> {
    if !p.o1.ris.is_empty() || !p.o2.ris.is_empty() {
        return Err(Error::Dialect("role inclusions are not supported together with inverse roles".into()));
    }
    let (o1, o2, c1, c2, marker) = match eliminate_bot(&p.o1, &p.o2, &p.c1, &p.c2)? {
        BotElimination::Trivial { interpolant } => return Ok(Stage::Trivial(interpolant)),
        BotElimination::Rewritten { o1, o2, c1, c2, marker } => (o1, o2, c1, c2, marker),
    };
    let prep = prepare_interpolation_input(&o1, &c1, &o2, &c2);
    let mut s1 = signature_of(&prep.o1);
    s1.concepts.insert(prep.a.clone());
    let mut s2 = signature_of(&prep.o2);
    s2.concepts.insert(prep.b.clone());
    let sigma = s1.intersect(&s2);
    Ok(Stage::Reduced(Reduced { o1: prep.o1, o2: prep.o2, a: prep.a, b: prep.b, sigma, marker }))
}

/// Existence of an ELIO_u (ELIO without `u`) interpolant, decided by the automata construction.
pub fn interpolant_exists(p: &InterpolationProblem) -> Result<bool> {
    interpolant_exists_with(p, &ExistenceConfig::default())
}

pub fn interpolant_exists_with(p: &InterpolationProblem, cfg: &ExistenceConfig) -> Result<bool> {
    match reduce(p)? {
        Stage::Trivial(_) => Ok(true),
        Stage::Reduced(r) => interpolant_exists_eli(&r.o1, &r.o2, &r.a, &r.b, &r.sigma, p.universal, cfg),
    }
}

/// Bounded check: `O, A^Σ_d ⊨ B(ρ_A)` for the canonical tree cut at depth `d`. Success
/// implies existence.
pub fn bounded_entailment(p: &InterpolationProblem, depth: usize) -> Result<bool> {
    match reduce(p)? {
        Stage::Trivial(_) => Ok(true),
        Stage::Reduced(r) => {
            let o = r.o1.union(&r.o2);
            let g = Arc::new(compute_types(&o, &r.a, &EliConfig::default())?);
            let t = canonical_tree(&g, depth, 1 << 16)?;
            let (abox, _) = reduct(&t, &r.sigma, p.universal);
            let tb = EliTbox::compile(&o)?;
            let c = Completion::run(&tb, &abox.abox, &[], &EliConfig::default())?;
            Ok(c.holds_atom(abox.root, &Atom::Name(r.b.clone())))
        }
    }
}

/// The Σ-reduct of a bounded canonical tree, restricted to the component of the root without `u`.
fn reduct(t: &crate::eli_engine::BoundedCanonicalTree, sigma: &Signature, universal: bool) -> (PointedABox, Vec<Var>) {
    let (p, vars) = t.to_abox(Some(sigma));
    if universal {
        return (p, vars);
    }
    let keep = reachable(&p.abox, p.root, false);
    (PointedABox { abox: p.abox.restrict_to(&keep), root: p.root }, vars)
}

pub fn solve(p: &InterpolationProblem, opts: &EliInterpOptions) -> Result<EliInterpolationResult> {
    let start = Instant::now();
    let mut stats = EliStats::default();
    let r = match reduce(p)? {
        Stage::Trivial(c) => {
            let verified = verify_interpolant(p, &c)?.is_none();
            stats.ms = start.elapsed().as_millis();
            return Ok(EliInterpolationResult { exists: true, interpolant: Some(c), verified, stats });
        }
        Stage::Reduced(r) => r,
    };
    let exists = interpolant_exists_eli(&r.o1, &r.o2, &r.a, &r.b, &r.sigma, p.universal, &opts.existence)?;
    if !exists {
        stats.ms = start.elapsed().as_millis();
        return Ok(EliInterpolationResult { exists, interpolant: None, verified: false, stats });
    }
    let o = r.o1.union(&r.o2);
    let g = Arc::new(compute_types(&o, &r.a, &opts.existence.eli)?);
    stats.types = g.types.len();
    let goal = Fact::Atom(Atom::Name(r.b.clone()));
    let cap = opts.max_depth.min(depth_bound(&o));
    let mut depth = opts.depth.unwrap_or(opts.start_depth.max(1)).min(cap);
    let tb = EliTbox::compile(&o)?;
    let (tree, abox, vars) = loop {
        let t = canonical_tree(&g, depth, opts.max_words).map_err(|e| match e {
            Error::ResourceLimit(mut l) => {
                l.depth = Some(depth);
                Error::ResourceLimit(l)
            }
            e => e,
        })?;
        let (abox, vars) = reduct(&t, &r.sigma, p.universal);
        let c = Completion::run(&tb, &abox.abox, &[], &opts.existence.eli)?;
        if c.holds_atom(abox.root, &Atom::Name(r.b.clone())) {
            break (t, abox, vars);
        }
        if opts.depth.is_some() || depth >= cap {
            let limit = if opts.depth.is_some() { depth } else { cap };
            return Err(Error::resource("canonical tree depth", limit as u64, Some(depth)));
        }
        depth = (depth * 2).min(cap);
    };
    stats.depth = depth;
    stats.tree_words = tree.words.len();
    let d = EliDerivations::new(&o, &abox.abox)?;
    let dtree = d
        .tree(&EliElem::Ind(abox.root), &goal)?
        .ok_or_else(|| Error::Invalid("goal entailed but no derivation tree was built".into()))?;
    let gamma: BTreeSet<Sym> = r.sigma.individuals.clone();
    let u = UndirectedUnfolding::new(&abox, &gamma);
    let lifted = lift_tree_eli(&dtree, &u, &opts.derivation)?;
    stats.tree_size = lifted.size();
    let (mut support, map) = support_abox_eli(&lifted, &u, !p.universal);
    stats.support_vars = support.abox.vars().len();
    if opts.prune && stats.support_vars <= opts.max_prune_vars {
        // canonical type of every support variable, through the words of the bounded tree
        let word_of: BTreeMap<Var, usize> = vars.iter().enumerate().map(|(i, v)| (*v, i)).collect();
        let ty: BTreeMap<Var, usize> = map.iter().map(|(w, v)| (*v, tree.words[word_of[&w.tail()]].tail())).collect();
        let parents = parents_of(&map);
        let mut pt = PruneTree::new(support.clone(), ty, parents, &gamma);
        let res = prune_by_transfer(&o, &mut pt, &r.b)?;
        stats.replacements = res.0;
        stats.rejected_replacements = res.1;
        support = pt.abox.clone();
    }
    stats.pruned_vars = support.abox.vars().len();
    let witness = ShapeWitness::infer(&support, &gamma);
    let dialect = Dialect::ELIO_U.with_universal(p.universal);
    let raw = pointed_abox_to_concept(&support, &witness, dialect)?;
    let c = restore_bot(&raw, &r.marker);
    let verified = verify_interpolant(p, &c)?.is_none();
    stats.ms = start.elapsed().as_millis();
    Ok(EliInterpolationResult { exists, interpolant: Some(c), verified, stats })
}

fn parents_of(map: &BTreeMap<UWord, Var>) -> BTreeMap<Var, Var> {
    let mut out = BTreeMap::new();
    for (w, v) in map {
        if let Some(p) = w.parent() {
            if let Some(pv) = map.get(&p) {
                out.insert(*v, *pv);
            }
        }
    }
    out
}

pub fn compute_interpolant(p: &InterpolationProblem) -> Result<Option<Concept>> {
    let r = solve(p, &EliInterpOptions::default())?;
    match (r.exists, r.verified) {
        (false, _) => Ok(None),
        (true, true) => Ok(r.interpolant),
        (true, false) => Err(Error::Invalid(format!(
            "computed concept {} failed interpolant verification",
            r.interpolant.map(|c| c.to_string()).unwrap_or_default()
        ))),
    }
}

pub fn explicit_def_exists(p: &DefinabilityProblem) -> Result<bool> {
    interpolant_exists(&p.to_interpolation())
}

pub fn compute_explicit_def(p: &DefinabilityProblem) -> Result<Option<Concept>> {
    let Some(c) = compute_interpolant(&p.to_interpolation())? else { return Ok(None) };
    let a = Concept::name_sym(p.a.clone());
    if !crate::reason::equivalent(&p.o, &a, &c)? {
        return Err(Error::Invalid(format!("{c} is not equivalent to {a}")));
    }
    Ok(Some(c))
}

/// A support ABox with its tree structure: non-anchor variables hang below the root or below
/// an anchor; anchors form the set `I`.
#[derive(Clone, Debug)]
pub struct PruneTree {
    pub abox: PointedABox,
    /// Canonical type of each variable.
    pub ty: BTreeMap<Var, usize>,
    pub parent: BTreeMap<Var, Var>,
    /// Root, anchors and component roots: the individuals of `I`.
    pub fixed: BTreeSet<Var>,
}

impl PruneTree {
    pub fn new(abox: PointedABox, ty: BTreeMap<Var, usize>, parent: BTreeMap<Var, Var>, gamma: &BTreeSet<Sym>) -> PruneTree {
        let mut fixed: BTreeSet<Var> = anchor_vars(&abox.abox, gamma).into_keys().collect();
        fixed.insert(abox.root);
        for v in abox.abox.vars() {
            if !parent.contains_key(&v) {
                fixed.insert(v);
            }
        }
        PruneTree { abox, ty, parent, fixed }
    }

    pub fn children(&self, v: Var) -> Vec<Var> {
        self.parent.iter().filter(|(_, p)| **p == v).map(|(c, _)| *c).collect()
    }

    /// `w` and everything below it.
    pub fn subtree(&self, w: Var) -> BTreeSet<Var> {
        let mut out = BTreeSet::from([w]);
        let mut queue = VecDeque::from([w]);
        while let Some(v) = queue.pop_front() {
            for c in self.children(v) {
                if out.insert(c) {
                    queue.push_back(c);
                }
            }
        }
        out
    }

    pub fn depth(&self) -> usize {
        let mut best = 0;
        for v in self.abox.abox.vars() {
            let mut d = 0;
            let mut cur = v;
            while let Some(p) = self.parent.get(&cur) {
                d += 1;
                cur = *p;
            }
            best = best.max(d);
        }
        best
    }

    /// Assertions about `w` alone and between `w` and `I`, with `w` abstracted.
    fn local(&self, w: Var) -> BTreeSet<String> {
        let a = &self.abox.abox;
        let mut out = BTreeSet::new();
        for c in a.concepts_at(w) {
            out.insert(format!("C {c}"));
        }
        for n in a.nominals_at(w) {
            out.insert(format!("N {n}"));
        }
        for (r, x, y) in a.role_edges() {
            if x == w && self.fixed.contains(&y) {
                out.insert(format!("R {r} > {y}"));
            }
            if y == w && self.fixed.contains(&x) {
                out.insert(format!("R {r} < {x}"));
            }
        }
        out
    }

    /// Replaces everything strictly below `w` by copies of what lies strictly below `v`.
    fn replace(&mut self, w: Var, v: Var) {
        let drop: BTreeSet<Var> = self.subtree(w).into_iter().filter(|x| *x != w).collect();
        let src = self.subtree(v);
        let old = self.abox.abox.clone();
        let mut a = ABox::new();
        let mut map: BTreeMap<Var, Var> = BTreeMap::new();
        for x in old.vars() {
            if !drop.contains(&x) {
                map.insert(x, a.fresh_named(old.display(x)));
            }
        }
        let mut copy: BTreeMap<Var, Var> = BTreeMap::from([(v, map[&w])]);
        for x in &src {
            if *x != v {
                copy.insert(*x, a.fresh_named(format!("{}'", old.display(*x))));
            }
        }
        for asr in &old.assertions {
            match asr {
                Assertion::Top(x) => {
                    if let Some(y) = map.get(x) {
                        a.add_top(*y);
                    }
                }
                Assertion::Concept(c, x) => {
                    if let Some(y) = map.get(x) {
                        a.add_concept(c, *y);
                    }
                }
                Assertion::Nominal(c, x) => {
                    if let Some(y) = map.get(x) {
                        a.add_nominal(c, *y);
                    }
                }
                Assertion::Role(r, x, y) => {
                    if let (Some(x2), Some(y2)) = (map.get(x), map.get(y)) {
                        a.add_role(r, *x2, *y2);
                    }
                }
            }
        }
        // the copied subtree: its inner edges and its edges to `I`
        for asr in &old.assertions {
            match asr {
                Assertion::Top(x) if src.contains(x) && *x != v => a.add_top(copy[x]),
                Assertion::Concept(c, x) if src.contains(x) && *x != v => a.add_concept(c, copy[x]),
                Assertion::Nominal(c, x) if src.contains(x) && *x != v => a.add_nominal(c, copy[x]),
                Assertion::Role(r, x, y) => {
                    let inner = |z: &Var| src.contains(z);
                    let fx = |z: &Var| self.fixed.contains(z);
                    if inner(x) && inner(y) && (*x != v || *y != v) && !(*x == v && *y == v) {
                        if *x == v || *y == v || (inner(x) && inner(y)) {
                            a.add_role(r, copy[x], copy[y]);
                        }
                    } else if inner(x) && fx(y) && *x != v {
                        a.add_role(r, copy[x], map[y]);
                    } else if fx(x) && inner(y) && *y != v {
                        a.add_role(r, map[x], copy[y]);
                    }
                }
                _ => {}
            }
        }
        let mut ty = BTreeMap::new();
        let mut parent = BTreeMap::new();
        for (x, y) in &map {
            ty.insert(*y, self.ty[x]);
            if let Some(p) = self.parent.get(x) {
                parent.insert(*y, map[p]);
            }
        }
        for (x, y) in &copy {
            if *x != v {
                ty.insert(*y, self.ty[x]);
                parent.insert(*y, copy[&self.parent[x]]);
            }
        }
        self.fixed = self.fixed.iter().map(|x| map[x]).collect();
        self.abox = PointedABox { abox: a, root: map[&self.abox.root] };
        self.ty = ty;
        self.parent = parent;
    }
}

/// An element of `D_B(w)`, with `w` abstracted so sequences of different variables compare.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Transfer {
    /// A fact at `w`.
    Here(Fact),
    /// A fact at a variable of `I`.
    At(Var, Fact),
    /// A fact at the element of a nominal (`x_a` or `x_{a,new}`).
    Nominal(Sym, Fact),
    /// `r(w, c)` for `c` named by a nominal.
    Link(RoleExpr, Sym),
    /// `∃u.A`, i.e. `A(x_{A,new})`.
    Some(Sym),
}

/// The transfer sequence `X_0, X_1, …` of `(A, w)`: alternately the consequences over the
/// subtree at `w` and over the rest, each seeded with the previous set, until it stabilizes.
pub fn transfer_sequence(o: &Ontology, t: &PruneTree, w: Var) -> Result<Vec<BTreeSet<Transfer>>> {
    let tb = EliTbox::compile(o)?;
    let down = t.subtree(w);
    let all = t.abox.abox.vars();
    let above: BTreeSet<Var> = all.iter().copied().filter(|x| !down.contains(x) || *x == w).collect();
    let down: BTreeSet<Var> = down.union(&t.fixed).copied().collect();
    let above: BTreeSet<Var> = above.union(&t.fixed).copied().collect();
    let mut seq: Vec<BTreeSet<Transfer>> = vec![];
    let mut prev: BTreeSet<Transfer> = BTreeSet::new();
    let space_bound = 2 * (o.size() + 1) * (all.len() + 2) * (signature_of(o).len() + 2);
    loop {
        let part = if seq.len() % 2 == 0 { &down } else { &above };
        let x = d_set(&tb, &t.abox.abox.restrict_to(part), w, &t.fixed, &prev)?;
        let stable = seq.len() >= 2 && x == prev;
        seq.push(x.clone());
        if stable {
            return Ok(seq);
        }
        assert!(seq.len() <= space_bound + 2, "transfer sequence exceeded its monotone bound");
        prev = x;
    }
}

fn d_set(tb: &Arc<EliTbox>, base: &ABox, w: Var, fixed: &BTreeSet<Var>, seed: &BTreeSet<Transfer>) -> Result<BTreeSet<Transfer>> {
    let mut a = base.clone();
    a.add_top(w);
    let mut nom_var: BTreeMap<Sym, Var> = BTreeMap::new();
    let mut nominal = |a: &mut ABox, n: &Sym| -> Var {
        *nom_var.entry(n.clone()).or_insert_with(|| {
            let z = a.fresh();
            a.add_top(z);
            a.add_nominal(n, z);
            z
        })
    };
    let put = |a: &mut ABox, x: Var, f: &Fact| match f {
        Fact::Atom(Atom::Top) => a.add_top(x),
        Fact::Atom(Atom::Name(n)) => a.add_concept(n, x),
        Fact::Atom(Atom::Nom(n)) => a.add_nominal(n, x),
        Fact::SomeU(_) => {}
    };
    for s in seed {
        match s {
            Transfer::Here(f) => put(&mut a, w, f),
            Transfer::At(x, f) => put(&mut a, *x, f),
            Transfer::Nominal(n, f) => {
                let z = nominal(&mut a, n);
                put(&mut a, z, f);
            }
            Transfer::Link(r, n) => {
                let z = nominal(&mut a, n);
                match r {
                    RoleExpr::Name(s) => a.add_role(s, w, z),
                    RoleExpr::Inv(s) => a.add_role(s, z, w),
                    RoleExpr::Universal => {}
                }
            }
            Transfer::Some(n) => {
                let z = a.fresh();
                a.add_top(z);
                a.add_concept(n, z);
            }
        }
    }
    let c = Completion::run(tb, &a, &[], &EliConfig::default())?;
    let mut out = BTreeSet::new();
    if c.inconsistent() {
        out.insert(Transfer::Here(Fact::Atom(Atom::Name(sym(BOT_MARK)))));
        return Ok(out);
    }
    let keep = |at: &Atom| !matches!(at, Atom::Top) && !matches!(at, Atom::Name(n) if crate::normalize::is_fresh_name(n));
    let n = c.var_node(w).unwrap();
    for at in c.atoms_of(n) {
        if keep(&at) {
            out.insert(Transfer::Here(Fact::Atom(at)));
        }
    }
    for x in fixed {
        if let Some(m) = c.var_node(*x) {
            for at in c.atoms_of(m) {
                if keep(&at) {
                    out.insert(Transfer::At(*x, Fact::Atom(at)));
                }
            }
        }
    }
    let sig = signature_of(&tb.ontology);
    for nname in &sig.individuals {
        if let Some(m) = c.nominal_node(nname) {
            for at in c.atoms_of(m) {
                if keep(&at) {
                    out.insert(Transfer::Nominal(nname.clone(), Fact::Atom(at)));
                }
            }
            for r in &sig.roles {
                for role in [RoleExpr::Name(r.clone()), RoleExpr::Inv(r.clone())] {
                    if c.holds_exists(n, &role, &Atom::Nom(nname.clone())) {
                        out.insert(Transfer::Link(role, nname.clone()));
                    }
                }
            }
        }
    }
    for p in c.present_names() {
        if !crate::normalize::is_fresh_name(&p) {
            out.insert(Transfer::Some(p));
        }
    }
    Ok(out)
}

/// Exhaustive subtree replacement, shallowest pair first; every replacement is checked to keep
/// `B` at the root. Returns the number of replacements made and rejected.
pub fn prune_by_transfer(o: &Ontology, t: &mut PruneTree, b: &Sym) -> Result<(usize, usize)> {
    let goal = Concept::name_sym(b.clone());
    let mut done = 0;
    let mut rejected = 0;
    let mut refused: BTreeSet<(String, String)> = BTreeSet::new();
    'outer: loop {
        let order = bfs(t);
        let mut seqs: BTreeMap<Var, Vec<BTreeSet<Transfer>>> = BTreeMap::new();
        for &w in &order {
            if t.fixed.contains(&w) {
                continue;
            }
            let lw = t.local(w);
            let below: Vec<Var> = bfs_from(t, w).into_iter().filter(|v| *v != w).collect();
            for v in below {
                if t.ty.get(&v) != t.ty.get(&w) || t.local(v) != lw {
                    continue;
                }
                let key = (t.abox.abox.display(w), t.abox.abox.display(v));
                if refused.contains(&key) {
                    continue;
                }
                if !seqs.contains_key(&w) {
                    seqs.insert(w, transfer_sequence(o, t, w)?);
                }
                if !seqs.contains_key(&v) {
                    seqs.insert(v, transfer_sequence(o, t, v)?);
                }
                if seqs[&w] != seqs[&v] {
                    continue;
                }
                let before = t.clone();
                t.replace(w, v);
                if crate::eli_engine::entails_assertion_completion(o, &t.abox.abox, &goal, t.abox.root)? {
                    done += 1;
                } else {
                    *t = before;
                    rejected += 1;
                    refused.insert(key);
                }
                continue 'outer;
            }
        }
        return Ok((done, rejected));
    }
}

fn bfs(t: &PruneTree) -> Vec<Var> {
    let mut out = vec![];
    for r in &t.fixed {
        for v in bfs_from(t, *r) {
            if !out.contains(&v) {
                out.push(v);
            }
        }
    }
    out
}

fn bfs_from(t: &PruneTree, w: Var) -> Vec<Var> {
    let mut out = vec![w];
    let mut i = 0;
    while i < out.len() {
        let v = out[i];
        out.extend(t.children(v));
        i += 1;
    }
    out
}
