//! Interpolants and explicit definitions for ELRO_u and its fragments.

use std::collections::BTreeSet;
use std::time::Instant;

use serde::Serialize;
use serde_json::{json, Value};

use crate::derivation::{lift_tree_el, support_abox, DElem, DerivationConfig, ElDerivations};
use crate::el_engine::{canonical_model, rooted_part, saturate, sigma_reduct_abox, Atom, DirectedUnfolding};
use crate::normalize::{eliminate_bot, prepare_interpolation_input, rename_outside_sigma, restore_bot, BotElimination};
use crate::types::*;
use crate::{Error, Result};

/// `O1 ∪ O2 ⊨ C1 ⊑ C2` together with the target language.
#[derive(Clone, Debug)]
pub struct InterpolationProblem {
    pub o1: Ontology,
    pub o2: Ontology,
    pub c1: Concept,
    pub c2: Concept,
    /// Whether the interpolant may use the universal role.
    pub universal: bool,
}

impl InterpolationProblem {
    pub fn new(o1: Ontology, o2: Ontology, c1: Concept, c2: Concept, universal: bool) -> Self {
        InterpolationProblem { o1, o2, c1, c2, universal }
    }

    /// `sig(O1, C1) ∩ sig(O2, C2)`.
    pub fn sigma(&self) -> Signature {
        let s1 = signature_of(&self.o1).union(&signature_of(&self.c1));
        let s2 = signature_of(&self.o2).union(&signature_of(&self.c2));
        s1.intersect(&s2)
    }

    pub fn union(&self) -> Ontology {
        self.o1.union(&self.o2)
    }

    /// Interpolant language: nominals when Σ has individuals, ⊥ when the inputs use it.
    pub fn target_dialect(&self) -> Dialect {
        let input = self.union().inferred_dialect().join(self.c1.dialect()).join(self.c2.dialect());
        Dialect { inverse_roles: input.inverse_roles, nominals: true, universal_role: self.universal, role_inclusions: false, bottom: input.bottom }
    }

    fn check_dialect(&self) -> Result<()> {
        let d = self.union().inferred_dialect().join(self.c1.dialect()).join(self.c2.dialect());
        if d.inverse_roles {
            return Err(Error::Dialect(format!("{d} exceeds ELRO_u; use the ELI pipeline")));
        }
        Ok(())
    }
}

/// Explicit definability of a concept name `A` under `O` using Σ.
#[derive(Clone, Debug)]
pub struct DefinabilityProblem {
    pub o: Ontology,
    pub a: Sym,
    pub sigma: Signature,
    pub universal: bool,
}

impl DefinabilityProblem {
    pub fn new(o: Ontology, a: &str, sigma: Signature, universal: bool) -> Self {
        DefinabilityProblem { o, a: sym(a), sigma, universal }
    }

    /// The interpolation problem `A ⊑ A'` under `O ∪ O_Σ`.
    pub fn to_interpolation(&self) -> InterpolationProblem {
        let sigma = self.sigma.intersect(&signature_of(&self.o));
        let (renamed, ren) = rename_outside_sigma(&self.o, &sigma);
        InterpolationProblem {
            o1: self.o.clone(),
            o2: renamed,
            c1: Concept::name_sym(self.a.clone()),
            c2: Concept::name_sym(ren.concept(&self.a)),
            universal: self.universal,
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct InterpOptions {
    /// Drop conjuncts while the result stays an interpolant.
    pub prune: bool,
    /// Also decide existence with the diagram criterion and fail on disagreement.
    pub cross_check: bool,
    pub derivation: DerivationConfig,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct Stats {
    pub sigma: Vec<String>,
    pub abox_size: usize,
    pub tree_depth: usize,
    pub tree_size: usize,
    pub support_size: usize,
    pub ms: u128,
}

#[derive(Clone, Debug)]
pub struct InterpolationResult {
    pub exists: bool,
    pub interpolant: Option<Concept>,
    pub verified: bool,
    pub stats: Stats,
}

impl InterpolationResult {
    pub fn to_json(&self) -> Value {
        json!({
            "exists": self.exists,
            "interpolant": self.interpolant.as_ref().map(|c| c.to_string()),
            "verified": self.verified,
            "stats": self.stats,
        })
    }
}

/// Which interpolant condition a candidate violates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Violation {
    Signature,
    Dialect,
    Lower,
    Upper,
}

pub fn verify_interpolant(p: &InterpolationProblem, d: &Concept) -> Result<Option<Violation>> {
    if !signature_of(d).is_subset(&p.sigma()) {
        return Ok(Some(Violation::Signature));
    }
    if !p.target_dialect().includes(d.dialect().with_bottom(false)) {
        return Ok(Some(Violation::Dialect));
    }
    let o = p.union();
    if !crate::reason::entails_ci(&o, &p.c1, d)? {
        return Ok(Some(Violation::Lower));
    }
    if !crate::reason::entails_ci(&o, d, &p.c2)? {
        return Ok(Some(Violation::Upper));
    }
    Ok(None)
}

/// Role inclusions are safe for Σ when each one lies entirely inside or entirely outside Σ.
pub fn ri_safe(o1: &Ontology, o2: &Ontology, sigma: &Signature) -> bool {
    o1.ris.iter().chain(&o2.ris).all(|ri| {
        let names: Vec<&Sym> = ri.chain.iter().chain(std::iter::once(&ri.head)).collect();
        let inside = names.iter().filter(|r| sigma.roles.contains(**r)).count();
        inside == 0 || inside == names.len()
    })
}

/// The canonical Σ-ABox instance after ⊥ elimination and normalization.
struct Reduced {
    o: Ontology,
    b: Sym,
    sigma: Signature,
    abox: PointedABox,
    marker: Option<Sym>,
}

enum Stage {
    Trivial(Concept),
    Reduced(Reduced),
}

fn reduce(p: &InterpolationProblem) -> Result<Stage> {
    p.check_dialect()?;
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
    let o = prep.o1.union(&prep.o2);
    let cm = canonical_model(&o, &prep.a)?;
    let mut abox = sigma_reduct_abox(&cm.interp, cm.root, &sigma);
    if !p.universal {
        abox = rooted_part(&abox);
    }
    Ok(Stage::Reduced(Reduced { o, b: prep.b, sigma, abox, marker }))
}

pub fn interpolant_exists(p: &InterpolationProblem) -> Result<bool> {
    match reduce(p)? {
        Stage::Trivial(_) => Ok(true),
        Stage::Reduced(r) => Ok(saturate(&r.o, &r.abox.abox)?.holds_atom(r.abox.root, &Atom::Name(r.b.clone()))),
    }
}

/// Existence via the diagram of the canonical model (independent of the ABox route).
pub fn interpolant_exists_diagram(p: &InterpolationProblem) -> Result<bool> {
    p.check_dialect()?;
    let (o1, o2, c1, c2) = match eliminate_bot(&p.o1, &p.o2, &p.c1, &p.c2)? {
        BotElimination::Trivial { .. } => return Ok(true),
        BotElimination::Rewritten { o1, o2, c1, c2, .. } => (o1, o2, c1, c2),
    };
    let prep = prepare_interpolation_input(&o1, &c1, &o2, &c2);
    crate::semantics::interpolant_exists_via_diagram(&prep.o1, &prep.o2, &prep.a, &prep.b, p.universal)
}

pub fn solve(p: &InterpolationProblem, opts: &InterpOptions) -> Result<InterpolationResult> {
    let start = Instant::now();
    let mut stats = Stats { sigma: sigma_names(&p.sigma()), ..Stats::default() };
    let r = match reduce(p)? {
        Stage::Trivial(c) => {
            let verified = verify_interpolant(p, &c)?.is_none();
            stats.ms = start.elapsed().as_millis();
            return Ok(InterpolationResult { exists: true, interpolant: Some(c), verified, stats });
        }
        Stage::Reduced(r) => r,
    };
    stats.abox_size = r.abox.abox.len();
    let goal = Atom::Name(r.b.clone());
    let exists = saturate(&r.o, &r.abox.abox)?.holds_atom(r.abox.root, &goal);
    if opts.cross_check {
        let other = interpolant_exists_diagram(p)?;
        if other != exists {
            return Err(Error::Invalid(format!("existence checks disagree (canonical ABox: {exists}, diagram: {other})")));
        }
    }
    if !exists {
        stats.ms = start.elapsed().as_millis();
        return Ok(InterpolationResult { exists, interpolant: None, verified: false, stats });
    }
    let d = ElDerivations::new(&r.o, &r.abox.abox, opts.derivation.clone())?;
    let tree = d
        .tree(&DElem::Ind(r.abox.root), &goal)
        .ok_or_else(|| Error::Invalid("goal entailed but no derivation tree was built".into()))?;
    let gamma: BTreeSet<Sym> = r.sigma.individuals.clone();
    let u = DirectedUnfolding::new(&r.abox, &gamma);
    let lifted = lift_tree_el(&tree, &u, &opts.derivation)?;
    stats.tree_depth = lifted.depth();
    stats.tree_size = lifted.size();
    let (support, _) = support_abox(&lifted, &u, !p.universal);
    stats.support_size = support.abox.len();
    let witness = ShapeWitness::infer(&support, &gamma);
    let dialect = Dialect::ELO_U.with_universal(p.universal);
    let raw = pointed_abox_to_concept(&support, &witness, dialect)?;
    let mut c = restore_bot(&raw, &r.marker);
    if opts.prune {
        c = prune(p, c)?;
    }
    let verified = verify_interpolant(p, &c)?.is_none();
    stats.ms = start.elapsed().as_millis();
    Ok(InterpolationResult { exists, interpolant: Some(c), verified, stats })
}

fn sigma_names(s: &Signature) -> Vec<String> {
    let mut v: Vec<String> = s.concepts.iter().map(|c| c.to_string()).collect();
    v.extend(s.roles.iter().map(|r| r.to_string()));
    v.extend(s.individuals.iter().map(|a| format!("{{{a}}}")));
    v
}

/// Greedy conjunct removal, outermost first; keeps every removal that preserves `D ⊑ C2`.
fn prune(p: &InterpolationProblem, c: Concept) -> Result<Concept> {
    let o = p.union();
    let mut cur = c;
    let mut pos = 0usize;
    loop {
        let cands = conjunct_positions(&cur);
        if pos >= cands.len() {
            return Ok(cur);
        }
        let smaller = drop_at(&cur, &cands[pos], 0);
        if crate::reason::entails_ci(&o, &smaller, &p.c2)? {
            cur = smaller;
        } else {
            pos += 1;
        }
    }
}

/// Paths (child indexes) to every conjunct of every conjunction, in preorder.
fn conjunct_positions(c: &Concept) -> Vec<Vec<usize>> {
    fn go(c: &Concept, path: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        match c.node() {
            Node::And(cs) => {
                for (i, d) in cs.iter().enumerate() {
                    path.push(i);
                    out.push(path.clone());
                    go(d, path, out);
                    path.pop();
                }
            }
            Node::Exists(_, d) => {
                path.push(0);
                go(d, path, out);
                path.pop();
            }
            _ => {}
        }
    }
    let mut out = vec![];
    go(c, &mut vec![], &mut out);
    out
}

fn drop_at(c: &Concept, path: &[usize], depth: usize) -> Concept {
    match c.node() {
        Node::And(cs) => {
            let i = path[depth];
            if depth + 1 == path.len() {
                Concept::conj(cs.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, d)| d.clone()))
            } else {
                let mut v = cs.clone();
                v[i] = drop_at(&cs[i], path, depth + 1);
                Concept::conj(v)
            }
        }
        Node::Exists(r, d) => Concept::exists(r.clone(), drop_at(d, path, depth + 1)),
        _ => c.clone(),
    }
}

pub fn compute_interpolant(p: &InterpolationProblem) -> Result<Option<Concept>> {
    let r = solve(p, &InterpOptions::default())?;
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

/// An explicit definition, checked to satisfy `O ⊨ A ≡ C`.
pub fn compute_explicit_def(p: &DefinabilityProblem) -> Result<Option<Concept>> {
    let Some(c) = compute_interpolant(&p.to_interpolation())? else { return Ok(None) };
    let a = Concept::name_sym(p.a.clone());
    if !crate::reason::equivalent(&p.o, &a, &c)? {
        return Err(Error::Invalid(format!("{c} is not equivalent to {a}")));
    }
    Ok(Some(c))
}

/// The size bound asserted on emitted interpolants: `2^(p(‖O1 ∪ O2‖))` with `p(x) = x²`.
pub fn size_bound_log2(p: &InterpolationProblem) -> u64 {
    let n = (p.union().size() + p.c1.size() + p.c2.size()) as u64;
    n.saturating_mul(n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::textio::{o_b, o_p, parse_concept, parse_ontology, O_NOMINAL, O_R, O_RS, O_U};

    fn c(s: &str) -> Concept {
        parse_concept(s).unwrap()
    }

    fn def(o: Ontology, sigma: Signature, u: bool) -> DefinabilityProblem {
        DefinabilityProblem::new(o, "A", sigma, u)
    }

    #[test]
    fn shared_name_interpolant() {
        let p = InterpolationProblem::new(
            parse_ontology("A <= E").unwrap(),
            parse_ontology("E <= B").unwrap(),
            c("A"),
            c("B"),
            true,
        );
        assert!(interpolant_exists(&p).unwrap());
        let d = compute_interpolant(&p).unwrap().unwrap();
        assert!(crate::reason::equivalent(&p.union(), &d, &c("E")).unwrap());
        assert_eq!(verify_interpolant(&p, &c("E")).unwrap(), None);
        assert_eq!(verify_interpolant(&p, &c("A")).unwrap(), Some(Violation::Signature));
    }

    #[test]
    fn negative_witnesses() {
        let o = parse_ontology(O_U).unwrap();
        let p = def(o, Signature::from_names(&["B", "D", "E"], &["r"], &[]), true);
        assert!(!explicit_def_exists(&p).unwrap());
        assert!(compute_explicit_def(&p).unwrap().is_none());
        let o = parse_ontology(O_RS).unwrap();
        let p = def(o, Signature::from_names(&["E"], &["s1", "s2"], &[]), true);
        assert!(!explicit_def_exists(&p).unwrap());
        let o = parse_ontology(O_R).unwrap();
        let p = def(o.clone(), Signature::from_names(&["E"], &["s"], &[]), true);
        assert!(!explicit_def_exists(&p).unwrap());
        assert!(!ri_safe(&o, &Ontology::empty(), &Signature::from_names(&["E"], &["s"], &[])));
    }

    #[test]
    fn diagram_agrees() {
        let o = parse_ontology(O_U).unwrap();
        let p = def(o, Signature::from_names(&["B", "D", "E"], &["r"], &[]), true).to_interpolation();
        assert_eq!(interpolant_exists(&p).unwrap(), interpolant_exists_diagram(&p).unwrap());
    }

    #[test]
    fn nominal_needs_universal_role() {
        let o = parse_ontology(O_NOMINAL).unwrap();
        let sigma = Signature::from_names(&["B"], &[], &["b"]);
        let with_u = def(o.clone(), sigma.clone(), true);
        let d = compute_explicit_def(&with_u).unwrap().unwrap();
        assert!(d.dialect().universal_role);
        let without = def(o, sigma, false);
        assert!(!explicit_def_exists(&without).unwrap());
    }

    #[test]
    fn binary_tree_definition() {
        let o = o_b(2);
        let p = def(o.clone(), Signature::from_names(&["B2", "M"], &["r1", "r2"], &[]), false);
        let d = compute_explicit_def(&p).unwrap().unwrap();
        let expect = c("M & exists r1.(exists r1.B2 & exists r2.B2) & exists r2.(exists r1.B2 & exists r2.B2)");
        assert!(crate::reason::equivalent(&o, &d, &expect).unwrap());
    }

    #[test]
    fn path_definition() {
        let o = o_p(1);
        let p = def(o.clone(), Signature::from_names(&["B"], &["r0"], &[]), false);
        let d = compute_explicit_def(&p).unwrap().unwrap();
        assert!(crate::reason::equivalent(&o, &d, &c("exists r0.exists r0.B")).unwrap());
    }

    #[test]
    fn safety() {
        let t = parse_ontology("r o r <= r").unwrap();
        assert!(ri_safe(&t, &Ontology::empty(), &Signature::from_names(&[], &["r"], &[])));
        assert!(ri_safe(&t, &Ontology::empty(), &Signature::new()));
        let t = parse_ontology("r o s <= s").unwrap();
        assert!(!ri_safe(&t, &Ontology::empty(), &Signature::from_names(&[], &["s"], &[])));
    }

    #[test]
    fn pruning_keeps_verification() {
        let p = InterpolationProblem::new(
            parse_ontology("A <= E & F\nA <= exists r.G").unwrap(),
            parse_ontology("E <= B").unwrap(),
            c("A"),
            c("B"),
            true,
        );
        let r = solve(&p, &InterpOptions { prune: true, cross_check: true, ..Default::default() }).unwrap();
        assert!(r.verified);
        assert_eq!(r.interpolant.unwrap(), c("E"));
    }
}
