//! One seeded sample of each invariant; `Err` carries a counterexample.

use super::*;
use dlinterp::derivation::{build_tree_el, build_tree_eli, ElChecker, EliChecker};
use dlinterp::el_engine::{canonical_model_abox, entails_assertion, saturate, Atom};
use dlinterp::eli_engine::{self, EliElem, EliSaturation, Fact};
use dlinterp::interp_el::{self, InterpOptions};
use dlinterp::normalize::to_normal_form;
use dlinterp::semantics::{eval_concept, max_simulation};
use dlinterp::textio::{parse_concept, parse_ontology};

pub type Check = std::result::Result<(), String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn ok<T>(r: dlinterp::Result<T>) -> std::result::Result<T, String> {
    r.map_err(|e| e.to_string())
}

pub const DIALECTS: [Dialect; 6] = [Dialect::EL, Dialect::ELO, Dialect::EL_U, Dialect::ELO_U, Dialect::ELI, Dialect::ELIO_U];

pub fn small_pool() -> Pool {
    Pool::new(&["A", "B", "C"], &["r", "s"], &["a", "b"])
}

fn sub_pool(r: &mut R, p: &Pool) -> Pool {
    let keep = |r: &mut R, v: &[String]| v.iter().filter(|_| r.gen_bool(0.7)).cloned().collect();
    let mut q = Pool { concepts: keep(r, &p.concepts), roles: keep(r, &p.roles), individuals: keep(r, &p.individuals) };
    if q.concepts.is_empty() {
        q.concepts.push(p.concepts[0].clone());
    }
    q
}

fn goal_atoms(o: &Ontology, a: &ABox) -> Vec<Atom> {
    let s = signature_of(o).union(&signature_of(a));
    let mut v: Vec<Atom> = s.concepts.iter().map(|c| Atom::Name(c.clone())).collect();
    v.extend(s.individuals.iter().map(|c| Atom::Nom(c.clone())));
    v.push(Atom::Top);
    v
}

/// Concepts of size ≤ 10 true at `d` stay true at every `e` simulating it, and pairs
/// outside the greatest simulation come with a distinguishing concept.
pub fn simulation_preservation(seed: u64) -> Check {
    let mut r = rng(seed);
    let d = *DIALECTS.choose(&mut r).unwrap();
    let pool = small_pool();
    let ni = r.gen_range(1..=4);
    let nj = r.gen_range(1..=4);
    let i = interpretation(&mut r, &pool, ni, 0.4);
    let j = interpretation(&mut r, &pool, nj, 0.4);
    let sp = sub_pool(&mut r, &pool);
    let sim = max_simulation(&i, &j, &sp.signature(), d);
    for _ in 0..8 {
        let n = r.gen_range(1..=10);
        let c = concept(&mut r, &sp, d, n);
        let ci = ok(eval_concept(&i, &c))?;
        let cj = ok(eval_concept(&j, &c))?;
        for x in 0..i.size() {
            for y in 0..j.size() {
                ensure!(!sim.simulates(x, y) || !ci.contains(&x) || cj.contains(&y), "{c} at {x} but not at {y} under {d}");
            }
        }
    }
    for x in 0..i.size() {
        for y in 0..j.size() {
            if !sim.contains(x, y) {
                let Some(c) = sim.distinguishing_concept(&i, &j, x, y) else { return Err(format!("no witness for ({x},{y})")) };
                ensure!(ok(eval_concept(&i, &c))?.contains(&x) && !ok(eval_concept(&j, &c))?.contains(&y), "{c} does not separate ({x},{y})");
            }
        }
    }
    Ok(())
}

/// `O, A ⊨ C(x)` iff `x` lands in `C` over the canonical model of `O` and `A`.
pub fn canonical_abox_model(seed: u64) -> Check {
    let mut r = rng(seed);
    let d = *[Dialect::EL, Dialect::ELO_U, Dialect::ELR, Dialect::ELRO_U].choose(&mut r).unwrap();
    let pool = small_pool();
    let n = r.gen_range(2..=7);
    let o = normal_ontology(&mut r, &pool, d, n, 2);
    let nv = r.gen_range(1..=3);
    let (a, vars) = abox(&mut r, &pool, d, nv);
    let (mut i, map) = ok(canonical_model_abox(&o, &a))?;
    i.declare(&pool.signature());
    let names = Pool::of(&signature_of(&o).union(&signature_of(&a)));
    for _ in 0..4 {
        let size = r.gen_range(1..=6);
        let c = concept(&mut r, &names, d, size);
        let x = *vars.choose(&mut r).unwrap();
        let want = ok(entails_assertion(&o, &a, &c, x))?;
        let got = ok(eval_concept(&i, &c))?.contains(&map[&x]);
        ensure!(want == got, "{c} at {x}: entailed {want}, canonical model {got}, under\n{o}");
    }
    Ok(())
}

/// EL derivation trees exist exactly for the saturated facts, and every tree checks.
pub fn el_derivations(seed: u64) -> Check {
    let mut r = rng(seed);
    let d = *[Dialect::EL, Dialect::ELR, Dialect::ELO_U, Dialect::ELRO_U].choose(&mut r).unwrap();
    let pool = small_pool();
    let n = r.gen_range(2..=7);
    let o = normal_ontology(&mut r, &pool, d, n, 2);
    let nv = r.gen_range(1..=3);
    let (a, vars) = abox(&mut r, &pool, d, nv);
    let sat = ok(saturate(&o, &a))?;
    let mut checker = ElChecker::new(&o);
    for goal in goal_atoms(&o, &a) {
        for &x in &vars {
            let t = ok(build_tree_el(&o, &a, x, &goal))?;
            ensure!(t.is_some() == sat.holds_atom(x, &goal), "{goal:?} at {x} under\n{o}");
            if let Some(t) = t {
                let verdict = ok(checker.check(&t, &a))?;
                ensure!(verdict.is_ok() && t.concept == goal, "{verdict:?}");
            }
        }
    }
    Ok(())
}

/// The same for ELIO_u trees over the rule fixpoint.
pub fn eli_derivations(seed: u64) -> Check {
    let mut r = rng(seed);
    let d = *[Dialect::ELI, Dialect::ELI_U, Dialect::ELIO_U].choose(&mut r).unwrap();
    let pool = small_pool();
    let n = r.gen_range(2..=6);
    let o = normal_ontology(&mut r, &pool, d, n, 0);
    let nv = r.gen_range(1..=3);
    let (a, vars) = abox(&mut r, &pool, d, nv);
    let sat = ok(EliSaturation::new(&o, &a))?;
    let mut checker = EliChecker::new(&o);
    for goal in goal_atoms(&o, &a) {
        let f = Fact::Atom(goal);
        for &x in &vars {
            let t = ok(build_tree_eli(&o, &a, x, &f))?;
            ensure!(t.is_some() == sat.holds(&EliElem::Ind(x), &f), "{f} at {x} under\n{o}");
            if let Some(t) = t {
                let verdict = ok(checker.check(&t, &a))?;
                ensure!(verdict.is_ok(), "{verdict:?}");
            }
        }
    }
    Ok(())
}

/// The ELIO_u rule fixpoint and the completion reasoner entail the same assertions.
pub fn eli_fixpoint_vs_completion(seed: u64) -> Check {
    let mut r = rng(seed);
    let pool = small_pool();
    let n = r.gen_range(2..=6);
    let o = normal_ontology(&mut r, &pool, Dialect::ELIO_U, n, 0);
    let nv = r.gen_range(1..=3);
    let (a, vars) = abox(&mut r, &pool, Dialect::ELIO_U, nv);
    for _ in 0..4 {
        let size = r.gen_range(1..=6);
        let c = concept(&mut r, &pool, Dialect::ELIO_U, size);
        let x = *vars.choose(&mut r).unwrap();
        let sat = ok(eli_engine::entails_assertion_saturation(&o, &a, &c, x))?;
        let comp = ok(eli_engine::entails_assertion_completion(&o, &a, &c, x))?;
        ensure!(sat == comp, "{c} at {x}: fixpoint {sat}, completion {comp}, under\n{o}");
    }
    Ok(())
}

/// Existence via the canonical Σ-ABox and via the diagram agree on ELRO_u input, and
/// a positive answer yields a verified interpolant.
pub fn diagram_agreement(seed: u64) -> Check {
    let mut r = rng(seed);
    let n = r.gen_range(2..=6);
    let p = interpolation_problem(&mut r, Dialect::ELRO_U, n, 1);
    let fast = ok(interp_el::interpolant_exists(&p))?;
    let slow = ok(interp_el::interpolant_exists_diagram(&p))?;
    ensure!(fast == slow, "canonical ABox {fast}, diagram {slow} on\n{}\n--\n{}", p.o1, p.o2);
    let res = ok(interp_el::solve(&p, &InterpOptions::default()))?;
    ensure!(res.exists == fast && (!fast || res.verified), "solve disagrees: {:?}", res.interpolant);
    Ok(())
}

/// Inverse-free instances get the same existence answer from the automata.
pub fn eli_vs_el(seed: u64) -> Check {
    let mut r = rng(seed);
    let d = *[Dialect::EL, Dialect::EL_U, Dialect::ELO_U].choose(&mut r).unwrap();
    let n = r.gen_range(2..=5);
    let p = interpolation_problem(&mut r, d, n, 0);
    let eli = ok(dlinterp::interp_eli::interpolant_exists(&p))?;
    let el = ok(interp_el::interpolant_exists(&p))?;
    ensure!(eli == el, "automata {eli}, EL {el} on\n{}\n--\n{}", p.o1, p.o2);
    Ok(())
}

/// Safe role inclusions: an entailed `A ⊑ B` always has a verified interpolant.
pub fn safe_ri_interpolant(seed: u64) -> Check {
    let mut r = rng(seed);
    let p = safe_ri_instance(&mut r);
    ensure!(ok(interp_el::interpolant_exists(&p))?, "no interpolant for\n{}\n--\n{}", p.o1, p.o2);
    let Some(c) = ok(interp_el::compute_interpolant(&p))? else { return Err("nothing computed".into()) };
    let v = ok(interp_el::verify_interpolant(&p, &c))?;
    ensure!(v.is_none(), "{c} rejected: {v:?}");
    Ok(())
}

/// Normal form is a conservative extension on small CIs over the original names.
pub fn normal_form_conservative(seed: u64) -> Check {
    let mut r = rng(seed);
    let d = *[Dialect::EL, Dialect::ELO_U, Dialect::ELRO_U, Dialect::ELIO_U].choose(&mut r).unwrap();
    let o = nested_ontology(&mut r, &small_pool(), d);
    let nf = to_normal_form(&o).ontology;
    let sp = Pool::of(&signature_of(&o));
    for _ in 0..10 {
        let (ls, rs) = (r.gen_range(1..=4), r.gen_range(1..=4));
        let c = concept(&mut r, &sp, d, ls);
        let e = concept(&mut r, &sp, d, rs);
        let before = ok(reason::entails_ci(&o, &c, &e))?;
        let after = ok(reason::entails_ci(&nf, &c, &e))?;
        ensure!(before == after, "{c} <= {e}: {before} vs {after} under\n{o}");
    }
    Ok(())
}

/// Concept to pointed ABox and back gives an equivalent concept over the same names.
pub fn abox_round_trip(seed: u64) -> Check {
    let mut r = rng(seed);
    let size = r.gen_range(1..=40);
    let c = concept(&mut r, &small_pool(), Dialect::ELIO_U, size);
    let sig = signature_of(&c);
    let (p, w) = concept_to_pointed_abox(&c, &sig);
    ensure!(signature_of(&p.abox).is_subset(&sig), "{c}: ABox leaves the signature");
    let back = ok(pointed_abox_to_concept(&p, &w, Dialect::ELIO_U))?;
    ensure!(ok(reason::equivalent(&Ontology::empty(), &c, &back))?, "{c} came back as {back}");
    Ok(())
}

pub fn print_parse(seed: u64) -> Check {
    let mut r = rng(seed);
    let size = r.gen_range(1..=25);
    let c = concept(&mut r, &small_pool(), Dialect::ELIO_U, size);
    let back = ok(parse_concept(&c.to_string()))?;
    ensure!(back == c, "{c} parsed as {back}");
    let d = *[Dialect::ELRO_U, Dialect::ELIO_U].choose(&mut r).unwrap();
    let o = nested_ontology(&mut r, &small_pool(), d);
    let ob = ok(parse_ontology(&o.to_string()))?;
    ensure!(ob.cis == o.cis && ob.ris == o.ris, "ontology changed:\n{o}\n--\n{ob}");
    Ok(())
}

/// Runs `check` on seeds `0..n`, returning the number of failures and the first message.
pub fn run_many(n: u64, check: fn(u64) -> Check) -> (u64, Option<String>) {
    let mut bad = 0;
    let mut first = None;
    for seed in 0..n {
        if let Err(e) = check(seed) {
            bad += 1;
            first.get_or_insert(format!("seed {seed}: {e}"));
        }
    }
    (bad, first)
}
