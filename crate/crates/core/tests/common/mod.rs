//! Seeded random generators shared by the property and acceptance suites.
#![allow(dead_code)]

pub mod checks;

use dlinterp::interp_el::InterpolationProblem;
use dlinterp::semantics::Interpretation;
use dlinterp::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type R = ChaCha8Rng;

pub fn rng(seed: u64) -> R {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Names a generator may draw from.
#[derive(Clone, Debug)]
pub struct Pool {
    pub concepts: Vec<String>,
    pub roles: Vec<String>,
    pub individuals: Vec<String>,
}

impl Pool {
    pub fn new(concepts: &[&str], roles: &[&str], individuals: &[&str]) -> Pool {
        let own = |v: &[&str]| v.iter().map(|s| s.to_string()).collect();
        Pool { concepts: own(concepts), roles: own(roles), individuals: own(individuals) }
    }

    pub fn of(sig: &Signature) -> Pool {
        let own = |v: &std::collections::BTreeSet<Sym>| v.iter().map(|s| s.to_string()).collect();
        Pool { concepts: own(&sig.concepts), roles: own(&sig.roles), individuals: own(&sig.individuals) }
    }

    pub fn join(&self, o: &Pool) -> Pool {
        let cat = |a: &[String], b: &[String]| {
            let mut v: Vec<String> = a.iter().chain(b).cloned().collect();
            v.sort();
            v.dedup();
            v
        };
        Pool {
            concepts: cat(&self.concepts, &o.concepts),
            roles: cat(&self.roles, &o.roles),
            individuals: cat(&self.individuals, &o.individuals),
        }
    }

    pub fn signature(&self) -> Signature {
        let c: Vec<&str> = self.concepts.iter().map(|s| s.as_str()).collect();
        let r: Vec<&str> = self.roles.iter().map(|s| s.as_str()).collect();
        let i: Vec<&str> = self.individuals.iter().map(|s| s.as_str()).collect();
        Signature::from_names(&c, &r, &i)
    }
}

fn pick<'a>(r: &mut R, v: &'a [String]) -> &'a str {
    v.choose(r).expect("non-empty pool")
}

pub fn role_expr(r: &mut R, pool: &Pool, d: Dialect) -> RoleExpr {
    if d.universal_role && (pool.roles.is_empty() || r.gen_ratio(1, 5)) {
        return RoleExpr::Universal;
    }
    let n = RoleExpr::name(pick(r, &pool.roles));
    if d.inverse_roles && r.gen_bool(0.4) {
        n.inverse()
    } else {
        n
    }
}

/// A random concept of exactly `size` symbols (or fewer when the pool runs dry).
pub fn concept(r: &mut R, pool: &Pool, d: Dialect, size: usize) -> Concept {
    let can_exist = !pool.roles.is_empty() || d.universal_role;
    if size <= 1 || (!can_exist && size == 2) {
        let roll = r.gen_range(0..10);
        return if roll == 0 || pool.concepts.is_empty() && (pool.individuals.is_empty() || !d.nominals) {
            Concept::top()
        } else if d.nominals && !pool.individuals.is_empty() && (roll <= 2 || pool.concepts.is_empty()) {
            Concept::nominal(pick(r, &pool.individuals))
        } else {
            Concept::name(pick(r, &pool.concepts))
        };
    }
    if can_exist && r.gen_bool(0.5) {
        Concept::exists(role_expr(r, pool, d), concept(r, pool, d, size - 1))
    } else {
        let left = r.gen_range(1..size);
        Concept::and(concept(r, pool, d, left), concept(r, pool, d, size - left))
    }
}

fn atom_lhs(r: &mut R, pool: &Pool, d: Dialect) -> Concept {
    if d.nominals && !pool.individuals.is_empty() && r.gen_ratio(1, 6) {
        Concept::nominal(pick(r, &pool.individuals))
    } else {
        Concept::name(pick(r, &pool.concepts))
    }
}

/// A random normal-form CI over the pool.
pub fn normal_ci(r: &mut R, pool: &Pool, d: Dialect) -> CI {
    let name = |r: &mut R| Concept::name(pick(r, &pool.concepts));
    loop {
        let ci = match r.gen_range(0..12) {
            0 => CI::new(Concept::top(), name(r)),
            1..=2 => CI::new(atom_lhs(r, pool, d), name(r)),
            3..=4 => CI::new(Concept::and(name(r), name(r)), name(r)),
            5..=7 if !pool.roles.is_empty() => {
                let lhs = name(r);
                CI::new(lhs, Concept::exists(role_expr(r, pool, d.with_universal(false)), name(r)))
            }
            8..=10 if !pool.roles.is_empty() || d.universal_role => {
                let role = role_expr(r, pool, d);
                let f = name(r);
                CI::new(Concept::exists(role, f), name(r))
            }
            11 if d.nominals && !pool.individuals.is_empty() => CI::new(name(r), Concept::nominal(pick(r, &pool.individuals))),
            _ => continue,
        };
        return ci;
    }
}

pub fn normal_ontology(r: &mut R, pool: &Pool, d: Dialect, cis: usize, ris: usize) -> Ontology {
    let mut o = Ontology::empty();
    for _ in 0..cis {
        o.add_ci(normal_ci(r, pool, d));
    }
    if d.role_inclusions && !pool.roles.is_empty() {
        for _ in 0..ris {
            let a = pick(r, &pool.roles);
            let h = pick(r, &pool.roles);
            if r.gen_bool(0.5) {
                let b = pick(r, &pool.roles);
                o.add_ri(RI::new(&[a, b], h));
            } else if a != h {
                o.add_ri(RI::new(&[a], h));
            }
        }
    }
    o
}

/// A random interpretation over the pool with `n` elements; every individual is interpreted.
pub fn interpretation(r: &mut R, pool: &Pool, n: usize, density: f64) -> Interpretation {
    let mut i = Interpretation::new();
    let elems: Vec<_> = (0..n).map(|k| i.add_elem(format!("d{k}"))).collect();
    i.declare(&pool.signature());
    for a in &pool.concepts {
        for &d in &elems {
            if r.gen_bool(density) {
                i.add_concept(a, d);
            }
        }
    }
    for p in &pool.roles {
        for &d in &elems {
            for &e in &elems {
                if r.gen_bool(density / 2.0) {
                    i.add_role(p, d, e);
                }
            }
        }
    }
    for a in &pool.individuals {
        let d = *elems.choose(r).unwrap();
        i.set_individual(a, d);
    }
    i
}

/// A random ABox over the pool with `n` variables, each asserted to exist.
pub fn abox(r: &mut R, pool: &Pool, d: Dialect, n: usize) -> (ABox, Vec<Var>) {
    let mut a = ABox::new();
    let vars: Vec<Var> = (0..n).map(|_| a.fresh()).collect();
    for &x in &vars {
        a.add_top(x);
        for c in &pool.concepts {
            if r.gen_ratio(1, 4) {
                a.add_concept(c, x);
            }
        }
    }
    if d.nominals {
        for b in &pool.individuals {
            if r.gen_ratio(1, 3) {
                a.add_nominal(b, *vars.choose(r).unwrap());
            }
        }
    }
    if !pool.roles.is_empty() {
        for _ in 0..r.gen_range(0..=n + 1) {
            let (x, y) = (*vars.choose(r).unwrap(), *vars.choose(r).unwrap());
            a.add_role(pick(r, &pool.roles), x, y);
        }
    }
    (a, vars)
}

/// Shared and private name pools for interpolation instances; `A` and `B` are private.
pub fn interpolation_pools(d: Dialect) -> (Pool, Pool) {
    let ind: &[&str] = if d.nominals { &["a"] } else { &[] };
    let shared = Pool::new(&["S0", "S1", "S2"], &["r", "s"], ind);
    let left = Pool::new(&["A", "P0", "P1"], &["p"], if d.nominals { &["c"] } else { &[] });
    let right = Pool::new(&["B", "Q0", "Q1"], &["q"], &[]);
    (shared.join(&left), shared.join(&right))
}

/// A random instance `O1, O2, A ⊑ B` with the names split as in `interpolation_pools`.
pub fn interpolation_problem(r: &mut R, d: Dialect, cis: usize, ris: usize) -> InterpolationProblem {
    let (p1, p2) = interpolation_pools(d);
    let o1 = normal_ontology(r, &p1, d, cis, ris);
    let mut o2 = normal_ontology(r, &p2, d, cis, ris);
    // Give the right ontology a route into B from shared vocabulary.
    let lhs = Concept::name(pick(r, &p2.concepts));
    o2.add_ci(CI::new(lhs, Concept::name("B")));
    let universal = d.universal_role && r.gen_bool(0.5);
    InterpolationProblem::new(o1, o2, Concept::name("A"), Concept::name("B"), universal)
}

/// An ontology whose CIs have arbitrary (not normalized) sides.
pub fn nested_ontology(r: &mut R, pool: &Pool, d: Dialect) -> Ontology {
    let mut o = Ontology::empty();
    for _ in 0..r.gen_range(1..=5) {
        let (ls, rs) = (r.gen_range(1..=4), r.gen_range(1..=4));
        let lhs = concept(r, pool, d, ls);
        let rhs = concept(r, pool, d, rs);
        o.add_ci(CI::new(lhs, rhs));
    }
    if d.role_inclusions {
        let h = pick(r, &pool.roles).to_string();
        let a = pick(r, &pool.roles).to_string();
        o.add_ri(RI::new(&[a.as_str(), a.as_str()], &h));
    }
    o
}

/// A random EL instance with safe role inclusions where `O1 ∪ O2 ⊨ A ⊑ B`.
pub fn safe_ri_instance(r: &mut R) -> InterpolationProblem {
    for _ in 0..100_000 {
        let n = r.gen_range(3..=7);
        let p = interpolation_problem(r, Dialect::ELR, n, 2);
        if p.o1.ris.is_empty() && p.o2.ris.is_empty() {
            continue;
        }
        if !dlinterp::interp_el::ri_safe(&p.o1, &p.o2, &p.sigma()) {
            continue;
        }
        if dlinterp::reason::entails_ci(&p.union(), &p.c1, &p.c2).unwrap() {
            return p;
        }
    }
    panic!("no entailed safe instance found");
}
