//! Batch front end: loading inputs, choosing the EL or ELI pipeline, and building reports.

use std::path::Path;
use std::time::{Duration, Instant};

use serde::Serialize;
use serde_json::{json, Value};

use dlinterp::interp_el::{self, DefinabilityProblem, InterpolationProblem};
use dlinterp::textio::{parse_concept, parse_horn_ontology, parse_ontology, parse_signature};
use dlinterp::{interp_eli, reason, Concept, Dialect, Error, Ontology, Result, Signature};

pub const EXIT_EXISTS: i32 = 0;
pub const EXIT_NONE: i32 = 1;
pub const EXIT_ERROR: i32 = 2;
pub const EXIT_RESOURCE: i32 = 3;

/// Reads an ontology; `.horn` files use the Horn syntax and are normalized first.
pub fn load_ontology(path: &Path) -> Result<Ontology> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Invalid(format!("{}: {e}", path.display())))?;
    if path.extension().is_some_and(|e| e == "horn") {
        let h = parse_horn_ontology(&text)?;
        dlinterp::normalize::horn_to_normal_form(&h)
    } else {
        parse_ontology(&text)
    }
}

pub fn load_all(paths: &[impl AsRef<Path>]) -> Result<Ontology> {
    let mut o = Ontology::empty();
    for p in paths {
        o = o.union(&load_ontology(p.as_ref())?);
    }
    Ok(o)
}

/// `auto` or a dialect name such as `elro_u`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DialectChoice {
    Auto,
    Fixed(Dialect),
}

impl DialectChoice {
    pub fn parse(s: &str) -> std::result::Result<Self, String> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(DialectChoice::Auto);
        }
        Dialect::parse(s).map(DialectChoice::Fixed).ok_or_else(|| format!("unknown dialect {s:?}"))
    }
}

/// A fully resolved task.
#[derive(Clone, Debug)]
pub struct Task {
    pub problem: InterpolationProblem,
    /// Present for definability tasks.
    pub definability: Option<DefinabilityProblem>,
    pub inverse: bool,
    pub dialect: Dialect,
    pub depth: Option<usize>,
}

impl Task {
    pub fn define(o: Ontology, a: &str, sigma_text: &str, choice: DialectChoice, universal: Option<bool>) -> Result<Task> {
        let roles = dlinterp::signature_of(&o).roles;
        let mut sigma = parse_signature(sigma_text, &roles);
        let (dialect, inverse) = resolve(&o, choice, universal, !sigma.individuals.is_empty())?;
        if !dialect.nominals {
            sigma.individuals.clear();
        }
        let p = DefinabilityProblem::new(o, a, sigma, dialect.universal_role);
        Ok(Task { problem: p.to_interpolation(), definability: Some(p), inverse, dialect, depth: None })
    }

    pub fn interpolate(o1: Ontology, o2: Ontology, c1: &str, c2: &str, choice: DialectChoice, universal: Option<bool>) -> Result<Task> {
        let c1 = parse_concept(c1)?;
        let c2 = parse_concept(c2)?;
        let both = o1.union(&o2);
        let mut problem = InterpolationProblem::new(o1, o2, c1, c2, true);
        let shared = !problem.sigma().individuals.is_empty();
        let (dialect, mut inverse) = resolve(&both, choice, universal, shared)?;
        inverse |= problem.c1.dialect().inverse_roles || problem.c2.dialect().inverse_roles;
        problem.universal = dialect.universal_role;
        if !dialect.nominals && !problem.sigma().individuals.is_empty() {
            return Err(Error::Dialect(format!("the shared signature has individuals but {dialect} has no nominals")));
        }
        Ok(Task { problem, definability: None, inverse, dialect, depth: None })
    }

    pub fn sigma(&self) -> Signature {
        match &self.definability {
            Some(d) => d.sigma.clone(),
            None => self.problem.sigma(),
        }
    }
}

fn resolve(o: &Ontology, choice: DialectChoice, universal: Option<bool>, individuals: bool) -> Result<(Dialect, bool)> {
    let input = o.inferred_dialect();
    let d = match choice {
        DialectChoice::Auto => Dialect {
            inverse_roles: input.inverse_roles,
            nominals: individuals,
            universal_role: true,
            role_inclusions: input.role_inclusions,
            bottom: input.bottom,
        },
        DialectChoice::Fixed(d) => {
            let shape = Dialect { universal_role: true, nominals: true, bottom: true, ..d };
            if !shape.includes(Dialect { universal_role: false, nominals: false, bottom: false, ..input }) {
                return Err(Error::Dialect(format!("the input uses {input}, which is outside {d}")));
            }
            d
        }
    };
    let d = match universal {
        Some(u) => d.with_universal(u),
        None => d,
    };
    if d.inverse_roles && input.role_inclusions {
        return Err(Error::Feature("role inclusions together with inverse roles".into()));
    }
    Ok((d, d.inverse_roles))
}

/// Outcome of deciding or synthesizing.
#[derive(Clone, Debug, Serialize)]
pub struct RunReport {
    pub command: String,
    pub inputs: Vec<String>,
    pub dialect: String,
    pub sigma: Vec<String>,
    pub decision: Option<bool>,
    pub concept: Option<String>,
    pub verified: bool,
    pub stats: Value,
    pub error: Option<String>,
    pub resource: Option<dlinterp::error::ResourceLimit>,
    pub expected: Option<Value>,
}

impl RunReport {
    pub fn new(command: &str, inputs: Vec<String>, task: Option<&Task>) -> Self {
        RunReport {
            command: command.into(),
            inputs,
            dialect: task.map(|t| t.dialect.to_string()).unwrap_or_default(),
            sigma: task.map(|t| sig_names(&t.sigma())).unwrap_or_default(),
            decision: None,
            concept: None,
            verified: false,
            stats: Value::Null,
            error: None,
            resource: None,
            expected: None,
        }
    }

    pub fn fail(mut self, e: &Error) -> Self {
        if let Error::ResourceLimit(l) = e {
            self.resource = Some(l.clone());
        }
        self.error = Some(e.to_string());
        self
    }

    pub fn exit_code(&self) -> i32 {
        if self.resource.is_some() {
            EXIT_RESOURCE
        } else if self.error.is_some() {
            EXIT_ERROR
        } else if self.decision == Some(false) {
            EXIT_NONE
        } else {
            EXIT_EXISTS
        }
    }

    pub fn text(&self) -> String {
        if let Some(e) = &self.error {
            return format!("error: {e}");
        }
        let mut s = String::new();
        match self.decision {
            Some(true) => s += "exists",
            Some(false) => s += "none",
            None => {}
        }
        if let Some(c) = &self.concept {
            s += &format!("\n{c}\nverified: {}", self.verified);
        }
        s.trim_start().to_string()
    }
}

pub fn sig_names(s: &Signature) -> Vec<String> {
    let mut v: Vec<String> = s.concepts.iter().chain(s.roles.iter()).map(|x| x.to_string()).collect();
    v.extend(s.individuals.iter().map(|x| format!("{{{x}}}")));
    v
}

pub fn decide(t: &Task) -> Result<bool> {
    if t.inverse {
        interp_eli::interpolant_exists(&t.problem)
    } else {
        interp_el::interpolant_exists(&t.problem)
    }
}

pub struct Synthesis {
    pub exists: bool,
    pub concept: Option<Concept>,
    pub verified: bool,
    pub stats: Value,
}

pub fn synthesize(t: &Task) -> Result<Synthesis> {
    let s = if t.inverse {
        let opts = interp_eli::EliInterpOptions { depth: t.depth, ..Default::default() };
        let r = interp_eli::solve(&t.problem, &opts)?;
        Synthesis { exists: r.exists, concept: r.interpolant, verified: r.verified, stats: json!(r.stats) }
    } else {
        let r = interp_el::solve(&t.problem, &interp_el::InterpOptions { prune: true, ..Default::default() })?;
        Synthesis { exists: r.exists, concept: r.interpolant, verified: r.verified, stats: json!(r.stats) }
    };
    if let (Some(c), Some(d)) = (&s.concept, &t.definability) {
        let a = Concept::name_sym(d.a.clone());
        if !reason::equivalent(&d.o, &a, c)? {
            return Err(Error::Invalid(format!("{c} is not equivalent to {a}")));
        }
    }
    Ok(s)
}

/// Whether `c` is an interpolant (or, for definability tasks, an explicit definition).
pub fn verify(t: &Task, c: &Concept) -> Result<std::result::Result<(), String>> {
    let sigma = t.sigma();
    if !dlinterp::signature_of(c).is_subset(&sigma) {
        return Ok(Err("the concept uses symbols outside the signature".into()));
    }
    if !t.dialect.with_bottom(true).includes(c.dialect().with_bottom(false)) {
        return Ok(Err(format!("the concept is not in {}", t.dialect)));
    }
    if let Some(d) = &t.definability {
        let a = Concept::name_sym(d.a.clone());
        if !reason::entails_ci(&d.o, &a, c)? {
            return Ok(Err(format!("O does not entail {a} <= {c}")));
        }
        if !reason::entails_ci(&d.o, c, &a)? {
            return Ok(Err(format!("O does not entail {c} <= {a}")));
        }
        return Ok(Ok(()));
    }
    Ok(match interp_el::verify_interpolant(&t.problem, c)? {
        None => Ok(()),
        Some(v) => Err(format!("violates the {v:?} condition")),
    })
}

/// Derivation tree for `O ⊨ C ⊑ D` with `D` a concept name, `⊤` or a nominal.
pub fn explain(o: &Ontology, c: &Concept, d: &Concept, dot: bool) -> Result<String> {
    let (p, _) = dlinterp::concept_to_pointed_abox(c, &Signature::new());
    let inverse = o.inferred_dialect().inverse_roles || c.dialect().inverse_roles;
    let atom = if let Some(n) = d.as_name() {
        dlinterp::el_engine::Atom::Name(n.clone())
    } else if let Some(n) = d.as_nominal() {
        dlinterp::el_engine::Atom::Nom(n.clone())
    } else if d.is_top() {
        dlinterp::el_engine::Atom::Top
    } else {
        return Err(Error::Invalid("the right-hand side must be a concept name, a nominal or Top".into()));
    };
    let show_elem = |v: &dlinterp::Var| p.abox.display(*v);
    if inverse {
        let goal = dlinterp::eli_engine::Fact::Atom(atom);
        let Some(t) = dlinterp::derivation::build_tree_eli(o, &p.abox, p.root, &goal)? else {
            return Err(Error::Invalid(format!("O does not entail {c} <= {d}")));
        };
        let e = |x: &dlinterp::eli_engine::EliElem<dlinterp::Var>| match x {
            dlinterp::eli_engine::EliElem::Ind(v) => show_elem(v),
            dlinterp::eli_engine::EliElem::Nom(a) => format!("{{{a}}}"),
        };
        let f = |x: &dlinterp::eli_engine::Fact| x.concept().to_string();
        Ok(if dot {
            t.to_dot(&e, &f, &|r| r.name().to_string())
        } else {
            serde_json::to_string_pretty(&t.to_json(&e, &f, &|r| json!(r.name()))).unwrap()
        })
    } else {
        let Some(t) = dlinterp::derivation::build_tree_el(o, &p.abox, p.root, &atom)? else {
            return Err(Error::Invalid(format!("O does not entail {c} <= {d}")));
        };
        let e = |x: &dlinterp::derivation::DElem<dlinterp::Var>| match x {
            dlinterp::derivation::DElem::Ind(v) => show_elem(v),
            dlinterp::derivation::DElem::Node(a) => format!("d_{a}"),
        };
        let f = |a: &dlinterp::el_engine::Atom| a.to_string();
        let rule = |r: &dlinterp::derivation::ElRule<dlinterp::Var>| match r {
            dlinterp::derivation::ElRule::Chain(ch) => json!({
                "rule": "chain",
                "role": ch.role.to_string(),
                "roles": ch.roles.iter().map(|s| s.to_string()).collect::<Vec<_>>(),
                "length": ch.roles.len(),
                "elements": 2 * (ch.roles.len() + 1),
            }),
            other => json!(other.name()),
        };
        Ok(if dot {
            t.to_dot(&e, &f, &|r| match r {
                dlinterp::derivation::ElRule::Chain(ch) => format!("chain {} (length {})", ch.role, ch.roles.len()),
                other => other.name().to_string(),
            })
        } else {
            serde_json::to_string_pretty(&t.to_json(&e, &f, &rule)).unwrap()
        })
    }
}

/// Runs `f` on a worker thread; `None` when it does not finish within `limit`.
pub fn with_timeout<T: Send + 'static>(limit: Option<Duration>, f: impl FnOnce() -> T + Send + 'static) -> Option<T> {
    let Some(limit) = limit else { return Some(f()) };
    let (tx, rx) = std::sync::mpsc::channel();
    std::thread::spawn(move || {
        let _ = tx.send(f());
    });
    rx.recv_timeout(limit).ok()
}

/// One corpus check: an expectation and what was observed.
#[derive(Clone, Debug, Serialize)]
pub struct CorpusRecord {
    pub entry: String,
    pub dialect: String,
    pub expected_explicit: bool,
    pub expected_implicit: bool,
    pub explicit: Option<bool>,
    pub implicit: Option<bool>,
    pub definition: Option<String>,
    pub verified: Option<bool>,
    pub note: String,
    pub error: Option<String>,
    pub ms: u128,
}

impl CorpusRecord {
    pub fn ok(&self) -> bool {
        self.error.is_none()
            && self.explicit == Some(self.expected_explicit)
            && self.implicit == Some(self.expected_implicit)
            && self.verified != Some(false)
    }

    pub fn line(&self) -> String {
        let status = if self.ok() { "ok" } else { "MISMATCH" };
        let outcome = match (self.explicit, &self.definition) {
            (Some(true), Some(d)) => format!("definition {d}"),
            (Some(true), None) => "definition exists".to_string(),
            (Some(false), _) => "no definition".to_string(),
            (None, _) => format!("error {}", self.error.clone().unwrap_or_default()),
        };
        let implicit = match self.implicit {
            Some(true) => "implicitly definable",
            Some(false) => "not implicitly definable",
            None => "implicit ?",
        };
        format!("{status:8} {:14} {:8} {outcome}; {implicit} ({} ms)", self.entry, self.dialect, self.ms)
    }
}

pub fn run_corpus_entry(e: &dlinterp::textio::CorpusEntry, x: &dlinterp::textio::Expected) -> CorpusRecord {
    let start = Instant::now();
    let mut rec = CorpusRecord {
        entry: e.name.clone(),
        dialect: x.dialect.to_string(),
        expected_explicit: x.explicit,
        expected_implicit: x.implicit,
        explicit: None,
        implicit: None,
        definition: None,
        verified: None,
        note: x.note.to_string(),
        error: None,
        ms: 0,
    };
    let mut run = || -> Result<()> {
        rec.implicit = Some(reason::implicitly_definable(&e.ontology, &e.focus, &e.sigma)?);
        let mut sigma = e.sigma.clone();
        if !x.dialect.nominals {
            sigma.individuals.clear();
        }
        let p = DefinabilityProblem { o: e.ontology.clone(), a: e.focus.clone(), sigma, universal: x.dialect.universal_role };
        let task = Task {
            problem: p.to_interpolation(),
            definability: Some(p),
            inverse: x.dialect.inverse_roles || e.ontology.inferred_dialect().inverse_roles,
            dialect: x.dialect,
            depth: None,
        };
        if x.explicit {
            let s = synthesize(&task)?;
            rec.explicit = Some(s.exists);
            rec.verified = s.concept.as_ref().map(|_| s.verified);
            rec.definition = s.concept.map(|c| c.to_string());
        } else {
            rec.explicit = Some(decide(&task)?);
        }
        Ok(())
    };
    if let Err(err) = run() {
        rec.error = Some(err.to_string());
    }
    rec.ms = start.elapsed().as_millis();
    rec
}

/// Every corpus expectation, evaluated on a pool of `jobs` workers; records come back in
/// corpus order.
pub fn run_corpus(jobs: usize) -> Vec<CorpusRecord> {
    let corpus = dlinterp::textio::load_corpus();
    let tasks: Vec<(usize, usize)> =
        corpus.iter().enumerate().flat_map(|(i, e)| (0..e.expected.len()).map(move |j| (i, j))).collect();
    let next = std::sync::atomic::AtomicUsize::new(0);
    let out = std::sync::Mutex::new(vec![None; tasks.len()]);
    std::thread::scope(|s| {
        for _ in 0..jobs.max(1) {
            s.spawn(|| loop {
                let k = next.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
                let Some(&(i, j)) = tasks.get(k) else { break };
                let r = run_corpus_entry(&corpus[i], &corpus[i].expected[j]);
                out.lock().unwrap()[k] = Some(r);
            });
        }
    });
    out.into_inner().unwrap().into_iter().map(|r| r.expect("every task ran")).collect()
}
