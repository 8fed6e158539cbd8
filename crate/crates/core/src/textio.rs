//! Text syntax for concepts, ontologies and ABoxes, JSON export, and the bundled corpus.
//!
//! ```text
//! A <= B & exists r.(C & {a})
//! exists inv(r).A <= exists u.B
//! r o s <= s
//! ```

use std::collections::{BTreeMap, BTreeSet};

use serde_json::{json, Value};

use crate::normalize::{HornCI, HornConcept, HornOntology};
use crate::types::*;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Amp,
    Bar,
    Dot,
    LParen,
    RParen,
    LBrace,
    RBrace,
    Le,
    Eqv,
    Arrow,
    Comma,
    Eof,
}

const KEYWORDS: &[&str] = &["Top", "Bot", "exists", "forall", "not", "inv", "u", "o"];

fn is_name_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_' || c == '\''
}

struct Lexer {
    toks: Vec<(Tok, usize, usize)>,
    pos: usize,
}

impl Lexer {
    fn new(src: &str, line: usize) -> Result<Self> {
        let mut toks = Vec::new();
        let chars: Vec<char> = src.chars().collect();
        let mut i = 0;
        while i < chars.len() {
            let c = chars[i];
            let col = i + 1;
            if c == '#' {
                break;
            }
            if c.is_whitespace() {
                i += 1;
                continue;
            }
            let two: String = chars[i..(i + 2).min(chars.len())].iter().collect();
            let (t, w) = match (c, two.as_str()) {
                (_, "<=") => (Tok::Le, 2),
                (_, "==") => (Tok::Eqv, 2),
                (_, "->") => (Tok::Arrow, 2),
                ('&', _) => (Tok::Amp, 1),
                ('|', _) => (Tok::Bar, 1),
                ('.', _) => (Tok::Dot, 1),
                ('(', _) => (Tok::LParen, 1),
                (')', _) => (Tok::RParen, 1),
                ('{', _) => (Tok::LBrace, 1),
                ('}', _) => (Tok::RBrace, 1),
                (',', _) => (Tok::Comma, 1),
                _ if is_name_char(c) => {
                    let start = i;
                    while i < chars.len() && is_name_char(chars[i]) {
                        i += 1;
                    }
                    toks.push((Tok::Ident(chars[start..i].iter().collect()), line, start + 1));
                    continue;
                }
                _ => {
                    return Err(Error::Syntax { line, col, msg: format!("unexpected character '{c}'") });
                }
            };
            toks.push((t, line, col));
            i += w;
        }
        toks.push((Tok::Eof, line, chars.len() + 1));
        Ok(Lexer { toks, pos: 0 })
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn peek_at(&self, k: usize) -> &Tok {
        &self.toks[(self.pos + k).min(self.toks.len() - 1)].0
    }

    fn next(&mut self) -> Tok {
        let t = self.toks[self.pos].0.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T> {
        let (_, line, col) = &self.toks[self.pos];
        Err(Error::Syntax { line: *line, col: *col, msg: msg.into() })
    }

    fn expect(&mut self, t: Tok, what: &str) -> Result<()> {
        if *self.peek() == t {
            self.next();
            Ok(())
        } else {
            self.err(format!("expected {what}, found {}", describe(self.peek())))
        }
    }

    fn keyword(&self, k: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == k)
    }

    fn name(&mut self, what: &str) -> Result<String> {
        match self.peek().clone() {
            Tok::Ident(s) if !KEYWORDS.contains(&s.as_str()) => {
                self.next();
                Ok(s)
            }
            t => self.err(format!("expected {what}, found {}", describe(&t))),
        }
    }
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Ident(s) => format!("'{s}'"),
        Tok::Eof => "end of line".into(),
        Tok::Amp => "'&'".into(),
        Tok::Bar => "'|'".into(),
        Tok::Dot => "'.'".into(),
        Tok::LParen => "'('".into(),
        Tok::RParen => "')'".into(),
        Tok::LBrace => "'{'".into(),
        Tok::RBrace => "'}'".into(),
        Tok::Le => "'<='".into(),
        Tok::Eqv => "'=='".into(),
        Tok::Arrow => "'->'".into(),
        Tok::Comma => "','".into(),
    }
}

fn role(lx: &mut Lexer) -> Result<RoleExpr> {
    if lx.keyword("u") {
        lx.next();
        return Ok(RoleExpr::Universal);
    }
    if lx.keyword("inv") {
        lx.next();
        lx.expect(Tok::LParen, "'(' after inv")?;
        let r = lx.name("role name")?;
        lx.expect(Tok::RParen, "')'")?;
        return Ok(RoleExpr::Inv(sym(&r)));
    }
    Ok(RoleExpr::Name(sym(&lx.name("role")?)))
}

fn concept(lx: &mut Lexer) -> Result<Concept> {
    let mut parts = vec![atom(lx)?];
    while *lx.peek() == Tok::Amp {
        lx.next();
        parts.push(atom(lx)?);
    }
    Ok(Concept::conj(parts))
}

fn atom(lx: &mut Lexer) -> Result<Concept> {
    match lx.peek().clone() {
        Tok::LParen => {
            lx.next();
            let c = concept(lx)?;
            lx.expect(Tok::RParen, "')'")?;
            Ok(c)
        }
        Tok::LBrace => {
            lx.next();
            let a = lx.name("individual name")?;
            lx.expect(Tok::RBrace, "'}'")?;
            Ok(Concept::nominal(&a))
        }
        Tok::Ident(s) if s == "Top" => {
            lx.next();
            Ok(Concept::top())
        }
        Tok::Ident(s) if s == "Bot" => {
            lx.next();
            Ok(Concept::bot())
        }
        Tok::Ident(s) if s == "exists" => {
            lx.next();
            let r = role(lx)?;
            lx.expect(Tok::Dot, "'.'")?;
            Ok(Concept::exists(r, atom(lx)?))
        }
        Tok::Ident(s) if s == "forall" || s == "not" => lx.err(format!("'{s}' is only allowed in Horn input")),
        _ => Ok(Concept::name(&lx.name("concept")?)),
    }
}

pub fn parse_concept(text: &str) -> Result<Concept> {
    let mut lx = Lexer::new(text, 1)?;
    let c = concept(&mut lx)?;
    lx.expect(Tok::Eof, "end of input")?;
    Ok(c)
}

pub fn print_concept(c: &Concept) -> String {
    c.to_string()
}

enum Line {
    Ci(Vec<CI>),
    Chain(Vec<String>, String, usize),
}

/// Role names used inside concepts, used to tell `r <= s` (roles) from `A <= B` (concepts).
fn roles_in(c: &Concept, out: &mut BTreeSet<String>) {
    for r in signature_of(c).roles {
        out.insert(r.to_string());
    }
}

fn is_chain_line(lx: &Lexer) -> bool {
    let mut k = 0;
    loop {
        if !matches!(lx.peek_at(k), Tok::Ident(s) if !KEYWORDS.contains(&s.as_str())) {
            return false;
        }
        k += 1;
        match lx.peek_at(k) {
            Tok::Ident(s) if s == "o" => k += 1,
            Tok::Le => {
                return matches!(lx.peek_at(k + 1), Tok::Ident(s) if !KEYWORDS.contains(&s.as_str()))
                    && *lx.peek_at(k + 2) == Tok::Eof;
            }
            _ => return false,
        }
    }
}

fn parse_line(text: &str, line: usize) -> Result<Option<Line>> {
    let mut lx = Lexer::new(text, line)?;
    if *lx.peek() == Tok::Eof {
        return Ok(None);
    }
    if is_chain_line(&lx) {
        let mut chain = vec![lx.name("role")?];
        while lx.keyword("o") {
            lx.next();
            chain.push(lx.name("role")?);
        }
        lx.expect(Tok::Le, "'<='")?;
        let head = lx.name("role")?;
        return Ok(Some(Line::Chain(chain, head, line)));
    }
    // An inverse role in a chain is a feature error rather than a syntax error.
    if text.contains(" o ") && text.contains("inv(") && !text.contains("exists") {
        return Err(Error::Feature(format!("line {line}: role inclusions may not use inverse roles")));
    }
    let lhs = concept(&mut lx)?;
    let eqv = match lx.next() {
        Tok::Le => false,
        Tok::Eqv => true,
        t => return lx.err(format!("expected '<=' or '==', found {}", describe(&t))),
    };
    let rhs = concept(&mut lx)?;
    lx.expect(Tok::Eof, "end of line")?;
    let mut cis = vec![CI::new(lhs.clone(), rhs.clone())];
    if eqv {
        cis.push(CI::new(rhs, lhs));
    }
    Ok(Some(Line::Ci(cis)))
}

pub fn parse_ontology(text: &str) -> Result<Ontology> {
    let mut lines = Vec::new();
    for (i, l) in text.lines().enumerate() {
        if let Some(p) = parse_line(l, i + 1)? {
            lines.push(p);
        }
    }
    // Single-name lines `r <= s`: role hierarchy if the names are used as roles elsewhere.
    let mut role_names = BTreeSet::new();
    for l in &lines {
        match l {
            Line::Ci(cis) => cis.iter().for_each(|c| {
                roles_in(&c.lhs, &mut role_names);
                roles_in(&c.rhs, &mut role_names);
            }),
            Line::Chain(ch, h, _) if ch.len() > 1 => {
                role_names.extend(ch.iter().cloned());
                role_names.insert(h.clone());
            }
            _ => {}
        }
    }
    let mut cis = Vec::new();
    let mut ris = Vec::new();
    for l in lines {
        match l {
            Line::Ci(c) => cis.extend(c),
            Line::Chain(ch, h, line) => {
                let roleish = ch.len() > 1 || role_names.contains(&ch[0]) || role_names.contains(&h);
                if roleish {
                    ris.push(RI { chain: ch.iter().map(|s| sym(s)).collect(), head: sym(&h) });
                } else if ch.len() == 1 {
                    cis.push(CI::new(Concept::name(&ch[0]), Concept::name(&h)));
                } else {
                    return Err(Error::Syntax { line, col: 1, msg: "malformed role inclusion".into() });
                }
            }
        }
    }
    Ok(Ontology::new(cis, ris))
}

pub fn print_ontology(o: &Ontology) -> String {
    o.to_string()
}

fn horn_expr(lx: &mut Lexer) -> Result<HornConcept> {
    let lhs = horn_or(lx)?;
    if *lx.peek() == Tok::Arrow {
        lx.next();
        let rhs = horn_expr(lx)?;
        return Ok(HornConcept::Implies(Box::new(lhs), Box::new(rhs)));
    }
    Ok(lhs)
}

fn horn_or(lx: &mut Lexer) -> Result<HornConcept> {
    let mut parts = vec![horn_and(lx)?];
    while *lx.peek() == Tok::Bar {
        lx.next();
        parts.push(horn_and(lx)?);
    }
    Ok(if parts.len() == 1 { parts.pop().unwrap() } else { HornConcept::Or(parts) })
}

fn horn_and(lx: &mut Lexer) -> Result<HornConcept> {
    let mut parts = vec![horn_unary(lx)?];
    while *lx.peek() == Tok::Amp {
        lx.next();
        parts.push(horn_unary(lx)?);
    }
    Ok(if parts.len() == 1 { parts.pop().unwrap() } else { HornConcept::And(parts) })
}

fn horn_unary(lx: &mut Lexer) -> Result<HornConcept> {
    match lx.peek().clone() {
        Tok::LParen => {
            lx.next();
            let c = horn_expr(lx)?;
            lx.expect(Tok::RParen, "')'")?;
            Ok(c)
        }
        Tok::LBrace => {
            lx.next();
            let a = lx.name("individual name")?;
            lx.expect(Tok::RBrace, "'}'")?;
            Ok(HornConcept::Nominal(sym(&a)))
        }
        Tok::Ident(s) => match s.as_str() {
            "Top" => {
                lx.next();
                Ok(HornConcept::Top)
            }
            "Bot" => {
                lx.next();
                Ok(HornConcept::Bot)
            }
            "not" => {
                lx.next();
                Ok(HornConcept::Not(Box::new(horn_unary(lx)?)))
            }
            "exists" | "forall" => {
                lx.next();
                let r = role(lx)?;
                lx.expect(Tok::Dot, "'.'")?;
                let body = Box::new(horn_unary(lx)?);
                Ok(if s == "exists" { HornConcept::Exists(r, body) } else { HornConcept::Forall(r, body) })
            }
            _ => Ok(HornConcept::Name(sym(&lx.name("concept")?))),
        },
        t => lx.err(format!("unexpected {}", describe(&t))),
    }
}

/// Horn syntax adds `not`, `forall r.C`, `C | D` and `C -> D` to the concept grammar.
pub fn parse_horn_ontology(text: &str) -> Result<HornOntology> {
    let mut out = HornOntology::default();
    for (i, l) in text.lines().enumerate() {
        let mut lx = Lexer::new(l, i + 1)?;
        if *lx.peek() == Tok::Eof {
            continue;
        }
        if is_chain_line(&lx) && l.contains(" o ") {
            let mut chain = vec![lx.name("role")?];
            while lx.keyword("o") {
                lx.next();
                chain.push(lx.name("role")?);
            }
            lx.expect(Tok::Le, "'<='")?;
            let head = lx.name("role")?;
            out.ris.push(RI { chain: chain.iter().map(|s| sym(s)).collect(), head: sym(&head) });
            continue;
        }
        let lhs = horn_expr(&mut lx)?;
        lx.expect(Tok::Le, "'<='")?;
        let rhs = horn_expr(&mut lx)?;
        lx.expect(Tok::Eof, "end of line")?;
        out.cis.push(HornCI { lhs, rhs });
    }
    Ok(out)
}

/// ABox syntax: comma-separated `A(x)`, `{a}(x)`, `Top(x)`, `r(x, y)`.
pub fn parse_abox(text: &str) -> Result<(ABox, BTreeMap<String, Var>)> {
    let mut a = ABox::new();
    let mut vars: BTreeMap<String, Var> = BTreeMap::new();
    let mut var = |a: &mut ABox, n: String| -> Var {
        *vars.entry(n.clone()).or_insert_with(|| a.fresh_named(n))
    };
    for (i, l) in text.lines().enumerate() {
        let mut lx = Lexer::new(l, i + 1)?;
        while *lx.peek() != Tok::Eof {
            match lx.peek().clone() {
                Tok::LBrace => {
                    lx.next();
                    let n = lx.name("individual name")?;
                    lx.expect(Tok::RBrace, "'}'")?;
                    lx.expect(Tok::LParen, "'('")?;
                    let x = lx.name("variable")?;
                    lx.expect(Tok::RParen, "')'")?;
                    let v = var(&mut a, x);
                    a.add_nominal(&n, v);
                }
                Tok::Ident(p) => {
                    lx.next();
                    lx.expect(Tok::LParen, "'('")?;
                    let x = lx.name("variable")?;
                    let vx = var(&mut a, x);
                    if *lx.peek() == Tok::Comma {
                        lx.next();
                        let y = lx.name("variable")?;
                        let vy = var(&mut a, y);
                        a.add_role(&p, vx, vy);
                    } else if p == "Top" {
                        a.add_top(vx);
                    } else {
                        a.add_concept(&p, vx);
                    }
                    lx.expect(Tok::RParen, "')'")?;
                }
                t => return lx.err(format!("unexpected {}", describe(&t))),
            }
            if *lx.peek() == Tok::Comma {
                lx.next();
            }
        }
    }
    Ok((a, vars))
}

pub fn print_abox(a: &ABox) -> String {
    a.to_string()
}

pub fn role_to_json(r: &RoleExpr) -> Value {
    match r {
        RoleExpr::Name(n) => json!({"named": &**n}),
        RoleExpr::Inv(n) => json!({"inverse": &**n}),
        RoleExpr::Universal => json!("universal"),
    }
}

pub fn concept_to_json(c: &Concept) -> Value {
    match c.node() {
        Node::Top => json!("top"),
        Node::Bot => json!("bot"),
        Node::Name(a) => json!({"name": &**a}),
        Node::Nominal(a) => json!({"nominal": &**a}),
        Node::And(cs) => json!({"conj": cs.iter().map(concept_to_json).collect::<Vec<_>>()}),
        Node::Exists(r, d) => json!({"exists": {"role": role_to_json(r), "filler": concept_to_json(d)}}),
    }
}

pub fn concept_from_json(v: &Value) -> Result<Concept> {
    let bad = || Error::Invalid(format!("not a concept: {v}"));
    match v {
        Value::String(s) if s == "top" => Ok(Concept::top()),
        Value::String(s) if s == "bot" => Ok(Concept::bot()),
        Value::Object(m) => {
            if let Some(Value::String(a)) = m.get("name") {
                Ok(Concept::name(a))
            } else if let Some(Value::String(a)) = m.get("nominal") {
                Ok(Concept::nominal(a))
            } else if let Some(Value::Array(cs)) = m.get("conj") {
                Ok(Concept::conj(cs.iter().map(concept_from_json).collect::<Result<Vec<_>>>()?))
            } else if let Some(e) = m.get("exists") {
                let r = match e.get("role").ok_or_else(bad)? {
                    Value::String(s) if s == "universal" => RoleExpr::Universal,
                    Value::Object(rm) => match (rm.get("named"), rm.get("inverse")) {
                        (Some(Value::String(n)), _) => RoleExpr::name(n),
                        (_, Some(Value::String(n))) => RoleExpr::Inv(sym(n)),
                        _ => return Err(bad()),
                    },
                    _ => return Err(bad()),
                };
                Ok(Concept::exists(r, concept_from_json(e.get("filler").ok_or_else(bad)?)?))
            } else {
                Err(bad())
            }
        }
        _ => Err(bad()),
    }
}

pub fn ontology_to_json(o: &Ontology) -> Value {
    json!({
        "cis": o.cis.iter().map(|c| json!({"lhs": concept_to_json(&c.lhs), "rhs": concept_to_json(&c.rhs)})).collect::<Vec<_>>(),
        "ris": o.ris.iter().map(|r| json!({"chain": r.chain.iter().map(|s| &**s).collect::<Vec<_>>(), "head": &*r.head})).collect::<Vec<_>>(),
        "dialect": serde_json::to_value(o.dialect).unwrap(),
    })
}

pub fn signature_to_json(s: &Signature) -> Value {
    json!({
        "concepts": s.concepts.iter().map(|x| &**x).collect::<Vec<_>>(),
        "roles": s.roles.iter().map(|x| &**x).collect::<Vec<_>>(),
        "individuals": s.individuals.iter().map(|x| &**x).collect::<Vec<_>>(),
    })
}

pub fn abox_to_json(a: &ABox) -> Value {
    let items: Vec<Value> = a
        .assertions
        .iter()
        .map(|x| match x {
            Assertion::Top(v) => json!({"top": a.display(*v)}),
            Assertion::Concept(c, v) => json!({"concept": &**c, "ind": a.display(*v)}),
            Assertion::Nominal(c, v) => json!({"nominal": &**c, "ind": a.display(*v)}),
            Assertion::Role(r, v, w) => json!({"role": &**r, "from": a.display(*v), "to": a.display(*w)}),
        })
        .collect();
    Value::Array(items)
}

/// Signature syntax: comma or space separated; `{a}` marks individuals, roles are
/// recognised by `roles` (names used as roles in the ontology).
pub fn parse_signature(text: &str, roles: &BTreeSet<Sym>) -> Signature {
    let mut s = Signature::new();
    for tok in text.split(|c: char| c == ',' || c.is_whitespace()).filter(|t| !t.is_empty()) {
        if let Some(ind) = tok.strip_prefix('{').and_then(|t| t.strip_suffix('}')) {
            s.individuals.insert(sym(ind));
        } else if roles.contains(tok) {
            s.roles.insert(sym(tok));
        } else {
            s.concepts.insert(sym(tok));
        }
    }
    s
}

#[derive(Clone, Debug)]
pub struct Expected {
    /// Interpolant/definition language the outcome refers to.
    pub dialect: Dialect,
    pub explicit: bool,
    pub implicit: bool,
    pub note: &'static str,
}

#[derive(Clone, Debug)]
pub struct CorpusEntry {
    pub name: String,
    pub ontology: Ontology,
    /// Original Horn axioms when the entry was given in Horn syntax.
    pub horn: Option<HornOntology>,
    pub focus: Sym,
    pub sigma: Signature,
    pub expected: Vec<Expected>,
}

impl CorpusEntry {
    pub fn source_text(&self) -> String {
        match &self.horn {
            Some(h) => h.to_string(),
            None => print_ontology(&self.ontology),
        }
    }
}

pub const O_U: &str = "\
A <= B
D & exists u.A <= E
B <= exists r.C
C <= D
B & exists r.(C & E) <= A
";

pub const O_N: &str = "\
A <= exists r.(E & {c})
Top <= exists s.(Q2 & exists s.{c})
exists s.(Q1 & Q2 & exists s.{c}) <= A
exists s.E <= Q1
";

pub const O_R: &str = "\
A <= exists r.E
E <= exists s.B
exists s.B <= A
r o s <= s
";

pub const O_RS: &str = "\
A <= exists s.E
E <= exists s1.B
exists s2.B <= A
s1 <= s
s <= s2
s o s <= s
";

pub const O_I: &str = "\
A <= B
D & exists inv(r).A <= E
B <= exists r.C
C <= D
B & exists r.(C & E) <= A
";

pub const O_NOMINAL: &str = "\
A <= {b}
A <= exists r.B
B <= exists s.A
";

pub const O_HORN: &str = "\
B & exists r.(C & E) <= A
A <= B
B <= forall r.F
B <= exists r.C
C <= F & forall r1.D1
F <= exists r1.D1 & exists r1.M
A <= forall r.((F & exists r1.(D1 & M)) -> E)
";

/// Binary tree of depth n with `B_n` at the leaves; definable by `M & C_n`.
pub fn o_b(n: usize) -> Ontology {
    assert!(n >= 1);
    let mut t = String::from("A <= M & exists r1.B1 & exists r2.B1\n");
    for i in 1..n {
        t += &format!("B{i} <= exists r1.B{j} & exists r2.B{j}\n", j = i + 1);
    }
    t += &format!("B{n} <= B\nexists r1.B & exists r2.B <= B\nB & M <= A\n");
    parse_ontology(&t).expect("O_b parses")
}

/// Role chain doubling: `A` is definable by an `r0`-path of length 2^n.
pub fn o_p(n: usize) -> Ontology {
    let mut t = String::from("A <= exists r0.B\nB <= exists r0.B\n");
    t += &format!("exists r{n}.B <= A\n");
    for i in 0..n {
        t += &format!("r{i} o r{i} <= r{j}\n", j = i + 1);
    }
    parse_ontology(&t).expect("O_p parses")
}

/// Counter ontology with bits X0..Xn driving a binary r/s tree that ends in L.
pub fn o_counter(n: usize) -> Ontology {
    let bits = |i: usize, pos: bool| if pos { format!("X{i}") } else { format!("NX{i}") };
    let mut t = String::from("Top <= exists r.Top & exists s.Top\n");
    t += "A <= M";
    for i in 0..=n {
        t += &format!(" & {}", bits(i, false));
    }
    t += "\n";
    for sigma in ["r", "s"] {
        for i in 0..=n {
            let lower: String = (0..i).map(|j| format!(" & X{j}")).collect();
            t += &format!("exists inv({sigma}).({}{lower}) <= X{i}\n", bits(i, false));
            t += &format!("exists inv({sigma}).(X{i}{lower}) <= NX{i}\n");
            for j in 0..i {
                t += &format!("exists inv({sigma}).(NX{i} & NX{j}) <= NX{i}\n");
                t += &format!("exists inv({sigma}).(X{i} & NX{j}) <= X{i}\n");
            }
        }
    }
    let all: Vec<String> = (0..=n).map(|i| format!("X{i}")).collect();
    t += &format!("{} <= L\n", all.join(" & "));
    t += "L <= B\nexists r.B & exists s.B <= B\nB & M <= A\n";
    parse_ontology(&t).expect("counter ontology parses")
}

fn sig(concepts: &[&str], roles: &[&str], inds: &[&str]) -> Signature {
    Signature::from_names(concepts, roles, inds)
}

pub fn load_corpus() -> Vec<CorpusEntry> {
    let plain = |name: &str, text: &str, sigma: Signature, expected: Vec<Expected>| CorpusEntry {
        name: name.to_string(),
        ontology: parse_ontology(text).expect("corpus entry parses"),
        horn: None,
        focus: sym("A"),
        sigma,
        expected,
    };
    let neg = |d: Dialect, note: &'static str| Expected { dialect: d, explicit: false, implicit: true, note };
    let pos = |d: Dialect, note: &'static str| Expected { dialect: d, explicit: true, implicit: true, note };
    let horn = parse_horn_ontology(O_HORN).expect("Horn entry parses");
    let horn_nf = crate::normalize::horn_to_normal_form(&horn).expect("Horn entry is Horn");
    vec![
        plain(
            "O_u",
            O_U,
            sig(&["B", "D", "E"], &["r"], &[]),
            vec![neg(Dialect::EL_U, "universal role: two models agree on Σ up to an EL_u(Σ)-simulation but differ on A")],
        ),
        plain(
            "O_n",
            O_N,
            sig(&["Q1"], &["s"], &["c"]),
            vec![
                neg(Dialect::ELO_U, "nominal c ties the s-loop to A; simulated models differ on A"),
                neg(Dialect::ELO, "nominal c ties the s-loop to A; simulated models differ on A"),
            ],
        ),
        plain(
            "O_r",
            O_R,
            sig(&["E"], &["s"], &[]),
            vec![
                neg(Dialect::EL_U, "the chain r o s <= s hides the r-edge from Σ"),
                neg(Dialect::EL, "the chain r o s <= s hides the r-edge from Σ"),
            ],
        ),
        plain(
            "O_rs",
            O_RS,
            sig(&["E"], &["s1", "s2"], &[]),
            vec![
                neg(Dialect::EL_U, "hierarchy s1 <= s <= s2 with transitive s"),
                neg(Dialect::EL, "hierarchy s1 <= s <= s2 with transitive s"),
            ],
        ),
        plain(
            "O_i",
            O_I,
            sig(&["B", "D", "E"], &["r"], &[]),
            vec![
                neg(Dialect::ELI_U, "inverse role replaces the universal role of O_u"),
                neg(Dialect::ELI, "inverse role replaces the universal role of O_u"),
            ],
        ),
        CorpusEntry {
            name: "O_b(3)".into(),
            ontology: o_b(3),
            horn: None,
            focus: sym("A"),
            sigma: sig(&["B3", "M"], &["r1", "r2"], &[]),
            expected: vec![pos(Dialect::EL, "smallest definition is M & C_3")],
        },
        CorpusEntry {
            name: "O_p(2)".into(),
            ontology: o_p(2),
            horn: None,
            focus: sym("A"),
            sigma: sig(&["B"], &["r0"], &[]),
            expected: vec![pos(Dialect::EL, "A is equivalent to every r0-path ending in B")],
        },
        plain(
            "O_nominal",
            O_NOMINAL,
            sig(&["B"], &[], &["b"]),
            vec![
                pos(Dialect::ELO_U, "A == {b} & exists u.B"),
                neg(Dialect::ELO, "B is only reachable through the universal role"),
            ],
        ),
        CorpusEntry {
            name: "O_horn".into(),
            ontology: horn_nf,
            horn: Some(horn),
            focus: sym("A"),
            sigma: sig(&["B", "D1", "E"], &["r", "r1"], &[]),
            expected: vec![neg(Dialect::ELI_U, "implicitly definable, but no Horn concept defines A")],
        },
        CorpusEntry {
            name: "O_counter(1)".into(),
            ontology: o_counter(1),
            horn: None,
            focus: sym("A"),
            sigma: sig(&["L", "M"], &["r", "s"], &[]),
            expected: vec![pos(Dialect::ELI, "counter-driven binary tree")],
        },
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_ci() {
        let o = parse_ontology("A <= B & exists r.C").unwrap();
        assert_eq!(o.cis, vec![CI::new(Concept::name("A"), parse_concept("B & exists r.C").unwrap())]);
        assert_eq!(o.dialect, Dialect::EL);
    }

    #[test]
    fn parses_chain() {
        let o = parse_ontology("r o s <= s").unwrap();
        assert_eq!(o.ris, vec![RI::new(&["r", "s"], "s")]);
        assert!(o.dialect.role_inclusions);
    }

    #[test]
    fn infers_dialect() {
        let o = parse_ontology("A <= exists u.{a}").unwrap();
        assert!(o.dialect.universal_role && o.dialect.nominals && !o.dialect.inverse_roles);
    }

    #[test]
    fn inverse_in_chain_is_feature_error() {
        assert!(matches!(parse_ontology("inv(r) o s <= s"), Err(Error::Feature(_))));
    }

    #[test]
    fn syntax_error_position() {
        match parse_ontology("A <= B\nA <= & B") {
            Err(Error::Syntax { line, col, .. }) => assert_eq!((line, col), (2, 6)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn printing() {
        assert_eq!(print_concept(&Concept::top()), "Top");
        let c = Concept::exists(RoleExpr::Inv(sym("r")), Concept::name("A"));
        assert_eq!(print_concept(&c), "exists inv(r).A");
        let d = parse_concept("exists r2.B & M & exists r1.B").unwrap();
        assert_eq!(print_concept(&d), "M & exists r1.B & exists r2.B");
    }

    #[test]
    fn hierarchy_versus_concept_inclusion() {
        let o = parse_ontology(O_RS).unwrap();
        assert_eq!(o.ris.len(), 3);
        assert_eq!(o.cis.len(), 3);
        let o = parse_ontology("A <= B").unwrap();
        assert_eq!(o.cis.len(), 1);
    }

    #[test]
    fn corpus_shapes() {
        let c = load_corpus();
        let get = |n: &str| c.iter().find(|e| e.name == n).unwrap();
        assert_eq!(get("O_u").ontology.cis.len(), 5);
        assert_eq!(get("O_p(2)").ontology.cis.len(), 3);
        assert_eq!(get("O_p(2)").ontology.ris.len(), 2);
        let nom = get("O_nominal");
        assert_eq!(nom.ontology.cis.len(), 3);
        assert_eq!(nom.sigma, sig(&["B"], &[], &["b"]));
        let s = signature_of(&get("O_u").ontology);
        assert_eq!(s, sig(&["A", "B", "C", "D", "E"], &["r"], &[]));
    }

    #[test]
    fn json_round_trip() {
        let c = parse_concept("A & exists inv(r).({a} & exists u.Top)").unwrap();
        assert_eq!(concept_from_json(&concept_to_json(&c)).unwrap(), c);
    }

    #[test]
    fn abox_syntax() {
        let (a, v) = parse_abox("A(x), r(x, y), {b}(y)").unwrap();
        assert_eq!(a.len(), 3);
        assert!(a.contains(&Assertion::Role(sym("r"), v["x"], v["y"])));
    }

    #[test]
    fn horn_syntax() {
        let h = parse_horn_ontology(O_HORN).unwrap();
        assert_eq!(h.cis.len(), 7);
    }
}
