//! Entailment front end: picks the EL or ELI engine from the input's features.

use crate::types::*;
use crate::Result;

fn needs_eli(o: &Ontology, cs: &[&Concept]) -> bool {
    o.inferred_dialect().inverse_roles || cs.iter().any(|c| c.dialect().inverse_roles)
}

/// `O ⊨ C ⊑ D`.
pub fn entails_ci(o: &Ontology, c: &Concept, d: &Concept) -> Result<bool> {
    if needs_eli(o, &[c, d]) {
        crate::eli_engine::entails_ci(o, c, d)
    } else {
        crate::el_engine::entails_ci(o, c, d)
    }
}

/// `O ⊨ C ⊑ ⊥`.
pub fn unsatisfiable(o: &Ontology, c: &Concept) -> Result<bool> {
    entails_ci(o, c, &Concept::bot())
}

pub fn equivalent(o: &Ontology, c: &Concept, d: &Concept) -> Result<bool> {
    Ok(entails_ci(o, c, d)? && entails_ci(o, d, c)?)
}

/// `O, A ⊨ C(x)`.
pub fn entails_assertion(o: &Ontology, a: &ABox, c: &Concept, x: Var) -> Result<bool> {
    if needs_eli(o, &[c]) {
        crate::eli_engine::entails_assertion(o, a, c, x)
    } else {
        crate::el_engine::entails_assertion(o, a, c, x)
    }
}

/// `O ∪ O_Σ ⊨ A ≡ A'` with `O_Σ` the copy of `O` renamed outside Σ.
pub fn implicitly_definable(o: &Ontology, a: &Sym, sigma: &Signature) -> Result<bool> {
    let (renamed, ren) = crate::normalize::rename_outside_sigma(o, sigma);
    let both = o.union(&renamed);
    let a1 = Concept::name_sym(a.clone());
    let a2 = Concept::name_sym(ren.concept(a));
    equivalent(&both, &a1, &a2)
}
