mod common;

use common::checks::*;
use proptest::prelude::*;

macro_rules! property {
    ($cases:expr, $($name:ident => $check:ident),+ $(,)?) => {
        proptest! {
            #![proptest_config(ProptestConfig::with_cases($cases))]
            $(
                #[test]
                fn $name(seed in any::<u64>()) {
                    if let Err(e) = $check(seed) {
                        return Err(TestCaseError::fail(e));
                    }
                }
            )+
        }
    };
}

property!(500,
    simulations_preserve_concepts => simulation_preservation,
    canonical_abox_model_matches_entailment => canonical_abox_model,
);

property!(300, el_derivation_trees_are_sound_and_complete => el_derivations);

property!(200,
    eli_saturation_matches_derivation_trees => eli_derivations,
    eli_rule_fixpoint_agrees_with_completion => eli_fixpoint_vs_completion,
    diagram_and_canonical_abox_agree => diagram_agreement,
);

property!(100,
    safe_role_inclusions_keep_interpolants => safe_ri_interpolant,
    eli_existence_matches_el_on_inverse_free_input => eli_vs_el,
    normal_form_is_conservative => normal_form_conservative,
);

property!(10_000,
    concepts_survive_the_abox_round_trip => abox_round_trip,
    printing_then_parsing_is_the_identity => print_parse,
);
