pub mod derivation;
pub mod el_engine;
pub mod eli_automata;
pub mod eli_engine;
pub mod interp_el;
pub mod interp_eli;
pub mod error;
pub mod normalize;
pub mod reason;
pub mod semantics;
pub mod textio;
pub mod types;

pub use error::{Error, Result};
pub use types::*;
