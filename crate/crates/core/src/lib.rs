//! Incremental Datalog evaluation driven by change-action derivatives.

pub mod change;
pub mod delta;
pub mod formula;
pub mod frontend;
pub mod gen;
pub mod par;
pub mod props;
pub mod relation;
pub mod derive;
pub mod engine;
pub mod semantics;
