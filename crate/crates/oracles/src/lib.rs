//! Reference implementations written separately from the engine, used to
//! check it in tests. Nothing here is optimized.

pub mod assign;
pub mod dsl;
pub mod expr;
pub mod image;
pub mod matching;
pub mod vote;
