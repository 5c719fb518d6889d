//! Engine for step-sequence visual programs.

pub mod backend;
pub mod dsl;
pub mod emoji;
pub mod error;
pub mod eval;
pub mod expr;
pub mod font;
pub mod generator;
pub mod image;
pub mod imageops;
pub mod interpreter;
pub mod neural;
pub mod par;
pub mod rationale;
pub mod registry;
pub mod scene;
pub mod signature;
pub mod value;
