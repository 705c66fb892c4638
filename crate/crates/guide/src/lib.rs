//! Runs the guide's code listings as doc-tests.
//!
//! mdbook cannot test listings that depend on an external crate, so each
//! chapter is pulled in as the documentation of an empty module and
//! `cargo test --doc` does the rest.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../../book/src/annotations.md")]
pub mod annotations {}
#[doc = include_str!("../../../book/src/layout.md")]
pub mod layout {}
#[doc = include_str!("../../../book/src/baselines.md")]
pub mod baselines {}
#[doc = include_str!("../../../book/src/perception.md")]
pub mod perception {}
#[doc = include_str!("../../../book/src/attribution.md")]
pub mod attribution {}
#[doc = include_str!("../../../book/src/evaluation.md")]
pub mod evaluation {}
#[doc = include_str!("../../../book/src/tts.md")]
pub mod tts {}
#[doc = include_str!("../../../book/src/pipeline.md")]
pub mod pipeline {}
