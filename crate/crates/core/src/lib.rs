//! Comic dialogue to character voice jobs.
//!
//! The crate takes annotated comic pages through layout analysis, perception
//! channels (OCR, character identity, emotion intensity), per-page LLM speaker
//! and emotion attribution with a rolling plot memory, evaluation against
//! linked ground truth, and finally TTS job planning.

pub mod annotation;
pub mod attribution;
pub mod baselines;
pub mod error;
pub mod evaluation;
pub mod geometry;
pub mod labels;
pub mod layout;
pub mod perception;
pub mod seed;
pub mod tts;
pub mod pipeline;
pub mod synth;
