//! # paradox
//!
//! A toolkit for constructing, verifying, and scoring adversarial
//! paralinguistic speech benchmarks: multiple-choice items whose transcript
//! deliberately asserts the wrong paralinguistic attribute while the audio
//! conveys the true one. Alongside the benchmark pipeline it ships a
//! desk-scale numerics lab: layer-wise representation probing, a
//! prompt-conditioned layer mixer with verified algebra, and a preference
//! (DPO) loss with checked gradients.
//!
//! The pieces compose left to right:
//!
//! ```text
//! scripts -> synthesis -> transforms -> items -> verify -> manifest -> score
//! ```
//!
//! Everything runs offline against deterministic stub providers; HTTP
//! adapters plug in real TTS/ASR/LLM/emotion services when credentials are
//! configured. All randomized steps are seeded, so a build reproduces
//! byte-for-byte.
//!
//! Start with the runnable programs in `examples/`, one per capability.

pub mod audio;
pub mod bench;
pub mod config;
pub mod error;
pub mod eval;
pub mod mixer;
pub mod pipeline;
pub mod probe;
pub mod providers;
pub mod text;
pub mod verify;

mod nn;
mod seeded;
mod task;

pub use error::{Error, Result};
pub use seeded::{derive_seed, hash_str, rng_for};
pub use task::{reverse_pattern, TaskKind, COMPARISON_PATTERNS};
