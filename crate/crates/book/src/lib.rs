//! Compiles the Rust listings of the guide in `book/src` as doctests.
//!
//! mdbook cannot link listings against workspace crates, so each chapter is
//! included as the documentation of an empty module and `cargo test`
//! runs its code blocks.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../../book/src/coherence.md")]
pub mod coherence {}
#[doc = include_str!("../../../book/src/simulation.md")]
pub mod simulation {}
#[doc = include_str!("../../../book/src/correlation.md")]
pub mod correlation {}
#[doc = include_str!("../../../book/src/blinking.md")]
pub mod blinking {}
#[doc = include_str!("../../../book/src/hom.md")]
pub mod hom {}
#[doc = include_str!("../../../book/src/fitting.md")]
pub mod fitting {}
#[doc = include_str!("../../../book/src/spectral.md")]
pub mod spectral {}
#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
