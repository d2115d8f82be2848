//! A guided tour of the library, mirrored from the `book/` directory.
//!
//! Each module below holds one chapter of the guide. The chapters are the
//! same Markdown files that `mdbook` renders, included verbatim — so the
//! code blocks in the book compile and run as doc-tests of this crate and
//! cannot drift away from the real API.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/metrics.md")]
pub mod metrics {}

#[doc = include_str!("../../../book/src/curves.md")]
pub mod curves {}

#[doc = include_str!("../../../book/src/schemes.md")]
pub mod schemes {}

#[doc = include_str!("../../../book/src/reference-solutions.md")]
pub mod reference_solutions {}

#[doc = include_str!("../../../book/src/harness.md")]
pub mod running_simulations {}
