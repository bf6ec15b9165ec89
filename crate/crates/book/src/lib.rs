//! The guide in `book/` is plain mdbook, which cannot run samples that depend
//! on workspace crates. Each chapter is included here as a module doc so
//! `cargo test --doc` checks every snippet against the current API.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../../book/src/functional-data.md")]
pub mod functional_data {}
#[doc = include_str!("../../../book/src/band-depth.md")]
pub mod band_depth {}
#[doc = include_str!("../../../book/src/local-depth.md")]
pub mod local_depth {}
#[doc = include_str!("../../../book/src/predictors.md")]
pub mod predictors {}
#[doc = include_str!("../../../book/src/reconciliation.md")]
pub mod reconciliation {}
#[doc = include_str!("../../../book/src/simulation.md")]
pub mod simulation {}
#[doc = include_str!("../../../book/src/backtesting.md")]
pub mod backtesting {}
#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
