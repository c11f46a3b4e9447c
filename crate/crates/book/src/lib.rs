//! mdbook cannot run listings that depend on a workspace crate, so every
//! chapter is pulled in here as module docs and `cargo test --doc` checks it.

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[cfg(doctest)]
#[doc = include_str!("../../../book/src/models.md")]
pub mod models {}
#[cfg(doctest)]
#[doc = include_str!("../../../book/src/filters.md")]
pub mod filters {}
#[cfg(doctest)]
#[doc = include_str!("../../../book/src/costs.md")]
pub mod costs {}
#[cfg(doctest)]
#[doc = include_str!("../../../book/src/dynamic-programming.md")]
pub mod dynamic_programming {}
#[cfg(doctest)]
#[doc = include_str!("../../../book/src/monte-carlo.md")]
pub mod monte_carlo {}
#[cfg(doctest)]
#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
