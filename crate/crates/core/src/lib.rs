//! Coal phase-out pathways for a national power system, the economy-wide
//! electrification they induce, and the emissions both leave behind.
//!
//! A run goes scenario → [`expansion`] plan → [`enduse`] response →
//! [`ledger`] → [`parity`] years, wired together in [`pipeline`].

// `!(x >= 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod data;
pub mod enduse;
pub mod error;
pub mod expansion;
pub mod ledger;
pub mod lp;
pub mod parity;
pub mod pipeline;
pub mod plot;
pub mod report;
pub mod power;
pub mod scenario;
pub mod time;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/scenarios.md")]
    mod scenarios {}
    #[doc = include_str!("../../../book/src/expansion.md")]
    mod expansion {}
    #[doc = include_str!("../../../book/src/enduse.md")]
    mod enduse {}
    #[doc = include_str!("../../../book/src/ledger.md")]
    mod ledger {}
    #[doc = include_str!("../../../book/src/parity.md")]
    mod parity {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
    #[doc = include_str!("../../../book/src/data.md")]
    mod data {}
}
