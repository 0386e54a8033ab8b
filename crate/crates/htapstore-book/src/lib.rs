//! Doc-test shim for the guide in `book/`.
//!
//! mdBook does not run example code against the workspace crates, so
//! each chapter is included here as module documentation and its code
//! blocks execute under `cargo test --doc`. A failing chapter snippet
//! fails the build, which keeps the book in sync with the library.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/mixed-format-store.md")]
pub mod mixed_format_store {}

#[doc = include_str!("../../../book/src/split-wal.md")]
pub mod split_wal {}

#[doc = include_str!("../../../book/src/transactions.md")]
pub mod transactions {}

#[doc = include_str!("../../../book/src/queries.md")]
pub mod queries {}

#[doc = include_str!("../../../book/src/near-data-learning.md")]
pub mod near_data_learning {}

#[doc = include_str!("../../../book/src/transfer-model.md")]
pub mod transfer_model {}

#[doc = include_str!("../../../book/src/benchmarking.md")]
pub mod benchmarking {}
