//! Robust clustering with skewed elliptical (RESK) mixture models.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod data;
pub mod em;
pub mod enumeration;
pub mod error;
pub mod evaluate;
pub mod family;
pub mod numerics;
pub mod par;
pub mod resk;
pub mod simulate;

pub use data::DataSet;
pub use error::{Error, Result};
pub use family::{FamilyKind, FamilySpec};
