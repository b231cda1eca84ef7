//! Least-squares repair of integer attributes under denial constraints.
//!
//! The pipeline: parse a schema and constraints ([`lang`]), load an
//! [`Instance`], then either search for all least-squares fixes exactly
//! ([`exact`]), approximate through weighted set cover ([`cover`]), or answer
//! queries over the set of fixes ([`query`], [`gf2`]).

pub mod cli;
pub mod cover;
pub mod error;
pub mod exact;
pub mod gf2;
pub mod io;
pub mod lang;
pub(crate) mod matching;
pub mod model;
pub mod query;
pub mod rational;
pub mod repair;
pub mod report;

pub use error::{Error, Result};
pub use model::{AttrKind, AttributeSpec, DataType, Instance, RelationSchema, Schema, Tuple, TupleId, Value};
pub use rational::Rational;
