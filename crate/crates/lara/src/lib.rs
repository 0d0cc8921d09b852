//! Associative tables: totally-defined keyed collections with per-attribute
//! default values, combined by three parameterized operators — union
//! (aggregating), strict join (multiplying), and ext (flatmapping) — plus
//! the derived forms built from them.

pub mod derived;
pub mod error;
pub mod fixtures;
pub mod io;
pub mod ops;
pub mod record;
pub mod rewrite;
pub mod scalar;
pub mod schema;
pub mod table;

pub use error::{LaraError, Result};
pub use record::Record;
pub use scalar::{Kind, Scalar};
pub use schema::{KeyAttr, TableSchema, ValueAttr};
pub use table::AssociativeTable;
