//! Table schemas: key attributes plus value attributes with defaults.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{LaraError, Result};
use crate::record::Record;
use crate::scalar::{Kind, Scalar};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeyAttr {
    pub name: String,
    pub kind: Kind,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValueAttr {
    pub name: String,
    pub kind: Kind,
    pub default: Scalar,
}

/// Schema of an associative table: an ordered key header and an ordered value
/// header with a default value per value attribute. Key and value headers are
/// disjoint.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableSchema {
    key_attrs: Vec<KeyAttr>,
    value_attrs: Vec<ValueAttr>,
}

impl TableSchema {
    pub fn new(key_attrs: Vec<KeyAttr>, value_attrs: Vec<ValueAttr>) -> Result<TableSchema> {
        let mut seen = BTreeSet::new();
        for name in key_attrs
            .iter()
            .map(|k| &k.name)
            .chain(value_attrs.iter().map(|v| &v.name))
        {
            if !seen.insert(name.clone()) {
                return Err(LaraError::schema(format!(
                    "duplicate attribute name `{name}` in schema"
                )));
            }
        }
        for v in &value_attrs {
            if v.default.kind() != v.kind {
                return Err(LaraError::schema(format!(
                    "default value for `{}` has kind {}, expected {}",
                    v.name,
                    v.default.kind(),
                    v.kind
                )));
            }
        }
        Ok(TableSchema {
            key_attrs,
            value_attrs,
        })
    }

    /// Convenience constructor from `(name, kind)` keys and
    /// `(name, default)` values (value kind inferred from the default).
    pub fn build<'a>(
        keys: impl IntoIterator<Item = (&'a str, Kind)>,
        values: impl IntoIterator<Item = (&'a str, Scalar)>,
    ) -> Result<TableSchema> {
        TableSchema::new(
            keys.into_iter()
                .map(|(name, kind)| KeyAttr {
                    name: name.to_string(),
                    kind,
                })
                .collect(),
            values
                .into_iter()
                .map(|(name, default)| ValueAttr {
                    name: name.to_string(),
                    kind: default.kind(),
                    default,
                })
                .collect(),
        )
    }

    pub fn key_attrs(&self) -> &[KeyAttr] {
        &self.key_attrs
    }

    pub fn value_attrs(&self) -> &[ValueAttr] {
        &self.value_attrs
    }

    pub fn key_names(&self) -> BTreeSet<&str> {
        self.key_attrs.iter().map(|k| k.name.as_str()).collect()
    }

    pub fn value_names(&self) -> BTreeSet<&str> {
        self.value_attrs.iter().map(|v| v.name.as_str()).collect()
    }

    pub fn key_kind(&self, name: &str) -> Option<Kind> {
        self.key_attrs
            .iter()
            .find(|k| k.name == name)
            .map(|k| k.kind)
    }

    pub fn value_attr(&self, name: &str) -> Option<&ValueAttr> {
        self.value_attrs.iter().find(|v| v.name == name)
    }

    pub fn key_index(&self, name: &str) -> Option<usize> {
        self.key_attrs.iter().position(|k| k.name == name)
    }

    pub fn value_index(&self, name: &str) -> Option<usize> {
        self.value_attrs.iter().position(|v| v.name == name)
    }

    /// The default value record (0-bar).
    pub fn default_record(&self) -> Record {
        Record::from_pairs(
            self.value_attrs
                .iter()
                .map(|v| (v.name.clone(), v.default.clone())),
        )
    }

    pub fn default_row(&self) -> Vec<Scalar> {
        self.value_attrs.iter().map(|v| v.default.clone()).collect()
    }

    /// Validate a key record and lay it out in schema key order.
    pub fn key_to_row(&self, key: &Record) -> Result<Vec<Scalar>> {
        if key.len() != self.key_attrs.len() {
            return Err(LaraError::schema(format!(
                "key record {key} does not match key header {:?}",
                self.key_names()
            )));
        }
        self.key_attrs
            .iter()
            .map(|attr| match key.get(&attr.name) {
                Some(v) if v.kind() == attr.kind => Ok(v.clone()),
                Some(v) => Err(LaraError::schema(format!(
                    "key attribute `{}` has kind {}, expected {}",
                    attr.name,
                    v.kind(),
                    attr.kind
                ))),
                None => Err(LaraError::schema(format!(
                    "key record missing attribute `{}`",
                    attr.name
                ))),
            })
            .collect()
    }

    /// Validate a value record and lay it out in schema value order.
    pub fn value_to_row(&self, value: &Record) -> Result<Vec<Scalar>> {
        if value.len() != self.value_attrs.len() {
            return Err(LaraError::schema(format!(
                "value record {value} does not match value header {:?}",
                self.value_names()
            )));
        }
        self.value_attrs
            .iter()
            .map(|attr| match value.get(&attr.name) {
                Some(v) if v.kind() == attr.kind => Ok(v.clone()),
                Some(v) => Err(LaraError::schema(format!(
                    "value attribute `{}` has kind {}, expected {}",
                    attr.name,
                    v.kind(),
                    attr.kind
                ))),
                None => Err(LaraError::schema(format!(
                    "value record missing attribute `{}`",
                    attr.name
                ))),
            })
            .collect()
    }

    pub fn key_row_to_record(&self, row: &[Scalar]) -> Record {
        Record::from_pairs(
            self.key_attrs
                .iter()
                .zip(row)
                .map(|(attr, v)| (attr.name.clone(), v.clone())),
        )
    }

    pub fn value_row_to_record(&self, row: &[Scalar]) -> Record {
        Record::from_pairs(
            self.value_attrs
                .iter()
                .zip(row)
                .map(|(attr, v)| (attr.name.clone(), v.clone())),
        )
    }

    /// Order-insensitive schema equivalence: same key name/kind map and same
    /// value name/kind/default map.
    pub fn equivalent(&self, other: &TableSchema) -> bool {
        if self.key_attrs.len() != other.key_attrs.len()
            || self.value_attrs.len() != other.value_attrs.len()
        {
            return false;
        }
        self.key_attrs
            .iter()
            .all(|k| other.key_kind(&k.name) == Some(k.kind))
            && self.value_attrs.iter().all(|v| {
                other
                    .value_attr(&v.name)
                    .is_some_and(|o| o.kind == v.kind && o.default.approx_eq(&v.default))
            })
    }
}
