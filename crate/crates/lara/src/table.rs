//! Associative tables: total maps from key records to value records with
//! finite support.

use std::collections::BTreeMap;
use std::fmt;

use crate::error::{LaraError, Result};
use crate::record::Record;
use crate::scalar::{Kind, Scalar};
use crate::schema::TableSchema;

/// A finite-support total function from key records to value records.
///
/// Entries are stored in canonical key order (lexicographic over the key
/// attributes in schema order). Stored entries may include all-default rows;
/// [`AssociativeTable::canonicalize`] removes them.
#[derive(Debug, Clone)]
pub struct AssociativeTable {
    schema: TableSchema,
    entries: BTreeMap<Vec<Scalar>, Vec<Scalar>>,
}

impl AssociativeTable {
    pub fn new(schema: TableSchema) -> AssociativeTable {
        AssociativeTable {
            schema,
            entries: BTreeMap::new(),
        }
    }

    /// The empty table `E_K`: the given key attributes and no value
    /// attributes. With no keys this is `E`, the table with the one mapping
    /// `() -> ()`.
    pub fn empty_table<'a>(keys: impl IntoIterator<Item = (&'a str, Kind)>) -> AssociativeTable {
        let schema = TableSchema::build(keys, []).expect("key-only schema is always well-formed");
        AssociativeTable::new(schema)
    }

    pub fn schema(&self) -> &TableSchema {
        &self.schema
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Insert a row given as key and value records.
    pub fn insert(&mut self, key: &Record, value: &Record) -> Result<()> {
        let k = self.schema.key_to_row(key)?;
        let v = self.schema.value_to_row(value)?;
        self.entries.insert(k, v);
        Ok(())
    }

    /// Insert a row already laid out in schema order. Rows must match the
    /// schema arity and kinds.
    pub fn insert_row(&mut self, key: Vec<Scalar>, value: Vec<Scalar>) -> Result<()> {
        if key.len() != self.schema.key_attrs().len()
            || value.len() != self.schema.value_attrs().len()
        {
            return Err(LaraError::schema("row arity does not match schema"));
        }
        for (attr, v) in self.schema.key_attrs().iter().zip(&key) {
            if v.kind() != attr.kind {
                return Err(LaraError::schema(format!(
                    "key attribute `{}` has kind {}, expected {}",
                    attr.name,
                    v.kind(),
                    attr.kind
                )));
            }
        }
        for (attr, v) in self.schema.value_attrs().iter().zip(&value) {
            if v.kind() != attr.kind {
                return Err(LaraError::schema(format!(
                    "value attribute `{}` has kind {}, expected {}",
                    attr.name,
                    v.kind(),
                    attr.kind
                )));
            }
        }
        self.entries.insert(key, value);
        Ok(())
    }

    /// Total-function lookup: the stored value if present, the default value
    /// record otherwise. Never "missing".
    pub fn lookup(&self, key: &Record) -> Result<Record> {
        let k = self.schema.key_to_row(key)?;
        Ok(self.schema.value_row_to_record(
            self.entries
                .get(&k)
                .cloned()
                .unwrap_or_else(|| self.schema.default_row())
                .as_slice(),
        ))
    }

    pub fn lookup_row(&self, key: &[Scalar]) -> Vec<Scalar> {
        self.entries
            .get(key)
            .cloned()
            .unwrap_or_else(|| self.schema.default_row())
    }

    fn is_default_row(&self, value: &[Scalar]) -> bool {
        self.schema
            .value_attrs()
            .iter()
            .zip(value)
            .all(|(attr, v)| attr.default.approx_eq(v))
    }

    /// Keys mapping to a non-default value, computed on the canonical form.
    pub fn support(&self) -> Vec<Record> {
        self.support_rows()
            .map(|(k, _)| self.schema.key_row_to_record(k))
            .collect()
    }

    /// Iterator over non-default rows in canonical order.
    pub fn support_rows(&self) -> impl Iterator<Item = (&Vec<Scalar>, &Vec<Scalar>)> {
        self.entries.iter().filter(|(_, v)| !self.is_default_row(v))
    }

    pub fn support_len(&self) -> usize {
        self.support_rows().count()
    }

    /// Remove stored all-default rows. Idempotent; row order is inherent in
    /// the storage.
    pub fn canonicalize(&self) -> AssociativeTable {
        AssociativeTable {
            schema: self.schema.clone(),
            entries: self
                .entries
                .iter()
                .filter(|(_, v)| !self.is_default_row(v))
                .map(|(k, v)| (k.clone(), v.clone()))
                .collect(),
        }
    }

    /// Table equivalence: same headers (order-insensitive), same support,
    /// reals compared at tolerance.
    pub fn tables_equal(&self, other: &AssociativeTable) -> bool {
        if !self.schema.equivalent(&other.schema) {
            return false;
        }
        let a = self.canonicalize();
        let b = other.canonicalize();
        if a.entries.len() != b.entries.len() {
            return false;
        }
        // Align the other table's column order with ours.
        let key_map: Vec<usize> = self
            .schema
            .key_attrs()
            .iter()
            .map(|k| other.schema.key_index(&k.name).expect("equivalent schema"))
            .collect();
        let val_map: Vec<usize> = self
            .schema
            .value_attrs()
            .iter()
            .map(|v| other.schema.value_index(&v.name).expect("equivalent schema"))
            .collect();
        for (k, v) in &a.entries {
            let other_key: Vec<Scalar> = {
                let mut row = vec![Scalar::Int(0); k.len()];
                for (i, s) in k.iter().enumerate() {
                    row[key_map[i]] = s.clone();
                }
                row
            };
            // Real-valued key components need tolerant matching against b.
            let found = b.entries.iter().find(|(bk, _)| {
                bk.iter()
                    .zip(&other_key)
                    .all(|(x, y)| x.approx_eq(y))
            });
            let Some((_, bv)) = found else { return false };
            for (i, s) in v.iter().enumerate() {
                if !s.approx_eq(&bv[val_map[i]]) {
                    return false;
                }
            }
        }
        true
    }

    /// Split into one single-value-attribute table per value attribute.
    pub fn decompose(&self) -> Result<Vec<AssociativeTable>> {
        if self.schema.value_attrs().is_empty() {
            return Err(LaraError::NotDecomposable(
                "table has no value attributes".into(),
            ));
        }
        let mut parts = Vec::new();
        for (i, attr) in self.schema.value_attrs().iter().enumerate() {
            let schema = TableSchema::new(
                self.schema.key_attrs().to_vec(),
                vec![attr.clone()],
            )?;
            let mut t = AssociativeTable::new(schema);
            for (k, v) in &self.entries {
                t.entries.insert(k.clone(), vec![v[i].clone()]);
            }
            parts.push(t.canonicalize());
        }
        Ok(parts)
    }

    /// Recombine single-value-attribute tables over a shared key header.
    /// Inverse of [`decompose`](Self::decompose): key sets coincide and value
    /// headers are disjoint, so no collisions occur.
    pub fn recompose(parts: &[AssociativeTable]) -> Result<AssociativeTable> {
        let Some(first) = parts.first() else {
            return Err(LaraError::schema("cannot recompose zero tables"));
        };
        let mut value_attrs = Vec::new();
        for p in parts {
            if p.schema.key_attrs() != first.schema.key_attrs() {
                return Err(LaraError::schema(
                    "recompose requires identical key headers",
                ));
            }
            value_attrs.extend(p.schema.value_attrs().iter().cloned());
        }
        let schema = TableSchema::new(first.schema.key_attrs().to_vec(), value_attrs)?;
        let mut out = AssociativeTable::new(schema);
        let mut keys: Vec<Vec<Scalar>> = Vec::new();
        for p in parts {
            for k in p.entries.keys() {
                if !keys.contains(k) {
                    keys.push(k.clone());
                }
            }
        }
        for k in keys {
            let mut row = Vec::new();
            for p in parts {
                row.extend(p.lookup_row(&k));
            }
            out.entries.insert(k, row);
        }
        Ok(out.canonicalize())
    }

    /// Raw entry iterator in canonical key order (may include stored
    /// all-default rows).
    pub fn rows(&self) -> impl Iterator<Item = (&Vec<Scalar>, &Vec<Scalar>)> {
        self.entries.iter()
    }
}

impl fmt::Display for AssociativeTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<&str> = self
            .schema
            .key_attrs()
            .iter()
            .map(|k| k.name.as_str())
            .chain(self.schema.value_attrs().iter().map(|v| v.name.as_str()))
            .collect();
        writeln!(f, "{}", names.join("\t"))?;
        for (k, v) in self.support_rows() {
            let cells: Vec<String> = k.iter().chain(v.iter()).map(|s| s.to_string()).collect();
            writeln!(f, "{}", cells.join("\t"))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn lookup_is_total() {
        let p = fixtures::part_table();
        let got = p
            .lookup(&Record::from_pairs([("pid", Scalar::text("p02"))]))
            .unwrap();
        assert_eq!(
            got,
            Record::from_pairs([("color", Scalar::text("red")), ("wgt", Scalar::Int(4))])
        );
        let default = p
            .lookup(&Record::from_pairs([("pid", Scalar::text("p03"))]))
            .unwrap();
        assert_eq!(
            default,
            Record::from_pairs([("color", Scalar::text("white")), ("wgt", Scalar::Int(0))])
        );
    }

    #[test]
    fn empty_tables_have_zero_support() {
        let e = AssociativeTable::empty_table([("src", Kind::Text)]);
        assert!(e.support().is_empty());
        assert_eq!(
            e.lookup(&Record::from_pairs([("src", Scalar::text("x"))]))
                .unwrap(),
            Record::empty()
        );
    }

    #[test]
    fn zero_dimensional_empty_table() {
        let e = AssociativeTable::empty_table([]);
        assert_eq!(e.lookup(&Record::empty()).unwrap(), Record::empty());
    }

    #[test]
    fn request_support() {
        let r = fixtures::request_table();
        assert_eq!(r.support_len(), 2);
    }

    #[test]
    fn spurious_default_rows_are_not_support() {
        let mut p = fixtures::part_table();
        p.insert(
            &Record::from_pairs([("pid", Scalar::text("p76"))]),
            &Record::from_pairs([("color", Scalar::text("white")), ("wgt", Scalar::Int(0))]),
        )
        .unwrap();
        assert_eq!(p.support_len(), 3);
        assert!(p.tables_equal(&fixtures::part_table()));
        let canon = p.canonicalize();
        assert_eq!(canon.len(), 3);
        assert!(canon.tables_equal(&canon.canonicalize()));
    }

    #[test]
    fn tables_equal_detects_changed_value() {
        let p = fixtures::part_table();
        let mut q = p.clone();
        q.insert(
            &Record::from_pairs([("pid", Scalar::text("p01"))]),
            &Record::from_pairs([("color", Scalar::text("blue")), ("wgt", Scalar::Int(9))]),
        )
        .unwrap();
        assert!(!p.tables_equal(&q));
    }

    #[test]
    fn tables_equal_is_column_order_insensitive() {
        let p = fixtures::part_table();
        let schema = TableSchema::build(
            [("pid", Kind::Text)],
            [("wgt", Scalar::Int(0)), ("color", Scalar::text("white"))],
        )
        .unwrap();
        let mut q = AssociativeTable::new(schema);
        for (k, v) in p.rows() {
            q.insert(
                &p.schema().key_row_to_record(k),
                &p.schema().value_row_to_record(v),
            )
            .unwrap();
        }
        assert!(p.tables_equal(&q));
    }

    #[test]
    fn decompose_and_recompose() {
        let p = fixtures::part_table();
        let parts = p.decompose().unwrap();
        assert_eq!(parts.len(), 2);
        let back = AssociativeTable::recompose(&parts).unwrap();
        assert!(back.tables_equal(&p));
    }

    #[test]
    fn decompose_single_value_table() {
        let p = fixtures::part_table();
        let single = p.decompose().unwrap().remove(0);
        let parts = single.decompose().unwrap();
        assert_eq!(parts.len(), 1);
        assert!(parts[0].tables_equal(&single));
    }

    #[test]
    fn decompose_empty_value_header_fails() {
        let e = AssociativeTable::empty_table([("k", Kind::Int)]);
        assert!(e.decompose().is_err());
    }
}
