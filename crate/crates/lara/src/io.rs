//! Reading and writing tables: delimited text with a TOML schema sidecar,
//! and sparse integer-triple export with per-dimension lookup tables.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{LaraError, Result};
use crate::ops::OpMap;
use crate::scalar::{Kind, Scalar};
use crate::schema::{KeyAttr, TableSchema, ValueAttr};
use crate::table::AssociativeTable;

/// Schema sidecar: attribute roles, kinds, and defaults for a delimited
/// file. Defaults are written as strings and parsed by kind.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SchemaSidecar {
    #[serde(default)]
    pub keys: Vec<SidecarKey>,
    #[serde(default)]
    pub values: Vec<SidecarValue>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SidecarKey {
    pub name: String,
    pub kind: Kind,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SidecarValue {
    pub name: String,
    pub kind: Kind,
    pub default: String,
}

impl SchemaSidecar {
    pub fn parse(text: &str) -> Result<SchemaSidecar> {
        toml::from_str(text).map_err(|e| LaraError::Parse {
            line: 0,
            message: format!("schema sidecar: {e}"),
        })
    }

    pub fn from_schema(schema: &TableSchema) -> SchemaSidecar {
        SchemaSidecar {
            keys: schema
                .key_attrs()
                .iter()
                .map(|k| SidecarKey {
                    name: k.name.clone(),
                    kind: k.kind,
                })
                .collect(),
            values: schema
                .value_attrs()
                .iter()
                .map(|v| SidecarValue {
                    name: v.name.clone(),
                    kind: v.kind,
                    default: v.default.to_string(),
                })
                .collect(),
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("sidecar serializes")
    }

    pub fn schema(&self) -> Result<TableSchema> {
        let keys = self
            .keys
            .iter()
            .map(|k| KeyAttr {
                name: k.name.clone(),
                kind: k.kind,
            })
            .collect();
        let mut values = Vec::new();
        for v in &self.values {
            values.push(ValueAttr {
                name: v.name.clone(),
                kind: v.kind,
                default: Scalar::parse(v.kind, &v.default)?,
            });
        }
        TableSchema::new(keys, values)
    }
}

/// Read a delimited file with a header line. Every column must be declared
/// in the sidecar; repeated keys are merged per value attribute with the
/// collision operator.
pub fn read_delimited(
    reader: impl BufRead,
    delimiter: char,
    sidecar: &SchemaSidecar,
    collision: &OpMap,
) -> Result<AssociativeTable> {
    let schema = sidecar.schema()?;
    let mut lines = reader.lines().enumerate();
    let Some((_, header)) = lines.next() else {
        return Err(LaraError::Parse {
            line: 1,
            message: "missing header line".into(),
        });
    };
    let header = header.map_err(LaraError::from)?;
    let columns: Vec<&str> = header.split(delimiter).map(str::trim).collect();

    enum Col {
        Key(usize, Kind),
        Value(usize, Kind),
    }
    let mut layout = Vec::with_capacity(columns.len());
    for c in &columns {
        if let Some(i) = schema.key_index(c) {
            layout.push(Col::Key(i, schema.key_attrs()[i].kind));
        } else if let Some(i) = schema.value_index(c) {
            layout.push(Col::Value(i, schema.value_attrs()[i].kind));
        } else {
            return Err(LaraError::Parse {
                line: 1,
                message: format!("column `{c}` is not declared in the schema sidecar"),
            });
        }
    }

    let mut out = AssociativeTable::new(schema.clone());
    let mut rows: BTreeMap<Vec<Scalar>, Vec<Scalar>> = BTreeMap::new();
    for (idx, line) in lines {
        let lineno = idx + 1;
        let line = line.map_err(LaraError::from)?;
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(delimiter).collect();
        if fields.len() != layout.len() {
            return Err(LaraError::Parse {
                line: lineno,
                message: format!(
                    "expected {} fields, found {}",
                    layout.len(),
                    fields.len()
                ),
            });
        }
        let mut key = schema
            .key_attrs()
            .iter()
            .map(|_| Scalar::Int(0))
            .collect::<Vec<_>>();
        let mut val = schema.default_row();
        for (field, col) in fields.iter().zip(&layout) {
            let field = field.trim();
            match col {
                Col::Key(i, kind) => {
                    key[*i] = Scalar::parse(*kind, field).map_err(|e| LaraError::Parse {
                        line: lineno,
                        message: e.to_string(),
                    })?
                }
                Col::Value(i, kind) => {
                    val[*i] = Scalar::parse(*kind, field).map_err(|e| LaraError::Parse {
                        line: lineno,
                        message: e.to_string(),
                    })?
                }
            }
        }
        match rows.get_mut(&key) {
            None => {
                rows.insert(key, val);
            }
            Some(existing) => {
                for (i, v) in schema.value_attrs().iter().enumerate() {
                    let Some(op) = collision.get(&v.name) else {
                        return Err(LaraError::Parse {
                            line: lineno,
                            message: format!(
                                "repeated key with no collision operator for `{}`",
                                v.name
                            ),
                        });
                    };
                    existing[i] = op.eval(&existing[i], &val[i])?;
                }
            }
        }
    }
    for (k, v) in rows {
        out.insert_row(k, v)?;
    }
    Ok(out.canonicalize())
}

/// Write the support rows in canonical key order with a header line.
pub fn write_delimited(
    table: &AssociativeTable,
    writer: &mut impl Write,
    delimiter: char,
) -> Result<()> {
    let schema = table.schema();
    let sep = delimiter.to_string();
    let header: Vec<String> = schema
        .key_attrs()
        .iter()
        .map(|k| k.name.clone())
        .chain(schema.value_attrs().iter().map(|v| v.name.clone()))
        .collect();
    writeln!(writer, "{}", header.join(&sep))?;
    for (k, v) in table.support_rows() {
        let fields: Vec<String> = k.iter().chain(v.iter()).map(Scalar::to_string).collect();
        writeln!(writer, "{}", fields.join(&sep))?;
    }
    Ok(())
}

pub fn read_delimited_file(
    path: &Path,
    delimiter: char,
    sidecar_path: &Path,
    collision: &OpMap,
) -> Result<AssociativeTable> {
    let sidecar = SchemaSidecar::parse(&fs::read_to_string(sidecar_path)?)?;
    let file = fs::File::open(path)?;
    read_delimited(std::io::BufReader::new(file), delimiter, &sidecar, collision)
}

pub fn write_delimited_file(table: &AssociativeTable, path: &Path, delimiter: char) -> Result<()> {
    let mut file = fs::File::create(path)?;
    write_delimited(table, &mut file, delimiter)
}

// ---------------------------------------------------------------------------
// Integer-triple export
// ---------------------------------------------------------------------------

/// Sparse-tensor style export: every key attribute and every value attribute
/// gets a dense 1-based integer id space, assigned in canonical order over
/// the distinct scalars appearing in the support.
#[derive(Debug, Clone, PartialEq)]
pub struct TripleExport {
    /// Per key attribute: id `i+1` denotes lookup[i].
    pub key_lookups: Vec<(String, Vec<Scalar>)>,
    /// Per value attribute: id `i+1` denotes lookup[i].
    pub value_lookups: Vec<(String, Vec<Scalar>)>,
    /// One row per support row: key ids then value ids.
    pub triples: Vec<(Vec<usize>, Vec<usize>)>,
}

pub fn to_triples(table: &AssociativeTable) -> TripleExport {
    let schema = table.schema();
    fn dense<'a>(
        column: impl Iterator<Item = &'a Scalar>,
    ) -> (Vec<Scalar>, BTreeMap<Scalar, usize>) {
        let distinct: std::collections::BTreeSet<&Scalar> = column.collect();
        let lookup: Vec<Scalar> = distinct.iter().map(|s| (*s).clone()).collect();
        let ids = distinct
            .into_iter()
            .enumerate()
            .map(|(i, s)| (s.clone(), i + 1))
            .collect();
        (lookup, ids)
    }

    let mut key_lookups = Vec::new();
    let mut key_ids = Vec::new();
    for (i, k) in schema.key_attrs().iter().enumerate() {
        let (lookup, ids) = dense(table.support_rows().map(|(kr, _)| &kr[i]));
        key_lookups.push((k.name.clone(), lookup));
        key_ids.push(ids);
    }
    let mut value_lookups = Vec::new();
    let mut value_ids = Vec::new();
    for (i, v) in schema.value_attrs().iter().enumerate() {
        let (lookup, ids) = dense(table.support_rows().map(|(_, vr)| &vr[i]));
        value_lookups.push((v.name.clone(), lookup));
        value_ids.push(ids);
    }

    let triples = table
        .support_rows()
        .map(|(k, v)| {
            (
                k.iter().enumerate().map(|(i, s)| key_ids[i][s]).collect(),
                v.iter().enumerate().map(|(i, s)| value_ids[i][s]).collect(),
            )
        })
        .collect();
    TripleExport {
        key_lookups,
        value_lookups,
        triples,
    }
}

pub fn from_triples(export: &TripleExport, schema: &TableSchema) -> Result<AssociativeTable> {
    if export.key_lookups.len() != schema.key_attrs().len()
        || export.value_lookups.len() != schema.value_attrs().len()
    {
        return Err(LaraError::schema(
            "triple export does not match the schema's attribute counts".to_string(),
        ));
    }
    let resolve = |lookup: &[Scalar], id: usize, attr: &str| -> Result<Scalar> {
        lookup
            .get(id.checked_sub(1).ok_or_else(|| {
                LaraError::eval(format!("id 0 out of range for `{attr}`"))
            })?)
            .cloned()
            .ok_or_else(|| LaraError::eval(format!("id {id} out of range for `{attr}`")))
    };
    let mut out = AssociativeTable::new(schema.clone());
    for (kids, vids) in &export.triples {
        let mut key = Vec::with_capacity(kids.len());
        for (i, id) in kids.iter().enumerate() {
            let (name, lookup) = &export.key_lookups[i];
            key.push(resolve(lookup, *id, name)?);
        }
        let mut val = Vec::with_capacity(vids.len());
        for (i, id) in vids.iter().enumerate() {
            let (name, lookup) = &export.value_lookups[i];
            val.push(resolve(lookup, *id, name)?);
        }
        out.insert_row(key, val)?;
    }
    Ok(out.canonicalize())
}

impl TripleExport {
    /// Write `<base>.triples.tsv` plus one lookup TSV per dimension.
    pub fn write_dir(&self, dir: &Path, base: &str) -> Result<()> {
        fs::create_dir_all(dir)?;
        let mut f = fs::File::create(dir.join(format!("{base}.triples.tsv")))?;
        for (kids, vids) in &self.triples {
            let fields: Vec<String> = kids.iter().chain(vids).map(usize::to_string).collect();
            writeln!(f, "{}", fields.join("\t"))?;
        }
        let write_lookup = |role: &str, name: &str, lookup: &[Scalar]| -> Result<()> {
            let mut f = fs::File::create(dir.join(format!("{base}.{role}.{name}.tsv")))?;
            for (i, s) in lookup.iter().enumerate() {
                writeln!(f, "{}\t{s}", i + 1)?;
            }
            Ok(())
        };
        for (name, lookup) in &self.key_lookups {
            write_lookup("key", name, lookup)?;
        }
        for (name, lookup) in &self.value_lookups {
            write_lookup("value", name, lookup)?;
        }
        Ok(())
    }

    /// Read back what `write_dir` produced, with the schema supplying kinds.
    pub fn read_dir(dir: &Path, base: &str, schema: &TableSchema) -> Result<TripleExport> {
        let read_lookup = |role: &str, name: &str, kind: Kind| -> Result<Vec<Scalar>> {
            let path = dir.join(format!("{base}.{role}.{name}.tsv"));
            let text = fs::read_to_string(&path)?;
            let mut lookup = Vec::new();
            for (idx, line) in text.lines().enumerate() {
                let Some((id, value)) = line.split_once('\t') else {
                    return Err(LaraError::Parse {
                        line: idx + 1,
                        message: format!("malformed lookup row in {}", path.display()),
                    });
                };
                if id.parse::<usize>() != Ok(idx + 1) {
                    return Err(LaraError::Parse {
                        line: idx + 1,
                        message: "lookup ids must be dense and 1-based".into(),
                    });
                }
                lookup.push(Scalar::parse(kind, value)?);
            }
            Ok(lookup)
        };
        let mut key_lookups = Vec::new();
        for k in schema.key_attrs() {
            key_lookups.push((k.name.clone(), read_lookup("key", &k.name, k.kind)?));
        }
        let mut value_lookups = Vec::new();
        for v in schema.value_attrs() {
            value_lookups.push((v.name.clone(), read_lookup("value", &v.name, v.kind)?));
        }
        let text = fs::read_to_string(dir.join(format!("{base}.triples.tsv")))?;
        let mut triples = Vec::new();
        let nk = schema.key_attrs().len();
        for (idx, line) in text.lines().enumerate() {
            let ids: Vec<usize> = line
                .split('\t')
                .map(|f| {
                    f.parse::<usize>().map_err(|_| LaraError::Parse {
                        line: idx + 1,
                        message: format!("bad id `{f}`"),
                    })
                })
                .collect::<Result<_>>()?;
            if ids.len() != nk + schema.value_attrs().len() {
                return Err(LaraError::Parse {
                    line: idx + 1,
                    message: "wrong number of ids in triple row".into(),
                });
            }
            triples.push((ids[..nk].to_vec(), ids[nk..].to_vec()));
        }
        Ok(TripleExport {
            key_lookups,
            value_lookups,
            triples,
        })
    }
}
