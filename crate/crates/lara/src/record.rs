//! Records: named tuples of scalars.

use std::collections::BTreeMap;
use std::collections::BTreeSet;
use std::fmt;

use crate::error::{LaraError, Result};
use crate::scalar::Scalar;

/// A record is a tuple whose components are identified by unique names.
/// Component order is irrelevant: records compare equal when their
/// name-to-value maps coincide.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Record {
    fields: BTreeMap<String, Scalar>,
}

impl Record {
    pub fn new() -> Record {
        Record::default()
    }

    pub fn empty() -> Record {
        Record::default()
    }

    pub fn from_pairs<I, N, S>(pairs: I) -> Record
    where
        I: IntoIterator<Item = (N, S)>,
        N: Into<String>,
        S: Into<Scalar>,
    {
        Record {
            fields: pairs
                .into_iter()
                .map(|(n, v)| (n.into(), v.into()))
                .collect(),
        }
    }

    pub fn set(&mut self, name: impl Into<String>, value: impl Into<Scalar>) {
        self.fields.insert(name.into(), value.into());
    }

    pub fn get(&self, name: &str) -> Option<&Scalar> {
        self.fields.get(name)
    }

    pub fn header(&self) -> BTreeSet<&str> {
        self.fields.keys().map(String::as_str).collect()
    }

    pub fn len(&self) -> usize {
        self.fields.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fields.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Scalar)> {
        self.fields.iter().map(|(n, v)| (n.as_str(), v))
    }

    /// Projection onto the named components (pi_H in record notation).
    pub fn project<'a, I: IntoIterator<Item = &'a str>>(&self, names: I) -> Result<Record> {
        let mut fields = BTreeMap::new();
        for name in names {
            match self.fields.get(name) {
                Some(v) => {
                    fields.insert(name.to_string(), v.clone());
                }
                None => {
                    return Err(LaraError::schema(format!(
                        "projection of unknown attribute `{name}`"
                    )))
                }
            }
        }
        Ok(Record { fields })
    }

    /// Concatenation of records with disjoint headers (the `.` operator).
    pub fn concat(&self, other: &Record) -> Result<Record> {
        let mut fields = self.fields.clone();
        for (name, value) in &other.fields {
            if fields.insert(name.clone(), value.clone()).is_some() {
                return Err(LaraError::schema(format!(
                    "concatenation of records with overlapping attribute `{name}`"
                )));
            }
        }
        Ok(Record { fields })
    }

    /// Componentwise equality with real tolerance.
    pub fn approx_eq(&self, other: &Record) -> bool {
        self.fields.len() == other.fields.len()
            && self.fields.iter().all(|(name, value)| {
                other.fields.get(name).is_some_and(|v| value.approx_eq(v))
            })
    }
}

impl fmt::Display for Record {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, (name, value)) in self.fields.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{name}: {value}")?;
        }
        write!(f, ")")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn weather() -> Record {
        Record::from_pairs([
            ("temperature", Scalar::Real(73.5)),
            ("coverage", Scalar::text("low")),
            ("humidity", Scalar::Real(0.75)),
        ])
    }

    #[test]
    fn projection_keeps_named_components() {
        let r = weather().project(["humidity"]).unwrap();
        assert_eq!(r, Record::from_pairs([("humidity", Scalar::Real(0.75))]));
    }

    #[test]
    fn projection_onto_empty_header() {
        assert_eq!(weather().project([]).unwrap(), Record::empty());
    }

    #[test]
    fn projection_onto_full_header_is_identity() {
        let r = weather();
        let names: Vec<&str> = r.header().into_iter().collect();
        assert_eq!(r.project(names).unwrap(), r);
    }

    #[test]
    fn projection_of_unknown_name_fails() {
        assert!(weather().project(["windspeed"]).is_err());
    }

    #[test]
    fn concat_disjoint_headers() {
        let a = Record::from_pairs([("humidity", Scalar::Real(0.75))]);
        let b = Record::from_pairs([("coverage", Scalar::text("low"))]);
        let got = a.concat(&b).unwrap();
        assert_eq!(
            got,
            Record::from_pairs([
                ("coverage", Scalar::text("low")),
                ("humidity", Scalar::Real(0.75)),
            ])
        );
    }

    #[test]
    fn concat_empty_is_identity() {
        let r = weather();
        assert_eq!(r.concat(&Record::empty()).unwrap(), r);
        assert_eq!(
            Record::empty().concat(&Record::empty()).unwrap(),
            Record::empty()
        );
    }

    #[test]
    fn concat_overlapping_headers_fails() {
        assert!(weather().concat(&weather()).is_err());
    }

    #[test]
    fn component_order_does_not_matter() {
        let a = Record::from_pairs([("x", 1i64), ("y", 2i64)]);
        let b = Record::from_pairs([("y", 2i64), ("x", 1i64)]);
        assert_eq!(a, b);
    }
}
