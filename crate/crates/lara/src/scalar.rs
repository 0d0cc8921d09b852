//! Scalar values and their kinds.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

/// Absolute tolerance for comparing real scalars.
pub const REAL_TOLERANCE: f64 = 1e-9;

/// The storage kind of a scalar value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Bool,
    Int,
    Real,
    Text,
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Kind::Bool => "bool",
            Kind::Int => "int",
            Kind::Real => "real",
            Kind::Text => "text",
        };
        f.write_str(s)
    }
}

impl Kind {
    pub fn parse(s: &str) -> Option<Kind> {
        match s {
            "bool" => Some(Kind::Bool),
            "int" => Some(Kind::Int),
            "real" => Some(Kind::Real),
            "text" => Some(Kind::Text),
            _ => None,
        }
    }
}

/// A scalar value stored in an associative table.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Scalar {
    Bool(bool),
    Int(i64),
    Real(f64),
    Text(String),
}

impl Scalar {
    pub fn kind(&self) -> Kind {
        match self {
            Scalar::Bool(_) => Kind::Bool,
            Scalar::Int(_) => Kind::Int,
            Scalar::Real(_) => Kind::Real,
            Scalar::Text(_) => Kind::Text,
        }
    }

    pub fn text(s: impl Into<String>) -> Scalar {
        Scalar::Text(s.into())
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Scalar::Int(i) => Some(*i as f64),
            Scalar::Real(r) => Some(*r),
            _ => None,
        }
    }

    pub fn as_i64(&self) -> Option<i64> {
        match self {
            Scalar::Int(i) => Some(*i),
            _ => None,
        }
    }

    pub fn as_text(&self) -> Option<&str> {
        match self {
            Scalar::Text(t) => Some(t),
            _ => None,
        }
    }

    /// Equality with absolute tolerance on reals, exact elsewhere.
    pub fn approx_eq(&self, other: &Scalar) -> bool {
        match (self, other) {
            (Scalar::Real(a), Scalar::Real(b)) => {
                (a - b).abs() <= REAL_TOLERANCE || (a.is_infinite() && a == b)
            }
            _ => self == other,
        }
    }

    /// Parse a scalar of the given kind from its text form.
    pub fn parse(kind: Kind, s: &str) -> crate::error::Result<Scalar> {
        let parsed = match kind {
            Kind::Bool => match s {
                "true" => Some(Scalar::Bool(true)),
                "false" => Some(Scalar::Bool(false)),
                _ => None,
            },
            Kind::Int => s.parse().ok().map(Scalar::Int),
            Kind::Real => s.parse().ok().map(Scalar::Real),
            Kind::Text => Some(Scalar::Text(s.to_string())),
        };
        parsed.ok_or_else(|| {
            crate::error::LaraError::eval(format!("cannot parse `{s}` as {kind}"))
        })
    }
}

impl fmt::Display for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scalar::Bool(b) => write!(f, "{b}"),
            Scalar::Int(i) => write!(f, "{i}"),
            Scalar::Real(r) => {
                if r.fract() == 0.0 && r.is_finite() && r.abs() < 1e15 {
                    write!(f, "{r:.1}")
                } else {
                    write!(f, "{r}")
                }
            }
            Scalar::Text(s) => f.write_str(s),
        }
    }
}

impl PartialEq for Scalar {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Scalar {}

impl PartialOrd for Scalar {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Total order: bool < int < real < text across kinds, natural order within a
/// kind (reals via `total_cmp`, false < true).
impl Ord for Scalar {
    fn cmp(&self, other: &Self) -> Ordering {
        use Scalar::*;
        match (self, other) {
            (Bool(a), Bool(b)) => a.cmp(b),
            (Int(a), Int(b)) => a.cmp(b),
            (Real(a), Real(b)) => a.total_cmp(b),
            (Text(a), Text(b)) => a.cmp(b),
            _ => self.kind().cmp(&other.kind()),
        }
    }
}

impl std::hash::Hash for Scalar {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.kind().hash(state);
        match self {
            Scalar::Bool(b) => b.hash(state),
            Scalar::Int(i) => i.hash(state),
            Scalar::Real(r) => r.to_bits().hash(state),
            Scalar::Text(s) => s.hash(state),
        }
    }
}

impl From<i64> for Scalar {
    fn from(v: i64) -> Self {
        Scalar::Int(v)
    }
}
impl From<f64> for Scalar {
    fn from(v: f64) -> Self {
        Scalar::Real(v)
    }
}
impl From<bool> for Scalar {
    fn from(v: bool) -> Self {
        Scalar::Bool(v)
    }
}
impl From<&str> for Scalar {
    fn from(v: &str) -> Self {
        Scalar::Text(v.to_string())
    }
}
impl From<String> for Scalar {
    fn from(v: String) -> Self {
        Scalar::Text(v)
    }
}
