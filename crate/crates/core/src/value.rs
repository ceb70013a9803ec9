//! Scalar values and attribute domains shared by the relational engine and
//! the visualization compiler.

use std::cmp::Ordering;
use std::fmt;
use std::hash::{Hash, Hasher};

use serde::Serialize;

/// A single cell value. Reals are kept as `f64`; NaN is rejected at
/// ingestion and by expression evaluation, so total ordering via
/// `f64::total_cmp` behaves like an ordinary order in practice.
#[derive(Debug, Clone, Serialize)]
#[serde(untagged)]
pub enum Value {
    Int(i64),
    Real(f64),
    Text(String),
    Bool(bool),
}

/// The four scalar kinds a value or attribute domain can have.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum DomainKind {
    Integer,
    Real,
    Text,
    Boolean,
}

impl fmt::Display for DomainKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            DomainKind::Integer => "integer",
            DomainKind::Real => "real",
            DomainKind::Text => "text",
            DomainKind::Boolean => "boolean",
        };
        f.write_str(s)
    }
}

impl Value {
    pub fn kind(&self) -> DomainKind {
        match self {
            Value::Int(_) => DomainKind::Integer,
            Value::Real(_) => DomainKind::Real,
            Value::Text(_) => DomainKind::Text,
            Value::Bool(_) => DomainKind::Boolean,
        }
    }

    /// Numeric view of the value, if it has one.
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Int(i) => Some(*i as f64),
            Value::Real(r) => Some(*r),
            _ => None,
        }
    }

    pub fn as_text(&self) -> Option<&str> {
        match self {
            Value::Text(s) => Some(s),
            _ => None,
        }
    }

    fn rank(&self) -> u8 {
        match self {
            Value::Int(_) => 0,
            Value::Real(_) => 1,
            Value::Text(_) => 2,
            Value::Bool(_) => 3,
        }
    }
}

impl PartialEq for Value {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Value {}

impl Ord for Value {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Value::Int(a), Value::Int(b)) => a.cmp(b),
            (Value::Real(a), Value::Real(b)) => a.total_cmp(b),
            (Value::Text(a), Value::Text(b)) => a.cmp(b),
            (Value::Bool(a), Value::Bool(b)) => a.cmp(b),
            _ => self.rank().cmp(&other.rank()),
        }
    }
}

impl PartialOrd for Value {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Hash for Value {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.rank().hash(state);
        match self {
            Value::Int(i) => i.hash(state),
            Value::Real(r) => r.to_bits().hash(state),
            Value::Text(s) => s.hash(state),
            Value::Bool(b) => b.hash(state),
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(i) => write!(f, "{i}"),
            Value::Real(r) => write!(f, "{r}"),
            Value::Text(s) => f.write_str(s),
            Value::Bool(b) => write!(f, "{b}"),
        }
    }
}

/// Declared domain of a table attribute. Integer and real domains may carry
/// a closed interval, text domains an enumerated category set.
#[derive(Debug, Clone, PartialEq)]
pub enum AttributeDomain {
    Integer { interval: Option<(i64, i64)> },
    Real { interval: Option<(f64, f64)> },
    Text { categories: Option<Vec<String>> },
    Boolean,
}

impl AttributeDomain {
    pub fn integer() -> Self {
        AttributeDomain::Integer { interval: None }
    }

    pub fn real() -> Self {
        AttributeDomain::Real { interval: None }
    }

    pub fn text() -> Self {
        AttributeDomain::Text { categories: None }
    }

    pub fn kind(&self) -> DomainKind {
        match self {
            AttributeDomain::Integer { .. } => DomainKind::Integer,
            AttributeDomain::Real { .. } => DomainKind::Real,
            AttributeDomain::Text { .. } => DomainKind::Text,
            AttributeDomain::Boolean => DomainKind::Boolean,
        }
    }

    /// Two domains are compatible when they have the same kind; interval and
    /// category refinements do not affect joinability.
    pub fn compatible(&self, other: &AttributeDomain) -> bool {
        self.kind() == other.kind()
    }

    /// Domain membership test for a value.
    pub fn contains(&self, v: &Value) -> bool {
        match (self, v) {
            (AttributeDomain::Integer { interval }, Value::Int(i)) => {
                interval.map_or(true, |(lo, hi)| *i >= lo && *i <= hi)
            }
            (AttributeDomain::Real { interval }, Value::Real(r)) => {
                r.is_finite() && interval.map_or(true, |(lo, hi)| *r >= lo && *r <= hi)
            }
            (AttributeDomain::Real { interval }, Value::Int(i)) => {
                let r = *i as f64;
                interval.map_or(true, |(lo, hi)| r >= lo && r <= hi)
            }
            (AttributeDomain::Text { categories }, Value::Text(s)) => categories
                .as_ref()
                .map_or(true, |cats| cats.iter().any(|c| c == s)),
            (AttributeDomain::Boolean, Value::Bool(_)) => true,
            _ => false,
        }
    }

    /// Whether a category set declaration is well-formed (non-empty,
    /// duplicate-free). Non-text domains are trivially well-formed.
    pub fn categories_well_formed(&self) -> bool {
        match self {
            AttributeDomain::Text {
                categories: Some(cats),
            } => {
                if cats.is_empty() {
                    return false;
                }
                let mut seen = std::collections::HashSet::new();
                cats.iter().all(|c| seen.insert(c.as_str()))
            }
            _ => true,
        }
    }
}
