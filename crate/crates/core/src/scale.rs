//! Scale training and application. A named scale referenced from several
//! views is trained once over all of its contributors' data, so shared
//! scales have one domain and one range by construction.

use serde::Serialize;
use thiserror::Error;

use crate::spec::{Channel, DomainSpec, RangeSpec, ScaleKind, ScaleSpec};
use crate::value::Value;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScaleError {
    #[error("scale `{0}`: no data and no explicit domain")]
    EmptyDomain(String),
    #[error("scale `{0}`: mixed value types in training data")]
    MixedTypes(String),
    #[error("scale `{0}`: non-numeric value {1} for a linear domain")]
    NonNumeric(String, Value),
    #[error("scale `{scale}`: value {value} outside trained domain")]
    OutOfDomain { scale: String, value: Value },
    #[error("scale `{0}`: identity cannot map text onto a pixel channel")]
    IdentityText(String),
}

/// Domain actually trained from data or fixed by the spec.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum TrainedDomain {
    Interval(f64, f64),
    Categories(Vec<Value>),
    /// Identity scales pass values through untouched.
    Passthrough,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum TrainedRange {
    Interval(f64, f64),
    Palette(Vec<String>),
    Passthrough,
}

/// A scale ready for application, together with the (view, channel) pairs
/// whose data trained it.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedScale {
    pub name: String,
    pub kind: ScaleKind,
    pub domain: TrainedDomain,
    pub range: TrainedRange,
    pub contributors: Vec<(String, Channel)>,
}

/// Result of applying a scale: a pixel quantity or a categorical string
/// (palette entries, pass-through text).
#[derive(Debug, Clone, PartialEq)]
pub enum ScaleOutput {
    Px(f64),
    Str(String),
}

/// Train a scale over the concatenation of its contributing columns, in
/// contribution order. An explicit domain on the spec wins over the data.
/// `default_range` supplies the layout-derived range when the spec has none.
pub fn train(
    spec: &ScaleSpec,
    columns: &[&[Value]],
    default_range: TrainedRange,
    contributors: Vec<(String, Channel)>,
) -> Result<TrainedScale, ScaleError> {
    let values = || columns.iter().flat_map(|c| c.iter());

    let domain = match spec.kind {
        ScaleKind::Identity => TrainedDomain::Passthrough,
        ScaleKind::Linear => match &spec.domain {
            Some(DomainSpec::Interval(lo, hi)) => TrainedDomain::Interval(*lo, *hi),
            Some(DomainSpec::Categories(_)) => {
                return Err(ScaleError::MixedTypes(spec.name.clone()))
            }
            None => {
                let mut lo = f64::INFINITY;
                let mut hi = f64::NEG_INFINITY;
                let mut any = false;
                for v in values() {
                    let x = v
                        .as_f64()
                        .ok_or_else(|| ScaleError::NonNumeric(spec.name.clone(), v.clone()))?;
                    lo = lo.min(x);
                    hi = hi.max(x);
                    any = true;
                }
                if !any {
                    return Err(ScaleError::EmptyDomain(spec.name.clone()));
                }
                TrainedDomain::Interval(lo, hi)
            }
        },
        ScaleKind::Ordinal => match &spec.domain {
            Some(DomainSpec::Categories(cats)) => TrainedDomain::Categories(cats.clone()),
            Some(DomainSpec::Interval(..)) => {
                return Err(ScaleError::MixedTypes(spec.name.clone()))
            }
            None => {
                // Distinct values in first-appearance order across all
                // contributors.
                let mut cats: Vec<Value> = Vec::new();
                let mut kind = None;
                for v in values() {
                    match kind {
                        None => kind = Some(v.kind()),
                        Some(k) if k == v.kind() => {}
                        Some(_) => return Err(ScaleError::MixedTypes(spec.name.clone())),
                    }
                    if !cats.contains(v) {
                        cats.push(v.clone());
                    }
                }
                if cats.is_empty() {
                    return Err(ScaleError::EmptyDomain(spec.name.clone()));
                }
                TrainedDomain::Categories(cats)
            }
        },
    };

    let range = match (&spec.kind, &spec.range) {
        (ScaleKind::Identity, _) => TrainedRange::Passthrough,
        (_, Some(RangeSpec::Interval(lo, hi))) => TrainedRange::Interval(*lo, *hi),
        (_, Some(RangeSpec::Palette(p))) => TrainedRange::Palette(p.clone()),
        (_, None) => default_range,
    };

    Ok(TrainedScale {
        name: spec.name.clone(),
        kind: spec.kind,
        domain,
        range,
        contributors,
    })
}

/// Apply a trained scale to one value. Out-of-domain values are errors, not
/// clamps: a value the scale cannot place has no faithful representation.
pub fn apply(s: &TrainedScale, v: &Value) -> Result<ScaleOutput, ScaleError> {
    match (&s.domain, &s.range) {
        (TrainedDomain::Passthrough, _) => match v {
            Value::Int(i) => Ok(ScaleOutput::Px(*i as f64)),
            Value::Real(r) => Ok(ScaleOutput::Px(*r)),
            Value::Text(t) => Ok(ScaleOutput::Str(t.clone())),
            Value::Bool(b) => Ok(ScaleOutput::Str(b.to_string())),
        },
        (TrainedDomain::Interval(d_lo, d_hi), range) => {
            let x = v.as_f64().ok_or_else(|| ScaleError::OutOfDomain {
                scale: s.name.clone(),
                value: v.clone(),
            })?;
            if x < *d_lo || x > *d_hi {
                return Err(ScaleError::OutOfDomain {
                    scale: s.name.clone(),
                    value: v.clone(),
                });
            }
            let TrainedRange::Interval(r_lo, r_hi) = range else {
                return Err(ScaleError::MixedTypes(s.name.clone()));
            };
            // Degenerate domain maps everything to the range midpoint.
            if d_lo == d_hi {
                return Ok(ScaleOutput::Px((r_lo + r_hi) / 2.0));
            }
            Ok(ScaleOutput::Px(
                r_lo + (x - d_lo) * (r_hi - r_lo) / (d_hi - d_lo),
            ))
        }
        (TrainedDomain::Categories(cats), range) => {
            let idx = cats
                .iter()
                .position(|c| c == v)
                .ok_or_else(|| ScaleError::OutOfDomain {
                    scale: s.name.clone(),
                    value: v.clone(),
                })?;
            match range {
                // Band centers: position i of n maps to the center of the
                // i-th of n equal bands.
                TrainedRange::Interval(lo, hi) => {
                    let n = cats.len() as f64;
                    Ok(ScaleOutput::Px(
                        lo + (idx as f64 + 0.5) * (hi - lo) / n,
                    ))
                }
                TrainedRange::Palette(p) => Ok(ScaleOutput::Str(p[idx % p.len()].clone())),
                TrainedRange::Passthrough => Err(ScaleError::MixedTypes(s.name.clone())),
            }
        }
    }
}
