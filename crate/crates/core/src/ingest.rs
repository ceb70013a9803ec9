//! Data ingestion: one file per table, CSV (RFC 4180, header row required)
//! or a JSON array of flat objects. Strings are coerced to the declared
//! attribute domain; any parse failure is a load error naming file, row,
//! and column. Missing values are rejected — there are no NULLs.

use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::relational::{Database, ForeignKey, RelationalError, Table};
use crate::spec::{json, ConstraintDecl, SpecDocument, TableDecl};
use crate::value::{AttributeDomain, DomainKind, Value};

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("no data file for table `{table}` in {dir} (tried {table}.csv, {table}.json)")]
    MissingFile { table: String, dir: String },
    #[error("{file}: {source}")]
    Io {
        file: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{file}: {message}")]
    Structure { file: String, message: String },
    #[error("{file}: row {row}, column `{column}`: {message}")]
    Cell {
        file: String,
        row: usize,
        column: String,
        message: String,
    },
    #[error(transparent)]
    Relational(#[from] RelationalError),
}

fn coerce_text(
    domain: &AttributeDomain,
    raw: &str,
) -> Result<Value, String> {
    if raw.is_empty() {
        return Err("missing value (empty cell)".to_string());
    }
    let value = match domain.kind() {
        DomainKind::Integer => raw
            .trim()
            .parse::<i64>()
            .map(Value::Int)
            .map_err(|e| format!("expected integer, got `{raw}` ({e})"))?,
        DomainKind::Real => {
            let r = raw
                .trim()
                .parse::<f64>()
                .map_err(|e| format!("expected real, got `{raw}` ({e})"))?;
            if !r.is_finite() {
                return Err(format!("non-finite real `{raw}`"));
            }
            Value::Real(r)
        }
        DomainKind::Boolean => match raw.trim() {
            "true" => Value::Bool(true),
            "false" => Value::Bool(false),
            other => return Err(format!("expected true/false, got `{other}`")),
        },
        DomainKind::Text => Value::Text(raw.to_string()),
    };
    if domain.contains(&value) {
        Ok(value)
    } else {
        Err(format!("value `{raw}` outside the declared domain"))
    }
}

fn load_csv(decl: &TableDecl, path: &Path) -> Result<Vec<Vec<Value>>, LoadError> {
    let file = path.display().to_string();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| LoadError::Structure {
            file: file.clone(),
            message: e.to_string(),
        })?;
    let headers = reader
        .headers()
        .map_err(|e| LoadError::Structure {
            file: file.clone(),
            message: e.to_string(),
        })?
        .clone();
    // Column index per declared attribute; every attribute must be present.
    let mut indices = Vec::with_capacity(decl.attributes.len());
    for (attr, _) in &decl.attributes {
        match headers.iter().position(|h| h == attr) {
            Some(i) => indices.push(i),
            None => {
                return Err(LoadError::Structure {
                    file,
                    message: format!("header is missing attribute `{attr}`"),
                })
            }
        }
    }
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row_no = i + 2; // header is row 1
        let record = record.map_err(|e| LoadError::Structure {
            file: file.clone(),
            message: format!("row {row_no}: {e}"),
        })?;
        let mut row = Vec::with_capacity(indices.len());
        for (&col, (attr, domain)) in indices.iter().zip(&decl.attributes) {
            let raw = record.get(col).unwrap_or("");
            let value = coerce_text(domain, raw).map_err(|message| LoadError::Cell {
                file: file.clone(),
                row: row_no,
                column: attr.clone(),
                message,
            })?;
            row.push(value);
        }
        rows.push(row);
    }
    Ok(rows)
}

fn load_json(decl: &TableDecl, path: &Path) -> Result<Vec<Vec<Value>>, LoadError> {
    let file = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|e| LoadError::Io {
        file: file.clone(),
        source: e,
    })?;
    let root = json::parse_json(&text).map_err(|e| LoadError::Structure {
        file: file.clone(),
        message: e.to_string(),
    })?;
    let items = root.as_array().ok_or_else(|| LoadError::Structure {
        file: file.clone(),
        message: "expected a JSON array of row objects".to_string(),
    })?;
    let mut rows = Vec::with_capacity(items.len());
    for (i, item) in items.iter().enumerate() {
        let row_no = i + 1;
        let fields = item.as_object().ok_or_else(|| LoadError::Structure {
            file: file.clone(),
            message: format!("row {row_no}: expected an object"),
        })?;
        for (k, _) in fields {
            if !decl.attributes.iter().any(|(a, _)| a == k) {
                return Err(LoadError::Cell {
                    file: file.clone(),
                    row: row_no,
                    column: k.clone(),
                    message: format!("unknown attribute `{k}`"),
                });
            }
        }
        let mut row = Vec::with_capacity(decl.attributes.len());
        for (attr, domain) in &decl.attributes {
            let node = item.get(attr).ok_or_else(|| LoadError::Cell {
                file: file.clone(),
                row: row_no,
                column: attr.clone(),
                message: "missing value".to_string(),
            })?;
            let cell_err = |message: String| LoadError::Cell {
                file: file.clone(),
                row: row_no,
                column: attr.clone(),
                message,
            };
            let value = match (domain.kind(), &node.value) {
                (DomainKind::Integer, json::JsonValue::Int(v)) => Value::Int(*v),
                (DomainKind::Integer, json::JsonValue::Float(f)) if f.fract() == 0.0 => {
                    Value::Int(*f as i64)
                }
                (DomainKind::Real, json::JsonValue::Int(v)) => Value::Real(*v as f64),
                (DomainKind::Real, json::JsonValue::Float(f)) => Value::Real(*f),
                (DomainKind::Text, json::JsonValue::Str(s)) => Value::Text(s.clone()),
                (DomainKind::Boolean, json::JsonValue::Bool(b)) => Value::Bool(*b),
                (kind, _) => {
                    return Err(cell_err(format!(
                        "expected {kind}, got {}",
                        node.type_name()
                    )))
                }
            };
            if !domain.contains(&value) {
                return Err(cell_err(format!("value `{value}` outside the declared domain")));
            }
            row.push(value);
        }
        rows.push(row);
    }
    Ok(rows)
}

fn data_path(decl: &TableDecl, data_dir: &Path) -> Result<PathBuf, LoadError> {
    if let Some(f) = &decl.file {
        let p = data_dir.join(f);
        if p.exists() {
            return Ok(p);
        }
        return Err(LoadError::MissingFile {
            table: decl.name.clone(),
            dir: data_dir.display().to_string(),
        });
    }
    for ext in ["csv", "json"] {
        let p = data_dir.join(format!("{}.{ext}", decl.name));
        if p.exists() {
            return Ok(p);
        }
    }
    Err(LoadError::MissingFile {
        table: decl.name.clone(),
        dir: data_dir.display().to_string(),
    })
}

/// Load one table per its declaration.
pub fn load_table(decl: &TableDecl, data_dir: &Path) -> Result<Table, LoadError> {
    let path = data_path(decl, data_dir)?;
    let rows = if path.extension().and_then(|e| e.to_str()) == Some("json") {
        load_json(decl, &path)?
    } else {
        load_csv(decl, &path)?
    };
    Table::new(
        decl.name.clone(),
        decl.attributes.clone(),
        rows,
        decl.keys.clone(),
        Some(decl.primary.clone()),
    )
    .map_err(LoadError::from)
}

fn to_foreign_key(decl: &ConstraintDecl) -> ForeignKey {
    ForeignKey {
        name: decl.name.clone(),
        source_table: decl.source_table.clone(),
        source_attrs: decl.source_attrs.clone(),
        target_table: decl.target_table.clone(),
        target_attrs: decl.target_attrs.clone(),
        cardinality: decl.cardinality,
    }
}

/// Load every declared table and assemble the database with its
/// constraints. Data-level validation is the caller's next step.
pub fn load_database(doc: &SpecDocument, data_dir: &Path) -> Result<Database, LoadError> {
    let mut tables = Vec::with_capacity(doc.tables.len());
    for decl in &doc.tables {
        tables.push(load_table(decl, data_dir)?);
    }
    let constraints = doc.constraints.iter().map(to_foreign_key).collect();
    Database::new(tables, constraints).map_err(LoadError::from)
}
