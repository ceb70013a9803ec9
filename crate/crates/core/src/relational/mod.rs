//! In-memory relational engine: tables, keys, foreign-key constraints, and
//! the transformation operators the compiler builds on.
//!
//! Tables and databases are immutable after construction; every operation is
//! a pure function returning new values.

mod ops;

pub use ops::{
    decompose_dedup, decompose_lossless, filter, join, join_path, project, DedupDecomposition,
    Hop, JoinPath,
};

use std::collections::{HashMap, HashSet};
use std::fmt;

use thiserror::Error;

use crate::value::{AttributeDomain, Value};

#[derive(Debug, Error)]
pub enum RelationalError {
    #[error("unknown table `{0}`")]
    UnknownTable(String),
    #[error("table `{table}` has no attribute `{attribute}`")]
    UnknownAttribute { table: String, attribute: String },
    #[error("duplicate attribute `{attribute}` in table `{table}`")]
    DuplicateAttribute { table: String, attribute: String },
    #[error("duplicate table `{0}`")]
    DuplicateTable(String),
    #[error("table `{table}` row {row} has {got} values, schema has {want}")]
    RowArity {
        table: String,
        row: usize,
        got: usize,
        want: usize,
    },
    #[error("table `{table}` row {row}, attribute `{attribute}`: value {value} not in domain")]
    OutOfDomain {
        table: String,
        row: usize,
        attribute: String,
        value: Value,
    },
    #[error("table `{table}`: ill-formed category set for attribute `{attribute}`")]
    BadCategorySet { table: String, attribute: String },
    #[error("table `{0}` declares no key and has no `id` attribute")]
    NoKey(String),
    #[error("constraint `{constraint}`: source and target attribute lists differ in length")]
    KeyArityMismatch { constraint: String },
    #[error("constraint `{constraint}`: incompatible domains for {source_attr} and {target_attr}")]
    IncompatibleDomains {
        constraint: String,
        source_attr: String,
        target_attr: String,
    },
    #[error("join attributes have incompatible domains: `{0}`")]
    JoinTypeError(String),
    #[error("decomposition attribute sets must cover the schema of `{0}`")]
    BadCover(String),
    #[error("lossy decomposition{}", witness_suffix(.witness))]
    LossyDecomposition { witness: Option<Vec<Value>> },
    #[error("cannot factor out the entire schema of `{0}`")]
    NothingLeft(String),
    #[error("expression error: {0}")]
    Expr(#[from] crate::expr::ExprError),
    #[error("duplicate output attribute `{0}` in projection")]
    DuplicateProjection(String),
}

fn witness_suffix(witness: &Option<Vec<Value>>) -> String {
    match witness {
        Some(row) => {
            let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            format!(": spurious tuple ({})", cells.join(", "))
        }
        None => String::new(),
    }
}

/// Cardinality class of a foreign key. `ManyManyLink` marks the source table
/// itself as a link relation between two targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cardinality {
    OneOne,
    ManyOne,
    ManyManyLink,
}

impl fmt::Display for Cardinality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Cardinality::OneOne => "one-one",
            Cardinality::ManyOne => "many-one",
            Cardinality::ManyManyLink => "many-many-link",
        };
        f.write_str(s)
    }
}

/// Foreign-key constraint: every source row's values over the source
/// attributes occur as some target row's values over the target attributes.
#[derive(Debug, Clone, PartialEq)]
pub struct ForeignKey {
    pub name: String,
    pub source_table: String,
    pub source_attrs: Vec<String>,
    pub target_table: String,
    pub target_attrs: Vec<String>,
    pub cardinality: Cardinality,
}

impl ForeignKey {
    /// `(S.X, T.Y)` rendering used in reports and messages.
    pub fn describe(&self) -> String {
        format!(
            "C({}.{}, {}.{})",
            self.source_table,
            self.source_attrs.join(","),
            self.target_table,
            self.target_attrs.join(",")
        )
    }

    /// Positional attribute pairs (source attr, target attr).
    pub fn attr_pairs(&self) -> impl Iterator<Item = (&str, &str)> {
        self.source_attrs
            .iter()
            .zip(self.target_attrs.iter())
            .map(|(a, b)| (a.as_str(), b.as_str()))
    }
}

/// A named relation: ordered schema, ordered multiset of rows, declared
/// candidate keys and one designated primary key.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    name: String,
    schema: Vec<(String, AttributeDomain)>,
    rows: Vec<Vec<Value>>,
    keys: Vec<Vec<String>>,
    primary: Option<Vec<String>>,
}

impl Table {
    /// Build a table, checking structure: unique attribute names, row arity,
    /// domain membership, well-formed category sets, resolvable keys.
    /// Whether declared keys actually hold on the rows is a data-level
    /// question answered by [`Database::validate`].
    pub fn new(
        name: impl Into<String>,
        schema: Vec<(String, AttributeDomain)>,
        rows: Vec<Vec<Value>>,
        keys: Vec<Vec<String>>,
        primary: Option<Vec<String>>,
    ) -> Result<Table, RelationalError> {
        let name = name.into();
        let mut seen = HashSet::new();
        for (attr, domain) in &schema {
            if !seen.insert(attr.as_str()) {
                return Err(RelationalError::DuplicateAttribute {
                    table: name,
                    attribute: attr.clone(),
                });
            }
            if !domain.categories_well_formed() {
                return Err(RelationalError::BadCategorySet {
                    table: name,
                    attribute: attr.clone(),
                });
            }
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != schema.len() {
                return Err(RelationalError::RowArity {
                    table: name,
                    row: i,
                    got: row.len(),
                    want: schema.len(),
                });
            }
            for ((attr, domain), value) in schema.iter().zip(row.iter()) {
                if !domain.contains(value) {
                    return Err(RelationalError::OutOfDomain {
                        table: name,
                        row: i,
                        attribute: attr.clone(),
                        value: value.clone(),
                    });
                }
            }
        }
        let mut keys = keys;
        let mut primary = primary;
        if primary.is_none() {
            if let Some(first) = keys.first() {
                primary = Some(first.clone());
            } else if schema.iter().any(|(a, _)| a == "id") {
                primary = Some(vec!["id".to_string()]);
            }
        }
        if let Some(pk) = &primary {
            if !keys.iter().any(|k| k == pk) {
                keys.insert(0, pk.clone());
            }
        }
        for key in &keys {
            for attr in key {
                if !schema.iter().any(|(a, _)| a == attr) {
                    return Err(RelationalError::UnknownAttribute {
                        table: name,
                        attribute: attr.clone(),
                    });
                }
            }
        }
        Ok(Table {
            name,
            schema,
            rows,
            keys,
            primary,
        })
    }

    /// A keyless table for intermediate results.
    pub(crate) fn anonymous(
        name: impl Into<String>,
        schema: Vec<(String, AttributeDomain)>,
        rows: Vec<Vec<Value>>,
    ) -> Table {
        Table {
            name: name.into(),
            schema,
            rows,
            keys: Vec::new(),
            primary: None,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn schema(&self) -> &[(String, AttributeDomain)] {
        &self.schema
    }

    pub fn attribute_names(&self) -> impl Iterator<Item = &str> {
        self.schema.iter().map(|(a, _)| a.as_str())
    }

    pub fn rows(&self) -> &[Vec<Value>] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn keys(&self) -> &[Vec<String>] {
        &self.keys
    }

    pub fn primary_key(&self) -> Option<&[String]> {
        self.primary.as_deref()
    }

    pub fn attr_index(&self, attr: &str) -> Option<usize> {
        self.schema.iter().position(|(a, _)| a == attr)
    }

    pub fn domain_of(&self, attr: &str) -> Option<&AttributeDomain> {
        self.schema
            .iter()
            .find(|(a, _)| a == attr)
            .map(|(_, d)| d)
    }

    /// Values of `attrs` in row `row`, in the order given.
    pub fn key_values(&self, row: usize, attrs: &[String]) -> Vec<Value> {
        attrs
            .iter()
            .map(|a| self.rows[row][self.attr_index(a).expect("attr resolved")].clone())
            .collect()
    }

    /// Whether `attrs` is declared as a key of this table.
    pub fn declares_key(&self, attrs: &[String]) -> bool {
        let want: HashSet<&str> = attrs.iter().map(String::as_str).collect();
        self.keys.iter().any(|k| {
            k.len() == want.len() && k.iter().all(|a| want.contains(a.as_str()))
        })
    }

    /// Whether no two rows agree on all of `attrs` (a data-level key check).
    pub fn holds_as_key(&self, attrs: &[String]) -> bool {
        let idx: Vec<usize> = match attrs.iter().map(|a| self.attr_index(a)).collect() {
            Some(v) => v,
            None => return false,
        };
        let mut seen = HashSet::new();
        for row in &self.rows {
            let tuple: Vec<&Value> = idx.iter().map(|&i| &row[i]).collect();
            if !seen.insert(tuple) {
                return false;
            }
        }
        true
    }

    /// Rows grouped by duplicate tuples over `attrs`: each group with two or
    /// more members violates the key.
    fn duplicate_groups(&self, attrs: &[String]) -> Vec<(Vec<Value>, Vec<usize>)> {
        let idx: Vec<usize> = attrs
            .iter()
            .map(|a| self.attr_index(a).expect("attr resolved"))
            .collect();
        let mut groups: HashMap<Vec<Value>, Vec<usize>> = HashMap::new();
        let mut order: Vec<Vec<Value>> = Vec::new();
        for (i, row) in self.rows.iter().enumerate() {
            let tuple: Vec<Value> = idx.iter().map(|&j| row[j].clone()).collect();
            let entry = groups.entry(tuple.clone()).or_default();
            if entry.is_empty() {
                order.push(tuple);
            }
            entry.push(i);
        }
        order
            .into_iter()
            .filter_map(|tuple| {
                let rows = groups.remove(&tuple).unwrap();
                (rows.len() > 1).then_some((tuple, rows))
            })
            .collect()
    }
}

/// Data-level constraint violation found by [`Database::validate`].
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    /// Two or more rows agree on all attributes of a declared key.
    DuplicateKey {
        table: String,
        key: Vec<String>,
        values: Vec<Value>,
        rows: Vec<usize>,
    },
    /// A source row whose key values occur in no target row.
    DanglingReference {
        constraint: String,
        row: usize,
        values: Vec<Value>,
    },
    /// A declared cardinality demands an endpoint be a key, and it is not.
    CardinalityKey {
        constraint: String,
        table: String,
        attrs: Vec<String>,
        values: Vec<Value>,
        rows: Vec<usize>,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::DuplicateKey {
                table,
                key,
                values,
                rows,
            } => write!(
                f,
                "duplicate key ({}) = ({}) in table `{}`, rows {:?}",
                key.join(","),
                values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(","),
                table,
                rows
            ),
            Violation::DanglingReference {
                constraint,
                row,
                values,
            } => write!(
                f,
                "constraint `{}`: row {} references ({}) with no matching target",
                constraint,
                row,
                values
                    .iter()
                    .map(|v| v.to_string())
                    .collect::<Vec<_>>()
                    .join(",")
            ),
            Violation::CardinalityKey {
                constraint,
                table,
                attrs,
                values,
                rows,
            } => write!(
                f,
                "constraint `{}`: cardinality requires ({}) to be a key of `{}`, duplicated by rows {:?} with values ({})",
                constraint,
                attrs.join(","),
                table,
                rows,
                values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
            ),
        }
    }
}

/// A set of tables plus the declared foreign-key constraints between them.
#[derive(Debug, Clone, PartialEq)]
pub struct Database {
    tables: Vec<Table>,
    constraints: Vec<ForeignKey>,
}

impl Database {
    /// Assemble a database, checking that constraint endpoints resolve and
    /// have compatible, equal-arity attribute lists.
    pub fn new(tables: Vec<Table>, constraints: Vec<ForeignKey>) -> Result<Database, RelationalError> {
        let mut names = HashSet::new();
        for t in &tables {
            if !names.insert(t.name.clone()) {
                return Err(RelationalError::DuplicateTable(t.name.clone()));
            }
        }
        let db = Database { tables, constraints };
        db.check_structure()?;
        Ok(db)
    }

    fn check_structure(&self) -> Result<(), RelationalError> {
        for fk in &self.constraints {
            let source = self
                .table(&fk.source_table)
                .ok_or_else(|| RelationalError::UnknownTable(fk.source_table.clone()))?;
            let target = self
                .table(&fk.target_table)
                .ok_or_else(|| RelationalError::UnknownTable(fk.target_table.clone()))?;
            if fk.source_attrs.len() != fk.target_attrs.len() || fk.source_attrs.is_empty() {
                return Err(RelationalError::KeyArityMismatch {
                    constraint: fk.name.clone(),
                });
            }
            for (sa, ta) in fk.attr_pairs() {
                let sd = source.domain_of(sa).ok_or_else(|| RelationalError::UnknownAttribute {
                    table: fk.source_table.clone(),
                    attribute: sa.to_string(),
                })?;
                let td = target.domain_of(ta).ok_or_else(|| RelationalError::UnknownAttribute {
                    table: fk.target_table.clone(),
                    attribute: ta.to_string(),
                })?;
                if !sd.compatible(td) {
                    return Err(RelationalError::IncompatibleDomains {
                        constraint: fk.name.clone(),
                        source_attr: sa.to_string(),
                        target_attr: ta.to_string(),
                    });
                }
            }
        }
        Ok(())
    }

    pub fn tables(&self) -> &[Table] {
        &self.tables
    }

    pub fn constraints(&self) -> &[ForeignKey] {
        &self.constraints
    }

    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }

    pub fn constraint(&self, name: &str) -> Option<&ForeignKey> {
        self.constraints.iter().find(|c| c.name == name)
    }

    /// Check every declared key and foreign key against the data. Returns
    /// the full violation list (empty iff the database satisfies all
    /// declared constraints). Structural problems are errors, not
    /// violations.
    pub fn validate(&self) -> Result<Vec<Violation>, RelationalError> {
        self.check_structure()?;
        let mut out = Vec::new();
        for table in &self.tables {
            for key in &table.keys {
                for (values, rows) in table.duplicate_groups(key) {
                    out.push(Violation::DuplicateKey {
                        table: table.name.clone(),
                        key: key.clone(),
                        values,
                        rows,
                    });
                }
            }
        }
        for fk in &self.constraints {
            let source = self.table(&fk.source_table).expect("structure checked");
            let target = self.table(&fk.target_table).expect("structure checked");

            let tgt_idx: Vec<usize> = fk
                .target_attrs
                .iter()
                .map(|a| target.attr_index(a).expect("structure checked"))
                .collect();
            let mut target_tuples: HashSet<Vec<&Value>> = HashSet::new();
            for row in &target.rows {
                target_tuples.insert(tgt_idx.iter().map(|&i| &row[i]).collect());
            }
            let src_idx: Vec<usize> = fk
                .source_attrs
                .iter()
                .map(|a| source.attr_index(a).expect("structure checked"))
                .collect();
            for (i, row) in source.rows.iter().enumerate() {
                let tuple: Vec<&Value> = src_idx.iter().map(|&j| &row[j]).collect();
                if !target_tuples.contains(&tuple) {
                    out.push(Violation::DanglingReference {
                        constraint: fk.name.clone(),
                        row: i,
                        values: tuple.into_iter().cloned().collect(),
                    });
                }
            }

            // one-one demands both endpoints be keys in the data; many-one
            // (and the link form) demands the target side be one.
            let mut demand: Vec<(&Table, &Vec<String>)> = vec![(target, &fk.target_attrs)];
            if fk.cardinality == Cardinality::OneOne {
                demand.push((source, &fk.source_attrs));
            }
            for (table, attrs) in demand {
                for (values, rows) in table.duplicate_groups(attrs) {
                    out.push(Violation::CardinalityKey {
                        constraint: fk.name.clone(),
                        table: table.name.clone(),
                        attrs: attrs.clone(),
                        values,
                        rows,
                    });
                }
            }
        }
        Ok(out)
    }
}
