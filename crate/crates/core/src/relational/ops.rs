//! Transformation operators: equi-join, projection, filter, the two
//! decomposition operators, and join-path search over declared constraints.

use std::collections::{BTreeMap, HashMap};

use crate::expr::{Expression, ExprType, RowSchema};
use crate::value::{AttributeDomain, Value};

use super::{Cardinality, Database, ForeignKey, RelationalError, Table};

/// Row-resolution schema of a table: bare attribute names plus the
/// `"table.attr"` qualified forms.
pub(crate) fn table_row_schema(t: &Table) -> RowSchema {
    let mut rs = RowSchema::default();
    for (attr, domain) in t.schema() {
        rs.push(attr.clone(), domain.kind());
    }
    for (attr, domain) in t.schema() {
        rs.push(format!("{}.{}", t.name(), attr), domain.kind());
    }
    rs
}

pub(crate) fn expr_domain(t: ExprType) -> AttributeDomain {
    match t {
        ExprType::Int => AttributeDomain::integer(),
        ExprType::Real => AttributeDomain::real(),
        ExprType::Text => AttributeDomain::text(),
        ExprType::Bool => AttributeDomain::Boolean,
    }
}

/// Equi-join of `r` and `s` on the shared attributes `on`, bag semantics.
/// Output schema is `r`'s schema followed by `s`'s non-join attributes; rows
/// come in `r`-major order with matching `s` rows in their original order.
/// An empty `on` yields the cartesian product.
pub fn join(r: &Table, s: &Table, on: &[String]) -> Result<Table, RelationalError> {
    let mut r_idx = Vec::with_capacity(on.len());
    let mut s_idx = Vec::with_capacity(on.len());
    for attr in on {
        let ri = r.attr_index(attr).ok_or_else(|| RelationalError::UnknownAttribute {
            table: r.name().to_string(),
            attribute: attr.clone(),
        })?;
        let si = s.attr_index(attr).ok_or_else(|| RelationalError::UnknownAttribute {
            table: s.name().to_string(),
            attribute: attr.clone(),
        })?;
        if !r.schema()[ri].1.compatible(&s.schema()[si].1) {
            return Err(RelationalError::JoinTypeError(attr.clone()));
        }
        r_idx.push(ri);
        s_idx.push(si);
    }

    let mut schema = r.schema().to_vec();
    let s_rest: Vec<usize> = (0..s.schema().len())
        .filter(|i| !s_idx.contains(i))
        .collect();
    for &i in &s_rest {
        let (name, domain) = &s.schema()[i];
        if schema.iter().any(|(a, _)| a == name) {
            return Err(RelationalError::DuplicateAttribute {
                table: format!("{}_{}", r.name(), s.name()),
                attribute: name.clone(),
            });
        }
        schema.push((name.clone(), domain.clone()));
    }

    // Hash the right side, preserving per-key row order.
    let mut buckets: HashMap<Vec<&Value>, Vec<usize>> = HashMap::new();
    for (i, row) in s.rows().iter().enumerate() {
        buckets
            .entry(s_idx.iter().map(|&j| &row[j]).collect())
            .or_default()
            .push(i);
    }

    let mut rows = Vec::new();
    for r_row in r.rows() {
        let key: Vec<&Value> = r_idx.iter().map(|&j| &r_row[j]).collect();
        if let Some(matches) = buckets.get(&key) {
            for &si in matches {
                let mut out = r_row.clone();
                out.extend(s_rest.iter().map(|&j| s.rows()[si][j].clone()));
                rows.push(out);
            }
        }
    }

    Ok(Table::anonymous(
        format!("{}_{}", r.name(), s.name()),
        schema,
        rows,
    ))
}

/// Projection with expressions: one output row per input row. A declared key
/// survives only when all of its attributes are projected as bare references.
pub fn project(
    t: &Table,
    exprs: &[(Expression, String)],
) -> Result<Table, RelationalError> {
    let rs = table_row_schema(t);
    let mut schema = Vec::with_capacity(exprs.len());
    let mut seen = std::collections::HashSet::new();
    for (e, name) in exprs {
        if !seen.insert(name.as_str()) {
            return Err(RelationalError::DuplicateProjection(name.clone()));
        }
        let ty = e.type_of(&rs)?;
        schema.push((name.clone(), expr_domain(ty)));
    }

    let mut rows = Vec::with_capacity(t.len());
    for (i, row) in t.rows().iter().enumerate() {
        let mut out = Vec::with_capacity(exprs.len());
        for (e, _) in exprs {
            out.push(e.eval(row, &rs, i)?);
        }
        rows.push(out);
    }

    // Map source attribute -> new name where projected unmodified.
    let mut renames: BTreeMap<&str, &str> = BTreeMap::new();
    for (e, name) in exprs {
        if let Some((qualifier, attr)) = e.as_bare_attr() {
            if qualifier.is_none() || qualifier == Some(t.name()) {
                renames.entry(attr).or_insert(name.as_str());
            }
        }
    }
    let survive = |key: &Vec<String>| -> Option<Vec<String>> {
        key.iter()
            .map(|a| renames.get(a.as_str()).map(|n| n.to_string()))
            .collect()
    };
    let keys: Vec<Vec<String>> = t.keys().iter().filter_map(survive).collect();
    let primary = t.primary_key().and_then(|pk| survive(&pk.to_vec()));

    Table::new(t.name(), schema, rows, keys, primary)
}

/// Keep the rows satisfying a boolean predicate; schema and keys unchanged.
pub fn filter(t: &Table, predicate: &Expression) -> Result<Table, RelationalError> {
    let rs = table_row_schema(t);
    let ty = predicate.type_of(&rs)?;
    if ty != ExprType::Bool {
        return Err(crate::expr::ExprError::Type(format!(
            "filter predicate must be boolean, got {ty}"
        ))
        .into());
    }
    let mut rows = Vec::new();
    for (i, row) in t.rows().iter().enumerate() {
        match predicate.eval(row, &rs, i)? {
            Value::Bool(true) => rows.push(row.clone()),
            Value::Bool(false) => {}
            v => {
                return Err(crate::expr::ExprError::Type(format!(
                    "predicate produced non-boolean {v}"
                ))
                .into())
            }
        }
    }
    Table::new(
        t.name(),
        t.schema().to_vec(),
        rows,
        t.keys().to_vec(),
        t.primary_key().map(|pk| pk.to_vec()),
    )
}

fn bare_projection(t: &Table, attrs: &[String]) -> Result<Table, RelationalError> {
    let exprs: Vec<(Expression, String)> = attrs
        .iter()
        .map(|a| {
            (
                Expression::Attr {
                    table: None,
                    name: a.clone(),
                },
                a.clone(),
            )
        })
        .collect();
    project(t, &exprs)
}

fn dedup_rows(t: &Table) -> Table {
    let mut seen = std::collections::HashSet::new();
    let rows: Vec<Vec<Value>> = t
        .rows()
        .iter()
        .filter(|r| seen.insert((*r).clone()))
        .cloned()
        .collect();
    Table::new(
        t.name(),
        t.schema().to_vec(),
        rows,
        t.keys().to_vec(),
        t.primary_key().map(|pk| pk.to_vec()),
    )
    .expect("dedup preserves structure")
}

fn sorted_multiset(rows: &[Vec<Value>]) -> Vec<Vec<Value>> {
    let mut v = rows.to_vec();
    v.sort();
    v
}

/// Lossless two-way decomposition: split `t` into its projections onto
/// `attrs_r` and `attrs_s` (deduplicated), refusing with a witness when the
/// parts cannot reproduce `t`. Join-back is verified: the multiset of
/// `join(R, S, A∩)` must equal the rows of `t` up to order. Any unmet
/// precondition — the split not covering the schema, or the shared
/// attributes keying neither projection — refuses as lossy, carrying a
/// spurious joined tuple when one exists.
pub fn decompose_lossless(
    t: &Table,
    attrs_r: &[String],
    attrs_s: &[String],
) -> Result<(Table, Table), RelationalError> {
    for a in attrs_r.iter().chain(attrs_s) {
        if t.attr_index(a).is_none() {
            return Err(RelationalError::UnknownAttribute {
                table: t.name().to_string(),
                attribute: a.clone(),
            });
        }
    }
    let covered: std::collections::HashSet<&str> = attrs_r
        .iter()
        .chain(attrs_s)
        .map(String::as_str)
        .collect();
    let covers_schema = t.attribute_names().all(|a| covered.contains(a));

    let shared: Vec<String> = attrs_r
        .iter()
        .filter(|a| attrs_s.contains(a))
        .cloned()
        .collect();

    let r = dedup_rows(&bare_projection(t, attrs_r)?.renamed(format!("{}_r", t.name())));
    let s = dedup_rows(&bare_projection(t, attrs_s)?.renamed(format!("{}_s", t.name())));

    let joined = join(&r, &s, &shared)?;
    // Reorder original rows to the join output's schema for comparison.
    let reordered = bare_projection(
        t,
        &joined
            .schema()
            .iter()
            .map(|(a, _)| a.clone())
            .collect::<Vec<_>>(),
    )?;

    let key_holds = r.holds_as_key(&shared) || s.holds_as_key(&shared);
    let join_back = sorted_multiset(joined.rows());
    let original = sorted_multiset(reordered.rows());
    if !covers_schema || !key_holds || join_back != original {
        // Witness: a joined tuple absent from the original rows, if any.
        let mut remaining: HashMap<Vec<Value>, usize> = HashMap::new();
        for row in reordered.rows() {
            *remaining.entry(row.clone()).or_insert(0) += 1;
        }
        let witness = joined.rows().iter().find_map(|row| {
            match remaining.get_mut(row) {
                Some(n) if *n > 0 => {
                    *n -= 1;
                    None
                }
                _ => Some(row.clone()),
            }
        });
        return Err(RelationalError::LossyDecomposition { witness });
    }

    // Declare the shared attributes as a key on the side(s) where they hold.
    let finish = |mut table: Table| -> Table {
        if !shared.is_empty() && table.holds_as_key(&shared) && !table.declares_key(&shared) {
            table.keys.push(shared.clone());
        }
        table
    };
    Ok((finish(r), finish(s)))
}

/// Result of factoring duplicated attributes into a separate group table.
#[derive(Debug, Clone)]
pub struct DedupDecomposition {
    /// Distinct factored tuples with surrogate primary key `gid`.
    pub groups: Table,
    /// The input with the factored attributes replaced by `gid`.
    pub detail: Table,
    /// The induced many-one constraint `detail.gid -> groups.gid`.
    pub constraint: ForeignKey,
}

/// Factor the attribute set `attrs` out of `t`, eliminating duplicates by
/// storing them once in a group table. Surrogate `gid` values are dense
/// 0-based integers in first-appearance row order.
pub fn decompose_dedup(t: &Table, attrs: &[String]) -> Result<DedupDecomposition, RelationalError> {
    if attrs.is_empty() {
        return Err(RelationalError::BadCover(t.name().to_string()));
    }
    let mut group_idx = Vec::with_capacity(attrs.len());
    // Factored attributes keep the table's schema order.
    for (i, (a, _)) in t.schema().iter().enumerate() {
        if attrs.contains(a) {
            group_idx.push(i);
        }
    }
    if group_idx.len() != attrs.len() {
        let missing = attrs
            .iter()
            .find(|a| t.attr_index(a).is_none())
            .expect("some attribute failed to resolve");
        return Err(RelationalError::UnknownAttribute {
            table: t.name().to_string(),
            attribute: missing.clone(),
        });
    }
    let rest_idx: Vec<usize> = (0..t.schema().len())
        .filter(|i| !group_idx.contains(i))
        .collect();
    if rest_idx.is_empty() {
        return Err(RelationalError::NothingLeft(t.name().to_string()));
    }
    if t.attr_index("gid").is_some() {
        return Err(RelationalError::DuplicateAttribute {
            table: t.name().to_string(),
            attribute: "gid".into(),
        });
    }

    let mut gid_of: HashMap<Vec<Value>, i64> = HashMap::new();
    let mut group_rows: Vec<Vec<Value>> = Vec::new();
    let mut detail_rows: Vec<Vec<Value>> = Vec::with_capacity(t.len());
    for row in t.rows() {
        let tuple: Vec<Value> = group_idx.iter().map(|&i| row[i].clone()).collect();
        let next = gid_of.len() as i64;
        let gid = *gid_of.entry(tuple.clone()).or_insert_with(|| {
            let mut g_row = vec![Value::Int(next)];
            g_row.extend(tuple);
            group_rows.push(g_row);
            next
        });
        let mut d_row = vec![Value::Int(gid)];
        d_row.extend(rest_idx.iter().map(|&i| row[i].clone()));
        detail_rows.push(d_row);
    }

    let mut group_schema = vec![("gid".to_string(), AttributeDomain::integer())];
    group_schema.extend(group_idx.iter().map(|&i| t.schema()[i].clone()));
    let factored: Vec<String> = group_idx
        .iter()
        .map(|&i| t.schema()[i].0.clone())
        .collect();
    let groups = Table::new(
        format!("{}_g", t.name()),
        group_schema,
        group_rows,
        vec![vec!["gid".to_string()], factored],
        Some(vec!["gid".to_string()]),
    )?;

    let mut detail_schema = vec![("gid".to_string(), AttributeDomain::integer())];
    detail_schema.extend(rest_idx.iter().map(|&i| t.schema()[i].clone()));
    let rest_names: std::collections::HashSet<&str> = rest_idx
        .iter()
        .map(|&i| t.schema()[i].0.as_str())
        .collect();
    let surviving_keys: Vec<Vec<String>> = t
        .keys()
        .iter()
        .filter(|k| k.iter().all(|a| rest_names.contains(a.as_str())))
        .cloned()
        .collect();
    let primary = t
        .primary_key()
        .filter(|pk| pk.iter().all(|a| rest_names.contains(a.as_str())))
        .map(|pk| pk.to_vec());
    let detail = Table::new(t.name(), detail_schema, detail_rows, surviving_keys, primary)?;

    let constraint = ForeignKey {
        name: format!("{}_g_fk", t.name()),
        source_table: detail.name().to_string(),
        source_attrs: vec!["gid".to_string()],
        target_table: groups.name().to_string(),
        target_attrs: vec!["gid".to_string()],
        cardinality: Cardinality::ManyOne,
    };

    Ok(DedupDecomposition {
        groups,
        detail,
        constraint,
    })
}

impl Table {
    fn renamed(mut self, name: String) -> Table {
        self.name = name;
        self
    }

    /// Join the decomposition back and project onto `t`'s original schema —
    /// helper for tests and verification.
    pub fn original_schema_names(&self) -> Vec<String> {
        self.schema().iter().map(|(a, _)| a.clone()).collect()
    }
}

/// One step in a join path: a constraint traversed forward (source to
/// target) or backward.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Hop {
    pub constraint: String,
    pub forward: bool,
}

/// Outcome of searching for a unique chain of foreign keys between two
/// tables. Absence and ambiguity are values, not errors.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum JoinPath {
    Path(Vec<Hop>),
    Ambiguous,
    None,
}

/// Find the unique chain of declared foreign keys connecting `from` to `to`
/// such that each hop is traversed toward a key side (so every source tuple
/// derives a unique target value). Only declared constraints are searched.
pub fn join_path(db: &Database, from: &str, to: &str) -> JoinPath {
    if db.table(from).is_none() || db.table(to).is_none() {
        return JoinPath::None;
    }
    if from == to {
        return JoinPath::Path(Vec::new());
    }

    // Directed edges that derive a unique value per tuple.
    let mut edges: Vec<(&str, &str, Hop)> = Vec::new();
    for fk in db.constraints() {
        let target_keyed = db
            .table(&fk.target_table)
            .is_some_and(|t| t.declares_key(&fk.target_attrs));
        let source_keyed = db
            .table(&fk.source_table)
            .is_some_and(|t| t.declares_key(&fk.source_attrs));
        if target_keyed {
            edges.push((
                &fk.source_table,
                &fk.target_table,
                Hop {
                    constraint: fk.name.clone(),
                    forward: true,
                },
            ));
        }
        if source_keyed {
            edges.push((
                &fk.target_table,
                &fk.source_table,
                Hop {
                    constraint: fk.name.clone(),
                    forward: false,
                },
            ));
        }
    }

    let mut found: Vec<Vec<Hop>> = Vec::new();
    let mut stack: Vec<Hop> = Vec::new();
    let mut visited: Vec<&str> = vec![from];
    search(from, to, &edges, &mut stack, &mut visited, &mut found);
    match found.len() {
        0 => JoinPath::None,
        1 => JoinPath::Path(found.pop().unwrap()),
        _ => JoinPath::Ambiguous,
    }
}

fn search<'a>(
    at: &str,
    to: &str,
    edges: &'a [(&'a str, &'a str, Hop)],
    stack: &mut Vec<Hop>,
    visited: &mut Vec<&'a str>,
    found: &mut Vec<Vec<Hop>>,
) {
    if found.len() > 1 {
        return; // two paths already make it ambiguous
    }
    for (src, dst, hop) in edges {
        if *src != at || visited.contains(dst) {
            continue;
        }
        stack.push(hop.clone());
        if *dst == to {
            found.push(stack.clone());
        } else {
            visited.push(dst);
            search(dst, to, edges, stack, visited, found);
            visited.pop();
        }
        stack.pop();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse_expression;
    use crate::value::AttributeDomain as D;

    fn int(i: i64) -> Value {
        Value::Int(i)
    }

    fn text(s: &str) -> Value {
        Value::Text(s.into())
    }

    fn table(name: &str, attrs: &[(&str, AttributeDomain)], rows: Vec<Vec<Value>>) -> Table {
        Table::new(
            name,
            attrs
                .iter()
                .map(|(a, d)| (a.to_string(), d.clone()))
                .collect(),
            rows,
            vec![],
            None,
        )
        .unwrap()
    }

    fn names(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    // Independent equi-join oracle: plain nested loops, no hashing, no reuse
    // of the engine's join.
    fn oracle_join(r: &Table, s: &Table, on: &[String]) -> Vec<Vec<Value>> {
        let r_on: Vec<usize> = on.iter().map(|a| r.attr_index(a).unwrap()).collect();
        let s_on: Vec<usize> = on.iter().map(|a| s.attr_index(a).unwrap()).collect();
        let s_rest: Vec<usize> = (0..s.schema().len())
            .filter(|i| !s_on.contains(i))
            .collect();
        let mut out = Vec::new();
        for rr in r.rows() {
            for sr in s.rows() {
                if r_on
                    .iter()
                    .zip(&s_on)
                    .all(|(&ri, &si)| rr[ri] == sr[si])
                {
                    let mut row = rr.clone();
                    row.extend(s_rest.iter().map(|&i| sr[i].clone()));
                    out.push(row);
                }
            }
        }
        out
    }

    #[test]
    fn join_duplicates_preserved() {
        let r = table(
            "R",
            &[("id", D::integer()), ("a", D::text())],
            vec![vec![int(1), text("x")]],
        );
        let s = table(
            "S",
            &[("id", D::integer()), ("b", D::text())],
            vec![vec![int(1), text("p")], vec![int(1), text("q")]],
        );
        let j = join(&r, &s, &names(&["id"])).unwrap();
        assert_eq!(
            j.rows(),
            &[
                vec![int(1), text("x"), text("p")],
                vec![int(1), text("x"), text("q")],
            ]
        );
    }

    #[test]
    fn join_disjoint_values_is_empty() {
        let r = table("R", &[("id", D::integer())], vec![vec![int(1)]]);
        let s = table("S", &[("id", D::integer())], vec![vec![int(2)]]);
        let j = join(&r, &s, &names(&["id"])).unwrap();
        assert!(j.is_empty());
    }

    #[test]
    fn join_incompatible_domains_is_type_error() {
        let r = table("R", &[("id", D::integer())], vec![]);
        let s = table("S", &[("id", D::text())], vec![]);
        assert!(matches!(
            join(&r, &s, &names(&["id"])),
            Err(RelationalError::JoinTypeError(_))
        ));
    }

    #[test]
    fn project_small_multiples_grid_formula() {
        // k = 3, row gid = 7 lands in column 1, row 3.
        let t = table(
            "T",
            &[("gid", D::integer()), ("a", D::real()), ("b", D::real())],
            vec![vec![int(7), Value::Real(1.0), Value::Real(2.0)]],
        );
        let exprs = vec![
            (parse_expression("gid % 3").unwrap(), "fx".to_string()),
            (parse_expression("ceil(gid / 3)").unwrap(), "fy".to_string()),
            (parse_expression("a").unwrap(), "a".to_string()),
            (parse_expression("b").unwrap(), "b".to_string()),
        ];
        let p = project(&t, &exprs).unwrap();
        assert_eq!(p.rows()[0][0], int(1));
        assert_eq!(p.rows()[0][1], int(3));
    }

    #[test]
    fn project_identity_preserves_key() {
        let t = Table::new(
            "T",
            vec![("id".to_string(), D::integer())],
            (0..5).map(|i| vec![int(i)]).collect(),
            vec![vec!["id".to_string()]],
            None,
        )
        .unwrap();
        let p = project(&t, &[(parse_expression("id").unwrap(), "id".to_string())]).unwrap();
        assert_eq!(p.len(), 5);
        assert!(p.declares_key(&names(&["id"])));
    }

    #[test]
    fn project_constant_column() {
        let t = table("T", &[("a", D::real())], vec![vec![Value::Real(9.0)]]);
        let p = project(&t, &[(parse_expression("10 * 4").unwrap(), "x".to_string())]).unwrap();
        assert_eq!(p.rows()[0][0], int(40));
    }

    #[test]
    fn filter_examples() {
        let t = table(
            "T",
            &[("id", D::integer()), ("a", D::integer())],
            vec![vec![int(1), int(-1)], vec![int(2), int(3)]],
        );
        let pos = filter(&t, &parse_expression("a > 0").unwrap()).unwrap();
        assert_eq!(pos.rows(), &[vec![int(2), int(3)]]);

        let all = filter(&t, &parse_expression("true").unwrap()).unwrap();
        assert_eq!(all.rows(), t.rows());

        let none = filter(&t, &parse_expression("false").unwrap()).unwrap();
        assert!(none.is_empty());
        assert_eq!(none.schema(), t.schema());
    }

    #[test]
    fn filter_rejects_non_boolean_predicate() {
        let t = table("T", &[("a", D::integer())], vec![]);
        assert!(filter(&t, &parse_expression("a + 1").unwrap()).is_err());
    }

    #[test]
    fn lossless_split_on_key_joins_back() {
        let t = Table::new(
            "T",
            vec![
                ("id".to_string(), D::integer()),
                ("a".to_string(), D::text()),
                ("b".to_string(), D::text()),
            ],
            vec![
                vec![int(1), text("x"), text("p")],
                vec![int(2), text("x"), text("q")],
            ],
            vec![vec!["id".to_string()]],
            None,
        )
        .unwrap();
        let (r, s) = decompose_lossless(&t, &names(&["id", "a"]), &names(&["id", "b"])).unwrap();
        let back = oracle_join(&r, &s, &names(&["id"]));
        assert_eq!(sorted_multiset(&back), sorted_multiset(t.rows()));
    }

    #[test]
    fn lossy_split_refused_with_witness() {
        let t = table(
            "T",
            &[
                ("id", D::integer()),
                ("a", D::text()),
                ("b", D::text()),
            ],
            vec![
                vec![int(1), text("x"), text("p")],
                vec![int(2), text("x"), text("q")],
                vec![int(3), text("y"), text("p")],
            ],
        );
        // Splitting on {a} and {b} loses the pairing: the witness must be a
        // joined tuple not present in T.
        let err = decompose_lossless(&t, &names(&["a"]), &names(&["b"])).unwrap_err();
        match err {
            RelationalError::LossyDecomposition { witness: Some(w) } => {
                // The witness is an (a, b) pair that no original row carries.
                assert!(!t.rows().iter().any(|row| row[1..] == w[..]));
            }
            other => panic!("expected lossy error with witness, got {other:?}"),
        }
    }

    #[test]
    fn single_row_split_is_always_lossless() {
        let t = table(
            "T",
            &[("a", D::text()), ("b", D::text())],
            vec![vec![text("x"), text("p")]],
        );
        assert!(decompose_lossless(&t, &names(&["a"]), &names(&["b"])).is_ok());
    }

    #[test]
    fn non_covering_split_is_refused_as_lossy() {
        let t = table(
            "T",
            &[("a", D::text()), ("b", D::text()), ("c", D::text())],
            vec![vec![text("x"), text("p"), text("q")]],
        );
        assert!(matches!(
            decompose_lossless(&t, &names(&["a"]), &names(&["b"])),
            Err(RelationalError::LossyDecomposition { .. })
        ));
    }

    #[test]
    fn dedup_assigns_dense_gids_in_first_appearance_order() {
        let t = table(
            "T",
            &[("g", D::text()), ("a", D::integer()), ("b", D::integer())],
            vec![
                vec![text("g1"), int(1), int(2)],
                vec![text("g1"), int(3), int(4)],
                vec![text("g2"), int(5), int(6)],
            ],
        );
        let d = decompose_dedup(&t, &names(&["g"])).unwrap();
        assert_eq!(
            d.groups.rows(),
            &[vec![int(0), text("g1")], vec![int(1), text("g2")]]
        );
        assert_eq!(
            d.detail.rows(),
            &[
                vec![int(0), int(1), int(2)],
                vec![int(0), int(3), int(4)],
                vec![int(1), int(5), int(6)],
            ]
        );
        // Join back and compare against the original, column-reordered.
        let back = join(&d.detail, &d.groups, &names(&["gid"])).unwrap();
        let restored = project(
            &back,
            &["g", "a", "b"]
                .iter()
                .map(|a| (parse_expression(a).unwrap(), a.to_string()))
                .collect::<Vec<_>>(),
        )
        .unwrap();
        assert_eq!(restored.rows(), t.rows());
        // The constraint the decomposition declares must validate.
        let db = Database::new(
            vec![d.detail.clone(), d.groups.clone()],
            vec![d.constraint.clone()],
        )
        .unwrap();
        assert!(db.validate().unwrap().is_empty());
    }

    #[test]
    fn dedup_single_group_and_all_distinct() {
        let same = table(
            "T",
            &[("g", D::text()), ("a", D::integer())],
            vec![vec![text("g"), int(1)], vec![text("g"), int(2)]],
        );
        assert_eq!(decompose_dedup(&same, &names(&["g"])).unwrap().groups.len(), 1);

        let distinct = table(
            "T",
            &[("g", D::text()), ("a", D::integer())],
            vec![vec![text("g1"), int(1)], vec![text("g2"), int(2)]],
        );
        assert_eq!(
            decompose_dedup(&distinct, &names(&["g"])).unwrap().groups.len(),
            distinct.len()
        );
    }

    #[test]
    fn dedup_of_whole_schema_is_refused() {
        let t = table("T", &[("g", D::text())], vec![]);
        assert!(matches!(
            decompose_dedup(&t, &names(&["g"])),
            Err(RelationalError::NothingLeft(_))
        ));
    }

    fn d1_database() -> Database {
        let a = Table::new(
            "A",
            vec![("aid".to_string(), D::text()), ("a".to_string(), D::real())],
            vec![
                vec![text("a1"), Value::Real(1.0)],
                vec![text("a2"), Value::Real(2.0)],
            ],
            vec![vec!["aid".to_string()]],
            None,
        )
        .unwrap();
        let b = Table::new(
            "B",
            vec![("bid".to_string(), D::text()), ("b".to_string(), D::real())],
            vec![
                vec![text("b1"), Value::Real(1.0)],
                vec![text("b2"), Value::Real(2.0)],
            ],
            vec![vec!["bid".to_string()]],
            None,
        )
        .unwrap();
        let t = Table::new(
            "T",
            vec![("aid".to_string(), D::text()), ("bid".to_string(), D::text())],
            vec![vec![text("a1"), text("b2")]],
            vec![vec!["aid".to_string(), "bid".to_string()]],
            None,
        )
        .unwrap();
        let fks = vec![
            ForeignKey {
                name: "C_TA".into(),
                source_table: "T".into(),
                source_attrs: vec!["aid".into()],
                target_table: "A".into(),
                target_attrs: vec!["aid".into()],
                cardinality: Cardinality::ManyOne,
            },
            ForeignKey {
                name: "C_TB".into(),
                source_table: "T".into(),
                source_attrs: vec!["bid".into()],
                target_table: "B".into(),
                target_attrs: vec!["bid".into()],
                cardinality: Cardinality::ManyOne,
            },
        ];
        Database::new(vec![a, b, t], fks).unwrap()
    }

    #[test]
    fn join_path_single_hop() {
        let db = d1_database();
        match join_path(&db, "T", "A") {
            JoinPath::Path(hops) => {
                assert_eq!(hops.len(), 1);
                assert_eq!(hops[0].constraint, "C_TA");
                assert!(hops[0].forward);
            }
            other => panic!("expected path, got {other:?}"),
        }
    }

    #[test]
    fn join_path_parallel_constraints_are_ambiguous() {
        let s = Table::new(
            "S",
            vec![("x".to_string(), D::integer())],
            vec![],
            vec![vec!["x".to_string()]],
            None,
        )
        .unwrap();
        let t = Table::new(
            "T",
            vec![("x".to_string(), D::integer())],
            vec![],
            vec![vec!["x".to_string()]],
            None,
        )
        .unwrap();
        let fk = |name: &str| ForeignKey {
            name: name.into(),
            source_table: "S".into(),
            source_attrs: vec!["x".into()],
            target_table: "T".into(),
            target_attrs: vec!["x".into()],
            cardinality: Cardinality::ManyOne,
        };
        let db = Database::new(vec![s, t], vec![fk("C1"), fk("C2")]).unwrap();
        assert_eq!(join_path(&db, "S", "T"), JoinPath::Ambiguous);
    }

    #[test]
    fn join_path_disconnected_is_none() {
        let db = d1_database();
        // A and B are connected only through T, and the hops from A or B
        // toward T run against the key direction.
        assert_eq!(join_path(&db, "A", "B"), JoinPath::None);
    }

    #[test]
    fn join_path_same_table_is_trivial() {
        let db = d1_database();
        assert_eq!(join_path(&db, "A", "A"), JoinPath::Path(vec![]));
    }

    // ------------------------------------------------------------------
    // Property tests over random small tables with the brute-force oracle.

    use proptest::prelude::*;

    /// Random table with up to 6 rows and 4 attributes over tiny value
    /// universes, so duplicates and shared join values actually occur.
    fn small_table_strategy(col_names: &'static [&'static str]) -> impl Strategy<Value = Table> {
        (1usize..=col_names.len())
            .prop_flat_map(move |ncols| {
                let kinds = proptest::collection::vec(any::<bool>(), ncols);
                (Just(ncols), kinds, 0usize..=6)
            })
            .prop_flat_map(move |(ncols, kinds, nrows)| {
                let row = kinds
                    .iter()
                    .map(|&is_int| {
                        if is_int {
                            (0i64..3).prop_map(Value::Int).boxed()
                        } else {
                            prop_oneof![Just("x"), Just("y")]
                                .prop_map(|s| Value::Text(s.into()))
                                .boxed()
                        }
                    })
                    .collect::<Vec<_>>();
                let schema: Vec<(String, AttributeDomain)> = (0..ncols)
                    .map(|i| {
                        (
                            col_names[i].to_string(),
                            if kinds[i] { D::integer() } else { D::text() },
                        )
                    })
                    .collect();
                proptest::collection::vec(row, nrows..=nrows).prop_map(move |rows| {
                    Table::new("T", schema.clone(), rows, vec![], None).unwrap()
                })
            })
    }

    proptest! {
        #[test]
        fn accepted_lossless_decompositions_join_back(
            t in small_table_strategy(&["c0", "c1", "c2", "c3"]),
            split in proptest::collection::vec(any::<bool>(), 4),
        ) {
            let attrs: Vec<String> = t.attribute_names().map(str::to_string).collect();
            let mut attrs_r: Vec<String> = attrs
                .iter()
                .enumerate()
                .filter(|(i, _)| split[*i])
                .map(|(_, a)| a.clone())
                .collect();
            let mut attrs_s: Vec<String> = attrs
                .iter()
                .enumerate()
                .filter(|(i, _)| !split[*i])
                .map(|(_, a)| a.clone())
                .collect();
            // Overlap the split on the first attribute so A∩ is non-trivial.
            if attrs_r.is_empty() || !attrs_r.contains(&attrs[0]) {
                attrs_r.insert(0, attrs[0].clone());
            }
            if attrs_s.is_empty() || !attrs_s.contains(&attrs[0]) {
                attrs_s.insert(0, attrs[0].clone());
            }
            if let Ok((r, s)) = decompose_lossless(&t, &attrs_r, &attrs_s) {
                let shared: Vec<String> = attrs_r
                    .iter()
                    .filter(|a| attrs_s.contains(a))
                    .cloned()
                    .collect();
                let back = oracle_join(&r, &s, &shared);
                let reordered = bare_projection(
                    &t,
                    &r.schema()
                        .iter()
                        .chain(s.schema().iter().filter(|(a, _)| !shared.contains(a)))
                        .map(|(a, _)| a.clone())
                        .collect::<Vec<_>>(),
                )
                .unwrap();
                prop_assert_eq!(sorted_multiset(&back), sorted_multiset(reordered.rows()));
            }
        }

        #[test]
        fn dedup_decomposition_invariants(
            t in small_table_strategy(&["c0", "c1", "c2", "c3"]),
        ) {
            prop_assume!(t.schema().len() >= 2);
            let attrs = vec![t.schema()[0].0.clone()];
            let d = decompose_dedup(&t, &attrs).unwrap();
            // gid is a key of the group table.
            prop_assert!(d.groups.holds_as_key(&["gid".to_string()]));
            // The declared constraint validates.
            let db = Database::new(
                vec![d.detail.clone(), d.groups.clone()],
                vec![d.constraint.clone()],
            )
            .unwrap();
            prop_assert!(db.validate().unwrap().is_empty());
            // Join-back reproduces the original rows in order.
            let back = join(&d.detail, &d.groups, &["gid".to_string()]).unwrap();
            let original: Vec<String> = t.attribute_names().map(str::to_string).collect();
            let restored = bare_projection(&back, &original).unwrap();
            prop_assert_eq!(restored.rows(), t.rows());
        }

        #[test]
        fn join_commutative_up_to_order(
            r in small_table_strategy(&["c0", "r1", "r2"]),
            s in small_table_strategy(&["c0", "s1", "s2"]),
        ) {
            // Both tables share only the join column c0.
            let on = vec!["c0".to_string()];
            prop_assume!(r.domain_of("c0").unwrap().compatible(s.domain_of("c0").unwrap()));
            let ab = join(&r, &s, &on).unwrap();
            let ba = join(&s, &r, &on).unwrap();
            prop_assert_eq!(ab.len(), ba.len());
            // Compare as multisets after projecting both to a common order.
            let cols: Vec<String> = ab.schema().iter().map(|(a, _)| a.clone()).collect();
            let ba_re = bare_projection(&ba, &cols).unwrap();
            prop_assert_eq!(
                sorted_multiset(ab.rows()),
                sorted_multiset(ba_re.rows())
            );
        }
    }
}
