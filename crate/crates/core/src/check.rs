//! Faithfulness verification: every table has a view, every row a mark,
//! every attribute a mapped property, every constraint a preserved visual
//! representation — plus multiview-consistency lints and the naive
//! constraint-table guard.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::compile::{Materialized, Scene};
use crate::layout::{AchievedLevel, NestCheck, ViolationGroup};
use crate::relational::Database;
use crate::render::{axis_plan, AxisEntry};
use crate::scale::{TrainedDomain, TrainedRange};
use crate::spec::{
    Channel, ChannelValue, ConstraintMappingSpec, MappingMethod, RefKey, SourceRef, SpecDocument,
    ViewSpec,
};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TableCoverage {
    pub table: String,
    pub views: Vec<String>,
    pub ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ViewCoverage {
    pub view: String,
    pub source: String,
    pub rows: usize,
    pub marks: usize,
    pub ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AttributeCoverage {
    pub table: String,
    pub attribute: String,
    pub mapped_in: Vec<String>,
    pub ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConstraintVerdict {
    pub constraint: String,
    pub describes: String,
    pub methods: Vec<String>,
    pub ok: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Finding {
    pub rule: &'static str,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScaleReport {
    pub name: String,
    pub kind: &'static str,
    pub domain: TrainedDomain,
    pub range: TrainedRange,
    pub contributors: Vec<String>,
}

/// The complete verdict over a compiled scene.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FaithfulnessReport {
    pub faithful: bool,
    pub tables: Vec<TableCoverage>,
    pub views: Vec<ViewCoverage>,
    pub attributes: Vec<AttributeCoverage>,
    pub constraints: Vec<ConstraintVerdict>,
    pub overplot: Vec<ViolationGroup>,
    pub lints: Vec<Finding>,
    pub warnings: Vec<String>,
    pub scales: Vec<ScaleReport>,
    pub axes: Vec<AxisEntry>,
}

/// Attribute references of a view resolved to (table, attribute) pairs.
/// Bare names resolve against the source table first; qualified names
/// against the named endpoint.
fn resolved_references(
    doc: &SpecDocument,
    view: &ViewSpec,
    refs: &[(Option<String>, String)],
) -> Vec<(String, String)> {
    let (source_table, target_table) = match &view.source {
        SourceRef::Table(t) => (doc.table(t), None),
        SourceRef::Constraint(c) => match doc.constraint(c) {
            Some(fk) => (doc.table(&fk.source_table), doc.table(&fk.target_table)),
            None => (None, None),
        },
    };
    let mut out = Vec::new();
    for (qualifier, name) in refs {
        let candidates = [source_table, target_table];
        for t in candidates.into_iter().flatten() {
            if let Some(q) = qualifier {
                if q != &t.name {
                    continue;
                }
            }
            if t.attributes.iter().any(|(a, _)| a == name) {
                out.push((t.name.clone(), name.clone()));
                break;
            }
        }
    }
    out
}

/// Every (table, attribute, "view.channel") triple a channel value touches.
fn channel_references(
    doc: &SpecDocument,
    view: &ViewSpec,
    channel: Channel,
    cv: &ChannelValue,
) -> Vec<(String, String, String)> {
    let place = format!("{}.{}", view.name, channel.name());
    let raw = match cv {
        ChannelValue::Map { expr, .. } => expr.references(),
        ChannelValue::Ref(fr) => match &fr.key {
            RefKey::Expr(e) => e.references(),
            RefKey::Constraint(c) => match doc.constraint(c) {
                Some(fk) => fk
                    .source_attrs
                    .iter()
                    .map(|a| (None, a.clone()))
                    .collect(),
                None => vec![],
            },
        },
        _ => vec![],
    };
    resolved_references(doc, view, &raw)
        .into_iter()
        .map(|(t, a)| (t, a, place.clone()))
        .collect()
}

fn fk_related(doc: &SpecDocument, a: &(String, String), b: &(String, String)) -> bool {
    doc.constraints.iter().any(|fk| {
        fk.source_attrs
            .iter()
            .zip(&fk.target_attrs)
            .any(|(sa, ta)| {
                let s = (fk.source_table.clone(), sa.clone());
                let t = (fk.target_table.clone(), ta.clone());
                (s == *a && t == *b) || (s == *b && t == *a)
            })
    })
}

/// Hullman-style multiview consistency lints, generalized to exempt
/// foreign-key-related attribute pairs.
pub fn lint_consistency(doc: &SpecDocument, m: &Materialized) -> Vec<Finding> {
    // One entry per bare-attribute mapping: which attribute feeds which
    // channel through which trained scale.
    struct Entry {
        view: String,
        channel: Channel,
        attr: (String, String),
        scale_key: String,
    }
    let mut entries: Vec<Entry> = Vec::new();
    for view in &doc.views {
        for (&channel, cv) in &view.channels {
            let ChannelValue::Map { expr, scale } = cv else {
                continue;
            };
            let Some((qualifier, name)) = expr.as_bare_attr() else {
                continue;
            };
            let resolved = resolved_references(
                doc,
                view,
                &[(qualifier.map(str::to_string), name.to_string())],
            );
            let Some(attr) = resolved.first().cloned() else {
                continue;
            };
            let scale_key = match scale {
                Some(s) => s.clone(),
                None => crate::compile::anon_scale_key(&view.name, channel),
            };
            entries.push(Entry {
                view: view.name.clone(),
                channel,
                attr,
                scale_key,
            });
        }
    }

    let mut findings: Vec<Finding> = Vec::new();
    let mut seen: BTreeSet<String> = BTreeSet::new();
    let push = |findings: &mut Vec<Finding>, seen: &mut BTreeSet<String>, rule: &'static str, message: String| {
        if seen.insert(format!("{rule}:{message}")) {
            findings.push(Finding { rule, message });
        }
    };

    for i in 0..entries.len() {
        for j in (i + 1)..entries.len() {
            let (a, b) = (&entries[i], &entries[j]);
            let (sa, sb) = (m.scales.get(&a.scale_key), m.scales.get(&b.scale_key));
            let (Some(sa), Some(sb)) = (sa, sb) else { continue };
            if a.attr == b.attr {
                if a.channel.lint_kind() == b.channel.lint_kind() && sa.domain != sb.domain {
                    push(
                        &mut findings,
                        &mut seen,
                        "SAME-ATTR-DIFF-DOMAIN",
                        format!(
                            "attribute {}.{} maps to `{}` in views `{}` and `{}` with different scale domains",
                            a.attr.0, a.attr.1, a.channel.lint_kind(), a.view, b.view
                        ),
                    );
                }
                if a.channel == Channel::Color && b.channel == Channel::Color && sa.range != sb.range
                {
                    push(
                        &mut findings,
                        &mut seen,
                        "SAME-ATTR-COLOR-DIFF-RANGE",
                        format!(
                            "attribute {}.{} maps to color in views `{}` and `{}` with different ranges",
                            a.attr.0, a.attr.1, a.view, b.view
                        ),
                    );
                }
            } else if !fk_related(doc, &a.attr, &b.attr) {
                if a.scale_key == b.scale_key {
                    push(
                        &mut findings,
                        &mut seen,
                        "DIFF-ATTR-SHARED-DOMAIN",
                        format!(
                            "unrelated attributes {}.{} and {}.{} share scale `{}`",
                            a.attr.0, a.attr.1, b.attr.0, b.attr.1, a.scale_key
                        ),
                    );
                } else if a.channel == Channel::Color && b.channel == Channel::Color {
                    let overlap = match (&sa.range, &sb.range) {
                        (TrainedRange::Palette(pa), TrainedRange::Palette(pb)) => {
                            pa.iter().any(|c| pb.contains(c))
                        }
                        (TrainedRange::Interval(a0, a1), TrainedRange::Interval(b0, b1)) => {
                            a0.max(*b0) <= a1.min(*b1)
                        }
                        _ => false,
                    };
                    if overlap {
                        push(
                            &mut findings,
                            &mut seen,
                            "DIFF-ATTR-COLOR-OVERLAP",
                            format!(
                                "unrelated attributes {}.{} and {}.{} have overlapping color ranges",
                                a.attr.0, a.attr.1, b.attr.0, b.attr.1
                            ),
                        );
                    }
                }
            }
        }
    }
    findings
}

/// Warn about the naive constraint-as-table anti-pattern: an explicit view
/// that maps both endpoint attribute sets directly to separate channels,
/// with no foreign reference and no channel tying the two sides together.
pub fn naive_constraint_table_guard(doc: &SpecDocument) -> Vec<String> {
    let mut warnings = Vec::new();
    for mapping in &doc.constraint_mappings {
        let MappingMethod::Explicit { view: view_name } = &mapping.method else {
            continue;
        };
        let (Some(view), Some(fk)) = (doc.view(view_name), doc.constraint(&mapping.constraint))
        else {
            continue;
        };
        let has_ref = view
            .channels
            .values()
            .any(|cv| matches!(cv, ChannelValue::Ref(_)));
        if has_ref {
            continue;
        }
        let side_refs = |cv: &ChannelValue, table: &str, attrs: &[String]| -> bool {
            let ChannelValue::Map { expr, .. } = cv else {
                return false;
            };
            resolved_references(doc, view, &expr.references())
                .iter()
                .any(|(t, a)| t == table && attrs.contains(a))
        };
        let mut source_only = false;
        let mut target_only = false;
        let mut both = false;
        for cv in view.channels.values() {
            let s = side_refs(cv, &fk.source_table, &fk.source_attrs);
            let t = side_refs(cv, &fk.target_table, &fk.target_attrs);
            match (s, t) {
                (true, true) => both = true,
                (true, false) => source_only = true,
                (false, true) => target_only = true,
                _ => {}
            }
        }
        if !both && source_only && target_only {
            warnings.push(format!(
                "view `{view_name}` renders constraint `{}` as a bare data table: both endpoints are mapped to separate channels, which is vacuous because they are equal on every row",
                mapping.constraint
            ));
        }
    }
    warnings
}

fn check_explicit(
    doc: &SpecDocument,
    scene: &Scene,
    mapping: &ConstraintMappingSpec,
    view_name: &str,
) -> (bool, String) {
    let Some(fk) = doc.constraint(&mapping.constraint) else {
        return (false, "unknown constraint".into());
    };
    let Some(view) = doc.view(view_name) else {
        return (false, format!("unknown view `{view_name}`"));
    };

    // The target side must be anchored: a foreign reference into a view
    // over the target table keyed by the constraint's value, or an
    // expression mentioning the relationship's keys.
    let mut target_anchors: Vec<String> = Vec::new();
    for (&channel, cv) in &view.channels {
        match cv {
            ChannelValue::Ref(fr) => {
                let target_ok = doc
                    .view(&fr.view)
                    .and_then(|tv| doc.view_base_table(tv))
                    .is_some_and(|t| t == fk.target_table);
                if !target_ok {
                    continue;
                }
                let keyed_by_fk = match &fr.key {
                    RefKey::Constraint(c) => *c == fk.name,
                    RefKey::Expr(e) => {
                        let refs = resolved_references(doc, view, &e.references());
                        !refs.is_empty()
                            && refs.iter().all(|(t, a)| {
                                *t == fk.source_table && fk.source_attrs.contains(a)
                            })
                    }
                };
                if keyed_by_fk {
                    target_anchors.push(format!("{}={}", channel.name(), fr.view));
                }
            }
            ChannelValue::Map { expr, .. } => {
                let refs = resolved_references(doc, view, &expr.references());
                let mentions_target = fk
                    .target_attrs
                    .iter()
                    .all(|a| refs.iter().any(|(t, r)| *t == fk.target_table && r == a));
                let mentions_key = fk
                    .source_attrs
                    .iter()
                    .all(|a| refs.iter().any(|(t, r)| *t == fk.source_table && r == a));
                if mentions_target || mentions_key {
                    target_anchors.push(channel.name().to_string());
                }
            }
            _ => {}
        }
    }
    if target_anchors.is_empty() {
        return (
            false,
            "no channel anchors the constraint's target side (no reference or key expression)"
                .into(),
        );
    }

    // Referential exactness: every copied property must equal its target's
    // current value bit-exactly.
    let Some(table) = scene.mark_table(view_name) else {
        return (false, "view not materialized".into());
    };
    let mut checked = 0usize;
    for (channel, binding) in &table.ref_bindings {
        let Some(target_table) = scene.mark_table(&binding.target_view) else {
            continue;
        };
        for (row, &target_row) in binding.target_rows.iter().enumerate() {
            let stored = table.channel(row, *channel);
            let expected = scene.absolute(target_table, target_row, binding.prop);
            if stored != expected.as_ref() {
                return (
                    false,
                    format!(
                        "channel `{}` of mark {row} diverges from its referenced mark (stored {:?}, target {:?})",
                        channel.name(),
                        stored,
                        expected
                    ),
                );
            }
            checked += 1;
        }
    }
    (
        true,
        format!(
            "anchored via [{}], {checked} referenced properties exact",
            target_anchors.join(", ")
        ),
    )
}

/// Verify the four faithfulness clauses and assemble the report.
#[allow(clippy::too_many_arguments)]
pub fn check_faithfulness(
    db: &Database,
    doc: &SpecDocument,
    m: &Materialized,
    levels: &BTreeMap<String, AchievedLevel>,
    nest_checks: &[NestCheck],
    overplot: &[ViolationGroup],
) -> FaithfulnessReport {
    let scene = &m.scene;

    // Clause 1: each table maps to one or more views.
    let tables: Vec<TableCoverage> = db
        .tables()
        .iter()
        .map(|t| {
            let views: Vec<String> = doc
                .views
                .iter()
                .filter(|v| v.source == SourceRef::Table(t.name().to_string()))
                .map(|v| v.name.clone())
                .collect();
            TableCoverage {
                table: t.name().to_string(),
                ok: !views.is_empty(),
                views,
            }
        })
        .collect();

    // Clause 2: each row maps to one mark.
    let views: Vec<ViewCoverage> = doc
        .views
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let rows = m.contexts[i].rows.len();
            let marks = scene.marks[i].len();
            ViewCoverage {
                view: v.name.clone(),
                source: v.source.name().to_string(),
                rows,
                marks,
                ok: rows == marks,
            }
        })
        .collect();

    // Clause 4 first: passing constraint mappings also satisfy clause 3 for
    // their endpoint attributes (nesting maps the child's key attribute to
    // canvas placement rather than to a plain channel).
    let mut verdicts: Vec<ConstraintVerdict> = Vec::new();
    for fk in db.constraints() {
        let mappings: Vec<&ConstraintMappingSpec> = doc
            .constraint_mappings
            .iter()
            .filter(|cm| cm.constraint == fk.name)
            .collect();
        if mappings.is_empty() {
            verdicts.push(ConstraintVerdict {
                constraint: fk.name.clone(),
                describes: fk.describe(),
                methods: vec!["unmapped".into()],
                ok: false,
                detail: format!("constraint {} has no visual mapping", fk.describe()),
            });
            continue;
        }
        let mut ok = true;
        let mut methods = Vec::new();
        let mut details = Vec::new();
        for cm in mappings {
            match &cm.method {
                MappingMethod::Explicit { view } => {
                    methods.push("explicit".to_string());
                    let (pass, detail) = check_explicit(doc, scene, cm, view);
                    ok &= pass;
                    details.push(format!("explicit via `{view}`: {detail}"));
                }
                MappingMethod::Nest { child, parent } => {
                    methods.push("nest".to_string());
                    match nest_checks.iter().find(|n| {
                        n.constraint == fk.name && n.child_view == *child && n.parent_view == *parent
                    }) {
                        Some(check) => {
                            ok &= check.ok();
                            details.push(format!(
                                "nest `{child}` in `{parent}`: {}/{} marks contained, partition {}",
                                check.contained,
                                check.total,
                                if check.partition_ok { "exact" } else { "broken" }
                            ));
                        }
                        None => {
                            ok = false;
                            details.push(format!("nest `{child}` in `{parent}`: not compiled"));
                        }
                    }
                }
                MappingMethod::SharedScale { level, .. } => {
                    methods.push("shared-scale".to_string());
                    match levels.get(&fk.name) {
                        Some(AchievedLevel::Level(achieved)) => {
                            let pass = achieved >= level;
                            ok &= pass;
                            details.push(format!(
                                "shared scale: achieved level {achieved}, declared {level}"
                            ));
                        }
                        Some(AchievedLevel::NotPreserved(reason)) => {
                            ok = false;
                            details.push(format!("shared scale: not preserved ({reason})"));
                        }
                        None => {
                            ok = false;
                            details.push("shared scale: level not computed".into());
                        }
                    }
                }
            }
        }
        verdicts.push(ConstraintVerdict {
            constraint: fk.name.clone(),
            describes: fk.describe(),
            methods,
            ok,
            detail: details.join("; "),
        });
    }

    // Clause 3: each attribute maps to a mark property — directly through
    // an expression, reference key, or format string, or through a passing
    // constraint mapping covering its endpoint.
    let mut coverage: BTreeMap<(String, String), Vec<String>> = BTreeMap::new();
    for view in &doc.views {
        for (&channel, cv) in &view.channels {
            for (t, a, place) in channel_references(doc, view, channel, cv) {
                coverage.entry((t, a)).or_default().push(place);
            }
        }
        // Every view carries the omitted primary-key mapping: each mark is
        // keyed by its source row's primary key (the back key), so the key
        // attributes are always mapped to the mark's identity.
        if let Some(base) = doc.view_base_table(view) {
            if let Some(decl) = doc.table(base) {
                for a in &decl.primary {
                    coverage
                        .entry((base.to_string(), a.clone()))
                        .or_default()
                        .push(format!("{}.id", view.name));
                }
            }
        }
    }
    for (fk, verdict) in db.constraints().iter().zip(&verdicts) {
        if !verdict.ok {
            continue;
        }
        for side in [
            (&fk.source_table, &fk.source_attrs),
            (&fk.target_table, &fk.target_attrs),
        ] {
            for a in side.1 {
                coverage
                    .entry((side.0.clone(), a.clone()))
                    .or_default()
                    .push(format!("constraint:{}", fk.name));
            }
        }
    }
    let attributes: Vec<AttributeCoverage> = db
        .tables()
        .iter()
        .flat_map(|t| {
            t.schema().iter().map(|(a, _)| {
                let mut mapped_in = coverage
                    .get(&(t.name().to_string(), a.clone()))
                    .cloned()
                    .unwrap_or_default();
                mapped_in.dedup();
                AttributeCoverage {
                    table: t.name().to_string(),
                    attribute: a.clone(),
                    ok: !mapped_in.is_empty(),
                    mapped_in,
                }
            })
        })
        .collect();

    let lints = lint_consistency(doc, m);
    let warnings = naive_constraint_table_guard(doc);
    let axes = axis_plan(doc, m);

    let scales: Vec<ScaleReport> = m
        .scales
        .values()
        .map(|s| ScaleReport {
            name: s.name.clone(),
            kind: s.kind.name(),
            domain: s.domain.clone(),
            range: s.range.clone(),
            contributors: s
                .contributors
                .iter()
                .map(|(v, c)| format!("{v}.{}", c.name()))
                .collect(),
        })
        .collect();

    let faithful = tables.iter().all(|t| t.ok)
        && views.iter().all(|v| v.ok)
        && attributes.iter().all(|a| a.ok)
        && verdicts.iter().all(|c| c.ok)
        && overplot.is_empty();

    FaithfulnessReport {
        faithful,
        tables,
        views,
        attributes,
        constraints: verdicts,
        overplot: overplot.to_vec(),
        lints,
        warnings,
        scales,
        axes,
    }
}
