//! Compilation planning: order views so every foreign reference points at
//! an already-materialized view, verify reference paths through the
//! constraint graph, and schedule scale training.

use std::collections::{BTreeMap, BTreeSet};

use crate::relational::{join_path, Database, JoinPath};
use crate::spec::{
    infer_scale_kind, Channel, ChannelValue, MappingMethod, RefKey, ScaleSpec, SpecDocument,
};

use super::CompileError;

/// One scale to train: its resolved spec (anonymous mappings get a fresh
/// synthesized spec) and the (view index, channel) pairs contributing data.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalePlan {
    pub key: String,
    pub spec: ScaleSpec,
    pub contributors: Vec<(usize, Channel)>,
}

/// Registry key for the anonymous scale behind an unnamed mapping.
pub fn anon_scale_key(view: &str, channel: Channel) -> String {
    format!("@anon:{view}.{}", channel.name())
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompilationPlan {
    /// View indices in materialization order.
    pub order: Vec<usize>,
    /// child view index -> (parent view index, constraint name).
    pub nest_parent: BTreeMap<usize, (usize, String)>,
    /// Edges target-view -> referencing-view, for reresolution.
    pub ref_edges: Vec<(usize, usize)>,
    /// Scales in training order.
    pub scales: Vec<ScalePlan>,
    /// Constraint mappings in application order (indices into
    /// `doc.constraint_mappings`).
    pub mappings: Vec<usize>,
}

impl CompilationPlan {
    /// Views that transitively copy properties from `view`, in plan order.
    pub fn dependents_of(&self, view_idx: usize) -> Vec<usize> {
        let mut hit: BTreeSet<usize> = BTreeSet::new();
        hit.insert(view_idx);
        let mut out = Vec::new();
        for &v in &self.order {
            if self
                .ref_edges
                .iter()
                .any(|(from, to)| *to == v && hit.contains(from))
            {
                hit.insert(v);
                out.push(v);
            }
        }
        out
    }
}

/// Build the compilation plan, rejecting cyclic references, ambiguous or
/// missing join paths, and references that cannot select a unique mark.
pub fn plan(doc: &SpecDocument, db: &Database) -> Result<CompilationPlan, CompileError> {
    let n = doc.views.len();
    let mut edges: BTreeSet<(usize, usize)> = BTreeSet::new(); // (from, to): from before to
    let mut ref_edges: Vec<(usize, usize)> = Vec::new();
    let mut nest_parent: BTreeMap<usize, (usize, String)> = BTreeMap::new();

    for (i, view) in doc.views.iter().enumerate() {
        let base = doc
            .view_base_table(view)
            .ok_or_else(|| CompileError::BadRef {
                view: view.name.clone(),
                message: "source does not resolve to a table".into(),
            })?
            .to_string();
        for cv in view.channels.values() {
            let ChannelValue::Ref(fr) = cv else { continue };
            let j = doc
                .view_index(&fr.view)
                .ok_or_else(|| CompileError::BadRef {
                    view: view.name.clone(),
                    message: format!("unknown referenced view `{}`", fr.view),
                })?;
            let target_view = &doc.views[j];
            let target_base = doc
                .view_base_table(target_view)
                .ok_or_else(|| CompileError::BadRef {
                    view: view.name.clone(),
                    message: format!("referenced view `{}` has no base table", fr.view),
                })?
                .to_string();

            // The reference must derive a unique value: an unambiguous join
            // path from this view's base table to the target's, every hop
            // toward a key side. Same-table references are trivially unique.
            match join_path(db, &base, &target_base) {
                JoinPath::Path(_) => {}
                JoinPath::None => {
                    return Err(CompileError::NoPath {
                        view: view.name.clone(),
                        from: base,
                        to: target_base,
                    })
                }
                JoinPath::Ambiguous => {
                    return Err(CompileError::AmbiguousPath {
                        view: view.name.clone(),
                        from: base,
                        to: target_base,
                    })
                }
            }

            // The target is selected by matching its back key, which must be
            // a single attribute to compare against the key expression.
            let target_decl = doc.table(&target_base).ok_or_else(|| CompileError::BadRef {
                view: view.name.clone(),
                message: format!("unknown table `{target_base}`"),
            })?;
            if target_decl.primary.len() != 1 {
                return Err(CompileError::BadRef {
                    view: view.name.clone(),
                    message: format!(
                        "referenced view `{}` is keyed by a composite key ({}); references need a single-attribute key",
                        fr.view,
                        target_decl.primary.join(",")
                    ),
                });
            }

            if let RefKey::Constraint(c) = &fr.key {
                let fk = doc.constraint(c).ok_or_else(|| CompileError::BadRef {
                    view: view.name.clone(),
                    message: format!("unknown constraint `{c}` in reference key"),
                })?;
                if fk.source_table != base {
                    return Err(CompileError::BadRef {
                        view: view.name.clone(),
                        message: format!(
                            "reference key `{c}` constrains `{}`, not this view's base table `{base}`",
                            fk.source_table
                        ),
                    });
                }
                if fk.source_attrs.len() != 1 {
                    return Err(CompileError::BadRef {
                        view: view.name.clone(),
                        message: format!("reference key `{c}` spans {} attributes, need exactly 1", fk.source_attrs.len()),
                    });
                }
            }

            edges.insert((j, i));
            ref_edges.push((j, i));
        }
    }

    for (mi, mapping) in doc.constraint_mappings.iter().enumerate() {
        let MappingMethod::Nest { child, parent } = &mapping.method else {
            continue;
        };
        let ci = doc.view_index(child).ok_or_else(|| CompileError::Constraint {
            constraint: mapping.constraint.clone(),
            message: format!("unknown child view `{child}`"),
        })?;
        let pi = doc.view_index(parent).ok_or_else(|| CompileError::Constraint {
            constraint: mapping.constraint.clone(),
            message: format!("unknown parent view `{parent}`"),
        })?;
        if nest_parent.insert(ci, (pi, mapping.constraint.clone())).is_some() {
            return Err(CompileError::Constraint {
                constraint: mapping.constraint.clone(),
                message: format!("view `{child}` is nested by more than one mapping"),
            });
        }
        let child_view = &doc.views[ci];
        if child_view
            .channels
            .values()
            .any(|cv| matches!(cv, ChannelValue::Ref(_)))
        {
            return Err(CompileError::Constraint {
                constraint: mapping.constraint.clone(),
                message: format!("nested view `{child}` cannot also use foreign references"),
            });
        }
        if child_view
            .channels
            .values()
            .any(|cv| matches!(cv, ChannelValue::Auto))
        {
            return Err(CompileError::Constraint {
                constraint: mapping.constraint.clone(),
                message: format!("nested view `{child}` cannot use auto() extents"),
            });
        }
        edges.insert((pi, ci));
        let _ = mi;
    }

    // Kahn's algorithm; ties broken by spec order so plans are stable.
    let mut indegree = vec![0usize; n];
    for (_, to) in &edges {
        indegree[*to] += 1;
    }
    let mut ready: BTreeSet<usize> = (0..n).filter(|i| indegree[*i] == 0).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(&next) = ready.iter().next() {
        ready.remove(&next);
        order.push(next);
        for (from, to) in &edges {
            if *from == next {
                indegree[*to] -= 1;
                if indegree[*to] == 0 {
                    ready.insert(*to);
                }
            }
        }
    }
    if order.len() < n {
        let stuck: Vec<String> = (0..n)
            .filter(|i| !order.contains(i))
            .map(|i| doc.views[i].name.clone())
            .collect();
        return Err(CompileError::Cycle(stuck));
    }

    let scales = schedule_scales(doc)?;
    let mappings = (0..doc.constraint_mappings.len()).collect();

    Ok(CompilationPlan {
        order,
        nest_parent,
        ref_edges,
        scales,
        mappings,
    })
}

/// Scale-training schedule: named scales in declaration order, then one
/// anonymous scale per unnamed mapping in (view, channel) order.
fn schedule_scales(doc: &SpecDocument) -> Result<Vec<ScalePlan>, CompileError> {
    let mut plans: Vec<ScalePlan> = doc
        .scales
        .iter()
        .map(|s| ScalePlan {
            key: s.name.clone(),
            spec: s.clone(),
            contributors: Vec::new(),
        })
        .collect();

    for (i, view) in doc.views.iter().enumerate() {
        let row_schema = doc.view_row_schema(view).ok_or_else(|| CompileError::BadRef {
            view: view.name.clone(),
            message: "source does not resolve".into(),
        })?;
        for (channel, cv) in &view.channels {
            let ChannelValue::Map { expr, scale } = cv else {
                continue;
            };
            match scale {
                Some(name) => {
                    let plan = plans
                        .iter_mut()
                        .find(|p| p.key == *name)
                        .ok_or_else(|| CompileError::BadRef {
                            view: view.name.clone(),
                            message: format!("unknown scale `{name}`"),
                        })?;
                    plan.contributors.push((i, *channel));
                }
                None => {
                    let ty = expr.type_of(&row_schema).map_err(|e| CompileError::Data {
                        view: view.name.clone(),
                        row: 0,
                        message: e.to_string(),
                    })?;
                    let kind = infer_scale_kind(*channel, ty);
                    let key = anon_scale_key(&view.name, *channel);
                    plans.push(ScalePlan {
                        key: key.clone(),
                        spec: ScaleSpec {
                            name: key,
                            kind,
                            domain: None,
                            range: None,
                        },
                        contributors: vec![(i, *channel)],
                    });
                }
            }
        }
    }

    Ok(plans)
}
