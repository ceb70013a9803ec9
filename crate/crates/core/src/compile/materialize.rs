//! Materialization: evaluate every channel of every view in plan order.
//! Constants become literals, attribute maps go through their trained
//! scale, foreign references copy the referenced mark's resolved absolute
//! properties, and auto() extents are filled by grid layout.

use std::collections::{BTreeMap, HashMap};

use crate::expr::RowSchema;
use crate::relational::Database;
use crate::scale::{self, ScaleOutput, TrainedRange, TrainedScale};
use crate::spec::{
    Channel, ChannelValue, RefKey, ScaleKind, SourceRef, SpecDocument, ViewSpec,
};
use crate::value::Value;

use super::plan::{anon_scale_key, CompilationPlan};
use super::{
    Canvas, CanvasOwner, ChannelOut, CompileError, MarkTable, Rect, RefBinding, Scene,
};

/// Default categorical palette for color scales without an explicit range.
pub const DEFAULT_PALETTE: [&str; 8] = [
    "#4c78a8", "#f58518", "#54a24b", "#e45756", "#72b7b2", "#b279a2", "#ff9da6", "#9d755d",
];

/// Width of the gutter between auto-laid-out grid cells, in pixels.
pub const GUTTER_PX: f64 = 4.0;

/// Evaluation context of one view: its (possibly widened) rows, the schema
/// resolving bare and qualified names, and the back key per row.
#[derive(Debug, Clone)]
pub struct RowContext {
    pub rows: Vec<Vec<Value>>,
    pub schema: RowSchema,
    pub back_keys: Vec<Vec<Value>>,
}

/// Everything materialization produces: the scene plus the trained scales
/// and per-view row contexts the checker reuses.
#[derive(Debug, Clone)]
pub struct Materialized {
    pub scene: Scene,
    pub scales: BTreeMap<String, TrainedScale>,
    pub contexts: Vec<RowContext>,
}

fn build_context(
    doc: &SpecDocument,
    db: &Database,
    view: &ViewSpec,
) -> Result<RowContext, CompileError> {
    let schema = doc.view_row_schema(view).ok_or_else(|| CompileError::BadRef {
        view: view.name.clone(),
        message: "source does not resolve".into(),
    })?;
    match &view.source {
        SourceRef::Table(name) => {
            let table = db.table(name).ok_or_else(|| CompileError::BadRef {
                view: view.name.clone(),
                message: format!("unknown table `{name}`"),
            })?;
            let primary: Vec<String> = table
                .primary_key()
                .map(|pk| pk.to_vec())
                .unwrap_or_default();
            let rows: Vec<Vec<Value>> = table
                .rows()
                .iter()
                .map(|r| {
                    let mut wide = r.clone();
                    wide.extend(r.iter().cloned());
                    wide
                })
                .collect();
            let back_keys = (0..table.len())
                .map(|i| table.key_values(i, &primary))
                .collect();
            Ok(RowContext {
                rows,
                schema,
                back_keys,
            })
        }
        SourceRef::Constraint(cname) => {
            let fk = db.constraint(cname).ok_or_else(|| CompileError::BadRef {
                view: view.name.clone(),
                message: format!("unknown constraint `{cname}`"),
            })?;
            let source = db.table(&fk.source_table).expect("validated");
            let target = db.table(&fk.target_table).expect("validated");
            let src_idx: Vec<usize> = fk
                .source_attrs
                .iter()
                .map(|a| source.attr_index(a).expect("validated"))
                .collect();
            let tgt_idx: Vec<usize> = fk
                .target_attrs
                .iter()
                .map(|a| target.attr_index(a).expect("validated"))
                .collect();
            let mut lookup: HashMap<Vec<&Value>, Vec<usize>> = HashMap::new();
            for (i, row) in target.rows().iter().enumerate() {
                lookup
                    .entry(tgt_idx.iter().map(|&j| &row[j]).collect())
                    .or_default()
                    .push(i);
            }
            let self_referencing = fk.source_table == fk.target_table;
            let mut rows = Vec::with_capacity(source.len());
            for (i, s_row) in source.rows().iter().enumerate() {
                let key: Vec<&Value> = src_idx.iter().map(|&j| &s_row[j]).collect();
                let matches = lookup.get(&key).map(Vec::as_slice).unwrap_or(&[]);
                if matches.len() != 1 {
                    return Err(CompileError::Constraint {
                        constraint: cname.clone(),
                        message: format!(
                            "row {i} of `{}` matches {} target rows; rendering `{cname}` as a table needs exactly one",
                            fk.source_table,
                            matches.len()
                        ),
                    });
                }
                let mut wide = s_row.clone();
                wide.extend(s_row.iter().cloned());
                if !self_referencing {
                    wide.extend(target.rows()[matches[0]].iter().cloned());
                }
                rows.push(wide);
            }
            let primary: Vec<String> = source
                .primary_key()
                .map(|pk| pk.to_vec())
                .unwrap_or_default();
            let back_keys = (0..source.len())
                .map(|i| source.key_values(i, &primary))
                .collect();
            Ok(RowContext {
                rows,
                schema,
                back_keys,
            })
        }
    }
}

/// Drawing area of a view before canvas assignment: the root canvas for
/// ordinary views, the parent grid cell for nested ones. Used to default
/// scale ranges.
fn view_frame(
    doc: &SpecDocument,
    db: &Database,
    plan: &CompilationPlan,
    view_idx: usize,
) -> Result<(f64, f64), CompileError> {
    match plan.nest_parent.get(&view_idx) {
        None => Ok((doc.canvas.width, doc.canvas.height)),
        Some((parent_idx, _)) => {
            let parent = &doc.views[*parent_idx];
            let dim = |channel: Channel| -> Result<f64, CompileError> {
                match parent.channel(channel) {
                    Some(ChannelValue::Const(v)) => v.as_f64().ok_or_else(|| CompileError::Layout {
                        view: parent.name.clone(),
                        message: "parent extent must be numeric".into(),
                    }),
                    Some(ChannelValue::Auto) => {
                        let (w, h) = view_frame(doc, db, plan, *parent_idx)?;
                        let n = db
                            .table(doc.view_base_table(parent).unwrap_or_default())
                            .map(|t| t.len())
                            .unwrap_or(0)
                            .max(1);
                        let ncols = parent.facets_per_row.unwrap_or(n as u32).max(1) as usize;
                        let nrows = n.div_ceil(ncols);
                        Ok(match channel {
                            Channel::W => w / ncols as f64 - GUTTER_PX,
                            _ => h / nrows as f64 - GUTTER_PX,
                        })
                    }
                    None => Ok(10.0),
                    Some(_) => Err(CompileError::Layout {
                        view: parent.name.clone(),
                        message:
                            "nested children need uniform parent extents (constant or auto w/h)"
                                .into(),
                    }),
                }
            };
            Ok((dim(Channel::W)?, dim(Channel::H)?))
        }
    }
}

fn default_range(
    channel: Channel,
    kind: ScaleKind,
    frame: (f64, f64),
) -> TrainedRange {
    if kind == ScaleKind::Identity {
        return TrainedRange::Passthrough;
    }
    match channel {
        Channel::X | Channel::X2 | Channel::Dx | Channel::W => {
            TrainedRange::Interval(0.0, frame.0)
        }
        Channel::Y | Channel::Y2 | Channel::Dy | Channel::H => {
            TrainedRange::Interval(0.0, frame.1)
        }
        Channel::Opacity => TrainedRange::Interval(0.0, 1.0),
        Channel::Color => {
            TrainedRange::Palette(DEFAULT_PALETTE.iter().map(|s| s.to_string()).collect())
        }
        Channel::Text => TrainedRange::Passthrough,
    }
}

fn train_scales(
    doc: &SpecDocument,
    db: &Database,
    plan: &CompilationPlan,
    contexts: &[RowContext],
) -> Result<BTreeMap<String, TrainedScale>, CompileError> {
    let mut trained = BTreeMap::new();
    for sp in &plan.scales {
        if sp.contributors.is_empty() && sp.spec.domain.is_none() && sp.spec.kind != ScaleKind::Identity {
            // Declared but unused and untrainable; nothing resolves it.
            continue;
        }
        let mut columns: Vec<Vec<Value>> = Vec::with_capacity(sp.contributors.len());
        for (view_idx, channel) in &sp.contributors {
            let view = &doc.views[*view_idx];
            let Some(ChannelValue::Map { expr, .. }) = view.channel(*channel) else {
                continue;
            };
            let ctx = &contexts[*view_idx];
            let mut col = Vec::with_capacity(ctx.rows.len());
            for (i, row) in ctx.rows.iter().enumerate() {
                let v = expr.eval(row, &ctx.schema, i).map_err(|e| CompileError::Data {
                    view: view.name.clone(),
                    row: i,
                    message: e.to_string(),
                })?;
                col.push(v);
            }
            columns.push(col);
        }
        let frame = match sp.contributors.first() {
            Some((view_idx, _)) => view_frame(doc, db, plan, *view_idx)?,
            None => (doc.canvas.width, doc.canvas.height),
        };
        let range = default_range(
            sp.contributors.first().map(|(_, c)| *c).unwrap_or(Channel::X),
            sp.spec.kind,
            frame,
        );
        let refs: Vec<&[Value]> = columns.iter().map(Vec::as_slice).collect();
        let contributors = sp
            .contributors
            .iter()
            .map(|(i, c)| (doc.views[*i].name.clone(), *c))
            .collect();
        let scale = scale::train(&sp.spec, &refs, range, contributors)?;
        trained.insert(sp.key.clone(), scale);
    }
    Ok(trained)
}

fn scale_key(view: &ViewSpec, channel: Channel, scale: &Option<String>) -> String {
    match scale {
        Some(s) => s.clone(),
        None => anon_scale_key(&view.name, channel),
    }
}

/// Materialize every view in plan order. Views with auto() extents are laid
/// out as they materialize; nested views are assigned to their parent-mark
/// canvases. Foreign references resolve to the target's absolute values.
pub fn materialize(
    doc: &SpecDocument,
    db: &Database,
    plan: &CompilationPlan,
) -> Result<Materialized, CompileError> {
    let mut contexts = Vec::with_capacity(doc.views.len());
    for view in &doc.views {
        contexts.push(build_context(doc, db, view)?);
    }
    let scales = train_scales(doc, db, plan, &contexts)?;

    let mut scene = Scene {
        canvases: vec![Canvas {
            owner: CanvasOwner::Root,
            extent: Rect {
                x: 0.0,
                y: 0.0,
                w: doc.canvas.width,
                h: doc.canvas.height,
            },
        }],
        marks: doc
            .views
            .iter()
            .map(|v| MarkTable {
                view: v.name.clone(),
                mark: v.mark,
                back_keys: Vec::new(),
                rows: Vec::new(),
                canvas_ids: Vec::new(),
                unresolved_auto: Default::default(),
                ref_bindings: BTreeMap::new(),
            })
            .collect(),
    };
    // Canvases created for each view that acts as a nest parent.
    let mut parent_canvases: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    let parents_needed: std::collections::BTreeSet<usize> =
        plan.nest_parent.values().map(|(p, _)| *p).collect();

    for &vi in &plan.order {
        let view = &doc.views[vi];
        let ctx = &contexts[vi];
        let n = ctx.rows.len();

        let mut rows: Vec<BTreeMap<Channel, ChannelOut>> = vec![BTreeMap::new(); n];
        let mut unresolved_auto = std::collections::BTreeSet::new();
        let mut ref_bindings = BTreeMap::new();

        for (&channel, cv) in &view.channels {
            match cv {
                ChannelValue::Const(v) => {
                    let out = if channel.is_spatial() || channel == Channel::Opacity {
                        ChannelOut::Px(v.as_f64().ok_or_else(|| CompileError::Data {
                            view: view.name.clone(),
                            row: 0,
                            message: format!("constant {v} on `{}` must be numeric", channel.name()),
                        })?)
                    } else {
                        ChannelOut::Str(v.to_string())
                    };
                    for row in rows.iter_mut() {
                        row.insert(channel, out.clone());
                    }
                }
                ChannelValue::Auto => {
                    unresolved_auto.insert(channel);
                    for row in rows.iter_mut() {
                        row.insert(channel, ChannelOut::Px(0.0));
                    }
                }
                ChannelValue::Map { expr, scale } => {
                    let key = scale_key(view, channel, scale);
                    let trained = scales.get(&key).ok_or_else(|| CompileError::BadRef {
                        view: view.name.clone(),
                        message: format!("scale `{key}` was not trained"),
                    })?;
                    for (i, row) in ctx.rows.iter().enumerate() {
                        let v = expr.eval(row, &ctx.schema, i).map_err(|e| {
                            CompileError::Data {
                                view: view.name.clone(),
                                row: i,
                                message: e.to_string(),
                            }
                        })?;
                        let out = match scale::apply(trained, &v)? {
                            ScaleOutput::Px(px) => ChannelOut::Px(px),
                            ScaleOutput::Str(s) => {
                                if channel.is_spatial() || channel == Channel::Opacity {
                                    return Err(CompileError::Data {
                                        view: view.name.clone(),
                                        row: i,
                                        message: format!(
                                            "scale `{key}` produced a categorical value on spatial channel `{}`",
                                            channel.name()
                                        ),
                                    });
                                }
                                ChannelOut::Str(s)
                            }
                        };
                        rows[i].insert(channel, out);
                    }
                }
                ChannelValue::Ref(fr) => {
                    let target_idx =
                        doc.view_index(&fr.view).ok_or_else(|| CompileError::BadRef {
                            view: view.name.clone(),
                            message: format!("unknown referenced view `{}`", fr.view),
                        })?;
                    let target = &scene.marks[target_idx];
                    // Single-attribute back keys, checked at plan time.
                    let mut index: HashMap<&Value, Vec<usize>> = HashMap::new();
                    for (i, bk) in target.back_keys.iter().enumerate() {
                        index.entry(&bk[0]).or_default().push(i);
                    }
                    let mut bound = Vec::with_capacity(n);
                    for (i, row) in ctx.rows.iter().enumerate() {
                        let key_value = match &fr.key {
                            RefKey::Expr(e) => {
                                e.eval(row, &ctx.schema, i).map_err(|e| CompileError::Data {
                                    view: view.name.clone(),
                                    row: i,
                                    message: e.to_string(),
                                })?
                            }
                            RefKey::Constraint(c) => {
                                let fk = doc.constraint(c).expect("plan validated");
                                let attr = &fk.source_attrs[0];
                                let (idx, _) =
                                    ctx.schema.resolve(None, attr).ok_or_else(|| {
                                        CompileError::BadRef {
                                            view: view.name.clone(),
                                            message: format!(
                                                "constraint key attribute `{attr}` not in row schema"
                                            ),
                                        }
                                    })?;
                                row[idx].clone()
                            }
                        };
                        let matches = index.get(&key_value).map(Vec::as_slice).unwrap_or(&[]);
                        if matches.len() != 1 {
                            return Err(CompileError::RefResolution {
                                view: view.name.clone(),
                                row: i,
                                key: key_value,
                                target: fr.view.clone(),
                                found: matches.len(),
                            });
                        }
                        bound.push(matches[0]);
                    }
                    for (i, &target_row) in bound.iter().enumerate() {
                        let out = scene
                            .absolute(target, target_row, fr.prop)
                            .ok_or_else(|| CompileError::BadRef {
                                view: view.name.clone(),
                                message: format!(
                                    "referenced property `{}` is not resolved on `{}`",
                                    fr.prop.name(),
                                    fr.view
                                ),
                            })?;
                        rows[i].insert(channel, out);
                    }
                    ref_bindings.insert(
                        channel,
                        RefBinding {
                            target_view: fr.view.clone(),
                            prop: fr.prop,
                            target_rows: bound,
                        },
                    );
                }
            }
        }

        // Box marks always carry an extent.
        if view.mark.is_box() {
            for c in [Channel::W, Channel::H] {
                if !view.channels.contains_key(&c) {
                    for row in rows.iter_mut() {
                        row.insert(c, ChannelOut::Px(10.0));
                    }
                }
            }
        }

        let table = &mut scene.marks[vi];
        table.back_keys = ctx.back_keys.clone();
        table.rows = rows;
        table.canvas_ids = vec![Scene::ROOT_CANVAS; n];
        table.unresolved_auto = unresolved_auto;
        table.ref_bindings = ref_bindings;

        if !scene.marks[vi].unresolved_auto.is_empty() {
            layout_auto(doc, db, plan, &mut scene, vi)?;
        }

        if let Some((parent_idx, fk_name)) = plan.nest_parent.get(&vi) {
            assign_nest(doc, db, &mut scene, &mut parent_canvases, vi, *parent_idx, fk_name, &contexts)?;
        }

        if parents_needed.contains(&vi) {
            create_parent_canvases(&mut scene, &mut parent_canvases, vi)?;
        }

        // Spatial values must be finite reals.
        for (i, row) in scene.marks[vi].rows.iter().enumerate() {
            for (c, out) in row {
                if let ChannelOut::Px(v) = out {
                    if !v.is_finite() {
                        return Err(CompileError::Data {
                            view: view.name.clone(),
                            row: i,
                            message: format!("non-finite value on channel `{}`", c.name()),
                        });
                    }
                }
            }
        }
    }

    Ok(Materialized {
        scene,
        scales,
        contexts,
    })
}

/// Fill auto() channels of a root-canvas view: grid cells of
/// `canvas / (ncols, nrows)` minus a fixed gutter, where ncols is the
/// declared facets-per-row (defaulting to the mark count) and
/// nrows = ceil(n / ncols). Auto positions take cell centers in row-major
/// order.
fn layout_auto(
    doc: &SpecDocument,
    db: &Database,
    plan: &CompilationPlan,
    scene: &mut Scene,
    view_idx: usize,
) -> Result<(), CompileError> {
    let view = &doc.views[view_idx];
    let (w, h) = view_frame(doc, db, plan, view_idx)?;
    let table = &mut scene.marks[view_idx];
    let n = table.len();
    if n == 0 {
        table.unresolved_auto.clear();
        return Ok(());
    }
    let ncols = view.facets_per_row.unwrap_or(n as u32).max(1) as usize;
    let nrows = n.div_ceil(ncols);
    let cell_w = w / ncols as f64 - GUTTER_PX;
    let cell_h = h / nrows as f64 - GUTTER_PX;
    if cell_w <= 0.0 || cell_h <= 0.0 {
        return Err(CompileError::Layout {
            view: view.name.clone(),
            message: "auto layout produced non-positive cell size".into(),
        });
    }
    let channels: Vec<Channel> = table.unresolved_auto.iter().copied().collect();
    for c in channels {
        for (i, row) in table.rows.iter_mut().enumerate() {
            let col = i % ncols;
            let grid_row = i / ncols;
            let v = match c {
                Channel::W => cell_w,
                Channel::H => cell_h,
                Channel::X => (col as f64 + 0.5) * w / ncols as f64,
                Channel::Y => (grid_row as f64 + 0.5) * h / nrows as f64,
                _ => 0.0,
            };
            row.insert(c, ChannelOut::Px(v));
        }
    }
    table.unresolved_auto.clear();
    Ok(())
}

fn create_parent_canvases(
    scene: &mut Scene,
    parent_canvases: &mut BTreeMap<usize, Vec<usize>>,
    parent_idx: usize,
) -> Result<(), CompileError> {
    if parent_canvases.contains_key(&parent_idx) {
        return Ok(());
    }
    let parent = &scene.marks[parent_idx];
    let mut ids = Vec::with_capacity(parent.len());
    let mut new_canvases = Vec::with_capacity(parent.len());
    for row in 0..parent.len() {
        let extent = parent.mark_bounds(row);
        if extent.w <= 0.0 || extent.h <= 0.0 {
            return Err(CompileError::Layout {
                view: parent.view.clone(),
                message: format!("parent mark {row} has zero area, cannot nest into it"),
            });
        }
        new_canvases.push(Canvas {
            owner: CanvasOwner::Mark {
                view: parent.view.clone(),
                row,
                back_key: parent.back_keys[row].clone(),
                parent_canvas: parent.canvas_ids[row],
            },
            extent,
        });
    }
    for c in new_canvases {
        scene.canvases.push(c);
        ids.push(scene.canvases.len() - 1);
    }
    parent_canvases.insert(parent_idx, ids);
    Ok(())
}

/// Assign each child mark to the canvas of its related parent mark: the
/// child rows whose foreign-key value equals the parent row's target
/// attributes render within that parent's extent.
fn assign_nest(
    doc: &SpecDocument,
    db: &Database,
    scene: &mut Scene,
    parent_canvases: &mut BTreeMap<usize, Vec<usize>>,
    child_idx: usize,
    parent_idx: usize,
    fk_name: &str,
    contexts: &[RowContext],
) -> Result<(), CompileError> {
    create_parent_canvases(scene, parent_canvases, parent_idx)?;
    let fk = db.constraint(fk_name).ok_or_else(|| CompileError::Constraint {
        constraint: fk_name.to_string(),
        message: "unknown constraint".into(),
    })?;
    let parent_table = db.table(&fk.target_table).expect("validated");
    let mut lookup: HashMap<Vec<&Value>, usize> = HashMap::new();
    let tgt_idx: Vec<usize> = fk
        .target_attrs
        .iter()
        .map(|a| parent_table.attr_index(a).expect("validated"))
        .collect();
    for (i, row) in parent_table.rows().iter().enumerate() {
        lookup.insert(tgt_idx.iter().map(|&j| &row[j]).collect(), i);
    }

    let child_ctx = &contexts[child_idx];
    let src_cols: Vec<usize> = fk
        .source_attrs
        .iter()
        .map(|a| {
            child_ctx
                .schema
                .resolve(None, a)
                .map(|(i, _)| i)
                .ok_or_else(|| CompileError::Constraint {
                    constraint: fk_name.to_string(),
                    message: format!("source attribute `{a}` not in child rows"),
                })
        })
        .collect::<Result<_, _>>()?;

    let canvas_ids = parent_canvases.get(&parent_idx).expect("just created").clone();
    let child = &mut scene.marks[child_idx];
    for (i, row) in child_ctx.rows.iter().enumerate() {
        let key: Vec<&Value> = src_cols.iter().map(|&j| &row[j]).collect();
        let parent_row = lookup.get(&key).ok_or_else(|| CompileError::Constraint {
            constraint: fk_name.to_string(),
            message: format!(
                "child row {i} references ({}), which no parent row carries (database not validated?)",
                key.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
            ),
        })?;
        child.canvas_ids[i] = canvas_ids[*parent_row];
    }
    let _ = doc;
    Ok(())
}

/// Recompute every foreign-reference channel of the views downstream of
/// `perturbed`, so copied properties again equal their targets bit-exactly.
/// Bindings are stable: keys identify marks, not positions.
pub fn reresolve(scene: &mut Scene, plan: &CompilationPlan, doc: &SpecDocument, perturbed: &str) {
    let Some(perturbed_idx) = doc.view_index(perturbed) else {
        return;
    };
    for vi in plan.dependents_of(perturbed_idx) {
        let bindings = scene.marks[vi].ref_bindings.clone();
        for (channel, binding) in bindings {
            let Some(target_idx) = doc.view_index(&binding.target_view) else {
                continue;
            };
            let updates: Vec<ChannelOut> = {
                let target = &scene.marks[target_idx];
                binding
                    .target_rows
                    .iter()
                    .map(|&tr| {
                        scene
                            .absolute(target, tr, binding.prop)
                            .expect("binding resolved at materialization")
                    })
                    .collect()
            };
            let table = &mut scene.marks[vi];
            for (i, out) in updates.into_iter().enumerate() {
                table.rows[i].insert(channel, out);
            }
        }
    }
}
