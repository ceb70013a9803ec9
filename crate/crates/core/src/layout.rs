//! Scene-level constraint machinery: overplotting detection, jitter repair,
//! shared-scale reinforcement levels, and nesting verification.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::compile::{ChannelOut, MarkTable, Scene};
use crate::relational::ForeignKey;
use crate::scale::TrainedScale;
use crate::spec::{Axis, Channel, ChannelValue, SpecDocument};
use crate::value::Value;

/// Marks that render indistinguishably: every spatial channel within
/// epsilon and every distinguishing channel (text, color) exactly equal.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ViolationGroup {
    pub view: String,
    pub back_keys: Vec<Vec<Value>>,
}

fn indistinguishable(a: &MarkTable, i: usize, j: usize, epsilon: f64) -> bool {
    for c in Channel::ALL {
        let (vi, vj) = (a.rows[i].get(&c), a.rows[j].get(&c));
        match (vi, vj) {
            (None, None) => {}
            (Some(ChannelOut::Px(x)), Some(ChannelOut::Px(y))) if c.is_spatial() => {
                if (x - y).abs() > epsilon {
                    return false;
                }
            }
            (Some(x), Some(y)) => {
                if x != y {
                    return false;
                }
            }
            _ => return false,
        }
    }
    // Marks on different canvases occupy different drawing regions.
    a.canvas_ids[i] == a.canvas_ids[j]
}

/// Group marks whose rendered channel values are pairwise indistinguishable.
/// Groups are the connected components of the pairwise relation; only
/// groups of two or more marks are violations.
pub fn detect_overplotting(table: &MarkTable, epsilon: f64) -> Vec<ViolationGroup> {
    let n = table.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut Vec<usize>, i: usize) -> usize {
        if parent[i] != i {
            let root = find(parent, parent[i]);
            parent[i] = root;
        }
        parent[i]
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if indistinguishable(table, i, j, epsilon) {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                if ri != rj {
                    parent[rj] = ri;
                }
            }
        }
    }
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..n {
        let root = find(&mut parent, i);
        groups.entry(root).or_default().push(i);
    }
    groups
        .into_values()
        .filter(|members| members.len() >= 2)
        .map(|members| ViolationGroup {
            view: table.view.clone(),
            back_keys: members.iter().map(|&i| table.back_keys[i].clone()).collect(),
        })
        .collect()
}

/// Deterministic generator for jitter noise (splitmix64), so a fixed seed
/// reproduces the same layout on every platform and run.
pub struct JitterRng {
    state: u64,
}

impl JitterRng {
    pub fn new(seed: u64) -> JitterRng {
        JitterRng { state: seed }
    }

    fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9e3779b97f4a7c15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        z ^ (z >> 31)
    }

    /// Uniform draw from [-magnitude, magnitude).
    pub fn jitter(&mut self, magnitude: f64) -> f64 {
        let unit = (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64;
        (unit * 2.0 - 1.0) * magnitude
    }
}

/// Add uniform noise in [-magnitude, magnitude) to the position channels of
/// a view's marks. Reference-derived channels are left alone; the caller
/// must reresolve dependent views afterwards so copied positions stay
/// consistent.
pub fn jitter(table: &mut MarkTable, magnitude: f64, seed: u64) {
    if magnitude == 0.0 {
        return;
    }
    let mut rng = JitterRng::new(seed);
    for i in 0..table.len() {
        for c in [Channel::X, Channel::Y] {
            if table.ref_bindings.contains_key(&c) {
                continue;
            }
            if let Some(ChannelOut::Px(v)) = table.rows[i].get(&c).cloned() {
                let noisy = v + rng.jitter(magnitude);
                table.rows[i].insert(c, ChannelOut::Px(noisy));
            }
        }
    }
}

/// How strongly a shared-scale mapping reinforces its constraint.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", content = "detail")]
pub enum AchievedLevel {
    /// The mapping does not even share domains, or an endpoint attribute
    /// has no spatial channel: the constraint is not preserved.
    NotPreserved(String),
    /// Highest reinforcement level whose conditions all hold (0..=4).
    Level(u8),
}

/// One endpoint of a shared-scale check: which view, channel, and trained
/// scale carry the constraint's attributes.
struct Endpoint<'a> {
    view_idx: usize,
    channel: Channel,
    scale: &'a TrainedScale,
}

fn endpoint<'a>(
    doc: &SpecDocument,
    scales: &'a BTreeMap<String, TrainedScale>,
    table_name: &str,
    attrs: &[String],
) -> Option<Endpoint<'a>> {
    for (view_idx, view) in doc.views.iter().enumerate() {
        if doc.view_base_table(view) != Some(table_name) {
            continue;
        }
        for (&channel, cv) in &view.channels {
            if channel.axis().is_none() {
                continue;
            }
            let ChannelValue::Map { expr, scale } = cv else {
                continue;
            };
            let referenced = expr.references();
            let hits_attr = attrs.iter().all(|a| {
                referenced
                    .iter()
                    .any(|(q, name)| name == a && q.as_deref().map_or(true, |q| q == table_name))
            });
            if !hits_attr {
                continue;
            }
            let key = match scale {
                Some(s) => s.clone(),
                None => crate::compile::anon_scale_key(&view.name, channel),
            };
            if let Some(trained) = scales.get(&key) {
                return Some(Endpoint {
                    view_idx,
                    channel,
                    scale: trained,
                });
            }
        }
    }
    None
}

/// Interval spanned by a view's marks along an axis, using effective
/// positions (position plus dx/dy offsets, box extents included).
fn view_extent(scene: &Scene, view_idx: usize, axis: Axis) -> Option<(f64, f64)> {
    let table = &scene.marks[view_idx];
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for row in 0..table.len() {
        let bounds = table.mark_bounds(row);
        let (ox, oy) = scene.canvas_origin(table.canvas_ids[row]);
        let (a, b) = match axis {
            Axis::X => (bounds.x + ox, bounds.x + ox + bounds.w),
            Axis::Y => (bounds.y + oy, bounds.y + oy + bounds.h),
        };
        lo = lo.min(a);
        hi = hi.max(b);
    }
    (lo <= hi).then_some((lo, hi))
}

fn gap(a: (f64, f64), b: (f64, f64)) -> f64 {
    (b.0 - a.1).max(a.0 - b.1).max(0.0)
}

/// Compute the highest reinforcement level a shared-scale mapping actually
/// achieves:
///   0: the endpoint scales have equal domains;
///   1: their ranges are equal as well;
///   2: both endpoints use the same channel;
///   3: the views' extents along that channel project to the same interval;
///   4: edge-to-edge distance along the orthogonal axis is within the
///      proximity threshold.
pub fn check_shared_scale(
    doc: &SpecDocument,
    scene: &Scene,
    scales: &BTreeMap<String, TrainedScale>,
    fk: &ForeignKey,
    proximity_px: f64,
) -> AchievedLevel {
    let Some(source) = endpoint(doc, scales, &fk.source_table, &fk.source_attrs) else {
        return AchievedLevel::NotPreserved(format!(
            "source attributes {}.({}) are not mapped to any spatial channel",
            fk.source_table,
            fk.source_attrs.join(",")
        ));
    };
    let Some(target) = endpoint(doc, scales, &fk.target_table, &fk.target_attrs) else {
        return AchievedLevel::NotPreserved(format!(
            "target attributes {}.({}) are not mapped to any spatial channel",
            fk.target_table,
            fk.target_attrs.join(",")
        ));
    };

    if source.scale.domain != target.scale.domain {
        return AchievedLevel::NotPreserved("scale domains differ".into());
    }
    let mut level = 0;

    if source.scale.range == target.scale.range {
        level = 1;
    } else {
        return AchievedLevel::Level(level);
    }

    if source.channel == target.channel {
        level = 2;
    } else {
        return AchievedLevel::Level(level);
    }

    let axis = source.channel.axis().expect("spatial channel");
    let (se, te) = match (
        view_extent(scene, source.view_idx, axis),
        view_extent(scene, target.view_idx, axis),
    ) {
        (Some(a), Some(b)) => (a, b),
        _ => return AchievedLevel::Level(level),
    };
    if se == te {
        level = 3;
    } else {
        return AchievedLevel::Level(level);
    }

    let ortho = axis.orthogonal();
    if let (Some(a), Some(b)) = (
        view_extent(scene, source.view_idx, ortho),
        view_extent(scene, target.view_idx, ortho),
    ) {
        if gap(a, b) <= proximity_px {
            level = 4;
        }
    }
    AchievedLevel::Level(level)
}

/// Verification result for one nest mapping: containment of every child
/// mark in its parent extent, and partition correctness (children across
/// parents exactly cover the child table).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NestCheck {
    pub constraint: String,
    pub child_view: String,
    pub parent_view: String,
    pub contained: usize,
    pub total: usize,
    pub partition_ok: bool,
}

impl NestCheck {
    pub fn ok(&self) -> bool {
        self.contained == self.total && self.partition_ok
    }
}

/// Check a compiled nest mapping: every child mark's bounding box must lie
/// inside its owning parent extent, and the child marks across all parent
/// canvases must exactly cover the child view's rows.
pub fn check_nest(
    doc: &SpecDocument,
    scene: &Scene,
    constraint: &str,
    child_view: &str,
    parent_view: &str,
) -> NestCheck {
    let child_idx = doc.view_index(child_view).expect("validated");
    let child = &scene.marks[child_idx];
    let mut contained = 0;
    let mut assigned = 0;
    for row in 0..child.len() {
        let canvas = &scene.canvases[child.canvas_ids[row]];
        let owned = matches!(
            &canvas.owner,
            crate::compile::CanvasOwner::Mark { view, .. } if view == parent_view
        );
        if !owned {
            continue;
        }
        assigned += 1;
        let bounds = child.mark_bounds(row);
        let cell = crate::compile::Rect {
            x: 0.0,
            y: 0.0,
            w: canvas.extent.w,
            h: canvas.extent.h,
        };
        if cell.contains(&bounds) {
            contained += 1;
        }
    }
    NestCheck {
        constraint: constraint.to_string(),
        child_view: child_view.to_string(),
        parent_view: parent_view.to_string(),
        contained,
        total: child.len(),
        // Every child mark must live in exactly one parent canvas; marks
        // are never duplicated, so assignment count equals row count iff
        // the partition covers the table.
        partition_ok: assigned == child.len(),
    }
}
