//! View compilation: planning (dependency order, reference checking), scale
//! training, and materialization of mark tables in canvas-local
//! coordinates.

mod materialize;
mod plan;

pub use materialize::{materialize, reresolve, Materialized};
pub use plan::{anon_scale_key, plan, CompilationPlan, ScalePlan};

use std::collections::BTreeMap;

use thiserror::Error;

use crate::scale::ScaleError;
use crate::spec::{Channel, MarkType};
use crate::value::Value;

#[derive(Debug, Error)]
pub enum CompileError {
    #[error("cyclic foreign references among views: {}", .0.join(", "))]
    Cycle(Vec<String>),
    #[error("view `{view}`: no join path from `{from}` to `{to}`")]
    NoPath {
        view: String,
        from: String,
        to: String,
    },
    #[error("view `{view}`: ambiguous join path from `{from}` to `{to}`")]
    AmbiguousPath {
        view: String,
        from: String,
        to: String,
    },
    #[error("view `{view}`: {message}")]
    BadRef { view: String, message: String },
    #[error("view `{view}`, row {row}: reference key {key} selects {found} marks in `{target}`, need exactly 1")]
    RefResolution {
        view: String,
        row: usize,
        key: Value,
        target: String,
        found: usize,
    },
    #[error("view `{view}`, row {row}: {message}")]
    Data {
        view: String,
        row: usize,
        message: String,
    },
    #[error(transparent)]
    Scale(#[from] ScaleError),
    #[error("view `{view}`: {message}")]
    Layout { view: String, message: String },
    #[error("constraint `{constraint}`: {message}")]
    Constraint {
        constraint: String,
        message: String,
    },
    #[error("rendering with unresolved auto channels in view `{0}`")]
    UnresolvedAuto(String),
}

/// Axis-aligned rectangle, origin at its top-left corner.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl Rect {
    pub fn contains(&self, other: &Rect) -> bool {
        other.x >= self.x
            && other.y >= self.y
            && other.x + other.w <= self.x + self.w
            && other.y + other.h <= self.y + self.h
    }
}

/// Who owns a canvas: the root drawing area, or one mark of a parent view.
#[derive(Debug, Clone, PartialEq)]
pub enum CanvasOwner {
    Root,
    Mark {
        view: String,
        row: usize,
        back_key: Vec<Value>,
        parent_canvas: usize,
    },
}

/// A drawing region. `extent` is in the owner's coordinate space (the
/// parent canvas), so absolute positions accumulate down the tree.
#[derive(Debug, Clone, PartialEq)]
pub struct Canvas {
    pub owner: CanvasOwner,
    pub extent: Rect,
}

/// Resolved value of one channel of one mark.
#[derive(Debug, Clone, PartialEq)]
pub enum ChannelOut {
    Px(f64),
    Str(String),
}

impl ChannelOut {
    pub fn as_px(&self) -> Option<f64> {
        match self {
            ChannelOut::Px(v) => Some(*v),
            _ => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            ChannelOut::Str(s) => Some(s),
            _ => None,
        }
    }
}

/// Materialized marks of one view: one mark per source row, resolved
/// channel values in canvas-local pixels, the source primary key per mark,
/// and the canvas each mark is drawn in.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkTable {
    pub view: String,
    pub mark: MarkType,
    pub back_keys: Vec<Vec<Value>>,
    pub rows: Vec<BTreeMap<Channel, ChannelOut>>,
    pub canvas_ids: Vec<usize>,
    pub unresolved_auto: std::collections::BTreeSet<Channel>,
    /// For every foreign-reference channel: the target view, the copied
    /// property, and the selected target row per mark. Key values do not
    /// move when marks do, so reresolution reuses these bindings.
    pub ref_bindings: BTreeMap<Channel, RefBinding>,
}

/// Resolved target of a foreign-reference channel.
#[derive(Debug, Clone, PartialEq)]
pub struct RefBinding {
    pub target_view: String,
    pub prop: Channel,
    pub target_rows: Vec<usize>,
}

impl MarkTable {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn channel(&self, row: usize, c: Channel) -> Option<&ChannelOut> {
        self.rows[row].get(&c)
    }

    pub fn px(&self, row: usize, c: Channel) -> Option<f64> {
        self.channel(row, c).and_then(ChannelOut::as_px)
    }

    /// Spatial extent of one mark in canvas-local coordinates: boxes are
    /// centered on (x, y) with w/h sizes, segments span their endpoints,
    /// points and labels sit at their (offset) anchor.
    pub fn mark_bounds(&self, row: usize) -> Rect {
        let x = self.px(row, Channel::X).unwrap_or(0.0);
        let y = self.px(row, Channel::Y).unwrap_or(0.0);
        let dx = self.px(row, Channel::Dx).unwrap_or(0.0);
        let dy = self.px(row, Channel::Dy).unwrap_or(0.0);
        match self.mark {
            m if m.is_box() => {
                let w = self.px(row, Channel::W).unwrap_or(0.0);
                let h = self.px(row, Channel::H).unwrap_or(0.0);
                Rect {
                    x: x - w / 2.0,
                    y: y - h / 2.0,
                    w,
                    h,
                }
            }
            MarkType::Line | MarkType::Link => {
                let x2 = self.px(row, Channel::X2).unwrap_or(x);
                let y2 = self.px(row, Channel::Y2).unwrap_or(y);
                Rect {
                    x: x.min(x2),
                    y: y.min(y2),
                    w: (x2 - x).abs(),
                    h: (y2 - y).abs(),
                }
            }
            _ => Rect {
                x: x + dx,
                y: y + dy,
                w: 0.0,
                h: 0.0,
            },
        }
    }
}

/// The compiled scene: canvases plus one mark table per view, indexed like
/// `doc.views`.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub canvases: Vec<Canvas>,
    pub marks: Vec<MarkTable>,
}

impl Scene {
    pub const ROOT_CANVAS: usize = 0;

    pub fn mark_table(&self, view: &str) -> Option<&MarkTable> {
        self.marks.iter().find(|m| m.view == view)
    }

    /// Absolute origin of a canvas, accumulated down the canvas tree.
    pub fn canvas_origin(&self, id: usize) -> (f64, f64) {
        let c = &self.canvases[id];
        match &c.owner {
            CanvasOwner::Root => (c.extent.x, c.extent.y),
            CanvasOwner::Mark { parent_canvas, .. } => {
                let (px, py) = self.canvas_origin(*parent_canvas);
                (px + c.extent.x, py + c.extent.y)
            }
        }
    }

    /// Absolute value of a mark's channel: canvas-local plus the owning
    /// canvas origin along the channel's axis (sizes and offsets do not
    /// translate).
    pub fn absolute(&self, table: &MarkTable, row: usize, c: Channel) -> Option<ChannelOut> {
        let out = table.channel(row, c)?.clone();
        let ChannelOut::Px(v) = out else {
            return Some(out);
        };
        let (ox, oy) = self.canvas_origin(table.canvas_ids[row]);
        let translated = match c {
            Channel::X | Channel::X2 => v + ox,
            Channel::Y | Channel::Y2 => v + oy,
            _ => v,
        };
        Some(ChannelOut::Px(translated))
    }
}
