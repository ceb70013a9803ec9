//! Data model, textual format, and parser for visualization specifications:
//! views, aesthetic mappings, scales, expressions, and constraint mappings.
//!
//! The on-disk form is UTF-8 JSON (see `spec-format.md` at the repository
//! root). Parsing collects diagnostics instead of failing fast; every
//! diagnostic carries a source position and a rule identifier.

pub mod json;
mod parse;
mod serialize;

pub use parse::parse_spec;
pub(crate) use parse::infer_scale_kind;
pub use serialize::serialize_spec;

use std::fmt;

use crate::expr::{Expression, RowSchema};
use crate::relational::Cardinality;
use crate::value::{AttributeDomain, Value};

/// A parse- or validation-time finding, ordered by source position.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub line: u32,
    pub col: u32,
    pub rule: &'static str,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}: {}", self.line, self.col, self.rule, self.message)
    }
}

/// Visual channels a mark property can be bound to. `sx`/`sy`/`ex`/`ey` are
/// accepted by the parser as aliases of `x`/`y`/`x2`/`y2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Channel {
    X,
    Y,
    X2,
    Y2,
    W,
    H,
    Dx,
    Dy,
    Text,
    Color,
    Opacity,
}

impl Channel {
    pub const ALL: [Channel; 11] = [
        Channel::X,
        Channel::Y,
        Channel::X2,
        Channel::Y2,
        Channel::W,
        Channel::H,
        Channel::Dx,
        Channel::Dy,
        Channel::Text,
        Channel::Color,
        Channel::Opacity,
    ];

    pub fn parse(name: &str) -> Option<Channel> {
        Some(match name {
            "x" | "sx" => Channel::X,
            "y" | "sy" => Channel::Y,
            "x2" | "ex" => Channel::X2,
            "y2" | "ey" => Channel::Y2,
            "w" => Channel::W,
            "h" => Channel::H,
            "dx" => Channel::Dx,
            "dy" => Channel::Dy,
            "text" => Channel::Text,
            "color" => Channel::Color,
            "opacity" => Channel::Opacity,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Channel::X => "x",
            Channel::Y => "y",
            Channel::X2 => "x2",
            Channel::Y2 => "y2",
            Channel::W => "w",
            Channel::H => "h",
            Channel::Dx => "dx",
            Channel::Dy => "dy",
            Channel::Text => "text",
            Channel::Color => "color",
            Channel::Opacity => "opacity",
        }
    }

    /// Channels that position or size marks in the plane.
    pub fn is_spatial(self) -> bool {
        !matches!(self, Channel::Text | Channel::Color | Channel::Opacity)
    }

    /// Channels `auto()` may appear on.
    pub fn allows_auto(self) -> bool {
        matches!(self, Channel::X | Channel::Y | Channel::W | Channel::H)
    }

    /// Positional axis grouping used by alignment checks and lints: `x`-like
    /// channels share an axis with `x`, `y`-like with `y`.
    pub fn axis(self) -> Option<Axis> {
        match self {
            Channel::X | Channel::X2 | Channel::Dx => Some(Axis::X),
            Channel::Y | Channel::Y2 | Channel::Dy => Some(Axis::Y),
            _ => None,
        }
    }

    /// Kind used by the consistency lints when deciding whether two
    /// mappings target "the same visual attribute".
    pub fn lint_kind(self) -> &'static str {
        match self {
            Channel::X | Channel::X2 | Channel::Dx => "x",
            Channel::Y | Channel::Y2 | Channel::Dy => "y",
            Channel::W => "w",
            Channel::H => "h",
            Channel::Text => "text",
            Channel::Color => "color",
            Channel::Opacity => "opacity",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
}

impl Axis {
    pub fn orthogonal(self) -> Axis {
        match self {
            Axis::X => Axis::Y,
            Axis::Y => Axis::X,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MarkType {
    Point,
    Circle,
    Square,
    Rect,
    Bbox,
    Line,
    Link,
    Label,
    Text,
    Bar,
}

impl MarkType {
    pub fn parse(name: &str) -> Option<MarkType> {
        Some(match name {
            "point" => MarkType::Point,
            "circle" => MarkType::Circle,
            "square" => MarkType::Square,
            "rect" => MarkType::Rect,
            "bbox" => MarkType::Bbox,
            "line" => MarkType::Line,
            "link" => MarkType::Link,
            "label" => MarkType::Label,
            "text" => MarkType::Text,
            "bar" => MarkType::Bar,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            MarkType::Point => "point",
            MarkType::Circle => "circle",
            MarkType::Square => "square",
            MarkType::Rect => "rect",
            MarkType::Bbox => "bbox",
            MarkType::Line => "line",
            MarkType::Link => "link",
            MarkType::Label => "label",
            MarkType::Text => "text",
            MarkType::Bar => "bar",
        }
    }

    /// Marks whose spatial extent is an x/y-centered box with w/h sizes.
    pub fn is_box(self) -> bool {
        matches!(
            self,
            MarkType::Square | MarkType::Rect | MarkType::Bbox | MarkType::Bar
        )
    }

    /// Channels that must be present (directly or by defaulting) for the
    /// mark to render.
    pub fn required_channels(self) -> &'static [Channel] {
        match self {
            MarkType::Line | MarkType::Link => {
                &[Channel::X, Channel::Y, Channel::X2, Channel::Y2]
            }
            MarkType::Label | MarkType::Text => &[Channel::X, Channel::Y, Channel::Text],
            _ => &[Channel::X, Channel::Y],
        }
    }
}

/// Key used by a foreign reference to select the target mark: either an
/// expression over the source row, or the name of a declared constraint
/// (which stands for the constraint's source attributes).
#[derive(Debug, Clone, PartialEq)]
pub enum RefKey {
    Expr(Expression),
    Constraint(String),
}

/// A channel value obtained by following a foreign key to another view's
/// mark and copying one of its resolved properties.
#[derive(Debug, Clone, PartialEq)]
pub struct ForeignRef {
    pub view: String,
    pub key: RefKey,
    pub prop: Channel,
}

/// What a channel is bound to.
#[derive(Debug, Clone, PartialEq)]
pub enum ChannelValue {
    /// Expression over the source row, passed through a scale. `scale:
    /// None` means a fresh anonymous scale for this mapping alone.
    Map {
        expr: Expression,
        scale: Option<String>,
    },
    Const(Value),
    Ref(ForeignRef),
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScaleKind {
    Linear,
    Ordinal,
    Identity,
}

impl ScaleKind {
    pub fn parse(name: &str) -> Option<ScaleKind> {
        Some(match name {
            "linear" => ScaleKind::Linear,
            "ordinal" => ScaleKind::Ordinal,
            "identity" => ScaleKind::Identity,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            ScaleKind::Linear => "linear",
            ScaleKind::Ordinal => "ordinal",
            ScaleKind::Identity => "identity",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DomainSpec {
    Interval(f64, f64),
    Categories(Vec<Value>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum RangeSpec {
    Interval(f64, f64),
    Palette(Vec<String>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScaleSpec {
    pub name: String,
    pub kind: ScaleKind,
    pub domain: Option<DomainSpec>,
    pub range: Option<RangeSpec>,
}

/// What a view draws its rows from: a table, or a declared constraint
/// treated as the table of relationship instances (one per source row).
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SourceRef {
    Table(String),
    Constraint(String),
}

impl SourceRef {
    pub fn name(&self) -> &str {
        match self {
            SourceRef::Table(n) | SourceRef::Constraint(n) => n,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ViewSpec {
    pub name: String,
    pub source: SourceRef,
    pub mark: MarkType,
    pub channels: std::collections::BTreeMap<Channel, ChannelValue>,
    /// Facet columns for auto grid layout (`k` in the small-multiples grid).
    pub facets_per_row: Option<u32>,
}

impl ViewSpec {
    pub fn channel(&self, c: Channel) -> Option<&ChannelValue> {
        self.channels.get(&c)
    }
}

/// How a constraint is represented visually.
#[derive(Debug, Clone, PartialEq)]
pub enum MappingMethod {
    /// A view renders the relationship itself as marks.
    Explicit { view: String },
    /// Child marks are drawn inside their related parent mark's extent.
    Nest { child: String, parent: String },
    /// Endpoint scales are shared/aligned; `level` is the reinforcement
    /// level the author claims (0 shared-domain .. 4 spatial-proximity).
    SharedScale { scale: Option<String>, level: u8 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintMappingSpec {
    pub constraint: String,
    pub method: MappingMethod,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TableDecl {
    pub name: String,
    /// Data file relative to the data directory; defaults to
    /// `<name>.csv` then `<name>.json`.
    pub file: Option<String>,
    pub attributes: Vec<(String, AttributeDomain)>,
    pub keys: Vec<Vec<String>>,
    pub primary: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintDecl {
    pub name: String,
    pub source_table: String,
    pub source_attrs: Vec<String>,
    pub target_table: String,
    pub target_attrs: Vec<String>,
    pub cardinality: Cardinality,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CanvasSize {
    pub width: f64,
    pub height: f64,
}

/// Engine options a spec may set; all have defaults.
#[derive(Debug, Clone, PartialEq)]
pub struct Options {
    pub jitter_magnitude: f64,
    pub jitter_seed: u64,
    /// Level-4 spatial proximity threshold in pixels.
    pub proximity_px: f64,
    /// Overplotting indistinguishability threshold in pixels.
    pub epsilon: f64,
}

impl Default for Options {
    fn default() -> Self {
        Options {
            jitter_magnitude: 0.0,
            jitter_seed: 0,
            proximity_px: 20.0,
            epsilon: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpecDocument {
    pub canvas: CanvasSize,
    pub options: Options,
    pub tables: Vec<TableDecl>,
    pub constraints: Vec<ConstraintDecl>,
    pub scales: Vec<ScaleSpec>,
    pub views: Vec<ViewSpec>,
    pub constraint_mappings: Vec<ConstraintMappingSpec>,
}

impl SpecDocument {
    pub fn table(&self, name: &str) -> Option<&TableDecl> {
        self.tables.iter().find(|t| t.name == name)
    }

    pub fn constraint(&self, name: &str) -> Option<&ConstraintDecl> {
        self.constraints.iter().find(|c| c.name == name)
    }

    pub fn scale(&self, name: &str) -> Option<&ScaleSpec> {
        self.scales.iter().find(|s| s.name == name)
    }

    pub fn view(&self, name: &str) -> Option<&ViewSpec> {
        self.views.iter().find(|v| v.name == name)
    }

    pub fn view_index(&self, name: &str) -> Option<usize> {
        self.views.iter().position(|v| v.name == name)
    }

    /// The table a view's rows ultimately come from: the source table
    /// itself, or the constraint's source table for constraint views.
    pub fn view_base_table<'a>(&'a self, view: &'a ViewSpec) -> Option<&'a str> {
        match &view.source {
            SourceRef::Table(t) => Some(t.as_str()),
            SourceRef::Constraint(c) => {
                self.constraint(c).map(|c| c.source_table.as_str())
            }
        }
    }

    /// Column-resolution schema for expressions in a view. Table views see
    /// their attributes bare and qualified by the table name; constraint
    /// views additionally see the matched target row's attributes
    /// qualified by the target table name.
    pub fn view_row_schema(&self, view: &ViewSpec) -> Option<RowSchema> {
        match &view.source {
            SourceRef::Table(t) => {
                let decl = self.table(t)?;
                let mut rs = RowSchema::default();
                for (attr, domain) in &decl.attributes {
                    rs.push(attr.clone(), domain.kind());
                }
                for (attr, domain) in &decl.attributes {
                    rs.push(format!("{}.{attr}", decl.name), domain.kind());
                }
                Some(rs)
            }
            SourceRef::Constraint(c) => {
                let fk = self.constraint(c)?;
                let source = self.table(&fk.source_table)?;
                let target = self.table(&fk.target_table)?;
                let mut rs = RowSchema::default();
                for (attr, domain) in &source.attributes {
                    rs.push(attr.clone(), domain.kind());
                }
                for (attr, domain) in &source.attributes {
                    rs.push(format!("{}.{attr}", source.name), domain.kind());
                }
                // For a self-referencing constraint the source copy wins the
                // qualified name; the target copy is reachable only when the
                // endpoint tables differ.
                if target.name != source.name {
                    for (attr, domain) in &target.attributes {
                        rs.push(format!("{}.{attr}", target.name), domain.kind());
                    }
                }
                Some(rs)
            }
        }
    }
}
