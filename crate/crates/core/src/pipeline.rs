//! End-to-end pipeline: ingest → validate → plan → materialize → constraint
//! checks → faithfulness report → artifacts.

use std::collections::BTreeMap;
use std::path::Path;

use serde_json::json;
use thiserror::Error;

use crate::check::{check_faithfulness, FaithfulnessReport};
use crate::compile::{
    materialize, plan, reresolve, ChannelOut, CompilationPlan, CompileError, Materialized,
};
use crate::ingest::{load_database, LoadError};
use crate::layout::{
    check_nest, check_shared_scale, detect_overplotting, jitter, AchievedLevel, NestCheck,
    ViolationGroup,
};
use crate::relational::{Database, Violation};
use crate::spec::{Diagnostic, MappingMethod, SpecDocument};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("spec has {} diagnostic(s)", .0.len())]
    Spec(Vec<Diagnostic>),
    #[error(transparent)]
    Load(#[from] LoadError),
    #[error("database violates {} declared constraint(s)", .0.len())]
    Violations(Vec<Violation>),
    #[error(transparent)]
    Compile(#[from] CompileError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Engine options the CLI may override on top of the spec's `options`.
#[derive(Debug, Clone, Default)]
pub struct PipelineOptions {
    pub jitter: Option<(f64, u64)>,
    pub proximity_px: Option<f64>,
    pub epsilon: Option<f64>,
}

/// A fully compiled and checked scene.
#[derive(Debug)]
pub struct Compiled {
    pub doc: SpecDocument,
    pub db: Database,
    pub plan: CompilationPlan,
    pub materialized: Materialized,
    pub levels: BTreeMap<String, AchievedLevel>,
    pub nest_checks: Vec<NestCheck>,
    pub overplot: Vec<ViolationGroup>,
    pub report: FaithfulnessReport,
}

/// Parse a spec file and load its data directory.
pub fn load(spec_path: &Path, data_dir: &Path) -> Result<(SpecDocument, Database), PipelineError> {
    let text = std::fs::read_to_string(spec_path).map_err(|source| PipelineError::Io {
        path: spec_path.display().to_string(),
        source,
    })?;
    let doc = crate::spec::parse_spec(&text).map_err(PipelineError::Spec)?;
    let db = load_database(&doc, data_dir)?;
    Ok((doc, db))
}

/// Validate the database against its declared keys and constraints,
/// treating any violation as fatal: the compiler assumes valid data.
pub fn validate(db: &Database) -> Result<(), PipelineError> {
    let violations = db.validate().map_err(LoadError::from)?;
    if violations.is_empty() {
        Ok(())
    } else {
        Err(PipelineError::Violations(violations))
    }
}

/// Compile a validated document and database into a checked scene.
pub fn compile(
    doc: SpecDocument,
    db: Database,
    opts: &PipelineOptions,
) -> Result<Compiled, PipelineError> {
    let plan = plan(&doc, &db)?;
    let mut materialized = materialize(&doc, &db, &plan)?;

    let epsilon = opts.epsilon.unwrap_or(doc.options.epsilon);
    let proximity = opts.proximity_px.unwrap_or(doc.options.proximity_px);
    let (jitter_magnitude, jitter_seed) = opts
        .jitter
        .unwrap_or((doc.options.jitter_magnitude, doc.options.jitter_seed));

    let mut overplot: Vec<ViolationGroup> = doc
        .views
        .iter()
        .enumerate()
        .flat_map(|(i, _)| detect_overplotting(&materialized.scene.marks[i], epsilon))
        .collect();

    // The only engine-level intervention: jitter overplotted views, then
    // reresolve so reference-derived properties stay exact.
    if jitter_magnitude > 0.0 && !overplot.is_empty() {
        let views: std::collections::BTreeSet<String> =
            overplot.iter().map(|g| g.view.clone()).collect();
        for view in views {
            let idx = doc.view_index(&view).expect("group names a view");
            jitter(&mut materialized.scene.marks[idx], jitter_magnitude, jitter_seed);
            reresolve(&mut materialized.scene, &plan, &doc, &view);
        }
        overplot = doc
            .views
            .iter()
            .enumerate()
            .flat_map(|(i, _)| detect_overplotting(&materialized.scene.marks[i], epsilon))
            .collect();
    }

    let mut nest_checks = Vec::new();
    let mut levels = BTreeMap::new();
    for mapping in &doc.constraint_mappings {
        match &mapping.method {
            MappingMethod::Nest { child, parent } => {
                nest_checks.push(check_nest(
                    &doc,
                    &materialized.scene,
                    &mapping.constraint,
                    child,
                    parent,
                ));
            }
            MappingMethod::SharedScale { .. } => {
                let fk = db.constraint(&mapping.constraint).expect("validated");
                levels.insert(
                    mapping.constraint.clone(),
                    check_shared_scale(&doc, &materialized.scene, &materialized.scales, fk, proximity),
                );
            }
            MappingMethod::Explicit { .. } => {}
        }
    }

    let report = check_faithfulness(&db, &doc, &materialized, &levels, &nest_checks, &overplot);

    Ok(Compiled {
        doc,
        db,
        plan,
        materialized,
        levels,
        nest_checks,
        overplot,
        report,
    })
}

/// Load, validate, and compile in one call.
pub fn compile_from_paths(
    spec_path: &Path,
    data_dir: &Path,
    opts: &PipelineOptions,
) -> Result<Compiled, PipelineError> {
    let (doc, db) = load(spec_path, data_dir)?;
    validate(&db)?;
    compile(doc, db, opts)
}

impl Compiled {
    /// Deterministic SVG bytes for the compiled scene.
    pub fn render_svg(&self) -> Result<Vec<u8>, CompileError> {
        crate::render::render(&self.doc, &self.materialized, &self.plan)
    }

    /// Faithfulness report as canonical JSON bytes.
    pub fn report_json(&self) -> Vec<u8> {
        let mut bytes = serde_json::to_vec_pretty(&self.report).expect("report serializes");
        bytes.push(b'\n');
        bytes
    }

    /// Mark tables as JSON, for debugging and golden tests.
    pub fn marks_json(&self) -> Vec<u8> {
        let canvases: Vec<serde_json::Value> = self
            .materialized
            .scene
            .canvases
            .iter()
            .enumerate()
            .map(|(id, c)| {
                let owner = match &c.owner {
                    crate::compile::CanvasOwner::Root => json!("root"),
                    crate::compile::CanvasOwner::Mark {
                        view,
                        row,
                        back_key,
                        parent_canvas,
                    } => json!({
                        "view": view,
                        "row": row,
                        "back_key": back_key,
                        "parent_canvas": parent_canvas,
                    }),
                };
                json!({
                    "id": id,
                    "owner": owner,
                    "extent": {"x": c.extent.x, "y": c.extent.y, "w": c.extent.w, "h": c.extent.h},
                })
            })
            .collect();
        let views: Vec<serde_json::Value> = self
            .plan
            .order
            .iter()
            .map(|&vi| {
                let table = &self.materialized.scene.marks[vi];
                let marks: Vec<serde_json::Value> = (0..table.len())
                    .map(|row| {
                        let channels: serde_json::Map<String, serde_json::Value> = table.rows
                            [row]
                            .iter()
                            .map(|(c, out)| {
                                let v = match out {
                                    ChannelOut::Px(p) => json!(p),
                                    ChannelOut::Str(s) => json!(s),
                                };
                                (c.name().to_string(), v)
                            })
                            .collect();
                        json!({
                            "key": table.back_keys[row],
                            "canvas": table.canvas_ids[row],
                            "channels": channels,
                        })
                    })
                    .collect();
                json!({
                    "view": table.view,
                    "mark": table.mark.name(),
                    "marks": marks,
                })
            })
            .collect();
        let root = json!({"canvases": canvases, "views": views});
        let mut bytes = serde_json::to_vec_pretty(&root).expect("marks serialize");
        bytes.push(b'\n');
        bytes
    }
}

/// Write bytes to `path` atomically: no partial artifact survives a failed
/// run (write to a sibling temp file, then rename).
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), PipelineError> {
    let io_err = |source: std::io::Error| PipelineError::Io {
        path: path.display().to_string(),
        source,
    };
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, bytes).map_err(io_err)?;
    std::fs::rename(&tmp, path).map_err(io_err)
}
