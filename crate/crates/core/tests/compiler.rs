//! Compiler-level integration tests: foreign references through declared
//! constraints, nesting, reresolution semantics, and render structure.

use std::path::Path;

use dbviz::compile::reresolve;
use dbviz::layout::jitter;
use dbviz::pipeline::{compile, compile_from_paths, load, validate, Compiled, PipelineOptions};
use dbviz::spec::Channel;

fn write_files(dir: &Path, files: &[(&str, &str)]) {
    for (name, content) in files {
        std::fs::write(dir.join(name), content).unwrap();
    }
}

fn build(spec: &str, files: &[(&str, &str)]) -> Compiled {
    let dir = tempfile::tempdir().unwrap();
    write_files(dir.path(), files);
    let spec_path = dir.path().join("spec.json");
    std::fs::write(&spec_path, spec).unwrap();
    let (doc, db) = load(&spec_path, dir.path()).unwrap();
    validate(&db).unwrap();
    compile(doc, db, &PipelineOptions::default()).unwrap()
}

/// Entities rendered as points, labels positioned at the related point via
/// the constraint name, offset by dx — labels must sit exactly on their
/// points.
#[test]
fn labels_anchor_through_a_named_constraint() {
    let spec = r#"{
        "canvas": {"width": 200, "height": 200},
        "tables": [
            {"name": "T", "attributes": [
                {"name": "id", "domain": "integer"},
                {"name": "a", "domain": "real"},
                {"name": "b", "domain": "real"}], "keys": [["id"]]},
            {"name": "S", "attributes": [
                {"name": "id", "domain": "integer"},
                {"name": "name", "domain": "text"}], "keys": [["id"]]}
        ],
        "constraints": [
            {"name": "c", "source": {"table": "S", "attributes": ["id"]},
             "target": {"table": "T", "attributes": ["id"]}, "cardinality": "one-one"}
        ],
        "scales": [
            {"name": "sx", "kind": "linear", "range": [10, 190]},
            {"name": "sy", "kind": "linear", "range": [10, 190]}
        ],
        "views": [
            {"name": "V_T", "source": "T", "mark": "point", "channels": {
                "x": {"attr": "a", "scale": "sx"},
                "y": {"attr": "b", "scale": "sy"}
            }},
            {"name": "V_S", "source": "S", "mark": "text", "channels": {
                "text": {"attr": "name"},
                "dx": {"const": 10},
                "x,y": {"ref": {"view": "V_T", "key": "c", "props": ["x", "y"]}}
            }}
        ],
        "constraint_mappings": [
            {"constraint": "c", "method": {"explicit": {"view": "V_S"}}}
        ]
    }"#;
    let compiled = build(
        spec,
        &[
            ("T.csv", "id,a,b\n1,1.0,1.0\n2,2.0,3.0\n3,4.0,2.0\n"),
            ("S.csv", "id,name\n1,alpha\n2,beta\n3,gamma\n"),
        ],
    );
    assert!(compiled.report.faithful, "{}", String::from_utf8_lossy(&compiled.report_json()));
    let vt = compiled.doc.view_index("V_T").unwrap();
    let vs = compiled.doc.view_index("V_S").unwrap();
    let scene = &compiled.materialized.scene;
    for row in 0..scene.marks[vs].len() {
        // 1-1 on id: label row i anchors point row i.
        assert_eq!(
            scene.marks[vs].px(row, Channel::X),
            scene.marks[vt].px(row, Channel::X)
        );
        assert_eq!(
            scene.marks[vs].px(row, Channel::Y),
            scene.marks[vt].px(row, Channel::Y)
        );
        assert_eq!(scene.marks[vs].px(row, Channel::Dx), Some(10.0));
    }
}

/// Store prices nested in 50x50 location rectangles; one location has no
/// stores and still renders.
#[test]
fn nesting_partitions_rows_into_parent_extents() {
    let spec = r#"{
        "canvas": {"width": 300, "height": 300},
        "tables": [
            {"name": "L", "attributes": [
                {"name": "id", "domain": "integer"},
                {"name": "lat", "domain": "real"},
                {"name": "lon", "domain": "real"}], "keys": [["id"]]},
            {"name": "S", "attributes": [
                {"name": "id", "domain": "integer"},
                {"name": "cid", "domain": "integer"},
                {"name": "year", "domain": "integer"},
                {"name": "price", "domain": "real"}], "keys": [["id"]]}
        ],
        "constraints": [
            {"name": "C", "source": {"table": "S", "attributes": ["cid"]},
             "target": {"table": "L", "attributes": ["id"]}, "cardinality": "many-one"}
        ],
        "scales": [
            {"name": "slx", "kind": "linear", "range": [50, 250]},
            {"name": "sly", "kind": "linear", "range": [50, 250]},
            {"name": "ssx", "kind": "linear", "range": [5, 45]},
            {"name": "ssy", "kind": "linear", "range": [5, 45]}
        ],
        "views": [
            {"name": "V_L", "source": "L", "mark": "rect", "channels": {
                "x": {"attr": "lat", "scale": "slx"},
                "y": {"attr": "lon", "scale": "sly"},
                "w": {"const": 50},
                "h": {"const": 50}
            }},
            {"name": "V_S", "source": "S", "mark": "point", "channels": {
                "x": {"attr": "year", "scale": "ssx"},
                "y": {"attr": "price", "scale": "ssy"}
            }}
        ],
        "constraint_mappings": [
            {"constraint": "C", "method": {"nest": {"child": "V_S", "parent": "V_L"}}}
        ]
    }"#;
    let compiled = build(
        spec,
        &[
            ("L.csv", "id,lat,lon\n1,0.0,0.0\n2,10.0,10.0\n3,5.0,2.0\n"),
            (
                "S.csv",
                "id,cid,year,price\n1,1,2020,3.5\n2,1,2021,4.0\n3,2,2020,2.0\n4,2,2022,2.5\n",
            ),
        ],
    );
    assert!(compiled.report.faithful);
    let nest = &compiled.nest_checks[0];
    assert_eq!(nest.total, 4);
    assert_eq!(nest.contained, 4);
    assert!(nest.partition_ok);

    // Location 3 has no stores: its canvas exists and its rect renders.
    let svg = String::from_utf8(compiled.render_svg().unwrap()).unwrap();
    assert_eq!(svg.matches("<rect").count(), 3, "all three location rects render");
    // One canvas per location plus the root.
    assert_eq!(compiled.materialized.scene.canvases.len(), 4);
}

#[test]
fn zero_area_parent_is_a_layout_error() {
    let spec = r#"{
        "canvas": {"width": 100, "height": 100},
        "tables": [
            {"name": "L", "attributes": [{"name": "id", "domain": "integer"}], "keys": [["id"]]},
            {"name": "S", "attributes": [
                {"name": "id", "domain": "integer"},
                {"name": "cid", "domain": "integer"}], "keys": [["id"]]}
        ],
        "constraints": [
            {"name": "C", "source": {"table": "S", "attributes": ["cid"]},
             "target": {"table": "L", "attributes": ["id"]}, "cardinality": "many-one"}
        ],
        "views": [
            {"name": "V_L", "source": "L", "mark": "rect", "channels": {
                "x": {"const": 50}, "y": {"const": 50},
                "w": {"const": 0}, "h": {"const": 40}
            }},
            {"name": "V_S", "source": "S", "mark": "point", "channels": {
                "x": {"const": 5}, "y": {"const": 5}
            }}
        ],
        "constraint_mappings": [
            {"constraint": "C", "method": {"nest": {"child": "V_S", "parent": "V_L"}}}
        ]
    }"#;
    let dir = tempfile::tempdir().unwrap();
    write_files(
        dir.path(),
        &[("L.csv", "id\n1\n"), ("S.csv", "id,cid\n1,1\n")],
    );
    let spec_path = dir.path().join("spec.json");
    std::fs::write(&spec_path, spec).unwrap();
    let (doc, db) = load(&spec_path, dir.path()).unwrap();
    validate(&db).unwrap();
    let err = compile(doc, db, &PipelineOptions::default()).unwrap_err();
    assert!(err.to_string().contains("zero area"), "got: {err}");
}

#[test]
fn reresolve_is_idempotent_and_local() {
    let dir = std::path::PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures");
    let compiled = compile_from_paths(
        &dir.join("specs/gallery_c.json"),
        &dir.join("data/d1"),
        &PipelineOptions::default(),
    )
    .unwrap();
    let doc = &compiled.doc;
    let plan = &compiled.plan;
    let va = doc.view_index("V_A").unwrap();
    let vb = doc.view_index("V_B").unwrap();
    let vt = doc.view_index("V_T").unwrap();

    // Jitter V_A, reresolve: link starts follow, V_B is untouched.
    let mut scene = compiled.materialized.scene.clone();
    let vb_before = scene.marks[vb].clone();
    jitter(&mut scene.marks[va], 5.0, 42);
    reresolve(&mut scene, plan, doc, "V_A");
    assert_eq!(scene.marks[vb], vb_before, "reresolve must not touch non-dependents");
    for row in 0..scene.marks[vt].len() {
        let binding = &scene.marks[vt].ref_bindings[&Channel::X];
        let target_row = binding.target_rows[row];
        assert_eq!(
            scene.marks[vt].px(row, Channel::X),
            scene.marks[va].px(target_row, Channel::X)
        );
    }

    // Perturbing a view nothing references changes nothing else.
    let mut scene2 = scene.clone();
    jitter(&mut scene2.marks[vt], 3.0, 1);
    let snapshot_a = scene2.marks[va].clone();
    let snapshot_b = scene2.marks[vb].clone();
    reresolve(&mut scene2, plan, doc, "V_T");
    assert_eq!(scene2.marks[va], snapshot_a);
    assert_eq!(scene2.marks[vb], snapshot_b);

    // Reresolving twice is a fixed point.
    let mut scene3 = scene.clone();
    reresolve(&mut scene3, plan, doc, "V_A");
    assert_eq!(scene3, scene);
}

/// A three-row scatterplot renders three circles plus an axis per scaled
/// channel.
#[test]
fn d0_scatterplot_renders_marks_and_axes() {
    let spec = r#"{
        "canvas": {"width": 200, "height": 200},
        "tables": [
            {"name": "T", "attributes": [
                {"name": "id", "domain": "integer"},
                {"name": "a", "domain": "real"},
                {"name": "b", "domain": "real"}], "keys": [["id"]]}
        ],
        "scales": [
            {"name": "sx", "kind": "linear", "range": [10, 190]},
            {"name": "sy", "kind": "linear", "range": [10, 190]}
        ],
        "views": [
            {"name": "V_T", "source": "T", "mark": "point", "channels": {
                "x": {"attr": "a", "scale": "sx"},
                "y": {"attr": "b", "scale": "sy"},
                "text": {"attr": "id"}
            }}
        ]
    }"#;
    let compiled = build(spec, &[("T.csv", "id,a,b\n1,0.0,0.0\n2,1.0,2.0\n3,2.0,1.0\n")]);
    let svg = String::from_utf8(compiled.render_svg().unwrap()).unwrap();
    assert_eq!(svg.matches("<circle").count(), 3);
    assert_eq!(compiled.report.axes.len(), 2, "one x axis, one y axis");
    let kinds: Vec<&str> = compiled.report.axes.iter().map(|a| a.kind).collect();
    assert_eq!(kinds, vec!["axis-x", "axis-y"]);
    // Row preservation: every view has exactly one mark per source row.
    for v in &compiled.report.views {
        assert_eq!(v.rows, v.marks);
    }
    assert!(compiled.report.faithful);
}

/// The naive constraint rendering (both endpoints mapped to separate
/// channels of a bare table view) warns but still counts as mapped.
#[test]
fn naive_constraint_table_warns() {
    let spec = r#"{
        "canvas": {"width": 200, "height": 200},
        "tables": [
            {"name": "S", "attributes": [
                {"name": "id", "domain": "integer"},
                {"name": "x", "domain": "integer"}], "keys": [["id"]]},
            {"name": "T", "attributes": [
                {"name": "id", "domain": "integer"},
                {"name": "y", "domain": "integer"}], "keys": [["id"]]}
        ],
        "constraints": [
            {"name": "C", "source": {"table": "S", "attributes": ["x"]},
             "target": {"table": "T", "attributes": ["y"]}, "cardinality": "many-one"}
        ],
        "scales": [
            {"name": "s1", "kind": "linear", "range": [10, 190]},
            {"name": "s2", "kind": "linear", "range": [10, 190]}
        ],
        "views": [
            {"name": "V_S", "source": "S", "mark": "label", "channels": {
                "x": {"attr": "id", "scale": "s1"}, "y": {"const": 40}, "text": {"attr": "x"}}},
            {"name": "V_T", "source": "T", "mark": "label", "channels": {
                "x": {"attr": "id", "scale": "s2"}, "y": {"const": 160}, "text": {"attr": "y"}}},
            {"name": "V_C", "source": "C", "mark": "point", "channels": {
                "x": {"attr": "x", "scale": "s1"},
                "y": {"expr": "T.y", "scale": "s2"}
            }}
        ],
        "constraint_mappings": [
            {"constraint": "C", "method": {"explicit": {"view": "V_C"}}}
        ]
    }"#;
    let compiled = build(
        spec,
        &[
            ("S.csv", "id,x\n1,7\n2,8\n"),
            ("T.csv", "id,y\n1,7\n2,8\n3,9\n"),
        ],
    );
    assert_eq!(compiled.report.warnings.len(), 1, "{:?}", compiled.report.warnings);
    assert!(compiled.report.warnings[0].contains("V_C"));

    // The label-based explicit form (a format string tying both sides
    // together) does not warn.
    let label_spec = spec.replace(
        r#""channels": {
                "x": {"attr": "x", "scale": "s1"},
                "y": {"expr": "T.y", "scale": "s2"}
            }"#,
        r#""channels": {
                "x": {"const": 100},
                "y": {"attr": "id", "scale": "s2"},
                "text": {"expr": "f\"{S.x}={T.y}\""}
            }"#,
    );
    assert_ne!(label_spec, spec, "replacement must apply");
    let compiled = build(
        &label_spec.replace("\"mark\": \"point\"", "\"mark\": \"text\""),
        &[
            ("S.csv", "id,x\n1,7\n2,8\n"),
            ("T.csv", "id,y\n1,7\n2,8\n3,9\n"),
        ],
    );
    assert!(compiled.report.warnings.is_empty(), "{:?}", compiled.report.warnings);
}
