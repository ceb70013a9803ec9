//! Canonical JSON serialization of spec documents: sorted keys, fixed
//! shapes, stable number formatting. `parse_spec(serialize_spec(d))` is
//! structurally equal to `d`, and two serializations of the same document
//! are byte-identical.

use serde_json::{json, Map, Number, Value as Json};

use crate::value::{AttributeDomain, Value};

use super::*;

/// Emit integral floats as JSON integers; the parser reads either form.
fn num(v: f64) -> Json {
    if v.fract() == 0.0 && v.abs() < 9e15 {
        Json::Number(Number::from(v as i64))
    } else {
        Json::Number(Number::from_f64(v).expect("finite number"))
    }
}

fn scalar(v: &Value) -> Json {
    match v {
        Value::Int(i) => json!(i),
        Value::Real(r) => Json::Number(Number::from_f64(*r).expect("finite number")),
        Value::Text(s) => json!(s),
        Value::Bool(b) => json!(b),
    }
}

fn domain(d: &AttributeDomain) -> Json {
    match d {
        AttributeDomain::Integer { interval: None } => json!("integer"),
        AttributeDomain::Integer {
            interval: Some((lo, hi)),
        } => json!({"kind": "integer", "min": lo, "max": hi}),
        AttributeDomain::Real { interval: None } => json!("real"),
        AttributeDomain::Real {
            interval: Some((lo, hi)),
        } => json!({"kind": "real", "min": num(*lo), "max": num(*hi)}),
        AttributeDomain::Text { categories: None } => json!("text"),
        AttributeDomain::Text {
            categories: Some(cats),
        } => json!({"kind": "text", "categories": cats}),
        AttributeDomain::Boolean => json!("boolean"),
    }
}

fn channel_value(cv: &ChannelValue) -> Json {
    match cv {
        ChannelValue::Auto => json!("auto"),
        ChannelValue::Const(v) => json!({ "const": scalar(v) }),
        ChannelValue::Map { expr, scale } => {
            let mut m = Map::new();
            m.insert("expr".into(), json!(expr.to_string()));
            if let Some(s) = scale {
                m.insert("scale".into(), json!(s));
            }
            Json::Object(m)
        }
        ChannelValue::Ref(fr) => {
            let key = match &fr.key {
                RefKey::Expr(e) => e.to_string(),
                RefKey::Constraint(c) => c.clone(),
            };
            json!({"ref": {"view": fr.view, "key": key, "props": [fr.prop.name()]}})
        }
    }
}

/// Serialize a document to its canonical UTF-8 JSON form.
pub fn serialize_spec(doc: &SpecDocument) -> Vec<u8> {
    let tables: Vec<Json> = doc
        .tables
        .iter()
        .map(|t| {
            let mut m = Map::new();
            m.insert("name".into(), json!(t.name));
            if let Some(f) = &t.file {
                m.insert("file".into(), json!(f));
            }
            m.insert(
                "attributes".into(),
                Json::Array(
                    t.attributes
                        .iter()
                        .map(|(a, d)| json!({"name": a, "domain": domain(d)}))
                        .collect(),
                ),
            );
            m.insert("keys".into(), json!(t.keys));
            m.insert("primary_key".into(), json!(t.primary));
            Json::Object(m)
        })
        .collect();

    let constraints: Vec<Json> = doc
        .constraints
        .iter()
        .map(|c| {
            json!({
                "name": c.name,
                "source": {"table": c.source_table, "attributes": c.source_attrs},
                "target": {"table": c.target_table, "attributes": c.target_attrs},
                "cardinality": c.cardinality.to_string(),
            })
        })
        .collect();

    let scales: Vec<Json> = doc
        .scales
        .iter()
        .map(|s| {
            let mut m = Map::new();
            m.insert("name".into(), json!(s.name));
            m.insert("kind".into(), json!(s.kind.name()));
            if let Some(d) = &s.domain {
                let v = match d {
                    DomainSpec::Interval(lo, hi) => Json::Array(vec![num(*lo), num(*hi)]),
                    DomainSpec::Categories(cats) => {
                        Json::Array(cats.iter().map(scalar).collect())
                    }
                };
                m.insert("domain".into(), v);
            }
            if let Some(r) = &s.range {
                let v = match r {
                    RangeSpec::Interval(lo, hi) => Json::Array(vec![num(*lo), num(*hi)]),
                    RangeSpec::Palette(p) => json!(p),
                };
                m.insert("range".into(), v);
            }
            Json::Object(m)
        })
        .collect();

    let views: Vec<Json> = doc
        .views
        .iter()
        .map(|v| {
            let mut channels = Map::new();
            for (c, cv) in &v.channels {
                channels.insert(c.name().to_string(), channel_value(cv));
            }
            let mut m = Map::new();
            m.insert("name".into(), json!(v.name));
            m.insert("source".into(), json!(v.source.name()));
            m.insert("mark".into(), json!(v.mark.name()));
            m.insert("channels".into(), Json::Object(channels));
            if let Some(k) = v.facets_per_row {
                m.insert("k".into(), json!(k));
            }
            Json::Object(m)
        })
        .collect();

    let mappings: Vec<Json> = doc
        .constraint_mappings
        .iter()
        .map(|m| {
            let method = match &m.method {
                MappingMethod::Explicit { view } => json!({"explicit": {"view": view}}),
                MappingMethod::Nest { child, parent } => {
                    json!({"nest": {"child": child, "parent": parent}})
                }
                MappingMethod::SharedScale { scale, level } => {
                    let mut inner = Map::new();
                    if let Some(s) = scale {
                        inner.insert("scale".into(), json!(s));
                    }
                    inner.insert("level".into(), json!(level));
                    json!({ "shared_scale": Json::Object(inner) })
                }
            };
            json!({"constraint": m.constraint, "method": method})
        })
        .collect();

    let root = json!({
        "canvas": {"width": num(doc.canvas.width), "height": num(doc.canvas.height)},
        "options": {
            "jitter_magnitude": num(doc.options.jitter_magnitude),
            "jitter_seed": doc.options.jitter_seed,
            "proximity_px": num(doc.options.proximity_px),
            "epsilon": num(doc.options.epsilon),
        },
        "tables": tables,
        "constraints": constraints,
        "scales": scales,
        "views": views,
        "constraint_mappings": mappings,
    });

    let mut bytes = serde_json::to_vec_pretty(&root).expect("serialization cannot fail");
    bytes.push(b'\n');
    bytes
}

#[cfg(test)]
mod tests {
    use super::*;

    fn round_trip(text: &str) -> SpecDocument {
        let doc = parse_spec(text).expect("fixture parses");
        let bytes = serialize_spec(&doc);
        let reparsed = parse_spec(std::str::from_utf8(&bytes).unwrap())
            .expect("canonical form parses");
        assert_eq!(doc, reparsed);
        // Canonical form is a fixed point.
        assert_eq!(bytes, serialize_spec(&reparsed));
        doc
    }

    #[test]
    fn round_trip_with_everything() {
        round_trip(
            r##"{
            "canvas": {"width": 300, "height": 200.5},
            "options": {"jitter_magnitude": 2, "jitter_seed": 7, "proximity_px": 25, "epsilon": 0.25},
            "tables": [
                {
                    "name": "A",
                    "file": "custom.csv",
                    "attributes": [
                        {"name": "aid", "domain": "text"},
                        {"name": "a", "domain": {"kind": "real", "min": 0, "max": 10}},
                        {"name": "g", "domain": {"kind": "text", "categories": ["g1", "g2"]}}
                    ],
                    "keys": [["aid"]]
                },
                {
                    "name": "B",
                    "attributes": [
                        {"name": "bid", "domain": "text"},
                        {"name": "b", "domain": "real"}
                    ],
                    "keys": [["bid"]]
                },
                {
                    "name": "T",
                    "attributes": [
                        {"name": "aid", "domain": "text"},
                        {"name": "bid", "domain": "text"}
                    ],
                    "keys": [["aid", "bid"]]
                }
            ],
            "constraints": [
                {"name": "C_TA", "source": {"table": "T", "attributes": ["aid"]},
                 "target": {"table": "A", "attributes": ["aid"]}, "cardinality": "many-one"},
                {"name": "C_TB", "source": {"table": "T", "attributes": ["bid"]},
                 "target": {"table": "B", "attributes": ["bid"]}, "cardinality": "many-one"}
            ],
            "scales": [
                {"name": "sa", "kind": "ordinal", "range": [10, 90]},
                {"name": "sb", "kind": "linear", "domain": [0, 10], "range": [10, 190]},
                {"name": "sc", "kind": "ordinal", "domain": ["g1", "g2"], "range": ["#111111", "#222222"]}
            ],
            "views": [
                {
                    "name": "V_A",
                    "source": "A",
                    "mark": "label",
                    "channels": {
                        "y": {"attr": "aid", "scale": "sa"},
                        "x": {"const": 5},
                        "text": {"attr": "a"},
                        "color": {"attr": "g", "scale": "sc"}
                    }
                },
                {
                    "name": "V_T",
                    "source": "T",
                    "mark": "link",
                    "k": 3,
                    "channels": {
                        "x,y": {"ref": {"view": "V_A", "key": "aid", "props": ["x", "y"]}},
                        "x2": {"ref": {"view": "V_A", "key": "C_TA", "props": ["x"]}},
                        "y2": {"const": 100},
                        "opacity": 0.5
                    }
                }
            ],
            "constraint_mappings": [
                {"constraint": "C_TA", "method": {"explicit": {"view": "V_T"}}},
                {"constraint": "C_TB", "method": {"shared_scale": {"scale": "sb", "level": 1}}}
            ]
        }"##,
        );
    }

    #[test]
    fn empty_views_document_round_trips() {
        let doc = round_trip(
            r#"{
            "canvas": {"width": 100, "height": 100},
            "tables": [
                {"name": "T", "attributes": [{"name": "id", "domain": "integer"}]}
            ],
            "views": []
        }"#,
        );
        assert!(doc.views.is_empty());
    }

    #[test]
    fn serialization_is_deterministic() {
        let text = r#"{
            "canvas": {"width": 100, "height": 100},
            "tables": [
                {"name": "T", "attributes": [{"name": "id", "domain": "integer"}]}
            ],
            "views": [
                {"name": "V", "source": "T", "mark": "point",
                 "channels": {"x": {"attr": "id"}, "y": {"attr": "id"}}}
            ]
        }"#;
        let doc = parse_spec(text).unwrap();
        assert_eq!(serialize_spec(&doc), serialize_spec(&doc.clone()));
    }

    #[test]
    fn grouped_ref_channels_expand_per_channel() {
        let text = r#"{
            "canvas": {"width": 100, "height": 100},
            "tables": [
                {"name": "N", "attributes": [
                    {"name": "id", "domain": "integer"},
                    {"name": "p", "domain": "integer"},
                    {"name": "a", "domain": "real"},
                    {"name": "b", "domain": "real"}
                ]}
            ],
            "constraints": [
                {"name": "c", "source": {"table": "N", "attributes": ["p"]},
                 "target": {"table": "N", "attributes": ["id"]}}
            ],
            "views": [
                {"name": "V_N", "source": "N", "mark": "point",
                 "channels": {"x": {"attr": "a"}, "y": {"attr": "b"}}},
                {"name": "V_E", "source": "c", "mark": "link",
                 "channels": {
                    "x,y": {"ref": {"view": "V_N", "key": "id", "props": ["x", "y"]}},
                    "x2,y2": {"ref": {"view": "V_N", "key": "p", "props": ["x", "y"]}}
                 }}
            ]
        }"#;
        let doc = parse_spec(text).unwrap();
        let ve = doc.view("V_E").unwrap();
        assert_eq!(ve.channels.len(), 4);
        match ve.channel(Channel::X2).unwrap() {
            ChannelValue::Ref(fr) => {
                assert_eq!(fr.view, "V_N");
                assert_eq!(fr.prop, Channel::X);
            }
            other => panic!("expected ref, got {other:?}"),
        }
    }
}
