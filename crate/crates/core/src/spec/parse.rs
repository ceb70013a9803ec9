//! Spec-file parser: walks the position-tracked JSON tree, collecting every
//! diagnostic rather than failing fast.

use std::collections::BTreeMap;

use crate::expr::{parse_expression, ExprType, Expression};
use crate::relational::Cardinality;
use crate::value::{AttributeDomain, Value};

use super::json::{parse_json, JsonValue, Node};
use super::*;

struct Ctx {
    diags: Vec<Diagnostic>,
}

impl Ctx {
    fn push(&mut self, node: &Node, rule: &'static str, message: impl Into<String>) {
        self.diags.push(Diagnostic {
            line: node.line,
            col: node.col,
            rule,
            message: message.into(),
        });
    }

    fn str<'n>(&mut self, node: &'n Node, what: &str) -> Option<&'n str> {
        match node.as_str() {
            Some(s) => Some(s),
            None => {
                self.push(node, "bad-type", format!("{what} must be a string, got {}", node.type_name()));
                None
            }
        }
    }

    fn num(&mut self, node: &Node, what: &str) -> Option<f64> {
        match node.as_f64() {
            Some(v) => Some(v),
            None => {
                self.push(node, "bad-type", format!("{what} must be a number, got {}", node.type_name()));
                None
            }
        }
    }

    fn arr<'n>(&mut self, node: &'n Node, what: &str) -> Option<&'n [Node]> {
        match node.as_array() {
            Some(a) => Some(a),
            None => {
                self.push(node, "bad-type", format!("{what} must be an array, got {}", node.type_name()));
                None
            }
        }
    }

    fn obj<'n>(&mut self, node: &'n Node, what: &str) -> Option<&'n [(String, Node)]> {
        match node.as_object() {
            Some(o) => Some(o),
            None => {
                self.push(node, "bad-type", format!("{what} must be an object, got {}", node.type_name()));
                None
            }
        }
    }

    fn known_fields(&mut self, node: &Node, allowed: &[&str]) {
        if let Some(fields) = node.as_object() {
            for (k, v) in fields {
                if !allowed.contains(&k.as_str()) {
                    self.push(v, "unknown-field", format!("unknown field `{k}`"));
                }
            }
        }
    }
}

/// Parse and validate a spec document. On any diagnostic the result is the
/// full list, sorted by source position.
pub fn parse_spec(text: &str) -> Result<SpecDocument, Vec<Diagnostic>> {
    let root = match parse_json(text) {
        Ok(n) => n,
        Err(e) => {
            return Err(vec![Diagnostic {
                line: e.line,
                col: e.col,
                rule: "syntax",
                message: e.message,
            }])
        }
    };
    let mut ctx = Ctx { diags: Vec::new() };
    let doc = parse_document(&mut ctx, &root);
    let mut diags = ctx.diags;
    if diags.is_empty() {
        Ok(doc.expect("no diagnostics implies a complete document"))
    } else {
        diags.sort_by(|a, b| {
            (a.line, a.col, a.rule, &a.message).cmp(&(b.line, b.col, b.rule, &b.message))
        });
        Err(diags)
    }
}

fn parse_document(ctx: &mut Ctx, root: &Node) -> Option<SpecDocument> {
    ctx.obj(root, "spec document")?;
    ctx.known_fields(
        root,
        &[
            "canvas",
            "options",
            "tables",
            "constraints",
            "scales",
            "views",
            "constraint_mappings",
        ],
    );

    let canvas = match root.get("canvas") {
        Some(n) => parse_canvas(ctx, n),
        None => {
            ctx.push(root, "missing-field", "spec needs a `canvas` block");
            None
        }
    };
    let options = match root.get("options") {
        Some(n) => parse_options(ctx, n),
        None => Some(Options::default()),
    };

    let mut tables: Vec<TableDecl> = Vec::new();
    match root.get("tables") {
        Some(n) => {
            if let Some(items) = ctx.arr(n, "`tables`") {
                for item in items {
                    if let Some(decl) = parse_table(ctx, item) {
                        if tables.iter().any(|t| t.name == decl.name) {
                            ctx.push(item, "duplicate-name", format!("duplicate table `{}`", decl.name));
                        } else {
                            tables.push(decl);
                        }
                    }
                }
            }
        }
        None => ctx.push(root, "missing-field", "spec needs a `tables` block"),
    }

    let mut constraints: Vec<ConstraintDecl> = Vec::new();
    if let Some(n) = root.get("constraints") {
        if let Some(items) = ctx.arr(n, "`constraints`") {
            for item in items {
                if let Some(decl) = parse_constraint(ctx, item, &tables) {
                    if constraints.iter().any(|c| c.name == decl.name) {
                        ctx.push(item, "duplicate-name", format!("duplicate constraint `{}`", decl.name));
                    } else {
                        constraints.push(decl);
                    }
                }
            }
        }
    }

    let mut scales: Vec<ScaleSpec> = Vec::new();
    if let Some(n) = root.get("scales") {
        if let Some(items) = ctx.arr(n, "`scales`") {
            for item in items {
                if let Some(s) = parse_scale(ctx, item) {
                    if scales.iter().any(|x| x.name == s.name) {
                        ctx.push(item, "duplicate-name", format!("duplicate scale `{}`", s.name));
                    } else {
                        scales.push(s);
                    }
                }
            }
        }
    }

    // Views are parsed against a provisional document so expressions can be
    // type-checked and cross-references resolved.
    let mut doc = SpecDocument {
        canvas: canvas.unwrap_or(CanvasSize {
            width: 0.0,
            height: 0.0,
        }),
        options: options.unwrap_or_default(),
        tables,
        constraints,
        scales,
        views: Vec::new(),
        constraint_mappings: Vec::new(),
    };

    match root.get("views") {
        Some(n) => {
            if let Some(items) = ctx.arr(n, "`views`") {
                for item in items {
                    if let Some(v) = parse_view(ctx, item, &doc) {
                        if doc.views.iter().any(|x| x.name == v.name) {
                            ctx.push(item, "duplicate-name", format!("duplicate view `{}`", v.name));
                        } else {
                            doc.views.push(v);
                        }
                    }
                }
            }
        }
        None => ctx.push(root, "missing-field", "spec needs a `views` block"),
    }

    // Reference targets can only be checked once all views are known.
    check_refs(ctx, root, &doc);

    if let Some(n) = root.get("constraint_mappings") {
        if let Some(items) = ctx.arr(n, "`constraint_mappings`") {
            for item in items {
                if let Some(m) = parse_mapping(ctx, item, &doc) {
                    doc.constraint_mappings.push(m);
                }
            }
        }
    }

    ctx.diags.is_empty().then_some(doc)
}

fn parse_canvas(ctx: &mut Ctx, node: &Node) -> Option<CanvasSize> {
    ctx.obj(node, "`canvas`")?;
    ctx.known_fields(node, &["width", "height"]);
    let mut dim = |key: &str| -> Option<f64> {
        match node.get(key) {
            Some(n) => {
                let v = ctx.num(n, key)?;
                if v <= 0.0 {
                    ctx.push(n, "bad-canvas", format!("canvas {key} must be positive"));
                    None
                } else {
                    Some(v)
                }
            }
            None => {
                ctx.push(node, "missing-field", format!("canvas needs `{key}`"));
                None
            }
        }
    };
    let width = dim("width");
    let height = dim("height");
    Some(CanvasSize {
        width: width?,
        height: height?,
    })
}

fn parse_options(ctx: &mut Ctx, node: &Node) -> Option<Options> {
    ctx.obj(node, "`options`")?;
    ctx.known_fields(
        node,
        &["jitter_magnitude", "jitter_seed", "proximity_px", "epsilon"],
    );
    let mut opts = Options::default();
    if let Some(n) = node.get("jitter_magnitude") {
        if let Some(v) = ctx.num(n, "jitter_magnitude") {
            if v < 0.0 {
                ctx.push(n, "bad-options", "jitter_magnitude must be non-negative");
            } else {
                opts.jitter_magnitude = v;
            }
        }
    }
    if let Some(n) = node.get("jitter_seed") {
        match n.as_i64() {
            Some(v) if v >= 0 => opts.jitter_seed = v as u64,
            _ => ctx.push(n, "bad-options", "jitter_seed must be a non-negative integer"),
        }
    }
    if let Some(n) = node.get("proximity_px") {
        if let Some(v) = ctx.num(n, "proximity_px") {
            if v <= 0.0 {
                ctx.push(n, "bad-options", "proximity_px must be positive");
            } else {
                opts.proximity_px = v;
            }
        }
    }
    if let Some(n) = node.get("epsilon") {
        if let Some(v) = ctx.num(n, "epsilon") {
            if v < 0.0 {
                ctx.push(n, "bad-options", "epsilon must be non-negative");
            } else {
                opts.epsilon = v;
            }
        }
    }
    Some(opts)
}

fn parse_domain(ctx: &mut Ctx, node: &Node) -> Option<AttributeDomain> {
    if let Some(s) = node.as_str() {
        return match s {
            "integer" => Some(AttributeDomain::integer()),
            "real" => Some(AttributeDomain::real()),
            "text" => Some(AttributeDomain::text()),
            "boolean" => Some(AttributeDomain::Boolean),
            other => {
                ctx.push(node, "bad-domain", format!("unknown domain kind `{other}`"));
                None
            }
        };
    }
    ctx.obj(node, "attribute domain")?;
    ctx.known_fields(node, &["kind", "min", "max", "categories"]);
    let kind = node.get("kind").and_then(|n| n.as_str()).unwrap_or("");
    match kind {
        "integer" | "real" => {
            let lo = node.get("min");
            let hi = node.get("max");
            let interval = match (lo, hi) {
                (None, None) => None,
                (Some(l), Some(h)) => {
                    let l = ctx.num(l, "min")?;
                    let h = ctx.num(h, "max")?;
                    if l > h {
                        ctx.push(node, "bad-domain", "min must not exceed max");
                        return None;
                    }
                    Some((l, h))
                }
                _ => {
                    ctx.push(node, "bad-domain", "interval needs both min and max");
                    return None;
                }
            };
            if kind == "integer" {
                Some(AttributeDomain::Integer {
                    interval: interval.map(|(l, h)| (l as i64, h as i64)),
                })
            } else {
                Some(AttributeDomain::Real { interval })
            }
        }
        "text" => {
            let categories = match node.get("categories") {
                None => None,
                Some(n) => {
                    let items = ctx.arr(n, "categories")?;
                    let mut cats = Vec::with_capacity(items.len());
                    for item in items {
                        cats.push(ctx.str(item, "category")?.to_string());
                    }
                    Some(cats)
                }
            };
            let domain = AttributeDomain::Text { categories };
            if !domain.categories_well_formed() {
                ctx.push(node, "bad-domain", "category set must be non-empty and duplicate-free");
                return None;
            }
            Some(domain)
        }
        "boolean" => Some(AttributeDomain::Boolean),
        other => {
            ctx.push(node, "bad-domain", format!("unknown domain kind `{other}`"));
            None
        }
    }
}

fn parse_name_list(ctx: &mut Ctx, node: &Node, what: &str) -> Option<Vec<String>> {
    let items = ctx.arr(node, what)?;
    let mut out = Vec::with_capacity(items.len());
    for item in items {
        out.push(ctx.str(item, what)?.to_string());
    }
    Some(out)
}

fn parse_table(ctx: &mut Ctx, node: &Node) -> Option<TableDecl> {
    ctx.obj(node, "table declaration")?;
    ctx.known_fields(node, &["name", "file", "attributes", "keys", "primary_key"]);
    let name = match node.get("name") {
        Some(n) => ctx.str(n, "table name")?.to_string(),
        None => {
            ctx.push(node, "missing-field", "table needs a `name`");
            return None;
        }
    };
    let file = match node.get("file") {
        Some(n) => Some(ctx.str(n, "file")?.to_string()),
        None => None,
    };
    let mut attributes: Vec<(String, AttributeDomain)> = Vec::new();
    match node.get("attributes") {
        Some(n) => {
            let items = ctx.arr(n, "`attributes`")?;
            for item in items {
                ctx.obj(item, "attribute")?;
                ctx.known_fields(item, &["name", "domain"]);
                let attr = match item.get("name") {
                    Some(a) => ctx.str(a, "attribute name")?.to_string(),
                    None => {
                        ctx.push(item, "missing-field", "attribute needs a `name`");
                        continue;
                    }
                };
                if attributes.iter().any(|(a, _)| *a == attr) {
                    ctx.push(item, "duplicate-name", format!("duplicate attribute `{attr}` in table `{name}`"));
                    continue;
                }
                let domain = match item.get("domain") {
                    Some(d) => parse_domain(ctx, d)?,
                    None => {
                        ctx.push(item, "missing-field", format!("attribute `{attr}` needs a `domain`"));
                        continue;
                    }
                };
                attributes.push((attr, domain));
            }
        }
        None => {
            ctx.push(node, "missing-field", format!("table `{name}` needs `attributes`"));
            return None;
        }
    }
    if attributes.is_empty() {
        ctx.push(node, "bad-table", format!("table `{name}` has no attributes"));
        return None;
    }

    let mut keys: Vec<Vec<String>> = Vec::new();
    if let Some(n) = node.get("keys") {
        let items = ctx.arr(n, "`keys`")?;
        for item in items {
            if let Some(key) = parse_name_list(ctx, item, "key attribute") {
                for a in &key {
                    if !attributes.iter().any(|(attr, _)| attr == a) {
                        ctx.push(item, "unknown-attribute", format!("key attribute `{a}` not in table `{name}`"));
                    }
                }
                keys.push(key);
            }
        }
    }
    let primary = match node.get("primary_key") {
        Some(n) => {
            let pk = parse_name_list(ctx, n, "primary key attribute")?;
            for a in &pk {
                if !attributes.iter().any(|(attr, _)| attr == a) {
                    ctx.push(n, "unknown-attribute", format!("primary key attribute `{a}` not in table `{name}`"));
                }
            }
            pk
        }
        None => {
            if attributes.iter().any(|(a, _)| a == "id") {
                vec!["id".to_string()]
            } else if let Some(first) = keys.first() {
                first.clone()
            } else {
                ctx.push(
                    node,
                    "no-key",
                    format!("table `{name}` declares no key and has no `id` attribute"),
                );
                return None;
            }
        }
    };
    if !keys.contains(&primary) {
        keys.insert(0, primary.clone());
    }

    Some(TableDecl {
        name,
        file,
        attributes,
        keys,
        primary,
    })
}

fn parse_endpoint(
    ctx: &mut Ctx,
    node: &Node,
    tables: &[TableDecl],
    what: &str,
) -> Option<(String, Vec<String>)> {
    ctx.obj(node, what)?;
    ctx.known_fields(node, &["table", "attributes"]);
    let table = match node.get("table") {
        Some(n) => ctx.str(n, "endpoint table")?.to_string(),
        None => {
            ctx.push(node, "missing-field", format!("{what} needs a `table`"));
            return None;
        }
    };
    let attrs = match node.get("attributes") {
        Some(n) => parse_name_list(ctx, n, "endpoint attribute")?,
        None => {
            ctx.push(node, "missing-field", format!("{what} needs `attributes`"));
            return None;
        }
    };
    let Some(decl) = tables.iter().find(|t| t.name == table) else {
        ctx.push(node, "unknown-table", format!("unknown table `{table}`"));
        return None;
    };
    for a in &attrs {
        if !decl.attributes.iter().any(|(attr, _)| attr == a) {
            ctx.push(node, "unknown-attribute", format!("table `{table}` has no attribute `{a}`"));
            return None;
        }
    }
    Some((table, attrs))
}

fn parse_constraint(ctx: &mut Ctx, node: &Node, tables: &[TableDecl]) -> Option<ConstraintDecl> {
    ctx.obj(node, "constraint declaration")?;
    ctx.known_fields(node, &["name", "source", "target", "cardinality"]);
    let name = match node.get("name") {
        Some(n) => ctx.str(n, "constraint name")?.to_string(),
        None => {
            ctx.push(node, "missing-field", "constraint needs a `name`");
            return None;
        }
    };
    let source = match node.get("source") {
        Some(n) => parse_endpoint(ctx, n, tables, "constraint source")?,
        None => {
            ctx.push(node, "missing-field", format!("constraint `{name}` needs a `source`"));
            return None;
        }
    };
    let target = match node.get("target") {
        Some(n) => parse_endpoint(ctx, n, tables, "constraint target")?,
        None => {
            ctx.push(node, "missing-field", format!("constraint `{name}` needs a `target`"));
            return None;
        }
    };
    let cardinality = match node.get("cardinality") {
        None => Cardinality::ManyOne,
        Some(n) => match ctx.str(n, "cardinality")? {
            "one-one" => Cardinality::OneOne,
            "many-one" => Cardinality::ManyOne,
            "many-many-link" => Cardinality::ManyManyLink,
            other => {
                ctx.push(n, "bad-cardinality", format!("unknown cardinality `{other}`"));
                return None;
            }
        },
    };
    if source.1.len() != target.1.len() || source.1.is_empty() {
        ctx.push(node, "bad-constraint", format!("constraint `{name}` endpoint attribute lists must be non-empty and equal in length"));
        return None;
    }
    let src_decl = tables.iter().find(|t| t.name == source.0).expect("checked");
    let tgt_decl = tables.iter().find(|t| t.name == target.0).expect("checked");
    for (sa, ta) in source.1.iter().zip(&target.1) {
        let sd = &src_decl.attributes.iter().find(|(a, _)| a == sa).expect("checked").1;
        let td = &tgt_decl.attributes.iter().find(|(a, _)| a == ta).expect("checked").1;
        if !sd.compatible(td) {
            ctx.push(
                node,
                "bad-constraint",
                format!("constraint `{name}`: attributes `{sa}` and `{ta}` have incompatible domains"),
            );
            return None;
        }
    }
    Some(ConstraintDecl {
        name,
        source_table: source.0,
        source_attrs: source.1,
        target_table: target.0,
        target_attrs: target.1,
        cardinality,
    })
}

fn parse_scalar(node: &Node) -> Option<Value> {
    match &node.value {
        JsonValue::Int(i) => Some(Value::Int(*i)),
        JsonValue::Float(f) => Some(Value::Real(*f)),
        JsonValue::Str(s) => Some(Value::Text(s.clone())),
        JsonValue::Bool(b) => Some(Value::Bool(*b)),
        _ => None,
    }
}

fn parse_scale(ctx: &mut Ctx, node: &Node) -> Option<ScaleSpec> {
    ctx.obj(node, "scale declaration")?;
    ctx.known_fields(node, &["name", "kind", "domain", "range"]);
    let name = match node.get("name") {
        Some(n) => ctx.str(n, "scale name")?.to_string(),
        None => {
            ctx.push(node, "missing-field", "scale needs a `name`");
            return None;
        }
    };
    let kind = match node.get("kind") {
        Some(n) => {
            let s = ctx.str(n, "scale kind")?;
            match ScaleKind::parse(s) {
                Some(k) => k,
                None => {
                    ctx.push(n, "bad-scale", format!("unknown scale kind `{s}`"));
                    return None;
                }
            }
        }
        None => {
            ctx.push(node, "missing-field", format!("scale `{name}` needs a `kind`"));
            return None;
        }
    };

    let domain = match node.get("domain") {
        None => None,
        Some(n) => {
            let items = ctx.arr(n, "scale domain")?;
            match kind {
                ScaleKind::Linear => {
                    if items.len() != 2 {
                        ctx.push(n, "bad-scale", "linear domain must be [lo, hi]");
                        return None;
                    }
                    let lo = ctx.num(&items[0], "domain low")?;
                    let hi = ctx.num(&items[1], "domain high")?;
                    Some(DomainSpec::Interval(lo, hi))
                }
                ScaleKind::Ordinal => {
                    let mut cats = Vec::with_capacity(items.len());
                    for item in items {
                        match parse_scalar(item) {
                            Some(v) => cats.push(v),
                            None => {
                                ctx.push(item, "bad-scale", "ordinal domain entries must be scalars");
                                return None;
                            }
                        }
                    }
                    if cats.is_empty() {
                        ctx.push(n, "bad-scale", "ordinal domain must be non-empty");
                        return None;
                    }
                    Some(DomainSpec::Categories(cats))
                }
                ScaleKind::Identity => {
                    ctx.push(n, "bad-scale", "identity scales take no explicit domain");
                    return None;
                }
            }
        }
    };

    let range = match node.get("range") {
        None => None,
        Some(n) => {
            let items = ctx.arr(n, "scale range")?;
            if kind == ScaleKind::Identity {
                ctx.push(n, "bad-scale", "identity scales take no explicit range");
                return None;
            }
            let all_nums = items.iter().all(|i| i.as_f64().is_some());
            if all_nums && items.len() == 2 {
                let lo = ctx.num(&items[0], "range low")?;
                let hi = ctx.num(&items[1], "range high")?;
                Some(RangeSpec::Interval(lo, hi))
            } else if kind == ScaleKind::Ordinal {
                let mut palette = Vec::with_capacity(items.len());
                for item in items {
                    palette.push(ctx.str(item, "range entry")?.to_string());
                }
                if palette.is_empty() {
                    ctx.push(n, "bad-scale", "ordinal range must be non-empty");
                    return None;
                }
                Some(RangeSpec::Palette(palette))
            } else {
                ctx.push(n, "bad-scale", "linear range must be [lo, hi]");
                return None;
            }
        }
    };

    Some(ScaleSpec {
        name,
        kind,
        domain,
        range,
    })
}

/// Scale kind used for a mapping with no named scale.
pub(crate) fn infer_scale_kind(channel: Channel, expr_type: ExprType) -> ScaleKind {
    match channel {
        Channel::Text => ScaleKind::Identity,
        Channel::Color => ScaleKind::Ordinal,
        _ => match expr_type {
            ExprType::Text | ExprType::Bool => ScaleKind::Ordinal,
            _ => ScaleKind::Linear,
        },
    }
}

fn parse_view(ctx: &mut Ctx, node: &Node, doc: &SpecDocument) -> Option<ViewSpec> {
    ctx.obj(node, "view declaration")?;
    ctx.known_fields(node, &["name", "source", "mark", "channels", "k"]);
    let name = match node.get("name") {
        Some(n) => ctx.str(n, "view name")?.to_string(),
        None => {
            ctx.push(node, "missing-field", "view needs a `name`");
            return None;
        }
    };
    let source = match node.get("source") {
        Some(n) => {
            let s = ctx.str(n, "view source")?;
            if doc.table(s).is_some() {
                SourceRef::Table(s.to_string())
            } else if doc.constraint(s).is_some() {
                SourceRef::Constraint(s.to_string())
            } else {
                ctx.push(n, "unknown-table", format!("unknown table `{s}`"));
                return None;
            }
        }
        None => {
            ctx.push(node, "missing-field", format!("view `{name}` needs a `source`"));
            return None;
        }
    };
    let mark = match node.get("mark") {
        Some(n) => {
            let s = ctx.str(n, "mark")?;
            match MarkType::parse(s) {
                Some(m) => m,
                None => {
                    ctx.push(n, "unknown-mark", format!("unknown mark type `{s}`"));
                    return None;
                }
            }
        }
        None => {
            ctx.push(node, "missing-field", format!("view `{name}` needs a `mark`"));
            return None;
        }
    };
    let facets_per_row = match node.get("k") {
        None => None,
        Some(n) => match n.as_i64() {
            Some(k) if k >= 1 => Some(k as u32),
            _ => {
                ctx.push(n, "bad-type", "`k` must be a positive integer");
                None
            }
        },
    };

    let mut view = ViewSpec {
        name: name.clone(),
        source,
        mark,
        channels: BTreeMap::new(),
        facets_per_row,
    };
    let row_schema = doc.view_row_schema(&view);

    match node.get("channels") {
        Some(n) => {
            if let Some(fields) = ctx.obj(n, "`channels`") {
                for (key, value) in fields {
                    let mut group = Vec::new();
                    let mut ok = true;
                    for part in key.split(',') {
                        match Channel::parse(part.trim()) {
                            Some(c) => group.push(c),
                            None => {
                                ctx.push(value, "unknown-channel", format!("unknown channel `{}`", part.trim()));
                                ok = false;
                            }
                        }
                    }
                    if !ok || group.is_empty() {
                        continue;
                    }
                    parse_channel_group(ctx, value, doc, &mut view, &group, row_schema.as_ref());
                }
            }
        }
        None => ctx.push(node, "missing-field", format!("view `{name}` needs `channels`")),
    }

    // Mark-specific required channels, after defaulting: w/h/dx/dy default
    // at materialization, positions and text never do.
    for required in mark.required_channels() {
        if !view.channels.contains_key(required) {
            ctx.push(
                node,
                "missing-channel",
                format!(
                    "mark `{}` in view `{name}` needs channel `{}`",
                    mark.name(),
                    required.name()
                ),
            );
        }
    }

    Some(view)
}

fn parse_channel_group(
    ctx: &mut Ctx,
    value: &Node,
    doc: &SpecDocument,
    view: &mut ViewSpec,
    group: &[Channel],
    row_schema: Option<&RowSchema>,
) {
    for c in group {
        if view.channels.contains_key(c) {
            ctx.push(value, "duplicate-channel", format!("channel `{}` bound twice", c.name()));
            return;
        }
    }

    // Multi-channel keys are only meaningful for foreign references, whose
    // props line up with the channels.
    if group.len() > 1 {
        let Some(fr) = value.get("ref") else {
            ctx.push(value, "bad-ref", "grouped channels need a `ref` value");
            return;
        };
        let Some((target, key, props)) = parse_ref(ctx, fr, doc, row_schema) else {
            return;
        };
        if props.len() != group.len() {
            ctx.push(fr, "bad-ref", format!("{} channels but {} referenced properties", group.len(), props.len()));
            return;
        }
        for (c, prop) in group.iter().zip(props) {
            view.channels.insert(
                *c,
                ChannelValue::Ref(ForeignRef {
                    view: target.clone(),
                    key: key.clone(),
                    prop,
                }),
            );
        }
        return;
    }

    let channel = group[0];
    let parsed = parse_channel_value(ctx, value, doc, channel, row_schema);
    if let Some(cv) = parsed {
        view.channels.insert(channel, cv);
    }
}

fn parse_channel_value(
    ctx: &mut Ctx,
    value: &Node,
    doc: &SpecDocument,
    channel: Channel,
    row_schema: Option<&RowSchema>,
) -> Option<ChannelValue> {
    match &value.value {
        JsonValue::Str(s) if s == "auto" => {
            if !channel.allows_auto() {
                ctx.push(
                    value,
                    "auto-channel",
                    format!("auto() is restricted to spatial extent channels, not `{}`", channel.name()),
                );
                return None;
            }
            Some(ChannelValue::Auto)
        }
        JsonValue::Str(s) => check_const(ctx, value, channel, Value::Text(s.clone())),
        JsonValue::Int(i) => check_const(ctx, value, channel, Value::Int(*i)),
        JsonValue::Float(f) => check_const(ctx, value, channel, Value::Real(*f)),
        JsonValue::Bool(b) => check_const(ctx, value, channel, Value::Bool(*b)),
        JsonValue::Obj(_) => {
            ctx.known_fields(value, &["attr", "expr", "scale", "const", "ref"]);
            if let Some(n) = value.get("const") {
                let v = match parse_scalar(n) {
                    Some(v) => v,
                    None => {
                        ctx.push(n, "bad-type", "`const` must be a scalar");
                        return None;
                    }
                };
                return check_const(ctx, value, channel, v);
            }
            if let Some(fr) = value.get("ref") {
                let (target, key, props) = parse_ref(ctx, fr, doc, row_schema)?;
                if props.len() != 1 {
                    ctx.push(fr, "bad-ref", "a single channel takes exactly one referenced property");
                    return None;
                }
                return Some(ChannelValue::Ref(ForeignRef {
                    view: target,
                    key,
                    prop: props[0],
                }));
            }
            let expr = if let Some(n) = value.get("attr") {
                let attr = ctx.str(n, "attr")?;
                match parse_expression(attr) {
                    Ok(e @ Expression::Attr { .. }) => e,
                    _ => {
                        ctx.push(n, "bad-expression", "`attr` must be a plain attribute reference");
                        return None;
                    }
                }
            } else if let Some(n) = value.get("expr") {
                let src = ctx.str(n, "expr")?;
                match parse_expression(src) {
                    Ok(e) => e,
                    Err(e) => {
                        ctx.push(n, "bad-expression", e.to_string());
                        return None;
                    }
                }
            } else {
                ctx.push(value, "bad-type", "channel object needs `attr`, `expr`, `const`, or `ref`");
                return None;
            };

            let scale = match value.get("scale") {
                Some(n) => {
                    let s = ctx.str(n, "scale")?.to_string();
                    if doc.scale(&s).is_none() {
                        ctx.push(n, "unknown-scale", format!("unknown scale `{s}`"));
                        return None;
                    }
                    Some(s)
                }
                None => None,
            };

            // Type-check against the source row schema and validate the
            // scale kind for this channel.
            if let Some(rs) = row_schema {
                match expr.type_of(rs) {
                    Err(e) => {
                        let rule = if matches!(e, crate::expr::ExprError::UnknownAttribute(_)) {
                            "unknown-attribute"
                        } else {
                            "type-mismatch"
                        };
                        ctx.push(value, rule, e.to_string());
                        return None;
                    }
                    Ok(ty) => {
                        let kind = match &scale {
                            Some(s) => doc.scale(s).expect("checked").kind,
                            None => infer_scale_kind(channel, ty),
                        };
                        let numeric = matches!(ty, ExprType::Int | ExprType::Real);
                        match kind {
                            ScaleKind::Linear if !numeric => {
                                ctx.push(value, "type-mismatch", format!("linear scale on channel `{}` needs a numeric expression", channel.name()));
                                return None;
                            }
                            ScaleKind::Identity if channel.is_spatial() && !numeric => {
                                ctx.push(value, "type-mismatch", format!("identity-scaled spatial channel `{}` needs a numeric expression", channel.name()));
                                return None;
                            }
                            _ => {}
                        }
                        if channel == Channel::Color && kind == ScaleKind::Linear {
                            ctx.push(value, "bad-scale", "color channels take ordinal or identity scales");
                            return None;
                        }
                        // A palette cannot produce pixel positions.
                        if (channel.is_spatial() || channel == Channel::Opacity)
                            && scale
                                .as_ref()
                                .and_then(|s| doc.scale(s))
                                .is_some_and(|s| matches!(s.range, Some(RangeSpec::Palette(_))))
                        {
                            ctx.push(value, "bad-scale", format!("scale with a palette range cannot feed spatial channel `{}`", channel.name()));
                            return None;
                        }
                    }
                }
            }
            Some(ChannelValue::Map { expr, scale })
        }
        _ => {
            ctx.push(value, "bad-type", format!("unsupported channel value ({})", value.type_name()));
            None
        }
    }
}

fn check_const(ctx: &mut Ctx, node: &Node, channel: Channel, v: Value) -> Option<ChannelValue> {
    let numeric = v.as_f64().is_some();
    if channel.is_spatial() && !numeric {
        ctx.push(
            node,
            "type-mismatch",
            format!("constant on spatial channel `{}` must be numeric", channel.name()),
        );
        return None;
    }
    if channel == Channel::Opacity && !numeric {
        ctx.push(node, "type-mismatch", "opacity constants must be numeric");
        return None;
    }
    Some(ChannelValue::Const(v))
}

fn parse_ref(
    ctx: &mut Ctx,
    node: &Node,
    doc: &SpecDocument,
    row_schema: Option<&RowSchema>,
) -> Option<(String, RefKey, Vec<Channel>)> {
    ctx.obj(node, "foreign reference")?;
    ctx.known_fields(node, &["view", "key", "props"]);
    let target = match node.get("view") {
        Some(n) => ctx.str(n, "referenced view")?.to_string(),
        None => {
            ctx.push(node, "missing-field", "reference needs a `view`");
            return None;
        }
    };
    let key = match node.get("key") {
        Some(n) => {
            let s = ctx.str(n, "reference key")?;
            if doc.constraint(s).is_some() {
                RefKey::Constraint(s.to_string())
            } else {
                match parse_expression(s) {
                    Ok(e) => {
                        if let Some(rs) = row_schema {
                            if let Err(err) = e.type_of(rs) {
                                ctx.push(n, "bad-ref", format!("reference key: {err}"));
                                return None;
                            }
                        }
                        RefKey::Expr(e)
                    }
                    Err(e) => {
                        ctx.push(n, "bad-ref", format!("reference key: {e}"));
                        return None;
                    }
                }
            }
        }
        None => {
            ctx.push(node, "missing-field", "reference needs a `key`");
            return None;
        }
    };
    let props = match node.get("props") {
        Some(n) => {
            let items = ctx.arr(n, "`props`")?;
            let mut props = Vec::with_capacity(items.len());
            for item in items {
                let s = ctx.str(item, "referenced property")?;
                match Channel::parse(s) {
                    Some(c) => props.push(c),
                    None => {
                        ctx.push(item, "bad-ref", format!("unknown referenced property `{s}`"));
                        return None;
                    }
                }
            }
            if props.is_empty() {
                ctx.push(n, "bad-ref", "`props` must be non-empty");
                return None;
            }
            props
        }
        None => {
            ctx.push(node, "missing-field", "reference needs `props`");
            return None;
        }
    };
    Some((target, key, props))
}

/// Checks that need the complete view list: reference targets exist and the
/// referenced properties are channels the target view actually resolves.
fn check_refs(ctx: &mut Ctx, root: &Node, doc: &SpecDocument) {
    for view in &doc.views {
        for cv in view.channels.values() {
            if let ChannelValue::Ref(fr) = cv {
                if doc.view(&fr.view).is_none() {
                    ctx.push(root, "unknown-view", format!("view `{}` references unknown view `{}`", view.name, fr.view));
                }
            }
        }
    }
}

fn parse_mapping(ctx: &mut Ctx, node: &Node, doc: &SpecDocument) -> Option<ConstraintMappingSpec> {
    ctx.obj(node, "constraint mapping")?;
    ctx.known_fields(node, &["constraint", "method"]);
    let constraint = match node.get("constraint") {
        Some(n) => {
            let s = ctx.str(n, "constraint")?;
            if doc.constraint(s).is_none() {
                ctx.push(n, "unknown-constraint", format!("unknown constraint `{s}`"));
                return None;
            }
            s.to_string()
        }
        None => {
            ctx.push(node, "missing-field", "mapping needs a `constraint`");
            return None;
        }
    };
    let fk = doc.constraint(&constraint).expect("checked").clone();
    let method_node = match node.get("method") {
        Some(n) => n,
        None => {
            ctx.push(node, "missing-field", "mapping needs a `method`");
            return None;
        }
    };
    ctx.obj(method_node, "mapping method")?;
    ctx.known_fields(method_node, &["explicit", "nest", "shared_scale"]);

    if let Some(n) = method_node.get("explicit") {
        ctx.obj(n, "explicit mapping")?;
        ctx.known_fields(n, &["view"]);
        let view_name = match n.get("view") {
            Some(v) => ctx.str(v, "explicit view")?.to_string(),
            None => {
                ctx.push(n, "missing-field", "explicit mapping needs a `view`");
                return None;
            }
        };
        let Some(view) = doc.view(&view_name) else {
            ctx.push(n, "unknown-view", format!("unknown view `{view_name}`"));
            return None;
        };
        let sourced_ok = match &view.source {
            SourceRef::Constraint(c) => *c == constraint,
            SourceRef::Table(t) => *t == fk.source_table,
        };
        if !sourced_ok {
            ctx.push(
                n,
                "bad-mapping",
                format!(
                    "explicit view `{view_name}` must be sourced on constraint `{constraint}` or its source table `{}`",
                    fk.source_table
                ),
            );
            return None;
        }
        return Some(ConstraintMappingSpec {
            constraint,
            method: MappingMethod::Explicit { view: view_name },
        });
    }

    if let Some(n) = method_node.get("nest") {
        ctx.obj(n, "nest mapping")?;
        ctx.known_fields(n, &["child", "parent"]);
        let child = match n.get("child") {
            Some(v) => ctx.str(v, "nest child")?.to_string(),
            None => {
                ctx.push(n, "missing-field", "nest mapping needs a `child` view");
                return None;
            }
        };
        let parent = match n.get("parent") {
            Some(v) => ctx.str(v, "nest parent")?.to_string(),
            None => {
                ctx.push(n, "missing-field", "nest mapping needs a `parent` view");
                return None;
            }
        };
        let Some(child_view) = doc.view(&child) else {
            ctx.push(n, "unknown-view", format!("unknown view `{child}`"));
            return None;
        };
        let Some(parent_view) = doc.view(&parent) else {
            ctx.push(n, "unknown-view", format!("unknown view `{parent}`"));
            return None;
        };
        if fk.cardinality != Cardinality::ManyOne {
            ctx.push(n, "bad-mapping", format!("nest requires a many-one constraint, `{constraint}` is {}", fk.cardinality));
            return None;
        }
        if child_view.source != SourceRef::Table(fk.source_table.clone()) {
            ctx.push(n, "bad-mapping", format!("nest child `{child}` must be sourced on `{}`", fk.source_table));
            return None;
        }
        if parent_view.source != SourceRef::Table(fk.target_table.clone()) {
            ctx.push(n, "bad-mapping", format!("nest parent `{parent}` must be sourced on `{}`", fk.target_table));
            return None;
        }
        if !parent_view.mark.is_box() {
            ctx.push(n, "bad-mapping", format!("nest parent `{parent}` must use a box mark with a spatial extent"));
            return None;
        }
        return Some(ConstraintMappingSpec {
            constraint,
            method: MappingMethod::Nest { child, parent },
        });
    }

    if let Some(n) = method_node.get("shared_scale") {
        ctx.obj(n, "shared-scale mapping")?;
        ctx.known_fields(n, &["scale", "level"]);
        let scale = match n.get("scale") {
            Some(v) => {
                let s = ctx.str(v, "scale")?.to_string();
                if doc.scale(&s).is_none() {
                    ctx.push(v, "unknown-scale", format!("unknown scale `{s}`"));
                    return None;
                }
                Some(s)
            }
            None => None,
        };
        let level = match n.get("level") {
            None => 0,
            Some(v) => match v.as_i64() {
                Some(l) if (0..=4).contains(&l) => l as u8,
                _ => {
                    ctx.push(v, "bad-mapping", "reinforcement level must be 0..=4");
                    return None;
                }
            },
        };
        return Some(ConstraintMappingSpec {
            constraint,
            method: MappingMethod::SharedScale { scale, level },
        });
    }

    ctx.push(method_node, "bad-mapping", "method must be one of `explicit`, `nest`, `shared_scale`");
    None
}
