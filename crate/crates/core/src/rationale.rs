//! Visual rationale documents: one cell per executed step.
//!
//! [`build`] turns a [`RunRecord`] into a [`Rationale`], which serializes as
//! the JSON sidecar and renders as a self-contained HTML page with images
//! inlined as data URIs. Both are pure functions of the record and contain no
//! timings, so they are byte-for-byte reproducible.

use std::fmt::Write as _;

use base64::Engine as _;
use serde::{Deserialize, Serialize};

use crate::font;
use crate::image::{BBox, Image, Mask, ObjectRegion};
use crate::imageops::{stroke_box, STROKE};
use crate::interpreter::{RunRecord, RunStatus, StepTrace, TraceError};
use crate::value::{format_number, Value};

pub const THUMB_MAX: u32 = 256;
const BOX_COLOR: [u8; 4] = [255, 0, 200, 255];
const LABEL_COLOR: [u8; 4] = [255, 255, 255, 255];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueView {
    pub kind: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thumbnail: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub items: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArgView {
    pub name: String,
    pub value: ValueView,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub index: usize,
    pub step_text: String,
    pub module: String,
    pub args: Vec<ArgView>,
    pub output: Option<ValueView>,
    pub caption: Option<String>,
    pub error: Option<TraceError>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rationale {
    pub run_id: String,
    pub status: RunStatus,
    pub source: String,
    pub cells: Vec<Cell>,
    pub result: Option<ValueView>,
}

fn data_uri(img: &Image) -> String {
    format!("data:image/png;base64,{}", base64::engine::general_purpose::STANDARD.encode(img.to_png()))
}

fn scale_box(b: &BBox, s: f64) -> BBox {
    BBox::new(b.x1 * s, b.y1 * s, b.x2 * s, b.y2 * s)
}

/// Thumbnail of `base` with region outlines drawn at thumbnail scale.
fn annotated(base: &Image, objs: &[ObjectRegion]) -> Image {
    let mut thumb = base.thumbnail(THUMB_MAX);
    let s = thumb.width() as f64 / base.width() as f64;
    for r in objs {
        let b = scale_box(&r.bbox, s);
        stroke_box(&mut thumb, &b, STROKE, BOX_COLOR);
        if let Some(label) = r.label() {
            let (x0, y0, _, _) = b.pixel_span(thumb.width(), thumb.height());
            font::draw_text(&mut thumb, (x0 + STROKE + 1) as i64, (y0 + STROKE + 1) as i64, label, LABEL_COLOR);
        }
    }
    thumb
}

fn mask_image(m: &Mask) -> Image {
    let mut img = Image::new(m.width(), m.height(), [0, 0, 0, 255]).expect("mask has non-zero size");
    for y in 0..m.height() {
        for x in 0..m.width() {
            if m.get(x, y) {
                img.put(x, y, [255, 255, 255, 255]);
            }
        }
    }
    img
}

fn region_line(r: &ObjectRegion) -> String {
    let b = &r.bbox;
    let coords = [b.x1, b.y1, b.x2, b.y2].map(format_number).join(", ");
    let mut s = format!("[{coords}] score {}", format_number((r.score * 1000.0).round() / 1000.0));
    if let Some(c) = &r.category {
        let _ = write!(s, " category {c}");
    }
    if let Some(t) = &r.tag {
        let _ = write!(s, " tag {t}");
    }
    s
}

/// Renders a value; object lists are drawn over `context` when it fits.
pub fn view(v: &Value, context: Option<&Image>) -> ValueView {
    let mut out = ValueView { kind: v.kind().to_string(), text: v.summary(), thumbnail: None, items: Vec::new() };
    match v {
        Value::Image(img) => out.thumbnail = Some(data_uri(&img.thumbnail(THUMB_MAX))),
        Value::Mask(m) => out.thumbnail = Some(data_uri(&mask_image(m).thumbnail(THUMB_MAX))),
        Value::Box(b) => {
            if let Some(base) = context {
                out.thumbnail = Some(data_uri(&annotated(base, &[ObjectRegion::new(*b, 1.0)])));
            }
        }
        Value::ObjectList(objs) => {
            out.items = objs.iter().map(region_line).collect();
            if let Some(base) = context {
                out.thumbnail = Some(data_uri(&annotated(base, objs)));
            }
        }
        Value::TextList(items) => out.items = items.clone(),
        _ => {}
    }
    out
}

fn context_image(t: &StepTrace) -> Option<&Image> {
    t.args.get("image").ok().and_then(Value::as_image).map(|a| a.as_ref())
}

pub fn build(run: &RunRecord) -> Rationale {
    let cells = run
        .traces
        .iter()
        .map(|t| {
            let ctx = context_image(t);
            Cell {
                index: t.index,
                step_text: t.step_text.clone(),
                module: t.module.clone(),
                args: t.args.iter().map(|(n, v)| ArgView { name: n.to_string(), value: view(v, ctx) }).collect(),
                output: t.output.as_ref().map(|v| view(v, ctx)),
                caption: t.caption.clone(),
                error: t.error.clone(),
            }
        })
        .collect();
    Rationale {
        run_id: run.run_id.clone(),
        status: run.status,
        source: run.source.clone(),
        cells,
        result: run.result.as_ref().map(|v| view(v, None)),
    }
}

pub fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&#39;"),
            c => out.push(c),
        }
    }
    out
}

const STYLE: &str = "body{font-family:sans-serif;margin:1.5em;background:#fafafa}\
.cell{background:#fff;border:1px solid #ccc;border-radius:4px;margin:1em 0;padding:.8em}\
.cell.failed{border-color:#c00}\
.args{display:flex;flex-wrap:wrap;gap:1em}\
.arg,.output{display:inline-block;vertical-align:top}\
.name{font-weight:bold;margin-right:.4em}\
.error{background:#fdd;color:#900;padding:.5em;margin-top:.5em}\
.result{padding:.8em;font-size:1.2em}\
.result.ok{background:#dfd}.result.failed{background:#fdd}\
pre{background:#f0f0f0;padding:.5em}";

fn render_value(out: &mut String, v: &ValueView) {
    let _ = write!(out, "<span class=\"value {}\">{}</span>", escape(&v.kind), escape(&v.text));
    if let Some(uri) = &v.thumbnail {
        let _ = write!(out, "<br><img src=\"{uri}\" alt=\"{}\">", escape(&v.kind));
    }
    if !v.items.is_empty() {
        out.push_str("<ul>");
        for i in &v.items {
            let _ = write!(out, "<li>{}</li>", escape(i));
        }
        out.push_str("</ul>");
    }
}

/// Self-contained HTML page for a rationale.
pub fn render_html(r: &Rationale) -> String {
    let mut out = String::new();
    let _ = write!(
        out,
        "<!DOCTYPE html>\n<html>\n<head>\n<meta charset=\"utf-8\">\n<title>Run {id}</title>\n<style>{STYLE}</style>\n</head>\n<body>\n\
         <header>\n<h1>Run {id}</h1>\n<pre class=\"program\">{src}</pre>\n</header>\n",
        id = escape(&r.run_id),
        src = escape(&r.source)
    );
    for c in &r.cells {
        let class = if c.error.is_some() { "cell failed" } else { "cell" };
        let _ = write!(
            out,
            "<section class=\"{class}\" data-step=\"{}\">\n<h2>Step {}: <code>{}</code></h2>\n<div class=\"args\">",
            c.index,
            c.index,
            escape(&c.step_text)
        );
        for a in &c.args {
            let _ = write!(out, "<div class=\"arg\"><span class=\"name\">{}</span>", escape(&a.name));
            render_value(&mut out, &a.value);
            out.push_str("</div>");
        }
        out.push_str("</div>\n");
        if let Some(o) = &c.output {
            out.push_str("<div class=\"output\"><span class=\"name\">output</span>");
            render_value(&mut out, o);
            out.push_str("</div>\n");
        }
        if let Some(cap) = &c.caption {
            let _ = writeln!(out, "<p class=\"caption\">{}</p>", escape(cap));
        }
        if let Some(e) = &c.error {
            let _ = writeln!(out, "<div class=\"error\">{}: {}</div>", escape(&e.kind), escape(&e.message));
        }
        out.push_str("</section>\n");
    }
    match (&r.status, &r.result) {
        (RunStatus::Ok, Some(v)) => {
            out.push_str("<div class=\"result ok\"><span class=\"name\">Result</span>");
            render_value(&mut out, v);
            out.push_str("</div>\n");
        }
        _ => {
            let at = r.cells.iter().find(|c| c.error.is_some()).map(|c| c.index);
            let what = match at {
                Some(i) => format!("Run failed at step {i}"),
                None => "Run failed".to_string(),
            };
            let _ = writeln!(out, "<div class=\"result failed\">{what}</div>");
        }
    }
    out.push_str("</body>\n</html>\n");
    out
}

pub fn render_rationale(run: &RunRecord) -> String {
    render_html(&build(run))
}

/// Pretty JSON sidecar with the same content as the HTML.
pub fn sidecar_json(run: &RunRecord) -> String {
    serde_json::to_string_pretty(&build(run)).expect("rationale serializes")
}

/// Minimal well-formedness check: every non-void tag is closed in order.
/// Returns the number of `<section class="cell...">` elements.
pub fn check_structure(html: &str) -> Result<usize, String> {
    const VOID: &[&str] = &["meta", "br", "img", "!doctype"];
    let mut stack: Vec<String> = Vec::new();
    let mut cells = 0;
    let mut rest = html;
    while let Some(open) = rest.find('<') {
        let after = &rest[open + 1..];
        let close = after.find('>').ok_or("unterminated tag")?;
        let tag = &after[..close];
        rest = &after[close + 1..];
        if let Some(name) = tag.strip_prefix('/') {
            let top = stack.pop().ok_or_else(|| format!("stray </{name}>"))?;
            if top != name {
                return Err(format!("</{name}> closes <{top}>"));
            }
            continue;
        }
        let name = tag.split_whitespace().next().unwrap_or("").to_ascii_lowercase();
        if name == "section" && tag.contains("class=\"cell") {
            cells += 1;
        }
        if !VOID.contains(&name.as_str()) {
            stack.push(name.clone());
        }
        if name == "style" {
            let end = rest.find("</style>").ok_or("unterminated style")?;
            rest = &rest[end..];
        }
    }
    if let Some(open) = stack.pop() {
        return Err(format!("<{open}> never closed"));
    }
    Ok(cells)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::{FixtureBackend, FixtureSet};
    use crate::dsl::parse_program;
    use crate::interpreter::Interpreter;
    use crate::registry::Registry;
    use std::sync::Arc;

    fn run(src: &str, inputs: &[(String, Value)]) -> RunRecord {
        let it = Interpreter::new(Arc::new(Registry::standard()), Arc::new(FixtureBackend::new(FixtureSet::default())));
        it.execute("t", &parse_program(src).unwrap(), inputs)
    }

    #[test]
    fn ok_run_has_one_cell_per_step_and_a_result() {
        let rec = run("A=EVAL(expr='1 + 2')\nB=EVAL(expr='{A} * 2')\nC=RESULT(var=B)", &[]);
        let html = render_rationale(&rec);
        assert_eq!(check_structure(&html), Ok(3));
        assert!(html.contains("<div class=\"result ok\">"));
        assert_eq!(render_rationale(&rec), html);
    }

    #[test]
    fn failed_run_ends_with_error_cell() {
        let rec = run("A=EVAL(expr='1')\nB=EVAL(expr='1 / 0')\nC=EVAL(expr='2')\nD=RESULT(var=C)", &[]);
        let r = build(&rec);
        assert_eq!(r.cells.len(), 2);
        assert!(r.cells[1].error.is_some());
        let html = render_html(&r);
        assert_eq!(check_structure(&html), Ok(2));
        assert!(html.contains("Run failed at step 2"));
    }

    #[test]
    fn image_outputs_get_thumbnails() {
        let img = Value::image(Image::new(600, 300, [10, 200, 10, 255]).unwrap());
        let rec = run("A=CROP(image=IMAGE,box=OBJ)\nB=RESULT(var=A)", &[
            ("IMAGE".into(), img),
            ("OBJ".into(), Value::ObjectList(vec![ObjectRegion::new(BBox::new(0.0, 0.0, 400.0, 200.0), 1.0)])),
        ]);
        let r = build(&rec);
        let last = r.cells.last().unwrap().output.as_ref().unwrap();
        assert!(last.thumbnail.as_ref().unwrap().starts_with("data:image/png;base64,"));
        let b64 = last.thumbnail.as_ref().unwrap().trim_start_matches("data:image/png;base64,");
        let png = base64::engine::general_purpose::STANDARD.decode(b64).unwrap();
        let thumb = Image::decode(&png).unwrap();
        assert_eq!((thumb.width(), thumb.height()), (256, 128));
        assert!(r.cells[0].args[1].value.thumbnail.is_some());
    }

    #[test]
    fn text_is_escaped() {
        assert_eq!(escape("<a href='x'>&"), "&lt;a href=&#39;x&#39;&gt;&amp;");
        assert!(check_structure("<div><p></div></p>").is_err());
    }
}
