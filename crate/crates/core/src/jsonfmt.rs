//! Canonical JSON writer.
//!
//! Output files must be byte-identical across runs, so serialization goes
//! through this module instead of a generic serializer: object keys keep the
//! order they were inserted in, and float formatting is explicit per value.
//!
//! Two float styles exist on purpose. [`Json::f6`] renders with exactly six
//! decimal digits and is used for data files (corpus colors, score tables)
//! where a fixed width defines the canonical form. [`Json::num`] renders the
//! shortest string that round-trips, which reports use so that p-values like
//! `3e-12` survive serialization.

/// A JSON value with deterministic serialization.
#[derive(Debug, Clone, PartialEq)]
pub enum Json {
    Null,
    Bool(bool),
    /// Integer, rendered without a decimal point.
    Int(i64),
    /// Float rendered with exactly six decimal digits.
    Fixed(f64),
    /// Float rendered as the shortest round-tripping literal.
    Num(f64),
    Str(String),
    Arr(Vec<Json>),
    /// Key-value pairs serialized in insertion order.
    Obj(Vec<(String, Json)>),
    /// Pre-rendered JSON emitted verbatim; the caller guarantees validity.
    Raw(String),
}

impl Json {
    pub fn s(v: impl Into<String>) -> Json {
        Json::Str(v.into())
    }

    pub fn i(v: impl Into<i64>) -> Json {
        Json::Int(v.into())
    }

    /// Fixed six-decimal float (canonical data-file form).
    pub fn f6(v: f64) -> Json {
        Json::Fixed(v)
    }

    /// Shortest round-tripping float (report form).
    pub fn num(v: f64) -> Json {
        Json::Num(v)
    }

    pub fn obj<'a>(pairs: impl IntoIterator<Item = (&'a str, Json)>) -> Json {
        Json::Obj(pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect())
    }

    pub fn arr(values: impl IntoIterator<Item = Json>) -> Json {
        Json::Arr(values.into_iter().collect())
    }

    /// Single-line form, used for JSONL records.
    pub fn to_compact(&self) -> String {
        let mut out = String::new();
        self.write(&mut out, None, 0);
        out
    }

    /// Indented form, used for report files.
    pub fn to_pretty(&self) -> String {
        let mut out = String::new();
        self.write(&mut out, Some(2), 0);
        out
    }

    fn write(&self, out: &mut String, indent: Option<usize>, depth: usize) {
        match self {
            Json::Null => out.push_str("null"),
            Json::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
            Json::Int(v) => out.push_str(&v.to_string()),
            Json::Fixed(v) => write_fixed(out, *v),
            Json::Num(v) => write_shortest(out, *v),
            Json::Str(s) => write_escaped(out, s),
            Json::Raw(s) => out.push_str(s),
            Json::Arr(items) => write_seq(out, indent, depth, '[', ']', items.len(), |out, i| {
                items[i].write(out, indent, depth + 1);
            }),
            Json::Obj(pairs) => write_seq(out, indent, depth, '{', '}', pairs.len(), |out, i| {
                write_escaped(out, &pairs[i].0);
                out.push(':');
                if indent.is_some() {
                    out.push(' ');
                }
                pairs[i].1.write(out, indent, depth + 1);
            }),
        }
    }
}

fn write_seq(
    out: &mut String,
    indent: Option<usize>,
    depth: usize,
    open: char,
    close: char,
    len: usize,
    mut item: impl FnMut(&mut String, usize),
) {
    out.push(open);
    if len == 0 {
        out.push(close);
        return;
    }
    for i in 0..len {
        if i > 0 {
            out.push(',');
        }
        if let Some(width) = indent {
            out.push('\n');
            out.extend(std::iter::repeat(' ').take(width * (depth + 1)));
        }
        item(out, i);
    }
    if let Some(width) = indent {
        out.push('\n');
        out.extend(std::iter::repeat(' ').take(width * depth));
    }
    out.push(close);
}

/// JSON has no literal for non-finite numbers; they serialize as null.
fn write_fixed(out: &mut String, v: f64) {
    if v.is_finite() {
        out.push_str(&format!("{v:.6}"));
    } else {
        out.push_str("null");
    }
}

fn write_shortest(out: &mut String, v: f64) {
    if !v.is_finite() {
        out.push_str("null");
        return;
    }
    // {:?} prints the shortest string that parses back to the same f64,
    // switching to exponent notation when that is shorter.
    out.push_str(&format!("{v:?}"));
}

fn write_escaped(out: &mut String, s: &str) {
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            '\u{8}' => out.push_str("\\b"),
            '\u{c}' => out.push_str("\\f"),
            c if (c as u32) < 0x20 => out.push_str(&format!("\\u{:04x}", c as u32)),
            c => out.push(c),
        }
    }
    out.push('"');
}
