//! Restricted YAML loader: plain/quoted scalars, mappings and sequences only.
//!
//! Anchors, aliases, tags and multi-document streams are refused so that a
//! delivery file means exactly what it says on the page. The result is a
//! `serde_json::Value`, which lets JSON and YAML share one schema mapper.

use serde_json::{Map, Number, Value};
use yaml_rust2::parser::{Event, MarkedEventReceiver, Parser};
use yaml_rust2::scanner::{Marker, TScalarStyle};

use super::DeliveryFormat;
use super::IngestError;

pub(crate) fn load(raw: &str) -> Result<Value, IngestError> {
    let mut sink = Sink::default();
    Parser::new_from_str(raw)
        .load(&mut sink, true)
        .map_err(|e| IngestError::Syntax {
            format: DeliveryFormat::Yaml,
            line: e.marker().line(),
            column: e.marker().col() + 1,
            message: e.info().to_string(),
        })?;
    if let Some(err) = sink.error {
        return Err(err);
    }
    match sink.documents.len() {
        0 => Err(IngestError::EmptyInput),
        1 => Ok(sink.documents.pop().unwrap()),
        _ => Err(syntax_at(
            sink.second_doc.unwrap_or_default(),
            "multiple YAML documents in one delivery",
        )),
    }
}

fn syntax_at(mark: (usize, usize), message: impl Into<String>) -> IngestError {
    IngestError::Syntax {
        format: DeliveryFormat::Yaml,
        line: mark.0,
        column: mark.1,
        message: message.into(),
    }
}

enum Frame {
    Seq(Vec<Value>),
    Map(Map<String, Value>, Option<String>),
}

#[derive(Default)]
struct Sink {
    stack: Vec<Frame>,
    documents: Vec<Value>,
    second_doc: Option<(usize, usize)>,
    error: Option<IngestError>,
}

impl Sink {
    fn fail(&mut self, mark: Marker, message: impl Into<String>) {
        if self.error.is_none() {
            self.error = Some(syntax_at((mark.line(), mark.col() + 1), message));
        }
    }

    fn push_value(&mut self, value: Value, mark: Marker) {
        match self.stack.last_mut() {
            None => {
                if !self.documents.is_empty() && self.second_doc.is_none() {
                    self.second_doc = Some((mark.line(), mark.col() + 1));
                }
                self.documents.push(value);
            }
            Some(Frame::Seq(items)) => items.push(value),
            Some(Frame::Map(map, pending)) => match pending.take() {
                None => {
                    let key = match value {
                        Value::String(s) => s,
                        Value::Number(n) => n.to_string(),
                        Value::Bool(b) => b.to_string(),
                        _ => {
                            self.fail(mark, "mapping keys must be scalars");
                            return;
                        }
                    };
                    if map.contains_key(&key) {
                        self.fail(mark, format!("duplicate key `{key}`"));
                        return;
                    }
                    *pending = Some(key);
                }
                Some(key) => {
                    map.insert(key, value);
                }
            },
        }
    }
}

impl MarkedEventReceiver for Sink {
    fn on_event(&mut self, ev: Event, mark: Marker) {
        if self.error.is_some() {
            return;
        }
        match ev {
            Event::Alias(_) => self.fail(mark, "aliases are not accepted in deliveries"),
            Event::Scalar(text, style, anchor, tag) => {
                if anchor != 0 {
                    return self.fail(mark, "anchors are not accepted in deliveries");
                }
                if tag.is_some() {
                    return self.fail(mark, "tags are not accepted in deliveries");
                }
                match resolve_scalar(&text, style) {
                    Ok(v) => self.push_value(v, mark),
                    Err(msg) => self.fail(mark, msg),
                }
            }
            Event::SequenceStart(anchor, tag) | Event::MappingStart(anchor, tag)
                if anchor != 0 || tag.is_some() =>
            {
                self.fail(mark, "anchors and tags are not accepted in deliveries")
            }
            Event::SequenceStart(..) => self.stack.push(Frame::Seq(Vec::new())),
            Event::MappingStart(..) => self.stack.push(Frame::Map(Map::new(), None)),
            Event::SequenceEnd | Event::MappingEnd => {
                let value = match self.stack.pop() {
                    Some(Frame::Seq(items)) => Value::Array(items),
                    Some(Frame::Map(map, _)) => Value::Object(map),
                    None => return self.fail(mark, "unbalanced collection end"),
                };
                self.push_value(value, mark);
            }
            Event::Nothing
            | Event::StreamStart
            | Event::StreamEnd
            | Event::DocumentStart
            | Event::DocumentEnd => {}
        }
    }
}

/// YAML 1.2 core-schema resolution for plain scalars; quoted and block
/// scalars are always strings.
fn resolve_scalar(text: &str, style: TScalarStyle) -> Result<Value, String> {
    if style != TScalarStyle::Plain {
        return Ok(Value::String(text.to_string()));
    }
    match text {
        "" | "~" | "null" | "Null" | "NULL" => return Ok(Value::Null),
        "true" | "True" | "TRUE" => return Ok(Value::Bool(true)),
        "false" | "False" | "FALSE" => return Ok(Value::Bool(false)),
        _ => {}
    }
    let lower = text.to_ascii_lowercase();
    if matches!(lower.trim_start_matches(['+', '-']), ".inf" | ".nan") {
        return Err(format!("non-finite number `{text}`"));
    }
    if is_int(text) {
        if let Ok(i) = text.parse::<i64>() {
            return Ok(Value::Number(i.into()));
        }
        if let Ok(u) = text.parse::<u64>() {
            return Ok(Value::Number(u.into()));
        }
    }
    if is_float(text) {
        let f: f64 = text
            .parse()
            .map_err(|_| format!("malformed number `{text}`"))?;
        return Number::from_f64(f)
            .map(Value::Number)
            .ok_or_else(|| format!("non-finite number `{text}`"));
    }
    Ok(Value::String(text.to_string()))
}

fn is_int(s: &str) -> bool {
    let digits = s.strip_prefix(['-', '+']).unwrap_or(s);
    !digits.is_empty() && digits.bytes().all(|b| b.is_ascii_digit())
}

// [-+]? ( \. [0-9]+ | [0-9]+ ( \. [0-9]* )? ) ( [eE] [-+]? [0-9]+ )?
fn is_float(s: &str) -> bool {
    let s = s.strip_prefix(['-', '+']).unwrap_or(s);
    let (mantissa, exponent) = match s.find(['e', 'E']) {
        Some(i) => (&s[..i], Some(&s[i + 1..])),
        None => (s, None),
    };
    let mantissa_ok = match mantissa.split_once('.') {
        Some((int, frac)) => {
            int.bytes().all(|b| b.is_ascii_digit())
                && frac.bytes().all(|b| b.is_ascii_digit())
                && !(int.is_empty() && frac.is_empty())
        }
        None => !mantissa.is_empty() && mantissa.bytes().all(|b| b.is_ascii_digit()),
    };
    let exponent_ok = exponent.is_none_or(is_int);
    mantissa_ok && exponent_ok
}
