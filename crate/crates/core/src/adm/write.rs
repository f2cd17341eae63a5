use std::fmt::Write as _;

use super::{format_datetime, AdmError, Object, Point, Value};

/// Canonical ADM text: compact, keys in insertion order, doubles in their
/// shortest round-trip form, datetimes at millisecond precision.
pub fn serialize_adm(v: &Value) -> String {
    let mut out = String::new();
    write_adm(&mut out, v);
    out
}

fn write_double(out: &mut String, d: f64) {
    if d.is_finite() {
        // Debug keeps a `.0` on integral values so the text re-parses as a double
        let _ = write!(out, "{d:?}");
    } else {
        out.push_str("null");
    }
}

fn write_point_text(out: &mut String, p: &Point) {
    let _ = write!(out, "{:?},{:?}", p.x, p.y);
}

fn write_adm(out: &mut String, v: &Value) {
    match v {
        Value::Null => out.push_str("null"),
        Value::Boolean(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::BigInt(n) => {
            let _ = write!(out, "{n}");
        }
        Value::Double(d) => write_double(out, *d),
        Value::String(s) => write_string(out, s),
        Value::DateTime(ms) => {
            out.push_str("datetime(\"");
            out.push_str(&datetime_text(*ms));
            out.push_str("\")");
        }
        Value::Duration(d) => {
            let _ = write!(out, "duration(\"{d}\")");
        }
        Value::Point(p) => {
            out.push_str("point(\"");
            write_point_text(out, p);
            out.push_str("\")");
        }
        Value::Rectangle(r) => {
            out.push_str("rectangle(\"");
            write_point_text(out, &r.low());
            out.push(' ');
            write_point_text(out, &r.high());
            out.push_str("\")");
        }
        Value::Uuid(u) => {
            let _ = write!(out, "uuid(\"{}\")", u.hyphenated());
        }
        Value::Array(items) => {
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_adm(out, item);
            }
            out.push(']');
        }
        Value::Object(obj) => {
            out.push('{');
            for (i, (k, v)) in obj.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_string(out, k);
                out.push(':');
                write_adm(out, v);
            }
            out.push('}');
        }
    }
}

fn datetime_text(ms: i64) -> String {
    // out-of-range instants cannot be built by the parser; clamp for display
    format_datetime(ms).unwrap_or_else(|| {
        format_datetime(ms.clamp(-62_167_219_200_000, 253_402_300_799_999)).unwrap_or_default()
    })
}

pub(crate) fn write_string(out: &mut String, s: &str) {
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            c if (c as u32) < 0x20 => {
                let _ = write!(out, "\\u{:04x}", c as u32);
            }
            c => out.push(c),
        }
    }
    out.push('"');
}

/// Plain-JSON form for general brokers.
pub fn to_general_json(v: &Value) -> String {
    to_general_json_value(v).to_string()
}

pub fn to_general_json_value(v: &Value) -> serde_json::Value {
    use serde_json::Value as J;
    let num = |d: f64| {
        serde_json::Number::from_f64(d)
            .map(J::Number)
            .unwrap_or(J::Null)
    };
    match v {
        Value::Null => J::Null,
        Value::Boolean(b) => J::Bool(*b),
        Value::BigInt(n) => J::Number((*n).into()),
        Value::Double(d) => num(*d),
        Value::String(s) => J::String(s.clone()),
        Value::DateTime(ms) => J::String(datetime_text(*ms)),
        Value::Duration(d) => J::String(d.to_string()),
        Value::Point(p) => J::Array(vec![num(p.x), num(p.y)]),
        Value::Rectangle(r) => J::Array(vec![
            num(r.low().x),
            num(r.low().y),
            num(r.high().x),
            num(r.high().y),
        ]),
        Value::Uuid(u) => J::String(u.hyphenated().to_string()),
        Value::Array(items) => J::Array(items.iter().map(to_general_json_value).collect()),
        Value::Object(obj) => J::Object(
            obj.iter()
                .map(|(k, v)| (k.clone(), to_general_json_value(v)))
                .collect(),
        ),
    }
}

/// Reads plain JSON into a [`Value`]. Integral numbers become bigints.
pub fn from_json(j: &serde_json::Value) -> Result<Value, AdmError> {
    use serde_json::Value as J;
    Ok(match j {
        J::Null => Value::Null,
        J::Bool(b) => Value::Boolean(*b),
        J::Number(n) => {
            if let Some(i) = n.as_i64() {
                Value::BigInt(i)
            } else if n.is_u64() {
                return Err(AdmError::BigIntOverflow(n.to_string()));
            } else {
                Value::Double(n.as_f64().unwrap_or(f64::NAN))
            }
        }
        J::String(s) => Value::String(s.clone()),
        J::Array(items) => Value::Array(items.iter().map(from_json).collect::<Result<_, _>>()?),
        J::Object(map) => {
            let mut obj = Object::with_capacity(map.len());
            for (k, v) in map {
                obj.insert(k.clone(), from_json(v)?);
            }
            Value::Object(obj)
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adm::{object, parse_adm_text, Duration, Rectangle};

    #[test]
    fn canonical_point_and_datetime() {
        assert_eq!(
            serialize_adm(&Value::Point(Point::new(0.0, 0.0))),
            r#"point("0.0,0.0")"#
        );
        assert_eq!(
            serialize_adm(&Value::DateTime(1593142018123)),
            r#"datetime("2020-06-26T03:26:58.123Z")"#
        );
    }

    #[test]
    fn doubles_keep_their_type() {
        let text = serialize_adm(&Value::Double(2.0));
        assert_eq!(text, "2.0");
        assert_eq!(parse_adm_text(&text).unwrap(), Value::Double(2.0));
        let tiny = serialize_adm(&Value::Double(1e-7));
        assert_eq!(parse_adm_text(&tiny).unwrap(), Value::Double(1e-7));
    }

    #[test]
    fn general_json_encodings() {
        let p = Value::Point(Point::new(33.64921228736088, -117.84181977473024));
        assert_eq!(
            to_general_json(&p),
            "[33.64921228736088,-117.84181977473024]"
        );
        assert_eq!(
            to_general_json(&Value::DateTime(0)),
            r#""1970-01-01T00:00:00.000Z""#
        );
        let u = uuid::Uuid::parse_str("82e61d25-f7ad-0632-3b9a-9c26e681ad84").unwrap();
        assert_eq!(
            to_general_json(&Value::Uuid(u)),
            r#""82e61d25-f7ad-0632-3b9a-9c26e681ad84""#
        );
        let r = Value::Rectangle(Rectangle::from_corners(
            Point::new(1.0, 2.0),
            Point::new(0.0, 0.5),
        ));
        assert_eq!(to_general_json(&r), "[0.0,0.5,1.0,2.0]");
        assert_eq!(
            to_general_json(&Value::Duration(Duration::from_millis(10_000))),
            r#""PT10S""#
        );
        assert_eq!(to_general_json(&Value::BigInt(73)), "73");
    }

    #[test]
    fn json_reader_preserves_order_and_ints() {
        let j: serde_json::Value =
            serde_json::from_str(r#"{"z":1,"a":2.5,"m":[true,null]}"#).unwrap();
        let v = from_json(&j).unwrap();
        let expected = Value::Object(object([
            ("z", Value::BigInt(1)),
            ("a", Value::Double(2.5)),
            ("m", Value::Array(vec![Value::Boolean(true), Value::Null])),
        ]));
        assert_eq!(v, expected);
        assert_eq!(serialize_adm(&v), r#"{"z":1,"a":2.5,"m":[true,null]}"#);
    }
}
