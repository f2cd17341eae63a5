//! The semi-structured data model shared by every island component.
//!
//! A [`Value`] is a JSON-like tree extended with a handful of typed scalars
//! (datetimes, durations, points, rectangles and uuids). It has two wire
//! forms:
//!
//! * ADM text ([`serialize_adm`] / [`parse_adm_text`]): JSON plus constructor
//!   calls such as `point("1.0,2.0")`. This is what BAD brokers receive and
//!   what the write-ahead log stores.
//! * general JSON ([`to_general_json`]): the typed scalars are flattened into
//!   strings and number arrays so any JSON consumer can read them.

mod duration;
mod merge;
mod text;
mod write;

use std::fmt;

use indexmap::IndexMap;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub use duration::Duration;
pub use merge::object_merge;
pub(crate) use text::construct;
pub use text::parse_adm_text;
pub(crate) use write::write_string;
pub use write::{from_json, serialize_adm, to_general_json, to_general_json_value};

/// Ordered string-keyed map. Keys are unique by construction.
pub type Object = IndexMap<String, Value>;

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum AdmError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("unknown constructor `{0}`")]
    UnknownConstructor(String),
    #[error("malformed {kind} literal {text:?}: {reason}")]
    MalformedLiteral {
        kind: &'static str,
        text: String,
        reason: String,
    },
    #[error("integer literal {0} does not fit in a 64-bit bigint")]
    BigIntOverflow(String),
    #[error("conflicting values for key `{0}` in object_merge")]
    MergeConflict(String),
    #[error("expected an object, found {0}")]
    NotAnObject(&'static str),
}

/// The type tag of a [`Value`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tag {
    Null,
    Boolean,
    Bigint,
    Double,
    String,
    Datetime,
    Duration,
    Point,
    Rectangle,
    Uuid,
    Array,
    Object,
}

impl Tag {
    pub fn name(self) -> &'static str {
        match self {
            Tag::Null => "null",
            Tag::Boolean => "boolean",
            Tag::Bigint => "bigint",
            Tag::Double => "double",
            Tag::String => "string",
            Tag::Datetime => "datetime",
            Tag::Duration => "duration",
            Tag::Point => "point",
            Tag::Rectangle => "rectangle",
            Tag::Uuid => "uuid",
            Tag::Array => "array",
            Tag::Object => "object",
        }
    }

    /// Resolves a type name as written in `CREATE TYPE`. `int` and the
    /// sized integer names are accepted as aliases of `bigint`.
    pub fn from_type_name(name: &str) -> Option<Tag> {
        let tag = match name.to_ascii_lowercase().as_str() {
            "null" => Tag::Null,
            "boolean" | "bool" => Tag::Boolean,
            "bigint" | "int" | "int64" | "int32" | "integer" | "smallint" | "tinyint" => {
                Tag::Bigint
            }
            "double" | "float" => Tag::Double,
            "string" => Tag::String,
            "datetime" => Tag::Datetime,
            "duration" => Tag::Duration,
            "point" => Tag::Point,
            "rectangle" => Tag::Rectangle,
            "uuid" => Tag::Uuid,
            "array" => Tag::Array,
            "object" => Tag::Object,
            _ => return None,
        };
        Some(tag)
    }
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    /// Euclidean distance in coordinate units.
    pub fn distance(&self, other: &Point) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        (dx * dx + dy * dy).sqrt()
    }
}

/// Axis-aligned rectangle, stored with `low` holding the minimum corner.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rectangle {
    low: Point,
    high: Point,
}

impl Rectangle {
    /// Builds a rectangle from any two opposite corners.
    pub fn from_corners(a: Point, b: Point) -> Self {
        Rectangle {
            low: Point::new(a.x.min(b.x), a.y.min(b.y)),
            high: Point::new(a.x.max(b.x), a.y.max(b.y)),
        }
    }

    pub fn low(&self) -> Point {
        self.low
    }

    pub fn high(&self) -> Point {
        self.high
    }

    /// Inclusive on every edge.
    pub fn contains(&self, p: &Point) -> bool {
        self.low.x <= p.x && p.x <= self.high.x && self.low.y <= p.y && p.y <= self.high.y
    }

    pub fn intersects(&self, other: &Rectangle) -> bool {
        self.low.x <= other.high.x
            && other.low.x <= self.high.x
            && self.low.y <= other.high.y
            && other.low.y <= self.high.y
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Null,
    Boolean(bool),
    BigInt(i64),
    Double(f64),
    String(String),
    /// Milliseconds since the Unix epoch, UTC.
    DateTime(i64),
    Duration(Duration),
    Point(Point),
    Rectangle(Rectangle),
    Uuid(uuid::Uuid),
    Array(Vec<Value>),
    Object(Object),
}

impl Value {
    pub fn tag(&self) -> Tag {
        match self {
            Value::Null => Tag::Null,
            Value::Boolean(_) => Tag::Boolean,
            Value::BigInt(_) => Tag::Bigint,
            Value::Double(_) => Tag::Double,
            Value::String(_) => Tag::String,
            Value::DateTime(_) => Tag::Datetime,
            Value::Duration(_) => Tag::Duration,
            Value::Point(_) => Tag::Point,
            Value::Rectangle(_) => Tag::Rectangle,
            Value::Uuid(_) => Tag::Uuid,
            Value::Array(_) => Tag::Array,
            Value::Object(_) => Tag::Object,
        }
    }

    pub fn string(s: impl Into<String>) -> Value {
        Value::String(s.into())
    }

    pub fn as_object(&self) -> Option<&Object> {
        match self {
            Value::Object(o) => Some(o),
            _ => None,
        }
    }

    pub fn into_object(self) -> Result<Object, AdmError> {
        match self {
            Value::Object(o) => Ok(o),
            other => Err(AdmError::NotAnObject(other.tag().name())),
        }
    }

    pub fn as_array(&self) -> Option<&[Value]> {
        match self {
            Value::Array(a) => Some(a),
            _ => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            Value::String(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_i64(&self) -> Option<i64> {
        match self {
            Value::BigInt(n) => Some(*n),
            _ => None,
        }
    }

    /// Numeric view of bigints and doubles.
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::BigInt(n) => Some(*n as f64),
            Value::Double(d) => Some(*d),
            _ => None,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            Value::Boolean(b) => Some(*b),
            _ => None,
        }
    }

    pub fn as_point(&self) -> Option<&Point> {
        match self {
            Value::Point(p) => Some(p),
            _ => None,
        }
    }

    pub fn as_uuid(&self) -> Option<uuid::Uuid> {
        match self {
            Value::Uuid(u) => Some(*u),
            _ => None,
        }
    }

    /// Field lookup on objects; `None` for absent keys and non-objects.
    pub fn get(&self, key: &str) -> Option<&Value> {
        self.as_object().and_then(|o| o.get(key))
    }
}

impl From<Object> for Value {
    fn from(o: Object) -> Self {
        Value::Object(o)
    }
}

impl From<&str> for Value {
    fn from(s: &str) -> Self {
        Value::String(s.to_owned())
    }
}

impl From<String> for Value {
    fn from(s: String) -> Self {
        Value::String(s)
    }
}

impl From<i64> for Value {
    fn from(n: i64) -> Self {
        Value::BigInt(n)
    }
}

impl From<f64> for Value {
    fn from(d: f64) -> Self {
        Value::Double(d)
    }
}

impl From<bool> for Value {
    fn from(b: bool) -> Self {
        Value::Boolean(b)
    }
}

impl From<Point> for Value {
    fn from(p: Point) -> Self {
        Value::Point(p)
    }
}

impl From<Vec<Value>> for Value {
    fn from(a: Vec<Value>) -> Self {
        Value::Array(a)
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&serialize_adm(self))
    }
}

impl std::str::FromStr for Value {
    type Err = AdmError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_adm_text(s)
    }
}

// Metadata files embed values as their ADM text.
impl Serialize for Value {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&serialize_adm(self))
    }
}

impl<'de> Deserialize<'de> for Value {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        parse_adm_text(&text).map_err(serde::de::Error::custom)
    }
}

/// Builds an [`Object`] from key/value pairs. Later duplicates replace
/// earlier ones.
pub fn object<K, I>(pairs: I) -> Object
where
    K: Into<String>,
    I: IntoIterator<Item = (K, Value)>,
{
    pairs.into_iter().map(|(k, v)| (k.into(), v)).collect()
}

pub(crate) fn format_datetime(millis: i64) -> Option<String> {
    let dt = chrono::DateTime::from_timestamp_millis(millis)?;
    let year = chrono::Datelike::year(&dt);
    if !(0..=9999).contains(&year) {
        return None;
    }
    Some(dt.format("%Y-%m-%dT%H:%M:%S%.3fZ").to_string())
}

pub(crate) fn parse_datetime(text: &str) -> Result<i64, AdmError> {
    let malformed = |reason: &str| AdmError::MalformedLiteral {
        kind: "datetime",
        text: text.to_owned(),
        reason: reason.to_owned(),
    };
    let dt =
        chrono::DateTime::parse_from_rfc3339(text.trim()).map_err(|e| malformed(&e.to_string()))?;
    let millis = dt.timestamp_millis();
    if format_datetime(millis).is_none() {
        return Err(malformed("year outside 0000..=9999"));
    }
    Ok(millis)
}
