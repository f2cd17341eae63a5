//! The built-in function library.

use crate::adm::{construct, object_merge, Value};
use crate::error::{Error, Result};

use super::WordList;

/// Builtin names compare case-insensitively and ignore underscores, so
/// `threateningRating` and `threatening_rating` are the same function.
pub(crate) fn normalize(name: &str) -> String {
    name.chars()
        .filter(|c| *c != '_')
        .map(|c| c.to_ascii_lowercase())
        .collect()
}

const BUILTINS: &[&str] = &[
    "isnew",
    "spatialdistance",
    "spatialintersect",
    "createpoint",
    "datetimefromunixtimeinms",
    "objectmerge",
    "threateningrating",
    "currentdatetime",
    "datetime",
    "duration",
    "point",
    "rectangle",
    "uuid",
    "isnull",
    "ismissing",
    "arraycount",
];

pub fn is_builtin(name: &str) -> bool {
    BUILTINS.contains(&normalize(name).as_str())
}

fn arity(name: &str, args: &[Option<Value>], n: usize) -> Result<()> {
    if args.len() == n {
        Ok(())
    } else {
        Err(Error::eval(format!(
            "{name} takes {n} argument{}, got {}",
            if n == 1 { "" } else { "s" },
            args.len()
        )))
    }
}

/// Evaluates builtin `name` (already normalized). Returns `None` when the
/// name is not a builtin. `is_new` is handled by the evaluator. A `None`
/// argument or result means missing.
pub(crate) fn call(
    name: &str,
    display: &str,
    args: &[Option<Value>],
    words: &WordList,
    now_ms: i64,
) -> Option<Result<Option<Value>>> {
    let out = match name {
        "spatialdistance" => arity(display, args, 2).map(|_| {
            propagate(args, |a| match (&a[0], &a[1]) {
                (Value::Point(p), Value::Point(q)) => Value::Double(p.distance(q)),
                _ => Value::Null,
            })
        }),
        "spatialintersect" => arity(display, args, 2).map(|_| {
            propagate(args, |a| match (&a[0], &a[1]) {
                (Value::Point(p), Value::Rectangle(r)) | (Value::Rectangle(r), Value::Point(p)) => {
                    Value::Boolean(r.contains(p))
                }
                (Value::Rectangle(r), Value::Rectangle(s)) => Value::Boolean(r.intersects(s)),
                (Value::Point(p), Value::Point(q)) => Value::Boolean(p == q),
                _ => Value::Null,
            })
        }),
        "createpoint" => arity(display, args, 2).map(|_| {
            propagate(args, |a| match (a[0].as_f64(), a[1].as_f64()) {
                (Some(x), Some(y)) if x.is_finite() && y.is_finite() => {
                    Value::Point(crate::adm::Point::new(x, y))
                }
                _ => Value::Null,
            })
        }),
        "datetimefromunixtimeinms" => arity(display, args, 1).map(|_| {
            propagate(args, |a| match a[0] {
                Value::BigInt(n) if crate::adm::format_datetime(n).is_some() => Value::DateTime(n),
                _ => Value::Null,
            })
        }),
        "objectmerge" => arity(display, args, 2).and_then(|_| {
            let (Some(a), Some(b)) = (&args[0], &args[1]) else {
                return Ok(None);
            };
            match (a, b) {
                (Value::Object(a), Value::Object(b)) => object_merge(a, b)
                    .map(|o| Some(Value::Object(o)))
                    .map_err(Error::from),
                _ => Ok(Some(Value::Null)),
            }
        }),
        "threateningrating" => arity(display, args, 1).map(|_| {
            propagate(args, |a| match &a[0] {
                Value::String(s) => Value::BigInt(words.rating(s)),
                _ => Value::Null,
            })
        }),
        "currentdatetime" => arity(display, args, 0).map(|_| Some(Value::DateTime(now_ms))),
        "datetime" | "duration" | "point" | "rectangle" | "uuid" => arity(display, args, 1)
            .and_then(|_| match &args[0] {
                None => Ok(None),
                Some(Value::String(s)) => construct(name, s).map(Some).map_err(Error::from),
                Some(Value::Null) => Ok(Some(Value::Null)),
                Some(other) if other.tag().name() == name => Ok(Some(other.clone())),
                Some(_) => Ok(Some(Value::Null)),
            }),
        "isnull" => arity(display, args, 1)
            .map(|_| Some(Value::Boolean(matches!(args[0], Some(Value::Null))))),
        "ismissing" => arity(display, args, 1).map(|_| Some(Value::Boolean(args[0].is_none()))),
        "arraycount" => arity(display, args, 1).map(|_| {
            propagate(args, |a| match &a[0] {
                Value::Array(items) => Value::BigInt(items.len() as i64),
                _ => Value::Null,
            })
        }),
        _ => return None,
    };
    Some(out)
}

/// Missing in, missing out; null in, null out; otherwise apply `f`.
fn propagate(args: &[Option<Value>], f: impl FnOnce(&[Value]) -> Value) -> Option<Value> {
    let mut present = Vec::with_capacity(args.len());
    for a in args {
        present.push(a.clone()?);
    }
    if present.iter().any(|v| matches!(v, Value::Null)) {
        return Some(Value::Null);
    }
    Some(f(&present))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adm::{parse_adm_text, Point};

    fn run(name: &str, args: Vec<Value>) -> Option<Value> {
        let args: Vec<Option<Value>> = args.into_iter().map(Some).collect();
        call(&normalize(name), name, &args, &WordList::default(), 0)
            .unwrap()
            .unwrap()
    }

    fn pt(x: f64, y: f64) -> Value {
        Value::Point(Point::new(x, y))
    }

    #[test]
    fn distance_examples() {
        let tweet = pt(33.64921228736088, -117.84181977473024);
        let s1 = pt(33.64792551859947, -117.84013290702327);
        let s0 = pt(33.646866723393266, -117.84170161534618);
        let d1 = run("spatial_distance", vec![tweet.clone(), s1]).unwrap();
        let d0 = run("spatial_distance", vec![tweet, s0]).unwrap();
        assert!((d1.as_f64().unwrap() * 100.0 - 0.21216259109805177).abs() < 1e-9);
        assert!((d0.as_f64().unwrap() * 100.0 - 0.23485382616041114).abs() < 1e-9);
        assert_eq!(
            run("spatial_distance", vec![pt(0.0, 0.0), pt(3.0, 4.0)]),
            Some(Value::Double(5.0))
        );
    }

    #[test]
    fn intersect_is_inclusive() {
        let r = parse_adm_text(
            r#"rectangle("33.64811430275051, -117.84332027249145 33.649382536086605,-117.84153928570557")"#,
        )
        .unwrap();
        let inside = pt(33.64921228736088, -117.84181977473024);
        assert_eq!(
            run("spatial_intersect", vec![inside, r.clone()]),
            Some(Value::Boolean(true))
        );
        let corner = pt(33.64811430275051, -117.84332027249145);
        assert_eq!(
            run("spatial_intersect", vec![corner, r.clone()]),
            Some(Value::Boolean(true))
        );
        let outside = pt(33.7, -117.842);
        assert_eq!(
            run("spatial_intersect", vec![outside, r]),
            Some(Value::Boolean(false))
        );
    }

    #[test]
    fn conversions() {
        assert_eq!(
            run(
                "datetime_from_unix_time_in_ms",
                vec![Value::BigInt(1593142018123)]
            ),
            Some(parse_adm_text(r#"datetime("2020-06-26T03:26:58.123Z")"#).unwrap())
        );
        assert_eq!(
            run("datetime_from_unix_time_in_ms", vec![Value::BigInt(-1)]),
            Some(Value::DateTime(-1))
        );
        assert_eq!(
            run("create_point", vec![Value::BigInt(0), Value::Double(0.0)]),
            Some(pt(0.0, 0.0))
        );
        assert_eq!(
            run("threateningRating", vec![Value::string("AK47.")]),
            Some(Value::BigInt(1))
        );
    }

    #[test]
    fn missing_and_null_propagate() {
        let args = [None, Some(pt(0.0, 0.0))];
        let out = call(
            "spatialdistance",
            "spatial_distance",
            &args,
            &WordList::default(),
            0,
        );
        assert_eq!(out.unwrap().unwrap(), None);
        assert_eq!(
            run("spatial_distance", vec![Value::Null, pt(0.0, 0.0)]),
            Some(Value::Null)
        );
    }

    #[test]
    fn arity_and_unknown() {
        assert!(
            call("createpoint", "create_point", &[], &WordList::default(), 0)
                .unwrap()
                .is_err()
        );
        assert!(call("nope", "nope", &[], &WordList::default(), 0).is_none());
        assert!(is_builtin("IS_NEW"));
    }
}
