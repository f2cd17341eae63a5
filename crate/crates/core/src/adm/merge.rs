use super::{AdmError, Object, Value};

/// Merges `b` into a copy of `a`. Keys of `a` keep their position, new keys
/// of `b` are appended. Objects under a shared key merge recursively; any
/// other shared key must carry equal values on both sides.
pub fn object_merge(a: &Object, b: &Object) -> Result<Object, AdmError> {
    let mut out = a.clone();
    for (key, bv) in b {
        match out.get_mut(key) {
            None => {
                out.insert(key.clone(), bv.clone());
            }
            Some(Value::Object(ao)) => match bv {
                Value::Object(bo) => *ao = object_merge(ao, bo)?,
                _ => return Err(AdmError::MergeConflict(key.clone())),
            },
            Some(av) if av == bv => {}
            Some(_) => return Err(AdmError::MergeConflict(key.clone())),
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adm::{object, parse_adm_text, serialize_adm};

    fn obj(text: &str) -> Object {
        parse_adm_text(text).unwrap().into_object().unwrap()
    }

    #[test]
    fn identity_and_disjoint() {
        let x = obj(r#"{"a":1,"b":{"c":2}}"#);
        assert_eq!(object_merge(&x, &Object::new()).unwrap(), x);
        let merged = object_merge(&obj(r#"{"a":1}"#), &obj(r#"{"b":2}"#)).unwrap();
        assert_eq!(serialize_adm(&Value::Object(merged)), r#"{"a":1,"b":2}"#);
    }

    #[test]
    fn nested_objects_merge() {
        let merged =
            object_merge(&obj(r#"{"a":{"x":1},"z":0}"#), &obj(r#"{"a":{"y":2}}"#)).unwrap();
        assert_eq!(
            serialize_adm(&Value::Object(merged)),
            r#"{"a":{"x":1,"y":2},"z":0}"#
        );
    }

    #[test]
    fn conflicting_scalars_fail() {
        let err = object_merge(&obj(r#"{"a":1}"#), &obj(r#"{"a":2}"#)).unwrap_err();
        assert_eq!(err, AdmError::MergeConflict("a".into()));
        assert!(object_merge(&obj(r#"{"a":{"x":1}}"#), &obj(r#"{"a":3}"#)).is_err());
        // equal values are not a conflict
        let same = object_merge(&obj(r#"{"a":1}"#), &object([("a", Value::BigInt(1))])).unwrap();
        assert_eq!(same.len(), 1);
    }
}
