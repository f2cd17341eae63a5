//! Name resolution for channel bodies and function bodies.

use std::collections::HashMap;

use super::ast::*;
use super::parser::parse_braced_query;
use super::DdlError;

/// What a channel body touches, gathered while checking its bindings.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct BodyInfo {
    /// Every dataset named in a FROM clause, first occurrence order.
    pub datasets: Vec<String>,
    /// Datasets whose alias appears under `is_new`.
    pub is_new_datasets: Vec<String>,
    /// Every function name called, first occurrence order.
    pub calls: Vec<String>,
}

impl BodyInfo {
    fn note(list: &mut Vec<String>, name: &str) {
        if !list.iter().any(|n| n == name) {
            list.push(name.to_owned());
        }
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Binding {
    /// Channel or function parameter, LET, UNNEST or non-dataset FROM alias.
    Plain,
    /// An alias ranging over the records of a dataset.
    Dataset(usize),
}

struct Scope {
    vars: HashMap<String, Binding>,
}

/// Parses a brace-delimited channel body and checks that every identifier is
/// bound and that `is_new` is only applied to dataset aliases.
pub fn parse_channel_body(text: &str, params: &[String]) -> Result<Query, DdlError> {
    let q = parse_braced_query(text)?;
    analyze_query(&q, params)?;
    Ok(q)
}

/// Checks a parsed query against a parameter list.
pub fn analyze_query(q: &Query, params: &[String]) -> Result<BodyInfo, DdlError> {
    let mut info = BodyInfo::default();
    let mut scope = Scope {
        vars: params.iter().map(|p| (p.clone(), Binding::Plain)).collect(),
    };
    query(q, &mut scope, &mut info)?;
    Ok(info)
}

/// Checks a function body against its parameters.
pub fn analyze_expr(e: &Expr, params: &[String]) -> Result<BodyInfo, DdlError> {
    let mut info = BodyInfo::default();
    let mut scope = Scope {
        vars: params.iter().map(|p| (p.clone(), Binding::Plain)).collect(),
    };
    expr(e, &mut scope, &mut info)?;
    Ok(info)
}

fn query(q: &Query, outer: &mut Scope, info: &mut BodyInfo) -> Result<(), DdlError> {
    let mut scope = Scope {
        vars: outer.vars.clone(),
    };
    for item in &q.from {
        let binding = match &item.source {
            Expr::Ident(name) if !scope.vars.contains_key(name) => {
                BodyInfo::note(&mut info.datasets, name);
                let idx = info.datasets.iter().position(|d| d == name).unwrap_or(0);
                Binding::Dataset(idx)
            }
            other => {
                expr(other, &mut scope, info)?;
                Binding::Plain
            }
        };
        scope.vars.insert(item.alias.clone(), binding);
    }
    for u in &q.unnest {
        expr(&u.expr, &mut scope, info)?;
        scope.vars.insert(u.alias.clone(), Binding::Plain);
    }
    for b in &q.lets {
        expr(&b.expr, &mut scope, info)?;
        scope.vars.insert(b.name.clone(), Binding::Plain);
    }
    if let Some(w) = &q.where_clause {
        expr(w, &mut scope, info)?;
    }
    match &q.select {
        SelectClause::Value(e) => expr(e, &mut scope, info)?,
        SelectClause::Items(items) => {
            for item in items {
                expr(&item.expr, &mut scope, info)?;
            }
            // ORDER BY may name projected columns
            for (i, item) in items.iter().enumerate() {
                scope
                    .vars
                    .entry(item.output_name(i))
                    .or_insert(Binding::Plain);
            }
        }
    }
    for k in &q.order_by {
        expr(&k.expr, &mut scope, info)?;
    }
    Ok(())
}

fn expr(e: &Expr, scope: &mut Scope, info: &mut BodyInfo) -> Result<(), DdlError> {
    match e {
        Expr::Literal(_) => Ok(()),
        Expr::Ident(name) => {
            if scope.vars.contains_key(name) {
                Ok(())
            } else {
                Err(DdlError::Analysis(format!("unbound alias `{name}`")))
            }
        }
        Expr::Field(base, _) => expr(base, scope, info),
        Expr::Index(base, idx) => {
            expr(base, scope, info)?;
            expr(idx, scope, info)
        }
        Expr::Call(name, args) => {
            BodyInfo::note(&mut info.calls, name);
            if name.eq_ignore_ascii_case("is_new") {
                let [arg] = args.as_slice() else {
                    return Err(DdlError::Analysis("is_new takes exactly one alias".into()));
                };
                let Expr::Ident(alias) = arg else {
                    return Err(DdlError::Analysis(format!(
                        "is_new must be applied to a dataset alias, not `{arg}`"
                    )));
                };
                return match scope.vars.get(alias) {
                    Some(Binding::Dataset(idx)) => {
                        let ds = info.datasets[*idx].clone();
                        BodyInfo::note(&mut info.is_new_datasets, &ds);
                        Ok(())
                    }
                    Some(Binding::Plain) => Err(DdlError::Analysis(format!(
                        "is_new must be applied to a dataset alias; `{alias}` is not bound to a dataset"
                    ))),
                    None => Err(DdlError::Analysis(format!("unbound alias `{alias}`"))),
                };
            }
            for a in args {
                expr(a, scope, info)?;
            }
            Ok(())
        }
        Expr::Binary(_, l, r) => {
            expr(l, scope, info)?;
            expr(r, scope, info)
        }
        Expr::Unary(_, inner) => expr(inner, scope, info),
        Expr::Object(fields) => {
            for (_, v) in fields {
                expr(v, scope, info)?;
            }
            Ok(())
        }
        Expr::Array(items) => {
            for v in items {
                expr(v, scope, info)?;
            }
            Ok(())
        }
        Expr::Subquery(q) => query(q, scope, info),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn select_first_body() {
        let body = r#"{
          SELECT t.area_name, t.text FROM Tweets t
          WHERE t.area_name = area_name AND t.threatening_rating > 0 AND is_new(t) }"#;
        let q = parse_channel_body(body, &names(&["area_name"])).unwrap();
        assert!(q.select_first);
        let info = analyze_query(&q, &names(&["area_name"])).unwrap();
        assert_eq!(info.datasets, ["Tweets"]);
        assert_eq!(info.is_new_datasets, ["Tweets"]);
    }

    #[test]
    fn unbound_alias() {
        let body = "{ FROM T t UNNEST t.results r SELECT rr.result }";
        let err = parse_channel_body(body, &[]).unwrap_err();
        assert_eq!(err, DdlError::Analysis("unbound alias `rr`".into()));
    }

    #[test]
    fn is_new_needs_a_dataset_alias() {
        assert!(
            parse_channel_body("{ FROM T t UNNEST t.rs r WHERE is_new(r) SELECT r }", &[]).is_err()
        );
        assert!(parse_channel_body("{ FROM T t WHERE is_new(t.x) SELECT t }", &[]).is_err());
        assert!(
            parse_channel_body("{ FROM T t WHERE is_new(p) SELECT t }", &names(&["p"])).is_err()
        );
    }

    #[test]
    fn subqueries_see_outer_bindings() {
        let body =
            "{ FROM A a LET d = (FROM B b LET x = a.k + b.k SELECT b, x ORDER BY x) SELECT d }";
        let q = parse_channel_body(body, &[]).unwrap();
        let info = analyze_query(&q, &[]).unwrap();
        assert_eq!(info.datasets, ["A", "B"]);
        assert!(info.is_new_datasets.is_empty());
    }

    #[test]
    fn function_body() {
        let e = super::super::parse_expr(
            "object_merge(tweet, {\"w\": (SELECT VALUE w.weapon_name FROM WeaponRegistrations w WHERE w.uid = tweet.uid)})",
        )
        .unwrap();
        let info = analyze_expr(&e, &names(&["tweet"])).unwrap();
        assert_eq!(info.datasets, ["WeaponRegistrations"]);
        assert_eq!(info.calls, ["object_merge"]);
        assert!(analyze_expr(&e, &[]).is_err());
    }
}
