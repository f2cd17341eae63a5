//! Statement text generation. The output re-parses to an equal AST; binary
//! expressions are fully parenthesized so precedence never has to be
//! reconstructed.

use std::fmt::{self, Display, Formatter, Write as _};

use super::ast::*;
use super::parser::is_reserved;
use crate::adm::{serialize_adm, write_string, Object, Value};

fn ident(f: &mut Formatter<'_>, name: &str) -> fmt::Result {
    let simple = name
        .chars()
        .next()
        .is_some_and(|c| c.is_ascii_alphabetic() || c == '_')
        && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_');
    if simple && !is_reserved(name) {
        f.write_str(name)
    } else {
        write!(f, "`{name}`")
    }
}

fn string(f: &mut Formatter<'_>, s: &str) -> fmt::Result {
    let mut out = String::new();
    write_string(&mut out, s);
    f.write_str(&out)
}

fn list<T>(
    f: &mut Formatter<'_>,
    items: &[T],
    mut each: impl FnMut(&mut Formatter<'_>, &T) -> fmt::Result,
) -> fmt::Result {
    for (i, item) in items.iter().enumerate() {
        if i > 0 {
            f.write_str(", ")?;
        }
        each(f, item)?;
    }
    Ok(())
}

fn config(f: &mut Formatter<'_>, obj: &Object) -> fmt::Result {
    f.write_str(&serialize_adm(&Value::Object(obj.clone())))
}

impl Display for Expr {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Literal(Value::String(s)) => string(f, s),
            Expr::Literal(v) => f.write_str(&serialize_adm(v)),
            Expr::Ident(n) => ident(f, n),
            Expr::Field(base, name) => {
                write!(f, "{base}.")?;
                ident(f, name)
            }
            Expr::Index(base, idx) => write!(f, "{base}[{idx}]"),
            Expr::Call(name, args) => {
                ident(f, name)?;
                f.write_char('(')?;
                list(f, args, |f, a| write!(f, "{a}"))?;
                f.write_char(')')
            }
            Expr::Binary(op, l, r) => write!(f, "({l} {} {r})", op.symbol()),
            Expr::Unary(UnOp::Not, e) => write!(f, "(NOT {e})"),
            Expr::Unary(UnOp::Neg, e) => write!(f, "(-{e})"),
            Expr::Object(fields) => {
                f.write_char('{')?;
                list(f, fields, |f, (k, v)| {
                    string(f, k)?;
                    write!(f, ": {v}")
                })?;
                f.write_char('}')
            }
            Expr::Array(items) => {
                f.write_char('[')?;
                list(f, items, |f, e| write!(f, "{e}"))?;
                f.write_char(']')
            }
            Expr::Subquery(q) => write!(f, "({q})"),
        }
    }
}

impl Query {
    fn fmt_select(&self, f: &mut Formatter<'_>) -> fmt::Result {
        f.write_str("SELECT ")?;
        match &self.select {
            SelectClause::Value(e) => write!(f, "VALUE {e}"),
            SelectClause::Items(items) => list(f, items, |f, item| {
                write!(f, "{}", item.expr)?;
                if let Some(a) = &item.alias {
                    f.write_str(" AS ")?;
                    ident(f, a)?;
                }
                Ok(())
            }),
        }
    }

    /// FROM through WHERE; empty when the query has none of them.
    fn middle(&self) -> String {
        struct Middle<'a>(&'a Query);
        impl Display for Middle<'_> {
            fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
                let q = self.0;
                let mut sep = "";
                if !q.from.is_empty() {
                    f.write_str("FROM ")?;
                    list(f, &q.from, |f, item| {
                        write!(f, "{} AS ", item.source)?;
                        ident(f, &item.alias)
                    })?;
                    sep = " ";
                }
                for u in &q.unnest {
                    write!(f, "{sep}UNNEST {} AS ", u.expr)?;
                    ident(f, &u.alias)?;
                    sep = " ";
                }
                if !q.lets.is_empty() {
                    write!(f, "{sep}LET ")?;
                    list(f, &q.lets, |f, b| {
                        ident(f, &b.name)?;
                        write!(f, " = {}", b.expr)
                    })?;
                    sep = " ";
                }
                if let Some(w) = &q.where_clause {
                    write!(f, "{sep}WHERE {w}")?;
                }
                Ok(())
            }
        }
        Middle(self).to_string()
    }
}

impl Display for Query {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        let middle = self.middle();
        if self.select_first {
            self.fmt_select(f)?;
            if !middle.is_empty() {
                write!(f, " {middle}")?;
            }
        } else {
            if !middle.is_empty() {
                write!(f, "{middle} ")?;
            }
            self.fmt_select(f)?;
        }
        if !self.order_by.is_empty() {
            f.write_str(" ORDER BY ")?;
            list(f, &self.order_by, |f, k| {
                write!(
                    f,
                    "{} {}",
                    k.expr,
                    if k.descending { "DESC" } else { "ASC" }
                )
            })?;
        }
        Ok(())
    }
}

impl Display for Statement {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        match self {
            Statement::Use { dataverse } => {
                f.write_str("USE ")?;
                ident(f, dataverse)
            }
            Statement::CreateType(t) => {
                f.write_str("CREATE TYPE ")?;
                ident(f, &t.name)?;
                f.write_str(if t.open {
                    " AS OPEN { "
                } else {
                    " AS CLOSED { "
                })?;
                list(f, &t.fields, |f, fd| {
                    ident(f, &fd.name)?;
                    write!(f, ": {}{}", fd.tag, if fd.optional { "?" } else { "" })
                })?;
                f.write_str(" }")
            }
            Statement::CreateDataset(d) => {
                f.write_str(if d.active {
                    "CREATE ACTIVE DATASET "
                } else {
                    "CREATE DATASET "
                })?;
                ident(f, &d.name)?;
                f.write_char('(')?;
                ident(f, &d.type_name)?;
                f.write_str(") PRIMARY KEY ")?;
                list(f, &d.primary_key, |f, k| ident(f, k))?;
                if d.autogenerated {
                    f.write_str(" AUTOGENERATED")?;
                }
                Ok(())
            }
            Statement::CreateFeed { name, config: c } => {
                f.write_str("CREATE FEED ")?;
                ident(f, name)?;
                f.write_str(" WITH ")?;
                config(f, c)
            }
            Statement::ConnectFeed {
                feed,
                dataset,
                function,
            } => {
                f.write_str("CONNECT FEED ")?;
                ident(f, feed)?;
                f.write_str(" TO DATASET ")?;
                ident(f, dataset)?;
                if let Some(func) = function {
                    f.write_str(" APPLY FUNCTION ")?;
                    ident(f, func)?;
                }
                Ok(())
            }
            Statement::StartFeed { feed } => {
                f.write_str("START FEED ")?;
                ident(f, feed)
            }
            Statement::StopFeed { feed } => {
                f.write_str("STOP FEED ")?;
                ident(f, feed)
            }
            Statement::CreateBroker {
                name,
                endpoint,
                options,
                ..
            } => {
                f.write_str("CREATE BROKER ")?;
                ident(f, name)?;
                f.write_str(" AT ")?;
                string(f, endpoint)?;
                if !options.is_empty() {
                    f.write_str(" WITH ")?;
                    config(f, options)?;
                }
                Ok(())
            }
            Statement::DropBroker { name } => {
                f.write_str("DROP BROKER ")?;
                ident(f, name)
            }
            Statement::CreateChannel(c) => {
                write!(
                    f,
                    "CREATE {} {} CHANNEL ",
                    if c.continuous {
                        "CONTINUOUS"
                    } else {
                        "REPETITIVE"
                    },
                    match c.mode {
                        DeliveryMode::Push => "PUSH",
                        DeliveryMode::Pull => "PULL",
                    }
                )?;
                ident(f, &c.name)?;
                f.write_char('(')?;
                list(f, &c.params, |f, p| ident(f, p))?;
                f.write_str(") PERIOD duration(")?;
                string(f, &c.period)?;
                write!(f, ") {{ {} }}", c.body)
            }
            Statement::Subscribe {
                channel,
                args,
                broker,
            } => {
                f.write_str("SUBSCRIBE TO ")?;
                ident(f, channel)?;
                f.write_char('(')?;
                list(f, args, |f, a| write!(f, "{a}"))?;
                f.write_str(") ON ")?;
                ident(f, broker)
            }
            Statement::Unsubscribe {
                subscription_id,
                channel,
            } => {
                f.write_str("UNSUBSCRIBE ")?;
                string(f, subscription_id)?;
                if let Some(c) = channel {
                    f.write_str(" FROM ")?;
                    ident(f, c)?;
                }
                Ok(())
            }
            Statement::CreateFunction(func) => {
                f.write_str("CREATE FUNCTION ")?;
                ident(f, &func.name)?;
                f.write_char('(')?;
                list(f, &func.params, |f, p| ident(f, p))?;
                write!(f, ") {{ {} }}", func.body)
            }
            Statement::Insert { dataset, values } => {
                f.write_str("INSERT INTO ")?;
                ident(f, dataset)?;
                write!(f, " {values}")
            }
            Statement::Query(q) => write!(f, "{q}"),
        }
    }
}

/// Joins statements into a script that [`super::parse_statements`] accepts.
pub fn print_statements(stmts: &[Statement]) -> String {
    let mut out = String::new();
    for s in stmts {
        let _ = writeln!(out, "{s};");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::super::parse_statements;
    use super::*;

    fn round_trip(text: &str) {
        let first = parse_statements(text).unwrap();
        let printed = print_statements(&first);
        let second = parse_statements(&printed).unwrap_or_else(|e| panic!("{e}\n{printed}"));
        assert_eq!(first, second, "{printed}");
    }

    #[test]
    fn reserved_identifiers_are_quoted() {
        let stmts = parse_statements("FROM `value` v SELECT v.`from` AS `select`").unwrap();
        let text = stmts[0].to_string();
        assert_eq!(text, "FROM `value` AS v SELECT v.`from` AS `select`");
        round_trip(&text);
    }

    #[test]
    fn expressions_round_trip() {
        round_trip(
            r#"SELECT VALUE -(a.b[0] + 2) * 3 / 4.5 FROM X a WHERE NOT a.c != "q\"x" OR a.d <= -7"#,
        );
        round_trip(
            r#"INSERT INTO Events {"eid": uuid("82e61d25-4cad-0632-3d8d-148e71cb50bf"), "xs": [1, 2.0, null, true]}"#,
        );
        round_trip(r#"CREATE FEED F WITH {"n": -3, "d": 1.5e-7, "nested": {"a": [false]}}"#);
        round_trip("CREATE TYPE T AS CLOSED { a: int?, b: [string], c: { d: point } }");
        round_trip("CREATE REPETITIVE PULL CHANNEL C() PERIOD duration(\"PT1S\") { SELECT VALUE 1 FROM X x }");
        round_trip(
            r#"UNSUBSCRIBE "82e61d25-f7ad-0632-3b9a-9c26e681ad84" FROM ThreateningTweetsAt; DROP BROKER B"#,
        );
    }
}
