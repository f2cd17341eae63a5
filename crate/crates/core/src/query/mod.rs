//! Query evaluation over dataset snapshots.
//!
//! Evaluation is a nested loop over FROM, UNNEST and LET binders in that
//! order. Each WHERE conjunct runs as soon as every alias it names is bound,
//! and a FROM over an `is_new` alias scans only that dataset's watermark
//! window.

mod builtins;
mod eval;
mod wordlist;

pub use builtins::is_builtin;
pub use eval::{
    apply_function, eval_expr, execute_query, total_cmp, CatalogSource, ExecutionContext, Source,
};
pub use wordlist::WordList;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adm::{parse_adm_text, serialize_adm, Value};
    use crate::ddl::{parse_query, parse_statements, Statement};
    use crate::storage::{Catalog, StorageOptions};

    /// Runs type, dataset and function DDL plus `dataset <- adm` inserts.
    fn catalog(ddl: &str, rows: &[(&str, &str)]) -> Catalog {
        let (cat, _) = Catalog::open(None, StorageOptions::default()).unwrap();
        cat.ensure_dataverse("dv");
        for s in parse_statements(ddl).unwrap() {
            match s {
                Statement::CreateType(t) => cat.create_type("dv", t).unwrap(),
                Statement::CreateDataset(d) => {
                    cat.create_dataset("dv", d).unwrap();
                }
                Statement::CreateFunction(f) => cat.create_function("dv", f).unwrap(),
                other => panic!("unexpected {other:?}"),
            }
        }
        for (ds, text) in rows {
            let v = parse_adm_text(text).unwrap().into_object().unwrap();
            cat.dataset("dv", ds).unwrap().insert(vec![v]).unwrap();
        }
        cat
    }

    fn run(cat: &Catalog, q: &str, params: &[(&str, Value)]) -> Vec<String> {
        let src = CatalogSource {
            catalog: cat,
            dataverse: "dv",
        };
        let words = WordList::default();
        let ctx = ExecutionContext::new(&src, &words, 0);
        let q = parse_query(q).unwrap();
        execute_query(&q, &ctx, params)
            .unwrap()
            .iter()
            .map(serialize_adm)
            .collect()
    }

    const TWEET: &str = r#"{"tid": 1593142018123, "uid": 73, "area_name": "UCI", "created_at": 1593142018123,
        "text": "Saul Goodman builds SKS, and Todd Alquist fires AK47, but Skyler White sells Cabbage.",
        "coordinates": [33.64921228736088, -117.84181977473024]}"#;

    #[test]
    fn enrichment_function() {
        let cat = catalog(
            r#"CREATE TYPE Tweet AS { tid: bigint };
               CREATE TYPE Reg AS { wrid: uuid, uid: bigint, weapon_name: string };
               CREATE DATASET WeaponRegistrations(Reg) PRIMARY KEY wrid AUTOGENERATED;
               CREATE FUNCTION EnrichTweet(tweet) {
                 object_merge(tweet, {
                   "timestamp": datetime_from_unix_time_in_ms(tweet.created_at),
                   "location": create_point(tweet.coordinates[0], tweet.coordinates[1]),
                   "threatening_rating": threateningRating(tweet.text),
                   "user_registered_weapon": (SELECT VALUE w.weapon_name
                      FROM WeaponRegistrations w WHERE w.uid = tweet.uid)})
               };"#,
            &[
                (
                    "WeaponRegistrations",
                    r#"{"uid": 73, "weapon_name": "AR10"}"#,
                ),
                (
                    "WeaponRegistrations",
                    r#"{"uid": 12, "weapon_name": "M16"}"#,
                ),
                (
                    "WeaponRegistrations",
                    r#"{"uid": 73, "weapon_name": "AK47"}"#,
                ),
                (
                    "WeaponRegistrations",
                    r#"{"uid": 73, "weapon_name": "GLOCK21"}"#,
                ),
            ],
        );
        let src = CatalogSource {
            catalog: &cat,
            dataverse: "dv",
        };
        let words = WordList::default();
        let ctx = ExecutionContext::new(&src, &words, 0);
        let f = cat.function("dv", "EnrichTweet").unwrap();
        let out = apply_function(&f, parse_adm_text(TWEET).unwrap(), &ctx).unwrap();
        assert_eq!(out.get("threatening_rating"), Some(&Value::BigInt(2)));
        assert_eq!(
            serialize_adm(out.get("user_registered_weapon").unwrap()),
            r#"["AR10","AK47","GLOCK21"]"#
        );
        assert_eq!(
            serialize_adm(out.get("timestamp").unwrap()),
            r#"datetime("2020-06-26T03:26:58.123Z")"#
        );
        assert_eq!(
            serialize_adm(out.get("location").unwrap()),
            r#"point("33.64921228736088,-117.84181977473024")"#
        );

        let mut other = parse_adm_text(TWEET).unwrap().into_object().unwrap();
        other.insert("uid".into(), Value::BigInt(999));
        let out = apply_function(&f, Value::Object(other), &ctx).unwrap();
        assert_eq!(
            out.get("user_registered_weapon"),
            Some(&Value::Array(vec![]))
        );
    }

    #[test]
    fn ordered_subquery_in_let() {
        let cat = catalog(
            "CREATE TYPE S AS { sid: bigint, location: point }; CREATE DATASET Stations(S) PRIMARY KEY sid;",
            &[
                ("Stations", r#"{"sid": 0, "location": point("33.646866723393266,-117.84170161534618")}"#),
                ("Stations", r#"{"sid": 1, "location": point("33.64792551859947,-117.84013290702327")}"#),
            ],
        );
        let out = run(
            &cat,
            r#"LET tweet_loc = point("33.64921228736088,-117.84181977473024"),
                 d = (FROM Stations s LET dist = spatial_distance(tweet_loc, s.location)
                      SELECT s.sid, dist * 100 dist_km ORDER BY dist)
               SELECT VALUE d"#,
            &[],
        );
        assert_eq!(
            out,
            [
                r#"[{"sid":1,"dist_km":0.21216259109805177},{"sid":0,"dist_km":0.23485382616041114}]"#
            ]
        );
    }

    #[test]
    fn missing_fields_filter_rows_and_vanish_from_output() {
        let cat = catalog(
            "CREATE TYPE T AS { k: bigint }; CREATE DATASET D(T) PRIMARY KEY k;",
            &[("D", r#"{"k": 1, "x": 5}"#), ("D", r#"{"k": 2}"#)],
        );
        assert_eq!(
            run(&cat, "SELECT d.k FROM D d WHERE d.x > 1", &[]),
            [r#"{"k":1}"#]
        );
        assert_eq!(
            run(&cat, "SELECT d.k, d.x FROM D d", &[]),
            [r#"{"k":1,"x":5}"#, r#"{"k":2}"#]
        );
        assert_eq!(
            run(&cat, "SELECT d.k FROM D d WHERE NOT (d.x > 1)", &[]),
            Vec::<String>::new()
        );
    }

    #[test]
    fn is_new_windows() {
        let cat = catalog(
            "CREATE TYPE T AS { k: bigint }; CREATE ACTIVE DATASET D(T) PRIMARY KEY k;",
            &[
                ("D", r#"{"k": 1}"#),
                ("D", r#"{"k": 2}"#),
                ("D", r#"{"k": 3}"#),
            ],
        );
        let src = CatalogSource {
            catalog: &cat,
            dataverse: "dv",
        };
        let words = WordList::default();
        let q = parse_query("SELECT VALUE d.k FROM D d WHERE is_new(d)").unwrap();
        for restrict in [true, false] {
            let ctx = ExecutionContext::new(&src, &words, 0)
                .with_watermark("D", 1, 3)
                .with_range_restriction(restrict);
            let out = execute_query(&q, &ctx, &[]).unwrap();
            assert_eq!(out, [Value::BigInt(2), Value::BigInt(3)]);
            let ctx = ExecutionContext::new(&src, &words, 0)
                .with_watermark("D", 3, 3)
                .with_range_restriction(restrict);
            assert!(execute_query(&q, &ctx, &[]).unwrap().is_empty());
        }
    }

    #[test]
    fn params_unnest_and_order() {
        let cat = catalog(
            "CREATE TYPE T AS { k: bigint }; CREATE DATASET D(T) PRIMARY KEY k;",
            &[
                ("D", r#"{"k": 1, "xs": [3, 1]}"#),
                ("D", r#"{"k": 2, "xs": []}"#),
                ("D", r#"{"k": 3, "xs": [2]}"#),
            ],
        );
        assert_eq!(
            run(
                &cat,
                "FROM D d UNNEST d.xs x WHERE x >= lo SELECT d.k, x ORDER BY x DESC",
                &[("lo", Value::BigInt(2))]
            ),
            [r#"{"k":1,"x":3}"#, r#"{"k":3,"x":2}"#]
        );
    }

    #[test]
    fn arithmetic_and_comparison_edges() {
        let cat = catalog("", &[]);
        let one = |e: &str| run(&cat, &format!("SELECT VALUE {e}"), &[]);
        assert_eq!(one("7 / 2"), ["3.5"]);
        assert_eq!(one("7 % 2"), ["1"]);
        assert_eq!(one("1 / 0"), ["null"]);
        assert_eq!(one("9223372036854775807 + 1"), ["null"]);
        assert_eq!(one("1 = 1.0"), ["true"]);
        assert_eq!(one("\"a\" < 1"), ["null"]);
        assert_eq!(one("null AND false"), ["false"]);
        assert_eq!(one("null OR true"), ["true"]);
        assert_eq!(
            one(r#"datetime("2020-01-01T00:00:00.000Z") + duration("PT1S")"#),
            [r#"datetime("2020-01-01T00:00:01.000Z")"#]
        );
    }

    #[test]
    fn unknown_dataset_and_function() {
        let cat = catalog("", &[]);
        let src = CatalogSource {
            catalog: &cat,
            dataverse: "dv",
        };
        let words = WordList::default();
        let ctx = ExecutionContext::new(&src, &words, 0);
        assert!(execute_query(
            &parse_query("SELECT VALUE x FROM Nope x").unwrap(),
            &ctx,
            &[]
        )
        .is_err());
        assert!(execute_query(&parse_query("SELECT VALUE f(1)").unwrap(), &ctx, &[]).is_err());
    }

    #[test]
    fn recursion_is_bounded() {
        let cat = catalog("CREATE FUNCTION f(x) { f(x) };", &[]);
        let src = CatalogSource {
            catalog: &cat,
            dataverse: "dv",
        };
        let words = WordList::default();
        let ctx = ExecutionContext::new(&src, &words, 0);
        let err = execute_query(&parse_query("SELECT VALUE f(1)").unwrap(), &ctx, &[]).unwrap_err();
        assert!(err.to_string().contains("depth"), "{err}");
    }
}
