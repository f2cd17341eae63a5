use std::collections::BTreeMap;

use proptest::prelude::*;

use archipelago::adm::{parse_adm_text, serialize_adm, Duration, Object, Point, Rectangle, Value};
use archipelago::ddl::{parse_expr, parse_statements, print_statements};
use archipelago::island::{Island, IslandConfig};
use archipelago::scenario::TweetGenerator;

fn finite() -> impl Strategy<Value = f64> {
    prop_oneof![
        -1.0e6..1.0e6f64,
        any::<f64>().prop_filter("finite", |f| f.is_finite()),
        Just(0.0),
        Just(0.5),
    ]
}

fn leaf() -> impl Strategy<Value = Value> {
    prop_oneof![
        Just(Value::Null),
        any::<bool>().prop_map(Value::Boolean),
        any::<i64>().prop_map(Value::BigInt),
        finite().prop_map(Value::Double),
        "\\PC{0,12}".prop_map(Value::String),
        "[ -~]{0,12}".prop_map(Value::String),
        (0i64..4_102_444_800_000).prop_map(Value::DateTime),
        (0i64..1_000_000_000).prop_map(|ms| Value::Duration(Duration::from_millis(ms))),
        (finite(), finite()).prop_map(|(x, y)| Value::Point(Point::new(x, y))),
        (finite(), finite(), finite(), finite()).prop_map(|(a, b, c, d)| {
            Value::Rectangle(Rectangle::from_corners(Point::new(a, b), Point::new(c, d)))
        }),
        any::<u128>().prop_map(|n| Value::Uuid(uuid::Uuid::from_u128(n))),
    ]
}

fn value() -> impl Strategy<Value = Value> {
    leaf().prop_recursive(3, 24, 4, |inner| {
        prop_oneof![
            prop::collection::vec(inner.clone(), 0..4).prop_map(Value::Array),
            prop::collection::vec(("[a-z_][a-z0-9_]{0,6}", inner), 0..4)
                .prop_map(|pairs| Value::Object(pairs.into_iter().collect::<Object>())),
        ]
    })
}

fn expr_text() -> impl Strategy<Value = String> {
    let atom = prop_oneof![
        (0i64..1000).prop_map(|n| n.to_string()),
        (0.0..100.0f64).prop_map(|f| format!("{f:?}")),
        "[a-z]{1,3}".prop_map(|s| format!("\"{s}\"")),
        Just("t.text".to_owned()),
        Just("t.uid".to_owned()),
        Just("true".to_owned()),
        Just("null".to_owned()),
        Just("current_datetime()".to_owned()),
    ];
    atom.prop_recursive(3, 16, 3, |inner| {
        prop_oneof![
            (
                inner.clone(),
                prop::sample::select(vec!["+", "-", "*", "/", "<", ">=", "=", "!=", "AND", "OR"]),
                inner.clone()
            )
                .prop_map(|(a, op, b)| format!("({a} {op} {b})")),
            inner.clone().prop_map(|a| format!("(NOT {a})")),
            prop::collection::vec(inner.clone(), 0..3)
                .prop_map(|xs| format!("[{}]", xs.join(", "))),
            (inner.clone(), inner).prop_map(|(a, b)| format!("{{\"a\": {a}, \"b\": {b}}}")),
        ]
    })
}

proptest! {
    #[test]
    fn adm_text_round_trips(v in value()) {
        let text = serialize_adm(&v);
        let back = parse_adm_text(&text).unwrap_or_else(|e| panic!("{text}: {e}"));
        prop_assert_eq!(back, v);
    }

    #[test]
    fn adm_parser_never_panics(text in "\\PC{0,40}") {
        let _ = parse_adm_text(&text);
    }

    #[test]
    fn statement_parser_never_panics(text in "[ -~\n]{0,60}") {
        let _ = parse_statements(&text);
        let _ = parse_expr(&text);
    }

    #[test]
    fn statement_parser_never_panics_on_keyword_soup(
        words in prop::collection::vec(prop::sample::select(vec![
            "CREATE", "CHANNEL", "CONTINUOUS", "PUSH", "PERIOD", "duration(\"PT1S\")", "{", "}",
            "SELECT", "VALUE", "FROM", "WHERE", "LET", "=", "t", "Tweets", "(", ")", ";", ",",
            "is_new(t)", "BROKER", "AT", "\"x\"", "SUBSCRIBE", "TO", "ON", "FEED", "WITH",
        ]), 0..20)
    ) {
        let _ = parse_statements(&words.join(" "));
    }

    #[test]
    fn printed_channels_reparse_to_the_same_tree(e in expr_text(), w in expr_text()) {
        let script = format!(
            "USE dv; CREATE CONTINUOUS PUSH CHANNEL C(p) PERIOD duration(\"PT1S\") {{ \
             SELECT VALUE {e} FROM Tweets t WHERE {w} AND is_new(t) }};"
        );
        let first = parse_statements(&script).unwrap_or_else(|err| panic!("{script}: {err}"));
        let printed = print_statements(&first);
        let second = parse_statements(&printed).unwrap_or_else(|err| panic!("{printed}: {err}"));
        prop_assert_eq!(first, second);
    }

    #[test]
    fn tweet_generator_is_a_function_of_its_seed(seed in any::<u64>(), n in 1usize..40) {
        let words = vec!["bomb".to_owned(), "gun".to_owned()];
        let mut a = TweetGenerator::new(seed, 0.5, words.clone());
        let mut b = TweetGenerator::new(seed, 0.5, words);
        for i in 0..n {
            let (x, y) = (a.next_tweet(i as i64), b.next_tweet(i as i64));
            prop_assert_eq!(x.to_line(), y.to_line());
        }
    }
}

const SETUP: &str = r#"
USE dv;
CREATE TYPE R AS { k: bigint, a: bigint, b: string };
CREATE ACTIVE DATASET D(R) PRIMARY KEY k;
CREATE CONTINUOUS PUSH CHANNEL Over(x) PERIOD duration("PT10S") {
  SELECT VALUE d.k FROM D d WHERE d.a > x AND is_new(d) };
"#;

#[derive(Debug, Clone)]
enum Step {
    Insert(Vec<(i64, String)>),
    Execute,
}

fn steps() -> impl Strategy<Value = Vec<Step>> {
    prop::collection::vec(
        prop_oneof![
            3 => prop::collection::vec((0i64..20, "[ab]"), 1..6).prop_map(Step::Insert),
            2 => Just(Step::Execute),
        ],
        1..20,
    )
}

async fn island() -> (Island, archipelago::sink::BrokerSink) {
    let island = Island::open(IslandConfig {
        manual_channels: true,
        ..IslandConfig::named("p")
    })
    .await
    .unwrap();
    island.execute(SETUP).await.unwrap();
    let sink = archipelago::sink::BrokerSink::bind().await.unwrap();
    island
        .execute(&format!(
            "USE dv; CREATE BROKER B AT \"{}\"; SUBSCRIBE TO Over(9) ON B;",
            sink.url()
        ))
        .await
        .unwrap();
    (island, sink)
}

fn results(exec: &archipelago::channel::Execution) -> Vec<i64> {
    exec.envelopes
        .iter()
        .flat_map(|(_, env)| env.results.iter())
        .map(|item| match item.result {
            Value::BigInt(k) => k,
            ref other => panic!("unexpected result {other:?}"),
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    /// Consecutive windows tile the commit sequence, so each qualifying
    /// record is delivered by exactly one execution.
    #[test]
    fn watermarks_partition_the_stream(plan in steps()) {
        let rt = tokio::runtime::Builder::new_current_thread().enable_all().build().unwrap();
        rt.block_on(async {
            let (island, _sink) = island().await;
            let mut next_key = 0i64;
            let mut expected = BTreeMap::new();
            let mut delivered: BTreeMap<i64, usize> = BTreeMap::new();
            let mut last_cur = None;
            for step in plan.iter().chain(std::iter::once(&Step::Execute)) {
                match step {
                    Step::Insert(rows) => {
                        let body: Vec<String> = rows
                            .iter()
                            .map(|(a, b)| {
                                next_key += 1;
                                if *a > 9 {
                                    expected.insert(next_key, ());
                                }
                                format!("{{\"k\": {next_key}, \"a\": {a}, \"b\": \"{b}\"}}")
                            })
                            .collect();
                        island
                            .execute(&format!("USE dv; INSERT INTO D [{}];", body.join(", ")))
                            .await
                            .unwrap();
                    }
                    Step::Execute => {
                        let exec = island.run_channel("dv", "Over").await.unwrap();
                        let (_, prev, cur) = exec.windows[0].clone();
                        if let Some(last) = last_cur {
                            assert_eq!(prev, last, "windows must be contiguous");
                        }
                        assert!(prev <= cur);
                        last_cur = Some(cur);
                        for k in results(&exec) {
                            *delivered.entry(k).or_default() += 1;
                        }
                    }
                }
            }
            let keys: Vec<i64> = delivered.keys().copied().collect();
            assert_eq!(keys, expected.keys().copied().collect::<Vec<_>>());
            assert!(delivered.values().all(|&n| n == 1), "{delivered:?}");
        });
    }

    /// A cut taken before more inserts hides them from that execution and
    /// hands them to the next one.
    #[test]
    fn cut_defers_later_commits(before in 1usize..6, after in 1usize..6) {
        let rt = tokio::runtime::Builder::new_current_thread().enable_all().build().unwrap();
        rt.block_on(async {
            let (island, _sink) = island().await;
            let insert = |from: usize, n: usize| {
                let rows: Vec<String> = (from..from + n)
                    .map(|k| format!("{{\"k\": {k}, \"a\": 10, \"b\": \"a\"}}"))
                    .collect();
                format!("USE dv; INSERT INTO D [{}];", rows.join(", "))
            };
            island.execute(&insert(0, before)).await.unwrap();
            let ch = island.channel("dv", "Over").unwrap();
            let cut = ch.cut(island.catalog()).unwrap();
            island.execute(&insert(before, after)).await.unwrap();
            let first = ch
                .execute_until(island.catalog(), island.words(), 0, Some(&cut))
                .unwrap();
            let second = ch.execute(island.catalog(), island.words(), 0).unwrap();
            let mut a = results(&first);
            let mut b = results(&second);
            a.sort();
            b.sort();
            assert_eq!(a, (0..before as i64).collect::<Vec<_>>());
            assert_eq!(b, (before as i64..(before + after) as i64).collect::<Vec<_>>());
        });
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// The query engine against a direct filter over the same rows.
    #[test]
    fn filters_match_a_direct_scan(
        rows in prop::collection::vec((0i64..50, "[abc]"), 0..30),
        x in 0i64..50,
        tag in "[abc]",
    ) {
        let rt = tokio::runtime::Builder::new_current_thread().enable_all().build().unwrap();
        rt.block_on(async {
            let (island, _sink) = island().await;
            if !rows.is_empty() {
                let body: Vec<String> = rows
                    .iter()
                    .enumerate()
                    .map(|(k, (a, b))| format!("{{\"k\": {k}, \"a\": {a}, \"b\": \"{b}\"}}"))
                    .collect();
                island.execute(&format!("USE dv; INSERT INTO D [{}];", body.join(", "))).await.unwrap();
            }
            let got = island
                .query("dv", &format!("SELECT VALUE d.k FROM D d WHERE d.a >= {x} AND d.b = \"{tag}\";"))
                .unwrap();
            let mut got: Vec<i64> = got
                .into_iter()
                .map(|v| match v { Value::BigInt(k) => k, other => panic!("{other:?}") })
                .collect();
            got.sort();
            let want: Vec<i64> = rows
                .iter()
                .enumerate()
                .filter(|(_, (a, b))| *a >= x && *b == tag)
                .map(|(k, _)| k as i64)
                .collect();
            assert_eq!(got, want);

        });
    }

    #[test]
    fn spatial_distance_is_euclidean(ax in -180.0..180.0f64, ay in -90.0..90.0f64,
                                     bx in -180.0..180.0f64, by in -90.0..90.0f64) {
        let rt = tokio::runtime::Builder::new_current_thread().enable_all().build().unwrap();
        rt.block_on(async {
            let island = Island::open(IslandConfig::named("s")).await.unwrap();
            let got = island
                .query("dv", &format!(
                    "SELECT VALUE spatial_distance(create_point({ax:?}, {ay:?}), create_point({bx:?}, {by:?}));"
                ))
                .unwrap();
            let want = ((ax - bx).powi(2) + (ay - by).powi(2)).sqrt();
            match got.as_slice() {
                [Value::Double(d)] => assert!((d - want).abs() <= 1e-9 * want.max(1.0), "{d} vs {want}"),
                other => panic!("{other:?}"),
            }
        });
    }
}
