use std::path::PathBuf;

use archipelago::adm::Value;
use archipelago::ddl::*;

fn corpus() -> Vec<(String, String)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/corpus");
    let mut files: Vec<_> = std::fs::read_dir(&dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "bad"))
        .collect();
    files.sort();
    files
        .into_iter()
        .map(|p| {
            let name = p.file_name().unwrap().to_string_lossy().into_owned();
            (name, std::fs::read_to_string(&p).unwrap())
        })
        .collect()
}

fn load(name: &str) -> Vec<Statement> {
    let (_, text) = corpus().into_iter().find(|(n, _)| n == name).unwrap();
    parse_statements(&text).unwrap()
}

#[test]
fn every_corpus_file_round_trips() {
    let files = corpus();
    assert_eq!(files.len(), 14);
    for (name, text) in files {
        let first = parse_statements(&text).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert!(!first.is_empty(), "{name}");
        let printed = print_statements(&first);
        let second =
            parse_statements(&printed).unwrap_or_else(|e| panic!("{name}: {e}\n{printed}"));
        assert_eq!(first, second, "{name}\n{printed}");
    }
}

#[test]
fn tweet_feed_statement_kinds() {
    let stmts = load("tweet_feed.bad");
    let kinds: Vec<_> = stmts.iter().map(Statement::kind).collect();
    assert_eq!(
        kinds,
        [
            "create_type",
            "create_dataset",
            "create_feed",
            "connect_feed",
            "start_feed"
        ]
    );
    let Statement::CreateDataset(ds) = &stmts[1] else {
        panic!()
    };
    assert!(ds.active);
    assert_eq!(ds.primary_key, ["tid"]);
    let Statement::CreateFeed { config, .. } = &stmts[2] else {
        panic!()
    };
    assert_eq!(config["adapter-name"], Value::string("socket_adapter"));
    assert_eq!(config["format"], Value::string("JSON"));
    assert_eq!(config["dynamic"], Value::Boolean(false));
}

#[test]
fn select_first_channel_shape() {
    let stmts = load("threatening_tweets_at.bad");
    let Statement::CreateChannel(ch) = &stmts[1] else {
        panic!()
    };
    assert_eq!(ch.params, ["area_name"]);
    assert_eq!(ch.mode, DeliveryMode::Push);
    assert!(ch.body.select_first);
    let SelectClause::Items(items) = &ch.body.select else {
        panic!()
    };
    assert_eq!(items.len(), 5);
    let conjuncts = ch.body.where_clause.as_ref().unwrap().conjuncts().len();
    assert_eq!(conjuncts, 3);
    let info = analyze_query(&ch.body, &ch.params).unwrap();
    assert_eq!(info.is_new_datasets, ["Tweets"]);
}

#[test]
fn from_first_channel_shape() {
    let stmts = load("threatening_events_near.bad");
    let Statement::CreateChannel(ch) = &stmts[1] else {
        panic!()
    };
    let q = &ch.body;
    assert!(!q.select_first);
    assert_eq!(q.from.len(), 3);
    assert_eq!(q.unnest.len(), 1);
    assert_eq!(q.lets.len(), 4);
    let SelectClause::Items(items) = &q.select else {
        panic!()
    };
    let names: Vec<_> = items
        .iter()
        .enumerate()
        .map(|(i, s)| s.output_name(i))
        .collect();
    assert_eq!(
        names,
        [
            "oid",
            "tweet_content",
            "event_info",
            "tweet_distance_km",
            "event_distance_km"
        ]
    );
    let info = analyze_query(q, &ch.params).unwrap();
    assert_eq!(
        info.datasets,
        ["LocalThreateningTweets", "OfficerLocations", "Events"]
    );
}

#[test]
fn campus_channel_has_ordered_subquery() {
    let stmts = load("alerts_on_campus.bad");
    let Statement::CreateChannel(ch) = &stmts[1] else {
        panic!()
    };
    let Expr::Subquery(sub) = &ch.body.lets[1].expr else {
        panic!()
    };
    assert_eq!(sub.order_by.len(), 1);
    assert!(!sub.order_by[0].descending);
    // the select list names `threateningTweet`, which no clause binds
    let err = analyze_query(&ch.body, &ch.params).unwrap_err();
    assert_eq!(err.to_string(), "unbound alias `threateningTweet`");
}

#[test]
fn documented_parameter_strings() {
    let stmts = load("local_threatening_tweet_feed.bad");
    let Statement::CreateFeed { config, .. } = &stmts[1] else {
        panic!()
    };
    let params = config["bad-channel-parameters"].as_str().unwrap();
    assert_eq!(
        parse_channel_parameters(params).unwrap(),
        vec![vec![Value::string("OC")], vec![Value::string("UCI")]]
    );
    let stmts = load("bad_feed_template.bad");
    let Statement::CreateFeed { config, .. } = &stmts[0] else {
        panic!()
    };
    let params = config["bad-channel-parameters"].as_str().unwrap();
    let decoded = parse_channel_parameters(params).unwrap();
    assert_eq!(
        decoded,
        vec![
            vec![Value::string("PARAM_1-1"), Value::string("PARAM_1-2")],
            vec![Value::string("PARAM2-1"), Value::string("PARAM_2-2")],
        ]
    );
}

#[test]
fn broker_types() {
    let stmts = load("bad_broker.bad");
    assert!(matches!(
        &stmts[0],
        Statement::CreateBroker {
            broker_type: BrokerType::Bad,
            ..
        }
    ));
    let stmts = load("broker_subscriptions.bad");
    assert!(matches!(
        &stmts[0],
        Statement::CreateBroker {
            broker_type: BrokerType::General,
            ..
        }
    ));
    let Statement::Subscribe { args, .. } = &stmts[2] else {
        panic!()
    };
    assert_eq!(args, &[Expr::Literal(Value::string("1226"))]);
}
