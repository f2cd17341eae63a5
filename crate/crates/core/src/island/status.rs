//! The `/status` document.

use serde_json::{json, Map, Value as Json};

use super::Inner;
use crate::adm::to_general_json_value;

pub(super) fn status(inner: &Inner) -> Json {
    let mut dataverses = Map::new();
    for dv in inner.catalog.dataverse_names() {
        let Ok(mut doc) = inner.catalog.read(&dv, |d| {
            let datasets: Map<String, Json> = d
                .datasets
                .iter()
                .map(|(n, ds)| {
                    (
                        n.clone(),
                        json!({
                            "type": ds.decl().type_name,
                            "active": ds.is_active(),
                            "count": ds.len(),
                            "seqno": ds.snapshot_seqno(),
                        }),
                    )
                })
                .collect();
            let brokers: Map<String, Json> = d
                .brokers
                .iter()
                .map(|(n, b)| {
                    (
                        n.clone(),
                        json!({
                            "endpoint": b.endpoint,
                            "brokerType": b.broker_type.as_str(),
                        }),
                    )
                })
                .collect();
            let feeds: Vec<(String, Option<(String, Option<String>)>)> = d
                .feeds
                .iter()
                .map(|(n, f)| {
                    (
                        n.clone(),
                        f.connection
                            .as_ref()
                            .map(|c| (c.dataset.clone(), c.function.clone())),
                    )
                })
                .collect();
            json!({
                "types": d.types.keys().collect::<Vec<_>>(),
                "functions": d.functions.keys().collect::<Vec<_>>(),
                "datasets": datasets,
                "brokers": brokers,
                "feeds": feeds
                    .into_iter()
                    .map(|(n, c)| (n, json!({ "connection": c.map(|(ds, f)| json!({ "dataset": ds, "function": f })) })))
                    .collect::<Map<String, Json>>(),
                "channels": {},
            })
        }) else {
            continue;
        };
        if let Some(brokers) = doc["brokers"].as_object_mut() {
            for (n, b) in brokers.iter_mut() {
                if let Some(st) = inner.hub.stats(&dv, n) {
                    b["delivery"] = serde_json::to_value(st).unwrap();
                }
            }
        }
        if let Some(feeds) = doc["feeds"].as_object_mut() {
            for (n, f) in feeds.iter_mut() {
                let st = inner.feeds.status(&dv, n);
                f["running"] = json!(st.running);
                f["addresses"] = json!(st.addresses);
                f["binding"] = serde_json::to_value(st.binding).unwrap();
            }
        }
        let mut channels = Map::new();
        for ch in inner.channels_in(&dv) {
            let subs: Vec<Json> = ch
                .subscriptions()
                .iter()
                .map(|s| {
                    json!({
                        "id": s.id.to_string(),
                        "args": s.args.iter().map(to_general_json_value).collect::<Vec<_>>(),
                        "broker": s.broker,
                    })
                })
                .collect();
            let decl = &ch.def().decl;
            channels.insert(
                ch.name().to_owned(),
                json!({
                    "params": decl.params,
                    "periodMs": ch.def().period_ms,
                    "mode": format!("{:?}", decl.mode).to_lowercase(),
                    "executions": ch.executions(),
                    "watermarks": ch.watermarks(),
                    "subscriptions": subs,
                }),
            );
        }
        doc["channels"] = Json::Object(channels);
        dataverses.insert(dv, doc);
    }
    json!({
        "island": inner.config.name,
        "dataverses": dataverses,
    })
}
