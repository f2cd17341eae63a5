use uuid::Uuid;

use crate::adm::{format_datetime, object, Value};
use crate::error::{Error, Result};

/// Top-level fields of a notification, in wire order.
pub const ENVELOPE_FIELDS: [&str; 4] = [
    "dataverseName",
    "channelName",
    "channelExecutionEpochTime",
    "results",
];

/// Fields of each entry of `results`, in wire order.
pub const RESULT_ITEM_FIELDS: [&str; 4] = [
    "result",
    "channelExecutionTime",
    "subscriptionId",
    "deliveryTime",
];

#[derive(Debug, Clone, PartialEq)]
pub struct ResultItem {
    pub result: Value,
    pub subscription_id: Uuid,
}

/// One broker's share of one channel execution.
#[derive(Debug, Clone, PartialEq)]
pub struct Envelope {
    pub dataverse: String,
    pub channel: String,
    /// Instant the execution's snapshot was taken.
    pub epoch_ms: i64,
    pub results: Vec<ResultItem>,
}

impl Envelope {
    /// The wire value, with every item stamped with `delivery_ms`.
    pub fn to_value(&self, delivery_ms: i64) -> Value {
        let results = self
            .results
            .iter()
            .map(|r| {
                Value::Object(object([
                    ("result", r.result.clone()),
                    ("channelExecutionTime", Value::DateTime(self.epoch_ms)),
                    ("subscriptionId", Value::Uuid(r.subscription_id)),
                    ("deliveryTime", Value::DateTime(delivery_ms)),
                ]))
            })
            .collect();
        Value::Object(object([
            ("dataverseName", Value::string(&self.dataverse)),
            ("channelName", Value::string(&self.channel)),
            ("channelExecutionEpochTime", Value::BigInt(self.epoch_ms)),
            ("results", Value::Array(results)),
        ]))
    }

    /// Reads a wire value back, ignoring `deliveryTime`. Accepts both the ADM
    /// form and the general-JSON form, where typed scalars arrive as strings.
    pub fn from_value(v: &Value) -> Result<Envelope> {
        let bad = |what: &str| Error::Type(format!("malformed envelope: {what}"));
        let o = v.as_object().ok_or_else(|| bad("not an object"))?;
        if o.len() != ENVELOPE_FIELDS.len() || !ENVELOPE_FIELDS.iter().all(|k| o.contains_key(*k)) {
            return Err(bad("unexpected top-level fields"));
        }
        let epoch_ms = o["channelExecutionEpochTime"]
            .as_i64()
            .ok_or_else(|| bad("channelExecutionEpochTime"))?;
        let mut results = Vec::new();
        for item in o["results"].as_array().ok_or_else(|| bad("results"))? {
            let io = item.as_object().ok_or_else(|| bad("result item"))?;
            if io.len() != RESULT_ITEM_FIELDS.len()
                || !RESULT_ITEM_FIELDS.iter().all(|k| io.contains_key(*k))
            {
                return Err(bad("unexpected result item fields"));
            }
            let subscription_id = match &io["subscriptionId"] {
                Value::Uuid(u) => *u,
                Value::String(s) => Uuid::parse_str(s).map_err(|_| bad("subscriptionId"))?,
                _ => return Err(bad("subscriptionId")),
            };
            results.push(ResultItem {
                result: io["result"].clone(),
                subscription_id,
            });
        }
        Ok(Envelope {
            dataverse: o["dataverseName"]
                .as_str()
                .ok_or_else(|| bad("dataverseName"))?
                .to_owned(),
            channel: o["channelName"]
                .as_str()
                .ok_or_else(|| bad("channelName"))?
                .to_owned(),
            epoch_ms,
            results,
        })
    }

    /// Text form of the execution time, as carried by each item.
    pub fn execution_time(&self) -> String {
        format_datetime(self.epoch_ms).unwrap_or_default()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adm::{from_json, parse_adm_text, serialize_adm, to_general_json_value};

    const FIG: &str = r#"{"dataverseName":"dhs","channelName":"ThreateningTweetsAt","channelExecutionEpochTime":1593142019521,"results":[{"result":{"text":"Saul Goodman builds SKS, and Todd Alquist fires AK47, but Skyler White sells Cabbage.","area_name":"UCI","location":point("33.64921228736088,-117.84181977473024"),"threatening_rating":2,"user_registered_weapon":["AR10","AK47","GLOCK21"]},"channelExecutionTime":datetime("2020-06-26T03:26:59.521Z"),"subscriptionId":uuid("82e61d25-f7ad-0632-3b9a-9c26e681ad84"),"deliveryTime":datetime("2020-06-26T03:26:59.522Z")}]}"#;

    #[test]
    fn rebuilds_the_sample_notification() {
        let parsed = parse_adm_text(FIG).unwrap();
        let env = Envelope::from_value(&parsed).unwrap();
        assert_eq!(env.results.len(), 1);
        assert_eq!(env.execution_time(), "2020-06-26T03:26:59.521Z");
        assert_eq!(serialize_adm(&env.to_value(1593142019522)), FIG);
    }

    #[test]
    fn general_json_form_reads_back() {
        let parsed = parse_adm_text(FIG).unwrap();
        let json = from_json(&to_general_json_value(&parsed)).unwrap();
        let a = Envelope::from_value(&parsed).unwrap();
        let b = Envelope::from_value(&json).unwrap();
        assert_eq!(a.subscription_id_list(), b.subscription_id_list());
        assert_eq!(a.epoch_ms, b.epoch_ms);
    }

    #[test]
    fn rejects_extra_fields() {
        let v = parse_adm_text(r#"{"dataverseName":"d","channelName":"c","channelExecutionEpochTime":1,"results":[],"x":1}"#)
            .unwrap();
        assert!(Envelope::from_value(&v).is_err());
    }

    impl Envelope {
        fn subscription_id_list(&self) -> Vec<Uuid> {
            self.results.iter().map(|r| r.subscription_id).collect()
        }
    }
}
