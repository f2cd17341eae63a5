//! Feed `WITH { ... }` configuration.

use crate::adm::{Object, Value};
use crate::ddl::parse_channel_parameters;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Adapter {
    /// TCP, one record per line.
    Socket,
    /// HTTP POST, one record or an array of records per request.
    Http,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Adm,
}

/// The remote half of a bridge feed.
#[derive(Debug, Clone, PartialEq)]
pub struct BridgeConfig {
    pub host: String,
    pub channel: String,
    /// One argument list per remote subscription.
    pub parameters: Vec<Vec<Value>>,
    pub dataverse: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeedConfig {
    pub adapter: Adapter,
    /// `host:port` intake addresses; port 0 picks a free port.
    pub addresses: Vec<String>,
    pub format: Format,
    pub type_name: Option<String>,
    pub dynamic: bool,
    pub bridge: Option<BridgeConfig>,
}

const BRIDGE_KEYS: [&str; 4] = [
    "bad-host",
    "bad-channel",
    "bad-channel-parameters",
    "bad-dataverse",
];

fn text<'a>(cfg: &'a Object, key: &str) -> Result<Option<&'a str>> {
    match cfg.get(key) {
        None => Ok(None),
        Some(Value::String(s)) => Ok(Some(s)),
        Some(v) => Err(Error::catalog(format!(
            "feed option `{key}` must be a string, got {}",
            v.tag().name()
        ))),
    }
}

impl FeedConfig {
    pub fn parse(cfg: &Object) -> Result<FeedConfig> {
        let adapter = match text(cfg, "adapter-name")? {
            Some("socket_adapter") => Adapter::Socket,
            Some("http_adapter") => Adapter::Http,
            Some(other) => return Err(Error::catalog(format!("unknown feed adapter `{other}`"))),
            None => return Err(Error::catalog("feed option `adapter-name` is required")),
        };
        let addresses = match (text(cfg, "addresses")?, text(cfg, "sockets")?) {
            (Some(a), _) | (None, Some(a)) => a,
            (None, None) => return Err(Error::catalog("feed option `addresses` is required")),
        };
        let addresses: Vec<String> = addresses
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(str::to_owned)
            .collect();
        for a in &addresses {
            let port = a.rsplit_once(':').map(|(_, p)| p.parse::<u16>());
            if !matches!(port, Some(Ok(_))) {
                return Err(Error::catalog(format!(
                    "feed address `{a}` is not host:port"
                )));
            }
        }
        if addresses.is_empty() {
            return Err(Error::catalog("feed option `addresses` is empty"));
        }
        let format = match text(cfg, "format")?.map(str::to_ascii_lowercase).as_deref() {
            None | Some("json") => Format::Json,
            Some("adm") => Format::Adm,
            Some(other) => return Err(Error::catalog(format!("unknown feed format `{other}`"))),
        };
        let dynamic = match cfg.get("dynamic") {
            None => false,
            Some(Value::Boolean(b)) => *b,
            Some(Value::String(s)) if s.eq_ignore_ascii_case("true") => true,
            Some(Value::String(s)) if s.eq_ignore_ascii_case("false") => false,
            Some(_) => return Err(Error::catalog("feed option `dynamic` must be a boolean")),
        };

        let present: Vec<&str> = BRIDGE_KEYS
            .iter()
            .copied()
            .filter(|k| cfg.contains_key(*k))
            .collect();
        let bridge = match present.len() {
            0 => None,
            4 => {
                if adapter != Adapter::Http || format != Format::Adm {
                    return Err(Error::catalog(
                        "a bridge feed must use http_adapter with format ADM",
                    ));
                }
                let raw = text(cfg, "bad-channel-parameters")?.unwrap_or_default();
                Some(BridgeConfig {
                    host: text(cfg, "bad-host")?.unwrap_or_default().to_owned(),
                    channel: text(cfg, "bad-channel")?.unwrap_or_default().to_owned(),
                    parameters: parse_channel_parameters(raw)?,
                    dataverse: text(cfg, "bad-dataverse")?.unwrap_or_default().to_owned(),
                })
            }
            _ => {
                let missing: Vec<&str> = BRIDGE_KEYS
                    .iter()
                    .copied()
                    .filter(|k| !present.contains(k))
                    .collect();
                return Err(Error::catalog(format!(
                    "bridge feed options are incomplete; missing {}",
                    missing.join(", ")
                )));
            }
        };

        Ok(FeedConfig {
            adapter,
            addresses,
            format,
            type_name: text(cfg, "type-name")?.map(str::to_owned),
            dynamic,
            bridge,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ddl::{parse_statements, Statement};

    fn config(text: &str) -> Object {
        match parse_statements(text).unwrap().remove(0) {
            Statement::CreateFeed { config, .. } => config,
            other => panic!("not a feed: {other:?}"),
        }
    }

    #[test]
    fn socket_feed_with_sockets_key() {
        let c = FeedConfig::parse(&config(
            r#"CREATE FEED TweetFeed WITH { "type-name" : "TweetType",
                "adapter-name": "socket_adapter", "format" : "JSON",
                "sockets": "127.0.0.1:0", "address-type": "IP", "dynamic": false };"#,
        ))
        .unwrap();
        assert_eq!(c.adapter, Adapter::Socket);
        assert_eq!(c.addresses, ["127.0.0.1:0"]);
        assert_eq!(c.format, Format::Json);
        assert!(!c.dynamic && c.bridge.is_none());
    }

    #[test]
    fn bridge_feed() {
        let c = FeedConfig::parse(&config(
            r#"CREATE FEED F WITH { "adapter-name" : "http_adapter",
                "addresses" : "127.0.0.1:10013", "format" : "adm",
                "bad-host" : "127.0.0.1:19002", "bad-channel" : "ThreateningTweetsAt",
                "bad-channel-parameters": "\"OC\";\"UCI\"", "bad-dataverse": "dhs" };"#,
        ))
        .unwrap();
        let b = c.bridge.unwrap();
        assert_eq!(b.channel, "ThreateningTweetsAt");
        assert_eq!(
            b.parameters,
            vec![vec![Value::string("OC")], vec![Value::string("UCI")]]
        );
    }

    #[test]
    fn rejects_bad_combinations() {
        let partial = config(
            r#"CREATE FEED F WITH { "adapter-name" : "http_adapter",
                "addresses" : "h:1", "format" : "adm", "bad-host" : "x" };"#,
        );
        assert!(FeedConfig::parse(&partial)
            .unwrap_err()
            .to_string()
            .contains("bad-channel"));
        let json_bridge = config(
            r#"CREATE FEED F WITH { "adapter-name" : "http_adapter", "addresses" : "h:1",
                "format" : "JSON", "bad-host" : "x", "bad-channel" : "c",
                "bad-channel-parameters": "1", "bad-dataverse": "d" };"#,
        );
        assert!(FeedConfig::parse(&json_bridge).is_err());
        let no_port =
            config(r#"CREATE FEED F WITH { "adapter-name" : "http_adapter", "addresses" : "h" };"#);
        assert!(FeedConfig::parse(&no_port).is_err());
    }
}
