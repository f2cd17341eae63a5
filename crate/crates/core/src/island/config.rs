use std::path::PathBuf;
use std::time::Duration;

use serde::Deserialize;

use crate::clock::parse_period;

/// Island settings, readable from a TOML file with kebab-case keys.
#[derive(Debug, Clone, Deserialize)]
#[serde(default, rename_all = "kebab-case", deny_unknown_fields)]
pub struct IslandConfig {
    pub name: String,
    pub host: String,
    /// 0 picks a free port.
    pub port: u16,
    /// In-memory when absent.
    pub data_dir: Option<PathBuf>,
    pub threat_word_list: Option<PathBuf>,
    /// Replaces every channel's declared period, e.g. `"1s"` or `"PT2S"`.
    pub channel_period: Option<String>,
    pub retry_backoff_ms: Vec<u64>,
    pub request_timeout_ms: u64,
    pub queue_capacity: usize,
    /// Pull results stay fetchable for this many channel periods.
    pub pull_ttl_periods: u32,
    /// Channels run only through `Island::run_channel`, never on a timer.
    pub manual_channels: bool,
    /// fsync every write-ahead-log append.
    pub sync: bool,
    pub compact_min_entries: u64,
    pub reconcile_interval_ms: u64,
}

impl Default for IslandConfig {
    fn default() -> Self {
        IslandConfig {
            name: "island".into(),
            host: "127.0.0.1".into(),
            port: 0,
            data_dir: None,
            threat_word_list: None,
            channel_period: None,
            retry_backoff_ms: vec![500, 1000, 2000],
            request_timeout_ms: 5000,
            queue_capacity: 1024,
            pull_ttl_periods: 10,
            manual_channels: false,
            sync: true,
            compact_min_entries: 1024,
            reconcile_interval_ms: 2000,
        }
    }
}

impl IslandConfig {
    /// An in-memory island on a free local port.
    pub fn named(name: &str) -> Self {
        IslandConfig {
            name: name.into(),
            ..Default::default()
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    /// The period override, if one is set and valid.
    pub fn channel_period(&self) -> Option<Duration> {
        self.channel_period.as_deref().and_then(parse_period)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_overrides_defaults() {
        let c = IslandConfig::from_toml(
            "name = \"dhs\"\nport = 19002\nchannel-period = \"2s\"\nretry-backoff-ms = [10]\n",
        )
        .unwrap();
        assert_eq!(c.name, "dhs");
        assert_eq!(c.port, 19002);
        assert_eq!(c.channel_period(), Some(Duration::from_secs(2)));
        assert_eq!(c.retry_backoff_ms, [10]);
        assert_eq!(c.queue_capacity, 1024);
        assert!(IslandConfig::from_toml("nmae = 1").is_err());
    }
}
