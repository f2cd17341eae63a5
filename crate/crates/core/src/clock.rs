//! Wall-clock time and period parsing.

use std::time::Duration;

use crate::adm;

/// Wall-clock milliseconds since the Unix epoch.
pub fn now_ms() -> i64 {
    chrono::Utc::now().timestamp_millis()
}

/// Parses a positive period written either as an ISO-8601 duration
/// (`PT10S`) or as a number with a `ms`, `s` or `m` suffix (`500ms`, `2s`).
pub fn parse_period(text: &str) -> Option<Duration> {
    let t = text.trim();
    if t.starts_with('P') {
        return adm::Duration::parse(t).ok()?.to_std();
    }
    let (num, scale) = if let Some(n) = t.strip_suffix("ms") {
        (n, 1.0)
    } else if let Some(n) = t.strip_suffix('s') {
        (n, 1000.0)
    } else if let Some(n) = t.strip_suffix('m') {
        (n, 60_000.0)
    } else {
        return None;
    };
    let ms = num.trim().parse::<f64>().ok()? * scale;
    (ms.is_finite() && ms >= 1.0).then(|| Duration::from_millis(ms.round() as u64))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn periods() {
        assert_eq!(parse_period("PT10S"), Some(Duration::from_secs(10)));
        assert_eq!(parse_period("1s"), Some(Duration::from_secs(1)));
        assert_eq!(parse_period("250ms"), Some(Duration::from_millis(250)));
        assert_eq!(parse_period("1.5s"), Some(Duration::from_millis(1500)));
        assert_eq!(parse_period("0s"), None);
        assert_eq!(parse_period("P1M"), None);
        assert_eq!(parse_period("soon"), None);
    }
}
