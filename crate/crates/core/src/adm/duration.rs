use std::fmt;

use super::AdmError;

const MS_PER_SECOND: i64 = 1_000;
const MS_PER_MINUTE: i64 = 60 * MS_PER_SECOND;
const MS_PER_HOUR: i64 = 60 * MS_PER_MINUTE;
const MS_PER_DAY: i64 = 24 * MS_PER_HOUR;

/// An ISO-8601 duration split into a calendar part (months) and a
/// calendar-free part (milliseconds). Days, hours, minutes and seconds all
/// fold into `millis`; years and months fold into `months`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Duration {
    months: i64,
    millis: i64,
}

impl Duration {
    pub fn from_millis(millis: i64) -> Self {
        Duration { months: 0, millis }
    }

    pub fn months(&self) -> i64 {
        self.months
    }

    pub fn millis(&self) -> i64 {
        self.millis
    }

    /// The duration as a std duration, when it is calendar-free and positive.
    pub fn to_std(&self) -> Option<std::time::Duration> {
        (self.months == 0 && self.millis > 0)
            .then(|| std::time::Duration::from_millis(self.millis as u64))
    }

    pub fn parse(text: &str) -> Result<Duration, AdmError> {
        let malformed = |reason: &str| AdmError::MalformedLiteral {
            kind: "duration",
            text: text.to_owned(),
            reason: reason.to_owned(),
        };
        let mut rest = text.trim();
        let negative = if let Some(r) = rest.strip_prefix('-') {
            rest = r;
            true
        } else {
            false
        };
        rest = rest
            .strip_prefix('P')
            .ok_or_else(|| malformed("missing `P`"))?;
        if rest.is_empty() {
            return Err(malformed("no components"));
        }

        let mut months: i64 = 0;
        let mut millis: i64 = 0;
        let mut in_time = false;
        let mut seen_any = false;
        let mut last_rank = 0u8;
        let mut chars = rest.char_indices().peekable();
        let mut number_start: Option<usize> = None;

        while let Some((i, c)) = chars.next() {
            if c == 'T' {
                if in_time || number_start.is_some() {
                    return Err(malformed("misplaced `T`"));
                }
                in_time = true;
                if chars.peek().is_none() {
                    return Err(malformed("empty time part"));
                }
                continue;
            }
            if c.is_ascii_digit() || c == '.' {
                number_start.get_or_insert(i);
                continue;
            }
            let start = number_start
                .take()
                .ok_or_else(|| malformed("designator without number"))?;
            let number = &rest[start..i];
            let rank = match (in_time, c) {
                (false, 'Y') => 1,
                (false, 'M') => 2,
                (false, 'W') => 3,
                (false, 'D') => 4,
                (true, 'H') => 5,
                (true, 'M') => 6,
                (true, 'S') => 7,
                _ => return Err(malformed(&format!("unexpected designator `{c}`"))),
            };
            if rank <= last_rank {
                return Err(malformed("components out of order"));
            }
            last_rank = rank;
            seen_any = true;

            let overflow = || malformed("component overflow");
            if rank == 7 {
                millis = millis
                    .checked_add(parse_seconds(number).ok_or_else(|| malformed("bad seconds"))?)
                    .ok_or_else(overflow)?;
                continue;
            }
            let n: i64 = number
                .parse()
                .map_err(|_| malformed("bad integer component"))?;
            match rank {
                1 => {
                    months = n
                        .checked_mul(12)
                        .and_then(|m| months.checked_add(m))
                        .ok_or_else(overflow)?
                }
                2 => months = months.checked_add(n).ok_or_else(overflow)?,
                _ => {
                    let unit = match rank {
                        3 => 7 * MS_PER_DAY,
                        4 => MS_PER_DAY,
                        5 => MS_PER_HOUR,
                        _ => MS_PER_MINUTE,
                    };
                    millis = n
                        .checked_mul(unit)
                        .and_then(|m| millis.checked_add(m))
                        .ok_or_else(overflow)?;
                }
            }
        }
        if number_start.is_some() {
            return Err(malformed("trailing number without designator"));
        }
        if !seen_any {
            return Err(malformed("no components"));
        }
        if negative {
            months = -months;
            millis = -millis;
        }
        Ok(Duration { months, millis })
    }
}

fn parse_seconds(text: &str) -> Option<i64> {
    let (whole, frac) = match text.split_once('.') {
        Some((w, f)) => (w, f),
        None => (text, ""),
    };
    if whole.is_empty() || frac.len() > 3 || !frac.chars().all(|c| c.is_ascii_digit()) {
        return None;
    }
    let whole: i64 = whole.parse().ok()?;
    let mut frac_ms = 0i64;
    for (i, c) in frac.chars().enumerate() {
        frac_ms += (c as i64 - '0' as i64) * [100, 10, 1][i];
    }
    whole.checked_mul(MS_PER_SECOND)?.checked_add(frac_ms)
}

impl fmt::Display for Duration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let negative = self.months < 0 || self.millis < 0;
        if negative {
            f.write_str("-")?;
        }
        f.write_str("P")?;
        let months = self.months.unsigned_abs();
        let mut ms = self.millis.unsigned_abs();
        if months == 0 && ms == 0 {
            return f.write_str("T0S");
        }
        if months / 12 > 0 {
            write!(f, "{}Y", months / 12)?;
        }
        if months % 12 > 0 {
            write!(f, "{}M", months % 12)?;
        }
        let days = ms / MS_PER_DAY as u64;
        ms %= MS_PER_DAY as u64;
        if days > 0 {
            write!(f, "{days}D")?;
        }
        if ms == 0 {
            return Ok(());
        }
        f.write_str("T")?;
        let hours = ms / MS_PER_HOUR as u64;
        ms %= MS_PER_HOUR as u64;
        let minutes = ms / MS_PER_MINUTE as u64;
        ms %= MS_PER_MINUTE as u64;
        if hours > 0 {
            write!(f, "{hours}H")?;
        }
        if minutes > 0 {
            write!(f, "{minutes}M")?;
        }
        if ms > 0 {
            let secs = ms / 1000;
            let frac = ms % 1000;
            if frac == 0 {
                write!(f, "{secs}S")?;
            } else {
                let digits = format!("{frac:03}");
                write!(f, "{secs}.{}S", digits.trim_end_matches('0'))?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ten_seconds() {
        let d = Duration::parse("PT10S").unwrap();
        assert_eq!(d.millis(), 10_000);
        assert_eq!(d.to_string(), "PT10S");
    }

    #[test]
    fn mixed_components() {
        let d = Duration::parse("P1Y2M3DT4H5M6.5S").unwrap();
        assert_eq!(d.months(), 14);
        assert_eq!(
            d.millis(),
            3 * MS_PER_DAY + 4 * MS_PER_HOUR + 5 * MS_PER_MINUTE + 6_500
        );
        assert_eq!(d.to_string(), "P1Y2M3DT4H5M6.5S");
    }

    #[test]
    fn canonical_form_folds_units() {
        assert_eq!(Duration::parse("PT90S").unwrap().to_string(), "PT1M30S");
        assert_eq!(Duration::parse("P1W").unwrap().to_string(), "P7D");
        assert_eq!(Duration::parse("PT0S").unwrap().to_string(), "PT0S");
        assert_eq!(Duration::parse("-PT0.25S").unwrap().to_string(), "-PT0.25S");
    }

    #[test]
    fn rejects_garbage() {
        for bad in [
            "",
            "P",
            "PT",
            "10S",
            "PT10",
            "PT1.2345S",
            "P1S",
            "PT1S2M",
            "PERIOD_DURATION",
        ] {
            assert!(Duration::parse(bad).is_err(), "{bad}");
        }
    }
}
