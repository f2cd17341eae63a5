use super::{parse_datetime, AdmError, Duration, Object, Point, Rectangle, Value};

/// Parses ADM text: JSON extended with `datetime(..)`, `duration(..)`,
/// `point(..)`, `rectangle(..)` and `uuid(..)` constructors.
pub fn parse_adm_text(text: &str) -> Result<Value, AdmError> {
    let mut p = Parser { src: text, pos: 0 };
    p.skip_ws();
    let v = p.value(0)?;
    p.skip_ws();
    if p.pos != p.src.len() {
        return Err(p.error("trailing characters after value"));
    }
    Ok(v)
}

const MAX_DEPTH: usize = 256;

struct Parser<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn error(&self, message: impl Into<String>) -> AdmError {
        let (line, column) = line_col(self.src, self.pos);
        AdmError::Syntax {
            line,
            column,
            message: message.into(),
        }
    }

    fn peek(&self) -> Option<u8> {
        self.src.as_bytes().get(self.pos).copied()
    }

    fn skip_ws(&mut self) {
        while let Some(b) = self.peek() {
            if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn expect(&mut self, b: u8) -> Result<(), AdmError> {
        if self.peek() == Some(b) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.error(format!("expected `{}`", b as char)))
        }
    }

    fn value(&mut self, depth: usize) -> Result<Value, AdmError> {
        if depth > MAX_DEPTH {
            return Err(self.error("nesting too deep"));
        }
        match self.peek() {
            None => Err(self.error("unexpected end of input")),
            Some(b'{') => self.object(depth),
            Some(b'[') => self.array(depth),
            Some(b'"') => Ok(Value::String(self.string()?)),
            Some(b) if b == b'-' || b.is_ascii_digit() => self.number(),
            Some(b) if b.is_ascii_alphabetic() || b == b'_' => self.word(),
            Some(b) => Err(self.error(format!("unexpected character `{}`", b as char))),
        }
    }

    fn object(&mut self, depth: usize) -> Result<Value, AdmError> {
        self.expect(b'{')?;
        let mut obj = Object::new();
        self.skip_ws();
        if self.peek() == Some(b'}') {
            self.pos += 1;
            return Ok(Value::Object(obj));
        }
        loop {
            self.skip_ws();
            if self.peek() != Some(b'"') {
                return Err(self.error("expected a string key"));
            }
            let key_pos = self.pos;
            let key = self.string()?;
            self.skip_ws();
            self.expect(b':')?;
            self.skip_ws();
            let v = self.value(depth + 1)?;
            if obj.contains_key(&key) {
                self.pos = key_pos;
                return Err(self.error(format!("duplicate key `{key}`")));
            }
            obj.insert(key, v);
            self.skip_ws();
            match self.peek() {
                Some(b',') => self.pos += 1,
                Some(b'}') => {
                    self.pos += 1;
                    return Ok(Value::Object(obj));
                }
                _ => return Err(self.error("expected `,` or `}`")),
            }
        }
    }

    fn array(&mut self, depth: usize) -> Result<Value, AdmError> {
        self.expect(b'[')?;
        let mut items = Vec::new();
        self.skip_ws();
        if self.peek() == Some(b']') {
            self.pos += 1;
            return Ok(Value::Array(items));
        }
        loop {
            self.skip_ws();
            items.push(self.value(depth + 1)?);
            self.skip_ws();
            match self.peek() {
                Some(b',') => self.pos += 1,
                Some(b']') => {
                    self.pos += 1;
                    return Ok(Value::Array(items));
                }
                _ => return Err(self.error("expected `,` or `]`")),
            }
        }
    }

    fn string(&mut self) -> Result<String, AdmError> {
        self.expect(b'"')?;
        let mut out = String::new();
        loop {
            let rest = &self.src[self.pos..];
            let Some(c) = rest.chars().next() else {
                return Err(self.error("unterminated string"));
            };
            match c {
                '"' => {
                    self.pos += 1;
                    return Ok(out);
                }
                '\\' => {
                    self.pos += 1;
                    let esc = self
                        .peek()
                        .ok_or_else(|| self.error("unterminated escape"))?;
                    self.pos += 1;
                    match esc {
                        b'"' => out.push('"'),
                        b'\\' => out.push('\\'),
                        b'/' => out.push('/'),
                        b'b' => out.push('\u{8}'),
                        b'f' => out.push('\u{c}'),
                        b'n' => out.push('\n'),
                        b'r' => out.push('\r'),
                        b't' => out.push('\t'),
                        b'u' => {
                            let hi = self.hex4()?;
                            let c = if (0xD800..0xDC00).contains(&hi) {
                                if !self.src[self.pos..].starts_with("\\u") {
                                    return Err(self.error("unpaired surrogate"));
                                }
                                self.pos += 2;
                                let lo = self.hex4()?;
                                if !(0xDC00..0xE000).contains(&lo) {
                                    return Err(self.error("invalid low surrogate"));
                                }
                                char::from_u32(0x10000 + ((hi - 0xD800) << 10) + (lo - 0xDC00))
                            } else {
                                char::from_u32(hi)
                            };
                            out.push(c.ok_or_else(|| self.error("invalid unicode escape"))?);
                        }
                        _ => return Err(self.error("invalid escape")),
                    }
                }
                c if (c as u32) < 0x20 => return Err(self.error("control character in string")),
                c => {
                    out.push(c);
                    self.pos += c.len_utf8();
                }
            }
        }
    }

    fn hex4(&mut self) -> Result<u32, AdmError> {
        let digits = self
            .src
            .get(self.pos..self.pos + 4)
            .ok_or_else(|| self.error("short unicode escape"))?;
        let v = u32::from_str_radix(digits, 16).map_err(|_| self.error("bad unicode escape"))?;
        self.pos += 4;
        Ok(v)
    }

    fn number(&mut self) -> Result<Value, AdmError> {
        let start = self.pos;
        let bytes = self.src.as_bytes();
        if self.peek() == Some(b'-') {
            self.pos += 1;
        }
        let digits = |p: &mut Self| {
            let s = p.pos;
            while p.peek().is_some_and(|b| b.is_ascii_digit()) {
                p.pos += 1;
            }
            p.pos - s
        };
        let int_start = self.pos;
        if digits(self) == 0 {
            return Err(self.error("expected digits"));
        }
        if bytes[int_start] == b'0' && self.pos - int_start > 1 {
            self.pos = int_start;
            return Err(self.error("leading zeros are not allowed"));
        }
        let mut is_double = false;
        if self.peek() == Some(b'.') {
            self.pos += 1;
            is_double = true;
            if digits(self) == 0 {
                return Err(self.error("expected digits after `.`"));
            }
        }
        if matches!(self.peek(), Some(b'e' | b'E')) {
            self.pos += 1;
            is_double = true;
            if matches!(self.peek(), Some(b'+' | b'-')) {
                self.pos += 1;
            }
            if digits(self) == 0 {
                return Err(self.error("expected exponent digits"));
            }
        }
        let text = &self.src[start..self.pos];
        if is_double {
            let d: f64 = text.parse().map_err(|_| self.error("invalid number"))?;
            if !d.is_finite() {
                return Err(self.error("number out of range"));
            }
            Ok(Value::Double(d))
        } else {
            text.parse::<i64>()
                .map(Value::BigInt)
                .map_err(|_| AdmError::BigIntOverflow(text.to_owned()))
        }
    }

    fn word(&mut self) -> Result<Value, AdmError> {
        let start = self.pos;
        while self
            .peek()
            .is_some_and(|b| b.is_ascii_alphanumeric() || b == b'_')
        {
            self.pos += 1;
        }
        let word = &self.src[start..self.pos];
        match word {
            "true" => return Ok(Value::Boolean(true)),
            "false" => return Ok(Value::Boolean(false)),
            "null" => return Ok(Value::Null),
            _ => {}
        }
        if !matches!(
            word,
            "datetime" | "duration" | "point" | "rectangle" | "uuid"
        ) {
            return Err(AdmError::UnknownConstructor(word.to_owned()));
        }
        self.skip_ws();
        self.expect(b'(')?;
        self.skip_ws();
        if self.peek() != Some(b'"') {
            return Err(self.error("constructor argument must be a string"));
        }
        let arg = self.string()?;
        self.skip_ws();
        self.expect(b')')?;
        construct(word, &arg)
    }
}

/// Applies one of the five typed constructors to its string argument.
pub(crate) fn construct(name: &str, arg: &str) -> Result<Value, AdmError> {
    match name {
        "datetime" => parse_datetime(arg).map(Value::DateTime),
        "duration" => Duration::parse(arg).map(Value::Duration),
        "point" => parse_point(arg).map(Value::Point),
        "rectangle" => parse_rectangle(arg).map(Value::Rectangle),
        "uuid" => uuid::Uuid::parse_str(arg.trim())
            .map(Value::Uuid)
            .map_err(|e| AdmError::MalformedLiteral {
                kind: "uuid",
                text: arg.to_owned(),
                reason: e.to_string(),
            }),
        other => Err(AdmError::UnknownConstructor(other.to_owned())),
    }
}

fn coordinate(kind: &'static str, full: &str, part: &str) -> Result<f64, AdmError> {
    let v: f64 = part
        .trim()
        .parse()
        .map_err(|_| AdmError::MalformedLiteral {
            kind,
            text: full.to_owned(),
            reason: format!("`{}` is not a number", part.trim()),
        })?;
    if !v.is_finite() {
        return Err(AdmError::MalformedLiteral {
            kind,
            text: full.to_owned(),
            reason: "coordinates must be finite".into(),
        });
    }
    Ok(v)
}

fn point_from(kind: &'static str, full: &str, text: &str) -> Result<Point, AdmError> {
    let parts: Vec<&str> = text.split(',').collect();
    if parts.len() != 2 {
        return Err(AdmError::MalformedLiteral {
            kind,
            text: full.to_owned(),
            reason: format!("expected 2 coordinates, found {}", parts.len()),
        });
    }
    Ok(Point::new(
        coordinate(kind, full, parts[0])?,
        coordinate(kind, full, parts[1])?,
    ))
}

pub(crate) fn parse_point(text: &str) -> Result<Point, AdmError> {
    let trimmed = text.trim();
    if trimmed
        .split(',')
        .any(|p| p.trim().contains(char::is_whitespace))
    {
        return Err(AdmError::MalformedLiteral {
            kind: "point",
            text: text.to_owned(),
            reason: "expected `x,y`".into(),
        });
    }
    point_from("point", text, trimmed)
}

pub(crate) fn parse_rectangle(text: &str) -> Result<Rectangle, AdmError> {
    // whitespace after a comma belongs to the coordinate pair; any other
    // whitespace run separates the two corners
    let mut joined = String::with_capacity(text.len());
    let mut after_comma = false;
    for c in text.trim().chars() {
        if c.is_whitespace() && after_comma {
            continue;
        }
        after_comma = c == ',';
        joined.push(c);
    }
    let corners: Vec<&str> = joined.split_whitespace().collect();
    if corners.len() != 2 {
        return Err(AdmError::MalformedLiteral {
            kind: "rectangle",
            text: text.to_owned(),
            reason: format!("expected 2 corners, found {}", corners.len()),
        });
    }
    let a = point_from("rectangle", text, corners[0])?;
    let b = point_from("rectangle", text, corners[1])?;
    Ok(Rectangle::from_corners(a, b))
}

pub(crate) fn line_col(src: &str, pos: usize) -> (usize, usize) {
    let pos = pos.min(src.len());
    let before = &src[..pos];
    let line = before.matches('\n').count() + 1;
    let column = match before.rfind('\n') {
        Some(nl) => before[nl + 1..].chars().count() + 1,
        None => before.chars().count() + 1,
    };
    (line, column)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn point_constructor() {
        let v = parse_adm_text(r#"point("33.64921228736088,-117.84181977473024")"#).unwrap();
        assert_eq!(
            v,
            Value::Point(Point::new(33.64921228736088, -117.84181977473024))
        );
        let spaced = parse_adm_text(r#"point("33.66100302712824, -117.83950620703125")"#).unwrap();
        assert_eq!(
            spaced,
            Value::Point(Point::new(33.66100302712824, -117.83950620703125))
        );
    }

    #[test]
    fn epoch_datetime() {
        assert_eq!(
            parse_adm_text(r#"datetime("1970-01-01T00:00:00.000Z")"#).unwrap(),
            Value::DateTime(0)
        );
    }

    #[test]
    fn object_with_duration() {
        let v = parse_adm_text(r#"{"a":[1,2],"b":duration("PT10S")}"#).unwrap();
        let o = v.as_object().unwrap();
        assert_eq!(
            o["a"],
            Value::Array(vec![Value::BigInt(1), Value::BigInt(2)])
        );
        assert_eq!(o["b"], Value::Duration(Duration::from_millis(10_000)));
    }

    #[test]
    fn rectangle_with_spaces_is_normalized() {
        let v = parse_adm_text(
            r#"rectangle("33.64811430275051, -117.84332027249145 33.649382536086605,-117.84153928570557")"#,
        )
        .unwrap();
        let Value::Rectangle(r) = v else { panic!() };
        assert_eq!(r.low(), Point::new(33.64811430275051, -117.84332027249145));
        assert_eq!(
            r.high(),
            Point::new(33.649382536086605, -117.84153928570557)
        );

        let flipped = parse_rectangle("2,2 0,0").unwrap();
        assert_eq!(flipped.low(), Point::new(0.0, 0.0));
    }

    #[test]
    fn errors_are_positioned() {
        let err = parse_adm_text("{\n  \"a\": tru\n}").unwrap_err();
        assert_eq!(err, AdmError::UnknownConstructor("tru".into()));
        let err = parse_adm_text("{\n  \"a\" 1\n}").unwrap_err();
        assert!(
            matches!(
                err,
                AdmError::Syntax {
                    line: 2,
                    column: 7,
                    ..
                }
            ),
            "{err:?}"
        );
        assert!(matches!(
            parse_adm_text(r#"point("1,2,3")"#),
            Err(AdmError::MalformedLiteral { kind: "point", .. })
        ));
        assert!(matches!(
            parse_adm_text(r#"polygon("1,2")"#),
            Err(AdmError::UnknownConstructor(_))
        ));
        assert!(matches!(
            parse_adm_text("9223372036854775808"),
            Err(AdmError::BigIntOverflow(_))
        ));
        assert_eq!(
            parse_adm_text("-9223372036854775808").unwrap(),
            Value::BigInt(i64::MIN)
        );
        assert!(parse_adm_text(r#"{"a":1,"a":2}"#).is_err());
    }

    #[test]
    fn string_escapes() {
        let v = parse_adm_text(r#""a\"b\\c\né😀""#).unwrap();
        assert_eq!(v, Value::string("a\"b\\c\né😀"));
    }
}
