use super::DdlError;
use crate::adm::Value;

/// Decodes a `bad-channel-parameters` string into one argument list per
/// subscription.
///
/// Subscriptions are separated by `;` and arguments by `,`. Double-quoted
/// arguments are strings; the quotes may be written backslash-escaped, as
/// they are when the value is copied out of a statement verbatim. Unquoted
/// arguments become numbers when they parse as one and bare strings
/// otherwise.
pub fn parse_channel_parameters(text: &str) -> Result<Vec<Vec<Value>>, DdlError> {
    let normalized = text.replace("\\\"", "\"");
    if normalized.trim().is_empty() {
        return Ok(Vec::new());
    }
    let err = |column: usize, message: &str| DdlError::Syntax {
        line: 1,
        column,
        message: message.to_owned(),
    };

    let mut subscriptions = Vec::new();
    let mut args = Vec::new();
    let mut current = String::new();
    let mut quoted: Option<String> = None;
    let mut in_quotes = false;
    let mut quote_column = 0;
    let mut closed_quote = false;

    let finish_arg = |current: &mut String,
                      quoted: &mut Option<String>,
                      closed_quote: &mut bool,
                      column: usize,
                      args: &mut Vec<Value>|
     -> Result<(), DdlError> {
        let value = match quoted.take() {
            Some(s) => {
                if !current.trim().is_empty() {
                    return Err(err(column, "unexpected text after a quoted argument"));
                }
                Value::String(s)
            }
            None => {
                let token = current.trim();
                if token.is_empty() {
                    return Err(err(column, "empty argument"));
                }
                number(token).unwrap_or_else(|| Value::String(token.to_owned()))
            }
        };
        current.clear();
        *closed_quote = false;
        args.push(value);
        Ok(())
    };

    for (i, c) in normalized.chars().enumerate() {
        let column = i + 1;
        if in_quotes {
            if c == '"' {
                in_quotes = false;
                closed_quote = true;
            } else if let Some(q) = quoted.as_mut() {
                q.push(c);
            }
            continue;
        }
        match c {
            '"' => {
                if closed_quote || !current.trim().is_empty() {
                    return Err(err(column, "unexpected quote inside an argument"));
                }
                in_quotes = true;
                quote_column = column;
                quoted = Some(String::new());
            }
            ',' => finish_arg(
                &mut current,
                &mut quoted,
                &mut closed_quote,
                column,
                &mut args,
            )?,
            ';' => {
                finish_arg(
                    &mut current,
                    &mut quoted,
                    &mut closed_quote,
                    column,
                    &mut args,
                )?;
                subscriptions.push(std::mem::take(&mut args));
            }
            c => current.push(c),
        }
    }
    if in_quotes {
        return Err(err(quote_column, "unbalanced quote"));
    }
    let end = normalized.chars().count() + 1;
    finish_arg(&mut current, &mut quoted, &mut closed_quote, end, &mut args)?;
    subscriptions.push(args);
    Ok(subscriptions)
}

fn number(token: &str) -> Option<Value> {
    if let Ok(i) = token.parse::<i64>() {
        return Some(Value::BigInt(i));
    }
    let looks_numeric = token
        .chars()
        .all(|c| c.is_ascii_digit() || matches!(c, '.' | 'e' | 'E' | '+' | '-'));
    token
        .parse::<f64>()
        .ok()
        .filter(|d| looks_numeric && d.is_finite())
        .map(Value::Double)
}
