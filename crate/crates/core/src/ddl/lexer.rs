use super::DdlError;

#[derive(Debug, Clone, PartialEq)]
pub enum Tok {
    Ident(String),
    /// Backtick-quoted identifier; never treated as a keyword.
    Quoted(String),
    Str(String),
    Number(String),
    Punct(&'static str),
    Eof,
}

#[derive(Debug, Clone)]
pub struct Token {
    pub tok: Tok,
    pub line: usize,
    pub column: usize,
}

const PUNCTS: &[&str] = &[
    "<=", ">=", "!=", "<>", "==", "(", ")", "{", "}", "[", "]", ",", ";", ".", ":", "=", "<", ">",
    "+", "-", "*", "/", "%", "?",
];

pub fn tokenize(src: &str) -> Result<Vec<Token>, DdlError> {
    let mut lx = Lexer {
        src,
        pos: 0,
        line: 1,
        column: 1,
    };
    let mut out = Vec::new();
    loop {
        lx.skip_trivia()?;
        let (line, column) = (lx.line, lx.column);
        let Some(c) = lx.peek() else {
            out.push(Token {
                tok: Tok::Eof,
                line,
                column,
            });
            return Ok(out);
        };
        let tok = if c.is_ascii_alphabetic() || c == '_' {
            Tok::Ident(
                lx.eat_while(|c| c.is_ascii_alphanumeric() || c == '_')
                    .to_owned(),
            )
        } else if c.is_ascii_digit() {
            lx.number()?
        } else if c == '"' || c == '\'' {
            Tok::Str(lx.string(c)?)
        } else if c == '`' {
            lx.bump();
            let name = lx.eat_while(|c| c != '`' && c != '\n').to_owned();
            if lx.peek() != Some('`') {
                return Err(lx.error_at(line, column, "unterminated quoted identifier"));
            }
            lx.bump();
            Tok::Quoted(name)
        } else {
            let rest = &src[lx.pos..];
            match PUNCTS.iter().find(|p| rest.starts_with(**p)) {
                Some(p) => {
                    for _ in 0..p.len() {
                        lx.bump();
                    }
                    Tok::Punct(p)
                }
                None => {
                    return Err(lx.error_at(line, column, format!("unexpected character `{c}`")))
                }
            }
        };
        out.push(Token { tok, line, column });
    }
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
    line: usize,
    column: usize,
}

impl<'a> Lexer<'a> {
    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn peek2(&self) -> Option<char> {
        let mut it = self.src[self.pos..].chars();
        it.next();
        it.next()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += c.len_utf8();
        if c == '\n' {
            self.line += 1;
            self.column = 1;
        } else {
            self.column += 1;
        }
        Some(c)
    }

    fn eat_while(&mut self, f: impl Fn(char) -> bool) -> &'a str {
        let start = self.pos;
        while self.peek().is_some_and(&f) {
            self.bump();
        }
        &self.src[start..self.pos]
    }

    fn error_at(&self, line: usize, column: usize, message: impl Into<String>) -> DdlError {
        DdlError::Syntax {
            line,
            column,
            message: message.into(),
        }
    }

    fn skip_trivia(&mut self) -> Result<(), DdlError> {
        loop {
            match (self.peek(), self.peek2()) {
                (Some(c), _) if c.is_whitespace() => {
                    self.bump();
                }
                (Some('/'), Some('/')) => {
                    self.eat_while(|c| c != '\n');
                }
                (Some('/'), Some('*')) => {
                    let (line, column) = (self.line, self.column);
                    self.bump();
                    self.bump();
                    loop {
                        match (self.peek(), self.peek2()) {
                            (Some('*'), Some('/')) => {
                                self.bump();
                                self.bump();
                                break;
                            }
                            (Some(_), _) => {
                                self.bump();
                            }
                            (None, _) => {
                                return Err(self.error_at(line, column, "unterminated comment"))
                            }
                        }
                    }
                }
                _ => return Ok(()),
            }
        }
    }

    fn number(&mut self) -> Result<Tok, DdlError> {
        let start = self.pos;
        self.eat_while(|c| c.is_ascii_digit());
        if self.peek() == Some('.') && self.peek2().is_some_and(|c| c.is_ascii_digit()) {
            self.bump();
            self.eat_while(|c| c.is_ascii_digit());
        }
        if matches!(self.peek(), Some('e' | 'E')) {
            let (line, column) = (self.line, self.column);
            self.bump();
            if matches!(self.peek(), Some('+' | '-')) {
                self.bump();
            }
            if self.eat_while(|c| c.is_ascii_digit()).is_empty() {
                return Err(self.error_at(line, column, "malformed exponent"));
            }
        }
        Ok(Tok::Number(self.src[start..self.pos].to_owned()))
    }

    fn string(&mut self, quote: char) -> Result<String, DdlError> {
        let (line, column) = (self.line, self.column);
        self.bump();
        let mut out = String::new();
        loop {
            let Some(c) = self.bump() else {
                return Err(self.error_at(line, column, "unterminated string"));
            };
            if c == quote {
                return Ok(out);
            }
            if c != '\\' {
                out.push(c);
                continue;
            }
            let (el, ec) = (self.line, self.column);
            let e = self
                .bump()
                .ok_or_else(|| self.error_at(line, column, "unterminated string"))?;
            match e {
                '"' => out.push('"'),
                '\'' => out.push('\''),
                '\\' => out.push('\\'),
                '/' => out.push('/'),
                'b' => out.push('\u{8}'),
                'f' => out.push('\u{c}'),
                'n' => out.push('\n'),
                'r' => out.push('\r'),
                't' => out.push('\t'),
                'u' => {
                    let mut code = 0u32;
                    for _ in 0..4 {
                        let d = self
                            .bump()
                            .and_then(|c| c.to_digit(16))
                            .ok_or_else(|| self.error_at(el, ec, "bad unicode escape"))?;
                        code = code * 16 + d;
                    }
                    out.push(
                        char::from_u32(code)
                            .ok_or_else(|| self.error_at(el, ec, "bad unicode escape"))?,
                    );
                }
                other => return Err(self.error_at(el, ec, format!("invalid escape `\\{other}`"))),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds(src: &str) -> Vec<Tok> {
        tokenize(src).unwrap().into_iter().map(|t| t.tok).collect()
    }

    #[test]
    fn comments_and_punctuation() {
        let toks = kinds("// hello\nSELECT a.b <= 1.5e3 /* x */ ;");
        assert_eq!(
            toks,
            vec![
                Tok::Ident("SELECT".into()),
                Tok::Ident("a".into()),
                Tok::Punct("."),
                Tok::Ident("b".into()),
                Tok::Punct("<="),
                Tok::Number("1.5e3".into()),
                Tok::Punct(";"),
                Tok::Eof
            ]
        );
    }

    #[test]
    fn escaped_string() {
        let toks = kinds(r#""\"OC\";\"UCI\"""#);
        assert_eq!(toks[0], Tok::Str(r#""OC";"UCI""#.into()));
    }

    #[test]
    fn positions() {
        let toks = tokenize("USE x;\n  FROM").unwrap();
        assert_eq!((toks[3].line, toks[3].column), (2, 3));
        let err = tokenize("a\n #").unwrap_err();
        assert!(matches!(
            err,
            DdlError::Syntax {
                line: 2,
                column: 2,
                ..
            }
        ));
    }
}
