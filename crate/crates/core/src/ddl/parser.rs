use super::ast::*;
use super::lexer::{tokenize, Tok, Token};
use super::DdlError;
use crate::adm::{Object, Tag, Value};

/// Words that end an expression or clause and so cannot be bare aliases or
/// identifiers. Backticks lift the restriction.
pub(crate) const RESERVED: &[&str] = &[
    "select", "from", "where", "let", "unnest", "order", "by", "and", "or", "not", "as", "asc",
    "desc", "value", "limit", "true", "false", "null",
];

pub(crate) fn is_reserved(word: &str) -> bool {
    RESERVED.iter().any(|r| r.eq_ignore_ascii_case(word))
}

/// Parses semicolon-separated statements. Keywords are case-insensitive,
/// identifiers are not.
pub fn parse_statements(text: &str) -> Result<Vec<Statement>, DdlError> {
    let mut p = Parser::new(text)?;
    let mut out = Vec::new();
    loop {
        while p.eat_punct(";") {}
        if p.at_eof() {
            return Ok(out);
        }
        out.push(p.statement()?);
        if !p.at_eof() {
            p.expect_punct(";")?;
        }
    }
}

/// Parses a standalone query (optionally terminated by `;`).
pub fn parse_query(text: &str) -> Result<Query, DdlError> {
    let mut p = Parser::new(text)?;
    let q = p.query()?;
    p.eat_punct(";");
    p.expect_eof()?;
    Ok(q)
}

/// Parses a standalone expression.
pub fn parse_expr(text: &str) -> Result<Expr, DdlError> {
    let mut p = Parser::new(text)?;
    let e = p.expr()?;
    p.expect_eof()?;
    Ok(e)
}

/// Parses a brace-delimited channel body, `{ <query> }`, without analysis.
pub(crate) fn parse_braced_query(text: &str) -> Result<Query, DdlError> {
    let mut p = Parser::new(text)?;
    p.expect_punct("{")?;
    let q = p.query()?;
    p.expect_punct("}")?;
    p.expect_eof()?;
    Ok(q)
}

pub(crate) struct Parser {
    toks: Vec<Token>,
    pos: usize,
}

impl Parser {
    pub(crate) fn new(text: &str) -> Result<Parser, DdlError> {
        Ok(Parser {
            toks: tokenize(text)?,
            pos: 0,
        })
    }

    fn tok(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, n: usize) -> &Tok {
        let i = (self.pos + n).min(self.toks.len() - 1);
        &self.toks[i].tok
    }

    fn advance(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos < self.toks.len() - 1 {
            self.pos += 1;
        }
        t
    }

    fn error(&self, message: impl Into<String>) -> DdlError {
        let t = &self.toks[self.pos];
        DdlError::Syntax {
            line: t.line,
            column: t.column,
            message: message.into(),
        }
    }

    fn describe(&self) -> String {
        match self.tok() {
            Tok::Ident(s) | Tok::Quoted(s) => format!("`{s}`"),
            Tok::Str(s) => format!("string {s:?}"),
            Tok::Number(n) => format!("number {n}"),
            Tok::Punct(p) => format!("`{p}`"),
            Tok::Eof => "end of input".into(),
        }
    }

    fn at_eof(&self) -> bool {
        matches!(self.tok(), Tok::Eof)
    }

    fn expect_eof(&self) -> Result<(), DdlError> {
        if self.at_eof() {
            Ok(())
        } else {
            Err(self.error(format!("unexpected {}", self.describe())))
        }
    }

    fn at_kw(&self, kw: &str) -> bool {
        matches!(self.tok(), Tok::Ident(s) if s.eq_ignore_ascii_case(kw))
    }

    fn eat_kw(&mut self, kw: &str) -> bool {
        if self.at_kw(kw) {
            self.advance();
            true
        } else {
            false
        }
    }

    fn expect_kw(&mut self, kw: &str) -> Result<(), DdlError> {
        if self.eat_kw(kw) {
            Ok(())
        } else {
            Err(self.error(format!("expected {kw}, found {}", self.describe())))
        }
    }

    fn at_punct(&self, p: &str) -> bool {
        matches!(self.tok(), Tok::Punct(q) if *q == p)
    }

    fn eat_punct(&mut self, p: &str) -> bool {
        if self.at_punct(p) {
            self.advance();
            true
        } else {
            false
        }
    }

    fn expect_punct(&mut self, p: &str) -> Result<(), DdlError> {
        if self.eat_punct(p) {
            Ok(())
        } else {
            Err(self.error(format!("expected `{p}`, found {}", self.describe())))
        }
    }

    fn ident(&mut self) -> Result<String, DdlError> {
        match self.tok().clone() {
            Tok::Quoted(s) => {
                self.advance();
                Ok(s)
            }
            Tok::Ident(s) if !is_reserved(&s) => {
                self.advance();
                Ok(s)
            }
            _ => Err(self.error(format!("expected identifier, found {}", self.describe()))),
        }
    }

    /// Any identifier, reserved or not (field names after `.`).
    fn any_ident(&mut self) -> Result<String, DdlError> {
        match self.tok().clone() {
            Tok::Quoted(s) | Tok::Ident(s) => {
                self.advance();
                Ok(s)
            }
            _ => Err(self.error(format!("expected identifier, found {}", self.describe()))),
        }
    }

    fn string(&mut self) -> Result<String, DdlError> {
        match self.tok().clone() {
            Tok::Str(s) => {
                self.advance();
                Ok(s)
            }
            _ => Err(self.error(format!("expected string, found {}", self.describe()))),
        }
    }

    fn at_alias(&self) -> bool {
        match self.tok() {
            Tok::Quoted(_) => true,
            Tok::Ident(s) => !is_reserved(s),
            _ => false,
        }
    }

    fn optional_alias(&mut self) -> Result<Option<String>, DdlError> {
        if self.eat_kw("as") {
            return self.ident().map(Some);
        }
        if self.at_alias() {
            return self.ident().map(Some);
        }
        Ok(None)
    }

    fn name_list(&mut self) -> Result<Vec<String>, DdlError> {
        self.expect_punct("(")?;
        let mut names = Vec::new();
        if !self.eat_punct(")") {
            loop {
                names.push(self.ident()?);
                if self.eat_punct(")") {
                    break;
                }
                self.expect_punct(",")?;
            }
        }
        Ok(names)
    }

    // ---- statements -------------------------------------------------------

    fn statement(&mut self) -> Result<Statement, DdlError> {
        if self.eat_kw("use") {
            return Ok(Statement::Use {
                dataverse: self.ident()?,
            });
        }
        if self.eat_kw("create") {
            return self.create();
        }
        if self.eat_kw("connect") {
            self.expect_kw("feed")?;
            let feed = self.ident()?;
            self.expect_kw("to")?;
            self.expect_kw("dataset")?;
            let dataset = self.ident()?;
            let function = if self.eat_kw("apply") {
                self.expect_kw("function")?;
                Some(self.ident()?)
            } else {
                None
            };
            return Ok(Statement::ConnectFeed {
                feed,
                dataset,
                function,
            });
        }
        if self.eat_kw("start") {
            self.expect_kw("feed")?;
            return Ok(Statement::StartFeed {
                feed: self.ident()?,
            });
        }
        if self.eat_kw("stop") {
            self.expect_kw("feed")?;
            return Ok(Statement::StopFeed {
                feed: self.ident()?,
            });
        }
        if self.eat_kw("drop") {
            self.expect_kw("broker")?;
            return Ok(Statement::DropBroker {
                name: self.ident()?,
            });
        }
        if self.eat_kw("subscribe") {
            self.expect_kw("to")?;
            let channel = self.ident()?;
            self.expect_punct("(")?;
            let args = self.expr_list(")")?;
            self.expect_kw("on")?;
            let broker = self.ident()?;
            return Ok(Statement::Subscribe {
                channel,
                args,
                broker,
            });
        }
        if self.eat_kw("unsubscribe") {
            let subscription_id = self.string()?;
            let channel = if self.eat_kw("from") {
                Some(self.ident()?)
            } else {
                None
            };
            return Ok(Statement::Unsubscribe {
                subscription_id,
                channel,
            });
        }
        if self.at_kw("insert") || self.at_kw("upsert") {
            self.advance();
            self.expect_kw("into")?;
            let dataset = self.ident()?;
            let values = self.expr()?;
            return Ok(Statement::Insert { dataset, values });
        }
        if self.at_kw("select") || self.at_kw("from") || self.at_kw("let") {
            return Ok(Statement::Query(self.query()?));
        }
        Err(self.error(format!("expected a statement, found {}", self.describe())))
    }

    fn create(&mut self) -> Result<Statement, DdlError> {
        if self.eat_kw("type") {
            return self.create_type();
        }
        if self.at_kw("active") || self.at_kw("dataset") {
            let active = self.eat_kw("active");
            self.expect_kw("dataset")?;
            let name = self.ident()?;
            self.expect_punct("(")?;
            let type_name = self.ident()?;
            self.expect_punct(")")?;
            self.expect_kw("primary")?;
            self.expect_kw("key")?;
            let mut primary_key = vec![self.ident()?];
            while self.eat_punct(",") {
                primary_key.push(self.ident()?);
            }
            let autogenerated = self.eat_kw("autogenerated");
            return Ok(Statement::CreateDataset(DatasetDecl {
                name,
                type_name,
                primary_key,
                autogenerated,
                active,
            }));
        }
        if self.eat_kw("feed") {
            let name = self.ident()?;
            self.expect_kw("with")?;
            let config = self.config_object()?;
            return Ok(Statement::CreateFeed { name, config });
        }
        if self.eat_kw("broker") {
            let name = self.ident()?;
            self.expect_kw("at")?;
            let endpoint = self.string()?;
            let options = if self.eat_kw("with") {
                self.config_object()?
            } else {
                Object::new()
            };
            let broker_type = match options.get("broker-type") {
                None => BrokerType::General,
                Some(Value::String(s)) if s.eq_ignore_ascii_case("bad") => BrokerType::Bad,
                Some(Value::String(s)) if s.eq_ignore_ascii_case("general") => BrokerType::General,
                Some(other) => {
                    return Err(self.error(format!("unknown broker-type {other}")));
                }
            };
            return Ok(Statement::CreateBroker {
                name,
                endpoint,
                broker_type,
                options,
            });
        }
        if self.eat_kw("function") {
            let name = self.ident()?;
            let params = self.name_list()?;
            self.expect_punct("{")?;
            let body = self.expr()?;
            self.expect_punct("}")?;
            return Ok(Statement::CreateFunction(FunctionDecl {
                name,
                params,
                body,
            }));
        }
        let mut continuous = true;
        if self.eat_kw("repetitive") {
            continuous = false;
        } else {
            self.eat_kw("continuous");
        }
        let mode = if self.eat_kw("pull") {
            DeliveryMode::Pull
        } else {
            self.eat_kw("push");
            DeliveryMode::Push
        };
        if self.eat_kw("channel") {
            let name = self.ident()?;
            let params = self.name_list()?;
            self.expect_kw("period")?;
            self.expect_kw("duration")?;
            self.expect_punct("(")?;
            let period = self.string()?;
            self.expect_punct(")")?;
            self.expect_punct("{")?;
            let body = self.query()?;
            self.expect_punct("}")?;
            return Ok(Statement::CreateChannel(ChannelDecl {
                name,
                params,
                period,
                mode,
                continuous,
                body,
            }));
        }
        Err(self.error(format!(
            "expected TYPE, DATASET, FEED, BROKER, FUNCTION or CHANNEL, found {}",
            self.describe()
        )))
    }

    fn create_type(&mut self) -> Result<Statement, DdlError> {
        let name = self.ident()?;
        self.expect_kw("as")?;
        let open = if self.eat_kw("closed") {
            false
        } else {
            self.eat_kw("open");
            true
        };
        let fields = self.type_fields()?;
        let mut seen = std::collections::HashSet::new();
        for f in &fields {
            if !seen.insert(f.name.as_str()) {
                return Err(self.error(format!("duplicate field `{}` in type {name}", f.name)));
            }
        }
        Ok(Statement::CreateType(TypeDef { name, fields, open }))
    }

    fn type_fields(&mut self) -> Result<Vec<FieldDef>, DdlError> {
        self.expect_punct("{")?;
        let mut fields = Vec::new();
        if self.eat_punct("}") {
            return Ok(fields);
        }
        loop {
            let name = match self.tok().clone() {
                Tok::Str(s) => {
                    self.advance();
                    s
                }
                _ => self.any_ident()?,
            };
            self.expect_punct(":")?;
            let tag = self.type_ref()?;
            let optional = self.eat_punct("?");
            fields.push(FieldDef {
                name,
                tag,
                optional,
            });
            if self.eat_punct("}") {
                return Ok(fields);
            }
            self.expect_punct(",")?;
        }
    }

    fn type_ref(&mut self) -> Result<Tag, DdlError> {
        if self.eat_punct("[") {
            self.type_ref()?;
            self.expect_punct("]")?;
            return Ok(Tag::Array);
        }
        if self.at_punct("{") {
            self.type_fields()?;
            return Ok(Tag::Object);
        }
        let name = self.any_ident()?;
        Tag::from_type_name(&name).ok_or_else(|| {
            self.pos -= 1;
            self.error(format!("unknown type `{name}`"))
        })
    }

    fn config_object(&mut self) -> Result<Object, DdlError> {
        match self.literal()? {
            Value::Object(o) => Ok(o),
            _ => Err(self.error("expected a { ... } option object")),
        }
    }

    /// JSON-shaped literal used in WITH clauses.
    fn literal(&mut self) -> Result<Value, DdlError> {
        if self.eat_punct("{") {
            let mut obj = Object::new();
            if self.eat_punct("}") {
                return Ok(Value::Object(obj));
            }
            loop {
                let key = match self.tok().clone() {
                    Tok::Str(s) => {
                        self.advance();
                        s
                    }
                    _ => self.any_ident()?,
                };
                self.expect_punct(":")?;
                let v = self.literal()?;
                if obj.contains_key(&key) {
                    return Err(self.error(format!("duplicate WITH key \"{key}\"")));
                }
                obj.insert(key, v);
                if self.eat_punct("}") {
                    return Ok(Value::Object(obj));
                }
                self.expect_punct(",")?;
            }
        }
        if self.eat_punct("[") {
            let mut items = Vec::new();
            if self.eat_punct("]") {
                return Ok(Value::Array(items));
            }
            loop {
                items.push(self.literal()?);
                if self.eat_punct("]") {
                    return Ok(Value::Array(items));
                }
                self.expect_punct(",")?;
            }
        }
        let negative = self.eat_punct("-");
        match self.tok().clone() {
            Tok::Number(n) => {
                let v = if negative {
                    self.number(&format!("-{n}"))?
                } else {
                    self.number(&n)?
                };
                self.advance();
                Ok(v)
            }
            _ if negative => Err(self.error("expected a number after `-`")),
            Tok::Str(s) => {
                self.advance();
                Ok(Value::String(s))
            }
            Tok::Ident(w) if w.eq_ignore_ascii_case("true") => {
                self.advance();
                Ok(Value::Boolean(true))
            }
            Tok::Ident(w) if w.eq_ignore_ascii_case("false") => {
                self.advance();
                Ok(Value::Boolean(false))
            }
            Tok::Ident(w) if w.eq_ignore_ascii_case("null") => {
                self.advance();
                Ok(Value::Null)
            }
            _ => Err(self.error(format!("expected a literal, found {}", self.describe()))),
        }
    }

    fn number(&self, text: &str) -> Result<Value, DdlError> {
        if text.contains(['.', 'e', 'E']) {
            text.parse::<f64>()
                .ok()
                .filter(|d| d.is_finite())
                .map(Value::Double)
                .ok_or_else(|| self.error(format!("invalid number {text}")))
        } else {
            text.parse::<i64>()
                .map(Value::BigInt)
                .map_err(|_| self.error(format!("integer {text} overflows bigint")))
        }
    }

    // ---- queries ----------------------------------------------------------

    pub(crate) fn query(&mut self) -> Result<Query, DdlError> {
        if self.eat_kw("select") {
            let select = self.select_clause()?;
            let from = if self.eat_kw("from") {
                self.from_list()?
            } else {
                Vec::new()
            };
            let (unnest, lets, where_clause) = self.middle_clauses()?;
            let order_by = self.order_by()?;
            return Ok(Query {
                select_first: true,
                select,
                from,
                unnest,
                lets,
                where_clause,
                order_by,
            });
        }
        let from = if self.at_kw("let") {
            Vec::new()
        } else {
            self.expect_kw("from")?;
            self.from_list()?
        };
        let (unnest, lets, where_clause) = self.middle_clauses()?;
        self.expect_kw("select")?;
        let select = self.select_clause()?;
        let order_by = self.order_by()?;
        Ok(Query {
            select_first: false,
            select,
            from,
            unnest,
            lets,
            where_clause,
            order_by,
        })
    }

    #[allow(clippy::type_complexity)]
    fn middle_clauses(
        &mut self,
    ) -> Result<(Vec<UnnestItem>, Vec<LetBinding>, Option<Expr>), DdlError> {
        let mut unnest = Vec::new();
        while self.eat_kw("unnest") {
            let expr = self.postfix()?;
            let alias = self
                .optional_alias()?
                .ok_or_else(|| self.error("UNNEST requires an alias"))?;
            unnest.push(UnnestItem { expr, alias });
        }
        let mut lets = Vec::new();
        while self.eat_kw("let") {
            loop {
                let name = self.ident()?;
                self.expect_punct("=")?;
                let expr = self.expr()?;
                lets.push(LetBinding { name, expr });
                if !self.eat_punct(",") {
                    break;
                }
            }
        }
        let where_clause = if self.eat_kw("where") {
            Some(self.expr()?)
        } else {
            None
        };
        Ok((unnest, lets, where_clause))
    }

    fn from_list(&mut self) -> Result<Vec<FromItem>, DdlError> {
        let mut items = Vec::new();
        loop {
            let source = self.postfix()?;
            let alias = match self.optional_alias()? {
                Some(a) => a,
                None => match &source {
                    Expr::Ident(n) => n.clone(),
                    _ => return Err(self.error("FROM expression requires an alias")),
                },
            };
            items.push(FromItem { source, alias });
            if !self.eat_punct(",") {
                return Ok(items);
            }
        }
    }

    fn select_clause(&mut self) -> Result<SelectClause, DdlError> {
        if self.eat_kw("value") {
            return Ok(SelectClause::Value(self.expr()?));
        }
        let mut items = Vec::new();
        loop {
            let expr = self.expr()?;
            let alias = self.optional_alias()?;
            items.push(SelectItem { expr, alias });
            if !self.eat_punct(",") {
                return Ok(SelectClause::Items(items));
            }
        }
    }

    fn order_by(&mut self) -> Result<Vec<OrderKey>, DdlError> {
        let mut keys = Vec::new();
        if !self.eat_kw("order") {
            return Ok(keys);
        }
        self.expect_kw("by")?;
        loop {
            let expr = self.expr()?;
            let descending = if self.eat_kw("desc") {
                true
            } else {
                self.eat_kw("asc");
                false
            };
            keys.push(OrderKey { expr, descending });
            if !self.eat_punct(",") {
                return Ok(keys);
            }
        }
    }

    // ---- expressions ------------------------------------------------------

    pub(crate) fn expr(&mut self) -> Result<Expr, DdlError> {
        self.or_expr()
    }

    fn expr_list(&mut self, close: &str) -> Result<Vec<Expr>, DdlError> {
        let mut items = Vec::new();
        if self.eat_punct(close) {
            return Ok(items);
        }
        loop {
            items.push(self.expr()?);
            if self.eat_punct(close) {
                return Ok(items);
            }
            self.expect_punct(",")?;
        }
    }

    fn or_expr(&mut self) -> Result<Expr, DdlError> {
        let mut e = self.and_expr()?;
        while self.eat_kw("or") {
            e = Expr::binary(BinOp::Or, e, self.and_expr()?);
        }
        Ok(e)
    }

    fn and_expr(&mut self) -> Result<Expr, DdlError> {
        let mut e = self.not_expr()?;
        while self.eat_kw("and") {
            e = Expr::binary(BinOp::And, e, self.not_expr()?);
        }
        Ok(e)
    }

    fn not_expr(&mut self) -> Result<Expr, DdlError> {
        if self.eat_kw("not") {
            return Ok(Expr::Unary(UnOp::Not, Box::new(self.not_expr()?)));
        }
        self.cmp_expr()
    }

    fn cmp_expr(&mut self) -> Result<Expr, DdlError> {
        let l = self.add_expr()?;
        let op = match self.tok() {
            Tok::Punct("=") | Tok::Punct("==") => BinOp::Eq,
            Tok::Punct("!=") | Tok::Punct("<>") => BinOp::Ne,
            Tok::Punct("<") => BinOp::Lt,
            Tok::Punct("<=") => BinOp::Le,
            Tok::Punct(">") => BinOp::Gt,
            Tok::Punct(">=") => BinOp::Ge,
            _ => return Ok(l),
        };
        self.advance();
        let r = self.add_expr()?;
        Ok(Expr::binary(op, l, r))
    }

    fn add_expr(&mut self) -> Result<Expr, DdlError> {
        let mut e = self.mul_expr()?;
        loop {
            let op = match self.tok() {
                Tok::Punct("+") => BinOp::Add,
                Tok::Punct("-") => BinOp::Sub,
                _ => return Ok(e),
            };
            self.advance();
            e = Expr::binary(op, e, self.mul_expr()?);
        }
    }

    fn mul_expr(&mut self) -> Result<Expr, DdlError> {
        let mut e = self.unary()?;
        loop {
            let op = match self.tok() {
                Tok::Punct("*") => BinOp::Mul,
                Tok::Punct("/") => BinOp::Div,
                Tok::Punct("%") => BinOp::Mod,
                _ => return Ok(e),
            };
            self.advance();
            e = Expr::binary(op, e, self.unary()?);
        }
    }

    fn unary(&mut self) -> Result<Expr, DdlError> {
        if self.eat_punct("-") {
            return Ok(Expr::Unary(UnOp::Neg, Box::new(self.unary()?)));
        }
        if self.eat_punct("+") {
            return self.unary();
        }
        self.postfix()
    }

    pub(crate) fn postfix(&mut self) -> Result<Expr, DdlError> {
        let mut e = self.primary()?;
        loop {
            if self.eat_punct(".") {
                e = Expr::Field(Box::new(e), self.any_ident()?);
            } else if self.eat_punct("[") {
                let idx = self.expr()?;
                self.expect_punct("]")?;
                e = Expr::Index(Box::new(e), Box::new(idx));
            } else {
                return Ok(e);
            }
        }
    }

    fn primary(&mut self) -> Result<Expr, DdlError> {
        match self.tok().clone() {
            Tok::Number(n) => {
                let v = self.number(&n)?;
                self.advance();
                Ok(Expr::Literal(v))
            }
            Tok::Str(s) => {
                self.advance();
                Ok(Expr::Literal(Value::String(s)))
            }
            Tok::Punct("(") => {
                self.advance();
                if self.at_kw("select") || self.at_kw("from") || self.at_kw("let") {
                    let q = self.query()?;
                    self.expect_punct(")")?;
                    return Ok(Expr::Subquery(Box::new(q)));
                }
                let e = self.expr()?;
                self.expect_punct(")")?;
                Ok(e)
            }
            Tok::Punct("{") => {
                self.advance();
                let mut fields: Vec<(String, Expr)> = Vec::new();
                if !self.eat_punct("}") {
                    loop {
                        let key = match self.tok().clone() {
                            Tok::Str(s) => {
                                self.advance();
                                s
                            }
                            _ => self.any_ident()?,
                        };
                        self.expect_punct(":")?;
                        if fields.iter().any(|(k, _)| *k == key) {
                            return Err(self.error(format!("duplicate object key \"{key}\"")));
                        }
                        fields.push((key, self.expr()?));
                        if self.eat_punct("}") {
                            break;
                        }
                        self.expect_punct(",")?;
                    }
                }
                Ok(Expr::Object(fields))
            }
            Tok::Punct("[") => {
                self.advance();
                Ok(Expr::Array(self.expr_list("]")?))
            }
            Tok::Ident(w) if w.eq_ignore_ascii_case("true") => {
                self.advance();
                Ok(Expr::Literal(Value::Boolean(true)))
            }
            Tok::Ident(w) if w.eq_ignore_ascii_case("false") => {
                self.advance();
                Ok(Expr::Literal(Value::Boolean(false)))
            }
            Tok::Ident(w) if w.eq_ignore_ascii_case("null") => {
                self.advance();
                Ok(Expr::Literal(Value::Null))
            }
            Tok::Ident(_) | Tok::Quoted(_) => {
                let name = self.ident()?;
                if matches!(self.peek_at(0), Tok::Punct("(")) {
                    self.advance();
                    let args = self.expr_list(")")?;
                    return Ok(Expr::Call(name, args));
                }
                Ok(Expr::Ident(name))
            }
            _ => Err(self.error(format!("expected an expression, found {}", self.describe()))),
        }
    }
}
