use serde::{Deserialize, Serialize};

use crate::adm::{Object, Tag, Value};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldDef {
    pub name: String,
    pub tag: Tag,
    pub optional: bool,
}

/// A declared record type. `open` types accept attributes beyond the
/// declared ones; every type in the island examples is open.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TypeDef {
    pub name: String,
    pub fields: Vec<FieldDef>,
    pub open: bool,
}

impl TypeDef {
    pub fn field(&self, name: &str) -> Option<&FieldDef> {
        self.fields.iter().find(|f| f.name == name)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetDecl {
    pub name: String,
    pub type_name: String,
    pub primary_key: Vec<String>,
    pub autogenerated: bool,
    pub active: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub enum BrokerType {
    /// Receives plain JSON.
    #[default]
    General,
    /// Receives typed ADM text.
    Bad,
}

impl BrokerType {
    pub fn as_str(self) -> &'static str {
        match self {
            BrokerType::General => "general",
            BrokerType::Bad => "BAD",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum DeliveryMode {
    #[default]
    Push,
    Pull,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelDecl {
    pub name: String,
    pub params: Vec<String>,
    /// The text inside `duration("...")`, validated when the channel is created.
    pub period: String,
    pub mode: DeliveryMode,
    pub continuous: bool,
    pub body: Query,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FunctionDecl {
    pub name: String,
    pub params: Vec<String>,
    pub body: Expr,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Statement {
    Use {
        dataverse: String,
    },
    CreateType(TypeDef),
    CreateDataset(DatasetDecl),
    CreateFeed {
        name: String,
        config: Object,
    },
    ConnectFeed {
        feed: String,
        dataset: String,
        function: Option<String>,
    },
    StartFeed {
        feed: String,
    },
    StopFeed {
        feed: String,
    },
    CreateBroker {
        name: String,
        endpoint: String,
        broker_type: BrokerType,
        options: Object,
    },
    DropBroker {
        name: String,
    },
    CreateChannel(ChannelDecl),
    Subscribe {
        channel: String,
        args: Vec<Expr>,
        broker: String,
    },
    Unsubscribe {
        subscription_id: String,
        channel: Option<String>,
    },
    CreateFunction(FunctionDecl),
    Insert {
        dataset: String,
        values: Expr,
    },
    Query(Query),
}

impl Statement {
    /// Short statement kind used in responses and logs.
    pub fn kind(&self) -> &'static str {
        match self {
            Statement::Use { .. } => "use",
            Statement::CreateType(_) => "create_type",
            Statement::CreateDataset(_) => "create_dataset",
            Statement::CreateFeed { .. } => "create_feed",
            Statement::ConnectFeed { .. } => "connect_feed",
            Statement::StartFeed { .. } => "start_feed",
            Statement::StopFeed { .. } => "stop_feed",
            Statement::CreateBroker { .. } => "create_broker",
            Statement::DropBroker { .. } => "drop_broker",
            Statement::CreateChannel(_) => "create_channel",
            Statement::Subscribe { .. } => "subscribe",
            Statement::Unsubscribe { .. } => "unsubscribe",
            Statement::CreateFunction(_) => "create_function",
            Statement::Insert { .. } => "insert",
            Statement::Query(_) => "query",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FromItem {
    /// A dataset name, or any expression yielding an array.
    pub source: Expr,
    pub alias: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UnnestItem {
    pub expr: Expr,
    pub alias: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LetBinding {
    pub name: String,
    pub expr: Expr,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectItem {
    pub expr: Expr,
    pub alias: Option<String>,
}

impl SelectItem {
    /// Output key: the alias, else the trailing identifier or field name.
    pub fn output_name(&self, position: usize) -> String {
        if let Some(a) = &self.alias {
            return a.clone();
        }
        match &self.expr {
            Expr::Ident(n) => n.clone(),
            Expr::Field(_, n) => n.clone(),
            _ => format!("${}", position + 1),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SelectClause {
    Value(Expr),
    Items(Vec<SelectItem>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrderKey {
    pub expr: Expr,
    pub descending: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Query {
    /// Source clause order, kept for printing.
    pub select_first: bool,
    pub select: SelectClause,
    pub from: Vec<FromItem>,
    pub unnest: Vec<UnnestItem>,
    pub lets: Vec<LetBinding>,
    pub where_clause: Option<Expr>,
    pub order_by: Vec<OrderKey>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Or,
    And,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    Add,
    Sub,
    Mul,
    Div,
    Mod,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Or => "OR",
            BinOp::And => "AND",
            BinOp::Eq => "=",
            BinOp::Ne => "!=",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Mod => "%",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnOp {
    Not,
    Neg,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Literal(Value),
    Ident(String),
    Field(Box<Expr>, String),
    Index(Box<Expr>, Box<Expr>),
    Call(String, Vec<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Unary(UnOp, Box<Expr>),
    Object(Vec<(String, Expr)>),
    Array(Vec<Expr>),
    Subquery(Box<Query>),
}

impl Expr {
    pub fn binary(op: BinOp, l: Expr, r: Expr) -> Expr {
        Expr::Binary(op, Box::new(l), Box::new(r))
    }

    /// Splits a chain of ANDs into its conjuncts.
    pub fn conjuncts(&self) -> Vec<&Expr> {
        let mut out = Vec::new();
        fn walk<'a>(e: &'a Expr, out: &mut Vec<&'a Expr>) {
            match e {
                Expr::Binary(BinOp::And, l, r) => {
                    walk(l, out);
                    walk(r, out);
                }
                other => out.push(other),
            }
        }
        walk(self, &mut out);
        out
    }
}
