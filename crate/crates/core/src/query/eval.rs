use std::borrow::Cow;
use std::cell::{Cell, RefCell};
use std::cmp::Ordering;
use std::collections::{HashMap, HashSet};
use std::sync::Arc;

use crate::adm::{Duration, Object, Value};
use crate::ddl::{BinOp, Expr, FunctionDecl, Query, SelectClause, UnOp};
use crate::error::{Error, Result};
use crate::storage::{Catalog, DatasetSnapshot};

use super::builtins;
use super::WordList;

const MAX_CALL_DEPTH: usize = 64;

/// Where FROM clauses find datasets and calls find user functions.
pub trait Source {
    fn snapshot(&self, dataset: &str) -> Result<DatasetSnapshot>;
    fn function(&self, name: &str) -> Option<Arc<FunctionDecl>>;
}

/// Resolves names inside one dataverse of a catalog.
pub struct CatalogSource<'a> {
    pub catalog: &'a Catalog,
    pub dataverse: &'a str,
}

impl Source for CatalogSource<'_> {
    fn snapshot(&self, dataset: &str) -> Result<DatasetSnapshot> {
        Ok(self.catalog.dataset(self.dataverse, dataset)?.snapshot())
    }

    fn function(&self, name: &str) -> Option<Arc<FunctionDecl>> {
        self.catalog.function(self.dataverse, name)
    }
}

/// Everything one evaluation needs beyond the AST.
pub struct ExecutionContext<'s> {
    source: &'s dyn Source,
    words: &'s WordList,
    now_ms: i64,
    watermarks: HashMap<String, (u64, u64)>,
    restrict: bool,
    snapshots: RefCell<HashMap<String, DatasetSnapshot>>,
    depth: Cell<usize>,
}

impl<'s> ExecutionContext<'s> {
    pub fn new(source: &'s dyn Source, words: &'s WordList, now_ms: i64) -> Self {
        ExecutionContext {
            source,
            words,
            now_ms,
            watermarks: HashMap::new(),
            restrict: true,
            snapshots: RefCell::new(HashMap::new()),
            depth: Cell::new(0),
        }
    }

    /// Sets the `(prev, cur]` window `is_new` tests against for a dataset.
    pub fn with_watermark(mut self, dataset: &str, prev: u64, cur: u64) -> Self {
        self.watermarks
            .insert(dataset.to_owned(), (prev, cur.max(prev)));
        self
    }

    /// When false, scans of `is_new` aliases cover the whole dataset and the
    /// window is only applied as a filter.
    pub fn with_range_restriction(mut self, on: bool) -> Self {
        self.restrict = on;
        self
    }

    /// Fixes the snapshot every scan of `dataset` reads.
    pub fn pin(&self, dataset: &str, snap: DatasetSnapshot) {
        self.snapshots.borrow_mut().insert(dataset.to_owned(), snap);
    }

    pub fn now_ms(&self) -> i64 {
        self.now_ms
    }

    fn snapshot(&self, dataset: &str) -> Result<DatasetSnapshot> {
        if let Some(s) = self.snapshots.borrow().get(dataset) {
            return Ok(s.clone());
        }
        let s = self.source.snapshot(dataset)?;
        self.snapshots
            .borrow_mut()
            .insert(dataset.to_owned(), s.clone());
        Ok(s)
    }

    fn window(&self, dataset: &str, snap: &DatasetSnapshot) -> (u64, u64) {
        self.watermarks
            .get(dataset)
            .copied()
            .unwrap_or((0, snap.seqno))
    }
}

/// Runs a query with `params` bound. Rows come out in nested-loop order
/// (FROM clauses left to right, datasets in seqno order) unless ORDER BY says
/// otherwise.
pub fn execute_query(
    q: &Query,
    ctx: &ExecutionContext<'_>,
    params: &[(&str, Value)],
) -> Result<Vec<Value>> {
    let env = Env::with_params(params);
    Evaluator { ctx }.query(q, &env)
}

/// Evaluates one expression. `None` is missing.
pub fn eval_expr(
    e: &Expr,
    ctx: &ExecutionContext<'_>,
    bindings: &[(&str, Value)],
) -> Result<Option<Value>> {
    let env = Env::with_params(bindings);
    Ok(Evaluator { ctx }.eval(e, &env)?.map(Cow::into_owned))
}

/// Applies a one-parameter function to a record; the result must be an
/// object.
pub fn apply_function(
    f: &FunctionDecl,
    record: Value,
    ctx: &ExecutionContext<'_>,
) -> Result<Value> {
    let [param] = f.params.as_slice() else {
        return Err(Error::eval(format!(
            "function {} must take exactly one parameter to be applied to a feed",
            f.name
        )));
    };
    match eval_expr(&f.body, ctx, &[(param, record)])? {
        Some(v @ Value::Object(_)) => Ok(v),
        Some(other) => Err(Error::Type(format!(
            "function {} returned {}, expected an object",
            f.name,
            other.tag().name()
        ))),
        None => Err(Error::Type(format!("function {} returned missing", f.name))),
    }
}

#[derive(Clone)]
struct Slot<'q> {
    name: &'q str,
    value: Option<Arc<Value>>,
    /// Dataset name and seqno when bound to a stored record.
    origin: Option<(&'q str, u64)>,
}

#[derive(Clone, Default)]
struct Env<'q> {
    slots: Vec<Slot<'q>>,
}

impl<'q> Env<'q> {
    fn with_params(params: &[(&'q str, Value)]) -> Self {
        Env {
            slots: params
                .iter()
                .map(|(n, v)| Slot {
                    name: n,
                    value: Some(Arc::new(v.clone())),
                    origin: None,
                })
                .collect(),
        }
    }

    fn lookup(&self, name: &str) -> Option<&Slot<'q>> {
        self.slots.iter().rev().find(|s| s.name == name)
    }

    fn push(&mut self, name: &'q str, value: Option<Arc<Value>>, origin: Option<(&'q str, u64)>) {
        self.slots.push(Slot {
            name,
            value,
            origin,
        });
    }

    fn pop(&mut self) {
        self.slots.pop();
    }
}

enum Binder<'q> {
    From { source: &'q Expr, alias: &'q str },
    Unnest { expr: &'q Expr, alias: &'q str },
    Let { expr: &'q Expr, name: &'q str },
}

impl<'q> Binder<'q> {
    fn name(&self) -> &'q str {
        match self {
            Binder::From { alias, .. } | Binder::Unnest { alias, .. } => alias,
            Binder::Let { name, .. } => name,
        }
    }
}

struct Plan<'q> {
    binders: Vec<Binder<'q>>,
    /// `filters[i]` runs once binders `0..i` are bound.
    filters: Vec<Vec<&'q Expr>>,
    /// FROM binders whose scan may be limited to the `is_new` window.
    restricted: HashSet<usize>,
}

struct Evaluator<'c, 's> {
    ctx: &'c ExecutionContext<'s>,
}

type Row = (Value, Vec<Option<Value>>);

fn collect_names<'q>(e: &'q Expr, out: &mut HashSet<&'q str>) {
    match e {
        Expr::Literal(_) => {}
        Expr::Ident(n) => {
            out.insert(n);
        }
        Expr::Field(b, _) => collect_names(b, out),
        Expr::Index(b, i) => {
            collect_names(b, out);
            collect_names(i, out);
        }
        Expr::Call(_, args) | Expr::Array(args) => args.iter().for_each(|a| collect_names(a, out)),
        Expr::Binary(_, l, r) => {
            collect_names(l, out);
            collect_names(r, out);
        }
        Expr::Unary(_, inner) => collect_names(inner, out),
        Expr::Object(fields) => fields.iter().for_each(|(_, v)| collect_names(v, out)),
        Expr::Subquery(q) => {
            // conservative: any name mentioned anywhere in the subquery
            for f in &q.from {
                collect_names(&f.source, out);
            }
            for u in &q.unnest {
                collect_names(&u.expr, out);
            }
            for l in &q.lets {
                collect_names(&l.expr, out);
            }
            if let Some(w) = &q.where_clause {
                collect_names(w, out);
            }
            match &q.select {
                SelectClause::Value(e) => collect_names(e, out),
                SelectClause::Items(items) => {
                    items.iter().for_each(|i| collect_names(&i.expr, out))
                }
            }
            for k in &q.order_by {
                collect_names(&k.expr, out);
            }
        }
    }
}

fn is_new_alias(e: &Expr) -> Option<&str> {
    match e {
        Expr::Call(name, args) if builtins::normalize(name) == "isnew" => match args.as_slice() {
            [Expr::Ident(a)] => Some(a),
            _ => None,
        },
        _ => None,
    }
}

fn plan(q: &Query) -> Plan<'_> {
    let mut binders = Vec::new();
    for f in &q.from {
        binders.push(Binder::From {
            source: &f.source,
            alias: &f.alias,
        });
    }
    for u in &q.unnest {
        binders.push(Binder::Unnest {
            expr: &u.expr,
            alias: &u.alias,
        });
    }
    for l in &q.lets {
        binders.push(Binder::Let {
            expr: &l.expr,
            name: &l.name,
        });
    }
    let mut filters = vec![Vec::new(); binders.len() + 1];
    let mut restricted = HashSet::new();
    if let Some(w) = &q.where_clause {
        for c in w.conjuncts() {
            let mut names = HashSet::new();
            collect_names(c, &mut names);
            let level = binders
                .iter()
                .enumerate()
                .filter(|(_, b)| names.contains(b.name()))
                .map(|(i, _)| i + 1)
                .max()
                .unwrap_or(0);
            filters[level].push(c);
            if let Some(alias) = is_new_alias(c) {
                // the alias's last binder is the one the window applies to
                if let Some(i) = binders.iter().rposition(|b| b.name() == alias) {
                    if matches!(binders[i], Binder::From { .. }) {
                        restricted.insert(i);
                    }
                }
            }
        }
    }
    Plan {
        binders,
        filters,
        restricted,
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Truth {
    True,
    False,
    Null,
    Missing,
}

fn truth(v: Option<&Value>) -> Truth {
    match v {
        None => Truth::Missing,
        Some(Value::Boolean(true)) => Truth::True,
        Some(Value::Boolean(false)) => Truth::False,
        Some(_) => Truth::Null,
    }
}

fn from_truth(t: Truth) -> Option<Value> {
    match t {
        Truth::True => Some(Value::Boolean(true)),
        Truth::False => Some(Value::Boolean(false)),
        Truth::Null => Some(Value::Null),
        Truth::Missing => None,
    }
}

impl<'c, 's> Evaluator<'c, 's> {
    fn query<'q>(&self, q: &'q Query, outer: &Env<'q>) -> Result<Vec<Value>> {
        let plan = plan(q);
        let mut env = outer.clone();
        let mut rows = Vec::new();
        self.level(q, &plan, 0, &mut env, &mut rows)?;
        if !q.order_by.is_empty() {
            rows.sort_by(|a, b| {
                for (i, key) in q.order_by.iter().enumerate() {
                    let ord = total_cmp(a.1[i].as_ref(), b.1[i].as_ref());
                    let ord = if key.descending { ord.reverse() } else { ord };
                    if ord != Ordering::Equal {
                        return ord;
                    }
                }
                Ordering::Equal
            });
        }
        Ok(rows.into_iter().map(|(v, _)| v).collect())
    }

    fn level<'q>(
        &self,
        q: &'q Query,
        plan: &Plan<'q>,
        i: usize,
        env: &mut Env<'q>,
        rows: &mut Vec<Row>,
    ) -> Result<()> {
        for c in &plan.filters[i] {
            let v = self.eval(c, env)?;
            if truth(v.as_deref()) != Truth::True {
                return Ok(());
            }
        }
        let Some(binder) = plan.binders.get(i) else {
            return self.emit(q, env, rows);
        };
        match binder {
            Binder::From { source, alias } => {
                let dataset = match source {
                    Expr::Ident(name) if env.lookup(name).is_none() => Some(name.as_str()),
                    _ => None,
                };
                if let Some(ds) = dataset {
                    let snap = self.ctx.snapshot(ds)?;
                    let (prev, cur) = self.ctx.window(ds, &snap);
                    let low = if self.ctx.restrict && plan.restricted.contains(&i) {
                        prev
                    } else {
                        0
                    };
                    for rec in snap.range(low, cur) {
                        env.push(alias, Some(rec.value.clone()), Some((ds, rec.seqno)));
                        let r = self.level(q, plan, i + 1, env, rows);
                        env.pop();
                        r?;
                    }
                } else {
                    let items = match self.eval(source, env)?.map(Cow::into_owned) {
                        None | Some(Value::Null) => Vec::new(),
                        Some(Value::Array(items)) => items,
                        Some(single) => vec![single],
                    };
                    self.each(q, plan, i, alias, items, env, rows)?;
                }
            }
            Binder::Unnest { expr, alias } => {
                let items = match self.eval(expr, env)?.map(Cow::into_owned) {
                    Some(Value::Array(items)) => items,
                    _ => Vec::new(),
                };
                self.each(q, plan, i, alias, items, env, rows)?;
            }
            Binder::Let { expr, name } => {
                let v = self.eval(expr, env)?.map(|c| Arc::new(c.into_owned()));
                env.push(name, v, None);
                let r = self.level(q, plan, i + 1, env, rows);
                env.pop();
                r?;
            }
        }
        Ok(())
    }

    #[allow(clippy::too_many_arguments)]
    fn each<'q>(
        &self,
        q: &'q Query,
        plan: &Plan<'q>,
        i: usize,
        alias: &'q str,
        items: Vec<Value>,
        env: &mut Env<'q>,
        rows: &mut Vec<Row>,
    ) -> Result<()> {
        for item in items {
            env.push(alias, Some(Arc::new(item)), None);
            let r = self.level(q, plan, i + 1, env, rows);
            env.pop();
            r?;
        }
        Ok(())
    }

    fn emit<'q>(&self, q: &'q Query, env: &Env<'q>, rows: &mut Vec<Row>) -> Result<()> {
        let (out, projected) = match &q.select {
            SelectClause::Value(e) => match self.eval(e, env)? {
                Some(v) => (v.into_owned(), Vec::new()),
                None => return Ok(()),
            },
            SelectClause::Items(items) => {
                let mut obj = Object::with_capacity(items.len());
                let mut projected = Vec::new();
                for (i, item) in items.iter().enumerate() {
                    let name = item.output_name(i);
                    let v = self.eval(&item.expr, env)?.map(Cow::into_owned);
                    if !q.order_by.is_empty() {
                        projected.push((name.clone(), v.clone()));
                    }
                    if let Some(v) = v {
                        obj.insert(name, v);
                    }
                }
                (Value::Object(obj), projected)
            }
        };
        let mut keys = Vec::with_capacity(q.order_by.len());
        if !q.order_by.is_empty() {
            // output names are visible to ORDER BY but never shadow bindings
            let mut key_env = Env {
                slots: Vec::with_capacity(projected.len() + env.slots.len()),
            };
            for (name, v) in &projected {
                key_env.push(name.as_str(), v.clone().map(Arc::new), None);
            }
            key_env.slots.extend(env.slots.iter().cloned());
            for k in &q.order_by {
                keys.push(self.eval(&k.expr, &key_env)?.map(Cow::into_owned));
            }
        }
        rows.push((out, keys));
        Ok(())
    }

    fn eval<'e, 'q: 'e>(&self, e: &'q Expr, env: &'e Env<'q>) -> Result<Option<Cow<'e, Value>>> {
        Ok(match e {
            Expr::Literal(v) => Some(Cow::Borrowed(v)),
            Expr::Ident(name) => match env.lookup(name) {
                Some(slot) => slot.value.as_deref().map(Cow::Borrowed),
                None => return Err(Error::eval(format!("unbound name `{name}`"))),
            },
            Expr::Field(base, field) => match self.eval(base, env)? {
                Some(Cow::Borrowed(v)) => v.get(field).map(Cow::Borrowed),
                Some(Cow::Owned(Value::Object(mut o))) => o.shift_remove(field).map(Cow::Owned),
                _ => None,
            },
            Expr::Index(base, idx) => {
                let idx = self.eval(idx, env)?.map(Cow::into_owned);
                let Some(base) = self.eval(base, env)? else {
                    return Ok(None);
                };
                match (base, idx) {
                    (Cow::Borrowed(Value::Array(items)), Some(Value::BigInt(i))) => {
                        usize::try_from(i)
                            .ok()
                            .and_then(|i| items.get(i))
                            .map(Cow::Borrowed)
                    }
                    (Cow::Owned(Value::Array(mut items)), Some(Value::BigInt(i))) => {
                        match usize::try_from(i) {
                            Ok(i) if i < items.len() => Some(Cow::Owned(items.swap_remove(i))),
                            _ => None,
                        }
                    }
                    (Cow::Borrowed(Value::Object(o)), Some(Value::String(k))) => {
                        o.get(&k).map(Cow::Borrowed)
                    }
                    (Cow::Owned(Value::Object(mut o)), Some(Value::String(k))) => {
                        o.shift_remove(&k).map(Cow::Owned)
                    }
                    _ => None,
                }
            }
            Expr::Call(name, args) => self.call(name, args, env)?.map(Cow::Owned),
            Expr::Binary(BinOp::And, l, r) => {
                let lt = truth(self.eval(l, env)?.as_deref());
                if lt == Truth::False {
                    return Ok(from_truth(Truth::False).map(Cow::Owned));
                }
                let rt = truth(self.eval(r, env)?.as_deref());
                let t = if rt == Truth::False {
                    Truth::False
                } else if lt == Truth::Missing || rt == Truth::Missing {
                    Truth::Missing
                } else if lt == Truth::Null || rt == Truth::Null {
                    Truth::Null
                } else {
                    Truth::True
                };
                from_truth(t).map(Cow::Owned)
            }
            Expr::Binary(BinOp::Or, l, r) => {
                let lt = truth(self.eval(l, env)?.as_deref());
                if lt == Truth::True {
                    return Ok(from_truth(Truth::True).map(Cow::Owned));
                }
                let rt = truth(self.eval(r, env)?.as_deref());
                let t = if rt == Truth::True {
                    Truth::True
                } else if lt == Truth::Missing || rt == Truth::Missing {
                    Truth::Missing
                } else if lt == Truth::Null || rt == Truth::Null {
                    Truth::Null
                } else {
                    Truth::False
                };
                from_truth(t).map(Cow::Owned)
            }
            Expr::Binary(op, l, r) => {
                let lv = self.eval(l, env)?;
                let rv = self.eval(r, env)?;
                binary(*op, lv.as_deref(), rv.as_deref()).map(Cow::Owned)
            }
            Expr::Unary(UnOp::Not, inner) => {
                let t = match truth(self.eval(inner, env)?.as_deref()) {
                    Truth::True => Truth::False,
                    Truth::False => Truth::True,
                    other => other,
                };
                from_truth(t).map(Cow::Owned)
            }
            Expr::Unary(UnOp::Neg, inner) => match self.eval(inner, env)?.as_deref() {
                None => None,
                Some(Value::BigInt(n)) => Some(Cow::Owned(
                    n.checked_neg().map_or(Value::Null, Value::BigInt),
                )),
                Some(Value::Double(d)) => Some(Cow::Owned(Value::Double(-d))),
                Some(_) => Some(Cow::Owned(Value::Null)),
            },
            Expr::Object(fields) => {
                let mut o = Object::with_capacity(fields.len());
                for (k, v) in fields {
                    if let Some(v) = self.eval(v, env)? {
                        o.insert(k.clone(), v.into_owned());
                    }
                }
                Some(Cow::Owned(Value::Object(o)))
            }
            Expr::Array(items) => {
                let mut out = Vec::with_capacity(items.len());
                for item in items {
                    out.push(self.eval(item, env)?.map_or(Value::Null, Cow::into_owned));
                }
                Some(Cow::Owned(Value::Array(out)))
            }
            Expr::Subquery(q) => Some(Cow::Owned(Value::Array(self.query(q, env)?))),
        })
    }

    fn call<'q>(&self, name: &'q str, args: &'q [Expr], env: &Env<'q>) -> Result<Option<Value>> {
        let norm = builtins::normalize(name);
        if norm == "isnew" {
            let [Expr::Ident(alias)] = args else {
                return Err(Error::eval("is_new takes exactly one alias"));
            };
            let slot = env
                .lookup(alias)
                .ok_or_else(|| Error::eval(format!("unbound name `{alias}`")))?;
            let Some((ds, seqno)) = slot.origin else {
                return Ok(Some(Value::Boolean(false)));
            };
            let snap = self.ctx.snapshot(ds)?;
            let (prev, cur) = self.ctx.window(ds, &snap);
            return Ok(Some(Value::Boolean(prev < seqno && seqno <= cur)));
        }
        let mut values = Vec::with_capacity(args.len());
        for a in args {
            values.push(self.eval(a, env)?.map(Cow::into_owned));
        }
        if let Some(r) = builtins::call(&norm, name, &values, self.ctx.words, self.ctx.now_ms) {
            return r;
        }
        let f = self
            .ctx
            .source
            .function(name)
            .ok_or_else(|| Error::eval(format!("unknown function `{name}`")))?;
        if f.params.len() != values.len() {
            return Err(Error::eval(format!(
                "function {name} takes {} arguments, got {}",
                f.params.len(),
                values.len()
            )));
        }
        let depth = self.ctx.depth.get();
        if depth >= MAX_CALL_DEPTH {
            return Err(Error::eval(format!(
                "call depth limit of {MAX_CALL_DEPTH} exceeded in {name}"
            )));
        }
        self.ctx.depth.set(depth + 1);
        let result = {
            let mut fenv = Env::default();
            for (p, v) in f.params.iter().zip(values) {
                fenv.push(p, v.map(Arc::new), None);
            }
            self.eval(&f.body, &fenv).map(|v| v.map(Cow::into_owned))
        };
        self.ctx.depth.set(depth);
        result
    }
}

fn is_numeric(v: &Value) -> bool {
    matches!(v, Value::BigInt(_) | Value::Double(_))
}

fn num_cmp(a: &Value, b: &Value) -> Option<Ordering> {
    match (a, b) {
        (Value::BigInt(x), Value::BigInt(y)) => Some(x.cmp(y)),
        _ => a.as_f64()?.partial_cmp(&b.as_f64()?),
    }
}

fn duration_cmp(a: &Duration, b: &Duration) -> Option<Ordering> {
    if a.months() == b.months() {
        Some(a.millis().cmp(&b.millis()))
    } else if a.millis() == b.millis() {
        Some(a.months().cmp(&b.months()))
    } else {
        None
    }
}

/// Ordering between two comparable scalars.
fn scalar_cmp(a: &Value, b: &Value) -> Option<Ordering> {
    match (a, b) {
        _ if is_numeric(a) && is_numeric(b) => num_cmp(a, b),
        (Value::String(x), Value::String(y)) => Some(x.cmp(y)),
        (Value::Boolean(x), Value::Boolean(y)) => Some(x.cmp(y)),
        (Value::DateTime(x), Value::DateTime(y)) => Some(x.cmp(y)),
        (Value::Uuid(x), Value::Uuid(y)) => Some(x.cmp(y)),
        (Value::Duration(x), Value::Duration(y)) => duration_cmp(x, y),
        _ => None,
    }
}

fn deep_eq(a: &Value, b: &Value) -> Option<bool> {
    if is_numeric(a) && is_numeric(b) {
        return num_cmp(a, b).map(|o| o == Ordering::Equal);
    }
    match (a, b) {
        (Value::Array(x), Value::Array(y)) => {
            if x.len() != y.len() {
                return Some(false);
            }
            for (p, q) in x.iter().zip(y) {
                if !deep_eq(p, q)? {
                    return Some(false);
                }
            }
            Some(true)
        }
        (Value::Object(x), Value::Object(y)) => {
            if x.len() != y.len() {
                return Some(false);
            }
            for (k, p) in x {
                match y.get(k) {
                    Some(q) if deep_eq(p, q)? => {}
                    _ => return Some(false),
                }
            }
            Some(true)
        }
        _ if a.tag() == b.tag() => Some(a == b),
        _ => None,
    }
}

fn binary(op: BinOp, l: Option<&Value>, r: Option<&Value>) -> Option<Value> {
    let (l, r) = (l?, r?);
    if matches!(l, Value::Null) || matches!(r, Value::Null) {
        return Some(Value::Null);
    }
    let out = match op {
        BinOp::Eq => deep_eq(l, r).map(Value::Boolean),
        BinOp::Ne => deep_eq(l, r).map(|b| Value::Boolean(!b)),
        BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => scalar_cmp(l, r).map(|o| {
            Value::Boolean(match op {
                BinOp::Lt => o == Ordering::Less,
                BinOp::Le => o != Ordering::Greater,
                BinOp::Gt => o == Ordering::Greater,
                _ => o != Ordering::Less,
            })
        }),
        BinOp::Add | BinOp::Sub | BinOp::Mul | BinOp::Div | BinOp::Mod => arith(op, l, r),
        BinOp::And | BinOp::Or => unreachable!("logical operators are evaluated lazily"),
    };
    Some(out.unwrap_or(Value::Null))
}

fn finite(d: f64) -> Option<Value> {
    d.is_finite().then_some(Value::Double(d))
}

fn arith(op: BinOp, l: &Value, r: &Value) -> Option<Value> {
    match (l, r) {
        (Value::BigInt(a), Value::BigInt(b)) => match op {
            BinOp::Add => a.checked_add(*b).map(Value::BigInt),
            BinOp::Sub => a.checked_sub(*b).map(Value::BigInt),
            BinOp::Mul => a.checked_mul(*b).map(Value::BigInt),
            BinOp::Mod => a.checked_rem(*b).map(Value::BigInt),
            _ if *b == 0 => None,
            _ => finite(*a as f64 / *b as f64),
        },
        _ if is_numeric(l) && is_numeric(r) => {
            let (a, b) = (l.as_f64()?, r.as_f64()?);
            match op {
                BinOp::Add => finite(a + b),
                BinOp::Sub => finite(a - b),
                BinOp::Mul => finite(a * b),
                _ if b == 0.0 => None,
                BinOp::Div => finite(a / b),
                _ => finite(a % b),
            }
        }
        (Value::DateTime(t), Value::Duration(d)) if d.months() == 0 => match op {
            BinOp::Add => t.checked_add(d.millis()).map(Value::DateTime),
            BinOp::Sub => t.checked_sub(d.millis()).map(Value::DateTime),
            _ => None,
        },
        (Value::DateTime(a), Value::DateTime(b)) if op == BinOp::Sub => a
            .checked_sub(*b)
            .map(|ms| Value::Duration(Duration::from_millis(ms))),
        _ => None,
    }
}

fn rank(v: Option<&Value>) -> u8 {
    match v {
        None => 0,
        Some(Value::Null) => 1,
        Some(Value::Boolean(_)) => 2,
        Some(Value::BigInt(_) | Value::Double(_)) => 3,
        Some(Value::String(_)) => 4,
        Some(Value::DateTime(_)) => 5,
        Some(Value::Duration(_)) => 6,
        Some(Value::Uuid(_)) => 7,
        Some(Value::Point(_)) => 8,
        Some(Value::Rectangle(_)) => 9,
        Some(Value::Array(_)) => 10,
        Some(Value::Object(_)) => 11,
    }
}

/// Total order used by ORDER BY: missing < null < booleans < numbers <
/// strings < datetimes < durations < uuids < points < rectangles < arrays <
/// objects.
pub fn total_cmp(a: Option<&Value>, b: Option<&Value>) -> Ordering {
    let (ra, rb) = (rank(a), rank(b));
    if ra != rb {
        return ra.cmp(&rb);
    }
    let (Some(a), Some(b)) = (a, b) else {
        return Ordering::Equal;
    };
    match (a, b) {
        (Value::BigInt(x), Value::BigInt(y)) => x.cmp(y),
        _ if is_numeric(a) => a.as_f64().unwrap().total_cmp(&b.as_f64().unwrap()),
        (Value::Duration(x), Value::Duration(y)) => {
            (x.months(), x.millis()).cmp(&(y.months(), y.millis()))
        }
        (Value::Point(p), Value::Point(q)) => p.x.total_cmp(&q.x).then(p.y.total_cmp(&q.y)),
        (Value::Rectangle(r), Value::Rectangle(s)) => {
            let (rl, rh, sl, sh) = (r.low(), r.high(), s.low(), s.high());
            rl.x.total_cmp(&sl.x)
                .then(rl.y.total_cmp(&sl.y))
                .then(rh.x.total_cmp(&sh.x))
                .then(rh.y.total_cmp(&sh.y))
        }
        (Value::Array(x), Value::Array(y)) => {
            for (p, q) in x.iter().zip(y) {
                let o = total_cmp(Some(p), Some(q));
                if o != Ordering::Equal {
                    return o;
                }
            }
            x.len().cmp(&y.len())
        }
        (Value::Object(_), Value::Object(_)) => {
            crate::adm::serialize_adm(a).cmp(&crate::adm::serialize_adm(b))
        }
        _ => scalar_cmp(a, b).unwrap_or(Ordering::Equal),
    }
}
