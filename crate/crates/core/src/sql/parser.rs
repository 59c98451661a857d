use super::ast::*;
use super::lexer::{lex, Tok, Token};
use super::SqlError;

const RESERVED: [&str; 32] = [
    "select",
    "from",
    "where",
    "group",
    "by",
    "having",
    "order",
    "limit",
    "union",
    "intersect",
    "except",
    "join",
    "on",
    "as",
    "and",
    "or",
    "not",
    "in",
    "like",
    "between",
    "is",
    "null",
    "distinct",
    "asc",
    "desc",
    "inner",
    "left",
    "cross",
    "outer",
    "exists",
    "all",
    "offset",
];

pub fn is_reserved(word: &str) -> bool {
    RESERVED.iter().any(|k| k.eq_ignore_ascii_case(word))
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    end: usize,
}

/// Parses a single statement into an unbound AST.
pub fn parse_query(src: &str) -> Result<Query, SqlError> {
    let toks = lex(src)?;
    let mut p = Parser { toks, pos: 0, end: src.len() };
    let q = p.query()?;
    while p.eat_sym(";") {}
    if let Some(t) = p.peek() {
        return Err(SqlError::Syntax { pos: t.pos, msg: "unexpected trailing input".into() });
    }
    Ok(q)
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.toks.get(self.pos)
    }

    fn peek_at(&self, k: usize) -> Option<&Tok> {
        self.toks.get(self.pos + k).map(|t| &t.tok)
    }

    fn here(&self) -> usize {
        self.peek().map_or(self.end, |t| t.pos)
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T, SqlError> {
        Err(SqlError::Syntax { pos: self.here(), msg: msg.into() })
    }

    fn is_kw_at(&self, k: usize, kw: &str) -> bool {
        matches!(self.peek_at(k), Some(Tok::Ident(w, false)) if w.eq_ignore_ascii_case(kw))
    }

    fn is_kw(&self, kw: &str) -> bool {
        self.is_kw_at(0, kw)
    }

    fn eat_kw(&mut self, kw: &str) -> bool {
        if self.is_kw(kw) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect_kw(&mut self, kw: &str) -> Result<(), SqlError> {
        if self.eat_kw(kw) {
            Ok(())
        } else {
            self.err(format!("expected {}", kw.to_uppercase()))
        }
    }

    fn is_sym(&self, s: &str) -> bool {
        matches!(self.peek_at(0), Some(Tok::Sym(x)) if *x == s)
    }

    fn eat_sym(&mut self, s: &str) -> bool {
        if self.is_sym(s) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect_sym(&mut self, s: &str) -> Result<(), SqlError> {
        if self.eat_sym(s) {
            Ok(())
        } else {
            self.err(format!("expected {s:?}"))
        }
    }

    fn ident(&mut self) -> Result<String, SqlError> {
        match self.peek_at(0) {
            Some(Tok::Ident(w, quoted)) if *quoted || !is_reserved(w) => {
                let w = w.clone();
                self.pos += 1;
                Ok(w)
            }
            _ => self.err("expected identifier"),
        }
    }

    fn optional_alias(&mut self) -> Result<Option<String>, SqlError> {
        if self.eat_kw("as") {
            return match self.peek_at(0) {
                Some(Tok::Str(s)) => {
                    let s = s.clone();
                    self.pos += 1;
                    Ok(Some(s))
                }
                _ => self.ident().map(Some),
            };
        }
        match self.peek_at(0) {
            Some(Tok::Ident(w, quoted)) if *quoted || !is_reserved(w) => {
                let w = w.clone();
                self.pos += 1;
                Ok(Some(w))
            }
            _ => Ok(None),
        }
    }

    fn starts_query(&self) -> bool {
        self.is_kw("select")
    }

    fn query(&mut self) -> Result<Query, SqlError> {
        let select = self.select()?;
        let op = if self.eat_kw("union") {
            Some(if self.eat_kw("all") { SetOp::UnionAll } else { SetOp::Union })
        } else if self.eat_kw("intersect") {
            Some(SetOp::Intersect)
        } else if self.eat_kw("except") {
            Some(SetOp::Except)
        } else {
            None
        };
        let set_op = match op {
            Some(op) => Some((op, Box::new(self.query()?))),
            None => None,
        };
        Ok(Query { select, set_op })
    }

    fn comma_list<T>(&mut self, mut item: impl FnMut(&mut Self) -> Result<T, SqlError>) -> Result<Vec<T>, SqlError> {
        let mut out = vec![item(self)?];
        while self.eat_sym(",") {
            out.push(item(self)?);
        }
        Ok(out)
    }

    fn select(&mut self) -> Result<Select, SqlError> {
        self.expect_kw("select")?;
        let distinct = self.eat_kw("distinct");
        if !distinct {
            self.eat_kw("all");
        }
        let items = self.comma_list(|p| {
            let expr = p.expr()?;
            let alias = p.optional_alias()?;
            Ok(SelectItem { expr, alias })
        })?;
        let from = if self.eat_kw("from") { Some(self.from()?) } else { None };
        let where_ = if self.eat_kw("where") { Some(self.expr()?) } else { None };
        let mut group_by = Vec::new();
        if self.eat_kw("group") {
            self.expect_kw("by")?;
            group_by = self.comma_list(Self::expr)?;
        }
        let having = if self.eat_kw("having") { Some(self.expr()?) } else { None };
        let mut order_by = Vec::new();
        if self.eat_kw("order") {
            self.expect_kw("by")?;
            order_by = self.comma_list(|p| {
                let expr = p.expr()?;
                let direction = if p.eat_kw("asc") {
                    Some(Direction::Asc)
                } else if p.eat_kw("desc") {
                    Some(Direction::Desc)
                } else {
                    None
                };
                Ok(OrderItem { expr, direction })
            })?;
        }
        let limit = if self.eat_kw("limit") {
            match self.peek_at(0) {
                Some(Tok::Number(n)) => {
                    let n = n.clone();
                    self.pos += 1;
                    Some(Literal::Number(n))
                }
                Some(Tok::Placeholder) => {
                    self.pos += 1;
                    Some(Literal::Masked)
                }
                _ => return self.err("expected LIMIT count"),
            }
        } else {
            None
        };
        Ok(Select { distinct, items, from, where_, group_by, having, order_by, limit })
    }

    fn table_ref(&mut self) -> Result<TableRef, SqlError> {
        let source = if self.eat_sym("(") {
            if !self.starts_query() {
                return self.err("expected subquery");
            }
            let q = self.query()?;
            self.expect_sym(")")?;
            TableSource::Subquery(Box::new(q))
        } else {
            TableSource::Named { name: self.ident()?, table: None }
        };
        let alias = self.optional_alias()?;
        Ok(TableRef { source, alias })
    }

    fn from(&mut self) -> Result<From, SqlError> {
        let first = self.table_ref()?;
        let mut joins = Vec::new();
        loop {
            let kind = if self.eat_sym(",") {
                JoinKind::Comma
            } else if self.eat_kw("join") {
                JoinKind::Inner
            } else if self.is_kw("inner") && self.is_kw_at(1, "join") {
                self.pos += 2;
                JoinKind::Inner
            } else if self.is_kw("cross") && self.is_kw_at(1, "join") {
                self.pos += 2;
                JoinKind::Cross
            } else if self.eat_kw("left") {
                self.eat_kw("outer");
                self.expect_kw("join")?;
                JoinKind::Left
            } else {
                break;
            };
            let table = self.table_ref()?;
            let on = if self.eat_kw("on") { Some(self.expr()?) } else { None };
            joins.push(Join { kind, table, on });
        }
        Ok(From { first, joins })
    }

    pub fn expr(&mut self) -> Result<Expr, SqlError> {
        self.or_expr()
    }

    fn or_expr(&mut self) -> Result<Expr, SqlError> {
        let mut left = self.and_expr()?;
        while self.eat_kw("or") {
            let right = self.and_expr()?;
            left = Expr::Binary { op: BinOp::Or, left: Box::new(left), right: Box::new(right) };
        }
        Ok(left)
    }

    fn and_expr(&mut self) -> Result<Expr, SqlError> {
        let mut left = self.not_expr()?;
        while self.eat_kw("and") {
            let right = self.not_expr()?;
            left = Expr::Binary { op: BinOp::And, left: Box::new(left), right: Box::new(right) };
        }
        Ok(left)
    }

    fn not_expr(&mut self) -> Result<Expr, SqlError> {
        if self.is_kw("not") && !self.is_kw_at(1, "exists") {
            self.pos += 1;
            return Ok(Expr::Not(Box::new(self.not_expr()?)));
        }
        self.comparison()
    }

    fn comparison(&mut self) -> Result<Expr, SqlError> {
        let left = self.additive()?;
        for (sym, op) in
            [("=", BinOp::Eq), ("!=", BinOp::NotEq), ("<=", BinOp::LtEq), (">=", BinOp::GtEq), ("<", BinOp::Lt), (">", BinOp::Gt)]
        {
            if self.eat_sym(sym) {
                let right = self.additive()?;
                return Ok(Expr::Binary { op, left: Box::new(left), right: Box::new(right) });
            }
        }
        if self.eat_kw("is") {
            let negated = self.eat_kw("not");
            self.expect_kw("null")?;
            return Ok(Expr::IsNull { expr: Box::new(left), negated });
        }
        let negated = if self.is_kw("not") && (self.is_kw_at(1, "in") || self.is_kw_at(1, "like") || self.is_kw_at(1, "between")) {
            self.pos += 1;
            true
        } else {
            false
        };
        if self.eat_kw("in") {
            self.expect_sym("(")?;
            let e = if self.starts_query() {
                Expr::InSubquery { expr: Box::new(left), negated, query: Box::new(self.query()?) }
            } else {
                Expr::InList { expr: Box::new(left), negated, list: self.comma_list(Self::expr)? }
            };
            self.expect_sym(")")?;
            return Ok(e);
        }
        if self.eat_kw("like") {
            return Ok(Expr::Like { expr: Box::new(left), negated, pattern: Box::new(self.additive()?) });
        }
        if self.eat_kw("between") {
            let low = self.additive()?;
            self.expect_kw("and")?;
            let high = self.additive()?;
            return Ok(Expr::Between { expr: Box::new(left), negated, low: Box::new(low), high: Box::new(high) });
        }
        Ok(left)
    }

    fn additive(&mut self) -> Result<Expr, SqlError> {
        let mut left = self.multiplicative()?;
        loop {
            let op = if self.eat_sym("+") {
                BinOp::Add
            } else if self.eat_sym("-") {
                BinOp::Sub
            } else {
                break;
            };
            let right = self.multiplicative()?;
            left = Expr::Binary { op, left: Box::new(left), right: Box::new(right) };
        }
        Ok(left)
    }

    fn multiplicative(&mut self) -> Result<Expr, SqlError> {
        let mut left = self.concat()?;
        loop {
            let op = if self.eat_sym("*") {
                BinOp::Mul
            } else if self.eat_sym("/") {
                BinOp::Div
            } else if self.eat_sym("%") {
                BinOp::Mod
            } else {
                break;
            };
            let right = self.concat()?;
            left = Expr::Binary { op, left: Box::new(left), right: Box::new(right) };
        }
        Ok(left)
    }

    fn concat(&mut self) -> Result<Expr, SqlError> {
        let mut left = self.unary()?;
        while self.eat_sym("||") {
            let right = self.unary()?;
            left = Expr::Binary { op: BinOp::Concat, left: Box::new(left), right: Box::new(right) };
        }
        Ok(left)
    }

    fn unary(&mut self) -> Result<Expr, SqlError> {
        if self.eat_sym("-") {
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        if self.eat_sym("+") {
            return self.unary();
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Expr, SqlError> {
        let Some(tok) = self.peek().map(|t| t.tok.clone()) else {
            return self.err("unexpected end of input");
        };
        match tok {
            Tok::Number(n) => {
                self.pos += 1;
                Ok(Expr::Literal(Literal::Number(n)))
            }
            Tok::Str(s) => {
                self.pos += 1;
                Ok(Expr::Literal(Literal::String(s)))
            }
            Tok::Placeholder => {
                self.pos += 1;
                Ok(Expr::Literal(Literal::Masked))
            }
            Tok::Sym("*") => {
                self.pos += 1;
                Ok(Expr::Star(None))
            }
            Tok::Sym("(") => {
                self.pos += 1;
                let e = if self.starts_query() { Expr::Subquery(Box::new(self.query()?)) } else { self.expr()? };
                self.expect_sym(")")?;
                Ok(e)
            }
            Tok::Ident(w, quoted) => {
                if !quoted && w.eq_ignore_ascii_case("null") {
                    self.pos += 1;
                    return Ok(Expr::Literal(Literal::Null));
                }
                if !quoted && w.eq_ignore_ascii_case("exists") {
                    self.pos += 1;
                    self.expect_sym("(")?;
                    let q = self.query()?;
                    self.expect_sym(")")?;
                    return Ok(Expr::Exists(Box::new(q)));
                }
                if !quoted && self.peek_at(1) == Some(&Tok::Sym("(")) && !is_reserved(&w) {
                    self.pos += 2;
                    return self.call(w);
                }
                let first = self.ident()?;
                if self.eat_sym(".") {
                    if self.eat_sym("*") {
                        return Ok(Expr::Star(Some(first)));
                    }
                    let name = self.ident()?;
                    return Ok(Expr::Column(ColumnRef { qualifier: Some(first), name, target: None, scope: None }));
                }
                Ok(Expr::Column(ColumnRef { qualifier: None, name: first, target: None, scope: None }))
            }
            _ => self.err("expected expression"),
        }
    }

    fn call(&mut self, name: String) -> Result<Expr, SqlError> {
        if let Some(func) = AggFunc::parse(&name) {
            let distinct = self.eat_kw("distinct");
            let arg = self.expr()?;
            self.expect_sym(")")?;
            return Ok(Expr::Agg { func, distinct, arg: Box::new(arg) });
        }
        let args = if self.is_sym(")") { Vec::new() } else { self.comma_list(Self::expr)? };
        self.expect_sym(")")?;
        Ok(Expr::Func { name: name.to_ascii_lowercase(), args })
    }
}
