use std::fmt::{self, Display, Formatter, Write};

use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum SetOp {
    Union,
    UnionAll,
    Intersect,
    Except,
}

impl SetOp {
    pub fn keyword(self) -> &'static str {
        match self {
            SetOp::Union => "UNION",
            SetOp::UnionAll => "UNION ALL",
            SetOp::Intersect => "INTERSECT",
            SetOp::Except => "EXCEPT",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Query {
    pub select: Select,
    pub set_op: Option<(SetOp, Box<Query>)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Select {
    pub distinct: bool,
    pub items: Vec<SelectItem>,
    pub from: Option<From>,
    pub where_: Option<Expr>,
    pub group_by: Vec<Expr>,
    pub having: Option<Expr>,
    pub order_by: Vec<OrderItem>,
    pub limit: Option<Literal>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectItem {
    pub expr: Expr,
    pub alias: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Direction {
    Asc,
    Desc,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrderItem {
    pub expr: Expr,
    pub direction: Option<Direction>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct From {
    pub first: TableRef,
    pub joins: Vec<Join>,
}

impl From {
    pub fn tables(&self) -> impl Iterator<Item = &TableRef> {
        std::iter::once(&self.first).chain(self.joins.iter().map(|j| &j.table))
    }

    pub fn conditions(&self) -> impl Iterator<Item = &Expr> {
        self.joins.iter().filter_map(|j| j.on.as_ref())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JoinKind {
    Inner,
    Left,
    Cross,
    Comma,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Join {
    pub kind: JoinKind,
    pub table: TableRef,
    pub on: Option<Expr>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TableSource {
    /// `table` is the bound schema index.
    Named {
        name: String,
        table: Option<usize>,
    },
    Subquery(Box<Query>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TableRef {
    pub source: TableSource,
    pub alias: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Literal {
    Number(String),
    String(String),
    Null,
    Masked,
}

impl Literal {
    /// Text used when a literal is listed as a value hint.
    pub fn value_text(&self) -> Option<&str> {
        match self {
            Literal::Number(s) | Literal::String(s) => Some(s),
            Literal::Null | Literal::Masked => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AggFunc {
    Count,
    Sum,
    Avg,
    Min,
    Max,
}

impl AggFunc {
    pub fn parse(s: &str) -> Option<Self> {
        Some(match s.to_ascii_lowercase().as_str() {
            "count" => AggFunc::Count,
            "sum" => AggFunc::Sum,
            "avg" => AggFunc::Avg,
            "min" => AggFunc::Min,
            "max" => AggFunc::Max,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            AggFunc::Count => "count",
            AggFunc::Sum => "sum",
            AggFunc::Avg => "avg",
            AggFunc::Min => "min",
            AggFunc::Max => "max",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinOp {
    Or,
    And,
    Eq,
    NotEq,
    Lt,
    Gt,
    LtEq,
    GtEq,
    Add,
    Sub,
    Mul,
    Div,
    Mod,
    Concat,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Or => "OR",
            BinOp::And => "AND",
            BinOp::Eq => "=",
            BinOp::NotEq => "!=",
            BinOp::Lt => "<",
            BinOp::Gt => ">",
            BinOp::LtEq => "<=",
            BinOp::GtEq => ">=",
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Mod => "%",
            BinOp::Concat => "||",
        }
    }

    pub fn precedence(self) -> u8 {
        match self {
            BinOp::Or => 1,
            BinOp::And => 2,
            BinOp::Eq | BinOp::NotEq | BinOp::Lt | BinOp::Gt | BinOp::LtEq | BinOp::GtEq => 4,
            BinOp::Add | BinOp::Sub => 5,
            BinOp::Mul | BinOp::Div | BinOp::Mod => 6,
            BinOp::Concat => 7,
        }
    }

    pub fn is_comparison(self) -> bool {
        self.precedence() == 4
    }
}

/// Resolution of a column reference.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum ColumnTarget {
    Schema {
        table: usize,
        column: usize,
    },
    /// Output column of a FROM subquery, keyed by the subquery's position in its FROM list.
    Derived {
        source: usize,
        column: String,
    },
    SelectAlias(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ColumnRef {
    pub qualifier: Option<String>,
    pub name: String,
    pub target: Option<ColumnTarget>,
    /// (scope depth from the outermost query, FROM entry index) of the binding.
    pub scope: Option<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Column(ColumnRef),
    Star(Option<String>),
    Literal(Literal),
    Agg { func: AggFunc, distinct: bool, arg: Box<Expr> },
    Func { name: String, args: Vec<Expr> },
    Binary { op: BinOp, left: Box<Expr>, right: Box<Expr> },
    Neg(Box<Expr>),
    Not(Box<Expr>),
    Between { expr: Box<Expr>, negated: bool, low: Box<Expr>, high: Box<Expr> },
    InList { expr: Box<Expr>, negated: bool, list: Vec<Expr> },
    InSubquery { expr: Box<Expr>, negated: bool, query: Box<Query> },
    Like { expr: Box<Expr>, negated: bool, pattern: Box<Expr> },
    IsNull { expr: Box<Expr>, negated: bool },
    Exists(Box<Query>),
    Subquery(Box<Query>),
}

impl Expr {
    pub fn precedence(&self) -> u8 {
        match self {
            Expr::Binary { op, .. } => op.precedence(),
            Expr::Not(_) => 3,
            Expr::Between { .. } | Expr::InList { .. } | Expr::InSubquery { .. } | Expr::Like { .. } | Expr::IsNull { .. } => 4,
            Expr::Neg(_) => 8,
            _ => 9,
        }
    }

    /// Visits direct child expressions (not descending into subqueries).
    pub fn children(&self) -> Vec<&Expr> {
        match self {
            Expr::Column(_) | Expr::Star(_) | Expr::Literal(_) | Expr::Exists(_) | Expr::Subquery(_) => vec![],
            Expr::Agg { arg, .. } => vec![arg],
            Expr::Func { args, .. } => args.iter().collect(),
            Expr::Binary { left, right, .. } => vec![left, right],
            Expr::Neg(e) | Expr::Not(e) | Expr::IsNull { expr: e, .. } => vec![e],
            Expr::Between { expr, low, high, .. } => vec![expr, low, high],
            Expr::InList { expr, list, .. } => std::iter::once(&**expr).chain(list.iter()).collect(),
            Expr::InSubquery { expr, .. } => vec![expr],
            Expr::Like { expr, pattern, .. } => vec![expr, pattern],
        }
    }

    pub fn subquery(&self) -> Option<&Query> {
        match self {
            Expr::InSubquery { query, .. } | Expr::Exists(query) | Expr::Subquery(query) => Some(query),
            _ => None,
        }
    }
}

fn quote_string(s: &str) -> String {
    format!("'{}'", s.replace('\'', "''"))
}

fn ident(s: &str) -> String {
    let bare = s.chars().next().is_some_and(|c| c.is_ascii_alphabetic() || c == '_' || !c.is_ascii())
        && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || !c.is_ascii())
        && !super::parser::is_reserved(s);
    if bare {
        s.to_string()
    } else {
        format!("`{}`", s.replace('`', "``"))
    }
}

impl Display for Literal {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        match self {
            Literal::Number(n) => f.write_str(n),
            Literal::String(s) => f.write_str(&quote_string(s)),
            Literal::Null => f.write_str("NULL"),
            Literal::Masked => f.write_str("?"),
        }
    }
}

struct Wrapped<'a>(&'a Expr, u8);

impl Display for Wrapped<'_> {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        if self.0.precedence() < self.1 {
            write!(f, "({})", self.0)
        } else {
            write!(f, "{}", self.0)
        }
    }
}

fn not_kw(negated: bool) -> &'static str {
    if negated {
        "NOT "
    } else {
        ""
    }
}

impl Display for Expr {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Column(c) => match &c.qualifier {
                Some(q) => write!(f, "{}.{}", ident(q), ident(&c.name)),
                None => f.write_str(&ident(&c.name)),
            },
            Expr::Star(None) => f.write_str("*"),
            Expr::Star(Some(q)) => write!(f, "{}.*", ident(q)),
            Expr::Literal(l) => write!(f, "{l}"),
            Expr::Agg { func, distinct, arg } => {
                write!(f, "{}({}{})", func.name(), if *distinct { "DISTINCT " } else { "" }, arg)
            }
            Expr::Func { name, args } => {
                f.write_str(name)?;
                f.write_char('(')?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{a}")?;
                }
                f.write_char(')')
            }
            Expr::Binary { op, left, right } => {
                let p = op.precedence();
                // left-associative: the right operand needs strictly higher precedence
                write!(f, "{} {} {}", Wrapped(left, p), op.symbol(), Wrapped(right, p + 1))
            }
            Expr::Neg(e) => write!(f, "-{}", Wrapped(e, 8)),
            Expr::Not(e) => write!(f, "NOT {}", Wrapped(e, 3)),
            Expr::Between { expr, negated, low, high } => {
                write!(f, "{} {}BETWEEN {} AND {}", Wrapped(expr, 5), not_kw(*negated), Wrapped(low, 5), Wrapped(high, 5))
            }
            Expr::InList { expr, negated, list } => {
                write!(f, "{} {}IN (", Wrapped(expr, 5), not_kw(*negated))?;
                for (i, e) in list.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{e}")?;
                }
                f.write_char(')')
            }
            Expr::InSubquery { expr, negated, query } => {
                write!(f, "{} {}IN ({query})", Wrapped(expr, 5), not_kw(*negated))
            }
            Expr::Like { expr, negated, pattern } => {
                write!(f, "{} {}LIKE {}", Wrapped(expr, 5), not_kw(*negated), Wrapped(pattern, 5))
            }
            Expr::IsNull { expr, negated } => write!(f, "{} IS {}NULL", Wrapped(expr, 5), not_kw(*negated)),
            Expr::Exists(q) => write!(f, "EXISTS ({q})"),
            Expr::Subquery(q) => write!(f, "({q})"),
        }
    }
}

impl Display for TableRef {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        match &self.source {
            TableSource::Named { name, .. } => f.write_str(&ident(name))?,
            TableSource::Subquery(q) => write!(f, "({q})")?,
        }
        if let Some(a) = &self.alias {
            write!(f, " AS {}", ident(a))?;
        }
        Ok(())
    }
}

impl Display for From {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.first)?;
        for j in &self.joins {
            match j.kind {
                JoinKind::Comma => write!(f, ", {}", j.table)?,
                JoinKind::Inner => write!(f, " JOIN {}", j.table)?,
                JoinKind::Left => write!(f, " LEFT JOIN {}", j.table)?,
                JoinKind::Cross => write!(f, " CROSS JOIN {}", j.table)?,
            }
            if let Some(on) = &j.on {
                write!(f, " ON {on}")?;
            }
        }
        Ok(())
    }
}

impl Display for Select {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        f.write_str("SELECT ")?;
        if self.distinct {
            f.write_str("DISTINCT ")?;
        }
        for (i, item) in self.items.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{}", item.expr)?;
            if let Some(a) = &item.alias {
                write!(f, " AS {}", ident(a))?;
            }
        }
        if let Some(from) = &self.from {
            write!(f, " FROM {from}")?;
        }
        if let Some(w) = &self.where_ {
            write!(f, " WHERE {w}")?;
        }
        if !self.group_by.is_empty() {
            f.write_str(" GROUP BY ")?;
            for (i, g) in self.group_by.iter().enumerate() {
                if i > 0 {
                    f.write_str(", ")?;
                }
                write!(f, "{g}")?;
            }
        }
        if let Some(h) = &self.having {
            write!(f, " HAVING {h}")?;
        }
        if !self.order_by.is_empty() {
            f.write_str(" ORDER BY ")?;
            for (i, o) in self.order_by.iter().enumerate() {
                if i > 0 {
                    f.write_str(", ")?;
                }
                write!(f, "{}", o.expr)?;
                match o.direction {
                    Some(Direction::Asc) => f.write_str(" ASC")?,
                    Some(Direction::Desc) => f.write_str(" DESC")?,
                    None => {}
                }
            }
        }
        if let Some(l) = &self.limit {
            write!(f, " LIMIT {l}")?;
        }
        Ok(())
    }
}

impl Display for Query {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.select)?;
        if let Some((op, rhs)) = &self.set_op {
            write!(f, " {} {rhs}", op.keyword())?;
        }
        Ok(())
    }
}
