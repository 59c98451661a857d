use std::fmt;

use serde::{Deserialize, Serialize};

use super::ast::*;
use crate::schema::DatabaseSchema;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SchemaColumn {
    pub table: String,
    pub column: String,
}

impl SchemaColumn {
    /// Lowercased "table column" with underscores as spaces.
    pub fn readable(&self) -> String {
        format!("{} {}", self.table, self.column).replace('_', " ").to_lowercase()
    }
}

impl fmt::Display for SchemaColumn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.table, self.column)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SqlSummary {
    pub linked_columns: Vec<SchemaColumn>,
    pub from_only_tables: Vec<String>,
    pub values: Vec<String>,
    pub groupby_columns: Vec<SchemaColumn>,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Clause {
    Select,
    Join,
    Where,
    GroupBy,
    Having,
    OrderBy,
}

struct Walker<'a> {
    schema: &'a DatabaseSchema,
    linked: Vec<(usize, usize)>,
    grouped: Vec<(usize, usize)>,
    tables: Vec<usize>,
    values: Vec<String>,
}

fn push_unique<T: PartialEq>(v: &mut Vec<T>, x: T) {
    if !v.contains(&x) {
        v.push(x);
    }
}

impl Walker<'_> {
    fn query(&mut self, q: &Query) {
        self.select(&q.select);
        if let Some((_, rhs)) = &q.set_op {
            self.query(rhs);
        }
    }

    fn select(&mut self, s: &Select) {
        for item in &s.items {
            self.expr(&item.expr, Clause::Select);
        }
        if let Some(from) = &s.from {
            for t in from.tables() {
                match &t.source {
                    TableSource::Named { table: Some(ti), .. } => push_unique(&mut self.tables, *ti),
                    TableSource::Subquery(q) => self.query(q),
                    TableSource::Named { table: None, .. } => {}
                }
            }
            for cond in from.conditions() {
                self.expr(cond, Clause::Join);
            }
        }
        if let Some(w) = &s.where_ {
            self.expr(w, Clause::Where);
        }
        for g in &s.group_by {
            self.expr(g, Clause::GroupBy);
        }
        if let Some(h) = &s.having {
            self.expr(h, Clause::Having);
        }
        for o in &s.order_by {
            self.expr(&o.expr, Clause::OrderBy);
        }
        if let Some(v) = s.limit.as_ref().and_then(Literal::value_text) {
            self.values.push(v.to_string());
        }
    }

    fn expr(&mut self, e: &Expr, clause: Clause) {
        let predicate = matches!(clause, Clause::Where | Clause::Having);
        match e {
            Expr::Column(ColumnRef { target: Some(ColumnTarget::Schema { table, column }), .. }) => match clause {
                Clause::GroupBy => push_unique(&mut self.grouped, (*table, *column)),
                Clause::Join => {}
                _ => push_unique(&mut self.linked, (*table, *column)),
            },
            Expr::Literal(l) if predicate => {
                if let Some(v) = l.value_text() {
                    self.values.push(v.to_string());
                }
            }
            Expr::Neg(inner) if predicate && matches!(**inner, Expr::Literal(Literal::Number(_))) => {
                if let Expr::Literal(Literal::Number(n)) = &**inner {
                    self.values.push(format!("-{n}"));
                }
            }
            _ => {
                for c in e.children() {
                    self.expr(c, clause);
                }
                if let Some(q) = e.subquery() {
                    self.query(q);
                }
            }
        }
    }
}

/// Extracts linked columns, FROM-only tables, value hints and GROUP BY columns from a bound query.
pub fn summarize(query: &Query, schema: &DatabaseSchema) -> SqlSummary {
    let mut w = Walker { schema, linked: vec![], grouped: vec![], tables: vec![], values: vec![] };
    w.query(query);
    let col = |&(t, c): &(usize, usize)| SchemaColumn {
        table: w.schema.tables[t].name.clone(),
        column: w.schema.tables[t].columns[c].name.clone(),
    };
    SqlSummary {
        linked_columns: w.linked.iter().map(col).collect(),
        from_only_tables: w
            .tables
            .iter()
            .filter(|t| !w.linked.iter().any(|(lt, _)| lt == *t))
            .map(|&t| w.schema.tables[t].name.clone())
            .collect(),
        values: w.values.clone(),
        groupby_columns: w.grouped.iter().map(col).collect(),
    }
}
