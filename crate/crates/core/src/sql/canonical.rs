use std::collections::HashMap;

use serde::Serialize;

use super::ast::*;
use crate::schema::DatabaseSchema;

/// Clause-wise components of a normalized query; two queries match exactly
/// when their canonical forms are equal.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CanonicalSql {
    pub distinct: bool,
    pub select: Vec<String>,
    pub from: Vec<String>,
    pub join_conditions: Vec<String>,
    pub where_: Vec<String>,
    pub group_by: Vec<String>,
    pub having: Vec<String>,
    pub order_by: Vec<(String, Direction)>,
    pub limit: bool,
    pub set_op: Option<(SetOp, Box<CanonicalSql>)>,
    /// The normalized query rendered back to SQL.
    pub sql: String,
}

#[derive(Clone)]
struct Frame {
    qualifiers: Vec<String>,
    /// original alias or table name (lowercased) -> canonical qualifier
    names: HashMap<String, String>,
}

struct Canon<'a> {
    schema: &'a DatabaseSchema,
}

pub fn canonicalize(query: &Query, schema: &DatabaseSchema) -> CanonicalSql {
    let q = Canon { schema }.query(query, &[], false);
    components(&q)
}

fn sorted_by_text(mut v: Vec<Expr>) -> Vec<Expr> {
    v.sort_by_cached_key(|e| e.to_string());
    v
}

fn flatten(e: &Expr, op: BinOp, out: &mut Vec<Expr>) {
    match e {
        Expr::Binary { op: o, left, right } if *o == op => {
            flatten(left, op, out);
            flatten(right, op, out);
        }
        _ => out.push(e.clone()),
    }
}

fn rebuild(items: Vec<Expr>, op: BinOp) -> Option<Expr> {
    items.into_iter().reduce(|l, r| Expr::Binary { op, left: Box::new(l), right: Box::new(r) })
}

impl Canon<'_> {
    fn query(&self, q: &Query, outer: &[Frame], keep_aliases: bool) -> Query {
        Query {
            select: self.select(&q.select, outer, keep_aliases),
            set_op: q.set_op.as_ref().map(|(op, rhs)| (*op, Box::new(self.query(rhs, outer, keep_aliases)))),
        }
    }

    fn select(&self, s: &Select, outer: &[Frame], keep_aliases: bool) -> Select {
        let mut frame = Frame { qualifiers: Vec::new(), names: HashMap::new() };
        let mut tables: Vec<TableRef> = Vec::new();
        let mut conds: Vec<Expr> = Vec::new();
        if let Some(from) = &s.from {
            let mut seen: HashMap<usize, usize> = HashMap::new();
            let counts = from.tables().fold(HashMap::new(), |mut m: HashMap<usize, usize>, t| {
                if let TableSource::Named { table: Some(ti), .. } = t.source {
                    *m.entry(ti).or_default() += 1;
                }
                m
            });
            let mut derived = Vec::new();
            for (i, t) in from.tables().enumerate() {
                match &t.source {
                    TableSource::Named { name, table } => {
                        let canon_name = match table {
                            Some(ti) => self.schema.tables[*ti].name.to_lowercase(),
                            None => name.to_lowercase(),
                        };
                        let dup = table.is_some_and(|ti| counts[&ti] > 1);
                        let qualifier = if dup {
                            let k = seen.entry(table.unwrap_or(usize::MAX)).or_default();
                            *k += 1;
                            format!("{canon_name}_{k}")
                        } else {
                            canon_name.clone()
                        };
                        frame.qualifiers.push(qualifier.clone());
                        tables.push(TableRef {
                            source: TableSource::Named { name: canon_name, table: *table },
                            alias: dup.then_some(qualifier),
                        });
                    }
                    TableSource::Subquery(sq) => {
                        let cq = self.query(sq, outer, true);
                        frame.qualifiers.push(String::new());
                        derived.push((i, cq));
                    }
                }
                let key = t.alias.clone().or_else(|| match &t.source {
                    TableSource::Named { name, .. } => Some(name.clone()),
                    TableSource::Subquery(_) => None,
                });
                if let Some(key) = key {
                    frame.names.entry(key.to_lowercase()).or_insert_with(|| format!("#{i}"));
                }
            }
            // derived tables are named after their sorted canonical text
            derived.sort_by_cached_key(|(_, q)| q.to_string());
            for (k, (i, cq)) in derived.into_iter().enumerate() {
                let alias = format!("derived_{}", k + 1);
                frame.qualifiers[i] = alias.clone();
                tables.push(TableRef { source: TableSource::Subquery(Box::new(cq)), alias: Some(alias) });
            }
            for v in frame.names.values_mut() {
                if let Some(i) = v.strip_prefix('#').and_then(|n| n.parse::<usize>().ok()) {
                    *v = frame.qualifiers[i].clone();
                }
            }
        }
        let mut chain: Vec<Frame> = outer.to_vec();
        chain.push(frame);
        if let Some(from) = &s.from {
            for c in from.conditions() {
                let mut parts = Vec::new();
                flatten(c, BinOp::And, &mut parts);
                conds.extend(parts.iter().map(|p| self.predicate(p, &chain)));
            }
        }
        let conds = sorted_by_text(conds);
        tables.sort_by_cached_key(|t| t.to_string());
        let from = if tables.is_empty() {
            None
        } else {
            let first = tables.remove(0);
            let n = tables.len();
            let mut conds = Some(conds);
            let joins = tables
                .into_iter()
                .enumerate()
                .map(|(i, table)| Join {
                    kind: JoinKind::Inner,
                    table,
                    on: if i + 1 == n { conds.take().and_then(|c| rebuild(c, BinOp::And)) } else { None },
                })
                .collect();
            Some(From { first, joins })
        };
        let aliases: HashMap<String, Expr> =
            s.items.iter().filter_map(|i| i.alias.as_ref().map(|a| (a.to_lowercase(), self.expr(&i.expr, &chain)))).collect();
        let mut items: Vec<SelectItem> = s
            .items
            .iter()
            .map(|i| SelectItem {
                expr: self.expr(&i.expr, &chain),
                alias: if keep_aliases { i.alias.as_ref().map(|a| a.to_lowercase()) } else { None },
            })
            .collect();
        items.sort_by_cached_key(|i| i.expr.to_string());
        let resolve_alias = |e: Expr| -> Expr {
            match &e {
                Expr::Column(ColumnRef { target: Some(ColumnTarget::SelectAlias(a)), .. }) if !keep_aliases => {
                    aliases.get(&a.to_lowercase()).cloned().unwrap_or(e)
                }
                _ => e,
            }
        };
        Select {
            distinct: s.distinct,
            items,
            from,
            where_: s.where_.as_ref().map(|w| self.predicate(w, &chain)),
            group_by: sorted_by_text(s.group_by.iter().map(|g| resolve_alias(self.expr(g, &chain))).collect()),
            having: s.having.as_ref().map(|h| self.predicate(h, &chain)),
            order_by: s
                .order_by
                .iter()
                .map(|o| OrderItem {
                    expr: resolve_alias(self.expr(&o.expr, &chain)),
                    direction: Some(o.direction.unwrap_or(Direction::Asc)),
                })
                .collect(),
            limit: s.limit.as_ref().map(|_| Literal::Masked),
        }
    }

    /// Boolean expressions: AND/OR operands flattened and sorted.
    fn predicate(&self, e: &Expr, chain: &[Frame]) -> Expr {
        match e {
            Expr::Binary { op: op @ (BinOp::And | BinOp::Or), .. } => {
                let mut parts = Vec::new();
                flatten(e, *op, &mut parts);
                let parts = sorted_by_text(parts.iter().map(|p| self.predicate(p, chain)).collect());
                rebuild(parts, *op).expect("non-empty operand list")
            }
            Expr::Not(inner) => Expr::Not(Box::new(self.predicate(inner, chain))),
            _ => self.expr(e, chain),
        }
    }

    fn expr(&self, e: &Expr, chain: &[Frame]) -> Expr {
        match e {
            Expr::Column(c) => {
                let qualifier = c.scope.map(|(level, idx)| chain[level].qualifiers[idx].clone());
                let name = match &c.target {
                    Some(ColumnTarget::Schema { table, column }) => self.schema.tables[*table].columns[*column].name.to_lowercase(),
                    _ => c.name.to_lowercase(),
                };
                Expr::Column(ColumnRef { qualifier, name, target: c.target.clone(), scope: c.scope })
            }
            Expr::Star(q) => Expr::Star(q.as_ref().map(|q| {
                let key = q.to_lowercase();
                chain.iter().rev().find_map(|f| f.names.get(&key).cloned()).unwrap_or(key)
            })),
            Expr::Literal(Literal::Null) => Expr::Literal(Literal::Null),
            Expr::Literal(_) => Expr::Literal(Literal::Masked),
            Expr::Agg { func, distinct, arg } => Expr::Agg { func: *func, distinct: *distinct, arg: Box::new(self.expr(arg, chain)) },
            Expr::Func { name, args } => Expr::Func { name: name.to_lowercase(), args: args.iter().map(|a| self.expr(a, chain)).collect() },
            Expr::Binary { op: BinOp::And | BinOp::Or, .. } | Expr::Not(_) => self.predicate(e, chain),
            Expr::Binary { op, left, right } => {
                let (mut l, mut r) = (self.expr(left, chain), self.expr(right, chain));
                let is_lit = |x: &Expr| matches!(x, Expr::Literal(_));
                let swap = match (is_lit(&l), is_lit(&r)) {
                    (true, false) => true,
                    (false, false) => matches!(op, BinOp::Eq | BinOp::NotEq) && l.to_string() > r.to_string(),
                    _ => false,
                };
                let op = if swap {
                    std::mem::swap(&mut l, &mut r);
                    match op {
                        BinOp::Lt => BinOp::Gt,
                        BinOp::Gt => BinOp::Lt,
                        BinOp::LtEq => BinOp::GtEq,
                        BinOp::GtEq => BinOp::LtEq,
                        other => *other,
                    }
                } else {
                    *op
                };
                Expr::Binary { op, left: Box::new(l), right: Box::new(r) }
            }
            Expr::Neg(x) => match self.expr(x, chain) {
                Expr::Literal(Literal::Masked) => Expr::Literal(Literal::Masked),
                other => Expr::Neg(Box::new(other)),
            },
            Expr::Between { expr, negated, low, high } => Expr::Between {
                expr: Box::new(self.expr(expr, chain)),
                negated: *negated,
                low: Box::new(self.expr(low, chain)),
                high: Box::new(self.expr(high, chain)),
            },
            Expr::InList { expr, negated, list } => Expr::InList {
                expr: Box::new(self.expr(expr, chain)),
                negated: *negated,
                list: sorted_by_text(list.iter().map(|x| self.expr(x, chain)).collect()),
            },
            Expr::InSubquery { expr, negated, query } => Expr::InSubquery {
                expr: Box::new(self.expr(expr, chain)),
                negated: *negated,
                query: Box::new(self.query(query, chain, false)),
            },
            Expr::Like { expr, negated, pattern } => {
                Expr::Like { expr: Box::new(self.expr(expr, chain)), negated: *negated, pattern: Box::new(self.expr(pattern, chain)) }
            }
            Expr::IsNull { expr, negated } => Expr::IsNull { expr: Box::new(self.expr(expr, chain)), negated: *negated },
            Expr::Exists(q) => Expr::Exists(Box::new(self.query(q, chain, false))),
            Expr::Subquery(q) => Expr::Subquery(Box::new(self.query(q, chain, false))),
        }
    }
}

fn conjuncts(e: Option<&Expr>) -> Vec<String> {
    let mut parts = Vec::new();
    if let Some(e) = e {
        flatten(e, BinOp::And, &mut parts);
    }
    parts.iter().map(|p| p.to_string()).collect()
}

fn components(q: &Query) -> CanonicalSql {
    let s = &q.select;
    let (from, join_conditions) = match &s.from {
        Some(f) => {
            let tables = f.tables().map(|t| t.to_string()).collect();
            let mut conds = Vec::new();
            for c in f.conditions() {
                conds.extend(conjuncts(Some(c)));
            }
            (tables, conds)
        }
        None => (Vec::new(), Vec::new()),
    };
    CanonicalSql {
        distinct: s.distinct,
        select: s.items.iter().map(|i| i.expr.to_string()).collect(),
        from,
        join_conditions,
        where_: conjuncts(s.where_.as_ref()),
        group_by: s.group_by.iter().map(|g| g.to_string()).collect(),
        having: conjuncts(s.having.as_ref()),
        order_by: s.order_by.iter().map(|o| (o.expr.to_string(), o.direction.unwrap_or(Direction::Asc))).collect(),
        limit: s.limit.is_some(),
        set_op: q.set_op.as_ref().map(|(op, rhs)| (*op, Box::new(components(rhs)))),
        sql: q.to_string(),
    }
}
