use super::ast::*;
use super::SqlError;
use crate::schema::DatabaseSchema;

#[derive(Debug, Clone)]
enum Source {
    Table(usize),
    Derived { index: usize, columns: Vec<String> },
}

#[derive(Debug, Clone)]
struct Entry {
    alias: Option<String>,
    table_name: Option<String>,
    source: Source,
}

#[derive(Debug, Clone, Default)]
struct Scope {
    entries: Vec<Entry>,
    select_aliases: Vec<String>,
}

struct Binder<'a> {
    schema: &'a DatabaseSchema,
}

pub fn bind(query: &mut Query, schema: &DatabaseSchema) -> Result<(), SqlError> {
    Binder { schema }.query(query, &[])
}

impl Binder<'_> {
    fn query(&self, q: &mut Query, outer: &[Scope]) -> Result<(), SqlError> {
        self.select(&mut q.select, outer)?;
        if let Some((_, rhs)) = &mut q.set_op {
            self.query(rhs, outer)?;
        }
        Ok(())
    }

    fn output_columns(&self, q: &Query) -> Vec<String> {
        let mut out = Vec::new();
        for item in &q.select.items {
            match (&item.alias, &item.expr) {
                (Some(a), _) => out.push(a.clone()),
                (None, Expr::Column(c)) => out.push(c.name.clone()),
                (None, Expr::Star(_)) => {
                    if let Some(from) = &q.select.from {
                        for t in from.tables() {
                            match &t.source {
                                TableSource::Named { table: Some(ti), .. } => {
                                    out.extend(self.schema.tables[*ti].columns.iter().map(|c| c.name.clone()))
                                }
                                TableSource::Subquery(sq) => out.extend(self.output_columns(sq)),
                                TableSource::Named { table: None, .. } => {}
                            }
                        }
                    }
                }
                (None, e) => out.push(e.to_string()),
            }
        }
        out
    }

    fn select(&self, s: &mut Select, outer: &[Scope]) -> Result<(), SqlError> {
        let mut scope = Scope::default();
        if let Some(from) = &mut s.from {
            let mut refs: Vec<&mut TableRef> = vec![&mut from.first];
            refs.extend(from.joins.iter_mut().map(|j| &mut j.table));
            for (index, tref) in refs.into_iter().enumerate() {
                let entry = match &mut tref.source {
                    TableSource::Named { name, table } => {
                        let ti = self.schema.table_index(name).ok_or_else(|| SqlError::UnknownTable(name.clone()))?;
                        *table = Some(ti);
                        Entry { alias: tref.alias.clone(), table_name: Some(name.clone()), source: Source::Table(ti) }
                    }
                    TableSource::Subquery(sq) => {
                        self.query(sq, outer)?;
                        let columns = self.output_columns(sq);
                        Entry { alias: tref.alias.clone(), table_name: None, source: Source::Derived { index, columns } }
                    }
                };
                scope.entries.push(entry);
            }
        }
        let mut chain: Vec<Scope> = outer.to_vec();
        chain.push(scope);
        if let Some(from) = &mut s.from {
            for j in &mut from.joins {
                if let Some(on) = &mut j.on {
                    self.expr(on, &chain)?;
                }
            }
        }
        for item in &mut s.items {
            self.expr(&mut item.expr, &chain)?;
        }
        chain.last_mut().expect("current scope").select_aliases = s.items.iter().filter_map(|i| i.alias.clone()).collect();
        if let Some(w) = &mut s.where_ {
            self.expr(w, &chain)?;
        }
        for g in &mut s.group_by {
            self.expr(g, &chain)?;
        }
        if let Some(h) = &mut s.having {
            self.expr(h, &chain)?;
        }
        for o in &mut s.order_by {
            self.expr(&mut o.expr, &chain)?;
        }
        Ok(())
    }

    fn column_in(&self, entry: &Entry, name: &str) -> Option<ColumnTarget> {
        match &entry.source {
            Source::Table(ti) => self.schema.tables[*ti].column_index(name).map(|ci| ColumnTarget::Schema { table: *ti, column: ci }),
            Source::Derived { index, columns } => {
                columns.iter().find(|c| c.eq_ignore_ascii_case(name)).map(|c| ColumnTarget::Derived { source: *index, column: c.clone() })
            }
        }
    }

    fn qualified(&self, q: &str, name: &str, chain: &[Scope]) -> Result<(ColumnTarget, Option<(usize, usize)>), SqlError> {
        for (level, scope) in chain.iter().enumerate().rev() {
            let by_alias = scope.entries.iter().position(|e| e.alias.as_deref().is_some_and(|a| a.eq_ignore_ascii_case(q)));
            let idx =
                by_alias.or_else(|| scope.entries.iter().position(|e| e.table_name.as_deref().is_some_and(|t| t.eq_ignore_ascii_case(q))));
            if let Some(idx) = idx {
                return self
                    .column_in(&scope.entries[idx], name)
                    .map(|t| (t, Some((level, idx))))
                    .ok_or_else(|| SqlError::UnresolvableColumn(format!("{q}.{name}")));
            }
        }
        Err(SqlError::UnresolvableColumn(format!("{q}.{name}")))
    }

    fn unqualified(&self, name: &str, chain: &[Scope]) -> Result<(ColumnTarget, Option<(usize, usize)>), SqlError> {
        let innermost = chain.len().saturating_sub(1);
        for (level, scope) in chain.iter().enumerate().rev() {
            let mut hits = scope.entries.iter().enumerate().filter_map(|(i, e)| self.column_in(e, name).map(|t| (t, Some((level, i)))));
            match (hits.next(), hits.next()) {
                (Some(hit), None) => return Ok(hit),
                (Some(_), Some(_)) => return Err(SqlError::AmbiguousColumn(name.to_string())),
                _ => {}
            }
            if level == innermost {
                if let Some(a) = scope.select_aliases.iter().find(|a| a.eq_ignore_ascii_case(name)) {
                    return Ok((ColumnTarget::SelectAlias(a.clone()), None));
                }
            }
        }
        Err(SqlError::UnresolvableColumn(name.to_string()))
    }

    fn expr(&self, e: &mut Expr, chain: &[Scope]) -> Result<(), SqlError> {
        match e {
            Expr::Column(c) => {
                let (target, scope) = match &c.qualifier {
                    Some(q) => self.qualified(q, &c.name, chain)?,
                    None => self.unqualified(&c.name, chain)?,
                };
                c.target = Some(target);
                c.scope = scope;
                Ok(())
            }
            Expr::Star(Some(q)) => {
                let known = chain.iter().rev().any(|s| {
                    s.entries.iter().any(|en| {
                        en.alias.as_deref().is_some_and(|a| a.eq_ignore_ascii_case(q))
                            || en.table_name.as_deref().is_some_and(|t| t.eq_ignore_ascii_case(q))
                    })
                });
                if known {
                    Ok(())
                } else {
                    Err(SqlError::UnknownTable(q.clone()))
                }
            }
            Expr::Star(None) | Expr::Literal(_) => Ok(()),
            Expr::Agg { arg, .. } => self.expr(arg, chain),
            Expr::Func { args, .. } => args.iter_mut().try_for_each(|a| self.expr(a, chain)),
            Expr::Binary { left, right, .. } => {
                self.expr(left, chain)?;
                self.expr(right, chain)
            }
            Expr::Neg(x) | Expr::Not(x) | Expr::IsNull { expr: x, .. } => self.expr(x, chain),
            Expr::Between { expr, low, high, .. } => {
                self.expr(expr, chain)?;
                self.expr(low, chain)?;
                self.expr(high, chain)
            }
            Expr::InList { expr, list, .. } => {
                self.expr(expr, chain)?;
                list.iter_mut().try_for_each(|a| self.expr(a, chain))
            }
            Expr::InSubquery { expr, query, .. } => {
                self.expr(expr, chain)?;
                self.query(query, chain)
            }
            Expr::Like { expr, pattern, .. } => {
                self.expr(expr, chain)?;
                self.expr(pattern, chain)
            }
            Expr::Exists(q) | Expr::Subquery(q) => self.query(q, chain),
        }
    }
}
