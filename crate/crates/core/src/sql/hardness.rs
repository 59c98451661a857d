//! Difficulty buckets by component counting, following the reference
//! evaluation script's rules including its counting quirks: NOT conditions
//! count as aggregations in WHERE, and HAVING counts its connectors and NOT
//! conditions rather than its aggregations.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::ast::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Difficulty {
    Easy,
    Medium,
    Hard,
    Extra,
}

impl Difficulty {
    pub const ALL: [Difficulty; 4] = [Difficulty::Easy, Difficulty::Medium, Difficulty::Hard, Difficulty::Extra];

    pub fn label(self) -> &'static str {
        match self {
            Difficulty::Easy => "Easy",
            Difficulty::Medium => "Medium",
            Difficulty::Hard => "Hard",
            Difficulty::Extra => "Extra",
        }
    }
}

impl fmt::Display for Difficulty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// A condition list flattened left to right: units with their NOT flag, plus connectors.
#[derive(Default)]
struct CondList<'a> {
    units: Vec<(bool, &'a Expr)>,
    connectors: Vec<BinOp>,
}

impl<'a> CondList<'a> {
    fn push(&mut self, e: &'a Expr) {
        match e {
            Expr::Binary { op: op @ (BinOp::And | BinOp::Or), left, right } => {
                self.push(left);
                self.connectors.push(*op);
                self.push(right);
            }
            Expr::Not(inner) => self.units.push((true, inner)),
            Expr::InSubquery { negated: true, .. }
            | Expr::InList { negated: true, .. }
            | Expr::Like { negated: true, .. }
            | Expr::Between { negated: true, .. } => self.units.push((true, e)),
            _ => self.units.push((false, e)),
        }
    }

    fn of(e: Option<&'a Expr>) -> Self {
        let mut c = CondList::default();
        if let Some(e) = e {
            c.push(e);
        }
        c
    }

    /// Length of the reference representation (units interleaved with connectors).
    fn len(&self) -> usize {
        self.units.len() + self.connectors.len()
    }

    fn ors(&self) -> usize {
        self.connectors.iter().filter(|c| **c == BinOp::Or).count()
    }

    fn likes(&self) -> usize {
        self.units.iter().filter(|(_, u)| matches!(u, Expr::Like { .. })).count()
    }

    fn nots(&self) -> usize {
        self.units.iter().filter(|(n, _)| *n).count()
    }

    fn nested(&self) -> usize {
        self.units
            .iter()
            .map(|(_, u)| match u {
                Expr::InSubquery { .. } | Expr::Exists(_) => 1,
                Expr::Binary { left, right, .. } => {
                    usize::from(matches!(**left, Expr::Subquery(_))) + usize::from(matches!(**right, Expr::Subquery(_)))
                }
                Expr::Between { low, high, .. } => {
                    usize::from(matches!(**low, Expr::Subquery(_))) + usize::from(matches!(**high, Expr::Subquery(_)))
                }
                _ => 0,
            })
            .sum()
    }
}

fn join_conds(s: &Select) -> CondList<'_> {
    let mut c = CondList::default();
    if let Some(from) = &s.from {
        for (i, cond) in from.conditions().enumerate() {
            if i > 0 {
                c.connectors.push(BinOp::And);
            }
            c.push(cond);
        }
    }
    c
}

fn is_agg(e: &Expr) -> bool {
    matches!(e, Expr::Agg { .. })
}

fn component1(q: &Query) -> usize {
    let s = &q.select;
    let (from, where_, having) = (join_conds(s), CondList::of(s.where_.as_ref()), CondList::of(s.having.as_ref()));
    let mut count = usize::from(where_.len() > 0)
        + usize::from(!s.group_by.is_empty())
        + usize::from(!s.order_by.is_empty())
        + usize::from(s.limit.is_some());
    let units = s.from.as_ref().map_or(0, |f| f.tables().count());
    count += units.saturating_sub(1);
    count += from.ors() + where_.ors() + having.ors();
    count += from.likes() + where_.likes() + having.likes();
    count
}

fn component2(q: &Query) -> usize {
    let s = &q.select;
    join_conds(s).nested()
        + CondList::of(s.where_.as_ref()).nested()
        + CondList::of(s.having.as_ref()).nested()
        + usize::from(q.set_op.is_some())
}

fn others(q: &Query) -> usize {
    let s = &q.select;
    let where_ = CondList::of(s.where_.as_ref());
    let having = CondList::of(s.having.as_ref());
    let mut aggs = s.items.iter().filter(|i| is_agg(&i.expr)).count();
    aggs += where_.nots();
    aggs += s.group_by.iter().filter(|g| is_agg(g)).count();
    for o in &s.order_by {
        aggs += match &o.expr {
            Expr::Binary { left, right, .. } if !matches!(o.expr, Expr::Binary { op: BinOp::And | BinOp::Or, .. }) => {
                usize::from(is_agg(left)) + usize::from(is_agg(right))
            }
            e => usize::from(is_agg(e)),
        };
    }
    aggs += having.connectors.len() + having.nots();
    usize::from(aggs > 1) + usize::from(s.items.len() > 1) + usize::from(where_.len() > 1) + usize::from(s.group_by.len() > 1)
}

/// Component counts (c1, c2, others) used for bucketing.
pub fn component_counts(q: &Query) -> (usize, usize, usize) {
    (component1(q), component2(q), others(q))
}

pub fn classify(q: &Query) -> Difficulty {
    let (c1, c2, o) = component_counts(q);
    if c1 <= 1 && o == 0 && c2 == 0 {
        Difficulty::Easy
    } else if (o <= 2 && c1 <= 1 && c2 == 0) || (c1 <= 2 && o < 2 && c2 == 0) {
        Difficulty::Medium
    } else if (o > 2 && c1 <= 2 && c2 == 0) || (2 < c1 && c1 <= 3 && o <= 2 && c2 == 0) || (c1 <= 1 && o == 0 && c2 <= 1) {
        Difficulty::Hard
    } else {
        Difficulty::Extra
    }
}
