//! Filter expressions evaluated in id space.
//!
//! `=` and `!=` compare term identity. Ordering comparisons use the integer
//! side map of the dictionary and are false for any operand that is not an
//! integer literal. Any comparison with an unbound variable is false.

use serde::Serialize;

use crate::batch::{ColumnBatch, VarId};
use crate::dictionary::TermId;
use crate::operator::ExecContext;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum CompareOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl CompareOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CompareOp::Eq => "=",
            CompareOp::Ne => "!=",
            CompareOp::Lt => "<",
            CompareOp::Le => "<=",
            CompareOp::Gt => ">",
            CompareOp::Ge => ">=",
        }
    }

    pub fn is_ordering(self) -> bool {
        !matches!(self, CompareOp::Eq | CompareOp::Ne)
    }

    #[inline]
    fn holds<T: Ord>(self, a: T, b: T) -> bool {
        match self {
            CompareOp::Eq => a == b,
            CompareOp::Ne => a != b,
            CompareOp::Lt => a < b,
            CompareOp::Le => a <= b,
            CompareOp::Gt => a > b,
            CompareOp::Ge => a >= b,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Operand {
    Var(VarId),
    /// A constant term; NULL when the term does not occur in the data.
    Term(TermId),
    /// Integer constant for ordering comparisons.
    Int(i64),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum FilterExpr {
    Compare { op: CompareOp, left: Operand, right: Operand },
    Bound(VarId),
}

impl FilterExpr {
    pub fn vars(&self) -> Vec<VarId> {
        match self {
            FilterExpr::Compare { left, right, .. } => {
                let mut v = Vec::new();
                for o in [left, right] {
                    if let Operand::Var(x) = o {
                        if !v.contains(x) {
                            v.push(*x);
                        }
                    }
                }
                v
            }
            FilterExpr::Bound(v) => vec![*v],
        }
    }

    /// Evaluates against a row accessor.
    pub fn eval(&self, ctx: &ExecContext, get: impl Fn(VarId) -> TermId) -> bool {
        match *self {
            FilterExpr::Bound(v) => !get(v).is_null(),
            FilterExpr::Compare { op, left, right } => {
                let resolve = |o: Operand| match o {
                    Operand::Var(v) => get(v),
                    Operand::Term(t) => t,
                    Operand::Int(_) => TermId::NULL,
                };
                let unbound_var = |o: Operand| matches!(o, Operand::Var(_)) && resolve(o).is_null();
                if unbound_var(left) || unbound_var(right) {
                    return false;
                }
                if op.is_ordering() {
                    let num = |o: Operand| match o {
                        Operand::Int(i) => Some(i),
                        other => ctx.numeric(resolve(other)),
                    };
                    match (num(left), num(right)) {
                        (Some(a), Some(b)) => op.holds(a, b),
                        _ => false,
                    }
                } else {
                    match (left, right) {
                        (Operand::Int(a), Operand::Int(b)) => op.holds(a, b),
                        _ => op.holds(resolve(left), resolve(right)),
                    }
                }
            }
        }
    }

    /// Removes the active rows of `batch` for which the expression is false.
    ///
    /// Each case is a tight loop over the active rows reading only the
    /// columns the expression mentions.
    pub fn apply_to_batch(&self, ctx: &ExecContext, batch: &mut ColumnBatch) {
        let col = |v: VarId| batch.column_index(v);
        match *self {
            FilterExpr::Bound(v) => match col(v) {
                Some(c) => batch.retain_by(|cols, r| !cols[c][r].is_null()),
                None => batch.retain(|_| false),
            },
            FilterExpr::Compare { op, left, right } if !op.is_ordering() => match (left, right) {
                (Operand::Var(a), Operand::Var(b)) => match (col(a), col(b)) {
                    (Some(ca), Some(cb)) => batch.retain_by(|cols, r| {
                        let (p, q) = (cols[ca][r], cols[cb][r]);
                        !p.is_null() && !q.is_null() && op.holds(p, q)
                    }),
                    _ => batch.retain(|_| false),
                },
                (Operand::Var(a), Operand::Term(c)) | (Operand::Term(c), Operand::Var(a)) => match col(a) {
                    Some(ca) => batch.retain_by(|cols, r| {
                        let p = cols[ca][r];
                        !p.is_null() && op.holds(p, c)
                    }),
                    None => batch.retain(|_| false),
                },
                _ => {
                    // no variables: the outcome is the same for every row
                    if !self.eval(ctx, |_| TermId::NULL) {
                        batch.retain(|_| false);
                    }
                }
            },
            FilterExpr::Compare { op, left, right } => {
                let side = |o: Operand| -> Result<NumSide, ()> {
                    match o {
                        Operand::Var(v) => col(v).map(NumSide::Column).ok_or(()),
                        Operand::Int(i) => Ok(NumSide::Const(Some(i))),
                        Operand::Term(t) => Ok(NumSide::Const(ctx.numeric(t))),
                    }
                };
                let (Ok(l), Ok(rr)) = (side(left), side(right)) else {
                    batch.retain(|_| false);
                    return;
                };
                batch.retain_by(|cols, r| {
                    let value = |s: &NumSide| match *s {
                        NumSide::Column(c) => ctx.numeric(cols[c][r]),
                        NumSide::Const(v) => v,
                    };
                    matches!((value(&l), value(&rr)), (Some(a), Some(b)) if op.holds(a, b))
                });
            }
        }
    }
}

enum NumSide {
    Column(usize),
    Const(Option<i64>),
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adapters::test_support::ctx_with;

    fn batch(a: &[u64], b: &[u64]) -> ColumnBatch {
        let ids = |v: &[u64]| v.iter().map(|&x| TermId(x)).collect();
        ColumnBatch::from_columns(&[VarId(0), VarId(1)], vec![ids(a), ids(b)])
    }

    #[test]
    fn self_inequality_removes_everything() {
        let ctx = ctx_with(2, 8);
        let mut b = batch(&[1, 2, 3], &[1, 2, 3]);
        let e = FilterExpr::Compare { op: CompareOp::Ne, left: Operand::Var(VarId(0)), right: Operand::Var(VarId(0)) };
        e.apply_to_batch(&ctx, &mut b);
        assert_eq!(b.active_count(), 0);
    }

    #[test]
    fn var_var_inequality_and_nulls() {
        let ctx = ctx_with(2, 8);
        let mut b = batch(&[1, 2, 3, 0], &[1, 5, 3, 4]);
        let e = FilterExpr::Compare { op: CompareOp::Ne, left: Operand::Var(VarId(0)), right: Operand::Var(VarId(1)) };
        e.apply_to_batch(&ctx, &mut b);
        assert_eq!(b.selection().as_slice(), &[1]);
        for (i, expected) in [(0usize, false), (1, true), (2, false), (3, false)] {
            let b2 = batch(&[1, 2, 3, 0], &[1, 5, 3, 4]);
            assert_eq!(e.eval(&ctx, |v| b2.value(v, i)), expected);
        }
    }

    #[test]
    fn absent_constant() {
        let ctx = ctx_with(2, 8);
        let eq = FilterExpr::Compare { op: CompareOp::Eq, left: Operand::Var(VarId(0)), right: Operand::Term(TermId::NULL) };
        let ne = FilterExpr::Compare { op: CompareOp::Ne, left: Operand::Var(VarId(0)), right: Operand::Term(TermId::NULL) };
        let mut b = batch(&[1, 2, 0], &[0, 0, 0]);
        eq.apply_to_batch(&ctx, &mut b);
        assert_eq!(b.active_count(), 0);
        let mut b = batch(&[1, 2, 0], &[0, 0, 0]);
        ne.apply_to_batch(&ctx, &mut b);
        assert_eq!(b.selection().as_slice(), &[0, 1]);
    }

    #[test]
    fn bound() {
        let ctx = ctx_with(2, 8);
        let mut b = batch(&[1, 0, 3], &[0, 0, 0]);
        FilterExpr::Bound(VarId(0)).apply_to_batch(&ctx, &mut b);
        assert_eq!(b.selection().as_slice(), &[0, 2]);
    }
}
