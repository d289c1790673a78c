use std::rc::Rc;

use crate::batch::{ColumnBatch, VarId};
use crate::dictionary::TermId;
use crate::expr::FilterExpr;
use crate::operator::{BatchOperator, BoxedBatchOp, ExecContext, ExecResult};

/// Narrows each child batch's selection vector; batches left empty go back to the pool.
pub struct VFilter {
    ctx: Rc<ExecContext>,
    child: BoxedBatchOp,
    exprs: Vec<FilterExpr>,
}

impl VFilter {
    pub fn new(ctx: Rc<ExecContext>, child: BoxedBatchOp, exprs: Vec<FilterExpr>) -> Self {
        VFilter { ctx, child, exprs }
    }
}

impl BatchOperator for VFilter {
    fn next_batch(&mut self) -> ExecResult<Option<ColumnBatch>> {
        while let Some(mut b) = self.child.next_batch()? {
            for e in &self.exprs {
                e.apply_to_batch(&self.ctx, &mut b);
                if b.active_count() == 0 {
                    break;
                }
            }
            if b.active_count() > 0 {
                return Ok(Some(b));
            }
            self.ctx.release(b);
        }
        Ok(None)
    }

    fn skip(&mut self, key: TermId) -> ExecResult<()> {
        self.child.skip(key)
    }

    fn reset(&mut self) -> ExecResult<()> {
        self.child.reset()
    }

    fn output_vars(&self) -> &[VarId] {
        self.child.output_vars()
    }

    fn sort_var(&self) -> Option<VarId> {
        self.child.sort_var()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adapters::test_support::*;
    use crate::expr::{CompareOp, Operand};

    #[test]
    fn empty_batches_are_dropped() {
        let ctx = ctx_with(2, 4);
        let rows = vec![t(&[1, 1]), t(&[2, 2]), t(&[3, 4]), t(&[5, 5]), t(&[6, 7])];
        let src = VecBatchSource::new(ctx.clone(), vec![VarId(0), VarId(1)], rows, 2, None);
        let ne = FilterExpr::Compare { op: CompareOp::Ne, left: Operand::Var(VarId(0)), right: Operand::Var(VarId(1)) };
        let mut f = VFilter::new(ctx, Box::new(src), vec![ne]);
        let mut got = Vec::new();
        while let Some(b) = f.next_batch().unwrap() {
            assert!(b.active_count() > 0);
            got.extend(b.pivot_to_rows());
        }
        assert_eq!(got, vec![t(&[3, 4]), t(&[6, 7])]);
    }

    #[test]
    fn true_predicate_is_identity() {
        let ctx = ctx_with(1, 4);
        let rows: Vec<_> = (1..=9).map(|i| t(&[i])).collect();
        let src = VecBatchSource::new(ctx.clone(), vec![VarId(0)], rows.clone(), 4, None);
        let b = FilterExpr::Bound(VarId(0));
        let mut f = VFilter::new(ctx, Box::new(src), vec![b]);
        let mut got = Vec::new();
        while let Some(b) = f.next_batch().unwrap() {
            got.extend(b.pivot_to_rows());
        }
        assert_eq!(got, rows);
    }
}
