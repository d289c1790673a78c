use std::rc::Rc;

use crate::batch::{ColumnBatch, VarId};
use crate::dictionary::TermId;
use crate::operator::{BatchOperator, BoxedBatchOp, ExecContext, ExecError, ExecResult};

/// DISTINCT over the child's sort variable.
///
/// After each input batch the child is skipped past the largest key seen,
/// so runs of duplicates are mostly never read.
pub struct VDistinct {
    ctx: Rc<ExecContext>,
    child: BoxedBatchOp,
    vars: [VarId; 1],
    col: usize,
    last: Option<TermId>,
}

impl VDistinct {
    pub fn new(ctx: Rc<ExecContext>, child: BoxedBatchOp, var: VarId) -> ExecResult<Self> {
        if child.sort_var() != Some(var) {
            return Err(ExecError::UnsortedInput { operator: "Distinct" });
        }
        let col = child.output_vars().iter().position(|v| *v == var).unwrap();
        Ok(VDistinct {
            ctx,
            child,
            vars: [var],
            col,
            last: None,
        })
    }
}

impl BatchOperator for VDistinct {
    fn next_batch(&mut self) -> ExecResult<Option<ColumnBatch>> {
        while let Some(b) = self.child.next_batch()? {
            let mut out = self.ctx.acquire(&self.vars);
            let keys = b.column(self.col);
            for &r in b.selection().as_slice() {
                let k = keys[r as usize];
                match self.last {
                    Some(l) if k < l => {
                        self.ctx.release(b);
                        self.ctx.release(out);
                        return Err(ExecError::UnsortedInput { operator: "Distinct" });
                    }
                    Some(l) if k == l => {}
                    _ => {
                        out.push_row(&[k]);
                        self.last = Some(k);
                    }
                }
            }
            self.ctx.release(b);
            if let Some(l) = self.last {
                self.child.skip(l.successor())?;
            }
            if out.active_count() > 0 {
                out.set_sort_var(Some(self.vars[0]));
                return Ok(Some(out));
            }
            self.ctx.release(out);
        }
        Ok(None)
    }

    fn skip(&mut self, key: TermId) -> ExecResult<()> {
        self.child.skip(key)
    }

    fn reset(&mut self) -> ExecResult<()> {
        self.last = None;
        self.child.reset()
    }

    fn output_vars(&self) -> &[VarId] {
        &self.vars
    }

    fn sort_var(&self) -> Option<VarId> {
        Some(self.vars[0])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adapters::test_support::*;

    #[test]
    fn keeps_first_of_each_key() {
        let ctx = ctx_with(1, 8);
        let rows = [1, 1, 1, 2, 2, 3].iter().map(|&k| t(&[k])).collect();
        let src = VecBatchSource::new(ctx.clone(), vec![VarId(0)], rows, 2, Some(VarId(0)));
        let mut d = VDistinct::new(ctx, Box::new(src), VarId(0)).unwrap();
        let mut got = Vec::new();
        while let Some(b) = d.next_batch().unwrap() {
            got.extend(b.pivot_to_rows());
        }
        assert_eq!(got, vec![t(&[1]), t(&[2]), t(&[3])]);
    }

    #[test]
    fn duplicates_are_skipped_not_read() {
        let ctx = ctx_with(1, 8);
        let rows = (1..=3u64).flat_map(|k| std::iter::repeat_n(t(&[k]), 10_000)).collect();
        let src = VecBatchSource::new(ctx.clone(), vec![VarId(0)], rows, 16, Some(VarId(0)));
        let counters = src.counters.clone();
        let mut d = VDistinct::new(ctx, Box::new(src), VarId(0)).unwrap();
        let mut n = 0;
        while let Some(b) = d.next_batch().unwrap() {
            n += b.active_count();
        }
        assert_eq!(n, 3);
        let c = counters.borrow();
        assert!(c.skip_calls >= 3);
        assert!(c.rows_pulled < 300, "pulled {}", c.rows_pulled);
    }
}
