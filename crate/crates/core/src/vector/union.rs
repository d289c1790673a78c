use std::rc::Rc;

use crate::batch::{ColumnBatch, VarId};
use crate::dictionary::TermId;
use crate::operator::{BatchOperator, BoxedBatchOp, ExecContext, ExecError, ExecResult};

use super::cursor::BatchCursor;

/// UNION of branches; variables missing from a branch are padded with NULL.
///
/// With a sort variable the branches are merged by key, otherwise they are
/// concatenated in branch order.
pub struct VUnion {
    ctx: Rc<ExecContext>,
    branches: Vec<BoxedBatchOp>,
    vars: Vec<VarId>,
    /// Per branch, per output var: the branch column or None.
    maps: Vec<Vec<Option<usize>>>,
    key_cols: Vec<usize>,
    sort_var: Option<VarId>,
    cursors: Vec<BatchCursor>,
    current: usize,
}

impl VUnion {
    pub fn new(ctx: Rc<ExecContext>, branches: Vec<BoxedBatchOp>, sort_var: Option<VarId>) -> ExecResult<Self> {
        let mut vars: Vec<VarId> = Vec::new();
        for b in &branches {
            for v in b.output_vars() {
                if !vars.contains(v) {
                    vars.push(*v);
                }
            }
        }
        let mut key_cols = Vec::new();
        if let Some(s) = sort_var {
            for b in &branches {
                if b.sort_var() != Some(s) {
                    return Err(ExecError::UnsortedInput { operator: "Union" });
                }
                key_cols.push(b.output_vars().iter().position(|v| *v == s).unwrap());
            }
        }
        let maps = branches
            .iter()
            .map(|b| vars.iter().map(|v| b.output_vars().iter().position(|x| x == v)).collect())
            .collect();
        let cursors = branches.iter().map(|_| BatchCursor::new()).collect();
        Ok(VUnion {
            ctx,
            branches,
            vars,
            maps,
            key_cols,
            sort_var,
            cursors,
            current: 0,
        })
    }

    fn next_merged(&mut self) -> ExecResult<Option<ColumnBatch>> {
        let cap = self.ctx.config.batch_max;
        let mut out = self.ctx.acquire(&self.vars);
        let mut row = vec![TermId::NULL; self.vars.len()];
        while out.active_count() < cap {
            let mut best: Option<(TermId, usize)> = None;
            for i in 0..self.branches.len() {
                if self.cursors[i].fill(&self.ctx, self.branches[i].as_mut())? {
                    let k = self.cursors[i].key(self.key_cols[i]);
                    if best.is_none_or(|(bk, _)| k < bk) {
                        best = Some((k, i));
                    }
                }
            }
            let Some((_, i)) = best else { break };
            let cur = &mut self.cursors[i];
            let b = cur.batch();
            let r = cur.row_at(cur.pos);
            for (slot, m) in row.iter_mut().zip(&self.maps[i]) {
                *slot = m.map_or(TermId::NULL, |c| b.column(c)[r]);
            }
            cur.pos += 1;
            out.push_row(&row);
        }
        if out.active_count() == 0 {
            self.ctx.release(out);
            return Ok(None);
        }
        out.set_sort_var(self.sort_var);
        Ok(Some(out))
    }

    fn next_concat(&mut self) -> ExecResult<Option<ColumnBatch>> {
        while self.current < self.branches.len() {
            match self.branches[self.current].next_batch()? {
                Some(mut b) => {
                    b.project(&self.vars);
                    return Ok(Some(b));
                }
                None => self.current += 1,
            }
        }
        Ok(None)
    }
}

impl BatchOperator for VUnion {
    fn next_batch(&mut self) -> ExecResult<Option<ColumnBatch>> {
        if self.sort_var.is_some() {
            self.next_merged()
        } else {
            self.next_concat()
        }
    }

    fn skip(&mut self, key: TermId) -> ExecResult<()> {
        if self.sort_var.is_none() {
            return Err(ExecError::SkipUnsupported { operator: "Union" });
        }
        for i in 0..self.branches.len() {
            self.cursors[i].skip(&self.ctx, self.key_cols[i], self.branches[i].as_mut(), key)?;
        }
        Ok(())
    }

    fn reset(&mut self) -> ExecResult<()> {
        for c in &mut self.cursors {
            c.clear(&self.ctx);
        }
        self.current = 0;
        for b in &mut self.branches {
            b.reset()?;
        }
        Ok(())
    }

    fn output_vars(&self) -> &[VarId] {
        &self.vars
    }

    fn sort_var(&self) -> Option<VarId> {
        self.sort_var
    }
}
