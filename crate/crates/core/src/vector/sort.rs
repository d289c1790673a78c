use std::rc::Rc;

use crate::batch::{ColumnBatch, VarId};
use crate::dictionary::TermId;
use crate::operator::{BatchOperator, BoxedBatchOp, ExecContext, ExecError, ExecResult};

/// Materializes the child, sorts by one variable and streams the result in batches.
pub struct VSort {
    ctx: Rc<ExecContext>,
    child: BoxedBatchOp,
    var: VarId,
    vars: Vec<VarId>,
    key_col: usize,
    sorted: Option<Vec<Vec<TermId>>>,
    pos: usize,
}

impl VSort {
    pub fn new(ctx: Rc<ExecContext>, child: BoxedBatchOp, var: VarId) -> Self {
        let vars = child.output_vars().to_vec();
        let key_col = vars.iter().position(|v| *v == var).expect("sort variable not produced by child");
        VSort {
            ctx,
            child,
            var,
            vars,
            key_col,
            sorted: None,
            pos: 0,
        }
    }

    fn materialize(&mut self) -> ExecResult<()> {
        let width = self.vars.len();
        let mut cols: Vec<Vec<TermId>> = vec![Vec::new(); width];
        let cap = self.ctx.config.memory_cap;
        while let Some(b) = self.child.next_batch()? {
            let sel = b.selection().as_slice();
            for (c, col) in cols.iter_mut().enumerate() {
                let src = b.column(c);
                col.extend(sel.iter().map(|&r| src[r as usize]));
            }
            self.ctx.release(b);
            let used = cols[0].len() * width * std::mem::size_of::<TermId>() * 2;
            if used > cap {
                return Err(ExecError::QueryMemoryExceeded { what: "sort", used, cap });
            }
        }
        let keys = &cols[self.key_col];
        let mut perm: Vec<u32> = (0..keys.len() as u32).collect();
        perm.sort_by_key(|&i| keys[i as usize]);
        let sorted = cols
            .iter()
            .map(|col| perm.iter().map(|&i| col[i as usize]).collect())
            .collect();
        self.sorted = Some(sorted);
        self.pos = 0;
        Ok(())
    }

    fn len(&self) -> usize {
        self.sorted.as_ref().map_or(0, |c| c[self.key_col].len())
    }
}

impl BatchOperator for VSort {
    fn next_batch(&mut self) -> ExecResult<Option<ColumnBatch>> {
        if self.sorted.is_none() {
            self.materialize()?;
        }
        let n = (self.len() - self.pos).min(self.ctx.config.batch_max);
        if n == 0 {
            return Ok(None);
        }
        let mut out = self.ctx.acquire(&self.vars);
        let cols = self.sorted.as_ref().unwrap();
        for (c, col) in cols.iter().enumerate() {
            out.column_mut(c).extend_from_slice(&col[self.pos..self.pos + n]);
        }
        self.pos += n;
        out.set_sort_var(Some(self.var));
        out.seal(n);
        Ok(Some(out))
    }

    fn skip(&mut self, key: TermId) -> ExecResult<()> {
        if self.sorted.is_none() {
            self.materialize()?;
        }
        let keys = &self.sorted.as_ref().unwrap()[self.key_col];
        self.pos += keys[self.pos..].partition_point(|k| *k < key);
        Ok(())
    }

    fn reset(&mut self) -> ExecResult<()> {
        self.sorted = None;
        self.pos = 0;
        self.child.reset()
    }

    fn output_vars(&self) -> &[VarId] {
        &self.vars
    }

    fn sort_var(&self) -> Option<VarId> {
        Some(self.var)
    }
}
