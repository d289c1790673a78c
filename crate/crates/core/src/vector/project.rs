use crate::batch::{ColumnBatch, VarId};
use crate::dictionary::TermId;
use crate::operator::{BatchOperator, BoxedBatchOp, ExecResult};

/// Keeps a subset of columns without copying them.
pub struct VProject {
    child: BoxedBatchOp,
    vars: Vec<VarId>,
    sort_var: Option<VarId>,
}

impl VProject {
    pub fn new(child: BoxedBatchOp, vars: Vec<VarId>) -> Self {
        let sort_var = child.sort_var().filter(|s| vars.contains(s));
        VProject { child, vars, sort_var }
    }
}

impl BatchOperator for VProject {
    fn next_batch(&mut self) -> ExecResult<Option<ColumnBatch>> {
        Ok(self.child.next_batch()?.map(|mut b| {
            b.project(&self.vars);
            b
        }))
    }

    fn skip(&mut self, key: TermId) -> ExecResult<()> {
        self.child.skip(key)
    }

    fn reset(&mut self) -> ExecResult<()> {
        self.child.reset()
    }

    fn output_vars(&self) -> &[VarId] {
        &self.vars
    }

    fn sort_var(&self) -> Option<VarId> {
        self.sort_var
    }
}

/// Stops after `limit` rows by truncating the selection vector.
pub struct VLimit {
    child: BoxedBatchOp,
    limit: usize,
    seen: usize,
}

impl VLimit {
    pub fn new(child: BoxedBatchOp, limit: usize) -> Self {
        VLimit { child, limit, seen: 0 }
    }
}

impl BatchOperator for VLimit {
    fn next_batch(&mut self) -> ExecResult<Option<ColumnBatch>> {
        if self.seen >= self.limit {
            return Ok(None);
        }
        let Some(mut b) = self.child.next_batch()? else {
            return Ok(None);
        };
        let room = self.limit - self.seen;
        if b.active_count() > room {
            b.selection_mut().keep_range(0, room);
        }
        self.seen += b.active_count();
        Ok(Some(b))
    }

    fn skip(&mut self, key: TermId) -> ExecResult<()> {
        self.child.skip(key)
    }

    fn reset(&mut self) -> ExecResult<()> {
        self.seen = 0;
        self.child.reset()
    }

    fn output_vars(&self) -> &[VarId] {
        self.child.output_vars()
    }

    fn sort_var(&self) -> Option<VarId> {
        self.child.sort_var()
    }
}
