use std::rc::Rc;

use crate::batch::VarId;
use crate::dictionary::TermId;
use crate::operator::{ExecContext, ExecError, ExecResult, RowOperator, RowTuple};
use crate::storage::{RangeCursor, Slot, TriplePattern};

/// Index scan reading one triple per `next()`.
pub struct RowScan {
    ctx: Rc<ExecContext>,
    cursor: RangeCursor,
    vars: Vec<VarId>,
    /// (key slot, var) pairs
    bindings: Vec<(usize, VarId)>,
    repeated: Vec<(usize, usize)>,
    sort_var: Option<VarId>,
    rows_read: u64,
}

impl RowScan {
    pub fn new(ctx: Rc<ExecContext>, pattern: TriplePattern, sort_var: Option<VarId>) -> ExecResult<Self> {
        let cursor = ctx.store.open_scan(&pattern, sort_var)?;
        let plan = cursor.plan();
        let positions = plan.order.positions();
        let slot_of = |pos: usize| positions.iter().position(|&p| p == pos).unwrap();
        let vars = pattern.vars();
        let bindings = vars
            .iter()
            .map(|v| (slot_of((0..3).find(|&p| pattern.slot(p) == Slot::Var(*v)).unwrap()), *v))
            .collect();
        let repeated = pattern
            .repeated_positions()
            .into_iter()
            .map(|(i, j)| (slot_of(i), slot_of(j)))
            .collect();
        let sort_var = plan.sort_position().and_then(|p| pattern.slot(p).var());
        Ok(RowScan {
            ctx,
            cursor,
            vars,
            bindings,
            repeated,
            sort_var,
            rows_read: 0,
        })
    }

    pub fn rows_read(&self) -> u64 {
        self.rows_read
    }
}

impl RowOperator for RowScan {
    fn next_row(&mut self) -> ExecResult<Option<RowTuple>> {
        loop {
            let block = self.cursor.next_block(1);
            let Some(k) = block.first().copied() else {
                return Ok(None);
            };
            self.rows_read += 1;
            self.ctx.add_rows_read(1);
            if !self.repeated.iter().all(|&(i, j)| k[i] == k[j]) {
                continue;
            }
            let mut row = vec![TermId::NULL; self.ctx.var_count()];
            for &(slot, v) in &self.bindings {
                row[v.index()] = k[slot];
            }
            return Ok(Some(row));
        }
    }

    fn skip(&mut self, key: TermId) -> ExecResult<()> {
        if self.sort_var.is_none() {
            return Err(ExecError::SkipUnsupported { operator: "Scan" });
        }
        self.cursor.seek(key);
        Ok(())
    }

    fn reset(&mut self) -> ExecResult<()> {
        self.cursor.rewind();
        Ok(())
    }

    fn output_vars(&self) -> &[VarId] {
        &self.vars
    }

    fn sort_var(&self) -> Option<VarId> {
        self.sort_var
    }
}
