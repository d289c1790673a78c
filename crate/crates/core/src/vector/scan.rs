use std::rc::Rc;

use crate::batch::{ColumnBatch, VarId};
use crate::dictionary::TermId;
use crate::operator::{BatchOperator, ExecContext, ExecError, ExecResult};
use crate::storage::{RangeCursor, Slot, TriplePattern};

use super::sizer::AdaptiveSizer;

/// Index scan producing batches sized by an [`AdaptiveSizer`].
pub struct VScan {
    ctx: Rc<ExecContext>,
    cursor: RangeCursor,
    vars: Vec<VarId>,
    /// For each output var, its slot in the permuted index key.
    key_slots: Vec<usize>,
    /// Key slot pairs that must hold equal values (repeated variables).
    repeated: Vec<(usize, usize)>,
    sort_var: Option<VarId>,
    sizer: AdaptiveSizer,
    rows_read: u64,
}

impl VScan {
    pub fn new(ctx: Rc<ExecContext>, pattern: TriplePattern, sort_var: Option<VarId>) -> ExecResult<Self> {
        let cursor = ctx.store.open_scan(&pattern, sort_var)?;
        let plan = cursor.plan();
        let positions = plan.order.positions();
        let slot_of = |pos: usize| positions.iter().position(|&p| p == pos).unwrap();
        let vars = pattern.vars();
        let key_slots = vars
            .iter()
            .map(|v| slot_of((0..3).find(|&p| pattern.slot(p) == Slot::Var(*v)).unwrap()))
            .collect();
        let repeated = pattern
            .repeated_positions()
            .into_iter()
            .map(|(i, j)| (slot_of(i), slot_of(j)))
            .collect();
        let sort_var = plan.sort_position().and_then(|p| pattern.slot(p).var());
        let sizer = AdaptiveSizer::new(ctx.config.batch_min, ctx.config.batch_max, ctx.config.adaptive);
        Ok(VScan {
            ctx,
            cursor,
            vars,
            key_slots,
            repeated,
            sort_var,
            sizer,
            rows_read: 0,
        })
    }

    /// Rows fetched from the index by this scan.
    pub fn rows_read(&self) -> u64 {
        self.rows_read
    }

    pub fn sizer(&self) -> &AdaptiveSizer {
        &self.sizer
    }

    fn fill(&mut self, out: &mut ColumnBatch, n: usize) -> usize {
        let block = self.cursor.next_block(n);
        let read = block.len();
        let mut len = 0;
        if self.repeated.is_empty() {
            for (c, &slot) in self.key_slots.iter().enumerate() {
                out.column_mut(c).extend(block.iter().map(|k| k[slot]));
            }
            len = read;
        } else {
            let rep = &self.repeated;
            for k in block.iter().filter(|k| rep.iter().all(|&(i, j)| k[i] == k[j])) {
                for (c, &slot) in self.key_slots.iter().enumerate() {
                    out.column_mut(c).push(k[slot]);
                }
                len += 1;
            }
        }
        self.rows_read += read as u64;
        self.ctx.add_rows_read(read as u64);
        len
    }
}

impl BatchOperator for VScan {
    fn next_batch(&mut self) -> ExecResult<Option<ColumnBatch>> {
        loop {
            if self.cursor.is_exhausted() {
                return Ok(None);
            }
            let n = self.sizer.next_size();
            let mut out = self.ctx.acquire(&self.vars);
            let len = self.fill(&mut out, n);
            if len == 0 {
                self.ctx.release(out);
                continue;
            }
            out.set_sort_var(self.sort_var);
            out.seal(len);
            return Ok(Some(out));
        }
    }

    fn skip(&mut self, key: TermId) -> ExecResult<()> {
        if self.sort_var.is_none() {
            return Err(ExecError::SkipUnsupported { operator: "Scan" });
        }
        self.sizer.on_skip();
        self.cursor.seek(key);
        Ok(())
    }

    fn reset(&mut self) -> ExecResult<()> {
        self.cursor.rewind();
        self.sizer.reset();
        Ok(())
    }

    fn output_vars(&self) -> &[VarId] {
        &self.vars
    }

    fn sort_var(&self) -> Option<VarId> {
        self.sort_var
    }
}
