use std::rc::Rc;

use crate::aggregate::{empty_global_value, AggFunc, AggState, AggregateSpec};
use crate::batch::{ColumnBatch, VarId};
use crate::dictionary::TermId;
use crate::operator::{BatchOperator, BoxedBatchOp, ExecContext, ExecError, ExecResult};

use super::cursor::BatchCursor;

/// Streaming aggregation over input sorted by the (single) group variable.
///
/// Without a group variable the whole input forms one group and exactly one
/// row is produced, even for empty input.
pub struct VGroup {
    ctx: Rc<ExecContext>,
    child: BoxedBatchOp,
    group_var: Option<VarId>,
    aggs: Vec<AggregateSpec>,
    vars: Vec<VarId>,
    key_col: Option<usize>,
    arg_cols: Vec<Option<usize>>,
    cur: BatchCursor,
    open: Option<(TermId, Vec<AggState>)>,
    last_key: Option<TermId>,
    done: bool,
}

impl VGroup {
    pub fn new(ctx: Rc<ExecContext>, child: BoxedBatchOp, group_var: Option<VarId>, aggs: Vec<AggregateSpec>) -> ExecResult<Self> {
        let in_vars = child.output_vars();
        let key_col = match group_var {
            Some(g) => {
                if child.sort_var() != Some(g) {
                    return Err(ExecError::UnsortedInput { operator: "Group" });
                }
                in_vars.iter().position(|v| *v == g)
            }
            None => None,
        };
        let arg_cols = aggs
            .iter()
            .map(|a| a.arg.and_then(|v| in_vars.iter().position(|x| *x == v)))
            .collect();
        let vars = group_var.into_iter().chain(aggs.iter().map(|a| a.out)).collect();
        Ok(VGroup {
            ctx,
            child,
            group_var,
            aggs,
            vars,
            key_col,
            arg_cols,
            cur: BatchCursor::new(),
            open: None,
            last_key: None,
            done: false,
        })
    }

    fn new_states(&self) -> Vec<AggState> {
        self.aggs.iter().map(|a| AggState::new(a.func)).collect()
    }

    fn emit(&self, out: &mut ColumnBatch, key: TermId, states: &[AggState]) {
        let mut row = Vec::with_capacity(self.vars.len());
        if self.group_var.is_some() {
            row.push(key);
        }
        row.extend(states.iter().map(|s| s.finalize(&self.ctx)));
        out.push_row(&row);
    }

    /// Folds active positions `from..to` of the current batch into `states`.
    fn accumulate(&self, states: &mut [AggState], from: usize, to: usize) {
        let b = self.cur.batch();
        let sel = &b.selection().as_slice()[from..to];
        for ((spec, state), col) in self.aggs.iter().zip(states.iter_mut()).zip(&self.arg_cols) {
            match (spec.func, col) {
                (AggFunc::CountAll, _) => state.add_count(sel.len() as u64),
                (_, Some(c)) => {
                    let values = b.column(*c);
                    for &r in sel {
                        state.update(spec.func, &self.ctx, values[r as usize]);
                    }
                }
                // argument never bound in the input
                (_, None) => {}
            }
        }
    }
}

impl BatchOperator for VGroup {
    fn next_batch(&mut self) -> ExecResult<Option<ColumnBatch>> {
        if self.done {
            return Ok(None);
        }
        let cap = self.ctx.config.batch_max;
        let mut out = self.ctx.acquire(&self.vars);
        while out.active_count() < cap {
            if !self.cur.fill(&self.ctx, self.child.as_mut())? {
                match self.open.take() {
                    Some((k, states)) => self.emit(&mut out, k, &states),
                    None if self.group_var.is_none() => {
                        let row: Vec<TermId> = self.aggs.iter().map(|a| empty_global_value(&self.ctx, a.func)).collect();
                        out.push_row(&row);
                    }
                    None => {}
                }
                self.done = true;
                self.cur.clear(&self.ctx);
                break;
            }
            let (key, end) = match self.key_col {
                Some(c) => {
                    let k = self.cur.key(c);
                    (k, self.cur.run_end(c, k))
                }
                None => (TermId::NULL, self.cur.batch().active_count()),
            };
            let same = matches!(&self.open, Some((k, _)) if *k == key);
            if !same {
                if self.last_key.is_some_and(|l| key < l) {
                    return Err(ExecError::UnsortedInput { operator: "Group" });
                }
                if let Some((k, states)) = self.open.take() {
                    self.emit(&mut out, k, &states);
                }
                self.open = Some((key, self.new_states()));
                self.last_key = Some(key);
            }
            let mut states = self.open.take().unwrap().1;
            self.accumulate(&mut states, self.cur.pos, end);
            self.open = Some((key, states));
            self.cur.pos = end;
        }
        if out.active_count() == 0 {
            self.ctx.release(out);
            return Ok(None);
        }
        out.set_sort_var(self.group_var);
        Ok(Some(out))
    }

    fn skip(&mut self, key: TermId) -> ExecResult<()> {
        let Some(c) = self.key_col else {
            return Err(ExecError::SkipUnsupported { operator: "Group" });
        };
        if matches!(&self.open, Some((k, _)) if *k >= key) {
            return Ok(());
        }
        self.open = None;
        self.cur.skip(&self.ctx, c, self.child.as_mut(), key)
    }

    fn reset(&mut self) -> ExecResult<()> {
        self.cur.clear(&self.ctx);
        self.open = None;
        self.last_key = None;
        self.done = false;
        self.child.reset()
    }

    fn output_vars(&self) -> &[VarId] {
        &self.vars
    }

    fn sort_var(&self) -> Option<VarId> {
        self.group_var
    }
}
