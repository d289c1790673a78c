//! Boundary operators between the batch and row executors.

use std::rc::Rc;

use crate::batch::{ColumnBatch, VarId};
use crate::dictionary::TermId;
use crate::operator::{
    sort_column, BatchOperator, BoxedBatchOp, BoxedRowOp, ExecContext, ExecResult, RowOperator, RowTuple,
};

/// Emits the active rows of each child batch one at a time.
pub struct BatchToRow {
    ctx: Rc<ExecContext>,
    child: BoxedBatchOp,
    vars: Vec<VarId>,
    current: Option<ColumnBatch>,
    // index into the current batch's selection vector
    pos: usize,
    done: bool,
}

impl BatchToRow {
    pub fn new(ctx: Rc<ExecContext>, child: BoxedBatchOp) -> Self {
        let vars = child.output_vars().to_vec();
        BatchToRow {
            ctx,
            child,
            vars,
            current: None,
            pos: 0,
            done: false,
        }
    }

    fn drop_current(&mut self) {
        if let Some(b) = self.current.take() {
            self.ctx.release(b);
        }
        self.pos = 0;
    }
}

impl RowOperator for BatchToRow {
    fn next_row(&mut self) -> ExecResult<Option<RowTuple>> {
        loop {
            if self.done {
                return Ok(None);
            }
            if let Some(b) = &self.current {
                if self.pos < b.active_count() {
                    let r = b.selection().as_slice()[self.pos] as usize;
                    self.pos += 1;
                    let mut row = vec![TermId::NULL; self.ctx.var_count()];
                    for (i, v) in self.vars.iter().enumerate() {
                        row[v.index()] = b.column(i)[r];
                    }
                    return Ok(Some(row));
                }
                self.drop_current();
            }
            match self.child.next_batch()? {
                Some(b) => self.current = Some(b),
                None => self.done = true,
            }
        }
    }

    /// Buffered rows below `key` are dropped; the child is only skipped once
    /// the buffered batch runs out, since everything it would return next is
    /// already `>=` the buffered keys.
    fn skip(&mut self, key: TermId) -> ExecResult<()> {
        let col = sort_column(&self.vars, self.child.sort_var(), "BatchToRow")?;
        if self.done {
            return Ok(());
        }
        if let Some(b) = &self.current {
            let sel = b.selection().as_slice();
            let c = b.column(col);
            self.pos += sel[self.pos..].partition_point(|&r| c[r as usize] < key);
            if self.pos < b.active_count() {
                return Ok(());
            }
            self.drop_current();
        }
        self.child.skip(key)
    }

    fn reset(&mut self) -> ExecResult<()> {
        self.drop_current();
        self.done = false;
        self.child.reset()
    }

    fn output_vars(&self) -> &[VarId] {
        &self.vars
    }

    fn sort_var(&self) -> Option<VarId> {
        self.child.sort_var()
    }
}

/// Packs child rows into batches of at most `batch_max` rows.
pub struct RowToBatch {
    ctx: Rc<ExecContext>,
    child: BoxedRowOp,
    vars: Vec<VarId>,
    done: bool,
}

impl RowToBatch {
    pub fn new(ctx: Rc<ExecContext>, child: BoxedRowOp) -> Self {
        let vars = child.output_vars().to_vec();
        RowToBatch {
            ctx,
            child,
            vars,
            done: false,
        }
    }
}

impl BatchOperator for RowToBatch {
    fn next_batch(&mut self) -> ExecResult<Option<ColumnBatch>> {
        if self.done {
            return Ok(None);
        }
        let cap = self.ctx.config.batch_max;
        let mut b = self.ctx.acquire(&self.vars);
        let mut n = 0;
        while n < cap {
            match self.child.next_row()? {
                Some(row) => {
                    for (i, v) in self.vars.iter().enumerate() {
                        b.column_mut(i).push(row[v.index()]);
                    }
                    n += 1;
                }
                None => {
                    self.done = true;
                    break;
                }
            }
        }
        if n == 0 {
            self.ctx.release(b);
            return Ok(None);
        }
        b.set_sort_var(self.child.sort_var());
        b.seal(n);
        Ok(Some(b))
    }

    fn skip(&mut self, key: TermId) -> ExecResult<()> {
        sort_column(&self.vars, self.child.sort_var(), "RowToBatch")?;
        if self.done {
            return Ok(());
        }
        self.child.skip(key)
    }

    fn reset(&mut self) -> ExecResult<()> {
        self.done = false;
        self.child.reset()
    }

    fn output_vars(&self) -> &[VarId] {
        &self.vars
    }

    fn sort_var(&self) -> Option<VarId> {
        self.child.sort_var()
    }
}

pub mod test_support {
    //! In-memory operator sources for tests and benchmarks.
    use super::*;
    use crate::operator::ExecConfig;
    use crate::storage::TripleStore;
    use std::sync::Arc;

    pub fn ctx_with(var_count: usize, batch_max: usize) -> Rc<ExecContext> {
        let mut st = TripleStore::new();
        st.freeze();
        let cfg = ExecConfig {
            batch_max,
            ..ExecConfig::default()
        };
        Rc::new(ExecContext::new(Arc::new(st), cfg, var_count))
    }

    /// Batch source over fixed rows, split into chunks of `chunk` rows; supports skip when sorted.
    pub struct VecBatchSource {
        pub ctx: Rc<ExecContext>,
        pub vars: Vec<VarId>,
        pub rows: Vec<Vec<TermId>>,
        pub chunk: usize,
        pub pos: usize,
        pub sort_var: Option<VarId>,
        pub counters: Rc<std::cell::RefCell<SourceCounters>>,
    }

    /// Call counters readable after the source has been boxed into a plan.
    #[derive(Debug, Default, Clone)]
    pub struct SourceCounters {
        pub next_calls: usize,
        pub skip_calls: usize,
        pub rows_pulled: usize,
        pub skips: Vec<TermId>,
    }

    impl VecBatchSource {
        pub fn new(ctx: Rc<ExecContext>, vars: Vec<VarId>, rows: Vec<Vec<TermId>>, chunk: usize, sort_var: Option<VarId>) -> Self {
            VecBatchSource {
                ctx,
                vars,
                rows,
                chunk,
                pos: 0,
                sort_var,
                counters: Rc::default(),
            }
        }
    }

    impl BatchOperator for VecBatchSource {
        fn next_batch(&mut self) -> ExecResult<Option<ColumnBatch>> {
            self.counters.borrow_mut().next_calls += 1;
            if self.pos >= self.rows.len() {
                return Ok(None);
            }
            let end = (self.pos + self.chunk).min(self.rows.len());
            let mut b = self.ctx.acquire(&self.vars);
            for r in &self.rows[self.pos..end] {
                b.push_row(r);
            }
            self.counters.borrow_mut().rows_pulled += end - self.pos;
            self.pos = end;
            b.set_sort_var(self.sort_var);
            b.check_invariants().unwrap();
            Ok(Some(b))
        }

        fn skip(&mut self, key: TermId) -> ExecResult<()> {
            let col = sort_column(&self.vars, self.sort_var, "VecBatchSource")?;
            let mut c = self.counters.borrow_mut();
            c.skip_calls += 1;
            c.skips.push(key);
            while self.pos < self.rows.len() && self.rows[self.pos][col] < key {
                self.pos += 1;
            }
            Ok(())
        }

        fn reset(&mut self) -> ExecResult<()> {
            self.pos = 0;
            Ok(())
        }

        fn output_vars(&self) -> &[VarId] {
            &self.vars
        }

        fn sort_var(&self) -> Option<VarId> {
            self.sort_var
        }
    }

    /// Row source over fixed full-width rows.
    pub struct VecRowSource {
        pub vars: Vec<VarId>,
        pub rows: Vec<RowTuple>,
        pub pos: usize,
        pub sort_var: Option<VarId>,
    }

    impl RowOperator for VecRowSource {
        fn next_row(&mut self) -> ExecResult<Option<RowTuple>> {
            let r = self.rows.get(self.pos).cloned();
            self.pos += 1;
            Ok(r)
        }

        fn skip(&mut self, key: TermId) -> ExecResult<()> {
            let v = self.sort_var.ok_or(crate::operator::ExecError::SkipUnsupported { operator: "VecRowSource" })?;
            while self.pos < self.rows.len() && self.rows[self.pos][v.index()] < key {
                self.pos += 1;
            }
            Ok(())
        }

        fn reset(&mut self) -> ExecResult<()> {
            self.pos = 0;
            Ok(())
        }

        fn output_vars(&self) -> &[VarId] {
            &self.vars
        }

        fn sort_var(&self) -> Option<VarId> {
            self.sort_var
        }
    }

    pub fn t(v: &[u64]) -> Vec<TermId> {
        v.iter().map(|&x| TermId(x)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::test_support::*;
    use super::*;
    use proptest::prelude::*;

    fn drain_rows(op: &mut dyn RowOperator) -> Vec<RowTuple> {
        let mut out = Vec::new();
        while let Some(r) = op.next_row().unwrap() {
            out.push(r);
        }
        out
    }

    #[test]
    fn batch_to_row_yields_active_rows_then_stays_exhausted() {
        let ctx = ctx_with(1, 8);
        let vars = vec![VarId(0)];
        let src = VecBatchSource::new(ctx.clone(), vars, vec![t(&[1]), t(&[2]), t(&[3])], 8, None);
        let mut a = BatchToRow::new(ctx, Box::new(src));
        assert_eq!(drain_rows(&mut a), vec![t(&[1]), t(&[2]), t(&[3])]);
        assert_eq!(a.next_row().unwrap(), None);
    }

    #[test]
    fn batch_to_row_skip() {
        let ctx = ctx_with(1, 8);
        let vars = vec![VarId(0)];
        let rows: Vec<_> = (1..=20).map(|i| t(&[i])).collect();
        let src = VecBatchSource::new(ctx.clone(), vars, rows, 4, Some(VarId(0)));
        let mut a = BatchToRow::new(ctx, Box::new(src));
        assert_eq!(a.next_row().unwrap(), Some(t(&[1])));
        a.skip(TermId(3)).unwrap();
        assert_eq!(a.next_row().unwrap(), Some(t(&[3])));
        a.skip(TermId(11)).unwrap();
        assert_eq!(a.next_row().unwrap(), Some(t(&[11])));
        a.skip(TermId(100)).unwrap();
        assert_eq!(a.next_row().unwrap(), None);
    }

    #[test]
    fn skip_on_unsorted_is_an_error() {
        let ctx = ctx_with(1, 8);
        let src = VecBatchSource::new(ctx.clone(), vec![VarId(0)], vec![t(&[1])], 4, None);
        let mut a = BatchToRow::new(ctx, Box::new(src));
        assert!(a.skip(TermId(1)).is_err());
    }

    #[test]
    fn row_to_batch_chunks() {
        let ctx = ctx_with(1, 4);
        let src = VecRowSource {
            vars: vec![VarId(0)],
            rows: (1..=5).map(|i| t(&[i])).collect(),
            pos: 0,
            sort_var: None,
        };
        let mut a = RowToBatch::new(ctx, Box::new(src));
        assert_eq!(a.next_batch().unwrap().unwrap().active_count(), 4);
        assert_eq!(a.next_batch().unwrap().unwrap().active_count(), 1);
        assert!(a.next_batch().unwrap().is_none());
        assert!(a.next_batch().unwrap().is_none());

        let ctx = ctx_with(1, 4);
        let empty = VecRowSource { vars: vec![VarId(0)], rows: vec![], pos: 0, sort_var: None };
        assert!(RowToBatch::new(ctx, Box::new(empty)).next_batch().unwrap().is_none());
    }

    proptest! {
        #[test]
        fn round_trip_preserves_rows(vals in proptest::collection::vec((1u64..50, 1u64..50), 0..200), chunk in 1usize..20, cap in 1usize..20) {
            let ctx = ctx_with(2, cap);
            let vars = vec![VarId(0), VarId(1)];
            let rows: Vec<RowTuple> = vals.iter().map(|(a, b)| t(&[*a, *b])).collect();
            let src = VecBatchSource::new(ctx.clone(), vars, rows.clone(), chunk, None);
            let back = RowToBatch::new(ctx.clone(), Box::new(BatchToRow::new(ctx.clone(), Box::new(src))));
            let mut again = BatchToRow::new(ctx, Box::new(back));
            prop_assert_eq!(drain_rows(&mut again), rows);
        }

        #[test]
        fn skip_matches_materialized_oracle(mut keys in proptest::collection::vec(1u64..100, 0..100), chunk in 1usize..10, pre in 0usize..20, k in 0u64..110) {
            keys.sort();
            let ctx = ctx_with(1, 16);
            let rows: Vec<RowTuple> = keys.iter().map(|x| t(&[*x])).collect();
            let src = VecBatchSource::new(ctx.clone(), vec![VarId(0)], rows.clone(), chunk, Some(VarId(0)));
            let mut a = BatchToRow::new(ctx, Box::new(src));
            let mut consumed = 0;
            for _ in 0..pre {
                if a.next_row().unwrap().is_some() { consumed += 1; }
            }
            a.skip(TermId(k)).unwrap();
            let expected: Vec<RowTuple> = rows[consumed..].iter().filter(|r| r[0] >= TermId(k)).cloned().collect();
            prop_assert_eq!(drain_rows(&mut a), expected);
        }
    }
}
