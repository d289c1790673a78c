//! Vectorized merge join.
//!
//! Each output batch is assembled from join groups: a run of left rows and
//! a run of right rows sharing one key value (the ordinal). Probing walks
//! both sorted inputs with two pointers; building writes the group's cross
//! product one column at a time, left values repeated `right_len` times and
//! the right run repeated `left_len` times. When one input runs out of
//! candidate rows in its current batch, that input is skipped forward to
//! the other input's current key instead of being read row by row.

use std::rc::Rc;

use crate::batch::{ColumnBatch, VarId};
use crate::dictionary::TermId;
use crate::operator::{BatchOperator, BoxedBatchOp, ExecContext, ExecError, ExecResult};

use super::cursor::BatchCursor;

/// Right-side rows of the current ordinal, copied out of their source batches.
#[derive(Debug)]
pub struct RightBuffer {
    columns: Vec<Vec<TermId>>,
    len: usize,
    cap_bytes: usize,
}

impl RightBuffer {
    fn new(width: usize, cap_bytes: usize) -> Self {
        RightBuffer {
            columns: vec![Vec::new(); width],
            len: 0,
            cap_bytes,
        }
    }

    fn clear(&mut self) {
        for c in &mut self.columns {
            c.clear();
        }
        self.len = 0;
    }

    fn bytes(&self) -> usize {
        self.len * self.columns.len().max(1) * std::mem::size_of::<TermId>()
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }
}

/// Left rows `lstart..lend` (selection positions in the current left batch)
/// joined with the whole right buffer; `emitted` product rows already written.
#[derive(Debug, Clone, Copy)]
struct Group {
    key: TermId,
    lstart: usize,
    lend: usize,
    emitted: usize,
}

pub struct VMergeJoin {
    ctx: Rc<ExecContext>,
    left: BoxedBatchOp,
    right: BoxedBatchOp,
    key: VarId,
    vars: Vec<VarId>,
    l_key: usize,
    r_key: usize,
    /// (left column, output column)
    left_map: Vec<(usize, usize)>,
    /// (right column, output column) for right-only vars
    right_map: Vec<(usize, usize)>,
    /// (right column, output column holding the left value) per secondary key
    secondary: Vec<(usize, usize)>,
    lcur: BatchCursor,
    rcur: BatchCursor,
    buffer: RightBuffer,
    scratch: Vec<Vec<TermId>>,
    group: Option<Group>,
    done: bool,
}

impl VMergeJoin {
    /// Joins on `key`; every other variable present on both sides becomes a secondary key.
    pub fn new(ctx: Rc<ExecContext>, left: BoxedBatchOp, right: BoxedBatchOp, key: VarId) -> ExecResult<Self> {
        if left.sort_var() != Some(key) || right.sort_var() != Some(key) {
            return Err(ExecError::UnsortedInput { operator: "MergeJoin" });
        }
        let lv = left.output_vars().to_vec();
        let rv = right.output_vars().to_vec();
        let mut vars = lv.clone();
        let mut right_map = Vec::new();
        let mut secondary = Vec::new();
        for (rc, v) in rv.iter().enumerate() {
            match lv.iter().position(|x| x == v) {
                Some(lc) if *v != key => secondary.push((rc, lc)),
                Some(_) => {}
                None => {
                    right_map.push((rc, vars.len()));
                    vars.push(*v);
                }
            }
        }
        let l_key = lv.iter().position(|v| *v == key).unwrap();
        let r_key = rv.iter().position(|v| *v == key).unwrap();
        let cap = ctx.config.join_buffer_cap;
        Ok(VMergeJoin {
            left_map: (0..lv.len()).map(|c| (c, c)).collect(),
            right_map,
            scratch: vec![Vec::new(); secondary.len()],
            secondary,
            buffer: RightBuffer::new(rv.len(), cap),
            ctx,
            left,
            right,
            key,
            vars,
            l_key,
            r_key,
            lcur: BatchCursor::new(),
            rcur: BatchCursor::new(),
            group: None,
            done: false,
        })
    }

    pub fn secondary_vars(&self) -> Vec<VarId> {
        self.secondary.iter().map(|&(_, oc)| self.vars[oc]).collect()
    }

    /// Copies the right run for `key` into the buffer, following it into later right batches.
    fn stage_right(&mut self, key: TermId) -> ExecResult<()> {
        self.buffer.clear();
        loop {
            let end = self.rcur.run_end(self.r_key, key);
            let b = self.rcur.batch();
            let sel = &b.selection().as_slice()[self.rcur.pos..end];
            for (c, col) in self.buffer.columns.iter_mut().enumerate() {
                let src = b.column(c);
                col.extend(sel.iter().map(|&r| src[r as usize]));
            }
            self.buffer.len += sel.len();
            if self.buffer.bytes() > self.buffer.cap_bytes {
                return Err(ExecError::QueryMemoryExceeded {
                    what: "merge join buffer",
                    used: self.buffer.bytes(),
                    cap: self.buffer.cap_bytes,
                });
            }
            self.rcur.pos = end;
            if self.rcur.remaining() > 0 {
                return Ok(());
            }
            // the run reached the end of the batch; it may continue in the next one
            if !self.rcur.fill(&self.ctx, self.right.as_mut())? || self.rcur.key(self.r_key) != key {
                return Ok(());
            }
        }
    }

    /// Writes up to `room` rows of the current group's product into `out`.
    fn build(&mut self, out: &mut ColumnBatch, room: usize) -> usize {
        let g = self.group.as_mut().unwrap();
        let rlen = self.buffer.len;
        let total = (g.lend - g.lstart) * rlen;
        let m = (total - g.emitted).min(room);
        let (o0, o1) = (g.emitted, g.emitted + m);
        let lb = self.lcur.batch.as_ref().unwrap();
        let sel = &lb.selection().as_slice()[g.lstart..g.lend];

        // left columns: each value repeated rlen times
        for &(lc, oc) in &self.left_map {
            let src = lb.column(lc);
            let dst = out.column_mut(oc);
            let mut o = o0;
            while o < o1 {
                let li = o / rlen;
                let stop = ((li + 1) * rlen).min(o1);
                dst.extend(std::iter::repeat_n(src[sel[li] as usize], stop - o));
                o = stop;
            }
        }
        // right columns: the whole run repeated once per left row
        let copy_runs = |src: &[TermId], dst: &mut Vec<TermId>| {
            let mut o = o0;
            while o < o1 {
                let ri = o % rlen;
                let n = (rlen - ri).min(o1 - o);
                dst.extend_from_slice(&src[ri..ri + n]);
                o += n;
            }
        };
        for &(rc, oc) in &self.right_map {
            copy_runs(&self.buffer.columns[rc], out.column_mut(oc));
        }
        for (s, &(rc, _)) in self.secondary.iter().enumerate() {
            copy_runs(&self.buffer.columns[rc], &mut self.scratch[s]);
        }
        g.emitted = o1;
        m
    }

    fn finish(&mut self) {
        self.done = true;
        self.group = None;
        self.lcur.clear(&self.ctx);
        self.rcur.clear(&self.ctx);
    }

    fn produce(&mut self) -> ExecResult<Option<ColumnBatch>> {
        if self.done {
            return Ok(None);
        }
        let cap = self.ctx.config.batch_max;
        let mut out = self.ctx.acquire(&self.vars);
        for s in &mut self.scratch {
            s.clear();
        }
        let mut n = 0;
        while n < cap {
            if let Some(g) = self.group {
                if g.emitted < (g.lend - g.lstart) * self.buffer.len {
                    n += self.build(&mut out, cap - n);
                    continue;
                }
                // this left run is done; the group may continue in the next left batch
                self.lcur.pos = g.lend;
                if !self.lcur.fill(&self.ctx, self.left.as_mut())? {
                    self.finish();
                    break;
                }
                if self.lcur.key(self.l_key) == g.key {
                    let lend = self.lcur.run_end(self.l_key, g.key);
                    self.group = Some(Group {
                        key: g.key,
                        lstart: self.lcur.pos,
                        lend,
                        emitted: 0,
                    });
                } else {
                    self.group = None;
                }
                continue;
            }

            if !self.lcur.fill(&self.ctx, self.left.as_mut())? || !self.rcur.fill(&self.ctx, self.right.as_mut())? {
                self.finish();
                break;
            }
            let lk = self.lcur.key(self.l_key);
            let rk = self.rcur.key(self.r_key);
            if lk.is_null() {
                self.lcur.advance_to(self.l_key, TermId(1));
                continue;
            }
            if rk.is_null() {
                self.rcur.advance_to(self.r_key, TermId(1));
                continue;
            }
            if lk < rk {
                self.lcur.skip(&self.ctx, self.l_key, self.left.as_mut(), rk)?;
                continue;
            }
            if rk < lk {
                self.rcur.skip(&self.ctx, self.r_key, self.right.as_mut(), lk)?;
                continue;
            }
            self.stage_right(lk)?;
            let lend = self.lcur.run_end(self.l_key, lk);
            self.group = Some(Group {
                key: lk,
                lstart: self.lcur.pos,
                lend,
                emitted: 0,
            });
        }

        if n == 0 {
            self.ctx.release(out);
            return Ok(None);
        }
        out.set_sort_var(Some(self.key));
        out.seal(n);
        for (s, &(_, oc)) in self.secondary.iter().enumerate() {
            let scratch = &self.scratch[s];
            out.retain_by(|cols, r| {
                let v = cols[oc][r];
                !v.is_null() && v == scratch[r]
            });
        }
        Ok(Some(out))
    }
}

impl BatchOperator for VMergeJoin {
    fn next_batch(&mut self) -> ExecResult<Option<ColumnBatch>> {
        loop {
            match self.produce()? {
                Some(b) if b.active_count() == 0 => self.ctx.release(b),
                other => return Ok(other),
            }
        }
    }

    fn skip(&mut self, key: TermId) -> ExecResult<()> {
        if self.done {
            return Ok(());
        }
        if let Some(g) = self.group {
            if g.key >= key {
                return Ok(());
            }
            self.group = None;
        }
        self.lcur.skip(&self.ctx, self.l_key, self.left.as_mut(), key)?;
        self.rcur.skip(&self.ctx, self.r_key, self.right.as_mut(), key)
    }

    fn reset(&mut self) -> ExecResult<()> {
        self.lcur.clear(&self.ctx);
        self.rcur.clear(&self.ctx);
        self.buffer.clear();
        self.group = None;
        self.done = false;
        self.left.reset()?;
        self.right.reset()
    }

    fn output_vars(&self) -> &[VarId] {
        &self.vars
    }

    fn sort_var(&self) -> Option<VarId> {
        Some(self.key)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adapters::test_support::*;
    use proptest::prelude::*;

    fn drain(op: &mut dyn BatchOperator) -> Vec<Vec<TermId>> {
        let mut out = Vec::new();
        while let Some(b) = op.next_batch().unwrap() {
            b.check_invariants().unwrap();
            out.extend(b.pivot_to_rows());
        }
        out
    }

    fn nested_loop(l: &[Vec<TermId>], r: &[Vec<TermId>], lv: &[VarId], rv: &[VarId]) -> Vec<Vec<TermId>> {
        let mut out = Vec::new();
        for a in l {
            for b in r {
                let ok = rv.iter().enumerate().all(|(j, v)| match lv.iter().position(|x| x == v) {
                    Some(i) => !a[i].is_null() && a[i] == b[j],
                    None => true,
                });
                if ok {
                    let mut row = a.clone();
                    for (j, v) in rv.iter().enumerate() {
                        if !lv.contains(v) {
                            row.push(b[j]);
                        }
                    }
                    out.push(row);
                }
            }
        }
        out
    }

    fn sorted(mut v: Vec<Vec<TermId>>) -> Vec<Vec<TermId>> {
        v.sort();
        v
    }

    #[test]
    fn two_by_three_group_expands() {
        let ctx = ctx_with(3, 16);
        let (k, a, b) = (VarId(0), VarId(1), VarId(2));
        let left = VecBatchSource::new(ctx.clone(), vec![k, a], vec![t(&[1, 10]), t(&[2, 20]), t(&[2, 21])], 8, Some(k));
        let right = VecBatchSource::new(ctx.clone(), vec![k, b], vec![t(&[2, 30]), t(&[2, 31]), t(&[2, 32])], 8, Some(k));
        let mut j = VMergeJoin::new(ctx, Box::new(left), Box::new(right), k).unwrap();
        let rows = drain(&mut j);
        assert_eq!(rows.len(), 6);
        let a_col: Vec<u64> = rows.iter().map(|r| r[1].0).collect();
        let b_col: Vec<u64> = rows.iter().map(|r| r[2].0).collect();
        assert_eq!(a_col, [20, 20, 20, 21, 21, 21]);
        assert_eq!(b_col, [30, 31, 32, 30, 31, 32]);
    }

    #[test]
    fn one_by_one_concatenates() {
        let ctx = ctx_with(3, 16);
        let (k, a, b) = (VarId(0), VarId(1), VarId(2));
        let left = VecBatchSource::new(ctx.clone(), vec![k, a], vec![t(&[5, 1])], 8, Some(k));
        let right = VecBatchSource::new(ctx.clone(), vec![k, b], vec![t(&[5, 2])], 8, Some(k));
        let mut j = VMergeJoin::new(ctx, Box::new(left), Box::new(right), k).unwrap();
        assert_eq!(drain(&mut j), vec![t(&[5, 1, 2])]);
    }

    #[test]
    fn skips_left_when_it_falls_behind() {
        let ctx = ctx_with(2, 16);
        let k = VarId(0);
        let lrows: Vec<_> = (1..=10).map(|i| t(&[i])).chain([t(&[50])]).collect();
        let left = VecBatchSource::new(ctx.clone(), vec![k], lrows, 10, Some(k));
        let lc = left.counters.clone();
        let right = VecBatchSource::new(ctx.clone(), vec![k], vec![t(&[50]), t(&[60])], 8, Some(k));
        let mut j = VMergeJoin::new(ctx, Box::new(left), Box::new(right), k).unwrap();
        assert_eq!(drain(&mut j), vec![t(&[50])]);
        assert_eq!(lc.borrow().skips, vec![TermId(50)]);
    }

    #[test]
    fn fully_matched_batch_uses_plain_next() {
        let ctx = ctx_with(2, 16);
        let k = VarId(0);
        let rows: Vec<_> = (1..=6).map(|i| t(&[i])).collect();
        let left = VecBatchSource::new(ctx.clone(), vec![k], rows.clone(), 3, Some(k));
        let right = VecBatchSource::new(ctx.clone(), vec![k], rows.clone(), 3, Some(k));
        let (lc, rc) = (left.counters.clone(), right.counters.clone());
        let mut j = VMergeJoin::new(ctx, Box::new(left), Box::new(right), k).unwrap();
        assert_eq!(drain(&mut j), rows);
        assert_eq!(lc.borrow().skip_calls + rc.borrow().skip_calls, 0);
    }

    #[test]
    fn secondary_key_mismatch_removed() {
        let ctx = ctx_with(3, 16);
        let (k, s, x) = (VarId(0), VarId(1), VarId(2));
        let left = VecBatchSource::new(ctx.clone(), vec![k, s], vec![t(&[1, 7]), t(&[1, 8])], 8, Some(k));
        let right = VecBatchSource::new(ctx.clone(), vec![k, s, x], vec![t(&[1, 7, 9])], 8, Some(k));
        let mut j = VMergeJoin::new(ctx, Box::new(left), Box::new(right), k).unwrap();
        assert_eq!(j.secondary_vars(), vec![s]);
        assert_eq!(drain(&mut j), vec![t(&[1, 7, 9])]);
    }

    #[test]
    fn buffer_cap_enforced() {
        let mut ctx = ctx_with(1, 16);
        Rc::get_mut(&mut ctx).unwrap().config.join_buffer_cap = 64;
        let k = VarId(0);
        let rows: Vec<_> = (0..20).map(|_| t(&[3])).collect();
        let left = VecBatchSource::new(ctx.clone(), vec![k], vec![t(&[3])], 8, Some(k));
        let right = VecBatchSource::new(ctx.clone(), vec![k], rows, 8, Some(k));
        let mut j = VMergeJoin::new(ctx, Box::new(left), Box::new(right), k).unwrap();
        assert!(matches!(j.next_batch(), Err(ExecError::QueryMemoryExceeded { .. })));
    }

    #[test]
    fn lazy_child_pulls() {
        // one output batch of 4 rows needs only the first batch of each side
        let ctx = ctx_with(2, 4);
        let k = VarId(0);
        let rows: Vec<_> = (1..=100).map(|i| t(&[i])).collect();
        let left = VecBatchSource::new(ctx.clone(), vec![k], rows.clone(), 8, Some(k));
        let right = VecBatchSource::new(ctx.clone(), vec![k], rows, 8, Some(k));
        let (lc, rc) = (left.counters.clone(), right.counters.clone());
        let mut j = VMergeJoin::new(ctx, Box::new(left), Box::new(right), k).unwrap();
        let b = j.next_batch().unwrap().unwrap();
        assert_eq!(b.active_count(), 4);
        assert_eq!(lc.borrow().next_calls, 1);
        assert_eq!(rc.borrow().next_calls, 1);
    }

    fn sorted_rows(max_key: u64, width: usize) -> impl Strategy<Value = Vec<Vec<TermId>>> {
        proptest::collection::vec(proptest::collection::vec(1..=max_key, width), 0..40).prop_map(|mut rows| {
            rows.sort_by_key(|r| r[0]);
            rows.into_iter().map(|r| t(&r)).collect()
        })
    }

    proptest! {
        #[test]
        fn equals_nested_loop(
            l in sorted_rows(8, 2),
            r in sorted_rows(8, 3),
            lchunk in 1usize..6,
            rchunk in 1usize..6,
            cap in 1usize..9,
            two_keys in any::<bool>(),
        ) {
            let ctx = ctx_with(4, cap);
            let lv = vec![VarId(0), VarId(1)];
            let rv = if two_keys { vec![VarId(0), VarId(1), VarId(2)] } else { vec![VarId(0), VarId(2), VarId(3)] };
            let left = VecBatchSource::new(ctx.clone(), lv.clone(), l.clone(), lchunk, Some(VarId(0)));
            let right = VecBatchSource::new(ctx.clone(), rv.clone(), r.clone(), rchunk, Some(VarId(0)));
            let (lc, rc) = (left.counters.clone(), right.counters.clone());
            let mut j = VMergeJoin::new(ctx, Box::new(left), Box::new(right), VarId(0)).unwrap();
            let got = drain(&mut j);
            prop_assert!(got.windows(2).all(|w| w[0][0] <= w[1][0]));
            prop_assert_eq!(sorted(got), sorted(nested_loop(&l, &r, &lv, &rv)));
            for c in [lc, rc] {
                let skips = c.borrow().skips.clone();
                prop_assert!(skips.windows(2).all(|w| w[0] <= w[1]));
            }
        }

        #[test]
        fn skip_from_parent_matches_oracle(
            l in sorted_rows(10, 2),
            r in sorted_rows(10, 2),
            cap in 1usize..6,
            targets in proptest::collection::vec(1u64..12, 1..4),
        ) {
            let ctx = ctx_with(3, cap);
            let lv = vec![VarId(0), VarId(1)];
            let rv = vec![VarId(0), VarId(2)];
            let left = VecBatchSource::new(ctx.clone(), lv.clone(), l.clone(), 3, Some(VarId(0)));
            let right = VecBatchSource::new(ctx.clone(), rv.clone(), r.clone(), 2, Some(VarId(0)));
            let mut j = VMergeJoin::new(ctx.clone(), Box::new(left), Box::new(right), VarId(0)).unwrap();
            let mut targets = targets;
            targets.sort();
            let full = nested_loop(&l, &r, &lv, &rv);
            let mut got = Vec::new();
            for tk in &targets {
                j.skip(TermId(*tk)).unwrap();
                if let Some(b) = j.next_batch().unwrap() {
                    for row in b.pivot_to_rows() {
                        prop_assert!(row[0] >= TermId(*tk));
                        got.push(row);
                    }
                    ctx.release(b);
                }
            }
            got.extend(drain(&mut j));
            // every emitted row is a join result, and rows from the last target on are complete
            let last = TermId(*targets.last().unwrap());
            for row in &got {
                prop_assert!(full.contains(row));
            }
            let tail_expected: Vec<_> = full.iter().filter(|r| r[0] >= last).cloned().collect();
            let tail_got: Vec<_> = got.iter().filter(|r| r[0] >= last).cloned().collect();
            prop_assert_eq!(sorted(tail_got), sorted(tail_expected));
        }
    }
}
