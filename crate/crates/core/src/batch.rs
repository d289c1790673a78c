//! Columnar solution batches.
//!
//! A [`ColumnBatch`] holds one dense `TermId` column per variable plus a
//! [`SelectionVector`] listing the active rows. Operators that drop rows
//! only shrink the selection vector; the columns are never compacted.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::dictionary::TermId;

/// Default upper bound on rows per batch.
pub const DEFAULT_BATCH_MAX: usize = 512;

/// Query-local variable identifier, dense from 0.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct VarId(pub u16);

impl VarId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Sorted, duplicate-free list of active row positions.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SelectionVector(Vec<u32>);

impl SelectionVector {
    pub fn full(len: usize) -> Self {
        SelectionVector((0..len as u32).collect())
    }

    pub fn from_indices(indices: Vec<u32>) -> Self {
        let sv = SelectionVector(indices);
        sv.debug_check();
        sv
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.0.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    #[inline]
    pub fn as_slice(&self) -> &[u32] {
        &self.0
    }

    pub fn reset_full(&mut self, len: usize) {
        self.0.clear();
        self.0.extend(0..len as u32);
    }

    pub fn clear(&mut self) {
        self.0.clear();
    }

    pub fn retain(&mut self, mut keep: impl FnMut(usize) -> bool) {
        self.0.retain(|&i| keep(i as usize));
        self.debug_check();
    }

    /// Keeps only entries `from..to` of the vector.
    pub fn keep_range(&mut self, from: usize, to: usize) {
        self.0.truncate(to);
        self.0.drain(..from.min(to));
        self.debug_check();
    }

    pub fn is_strictly_increasing(&self) -> bool {
        self.0.windows(2).all(|w| w[0] < w[1])
    }

    #[inline]
    fn debug_check(&self) {
        debug_assert!(self.is_strictly_increasing(), "selection vector must be strictly increasing");
    }
}

#[derive(Clone, Debug)]
pub struct ColumnBatch {
    vars: Vec<VarId>,
    columns: Vec<Vec<TermId>>,
    len: usize,
    sel: SelectionVector,
    sort_var: Option<VarId>,
    capacity: usize,
}

impl ColumnBatch {
    pub fn new(vars: &[VarId], capacity: usize) -> Self {
        ColumnBatch {
            vars: vars.to_vec(),
            columns: vars.iter().map(|_| Vec::with_capacity(capacity)).collect(),
            len: 0,
            sel: SelectionVector::default(),
            sort_var: None,
            capacity,
        }
    }

    /// Builds a batch from whole columns with a full selection vector.
    pub fn from_columns(vars: &[VarId], columns: Vec<Vec<TermId>>) -> Self {
        assert_eq!(vars.len(), columns.len());
        let len = columns.first().map_or(0, Vec::len);
        assert!(columns.iter().all(|c| c.len() == len), "columns must have equal length");
        ColumnBatch {
            vars: vars.to_vec(),
            columns,
            len,
            sel: SelectionVector::full(len),
            sort_var: None,
            capacity: len,
        }
    }

    pub fn vars(&self) -> &[VarId] {
        &self.vars
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Physical row count, including inactive rows.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.sel.is_empty()
    }

    /// Number of active rows.
    #[inline]
    pub fn active_count(&self) -> usize {
        self.sel.len()
    }

    pub fn selection(&self) -> &SelectionVector {
        &self.sel
    }

    pub fn selection_mut(&mut self) -> &mut SelectionVector {
        &mut self.sel
    }

    pub fn sort_var(&self) -> Option<VarId> {
        self.sort_var
    }

    pub fn set_sort_var(&mut self, v: Option<VarId>) {
        self.sort_var = v;
    }

    pub fn column_index(&self, var: VarId) -> Option<usize> {
        self.vars.iter().position(|v| *v == var)
    }

    #[inline]
    pub fn column(&self, idx: usize) -> &[TermId] {
        &self.columns[idx]
    }

    pub fn column_of(&self, var: VarId) -> Option<&[TermId]> {
        self.column_index(var).map(|i| self.columns[i].as_slice())
    }

    /// Mutable access to a column buffer for writers. Call [`seal`](Self::seal) afterwards.
    #[inline]
    pub fn column_mut(&mut self, idx: usize) -> &mut Vec<TermId> {
        &mut self.columns[idx]
    }

    pub fn columns_mut(&mut self) -> &mut [Vec<TermId>] {
        &mut self.columns
    }

    /// Declares the columns complete at `len` rows and activates all of them.
    pub fn seal(&mut self, len: usize) {
        debug_assert!(self.columns.iter().all(|c| c.len() == len));
        self.len = len;
        self.sel.reset_full(len);
        self.debug_check_sorted();
    }

    /// Declares the columns complete without touching the selection vector.
    pub fn seal_len(&mut self, len: usize) {
        debug_assert!(self.columns.iter().all(|c| c.len() == len));
        self.len = len;
    }

    /// Removes every row; keeps buffers.
    pub fn clear(&mut self) {
        for c in &mut self.columns {
            c.clear();
        }
        self.len = 0;
        self.sel.clear();
        self.sort_var = None;
    }

    /// Appends one row given in `vars()` order and activates it.
    pub fn push_row(&mut self, values: &[TermId]) {
        debug_assert_eq!(values.len(), self.columns.len());
        for (c, v) in self.columns.iter_mut().zip(values) {
            c.push(*v);
        }
        let i = self.len as u32;
        self.len += 1;
        self.sel.0.push(i);
    }

    /// Filters the active rows by physical row index. Columns are not read or written.
    pub fn retain(&mut self, keep: impl FnMut(usize) -> bool) {
        self.sel.retain(keep);
    }

    /// Like [`retain`](Self::retain), but hands the predicate read-only column access.
    pub fn retain_by(&mut self, mut keep: impl FnMut(&[Vec<TermId>], usize) -> bool) {
        let cols = &self.columns;
        self.sel.retain(|r| keep(cols, r));
    }

    /// Keeps the columns of `vars` in that order by moving their buffers; vars the
    /// batch lacks become NULL columns. The selection vector is untouched.
    pub fn project(&mut self, vars: &[VarId]) {
        let mut cols = Vec::with_capacity(vars.len());
        for v in vars {
            match self.column_index(*v) {
                Some(i) => cols.push(std::mem::take(&mut self.columns[i])),
                None => cols.push(vec![TermId::NULL; self.len]),
            }
        }
        self.columns = cols;
        self.vars = vars.to_vec();
        if self.sort_var.is_some_and(|s| !vars.contains(&s)) {
            self.sort_var = None;
        }
    }

    /// Value of `var` in physical row `row`, NULL if the batch has no such column.
    #[inline]
    pub fn value(&self, var: VarId, row: usize) -> TermId {
        match self.column_index(var) {
            Some(i) => self.columns[i][row],
            None => TermId::NULL,
        }
    }

    /// Sort-key of the `i`-th active row.
    #[inline]
    pub fn key_at(&self, key_col: usize, i: usize) -> TermId {
        self.columns[key_col][self.sel.0[i] as usize]
    }

    /// Lazy row view over active rows, in selection order.
    pub fn rows(&self) -> impl Iterator<Item = RowRef<'_>> + '_ {
        self.sel.0.iter().map(move |&r| RowRef {
            batch: self,
            row: r as usize,
        })
    }

    /// Visible rows materialized as value vectors in `vars()` order.
    pub fn pivot_to_rows(&self) -> Vec<Vec<TermId>> {
        self.rows().map(|r| r.values().collect()).collect()
    }

    /// Checks the structural invariants; used by tests and debug assertions.
    pub fn check_invariants(&self) -> Result<(), String> {
        if self.columns.len() != self.vars.len() {
            return Err("column count differs from var count".into());
        }
        if self.columns.iter().any(|c| c.len() != self.len) {
            return Err("columns differ in length".into());
        }
        if !self.sel.is_strictly_increasing() {
            return Err("selection vector not strictly increasing".into());
        }
        if self.sel.0.iter().any(|&i| i as usize >= self.len) {
            return Err("selection index out of range".into());
        }
        if let Some(sv) = self.sort_var {
            let Some(c) = self.column_index(sv) else {
                return Err("sort var not among batch vars".into());
            };
            let col = &self.columns[c];
            if self.sel.0.windows(2).any(|w| col[w[0] as usize] > col[w[1] as usize]) {
                return Err("rows not sorted by sort var".into());
            }
        }
        Ok(())
    }

    #[inline]
    fn debug_check_sorted(&self) {
        #[cfg(debug_assertions)]
        if let Err(e) = self.check_invariants() {
            panic!("batch invariant violated: {e}");
        }
    }
}

/// Borrowed view of one row inside a batch.
#[derive(Clone, Copy)]
pub struct RowRef<'a> {
    batch: &'a ColumnBatch,
    row: usize,
}

impl<'a> RowRef<'a> {
    pub fn position(&self) -> usize {
        self.row
    }

    pub fn get(&self, var: VarId) -> TermId {
        self.batch.value(var, self.row)
    }

    pub fn values(&self) -> impl Iterator<Item = TermId> + 'a {
        let (b, r) = (self.batch, self.row);
        b.columns.iter().map(move |c| c[r])
    }
}

/// Packs rows into batches of at most `cap` rows. Row `r` supplies the value of
/// `vars[i]` at `r[i]`; NULL marks an unbound variable.
pub fn pivot_from_rows<R: AsRef<[TermId]>>(rows: &[R], vars: &[VarId], cap: usize) -> Vec<ColumnBatch> {
    assert!(cap > 0);
    rows.chunks(cap)
        .map(|chunk| {
            let mut b = ColumnBatch::new(vars, cap);
            for r in chunk {
                b.push_row(r.as_ref());
            }
            b
        })
        .collect()
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct PoolStats {
    pub hits: u64,
    pub misses: u64,
    pub released: u64,
    pub outstanding: u64,
    pub peak_outstanding: u64,
}

/// Free list of batch buffers keyed by capacity.
#[derive(Debug, Default)]
pub struct BatchPool {
    free: HashMap<usize, Vec<ColumnBatch>>,
    stats: PoolStats,
}

impl BatchPool {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn stats(&self) -> PoolStats {
        self.stats
    }

    /// Returns an empty batch for `vars`, reusing a released buffer when one is available.
    pub fn acquire(&mut self, vars: &[VarId], cap: usize) -> ColumnBatch {
        self.stats.outstanding += 1;
        self.stats.peak_outstanding = self.stats.peak_outstanding.max(self.stats.outstanding);
        match self.free.get_mut(&cap).and_then(Vec::pop) {
            Some(mut b) => {
                self.stats.hits += 1;
                b.clear();
                b.vars.clear();
                b.vars.extend_from_slice(vars);
                b.columns.resize_with(vars.len(), || Vec::with_capacity(cap));
                b
            }
            None => {
                self.stats.misses += 1;
                ColumnBatch::new(vars, cap)
            }
        }
    }

    pub fn release(&mut self, b: ColumnBatch) {
        self.stats.released += 1;
        self.stats.outstanding = self.stats.outstanding.saturating_sub(1);
        self.free.entry(b.capacity).or_default().push(b);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ids(v: &[u64]) -> Vec<TermId> {
        v.iter().map(|&x| TermId(x)).collect()
    }

    fn batch_of(n: usize) -> ColumnBatch {
        let vars = [VarId(0), VarId(1)];
        ColumnBatch::from_columns(
            &vars,
            vec![ids(&(0..n as u64).collect::<Vec<_>>()), ids(&(100..100 + n as u64).collect::<Vec<_>>())],
        )
    }

    #[test]
    fn active_count_cases() {
        let mut b = batch_of(8);
        assert_eq!(b.active_count(), 8);
        b.retain(|_| false);
        assert_eq!(b.active_count(), 0);

        let mut b = batch_of(10);
        b.retain(|i| i % 2 == 0);
        assert_eq!(b.active_count(), 5);
    }

    #[test]
    fn retain_identity_keeps_selection() {
        let mut b = batch_of(6);
        let before = b.selection().clone();
        b.retain(|_| true);
        assert_eq!(b.selection(), &before);
    }

    #[test]
    fn pivot_respects_selection() {
        let mut b = batch_of(3);
        b.retain(|i| i != 1);
        assert_eq!(b.selection().as_slice(), &[0, 2]);
        assert_eq!(b.pivot_to_rows(), vec![ids(&[0, 100]), ids(&[2, 102])]);

        let one = batch_of(1);
        assert_eq!(one.pivot_to_rows(), vec![ids(&[0, 100])]);
    }

    #[test]
    fn pivot_from_rows_chunking() {
        let vars = [VarId(0)];
        let rows: Vec<Vec<TermId>> = (0..1300).map(|i| vec![TermId(i + 1)]).collect();
        let sizes: Vec<usize> = pivot_from_rows(&rows, &vars, 512).iter().map(|b| b.active_count()).collect();
        assert_eq!(sizes, vec![512, 512, 276]);
        assert!(pivot_from_rows::<Vec<TermId>>(&[], &vars, 512).is_empty());
    }

    #[test]
    fn pivot_from_rows_keeps_nulls() {
        let vars = [VarId(0), VarId(1)];
        let rows = vec![ids(&[1, 2]), ids(&[3, 0])];
        let b = &pivot_from_rows(&rows, &vars, 4)[0];
        assert_eq!(b.column_of(VarId(1)).unwrap(), &ids(&[2, 0])[..]);
    }

    #[test]
    fn keep_range() {
        let mut sv = SelectionVector::full(6);
        sv.keep_range(2, 5);
        assert_eq!(sv.as_slice(), &[2, 3, 4]);
    }

    #[test]
    fn pool_hit_and_miss() {
        let mut p = BatchPool::new();
        let b = p.acquire(&[VarId(0)], 512);
        assert_eq!(p.stats().misses, 1);
        p.release(b);
        let b = p.acquire(&[VarId(0), VarId(1)], 512);
        assert_eq!(p.stats().hits, 1);
        assert_eq!(b.vars(), &[VarId(0), VarId(1)]);
        assert_eq!(b.len(), 0);
        assert_eq!(b.active_count(), 0);
        assert!(b.check_invariants().is_ok());
    }

    #[test]
    fn pool_allocations_bounded_by_peak() {
        let mut p = BatchPool::new();
        let vars = [VarId(0)];
        for i in 0..10_000 {
            let a = p.acquire(&vars, 64);
            let b = p.acquire(&vars, 64);
            if i % 3 == 0 {
                let c = p.acquire(&vars, 64);
                p.release(c);
            }
            p.release(a);
            p.release(b);
        }
        let s = p.stats();
        assert_eq!(s.peak_outstanding, 3);
        assert!(s.misses <= s.peak_outstanding);
        assert_eq!(s.outstanding, 0);
    }

    proptest! {
        #[test]
        fn retain_matches_row_filter(vals in proptest::collection::vec(0u64..50, 0..100), mask in proptest::collection::vec(any::<bool>(), 100)) {
            let vars = [VarId(0)];
            let mut b = ColumnBatch::from_columns(&vars, vec![ids(&vals)]);
            let expected: Vec<Vec<TermId>> = b.pivot_to_rows().into_iter().enumerate().filter(|(i, _)| mask[*i]).map(|(_, r)| r).collect();
            b.retain(|i| mask[i]);
            prop_assert_eq!(b.pivot_to_rows(), expected);
            prop_assert!(b.check_invariants().is_ok());
        }

        #[test]
        fn pivot_round_trip(vals in proptest::collection::vec((0u64..50, 0u64..50), 0..300), mask in proptest::collection::vec(any::<bool>(), 300), cap in 1usize..64) {
            let vars = [VarId(0), VarId(1)];
            let mut b = ColumnBatch::from_columns(&vars, vec![ids(&vals.iter().map(|v| v.0).collect::<Vec<_>>()), ids(&vals.iter().map(|v| v.1).collect::<Vec<_>>())]);
            b.retain(|i| mask[i]);
            let rows = b.pivot_to_rows();
            let back: Vec<Vec<TermId>> = pivot_from_rows(&rows, &vars, cap).iter().flat_map(|b| b.pivot_to_rows()).collect();
            prop_assert_eq!(back, rows);
        }
    }
}
