use std::collections::HashMap;
use std::rc::Rc;

use crate::batch::VarId;
use crate::dictionary::TermId;
use crate::operator::{BoxedRowOp, ExecContext, ExecError, ExecResult, RowOperator, RowTuple};

fn union_vars(a: &[VarId], b: &[VarId]) -> Vec<VarId> {
    let mut v = a.to_vec();
    v.extend(b.iter().filter(|x| !a.contains(x)));
    v
}

fn shared_vars(a: &[VarId], b: &[VarId]) -> Vec<VarId> {
    a.iter().filter(|x| b.contains(x)).copied().collect()
}

/// Combines a left and right row; `None` when a shared variable disagrees or is unbound.
#[inline]
fn combine(left: &RowTuple, right: &RowTuple, shared: &[VarId], right_only: &[VarId]) -> Option<RowTuple> {
    for v in shared {
        let (a, b) = (left[v.index()], right[v.index()]);
        if a.is_null() || a != b {
            return None;
        }
    }
    let mut row = left.clone();
    for v in right_only {
        row[v.index()] = right[v.index()];
    }
    Some(row)
}

/// Two-pointer merge join; the side with the smaller key is skipped to the other side's key.
pub struct RowMergeJoin {
    left: BoxedRowOp,
    right: BoxedRowOp,
    key: VarId,
    vars: Vec<VarId>,
    shared: Vec<VarId>,
    right_only: Vec<VarId>,
    lrow: Option<RowTuple>,
    /// Right rows of the current key.
    group: Vec<RowTuple>,
    group_key: TermId,
    gpos: usize,
    /// First right row beyond the current group.
    rpeek: Option<RowTuple>,
    started: bool,
    done: bool,
}

impl RowMergeJoin {
    pub fn new(left: BoxedRowOp, right: BoxedRowOp, key: VarId) -> ExecResult<Self> {
        if left.sort_var() != Some(key) || right.sort_var() != Some(key) {
            return Err(ExecError::UnsortedInput { operator: "MergeJoin" });
        }
        let lv = left.output_vars().to_vec();
        let rv = right.output_vars().to_vec();
        Ok(RowMergeJoin {
            vars: union_vars(&lv, &rv),
            shared: shared_vars(&lv, &rv),
            right_only: rv.iter().filter(|v| !lv.contains(v)).copied().collect(),
            left,
            right,
            key,
            lrow: None,
            group: Vec::new(),
            group_key: TermId::NULL,
            gpos: 0,
            rpeek: None,
            started: false,
            done: false,
        })
    }

    fn k(&self, row: &RowTuple) -> TermId {
        row[self.key.index()]
    }

    /// Positions both inputs on the next common key and loads its right group.
    fn align(&mut self) -> ExecResult<bool> {
        loop {
            let Some(l) = &self.lrow else { return Ok(false) };
            let lk = self.k(l);
            if lk.is_null() {
                self.lrow = self.left.next_row()?;
                continue;
            }
            if !self.group.is_empty() && lk == self.group_key {
                return Ok(true);
            }
            let Some(r) = &self.rpeek else { return Ok(false) };
            let rk = self.k(r);
            if rk < lk {
                self.right.skip(lk)?;
                self.rpeek = self.right.next_row()?;
            } else if lk < rk {
                self.left.skip(rk)?;
                self.lrow = self.left.next_row()?;
            } else {
                self.group.clear();
                self.group_key = lk;
                while let Some(r) = self.rpeek.take() {
                    if self.k(&r) != lk {
                        self.rpeek = Some(r);
                        break;
                    }
                    self.group.push(r);
                    self.rpeek = self.right.next_row()?;
                }
                return Ok(true);
            }
        }
    }
}

impl RowOperator for RowMergeJoin {
    fn next_row(&mut self) -> ExecResult<Option<RowTuple>> {
        if self.done {
            return Ok(None);
        }
        if !self.started {
            self.started = true;
            self.lrow = self.left.next_row()?;
            self.rpeek = self.right.next_row()?;
            self.gpos = 0;
            if !self.align()? {
                self.done = true;
                return Ok(None);
            }
        }
        loop {
            let l = self.lrow.as_ref().unwrap();
            while self.gpos < self.group.len() {
                let r = &self.group[self.gpos];
                self.gpos += 1;
                if let Some(row) = combine(l, r, &self.shared, &self.right_only) {
                    return Ok(Some(row));
                }
            }
            self.lrow = self.left.next_row()?;
            self.gpos = 0;
            if !self.align()? {
                self.done = true;
                return Ok(None);
            }
        }
    }

    fn skip(&mut self, key: TermId) -> ExecResult<()> {
        if self.done || !self.started {
            if !self.started {
                self.left.skip(key)?;
                self.right.skip(key)?;
            }
            return Ok(());
        }
        if self.lrow.as_ref().is_none_or(|l| self.k(l) >= key) {
            return Ok(());
        }
        self.left.skip(key)?;
        self.lrow = self.left.next_row()?;
        self.gpos = 0;
        if !self.align()? {
            self.done = true;
        }
        Ok(())
    }

    fn reset(&mut self) -> ExecResult<()> {
        self.lrow = None;
        self.rpeek = None;
        self.group.clear();
        self.gpos = 0;
        self.started = false;
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

/// Hash join: the right input is the build side, the left input is streamed.
/// Without shared variables it degenerates to a cross product.
pub struct RowHashJoin {
    ctx: Rc<ExecContext>,
    left: BoxedRowOp,
    right: BoxedRowOp,
    vars: Vec<VarId>,
    keys: Vec<VarId>,
    right_only: Vec<VarId>,
    table: Option<HashMap<Vec<TermId>, Vec<RowTuple>>>,
    lrow: Option<RowTuple>,
    lkey: Vec<TermId>,
    mpos: usize,
}

impl RowHashJoin {
    pub fn new(ctx: Rc<ExecContext>, left: BoxedRowOp, right: BoxedRowOp) -> Self {
        let lv = left.output_vars().to_vec();
        let rv = right.output_vars().to_vec();
        RowHashJoin {
            ctx,
            vars: union_vars(&lv, &rv),
            keys: shared_vars(&lv, &rv),
            right_only: rv.iter().filter(|v| !lv.contains(v)).copied().collect(),
            left,
            right,
            table: None,
            lrow: None,
            lkey: Vec::new(),
            mpos: 0,
        }
    }

    fn key_of(keys: &[VarId], row: &RowTuple) -> Option<Vec<TermId>> {
        let k: Vec<TermId> = keys.iter().map(|v| row[v.index()]).collect();
        (!k.iter().any(|x| x.is_null())).then_some(k)
    }

    fn build(&mut self) -> ExecResult<()> {
        let mut table: HashMap<Vec<TermId>, Vec<RowTuple>> = HashMap::new();
        let cap = self.ctx.config.memory_cap;
        let row_bytes = (self.ctx.var_count() + self.keys.len()) * std::mem::size_of::<TermId>() + 48;
        let mut used = 0usize;
        while let Some(r) = self.right.next_row()? {
            if let Some(k) = Self::key_of(&self.keys, &r) {
                used += row_bytes;
                if used > cap {
                    return Err(ExecError::QueryMemoryExceeded { what: "hash join", used, cap });
                }
                table.entry(k).or_default().push(r);
            }
        }
        self.table = Some(table);
        Ok(())
    }
}

impl RowOperator for RowHashJoin {
    fn next_row(&mut self) -> ExecResult<Option<RowTuple>> {
        if self.table.is_none() {
            self.build()?;
        }
        loop {
            if let Some(l) = &self.lrow {
                if let Some(matches) = self.table.as_ref().unwrap().get(&self.lkey) {
                    if self.mpos < matches.len() {
                        let r = &matches[self.mpos];
                        self.mpos += 1;
                        let mut row = l.clone();
                        for v in &self.right_only {
                            row[v.index()] = r[v.index()];
                        }
                        return Ok(Some(row));
                    }
                }
            }
            let Some(l) = self.left.next_row()? else {
                self.lrow = None;
                return Ok(None);
            };
            self.mpos = 0;
            match Self::key_of(&self.keys, &l) {
                Some(k) => {
                    self.lkey = k;
                    self.lrow = Some(l);
                }
                None => self.lrow = None,
            }
        }
    }

    fn skip(&mut self, key: TermId) -> ExecResult<()> {
        let Some(sv) = self.left.sort_var() else {
            return Err(ExecError::SkipUnsupported { operator: "HashJoin" });
        };
        if self.lrow.as_ref().is_some_and(|l| l[sv.index()] >= key) {
            return Ok(());
        }
        self.lrow = None;
        self.left.skip(key)
    }

    fn reset(&mut self) -> ExecResult<()> {
        self.table = None;
        self.lrow = None;
        self.mpos = 0;
        self.left.reset()?;
        self.right.reset()
    }

    fn output_vars(&self) -> &[VarId] {
        &self.vars
    }

    fn sort_var(&self) -> Option<VarId> {
        self.left.sort_var()
    }
}
