use std::collections::{BTreeMap, HashSet};
use std::rc::Rc;

use crate::aggregate::{empty_global_value, AggState, AggregateSpec};
use crate::batch::VarId;
use crate::dictionary::TermId;
use crate::expr::FilterExpr;
use crate::operator::{BoxedRowOp, ExecContext, ExecError, ExecResult, RowOperator, RowTuple};

pub struct RowFilter {
    ctx: Rc<ExecContext>,
    child: BoxedRowOp,
    exprs: Vec<FilterExpr>,
}

impl RowFilter {
    pub fn new(ctx: Rc<ExecContext>, child: BoxedRowOp, exprs: Vec<FilterExpr>) -> Self {
        RowFilter { ctx, child, exprs }
    }
}

impl RowOperator for RowFilter {
    fn next_row(&mut self) -> ExecResult<Option<RowTuple>> {
        while let Some(r) = self.child.next_row()? {
            if self.exprs.iter().all(|e| e.eval(&self.ctx, |v| r[v.index()])) {
                return Ok(Some(r));
            }
        }
        Ok(None)
    }

    fn skip(&mut self, key: TermId) -> ExecResult<()> {
        self.child.skip(key)
    }

    fn reset(&mut self) -> ExecResult<()> {
        self.child.reset()
    }

    fn output_vars(&self) -> &[VarId] {
        self.child.output_vars()
    }

    fn sort_var(&self) -> Option<VarId> {
        self.child.sort_var()
    }
}

/// Hash-based GROUP BY over arbitrary input order; groups come out in key order.
pub struct RowHashGroup {
    ctx: Rc<ExecContext>,
    child: BoxedRowOp,
    group_var: Option<VarId>,
    aggs: Vec<AggregateSpec>,
    vars: Vec<VarId>,
    out: Option<std::vec::IntoIter<RowTuple>>,
}

impl RowHashGroup {
    pub fn new(ctx: Rc<ExecContext>, child: BoxedRowOp, group_var: Option<VarId>, aggs: Vec<AggregateSpec>) -> Self {
        let vars = group_var.into_iter().chain(aggs.iter().map(|a| a.out)).collect();
        RowHashGroup {
            ctx,
            child,
            group_var,
            aggs,
            vars,
            out: None,
        }
    }

    fn compute(&mut self) -> ExecResult<Vec<RowTuple>> {
        let mut groups: BTreeMap<TermId, Vec<AggState>> = BTreeMap::new();
        let cap = self.ctx.config.memory_cap;
        while let Some(r) = self.child.next_row()? {
            let key = self.group_var.map_or(TermId::NULL, |g| r[g.index()]);
            let states = groups.entry(key).or_insert_with(|| self.aggs.iter().map(|a| AggState::new(a.func)).collect());
            for (spec, st) in self.aggs.iter().zip(states.iter_mut()) {
                let value = spec.arg.map_or(TermId::NULL, |v| r[v.index()]);
                st.update(spec.func, &self.ctx, value);
            }
            let used = groups.len() * (self.aggs.len() * 64 + 64);
            if used > cap {
                return Err(ExecError::QueryMemoryExceeded { what: "hash group", used, cap });
            }
        }
        let width = self.ctx.var_count();
        let mut rows = Vec::with_capacity(groups.len().max(1));
        for (k, states) in &groups {
            let mut row = vec![TermId::NULL; width];
            if let Some(g) = self.group_var {
                row[g.index()] = *k;
            }
            for (spec, st) in self.aggs.iter().zip(states) {
                row[spec.out.index()] = st.finalize(&self.ctx);
            }
            rows.push(row);
        }
        if groups.is_empty() && self.group_var.is_none() {
            let mut row = vec![TermId::NULL; width];
            for spec in &self.aggs {
                row[spec.out.index()] = empty_global_value(&self.ctx, spec.func);
            }
            rows.push(row);
        }
        Ok(rows)
    }
}

impl RowOperator for RowHashGroup {
    fn next_row(&mut self) -> ExecResult<Option<RowTuple>> {
        if self.out.is_none() {
            let rows = self.compute()?;
            self.out = Some(rows.into_iter());
        }
        Ok(self.out.as_mut().unwrap().next())
    }

    fn skip(&mut self, key: TermId) -> ExecResult<()> {
        let Some(g) = self.group_var else {
            return Err(ExecError::SkipUnsupported { operator: "HashGroup" });
        };
        if self.out.is_none() {
            let rows = self.compute()?;
            self.out = Some(rows.into_iter());
        }
        let it = self.out.as_mut().unwrap();
        let rest: Vec<RowTuple> = it.by_ref().filter(|r| r[g.index()] >= key).collect();
        *it = rest.into_iter();
        Ok(())
    }

    fn reset(&mut self) -> ExecResult<()> {
        self.out = None;
        self.child.reset()
    }

    fn output_vars(&self) -> &[VarId] {
        &self.vars
    }

    fn sort_var(&self) -> Option<VarId> {
        self.group_var
    }
}

/// Hash-based DISTINCT over the operator's output variables; keeps first occurrences in order.
pub struct RowDistinct {
    child: BoxedRowOp,
    seen: HashSet<Vec<TermId>>,
}

impl RowDistinct {
    pub fn new(child: BoxedRowOp) -> Self {
        RowDistinct {
            child,
            seen: HashSet::new(),
        }
    }
}

impl RowOperator for RowDistinct {
    fn next_row(&mut self) -> ExecResult<Option<RowTuple>> {
        while let Some(r) = self.child.next_row()? {
            let key: Vec<TermId> = self.child.output_vars().iter().map(|v| r[v.index()]).collect();
            if self.seen.insert(key) {
                return Ok(Some(r));
            }
        }
        Ok(None)
    }

    fn skip(&mut self, key: TermId) -> ExecResult<()> {
        self.child.skip(key)
    }

    fn reset(&mut self) -> ExecResult<()> {
        self.seen.clear();
        self.child.reset()
    }

    fn output_vars(&self) -> &[VarId] {
        self.child.output_vars()
    }

    fn sort_var(&self) -> Option<VarId> {
        self.child.sort_var()
    }
}

pub struct RowSort {
    ctx: Rc<ExecContext>,
    child: BoxedRowOp,
    var: VarId,
    rows: Option<Vec<RowTuple>>,
    pos: usize,
}

impl RowSort {
    pub fn new(ctx: Rc<ExecContext>, child: BoxedRowOp, var: VarId) -> Self {
        RowSort {
            ctx,
            child,
            var,
            rows: None,
            pos: 0,
        }
    }

    fn materialize(&mut self) -> ExecResult<()> {
        let cap = self.ctx.config.memory_cap;
        let row_bytes = self.ctx.var_count() * std::mem::size_of::<TermId>() + 24;
        let mut rows = Vec::new();
        while let Some(r) = self.child.next_row()? {
            rows.push(r);
            if rows.len() * row_bytes > cap {
                return Err(ExecError::QueryMemoryExceeded { what: "sort", used: rows.len() * row_bytes, cap });
            }
        }
        let i = self.var.index();
        rows.sort_by_key(|r| r[i]);
        self.rows = Some(rows);
        self.pos = 0;
        Ok(())
    }
}

impl RowOperator for RowSort {
    fn next_row(&mut self) -> ExecResult<Option<RowTuple>> {
        if self.rows.is_none() {
            self.materialize()?;
        }
        let rows = self.rows.as_ref().unwrap();
        let r = rows.get(self.pos).cloned();
        self.pos += 1;
        Ok(r)
    }

    fn skip(&mut self, key: TermId) -> ExecResult<()> {
        if self.rows.is_none() {
            self.materialize()?;
        }
        let rows = self.rows.as_ref().unwrap();
        let i = self.var.index();
        if self.pos < rows.len() {
            self.pos += rows[self.pos..].partition_point(|r| r[i] < key);
        }
        Ok(())
    }

    fn reset(&mut self) -> ExecResult<()> {
        self.rows = None;
        self.pos = 0;
        self.child.reset()
    }

    fn output_vars(&self) -> &[VarId] {
        self.child.output_vars()
    }

    fn sort_var(&self) -> Option<VarId> {
        Some(self.var)
    }
}

/// Unbinds every variable outside the projection.
pub struct RowProject {
    child: BoxedRowOp,
    vars: Vec<VarId>,
    drop: Vec<VarId>,
    sort_var: Option<VarId>,
}

impl RowProject {
    pub fn new(child: BoxedRowOp, vars: Vec<VarId>) -> Self {
        let drop = child.output_vars().iter().filter(|v| !vars.contains(v)).copied().collect();
        let sort_var = child.sort_var().filter(|s| vars.contains(s));
        RowProject { child, vars, drop, sort_var }
    }
}

impl RowOperator for RowProject {
    fn next_row(&mut self) -> ExecResult<Option<RowTuple>> {
        Ok(self.child.next_row()?.map(|mut r| {
            for v in &self.drop {
                r[v.index()] = TermId::NULL;
            }
            r
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

pub struct RowLimit {
    child: BoxedRowOp,
    limit: usize,
    seen: usize,
}

impl RowLimit {
    pub fn new(child: BoxedRowOp, limit: usize) -> Self {
        RowLimit { child, limit, seen: 0 }
    }
}

impl RowOperator for RowLimit {
    fn next_row(&mut self) -> ExecResult<Option<RowTuple>> {
        if self.seen >= self.limit {
            return Ok(None);
        }
        let r = self.child.next_row()?;
        if r.is_some() {
            self.seen += 1;
        }
        Ok(r)
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

/// UNION: sorted merge on `sort_var` when given, concatenation otherwise.
pub struct RowUnion {
    branches: Vec<BoxedRowOp>,
    vars: Vec<VarId>,
    sort_var: Option<VarId>,
    heads: Vec<Option<RowTuple>>,
    started: bool,
    current: usize,
}

impl RowUnion {
    pub fn new(branches: Vec<BoxedRowOp>, sort_var: Option<VarId>) -> ExecResult<Self> {
        let mut vars: Vec<VarId> = Vec::new();
        for b in &branches {
            if sort_var.is_some() && b.sort_var() != sort_var {
                return Err(ExecError::UnsortedInput { operator: "Union" });
            }
            for v in b.output_vars() {
                if !vars.contains(v) {
                    vars.push(*v);
                }
            }
        }
        Ok(RowUnion {
            heads: vec![None; branches.len()],
            branches,
            vars,
            sort_var,
            started: false,
            current: 0,
        })
    }
}

impl RowOperator for RowUnion {
    fn next_row(&mut self) -> ExecResult<Option<RowTuple>> {
        let Some(s) = self.sort_var else {
            while self.current < self.branches.len() {
                if let Some(r) = self.branches[self.current].next_row()? {
                    return Ok(Some(r));
                }
                self.current += 1;
            }
            return Ok(None);
        };
        if !self.started {
            self.started = true;
            for (h, b) in self.heads.iter_mut().zip(&mut self.branches) {
                *h = b.next_row()?;
            }
        }
        let best = self
            .heads
            .iter()
            .enumerate()
            .filter_map(|(i, h)| h.as_ref().map(|r| (r[s.index()], i)))
            .min();
        let Some((_, i)) = best else { return Ok(None) };
        let r = self.heads[i].take();
        self.heads[i] = self.branches[i].next_row()?;
        Ok(r)
    }

    fn skip(&mut self, key: TermId) -> ExecResult<()> {
        let Some(s) = self.sort_var else {
            return Err(ExecError::SkipUnsupported { operator: "Union" });
        };
        if !self.started {
            for b in &mut self.branches {
                b.skip(key)?;
            }
            return Ok(());
        }
        for (h, b) in self.heads.iter_mut().zip(&mut self.branches) {
            if h.as_ref().is_some_and(|r| r[s.index()] < key) {
                b.skip(key)?;
                *h = b.next_row()?;
            }
        }
        Ok(())
    }

    fn reset(&mut self) -> ExecResult<()> {
        self.started = false;
        self.current = 0;
        self.heads.iter_mut().for_each(|h| *h = None);
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

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aggregate::AggFunc;
    use crate::adapters::test_support::*;

    fn source(rows: Vec<RowTuple>, sort: Option<VarId>) -> BoxedRowOp {
        Box::new(VecRowSource { vars: vec![VarId(0), VarId(1)], rows, pos: 0, sort_var: sort })
    }

    fn drain(op: &mut dyn RowOperator) -> Vec<RowTuple> {
        let mut v = Vec::new();
        while let Some(r) = op.next_row().unwrap() {
            v.push(r);
        }
        v
    }

    #[test]
    fn distinct_of_unique_input_is_identity() {
        let rows = vec![t(&[1, 2, 0]), t(&[2, 2, 0]), t(&[3, 1, 0])];
        let mut d = RowDistinct::new(source(rows.clone(), None));
        assert_eq!(drain(&mut d), rows);
    }

    #[test]
    fn hash_group_counts() {
        let ctx = ctx_with(3, 8);
        let rows = vec![t(&[2, 1, 0]), t(&[1, 1, 0]), t(&[2, 5, 0])];
        let aggs = vec![AggregateSpec { func: AggFunc::CountAll, arg: None, out: VarId(2) }];
        let mut g = RowHashGroup::new(ctx.clone(), source(rows, None), Some(VarId(0)), aggs);
        let out: Vec<(u64, i64)> = drain(&mut g).iter().map(|r| (r[0].0, ctx.numeric(r[2]).unwrap())).collect();
        assert_eq!(out, [(1, 1), (2, 2)]);
    }

    #[test]
    fn sort_then_skip() {
        let ctx = ctx_with(3, 8);
        let rows = vec![t(&[5, 1, 0]), t(&[1, 1, 0]), t(&[3, 5, 0])];
        let mut s = RowSort::new(ctx, source(rows, None), VarId(0));
        s.skip(TermId(2)).unwrap();
        assert_eq!(drain(&mut s), vec![t(&[3, 5, 0]), t(&[5, 1, 0])]);
    }

    #[test]
    fn sorted_union_merges() {
        let a = source(vec![t(&[1, 0, 0]), t(&[4, 0, 0])], Some(VarId(0)));
        let b = source(vec![t(&[2, 0, 0]), t(&[3, 0, 0])], Some(VarId(0)));
        let mut u = RowUnion::new(vec![a, b], Some(VarId(0))).unwrap();
        let keys: Vec<u64> = drain(&mut u).iter().map(|r| r[0].0).collect();
        assert_eq!(keys, [1, 2, 3, 4]);
    }
}
