//! Instrumentation wrappers and the profile tree they produce.

use std::cell::RefCell;
use std::rc::Rc;
use std::time::{Duration, Instant};

use serde::Serialize;

use crate::batch::{ColumnBatch, VarId};
use crate::dictionary::TermId;
use crate::operator::{BatchOperator, BoxedBatchOp, BoxedRowOp, CallStats, ExecResult, RowOperator, RowTuple};
use crate::plan::{render_tree, Engine};

/// Counters of one operator, shared between its wrapper and the probe tree.
#[derive(Debug, Default)]
pub struct Probe {
    pub stats: CallStats,
    pub inclusive: Duration,
}

pub type ProbeHandle = Rc<RefCell<Probe>>;

/// Records calls and inclusive time of a batch operator.
pub struct ProfiledBatch {
    inner: BoxedBatchOp,
    probe: ProbeHandle,
}

impl ProfiledBatch {
    pub fn new(inner: BoxedBatchOp, probe: ProbeHandle) -> Self {
        ProfiledBatch { inner, probe }
    }
}

impl BatchOperator for ProfiledBatch {
    fn next_batch(&mut self) -> ExecResult<Option<ColumnBatch>> {
        let t = Instant::now();
        let r = self.inner.next_batch();
        let mut p = self.probe.borrow_mut();
        p.inclusive += t.elapsed();
        p.stats.next_calls += 1;
        if let Ok(Some(b)) = &r {
            p.stats.rows_out += b.active_count() as u64;
        }
        r
    }

    fn skip(&mut self, key: TermId) -> ExecResult<()> {
        let t = Instant::now();
        let r = self.inner.skip(key);
        let mut p = self.probe.borrow_mut();
        p.inclusive += t.elapsed();
        p.stats.skip_calls += 1;
        r
    }

    fn reset(&mut self) -> ExecResult<()> {
        self.probe.borrow_mut().stats.reset_calls += 1;
        self.inner.reset()
    }

    fn output_vars(&self) -> &[VarId] {
        self.inner.output_vars()
    }

    fn sort_var(&self) -> Option<VarId> {
        self.inner.sort_var()
    }
}

/// Records calls and inclusive time of a row operator.
pub struct ProfiledRow {
    inner: BoxedRowOp,
    probe: ProbeHandle,
}

impl ProfiledRow {
    pub fn new(inner: BoxedRowOp, probe: ProbeHandle) -> Self {
        ProfiledRow { inner, probe }
    }
}

impl RowOperator for ProfiledRow {
    fn next_row(&mut self) -> ExecResult<Option<RowTuple>> {
        let t = Instant::now();
        let r = self.inner.next_row();
        let mut p = self.probe.borrow_mut();
        p.inclusive += t.elapsed();
        p.stats.next_calls += 1;
        if let Ok(Some(_)) = &r {
            p.stats.rows_out += 1;
        }
        r
    }

    fn skip(&mut self, key: TermId) -> ExecResult<()> {
        let t = Instant::now();
        let r = self.inner.skip(key);
        let mut p = self.probe.borrow_mut();
        p.inclusive += t.elapsed();
        p.stats.skip_calls += 1;
        r
    }

    fn reset(&mut self) -> ExecResult<()> {
        self.probe.borrow_mut().stats.reset_calls += 1;
        self.inner.reset()
    }

    fn output_vars(&self) -> &[VarId] {
        self.inner.output_vars()
    }

    fn sort_var(&self) -> Option<VarId> {
        self.inner.sort_var()
    }
}

/// Live probes arranged like the plan; snapshot it after execution.
#[derive(Debug)]
pub struct ProbeTree {
    pub label: String,
    pub engine: Engine,
    pub probe: ProbeHandle,
    pub children: Vec<ProbeTree>,
}

impl ProbeTree {
    pub fn snapshot(&self) -> ProfileNode {
        let mut root = self.snap();
        let total = root.inclusive_us.max(1) as f64;
        root.set_shares(total);
        root
    }

    fn snap(&self) -> ProfileNode {
        let p = self.probe.borrow();
        let children: Vec<ProfileNode> = self.children.iter().map(|c| c.snap()).collect();
        let inclusive = p.inclusive.as_micros() as u64;
        let child_time: u64 = children.iter().map(|c| c.inclusive_us).sum();
        ProfileNode {
            label: self.label.clone(),
            engine: self.engine,
            stats: p.stats,
            inclusive_us: inclusive,
            exclusive_us: inclusive.saturating_sub(child_time),
            share: 0.0,
            children,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProfileNode {
    pub label: String,
    pub engine: Engine,
    pub stats: CallStats,
    pub inclusive_us: u64,
    /// Own time: inclusive time minus the children's inclusive time.
    pub exclusive_us: u64,
    /// Exclusive time as a percentage of the root's inclusive time.
    pub share: f64,
    pub children: Vec<ProfileNode>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RenderOptions {
    pub wall_time: bool,
    /// Append exact counts after abbreviated ones.
    pub full_counts: bool,
}

impl Default for RenderOptions {
    fn default() -> Self {
        RenderOptions {
            wall_time: true,
            full_counts: true,
        }
    }
}

impl ProfileNode {
    fn set_shares(&mut self, total: f64) {
        self.share = 100.0 * self.exclusive_us as f64 / total;
        for c in &mut self.children {
            c.set_shares(total);
        }
    }

    pub fn find(&self, label_prefix: &str) -> Option<&ProfileNode> {
        if self.label.starts_with(label_prefix) {
            return Some(self);
        }
        self.children.iter().find_map(|c| c.find(label_prefix))
    }

    pub fn walk(&self, f: &mut impl FnMut(&ProfileNode)) {
        f(self);
        for c in &self.children {
            c.walk(f);
        }
    }

    pub fn render(&self) -> String {
        self.render_with(RenderOptions::default())
    }

    pub fn render_with(&self, opts: RenderOptions) -> String {
        let mut out = String::new();
        let line = |n: &ProfileNode| n.line(opts);
        render_tree(self, &mut out, "", "", &line, &|n| &n.children);
        out
    }

    /// Label only, one per line, in tree layout.
    pub fn topology(&self) -> String {
        let mut out = String::new();
        render_tree(self, &mut out, "", "", &|n: &ProfileNode| n.label.clone(), &|n| &n.children);
        out
    }

    fn line(&self, opts: RenderOptions) -> String {
        let count = |n: u64| {
            let a = abbreviate(n);
            if opts.full_counts && n >= 1000 {
                format!("{a} [{n}]")
            } else {
                a
            }
        };
        let mut s = format!("{}, results: {}", self.label, count(self.stats.rows_out));
        let mut calls = Vec::new();
        if self.stats.next_calls > 0 {
            calls.push(format!("next: {}", abbreviate(self.stats.next_calls)));
        }
        if self.stats.skip_calls > 0 {
            calls.push(format!("skip: {}", abbreviate(self.stats.skip_calls)));
        }
        if !calls.is_empty() {
            s.push_str(&format!(" ({})", calls.join(", ")));
        }
        if opts.wall_time {
            s.push_str(&format!(", wall time: {:.1}%", self.share));
        }
        if self.engine == Engine::Batch {
            s.push_str(", batched");
        }
        s
    }
}

/// Abbreviates counts as in `54K`, `5.7K`, `46.7M`.
pub fn abbreviate(n: u64) -> String {
    let f = n as f64;
    if n < 1000 {
        n.to_string()
    } else if n < 10_000 {
        format!("{:.1}K", f / 1e3)
    } else if n < 999_500 {
        format!("{:.0}K", f / 1e3)
    } else if n < 999_950_000 {
        format!("{:.1}M", f / 1e6)
    } else {
        format!("{:.1}B", f / 1e9)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adapters::test_support::*;

    #[test]
    fn abbreviations() {
        assert_eq!(abbreviate(1), "1");
        assert_eq!(abbreviate(999), "999");
        assert_eq!(abbreviate(5_700), "5.7K");
        assert_eq!(abbreviate(54_000), "54K");
        assert_eq!(abbreviate(563_400), "563K");
        assert_eq!(abbreviate(999_700), "1.0M");
        assert_eq!(abbreviate(46_700_000), "46.7M");
        assert_eq!(abbreviate(2_000_000), "2.0M");
    }

    #[test]
    fn counts_batches_and_exhaustion_call() {
        let ctx = ctx_with(1, 100);
        let rows: Vec<Vec<TermId>> = (0..250).map(|i| t(&[i + 1])).collect();
        let src = VecBatchSource::new(ctx.clone(), vec![VarId(0)], rows, 100, Some(VarId(0)));
        let probe = ProbeHandle::default();
        let mut op = ProfiledBatch::new(Box::new(src), probe.clone());
        while let Some(b) = op.next_batch().unwrap() {
            ctx.release(b);
        }
        op.skip(TermId(1)).unwrap();
        op.skip(TermId(2)).unwrap();
        let s = probe.borrow().stats;
        assert_eq!((s.rows_out, s.next_calls, s.skip_calls), (250, 4, 2));
    }

    #[test]
    fn render_is_deterministic() {
        let leaf = ProfileNode {
            label: "Scan(?a, :p, ?b)".into(),
            engine: Engine::Batch,
            stats: CallStats {
                next_calls: 58,
                skip_calls: 0,
                reset_calls: 0,
                rows_out: 5712,
            },
            inclusive_us: 10,
            exclusive_us: 10,
            share: 25.0,
            children: vec![],
        };
        let root = ProfileNode {
            label: "Filter(?a != ?b)".into(),
            engine: Engine::Row,
            stats: CallStats {
                next_calls: 3,
                skip_calls: 1,
                reset_calls: 0,
                rows_out: 2,
            },
            inclusive_us: 40,
            exclusive_us: 30,
            share: 75.0,
            children: vec![leaf],
        };
        let text = root.render();
        assert_eq!(
            text,
            "Filter(?a != ?b), results: 2 (next: 3, skip: 1), wall time: 75.0%\n\
             `- Scan(?a, :p, ?b), results: 5.7K [5712] (next: 58), wall time: 25.0%, batched\n"
        );
        assert_eq!(text, root.clone().render());
    }
}
