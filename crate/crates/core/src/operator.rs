//! Operator contracts shared by the batch and row executors.
//!
//! Both flavours follow the pull model: the root calls `next`, which
//! recursively pulls from children. Sorted operators additionally accept
//! `skip(key)`, which repositions the stream at the first element whose
//! sort key is `>= key`.

use std::cell::{Cell, RefCell};
use std::collections::HashMap;
use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use crate::batch::{BatchPool, ColumnBatch, VarId, DEFAULT_BATCH_MAX};
use crate::dictionary::{Term, TermId};
use crate::storage::{StorageError, TripleStore};

/// One solution: the value of every query variable, indexed by [`VarId`]. NULL means unbound.
pub type RowTuple = Vec<TermId>;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ExecError {
    #[error("query memory exceeded in {what}: {used} bytes over the {cap} byte cap")]
    QueryMemoryExceeded { what: &'static str, used: usize, cap: usize },
    #[error("{operator} received input that is not sorted by its key")]
    UnsortedInput { operator: &'static str },
    #[error("skip() called on {operator}, which has no sort order")]
    SkipUnsupported { operator: &'static str },
    #[error(transparent)]
    Storage(#[from] StorageError),
}

pub type ExecResult<T> = Result<T, ExecError>;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExecConfig {
    /// Upper bound on rows per batch.
    pub batch_max: usize,
    /// Starting (and post-skip) scan batch size under adaptive sizing.
    pub batch_min: usize,
    /// When false, scans always read `batch_max` rows per call.
    pub adaptive: bool,
    /// Cap for blocking operators (sort, hash join, hash group), in bytes.
    pub memory_cap: usize,
    /// Cap for the merge join's buffered right range, in bytes.
    pub join_buffer_cap: usize,
}

impl Default for ExecConfig {
    fn default() -> Self {
        ExecConfig {
            batch_max: DEFAULT_BATCH_MAX,
            batch_min: 16,
            adaptive: true,
            memory_cap: 1 << 30,
            join_buffer_cap: 64 << 20,
        }
    }
}

/// Ids at or above this value denote terms computed during execution
/// (aggregate results); they live in [`ExecContext`] rather than the store dictionary.
pub const COMPUTED_ID_BASE: u64 = 1 << 63;

#[derive(Debug, Default)]
struct ComputedTerms {
    terms: Vec<Term>,
    index: HashMap<Term, TermId>,
}

/// Per-execution state shared by every operator of one plan.
#[derive(Debug)]
pub struct ExecContext {
    pub store: Arc<TripleStore>,
    pub config: ExecConfig,
    var_count: usize,
    pool: RefCell<BatchPool>,
    rows_read: Cell<u64>,
    computed: RefCell<ComputedTerms>,
}

impl ExecContext {
    pub fn new(store: Arc<TripleStore>, config: ExecConfig, var_count: usize) -> Self {
        ExecContext {
            store,
            config,
            var_count,
            pool: RefCell::new(BatchPool::new()),
            rows_read: Cell::new(0),
            computed: RefCell::new(ComputedTerms::default()),
        }
    }

    /// Width of a [`RowTuple`] in this execution.
    pub fn var_count(&self) -> usize {
        self.var_count
    }

    pub fn acquire(&self, vars: &[VarId]) -> ColumnBatch {
        self.pool.borrow_mut().acquire(vars, self.config.batch_max)
    }

    pub fn release(&self, b: ColumnBatch) {
        self.pool.borrow_mut().release(b);
    }

    pub fn pool_stats(&self) -> crate::batch::PoolStats {
        self.pool.borrow().stats()
    }

    pub fn add_rows_read(&self, n: u64) {
        self.rows_read.set(self.rows_read.get() + n);
    }

    /// Total rows fetched from storage cursors by all scans of this execution.
    pub fn rows_read(&self) -> u64 {
        self.rows_read.get()
    }

    /// Integer value of `id`, for stored or computed terms.
    #[inline]
    pub fn numeric(&self, id: TermId) -> Option<i64> {
        if id.0 >= COMPUTED_ID_BASE {
            self.decode(id).and_then(|t| t.integer_value())
        } else {
            self.store.dictionary().numeric(id)
        }
    }

    /// Returns an id for a term produced at run time.
    pub fn intern_computed(&self, term: Term) -> TermId {
        if let Some(id) = self.store.dictionary().lookup(&term) {
            return id;
        }
        let mut c = self.computed.borrow_mut();
        if let Some(id) = c.index.get(&term) {
            return *id;
        }
        let id = TermId(COMPUTED_ID_BASE + c.terms.len() as u64);
        c.terms.push(term.clone());
        c.index.insert(term, id);
        id
    }

    /// Decodes stored and computed ids; NULL and unknown ids yield `None`.
    pub fn decode(&self, id: TermId) -> Option<Term> {
        if id.0 >= COMPUTED_ID_BASE {
            self.computed
                .borrow()
                .terms
                .get((id.0 - COMPUTED_ID_BASE) as usize)
                .cloned()
        } else {
            self.store.dictionary().decode(id).ok().cloned()
        }
    }
}

/// Call counters recorded per operator.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct CallStats {
    pub next_calls: u64,
    pub skip_calls: u64,
    pub reset_calls: u64,
    pub rows_out: u64,
}

/// Vectorized operator: `next_batch` returns batches whose columns follow `output_vars()`.
pub trait BatchOperator {
    fn next_batch(&mut self) -> ExecResult<Option<ColumnBatch>>;
    fn skip(&mut self, key: TermId) -> ExecResult<()>;
    fn reset(&mut self) -> ExecResult<()>;
    fn output_vars(&self) -> &[VarId];
    fn sort_var(&self) -> Option<VarId>;
}

/// Tuple-at-a-time operator.
pub trait RowOperator {
    fn next_row(&mut self) -> ExecResult<Option<RowTuple>>;
    fn skip(&mut self, key: TermId) -> ExecResult<()>;
    fn reset(&mut self) -> ExecResult<()>;
    fn output_vars(&self) -> &[VarId];
    fn sort_var(&self) -> Option<VarId>;
}

pub type BoxedBatchOp = Box<dyn BatchOperator>;
pub type BoxedRowOp = Box<dyn RowOperator>;

/// The root of an executable tree, in whichever flavour the planner chose.
pub enum ExecNode {
    Batch(BoxedBatchOp),
    Row(BoxedRowOp),
}

impl ExecNode {
    pub fn output_vars(&self) -> &[VarId] {
        match self {
            ExecNode::Batch(b) => b.output_vars(),
            ExecNode::Row(r) => r.output_vars(),
        }
    }

    pub fn sort_var(&self) -> Option<VarId> {
        match self {
            ExecNode::Batch(b) => b.sort_var(),
            ExecNode::Row(r) => r.sort_var(),
        }
    }

    /// Drains the tree into full-width rows.
    pub fn collect_rows(&mut self, ctx: &ExecContext) -> ExecResult<Vec<RowTuple>> {
        let mut out = Vec::new();
        match self {
            ExecNode::Row(r) => {
                while let Some(row) = r.next_row()? {
                    out.push(row);
                }
            }
            ExecNode::Batch(b) => {
                let vars = b.output_vars().to_vec();
                while let Some(batch) = b.next_batch()? {
                    for row in batch.rows() {
                        let mut full = vec![TermId::NULL; ctx.var_count()];
                        for (v, val) in vars.iter().zip(row.values()) {
                            full[v.index()] = val;
                        }
                        out.push(full);
                    }
                    ctx.release(batch);
                }
            }
        }
        Ok(out)
    }

    /// Drains the tree and returns only the number of result rows.
    pub fn count_rows(&mut self, ctx: &ExecContext) -> ExecResult<u64> {
        let mut n = 0u64;
        match self {
            ExecNode::Row(r) => {
                while r.next_row()?.is_some() {
                    n += 1;
                }
            }
            ExecNode::Batch(b) => {
                while let Some(batch) = b.next_batch()? {
                    n += batch.active_count() as u64;
                    ctx.release(batch);
                }
            }
        }
        Ok(n)
    }

    pub fn reset(&mut self) -> ExecResult<()> {
        match self {
            ExecNode::Batch(b) => b.reset(),
            ExecNode::Row(r) => r.reset(),
        }
    }
}

/// Position of `key` within the sort column, or an error when the operator is unsorted.
pub(crate) fn sort_column(vars: &[VarId], sort_var: Option<VarId>, operator: &'static str) -> ExecResult<usize> {
    sort_var
        .and_then(|v| vars.iter().position(|x| *x == v))
        .ok_or(ExecError::SkipUnsupported { operator })
}
