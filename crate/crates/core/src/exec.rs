//! Translation of tagged logical plans into operator trees, and the
//! end-to-end query API.

use std::cell::RefCell;
use std::fmt;
use std::rc::Rc;
use std::sync::Arc;
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::adapters::{BatchToRow, RowToBatch};
use crate::dictionary::Term;
use crate::operator::{BoxedBatchOp, BoxedRowOp, ExecConfig, ExecContext, ExecError, ExecNode, ExecResult};
use crate::plan::{CostModel, Engine, EngineMode, PlanNode, PlanOp};
use crate::planner::{plan_query, PlannedQuery, PlannerConfig};
use crate::profile::{ProbeHandle, ProbeTree, ProfileNode, ProfiledBatch, ProfiledRow};
use crate::query::{parse_query, Query, QueryError};
use crate::row::{
    RowDistinct, RowFilter, RowHashGroup, RowHashJoin, RowLimit, RowMergeJoin, RowProject, RowScan, RowSort, RowUnion,
};
use crate::storage::TripleStore;
use crate::vector::{VDistinct, VFilter, VGroup, VLimit, VMergeJoin, VProject, VScan, VSort, VUnion};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct TranslateOptions {
    /// Wrap every plan node in a profiler.
    pub profile: bool,
    /// Put a round trip through both adapters on every edge whose ends share a tag.
    pub force_adapters: bool,
}

pub struct Executable {
    pub root: ExecNode,
    pub ctx: Rc<ExecContext>,
    /// Adapter operators inserted.
    pub adapters: usize,
    pub probes: Option<ProbeTree>,
}

pub fn translate(plan: &PlanNode, ctx: Rc<ExecContext>, opts: TranslateOptions) -> ExecResult<Executable> {
    let mut t = Translator { ctx: ctx.clone(), opts, adapters: 0 };
    let (root, probes) = t.build(plan)?;
    Ok(Executable {
        root,
        ctx,
        adapters: t.adapters,
        probes,
    })
}

struct Translator {
    ctx: Rc<ExecContext>,
    opts: TranslateOptions,
    adapters: usize,
}

impl Translator {
    fn wrap_batch(&mut self, n: ExecNode) -> BoxedBatchOp {
        match n {
            ExecNode::Batch(b) if self.opts.force_adapters => {
                self.adapters += 2;
                let r = Box::new(BatchToRow::new(self.ctx.clone(), b));
                Box::new(RowToBatch::new(self.ctx.clone(), r))
            }
            ExecNode::Batch(b) => b,
            ExecNode::Row(r) => {
                self.adapters += 1;
                Box::new(RowToBatch::new(self.ctx.clone(), r))
            }
        }
    }

    fn wrap_row(&mut self, n: ExecNode) -> BoxedRowOp {
        match n {
            ExecNode::Row(r) if self.opts.force_adapters => {
                self.adapters += 2;
                let b = Box::new(RowToBatch::new(self.ctx.clone(), r));
                Box::new(BatchToRow::new(self.ctx.clone(), b))
            }
            ExecNode::Row(r) => r,
            ExecNode::Batch(b) => {
                self.adapters += 1;
                Box::new(BatchToRow::new(self.ctx.clone(), b))
            }
        }
    }

    fn build(&mut self, node: &PlanNode) -> ExecResult<(ExecNode, Option<ProbeTree>)> {
        let mut kids = Vec::new();
        let mut probe_kids = Vec::new();
        for c in &node.children {
            let (k, p) = self.build(c)?;
            kids.push(k);
            probe_kids.extend(p);
        }
        let ctx = self.ctx.clone();
        let op = match node.engine {
            Engine::Batch => {
                let mut kids: Vec<BoxedBatchOp> = kids.into_iter().map(|k| self.wrap_batch(k)).collect();
                let op: BoxedBatchOp = match &node.op {
                    PlanOp::Scan { pattern } => Box::new(VScan::new(ctx, *pattern, node.sort_var)?),
                    PlanOp::MergeJoin { key } => {
                        let r = kids.pop().unwrap();
                        let l = kids.pop().unwrap();
                        Box::new(VMergeJoin::new(ctx, l, r, *key)?)
                    }
                    PlanOp::HashJoin { .. } => unreachable!("hash join has no batch operator"),
                    PlanOp::Filter { exprs } => Box::new(VFilter::new(ctx, kids.pop().unwrap(), exprs.clone())),
                    PlanOp::Sort { var } => Box::new(VSort::new(ctx, kids.pop().unwrap(), *var)),
                    PlanOp::Union { sort_var } => Box::new(VUnion::new(ctx, kids, *sort_var)?),
                    PlanOp::Group { group_var, aggs } => Box::new(VGroup::new(ctx, kids.pop().unwrap(), *group_var, aggs.clone())?),
                    PlanOp::Distinct => {
                        let child = kids.pop().unwrap();
                        let var = child.output_vars()[0];
                        Box::new(VDistinct::new(ctx, child, var)?)
                    }
                    PlanOp::Project { vars } => Box::new(VProject::new(kids.pop().unwrap(), vars.clone())),
                    PlanOp::Limit { limit } => Box::new(VLimit::new(kids.pop().unwrap(), *limit)),
                };
                ExecNode::Batch(op)
            }
            Engine::Row => {
                let mut kids: Vec<BoxedRowOp> = kids.into_iter().map(|k| self.wrap_row(k)).collect();
                let op: BoxedRowOp = match &node.op {
                    PlanOp::Scan { pattern } => Box::new(RowScan::new(ctx, *pattern, node.sort_var)?),
                    PlanOp::MergeJoin { key } => {
                        let r = kids.pop().unwrap();
                        let l = kids.pop().unwrap();
                        Box::new(RowMergeJoin::new(l, r, *key)?)
                    }
                    PlanOp::HashJoin { .. } => {
                        let r = kids.pop().unwrap();
                        let l = kids.pop().unwrap();
                        Box::new(RowHashJoin::new(ctx, l, r))
                    }
                    PlanOp::Filter { exprs } => Box::new(RowFilter::new(ctx, kids.pop().unwrap(), exprs.clone())),
                    PlanOp::Sort { var } => Box::new(RowSort::new(ctx, kids.pop().unwrap(), *var)),
                    PlanOp::Union { sort_var } => Box::new(RowUnion::new(kids, *sort_var)?),
                    PlanOp::Group { group_var, aggs } => {
                        Box::new(RowHashGroup::new(ctx, kids.pop().unwrap(), *group_var, aggs.clone()))
                    }
                    PlanOp::Distinct => Box::new(RowDistinct::new(kids.pop().unwrap())),
                    PlanOp::Project { vars } => Box::new(RowProject::new(kids.pop().unwrap(), vars.clone())),
                    PlanOp::Limit { limit } => Box::new(RowLimit::new(kids.pop().unwrap(), *limit)),
                };
                ExecNode::Row(op)
            }
        };
        if !self.opts.profile {
            return Ok((op, None));
        }
        let probe: ProbeHandle = Rc::new(RefCell::new(Default::default()));
        let wrapped = match op {
            ExecNode::Batch(b) => ExecNode::Batch(Box::new(ProfiledBatch::new(b, probe.clone()))),
            ExecNode::Row(r) => ExecNode::Row(Box::new(ProfiledRow::new(r, probe.clone()))),
        };
        let tree = ProbeTree {
            label: node.label.clone(),
            engine: node.engine,
            probe,
            children: probe_kids,
        };
        Ok((wrapped, Some(tree)))
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EngineError {
    #[error(transparent)]
    Query(#[from] QueryError),
    #[error(transparent)]
    Exec(#[from] ExecError),
}

#[derive(Clone, Debug, PartialEq)]
pub struct EngineConfig {
    pub mode: EngineMode,
    pub exec: ExecConfig,
    pub cost: CostModel,
    pub profile: bool,
    pub force_adapters: bool,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig::new(EngineMode::Auto)
    }
}

impl EngineConfig {
    pub fn new(mode: EngineMode) -> Self {
        let p = PlannerConfig::with_mode(mode);
        EngineConfig {
            mode,
            exec: ExecConfig::default(),
            cost: p.cost,
            profile: false,
            force_adapters: false,
        }
    }

    pub fn planner(&self) -> PlannerConfig {
        PlannerConfig {
            mode: self.mode,
            cost: self.cost.clone(),
        }
    }
}

/// One result row; `None` marks an unbound variable.
pub type ResultRow = Vec<Option<Term>>;

#[derive(Clone, Debug)]
pub struct QueryOutput {
    pub columns: Vec<String>,
    pub rows: Vec<ResultRow>,
    pub plan: PlanNode,
    pub profile: Option<ProfileNode>,
    /// Rows fetched from storage cursors.
    pub rows_read: u64,
    pub adapters: usize,
    pub elapsed: Duration,
}

impl fmt::Display for QueryOutput {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{}", self.columns.join("\t"))?;
        for r in &self.rows {
            let cells: Vec<String> = r.iter().map(|c| c.as_ref().map(|t| t.to_string()).unwrap_or_default()).collect();
            writeln!(f, "{}", cells.join("\t"))?;
        }
        Ok(())
    }
}

pub fn execute(store: &Arc<TripleStore>, text: &str, config: &EngineConfig) -> Result<QueryOutput, EngineError> {
    let q = parse_query(text)?;
    execute_query(store, &q, config)
}

pub fn execute_query(store: &Arc<TripleStore>, q: &Query, config: &EngineConfig) -> Result<QueryOutput, EngineError> {
    let planned = plan_query(q, store, &config.planner())?;
    run_planned(store, &planned, config)
}

pub fn run_planned(store: &Arc<TripleStore>, planned: &PlannedQuery, config: &EngineConfig) -> Result<QueryOutput, EngineError> {
    let start = Instant::now();
    let ctx = Rc::new(ExecContext::new(store.clone(), config.exec.clone(), planned.vars.len()));
    let opts = TranslateOptions {
        profile: config.profile,
        force_adapters: config.force_adapters,
    };
    let mut exe = translate(&planned.root, ctx.clone(), opts)?;
    let full = exe.root.collect_rows(&ctx)?;
    let rows = full
        .iter()
        .map(|r| planned.columns.iter().map(|v| ctx.decode(r[v.index()])).collect())
        .collect();
    Ok(QueryOutput {
        columns: planned.column_names(),
        rows,
        plan: planned.root.clone(),
        profile: exe.probes.as_ref().map(|p| p.snapshot()),
        rows_read: ctx.rows_read(),
        adapters: exe.adapters,
        elapsed: start.elapsed(),
    })
}
