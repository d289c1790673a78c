//! Logical plans: operator tree with estimates, sort properties, cost and
//! per-node executor tags.

use std::collections::HashMap;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::aggregate::AggregateSpec;
use crate::batch::VarId;
use crate::expr::FilterExpr;
use crate::storage::TriplePattern;

#[derive(Clone, Debug, PartialEq)]
pub enum PlanOp {
    Scan { pattern: TriplePattern },
    MergeJoin { key: VarId },
    /// Joins on every shared variable; no keys means a cross product.
    HashJoin { keys: Vec<VarId> },
    Filter { exprs: Vec<FilterExpr> },
    Sort { var: VarId },
    Union { sort_var: Option<VarId> },
    Group { group_var: Option<VarId>, aggs: Vec<AggregateSpec> },
    Distinct,
    Project { vars: Vec<VarId> },
    Limit { limit: usize },
}

impl PlanOp {
    pub fn name(&self) -> &'static str {
        match self {
            PlanOp::Scan { .. } => "Scan",
            PlanOp::MergeJoin { .. } => "MergeJoin",
            PlanOp::HashJoin { .. } => "HashJoin",
            PlanOp::Filter { .. } => "Filter",
            PlanOp::Sort { .. } => "Sort",
            PlanOp::Union { .. } => "Union",
            PlanOp::Group { .. } => "Group",
            PlanOp::Distinct => "Distinct",
            PlanOp::Project { .. } => "Project",
            PlanOp::Limit { .. } => "Limit",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Engine {
    Batch,
    Row,
}

/// How executor tags are assigned.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EngineMode {
    /// Row operators everywhere.
    Legacy,
    /// Batch operators wherever one exists.
    Batch,
    /// Batch when an implementation exists and the children produce batches,
    /// or for a merge join expected to produce more rows than any child.
    Auto,
    /// Random tag per node (where a batch operator exists), for adapter testing.
    Mixed(u64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct PlanNode {
    pub op: PlanOp,
    pub children: Vec<PlanNode>,
    /// Variables bound in the output, in column order.
    pub vars: Vec<VarId>,
    pub sort_var: Option<VarId>,
    /// Estimated output rows.
    pub est: f64,
    /// Estimated distinct values per output variable.
    pub distinct: HashMap<VarId, f64>,
    pub label: String,
    pub engine: Engine,
}

impl PlanNode {
    pub fn new(op: PlanOp, children: Vec<PlanNode>, label: String) -> Self {
        PlanNode {
            op,
            children,
            vars: Vec::new(),
            sort_var: None,
            est: 0.0,
            distinct: HashMap::new(),
            label,
            engine: Engine::Row,
        }
    }

    pub fn walk(&self, f: &mut impl FnMut(&PlanNode)) {
        f(self);
        for c in &self.children {
            c.walk(f);
        }
    }

    pub fn node_count(&self) -> usize {
        let mut n = 0;
        self.walk(&mut |_| n += 1);
        n
    }

    /// Number of parent/child edges whose executor tags differ.
    pub fn tag_boundaries(&self) -> usize {
        let mut n = 0;
        self.walk(&mut |p| n += p.children.iter().filter(|c| c.engine != p.engine).count());
        n
    }

    /// Whether a batch operator can implement this node given its children's properties.
    pub fn has_batch_impl(&self) -> bool {
        match &self.op {
            PlanOp::HashJoin { .. } => false,
            PlanOp::Group { group_var: Some(g), .. } => self.children[0].sort_var == Some(*g),
            PlanOp::Distinct => {
                let c = &self.children[0];
                c.vars.len() == 1 && c.sort_var == Some(c.vars[0])
            }
            _ => true,
        }
    }

    /// Plan shape as an indented tree of labels, without estimates.
    pub fn shape(&self) -> String {
        let mut out = String::new();
        render_tree(self, &mut out, "", "", &|n: &PlanNode| n.label.clone(), &|n| &n.children);
        out
    }

    /// Plan with estimates and executor tags.
    pub fn explain(&self) -> String {
        let mut out = String::new();
        let line = |n: &PlanNode| {
            let tag = if n.engine == Engine::Batch { ", batched" } else { "" };
            format!("{}, est: {}{}", n.label, n.est.round() as u64, tag)
        };
        render_tree(self, &mut out, "", "", &line, &|n| &n.children);
        out
    }
}

impl fmt::Display for PlanNode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.explain())
    }
}

/// Writes a tree using the `+- ` / `` `- `` connector style.
pub(crate) fn render_tree<T>(
    node: &T,
    out: &mut String,
    first: &str,
    rest: &str,
    line: &dyn Fn(&T) -> String,
    children: &dyn Fn(&T) -> &[T],
) {
    out.push_str(first);
    out.push_str(&line(node));
    out.push('\n');
    let kids = children(node);
    for (i, c) in kids.iter().enumerate() {
        let last = i + 1 == kids.len();
        let (conn, cont) = if last { ("`- ", "   ") } else { ("+- ", "|  ") };
        render_tree(c, out, &format!("{rest}{conn}"), &format!("{rest}{cont}"), line, children);
    }
}

/// Weights of the single cost model shared by both executors.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CostModel {
    /// Multiplier on merge joins that run batched and amplify their input; 1.0 disables it.
    pub discount: f64,
    /// Whether the batch executor is enabled at all.
    pub batch_enabled: bool,
    pub merge_join: f64,
    pub hash_join: f64,
    pub sort: f64,
    pub other: f64,
}

impl Default for CostModel {
    fn default() -> Self {
        CostModel {
            discount: 0.5,
            batch_enabled: true,
            merge_join: 1.0,
            hash_join: 1.0,
            sort: 1.5,
            other: 1.0,
        }
    }
}

impl CostModel {
    pub fn without_discount(&self) -> Self {
        CostModel { discount: 1.0, ..self.clone() }
    }

    /// Merge joins whose estimated output exceeds every input's estimate.
    pub fn is_discounted(&self, node: &PlanNode) -> bool {
        matches!(node.op, PlanOp::MergeJoin { .. }) && self.batch_enabled && is_amplifying(node)
    }

    fn weight(&self, node: &PlanNode) -> f64 {
        match node.op {
            PlanOp::MergeJoin { .. } => {
                if self.is_discounted(node) {
                    self.merge_join * self.discount
                } else {
                    self.merge_join
                }
            }
            PlanOp::HashJoin { .. } => self.hash_join,
            PlanOp::Sort { .. } => self.sort,
            // pass-through nodes carry no work of their own
            PlanOp::Project { .. } | PlanOp::Limit { .. } => 0.0,
            _ => self.other,
        }
    }

    /// Sum over nodes of `(rows_in + rows_out) * weight`.
    pub fn cost(&self, node: &PlanNode) -> f64 {
        let rows_in: f64 = node.children.iter().map(|c| c.est).sum();
        let own = (rows_in + node.est) * self.weight(node);
        own + node.children.iter().map(|c| self.cost(c)).sum::<f64>()
    }
}

pub fn is_amplifying(node: &PlanNode) -> bool {
    let max_in = node.children.iter().map(|c| c.est).fold(0.0, f64::max);
    node.est > max_in
}

/// Assigns an executor tag to every node, bottom-up.
pub fn choose_executors(node: &mut PlanNode, mode: EngineMode) {
    let mut rng = match mode {
        EngineMode::Mixed(seed) => Some(ChaCha8Rng::seed_from_u64(seed)),
        _ => None,
    };
    assign(node, mode, &mut rng);
}

fn assign(node: &mut PlanNode, mode: EngineMode, rng: &mut Option<ChaCha8Rng>) {
    for c in &mut node.children {
        assign(c, mode, rng);
    }
    let available = node.has_batch_impl();
    let batch = match mode {
        EngineMode::Legacy => false,
        EngineMode::Batch => available,
        EngineMode::Mixed(_) => available && rng.as_mut().is_none_or(|r| r.gen_bool(0.5)),
        EngineMode::Auto => {
            available
                && (node.children.iter().all(|c| c.engine == Engine::Batch)
                    || (matches!(node.op, PlanOp::MergeJoin { .. }) && is_amplifying(node)))
        }
    };
    node.engine = if batch { Engine::Batch } else { Engine::Row };
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::storage::Slot;
    use crate::dictionary::TermId;

    fn scan(est: f64, engine: Engine) -> PlanNode {
        let mut n = PlanNode::new(
            PlanOp::Scan {
                pattern: TriplePattern::new(Slot::Var(VarId(0)), Slot::Const(TermId(1)), Slot::Var(VarId(1))),
            },
            vec![],
            "Scan".into(),
        );
        n.est = est;
        n.engine = engine;
        n.vars = vec![VarId(0), VarId(1)];
        n.sort_var = Some(VarId(0));
        n
    }

    fn join(op: PlanOp, l: PlanNode, r: PlanNode, est: f64) -> PlanNode {
        let mut n = PlanNode::new(op, vec![l, r], "Join".into());
        n.est = est;
        n.vars = vec![VarId(0), VarId(1)];
        n.sort_var = Some(VarId(0));
        n
    }

    #[test]
    fn discount_lowers_only_amplifying_merge_joins() {
        let cm = CostModel::default();
        let mj = join(PlanOp::MergeJoin { key: VarId(0) }, scan(10.0, Engine::Row), scan(10.0, Engine::Row), 100.0);
        let hj = join(PlanOp::HashJoin { keys: vec![VarId(0)] }, scan(10.0, Engine::Row), scan(10.0, Engine::Row), 100.0);
        assert!(cm.cost(&mj) < cm.without_discount().cost(&mj));
        assert_eq!(cm.cost(&hj), cm.without_discount().cost(&hj));
        let shrinking = join(PlanOp::MergeJoin { key: VarId(0) }, scan(10.0, Engine::Row), scan(10.0, Engine::Row), 5.0);
        assert_eq!(cm.cost(&shrinking), cm.without_discount().cost(&shrinking));
    }

    #[test]
    fn zero_row_plan_costs_nothing() {
        let mj = join(PlanOp::MergeJoin { key: VarId(0) }, scan(0.0, Engine::Row), scan(0.0, Engine::Row), 0.0);
        assert_eq!(CostModel::default().cost(&mj), 0.0);
    }

    #[test]
    fn auto_mode_tags() {
        let mut mj = join(PlanOp::MergeJoin { key: VarId(0) }, scan(10.0, Engine::Row), scan(10.0, Engine::Row), 5.0);
        choose_executors(&mut mj, EngineMode::Auto);
        assert_eq!(mj.engine, Engine::Batch);
        assert_eq!(mj.tag_boundaries(), 0);

        // amplifying merge join above a hash join goes batched with one boundary
        let hj = join(PlanOp::HashJoin { keys: vec![] }, scan(10.0, Engine::Row), scan(10.0, Engine::Row), 100.0);
        let mut top = join(PlanOp::MergeJoin { key: VarId(0) }, hj.clone(), scan(10.0, Engine::Row), 1000.0);
        choose_executors(&mut top, EngineMode::Auto);
        assert_eq!(top.engine, Engine::Batch);
        assert_eq!(top.children[0].engine, Engine::Row);
        assert_eq!(top.tag_boundaries(), 3);

        let mut flat = join(PlanOp::MergeJoin { key: VarId(0) }, hj, scan(10.0, Engine::Row), 50.0);
        choose_executors(&mut flat, EngineMode::Auto);
        assert_eq!(flat.engine, Engine::Row);

        choose_executors(&mut top, EngineMode::Legacy);
        let mut all_row = true;
        top.walk(&mut |n| all_row &= n.engine == Engine::Row);
        assert!(all_row);
    }

    #[test]
    fn tree_rendering() {
        let mj = join(PlanOp::MergeJoin { key: VarId(0) }, scan(1.0, Engine::Row), scan(1.0, Engine::Row), 1.0);
        assert_eq!(mj.shape(), "Join\n+- Scan\n`- Scan\n");
    }
}
