//! Builds logical plans from parsed queries.
//!
//! Join order is greedy: the input with the smallest exact count seeds the
//! tree, then the connected input with the smallest count is appended. A
//! join step uses a merge join when the running result is already sorted on
//! a shared variable; otherwise a sort+merge-join and a hash join are both
//! costed and the cheaper one is kept. Filters are placed at the lowest node
//! binding all of their variables.

use std::collections::HashMap;

use crate::aggregate::{AggFunc, AggregateSpec};
use crate::batch::VarId;
use crate::dictionary::TermId;
use crate::expr::{FilterExpr, Operand};
use crate::plan::{choose_executors, CostModel, EngineMode, PlanNode, PlanOp};
use crate::query::{ExprAst, GroupPattern, PatternAst, Query, QueryError, SelectItem, TermOrVar};
use crate::storage::{choose_index, Slot, TriplePattern, TripleStore};

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct VarTable {
    names: Vec<String>,
}

impl VarTable {
    pub fn intern(&mut self, name: &str) -> VarId {
        match self.get(name) {
            Some(v) => v,
            None => {
                self.names.push(name.to_string());
                VarId((self.names.len() - 1) as u16)
            }
        }
    }

    pub fn get(&self, name: &str) -> Option<VarId> {
        self.names.iter().position(|n| n == name).map(|i| VarId(i as u16))
    }

    pub fn name(&self, v: VarId) -> &str {
        &self.names[v.index()]
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PlannerConfig {
    pub mode: EngineMode,
    pub cost: CostModel,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        PlannerConfig {
            mode: EngineMode::Auto,
            cost: CostModel::default(),
        }
    }
}

impl PlannerConfig {
    pub fn with_mode(mode: EngineMode) -> Self {
        let mut c = PlannerConfig {
            mode,
            ..Default::default()
        };
        c.cost.batch_enabled = mode != EngineMode::Legacy;
        c
    }
}

#[derive(Clone, Debug)]
pub struct PlannedQuery {
    pub root: PlanNode,
    pub vars: VarTable,
    /// Result columns in output order.
    pub columns: Vec<VarId>,
}

impl PlannedQuery {
    pub fn column_names(&self) -> Vec<String> {
        self.columns.iter().map(|v| self.vars.name(*v).to_string()).collect()
    }
}

pub fn plan_query(q: &Query, store: &TripleStore, config: &PlannerConfig) -> Result<PlannedQuery, QueryError> {
    let mut p = Planner {
        store,
        vars: VarTable::default(),
        cost: &config.cost,
    };
    for v in q.body.vars() {
        p.vars.intern(&v);
    }
    let single_distinct = match (q.distinct, q.select.as_slice()) {
        (true, [SelectItem::Var(v)]) => p.vars.get(v),
        _ => None,
    };
    let prefer = q.group_by.as_deref().and_then(|g| p.vars.get(g)).or(single_distinct);
    let mut root = p.plan_group(&q.body, prefer)?;

    let columns: Vec<VarId>;
    if q.is_aggregate() {
        let group_var = q.group_by.as_deref().map(|g| p.vars.intern(g));
        let aggs: Vec<AggregateSpec> = q
            .aggregates()
            .iter()
            .map(|a| AggregateSpec {
                func: a.func,
                arg: a.arg.as_deref().map(|v| p.vars.intern(v)),
                out: p.vars.intern(&a.alias),
            })
            .collect();
        columns = q.result_vars().iter().map(|n| p.vars.intern(n)).collect();
        let label = group_label(&p.vars, group_var, &aggs);
        let mut g = PlanNode::new(PlanOp::Group { group_var, aggs: aggs.clone() }, vec![root], label);
        g.vars = group_var.into_iter().chain(aggs.iter().map(|a| a.out)).collect();
        g.sort_var = group_var;
        g.est = match group_var {
            Some(v) => distinct_of(&g.children[0], v),
            None => 1.0,
        };
        for v in &g.vars.clone() {
            g.distinct.insert(*v, g.est);
        }
        root = g;
        if !same_set(&root.vars, &columns) {
            root = p.project(root, columns.clone());
        }
    } else {
        columns = q.result_vars().iter().map(|n| p.vars.intern(n)).collect();
        root = p.project(root, columns.clone());
    }
    if q.distinct {
        let mut d = PlanNode::new(PlanOp::Distinct, vec![], "Distinct".into());
        d.vars = root.vars.clone();
        d.sort_var = root.sort_var;
        d.est = root.est;
        d.distinct = root.distinct.clone();
        d.children.push(root);
        root = d;
    }
    if let Some(n) = q.limit {
        let mut l = PlanNode::new(PlanOp::Limit { limit: n }, vec![], format!("Limit({n})"));
        l.vars = root.vars.clone();
        l.sort_var = root.sort_var;
        l.est = root.est.min(n as f64);
        l.distinct = root.distinct.clone();
        l.children.push(root);
        root = l;
    }
    choose_executors(&mut root, config.mode);
    Ok(PlannedQuery {
        root,
        vars: p.vars,
        columns,
    })
}

fn same_set(a: &[VarId], b: &[VarId]) -> bool {
    a.len() == b.len() && a.iter().all(|v| b.contains(v))
}

fn distinct_of(n: &PlanNode, v: VarId) -> f64 {
    n.distinct.get(&v).copied().unwrap_or(n.est).min(n.est)
}

pub(crate) fn group_label(vars: &VarTable, group_var: Option<VarId>, aggs: &[AggregateSpec]) -> String {
    let items: Vec<String> = aggs
        .iter()
        .map(|a| {
            let arg = match (a.func, a.arg) {
                (AggFunc::CountAll, _) => "*".to_string(),
                (AggFunc::CountDistinct, Some(v)) => format!("DISTINCT ?{}", vars.name(v)),
                (_, Some(v)) => format!("?{}", vars.name(v)),
                (_, None) => String::new(),
            };
            format!("({}({}) AS ?{})", a.func.name(), arg, vars.name(a.out))
        })
        .collect();
    match group_var {
        Some(g) => format!("Group(by=?{}, aggregates=[{}])", vars.name(g), items.join(", ")),
        None => format!("Group(aggregates=[{}])", items.join(", ")),
    }
}

/// One input of a join step before it is turned into a plan node.
enum Input<'q> {
    Scan(&'q PatternAst),
    Union(&'q [GroupPattern]),
}

struct Planner<'a> {
    store: &'a TripleStore,
    vars: VarTable,
    cost: &'a CostModel,
}

struct Prepared<'q> {
    input: Input<'q>,
    vars: Vec<VarId>,
    est: f64,
    /// Filters covered by this input alone.
    filters: Vec<usize>,
}

impl<'a> Planner<'a> {
    fn var_name(&self, v: VarId) -> String {
        format!("?{}", self.vars.name(v))
    }

    fn slot(&self, t: &TermOrVar) -> Slot {
        match t {
            TermOrVar::Var(v) => Slot::Var(self.vars.get(v).expect("variables are interned up front")),
            // a constant missing from the data becomes NULL and matches nothing
            TermOrVar::Term(t) => Slot::Const(self.store.dictionary().lookup(t).unwrap_or(TermId::NULL)),
        }
    }

    fn pattern(&self, p: &PatternAst) -> TriplePattern {
        TriplePattern::new(self.slot(&p.s), self.slot(&p.p), self.slot(&p.o))
    }

    fn filter_expr(&mut self, e: &ExprAst) -> Result<FilterExpr, QueryError> {
        Ok(match e {
            ExprAst::Bound(v) => FilterExpr::Bound(self.vars.intern(v)),
            ExprAst::Compare { op, left, right } => {
                let mut operand = |o: &TermOrVar| -> Result<Operand, QueryError> {
                    Ok(match o {
                        TermOrVar::Var(v) => Operand::Var(self.vars.intern(v)),
                        TermOrVar::Term(t) if op.is_ordering() => match t.integer_value() {
                            Some(i) => Operand::Int(i),
                            None => {
                                return Err(QueryError::Unsupported {
                                    feature: format!("ordering comparison with non-integer constant {t}"),
                                    line: 0,
                                    col: 0,
                                })
                            }
                        },
                        TermOrVar::Term(t) => Operand::Term(self.store.dictionary().lookup(t).unwrap_or(TermId::NULL)),
                    })
                };
                FilterExpr::Compare {
                    op: *op,
                    left: operand(left)?,
                    right: operand(right)?,
                }
            }
        })
    }

    fn scan_node(&self, ast: &PatternAst, sort: Option<VarId>) -> Option<PlanNode> {
        let pattern = self.pattern(ast);
        let plan = choose_index(&pattern, sort).ok()?;
        let mut n = PlanNode::new(PlanOp::Scan { pattern }, vec![], format!("Scan({ast})"));
        n.vars = pattern.vars();
        n.sort_var = plan.sort_position().and_then(|p| pattern.slot(p).var());
        n.est = self.store.count_range(&pattern).unwrap_or(0) as f64;
        for v in &n.vars {
            let d = self.store.distinct_count(&pattern, *v).unwrap_or(0) as f64;
            n.distinct.insert(*v, d);
        }
        Some(n)
    }

    fn with_filters(&self, mut node: PlanNode, exprs: Vec<(FilterExpr, String)>) -> PlanNode {
        if exprs.is_empty() {
            return node;
        }
        let sel: f64 = exprs.iter().map(|(e, _)| selectivity(e, &node)).product();
        let label = format!("Filter({})", exprs.iter().map(|(_, l)| l.as_str()).collect::<Vec<_>>().join(" && "));
        let mut f = PlanNode::new(
            PlanOp::Filter {
                exprs: exprs.into_iter().map(|(e, _)| e).collect(),
            },
            vec![],
            label,
        );
        f.vars = node.vars.clone();
        f.sort_var = node.sort_var;
        f.est = node.est * sel;
        f.distinct = std::mem::take(&mut node.distinct);
        for d in f.distinct.values_mut() {
            *d = d.min(f.est);
        }
        f.children.push(node);
        f
    }

    fn sort(&self, node: PlanNode, var: VarId) -> PlanNode {
        let mut s = PlanNode::new(PlanOp::Sort { var }, vec![], format!("Sort({})", self.var_name(var)));
        s.vars = node.vars.clone();
        s.sort_var = Some(var);
        s.est = node.est;
        s.distinct = node.distinct.clone();
        s.children.push(node);
        s
    }

    fn project(&self, node: PlanNode, vars: Vec<VarId>) -> PlanNode {
        let names: Vec<String> = vars.iter().map(|v| self.var_name(*v)).collect();
        let mut p = PlanNode::new(PlanOp::Project { vars: vars.clone() }, vec![], format!("Project({})", names.join(", ")));
        p.sort_var = node.sort_var.filter(|s| vars.contains(s));
        p.est = node.est;
        p.distinct = vars.iter().filter_map(|v| node.distinct.get(v).map(|d| (*v, *d))).collect();
        p.vars = vars;
        p.children.push(node);
        p
    }

    fn join(&self, a: PlanNode, b: PlanNode, merge_key: Option<VarId>) -> PlanNode {
        let shared: Vec<VarId> = a.vars.iter().filter(|v| b.vars.contains(v)).copied().collect();
        let mut est = a.est * b.est;
        for v in &shared {
            let d = distinct_of(&a, *v).max(distinct_of(&b, *v));
            if d > 0.0 {
                est /= d;
            }
        }
        let mut distinct = HashMap::new();
        for (v, d) in a.distinct.iter().chain(b.distinct.iter()) {
            let e = distinct.entry(*v).or_insert(*d);
            *e = f64::min(*e, *d).min(est);
        }
        let (left, right, op, label) = match merge_key {
            Some(k) => {
                let (l, r) = if b.est < a.est { (b, a) } else { (a, b) };
                (l, r, PlanOp::MergeJoin { key: k }, format!("MergeJoin({})", self.var_name(k)))
            }
            None => {
                // the build side (right) is the smaller input
                let (l, r) = if a.est < b.est { (b, a) } else { (a, b) };
                let names: Vec<String> = shared.iter().map(|v| self.var_name(*v)).collect();
                (l, r, PlanOp::HashJoin { keys: shared.clone() }, format!("HashJoin({})", names.join(", ")))
            }
        };
        let mut vars = left.vars.clone();
        vars.extend(right.vars.iter().filter(|v| !left.vars.contains(v)));
        let mut n = PlanNode::new(op, vec![], label);
        n.vars = vars;
        n.sort_var = match merge_key {
            Some(k) => Some(k),
            None => left.sort_var,
        };
        n.est = est;
        n.distinct = distinct;
        n.children = vec![left, right];
        n
    }

    /// Plans a `{ ... }` block. `prefer` asks for output sorted by that variable when cheap.
    fn plan_group(&mut self, g: &GroupPattern, prefer: Option<VarId>) -> Result<PlanNode, QueryError> {
        if g.patterns.is_empty() && g.unions.is_empty() {
            return Err(QueryError::Unsupported {
                feature: "group pattern without triple patterns".into(),
                line: 0,
                col: 0,
            });
        }
        let mut filters = Vec::new();
        for e in &g.filters {
            let label = e.to_string();
            filters.push((self.filter_expr(e)?, label));
        }
        let mut inputs: Vec<Prepared> = Vec::new();
        for p in &g.patterns {
            let n = self.scan_node(p, None).expect("some index serves every pattern without a sort order");
            inputs.push(Prepared {
                input: Input::Scan(p),
                vars: n.vars,
                est: n.est,
                filters: vec![],
            });
        }
        for u in &g.unions {
            let mut vars: Vec<VarId> = Vec::new();
            let mut est = 0.0;
            for b in u.iter() {
                let n = self.plan_group(b, None)?;
                est += n.est;
                for v in n.vars {
                    if !vars.contains(&v) {
                        vars.push(v);
                    }
                }
            }
            inputs.push(Prepared {
                input: Input::Union(u),
                vars,
                est,
                filters: vec![],
            });
        }
        self.check_union_scoping(&inputs)?;

        let mut assigned = vec![false; filters.len()];
        for (i, (e, _)) in filters.iter().enumerate() {
            let fv = e.vars();
            if fv.is_empty() {
                continue;
            }
            if let Some(inp) = inputs.iter_mut().find(|inp| fv.iter().all(|v| inp.vars.contains(v))) {
                inp.filters.push(i);
                assigned[i] = true;
            }
        }

        // seed: smallest count, query order breaks ties
        let mut order: Vec<usize> = (0..inputs.len()).collect();
        order.sort_by(|a, b| inputs[*a].est.total_cmp(&inputs[*b].est));
        let seed = order[0];
        let mut used = vec![false; inputs.len()];
        used[seed] = true;

        let mut current: Option<PlanNode> = None;
        let mut bound: Vec<VarId> = inputs[seed].vars.clone();
        if inputs.len() == 1 {
            let n = match prefer.and_then(|v| self.realize(&inputs[seed], v, &filters)) {
                Some(n) => n,
                None => self.realize_any(&inputs[seed], &filters),
            };
            current = Some(n);
        }
        while used.iter().any(|u| !u) {
            let connected = order
                .iter()
                .copied()
                .find(|&i| !used[i] && inputs[i].vars.iter().any(|v| bound.contains(v)));
            let next = connected.unwrap_or_else(|| order.iter().copied().find(|&i| !used[i]).unwrap());
            used[next] = true;
            let shared: Vec<VarId> = inputs[next].vars.iter().filter(|v| bound.contains(v)).copied().collect();
            let node = match current.take() {
                None => self.first_join(&inputs[seed], &inputs[next], &shared, &filters),
                Some(cur) => self.extend(cur, &inputs[next], &shared, &filters),
            };
            for v in &inputs[next].vars {
                if !bound.contains(v) {
                    bound.push(*v);
                }
            }
            // filters that became evaluable at this join
            let ready: Vec<(FilterExpr, String)> = filters
                .iter()
                .enumerate()
                .filter(|(i, (e, _))| !assigned[*i] && !e.vars().is_empty() && e.vars().iter().all(|v| bound.contains(v)))
                .map(|(_, f)| f.clone())
                .collect();
            for (i, (e, _)) in filters.iter().enumerate() {
                if !e.vars().is_empty() && e.vars().iter().all(|v| bound.contains(v)) {
                    assigned[i] = true;
                }
            }
            current = Some(self.with_filters(node, ready));
        }
        let rest: Vec<(FilterExpr, String)> = filters
            .iter()
            .enumerate()
            .filter(|(i, _)| !assigned[*i])
            .map(|(_, f)| f.clone())
            .collect();
        Ok(self.with_filters(current.unwrap(), rest))
    }

    /// Variables bound by only some UNION branches cannot be join keys: the
    /// joins here never treat an unbound value as compatible.
    fn check_union_scoping(&mut self, inputs: &[Prepared]) -> Result<(), QueryError> {
        for (i, inp) in inputs.iter().enumerate() {
            let Input::Union(branches) = inp.input else { continue };
            let mut always: Vec<VarId> = inp.vars.clone();
            for b in branches {
                let bv: Vec<VarId> = b.vars().iter().map(|n| self.vars.intern(n)).collect();
                always.retain(|v| bv.contains(v));
            }
            for v in inp.vars.iter().filter(|v| !always.contains(v)) {
                if inputs.iter().enumerate().any(|(j, o)| j != i && o.vars.contains(v)) {
                    return Err(QueryError::Unsupported {
                        feature: format!("join on ?{}, which only some UNION branches bind", self.vars.name(*v)),
                        line: 0,
                        col: 0,
                    });
                }
            }
        }
        Ok(())
    }

    fn input_filters(&self, inp: &Prepared, filters: &[(FilterExpr, String)]) -> Vec<(FilterExpr, String)> {
        inp.filters.iter().map(|&i| filters[i].clone()).collect()
    }

    /// The input sorted by `var` without an explicit sort, if possible.
    fn realize(&mut self, inp: &Prepared, var: VarId, filters: &[(FilterExpr, String)]) -> Option<PlanNode> {
        if !inp.vars.contains(&var) {
            return None;
        }
        let node = match inp.input {
            Input::Scan(p) => self.scan_node(p, Some(var))?,
            Input::Union(branches) => {
                let mut kids = Vec::new();
                for b in branches {
                    let n = self.plan_sorted_branch(b, var)?;
                    kids.push(n);
                }
                self.union_node(kids, Some(var))
            }
        };
        Some(self.with_filters(node, self.input_filters(inp, filters)))
    }

    fn realize_any(&mut self, inp: &Prepared, filters: &[(FilterExpr, String)]) -> PlanNode {
        let node = match inp.input {
            Input::Scan(p) => self.scan_node(p, None).unwrap(),
            Input::Union(branches) => {
                let kids = branches.iter().map(|b| self.plan_group(b, None).unwrap()).collect();
                self.union_node(kids, None)
            }
        };
        self.with_filters(node, self.input_filters(inp, filters))
    }

    fn plan_sorted_branch(&mut self, b: &GroupPattern, var: VarId) -> Option<PlanNode> {
        let n = self.plan_group(b, Some(var)).ok()?;
        (n.sort_var == Some(var)).then_some(n)
    }

    fn union_node(&self, kids: Vec<PlanNode>, sort_var: Option<VarId>) -> PlanNode {
        let mut n = PlanNode::new(PlanOp::Union { sort_var }, vec![], "Union".into());
        for k in &kids {
            for v in &k.vars {
                if !n.vars.contains(v) {
                    n.vars.push(*v);
                }
            }
            for (v, d) in &k.distinct {
                *n.distinct.entry(*v).or_insert(0.0) += d;
            }
        }
        n.est = kids.iter().map(|k| k.est).sum();
        n.sort_var = sort_var;
        n.children = kids;
        n
    }

    fn first_join(&mut self, seed: &Prepared, next: &Prepared, shared: &[VarId], filters: &[(FilterExpr, String)]) -> PlanNode {
        for &k in shared {
            if let (Some(a), Some(b)) = (self.realize(seed, k, filters), self.realize(next, k, filters)) {
                return self.join(a, b, Some(k));
            }
        }
        let cur = self.realize_any(seed, filters);
        self.extend(cur, next, shared, filters)
    }

    /// Joins the running result with one more input, choosing the cheaper algorithm.
    fn extend(&mut self, cur: PlanNode, next: &Prepared, shared: &[VarId], filters: &[(FilterExpr, String)]) -> PlanNode {
        if let Some(s) = cur.sort_var.filter(|s| shared.contains(s)) {
            if let Some(n) = self.realize(next, s, filters) {
                return self.join(cur, n, Some(s));
            }
        }
        let any = self.realize_any(next, filters);
        let mut best = self.join(cur.clone(), any, None);
        let mut best_cost = self.cost.cost(&best);
        for &k in shared {
            let left = if cur.sort_var == Some(k) { cur.clone() } else { self.sort(cur.clone(), k) };
            let right = match self.realize(next, k, filters) {
                Some(n) => n,
                None => {
                    let n = self.realize_any(next, filters);
                    self.sort(n, k)
                }
            };
            let cand = self.join(left, right, Some(k));
            let c = self.cost.cost(&cand);
            if c <= best_cost {
                best = cand;
                best_cost = c;
            }
        }
        best
    }
}

fn selectivity(e: &FilterExpr, node: &PlanNode) -> f64 {
    use crate::expr::CompareOp;
    match e {
        FilterExpr::Bound(_) => 1.0,
        FilterExpr::Compare { op, left, right } => match (op, left, right) {
            (CompareOp::Eq, Operand::Var(v), _) | (CompareOp::Eq, _, Operand::Var(v)) => {
                1.0 / distinct_of(node, *v).max(1.0)
            }
            (CompareOp::Eq, _, _) => 0.5,
            (CompareOp::Ne, Operand::Var(v), _) | (CompareOp::Ne, _, Operand::Var(v)) => {
                1.0 - 1.0 / distinct_of(node, *v).max(1.0)
            }
            (CompareOp::Ne, _, _) => 0.5,
            _ => 1.0 / 3.0,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dictionary::Term;
    use crate::plan::Engine;
    use crate::query::parse_query;

    fn ex(s: &str) -> Term {
        Term::iri(format!("http://example.org/{s}"))
    }

    /// Two-hop social graph where :interest is sparser than :knows.
    fn social() -> TripleStore {
        let mut st = TripleStore::new();
        let n = 40;
        for i in 0..n {
            for d in 1..=10 {
                st.insert_terms(&ex(&format!("p{i}")), &ex("knows"), &ex(&format!("p{}", (i + d) % n))).unwrap();
            }
            for t in [i % 5, 5 + i % 3] {
                st.insert_terms(&ex(&format!("p{i}")), &ex("interest"), &ex(&format!("t{t}"))).unwrap();
            }
        }
        st.freeze();
        st
    }

    const FIG1: &str = "SELECT (COUNT(*) AS ?count) { ?person1 :knows ?person2 . ?person2 :knows ?person3 . ?person3 :interest ?tag . FILTER(?person1 != ?person3) }";

    #[test]
    fn fig1_plan_shape() {
        let st = social();
        let q = parse_query(FIG1).unwrap();
        let p = plan_query(&q, &st, &PlannerConfig::default()).unwrap();
        assert_eq!(
            p.root.shape(),
            "Group(aggregates=[(COUNT(*) AS ?count)])
`- Filter(?person1 != ?person3)
   `- MergeJoin(?person2)
      +- Scan(?person1, :knows, ?person2)
      `- Sort(?person2)
         `- MergeJoin(?person3)
            +- Scan(?person3, :interest, ?tag)
            `- Scan(?person2, :knows, ?person3)
"
        );
        let mut all_batch = true;
        p.root.walk(&mut |n| all_batch &= n.engine == Engine::Batch);
        assert!(all_batch);
        assert_eq!(p.root.tag_boundaries(), 0);
    }

    #[test]
    fn without_discount_hash_join_wins() {
        let st = social();
        let q = parse_query(FIG1).unwrap();
        let mut cfg = PlannerConfig::default();
        cfg.cost = cfg.cost.without_discount();
        let p = plan_query(&q, &st, &cfg).unwrap();
        assert!(p.root.shape().contains("HashJoin(?person2)"), "{}", p.root.shape());
    }

    #[test]
    fn single_pattern_is_scan_and_project() {
        let st = social();
        let p = plan_query(&parse_query("SELECT * { ?s ?p ?o }").unwrap(), &st, &PlannerConfig::default()).unwrap();
        assert_eq!(p.root.shape(), "Project(?s, ?p, ?o)\n`- Scan(?s, ?p, ?o)\n");
    }

    #[test]
    fn selective_pattern_seeds() {
        let st = social();
        let q = parse_query("SELECT * { ?a :knows ?b . ?a :interest :t0 }").unwrap();
        let p = plan_query(&q, &st, &PlannerConfig::default()).unwrap();
        assert_eq!(
            p.root.shape(),
            "Project(?a, ?b)\n`- MergeJoin(?a)\n   +- Scan(?a, :interest, :t0)\n   `- Scan(?a, :knows, ?b)\n"
        );
    }

    #[test]
    fn hash_group_gets_one_adapter() {
        let st = social();
        // the join ends sorted on ?b, so grouping by ?a needs the hash group
        let q = parse_query("SELECT ?a (COUNT(*) AS ?n) { ?a :knows ?b . ?b :interest ?t } GROUP BY ?a").unwrap();
        let p = plan_query(&q, &st, &PlannerConfig::default()).unwrap();
        assert_eq!(p.root.engine, Engine::Row);
        assert_eq!(p.root.children[0].engine, Engine::Batch);
        assert_eq!(p.root.tag_boundaries(), 1);
    }

    #[test]
    fn streaming_group_when_sorted() {
        let st = social();
        let q = parse_query(
            "SELECT ?person (COUNT(DISTINCT ?friend) AS ?friends) (COUNT(DISTINCT ?interest) AS ?interests)
             { ?person :knows ?friend . ?person :interest ?interest . } GROUP BY ?person",
        )
        .unwrap();
        let p = plan_query(&q, &st, &PlannerConfig::default()).unwrap();
        assert!(p.root.label.starts_with("Group(by=?person"));
        assert_eq!(p.root.engine, Engine::Batch);
    }

    #[test]
    fn filters_are_pushed_down() {
        let st = social();
        let q = parse_query("SELECT * { ?a :knows ?b . ?b :knows ?c FILTER(?a != :p1) FILTER(?a != ?c) }").unwrap();
        let p = plan_query(&q, &st, &PlannerConfig::default()).unwrap();
        let shape = p.root.shape();
        assert!(shape.contains("Filter(?a != :p1)\n") && shape.contains("Scan(?a, :knows, ?b)"), "{shape}");
        assert!(shape.starts_with("Project(?a, ?b, ?c)\n`- Filter(?a != ?c)"), "{shape}");
    }

    #[test]
    fn union_scoping_is_checked() {
        let st = social();
        let q = parse_query("SELECT * { { ?a :knows ?b } UNION { ?a :interest ?t } ?b :knows ?c }").unwrap();
        assert!(matches!(plan_query(&q, &st, &PlannerConfig::default()), Err(QueryError::Unsupported { .. })));
        let q = parse_query("SELECT * { { ?a :knows ?b } UNION { ?b :knows ?a } ?b :interest ?t }").unwrap();
        let p = plan_query(&q, &st, &PlannerConfig::default()).unwrap();
        assert!(p.root.shape().contains("Union"), "{}", p.root.shape());
    }
}
