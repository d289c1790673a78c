//! In-memory triple store with sorted permutation indexes.
//!
//! Every triple is stored once per [`IndexOrder`] as a lexicographically
//! sorted array of permuted id keys. Triple pattern scans pick the order
//! whose prefix covers the pattern's constants, so the scan emits rows
//! sorted by the next (variable) position and supports `seek`.

use std::collections::HashSet;
use std::sync::Arc;

use thiserror::Error;

use crate::batch::VarId;
use crate::dictionary::{Dictionary, DictionaryError, Term, TermId};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum StorageError {
    #[error("store is frozen; inserts are only allowed during loading")]
    FrozenStore,
    #[error("store is not frozen yet; freeze it before scanning")]
    NotFrozen,
    #[error("no stored index can scan {pattern} sorted by {sort_var}")]
    NoSuitableIndex { pattern: String, sort_var: String },
    #[error("triple contains the NULL marker")]
    NullComponent,
    #[error(transparent)]
    Dictionary(#[from] DictionaryError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EncodedTriple {
    pub s: TermId,
    pub p: TermId,
    pub o: TermId,
}

impl EncodedTriple {
    pub fn new(s: TermId, p: TermId, o: TermId) -> Self {
        Self { s, p, o }
    }

    #[inline]
    pub fn get(&self, pos: usize) -> TermId {
        match pos {
            0 => self.s,
            1 => self.p,
            _ => self.o,
        }
    }
}

/// Index permutations kept by the store.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum IndexOrder {
    Spo,
    Pso,
    Pos,
    Osp,
}

impl IndexOrder {
    pub const ALL: [IndexOrder; 4] = [IndexOrder::Spo, IndexOrder::Pso, IndexOrder::Pos, IndexOrder::Osp];

    /// `positions()[k]` is the triple position (0 = s, 1 = p, 2 = o) stored at key slot `k`.
    #[inline]
    pub fn positions(self) -> [usize; 3] {
        match self {
            IndexOrder::Spo => [0, 1, 2],
            IndexOrder::Pso => [1, 0, 2],
            IndexOrder::Pos => [1, 2, 0],
            IndexOrder::Osp => [2, 0, 1],
        }
    }

    fn slot(self) -> usize {
        match self {
            IndexOrder::Spo => 0,
            IndexOrder::Pso => 1,
            IndexOrder::Pos => 2,
            IndexOrder::Osp => 3,
        }
    }

    #[inline]
    pub fn key(self, t: &EncodedTriple) -> [TermId; 3] {
        let p = self.positions();
        [t.get(p[0]), t.get(p[1]), t.get(p[2])]
    }

    #[inline]
    pub fn triple(self, key: &[TermId; 3]) -> EncodedTriple {
        let mut out = [TermId::NULL; 3];
        for (k, &pos) in self.positions().iter().enumerate() {
            out[pos] = key[k];
        }
        EncodedTriple::new(out[0], out[1], out[2])
    }

    pub fn name(self) -> &'static str {
        match self {
            IndexOrder::Spo => "SPO",
            IndexOrder::Pso => "PSO",
            IndexOrder::Pos => "POS",
            IndexOrder::Osp => "OSP",
        }
    }
}

/// One position of a triple pattern after dictionary encoding.
///
/// Constants missing from the dictionary are encoded as [`TermId::NULL`],
/// which no stored triple contains.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Slot {
    Var(VarId),
    Const(TermId),
}

impl Slot {
    pub fn var(self) -> Option<VarId> {
        match self {
            Slot::Var(v) => Some(v),
            Slot::Const(_) => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct TriplePattern {
    pub s: Slot,
    pub p: Slot,
    pub o: Slot,
}

impl TriplePattern {
    pub fn new(s: Slot, p: Slot, o: Slot) -> Self {
        Self { s, p, o }
    }

    #[inline]
    pub fn slot(&self, pos: usize) -> Slot {
        match pos {
            0 => self.s,
            1 => self.p,
            _ => self.o,
        }
    }

    pub fn slots(&self) -> [Slot; 3] {
        [self.s, self.p, self.o]
    }

    /// Distinct variables in s, p, o order.
    pub fn vars(&self) -> Vec<VarId> {
        let mut out = Vec::with_capacity(3);
        for s in self.slots() {
            if let Slot::Var(v) = s {
                if !out.contains(&v) {
                    out.push(v);
                }
            }
        }
        out
    }

    /// Pairs of positions that hold the same variable and must therefore be equal.
    pub fn repeated_positions(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for i in 0..3 {
            for j in i + 1..3 {
                if let (Slot::Var(a), Slot::Var(b)) = (self.slot(i), self.slot(j)) {
                    if a == b {
                        out.push((i, j));
                    }
                }
            }
        }
        out
    }

    pub fn matches(&self, t: &EncodedTriple) -> bool {
        for pos in 0..3 {
            if let Slot::Const(c) = self.slot(pos) {
                if t.get(pos) != c {
                    return false;
                }
            }
        }
        self.repeated_positions()
            .iter()
            .all(|&(i, j)| t.get(i) == t.get(j))
    }

    fn bound_mask(&self) -> [bool; 3] {
        [
            matches!(self.s, Slot::Const(_)),
            matches!(self.p, Slot::Const(_)),
            matches!(self.o, Slot::Const(_)),
        ]
    }
}

impl std::fmt::Display for TriplePattern {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let r = |s: Slot| match s {
            Slot::Var(v) => format!("?v{}", v.0),
            Slot::Const(c) => c.to_string(),
        };
        write!(f, "({}, {}, {})", r(self.s), r(self.p), r(self.o))
    }
}

/// Which index a scan uses and how many leading key slots are fixed by constants.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ScanPlan {
    pub order: IndexOrder,
    pub prefix_len: usize,
}

impl ScanPlan {
    /// Triple position the scan output is sorted by, if any slot remains unbound.
    pub fn sort_position(&self) -> Option<usize> {
        (self.prefix_len < 3).then(|| self.order.positions()[self.prefix_len])
    }
}

/// Picks the index for `pattern`, optionally requiring the output sorted by `sort_var`.
pub fn choose_index(
    pattern: &TriplePattern,
    sort_var: Option<VarId>,
) -> Result<ScanPlan, StorageError> {
    let bound = pattern.bound_mask();
    let nbound = bound.iter().filter(|b| **b).count();
    for order in IndexOrder::ALL {
        let pos = order.positions();
        if !(0..nbound).all(|k| bound[pos[k]]) {
            continue;
        }
        match sort_var {
            None => {
                return Ok(ScanPlan {
                    order,
                    prefix_len: nbound,
                })
            }
            Some(v) => {
                if nbound < 3 && pattern.slot(pos[nbound]) == Slot::Var(v) {
                    return Ok(ScanPlan {
                        order,
                        prefix_len: nbound,
                    });
                }
            }
        }
    }
    Err(StorageError::NoSuitableIndex {
        pattern: pattern.to_string(),
        sort_var: sort_var.map(|v| format!("?v{}", v.0)).unwrap_or_default(),
    })
}

#[derive(Debug, Default)]
pub struct TripleStore {
    dict: Dictionary,
    staged: HashSet<EncodedTriple>,
    indexes: [Arc<[[TermId; 3]]>; 4],
    frozen: bool,
}

impl TripleStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn dictionary(&self) -> &Dictionary {
        &self.dict
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen
    }

    pub fn len(&self) -> usize {
        if self.frozen {
            self.indexes[0].len()
        } else {
            self.staged.len()
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Adds an encoded triple. Duplicates are ignored.
    pub fn insert(&mut self, t: EncodedTriple) -> Result<(), StorageError> {
        if self.frozen {
            return Err(StorageError::FrozenStore);
        }
        if t.s.is_null() || t.p.is_null() || t.o.is_null() {
            return Err(StorageError::NullComponent);
        }
        self.staged.insert(t);
        Ok(())
    }

    /// Encodes the three terms and inserts the resulting triple.
    pub fn insert_terms(&mut self, s: &Term, p: &Term, o: &Term) -> Result<EncodedTriple, StorageError> {
        if self.frozen {
            return Err(StorageError::FrozenStore);
        }
        let t = EncodedTriple::new(self.dict.encode(s)?, self.dict.encode(p)?, self.dict.encode(o)?);
        self.insert(t)?;
        Ok(t)
    }

    /// Ends the load phase: builds every sorted index and freezes the dictionary.
    pub fn freeze(&mut self) {
        if self.frozen {
            return;
        }
        let staged = std::mem::take(&mut self.staged);
        for order in IndexOrder::ALL {
            let mut keys: Vec<[TermId; 3]> = staged.iter().map(|t| order.key(t)).collect();
            keys.sort_unstable();
            self.indexes[order.slot()] = keys.into();
        }
        self.dict.freeze();
        self.frozen = true;
    }

    pub fn index(&self, order: IndexOrder) -> &[[TermId; 3]] {
        &self.indexes[order.slot()]
    }

    /// All triples in SPO order.
    pub fn triples(&self) -> impl Iterator<Item = EncodedTriple> + '_ {
        self.index(IndexOrder::Spo)
            .iter()
            .map(|k| IndexOrder::Spo.triple(k))
    }

    fn check_frozen(&self) -> Result<(), StorageError> {
        if self.frozen {
            Ok(())
        } else {
            Err(StorageError::NotFrozen)
        }
    }

    fn range(&self, pattern: &TriplePattern, plan: ScanPlan) -> (usize, usize) {
        let rows = self.index(plan.order);
        let pos = plan.order.positions();
        let mut prefix = [TermId::NULL; 3];
        for k in 0..plan.prefix_len {
            if let Slot::Const(c) = pattern.slot(pos[k]) {
                prefix[k] = c;
            }
        }
        let n = plan.prefix_len;
        let lo = rows.partition_point(|r| r[..n] < prefix[..n]);
        let hi = lo + rows[lo..].partition_point(|r| r[..n] <= prefix[..n]);
        (lo, hi)
    }

    /// Opens a cursor over the triples matching `pattern`, sorted by `sort_var` if given.
    ///
    /// Positions repeating a variable are not checked by the cursor; callers
    /// filter those rows (see [`TriplePattern::repeated_positions`]).
    pub fn open_scan(
        &self,
        pattern: &TriplePattern,
        sort_var: Option<VarId>,
    ) -> Result<RangeCursor, StorageError> {
        self.check_frozen()?;
        let plan = choose_index(pattern, sort_var)?;
        let (start, end) = self.range(pattern, plan);
        Ok(RangeCursor {
            rows: Arc::clone(&self.indexes[plan.order.slot()]),
            plan,
            start,
            end,
            pos: start,
            rows_read: 0,
        })
    }

    /// Exact number of triples matching `pattern`.
    pub fn count_range(&self, pattern: &TriplePattern) -> Result<usize, StorageError> {
        self.check_frozen()?;
        let plan = choose_index(pattern, None)?;
        let (lo, hi) = self.range(pattern, plan);
        let repeated = pattern.repeated_positions();
        if repeated.is_empty() {
            return Ok(hi - lo);
        }
        // repeated variables need a pass over the range
        let rows = self.index(plan.order);
        Ok(rows[lo..hi]
            .iter()
            .filter(|k| {
                let t = plan.order.triple(k);
                repeated.iter().all(|&(i, j)| t.get(i) == t.get(j))
            })
            .count())
    }

    /// Exact number of distinct values `var` takes over the matches of `pattern`.
    pub fn distinct_count(&self, pattern: &TriplePattern, var: VarId) -> Result<usize, StorageError> {
        self.check_frozen()?;
        let Some(pos) = (0..3).find(|&p| pattern.slot(p) == Slot::Var(var)) else {
            return Ok(0);
        };
        let plan = choose_index(pattern, None)?;
        let (lo, hi) = self.range(pattern, plan);
        let mut seen = HashSet::new();
        for k in &self.index(plan.order)[lo..hi] {
            let t = plan.order.triple(k);
            if pattern.matches(&t) {
                seen.insert(t.get(pos));
            }
        }
        Ok(seen.len())
    }
}

/// Forward-only cursor over one index range.
#[derive(Debug, Clone)]
pub struct RangeCursor {
    rows: Arc<[[TermId; 3]]>,
    plan: ScanPlan,
    start: usize,
    end: usize,
    pos: usize,
    rows_read: u64,
}

impl RangeCursor {
    pub fn plan(&self) -> ScanPlan {
        self.plan
    }

    pub fn order(&self) -> IndexOrder {
        self.plan.order
    }

    pub fn is_exhausted(&self) -> bool {
        self.pos >= self.end
    }

    pub fn remaining(&self) -> usize {
        self.end - self.pos
    }

    /// Number of rows handed out by [`next_block`](Self::next_block) so far.
    pub fn rows_read(&self) -> u64 {
        self.rows_read
    }

    /// Sort-key value of the current row.
    pub fn peek_key(&self) -> Option<TermId> {
        if self.is_exhausted() || self.plan.prefix_len >= 3 {
            return None;
        }
        Some(self.rows[self.pos][self.plan.prefix_len])
    }

    /// Returns up to `n` rows as permuted keys (see [`IndexOrder::triple`]) and advances past them.
    pub fn next_block(&mut self, n: usize) -> &[[TermId; 3]] {
        let take = n.min(self.end - self.pos);
        let from = self.pos;
        self.pos += take;
        self.rows_read += take as u64;
        &self.rows[from..from + take]
    }

    /// Same as [`next_block`](Self::next_block) but decoded into triples.
    pub fn next_triples(&mut self, n: usize) -> Vec<EncodedTriple> {
        let order = self.plan.order;
        self.next_block(n).iter().map(|k| order.triple(k)).collect()
    }

    /// Moves to the first remaining row whose sort key is `>= key`. Never moves backwards.
    pub fn seek(&mut self, key: TermId) {
        let k = self.plan.prefix_len;
        if k >= 3 || self.is_exhausted() {
            return;
        }
        let rest = &self.rows[self.pos..self.end];
        self.pos += rest.partition_point(|r| r[k] < key);
    }

    pub fn rewind(&mut self) {
        self.pos = self.start;
        self.rows_read = 0;
    }
}
