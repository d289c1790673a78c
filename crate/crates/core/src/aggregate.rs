//! Aggregate functions with mergeable partial states.
//!
//! A state can be fed values one at a time or built per batch run and
//! merged; for every supported function merging is associative and
//! independent of how the input was split.

use std::collections::HashSet;

use serde::Serialize;

use crate::batch::VarId;
use crate::dictionary::{Term, TermId};
use crate::operator::ExecContext;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum AggFunc {
    /// `COUNT(*)`
    CountAll,
    /// `COUNT(?v)`: bound values
    Count,
    /// `COUNT(DISTINCT ?v)`
    CountDistinct,
    Min,
    Max,
    Sum,
    Avg,
}

impl AggFunc {
    pub fn name(self) -> &'static str {
        match self {
            AggFunc::CountAll | AggFunc::Count | AggFunc::CountDistinct => "COUNT",
            AggFunc::Min => "MIN",
            AggFunc::Max => "MAX",
            AggFunc::Sum => "SUM",
            AggFunc::Avg => "AVG",
        }
    }
}

/// One aggregate of a GROUP node: `func(arg) AS out`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct AggregateSpec {
    pub func: AggFunc,
    pub arg: Option<VarId>,
    pub out: VarId,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum AggState {
    Count(u64),
    Distinct(HashSet<TermId>),
    Min(Option<TermId>),
    Max(Option<TermId>),
    Sum { sum: i128, error: bool },
    Avg { sum: i128, count: u64, error: bool },
}

/// Ordering used by MIN/MAX: integers by value (ties by id) before all other terms, which order by id.
pub fn extremum_key(ctx: &ExecContext, id: TermId) -> (u8, i64, u64) {
    match ctx.numeric(id) {
        Some(v) => (0, v, id.0),
        None => (1, 0, id.0),
    }
}

impl AggState {
    pub fn new(func: AggFunc) -> Self {
        match func {
            AggFunc::CountAll | AggFunc::Count => AggState::Count(0),
            AggFunc::CountDistinct => AggState::Distinct(HashSet::new()),
            AggFunc::Min => AggState::Min(None),
            AggFunc::Max => AggState::Max(None),
            AggFunc::Sum => AggState::Sum { sum: 0, error: false },
            AggFunc::Avg => AggState::Avg {
                sum: 0,
                count: 0,
                error: false,
            },
        }
    }

    /// Feeds one row. `value` is the argument's value (NULL when unbound);
    /// for `COUNT(*)` pass any value, it is not inspected.
    #[inline]
    pub fn update(&mut self, func: AggFunc, ctx: &ExecContext, value: TermId) {
        if func == AggFunc::CountAll {
            if let AggState::Count(n) = self {
                *n += 1;
            }
            return;
        }
        if value.is_null() {
            return;
        }
        match self {
            AggState::Count(n) => *n += 1,
            AggState::Distinct(set) => {
                set.insert(value);
            }
            AggState::Min(cur) => {
                if cur.is_none_or(|c| extremum_key(ctx, value) < extremum_key(ctx, c)) {
                    *cur = Some(value);
                }
            }
            AggState::Max(cur) => {
                if cur.is_none_or(|c| extremum_key(ctx, value) > extremum_key(ctx, c)) {
                    *cur = Some(value);
                }
            }
            AggState::Sum { sum, error } => match ctx.numeric(value) {
                Some(v) => *sum += v as i128,
                None => *error = true,
            },
            AggState::Avg { sum, count, error } => match ctx.numeric(value) {
                Some(v) => {
                    *sum += v as i128;
                    *count += 1;
                }
                None => *error = true,
            },
        }
    }

    /// Adds `n` rows to a `COUNT(*)` state at once.
    #[inline]
    pub fn add_count(&mut self, n: u64) {
        if let AggState::Count(c) = self {
            *c += n;
        }
    }

    /// Merges a partial state computed over a disjoint slice of the same group.
    pub fn merge(&mut self, ctx: &ExecContext, other: AggState) {
        match (self, other) {
            (AggState::Count(a), AggState::Count(b)) => *a += b,
            (AggState::Distinct(a), AggState::Distinct(b)) => {
                if a.len() < b.len() {
                    let small = std::mem::replace(a, b);
                    a.extend(small);
                } else {
                    a.extend(b);
                }
            }
            (AggState::Min(a), AggState::Min(b)) => {
                if let Some(b) = b {
                    if a.is_none_or(|x| extremum_key(ctx, b) < extremum_key(ctx, x)) {
                        *a = Some(b);
                    }
                }
            }
            (AggState::Max(a), AggState::Max(b)) => {
                if let Some(b) = b {
                    if a.is_none_or(|x| extremum_key(ctx, b) > extremum_key(ctx, x)) {
                        *a = Some(b);
                    }
                }
            }
            (AggState::Sum { sum, error }, AggState::Sum { sum: s2, error: e2 }) => {
                *sum += s2;
                *error |= e2;
            }
            (
                AggState::Avg { sum, count, error },
                AggState::Avg {
                    sum: s2,
                    count: c2,
                    error: e2,
                },
            ) => {
                *sum += s2;
                *count += c2;
                *error |= e2;
            }
            (a, b) => panic!("merging mismatched aggregate states {a:?} and {b:?}"),
        }
    }

    /// Final value as a term id (NULL when the aggregate is an error or empty extremum).
    pub fn finalize(&self, ctx: &ExecContext) -> TermId {
        match self {
            AggState::Count(n) => ctx.intern_computed(Term::integer(*n as i64)),
            AggState::Distinct(s) => ctx.intern_computed(Term::integer(s.len() as i64)),
            AggState::Min(v) | AggState::Max(v) => v.unwrap_or(TermId::NULL),
            AggState::Sum { error: true, .. } | AggState::Avg { error: true, .. } => TermId::NULL,
            AggState::Sum { sum, .. } => ctx.intern_computed(integer_term(*sum)),
            AggState::Avg { sum, count, .. } => {
                let avg = if *count == 0 { 0.0 } else { *sum as f64 / *count as f64 };
                ctx.intern_computed(Term::decimal(avg))
            }
        }
    }
}

fn integer_term(v: i128) -> Term {
    Term::typed(v.to_string(), crate::dictionary::XSD_INTEGER)
}

/// Output row of a global aggregate over empty input: COUNTs are 0, everything else unbound.
pub fn empty_global_value(ctx: &ExecContext, func: AggFunc) -> TermId {
    match func {
        AggFunc::CountAll | AggFunc::Count | AggFunc::CountDistinct => ctx.intern_computed(Term::integer(0)),
        _ => TermId::NULL,
    }
}
