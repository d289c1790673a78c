use crate::batch::ColumnBatch;
use crate::dictionary::TermId;
use crate::operator::{BatchOperator, ExecContext, ExecResult};

/// Read position inside the current batch of a sorted child stream.
///
/// `pos` indexes the selection vector, so all positions refer to active rows.
#[derive(Debug, Default)]
pub(crate) struct BatchCursor {
    pub batch: Option<ColumnBatch>,
    pub pos: usize,
    pub exhausted: bool,
}

impl BatchCursor {
    pub fn new() -> Self {
        Self::default()
    }

    /// Active rows left in the current batch.
    #[inline]
    pub fn remaining(&self) -> usize {
        self.batch.as_ref().map_or(0, |b| b.active_count() - self.pos)
    }

    /// Makes sure a row is available, pulling batches from `child` as needed.
    pub fn fill(&mut self, ctx: &ExecContext, child: &mut dyn BatchOperator) -> ExecResult<bool> {
        if self.remaining() > 0 {
            return Ok(true);
        }
        if self.exhausted {
            return Ok(false);
        }
        if let Some(b) = self.batch.take() {
            ctx.release(b);
        }
        while let Some(b) = child.next_batch()? {
            if b.active_count() > 0 {
                self.batch = Some(b);
                self.pos = 0;
                return Ok(true);
            }
            ctx.release(b);
        }
        self.exhausted = true;
        Ok(false)
    }

    #[inline]
    pub fn batch(&self) -> &ColumnBatch {
        self.batch.as_ref().expect("cursor has no batch")
    }

    /// Physical row index of active position `i`.
    #[inline]
    pub fn row_at(&self, i: usize) -> usize {
        self.batch().selection().as_slice()[i] as usize
    }

    #[inline]
    pub fn key(&self, col: usize) -> TermId {
        self.batch().key_at(col, self.pos)
    }

    /// First active position at or after `pos` whose key exceeds `key`.
    pub fn run_end(&self, col: usize, key: TermId) -> usize {
        let b = self.batch();
        let c = b.column(col);
        let sel = &b.selection().as_slice()[self.pos..];
        self.pos + sel.partition_point(|&r| c[r as usize] <= key)
    }

    /// Advances to the first active row with key `>= key` inside the current batch.
    /// Returns false when the batch holds no such row.
    pub fn advance_to(&mut self, col: usize, key: TermId) -> bool {
        let Some(b) = self.batch.as_ref() else {
            return false;
        };
        let c = b.column(col);
        let sel = &b.selection().as_slice()[self.pos..];
        self.pos += sel.partition_point(|&r| c[r as usize] < key);
        self.remaining() > 0
    }

    /// Repositions at the first row with key `>= key`, within the batch if
    /// possible, else by discarding it and skipping the child.
    pub fn skip(&mut self, ctx: &ExecContext, col: usize, child: &mut dyn BatchOperator, key: TermId) -> ExecResult<()> {
        if self.exhausted {
            return Ok(());
        }
        if self.advance_to(col, key) {
            return Ok(());
        }
        if let Some(b) = self.batch.take() {
            ctx.release(b);
        }
        child.skip(key)
    }

    pub fn clear(&mut self, ctx: &ExecContext) {
        if let Some(b) = self.batch.take() {
            ctx.release(b);
        }
        self.pos = 0;
        self.exhausted = false;
    }
}
