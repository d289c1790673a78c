/// Chooses how many rows a scan reads on each `next()`.
///
/// The first call and every call that follows a `skip()` read `min` rows;
/// every other call doubles the previous size, up to `max`. With adaptive
/// sizing disabled every call reads `max` rows.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AdaptiveSizer {
    min: usize,
    max: usize,
    current: usize,
    adaptive: bool,
    started: bool,
    skipped: bool,
}

impl AdaptiveSizer {
    pub fn new(min: usize, max: usize, adaptive: bool) -> Self {
        let max = max.max(1);
        let min = min.clamp(1, max);
        AdaptiveSizer {
            min,
            max,
            current: min,
            adaptive,
            started: false,
            skipped: false,
        }
    }

    /// Size for the upcoming `next()` call.
    pub fn next_size(&mut self) -> usize {
        if !self.adaptive {
            return self.max;
        }
        if !self.started || self.skipped {
            self.current = self.min;
        } else {
            self.current = (self.current * 2).min(self.max);
        }
        self.started = true;
        self.skipped = false;
        self.current
    }

    pub fn on_skip(&mut self) {
        self.skipped = true;
    }

    pub fn reset(&mut self) {
        self.current = self.min;
        self.started = false;
        self.skipped = false;
    }

    pub fn current(&self) -> usize {
        self.current
    }

    pub fn min(&self) -> usize {
        self.min
    }

    pub fn max(&self) -> usize {
        self.max
    }
}
