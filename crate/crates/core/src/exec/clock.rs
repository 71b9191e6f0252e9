/// Monotone simulated time in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct VirtualClock {
    now: f64,
}

impl VirtualClock {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn now(&self) -> f64 {
        self.now
    }

    /// Negative or non-finite advances are ignored.
    pub fn advance(&mut self, dt: f64) {
        if dt.is_finite() && dt > 0.0 {
            self.now += dt;
        }
    }

    pub fn advance_to(&mut self, t: f64) {
        if t.is_finite() && t > self.now {
            self.now = t;
        }
    }
}

/// `W` parallel evaluation slots; each request goes to the slot that frees
/// up first (lowest index on ties).
#[derive(Debug, Clone, PartialEq)]
pub struct WorkerSlots {
    free_at: Vec<f64>,
}

impl WorkerSlots {
    pub fn new(workers: usize, now: f64) -> Self {
        Self {
            free_at: vec![now; workers.max(1)],
        }
    }

    /// Slot index and start time of the next request.
    pub fn next(&self) -> (usize, f64) {
        self.free_at
            .iter()
            .copied()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("at least one slot")
    }

    pub fn occupy(&mut self, slot: usize, until: f64) {
        self.free_at[slot] = self.free_at[slot].max(until);
    }

    /// Time at which every slot is idle.
    pub fn drained(&self) -> f64 {
        self.free_at.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}
