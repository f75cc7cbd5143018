//! Log-space arithmetic.

/// Log of an exact zero probability. Indicator factors produce this value,
/// never an underflowed small number.
pub const LOG_ZERO: f64 = f64::NEG_INFINITY;

pub fn is_log_zero(v: f64) -> bool {
    v == LOG_ZERO
}

/// `ln Σ exp(v)` over the values, returning [`LOG_ZERO`] for an empty or all-zero input.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(LOG_ZERO, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Streaming log-sum-exp accumulator with a running maximum.
#[derive(Clone, Copy, Debug)]
pub struct LogAccumulator {
    max: f64,
    scaled: f64,
}

impl Default for LogAccumulator {
    fn default() -> Self {
        LogAccumulator { max: LOG_ZERO, scaled: 0.0 }
    }
}

impl LogAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, v: f64) {
        if v == LOG_ZERO {
            return;
        }
        if v <= self.max {
            self.scaled += (v - self.max).exp();
        } else {
            self.scaled = self.scaled * (self.max - v).exp() + 1.0;
            self.max = v;
        }
    }

    pub fn value(&self) -> f64 {
        if self.max == LOG_ZERO {
            LOG_ZERO
        } else {
            self.max + self.scaled.ln()
        }
    }
}

/// Normalises log weights into probabilities. Returns `None` when all are zero.
pub fn normalize_log(values: &[f64]) -> Option<Vec<f64>> {
    let total = log_sum_exp(values);
    if total == LOG_ZERO {
        return None;
    }
    Some(values.iter().map(|v| (v - total).exp()).collect())
}

/// Neumaier compensated summation.
#[derive(Clone, Copy, Debug, Default)]
pub struct CompensatedSum {
    sum: f64,
    compensation: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}
