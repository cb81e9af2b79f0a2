//! Compensated (Neumaier) summation.
//!
//! Excess excitation densities reach 1e-8..1e-10 of the raw density, so the
//! mode reduction must not lose bits to accumulation order. All densities in
//! this crate are reduced with [`compensated_sum`] in fixed grid order, which
//! also makes the result independent of the worker count.

/// Running Neumaier-compensated accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, value: f64) {
        let t = self.sum + value;
        if self.sum.abs() >= value.abs() {
            self.comp += (self.sum - t) + value;
        } else {
            self.comp += (value - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Sum of an iterator with Neumaier compensation, in iteration order.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(iter: I) -> f64 {
    let mut acc = CompensatedSum::new();
    for v in iter {
        acc.add(v);
    }
    acc.value()
}

/// Compensated mean over a slice, in slice order.
pub fn compensated_mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    compensated_sum(values.iter().copied()) / values.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_cancelling_tail() {
        // 1 followed by 1e16 tiny terms that a naive sum would drop entirely.
        let n = 10_000usize;
        let tiny = 1e-18;
        let mut vals = vec![1.0];
        vals.extend(std::iter::repeat(tiny).take(n));
        let exact = 1.0 + tiny * n as f64;
        assert_eq!(compensated_sum(vals.iter().copied()), exact);
    }

    #[test]
    fn mean_of_uniform_is_exact() {
        let vals = vec![0.5; 10_000];
        assert_eq!(compensated_mean(&vals), 0.5);
    }

    #[test]
    fn empty_mean_is_zero() {
        assert_eq!(compensated_mean(&[]), 0.0);
    }
}
