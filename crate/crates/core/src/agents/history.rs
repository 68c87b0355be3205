use std::collections::VecDeque;

/// The last `capacity` Q-value snapshots of one arm, oldest first.
#[derive(Debug, Clone, PartialEq)]
pub struct QHistory {
    values: VecDeque<f64>,
    capacity: usize,
}

impl QHistory {
    pub fn new(capacity: usize) -> Self {
        Self { values: VecDeque::with_capacity(capacity), capacity }
    }

    pub fn push(&mut self, q: f64) {
        if self.values.len() == self.capacity {
            self.values.pop_front();
        }
        self.values.push_back(q);
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &f64> + '_ {
        self.values.iter()
    }

    pub fn mean(&self) -> Option<f64> {
        if self.values.is_empty() {
            return None;
        }
        Some(self.values.iter().sum::<f64>() / self.values.len() as f64)
    }

    /// Bessel-corrected sample standard deviation; needs two entries.
    pub fn sample_std(&self) -> Option<f64> {
        let n = self.values.len();
        if n < 2 {
            return None;
        }
        let mean = self.mean()?;
        let ss: f64 = self.values.iter().map(|q| (q - mean) * (q - mean)).sum();
        Some((ss / (n - 1) as f64).sqrt())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn keeps_latest_entries() {
        let mut h = QHistory::new(3);
        for q in [1.0, 2.0, 3.0, 4.0, 5.0] {
            h.push(q);
        }
        assert_eq!(h.iter().copied().collect::<Vec<_>>(), vec![3.0, 4.0, 5.0]);
        assert_eq!(h.mean(), Some(4.0));
        assert_eq!(h.sample_std(), Some(1.0));
    }

    #[test]
    fn stats_need_samples() {
        let mut h = QHistory::new(10);
        assert_eq!(h.mean(), None);
        h.push(2.0);
        assert_eq!(h.sample_std(), None);
        h.push(2.0);
        assert_eq!(h.sample_std(), Some(0.0));
    }
}
