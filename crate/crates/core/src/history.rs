use std::collections::VecDeque;

use nalgebra::DVector;

/// Most-recent-first window of past outputs and controls.
///
/// Entries before the first recorded sample read as zero vectors.
#[derive(Debug, Clone)]
pub struct IoHistory {
    depth: usize,
    p: usize,
    m: usize,
    y: VecDeque<DVector<f64>>,
    u: VecDeque<DVector<f64>>,
}

impl IoHistory {
    pub fn new(depth: usize, p: usize, m: usize) -> Self {
        IoHistory {
            depth,
            p,
            m,
            y: VecDeque::with_capacity(depth + 1),
            u: VecDeque::with_capacity(depth + 1),
        }
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn output_dim(&self) -> usize {
        self.p
    }

    pub fn input_dim(&self) -> usize {
        self.m
    }

    /// Records `(y_k, u_k)` as the newest entry.
    pub fn push(&mut self, y: DVector<f64>, u: DVector<f64>) {
        debug_assert_eq!(y.len(), self.p);
        debug_assert_eq!(u.len(), self.m);
        self.y.push_front(y);
        self.u.push_front(u);
        self.y.truncate(self.depth);
        self.u.truncate(self.depth);
    }

    /// `y_{k-lag}` for `lag >= 1`, where `k` is the next sample to be pushed.
    pub fn y(&self, lag: usize) -> DVector<f64> {
        self.y.get(lag - 1).cloned().unwrap_or_else(|| DVector::zeros(self.p))
    }

    /// `u_{k-lag}` for `lag >= 1`.
    pub fn u(&self, lag: usize) -> DVector<f64> {
        self.u.get(lag - 1).cloned().unwrap_or_else(|| DVector::zeros(self.m))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_padded_and_bounded() {
        let mut h = IoHistory::new(2, 1, 1);
        assert_eq!(h.y(1)[0], 0.0);
        for k in 0..5 {
            h.push(DVector::from_element(1, k as f64), DVector::from_element(1, -(k as f64)));
        }
        assert_eq!(h.y(1)[0], 4.0);
        assert_eq!(h.y(2)[0], 3.0);
        assert_eq!(h.u(2)[0], -3.0);
        assert_eq!(h.y(3)[0], 0.0);
    }
}
