//! Square banded matrices with LU factorization without pivoting.
//!
//! Only used for row diagonally dominant systems (`I - W diag(p)` with
//! `sup p < 1`), where elimination without pivoting is stable.

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct BandedMatrix {
    n: usize,
    half_width: usize,
    /// Row-major, `2 * half_width + 1` slots per row; slot `k` of row `i`
    /// holds column `i + k - half_width`.
    data: Vec<f64>,
}

impl BandedMatrix {
    pub fn zeros(n: usize, half_width: usize) -> Self {
        Self {
            n,
            half_width,
            data: vec![0.0; n * (2 * half_width + 1)],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    fn slot(&self, i: usize, j: usize) -> usize {
        debug_assert!(i.abs_diff(j) <= self.half_width);
        i * (2 * self.half_width + 1) + (j + self.half_width - i)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if i.abs_diff(j) > self.half_width {
            0.0
        } else {
            self.data[self.slot(i, j)]
        }
    }

    pub fn add(&mut self, i: usize, j: usize, value: f64) {
        let s = self.slot(i, j);
        self.data[s] += value;
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let hw = self.half_width;
        (0..self.n)
            .map(|i| {
                let lo = i.saturating_sub(hw);
                let hi = (i + hw).min(self.n - 1);
                (lo..=hi).map(|j| self.data[self.slot(i, j)] * x[j]).sum()
            })
            .collect()
    }

    /// In-place Doolittle factorization; `L` (unit diagonal) and `U` share
    /// the band storage.
    pub fn factor(mut self) -> Result<BandedLu> {
        let hw = self.half_width;
        let n = self.n;
        for k in 0..n {
            let pivot = self.data[self.slot(k, k)];
            if pivot.abs() < f64::MIN_POSITIVE || !pivot.is_finite() {
                return Err(Error::Singular("banded system"));
            }
            let last = (k + hw).min(n - 1);
            for i in k + 1..=last {
                let sik = self.slot(i, k);
                let factor = self.data[sik] / pivot;
                self.data[sik] = factor;
                if factor == 0.0 {
                    continue;
                }
                for j in k + 1..=last {
                    let skj = self.slot(k, j);
                    let sij = self.slot(i, j);
                    self.data[sij] -= factor * self.data[skj];
                }
            }
        }
        Ok(BandedLu { lu: self })
    }
}

#[derive(Debug, Clone)]
pub struct BandedLu {
    lu: BandedMatrix,
}

impl BandedLu {
    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let m = &self.lu;
        let (n, hw) = (m.n, m.half_width);
        let mut y = rhs.to_vec();
        for i in 0..n {
            let lo = i.saturating_sub(hw);
            let mut acc = y[i];
            for (j, yj) in y.iter().enumerate().take(i).skip(lo) {
                acc -= m.data[m.slot(i, j)] * yj;
            }
            y[i] = acc;
        }
        for i in (0..n).rev() {
            let hi = (i + hw).min(n - 1);
            let mut acc = y[i];
            for (j, yj) in y.iter().enumerate().take(hi + 1).skip(i + 1) {
                acc -= m.data[m.slot(i, j)] * yj;
            }
            y[i] = acc / m.data[m.slot(i, i)];
        }
        y
    }
}
