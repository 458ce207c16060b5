//! Banded symmetric positive definite factorization.

/// Lower band of a symmetric matrix; `(i, j)` with `i - bw <= j <= i`.
#[derive(Debug, Clone)]
pub(crate) struct BandMatrix {
    n: usize,
    bw: usize,
    data: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, bw: usize) -> Self {
        Self {
            n,
            bw,
            data: vec![0.0; n * (bw + 1)],
        }
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(j <= i && i - j <= self.bw);
        i * (self.bw + 1) + (j + self.bw - i)
    }

    /// Adds `v` at `(i, j)` and, implicitly, at `(j, i)`.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        let k = self.idx(i, j);
        self.data[k] += v;
    }

    #[cfg(test)]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        if i - j > self.bw {
            0.0
        } else {
            self.data[self.idx(i, j)]
        }
    }

    /// In-place Cholesky factorization; `false` if the matrix is not positive definite.
    pub fn cholesky(&mut self) -> bool {
        let bw = self.bw;
        for i in 0..self.n {
            let lo = i.saturating_sub(bw);
            for j in lo..=i {
                let klo = lo.max(j.saturating_sub(bw));
                let mut sum = self.data[self.idx(i, j)];
                for k in klo..j {
                    sum -= self.data[self.idx(i, k)] * self.data[self.idx(j, k)];
                }
                let at = self.idx(i, j);
                if i == j {
                    if !(sum > 0.0) {
                        return false;
                    }
                    self.data[at] = sum.sqrt();
                } else {
                    self.data[at] = sum / self.data[self.idx(j, j)];
                }
            }
        }
        true
    }

    /// Solves `L L^T x = b` in place after [`BandMatrix::cholesky`].
    pub fn solve(&self, b: &mut [f64]) {
        let bw = self.bw;
        for i in 0..self.n {
            let lo = i.saturating_sub(bw);
            let s = b[lo..i]
                .iter()
                .enumerate()
                .fold(b[i], |s, (k, &bk)| s - self.data[self.idx(i, lo + k)] * bk);
            b[i] = s / self.data[self.idx(i, i)];
        }
        for i in (0..self.n).rev() {
            let hi = (i + bw + 1).min(self.n);
            let s = b[i + 1..hi].iter().enumerate().fold(b[i], |s, (k, &bk)| {
                s - self.data[self.idx(i + 1 + k, i)] * bk
            });
            b[i] = s / self.data[self.idx(i, i)];
        }
    }
}
