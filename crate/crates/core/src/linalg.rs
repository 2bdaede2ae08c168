//! Small dense symmetric positive-definite solves.
//!
//! Local fits only ever need `p x p` systems with `p` in the tens at most, so a
//! row-major `Vec<f64>` and an in-place Cholesky are all that's needed.

/// Square symmetric matrix stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![0.0; n * n] }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    /// `self += w * x x^T`, filling the lower triangle only. Call
    /// [`SymMatrix::mirror_lower`] once accumulation is done.
    #[inline]
    pub fn add_outer_lower(&mut self, w: f64, x: &[f64]) {
        let n = self.n;
        for i in 0..n {
            let wxi = w * x[i];
            let row = &mut self.data[i * n..i * n + i + 1];
            for (j, r) in row.iter_mut().enumerate() {
                *r += wxi * x[j];
            }
        }
    }

    pub fn mirror_lower(&mut self) {
        let n = self.n;
        for i in 0..n {
            for j in 0..i {
                self.data[j * n + i] = self.data[i * n + j];
            }
        }
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    pub fn add_diagonal(&mut self, lambda: f64) {
        for i in 0..self.n {
            self.data[i * self.n + i] += lambda;
        }
    }
}

/// Lower Cholesky factor `L` with `A = L L^T`.
#[derive(Debug, Clone)]
pub struct Cholesky {
    n: usize,
    l: Vec<f64>,
}

impl Cholesky {
    /// Factorises `a`. Returns `None` when a pivot is not strictly positive.
    pub fn factor(a: &SymMatrix) -> Option<Self> {
        let n = a.n;
        let mut l = vec![0.0; n * n];
        for j in 0..n {
            let mut d = a.get(j, j);
            for k in 0..j {
                d -= l[j * n + k] * l[j * n + k];
            }
            if !(d > 0.0) || !d.is_finite() {
                return None;
            }
            let djj = d.sqrt();
            l[j * n + j] = djj;
            for i in j + 1..n {
                let mut s = a.get(i, j);
                for k in 0..j {
                    s -= l[i * n + k] * l[j * n + k];
                }
                l[i * n + j] = s / djj;
            }
        }
        Some(Self { n, l })
    }

    /// Ratio of the largest to the smallest pivot `L_kk^2`. Cheap condition
    /// estimate for the factorised matrix.
    pub fn pivot_ratio(&self) -> f64 {
        let pivots = (0..self.n).map(|k| self.l[k * self.n + k].powi(2));
        let (lo, hi) = pivots.fold((f64::INFINITY, 0.0_f64), |(lo, hi), d| (lo.min(d), hi.max(d)));
        hi / lo
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut z = b.to_vec();
        for i in 0..n {
            let mut s = z[i];
            for k in 0..i {
                s -= self.l[i * n + k] * z[k];
            }
            z[i] = s / self.l[i * n + i];
        }
        for i in (0..n).rev() {
            let mut s = z[i];
            for k in i + 1..n {
                s -= self.l[k * n + i] * z[k];
            }
            z[i] = s / self.l[i * n + i];
        }
        z
    }
}
