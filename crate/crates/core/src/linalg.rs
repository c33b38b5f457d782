//! Dense symmetric solves for the small Newton systems of the position solver.

use crate::scalar::Scalar;

/// Row-major square matrix.
#[derive(Debug, Clone)]
pub(crate) struct SymMatrix<T> {
    pub n: usize,
    pub data: Vec<T>,
}

impl<T: Scalar> SymMatrix<T> {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![T::zero(); n * n],
        }
    }

    pub fn add(&mut self, i: usize, j: usize, x: T) {
        self.data[i * self.n + j] = self.data[i * self.n + j] + x;
    }

    fn cholesky(&self, shift: T) -> Option<Vec<T>> {
        let n = self.n;
        let mut l = vec![T::zero(); n * n];
        for i in 0..n {
            for j in 0..=i {
                let mut s = self.data[i * n + j];
                if i == j {
                    s = s + shift;
                }
                for k in 0..j {
                    s = s - l[i * n + k] * l[j * n + k];
                }
                if i == j {
                    if !(s > T::zero()) || !s.is_finite() {
                        return None;
                    }
                    l[i * n + i] = s.sqrt();
                } else {
                    l[i * n + j] = s / l[j * n + j];
                }
            }
        }
        Some(l)
    }

    /// Solves `(A + shift·I) x = b`, growing the shift until the factorization
    /// succeeds. Returns `None` if no shift works.
    pub fn solve_shifted(&self, b: &[T]) -> Option<Vec<T>> {
        let n = self.n;
        let scale = (0..n)
            .map(|i| self.data[i * n + i].abs())
            .fold(T::zero(), T::max)
            .max(T::min_positive_value());
        let mut shift = T::zero();
        for _ in 0..40 {
            if let Some(l) = self.cholesky(shift) {
                let mut y = b.to_vec();
                for i in 0..n {
                    let mut s = y[i];
                    for k in 0..i {
                        s = s - l[i * n + k] * y[k];
                    }
                    y[i] = s / l[i * n + i];
                }
                for i in (0..n).rev() {
                    let mut s = y[i];
                    for k in i + 1..n {
                        s = s - l[k * n + i] * y[k];
                    }
                    y[i] = s / l[i * n + i];
                }
                if y.iter().all(|v| v.is_finite()) {
                    return Some(y);
                }
            }
            shift = if shift == T::zero() {
                scale * T::epsilon().sqrt()
            } else {
                shift * T::lit(10.0)
            };
        }
        None
    }
}
