use crate::scalar::Scalar;

/// LU factorisation with partial pivoting of a dense row-major square matrix.
#[derive(Debug, Clone)]
pub(crate) struct Lu<T> {
    n: usize,
    factors: Vec<T>,
    perm: Vec<usize>,
    pub(crate) min_pivot: T,
}

impl<T: Scalar> Lu<T> {
    /// Returns `None` when a pivot vanishes relative to the matrix scale.
    pub(crate) fn factor(n: usize, matrix: &[T]) -> Option<Self> {
        assert_eq!(matrix.len(), n * n);
        let mut a = matrix.to_vec();
        let mut perm: Vec<usize> = (0..n).collect();
        let scale = a.iter().fold(T::zero(), |m, v| m.max(v.abs()));
        let tiny = scale * T::epsilon() * T::from_count(n.max(1));
        let mut min_pivot = T::infinity();

        for col in 0..n {
            let (pivot_row, pivot_abs) = (col..n)
                .map(|r| (r, a[r * n + col].abs()))
                .fold((col, -T::one()), |best, cur| if cur.1 > best.1 { cur } else { best });
            if !(pivot_abs > tiny) {
                return None;
            }
            min_pivot = min_pivot.min(pivot_abs);
            if pivot_row != col {
                for j in 0..n {
                    a.swap(col * n + j, pivot_row * n + j);
                }
                perm.swap(col, pivot_row);
            }
            let pivot = a[col * n + col];
            for r in (col + 1)..n {
                let factor = a[r * n + col] / pivot;
                if factor == T::zero() {
                    continue;
                }
                a[r * n + col] = factor;
                for j in (col + 1)..n {
                    let upper = a[col * n + j];
                    a[r * n + j] -= factor * upper;
                }
            }
        }
        Some(Self { n, factors: a, perm, min_pivot })
    }

    pub(crate) fn solve(&self, rhs: &[T]) -> Vec<T> {
        let n = self.n;
        let a = &self.factors;
        let mut x: Vec<T> = self.perm.iter().map(|&p| rhs[p]).collect();
        for i in 0..n {
            let mut acc = x[i];
            for j in 0..i {
                acc -= a[i * n + j] * x[j];
            }
            x[i] = acc;
        }
        for i in (0..n).rev() {
            let mut acc = x[i];
            for j in (i + 1)..n {
                acc -= a[i * n + j] * x[j];
            }
            x[i] = acc / a[i * n + i];
        }
        x
    }
}

pub(crate) fn mat_vec<T: Scalar>(n: usize, matrix: &[T], x: &[T]) -> Vec<T> {
    (0..n).map(|i| (0..n).fold(T::zero(), |acc, j| acc + matrix[i * n + j] * x[j])).collect()
}
