use crate::num::Real;

/// Row-major dense square matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix<R: Real> {
    n: usize,
    data: Vec<R>,
}

impl<R: Real> DenseMatrix<R> {
    pub fn zeros(n: usize) -> Self {
        DenseMatrix {
            n,
            data: vec![R::zero(); n * n],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> R {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: R) {
        self.data[i * self.n + j] = self.data[i * self.n + j] + v;
    }

    pub fn row(&self, i: usize) -> &[R] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    /// Solves `self * x = b` in place by LU with partial pivoting, consuming
    /// the matrix. On a zero or non-finite pivot returns the original row
    /// index of the offending unknown.
    pub fn solve(mut self, b: &mut [R]) -> Result<(), usize> {
        let n = self.n;
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let mut p = k;
            let mut best = self.get(k, k).abs();
            for i in k + 1..n {
                let v = self.get(i, k).abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if !(best > R::zero()) || !best.is_finite() {
                return Err(perm[k]);
            }
            if p != k {
                for j in 0..n {
                    self.data.swap(k * n + j, p * n + j);
                }
                b.swap(k, p);
                perm.swap(k, p);
            }
            let piv = self.get(k, k);
            for i in k + 1..n {
                let f = self.get(i, k) / piv;
                if f == R::zero() {
                    continue;
                }
                for j in k + 1..n {
                    self.data[i * n + j] = self.data[i * n + j] - f * self.data[k * n + j];
                }
                b[i] = b[i] - f * b[k];
            }
        }
        for k in (0..n).rev() {
            let mut s = b[k];
            for j in k + 1..n {
                s = s - self.get(k, j) * b[j];
            }
            b[k] = s / self.get(k, k);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_with_pivoting() {
        let mut a = DenseMatrix::<f64>::zeros(3);
        for (i, row) in [[0.0, 2.0, 1.0], [1.0, 1.0, 0.0], [3.0, 0.0, 1.0]]
            .iter()
            .enumerate()
        {
            for (j, v) in row.iter().enumerate() {
                a.add(i, j, *v);
            }
        }
        let x = [1.0, -2.0, 0.5];
        let mut b: Vec<f64> = (0..3)
            .map(|i| (0..3).map(|j| a.get(i, j) * x[j]).sum())
            .collect();
        a.solve(&mut b).unwrap();
        for i in 0..3 {
            assert!((b[i] - x[i]).abs() < 1e-14);
        }
    }

    #[test]
    fn reports_singular_unknown() {
        let mut a = DenseMatrix::<f64>::zeros(2);
        a.add(0, 0, 1.0);
        let mut b = vec![1.0, 1.0];
        assert_eq!(a.solve(&mut b), Err(1));
    }
}
