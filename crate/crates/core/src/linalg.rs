//! Small dense linear algebra: partially pivoted LU over any [`Scalar`],
//! a 1-norm condition estimate and singular values for rank checks.

use nalgebra::DMatrix;

use crate::scalar::Scalar;

/// Row-major square matrix factorized as `P·A = L·U`.
#[derive(Clone, Debug)]
pub struct Lu<S> {
    n: usize,
    lu: Vec<S>,
    perm: Vec<usize>,
}

/// Returned when a pivot vanishes (relative to the matrix scale).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Singular;

impl<S: Scalar> Lu<S> {
    /// Factorizes a row-major `n × n` matrix. Pivots are chosen on the real
    /// part so that dual-valued matrices follow the same elimination path as
    /// their primal counterpart.
    pub fn factor(a: &[S], n: usize) -> Result<Self, Singular> {
        assert_eq!(a.len(), n * n, "matrix is not n x n");
        let mut lu = a.to_vec();
        let mut perm: Vec<usize> = (0..n).collect();
        let scale = a.iter().fold(0.0_f64, |m, v| m.max(v.re().abs()));
        let tiny = scale * f64::EPSILON * n as f64;
        if scale == 0.0 || !scale.is_finite() {
            return Err(Singular);
        }
        for k in 0..n {
            let mut p = k;
            let mut best = lu[k * n + k].re().abs();
            for r in (k + 1)..n {
                let v = lu[r * n + k].re().abs();
                if v > best {
                    best = v;
                    p = r;
                }
            }
            if best <= tiny {
                return Err(Singular);
            }
            if p != k {
                for c in 0..n {
                    lu.swap(k * n + c, p * n + c);
                }
                perm.swap(k, p);
            }
            let pivot = lu[k * n + k];
            for r in (k + 1)..n {
                let factor = lu[r * n + k] / pivot;
                lu[r * n + k] = factor;
                for c in (k + 1)..n {
                    let upd = lu[r * n + c] - factor * lu[k * n + c];
                    lu[r * n + c] = upd;
                }
            }
        }
        Ok(Lu { n, lu, perm })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Solves `A·x = b`.
    pub fn solve(&self, b: &[S]) -> Vec<S> {
        let n = self.n;
        let mut x: Vec<S> = self.perm.iter().map(|&p| b[p]).collect();
        for r in 0..n {
            let mut acc = x[r];
            for c in 0..r {
                acc = acc - self.lu[r * n + c] * x[c];
            }
            x[r] = acc;
        }
        for r in (0..n).rev() {
            let mut acc = x[r];
            for c in (r + 1)..n {
                acc = acc - self.lu[r * n + c] * x[c];
            }
            x[r] = acc / self.lu[r * n + r];
        }
        x
    }
}

impl Lu<f64> {
    /// `‖A⁻¹‖₁`, from explicit solves against the unit vectors.
    pub fn inverse_norm1(&self) -> f64 {
        let n = self.n;
        let mut worst = 0.0_f64;
        let mut e = vec![0.0; n];
        for c in 0..n {
            e.iter_mut().for_each(|v| *v = 0.0);
            e[c] = 1.0;
            let col = self.solve(&e);
            worst = worst.max(col.iter().map(|v| v.abs()).sum());
        }
        worst
    }
}

/// Maximum absolute column sum.
pub fn norm1(a: &[f64], n: usize) -> f64 {
    (0..n)
        .map(|c| (0..n).map(|r| a[r * n + c].abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// 1-norm condition number `‖A‖₁‖A⁻¹‖₁`; `+∞` when the factorization
/// detects a vanishing pivot.
pub fn condition_number(a: &[f64], n: usize) -> f64 {
    match Lu::factor(a, n) {
        Ok(lu) => norm1(a, n) * lu.inverse_norm1(),
        Err(Singular) => f64::INFINITY,
    }
}

/// Singular values of a row-major `rows × cols` matrix, descending.
pub fn singular_values(a: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    let m = DMatrix::from_row_slice(rows, cols, a);
    let mut sv: Vec<f64> = m.singular_values().iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

pub fn matvec<S: Scalar>(a: &[S], x: &[S]) -> Vec<S> {
    let n = x.len();
    a.chunks(n)
        .map(|row| {
            let mut acc = S::zero();
            for (r, v) in row.iter().zip(x) {
                acc += *r * *v;
            }
            acc
        })
        .collect()
}

pub fn dot<S: Scalar>(a: &[S], b: &[S]) -> S {
    let mut acc = S::zero();
    for (x, y) in a.iter().zip(b) {
        acc += *x * *y;
    }
    acc
}

pub fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}
