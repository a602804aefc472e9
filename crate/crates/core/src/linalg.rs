//! Minimal dense vector/matrix arithmetic and the activation functions used
//! by the network. Everything is `f64`; values are immutable after
//! construction and safe to share across threads.

use crate::error::{Error, Result};

/// A fixed-length vector of 64-bit reals.
#[derive(Debug, Clone, PartialEq)]
pub struct Vector(pub Vec<f64>);

impl Vector {
    pub fn zeros(len: usize) -> Self {
        Vector(vec![0.0; len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, f64> {
        self.0.iter()
    }
}

impl From<Vec<f64>> for Vector {
    fn from(v: Vec<f64>) -> Self {
        Vector(v)
    }
}

impl std::ops::Index<usize> for Vector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// A row-major dense matrix of 64-bit reals.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    /// Builds a matrix from row-major data. The element count must equal
    /// `rows * cols`.
    pub fn from_rows(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Dimension {
                context: "Matrix::from_rows",
                expected: rows * cols,
                actual: data.len(),
            });
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }
}

/// Computes `W x + b`.
///
/// Requires `W.cols == x.len()` and `W.rows == b.len()`.
pub fn affine(w: &Matrix, x: &Vector, b: &Vector) -> Result<Vector> {
    if w.cols != x.len() {
        return Err(Error::Dimension {
            context: "affine input",
            expected: w.cols,
            actual: x.len(),
        });
    }
    if w.rows != b.len() {
        return Err(Error::Dimension {
            context: "affine bias",
            expected: w.rows,
            actual: b.len(),
        });
    }
    let mut out = Vec::with_capacity(w.rows);
    let xs = x.as_slice();
    for i in 0..w.rows {
        out.push(dot(w.row(i), xs) + b[i]);
    }
    Ok(Vector(out))
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Elementwise `max(0, v)`.
pub fn relu(v: &Vector) -> Vector {
    Vector(v.iter().map(|&x| relu_scalar(x)).collect())
}

#[inline]
pub(crate) fn relu_scalar(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        0.0
    }
}

/// Max-stabilized softmax: `exp(v_i - m) / sum_j exp(v_j - m)` with
/// `m = max(v)`, so the largest exponent is exactly zero and the sum cannot
/// overflow.
pub fn softmax(v: &Vector) -> Vector {
    debug_assert!(!v.is_empty());
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = v.iter().map(|&x| (x - m).exp()).collect();
    let total: f64 = exps.iter().sum();
    Vector(exps.into_iter().map(|e| e / total).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn affine_identity_passes_input_through() {
        let w = Matrix::identity(3);
        let b = Vector::zeros(3);
        let x = Vector::from(vec![1.0, 2.0, 3.0]);
        let y = affine(&w, &x, &b).unwrap();
        assert_eq!(y.as_slice(), &[1.0, 2.0, 3.0]);
    }

    #[test]
    fn affine_zero_weights_returns_bias() {
        let w = Matrix::zeros(2, 3);
        let b = Vector::from(vec![4.0, 5.0]);
        let x = Vector::from(vec![9.0, -2.0, 0.5]);
        let y = affine(&w, &x, &b).unwrap();
        assert_eq!(y.as_slice(), &[4.0, 5.0]);
    }

    #[test]
    fn affine_hand_multiplication() {
        // [[1,2],[3,4]] * [1,1] + [1,1] = [1+2+1, 3+4+1]
        let w = Matrix::from_rows(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let b = Vector::from(vec![1.0, 1.0]);
        let x = Vector::from(vec![1.0, 1.0]);
        let y = affine(&w, &x, &b).unwrap();
        assert_eq!(y.as_slice(), &[4.0, 8.0]);
    }

    #[test]
    fn affine_rejects_dimension_mismatch() {
        let w = Matrix::zeros(2, 3);
        let b = Vector::zeros(2);
        let x = Vector::zeros(4);
        assert!(matches!(
            affine(&w, &x, &b),
            Err(Error::Dimension { .. })
        ));
        let b_bad = Vector::zeros(3);
        let x_ok = Vector::zeros(3);
        assert!(matches!(
            affine(&w, &x_ok, &b_bad),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn relu_sign_cases() {
        let v = Vector::from(vec![-1.0, 0.0, 2.0]);
        assert_eq!(relu(&v).as_slice(), &[0.0, 0.0, 2.0]);
        let zeros = Vector::zeros(4);
        assert_eq!(relu(&zeros).as_slice(), &[0.0; 4]);
        let nonneg = Vector::from(vec![5.0, 7.0]);
        assert_eq!(relu(&nonneg).as_slice(), &[5.0, 7.0]);
    }

    #[test]
    fn softmax_symmetry() {
        let v = Vector::from(vec![0.0, 0.0]);
        assert_eq!(softmax(&v).as_slice(), &[0.5, 0.5]);
    }

    #[test]
    fn softmax_hand_evaluation() {
        // softmax([ln 1, ln 3]) = [1/(1+3), 3/(1+3)] = [0.25, 0.75]
        let v = Vector::from(vec![1.0f64.ln(), 3.0f64.ln()]);
        let p = softmax(&v);
        assert!((p[0] - 0.25).abs() < 1e-15);
        assert!((p[1] - 0.75).abs() < 1e-15);
    }

    #[test]
    fn matrix_rejects_bad_element_count() {
        assert!(Matrix::from_rows(2, 3, vec![0.0; 5]).is_err());
    }

    fn small_vec(len: std::ops::Range<usize>) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-50.0f64..50.0, len)
    }

    proptest! {
        #[test]
        fn softmax_sums_to_one(v in small_vec(2..10)) {
            let p = softmax(&Vector::from(v));
            let total: f64 = p.iter().sum();
            prop_assert!((total - 1.0).abs() < 1e-12);
        }

        // The open unit interval holds while exp(min - max) stays above f64
        // resolution, i.e. for spreads up to ~30.
        #[test]
        fn softmax_components_in_open_unit(v in prop::collection::vec(-15.0f64..15.0, 2..10)) {
            let p = softmax(&Vector::from(v));
            for &x in p.iter() {
                prop_assert!(x > 0.0 && x < 1.0);
            }
        }

        #[test]
        fn softmax_shift_invariance(v in small_vec(2..10), t in -100.0f64..100.0) {
            let base = softmax(&Vector::from(v.clone()));
            let shifted = softmax(&Vector::from(v.iter().map(|x| x + t).collect::<Vec<_>>()));
            for (a, b) in base.iter().zip(shifted.iter()) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }

        #[test]
        fn relu_is_idempotent(v in small_vec(1..20)) {
            let once = relu(&Vector::from(v));
            let twice = relu(&once);
            prop_assert_eq!(once.as_slice(), twice.as_slice());
        }

        #[test]
        fn affine_is_linear(
            data in prop::collection::vec(-2.0f64..2.0, 12),
            x in prop::collection::vec(-2.0f64..2.0, 4),
            y in prop::collection::vec(-2.0f64..2.0, 4),
            alpha in -2.0f64..2.0,
            beta in -2.0f64..2.0,
        ) {
            let w = Matrix::from_rows(3, 4, data).unwrap();
            let zero = Vector::zeros(3);
            let combo: Vec<f64> = x.iter().zip(&y).map(|(a, b)| alpha * a + beta * b).collect();
            let lhs = affine(&w, &Vector::from(combo), &zero).unwrap();
            let ax = affine(&w, &Vector::from(x), &zero).unwrap();
            let ay = affine(&w, &Vector::from(y), &zero).unwrap();
            for i in 0..3 {
                let rhs = alpha * ax[i] + beta * ay[i];
                prop_assert!((lhs[i] - rhs).abs() < 1e-9);
            }
        }
    }
}
