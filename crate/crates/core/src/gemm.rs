//! Exact INT8 x INT8 -> INT32 GEMM and the checksum reductions used by every
//! detector.

use crate::error::{Error, Result};
use crate::matrix::{AccumMatrix, ChecksumVector, IntMatrix, QuantMatrix, Side};

/// Largest inner dimension for which `|y| <= 128 * 128 * K` stays inside i32.
pub const MAX_INNER_DIM: usize = 1 << 16;

fn check_inner(w: &QuantMatrix, x: &QuantMatrix) -> Result<()> {
    if w.cols() != x.rows() {
        return Err(Error::DimensionMismatch(format!(
            "W is {}x{} but X is {}x{}",
            w.rows(),
            w.cols(),
            x.rows(),
            x.cols()
        )));
    }
    if w.cols() > MAX_INNER_DIM {
        return Err(Error::InnerDimTooLarge {
            k: w.cols(),
            max: MAX_INNER_DIM,
        });
    }
    Ok(())
}

/// `Y = W X` in exact integer arithmetic.
pub fn gemm(w: &QuantMatrix, x: &QuantMatrix) -> Result<AccumMatrix> {
    check_inner(w, x)?;
    let (m, n) = (w.rows(), x.cols());
    let mut out = vec![0i32; m * n];
    for (i, acc) in out.chunks_exact_mut(n.max(1)).enumerate().take(m) {
        for (k, &wik) in w.row(i).iter().enumerate() {
            if wik == 0 {
                continue;
            }
            let wik = i32::from(wik);
            for (a, &xkj) in acc.iter_mut().zip(x.row(k)) {
                *a += wik * i32::from(xkj);
            }
        }
    }
    AccumMatrix::new(m, n, out)
}

/// All-ones reduction of `m`: `Side::Row` gives `e^T M` (column sums),
/// `Side::Column` gives `M e` (row sums).
pub fn checksum<M: IntMatrix + ?Sized>(m: &M, side: Side) -> ChecksumVector {
    let (rows, cols) = (m.rows(), m.cols());
    match side {
        Side::Row => {
            let mut sums = vec![0i64; cols];
            for i in 0..rows {
                for (j, s) in sums.iter_mut().enumerate() {
                    *s += m.at(i, j);
                }
            }
            ChecksumVector::new(side, sums)
        }
        Side::Column => {
            let sums = (0..rows)
                .map(|i| (0..cols).map(|j| m.at(i, j)).sum())
                .collect();
            ChecksumVector::new(side, sums)
        }
    }
}

/// `(e^T W) X`, the output column checksums predicted from the operands alone.
pub fn predicted_output_checksum(w: &QuantMatrix, x: &QuantMatrix) -> Result<ChecksumVector> {
    check_inner(w, x)?;
    let ew = checksum(w, Side::Row);
    let mut pred = ChecksumVector::zeros(Side::Row, x.cols());
    for (k, &s) in ew.as_slice().iter().enumerate() {
        if s == 0 {
            continue;
        }
        for (p, &xkj) in pred.data_mut().iter_mut().zip(x.row(k)) {
            *p += s * i64::from(xkj);
        }
    }
    Ok(pred)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive(w: &[Vec<i64>], x: &[Vec<i64>]) -> Vec<Vec<i64>> {
        let (m, k, n) = (w.len(), x.len(), x[0].len());
        let mut y = vec![vec![0; n]; m];
        for i in 0..m {
            for j in 0..n {
                for t in 0..k {
                    y[i][j] += w[i][t] * x[t][j];
                }
            }
        }
        y
    }

    fn w2() -> QuantMatrix {
        QuantMatrix::from_rows(&[[1, 2], [3, 4]]).unwrap()
    }

    fn x2() -> QuantMatrix {
        QuantMatrix::from_rows(&[[5, 6], [7, 8]]).unwrap()
    }

    #[test]
    fn identity_and_zero() {
        let y = gemm(&QuantMatrix::identity(2), &x2()).unwrap();
        assert_eq!(y, AccumMatrix::from_rows(&[[5, 6], [7, 8]]).unwrap());
        let y = gemm(&QuantMatrix::zeros(2, 2), &x2()).unwrap();
        assert_eq!(y, AccumMatrix::zeros(2, 2));
    }

    #[test]
    fn small_product_matches_naive_oracle() {
        let oracle = naive(&[vec![1, 2], vec![3, 4]], &[vec![5, 6], vec![7, 8]]);
        assert_eq!(oracle, vec![vec![19, 22], vec![43, 50]]);
        let y = gemm(&w2(), &x2()).unwrap();
        assert_eq!(y, AccumMatrix::from_rows(&[[19, 22], [43, 50]]).unwrap());
    }

    #[test]
    fn checksum_examples() {
        assert_eq!(checksum(&w2(), Side::Row).as_slice(), &[4, 6]);
        assert_eq!(checksum(&x2(), Side::Column).as_slice(), &[11, 15]);
        assert_eq!(checksum(&QuantMatrix::zeros(3, 2), Side::Row).as_slice(), &[0, 0]);
        assert_eq!(checksum(&QuantMatrix::zeros(3, 2), Side::Column).as_slice(), &[0, 0, 0]);
    }

    #[test]
    fn predicted_checksum_examples() {
        let p = predicted_output_checksum(&w2(), &x2()).unwrap();
        assert_eq!(p.as_slice(), &[62, 72]);
        assert_eq!(p.side(), Side::Row);
        // scalar identity: (e^T W)(X e) = 4*11 + 6*15
        assert_eq!(p.total(), 134);
        assert_eq!(4 * 11 + 6 * 15, 134);

        let z = predicted_output_checksum(&QuantMatrix::zeros(2, 2), &x2()).unwrap();
        assert_eq!(z.as_slice(), &[0, 0]);
    }

    #[test]
    fn dimension_errors() {
        let w = QuantMatrix::zeros(2, 3);
        assert!(matches!(gemm(&w, &x2()), Err(Error::DimensionMismatch(_))));
        assert!(predicted_output_checksum(&w, &x2()).is_err());

        let w = QuantMatrix::zeros(1, MAX_INNER_DIM + 1);
        let x = QuantMatrix::zeros(MAX_INNER_DIM + 1, 1);
        assert!(matches!(gemm(&w, &x), Err(Error::InnerDimTooLarge { .. })));
    }

    #[test]
    fn extreme_values_at_max_inner_dim_do_not_overflow() {
        let k = MAX_INNER_DIM;
        let w = QuantMatrix::new(1, k, vec![-128; k]).unwrap();
        let x = QuantMatrix::new(k, 1, vec![-128; k]).unwrap();
        let y = gemm(&w, &x).unwrap();
        assert_eq!(i64::from(y.get(0, 0)), 128 * 128 * k as i64);
    }
}
