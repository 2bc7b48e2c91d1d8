//! The state space `X = R^d` with the max-abs-entry norm.
//!
//! All state-level quantities in this crate use the sup norm on coordinates;
//! the induced operator norm on `d x d` matrices is the maximum absolute row
//! sum. Both helpers return `0.0` for empty inputs.

use nalgebra::{DMatrix, DVector};

/// Max-abs-entry norm of a state vector.
pub fn max_norm(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0_f64, |acc, &c| acc.max(c.abs()))
}

/// Operator norm induced by [`max_norm`]: the maximum absolute row sum.
pub fn mat_norm(m: &DMatrix<f64>) -> f64 {
    let mut best = 0.0_f64;
    for i in 0..m.nrows() {
        let mut row = 0.0_f64;
        for j in 0..m.ncols() {
            row += m[(i, j)].abs();
        }
        best = best.max(row);
    }
    best
}

/// True when every entry is exactly `0.0` (or `-0.0`).
pub fn is_zero_vec(v: &DVector<f64>) -> bool {
    v.iter().all(|&c| c == 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{dmatrix, dvector};

    #[test]
    fn max_norm_picks_largest_entry() {
        assert_eq!(max_norm(&dvector![1.0, -3.0, 2.0]), 3.0);
        assert_eq!(max_norm(&dvector![0.0]), 0.0);
    }

    #[test]
    fn mat_norm_is_max_abs_row_sum() {
        let m = dmatrix![1.0, -2.0; 0.5, 0.25];
        assert_eq!(mat_norm(&m), 3.0);
        let id = DMatrix::<f64>::identity(3, 3);
        assert_eq!(mat_norm(&id), 1.0);
    }

    #[test]
    fn zero_detection_treats_negative_zero_as_zero() {
        assert!(is_zero_vec(&dvector![0.0, -0.0]));
        assert!(!is_zero_vec(&dvector![0.0, 1e-300]));
    }
}
