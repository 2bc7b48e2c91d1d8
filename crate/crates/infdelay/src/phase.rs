//! Exponentially weighted phase spaces of backward histories.
//!
//! A phase vector `phi` assigns a state `phi^[m] in R^d` to every
//! non-positive coordinate `m <= 0`; coordinate `m` is stored under the
//! *depth* `j = -m >= 0`. Only finitely many coordinates are ever nonzero
//! here, and exact zeros are never stored, so every vector has finite
//! support.
//!
//! Two norm families are supported, parametrized by a weight `gamma`:
//!
//! * weighted sup: `|phi| = sup_{m <= 0} |phi^[m]|_X e^{gamma m}`,
//! * weighted `l^r` (`1 <= r < infinity`):
//!   `|phi| = ( sum_{m <= 0} ( |phi^[m]|_X e^{gamma m} )^r )^{1/r}`,
//!
//! where `|.|_X` is the max-abs-entry norm on `R^d`. Positive `gamma`
//! discounts the distant past; negative `gamma` amplifies it.

use std::collections::BTreeMap;

use nalgebra::DVector;
use thiserror::Error;

use crate::state::{is_zero_vec, max_norm};

/// Errors from phase-space operations.
#[derive(Debug, Error, PartialEq)]
pub enum PhaseError {
    /// A projection window `[m1, m2]` was empty or extended past zero.
    #[error("invalid projection window [{m1:?}, {m2}]: need m1 <= m2 <= 0")]
    BadWindow {
        /// Lower end of the window (`None` means unbounded below).
        m1: Option<i64>,
        /// Upper end of the window.
        m2: i64,
    },
    /// A sequence-norm exponent below one (or NaN) was requested.
    #[error("invalid sequence-norm exponent {0}: need p >= 1 (or infinity)")]
    BadExponent(f64),
    /// Two operands had different state dimensions.
    #[error("state dimension mismatch: {expected} vs {got}")]
    DimMismatch {
        /// Dimension of the left/first operand.
        expected: usize,
        /// Dimension of the offending operand.
        got: usize,
    },
}

/// The summability exponent of a weighted phase-space norm.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RExponent {
    /// Weighted supremum over coordinates.
    Sup,
    /// Weighted `l^r` sum; the exponent must be at least `1`.
    Finite(u32),
}

/// A weighted phase-space norm: weight `gamma` plus summability exponent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightSpec {
    /// Exponential weight applied as `e^{gamma m}` at coordinate `m <= 0`.
    pub gamma: f64,
    /// Summability exponent across coordinates.
    pub r: RExponent,
}

impl WeightSpec {
    /// Weighted-sup norm with weight `gamma`.
    pub fn sup(gamma: f64) -> Self {
        WeightSpec { gamma, r: RExponent::Sup }
    }

    /// Weighted `l^r` norm with weight `gamma`.
    ///
    /// # Panics
    /// Panics if `r == 0`; the norm is only defined for `r >= 1`.
    pub fn lr(gamma: f64, r: u32) -> Self {
        assert!(r >= 1, "weighted l^r norm requires r >= 1, got r = {r}");
        WeightSpec { gamma, r: RExponent::Finite(r) }
    }
}

/// A finitely supported backward history in `R^d`.
///
/// Coordinates are indexed by depth `j >= 0` (the coordinate `m = -j`);
/// depths holding an exact zero are never stored, so iteration order and
/// floating-point accumulation order are canonical for a given value.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseVector {
    dim: usize,
    coords: BTreeMap<u64, DVector<f64>>,
}

impl PhaseVector {
    /// The zero history in dimension `dim`.
    pub fn zero(dim: usize) -> Self {
        PhaseVector { dim, coords: BTreeMap::new() }
    }

    /// The embedding of a single state at the given depth: the history whose
    /// only nonzero coordinate is `phi^[-depth] = state`.
    pub fn embed(state: DVector<f64>, depth: u64) -> Self {
        let dim = state.len();
        let mut coords = BTreeMap::new();
        if !is_zero_vec(&state) {
            coords.insert(depth, state);
        }
        PhaseVector { dim, coords }
    }

    /// Builds a history from `(depth, state)` pairs, dropping exact zeros.
    ///
    /// Later entries overwrite earlier ones at the same depth.
    pub fn from_coords<I>(dim: usize, entries: I) -> Result<Self, PhaseError>
    where
        I: IntoIterator<Item = (u64, DVector<f64>)>,
    {
        let mut coords = BTreeMap::new();
        for (depth, v) in entries {
            if v.len() != dim {
                return Err(PhaseError::DimMismatch { expected: dim, got: v.len() });
            }
            if is_zero_vec(&v) {
                coords.remove(&depth);
            } else {
                coords.insert(depth, v);
            }
        }
        Ok(PhaseVector { dim, coords })
    }

    /// State dimension `d` of each coordinate.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// The stored coordinate at `depth`, if it is nonzero.
    pub fn coord(&self, depth: u64) -> Option<&DVector<f64>> {
        self.coords.get(&depth)
    }

    /// The coordinate at `depth`, materializing zero when absent.
    pub fn coord_or_zero(&self, depth: u64) -> DVector<f64> {
        self.coords.get(&depth).cloned().unwrap_or_else(|| DVector::zeros(self.dim))
    }

    /// Overwrites the coordinate at `depth` (removing it when exactly zero).
    pub fn set_coord(&mut self, depth: u64, v: DVector<f64>) -> Result<(), PhaseError> {
        if v.len() != self.dim {
            return Err(PhaseError::DimMismatch { expected: self.dim, got: v.len() });
        }
        if is_zero_vec(&v) {
            self.coords.remove(&depth);
        } else {
            self.coords.insert(depth, v);
        }
        Ok(())
    }

    /// Iterates the nonzero coordinates as `(depth, state)`, shallowest first.
    pub fn support(&self) -> impl Iterator<Item = (u64, &DVector<f64>)> {
        self.coords.iter().map(|(&j, v)| (j, v))
    }

    /// Number of stored (nonzero) coordinates.
    pub fn support_len(&self) -> usize {
        self.coords.len()
    }

    /// Deepest nonzero coordinate, or `None` for the zero history.
    pub fn max_depth(&self) -> Option<u64> {
        self.coords.keys().next_back().copied()
    }

    /// True when every coordinate is zero.
    pub fn is_zero(&self) -> bool {
        self.coords.is_empty()
    }

    /// The weighted norm of this history under `w`.
    ///
    /// Weights are evaluated as `e^{-j * gamma}` at depth `j`; overflow to
    /// infinity (deep coordinates under strongly negative `gamma`) follows
    /// IEEE semantics.
    pub fn norm(&self, w: &WeightSpec) -> f64 {
        match w.r {
            RExponent::Sup => {
                let mut best = 0.0_f64;
                for (&j, v) in &self.coords {
                    best = best.max(max_norm(v) * weight(w.gamma, j));
                }
                best
            }
            RExponent::Finite(r) => {
                assert!(r >= 1, "weighted l^r norm requires r >= 1");
                let mut sum = 0.0_f64;
                for (&j, v) in &self.coords {
                    let a = max_norm(v) * weight(w.gamma, j);
                    sum += match r {
                        1 => a,
                        2 => a * a,
                        _ => a.powi(r as i32),
                    };
                }
                match r {
                    1 => sum,
                    2 => sum.sqrt(),
                    _ => sum.powf(1.0 / f64::from(r)),
                }
            }
        }
    }

    /// The backward shift power `S^j`: pushes every coordinate `j` steps
    /// deeper, leaving depths `0..j` zero. Exact (no float operations).
    pub fn shift_pow(&self, j: u64) -> PhaseVector {
        let coords = self.coords.iter().map(|(&d, v)| (d + j, v.clone())).collect();
        PhaseVector { dim: self.dim, coords }
    }

    /// The window projection onto coordinates `m in [m1, m2]` (with
    /// `m1 = None` meaning unbounded below); all other coordinates become
    /// zero. Requires `m1 <= m2 <= 0`.
    pub fn project(&self, m1: Option<i64>, m2: i64) -> Result<PhaseVector, PhaseError> {
        if m2 > 0 || matches!(m1, Some(lo) if lo > m2) {
            return Err(PhaseError::BadWindow { m1, m2 });
        }
        // Coordinate m corresponds to depth j = -m, so [m1, m2] becomes the
        // depth range [-m2, -m1].
        let j_lo = (-m2) as u64;
        let coords = self
            .coords
            .iter()
            .filter(|(&j, _)| j >= j_lo && m1.is_none_or(|lo| j <= lo.unsigned_abs()))
            .map(|(&j, v)| (j, v.clone()))
            .collect();
        Ok(PhaseVector { dim: self.dim, coords })
    }

    /// The complementary projection `I - P_{[m1, m2]}`.
    pub fn project_complement(&self, m1: Option<i64>, m2: i64) -> Result<PhaseVector, PhaseError> {
        if m2 > 0 || matches!(m1, Some(lo) if lo > m2) {
            return Err(PhaseError::BadWindow { m1, m2 });
        }
        let j_lo = (-m2) as u64;
        let coords = self
            .coords
            .iter()
            .filter(|(&j, _)| !(j >= j_lo && m1.is_none_or(|lo| j <= lo.unsigned_abs())))
            .map(|(&j, v)| (j, v.clone()))
            .collect();
        Ok(PhaseVector { dim: self.dim, coords })
    }

    /// Coordinate-wise sum. Exact zeros produced by cancellation are pruned.
    pub fn add(&self, other: &PhaseVector) -> Result<PhaseVector, PhaseError> {
        if other.dim != self.dim {
            return Err(PhaseError::DimMismatch { expected: self.dim, got: other.dim });
        }
        let mut coords = self.coords.clone();
        for (&j, v) in &other.coords {
            match coords.get_mut(&j) {
                Some(cur) => {
                    *cur += v;
                    if is_zero_vec(cur) {
                        coords.remove(&j);
                    }
                }
                None => {
                    coords.insert(j, v.clone());
                }
            }
        }
        Ok(PhaseVector { dim: self.dim, coords })
    }

    /// Coordinate-wise difference.
    pub fn sub(&self, other: &PhaseVector) -> Result<PhaseVector, PhaseError> {
        self.add(&other.scale(-1.0))
    }

    /// Scalar multiple. Scaling by zero yields the zero history.
    pub fn scale(&self, c: f64) -> PhaseVector {
        let mut coords = BTreeMap::new();
        for (&j, v) in &self.coords {
            let scaled = v * c;
            if !is_zero_vec(&scaled) {
                coords.insert(j, scaled);
            }
        }
        PhaseVector { dim: self.dim, coords }
    }
}

/// The exponential weight `e^{gamma m}` at coordinate `m = -depth`.
fn weight(gamma: f64, depth: u64) -> f64 {
    if depth == 0 {
        1.0
    } else {
        (-(depth as f64) * gamma).exp()
    }
}

/// Finite-horizon `l^p` norm of a state-valued sequence (using the
/// max-abs-entry norm on each term). `p` may be any finite value `>= 1` or
/// `f64::INFINITY` for the sup norm; anything else is rejected.
pub fn seq_norm(values: &[DVector<f64>], p: f64) -> Result<f64, PhaseError> {
    let norms: Vec<f64> = values.iter().map(max_norm).collect();
    seq_norm_scalars(&norms, p)
}

/// Finite-horizon `l^p` norm of a scalar sequence (absolute values).
pub fn seq_norm_scalars(norms: &[f64], p: f64) -> Result<f64, PhaseError> {
    if p.is_nan() || p < 1.0 {
        return Err(PhaseError::BadExponent(p));
    }
    if p.is_infinite() {
        return Ok(norms.iter().fold(0.0_f64, |acc, &a| acc.max(a.abs())));
    }
    let mut sum = 0.0_f64;
    for &a in norms {
        let a = a.abs();
        sum += if p == 1.0 {
            a
        } else if p == 2.0 {
            a * a
        } else {
            a.powf(p)
        };
    }
    Ok(match p {
        1.0 => sum,
        2.0 => sum.sqrt(),
        _ => sum.powf(1.0 / p),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dvector;

    fn phi_two_entries() -> PhaseVector {
        // phi^[0] = 1, phi^[-2] = 3 (scalar states).
        PhaseVector::from_coords(1, [(0, dvector![1.0]), (2, dvector![3.0])]).unwrap()
    }

    #[test]
    fn sup_norm_unweighted_takes_deepest_large_entry() {
        let phi = phi_two_entries();
        assert_eq!(phi.norm(&WeightSpec::sup(0.0)), 3.0);
    }

    #[test]
    fn sup_norm_discounts_past_for_positive_weight() {
        let phi = phi_two_entries();
        let gamma = 1.0;
        let expected = (3.0 * (-2.0_f64).exp()).max(1.0);
        assert_eq!(phi.norm(&WeightSpec::sup(gamma)), expected);
        // e^{-2} * 3 < 1, so the head coordinate dominates.
        assert_eq!(expected, 1.0);
    }

    #[test]
    fn l2_norm_with_log_two_weight() {
        // phi^[0] = 1, phi^[-1] = 1; gamma = ln 2, r = 2:
        // sqrt(1 + (1/2)^2) = sqrt(5)/2.
        let phi =
            PhaseVector::from_coords(1, [(0, dvector![1.0]), (1, dvector![1.0])]).unwrap();
        let w = WeightSpec::lr(2.0_f64.ln(), 2);
        let got = phi.norm(&w);
        assert!((got - 5.0_f64.sqrt() / 2.0).abs() < 1e-15);
    }

    #[test]
    fn shift_scales_sup_norm_exactly() {
        let phi = phi_two_entries();
        let w = WeightSpec::sup(0.7);
        let shifted = phi.shift_pow(2);
        let expected = (-2.0 * 0.7_f64).exp() * phi.norm(&w);
        assert!((shifted.norm(&w) - expected).abs() <= 1e-15 * expected);
    }

    #[test]
    fn shift_is_isometry_for_weighted_l2() {
        let phi = phi_two_entries();
        let w = WeightSpec::lr(-0.3, 2);
        let shifted = phi.shift_pow(3);
        let expected = (-3.0 * -0.3_f64).exp() * phi.norm(&w);
        assert!((shifted.norm(&w) - expected).abs() <= 1e-14 * expected.abs());
    }

    #[test]
    fn head_tail_decomposition_recovers_sup_norm() {
        let phi = phi_two_entries();
        let w = WeightSpec::sup(-0.4);
        let head = phi.project(Some(0), 0).unwrap();
        let tail = phi.project_complement(Some(0), 0).unwrap();
        assert_eq!(phi.norm(&w), head.norm(&w).max(tail.norm(&w)));
        assert_eq!(head.add(&tail).unwrap(), phi);
    }

    #[test]
    fn projection_is_idempotent_and_window_checked() {
        let phi = phi_two_entries();
        let p = phi.project(Some(-1), 0).unwrap();
        assert_eq!(p.project(Some(-1), 0).unwrap(), p);
        assert_eq!(p.coord(2), None);
        assert!(phi.project(Some(0), -1).is_err());
        assert!(phi.project(None, 1).is_err());
    }

    #[test]
    fn embed_places_state_at_depth() {
        let e = PhaseVector::embed(dvector![2.0, -1.0], 5);
        assert_eq!(e.coord(5), Some(&dvector![2.0, -1.0]));
        assert_eq!(e.max_depth(), Some(5));
        assert_eq!(e.norm(&WeightSpec::sup(0.0)), 2.0);
    }

    #[test]
    fn cancellation_prunes_support() {
        let phi = phi_two_entries();
        let diff = phi.sub(&phi).unwrap();
        assert!(diff.is_zero());
        assert_eq!(diff.max_depth(), None);
    }

    #[test]
    fn seq_norm_matches_hand_values() {
        let u = vec![dvector![3.0], dvector![-4.0]];
        assert_eq!(seq_norm(&u, 1.0).unwrap(), 7.0);
        assert_eq!(seq_norm(&u, 2.0).unwrap(), 5.0);
        assert_eq!(seq_norm(&u, f64::INFINITY).unwrap(), 4.0);
        assert!(seq_norm(&u, 0.5).is_err());
        assert!(seq_norm(&u, f64::NAN).is_err());
    }

    #[test]
    fn finite_p_norms_are_monotone_decreasing_in_p() {
        let u = vec![dvector![1.0], dvector![0.5], dvector![0.25]];
        let n1 = seq_norm(&u, 1.0).unwrap();
        let n2 = seq_norm(&u, 2.0).unwrap();
        let n3 = seq_norm(&u, 3.0).unwrap();
        let ninf = seq_norm(&u, f64::INFINITY).unwrap();
        assert!(n1 >= n2 && n2 >= n3 && n3 >= ninf);
    }
}
