//! Trajectory computation for kernel systems, in two equivalent forms.
//!
//! *Direct form*: starting at time `tau` from an initial history `phi`
//! (coordinate `phi^[-j] = x(tau - j)`), iterate
//! `x(n + 1) = sum_k L(n, k) x(n - k) + f(n)`.
//!
//! *Reduced form*: the whole history evolves as a first-order system on the
//! phase space,
//!
//! ```text
//! y(n + 1) = E_0 ( L(n) y(n) ) + S y(n) + g(n),
//! ```
//!
//! where `E_0` embeds a state at depth zero, `S` is the backward shift and
//! `g` is a phase-space forcing. For a state forcing (`g(n) = E_0 f(n)`)
//! the reduced solution's head coordinates reproduce the direct solution.
//! For general `g`, the two are linked through the prehistory accumulator
//! [`h_operator`]: `y = x(. ; f) + h` with
//! `f(n) = g(n)^[0] + L(n) h(n)` — the defect measured by
//! [`representation_residual`].
//!
//! Term accumulation is canonical: depths are visited in increasing order
//! and exactly-zero stored states are skipped without touching the
//! floating-point state, so systems that agree on the nonzero terms of a
//! trajectory produce bit-identical results.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::phase::{seq_norm, PhaseError, PhaseVector, WeightSpec};
use crate::state::is_zero_vec;
use crate::system::{KernelSystem, SystemError};

/// Errors from trajectory computation.
#[derive(Debug, Error, PartialEq)]
pub enum SolverError {
    /// Phase-space operation failed (dimension or window misuse).
    #[error(transparent)]
    Phase(#[from] PhaseError),
    /// Kernel application failed.
    #[error(transparent)]
    System(#[from] SystemError),
    /// `n_end` was smaller than the start time.
    #[error("horizon {n_end} precedes start time {start}")]
    BadHorizon {
        /// Requested start time.
        start: u64,
        /// Requested final time.
        n_end: u64,
    },
    /// The prehistory accumulator's defining sum and recurrence disagreed;
    /// indicates a defect in this crate, not in user input.
    #[error("prehistory accumulator self-check failed at time {0}")]
    AccumulatorMismatch(u64),
}

/// A computed state trajectory together with its initial data.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// Start time `tau`.
    pub start: u64,
    /// Computed states: `values[i] = x(start + i)`, with
    /// `values[0] = phi^[0]`.
    pub values: Vec<DVector<f64>>,
    /// The initial history `phi` (coordinate `-j` holds `x(start - j)`).
    pub initial_prehistory: PhaseVector,
}

impl Trajectory {
    /// Final computed time.
    pub fn end(&self) -> u64 {
        self.start + (self.values.len() as u64 - 1)
    }

    /// The state at time `n >= start`, if computed.
    pub fn value(&self, n: u64) -> Option<&DVector<f64>> {
        n.checked_sub(self.start).and_then(|i| self.values.get(i as usize))
    }

    /// The state at any time covered by the trajectory or its initial
    /// history (zero beyond the stored history).
    pub fn state_at(&self, t: i64) -> DVector<f64> {
        if t >= self.start as i64 {
            self.value(t as u64)
                .cloned()
                .unwrap_or_else(|| DVector::zeros(self.initial_prehistory.dim()))
        } else {
            self.initial_prehistory.coord_or_zero((self.start as i64 - t) as u64)
        }
    }

    /// Assembles the full history `x_n` at a computed time `n` as a phase
    /// vector (depth `j` holding `x(n - j)`).
    pub fn prehistory(&self, n: u64) -> Result<PhaseVector, SolverError> {
        let i = match n.checked_sub(self.start) {
            Some(i) if (i as usize) < self.values.len() => i,
            _ => return Err(SolverError::BadHorizon { start: self.start, n_end: n }),
        };
        // Initial coordinates below the head slide deeper as time advances...
        let tail = self.initial_prehistory.project_complement(Some(0), 0)?.shift_pow(i);
        let mut out = tail;
        // ...and computed values fill depths n - t for start <= t <= n
        // (the head phi^[0] is values[0]).
        for (offset, v) in self.values[..=(i as usize)].iter().enumerate() {
            out.set_coord(i - offset as u64, v.clone())?;
        }
        Ok(out)
    }

    /// Finite-horizon `l^p` norm of the computed values.
    pub fn seq_norm(&self, p: f64) -> Result<f64, SolverError> {
        Ok(seq_norm(&self.values, p)?)
    }
}

/// A computed phase-space trajectory: `states[i] = y(start + i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseTrajectory {
    /// Start time.
    pub start: u64,
    /// Phase vectors of the reduced system, one per time step.
    pub states: Vec<PhaseVector>,
}

impl PhaseTrajectory {
    /// The phase vector at time `n >= start`, if computed.
    pub fn state(&self, n: u64) -> Option<&PhaseVector> {
        n.checked_sub(self.start).and_then(|i| self.states.get(i as usize))
    }
}

/// Solves the direct recurrence from time `tau` with initial history `phi`
/// and forcing `forcing[i] = f(tau + i)` (zero beyond the slice), computing
/// states through time `n_end` inclusive.
pub fn solve(
    sys: &KernelSystem,
    tau: u64,
    phi: &PhaseVector,
    forcing: &[DVector<f64>],
    n_end: u64,
) -> Result<Trajectory, SolverError> {
    let d = sys.dim();
    if phi.dim() != d {
        return Err(SystemError::DimMismatch { expected: d, got: phi.dim() }.into());
    }
    for f in forcing {
        if f.len() != d {
            return Err(SystemError::DimMismatch { expected: d, got: f.len() }.into());
        }
    }
    if n_end < tau {
        return Err(SolverError::BadHorizon { start: tau, n_end });
    }

    // Dense timeline from the deepest initial coordinate through n_end;
    // index i holds the state at time t0 + i.
    let depth0 = phi.max_depth().unwrap_or(0);
    let t0 = tau as i64 - depth0 as i64;
    let len = (n_end as i64 - t0) as usize + 1;
    let mut timeline: Vec<DVector<f64>> = vec![DVector::zeros(d); len];
    for (j, v) in phi.support() {
        timeline[(depth0 - j) as usize] = v.clone();
    }

    let mut kbuf = DMatrix::zeros(d, d);
    for n in tau..n_end {
        let k_hi = (n as i64 - t0) as u64;
        let mut acc = DVector::zeros(d);
        for k in sys.row_candidates(n, k_hi) {
            let idx = (n as i64 - k as i64 - t0) as usize;
            let v = &timeline[idx];
            if is_zero_vec(v) {
                continue;
            }
            sys.eval_into(n, k, &mut kbuf);
            acc.gemv(1.0, &kbuf, v, 1.0);
        }
        if let Some(f) = forcing.get((n - tau) as usize) {
            acc += f;
        }
        timeline[(n as i64 + 1 - t0) as usize] = acc;
    }

    let values = timeline.split_off((tau as i64 - t0) as usize);
    Ok(Trajectory { start: tau, values, initial_prehistory: phi.clone() })
}

/// Solves the reduced first-order phase-space recurrence
/// `y(n + 1) = E_0(L(n) y(n)) + S y(n) + g(n)` from `y(tau) = phi`, with
/// `g[i]` the phase forcing at time `tau + i` (zero beyond the slice).
pub fn reduced_solve(
    sys: &KernelSystem,
    tau: u64,
    phi: &PhaseVector,
    g: &[PhaseVector],
    n_end: u64,
) -> Result<PhaseTrajectory, SolverError> {
    let d = sys.dim();
    if phi.dim() != d {
        return Err(SystemError::DimMismatch { expected: d, got: phi.dim() }.into());
    }
    if n_end < tau {
        return Err(SolverError::BadHorizon { start: tau, n_end });
    }
    let steps = (n_end - tau) as usize;
    let mut states = Vec::with_capacity(steps + 1);
    states.push(phi.clone());
    for i in 0..steps {
        let n = tau + i as u64;
        let cur = &states[i];
        let head = PhaseVector::embed(sys.apply(n, cur)?, 0);
        let mut next = head.add(&cur.shift_pow(1))?;
        if let Some(gn) = g.get(i) {
            next = next.add(gn)?;
        }
        states.push(next);
    }
    Ok(PhaseTrajectory { start: tau, states })
}

/// The prehistory accumulator applied to a phase forcing `g`:
///
/// ```text
/// h(n) = sum_{start <= k < n} S^{n-k-1} (I - P_{{0}}) g(k),
/// ```
///
/// computed through the one-step recurrence
/// `h(n + 1) = S h(n) + (I - P_{{0}}) g(n)`, `h(start) = 0`. The defining
/// sum is evaluated independently at every step and must agree bit-for-bit
/// with the recurrence (the same additions happen in the same order, and
/// shifts move no floating-point data); disagreement is reported as
/// [`SolverError::AccumulatorMismatch`].
pub fn h_operator(
    dim: usize,
    g: &[PhaseVector],
    start: u64,
    n_end: u64,
) -> Result<PhaseTrajectory, SolverError> {
    if n_end < start {
        return Err(SolverError::BadHorizon { start, n_end });
    }
    for gn in g {
        if gn.dim() != dim {
            return Err(SystemError::DimMismatch { expected: dim, got: gn.dim() }.into());
        }
    }
    let steps = (n_end - start) as usize;
    let tails: Vec<PhaseVector> = g
        .iter()
        .take(steps)
        .map(|gn| gn.project_complement(Some(0), 0))
        .collect::<Result<_, _>>()?;

    let mut states = Vec::with_capacity(steps + 1);
    states.push(PhaseVector::zero(dim));
    for i in 0..steps {
        let tail = tails.get(i).cloned().unwrap_or_else(|| PhaseVector::zero(dim));
        let next = states[i].shift_pow(1).add(&tail)?;

        // Independent evaluation of the defining sum at time start + i + 1.
        let mut direct = PhaseVector::zero(dim);
        for (k, t) in tails.iter().enumerate().take(i + 1) {
            direct = direct.add(&t.shift_pow((i - k) as u64))?;
        }
        if !phase_bits_equal(&next, &direct) {
            return Err(SolverError::AccumulatorMismatch(start + i as u64 + 1));
        }
        states.push(next);
    }
    Ok(PhaseTrajectory { start, states })
}

/// Bitwise equality of two phase vectors (distinguishes `0.0` from `-0.0`).
fn phase_bits_equal(a: &PhaseVector, b: &PhaseVector) -> bool {
    if a.dim() != b.dim() || a.support_len() != b.support_len() {
        return false;
    }
    a.support().zip(b.support()).all(|((ja, va), (jb, vb))| {
        ja == jb
            && va.len() == vb.len()
            && va.iter().zip(vb.iter()).all(|(x, y)| x.to_bits() == y.to_bits())
    })
}

/// Measures how far the reduced solution from zero initial data deviates
/// from its decomposition into a directly solved trajectory plus the
/// prehistory accumulator.
///
/// With `y = reduced_solve(0, 0, g)`, `h = h_operator(g)` and the induced
/// state forcing `f(n) = g(n)^[0] + L(n) h(n)`, returns
/// `max_{n <= n_end} | y(n) - (x_n(0, 0; f) + h(n)) |_w`.
pub fn representation_residual(
    sys: &KernelSystem,
    g: &[PhaseVector],
    n_end: u64,
    w: &WeightSpec,
) -> Result<f64, SolverError> {
    let d = sys.dim();
    let zero = PhaseVector::zero(d);
    let y = reduced_solve(sys, 0, &zero, g, n_end)?;
    let h = h_operator(d, g, 0, n_end)?;

    let mut forcing = Vec::with_capacity(n_end as usize);
    for n in 0..n_end {
        let mut f = sys.apply(n, &h.states[n as usize])?;
        if let Some(gn) = g.get(n as usize) {
            f += &gn.coord_or_zero(0);
        }
        forcing.push(f);
    }
    let x = solve(sys, 0, &zero, &forcing, n_end)?;

    let mut worst = 0.0_f64;
    for n in 0..=n_end {
        let xn = x.prehistory(n)?;
        let combined = xn.add(&h.states[n as usize])?;
        let defect = y.states[n as usize].sub(&combined)?;
        worst = worst.max(defect.norm(w));
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::KernelSystem;
    use nalgebra::dvector;

    /// Scalar system with a decaying head tap and a full-depth echo:
    /// `L(n, 0) = 1/2` for `n >= 1`, `L(0, 0) = 3/2`, `L(n, n) = 1` for
    /// `n >= 1`.
    fn head_echo_system() -> KernelSystem {
        KernelSystem::from_fn(1, |n, k, buf| {
            if k == 0 {
                buf[(0, 0)] = if n == 0 { 1.5 } else { 0.5 };
            } else if k == n {
                buf[(0, 0)] = 1.0;
            }
        })
        .with_row_support(|n| if n == 0 { vec![0] } else { vec![0, n] })
    }

    #[test]
    fn impulse_response_halves_each_step() {
        let sys = head_echo_system();
        let phi = PhaseVector::zero(1);
        let x = solve(&sys, 0, &phi, &[dvector![1.0]], 8).unwrap();
        assert_eq!(x.values[0], dvector![0.0]);
        for n in 1..=8_u64 {
            let expected = 2.0_f64.powi(1 - n as i32);
            assert!((x.values[n as usize][0] - expected).abs() < 1e-15);
        }
    }

    #[test]
    fn homogeneous_head_start_approaches_two() {
        let sys = head_echo_system();
        let phi = PhaseVector::embed(dvector![1.0], 0);
        let x = solve(&sys, 0, &phi, &[], 10).unwrap();
        for n in 0..=10_u64 {
            let expected = 2.0 - 2.0_f64.powi(-(n as i32));
            assert!((x.values[n as usize][0] - expected).abs() < 1e-14);
        }
    }

    #[test]
    fn prehistory_reassembles_initial_history_and_values() {
        let sys = head_echo_system();
        let phi =
            PhaseVector::from_coords(1, [(0, dvector![1.0]), (2, dvector![5.0])]).unwrap();
        let x = solve(&sys, 4, &phi, &[dvector![0.5]], 6).unwrap();
        let x6 = x.prehistory(6).unwrap();
        // Depth 2 at time 6 is x(4) = phi^[0]; depth 4 is x(2) = phi^[-2].
        assert_eq!(x6.coord(2), Some(&dvector![1.0]));
        assert_eq!(x6.coord(4), Some(&dvector![5.0]));
        assert_eq!(x6.coord(0), x.value(6));
    }

    #[test]
    fn reduced_head_matches_direct_solution() {
        let sys = head_echo_system();
        let phi =
            PhaseVector::from_coords(1, [(0, dvector![0.3]), (1, dvector![-0.7])]).unwrap();
        let f = vec![dvector![1.0], dvector![0.0], dvector![-2.0]];
        let x = solve(&sys, 0, &phi, &f, 12).unwrap();
        let g: Vec<PhaseVector> =
            f.iter().map(|fv| PhaseVector::embed(fv.clone(), 0)).collect();
        let y = reduced_solve(&sys, 0, &phi, &g, 12).unwrap();
        for n in 0..=12_u64 {
            let head = y.states[n as usize].coord_or_zero(0);
            assert!((head[0] - x.values[n as usize][0]).abs() < 1e-13);
        }
    }

    #[test]
    fn reduced_state_equals_shifted_prehistory() {
        let sys = head_echo_system();
        let phi = PhaseVector::embed(dvector![2.0], 1);
        let f = vec![dvector![1.0], dvector![3.0]];
        let x = solve(&sys, 0, &phi, &f, 9).unwrap();
        let g: Vec<PhaseVector> =
            f.iter().map(|fv| PhaseVector::embed(fv.clone(), 0)).collect();
        let y = reduced_solve(&sys, 0, &phi, &g, 9).unwrap();
        for n in [0_u64, 3, 9] {
            assert_eq!(&x.prehistory(n).unwrap(), &y.states[n as usize]);
        }
    }

    #[test]
    fn accumulator_shifts_deep_forcing() {
        // g(0) concentrated at depth 1 propagates as a pure shift.
        let g = vec![PhaseVector::embed(dvector![1.0], 1)];
        let h = h_operator(1, &g, 0, 5).unwrap();
        assert!(h.states[0].is_zero());
        for n in 1..=5_u64 {
            let state = &h.states[n as usize];
            assert_eq!(state.support_len(), 1);
            assert_eq!(state.coord(n), Some(&dvector![1.0]));
        }
    }

    #[test]
    fn accumulator_drops_head_coordinates() {
        let g = vec![PhaseVector::embed(dvector![9.0], 0)];
        let h = h_operator(1, &g, 0, 4).unwrap();
        for state in &h.states {
            assert!(state.is_zero());
        }
    }

    #[test]
    fn representation_residual_is_tiny_for_mixed_forcing() {
        let sys = head_echo_system();
        let g = vec![
            PhaseVector::from_coords(1, [(0, dvector![1.0]), (2, dvector![-0.5])]).unwrap(),
            PhaseVector::embed(dvector![0.25], 1),
            PhaseVector::zero(1),
            PhaseVector::embed(dvector![-1.0], 3),
        ];
        let res = representation_residual(&sys, &g, 20, &WeightSpec::sup(1.0)).unwrap();
        assert!(res <= 1e-12, "residual {res}");
    }

    #[test]
    fn subdiagonal_trajectory_is_bit_identical_from_rest() {
        let sys = head_echo_system();
        let sub = sys.subdiagonalize();
        let phi = PhaseVector::zero(1);
        let f = vec![dvector![1.0], dvector![-0.5], dvector![2.0]];
        let a = solve(&sys, 0, &phi, &f, 30).unwrap();
        let b = solve(&sub, 0, &phi, &f, 30).unwrap();
        for (va, vb) in a.values.iter().zip(b.values.iter()) {
            assert_eq!(va[0].to_bits(), vb[0].to_bits());
        }
    }
}
