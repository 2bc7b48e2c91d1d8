//! One-shot empirical classification of a system at a weight and exponent
//! pair: gain measurement, memory-fading checks, decay-profile fits with
//! window doubling, a weight grid for monotonicity, and a narrative
//! comparing the findings against the gain-to-decay implication.

use serde::Serialize;

use super::gain::{lplq_gain, GainEstimate};
use super::profile::{
    decay_profile, doubled_profile, stability_fit, FitMode, FitVerdict, StabilityFitResult,
};
use super::AnalysisError;
use crate::system::{ConditionReport, ConditionVerdict, KernelSystem};

/// Depth grid for the memory-fading checks.
const FADING_DEPTHS: [u64; 5] = [1, 2, 4, 8, 16];

/// Verdicts at one auxiliary weight of the grid.
#[derive(Debug, Clone, Serialize)]
pub struct GammaGridPoint {
    /// Weight the profiles were computed at.
    #[serde(serialize_with = "crate::report::ser_f64")]
    pub gamma: f64,
    /// Exponential-stability verdict at this weight.
    pub ues: FitVerdict,
    /// Uniform-stability verdict at this weight.
    pub us: FitVerdict,
}

/// Combined classification report.
#[derive(Debug, Clone, Serialize)]
pub struct StabilityReport {
    /// Weight the classification ran at.
    #[serde(serialize_with = "crate::report::ser_f64")]
    pub gamma: f64,
    /// Input exponent of the gain measurement.
    #[serde(serialize_with = "crate::report::ser_f64")]
    pub p: f64,
    /// Output exponent of the gain measurement.
    #[serde(serialize_with = "crate::report::ser_f64")]
    pub q: f64,
    /// Start-window length (also the gain horizon).
    pub horizon: u64,
    /// Largest probe depth of the decay profiles.
    pub probe_depth: u64,
    /// Gain estimate at `(p, q)`.
    pub gain: GainEstimate,
    /// Memory-fading checks at this weight over the depth grid.
    pub fading: Vec<ConditionReport>,
    /// Best fading verdict over the depth grid.
    pub fading_best: ConditionVerdict,
    /// Exponential-stability fit at this weight.
    pub ues: StabilityFitResult,
    /// Uniform-stability fit at this weight (forced consistent whenever
    /// the exponential fit is consistent, since the exponential envelope
    /// subsumes the uniform one).
    pub us: StabilityFitResult,
    /// Fits at the auxiliary weights `gamma/4, gamma/2, 3 gamma/4, gamma`.
    pub gamma_grid: Vec<GammaGridPoint>,
    /// Whether the grid verdicts respect monotonicity: among positive
    /// weights, consistency at a larger weight must not coexist with
    /// inconsistency at a smaller one.
    pub monotonicity_consistent: bool,
    /// True when `gamma <= 0`: the gain-to-decay comparison is out of
    /// scope there and the narrative records the exclusion.
    pub gamma_excluded: bool,
    /// Narrative comparing premises (bounded gain, fading memory) with
    /// the fitted decay behaviour.
    pub theorem_check: String,
}

/// Best verdict over the fading depth grid: established at any depth
/// counts as established; refuted at every depth counts as refuted.
fn best_fading(reports: &[ConditionReport]) -> ConditionVerdict {
    if reports.iter().any(|r| r.verdict == ConditionVerdict::Holds) {
        ConditionVerdict::Holds
    } else if !reports.is_empty()
        && reports
            .iter()
            .all(|r| r.verdict == ConditionVerdict::FailsEmpirically)
    {
        ConditionVerdict::FailsEmpirically
    } else {
        ConditionVerdict::Unknown
    }
}

/// Exponential consistency subsumes uniform consistency: force the
/// uniform verdict up when the exponential fit is consistent.
fn couple_fits(ues: &StabilityFitResult, us: &mut StabilityFitResult) {
    if ues.verdict == FitVerdict::Consistent {
        us.verdict = FitVerdict::Consistent;
    }
}

fn fits_at(
    sys: &KernelSystem,
    gamma: f64,
    n_starts: u64,
    probe_depth: u64,
) -> Result<(StabilityFitResult, StabilityFitResult), AnalysisError> {
    let base = decay_profile(sys, gamma, n_starts, probe_depth)?;
    let doubled = doubled_profile(sys, &base)?;
    let ues = stability_fit(&base, Some(&doubled), FitMode::Ues);
    let mut us = stability_fit(&base, Some(&doubled), FitMode::Us);
    couple_fits(&ues, &mut us);
    Ok((ues, us))
}

/// Classifies `sys` at weight `gamma` and exponents `(p, q)`.
///
/// Runs the gain estimator over `[0, n_starts]`, the memory-fading check
/// at depths 1..16, decay-profile fits (window-doubled) at `gamma` and at
/// the auxiliary weights `gamma/4, gamma/2, 3 gamma/4`, and composes a
/// narrative: for `gamma > 0` bounded gain plus fading memory predict a
/// consistent exponential fit (uniform fit when `(p, q) = (1, infinity)`),
/// while `gamma <= 0` is excluded from the comparison and recorded as
/// such.
pub fn classify(
    sys: &KernelSystem,
    gamma: f64,
    p: f64,
    q: f64,
    n_starts: u64,
    probe_depth: u64,
    seed: u64,
) -> Result<StabilityReport, AnalysisError> {
    let gain = lplq_gain(sys, p, q, n_starts, seed)?;
    let fading: Vec<ConditionReport> = FADING_DEPTHS
        .iter()
        .map(|&l| sys.fading_condition(gamma, l, n_starts))
        .collect();
    let fading_best = best_fading(&fading);

    let (ues, us) = fits_at(sys, gamma, n_starts, probe_depth)?;

    let mut grid_gammas: Vec<f64> = [0.25, 0.5, 0.75]
        .iter()
        .map(|&t| gamma * t)
        .chain(std::iter::once(gamma))
        .collect();
    grid_gammas.sort_by(f64::total_cmp);
    grid_gammas.dedup();
    let mut gamma_grid = Vec::with_capacity(grid_gammas.len());
    for &g in &grid_gammas {
        let (gu, gs) = if g == gamma {
            (ues.verdict, us.verdict)
        } else {
            let (a, b) = fits_at(sys, g, n_starts, probe_depth)?;
            (a.verdict, b.verdict)
        };
        gamma_grid.push(GammaGridPoint {
            gamma: g,
            ues: gu,
            us: gs,
        });
    }

    let mut monotonicity_consistent = true;
    for i in 0..gamma_grid.len() {
        for j in (i + 1)..gamma_grid.len() {
            let (small, large) = (&gamma_grid[i], &gamma_grid[j]);
            if small.gamma > 0.0
                && large.ues == FitVerdict::Consistent
                && small.ues == FitVerdict::Inconsistent
            {
                monotonicity_consistent = false;
            }
        }
    }

    let gamma_excluded = gamma <= 0.0;
    let uniform_pair = p == 1.0 && q.is_infinite();
    let premises = gain.looks_bounded && fading_best == ConditionVerdict::Holds;
    let (target_name, target_verdict) = if uniform_pair {
        ("uniform-stability", us.verdict)
    } else {
        ("exponential-stability", ues.verdict)
    };
    let mut narrative = if gamma_excluded {
        "nonpositive weight exclusion: the gain-to-decay comparison is only \
         asserted for positive weights; findings are reported without \
         implication"
            .to_string()
    } else if !premises {
        "premise conditions not met; no contradiction".to_string()
    } else {
        match target_verdict {
            FitVerdict::Consistent => format!(
                "bounded gain with fading memory matches the consistent \
                 {target_name} fit"
            ),
            FitVerdict::Inconsistent => format!(
                "tension: bounded gain with fading memory, but the \
                 {target_name} fit is inconsistent; widen the window"
            ),
            FitVerdict::Inconclusive => format!(
                "bounded gain with fading memory; the {target_name} fit is \
                 inconclusive on this window"
            ),
        }
    };
    narrative.push_str(if monotonicity_consistent {
        "; weight-grid verdicts are monotone"
    } else {
        "; weight-grid verdicts violate monotonicity"
    });

    Ok(StabilityReport {
        gamma,
        p,
        q,
        horizon: n_starts,
        probe_depth,
        gain,
        fading,
        fading_best,
        ues,
        us,
        gamma_grid,
        monotonicity_consistent,
        gamma_excluded,
        theorem_check: narrative,
    })
}
