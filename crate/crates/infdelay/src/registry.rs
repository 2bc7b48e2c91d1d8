//! Built-in example systems.
//!
//! Each entry couples a kernel constructor with closed-form structural
//! annotations (row supports, uniform tail bounds, total depth tails) and
//! an *independent* solution oracle: a direct recursion in absolute time,
//! derived from the example's defining structure rather than from the
//! general solver, so the two can be cross-checked against each other.

use nalgebra::DVector;
use serde_json::{Map, Value};
use thiserror::Error;

use crate::phase::PhaseVector;
use crate::system::KernelSystem;

/// Errors from registry lookup or parameter parsing.
#[derive(Debug, Error, PartialEq)]
pub enum RegistryError {
    /// No example of this name exists.
    #[error("unknown example '{0}'")]
    UnknownExample(String),
    /// A parameter was missing, mistyped, or out of range.
    #[error("invalid parameter for example '{name}': {message}")]
    BadParam {
        /// Example name.
        name: String,
        /// What went wrong.
        message: String,
    },
}

/// Independent solution recursion: maps `(phi, forcing, tau, n_end)` to
/// the values `x(tau), ..., x(n_end)`.
pub type OracleFn =
    Box<dyn Fn(&PhaseVector, &[DVector<f64>], u64, u64) -> Vec<DVector<f64>> + Send + Sync>;

/// One registry entry.
pub struct ExampleEntry {
    /// Stable name used by specs and the command line.
    pub name: &'static str,
    /// One-line structural description.
    pub summary: &'static str,
    /// `(key, doc)` pairs for accepted parameters.
    pub params: &'static [(&'static str, &'static str)],
    /// Human-readable expected findings at standard windows.
    pub expected: &'static [&'static str],
    constructor: fn(&Map<String, Value>) -> Result<KernelSystem, RegistryError>,
    oracle_fn: fn(&Map<String, Value>) -> Result<OracleFn, RegistryError>,
}

impl ExampleEntry {
    /// Builds the system with the given parameters.
    pub fn build(&self, params: &Map<String, Value>) -> Result<KernelSystem, RegistryError> {
        (self.constructor)(params)
    }

    /// Builds the independent solution oracle with the given parameters.
    pub fn oracle(&self, params: &Map<String, Value>) -> Result<OracleFn, RegistryError> {
        (self.oracle_fn)(params)
    }
}

/// All registered examples, in listing order.
pub fn entries() -> &'static [ExampleEntry] {
    &ENTRIES
}

/// Looks up an entry by name.
pub fn lookup(name: &str) -> Option<&'static ExampleEntry> {
    ENTRIES.iter().find(|e| e.name == name)
}

/// Builds a named example.
pub fn build(name: &str, params: &Map<String, Value>) -> Result<KernelSystem, RegistryError> {
    lookup(name)
        .ok_or_else(|| RegistryError::UnknownExample(name.to_string()))?
        .build(params)
}

/// Builds a named example's solution oracle.
pub fn oracle(name: &str, params: &Map<String, Value>) -> Result<OracleFn, RegistryError> {
    lookup(name)
        .ok_or_else(|| RegistryError::UnknownExample(name.to_string()))?
        .oracle(params)
}

// ---------------------------------------------------------------------------
// Parameter parsing
// ---------------------------------------------------------------------------

fn reject_unknown_keys(
    name: &'static str,
    params: &Map<String, Value>,
    allowed: &[&str],
) -> Result<(), RegistryError> {
    for key in params.keys() {
        if !allowed.contains(&key.as_str()) {
            return Err(RegistryError::BadParam {
                name: name.into(),
                message: format!("unknown parameter '{key}'"),
            });
        }
    }
    Ok(())
}

/// The two supported scalar coefficient sequences.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum AChoice {
    /// `a(0) = 0`, `a(n) = 1/n`.
    Harmonic,
    /// `a(n) = 2^{-n}`.
    Pow2,
}

impl AChoice {
    fn value(self, n: u64) -> f64 {
        match self {
            AChoice::Harmonic => {
                if n == 0 {
                    0.0
                } else {
                    1.0 / n as f64
                }
            }
            AChoice::Pow2 => 0.5f64.powi(n as i32),
        }
    }
}

fn a_param(
    name: &'static str,
    params: &Map<String, Value>,
    default: AChoice,
) -> Result<AChoice, RegistryError> {
    match params.get("a") {
        None => Ok(default),
        Some(Value::String(s)) => match s.as_str() {
            "harmonic" => Ok(AChoice::Harmonic),
            "pow2" => Ok(AChoice::Pow2),
            other => Err(RegistryError::BadParam {
                name: name.into(),
                message: format!("'a' must be \"harmonic\" or \"pow2\", got \"{other}\""),
            }),
        },
        Some(_) => Err(RegistryError::BadParam {
            name: name.into(),
            message: "'a' must be a string".into(),
        }),
    }
}

fn delta_param(name: &'static str, params: &Map<String, Value>) -> Result<f64, RegistryError> {
    match params.get("delta") {
        None => Ok(1.0),
        Some(Value::Number(n)) => match n.as_f64() {
            Some(d) if d.is_finite() => Ok(d),
            _ => Err(RegistryError::BadParam {
                name: name.into(),
                message: "'delta' must be a finite number".into(),
            }),
        },
        Some(_) => Err(RegistryError::BadParam {
            name: name.into(),
            message: "'delta' must be a number".into(),
        }),
    }
}

// ---------------------------------------------------------------------------
// Shared oracle plumbing (all examples are scalar)
// ---------------------------------------------------------------------------

fn head(phi: &PhaseVector) -> f64 {
    phi.coord_or_zero(0)[0]
}

/// The state at absolute time `t` for a run started at `tau`, reading
/// computed values forward of `tau` and history coordinates behind it.
fn state_at(vals: &[f64], phi: &PhaseVector, tau: u64, t: i64) -> f64 {
    if t >= tau as i64 {
        vals[(t - tau as i64) as usize]
    } else {
        phi.coord_or_zero((tau as i64 - t) as u64)[0]
    }
}

fn scalar_traj(vals: Vec<f64>) -> Vec<DVector<f64>> {
    vals.into_iter().map(|v| DVector::from_element(1, v)).collect()
}

fn forcing_at(f: &[DVector<f64>], i: u64) -> f64 {
    f.get(i as usize).map_or(0.0, |v| v[0])
}

/// Runs a scalar absolute-time recursion `step(n, vals, phi) -> next
/// homogeneous value` and adds the forcing.
fn run_scalar_oracle<F>(
    phi: &PhaseVector,
    f: &[DVector<f64>],
    tau: u64,
    n_end: u64,
    step: F,
) -> Vec<DVector<f64>>
where
    F: Fn(u64, &[f64], &PhaseVector) -> f64,
{
    let len = (n_end - tau + 1) as usize;
    let mut vals = vec![0.0f64; len];
    vals[0] = head(phi);
    for i in 0..(n_end - tau) {
        let n = tau + i;
        let hom = step(n, &vals, phi);
        vals[(i + 1) as usize] = hom + forcing_at(f, i);
    }
    scalar_traj(vals)
}

// ---------------------------------------------------------------------------
// ex6.1 — single absolute-time tap
// ---------------------------------------------------------------------------

fn build_ex61(params: &Map<String, Value>) -> Result<KernelSystem, RegistryError> {
    reject_unknown_keys("ex6.1", params, &["a"])?;
    let a = a_param("ex6.1", params, AChoice::Harmonic)?;
    let sys = KernelSystem::from_fn(1, move |n, k, buf| {
        if n >= 1 && k == n - 1 {
            buf[(0, 0)] = a.value(n);
        }
    })
    .with_row_support(|n| if n >= 1 { vec![n - 1] } else { Vec::new() })
    .with_uniform_tail(move |gamma, l| {
        // sup over n >= l + 1 of e^{gamma (n-1)} a(n).
        let m = l + 1;
        match a {
            AChoice::Harmonic => {
                if gamma > 0.0 {
                    None
                } else {
                    Some((gamma * l as f64).exp() / m as f64)
                }
            }
            AChoice::Pow2 => {
                let r = gamma.exp() / 2.0;
                if r < 1.0 {
                    Some((gamma * l as f64).exp() * 0.5f64.powi(m as i32))
                } else if r == 1.0 {
                    Some(0.5)
                } else {
                    None
                }
            }
        }
    })
    .with_depth_tail_total(move |l| match a {
        AChoice::Harmonic => Some(f64::INFINITY),
        AChoice::Pow2 => Some(0.5f64.powi(l as i32)),
    });
    Ok(sys)
}

fn oracle_ex61(params: &Map<String, Value>) -> Result<OracleFn, RegistryError> {
    let a = a_param("ex6.1", params, AChoice::Harmonic)?;
    Ok(Box::new(move |phi, f, tau, n_end| {
        run_scalar_oracle(phi, f, tau, n_end, move |n, vals, phi| {
            if n == 0 {
                0.0
            } else {
                // Everything is driven by the state at absolute time 1.
                let v1 = if tau > 1 {
                    phi.coord_or_zero(tau - 1)[0]
                } else if tau == 1 {
                    vals[0]
                } else {
                    vals[1]
                };
                a.value(n) * v1
            }
        })
    }))
}

// ---------------------------------------------------------------------------
// ex6.2 — sparse spikes at quadratically spaced times
// ---------------------------------------------------------------------------

/// Spike times `n_k = (k^2 + 5k) / 2` (so `n_k = n_{k-1} + k + 2`); the
/// kernel has `L(n_k, k) = 1` for `k >= 1`.
fn spike_depth(n: u64) -> Option<u64> {
    if n == 0 {
        return None;
    }
    let k = (((25.0 + 8.0 * n as f64).sqrt() - 5.0) / 2.0).round() as u64;
    if k >= 1 && k * k + 5 * k == 2 * n {
        Some(k)
    } else {
        None
    }
}

fn build_ex62(params: &Map<String, Value>) -> Result<KernelSystem, RegistryError> {
    reject_unknown_keys("ex6.2", params, &[])?;
    let sys = KernelSystem::from_fn(1, |n, k, buf| {
        if spike_depth(n) == Some(k) {
            buf[(0, 0)] = 1.0;
        }
    })
    .with_row_support(|n| spike_depth(n).map_or_else(Vec::new, |k| vec![k]))
    .with_uniform_tail(|gamma, l| {
        // Spikes occur at every depth k >= 1, each of norm one.
        if gamma > 0.0 {
            None
        } else if gamma == 0.0 {
            Some(1.0)
        } else {
            Some((gamma * l.max(1) as f64).exp())
        }
    })
    .with_depth_tail_total(|_l| Some(f64::INFINITY));
    Ok(sys)
}

fn oracle_ex62(params: &Map<String, Value>) -> Result<OracleFn, RegistryError> {
    reject_unknown_keys("ex6.2", params, &[])?;
    Ok(Box::new(move |phi, f, tau, n_end| {
        run_scalar_oracle(phi, f, tau, n_end, |n, vals, phi| {
            spike_depth(n).map_or(0.0, |k| state_at(vals, phi, tau, n as i64 - k as i64))
        })
    }))
}

// ---------------------------------------------------------------------------
// ex6.3 — contracting head with a unit echo of the state at time zero
// ---------------------------------------------------------------------------

fn ex63_c(n: u64) -> f64 {
    if n == 0 {
        1.5
    } else {
        0.5
    }
}

fn build_ex63(params: &Map<String, Value>) -> Result<KernelSystem, RegistryError> {
    reject_unknown_keys("ex6.3", params, &[])?;
    let sys = KernelSystem::from_fn(1, |n, k, buf| {
        if k == 0 {
            buf[(0, 0)] = ex63_c(n);
        } else if n >= 1 && k == n {
            buf[(0, 0)] = 1.0;
        }
    })
    .with_row_support(|n| if n == 0 { vec![0] } else { vec![0, n] })
    .with_uniform_tail(|gamma, l| {
        if gamma > 0.0 {
            return None;
        }
        let deep = (gamma * l.max(1) as f64).exp();
        if l == 0 {
            Some(1.5f64.max(0.5 + gamma.exp()).max(deep + 0.5))
        } else {
            Some(deep)
        }
    })
    .with_depth_tail_total(|_l| Some(f64::INFINITY));
    Ok(sys)
}

fn oracle_ex63(params: &Map<String, Value>) -> Result<OracleFn, RegistryError> {
    reject_unknown_keys("ex6.3", params, &[])?;
    Ok(Box::new(move |phi, f, tau, n_end| {
        run_scalar_oracle(phi, f, tau, n_end, |n, vals, phi| {
            let x0 = state_at(vals, phi, tau, 0);
            let cur = vals[(n - tau) as usize];
            ex63_c(n) * cur + if n >= 1 { x0 } else { 0.0 }
        })
    }))
}

// ---------------------------------------------------------------------------
// ex6.4 — unit head with a unit echo of the state at time zero
// ---------------------------------------------------------------------------

fn build_ex64(params: &Map<String, Value>) -> Result<KernelSystem, RegistryError> {
    reject_unknown_keys("ex6.4", params, &[])?;
    let sys = KernelSystem::from_fn(1, |n, k, buf| {
        if k == 0 {
            buf[(0, 0)] = if n == 0 { 2.0 } else { 1.0 };
        } else if n >= 1 && k == n {
            buf[(0, 0)] = 1.0;
        }
    })
    .with_row_support(|n| if n == 0 { vec![0] } else { vec![0, n] })
    .with_uniform_tail(|gamma, l| {
        if gamma > 0.0 {
            return None;
        }
        let deep = (gamma * l.max(1) as f64).exp();
        if l == 0 {
            Some(2.0f64.max(1.0 + gamma.exp()).max(1.0 + deep))
        } else {
            Some(deep)
        }
    })
    .with_depth_tail_total(|_l| Some(f64::INFINITY));
    Ok(sys)
}

fn oracle_ex64(params: &Map<String, Value>) -> Result<OracleFn, RegistryError> {
    reject_unknown_keys("ex6.4", params, &[])?;
    Ok(Box::new(move |phi, f, tau, n_end| {
        run_scalar_oracle(phi, f, tau, n_end, |n, vals, phi| {
            let x0 = state_at(vals, phi, tau, 0);
            let cur = vals[(n - tau) as usize];
            if n == 0 {
                2.0 * cur
            } else {
                cur + x0
            }
        })
    }))
}

// ---------------------------------------------------------------------------
// ex6.4p — unit head with a summable or non-summable echo sequence
// ---------------------------------------------------------------------------

fn build_ex64p(params: &Map<String, Value>) -> Result<KernelSystem, RegistryError> {
    reject_unknown_keys("ex6.4p", params, &["a"])?;
    let a = a_param("ex6.4p", params, AChoice::Pow2)?;
    let sys = KernelSystem::from_fn(1, move |n, k, buf| {
        if k == 0 {
            buf[(0, 0)] = 1.0 + if n == 0 { a.value(0) } else { 0.0 };
        } else if n >= 1 && k == n {
            buf[(0, 0)] = a.value(n);
        }
    })
    .with_row_support(|n| if n == 0 { vec![0] } else { vec![0, n] })
    .with_uniform_tail(move |gamma, l| {
        let m = l.max(1);
        let deep = match a {
            AChoice::Harmonic => {
                if gamma > 0.0 {
                    return None;
                }
                (gamma * m as f64).exp() / m as f64
            }
            AChoice::Pow2 => {
                let r = gamma.exp() / 2.0;
                if r < 1.0 {
                    r.powi(m as i32)
                } else if r == 1.0 {
                    1.0
                } else {
                    return None;
                }
            }
        };
        if l == 0 {
            Some((1.0 + a.value(0)).max(1.0 + deep))
        } else {
            Some(deep)
        }
    })
    .with_depth_tail_total(move |l| match a {
        AChoice::Harmonic => Some(f64::INFINITY),
        AChoice::Pow2 => {
            if l == 0 {
                Some(f64::INFINITY)
            } else {
                Some(0.5f64.powi(l as i32 - 1))
            }
        }
    });
    Ok(sys)
}

fn oracle_ex64p(params: &Map<String, Value>) -> Result<OracleFn, RegistryError> {
    let a = a_param("ex6.4p", params, AChoice::Pow2)?;
    Ok(Box::new(move |phi, f, tau, n_end| {
        run_scalar_oracle(phi, f, tau, n_end, move |n, vals, phi| {
            let x0 = state_at(vals, phi, tau, 0);
            let cur = vals[(n - tau) as usize];
            cur + a.value(n) * x0
        })
    }))
}

// ---------------------------------------------------------------------------
// ex6.5 — deepest-coordinate read with tunable exponential damping
// ---------------------------------------------------------------------------

fn build_ex65(params: &Map<String, Value>) -> Result<KernelSystem, RegistryError> {
    reject_unknown_keys("ex6.5", params, &["delta"])?;
    let delta = delta_param("ex6.5", params)?;
    let sys = KernelSystem::from_fn(1, move |n, k, buf| {
        if n >= 1 && k == n {
            buf[(0, 0)] = n as f64 * (-(n as f64) * delta).exp();
        }
    })
    .with_row_support(|n| if n >= 1 { vec![n] } else { Vec::new() })
    .with_uniform_tail(move |gamma, l| {
        // sup over n >= max(l, 1) of n e^{-n (delta - gamma)}.
        let beta = delta - gamma;
        if beta <= 0.0 {
            return None;
        }
        let m = l.max(1);
        let peak = (1.0 / beta).floor().max(m as f64) as u64;
        let candidates = [m, peak, peak + 1];
        let val = candidates
            .iter()
            .map(|&n| n as f64 * (-(n as f64) * beta).exp())
            .fold(0.0f64, f64::max);
        Some(val)
    })
    .with_depth_tail_total(move |l| {
        if delta <= 0.0 {
            return Some(f64::INFINITY);
        }
        // sum over n >= max(l, 1) of n r^n with r = e^{-delta}.
        let m = l.max(1) as f64;
        let r = (-delta).exp();
        Some(r.powf(m) * (m - (m - 1.0) * r) / ((1.0 - r) * (1.0 - r)))
    });
    Ok(sys)
}

fn oracle_ex65(params: &Map<String, Value>) -> Result<OracleFn, RegistryError> {
    let delta = delta_param("ex6.5", params)?;
    Ok(Box::new(move |phi, f, tau, n_end| {
        run_scalar_oracle(phi, f, tau, n_end, move |n, vals, phi| {
            let x0 = state_at(vals, phi, tau, 0);
            n as f64 * (-(n as f64) * delta).exp() * x0
        })
    }))
}

// ---------------------------------------------------------------------------
// sec7 — full-history read with polynomial depth decay
// ---------------------------------------------------------------------------

fn sec7_weight(k: u64) -> f64 {
    1.0 / (((k + 1) * (k + 2)) as f64)
}

fn build_sec7(params: &Map<String, Value>) -> Result<KernelSystem, RegistryError> {
    reject_unknown_keys("sec7", params, &[])?;
    let sys = KernelSystem::from_fn(1, |n, k, buf| {
        buf[(0, 0)] = (-(n as f64)).exp() * sec7_weight(k);
    })
    .with_uniform_tail(|gamma, l| {
        // sup_n e^{-n} sum_{k >= l} e^{gamma k} / ((k+1)(k+2)); the sup
        // sits at n = 0 and for gamma <= 0 the depth sum is bounded by
        // e^{gamma l} / (l + 1) (exactly 1 / (l + 1) at gamma = 0).
        if gamma > 0.0 {
            None
        } else {
            Some((gamma * l as f64).exp() / (l + 1) as f64)
        }
    })
    .with_depth_tail_total(|l| {
        Some(1.0 / ((1.0 - (-1.0f64).exp()) * (l + 1) as f64))
    });
    Ok(sys)
}

fn oracle_sec7(params: &Map<String, Value>) -> Result<OracleFn, RegistryError> {
    reject_unknown_keys("sec7", params, &[])?;
    Ok(Box::new(move |phi, f, tau, n_end| {
        run_scalar_oracle(phi, f, tau, n_end, |n, vals, phi| {
            let i = n - tau;
            let mut s = 0.0;
            // Depths reaching computed values (absolute times tau..=n).
            for k in 0..=i {
                s += vals[(i - k) as usize] * sec7_weight(k);
            }
            // Depths reaching strictly pre-start history.
            for (j, v) in phi.support() {
                if j >= 1 {
                    s += v[0] * sec7_weight(i + j);
                }
            }
            (-(n as f64)).exp() * s
        })
    }))
}

// ---------------------------------------------------------------------------
// The table
// ---------------------------------------------------------------------------

static ENTRIES: [ExampleEntry; 7] = [
    ExampleEntry {
        name: "ex6.1",
        summary: "scalar system whose every step reads only the state at \
                  absolute time 1, scaled by a(n)",
        params: &[("a", "coefficient sequence: \"harmonic\" (1/n, default) or \
                        \"pow2\" (2^-n)")],
        expected: &[
            "uniform (infinity,infinity) gain stays bounded",
            "harmonic a: the (1,1) gain over [0,N] equals 1 + H_{N-1} and \
             grows without bound",
            "harmonic a: the (1,2) gain stays below 1 + pi/sqrt(6)",
        ],
        constructor: build_ex61,
        oracle_fn: oracle_ex61,
    },
    ExampleEntry {
        name: "ex6.2",
        summary: "unit spikes at quadratically spaced times n_k, each \
                  reading depth k; memory never fades",
        params: &[],
        expected: &[
            "(p,q) gains look bounded for p <= q",
            "memory fading fails empirically at every positive weight",
            "depth tails are not summable: neither sufficiency route \
             certifies uniform stability",
        ],
        constructor: build_ex62,
        oracle_fn: oracle_ex62,
    },
    ExampleEntry {
        name: "ex6.3",
        summary: "contracting head (1/2 after the first step) plus a unit \
                  echo of the state at time zero",
        params: &[],
        expected: &[
            "memory fading holds at every weight gamma <= 0",
            "uniform-stability fit at weight 0 is consistent (envelope \
             near 2)",
            "exponential-decay fits at negative weights are inconsistent",
        ],
        constructor: build_ex63,
        oracle_fn: oracle_ex63,
    },
    ExampleEntry {
        name: "ex6.4",
        summary: "unit head plus a unit echo of the state at time zero; \
                  solutions grow linearly",
        params: &[],
        expected: &[
            "decay profile at weight 0 is exactly rho(s) = 1 + s",
            "uniform-stability fit is inconsistent",
        ],
        constructor: build_ex64,
        oracle_fn: oracle_ex64,
    },
    ExampleEntry {
        name: "ex6.4p",
        summary: "unit head plus an echo of the state at time zero scaled \
                  by a summable (pow2) or non-summable (harmonic) sequence",
        params: &[("a", "echo sequence: \"pow2\" (2^-n, default) or \
                        \"harmonic\" (1/n)")],
        expected: &[
            "pow2: the summable-depth route certifies uniform stability and \
             homogeneous solutions stay within 3 |phi|",
            "harmonic: no route certifies and rho(s) grows like log s",
        ],
        constructor: build_ex64p,
        oracle_fn: oracle_ex64p,
    },
    ExampleEntry {
        name: "ex6.5",
        summary: "reads only the state at absolute time zero, scaled by \
                  n e^{-n delta}",
        params: &[("delta", "damping rate (default 1.0)")],
        expected: &[
            "exponential-decay fits are consistent at weights below delta \
             (rate near delta - gamma)",
            "at weight delta the envelope constant doubles with the window: \
             uniform fit inconsistent",
        ],
        constructor: build_ex65,
        oracle_fn: oracle_ex65,
    },
    ExampleEntry {
        name: "sec7",
        summary: "reads the entire history with weights e^{-n}/((k+1)(k+2)); \
                  no finite delay order",
        params: &[],
        expected: &[
            "the summable-depth route certifies uniform stability",
            "head starts obey |x(tau + k)| <= e^{-(tau + k - 1)} |phi|",
        ],
        constructor: build_sec7,
        oracle_fn: oracle_sec7,
    },
];

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::solve;
    use nalgebra::dvector;

    fn no_params() -> Map<String, Value> {
        Map::new()
    }

    #[test]
    fn spike_times_match_recurrence() {
        // n_k = n_{k-1} + k + 2 from n_0 = 0.
        let mut n = 0u64;
        for k in 1..=30u64 {
            n += k + 2;
            assert_eq!(spike_depth(n), Some(k), "n_k for k = {k}");
        }
        assert_eq!(spike_depth(0), None);
        assert_eq!(spike_depth(1), None);
        assert_eq!(spike_depth(4), None);
    }

    #[test]
    fn all_oracles_match_solver_on_random_inputs() {
        let mut rng = crate::rng::seeded(0x5eed_0001);
        for entry in entries() {
            let sys = entry.build(&no_params()).unwrap();
            let oracle = entry.oracle(&no_params()).unwrap();
            for _ in 0..50 {
                let tau = rand::Rng::gen_range(&mut rng, 0..12u64);
                let n_end = tau + rand::Rng::gen_range(&mut rng, 1..40u64);
                let phi = crate::rng::random_phase(&mut rng, 1, 10);
                let f = crate::rng::random_forcing(&mut rng, 1, (n_end - tau) as usize);
                let direct = solve(&sys, tau, &phi, &f, n_end).unwrap();
                let expected = oracle(&phi, &f, tau, n_end);
                assert_eq!(expected.len(), direct.values.len());
                for (n, (got, want)) in
                    direct.values.iter().zip(expected.iter()).enumerate()
                {
                    assert!(
                        (got[0] - want[0]).abs() <= 1e-10 * want[0].abs().max(1.0),
                        "{}: mismatch at step {n}: solver {} vs oracle {}",
                        entry.name,
                        got[0],
                        want[0],
                    );
                }
            }
        }
    }

    #[test]
    fn sec7_known_first_values() {
        let sys = build(&"sec7".to_string(), &no_params()).unwrap();
        let phi = PhaseVector::embed(dvector![1.0], 0);
        let x = solve(&sys, 0, &phi, &[], 2).unwrap();
        assert!((x.values[1][0] - 0.5).abs() < 1e-15);
        let expected2 = 5.0 / (12.0 * 1.0f64.exp());
        assert!((x.values[2][0] - expected2).abs() < 1e-15);
    }

    #[test]
    fn ex65_delta_param_shapes_kernel() {
        let mut params = Map::new();
        params.insert("delta".into(), serde_json::json!(0.5));
        let sys = build("ex6.5", &params).unwrap();
        let m = sys.eval(3, 3);
        assert!((m[(0, 0)] - 3.0 * (-1.5f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn unknown_example_and_bad_params_are_rejected() {
        assert!(matches!(
            build("nope", &no_params()),
            Err(RegistryError::UnknownExample(_))
        ));
        let mut params = Map::new();
        params.insert("a".into(), serde_json::json!(3));
        assert!(matches!(
            build("ex6.1", &params),
            Err(RegistryError::BadParam { .. })
        ));
        let mut params = Map::new();
        params.insert("bogus".into(), serde_json::json!(1));
        assert!(matches!(
            build("ex6.3", &params),
            Err(RegistryError::BadParam { .. })
        ));
    }
}
