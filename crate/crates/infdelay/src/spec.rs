//! JSON system descriptions.
//!
//! A description names a state dimension, a kernel source (an explicit
//! finite table, a registered builtin, or a time-invariant bounded-delay
//! coefficient list), and an optional geometric tail certificate. Loading
//! validates shapes eagerly so malformed input fails with a message
//! instead of a panic mid-run.

use std::collections::HashMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

use crate::registry::{self, RegistryError};
use crate::state::mat_norm;
use crate::system::{KernelSystem, TailCertificate};

/// Errors from parsing or building a system description.
#[derive(Debug, Error)]
pub enum SpecError {
    /// The document is not valid JSON for the expected shape.
    #[error("malformed system description: {0}")]
    Json(#[from] serde_json::Error),
    /// A builtin reference failed.
    #[error(transparent)]
    Registry(#[from] RegistryError),
    /// The document parsed but is inconsistent.
    #[error("invalid system description: {0}")]
    Invalid(String),
}

/// One explicit kernel entry `L(n, k) = matrix`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct TableEntry {
    /// Time index.
    pub n: u64,
    /// Depth index.
    pub k: u64,
    /// Row-major `dimension x dimension` matrix.
    pub matrix: Vec<Vec<f64>>,
}

/// A geometric tail declaration `||L(n, k)|| <= c rho^k` for `k >= k0`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct CertSpec {
    /// Leading constant (must be `>= 0`).
    pub c: f64,
    /// Ratio (must lie in `[0, 1)`).
    pub rho: f64,
    /// Depth from which the bound applies.
    #[serde(default)]
    pub k0: u64,
}

/// Where the kernel comes from.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum KernelSource {
    /// Explicit finite list of nonzero entries.
    Table {
        /// The nonzero kernel entries.
        entries: Vec<TableEntry>,
    },
    /// A registered example system.
    Builtin {
        /// Registry name.
        name: String,
        /// Example parameters.
        #[serde(default)]
        params: Map<String, Value>,
    },
    /// Time-invariant finite-delay coefficients `A_0, ..., A_{order-1}`.
    BoundedDelay {
        /// Number of coefficients.
        order: u64,
        /// Row-major matrices, one per delay depth.
        coeffs: Vec<Vec<Vec<f64>>>,
    },
}

/// A parsed system description document.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SystemSpecDoc {
    /// State dimension.
    pub dimension: usize,
    /// Kernel source.
    pub kernel: KernelSource,
    /// Optional geometric tail declaration.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tail_certificate: Option<CertSpec>,
}

/// Parses a description document from JSON text.
pub fn parse(text: &str) -> Result<SystemSpecDoc, SpecError> {
    Ok(serde_json::from_str(text)?)
}

fn parse_matrix(dim: usize, rows: &[Vec<f64>], what: &str) -> Result<DMatrix<f64>, SpecError> {
    if rows.len() != dim || rows.iter().any(|r| r.len() != dim) {
        return Err(SpecError::Invalid(format!(
            "{what}: expected a {dim}x{dim} matrix"
        )));
    }
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    if flat.iter().any(|x| !x.is_finite()) {
        return Err(SpecError::Invalid(format!("{what}: non-finite entry")));
    }
    Ok(DMatrix::from_row_slice(dim, dim, &flat))
}

fn build_table(dim: usize, entries: &[TableEntry]) -> Result<KernelSystem, SpecError> {
    let mut table: HashMap<(u64, u64), DMatrix<f64>> = HashMap::new();
    let mut rows: HashMap<u64, Vec<u64>> = HashMap::new();
    let mut norms: Vec<(u64, u64, f64)> = Vec::new();
    let mut order = 0u64;
    for e in entries {
        let m = parse_matrix(dim, &e.matrix, &format!("entry (n={}, k={})", e.n, e.k))?;
        if table.insert((e.n, e.k), m.clone()).is_some() {
            return Err(SpecError::Invalid(format!(
                "duplicate kernel entry at (n={}, k={})",
                e.n, e.k
            )));
        }
        rows.entry(e.n).or_default().push(e.k);
        norms.push((e.n, e.k, mat_norm(&m)));
        order = order.max(e.k + 1);
    }
    for ks in rows.values_mut() {
        ks.sort_unstable();
    }
    let tail_norms = norms.clone();
    let total_norms = norms;
    Ok(KernelSystem::from_fn(dim, move |n, k, buf| {
        if let Some(m) = table.get(&(n, k)) {
            buf.copy_from(m);
        }
    })
    .with_order(order)
    .with_row_support(move |n| rows.get(&n).cloned().unwrap_or_default())
    .with_uniform_tail(move |gamma, l| {
        // Exact: the table is finite, so take the max over times of the
        // weighted depth tail at each time.
        let mut per_time: HashMap<u64, f64> = HashMap::new();
        for &(n, k, norm) in tail_norms.iter() {
            if k >= l {
                *per_time.entry(n).or_insert(0.0) += (gamma * k as f64).exp() * norm;
            }
        }
        Some(per_time.values().fold(0.0f64, |a, &b| a.max(b)))
    })
    .with_depth_tail_total(move |l| {
        Some(
            total_norms
                .iter()
                .filter(|&&(_, k, _)| k >= l)
                .map(|&(_, _, norm)| norm)
                .sum(),
        )
    }))
}

fn build_bounded_delay(
    dim: usize,
    order: u64,
    coeffs: &[Vec<Vec<f64>>],
) -> Result<KernelSystem, SpecError> {
    if coeffs.len() as u64 != order {
        return Err(SpecError::Invalid(format!(
            "bounded_delay declares order {order} but lists {} coefficients",
            coeffs.len()
        )));
    }
    let matrices = coeffs
        .iter()
        .enumerate()
        .map(|(k, m)| parse_matrix(dim, m, &format!("coefficient A_{k}")))
        .collect::<Result<Vec<_>, _>>()?;
    KernelSystem::from_bounded_delay(matrices)
        .map_err(|e| SpecError::Invalid(e.to_string()))
}

/// Builds the runnable system a parsed document describes.
pub fn build(doc: &SystemSpecDoc) -> Result<KernelSystem, SpecError> {
    if doc.dimension == 0 {
        return Err(SpecError::Invalid("dimension must be at least 1".into()));
    }
    let sys = match &doc.kernel {
        KernelSource::Table { entries } => build_table(doc.dimension, entries)?,
        KernelSource::Builtin { name, params } => {
            let sys = registry::build(name, params)?;
            if sys.dim() != doc.dimension {
                return Err(SpecError::Invalid(format!(
                    "builtin '{}' has dimension {}, document declares {}",
                    name,
                    sys.dim(),
                    doc.dimension
                )));
            }
            sys
        }
        KernelSource::BoundedDelay { order, coeffs } => {
            build_bounded_delay(doc.dimension, *order, coeffs)?
        }
    };
    match doc.tail_certificate {
        None => Ok(sys),
        Some(cert) => {
            if !(cert.c >= 0.0) || !(0.0..1.0).contains(&cert.rho) {
                return Err(SpecError::Invalid(format!(
                    "tail certificate needs c >= 0 and rho in [0, 1), got c = {}, rho = {}",
                    cert.c, cert.rho
                )));
            }
            Ok(sys.with_certificate(TailCertificate {
                c: cert.c,
                rho: cert.rho,
                k0: cert.k0,
            }))
        }
    }
}

/// Parses and builds in one step.
pub fn load(text: &str) -> Result<KernelSystem, SpecError> {
    build(&parse(text)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table_doc() -> String {
        serde_json::json!({
            "dimension": 2,
            "kernel": {
                "type": "table",
                "entries": [
                    {"n": 0, "k": 0, "matrix": [[0.5, 0.1], [0.0, 0.25]]},
                    {"n": 1, "k": 2, "matrix": [[0.0, 1.0], [-0.5, 0.0]]}
                ]
            }
        })
        .to_string()
    }

    #[test]
    fn table_builds_with_exact_structure() {
        let sys = load(&table_doc()).unwrap();
        assert_eq!(sys.dim(), 2);
        assert_eq!(sys.order(), Some(3));
        assert_eq!(sys.eval(0, 0)[(0, 1)], 0.1);
        assert_eq!(sys.eval(1, 2)[(1, 0)], -0.5);
        assert!(sys.eval(1, 1).iter().all(|&x| x == 0.0));
        // Exact tail oracles: entry (1, 2) has norm 1.0, entry (0, 0) 0.6.
        assert_eq!(sys.uniform_tail_bound(0.0, 1), Some(1.0));
        assert_eq!(sys.depth_tail_total(0), Some(1.6));
        assert_eq!(sys.depth_tail_total(1), Some(1.0));
        assert_eq!(sys.depth_tail_total(3), Some(0.0));
    }

    #[test]
    fn duplicate_table_entries_are_rejected() {
        let text = serde_json::json!({
            "dimension": 1,
            "kernel": {"type": "table", "entries": [
                {"n": 3, "k": 1, "matrix": [[1.0]]},
                {"n": 3, "k": 1, "matrix": [[2.0]]}
            ]}
        })
        .to_string();
        assert!(matches!(load(&text), Err(SpecError::Invalid(_))));
    }

    #[test]
    fn builtin_with_params_builds() {
        let text = serde_json::json!({
            "dimension": 1,
            "kernel": {"type": "builtin", "name": "ex6.5", "params": {"delta": 2.0}}
        })
        .to_string();
        let sys = load(&text).unwrap();
        assert!((sys.eval(2, 2)[(0, 0)] - 2.0 * (-4.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn builtin_dimension_mismatch_is_rejected() {
        let text = serde_json::json!({
            "dimension": 2,
            "kernel": {"type": "builtin", "name": "ex6.3"}
        })
        .to_string();
        assert!(matches!(load(&text), Err(SpecError::Invalid(_))));
    }

    #[test]
    fn unknown_builtin_is_a_registry_error() {
        let text = serde_json::json!({
            "dimension": 1,
            "kernel": {"type": "builtin", "name": "missing"}
        })
        .to_string();
        assert!(matches!(load(&text), Err(SpecError::Registry(_))));
    }

    #[test]
    fn bounded_delay_order_must_match() {
        let text = serde_json::json!({
            "dimension": 1,
            "kernel": {"type": "bounded_delay", "order": 2, "coeffs": [[[0.5]]]}
        })
        .to_string();
        assert!(matches!(load(&text), Err(SpecError::Invalid(_))));
    }

    #[test]
    fn bad_certificate_is_rejected() {
        let text = serde_json::json!({
            "dimension": 1,
            "kernel": {"type": "bounded_delay", "order": 1, "coeffs": [[[0.5]]]},
            "tail_certificate": {"c": 1.0, "rho": 1.0}
        })
        .to_string();
        assert!(matches!(load(&text), Err(SpecError::Invalid(_))));
    }

    #[test]
    fn malformed_json_is_a_parse_error() {
        assert!(matches!(parse("{"), Err(SpecError::Json(_))));
        assert!(matches!(
            parse(r#"{"dimension": 1, "kernel": {"type": "wat"}}"#),
            Err(SpecError::Json(_))
        ));
    }

    #[test]
    fn documents_round_trip_through_json() {
        let doc = parse(&table_doc()).unwrap();
        let json = crate::report::to_json(&doc);
        let doc2 = parse(&json).unwrap();
        assert_eq!(doc, doc2);
        let a = build(&doc).unwrap();
        let b = build(&doc2).unwrap();
        for n in 0..4u64 {
            for k in 0..4u64 {
                assert_eq!(a.eval(n, k), b.eval(n, k));
            }
        }
    }
}
