//! Deterministic report output.
//!
//! All numeric output funnels through one fixed-precision scientific
//! rendering so that identical inputs produce byte-identical reports:
//! finite values as `d.dddddddddddddddde[-]X`, non-finite values as the
//! strings `"infinity"`, `"-infinity"`, `"nan"` (JSON has no literals
//! for them).

use std::io;

use serde::{Serialize, Serializer};

use crate::analysis::DecayProfile;
use crate::phase::PhaseVector;
use crate::solver::Trajectory;

/// Renders one value in the report's fixed scientific format.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "nan".into()
    } else if x > 0.0 {
        "infinity".into()
    } else {
        "-infinity".into()
    }
}

/// Serializes an `f64` field, mapping non-finite values to strings
/// instead of JSON `null`.
pub fn ser_f64<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
    if x.is_finite() {
        s.serialize_f64(*x)
    } else {
        s.serialize_str(&fmt_f64(*x))
    }
}

/// Serializes an optional `f64` field: absent stays `null`, non-finite
/// becomes a string, finite stays a number.
pub fn ser_extended<S: Serializer>(x: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
    match x {
        None => s.serialize_none(),
        Some(v) => ser_f64(v, s),
    }
}

/// Serializes a `Vec<f64>` field element-wise through [`ser_f64`], so a
/// curve that overflowed keeps explicit `"infinity"` markers.
pub fn ser_f64_vec<S: Serializer>(xs: &[f64], s: S) -> Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    struct Elem(f64);
    impl Serialize for Elem {
        fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
            ser_f64(&self.0, s)
        }
    }
    let mut seq = s.serialize_seq(Some(xs.len()))?;
    for &x in xs {
        seq.serialize_element(&Elem(x))?;
    }
    seq.end()
}

/// JSON formatter writing every float in fixed 17-significant-digit
/// scientific notation (the serializer itself routes non-finite floats
/// elsewhere before this is called).
struct SciFormatter;

impl serde_json::ser::Formatter for SciFormatter {
    fn write_f64<W>(&mut self, writer: &mut W, value: f64) -> io::Result<()>
    where
        W: ?Sized + io::Write,
    {
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W>(&mut self, writer: &mut W, value: f32) -> io::Result<()>
    where
        W: ?Sized + io::Write,
    {
        write!(writer, "{value:.8e}")
    }
}

/// Serializes any report value to deterministic JSON (stable field
/// order, fixed float rendering, no whitespace).
pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, SciFormatter);
    value
        .serialize(&mut ser)
        .expect("report types serialize infallibly");
    String::from_utf8(out).expect("serialized JSON is UTF-8")
}

/// CSV of a computed trajectory: header `n,x_1,...,x_d`, one row per
/// absolute time from the start onward.
pub fn trajectory_csv(traj: &Trajectory) -> String {
    let dim = traj.values.first().map_or(0, |v| v.len());
    let mut out = String::from("n");
    for i in 1..=dim {
        out.push_str(&format!(",x_{i}"));
    }
    out.push('\n');
    for (i, v) in traj.values.iter().enumerate() {
        out.push_str(&format!("{}", traj.start + i as u64));
        for c in v.iter() {
            out.push(',');
            out.push_str(&fmt_f64(*c));
        }
        out.push('\n');
    }
    out
}

/// CSV of a decay profile: header `s,rho,rho_head`, one row per lag.
pub fn profile_csv(profile: &DecayProfile) -> String {
    let mut out = String::from("s,rho,rho_head\n");
    for (i, &s) in profile.lags.iter().enumerate() {
        out.push_str(&format!(
            "{},{},{}\n",
            s,
            fmt_f64(profile.rho[i]),
            fmt_f64(profile.rho_head[i])
        ));
    }
    out
}

/// CSV of a phase vector's support: header `depth,coord,value` with
/// 1-based coordinate indices.
pub fn phase_csv(phi: &PhaseVector) -> String {
    let mut out = String::from("depth,coord,value\n");
    for (depth, v) in phi.support() {
        for (i, c) in v.iter().enumerate() {
            if *c != 0.0 {
                out.push_str(&format!("{},{},{}\n", depth, i + 1, fmt_f64(*c)));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::NormInterval;
    use nalgebra::dvector;

    #[test]
    fn fixed_float_rendering() {
        assert_eq!(fmt_f64(0.5), "5.0000000000000000e-1");
        assert_eq!(fmt_f64(1.0), "1.0000000000000000e0");
        assert_eq!(fmt_f64(f64::INFINITY), "infinity");
        assert_eq!(fmt_f64(f64::NEG_INFINITY), "-infinity");
        assert_eq!(fmt_f64(f64::NAN), "nan");
        let x = 1.0 / 3.0;
        let parsed: f64 = fmt_f64(x).parse().unwrap();
        assert_eq!(parsed.to_bits(), x.to_bits());
    }

    #[test]
    fn json_floats_use_scientific_notation_and_round_trip() {
        #[derive(Serialize)]
        struct Row {
            a: f64,
            b: Vec<f64>,
        }
        let row = Row { a: 0.1 + 0.2, b: vec![1.0, -2.5e-8] };
        let json = to_json(&row);
        assert!(json.contains("e-1"), "{json}");
        let back: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(back["a"].as_f64().unwrap().to_bits(), (0.1f64 + 0.2).to_bits());
        assert_eq!(to_json(&row), json, "repeated serialization is byte-identical");
    }

    #[test]
    fn infinite_norm_upper_bound_serializes_as_string() {
        let interval = NormInterval { lower: 2.0, upper: f64::INFINITY };
        let json = to_json(&interval);
        assert!(json.contains("\"infinity\""), "{json}");
        let finite = NormInterval { lower: 2.0, upper: 3.0 };
        assert!(to_json(&finite).contains("3.0000000000000000e0"));
    }

    #[test]
    fn optional_extended_fields() {
        #[derive(Serialize)]
        struct Doc {
            #[serde(serialize_with = "crate::report::ser_extended")]
            x: Option<f64>,
            #[serde(serialize_with = "crate::report::ser_extended")]
            y: Option<f64>,
            #[serde(serialize_with = "crate::report::ser_extended")]
            z: Option<f64>,
        }
        let json = to_json(&Doc { x: None, y: Some(f64::INFINITY), z: Some(1.5) });
        assert!(json.contains("\"x\":null"), "{json}");
        assert!(json.contains("\"y\":\"infinity\""), "{json}");
        assert!(json.contains("\"z\":1.5000000000000000e0"), "{json}");
    }

    #[test]
    fn csv_shapes() {
        let phi = PhaseVector::embed(dvector![1.0, 0.0], 0);
        let traj = Trajectory {
            start: 3,
            values: vec![dvector![1.0, 0.0], dvector![0.5, f64::INFINITY]],
            initial_prehistory: phi.clone(),
        };
        let csv = trajectory_csv(&traj);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "n,x_1,x_2");
        assert!(lines[1].starts_with("3,1.0000000000000000e0,"));
        assert!(lines[2].ends_with(",infinity"));

        let pcsv = phase_csv(&phi);
        assert_eq!(pcsv.lines().count(), 2);
        assert!(pcsv.lines().nth(1).unwrap().starts_with("0,1,"));
    }
}
