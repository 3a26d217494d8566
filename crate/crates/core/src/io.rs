//! Family-spec files, and the JSON and CSV forms of couplings, kernels,
//! ensembles and energy reports.
//!
//! Numbers are written with 17 significant digits so that every `f64`
//! round-trips.

use std::fmt::Write as _;

use serde::Deserialize;
use serde_json::{json, Map, Value};

use crate::action::{EnergyLimit, EnergyReport, EnergyValue};
use crate::error::{Error, Result};
use crate::kernel::{LevelKernel, RealCoupling};
use crate::levels::{Background, Builtin, ExplicitFamily, MarginalFamily, TimeFunction, TimeSpan};
use crate::measure::RealMeasure;
use crate::mq::PathEnsemble;
use crate::tol;

/// A family together with the settings a spec file may carry.
#[derive(Debug, Clone, PartialEq)]
pub struct FamilySpec {
    pub family: MarginalFamily,
    /// Time range used by checks and defaults.
    pub window: (f64, f64),
    pub refine_tol: f64,
    pub seed: u64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SpecFile {
    explicit: Option<ExplicitSpec>,
    parametric: Option<ParametricSpec>,
    window: Option<[f64; 2]>,
    tolerances: Option<Tolerances>,
    seed: Option<u64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Tolerances {
    refine: Option<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ExplicitSpec {
    #[serde(default)]
    times: Vec<(f64, RealMeasure)>,
    #[serde(default)]
    intervals: Vec<(f64, f64, RealMeasure)>,
    default: Option<RealMeasure>,
    #[serde(default)]
    interpolate: bool,
    #[serde(default = "yes")]
    atomically_complete: bool,
}

fn yes() -> bool {
    true
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ParametricSpec {
    name: String,
    #[serde(default)]
    params: Map<String, Value>,
}

fn number(params: &Map<String, Value>, key: &str, default: Option<f64>) -> Result<f64> {
    match params.get(key) {
        Some(v) => v.as_f64().ok_or_else(|| Error::Invalid(format!("parameter '{key}' must be a number"))),
        None => default.ok_or_else(|| Error::Invalid(format!("missing parameter '{key}'"))),
    }
}

/// A time function given as a number, `{"knots": [[t, v], ...]}` or
/// `{"poly": [c0, c1, ...]}`.
fn time_function(params: &Map<String, Value>, key: &str) -> Result<TimeFunction> {
    let v = params.get(key).ok_or_else(|| Error::Invalid(format!("missing parameter '{key}'")))?;
    if let Some(c) = v.as_f64() {
        return Ok(TimeFunction::constant(c));
    }
    let bad = || Error::Invalid(format!("parameter '{key}' is not a time function"));
    if let Some(k) = v.get("knots") {
        let knots: Vec<(f64, f64)> = serde_json::from_value(k.clone()).map_err(|_| bad())?;
        if knots.is_empty() || knots.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(bad());
        }
        return Ok(TimeFunction::PiecewiseLinear(knots));
    }
    if let Some(c) = v.get("poly") {
        return Ok(TimeFunction::Polynomial(serde_json::from_value(c.clone()).map_err(|_| bad())?));
    }
    Err(bad())
}

/// Builtin family by name with parameters; missing parameters take their
/// defaults where one exists.
pub fn builtin(name: &str, params: &Map<String, Value>) -> Result<Builtin> {
    Ok(match name {
        "poisson" => Builtin::Poisson {
            rate: number(params, "rate", Some(1.0))?,
            max_atoms: number(params, "max_atoms", Some(40.0))? as usize,
        },
        "binomial" => {
            let n = number(params, "n", Some(5.0))?;
            if n < 1.0 || n.fract() != 0.0 {
                return Err(Error::Invalid("binomial n must be a positive integer".into()));
            }
            Builtin::Binomial { n: n as u32 }
        }
        "two_atom" => Builtin::TwoAtom { a: time_function(params, "a")? },
        "dirac_path" => Builtin::DiracPath { g: time_function(params, "g")? },
        "crossing_uniforms" => Builtin::CrossingUniforms,
        "atom_over_diffuse" => Builtin::AtomOverDiffuse,
        "atom_lower_levels" => Builtin::AtomLowerLevels { b: time_function(params, "b")? },
        "uniform_shift" => Builtin::UniformShift,
        other => return Err(Error::Invalid(format!("unknown builtin family '{other}'"))),
    })
}

fn default_window(f: &MarginalFamily) -> (f64, f64) {
    match f {
        MarginalFamily::Parametric(Builtin::CrossingUniforms) => (0.0, 3.0),
        MarginalFamily::Parametric(_) => (0.0, 1.0),
        MarginalFamily::Reversed(inner) => {
            let (a, b) = default_window(inner);
            (-b, -a)
        }
        MarginalFamily::Explicit(e) => {
            let anchors = e.anchors();
            match (anchors.first(), anchors.last()) {
                (Some(&a), Some(&b)) if b > a => (a, b),
                (Some(&a), _) => (a - 1.0, a + 1.0),
                _ => (0.0, 1.0),
            }
        }
    }
}

pub fn parse_family_spec(text: &str) -> Result<FamilySpec> {
    let spec: SpecFile = serde_json::from_str(text).map_err(|e| Error::Invalid(format!("family spec: {e}")))?;
    let family = match (spec.explicit, spec.parametric) {
        (Some(e), None) => {
            if e.times.windows(2).any(|w| w[1].0 <= w[0].0) {
                return Err(Error::Invalid("explicit times must be strictly increasing".into()));
            }
            let background = match (e.default, e.interpolate) {
                (Some(_), true) => {
                    return Err(Error::Invalid("'default' and 'interpolate' are exclusive".into()));
                }
                (Some(m), false) => Background::Constant(m),
                (None, true) => Background::Interpolate,
                (None, false) => Background::Undefined,
            };
            let regimes = e.intervals.into_iter().map(|(a, b, m)| (TimeSpan::closed(a, b), m)).collect();
            MarginalFamily::Explicit(ExplicitFamily::new(e.times, regimes, background, e.atomically_complete)?)
        }
        (None, Some(p)) => MarginalFamily::Parametric(builtin(&p.name, &p.params)?),
        _ => return Err(Error::Invalid("a family spec holds exactly one of 'explicit' and 'parametric'".into())),
    };
    let window = spec.window.map(|w| (w[0], w[1])).unwrap_or_else(|| default_window(&family));
    if window.1 <= window.0 {
        return Err(Error::Invalid("window must be increasing".into()));
    }
    Ok(FamilySpec {
        family,
        window,
        refine_tol: spec.tolerances.and_then(|t| t.refine).unwrap_or(tol::REFINE),
        seed: spec.seed.unwrap_or(0),
    })
}

/// A family named on the command line: a spec file path, or the name of a
/// builtin with default parameters.
pub fn load_family(arg: &str) -> Result<FamilySpec> {
    let path = std::path::Path::new(arg);
    if path.exists() {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Invalid(format!("{arg}: {e}")))?;
        return parse_family_spec(&text);
    }
    let family = MarginalFamily::Parametric(builtin(arg, &Map::new())?);
    Ok(FamilySpec { window: default_window(&family), family, refine_tol: tol::REFINE, seed: 0 })
}

/// `f64` with 17 significant digits.
pub fn num(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "NaN".into()
    } else if x > 0.0 {
        "Infinity".into()
    } else {
        "-Infinity".into()
    }
}

/// Serializes a JSON value, writing floats with [`num`] and non-finite
/// floats as strings.
pub fn to_json(v: &Value) -> String {
    let mut s = String::new();
    write_json(v, &mut s);
    s
}

fn write_json(v: &Value, out: &mut String) {
    match v {
        Value::Number(n) => {
            if n.is_f64() {
                out.push_str(&num(n.as_f64().unwrap()));
            } else {
                out.push_str(&n.to_string());
            }
        }
        Value::Array(items) => {
            out.push('[');
            for (i, x) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_json(x, out);
            }
            out.push(']');
        }
        Value::Object(m) => {
            out.push('{');
            for (i, (k, x)) in m.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push_str(&Value::String(k.clone()).to_string());
                out.push(':');
                write_json(x, out);
            }
            out.push('}');
        }
        other => out.push_str(&other.to_string()),
    }
}

fn fnum(x: f64) -> Value {
    serde_json::Number::from_f64(x).map(Value::Number).unwrap_or_else(|| Value::String(num(x)))
}

fn farr(xs: &[f64]) -> Value {
    Value::Array(xs.iter().map(|&x| fnum(x)).collect())
}

pub fn kernel_json(k: &LevelKernel) -> Value {
    let cells: Vec<Value> = (0..k.n_cells())
        .map(|c| json!({"identity": fnum(k.identity_weights()[c]), "coefficients": farr(k.row_coefficients(c))}))
        .collect();
    let targets: Vec<Value> =
        k.targets().iter().map(|t| json!({"breaks": farr(t.breaks()), "densities": farr(t.densities())})).collect();
    json!({"grid": farr(k.grid()), "cells": cells, "targets": targets})
}

/// `{s, t, grid, cdf, atoms, level}` for a real coupling, with the CDF
/// tabulated on the breakpoints of both marginals.
pub fn coupling_json(s: f64, t: f64, p: &RealCoupling) -> Value {
    let xs = p.left.x_breakpoints();
    let ys = p.right.x_breakpoints();
    let cdf: Vec<Value> = xs.iter().map(|&x| Value::Array(ys.iter().map(|&y| fnum(p.cdf(x, y))).collect())).collect();
    let mut atoms = Vec::new();
    for a in p.left.atoms() {
        for b in p.right.atoms() {
            let m = p.point_mass(a.location, b.location);
            if m > tol::REPR {
                atoms.push(farr(&[a.location, b.location, m]));
            }
        }
    }
    json!({
        "s": fnum(s),
        "t": fnum(t),
        "grid": {"x": farr(&xs), "y": farr(&ys)},
        "cdf": cdf,
        "atoms": atoms,
        "level": kernel_json(p.level.kernel()),
    })
}

/// Header of times, then one line per path.
pub fn ensemble_csv(e: &PathEnsemble) -> String {
    let mut s = String::new();
    let header: Vec<String> = e.times.iter().map(|&t| num(t)).collect();
    s.push_str(&header.join(","));
    s.push('\n');
    for p in &e.paths {
        for (i, x) in p.iter().enumerate() {
            if i > 0 {
                s.push(',');
            }
            let _ = write!(s, "{}", num(*x));
        }
        s.push('\n');
    }
    s
}

/// `(u, v, F)` lines on `us × vs`.
pub fn cdf_csv(us: &[f64], vs: &[f64], values: &[f64]) -> String {
    let mut s = String::from("u,v,F\n");
    for (i, &u) in us.iter().enumerate() {
        for (j, &v) in vs.iter().enumerate() {
            let _ = writeln!(s, "{},{},{}", num(u), num(v), num(values[i * vs.len() + j]));
        }
    }
    s
}

pub fn energy_json(report: &EnergyReport, limit: Option<&EnergyLimit>) -> Value {
    let history: Vec<Value> = limit
        .map(|l| l.history.iter().map(|&(m, e)| json!({"intervals": m, "energy": fnum(e)})).collect())
        .unwrap_or_default();
    let limit_value = match limit.map(|l| l.value) {
        Some(EnergyValue::Finite(v)) => fnum(v),
        Some(EnergyValue::Infinite) => Value::String("Infinite".into()),
        None => Value::Null,
    };
    json!({
        "partition": farr(&report.partition),
        "terms": farr(&report.terms),
        "total": fnum(report.total),
        "limit": limit_value,
        "refinement_history": history,
    })
}

pub fn measure_json(m: &RealMeasure) -> Value {
    let (atoms, segments) = m.to_mixture();
    json!({
        "atoms": atoms.iter().map(|&(x, w)| farr(&[x, w])).collect::<Vec<_>>(),
        "segments": segments.iter().map(|&(a, b, w)| farr(&[a, b, w])).collect::<Vec<_>>(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn explicit_spec_round_trip() {
        let text = r#"{"explicit":{"times":[[-1,{"segments":[[0,1,1]]}],[0,{"atoms":[[0,1]]}],[1,{"segments":[[0,1,1]]}]],"interpolate":true}}"#;
        let spec = parse_family_spec(text).unwrap();
        assert_eq!(spec.window, (-1.0, 1.0));
        let m = spec.family.marginal(0.5).unwrap();
        assert!(m.approx_eq(&RealMeasure::uniform(0.0, 0.5), 1e-12));
    }

    #[test]
    fn parametric_spec() {
        let spec = parse_family_spec(r#"{"parametric":{"name":"binomial","params":{"n":3}},"seed":5}"#).unwrap();
        assert_eq!(spec.family, MarginalFamily::Parametric(Builtin::Binomial { n: 3 }));
        assert_eq!(spec.seed, 5);
        let params: Map<String, Value> = serde_json::from_str(r#"{"a":{"knots":[[0,0.5],[1,0.6]]}}"#).unwrap();
        let b = builtin("two_atom", &params).unwrap();
        assert_eq!(b, Builtin::TwoAtom { a: TimeFunction::PiecewiseLinear(vec![(0.0, 0.5), (1.0, 0.6)]) });
    }

    #[test]
    fn bad_specs_are_rejected() {
        assert!(parse_family_spec("{}").is_err());
        assert!(parse_family_spec(r#"{"parametric":{"name":"nope"}}"#).is_err());
        assert!(parse_family_spec(r#"{"explicit":{"times":[[1,{"atoms":[[0,1]]}],[0,{"atoms":[[0,1]]}]]}}"#).is_err());
    }

    #[test]
    fn numbers_have_seventeen_digits() {
        assert_eq!(num(0.1), "1.0000000000000001e-1");
        assert_eq!(to_json(&json!({"a": [1.0, 2]})), r#"{"a":[1.0000000000000000e0,2]}"#);
        let v: Value = serde_json::from_str(&to_json(&json!([0.1]))).unwrap();
        assert_eq!(v[0].as_f64(), Some(0.1));
    }
}
