//! Built-in parameterized instances with closed-form solutions and the
//! solver status each one should produce.

use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::expr::{parse, Expr};
use crate::funcrep::{GridFunction, DEFAULT_RESOLUTION};
use crate::hypotheses::HypothesisReport;
use crate::operator::EquationSpec;
use crate::solver::{self, neumann_solve, Status};

/// Admissible values of a parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ParamRange {
    Any,
    /// Open interval `(lo, hi)`.
    Open(f64, f64),
    /// Half-open interval `(lo, hi]`.
    LeftOpen(f64, f64),
}

impl ParamRange {
    pub fn contains(self, v: f64) -> bool {
        v.is_finite()
            && match self {
                ParamRange::Any => true,
                ParamRange::Open(lo, hi) => lo < v && v < hi,
                ParamRange::LeftOpen(lo, hi) => lo < v && v <= hi,
            }
    }
}

impl fmt::Display for ParamRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamRange::Any => f.write_str("any real"),
            ParamRange::Open(lo, hi) if hi.is_infinite() => write!(f, "({lo}, inf)"),
            ParamRange::Open(lo, hi) => write!(f, "({lo}, {hi})"),
            ParamRange::LeftOpen(lo, hi) => write!(f, "({lo}, {hi}]"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamDef {
    pub name: &'static str,
    pub default: f64,
    pub range: ParamRange,
}

const fn param(name: &'static str, default: f64, range: ParamRange) -> ParamDef {
    ParamDef { name, default, range }
}

/// A registered family of equations.
#[derive(Debug, Clone, Copy)]
pub struct CorpusEntry {
    pub name: &'static str,
    /// Where the instance comes from, in words.
    pub provenance: &'static str,
    pub params: &'static [ParamDef],
    builder: fn(&[f64]) -> Template,
}

/// Strings and expectations produced by an entry for concrete parameters.
struct Template {
    maps: [String; 2],
    coeffs: [String; 2],
    g: String,
    oracle: Option<String>,
    oracle_integrable: bool,
    status: Status,
    k: usize,
    l: usize,
    c: f64,
}

fn dyadic(coef: f64, g: f64) -> ([String; 2], [String; 2], String) {
    (
        ["x/2".into(), "(x+1)/2".into()],
        [format!("{coef}"), format!("{coef}")],
        format!("{g}"),
    )
}

fn ex1_5(p: &[f64]) -> Template {
    let c = p[0];
    let (maps, coeffs, g) = dyadic(-0.5, c);
    Template {
        maps,
        coeffs,
        g,
        oracle: Some(format!("{}", c / 2.0)),
        oracle_integrable: true,
        status: if c == 0.0 {
            Status::FiniteSum
        } else {
            Status::DivergentOscillating
        },
        k: 1,
        l: 1,
        c: 1.0,
    }
}

fn dyadic_fp(p: &[f64]) -> Template {
    let eps = p[0];
    let (maps, coeffs, g) = dyadic(0.5, eps);
    Template {
        maps,
        coeffs,
        g,
        oracle: None,
        oracle_integrable: true,
        status: if eps == 0.0 {
            Status::FiniteSum
        } else {
            Status::DivergentGrowing
        },
        k: 1,
        l: 1,
        c: 1.0,
    }
}

fn ex3_3(p: &[f64]) -> Template {
    let b = p[0];
    Template {
        maps: ["x".into(), "x".into()],
        coeffs: ["x/2".into(), "x/2".into()],
        g: format!("{b}"),
        oracle: Some(format!("({b})/(1 - x)")),
        oracle_integrable: b == 0.0,
        status: if b == 0.0 {
            Status::FiniteSum
        } else {
            Status::DivergentGrowing
        },
        k: 1,
        l: 2,
        c: 1.0,
    }
}

fn ex3_7(p: &[f64]) -> Template {
    let (a, b) = (p[0], p[1]);
    Template {
        maps: ["x".into(), "x".into()],
        coeffs: ["x/2".into(), format!("x/{a}")],
        g: format!("{b}"),
        oracle: Some(format!("2*{a}*({b})/(2*{a} - (2+{a})*x)")),
        oracle_integrable: true,
        status: if b == 0.0 { Status::FiniteSum } else { Status::Converged },
        k: 1,
        l: 2,
        c: 1.0,
    }
}

fn ex4_2(p: &[f64]) -> Template {
    let eps = p[0];
    let (maps, coeffs, g) = dyadic((1.0 - eps) / 2.0, 1.0);
    Template {
        maps,
        coeffs,
        g,
        oracle: Some(format!("{}", 1.0 / eps)),
        oracle_integrable: true,
        status: Status::Converged,
        k: 1,
        l: 1,
        c: 1.0 - eps,
    }
}

fn ex4_3(p: &[f64]) -> Template {
    let eps = p[0];
    Template {
        maps: [format!("x^{}", 1.0 + eps), format!("x^{}", 1.0 + 2.0 * eps)],
        coeffs: ["x/2".into(), "x/2".into()],
        g: "1".into(),
        oracle: None,
        oracle_integrable: true,
        status: Status::Converged,
        k: 1,
        l: 2,
        c: 1.0 / (1.0 + eps),
    }
}

fn sec5(p: &[f64]) -> Template {
    let (a, b) = (p[0], p[1]);
    let (maps, coeffs, g) = dyadic(a, b);
    let status = if b == 0.0 || a == 0.0 {
        Status::FiniteSum
    } else if a.abs() < 0.5 {
        Status::Converged
    } else if a == -0.5 {
        Status::DivergentOscillating
    } else {
        Status::DivergentGrowing
    };
    Template {
        maps,
        coeffs,
        g,
        oracle: (a.abs() < 0.5).then(|| format!("{}", b / (1.0 - 2.0 * a))),
        oracle_integrable: true,
        status,
        k: 1,
        l: 1,
        c: 2.0 * a.abs(),
    }
}

static ENTRIES: [CorpusEntry; 7] = [
    CorpusEntry {
        name: "ex1_5",
        provenance: "oscillating divergence: weights -1/2 on the dyadic maps, g = c, solution c/2",
        params: &[param("c", 1.0, ParamRange::Any)],
        builder: ex1_5,
    },
    CorpusEntry {
        name: "dyadic_fp",
        provenance: "transfer operator of the doubling map (P1 = 1), g = eps",
        params: &[param("eps", 0.25, ParamRange::Any)],
        builder: dyadic_fp,
    },
    CorpusEntry {
        name: "ex3_3",
        provenance: "optimality of C < 1: f = x, weights x/2, solution b/(1-x) not integrable",
        params: &[param("b", 1.0, ParamRange::Any)],
        builder: ex3_3,
    },
    CorpusEntry {
        name: "ex3_7",
        provenance: "C = 1 but iterated condition holds: weights x/2 and x/a, solution 2ab/(2a-(2+a)x)",
        params: &[
            param("a", 3.0, ParamRange::Open(2.0, f64::INFINITY)),
            param("b", 1.0, ParamRange::Any),
        ],
        builder: ex3_7,
    },
    CorpusEntry {
        name: "ex4_2",
        provenance: "no continuous dependence on the weights: solution 1/eps",
        params: &[param("eps", 0.25, ParamRange::LeftOpen(0.0, 0.5))],
        builder: ex4_2,
    },
    CorpusEntry {
        name: "ex4_3",
        provenance: "no continuous dependence on the maps: f = x^(1+eps), x^(1+2eps), C = 1/(1+eps)",
        params: &[param("eps", 0.25, ParamRange::Open(0.0, 0.5))],
        builder: ex4_3,
    },
    CorpusEntry {
        name: "sec5",
        provenance: "two-parameter dyadic family with weights a, g = b, solution b/(1-2a) for |a| < 1/2",
        params: &[param("a", 0.4, ParamRange::Any), param("b", 1.0, ParamRange::Any)],
        builder: sec5,
    },
];

/// All registered entries, in a fixed order.
pub fn entries() -> &'static [CorpusEntry] {
    &ENTRIES
}

/// Looks up an entry by name.
pub fn entry(name: &str) -> Result<&'static CorpusEntry> {
    ENTRIES
        .iter()
        .find(|e| e.name == name)
        .ok_or_else(|| Error::UnknownEntry(name.to_string()))
}

/// A corpus entry instantiated at concrete parameters and resolution.
#[derive(Debug, Clone)]
pub struct Instance {
    pub name: &'static str,
    pub params: Vec<(&'static str, f64)>,
    pub spec: EquationSpec,
    /// Closed-form solution, if known.
    pub oracle: Option<Expr>,
    /// False when the closed form has a non-integrable singularity.
    pub oracle_integrable: bool,
    pub expected_status: Status,
    pub expected_k: usize,
    pub expected_l: usize,
    pub expected_c: f64,
}

impl Instance {
    /// `residual(spec, sample(oracle))`; `None` without an integrable oracle.
    pub fn oracle_residual(&self) -> Option<Result<f64>> {
        let oracle = self.oracle.as_ref().filter(|_| self.oracle_integrable)?;
        Some(GridFunction::sample(oracle, self.spec.resolution()).and_then(|o| solver::residual(&self.spec, &o)))
    }

    /// Human-readable `name(k=v, ...)`.
    pub fn label(&self) -> String {
        let params: Vec<String> = self.params.iter().map(|(k, v)| format!("{k}={v}")).collect();
        format!("{}({})", self.name, params.join(", "))
    }
}

/// Instantiates `name` with overrides `params` (others take defaults) at
/// resolution `m`.
pub fn build(name: &str, params: &[(&str, f64)], m: usize) -> Result<Instance> {
    let entry = entry(name)?;
    for (key, _) in params {
        if !entry.params.iter().any(|p| p.name == *key) {
            return Err(Error::InvalidParameter(format!(
                "entry `{name}` has no parameter `{key}`"
            )));
        }
    }
    let mut values = Vec::with_capacity(entry.params.len());
    for def in entry.params {
        let v = params
            .iter()
            .rev()
            .find(|(k, _)| *k == def.name)
            .map_or(def.default, |&(_, v)| v);
        if !def.range.contains(v) {
            return Err(Error::ParamOutOfRange {
                name: def.name.to_string(),
                value: v,
                range: def.range.to_string(),
            });
        }
        values.push(v);
    }
    let t = (entry.builder)(&values);
    let maps: Vec<&str> = t.maps.iter().map(String::as_str).collect();
    let coeffs: Vec<&str> = t.coeffs.iter().map(String::as_str).collect();
    let spec = EquationSpec::from_strs(&maps, &coeffs, &t.g, m)?;
    Ok(Instance {
        name: entry.name,
        params: entry.params.iter().map(|p| p.name).zip(values).collect(),
        spec,
        oracle: t.oracle.as_deref().map(parse).transpose()?,
        oracle_integrable: t.oracle_integrable,
        expected_status: t.status,
        expected_k: t.k,
        expected_l: t.l,
        expected_c: t.c,
    })
}

/// Every entry at its default parameters.
pub fn defaults(m: usize) -> Result<Vec<Instance>> {
    ENTRIES.iter().map(|e| build(e.name, &[], m)).collect()
}

/// Outcome of solving one instance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunRecord {
    pub label: String,
    pub status: Option<Status>,
    pub expected_status: Status,
    pub m_stop: Option<usize>,
    /// `‖φ₀ − oracle‖₁` when the run converged and an oracle exists.
    pub oracle_error: Option<f64>,
    pub threshold: f64,
    pub passed: bool,
    pub error: Option<String>,
}

/// Acceptance threshold on the oracle error.
pub fn oracle_threshold(tol: f64, m: usize) -> f64 {
    10.0 * tol + 100.0 / m as f64
}

/// Solves one instance; the contraction constant is taken from the
/// hypothesis checker when it is below one.
pub fn run_instance(inst: &Instance, tol: f64, max_iter: usize) -> RunRecord {
    let m = inst.spec.resolution();
    let threshold = oracle_threshold(tol, m);
    let mut record = RunRecord {
        label: inst.label(),
        status: None,
        expected_status: inst.expected_status,
        m_stop: None,
        oracle_error: None,
        threshold,
        passed: false,
        error: None,
    };
    let outcome = HypothesisReport::check(&inst.spec).and_then(|report| {
        let c_hint = inst.spec.c_hint().or(report.contraction_constant());
        let result = neumann_solve(&inst.spec, tol, max_iter, c_hint)?;
        let oracle_error = match (&inst.oracle, result.status) {
            (Some(o), Status::Converged | Status::FiniteSum) if inst.oracle_integrable => {
                Some(GridFunction::sample(o, m)?.l1_distance(&result.phi0)?)
            }
            _ => None,
        };
        Ok((result, oracle_error))
    });
    match outcome {
        Ok((result, oracle_error)) => {
            record.status = Some(result.status);
            record.m_stop = Some(result.m_stop);
            record.oracle_error = oracle_error;
            record.passed = result.status == inst.expected_status && oracle_error.is_none_or(|e| e <= threshold);
        }
        Err(e) => record.error = Some(e.to_string()),
    }
    record
}

/// Runs every default instance at resolution `m`.
pub fn run_all_at(m: usize, tol: f64, max_iter: usize) -> Result<Vec<RunRecord>> {
    Ok(defaults(m)?
        .iter()
        .map(|inst| run_instance(inst, tol, max_iter))
        .collect())
}

/// Runs every default instance at the default resolution.
pub fn run_all(tol: f64, max_iter: usize) -> Result<Vec<RunRecord>> {
    run_all_at(DEFAULT_RESOLUTION, tol, max_iter)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hypotheses::{compute_l, estimate_c, estimate_k};

    #[test]
    fn build_examples() {
        let sec5 = build("sec5", &[("a", 0.4), ("b", 1.0)], 64).unwrap();
        assert_eq!(sec5.oracle.as_ref().unwrap().eval(0.3), 5.000000000000001);
        let ex4_2 = build("ex4_2", &[("eps", 0.25)], 64).unwrap();
        assert_eq!(ex4_2.oracle.as_ref().unwrap().eval(0.7), 4.0);
        let ex3_7 = build("ex3_7", &[], 64).unwrap();
        let o = ex3_7.oracle.as_ref().unwrap();
        assert!((o.eval(1.0) - 6.0).abs() < 1e-12);
        assert!((o.eval(0.5) - 6.0 / 3.5).abs() < 1e-12);
    }

    #[test]
    fn lookup_errors() {
        assert_eq!(build("nope", &[], 64).unwrap_err(), Error::UnknownEntry("nope".into()));
        assert!(matches!(
            build("ex3_7", &[("a", 2.0)], 64),
            Err(Error::ParamOutOfRange { .. })
        ));
        assert!(matches!(
            build("ex4_3", &[("eps", 0.5)], 64),
            Err(Error::ParamOutOfRange { .. })
        ));
        assert!(matches!(
            build("sec5", &[("c", 1.0)], 64),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn registered_oracles_solve_their_equations() {
        for inst in defaults(DEFAULT_RESOLUTION).unwrap() {
            if let Some(r) = inst.oracle_residual() {
                let r = r.unwrap();
                assert!(r <= 1e-3, "{}: residual {r}", inst.label());
            }
        }
        let ex3_3 = build("ex3_3", &[], 64).unwrap();
        assert!(ex3_3.oracle.is_some() && ex3_3.oracle_residual().is_none());
    }

    #[test]
    fn expected_constants_match_checker() {
        for inst in defaults(512).unwrap() {
            let k = estimate_k(&inst.spec);
            let l = compute_l(&inst.spec);
            assert_eq!((k, l), (inst.expected_k, inst.expected_l), "{}", inst.label());
            let c = estimate_c(&inst.spec, k, l);
            assert!((c - inst.expected_c).abs() <= 1e-9, "{}: C = {c}", inst.label());
        }
    }

    #[test]
    fn status_cases_of_two_parameter_family() {
        let status = |a: f64, b: f64| build("sec5", &[("a", a), ("b", b)], 16).unwrap().expected_status;
        assert_eq!(status(0.4, 1.0), Status::Converged);
        assert_eq!(status(0.4, 0.0), Status::FiniteSum);
        assert_eq!(status(-0.5, 1.0), Status::DivergentOscillating);
        assert_eq!(status(0.5, 1.0), Status::DivergentGrowing);
        assert_eq!(status(-0.8, 1.0), Status::DivergentGrowing);
        assert!(build("sec5", &[("a", 0.6)], 16).unwrap().oracle.is_none());
    }

    #[test]
    fn entry_names_are_unique() {
        let mut names: Vec<_> = entries().iter().map(|e| e.name).collect();
        names.sort_unstable();
        names.dedup();
        assert_eq!(names.len(), entries().len());
    }
}
