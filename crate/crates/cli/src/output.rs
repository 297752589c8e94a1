//! CSV and JSON writers.

use std::io::Write;

use funceq_core::corpus::RunRecord;
use funceq_core::{GridFunction, SolveResult, Status};
use serde::Serialize;

/// Columns `k,term_norm,partial_norm,apriori_bound`; the bound is empty
/// when no contraction constant was used.
pub fn write_trace<W: Write>(result: &SolveResult, w: W) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["k", "term_norm", "partial_norm", "apriori_bound"])?;
    for (k, t, s, bound) in result.trace() {
        out.write_record([
            k.to_string(),
            t.to_string(),
            s.to_string(),
            bound.map(|b| b.to_string()).unwrap_or_default(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// Columns `x,value` at the grid nodes.
pub fn write_solution<W: Write>(phi: &GridFunction, w: W) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["x", "value"])?;
    for (x, v) in phi.nodes() {
        out.write_record([x.to_string(), v.to_string()])?;
    }
    out.flush()?;
    Ok(())
}

/// Where the contraction constant used by the solver came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum HintSource {
    File,
    Estimated,
    None,
}

#[derive(Debug, Serialize)]
pub struct SolveReport<'a> {
    pub status: Status,
    pub m_stop: usize,
    pub residual: f64,
    pub c_hint: Option<f64>,
    pub c_hint_source: HintSource,
    pub apriori_bound: Option<f64>,
    pub heuristic: bool,
    pub phi0_l1_norm: f64,
    pub term_norms: &'a [f64],
    pub partial_norms: &'a [f64],
}

impl<'a> SolveReport<'a> {
    pub fn new(result: &'a SolveResult, source: HintSource) -> Self {
        Self {
            status: result.status,
            m_stop: result.m_stop,
            residual: result.residual,
            c_hint: result.c_hint,
            c_hint_source: if result.c_hint.is_some() {
                source
            } else {
                HintSource::None
            },
            apriori_bound: result.apriori_bound,
            heuristic: result.heuristic,
            phi0_l1_norm: result.phi0.l1_norm(),
            term_norms: &result.term_norms,
            partial_norms: &result.partial_norms,
        }
    }

    pub fn write_text<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "status         {}", self.status)?;
        writeln!(w, "m_stop         {}", self.m_stop)?;
        writeln!(w, "residual       {:.6e}", self.residual)?;
        match self.c_hint {
            Some(c) => {
                let source = if self.c_hint_source == HintSource::File {
                    "file"
                } else {
                    "estimated"
                };
                writeln!(w, "C              {c} ({source})")?;
            }
            None => writeln!(w, "C              none (ratio heuristic)")?,
        }
        match self.apriori_bound {
            Some(b) => writeln!(w, "apriori_bound  {b:.6e}")?,
            None => writeln!(w, "apriori_bound  n/a")?,
        }
        if self.heuristic {
            writeln!(w, "note           convergence declared by the ratio heuristic")?;
        }
        writeln!(w, "phi0_l1_norm   {:.10}", self.phi0_l1_norm)
    }
}

#[derive(Debug, Serialize)]
pub struct VerifyReport {
    pub reference: String,
    pub residual: f64,
    pub solve_status: Status,
    /// Distance to the computed solution, when the solve succeeded.
    pub l1_distance: Option<f64>,
    pub passed: bool,
}

impl VerifyReport {
    pub fn write_text<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "reference      {}", self.reference)?;
        writeln!(w, "residual       {:.6e}", self.residual)?;
        writeln!(w, "solve_status   {}", self.solve_status)?;
        match self.l1_distance {
            Some(d) => writeln!(w, "l1_distance    {d:.6e}")?,
            None => writeln!(w, "l1_distance    n/a")?,
        }
        writeln!(w, "result         {}", if self.passed { "pass" } else { "fail" })
    }
}

#[derive(Debug, Serialize)]
pub struct CovReport {
    pub map: String,
    pub h: String,
    pub interval: (f64, f64),
    pub lhs: f64,
    pub rhs: f64,
    pub difference: f64,
    pub flat_pieces: usize,
    pub passed: bool,
}

impl CovReport {
    pub fn write_text<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "map            {}", self.map)?;
        writeln!(w, "h              {}", self.h)?;
        writeln!(w, "interval       [{}, {}]", self.interval.0, self.interval.1)?;
        writeln!(w, "lhs            {:.12}", self.lhs)?;
        writeln!(w, "rhs            {:.12}", self.rhs)?;
        writeln!(w, "difference     {:.3e}", self.difference)?;
        if self.flat_pieces > 0 {
            writeln!(w, "flat_pieces    {} (excluded from both sides)", self.flat_pieces)?;
        }
        writeln!(w, "result         {}", if self.passed { "pass" } else { "fail" })
    }
}

pub fn write_run_table<W: Write>(records: &[RunRecord], mut w: W) -> std::io::Result<()> {
    writeln!(
        w,
        "{:<22} {:<21} {:<21} {:>6} {:>11} {:>11}  result",
        "entry", "status", "expected", "m_stop", "oracle_err", "threshold"
    )?;
    for r in records {
        let status = match (&r.status, &r.error) {
            (Some(s), _) => s.to_string(),
            (None, Some(e)) => format!("error: {e}"),
            (None, None) => "-".into(),
        };
        let m_stop = r.m_stop.map_or("-".into(), |m| m.to_string());
        let err = r.oracle_error.map_or("-".into(), |e| format!("{e:.3e}"));
        writeln!(
            w,
            "{:<22} {:<21} {:<21} {:>6} {:>11} {:>11.3e}  {}",
            r.label,
            status,
            r.expected_status.to_string(),
            m_stop,
            err,
            r.threshold,
            if r.passed { "pass" } else { "FAIL" }
        )?;
    }
    let passed = records.iter().filter(|r| r.passed).count();
    writeln!(w, "{passed}/{} entries passed", records.len())
}

#[cfg(test)]
mod tests {
    use super::*;
    use funceq_core::corpus;
    use funceq_core::solver::neumann_solve;

    #[test]
    fn trace_columns() {
        let inst = corpus::build("sec5", &[("a", 0.25)], 32).unwrap();
        let r = neumann_solve(&inst.spec, 1e-3, 100, Some(0.5)).unwrap();
        let mut buf = Vec::new();
        write_trace(&r, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("k,term_norm,partial_norm,apriori_bound"));
        assert_eq!(lines.next(), Some("0,1,1,1"));
        assert_eq!(text.lines().count(), r.m_stop + 2);
    }

    #[test]
    fn trace_without_bound_leaves_column_empty() {
        let inst = corpus::build("ex1_5", &[], 32).unwrap();
        let r = neumann_solve(&inst.spec, 1e-3, 100, None).unwrap();
        let mut buf = Vec::new();
        write_trace(&r, &mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().lines().nth(2).unwrap().ends_with(','));
    }

    #[test]
    fn solution_rows() {
        let phi = GridFunction::from_fn(16, |x| 2.0 * x).unwrap();
        let mut buf = Vec::new();
        write_solution(&phi, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 18);
        assert_eq!(text.lines().last(), Some("1,2"));
    }
}
