//! Elementary solution `φ₀ = Σ_k P^k g` by partial sums, and the
//! equivalent Picard iteration `φ ↦ Pφ + g`.
//!
//! Stopping rules, checked in this order after each term `t_m = P^m g`:
//!
//! 1. finite sum: `‖t_m‖ ≤ 1e-14·‖g‖`;
//! 2. converged: with a contraction constant `C < 1`, when the tail bound
//!    `C^{m+1}/(1−C)·‖g‖ ≤ tol`; without one, when `‖t_m‖ ≤ tol·(1−r̂)`
//!    where `r̂ < 1` is the largest of the last five ratios `‖t_k‖/‖t_{k−1}‖`
//!    (a heuristic, flagged in the result);
//! 3. growing: `‖S_m‖ > 1e6·(1 + ‖g‖)`;
//! 4. stagnation: for 20 consecutive steps the ratio-based tail estimate
//!    `‖t_k‖·r̂/(1−r̂)` never shrank by a factor below 0.999, and the current
//!    `r̂` lies in `[0.99, 1/0.999]`. The run is then oscillating when the
//!    partial sums stayed bounded over the window and growing otherwise.
//!    Skipped when a contraction constant is supplied: the series then
//!    converges, and a slowly decaying grid floor must not be misread;
//! 5. iteration cap.

use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::funcrep::GridFunction;
use crate::operator::EquationSpec;

/// Relative size below which a term counts as zero.
pub const ZERO_TERM_RELATIVE: f64 = 1e-14;
/// Partial sums beyond `GROWTH_CAP·(1 + ‖g‖)` are declared divergent.
pub const GROWTH_CAP: f64 = 1e6;
/// Number of consecutive non-decreasing tail estimates that flags stagnation.
pub const STAGNATION_WINDOW: usize = 20;
/// A step "decreases" the tail estimate only when it shrinks below this factor.
pub const STAGNATION_FACTOR: f64 = 0.999;
/// Ratios `‖t_k‖/‖t_{k−1}‖` at or above this count as sublinear decay.
pub const SLOW_RATIO: f64 = 0.99;
/// Number of trailing ratios used for `r̂`.
pub const RATIO_WINDOW: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Status {
    Converged,
    FiniteSum,
    DivergentOscillating,
    DivergentGrowing,
    MaxIterReached,
}

impl Status {
    pub fn is_divergent(self) -> bool {
        matches!(self, Status::DivergentOscillating | Status::DivergentGrowing)
    }

    pub fn is_success(self) -> bool {
        matches!(self, Status::Converged | Status::FiniteSum)
    }
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Converged => "Converged",
            Status::FiniteSum => "FiniteSum",
            Status::DivergentOscillating => "DivergentOscillating",
            Status::DivergentGrowing => "DivergentGrowing",
            Status::MaxIterReached => "MaxIterReached",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveResult {
    /// Final partial sum (or final Picard iterate).
    pub phi0: GridFunction,
    pub status: Status,
    pub m_stop: usize,
    /// `‖P^k g‖` for `k = 0..=m_stop` (Picard: `‖φ_k − φ_{k−1}‖`, with `‖φ_0‖` first).
    pub term_norms: Vec<f64>,
    /// `‖S_k‖` for `k = 0..=m_stop` (Picard: `‖φ_k‖`).
    pub partial_norms: Vec<f64>,
    /// Contraction constant used for stopping, if any.
    pub c_hint: Option<f64>,
    /// Tail bound at `m_stop`, available when `C < 1`.
    pub apriori_bound: Option<f64>,
    /// `‖φ₀ − Pφ₀ − g‖`.
    pub residual: f64,
    /// Convergence was declared by the ratio heuristic, not a proven bound.
    pub heuristic: bool,
}

impl SolveResult {
    /// Rows `(k, term_norm, partial_norm, apriori_bound)` of the trace.
    pub fn trace(&self) -> impl Iterator<Item = (usize, f64, f64, Option<f64>)> + '_ {
        let g_norm = self.term_norms.first().copied().unwrap_or(0.0);
        self.term_norms
            .iter()
            .zip(&self.partial_norms)
            .enumerate()
            .map(move |(k, (&t, &s))| {
                let bound = self.c_hint.and_then(|c| apriori_error(c, k, g_norm).ok());
                (k, t, s, bound)
            })
    }
}

/// `C^{m+1}/(1−C)·‖g‖`, the distance from `S_m` to `φ₀` guaranteed by a
/// contraction constant `C`.
pub fn apriori_error(c: f64, m: usize, norm_g: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&c) {
        return Err(Error::NotContraction(c));
    }
    Ok(c.powi(m as i32 + 1) / (1.0 - c) * norm_g)
}

/// `‖φ − Pφ − g‖₁`.
pub fn residual(spec: &EquationSpec, phi: &GridFunction) -> Result<f64> {
    let p_phi = spec.apply(phi)?;
    let diff: Vec<f64> = phi
        .samples()
        .iter()
        .zip(p_phi.samples())
        .zip(spec.g().samples())
        .map(|((u, p), g)| u - p - g)
        .collect();
    Ok(GridFunction::from_samples(diff)?.l1_norm())
}

/// One step of the Neumann series.
#[derive(Debug, Clone, PartialEq)]
pub struct NeumannStep {
    pub k: usize,
    /// `t_k = P^k g`.
    pub term: GridFunction,
    /// `S_k = Σ_{j≤k} t_j`, accumulated with compensated summation.
    pub partial_sum: GridFunction,
}

/// Iterator over the terms and partial sums of `Σ P^k g`.
#[derive(Debug, Clone)]
pub struct NeumannSeries<'a> {
    spec: &'a EquationSpec,
    next_term: Option<GridFunction>,
    sum: Vec<f64>,
    comp: Vec<f64>,
    k: usize,
}

impl<'a> NeumannSeries<'a> {
    pub fn new(spec: &'a EquationSpec) -> Self {
        let n = spec.resolution() + 1;
        Self {
            spec,
            next_term: Some(spec.g().clone()),
            sum: vec![0.0; n],
            comp: vec![0.0; n],
            k: 0,
        }
    }
}

impl Iterator for NeumannSeries<'_> {
    type Item = Result<NeumannStep>;

    fn next(&mut self) -> Option<Self::Item> {
        let term = self.next_term.take()?;
        // Neumaier summation per node
        for ((s, c), &t) in self.sum.iter_mut().zip(self.comp.iter_mut()).zip(term.samples()) {
            let total = *s + t;
            if s.abs() >= t.abs() {
                *c += (*s - total) + t;
            } else {
                *c += (t - total) + *s;
            }
            *s = total;
        }
        let partial: Vec<f64> = self.sum.iter().zip(&self.comp).map(|(s, c)| s + c).collect();
        let partial_sum = match GridFunction::from_samples(partial) {
            Ok(p) => p,
            Err(e) => return Some(Err(e)),
        };
        match self.spec.apply(&term) {
            Ok(next) => self.next_term = Some(next),
            Err(e) => return Some(Err(e)),
        }
        let k = self.k;
        self.k += 1;
        Some(Ok(NeumannStep { k, term, partial_sum }))
    }
}

/// Iterator over `φ_0 = start`, `φ_{j+1} = Pφ_j + g`.
#[derive(Debug, Clone)]
pub struct PicardIteration<'a> {
    spec: &'a EquationSpec,
    current: Option<GridFunction>,
}

impl<'a> PicardIteration<'a> {
    pub fn new(spec: &'a EquationSpec, start: GridFunction) -> Self {
        Self {
            spec,
            current: Some(start),
        }
    }
}

impl Iterator for PicardIteration<'_> {
    type Item = Result<GridFunction>;

    fn next(&mut self) -> Option<Self::Item> {
        let phi = self.current.take()?;
        let next = self
            .spec
            .apply(&phi)
            .and_then(|p| GridFunction::combine(1.0, &p, 1.0, self.spec.g()));
        match next {
            Ok(n) => self.current = Some(n),
            Err(e) => return Some(Err(e)),
        }
        Some(Ok(phi))
    }
}

fn validate(tol: f64, max_iter: usize) -> Result<()> {
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    if max_iter == 0 {
        return Err(Error::InvalidParameter("max_iter must be positive".into()));
    }
    Ok(())
}

/// Running statistics used by the stopping rules.
struct Monitor {
    ratios: Vec<f64>,
    tails: Vec<f64>,
}

impl Monitor {
    fn r_hat(&self) -> Option<f64> {
        let n = self.ratios.len();
        if n == 0 {
            return None;
        }
        Some(
            self.ratios[n.saturating_sub(RATIO_WINDOW)..]
                .iter()
                .copied()
                .fold(0.0, f64::max),
        )
    }

    fn push(&mut self, prev: f64, cur: f64) {
        let r = if prev > 0.0 { cur / prev } else { f64::INFINITY };
        self.ratios.push(r);
        let r_hat = self.r_hat().unwrap_or(r);
        self.tails.push(if r_hat < 1.0 {
            cur * r_hat / (1.0 - r_hat)
        } else {
            f64::INFINITY
        });
    }

    fn stagnating(&self) -> bool {
        let n = self.tails.len();
        if n <= STAGNATION_WINDOW {
            return false;
        }
        let r_hat = self.r_hat().unwrap_or(0.0);
        if !(SLOW_RATIO..=1.0 / STAGNATION_FACTOR).contains(&r_hat) {
            return false;
        }
        self.tails[n - STAGNATION_WINDOW - 1..]
            .windows(2)
            .all(|w| w[1] >= STAGNATION_FACTOR * w[0])
    }
}

/// Sums the Neumann series of `spec` until a stopping rule fires.
///
/// `c_hint`, when below one, is a contraction constant for `P` and enables
/// the proven tail bound; otherwise the ratio heuristic is used.
pub fn neumann_solve(spec: &EquationSpec, tol: f64, max_iter: usize, c_hint: Option<f64>) -> Result<SolveResult> {
    validate(tol, max_iter)?;
    let c = c_hint.filter(|c| (0.0..1.0).contains(c));
    let g_norm = spec.g().l1_norm();
    let mut term_norms = Vec::new();
    let mut partial_norms = Vec::new();
    let mut monitor = Monitor {
        ratios: Vec::new(),
        tails: Vec::new(),
    };
    let mut heuristic = false;

    let mut last_sum = None;
    let mut status = Status::MaxIterReached;
    for step in NeumannSeries::new(spec) {
        let step = step?;
        let k = step.k;
        let t = step.term.l1_norm();
        let s = step.partial_sum.l1_norm();
        if let Some(&prev) = term_norms.last() {
            monitor.push(prev, t);
        }
        term_norms.push(t);
        partial_norms.push(s);
        last_sum = Some(step.partial_sum);

        if t <= ZERO_TERM_RELATIVE * g_norm {
            status = Status::FiniteSum;
            break;
        }
        let converged = match c {
            Some(c) => apriori_error(c, k, g_norm)? <= tol,
            None => match monitor.r_hat() {
                Some(r) if r < 1.0 && t <= tol * (1.0 - r) => {
                    heuristic = true;
                    true
                }
                _ => false,
            },
        };
        if converged {
            status = Status::Converged;
            break;
        }
        if s > GROWTH_CAP * (1.0 + g_norm) {
            status = Status::DivergentGrowing;
            break;
        }
        if c.is_none() && monitor.stagnating() {
            let start = partial_norms.len() - STAGNATION_WINDOW;
            let before = partial_norms[..start].iter().copied().fold(0.0, f64::max);
            let within = partial_norms[start..].iter().copied().fold(0.0, f64::max);
            status = if within <= (1.0 + 1e-3) * before {
                Status::DivergentOscillating
            } else {
                Status::DivergentGrowing
            };
            break;
        }
        if k >= max_iter {
            break;
        }
    }

    let phi0 = last_sum.expect("the series yields at least one term");
    let m_stop = term_norms.len() - 1;
    Ok(SolveResult {
        residual: residual(spec, &phi0)?,
        phi0,
        status,
        m_stop,
        term_norms,
        partial_norms,
        c_hint: c,
        apriori_bound: c.map(|c| apriori_error(c, m_stop, g_norm)).transpose()?,
        heuristic,
    })
}

/// Picard iteration from `start` for a contraction with constant `c < 1`;
/// stops once `‖φ_{j+1} − φ_j‖ ≤ tol·(1 − c)`.
pub fn picard_solve(
    spec: &EquationSpec,
    start: GridFunction,
    tol: f64,
    max_iter: usize,
    c: f64,
) -> Result<SolveResult> {
    validate(tol, max_iter)?;
    if !(0.0..1.0).contains(&c) {
        return Err(Error::NotContraction(c));
    }
    if start.resolution() != spec.resolution() {
        return Err(Error::ResolutionMismatch {
            left: spec.resolution(),
            right: start.resolution(),
        });
    }
    let mut term_norms = vec![start.l1_norm()];
    let mut partial_norms = vec![start.l1_norm()];
    let mut iter = PicardIteration::new(spec, start);
    let mut prev = iter.next().expect("first iterate")?;
    let mut status = Status::MaxIterReached;
    let mut first_step = None;
    for j in 1..=max_iter {
        let phi = iter.next().expect("infinite iteration")?;
        let step = phi.l1_distance(&prev)?;
        first_step.get_or_insert(step);
        term_norms.push(step);
        partial_norms.push(phi.l1_norm());
        prev = phi;
        if step <= tol * (1.0 - c) {
            status = Status::Converged;
            break;
        }
        if j == max_iter {
            break;
        }
    }
    let m_stop = term_norms.len() - 1;
    let d1 = first_step.unwrap_or(0.0);
    Ok(SolveResult {
        residual: residual(spec, &prev)?,
        phi0: prev,
        status,
        m_stop,
        term_norms,
        partial_norms,
        c_hint: Some(c),
        apriori_bound: Some(c.powi(m_stop as i32) / (1.0 - c) * d1),
        heuristic: false,
    })
}

/// Outcome of the monotonicity-preservation check.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Regularity {
    /// Some datum is not nondecreasing and nonnegative.
    NotApplicable { reason: String },
    /// Every checked iterate `P^k g` is nondecreasing.
    Preserved { iterates: usize },
    /// `P^k g` decreases between nodes `node` and `node + 1`.
    Violated { k: usize, node: usize },
}

/// Number of iterates inspected by [`check_regularity_preservation`].
pub const REGULARITY_ITERATES: usize = 20;

fn nondecreasing(v: &[f64], tol: f64) -> Option<usize> {
    v.windows(2).position(|w| w[1] < w[0] - tol)
}

/// Checks that `P^k g` stays nondecreasing for `k ≤ 20` when every map,
/// every coefficient and `g` are nondecreasing and every coefficient and
/// `g` are nonnegative on the grid.
pub fn check_regularity_preservation(spec: &EquationSpec) -> Result<Regularity> {
    let not_applicable = |reason: String| Ok(Regularity::NotApplicable { reason });
    for n in 0..spec.n_terms() {
        if nondecreasing(spec.image_samples(n), 1e-12).is_some() {
            return not_applicable(format!("f{} is not nondecreasing", n + 1));
        }
        let coef = spec.coefficient_samples(n);
        if nondecreasing(coef, 1e-12).is_some() {
            return not_applicable(format!("g{} is not nondecreasing", n + 1));
        }
        if coef.iter().any(|&v| v < 0.0) {
            return not_applicable(format!("g{} takes negative values", n + 1));
        }
    }
    let g = spec.g().samples();
    if nondecreasing(g, 1e-12).is_some() {
        return not_applicable("g is not nondecreasing".into());
    }
    if g.iter().any(|&v| v < 0.0) {
        return not_applicable("g takes negative values".into());
    }
    let mut t = spec.g().clone();
    for k in 0..=REGULARITY_ITERATES {
        if let Some(node) = nondecreasing(t.samples(), 1e-10) {
            return Ok(Regularity::Violated { k, node });
        }
        t = spec.apply(&t)?;
    }
    Ok(Regularity::Preserved {
        iterates: REGULARITY_ITERATES + 1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const M: usize = 256;

    fn sec5(a: f64, b: f64) -> EquationSpec {
        EquationSpec::from_strs(
            &["x/2", "(x+1)/2"],
            &[&a.to_string(), &a.to_string()],
            &b.to_string(),
            M,
        )
        .unwrap()
    }

    #[test]
    fn apriori_values() {
        assert_eq!(apriori_error(0.8, 0, 1.0).unwrap(), 0.8 / 0.19999999999999996);
        assert!((apriori_error(0.8, 0, 1.0).unwrap() - 4.0).abs() < 1e-14);
        assert_eq!(apriori_error(0.0, 7, 3.0).unwrap(), 0.0);
        assert_eq!(apriori_error(0.5, 9, 2.0).unwrap(), 1.0 / 256.0);
        assert_eq!(apriori_error(1.0, 1, 1.0).unwrap_err(), Error::NotContraction(1.0));
    }

    #[test]
    fn converges_to_constant() {
        let r = neumann_solve(&sec5(0.4, 1.0), 1e-8, 500, Some(0.8)).unwrap();
        assert_eq!(r.status, Status::Converged);
        assert!(r.phi0.samples().iter().all(|v| (v - 5.0).abs() < 1e-7));
        assert!(r.apriori_bound.unwrap() <= 1e-8);
        assert!(!r.heuristic);
        assert_eq!(r.term_norms.len(), r.m_stop + 1);
    }

    #[test]
    fn ratio_heuristic_without_hint() {
        let r = neumann_solve(&sec5(0.25, 1.0), 1e-9, 500, None).unwrap();
        assert_eq!(r.status, Status::Converged);
        assert!(r.heuristic);
        assert!(r.phi0.samples().iter().all(|v| (v - 2.0).abs() < 1e-8));
        assert!(r.residual <= 1e-9 * 1.5);
    }

    #[test]
    fn zero_rhs_is_a_finite_sum() {
        let r = neumann_solve(&sec5(0.6, 0.0), 1e-6, 100, None).unwrap();
        assert_eq!(r.status, Status::FiniteSum);
        assert_eq!(r.m_stop, 0);
        assert_eq!(r.phi0.sup_norm(), 0.0);
    }

    #[test]
    fn nilpotent_operator_is_a_finite_sum() {
        // P h = x·h(0): P g = x·g(0), P² g = x·(P g)(0) = 0
        let spec = EquationSpec::from_strs(&["0"], &["x"], "1", M).unwrap();
        let r = neumann_solve(&spec, 1e-6, 100, None).unwrap();
        assert_eq!(r.status, Status::FiniteSum);
        assert_eq!(r.m_stop, 2);
        for (x, v) in r.phi0.nodes() {
            assert!((v - (1.0 + x)).abs() < 1e-15);
        }
    }

    #[test]
    fn oscillation_detected() {
        let r = neumann_solve(&sec5(-0.5, 1.0), 1e-6, 1000, None).unwrap();
        assert_eq!(r.status, Status::DivergentOscillating);
        assert!(r.m_stop <= STAGNATION_WINDOW + 2);
    }

    #[test]
    fn linear_growth_detected() {
        let r = neumann_solve(&sec5(0.5, 1.0), 1e-6, 1000, None).unwrap();
        assert_eq!(r.status, Status::DivergentGrowing);
    }

    #[test]
    fn geometric_growth_hits_cap() {
        let r = neumann_solve(&sec5(0.6, 1.0), 1e-6, 1000, None).unwrap();
        assert_eq!(r.status, Status::DivergentGrowing);
        assert!(*r.partial_norms.last().unwrap() > GROWTH_CAP * 2.0);
        let r = neumann_solve(&sec5(-0.7, 1.0), 1e-6, 1000, None).unwrap();
        assert_eq!(r.status, Status::DivergentGrowing);
    }

    #[test]
    fn max_iter_respected() {
        let r = neumann_solve(&sec5(0.45, 1.0), 1e-12, 10, None).unwrap();
        assert_eq!(r.status, Status::MaxIterReached);
        assert_eq!(r.m_stop, 10);
    }

    #[test]
    fn invalid_parameters() {
        assert!(matches!(
            neumann_solve(&sec5(0.4, 1.0), 0.0, 10, None),
            Err(Error::InvalidParameter(_))
        ));
        assert!(matches!(
            neumann_solve(&sec5(0.4, 1.0), 1e-6, 0, None),
            Err(Error::InvalidParameter(_))
        ));
        let g = sec5(0.4, 1.0).g().clone();
        assert_eq!(
            picard_solve(&sec5(0.4, 1.0), g, 1e-6, 10, 1.0).unwrap_err(),
            Error::NotContraction(1.0)
        );
    }

    #[test]
    fn picard_from_exact_solution_stops_immediately() {
        let spec = sec5(0.4, 1.0);
        let exact = GridFunction::constant(M, 5.0).unwrap();
        let r = picard_solve(&spec, exact, 1e-8, 100, 0.8).unwrap();
        assert_eq!(r.status, Status::Converged);
        assert_eq!(r.m_stop, 1);
    }

    #[test]
    fn picard_matches_partial_sums() {
        let spec = sec5(0.3, 2.0);
        let series = NeumannSeries::new(&spec).take(30).map(|s| s.unwrap().partial_sum);
        let picard = PicardIteration::new(&spec, spec.g().clone())
            .take(30)
            .map(|p| p.unwrap());
        for (s, p) in series.zip(picard) {
            assert!(s.l1_distance(&p).unwrap() <= 1e-12);
        }
    }

    #[test]
    fn residual_of_exact_constant() {
        let spec = sec5(-0.5, 1.0);
        let half = GridFunction::constant(M, 0.5).unwrap();
        assert!(residual(&spec, &half).unwrap() <= 1e-12);
    }

    #[test]
    fn trace_rows() {
        let r = neumann_solve(&sec5(0.25, 1.0), 1e-6, 100, Some(0.5)).unwrap();
        let rows: Vec<_> = r.trace().collect();
        assert_eq!(rows.len(), r.m_stop + 1);
        assert_eq!(rows[0], (0, 1.0, 1.0, Some(1.0)));
    }

    #[test]
    fn regularity_of_constant_data() {
        assert_eq!(
            check_regularity_preservation(&sec5(0.25, 1.0)).unwrap(),
            Regularity::Preserved { iterates: 21 }
        );
        let spec = EquationSpec::from_strs(&["x", "x"], &["1 - x", "0.2"], "1", M).unwrap();
        assert!(matches!(
            check_regularity_preservation(&spec).unwrap(),
            Regularity::NotApplicable { .. }
        ));
    }
}
