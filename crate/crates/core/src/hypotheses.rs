//! Numerical certification of the standing hypotheses and constants.
//!
//! Suprema and infima are taken over dense grids of `10·M` intervals. On
//! the piecewise-smooth data used here grid suprema converge to essential
//! suprema; the closed grid (endpoints included) is used for the constant
//! `C` so that suprema attained at the boundary are found exactly, while the
//! strict inequality `KL|gₙ| < |fₙ'|` is only tested off the breakpoints.

use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::funcrep::{node, GridFunction};
use crate::operator::{max_overlap, merge_intervals, EquationSpec, ZERO_DERIVATIVE};
use crate::solver::ZERO_TERM_RELATIVE;

/// Coefficients at or below this magnitude count as zero.
pub const ZERO_COEFFICIENT: f64 = 1e-12;
/// Tolerance for `Σₙ gₙ = 1`.
pub const SUM_TO_ONE_TOLERANCE: f64 = 1e-9;
/// Default truncation of the infimum over `k`.
pub const DEFAULT_K_MAX: usize = 40;

fn dense_grid(spec: &EquationSpec) -> usize {
    10 * spec.resolution()
}

/// Largest `m` such that some `m` of the images `fₙ([0,1])` share a set of
/// positive length.
pub fn compute_l(spec: &EquationSpec) -> usize {
    let unions: Vec<Vec<(f64, f64)>> = spec.maps().iter().map(|m| m.image_intervals()).collect();
    // a union of disjoint intervals contributes at most one to the coverage
    let all: Vec<(f64, f64)> = unions.iter().flatten().copied().collect();
    max_overlap(&all)
}

/// Essential bound `K` on the number of preimages, maximised over the maps.
pub fn estimate_k(spec: &EquationSpec) -> usize {
    spec.maps().iter().map(|m| m.max_multiplicity()).max().unwrap_or(0)
}

/// Smallest `C` with `|gₙ| ≤ (C/KL)|fₙ'|` for the single index `n`
/// (0-based); `+∞` when `gₙ ≠ 0` somewhere `fₙ' = 0`.
pub fn estimate_c_for(spec: &EquationSpec, n: usize, k: usize, l: usize) -> f64 {
    let grid = dense_grid(spec);
    let kl = (k * l) as f64;
    let (coef, deriv) = (&spec.coeffs()[n], spec.maps()[n].derivative());
    let mut sup: f64 = 0.0;
    for i in 0..=grid {
        let x = node(i, grid);
        let g = coef.eval(x);
        if !g.is_finite() {
            return f64::INFINITY;
        }
        if g.abs() <= ZERO_COEFFICIENT {
            continue;
        }
        let d = deriv.eval(x);
        if d.is_nan() {
            continue;
        }
        if d.abs() <= ZERO_DERIVATIVE {
            return f64::INFINITY;
        }
        sup = sup.max(kl * g.abs() / d.abs());
    }
    sup
}

/// Smallest `C` with `|gₙ| ≤ (C/KL)|fₙ'|` for every `n`.
pub fn estimate_c(spec: &EquationSpec, k: usize, l: usize) -> f64 {
    (0..spec.n_terms())
        .map(|n| estimate_c_for(spec, n, k, l))
        .fold(0.0, f64::max)
}

/// Strict `KL|gₙ(x)| < |fₙ'(x)|` at every dense-grid point that is not a
/// breakpoint of `fₙ`.
pub fn check_c1(spec: &EquationSpec, k: usize, l: usize) -> bool {
    let grid = dense_grid(spec);
    let kl = (k * l) as f64;
    spec.maps().iter().zip(spec.coeffs()).all(|(map, coef)| {
        let bps = map.breakpoints();
        (0..=grid).map(|i| node(i, grid)).all(|x| {
            if bps.iter().any(|b| (b - x).abs() <= 1e-12) {
                return true;
            }
            let d = map.derivative().eval(x);
            if d.is_nan() {
                return true;
            }
            kl * coef.eval(x).abs() < d.abs()
        })
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SumConditions {
    /// `Σₙ ∫|gₙ|`.
    pub sum_int_gn: f64,
    /// `Σₙ gₙ = 1` on the grid, i.e. `P1 = 1`.
    pub sum_gn_is_one: bool,
}

pub fn check_sum_conditions(spec: &EquationSpec) -> SumConditions {
    let m = spec.resolution();
    let sum_int_gn = (0..spec.n_terms())
        .map(|n| GridFunction::from_finite(spec.coefficient_samples(n).to_vec()).l1_norm())
        .sum();
    let max_dev = (0..=m)
        .map(|i| {
            let s: f64 = (0..spec.n_terms()).map(|n| spec.coefficient_samples(n)[i]).sum();
            (s - 1.0).abs()
        })
        .fold(0.0, f64::max);
    SumConditions {
        sum_int_gn,
        sum_gn_is_one: max_dev <= SUM_TO_ONE_TOLERANCE,
    }
}

/// Per-map diagnostics for the single-map contraction criterion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WitnessRow {
    /// 1-based map index.
    pub m: usize,
    /// Smallest `C` for this map alone.
    pub c_m: f64,
    /// `min_k ∫_{f_m([0,1])} |P^k g| / ‖P^k g‖` over `k ≤ k_max`.
    pub inf_ratio: f64,
    /// The `k` attaining `inf_ratio`.
    pub argmin_k: usize,
    /// Guaranteed decay rate `1 − (1 − C_m)/L · inf_ratio`.
    pub alpha: Option<f64>,
    pub witness: bool,
}

/// Evaluates, for each map, the constant `C_m` and the infimum ratio of the
/// mass of `P^k g` on `f_m([0,1])`. Fails with `DegenerateInstance` when
/// some `P^k g` vanishes; the series is then a finite sum.
pub fn check_local_contraction(spec: &EquationSpec, k_max: usize) -> Result<Vec<WitnessRow>> {
    let k_const = estimate_k(spec).max(1);
    let l_const = compute_l(spec).max(1);
    let g_norm = spec.g().l1_norm();
    let mut terms = Vec::with_capacity(k_max + 1);
    let mut t = spec.g().clone();
    for k in 0..=k_max {
        let norm = t.l1_norm();
        if norm <= ZERO_TERM_RELATIVE * g_norm || norm == 0.0 {
            return Err(Error::DegenerateInstance { k });
        }
        let next = spec.apply(&t)?;
        terms.push((std::mem::replace(&mut t, next), norm));
    }
    let rows = spec
        .maps()
        .iter()
        .enumerate()
        .map(|(idx, map)| {
            let image = merge_intervals(&mut map.image_intervals());
            let (mut inf_ratio, mut argmin_k) = (f64::INFINITY, 0);
            for (k, (t, norm)) in terms.iter().enumerate() {
                let mass: f64 = image.iter().map(|&(a, b)| t.l1_norm_on(a, b)).sum();
                let r = mass / norm;
                if r < inf_ratio {
                    inf_ratio = r;
                    argmin_k = k;
                }
            }
            let c_m = estimate_c_for(spec, idx, k_const, l_const);
            let witness = c_m < 1.0 && inf_ratio > 0.0;
            WitnessRow {
                m: idx + 1,
                c_m,
                inf_ratio,
                argmin_k,
                alpha: witness.then(|| 1.0 - (1.0 - c_m) / l_const as f64 * inf_ratio),
                witness,
            }
        })
        .collect();
    Ok(rows)
}

/// Outcome of the single-map criterion.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LocalContraction {
    Rows {
        k_max: usize,
        rows: Vec<WitnessRow>,
    },
    /// `P^k g = 0`; the elementary solution is a finite sum.
    FiniteSum {
        k: usize,
    },
}

impl LocalContraction {
    pub fn witness(&self) -> Option<&WitnessRow> {
        match self {
            LocalContraction::Rows { rows, .. } => rows.iter().find(|r| r.witness),
            LocalContraction::FiniteSum { .. } => None,
        }
    }
}

/// Everything the checker certifies about an equation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HypothesisReport {
    pub k: usize,
    pub l: usize,
    /// `+∞` serialises as `null`.
    pub c_est: f64,
    pub holds_c: bool,
    /// `1 − C`; positive when the contraction bound holds.
    pub c_margin: f64,
    pub holds_c1: bool,
    pub sum_int_gn: f64,
    pub sum_gn_is_one: bool,
    pub local_contraction: LocalContraction,
    /// How the measurability and Luzin hypotheses were discharged.
    pub certification: String,
    pub notes: Vec<String>,
}

impl HypothesisReport {
    /// Runs every check with the default `k_max`.
    pub fn check(spec: &EquationSpec) -> Result<Self> {
        Self::check_with(spec, DEFAULT_K_MAX)
    }

    pub fn check_with(spec: &EquationSpec, k_max: usize) -> Result<Self> {
        let mut notes = Vec::new();
        let mut k = estimate_k(spec);
        if k == 0 {
            notes.push("every piece of every map is flat; K taken as 1".to_string());
            k = 1;
        }
        let mut l = compute_l(spec);
        if l == 0 {
            notes.push("all images are null sets; L taken as 1".to_string());
            l = 1;
        }
        for (i, map) in spec.maps().iter().enumerate() {
            if map.has_flat_pieces() {
                notes.push(format!(
                    "f{} has flat pieces: preimages of null sets may have positive measure (H3 not certified)",
                    i + 1
                ));
            }
        }
        let c_est = estimate_c(spec, k, l);
        let holds_c1 = check_c1(spec, k, l);
        let sums = check_sum_conditions(spec);
        if holds_c1 && sums.sum_int_gn >= 1.0 + 1e-6 {
            notes.push(format!(
                "strict bound holds on the grid but sum of integrals is {}",
                sums.sum_int_gn
            ));
        }
        let local_contraction = match check_local_contraction(spec, k_max) {
            Ok(rows) => LocalContraction::Rows { k_max, rows },
            Err(Error::DegenerateInstance { k }) => {
                notes.push(format!("P^{k} g vanishes: the elementary solution is a finite sum"));
                LocalContraction::FiniteSum { k }
            }
            Err(e) => return Err(e),
        };
        Ok(Self {
            k,
            l,
            c_est,
            holds_c: c_est < 1.0,
            c_margin: 1.0 - c_est,
            holds_c1,
            sum_int_gn: sums.sum_int_gn,
            sum_gn_is_one: sums.sum_gn_is_one,
            local_contraction,
            certification: "structural".to_string(),
            notes,
        })
    }

    /// `C` if it certifies a contraction.
    pub fn contraction_constant(&self) -> Option<f64> {
        self.holds_c.then_some(self.c_est)
    }

    /// A usable single-map witness (requires the strict bound as well).
    pub fn local_witness(&self) -> Option<&WitnessRow> {
        if self.holds_c1 {
            self.local_contraction.witness()
        } else {
            None
        }
    }
}

impl fmt::Display for HypothesisReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "K = {}", self.k)?;
        writeln!(f, "L = {}", self.l)?;
        writeln!(f, "C = {}", self.c_est)?;
        writeln!(f, "contraction (C < 1) = {}", self.holds_c)?;
        writeln!(f, "strict bound KL|g_n| < |f_n'| = {}", self.holds_c1)?;
        writeln!(f, "sum of int |g_n| = {}", self.sum_int_gn)?;
        writeln!(f, "sum of g_n = 1 = {}", self.sum_gn_is_one)?;
        writeln!(f, "certification = {}", self.certification)?;
        match &self.local_contraction {
            LocalContraction::Rows { k_max, rows } => {
                writeln!(f, "single-map criterion (k <= {k_max}):")?;
                writeln!(
                    f,
                    "  {:>3} {:>22} {:>22} {:>5} {:>22} witness",
                    "m", "C_m", "inf_ratio", "k*", "alpha"
                )?;
                for r in rows {
                    let alpha = r.alpha.map_or("-".to_string(), |a| a.to_string());
                    writeln!(
                        f,
                        "  {:>3} {:>22} {:>22} {:>5} {:>22} {}",
                        r.m, r.c_m, r.inf_ratio, r.argmin_k, alpha, r.witness
                    )?;
                }
            }
            LocalContraction::FiniteSum { k } => writeln!(f, "single-map criterion: P^{k} g = 0 (finite sum)")?,
        }
        for n in &self.notes {
            writeln!(f, "note: {n}")?;
        }
        Ok(())
    }
}
