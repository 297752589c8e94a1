//! The operator `Ph = Σₙ gₙ·(h∘fₙ)` and the geometry of its maps.
//!
//! Maps are restricted to piecewise-monotone, piecewise-C¹ functions
//! `[0,1] → [0,1]` with finitely many pieces. For such maps the classical
//! derivative agrees almost everywhere with the approximate derivative,
//! Luzin's condition N holds, and the Banach indicatrix is determined by
//! the value ranges of the pieces.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::expr::{differentiate, Expr};
use crate::funcrep::{check_resolution, node, GridFunction};
use crate::quadrature::{cells_for, gauss_legendre};

/// Images may overshoot [0, 1] by this much before being rejected.
pub const RANGE_TOLERANCE: f64 = 1e-12;
/// Derivative magnitudes at or below this count as zero.
pub const ZERO_DERIVATIVE: f64 = 1e-12;
/// Intervals shorter than this are treated as null sets.
pub const NULL_LENGTH: f64 = 1e-12;

/// A maximal interval on which a map is monotone and C¹.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Piece {
    pub start: f64,
    pub end: f64,
    /// Infimum of the map over the piece.
    pub lo: f64,
    /// Supremum of the map over the piece.
    pub hi: f64,
    /// Derivative vanishes identically on the piece.
    pub flat: bool,
}

impl Piece {
    fn covers(&self, y: f64) -> bool {
        !self.flat && self.lo <= y && y <= self.hi
    }
}

/// Value of the Banach indicatrix at a point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Indicatrix {
    pub count: usize,
    /// Number of flat pieces sitting at the queried level; each adds one
    /// to `count` even though its preimage is a whole interval.
    pub flat_hits: usize,
}

/// A map `f: [0,1] → [0,1]` with its symbolic derivative and monotone pieces.
#[derive(Debug, Clone, PartialEq)]
pub struct MapSpec {
    expr: Expr,
    derivative: Expr,
    breakpoints: Vec<f64>,
    pieces: Vec<Piece>,
}

impl MapSpec {
    /// Builds a map, locating its breakpoints automatically: kinks of
    /// `abs`/`mod1`/`floor`/`sign` calls and sign changes of the derivative.
    /// Validation samples a grid of `10·m` intervals.
    pub fn new(expr: Expr, m: usize) -> Result<Self> {
        check_resolution(m)?;
        let derivative = differentiate(&expr)?;
        let breakpoints = detect_breakpoints(&expr, &derivative, 10 * m);
        Self::build(expr, derivative, breakpoints, m)
    }

    /// Builds a map with caller-supplied breakpoints (0 and 1 are added
    /// when missing). The derivative must keep one sign on every piece.
    pub fn with_breakpoints(expr: Expr, breakpoints: &[f64], m: usize) -> Result<Self> {
        check_resolution(m)?;
        let invalid = |reason: String| Error::InvalidMap {
            expr: expr.to_string(),
            reason,
        };
        if let Some(b) = breakpoints.iter().find(|b| !(0.0..=1.0).contains(*b)) {
            return Err(invalid(format!("breakpoint {b} outside [0, 1]")));
        }
        if breakpoints.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid("breakpoints must be strictly increasing".into()));
        }
        let mut bps = breakpoints.to_vec();
        if bps.first() != Some(&0.0) {
            bps.insert(0, 0.0);
        }
        if bps.last() != Some(&1.0) {
            bps.push(1.0);
        }
        let derivative = differentiate(&expr)?;
        Self::build(expr, derivative, bps, m)
    }

    fn build(expr: Expr, derivative: Expr, breakpoints: Vec<f64>, m: usize) -> Result<Self> {
        let invalid = |reason: String| Error::InvalidMap {
            expr: expr.to_string(),
            reason,
        };
        let grid = 10 * m;
        for i in 0..=grid {
            let x = node(i, grid);
            let y = expr.eval(x);
            if !y.is_finite() {
                return Err(Error::Evaluation {
                    expr: expr.to_string(),
                    x,
                });
            }
            if !(-RANGE_TOLERANCE..=1.0 + RANGE_TOLERANCE).contains(&y) {
                return Err(invalid(format!("f({x}) = {y} lies outside [0, 1]")));
            }
        }

        let mut pieces = Vec::with_capacity(breakpoints.len() - 1);
        for w in breakpoints.windows(2) {
            let (a, b) = (w[0], w[1]);
            let (mut pos, mut neg) = (false, false);
            for x in interior_points(a, b, grid) {
                let d = derivative.eval(x);
                if !d.is_finite() {
                    continue;
                }
                pos |= d > ZERO_DERIVATIVE;
                neg |= d < -ZERO_DERIVATIVE;
            }
            if pos && neg {
                return Err(invalid(format!("derivative changes sign on [{a}, {b}]")));
            }
            let (ya, yb) = (limit_at(&expr, &derivative, a, b), limit_at(&expr, &derivative, b, a));
            pieces.push(Piece {
                start: a,
                end: b,
                lo: ya.min(yb).clamp(0.0, 1.0),
                hi: ya.max(yb).clamp(0.0, 1.0),
                flat: !pos && !neg,
            });
        }
        Ok(Self {
            expr,
            derivative,
            breakpoints,
            pieces,
        })
    }

    pub fn expr(&self) -> &Expr {
        &self.expr
    }

    pub fn derivative(&self) -> &Expr {
        &self.derivative
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    pub fn has_flat_pieces(&self) -> bool {
        self.pieces.iter().any(|p| p.flat)
    }

    /// Pieces restricted to `[a, b]`, with value ranges recomputed.
    pub fn pieces_on(&self, a: f64, b: f64) -> Vec<Piece> {
        self.pieces
            .iter()
            .filter_map(|p| {
                let (s, e) = (p.start.max(a), p.end.min(b));
                if e <= s {
                    return None;
                }
                if s == p.start && e == p.end {
                    return Some(*p);
                }
                let (ys, ye) = (
                    limit_at(&self.expr, &self.derivative, s, e),
                    limit_at(&self.expr, &self.derivative, e, s),
                );
                Some(Piece {
                    start: s,
                    end: e,
                    lo: ys.min(ye).clamp(0.0, 1.0),
                    hi: ys.max(ye).clamp(0.0, 1.0),
                    flat: p.flat,
                })
            })
            .collect()
    }

    /// `f([0,1])` as sorted disjoint closed intervals.
    pub fn image_intervals(&self) -> Vec<(f64, f64)> {
        let mut ivs: Vec<(f64, f64)> = self.pieces.iter().map(|p| (p.lo, p.hi)).collect();
        merge_intervals(&mut ivs)
    }

    /// Number of pieces whose value range contains `y`. Equals the number
    /// of solutions of `f(x) = y` except on a finite set of levels.
    pub fn banach_indicatrix(&self, y: f64) -> Indicatrix {
        indicatrix_of(&self.pieces, y)
    }

    /// Essential supremum of the indicatrix over `y`: the largest number of
    /// non-flat piece ranges sharing an interval of positive length.
    pub fn max_multiplicity(&self) -> usize {
        let ranges: Vec<(f64, f64)> = self.pieces.iter().filter(|p| !p.flat).map(|p| (p.lo, p.hi)).collect();
        max_overlap(&ranges)
    }
}

fn indicatrix_of(pieces: &[Piece], y: f64) -> Indicatrix {
    let count = pieces.iter().filter(|p| p.covers(y)).count();
    let flat_hits = pieces
        .iter()
        .filter(|p| p.flat && (p.lo - y).abs() <= RANGE_TOLERANCE)
        .count();
    Indicatrix {
        count: count + flat_hits,
        flat_hits,
    }
}

/// Grid points strictly inside `(a, b)` plus the midpoint.
fn interior_points(a: f64, b: f64, grid: usize) -> impl Iterator<Item = f64> {
    let g = grid as f64;
    let first = (a * g).floor() as usize + 1;
    let last = ((b * g).ceil() as usize).saturating_sub(1);
    (first..=last)
        .map(move |i| i as f64 / g)
        .filter(move |&x| x > a && x < b)
        .chain(std::iter::once(0.5 * (a + b)))
}

/// One-sided limit of `f` at `x` from the side of `inner`.
fn limit_at(f: &Expr, df: &Expr, x: f64, inner: f64) -> f64 {
    let eta = (1e-9f64).min(0.25 * (inner - x).abs());
    let dir = if inner > x { 1.0 } else { -1.0 };
    let xn = x + dir * eta;
    let (fx, fn_) = (f.eval(x), f.eval(xn));
    if fx.is_finite() && (fx - fn_).abs() <= 1e-6 {
        return fx;
    }
    // jump at x: first-order extrapolation from inside the piece
    let slope = df.eval(xn);
    if slope.is_finite() {
        fn_ - dir * eta * slope
    } else {
        fn_
    }
}

/// Sorts and merges intervals that overlap or touch.
pub(crate) fn merge_intervals(ivs: &mut [(f64, f64)]) -> Vec<(f64, f64)> {
    ivs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let mut out: Vec<(f64, f64)> = Vec::with_capacity(ivs.len());
    for &(lo, hi) in ivs.iter() {
        match out.last_mut() {
            Some(last) if lo <= last.1 + NULL_LENGTH => last.1 = last.1.max(hi),
            _ => out.push((lo, hi)),
        }
    }
    out
}

/// Largest number of closed intervals that share a subinterval longer than
/// [`NULL_LENGTH`].
pub(crate) fn max_overlap(ivs: &[(f64, f64)]) -> usize {
    let mut cuts: Vec<f64> = ivs.iter().flat_map(|&(a, b)| [a, b]).collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    cuts.windows(2)
        .filter(|w| w[1] - w[0] > NULL_LENGTH)
        .map(|w| {
            let mid = 0.5 * (w[0] + w[1]);
            ivs.iter().filter(|&&(a, b)| a <= mid && mid <= b).count()
        })
        .max()
        .unwrap_or(0)
}

/// Finds the first point where `class` changes between `lo` (class `c`)
/// and `hi`.
fn bisect_boundary(mut lo: f64, mut hi: f64, class: impl Fn(f64) -> i64) -> f64 {
    let c = class(lo);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if class(mid) == c {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

fn detect_breakpoints(expr: &Expr, derivative: &Expr, grid: usize) -> Vec<f64> {
    let xs: Vec<f64> = (0..=grid).map(|i| node(i, grid)).collect();
    let mut bps = vec![0.0, 1.0];

    for arg in expr.kink_arguments() {
        // integer crossings cover mod1/floor; they include the zero crossings of abs/sign
        let class = |x: f64| -> i64 {
            let u = arg.eval(x);
            if u.is_finite() {
                u.floor() as i64
            } else {
                i64::MIN
            }
        };
        let mut prev = class(xs[0]);
        for w in xs.windows(2) {
            let cur = class(w[1]);
            if cur != prev {
                bps.push(bisect_boundary(w[0], w[1], class));
            }
            prev = cur;
        }
    }

    let sign = |x: f64| -> i64 {
        let d = derivative.eval(x);
        if d > ZERO_DERIVATIVE {
            1
        } else if d < -ZERO_DERIVATIVE {
            -1
        } else {
            0
        }
    };
    let mut last: Option<(f64, i64)> = None;
    for &x in &xs {
        let s = sign(x);
        if s == 0 {
            continue;
        }
        if let Some((xp, sp)) = last {
            if sp != s {
                bps.push(bisect_boundary(xp, x, |t| if sign(t) == sp { sp } else { 0 }));
            }
        }
        last = Some((x, s));
    }

    bps.sort_by(f64::total_cmp);
    let mut out: Vec<f64> = Vec::with_capacity(bps.len());
    for b in bps {
        if out.last().is_none_or(|&l| b - l > NULL_LENGTH) {
            out.push(b);
        }
    }
    // keep 1 itself as the final breakpoint
    if let Some(l) = out.last_mut() {
        if 1.0 - *l <= NULL_LENGTH {
            *l = 1.0;
        }
    }
    out
}

/// Right-hand side data `g`: an expression or tabulated values.
#[derive(Debug, Clone, PartialEq)]
pub enum Inhomogeneity {
    Expr(Expr),
    Grid(GridFunction),
}

/// Per-map data at the grid nodes: `gₙ(xᵢ)` and `fₙ(xᵢ)`.
#[derive(Debug, Clone, PartialEq)]
struct Term {
    coef: Vec<f64>,
    image: Vec<f64>,
}

/// A full instance of `φ = Pφ + g` at a fixed grid resolution.
#[derive(Debug, Clone, PartialEq)]
pub struct EquationSpec {
    maps: Vec<MapSpec>,
    coeffs: Vec<Expr>,
    inhom: Inhomogeneity,
    resolution: usize,
    c_hint: Option<f64>,
    g: GridFunction,
    terms: Vec<Term>,
}

impl EquationSpec {
    pub fn new(maps: Vec<MapSpec>, coeffs: Vec<Expr>, inhom: Inhomogeneity, m: usize) -> Result<Self> {
        check_resolution(m)?;
        if maps.is_empty() {
            return Err(Error::InvalidSpec("at least one map is required".into()));
        }
        if maps.len() != coeffs.len() {
            return Err(Error::InvalidSpec(format!(
                "{} maps but {} coefficients",
                maps.len(),
                coeffs.len()
            )));
        }
        let g = match &inhom {
            Inhomogeneity::Expr(e) => GridFunction::sample(e, m)?,
            Inhomogeneity::Grid(h) => h.refine(m)?,
        };
        let mut terms = Vec::with_capacity(maps.len());
        for (map, coef) in maps.iter().zip(&coeffs) {
            let coef_samples = GridFunction::sample(coef, m)?.into_samples();
            let mut image = Vec::with_capacity(m + 1);
            for i in 0..=m {
                let y = map.expr().eval(node(i, m));
                if !(-RANGE_TOLERANCE..=1.0 + RANGE_TOLERANCE).contains(&y) {
                    return Err(Error::Domain { x: y });
                }
                image.push(y.clamp(0.0, 1.0));
            }
            terms.push(Term {
                coef: coef_samples,
                image,
            });
        }
        Ok(Self {
            maps,
            coeffs,
            inhom,
            resolution: m,
            c_hint: None,
            g,
            terms,
        })
    }

    /// Convenience constructor from expression strings; maps get
    /// automatically detected breakpoints.
    pub fn from_strs(maps: &[&str], coeffs: &[&str], g: &str, m: usize) -> Result<Self> {
        let maps = maps
            .iter()
            .map(|s| MapSpec::new(s.parse()?, m))
            .collect::<Result<Vec<_>>>()?;
        let coeffs = coeffs
            .iter()
            .map(|s| s.parse::<Expr>().map_err(Error::from))
            .collect::<Result<Vec<_>>>()?;
        Self::new(maps, coeffs, Inhomogeneity::Expr(g.parse()?), m)
    }

    pub fn with_c_hint(mut self, c: Option<f64>) -> Self {
        self.c_hint = c;
        self
    }

    /// Same equation on another grid.
    pub fn with_resolution(&self, m: usize) -> Result<Self> {
        let inhom = match &self.inhom {
            Inhomogeneity::Grid(h) if !h.resolution().is_multiple_of(m) && !m.is_multiple_of(h.resolution()) => {
                return Err(Error::ResolutionMismatch {
                    left: h.resolution(),
                    right: m,
                })
            }
            other => other.clone(),
        };
        Ok(Self::new(self.maps.clone(), self.coeffs.clone(), inhom, m)?.with_c_hint(self.c_hint))
    }

    /// Same maps and right-hand side with different coefficients.
    pub fn with_coeffs(&self, coeffs: Vec<Expr>) -> Result<Self> {
        Ok(Self::new(self.maps.clone(), coeffs, self.inhom.clone(), self.resolution)?.with_c_hint(self.c_hint))
    }

    /// Same equation with one more term.
    pub fn with_term(&self, map: MapSpec, coef: Expr) -> Result<Self> {
        let mut maps = self.maps.clone();
        let mut coeffs = self.coeffs.clone();
        maps.push(map);
        coeffs.push(coef);
        Ok(Self::new(maps, coeffs, self.inhom.clone(), self.resolution)?.with_c_hint(self.c_hint))
    }

    pub fn n_terms(&self) -> usize {
        self.maps.len()
    }

    pub fn maps(&self) -> &[MapSpec] {
        &self.maps
    }

    pub fn coeffs(&self) -> &[Expr] {
        &self.coeffs
    }

    pub fn inhomogeneity(&self) -> &Inhomogeneity {
        &self.inhom
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn c_hint(&self) -> Option<f64> {
        self.c_hint
    }

    /// The right-hand side `g` sampled on the grid.
    pub fn g(&self) -> &GridFunction {
        &self.g
    }

    /// `gₙ` at the grid nodes.
    pub fn coefficient_samples(&self, n: usize) -> &[f64] {
        &self.terms[n].coef
    }

    /// `fₙ` at the grid nodes, clamped into [0, 1].
    pub fn image_samples(&self, n: usize) -> &[f64] {
        &self.terms[n].image
    }

    /// Applies `P`; `h∘fₙ` uses the interpolant of `h`.
    pub fn apply(&self, h: &GridFunction) -> Result<GridFunction> {
        if h.resolution() != self.resolution {
            return Err(Error::ResolutionMismatch {
                left: self.resolution,
                right: h.resolution(),
            });
        }
        let mut out = vec![0.0; self.resolution + 1];
        for term in &self.terms {
            for ((o, &c), &y) in out.iter_mut().zip(&term.coef).zip(&term.image) {
                if c != 0.0 {
                    *o += c * h.interpolate(y);
                }
            }
        }
        GridFunction::from_samples(out)
    }
}

/// Both sides of `∫_E (h∘f)|f'| dx = ∫ h(y) N_f(y, E) dy`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChangeOfVariables {
    pub lhs: f64,
    pub rhs: f64,
    pub flat_pieces: usize,
}

impl ChangeOfVariables {
    pub fn defect(&self) -> f64 {
        (self.lhs - self.rhs).abs()
    }
}

/// Evaluates both sides of the change-of-variables identity for `h ≥ 0`
/// over `E = [a, b]`. `m` sets the quadrature density (cells per unit
/// length, 5 Gauss nodes each). The right side is split at every critical
/// value so the piecewise-constant indicatrix never jumps inside a cell.
pub fn verify_change_of_variables(
    map: &MapSpec,
    h: &Expr,
    interval: (f64, f64),
    m: usize,
) -> Result<ChangeOfVariables> {
    let (a, b) = interval;
    if !(0.0..=1.0).contains(&a) || !(0.0..=1.0).contains(&b) || a > b {
        return Err(Error::Domain {
            x: if (0.0..=1.0).contains(&a) { b } else { a },
        });
    }
    let pieces = map.pieces_on(a, b);

    // h must be nonnegative on f(E)
    for p in &pieces {
        let n = cells_for(p.lo, p.hi, m);
        for j in 0..=n {
            let y = p.lo + (p.hi - p.lo) * j as f64 / n as f64;
            let v = h.eval(y);
            if !v.is_finite() {
                return Err(Error::Evaluation {
                    expr: h.to_string(),
                    x: y,
                });
            }
            if v < 0.0 {
                return Err(Error::NegativeIntegrand {
                    expr: h.to_string(),
                    y,
                    value: v,
                });
            }
        }
    }

    let mut lhs = 0.0;
    for p in pieces.iter().filter(|p| !p.flat) {
        let integrand = |x: f64| h.eval(map.expr().eval(x)) * map.derivative().eval(x).abs();
        let v = gauss_legendre(integrand, p.start, p.end, cells_for(p.start, p.end, m));
        if !v.is_finite() {
            return Err(Error::Evaluation {
                expr: format!("({h})∘f·|f'|"),
                x: p.start,
            });
        }
        lhs += v;
    }

    let mut levels: Vec<f64> = pieces.iter().filter(|p| !p.flat).flat_map(|p| [p.lo, p.hi]).collect();
    levels.sort_by(f64::total_cmp);
    levels.dedup();
    let mut rhs = 0.0;
    for w in levels.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let count = indicatrix_of(&pieces, 0.5 * (lo + hi)).count;
        if count == 0 {
            continue;
        }
        let v = gauss_legendre(|y| h.eval(y), lo, hi, cells_for(lo, hi, m));
        if !v.is_finite() {
            return Err(Error::Evaluation {
                expr: h.to_string(),
                x: lo,
            });
        }
        rhs += count as f64 * v;
    }

    Ok(ChangeOfVariables {
        lhs,
        rhs,
        flat_pieces: pieces.iter().filter(|p| p.flat).count(),
    })
}
