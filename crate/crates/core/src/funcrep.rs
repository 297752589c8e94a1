//! Integrable functions on [0, 1] stored as samples on a uniform grid.
//!
//! A [`GridFunction`] with resolution `M` holds the values at the nodes
//! `x_i = i / M`, `i = 0..=M`, and is extended between nodes by linear
//! interpolation. L¹ norms use the composite trapezoid rule on `|h|`, which
//! is exact for the interpolant as long as it does not change sign inside a
//! cell; otherwise the error is O(1/M²).

use serde::Serialize;

use crate::error::{Error, Result};
use crate::expr::Expr;

/// Resolution used when none is given.
pub const DEFAULT_RESOLUTION: usize = 4096;

/// Checks that `m` is a usable grid resolution (even, at least 16).
pub fn check_resolution(m: usize) -> Result<()> {
    if m >= 16 && m.is_multiple_of(2) {
        Ok(())
    } else {
        Err(Error::InvalidResolution(m))
    }
}

/// Node `i` of a grid with `m` intervals.
#[inline]
pub fn node(i: usize, m: usize) -> f64 {
    i as f64 / m as f64
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridFunction {
    samples: Vec<f64>,
}

impl GridFunction {
    /// Wraps node values; `samples.len() - 1` is the resolution.
    pub fn from_samples(samples: Vec<f64>) -> Result<Self> {
        check_resolution(samples.len().saturating_sub(1))?;
        if let Some(index) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteSample { index });
        }
        Ok(Self { samples })
    }

    /// Samples `f` at every node. Non-finite values are rejected.
    pub fn from_fn(m: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        check_resolution(m)?;
        Self::from_samples((0..=m).map(|i| f(node(i, m))).collect())
    }

    pub fn constant(m: usize, c: f64) -> Result<Self> {
        Self::from_fn(m, |_| c)
    }

    pub fn zeros(m: usize) -> Result<Self> {
        Self::constant(m, 0.0)
    }

    /// Samples an expression at the nodes.
    pub fn sample(e: &Expr, m: usize) -> Result<Self> {
        check_resolution(m)?;
        let mut samples = Vec::with_capacity(m + 1);
        for i in 0..=m {
            let x = node(i, m);
            let v = e.eval(x);
            if !v.is_finite() {
                return Err(Error::Evaluation { expr: e.to_string(), x });
            }
            samples.push(v);
        }
        Ok(Self { samples })
    }

    /// Internal constructor for values already known to be finite.
    pub(crate) fn from_finite(samples: Vec<f64>) -> Self {
        debug_assert!(samples.iter().all(|v| v.is_finite()));
        Self { samples }
    }

    pub fn resolution(&self) -> usize {
        self.samples.len() - 1
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    /// `(x_i, h(x_i))` pairs.
    pub fn nodes(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        let m = self.resolution();
        self.samples.iter().enumerate().map(move |(i, &v)| (node(i, m), v))
    }

    /// Linear interpolation; exact at nodes.
    pub fn eval(&self, x: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::Domain { x });
        }
        Ok(self.interpolate(x))
    }

    /// Interpolation without the domain check; `x` must lie in [0, 1].
    #[inline]
    pub(crate) fn interpolate(&self, x: f64) -> f64 {
        let m = self.resolution();
        let u = x * m as f64;
        let nearest = u.round();
        // snap to the node when x is i/M up to rounding
        if (u - nearest).abs() <= 4.0 * f64::EPSILON * (m as f64) {
            return self.samples[nearest as usize];
        }
        let i = (u.floor() as usize).min(m - 1);
        let t = u - i as f64;
        let (a, b) = (self.samples[i], self.samples[i + 1]);
        a + t * (b - a)
    }

    /// Composite trapezoid rule applied to `|h|`.
    pub fn l1_norm(&self) -> f64 {
        let m = self.resolution();
        let interior: f64 = self.samples[1..m].iter().map(|v| v.abs()).sum();
        let ends = 0.5 * (self.samples[0].abs() + self.samples[m].abs());
        (interior + ends) / m as f64
    }

    /// ∫ over `[a, b]` of the piecewise-linear interpolant of `|h|`.
    /// Over `[0, 1]` this equals [`GridFunction::l1_norm`].
    pub fn l1_norm_on(&self, a: f64, b: f64) -> f64 {
        let a = a.clamp(0.0, 1.0);
        let b = b.clamp(0.0, 1.0);
        if b <= a {
            return 0.0;
        }
        if a == 0.0 && b == 1.0 {
            return self.l1_norm();
        }
        let m = self.resolution();
        let mf = m as f64;
        let abs_at = |x: f64| self.interpolate_abs(x);
        let first = ((a * mf).ceil() as usize).min(m);
        let last = ((b * mf).floor() as usize).max(first);
        let last = last.min(m);
        let xf = node(first, m);
        let xl = node(last, m);
        if xf >= xl {
            // a and b inside the same cell
            return 0.5 * (abs_at(a) + abs_at(b)) * (b - a);
        }
        let mut total = 0.5 * (abs_at(a) + self.samples[first].abs()) * (xf - a);
        for i in first..last {
            total += 0.5 * (self.samples[i].abs() + self.samples[i + 1].abs()) / mf;
        }
        total + 0.5 * (self.samples[last].abs() + abs_at(b)) * (b - xl)
    }

    fn interpolate_abs(&self, x: f64) -> f64 {
        let m = self.resolution();
        let u = x * m as f64;
        let i = (u.floor() as usize).min(m - 1);
        let t = u - i as f64;
        let (a, b) = (self.samples[i].abs(), self.samples[i + 1].abs());
        a + t * (b - a)
    }

    /// Pointwise `a*h1 + b*h2`.
    pub fn combine(a: f64, h1: &GridFunction, b: f64, h2: &GridFunction) -> Result<GridFunction> {
        if h1.resolution() != h2.resolution() {
            return Err(Error::ResolutionMismatch {
                left: h1.resolution(),
                right: h2.resolution(),
            });
        }
        let samples = h1
            .samples
            .iter()
            .zip(&h2.samples)
            .map(|(u, v)| a * u + b * v)
            .collect::<Vec<_>>();
        GridFunction::from_samples(samples)
    }

    pub fn scale(&self, a: f64) -> GridFunction {
        GridFunction::from_finite(self.samples.iter().map(|v| a * v).collect())
    }

    /// ‖self − other‖₁.
    pub fn l1_distance(&self, other: &GridFunction) -> Result<f64> {
        Ok(GridFunction::combine(1.0, self, -1.0, other)?.l1_norm())
    }

    /// Largest absolute sample.
    pub fn sup_norm(&self) -> f64 {
        self.samples.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }

    /// Resamples onto a grid of `m2` intervals via interpolation.
    pub fn refine(&self, m2: usize) -> Result<GridFunction> {
        check_resolution(m2)?;
        let m = self.resolution();
        if !m2.is_multiple_of(m) && !m.is_multiple_of(m2) {
            return Err(Error::ResolutionMismatch { left: m, right: m2 });
        }
        if m2 == m {
            return Ok(self.clone());
        }
        Ok(GridFunction::from_finite(
            (0..=m2).map(|i| self.interpolate(node(i, m2))).collect(),
        ))
    }
}
