//! Equation files: a `[equation]` section of `key = value` lines.
//!
//! ```text
//! # comment
//! [equation]
//! N = 2
//! f1 = x/2
//! f2 = (x+1)/2
//! g1 = 0.4
//! g2 = 0.4
//! g  = 1
//! f1.breakpoints = 0, 0.5, 1   # optional
//! M = 4096                     # optional
//! C_hint = 0.8                 # optional
//! ```

use std::collections::HashMap;
use std::path::Path;

use funceq_core::operator::{EquationSpec, Inhomogeneity, MapSpec};
use funceq_core::{parse, Expr, DEFAULT_RESOLUTION};
use thiserror::Error;

/// Error with a 1-based line and column in the source file.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("{line}:{column}: {message}")]
pub struct SyntaxError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

#[derive(Debug, Error)]
pub enum SpecFileError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{inner}")]
    Syntax { path: String, inner: SyntaxError },
    #[error("{path}: {source}")]
    Invalid {
        path: String,
        #[source]
        source: funceq_core::Error,
    },
}

/// A value together with where it appeared.
#[derive(Debug, Clone, PartialEq)]
struct Located {
    value: String,
    line: usize,
    column: usize,
}

impl Located {
    fn error(&self, offset: usize, message: impl Into<String>) -> SyntaxError {
        SyntaxError {
            line: self.line,
            column: self.column + offset,
            message: message.into(),
        }
    }

    fn expr(&self) -> Result<Expr, SyntaxError> {
        parse(&self.value).map_err(|e| self.error(e.position, e.message))
    }

    fn number<T: std::str::FromStr>(&self, what: &str) -> Result<T, SyntaxError> {
        self.value
            .parse()
            .map_err(|_| self.error(0, format!("expected {what}, found `{}`", self.value)))
    }
}

/// Parsed equation file.
#[derive(Debug, Clone, PartialEq)]
pub struct SpecFile {
    pub maps: Vec<Expr>,
    pub breakpoints: Vec<Option<Vec<f64>>>,
    pub coeffs: Vec<Expr>,
    pub g: Expr,
    pub resolution: Option<usize>,
    pub c_hint: Option<f64>,
}

impl SpecFile {
    pub fn parse(src: &str) -> Result<Self, SyntaxError> {
        let entries = read_entries(src)?;
        let get = |key: &str| entries.get(key);
        let eof = SyntaxError {
            line: src.lines().count().max(1),
            column: 1,
            message: String::new(),
        };
        let missing = |key: &str| SyntaxError {
            message: format!("missing key `{key}`"),
            ..eof.clone()
        };

        let n_entry = get("N").ok_or_else(|| missing("N"))?;
        let n: usize = n_entry.number("a positive integer")?;
        if n == 0 {
            return Err(n_entry.error(0, "N must be positive"));
        }
        let mut maps = Vec::with_capacity(n);
        let mut coeffs = Vec::with_capacity(n);
        let mut breakpoints = Vec::with_capacity(n);
        for i in 1..=n {
            let f = format!("f{i}");
            let g = format!("g{i}");
            maps.push(get(&f).ok_or_else(|| missing(&f))?.expr()?);
            coeffs.push(get(&g).ok_or_else(|| missing(&g))?.expr()?);
            breakpoints.push(match get(&format!("f{i}.breakpoints")) {
                Some(v) => Some(parse_breakpoints(v)?),
                None => None,
            });
        }
        let g = get("g").ok_or_else(|| missing("g"))?.expr()?;
        let resolution = get("M").map(|v| v.number("an integer resolution")).transpose()?;
        let c_hint = match get("C_hint") {
            Some(v) => {
                let c: f64 = v.number("a real number")?;
                if !(c.is_finite() && c >= 0.0) {
                    return Err(v.error(0, "C_hint must be a nonnegative real"));
                }
                Some(c)
            }
            None => None,
        };

        let unknown = entries
            .iter()
            .filter(|(key, _)| !known_key(key, n))
            .min_by_key(|(_, v)| v.line);
        if let Some((key, v)) = unknown {
            return Err(SyntaxError {
                line: v.line,
                column: 1,
                message: format!("unknown key `{key}`"),
            });
        }

        Ok(SpecFile {
            maps,
            breakpoints,
            coeffs,
            g,
            resolution,
            c_hint,
        })
    }

    pub fn load(path: &Path) -> Result<Self, SpecFileError> {
        let display = path.display().to_string();
        let src = std::fs::read_to_string(path).map_err(|source| SpecFileError::Io {
            path: display.clone(),
            source,
        })?;
        Self::parse(&src).map_err(|inner| SpecFileError::Syntax { path: display, inner })
    }

    /// Builds the equation at `m`, or the file's `M`, or the default.
    pub fn to_equation(&self, m: Option<usize>) -> funceq_core::Result<EquationSpec> {
        let m = m.or(self.resolution).unwrap_or(DEFAULT_RESOLUTION);
        let maps = self
            .maps
            .iter()
            .zip(&self.breakpoints)
            .map(|(e, bps)| match bps {
                Some(bps) => MapSpec::with_breakpoints(e.clone(), bps, m),
                None => MapSpec::new(e.clone(), m),
            })
            .collect::<funceq_core::Result<Vec<_>>>()?;
        Ok(
            EquationSpec::new(maps, self.coeffs.clone(), Inhomogeneity::Expr(self.g.clone()), m)?
                .with_c_hint(self.c_hint),
        )
    }
}

fn known_key(key: &str, n: usize) -> bool {
    let index = |s: &str| s.parse::<usize>().is_ok_and(|i| (1..=n).contains(&i));
    match key {
        "N" | "g" | "M" | "C_hint" => true,
        _ => {
            if let Some(rest) = key.strip_prefix('f') {
                index(rest.strip_suffix(".breakpoints").unwrap_or(rest))
            } else if let Some(rest) = key.strip_prefix('g') {
                index(rest)
            } else {
                false
            }
        }
    }
}

fn parse_breakpoints(v: &Located) -> Result<Vec<f64>, SyntaxError> {
    let mut out = Vec::new();
    let mut offset = 0;
    for part in v.value.split(',') {
        let lead = part.len() - part.trim_start().len();
        let text = part.trim();
        let x: f64 = text
            .parse()
            .map_err(|_| v.error(offset + lead, format!("expected a breakpoint, found `{text}`")))?;
        if !(0.0..=1.0).contains(&x) {
            return Err(v.error(offset + lead, format!("breakpoint {x} outside [0, 1]")));
        }
        if out.last().is_some_and(|&prev| x <= prev) {
            return Err(v.error(offset + lead, "breakpoints must be strictly increasing"));
        }
        out.push(x);
        offset += part.len() + 1;
    }
    Ok(out)
}

fn read_entries(src: &str) -> Result<HashMap<String, Located>, SyntaxError> {
    let mut entries = HashMap::new();
    let mut in_equation = false;
    let mut seen_section = false;
    for (idx, raw) in src.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("");
        let trimmed = content.trim();
        if trimmed.is_empty() {
            continue;
        }
        let indent = content.len() - content.trim_start().len();
        let err = |column: usize, message: String| SyntaxError { line, column, message };
        if let Some(rest) = trimmed.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| err(indent + trimmed.len() + 1, "expected `]`".into()))?
                .trim();
            if name != "equation" {
                return Err(err(indent + 2, format!("unknown section `{name}`")));
            }
            if seen_section {
                return Err(err(indent + 1, "duplicate section `equation`".into()));
            }
            in_equation = true;
            seen_section = true;
            continue;
        }
        if !in_equation {
            return Err(err(indent + 1, "expected `[equation]` before keys".into()));
        }
        let eq = content
            .find('=')
            .ok_or_else(|| err(indent + trimmed.len() + 1, "expected `key = value`".into()))?;
        let key = content[..eq].trim();
        if key.is_empty() {
            return Err(err(eq + 1, "missing key before `=`".into()));
        }
        let after = &content[eq + 1..];
        let value = after.trim();
        let value_col = eq + 2 + (after.len() - after.trim_start().len());
        if value.is_empty() {
            return Err(err(value_col, format!("missing value for `{key}`")));
        }
        let located = Located {
            value: value.to_string(),
            line,
            column: value_col,
        };
        if entries.insert(key.to_string(), located).is_some() {
            return Err(err(indent + 1, format!("duplicate key `{key}`")));
        }
    }
    Ok(entries)
}
