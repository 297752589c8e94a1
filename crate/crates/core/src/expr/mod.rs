//! Closed-form expressions in the single variable `x`.
//!
//! Expressions define the maps, the coefficients and the inhomogeneity of an
//! equation, as well as closed-form reference solutions. The grammar is
//! deliberately small:
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := factor (('*' | '/') factor)*
//! factor  := unary ('^' factor)?
//! unary   := '-' unary | primary
//! primary := number | 'x' | '(' expr ')' | ident '(' expr (',' expr)? ')'
//! ```
//!
//! Unary minus binds tighter than `^`, so `-x^2` reads as `(-x)^2`.
//! Exponents must fold to constants. Recognised functions are `abs`, `min`,
//! `max`, `mod1` (fractional part), `floor` and `sign`.

mod diff;
mod parse;

use std::fmt;

pub use diff::differentiate;
pub use parse::{parse, ParseError};

/// Built-in functions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Func {
    Abs,
    Min,
    Max,
    Mod1,
    Floor,
    /// Sign with the right-sided convention `sign(0) = 1`.
    Sign,
}

impl Func {
    pub fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "abs" => Func::Abs,
            "min" => Func::Min,
            "max" => Func::Max,
            "mod1" => Func::Mod1,
            "floor" => Func::Floor,
            "sign" => Func::Sign,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Func::Abs => "abs",
            Func::Min => "min",
            Func::Max => "max",
            Func::Mod1 => "mod1",
            Func::Floor => "floor",
            Func::Sign => "sign",
        }
    }

    pub fn arity(self) -> usize {
        match self {
            Func::Min | Func::Max => 2,
            _ => 1,
        }
    }

    fn apply(self, args: &[f64]) -> f64 {
        match self {
            Func::Abs => args[0].abs(),
            Func::Min => args[0].min(args[1]),
            Func::Max => args[0].max(args[1]),
            Func::Mod1 => args[0] - args[0].floor(),
            Func::Floor => args[0].floor(),
            Func::Sign => {
                if args[0].is_nan() {
                    f64::NAN
                } else if args[0] >= 0.0 {
                    1.0
                } else {
                    -1.0
                }
            }
        }
    }
}

/// Expression tree over the variable `x`.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Var,
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    /// Power with a constant exponent.
    Pow(Box<Expr>, f64),
    Call(Func, Vec<Expr>),
}

impl Expr {
    pub fn constant(value: f64) -> Expr {
        Expr::Const(value)
    }

    /// Evaluates at `x`. Non-finite results are returned as-is; callers
    /// decide whether they are errors.
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Expr::Const(c) => *c,
            Expr::Var => x,
            Expr::Neg(e) => -e.eval(x),
            Expr::Add(l, r) => l.eval(x) + r.eval(x),
            Expr::Sub(l, r) => l.eval(x) - r.eval(x),
            Expr::Mul(l, r) => l.eval(x) * r.eval(x),
            Expr::Div(l, r) => l.eval(x) / r.eval(x),
            // powf(0, 0) == 1
            Expr::Pow(b, p) => b.eval(x).powf(*p),
            Expr::Call(f, args) => {
                let vals: Vec<f64> = args.iter().map(|a| a.eval(x)).collect();
                f.apply(&vals)
            }
        }
    }

    /// True when the tree mentions `x`.
    pub fn depends_on_x(&self) -> bool {
        match self {
            Expr::Const(_) => false,
            Expr::Var => true,
            Expr::Neg(e) | Expr::Pow(e, _) => e.depends_on_x(),
            Expr::Add(l, r) | Expr::Sub(l, r) | Expr::Mul(l, r) | Expr::Div(l, r) => {
                l.depends_on_x() || r.depends_on_x()
            }
            Expr::Call(_, args) => args.iter().any(Expr::depends_on_x),
        }
    }

    /// Arguments of every `abs`, `mod1`, `floor` and `sign` call in the tree.
    /// These are the places where the expression can fail to be C¹.
    pub fn kink_arguments(&self) -> Vec<&Expr> {
        let mut out = Vec::new();
        self.collect_kinks(&mut out);
        out
    }

    fn collect_kinks<'a>(&'a self, out: &mut Vec<&'a Expr>) {
        match self {
            Expr::Const(_) | Expr::Var => {}
            Expr::Neg(e) | Expr::Pow(e, _) => e.collect_kinks(out),
            Expr::Add(l, r) | Expr::Sub(l, r) | Expr::Mul(l, r) | Expr::Div(l, r) => {
                l.collect_kinks(out);
                r.collect_kinks(out);
            }
            Expr::Call(f, args) => {
                if matches!(f, Func::Abs | Func::Mod1 | Func::Floor | Func::Sign) && args[0].depends_on_x() {
                    out.push(&args[0]);
                }
                for a in args {
                    a.collect_kinks(out);
                }
            }
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Add(..) | Expr::Sub(..) => 1,
            Expr::Mul(..) | Expr::Div(..) => 2,
            Expr::Pow(..) => 3,
            Expr::Neg(_) => 4,
            Expr::Const(c) if *c < 0.0 || (*c == 0.0 && c.is_sign_negative()) => 4,
            _ => 5,
        }
    }
}

impl std::str::FromStr for Expr {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse(s)
    }
}

fn write_operand(f: &mut fmt::Formatter<'_>, e: &Expr, min_prec: u8) -> fmt::Result {
    if e.precedence() < min_prec {
        write!(f, "({e})")
    } else {
        write!(f, "{e}")
    }
}

fn write_number(f: &mut fmt::Formatter<'_>, c: f64) -> fmt::Result {
    if c.is_sign_negative() {
        write!(f, "-{}", -c)
    } else {
        write!(f, "{c}")
    }
}

/// Canonical, re-parseable rendering.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) => write_number(f, *c),
            Expr::Var => f.write_str("x"),
            Expr::Neg(e) => {
                f.write_str("-")?;
                write_operand(f, e, 4)
            }
            Expr::Add(l, r) => {
                write_operand(f, l, 1)?;
                f.write_str(" + ")?;
                write_operand(f, r, 2)
            }
            Expr::Sub(l, r) => {
                write_operand(f, l, 1)?;
                f.write_str(" - ")?;
                write_operand(f, r, 2)
            }
            Expr::Mul(l, r) => {
                write_operand(f, l, 2)?;
                f.write_str("*")?;
                write_operand(f, r, 3)
            }
            Expr::Div(l, r) => {
                write_operand(f, l, 2)?;
                f.write_str("/")?;
                write_operand(f, r, 3)
            }
            Expr::Pow(b, p) => {
                // base must be a primary or a unary minus; `^` is right-assoc
                write_operand(f, b, 4)?;
                f.write_str("^")?;
                if p.is_sign_negative() {
                    f.write_str("(")?;
                    write_number(f, *p)?;
                    f.write_str(")")
                } else {
                    write_number(f, *p)
                }
            }
            Expr::Call(func, args) => {
                write!(f, "{}(", func.name())?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{a}")?;
                }
                f.write_str(")")
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(src: &str, x: f64) -> f64 {
        parse(src).unwrap().eval(x)
    }

    #[test]
    fn dyadic_map_evaluates() {
        assert_eq!(ev("mod1(2*x)", 0.75), 0.5);
        assert_eq!(ev("mod1(2*x)", 1.0), 0.0);
    }

    #[test]
    fn simple_evaluations() {
        assert_eq!(ev("x/2", 1.0), 0.5);
        assert_eq!(ev("1/(1-x)", 0.5), 2.0);
        assert!(ev("1/(1-x)", 1.0).is_infinite());
        assert_eq!(ev("x^0", 0.0), 1.0);
        assert_eq!(ev("min(x, 0.3) + max(x, 0.3)", 0.1), 0.4);
        assert_eq!(ev("floor(3*x)", 0.5), 1.0);
        assert_eq!(ev("abs(x - 1)", 0.25), 0.75);
        assert_eq!(ev("sign(x - 0.5)", 0.5), 1.0);
        assert_eq!(ev("sign(x - 0.5)", 0.25), -1.0);
    }

    #[test]
    fn unary_minus_binds_tighter_than_power() {
        assert_eq!(ev("-x^2", 0.5), 0.25);
        assert_eq!(ev("-(x^2)", 0.5), -0.25);
        assert_eq!(ev("2^-1", 0.0), 0.5);
    }

    #[test]
    fn display_round_trips_tricky_forms() {
        for src in [
            "-x^2",
            "-(x^2)",
            "x - (x - 1)",
            "x/(2*x)",
            "(x/2)/3",
            "x^(-0.5)",
            "(x + 1)^2^0.5",
            "-(-x)",
            "2*-x",
            "max(x, -1)/(1 - x/3)",
            "x^1.25",
        ] {
            let e = parse(src).unwrap();
            let printed = e.to_string();
            let back = parse(&printed).unwrap_or_else(|err| panic!("{printed}: {err}"));
            for i in 1..=10 {
                let x = i as f64 / 10.0;
                let (a, b) = (e.eval(x), back.eval(x));
                assert!(a == b || (a.is_nan() && b.is_nan()), "{src} -> {printed} at {x}");
            }
        }
    }

    #[test]
    fn kink_arguments_found() {
        let e = parse("mod1(2*x) + abs(x - 0.5) + min(x, 1)").unwrap();
        let kinks: Vec<String> = e.kink_arguments().iter().map(|k| k.to_string()).collect();
        assert_eq!(kinks, vec!["2*x", "x - 0.5"]);
    }
}
