//! Symbolic differentiation with light simplification.
//!
//! `abs`, `mod1`, `floor` and `sign` are differentiated piecewise:
//! `mod1' = 1`, `floor' = sign' = 0`, `abs'(t) = sign(t)`. The result is the
//! classical derivative away from the finitely many points where the
//! argument of one of these calls crosses an integer (or zero).

use super::{Expr, Func};
use crate::error::{Error, Result};

/// Returns the simplified derivative of `e` with respect to `x`.
pub fn differentiate(e: &Expr) -> Result<Expr> {
    Ok(simplify(raw_derivative(e)?))
}

/// Derivative before simplification. Exposed to the crate so tests can
/// compare it with the simplified tree.
pub(crate) fn raw_derivative(e: &Expr) -> Result<Expr> {
    use Expr::*;
    let d = |e: &Expr| raw_derivative(e).map(Box::new);
    let b = |e: &Expr| Box::new(e.clone());
    Ok(match e {
        Const(_) => Const(0.0),
        Var => Const(1.0),
        Neg(u) => Neg(d(u)?),
        Add(l, r) => Add(d(l)?, d(r)?),
        Sub(l, r) => Sub(d(l)?, d(r)?),
        Mul(l, r) => Add(Box::new(Mul(d(l)?, b(r))), Box::new(Mul(b(l), d(r)?))),
        Div(l, r) if !r.depends_on_x() => Div(d(l)?, b(r)),
        Div(l, r) => Div(
            Box::new(Sub(Box::new(Mul(d(l)?, b(r))), Box::new(Mul(b(l), d(r)?)))),
            Box::new(Pow(b(r), 2.0)),
        ),
        Pow(u, p) => {
            if *p == 0.0 {
                Const(0.0)
            } else {
                Mul(Box::new(Mul(Box::new(Const(*p)), Box::new(Pow(b(u), p - 1.0)))), d(u)?)
            }
        }
        Call(f, args) => match f {
            Func::Mod1 => raw_derivative(&args[0])?,
            Func::Floor | Func::Sign => Const(0.0),
            Func::Abs => Mul(Box::new(Call(Func::Sign, vec![args[0].clone()])), d(&args[0])?),
            Func::Min | Func::Max => {
                if e.depends_on_x() {
                    return Err(Error::UnsupportedDerivative(e.to_string()));
                }
                Const(0.0)
            }
        },
    })
}

fn is_const(e: &Expr, v: f64) -> bool {
    matches!(e, Expr::Const(c) if *c == v)
}

/// Folds constants and removes additive zeros and multiplicative ones.
pub(crate) fn simplify(e: Expr) -> Expr {
    use Expr::*;
    let folded = match e {
        Const(_) | Var => return e,
        Neg(u) => match simplify(*u) {
            Neg(inner) => *inner,
            u => Neg(Box::new(u)),
        },
        Add(l, r) => {
            let (l, r) = (simplify(*l), simplify(*r));
            if is_const(&l, 0.0) {
                r
            } else if is_const(&r, 0.0) {
                l
            } else {
                Add(Box::new(l), Box::new(r))
            }
        }
        Sub(l, r) => {
            let (l, r) = (simplify(*l), simplify(*r));
            if is_const(&r, 0.0) {
                l
            } else if is_const(&l, 0.0) {
                Neg(Box::new(r))
            } else {
                Sub(Box::new(l), Box::new(r))
            }
        }
        Mul(l, r) => {
            let (l, r) = (simplify(*l), simplify(*r));
            if is_const(&l, 0.0) || is_const(&r, 0.0) {
                Const(0.0)
            } else if is_const(&l, 1.0) {
                r
            } else if is_const(&r, 1.0) {
                l
            } else {
                Mul(Box::new(l), Box::new(r))
            }
        }
        Div(l, r) => {
            let (l, r) = (simplify(*l), simplify(*r));
            if is_const(&l, 0.0) && !is_const(&r, 0.0) {
                Const(0.0)
            } else if is_const(&r, 1.0) {
                l
            } else {
                Div(Box::new(l), Box::new(r))
            }
        }
        Pow(u, p) => {
            let u = simplify(*u);
            if p == 1.0 {
                u
            } else if p == 0.0 {
                Const(1.0)
            } else {
                Pow(Box::new(u), p)
            }
        }
        Call(f, args) => Call(f, args.into_iter().map(simplify).collect()),
    };
    if !folded.depends_on_x() {
        let v = folded.eval(0.0);
        if v.is_finite() {
            return Const(v);
        }
    }
    folded
}
