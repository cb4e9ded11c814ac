//! Symbolic differentiation and per-observation evaluation of expression
//! trees.

use super::ast::{self, Expr};
use crate::error::{Error, Result};

/// ∂e/∂θ_i as a new tree, built with folding constructors.
pub fn differentiate(e: &Expr, i: usize) -> Expr {
    match e {
        Expr::Const(_) | Expr::Covariate(_) => Expr::Const(0.0),
        Expr::Param(j) => Expr::Const(if *j == i { 1.0 } else { 0.0 }),
        Expr::Add(a, b) => ast::add(differentiate(a, i), differentiate(b, i)),
        Expr::Sub(a, b) => ast::sub(differentiate(a, i), differentiate(b, i)),
        Expr::Mul(a, b) => ast::add(
            ast::mul(differentiate(a, i), (**b).clone()),
            ast::mul((**a).clone(), differentiate(b, i)),
        ),
        Expr::Div(a, b) => ast::sub(
            ast::div(differentiate(a, i), (**b).clone()),
            ast::div(
                ast::mul((**a).clone(), differentiate(b, i)),
                ast::mul((**b).clone(), (**b).clone()),
            ),
        ),
        Expr::Neg(a) => ast::neg(differentiate(a, i)),
        Expr::Exp(a) => ast::mul((*e).clone(), differentiate(a, i)),
        Expr::Log(a) => ast::div(differentiate(a, i), (**a).clone()),
        Expr::Pow(b, x) => {
            if x.mentions_param(i) {
                // d(b^x) = b^x * (x' * log b + x * b' / b); requires b > 0 at
                // evaluation, which `Log` enforces.
                ast::mul(
                    (*e).clone(),
                    ast::add(
                        ast::mul(differentiate(x, i), ast::log((**b).clone())),
                        ast::div(
                            ast::mul((**x).clone(), differentiate(b, i)),
                            (**b).clone(),
                        ),
                    ),
                )
            } else {
                // Exponent free of θ_i: d(b^x) = x * b^(x-1) * b'.
                ast::mul(
                    ast::mul(
                        (**x).clone(),
                        ast::pow((**b).clone(), ast::sub((**x).clone(), Expr::Const(1.0))),
                    ),
                    differentiate(b, i),
                )
            }
        }
    }
}

/// Evaluates `e` for observation `t` (1-based, used only in error messages).
/// `theta` is indexed by `Expr::Param`; `columns[c][t-1]` by `Expr::Covariate`.
pub fn eval(e: &Expr, theta: &[f64], columns: &[&[f64]], t: usize) -> Result<f64> {
    Ok(match e {
        Expr::Const(c) => *c,
        Expr::Param(i) => theta[*i],
        Expr::Covariate(c) => columns[*c][t - 1],
        Expr::Add(a, b) => eval(a, theta, columns, t)? + eval(b, theta, columns, t)?,
        Expr::Sub(a, b) => eval(a, theta, columns, t)? - eval(b, theta, columns, t)?,
        Expr::Mul(a, b) => eval(a, theta, columns, t)? * eval(b, theta, columns, t)?,
        Expr::Div(a, b) => {
            let den = eval(b, theta, columns, t)?;
            if den == 0.0 {
                return Err(Error::Domain {
                    observation: t,
                    message: "division by zero".into(),
                });
            }
            eval(a, theta, columns, t)? / den
        }
        Expr::Neg(a) => -eval(a, theta, columns, t)?,
        Expr::Exp(a) => eval(a, theta, columns, t)?.exp(),
        Expr::Log(a) => {
            let v = eval(a, theta, columns, t)?;
            if v <= 0.0 {
                return Err(Error::Domain {
                    observation: t,
                    message: format!("log of non-positive value {v}"),
                });
            }
            v.ln()
        }
        Expr::Pow(b, x) => {
            let base = eval(b, theta, columns, t)?;
            let expo = eval(x, theta, columns, t)?;
            let v = base.powf(expo);
            if v.is_nan() {
                return Err(Error::Domain {
                    observation: t,
                    message: format!("{base} ^ {expo} is undefined"),
                });
            }
            v
        }
    })
}
