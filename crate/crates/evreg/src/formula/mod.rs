//! The predictor expression language.
//!
//! Location and dispersion predictors are written as plain arithmetic over
//! declared parameter names and dataset column names, e.g.
//! `b0 + exp(b1 + b2*x)` or `g1*x`. Supported operators are `+ - * /`, unary
//! minus, and `^`; supported functions are `exp`, `log` (natural), and
//! `pow(base, exponent)` (identical to `^`). See `docs/formula.md` for the
//! grammar.
//!
//! First and second parameter derivatives are built symbolically once, when
//! the expression is parsed, and evaluated per observation on demand.

mod ast;
mod deriv;
mod parse;

pub use ast::Expr;

use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};

/// A parsed predictor with its symbolic first and second derivative trees.
#[derive(Debug, Clone)]
pub struct PredictorExpr {
    root: Expr,
    params: Vec<String>,
    covariates: Vec<String>,
    grad: Vec<Expr>,
    /// Lower triangle, `hess[i][j]` with j ≤ i.
    hess: Vec<Vec<Expr>>,
    /// True when every second-derivative tree is identically zero (linear
    /// predictors), letting callers skip the curvature terms entirely.
    curvature_free: bool,
}

/// Values and derivatives of a predictor over a dataset: `value` is n×1,
/// `jac` is n×p, and `hess[t]` is the symmetric p×p matrix of second
/// derivatives at observation t. `hess = None` means identically zero.
#[derive(Debug, Clone)]
pub struct DerivBundle {
    pub value: DVector<f64>,
    pub jac: DMatrix<f64>,
    pub hess: Option<Vec<DMatrix<f64>>>,
}

impl PredictorExpr {
    /// Parses `text`, resolving identifiers against `params` (the declared
    /// parameter order, which fixes the gradient layout) and `available`
    /// covariate names.
    pub fn parse<S: AsRef<str>>(text: &str, params: &[S], available: &[S]) -> Result<Self> {
        let params: Vec<String> = params.iter().map(|s| s.as_ref().to_string()).collect();
        let available: Vec<String> = available.iter().map(|s| s.as_ref().to_string()).collect();
        for (i, p) in params.iter().enumerate() {
            if params[..i].contains(p) {
                return Err(Error::InvalidArgument(format!("duplicate parameter `{p}`")));
            }
            if available.contains(p) {
                return Err(Error::InvalidArgument(format!(
                    "`{p}` is both a parameter and a covariate"
                )));
            }
        }
        let (root, used) = parse::Parser::parse(text, &params, &available)?;
        Ok(Self::from_root(root, params, used))
    }

    /// Builds the derivative trees for an already-constructed tree. Used by
    /// the min/max reduction, which wraps an existing predictor in new nodes.
    pub(crate) fn from_root(root: Expr, params: Vec<String>, covariates: Vec<String>) -> Self {
        let grad: Vec<Expr> = (0..params.len())
            .map(|i| deriv::differentiate(&root, i))
            .collect();
        let hess: Vec<Vec<Expr>> = (0..params.len())
            .map(|i| (0..=i).map(|j| deriv::differentiate(&grad[i], j)).collect())
            .collect();
        let curvature_free = hess.iter().flatten().all(Expr::is_zero);
        PredictorExpr {
            root,
            params,
            covariates,
            grad,
            hess,
            curvature_free,
        }
    }

    pub fn root(&self) -> &Expr {
        &self.root
    }

    /// Declared parameter names, in gradient order.
    pub fn params(&self) -> &[String] {
        &self.params
    }

    /// Covariates the expression references, in first-reference order.
    pub fn covariates(&self) -> &[String] {
        &self.covariates
    }

    pub fn curvature_free(&self) -> bool {
        self.curvature_free
    }

    /// Canonical text form; parsing it back yields a structurally identical
    /// tree.
    pub fn print(&self) -> String {
        ast::print(&self.root, &self.params, &self.covariates)
    }

    fn bind<'d>(&self, columns: &'d dyn ColumnSource) -> Result<Vec<&'d [f64]>> {
        self.covariates
            .iter()
            .map(|name| {
                columns.column(name).ok_or_else(|| {
                    Error::Data(format!("covariate column `{name}` not found in data"))
                })
            })
            .collect()
    }

    /// Predictor values only (the cheap path for likelihood-only
    /// evaluations).
    pub fn eval(&self, theta_part: &[f64], data: &dyn ColumnSource, n: usize) -> Result<DVector<f64>> {
        self.check_theta(theta_part)?;
        let cols = self.bind(data)?;
        let mut value = DVector::zeros(n);
        for t in 1..=n {
            value[t - 1] = deriv::eval(&self.root, theta_part, &cols, t)?;
        }
        Ok(value)
    }

    /// Values plus first and second parameter derivatives, observation by
    /// observation.
    pub fn eval_with_derivs(
        &self,
        theta_part: &[f64],
        data: &dyn ColumnSource,
        n: usize,
    ) -> Result<DerivBundle> {
        self.check_theta(theta_part)?;
        let cols = self.bind(data)?;
        let p = self.params.len();
        let mut value = DVector::zeros(n);
        let mut jac = DMatrix::zeros(n, p);
        let mut hess: Option<Vec<DMatrix<f64>>> = if self.curvature_free {
            None
        } else {
            Some(Vec::with_capacity(n))
        };
        for t in 1..=n {
            value[t - 1] = deriv::eval(&self.root, theta_part, &cols, t)?;
            for i in 0..p {
                jac[(t - 1, i)] = deriv::eval(&self.grad[i], theta_part, &cols, t)?;
            }
            if let Some(hs) = hess.as_mut() {
                let mut h = DMatrix::zeros(p, p);
                for i in 0..p {
                    for j in 0..=i {
                        let v = deriv::eval(&self.hess[i][j], theta_part, &cols, t)?;
                        h[(i, j)] = v;
                        h[(j, i)] = v;
                    }
                }
                hs.push(h);
            }
        }
        Ok(DerivBundle { value, jac, hess })
    }

    fn check_theta(&self, theta_part: &[f64]) -> Result<()> {
        if theta_part.len() != self.params.len() {
            return Err(Error::Dimension(format!(
                "expected {} parameter values, got {}",
                self.params.len(),
                theta_part.len()
            )));
        }
        Ok(())
    }
}

/// Anything that can hand out named covariate columns.
pub trait ColumnSource {
    fn column(&self, name: &str) -> Option<&[f64]>;
}

impl ColumnSource for std::collections::BTreeMap<String, Vec<f64>> {
    fn column(&self, name: &str) -> Option<&[f64]> {
        self.get(name).map(|v| v.as_slice())
    }
}
