//! Expression tree for predictor formulas, with smart constructors that fold
//! constants and elide algebraic identities (used when building derivative
//! trees so they stay small), plus a canonical printer.

/// A node in a parsed predictor expression. `Param` and `Covariate` carry
/// indices into the owning [`super::PredictorExpr`]'s name tables.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Param(usize),
    Covariate(usize),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Neg(Box<Expr>),
    Exp(Box<Expr>),
    Log(Box<Expr>),
    /// `Pow(base, exponent)`; written `base ^ exponent` or `pow(base, exponent)`.
    Pow(Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn is_zero(&self) -> bool {
        matches!(self, Expr::Const(c) if *c == 0.0)
    }

    pub fn is_one(&self) -> bool {
        matches!(self, Expr::Const(c) if *c == 1.0)
    }

    /// Does the subtree mention any parameter?
    pub fn has_param(&self) -> bool {
        match self {
            Expr::Const(_) | Expr::Covariate(_) => false,
            Expr::Param(_) => true,
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b)
            | Expr::Pow(a, b) => a.has_param() || b.has_param(),
            Expr::Neg(a) | Expr::Exp(a) | Expr::Log(a) => a.has_param(),
        }
    }

    /// Does the subtree mention parameter `i`?
    pub fn mentions_param(&self, i: usize) -> bool {
        match self {
            Expr::Const(_) | Expr::Covariate(_) => false,
            Expr::Param(j) => *j == i,
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b)
            | Expr::Pow(a, b) => a.mentions_param(i) || b.mentions_param(i),
            Expr::Neg(a) | Expr::Exp(a) | Expr::Log(a) => a.mentions_param(i),
        }
    }
}

// Folding constructors. These preserve value semantics except that
// `pow(e, 0) -> 1` and `mul(0, e) -> 0` drop domain errors the discarded
// subtree could have raised; derivative trees accept that convention.
// Constants fold only when the result is finite: overflow is left in the
// tree so evaluation can report it as a domain error.
pub fn add(a: Expr, b: Expr) -> Expr {
    match (a, b) {
        (Expr::Const(x), Expr::Const(y)) if (x + y).is_finite() => Expr::Const(x + y),
        (a, b) if a.is_zero() => b,
        (a, b) if b.is_zero() => a,
        (a, b) => Expr::Add(Box::new(a), Box::new(b)),
    }
}

pub fn sub(a: Expr, b: Expr) -> Expr {
    match (a, b) {
        (Expr::Const(x), Expr::Const(y)) if (x - y).is_finite() => Expr::Const(x - y),
        (a, b) if b.is_zero() => a,
        (a, b) if a.is_zero() => neg(b),
        (a, b) => Expr::Sub(Box::new(a), Box::new(b)),
    }
}

pub fn mul(a: Expr, b: Expr) -> Expr {
    match (a, b) {
        (Expr::Const(x), Expr::Const(y)) if (x * y).is_finite() => Expr::Const(x * y),
        (a, b) if a.is_zero() || b.is_zero() => Expr::Const(0.0),
        (a, b) if a.is_one() => b,
        (a, b) if b.is_one() => a,
        (a, b) => Expr::Mul(Box::new(a), Box::new(b)),
    }
}

pub fn div(a: Expr, b: Expr) -> Expr {
    match (a, b) {
        (a, b) if a.is_zero() && !b.is_zero() => Expr::Const(0.0),
        (a, b) if b.is_one() => a,
        (Expr::Const(x), Expr::Const(y)) if y != 0.0 && (x / y).is_finite() => {
            Expr::Const(x / y)
        }
        (a, b) => Expr::Div(Box::new(a), Box::new(b)),
    }
}

pub fn neg(a: Expr) -> Expr {
    match a {
        Expr::Const(x) => Expr::Const(-x),
        Expr::Neg(inner) => *inner,
        a => Expr::Neg(Box::new(a)),
    }
}

pub fn exp(a: Expr) -> Expr {
    match a {
        Expr::Const(x) if x.exp().is_finite() => Expr::Const(x.exp()),
        a => Expr::Exp(Box::new(a)),
    }
}

pub fn log(a: Expr) -> Expr {
    match a {
        // Only fold constants with a defined logarithm; invalid ones must
        // still raise a domain error at evaluation time.
        Expr::Const(x) if x > 0.0 => Expr::Const(x.ln()),
        a => Expr::Log(Box::new(a)),
    }
}

pub fn pow(a: Expr, b: Expr) -> Expr {
    match (a, b) {
        (_, b) if b.is_zero() => Expr::Const(1.0),
        (a, b) if b.is_one() => a,
        (Expr::Const(x), Expr::Const(y)) if x > 0.0 && x.powf(y).is_finite() => {
            Expr::Const(x.powf(y))
        }
        (a, b) => Expr::Pow(Box::new(a), Box::new(b)),
    }
}

/// Operator precedence used by the printer; must mirror the parser.
fn precedence(e: &Expr) -> u8 {
    match e {
        Expr::Add(..) | Expr::Sub(..) => 1,
        Expr::Mul(..) | Expr::Div(..) => 2,
        Expr::Neg(..) => 3,
        Expr::Pow(..) => 4,
        _ => 5,
    }
}

/// Canonical text form. For any expression produced by the parser,
/// `parse(print(e))` is structurally identical to `e`.
pub fn print(e: &Expr, params: &[String], covariates: &[String]) -> String {
    let mut out = String::new();
    write_expr(e, params, covariates, &mut out, 0);
    out
}

fn write_expr(e: &Expr, params: &[String], covariates: &[String], out: &mut String, min_prec: u8) {
    let prec = precedence(e);
    let parens = prec < min_prec;
    if parens {
        out.push('(');
    }
    match e {
        Expr::Const(c) => out.push_str(&format!("{c}")),
        Expr::Param(i) => out.push_str(&params[*i]),
        Expr::Covariate(i) => out.push_str(&covariates[*i]),
        Expr::Add(a, b) => {
            // Right operands take `prec + 1` so that grouping survives the
            // parser's left associativity.
            write_expr(a, params, covariates, out, prec);
            out.push_str(" + ");
            write_expr(b, params, covariates, out, prec + 1);
        }
        Expr::Sub(a, b) => {
            write_expr(a, params, covariates, out, prec);
            out.push_str(" - ");
            write_expr(b, params, covariates, out, prec + 1);
        }
        Expr::Mul(a, b) => {
            write_expr(a, params, covariates, out, prec);
            out.push_str(" * ");
            write_expr(b, params, covariates, out, prec + 1);
        }
        Expr::Div(a, b) => {
            write_expr(a, params, covariates, out, prec);
            out.push_str(" / ");
            write_expr(b, params, covariates, out, prec + 1);
        }
        Expr::Neg(a) => {
            out.push('-');
            write_expr(a, params, covariates, out, prec);
        }
        Expr::Exp(a) => {
            out.push_str("exp(");
            write_expr(a, params, covariates, out, 0);
            out.push(')');
        }
        Expr::Log(a) => {
            out.push_str("log(");
            write_expr(a, params, covariates, out, 0);
            out.push(')');
        }
        Expr::Pow(a, b) => {
            // The grammar only allows an atom on the left of `^` and a unary
            // expression on the right.
            write_expr(a, params, covariates, out, 5);
            out.push_str(" ^ ");
            write_expr(b, params, covariates, out, 3);
        }
    }
    if parens {
        out.push(')');
    }
}
