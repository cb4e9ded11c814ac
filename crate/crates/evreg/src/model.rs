//! Model specification and per-observation design quantities.
//!
//! A model is a response family (maximum or minimum extreme value) plus two
//! predictors: location `g(μ_t) = η(x_t, β)` and dispersion
//! `h(φ_t) = δ(z_t, γ)`. The standardized residual is `z_t = (y_t − μ_t)/φ_t`
//! and `z̆_t = exp(−z_t)`; those two vectors, the predictor Jacobians and
//! second derivatives, and the link diagonals T, S, H, Q are everything the
//! likelihood machinery needs.
//!
//! Minimum-extreme-value models are handled exclusively by [`to_max_form`]:
//! negating the response and the location predictor turns a minimum model
//! into a maximum model with the same parameters and the same likelihood, so
//! there is a single likelihood code path.

use crate::error::{Error, Result};
use crate::formula::{ColumnSource, Expr, PredictorExpr};
use crate::rng::Stream;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    EvMax,
    EvMin,
}

/// Link functions; location supports both, dispersion must map onto (0, ∞),
/// which `log` does globally and `identity` does subject to a positivity
/// check at evaluation time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Link {
    Identity,
    Log,
}

impl Link {
    /// g(v).
    pub fn apply(self, v: f64) -> f64 {
        match self {
            Link::Identity => v,
            Link::Log => v.ln(),
        }
    }

    /// g⁻¹(η).
    pub fn inverse(self, eta: f64) -> f64 {
        match self {
            Link::Identity => eta,
            Link::Log => eta.exp(),
        }
    }

    /// g′(v).
    pub fn deriv(self, v: f64) -> f64 {
        match self {
            Link::Identity => 1.0,
            Link::Log => 1.0 / v,
        }
    }

    /// g″(v).
    pub fn second(self, v: f64) -> f64 {
        match self {
            Link::Identity => 0.0,
            Link::Log => -1.0 / (v * v),
        }
    }
}

/// Which block a flat parameter index belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Block {
    Location,
    Dispersion,
}

#[derive(Debug, Clone)]
pub struct ModelSpec {
    pub family: Family,
    pub location: PredictorExpr,
    pub loc_link: Link,
    pub dispersion: PredictorExpr,
    pub disp_link: Link,
}

impl ModelSpec {
    pub fn new(
        family: Family,
        location: PredictorExpr,
        loc_link: Link,
        dispersion: PredictorExpr,
        disp_link: Link,
    ) -> Result<Self> {
        for p in location.params() {
            if dispersion.params().contains(p) {
                return Err(Error::InvalidArgument(format!(
                    "parameter `{p}` appears in both location and dispersion"
                )));
            }
        }
        Ok(ModelSpec {
            family,
            location,
            loc_link,
            dispersion,
            disp_link,
        })
    }

    /// Number of location parameters.
    pub fn k(&self) -> usize {
        self.location.params().len()
    }

    /// Number of dispersion parameters.
    pub fn m(&self) -> usize {
        self.dispersion.params().len()
    }

    /// Total parameter count k + m.
    pub fn p(&self) -> usize {
        self.k() + self.m()
    }

    /// All parameter names in flat order (location block first).
    pub fn param_names(&self) -> Vec<&str> {
        self.location
            .params()
            .iter()
            .chain(self.dispersion.params().iter())
            .map(|s| s.as_str())
            .collect()
    }

    /// Flat index of a named parameter.
    pub fn flat_index(&self, name: &str) -> Option<usize> {
        self.param_names().iter().position(|p| *p == name)
    }

    /// (block, within-block index, name) for a flat index.
    pub fn describe(&self, flat: usize) -> Option<(Block, usize, &str)> {
        let k = self.k();
        if flat < k {
            Some((Block::Location, flat, &self.location.params()[flat]))
        } else if flat < self.p() {
            let j = flat - k;
            Some((Block::Dispersion, j, &self.dispersion.params()[j]))
        } else {
            None
        }
    }

    /// Covariate names referenced by either predictor, sorted and deduplicated.
    pub fn covariates(&self) -> Vec<&str> {
        let mut v: Vec<&str> = self
            .location
            .covariates()
            .iter()
            .chain(self.dispersion.covariates().iter())
            .map(|s| s.as_str())
            .collect();
        v.sort_unstable();
        v.dedup();
        v
    }
}

/// Parameter values split into the location block β and dispersion block γ;
/// the flat layout is β followed by γ.
#[derive(Debug, Clone, PartialEq)]
pub struct Theta {
    pub beta: DVector<f64>,
    pub gamma: DVector<f64>,
}

impl Theta {
    pub fn new(beta: Vec<f64>, gamma: Vec<f64>) -> Self {
        Theta {
            beta: DVector::from_vec(beta),
            gamma: DVector::from_vec(gamma),
        }
    }

    pub fn zeros(model: &ModelSpec) -> Self {
        Theta {
            beta: DVector::zeros(model.k()),
            gamma: DVector::zeros(model.m()),
        }
    }

    pub fn flat(&self) -> DVector<f64> {
        let mut v = DVector::zeros(self.beta.len() + self.gamma.len());
        v.rows_mut(0, self.beta.len()).copy_from(&self.beta);
        v.rows_mut(self.beta.len(), self.gamma.len())
            .copy_from(&self.gamma);
        v
    }

    pub fn from_flat(model: &ModelSpec, flat: &[f64]) -> Result<Self> {
        if flat.len() != model.p() {
            return Err(Error::Dimension(format!(
                "expected {} parameter values, got {}",
                model.p(),
                flat.len()
            )));
        }
        Ok(Theta {
            beta: DVector::from_row_slice(&flat[..model.k()]),
            gamma: DVector::from_row_slice(&flat[model.k()..]),
        })
    }

    pub fn get(&self, flat: usize) -> f64 {
        if flat < self.beta.len() {
            self.beta[flat]
        } else {
            self.gamma[flat - self.beta.len()]
        }
    }

    pub fn set(&mut self, flat: usize, value: f64) {
        if flat < self.beta.len() {
            self.beta[flat] = value;
        } else {
            self.gamma[flat - self.beta.len()] = value;
        }
    }
}

/// Response vector with named covariate columns.
#[derive(Debug, Clone)]
pub struct ObservationSet {
    response: Vec<f64>,
    names: Vec<String>,
    columns: Vec<Vec<f64>>,
}

impl ObservationSet {
    pub fn new(response: Vec<f64>, names: Vec<String>, columns: Vec<Vec<f64>>) -> Result<Self> {
        if response.is_empty() {
            return Err(Error::Data("empty response".into()));
        }
        if names.len() != columns.len() {
            return Err(Error::Data(format!(
                "{} column names for {} columns",
                names.len(),
                columns.len()
            )));
        }
        for (i, name) in names.iter().enumerate() {
            if names[..i].contains(name) {
                return Err(Error::Data(format!("duplicate column `{name}`")));
            }
        }
        for (t, y) in response.iter().enumerate() {
            if !y.is_finite() {
                return Err(Error::Data(format!(
                    "non-finite response at observation {}",
                    t + 1
                )));
            }
        }
        for (name, col) in names.iter().zip(&columns) {
            if col.len() != response.len() {
                return Err(Error::Data(format!(
                    "column `{name}` has {} rows, response has {}",
                    col.len(),
                    response.len()
                )));
            }
            for (t, v) in col.iter().enumerate() {
                if !v.is_finite() {
                    return Err(Error::Data(format!(
                        "non-finite value in column `{name}` at observation {}",
                        t + 1
                    )));
                }
            }
        }
        Ok(ObservationSet {
            response,
            names,
            columns,
        })
    }

    pub fn n(&self) -> usize {
        self.response.len()
    }

    pub fn response(&self) -> &[f64] {
        &self.response
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }
}

impl ColumnSource for ObservationSet {
    fn column(&self, name: &str) -> Option<&[f64]> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| self.columns[i].as_slice())
    }
}

/// Everything the likelihood needs at a given θ: fitted location/dispersion,
/// standardized residuals, predictor derivatives, and link diagonals.
#[derive(Debug, Clone)]
pub struct DesignState {
    pub n: usize,
    pub k: usize,
    pub m: usize,
    pub mu: DVector<f64>,
    pub phi: DVector<f64>,
    /// Standardized residuals z_t = (y_t − μ_t)/φ_t.
    pub z: DVector<f64>,
    /// z̆_t = exp(−z_t).
    pub zbrev: DVector<f64>,
    /// ∂η/∂β (n × k): derivatives of the *linear predictor*, not of μ.
    pub x_jac: DMatrix<f64>,
    /// ∂δ/∂γ (n × m).
    pub z_jac: DMatrix<f64>,
    /// ∂²η/∂β∂β per observation; None when identically zero.
    pub x_hess: Option<Vec<DMatrix<f64>>>,
    /// ∂²δ/∂γ∂γ per observation; None when identically zero.
    pub z_hess: Option<Vec<DMatrix<f64>>>,
    /// T_t = 1/g′(μ_t).
    pub t_diag: DVector<f64>,
    /// S_t = g″(μ_t).
    pub s_diag: DVector<f64>,
    /// H_t = 1/h′(φ_t).
    pub h_diag: DVector<f64>,
    /// Q_t = h″(φ_t).
    pub q_diag: DVector<f64>,
}

/// Location and dispersion values only — the cheap evaluation used by
/// likelihood-only objective calls and by [`sample_response`].
pub(crate) fn mu_phi(
    model: &ModelSpec,
    theta: &Theta,
    data: &dyn ColumnSource,
    n: usize,
) -> Result<(DVector<f64>, DVector<f64>)> {
    let eta = model.location.eval(theta.beta.as_slice(), data, n)?;
    let delta = model.dispersion.eval(theta.gamma.as_slice(), data, n)?;
    let mut mu = DVector::zeros(n);
    let mut phi = DVector::zeros(n);
    for t in 0..n {
        mu[t] = model.loc_link.inverse(eta[t]);
        phi[t] = model.disp_link.inverse(delta[t]);
        if !mu[t].is_finite() {
            return Err(Error::Domain {
                observation: t + 1,
                message: format!("non-finite location {}", mu[t]),
            });
        }
        if !(phi[t] > 0.0) || !phi[t].is_finite() {
            return Err(Error::Domain {
                observation: t + 1,
                message: format!("dispersion {} is not a positive finite number", phi[t]),
            });
        }
    }
    Ok((mu, phi))
}

/// Assembles the full [`DesignState`] at θ. The model must be in maximum
/// form (apply [`to_max_form`] first for minimum models).
pub fn design_state(model: &ModelSpec, theta: &Theta, data: &ObservationSet) -> Result<DesignState> {
    if model.family != Family::EvMax {
        return Err(Error::InvalidArgument(
            "design_state requires a maximum-form model; apply to_max_form first".into(),
        ));
    }
    let n = data.n();
    if n <= model.p() {
        return Err(Error::Dimension(format!(
            "need more observations ({n}) than parameters ({})",
            model.p()
        )));
    }
    let loc = model
        .location
        .eval_with_derivs(theta.beta.as_slice(), data, n)?;
    let disp = model
        .dispersion
        .eval_with_derivs(theta.gamma.as_slice(), data, n)?;

    let mut mu = DVector::zeros(n);
    let mut phi = DVector::zeros(n);
    let mut z = DVector::zeros(n);
    let mut zbrev = DVector::zeros(n);
    let mut t_diag = DVector::zeros(n);
    let mut s_diag = DVector::zeros(n);
    let mut h_diag = DVector::zeros(n);
    let mut q_diag = DVector::zeros(n);
    let y = data.response();
    for t in 0..n {
        mu[t] = model.loc_link.inverse(loc.value[t]);
        phi[t] = model.disp_link.inverse(disp.value[t]);
        if !mu[t].is_finite() {
            return Err(Error::Domain {
                observation: t + 1,
                message: format!("non-finite location {}", mu[t]),
            });
        }
        if !(phi[t] > 0.0) || !phi[t].is_finite() {
            return Err(Error::Domain {
                observation: t + 1,
                message: format!("dispersion {} is not a positive finite number", phi[t]),
            });
        }
        z[t] = (y[t] - mu[t]) / phi[t];
        zbrev[t] = (-z[t]).exp();
        if !z[t].is_finite() || !zbrev[t].is_finite() {
            return Err(Error::Domain {
                observation: t + 1,
                message: format!("standardized residual {} overflows the likelihood", z[t]),
            });
        }
        t_diag[t] = 1.0 / model.loc_link.deriv(mu[t]);
        s_diag[t] = model.loc_link.second(mu[t]);
        h_diag[t] = 1.0 / model.disp_link.deriv(phi[t]);
        q_diag[t] = model.disp_link.second(phi[t]);
    }

    Ok(DesignState {
        n,
        k: model.k(),
        m: model.m(),
        mu,
        phi,
        z,
        zbrev,
        x_jac: loc.jac,
        z_jac: disp.jac,
        x_hess: loc.hess,
        z_hess: disp.hess,
        t_diag,
        s_diag,
        h_diag,
        q_diag,
    })
}

/// Draws a response vector at θ, consuming exactly n uniforms from `stream`
/// in observation order. For a maximum model `y = μ − φ ln(−ln U)`; for a
/// minimum model `y = μ + φ ln(−ln U)`.
pub fn sample_response(
    model: &ModelSpec,
    theta: &Theta,
    covariates: &dyn ColumnSource,
    n: usize,
    stream: &mut Stream,
) -> Result<Vec<f64>> {
    let (mu, phi) = mu_phi(model, theta, covariates, n)?;
    let mut y = Vec::with_capacity(n);
    for t in 0..n {
        let g = (-stream.uniform().ln()).ln();
        y.push(match model.family {
            Family::EvMax => mu[t] - phi[t] * g,
            Family::EvMin => mu[t] + phi[t] * g,
        });
    }
    Ok(y)
}

/// Reduces a minimum-extreme-value model to maximum form: the response is
/// negated and the location predictor becomes −g⁻¹(η) under an identity
/// link, leaving the parameters and the likelihood unchanged. Maximum models
/// pass through as clones.
pub fn to_max_form(model: &ModelSpec, data: &ObservationSet) -> Result<(ModelSpec, ObservationSet)> {
    if model.family == Family::EvMax {
        return Ok((model.clone(), data.clone()));
    }
    let inner = match model.loc_link {
        Link::Identity => model.location.root().clone(),
        Link::Log => Expr::Exp(Box::new(model.location.root().clone())),
    };
    let negated = Expr::Neg(Box::new(inner));
    let location = PredictorExpr::from_root(
        negated,
        model.location.params().to_vec(),
        model.location.covariates().to_vec(),
    );
    let spec = ModelSpec {
        family: Family::EvMax,
        location,
        loc_link: Link::Identity,
        dispersion: model.dispersion.clone(),
        disp_link: model.disp_link,
    };
    let flipped = ObservationSet::new(
        data.response().iter().map(|y| -y).collect(),
        data.names().to_vec(),
        data.names()
            .iter()
            .map(|n| data.column(n).expect("own column").to_vec())
            .collect(),
    )?;
    Ok((spec, flipped))
}

// --- serde-facing configuration ---

/// JSON-facing model description; see `docs/schemas.md`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelConfig {
    pub family: Family,
    pub location: PredictorConfig,
    pub dispersion: PredictorConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PredictorConfig {
    pub formula: String,
    pub link: Link,
    pub parameters: Vec<ParamConfig>,
}

/// A parameter is either a bare name or a name with a starting value.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamConfig {
    Name(String),
    WithInit { name: String, init: f64 },
}

impl ParamConfig {
    pub fn name(&self) -> &str {
        match self {
            ParamConfig::Name(n) => n,
            ParamConfig::WithInit { name, .. } => name,
        }
    }

    pub fn init(&self) -> Option<f64> {
        match self {
            ParamConfig::Name(_) => None,
            ParamConfig::WithInit { init, .. } => Some(*init),
        }
    }
}

impl ModelConfig {
    /// Compiles the formulas against the available covariate names.
    pub fn build(&self, available_covariates: &[String]) -> Result<ModelSpec> {
        let loc_params: Vec<String> = self
            .location
            .parameters
            .iter()
            .map(|p| p.name().to_string())
            .collect();
        let disp_params: Vec<String> = self
            .dispersion
            .parameters
            .iter()
            .map(|p| p.name().to_string())
            .collect();
        let location =
            PredictorExpr::parse(&self.location.formula, &loc_params, available_covariates)?;
        let dispersion =
            PredictorExpr::parse(&self.dispersion.formula, &disp_params, available_covariates)?;
        ModelSpec::new(
            self.family,
            location,
            self.loc_link(),
            dispersion,
            self.disp_link(),
        )
    }

    pub fn loc_link(&self) -> Link {
        self.location.link
    }

    pub fn disp_link(&self) -> Link {
        self.dispersion.link
    }

    /// User-supplied starting values, by name.
    pub fn initial_overrides(&self) -> Vec<(String, f64)> {
        self.location
            .parameters
            .iter()
            .chain(self.dispersion.parameters.iter())
            .filter_map(|p| p.init().map(|v| (p.name().to_string(), v)))
            .collect()
    }
}
