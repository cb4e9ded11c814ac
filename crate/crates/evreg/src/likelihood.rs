//! Log-likelihood, score vector, and observed/expected information for
//! maximum-form models.
//!
//! With z_t = (y_t − μ_t)/φ_t and z̆_t = exp(−z_t), the log-likelihood is
//! `ℓ = Σ_t (−ln φ_t − z_t − z̆_t)`. All derivatives are taken through the
//! links using the diagonals T = 1/g′(μ), S = g″(μ), H = 1/h′(φ),
//! Q = h″(φ) carried by [`DesignState`], plus the predictor Jacobians and
//! per-observation second-derivative matrices (the latter contribute the
//! curvature corrections that vanish for linear predictors).

use crate::model::DesignState;
use crate::specfun::{EULER, GAMMA_D2_AT_2};
use nalgebra::{DMatrix, DVector};

pub fn loglik(s: &DesignState) -> f64 {
    let mut acc = 0.0;
    for t in 0..s.n {
        acc += -s.phi[t].ln() - s.z[t] - s.zbrev[t];
    }
    acc
}

/// Score split into blocks; `flat` stacks β over γ.
#[derive(Debug, Clone)]
pub struct ScoreVector {
    pub beta: DVector<f64>,
    pub gamma: DVector<f64>,
}

impl ScoreVector {
    pub fn flat(&self) -> DVector<f64> {
        let mut v = DVector::zeros(self.beta.len() + self.gamma.len());
        v.rows_mut(0, self.beta.len()).copy_from(&self.beta);
        v.rows_mut(self.beta.len(), self.gamma.len())
            .copy_from(&self.gamma);
        v
    }
}

pub fn score(s: &DesignState) -> ScoreVector {
    let mut beta = DVector::zeros(s.k);
    let mut gamma = DVector::zeros(s.m);
    for t in 0..s.n {
        let wb = s.t_diag[t] / s.phi[t] * (1.0 - s.zbrev[t]);
        for i in 0..s.k {
            beta[i] += wb * s.x_jac[(t, i)];
        }
        let wg = s.h_diag[t] / s.phi[t] * (s.z[t] - s.z[t] * s.zbrev[t] - 1.0);
        for j in 0..s.m {
            gamma[j] += wg * s.z_jac[(t, j)];
        }
    }
    ScoreVector { beta, gamma }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InfoKind {
    Observed,
    Expected,
}

/// A p × p information matrix with the location block leading.
#[derive(Debug, Clone)]
pub struct InfoMatrix {
    pub kind: InfoKind,
    pub full: DMatrix<f64>,
    /// Location-block size; rows/cols `k..` are the dispersion block.
    pub k: usize,
}

impl InfoMatrix {
    pub fn beta_beta(&self) -> DMatrix<f64> {
        self.full.view((0, 0), (self.k, self.k)).into_owned()
    }

    pub fn beta_gamma(&self) -> DMatrix<f64> {
        let m = self.full.ncols() - self.k;
        self.full.view((0, self.k), (self.k, m)).into_owned()
    }

    pub fn gamma_gamma(&self) -> DMatrix<f64> {
        let m = self.full.ncols() - self.k;
        self.full.view((self.k, self.k), (m, m)).into_owned()
    }
}

/// Observed information J(θ) = −∂²ℓ/∂θ∂θ⊤.
pub fn observed_info(s: &DesignState) -> InfoMatrix {
    let (k, m) = (s.k, s.m);
    let p = k + m;
    let mut full = DMatrix::zeros(p, p);
    for t in 0..s.n {
        let phi = s.phi[t];
        let z = s.z[t];
        let zb = s.zbrev[t];
        let tt = s.t_diag[t];
        let ss = s.s_diag[t];
        let h = s.h_diag[t];
        let q = s.q_diag[t];

        let a_bb = (tt / phi) * (zb / phi + (1.0 - zb) * ss * tt) * tt;
        for i in 0..k {
            for j in 0..=i {
                full[(i, j)] += a_bb * s.x_jac[(t, i)] * s.x_jac[(t, j)];
            }
        }
        let a_bg = tt * h / (phi * phi) * (1.0 - zb + z * zb);
        for j in 0..m {
            for i in 0..k {
                full[(k + j, i)] += a_bg * s.x_jac[(t, i)] * s.z_jac[(t, j)];
            }
        }
        let a_gg = (h / phi)
            * ((-1.0 + 2.0 * z - 2.0 * z * zb + z * z * zb) / phi + (z - z * zb - 1.0) * q * h)
            * h;
        for i in 0..m {
            for j in 0..=i {
                full[(k + i, k + j)] += a_gg * s.z_jac[(t, i)] * s.z_jac[(t, j)];
            }
        }
        if let Some(xh) = &s.x_hess {
            let c = (1.0 - zb) * tt / phi;
            for i in 0..k {
                for j in 0..=i {
                    full[(i, j)] -= c * xh[t][(i, j)];
                }
            }
        }
        if let Some(zh) = &s.z_hess {
            let c = (1.0 - z + z * zb) * h / phi;
            for i in 0..m {
                for j in 0..=i {
                    full[(k + i, k + j)] += c * zh[t][(i, j)];
                }
            }
        }
    }
    mirror_lower(&mut full);
    InfoMatrix {
        kind: InfoKind::Observed,
        full,
        k,
    }
}

/// Expected (Fisher) information I(θ) = E[J(θ)]. The curvature corrections
/// drop out because both score weights have zero mean, leaving fixed
/// constants on the outer-product sums.
pub fn expected_info(s: &DesignState) -> InfoMatrix {
    let (k, m) = (s.k, s.m);
    let p = k + m;
    let mut full = DMatrix::zeros(p, p);
    let cross = EULER - 1.0;
    let disp = 1.0 + GAMMA_D2_AT_2;
    for t in 0..s.n {
        let phi = s.phi[t];
        let tt = s.t_diag[t];
        let h = s.h_diag[t];
        let a_bb = (tt / phi) * (tt / phi);
        for i in 0..k {
            for j in 0..=i {
                full[(i, j)] += a_bb * s.x_jac[(t, i)] * s.x_jac[(t, j)];
            }
        }
        let a_bg = cross * tt * h / (phi * phi);
        for j in 0..m {
            for i in 0..k {
                full[(k + j, i)] += a_bg * s.x_jac[(t, i)] * s.z_jac[(t, j)];
            }
        }
        let a_gg = disp * (h / phi) * (h / phi);
        for i in 0..m {
            for j in 0..=i {
                full[(k + i, k + j)] += a_gg * s.z_jac[(t, i)] * s.z_jac[(t, j)];
            }
        }
    }
    mirror_lower(&mut full);
    InfoMatrix {
        kind: InfoKind::Expected,
        full,
        k,
    }
}

fn mirror_lower(a: &mut DMatrix<f64>) {
    for i in 0..a.nrows() {
        for j in 0..i {
            a[(j, i)] = a[(i, j)];
        }
    }
}
