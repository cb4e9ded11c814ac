//! The second-order adjusted likelihood-ratio statistic.
//!
//! The adjustment couples the unrestricted maximizer θ̂ ("hat") and the
//! restricted maximizer θ̃ ("tilde") through two expectations taken under
//! the hat distribution,
//!
//! ```text
//! q̄ = Σ_t E[u_t(θ̂) (ℓ_t(θ̂) − ℓ_t(θ̃))],   Ῡ = Σ_t E[u_t(θ̂) u_t(θ̃)⊤],
//! ```
//!
//! both of which reduce to closed forms in gamma-function derivatives of the
//! per-observation dispersion ratio C_t = φ̂_t/φ̃_t and standardized location
//! shift D_t = (μ̂_t − μ̃_t)/φ̃_t. When hat and tilde coincide, Ῡ is exactly
//! the expected information and q̄ vanishes; in general Ῡ is *not*
//! symmetric. The correction factor ζ then combines q̄, Ῡ, both information
//! matrices at both points, and the tilde score into `w* = w − 2 ln ζ`,
//! which keeps the first-order χ²_r reference distribution but with much
//! smaller size distortion in small samples.
//!
//! Numerical degeneracies (a likelihood ratio near zero, non-positive
//! determinants or quadratic forms, ill-conditioned couplings) are reported
//! through [`NumericsFlags`] and fall back to the unadjusted statistic
//! rather than erroring out: a Monte Carlo replication must be able to
//! record the event and move on.

use crate::error::{Error, Result};
use crate::likelihood::{expected_info, loglik, observed_info, score};
use crate::linalg;
use crate::model::{design_state, to_max_form, DesignState, ModelSpec, ObservationSet, Theta};
use crate::specfun::{gamma_derivs, EULER};
use nalgebra::{DMatrix, DVector};

/// Threshold below which w is too small to support the ζ correction (the
/// adjustment divides by powers of w).
pub const NEAR_ZERO_W: f64 = 1e-8;
/// Condition-number threshold for flagging the coupling matrices.
pub const ILL_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct NumericsFlags {
    /// w was below [`NEAR_ZERO_W`]; w* was set to w.
    pub near_zero_w: bool,
    /// A determinant, log argument, or quadratic form required by ζ was not
    /// positive and finite; w* was set to w.
    pub zeta_degenerate: bool,
    /// Ῡ or Ĵ had condition number above [`ILL_CONDITION`]; the adjusted
    /// value is still reported but deserves suspicion.
    pub ill_conditioned: bool,
}

impl NumericsFlags {
    pub fn any(&self) -> bool {
        self.near_zero_w || self.zeta_degenerate || self.ill_conditioned
    }
}

/// Likelihood ratio statistic and its adjusted version.
#[derive(Debug, Clone)]
pub struct AdjustedLr {
    pub w: f64,
    pub wstar: f64,
    /// ln ζ when the correction was computable.
    pub ln_zeta: Option<f64>,
    pub flags: NumericsFlags,
}

/// Per-observation coupling diagonals between the hat and tilde fits.
#[derive(Debug, Clone)]
pub struct Coupling {
    /// C_t = φ̂_t / φ̃_t.
    pub c: DVector<f64>,
    /// D_t = (μ̂_t − μ̃_t) / φ̃_t.
    pub d: DVector<f64>,
    /// D̆_t = exp(−D_t).
    pub dbrev: DVector<f64>,
    /// M_t = Γ(1 + C_t).
    pub m: DVector<f64>,
    /// N_t = Γ⁽¹⁾(1 + C_t).
    pub n: DVector<f64>,
    /// P_t = Γ⁽²⁾(1 + C_t).
    pub p: DVector<f64>,
}

pub fn coupling(hat: &DesignState, tilde: &DesignState) -> Coupling {
    let n_obs = hat.n;
    let mut c = DVector::zeros(n_obs);
    let mut d = DVector::zeros(n_obs);
    let mut dbrev = DVector::zeros(n_obs);
    let mut m = DVector::zeros(n_obs);
    let mut nv = DVector::zeros(n_obs);
    let mut p = DVector::zeros(n_obs);
    for t in 0..n_obs {
        c[t] = hat.phi[t] / tilde.phi[t];
        d[t] = (hat.mu[t] - tilde.mu[t]) / tilde.phi[t];
        dbrev[t] = (-d[t]).exp();
        let g = gamma_derivs(1.0 + c[t]);
        m[t] = g.value;
        nv[t] = g.d1;
        p[t] = g.d2;
    }
    Coupling {
        c,
        d,
        dbrev,
        m,
        n: nv,
        p,
    }
}

/// q̄: hat design rows weighted by the coupling diagonals.
pub fn qbar(hat: &DesignState, cp: &Coupling) -> DVector<f64> {
    let (k, m) = (hat.k, hat.m);
    let mut q = DVector::zeros(k + m);
    for t in 0..hat.n {
        let wb = hat.t_diag[t] / hat.phi[t] * cp.c[t] * (1.0 - cp.m[t] * cp.dbrev[t]);
        for i in 0..k {
            q[i] += wb * hat.x_jac[(t, i)];
        }
        let wg = hat.h_diag[t] / hat.phi[t]
            * (cp.c[t] * (EULER + cp.n[t] * cp.dbrev[t]) - 1.0);
        for j in 0..m {
            q[k + j] += wg * hat.z_jac[(t, j)];
        }
    }
    q
}

/// Ῡ: hat design rows on the left, tilde design rows on the right. Not
/// symmetric away from hat = tilde.
pub fn upsilon_bar(hat: &DesignState, tilde: &DesignState, cp: &Coupling) -> DMatrix<f64> {
    let (k, m) = (hat.k, hat.m);
    let p = k + m;
    let mut ups = DMatrix::zeros(p, p);
    for t in 0..hat.n {
        let bh = hat.t_diag[t] / hat.phi[t];
        let gh = hat.h_diag[t] / hat.phi[t];
        let bt = tilde.t_diag[t] / tilde.phi[t];
        let gt = tilde.h_diag[t] / tilde.phi[t];
        let (c, d, db, mm, nn, pp) =
            (cp.c[t], cp.d[t], cp.dbrev[t], cp.m[t], cp.n[t], cp.p[t]);

        let w_bb = bh * c * mm * db * bt;
        let w_bg = bh * c * (1.0 + db * (mm * d - mm - c * nn)) * gt;
        let w_gb = -gh * c * nn * db * bt;
        let w_gg = gh * c * (EULER + db * (nn + c * pp - nn * d)) * gt;

        for i in 0..k {
            let xi = hat.x_jac[(t, i)];
            for j in 0..k {
                ups[(i, j)] += w_bb * xi * tilde.x_jac[(t, j)];
            }
            for j in 0..m {
                ups[(i, k + j)] += w_bg * xi * tilde.z_jac[(t, j)];
            }
        }
        for i in 0..m {
            let zi = hat.z_jac[(t, i)];
            for j in 0..k {
                ups[(k + i, j)] += w_gb * zi * tilde.x_jac[(t, j)];
            }
            for j in 0..m {
                ups[(k + i, k + j)] += w_gg * zi * tilde.z_jac[(t, j)];
            }
        }
    }
    ups
}

/// Computes w and w* for the hypothesis that pins the `interest` flat
/// indices, given both maximizers. Minimum-form models are reduced
/// internally; θ̂ and θ̃ are used exactly as passed (they should be the
/// converged unrestricted and restricted maximum likelihood estimates).
pub fn adjusted_lr(
    model: &ModelSpec,
    data: &ObservationSet,
    theta_hat: &Theta,
    theta_tilde: &Theta,
    interest: &[usize],
) -> Result<AdjustedLr> {
    let p = model.p();
    if interest.is_empty() {
        return Err(Error::InvalidArgument(
            "at least one interest parameter is required".into(),
        ));
    }
    if interest.iter().any(|&i| i >= p) {
        return Err(Error::InvalidArgument(format!(
            "interest index out of range for a {p}-parameter model"
        )));
    }
    let (wmodel, wdata) = to_max_form(model, data)?;
    let hat = design_state(&wmodel, theta_hat, &wdata)?;
    let tilde = design_state(&wmodel, theta_tilde, &wdata)?;

    let w = 2.0 * (loglik(&hat) - loglik(&tilde));
    let r = interest.len();
    let nuisance: Vec<usize> = (0..p).filter(|i| !interest.contains(i)).collect();

    let mut flags = NumericsFlags::default();
    if !(w > NEAR_ZERO_W) {
        flags.near_zero_w = true;
        return Ok(AdjustedLr {
            w,
            wstar: w,
            ln_zeta: None,
            flags,
        });
    }

    let i_hat = expected_info(&hat).full;
    let i_tilde = expected_info(&tilde).full;
    let j_hat = observed_info(&hat).full;
    let j_tilde = observed_info(&tilde).full;
    let u_tilde = score(&tilde).flat();
    let cp = coupling(&hat, &tilde);
    let q = qbar(&hat, &cp);
    let ups = upsilon_bar(&hat, &tilde, &cp);

    if linalg::condition(&ups) > ILL_CONDITION || linalg::condition(&j_hat) > ILL_CONDITION {
        flags.ill_conditioned = true;
    }

    let degenerate = |flags: NumericsFlags| {
        let mut f = flags;
        f.zeta_degenerate = true;
        Ok(AdjustedLr {
            w,
            wstar: w,
            ln_zeta: None,
            flags: f,
        })
    };

    // All five determinants must be positive for ln ζ to exist.
    let dets = [
        linalg::sign_log_det(&i_tilde),
        linalg::sign_log_det(&i_hat),
        linalg::sign_log_det(&linalg::select(&j_tilde, &nuisance, &nuisance)),
        linalg::sign_log_det(&ups),
    ];
    if dets.iter().any(|&(s, ld)| s <= 0.0 || !ld.is_finite()) {
        return degenerate(flags);
    }
    let (Ok(ups_inv), Ok(i_hat_inv)) = (
        linalg::inverse(&ups, "coupling matrix"),
        linalg::inverse(&i_hat, "expected information"),
    ) else {
        return degenerate(flags);
    };
    let prod = &i_tilde * &ups_inv * &j_hat * &i_hat_inv * &ups;
    let (s_prod, ld_prod) = linalg::sign_log_det(&linalg::select(&prod, &nuisance, &nuisance));
    if s_prod <= 0.0 || !ld_prod.is_finite() {
        return degenerate(flags);
    }

    // Quadratic forms: Ũ⊤Ῡ⁻¹ Î Ĵ⁻¹ Ῡ Ĩ⁻¹ Ũ and Ũ⊤Ῡ⁻¹ q̄.
    let left = ups_inv.transpose() * &u_tilde; // (Ũ⊤Ῡ⁻¹)⊤
    let Ok(s1) = linalg::solve_vec(&i_tilde, &u_tilde, "expected information") else {
        return degenerate(flags);
    };
    let s2 = &ups * &s1;
    let Ok(s3) = linalg::solve_vec(&j_hat, &s2, "observed information") else {
        return degenerate(flags);
    };
    let quad = left.dot(&(&i_hat * &s3));
    let qform = left.dot(&q);
    if !(quad > 0.0) || !(qform > 0.0) {
        return degenerate(flags);
    }

    let ln_zeta = 0.5 * (dets[0].1 + dets[1].1 + dets[2].1) - dets[3].1 - 0.5 * ld_prod
        + (r as f64 / 2.0) * quad.ln()
        - (r as f64 / 2.0 - 1.0) * w.ln()
        - qform.ln();
    if !ln_zeta.is_finite() {
        return degenerate(flags);
    }

    Ok(AdjustedLr {
        w,
        wstar: w - 2.0 * ln_zeta,
        ln_zeta: Some(ln_zeta),
        flags,
    })
}
