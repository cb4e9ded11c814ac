//! Shared helpers for the acceptance checks: adaptive quadrature oracles
//! for the coupling moments, finite differences, and the simulation models
//! used throughout.

use evreg::model::{design_state, sample_response};
use evreg::rng::Stream;
use evreg::{Family, Link, ModelSpec, ObservationSet, PredictorExpr, Theta};
use nalgebra::{DMatrix, DVector};
use std::collections::BTreeMap;

/// Adaptive Simpson integration with absolute tolerance `tol`.
pub fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    fn recurse<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
            + recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    recurse(f, a, b, fa, fm, fb, whole, tol, 20)
}

/// E[g(z)] for z following the standard maximum extreme-value law; the
/// density mass outside [-15, 60] is below 1e-26. The tolerance is scaled
/// to the integrand's magnitude (probed on a coarse grid) so that the
/// refinement stops above the floating-point noise floor.
pub fn gumbel_expect<F: Fn(f64) -> f64>(g: F) -> f64 {
    let h = |z: f64| g(z) * (-z - (-z).exp()).exp();
    let mut mag = 0.0f64;
    for i in 0..=300 {
        mag = mag.max(h(-15.0 + 0.25 * i as f64).abs());
    }
    simpson(&h, -15.0, 60.0, 1e-11 * (75.0 * mag).max(1e-280))
}

/// Brute-force quadrature version of the coupling moments: expectations,
/// taken at the first parameter point, of products of per-observation score
/// contributions at the two points. Returns (q, Y) with
/// `q[i] = Σ_t E[u_ti(hat) (ℓ_t(hat) − ℓ_t(tilde))]` and
/// `Y[i, j] = Σ_t E[u_ti(hat) u_tj(tilde)]`, where under the hat
/// distribution the tilde residual is z̃ = D + C z.
pub fn coupling_by_quadrature(
    model: &ModelSpec,
    data: &ObservationSet,
    hat: &Theta,
    tilde: &Theta,
) -> (DVector<f64>, DMatrix<f64>) {
    let sh = design_state(model, hat, data).unwrap();
    let st = design_state(model, tilde, data).unwrap();
    let p = model.p();
    let k = model.k();
    let mut q = DVector::zeros(p);
    let mut y = DMatrix::zeros(p, p);
    for t in 0..sh.n {
        let (phi_h, phi_t) = (sh.phi[t], st.phi[t]);
        let c = phi_h / phi_t;
        let d = (sh.mu[t] - st.mu[t]) / phi_t;
        let u_h = |i: usize, z: f64| {
            if i < k {
                sh.x_jac[(t, i)] * sh.t_diag[t] / phi_h * (1.0 - (-z).exp())
            } else {
                sh.z_jac[(t, i - k)] * sh.h_diag[t] / phi_h * (z - z * (-z).exp() - 1.0)
            }
        };
        let u_t = |j: usize, z: f64| {
            let zt = d + c * z;
            if j < k {
                st.x_jac[(t, j)] * st.t_diag[t] / phi_t * (1.0 - (-zt).exp())
            } else {
                st.z_jac[(t, j - k)] * st.h_diag[t] / phi_t * (zt - zt * (-zt).exp() - 1.0)
            }
        };
        let dloglik = |z: f64| {
            let zt = d + c * z;
            (-phi_h.ln() - z - (-z).exp()) - (-phi_t.ln() - zt - (-zt).exp())
        };
        for i in 0..p {
            q[i] += gumbel_expect(|z| u_h(i, z) * dloglik(z));
            for j in 0..p {
                y[(i, j)] += gumbel_expect(|z| u_h(i, z) * u_t(j, z));
            }
        }
    }
    (q, y)
}

/// Central-difference gradient of a scalar function.
pub fn fd_gradient<F: Fn(&[f64]) -> f64>(f: F, x: &[f64], h: f64) -> Vec<f64> {
    (0..x.len())
        .map(|i| {
            let mut hi = x.to_vec();
            let mut lo = x.to_vec();
            hi[i] += h;
            lo[i] -= h;
            (f(&hi) - f(&lo)) / (2.0 * h)
        })
        .collect()
}

/// Central-difference Jacobian of a vector function; column j holds
/// ∂f/∂x_j.
pub fn fd_jacobian<F: Fn(&[f64]) -> DVector<f64>>(f: F, x: &[f64], h: f64) -> DMatrix<f64> {
    let p = x.len();
    let rows = f(x).len();
    let mut jac = DMatrix::zeros(rows, p);
    for j in 0..p {
        let mut hi = x.to_vec();
        let mut lo = x.to_vec();
        hi[j] += h;
        lo[j] -= h;
        jac.set_column(j, &((f(&hi) - f(&lo)) / (2.0 * h)));
    }
    jac
}

/// Location `b0 + b1*x` (identity link), dispersion `g0 + g1*x` (log link):
/// the smallest model exercising covariates in both predictors.
pub fn small_model() -> ModelSpec {
    let loc = PredictorExpr::parse("b0 + b1*x", &["b0", "b1"], &["x"]).unwrap();
    let disp = PredictorExpr::parse("g0 + g1*x", &["g0", "g1"], &["x"]).unwrap();
    ModelSpec::new(Family::EvMax, loc, Link::Identity, disp, Link::Log).unwrap()
}

/// Five-covariate linear location with constant log-dispersion, the
/// workhorse of the size/power studies. True value: β = (1, 0, 1, 6, −3),
/// φ = 0.1; the null `b2 = 0` holds.
pub fn study_model_linear() -> (ModelSpec, Vec<f64>, Vec<&'static str>) {
    let covs = vec!["x2", "x3", "x4", "x5"];
    let loc = PredictorExpr::parse(
        "b1 + b2*x2 + b3*x3 + b4*x4 + b5*x5",
        &["b1", "b2", "b3", "b4", "b5"],
        &covs,
    )
    .unwrap();
    let disp = PredictorExpr::parse("g1", &["g1"], &covs).unwrap();
    let model = ModelSpec::new(Family::EvMax, loc, Link::Identity, disp, Link::Log).unwrap();
    (model, vec![1.0, 0.0, 1.0, 6.0, -3.0, 0.1f64.ln()], covs)
}

/// Linear location with a covariate-dependent log-dispersion.
pub fn study_model_heteroskedastic() -> (ModelSpec, Vec<f64>, Vec<&'static str>) {
    let covs = vec!["x2", "x3", "x4"];
    let loc = PredictorExpr::parse(
        "b1 + b2*x2 + b3*x3 + b4*x4",
        &["b1", "b2", "b3", "b4"],
        &covs,
    )
    .unwrap();
    let disp = PredictorExpr::parse(
        "g1 + g2*x2 + g3*x3 + g4*x4",
        &["g1", "g2", "g3", "g4"],
        &covs,
    )
    .unwrap();
    let model = ModelSpec::new(Family::EvMax, loc, Link::Identity, disp, Link::Log).unwrap();
    (
        model,
        vec![1.0, 0.0, 1.0, 6.0, 0.1f64.ln(), -2.0, -2.0, 0.1],
        covs,
    )
}

/// Nonlinear location (a power term with an unknown exponent) with constant
/// identity-link dispersion; covariates must stay positive.
pub fn study_model_nonlinear() -> (ModelSpec, Vec<f64>, Vec<&'static str>) {
    let covs = vec!["x1", "x2"];
    let loc = PredictorExpr::parse("b0 + b1*x1 + x2^b2", &["b0", "b1", "b2"], &covs).unwrap();
    let disp = PredictorExpr::parse("g0", &["g0"], &covs).unwrap();
    let model = ModelSpec::new(Family::EvMax, loc, Link::Identity, disp, Link::Identity).unwrap();
    (model, vec![1.0, 1.0, 0.0, 0.1f64.exp()], covs)
}

/// Uniform covariate columns plus a response sampled at `theta_flat`:
/// covariates from stream 1, response from stream 0 of `seed`.
pub fn uniform_dataset(
    model: &ModelSpec,
    theta_flat: &[f64],
    names: &[&str],
    n: usize,
    low: f64,
    high: f64,
    seed: u64,
) -> ObservationSet {
    let mut cs = Stream::new(seed, 1);
    let columns: Vec<Vec<f64>> = names
        .iter()
        .map(|_| (0..n).map(|_| cs.uniform_in(low, high)).collect())
        .collect();
    let names: Vec<String> = names.iter().map(|s| s.to_string()).collect();
    let map: BTreeMap<String, Vec<f64>> =
        names.iter().cloned().zip(columns.iter().cloned()).collect();
    let theta = Theta::from_flat(model, theta_flat).unwrap();
    let mut rs = Stream::new(seed, 0);
    let y = sample_response(model, &theta, &map, n, &mut rs).unwrap();
    ObservationSet::new(y, names, columns).unwrap()
}
