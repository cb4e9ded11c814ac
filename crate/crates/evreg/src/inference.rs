//! The five hypothesis-test statistics and confidence-interval inversion.
//!
//! For H₀: ν = ν₀ (a subset of flat parameter indices pinned to values),
//! the statistics are
//!
//! - `w`   likelihood ratio: 2(ℓ(θ̂) − ℓ(θ̃));
//! - `W`   Wald: (ν̂−ν₀)⊤ [(Î⁻¹)_{νν}]⁻¹ (ν̂−ν₀), expected information at θ̂;
//! - `S_R` score: Ũ_ν⊤ (Ĩ⁻¹)_{νν} Ũ_ν, expected information at θ̃;
//! - `S_T` gradient: Ũ_ν⊤ (ν̂ − ν₀);
//! - `w*`  the adjusted likelihood ratio from [`crate::skovgaard`].
//!
//! All five are referred to χ²_r. S_T is reported exactly as computed (it
//! can be negative in unlucky samples); p-values clamp the statistic at
//! zero. Confidence intervals invert a statistic's acceptance region by
//! bracketing and bisection, refitting the restricted model at each trial
//! value (the Wald interval needs no refits and is closed-form).

use crate::error::{Error, Result};
use crate::estimate::{fit_mle, FitResult, Hypothesis};
use crate::likelihood::{expected_info, score};
use crate::linalg;
use crate::model::{design_state, to_max_form, ModelSpec, ObservationSet};
use crate::skovgaard::{adjusted_lr, NumericsFlags};
use crate::specfun::{chi2_quantile, chi2_sf};
use serde::{Deserialize, Serialize};

/// The five statistics, in reporting order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StatKind {
    LikelihoodRatio,
    Wald,
    Score,
    Gradient,
    AdjustedLikelihoodRatio,
}

impl StatKind {
    pub const ALL: [StatKind; 5] = [
        StatKind::LikelihoodRatio,
        StatKind::Wald,
        StatKind::Score,
        StatKind::Gradient,
        StatKind::AdjustedLikelihoodRatio,
    ];

    pub fn label(self) -> &'static str {
        match self {
            StatKind::LikelihoodRatio => "w",
            StatKind::Wald => "W",
            StatKind::Score => "S_R",
            StatKind::Gradient => "S_T",
            StatKind::AdjustedLikelihoodRatio => "w*",
        }
    }
}

impl std::fmt::Display for StatKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

impl std::str::FromStr for StatKind {
    type Err = Error;

    /// Accepts the display labels (case-sensitive: `w` is the likelihood
    /// ratio, `W` is Wald) plus spelled-out aliases.
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "w" => Ok(StatKind::LikelihoodRatio),
            "W" => Ok(StatKind::Wald),
            "S_R" => Ok(StatKind::Score),
            "S_T" => Ok(StatKind::Gradient),
            "w*" => Ok(StatKind::AdjustedLikelihoodRatio),
            _ => match s.to_ascii_lowercase().as_str() {
                "lr" | "likelihood-ratio" => Ok(StatKind::LikelihoodRatio),
                "wald" => Ok(StatKind::Wald),
                "score" | "sr" => Ok(StatKind::Score),
                "gradient" | "st" => Ok(StatKind::Gradient),
                "adjusted" | "wstar" | "w_star" | "adjusted-lr" => {
                    Ok(StatKind::AdjustedLikelihoodRatio)
                }
                _ => Err(Error::InvalidArgument(format!(
                    "unknown statistic `{s}`; expected one of w, W, S_R, S_T, w*"
                ))),
            },
        }
    }
}

impl Serialize for StatKind {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(self.label())
    }
}

impl<'de> Deserialize<'de> for StatKind {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StatResult {
    pub kind: StatKind,
    pub value: f64,
    pub p_value: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ParamSummary {
    pub name: String,
    pub estimate: f64,
    /// Large-sample standard error from the expected information; absent
    /// for restricted fits.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub se: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitSummary {
    pub parameters: Vec<ParamSummary>,
    pub loglik: f64,
    pub converged: bool,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct FlagSummary {
    pub near_zero_w: bool,
    pub zeta_degenerate: bool,
    pub ill_conditioned: bool,
    pub clamped_wstar: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NullPin {
    pub name: String,
    pub value: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TestReport {
    pub null: Vec<NullPin>,
    pub df: usize,
    pub statistics: Vec<StatResult>,
    pub unrestricted: FitSummary,
    pub restricted: FitSummary,
    pub flags: FlagSummary,
}

impl TestReport {
    pub fn statistic(&self, kind: StatKind) -> Option<&StatResult> {
        self.statistics.iter().find(|s| s.kind == kind)
    }

    /// Truncates a negative adjusted statistic at zero (its p-value is
    /// already 1) and records the clamp.
    pub fn clamp_wstar(&mut self) {
        if let Some(s) = self
            .statistics
            .iter_mut()
            .find(|s| s.kind == StatKind::AdjustedLikelihoodRatio)
        {
            if s.value < 0.0 {
                s.value = 0.0;
                self.flags.clamped_wstar = true;
            }
        }
    }
}

/// Lean result for simulation loops: the five statistic values in
/// [`StatKind::ALL`] order plus the fits they came from.
#[derive(Debug, Clone)]
pub struct TestOutcome {
    pub stats: [f64; 5],
    pub hat: FitResult,
    pub tilde: FitResult,
    pub flags: NumericsFlags,
}

/// Computes all five statistics for `hyp`, or an error if either fit fails
/// to converge (callers in simulation loops count these).
pub fn compute_tests(
    model: &ModelSpec,
    data: &ObservationSet,
    hyp: &Hypothesis,
) -> Result<TestOutcome> {
    if hyp.is_unrestricted() {
        return Err(Error::InvalidArgument(
            "the null hypothesis must restrict at least one parameter".into(),
        ));
    }
    let tilde = fit_mle(model, data, hyp, None)?;
    if !tilde.converged {
        return Err(Error::FitFailed {
            stage: "restricted".into(),
            iterations: tilde.iterations,
            loglik: tilde.loglik,
        });
    }
    let hat = fit_mle(model, data, &Hypothesis::unrestricted(), Some(&tilde.theta))?;
    if !hat.converged {
        return Err(Error::FitFailed {
            stage: "unrestricted".into(),
            iterations: hat.iterations,
            loglik: hat.loglik,
        });
    }

    let (wmodel, wdata) = to_max_form(model, data)?;
    let interest = hyp.restricted_indices();
    let hat_state = design_state(&wmodel, &hat.theta, &wdata)?;
    let tilde_state = design_state(&wmodel, &tilde.theta, &wdata)?;

    // Likelihood ratio and its adjustment.
    let adj = adjusted_lr(&wmodel, &wdata, &hat.theta, &tilde.theta, &interest)?;

    // Wald: difference against the νν block of the inverse expected
    // information at the unrestricted fit.
    let diff = nalgebra::DVector::from_iterator(
        interest.len(),
        hyp.pins().iter().map(|&(i, v0)| hat.theta.flat()[i] - v0),
    );
    let i_hat_inv = linalg::inverse(&expected_info(&hat_state).full, "expected information")?;
    let wald_block = linalg::select(&i_hat_inv, &interest, &interest);
    let wald = diff.dot(&linalg::solve_vec(&wald_block, &diff, "Wald block")?);

    // Score and gradient, from the restricted fit.
    let u_nu = linalg::select_vec(&score(&tilde_state).flat(), &interest);
    let i_tilde_inv = linalg::inverse(&expected_info(&tilde_state).full, "expected information")?;
    let score_stat = u_nu.dot(&(linalg::select(&i_tilde_inv, &interest, &interest) * &u_nu));
    let gradient = u_nu.dot(&diff);

    Ok(TestOutcome {
        stats: [adj.w, wald, score_stat, gradient, adj.wstar],
        hat,
        tilde,
        flags: adj.flags,
    })
}

/// Full report with p-values, parameter summaries, and standard errors.
pub fn run_tests(model: &ModelSpec, data: &ObservationSet, hyp: &Hypothesis) -> Result<TestReport> {
    let outcome = compute_tests(model, data, hyp)?;
    let r = hyp.r();
    let statistics = StatKind::ALL
        .iter()
        .zip(outcome.stats.iter())
        .map(|(&kind, &value)| StatResult {
            kind,
            value,
            p_value: chi2_sf(value.max(0.0), r as f64),
        })
        .collect();

    let names = model.param_names();
    let (wmodel, wdata) = to_max_form(model, data)?;
    let hat_state = design_state(&wmodel, &outcome.hat.theta, &wdata)?;
    let i_hat_inv = linalg::inverse(&expected_info(&hat_state).full, "expected information")?;
    let hat_flat = outcome.hat.theta.flat();
    let unrestricted = FitSummary {
        parameters: names
            .iter()
            .enumerate()
            .map(|(i, name)| ParamSummary {
                name: name.to_string(),
                estimate: hat_flat[i],
                se: Some(i_hat_inv[(i, i)].max(0.0).sqrt()),
            })
            .collect(),
        loglik: outcome.hat.loglik,
        converged: outcome.hat.converged,
        iterations: outcome.hat.iterations,
    };
    let tilde_flat = outcome.tilde.theta.flat();
    let restricted = FitSummary {
        parameters: names
            .iter()
            .enumerate()
            .map(|(i, name)| ParamSummary {
                name: name.to_string(),
                estimate: tilde_flat[i],
                se: None,
            })
            .collect(),
        loglik: outcome.tilde.loglik,
        converged: outcome.tilde.converged,
        iterations: outcome.tilde.iterations,
    };

    Ok(TestReport {
        null: hyp
            .pins()
            .iter()
            .map(|&(i, v)| NullPin {
                name: names[i].to_string(),
                value: v,
            })
            .collect(),
        df: r,
        statistics,
        unrestricted,
        restricted,
        flags: FlagSummary {
            near_zero_w: outcome.flags.near_zero_w,
            zeta_degenerate: outcome.flags.zeta_degenerate,
            ill_conditioned: outcome.flags.ill_conditioned,
            clamped_wstar: false,
        },
    })
}

/// Unrestricted fit summarized with standard errors from the inverse
/// expected information, plus any initialization warnings (e.g. a
/// rank-deficient starting-value regression).
pub fn fit_report(
    model: &ModelSpec,
    data: &ObservationSet,
) -> Result<(FitSummary, Vec<String>)> {
    let fit = fit_mle(model, data, &Hypothesis::unrestricted(), None)?;
    if !fit.converged {
        return Err(Error::FitFailed {
            stage: "unrestricted".into(),
            iterations: fit.iterations,
            loglik: fit.loglik,
        });
    }
    let (wmodel, wdata) = to_max_form(model, data)?;
    let state = design_state(&wmodel, &fit.theta, &wdata)?;
    let inv = linalg::inverse(&expected_info(&state).full, "expected information")?;
    let flat = fit.theta.flat();
    let summary = FitSummary {
        parameters: model
            .param_names()
            .iter()
            .enumerate()
            .map(|(i, name)| ParamSummary {
                name: name.to_string(),
                estimate: flat[i],
                se: Some(inv[(i, i)].max(0.0).sqrt()),
            })
            .collect(),
        loglik: fit.loglik,
        converged: fit.converged,
        iterations: fit.iterations,
    };
    Ok((summary, fit.rank_warnings))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConfidenceInterval {
    pub parameter: String,
    pub kind: StatKind,
    pub level: f64,
    pub estimate: f64,
    pub se: f64,
    pub lower: f64,
    pub upper: f64,
    /// True when the bracket search hit its expansion cap without crossing
    /// the critical value; the bound is then a clamp, not a root.
    pub lower_open: bool,
    pub upper_open: bool,
    /// Restricted refits that failed during the inversion (treated as
    /// rejection points).
    pub fit_failures: usize,
}

/// Inverts the acceptance region of `kind` for a single parameter. Every
/// trial value refits the restricted model warm-started at θ̂; the Wald
/// interval is closed-form.
pub fn confidence_interval(
    model: &ModelSpec,
    data: &ObservationSet,
    parameter: &str,
    kind: StatKind,
    level: f64,
) -> Result<ConfidenceInterval> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "confidence level must be in (0, 1), got {level}"
        )));
    }
    let idx = model.flat_index(parameter).ok_or_else(|| {
        Error::InvalidArgument(format!(
            "unknown parameter `{parameter}`; model parameters are {}",
            model.param_names().join(", ")
        ))
    })?;
    let hat = fit_mle(model, data, &Hypothesis::unrestricted(), None)?;
    if !hat.converged {
        return Err(Error::FitFailed {
            stage: "unrestricted".into(),
            iterations: hat.iterations,
            loglik: hat.loglik,
        });
    }
    let (wmodel, wdata) = to_max_form(model, data)?;
    let hat_state = design_state(&wmodel, &hat.theta, &wdata)?;
    let i_hat_inv = linalg::inverse(&expected_info(&hat_state).full, "expected information")?;
    let se = i_hat_inv[(idx, idx)].max(0.0).sqrt();
    if !(se > 0.0) {
        return Err(Error::Singular(format!(
            "no usable standard error for `{parameter}`"
        )));
    }
    let estimate = hat.theta.flat()[idx];
    let target = chi2_quantile(level, 1.0)?;

    if kind == StatKind::Wald {
        let half = target.sqrt() * se;
        return Ok(ConfidenceInterval {
            parameter: parameter.to_string(),
            kind,
            level,
            estimate,
            se,
            lower: estimate - half,
            upper: estimate + half,
            lower_open: false,
            upper_open: false,
            fit_failures: 0,
        });
    }

    let mut fit_failures = 0usize;
    let mut stat_at = |v: f64| -> f64 {
        let hyp = match Hypothesis::from_indices(model, vec![(idx, v)]) {
            Ok(h) => h,
            Err(_) => return f64::INFINITY,
        };
        let tilde = match fit_mle(model, data, &hyp, Some(&hat.theta)) {
            Ok(t) if t.converged => t,
            _ => {
                fit_failures += 1;
                return f64::INFINITY;
            }
        };
        let value = match kind {
            StatKind::LikelihoodRatio => 2.0 * (hat.loglik - tilde.loglik),
            StatKind::AdjustedLikelihoodRatio => {
                match adjusted_lr(&wmodel, &wdata, &hat.theta, &tilde.theta, &[idx]) {
                    Ok(adj) => adj.wstar,
                    Err(_) => {
                        fit_failures += 1;
                        return f64::INFINITY;
                    }
                }
            }
            StatKind::Score | StatKind::Gradient => {
                let Ok(ts) = design_state(&wmodel, &tilde.theta, &wdata) else {
                    fit_failures += 1;
                    return f64::INFINITY;
                };
                let u_nu = linalg::select_vec(&score(&ts).flat(), &[idx]);
                if kind == StatKind::Score {
                    let Ok(inv) = linalg::inverse(&expected_info(&ts).full, "expected information")
                    else {
                        fit_failures += 1;
                        return f64::INFINITY;
                    };
                    u_nu[0] * inv[(idx, idx)] * u_nu[0]
                } else {
                    u_nu[0] * (estimate - v)
                }
            }
            StatKind::Wald => unreachable!("handled above"),
        };
        if value.is_finite() {
            value
        } else {
            f64::INFINITY
        }
    };

    let mut bound = |dir: f64| -> (f64, bool) {
        let mut inner = estimate;
        let mut outer = None;
        for j in 1..=60 {
            let delta = (se * 1.2f64.powi(j)).min(60.0 * se);
            let v = estimate + dir * delta;
            if stat_at(v) >= target {
                outer = Some(v);
                break;
            }
            inner = v;
            if delta >= 60.0 * se {
                break;
            }
        }
        let Some(mut outer) = outer else {
            return (inner, true); // open side: never crossed the target
        };
        while (outer - inner).abs() > 1e-6 * se {
            let mid = 0.5 * (inner + outer);
            if stat_at(mid) >= target {
                outer = mid;
            } else {
                inner = mid;
            }
        }
        (0.5 * (inner + outer), false)
    };

    let (lower, lower_open) = bound(-1.0);
    let (upper, upper_open) = bound(1.0);
    Ok(ConfidenceInterval {
        parameter: parameter.to_string(),
        kind,
        level,
        estimate,
        se,
        lower,
        upper,
        lower_open,
        upper_open,
        fit_failures,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::PredictorExpr;
    use crate::model::{sample_response, Family, Link, Theta};
    use crate::rng::Stream;
    use approx::assert_relative_eq;
    use std::collections::BTreeMap;

    fn linear_model(disp_link: Link) -> ModelSpec {
        let loc = PredictorExpr::parse("b0 + b1*x", &["b0", "b1"], &["x"]).unwrap();
        let disp = PredictorExpr::parse("g0", &["g0"], &["x"]).unwrap();
        ModelSpec::new(Family::EvMax, loc, Link::Identity, disp, disp_link).unwrap()
    }

    fn simulate(model: &ModelSpec, theta: &Theta, n: usize, seed: u64) -> ObservationSet {
        let mut cov = Stream::new(seed, 1);
        let x: Vec<f64> = (0..n).map(|_| cov.uniform_in(-0.5, 0.5)).collect();
        let mut cols = BTreeMap::new();
        cols.insert("x".to_string(), x.clone());
        let mut resp = Stream::new(seed, 0);
        let y = sample_response(model, theta, &cols, n, &mut resp).unwrap();
        ObservationSet::new(y, vec!["x".into()], vec![x]).unwrap()
    }

    #[test]
    fn stat_kind_labels_roundtrip() {
        for kind in StatKind::ALL {
            let s = kind.to_string();
            assert_eq!(s.parse::<StatKind>().unwrap(), kind);
            let json = serde_json::to_string(&kind).unwrap();
            let back: StatKind = serde_json::from_str(&json).unwrap();
            assert_eq!(back, kind);
        }
        assert_eq!("w".parse::<StatKind>().unwrap(), StatKind::LikelihoodRatio);
        assert_eq!("W".parse::<StatKind>().unwrap(), StatKind::Wald);
        assert_eq!("wald".parse::<StatKind>().unwrap(), StatKind::Wald);
        assert!("x2".parse::<StatKind>().is_err());
    }

    #[test]
    fn report_has_all_statistics_and_sane_pvalues() {
        let model = linear_model(Link::Log);
        let truth = Theta::new(vec![1.0, 0.5], vec![-1.5]);
        let data = simulate(&model, &truth, 30, 44);
        let hyp = Hypothesis::by_name(&model, &[("b1", 0.0)]).unwrap();
        let report = run_tests(&model, &data, &hyp).unwrap();
        assert_eq!(report.df, 1);
        assert_eq!(report.statistics.len(), 5);
        for s in &report.statistics {
            assert!(s.value.is_finite());
            assert!(s.p_value > 0.0 && s.p_value <= 1.0, "{s:?}");
        }
        assert_eq!(report.null[0].name, "b1");
        assert!(report.unrestricted.converged && report.restricted.converged);
        assert!(report.unrestricted.loglik >= report.restricted.loglik);
        // Restricted fit carries the pin; unrestricted SEs are present.
        assert_eq!(report.restricted.parameters[1].estimate, 0.0);
        assert!(report.unrestricted.parameters.iter().all(|p| p.se.unwrap() > 0.0));
        // JSON shape survives a roundtrip.
        let json = serde_json::to_string(&report).unwrap();
        let back: TestReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back.statistics.len(), 5);
        assert_relative_eq!(
            back.statistic(StatKind::Wald).unwrap().value,
            report.statistic(StatKind::Wald).unwrap().value
        );
    }

    #[test]
    fn statistics_agree_asymptotically() {
        // All five are first-order equivalent: at n = 600 they should be
        // close to one another.
        let model = linear_model(Link::Log);
        let truth = Theta::new(vec![1.0, 0.3], vec![-1.0]);
        let data = simulate(&model, &truth, 600, 8);
        let hyp = Hypothesis::by_name(&model, &[("b1", 0.0)]).unwrap();
        let out = compute_tests(&model, &data, &hyp).unwrap();
        let w = out.stats[0];
        assert!(w > 1.0, "this draw should reject comfortably, w = {w}");
        for &s in &out.stats[1..] {
            assert!((s - w).abs() / w < 0.2, "stats {:?}", out.stats);
        }
    }

    #[test]
    fn all_five_invariant_under_dispersion_reparametrization() {
        let log_model = linear_model(Link::Log);
        let idn_model = linear_model(Link::Identity);
        let truth = Theta::new(vec![1.0, 0.0], vec![-1.2]);
        let data = simulate(&log_model, &truth, 22, 19);
        let hyp_log = Hypothesis::by_name(&log_model, &[("b1", 0.0)]).unwrap();
        let hyp_idn = Hypothesis::by_name(&idn_model, &[("b1", 0.0)]).unwrap();
        let a = compute_tests(&log_model, &data, &hyp_log).unwrap();
        let b = compute_tests(&idn_model, &data, &hyp_idn).unwrap();
        for i in 0..5 {
            assert_relative_eq!(a.stats[i], b.stats[i], max_relative = 1e-7, epsilon = 1e-9);
        }
    }

    #[test]
    fn unrestricted_hypothesis_is_rejected() {
        let model = linear_model(Link::Log);
        let truth = Theta::new(vec![1.0, 0.5], vec![-1.5]);
        let data = simulate(&model, &truth, 30, 44);
        assert!(compute_tests(&model, &data, &Hypothesis::unrestricted()).is_err());
    }

    #[test]
    fn wald_interval_is_closed_form() {
        let model = linear_model(Link::Log);
        let truth = Theta::new(vec![1.0, 0.5], vec![-1.5]);
        let data = simulate(&model, &truth, 40, 3);
        let ci = confidence_interval(&model, &data, "b1", StatKind::Wald, 0.95).unwrap();
        let half = chi2_quantile(0.95, 1.0).unwrap().sqrt() * ci.se;
        assert_relative_eq!(ci.lower, ci.estimate - half, max_relative = 1e-12);
        assert_relative_eq!(ci.upper, ci.estimate + half, max_relative = 1e-12);
        assert!(!ci.lower_open && !ci.upper_open);
        assert_eq!(ci.fit_failures, 0);
    }

    #[test]
    fn likelihood_ratio_interval_endpoints_sit_on_the_critical_value() {
        let model = linear_model(Link::Log);
        let truth = Theta::new(vec![1.0, 0.5], vec![-1.5]);
        let data = simulate(&model, &truth, 40, 3);
        let ci = confidence_interval(&model, &data, "b1", StatKind::LikelihoodRatio, 0.95).unwrap();
        assert!(ci.lower < ci.estimate && ci.estimate < ci.upper);
        let target = chi2_quantile(0.95, 1.0).unwrap();
        // Re-evaluate w at the endpoints: they must sit on the boundary.
        let hat = fit_mle(&model, &data, &Hypothesis::unrestricted(), None).unwrap();
        for v in [ci.lower, ci.upper] {
            let hyp = Hypothesis::by_name(&model, &[("b1", v)]).unwrap();
            let tilde = fit_mle(&model, &data, &hyp, Some(&hat.theta)).unwrap();
            let w = 2.0 * (hat.loglik - tilde.loglik);
            assert!((w - target).abs() < 1e-3, "w at endpoint {v}: {w} vs {target}");
        }
        // Higher confidence, wider interval.
        let wider =
            confidence_interval(&model, &data, "b1", StatKind::LikelihoodRatio, 0.99).unwrap();
        assert!(wider.lower < ci.lower && wider.upper > ci.upper);
    }

    #[test]
    fn adjusted_interval_exists_and_brackets_the_estimate() {
        let model = linear_model(Link::Log);
        let truth = Theta::new(vec![1.0, 0.5], vec![-1.5]);
        let data = simulate(&model, &truth, 25, 77);
        let ci =
            confidence_interval(&model, &data, "b1", StatKind::AdjustedLikelihoodRatio, 0.90)
                .unwrap();
        assert!(ci.lower < ci.estimate && ci.estimate < ci.upper, "{ci:?}");
        assert_eq!(ci.fit_failures, 0);
    }

    #[test]
    fn interval_argument_validation() {
        let model = linear_model(Link::Log);
        let truth = Theta::new(vec![1.0, 0.5], vec![-1.5]);
        let data = simulate(&model, &truth, 25, 77);
        assert!(confidence_interval(&model, &data, "zz", StatKind::Wald, 0.95).is_err());
        assert!(confidence_interval(&model, &data, "b1", StatKind::Wald, 1.0).is_err());
        assert!(confidence_interval(&model, &data, "b1", StatKind::Wald, 0.0).is_err());
    }

    #[test]
    fn clamp_wstar_only_touches_negative_values() {
        let model = linear_model(Link::Log);
        let truth = Theta::new(vec![1.0, 0.5], vec![-1.5]);
        let data = simulate(&model, &truth, 30, 44);
        let hyp = Hypothesis::by_name(&model, &[("b1", 0.0)]).unwrap();
        let mut report = run_tests(&model, &data, &hyp).unwrap();
        let before = report.statistic(StatKind::AdjustedLikelihoodRatio).unwrap().value;
        report.clamp_wstar();
        let after = report.statistic(StatKind::AdjustedLikelihoodRatio).unwrap().value;
        if before >= 0.0 {
            assert_eq!(before, after);
            assert!(!report.flags.clamped_wstar);
        } else {
            assert_eq!(after, 0.0);
            assert!(report.flags.clamped_wstar);
        }
    }
}
