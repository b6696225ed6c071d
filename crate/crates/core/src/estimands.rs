//! Weighted progression-rate estimands: population values of trajectories,
//! plug-in estimates from per-visit effect estimates, and the comparison
//! metrics built on them.

use crate::covariance::{spd_solve, EffectCovariance};
use crate::error::{PprError, Result};
use crate::quadrature::{gauss_legendre, integrate};
use crate::trajectories::{effect_cumulative, effect_rate, ScenarioId, TrajectoryFn};
use crate::weights::{beta_pdf, smart_first_coefficient, Contrast, DiscreteWeights, WeightSpec};

/// Variance this far below zero is treated as a model error rather than
/// rounding noise.
const NEGATIVE_VARIANCE_TOL: f64 = 1e-12;

const MIN_NODES: usize = 8;

/// Weighted mean slope over the visits, in slope form:
/// sum_i w_i (f(t_i) - f(t_{i-1})) / (t_i - t_{i-1}).
pub fn discrete_ppr(dw: &DiscreteWeights, values: &[f64]) -> Result<f64> {
    let t = dw.grid().points();
    if values.len() != t.len() {
        return Err(PprError::GridMismatch {
            expected: t.len(),
            got: values.len(),
        });
    }
    let w = dw.values();
    let mut acc = 0.0;
    for i in 1..t.len() {
        acc += w[i - 1] * (values[i] - values[i - 1]) / (t[i] - t[i - 1]);
    }
    Ok(acc)
}

fn piecewise_integral<F: Fn(f64) -> f64>(f: F, spec: &WeightSpec, nodes: usize) -> Result<f64> {
    let rule = gauss_legendre(nodes)?;
    let mut edges = vec![0.0];
    edges.extend(spec.breakpoints());
    edges.push(1.0);
    let mut acc = 0.0;
    for pair in edges.windows(2) {
        acc += integrate(&f, pair[0], pair[1], &rule)?;
    }
    Ok(acc)
}

fn check_nodes(nodes: usize) -> Result<()> {
    if nodes < MIN_NODES {
        return Err(PprError::InvalidArgument(format!(
            "continuous estimands need at least {MIN_NODES} quadrature nodes, got {nodes}"
        )));
    }
    Ok(())
}

/// Weighted average of the instantaneous slope: integral of w(t) f'(t) over
/// [0, 1]. Integration is split at weight kinks so each piece is smooth.
pub fn continuous_ppr(f: &TrajectoryFn, spec: &WeightSpec, nodes: usize) -> Result<f64> {
    check_nodes(nodes)?;
    piecewise_integral(|t| spec.eval(t) * f.derivative(t), spec, nodes)
}

/// Population least-squares slope of f(T) on T with T ~ Beta(a - 1, b - 1),
/// a > 1 and b > 1. Equals the progression rate under the Beta(a, b) weight:
/// integrating the centered sampling density from 0 to t yields the
/// Beta(a, b) density up to the variance factor.
pub fn wls_slope_beta(f: &TrajectoryFn, a: f64, b: f64, nodes: usize) -> Result<f64> {
    if !(a.is_finite() && b.is_finite() && a > 1.0 && b > 1.0) {
        return Err(PprError::InvalidArgument(format!(
            "slope regression needs a > 1 and b > 1, got a={a}, b={b}"
        )));
    }
    check_nodes(nodes)?;
    let rule = gauss_legendre(nodes)?;
    let (p, q) = (a - 1.0, b - 1.0);
    let mu = p / (p + q);
    let num = integrate(|t| beta_pdf(p, q, t) * (t - mu) * f.value(t), 0.0, 1.0, &rule)?;
    let den = integrate(|t| beta_pdf(p, q, t) * (t - mu) * (t - mu), 0.0, 1.0, &rule)?;
    if !(den > 0.0) {
        return Err(PprError::NonFinite {
            context: "slope regression denominator".to_string(),
        });
    }
    Ok(num / den)
}

/// Per-visit effect estimates with their covariance.
#[derive(Debug, Clone)]
pub struct EstimateBundle {
    delta_hat: Vec<f64>,
    sigma: EffectCovariance,
}

impl EstimateBundle {
    pub fn new(delta_hat: Vec<f64>, sigma: EffectCovariance) -> Result<Self> {
        if delta_hat.len() != sigma.grid().len() {
            return Err(PprError::GridMismatch {
                expected: sigma.grid().len(),
                got: delta_hat.len(),
            });
        }
        if delta_hat.iter().any(|x| !x.is_finite()) {
            return Err(PprError::NonFinite {
                context: "effect estimates".to_string(),
            });
        }
        Ok(Self { delta_hat, sigma })
    }

    pub fn grid(&self) -> &crate::weights::TimeGrid {
        self.sigma.grid()
    }

    pub fn effects(&self) -> &[f64] {
        &self.delta_hat
    }

    pub fn covariance(&self) -> &EffectCovariance {
        &self.sigma
    }
}

/// A point estimate with its sampling variance.
#[derive(Debug, Clone)]
pub struct PprResult {
    pub estimand: String,
    pub point: f64,
    pub variance: f64,
    pub se: f64,
    pub z_squared: f64,
}

impl PprResult {
    pub fn from_point_variance(estimand: impl Into<String>, point: f64, variance: f64) -> Result<Self> {
        if variance < -NEGATIVE_VARIANCE_TOL {
            return Err(PprError::NonFinite {
                context: format!("contrast variance ({variance}, negative beyond tolerance)"),
            });
        }
        let variance = variance.max(0.0);
        let se = variance.sqrt();
        let z_squared = if variance > 0.0 {
            point * point / variance
        } else {
            0.0
        };
        Ok(Self {
            estimand: estimand.into(),
            point,
            variance,
            se,
            z_squared,
        })
    }
}

fn contrast_variance(c: &Contrast, sigma: &EffectCovariance) -> f64 {
    let v = c.coefficients();
    let m = v.len();
    let mut acc = 0.0;
    for i in 0..m {
        for j in 0..m {
            acc += v[i] * v[j] * sigma.matrix().get(i, j);
        }
    }
    acc
}

fn check_alignment(c: &Contrast, bundle: &EstimateBundle) -> Result<()> {
    if bundle.grid().len() != c.grid().len() {
        return Err(PprError::GridMismatch {
            expected: c.grid().len(),
            got: bundle.grid().len(),
        });
    }
    if bundle.grid() != c.grid() {
        return Err(PprError::InvalidArgument(
            "contrast and estimates are defined on different visit grids".to_string(),
        ));
    }
    Ok(())
}

/// Applies the contrast to the effect estimates: point v'delta_hat,
/// variance v' Sigma v.
pub fn delta_ppr_estimate(c: &Contrast, bundle: &EstimateBundle) -> Result<PprResult> {
    check_alignment(c, bundle)?;
    let point = c.apply(bundle.effects())?;
    let variance = contrast_variance(c, bundle.covariance());
    PprResult::from_point_variance(c.label(), point, variance)
}

/// Same estimand with the baseline coefficient replaced by its
/// variance-minimizing value. Never has larger variance than the plain
/// contrast, and the same point whenever the baseline effect estimate is 0.
pub fn delta_ppr_smart(c: &Contrast, bundle: &EstimateBundle) -> Result<PprResult> {
    check_alignment(c, bundle)?;
    let smart = smart_first_coefficient(c, bundle.covariance())?;
    delta_ppr_estimate(&smart, bundle)
}

/// Largest attainable squared signal-to-noise ratio over all linear
/// functionals: delta' Sigma^{-1} delta.
pub fn optimal_snr(delta: &[f64], sigma: &EffectCovariance) -> Result<f64> {
    if delta.len() != sigma.grid().len() {
        return Err(PprError::GridMismatch {
            expected: sigma.grid().len(),
            got: delta.len(),
        });
    }
    let x = spd_solve(sigma.matrix(), delta)?;
    Ok(delta.iter().zip(&x).map(|(d, y)| d * y).sum())
}

/// Variance of the least-squares slope contrast relative to change from
/// baseline under compound symmetry on an equal-spaced grid:
/// 6 (m - 1) / (m (m + 1)). Equals 1 at m = 2 and decreases in m.
pub fn cs_variance_ratio(m: usize) -> f64 {
    debug_assert!(m >= 2);
    6.0 * (m - 1) as f64 / ((m * (m + 1)) as f64)
}

/// Comparison of a candidate estimand against a reference, in percent.
#[derive(Debug, Clone, Copy)]
pub struct RelativeMetrics {
    /// 100 |candidate signal| / |reference signal|.
    pub signal_pct: f64,
    /// 100 sqrt(candidate variance / reference variance).
    pub se_pct: f64,
    /// Sample size needed for the same power, as a percentage of the
    /// reference. None when the candidate signal is zero.
    pub rel_sample_size_pct: Option<f64>,
}

pub fn relative_metrics(
    candidate_signal: f64,
    candidate_variance: f64,
    reference_signal: f64,
    reference_variance: f64,
) -> Result<RelativeMetrics> {
    if reference_signal == 0.0 || !(reference_variance > 0.0) {
        return Err(PprError::InvalidArgument(
            "reference estimand must have nonzero signal and positive variance".to_string(),
        ));
    }
    if candidate_variance < 0.0 {
        return Err(PprError::InvalidArgument(format!(
            "candidate variance must be nonnegative, got {candidate_variance}"
        )));
    }
    let signal_pct = 100.0 * (candidate_signal.abs() / reference_signal.abs());
    let se_pct = 100.0 * (candidate_variance / reference_variance).sqrt();
    // ratio of noise-to-signal ratios, grouped so a candidate identical to
    // the reference lands on exactly 100
    let rel_sample_size_pct = if candidate_signal == 0.0 {
        None
    } else {
        Some(
            100.0
                * ((candidate_variance / (candidate_signal * candidate_signal))
                    / (reference_variance / (reference_signal * reference_signal))),
        )
    };
    Ok(RelativeMetrics {
        signal_pct,
        se_pct,
        rel_sample_size_pct,
    })
}

/// Ratio of treated to control progression rate. The control rate must be
/// positive for the ratio to be interpretable.
pub fn ppr_ratio(treated: f64, control: f64) -> Result<f64> {
    if !(control > 0.0) {
        return Err(PprError::InvalidArgument(format!(
            "control progression rate must be positive, got {control}"
        )));
    }
    Ok(treated / control)
}

/// Both sides of the identity
///   integral(w Delta') = integral((w - wbar)(Delta' - Delta(1))) + Delta(1),
/// with wbar computed by quadrature so the check exercises the weight
/// normalization too. Returns (lhs, rhs).
pub fn covariance_decomposition_check(
    scenario: ScenarioId,
    spec: &WeightSpec,
    nodes: usize,
) -> Result<(f64, f64)> {
    check_nodes(nodes)?;
    let lhs = piecewise_integral(|t| spec.eval(t) * effect_rate(scenario, t), spec, nodes)?;
    let wbar = piecewise_integral(|t| spec.eval(t), spec, nodes)?;
    let dbar = effect_cumulative(scenario, 1.0);
    let cov = piecewise_integral(
        |t| (spec.eval(t) - wbar) * (effect_rate(scenario, t) - dbar),
        spec,
        nodes,
    )?;
    Ok((lhs, cov + dbar))
}
