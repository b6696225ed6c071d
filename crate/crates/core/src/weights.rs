//! Weight functions over follow-up time, their discrete-visit counterparts,
//! and the linear contrasts both induce. Time is rescaled so baseline is 0
//! and the final visit is 1.

use crate::covariance::EffectCovariance;
use crate::error::{PprError, Result};
use crate::quadrature::gauss_legendre;

/// Allowed drift of a discrete weight vector's sum from 1.
pub const WEIGHT_SUM_TOL: f64 = 1e-9;
/// Agreement required between the slope form and the contrast form.
pub const SLOPE_FORM_TOL: f64 = 1e-10;
/// Allowed zero-sum drift for exact discrete contrasts.
pub const CONTRAST_SUM_TOL: f64 = 1e-12;
/// Allowed zero-sum drift for quadrature contrasts of smooth weights.
pub const QUADRATURE_SUM_TOL: f64 = 1e-8;

const EQUAL_SPACING_TOL: f64 = 1e-12;
const KINK_NODE_TOL: f64 = 1e-12;

/// Visit times, strictly increasing from 0 to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    points: Vec<f64>,
}

impl TimeGrid {
    pub fn new(points: Vec<f64>) -> Result<Self> {
        if points.len() < 2 {
            return Err(PprError::InvalidArgument(format!(
                "a visit grid needs at least 2 points, got {}",
                points.len()
            )));
        }
        if points.iter().any(|t| !t.is_finite()) {
            return Err(PprError::NonFinite {
                context: "visit grid".to_string(),
            });
        }
        if points[0] != 0.0 {
            return Err(PprError::InvalidArgument(format!(
                "first visit time must be 0, got {}",
                points[0]
            )));
        }
        if *points.last().unwrap() != 1.0 {
            return Err(PprError::InvalidArgument(format!(
                "last visit time must be 1, got {}",
                points.last().unwrap()
            )));
        }
        if points.windows(2).any(|w| w[1] <= w[0]) {
            return Err(PprError::InvalidArgument(
                "visit times must be strictly increasing".to_string(),
            ));
        }
        Ok(Self { points })
    }

    /// m visits at i/(m-1), i = 0..m-1.
    pub fn equal_spaced(m: usize) -> Result<Self> {
        if m < 2 {
            return Err(PprError::InvalidArgument(format!(
                "equal-spaced grid needs m >= 2, got {m}"
            )));
        }
        let points = (0..m).map(|i| i as f64 / (m - 1) as f64).collect();
        Self::new(points)
    }

    /// Endpoints plus the order m-2 Gauss-Legendre nodes mapped to (0, 1).
    pub fn gauss_legendre_augmented(m: usize) -> Result<Self> {
        if m < 3 {
            return Err(PprError::InvalidArgument(format!(
                "quadrature-augmented grid needs m >= 3, got {m}"
            )));
        }
        let rule = gauss_legendre(m - 2)?;
        let mut points = Vec::with_capacity(m);
        points.push(0.0);
        points.extend(rule.nodes().iter().map(|&x| 0.5 * (x + 1.0)));
        points.push(1.0);
        Self::new(points)
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        false // at least two points by construction
    }

    /// True when every point is within `tol` of i/(m-1).
    pub fn is_equal_spaced(&self, tol: f64) -> bool {
        let m = self.points.len();
        self.points
            .iter()
            .enumerate()
            .all(|(i, &t)| (t - i as f64 / (m - 1) as f64).abs() <= tol)
    }
}

/// Weight function on [0, 1] integrating to 1.
#[derive(Debug, Clone, PartialEq)]
pub enum WeightSpec {
    /// Beta(a, b) density, a >= 1 and b >= 1.
    Beta { a: f64, b: f64 },
    /// Proportional to min(1 - t, 1/2); flat early, linear late.
    PartialAuc,
    /// Proportional to 1 - t^alpha, alpha > 0.
    PowerAuc { alpha: f64 },
    /// Convex combination of other weight functions.
    Mixture(Vec<(f64, WeightSpec)>),
}

impl WeightSpec {
    pub fn beta(a: f64, b: f64) -> Result<Self> {
        if !(a.is_finite() && b.is_finite() && a >= 1.0 && b >= 1.0) {
            return Err(PprError::InvalidArgument(format!(
                "beta weight parameters must satisfy a >= 1 and b >= 1, got a={a}, b={b}"
            )));
        }
        Ok(WeightSpec::Beta { a, b })
    }

    /// Change from baseline: uniform weight, Beta(1, 1).
    pub fn cfb() -> Self {
        WeightSpec::Beta { a: 1.0, b: 1.0 }
    }

    /// Least-squares slope weight, Beta(2, 2).
    pub fn ols() -> Self {
        WeightSpec::Beta { a: 2.0, b: 2.0 }
    }

    /// Area-under-the-curve weight, Beta(1, 2).
    pub fn auc() -> Self {
        WeightSpec::Beta { a: 1.0, b: 2.0 }
    }

    pub fn partial_auc() -> Self {
        WeightSpec::PartialAuc
    }

    pub fn power_auc(alpha: f64) -> Result<Self> {
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(PprError::InvalidArgument(format!(
                "power weight exponent must be positive, got {alpha}"
            )));
        }
        Ok(WeightSpec::PowerAuc { alpha })
    }

    pub fn mixture(parts: Vec<(f64, WeightSpec)>) -> Result<Self> {
        if parts.is_empty() {
            return Err(PprError::InvalidArgument(
                "mixture weight needs at least one component".to_string(),
            ));
        }
        if parts.iter().any(|(c, _)| !c.is_finite() || *c < 0.0) {
            return Err(PprError::InvalidArgument(
                "mixture coefficients must be nonnegative".to_string(),
            ));
        }
        let total: f64 = parts.iter().map(|(c, _)| c).sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(PprError::InvalidArgument(format!(
                "mixture coefficients must sum to 1, got {total}"
            )));
        }
        Ok(WeightSpec::Mixture(parts))
    }

    /// w(t).
    pub fn eval(&self, t: f64) -> f64 {
        match self {
            WeightSpec::Beta { a, b } => {
                let ta = if *a == 1.0 { 1.0 } else { t.powf(a - 1.0) };
                let tb = if *b == 1.0 { 1.0 } else { (1.0 - t).powf(b - 1.0) };
                beta_norm(*a, *b) * ta * tb
            }
            WeightSpec::PartialAuc => {
                if t <= 0.5 {
                    4.0 / 3.0
                } else {
                    (8.0 / 3.0) * (1.0 - t)
                }
            }
            WeightSpec::PowerAuc { alpha } => {
                (alpha + 1.0) / alpha * (1.0 - t.powf(*alpha))
            }
            WeightSpec::Mixture(parts) => {
                parts.iter().map(|(c, s)| c * s.eval(t)).sum()
            }
        }
    }

    /// w'(t). At a kink the left derivative is returned; quadrature
    /// constructions refuse nodes that land on a kink, so the convention
    /// only shows up under direct evaluation.
    pub fn deriv(&self, t: f64) -> f64 {
        match self {
            WeightSpec::Beta { a, b } => {
                let mut d = 0.0;
                if *a != 1.0 {
                    let tb = if *b == 1.0 { 1.0 } else { (1.0 - t).powf(b - 1.0) };
                    d += (a - 1.0) * t.powf(a - 2.0) * tb;
                }
                if *b != 1.0 {
                    let ta = if *a == 1.0 { 1.0 } else { t.powf(a - 1.0) };
                    d -= (b - 1.0) * ta * (1.0 - t).powf(b - 2.0);
                }
                beta_norm(*a, *b) * d
            }
            WeightSpec::PartialAuc => {
                if t <= 0.5 {
                    0.0
                } else {
                    -8.0 / 3.0
                }
            }
            WeightSpec::PowerAuc { alpha } => {
                -(alpha + 1.0) * t.powf(alpha - 1.0)
            }
            WeightSpec::Mixture(parts) => {
                parts.iter().map(|(c, s)| c * s.deriv(t)).sum()
            }
        }
    }

    /// Interior points where the derivative jumps, sorted and deduplicated.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut out = Vec::new();
        self.collect_kinks(&mut out);
        out.sort_by(|x, y| x.total_cmp(y));
        out.dedup();
        out
    }

    fn collect_kinks(&self, out: &mut Vec<f64>) {
        match self {
            WeightSpec::PartialAuc => out.push(0.5),
            WeightSpec::Mixture(parts) => {
                for (_, s) in parts {
                    s.collect_kinks(out);
                }
            }
            _ => {}
        }
    }

    pub fn label(&self) -> String {
        match self {
            WeightSpec::Beta { a, b } if *a == 1.0 && *b == 1.0 => "cfb".to_string(),
            WeightSpec::Beta { a, b } if *a == 2.0 && *b == 2.0 => "ols".to_string(),
            WeightSpec::Beta { a, b } if *a == 1.0 && *b == 2.0 => "auc".to_string(),
            WeightSpec::Beta { a, b } => format!("beta({a},{b})"),
            WeightSpec::PartialAuc => "partial-auc".to_string(),
            WeightSpec::PowerAuc { alpha } => format!("power-auc({alpha})"),
            WeightSpec::Mixture(_) => "mixture".to_string(),
        }
    }
}

/// 1/B(a, b). Exact for small integer parameters, Lanczos otherwise.
fn beta_norm(a: f64, b: f64) -> f64 {
    if a.fract() == 0.0 && b.fract() == 0.0 && a + b <= 42.0 {
        let n = (a + b) as u128 - 2;
        let k = a as u128 - 1;
        let mut num: u128 = 1;
        let mut den: u128 = 1;
        for j in 1..=k {
            num *= n - k + j;
            den *= j;
        }
        (num / den) as f64 * (a + b - 1.0)
    } else {
        (ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b)).exp()
    }
}

pub(crate) fn beta_pdf(a: f64, b: f64, t: f64) -> f64 {
    beta_norm(a, b) * t.powf(a - 1.0) * (1.0 - t).powf(b - 1.0)
}

/// Lanczos (g = 7, 9 terms), for x > 0. Relative error below 3e-15 here.
fn ln_gamma(x: f64) -> f64 {
    const C: [f64; 9] = [
        0.99999999999980993,
        676.5203681218851,
        -1259.1392167224028,
        771.32342877765313,
        -176.61502916214059,
        12.507343278686905,
        -0.13857109526572012,
        9.9843695780195716e-6,
        1.5056327351493116e-7,
    ];
    let x = x - 1.0;
    let mut acc = C[0];
    for (i, &c) in C.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + 7.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

/// Weights attached to the increments between consecutive visits.
/// `w[i]` weighs the change from visit i+1 to visit i+2 (1-based: w_2..w_m).
#[derive(Debug, Clone)]
pub struct DiscreteWeights {
    grid: TimeGrid,
    w: Vec<f64>,
    label: String,
}

impl DiscreteWeights {
    pub fn new(grid: TimeGrid, w: Vec<f64>, label: impl Into<String>) -> Result<Self> {
        if w.len() + 1 != grid.len() {
            return Err(PprError::GridMismatch {
                expected: grid.len(),
                got: w.len() + 1,
            });
        }
        if w.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(PprError::InvalidArgument(
                "discrete weights must be finite and nonnegative".to_string(),
            ));
        }
        let total: f64 = w.iter().sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(PprError::InvalidArgument(format!(
                "discrete weights must sum to 1, got {total}"
            )));
        }
        Ok(Self {
            grid,
            w,
            label: label.into(),
        })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.w
    }

    pub fn label(&self) -> &str {
        &self.label
    }
}

/// Change from baseline: w_i equals the spacing, so the estimand telescopes
/// to f(1) - f(0).
pub fn cfb_discrete_weights(grid: &TimeGrid) -> Result<DiscreteWeights> {
    let w = grid.points().windows(2).map(|p| p[1] - p[0]).collect();
    DiscreteWeights::new(grid.clone(), w, "cfb")
}

/// Weights reproducing the least-squares slope through the visit values,
/// for an arbitrary grid. Requires every induced weight to be positive.
pub fn ols_discrete_weights(grid: &TimeGrid) -> Result<DiscreteWeights> {
    let t = grid.points();
    let m = t.len();
    let mean = t.iter().sum::<f64>() / m as f64;
    let den: f64 = t.iter().map(|x| (x - mean) * (x - mean)).sum();
    let mut w = vec![0.0; m - 1];
    let mut tail = 0.0;
    for i in (1..m).rev() {
        tail += t[i] - mean;
        w[i - 1] = (t[i] - t[i - 1]) * tail / den;
        if w[i - 1] <= 0.0 {
            return Err(PprError::InvalidArgument(format!(
                "least-squares increment weight is not positive at visit {} (value {})",
                i + 1,
                w[i - 1]
            )));
        }
    }
    DiscreteWeights::new(grid.clone(), w, "ols")
}

/// Closed form of `ols_discrete_weights` on the equal-spaced grid:
/// w_i = 6 (i-1)(m+1-i) / (m (m-1) (m+1)), i = 2..m.
pub fn ols_equal_spaced_weights(m: usize) -> Result<DiscreteWeights> {
    let grid = TimeGrid::equal_spaced(m)?;
    let den = (m * (m - 1) * (m + 1)) as f64;
    let w = (2..=m)
        .map(|i| 6.0 * ((i - 1) * (m + 1 - i)) as f64 / den)
        .collect();
    DiscreteWeights::new(grid, w, "ols")
}

/// Weights reproducing the normalized area under the visit values relative
/// to baseline: w_i = 2 (m - i + 1) / (m (m - 1)). Only defined on the
/// equal-spaced grid.
pub fn auc_discrete_weights(grid: &TimeGrid) -> Result<DiscreteWeights> {
    if !grid.is_equal_spaced(EQUAL_SPACING_TOL) {
        return Err(PprError::InvalidArgument(
            "area-under-curve weights are only defined on an equal-spaced grid".to_string(),
        ));
    }
    let m = grid.len();
    let den = (m * (m - 1)) as f64;
    let w = (2..=m).map(|i| 2.0 * (m - i + 1) as f64 / den).collect();
    DiscreteWeights::new(grid.clone(), w, "auc")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ContrastKind {
    /// Applies exactly to visit values on the grid.
    ExactDiscrete,
    /// Approximates the continuous estimand through quadrature.
    Quadrature,
}

/// Linear functional of the visit values: sum_i v_i f(t_i).
#[derive(Debug, Clone)]
pub struct Contrast {
    grid: TimeGrid,
    coeffs: Vec<f64>,
    kind: ContrastKind,
    label: String,
}

impl Contrast {
    pub fn new(
        grid: TimeGrid,
        coeffs: Vec<f64>,
        kind: ContrastKind,
        label: impl Into<String>,
    ) -> Result<Self> {
        if coeffs.len() != grid.len() {
            return Err(PprError::GridMismatch {
                expected: grid.len(),
                got: coeffs.len(),
            });
        }
        if coeffs.iter().any(|x| !x.is_finite()) {
            return Err(PprError::NonFinite {
                context: "contrast coefficients".to_string(),
            });
        }
        Ok(Self {
            grid,
            coeffs,
            kind,
            label: label.into(),
        })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn kind(&self) -> ContrastKind {
        self.kind
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// sum_i v_i values_i.
    pub fn apply(&self, values: &[f64]) -> Result<f64> {
        if values.len() != self.coeffs.len() {
            return Err(PprError::GridMismatch {
                expected: self.coeffs.len(),
                got: values.len(),
            });
        }
        Ok(self.coeffs.iter().zip(values).map(|(v, x)| v * x).sum())
    }
}

/// Rewrites increment weights as coefficients on the visit values:
///   v_1 = -w_2/h_2,  v_i = w_i/h_i - w_{i+1}/h_{i+1},  v_m = w_m/h_m,
/// with h_i = t_i - t_{i-1}. The last coefficient is recomputed as the
/// negated partial sum, which pins sum(v) to exactly zero.
pub fn contrast_from_weights(dw: &DiscreteWeights) -> Result<Contrast> {
    let t = dw.grid().points();
    let w = dw.values();
    let m = t.len();
    let mut v = vec![0.0; m];
    v[0] = -w[0] / (t[1] - t[0]);
    for i in 1..m - 1 {
        v[i] = w[i - 1] / (t[i] - t[i - 1]) - w[i] / (t[i + 1] - t[i]);
    }
    v[m - 1] = w[m - 2] / (t[m - 1] - t[m - 2]);
    let head: f64 = v[..m - 1].iter().sum();
    let drift = head + v[m - 1];
    if drift.abs() < CONTRAST_SUM_TOL {
        v[m - 1] = -head;
    }
    Contrast::new(
        dw.grid().clone(),
        v,
        ContrastKind::ExactDiscrete,
        dw.label(),
    )
}

/// Contrast on the quadrature-augmented grid reproducing the continuous
/// weighted rate of a smooth trajectory:
///   q_1 = -w(0),  q_m = w(1),  q_i = -a_i w'(t_i) / 2 at interior nodes,
/// where a_i are the order m-2 Gauss-Legendre weights. Refuses grids whose
/// interior nodes hit a kink of w.
pub fn quadrature_contrast(spec: &WeightSpec, m: usize) -> Result<Contrast> {
    if m < 3 {
        return Err(PprError::InvalidArgument(format!(
            "quadrature contrast needs m >= 3 visits, got {m}"
        )));
    }
    let grid = TimeGrid::gauss_legendre_augmented(m)?;
    let rule = gauss_legendre(m - 2)?;
    let kinks = spec.breakpoints();
    if !kinks.is_empty() {
        for &t in &grid.points()[1..m - 1] {
            if kinks.iter().any(|&b| (t - b).abs() <= KINK_NODE_TOL) {
                return Err(PprError::InvalidArgument(format!(
                    "a quadrature node at t={t} lands on a kink of the weight \
                     function; choose a different m"
                )));
            }
        }
    }
    let mut q = vec![0.0; m];
    q[0] = -spec.eval(0.0) + 0.0;
    q[m - 1] = spec.eval(1.0) + 0.0;
    for (i, (&t, &a)) in grid.points()[1..m - 1]
        .iter()
        .zip(rule.weights())
        .enumerate()
    {
        q[i + 1] = -0.5 * a * spec.deriv(t) + 0.0;
    }
    Contrast::new(grid, q, ContrastKind::Quadrature, spec.label())
}

/// Replaces the baseline coefficient with the value minimizing the variance
/// of the contrast under `sigma`:
///   v_1* = -sum_{i>=2} v_i sigma_{i1} / sigma_11.
/// Every other coefficient is kept, so the estimand is unchanged whenever
/// the baseline effect is zero.
pub fn smart_first_coefficient(c: &Contrast, sigma: &EffectCovariance) -> Result<Contrast> {
    if sigma.grid().len() != c.grid().len() {
        return Err(PprError::GridMismatch {
            expected: c.grid().len(),
            got: sigma.grid().len(),
        });
    }
    if sigma.grid() != c.grid() {
        return Err(PprError::InvalidArgument(
            "contrast and covariance are defined on different visit grids".to_string(),
        ));
    }
    let s11 = sigma.matrix().get(0, 0);
    if s11 <= 0.0 {
        return Err(PprError::NotPositiveDefinite { minor: 1 });
    }
    let v = c.coefficients();
    let mut v1 = 0.0;
    for (i, &vi) in v.iter().enumerate().skip(1) {
        v1 -= vi * sigma.matrix().get(i, 0);
    }
    v1 /= s11;
    let mut coeffs = v.to_vec();
    coeffs[0] = v1;
    Contrast::new(c.grid().clone(), coeffs, c.kind(), c.label())
}
