//! Built-in mean trajectories and treatment-effect shapes used by the
//! comparison study. All curves live on rescaled follow-up time [0, 1].

use std::sync::Arc;

use crate::quadrature::normal_cdf;

/// Shape of the treatment effect over follow-up.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ScenarioId {
    /// Effect accrues fast early, then slows: rate 0.45 (2 - 1.1 t)^2.
    Decreasing,
    /// Effect accrues at constant rate 1.
    Constant,
    /// Effect accrues slowly at first: rate 1.2 (1 - e^{-6t}).
    Increasing,
    /// Rate rises then falls: a Gaussian bump centered at t = 0.55.
    IncThenDec,
}

impl ScenarioId {
    pub fn all() -> [ScenarioId; 4] {
        [
            ScenarioId::Decreasing,
            ScenarioId::Constant,
            ScenarioId::Increasing,
            ScenarioId::IncThenDec,
        ]
    }

    pub fn label(&self) -> &'static str {
        match self {
            ScenarioId::Decreasing => "decreasing",
            ScenarioId::Constant => "constant",
            ScenarioId::Increasing => "increasing",
            ScenarioId::IncThenDec => "inc-then-dec",
        }
    }
}

impl std::str::FromStr for ScenarioId {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "decreasing" => Ok(ScenarioId::Decreasing),
            "constant" => Ok(ScenarioId::Constant),
            "increasing" => Ok(ScenarioId::Increasing),
            "inc-then-dec" => Ok(ScenarioId::IncThenDec),
            other => Err(format!(
                "unknown scenario '{other}' (expected decreasing, constant, \
                 increasing, or inc-then-dec)"
            )),
        }
    }
}

/// A trajectory with its exact derivative.
#[derive(Clone)]
pub struct TrajectoryFn {
    value: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    derivative: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl TrajectoryFn {
    pub fn new(
        value: impl Fn(f64) -> f64 + Send + Sync + 'static,
        derivative: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            value: Arc::new(value),
            derivative: Arc::new(derivative),
        }
    }

    pub fn value(&self, t: f64) -> f64 {
        (self.value)(t)
    }

    pub fn derivative(&self, t: f64) -> f64 {
        (self.derivative)(t)
    }
}

impl std::fmt::Debug for TrajectoryFn {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("TrajectoryFn")
    }
}

/// Control-arm mean: f(t) = -2.5 t^3 + 6 t^2 + 5 t + 0.5, increasing on
/// [0, 1] with f(0) = 0.5 and f(1) = 9.
pub fn control_mean() -> TrajectoryFn {
    TrajectoryFn::new(
        |t| ((-2.5 * t + 6.0) * t + 5.0) * t + 0.5,
        |t| (-7.5 * t + 12.0) * t + 5.0,
    )
}

/// Instantaneous treatment effect Delta'(t).
pub fn effect_rate(scenario: ScenarioId, t: f64) -> f64 {
    match scenario {
        ScenarioId::Decreasing => {
            let u = 2.0 - 1.1 * t;
            0.45 * u * u
        }
        ScenarioId::Constant => 1.0,
        ScenarioId::Increasing => 1.2 * (1.0 - (-6.0 * t).exp()),
        ScenarioId::IncThenDec => {
            let z = (t - 0.55) / 0.25;
            1.05 / (0.25 * (2.0 * std::f64::consts::PI).sqrt()) * (-0.5 * z * z).exp()
        }
    }
}

/// Cumulative treatment effect Delta(t), the integral of `effect_rate`
/// from 0 to t in closed form. Delta(0) = 0 and Delta(1) is close to 1 in
/// every scenario.
pub fn effect_cumulative(scenario: ScenarioId, t: f64) -> f64 {
    match scenario {
        ScenarioId::Decreasing => {
            let u = 2.0 - 1.1 * t;
            0.45 * (8.0 - u * u * u) / 3.3
        }
        ScenarioId::Constant => t,
        ScenarioId::Increasing => 1.2 * (t + ((-6.0 * t).exp() - 1.0) / 6.0),
        ScenarioId::IncThenDec => {
            let z = (t - 0.55) / 0.25;
            let z0 = (0.0 - 0.55) / 0.25;
            1.05 * (normal_cdf(z) - normal_cdf(z0))
        }
    }
}

/// Treated-arm mean h = f - Delta.
pub fn treated_mean(scenario: ScenarioId) -> TrajectoryFn {
    let f = control_mean();
    let fd = control_mean();
    TrajectoryFn::new(
        move |t| f.value(t) - effect_cumulative(scenario, t),
        move |t| fd.derivative(t) - effect_rate(scenario, t),
    )
}
