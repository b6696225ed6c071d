//! Gauss-Legendre rules on [-1, 1], a generic integrator, and the standard
//! normal CDF. Rules are memoized per order and mirror-symmetrized so that
//! nodes satisfy x[i] == -x[n-1-i] exactly.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use crate::error::{PprError, Result};

/// Largest supported rule order.
pub const MAX_ORDER: usize = 64;

/// Newton stop: the node update is below one ulp of the node scale.
/// |P_n| itself bottoms out near 3e-14 for n close to 64, so the residual
/// is not a usable stopping criterion at high order.
const NEWTON_STEP_TOL: f64 = 1e-15;
const NEWTON_MAX_ITER: usize = 100;

#[derive(Debug, Clone)]
pub struct QuadratureScheme {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    order: usize,
}

impl QuadratureScheme {
    /// Nodes in ascending order.
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Weights aligned with `nodes`; all positive, summing to 2.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn order(&self) -> usize {
        self.order
    }
}

/// P_n(x) and P_n'(x) by the three-term recurrence. Valid for |x| < 1.
fn legendre_with_deriv(n: usize, x: f64) -> (f64, f64) {
    let mut prev = 1.0;
    let mut cur = x;
    for k in 1..n {
        let next = ((2 * k + 1) as f64 * x * cur - k as f64 * prev) / (k + 1) as f64;
        prev = cur;
        cur = next;
    }
    let deriv = n as f64 * (prev - x * cur) / (1.0 - x * x);
    (cur, deriv)
}

fn compute_rule(n: usize) -> Result<QuadratureScheme> {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    // Roots in the open upper half, largest first; the lower half is mirrored.
    for i in 1..=(n + 1) / 2 {
        let mut x = (PI * (i as f64 - 0.25) / (n as f64 + 0.5)).cos();
        if n % 2 == 1 && i == (n + 1) / 2 {
            x = 0.0; // middle root of an odd-order rule is exact
        } else {
            let mut converged = false;
            for _ in 0..NEWTON_MAX_ITER {
                let (p, dp) = legendre_with_deriv(n, x);
                let dx = p / dp;
                x -= dx;
                if dx.abs() <= NEWTON_STEP_TOL {
                    converged = true;
                    break;
                }
            }
            if !converged {
                return Err(PprError::NonFinite {
                    context: format!("legendre root iteration, order {n}"),
                });
            }
        }
        let (_, dp) = legendre_with_deriv(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[n - i] = x;
        nodes[i - 1] = -x;
        weights[n - i] = w;
        weights[i - 1] = w;
    }
    Ok(QuadratureScheme {
        nodes,
        weights,
        order: n,
    })
}

/// Gauss-Legendre rule of order `n`, 1 <= n <= 64. Results are cached, so
/// repeated calls hand back the same data.
pub fn gauss_legendre(n: usize) -> Result<Arc<QuadratureScheme>> {
    if n < 1 || n > MAX_ORDER {
        return Err(PprError::InvalidArgument(format!(
            "quadrature order must be between 1 and {MAX_ORDER}, got {n}"
        )));
    }
    static CACHE: OnceLock<Mutex<BTreeMap<usize, Arc<QuadratureScheme>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(BTreeMap::new()));
    let mut guard = cache.lock().expect("quadrature cache poisoned");
    if let Some(rule) = guard.get(&n) {
        return Ok(Arc::clone(rule));
    }
    let rule = Arc::new(compute_rule(n)?);
    guard.insert(n, Arc::clone(&rule));
    Ok(rule)
}

/// Integral of `f` over [a, b] under the given rule. Errors when the
/// integrand produces a non-finite value at any node.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, rule: &QuadratureScheme) -> Result<f64> {
    if !(a < b) || !a.is_finite() || !b.is_finite() {
        return Err(PprError::InvalidArgument(format!(
            "integration interval must satisfy a < b, got [{a}, {b}]"
        )));
    }
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let mut sum = 0.0;
    for (&x, &w) in rule.nodes.iter().zip(&rule.weights) {
        let t = mid + half * x;
        let v = f(t);
        if !v.is_finite() {
            return Err(PprError::NonFinite {
                context: format!("integrand at t = {t}"),
            });
        }
        sum += w * v;
    }
    Ok(half * sum)
}

/// Standard normal CDF. Rational approximation in the body, continued
/// fraction in the far tail; absolute error below 1e-15.
pub fn normal_cdf(x: f64) -> f64 {
    let z = x.abs();
    let tail = if z > 37.0 {
        0.0
    } else {
        let e = (-z * z / 2.0).exp();
        if z < 7.071067811865475 {
            let num = (((((3.52624965998911e-2 * z + 0.700383064443688) * z
                + 6.37396220353165)
                * z
                + 33.912866078383)
                * z
                + 112.079291497871)
                * z
                + 221.213596169931)
                * z
                + 220.206867912376;
            let den = ((((((8.83883476483184e-2 * z + 1.75566716318264) * z
                + 16.064177579207)
                * z
                + 86.7807322029461)
                * z
                + 296.564248779674)
                * z
                + 637.333633378831)
                * z
                + 793.826512519948)
                * z
                + 440.413735824752;
            e * num / den
        } else {
            let mut b = z + 0.65;
            b = z + 4.0 / b;
            b = z + 3.0 / b;
            b = z + 2.0 / b;
            b = z + 1.0 / b;
            e / (b * 2.506628274631)
        }
    };
    if x > 0.0 {
        1.0 - tail
    } else {
        tail
    }
}
