//! Covariance models for the per-visit treatment-effect estimates, plus the
//! small dense symmetric positive definite solver the estimands need.

use crate::error::{PprError, Result};
use crate::weights::TimeGrid;

const SYMMETRY_TOL: f64 = 1e-8;

/// Dense square matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    n: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        if n == 0 || rows.iter().any(|r| r.len() != n) {
            return Err(PprError::InvalidArgument(
                "matrix rows must be nonempty and square".to_string(),
            ));
        }
        let data = rows.into_iter().flatten().collect::<Vec<f64>>();
        if data.iter().any(|x| !x.is_finite()) {
            return Err(PprError::NonFinite {
                context: "matrix entries".to_string(),
            });
        }
        Ok(Self { n, data })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
    }

    /// Lower-triangular Cholesky factor. Fails with the 1-based index of the
    /// leading minor that is not positive.
    pub fn cholesky(&self) -> Result<Matrix> {
        let n = self.n;
        let mut l = Matrix::zeros(n);
        for j in 0..n {
            let mut d = self.get(j, j);
            for k in 0..j {
                d -= l.get(j, k) * l.get(j, k);
            }
            if !(d > 0.0) {
                return Err(PprError::NotPositiveDefinite { minor: j + 1 });
            }
            let root = d.sqrt();
            l.set(j, j, root);
            for i in j + 1..n {
                let mut s = self.get(i, j);
                for k in 0..j {
                    s -= l.get(i, k) * l.get(j, k);
                }
                l.set(i, j, s / root);
            }
        }
        Ok(l)
    }
}

/// Solves A x = rhs for symmetric positive definite A via Cholesky.
pub fn spd_solve(a: &Matrix, rhs: &[f64]) -> Result<Vec<f64>> {
    if rhs.len() != a.dim() {
        return Err(PprError::GridMismatch {
            expected: a.dim(),
            got: rhs.len(),
        });
    }
    let l = a.cholesky()?;
    let n = a.dim();
    // forward: L y = rhs
    let mut y = vec![0.0; n];
    for i in 0..n {
        let mut s = rhs[i];
        for k in 0..i {
            s -= l.get(i, k) * y[k];
        }
        y[i] = s / l.get(i, i);
    }
    // back: L' x = y
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in i + 1..n {
            s -= l.get(k, i) * x[k];
        }
        x[i] = s / l.get(i, i);
    }
    Ok(x)
}

/// How the per-visit standard deviation grows from 1 at baseline to
/// `sigma_end` at the last visit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SdProfile {
    /// Linear in the visit index: 1 + (sigma_end - 1)(i - 1)/(m - 1).
    IndexLinear,
    /// Linear in time: 1 + (sigma_end - 1) t_i.
    TimeLinear,
}

/// Correlation-plus-scale models for the effect estimates.
#[derive(Debug, Clone)]
pub enum CovarianceSpec {
    /// corr(t_i, t_j) = k (rho/k)^{|t_i - t_j|}. `k` is the limit of the
    /// correlation as visits get close; `rho` is the endpoint correlation.
    ArWithK {
        rho: f64,
        k: f64,
        sigma_end: f64,
        sd_profile: SdProfile,
    },
    /// Equal correlation everywhere, constant standard deviation.
    CompoundSymmetric { sd: f64, corr: f64 },
    /// corr(t_i, t_j) = base^{|t_i - t_j|}, constant standard deviation.
    ExponentialDecay { sd: f64, base: f64 },
    /// An explicit covariance matrix aligned with the visit grid.
    Unstructured(Matrix),
}

impl CovarianceSpec {
    pub fn ar_with_k(rho: f64, k: f64, sigma_end: f64, sd_profile: SdProfile) -> Result<Self> {
        if !(rho.is_finite() && rho > 0.0 && rho < 1.0) {
            return Err(PprError::InvalidArgument(format!(
                "endpoint correlation must lie in (0, 1), got rho={rho}"
            )));
        }
        if !(k.is_finite() && rho <= k && k <= 1.0) {
            return Err(PprError::InvalidArgument(format!(
                "correlation parameters must satisfy rho <= k <= 1, got rho={rho}, k={k}"
            )));
        }
        if !(sigma_end.is_finite() && sigma_end > 0.0) {
            return Err(PprError::InvalidArgument(format!(
                "final-visit standard deviation must be positive, got {sigma_end}"
            )));
        }
        Ok(CovarianceSpec::ArWithK {
            rho,
            k,
            sigma_end,
            sd_profile,
        })
    }

    pub fn compound_symmetric(sd: f64, corr: f64) -> Result<Self> {
        if !(sd.is_finite() && sd > 0.0) {
            return Err(PprError::InvalidArgument(format!(
                "standard deviation must be positive, got {sd}"
            )));
        }
        if !(corr.is_finite() && corr > -1.0 && corr < 1.0) {
            return Err(PprError::InvalidArgument(format!(
                "common correlation must lie in (-1, 1), got {corr}"
            )));
        }
        Ok(CovarianceSpec::CompoundSymmetric { sd, corr })
    }

    pub fn exponential_decay(sd: f64, base: f64) -> Result<Self> {
        if !(sd.is_finite() && sd > 0.0) {
            return Err(PprError::InvalidArgument(format!(
                "standard deviation must be positive, got {sd}"
            )));
        }
        if !(base.is_finite() && base > 0.0 && base < 1.0) {
            return Err(PprError::InvalidArgument(format!(
                "decay base must lie in (0, 1), got {base}"
            )));
        }
        Ok(CovarianceSpec::ExponentialDecay { sd, base })
    }

    /// Accepts a raw matrix, symmetrizing fp-level asymmetry. Positive
    /// definiteness is checked when the matrix is attached to a grid.
    pub fn unstructured(m: Matrix) -> Result<Self> {
        let n = m.dim();
        let mut sym = m.clone();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in i + 1..n {
                let gap = (m.get(i, j) - m.get(j, i)).abs();
                worst = worst.max(gap);
                let avg = 0.5 * (m.get(i, j) + m.get(j, i));
                sym.set(i, j, avg);
                sym.set(j, i, avg);
            }
        }
        if worst > SYMMETRY_TOL {
            return Err(PprError::InvalidArgument(format!(
                "covariance matrix is asymmetric beyond tolerance (max gap {worst:e})"
            )));
        }
        Ok(CovarianceSpec::Unstructured(sym))
    }
}

/// Per-visit standard deviations a covariance model implies on a grid.
pub fn sd_profile(spec: &CovarianceSpec, grid: &TimeGrid) -> Vec<f64> {
    let m = grid.len();
    match spec {
        CovarianceSpec::ArWithK {
            sigma_end,
            sd_profile,
            ..
        } => match sd_profile {
            SdProfile::IndexLinear => (0..m)
                .map(|i| 1.0 + (sigma_end - 1.0) * i as f64 / (m - 1) as f64)
                .collect(),
            SdProfile::TimeLinear => grid
                .points()
                .iter()
                .map(|&t| 1.0 + (sigma_end - 1.0) * t)
                .collect(),
        },
        CovarianceSpec::CompoundSymmetric { sd, .. } => vec![*sd; m],
        CovarianceSpec::ExponentialDecay { sd, .. } => vec![*sd; m],
        CovarianceSpec::Unstructured(mat) => {
            (0..mat.dim()).map(|i| mat.get(i, i).sqrt()).collect()
        }
    }
}

/// Correlation matrix a covariance model implies on a grid. Unit diagonal,
/// symmetric by construction, validated positive definite.
pub fn correlation_matrix(spec: &CovarianceSpec, grid: &TimeGrid) -> Result<Matrix> {
    let m = grid.len();
    let t = grid.points();
    let mut out = Matrix::zeros(m);
    match spec {
        CovarianceSpec::ArWithK { rho, k, .. } => {
            // at k = rho the ratio is 1 and the model degenerates to equal
            // correlation k
            let ratio = rho / k;
            for i in 0..m {
                out.set(i, i, 1.0);
                for j in i + 1..m {
                    let r = k * ratio.powf((t[j] - t[i]).abs());
                    out.set(i, j, r);
                    out.set(j, i, r);
                }
            }
        }
        CovarianceSpec::CompoundSymmetric { corr, .. } => {
            for i in 0..m {
                out.set(i, i, 1.0);
                for j in i + 1..m {
                    out.set(i, j, *corr);
                    out.set(j, i, *corr);
                }
            }
        }
        CovarianceSpec::ExponentialDecay { base, .. } => {
            for i in 0..m {
                out.set(i, i, 1.0);
                for j in i + 1..m {
                    let r = base.powf((t[j] - t[i]).abs());
                    out.set(i, j, r);
                    out.set(j, i, r);
                }
            }
        }
        CovarianceSpec::Unstructured(mat) => {
            if mat.dim() != m {
                return Err(PprError::GridMismatch {
                    expected: m,
                    got: mat.dim(),
                });
            }
            let sd: Vec<f64> = (0..m).map(|i| mat.get(i, i).sqrt()).collect();
            if sd.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
                return Err(PprError::NotPositiveDefinite { minor: 1 });
            }
            for i in 0..m {
                out.set(i, i, 1.0);
                for j in i + 1..m {
                    let r = mat.get(i, j) / (sd[i] * sd[j]);
                    out.set(i, j, r);
                    out.set(j, i, r);
                }
            }
        }
    }
    out.cholesky()?;
    Ok(out)
}

/// Covariance matrix of the per-visit effect estimates on a grid.
#[derive(Debug, Clone)]
pub struct EffectCovariance {
    grid: TimeGrid,
    matrix: Matrix,
}

impl EffectCovariance {
    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }
}

/// Realizes a covariance model on a grid: sigma_i sigma_j corr_ij. The
/// result is symmetric to the bit and positive definite, or the call fails.
pub fn effect_covariance(spec: &CovarianceSpec, grid: &TimeGrid) -> Result<EffectCovariance> {
    let m = grid.len();
    let matrix = match spec {
        CovarianceSpec::Unstructured(mat) => {
            if mat.dim() != m {
                return Err(PprError::GridMismatch {
                    expected: m,
                    got: mat.dim(),
                });
            }
            mat.clone()
        }
        _ => {
            let sd = sd_profile(spec, grid);
            let corr = correlation_matrix(spec, grid)?;
            let mut out = Matrix::zeros(m);
            for i in 0..m {
                out.set(i, i, sd[i] * sd[i]);
                for j in i + 1..m {
                    let v = sd[i] * sd[j] * corr.get(i, j);
                    out.set(i, j, v);
                    out.set(j, i, v);
                }
            }
            out
        }
    };
    matrix.cholesky()?;
    Ok(EffectCovariance {
        grid: grid.clone(),
        matrix,
    })
}
