//! Limit-variance evaluators.
//!
//! Scalar case (two colors, limit proportion z, limit mean m, limit second
//! moments q and s):
//!
//! ```text
//! V = z(1-z) ((1-z) q + z s) / m^2,    U = V - z(1-z)
//! ```
//!
//! U is the limit variance of the estimation error C_n, V of the predictive
//! error D_n. The matrix case generalizes to d colors with per-color limit
//! second moments q_j; rows of both matrices sum to zero because the
//! per-color components of the errors sum to zero.

use serde::{Deserialize, Serialize};

use super::StatsError;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScalarVariance {
    pub u: f64,
    pub v: f64,
    pub z: f64,
    pub m: f64,
    pub q: f64,
    pub s: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MatrixVariance {
    pub dim: usize,
    /// Row-major d x d entries.
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub z: Vec<f64>,
    pub m: f64,
    pub q: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LimitVariance {
    Scalar(ScalarVariance),
    Matrix(MatrixVariance),
}

impl LimitVariance {
    /// Variance entry for the estimation error C of the given color.
    pub fn u_entry(&self, color: usize) -> f64 {
        match self {
            LimitVariance::Scalar(s) => s.u,
            LimitVariance::Matrix(m) => m.u[color * m.dim + color],
        }
    }

    /// Variance entry for the predictive error D of the given color.
    pub fn v_entry(&self, color: usize) -> f64 {
        match self {
            LimitVariance::Scalar(s) => s.v,
            LimitVariance::Matrix(m) => m.v[color * m.dim + color],
        }
    }

    pub fn w_entry(&self, color: usize) -> f64 {
        self.u_entry(color) + self.v_entry(color)
    }
}

/// Two-color limit variances at a plug-in limit proportion z.
pub fn evaluate_limit_variance_scalar(
    z: f64,
    m: f64,
    q: f64,
    s: f64,
) -> Result<ScalarVariance, StatsError> {
    if !(0.0..=1.0).contains(&z) {
        return Err(StatsError::Domain(format!("z = {z} outside [0, 1]")));
    }
    if !(m > 0.0) {
        return Err(StatsError::Domain(format!("m must be positive, got {m}")));
    }
    if q < 0.0 || s < 0.0 {
        return Err(StatsError::Domain(format!(
            "second moments must be nonnegative, got q={q} s={s}"
        )));
    }
    let mixture = ((1.0 - z) * q + z * s) / (m * m);
    let zz = z * (1.0 - z);
    Ok(ScalarVariance {
        u: zz * (mixture - 1.0),
        v: zz * mixture,
        z,
        m,
        q,
        s,
    })
}

/// d-color limit variance matrices at a plug-in limit proportion vector.
///
/// Diagonal:  V_jj = z_j/m^2 { q_j (1-z_j)^2 + z_j sum_{i != j} q_i z_i },
///            U_jj = V_jj - z_j (1 - z_j).
/// Off-diag:  V_ij = z_i z_j/m^2 { sum_h q_h z_h - q_i - q_j },
///            U_ij = V_ij + z_i z_j.
pub fn evaluate_limit_variance_matrix(
    z: &[f64],
    m: f64,
    q: &[f64],
) -> Result<MatrixVariance, StatsError> {
    let d = z.len();
    if d < 2 || q.len() != d {
        return Err(StatsError::Domain(format!(
            "need matching z and q of length >= 2, got {d} and {}",
            q.len()
        )));
    }
    if !(m > 0.0) {
        return Err(StatsError::Domain(format!("m must be positive, got {m}")));
    }
    if z.iter().any(|&zj| !(0.0..=1.0).contains(&zj)) {
        return Err(StatsError::Domain("z entries must lie in [0, 1]".into()));
    }
    let total: f64 = z.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(StatsError::Domain(format!(
            "z must lie on the simplex, sums to {total}"
        )));
    }
    if q.iter().any(|&qj| qj < 0.0) {
        return Err(StatsError::Domain("q entries must be nonnegative".into()));
    }
    let m2 = m * m;
    let weighted: f64 = q.iter().zip(z).map(|(qh, zh)| qh * zh).sum();
    let mut u = vec![0.0; d * d];
    let mut v = vec![0.0; d * d];
    for j in 0..d {
        let cross: f64 = (0..d)
            .filter(|&i| i != j)
            .map(|i| q[i] * z[i])
            .sum();
        let vjj = z[j] / m2 * (q[j] * (1.0 - z[j]) * (1.0 - z[j]) + z[j] * cross);
        v[j * d + j] = vjj;
        u[j * d + j] = vjj - z[j] * (1.0 - z[j]);
        for i in 0..d {
            if i == j {
                continue;
            }
            let vij = z[i] * z[j] / m2 * (weighted - q[i] - q[j]);
            v[i * d + j] = vij;
            u[i * d + j] = vij + z[i] * z[j];
        }
    }
    Ok(MatrixVariance {
        dim: d,
        u,
        v,
        z: z.to_vec(),
        m,
        q: q.to_vec(),
    })
}

impl MatrixVariance {
    pub fn row_sums(matrix: &[f64], dim: usize) -> Vec<f64> {
        (0..dim)
            .map(|i| (0..dim).map(|j| matrix[i * dim + j]).sum())
            .collect()
    }

    /// Smallest eigenvalue of a symmetric matrix by cyclic Jacobi sweeps;
    /// used to check positive semidefiniteness numerically.
    pub fn min_eigenvalue(matrix: &[f64], dim: usize) -> f64 {
        let mut a = matrix.to_vec();
        for _ in 0..50 {
            let mut off = 0.0;
            for p in 0..dim {
                for q in (p + 1)..dim {
                    off += a[p * dim + q] * a[p * dim + q];
                }
            }
            if off < 1e-24 {
                break;
            }
            for p in 0..dim {
                for q in (p + 1)..dim {
                    let apq = a[p * dim + q];
                    if apq.abs() < 1e-30 {
                        continue;
                    }
                    let app = a[p * dim + p];
                    let aqq = a[q * dim + q];
                    let theta = 0.5 * (aqq - app) / apq;
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for k in 0..dim {
                        let akp = a[k * dim + p];
                        let akq = a[k * dim + q];
                        a[k * dim + p] = c * akp - s * akq;
                        a[k * dim + q] = s * akp + c * akq;
                    }
                    for k in 0..dim {
                        let apk = a[p * dim + k];
                        let aqk = a[q * dim + k];
                        a[p * dim + k] = c * apk - s * aqk;
                        a[q * dim + k] = s * apk + c * aqk;
                    }
                }
            }
        }
        (0..dim)
            .map(|i| a[i * dim + i])
            .fold(f64::INFINITY, f64::min)
    }
}
