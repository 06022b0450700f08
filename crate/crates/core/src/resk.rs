//! Skewed elliptical (RESK) and symmetric elliptical (RES) densities.
//!
//! A RESK density is `2 |Ω|^{-1/2} g(t̲) F(κ)` with `Ω = S + λλᵀ`, the skewed
//! squared Mahalanobis distance `t̲ = (x-ξ)ᵀ Ω⁻¹ (x-ξ)`, and
//! `κ = (η/τ) √(2ψ(t̲))`. With `λ = 0` it reduces to the RES density
//! `|S|^{-1/2} g(t)`.

use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::family::FamilySpec;
use crate::numerics::{unvech, SpdMatrix};

/// Per-cluster location `ξ`, skewness `λ` and scatter `S`, with `Ω` and the
/// inverses needed for density evaluation cached at construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ClusterRepr", into = "ClusterRepr")]
pub struct ClusterParams {
    xi: Vec<f64>,
    lambda: Vec<f64>,
    scatter: SpdMatrix,
    omega: SpdMatrix,
    s_inv: Vec<f64>,
    omega_inv: Vec<f64>,
    // S⁻¹λ
    s_inv_lambda: Vec<f64>,
    // λᵀS⁻¹λ
    delta: f64,
}

#[derive(Serialize, Deserialize)]
struct ClusterRepr {
    xi: Vec<f64>,
    lambda: Vec<f64>,
    /// lower triangle, column-stacked
    scatter_vech: Vec<f64>,
}

impl TryFrom<ClusterRepr> for ClusterParams {
    type Error = Error;
    fn try_from(r: ClusterRepr) -> Result<Self> {
        let dim = r.xi.len();
        if r.scatter_vech.len() != dim * (dim + 1) / 2 {
            return Err(Error::DimensionMismatch {
                expected: dim * (dim + 1) / 2,
                got: r.scatter_vech.len(),
            });
        }
        let s = SpdMatrix::new(dim, unvech(dim, &r.scatter_vech))?;
        ClusterParams::new(r.xi, r.lambda, s)
    }
}

impl From<ClusterParams> for ClusterRepr {
    fn from(p: ClusterParams) -> Self {
        ClusterRepr { scatter_vech: p.scatter.vech(), xi: p.xi, lambda: p.lambda }
    }
}

/// `(t̲, η, τ)` for one observation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SkewScalars {
    pub t_bar: f64,
    pub eta: f64,
    pub tau: f64,
}

impl ClusterParams {
    pub fn new(xi: Vec<f64>, lambda: Vec<f64>, scatter: SpdMatrix) -> Result<Self> {
        let dim = scatter.dim();
        if xi.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: xi.len() });
        }
        if lambda.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: lambda.len() });
        }
        if xi.iter().chain(&lambda).any(|v| !v.is_finite()) {
            return Err(Error::Numerical("non-finite cluster parameter".into()));
        }
        let omega = if lambda.iter().all(|&l| l == 0.0) {
            scatter.clone()
        } else {
            scatter.rank_one_update(&lambda)?
        };
        let s_inv = scatter.inverse();
        let omega_inv = omega.inverse();
        let s_inv_lambda = scatter.solve(&lambda)?;
        let delta = dot(&lambda, &s_inv_lambda);
        Ok(Self { xi, lambda, scatter, omega, s_inv, omega_inv, s_inv_lambda, delta })
    }

    /// Symmetric cluster (`λ = 0`).
    pub fn symmetric(xi: Vec<f64>, scatter: SpdMatrix) -> Result<Self> {
        let dim = scatter.dim();
        Self::new(xi, vec![0.0; dim], scatter)
    }

    pub fn dim(&self) -> usize {
        self.xi.len()
    }

    pub fn xi(&self) -> &[f64] {
        &self.xi
    }

    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    pub fn scatter(&self) -> &SpdMatrix {
        &self.scatter
    }

    pub fn omega(&self) -> &SpdMatrix {
        &self.omega
    }

    /// Row-major `S⁻¹`.
    pub fn scatter_inverse(&self) -> &[f64] {
        &self.s_inv
    }

    pub fn is_symmetric(&self) -> bool {
        self.lambda.iter().all(|&l| l == 0.0)
    }

    /// `τ = (1 + λᵀS⁻¹λ)^{-1/2}`.
    pub fn tau(&self) -> f64 {
        (1.0 + self.delta).sqrt().recip()
    }

    /// Skewed squared Mahalanobis distance and the skew projections.
    pub fn skew_scalars(&self, x: &[f64]) -> Result<SkewScalars> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: x.len() });
        }
        Ok(self.skew_scalars_unchecked(x))
    }

    pub(crate) fn skew_scalars_unchecked(&self, x: &[f64]) -> SkewScalars {
        let r = self.dim();
        let mut t_bar = 0.0;
        let mut proj = 0.0;
        for i in 0..r {
            let di = x[i] - self.xi[i];
            proj += self.s_inv_lambda[i] * di;
            let row = &self.omega_inv[i * r..(i + 1) * r];
            let mut s = 0.0;
            for j in 0..r {
                s += row[j] * (x[j] - self.xi[j]);
            }
            t_bar += di * s;
        }
        SkewScalars {
            t_bar: t_bar.max(0.0),
            eta: proj / (1.0 + self.delta),
            tau: self.tau(),
        }
    }

    /// `t̲` through the Sherman–Morrison form
    /// `Ω⁻¹ = S⁻¹ - S⁻¹λλᵀS⁻¹ / (1 + λᵀS⁻¹λ)`, solving against `S` only.
    pub fn t_bar_sherman_morrison(&self, x: &[f64]) -> Result<f64> {
        let d: Vec<f64> = x.iter().zip(&self.xi).map(|(a, b)| a - b).collect();
        let s_inv_d = self.scatter.solve(&d)?;
        let t = dot(&d, &s_inv_d);
        let proj = dot(&self.lambda, &s_inv_d);
        Ok((t - proj * proj / (1.0 + self.delta)).max(0.0))
    }

    /// `t̲` by a direct Cholesky solve against `Ω`.
    pub fn t_bar_direct(&self, x: &[f64]) -> Result<f64> {
        let d: Vec<f64> = x.iter().zip(&self.xi).map(|(a, b)| a - b).collect();
        let w = self.omega.solve(&d)?;
        Ok(dot(&d, &w).max(0.0))
    }

    /// Copy with a shifted centroid.
    pub fn shifted(&self, shift: &[f64]) -> Result<Self> {
        let xi = self.xi.iter().zip(shift).map(|(a, b)| a + b).collect();
        Self::new(xi, self.lambda.clone(), self.scatter.clone())
    }
}

/// `κ = (η/τ) √(2ψ(t̲))`.
pub fn kappa(spec: &FamilySpec, t_bar: f64, eta: f64, tau: f64) -> Result<f64> {
    if !(tau > 0.0) {
        return Err(Error::Domain(format!("tau must be > 0, got {tau}")));
    }
    let psi = spec.psi(t_bar)?;
    if !(psi > 0.0) {
        return Err(Error::Domain(format!("psi must be > 0, got {psi}")));
    }
    Ok(eta / tau * (2.0 * psi).sqrt())
}

/// All per-point quantities the estimator needs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointEval {
    pub t_bar: f64,
    pub eta: f64,
    pub tau: f64,
    pub kappa: f64,
    pub log_pdf: f64,
}

/// Evaluates the RESK log-density and its intermediate scalars at `x`.
pub(crate) fn eval_point(spec: &FamilySpec, p: &ClusterParams, log_det_omega: f64, x: &[f64]) -> PointEval {
    let SkewScalars { t_bar, eta, tau } = p.skew_scalars_unchecked(x);
    let psi = spec.psi_unchecked(t_bar);
    let kappa = eta / tau * (2.0 * psi).sqrt();
    let log_pdf = LN_2 - 0.5 * log_det_omega + spec.log_g_unchecked(t_bar) + spec.log_cdf_1d(kappa);
    PointEval { t_bar, eta, tau, kappa, log_pdf }
}

/// As [`eval_point`], also returning `Ψ(κ)` from the same cdf evaluation.
pub(crate) fn eval_point_with_cap(
    spec: &FamilySpec,
    p: &ClusterParams,
    log_det_omega: f64,
    x: &[f64],
) -> (PointEval, f64) {
    let SkewScalars { t_bar, eta, tau } = p.skew_scalars_unchecked(x);
    let psi = spec.psi_unchecked(t_bar);
    let kappa = eta / tau * (2.0 * psi).sqrt();
    let (log_cdf, cap) = spec.log_cdf_and_cap_psi(kappa);
    let log_pdf = LN_2 - 0.5 * log_det_omega + spec.log_g_unchecked(t_bar) + log_cdf;
    (PointEval { t_bar, eta, tau, kappa, log_pdf }, cap)
}

/// `ln f_s(x | ξ, S, λ)`.
pub fn resk_logpdf(spec: &FamilySpec, p: &ClusterParams, x: &[f64]) -> Result<f64> {
    check_dims(spec, p.dim(), x)?;
    Ok(eval_point(spec, p, p.omega.log_det(), x).log_pdf)
}

/// `ln f(x | μ, S) = -½ ln|S| + ln g(t)`.
pub fn res_logpdf(spec: &FamilySpec, mu: &[f64], scatter: &SpdMatrix, x: &[f64]) -> Result<f64> {
    check_dims(spec, scatter.dim(), x)?;
    if mu.len() != scatter.dim() {
        return Err(Error::DimensionMismatch { expected: scatter.dim(), got: mu.len() });
    }
    let d: Vec<f64> = x.iter().zip(mu).map(|(a, b)| a - b).collect();
    let t = scatter.inv_quad_form(&d);
    Ok(-0.5 * scatter.log_det() + spec.log_g(t)?)
}

fn check_dims(spec: &FamilySpec, dim: usize, x: &[f64]) -> Result<()> {
    if spec.dim() != dim {
        return Err(Error::DimensionMismatch { expected: spec.dim(), got: dim });
    }
    if x.len() != dim {
        return Err(Error::DimensionMismatch { expected: dim, got: x.len() });
    }
    Ok(())
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn i2() -> SpdMatrix {
        SpdMatrix::identity(2)
    }

    #[test]
    fn scalars_symmetric_case() {
        let p = ClusterParams::new(vec![0.0, 0.0], vec![0.0, 0.0], i2()).unwrap();
        let s = p.skew_scalars(&[1.0, 1.0]).unwrap();
        assert_eq!((s.t_bar, s.eta, s.tau), (2.0, 0.0, 1.0));
        assert_eq!(p.omega(), p.scatter());
    }

    #[test]
    fn scalars_skewed_case() {
        let p = ClusterParams::new(vec![0.0, 0.0], vec![1.0, 0.0], i2()).unwrap();
        let s = p.skew_scalars(&[1.0, 1.0]).unwrap();
        assert!((s.eta - 0.5).abs() < 1e-15);
        assert!((s.tau * s.tau - 0.5).abs() < 1e-15);
        assert!((s.t_bar - 1.5).abs() < 1e-15);
        let at_center = p.skew_scalars(&[0.0, 0.0]).unwrap();
        assert_eq!((at_center.t_bar, at_center.eta), (0.0, 0.0));
        assert!(p.skew_scalars(&[1.0]).is_err());
    }

    #[test]
    fn kappa_examples() {
        let g = FamilySpec::gaussian(2);
        assert_eq!(kappa(&g, 3.0, 0.0, 0.7).unwrap(), 0.0);
        let k = kappa(&g, 1.5, 0.5, 0.5f64.sqrt()).unwrap();
        assert!((k - 0.5 / 0.5f64.sqrt()).abs() < 1e-15);
        let t = FamilySpec::student_t(3.0, 2).unwrap();
        let k = kappa(&t, 0.0, 1.0, 1.0).unwrap();
        assert!((k - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert!(kappa(&t, 0.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn standard_normal_values() {
        let g1 = FamilySpec::gaussian(1);
        let p = ClusterParams::new(vec![0.0], vec![0.0], SpdMatrix::identity(1)).unwrap();
        let v = resk_logpdf(&g1, &p, &[0.0]).unwrap();
        assert!((v + 0.918_938_533_204_672_7).abs() < 1e-14);
        let g2 = FamilySpec::gaussian(2);
        let v = res_logpdf(&g2, &[0.0, 0.0], &i2(), &[0.0, 0.0]).unwrap();
        assert!((v + (2.0 * std::f64::consts::PI).ln()).abs() < 1e-14);
    }

    #[test]
    fn sherman_morrison_agrees() {
        let s = SpdMatrix::new(2, vec![0.5, 0.25, 0.25, 0.5]).unwrap();
        let p = ClusterParams::new(vec![6.0, 2.0], vec![1.0, -2.0], s).unwrap();
        for x in [[6.0, 2.0], [7.5, -1.0], [-3.0, 10.0]] {
            let a = p.skew_scalars(&x).unwrap().t_bar;
            let b = p.t_bar_sherman_morrison(&x).unwrap();
            let c = p.t_bar_direct(&x).unwrap();
            assert!((a - c).abs() < 1e-10 * c.max(1.0));
            assert!((b - c).abs() < 1e-10 * c.max(1.0));
        }
    }

    #[test]
    fn serde_roundtrip() {
        let s = SpdMatrix::new(2, vec![0.2, 0.1, 0.1, 0.75]).unwrap();
        let p = ClusterParams::new(vec![2.0, 3.5], vec![10.0, 4.0], s).unwrap();
        let js = serde_json::to_string(&p).unwrap();
        let back: ClusterParams = serde_json::from_str(&js).unwrap();
        assert_eq!(back, p);
    }
}
