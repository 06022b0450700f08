//! Density-generator families: Gaussian, Student-t and Huber.
//!
//! Each family supplies the radial generator `g(t)`, the loss `ρ = -ln g`,
//! its derivatives `ψ = ρ'` and `η = ψ'`, and a symmetric univariate cdf `F`
//! with `Ψ(x) = -F'(x)/F(x)` used by the skewed densities.

use std::f64::consts::{E, PI};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::special::{
    chi2_cdf, chi2_quantile, erf, gamma, ln_gamma, reg_inc_gamma_lower, std_normal_cdf,
    std_normal_log_cdf, std_normal_log_pdf, student_t_cdf, student_t_log_cdf,
    NORMAL_ASYMPTOTIC_THRESHOLD,
};

/// Smallest admissible Huber quantile (exclusive). The tail condition
/// `c²/(2b) > 1` fails below about 0.7021 for `r = 1`; the bound is rounded up.
pub const HUBER_MIN_QUANTILE: f64 = 0.703;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FamilyKind {
    Gaussian,
    StudentT {
        nu: f64,
    },
    /// `quantile_dof` is the chi-square dof used to turn `q_h` into the
    /// threshold `c²`; `None` means the data dimension.
    Huber {
        q_h: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        quantile_dof: Option<usize>,
    },
}

impl fmt::Display for FamilyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FamilyKind::Gaussian => write!(f, "gaussian"),
            FamilyKind::StudentT { nu } => write!(f, "t(nu={nu})"),
            FamilyKind::Huber { q_h, quantile_dof: None } => write!(f, "huber(q_h={q_h})"),
            FamilyKind::Huber { q_h, quantile_dof: Some(d) } => {
                write!(f, "huber(q_h={q_h}, dof={d})")
            }
        }
    }
}

/// Derived Huber constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HuberConstants {
    /// Threshold `c`; the generator switches branch at `t = c²`.
    pub c: f64,
    pub c2: f64,
    /// Fisher-consistency constant.
    pub b: f64,
    /// Normalization of the r-variate generator.
    pub norm: f64,
    /// Normalization of the univariate density behind `H_c`.
    pub norm_1d: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FamilySpec {
    kind: FamilyKind,
    dim: usize,
    huber: Option<HuberConstants>,
    // ln of the Student-t generator constant
    t_log_norm: f64,
    // ln of the univariate T_{ν+r} density constant
    t1_log_norm: f64,
}

/// `b = F_{χ²_{r+2}}(c²) + (c²/r)(1 - F_{χ²_r}(c²))`.
pub fn fisher_b(dim: usize, c2: f64) -> Result<f64> {
    if !(c2 > 0.0) {
        return Err(Error::Domain(format!("Huber c² must be > 0, got {c2}")));
    }
    if dim == 0 {
        return Err(Error::Domain("dimension must be >= 1".into()));
    }
    if c2.is_infinite() {
        return Ok(1.0);
    }
    let r = dim as f64;
    Ok(chi2_cdf(dim + 2, c2)? + c2 / r * (1.0 - chi2_cdf(dim, c2)?))
}

/// Normalization constant `A_H` of the r-variate Huber generator.
pub fn huber_norm(dim: usize, c: f64, b: f64) -> Result<f64> {
    let r = dim as f64;
    let c2 = c * c;
    if !(c2 > 2.0 * b) {
        return Err(Error::ConstraintViolated(format!(
            "Huber requires c²/(2b) > 1, got c² = {c2}, b = {b}"
        )));
    }
    let denom_tail = c2 - b * r;
    if !(denom_tail > 0.0) {
        return Err(Error::DivergentTail);
    }
    let half_r = 0.5 * r;
    let x = c2 / (2.0 * b);
    let lower = reg_inc_gamma_lower(half_r, x)? * gamma(half_r);
    let core = (2.0 * b).powf(half_r) * lower;
    let tail = 2.0 * b * c.powf(r) * (-x).exp() / denom_tail;
    Ok(gamma(half_r) / PI.powf(half_r) / (core + tail))
}

impl FamilySpec {
    pub fn new(kind: FamilyKind, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Domain("dimension must be >= 1".into()));
        }
        let r = dim as f64;
        match kind {
            FamilyKind::Gaussian => {
                Ok(Self { kind, dim, huber: None, t_log_norm: 0.0, t1_log_norm: 0.0 })
            }
            FamilyKind::StudentT { nu } => {
                if !(nu > 0.0) || !nu.is_finite() {
                    return Err(Error::Domain(format!("t degrees of freedom must be > 0, got {nu}")));
                }
                let t_log_norm = ln_gamma(0.5 * (nu + r)) - ln_gamma(0.5 * nu)
                    - 0.5 * r * (PI * nu).ln();
                let nu1 = nu + r;
                let t1_log_norm = ln_gamma(0.5 * (nu1 + 1.0)) - ln_gamma(0.5 * nu1)
                    - 0.5 * (PI * nu1).ln();
                Ok(Self { kind, dim, huber: None, t_log_norm, t1_log_norm })
            }
            FamilyKind::Huber { q_h, quantile_dof } => {
                if !(q_h > 0.0 && q_h < 1.0) {
                    return Err(Error::Domain(format!("q_h must lie in (0,1), got {q_h}")));
                }
                if q_h <= HUBER_MIN_QUANTILE {
                    return Err(Error::ConstraintViolated(format!(
                        "Huber requires q_h > {HUBER_MIN_QUANTILE}, got {q_h}"
                    )));
                }
                let qdof = quantile_dof.unwrap_or(dim);
                let c2 = chi2_quantile(qdof, q_h)?;
                let c = c2.sqrt();
                let b = fisher_b(dim, c2)?;
                let norm = huber_norm(dim, c, b)?;
                let norm_1d = huber_norm(1, c, b)?;
                Ok(Self {
                    kind,
                    dim,
                    huber: Some(HuberConstants { c, c2, b, norm, norm_1d }),
                    t_log_norm: 0.0,
                    t1_log_norm: 0.0,
                })
            }
        }
    }

    pub fn gaussian(dim: usize) -> Self {
        Self::new(FamilyKind::Gaussian, dim).expect("gaussian family is always valid")
    }

    pub fn student_t(nu: f64, dim: usize) -> Result<Self> {
        Self::new(FamilyKind::StudentT { nu }, dim)
    }

    pub fn huber(q_h: f64, dim: usize) -> Result<Self> {
        Self::new(FamilyKind::Huber { q_h, quantile_dof: None }, dim)
    }

    pub fn kind(&self) -> FamilyKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn huber_constants(&self) -> Option<&HuberConstants> {
        self.huber.as_ref()
    }

    /// Degrees of freedom of the univariate t cdf used by the skew-t density.
    pub fn skew_t_dof(&self) -> Option<f64> {
        match self.kind {
            FamilyKind::StudentT { nu } => Some(nu + self.dim as f64),
            _ => None,
        }
    }

    fn check_t(t: f64) -> Result<()> {
        if t >= 0.0 {
            Ok(())
        } else {
            Err(Error::Domain(format!("squared distance must be >= 0, got {t}")))
        }
    }

    /// `ln g(t)`.
    pub fn log_g(&self, t: f64) -> Result<f64> {
        Self::check_t(t)?;
        Ok(self.log_g_unchecked(t))
    }

    pub(crate) fn log_g_unchecked(&self, t: f64) -> f64 {
        let r = self.dim as f64;
        match self.kind {
            FamilyKind::Gaussian => -0.5 * t - 0.5 * r * (2.0 * PI).ln(),
            FamilyKind::StudentT { nu } => self.t_log_norm - 0.5 * (nu + r) * (t / nu).ln_1p(),
            FamilyKind::Huber { .. } => {
                let h = self.huber.as_ref().expect("huber constants");
                if t <= h.c2 {
                    h.norm.ln() - t / (2.0 * h.b)
                } else {
                    h.norm.ln() - h.c2 / (2.0 * h.b) * ((t / h.c2).ln() + 1.0)
                }
            }
        }
    }

    pub fn g(&self, t: f64) -> Result<f64> {
        self.log_g(t).map(f64::exp)
    }

    /// `ρ(t) = -ln g(t)`.
    pub fn rho(&self, t: f64) -> Result<f64> {
        self.log_g(t).map(|v| -v)
    }

    /// `ψ(t) = ρ'(t)`.
    pub fn psi(&self, t: f64) -> Result<f64> {
        Self::check_t(t)?;
        Ok(self.psi_unchecked(t))
    }

    pub(crate) fn psi_unchecked(&self, t: f64) -> f64 {
        let r = self.dim as f64;
        match self.kind {
            FamilyKind::Gaussian => 0.5,
            FamilyKind::StudentT { nu } => 0.5 * (nu + r) / (nu + t),
            FamilyKind::Huber { .. } => {
                let h = self.huber.as_ref().expect("huber constants");
                if t <= h.c2 {
                    0.5 / h.b
                } else {
                    h.c2 / (2.0 * h.b * t)
                }
            }
        }
    }

    /// `η(t) = ψ'(t)`. Not to be confused with the skew projection.
    pub fn eta_loss(&self, t: f64) -> Result<f64> {
        Self::check_t(t)?;
        Ok(self.eta_loss_unchecked(t))
    }

    pub(crate) fn eta_loss_unchecked(&self, t: f64) -> f64 {
        let r = self.dim as f64;
        match self.kind {
            FamilyKind::Gaussian => 0.0,
            FamilyKind::StudentT { nu } => -0.5 * (nu + r) / ((nu + t) * (nu + t)),
            FamilyKind::Huber { .. } => {
                let h = self.huber.as_ref().expect("huber constants");
                if t <= h.c2 {
                    0.0
                } else {
                    -h.c2 / (2.0 * h.b * t * t)
                }
            }
        }
    }

    /// Univariate density behind [`cdf_1d`](Self::cdf_1d), in log form.
    pub fn log_pdf_1d(&self, z: f64) -> f64 {
        match self.kind {
            FamilyKind::Gaussian => std_normal_log_pdf(z),
            FamilyKind::StudentT { nu } => {
                let nu1 = nu + self.dim as f64;
                self.t1_log_norm - 0.5 * (nu1 + 1.0) * (z * z / nu1).ln_1p()
            }
            FamilyKind::Huber { .. } => {
                let h = self.huber.as_ref().expect("huber constants");
                if z.abs() <= h.c {
                    h.norm_1d.ln() - z * z / (2.0 * h.b)
                } else {
                    h.norm_1d.ln() - h.c2 / (2.0 * h.b) * (1.0 + (z * z / h.c2).ln())
                }
            }
        }
    }

    pub fn pdf_1d(&self, z: f64) -> f64 {
        self.log_pdf_1d(z).exp()
    }

    /// Univariate cdf `F(z)` (Φ, `T_{ν+r}` or `H_c`).
    pub fn cdf_1d(&self, z: f64) -> f64 {
        match self.kind {
            FamilyKind::Gaussian => std_normal_cdf(z),
            FamilyKind::StudentT { nu } => {
                student_t_cdf(nu + self.dim as f64, z).expect("validated dof")
            }
            FamilyKind::Huber { .. } => huber_cdf(self.huber.as_ref().expect("huber constants"), z),
        }
    }

    /// `ln F(z)`, finite far into the lower tail.
    pub fn log_cdf_1d(&self, z: f64) -> f64 {
        match self.kind {
            FamilyKind::Gaussian => std_normal_log_cdf(z),
            FamilyKind::StudentT { nu } => {
                student_t_log_cdf(nu + self.dim as f64, z).expect("validated dof")
            }
            FamilyKind::Huber { .. } => {
                let h = self.huber.as_ref().expect("huber constants");
                if z < -h.c {
                    huber_log_lower_tail(h, z)
                } else {
                    huber_cdf(h, z).ln()
                }
            }
        }
    }

    /// `(ln F(x), Ψ(x))`, sharing the cdf evaluation.
    pub fn log_cdf_and_cap_psi(&self, x: f64) -> (f64, f64) {
        let log_cdf = self.log_cdf_1d(x);
        let cap = match self.kind {
            FamilyKind::StudentT { .. } => -(self.log_pdf_1d(x) - log_cdf).exp(),
            FamilyKind::Huber { .. } if x >= -self.huber.as_ref().expect("huber constants").c => {
                -(self.log_pdf_1d(x) - log_cdf).exp()
            }
            _ => self.cap_psi(x),
        };
        (log_cdf, cap)
    }

    /// `Ψ(x) = -F'(x)/F(x)`.
    pub fn cap_psi(&self, x: f64) -> f64 {
        match self.kind {
            FamilyKind::Gaussian => {
                if x < NORMAL_ASYMPTOTIC_THRESHOLD {
                    gaussian_mills_asymptotic(x)
                } else {
                    -(std_normal_log_pdf(x) - std_normal_log_cdf(x)).exp()
                }
            }
            FamilyKind::StudentT { .. } => -(self.log_pdf_1d(x) - self.log_cdf_1d(x)).exp(),
            FamilyKind::Huber { .. } => {
                let h = self.huber.as_ref().expect("huber constants");
                if x < -h.c {
                    // pdf and cdf share the power-law factor in the lower tail
                    (h.c2 - h.b) / (h.b * x)
                } else {
                    -(self.log_pdf_1d(x) - self.log_cdf_1d(x)).exp()
                }
            }
        }
    }
}

/// `Ψ(x)` for the Gaussian in the far lower tail: `x + 1/x - 2/x³ + 10/x⁵ - 74/x⁷`.
fn gaussian_mills_asymptotic(x: f64) -> f64 {
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    x + inv * (1.0 + inv2 * (-2.0 + inv2 * (10.0 - 74.0 * inv2)))
}

fn huber_cdf(h: &HuberConstants, z: f64) -> f64 {
    let (a, b, c, c2) = (h.norm_1d, h.b, h.c, h.c2);
    let k = c2 / (2.0 * b);
    let sqrt_2b = (2.0 * b).sqrt();
    let left_mass = -a * b * c / (b - c2) * (-k).exp();
    if z < -c {
        (huber_log_lower_tail(h, z)).exp()
    } else if z <= c {
        left_mass + a * (PI * b / 2.0).sqrt() * (erf(z / sqrt_2b) + erf(c / sqrt_2b))
    } else {
        let upper = a * b / (b - c2)
            * (E / c2).powf(-k)
            * (z * (z * z).powf(-k) - c.powf(1.0 - c2 / b));
        left_mass + a * (2.0 * PI * b).sqrt() * erf(c / sqrt_2b) + upper
    }
}

// ln H_c(z) for z < -c: A b z / (b - c²) · (e z²/c²)^(-c²/2b)
fn huber_log_lower_tail(h: &HuberConstants, z: f64) -> f64 {
    let k = h.c2 / (2.0 * h.b);
    h.norm_1d.ln() + (h.b * (-z) / (h.c2 - h.b)).ln() - k * (1.0 + (z * z / h.c2).ln())
}
