//! Special functions and small SPD linear algebra.

pub mod special;
pub mod spd;

pub use special::{
    chi2_cdf, chi2_pdf, chi2_quantile, erf, erfc, gamma, ln_gamma, reg_inc_beta,
    reg_inc_gamma_lower, reg_inc_gamma_upper, std_normal_cdf, std_normal_log_cdf,
    std_normal_log_pdf, std_normal_pdf, std_normal_quantile, student_t_cdf, student_t_log_cdf,
    student_t_log_pdf, student_t_pdf, upper_inc_gamma,
};
pub use spd::{chol_solve, duplication_matrix, log_det, unvech, vech, Jitter, SpdMatrix};
