mod common;

use common::{integrate_left_tail, integrate_plane, integrate_to, real_line_rule, rel_err};
use proptest::prelude::*;
use resk::family::{fisher_b, huber_norm, FamilyKind, FamilySpec, HUBER_MIN_QUANTILE};
use resk::Error;
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn families(r: usize) -> Vec<FamilySpec> {
    vec![
        FamilySpec::gaussian(r),
        FamilySpec::student_t(3.0, r).unwrap(),
        FamilySpec::huber(0.8, r).unwrap(),
    ]
}

fn huber_c1(q_h: f64, r: usize) -> FamilySpec {
    FamilySpec::new(FamilyKind::Huber { q_h, quantile_dof: Some(1) }, r).unwrap()
}

#[test]
fn fisher_b_examples() {
    let b = fisher_b(1, 1.6424).unwrap();
    assert!((b - 0.679).abs() < 1e-3, "{b}");
    assert!((fisher_b(1, 1e12).unwrap() - 1.0).abs() < 1e-9);
    assert_eq!(fisher_b(1, f64::INFINITY).unwrap(), 1.0);
    let c2 = 1.3863;
    let want = ChiSquared::new(4.0).unwrap().cdf(c2) + c2 / 2.0 * (1.0 - ChiSquared::new(2.0).unwrap().cdf(c2));
    assert!((fisher_b(2, c2).unwrap() - want).abs() < 1e-12);
    assert!(fisher_b(2, 0.0).is_err());
}

#[test]
fn huber_norm_by_quadrature() {
    // univariate, q_h = 0.8
    let spec = FamilySpec::huber(0.8, 1).unwrap();
    let h = *spec.huber_constants().unwrap();
    let c = h.c;
    let pdf = |z: f64| spec.g(z * z).unwrap();
    let total = integrate_to(pdf, 0.0, &[-c], 400) * 2.0;
    assert!((total - 1.0).abs() < 1e-9, "{total}");
    // bivariate, q_h = 0.75: radial integral 2π ∫ ρ g(ρ²) dρ
    let spec = FamilySpec::huber(0.75, 2).unwrap();
    let h = *spec.huber_constants().unwrap();
    assert!(h.norm.is_finite() && h.norm > 0.0);
    let f = |rho: f64| 2.0 * std::f64::consts::PI * rho * spec.g(rho * rho).unwrap();
    let inner = common::integrate(f, 0.0, h.c, 400);
    let outer = integrate_left_tail(|u: f64| f(2.0 * h.c - u), h.c, 400);
    assert!((inner + outer - 1.0).abs() < 1e-8, "{}", inner + outer);
}

#[test]
fn huber_tends_to_gaussian() {
    let hub = FamilySpec::huber(0.9999, 2).unwrap();
    let gau = FamilySpec::gaussian(2);
    let mut sup = 0.0f64;
    for i in 0..=400 {
        let t = i as f64 * 0.1;
        sup = sup.max((hub.g(t).unwrap() - gau.g(t).unwrap()).abs());
    }
    assert!(sup < 1e-3, "{sup}");
    let h = huber_norm(2, 1e3, 1.0).unwrap();
    assert!((h - 1.0 / (2.0 * std::f64::consts::PI)).abs() < 1e-9);
}

#[test]
fn huber_constraints() {
    assert!(matches!(FamilySpec::huber(HUBER_MIN_QUANTILE, 2), Err(Error::ConstraintViolated(_))));
    assert!(matches!(FamilySpec::huber(0.70, 1), Err(Error::ConstraintViolated(_))));
    assert!(FamilySpec::huber(0.0, 1).is_err());
    assert!(FamilySpec::huber(1.0, 1).is_err());
    assert!(FamilySpec::huber(0.71, 1).is_ok());
    let spec = huber_c1(0.8, 2);
    assert!((spec.huber_constants().unwrap().c - 1.282).abs() < 1e-3);
    assert!(FamilySpec::student_t(0.0, 2).is_err());
    assert!(FamilySpec::student_t(-1.0, 2).is_err());
}

#[test]
fn psi_examples() {
    for r in 1..=3 {
        let g = FamilySpec::gaussian(r);
        for t in [0.0, 1.0, 17.0] {
            assert_eq!(g.psi(t).unwrap(), 0.5);
            assert_eq!(g.eta_loss(t).unwrap(), 0.0);
        }
    }
    let t = FamilySpec::student_t(3.0, 2).unwrap();
    assert!((t.psi(0.0).unwrap() - 5.0 / 6.0).abs() < 1e-15);
    let h = huber_c1(0.8, 1);
    let b = h.huber_constants().unwrap().b;
    assert!((h.psi(0.5).unwrap() - 1.0 / (2.0 * b)).abs() < 1e-15);
    assert!((h.psi(0.5).unwrap() - 0.7366).abs() < 1e-3);
    assert!(g_err(&h, -1.0));
}

fn g_err(spec: &FamilySpec, t: f64) -> bool {
    spec.g(t).is_err() && spec.psi(t).is_err() && spec.rho(t).is_err()
}

#[test]
fn derivatives_match_finite_differences() {
    for r in 1..=3 {
        for spec in families(r) {
            let kink = spec.huber_constants().map(|h| h.c2);
            for i in 1..60 {
                let t = i as f64 * 0.37;
                if kink.is_some_and(|k| (t - k).abs() < 1e-3) {
                    continue;
                }
                let h = 1e-5 * t.max(1.0);
                let dr = (spec.rho(t + h).unwrap() - spec.rho(t - h).unwrap()) / (2.0 * h);
                let psi = spec.psi(t).unwrap();
                assert!(rel_err(dr, psi) < 1e-6, "{:?} t={t}: {dr} vs {psi}", spec.kind());
                let dp = (spec.psi(t + h).unwrap() - spec.psi(t - h).unwrap()) / (2.0 * h);
                let eta = spec.eta_loss(t).unwrap();
                assert!((dp - eta).abs() < 1e-6 * eta.abs().max(1e-2), "{:?} t={t}: {dp} vs {eta}", spec.kind());
                assert!(psi > 0.0 && eta <= 0.0);
            }
        }
    }
}

#[test]
fn huber_continuity_at_kink() {
    for r in 1..=3 {
        let spec = FamilySpec::huber(0.8, r).unwrap();
        let k = spec.huber_constants().unwrap().c2;
        let (lo, hi) = (k * (1.0 - 1e-15), k * (1.0 + 1e-15));
        assert!((spec.g(lo).unwrap() - spec.g(hi).unwrap()).abs() < 1e-12);
        assert!((spec.rho(lo).unwrap() - spec.rho(hi).unwrap()).abs() < 1e-12);
        assert!((spec.psi(lo).unwrap() - spec.psi(hi).unwrap()).abs() < 1e-12);
        let b = spec.huber_constants().unwrap().b;
        assert_eq!(spec.eta_loss(k * 0.999).unwrap(), 0.0);
        let right = spec.eta_loss(k * 1.001).unwrap();
        assert!((right - (-k / (2.0 * b * (k * 1.001).powi(2)))).abs() < 1e-12);
    }
    // the univariate pdf behind H_c is continuous at |z| = c
    let spec = FamilySpec::huber(0.8, 1).unwrap();
    let c = spec.huber_constants().unwrap().c;
    let eps = 1e-12;
    assert!((spec.pdf_1d(c - eps) - spec.pdf_1d(c + eps)).abs() < 1e-10);
}

#[test]
fn cdf_properties() {
    for r in 1..=3 {
        for spec in families(r) {
            assert!((spec.cdf_1d(0.0) - 0.5).abs() < 1e-14, "{:?}", spec.kind());
            assert!(spec.cdf_1d(-1e6) < 1e-6 && spec.cdf_1d(1e6) > 1.0 - 1e-6);
            // cdf' = pdf
            for i in 0..20 {
                let z = -5.0 + i as f64 * 0.53;
                let h = 1e-5;
                let d = (spec.cdf_1d(z + h) - spec.cdf_1d(z - h)) / (2.0 * h);
                assert!(rel_err(d, spec.pdf_1d(z)) < 1e-5, "{:?} z={z}", spec.kind());
            }
        }
    }
}

#[test]
fn huber_cdf_matches_quadrature() {
    for spec in [huber_c1(0.8, 1), FamilySpec::huber(0.8, 2).unwrap(), FamilySpec::huber(0.9, 3).unwrap()] {
        let c = spec.huber_constants().unwrap().c;
        for i in 0..20 {
            let z = -6.0 + i as f64 * 0.6;
            let q = integrate_to(|x| spec.pdf_1d(x), z, &[-c, c], 300);
            assert!((spec.cdf_1d(z) - q).abs() < 1e-8, "z={z}: {} vs {q}", spec.cdf_1d(z));
        }
    }
}

#[test]
fn cap_psi_examples() {
    let g = FamilySpec::gaussian(2);
    let want = -(1.0 / (2.0 * std::f64::consts::PI).sqrt()) / 0.5;
    assert!((g.cap_psi(0.0) - want).abs() < 1e-12);
    assert!((g.cap_psi(0.0) + 0.79788).abs() < 1e-5);
    assert!((g.cap_psi(-40.0) + 40.0).abs() < 0.03);
    // both sides of the asymptotic switch agree
    assert!(rel_err(g.cap_psi(-29.999), g.cap_psi(-30.001)) < 1e-4);
    for spec in families(2) {
        assert!(spec.cap_psi(40.0).abs() < 1e-3, "{:?}", spec.kind());
        assert!(spec.cap_psi(-3.0) < 0.0);
        let (lc, cp) = spec.log_cdf_and_cap_psi(-1.3);
        assert!((lc - spec.log_cdf_1d(-1.3)).abs() < 1e-14);
        assert!(rel_err(cp, spec.cap_psi(-1.3)) < 1e-12);
    }
}

#[test]
fn generator_normalizes_in_plane() {
    for spec in families(2) {
        let total = integrate_plane(|x, y| spec.g(x * x + y * y).unwrap(), [0.0, 0.0], [1.0, 1.0], 80);
        assert!((total - 1.0).abs() < 1e-5, "{:?}: {total}", spec.kind());
    }
    for spec in families(1) {
        let (xs, ws) = real_line_rule(0.0, 1.0, 400, 10);
        let total: f64 = xs.iter().zip(&ws).map(|(&x, &w)| w * spec.g(x * x).unwrap()).sum();
        assert!((total - 1.0).abs() < 1e-5, "{:?}: {total}", spec.kind());
    }
}

proptest! {
    #[test]
    fn psi_positive_eta_nonpositive(t in 0.0f64..200.0, r in 1usize..5, nu in 0.5f64..30.0, q in 0.71f64..0.99) {
        for spec in [FamilySpec::gaussian(r), FamilySpec::student_t(nu, r).unwrap(), FamilySpec::huber(q, r).unwrap()] {
            prop_assert!(spec.psi(t).unwrap() > 0.0);
            prop_assert!(spec.eta_loss(t).unwrap() <= 0.0);
            prop_assert!(spec.log_g(t).unwrap().is_finite());
            let x = t - 100.0;
            // the right tail underflows to -0
            let ok = if x <= 0.0 { spec.cap_psi(x) < 0.0 } else { spec.cap_psi(x) <= 0.0 };
            prop_assert!(ok);
        }
    }
}
