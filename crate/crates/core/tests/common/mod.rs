//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Gauss–Legendre nodes and weights on [-1, 1] by Newton iteration on P_n.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        loop {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-15 {
                w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
                break;
            }
        }
        x[i] = z;
    }
    (x, w)
}

/// Composite rule on [a, b]: `(nodes, weights)`.
pub fn composite(a: f64, b: f64, panels: usize, order: usize) -> (Vec<f64>, Vec<f64>) {
    let (gx, gw) = gauss_legendre(order);
    let h = (b - a) / panels as f64;
    let mut xs = Vec::with_capacity(panels * order);
    let mut ws = Vec::with_capacity(panels * order);
    for p in 0..panels {
        let lo = a + p as f64 * h;
        for (x, w) in gx.iter().zip(&gw) {
            xs.push(lo + 0.5 * h * (x + 1.0));
            ws.push(0.5 * h * w);
        }
    }
    (xs, ws)
}

/// Rule over the whole real line via `x = c + s·u/(1-u²)`, `u ∈ (-1, 1)`.
pub fn real_line_rule(c: f64, s: f64, panels: usize, order: usize) -> (Vec<f64>, Vec<f64>) {
    let (us, uw) = composite(-1.0, 1.0, panels, order);
    us.iter()
        .zip(&uw)
        .map(|(&u, &w)| {
            let d = 1.0 - u * u;
            (c + s * u / d, w * s * (1.0 + u * u) / (d * d))
        })
        .unzip()
}

pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    let (xs, ws) = composite(a, b, panels, 16);
    xs.iter().zip(&ws).map(|(&x, &w)| w * f(x)).sum()
}

/// `∫_{-∞}^{a} f` via `x = a + 1 - w^{-4}`, smooth for power-law tails too.
pub fn integrate_left_tail(f: impl Fn(f64) -> f64, a: f64, panels: usize) -> f64 {
    integrate(|w| f(a + 1.0 - w.powi(-4)) * 4.0 * w.powi(-5), 0.0, 1.0, panels)
}

/// `∫_{-∞}^{z} f` with extra panel boundaries at `breaks` (e.g. kinks).
pub fn integrate_to(f: impl Fn(f64) -> f64, z: f64, breaks: &[f64], panels: usize) -> f64 {
    let mut pts: Vec<f64> = breaks.iter().copied().filter(|&b| b < z).collect();
    pts.sort_by(f64::total_cmp);
    pts.push(z);
    let mut total = integrate_left_tail(&f, pts[0], panels);
    for w in pts.windows(2) {
        total += integrate(&f, w[0], w[1], panels);
    }
    total
}

/// Tensor-product integral over ℝ² of `f(x, y)`.
pub fn integrate_plane(f: impl Fn(f64, f64) -> f64, c: [f64; 2], s: [f64; 2], panels: usize) -> f64 {
    let (xs, wx) = real_line_rule(c[0], s[0], panels, 10);
    let (ys, wy) = real_line_rule(c[1], s[1], panels, 10);
    let mut total = 0.0;
    for (&x, &a) in xs.iter().zip(&wx) {
        let mut row = 0.0;
        for (&y, &b) in ys.iter().zip(&wy) {
            row += b * f(x, y);
        }
        total += a * row;
    }
    total
}

/// Central difference gradient.
pub fn fd_grad(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut p = x.to_vec();
    (0..x.len())
        .map(|i| {
            let step = h * x[i].abs().max(1.0);
            p[i] = x[i] + step;
            let up = f(&p);
            p[i] = x[i] - step;
            let dn = f(&p);
            p[i] = x[i];
            (up - dn) / (2.0 * step)
        })
        .collect()
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-3)
}

/// Binned Pearson χ² p-value of 2-D samples against a density, using an
/// `nb × nb` grid over `[lo, hi]` plus one overflow bin. Bins expecting fewer
/// than 5 counts are folded into the overflow bin.
pub fn chi2_gof_2d(
    samples: &[f64],
    density: impl Fn(f64, f64) -> f64,
    lo: [f64; 2],
    hi: [f64; 2],
    nb: usize,
) -> f64 {
    let n = samples.len() / 2;
    let hx = (hi[0] - lo[0]) / nb as f64;
    let hy = (hi[1] - lo[1]) / nb as f64;
    let mut counts = vec![0usize; nb * nb];
    let mut outside = 0usize;
    for p in samples.chunks_exact(2) {
        let i = ((p[0] - lo[0]) / hx).floor();
        let j = ((p[1] - lo[1]) / hy).floor();
        if i >= 0.0 && j >= 0.0 && (i as usize) < nb && (j as usize) < nb {
            counts[i as usize * nb + j as usize] += 1;
        } else {
            outside += 1;
        }
    }
    let (gx, gw) = gauss_legendre(6);
    let mut probs = vec![0.0; nb * nb];
    for i in 0..nb {
        for j in 0..nb {
            let (x0, y0) = (lo[0] + i as f64 * hx, lo[1] + j as f64 * hy);
            let mut s = 0.0;
            for (a, wa) in gx.iter().zip(&gw) {
                for (b, wb) in gx.iter().zip(&gw) {
                    s += wa * wb * density(x0 + 0.5 * hx * (a + 1.0), y0 + 0.5 * hy * (b + 1.0));
                }
            }
            probs[i * nb + j] = s * 0.25 * hx * hy;
        }
    }
    pearson(&counts, &probs, outside, n)
}

/// Same as [`chi2_gof_2d`] in one dimension.
pub fn chi2_gof_1d(samples: &[f64], density: impl Fn(f64) -> f64, lo: f64, hi: f64, nb: usize) -> f64 {
    let h = (hi - lo) / nb as f64;
    let mut counts = vec![0usize; nb];
    let mut outside = 0usize;
    for &x in samples {
        let i = ((x - lo) / h).floor();
        if i >= 0.0 && (i as usize) < nb {
            counts[i as usize] += 1;
        } else {
            outside += 1;
        }
    }
    let probs: Vec<f64> = (0..nb)
        .map(|i| integrate(&density, lo + i as f64 * h, lo + (i + 1) as f64 * h, 2))
        .collect();
    pearson(&counts, &probs, outside, samples.len())
}

fn pearson(counts: &[usize], probs: &[f64], mut outside: usize, n: usize) -> f64 {
    let nf = n as f64;
    let mut stat = 0.0;
    let mut bins = 0usize;
    let mut p_in = 0.0;
    for (&c, &p) in counts.iter().zip(probs) {
        if p * nf < 5.0 {
            outside += c;
            continue;
        }
        p_in += p;
        bins += 1;
        let e = p * nf;
        stat += (c as f64 - e).powi(2) / e;
    }
    let e_out = (1.0 - p_in).max(0.0) * nf;
    if e_out >= 5.0 {
        stat += (outside as f64 - e_out).powi(2) / e_out;
        bins += 1;
    } else {
        assert!(outside as f64 <= 5.0 + 5.0 * e_out.sqrt() + 10.0, "{outside} samples outside bins, expected {e_out}");
    }
    let dof = (bins - 1) as f64;
    1.0 - ChiSquared::new(dof).unwrap().cdf(stat)
}

/// Two-sample Kolmogorov–Smirnov p-value (asymptotic).
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs());
    }
    let ne = (a.len() * b.len()) as f64 / (a.len() + b.len()) as f64;
    let lam = (ne.sqrt() + 0.12 + 0.11 / ne.sqrt()) * d;
    let mut p = 0.0;
    for k in 1..200 {
        let kf = k as f64;
        let term = 2.0 * (-1f64).powi(k - 1) * (-2.0 * kf * kf * lam * lam).exp();
        p += term;
        if term.abs() < 1e-12 {
            break;
        }
    }
    p.clamp(0.0, 1.0)
}

/// Plain Gaussian-mixture EM, written from the textbook updates.
pub struct Gmm {
    pub weights: Vec<f64>,
    pub means: Vec<Vec<f64>>,
    /// Row-major `r × r` covariances.
    pub covs: Vec<Vec<f64>>,
}

fn gauss_logpdf_2(x: &[f64], mu: &[f64], c: &[f64]) -> f64 {
    // explicit 2x2 inverse and determinant
    let det = c[0] * c[3] - c[1] * c[2];
    let (dx, dy) = (x[0] - mu[0], x[1] - mu[1]);
    let q = (c[3] * dx * dx - (c[1] + c[2]) * dx * dy + c[0] * dy * dy) / det;
    -(2.0 * std::f64::consts::PI).ln() - 0.5 * det.ln() - 0.5 * q
}

impl Gmm {
    /// Runs `iters` EM steps on 2-D points.
    pub fn run(mut self, pts: &[Vec<f64>], iters: usize) -> Self {
        let l = self.weights.len();
        for _ in 0..iters {
            let v: Vec<Vec<f64>> = pts
                .iter()
                .map(|x| {
                    let lp: Vec<f64> = (0..l)
                        .map(|m| self.weights[m].ln() + gauss_logpdf_2(x, &self.means[m], &self.covs[m]))
                        .collect();
                    let mx = lp.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    let s: f64 = lp.iter().map(|a| (a - mx).exp()).sum();
                    lp.iter().map(|a| (a - mx).exp() / s).collect()
                })
                .collect();
            for m in 0..l {
                let mass: f64 = v.iter().map(|r| r[m]).sum();
                let mut mu = [0.0; 2];
                for (x, r) in pts.iter().zip(&v) {
                    mu[0] += r[m] * x[0];
                    mu[1] += r[m] * x[1];
                }
                mu.iter_mut().for_each(|a| *a /= mass);
                let mut c = [0.0; 4];
                for (x, r) in pts.iter().zip(&v) {
                    let d = [x[0] - mu[0], x[1] - mu[1]];
                    for a in 0..2 {
                        for b in 0..2 {
                            c[a * 2 + b] += r[m] * d[a] * d[b];
                        }
                    }
                }
                c.iter_mut().for_each(|a| *a /= mass);
                self.means[m] = mu.to_vec();
                self.covs[m] = c.to_vec();
                self.weights[m] = mass / pts.len() as f64;
            }
        }
        self
    }
}
