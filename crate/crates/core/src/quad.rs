//! Contour and segment quadrature.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::C64;

/// Options for adaptive contour quadrature.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct QuadOpts {
    /// Relative-plus-absolute convergence tolerance between refinements.
    pub tol: f64,
    /// Initial node count (doubled until convergence).
    pub n0: usize,
    /// Node budget; exceeding it is an error.
    pub n_max: usize,
}

impl Default for QuadOpts {
    fn default() -> Self {
        Self {
            tol: 1e-11,
            n0: 64,
            n_max: 32768,
        }
    }
}

/// Trapezoid approximation of `(1/(2 pi i)) . oint` is not taken here: this
/// returns the plain contour integral `oint_{|z|=r} f(z) dz` over `n` nodes
/// with angular phase `phase`.
///
/// For integrands with a convergent Laurent expansion the rule is exact once
/// `n` exceeds the exponent span, and spectrally accurate in general.
pub fn circle_integral<F: FnMut(C64) -> C64>(r: f64, phase: f64, n: usize, mut f: F) -> C64 {
    let mut acc = C64::new(0.0, 0.0);
    for k in 0..n {
        let t = phase + 2.0 * std::f64::consts::PI * k as f64 / n as f64;
        let z = C64::from_polar(r, t);
        // dz = i z dtheta.
        acc += f(z) * z;
    }
    acc * C64::new(0.0, 2.0 * std::f64::consts::PI / n as f64)
}

/// Vector-valued variant of [`circle_integral`] sharing evaluation points.
pub fn circle_integral_vec<F: FnMut(C64) -> Vec<C64>>(
    r: f64,
    phase: f64,
    n: usize,
    mut f: F,
) -> Vec<C64> {
    let mut acc: Vec<C64> = Vec::new();
    for k in 0..n {
        let t = phase + 2.0 * std::f64::consts::PI * k as f64 / n as f64;
        let z = C64::from_polar(r, t);
        let vals = f(z);
        if acc.is_empty() {
            acc = vec![C64::new(0.0, 0.0); vals.len()];
        }
        for (a, v) in acc.iter_mut().zip(vals) {
            *a += v * z;
        }
    }
    let w = C64::new(0.0, 2.0 * std::f64::consts::PI / n as f64);
    acc.iter().map(|a| a * w).collect()
}

/// Contour integral over `|z| = r` with node doubling until two consecutive
/// refinements agree to `tol * (1 + |I|)`.
pub fn adaptive_circle<F: FnMut(C64) -> C64>(r: f64, opts: &QuadOpts, mut f: F) -> Result<C64> {
    let mut n = opts.n0.max(8);
    let mut prev = circle_integral(r, 0.0, n, &mut f);
    loop {
        n *= 2;
        if n > opts.n_max {
            return Err(Error::QuadratureDiverged {
                change: f64::NAN,
                n_max: opts.n_max,
            });
        }
        let cur = circle_integral(r, 0.0, n, &mut f);
        let change = (cur - prev).norm();
        if change <= opts.tol * (1.0 + cur.norm()) {
            return Ok(cur);
        }
        if n * 2 > opts.n_max {
            return Err(Error::QuadratureDiverged {
                change,
                n_max: opts.n_max,
            });
        }
        prev = cur;
    }
}

/// Vector-valued variant of [`adaptive_circle`] with a shared node sequence.
pub fn adaptive_circle_vec<F: FnMut(C64) -> Vec<C64>>(
    r: f64,
    opts: &QuadOpts,
    mut f: F,
) -> Result<Vec<C64>> {
    let mut n = opts.n0.max(8);
    let mut prev = circle_integral_vec(r, 0.0, n, &mut f);
    loop {
        n *= 2;
        if n > opts.n_max {
            return Err(Error::QuadratureDiverged {
                change: f64::NAN,
                n_max: opts.n_max,
            });
        }
        let cur = circle_integral_vec(r, 0.0, n, &mut f);
        let change = cur
            .iter()
            .zip(&prev)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        let scale = 1.0 + cur.iter().map(|a| a.norm()).fold(0.0, f64::max);
        if change <= opts.tol * scale {
            return Ok(cur);
        }
        if n * 2 > opts.n_max {
            return Err(Error::QuadratureDiverged {
                change,
                n_max: opts.n_max,
            });
        }
        prev = cur;
    }
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`, computed by Newton
/// iteration on the Legendre recurrence.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..(n + 1) / 2 {
        // Chebyshev-based initial guess.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // Legendre P_n(x) and derivative via the three-term recurrence.
            let mut p0 = 1.0;
            let mut p1 = x;
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Integrates `f` along the straight segment from `a` to `b` using composite
/// 16-point Gauss-Legendre panels, doubling the panel count until two
/// refinements agree to `tol * (1 + |I|)` or the panel budget is hit, in
/// which case the last estimate is returned.
pub fn segment_integral<F: FnMut(C64) -> Vec<C64>>(a: C64, b: C64, tol: f64, mut f: F) -> Vec<C64> {
    let (nodes, weights) = gl16();
    let eval = |panels: usize, f: &mut F| -> Vec<C64> {
        let mut acc: Vec<C64> = Vec::new();
        for p in 0..panels {
            let t0 = p as f64 / panels as f64;
            let t1 = (p + 1) as f64 / panels as f64;
            let za = a + (b - a) * C64::new(t0, 0.0);
            let zb = a + (b - a) * C64::new(t1, 0.0);
            let half = (zb - za) * C64::new(0.5, 0.0);
            let mid = (za + zb) * C64::new(0.5, 0.0);
            for (x, w) in nodes.iter().zip(weights.iter()) {
                let z = mid + half * C64::new(*x, 0.0);
                let vals = f(z);
                if acc.is_empty() {
                    acc = vec![C64::new(0.0, 0.0); vals.len()];
                }
                for (s, v) in acc.iter_mut().zip(vals) {
                    *s += v * half * C64::new(*w, 0.0);
                }
            }
        }
        acc
    };
    let mut panels = 1usize;
    let mut prev = eval(panels, &mut f);
    loop {
        panels *= 2;
        let cur = eval(panels, &mut f);
        let change = cur
            .iter()
            .zip(&prev)
            .map(|(x, y)| (x - y).norm())
            .fold(0.0, f64::max);
        let scale = 1.0 + cur.iter().map(|x| x.norm()).fold(0.0, f64::max);
        if change <= tol * scale || panels >= 512 {
            return cur;
        }
        prev = cur;
    }
}

/// Integrates `f` along the circular arc of radius `r` from angle `t0` to
/// `t1` (signed sweep), with the same refinement policy as
/// [`segment_integral`].
pub fn arc_integral<F: FnMut(C64) -> Vec<C64>>(
    r: f64,
    t0: f64,
    t1: f64,
    tol: f64,
    mut f: F,
) -> Vec<C64> {
    let (nodes, weights) = gl16();
    let eval = |panels: usize, f: &mut F| -> Vec<C64> {
        let mut acc: Vec<C64> = Vec::new();
        for p in 0..panels {
            let a = t0 + (t1 - t0) * p as f64 / panels as f64;
            let b = t0 + (t1 - t0) * (p + 1) as f64 / panels as f64;
            let half = (b - a) / 2.0;
            let mid = (a + b) / 2.0;
            for (x, w) in nodes.iter().zip(weights.iter()) {
                let t = mid + half * x;
                let z = C64::from_polar(r, t);
                // dz = i z dt.
                let dz = C64::new(0.0, 1.0) * z;
                let vals = f(z);
                if acc.is_empty() {
                    acc = vec![C64::new(0.0, 0.0); vals.len()];
                }
                for (s, v) in acc.iter_mut().zip(vals) {
                    *s += v * dz * C64::new(w * half, 0.0);
                }
            }
        }
        acc
    };
    let mut panels = 1usize;
    let mut prev = eval(panels, &mut f);
    loop {
        panels *= 2;
        let cur = eval(panels, &mut f);
        let change = cur
            .iter()
            .zip(&prev)
            .map(|(x, y)| (x - y).norm())
            .fold(0.0, f64::max);
        let scale = 1.0 + cur.iter().map(|x| x.norm()).fold(0.0, f64::max);
        if change <= tol * scale || panels >= 512 {
            return cur;
        }
        prev = cur;
    }
}

fn gl16() -> (&'static [f64], &'static [f64]) {
    use std::sync::OnceLock;
    static CACHE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    let (n, w) = CACHE.get_or_init(|| gauss_legendre(16));
    (n, w)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        let (x, w) = gauss_legendre(16);
        // Exact for degree <= 31: check x^20 against 2/21.
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(20)).sum();
        assert!((s - 2.0 / 21.0).abs() < 1e-14);
        let total: f64 = w.iter().sum();
        assert!((total - 2.0).abs() < 1e-14);
    }

    #[test]
    fn residue_on_circle() {
        // oint (3/z + z^2) dz = 2 pi i * 3.
        let got = circle_integral(1.3, 0.0, 64, |z| 3.0 / z + z * z);
        let want = C64::new(0.0, 6.0 * std::f64::consts::PI);
        assert!((got - want).norm() < 1e-12);
    }

    #[test]
    fn adaptive_circle_converges_for_essential_exponential() {
        // oint e^{1/z} dz = 2 pi i (residue of e^{1/z} at 0 is 1).
        let got = adaptive_circle(0.8, &QuadOpts::default(), |z| (1.0 / z).exp()).unwrap();
        let want = C64::new(0.0, 2.0 * std::f64::consts::PI);
        assert!((got - want).norm() < 1e-10);
    }

    #[test]
    fn segment_integral_matches_primitive() {
        // int_1^{2+i} z^2 dz = ((2+i)^3 - 1) / 3.
        let a = C64::new(1.0, 0.0);
        let b = C64::new(2.0, 1.0);
        let got = segment_integral(a, b, 1e-12, |z| vec![z * z]);
        let want = (b * b * b - a * a * a) / C64::new(3.0, 0.0);
        assert!((got[0] - want).norm() < 1e-12);
    }

    #[test]
    fn arc_integral_matches_log_branch() {
        // int along |z|=2 from 0 to pi/2 of dz/z = i pi/2.
        let got = arc_integral(2.0, 0.0, std::f64::consts::FRAC_PI_2, 1e-12, |z| {
            vec![C64::new(1.0, 0.0) / z]
        });
        assert!((got[0] - C64::new(0.0, std::f64::consts::FRAC_PI_2)).norm() < 1e-12);
    }
}
