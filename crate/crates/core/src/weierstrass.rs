//! Weierstrass data for conformal minimal immersions of circular domains.
//!
//! An immersion is represented by its derivative components `phi_1..phi_n`
//! (null, with no common zero) stored as a plain Laurent base plus a stack
//! of shear steps. Each step rotates one spinor pair by a structured
//! nonvanishing factor; values are propagated through the stack pointwise,
//! and the null defect is tracked algebraically so that conformality stays
//! verifiable across hundreds of orders of magnitude.

use serde::{Deserialize, Serialize};

use crate::domain::{AnnularDomain, HomologyBasis};
use crate::error::{Error, Result};
use crate::funspace::LaurentFunction;
use crate::holo::Holo;
use crate::quad::{self, QuadOpts};
use crate::{C64, I};

/// One shear step acting on the spinor pair of components `(a, b)`.
///
/// With `f = phi_a - i phi_b` and `g = phi_a + i phi_b`, the step replaces
/// `(f, g)` by `(f h, g / h)`, which preserves the null identity exactly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LopezRosStep {
    /// First component of the sheared pair.
    pub a: usize,
    /// Second component of the sheared pair.
    pub b: usize,
    /// Nonvanishing multiplier.
    pub h: Holo,
}

/// Rank diagnostics for a sampled component matrix.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RankReport {
    /// Numerical rank at the requested tolerance.
    pub rank: usize,
    /// Singular values of the row-normalized sample matrix, descending.
    pub sigmas: Vec<f64>,
    /// `sigma_rank / sigma_1`, the margin of the last accepted direction.
    pub margin: f64,
}

/// Weierstrass data: a Laurent base with a stack of shear steps.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeierstrassData {
    domain: AnnularDomain,
    base: Vec<LaurentFunction>,
    steps: Vec<LopezRosStep>,
    base_point: C64,
}

/// Scale threshold at which propagated component values are renormalized.
const RESCALE_AT: f64 = 1e100;

/// Relative tolerance for the null identity of a plain Laurent base.
const NULL_TOL: f64 = 1e-10;

impl WeierstrassData {
    /// Validates and wraps a plain Laurent base.
    ///
    /// Requires at least three components, holomorphy on the domain, the
    /// null identity `sum phi_j^2 = 0` and absence of common zeros on a
    /// dense sample, and a base point inside the domain.
    pub fn new(
        domain: AnnularDomain,
        base: Vec<LaurentFunction>,
        base_point: C64,
    ) -> Result<Self> {
        if base.len() < 3 {
            return Err(Error::InvalidArgument(format!(
                "need at least 3 components, got {}",
                base.len()
            )));
        }
        if !domain.contains(base_point) {
            return Err(Error::OutOfDomain {
                re: base_point.re,
                im: base_point.im,
            });
        }
        if domain.is_disc() {
            for (j, f) in base.iter().enumerate() {
                if f.support().map_or(false, |(lo, _)| lo < 0) {
                    return Err(Error::InvalidArgument(format!(
                        "component {j} has negative exponents on a disc"
                    )));
                }
            }
        }
        let data = Self {
            domain,
            base,
            steps: Vec::new(),
            base_point,
        };
        let grid = data.domain.validation_grid(24, 96);
        let mut sup_sq: f64 = 0.0;
        let mut max_null: f64 = 0.0;
        let mut min_common = f64::INFINITY;
        for &z in &grid {
            let (vals, null) = data.eval_with_null(z);
            let m = vals.iter().map(|v| v.norm()).fold(0.0, f64::max);
            sup_sq = sup_sq.max(m * m);
            max_null = max_null.max(null.norm());
            min_common = min_common.min(m);
        }
        if max_null > NULL_TOL * (1.0 + sup_sq) {
            return Err(Error::InvalidArgument(format!(
                "null identity violated: max |sum phi^2| = {max_null:.3e}"
            )));
        }
        if !(min_common * min_common > 1e-24 * sup_sq) {
            return Err(Error::Vanishing {
                min_abs: min_common,
            });
        }
        Ok(data)
    }

    /// Number of components.
    pub fn n_components(&self) -> usize {
        self.base.len()
    }

    /// The underlying domain.
    pub fn domain(&self) -> &AnnularDomain {
        &self.domain
    }

    /// The immersion's base point (integration origin).
    pub fn base_point(&self) -> C64 {
        self.base_point
    }

    /// The applied shear steps, oldest first.
    pub fn steps(&self) -> &[LopezRosStep] {
        &self.steps
    }

    /// The plain Laurent base components.
    pub fn base_components(&self) -> &[LaurentFunction] {
        &self.base
    }

    /// Whether no steps have been applied.
    pub fn is_plain(&self) -> bool {
        self.steps.is_empty()
    }

    /// Appends a shear step after validating its pair indices.
    pub fn push_step(&mut self, step: LopezRosStep) -> Result<()> {
        let n = self.n_components();
        if step.a >= n || step.b >= n || step.a == step.b {
            return Err(Error::InvalidArgument(format!(
                "invalid pair ({}, {}) for {n} components",
                step.a, step.b
            )));
        }
        self.steps.push(step);
        Ok(())
    }

    /// Clone with one extra step.
    pub fn appended(&self, step: LopezRosStep) -> Result<Self> {
        let mut data = self.clone();
        data.push_step(step)?;
        Ok(data)
    }

    /// Clone keeping only the first `n_steps` steps (for replaying the
    /// state a later step acted on).
    pub fn truncated(&self, n_steps: usize) -> Result<Self> {
        if n_steps > self.steps.len() {
            return Err(Error::InvalidArgument(format!(
                "cannot keep {n_steps} of {} steps",
                self.steps.len()
            )));
        }
        let mut data = self.clone();
        data.steps.truncate(n_steps);
        Ok(data)
    }

    /// Component values at `z` (unchecked; callers keep `z` in the domain).
    pub fn eval_components(&self, z: C64) -> Vec<C64> {
        self.eval_with_null(z).0
    }

    /// Component values at `z` with domain membership enforced.
    pub fn eval_checked(&self, z: C64) -> Result<Vec<C64>> {
        if !self.domain.contains(z) {
            return Err(Error::OutOfDomain { re: z.re, im: z.im });
        }
        Ok(self.eval_components(z))
    }

    /// Component values together with the tracked null defect
    /// `sum phi_j^2`.
    ///
    /// Each shear step preserves `phi_a^2 + phi_b^2 = f g` identically, so
    /// the defect is accumulated as the base defect plus the per-step
    /// floating-point slip `x y - f g`, keeping the estimate meaningful even
    /// where the components themselves are astronomically large.
    pub fn eval_with_null(&self, z: C64) -> (Vec<C64>, C64) {
        let mut vals: Vec<C64> = self.base.iter().map(|f| f.eval_at(z)).collect();
        let mut null: C64 = vals.iter().map(|v| v * v).sum();
        let half = C64::new(0.5, 0.0);
        for step in &self.steps {
            let f = vals[step.a] - I * vals[step.b];
            let g = vals[step.a] + I * vals[step.b];
            let x = f * step.h.eval(z);
            let y = g * step.h.eval_recip(z);
            null += x * y - f * g;
            vals[step.a] = (x + y) * half;
            vals[step.b] = I * half * (x - y);
        }
        (vals, null)
    }

    /// `|sum phi_j^2|` at `z` via the tracked identity.
    pub fn conformality_residual(&self, z: C64) -> f64 {
        self.eval_with_null(z).1.norm()
    }

    /// Largest tracked null defect over the given nodes.
    pub fn max_conformality_residual(&self, nodes: &[C64]) -> f64 {
        nodes
            .iter()
            .map(|&z| self.conformality_residual(z))
            .fold(0.0, f64::max)
    }

    /// Component values in scaled form `(w, s)` with `phi = w e^s`; the
    /// common log-scale `s` keeps `w` within floating-point range.
    pub fn eval_scaled(&self, z: C64) -> (Vec<C64>, f64) {
        let mut vals: Vec<C64> = self.base.iter().map(|f| f.eval_at(z)).collect();
        let mut log_scale = 0.0;
        let half = C64::new(0.5, 0.0);
        let renorm = |vals: &mut Vec<C64>, log_scale: &mut f64| {
            let m = vals.iter().map(|v| v.norm()).fold(0.0, f64::max);
            if m > RESCALE_AT || (m > 0.0 && m < 1.0 / RESCALE_AT) {
                let inv = C64::new(1.0 / m, 0.0);
                for v in vals.iter_mut() {
                    *v *= inv;
                }
                *log_scale += m.ln();
            }
        };
        renorm(&mut vals, &mut log_scale);
        for step in &self.steps {
            let f = vals[step.a] - I * vals[step.b];
            let g = vals[step.a] + I * vals[step.b];
            let x = f * step.h.eval(z);
            let y = g * step.h.eval_recip(z);
            vals[step.a] = (x + y) * half;
            vals[step.b] = I * half * (x - y);
            renorm(&mut vals, &mut log_scale);
        }
        (vals, log_scale)
    }

    /// `ln` of the conformal metric speed `sqrt(sum |phi_j|^2 / 2)`.
    pub fn log_speed(&self, z: C64) -> f64 {
        let (vals, log_scale) = self.eval_scaled(z);
        let sq: f64 = vals.iter().map(|v| v.norm_sqr()).sum();
        log_scale + 0.5 * (0.5 * sq).ln()
    }

    /// Conformal metric speed (may overflow to infinity for extreme stacks;
    /// prefer [`Self::log_speed`] when magnitudes are unbounded).
    pub fn speed(&self, z: C64) -> f64 {
        self.log_speed(z).exp()
    }

    /// Spinor pair `(f, g)` of components `(a, b)` from evaluated values.
    pub fn spinor_pair(vals: &[C64], a: usize, b: usize) -> (C64, C64) {
        (vals[a] - I * vals[b], vals[a] + I * vals[b])
    }

    /// Smallest `|phi_a^2 + phi_b^2|` over the nodes (the spinor product of
    /// the pair).
    pub fn min_pair_product_on(&self, nodes: &[C64], a: usize, b: usize) -> f64 {
        nodes
            .iter()
            .map(|&z| {
                let vals = self.eval_components(z);
                let (f, g) = Self::spinor_pair(&vals, a, b);
                (f * g).norm()
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Component periods `oint phi_j dz` over the circle of the given
    /// radius.
    pub fn periods_on(&self, radius: f64, opts: &QuadOpts) -> Result<Vec<C64>> {
        quad::adaptive_circle_vec(radius, opts, |z| self.eval_components(z))
    }

    /// Periods over every basis curve.
    pub fn periods(&self, basis: &HomologyBasis, opts: &QuadOpts) -> Result<Vec<Vec<C64>>> {
        basis
            .curves()
            .iter()
            .map(|c| self.periods_on(c.radius, opts))
            .collect()
    }

    /// Largest Euclidean norm of `Re oint phi` over the basis curves.
    pub fn real_period_defect(&self, basis: &HomologyBasis, opts: &QuadOpts) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for p in self.periods(basis, opts)? {
            let d: f64 = p.iter().map(|c| c.re * c.re).sum::<f64>().sqrt();
            worst = worst.max(d);
        }
        Ok(worst)
    }

    /// Flux vector `Im oint phi dz` over the circle of the given radius.
    pub fn flux_on(&self, radius: f64, opts: &QuadOpts) -> Result<Vec<f64>> {
        Ok(self
            .periods_on(radius, opts)?
            .into_iter()
            .map(|c| c.im)
            .collect())
    }

    /// `Re integral_a^b phi dz` along the straight segment.
    pub fn integrate_segment(&self, a: C64, b: C64, tol: f64) -> Vec<f64> {
        quad::segment_integral(a, b, tol, |z| self.eval_components(z))
            .into_iter()
            .map(|c| c.re)
            .collect()
    }

    /// `Re integral phi dz` along the arc `r e^{i t}`, `t in [t0, t1]`.
    pub fn integrate_arc(&self, r: f64, t0: f64, t1: f64, tol: f64) -> Vec<f64> {
        quad::arc_integral(r, t0, t1, tol, |z| self.eval_components(z))
            .into_iter()
            .map(|c| c.re)
            .collect()
    }

    /// Immersion value `u(z) = Re integral_{x0}^{z} phi dz` along the
    /// canonical path (arc at the base radius, then radial segment).
    pub fn immersion_at(&self, z: C64, tol: f64) -> Result<Vec<f64>> {
        if !self.domain.contains(z) {
            return Err(Error::OutOfDomain { re: z.re, im: z.im });
        }
        let r0 = self.base_point.norm();
        let t0 = self.base_point.arg();
        let t1 = z.arg();
        let arc = self.integrate_arc(r0, t0, t1, tol);
        let corner = C64::from_polar(r0, t1);
        let radial = self.integrate_segment(corner, z, tol);
        Ok(arc.iter().zip(&radial).map(|(a, b)| a + b).collect())
    }

    /// Immersion values on a polar grid, integrated cumulatively along each
    /// spoke from the base radius.
    ///
    /// Returns the grid nodes (radius-major) and the immersion values.
    pub fn immersion_grid(&self, nr: usize, nt: usize, tol: f64) -> (Vec<C64>, Vec<Vec<f64>>) {
        let nodes = self.domain.polar_grid(nr, nt);
        let n = self.n_components();
        let mut values = vec![vec![0.0; n]; nodes.len()];
        let r0 = self.base_point.norm();
        let t0 = self.base_point.arg();
        let radii: Vec<f64> = (0..nr).map(|ir| nodes[ir * nt].norm()).collect();
        for it in 0..nt {
            let t1 = nodes[it].arg();
            let arc = self.integrate_arc(r0, t0, t1, tol);
            // Cumulative radial sums outward and inward from the base radius.
            let mut from_base: Vec<Vec<f64>> = vec![Vec::new(); nr];
            let order: Vec<usize> = (0..nr).collect();
            let dir = C64::from_polar(1.0, t1);
            // Split spoke radii into those below and above r0; integrate
            // adjacent gaps once each.
            let mut below: Vec<usize> = order.iter().cloned().filter(|&i| radii[i] <= r0).collect();
            below.sort_by(|&a, &b| radii[b].partial_cmp(&radii[a]).unwrap());
            let mut above: Vec<usize> = order.iter().cloned().filter(|&i| radii[i] > r0).collect();
            above.sort_by(|&a, &b| radii[a].partial_cmp(&radii[b]).unwrap());
            let mut acc = vec![0.0; n];
            let mut prev_r = r0;
            for &i in &below {
                let seg =
                    self.integrate_segment(dir * prev_r, dir * radii[i], tol);
                for (s, v) in acc.iter_mut().zip(&seg) {
                    *s += v;
                }
                from_base[i] = acc.clone();
                prev_r = radii[i];
            }
            acc = vec![0.0; n];
            prev_r = r0;
            for &i in &above {
                let seg =
                    self.integrate_segment(dir * prev_r, dir * radii[i], tol);
                for (s, v) in acc.iter_mut().zip(&seg) {
                    *s += v;
                }
                from_base[i] = acc.clone();
                prev_r = radii[i];
            }
            for ir in 0..nr {
                for j in 0..n {
                    values[ir * nt + it][j] = arc[j] + from_base[ir][j];
                }
            }
        }
        (nodes, values)
    }

    /// Singular-value diagnostics of the row-normalized component samples.
    ///
    /// Row normalization makes the report about the set of directions
    /// `phi(z) / |phi(z)|`, so extreme magnitudes do not drown out rank.
    pub fn rank_report(&self, nodes: &[C64], tol: f64) -> RankReport {
        use nalgebra::DMatrix;
        let n = self.n_components();
        let mut rows: Vec<Vec<C64>> = Vec::new();
        for &z in nodes {
            let (vals, scale) = self.eval_scaled(z);
            let _ = scale;
            let m = vals.iter().map(|v| v.norm()).fold(0.0, f64::max);
            if m > 0.0 {
                rows.push(vals.iter().map(|v| v / m).collect());
            }
        }
        if rows.is_empty() {
            return RankReport {
                rank: 0,
                sigmas: vec![0.0; n],
                margin: 0.0,
            };
        }
        let mat = DMatrix::<C64>::from_fn(rows.len(), n, |i, j| rows[i][j]);
        let svd = mat.svd(false, false);
        let mut sigmas: Vec<f64> = svd.singular_values.iter().cloned().collect();
        sigmas.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let s1 = sigmas[0].max(f64::MIN_POSITIVE);
        let rank = sigmas.iter().filter(|&&s| s > tol * s1).count();
        let margin = if rank == 0 { 0.0 } else { sigmas[rank - 1] / s1 };
        RankReport {
            rank,
            sigmas,
            margin,
        }
    }

    /// Whether the sampled derivative directions span at least a plane
    /// (the immersion is not flat).
    pub fn is_nonflat(&self, nodes: &[C64], tol: f64) -> bool {
        self.rank_report(nodes, tol).rank >= 2
    }

    /// Whether the sampled derivative directions span all of `C^n`.
    pub fn is_full(&self, nodes: &[C64], tol: f64) -> bool {
        self.rank_report(nodes, tol).rank == self.n_components()
    }

    /// Greedy choice of the spinor pair with the largest minimum spinor
    /// product over the nodes.
    pub fn select_pair(&self, nodes: &[C64]) -> Result<(usize, usize, f64)> {
        let n = self.n_components();
        let mut best: Option<(usize, usize, f64)> = None;
        let mut sup: f64 = 0.0;
        for &z in nodes {
            for v in self.eval_components(z) {
                sup = sup.max(v.norm());
            }
        }
        for a in 0..n {
            for b in (a + 1)..n {
                let rho = self.min_pair_product_on(nodes, a, b);
                if best.map_or(true, |(_, _, r)| rho > r) {
                    best = Some((a, b, rho));
                }
            }
        }
        let (a, b, rho) = best.expect("at least three components");
        let margin_tol = 1e-12 * sup * sup;
        if !(rho > margin_tol) {
            return Err(Error::PairExhausted {
                best: rho,
                margin_tol,
            });
        }
        Ok((a, b, rho))
    }

    /// The catenoid: `phi = ((1 - z^-2) / -2 ... )` in standard form
    /// `phi_1 = (z^-2 - 1) / 2`, `phi_2 = i (z^-2 + 1) / 2`, `phi_3 = 1/z`.
    pub fn catenoid(domain: AnnularDomain, base_point: C64) -> Result<Self> {
        let half = C64::new(0.5, 0.0);
        let ih = C64::new(0.0, 0.5);
        let p1 = LaurentFunction::from_coeffs(-2, vec![half, C64::new(0.0, 0.0), -half]);
        let p2 = LaurentFunction::from_coeffs(-2, vec![ih, C64::new(0.0, 0.0), ih]);
        let p3 = LaurentFunction::monomial(-1, C64::new(1.0, 0.0));
        Self::new(domain, vec![p1, p2, p3], base_point)
    }

    /// A flat plane: `phi = (1, i, 0)`.
    pub fn flat_plane(domain: AnnularDomain, base_point: C64) -> Result<Self> {
        let p1 = LaurentFunction::one();
        let p2 = LaurentFunction::constant(I);
        let p3 = LaurentFunction::zero();
        Self::new(domain, vec![p1, p2, p3], base_point)
    }

    /// The catenoid padded with a vanishing fourth component (full in
    /// `C^3`, degenerate in `C^4`).
    pub fn catenoid_padded(domain: AnnularDomain, base_point: C64) -> Result<Self> {
        let cat = Self::catenoid(domain.clone(), base_point)?;
        let mut base = cat.base;
        base.push(LaurentFunction::zero());
        Self::new(domain, base, base_point)
    }
}

/// Perturbs a plain, non-full triple of components into a full one while
/// keeping the null identity exact and the change small.
///
/// The spinor pair `(f, g)` of a chosen component pair is multiplied by
/// `1 + d1 z` and `1 + d2 / z` respectively; the remaining component is
/// multiplied by the exact square root `sqrt((1 + d1 z)(1 + d2 / z))`
/// (realized by a truncated logarithm/exponential with negligible tail), so
/// `f g` changes by the same factor squared and the null identity survives.
/// Periods are then restored exactly by two spray corrections.
pub fn perturb_to_full(
    data: &WeierstrassData,
    delta: f64,
    seed: u64,
) -> Result<WeierstrassData> {
    use rand::{Rng, SeedableRng};

    if !data.is_plain() {
        return Err(Error::PerturbationFailed(
            "perturbation requires plain (unsheared) data".into(),
        ));
    }
    if !(delta.is_finite() && delta > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "perturbation size must be positive, got {delta}"
        )));
    }
    let probe = data.domain.validation_grid(16, 64);
    let tol = 1e-8;
    if data.is_full(&probe, tol) {
        return Ok(data.clone());
    }
    if data.n_components() != 3 {
        return Err(Error::PerturbationFailed(format!(
            "cannot perturb {} non-full components; only triples are supported",
            data.n_components()
        )));
    }

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let basis = HomologyBasis::for_domain(&data.domain, data.base_point)?;
    let quad_opts = QuadOpts::default();

    for _attempt in 0..3 {
        // Pick a pair whose spinors both carry mass.
        let mut pair: Option<(usize, usize)> = None;
        'outer: for a in 0..3 {
            for b in (a + 1)..3 {
                let fz = |z: C64| {
                    let vals = data.eval_components(z);
                    WeierstrassData::spinor_pair(&vals, a, b)
                };
                let mut min_f = f64::INFINITY;
                let mut min_g = f64::INFINITY;
                let mut sup = 0.0f64;
                for &z in probe.iter().step_by(7) {
                    let (f, g) = fz(z);
                    min_f = min_f.min(f.norm());
                    min_g = min_g.min(g.norm());
                    sup = sup.max(f.norm().max(g.norm()));
                }
                if min_f > 1e-10 * sup && min_g > 1e-10 * sup {
                    pair = Some((a, b));
                    break 'outer;
                }
            }
        }
        let Some((a, b)) = pair else {
            return Err(Error::PerturbationFailed(
                "no spinor pair is nonvanishing on the probe grid".into(),
            ));
        };
        let c = (0..3).find(|&j| j != a && j != b).unwrap();

        let r_out = data.domain.r_out();
        let r_in = data.domain.r_in().max(1e-3 * r_out);
        let ang1 = rng.gen_range(0.0..std::f64::consts::TAU);
        let ang2 = rng.gen_range(0.0..std::f64::consts::TAU);
        let mut m1 = 0.5 / r_out;
        let mut m2 = 0.5 * r_in;

        // Scale the multipliers until the sup-change stays within delta.
        let mut result: Option<WeierstrassData> = None;
        for _shrink in 0..5 {
            let d1 = C64::from_polar(m1, ang1);
            let d2 = C64::from_polar(m2, ang2);
            match apply_fullness_kick(data, a, b, c, d1, d2, &basis, &quad_opts) {
                Ok(cand) => {
                    let mut change: f64 = 0.0;
                    for &z in &probe {
                        let old = data.eval_components(z);
                        let new = cand.eval_components(z);
                        let diff: f64 = old
                            .iter()
                            .zip(&new)
                            .map(|(o, n)| (o - n).norm_sqr())
                            .sum::<f64>()
                            .sqrt();
                        change = change.max(diff);
                    }
                    if change <= delta {
                        result = Some(cand);
                        break;
                    }
                }
                Err(_) => {}
            }
            m1 *= 0.5;
            m2 *= 0.5;
        }
        if let Some(cand) = result {
            if cand.is_full(&probe, tol) {
                return Ok(cand);
            }
        }
    }
    Err(Error::PerturbationFailed(
        "no random kick achieved fullness within the size budget".into(),
    ))
}

/// Builds the kicked data: spinor factors on `(a, b)`, square-root factor on
/// `c`, then two spray corrections restoring all periods.
fn apply_fullness_kick(
    data: &WeierstrassData,
    a: usize,
    b: usize,
    c: usize,
    d1: C64,
    d2: C64,
    basis: &HomologyBasis,
    quad_opts: &QuadOpts,
) -> Result<WeierstrassData> {
    let domain = data.domain.clone();
    let base = data.base_components();
    let (fa, fb) = (&base[a], &base[b]);
    let f = fa.sub(&fb.scale(I));
    let g = fa.add(&fb.scale(I));

    let one = LaurentFunction::one();
    let q1 = one.add(&LaurentFunction::monomial(1, d1));
    let q2 = one.add(&LaurentFunction::monomial(-1, d2));
    let f_new = crate::funspace::product(&f, &q1);
    let g_new = crate::funspace::product(&g, &q2);

    // sqrt(q1 q2) via log series: both factors stay within |w| <= 1/2 on the
    // domain, so log(1 + w) truncated at degree 60 has a ~2^-60 tail.
    let sqrt_log = |w: &LaurentFunction| -> LaurentFunction {
        let mut term = w.clone();
        let mut acc = LaurentFunction::zero();
        for k in 1..=60i64 {
            let coeff = C64::new(0.5 * if k % 2 == 1 { 1.0 } else { -1.0 } / k as f64, 0.0);
            acc = acc.add(&term.scale(coeff));
            term = crate::funspace::product(&term, w);
        }
        acc
    };
    let w1 = LaurentFunction::monomial(1, d1);
    let w2 = LaurentFunction::monomial(-1, d2);
    let log_sum = sqrt_log(&w1).add(&sqrt_log(&w2));
    let sqrt_factor = crate::funspace::exp_series(&log_sum, &domain, 80, 1e-13)?;

    let mut new_base = base.to_vec();
    let half = C64::new(0.5, 0.0);
    new_base[a] = f_new.add(&g_new).scale(half);
    new_base[b] = f_new.sub(&g_new).scale(I * half);
    new_base[c] = crate::funspace::product(&base[c], &sqrt_factor);
    let mut kicked = WeierstrassData::new(domain, new_base, data.base_point)?;

    // Restore the original periods pairwise with sprays.
    if basis.is_empty() {
        return Ok(kicked);
    }
    let curve = basis.curves()[0];
    let params = crate::spray::SprayParams::default();
    for &(pa, pb) in &[(a, b), (a, c)] {
        let target = pair_period_targets(data, pa, pb, curve.radius, quad_opts)?;
        let outcome = crate::spray::solve_pair_periods(
            &kicked,
            pa,
            pb,
            &Holo::One,
            curve.radius,
            target.0,
            target.1,
            &params,
        )?;
        if !outcome.step.h.is_one() {
            kicked.push_step(outcome.step)?;
        }
    }
    Ok(kicked)
}

/// Period targets `(oint f, oint g)` of a pair in the given data.
pub fn pair_period_targets(
    data: &WeierstrassData,
    a: usize,
    b: usize,
    radius: f64,
    opts: &QuadOpts,
) -> Result<(C64, C64)> {
    let p = quad::adaptive_circle_vec(radius, opts, |z| {
        let vals = data.eval_components(z);
        let (f, g) = WeierstrassData::spinor_pair(&vals, a, b);
        vec![f, g]
    })?;
    Ok((p[0], p[1]))
}

/// Applies one shear step and verifies period exactness on the basis.
///
/// The step is accepted only if every real period stays below `period_tol`
/// and the pair periods match the pre-step values to the same tolerance.
pub fn lopez_ros_step(
    data: &WeierstrassData,
    a: usize,
    b: usize,
    h: Holo,
    basis: &HomologyBasis,
    opts: &QuadOpts,
    period_tol: f64,
) -> Result<WeierstrassData> {
    if h.is_one() {
        return Ok(data.clone());
    }
    let stepped = data.appended(LopezRosStep { a, b, h })?;
    if !basis.is_empty() {
        let radius = basis.curves()[0].radius;
        let before = pair_period_targets(data, a, b, radius, opts)?;
        let after = pair_period_targets(&stepped, a, b, radius, opts)?;
        let defect = (after.0 - before.0).norm().max((after.1 - before.1).norm());
        if defect > period_tol {
            return Err(Error::InexactPeriods {
                defect,
                tol: period_tol,
            });
        }
    }
    Ok(stepped)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::funspace::LaurentFunction;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn demo_domain() -> AnnularDomain {
        AnnularDomain::new(0.5, 2.0).unwrap()
    }

    fn catenoid() -> WeierstrassData {
        WeierstrassData::catenoid(demo_domain(), c(1.0, 0.0)).unwrap()
    }

    #[test]
    fn catenoid_is_null_and_validated() {
        let cat = catenoid();
        assert_eq!(cat.n_components(), 3);
        for &z in &[c(0.9, 0.4), c(-1.2, 0.3)] {
            assert!(cat.conformality_residual(z) < 1e-14);
        }
    }

    #[test]
    fn constructor_rejects_bad_data() {
        let d = demo_domain();
        // Not null: (1, 1, 1).
        let ones = vec![
            LaurentFunction::one(),
            LaurentFunction::one(),
            LaurentFunction::one(),
        ];
        assert!(WeierstrassData::new(d.clone(), ones, c(1.0, 0.0)).is_err());
        // Common zero: (z - 1 vanishes nowhere jointly with z) is fine, but
        // all-components-vanishing at one point is not representable for a
        // null triple without scaling; instead check base point containment.
        let flat = WeierstrassData::flat_plane(d, c(3.0, 0.0));
        assert!(matches!(flat, Err(Error::OutOfDomain { .. })));
    }

    #[test]
    fn catenoid_periods_and_flux() {
        let cat = catenoid();
        let basis = HomologyBasis::for_domain(cat.domain(), cat.base_point()).unwrap();
        let opts = QuadOpts::default();
        let p = cat.periods(&basis, &opts).unwrap();
        assert_eq!(p.len(), 1);
        let want = [
            c(0.0, 0.0),
            c(0.0, 0.0),
            c(0.0, 2.0 * std::f64::consts::PI),
        ];
        for (got, want) in p[0].iter().zip(&want) {
            assert!((got - want).norm() < 1e-12);
        }
        assert!(cat.real_period_defect(&basis, &opts).unwrap() < 1e-12);
        let flux = cat.flux_on(1.0, &opts).unwrap();
        assert!((flux[0]).abs() < 1e-12);
        assert!((flux[1]).abs() < 1e-12);
        assert!((flux[2] - 2.0 * std::f64::consts::PI).abs() < 1e-12);
    }

    #[test]
    fn shear_step_matches_closed_form() {
        // h = 2 on the pair (0, 1): f = z^-2, g = -1, so the new components
        // are z^-2 - 1/4 and (i/2)(2 z^-2 + 1/2).
        let cat = catenoid();
        let stepped = cat
            .appended(LopezRosStep {
                a: 0,
                b: 1,
                h: Holo::Laurent(LaurentFunction::constant(c(2.0, 0.0))),
            })
            .unwrap();
        let z = c(1.0, 0.0);
        let vals = stepped.eval_components(z);
        assert!((vals[0] - c(0.75, 0.0)).norm() < 1e-14);
        assert!((vals[1] - c(0.0, 1.25)).norm() < 1e-14);
        assert!((vals[2] - c(1.0, 0.0)).norm() < 1e-14);
        assert!(stepped.conformality_residual(z) < 1e-14);
        // Flux is untouched by an exact-period step.
        let flux = stepped.flux_on(1.0, &QuadOpts::default()).unwrap();
        assert!((flux[2] - 2.0 * std::f64::consts::PI).abs() < 1e-11);
    }

    #[test]
    fn step_guard_rejects_period_breaking_multiplier() {
        let cat = catenoid();
        let basis = HomologyBasis::for_domain(cat.domain(), cat.base_point()).unwrap();
        let h = Holo::Laurent(LaurentFunction::from_coeffs(
            0,
            vec![c(1.0, 0.0), c(0.3, 0.0)],
        ));
        let got = lopez_ros_step(&cat, 0, 1, h, &basis, &QuadOpts::default(), 1e-9);
        match got {
            Err(Error::InexactPeriods { defect, .. }) => {
                // oint f h - oint f = 0.3 oint z^-1 dz = 0.6 pi i.
                assert!((defect - 0.6 * std::f64::consts::PI).abs() < 1e-9);
            }
            other => panic!("expected InexactPeriods, got {other:?}"),
        }
        // The same multiplier applied blindly shows up as a real period.
        let stepped = cat
            .appended(LopezRosStep {
                a: 0,
                b: 1,
                h: Holo::Laurent(LaurentFunction::from_coeffs(
                    0,
                    vec![c(1.0, 0.0), c(0.3, 0.0)],
                )),
            })
            .unwrap();
        let defect = stepped
            .real_period_defect(&basis, &QuadOpts::default())
            .unwrap();
        assert!((defect - 0.3 * std::f64::consts::PI).abs() < 1e-9);
    }

    #[test]
    fn speed_and_scaling() {
        let cat = catenoid();
        assert!((cat.speed(c(1.0, 0.0)) - 1.0).abs() < 1e-13);
        assert!(cat.log_speed(c(1.0, 0.0)).abs() < 1e-13);
        // A huge exponential multiplier shifts log-speed by about its
        // log-magnitude without overflowing.
        let h = Holo::Exp(LaurentFunction::constant(c(300.0, 0.0)));
        let boosted = cat.appended(LopezRosStep { a: 0, b: 1, h }).unwrap();
        let ls = boosted.log_speed(c(1.0, 0.0));
        assert!(ls > 290.0 && ls < 310.0, "log-speed {ls}");
        assert!(boosted.conformality_residual(c(1.0, 0.0)) < 1e-12);
    }

    #[test]
    fn immersion_matches_catenoid_closed_form() {
        let cat = catenoid();
        let u = cat.immersion_at(c(2.0, 0.0), 1e-12).unwrap();
        assert!((u[0] - (-0.25)).abs() < 1e-10);
        assert!(u[1].abs() < 1e-10);
        assert!((u[2] - (2.0f64).ln()).abs() < 1e-10);
        // Grid and direct path integration agree.
        let (nodes, vals) = cat.immersion_grid(8, 16, 1e-12);
        let idx = 5 * 16 + 3;
        let direct = cat.immersion_at(nodes[idx], 1e-12).unwrap();
        for j in 0..3 {
            assert!((vals[idx][j] - direct[j]).abs() < 1e-9);
        }
    }

    #[test]
    fn rank_reports_match_determinant_oracle() {
        let cat = catenoid();
        let nodes = [c(1.0, 0.0), c(2.0, 0.0), c(1.0, 1.0)];
        // 3x3 determinant of the component rows, computed directly.
        let rows: Vec<Vec<C64>> = nodes.iter().map(|&z| cat.eval_components(z)).collect();
        let det = rows[0][0] * (rows[1][1] * rows[2][2] - rows[1][2] * rows[2][1])
            - rows[0][1] * (rows[1][0] * rows[2][2] - rows[1][2] * rows[2][0])
            + rows[0][2] * (rows[1][0] * rows[2][1] - rows[1][1] * rows[2][0]);
        assert!(det.norm() > 1e-6);
        let report = cat.rank_report(&nodes, 1e-8);
        assert_eq!(report.rank, 3);
        // The 2x2 minor of the first two rows, columns (0, 1), is 3i/8.
        let minor = rows[0][0] * rows[1][1] - rows[0][1] * rows[1][0];
        assert!((minor - c(0.0, 3.0 / 8.0)).norm() < 1e-12);

        let grid = cat.domain().validation_grid(8, 32);
        assert!(cat.is_full(&grid, 1e-8));
        assert!(cat.is_nonflat(&grid, 1e-8));

        let flat = WeierstrassData::flat_plane(demo_domain(), c(1.0, 0.0)).unwrap();
        assert!(!flat.is_nonflat(&grid, 1e-8));
        let report = flat.rank_report(&grid, 1e-8);
        assert_eq!(report.rank, 1);

        let padded = WeierstrassData::catenoid_padded(demo_domain(), c(1.0, 0.0)).unwrap();
        assert!(!padded.is_full(&grid, 1e-8));
        assert!(padded.is_nonflat(&grid, 1e-8));
    }

    #[test]
    fn pair_selection_prefers_stable_product() {
        let cat = catenoid();
        let nodes = demo_domain().validation_grid(8, 32);
        let (a, b, rho) = cat.select_pair(&nodes).unwrap();
        // Psi for (0, 1) is -z^-2 with |Psi| >= 1/4 on the domain; the other
        // pairs vanish somewhere.
        assert_eq!((a, b), (0, 1));
        assert!(rho > 0.2);
    }
}
