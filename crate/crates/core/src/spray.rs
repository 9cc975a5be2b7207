//! Period-dominating sprays, Oka-type factors, and Newton period solves.
//!
//! A spray is a finite family of holomorphically approximated bumps on a
//! homology curve; the multiplicative factor `v = exp(sum_j zeta_j a_j)`
//! moves the pair periods `(oint f h, oint g / h)` with full-rank Jacobian,
//! so a minimum-norm Newton iteration can pin them to prescribed targets.
//! The exponential form never vanishes, and exponents add when factors are
//! composed, so distant targets are walked in substeps whose corrections
//! merge into a single exponent polynomial. What bounds the reach instead is
//! floating-point range: bumps grow off their curve (a holomorphic function
//! localized on one circle must grow somewhere), so the accumulated exponent
//! is kept inside a safe real-part budget over the whole domain.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::domain::{AnnularDomain, CircleCurve};
use crate::error::{Error, Result};
use crate::funspace::{self, CurveSamples, LaurentFunction};
use crate::holo::Holo;
use crate::quad::{self, QuadOpts};
use crate::weierstrass::WeierstrassData;
use crate::C64;

/// Tuning knobs for bump construction and the period solve.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SprayParams {
    /// Bump pairs per curve (the spray has `2k` bumps).
    pub k: usize,
    /// Escalation cap for `k` when basis points fail.
    pub max_k: usize,
    /// Bump half-width as a fraction of the curve parameter.
    pub tau: f64,
    /// Laurent degree of the bump fits.
    pub degree: usize,
    /// Cap on the bump fit residual (relative to the unit bump peak).
    pub residual_cap: f64,
    /// Weight of the off-curve control rows in the bump fit. These rows
    /// suppress the harmonics whose off-curve growth outweighs their
    /// on-curve contribution, so the weight sets the growth/localization
    /// trade; `0` disables them. Per-harmonic, suppression kicks in where
    /// `weight^2 * (control nodes) * growth^2` passes the curve node count,
    /// so useful weights are small.
    pub control_weight: f64,
    /// Ridge used in the bump fit.
    pub ridge: f64,
    /// Minimum acceptable basis-point determinant margin.
    pub margin_tol: f64,
    /// Fraction of `trust * sigma_min` consumed per target substep.
    pub step_fraction: f64,
    /// Relative period residual target of the Newton solve.
    pub newton_tol: f64,
    /// Newton iteration cap per substep.
    pub max_iterations: usize,
    /// Total substep budget.
    pub max_substeps: usize,
    /// Quadrature controls for period integrals.
    pub quad: QuadOpts,
}

impl Default for SprayParams {
    fn default() -> Self {
        Self {
            k: 1,
            max_k: 4,
            tau: 0.1,
            degree: 20,
            residual_cap: 0.2,
            control_weight: 3e-4,
            ridge: 1e-10,
            margin_tol: 0.05,
            step_fraction: 0.5,
            newton_tol: 1e-11,
            max_iterations: 10,
            max_substeps: 256,
            quad: QuadOpts::default(),
        }
    }
}

impl SprayParams {
    /// Wide, low-order bumps trading localization for low off-curve growth
    /// (a large exponent budget); suited to large period moves such as flux
    /// prescription.
    pub fn wide() -> Self {
        Self {
            tau: 0.2,
            degree: 12,
            residual_cap: 0.5,
            control_weight: 5e-3,
            margin_tol: 0.02,
            step_fraction: 0.6,
            ..Self::default()
        }
    }
}

/// A family of normalized bumps anchored at points of one curve.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BumpFamily {
    /// The carrying curve.
    pub curve: CircleCurve,
    /// Anchor parameters in `[0, 1)`, pairs listed as `j` then `k + j`.
    pub points: Vec<f64>,
    /// Bump half-width in curve parameter.
    pub tau: f64,
    /// Holomorphic bump approximations, `oint a dz = 1` each.
    pub bumps: Vec<LaurentFunction>,
    /// Sup-norm fit residuals over the curve samples, per bump.
    pub residuals: Vec<f64>,
    /// Largest `|a|` over curve and control samples, per bump.
    pub sup_on_control: Vec<f64>,
    /// Largest `|a|` over the curve samples, per bump.
    pub sup_on_curve: Vec<f64>,
}

/// A spray: bumps plus the validated nonvanishing ball.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SprayDiagnostics {
    /// Basis-point determinant margin.
    pub basis_margin: f64,
    /// Bump fit residuals.
    pub bump_residuals: Vec<f64>,
    /// Per-substep parameter radius (trust and overflow limits combined).
    pub ball_radius: f64,
    /// Smallest singular value of the initial period Jacobian.
    pub sigma_min: f64,
    /// Largest singular value of the initial period Jacobian.
    pub sigma_max: f64,
    /// Substeps used to walk the target.
    pub substeps: usize,
    /// Largest Newton iteration count over the substeps.
    pub iterations: usize,
    /// Final absolute period residual.
    pub residual: f64,
    /// Largest `|zeta_j|` used in any substep.
    pub zeta_max: f64,
}

/// Result of a pair-period solve: the shear step and its diagnostics.
#[derive(Clone, Debug)]
pub struct SprayOutcome {
    /// Step carrying `h = base * v`, ready to append.
    pub step: crate::weierstrass::LopezRosStep,
    /// Solver diagnostics for reports.
    pub diagnostics: SprayDiagnostics,
}

/// Normalized independence margin of two spinor value pairs:
/// `|det| / (|v1| |v2|)`, in `[0, 1]`.
pub fn basis_margin(v1: (C64, C64), v2: (C64, C64)) -> f64 {
    let det = v1.0 * v2.1 - v2.0 * v1.1;
    let n1 = (v1.0.norm_sqr() + v1.1.norm_sqr()).sqrt();
    let n2 = (v2.0.norm_sqr() + v2.1.norm_sqr()).sqrt();
    if n1 == 0.0 || n2 == 0.0 {
        0.0
    } else {
        det.norm() / (n1 * n2)
    }
}

/// Chooses `2k` curve parameters such that every family member has some
/// pair `(y_j, y_{k+j})` whose spinor values form a well-conditioned basis
/// of `C^2`.
///
/// Greedy: each pair is picked to maximize the worst margin over the members
/// not yet covered by earlier pairs. Returns the parameters (pair firsts,
/// then pair seconds) and the achieved overall margin.
pub fn select_basis_points<F>(
    members: usize,
    fg: F,
    curve: &CircleCurve,
    k: usize,
    avoid_params: &[f64],
    margin_tol: f64,
) -> Result<(Vec<f64>, f64)>
where
    F: Fn(usize, C64) -> (C64, C64),
{
    if members == 0 || k == 0 {
        return Err(Error::InvalidArgument(
            "need at least one member and one pair".into(),
        ));
    }
    let n_cand = (4 * k + 8).max(12);
    let mut cands: Vec<f64> = Vec::new();
    'cand: for j in 0..n_cand {
        let s = (j as f64 + 0.37) / n_cand as f64;
        for &a in avoid_params {
            let d = (s - a).rem_euclid(1.0);
            if d.min(1.0 - d) < 0.02 {
                continue 'cand;
            }
        }
        cands.push(s);
    }
    // Spinor values for every member at every candidate.
    let values: Vec<Vec<(C64, C64)>> = (0..members)
        .map(|d| cands.iter().map(|&s| fg(d, curve.point(s))).collect())
        .collect();

    let mut chosen: Vec<(usize, usize)> = Vec::new();
    let mut covered_margin = vec![0.0f64; members];
    for _ in 0..k {
        let mut best: Option<(usize, usize, f64)> = None;
        for i in 0..cands.len() {
            for j in (i + 1)..cands.len() {
                if chosen
                    .iter()
                    .any(|&(a, b)| a == i || a == j || b == i || b == j)
                {
                    continue;
                }
                // Worst member margin if this pair were added.
                let mut worst = f64::INFINITY;
                for d in 0..members {
                    let m = basis_margin(values[d][i], values[d][j]).max(covered_margin[d]);
                    worst = worst.min(m);
                }
                if best.map_or(true, |(_, _, w)| worst > w) {
                    best = Some((i, j, worst));
                }
            }
        }
        let (i, j, _) = best.ok_or_else(|| Error::InvalidArgument(
            "not enough distinct candidate points".into(),
        ))?;
        for d in 0..members {
            covered_margin[d] =
                covered_margin[d].max(basis_margin(values[d][i], values[d][j]));
        }
        chosen.push((i, j));
    }
    let margin = covered_margin.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(margin > margin_tol) {
        return Err(Error::BasisPointsExhausted {
            best: margin,
            margin_tol,
        });
    }
    let mut points: Vec<f64> = chosen.iter().map(|&(i, _)| cands[i]).collect();
    points.extend(chosen.iter().map(|&(_, j)| cands[j]));
    Ok((points, margin))
}

/// The smooth compactly supported unit bump `cos^4(pi x / 2)` on `|x| < 1`.
fn bump_profile(x: f64) -> f64 {
    if x.abs() >= 1.0 {
        0.0
    } else {
        let c = (std::f64::consts::FRAC_PI_2 * x).cos();
        c.powi(4)
    }
}

/// Builds holomorphic bump approximations anchored at the given curve
/// parameters.
///
/// Each bump targets a smooth arc bump of half-width `tau` (in curve
/// parameter) and zero on two control circles bracketing the curve inside
/// `control`; after the least-squares fit, the bump is rescaled so that
/// `oint a dz = 1` exactly at the coefficient level. Residuals and control
/// sups are recorded.
pub fn build_bumps(
    curve: &CircleCurve,
    params_s: &[f64],
    control: &AnnularDomain,
    p: &SprayParams,
) -> Result<BumpFamily> {
    if params_s.is_empty() {
        return Err(Error::InvalidArgument("no bump anchor points".into()));
    }
    for (i, &a) in params_s.iter().enumerate() {
        for &b in params_s.iter().skip(i + 1) {
            let d = (a - b).rem_euclid(1.0);
            if d.min(1.0 - d) < p.tau {
                return Err(Error::InvalidArgument(format!(
                    "bump anchors {a:.4} and {b:.4} are closer than tau = {:.4}",
                    p.tau
                )));
            }
        }
    }
    let m = curve.radius;
    if !(control.r_in() < m && m < control.r_out() || control.r_in() == 0.0) {
        return Err(Error::InvalidArgument(
            "control annulus must contain the curve".into(),
        ));
    }
    let n = (4 * (p.degree + 1)).next_power_of_two().max(512);
    let nodes = curve.nodes(n);
    let control_radii: Vec<f64> = {
        let lo = control.r_in().max(1e-6 * m);
        let hi = control.r_out();
        let mut v = Vec::new();
        if (m / lo).ln() > 1e-3 {
            v.push(lo);
            v.push((lo * m).sqrt());
        }
        if (hi / m).ln() > 1e-3 {
            v.push(hi);
            v.push((hi * m).sqrt());
        }
        v
    };
    let check_radii: Vec<f64> = {
        let mut v = control_radii.clone();
        v.push(m);
        v
    };

    let mut bumps = Vec::with_capacity(params_s.len());
    let mut residuals = Vec::with_capacity(params_s.len());
    let mut sups = Vec::with_capacity(params_s.len());
    let mut curve_sups = Vec::with_capacity(params_s.len());
    for &s0 in params_s {
        let values: Vec<C64> = (0..n)
            .map(|j| {
                let s = j as f64 / n as f64;
                let d = (s - s0).rem_euclid(1.0);
                let d = d.min(1.0 - d);
                C64::new(bump_profile(d / p.tau), 0.0)
            })
            .collect();
        let mut samples = vec![CurveSamples::new(nodes.clone(), values)];
        if p.control_weight > 0.0 {
            for &r in &control_radii {
                let cn = crate::domain::circle_nodes(r, 256, 0.11);
                samples.push(CurveSamples::with_weight(
                    cn.clone(),
                    vec![C64::new(0.0, 0.0); cn.len()],
                    p.control_weight,
                ));
            }
        }
        let fit = funspace::least_squares_fit(&samples, p.degree, p.ridge)?;
        // Judge the fit on the curve alone: the control rows are soft pulls
        // whose mismatch is the intended off-curve growth, not a defect.
        let mut res_curve: f64 = 0.0;
        let (nodes_c, values_c) = (&samples[0].nodes, &samples[0].values);
        for (z, v) in nodes_c.iter().zip(values_c) {
            res_curve = res_curve.max((fit.function.eval_at(*z) - v).norm());
        }
        if res_curve > p.residual_cap {
            return Err(Error::DegreeExhausted {
                degree: p.degree,
                achieved: res_curve,
                tol: p.residual_cap,
            });
        }
        let c_m1 = fit.function.coeff(-1);
        let scale = fit
            .function
            .support()
            .map(|(lo, hi)| (lo..=hi).map(|k| fit.function.coeff(k).norm()).fold(0.0, f64::max))
            .unwrap_or(0.0);
        if c_m1.norm() < 1e-10 * scale.max(1e-300) {
            return Err(Error::Vanishing {
                min_abs: c_m1.norm(),
            });
        }
        let norm = C64::new(0.0, std::f64::consts::TAU) * c_m1;
        let a = fit.function.scale(C64::new(1.0, 0.0) / norm);
        let mut sup: f64 = 0.0;
        for &r in &check_radii {
            for z in crate::domain::circle_nodes(r, 512, 0.05) {
                sup = sup.max(a.eval_at(z).norm());
            }
        }
        let mut sup_curve: f64 = 0.0;
        for z in crate::domain::circle_nodes(m, 512, 0.05) {
            sup_curve = sup_curve.max(a.eval_at(z).norm());
        }
        bumps.push(a);
        residuals.push(res_curve);
        sups.push(sup.max(sup_curve));
        curve_sups.push(sup_curve);
    }
    Ok(BumpFamily {
        curve: *curve,
        points: params_s.to_vec(),
        tau: p.tau,
        bumps,
        residuals,
        sup_on_control: sups,
        sup_on_curve: curve_sups,
    })
}

/// Real-part budget for accumulated exponents; far inside the overflow
/// range of `exp`, yet large enough for any useful factor magnitude.
const EXP_RE_BUDGET: f64 = 250.0;

impl BumpFamily {
    /// Trust radius of the linearization: for `|zeta|_inf` below it, the
    /// exponent stays below `1/2` on the curve, so `exp` deviates from its
    /// tangent by a bounded factor and Newton steps stay productive.
    pub fn trust_radius(&self) -> f64 {
        let worst = self
            .sup_on_curve
            .iter()
            .cloned()
            .fold(0.0f64, f64::max)
            .max(1e-300);
        0.5 / worst
    }

    /// Largest `|zeta|_inf` keeping one substep's exponent inside the
    /// floating-point budget over the whole control region.
    pub fn overflow_radius(&self) -> f64 {
        let worst = self
            .sup_on_control
            .iter()
            .cloned()
            .fold(0.0f64, f64::max)
            .max(1e-300);
        EXP_RE_BUDGET / worst
    }

    /// The exponent polynomial `sum_j zeta_j a_j` of the factor.
    pub fn exponent(&self, zeta: &[C64]) -> LaurentFunction {
        let mut e = LaurentFunction::zero();
        for (z, a) in zeta.iter().zip(&self.bumps) {
            if z.norm_sqr() == 0.0 {
                continue;
            }
            e = e.add(&a.scale(*z));
        }
        e
    }
}

/// Pair periods `(oint f h dz, oint (g / h) dz)` on the circle of the given
/// radius, with `h` checked to be nonvanishing on the sampled curve.
pub fn period_map(
    data: &WeierstrassData,
    a: usize,
    b: usize,
    h: &Holo,
    radius: f64,
    opts: &QuadOpts,
) -> Result<(C64, C64)> {
    for z in crate::domain::circle_nodes(radius, 64, 0.03) {
        let la = h.log_abs(z);
        if !la.is_finite() || la < -650.0 {
            return Err(Error::Vanishing { min_abs: la.exp() });
        }
    }
    let p = quad::adaptive_circle_vec(radius, opts, |z| {
        let vals = data.eval_components(z);
        let (f, g) = WeierstrassData::spinor_pair(&vals, a, b);
        vec![f * h.eval(z), g * h.eval_recip(z)]
    })?;
    Ok((p[0], p[1]))
}

/// Exact-quadrature period Jacobian at the given `zeta`, together with the
/// localized point approximation of each column for diagnostics.
///
/// With `v = exp(sum zeta_j a_j)`, column `j` is `(oint f base v a_j, -oint
/// g a_j / (base v))`; for well-localized normalized bumps it approximates
/// the spinor values `(f base v, -g / (base v))` at the anchor points.
pub fn period_jacobian(
    data: &WeierstrassData,
    a: usize,
    b: usize,
    base: &Holo,
    bumps: &BumpFamily,
    zeta: &[C64],
    radius: f64,
    opts: &QuadOpts,
) -> Result<(DMatrix<C64>, Vec<[C64; 2]>)> {
    let nb = bumps.bumps.len();
    if zeta.len() != nb {
        return Err(Error::InvalidArgument(format!(
            "zeta has {} entries for {nb} bumps",
            zeta.len()
        )));
    }
    let cols = quad::adaptive_circle_vec(radius, opts, |z| {
        let vals = data.eval_components(z);
        let (f, g) = WeierstrassData::spinor_pair(&vals, a, b);
        let bv = base.eval(z);
        let br = base.eval_recip(z);
        let avs: Vec<C64> = bumps.bumps.iter().map(|ab| ab.eval_at(z)).collect();
        let e: C64 = zeta.iter().zip(&avs).map(|(zj, av)| zj * av).sum();
        let ev = e.exp();
        let er = (-e).exp();
        let mut out = Vec::with_capacity(2 * nb);
        for av in &avs {
            out.push(f * bv * ev * av);
            out.push(-(g * br * er * av));
        }
        out
    })?;
    let jac = DMatrix::<C64>::from_fn(2, nb, |r, j| cols[2 * j + r]);
    let mut approx = Vec::with_capacity(nb);
    for &s in bumps.points.iter() {
        let y = bumps.curve.point(s);
        let vals = data.eval_components(y);
        let (f, g) = WeierstrassData::spinor_pair(&vals, a, b);
        let bv = base.eval(y);
        let br = base.eval_recip(y);
        let e: C64 = zeta
            .iter()
            .zip(&bumps.bumps)
            .map(|(zj, ab)| zj * ab.eval_at(y))
            .sum();
        approx.push([f * bv * e.exp(), -(g * br * (-e).exp())]);
    }
    Ok((jac, approx))
}

/// Minimum-norm solution of `J x = r` for a wide complex matrix.
fn min_norm_step(jac: &DMatrix<C64>, r: &DVector<C64>) -> (DVector<C64>, f64, f64) {
    let svd = jac.clone().svd(true, true);
    let u = svd.u.as_ref().expect("svd with u");
    let vt = svd.v_t.as_ref().expect("svd with v_t");
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let smin = svd
        .singular_values
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    let mut x = DVector::<C64>::zeros(jac.ncols());
    for i in 0..svd.singular_values.len() {
        let s = svd.singular_values[i];
        if s <= 1e-13 * smax {
            continue;
        }
        let ub: C64 = u.column(i).dotc(r);
        let vi = vt.row(i).adjoint();
        for j in 0..jac.ncols() {
            x[j] += vi[j] * ub * C64::new(1.0 / s, 0.0);
        }
    }
    (x, smin, smax)
}

/// Newton solve of `period_map(base * v_zeta) = target` inside the ball.
///
/// Returns the final `zeta`, the iteration count, and the achieved absolute
/// residual. `zeta = 0` is returned untouched (zero iterations) when the
/// target is already met.
fn newton_solve(
    data: &WeierstrassData,
    a: usize,
    b: usize,
    base: &Holo,
    bumps: &BumpFamily,
    radius: f64,
    target: (C64, C64),
    trust: f64,
    tol_abs: f64,
    max_iter: usize,
    opts: &QuadOpts,
) -> Result<(Vec<C64>, usize, f64, f64)> {
    let nb = bumps.bumps.len();
    let mut zeta = vec![C64::new(0.0, 0.0); nb];
    let residual = |zeta: &[C64]| -> Result<(C64, C64)> {
        let v = Holo::product_of(vec![
            base.clone(),
            Holo::Exp(bumps.exponent(zeta)),
        ]);
        let p = period_map(data, a, b, &v, radius, opts)?;
        Ok((p.0 - target.0, p.1 - target.1))
    };
    let norm2 = |r: (C64, C64)| (r.0.norm_sqr() + r.1.norm_sqr()).sqrt();
    let mut r = residual(&zeta)?;
    let mut res = norm2(r);
    if res <= tol_abs {
        return Ok((zeta, 0, res, f64::INFINITY));
    }
    let mut sigma_min_first = 0.0;
    let mut stagnant = 0;
    for it in 1..=max_iter {
        let (jac, _) = period_jacobian(data, a, b, base, bumps, &zeta, radius, opts)?;
        let rv = DVector::from_vec(vec![r.0, r.1]);
        let (step, smin, smax) = min_norm_step(&jac, &rv);
        if it == 1 {
            sigma_min_first = smin;
            if !(smin > 1e-10 * smax.max(1e-300)) {
                return Err(Error::NewtonFailed {
                    iterations: 0,
                    residual: res,
                    reason: "period Jacobian is rank-deficient",
                });
            }
        }
        // Backtrack until the step stays inside the trust region.
        let mut scale = 1.0;
        let mut next = zeta.clone();
        let mut ok = false;
        for _ in 0..7 {
            for j in 0..nb {
                next[j] = zeta[j] - step[j] * C64::new(scale, 0.0);
            }
            if next.iter().all(|z| z.norm() <= trust) {
                ok = true;
                break;
            }
            scale *= 0.5;
        }
        if !ok {
            return Err(Error::NewtonFailed {
                iterations: it,
                residual: res,
                reason: "step left the trust region",
            });
        }
        let r_next = residual(&next)?;
        let res_next = norm2(r_next);
        if res_next > 0.7 * res {
            stagnant += 1;
            if stagnant >= 2 {
                return Err(Error::NewtonFailed {
                    iterations: it,
                    residual: res_next,
                    reason: "residual stagnated",
                });
            }
        } else {
            stagnant = 0;
        }
        zeta = next;
        r = r_next;
        res = res_next;
        if res <= tol_abs {
            return Ok((zeta, it, res, sigma_min_first));
        }
    }
    Err(Error::NewtonFailed {
        iterations: max_iter,
        residual: res,
        reason: "iteration budget exhausted",
    })
}

/// Drives the pair periods of `(a, b)` to the given targets with a spray
/// correction on top of `base`, walking distant targets in substeps.
///
/// The returned step carries `h = base * v_total`. When the target is
/// already met and `base` is the identity, the step is exactly the identity
/// (callers skip pushing it, keeping fixpoints bit-identical).
pub fn solve_pair_periods(
    data: &WeierstrassData,
    a: usize,
    b: usize,
    base: &Holo,
    radius: f64,
    target_f: C64,
    target_g: C64,
    params: &SprayParams,
) -> Result<SprayOutcome> {
    let curve = CircleCurve {
        radius,
        base_angle: 0.0,
    };
    let target = (target_f, target_g);
    let tol_abs = params.newton_tol
        * (1.0 + target.0.norm().max(target.1.norm()));

    // Early identity: nothing to correct.
    let p0 = period_map(data, a, b, base, radius, &params.quad)?;
    let dist0 = ((p0.0 - target.0).norm_sqr() + (p0.1 - target.1).norm_sqr()).sqrt();
    if dist0 <= tol_abs {
        return Ok(SprayOutcome {
            step: crate::weierstrass::LopezRosStep {
                a,
                b,
                h: base.clone(),
            },
            diagnostics: SprayDiagnostics {
                basis_margin: f64::INFINITY,
                bump_residuals: Vec::new(),
                ball_radius: f64::INFINITY,
                sigma_min: 0.0,
                sigma_max: 0.0,
                substeps: 0,
                iterations: 0,
                residual: dist0,
                zeta_max: 0.0,
            },
        });
    }

    // Anchors frozen at the start lose their dominating margin as the
    // accumulated factor reshapes the spinors, and frozen correction
    // directions can push the exponent along an unbounded branch even when
    // bounded solutions exist, so the spray is re-anchored on the current
    // data at every substep.
    let mut k = params.k;
    let work0 = data.appended(crate::weierstrass::LopezRosStep {
        a,
        b,
        h: base.clone(),
    })?;
    let (bumps, margin, k_used) = anchor_spray(&work0, a, b, &curve, k, params)?;
    k = k_used;
    let trust = bumps.trust_radius().min(bumps.overflow_radius());

    // Initial Jacobian scale determines the reachable per-substep move.
    let zeros = vec![C64::new(0.0, 0.0); bumps.bumps.len()];
    let (jac0, _) =
        period_jacobian(&work0, a, b, &Holo::One, &bumps, &zeros, radius, &params.quad)?;
    let svd = jac0.clone().svd(false, false);
    let sigma_max = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let sigma_min = svd
        .singular_values
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    if !(sigma_min > 1e-10 * sigma_max.max(1e-300)) {
        return Err(Error::NewtonFailed {
            iterations: 0,
            residual: dist0,
            reason: "period Jacobian is rank-deficient",
        });
    }

    let step_cap = params.step_fraction * trust * sigma_min;
    let substeps = ((dist0 / step_cap).ceil() as usize).max(1);
    if substeps > params.max_substeps {
        return Err(Error::FluxUnreachable {
            residual: dist0,
            substeps,
        });
    }

    // The exponent polynomial accumulates across substeps: composing
    // exponential factors adds their exponents.
    let check_radii = {
        let (lo, hi) = (data.domain().r_in().max(1e-6 * radius), data.domain().r_out());
        [lo, (lo * radius).sqrt(), radius, (hi * radius).sqrt(), hi]
    };
    let mut e_total = LaurentFunction::zero();
    let mut iterations = 0usize;
    let mut zeta_max: f64 = 0.0;
    let mut residual = dist0;
    let mut margin_min = margin;
    let mut trust_min = trust;
    let mut bumps_s = bumps;
    let mut trust_s = trust;
    for s in 1..=substeps {
        let frac = s as f64 / substeps as f64;
        let tgt = (
            p0.0 + (target.0 - p0.0) * C64::new(frac, 0.0),
            p0.1 + (target.1 - p0.1) * C64::new(frac, 0.0),
        );
        let h_so_far = Holo::product_of(vec![
            base.clone(),
            Holo::Exp(e_total.clone()),
        ]);
        let work = data.appended(crate::weierstrass::LopezRosStep {
            a,
            b,
            h: h_so_far.clone(),
        })?;
        if s > 1 {
            let (bs, ms, k_used) = anchor_spray(&work, a, b, &curve, k, params)?;
            k = k_used;
            bumps_s = bs;
            trust_s = bumps_s.trust_radius().min(bumps_s.overflow_radius());
            margin_min = margin_min.min(ms);
            trust_min = trust_min.min(trust_s);
        }
        let (zeta, iters, res, _s1) = newton_solve(
            &work,
            a,
            b,
            &Holo::One,
            &bumps_s,
            radius,
            tgt,
            trust_s,
            tol_abs,
            params.max_iterations,
            &params.quad,
        )?;
        iterations = iterations.max(iters);
        residual = res;
        for z in &zeta {
            zeta_max = zeta_max.max(z.norm());
        }
        e_total = e_total.add(&bumps_s.exponent(&zeta));
        let mut sup_re: f64 = 0.0;
        for &r in &check_radii {
            for z in crate::domain::circle_nodes(r, 128, 0.17) {
                sup_re = sup_re.max(e_total.eval_at(z).re.abs());
            }
        }
        if sup_re > EXP_RE_BUDGET {
            return Err(Error::NewtonFailed {
                iterations: iters,
                residual: res,
                reason: "accumulated exponent exceeds the floating-point budget",
            });
        }
    }

    let h = Holo::product_of(vec![base.clone(), Holo::Exp(e_total)]);
    Ok(SprayOutcome {
        step: crate::weierstrass::LopezRosStep { a, b, h },
        diagnostics: SprayDiagnostics {
            basis_margin: margin_min,
            bump_residuals: bumps_s.residuals.clone(),
            ball_radius: trust_min,
            sigma_min,
            sigma_max,
            substeps,
            iterations,
            residual,
            zeta_max,
        },
    })
}

/// Selects anchors and builds bumps on the given data, escalating the pair
/// count from `k_start` up to `max_k` when the determinant margin cannot be
/// met. Returns the bumps, the achieved margin, and the `k` that worked.
fn anchor_spray(
    data: &WeierstrassData,
    a: usize,
    b: usize,
    curve: &CircleCurve,
    k_start: usize,
    params: &SprayParams,
) -> Result<(BumpFamily, f64, usize)> {
    let avoid = [
        (data.base_point().arg() / std::f64::consts::TAU).rem_euclid(1.0),
    ];
    let fg = |_d: usize, z: C64| {
        let vals = data.eval_components(z);
        WeierstrassData::spinor_pair(&vals, a, b)
    };
    let mut k = k_start;
    let (points, margin) = loop {
        match select_basis_points(1, fg, curve, k, &avoid, params.margin_tol) {
            Ok(sel) => break sel,
            Err(Error::BasisPointsExhausted { best, margin_tol }) => {
                if 2 * k <= params.max_k {
                    k *= 2;
                } else {
                    return Err(Error::BasisPointsExhausted { best, margin_tol });
                }
            }
            Err(e) => return Err(e),
        }
    };

    // Shrink the bump width if the selected anchors sit closer than the
    // requested tau allows.
    let mut sep = f64::INFINITY;
    for (i, &pa) in points.iter().enumerate() {
        for &pb in points.iter().skip(i + 1) {
            let d = (pa - pb).rem_euclid(1.0);
            sep = sep.min(d.min(1.0 - d));
        }
    }
    let mut p_eff = params.clone();
    if sep.is_finite() {
        p_eff.tau = p_eff.tau.min(0.45 * sep);
    }
    let bumps = build_bumps(curve, &points, data.domain(), &p_eff)?;
    Ok((bumps, margin, k))
}

/// A fitted log-profile for Oka-type factors: approximately 0 on the core
/// region and 1 on the labyrinth walls.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OkaProfile {
    profile: LaurentFunction,
    /// Fit degree.
    pub degree: usize,
    /// Sup-norm residual over the fit samples.
    pub residual: f64,
    /// Sup of the raw profile over the guard circles. By the maximum
    /// principle this bounds the profile on the annulus the guards enclose.
    pub guard_sup: f64,
}

/// Lawson reweighting rounds in the minimax profile fit.
const LAWSON_ITERS: usize = 30;

/// Row weight of the guard circles relative to the fit rows.
const GUARD_WEIGHT: f64 = 0.03;

/// Fits the reusable log-profile `H1` (0 on `k_region`, 1 on the walls of
/// `lab`) in the sup norm.
///
/// A plain least-squares fit leaves large localized errors at the gate
/// edges, where few rows carry the cost; Lawson's iteratively reweighted
/// scheme re-emphasizes the worst-served rows each round and converges
/// toward the minimax fit. Low-weight guard circles at `guard_radii` keep the
/// profile from growing beyond the fitted curves, so exponentiating it stays
/// within floating-point range on the annulus between the guards.
pub fn fit_oka_profile(
    k_region: &AnnularDomain,
    lab: &crate::labyrinth::Labyrinth,
    degree: usize,
    ridge: f64,
    guard_radii: &[f64],
) -> Result<OkaProfile> {
    // Sample every curve beyond the Nyquist rate of the fit degree, or the
    // unsampled harmonics alias freely between nodes.
    let n_circle = (4 * (degree + 1)).max(256);
    let mut nodes = Vec::new();
    let mut targets = Vec::new();
    for r in [k_region.r_in(), k_region.mid_radius(), k_region.r_out()] {
        for z in crate::domain::circle_nodes(r, n_circle, 0.07) {
            nodes.push(z);
            targets.push(C64::new(0.0, 0.0));
        }
    }
    for z in lab.wall_nodes(n_circle, 3) {
        nodes.push(z);
        targets.push(C64::new(1.0, 0.0));
    }
    let guards: Vec<CurveSamples> = guard_radii
        .iter()
        .map(|&r| {
            let g = crate::domain::circle_nodes(r, n_circle.min(256), 0.013);
            let zeros = vec![C64::new(0.0, 0.0); g.len()];
            CurveSamples::with_weight(g, zeros, GUARD_WEIGHT)
        })
        .collect();

    let mut weights = vec![1.0f64; nodes.len()];
    let mut best: Option<(f64, LaurentFunction)> = None;
    for _ in 0..LAWSON_ITERS {
        let mut samples: Vec<CurveSamples> = nodes
            .iter()
            .zip(&targets)
            .zip(&weights)
            .map(|((&z, &t), &w)| CurveSamples::with_weight(vec![z], vec![t], w))
            .collect();
        samples.extend(guards.iter().cloned());
        let fit = funspace::least_squares_fit(&samples, degree, ridge)?;
        let mut sup = 0.0f64;
        let res: Vec<f64> = nodes
            .iter()
            .zip(&targets)
            .map(|(&z, &t)| {
                let e = (fit.function.eval_at(z) - t).norm();
                sup = sup.max(e);
                e
            })
            .collect();
        if best.as_ref().is_none_or(|(b, _)| sup < *b) {
            best = Some((sup, fit.function));
        }
        if sup == 0.0 {
            break;
        }
        // Lawson update: scale each row weight by its residual. The floor
        // and the clamp bound the weight contrast, keeping the reweighted
        // systems well conditioned; without them the iteration oscillates.
        let floor = 0.05 * sup;
        let mut w_sum = 0.0f64;
        for (w, r) in weights.iter_mut().zip(&res) {
            *w *= r + floor;
            w_sum += *w;
        }
        let w_mean = w_sum / weights.len() as f64;
        for w in &mut weights {
            *w = (*w / w_mean).clamp(1e-3, 1e3);
        }
    }
    let (residual, profile) = best.expect("Lawson loop runs at least once");
    let mut guard_sup = 0.0f64;
    for &r in guard_radii {
        for z in crate::domain::circle_nodes(r, n_circle, 0.031) {
            guard_sup = guard_sup.max(profile.eval_at(z).norm());
        }
    }
    Ok(OkaProfile {
        profile,
        degree,
        residual,
        guard_sup,
    })
}

impl OkaProfile {
    /// The Oka-type factor `exp(phi * log(1 + 1/mu) * H1)`.
    ///
    /// `phi = 0` yields the exact identity. Otherwise requires the recorded
    /// residual to fit the budget `r * log(1 + 1/mu) < min(mu/2, log(1 +
    /// 1/mu)/4)`, which makes `|h - 1| < mu` near the 0-region and `|h| >
    /// 1/mu` on the walls.
    pub fn factor(&self, mu: f64, phi: f64) -> Result<Holo> {
        if !(mu > 0.0 && mu < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "mu must lie in (0, 1), got {mu}"
            )));
        }
        if !(0.0..=1.0).contains(&phi) {
            return Err(Error::InvalidArgument(format!(
                "phi must lie in [0, 1], got {phi}"
            )));
        }
        if phi == 0.0 {
            return Ok(Holo::One);
        }
        let s = (1.0 + 1.0 / mu).ln();
        let budget = (mu / 2.0).min(s / 4.0);
        if !(self.residual * s < budget) {
            return Err(Error::DegreeExhausted {
                degree: self.degree,
                achieved: self.residual * s,
                tol: budget,
            });
        }
        let range = phi * s * self.guard_sup;
        if range > EXP_RE_BUDGET {
            return Err(Error::FactorInvalid {
                clause: "representable range",
                detail: format!(
                    "exponent reaches {range:.3e} on the guard circles, budget {EXP_RE_BUDGET:.1}"
                ),
            });
        }
        Ok(Holo::Exp(self.profile.scale(C64::new(phi * s, 0.0))))
    }

    /// The raw fitted profile.
    pub fn profile(&self) -> &LaurentFunction {
        &self.profile
    }
}

/// Validates the two Oka clauses by sampling: `|h - 1| < mu` on the first
/// node set and `|h| > 1/mu` on the second. Returns `(sup |h - 1| on K, min
/// |h| on walls)`.
pub fn validate_oka(
    h: &Holo,
    k_nodes: &[C64],
    wall_nodes: &[C64],
    mu: f64,
) -> Result<(f64, f64)> {
    let one = C64::new(1.0, 0.0);
    let mut sup_k: f64 = 0.0;
    for &z in k_nodes {
        sup_k = sup_k.max((h.eval(z) - one).norm());
    }
    let mut min_w = f64::INFINITY;
    for &z in wall_nodes {
        min_w = min_w.min(h.log_abs(z));
    }
    let min_w = min_w.exp();
    if sup_k >= mu {
        return Err(Error::FactorInvalid {
            clause: "closeness on K",
            detail: format!("sup |h - 1| = {sup_k:.3e} >= mu = {mu:.3e}"),
        });
    }
    if min_w <= 1.0 / mu {
        return Err(Error::FactorInvalid {
            clause: "height on walls",
            detail: format!("min |h| = {min_w:.3e} <= 1/mu = {:.3e}", 1.0 / mu),
        });
    }
    Ok((sup_k, min_w))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::labyrinth::{build_labyrinth, Labyrinth};

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn domain() -> AnnularDomain {
        AnnularDomain::new(0.5, 2.0).unwrap()
    }

    fn catenoid() -> WeierstrassData {
        WeierstrassData::catenoid(domain(), c(1.0, 0.0)).unwrap()
    }

    fn unit_curve() -> CircleCurve {
        CircleCurve {
            radius: 1.0,
            base_angle: 0.0,
        }
    }

    #[test]
    fn basis_margin_matches_hand_determinant() {
        // Catenoid at y1 = 1, y2 = i: values (1, -1) and (-1, -1), so the
        // determinant is -2 and the normalized margin is 1.
        let m = basis_margin((c(1.0, 0.0), c(-1.0, 0.0)), (c(-1.0, 0.0), c(-1.0, 0.0)));
        assert!((m - 1.0).abs() < 1e-12);
        assert!(m > 0.999);
        // Parallel value pairs have no margin.
        assert_eq!(
            basis_margin((c(1.0, 0.0), c(2.0, 0.0)), (c(2.0, 0.0), c(4.0, 0.0))),
            0.0
        );
    }

    #[test]
    fn select_basis_points_covers_catenoid() {
        let cat = catenoid();
        let fg = |_d: usize, z: C64| {
            let vals = cat.eval_components(z);
            WeierstrassData::spinor_pair(&vals, 0, 1)
        };
        let (points, margin) = select_basis_points(1, fg, &unit_curve(), 1, &[0.0], 0.05).unwrap();
        assert_eq!(points.len(), 2);
        assert!(margin > 0.5, "margin {margin}");
    }

    #[test]
    fn select_basis_points_rejects_dependent_pairs() {
        // f and g proportional: every determinant vanishes.
        let fg = |_d: usize, z: C64| (z, z * c(2.0, 0.0));
        let got = select_basis_points(1, fg, &unit_curve(), 2, &[], 0.05);
        assert!(matches!(got, Err(Error::BasisPointsExhausted { .. })));
    }

    #[test]
    fn bumps_are_normalized_and_localized() {
        let p = SprayParams::default();
        let bumps = build_bumps(&unit_curve(), &[0.2, 0.7], &domain(), &p).unwrap();
        for a in &bumps.bumps {
            let integral = funspace::contour_integral(a, 1.0, 2 * p.degree + 8).unwrap();
            assert!((integral - c(1.0, 0.0)).norm() < 1e-10);
        }
        for (j, a) in bumps.bumps.iter().enumerate() {
            // Off-support leakage on the curve stays near the fit residual.
            let mut leak: f64 = 0.0;
            for i in 0..512 {
                let s = i as f64 / 512.0;
                let d = (s - bumps.points[j]).rem_euclid(1.0);
                if d.min(1.0 - d) > 2.0 * p.tau {
                    leak = leak.max(a.eval_at(unit_curve().point(s)).norm());
                }
            }
            let peak = a.eval_at(unit_curve().point(bumps.points[j])).norm();
            assert!(leak < 0.2 * peak, "leak {leak} vs peak {peak}");
        }
        // Overlapping anchors are rejected.
        assert!(build_bumps(&unit_curve(), &[0.2, 0.21], &domain(), &p).is_err());
    }

    #[test]
    fn jacobian_columns_approximate_point_values() {
        // The localization diagnostic: with tau = 0.01 on a thin control
        // annulus, quadrature columns match the spinor point values within
        // 20 percent.
        let cat = catenoid();
        let mut p = SprayParams::default();
        p.tau = 0.01;
        p.degree = 160;
        p.residual_cap = 0.2;
        p.control_weight = 0.0;
        let thin = AnnularDomain::new(0.999, 1.001).unwrap();
        let bumps = build_bumps(&unit_curve(), &[0.25, 0.75], &thin, &p).unwrap();
        let zeros = vec![c(0.0, 0.0); 2];
        let (jac, approx) = period_jacobian(
            &cat,
            0,
            1,
            &Holo::One,
            &bumps,
            &zeros,
            1.0,
            &QuadOpts::default(),
        )
        .unwrap();
        for j in 0..2 {
            for r in 0..2 {
                let got = jac[(r, j)];
                let want = approx[j][r];
                let dev = (got - want).norm() / want.norm();
                assert!(dev < 0.2, "column {j} row {r}: deviation {dev}");
            }
        }
    }

    #[test]
    fn period_map_catenoid_oracle() {
        let cat = catenoid();
        let opts = QuadOpts::default();
        let (pf, pg) = period_map(&cat, 0, 1, &Holo::One, 1.0, &opts).unwrap();
        assert!(pf.norm() < 1e-12 && pg.norm() < 1e-12);
        let h2 = Holo::Laurent(LaurentFunction::constant(c(2.0, 0.0)));
        let (pf, pg) = period_map(&cat, 0, 1, &h2, 1.0, &opts).unwrap();
        assert!(pf.norm() < 1e-12 && pg.norm() < 1e-12);
    }

    #[test]
    fn solve_returns_identity_when_met() {
        let cat = catenoid();
        let params = SprayParams::default();
        let out =
            solve_pair_periods(&cat, 0, 1, &Holo::One, 1.0, c(0.0, 0.0), c(0.0, 0.0), &params)
                .unwrap();
        assert!(out.step.h.is_one());
        assert_eq!(out.diagnostics.iterations, 0);
        assert_eq!(out.diagnostics.substeps, 0);
    }

    #[test]
    fn solve_corrects_oka_period_damage() {
        // A nontrivial exponential factor breaks the pair periods; the spray
        // restores them to the pre-factor values within 1e-9 in at most 10
        // Newton iterations per substep.
        let cat = catenoid();
        let params = SprayParams::default();
        let profile = LaurentFunction::from_coeffs(-1, vec![c(0.3, 0.1), c(0.0, 0.0), c(0.2, 0.0)]);
        let w = Holo::Exp(profile);
        let out = solve_pair_periods(&cat, 0, 1, &w, 1.0, c(0.0, 0.0), c(0.0, 0.0), &params)
            .unwrap();
        assert!(out.diagnostics.iterations <= 10);
        assert!(out.diagnostics.residual < 1e-9);
        let stepped = cat.appended(out.step).unwrap();
        let p = crate::weierstrass::pair_period_targets(&stepped, 0, 1, 1.0, &params.quad)
            .unwrap();
        assert!(p.0.norm() < 1e-9 && p.1.norm() < 1e-9);
        // Conformality survives the shear.
        assert!(stepped.conformality_residual(c(1.1, 0.4)) < 1e-12);
    }

    #[test]
    fn solve_reaches_shifted_target() {
        // Shift the g-period target by 0.1; the achieved periods must match
        // the prescription within 1e-9 (independent quadrature).
        let cat = catenoid();
        let params = SprayParams::wide();
        let target_g = c(0.1, 0.0);
        let out = solve_pair_periods(&cat, 0, 1, &Holo::One, 1.0, c(0.0, 0.0), target_g, &params)
            .unwrap();
        let stepped = cat.appended(out.step).unwrap();
        let p = crate::weierstrass::pair_period_targets(&stepped, 0, 1, 1.0, &params.quad)
            .unwrap();
        assert!(p.0.norm() < 1e-9, "f period {}", p.0.norm());
        assert!((p.1 - target_g).norm() < 1e-9, "g period {}", p.1);
    }

    #[test]
    fn unreachable_target_reports_cleanly() {
        let cat = catenoid();
        let mut params = SprayParams::default();
        params.max_substeps = 4;
        let got = solve_pair_periods(
            &cat,
            0,
            1,
            &Holo::One,
            1.0,
            c(500.0, 0.0),
            c(0.0, 0.0),
            &params,
        );
        assert!(matches!(
            got,
            Err(Error::FluxUnreachable { .. }) | Err(Error::NewtonFailed { .. })
        ));
    }

    #[test]
    fn oka_fit_hits_the_mean_obstruction_floor() {
        // The wall target is the constant 1 on an arc covering most of its
        // circle, while the K rows pin the profile's constant coefficient
        // (the mean over every concentric circle) near zero. A function with
        // one-sided spectral decay cannot hold a nonzero constant on an arc
        // without enormous compensation in the gate, so the minimax fit
        // lands on the balanced compromise near 1/2 regardless of degree.
        let k_region = AnnularDomain::new(0.88, 1.14).unwrap();
        let host = AnnularDomain::new(1.4, 1.8).unwrap();
        let lab = Labyrinth::with_gates(host, vec![1.6], vec![0.0], 0.04, 0.78, 0.018, 0.0)
            .unwrap();
        let profile = fit_oka_profile(&k_region, &lab, 48, 1e-12, &[0.5, 2.0]).unwrap();
        assert!(
            profile.residual > 0.35 && profile.residual < 0.6,
            "residual {}",
            profile.residual
        );
        // The guards keep the profile representable across the host annulus.
        assert!(profile.guard_sup < 10.0, "guard {}", profile.guard_sup);
        // phi = 0 always yields the exact identity.
        assert!(profile.factor(0.3, 0.0).unwrap().is_one());
        // No mu admits this residual: the budget cap is min(mu/(2s), 1/4)
        // weights in residual units, and 1/4 < 0.35.
        for mu in [0.1, 0.3, 0.5, 0.9] {
            let got = profile.factor(mu, 1.0);
            assert!(
                matches!(got, Err(Error::DegreeExhausted { .. })),
                "mu {mu}: {got:?}"
            );
        }
    }

    #[test]
    fn oka_factor_accepts_small_residuals_and_guards_range() {
        // An exactly representable profile passes the budget and yields the
        // advertised exponential factor pointwise.
        let profile = OkaProfile {
            profile: LaurentFunction::from_coeffs(-1, vec![c(0.1, 0.02), c(0.0, 0.0), c(0.2, -0.05)]),
            degree: 1,
            residual: 1e-14,
            guard_sup: 1.2,
        };
        let mu = 0.3f64;
        let s = (1.0 + 1.0 / mu).ln();
        let h = profile.factor(mu, 0.5).unwrap();
        for z in crate::domain::circle_nodes(1.1, 7, 0.3) {
            let expect = (profile.profile.eval_at(z) * c(0.5 * s, 0.0)).exp();
            assert!((h.eval(z) - expect).norm() < 1e-12);
        }
        // A profile that would push the exponent beyond floating-point range
        // on the guarded annulus is rejected with the failing clause.
        let wild = OkaProfile {
            guard_sup: 1e6,
            ..profile
        };
        let got = wild.factor(mu, 1.0);
        match got {
            Err(Error::FactorInvalid { clause, .. }) => {
                assert_eq!(clause, "representable range")
            }
            other => panic!("expected range rejection, got {other:?}"),
        }
    }

    #[test]
    fn validate_oka_checks_both_clauses() {
        // Synthetic factor: exp of a high power that is tiny on the inner
        // nodes and large on a far-out ray, so both clauses hold there.
        let f0 = LaurentFunction::from_coeffs(
            8,
            vec![c(2.2f64.powi(-8), 0.0)],
        );
        let h = Holo::Exp(f0.scale(c(1.4663, 0.0)));
        let k_nodes = crate::domain::circle_nodes(1.0, 64, 0.05);
        let wall_nodes = vec![c(2.6, 0.0), c(2.65, 0.01)];
        let mu = 0.3;
        let (sup_k, min_w) = validate_oka(&h, &k_nodes, &wall_nodes, mu).unwrap();
        assert!(sup_k < mu, "sup on K {sup_k}");
        assert!(min_w > 1.0 / mu, "wall floor {min_w}");

        // The identity factor fails the wall-height clause.
        let got = validate_oka(&Holo::One, &k_nodes, &wall_nodes, mu);
        match got {
            Err(Error::FactorInvalid { clause, .. }) => assert_eq!(clause, "height on walls"),
            other => panic!("expected wall-height failure, got {other:?}"),
        }
    }

}
