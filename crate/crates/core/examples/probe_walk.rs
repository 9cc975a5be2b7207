//! Compare substep walk strategies for the pair-period solve.

use msdl_core::domain::{AnnularDomain, CircleCurve};
use msdl_core::funspace::LaurentFunction;
use msdl_core::holo::Holo;
use msdl_core::quad::QuadOpts;
use msdl_core::spray::{
    build_bumps, period_jacobian, period_map, select_basis_points, BumpFamily, SprayParams,
};
use msdl_core::weierstrass::{LopezRosStep, WeierstrassData};
use msdl_core::C64;
use nalgebra::{DMatrix, DVector};

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn catenoid() -> WeierstrassData {
    let dom = AnnularDomain::new(0.5, 2.0).unwrap();
    WeierstrassData::catenoid(dom, c(1.0, 0.0)).unwrap()
}

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

struct WalkCfg {
    re_anchor: bool,
    k: usize,
    damped_final: bool,
}

fn anchors_and_bumps(
    data: &WeierstrassData,
    curve: &CircleCurve,
    params: &SprayParams,
    k: usize,
    a: usize,
    b: usize,
) -> (Vec<f64>, BumpFamily, f64) {
    let avoid = [(data.base_point().arg() / std::f64::consts::TAU).rem_euclid(1.0)];
    let fg = |_d: usize, z: C64| {
        let vals = data.eval_components(z);
        WeierstrassData::spinor_pair(&vals, a, b)
    };
    let (points, margin) =
        select_basis_points(1, fg, curve, k, &avoid, params.margin_tol).unwrap();
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
    let bumps = build_bumps(curve, &points, data.domain(), &p_eff).unwrap();
    (points, bumps, margin)
}

fn run_walk(cfg: &WalkCfg, params: &SprayParams) {
    let cat = catenoid();
    let profile = LaurentFunction::from_coeffs(-1, vec![c(0.3, 0.1), c(0.0, 0.0), c(0.2, 0.0)]);
    let w = Holo::Exp(profile);
    let radius = 1.0;
    let (a, b) = (0usize, 1usize);
    let opts = QuadOpts::default();
    let curve = CircleCurve {
        radius,
        base_angle: 0.0,
    };
    let target = (c(0.0, 0.0), c(0.0, 0.0));
    let tol_abs = params.newton_tol * (1.0 + target.0.norm().max(target.1.norm()));
    let norm2 = |r: (C64, C64)| (r.0.norm_sqr() + r.1.norm_sqr()).sqrt();

    let p0 = period_map(&cat, a, b, &w, radius, &opts).unwrap();
    let dist0 = ((p0.0 - target.0).norm_sqr() + (p0.1 - target.1).norm_sqr()).sqrt();

    println!(
        "== walk re_anchor={} k={} damped_final={} ==",
        cfg.re_anchor, cfg.k, cfg.damped_final
    );

    let (_, bumps0, _) = anchors_and_bumps(&cat, &curve, params, cfg.k, a, b);
    let trust0 = bumps0.trust_radius().min(bumps0.overflow_radius());
    let zeros0 = vec![c(0.0, 0.0); bumps0.bumps.len()];
    let (jac0, _) = period_jacobian(&cat, a, b, &w, &bumps0, &zeros0, radius, &opts).unwrap();
    let svd = jac0.svd(false, false);
    let smin0 = svd
        .singular_values
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    let step_cap = params.step_fraction * trust0 * smin0;
    let substeps = ((dist0 / step_cap).ceil() as usize).max(1);
    println!("dist0 = {dist0:.4e} trust0 = {trust0:.3e} smin0 = {smin0:.3e} substeps = {substeps}");

    let mut e_total = LaurentFunction::zero();
    let mut total_newton = 0usize;

    if cfg.damped_final {
        // Damped Newton straight at the final target, re-anchoring each step.
        let mut bumps = bumps0;
        let mut trust = trust0;
        for outer in 1..=params.max_substeps {
            let h_so_far = Holo::product_of(vec![w.clone(), Holo::Exp(e_total.clone())]);
            let work = cat
                .appended(LopezRosStep {
                    a,
                    b,
                    h: h_so_far,
                })
                .unwrap();
            let p = period_map(&work, a, b, &Holo::One, radius, &opts).unwrap();
            let r = (p.0 - target.0, p.1 - target.1);
            let res = norm2(r);
            if res <= tol_abs {
                println!("converged after {outer} outer steps, {total_newton} newton evals, res {res:.3e}");
                break;
            }
            if cfg.re_anchor {
                let ab = anchors_and_bumps(&work, &curve, params, cfg.k, a, b);
                bumps = ab.1;
                trust = bumps.trust_radius().min(bumps.overflow_radius());
            }
            let zeros = vec![c(0.0, 0.0); bumps.bumps.len()];
            let (jac, _) =
                period_jacobian(&work, a, b, &Holo::One, &bumps, &zeros, radius, &opts).unwrap();
            let rv = DVector::from_vec(vec![r.0, r.1]);
            let (step, smin, _smax) = min_norm_step(&jac, &rv);
            let step_inf = step.iter().map(|z| z.norm()).fold(0.0f64, f64::max);
            let clip = (params.step_fraction * trust / step_inf).min(1.0);
            let mut zeta = zeros.clone();
            for j in 0..zeta.len() {
                zeta[j] = -step[j] * c(clip, 0.0);
            }
            total_newton += 1;
            e_total = e_total.add(&bumps.exponent(&zeta));
            let mut sup_curve: f64 = 0.0;
            for z in msdl_core::domain::circle_nodes(radius, 128, 0.17) {
                sup_curve = sup_curve.max(e_total.eval_at(z).re.abs());
            }
            if outer % 10 == 0 || clip < 1.0 {
                println!(
                    "outer {outer}: res {res:.3e} clip {clip:.3} smin {smin:.3e} e_curve {sup_curve:.3e}"
                );
            }
            if outer == params.max_substeps {
                println!("** hit outer cap, res {res:.3e}");
            }
        }
    } else {
        let mut bumps = bumps0;
        let mut trust = trust0;
        for s in 1..=substeps {
            let frac = s as f64 / substeps as f64;
            let tgt = (
                p0.0 + (target.0 - p0.0) * c(frac, 0.0),
                p0.1 + (target.1 - p0.1) * c(frac, 0.0),
            );
            let h_so_far = Holo::product_of(vec![w.clone(), Holo::Exp(e_total.clone())]);
            let work = cat
                .appended(LopezRosStep {
                    a,
                    b,
                    h: h_so_far,
                })
                .unwrap();
            if cfg.re_anchor {
                let ab = anchors_and_bumps(&work, &curve, params, cfg.k, a, b);
                bumps = ab.1;
                trust = bumps.trust_radius().min(bumps.overflow_radius());
            }
            let residual = |zeta: &[C64]| -> (C64, C64) {
                let v = Holo::Exp(bumps.exponent(zeta));
                let p = period_map(&work, a, b, &v, radius, &opts).unwrap();
                (p.0 - tgt.0, p.1 - tgt.1)
            };
            let zeros = vec![c(0.0, 0.0); bumps.bumps.len()];
            let mut zeta = zeros.clone();
            let mut r = residual(&zeta);
            let mut res = norm2(r);
            let mut iters = 0;
            let mut fail = true;
            for _it in 1..=params.max_iterations {
                if res <= tol_abs {
                    fail = false;
                    break;
                }
                iters += 1;
                total_newton += 1;
                let (jac, _) =
                    period_jacobian(&work, a, b, &Holo::One, &bumps, &zeta, radius, &opts)
                        .unwrap();
                let rv = DVector::from_vec(vec![r.0, r.1]);
                let (step, _si, _sa) = min_norm_step(&jac, &rv);
                let mut scale = 1.0f64;
                let mut next = zeta.clone();
                for _ in 0..7 {
                    for j in 0..zeta.len() {
                        next[j] = zeta[j] - step[j] * c(scale, 0.0);
                    }
                    if next.iter().all(|z| z.norm() <= trust) {
                        break;
                    }
                    scale *= 0.5;
                }
                let r_next = residual(&next);
                let res_next = norm2(r_next);
                zeta = next;
                r = r_next;
                res = res_next;
            }
            if res <= tol_abs {
                fail = false;
            }
            e_total = e_total.add(&bumps.exponent(&zeta));
            let mut sup_curve: f64 = 0.0;
            for z in msdl_core::domain::circle_nodes(radius, 128, 0.17) {
                sup_curve = sup_curve.max(e_total.eval_at(z).re.abs());
            }
            println!(
                "substep {s}: iters {iters} res {res:.3e} e_curve {sup_curve:.3e}{}",
                if fail { "  ** FAIL" } else { "" }
            );
            if fail {
                break;
            }
        }
    }

    // Final verification.
    let h = Holo::product_of(vec![w.clone(), Holo::Exp(e_total)]);
    let p = period_map(&cat, a, b, &h, radius, &opts).unwrap();
    println!(
        "final periods ({:.3e},{:.3e}) ({:.3e},{:.3e}), total newton evals {total_newton}",
        p.0.re, p.0.im, p.1.re, p.1.im
    );
}

fn main() {
    let params = SprayParams::default();
    run_walk(
        &WalkCfg {
            re_anchor: true,
            k: 1,
            damped_final: false,
        },
        &params,
    );
    run_walk(
        &WalkCfg {
            re_anchor: true,
            k: 2,
            damped_final: false,
        },
        &params,
    );
    run_walk(
        &WalkCfg {
            re_anchor: true,
            k: 1,
            damped_final: true,
        },
        &params,
    );
    run_walk(
        &WalkCfg {
            re_anchor: true,
            k: 2,
            damped_final: true,
        },
        &params,
    );
}
