//! Diagnostic probe: trace the Newton period solve on the damaged catenoid.

use msdl_core::domain::{AnnularDomain, CircleCurve};
use msdl_core::funspace::LaurentFunction;
use msdl_core::holo::Holo;
use msdl_core::quad::QuadOpts;
use msdl_core::spray::{
    build_bumps, period_jacobian, period_map, select_basis_points, SprayParams,
};
use msdl_core::weierstrass::WeierstrassData;
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

fn main() {
    let cat = catenoid();
    let params = SprayParams::default();
    let profile = LaurentFunction::from_coeffs(-1, vec![c(0.3, 0.1), c(0.0, 0.0), c(0.2, 0.0)]);
    let w = Holo::Exp(profile);
    let radius = 1.0;
    let (a, b) = (0usize, 1usize);
    let opts = QuadOpts::default();

    let p0 = period_map(&cat, a, b, &w, radius, &opts).unwrap();
    let target = (c(0.0, 0.0), c(0.0, 0.0));
    let dist0 = ((p0.0 - target.0).norm_sqr() + (p0.1 - target.1).norm_sqr()).sqrt();
    println!("p0 = ({:.6e},{:.6e}) ({:.6e},{:.6e})", p0.0.re, p0.0.im, p0.1.re, p0.1.im);
    println!("dist0 = {dist0:.6e}");

    let curve = CircleCurve { radius, base_angle: 0.0 };
    let avoid = [(cat.base_point().arg() / std::f64::consts::TAU).rem_euclid(1.0)];
    let fg = |_d: usize, z: C64| {
        let vals = cat.eval_components(z);
        WeierstrassData::spinor_pair(&vals, a, b)
    };
    let (points, margin) =
        select_basis_points(1, fg, &curve, params.k, &avoid, params.margin_tol).unwrap();
    println!("points = {points:?} margin = {margin:.4}");

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
    println!("tau_eff = {}", p_eff.tau);

    let bumps = build_bumps(&curve, &points, cat.domain(), &p_eff).unwrap();
    println!("bump residuals = {:?}", bumps.residuals);
    println!("sup_on_curve = {:?}", bumps.sup_on_curve);
    println!("sup_on_control = {:?}", bumps.sup_on_control);
    let trust = bumps.trust_radius().min(bumps.overflow_radius());
    println!(
        "trust_radius = {:.4e} overflow_radius = {:.4e} -> trust = {trust:.4e}",
        bumps.trust_radius(),
        bumps.overflow_radius()
    );

    let zeros = vec![c(0.0, 0.0); bumps.bumps.len()];
    let (jac0, approx) =
        period_jacobian(&cat, a, b, &w, &bumps, &zeros, radius, &opts).unwrap();
    let svd = jac0.clone().svd(false, false);
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let smin = svd.singular_values.iter().cloned().fold(f64::INFINITY, f64::min);
    println!("sigma_min = {smin:.4e} sigma_max = {smax:.4e}");
    println!("jac approx localization:");
    for (j, ap) in approx.iter().enumerate() {
        for r in 0..2 {
            let got = jac0[(r, j)];
            let want = ap[r];
            println!(
                "  col {j} row {r}: jac = ({:.4e},{:.4e}) approx = ({:.4e},{:.4e}) reldev = {:.3}",
                got.re,
                got.im,
                want.re,
                want.im,
                (got - want).norm() / want.norm().max(1e-300)
            );
        }
    }

    let step_cap = params.step_fraction * trust * smin;
    let substeps = ((dist0 / step_cap).ceil() as usize).max(1);
    println!("step_cap = {step_cap:.4e} substeps = {substeps}");

    // Full substep walk mirroring solve_pair_periods, stagnation check off.
    let tol_abs = params.newton_tol * (1.0 + target.0.norm().max(target.1.norm()));
    let norm2 = |r: (C64, C64)| (r.0.norm_sqr() + r.1.norm_sqr()).sqrt();
    let check_radii = {
        let (lo, hi) = (cat.domain().r_in().max(1e-6 * radius), cat.domain().r_out());
        [lo, (lo * radius).sqrt(), radius, (hi * radius).sqrt(), hi]
    };
    let mut e_total = LaurentFunction::zero();
    for s in 1..=substeps {
        let frac = s as f64 / substeps as f64;
        let tgt = (
            p0.0 + (target.0 - p0.0) * c(frac, 0.0),
            p0.1 + (target.1 - p0.1) * c(frac, 0.0),
        );
        let h_so_far = Holo::product_of(vec![w.clone(), Holo::Exp(e_total.clone())]);
        let work = cat
            .appended(msdl_core::weierstrass::LopezRosStep {
                a,
                b,
                h: h_so_far.clone(),
            })
            .unwrap();

        let residual = |zeta: &[C64]| -> (C64, C64) {
            let v = Holo::product_of(vec![Holo::One, Holo::Exp(bumps.exponent(zeta))]);
            let p = period_map(&work, a, b, &v, radius, &opts).unwrap();
            (p.0 - tgt.0, p.1 - tgt.1)
        };
        let mut zeta = zeros.clone();
        let mut r = residual(&zeta);
        let mut res = norm2(r);
        print!("substep {s}: res {res:.3e}");
        let mut iters = 0;
        for _it in 1..=10 {
            if res <= tol_abs {
                break;
            }
            iters += 1;
            let (jac, _) =
                period_jacobian(&work, a, b, &Holo::One, &bumps, &zeta, radius, &opts).unwrap();
            let rv = DVector::from_vec(vec![r.0, r.1]);
            let (step, _smin_it, _smax_it) = min_norm_step(&jac, &rv);
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
            print!(" -> {res_next:.3e}");
            if scale < 1.0 {
                print!("[clip {scale}]");
            }
            zeta = next;
            r = r_next;
            res = res_next;
        }
        e_total = e_total.add(&bumps.exponent(&zeta));
        let mut sup_re: f64 = 0.0;
        let mut sup_curve: f64 = 0.0;
        for &rr in &check_radii {
            for z in msdl_core::domain::circle_nodes(rr, 128, 0.17) {
                let v = e_total.eval_at(z).re.abs();
                sup_re = sup_re.max(v);
                if rr == radius {
                    sup_curve = sup_curve.max(v);
                }
            }
        }
        println!("  [iters {iters}, |e_total| re sup {sup_re:.3e}, on curve {sup_curve:.3e}]");
        if res > tol_abs {
            println!("  ** did not converge at substep {s}, res = {res:.6e}");
        }
    }
}
