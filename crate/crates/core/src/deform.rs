//! Boundary-distance certificates and the distance-increasing stage flow.
//!
//! A stage places a ring labyrinth inside a host annulus where the spinor
//! pair product is bounded below, multiplies the pair by an exponential
//! factor that is tall on the labyrinth walls and close to one on the
//! protected compact, corrects the periods with a spray, and certifies the
//! induced boundary distance from the crossing dichotomy. Distances are
//! cross-checked by a shortest-path estimate on a weighted polar graph.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::domain::{circle_nodes, AnnularDomain, HomologyBasis};
use crate::error::{Error, Result};
use crate::funspace::{self, CurveSamples, LaurentFunction, MomentRow};
use crate::holo::Holo;
use crate::labyrinth::{build_labyrinth, Labyrinth, StarReport};
use crate::quad::{self, QuadOpts};
use crate::spray::{solve_pair_periods, SprayDiagnostics, SprayParams};
use crate::weierstrass::{lopez_ros_step, pair_period_targets, LopezRosStep, WeierstrassData};
use crate::C64;

/// A machine-checkable lower bound for the induced boundary distance
/// across one labyrinth host.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DeformationCertificate {
    /// Distance target the certificate was checked against.
    pub lambda_cap: f64,
    /// Measured minimum of the spinor pair product on the host.
    pub rho: f64,
    /// Measured minimum of `|f|` on the walls (pre-step spinor).
    pub sigma: f64,
    /// Wall-run parameter of the labyrinth.
    pub lambda: f64,
    /// Sup-change budget granted to the step that carries this certificate.
    pub eps0: f64,
    /// Measured minimum of `|h|` on the walls.
    pub h_min_on_omega: f64,
    /// Crossing-dichotomy sampling report.
    pub star: StarReport,
    /// Certified lower bound: `min(theta sqrt(rho/2), lambda sigma h/2)`.
    pub certified_bound: f64,
}

/// Checks every certificate clause for one step against one labyrinth.
///
/// `data` is the pre-step state, so `sigma` is the spinor bound the wall
/// height multiplies; the pair product is step-invariant. Clauses: the
/// labyrinth length must reach `2 lambda_cap sqrt(2) / sqrt(rho)`, the wall
/// height must exceed `sqrt(2) (2 lambda_cap) / (lambda sigma)` (doubled
/// margin), the crossing dichotomy must survive sampling, and the combined
/// bound must reach `lambda_cap`.
pub fn certify_boundary_distance(
    data: &WeierstrassData,
    step: &LopezRosStep,
    lab: &Labyrinth,
    lambda_cap: f64,
    eps0: f64,
    star_trials: usize,
    seed: u64,
) -> Result<DeformationCertificate> {
    let host = lab.host();
    let mut nodes = host.polar_grid(10, 192);
    nodes.extend(lab.wall_nodes(96, 3));
    nodes.extend(lab.gate_nodes(24, 3));
    let rho = data.min_pair_product_on(&nodes, step.a, step.b);
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(Error::CertificateFailed {
            clause: "pair product",
            detail: format!("min |f g| = {rho:.3e} on the host"),
        });
    }

    let walls = lab.wall_nodes(96, 3);
    let mut sigma = f64::INFINITY;
    let mut h_min_log = f64::INFINITY;
    for &z in &walls {
        let vals = data.eval_components(z);
        let (f, _) = WeierstrassData::spinor_pair(&vals, step.a, step.b);
        sigma = sigma.min(f.norm());
        h_min_log = h_min_log.min(step.h.log_abs(z));
    }
    let h_min = if h_min_log > 650.0 {
        f64::INFINITY
    } else {
        h_min_log.exp()
    };
    if !(sigma > 0.0) {
        return Err(Error::CertificateFailed {
            clause: "spinor floor",
            detail: format!("min |f| = {sigma:.3e} on the walls"),
        });
    }

    let star = lab.verify_star(star_trials, seed)?;

    let threshold_req = 2.0 * lambda_cap * std::f64::consts::SQRT_2 / rho.sqrt();
    if lab.analytic_bound() < threshold_req {
        return Err(Error::CertificateFailed {
            clause: "labyrinth length",
            detail: format!(
                "analytic bound {:.6e} below required {threshold_req:.6e}",
                lab.analytic_bound()
            ),
        });
    }

    let h_req = std::f64::consts::SQRT_2 * (2.0 * lambda_cap) / (lab.lambda() * sigma);
    if !(h_min > h_req) {
        return Err(Error::CertificateFailed {
            clause: "wall height",
            detail: format!("min |h| = {h_min:.6e} on walls, required > {h_req:.6e}"),
        });
    }

    let case1 = lab.analytic_bound() * (rho / 2.0).sqrt();
    let case2 = lab.lambda() * sigma * h_min / 2.0;
    let certified_bound = case1.min(case2);
    if certified_bound < lambda_cap {
        return Err(Error::CertificateFailed {
            clause: "certified bound",
            detail: format!("bound {certified_bound:.6e} below target {lambda_cap:.6e}"),
        });
    }

    Ok(DeformationCertificate {
        lambda_cap,
        rho,
        sigma,
        lambda: lab.lambda(),
        eps0,
        h_min_on_omega: h_min,
        star,
        certified_bound,
    })
}

/// Re-checks a claimed certificate against a member's step stack by fresh
/// sampling and returns the recomputed certified bound.
///
/// `step_index` selects the shear step the certificate belongs to; the
/// pre-step state is replayed by truncating the stack. Every claimed floor
/// must be met by the fresh measurement, and the bound recomputed from the
/// claims must reproduce the stored one and reach the target.
pub fn verify_certificate(
    member: &WeierstrassData,
    step_index: usize,
    lab: &Labyrinth,
    cert: &DeformationCertificate,
    seed: u64,
) -> Result<f64> {
    if step_index >= member.steps().len() {
        return Err(Error::InvalidArgument(format!(
            "step index {step_index} out of range ({} steps)",
            member.steps().len()
        )));
    }
    let step = member.steps()[step_index].clone();
    let pre = member.truncated(step_index)?;

    let host = lab.host();
    let mut nodes = host.polar_grid(10, 192);
    nodes.extend(lab.wall_nodes(96, 3));
    nodes.extend(lab.gate_nodes(24, 3));
    let rho_meas = pre.min_pair_product_on(&nodes, step.a, step.b);
    if !(rho_meas >= cert.rho * (1.0 - 1e-12)) {
        return Err(Error::CertificateFailed {
            clause: "pair product",
            detail: format!(
                "claimed floor {:.6e} but measured {rho_meas:.6e}",
                cert.rho
            ),
        });
    }

    let walls = lab.wall_nodes(96, 3);
    let mut sigma_meas = f64::INFINITY;
    let mut h_log_meas = f64::INFINITY;
    for &z in &walls {
        let vals = pre.eval_components(z);
        let (f, _) = WeierstrassData::spinor_pair(&vals, step.a, step.b);
        sigma_meas = sigma_meas.min(f.norm());
        h_log_meas = h_log_meas.min(step.h.log_abs(z));
    }
    if !(sigma_meas >= cert.sigma * (1.0 - 1e-12)) {
        return Err(Error::CertificateFailed {
            clause: "spinor floor",
            detail: format!(
                "claimed floor {:.6e} but measured {sigma_meas:.6e}",
                cert.sigma
            ),
        });
    }
    let h_meas = if h_log_meas > 650.0 {
        f64::INFINITY
    } else {
        h_log_meas.exp()
    };
    if !(h_meas >= cert.h_min_on_omega * (1.0 - 1e-12)) {
        return Err(Error::CertificateFailed {
            clause: "wall height",
            detail: format!(
                "claimed floor {:.6e} but measured {h_meas:.6e}",
                cert.h_min_on_omega
            ),
        });
    }

    let threshold_req = 2.0 * cert.lambda_cap * std::f64::consts::SQRT_2 / cert.rho.sqrt();
    if lab.analytic_bound() < threshold_req {
        return Err(Error::CertificateFailed {
            clause: "labyrinth length",
            detail: format!(
                "analytic bound {:.6e} below required {threshold_req:.6e}",
                lab.analytic_bound()
            ),
        });
    }
    let h_req =
        std::f64::consts::SQRT_2 * (2.0 * cert.lambda_cap) / (lab.lambda() * cert.sigma);
    if !(cert.h_min_on_omega > h_req) {
        return Err(Error::CertificateFailed {
            clause: "wall height",
            detail: format!(
                "claimed height {:.6e} does not exceed required {h_req:.6e}",
                cert.h_min_on_omega
            ),
        });
    }
    lab.verify_star(cert.star.trials.max(1), seed)?;

    let case1 = lab.analytic_bound() * (cert.rho / 2.0).sqrt();
    let case2 = lab.lambda() * cert.sigma * cert.h_min_on_omega / 2.0;
    let bound = case1.min(case2);
    if (bound - cert.certified_bound).abs() > 1e-9 * (1.0 + bound.abs()) {
        return Err(Error::CertificateFailed {
            clause: "certified bound",
            detail: format!(
                "stored bound {:.12e} disagrees with recomputed {bound:.12e}",
                cert.certified_bound
            ),
        });
    }
    if bound < cert.lambda_cap {
        return Err(Error::CertificateFailed {
            clause: "certified bound",
            detail: format!("bound {bound:.6e} below target {:.6e}", cert.lambda_cap),
        });
    }
    Ok(bound)
}

/// Shortest-path estimate of the induced distance from the base point to
/// the domain boundary on a weighted polar graph.
///
/// Nodes are a geometric-radius polar grid with 8-neighbor edges; each edge
/// costs the induced speed at its midpoint times its Euclidean length. The
/// estimate upper-bounds the true induced distance up to discretization.
pub fn estimate_distance(data: &WeierstrassData, nr: usize, nt: usize) -> Result<f64> {
    if nr < 2 || nt < 8 {
        return Err(Error::InvalidArgument(format!(
            "grid {nr}x{nt} too coarse for a distance estimate"
        )));
    }
    let d = data.domain();
    let r0 = if d.is_disc() {
        d.r_out() * 1e-3
    } else {
        d.r_in()
    };
    let r1 = d.r_out();
    let radii: Vec<f64> = (0..nr)
        .map(|i| r0 * (r1 / r0).powf(i as f64 / (nr - 1) as f64))
        .collect();
    let node = |i: usize, j: usize| {
        C64::from_polar(
            radii[i],
            std::f64::consts::TAU * j as f64 / nt as f64,
        )
    };
    let idx = |i: usize, j: usize| i * nt + j;

    // Snap the source to the nearest grid node.
    let x0 = data.base_point();
    let (mut si, mut sj, mut best) = (0usize, 0usize, f64::INFINITY);
    for i in 0..nr {
        for j in 0..nt {
            let dd = (node(i, j) - x0).norm();
            if dd < best {
                best = dd;
                si = i;
                sj = j;
            }
        }
    }

    // Midpoint speeds cached per owner node and canonical direction:
    // 0 radial, 1 angular, 2 diagonal up-ccw, 3 diagonal up-cw.
    let mut cache = vec![f64::NAN; nr * nt * 4];
    let mut dist = vec![f64::INFINITY; nr * nt];
    let mut heap: BinaryHeap<Reverse<(u64, u32)>> = BinaryHeap::new();
    dist[idx(si, sj)] = 0.0;
    heap.push(Reverse((0u64, idx(si, sj) as u32)));
    let offsets: [(i64, i64, usize); 8] = [
        (1, 0, 0),
        (-1, 0, 0),
        (0, 1, 1),
        (0, -1, 1),
        (1, 1, 2),
        (-1, -1, 2),
        (1, -1, 3),
        (-1, 1, 3),
    ];
    while let Some(Reverse((bits, u))) = heap.pop() {
        let u = u as usize;
        if bits != dist[u].to_bits() {
            continue;
        }
        let (i, j) = (u / nt, u % nt);
        for &(di, dj, dir) in &offsets {
            let ni = i as i64 + di;
            if ni < 0 || ni >= nr as i64 {
                continue;
            }
            let ni = ni as usize;
            let nj = ((j as i64 + dj).rem_euclid(nt as i64)) as usize;
            // The owner of the cached weight is the endpoint with the
            // lower radius index (and for angular edges, the lower angle).
            let (oi, oj) = if di >= 0 && !(di == 0 && dj < 0) {
                (i, j)
            } else {
                (ni, nj)
            };
            let slot = idx(oi, oj) * 4 + dir;
            let w = if cache[slot].is_nan() {
                let za = node(i, j);
                let zb = node(ni, nj);
                let mid = (za + zb) * C64::new(0.5, 0.0);
                let w = data.speed(mid) * (za - zb).norm();
                cache[slot] = w;
                w
            } else {
                cache[slot]
            };
            let v = idx(ni, nj);
            let cand = dist[u] + w;
            if cand < dist[v] {
                dist[v] = cand;
                heap.push(Reverse((cand.to_bits(), v as u32)));
            }
        }
    }

    let mut out = f64::INFINITY;
    for j in 0..nt {
        out = out.min(dist[idx(0, j)]);
        out = out.min(dist[idx(nr - 1, j)]);
    }
    Ok(out)
}

/// Sup over a polar grid on `region` of the immersion change between two
/// step stacks sharing base point and domain.
///
/// Both immersions are integrated once per spoke along a shared canonical
/// path (radial to the transfer radius, arc, radial), so the cost is one
/// pass over the grid.
pub fn sup_immersion_change(
    before: &WeierstrassData,
    after: &WeierstrassData,
    region: &AnnularDomain,
    nr: usize,
    nt: usize,
    tol: f64,
) -> Result<f64> {
    if before.n_components() != after.n_components() {
        return Err(Error::InvalidArgument(
            "immersion comparison needs equal dimensions".into(),
        ));
    }
    let n = before.n_components();
    let x0 = before.base_point();
    let r0 = x0.norm();
    let t0 = x0.arg();
    let rt = if region.contains(x0) {
        r0
    } else {
        region.mid_radius()
    };
    let combined = |z: C64| -> Vec<C64> {
        let mut v = before.eval_components(z);
        v.extend(after.eval_components(z));
        v
    };
    // Radial transfer from the base point to the transfer radius.
    let transfer = if (rt - r0).abs() > 1e-15 {
        quad::segment_integral(
            C64::from_polar(r0, t0),
            C64::from_polar(rt, t0),
            tol,
            combined,
        )
    } else {
        vec![C64::new(0.0, 0.0); 2 * n]
    };

    let lr0 = region.r_in().max(1e-12).ln();
    let lr1 = region.r_out().ln();
    let radii: Vec<f64> = (0..nr)
        .map(|i| (lr0 + (lr1 - lr0) * (i as f64 + 0.5) / nr as f64).exp())
        .collect();
    let mut worst: f64 = 0.0;
    for jt in 0..nt {
        let t1 = std::f64::consts::TAU * (jt as f64 + 0.25) / nt as f64;
        let arc = quad::arc_integral(rt, t0, t1, tol, combined);
        let dir = C64::from_polar(1.0, t1);
        // Cumulative radial sums outward and inward from the transfer radius.
        let mut acc_vals: Vec<Vec<C64>> = vec![Vec::new(); nr];
        let mut order: Vec<usize> = (0..nr).collect();
        order.sort_by(|&p, &q| radii[p].partial_cmp(&radii[q]).unwrap());
        let below: Vec<usize> = order
            .iter()
            .rev()
            .cloned()
            .filter(|&i| radii[i] <= rt)
            .collect();
        let above: Vec<usize> = order.iter().cloned().filter(|&i| radii[i] > rt).collect();
        for group in [below, above] {
            let mut acc = vec![C64::new(0.0, 0.0); 2 * n];
            let mut prev = rt;
            for &i in &group {
                let seg =
                    quad::segment_integral(dir * prev, dir * radii[i], tol, combined);
                for (s, v) in acc.iter_mut().zip(&seg) {
                    *s += v;
                }
                acc_vals[i] = acc.clone();
                prev = radii[i];
            }
        }
        for ir in 0..nr {
            let mut d2 = 0.0;
            for j in 0..n {
                let tot_before = transfer[j] + arc[j] + acc_vals[ir][j];
                let tot_after = transfer[n + j] + arc[n + j] + acc_vals[ir][n + j];
                let delta = tot_after.re - tot_before.re;
                d2 += delta * delta;
            }
            worst = worst.max(d2.sqrt());
        }
    }
    Ok(worst)
}

/// Builds a labyrinth meeting a length threshold with an automatically
/// feasible wall-run parameter (`0.45` of the wall pitch).
pub fn fit_labyrinth(host: &AnnularDomain, threshold: f64, beta: f64) -> Result<Labyrinth> {
    let s = host.r_in();
    let width = host.r_out() - s;
    let per_ring = (std::f64::consts::PI - 2.0 * beta) * s;
    if !(per_ring > 0.0 && width > 0.0) {
        return Err(Error::InfeasibleLabyrinth(
            "degenerate host for labyrinth".into(),
        ));
    }
    let n = 1 + (threshold / per_ring).ceil() as usize;
    let lambda = 0.45 * width / (2 * n + 1) as f64;
    build_labyrinth(host, threshold, lambda, beta)
}

/// Tuning for one distance-increasing side call.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StageParams {
    /// Distance target certified at gated members.
    pub lambda_cap: f64,
    /// Sup-change budget on the protected compact for this call.
    pub eps: f64,
    /// Gate half-angle of the labyrinths.
    pub beta: f64,
    /// Crossing-dichotomy sampling trials per certificate.
    pub star_trials: usize,
    /// Seed for the dichotomy sampling.
    pub seed: u64,
    /// Laurent degree of the wall profile fit.
    pub oka_degree: usize,
    /// Ridge of the wall profile fit.
    pub oka_ridge: f64,
    /// Row weight of the protected-compact samples in the profile fit.
    pub k_weight: f64,
    /// Row weight of the far quiet circles in the profile fit.
    pub quiet_weight: f64,
    /// Row weight of the per-member period-neutrality functionals.
    pub moment_weight: f64,
    /// Pair-product floor relative to the squared component sup.
    pub psi_floor_rel: f64,
    /// Spray controls for the period correction.
    pub spray: SprayParams,
    /// Quadrature controls.
    pub quad: QuadOpts,
}

impl Default for StageParams {
    fn default() -> Self {
        let mut spray = SprayParams::default();
        spray.tau = 0.08;
        spray.degree = 64;
        spray.residual_cap = 0.45;
        spray.control_weight = 0.25;
        Self {
            lambda_cap: 5.0,
            eps: 0.05,
            beta: 0.1,
            star_trials: 200,
            seed: 17,
            oka_degree: 200,
            oka_ridge: 1e-12,
            k_weight: 4.0,
            quiet_weight: 0.25,
            moment_weight: 150.0,
            psi_floor_rel: 1e-9,
            spray,
            quad: QuadOpts::default(),
        }
    }
}

/// Per-member outcome of a side call.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PointRecord {
    /// Member index in the family.
    pub member: usize,
    /// Whether the member was pinned (zero gate weight).
    pub fixed: bool,
    /// Gate weight used.
    pub phi: f64,
    /// Spinor pair the step acted on.
    pub pair: Option<(usize, usize)>,
    /// Measured sup-change of the immersion on the protected compact.
    pub sup_change_on_k: f64,
    /// Largest flux component drift across the step.
    pub flux_drift: f64,
    /// Largest conformality residual after the step.
    pub conformality: f64,
    /// Measured `sup |h - 1|` on protected-compact samples.
    pub oka_sup_k: f64,
    /// Measured `min |h|` on the wall samples.
    pub h_min_on_walls: f64,
    /// Period-correction diagnostics.
    pub spray: Option<SprayDiagnostics>,
    /// Index into the member's step stack of the step added here.
    pub step_index: Option<usize>,
    /// Distance certificate (gated members only).
    pub certificate: Option<DeformationCertificate>,
}

impl PointRecord {
    fn pinned(member: usize, phi: f64) -> Self {
        Self {
            member,
            fixed: phi == 0.0,
            phi,
            pair: None,
            sup_change_on_k: 0.0,
            flux_drift: 0.0,
            conformality: 0.0,
            oka_sup_k: 0.0,
            h_min_on_walls: 1.0,
            spray: None,
            step_index: None,
            certificate: None,
        }
    }
}

/// Shared geometry of one pair-cover element.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ElementReport {
    /// Spinor pair of the element.
    pub pair: (usize, usize),
    /// Member indices the element covers.
    pub members: Vec<usize>,
    /// Host annulus bounds.
    pub host_r_in: f64,
    /// Host annulus bounds.
    pub host_r_out: f64,
    /// Pair-product floor measured on the host.
    pub rho: f64,
    /// Ring count of the labyrinth.
    pub n_rings: usize,
    /// Length threshold the labyrinth was built for.
    pub theta: f64,
    /// Wall-run parameter.
    pub lambda: f64,
    /// Wall profile fit degree.
    pub oka_degree: usize,
    /// Sup of the fitted profile over protected-compact validation nodes.
    pub oka_residual_on_k: f64,
    /// Minimum real part of the profile on wall validation nodes.
    pub profile_floor_on_walls: f64,
    /// Log-scale applied to the profile for fully gated members.
    pub s_base: f64,
}

/// Result of one side call: the updated family plus diagnostics.
#[derive(Clone, Debug)]
pub struct SideOutcome {
    /// Updated members (pinned members are returned untouched).
    pub family: Vec<WeierstrassData>,
    /// Per-member records, indexed like the family.
    pub records: Vec<PointRecord>,
    /// Per-element geometry reports.
    pub elements: Vec<ElementReport>,
}

/// Greedy pair cover: repeatedly picks the spinor pair whose product floor
/// covers the most remaining members.
fn pair_cover(
    family: &[WeierstrassData],
    active: &[usize],
    probe: &[C64],
    floor: f64,
) -> Result<Vec<(usize, usize, Vec<usize>)>> {
    let n = family[active[0]].n_components();
    let mut remaining: Vec<usize> = active.to_vec();
    let mut out = Vec::new();
    while !remaining.is_empty() {
        let mut best: Option<(usize, usize, Vec<usize>, f64)> = None;
        let mut best_anywhere: f64 = 0.0;
        for a in 0..n {
            for b in (a + 1)..n {
                let mut covered = Vec::new();
                let mut min_cov = f64::INFINITY;
                for &d in &remaining {
                    let score = family[d].min_pair_product_on(probe, a, b);
                    best_anywhere = best_anywhere.max(score);
                    if score >= floor {
                        covered.push(d);
                        min_cov = min_cov.min(score);
                    }
                }
                let better = match &best {
                    None => true,
                    Some((_, _, c, m)) => {
                        covered.len() > c.len() || (covered.len() == c.len() && min_cov > *m)
                    }
                };
                if better && !covered.is_empty() {
                    best = Some((a, b, covered, min_cov));
                }
            }
        }
        match best {
            Some((a, b, covered, _)) => {
                remaining.retain(|d| !covered.contains(d));
                out.push((a, b, covered));
            }
            None => {
                return Err(Error::PairExhausted {
                    best: best_anywhere,
                    margin_tol: floor,
                })
            }
        }
    }
    Ok(out)
}

/// Scans the search band for the radius maximizing the pair-product floor,
/// then thickens symmetrically while the floor holds.
fn search_host(
    family: &[WeierstrassData],
    members: &[usize],
    a: usize,
    b: usize,
    search: &AnnularDomain,
) -> Result<(AnnularDomain, f64)> {
    let lg0 = search.r_in().ln();
    let lg1 = search.r_out().ln();
    let w = lg1 - lg0;
    let pad = 0.02 * w;
    let q = |r: f64| -> f64 {
        let nodes = circle_nodes(r, 96, 0.013);
        members
            .iter()
            .map(|&d| family[d].min_pair_product_on(&nodes, a, b))
            .fold(f64::INFINITY, f64::min)
    };
    let n_scan = 40;
    let mut best = (0.0f64, 0.0f64);
    for i in 0..n_scan {
        let lg = lg0 + pad + (w - 2.0 * pad) * i as f64 / (n_scan - 1) as f64;
        let r = lg.exp();
        let v = q(r);
        if v > best.1 {
            best = (r, v);
        }
    }
    let (r_star, q_star) = best;
    if !(q_star > 0.0) {
        return Err(Error::Geometry(format!(
            "no usable host radius in [{:.4}, {:.4}]",
            search.r_in(),
            search.r_out()
        )));
    }
    let dlg = 0.012 * w;
    let max_half = 0.085 * w;
    let mut half = dlg;
    while half + dlg <= max_half {
        let cand = half + dlg;
        let lo = r_star * (-cand).exp();
        let hi = r_star * cand.exp();
        if lo.ln() < lg0 + pad / 2.0 || hi.ln() > lg1 - pad / 2.0 {
            break;
        }
        if q(lo) >= 0.55 * q_star && q(hi) >= 0.55 * q_star {
            half = cand;
        } else {
            break;
        }
    }
    let host = AnnularDomain::new(r_star * (-half).exp(), r_star * half.exp())?;
    let grid = host.polar_grid(8, 192);
    let rho = members
        .iter()
        .map(|&d| family[d].min_pair_product_on(&grid, a, b))
        .fold(f64::INFINITY, f64::min);
    Ok((host, rho))
}

/// Fits the wall profile: 0 on the protected compact, 1 on the walls,
/// quiet elsewhere, with per-member period-neutrality functionals.
///
/// Returns the profile, its sup over protected-compact validation nodes,
/// and its real-part floor over wall validation nodes.
#[allow(clippy::too_many_arguments)]
fn fit_stage_profile(
    family: &[WeierstrassData],
    members: &[usize],
    a: usize,
    b: usize,
    k_region: &AnnularDomain,
    lab: &Labyrinth,
    host: &AnnularDomain,
    r_q: f64,
    params: &StageParams,
) -> Result<(LaurentFunction, f64, f64)> {
    let deg = params.oka_degree;
    let cols = 2 * deg + 1;
    let domain = family[members[0]].domain();

    let mut samples = Vec::new();
    // Protected compact: several circles, high weight, target 0.
    let klg0 = k_region.r_in().max(1e-12).ln();
    let klg1 = k_region.r_out().ln();
    for i in 0..4 {
        let r = (klg0 + (klg1 - klg0) * i as f64 / 3.0).exp();
        let nodes = circle_nodes(r, 256, 0.07);
        let zeros = vec![C64::new(0.0, 0.0); nodes.len()];
        samples.push(CurveSamples::with_weight(nodes, zeros, params.k_weight));
    }
    // Walls: target 1.
    let wall = lab.wall_nodes(128, 2);
    let ones = vec![C64::new(1.0, 0.0); wall.len()];
    samples.push(CurveSamples::new(wall, ones));
    // Quiet circles away from the exclusion zone around compact and host.
    let ex_lo = k_region.r_in().min(host.r_in()) / 1.07;
    let ex_hi = k_region.r_out().max(host.r_out()) * 1.07;
    let dlg0 = (domain.r_in() * 1.02).max(1e-12).ln();
    let dlg1 = (domain.r_out() * 0.98).ln();
    for i in 0..10 {
        let r = (dlg0 + (dlg1 - dlg0) * i as f64 / 9.0).exp();
        if r > ex_lo && r < ex_hi {
            continue;
        }
        let nodes = circle_nodes(r, 96, 0.21);
        let zeros = vec![C64::new(0.0, 0.0); nodes.len()];
        samples.push(CurveSamples::with_weight(nodes, zeros, params.quiet_weight));
    }

    // Period-neutrality functionals: oint f_d H dz = 0 = oint g_d H dz on
    // the quadrature circle, one pair of rows per member, scaled to unit
    // leading size so the weight is comparable across members.
    let n_fft = 2048usize;
    let fft_nodes = circle_nodes(r_q, n_fft, 0.0);
    let two_pi_i = C64::new(0.0, std::f64::consts::TAU);
    let mut moments = Vec::new();
    for &d in members {
        let mut fv = Vec::with_capacity(n_fft);
        let mut gv = Vec::with_capacity(n_fft);
        for &z in &fft_nodes {
            let vals = family[d].eval_components(z);
            let (f, g) = WeierstrassData::spinor_pair(&vals, a, b);
            fv.push(f);
            gv.push(g);
        }
        for values in [fv, gv] {
            let hat = funspace::coeffs_from_circle(r_q, &values, -1 - deg as i64, deg as i64 - 1);
            // Exponent k of the profile couples to coefficient -1-k.
            let mut coeffs = vec![C64::new(0.0, 0.0); cols];
            for (j, c) in coeffs.iter_mut().enumerate() {
                let k = j as i64 - deg as i64;
                let idx = (deg as i64 - k) as usize;
                *c = two_pi_i * hat[idx];
            }
            // Normalize by the largest entry so weights are scale-free.
            let m = coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
            if m > 0.0 {
                for c in coeffs.iter_mut() {
                    *c /= m;
                }
                moments.push(MomentRow {
                    coeffs,
                    target: C64::new(0.0, 0.0),
                    weight: params.moment_weight,
                });
            }
        }
    }

    let fit = funspace::least_squares_fit_ext(&samples, &moments, deg, params.oka_ridge)?;

    // Independent validation on shifted nodes.
    let mut resid_k: f64 = 0.0;
    for i in 0..5 {
        let r = (klg0 + (klg1 - klg0) * (i as f64 + 0.31) / 5.0).exp();
        for z in circle_nodes(r, 192, 0.41) {
            resid_k = resid_k.max(fit.function.eval_at(z).norm());
        }
    }
    let mut m_wall = f64::INFINITY;
    for z in lab.wall_nodes(96, 3) {
        m_wall = m_wall.min(fit.function.eval_at(z).re);
    }
    if !(m_wall > 0.6) {
        return Err(Error::FactorInvalid {
            clause: "wall profile floor",
            detail: format!(
                "profile real part dips to {m_wall:.3e} on walls (degree {deg})"
            ),
        });
    }
    Ok((fit.function, resid_k, m_wall))
}

/// Runs one distance-increasing side call over a family.
///
/// Members with zero gate weight are returned untouched (bit-identical).
/// Every other member receives one shear step per cover element it belongs
/// to: an exponential wall factor scaled by its gate weight, times a spray
/// correction pinning the pair periods to their pre-step values. Fully
/// gated members also receive a distance certificate.
pub fn increase_distance(
    family: &[WeierstrassData],
    phi: &[f64],
    k_region: &AnnularDomain,
    search: &AnnularDomain,
    params: &StageParams,
) -> Result<SideOutcome> {
    if family.is_empty() {
        return Err(Error::InvalidArgument("empty family".into()));
    }
    if phi.len() != family.len() {
        return Err(Error::InvalidArgument(format!(
            "{} gate weights for {} members",
            phi.len(),
            family.len()
        )));
    }
    for &p in phi {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidArgument(format!(
                "gate weight {p} outside [0, 1]"
            )));
        }
    }
    let domain = family[0].domain();
    for m in family.iter().skip(1) {
        if m.domain() != domain {
            return Err(Error::InvalidArgument(
                "family members must share a domain".into(),
            ));
        }
    }
    let outer_side = search.r_in() >= k_region.r_out();
    let inner_side = search.r_out() <= k_region.r_in();
    if !(outer_side || inner_side) {
        return Err(Error::Geometry(
            "search band must be disjoint from the protected compact".into(),
        ));
    }
    if !domain.contains_annulus(search) || !domain.contains_annulus(k_region) {
        return Err(Error::Geometry(
            "search band and compact must lie inside the domain".into(),
        ));
    }

    let mut records: Vec<PointRecord> = (0..family.len())
        .map(|d| PointRecord::pinned(d, phi[d]))
        .collect();
    let mut new_family: Vec<WeierstrassData> = family.to_vec();
    let active: Vec<usize> = (0..family.len()).filter(|&d| phi[d] > 0.0).collect();
    if active.is_empty() {
        return Ok(SideOutcome {
            family: new_family,
            records,
            elements: Vec::new(),
        });
    }

    // Pair cover over the active members.
    let probe = search.polar_grid(8, 96);
    let mut sup: f64 = 0.0;
    for &d in &active {
        for &z in &probe {
            for v in family[d].eval_components(z) {
                sup = sup.max(v.norm());
            }
        }
    }
    let floor = params.psi_floor_rel * sup * sup;
    let cover = pair_cover(family, &active, &probe, floor)?;
    let ell = cover.len();
    let eps_element = params.eps / ell as f64;

    let r_q = k_region.mid_radius();
    let k_check = k_region.validation_grid(6, 128);
    let mut elements = Vec::new();

    for (a, b, members) in cover {
        let (host, rho) = search_host(&new_family, &members, a, b, search)?;
        let threshold = 2.0 * params.lambda_cap * std::f64::consts::SQRT_2 / rho.sqrt() * 1.02;
        let lab = fit_labyrinth(&host, threshold, params.beta)?;

        let walls_meas = lab.wall_nodes(96, 3);
        let gated: Vec<usize> = members
            .iter()
            .cloned()
            .filter(|&d| phi[d] >= 1.0 - 1e-9)
            .collect();
        let sigma_pool: &[usize] = if gated.is_empty() { &members } else { &gated };
        let mut sigma_min = f64::INFINITY;
        for &d in sigma_pool {
            for &z in &walls_meas {
                let vals = new_family[d].eval_components(z);
                let (f, _) = WeierstrassData::spinor_pair(&vals, a, b);
                sigma_min = sigma_min.min(f.norm());
            }
        }
        if !(sigma_min > 0.0) {
            return Err(Error::CertificateFailed {
                clause: "spinor floor",
                detail: format!("min |f| = {sigma_min:.3e} on prospective walls"),
            });
        }

        let (profile, resid_k, m_wall) = fit_stage_profile(
            &new_family,
            &members,
            a,
            b,
            k_region,
            &lab,
            &host,
            r_q,
            params,
        )?;
        let h_req =
            std::f64::consts::SQRT_2 * (2.0 * params.lambda_cap) / (lab.lambda() * sigma_min);
        let s_base = (2.6 * h_req).ln() / m_wall;
        if !(s_base < 300.0) {
            return Err(Error::CertificateFailed {
                clause: "wall height scale",
                detail: format!("required log-height {s_base:.2e} is not representable"),
            });
        }
        if s_base * resid_k > 0.5 {
            return Err(Error::FactorInvalid {
                clause: "closeness on K",
                detail: format!(
                    "profile leakage {resid_k:.3e} at scale {s_base:.3} breaks the compact budget"
                ),
            });
        }

        for &d in &members {
            let data = new_family[d].clone();
            let scale = phi[d] * s_base;
            let w = Holo::Exp(profile.scale(C64::new(scale, 0.0)));
            let p_pre = pair_period_targets(&data, a, b, r_q, &params.quad)?;
            let out = solve_pair_periods(&data, a, b, &w, r_q, p_pre.0, p_pre.1, &params.spray)?;

            let mut oka_sup_k: f64 = 0.0;
            for &z in &k_check {
                oka_sup_k = oka_sup_k.max((out.step.h.eval(z) - C64::new(1.0, 0.0)).norm());
            }
            let mut h_min_walls = f64::INFINITY;
            for &z in &walls_meas {
                h_min_walls = h_min_walls.min(out.step.h.log_abs(z));
            }
            let h_min_walls = if h_min_walls > 650.0 {
                f64::INFINITY
            } else {
                h_min_walls.exp()
            };

            let certificate = if phi[d] >= 1.0 - 1e-9 {
                Some(certify_boundary_distance(
                    &data,
                    &out.step,
                    &lab,
                    params.lambda_cap,
                    eps_element,
                    params.star_trials,
                    params.seed ^ (d as u64).wrapping_mul(0x9e37_79b9),
                )?)
            } else {
                None
            };

            let basis = HomologyBasis::for_domain(data.domain(), data.base_point())?;
            let flux_pre = data.flux_on(r_q, &params.quad)?;
            let stepped =
                lopez_ros_step(&data, a, b, out.step.h.clone(), &basis, &params.quad, 1e-8)?;
            let flux_post = stepped.flux_on(r_q, &params.quad)?;
            let flux_drift = flux_pre
                .iter()
                .zip(&flux_post)
                .map(|(x, y)| (x - y).abs())
                .fold(0.0, f64::max);
            let conformality =
                stepped.max_conformality_residual(&domain.validation_grid(8, 64));
            let sup_change =
                sup_immersion_change(&data, &stepped, k_region, 12, 40, 1e-9)?;
            if sup_change > eps_element {
                return Err(Error::CertificateFailed {
                    clause: "sup change on K",
                    detail: format!(
                        "member {d} moved {sup_change:.3e} on the compact, budget {eps_element:.3e}"
                    ),
                });
            }

            records[d] = PointRecord {
                member: d,
                fixed: false,
                phi: phi[d],
                pair: Some((a, b)),
                sup_change_on_k: sup_change,
                flux_drift,
                conformality,
                oka_sup_k,
                h_min_on_walls: h_min_walls,
                spray: Some(out.diagnostics.clone()),
                step_index: Some(stepped.steps().len() - 1),
                certificate,
            };
            new_family[d] = stepped;
        }

        elements.push(ElementReport {
            pair: (a, b),
            members: members.clone(),
            host_r_in: host.r_in(),
            host_r_out: host.r_out(),
            rho,
            n_rings: lab.n_rings(),
            theta: threshold,
            lambda: lab.lambda(),
            oka_degree: params.oka_degree,
            oka_residual_on_k: resid_k,
            profile_floor_on_walls: m_wall,
            s_base,
        });
    }

    Ok(SideOutcome {
        family: new_family,
        records,
        elements,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn domain() -> AnnularDomain {
        AnnularDomain::new(0.5, 2.0).unwrap()
    }

    fn catenoid() -> WeierstrassData {
        WeierstrassData::catenoid(domain(), c(1.0, 0.0)).unwrap()
    }

    #[test]
    fn flat_distance_matches_geodesic() {
        // Flat datum: unit speed everywhere, so the boundary distance from
        // |z| = 1 is exactly 0.5 (radially inward).
        let flat = WeierstrassData::flat_plane(domain(), c(1.0, 0.0)).unwrap();
        let est = estimate_distance(&flat, 33, 64).unwrap();
        assert!((est - 0.5).abs() < 0.025, "estimate {est}");
        // Refinement must not increase the estimate beyond tolerance.
        let fine = estimate_distance(&flat, 65, 128).unwrap();
        assert!(fine <= est * 1.01 + 1e-12, "coarse {est}, fine {fine}");
        assert!(fine >= 0.45);
    }

    #[test]
    fn catenoid_distance_is_positive_and_finite() {
        let est = estimate_distance(&catenoid(), 33, 64).unwrap();
        assert!(est.is_finite() && est > 0.1, "estimate {est}");
    }

    #[test]
    fn certificate_accepts_tall_walls_and_rejects_identity() {
        let cat = catenoid();
        let host = AnnularDomain::new(1.4, 1.8).unwrap();
        let lambda_cap = 0.5;
        // rho on the host is min |z^-2| = 1/1.8^2.
        let lab = fit_labyrinth(&host, 2.0 * lambda_cap * std::f64::consts::SQRT_2 * 1.8 * 1.02, 0.1)
            .unwrap();
        let k_region = AnnularDomain::new(0.88, 1.14).unwrap();
        let profile =
            crate::spray::fit_oka_profile(&k_region, &lab, 120, 1e-12, &[0.5, 2.0]).unwrap();
        let mut m_wall = f64::INFINITY;
        for z in lab.wall_nodes(64, 3) {
            m_wall = m_wall.min(profile.profile().eval_at(z).re);
        }
        assert!(m_wall > 0.6, "profile floor {m_wall}");
        // Wall height comfortably above the requirement.
        let sigma = 1.0 / (1.8f64 * 1.8);
        let h_req = std::f64::consts::SQRT_2 * 2.0 * lambda_cap / (lab.lambda() * sigma);
        let s = (3.0 * h_req).ln() / m_wall;
        let step = LopezRosStep {
            a: 0,
            b: 1,
            h: Holo::Exp(profile.profile().scale(c(s, 0.0))),
        };
        let cert =
            certify_boundary_distance(&cat, &step, &lab, lambda_cap, 0.02, 60, 9).unwrap();
        assert!(cert.certified_bound >= lambda_cap);
        assert!(cert.h_min_on_omega > h_req);
        assert!(cert.rho > 0.2 && cert.sigma > 0.2);
        assert_eq!(cert.star.violations, 0);

        // The identity step has unit walls: the wall-height clause fails.
        let identity = LopezRosStep {
            a: 0,
            b: 1,
            h: Holo::One,
        };
        let got = certify_boundary_distance(&cat, &identity, &lab, lambda_cap, 0.02, 60, 9);
        match got {
            Err(Error::CertificateFailed { clause, .. }) => assert_eq!(clause, "wall height"),
            other => panic!("expected wall-height failure, got {other:?}"),
        }
    }

    #[test]
    fn stage_call_gates_certifies_and_budgets() {
        let cat = catenoid();
        let family = vec![cat.clone(), cat.clone(), cat];
        let phi = [0.0, 0.6, 1.0];
        let k_region = AnnularDomain::new(0.88, 1.14).unwrap();
        let search = AnnularDomain::new(1.25, 1.85).unwrap();
        let mut params = StageParams::default();
        params.lambda_cap = 0.5;
        params.eps = 0.3;
        params.star_trials = 40;
        params.seed = 11;
        params.oka_degree = 140;
        let out = increase_distance(&family, &phi, &k_region, &search, &params).unwrap();

        // Pinned member is untouched.
        assert!(out.records[0].fixed);
        assert!(out.family[0].steps().is_empty());

        // Ramped member gets a step but no certificate.
        assert_eq!(out.family[1].steps().len(), 1);
        assert!(out.records[1].certificate.is_none());
        assert!(out.records[1].spray.is_some());

        // Gated member gets a certificate meeting the target.
        let cert = out.records[2].certificate.as_ref().expect("certificate");
        assert!(cert.certified_bound >= 0.5);
        assert_eq!(cert.star.violations, 0);

        for r in &out.records[1..] {
            assert!(r.flux_drift < 1e-8, "flux drift {}", r.flux_drift);
            assert!(r.conformality < 1e-10, "conformality {}", r.conformality);
            assert!(r.oka_sup_k < 0.3, "closeness {}", r.oka_sup_k);
            assert!(r.sup_change_on_k <= params.eps, "sup change {}", r.sup_change_on_k);
        }
        assert!(out.records[2].h_min_on_walls > 1.0 / 0.3);
        assert_eq!(out.elements.len(), 1);
        assert_eq!(out.elements[0].pair, (0, 1));

        // The stored certificate re-verifies from the step stack, and a
        // falsified pair-product floor is caught.
        let e = &out.elements[0];
        let host = AnnularDomain::new(e.host_r_in, e.host_r_out).unwrap();
        let lab = build_labyrinth(&host, e.theta, e.lambda, params.beta).unwrap();
        let idx = out.records[2].step_index.unwrap();
        let bound =
            verify_certificate(&out.family[2], idx, &lab, cert, 123).unwrap();
        assert!((bound - cert.certified_bound).abs() < 1e-9);
        let mut forged = cert.clone();
        forged.rho *= 3.0;
        let got = verify_certificate(&out.family[2], idx, &lab, &forged, 123);
        match got {
            Err(Error::CertificateFailed { clause, .. }) => {
                assert_eq!(clause, "pair product")
            }
            other => panic!("expected pair-product failure, got {other:?}"),
        }
    }

    #[test]
    fn stage_call_enforces_compact_budget() {
        let cat = catenoid();
        let family = vec![cat];
        let phi = [1.0];
        let k_region = AnnularDomain::new(0.88, 1.14).unwrap();
        let search = AnnularDomain::new(1.25, 1.85).unwrap();
        let mut params = StageParams::default();
        params.lambda_cap = 0.5;
        params.eps = 1e-9;
        params.star_trials = 20;
        params.oka_degree = 140;
        let got = increase_distance(&family, &phi, &k_region, &search, &params);
        match got {
            Err(Error::CertificateFailed { clause, .. }) => {
                assert_eq!(clause, "sup change on K")
            }
            other => panic!("expected budget failure, got {other:?}"),
        }
    }
}
