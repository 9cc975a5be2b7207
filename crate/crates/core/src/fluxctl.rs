//! Flux prescription: drive each family member's flux to a target
//! homotopy of cohomology classes by composed pair-period sprays.
//!
//! The annulus has one homology generator, so a flux class is one real
//! vector per member. Targets must agree with the current flux on the
//! pinned grid rows; those members are returned untouched. Every other
//! member is corrected by shear steps over a fixed cycle of component
//! pairs, each solved so the component periods become `i` times the target
//! flux (zero real part, prescribed imaginary part).

use serde::{Deserialize, Serialize};

use crate::domain::{AnnularDomain, ParameterGrid};
use crate::error::{Error, Result};
use crate::holo::Holo;
use crate::quad::QuadOpts;
use crate::spray::{solve_pair_periods, SprayDiagnostics, SprayParams};
use crate::weierstrass::{pair_period_targets, WeierstrassData};
use crate::{C64, I};

/// Acceptance tolerance for the re-measured pair periods of one shear step.
const STEP_PERIOD_TOL: f64 = 1e-8;

/// Per-grid-point flux targets over the annulus generator.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FluxHomotopy {
    targets: Vec<Vec<f64>>,
}

impl FluxHomotopy {
    /// Wraps explicit per-index targets (grid product order).
    pub fn new(targets: Vec<Vec<f64>>) -> Result<Self> {
        if targets.is_empty() {
            return Err(Error::InvalidArgument("empty flux target list".into()));
        }
        let n = targets[0].len();
        if n == 0 || targets.iter().any(|t| t.len() != n) {
            return Err(Error::InvalidArgument(
                "flux targets must share a positive dimension".into(),
            ));
        }
        if targets.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument("flux targets must be finite".into()));
        }
        Ok(Self { targets })
    }

    /// Linear-in-time interpolation between two flux vectors, constant in
    /// the parameter direction.
    pub fn linear_in_t(grid: &ParameterGrid, start: &[f64], end: &[f64]) -> Result<Self> {
        if start.len() != end.len() || start.is_empty() {
            return Err(Error::InvalidArgument(
                "interpolation endpoints must share a positive dimension".into(),
            ));
        }
        let mut targets = Vec::with_capacity(grid.len());
        for idx in 0..grid.len() {
            let (_, it) = grid.split(idx);
            let t = grid.time(it);
            targets.push(
                start
                    .iter()
                    .zip(end)
                    .map(|(s, e)| s + t * (e - s))
                    .collect(),
            );
        }
        Self::new(targets)
    }

    /// Targets equal to the measured flux of each member (the identity
    /// prescription).
    pub fn from_current(
        family: &[WeierstrassData],
        radius: f64,
        opts: &QuadOpts,
    ) -> Result<Self> {
        let mut targets = Vec::with_capacity(family.len());
        for m in family {
            targets.push(m.flux_on(radius, opts)?);
        }
        Self::new(targets)
    }

    /// Number of grid points covered.
    pub fn len(&self) -> usize {
        self.targets.len()
    }

    /// Whether the list is empty (never true after construction).
    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    /// Target vector at a grid index.
    pub fn target(&self, idx: usize) -> &[f64] {
        &self.targets[idx]
    }
}

/// Tuning for a flux prescription run.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FluxParams {
    /// Sup-change budget on the protected compact per member.
    pub eps: f64,
    /// Protected compact (also fixes the quadrature circle).
    pub k_region: AnnularDomain,
    /// Tolerance for target-equals-current on pinned rows.
    pub fixed_tol: f64,
    /// Required final flux accuracy (infinity norm).
    pub flux_tol: f64,
    /// Required bound on real component periods.
    pub re_tol: f64,
    /// Continuity surrogate: adjacent-time target jumps above this are
    /// flagged.
    pub jump_tol: f64,
    /// Maximum sequential sweeps over the pair cycle.
    pub max_sweeps: usize,
    /// Spray controls (wide bumps reach large period shifts).
    pub spray: SprayParams,
    /// Quadrature controls.
    pub quad: QuadOpts,
}

impl FluxParams {
    /// Defaults for a given protected compact.
    pub fn for_region(k_region: AnnularDomain) -> Self {
        Self {
            eps: 50.0,
            k_region,
            fixed_tol: 1e-9,
            flux_tol: 1e-6,
            re_tol: 1e-9,
            jump_tol: 0.5,
            max_sweeps: 3,
            spray: SprayParams::wide(),
            quad: QuadOpts::default(),
        }
    }
}

/// Per-member outcome of a flux prescription.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FluxRecord {
    /// Grid index of the member.
    pub index: usize,
    /// Whether the member was pinned (target must equal current).
    pub fixed: bool,
    /// Prescribed flux vector.
    pub target: Vec<f64>,
    /// Measured flux vector after the run.
    pub achieved: Vec<f64>,
    /// Infinity-norm flux error.
    pub flux_error: f64,
    /// Largest real part among component periods after the run.
    pub re_period_max: f64,
    /// Measured sup-change of the immersion on the protected compact.
    pub sup_change_on_k: f64,
    /// Largest conformality residual after the run.
    pub conformality: f64,
    /// Shear steps appended.
    pub steps_added: usize,
    /// Sweeps over the pair cycle used.
    pub sweeps: usize,
    /// Period-solve diagnostics, one per appended step.
    pub sprays: Vec<SprayDiagnostics>,
}

/// Result of a flux prescription over a family.
#[derive(Clone, Debug)]
pub struct FluxOutcome {
    /// Updated members (pinned members are returned untouched).
    pub family: Vec<WeierstrassData>,
    /// Per-member records in grid order.
    pub records: Vec<FluxRecord>,
    /// Continuity-surrogate warnings.
    pub warnings: Vec<String>,
}

/// Deterministic pair cycle covering all components: consecutive disjoint
/// pairs, plus a closing pair through component 0 when the count is odd.
pub fn pair_cycle(n: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut k = 0;
    while k + 1 < n {
        out.push((k, k + 1));
        k += 2;
    }
    if n % 2 == 1 {
        out.push((n - 1, 0));
    }
    out
}

/// Pair-period targets realizing a flux vector: `oint phi_a = i T_a` and
/// `oint phi_b = i T_b` translate to `oint f = i T_a + T_b` and
/// `oint g = i T_a - T_b` for the spinor pair on `(a, b)`.
pub fn flux_pair_targets(target: &[f64], a: usize, b: usize) -> (C64, C64) {
    let ta = target[a];
    let tb = target[b];
    (I * ta + tb, I * ta - tb)
}

/// Corrects one member's flux to `target`.
///
/// Runs the pair cycle up to `max_sweeps` times; each pair solve pins the
/// two covered component periods exactly, so one sweep normally suffices
/// and later sweeps are convergence insurance. Identity solves append no
/// step, keeping met targets bit-exact.
pub fn prescribe_flux_point(
    member: &WeierstrassData,
    index: usize,
    target: &[f64],
    params: &FluxParams,
) -> Result<(WeierstrassData, FluxRecord)> {
    let n = member.n_components();
    if target.len() != n {
        return Err(Error::InvalidArgument(format!(
            "flux target has {} components for an {n}-component member",
            target.len()
        )));
    }
    let r_q = params.k_region.mid_radius();
    let mut work = member.clone();
    let mut sprays = Vec::new();
    let mut sweeps = 0;
    let mut err = f64::INFINITY;
    let mut prev_err = f64::INFINITY;
    for sweep in 0..params.max_sweeps {
        sweeps = sweep + 1;
        for (a, b) in pair_cycle(n) {
            let (tf, tg) = flux_pair_targets(target, a, b);
            let out = solve_pair_periods(&work, a, b, &Holo::One, r_q, tf, tg, &params.spray)
                .map_err(|e| match e {
                    Error::NewtonFailed { residual, .. } => Error::FluxUnreachable {
                        residual,
                        substeps: 0,
                    },
                    other => other,
                })?;
            if out.step.h.is_one() {
                continue;
            }
            // Unlike period-restoring shears, these steps move the pair
            // periods on purpose; the independent re-measurement must land
            // on the prescribed targets, not the pre-step values.
            let stepped = work.appended(out.step)?;
            let after = pair_period_targets(&stepped, a, b, r_q, &params.quad)?;
            let defect = (after.0 - tf).norm().max((after.1 - tg).norm());
            if defect > STEP_PERIOD_TOL {
                return Err(Error::InexactPeriods {
                    defect,
                    tol: STEP_PERIOD_TOL,
                });
            }
            work = stepped;
            sprays.push(out.diagnostics);
        }
        let achieved = work.flux_on(r_q, &params.quad)?;
        err = achieved
            .iter()
            .zip(target)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        if err <= params.flux_tol {
            break;
        }
        if err >= prev_err {
            return Err(Error::FluxUnreachable {
                residual: err,
                substeps: sweeps,
            });
        }
        prev_err = err;
    }
    if err > params.flux_tol {
        return Err(Error::FluxUnreachable {
            residual: err,
            substeps: sweeps,
        });
    }

    let achieved = work.flux_on(r_q, &params.quad)?;
    let periods = work.periods_on(r_q, &params.quad)?;
    let re_period_max = periods.iter().map(|p| p.re.abs()).fold(0.0, f64::max);
    if re_period_max > params.re_tol {
        return Err(Error::InexactPeriods {
            defect: re_period_max,
            tol: params.re_tol,
        });
    }
    let conformality =
        work.max_conformality_residual(&work.domain().validation_grid(8, 64));
    let sup_change_on_k = if work.steps().len() == member.steps().len() {
        0.0
    } else {
        crate::deform::sup_immersion_change(member, &work, &params.k_region, 10, 40, 1e-9)?
    };
    if sup_change_on_k > params.eps {
        return Err(Error::CertificateFailed {
            clause: "sup change on K",
            detail: format!(
                "flux correction moved member {index} by {sup_change_on_k:.3e} \
                 on the compact, budget {:.3e}",
                params.eps
            ),
        });
    }
    let steps_added = work.steps().len() - member.steps().len();
    let record = FluxRecord {
        index,
        fixed: false,
        target: target.to_vec(),
        achieved,
        flux_error: err,
        re_period_max,
        sup_change_on_k,
        conformality,
        steps_added,
        sweeps,
        sprays,
    };
    Ok((work, record))
}

/// Prescribes a flux homotopy over a grid-indexed family.
///
/// Validates that pinned rows already carry their targets (within
/// `fixed_tol`), flags target jumps above the continuity surrogate, skips
/// pinned members entirely (bit-identical), and corrects the rest.
pub fn prescribe_flux(
    family: &[WeierstrassData],
    grid: &ParameterGrid,
    targets: &FluxHomotopy,
    params: &FluxParams,
) -> Result<FluxOutcome> {
    if family.len() != grid.len() || targets.len() != grid.len() {
        return Err(Error::InvalidArgument(format!(
            "family ({}), grid ({}), and targets ({}) disagree in size",
            family.len(),
            grid.len(),
            targets.len()
        )));
    }
    let r_q = params.k_region.mid_radius();

    // Pinned rows must already carry their targets.
    for idx in grid.fixed_indices() {
        let current = family[idx].flux_on(r_q, &params.quad)?;
        let defect = current
            .iter()
            .zip(targets.target(idx))
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        if defect > params.fixed_tol {
            return Err(Error::InconsistentTarget { defect });
        }
    }

    // Continuity surrogate along the time axis.
    let mut warnings = Vec::new();
    for ip in 0..grid.n_points() {
        for it in 0..grid.n_times() - 1 {
            let a = targets.target(grid.index(ip, it));
            let b = targets.target(grid.index(ip, it + 1));
            let jump = a
                .iter()
                .zip(b)
                .map(|(x, y)| (x - y).abs())
                .fold(0.0, f64::max);
            if jump > params.jump_tol {
                warnings.push(format!(
                    "flux target jumps by {jump:.3} between t = {} and t = {} \
                     at parameter row {ip} (continuity surrogate {})",
                    grid.time(it),
                    grid.time(it + 1),
                    params.jump_tol
                ));
            }
        }
    }

    let mut out_family = Vec::with_capacity(family.len());
    let mut records = Vec::with_capacity(family.len());
    for idx in 0..family.len() {
        if grid.is_fixed(idx) {
            let achieved = family[idx].flux_on(r_q, &params.quad)?;
            let flux_error = achieved
                .iter()
                .zip(targets.target(idx))
                .map(|(x, y)| (x - y).abs())
                .fold(0.0, f64::max);
            let periods = family[idx].periods_on(r_q, &params.quad)?;
            let re_period_max = periods.iter().map(|p| p.re.abs()).fold(0.0, f64::max);
            let conformality = family[idx]
                .max_conformality_residual(&family[idx].domain().validation_grid(8, 64));
            records.push(FluxRecord {
                index: idx,
                fixed: true,
                target: targets.target(idx).to_vec(),
                achieved,
                flux_error,
                re_period_max,
                sup_change_on_k: 0.0,
                conformality,
                steps_added: 0,
                sweeps: 0,
                sprays: Vec::new(),
            });
            out_family.push(family[idx].clone());
        } else {
            let (data, record) =
                prescribe_flux_point(&family[idx], idx, targets.target(idx), params)?;
            records.push(record);
            out_family.push(data);
        }
    }

    Ok(FluxOutcome {
        family: out_family,
        records,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn domain() -> AnnularDomain {
        AnnularDomain::new(0.5, 2.0).unwrap()
    }

    fn catenoid() -> WeierstrassData {
        WeierstrassData::catenoid(domain(), c(1.0, 0.0)).unwrap()
    }

    fn k_region() -> AnnularDomain {
        AnnularDomain::new(0.88, 1.14).unwrap()
    }

    #[test]
    fn pair_cycle_covers_all_components() {
        assert_eq!(pair_cycle(3), vec![(0, 1), (2, 0)]);
        assert_eq!(pair_cycle(4), vec![(0, 1), (2, 3)]);
        assert_eq!(pair_cycle(5), vec![(0, 1), (2, 3), (4, 0)]);
        for n in 3..=6 {
            let mut seen = vec![false; n];
            for (a, b) in pair_cycle(n) {
                seen[a] = true;
                seen[b] = true;
            }
            assert!(seen.iter().all(|&s| s), "cycle misses a component at n={n}");
        }
    }

    #[test]
    fn matching_target_is_the_identity() {
        let cat = catenoid();
        let grid = ParameterGrid::new(
            vec![vec![0.0], vec![1.0]],
            vec![],
            vec![0.0, 1.0],
            vec![],
        )
        .unwrap();
        let family = vec![cat.clone(), cat.clone(), cat.clone(), cat];
        let params = FluxParams::for_region(k_region());
        let targets =
            FluxHomotopy::from_current(&family, params.k_region.mid_radius(), &params.quad)
                .unwrap();
        let out = prescribe_flux(&family, &grid, &targets, &params).unwrap();
        assert!(out.warnings.is_empty());
        for (m, r) in out.family.iter().zip(&out.records) {
            assert!(m.steps().is_empty(), "identity run appended a step");
            assert_eq!(r.steps_added, 0);
            assert!(r.flux_error <= 1e-9, "flux error {}", r.flux_error);
        }
    }

    #[test]
    fn catenoid_flux_doubles_linearly_in_t() {
        let cat = catenoid();
        let grid = ParameterGrid::new(
            vec![vec![0.0]],
            vec![],
            vec![0.0, 0.5, 1.0],
            vec![],
        )
        .unwrap();
        let family = vec![cat.clone(), cat.clone(), cat];
        let tau = std::f64::consts::TAU;
        let start = [0.0, 0.0, tau];
        let end = [0.0, 0.0, 2.0 * tau];
        let targets = FluxHomotopy::linear_in_t(&grid, &start, &end).unwrap();
        let params = FluxParams::for_region(k_region());
        let out = prescribe_flux(&family, &grid, &targets, &params).unwrap();
        // On this coarse grid the linear targets jump by pi between rows,
        // which the absolute-jump surrogate reports; the run still proceeds.
        assert!(out.warnings.iter().all(|w| w.contains("jump")));

        // t = 0 row is pinned and untouched.
        assert!(out.family[0].steps().is_empty());
        assert!(out.records[0].fixed);

        for (it, t) in [(1usize, 0.5f64), (2, 1.0)] {
            let r = &out.records[it];
            assert!(!r.fixed);
            let want = tau * (1.0 + t);
            assert!(
                (r.achieved[2] - want).abs() < 1e-6,
                "t={t}: achieved {} want {want}",
                r.achieved[2]
            );
            assert!(r.achieved[0].abs() < 1e-6 && r.achieved[1].abs() < 1e-6);
            assert!(r.re_period_max < 1e-9, "re periods {}", r.re_period_max);
            assert!(r.conformality < 1e-10, "conformality {}", r.conformality);
            assert!(r.steps_added >= 1);

            // Independent check on a different circle: the period is a
            // homotopy invariant of the integrand, so the flux read off at
            // radius 0.7 must agree.
            let member = &out.family[it];
            let opts = QuadOpts::default();
            let periods =
                quad::adaptive_circle_vec(0.7, &opts, |z| member.eval_components(z)).unwrap();
            assert!((periods[2].im - want).abs() < 1e-6);
            assert!(periods[2].re.abs() < 1e-9);
            assert!(periods[0].im.abs() < 1e-6 && periods[1].im.abs() < 1e-6);
        }
    }

    #[test]
    fn inconsistent_pinned_target_is_rejected() {
        let cat = catenoid();
        let grid =
            ParameterGrid::new(vec![vec![0.0]], vec![], vec![0.0, 1.0], vec![]).unwrap();
        let family = vec![cat.clone(), cat];
        let tau = std::f64::consts::TAU;
        // Start vector differs from the catenoid flux (0, 0, tau) at t = 0.
        let targets =
            FluxHomotopy::linear_in_t(&grid, &[0.0, 0.0, 1.5 * tau], &[0.0, 0.0, 2.0 * tau])
                .unwrap();
        let params = FluxParams::for_region(k_region());
        let got = prescribe_flux(&family, &grid, &targets, &params);
        match got {
            Err(Error::InconsistentTarget { defect }) => {
                assert!((defect - 0.5 * tau).abs() < 1e-6, "defect {defect}")
            }
            other => panic!("expected inconsistent-target error, got {other:?}"),
        }
    }

    #[test]
    fn discontinuous_target_is_flagged() {
        let cat = catenoid();
        let grid =
            ParameterGrid::new(vec![vec![0.0]], vec![], vec![0.0, 0.01], vec![]).unwrap();
        let family = vec![cat.clone(), cat];
        let tau = std::f64::consts::TAU;
        let current = [0.0, 0.0, tau];
        let bumped = [0.0, 0.0, tau + 0.8];
        let targets = FluxHomotopy::new(vec![current.to_vec(), bumped.to_vec()]).unwrap();
        let params = FluxParams::for_region(k_region());
        let out = prescribe_flux(&family, &grid, &targets, &params).unwrap();
        assert!(
            out.warnings.iter().any(|w| w.contains("jump")),
            "expected a continuity warning, got {:?}",
            out.warnings
        );
    }
}
