//! Ring labyrinths: nested circular walls with alternating gates.
//!
//! A labyrinth fills a host annulus with `N` thin wall shells. Each shell
//! has one angular gate, and consecutive gates alternate between angles `0`
//! and `pi`, so any crossing of the host either runs through a wall for at
//! least the wall thickness or detours through every gate in order, paying
//! roughly a half-circumference per ring. That dichotomy is the geometric
//! engine behind boundary-distance growth, and it is re-checked here both
//! analytically and by adversarial path sampling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::domain::AnnularDomain;
use crate::error::{Error, Result};
use crate::C64;

/// Angular distance `|a - b|` reduced to `[0, pi]`.
pub fn angular_distance(a: f64, b: f64) -> f64 {
    let two_pi = std::f64::consts::TAU;
    let d = (a - b).rem_euclid(two_pi);
    d.min(two_pi - d)
}

/// A ring labyrinth inside a host annulus.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Labyrinth {
    host: AnnularDomain,
    radii: Vec<f64>,
    gate_angles: Vec<f64>,
    delta: f64,
    beta: f64,
    lambda: f64,
    threshold: f64,
}

/// Outcome of the adversarial crossing search.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StarReport {
    /// Number of candidate crossings assessed.
    pub trials: usize,
    /// Crossings that beat both the length and the wall-run bound.
    pub violations: usize,
    /// Smallest over trials of `max(length/threshold, run/lambda)`.
    pub worst_margin: f64,
}

/// Builds a labyrinth guaranteeing the crossing dichotomy at the given
/// threshold.
///
/// The ring count is the smallest `N` with `(N - 1)(pi - 2 beta) s >=
/// threshold` (`s` the host inner radius); rings are equally spaced, walls
/// are `delta = min(width / (2N + 1), 2 lambda)` thick, and gates alternate
/// sides. Requires `delta > lambda`, so every radial wall crossing costs a
/// run longer than `lambda`.
pub fn build_labyrinth(
    host: &AnnularDomain,
    threshold: f64,
    lambda: f64,
    beta: f64,
) -> Result<Labyrinth> {
    if host.is_disc() {
        return Err(Error::InfeasibleLabyrinth(
            "labyrinth host must be a proper annulus".into(),
        ));
    }
    if !(threshold.is_finite() && threshold > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "threshold must be positive, got {threshold}"
        )));
    }
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "lambda must be positive, got {lambda}"
        )));
    }
    if !(beta > 0.0 && beta <= std::f64::consts::FRAC_PI_4) {
        return Err(Error::InvalidArgument(format!(
            "gate half-angle must lie in (0, pi/4], got {beta}"
        )));
    }
    let s = host.r_in();
    let width = host.r_out() - s;
    let per_ring = (std::f64::consts::PI - 2.0 * beta) * s;
    let n = 1 + (threshold / per_ring).ceil() as usize;
    let delta = (width / (2 * n + 1) as f64).min(2.0 * lambda);
    if !(delta > lambda) {
        return Err(Error::InfeasibleLabyrinth(format!(
            "wall thickness {delta:.3e} does not exceed lambda {lambda:.3e} \
             ({n} rings in width {width:.3e})"
        )));
    }
    let gap = width / (n + 1) as f64;
    let radii: Vec<f64> = (1..=n).map(|i| s + i as f64 * gap).collect();
    let gate_angles: Vec<f64> = (0..n)
        .map(|i| if i % 2 == 0 { 0.0 } else { std::f64::consts::PI })
        .collect();
    Ok(Labyrinth {
        host: host.clone(),
        radii,
        gate_angles,
        delta,
        beta,
        lambda,
        threshold,
    })
}

impl Labyrinth {
    /// Raw constructor for explicit geometry (used to probe broken gate
    /// layouts); validates only shell containment and ordering.
    pub fn with_gates(
        host: AnnularDomain,
        radii: Vec<f64>,
        gate_angles: Vec<f64>,
        delta: f64,
        beta: f64,
        lambda: f64,
        threshold: f64,
    ) -> Result<Self> {
        if radii.len() != gate_angles.len() || radii.is_empty() {
            return Err(Error::InvalidArgument(
                "need one gate angle per ring".into(),
            ));
        }
        let mut prev = host.r_in();
        for &r in &radii {
            if !(r - delta / 2.0 > prev && r + delta / 2.0 < host.r_out()) {
                return Err(Error::InfeasibleLabyrinth(format!(
                    "ring at radius {r} does not fit in the host"
                )));
            }
            prev = r + delta / 2.0;
        }
        Ok(Self {
            host,
            radii,
            gate_angles,
            delta,
            beta,
            lambda,
            threshold,
        })
    }

    /// Host annulus.
    pub fn host(&self) -> &AnnularDomain {
        &self.host
    }

    /// Number of wall rings.
    pub fn n_rings(&self) -> usize {
        self.radii.len()
    }

    /// Ring center radii, ascending.
    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    /// Gate center angles per ring.
    pub fn gate_angles(&self) -> &[f64] {
        &self.gate_angles
    }

    /// Wall thickness.
    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Gate half-angle.
    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Wall-run scale of the crossing dichotomy.
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Length threshold of the crossing dichotomy.
    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    /// Lower bound on the length of any crossing that dodges all walls:
    /// `(N - 1)(pi - 2 beta) s`.
    pub fn analytic_bound(&self) -> f64 {
        (self.n_rings().saturating_sub(1)) as f64
            * (std::f64::consts::PI - 2.0 * self.beta)
            * self.host.r_in()
    }

    /// Index of the wall shell containing `|z|`, if any.
    pub fn shell_index(&self, z: C64) -> Option<usize> {
        let r = z.norm();
        self.radii
            .iter()
            .position(|&rho| (r - rho).abs() <= self.delta / 2.0)
    }

    /// Whether `z` lies on a wall (in a shell, outside its gate).
    pub fn in_walls(&self, z: C64) -> bool {
        match self.shell_index(z) {
            None => false,
            Some(i) => angular_distance(z.arg(), self.gate_angles[i]) >= self.beta,
        }
    }

    /// Sample nodes covering the walls (`n_ang` angles per ring over the
    /// wall arc, `n_rad` radii across each shell).
    pub fn wall_nodes(&self, n_ang: usize, n_rad: usize) -> Vec<C64> {
        let mut nodes = Vec::with_capacity(self.n_rings() * n_ang * n_rad);
        let arc = std::f64::consts::TAU - 2.0 * self.beta;
        for (i, &rho) in self.radii.iter().enumerate() {
            for jr in 0..n_rad {
                let fr = if n_rad == 1 {
                    0.0
                } else {
                    (jr as f64 / (n_rad - 1) as f64 - 0.5) * 0.9
                };
                let r = rho + fr * self.delta;
                for ja in 0..n_ang {
                    let t = (ja as f64 + 0.5) / n_ang as f64;
                    let theta = self.gate_angles[i] + self.beta + t * arc;
                    nodes.push(C64::from_polar(r, theta));
                }
            }
        }
        nodes
    }

    /// Sample nodes covering the gates (`n_ang` angles per gate sector,
    /// `n_rad` radii across each shell).
    pub fn gate_nodes(&self, n_ang: usize, n_rad: usize) -> Vec<C64> {
        let mut nodes = Vec::with_capacity(self.n_rings() * n_ang * n_rad);
        for (i, &rho) in self.radii.iter().enumerate() {
            for jr in 0..n_rad {
                let fr = if n_rad == 1 {
                    0.0
                } else {
                    (jr as f64 / (n_rad - 1) as f64 - 0.5) * 0.9
                };
                let r = rho + fr * self.delta;
                for ja in 0..n_ang {
                    let t = (ja as f64 + 0.5) / n_ang as f64 - 0.5;
                    let theta = self.gate_angles[i] + 2.0 * self.beta * t;
                    nodes.push(C64::from_polar(r, theta));
                }
            }
        }
        nodes
    }

    /// Length and longest wall run of a polyline, resampled at a step well
    /// below both the wall thickness and the run scale.
    fn assess_polyline(&self, waypoints: &[C64]) -> (f64, f64) {
        let ds = self.delta.min(self.lambda) / 8.0;
        let mut length = 0.0;
        let mut run = 0.0;
        let mut max_run = 0.0f64;
        for w in waypoints.windows(2) {
            let (a, b) = (w[0], w[1]);
            let dist = (b - a).norm();
            if dist == 0.0 {
                continue;
            }
            let steps = (dist / ds).ceil() as usize;
            let seg = dist / steps as f64;
            for k in 0..steps {
                let t = (k as f64 + 0.5) / steps as f64;
                let z = a + (b - a) * C64::new(t, 0.0);
                length += seg;
                if self.in_walls(z) {
                    run += seg;
                    max_run = max_run.max(run);
                } else {
                    run = 0.0;
                }
            }
        }
        (length, max_run)
    }

    /// Adversarially searches for a crossing of the host that beats both
    /// bounds of the dichotomy: total length below the threshold and every
    /// wall run below lambda.
    ///
    /// Deterministic candidates (radial spokes through and beside every
    /// gate, gate-following spirals both ways) are assessed first, then
    /// `trials` seeded random polylines. Any violation is an error carrying
    /// the offending candidate's numbers.
    pub fn verify_star(&self, trials: usize, seed: u64) -> Result<StarReport> {
        let (r_in, r_out) = (self.host.r_in(), self.host.r_out());
        let mut candidates: Vec<(String, Vec<C64>)> = Vec::new();

        let mut angles: Vec<f64> = Vec::new();
        for &g in &self.gate_angles {
            angles.push(g);
            angles.push(g + self.beta / 2.0);
            angles.push(g - self.beta / 2.0);
        }
        for k in 0..8 {
            angles.push(std::f64::consts::TAU * k as f64 / 8.0 + 0.19);
        }
        for (i, theta) in angles.into_iter().enumerate() {
            candidates.push((
                format!("radial spoke {i}"),
                vec![C64::from_polar(r_in, theta), C64::from_polar(r_out, theta)],
            ));
        }

        for reversed in [false, true] {
            let mut pts = Vec::new();
            let gap = (r_out - r_in) / (self.n_rings() + 1) as f64;
            let order: Vec<usize> = if reversed {
                (0..self.n_rings()).rev().collect()
            } else {
                (0..self.n_rings()).collect()
            };
            let mut theta = self.gate_angles[order[0]];
            pts.push(C64::from_polar(r_in, theta));
            for (step, &i) in order.iter().enumerate() {
                let target = self.gate_angles[i];
                let below = self.radii[i] - gap / 2.0;
                // Swing to the gate angle in the clear band under the ring.
                let mut t = theta;
                let dtheta = {
                    let d = (target - theta).rem_euclid(std::f64::consts::TAU);
                    if d > std::f64::consts::PI {
                        d - std::f64::consts::TAU
                    } else {
                        d
                    }
                };
                let arcs = (dtheta.abs() / 0.05).ceil().max(1.0) as usize;
                for k in 1..=arcs {
                    t = theta + dtheta * k as f64 / arcs as f64;
                    pts.push(C64::from_polar(below, t));
                }
                theta = t;
                // Cross the ring through its gate.
                pts.push(C64::from_polar(self.radii[i] + gap / 2.0, theta));
                let _ = step;
            }
            pts.push(C64::from_polar(r_out, theta));
            candidates.push((format!("gate spiral rev={reversed}"), pts));
        }

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for t in 0..trials {
            let mut radii: Vec<f64> = (0..6)
                .map(|_| rng.gen_range(r_in..r_out))
                .collect();
            radii.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let mut pts = vec![C64::from_polar(
                r_in,
                rng.gen_range(0.0..std::f64::consts::TAU),
            )];
            for r in radii {
                pts.push(C64::from_polar(r, rng.gen_range(0.0..std::f64::consts::TAU)));
            }
            pts.push(C64::from_polar(
                r_out,
                rng.gen_range(0.0..std::f64::consts::TAU),
            ));
            candidates.push((format!("random polyline {t}"), pts));
        }

        let total = candidates.len();
        let mut violations = 0usize;
        let mut worst_margin = f64::INFINITY;
        let mut first_violation: Option<String> = None;
        for (desc, pts) in candidates {
            let (length, max_run) = self.assess_polyline(&pts);
            let margin = (length / self.threshold).max(max_run / self.lambda);
            worst_margin = worst_margin.min(margin);
            if margin < 1.0 {
                violations += 1;
                if first_violation.is_none() {
                    first_violation = Some(format!(
                        "{desc}: length {length:.6} < threshold {:.6} and wall run \
                         {max_run:.6} < lambda {:.6}",
                        self.threshold, self.lambda
                    ));
                }
            }
        }
        if let Some(detail) = first_violation {
            return Err(Error::StarViolated(format!(
                "{violations} of {total} candidates crossed cheaply; first: {detail}"
            )));
        }
        Ok(StarReport {
            trials: total,
            violations,
            worst_margin,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn host() -> AnnularDomain {
        AnnularDomain::new(1.4, 1.8).unwrap()
    }

    #[test]
    fn build_matches_frozen_geometry() {
        let lab = build_labyrinth(&host(), 16.0, 0.02, 0.1).unwrap();
        assert_eq!(lab.n_rings(), 5);
        assert!((lab.delta() - 0.4 / 11.0).abs() < 1e-15);
        assert!((lab.analytic_bound() - 16.47291886010284).abs() < 1e-9);
        assert!(lab.analytic_bound() >= lab.threshold());
        let want_radii: Vec<f64> = (1..=5).map(|i| 1.4 + i as f64 * 0.4 / 6.0).collect();
        for (got, want) in lab.radii().iter().zip(&want_radii) {
            assert!((got - want).abs() < 1e-15);
        }
        assert_eq!(lab.gate_angles()[0], 0.0);
        assert_eq!(lab.gate_angles()[1], std::f64::consts::PI);
    }

    #[test]
    fn infeasible_when_walls_get_too_thin() {
        // A tall threshold forces many rings; their thickness then drops
        // under lambda.
        let got = build_labyrinth(&host(), 1e4, 0.02, 0.1);
        assert!(matches!(got, Err(Error::InfeasibleLabyrinth(_))));
    }

    #[test]
    fn membership_distinguishes_walls_and_gates() {
        let lab = build_labyrinth(&host(), 16.0, 0.02, 0.1).unwrap();
        let rho = lab.radii()[0];
        // Ring 0 gates at angle 0.
        assert!(!lab.in_walls(C64::from_polar(rho, 0.0)));
        assert!(lab.in_walls(C64::from_polar(rho, 1.0)));
        assert!(lab.in_walls(C64::from_polar(rho, std::f64::consts::PI)));
        // Outside the shell nothing is a wall.
        assert!(!lab.in_walls(C64::from_polar(rho + lab.delta(), 1.0)));
        for z in lab.wall_nodes(32, 3) {
            assert!(lab.in_walls(z));
        }
        for z in lab.gate_nodes(8, 3) {
            assert!(!lab.in_walls(z));
        }
    }

    #[test]
    fn star_holds_for_alternating_gates() {
        let lab = build_labyrinth(&host(), 16.0, 0.02, 0.1).unwrap();
        let report = lab.verify_star(50, 7).unwrap();
        assert_eq!(report.violations, 0);
        assert!(report.worst_margin >= 1.0);
    }

    #[test]
    fn star_fails_for_aligned_gates() {
        let lab = build_labyrinth(&host(), 16.0, 0.02, 0.1).unwrap();
        let aligned = Labyrinth::with_gates(
            host(),
            lab.radii().to_vec(),
            vec![0.0; lab.n_rings()],
            lab.delta(),
            lab.beta(),
            lab.lambda(),
            lab.threshold(),
        )
        .unwrap();
        // A straight spoke through the aligned gate column crosses with no
        // wall contact at all.
        let got = aligned.verify_star(10, 7);
        assert!(matches!(got, Err(Error::StarViolated(_))));
    }
}
