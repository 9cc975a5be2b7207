//! Annular domains, exhaustions, homology curves, and parameter grids.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::C64;

/// Closed annulus `{ r_in <= |z| <= r_out }`; `r_in == 0` degenerates to a
/// closed disc.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnnularDomain {
    r_in: f64,
    r_out: f64,
}

impl AnnularDomain {
    /// Builds the annulus, requiring `0 <= r_in < r_out < inf`.
    pub fn new(r_in: f64, r_out: f64) -> Result<Self> {
        if !(r_in.is_finite() && r_out.is_finite()) || r_in < 0.0 || r_in >= r_out {
            return Err(Error::Geometry(format!(
                "annulus radii must satisfy 0 <= r_in < r_out; got ({r_in}, {r_out})"
            )));
        }
        Ok(Self { r_in, r_out })
    }

    /// Inner radius (0 for a disc).
    pub fn r_in(&self) -> f64 {
        self.r_in
    }

    /// Outer radius.
    pub fn r_out(&self) -> f64 {
        self.r_out
    }

    /// Whether the domain is a disc (`r_in == 0`).
    pub fn is_disc(&self) -> bool {
        self.r_in == 0.0
    }

    /// Whether `z` lies in the closed annulus, with a relative slack of a few
    /// ulps to admit boundary points produced by trigonometry.
    pub fn contains(&self, z: C64) -> bool {
        let r = z.norm();
        r >= self.r_in * (1.0 - 1e-12) - 1e-300 && r <= self.r_out * (1.0 + 1e-12)
    }

    /// Whether `other` is contained in this closed annulus.
    pub fn contains_annulus(&self, other: &AnnularDomain) -> bool {
        other.r_in >= self.r_in * (1.0 - 1e-12) && other.r_out <= self.r_out * (1.0 + 1e-12)
    }

    /// Whether `other` is contained in the open interior with positive margin.
    pub fn strictly_contains(&self, other: &AnnularDomain) -> bool {
        let inner_ok = self.is_disc() && other.is_disc() || other.r_in > self.r_in;
        inner_ok && other.r_out < self.r_out
    }

    /// Geometric mean radius, the natural mid circle of the annulus.
    pub fn mid_radius(&self) -> f64 {
        if self.is_disc() {
            self.r_out / 2.0
        } else {
            (self.r_in * self.r_out).sqrt()
        }
    }

    /// `n` equally spaced points on the circle of radius `r`, with an angular
    /// phase offset of `phase` radians.
    pub fn circle(&self, r: f64, n: usize, phase: f64) -> Result<Vec<C64>> {
        if r < self.r_in * (1.0 - 1e-12) || r > self.r_out * (1.0 + 1e-12) {
            return Err(Error::Geometry(format!(
                "circle radius {r} outside [{}, {}]",
                self.r_in, self.r_out
            )));
        }
        Ok(circle_nodes(r, n, phase))
    }

    /// Polar grid of `nr` radii by `nt` angles covering the closed annulus,
    /// geometric in radius, row-major with the radial index slowest.
    ///
    /// For a disc the innermost radius is `r_out/nr` instead of 0 so every
    /// node is usable for Laurent data.
    pub fn polar_grid(&self, nr: usize, nt: usize) -> Vec<C64> {
        let mut out = Vec::with_capacity(nr * nt);
        for i in 0..nr {
            let r = self.grid_radius(i, nr);
            for k in 0..nt {
                let t = 2.0 * std::f64::consts::PI * k as f64 / nt as f64;
                out.push(C64::from_polar(r, t));
            }
        }
        out
    }

    /// Like [`polar_grid`](Self::polar_grid) but with half-step shifted
    /// angles, used as an independent validation set.
    pub fn validation_grid(&self, nr: usize, nt: usize) -> Vec<C64> {
        let mut out = Vec::with_capacity(nr * nt);
        for i in 0..nr {
            let r = self.grid_radius(i, nr);
            for k in 0..nt {
                let t = 2.0 * std::f64::consts::PI * (k as f64 + 0.5) / nt as f64;
                out.push(C64::from_polar(r, t));
            }
        }
        out
    }

    fn grid_radius(&self, i: usize, nr: usize) -> f64 {
        let lo = if self.is_disc() {
            self.r_out / nr.max(2) as f64
        } else {
            self.r_in
        };
        if nr <= 1 {
            return (lo * self.r_out).sqrt();
        }
        let s = i as f64 / (nr - 1) as f64;
        lo * (self.r_out / lo).powf(s)
    }
}

/// Nested compact exhaustion `K_0 c K_1 c ... c K_J` of annuli.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Exhaustion {
    stages: Vec<AnnularDomain>,
}

impl Exhaustion {
    /// The stage domains, innermost first.
    pub fn stages(&self) -> &[AnnularDomain] {
        &self.stages
    }

    /// Number of deformation stages (`J`), one fewer than the stage count.
    pub fn depth(&self) -> usize {
        self.stages.len() - 1
    }

    /// Builds an exhaustion from an explicit nested list.
    pub fn from_stages(stages: Vec<AnnularDomain>) -> Result<Self> {
        if stages.len() < 2 {
            return Err(Error::Geometry(
                "exhaustion needs at least two stages".into(),
            ));
        }
        for w in stages.windows(2) {
            if !w[1].strictly_contains(&w[0]) {
                return Err(Error::Geometry(format!(
                    "exhaustion stages not strictly nested: ({}, {}) then ({}, {})",
                    w[0].r_in, w[0].r_out, w[1].r_in, w[1].r_out
                )));
            }
        }
        Ok(Self { stages })
    }
}

/// Builds the geometric exhaustion `K_0 c K_1 c ... c K_stages = L` whose
/// radii interpolate between `k0` and `l` on a log scale.
///
/// Requires `k0` strictly inside `l` and `stages >= 1`. Disc domains keep the
/// inner radius at zero throughout.
pub fn build_exhaustion(k0: &AnnularDomain, l: &AnnularDomain, stages: usize) -> Result<Exhaustion> {
    if stages == 0 {
        return Err(Error::InvalidArgument("stages must be >= 1".into()));
    }
    if !l.strictly_contains(k0) {
        return Err(Error::Geometry(format!(
            "initial stage ({}, {}) not strictly inside the target ({}, {})",
            k0.r_in, k0.r_out, l.r_in, l.r_out
        )));
    }
    let mut v = Vec::with_capacity(stages + 1);
    for j in 0..=stages {
        let s = j as f64 / stages as f64;
        let r_in = if k0.is_disc() {
            0.0
        } else {
            k0.r_in * (l.r_in / k0.r_in).powf(s)
        };
        let r_out = k0.r_out * (l.r_out / k0.r_out).powf(s);
        v.push(AnnularDomain::new(r_in, r_out)?);
    }
    Exhaustion::from_stages(v)
}

/// Closed circle curve `s -> r e^{i(base_angle + 2 pi s)}`, `s` in `[0, 1]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CircleCurve {
    /// Radius of the circle.
    pub radius: f64,
    /// Angle of the parameter origin (the curve's base point).
    pub base_angle: f64,
}

impl CircleCurve {
    /// Point at curve parameter `s`.
    pub fn point(&self, s: f64) -> C64 {
        C64::from_polar(
            self.radius,
            self.base_angle + 2.0 * std::f64::consts::PI * s,
        )
    }

    /// `n` equally spaced nodes starting at the base point.
    pub fn nodes(&self, n: usize) -> Vec<C64> {
        circle_nodes(self.radius, n, self.base_angle)
    }
}

/// Homology basis of a domain: closed curves meeting only at the base point.
///
/// For an annulus the basis is the single concentric circle through the base
/// point; a disc has an empty basis.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HomologyBasis {
    curves: Vec<CircleCurve>,
}

impl HomologyBasis {
    /// Builds the basis for `domain` anchored at `x0`.
    ///
    /// Requires `x0` in the open interior so the curve stays inside.
    pub fn for_domain(domain: &AnnularDomain, x0: C64) -> Result<Self> {
        let r = x0.norm();
        if r <= domain.r_in() || r >= domain.r_out() {
            return Err(Error::Geometry(format!(
                "base point with |x0| = {r} not in the open annulus ({}, {})",
                domain.r_in(),
                domain.r_out()
            )));
        }
        let curves = if domain.is_disc() {
            Vec::new()
        } else {
            vec![CircleCurve {
                radius: r,
                base_angle: x0.im.atan2(x0.re),
            }]
        };
        Ok(Self { curves })
    }

    /// Basis curves in a fixed order.
    pub fn curves(&self) -> &[CircleCurve] {
        &self.curves
    }

    /// Number of basis curves.
    pub fn len(&self) -> usize {
        self.curves.len()
    }

    /// Whether the basis is empty (simply connected domain).
    pub fn is_empty(&self) -> bool {
        self.curves.is_empty()
    }
}

/// Finite parameter grid `P x T` with a marked fixed subset.
///
/// `P` is a list of points in a cube `[0,1]^k`, `T` a list of homotopy times
/// starting at 0; the pairs `(p, 0)` and `(q, t)` for `q` in the fixed subset
/// `Q` never move under a deformation. A nested chain of gate sets
/// `T_1 c T_2 c ... c T_J` exhausts the complement of `Q`, one per stage.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ParameterGrid {
    points: Vec<Vec<f64>>,
    q: BTreeSet<usize>,
    t_values: Vec<f64>,
    gate_chain: Vec<BTreeSet<usize>>,
}

impl ParameterGrid {
    /// Builds and validates a grid.
    ///
    /// Requirements: nonempty `points` of equal finite dimension; `t_values`
    /// starting at exactly 0, strictly increasing, within `[0, 1]`; `q`
    /// indices in range; `gate_chain` nested, disjoint from `q`, with the
    /// last set equal to the complement of `q`.
    pub fn new(
        points: Vec<Vec<f64>>,
        q: Vec<usize>,
        t_values: Vec<f64>,
        gate_chain: Vec<Vec<usize>>,
    ) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidArgument("parameter set is empty".into()));
        }
        let dim = points[0].len();
        for p in &points {
            if p.len() != dim || p.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidArgument(
                    "parameter points must share a finite dimension".into(),
                ));
            }
        }
        if t_values.is_empty() || t_values[0] != 0.0 {
            return Err(Error::InvalidArgument(
                "homotopy times must start at exactly 0".into(),
            ));
        }
        for w in t_values.windows(2) {
            if !(w[1] > w[0]) {
                return Err(Error::InvalidArgument(
                    "homotopy times must be strictly increasing".into(),
                ));
            }
        }
        if *t_values.last().unwrap() > 1.0 {
            return Err(Error::InvalidArgument(
                "homotopy times must lie in [0, 1]".into(),
            ));
        }
        let np = points.len();
        let q: BTreeSet<usize> = q.into_iter().collect();
        if q.iter().any(|&i| i >= np) {
            return Err(Error::InvalidArgument("fixed index out of range".into()));
        }
        let mut chain: Vec<BTreeSet<usize>> = Vec::with_capacity(gate_chain.len());
        for t in gate_chain {
            let t: BTreeSet<usize> = t.into_iter().collect();
            if t.iter().any(|&i| i >= np) {
                return Err(Error::InvalidArgument("gate index out of range".into()));
            }
            if !t.is_disjoint(&q) {
                return Err(Error::InvalidArgument(
                    "gate sets must avoid the fixed subset".into(),
                ));
            }
            if let Some(prev) = chain.last() {
                if !prev.is_subset(&t) {
                    return Err(Error::InvalidArgument("gate sets must be nested".into()));
                }
            }
            chain.push(t);
        }
        if let Some(last) = chain.last() {
            let complement: BTreeSet<usize> = (0..np).filter(|i| !q.contains(i)).collect();
            if *last != complement {
                return Err(Error::InvalidArgument(
                    "final gate set must exhaust the non-fixed parameters".into(),
                ));
            }
        }
        Ok(Self {
            points,
            q,
            t_values,
            gate_chain: chain,
        })
    }

    /// Number of parameter points.
    pub fn n_points(&self) -> usize {
        self.points.len()
    }

    /// Number of homotopy times.
    pub fn n_times(&self) -> usize {
        self.t_values.len()
    }

    /// Number of product nodes `|P| * |T|`.
    pub fn len(&self) -> usize {
        self.points.len() * self.t_values.len()
    }

    /// Whether the grid is empty (never true after construction).
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Parameter point by index.
    pub fn point(&self, ip: usize) -> &[f64] {
        &self.points[ip]
    }

    /// Homotopy time by index.
    pub fn time(&self, it: usize) -> f64 {
        self.t_values[it]
    }

    /// Number of gate stages in the chain.
    pub fn n_stages(&self) -> usize {
        self.gate_chain.len()
    }

    /// Product index of the pair `(ip, it)`.
    pub fn index(&self, ip: usize, it: usize) -> usize {
        ip * self.t_values.len() + it
    }

    /// Inverse of [`index`](Self::index).
    pub fn split(&self, idx: usize) -> (usize, usize) {
        (idx / self.t_values.len(), idx % self.t_values.len())
    }

    /// Whether the product node is pinned by the deformation boundary data.
    pub fn is_fixed(&self, idx: usize) -> bool {
        let (ip, it) = self.split(idx);
        it == 0 || self.q.contains(&ip)
    }

    /// Product indices of all pinned nodes.
    pub fn fixed_indices(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.is_fixed(i)).collect()
    }

    /// Product indices gated at `stage` (1-based): parameters in the stage's
    /// gate set with time at least `t_cut`.
    pub fn gated_indices(&self, stage: usize, t_cut: f64) -> Result<Vec<usize>> {
        let set = self
            .gate_chain
            .get(stage.wrapping_sub(1))
            .ok_or_else(|| Error::InvalidArgument(format!("no gate stage {stage}")))?;
        Ok((0..self.len())
            .filter(|&i| {
                let (ip, it) = self.split(i);
                set.contains(&ip) && self.t_values[it] >= t_cut - 1e-12
            })
            .collect())
    }

    /// Euclidean metric on the product of the parameter cube and the time
    /// axis.
    pub fn distance(&self, a: usize, b: usize) -> f64 {
        let (ap, at) = self.split(a);
        let (bp, bt) = self.split(b);
        let mut s = (self.t_values[at] - self.t_values[bt]).powi(2);
        for (x, y) in self.points[ap].iter().zip(&self.points[bp]) {
            s += (x - y) * (x - y);
        }
        s.sqrt()
    }

    /// Smallest positive node distance, the metric mesh of the grid.
    pub fn min_spacing(&self) -> f64 {
        let mut best = f64::INFINITY;
        for a in 0..self.len() {
            for b in (a + 1)..self.len() {
                let d = self.distance(a, b);
                if d > 0.0 && d < best {
                    best = d;
                }
            }
        }
        best
    }
}

/// Continuous cut-off weights on a finite grid.
///
/// Returns `phi` with `phi = 0` exactly on `y`, `phi = 1` exactly on `z`, and
/// `phi(d) = dist(d, y) / (dist(d, y) + dist(d, z))` elsewhere. Requires `y`
/// and `z` nonempty and disjoint.
pub fn urysohn_weights(
    grid: &ParameterGrid,
    y: &BTreeSet<usize>,
    z: &BTreeSet<usize>,
) -> Result<Vec<f64>> {
    if y.is_empty() || z.is_empty() {
        return Err(Error::InvalidArgument(
            "cut-off weight sets must be nonempty".into(),
        ));
    }
    if !y.is_disjoint(z) {
        return Err(Error::InvalidArgument(
            "cut-off weight sets must be disjoint".into(),
        ));
    }
    if y.iter().chain(z.iter()).any(|&i| i >= grid.len()) {
        return Err(Error::InvalidArgument("cut-off index out of range".into()));
    }
    let dist_to = |idx: usize, set: &BTreeSet<usize>| -> f64 {
        set.iter()
            .map(|&s| grid.distance(idx, s))
            .fold(f64::INFINITY, f64::min)
    };
    Ok((0..grid.len())
        .map(|i| {
            if y.contains(&i) {
                0.0
            } else if z.contains(&i) {
                1.0
            } else {
                let dy = dist_to(i, y);
                let dz = dist_to(i, z);
                dy / (dy + dz)
            }
        })
        .collect())
}

/// `n` equally spaced points on the circle of radius `r` with phase offset.
pub fn circle_nodes(r: f64, n: usize, phase: f64) -> Vec<C64> {
    (0..n)
        .map(|k| C64::from_polar(r, phase + 2.0 * std::f64::consts::PI * k as f64 / n as f64))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn annulus_rejects_bad_radii() {
        assert!(AnnularDomain::new(1.0, 1.0).is_err());
        assert!(AnnularDomain::new(-0.1, 1.0).is_err());
        assert!(AnnularDomain::new(0.5, f64::INFINITY).is_err());
        assert!(AnnularDomain::new(0.0, 2.0).unwrap().is_disc());
    }

    #[test]
    fn containment_accepts_boundary() {
        let a = AnnularDomain::new(0.5, 2.0).unwrap();
        assert!(a.contains(C64::new(0.5, 0.0)));
        assert!(a.contains(C64::new(0.0, 2.0)));
        assert!(!a.contains(C64::new(0.49, 0.0)));
        assert!(!a.contains(C64::new(2.1, 0.0)));
    }

    #[test]
    fn geometric_exhaustion_interpolates_radii() {
        let k0 = AnnularDomain::new(0.6, 1.8).unwrap();
        let l = AnnularDomain::new(0.5, 2.0).unwrap();
        let e = build_exhaustion(&k0, &l, 2).unwrap();
        assert_eq!(e.depth(), 2);
        let mid = e.stages()[1];
        assert!((mid.r_in() - 0.5477225575051661).abs() < 1e-15);
        assert!((mid.r_out() - 1.8973665961010275).abs() < 1e-15);
        assert_eq!(e.stages()[2], l);
    }

    #[test]
    fn exhaustion_requires_strict_nesting() {
        let k0 = AnnularDomain::new(0.5, 2.0).unwrap();
        let l = AnnularDomain::new(0.5, 2.0).unwrap();
        assert!(build_exhaustion(&k0, &l, 2).is_err());
    }

    #[test]
    fn homology_basis_is_the_core_circle() {
        let a = AnnularDomain::new(0.5, 2.0).unwrap();
        let b = HomologyBasis::for_domain(&a, C64::new(1.0, 0.0)).unwrap();
        assert_eq!(b.len(), 1);
        let c = b.curves()[0];
        assert!((c.radius - 1.0).abs() < 1e-15);
        assert!((c.point(0.0) - C64::new(1.0, 0.0)).norm() < 1e-15);
        assert!((c.point(0.25) - C64::new(0.0, 1.0)).norm() < 1e-12);

        let disc = AnnularDomain::new(0.0, 2.0).unwrap();
        assert!(HomologyBasis::for_domain(&disc, C64::new(1.0, 0.0))
            .unwrap()
            .is_empty());
        assert!(HomologyBasis::for_domain(&a, C64::new(0.5, 0.0)).is_err());
    }

    fn demo_grid() -> ParameterGrid {
        let points = vec![vec![0.0], vec![0.25], vec![0.5], vec![0.75], vec![1.0]];
        let times = vec![0.0, 0.25, 0.5, 0.75, 1.0];
        ParameterGrid::new(
            points,
            vec![0],
            times,
            vec![vec![2, 3, 4], vec![1, 2, 3, 4]],
        )
        .unwrap()
    }

    #[test]
    fn grid_indexing_round_trips() {
        let g = demo_grid();
        assert_eq!(g.len(), 25);
        for idx in 0..g.len() {
            let (ip, it) = g.split(idx);
            assert_eq!(g.index(ip, it), idx);
        }
        assert!(g.is_fixed(g.index(0, 3)));
        assert!(g.is_fixed(g.index(3, 0)));
        assert!(!g.is_fixed(g.index(3, 1)));
        assert_eq!(g.fixed_indices().len(), 5 + 4);
    }

    #[test]
    fn grid_validates_chain() {
        let points = vec![vec![0.0], vec![1.0]];
        assert!(ParameterGrid::new(
            points.clone(),
            vec![0],
            vec![0.0, 1.0],
            vec![vec![0]],
        )
        .is_err());
        assert!(ParameterGrid::new(
            points.clone(),
            vec![0],
            vec![0.1, 1.0],
            vec![vec![1]],
        )
        .is_err());
        assert!(ParameterGrid::new(points, vec![0], vec![0.0, 1.0], vec![vec![1]]).is_ok());
    }

    #[test]
    fn gated_indices_honor_cut() {
        let g = demo_grid();
        let gated = g.gated_indices(1, 0.5).unwrap();
        assert_eq!(gated.len(), 3 * 3);
        for &i in &gated {
            let (ip, it) = g.split(i);
            assert!(ip >= 2);
            assert!(g.time(it) >= 0.5);
        }
    }

    #[test]
    fn urysohn_weights_are_exact_on_the_sets() {
        let g = demo_grid();
        let z: BTreeSet<usize> = g.gated_indices(1, 0.5).unwrap().into_iter().collect();
        let dil = g.min_spacing() * 1.001;
        let y: BTreeSet<usize> = (0..g.len())
            .filter(|&i| {
                g.is_fixed(i) || z.iter().all(|&s| g.distance(i, s) > dil)
            })
            .collect();
        assert!(y.is_disjoint(&z));
        let phi = urysohn_weights(&g, &y, &z).unwrap();
        for &i in &z {
            assert_eq!(phi[i], 1.0);
        }
        for &i in &y {
            assert_eq!(phi[i], 0.0);
        }
        for (i, &p) in phi.iter().enumerate() {
            assert!((0.0..=1.0).contains(&p), "phi[{i}] = {p}");
        }
    }

    #[test]
    fn urysohn_rejects_overlap() {
        let g = demo_grid();
        let y: BTreeSet<usize> = [0, 1].into_iter().collect();
        let z: BTreeSet<usize> = [1, 2].into_iter().collect();
        assert!(urysohn_weights(&g, &y, &z).is_err());
    }
}
