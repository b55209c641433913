//! Lattice configurations: per-site position or hole, the hole-filling extension, cached
//! triangle Jacobians, the hard constraints and local moves.
//!
//! Positions are stored as displacements `u(x) = omega(x) - l * embed(x)` on the
//! fundamental domain, so the periodicity `omega(x + N z) = omega(x) + l N z` holds by
//! construction. For a hole, `u` is unused and kept at zero; its filled value is the mean
//! of the six neighbor displacements (the lattice vectors `l tau^j` average to zero).

use std::collections::BTreeSet;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{jacobian_from_corners, uniform_disk, Mat2, TrianglePlacement, Vec2};
use crate::lattice::{embed, LatticeTorus, Orientation, DIRECTIONS};
use crate::potential::{PotentialKind, PotentialSpec, Spline};
use crate::scalar::Scalar;

pub const SNAPSHOT_VERSION: &str = "trilattice-snapshot/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EdgeClass {
    Inner,
    Boundary,
    Absent,
}

/// A single-site change of a configuration. Displacements are relative to `l * embed(site)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SiteMove<T> {
    Displace { site: usize, to: Vec2<T> },
    CreateDefect { site: usize },
    AnnihilateDefect { site: usize, to: Vec2<T> },
}

impl<T> SiteMove<T> {
    pub fn site(&self) -> usize {
        match *self {
            SiteMove::Displace { site, .. }
            | SiteMove::CreateDefect { site }
            | SiteMove::AnnihilateDefect { site, .. } => site,
        }
    }
}

/// Why a proposed move leaves the allowed configuration space.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rejection {
    /// The move does not apply to the site's current state (e.g. displacing a hole).
    NotApplicable,
    /// (Omega1): bond between the two sites leaves `(1 - alpha, 1 + alpha)`.
    BondLength { site: usize, neighbor: usize },
    /// (Omega2): another defect within distance 2.
    Isolation { site: usize, other: usize },
    /// (Omega4): non-positive Jacobian determinant.
    Orientation { triangle: usize },
}

/// Cache updates for an admissible move, computed before it is applied.
#[derive(Debug, Clone, Default)]
pub struct PendingChange<T> {
    pub(crate) hat: Vec<(usize, Vec2<T>)>,
    pub(crate) jac: Vec<(usize, Mat2<T>)>,
}

impl<T> PendingChange<T> {
    pub fn new() -> Self {
        Self { hat: Vec::with_capacity(2), jac: Vec::with_capacity(12) }
    }

    fn clear(&mut self) {
        self.hat.clear();
        self.jac.clear();
    }

    /// Triangles whose Jacobian the move changes.
    pub fn triangles(&self) -> impl Iterator<Item = usize> + '_ {
        self.jac.iter().map(|(t, _)| *t)
    }
}

/// Result of a full constraint scan.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ConstraintReport {
    pub omega1: bool,
    pub omega2: bool,
    pub omega4: bool,
    /// Present bonds outside the admissible window.
    pub bad_edges: Vec<usize>,
    /// Defect pairs closer than allowed.
    pub bad_pairs: Vec<(usize, usize)>,
    /// Triangles with non-positive Jacobian determinant.
    pub bad_triangles: Vec<usize>,
}

impl ConstraintReport {
    pub fn all_ok(&self) -> bool {
        self.omega1 && self.omega2 && self.omega4
    }
}

/// Unit-spacing reference data per orientation: the inverse of the matrix of edge offsets
/// from the base corner, and the reference triangle itself.
#[derive(Debug, Clone)]
struct Reference<T> {
    inverse: [Mat2<T>; 2],
    placement: [TrianglePlacement<T>; 2],
}

impl<T: Scalar> Reference<T> {
    fn new() -> Self {
        let place = |o: Orientation| {
            let c = o.corner_offsets().map(|(p, q)| Vec2::from_f64(embed(p, q)));
            TrianglePlacement::new(c[0], c[1], c[2])
        };
        let placement = [place(Orientation::Up), place(Orientation::Down)];
        let inverse = placement.map(|t| {
            let [a, b, c] = t.corners;
            Mat2::from_columns(b - a, c - a).inverse().expect("reference triangle is non-degenerate")
        });
        Self { inverse, placement }
    }
}

#[derive(Debug, Clone)]
pub struct Configuration<T> {
    lattice: Arc<LatticeTorus>,
    spec: Arc<PotentialSpec<T>>,
    disp: Vec<Vec2<T>>,
    present: Vec<bool>,
    hat: Vec<Vec2<T>>,
    jac: Vec<Mat2<T>>,
    defects: BTreeSet<usize>,
    reference: Reference<T>,
    /// `l * tau^j`.
    bond_rest: [Vec2<T>; 6],
}

impl<T: Scalar> Configuration<T> {
    /// The standard configuration `v -> l v`.
    pub fn standard(lattice: Arc<LatticeTorus>, spec: Arc<PotentialSpec<T>>) -> Self {
        let n = lattice.num_sites();
        Self::from_parts(lattice, spec, vec![Vec2::zero(); n], vec![true; n])
            .expect("standard configuration is well formed")
    }

    /// Build from per-site displacements and presence flags. Fails if the lattice is too
    /// small for defects or if two holes are adjacent (the fill would be undefined); other
    /// constraint violations are left to [`Configuration::check_constraints`].
    pub fn from_parts(
        lattice: Arc<LatticeTorus>,
        spec: Arc<PotentialSpec<T>>,
        mut disp: Vec<Vec2<T>>,
        present: Vec<bool>,
    ) -> Result<Self> {
        let n = lattice.num_sites();
        if disp.len() != n || present.len() != n {
            return Err(Error::InvalidParameter(format!(
                "expected {n} sites, got {} displacements and {} flags",
                disp.len(),
                present.len()
            )));
        }
        let defects: BTreeSet<usize> = (0..n).filter(|&s| !present[s]).collect();
        if !defects.is_empty() {
            lattice.isolation_zone(0)?;
        }
        for &s in &defects {
            disp[s] = Vec2::zero();
        }
        let l = spec.l;
        let bond_rest = DIRECTIONS.map(|(p, q)| Vec2::from_f64(embed(p, q)) * l);
        let mut c = Self {
            lattice,
            spec,
            disp,
            present,
            hat: Vec::new(),
            jac: Vec::new(),
            defects,
            reference: Reference::new(),
            bond_rest,
        };
        c.hat = c.fresh_hat()?;
        c.jac = c.fast_jacobians(&c.hat);
        Ok(c)
    }

    /// Independent per-site disk perturbation of the standard configuration, radius
    /// `r in (0, alpha/4)`; such configurations satisfy all constraints.
    pub fn near_standard_sample<R: Rng + ?Sized>(
        lattice: Arc<LatticeTorus>,
        spec: Arc<PotentialSpec<T>>,
        r: T,
        rng: &mut R,
    ) -> Result<Self> {
        let max = spec.alpha / T::lit(4.0);
        if !(r > T::zero() && r < max) {
            return Err(Error::RadiusTooLarge { r: r.as_f64(), max: max.as_f64() });
        }
        let n = lattice.num_sites();
        let disp = (0..n).map(|_| uniform_disk(rng, r)).collect();
        Self::from_parts(lattice, spec, disp, vec![true; n])
    }

    pub fn lattice(&self) -> &Arc<LatticeTorus> {
        &self.lattice
    }

    pub fn spec(&self) -> &Arc<PotentialSpec<T>> {
        &self.spec
    }

    /// Same state, different parameters (e.g. another `beta`).
    pub fn with_spec(&self, spec: Arc<PotentialSpec<T>>) -> Result<Self> {
        Self::from_parts(self.lattice.clone(), spec, self.disp.clone(), self.present.clone())
    }

    pub fn n(&self) -> usize {
        self.lattice.n()
    }

    #[inline]
    pub fn is_present(&self, s: usize) -> bool {
        self.present[s]
    }

    #[inline]
    pub fn displacement(&self, s: usize) -> Vec2<T> {
        self.disp[s]
    }

    pub fn displacements(&self) -> &[Vec2<T>] {
        &self.disp
    }

    pub fn presence(&self) -> &[bool] {
        &self.present
    }

    /// Displacement of the hole-filled extension at `s`.
    #[inline]
    pub fn hat_displacement(&self, s: usize) -> Vec2<T> {
        self.hat[s]
    }

    pub fn defects(&self) -> &BTreeSet<usize> {
        &self.defects
    }

    pub fn defect_count(&self) -> usize {
        self.defects.len()
    }

    /// Reference position `l * embed(s)`.
    pub fn lattice_position(&self, s: usize) -> Vec2<T> {
        let site = self.lattice.site(s);
        Vec2::from_f64(site.embed()) * self.spec.l
    }

    /// `omega(s)`, or `None` for a hole.
    pub fn position(&self, s: usize) -> Option<Vec2<T>> {
        self.present[s].then(|| self.lattice_position(s) + self.disp[s])
    }

    /// `omega_hat(s)`.
    pub fn hat_position(&self, s: usize) -> Vec2<T> {
        self.lattice_position(s) + self.hat[s]
    }

    /// `l tau^j`.
    #[inline]
    pub fn rest_bond(&self, j: usize) -> Vec2<T> {
        self.bond_rest[j]
    }

    /// `omega(s + tau^j) - omega(s)` with periodic images unwrapped (ignores presence).
    #[inline]
    pub fn bond_vector(&self, s: usize, j: usize) -> Vec2<T> {
        let t = self.lattice.neighbors(s)[j];
        self.bond_rest[j] + self.disp[t] - self.disp[s]
    }

    /// `omega_hat(s + tau^j) - omega_hat(s)`.
    #[inline]
    pub fn hat_bond_vector(&self, s: usize, j: usize) -> Vec2<T> {
        let t = self.lattice.neighbors(s)[j];
        self.bond_rest[j] + self.hat[t] - self.hat[s]
    }

    /// Mean of the six neighbor positions of a hole, as an absolute position.
    pub fn fill_hole_value(&self, s: usize) -> Result<Vec2<T>> {
        if self.present[s] {
            return Err(Error::NotAHole { site: s });
        }
        Ok(self.lattice_position(s) + self.fill_displacement(s)?)
    }

    fn fill_displacement(&self, s: usize) -> Result<Vec2<T>> {
        let mut sum = Vec2::zero();
        for &t in self.lattice.neighbors(s) {
            if !self.present[t] {
                return Err(Error::AdjacentHoles { site: s, neighbor: t });
            }
            sum += self.disp[t];
        }
        Ok(sum * T::lit(1.0 / 6.0))
    }

    fn fresh_hat(&self) -> Result<Vec<Vec2<T>>> {
        (0..self.lattice.num_sites())
            .map(|s| if self.present[s] { Ok(self.disp[s]) } else { self.fill_displacement(s) })
            .collect()
    }

    /// `l I + [du_1 du_2] E^{-1}` with `du_k` the extension's displacement differences along
    /// the reference edges `E`.
    #[inline]
    fn triangle_jacobian(&self, t: usize, hat: impl Fn(usize) -> Vec2<T>) -> Mat2<T> {
        let [c0, c1, c2] = *self.lattice.triangle_corners(t);
        let h0 = hat(c0);
        let d = Mat2::from_columns(hat(c1) - h0, hat(c2) - h0);
        Mat2::scaled_identity(self.spec.l) + d * self.reference.inverse[t % 2]
    }

    fn fast_jacobians(&self, hat: &[Vec2<T>]) -> Vec<Mat2<T>> {
        (0..self.lattice.num_triangles()).map(|t| self.triangle_jacobian(t, |s| hat[s])).collect()
    }

    /// Image of triangle `t` under the extension, corners unwrapped relative to its base site.
    pub fn triangle_image(&self, t: usize) -> TrianglePlacement<T> {
        self.image_with(t, &self.hat)
    }

    fn image_with(&self, t: usize, hat: &[Vec2<T>]) -> TrianglePlacement<T> {
        let corners = self.lattice.triangle_corners(t);
        let base = self.lattice_position(corners[0]);
        let refc = self.reference.placement[t % 2].corners;
        let l = self.spec.l;
        let img = [0, 1, 2].map(|k| base + refc[k] * l + hat[corners[k]]);
        TrianglePlacement { corners: img }
    }

    /// Unit-spacing reference triangle of `t`'s orientation, anchored at the origin.
    pub fn reference_triangle(&self, t: usize) -> TrianglePlacement<T> {
        self.reference.placement[t % 2]
    }

    /// Cached Jacobians of the extension, one per triangle.
    pub fn extension_jacobians(&self) -> &[Mat2<T>] {
        &self.jac
    }

    #[inline]
    pub fn jacobian(&self, t: usize) -> Mat2<T> {
        self.jac[t]
    }

    /// Jacobians recomputed from corner images via [`jacobian_from_corners`].
    pub fn recompute_jacobians(&self) -> Result<Vec<Mat2<T>>> {
        let hat = self.fresh_hat()?;
        (0..self.lattice.num_triangles())
            .map(|t| jacobian_from_corners(&self.reference.placement[t % 2], &self.image_with(t, &hat)))
            .collect()
    }

    /// Compare caches against a full recomputation; returns the largest deviation.
    pub fn cache_deviation(&self) -> Result<T> {
        let hat = self.fresh_hat()?;
        let jac = self.recompute_jacobians()?;
        let mut worst = T::zero();
        for (a, b) in self.hat.iter().zip(&hat) {
            worst = worst.max((*a - *b).norm());
        }
        for (a, b) in self.jac.iter().zip(&jac) {
            worst = worst.max((*a - *b).frobenius());
        }
        Ok(worst)
    }

    /// Rebuild all caches from the stored state.
    pub fn refresh_caches(&mut self) -> Result<()> {
        self.hat = self.fresh_hat()?;
        self.jac = self.fast_jacobians(&self.hat);
        Ok(())
    }

    /// Full scan of (Omega1), (Omega2), (Omega4) from the raw state (caches not consulted).
    pub fn check_constraints(&self) -> ConstraintReport {
        let lat = &self.lattice;
        let mut report = ConstraintReport::default();
        for e in 0..lat.num_edges() {
            let [a, b] = *lat.edge_ends(e);
            if self.present[a] && self.present[b] {
                let j = lat.edge(e).direction as usize;
                let r = self.bond_vector(a, j).norm();
                if !self.spec.bond_admissible(r) {
                    report.bad_edges.push(e);
                }
            }
        }
        let defects: Vec<usize> = self.defects.iter().copied().collect();
        for (i, &a) in defects.iter().enumerate() {
            for &b in &defects[i + 1..] {
                if !lat.torus_graph_distance_ok(lat.site(a), lat.site(b)) {
                    report.bad_pairs.push((a, b));
                }
            }
        }
        match self.recompute_jacobians() {
            Ok(jac) => {
                for (t, m) in jac.iter().enumerate() {
                    if !(m.det() > T::zero()) {
                        report.bad_triangles.push(t);
                    }
                }
            }
            // Adjacent holes: the extension is undefined on their triangles.
            Err(_) => {
                for &d in &defects {
                    report.bad_triangles.extend(lat.layer_u0(d).iter().copied());
                }
            }
        }
        report.omega1 = report.bad_edges.is_empty();
        report.omega2 = report.bad_pairs.is_empty();
        report.omega4 = report.bad_triangles.is_empty();
        report
    }

    pub fn edge_class(&self, e: usize) -> EdgeClass {
        let [a, b] = *self.lattice.edge_ends(e);
        if !self.present[a] || !self.present[b] {
            EdgeClass::Absent
        } else if self.lattice.edge_common_neighbors(e).iter().any(|&z| !self.present[z]) {
            EdgeClass::Boundary
        } else {
            EdgeClass::Inner
        }
    }

    pub fn classify_edges(&self) -> Vec<EdgeClass> {
        (0..self.lattice.num_edges()).map(|e| self.edge_class(e)).collect()
    }

    pub fn is_triangle_present(&self, t: usize) -> bool {
        self.lattice.triangle_corners(t).iter().all(|&c| self.present[c])
    }

    pub fn present_triangles(&self) -> Vec<usize> {
        (0..self.lattice.num_triangles()).filter(|&t| self.is_triangle_present(t)).collect()
    }

    /// Check a move against the hard constraints and compute the cache updates it implies.
    /// Energy is not consulted.
    pub fn admissibility(&self, mv: &SiteMove<T>, out: &mut PendingChange<T>) -> Result<(), Rejection> {
        out.clear();
        let lat = &*self.lattice;
        match *mv {
            SiteMove::Displace { site, to } => {
                if !self.present[site] {
                    return Err(Rejection::NotApplicable);
                }
                for (j, &t) in lat.neighbors(site).iter().enumerate() {
                    if self.present[t] {
                        let r = (self.bond_rest[j] + self.disp[t] - to).norm();
                        if !self.spec.bond_admissible(r) {
                            return Err(Rejection::BondLength { site, neighbor: t });
                        }
                    }
                }
                out.hat.push((site, to));
                // At most one hole can neighbor `site` under (Omega2).
                for &h in lat.neighbors(site) {
                    if !self.present[h] {
                        let mut sum = Vec2::zero();
                        for &t in lat.neighbors(h) {
                            sum += if t == site { to } else { self.disp[t] };
                        }
                        out.hat.push((h, sum * T::lit(1.0 / 6.0)));
                    }
                }
            }
            SiteMove::CreateDefect { site } => {
                if !self.present[site] {
                    return Err(Rejection::NotApplicable);
                }
                let zone = lat.isolation_zone(site).map_err(|_| Rejection::NotApplicable)?;
                if let Some(&other) = zone.iter().find(|&&z| !self.present[z]) {
                    return Err(Rejection::Isolation { site, other });
                }
                let mut sum = Vec2::zero();
                for &t in lat.neighbors(site) {
                    sum += self.disp[t];
                }
                out.hat.push((site, sum * T::lit(1.0 / 6.0)));
            }
            SiteMove::AnnihilateDefect { site, to } => {
                if self.present[site] {
                    return Err(Rejection::NotApplicable);
                }
                for (j, &t) in lat.neighbors(site).iter().enumerate() {
                    let r = (self.bond_rest[j] + self.disp[t] - to).norm();
                    if !self.spec.bond_admissible(r) {
                        return Err(Rejection::BondLength { site, neighbor: t });
                    }
                }
                out.hat.push((site, to));
            }
        }
        let hat_at = |s: usize| -> Vec2<T> {
            out.hat.iter().find(|(k, _)| *k == s).map_or(self.hat[s], |(_, v)| *v)
        };
        let mut jac = std::mem::take(&mut out.jac);
        for &(s, _) in &out.hat {
            for &t in lat.layer_u0(s) {
                if jac.iter().any(|(k, _)| *k == t) {
                    continue;
                }
                let m = self.triangle_jacobian(t, hat_at);
                if !(m.det() > T::zero()) {
                    out.jac = jac;
                    return Err(Rejection::Orientation { triangle: t });
                }
                jac.push((t, m));
            }
        }
        out.jac = jac;
        Ok(())
    }

    /// Apply a move whose [`PendingChange`] came from [`Configuration::admissibility`].
    pub fn apply(&mut self, mv: &SiteMove<T>, change: &PendingChange<T>) {
        match *mv {
            SiteMove::Displace { site, to } => self.disp[site] = to,
            SiteMove::CreateDefect { site } => {
                self.present[site] = false;
                self.disp[site] = Vec2::zero();
                self.defects.insert(site);
            }
            SiteMove::AnnihilateDefect { site, to } => {
                self.present[site] = true;
                self.disp[site] = to;
                self.defects.remove(&site);
            }
        }
        for &(s, v) in &change.hat {
            self.hat[s] = v;
        }
        for &(t, m) in &change.jac {
            self.jac[t] = m;
        }
    }

    /// Check and apply in one go (no energy criterion).
    pub fn try_apply(&mut self, mv: &SiteMove<T>) -> Result<(), Rejection> {
        let mut change = PendingChange::new();
        self.admissibility(mv, &mut change)?;
        self.apply(mv, &change);
        Ok(())
    }

    /// Translate every lattice label by `v` (the shift `theta_v`).
    pub fn shifted(&self, v: (i64, i64)) -> Self {
        let lat = &self.lattice;
        let n = lat.num_sites();
        let mut disp = vec![Vec2::zero(); n];
        let mut present = vec![true; n];
        for s in 0..n {
            let target = lat.site_index(lat.site(s).offset(v));
            disp[target] = self.disp[s];
            present[target] = self.present[s];
        }
        Self::from_parts(lat.clone(), self.spec.clone(), disp, present)
            .expect("shift preserves hole isolation")
    }

    pub fn to_snapshot(&self) -> Snapshot {
        Snapshot {
            version: SNAPSHOT_VERSION.to_string(),
            n: self.n(),
            spec: SpecRecord::from_spec(&self.spec),
            sites: (0..self.lattice.num_sites())
                .map(|s| SiteRecord {
                    present: self.present[s],
                    ux: self.disp[s].x.as_f64(),
                    uy: self.disp[s].y.as_f64(),
                })
                .collect(),
        }
    }

    pub fn from_snapshot(snap: &Snapshot) -> Result<Self> {
        if snap.version != SNAPSHOT_VERSION {
            return Err(Error::Snapshot(format!("unsupported version {:?}", snap.version)));
        }
        let lattice = Arc::new(LatticeTorus::new(snap.n)?);
        let spec = Arc::new(snap.spec.to_spec()?);
        let disp = snap.sites.iter().map(|s| Vec2::new(T::lit(s.ux), T::lit(s.uy))).collect();
        let present = snap.sites.iter().map(|s| s.present).collect();
        Self::from_parts(lattice, spec, disp, present)
    }
}

/// Serializable state of a configuration. Floats are stored as f64, which is lossless
/// for both supported scalar types.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub version: String,
    pub n: usize,
    pub spec: SpecRecord,
    pub sites: Vec<SiteRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SiteRecord {
    pub present: bool,
    pub ux: f64,
    pub uy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpecRecord {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub knots: Vec<(f64, f64)>,
    pub alpha: f64,
    pub l: f64,
    pub m: f64,
    pub beta: f64,
}

impl SpecRecord {
    pub fn from_spec<T: Scalar>(spec: &PotentialSpec<T>) -> Self {
        let (kind, kappa, knots) = match &spec.kind {
            PotentialKind::Quadratic { kappa } => ("quadratic", Some(kappa.as_f64()), Vec::new()),
            PotentialKind::Tabulated(s) => {
                ("tabulated", None, s.knots().map(|(r, v)| (r.as_f64(), v.as_f64())).collect())
            }
        };
        Self {
            kind: kind.to_string(),
            kappa,
            knots,
            alpha: spec.alpha.as_f64(),
            l: spec.l.as_f64(),
            m: spec.m.as_f64(),
            beta: spec.beta.as_f64(),
        }
    }

    pub fn to_spec<T: Scalar>(&self) -> Result<PotentialSpec<T>> {
        let kind = match self.kind.as_str() {
            "quadratic" => PotentialKind::Quadratic {
                kappa: T::lit(self.kappa.ok_or_else(|| Error::Snapshot("missing kappa".into()))?),
            },
            "tabulated" => {
                let knots: Vec<(T, T)> =
                    self.knots.iter().map(|&(r, v)| (T::lit(r), T::lit(v))).collect();
                PotentialKind::Tabulated(Spline::new(&knots)?)
            }
            other => return Err(Error::Snapshot(format!("unknown potential kind {other:?}"))),
        };
        Ok(PotentialSpec {
            kind,
            alpha: T::lit(self.alpha),
            l: T::lit(self.l),
            m: T::lit(self.m),
            beta: T::lit(self.beta),
        })
    }
}
