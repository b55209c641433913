//! Combinatorics of the triangular lattice `Z + tau Z` (tau = e^{i pi/3}) and its
//! `N`-periodic quotient.
//!
//! Sites are stored in the integer basis `(1, tau)`: `(p, q)` embeds at
//! `p * (1, 0) + q * (1/2, sqrt(3)/2)`. The fundamental domain is `{0..N-1}^2` and
//! the flat index of `(p, q)` is `q * N + p`.
//!
//! Directions `tau^j`, `j = 0..5`, are ordered counterclockwise starting at `+1`:
//! `(1,0), (0,1), (-1,1), (-1,0), (0,-1), (1,-1)` (using `tau^2 = tau - 1`).

use crate::error::{Error, Result};

/// The six neighbor offsets `tau^j` in the `(1, tau)` basis, counterclockwise from `+1`.
pub const DIRECTIONS: [(i64, i64); 6] = [(1, 0), (0, 1), (-1, 1), (-1, 0), (0, -1), (1, -1)];

/// Corner offsets (relative to the base site) of an up triangle `x, x+1, x+tau`.
pub const UP_CORNERS: [(i64, i64); 3] = [(0, 0), (1, 0), (0, 1)];
/// Corner offsets of a down triangle `x, x+tau, x+tau^2`.
pub const DOWN_CORNERS: [(i64, i64); 3] = [(0, 0), (0, 1), (-1, 1)];

/// Smallest torus on which the periodic quotient is a simple graph.
pub const MIN_N: usize = 3;
/// Smallest torus on which defect neighborhoods (second layer, isolation) do not wrap.
pub const MIN_N_DEFECTS: usize = 5;

const SQRT3_2: f64 = 0.866_025_403_784_438_6;

/// Euclidean embedding of the lattice point `(p, q)` at unit spacing.
#[inline]
pub fn embed(p: i64, q: i64) -> [f64; 2] {
    [p as f64 + 0.5 * q as f64, SQRT3_2 * q as f64]
}

/// Hexagonal (graph) distance of an offset in the `(1, tau)` basis.
#[inline]
pub fn hex_norm(p: i64, q: i64) -> i64 {
    (p.abs() + q.abs() + (p + q).abs()) / 2
}

/// A lattice site in canonical form `0 <= p, q < N`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SiteIndex {
    pub p: i64,
    pub q: i64,
}

impl SiteIndex {
    pub fn new(p: i64, q: i64) -> Self {
        Self { p, q }
    }

    pub fn canonical(self, n: usize) -> Self {
        let n = n as i64;
        Self { p: self.p.rem_euclid(n), q: self.q.rem_euclid(n) }
    }

    pub fn offset(self, d: (i64, i64)) -> Self {
        Self { p: self.p + d.0, q: self.q + d.1 }
    }

    pub fn embed(self) -> [f64; 2] {
        embed(self.p, self.q)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Orientation {
    /// `Delta_{x,1}` with corners `x, x+1, x+tau`.
    Up,
    /// `Delta_{x,tau}` with corners `x, x+tau, x+tau^2`.
    Down,
}

impl Orientation {
    pub fn corner_offsets(self) -> [(i64, i64); 3] {
        match self {
            Orientation::Up => UP_CORNERS,
            Orientation::Down => DOWN_CORNERS,
        }
    }
}

/// Undirected edge `{x, x + tau^direction}`, `direction` in `{0, 1, 2}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EdgeId {
    pub site: usize,
    pub direction: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TriangleId {
    pub site: usize,
    pub orientation: Orientation,
}

/// Immutable lookup tables for the `N x N` periodic triangular lattice.
#[derive(Debug, Clone)]
pub struct LatticeTorus {
    n: usize,
    neighbors: Vec<[usize; 6]>,
    corners: Vec<[usize; 3]>,
    edge_ends: Vec<[usize; 2]>,
    edge_triangles: Vec<[usize; 2]>,
    u0: Vec<[usize; 6]>,
    u1: Option<Vec<[usize; 18]>>,
    isolation: Option<Vec<[usize; 18]>>,
}

impl LatticeTorus {
    pub fn new(n: usize) -> Result<Self> {
        if n < MIN_N {
            return Err(Error::LatticeTooSmall { n, min: MIN_N, what: "the periodic lattice" });
        }
        let n_sites = n * n;
        let ni = n as i64;
        let index = |p: i64, q: i64| -> usize {
            (q.rem_euclid(ni) as usize) * n + p.rem_euclid(ni) as usize
        };
        let coords = |s: usize| -> (i64, i64) { ((s % n) as i64, (s / n) as i64) };

        let mut neighbors = Vec::with_capacity(n_sites);
        for s in 0..n_sites {
            let (p, q) = coords(s);
            neighbors.push(DIRECTIONS.map(|(dp, dq)| index(p + dp, q + dq)));
        }

        let mut corners = Vec::with_capacity(2 * n_sites);
        for s in 0..n_sites {
            let (p, q) = coords(s);
            for o in [Orientation::Up, Orientation::Down] {
                corners.push(o.corner_offsets().map(|(dp, dq)| index(p + dp, q + dq)));
            }
        }

        let mut edge_ends = Vec::with_capacity(3 * n_sites);
        let mut edge_triangles = Vec::with_capacity(3 * n_sites);
        for s in 0..n_sites {
            let (p, q) = coords(s);
            for dir in 0..3 {
                let (dp, dq) = DIRECTIONS[dir];
                edge_ends.push([s, index(p + dp, q + dq)]);
                // The two triangles sharing edge {x, x + tau^dir}.
                let tris = match dir {
                    0 => [2 * s, 2 * index(p + 1, q - 1) + 1],
                    1 => [2 * s, 2 * s + 1],
                    _ => [2 * s + 1, 2 * index(p - 1, q)],
                };
                edge_triangles.push(tris);
            }
        }

        let mut u0 = Vec::with_capacity(n_sites);
        for s in 0..n_sites {
            let (p, q) = coords(s);
            // Counterclockwise by centroid angle: 30, 90, 150, 210, 270, 330 degrees.
            u0.push([
                2 * s,
                2 * s + 1,
                2 * index(p - 1, q),
                2 * index(p, q - 1) + 1,
                2 * index(p, q - 1),
                2 * index(p + 1, q - 1) + 1,
            ]);
        }

        let (u1, isolation) = if n >= MIN_N_DEFECTS {
            let patch_triangles = second_layer_offsets();
            let iso = isolation_offsets();
            let mut u1 = Vec::with_capacity(n_sites);
            let mut isolation = Vec::with_capacity(n_sites);
            for s in 0..n_sites {
                let (p, q) = coords(s);
                u1.push(patch_triangles.map(|(dp, dq, o)| {
                    2 * index(p + dp, q + dq) + usize::from(o == Orientation::Down)
                }));
                isolation.push(iso.map(|(dp, dq)| index(p + dp, q + dq)));
            }
            (Some(u1), Some(isolation))
        } else {
            (None, None)
        };

        Ok(Self { n, neighbors, corners, edge_ends, edge_triangles, u0, u1, isolation })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn num_sites(&self) -> usize {
        self.n * self.n
    }

    pub fn num_edges(&self) -> usize {
        3 * self.n * self.n
    }

    pub fn num_triangles(&self) -> usize {
        2 * self.n * self.n
    }

    pub fn site_index(&self, s: SiteIndex) -> usize {
        let c = s.canonical(self.n);
        c.q as usize * self.n + c.p as usize
    }

    pub fn site(&self, index: usize) -> SiteIndex {
        SiteIndex::new((index % self.n) as i64, (index / self.n) as i64)
    }

    /// The six neighbors `s + tau^j`, `j = 0..5`, as flat indices.
    #[inline]
    pub fn neighbors(&self, s: usize) -> &[usize; 6] {
        &self.neighbors[s]
    }

    pub fn neighbor_sites(&self, s: SiteIndex) -> [SiteIndex; 6] {
        let i = self.site_index(s);
        self.neighbors[i].map(|j| self.site(j))
    }

    pub fn triangle_index(&self, t: TriangleId) -> usize {
        2 * t.site + usize::from(t.orientation == Orientation::Down)
    }

    pub fn triangle(&self, index: usize) -> TriangleId {
        let orientation = if index % 2 == 0 { Orientation::Up } else { Orientation::Down };
        TriangleId { site: index / 2, orientation }
    }

    /// Corners of triangle `t` as flat site indices, positively oriented.
    #[inline]
    pub fn triangle_corners(&self, t: usize) -> &[usize; 3] {
        &self.corners[t]
    }

    pub fn triangle_corner_sites(&self, t: TriangleId) -> [SiteIndex; 3] {
        self.corners[self.triangle_index(t)].map(|c| self.site(c))
    }

    pub fn edge_index(&self, e: EdgeId) -> usize {
        3 * e.site + e.direction as usize
    }

    pub fn edge(&self, index: usize) -> EdgeId {
        EdgeId { site: index / 3, direction: (index % 3) as u8 }
    }

    /// Flat index of the edge from `s` in direction `j` (0..6).
    #[inline]
    pub fn edge_from(&self, s: usize, j: usize) -> usize {
        if j < 3 {
            3 * s + j
        } else {
            3 * self.neighbors[s][j] + (j - 3)
        }
    }

    #[inline]
    pub fn edge_ends(&self, e: usize) -> &[usize; 2] {
        &self.edge_ends[e]
    }

    /// The two triangles bounded by edge `e`.
    #[inline]
    pub fn edge_triangles(&self, e: usize) -> &[usize; 2] {
        &self.edge_triangles[e]
    }

    /// The third corners of the two triangles on `e` (the common neighbors of its ends).
    pub fn edge_common_neighbors(&self, e: usize) -> [usize; 2] {
        let [a, b] = self.edge_ends[e];
        self.edge_triangles[e].map(|t| {
            *self.corners[t]
                .iter()
                .find(|&&c| c != a && c != b)
                .expect("triangle has a third corner")
        })
    }

    /// The six triangles incident to `s`, alternating up/down counterclockwise.
    #[inline]
    pub fn layer_u0(&self, s: usize) -> &[usize; 6] {
        &self.u0[s]
    }

    /// The eighteen second-layer triangles around `s`.
    pub fn layer_u1(&self, s: usize) -> Result<&[usize; 18]> {
        self.u1.as_ref().map(|u1| &u1[s]).ok_or(Error::LatticeTooSmall {
            n: self.n,
            min: MIN_N_DEFECTS,
            what: "the second triangle layer",
        })
    }

    /// The eighteen sites at Euclidean distance at most 2 from `s` (excluding `s`).
    pub fn isolation_zone(&self, s: usize) -> Result<&[usize; 18]> {
        self.isolation.as_ref().map(|z| &z[s]).ok_or(Error::LatticeTooSmall {
            n: self.n,
            min: MIN_N_DEFECTS,
            what: "defect isolation",
        })
    }

    /// Minimum-image Euclidean distance between two sites at unit spacing.
    pub fn torus_distance(&self, a: SiteIndex, b: SiteIndex) -> f64 {
        let n = self.n as i64;
        let a = a.canonical(self.n);
        let b = b.canonical(self.n);
        let (dp, dq) = ((b.p - a.p).rem_euclid(n), (b.q - a.q).rem_euclid(n));
        let mut best = f64::INFINITY;
        for i in -1..=1 {
            for j in -1..=1 {
                let [x, y] = embed(dp + i * n, dq + j * n);
                best = best.min((x * x + y * y).sqrt());
            }
        }
        best
    }

    /// Isolation predicate for two defect sites: equal, or more than distance 2 apart.
    pub fn torus_graph_distance_ok(&self, a: SiteIndex, b: SiteIndex) -> bool {
        a.canonical(self.n) == b.canonical(self.n) || self.torus_distance(a, b) > 2.0
    }
}

/// Offsets `x + n + n` (hexagonal radius 2) including the origin: 19 sites.
pub fn patch_offsets() -> Vec<(i64, i64)> {
    let mut out = Vec::with_capacity(19);
    for q in -2..=2 {
        for p in -2..=2 {
            if hex_norm(p, q) <= 2 {
                out.push((p, q));
            }
        }
    }
    out
}

fn isolation_offsets() -> [(i64, i64); 18] {
    let v: Vec<_> = patch_offsets().into_iter().filter(|&o| o != (0, 0)).collect();
    v.try_into().expect("18 offsets within distance 2")
}

/// Triangles (base offset, orientation) with all corners in the radius-2 patch,
/// minus the six incident to the origin.
fn second_layer_offsets() -> [(i64, i64, Orientation); 18] {
    let mut out = Vec::with_capacity(18);
    for q in -3..=3 {
        for p in -3..=3 {
            for o in [Orientation::Up, Orientation::Down] {
                let cs = o.corner_offsets().map(|(dp, dq)| (p + dp, q + dq));
                let inside = cs.iter().all(|&(a, b)| hex_norm(a, b) <= 2);
                let touches_origin = cs.contains(&(0, 0));
                if inside && !touches_origin {
                    out.push((p, q, o));
                }
            }
        }
    }
    out.try_into().expect("18 second-layer triangles")
}

#[cfg(test)]
mod tests {
    use std::collections::{BTreeSet, HashMap};

    use super::*;

    fn signed_area(t: &LatticeTorus, tri: usize) -> f64 {
        let id = t.triangle(tri);
        let base = t.site(id.site);
        let [a, b, c] = id.orientation.corner_offsets().map(|o| base.offset(o).embed());
        0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]))
    }

    #[test]
    fn neighbors_of_origin() {
        let t = LatticeTorus::new(5).unwrap();
        let got = t.neighbor_sites(SiteIndex::new(0, 0));
        let want = [(1, 0), (0, 1), (4, 1), (4, 0), (0, 4), (1, 4)];
        assert_eq!(got.map(|s| (s.p, s.q)), want);
    }

    #[test]
    fn neighbors_distinct_and_inverse() {
        for n in [3, 4, 5, 8] {
            let t = LatticeTorus::new(n).unwrap();
            for s in 0..t.num_sites() {
                let nb = t.neighbors(s);
                let set: BTreeSet<_> = nb.iter().collect();
                assert_eq!(set.len(), 6);
                for j in 0..6 {
                    assert_eq!(t.neighbors(nb[j])[(j + 3) % 6], s);
                }
            }
        }
    }

    #[test]
    fn counts_and_incidence() {
        for n in [3, 5, 6, 8] {
            let t = LatticeTorus::new(n).unwrap();
            assert_eq!(t.num_sites(), n * n);
            let edges: BTreeSet<_> = (0..t.num_edges())
                .map(|e| {
                    let [a, b] = *t.edge_ends(e);
                    (a.min(b), a.max(b))
                })
                .collect();
            assert_eq!(edges.len(), 3 * n * n);
            let mut edge_use: HashMap<(usize, usize), usize> = HashMap::new();
            for tri in 0..t.num_triangles() {
                let [a, b, c] = *t.triangle_corners(tri);
                for (x, y) in [(a, b), (b, c), (c, a)] {
                    assert!(t.neighbors(x).contains(&y));
                    *edge_use.entry((x.min(y), x.max(y))).or_default() += 1;
                }
            }
            assert_eq!(edge_use.len(), 3 * n * n);
            assert!(edge_use.values().all(|&k| k == 2));
            for e in 0..t.num_edges() {
                let [a, b] = *t.edge_ends(e);
                for tri in t.edge_triangles(e) {
                    let cs = t.triangle_corners(*tri);
                    assert!(cs.contains(&a) && cs.contains(&b));
                }
                for c in t.edge_common_neighbors(e) {
                    assert!(t.neighbors(a).contains(&c) && t.neighbors(b).contains(&c));
                }
            }
            for s in 0..t.num_sites() {
                for j in 0..6 {
                    let e = t.edge_from(s, j);
                    let ends = t.edge_ends(e);
                    assert!(ends.contains(&s) && ends.contains(&t.neighbors(s)[j]));
                }
            }
        }
    }

    #[test]
    fn triangle_corners_examples() {
        let t = LatticeTorus::new(5).unwrap();
        let up = t.triangle_corner_sites(TriangleId { site: 0, orientation: Orientation::Up });
        assert_eq!(up.map(|s| (s.p, s.q)), [(0, 0), (1, 0), (0, 1)]);
        let down = t.triangle_corner_sites(TriangleId { site: 0, orientation: Orientation::Down });
        assert_eq!(down.map(|s| (s.p, s.q)), [(0, 0), (0, 1), (4, 1)]);
        for tri in 0..t.num_triangles() {
            assert!((signed_area(&t, tri) - 3f64.sqrt() / 4.0).abs() < 1e-12);
        }
    }

    #[test]
    fn layer_u0_alternates_and_covers_neighbors() {
        let t = LatticeTorus::new(6).unwrap();
        for s in 0..t.num_sites() {
            let u0 = t.layer_u0(s);
            for (k, tri) in u0.iter().enumerate() {
                assert_eq!(tri % 2, k % 2);
                assert!(t.triangle_corners(*tri).contains(&s));
            }
            let corners: BTreeSet<usize> =
                u0.iter().flat_map(|tri| t.triangle_corners(*tri).iter().copied()).collect();
            let mut want: BTreeSet<usize> = t.neighbors(s).iter().copied().collect();
            want.insert(s);
            assert_eq!(corners, want);
        }
    }

    #[test]
    fn layer_u1_size_and_multiplicity() {
        let t = LatticeTorus::new(7).unwrap();
        let mut cover = vec![0usize; t.num_triangles()];
        for s in 0..t.num_sites() {
            let u1 = t.layer_u1(s).unwrap();
            let set: BTreeSet<_> = u1.iter().collect();
            assert_eq!(set.len(), 18);
            assert!(t.layer_u0(s).iter().all(|x| !set.contains(x)));
            for tri in u1 {
                cover[*tri] += 1;
            }
        }
        assert!(cover.iter().all(|&k| k <= 9));
        assert!(LatticeTorus::new(4).unwrap().layer_u1(0).is_err());
    }

    #[test]
    fn patch_has_19_sites_and_24_triangles() {
        assert_eq!(patch_offsets().len(), 19);
        assert_eq!(second_layer_offsets().len() + 6, 24);
    }

    #[test]
    fn u0_disjoint_for_far_sites() {
        let t = LatticeTorus::new(8).unwrap();
        for a in 0..t.num_sites() {
            for b in 0..t.num_sites() {
                if a != b && t.torus_distance(t.site(a), t.site(b)) > 2.0 {
                    let sa: BTreeSet<_> = t.layer_u0(a).iter().collect();
                    assert!(t.layer_u0(b).iter().all(|x| !sa.contains(x)));
                }
            }
        }
    }

    #[test]
    fn isolation_predicate() {
        let t = LatticeTorus::new(5).unwrap();
        let s = SiteIndex::new(1, 2);
        assert!(t.torus_graph_distance_ok(s, s));
        for d in DIRECTIONS {
            assert!(!t.torus_graph_distance_ok(s, s.offset(d)));
        }
        let far = s.offset((2, 1));
        assert!((t.torus_distance(s, far) - 7f64.sqrt()).abs() < 1e-12);
        assert!(t.torus_graph_distance_ok(s, far));
        // Zone agrees with the predicate.
        let si = t.site_index(s);
        let zone: BTreeSet<_> = t.isolation_zone(si).unwrap().iter().copied().collect();
        for b in 0..t.num_sites() {
            if b != si {
                assert_eq!(zone.contains(&b), !t.torus_graph_distance_ok(s, t.site(b)));
            }
        }
    }

    #[test]
    fn shift_equivariance_of_layers() {
        let t = LatticeTorus::new(6).unwrap();
        let shift = |tri: usize, v: (i64, i64)| -> usize {
            let id = t.triangle(tri);
            let base = t.site_index(t.site(id.site).offset(v));
            t.triangle_index(TriangleId { site: base, orientation: id.orientation })
        };
        for s in 0..t.num_sites() {
            for v in [(1, 0), (2, 3), (5, 1)] {
                let sv = t.site_index(t.site(s).offset(v));
                let a: BTreeSet<_> = t.layer_u0(s).iter().map(|&x| shift(x, v)).collect();
                let b: BTreeSet<_> = t.layer_u0(sv).iter().copied().collect();
                assert_eq!(a, b);
                let a: BTreeSet<_> =
                    t.layer_u1(s).unwrap().iter().map(|&x| shift(x, v)).collect();
                let b: BTreeSet<_> = t.layer_u1(sv).unwrap().iter().copied().collect();
                assert_eq!(a, b);
            }
        }
    }

    #[test]
    fn rejects_tiny_torus() {
        assert!(LatticeTorus::new(2).is_err());
    }
}
