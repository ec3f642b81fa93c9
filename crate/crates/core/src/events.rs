//! Crossing, existence, uniqueness and renormalization events on edge sets.

use std::collections::{HashSet, VecDeque};

use crate::clusters::ClusterIndex;
use crate::error::{FriError, Result};
use crate::lattice::{star_adjacent, Cube, EdgeSet, Vertex};

fn require_inside(edges: &EdgeSet, cube: &Cube) -> Result<()> {
    if edges.window().cube().contains_cube(cube) {
        Ok(())
    } else {
        Err(FriError::OutsideWindow(format!("box of radius {} at {} not inside the window", cube.radius, cube.center)))
    }
}

/// `B_x(r) ↔ ∂B_x(s)` using edges inside `B_x(s)`, `r <= s`.
pub fn box_crossing(x: &Vertex, r: i64, s: i64, edges: &EdgeSet) -> Result<bool> {
    if r > s || r < 0 {
        return Err(FriError::InvalidParameter(format!("crossing from radius {r} to {s}")));
    }
    let outer = Cube::new(*x, s)?;
    require_inside(edges, &outer)?;
    if r == s {
        return Ok(true);
    }
    let mut idx = ClusterIndex::build(edges, Some(&outer));
    let targets: HashSet<usize> = outer.boundary().filter_map(|v| idx.root_of(&v)).collect();
    let inner = Cube::new(*x, r)?;
    let hit = inner.vertices().any(|v| idx.root_of(&v).is_some_and(|root| targets.contains(&root)));
    Ok(hit)
}

/// The crossing event `B_x(R) ↔ ∂B_x(2R)`.
pub fn crossing(x: &Vertex, r: i64, edges: &EdgeSet) -> Result<bool> {
    box_crossing(x, r, 2 * r, edges)
}

/// Largest `l∞` distance from `x` reached by the cluster of `x` within `cube`.
/// `{x} ↔ ∂B_x(R)` holds exactly when this is at least `R` (for `B_x(R) ⊂ cube`).
pub fn reach_radius(x: &Vertex, edges: &EdgeSet, cube: &Cube) -> Result<i64> {
    require_inside(edges, cube)?;
    let w = edges.window();
    let start = w.index(x).ok_or_else(|| FriError::OutsideWindow(x.to_string()))?;
    let mut seen = fixedbitset::FixedBitSet::with_capacity(w.num_vertices());
    let mut queue = VecDeque::from([start]);
    seen.insert(start);
    let mut best = 0;
    while let Some(i) = queue.pop_front() {
        let vi = w.vertex(i);
        best = best.max(vi.dist_linf(x));
        for slot in w.incident_slots(i) {
            if !edges.contains_slot(slot) {
                continue;
            }
            let (a, b) = w.edge_endpoints(slot);
            let j = if a == i { b } else { a };
            if !seen.contains(j) && cube.contains(&w.vertex(j)) {
                seen.insert(j);
                queue.push_back(j);
            }
        }
    }
    Ok(best)
}

/// `{x} ↔ ∂B_x(R)`.
pub fn point_to_boundary(x: &Vertex, r: i64, edges: &EdgeSet) -> Result<bool> {
    let cube = Cube::new(*x, r)?;
    Ok(reach_radius(x, edges, &cube)? >= r)
}

/// `Exist(R)`: some cluster of `E ∩ 𝓑_x(R)` has diameter at least `R/5`.
pub fn exist_event(x: &Vertex, r: i64, edges: &EdgeSet) -> Result<bool> {
    let cube = Cube::new(*x, r)?;
    require_inside(edges, &cube)?;
    let idx = ClusterIndex::build(edges, Some(&cube));
    Ok(idx.clusters().iter().any(|c| 5 * c.diam() >= r))
}

/// `Unique(R)`: all clusters of `E ∩ 𝓑_x(R)` with diameter at least `R/10`
/// are connected to each other in `E ∩ 𝓑_x(2R)`.
pub fn unique_event(x: &Vertex, r: i64, edges: &EdgeSet) -> Result<bool> {
    let inner = Cube::new(*x, r)?;
    let outer = Cube::new(*x, 2 * r)?;
    require_inside(edges, &outer)?;
    let small = ClusterIndex::build(edges, Some(&inner));
    let reps: Vec<usize> = small.clusters().iter().filter(|c| 10 * c.diam() >= r).map(|c| c.root).collect();
    if reps.len() <= 1 {
        return Ok(true);
    }
    let mut big = ClusterIndex::build(edges, Some(&outer));
    let first = big.root_of_index(reps[0]);
    Ok(reps[1..].iter().all(|&v| big.root_of_index(v) == first))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StrongEvents {
    pub exist: bool,
    pub unique: bool,
}

impl StrongEvents {
    pub fn both(&self) -> bool {
        self.exist && self.unique
    }
}

pub fn exist_and_unique(x: &Vertex, r: i64, edges: &EdgeSet) -> Result<StrongEvents> {
    Ok(StrongEvents { exist: exist_event(x, r, edges)?, unique: unique_event(x, r, edges)? })
}

/// `ξ(N, α, β)`: `B(N) ↔ ∂B(6N)` in `α`, and every cluster of `α ∩ 𝓑(4N)`
/// meeting both `∂B(4N)` and `∂B(2N+1)` is connected to the others in `β ∩ 𝓑(4N)`.
pub fn xi_event(n: i64, alpha: &EdgeSet, beta: &EdgeSet) -> Result<bool> {
    if n < 1 {
        return Err(FriError::InvalidParameter(format!("xi event needs N >= 1, got {n}")));
    }
    if !alpha.is_subset(beta) {
        return Err(FriError::InvalidParameter("xi event needs alpha ⊂ beta".into()));
    }
    let o = Vertex::origin(alpha.window().dim());
    if !box_crossing(&o, n, 6 * n, alpha)? {
        return Ok(false);
    }
    let b4 = Cube::new(o, 4 * n)?;
    let mut ia = ClusterIndex::build(alpha, Some(&b4));
    let outer_roots: HashSet<usize> = b4.boundary().filter_map(|v| ia.cluster_of(&v).map(|c| c.root)).collect();
    let mid = Cube::new(o, 2 * n + 1)?;
    let mut reps: Vec<usize> =
        mid.boundary().filter_map(|v| ia.cluster_of(&v).map(|c| c.root)).filter(|r| outer_roots.contains(r)).collect();
    reps.sort_unstable();
    reps.dedup();
    if reps.len() <= 1 {
        return Ok(true);
    }
    let mut ib = ClusterIndex::build(beta, Some(&b4));
    let first = ib.root_of_index(reps[0]);
    Ok(reps[1..].iter().all(|&v| ib.root_of_index(v) == first))
}

/// Per-centre status of a renormalization box.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BoxStatus {
    pub exist: bool,
    pub unique: bool,
    pub agree: bool,
}

impl BoxStatus {
    /// `F_x = G1 ∧ G2`.
    pub fn good(&self) -> bool {
        self.exist && self.unique && self.agree
    }
}

/// Good/bad flags for the centres `K0 z`, `|z| <= extent`.
#[derive(Clone, Debug)]
pub struct BoxGrid {
    pub k0: i64,
    pub extent: i64,
    pub dim: usize,
    status: Vec<BoxStatus>,
}

impl BoxGrid {
    fn slot(&self, x: &Vertex) -> Option<usize> {
        let side = 2 * self.extent + 1;
        let mut idx = 0i64;
        for i in 0..self.dim {
            let c = x.coord(i);
            if c.rem_euclid(self.k0) != 0 {
                return None;
            }
            let z = c / self.k0 + self.extent;
            if z < 0 || z >= side {
                return None;
            }
            idx = idx * side + z;
        }
        Some(idx as usize)
    }

    pub fn status(&self, x: &Vertex) -> Option<BoxStatus> {
        self.slot(x).map(|i| self.status[i])
    }

    pub fn centers(&self) -> impl Iterator<Item = Vertex> + '_ {
        Cube::centered(self.dim, self.extent).vertices().map(move |z| z.scale(self.k0))
    }

    pub fn bad_count(&self) -> usize {
        self.status.iter().filter(|s| !s.good()).count()
    }

    pub fn len(&self) -> usize {
        self.status.len()
    }

    pub fn is_empty(&self) -> bool {
        self.status.is_empty()
    }
}

/// Classifies every centre: `G1` is `Exist ∧ Unique` at scale `K0` for the
/// first sample shifted to `x`, `G2` is equality of the two samples on `𝓑_x(2K0)`.
pub fn classify_boxes(first: &EdgeSet, second: &EdgeSet, k0: i64, extent: i64) -> Result<BoxGrid> {
    if k0 < 1 || extent < 0 {
        return Err(FriError::InvalidParameter(format!("k0 = {k0}, extent = {extent}")));
    }
    let d = first.window().dim();
    let needed = Cube::centered(d, extent * k0 + 2 * k0);
    require_inside(first, &needed)?;
    let mut grid = BoxGrid { k0, extent, dim: d, status: Vec::new() };
    let centers: Vec<Vertex> = grid.centers().collect();
    for x in centers {
        let ev = exist_and_unique(&x, k0, first)?;
        let agree = first.agrees_on(second, &Cube::new(x, 2 * k0)?)?;
        grid.status.push(BoxStatus { exist: ev.exist, unique: ev.unique, agree });
    }
    Ok(grid)
}

/// `H*(x, M, N)`: a `*`-path of bad centres (consecutive centres at `l∞`
/// distance `K0`) from `B_x(M)` to `∂B_x(N)`.
pub fn star_crossing(grid: &BoxGrid, x: &Vertex, m: i64, n: i64) -> Result<bool> {
    if grid.slot(x).is_none() {
        return Err(FriError::OffGrid(x.to_string()));
    }
    if m > n || m < 0 {
        return Err(FriError::InvalidParameter(format!("M = {m}, N = {n}")));
    }
    if x.norm_linf() + n > grid.extent * grid.k0 {
        return Err(FriError::OutsideWindow("star path region exceeds the box grid".into()));
    }
    let k0 = grid.k0;
    let bad = |y: &Vertex| grid.status(y).is_some_and(|s| !s.good());
    let ball = Cube::new(*x, n)?;
    let mut seen = HashSet::new();
    let mut queue = VecDeque::new();
    for y in grid.centers().filter(|y| x.dist_linf(y) <= m && bad(y)) {
        seen.insert(y);
        queue.push_back(y);
    }
    while let Some(y) = queue.pop_front() {
        if x.dist_linf(&y) == n {
            return Ok(true);
        }
        for z in Cube::new(y, k0)?.boundary() {
            if z.coords().iter().any(|c| c.rem_euclid(k0) != 0) {
                continue;
            }
            debug_assert!(star_adjacent(&y, &z, k0)?);
            if ball.contains(&z) && bad(&z) && seen.insert(z) {
                queue.push_back(z);
            }
        }
    }
    Ok(false)
}
