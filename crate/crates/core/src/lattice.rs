//! Vertices, edges and boxes of the nearest-neighbour lattice `Z^d`, together
//! with dense window-indexed vertex and edge sets.
//!
//! Distances between vertices use the `l∞` norm (boxes, diameters, `dist`);
//! adjacency uses the `l1` norm. Window indices are laid out with the first
//! coordinate most significant, so iterating a set in index order visits its
//! members in lexicographic order.

use std::cmp::Ordering;
use std::fmt;

use fixedbitset::FixedBitSet;

use crate::error::{FriError, Result};

pub const MAX_DIM: usize = 6;

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Vertex {
    coords: [i64; MAX_DIM],
    dim: u8,
}

impl Vertex {
    pub fn new(coords: &[i64]) -> Self {
        assert!(!coords.is_empty() && coords.len() <= MAX_DIM, "dimension must lie in 1..={MAX_DIM}");
        let mut c = [0i64; MAX_DIM];
        c[..coords.len()].copy_from_slice(coords);
        Vertex { coords: c, dim: coords.len() as u8 }
    }

    pub fn origin(dim: usize) -> Self {
        Vertex::new(&vec![0; dim])
    }

    /// `sign * e_axis`.
    pub fn unit(dim: usize, axis: usize, sign: i64) -> Self {
        let mut v = Vertex::origin(dim);
        v.coords[axis] = sign;
        v
    }

    pub fn dim(&self) -> usize {
        self.dim as usize
    }

    pub fn coords(&self) -> &[i64] {
        &self.coords[..self.dim as usize]
    }

    pub fn coord(&self, axis: usize) -> i64 {
        self.coords[axis]
    }

    pub fn norm_linf(&self) -> i64 {
        self.coords().iter().map(|c| c.abs()).max().unwrap_or(0)
    }

    pub fn norm_l1(&self) -> i64 {
        self.coords().iter().map(|c| c.abs()).sum()
    }

    pub fn dist_linf(&self, other: &Vertex) -> i64 {
        (*self - *other).norm_linf()
    }

    pub fn dist_l1(&self, other: &Vertex) -> i64 {
        (*self - *other).norm_l1()
    }

    pub fn offset(&self, axis: usize, delta: i64) -> Vertex {
        let mut v = *self;
        v.coords[axis] += delta;
        v
    }

    pub fn scale(&self, k: i64) -> Vertex {
        let mut v = *self;
        for c in v.coords.iter_mut() {
            *c *= k;
        }
        v
    }

    /// The `2d` nearest neighbours, in direction-code order `+e_1, -e_1, +e_2, ...`.
    pub fn neighbors(&self) -> impl Iterator<Item = Vertex> + '_ {
        (0..2 * self.dim()).map(move |code| self.step(code as u8))
    }

    /// Moves one step along direction `code` (`axis = code / 2`, even codes positive).
    pub fn step(&self, code: u8) -> Vertex {
        let axis = (code / 2) as usize;
        let delta = if code % 2 == 0 { 1 } else { -1 };
        self.offset(axis, delta)
    }
}

impl std::ops::Add for Vertex {
    type Output = Vertex;
    fn add(self, rhs: Vertex) -> Vertex {
        debug_assert_eq!(self.dim, rhs.dim);
        let mut v = self;
        for i in 0..MAX_DIM {
            v.coords[i] += rhs.coords[i];
        }
        v
    }
}

impl std::ops::Sub for Vertex {
    type Output = Vertex;
    fn sub(self, rhs: Vertex) -> Vertex {
        debug_assert_eq!(self.dim, rhs.dim);
        let mut v = self;
        for i in 0..MAX_DIM {
            v.coords[i] -= rhs.coords[i];
        }
        v
    }
}

impl Ord for Vertex {
    fn cmp(&self, other: &Self) -> Ordering {
        self.dim.cmp(&other.dim).then_with(|| self.coords().cmp(other.coords()))
    }
}

impl PartialOrd for Vertex {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for Vertex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for Vertex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.coords().iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

/// An undirected nearest-neighbour edge stored as `(lo, hi)` with `lo ⊲ hi`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Edge {
    lo: Vertex,
    hi: Vertex,
}

impl Edge {
    pub fn new(a: Vertex, b: Vertex) -> Result<Edge> {
        if a.dim() != b.dim() {
            return Err(FriError::DimensionMismatch { expected: a.dim(), found: b.dim() });
        }
        if a.dist_l1(&b) != 1 {
            return Err(FriError::NotAnEdge(format!("{a} - {b}")));
        }
        Ok(if a < b { Edge { lo: a, hi: b } } else { Edge { lo: b, hi: a } })
    }

    /// The edge `{x, x + e_axis}`.
    pub fn along(x: Vertex, axis: usize) -> Edge {
        Edge { lo: x, hi: x.offset(axis, 1) }
    }

    pub fn lo(&self) -> Vertex {
        self.lo
    }

    pub fn hi(&self) -> Vertex {
        self.hi
    }

    pub fn endpoints(&self) -> [Vertex; 2] {
        [self.lo, self.hi]
    }

    pub fn axis(&self) -> usize {
        (0..self.lo.dim()).find(|&i| self.lo.coord(i) != self.hi.coord(i)).unwrap()
    }

    pub fn dim(&self) -> usize {
        self.lo.dim()
    }

    /// `l∞` distance from a vertex to the nearer endpoint.
    pub fn dist_linf_to(&self, x: &Vertex) -> i64 {
        self.lo.dist_linf(x).min(self.hi.dist_linf(x))
    }

    pub fn translate(&self, by: Vertex) -> Edge {
        Edge { lo: self.lo + by, hi: self.hi + by }
    }
}

impl fmt::Debug for Edge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for Edge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}|{}", self.lo, self.hi)
    }
}

/// The `l∞` box `B_x(R) = {y : |y - x| <= R}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Cube {
    pub center: Vertex,
    pub radius: i64,
}

impl Cube {
    pub fn new(center: Vertex, radius: i64) -> Result<Cube> {
        if radius < 0 {
            return Err(FriError::InvalidParameter(format!("box radius {radius} < 0")));
        }
        Ok(Cube { center, radius })
    }

    /// `B(R)` centred at the origin.
    pub fn centered(dim: usize, radius: i64) -> Cube {
        Cube::new(Vertex::origin(dim), radius).expect("radius must be non-negative")
    }

    pub fn dim(&self) -> usize {
        self.center.dim()
    }

    pub fn side(&self) -> i64 {
        2 * self.radius + 1
    }

    pub fn contains(&self, v: &Vertex) -> bool {
        self.center.dist_linf(v) <= self.radius
    }

    pub fn contains_edge(&self, e: &Edge) -> bool {
        self.contains(&e.lo) && self.contains(&e.hi)
    }

    pub fn contains_cube(&self, other: &Cube) -> bool {
        self.center.dist_linf(&other.center) + other.radius <= self.radius
    }

    pub fn grow(&self, by: i64) -> Cube {
        Cube { center: self.center, radius: self.radius + by }
    }

    pub fn num_vertices(&self) -> u64 {
        (self.side() as u64).pow(self.dim() as u32)
    }

    /// Number of edges with both endpoints in the box.
    pub fn num_edges(&self) -> u64 {
        let s = self.side() as u64;
        self.dim() as u64 * (s - 1) * s.pow(self.dim() as u32 - 1)
    }

    /// Vertices in lexicographic order.
    pub fn vertices(&self) -> CubeVertices {
        CubeVertices::new(*self)
    }

    /// Edges with both endpoints inside, in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = Edge> + '_ {
        let d = self.dim();
        self.vertices().flat_map(move |x| {
            (0..d).rev().filter_map(move |axis| {
                let e = Edge::along(x, axis);
                self.contains(&e.hi).then_some(e)
            })
        })
    }

    /// The inner boundary `∂B_x(R) = {y : |y - x| = R}`.
    pub fn boundary(&self) -> impl Iterator<Item = Vertex> + '_ {
        self.vertices().filter(move |v| self.center.dist_linf(v) == self.radius)
    }

    /// Edges of the box touching its inner boundary.
    pub fn shell_edges(&self) -> impl Iterator<Item = Edge> + '_ {
        self.edges().filter(move |e| self.center.dist_linf(&e.lo) == self.radius || self.center.dist_linf(&e.hi) == self.radius)
    }
}

pub struct CubeVertices {
    cube: Cube,
    next: Option<Vertex>,
}

impl CubeVertices {
    fn new(cube: Cube) -> Self {
        let mut start = cube.center;
        for i in 0..cube.dim() {
            start.coords[i] -= cube.radius;
        }
        CubeVertices { cube, next: Some(start) }
    }
}

impl Iterator for CubeVertices {
    type Item = Vertex;
    fn next(&mut self) -> Option<Vertex> {
        let cur = self.next?;
        let mut n = cur;
        let d = self.cube.dim();
        let mut i = d;
        loop {
            if i == 0 {
                self.next = None;
                break;
            }
            i -= 1;
            if n.coords[i] < self.cube.center.coords[i] + self.cube.radius {
                n.coords[i] += 1;
                self.next = Some(n);
                break;
            }
            n.coords[i] = self.cube.center.coords[i] - self.cube.radius;
        }
        Some(cur)
    }
}

/// Dense indexing of the vertices and edges of a box.
///
/// Edge slot `d * idx(x) + (d - 1 - axis)` holds `{x, x + e_axis}`; slots whose
/// upper endpoint falls outside the box are never set.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Window {
    cube: Cube,
    lo: [i64; MAX_DIM],
    strides: [usize; MAX_DIM],
    side: i64,
    nv: usize,
}

impl Window {
    pub fn new(cube: Cube) -> Result<Window> {
        let d = cube.dim();
        let side = cube.side();
        let nv = (side as u128).pow(d as u32);
        if nv > (1u128 << 34) {
            return Err(FriError::TooLarge(format!("window with {nv} vertices")));
        }
        let mut lo = [0i64; MAX_DIM];
        let mut strides = [0usize; MAX_DIM];
        let mut s = 1usize;
        for i in (0..d).rev() {
            lo[i] = cube.center.coords[i] - cube.radius;
            strides[i] = s;
            s *= side as usize;
        }
        Ok(Window { cube, lo, strides, side, nv: nv as usize })
    }

    pub fn centered(dim: usize, radius: i64) -> Window {
        Window::new(Cube::centered(dim, radius)).expect("window too large")
    }

    pub fn cube(&self) -> &Cube {
        &self.cube
    }

    pub fn dim(&self) -> usize {
        self.cube.dim()
    }

    pub fn side(&self) -> i64 {
        self.side
    }

    pub fn lo(&self) -> &[i64] {
        &self.lo[..self.dim()]
    }

    pub fn strides(&self) -> &[usize] {
        &self.strides[..self.dim()]
    }

    pub fn num_vertices(&self) -> usize {
        self.nv
    }

    pub fn num_edge_slots(&self) -> usize {
        self.nv * self.dim()
    }

    pub fn index(&self, v: &Vertex) -> Option<usize> {
        if v.dim() != self.dim() {
            return None;
        }
        let mut idx = 0usize;
        for i in 0..self.dim() {
            let r = v.coords[i] - self.lo[i];
            if r < 0 || r >= self.side {
                return None;
            }
            idx += r as usize * self.strides[i];
        }
        Some(idx)
    }

    pub fn vertex(&self, mut idx: usize) -> Vertex {
        let mut v = Vertex::origin(self.dim());
        for i in 0..self.dim() {
            let q = idx / self.strides[i];
            idx %= self.strides[i];
            v.coords[i] = self.lo[i] + q as i64;
        }
        v
    }

    pub fn edge_slot(&self, e: &Edge) -> Option<usize> {
        let lo = self.index(&e.lo)?;
        self.index(&e.hi)?;
        Some(lo * self.dim() + (self.dim() - 1 - e.axis()))
    }

    /// Slot for the edge from vertex index `lo_idx` along `axis`, if its upper end is inside.
    pub fn edge_slot_from(&self, lo_idx: usize, axis: usize) -> Option<usize> {
        let r = (lo_idx / self.strides[axis]) % self.side as usize;
        if r as i64 + 1 >= self.side {
            return None;
        }
        Some(lo_idx * self.dim() + (self.dim() - 1 - axis))
    }

    pub fn edge_endpoints(&self, slot: usize) -> (usize, usize) {
        let d = self.dim();
        let lo = slot / d;
        let axis = d - 1 - slot % d;
        (lo, lo + self.strides[axis])
    }

    pub fn edge(&self, slot: usize) -> Edge {
        let d = self.dim();
        let lo = self.vertex(slot / d);
        Edge::along(lo, d - 1 - slot % d)
    }

    pub fn slot_is_valid(&self, slot: usize) -> bool {
        let d = self.dim();
        self.edge_slot_from(slot / d, d - 1 - slot % d).is_some()
    }

    /// Vertex indices adjacent to `idx` that stay inside the window.
    pub fn neighbor_indices(&self, idx: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.dim()).flat_map(move |axis| {
            let r = ((idx / self.strides[axis]) % self.side as usize) as i64;
            let up = (r + 1 < self.side).then(|| idx + self.strides[axis]);
            let down = (r > 0).then(|| idx - self.strides[axis]);
            up.into_iter().chain(down)
        })
    }

    /// Edge slots incident to vertex `idx` inside the window.
    pub fn incident_slots(&self, idx: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.dim()).flat_map(move |axis| {
            let r = ((idx / self.strides[axis]) % self.side as usize) as i64;
            let d = self.dim();
            let up = (r + 1 < self.side).then(|| idx * d + (d - 1 - axis));
            let down = (r > 0).then(|| (idx - self.strides[axis]) * d + (d - 1 - axis));
            up.into_iter().chain(down)
        })
    }

    /// `l∞` distance from the window centre, computed from an index.
    pub fn index_norm(&self, mut idx: usize) -> i64 {
        let mut m = 0;
        for i in 0..self.dim() {
            let q = (idx / self.strides[i]) as i64;
            idx %= self.strides[i];
            m = m.max((q - self.cube.radius).abs());
        }
        m
    }
}

/// A set of vertices stored densely over a window.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VertexSet {
    window: Window,
    bits: FixedBitSet,
}

impl VertexSet {
    pub fn new(window: Window) -> Self {
        let bits = FixedBitSet::with_capacity(window.num_vertices());
        VertexSet { window, bits }
    }

    pub fn from_vertices<'a>(window: Window, vs: impl IntoIterator<Item = &'a Vertex>) -> Result<Self> {
        let mut s = VertexSet::new(window);
        for v in vs {
            s.insert(v)?;
        }
        Ok(s)
    }

    pub fn from_cube(window: Window, cube: &Cube) -> Result<Self> {
        let vs: Vec<Vertex> = cube.vertices().collect();
        VertexSet::from_vertices(window, &vs)
    }

    pub fn window(&self) -> &Window {
        &self.window
    }

    pub fn insert(&mut self, v: &Vertex) -> Result<bool> {
        let i = self.window.index(v).ok_or_else(|| FriError::OutsideWindow(v.to_string()))?;
        let was = self.bits.contains(i);
        self.bits.insert(i);
        Ok(!was)
    }

    pub fn insert_index(&mut self, i: usize) {
        self.bits.insert(i);
    }

    pub fn contains(&self, v: &Vertex) -> bool {
        self.window.index(v).is_some_and(|i| self.bits.contains(i))
    }

    pub fn contains_index(&self, i: usize) -> bool {
        self.bits.contains(i)
    }

    pub fn len(&self) -> usize {
        self.bits.count_ones(..)
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_clear()
    }

    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.bits.ones()
    }

    /// Members in lexicographic order.
    pub fn iter(&self) -> impl Iterator<Item = Vertex> + '_ {
        self.bits.ones().map(|i| self.window.vertex(i))
    }

    pub fn is_subset(&self, other: &VertexSet) -> bool {
        self.window == other.window && self.bits.is_subset(&other.bits)
    }
}

/// A set of edges stored densely over a window.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EdgeSet {
    window: Window,
    bits: FixedBitSet,
}

impl EdgeSet {
    pub fn new(window: Window) -> Self {
        let bits = FixedBitSet::with_capacity(window.num_edge_slots());
        EdgeSet { window, bits }
    }

    pub fn from_edges<'a>(window: Window, es: impl IntoIterator<Item = &'a Edge>) -> Result<Self> {
        let mut s = EdgeSet::new(window);
        for e in es {
            s.insert(e)?;
        }
        Ok(s)
    }

    pub fn window(&self) -> &Window {
        &self.window
    }

    pub fn insert(&mut self, e: &Edge) -> Result<bool> {
        let i = self.window.edge_slot(e).ok_or_else(|| FriError::OutsideWindow(e.to_string()))?;
        let was = self.bits.contains(i);
        self.bits.insert(i);
        Ok(!was)
    }

    pub fn insert_slot(&mut self, slot: usize) {
        debug_assert!(self.window.slot_is_valid(slot));
        self.bits.insert(slot);
    }

    pub fn remove_slot(&mut self, slot: usize) {
        self.bits.set(slot, false);
    }

    pub fn contains(&self, e: &Edge) -> bool {
        self.window.edge_slot(e).is_some_and(|i| self.bits.contains(i))
    }

    pub fn contains_slot(&self, slot: usize) -> bool {
        self.bits.contains(slot)
    }

    pub fn len(&self) -> usize {
        self.bits.count_ones(..)
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_clear()
    }

    pub fn clear(&mut self) {
        self.bits.clear();
    }

    pub fn slots(&self) -> impl Iterator<Item = usize> + '_ {
        self.bits.ones()
    }

    /// Members in lexicographic order.
    pub fn iter(&self) -> impl Iterator<Item = Edge> + '_ {
        self.bits.ones().map(|i| self.window.edge(i))
    }

    pub fn union_with(&mut self, other: &EdgeSet) -> Result<()> {
        if self.window != other.window {
            return Err(FriError::InvalidParameter("edge sets over different windows".into()));
        }
        self.bits.union_with(&other.bits);
        Ok(())
    }

    pub fn is_subset(&self, other: &EdgeSet) -> bool {
        self.window == other.window && self.bits.is_subset(&other.bits)
    }

    /// Edges with both endpoints in `cube`, over the same window.
    pub fn restrict_to(&self, cube: &Cube) -> EdgeSet {
        let mut out = EdgeSet::new(self.window.clone());
        for slot in self.bits.ones() {
            let (a, b) = self.window.edge_endpoints(slot);
            if cube.contains(&self.window.vertex(a)) && cube.contains(&self.window.vertex(b)) {
                out.bits.insert(slot);
            }
        }
        out
    }

    /// Whether the two sets agree on the edges of `cube`.
    pub fn agrees_on(&self, other: &EdgeSet, cube: &Cube) -> Result<bool> {
        if self.window != other.window {
            return Err(FriError::InvalidParameter("edge sets over different windows".into()));
        }
        let mut diff = self.bits.clone();
        diff.symmetric_difference_with(&other.bits);
        for slot in diff.ones() {
            let e = self.window.edge(slot);
            if cube.contains_edge(&e) {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// `V(A)`, the endpoints of the edges in the set.
    pub fn vertices(&self) -> VertexSet {
        let mut vs = VertexSet::new(self.window.clone());
        for slot in self.bits.ones() {
            let (a, b) = self.window.edge_endpoints(slot);
            vs.bits.insert(a);
            vs.bits.insert(b);
        }
        vs
    }
}

/// `∂A`: vertices of `A` with a neighbour outside `A`. Neighbours beyond the
/// window count as outside.
pub fn internal_boundary(a: &VertexSet) -> VertexSet {
    let w = a.window();
    let mut out = VertexSet::new(w.clone());
    for i in a.indices() {
        let interior_neighbors = w.neighbor_indices(i).filter(|&j| a.contains_index(j)).count();
        if interior_neighbors < 2 * w.dim() {
            out.insert_index(i);
        }
    }
    out
}

/// `∂^out A`: vertices outside `A` adjacent to `A`.
pub fn outer_boundary(a: &VertexSet) -> Result<VertexSet> {
    let w = a.window();
    let mut out = VertexSet::new(w.clone());
    for v in a.iter() {
        for n in v.neighbors() {
            match w.index(&n) {
                Some(j) if !a.contains_index(j) => out.insert_index(j),
                Some(_) => {}
                None => return Err(FriError::OutsideWindow(format!("outer boundary point {n}"))),
            }
        }
    }
    Ok(out)
}

/// `∂_e A`: edges of `A` with both endpoints in `∂V(A)`.
pub fn edge_boundary(a: &EdgeSet) -> EdgeSet {
    let bv = internal_boundary(&a.vertices());
    let w = a.window();
    let mut out = EdgeSet::new(w.clone());
    for slot in a.slots() {
        let (x, y) = w.edge_endpoints(slot);
        if bv.contains_index(x) && bv.contains_index(y) {
            out.insert_slot(slot);
        }
    }
    out
}

/// `∂_e^out A`: edges not in `A` joining `∂V(A)` to `∂^out V(A)`.
pub fn outer_edge_boundary(a: &EdgeSet) -> Result<EdgeSet> {
    let va = a.vertices();
    let bv = internal_boundary(&va);
    let ov = outer_boundary(&va)?;
    let w = a.window();
    let mut out = EdgeSet::new(w.clone());
    for x in bv.indices() {
        for slot in w.incident_slots(x) {
            if a.contains_slot(slot) {
                continue;
            }
            let (p, q) = w.edge_endpoints(slot);
            let y = if p == x { q } else { p };
            if ov.contains_index(y) {
                out.insert_slot(slot);
            }
        }
    }
    Ok(out)
}

/// Strict lexicographic order on vertices, edges and finite sets thereof.
///
/// For sets, `A ⊲ B` holds when `A ⊊ B`, or when `A ⊄ B` and the first
/// position where the sorted enumerations differ has the smaller element in `A`.
/// On sets this relation is not transitive in general.
pub trait LexOrder {
    fn lex_less(&self, other: &Self) -> bool;
}

impl LexOrder for Vertex {
    fn lex_less(&self, other: &Self) -> bool {
        self < other
    }
}

impl LexOrder for Edge {
    fn lex_less(&self, other: &Self) -> bool {
        self < other
    }
}

fn lex_less_sorted<T: Ord>(a: &[T], b: &[T], a_subset_b: bool) -> bool {
    if a_subset_b {
        return a.len() < b.len();
    }
    for (x, y) in a.iter().zip(b) {
        if x != y {
            return x < y;
        }
    }
    false
}

impl LexOrder for VertexSet {
    fn lex_less(&self, other: &Self) -> bool {
        let a: Vec<Vertex> = self.iter().collect();
        let b: Vec<Vertex> = other.iter().collect();
        let sub = a.iter().all(|v| other.contains(v));
        lex_less_sorted(&a, &b, sub)
    }
}

impl LexOrder for EdgeSet {
    fn lex_less(&self, other: &Self) -> bool {
        let a: Vec<Edge> = self.iter().collect();
        let b: Vec<Edge> = other.iter().collect();
        let sub = a.iter().all(|e| other.contains(e));
        lex_less_sorted(&a, &b, sub)
    }
}

fn pairwise_min(a: &[Vertex], b: &[Vertex], f: impl Fn(&Vertex, &Vertex) -> i64) -> Result<i64> {
    if a.is_empty() || b.is_empty() {
        return Err(FriError::EmptySet);
    }
    Ok(a.iter().flat_map(|x| b.iter().map(|y| f(x, y))).min().unwrap())
}

/// `dist(A, B) = min |x - y|` in the `l∞` norm.
pub fn dist_linf(a: &[Vertex], b: &[Vertex]) -> Result<i64> {
    pairwise_min(a, b, |x, y| x.dist_linf(y))
}

pub fn dist_l1(a: &[Vertex], b: &[Vertex]) -> Result<i64> {
    pairwise_min(a, b, |x, y| x.dist_l1(y))
}

/// `diam(A) = max |x - y|` in the `l∞` norm, i.e. the largest coordinate range.
pub fn diam(a: &[Vertex]) -> Result<i64> {
    let first = a.first().ok_or(FriError::EmptySet)?;
    let d = first.dim();
    let mut best = 0;
    for i in 0..d {
        let lo = a.iter().map(|v| v.coord(i)).min().unwrap();
        let hi = a.iter().map(|v| v.coord(i)).max().unwrap();
        best = best.max(hi - lo);
    }
    Ok(best)
}

/// Diameter of `V(E)` for a set of edges.
pub fn diam_edges(e: &EdgeSet) -> Result<i64> {
    let vs: Vec<Vertex> = e.vertices().iter().collect();
    diam(&vs)
}

/// `*`-adjacency of renormalization centres on `k0 Z^d`.
pub fn star_adjacent(x: &Vertex, y: &Vertex, k0: i64) -> Result<bool> {
    if k0 <= 0 {
        return Err(FriError::InvalidParameter(format!("grid spacing {k0}")));
    }
    for v in [x, y] {
        if v.coords().iter().any(|c| c.rem_euclid(k0) != 0) {
            return Err(FriError::OffGrid(v.to_string()));
        }
    }
    Ok(x.dist_linf(y) == k0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(c: &[i64]) -> Vertex {
        Vertex::new(c)
    }

    #[test]
    fn cube_counts() {
        let c = Cube::centered(3, 2);
        assert_eq!(c.vertices().count(), 125);
        assert_eq!(c.num_edges(), 300);
        assert_eq!(c.edges().count(), 300);
        assert_eq!(c.boundary().count(), 125 - 27);
        assert_eq!(Cube::centered(2, 0).boundary().collect::<Vec<_>>(), vec![v(&[0, 0])]);
    }

    #[test]
    fn window_indices_follow_lex_order() {
        let w = Window::centered(3, 2);
        let vs: Vec<Vertex> = w.cube().vertices().collect();
        let mut sorted = vs.clone();
        sorted.sort();
        assert_eq!(vs, sorted);
        for (i, x) in vs.iter().enumerate() {
            assert_eq!(w.index(x), Some(i));
            assert_eq!(w.vertex(i), *x);
        }
        let es: Vec<Edge> = w.cube().edges().collect();
        let slots: Vec<usize> = es.iter().map(|e| w.edge_slot(e).unwrap()).collect();
        assert!(slots.windows(2).all(|p| p[0] < p[1]));
        let mut sorted = es.clone();
        sorted.sort();
        assert_eq!(es, sorted);
        for s in &slots {
            assert_eq!(w.edge_slot(&w.edge(*s)), Some(*s));
        }
    }

    #[test]
    fn boundaries_of_a_single_vertex() {
        let w = Window::centered(2, 2);
        let a = VertexSet::from_vertices(w.clone(), &[v(&[0, 0])]).unwrap();
        assert_eq!(internal_boundary(&a).len(), 1);
        let out: Vec<Vertex> = outer_boundary(&a).unwrap().iter().collect();
        assert_eq!(out, vec![v(&[-1, 0]), v(&[0, -1]), v(&[0, 1]), v(&[1, 0])]);
    }

    #[test]
    fn outer_boundary_needs_room() {
        let w = Window::centered(2, 1);
        let a = VertexSet::from_cube(w.clone(), &Cube::centered(2, 1)).unwrap();
        assert!(matches!(outer_boundary(&a), Err(FriError::OutsideWindow(_))));
    }

    #[test]
    fn edge_boundaries_of_a_path() {
        let w = Window::centered(2, 3);
        let es = [Edge::new(v(&[0, 0]), v(&[1, 0])).unwrap(), Edge::new(v(&[1, 0]), v(&[2, 0])).unwrap()];
        let a = EdgeSet::from_edges(w.clone(), &es).unwrap();
        // Every vertex of a straight segment has a neighbour off the segment.
        assert_eq!(edge_boundary(&a).len(), 2);
        let out = outer_edge_boundary(&a).unwrap();
        // 3 vertices with 4 neighbours each, minus 4 half-edges used by the 2 edges.
        assert_eq!(out.len(), 12 - 4);
        assert!(out.iter().all(|e| !a.contains(&e)));
    }

    #[test]
    fn lex_order_on_sets() {
        let w = Window::centered(1, 3);
        let s = |xs: &[i64]| VertexSet::from_vertices(w.clone(), &xs.iter().map(|&x| v(&[x])).collect::<Vec<_>>()).unwrap();
        assert!(s(&[1]).lex_less(&s(&[1, 2])));
        assert!(!s(&[1, 2]).lex_less(&s(&[1])));
        assert!(s(&[0, 3]).lex_less(&s(&[1])));
        assert!(!s(&[1]).lex_less(&s(&[1])));
    }

    #[test]
    fn distances_and_diameter() {
        let a = [v(&[0, 0]), v(&[3, 1])];
        let b = [v(&[5, 5])];
        assert_eq!(dist_linf(&a, &b).unwrap(), 4);
        assert_eq!(dist_l1(&a, &b).unwrap(), 6);
        assert_eq!(diam(&a).unwrap(), 3);
        assert_eq!(diam(&[]), Err(FriError::EmptySet));
    }

    #[test]
    fn star_adjacency() {
        assert!(star_adjacent(&v(&[0, 0]), &v(&[4, -4]), 4).unwrap());
        assert!(!star_adjacent(&v(&[0, 0]), &v(&[8, 0]), 4).unwrap());
        assert!(star_adjacent(&v(&[1, 0]), &v(&[4, 0]), 4).is_err());
    }
}
