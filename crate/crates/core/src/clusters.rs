//! Connected components of edge sets.

use std::collections::HashMap;

use crate::lattice::{Cube, EdgeSet, Vertex, Window, MAX_DIM};

/// Disjoint-set forest with path halving and union by size.
#[derive(Clone, Debug)]
pub struct UnionFind {
    parent: Vec<u32>,
    size: Vec<u32>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        UnionFind { parent: (0..n as u32).collect(), size: vec![1; n] }
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] as usize != x {
            let p = self.parent[x] as usize;
            self.parent[x] = self.parent[p];
            x = self.parent[x] as usize;
        }
        x
    }

    pub fn union(&mut self, a: usize, b: usize) -> bool {
        let (mut a, mut b) = (self.find(a), self.find(b));
        if a == b {
            return false;
        }
        if self.size[a] < self.size[b] {
            std::mem::swap(&mut a, &mut b);
        }
        self.parent[b] = a as u32;
        self.size[a] += self.size[b];
        true
    }

    pub fn same(&mut self, a: usize, b: usize) -> bool {
        self.find(a) == self.find(b)
    }
}

/// Summary of one cluster (a connected component with at least one edge).
#[derive(Clone, Debug, PartialEq)]
pub struct ClusterInfo {
    pub root: usize,
    pub edges: usize,
    pub vertices: usize,
    min: [i64; MAX_DIM],
    max: [i64; MAX_DIM],
    dim: usize,
}

impl ClusterInfo {
    /// `l∞` diameter of the vertex set.
    pub fn diam(&self) -> i64 {
        (0..self.dim).map(|i| self.max[i] - self.min[i]).max().unwrap_or(0)
    }
}

/// Components of `E ∩ 𝓑(D)` for a region `D` inside the window of `E`.
pub struct ClusterIndex {
    window: Window,
    uf: UnionFind,
    clusters: Vec<ClusterInfo>,
    by_root: HashMap<usize, usize>,
}

impl ClusterIndex {
    pub fn build(edges: &EdgeSet, region: Option<&Cube>) -> ClusterIndex {
        let window = edges.window().clone();
        let mut uf = UnionFind::new(window.num_vertices());
        let inside = |w: &Window, i: usize| region.is_none_or(|c| c.contains(&w.vertex(i)));
        let full = region.is_none_or(|c| c.contains_cube(window.cube()));
        let mut kept = Vec::new();
        for slot in edges.slots() {
            let (a, b) = window.edge_endpoints(slot);
            if full || (inside(&window, a) && inside(&window, b)) {
                uf.union(a, b);
                kept.push((a, b));
            }
        }
        let d = window.dim();
        let mut clusters: Vec<ClusterInfo> = Vec::new();
        let mut by_root = HashMap::new();
        let mut seen = fixedbitset::FixedBitSet::with_capacity(window.num_vertices());
        for &(a, b) in &kept {
            let r = uf.find(a);
            let ci = *by_root.entry(r).or_insert_with(|| {
                clusters.push(ClusterInfo { root: r, edges: 0, vertices: 0, min: [i64::MAX; MAX_DIM], max: [i64::MIN; MAX_DIM], dim: d });
                clusters.len() - 1
            });
            let c = &mut clusters[ci];
            c.edges += 1;
            for v in [a, b] {
                if seen.put(v) {
                    continue;
                }
                c.vertices += 1;
                let x = window.vertex(v);
                for i in 0..d {
                    c.min[i] = c.min[i].min(x.coord(i));
                    c.max[i] = c.max[i].max(x.coord(i));
                }
            }
        }
        ClusterIndex { window, uf, clusters, by_root }
    }

    pub fn window(&self) -> &Window {
        &self.window
    }

    pub fn clusters(&self) -> &[ClusterInfo] {
        &self.clusters
    }

    pub fn root_of(&mut self, v: &Vertex) -> Option<usize> {
        let i = self.window.index(v)?;
        Some(self.uf.find(i))
    }

    pub fn root_of_index(&mut self, i: usize) -> usize {
        self.uf.find(i)
    }

    /// Cluster containing `v`, if `v` is an endpoint of a retained edge.
    pub fn cluster_of(&mut self, v: &Vertex) -> Option<&ClusterInfo> {
        let r = self.root_of(v)?;
        self.by_root.get(&r).map(|&i| &self.clusters[i])
    }

    pub fn connected(&mut self, a: &Vertex, b: &Vertex) -> bool {
        if a == b {
            return true;
        }
        match (self.window.index(a), self.window.index(b)) {
            (Some(i), Some(j)) => self.uf.same(i, j),
            _ => false,
        }
    }

    /// Vertex indices of the window belonging to the cluster with this root.
    pub fn members(&mut self, root: usize) -> Vec<usize> {
        (0..self.window.num_vertices()).filter(|&i| self.uf.find(i) == root).collect()
    }
}

/// Whether some vertex of `a` is joined to some vertex of `b` by edges of
/// `edges` lying inside `within` (the whole window when `None`).
pub fn connected_sets(a: &[Vertex], b: &[Vertex], edges: &EdgeSet, within: Option<&Cube>) -> bool {
    if a.iter().any(|x| b.contains(x)) {
        return true;
    }
    let mut idx = ClusterIndex::build(edges, within);
    let roots: std::collections::HashSet<usize> = a.iter().filter_map(|x| idx.root_of(x)).collect();
    b.iter().any(|y| idx.root_of(y).is_some_and(|r| roots.contains(&r)))
}
