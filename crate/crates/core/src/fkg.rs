//! Exact FKG checks for `FI^{u,T}` restricted to finite path universes.
//!
//! Paths with distinct trajectories are present independently, path `η` with
//! probability `q = 1 − exp(−λ P(η))`. A function of finitely many edges only
//! sees, for each path, which of those edges it traverses, so paths are
//! grouped by that footprint and the edge-configuration law is built by an
//! exact product over groups.

use rand::Rng;

use crate::error::{FriError, Result};
use crate::killed_walk::{path_probability, sample_length, sample_steps, KillParams, Path};
use crate::lattice::{Edge, Vertex};

/// Configuration budget of the literal enumeration over path indicators.
pub const ENUMERATION_GUARD: usize = 1 << 20;

/// Neumaier compensated sum.
#[derive(Clone, Copy, Debug, Default)]
pub struct Sum {
    s: f64,
    c: f64,
}

impl Sum {
    pub fn add(&mut self, x: f64) {
        let t = self.s + x;
        if self.s.abs() >= x.abs() {
            self.c += (self.s - t) + x;
        } else {
            self.c += (x - t) + self.s;
        }
        self.s = t;
    }

    pub fn value(&self) -> f64 {
        self.s + self.c
    }
}

#[derive(Clone, Debug)]
pub struct PathUniverse {
    params: KillParams,
    u: f64,
    paths: Vec<Path>,
    q: Vec<f64>,
}

/// Every path of length at most `l_max` starting in `starts`.
pub fn build_universe(starts: &[Vertex], l_max: u32, u: f64, t: f64) -> Result<PathUniverse> {
    let d = starts.first().ok_or(FriError::EmptySet)?.dim();
    let params = KillParams::new(t, d)?;
    crate::error::check_finite_nonneg("u", u)?;
    let per_start: f64 = (0..=l_max).map(|k| ((2 * d) as f64).powi(k as i32)).sum();
    if per_start * starts.len() as f64 > 1e7 {
        return Err(FriError::TooLarge(format!("{} paths", per_start * starts.len() as f64)));
    }
    let mut sorted = starts.to_vec();
    sorted.sort();
    sorted.dedup();
    let mut paths = Vec::new();
    for x in &sorted {
        let mut frontier = vec![Vec::<u8>::new()];
        for _ in 0..=l_max {
            let mut next = Vec::new();
            for s in frontier {
                for c in 0..(2 * d) as u8 {
                    let mut t = s.clone();
                    t.push(c);
                    next.push(t);
                }
                paths.push(Path::new(*x, s)?);
            }
            frontier = next;
        }
    }
    let lambda = params.intensity(u);
    let q = paths.iter().map(|p| path_probability(p, &params).map(|pr| -(-lambda * pr).exp_m1())).collect::<Result<Vec<_>>>()?;
    Ok(PathUniverse { params, u, paths, q })
}

impl PathUniverse {
    pub fn params(&self) -> &KillParams {
        &self.params
    }

    pub fn u(&self) -> f64 {
        self.u
    }

    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    pub fn paths(&self) -> &[Path] {
        &self.paths
    }

    pub fn q(&self) -> &[f64] {
        &self.q
    }

    /// Keeps the paths selected by `keep`.
    pub fn restrict(&self, mut keep: impl FnMut(usize, &Path) -> bool) -> PathUniverse {
        let (paths, q) =
            self.paths.iter().zip(&self.q).enumerate().filter(|(i, (p, _))| keep(*i, p)).map(|(_, (p, q))| (p.clone(), *q)).unzip();
        PathUniverse { params: self.params, u: self.u, paths, q }
    }

    /// Bitmask of the entries of `edges` traversed by path `i`.
    pub fn footprint(&self, i: usize, edges: &[Edge]) -> u32 {
        let mut m = 0;
        for e in self.paths[i].edges() {
            if let Some(k) = edges.iter().position(|f| *f == e) {
                m |= 1 << k;
            }
        }
        m
    }

    /// Exact law of the indicators of `edges` (at most 16), indexed by bitmask.
    pub fn edge_law(&self, edges: &[Edge]) -> Result<Vec<f64>> {
        let k = edges.len();
        if k > 16 {
            return Err(FriError::TooLarge(format!("{k} edges")));
        }
        let mut none = vec![1.0f64; 1 << k];
        for i in 0..self.paths.len() {
            let m = self.footprint(i, edges) as usize;
            if m != 0 {
                none[m] *= 1.0 - self.q[i];
            }
        }
        let mut law = vec![0.0f64; 1 << k];
        law[0] = 1.0;
        for (m, &miss) in none.iter().enumerate().skip(1) {
            if miss == 1.0 {
                continue;
            }
            let hit = 1.0 - miss;
            let mut next = vec![0.0f64; 1 << k];
            for (w, &pw) in law.iter().enumerate() {
                if pw != 0.0 {
                    next[w] += miss * pw;
                    next[w | m] += hit * pw;
                }
            }
            law = next;
        }
        Ok(law)
    }

    /// Literal sum over all `2^n` path configurations.
    pub fn edge_law_by_enumeration(&self, edges: &[Edge]) -> Result<Vec<f64>> {
        let n = self.paths.len();
        if n >= 64 || (1usize << n) > ENUMERATION_GUARD {
            return Err(FriError::TooLarge(format!("2^{n} configurations")));
        }
        let prints: Vec<u32> = (0..n).map(|i| self.footprint(i, edges)).collect();
        let mut sums = vec![Sum::default(); 1 << edges.len()];
        for psi in 0u64..(1u64 << n) {
            let mut w = 1.0;
            let mut open = 0u32;
            for i in 0..n {
                if psi >> i & 1 == 1 {
                    w *= self.q[i];
                    open |= prints[i];
                } else {
                    w *= 1.0 - self.q[i];
                }
            }
            sums[open as usize].add(w);
        }
        Ok(sums.iter().map(Sum::value).collect())
    }

    /// One draw of the edge configuration on `edges`: Poisson(`λ`) walks
    /// from every start, keeping those whose trajectory lies in the universe.
    pub fn sample_edges<R: Rng + ?Sized>(&self, edges: &[Edge], rng: &mut R) -> u32 {
        let l_max = self.paths.iter().map(Path::len).max().unwrap_or(0);
        let mut starts: Vec<Vertex> = self.paths.iter().map(Path::start).collect();
        starts.dedup();
        let lambda = self.params.intensity(self.u);
        let mut open = 0u32;
        let mut steps = Vec::new();
        for x in starts {
            for _ in 0..crate::fri_process::poisson(lambda, rng) {
                let len = sample_length(&self.params, rng);
                if len as usize > l_max {
                    continue;
                }
                steps.clear();
                sample_steps(len, self.params.dim(), rng, &mut steps);
                let p = Path::new(x, steps.clone()).expect("valid codes");
                for e in p.edges() {
                    if let Some(k) = edges.iter().position(|f| *f == e) {
                        open |= 1 << k;
                    }
                }
            }
        }
        open
    }
}

/// A boolean function of `k` edge indicators, as a truth table over bitmasks.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EdgeFunction {
    pub k: usize,
    pub table: Vec<bool>,
}

impl EdgeFunction {
    pub fn from_fn(k: usize, f: impl Fn(u32) -> bool) -> Self {
        EdgeFunction { k, table: (0..1u32 << k).map(f).collect() }
    }

    pub fn eval(&self, w: u32) -> bool {
        self.table[w as usize]
    }

    pub fn is_increasing(&self) -> bool {
        (0..self.table.len()).all(|w| !self.table[w] || (0..self.k).all(|b| self.table[w | 1 << b]))
    }

    pub fn complement(&self) -> Self {
        EdgeFunction { k: self.k, table: self.table.iter().map(|b| !b).collect() }
    }

    pub fn and(&self, other: &EdgeFunction) -> Self {
        EdgeFunction { k: self.k, table: self.table.iter().zip(&other.table).map(|(a, b)| *a && *b).collect() }
    }
}

/// `E[f]` under an edge law.
pub fn expectation(law: &[f64], f: &EdgeFunction) -> f64 {
    let mut s = Sum::default();
    for (w, &p) in law.iter().enumerate() {
        if f.table[w] {
            s.add(p);
        }
    }
    s.value()
}

pub fn exact_expectation(universe: &PathUniverse, edges: &[Edge], f: &EdgeFunction) -> Result<f64> {
    if f.k != edges.len() {
        return Err(FriError::DimensionMismatch { expected: edges.len(), found: f.k });
    }
    Ok(expectation(&universe.edge_law(edges)?, f))
}

pub fn covariance(law: &[f64], f: &EdgeFunction, g: &EdgeFunction) -> f64 {
    expectation(law, &f.and(g)) - expectation(law, f) * expectation(law, g)
}

/// All increasing boolean functions of `k <= 4` bits, constants included.
pub fn monotone_functions(k: usize) -> Result<Vec<EdgeFunction>> {
    if k > 4 {
        return Err(FriError::TooLarge(format!("{k} edges")));
    }
    let cells = 1usize << k;
    Ok((0u32..(1u32 << cells)).map(|t| EdgeFunction::from_fn(k, |w| t >> w & 1 == 1)).filter(EdgeFunction::is_increasing).collect())
}

/// The up-set generated by `gens`.
pub fn upset(k: usize, gens: &[u32]) -> EdgeFunction {
    EdgeFunction::from_fn(k, |w| gens.iter().any(|g| w & g == *g))
}

#[derive(Clone, Debug, PartialEq)]
pub struct FkgReport {
    pub pairs: u64,
    pub min_covariance: f64,
    pub exhaustive: bool,
    pub holds: bool,
}

pub const FKG_TOLERANCE: f64 = 1e-12;

/// Minimum covariance over increasing pairs of functions of `edges`:
/// all pairs when there are at most four edges, otherwise `pair_budget`
/// random up-sets.
pub fn fkg_check<R: Rng + ?Sized>(universe: &PathUniverse, edges: &[Edge], pair_budget: u64, rng: &mut R) -> Result<FkgReport> {
    let law = universe.edge_law(edges)?;
    let k = edges.len();
    let mut min_cov = f64::INFINITY;
    let mut pairs = 0u64;
    let exhaustive = k <= 4;
    if exhaustive {
        let fs = monotone_functions(k)?;
        for f in &fs {
            for g in &fs {
                min_cov = min_cov.min(covariance(&law, f, g));
                pairs += 1;
            }
        }
    } else {
        let random_upset = |rng: &mut R| {
            let n = rng.random_range(1..=3);
            let gens: Vec<u32> = (0..n).map(|_| rng.random_range(1..1u32 << k)).collect();
            upset(k, &gens)
        };
        for _ in 0..pair_budget {
            let f = random_upset(rng);
            let g = random_upset(rng);
            min_cov = min_cov.min(covariance(&law, &f, &g));
            pairs += 1;
        }
    }
    Ok(FkgReport { pairs, min_covariance: min_cov, exhaustive, holds: min_cov >= -FKG_TOLERANCE })
}

/// `fkg_check` on the universe of paths of length at most `l` from `starts`.
pub fn fkg_check_truncated<R: Rng + ?Sized>(
    starts: &[Vertex],
    l: u32,
    u: f64,
    t: f64,
    edges: &[Edge],
    pair_budget: u64,
    rng: &mut R,
) -> Result<FkgReport> {
    fkg_check(&build_universe(starts, l, u, t)?, edges, pair_budget, rng)
}

/// `P[no walk from x follows any path in S]` for paths `S` from one start,
/// summed over the Poisson number of walks from `x`: each walk independently
/// avoids `S` with probability `1 − P(S)`.
pub fn joint_absence_by_series(universe: &PathUniverse, subset: &[usize]) -> Result<f64> {
    let lambda = universe.params.intensity(universe.u);
    let mut by_start: Vec<(Vertex, f64)> = Vec::new();
    for &i in subset {
        let p = universe.paths.get(i).ok_or_else(|| FriError::InvalidParameter(format!("path {i}")))?;
        let pr = path_probability(p, &universe.params)?;
        match by_start.iter_mut().find(|(x, _)| *x == p.start()) {
            Some(e) => e.1 += pr,
            None => by_start.push((p.start(), pr)),
        }
    }
    let mut out = 1.0;
    for (_, mass) in by_start {
        let mut s = Sum::default();
        let mut term = (-lambda).exp();
        let mut n = 0u32;
        loop {
            s.add(term * (1.0 - mass).powi(n as i32));
            n += 1;
            term *= lambda / n as f64;
            if term < 1e-20 && n as f64 > lambda {
                break;
            }
        }
        out *= s.value();
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_starts() -> Vec<Vertex> {
        vec![Vertex::origin(3), Vertex::unit(3, 0, 1)]
    }

    #[test]
    fn universe_size_and_marginal() {
        let uni = build_universe(&two_starts(), 1, 1.0, 1.0).unwrap();
        assert_eq!(uni.len(), 14);
        let step = uni.paths().iter().position(|p| p.start() == Vertex::origin(3) && p.steps() == [0]).unwrap();
        assert!((uni.q()[step] - (1.0 - (-3.0f64 / 24.0).exp())).abs() < 1e-15);
        assert!((uni.q()[step] - 0.117503).abs() < 1e-6);
    }

    #[test]
    fn monotone_counts() {
        assert_eq!(monotone_functions(2).unwrap().len(), 6);
        assert_eq!(monotone_functions(3).unwrap().len(), 20);
        assert_eq!(monotone_functions(4).unwrap().len(), 168);
    }

    #[test]
    fn law_matches_enumeration() {
        let uni = build_universe(&two_starts(), 1, 1.0, 1.0).unwrap();
        let o = Vertex::origin(3);
        let edges = [Edge::along(o, 0), Edge::along(o, 1), Edge::along(Vertex::unit(3, 0, 1), 2)];
        let a = uni.edge_law(&edges).unwrap();
        let b = uni.edge_law_by_enumeration(&edges).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-14, "{x} {y}");
        }
        assert!((a.iter().sum::<f64>() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn shared_path_gives_positive_covariance() {
        let o = Vertex::origin(3);
        let uni = build_universe(&[o], 2, 1.0, 1.0).unwrap();
        let edges = [Edge::along(o, 0), Edge::along(Vertex::unit(3, 0, 1), 1)];
        let law = uni.edge_law(&edges).unwrap();
        let f = EdgeFunction::from_fn(2, |w| w & 1 == 1);
        let g = EdgeFunction::from_fn(2, |w| w & 2 == 2);
        assert!(covariance(&law, &f, &g) > 0.0);
    }

    #[test]
    fn complement_flips_sign() {
        let o = Vertex::origin(3);
        let uni = build_universe(&[o], 2, 1.0, 1.0).unwrap();
        let edges = [Edge::along(o, 0), Edge::along(Vertex::unit(3, 0, 1), 1)];
        let law = uni.edge_law(&edges).unwrap();
        let f = EdgeFunction::from_fn(2, |w| w == 3);
        let g = EdgeFunction::from_fn(2, |w| w != 0).complement();
        assert!(covariance(&law, &f, &g) <= 0.0);
    }
}
