//! Geometrically killed simple random walks.
//!
//! A walk started at `x` survives each step with probability `p = T / (T + 1)`
//! and moves to a uniform neighbour, so its length `k` has law
//! `(1 / (T + 1)) p^k` and mean `T`.

use rand::Rng;

use crate::error::{check_finite_positive, FriError, Result};
use crate::lattice::{Cube, Edge, Vertex, Window};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KillParams {
    t: f64,
    dim: usize,
}

impl KillParams {
    pub fn new(t: f64, dim: usize) -> Result<Self> {
        check_finite_positive("T", t)?;
        if dim == 0 || dim > crate::lattice::MAX_DIM {
            return Err(FriError::InvalidParameter(format!("dimension {dim}")));
        }
        Ok(KillParams { t, dim })
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Per-step survival probability `T / (T + 1)`.
    pub fn survival(&self) -> f64 {
        self.t / (self.t + 1.0)
    }

    /// Per-vertex Poisson intensity `2 d u / (T + 1)` of the walk soup.
    pub fn intensity(&self, u: f64) -> f64 {
        2.0 * self.dim as f64 * u / (self.t + 1.0)
    }

    pub fn length_pmf(&self, k: u64) -> f64 {
        self.survival().powi(k as i32) / (self.t + 1.0)
    }

    /// `P[|η| >= k] = p^k`.
    pub fn length_tail(&self, k: u64) -> f64 {
        self.survival().powf(k as f64)
    }
}

/// A closed interval `[lo, hi]` enclosing an exact value.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn point(x: f64) -> Self {
        Interval { lo: x, hi: x }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn mid(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn widen(&self, by: f64) -> Interval {
        Interval { lo: self.lo - by, hi: self.hi + by }
    }
}

/// A nearest-neighbour path given by its start and direction codes
/// (`axis = code / 2`, even codes step in the positive direction).
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Path {
    start: Vertex,
    steps: Vec<u8>,
}

impl Path {
    pub fn new(start: Vertex, steps: Vec<u8>) -> Result<Path> {
        let codes = 2 * start.dim() as u8;
        if let Some(bad) = steps.iter().find(|&&c| c >= codes) {
            return Err(FriError::MalformedPath(format!("direction code {bad}")));
        }
        Ok(Path { start, steps })
    }

    pub fn from_vertices(vs: &[Vertex]) -> Result<Path> {
        let start = *vs.first().ok_or_else(|| FriError::MalformedPath("no vertices".into()))?;
        let mut steps = Vec::with_capacity(vs.len() - 1);
        for w in vs.windows(2) {
            let e = Edge::new(w[0], w[1]).map_err(|_| FriError::MalformedPath(format!("{} -> {}", w[0], w[1])))?;
            let axis = e.axis();
            let up = w[1].coord(axis) > w[0].coord(axis);
            steps.push(2 * axis as u8 + if up { 0 } else { 1 });
        }
        Ok(Path { start, steps })
    }

    pub fn start(&self) -> Vertex {
        self.start
    }

    pub fn steps(&self) -> &[u8] {
        &self.steps
    }

    /// Number of steps `|η|`.
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn vertices(&self) -> impl Iterator<Item = Vertex> + '_ {
        std::iter::once(self.start).chain(self.steps.iter().scan(self.start, |x, &c| {
            *x = x.step(c);
            Some(*x)
        }))
    }

    pub fn end(&self) -> Vertex {
        self.vertices().last().unwrap()
    }

    /// All `|η|` traversed edges, with repetition.
    pub fn edges(&self) -> impl Iterator<Item = Edge> + '_ {
        self.steps.iter().scan(self.start, |x, &c| {
            let y = x.step(c);
            let e = Edge::new(*x, y).unwrap();
            *x = y;
            Some(e)
        })
    }

    pub fn traverses(&self, e: &Edge) -> bool {
        self.edges().any(|f| f == *e)
    }

    pub fn truncated(&self, len: usize) -> Path {
        Path { start: self.start, steps: self.steps[..len.min(self.steps.len())].to_vec() }
    }
}

/// Samples an integer in `[lo, hi]` with probability proportional to `p^k`.
pub fn sample_length_between<R: Rng + ?Sized>(p: f64, lo: u64, hi: Option<u64>, rng: &mut R) -> u64 {
    if let Some(h) = hi {
        debug_assert!(h >= lo);
    }
    if p <= 0.0 {
        return lo;
    }
    let tail = match hi {
        Some(h) => p.powf((h - lo + 1) as f64),
        None => 0.0,
    };
    let u: f64 = rng.random();
    let g = ((1.0 - u * (1.0 - tail)).ln() / p.ln()).floor();
    let g = if g.is_finite() && g >= 0.0 { g as u64 } else { 0 };
    match hi {
        Some(h) => lo + g.min(h - lo),
        None => lo + g,
    }
}

pub fn sample_length<R: Rng + ?Sized>(params: &KillParams, rng: &mut R) -> u64 {
    sample_length_between(params.survival(), 0, None, rng)
}

pub fn sample_steps<R: Rng + ?Sized>(len: u64, dim: usize, rng: &mut R, out: &mut Vec<u8>) {
    let codes = 2 * dim as u8;
    out.extend((0..len).map(|_| rng.random_range(0..codes)));
}

pub fn sample_path<R: Rng + ?Sized>(x: Vertex, params: &KillParams, rng: &mut R) -> Path {
    let len = sample_length(params, rng);
    let mut steps = Vec::with_capacity(len as usize);
    sample_steps(len, params.dim(), rng, &mut steps);
    Path { start: x, steps }
}

/// `P_x[η] = (1 / (T + 1)) (T / (2d (T + 1)))^{|η|}`.
pub fn path_probability(path: &Path, params: &KillParams) -> Result<f64> {
    if path.start.dim() != params.dim() {
        return Err(FriError::DimensionMismatch { expected: params.dim(), found: path.start.dim() });
    }
    let per_step = params.survival() / (2.0 * params.dim() as f64);
    Ok(per_step.powi(path.len() as i32) / (params.t() + 1.0))
}

const HORIZON_CAP: u64 = 10_000;
const DP_CELL_CAP: u128 = 40_000_000;

fn horizon_for(p: f64, target: f64) -> Result<u64> {
    if target <= 0.0 || !target.is_finite() {
        return Err(FriError::InvalidParameter(format!("tail tolerance {target}")));
    }
    let mut h = 0u64;
    let mut tail = 1.0;
    while tail >= target {
        h += 1;
        tail *= p;
        if h > HORIZON_CAP {
            return Err(FriError::TooLarge(format!("horizon exceeds {HORIZON_CAP} steps")));
        }
    }
    Ok(h)
}

fn dp_window(center: Vertex, radius: i64) -> Result<Window> {
    let cells = (2 * radius as u128 + 1).pow(center.dim() as u32);
    if cells > DP_CELL_CAP {
        return Err(FriError::TooLarge(format!("dynamic programme with {cells} cells")));
    }
    Window::new(Cube::new(center, radius)?)
}

/// Encloses `P_z[η traverses e]` by propagating the untraversed mass for `h`
/// steps, `h` chosen so that the surviving mass is below `tail_tol`.
pub fn edge_visit_probability(z: Vertex, e: &Edge, params: &KillParams, tail_tol: f64) -> Result<Interval> {
    let p = params.survival();
    let h = horizon_for(p, tail_tol)? as i64;
    let w = dp_window(z, h)?;
    let (a, b) = match (w.index(&e.lo()), w.index(&e.hi())) {
        (Some(a), Some(b)) => (a, b),
        _ => return Ok(Interval { lo: 0.0, hi: p.powf(h as f64) }),
    };
    let d = params.dim();
    let move_w = p / (2.0 * d as f64);
    let mut cur = vec![0.0f64; w.num_vertices()];
    let mut next = vec![0.0f64; w.num_vertices()];
    cur[w.index(&z).unwrap()] = 1.0;
    let mut hit = 0.0;
    for k in 0..h {
        next.iter_mut().for_each(|x| *x = 0.0);
        for idx in 0..cur.len() {
            let m = cur[idx];
            if m == 0.0 {
                continue;
            }
            debug_assert!(w.index_norm(idx) <= k);
            let m = m * move_w;
            for axis in 0..d {
                let s = w.strides()[axis];
                for j in [idx + s, idx - s] {
                    if (idx == a && j == b) || (idx == b && j == a) {
                        hit += m;
                    } else {
                        next[j] += m;
                    }
                }
            }
        }
        std::mem::swap(&mut cur, &mut next);
    }
    let rest: f64 = cur.iter().sum();
    Ok(Interval { lo: hit, hi: hit + rest })
}

/// Encloses `Σ_z P_z[η traverses e, |η| <= L]` (no length cap when `max_len`
/// is `None`) by backward value iteration.
///
/// The untruncated remainder after `n` iterations is at most
/// `p^{n+1} / (d (1 - p))`, since the expected number of traversals of `e`
/// at step `k + 1`, summed over all starting points, is `p^{k+1} / d`.
pub fn edge_visit_sum(e: &Edge, params: &KillParams, max_len: Option<u64>, tail_tol: f64) -> Result<Interval> {
    let p = params.survival();
    let d = params.dim();
    if tail_tol <= 0.0 || !tail_tol.is_finite() {
        return Err(FriError::InvalidParameter(format!("tail tolerance {tail_tol}")));
    }
    let slack = |n: u64| p.powf(n as f64 + 1.0) / (d as f64 * (1.0 - p));
    let mut horizon = 0u64;
    while slack(horizon) >= tail_tol {
        horizon += 1;
        if horizon > HORIZON_CAP {
            return Err(FriError::TooLarge(format!("horizon exceeds {HORIZON_CAP} steps")));
        }
    }
    let n = match max_len {
        Some(l) => l.min(horizon),
        None => horizon,
    };
    let w = dp_window(e.lo(), n as i64 + 1)?;
    let a = w.index(&e.lo()).unwrap();
    let b = w.index(&e.hi()).unwrap();
    let move_w = p / (2.0 * d as f64);
    let nv = w.num_vertices();
    // g: untruncated, f: length budget equal to the iteration count.
    let mut g = vec![0.0f64; nv];
    let mut f = vec![0.0f64; nv];
    let mut g2 = vec![0.0f64; nv];
    let mut f2 = vec![0.0f64; nv];
    let side = w.side() as usize;
    for r in 1..=n {
        let cross_f = 1.0 - p.powf(r as f64 - 1.0) * p;
        for y in 0..nv {
            let mut sg = 0.0;
            let mut sf = 0.0;
            for axis in 0..d {
                let s = w.strides()[axis];
                let c = (y / s) % side;
                for (ok, j) in [(c + 1 < side, y.wrapping_add(s)), (c > 0, y.wrapping_sub(s))] {
                    if !ok {
                        continue;
                    }
                    if (y == a && j == b) || (y == b && j == a) {
                        sg += 1.0;
                        sf += cross_f;
                    } else {
                        sg += g[j];
                        sf += f[j];
                    }
                }
            }
            g2[y] = move_w * sg;
            f2[y] = move_w * sf;
        }
        std::mem::swap(&mut g, &mut g2);
        std::mem::swap(&mut f, &mut f2);
    }
    let sum_g: f64 = g.iter().sum();
    let sum_f: f64 = f.iter().sum();
    Ok(match max_len {
        Some(l) if l <= horizon => Interval::point(sum_f),
        Some(_) => Interval { lo: sum_f, hi: sum_g + slack(n) },
        None => Interval { lo: sum_g, hi: sum_g + slack(n) },
    })
}

/// For each `n` in `0..=max_n`, the number of sampled walks from the origin
/// whose maximal `l∞` displacement reaches `n`.
pub fn sup_norm_tail_counts<R: Rng + ?Sized>(params: &KillParams, max_n: usize, trials: u64, rng: &mut R) -> Vec<u64> {
    let mut counts = vec![0u64; max_n + 1];
    let mut steps = Vec::new();
    let d = params.dim();
    for _ in 0..trials {
        steps.clear();
        let len = sample_length(params, rng);
        sample_steps(len, d, rng, &mut steps);
        let mut x = [0i64; crate::lattice::MAX_DIM];
        let mut best = 0i64;
        for &c in &steps {
            let axis = (c / 2) as usize;
            x[axis] += if c % 2 == 0 { 1 } else { -1 };
            best = best.max(x[axis].abs());
        }
        for slot in counts.iter_mut().take((best as usize).min(max_n) + 1) {
            *slot += 1;
        }
    }
    counts
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::trial_rng;

    fn v(c: &[i64]) -> Vertex {
        Vertex::new(c)
    }

    #[test]
    fn path_probability_single_step() {
        // d = 3, T = 1: (1/2) * (1/12).
        let params = KillParams::new(1.0, 3).unwrap();
        let path = Path::from_vertices(&[v(&[0, 0, 0]), v(&[1, 0, 0])]).unwrap();
        assert!((path_probability(&path, &params).unwrap() - 1.0 / 24.0).abs() < 1e-15);
    }

    #[test]
    fn path_probabilities_of_each_length_sum_to_the_length_law() {
        // Summing P_x over all 36 two-step paths in d = 3 gives P[|η| = 2].
        let params = KillParams::new(2.0, 3).unwrap();
        let mut total = 0.0;
        for a in 0..6u8 {
            for b in 0..6u8 {
                total += path_probability(&Path::new(v(&[0, 0, 0]), vec![a, b]).unwrap(), &params).unwrap();
            }
        }
        assert!((total - params.length_pmf(2)).abs() < 1e-15);
    }

    #[test]
    fn malformed_paths_are_rejected() {
        assert!(Path::from_vertices(&[v(&[0, 0]), v(&[1, 1])]).is_err());
        assert!(Path::new(v(&[0, 0]), vec![4]).is_err());
    }

    #[test]
    fn path_edges_include_the_last_step() {
        let p = Path::from_vertices(&[v(&[0, 0]), v(&[1, 0]), v(&[1, 1])]).unwrap();
        let es: Vec<Edge> = p.edges().collect();
        assert_eq!(es.len(), 2);
        assert_eq!(es[1], Edge::new(v(&[1, 0]), v(&[1, 1])).unwrap());
        assert_eq!(p.end(), v(&[1, 1]));
    }

    #[test]
    fn truncated_length_sampler_respects_bounds() {
        let mut rng = trial_rng(1, 2, 3);
        for _ in 0..2000 {
            let k = sample_length_between(0.7, 3, Some(5), &mut rng);
            assert!((3..=5).contains(&k));
        }
        assert_eq!(sample_length_between(0.7, 4, Some(4), &mut rng), 4);
    }

    #[test]
    fn first_step_visit_probability() {
        // From an endpoint the first step crosses e with probability p / (2d),
        // and the enclosure must contain that plus later returns.
        let params = KillParams::new(1.0, 2).unwrap();
        let e = Edge::new(v(&[0, 0]), v(&[1, 0])).unwrap();
        let iv = edge_visit_probability(v(&[0, 0]), &e, &params, 1e-10).unwrap();
        assert!(iv.lo >= 0.5 / 4.0);
        assert!(iv.width() < 1e-9);
    }

    #[test]
    fn visit_sum_matches_sum_of_visit_probabilities() {
        let params = KillParams::new(1.0, 2).unwrap();
        let e = Edge::new(v(&[0, 0]), v(&[1, 0])).unwrap();
        let tol = 1e-12;
        let sum = edge_visit_sum(&e, &params, None, 1e-10).unwrap();
        let mut lo = 0.0;
        let mut hi = 0.0;
        for z in Cube::centered(2, 40).vertices() {
            let iv = edge_visit_probability(z, &e, &params, tol).unwrap();
            lo += iv.lo;
            hi += iv.hi;
        }
        assert!(sum.lo <= hi + 1e-9 && lo <= sum.hi + 1e-9, "{sum:?} vs [{lo}, {hi}]");
    }

    #[test]
    fn truncated_visit_sum_of_length_one() {
        // Only single-step paths: two starting points, each crossing w.p. (1/(T+1)) p / (2d).
        let params = KillParams::new(1.0, 3).unwrap();
        let e = Edge::along(Vertex::origin(3), 0);
        let s = edge_visit_sum(&e, &params, Some(1), 1e-12).unwrap();
        let expect = 2.0 * 0.5 * 0.5 / 6.0;
        assert!((s.lo - expect).abs() < 1e-15 && s.width() == 0.0);
    }
}
