//! Sampling finitary random interlacements in a finite window.
//!
//! Every vertex emits `Poisson(2du/(T+1))` killed walks. Only walks that can
//! reach the window are materialised: vertices of the window emit every walk,
//! while a vertex at `l∞` distance `k` outside it emits `Poisson(λ p^k)` walks
//! of length at least `k` (by memorylessness, `k` plus a fresh geometric).
//! Walks born further out than the padding radius are dropped; the expected
//! number of such walks that could reach the window is below `intrusion_tol`.

use rand::Rng;
use rand_distr::{Distribution, Poisson};

use crate::error::{check_finite_nonneg, FriError, Result};
use crate::killed_walk::{edge_visit_sum, sample_length_between, Interval, KillParams, Path};
use crate::lattice::{Cube, Edge, EdgeSet, Vertex, Window, MAX_DIM};

pub const DEFAULT_INTRUSION_TOL: f64 = 1e-6;

/// Flat storage for a multiset of paths.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PathSoup {
    dim: usize,
    starts: Vec<i64>,
    offsets: Vec<u32>,
    steps: Vec<u8>,
}

impl PathSoup {
    pub fn new(dim: usize) -> Self {
        PathSoup { dim, starts: Vec::new(), offsets: vec![0], steps: Vec::new() }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn push(&mut self, start: &[i64], steps: &[u8]) {
        debug_assert_eq!(start.len(), self.dim);
        self.starts.extend_from_slice(start);
        self.steps.extend_from_slice(steps);
        self.offsets.push(self.steps.len() as u32);
    }

    pub fn push_path(&mut self, path: &Path) {
        self.push(path.start().coords(), path.steps());
    }

    pub fn start(&self, i: usize) -> Vertex {
        Vertex::new(self.start_coords(i))
    }

    pub fn start_coords(&self, i: usize) -> &[i64] {
        &self.starts[i * self.dim..(i + 1) * self.dim]
    }

    pub fn steps(&self, i: usize) -> &[u8] {
        &self.steps[self.offsets[i] as usize..self.offsets[i + 1] as usize]
    }

    pub fn path_len(&self, i: usize) -> usize {
        (self.offsets[i + 1] - self.offsets[i]) as usize
    }

    pub fn path(&self, i: usize) -> Path {
        Path::new(self.start(i), self.steps(i).to_vec()).expect("stored paths are well formed")
    }

    pub fn paths(&self) -> impl Iterator<Item = Path> + '_ {
        (0..self.len()).map(|i| self.path(i))
    }

    pub fn extend(&mut self, other: &PathSoup) {
        for i in 0..other.len() {
            self.push(other.start_coords(i), other.steps(i));
        }
    }

    /// Keeps path `i` when `keep(i)` holds.
    pub fn filter(&self, mut keep: impl FnMut(usize) -> bool) -> PathSoup {
        let mut out = PathSoup::new(self.dim);
        for i in 0..self.len() {
            if keep(i) {
                out.push(self.start_coords(i), self.steps(i));
            }
        }
        out
    }
}

/// Adds every traversed edge of the soup lying inside the window.
pub fn trace_into(soup: &PathSoup, edges: &mut EdgeSet) {
    for i in 0..soup.len() {
        trace_path_into(soup.start_coords(i), soup.steps(i), edges);
    }
}

pub fn trace_path_into(start: &[i64], steps: &[u8], edges: &mut EdgeSet) {
    let w = edges.window().clone();
    for_each_window_edge(start, steps, &w, |slot| edges.insert_slot(slot));
}

/// Calls `f` with the slot of every traversed edge lying inside the window.
pub fn for_each_window_edge(start: &[i64], steps: &[u8], w: &Window, mut f: impl FnMut(usize)) {
    let d = w.dim();
    let side = w.side();
    let lo = w.lo();
    let strides = w.strides();
    let mut r = [0i64; MAX_DIM];
    let mut outside = 0usize;
    let mut idx: i64 = 0;
    for i in 0..d {
        r[i] = start[i] - lo[i];
        if r[i] < 0 || r[i] >= side {
            outside += 1;
        }
        idx += r[i] * strides[i] as i64;
    }
    for &c in steps {
        let axis = (c / 2) as usize;
        let delta = if c % 2 == 0 { 1 } else { -1 };
        let was_inside = outside == 0;
        let old = r[axis];
        let new = old + delta;
        let old_in = old >= 0 && old < side;
        let new_in = new >= 0 && new < side;
        if old_in && !new_in {
            outside += 1;
        } else if !old_in && new_in {
            outside -= 1;
        }
        r[axis] = new;
        let old_idx = idx;
        idx += delta * strides[axis] as i64;
        if was_inside && outside == 0 {
            let lower = old_idx.min(idx) as usize;
            f(lower * d + (d - 1 - axis));
        }
    }
}

/// Number of vertices at `l∞` distance exactly `k >= 1` outside `B(R)`.
fn shell_size(radius: i64, k: i64, dim: usize) -> f64 {
    let outer = (2 * (radius + k) + 1) as f64;
    let inner = (2 * (radius + k) - 1) as f64;
    outer.powi(dim as i32) - inner.powi(dim as i32)
}

/// Smallest padding `q` such that the expected number of walks born at
/// distance greater than `q` from the box and long enough to reach it is below
/// `tol`. Walks capped at `max_len` never come from beyond that distance.
pub fn padding_radius(cube: &Cube, lambda: f64, p: f64, max_len: Option<u64>, tol: f64) -> Result<i64> {
    check_finite_nonneg("intensity", lambda)?;
    if !(tol > 0.0) {
        return Err(FriError::InvalidParameter(format!("intrusion tolerance {tol}")));
    }
    let cap = max_len.map(|l| l as i64);
    if lambda == 0.0 || p == 0.0 {
        return Ok(0);
    }
    let d = cube.dim();
    let term = |k: i64| lambda * shell_size(cube.radius, k, d) * p.powf(k as f64);
    let mut terms = Vec::new();
    let mut k = 1i64;
    let remainder;
    loop {
        let t = term(k);
        terms.push(t);
        let ratio = term(k + 1) / t;
        if ratio < 1.0 && t * ratio / (1.0 - ratio) < tol * 1e-3 {
            remainder = t * ratio / (1.0 - ratio);
            break;
        }
        if cap.is_some_and(|c| k >= c) {
            remainder = 0.0;
            break;
        }
        k += 1;
        if k > 100_000 {
            return Err(FriError::TooLarge("padding radius".into()));
        }
    }
    let mut tail = remainder;
    let mut q = terms.len() as i64;
    while q > 0 && tail + terms[q as usize - 1] < tol {
        tail += terms[q as usize - 1];
        q -= 1;
    }
    Ok(match cap {
        Some(c) => q.min(c),
        None => q,
    })
}

pub(crate) fn poisson<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean).expect("finite positive mean").sample(rng) as u64
}

fn uniform_in_cube<R: Rng + ?Sized>(cube: &Cube, rng: &mut R, out: &mut [i64]) {
    for (i, o) in out.iter_mut().enumerate() {
        let c = cube.center.coord(i);
        *o = rng.random_range(c - cube.radius..=c + cube.radius);
    }
}

/// Uniform point on `{y : |y - c| = r}`, `r >= 1`: choose a face uniformly,
/// a uniform point on it, and accept with probability one over the number of
/// faces containing the point.
fn uniform_on_sphere<R: Rng + ?Sized>(cube: &Cube, rng: &mut R, out: &mut [i64]) {
    let d = cube.dim();
    let r = cube.radius;
    loop {
        uniform_in_cube(cube, rng, out);
        let axis = rng.random_range(0..d);
        let sign = if rng.random::<bool>() { 1 } else { -1 };
        out[axis] = cube.center.coord(axis) + sign * r;
        let faces = (0..d).filter(|&i| (out[i] - cube.center.coord(i)).abs() == r).count();
        if faces == 1 || rng.random_range(0..faces) == 0 {
            return;
        }
    }
}

/// Walk lengths are drawn from the killed-walk law restricted to `[lo, hi]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LengthBand {
    pub lo: u64,
    pub hi: Option<u64>,
}

impl LengthBand {
    pub const ALL: LengthBand = LengthBand { lo: 0, hi: None };

    pub fn at_most(l: u64) -> Self {
        LengthBand { lo: 0, hi: Some(l) }
    }

    fn mass(&self, p: f64, from: u64) -> Option<(u64, f64)> {
        let a = self.lo.max(from);
        match self.hi {
            Some(h) if h < a => None,
            Some(h) => Some((a, p.powf(a as f64) - p.powf(h as f64 + 1.0))),
            None => Some((a, p.powf(a as f64))),
        }
    }
}

/// Appends the walks emitted with per-vertex intensity `lambda` (lengths in
/// `band`) that can reach `cube`, from `cube` grown by `pad`.
pub fn sample_soup_into<R: Rng + ?Sized>(
    soup: &mut PathSoup,
    cube: &Cube,
    pad: i64,
    lambda: f64,
    params: &KillParams,
    band: LengthBand,
    rng: &mut R,
) {
    let d = cube.dim();
    let p = params.survival();
    let mut start = [0i64; MAX_DIM];
    let mut steps = Vec::new();
    let mut emit = |soup: &mut PathSoup, start: &[i64], lo: u64, rng: &mut R| {
        let len = sample_length_between(p, lo, band.hi, rng);
        steps.clear();
        crate::killed_walk::sample_steps(len, d, rng, &mut steps);
        soup.push(start, &steps);
    };
    if let Some((a, mass)) = band.mass(p, 0) {
        let n = poisson(lambda * mass * cube.num_vertices() as f64, rng);
        for _ in 0..n {
            uniform_in_cube(cube, rng, &mut start[..d]);
            emit(soup, &start[..d], a, rng);
        }
    }
    for k in 1..=pad {
        let Some((a, mass)) = band.mass(p, k as u64) else { continue };
        let shell = cube.grow(k);
        let n = poisson(lambda * mass * shell_size(cube.radius, k, d), rng);
        for _ in 0..n {
            uniform_on_sphere(&shell, rng, &mut start[..d]);
            emit(soup, &start[..d], a, rng);
        }
    }
}

/// A realisation of `FI^{u,T}` (or `FI_L^{u,T}`) around a window.
#[derive(Clone, Debug)]
pub struct FriSample {
    u: f64,
    params: KillParams,
    pad: i64,
    max_len: Option<u64>,
    soup: PathSoup,
    edges: EdgeSet,
}

impl FriSample {
    pub fn from_soup(u: f64, params: KillParams, window: Window, pad: i64, max_len: Option<u64>, soup: PathSoup) -> Self {
        let mut edges = EdgeSet::new(window);
        trace_into(&soup, &mut edges);
        FriSample { u, params, pad, max_len, soup, edges }
    }

    pub fn u(&self) -> f64 {
        self.u
    }

    pub fn params(&self) -> &KillParams {
        &self.params
    }

    pub fn t(&self) -> f64 {
        self.params.t()
    }

    pub fn window(&self) -> &Window {
        self.edges.window()
    }

    pub fn pad(&self) -> i64 {
        self.pad
    }

    pub fn max_len(&self) -> Option<u64> {
        self.max_len
    }

    pub fn soup(&self) -> &PathSoup {
        &self.soup
    }

    /// Edges traversed by the sample, clipped to the window.
    pub fn edges(&self) -> &EdgeSet {
        &self.edges
    }

    pub fn into_edges(self) -> EdgeSet {
        self.edges
    }

    /// Number of sampled walks started at `x`.
    pub fn count_from(&self, x: &Vertex) -> usize {
        (0..self.soup.len()).filter(|&i| self.soup.start_coords(i) == x.coords()).count()
    }

    /// `FI_L`: keeps the walks with at most `l` steps.
    pub fn truncate(&self, l: u64) -> FriSample {
        let soup = self.soup.filter(|i| self.soup.path_len(i) as u64 <= l);
        let max_len = Some(self.max_len.map_or(l, |m| m.min(l)));
        FriSample::from_soup(self.u, self.params, self.window().clone(), self.pad, max_len, soup)
    }

    /// Union of two independent soups with the same `T` over the same window.
    pub fn superpose(&self, other: &FriSample) -> Result<FriSample> {
        if self.window() != other.window() {
            return Err(FriError::InvalidParameter("superposing samples over different windows".into()));
        }
        if self.params != other.params {
            return Err(FriError::InvalidParameter("superposing samples with different T".into()));
        }
        let mut soup = self.soup.clone();
        soup.extend(&other.soup);
        let mut edges = self.edges.clone();
        edges.union_with(&other.edges)?;
        let max_len = match (self.max_len, other.max_len) {
            (Some(a), Some(b)) => Some(a.max(b)),
            _ => None,
        };
        Ok(FriSample { u: self.u + other.u, params: self.params, pad: self.pad.max(other.pad), max_len, soup, edges })
    }

    pub fn to_text(&self) -> String {
        write_text(self.window().cube(), self.pad, self.u, &self.params, self.max_len, &self.soup, None)
    }

    pub fn from_text(text: &str) -> Result<FriSample> {
        let parsed = read_text(text)?;
        if parsed.labels.is_some() {
            return Err(FriError::Parse("labelled sample where an unlabelled one was expected".into()));
        }
        Ok(FriSample::from_soup(parsed.u, parsed.params, Window::new(parsed.cube)?, parsed.pad, parsed.max_len, parsed.soup))
    }
}

/// Samples `FI^{u,T}` (or `FI_L^{u,T}` when `max_len` is set) around `cube`.
pub fn sample_fri<R: Rng + ?Sized>(
    u: f64,
    params: KillParams,
    cube: &Cube,
    max_len: Option<u64>,
    intrusion_tol: f64,
    rng: &mut R,
) -> Result<FriSample> {
    check_finite_nonneg("u", u)?;
    let window = Window::new(*cube)?;
    let lambda = params.intensity(u);
    let pad = padding_radius(cube, lambda, params.survival(), max_len, intrusion_tol)?;
    let mut soup = PathSoup::new(cube.dim());
    let band = LengthBand { lo: 0, hi: max_len };
    sample_soup_into(&mut soup, cube, pad, lambda, &params, band, rng);
    Ok(FriSample::from_soup(u, params, window, pad, max_len, soup))
}

/// Walks decorated with independent labels uniform on `(label_lo, label_hi]`.
/// Thresholding at `u` keeps the walks with label at most `u`.
#[derive(Clone, Debug)]
pub struct DecoratedSample {
    label_lo: f64,
    label_hi: f64,
    params: KillParams,
    window: Window,
    pad: i64,
    max_len: Option<u64>,
    soup: PathSoup,
    labels: Vec<f64>,
}

impl DecoratedSample {
    pub fn u_max(&self) -> f64 {
        self.label_hi
    }

    pub fn label_range(&self) -> (f64, f64) {
        (self.label_lo, self.label_hi)
    }

    pub fn params(&self) -> &KillParams {
        &self.params
    }

    pub fn window(&self) -> &Window {
        &self.window
    }

    pub fn pad(&self) -> i64 {
        self.pad
    }

    pub fn soup(&self) -> &PathSoup {
        &self.soup
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    /// `FI^{u,T}` obtained by keeping labels `<= u`.
    pub fn threshold(&self, u: f64) -> Result<FriSample> {
        if !(u >= 0.0 && u <= self.label_hi) {
            return Err(FriError::InvalidParameter(format!("threshold {u} outside [0, {}]", self.label_hi)));
        }
        let soup = self.soup.filter(|i| self.labels[i] <= u);
        Ok(FriSample::from_soup(u, self.params, self.window.clone(), self.pad, self.max_len, soup))
    }

    /// Path indices in increasing label order.
    pub fn order_by_label(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.labels.len()).collect();
        idx.sort_by(|&a, &b| self.labels[a].total_cmp(&self.labels[b]));
        idx
    }

    pub fn to_text(&self) -> String {
        write_text(self.window.cube(), self.pad, self.label_hi, &self.params, self.max_len, &self.soup, Some(&self.labels))
    }

    pub fn from_text(text: &str) -> Result<DecoratedSample> {
        let parsed = read_text(text)?;
        let labels = parsed.labels.ok_or_else(|| FriError::Parse("decorated sample without labels".into()))?;
        Ok(DecoratedSample {
            label_lo: 0.0,
            label_hi: parsed.u,
            params: parsed.params,
            window: Window::new(parsed.cube)?,
            pad: parsed.pad,
            max_len: parsed.max_len,
            soup: parsed.soup,
            labels,
        })
    }
}

/// Decorated walks with labels in `(label_lo, label_hi]`; the padding is
/// supplied so that successive label slabs share one window.
pub fn sample_decorated_slab<R: Rng + ?Sized>(
    label_lo: f64,
    label_hi: f64,
    params: KillParams,
    cube: &Cube,
    pad: i64,
    max_len: Option<u64>,
    rng: &mut R,
) -> Result<DecoratedSample> {
    if !(label_lo >= 0.0 && label_hi > label_lo && label_hi.is_finite()) {
        return Err(FriError::InvalidParameter(format!("label range ({label_lo}, {label_hi}]")));
    }
    let mut soup = PathSoup::new(cube.dim());
    let lambda = params.intensity(label_hi - label_lo);
    sample_soup_into(&mut soup, cube, pad, lambda, &params, LengthBand { lo: 0, hi: max_len }, rng);
    let labels = (0..soup.len()).map(|_| label_hi - rng.random::<f64>() * (label_hi - label_lo)).collect();
    Ok(DecoratedSample { label_lo, label_hi, params, window: Window::new(*cube)?, pad, max_len, soup, labels })
}

/// The decorated construction with labels uniform on `(0, u_max]`.
pub fn sample_decorated<R: Rng + ?Sized>(
    u_max: f64,
    params: KillParams,
    cube: &Cube,
    max_len: Option<u64>,
    intrusion_tol: f64,
    rng: &mut R,
) -> Result<DecoratedSample> {
    crate::error::check_finite_positive("u_max", u_max)?;
    let pad = padding_radius(cube, params.intensity(u_max), params.survival(), max_len, intrusion_tol)?;
    sample_decorated_slab(0.0, u_max, params, cube, pad, max_len, rng)
}

/// Encloses `P[e ∉ FI^{u,T}] = exp(-(2du/(T+1)) Σ_z P_z[η ∋ e])`.
pub fn edge_absence_probability(e: &Edge, u: f64, params: &KillParams, max_len: Option<u64>, tail_tol: f64) -> Result<Interval> {
    check_finite_nonneg("u", u)?;
    let s = edge_visit_sum(e, params, max_len, tail_tol)?;
    let lambda = params.intensity(u);
    Ok(Interval { lo: (-lambda * s.hi).exp(), hi: (-lambda * s.lo).exp() })
}

pub fn edge_presence_probability(e: &Edge, u: f64, params: &KillParams, max_len: Option<u64>, tail_tol: f64) -> Result<Interval> {
    let a = edge_absence_probability(e, u, params, max_len, tail_tol)?;
    Ok(Interval { lo: 1.0 - a.hi, hi: 1.0 - a.lo })
}

struct ParsedSample {
    cube: Cube,
    pad: i64,
    u: f64,
    params: KillParams,
    max_len: Option<u64>,
    soup: PathSoup,
    labels: Option<Vec<f64>>,
}

fn join_coords(c: &[i64]) -> String {
    c.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

pub fn steps_to_letters(steps: &[u8]) -> String {
    let mut s = String::with_capacity(2 * steps.len());
    for &c in steps {
        s.push(if c % 2 == 0 { '+' } else { '-' });
        s.push_str(&(c / 2 + 1).to_string());
    }
    s
}

pub fn letters_to_steps(s: &str, dim: usize) -> Result<Vec<u8>> {
    let bytes = s.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let sign = match bytes[i] {
            b'+' => 0u8,
            b'-' => 1u8,
            other => return Err(FriError::Parse(format!("bad step sign {:?}", other as char))),
        };
        i += 1;
        let j = (i..bytes.len()).find(|&k| !bytes[k].is_ascii_digit()).unwrap_or(bytes.len());
        let axis: usize = s[i..j].parse().map_err(|_| FriError::Parse(format!("bad step axis in {s:?}")))?;
        if axis == 0 || axis > dim {
            return Err(FriError::Parse(format!("axis {axis} outside 1..={dim}")));
        }
        out.push(2 * (axis as u8 - 1) + sign);
        i = j;
    }
    Ok(out)
}

fn write_text(cube: &Cube, pad: i64, u: f64, params: &KillParams, max_len: Option<u64>, soup: &PathSoup, labels: Option<&[f64]>) -> String {
    let mut out = format!(
        "# fri-sample d={} u={:?} T={:?} center={} radius={} pad={} max_len={}\n",
        cube.dim(),
        u,
        params.t(),
        join_coords(cube.center.coords()),
        cube.radius,
        pad,
        max_len.map_or("none".to_string(), |l| l.to_string())
    );
    for i in 0..soup.len() {
        out.push_str(&join_coords(soup.start_coords(i)));
        out.push_str(" ; ");
        out.push_str(&steps_to_letters(soup.steps(i)));
        if let Some(l) = labels {
            out.push_str(&format!(" ; {:?}", l[i]));
        }
        out.push('\n');
    }
    out
}

fn parse_coords(s: &str) -> Result<Vec<i64>> {
    s.split(',').map(|x| x.trim().parse::<i64>().map_err(|_| FriError::Parse(format!("bad coordinate {x:?}")))).collect()
}

fn read_text(text: &str) -> Result<ParsedSample> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| FriError::Parse("empty input".into()))?;
    let header = header.strip_prefix("# fri-sample ").ok_or_else(|| FriError::Parse("missing sample header".into()))?;
    let field = |key: &str| -> Result<&str> {
        header
            .split_whitespace()
            .find_map(|kv| kv.strip_prefix(key).and_then(|r| r.strip_prefix('=')))
            .ok_or_else(|| FriError::Parse(format!("header lacks {key}")))
    };
    let num = |key: &str| -> Result<f64> { field(key)?.parse().map_err(|_| FriError::Parse(format!("bad {key}"))) };
    let d: usize = num("d")? as usize;
    let center = Vertex::new(&parse_coords(field("center")?)?);
    if center.dim() != d {
        return Err(FriError::DimensionMismatch { expected: d, found: center.dim() });
    }
    let cube = Cube::new(center, num("radius")? as i64)?;
    let params = KillParams::new(num("T")?, d)?;
    let max_len = match field("max_len")? {
        "none" => None,
        s => Some(s.parse().map_err(|_| FriError::Parse("bad max_len".into()))?),
    };
    let mut soup = PathSoup::new(d);
    let mut labels: Option<Vec<f64>> = None;
    for (n, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split(';').map(str::trim).collect();
        if parts.len() < 2 || parts.len() > 3 {
            return Err(FriError::Parse(format!("line {}: expected 2 or 3 fields", n + 2)));
        }
        let start = parse_coords(parts[0])?;
        if start.len() != d {
            return Err(FriError::DimensionMismatch { expected: d, found: start.len() });
        }
        let steps = letters_to_steps(parts[1], d)?;
        soup.push(&start, &steps);
        if parts.len() == 3 {
            let l: f64 = parts[2].parse().map_err(|_| FriError::Parse(format!("bad label {:?}", parts[2])))?;
            labels.get_or_insert_with(Vec::new).push(l);
        }
    }
    if labels.as_ref().is_some_and(|l| l.len() != soup.len()) {
        return Err(FriError::Parse("labels on some lines only".into()));
    }
    Ok(ParsedSample { cube, pad: num("pad")? as i64, u: num("u")?, params, max_len, soup, labels })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::trial_rng;

    #[test]
    fn tracing_matches_path_edges() {
        let w = Window::centered(2, 2);
        let path = Path::new(Vertex::new(&[-3, 0]), vec![0, 0, 2, 2, 2, 1]).unwrap();
        let mut soup = PathSoup::new(2);
        soup.push_path(&path);
        let mut traced = EdgeSet::new(w.clone());
        trace_into(&soup, &mut traced);
        let mut direct = EdgeSet::new(w.clone());
        for e in path.edges() {
            if w.cube().contains_edge(&e) {
                direct.insert(&e).unwrap();
            }
        }
        assert_eq!(traced, direct);
        assert_eq!(traced.len(), 3);
    }

    #[test]
    fn padding_shrinks_with_tolerance_and_respects_cap() {
        let cube = Cube::centered(3, 4);
        let p = 0.5;
        let tight = padding_radius(&cube, 3.0, p, None, 1e-9).unwrap();
        let loose = padding_radius(&cube, 3.0, p, None, 1e-3).unwrap();
        assert!(tight > loose);
        assert_eq!(padding_radius(&cube, 3.0, p, Some(2), 1e-9).unwrap(), 2);
        assert_eq!(padding_radius(&cube, 0.0, p, None, 1e-9).unwrap(), 0);
    }

    #[test]
    fn padding_bound_is_met() {
        let cube = Cube::centered(3, 4);
        let (lambda, p, tol) = (3.0, 0.5, 1e-6);
        let q = padding_radius(&cube, lambda, p, None, tol).unwrap();
        let tail: f64 = (q + 1..q + 400).map(|k| lambda * shell_size(4, k, 3) * p.powi(k as i32)).sum();
        assert!(tail < tol);
        let tail_prev: f64 = (q..q + 400).map(|k| lambda * shell_size(4, k, 3) * p.powi(k as i32)).sum();
        assert!(tail_prev >= tol);
    }

    #[test]
    fn sphere_sampler_stays_on_the_sphere() {
        let mut rng = trial_rng(3, 3, 3);
        let cube = Cube::centered(3, 5);
        let mut x = [0i64; 3];
        for _ in 0..500 {
            uniform_on_sphere(&cube, &mut rng, &mut x);
            assert_eq!(Vertex::new(&x).norm_linf(), 5);
        }
    }

    #[test]
    fn text_round_trip() {
        let mut rng = trial_rng(1, 1, 1);
        let params = KillParams::new(1.0, 3).unwrap();
        let s = sample_fri(0.5, params, &Cube::centered(3, 2), None, 1e-6, &mut rng).unwrap();
        let back = FriSample::from_text(&s.to_text()).unwrap();
        assert_eq!(back.soup(), s.soup());
        assert_eq!(back.edges(), s.edges());
        let dec = sample_decorated(1.0, params, &Cube::centered(3, 1), None, 1e-6, &mut rng).unwrap();
        let back = DecoratedSample::from_text(&dec.to_text()).unwrap();
        assert_eq!(back.labels(), dec.labels());
        assert_eq!(letters_to_steps("+1-3+2", 3).unwrap(), vec![0, 5, 2]);
        assert!(letters_to_steps("+4", 3).is_err());
    }

    #[test]
    fn zero_intensity_is_empty() {
        let mut rng = trial_rng(1, 1, 1);
        let params = KillParams::new(1.0, 2).unwrap();
        let s = sample_fri(0.0, params, &Cube::centered(2, 3), None, 1e-6, &mut rng).unwrap();
        assert!(s.soup().is_empty() && s.edges().is_empty());
    }
}
