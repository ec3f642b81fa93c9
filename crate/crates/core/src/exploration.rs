//! The randomized exploration algorithm over the `(𝒱, ℰ)` coding of
//! `γ_ε = FI_L ∪ Bernoulli(ε)`, revealment accounting, influences, and the
//! empirical OSSS inequality.
//!
//! `𝒱_x` is the bundle of walks of length at most `L` started at
//! `x ∈ B(R + L)`, stored as the set of edges of `𝓑(R)` it traverses, and
//! `ℰ_e` is an independent Bernoulli(`ε`) bit for `e ∈ 𝓑(R)`.

use std::collections::{BTreeSet, VecDeque};
use std::fmt::Write as _;

use fixedbitset::FixedBitSet;
use rand::Rng;
use rayon::prelude::*;

use crate::error::{check_finite_nonneg, FriError, Result};
use crate::events::reach_radius;
use crate::fri_process::{for_each_window_edge, poisson};
use crate::killed_walk::{sample_length_between, sample_steps, KillParams};
use crate::lattice::{Cube, Edge, EdgeSet, Vertex, Window};
use crate::rng::trial_rng;
use crate::stats::wilson;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OsssParams {
    pub r: i64,
    pub l: u64,
    pub eps: f64,
    pub u: f64,
    pub kill: KillParams,
}

impl OsssParams {
    pub fn new(r: i64, l: u64, eps: f64, u: f64, kill: KillParams) -> Result<Self> {
        if r < 1 {
            return Err(FriError::InvalidParameter(format!("R = {r} must be >= 1")));
        }
        if !(0.0..=1.0).contains(&eps) {
            return Err(FriError::InvalidParameter(format!("eps = {eps}")));
        }
        check_finite_nonneg("u", u)?;
        Ok(OsssParams { r, l, eps, u, kill })
    }

    pub fn dim(&self) -> usize {
        self.kill.dim()
    }

    /// Window of the edge bits, `B(R)`.
    pub fn edge_window(&self) -> Window {
        Window::centered(self.dim(), self.r)
    }

    /// Window of the bundle starting points, `B(R + L)`.
    pub fn bundle_window(&self) -> Window {
        Window::centered(self.dim(), self.r + self.l as i64)
    }
}

/// A fully sampled coding. The algorithm only reads it through
/// [`CodingSource`], which records what has been revealed.
#[derive(Clone, Debug)]
pub struct Coding {
    cfg: OsssParams,
    ewin: Window,
    vwin: Window,
    bundles: Vec<Vec<u32>>,
    bits: FixedBitSet,
}

fn sample_bundle<R: Rng + ?Sized>(cfg: &OsssParams, ewin: &Window, x: &Vertex, rng: &mut R) -> Vec<u32> {
    let p = cfg.kill.survival();
    let mass = 1.0 - p.powf(cfg.l as f64 + 1.0);
    let n = poisson(cfg.kill.intensity(cfg.u) * mass, rng);
    let mut slots = Vec::new();
    let mut steps = Vec::new();
    for _ in 0..n {
        let len = sample_length_between(p, 0, Some(cfg.l), rng);
        steps.clear();
        sample_steps(len, cfg.dim(), rng, &mut steps);
        for_each_window_edge(x.coords(), &steps, ewin, |s| slots.push(s as u32));
    }
    slots.sort_unstable();
    slots.dedup();
    slots
}

impl Coding {
    pub fn sample<R: Rng + ?Sized>(cfg: &OsssParams, rng: &mut R) -> Coding {
        let ewin = cfg.edge_window();
        let vwin = cfg.bundle_window();
        let bundles = (0..vwin.num_vertices()).map(|i| sample_bundle(cfg, &ewin, &vwin.vertex(i), rng)).collect();
        let mut bits = FixedBitSet::with_capacity(ewin.num_edge_slots());
        for s in 0..ewin.num_edge_slots() {
            if ewin.slot_is_valid(s) && rng.random::<f64>() < cfg.eps {
                bits.insert(s);
            }
        }
        Coding { cfg: *cfg, ewin, vwin, bundles, bits }
    }

    pub fn params(&self) -> &OsssParams {
        &self.cfg
    }

    pub fn edge_window(&self) -> &Window {
        &self.ewin
    }

    pub fn bundle_window(&self) -> &Window {
        &self.vwin
    }

    pub fn bundle(&self, vidx: usize) -> &[u32] {
        &self.bundles[vidx]
    }

    pub fn bit(&self, slot: usize) -> bool {
        self.bits.contains(slot)
    }

    /// `γ_ε ∩ 𝓑(j)`.
    pub fn gamma(&self, j: i64) -> EdgeSet {
        let mut out = EdgeSet::new(self.ewin.clone());
        let cube = Cube::centered(self.cfg.dim(), j);
        let full = j >= self.cfg.r;
        let mut add = |s: usize| {
            if full || cube.contains_edge(&self.ewin.edge(s)) {
                out.insert_slot(s);
            }
        };
        for b in &self.bundles {
            for &s in b {
                add(s as usize);
            }
        }
        for s in self.bits.ones() {
            add(s);
        }
        out
    }

    /// `1{0 ↔ ∂B(j)}` in `γ_ε ∩ 𝓑(j)`.
    pub fn xi(&self, j: i64) -> bool {
        let g = self.gamma(j);
        let cube = Cube::centered(self.cfg.dim(), j);
        reach_radius(&Vertex::origin(self.cfg.dim()), &g, &cube).expect("origin inside window") >= j
    }
}

/// Read access to a coding by component.
pub trait CodingSource {
    fn bit(&mut self, slot: usize) -> Result<bool>;
    fn bundle(&mut self, vidx: usize) -> Result<Vec<u32>>;
}

impl CodingSource for &Coding {
    fn bit(&mut self, slot: usize) -> Result<bool> {
        Ok(self.bits.contains(slot))
    }

    fn bundle(&mut self, vidx: usize) -> Result<Vec<u32>> {
        Ok(self.bundles[vidx].clone())
    }
}

/// Serves only the components recorded in a trace.
pub struct ReplayCoding {
    bits: std::collections::HashMap<usize, bool>,
    bundles: std::collections::HashMap<usize, Vec<u32>>,
}

impl CodingSource for ReplayCoding {
    fn bit(&mut self, slot: usize) -> Result<bool> {
        self.bits.get(&slot).copied().ok_or_else(|| FriError::Guard(format!("replay asked for unrecorded bit {slot}")))
    }

    fn bundle(&mut self, vidx: usize) -> Result<Vec<u32>> {
        self.bundles.get(&vidx).cloned().ok_or_else(|| FriError::Guard(format!("replay asked for unrecorded bundle {vidx}")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Action {
    /// `e_t` lies in an already sampled bundle.
    Covered,
    BitOpen,
    /// Bit closed and every bundle that could cover `e_t` is already sampled.
    BitClosedResolved,
    /// Bit closed, bundles still to inspect.
    BitClosedPending,
    /// Bundle of the given vertex index sampled and contains `e_t`.
    BundleHit(usize),
    /// Bundle sampled, misses `e_t`, more candidates remain.
    BundleMiss(usize),
    /// Last candidate bundle sampled and misses `e_t`.
    BundleMissResolved(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Decision {
    pub t: usize,
    pub slot: usize,
    pub action: Action,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunTrace {
    pub cfg: OsssParams,
    pub j: i64,
    pub decisions: Vec<Decision>,
    /// Final `𝓔_t`, `P_t`, `𝓒_t` (edge slots of `B(R)`, vertex indices of `B(R+L)`).
    pub remaining: Vec<usize>,
    pub p: Vec<usize>,
    pub c: Vec<usize>,
    pub outcome: bool,
    /// Revealed components in reveal order.
    pub revealed_v: Vec<(usize, Vec<u32>)>,
    pub revealed_e: Vec<(usize, bool)>,
}

/// Runs the algorithm for a fixed `j`.
///
/// Candidates at each step are the edges of `𝓔` that lie on the outer edge
/// boundary of `𝓒` or touch `∂B(j)`; the lexicographically smallest one is
/// `e_t`. Seeding from the boundary shell makes `𝓒` the union of the clusters
/// of `γ_ε ∩ 𝓑(j)` touching `∂B(j)`, so the outcome `1{0 ∈ V(𝓒)}` is `1_{ξ_j}`.
pub fn run_algorithm_t_with_j<S: CodingSource>(cfg: &OsssParams, j: i64, mut source: S) -> Result<RunTrace> {
    if !(1..=cfg.r).contains(&j) {
        return Err(FriError::InvalidParameter(format!("j = {j} outside 1..={}", cfg.r)));
    }
    let d = cfg.dim();
    let ewin = cfg.edge_window();
    let vwin = cfg.bundle_window();
    let cube = Cube::centered(d, j);
    let in_cube = |vi: usize| ewin.index_norm(vi) <= j;
    let on_shell = |vi: usize| ewin.index_norm(vi) == j;

    let mut e_set = FixedBitSet::with_capacity(ewin.num_edge_slots());
    let mut shell = FixedBitSet::with_capacity(ewin.num_edge_slots());
    let mut cand = BTreeSet::new();
    for e in cube.edges() {
        let s = ewin.edge_slot(&e).unwrap();
        e_set.insert(s);
        let (a, b) = ewin.edge_endpoints(s);
        if on_shell(a) || on_shell(b) {
            shell.insert(s);
            cand.insert(s);
        }
    }
    let total = e_set.count_ones(..);
    let mut in_c = FixedBitSet::with_capacity(ewin.num_edge_slots());
    let mut vc = FixedBitSet::with_capacity(ewin.num_vertices());
    let mut covered = FixedBitSet::with_capacity(ewin.num_edge_slots());
    let mut p_set = FixedBitSet::with_capacity(vwin.num_vertices());
    let mut sampled_e = FixedBitSet::with_capacity(ewin.num_edge_slots());
    let mut trace = RunTrace {
        cfg: *cfg,
        j,
        decisions: Vec::new(),
        remaining: Vec::new(),
        p: Vec::new(),
        c: Vec::new(),
        outcome: false,
        revealed_v: Vec::new(),
        revealed_e: Vec::new(),
    };
    let near_count = {
        let r = cfg.l as i64 - 1;
        if r < 0 {
            0
        } else {
            2 * (2 * r as usize + 1).pow(d as u32)
        }
    };
    let max_steps = total * (2 + near_count) + 1;

    let mut t = 0usize;
    loop {
        let e_t = loop {
            let Some(&s) = cand.first() else { break None };
            let (a, b) = ewin.edge_endpoints(s);
            let frontier = vc.contains(a) != vc.contains(b);
            if e_set.contains(s) && (shell.contains(s) || frontier) {
                break Some(s);
            }
            cand.remove(&s);
        };
        let Some(s) = e_t else { break };
        t += 1;
        if t > max_steps {
            return Err(FriError::Guard(format!("exploration exceeded {max_steps} steps")));
        }
        let mut add_to_c = false;
        let mut drop_edge = false;
        let action;
        if !sampled_e.contains(s) {
            if covered.contains(s) {
                add_to_c = true;
                action = Action::Covered;
            } else {
                let bit = source.bit(s)?;
                sampled_e.insert(s);
                trace.revealed_e.push((s, bit));
                if bit {
                    add_to_c = true;
                    action = Action::BitOpen;
                } else if near_unsampled(cfg, &ewin, &vwin, s, &p_set).is_empty() {
                    drop_edge = true;
                    action = Action::BitClosedResolved;
                } else {
                    action = Action::BitClosedPending;
                }
            }
        } else {
            let rest = near_unsampled(cfg, &ewin, &vwin, s, &p_set);
            let x = *rest.first().ok_or_else(|| FriError::Guard("no bundle left for a pending edge".into()))?;
            if p_set.contains(x) {
                return Err(FriError::Guard(format!("bundle {x} sampled twice")));
            }
            let bundle = source.bundle(x)?;
            p_set.insert(x);
            for &b in &bundle {
                covered.insert(b as usize);
            }
            let hit = bundle.binary_search(&(s as u32)).is_ok();
            trace.revealed_v.push((x, bundle));
            if hit {
                add_to_c = true;
                action = Action::BundleHit(x);
            } else if rest.len() > 1 {
                action = Action::BundleMiss(x);
            } else {
                drop_edge = true;
                action = Action::BundleMissResolved(x);
            }
        }
        trace.decisions.push(Decision { t, slot: s, action });
        if add_to_c {
            e_set.set(s, false);
            in_c.insert(s);
            let (a, b) = ewin.edge_endpoints(s);
            for v in [a, b] {
                if vc.put(v) {
                    continue;
                }
                for n in ewin.incident_slots(v) {
                    let (x, y) = ewin.edge_endpoints(n);
                    if e_set.contains(n) && in_cube(x) && in_cube(y) {
                        cand.insert(n);
                    }
                }
            }
        } else if drop_edge {
            e_set.set(s, false);
        }
    }
    let origin = ewin.index(&Vertex::origin(d)).unwrap();
    trace.outcome = vc.contains(origin);
    trace.remaining = e_set.ones().collect();
    trace.p = p_set.ones().collect();
    trace.c = in_c.ones().collect();
    Ok(trace)
}

/// Lexicographically sorted `{y : d(y, e) <= L - 1} ∖ P`, as bundle-window indices.
fn near_unsampled(cfg: &OsssParams, ewin: &Window, vwin: &Window, slot: usize, p_set: &FixedBitSet) -> Vec<usize> {
    if cfg.l == 0 {
        return Vec::new();
    }
    let e = ewin.edge(slot);
    let r = cfg.l as i64 - 1;
    let mut out: Vec<usize> = e
        .endpoints()
        .iter()
        .flat_map(|x| Cube::new(*x, r).unwrap().vertices().collect::<Vec<_>>())
        .filter_map(|y| vwin.index(&y))
        .filter(|&i| !p_set.contains(i))
        .collect();
    out.sort_unstable();
    out.dedup();
    out
}

/// Picks `j` uniformly in `1..=R`, samples a coding, and runs the algorithm on it.
pub fn run_algorithm_t<R: Rng + ?Sized>(cfg: &OsssParams, rng: &mut R) -> Result<(RunTrace, Coding)> {
    let j = rng.random_range(1..=cfg.r);
    let coding = Coding::sample(cfg, rng);
    let trace = run_algorithm_t_with_j(cfg, j, &coding)?;
    Ok((trace, coding))
}

impl RunTrace {
    pub fn to_text(&self) -> String {
        let ewin = self.cfg.edge_window();
        let vwin = self.cfg.bundle_window();
        let coords = |v: Vertex| v.coords().iter().map(|c| c.to_string()).collect::<Vec<_>>().join(",");
        let edge = |s: usize| {
            let e = ewin.edge(s);
            format!("{}|{}", coords(e.lo()), coords(e.hi()))
        };
        let mut out = String::new();
        let _ = writeln!(
            out,
            "# fri-trace d={} R={} L={} eps={:?} u={:?} T={:?} j={}",
            self.cfg.dim(),
            self.cfg.r,
            self.cfg.l,
            self.cfg.eps,
            self.cfg.u,
            self.cfg.kill.t(),
            self.j
        );
        for (s, b) in &self.revealed_e {
            let _ = writeln!(out, "bit {} {}", edge(*s), u8::from(*b));
        }
        for (x, es) in &self.revealed_v {
            let list: Vec<String> = es.iter().map(|&s| edge(s as usize)).collect();
            let _ = writeln!(out, "bundle {} {}", coords(vwin.vertex(*x)), list.join(" ")).map(|_| ());
        }
        for dcs in &self.decisions {
            let tag = match dcs.action {
                Action::Covered => "covered".to_string(),
                Action::BitOpen => "bit-open".to_string(),
                Action::BitClosedResolved => "bit-closed-resolved".to_string(),
                Action::BitClosedPending => "bit-closed-pending".to_string(),
                Action::BundleHit(x) => format!("bundle-hit {}", coords(vwin.vertex(x))),
                Action::BundleMiss(x) => format!("bundle-miss {}", coords(vwin.vertex(x))),
                Action::BundleMissResolved(x) => format!("bundle-miss-resolved {}", coords(vwin.vertex(x))),
            };
            let _ = writeln!(out, "step {} {} {}", dcs.t, edge(dcs.slot), tag);
        }
        let _ = writeln!(out, "outcome {}", u8::from(self.outcome));
        out
    }

    /// Parses a trace dump, re-runs the algorithm on the recorded components
    /// and checks that the decisions and outcome are reproduced.
    pub fn replay(text: &str) -> Result<RunTrace> {
        let mut lines = text.lines();
        let header =
            lines.next().and_then(|h| h.strip_prefix("# fri-trace ")).ok_or_else(|| FriError::Parse("missing trace header".into()))?;
        let field = |key: &str| -> Result<&str> {
            header
                .split_whitespace()
                .find_map(|kv| kv.strip_prefix(key).and_then(|r| r.strip_prefix('=')))
                .ok_or_else(|| FriError::Parse(format!("trace header lacks {key}")))
        };
        let num = |key: &str| -> Result<f64> { field(key)?.parse().map_err(|_| FriError::Parse(format!("bad {key}"))) };
        let d = num("d")? as usize;
        let cfg = OsssParams::new(num("R")? as i64, num("L")? as u64, num("eps")?, num("u")?, KillParams::new(num("T")?, d)?)?;
        let j = num("j")? as i64;
        let ewin = cfg.edge_window();
        let vwin = cfg.bundle_window();
        let parse_vertex = |s: &str| -> Result<Vertex> {
            let c: std::result::Result<Vec<i64>, _> = s.split(',').map(str::parse).collect();
            let c = c.map_err(|_| FriError::Parse(format!("bad vertex {s:?}")))?;
            if c.len() != d {
                return Err(FriError::DimensionMismatch { expected: d, found: c.len() });
            }
            Ok(Vertex::new(&c))
        };
        let parse_edge = |s: &str| -> Result<usize> {
            let (a, b) = s.split_once('|').ok_or_else(|| FriError::Parse(format!("bad edge {s:?}")))?;
            let e = Edge::new(parse_vertex(a)?, parse_vertex(b)?)?;
            ewin.edge_slot(&e).ok_or_else(|| FriError::OutsideWindow(e.to_string()))
        };
        let mut replay = ReplayCoding { bits: Default::default(), bundles: Default::default() };
        let mut recorded_outcome = None;
        let mut recorded_steps = Vec::new();
        for line in lines {
            let mut parts = line.split_whitespace();
            match parts.next() {
                Some("bit") => {
                    let s = parse_edge(parts.next().unwrap_or(""))?;
                    let b = parts.next() == Some("1");
                    replay.bits.insert(s, b);
                }
                Some("bundle") => {
                    let x = parse_vertex(parts.next().unwrap_or(""))?;
                    let xi = vwin.index(&x).ok_or_else(|| FriError::OutsideWindow(x.to_string()))?;
                    let es: Result<Vec<u32>> = parts.map(|p| parse_edge(p).map(|s| s as u32)).collect();
                    replay.bundles.insert(xi, es?);
                }
                Some("step") => recorded_steps.push(line.to_string()),
                Some("outcome") => recorded_outcome = Some(parts.next() == Some("1")),
                Some(other) => return Err(FriError::Parse(format!("unknown trace line {other:?}"))),
                None => {}
            }
        }
        let trace = run_algorithm_t_with_j(&cfg, j, replay)?;
        let again = trace.to_text();
        let steps: Vec<&str> = again.lines().filter(|l| l.starts_with("step ")).collect();
        if steps != recorded_steps.iter().map(String::as_str).collect::<Vec<_>>() {
            return Err(FriError::Guard("replayed decisions differ from the trace".into()));
        }
        if recorded_outcome != Some(trace.outcome) {
            return Err(FriError::Guard("replayed outcome differs from the trace".into()));
        }
        Ok(trace)
    }
}

/// Empirical sampling frequencies of every component.
#[derive(Clone, Debug)]
pub struct Revealment {
    pub runs: u64,
    /// Indexed by vertex of `B(R + L)`.
    pub rho_v: Vec<f64>,
    /// Indexed by edge slot of `B(R)` (invalid slots are zero).
    pub rho_e: Vec<f64>,
    /// Number of components revealed in each run, for linearity checks.
    pub revealed_per_run: Vec<(Vec<u32>, Vec<u32>)>,
}

pub fn revealment(cfg: &OsssParams, runs: u64, seed: u64, key: u64) -> Result<Revealment> {
    if runs == 0 {
        return Err(FriError::InvalidParameter("revealment needs at least one run".into()));
    }
    let ewin = cfg.edge_window();
    let vwin = cfg.bundle_window();
    let per_run: Result<Vec<(Vec<u32>, Vec<u32>)>> = (0..runs)
        .into_par_iter()
        .map(|i| {
            let mut rng = trial_rng(seed, key, i);
            let (trace, _) = run_algorithm_t(cfg, &mut rng)?;
            Ok((trace.revealed_v.iter().map(|(x, _)| *x as u32).collect(), trace.revealed_e.iter().map(|(s, _)| *s as u32).collect()))
        })
        .collect();
    let per_run = per_run?;
    let mut rho_v = vec![0.0; vwin.num_vertices()];
    let mut rho_e = vec![0.0; ewin.num_edge_slots()];
    for (vs, es) in &per_run {
        for &x in vs {
            rho_v[x as usize] += 1.0;
        }
        for &s in es {
            rho_e[s as usize] += 1.0;
        }
    }
    let n = runs as f64;
    rho_v.iter_mut().for_each(|x| *x /= n);
    rho_e.iter_mut().for_each(|x| *x /= n);
    Ok(Revealment { runs, rho_v, rho_e, revealed_per_run: per_run })
}

/// Evaluates `1_{ξ_R}` after local changes to `γ`, using cluster bookkeeping
/// to avoid a full search when the answer is forced.
struct XiState {
    ewin: Window,
    r: i64,
    present: FixedBitSet,
    cover: Vec<u16>,
    bits: FixedBitSet,
    uf: crate::clusters::UnionFind,
    boundary_root: FixedBitSet,
    origin: usize,
    value: bool,
}

impl XiState {
    fn new(coding: &Coding) -> XiState {
        let ewin = coding.ewin.clone();
        let r = coding.cfg.r;
        let mut cover = vec![0u16; ewin.num_edge_slots()];
        for b in &coding.bundles {
            for &s in b {
                cover[s as usize] += 1;
            }
        }
        let mut present = coding.bits.clone();
        for (s, c) in cover.iter().enumerate() {
            if *c > 0 {
                present.insert(s);
            }
        }
        let mut uf = crate::clusters::UnionFind::new(ewin.num_vertices());
        for s in present.ones() {
            let (a, b) = ewin.edge_endpoints(s);
            uf.union(a, b);
        }
        let mut boundary_root = FixedBitSet::with_capacity(ewin.num_vertices());
        for v in 0..ewin.num_vertices() {
            if ewin.index_norm(v) == r {
                let root = uf.find(v);
                boundary_root.insert(root);
            }
        }
        let origin = ewin.index(&Vertex::origin(ewin.dim())).unwrap();
        let root0 = uf.find(origin);
        let value = boundary_root.contains(root0);
        XiState { ewin, r, present, cover, bits: coding.bits.clone(), uf, boundary_root, origin, value }
    }

    fn edge_in_origin_cluster(&mut self, s: usize) -> bool {
        let (a, _) = self.ewin.edge_endpoints(s);
        self.present.contains(s) && self.uf.same(a, self.origin)
    }

    /// Whether adding `added` to `γ` joins the origin to the boundary.
    fn joins_with(&mut self, added: &[usize]) -> bool {
        let r0 = self.uf.find(self.origin);
        let mut adj: Vec<(usize, usize)> = Vec::with_capacity(added.len());
        for &s in added {
            let (a, b) = self.ewin.edge_endpoints(s);
            adj.push((self.uf.find(a), self.uf.find(b)));
        }
        let mut reached = vec![r0];
        let mut queue = VecDeque::from([r0]);
        while let Some(x) = queue.pop_front() {
            if self.boundary_root.contains(x) {
                return true;
            }
            for &(a, b) in &adj {
                let y = if a == x {
                    b
                } else if b == x {
                    a
                } else {
                    continue;
                };
                if !reached.contains(&y) {
                    reached.push(y);
                    queue.push_back(y);
                }
            }
        }
        false
    }

    fn search(&self, removed: &[usize], added: &[usize]) -> bool {
        let w = &self.ewin;
        let mut seen = FixedBitSet::with_capacity(w.num_vertices());
        let mut queue = VecDeque::from([self.origin]);
        seen.insert(self.origin);
        while let Some(i) = queue.pop_front() {
            if w.index_norm(i) == self.r {
                return true;
            }
            for s in w.incident_slots(i) {
                let open = (self.present.contains(s) && !removed.contains(&s)) || added.contains(&s);
                if !open {
                    continue;
                }
                let (a, b) = w.edge_endpoints(s);
                let j = if a == i { b } else { a };
                if !seen.put(j) {
                    queue.push_back(j);
                }
            }
        }
        false
    }

    /// `1_{ξ_R}` for `(γ ∖ removed) ∪ added`.
    fn value_after(&mut self, removed: &[usize], added: &[usize]) -> bool {
        if removed.is_empty() && added.is_empty() {
            return self.value;
        }
        if self.value {
            if !removed.iter().any(|&s| self.edge_in_origin_cluster(s)) {
                return true;
            }
        } else if !self.joins_with(added) {
            return false;
        }
        self.search(removed, added)
    }
}

/// Per-component influence counts from resampling each component once per trial.
#[derive(Clone, Debug)]
pub struct Influences {
    pub trials: u64,
    pub successes: u64,
    pub flips_v: Vec<u64>,
    pub flips_e: Vec<u64>,
    /// `Σ_i ρ_i 1{flip_i}` per trial, when revealments were supplied.
    pub weighted: Vec<f64>,
}

impl Influences {
    pub fn inf_v(&self, vidx: usize) -> f64 {
        self.flips_v[vidx] as f64 / self.trials as f64
    }

    pub fn inf_e(&self, slot: usize) -> f64 {
        self.flips_e[slot] as f64 / self.trials as f64
    }
}

impl XiState {
    fn bundle_flips(&mut self, coding: &Coding, x: usize, fresh: &[u32]) -> bool {
        let removed: Vec<usize> = coding.bundles[x]
            .iter()
            .map(|&s| s as usize)
            .filter(|&s| self.cover[s] == 1 && !self.bits.contains(s) && fresh.binary_search(&(s as u32)).is_err())
            .collect();
        let added: Vec<usize> = fresh.iter().map(|&s| s as usize).filter(|&s| !self.present.contains(s)).collect();
        self.value_after(&removed, &added) != self.value
    }

    fn bit_flips(&mut self, s: usize, new_bit: bool) -> bool {
        if new_bit == self.bits.contains(s) || self.cover[s] > 0 {
            return false;
        }
        let after = if new_bit { self.value_after(&[], &[s]) } else { self.value_after(&[s], &[]) };
        after != self.value
    }
}

fn one_influence_trial(cfg: &OsssParams, rng: &mut crate::rng::TrialRng, rho: Option<&Revealment>) -> (bool, Vec<u32>, Vec<u32>, f64) {
    let coding = Coding::sample(cfg, rng);
    let mut st = XiState::new(&coding);
    let mut fv = Vec::new();
    let mut fe = Vec::new();
    let mut weighted = 0.0;
    for x in 0..coding.vwin.num_vertices() {
        let fresh = sample_bundle(cfg, &coding.ewin, &coding.vwin.vertex(x), rng);
        if st.bundle_flips(&coding, x, &fresh) {
            fv.push(x as u32);
            if let Some(r) = rho {
                weighted += r.rho_v[x];
            }
        }
    }
    for s in 0..coding.ewin.num_edge_slots() {
        if !coding.ewin.slot_is_valid(s) {
            continue;
        }
        let new_bit = rng.random::<f64>() < cfg.eps;
        if st.bit_flips(s, new_bit) {
            fe.push(s as u32);
            if let Some(r) = rho {
                weighted += r.rho_e[s];
            }
        }
    }
    (st.value, fv, fe, weighted)
}

/// One coordinate of the coding.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Component {
    Bundle(Vertex),
    Bit(Edge),
}

/// Frequency with which resampling a single component flips `1_{ξ_R}`.
/// Components outside the coding never flip it.
pub fn component_influence(cfg: &OsssParams, comp: Component, trials: u64, seed: u64, key: u64) -> Result<crate::stats::Estimate> {
    let ewin = cfg.edge_window();
    let vwin = cfg.bundle_window();
    let target = match comp {
        Component::Bundle(x) => vwin.index(&x).map(|i| (true, i)),
        Component::Bit(e) => ewin.edge_slot(&e).map(|s| (false, s)),
    };
    let flips: u64 = (0..trials)
        .into_par_iter()
        .map(|i| {
            let Some((is_bundle, k)) = target else { return 0 };
            let mut rng = trial_rng(seed, key, i);
            let coding = Coding::sample(cfg, &mut rng);
            let mut st = XiState::new(&coding);
            let flipped = if is_bundle {
                let fresh = sample_bundle(cfg, &ewin, &vwin.vertex(k), &mut rng);
                st.bundle_flips(&coding, k, &fresh)
            } else {
                let b = rng.random::<f64>() < cfg.eps;
                st.bit_flips(k, b)
            };
            u64::from(flipped)
        })
        .sum();
    Ok(wilson(flips, trials))
}

/// Estimates every influence of `1_{ξ_R}` over `trials` independent codings.
pub fn influences(cfg: &OsssParams, trials: u64, seed: u64, key: u64, rho: Option<&Revealment>) -> Result<Influences> {
    if trials == 0 {
        return Err(FriError::InvalidParameter("influences need at least one trial".into()));
    }
    let per: Vec<(bool, Vec<u32>, Vec<u32>, f64)> = (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = trial_rng(seed, key, i);
            one_influence_trial(cfg, &mut rng, rho)
        })
        .collect();
    let ewin = cfg.edge_window();
    let vwin = cfg.bundle_window();
    let mut out = Influences {
        trials,
        successes: 0,
        flips_v: vec![0; vwin.num_vertices()],
        flips_e: vec![0; ewin.num_edge_slots()],
        weighted: Vec::with_capacity(trials as usize),
    };
    for (b, fv, fe, w) in per {
        out.successes += u64::from(b);
        for x in fv {
            out.flips_v[x as usize] += 1;
        }
        for s in fe {
            out.flips_e[s as usize] += 1;
        }
        out.weighted.push(w);
    }
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct OsssReport {
    pub theta_hat: f64,
    pub var_hat: f64,
    pub rhs: f64,
    pub rhs_v: f64,
    pub rhs_e: f64,
    pub slack: f64,
    pub sigma: f64,
    pub holds: bool,
}

fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (m, 0.0);
    }
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (v / n).sqrt())
}

/// Checks `Var[1_{ξ_R}] <= Σ_x ρ_𝒱(x) Inf_𝒱(x) + Σ_e ρ_ℰ(e) Inf_ℰ(e)` within a
/// combined three-sigma allowance. Revealments and influences come from
/// independent runs; the uncertainty of each side is the standard error of the
/// per-run (or per-trial) weighted sums.
pub fn osss_check(cfg: &OsssParams, trials: u64, seed: u64) -> Result<OsssReport> {
    let rho = revealment(cfg, trials, seed, crate::rng::key_of("osss-revealment"))?;
    let inf = influences(cfg, trials, seed, crate::rng::key_of("osss-influence"), Some(&rho))?;
    let n = trials as f64;
    let theta = inf.successes as f64 / n;
    let var_hat = theta * (1.0 - theta);
    let se_var = (1.0 - 2.0 * theta).abs() * (theta * (1.0 - theta) / n).sqrt();
    let rhs_v: f64 = (0..rho.rho_v.len()).map(|x| rho.rho_v[x] * inf.inf_v(x)).sum();
    let rhs_e: f64 = (0..rho.rho_e.len()).map(|s| rho.rho_e[s] * inf.inf_e(s)).sum();
    let rhs = rhs_v + rhs_e;
    let (_, se_inf) = mean_and_se(&inf.weighted);
    let per_run: Vec<f64> = rho
        .revealed_per_run
        .iter()
        .map(|(vs, es)| vs.iter().map(|&x| inf.inf_v(x as usize)).sum::<f64>() + es.iter().map(|&s| inf.inf_e(s as usize)).sum::<f64>())
        .collect();
    let (_, se_rho) = mean_and_se(&per_run);
    let sigma = (se_var * se_var + se_inf * se_inf + se_rho * se_rho).sqrt();
    Ok(OsssReport { theta_hat: theta, var_hat, rhs, rhs_v, rhs_e, slack: rhs - var_hat, sigma, holds: var_hat <= rhs + 3.0 * sigma })
}

/// Estimates `θ_r = P[0 ↔ ∂B(r)]` in `γ_ε` for every `r <= R` from one family
/// of codings, with `θ_0 = 1`, and returns `(θ̂_r, Wilson interval)`.
pub fn theta_profile(cfg: &OsssParams, trials: u64, seed: u64, key: u64) -> Result<Vec<crate::stats::Estimate>> {
    let reach: Vec<i64> = (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = trial_rng(seed, key, i);
            let coding = Coding::sample(cfg, &mut rng);
            let g = coding.gamma(cfg.r);
            reach_radius(&Vertex::origin(cfg.dim()), &g, &Cube::centered(cfg.dim(), cfg.r)).expect("origin inside")
        })
        .collect();
    Ok((0..=cfg.r)
        .map(|r| {
            let k = reach.iter().filter(|&&m| m >= r).count() as u64;
            wilson(k, trials)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(r: i64, l: u64, eps: f64, u: f64) -> OsssParams {
        OsssParams::new(r, l, eps, u, KillParams::new(1.0, 2).unwrap()).unwrap()
    }

    #[test]
    fn saturated_field_connects() {
        let c = cfg(3, 1, 1.0, 0.0);
        let mut rng = trial_rng(1, 1, 1);
        for _ in 0..10 {
            let (trace, _) = run_algorithm_t(&c, &mut rng).unwrap();
            assert!(trace.outcome);
            assert!(trace.revealed_v.is_empty());
        }
    }

    #[test]
    fn empty_field_reveals_only_the_shell() {
        let c = cfg(3, 1, 0.0, 0.0);
        let mut rng = trial_rng(1, 1, 2);
        let (trace, _) = run_algorithm_t(&c, &mut rng).unwrap();
        assert!(!trace.outcome);
        let ewin = c.edge_window();
        for (s, _) in &trace.revealed_e {
            let e = ewin.edge(*s);
            assert!(e.lo().norm_linf() == trace.j || e.hi().norm_linf() == trace.j);
        }
    }

    #[test]
    fn outcome_matches_full_reveal() {
        let c = cfg(4, 2, 0.3, 0.3);
        for i in 0..100 {
            let mut rng = trial_rng(9, 9, i);
            let (trace, coding) = run_algorithm_t(&c, &mut rng).unwrap();
            assert_eq!(trace.outcome, coding.xi(trace.j), "run {i}");
        }
    }

    #[test]
    fn trace_replays() {
        let c = cfg(3, 2, 0.4, 0.5);
        let mut rng = trial_rng(2, 2, 2);
        let (trace, _) = run_algorithm_t(&c, &mut rng).unwrap();
        let replayed = RunTrace::replay(&trace.to_text()).unwrap();
        assert_eq!(replayed, trace);
    }

    #[test]
    fn incremental_xi_matches_recomputation() {
        let c = cfg(3, 2, 0.3, 0.4);
        for i in 0..30 {
            let mut rng = trial_rng(4, 4, i);
            let coding = Coding::sample(&c, &mut rng);
            let mut st = XiState::new(&coding);
            assert_eq!(st.value, coding.xi(3));
            let slots: Vec<usize> = (0..coding.ewin.num_edge_slots()).filter(|&s| coding.ewin.slot_is_valid(s)).collect();
            for &s in slots.iter().step_by(7) {
                let mut g = coding.gamma(3);
                let expect_removed = {
                    g.remove_slot(s);
                    reach_radius(&Vertex::origin(2), &g, &Cube::centered(2, 3)).unwrap() >= 3
                };
                assert_eq!(st.value_after(&[s], &[]), expect_removed);
                g.insert_slot(s);
                let expect_added = reach_radius(&Vertex::origin(2), &g, &Cube::centered(2, 3)).unwrap() >= 3;
                let added: Vec<usize> = if st.present.contains(s) { vec![] } else { vec![s] };
                assert_eq!(st.value_after(&[], &added), expect_added);
            }
        }
    }
}
