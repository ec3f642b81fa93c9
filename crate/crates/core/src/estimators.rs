//! Monte Carlo estimators of crossing probabilities, decay rates, critical
//! curves and coupling diagnostics, with Wilson intervals and shard-invariant
//! seeding.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clusters::UnionFind;
use crate::couplings::{shorten_paths, sprinkle};
use crate::error::{check_finite_nonneg, check_finite_positive, FriError, Result};
use crate::events::{box_crossing, crossing, exist_and_unique, reach_radius};
use crate::fri_process::{for_each_window_edge, padding_radius, sample_decorated_slab, sample_fri, DEFAULT_INTRUSION_TOL};
use crate::killed_walk::{KillParams, Path};
use crate::lattice::{Cube, Edge, EdgeSet, Vertex, Window};
use crate::renormalization::{mu, LScales};
use crate::rng::{key_of, subkey, trial_rng, TrialRng};
use crate::stats::{linear_fit, wilson, Estimate};

/// Seeding and sharding shared by every estimator.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    pub seed: u64,
    pub shards: usize,
    pub intrusion_tol: f64,
}

impl Default for McConfig {
    fn default() -> Self {
        McConfig { seed: 1, shards: 1, intrusion_tol: DEFAULT_INTRUSION_TOL }
    }
}

impl McConfig {
    pub fn new(seed: u64, shards: usize, intrusion_tol: f64) -> Result<Self> {
        if shards == 0 {
            return Err(FriError::InvalidParameter("shard count must be at least 1".into()));
        }
        check_finite_positive("intrusion_tol", intrusion_tol)?;
        Ok(McConfig { seed, shards, intrusion_tol })
    }
}

/// Runs `f(trial, rng)` for `trial` in `0..trials`, split into contiguous
/// shards processed in parallel. Trial `i` always draws from stream `i` of
/// `(seed, key)`, so the output does not depend on the shard count.
pub fn run_trials<T, F>(trials: u64, mc: &McConfig, key: u64, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64, &mut TrialRng) -> Result<T> + Sync,
{
    if mc.shards == 0 {
        return Err(FriError::InvalidParameter("shard count must be at least 1".into()));
    }
    let shards = mc.shards as u64;
    let per = trials.div_ceil(shards.max(1));
    let parts: Vec<Result<Vec<T>>> = (0..shards)
        .into_par_iter()
        .map(|s| {
            let lo = (s * per).min(trials);
            let hi = ((s + 1) * per).min(trials);
            (lo..hi).map(|i| f(i, &mut trial_rng(mc.seed, key, i))).collect()
        })
        .collect();
    let mut out = Vec::with_capacity(trials as usize);
    for p in parts {
        out.extend(p?);
    }
    Ok(out)
}

pub fn count(outcomes: &[bool]) -> Estimate {
    wilson(outcomes.iter().filter(|&&b| b).count() as u64, outcomes.len() as u64)
}

/// One line of the results CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub experiment: String,
    pub d: usize,
    pub u: Option<f64>,
    #[serde(rename = "T")]
    pub t: Option<f64>,
    #[serde(rename = "R")]
    pub r: Option<i64>,
    #[serde(rename = "L")]
    pub l: Option<u64>,
    pub eps: Option<f64>,
    pub extra: String,
    pub trials: u64,
    pub successes: u64,
    pub p_hat: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub seed: u64,
    pub shards: usize,
    pub intrusion_tol: f64,
}

pub const CSV_COLUMNS: [&str; 16] = [
    "experiment",
    "d",
    "u",
    "T",
    "R",
    "L",
    "eps",
    "extra",
    "trials",
    "successes",
    "p_hat",
    "ci_low",
    "ci_high",
    "seed",
    "shards",
    "intrusion_tol",
];

impl ResultRow {
    pub fn new(experiment: &str, d: usize, est: &Estimate, mc: &McConfig) -> Self {
        ResultRow {
            experiment: experiment.to_string(),
            d,
            u: None,
            t: None,
            r: None,
            l: None,
            eps: None,
            extra: String::new(),
            trials: est.trials,
            successes: est.successes,
            p_hat: est.p,
            ci_low: est.lo,
            ci_high: est.hi,
            seed: mc.seed,
            shards: mc.shards,
            intrusion_tol: mc.intrusion_tol,
        }
    }

    pub fn u(mut self, u: f64) -> Self {
        self.u = Some(u);
        self
    }

    pub fn t(mut self, t: f64) -> Self {
        self.t = Some(t);
        self
    }

    pub fn r(mut self, r: i64) -> Self {
        self.r = Some(r);
        self
    }

    pub fn l(mut self, l: u64) -> Self {
        self.l = Some(l);
        self
    }

    pub fn eps(mut self, eps: f64) -> Self {
        self.eps = Some(eps);
        self
    }

    /// Appends `key=value` to the extra column (entries separated by `;`).
    pub fn extra(mut self, key: &str, value: impl std::fmt::Display) -> Self {
        if !self.extra.is_empty() {
            self.extra.push(';');
        }
        self.extra.push_str(&format!("{key}={value}"));
        self
    }
}

/// `P[B(R) ↔ ∂B(2R)]` in `FI^{u,T}`.
pub fn estimate_crossing(u: f64, params: KillParams, r: i64, trials: u64, mc: &McConfig) -> Result<Estimate> {
    let cube = Cube::centered(params.dim(), 2 * r);
    let o = Vertex::origin(params.dim());
    let key = subkey(key_of("crossing"), r as u64);
    let hits = run_trials(trials, mc, key, |_, rng| {
        let s = sample_fri(u, params, &cube, None, mc.intrusion_tol, rng)?;
        crossing(&o, r, s.edges())
    })?;
    Ok(count(&hits))
}

/// `P[0 ↔ ∂B(R)]` for every `R` in `0..=r_max` from one window `B(r_max)`
/// per trial.
pub fn point_to_boundary_profile(u: f64, params: KillParams, r_max: i64, trials: u64, mc: &McConfig) -> Result<Vec<(i64, Estimate)>> {
    let cube = Cube::centered(params.dim(), r_max);
    let o = Vertex::origin(params.dim());
    let key = subkey(key_of("point-to-boundary"), r_max as u64);
    let reach = run_trials(trials, mc, key, |_, rng| {
        let s = sample_fri(u, params, &cube, None, mc.intrusion_tol, rng)?;
        reach_radius(&o, s.edges(), &cube)
    })?;
    Ok((0..=r_max).map(|r| (r, wilson(reach.iter().filter(|&&m| m >= r).count() as u64, trials))).collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    /// Fitted slope of `log p̂` against `R`; the decay rate is its negative.
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub used: Vec<i64>,
    pub skipped: Vec<i64>,
}

/// Least squares of `log p̂` against `R` over the points with `p̂ > 0`.
pub fn fit_decay(points: &[(i64, Estimate)]) -> Result<DecayFit> {
    let (used, skipped): (Vec<&(i64, Estimate)>, Vec<&(i64, Estimate)>) = points.iter().partition(|(_, e)| e.p > 0.0);
    if used.len() < 2 {
        return Err(FriError::InvalidParameter(format!("decay fit needs two positive estimates, got {}", used.len())));
    }
    let xs: Vec<f64> = used.iter().map(|(r, _)| *r as f64).collect();
    let ys: Vec<f64> = used.iter().map(|(_, e)| e.p.ln()).collect();
    let fit = linear_fit(&xs, &ys)?;
    Ok(DecayFit {
        slope: fit.slope,
        intercept: fit.intercept,
        r2: fit.r2,
        used: used.iter().map(|(r, _)| *r).collect(),
        skipped: skipped.iter().map(|(r, _)| *r).collect(),
    })
}

/// Label slabs and cap used to grow a decorated sample until the crossing
/// `B(R) ↔ ∂B(2R)` appears.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabelProtocol {
    pub r: i64,
    pub u_cap: f64,
    pub slab: f64,
}

impl LabelProtocol {
    pub fn new(r: i64, u_cap: f64, slab: f64) -> Result<Self> {
        if r < 1 {
            return Err(FriError::InvalidParameter(format!("R = {r} must be >= 1")));
        }
        check_finite_positive("u_cap", u_cap)?;
        check_finite_positive("slab", slab)?;
        Ok(LabelProtocol { r, u_cap, slab })
    }
}

/// Smallest `u` at which `B(R) ↔ ∂B(2R)` holds in the thresholded decorated
/// sample, or `+∞` if it fails at `u_cap`. Walks are added in label order,
/// one label slab at a time, to a union-find on `B(2R)` where all of `B(R)`
/// is pre-merged into one class and all of `∂B(2R)` into another.
pub fn critical_label(params: KillParams, proto: &LabelProtocol, intrusion_tol: f64, rng: &mut TrialRng) -> Result<f64> {
    let d = params.dim();
    let r = proto.r;
    let cube = Cube::centered(d, 2 * r);
    let w = Window::new(cube)?;
    let pad = padding_radius(&cube, params.intensity(proto.u_cap), params.survival(), None, intrusion_tol)?;
    let n = w.num_vertices();
    let mut uf = UnionFind::new(n + 2);
    let (inner, outer) = (n, n + 1);
    for i in 0..n {
        let m = w.index_norm(i);
        if m <= r {
            uf.union(i, inner);
        } else if m == 2 * r {
            uf.union(i, outer);
        }
    }
    let mut lo = 0.0;
    while lo < proto.u_cap {
        let hi = (lo + proto.slab).min(proto.u_cap);
        let dec = sample_decorated_slab(lo, hi, params, &cube, pad, None, rng)?;
        let soup = dec.soup();
        for i in dec.order_by_label() {
            for_each_window_edge(soup.start_coords(i), soup.steps(i), &w, |s| {
                let (a, b) = w.edge_endpoints(s);
                uf.union(a, b);
            });
            if uf.same(inner, outer) {
                return Ok(dec.labels()[i]);
            }
        }
        lo = hi;
    }
    Ok(f64::INFINITY)
}

pub fn critical_labels(params: KillParams, proto: &LabelProtocol, trials: u64, mc: &McConfig) -> Result<Vec<f64>> {
    let key = subkey(subkey(key_of("critical-label"), proto.r as u64), params.t().to_bits());
    run_trials(trials, mc, key, |_, rng| critical_label(params, proto, mc.intrusion_tol, rng))
}

/// `θ̂_R(u)` on a grid from critical labels; non-decreasing in `u` by construction.
pub fn theta_curve(labels: &[f64], grid: &[f64]) -> Vec<Estimate> {
    let mut sorted = labels.to_vec();
    sorted.sort_by(f64::total_cmp);
    grid.iter().map(|&u| wilson(sorted.partition_point(|&l| l <= u) as u64, labels.len() as u64)).collect()
}

/// Largest forward difference quotient of a curve.
pub fn max_slope(grid: &[f64], curve: &[Estimate]) -> f64 {
    grid.windows(2).zip(curve.windows(2)).map(|(g, c)| (c[1].p - c[0].p) / (g[1] - g[0])).fold(f64::NEG_INFINITY, f64::max)
}

/// Bisection estimate of the level-`threshold` point of `θ̂_R(u)` with the
/// interval of `u` where the Wilson interval contains the threshold.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UStar {
    pub r: i64,
    pub t: f64,
    pub trials: u64,
    pub threshold: f64,
    pub u_hat: f64,
    pub lo: f64,
    pub hi: f64,
    /// Samples without a crossing below the label cap.
    pub censored: u64,
    /// `(u, θ̂(u))` at every bisection evaluation.
    pub evaluations: Vec<(f64, Estimate)>,
}

impl UStar {
    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn overlaps(&self, other: &UStar) -> bool {
        self.lo <= other.hi && other.lo <= self.hi
    }

    /// Distance between the brackets, zero when they overlap.
    pub fn gap(&self, other: &UStar) -> f64 {
        (other.lo - self.hi).max(self.lo - other.hi).max(0.0)
    }
}

/// Bisection on `[0, u_cap]` to absolute tolerance `tol` for the first `u`
/// where `pred(θ̂(u))` becomes true; `pred` must be monotone along the curve.
fn bisect(labels: &[f64], u_cap: f64, tol: f64, evals: &mut Vec<(f64, Estimate)>, pred: impl Fn(&Estimate) -> bool) -> Option<f64> {
    let at = |u: f64, evals: &mut Vec<(f64, Estimate)>| {
        let e = theta_curve(labels, &[u])[0];
        evals.push((u, e));
        e
    };
    if !pred(&at(u_cap, evals)) {
        return None;
    }
    let (mut a, mut b) = (0.0, u_cap);
    if pred(&at(a, evals)) {
        return Some(0.0);
    }
    while b - a > tol {
        let m = 0.5 * (a + b);
        if pred(&at(m, evals)) {
            b = m;
        } else {
            a = m;
        }
    }
    Some(b)
}

pub fn u_star_from_labels(labels: &[f64], r: i64, t: f64, threshold: f64, u_cap: f64, tol: f64) -> Result<UStar> {
    if labels.is_empty() {
        return Err(FriError::EmptySet);
    }
    check_finite_positive("tol", tol)?;
    let mut evaluations = Vec::new();
    let cap_err = || FriError::InvalidParameter(format!("θ̂ stays below {threshold} up to u_cap = {u_cap}; raise the cap"));
    let u_hat = bisect(labels, u_cap, tol, &mut evaluations, |e| e.p >= threshold).ok_or_else(cap_err)?;
    let lo = bisect(labels, u_cap, tol, &mut evaluations, |e| e.hi >= threshold).ok_or_else(cap_err)?;
    let hi = bisect(labels, u_cap, tol, &mut evaluations, |e| e.lo > threshold).unwrap_or(u_cap);
    Ok(UStar {
        r,
        t,
        trials: labels.len() as u64,
        threshold,
        u_hat,
        lo: lo.min(u_hat),
        hi: hi.max(u_hat),
        censored: labels.iter().filter(|l| l.is_infinite()).count() as u64,
        evaluations,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UStarProtocol {
    pub labels: LabelProtocol,
    pub threshold: f64,
    pub trials: u64,
    pub tol: f64,
}

pub fn estimate_u_star(params: KillParams, proto: &UStarProtocol, mc: &McConfig) -> Result<UStar> {
    let labels = critical_labels(params, &proto.labels, proto.trials, mc)?;
    u_star_from_labels(&labels, proto.labels.r, params.t(), proto.threshold, proto.labels.u_cap, proto.tol)
}

/// `û_*` along a `T` grid with the adjacent-jump table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriticalScan {
    pub protocol: UStarProtocol,
    pub points: Vec<UStar>,
}

impl CriticalScan {
    pub fn jumps(&self) -> Vec<f64> {
        self.points.windows(2).map(|w| (w[1].u_hat - w[0].u_hat).abs()).collect()
    }

    pub fn max_jump(&self) -> f64 {
        self.jumps().into_iter().fold(0.0, f64::max)
    }

    /// Adjacent brackets overlap or are separated by less than `factor`
    /// times the wider of the two.
    pub fn adjacent_consistent(&self, factor: f64) -> bool {
        self.points.windows(2).all(|w| w[0].overlaps(&w[1]) || w[0].gap(&w[1]) < factor * w[0].width().max(w[1].width()))
    }
}

pub fn continuity_scan(dim: usize, t_grid: &[f64], proto: &UStarProtocol, mc: &McConfig) -> Result<CriticalScan> {
    if t_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(FriError::InvalidParameter("T grid must be strictly increasing".into()));
    }
    let points = t_grid.iter().map(|&t| estimate_u_star(KillParams::new(t, dim)?, proto, mc)).collect::<Result<Vec<_>>>()?;
    Ok(CriticalScan { protocol: *proto, points })
}

/// `T̂` where `θ̂_R(u, T)` crosses `threshold`, with the crossing estimates
/// on the grid and the bracket from the first grid interval where the
/// Wilson intervals straddle the threshold.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TStar {
    pub u: f64,
    pub grid: Vec<(f64, Estimate)>,
    pub t_hat: Option<f64>,
    pub lo: Option<f64>,
    pub hi: Option<f64>,
}

pub fn t_star_scan(u: f64, dim: usize, t_grid: &[f64], r: i64, threshold: f64, trials: u64, mc: &McConfig) -> Result<TStar> {
    if t_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(FriError::InvalidParameter("T grid must be strictly increasing".into()));
    }
    let grid = t_grid
        .iter()
        .map(|&t| {
            let params = KillParams::new(t, dim)?;
            let mc_t = McConfig { seed: crate::rng::splitmix64(mc.seed ^ t.to_bits()), ..*mc };
            Ok((t, estimate_crossing(u, params, r, trials, &mc_t)?))
        })
        .collect::<Result<Vec<_>>>()?;
    let t_hat = grid.windows(2).find(|w| w[0].1.p < threshold && w[1].1.p >= threshold).map(|w| {
        let (t0, p0, t1, p1) = (w[0].0, w[0].1.p, w[1].0, w[1].1.p);
        t0 + (threshold - p0) * (t1 - t0) / (p1 - p0)
    });
    let lo = grid.iter().rev().find(|(_, e)| e.hi < threshold).map(|(t, _)| *t);
    let hi = grid.iter().find(|(_, e)| e.lo > threshold).map(|(t, _)| *t);
    Ok(TStar { u, grid, t_hat, lo, hi })
}

/// `R^d · P[B(μ(R)) ↮ ∂B(R)]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScaledEstimate {
    pub estimate: Estimate,
    pub scale: f64,
    pub value: f64,
    pub lo: f64,
    pub hi: f64,
}

pub fn u_tilde_diagnostic(u: f64, params: KillParams, r: i64, trials: u64, mc: &McConfig) -> Result<ScaledEstimate> {
    let m = mu(r.max(0) as u64)? as i64;
    if m >= r {
        return Err(FriError::InvalidParameter(format!("μ({r}) = {m} is not below R")));
    }
    let cube = Cube::centered(params.dim(), r);
    let o = Vertex::origin(params.dim());
    let key = subkey(key_of("u-tilde"), r as u64);
    let miss = run_trials(trials, mc, key, |_, rng| {
        let s = sample_fri(u, params, &cube, None, mc.intrusion_tol, rng)?;
        Ok(!box_crossing(&o, m, r, s.edges())?)
    })?;
    let estimate = count(&miss);
    let scale = (r as f64).powi(params.dim() as i32);
    Ok(ScaledEstimate { estimate, scale, value: scale * estimate.p, lo: scale * estimate.lo, hi: scale * estimate.hi })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StrongFrequency {
    pub exist: Estimate,
    pub unique: Estimate,
    pub both: Estimate,
}

/// Frequencies of `Exist(R)`, `Unique(R)` and both, on the window `B(2R)`.
pub fn strong_percolation_frequency(u: f64, params: KillParams, r: i64, trials: u64, mc: &McConfig) -> Result<StrongFrequency> {
    let cube = Cube::centered(params.dim(), 2 * r);
    let o = Vertex::origin(params.dim());
    let key = subkey(key_of("strong-percolation"), r as u64);
    let ev = run_trials(trials, mc, key, |_, rng| {
        let s = sample_fri(u, params, &cube, None, mc.intrusion_tol, rng)?;
        exist_and_unique(&o, r, s.edges())
    })?;
    let ex: Vec<bool> = ev.iter().map(|e| e.exist).collect();
    let un: Vec<bool> = ev.iter().map(|e| e.unique).collect();
    let bo: Vec<bool> = ev.iter().map(|e| e.both()).collect();
    Ok(StrongFrequency { exist: count(&ex), unique: count(&un), both: count(&bo) })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CouplingAgreement {
    pub agree: Estimate,
    /// Shortening alone changes `𝓑(R)`.
    pub shorten_hit: Estimate,
    /// The sprinkled walks add an edge of `𝓑(R)`.
    pub sprinkle_hit: Estimate,
}

impl CouplingAgreement {
    /// `1 − P̂[shorten hit] − P̂[sprinkle hit]`, a lower bound for agreement.
    pub fn union_bound(&self) -> f64 {
        1.0 - self.shorten_hit.p - self.sprinkle_hit.p
    }
}

/// Agreement on `𝓑(R)` of `FI^{u,T0}` and the `FI^{u,T}` derived from it by
/// shortening and sprinkling, `T <= T0`.
pub fn coupling_agreement(u: f64, dim: usize, t0: f64, t: f64, r: i64, trials: u64, mc: &McConfig) -> Result<CouplingAgreement> {
    check_finite_nonneg("u", u)?;
    if t > t0 {
        return Err(FriError::InvalidParameter(format!("coupling derives T = {t} from T0 = {t0}; need T <= T0")));
    }
    let params0 = KillParams::new(t0, dim)?;
    let cube = Cube::centered(dim, r);
    let key = subkey(subkey(key_of("coupling-agreement"), r as u64), t.to_bits());
    let flags = run_trials(trials, mc, key, |_, rng| {
        let s0 = sample_fri(u, params0, &cube, None, mc.intrusion_tol, rng)?;
        let short = shorten_paths(&s0, t, rng)?;
        let extra_u = u * (t0 - t) / (t0 + 1.0);
        let derived = sprinkle(&short, extra_u, rng)?;
        let a = s0.edges().restrict_to(&cube);
        let b = short.edges().restrict_to(&cube);
        let c = derived.edges().restrict_to(&cube);
        Ok((a == c, a != b, b != c))
    })?;
    let agree: Vec<bool> = flags.iter().map(|f| f.0).collect();
    let sh: Vec<bool> = flags.iter().map(|f| f.1).collect();
    let sp: Vec<bool> = flags.iter().map(|f| f.2).collect();
    Ok(CouplingAgreement { agree: count(&agree), shorten_hit: count(&sh), sprinkle_hit: count(&sp) })
}

/// `P[FI ∩ 𝓑(R) ≠ FI_L ∩ 𝓑(R)]` for each `L`, all levels read off one
/// sample per trial.
pub fn truncation_difference(u: f64, params: KillParams, r: i64, ls: &[u64], trials: u64, mc: &McConfig) -> Result<Vec<(u64, Estimate)>> {
    let cube = Cube::centered(params.dim(), r);
    let key = subkey(key_of("truncation-decay"), r as u64);
    let flags = run_trials(trials, mc, key, |_, rng| {
        let s = sample_fri(u, params, &cube, None, mc.intrusion_tol, rng)?;
        let full = s.edges().restrict_to(&cube);
        Ok(ls.iter().map(|&l| s.truncate(l).edges().restrict_to(&cube) != full).collect::<Vec<bool>>())
    })?;
    Ok(ls.iter().enumerate().map(|(k, &l)| (l, wilson(flags.iter().filter(|f| f[k]).count() as u64, trials))).collect())
}

/// `P[e ∈ FI, e ∉ FI_L]` for a single edge and each `L`.
pub fn edge_truncation_difference(
    u: f64,
    params: KillParams,
    e: &Edge,
    ls: &[u64],
    trials: u64,
    mc: &McConfig,
) -> Result<Vec<(u64, Estimate)>> {
    let r = e.lo().norm_linf().max(e.hi().norm_linf());
    let cube = Cube::centered(params.dim(), r);
    let key = subkey(key_of("edge-truncation"), r as u64);
    let flags = run_trials(trials, mc, key, |_, rng| {
        let s = sample_fri(u, params, &cube, None, mc.intrusion_tol, rng)?;
        let present = s.edges().contains(e);
        Ok(ls.iter().map(|&l| present && !s.truncate(l).edges().contains(e)).collect::<Vec<bool>>())
    })?;
    Ok(ls.iter().enumerate().map(|(k, &l)| (l, wilson(flags.iter().filter(|f| f[k]).count() as u64, trials))).collect())
}

/// Chi-square test of sampled lengths against `P[|η| = k] = (1 - p) p^k`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LengthLawReport {
    pub t: f64,
    pub trials: u64,
    /// Counts for `k = 0..counts.len()-1`; the last cell pools the tail.
    pub counts: Vec<u64>,
    pub expected: Vec<f64>,
    pub chi2: f64,
    pub p_value: f64,
    pub mean: f64,
    pub mean_se: f64,
}

pub fn length_law_test(params: KillParams, trials: u64, mc: &McConfig) -> Result<LengthLawReport> {
    if trials < 2 {
        return Err(FriError::InvalidParameter("length law test needs at least two trials".into()));
    }
    let key = subkey(key_of("length-law"), params.t().to_bits());
    let lens = run_trials(trials, mc, key, |_, rng| Ok(crate::killed_walk::sample_length(&params, rng)))?;
    let n = trials as f64;
    let mut cells = 1usize;
    while n * params.length_tail(cells as u64) >= 5.0 {
        cells += 1;
    }
    let mut counts = vec![0u64; cells];
    for &k in &lens {
        counts[(k as usize).min(cells - 1)] += 1;
    }
    let expected: Vec<f64> =
        (0..cells).map(|k| if k + 1 == cells { n * params.length_tail(k as u64) } else { n * params.length_pmf(k as u64) }).collect();
    let (chi2, p_value) = crate::stats::chi_square(&counts, &expected, 0)?;
    let mean = lens.iter().map(|&k| k as f64).sum::<f64>() / n;
    let var = lens.iter().map(|&k| (k as f64 - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok(LengthLawReport { t: params.t(), trials, counts, expected, chi2, p_value, mean, mean_se: (var / n).sqrt() })
}

/// Frequency of `e ∈ FI^{u,T}` on the smallest centred window containing `e`.
pub fn edge_presence_frequency(u: f64, params: KillParams, e: &Edge, trials: u64, mc: &McConfig) -> Result<Estimate> {
    let r = e.lo().norm_linf().max(e.hi().norm_linf());
    let cube = Cube::centered(params.dim(), r);
    let key = subkey(key_of("edge-density"), u.to_bits());
    let hits = run_trials(trials, mc, key, |_, rng| {
        let s = sample_fri(u, params, &cube, None, mc.intrusion_tol, rng)?;
        Ok(s.edges().contains(e))
    })?;
    Ok(count(&hits))
}

/// Frequency of `ξ(N, α, β)` with `α = FI^{u_alpha,T} ⊂ β = FI^{u_beta,T}`
/// coupled through one decorated sample on `B(6N)`.
pub fn xi_frequency(n: i64, u_alpha: f64, u_beta: f64, params: KillParams, trials: u64, mc: &McConfig) -> Result<Estimate> {
    if u_alpha > u_beta {
        return Err(FriError::InvalidParameter(format!("need u_alpha <= u_beta, got {u_alpha} > {u_beta}")));
    }
    let cube = Cube::centered(params.dim(), 6 * n);
    let key = subkey(key_of("xi-frequency"), n as u64);
    let hits = run_trials(trials, mc, key, |_, rng| {
        let dec = crate::fri_process::sample_decorated(u_beta, params, &cube, None, mc.intrusion_tol, rng)?;
        let alpha = dec.threshold(u_alpha)?;
        let beta = dec.threshold(u_beta)?;
        crate::events::xi_event(n, alpha.edges(), beta.edges())
    })?;
    Ok(count(&hits))
}

/// What is added to `χ_t` in a pivotality test.
#[derive(Clone, Debug, PartialEq)]
pub enum PivotObject {
    Path(Path),
    Edge(Edge),
}

/// Whether adding `object` to `edges` creates `B(R) ↔ ∂B(2R)`.
pub fn is_pivotal(edges: &EdgeSet, object: &PivotObject, r: i64) -> Result<bool> {
    let o = Vertex::origin(edges.window().dim());
    if crossing(&o, r, edges)? {
        return Ok(false);
    }
    let mut with = edges.clone();
    match object {
        PivotObject::Path(p) => {
            let w = edges.window().clone();
            let coords: Vec<i64> = p.start().coords().to_vec();
            for_each_window_edge(&coords, p.steps(), &w, |s| with.insert_slot(s));
        }
        PivotObject::Edge(e) => {
            if edges.window().edge_slot(e).is_some() {
                with.insert(e)?;
            }
        }
    }
    crossing(&o, r, &with)
}

/// `P[Piv(χ_t, object)]` on the window `B(2R)`.
pub fn pivotal_estimate(
    t: f64,
    u: f64,
    params: KillParams,
    scales: &LScales,
    object: &PivotObject,
    r: i64,
    trials: u64,
    mc: &McConfig,
) -> Result<Estimate> {
    let cube = Cube::centered(params.dim(), 2 * r);
    let key = subkey(key_of("pivotal"), r as u64);
    let piv = run_trials(trials, mc, key, |_, rng| {
        let chi = crate::couplings::sample_chi_t(t, u, params, scales, &cube, mc.intrusion_tol, rng)?;
        is_pivotal(&chi.edges, object, r)
    })?;
    Ok(count(&piv))
}
