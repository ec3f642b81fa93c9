//! The experiment registry. Every runner maps a validated config to result rows.

use std::io::Write as _;

use fri_core::estimators::*;
use fri_core::exploration::{osss_check, revealment, run_algorithm_t, theta_profile, OsssParams};
use fri_core::fkg::fkg_check_truncated;
use fri_core::fri_process::edge_presence_probability;
use fri_core::killed_walk::KillParams;
use fri_core::lattice::{Edge, Vertex};
use fri_core::renormalization::{enumerate_trees, h1_descendants, h2_descendants, j_scales, structured_tree_count, zeta, KScales, LScales};
use fri_core::rng::{key_of, trial_rng};
use fri_core::stats::{wilson, Estimate};
use fri_core::{FriError, Result};

use crate::config::ExperimentConfig;

pub struct Ctx<'a> {
    pub cfg: &'a ExperimentConfig,
    pub mc: McConfig,
}

impl Ctx<'_> {
    fn params(&self, t: f64) -> Result<KillParams> {
        KillParams::new(t, self.cfg.d)
    }

    fn row(&self, name: &str, est: &Estimate) -> ResultRow {
        ResultRow::new(name, self.cfg.d, est, &self.mc)
    }

    fn u(&self) -> Result<f64> {
        self.cfg.u.ok_or_else(|| FriError::InvalidParameter("missing u".into()))
    }

    fn r0(&self) -> i64 {
        self.cfg.r[0]
    }

    fn l0(&self) -> u64 {
        self.cfg.l[0]
    }

    fn t_values(&self) -> Vec<f64> {
        if self.cfg.t_grid.is_empty() {
            vec![self.cfg.t]
        } else {
            self.cfg.t_grid.clone()
        }
    }

    fn u_values(&self) -> Result<Vec<f64>> {
        if self.cfg.u_grid.is_empty() {
            Ok(vec![self.u()?])
        } else {
            Ok(self.cfg.u_grid.clone())
        }
    }

    fn u_star_protocol(&self, r: i64) -> Result<UStarProtocol> {
        let p = &self.cfg.protocol;
        Ok(UStarProtocol { labels: LabelProtocol::new(r, p.u_cap, p.slab)?, threshold: p.threshold, trials: self.cfg.trials, tol: p.tol })
    }

    fn osss(&self) -> Result<OsssParams> {
        OsssParams::new(self.r0(), self.l0(), self.cfg.eps, self.u()?, self.params(self.cfg.t)?)
    }
}

/// A deterministic quantity reported in the estimate columns.
fn exact(successes: u64, trials: u64) -> Estimate {
    let p = if trials == 0 { f64::NAN } else { successes as f64 / trials as f64 };
    Estimate { successes, trials, p, lo: p, hi: p }
}

pub struct Experiment {
    pub name: &'static str,
    pub summary: &'static str,
    pub params: &'static str,
    pub required: &'static [&'static str],
    /// Window radius in units of the largest `R`.
    pub window_factor: f64,
    pub window_adds_l: bool,
    pub run: fn(&Ctx) -> Result<Vec<ResultRow>>,
}

pub static REGISTRY: &[Experiment] = &[
    Experiment {
        name: "length-law",
        summary: "killed-walk lengths against the geometric law (chi-square, mean)",
        params: "T or T_grid, trials",
        required: &[],
        window_factor: 0.0,
        window_adds_l: false,
        run: length_law,
    },
    Experiment {
        name: "edge-density",
        summary: "presence frequency of the edge 0-e1 against its dynamic-programming enclosure",
        params: "u or u_grid, T, trials",
        required: &[],
        window_factor: 0.0,
        window_adds_l: false,
        run: edge_density,
    },
    Experiment {
        name: "truncation-decay",
        summary: "P[FI and FI_L differ on the edge box B(R)] for each L, with log-linear fit",
        params: "u, T, R (first), L list, trials",
        required: &["u", "L"],
        window_factor: 1.0,
        window_adds_l: false,
        run: truncation_decay,
    },
    Experiment {
        name: "subcritical-decay",
        summary: "P[0 <-> boundary of B(R)] for each R from one window, with log-linear fit",
        params: "u, T, R list, trials",
        required: &["u"],
        window_factor: 1.0,
        window_adds_l: false,
        run: subcritical_decay,
    },
    Experiment {
        name: "theta-curve",
        summary: "crossing probability of B(R) to the boundary of B(2R) on a u grid, from critical labels",
        params: "u_grid, T, R list, trials, protocol.{u_cap,slab}",
        required: &["u_grid"],
        window_factor: 2.0,
        window_adds_l: false,
        run: theta_curve_exp,
    },
    Experiment {
        name: "u-star-bisection",
        summary: "finite-volume critical intensity per R with Wilson bracket",
        params: "T, R list, trials, protocol",
        required: &[],
        window_factor: 2.0,
        window_adds_l: false,
        run: u_star_bisection,
    },
    Experiment {
        name: "continuity-scan",
        summary: "finite-volume critical intensity along a T grid",
        params: "T_grid, R (first), trials, protocol",
        required: &["T_grid"],
        window_factor: 2.0,
        window_adds_l: false,
        run: continuity,
    },
    Experiment {
        name: "t-star-scan",
        summary: "crossing probability at fixed u along a T grid with bracketed crossing point",
        params: "u, T_grid, R (first), trials, protocol.threshold",
        required: &["u", "T_grid"],
        window_factor: 2.0,
        window_adds_l: false,
        run: t_star,
    },
    Experiment {
        name: "coupling-agreement",
        summary: "agreement on B(R) of FI at T and the field derived for each smaller T in T_grid",
        params: "u, T (source), T_grid (targets), R (first), trials",
        required: &["u", "T_grid"],
        window_factor: 1.0,
        window_adds_l: false,
        run: coupling,
    },
    Experiment {
        name: "strong-percolation",
        summary: "frequencies of Exist(R), Unique(R) and both",
        params: "u, T, R list, trials",
        required: &["u"],
        window_factor: 2.0,
        window_adds_l: false,
        run: strong,
    },
    Experiment {
        name: "xi-frequency",
        summary: "frequency of xi(N, FI^u, FI^u2) for N in R",
        params: "u, u2, T, R list (as N), trials",
        required: &["u", "u2"],
        window_factor: 6.0,
        window_adds_l: false,
        run: xi_freq,
    },
    Experiment {
        name: "u-tilde",
        summary: "R^d P[B(mu(R)) not connected to the boundary of B(R)]",
        params: "u, T, R list (R >= 3), trials",
        required: &["u"],
        window_factor: 1.0,
        window_adds_l: false,
        run: u_tilde,
    },
    Experiment {
        name: "osss",
        summary: "variance of 1{0 <-> boundary of B(R)} against the revealment-weighted influence sum",
        params: "R (first), L (first), eps, u, T, trials",
        required: &["u"],
        window_factor: 1.0,
        window_adds_l: true,
        run: osss,
    },
    Experiment {
        name: "revealment",
        summary: "bundle revealments of the exploration algorithm against 2(2L+1)^d Sigma_R / R",
        params: "R (first), L (first), eps, u, T, trials, trace_dump",
        required: &["u"],
        window_factor: 1.0,
        window_adds_l: true,
        run: revealment_exp,
    },
    Experiment {
        name: "fkg",
        summary: "exact minimum covariance of increasing pairs on three edges, per L",
        params: "L list, u, T",
        required: &["u"],
        window_factor: 0.0,
        window_adds_l: false,
        run: fkg,
    },
    Experiment {
        name: "tree-enumeration",
        summary: "enumerated trees of levels 1 and 2 against the structured count, per k0",
        params: "k0 list, d",
        required: &["k0"],
        window_factor: 0.0,
        window_adds_l: false,
        run: trees,
    },
    Experiment {
        name: "j-scales",
        summary: "J_k recursion and its sandwich bounds for each b",
        params: "j1, b list, k_max",
        required: &["b"],
        window_factor: 0.0,
        window_adds_l: false,
        run: j_scales_exp,
    },
    Experiment {
        name: "pivotal",
        summary: "P[the edge leaving B(2R) along e1 is pivotal for the crossing of chi_t]",
        params: "u, T, time, L (first, as L0), R (first), trials",
        required: &["u"],
        window_factor: 2.0,
        window_adds_l: false,
        run: pivotal,
    },
];

pub fn find(name: &str) -> Option<&'static Experiment> {
    REGISTRY.iter().find(|e| e.name == name)
}

fn length_law(ctx: &Ctx) -> Result<Vec<ResultRow>> {
    let mut rows = Vec::new();
    for t in ctx.t_values() {
        let rep = length_law_test(ctx.params(t)?, ctx.cfg.trials, &ctx.mc)?;
        for (k, (&c, &e)) in rep.counts.iter().zip(&rep.expected).enumerate() {
            let tail = k + 1 == rep.counts.len();
            rows.push(
                ctx.row("length-law", &wilson(c, rep.trials))
                    .t(t)
                    .extra(if tail { "k_at_least" } else { "k" }, k)
                    .extra("expected", e)
                    .extra("chi2", rep.chi2)
                    .extra("p_value", rep.p_value)
                    .extra("mean", rep.mean)
                    .extra("mean_se", rep.mean_se),
            );
        }
    }
    Ok(rows)
}

fn edge_density(ctx: &Ctx) -> Result<Vec<ResultRow>> {
    let params = ctx.params(ctx.cfg.t)?;
    let e = Edge::along(Vertex::origin(ctx.cfg.d), 0);
    let mut rows = Vec::new();
    for u in ctx.u_values()? {
        let est = edge_presence_frequency(u, params, &e, ctx.cfg.trials, &ctx.mc)?;
        let enc = edge_presence_probability(&e, u, &params, None, 1e-12)?;
        rows.push(ctx.row("edge-density", &est).u(u).t(ctx.cfg.t).extra("edge", e).extra("exact_lo", enc.lo).extra("exact_hi", enc.hi));
    }
    Ok(rows)
}

fn truncation_decay(ctx: &Ctx) -> Result<Vec<ResultRow>> {
    let u = ctx.u()?;
    let r = ctx.r0();
    let pts = truncation_difference(u, ctx.params(ctx.cfg.t)?, r, &ctx.cfg.l, ctx.cfg.trials, &ctx.mc)?;
    let as_r: Vec<(i64, Estimate)> = pts.iter().map(|(l, e)| (*l as i64, *e)).collect();
    let fit = fit_decay(&as_r).ok();
    Ok(pts
        .iter()
        .map(|(l, e)| {
            let row = ctx.row("truncation-decay", e).u(u).t(ctx.cfg.t).r(r).l(*l);
            match &fit {
                Some(f) => row.extra("slope", f.slope).extra("r2", f.r2),
                None => row.extra("fit", "skipped"),
            }
        })
        .collect())
}

fn subcritical_decay(ctx: &Ctx) -> Result<Vec<ResultRow>> {
    let u = ctx.u()?;
    let r_max = *ctx.cfg.r.iter().max().expect("validated");
    let prof = point_to_boundary_profile(u, ctx.params(ctx.cfg.t)?, r_max, ctx.cfg.trials, &ctx.mc)?;
    let chosen: Vec<(i64, Estimate)> = prof.into_iter().filter(|(r, _)| ctx.cfg.r.contains(r)).collect();
    let fit = fit_decay(&chosen).ok();
    Ok(chosen
        .iter()
        .map(|(r, e)| {
            let row = ctx.row("subcritical-decay", e).u(u).t(ctx.cfg.t).r(*r);
            match &fit {
                Some(f) => row.extra("slope", f.slope).extra("r2", f.r2),
                None => row.extra("fit", "skipped"),
            }
        })
        .collect())
}

fn theta_curve_exp(ctx: &Ctx) -> Result<Vec<ResultRow>> {
    let params = ctx.params(ctx.cfg.t)?;
    let mut rows = Vec::new();
    for &r in &ctx.cfg.r {
        let proto = ctx.u_star_protocol(r)?;
        let labels = critical_labels(params, &proto.labels, ctx.cfg.trials, &ctx.mc)?;
        let curve = theta_curve(&labels, &ctx.cfg.u_grid);
        let slope = max_slope(&ctx.cfg.u_grid, &curve);
        for (u, e) in ctx.cfg.u_grid.iter().zip(&curve) {
            rows.push(ctx.row("theta-curve", e).u(*u).t(ctx.cfg.t).r(r).extra("max_slope", slope));
        }
    }
    Ok(rows)
}

fn u_star_row(ctx: &Ctx, name: &str, us: &UStar) -> ResultRow {
    let at = us.evaluations.iter().find(|(u, _)| *u == us.u_hat).map(|(_, e)| *e).unwrap_or(exact(0, us.trials));
    ctx.row(name, &at)
        .u(us.u_hat)
        .t(us.t)
        .r(us.r)
        .extra("u_hat", us.u_hat)
        .extra("bracket_lo", us.lo)
        .extra("bracket_hi", us.hi)
        .extra("threshold", us.threshold)
        .extra("censored", us.censored)
}

fn u_star_bisection(ctx: &Ctx) -> Result<Vec<ResultRow>> {
    let params = ctx.params(ctx.cfg.t)?;
    ctx.cfg
        .r
        .iter()
        .map(|&r| Ok(u_star_row(ctx, "u-star-bisection", &estimate_u_star(params, &ctx.u_star_protocol(r)?, &ctx.mc)?)))
        .collect()
}

fn continuity(ctx: &Ctx) -> Result<Vec<ResultRow>> {
    let scan = continuity_scan(ctx.cfg.d, &ctx.cfg.t_grid, &ctx.u_star_protocol(ctx.r0())?, &ctx.mc)?;
    let jumps = scan.jumps();
    Ok(scan
        .points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let row = u_star_row(ctx, "continuity-scan", p).extra("max_jump", scan.max_jump());
            if i > 0 {
                row.extra("jump_prev", jumps[i - 1])
            } else {
                row
            }
        })
        .collect())
}

fn t_star(ctx: &Ctx) -> Result<Vec<ResultRow>> {
    let u = ctx.u()?;
    let ts = t_star_scan(u, ctx.cfg.d, &ctx.cfg.t_grid, ctx.r0(), ctx.cfg.protocol.threshold, ctx.cfg.trials, &ctx.mc)?;
    let fmt = |x: Option<f64>| x.map_or("none".to_string(), |v| v.to_string());
    Ok(ts
        .grid
        .iter()
        .map(|(t, e)| {
            ctx.row("t-star-scan", e)
                .u(u)
                .t(*t)
                .r(ctx.r0())
                .extra("t_hat", fmt(ts.t_hat))
                .extra("bracket_lo", fmt(ts.lo))
                .extra("bracket_hi", fmt(ts.hi))
        })
        .collect())
}

fn coupling(ctx: &Ctx) -> Result<Vec<ResultRow>> {
    let u = ctx.u()?;
    let t0 = ctx.cfg.t;
    ctx.cfg
        .t_grid
        .iter()
        .map(|&t| {
            let a = coupling_agreement(u, ctx.cfg.d, t0, t, ctx.r0(), ctx.cfg.trials, &ctx.mc)?;
            Ok(ctx
                .row("coupling-agreement", &a.agree)
                .u(u)
                .t(t)
                .r(ctx.r0())
                .extra("T0", t0)
                .extra("shorten_hit", a.shorten_hit.p)
                .extra("sprinkle_hit", a.sprinkle_hit.p)
                .extra("union_bound", a.union_bound()))
        })
        .collect()
}

fn strong(ctx: &Ctx) -> Result<Vec<ResultRow>> {
    let u = ctx.u()?;
    let params = ctx.params(ctx.cfg.t)?;
    ctx.cfg
        .r
        .iter()
        .map(|&r| {
            let s = strong_percolation_frequency(u, params, r, ctx.cfg.trials, &ctx.mc)?;
            Ok(ctx.row("strong-percolation", &s.both).u(u).t(ctx.cfg.t).r(r).extra("exist", s.exist.p).extra("unique", s.unique.p))
        })
        .collect()
}

fn xi_freq(ctx: &Ctx) -> Result<Vec<ResultRow>> {
    let u = ctx.u()?;
    let u2 = ctx.cfg.u2.expect("validated");
    let params = ctx.params(ctx.cfg.t)?;
    ctx.cfg
        .r
        .iter()
        .map(|&n| {
            Ok(ctx.row("xi-frequency", &xi_frequency(n, u, u2, params, ctx.cfg.trials, &ctx.mc)?).u(u).t(ctx.cfg.t).r(n).extra("u2", u2))
        })
        .collect()
}

fn u_tilde(ctx: &Ctx) -> Result<Vec<ResultRow>> {
    let u = ctx.u()?;
    let params = ctx.params(ctx.cfg.t)?;
    ctx.cfg
        .r
        .iter()
        .map(|&r| {
            let s = u_tilde_diagnostic(u, params, r, ctx.cfg.trials, &ctx.mc)?;
            Ok(ctx
                .row("u-tilde", &s.estimate)
                .u(u)
                .t(ctx.cfg.t)
                .r(r)
                .extra("scaled", s.value)
                .extra("scaled_lo", s.lo)
                .extra("scaled_hi", s.hi))
        })
        .collect()
}

fn osss(ctx: &Ctx) -> Result<Vec<ResultRow>> {
    let cfg = ctx.osss()?;
    let rep = osss_check(&cfg, ctx.cfg.trials, ctx.mc.seed)?;
    let k = (rep.theta_hat * ctx.cfg.trials as f64).round() as u64;
    Ok(vec![ctx
        .row("osss", &wilson(k, ctx.cfg.trials))
        .u(cfg.u)
        .t(ctx.cfg.t)
        .r(cfg.r)
        .l(cfg.l)
        .eps(cfg.eps)
        .extra("var_hat", rep.var_hat)
        .extra("rhs", rep.rhs)
        .extra("rhs_v", rep.rhs_v)
        .extra("rhs_e", rep.rhs_e)
        .extra("slack", rep.slack)
        .extra("sigma", rep.sigma)
        .extra("holds", rep.holds)])
}

fn revealment_exp(ctx: &Ctx) -> Result<Vec<ResultRow>> {
    let cfg = ctx.osss()?;
    let trials = ctx.cfg.trials;
    if let Some(path) = &ctx.cfg.trace_dump {
        let (trace, _) = run_algorithm_t(&cfg, &mut trial_rng(ctx.mc.seed, key_of("trace-dump"), 0))?;
        std::fs::File::create(path)
            .and_then(|mut f| f.write_all(trace.to_text().as_bytes()))
            .map_err(|e| FriError::InvalidParameter(format!("cannot write {}: {e}", path.display())))?;
    }
    let rho = revealment(&cfg, trials, ctx.mc.seed, key_of("revealment"))?;
    let theta = theta_profile(&cfg, trials, ctx.mc.seed, key_of("revealment-theta"))?;
    let sigma_r: f64 = theta[..cfg.r as usize].iter().map(|e| e.p).sum();
    let bound = 2.0 * ((2 * cfg.l + 1) as f64).powi(cfg.dim() as i32) * sigma_r / cfg.r as f64;
    let vwin = cfg.bundle_window();
    Ok(rho
        .rho_v
        .iter()
        .enumerate()
        .map(|(x, &p)| {
            let k = (p * trials as f64).round() as u64;
            ctx.row("revealment", &wilson(k, trials))
                .u(cfg.u)
                .t(ctx.cfg.t)
                .r(cfg.r)
                .l(cfg.l)
                .eps(cfg.eps)
                .extra("x", vwin.vertex(x).coords().iter().map(i64::to_string).collect::<Vec<_>>().join(" "))
                .extra("sigma_r", sigma_r)
                .extra("bound", bound)
        })
        .collect())
}

/// The three edges used by the FKG experiment: two at the origin and one at `e1`.
pub fn fkg_edges(d: usize) -> Vec<Edge> {
    let o = Vertex::origin(d);
    let e1 = Vertex::unit(d, 0, 1);
    vec![Edge::along(o, 0), Edge::along(o, 1.min(d - 1)), Edge::along(e1, if d > 1 { 1 } else { 0 })].into_iter().fold(
        Vec::new(),
        |mut v, e| {
            if !v.contains(&e) {
                v.push(e);
            }
            v
        },
    )
}

fn fkg(ctx: &Ctx) -> Result<Vec<ResultRow>> {
    let u = ctx.u()?;
    let d = ctx.cfg.d;
    let starts = [Vertex::origin(d), Vertex::unit(d, 0, 1)];
    let edges = fkg_edges(d);
    ctx.cfg
        .l
        .iter()
        .map(|&l| {
            let mut rng = trial_rng(ctx.mc.seed, key_of("fkg"), l);
            let rep = fkg_check_truncated(&starts, l as u32, u, ctx.cfg.t, &edges, 10_000, &mut rng)?;
            Ok(ctx
                .row("fkg", &exact(if rep.holds { rep.pairs } else { 0 }, rep.pairs))
                .u(u)
                .t(ctx.cfg.t)
                .l(l)
                .extra("min_covariance", rep.min_covariance)
                .extra("exhaustive", rep.exhaustive)
                .extra("edges", edges.len()))
        })
        .collect()
}

fn trees(ctx: &Ctx) -> Result<Vec<ResultRow>> {
    let d = ctx.cfg.d;
    let x = Vertex::origin(d);
    let mut rows = Vec::new();
    for &k0 in &ctx.cfg.k0 {
        let ks = KScales::new(1, k0)?;
        let h1 = h1_descendants(1, &x, &ks)?.len();
        let h2 = h2_descendants(1, &x, &ks)?.len();
        for n in 1..=2u32 {
            let structured = structured_tree_count(n, &ks, d)?;
            let (enumerated, est) = match enumerate_trees(n, &x, &ks) {
                Ok(t) => (t.len().to_string(), exact(t.len() as u64, structured as u64)),
                Err(FriError::TooLarge(_)) => ("skipped".to_string(), exact(0, 0)),
                Err(e) => return Err(e),
            };
            rows.push(
                ctx.row("tree-enumeration", &est)
                    .l(n as u64)
                    .extra("k0", k0)
                    .extra("level", n)
                    .extra("h1", h1)
                    .extra("h2", h2)
                    .extra("enumerated", enumerated)
                    .extra("structured", structured),
            );
        }
    }
    Ok(rows)
}

fn j_scales_exp(ctx: &Ctx) -> Result<Vec<ResultRow>> {
    let mut rows = Vec::new();
    for &b in &ctx.cfg.b {
        let js = j_scales(ctx.cfg.j1, b, ctx.cfg.k_max)?;
        let holds = js.sandwich_holds()?;
        let z = zeta(b)?;
        for v in &js.values {
            rows.push(
                ctx.row("j-scales", &exact(u64::from(holds), 1))
                    .extra("b", b)
                    .extra("k", v.k)
                    .extra("J", v.value)
                    .extra("log_excess", v.log_excess)
                    .extra("zeta", z)
                    .extra("exact", v.exact.is_some()),
            );
        }
    }
    Ok(rows)
}

fn pivotal(ctx: &Ctx) -> Result<Vec<ResultRow>> {
    let u = ctx.u()?;
    let r = ctx.r0();
    let params = ctx.params(ctx.cfg.t)?;
    let scales = LScales::new(ctx.l0().max(1), 2)?;
    let lo = Vertex::unit(ctx.cfg.d, 0, 1).scale(2 * r - 1);
    let object = PivotObject::Edge(Edge::along(lo, 0));
    let est = pivotal_estimate(ctx.cfg.time, u, params, &scales, &object, r, ctx.cfg.trials, &ctx.mc)?;
    Ok(vec![ctx.row("pivotal", &est).u(u).t(ctx.cfg.t).r(r).l(ctx.l0()).extra("time", ctx.cfg.time).extra("edge", Edge::along(lo, 0))])
}
