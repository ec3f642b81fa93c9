use std::collections::BTreeSet;

use fri_core::couplings::{bernoulli_field, gamma_union};
use fri_core::exploration::{run_algorithm_t, run_algorithm_t_with_j, Coding, OsssParams, RunTrace};
use fri_core::fkg::{build_universe, joint_absence_by_series, Sum};
use fri_core::fri_process::{edge_presence_probability, sample_fri};
use fri_core::killed_walk::{edge_visit_probability, path_probability, sample_path, KillParams, Path};
use fri_core::lattice::{Cube, Edge, Vertex, Window};
use fri_core::renormalization::{h1_descendants, h2_descendants, mu, zeta, KScales};
use fri_core::rng::{key_of, trial_rng};
use fri_core::stats::wilson;
use statrs::distribution::{ContinuousCDF, Normal};

const MU_REFERENCE: &str = include_str!("data/mu_reference.txt");
const ZETA_REFERENCE: &str = include_str!("data/zeta_reference.txt");

fn data_rows(text: &str) -> impl Iterator<Item = (&str, &str)> {
    text.lines().filter(|l| !l.starts_with('#') && !l.trim().is_empty()).map(|l| l.split_once(' ').unwrap())
}

/// Two-sided z threshold at family-wise level `alpha` over `m` tests.
fn bonferroni_z(alpha: f64, m: usize) -> f64 {
    Normal::new(0.0, 1.0).unwrap().inverse_cdf(1.0 - alpha / (2.0 * m as f64))
}

#[test]
fn mu_matches_high_precision_reference() {
    let mut n = 0;
    for (r, m) in data_rows(MU_REFERENCE) {
        assert_eq!(mu(r.parse().unwrap()).unwrap(), m.parse::<u64>().unwrap(), "R = {r}");
        n += 1;
    }
    assert!(n >= 1000);
    assert_eq!(mu(2981).unwrap(), 7);
}

#[test]
fn zeta_matches_high_precision_reference() {
    for (b, z) in data_rows(ZETA_REFERENCE) {
        let expected: f64 = z.parse().unwrap();
        assert!((zeta(b.parse().unwrap()).unwrap() - expected).abs() < 1e-9, "b = {b}");
    }
    let head: f64 = (1..=5).map(|j| 1.0 / (j * j) as f64).sum();
    assert!((zeta(2.0).unwrap() - (std::f64::consts::PI.powi(2) / 6.0 - head)).abs() < 1e-9);
}

/// Vertices on the inner boundary of `B_c(r)`.
fn sphere(c: &Vertex, r: i64) -> BTreeSet<Vertex> {
    Cube::new(*c, r).unwrap().vertices().filter(|v| v.dist_linf(c) == r).collect()
}

#[test]
fn descendants_match_vertex_level_scan() {
    for d in [2usize, 3] {
        for (k0_base, k0) in [(1, 4), (2, 4), (1, 6)] {
            let ks = KScales::new(k0_base, k0).unwrap();
            let x = Vertex::origin(d);
            let kn = ks.level(1).unwrap();
            let km = ks.level(0).unwrap();
            let outer = Cube::new(x, kn).unwrap();
            let shell = sphere(&x, kn);
            let mid = sphere(&x, (3 * km) / 2);
            let reach = kn / km + 6;
            let mut h1 = BTreeSet::new();
            let mut h2 = BTreeSet::new();
            for g in Cube::centered(d, reach).vertices() {
                let y = g.scale(km);
                let b = Cube::new(y, km).unwrap();
                if outer.contains_cube(&b) && shell.iter().any(|v| b.contains(v)) {
                    h1.insert(y);
                }
                if mid.iter().any(|v| b.contains(v)) {
                    h2.insert(y);
                }
            }
            let got1: BTreeSet<Vertex> = h1_descendants(1, &x, &ks).unwrap().into_iter().collect();
            let got2: BTreeSet<Vertex> = h2_descendants(1, &x, &ks).unwrap().into_iter().collect();
            assert_eq!(got1, h1, "H1 d={d} K0={k0_base} k0={k0}");
            assert_eq!(got2, h2, "H2 d={d} K0={k0_base} k0={k0}");
        }
    }
}

fn all_paths(start: Vertex, len: usize, out: &mut Vec<Path>, prefix: &mut Vec<u8>) {
    out.push(Path::new(start, prefix.clone()).unwrap());
    if prefix.len() == len {
        return;
    }
    for code in 0..(2 * start.dim()) as u8 {
        prefix.push(code);
        all_paths(start, len, out, prefix);
        prefix.pop();
    }
}

#[test]
fn edge_visit_enclosure_contains_path_enumeration() {
    for (d, k) in [(2usize, 7usize), (3, 5)] {
        for t in [0.5, 1.0, 3.0] {
            let params = KillParams::new(t, d).unwrap();
            let z = Vertex::origin(d);
            let mut paths = Vec::new();
            all_paths(z, k, &mut paths, &mut Vec::new());
            for e in [Edge::along(z, 0), Edge::along(Vertex::unit(d, 1, 1), 0), Edge::along(Vertex::unit(d, 0, -1).scale(2), 1)] {
                let mut s = Sum::default();
                for p in paths.iter().filter(|p| p.traverses(&e)) {
                    s.add(path_probability(p, &params).unwrap());
                }
                let lo = s.value();
                let hi = lo + params.survival().powi(k as i32 + 1);
                let enc = edge_visit_probability(z, &e, &params, 1e-12).unwrap();
                assert!(enc.lo <= hi + 1e-12 && enc.hi >= lo - 1e-12, "d={d} T={t} e={e}: {enc:?} vs [{lo}, {hi}]");
                assert!(enc.width() < 1e-9);
            }
        }
    }
}

#[test]
fn edge_visit_enclosure_contains_monte_carlo() {
    let trials = 100_000u64;
    for (d, t) in [(2usize, 1.0), (3, 2.0)] {
        let params = KillParams::new(t, d).unwrap();
        let z = Vertex::origin(d);
        let e = Edge::along(Vertex::unit(d, 1, 1), 0);
        let mut rng = trial_rng(11, key_of("oracle-visit"), d as u64);
        let hits = (0..trials).filter(|_| sample_path(z, &params, &mut rng).traverses(&e)).count() as u64;
        let est = wilson(hits, trials);
        let enc = edge_visit_probability(z, &e, &params, 1e-12).unwrap();
        let sigma = (enc.mid() * (1.0 - enc.mid()) / trials as f64).sqrt();
        assert!((est.p - enc.mid()).abs() <= 4.0 * sigma + enc.width(), "d={d}: {} vs {enc:?}", est.p);
    }
}

#[test]
fn joint_absence_factorizes_over_a_ten_path_universe() {
    let o = Vertex::origin(3);
    let full = build_universe(&[o, Vertex::unit(3, 0, 1)], 1, 0.8, 1.0).unwrap();
    let u = full.restrict(|i, _| i < 10);
    assert_eq!(u.len(), 10);
    let starts: BTreeSet<Vertex> = u.paths().iter().map(|p| p.start()).collect();
    assert_eq!(starts.len(), 2);
    for mask in 0u32..(1 << 10) {
        let subset: Vec<usize> = (0..10).filter(|i| mask >> i & 1 == 1).collect();
        let joint = joint_absence_by_series(&u, &subset).unwrap();
        let product: f64 = subset.iter().map(|&i| 1.0 - u.q()[i]).product();
        assert!((joint - product).abs() < 1e-14, "mask {mask:#b}: {joint} vs {product}");
    }
}

#[test]
fn sampled_edge_law_matches_exact_law() {
    let o = Vertex::origin(3);
    let u = build_universe(&[o, Vertex::unit(3, 0, 1)], 2, 1.0, 1.0).unwrap();
    let edges = [Edge::along(o, 0), Edge::along(o, 1), Edge::along(Vertex::unit(3, 0, 1), 1)];
    let law = u.edge_law(&edges).unwrap();
    let n = 100_000u64;
    let mut counts = [0u64; 8];
    let mut rng = trial_rng(3, key_of("oracle-edge-law"), 0);
    for _ in 0..n {
        counts[u.sample_edges(&edges, &mut rng) as usize] += 1;
    }
    for (w, (&c, &p)) in counts.iter().zip(&law).enumerate() {
        let sigma = (p * (1.0 - p) / n as f64).sqrt().max(1e-12);
        let z = (c as f64 / n as f64 - p).abs() / sigma;
        assert!(z < 4.0, "configuration {w:03b}: z = {z}");
    }
}

#[test]
fn gamma_density_identity_on_twenty_edges() {
    let params = KillParams::new(1.0, 3).unwrap();
    let (u, eps) = (0.4, 0.2);
    let cube = Cube::centered(3, 2);
    let w = Window::new(cube).unwrap();
    let edges: Vec<Edge> = cube.edges().step_by(7).take(20).collect();
    assert_eq!(edges.len(), 20);
    let trials = 20_000u64;
    let mut counts = vec![0u64; edges.len()];
    for i in 0..trials {
        let mut rng = trial_rng(5, key_of("oracle-gamma"), i);
        let fi = sample_fri(u, params, &cube, None, 1e-8, &mut rng).unwrap();
        let g = gamma_union(fi.edges(), &bernoulli_field(&w, eps, &mut rng).unwrap()).unwrap();
        for (c, e) in counts.iter_mut().zip(&edges) {
            *c += u64::from(g.contains(e));
        }
    }
    let z_max = bonferroni_z(0.0027, edges.len());
    for (c, e) in counts.iter().zip(&edges) {
        let fi = edge_presence_probability(e, u, &params, None, 1e-12).unwrap().mid();
        let p = 1.0 - (1.0 - eps) * (1.0 - fi);
        let z = (*c as f64 / trials as f64 - p).abs() / (p * (1.0 - p) / trials as f64).sqrt();
        assert!(z < z_max, "{e}: z = {z}");
    }
}

fn small_osss() -> OsssParams {
    OsssParams::new(6, 2, 0.2, 0.3, KillParams::new(1.0, 3).unwrap()).unwrap()
}

#[test]
fn exploration_outcome_matches_full_reveal() {
    let cfg = small_osss();
    for i in 0..1000u64 {
        let mut rng = trial_rng(21, key_of("oracle-alg-t"), i);
        let (trace, coding) = run_algorithm_t(&cfg, &mut rng).unwrap();
        assert_eq!(trace.outcome, coding.xi(trace.j), "run {i}, j = {}", trace.j);
    }
}

#[test]
fn exploration_never_samples_a_component_twice() {
    let cfg = OsssParams::new(4, 2, 0.2, 0.3, KillParams::new(1.0, 3).unwrap()).unwrap();
    for i in 0..10_000u64 {
        let mut rng = trial_rng(22, key_of("oracle-alg-t-unique"), i);
        let coding = Coding::sample(&cfg, &mut rng);
        let j = 1 + (i % cfg.r as u64) as i64;
        let trace = run_algorithm_t_with_j(&cfg, j, &coding).unwrap();
        let v: BTreeSet<usize> = trace.revealed_v.iter().map(|(x, _)| *x).collect();
        let e: BTreeSet<usize> = trace.revealed_e.iter().map(|(s, _)| *s).collect();
        assert_eq!(v.len(), trace.revealed_v.len(), "run {i}");
        assert_eq!(e.len(), trace.revealed_e.len(), "run {i}");
        if i % 100 == 0 {
            let replayed = RunTrace::replay(&trace.to_text()).unwrap();
            assert_eq!(replayed.outcome, trace.outcome);
            assert_eq!(replayed.revealed_v, trace.revealed_v);
            assert_eq!(replayed.revealed_e, trace.revealed_e);
        }
    }
}
