use std::collections::BTreeSet;

use fri_core::clusters::ClusterIndex;
use fri_core::couplings::{couple_lengths, shorten_paths};
use fri_core::estimators::{run_trials, theta_curve, McConfig};
use fri_core::events::{crossing, exist_event, point_to_boundary, unique_event};
use fri_core::fkg::{build_universe, exact_expectation, monotone_functions, EdgeFunction};
use fri_core::fri_process::{sample_decorated, sample_fri};
use fri_core::killed_walk::{path_probability, KillParams, Path};
use fri_core::lattice::{diam, diam_edges, outer_boundary, Cube, Edge, EdgeSet, LexOrder, Vertex, VertexSet, Window};
use fri_core::rng::{key_of, trial_rng};
use fri_core::stats::{wilson, Z95};
use proptest::prelude::*;
use rand::Rng;

fn vertex(d: usize, r: i64) -> impl Strategy<Value = Vertex> {
    proptest::collection::vec(-r..=r, d).prop_map(|c| Vertex::new(&c))
}

fn edge_set(w: &Window, mask: &[bool]) -> EdgeSet {
    let mut es = EdgeSet::new(w.clone());
    let valid: Vec<usize> = (0..w.num_edge_slots()).filter(|&s| w.slot_is_valid(s)).collect();
    for (s, keep) in valid.iter().zip(mask.iter().cycle()) {
        if *keep {
            es.insert_slot(*s);
        }
    }
    es
}

fn random_edges(w: &Window, density: f64, seed: u64) -> EdgeSet {
    let mut rng = trial_rng(seed, key_of("prop-edges"), 0);
    let mut es = EdgeSet::new(w.clone());
    for s in 0..w.num_edge_slots() {
        if w.slot_is_valid(s) && rng.random::<f64>() < density {
            es.insert_slot(s);
        }
    }
    es
}

/// Components by depth-first search over an explicit adjacency list.
fn dfs_partition(es: &EdgeSet) -> BTreeSet<BTreeSet<Vertex>> {
    let verts: Vec<Vertex> = es.vertices().iter().collect();
    let edges: Vec<Edge> = es.iter().collect();
    let mut seen = BTreeSet::new();
    let mut parts = BTreeSet::new();
    for &v in &verts {
        if seen.contains(&v) {
            continue;
        }
        let mut comp = BTreeSet::new();
        let mut stack = vec![v];
        while let Some(x) = stack.pop() {
            if !comp.insert(x) {
                continue;
            }
            for e in &edges {
                let [a, b] = e.endpoints();
                if a == x && !comp.contains(&b) {
                    stack.push(b);
                }
                if b == x && !comp.contains(&a) {
                    stack.push(a);
                }
            }
        }
        seen.extend(comp.iter().copied());
        parts.insert(comp);
    }
    parts
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn vertex_lex_order_is_strict_total(a in vertex(3, 3), b in vertex(3, 3), c in vertex(3, 3)) {
        prop_assert!(!a.lex_less(&a));
        if a != b {
            prop_assert!(a.lex_less(&b) ^ b.lex_less(&a));
        }
        if a.lex_less(&b) && b.lex_less(&c) {
            prop_assert!(a.lex_less(&c));
        }
        let first_diff = a.coords().iter().zip(b.coords()).find(|(x, y)| x != y);
        prop_assert_eq!(a.lex_less(&b), first_diff.is_some_and(|(x, y)| x < y));
    }

    #[test]
    fn edge_lex_order_is_strict_total(a in vertex(2, 3), b in vertex(2, 3), c in vertex(2, 3), i in 0usize..2, j in 0usize..2, k in 0usize..2) {
        let (ea, eb, ec) = (Edge::along(a, i), Edge::along(b, j), Edge::along(c, k));
        prop_assert!(!ea.lex_less(&ea));
        if ea != eb {
            prop_assert!(ea.lex_less(&eb) ^ eb.lex_less(&ea));
        }
        if ea.lex_less(&eb) && eb.lex_less(&ec) {
            prop_assert!(ea.lex_less(&ec));
        }
    }

    #[test]
    fn window_index_round_trips(d in 1usize..=4, r in 0i64..4, raw in proptest::collection::vec(-3i64..=3, 4)) {
        let w = Window::centered(d, r);
        let v = Vertex::new(&raw[..d].iter().map(|&c| c.clamp(-r, r)).collect::<Vec<_>>());
        let i = w.index(&v).unwrap();
        prop_assert_eq!(w.vertex(i), v);
        for axis in 0..d {
            let e = Edge::along(v, axis);
            match w.edge_slot(&e) {
                Some(s) => {
                    prop_assert!(v.coord(axis) < r);
                    prop_assert_eq!(w.edge(s), e);
                    prop_assert!(w.slot_is_valid(s));
                }
                None => prop_assert_eq!(v.coord(axis), r),
            }
        }
    }

    #[test]
    fn outer_boundary_by_definition_scan(mask in proptest::collection::vec(any::<bool>(), 25)) {
        let w = Window::centered(2, 3);
        let inner = Cube::centered(2, 2);
        let members: Vec<Vertex> = inner.vertices().zip(&mask).filter(|(_, m)| **m).map(|(v, _)| v).collect();
        let a = VertexSet::from_vertices(w.clone(), &members).unwrap();
        let by_fn: BTreeSet<Vertex> = outer_boundary(&a).unwrap().iter().collect();
        let scan: BTreeSet<Vertex> = w
            .cube()
            .vertices()
            .filter(|v| !a.contains(v) && members.iter().any(|m| m.dist_l1(v) == 1))
            .collect();
        prop_assert_eq!(by_fn, scan);
    }

    #[test]
    fn edge_set_diameter_matches_vertex_diameter(mask in proptest::collection::vec(any::<bool>(), 1..40)) {
        let w = Window::centered(3, 2);
        let es = edge_set(&w, &mask);
        if es.is_empty() {
            prop_assert!(diam_edges(&es).is_err());
        } else {
            let endpoints: Vec<Vertex> = es.iter().flat_map(|e| e.endpoints()).collect();
            prop_assert_eq!(diam_edges(&es).unwrap(), diam(&endpoints).unwrap());
        }
    }

    #[test]
    fn cluster_index_matches_dfs(seed in any::<u64>(), density in 0.1f64..0.7) {
        let w = Window::centered(2, 4);
        let es = random_edges(&w, density, seed);
        let mut idx = ClusterIndex::build(&es, None);
        let expected = dfs_partition(&es);
        prop_assert_eq!(idx.clusters().len(), expected.len());
        for comp in &expected {
            let first = *comp.iter().next().unwrap();
            let root = idx.root_of(&first).unwrap();
            for v in comp {
                prop_assert_eq!(idx.root_of(v), Some(root));
            }
            let info = idx.cluster_of(&first).unwrap().clone();
            prop_assert_eq!(info.vertices, comp.len());
            prop_assert_eq!(info.diam(), diam(&comp.iter().copied().collect::<Vec<_>>()).unwrap());
        }
    }

    #[test]
    fn increasing_events_survive_added_edges(seed in any::<u64>(), density in 0.1f64..0.6, extra in 0.0f64..0.5) {
        let w = Window::centered(2, 6);
        let small = random_edges(&w, density, seed);
        let mut big = random_edges(&w, extra, seed ^ 0x9e37);
        big.union_with(&small).unwrap();
        let o = Vertex::origin(2);
        for r in [1, 2, 3] {
            prop_assert!(!crossing(&o, r, &small).unwrap() || crossing(&o, r, &big).unwrap());
            prop_assert!(!point_to_boundary(&o, 2 * r, &small).unwrap() || point_to_boundary(&o, 2 * r, &big).unwrap());
        }
        for r in [3, 6] {
            prop_assert!(!exist_event(&o, r, &small).unwrap() || exist_event(&o, r, &big).unwrap());
        }
    }

    #[test]
    fn unique_is_monotone_under_annulus_additions(seed in any::<u64>(), density in 0.1f64..0.6, extra in 0.0f64..0.6) {
        let r = 3;
        let w = Window::centered(2, 2 * r);
        let base = random_edges(&w, density, seed);
        let inner = Cube::centered(2, r);
        let mut more = random_edges(&w, extra, seed ^ 0x51ed);
        let annulus_only: Vec<Edge> = more.iter().filter(|e| !inner.contains_edge(e)).collect();
        more = EdgeSet::from_edges(w.clone(), &annulus_only).unwrap();
        more.union_with(&base).unwrap();
        let o = Vertex::origin(2);
        prop_assert!(!unique_event(&o, r, &base).unwrap() || unique_event(&o, r, &more).unwrap());
    }

    #[test]
    fn wilson_interval_is_ordered_and_closed_form(n in 1u64..5000, frac in 0.0f64..=1.0) {
        let k = ((n as f64) * frac).floor() as u64;
        let e = wilson(k, n);
        prop_assert!(0.0 <= e.lo && e.lo <= e.p && e.p <= e.hi && e.hi <= 1.0);
        let (nf, p, z) = (n as f64, k as f64 / n as f64, Z95);
        let centre = (p + z * z / (2.0 * nf)) / (1.0 + z * z / nf);
        let half = z / (1.0 + z * z / nf) * (p * (1.0 - p) / nf + z * z / (4.0 * nf * nf)).sqrt();
        prop_assert!((e.lo - (centre - half).max(0.0)).abs() < 1e-12);
        prop_assert!((e.hi - (centre + half).min(1.0)).abs() < 1e-12);
    }

    #[test]
    fn coupled_lengths_are_capped_and_positive(p1 in 0.0f64..0.9, gap in 0.0f64..0.09, m in 1u64..50, seed in any::<u64>()) {
        let p2 = p1 + gap;
        let mut rng = trial_rng(seed, 1, 0);
        let n = couple_lengths(p1, p2, m, &mut rng).unwrap();
        prop_assert!((1..=m).contains(&n));
        if gap == 0.0 {
            prop_assert_eq!(n, m);
        }
    }

    #[test]
    fn shortening_keeps_prefixes(seed in any::<u64>(), t_new in 0.05f64..2.0) {
        let params = KillParams::new(2.0, 2).unwrap();
        let cube = Cube::centered(2, 3);
        let mut rng = trial_rng(seed, key_of("prop-shorten"), 0);
        let s = sample_fri(0.5, params, &cube, None, 1e-3, &mut rng).unwrap();
        let short = shorten_paths(&s, t_new, &mut rng).unwrap();
        prop_assert_eq!(short.soup().len(), s.soup().len());
        for i in 0..s.soup().len() {
            let (a, b) = (s.soup().steps(i), short.soup().steps(i));
            prop_assert!(b.len() <= a.len());
            prop_assert_eq!(&a[..b.len()], b);
            prop_assert_eq!(s.soup().start_coords(i), short.soup().start_coords(i));
        }
        prop_assert!(short.edges().is_subset(s.edges()));
    }

    #[test]
    fn truncation_and_threshold_are_nested(seed in any::<u64>()) {
        let params = KillParams::new(1.0, 3).unwrap();
        let cube = Cube::centered(3, 2);
        let mut rng = trial_rng(seed, key_of("prop-nested"), 0);
        let s = sample_fri(0.5, params, &cube, None, 1e-3, &mut rng).unwrap();
        let mut prev = s.truncate(0);
        for l in 1..8 {
            let next = s.truncate(l);
            prop_assert!(prev.edges().is_subset(next.edges()));
            prev = next;
        }
        prop_assert!(prev.edges().is_subset(s.edges()));
        let dec = sample_decorated(1.0, params, &cube, None, 1e-3, &mut rng).unwrap();
        let grid = [0.0, 0.1, 0.25, 0.5, 0.75, 1.0];
        for w in grid.windows(2) {
            prop_assert!(dec.threshold(w[0]).unwrap().edges().is_subset(dec.threshold(w[1]).unwrap().edges()));
        }
    }

    #[test]
    fn trial_results_ignore_sharding(seed in any::<u64>(), trials in 0u64..200, shards in 1usize..9) {
        let f = |i: u64, rng: &mut fri_core::rng::TrialRng| Ok((i, rng.random::<u64>()));
        let one = run_trials(trials, &McConfig::new(seed, 1, 1e-6).unwrap(), 7, f).unwrap();
        let many = run_trials(trials, &McConfig::new(seed, shards, 1e-6).unwrap(), 7, f).unwrap();
        prop_assert_eq!(one, many);
    }

    #[test]
    fn theta_curve_is_monotone(labels in proptest::collection::vec(prop_oneof![0.0f64..3.0, Just(f64::INFINITY)], 1..200)) {
        let grid: Vec<f64> = (0..30).map(|i| i as f64 * 0.1).collect();
        let curve = theta_curve(&labels, &grid);
        for w in curve.windows(2) {
            prop_assert!(w[0].successes <= w[1].successes);
        }
    }

    #[test]
    fn exact_expectation_is_linear_and_monotone(fi in 0usize..20, gi in 0usize..20) {
        let o = Vertex::origin(2);
        let u = build_universe(&[o, Vertex::unit(2, 0, 1)], 2, 0.7, 1.0).unwrap();
        let edges = [Edge::along(o, 0), Edge::along(o, 1), Edge::along(Vertex::unit(2, 0, 1), 1)];
        let fs = monotone_functions(3).unwrap();
        let (f, g) = (&fs[fi], &fs[gi]);
        let ef = exact_expectation(&u, &edges, f).unwrap();
        let eg = exact_expectation(&u, &edges, g).unwrap();
        let both = exact_expectation(&u, &edges, &f.and(g)).unwrap();
        let either = EdgeFunction::from_fn(3, |w| f.eval(w) || g.eval(w));
        let eo = exact_expectation(&u, &edges, &either).unwrap();
        prop_assert!((ef + eg - both - eo).abs() < 1e-12);
        if (0..8u32).all(|w| !f.eval(w) || g.eval(w)) {
            prop_assert!(ef <= eg + 1e-15);
        }
    }
}

#[test]
fn box_edge_count_formula() {
    for d in 1..=4usize {
        for r in 0..=4i64 {
            let c = Cube::centered(d, r);
            let enumerated = c.edges().count() as u64;
            let formula = d as u64 * (2 * r as u64) * (2 * r as u64 + 1).pow(d as u32 - 1);
            assert_eq!(enumerated, formula, "d={d} R={r}");
            assert_eq!(c.num_edges(), formula);
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
fn path_probabilities_sum_to_one_with_tail() {
    for d in [1usize, 2, 3] {
        for t in [0.3, 1.0, 4.0] {
            let params = KillParams::new(t, d).unwrap();
            for k in 0..=4usize {
                let mut paths = Vec::new();
                all_paths(Vertex::origin(d), k, &mut paths, &mut Vec::new());
                let total: f64 = paths.iter().map(|p| path_probability(p, &params).unwrap()).sum();
                let tail = params.survival().powi(k as i32 + 1);
                assert!((total + tail - 1.0).abs() < 1e-12, "d={d} T={t} k={k}");
            }
        }
    }
}
