use std::collections::VecDeque;
use std::f64::consts::PI;

use oamtopo::channel::{mode_channel_matrix, LinkConfig, Method};
use oamtopo::geometry::{build_auxiliary, build_cuca_uniform, build_uca, Auxiliary};
use oamtopo::metrics::count_bit_errors;
use oamtopo::reconfig::{catalog_with_count, ground_cost, hungarian, switching_cost};
use oamtopo::transceiver::{Constellation, Link, TransceiverPlan};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

// Gaussian tail by composite Simpson on the density over [x, x + 12].
fn q_function(x: f64) -> f64 {
    let n = 20_000;
    let h = 12.0 / n as f64;
    let f = |t: f64| (-0.5 * t * t).exp() / (2.0 * PI).sqrt();
    let mut s = f(x) + f(x + 12.0);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(x + i as f64 * h);
    }
    s * h / 3.0
}

fn single_stream_link(snr_db: f64) -> (Link, f64) {
    let cfg = LinkConfig::default().with_snr_db(snr_db);
    let t = build_uca(4, 0.05, 0.0).unwrap();
    let mut plan = TransceiverPlan::equal_power(1, 4, cfg.power_budget);
    plan.modes = vec![0];
    plan.allocation = vec![cfg.power_budget];
    let link = Link::new(&t, &t, &cfg, &plan, Method::Discrete).unwrap();
    let h = mode_channel_matrix(&t, &t, 0, &cfg, Method::Discrete).unwrap()[(0, 0)];
    let gamma = cfg.power_budget * h.norm_sqr() / (cfg.noise_power / 4.0);
    (link, gamma)
}

#[test]
fn single_stream_qpsk_matches_closed_form() {
    for snr in [58.0, 61.0, 63.0] {
        let (link, gamma) = single_stream_link(snr);
        let want = q_function(gamma.sqrt());
        let frames = 100_000;
        let got = count_bit_errors(&link, Constellation::Qpsk, frames, 21, 0, true);
        let sd = (want * (1.0 - want) / got.bits as f64).sqrt();
        assert!(want >= 1e-4);
        assert!((got.rate() - want).abs() < 3.0 * sd, "snr {snr}: {} vs {want} (sd {sd})", got.rate());
    }
}

#[test]
fn doubling_frames_stays_within_binomial_band() {
    let (link, _) = single_stream_link(60.0);
    let a = count_bit_errors(&link, Constellation::Qpsk, 20_000, 5, 0, true);
    let b = count_bit_errors(&link, Constellation::Qpsk, 40_000, 5, 1, true);
    let p = b.rate();
    let sd = (p * (1.0 - p) / a.bits as f64 + p * (1.0 - p) / b.bits as f64).sqrt();
    assert!((a.rate() - b.rate()).abs() < 3.0 * sd, "{} vs {}", a.rate(), b.rate());
}

fn brute_force(cost: &[Vec<f64>]) -> f64 {
    fn go(cost: &[Vec<f64>], row: usize, used: &mut [bool], acc: f64, best: &mut f64) {
        if row == cost.len() {
            *best = best.min(acc);
            return;
        }
        for j in 0..cost.len() {
            if !used[j] {
                used[j] = true;
                go(cost, row + 1, used, acc + cost[row][j], best);
                used[j] = false;
            }
        }
    }
    let mut best = f64::INFINITY;
    go(cost, 0, &mut vec![false; cost.len()], 0.0, &mut best);
    best
}

// Successive shortest paths with SPFA on the bipartite flow network.
fn min_cost_flow(cost: &[Vec<f64>]) -> f64 {
    let n = cost.len();
    let nodes = 2 * n + 2;
    let (src, dst) = (2 * n, 2 * n + 1);
    struct Edge {
        to: usize,
        cap: i32,
        cost: f64,
    }
    let mut edges: Vec<Edge> = Vec::new();
    let mut adj = vec![Vec::new(); nodes];
    let add = |edges: &mut Vec<Edge>, adj: &mut Vec<Vec<usize>>, a: usize, b: usize, c: f64| {
        adj[a].push(edges.len());
        edges.push(Edge { to: b, cap: 1, cost: c });
        adj[b].push(edges.len());
        edges.push(Edge { to: a, cap: 0, cost: -c });
    };
    for i in 0..n {
        add(&mut edges, &mut adj, src, i, 0.0);
        add(&mut edges, &mut adj, n + i, dst, 0.0);
        for j in 0..n {
            add(&mut edges, &mut adj, i, n + j, cost[i][j]);
        }
    }
    let mut total = 0.0;
    for _ in 0..n {
        let mut dist = vec![f64::INFINITY; nodes];
        let mut prev = vec![usize::MAX; nodes];
        let mut inq = vec![false; nodes];
        dist[src] = 0.0;
        let mut q = VecDeque::from([src]);
        while let Some(u) = q.pop_front() {
            inq[u] = false;
            for &e in &adj[u] {
                let ed = &edges[e];
                if ed.cap > 0 && dist[u] + ed.cost < dist[ed.to] - 1e-15 {
                    dist[ed.to] = dist[u] + ed.cost;
                    prev[ed.to] = e;
                    if !inq[ed.to] {
                        inq[ed.to] = true;
                        q.push_back(ed.to);
                    }
                }
            }
        }
        let mut v = dst;
        while v != src {
            let e = prev[v];
            edges[e].cap -= 1;
            edges[e ^ 1].cap += 1;
            total += edges[e].cost;
            v = edges[e ^ 1].to;
        }
    }
    total
}

#[test]
fn hungarian_equals_exhaustive_search_on_small_layouts() {
    let mut checked = 0;
    for count in [4usize, 5, 6, 7, 8] {
        let cat = catalog_with_count(count, 2.0);
        for a in &cat {
            for b in &cat {
                let cost = ground_cost(a, b);
                let want = brute_force(&cost);
                let got = switching_cost(a, b).unwrap().total_distance;
                assert!((got - want).abs() <= 1e-12 * want.max(1.0), "{} -> {}: {got} vs {want}", a.label(), b.label());
                checked += 1;
            }
        }
    }
    assert!(checked > 50);
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..40 {
        let n = rng.random_range(1..=7);
        let cost: Vec<Vec<f64>> = (0..n).map(|_| (0..n).map(|_| rng.random_range(0.0..5.0)).collect()).collect();
        let (got, perm) = hungarian(&cost).unwrap();
        assert!((got - brute_force(&cost)).abs() < 1e-12);
        let mut seen = perm.clone();
        seen.sort_unstable();
        assert_eq!(seen, (0..n).collect::<Vec<_>>());
    }
}

#[test]
fn hungarian_agrees_with_min_cost_flow_at_sixteen() {
    let cat = catalog_with_count(16, 2.0);
    for a in &cat {
        for b in &cat {
            let got = switching_cost(a, b).unwrap().total_distance;
            let want = min_cost_flow(&ground_cost(a, b));
            assert!((got - want).abs() < 1e-9, "{} -> {}: {got} vs {want}", a.label(), b.label());
        }
    }
    // truncations of the 16-element pair to 8 elements against enumeration
    let uca = build_uca(16, 2.0, 0.0).unwrap();
    let cuca = build_cuca_uniform(2, 8, 2.0, 0.0).unwrap();
    let full = ground_cost(&uca, &cuca);
    let sub: Vec<Vec<f64>> = (0..8).map(|i| (0..8).map(|j| full[2 * i][j + 4]).collect()).collect();
    assert!((hungarian(&sub).unwrap().0 - brute_force(&sub)).abs() < 1e-12);
}

#[test]
fn switching_cost_is_a_metric_on_the_sixteen_element_catalog() {
    let cat = catalog_with_count(16, 2.0);
    let n = cat.len();
    let d: Vec<Vec<f64>> = cat
        .iter()
        .map(|a| cat.iter().map(|b| switching_cost(a, b).unwrap().total_distance).collect())
        .collect();
    for i in 0..n {
        assert!(d[i][i].abs() < 1e-9);
        for j in 0..n {
            assert!((d[i][j] - d[j][i]).abs() < 1e-9);
            for k in 0..n {
                assert!(d[i][k] <= d[i][j] + d[j][k] + 1e-9);
            }
        }
    }
}

#[test]
fn common_rotation_preserves_cost() {
    let a = build_uca(8, 2.0, 0.0).unwrap();
    let b = build_auxiliary(Auxiliary::Spiral, 8, 2.0).unwrap();
    let base = switching_cost(&a, &b).unwrap().total_distance;
    for angle in [0.3, 1.1, 2.9] {
        let turn = |p: &[f64; 3]| {
            let (s, c) = f64::sin_cos(angle);
            [c * p[0] - s * p[1], s * p[0] + c * p[1]]
        };
        let pa: Vec<[f64; 2]> = a.element_positions().iter().map(turn).collect();
        let pb: Vec<[f64; 2]> = b.element_positions().iter().map(turn).collect();
        let cost: Vec<Vec<f64>> =
            pa.iter().map(|p| pb.iter().map(|q| (p[0] - q[0]).hypot(p[1] - q[1])).collect()).collect();
        let (c, _) = hungarian(&cost).unwrap();
        assert!((c - base).abs() < 1e-9, "{c} vs {base}");
    }
}
