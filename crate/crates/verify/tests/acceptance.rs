//! End-to-end acceptance checks. Each test writes one `criterion N: PASS|FAIL`
//! line straight to stdout so the verdicts show up even when output capture
//! is on.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use common::{
    best_path_oracle, clustering_oracle, degeneracy_oracle, kl_oracle, median, random_graph,
    random_profiles, rng,
};
use rand::Rng;
use socialforge::baselines::{
    chung_lu, kronecker, kronecker_naive, KroneckerInitiator, WeightSequence,
};
use socialforge::config::{GraphmindParams, HumanSettings, RandomMhopParams, RunConfig, Strategy};
use socialforge::fim::{
    empirical_distribution, generate_interactions, reward_fine, reward_r1, reward_r2,
    ActionDistribution, LevelTable, RelationshipLevel, DEFAULT_EPSILON,
};
use socialforge::gsi::{
    generate_path, intermediate_pool, reward_gsi, Chain, PathSearch, PoolScope, MAX_HOPS,
};
use socialforge::io::load_manifest;
use socialforge::metrics::{
    average_hop_distance, clustering_by_degree, degeneracy, neighborhood_function, tail_ratio,
    Direction,
};
use socialforge::pipeline::{run_build, write_build, BuildOutput};
use socialforge::{NodeId, Population, ProfileEmbedding, ProfileTable, SocialGraph};

fn verdict(n: u32, pass: bool, detail: String) {
    let line = format!(
        "criterion {n}: {} {detail}\n",
        if pass { "PASS" } else { "FAIL" }
    );
    let mut out = std::io::stdout().lock();
    out.write_all(line.as_bytes()).unwrap();
    out.flush().unwrap();
    assert!(pass, "criterion {n} failed: {detail}");
}

fn bot_config(seed: u64, strategy: Strategy) -> RunConfig {
    RunConfig {
        seed,
        strategy,
        log_chains: false,
        ..Default::default()
    }
}

fn graphmind() -> Strategy {
    Strategy::Graphmind(GraphmindParams::default())
}

fn desk_run() -> (BuildOutput, f64) {
    let config = bot_config(42, graphmind());
    let b = config.strategy.build().unwrap();
    assert_eq!(
        (b.n_bots, b.n_communities, b.intra_mean_out_degree, b.tau),
        (500, 10, 4.0, 0.97)
    );
    let started = Instant::now();
    let out = run_build(&config).unwrap();
    (out, started.elapsed().as_secs_f64())
}

#[test]
fn criterion_1_completion_reaches_tau() {
    let (out, secs) = desk_run();
    let c = out.report.completion.as_ref().unwrap();
    let monotone = c.reachability_trace.windows(2).all(|w| w[0] <= w[1]);
    let pass = secs < 60.0 && c.final_reachability >= 0.97 && monotone && c.converged;
    verdict(
        1,
        pass,
        format!(
            "reachability {:.4} -> {:.4} in {} iterations, {} edges added, {secs:.2}s, monotone trace: {monotone}",
            c.initial_reachability, c.final_reachability, c.iterations_used, c.edges_added
        ),
    );
}

#[test]
fn criterion_2_small_world_shape() {
    let (out, _) = desk_run();
    let p6 = neighborhood_function(&out.graph, 6).unwrap().at(6);
    let avg = average_hop_distance(&out.graph).unwrap();
    let pass = p6 >= 0.90 && (3.0..=6.0).contains(&avg);
    verdict(
        2,
        pass,
        format!("P(6) = {p6:.4} (need >= 0.90), average hop = {avg:.3} (need 3..=6)"),
    );
}

#[test]
fn criterion_3_hub_reuse_beats_random_chains() {
    let mut ours = Vec::new();
    let mut random = Vec::new();
    for seed in 1..=10 {
        let a = run_build(&bot_config(seed, graphmind())).unwrap();
        let b = run_build(&bot_config(
            seed,
            Strategy::RandomMhop(RandomMhopParams {
                m: 4,
                ..Default::default()
            }),
        ))
        .unwrap();
        // same profiles on both sides
        let (pa, pb) = (a.graph.profiles().unwrap(), b.graph.profiles().unwrap());
        assert_eq!(pa.embeddings(), pb.embeddings());
        ours.push(tail_ratio(&a.graph, Direction::In).unwrap());
        random.push(tail_ratio(&b.graph, Direction::In).unwrap());
    }
    let (mo, mr) = (median(ours.clone()), median(random.clone()));
    verdict(
        3,
        mo >= mr,
        format!(
            "median in-degree tail ratio {mo:.3} vs random m-hop {mr:.3} ({ours:?} vs {random:?})"
        ),
    );
}

struct Fixture {
    graph: SocialGraph,
    profiles: ProfileTable,
    edges: Vec<(usize, usize)>,
    raw: Vec<Vec<f64>>,
}

fn fixture() -> Fixture {
    let edges = vec![
        (0, 1),
        (0, 2),
        (1, 2),
        (2, 3),
        (3, 0),
        (4, 2),
        (5, 2),
        (5, 6),
        (6, 7),
        (7, 5),
        (1, 7),
        (3, 7),
        (6, 2),
    ];
    let raw = vec![
        vec![1.0, 0.0, 0.0],
        vec![0.6, 0.8, 0.0],
        vec![0.0, 1.0, 0.0],
        vec![0.5, 0.5, 0.5],
        vec![-1.0, 0.2, 0.1],
        vec![0.3, -0.4, 0.9],
        vec![2.0, 1.0, -2.0],
        vec![-0.2, -0.3, -0.4],
    ];
    let g = SocialGraph::from_follows(8, edges.iter().map(|&(u, v)| (u as u32, v as u32))).unwrap();
    let p = ProfileTable::new(
        raw.iter()
            .map(|v| ProfileEmbedding::new(v.clone()).unwrap())
            .collect(),
        vec![None; 8],
        vec![Population::Bot; 8],
    )
    .unwrap();
    Fixture {
        graph: g,
        profiles: p,
        edges,
        raw,
    }
}

fn hand_cos(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    dot / (na * nb)
}

#[test]
fn criterion_4_reward_calculus() {
    let mut failures = Vec::new();

    for gap in 0..=3u8 {
        let r = reward_r1(
            RelationshipLevel::new(1).unwrap(),
            RelationshipLevel::new(1 + gap).unwrap(),
        );
        if (r - (-(gap as f64)).exp()).abs() > 1e-12 {
            failures.push(format!("R1 at gap {gap}: {r}"));
        }
    }

    let mut r = rng(404);
    let mut worst = 0.0f64;
    for i in 0..1000 {
        let mut draw = |zeros: bool| {
            let w: [f64; 4] = std::array::from_fn(|_| {
                if zeros && r.random::<f64>() < 0.2 {
                    0.0
                } else {
                    r.random::<f64>() + 1e-3
                }
            });
            let s: f64 = w.iter().sum();
            ActionDistribution::new(w.map(|x| x / s)).unwrap()
        };
        let (p, q) = (draw(true), draw(false));
        let r2 = reward_r2(&p, &q).unwrap();
        let err = (r2 + kl_oracle(p.probabilities(), q.probabilities())).abs();
        worst = worst.max(err);
        if err > 1e-9 || r2 > 0.0 {
            failures.push(format!("R2 pair {i}: {r2}"));
        }
        if reward_r2(&p, &p).unwrap() != 0.0 {
            failures.push(format!("R2 self pair {i} not zero"));
        }
    }

    let Fixture {
        graph: g,
        profiles: p,
        edges,
        raw,
    } = fixture();
    let mut in_deg = [0usize; 8];
    for &(_, v) in &edges {
        in_deg[v] += 1;
    }
    for i in 0..20usize {
        let len = 3 + i % 5;
        let nodes: Vec<usize> = (0..len).map(|j| (i + 3 * j) % 8).collect();
        let chain = Chain::new(nodes.iter().map(|&v| NodeId::from(v)).collect()).unwrap();
        let got = reward_gsi(&chain, &g, &p).unwrap();
        let r_len = (len - 1) as f64 / 6.0;
        let r_homo = nodes
            .iter()
            .map(|&v| hand_cos(&raw[nodes[0]], &raw[v]))
            .sum::<f64>()
            / len as f64;
        let interior = &nodes[1..len - 1];
        let max_in = interior.iter().map(|&v| in_deg[v]).max().unwrap();
        let r_inf = if max_in == 0 {
            0.0
        } else {
            interior
                .iter()
                .map(|&v| in_deg[v] as f64 / max_in as f64)
                .sum::<f64>()
                / interior.len() as f64
        };
        for (name, a, b) in [
            ("len", got.r_len, r_len),
            ("homo", got.r_homo, r_homo),
            ("inf", got.r_inf, r_inf),
        ] {
            if (a - b).abs() > 1e-12 {
                failures.push(format!("chain {i} R_{name}: {a} vs {b}"));
            }
        }
    }

    verdict(
        4,
        failures.is_empty(),
        format!("R1 4 gaps, R2 1000 pairs (worst KL error {worst:.2e}), 20 fixture chains; failures: {failures:?}"),
    );
}

#[test]
fn criterion_5_path_search_is_optimal() {
    let mut r = rng(505);
    let mut mismatches = Vec::new();
    let mut found = 0;
    for case in 0..50 {
        let n = r.random_range(3..=8);
        let g = random_graph(n, r.random_range(0.0..0.6), &mut r);
        let p = random_profiles(n, 4, &mut r);
        let s = r.random_range(0..n);
        let t = (s + r.random_range(1..n)) % n;
        let (s, t) = (NodeId::from(s), NodeId::from(t));
        let min_hops = r.random_range(1..=3);
        let max_hops = r.random_range(min_hops..=MAX_HOPS);
        let search = PathSearch {
            min_hops,
            max_hops,
            pool: PoolScope::Global,
            ..PathSearch::exhaustive()
        };
        let pool = intermediate_pool(&g, &p, s, t, &search);
        let got = generate_path(&g, &p, s, t, &search).unwrap();
        let want = best_path_oracle(&g, &p, s, t, &pool, min_hops, max_hops);
        match (&got, &want) {
            (None, None) => {}
            (Some(a), Some((score, nodes)))
                if a.score == *score && a.chain.nodes() == nodes.as_slice() =>
            {
                found += 1
            }
            _ => mismatches.push(case),
        }
    }
    verdict(
        5,
        mismatches.is_empty(),
        format!("50 graphs, {found} with an admissible path, mismatched cases: {mismatches:?}"),
    );
}

#[test]
fn criterion_6_metric_oracles() {
    let mut r = rng(606);
    let mut failures = Vec::new();
    for case in 0..100 {
        let n = r.random_range(3..=30);
        let g = random_graph(n, r.random_range(0.02..0.5), &mut r);
        let got: BTreeMap<usize, (f64, usize)> = clustering_by_degree(&g)
            .buckets
            .into_iter()
            .map(|(k, b)| (k, (b.mean, b.count)))
            .collect();
        if got != clustering_oracle(&g) {
            failures.push(format!("clustering case {case}"));
        }
    }
    for case in 0..100 {
        let n = r.random_range(1..=10);
        let g = random_graph(n, r.random_range(0.0..0.8), &mut r);
        if degeneracy(&g) != degeneracy_oracle(&g) {
            failures.push(format!("degeneracy case {case}"));
        }
    }
    for case in 0..100 {
        let n = r.random_range(2..=50);
        let g = random_graph(n, r.random_range(0.0..0.15), &mut r);
        let nf = neighborhood_function(&g, n - 1).unwrap().at(n - 1);
        if nf != g.reachability_fraction().unwrap().fraction {
            failures.push(format!("neighborhood case {case}"));
        }
    }
    verdict(
        6,
        failures.is_empty(),
        format!("300 graphs; failures: {failures:?}"),
    );
}

#[test]
fn criterion_7_generator_expectations() {
    let w = WeightSequence::new(vec![5.0; 1000]).unwrap();
    let mut degree = 0.0;
    for seed in 0..20 {
        let g = chung_lu(&w, seed).unwrap();
        degree += 2.0 * g.follow_count() as f64 / 1000.0 / 20.0;
    }
    let cl_ok = (degree - 10.0).abs() <= 1.0;

    let init = KroneckerInitiator::new([[0.9, 0.5], [0.5, 0.2]]).unwrap();
    let expected = 2.1f64.powi(10) - 1.1f64.powi(10);
    let mut edges = 0.0;
    for seed in 0..20 {
        edges += kronecker(&init, 10, seed).unwrap().follow_count() as f64 / 20.0;
    }
    let kr_ok = (edges - expected).abs() <= 0.05 * expected;

    let mut r = rng(707);
    let mut identical = true;
    for k in 1..=6 {
        for _ in 0..20 {
            let m: [f64; 4] = std::array::from_fn(|_| r.random::<f64>());
            let init = KroneckerInitiator::new([[m[0], m[1]], [m[2], m[3]]]).unwrap();
            let seed = r.random::<u64>();
            identical &= kronecker(&init, k, seed).unwrap().follow_edges()
                == kronecker_naive(&init, k, seed).unwrap().follow_edges();
        }
    }
    verdict(
        7,
        cl_ok && kr_ok && identical,
        format!(
            "Chung-Lu mean total degree {degree:.3} (target 10), Kronecker mean edges {edges:.1} vs {expected:.1}, recursive == naive for k <= 6: {identical}"
        ),
    );
}

#[test]
fn criterion_8_interaction_frequencies_converge() {
    let table = LevelTable::default();
    let mut worst_gap = 0.0f64;
    let mut worst_reward = f64::INFINITY;
    for level in RelationshipLevel::ALL {
        let records = generate_interactions(NodeId(0), NodeId(1), level, 10_000, &table, 808);
        let emp = empirical_distribution(&records, DEFAULT_EPSILON).unwrap();
        let row = table.row(level);
        for (a, b) in emp.probabilities().iter().zip(row.probabilities()) {
            worst_gap = worst_gap.max((a - b).abs());
        }
        worst_reward = worst_reward.min(reward_fine(level, level, &emp, row).unwrap().total);
    }
    verdict(
        8,
        worst_gap <= 0.02 && worst_reward >= 0.99,
        format!("largest frequency gap {worst_gap:.4}, smallest fine reward {worst_reward:.5}"),
    );
}

fn dir_bytes(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                std::fs::read(e.path()).unwrap(),
            )
        })
        .collect()
}

#[test]
fn criterion_9_builds_are_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let mut config = RunConfig::default();
    let build_into = |name: &str, config: &RunConfig| {
        let dir = tmp.path().join(name);
        write_build(&run_build(config).unwrap(), &dir, false).unwrap();
        dir
    };
    let a = build_into("a", &config);
    let b = build_into("b", &config);
    config.seed += 1;
    let c = build_into("c", &config);

    let (fa, fb, fc) = (dir_bytes(&a), dir_bytes(&b), dir_bytes(&c));
    let identical = fa == fb;
    let (ma, mc) = (load_manifest(&a).unwrap(), load_manifest(&c).unwrap());
    let seed_changed = ma.seed != mc.seed && ma.config_hash != mc.config_hash;
    let graph_changed = fa["edges.jsonl"] != fc["edges.jsonl"];
    verdict(
        9,
        identical && seed_changed && graph_changed,
        format!(
            "{} files byte-identical: {identical}; new seed changes manifest seed/hash: {seed_changed}, edges: {graph_changed}",
            fa.len()
        ),
    );
}

#[test]
fn criterion_10_reference_composition() {
    let mut params = GraphmindParams::default();
    params.build.n_bots = 1000;
    params.build.n_communities = 50;
    let config = RunConfig {
        strategy: Strategy::Graphmind(params),
        humans: Some(HumanSettings {
            n_humans: 1000,
            ..Default::default()
        }),
        log_chains: false,
        ..Default::default()
    };
    let out = run_build(&config).unwrap();
    let tmp = tempfile::tempdir().unwrap();
    write_build(&out, tmp.path(), false).unwrap();
    let m = load_manifest(tmp.path()).unwrap();
    let bots = m.bots.unwrap();
    let humans = m.humans.unwrap();
    let pass = bots.nodes == 1000
        && humans.nodes == 1000
        && bots.communities == 50
        && m.node_count == 2000;
    verdict(
        10,
        pass,
        format!(
            "bots {} / humans {} / bot communities {}; {} follow edges, {} interactions, {} edges total",
            bots.nodes, humans.nodes, bots.communities, m.follow_count, m.interaction_count, m.edge_count
        ),
    );
}
