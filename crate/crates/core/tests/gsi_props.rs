mod common;

use common::{best_path_oracle, random_graph, random_profiles, rng};
use proptest::prelude::*;
use rand::seq::index::sample;
use rand::Rng;
use socialforge::gsi::{
    extend_chain_greedy, generate_path, intermediate_pool, reward_gsi, select_best_of_n,
    serialize_chain, unvisited_out_neighbors, Chain, ChainGroup, GsiReward, PathSearch, PoolScope,
    MAX_HOPS,
};
use socialforge::profiles::synth_profiles;
use socialforge::NodeId;

fn global_exhaustive(min_hops: usize, max_hops: usize) -> PathSearch {
    PathSearch {
        min_hops,
        max_hops,
        pool: PoolScope::Global,
        ..PathSearch::exhaustive()
    }
}

#[test]
fn exhaustive_search_matches_brute_force() {
    let mut r = rng(11);
    for case in 0..60 {
        let n = r.random_range(3..=8);
        let g = random_graph(n, r.random_range(0.0..0.6), &mut r);
        let p = random_profiles(n, 4, &mut r);
        let s = NodeId::from(r.random_range(0..n));
        let mut t = NodeId::from(r.random_range(0..n - 1));
        if t >= s {
            t = NodeId(t.0 + 1);
        }
        let min_hops = r.random_range(1..=3);
        let max_hops = r.random_range(min_hops..=MAX_HOPS);
        let search = global_exhaustive(min_hops, max_hops);
        let pool = intermediate_pool(&g, &p, s, t, &search);
        let got = generate_path(&g, &p, s, t, &search).unwrap();
        let want = best_path_oracle(&g, &p, s, t, &pool, min_hops, max_hops);
        match (got, want) {
            (None, None) => {}
            (Some(got), Some((score, nodes))) => {
                assert_eq!(got.score, score, "case {case}");
                assert_eq!(got.chain.nodes(), nodes.as_slice(), "case {case}");
            }
            (got, want) => panic!("case {case}: {got:?} vs {want:?}"),
        }
    }
}

#[test]
fn beam_output_respects_bounds() {
    let p = synth_profiles(60, 4, 8, 0.3, 5).unwrap();
    let mut r = rng(2);
    let g = random_graph(60, 0.05, &mut r);
    for _ in 0..30 {
        let s = NodeId::from(r.random_range(0..60usize));
        let t = NodeId::from((s.index() + r.random_range(1..60usize)) % 60);
        let search = PathSearch::default();
        let path = generate_path(&g, &p, s, t, &search).unwrap().unwrap();
        let c = &path.chain;
        assert_eq!(c.source(), s);
        assert_eq!(c.target(), t);
        assert!((search.min_hops..=search.max_hops).contains(&c.hops()));
        let mut sorted = c.nodes().to_vec();
        sorted.sort();
        sorted.dedup();
        assert_eq!(sorted.len(), c.len());
    }
}

#[test]
fn generated_paths_beat_random_chains_of_equal_length() {
    let p = synth_profiles(80, 4, 16, 0.3, 8).unwrap();
    let mut r = rng(4);
    let g = random_graph(80, 0.05, &mut r);
    for trial in 0..5usize {
        let s = NodeId::from(trial * 7);
        let t = NodeId::from(trial * 7 + 3);
        let path = generate_path(&g, &p, s, t, &PathSearch::default())
            .unwrap()
            .unwrap();
        let ours = reward_gsi(&path.chain, &g, &p).unwrap().total;
        let k = path.chain.len() - 2;
        let mut total = 0.0;
        for _ in 0..100 {
            let others: Vec<usize> = (0..80)
                .filter(|&v| v != s.index() && v != t.index())
                .collect();
            let mut nodes = vec![s];
            nodes.extend(
                sample(&mut r, others.len(), k)
                    .into_iter()
                    .map(|i| NodeId::from(others[i])),
            );
            nodes.push(t);
            total += reward_gsi(&Chain::new(nodes).unwrap(), &g, &p)
                .unwrap()
                .total;
        }
        assert!(
            ours >= total / 100.0,
            "trial {trial}: {ours} vs mean {}",
            total / 100.0
        );
    }
}

fn arb_reward() -> impl Strategy<Value = GsiReward> {
    (-3.0f64..3.0).prop_map(|t| GsiReward {
        r_len: 0.0,
        r_homo: 0.0,
        r_inf: 0.0,
        total: t,
    })
}

proptest! {
    #[test]
    fn rewards_stay_in_range(seed in 0u64..500, len in 3usize..=7) {
        let mut r = rng(seed);
        let n = 10;
        let g = random_graph(n, 0.3, &mut r);
        let p = random_profiles(n, 5, &mut r);
        let nodes: Vec<NodeId> = sample(&mut r, n, len).into_iter().map(NodeId::from).collect();
        let rw = reward_gsi(&Chain::new(nodes).unwrap(), &g, &p).unwrap();
        prop_assert!((1.0 / 6.0..=1.0).contains(&rw.r_len));
        prop_assert!((-1.0..=1.0).contains(&rw.r_homo));
        prop_assert!((0.0..=1.0).contains(&rw.r_inf));
        prop_assert!(rw.total >= -5.0 / 6.0 && rw.total <= 3.0);
        prop_assert_eq!(rw.total, rw.r_len + rw.r_homo + rw.r_inf);
    }

    #[test]
    fn best_of_n_is_argmax_of_totals(rewards in proptest::collection::vec(arb_reward(), 2..12)) {
        let chains = (0..rewards.len()).map(|_| Chain::new(vec![NodeId(0), NodeId(1)]).unwrap()).collect();
        let group = ChainGroup::new(chains, rewards.clone()).unwrap();
        let mut want = 0;
        for (i, rw) in rewards.iter().enumerate() {
            if rw.total > rewards[want].total {
                want = i;
            }
        }
        let got = select_best_of_n(&group);
        prop_assert_eq!(rewards[got].total, rewards[want].total);
        prop_assert_eq!(got, want);
    }

    #[test]
    fn greedy_extension_is_deterministic(seed in 0u64..300) {
        let mut r = rng(seed);
        let g = random_graph(12, 0.25, &mut r);
        let p = random_profiles(12, 4, &mut r);
        let a = extend_chain_greedy(&g, &p, NodeId(0), unvisited_out_neighbors(&g), 6).unwrap();
        let b = extend_chain_greedy(&g, &p, NodeId(0), unvisited_out_neighbors(&g), 6).unwrap();
        prop_assert_eq!(&a, &b);
        if let Some(c) = a {
            for (u, v) in c.edges() {
                prop_assert!(g.has_follow(u, v));
            }
        }
    }

    #[test]
    fn serialization_shape(seed in 0u64..300, len in 2usize..=7) {
        let mut r = rng(seed);
        let g = random_graph(10, 0.3, &mut r);
        let p = random_profiles(10, 4, &mut r);
        let nodes: Vec<NodeId> = sample(&mut r, 10, len).into_iter().map(NodeId::from).collect();
        let c = Chain::new(nodes).unwrap();
        let text = serialize_chain(&c, &g, &p).unwrap();
        prop_assert_eq!(text.matches("<user>").count(), len);
        prop_assert_eq!(text.matches(" follows due to similarity ").count(), len - 1);
        prop_assert_eq!(text, serialize_chain(&c, &g, &p).unwrap());
    }
}
