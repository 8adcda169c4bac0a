mod common;

use fairdiv::matching::{
    find_left_saturating_s_matching, random_bipartite, verify_s_matching, BipartiteGraph, QuotaVector,
    SMatchingOutcome,
};
use fairdiv::sampling::SeedStream;
use proptest::prelude::*;

fn graph_strategy() -> impl Strategy<Value = (BipartiteGraph, Vec<usize>)> {
    (1usize..=5)
        .prop_flat_map(|n| (Just(n), n..=8))
        .prop_flat_map(|(n, m)| {
            (
                proptest::collection::vec(proptest::collection::vec(any::<bool>(), m), n),
                proptest::collection::vec(1usize..=3, n),
            )
                .prop_map(move |(bits, mut quotas)| {
                    // Shrink the largest quota until the total fits on the right.
                    while quotas.iter().sum::<usize>() > m {
                        let k = (0..n).max_by_key(|&i| (quotas[i], std::cmp::Reverse(i))).unwrap();
                        quotas[k] -= 1;
                    }
                    let adjacency = bits
                        .iter()
                        .map(|row| (0..m).filter(|&g| row[g]).collect())
                        .collect();
                    (BipartiteGraph::new(m, adjacency).unwrap(), quotas)
                })
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn verdict_matches_exhaustive_search((graph, quotas) in graph_strategy()) {
        let q = QuotaVector::new(quotas.clone()).unwrap();
        let expected = common::brute_force_saturating(&graph, &quotas);
        prop_assert_eq!(expected, common::hall_condition(&graph, &quotas));
        let copies = common::copy_expand(&graph, &quotas);
        let plain = common::kuhn_matching_size(&copies, graph.right_size()) == copies.len();
        prop_assert_eq!(expected, plain);
        match find_left_saturating_s_matching(&graph, &q).unwrap() {
            SMatchingOutcome::Saturating(matching) => {
                prop_assert!(expected);
                prop_assert_eq!(verify_s_matching(&graph, &q, &matching), Ok(()));
            }
            SMatchingOutcome::Deficient(witness) => {
                prop_assert!(!expected);
                prop_assert!(witness.certifies(&graph, &q));
                prop_assert!(witness.neighborhood.len() < witness.demand);
                prop_assert_eq!(&witness.neighborhood, &graph.neighborhood(&witness.agents));
            }
        }
    }
}

#[test]
fn random_graph_edge_count() {
    // 50 x 100 with p = 0.3: 1500 expected edges, sd = sqrt(5000 * 0.3 * 0.7).
    let sd = (5000.0f64 * 0.3 * 0.7).sqrt();
    for k in 0..100 {
        let graph = random_bipartite(50, 100, 0.3, &mut SeedStream::new(300, k).rng()).unwrap();
        let edges = graph.edge_count() as f64;
        assert!((edges - 1500.0).abs() <= 4.0 * sd, "edges = {edges}");
    }
    let empty = random_bipartite(5, 5, 0.0, &mut SeedStream::new(301, 0).rng()).unwrap();
    assert_eq!(empty.edge_count(), 0);
    let full = random_bipartite(5, 5, 1.0, &mut SeedStream::new(301, 1).rng()).unwrap();
    assert_eq!(full.edge_count(), 25);
}

#[test]
fn large_sparse_instances_agree_with_hall() {
    // Bigger than brute force can handle, small enough for subset enumeration on the left.
    for k in 0..200 {
        let mut rng = SeedStream::new(302, k).rng();
        let n = common::int_in(&mut rng, 2, 10);
        let m = common::int_in(&mut rng, 5, 40);
        let p = common::uniform_in(&mut rng, 0.05, 0.4);
        let graph = random_bipartite(n, m, p, &mut rng).unwrap();
        let quotas: Vec<usize> = (0..n).map(|_| common::int_in(&mut rng, 1, 4)).collect();
        if quotas.iter().sum::<usize>() > m {
            continue;
        }
        let q = QuotaVector::new(quotas.clone()).unwrap();
        let outcome = find_left_saturating_s_matching(&graph, &q).unwrap();
        assert_eq!(outcome.is_saturating(), common::hall_condition(&graph, &quotas), "trial {k}");
        match outcome {
            SMatchingOutcome::Saturating(mm) => assert_eq!(verify_s_matching(&graph, &q, &mm), Ok(())),
            SMatchingOutcome::Deficient(d) => assert!(d.certifies(&graph, &q)),
        }
    }
}
