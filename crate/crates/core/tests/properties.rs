use num_bigint::BigUint;
use num_rational::BigRational;
use proptest::prelude::*;

use sbm_mpc::algos::{arx_row, compute_norm, expansion_coefficients, WalkTable};
use sbm_mpc::eval::accuracy;
use sbm_mpc::exact::{dense_adjacency_power, norm_oracle};
use sbm_mpc::mpc::{ceil_log, ClusterState, Message, MpcConfig};
use sbm_mpc::ops::{even_cluster, representative_k};
use sbm_mpc::sbm::{generate_sbm, read_edge_list, regime_check, write_edge_list, RegimeConstants, SbmParams};
use sbm_mpc::seq::gap_threshold;
use sbm_mpc::{Clustering, Graph, Provenance};

fn graph_strategy(max_n: usize) -> impl Strategy<Value = Graph> {
    (2..=max_n).prop_flat_map(|n| {
        proptest::collection::vec(any::<bool>(), n * (n - 1) / 2).prop_map(move |bits| {
            let mut edges = Vec::new();
            let mut it = bits.into_iter();
            for u in 0..n as u32 {
                for v in u + 1..n as u32 {
                    if it.next().unwrap() {
                        edges.push((u, v));
                    }
                }
            }
            Graph::from_edges(n, &edges).unwrap()
        })
    })
}

fn q_values() -> impl Strategy<Value = BigRational> {
    prop_oneof![Just((0, 1)), Just((1, 10)), Just((1, 4)), Just((2, 7))]
        .prop_map(|(a, b)| BigRational::new(a.into(), b.into()))
}

fn clustering(labels: &[usize]) -> Clustering {
    Clustering::from_labels(
        labels,
        Provenance {
            algorithm: "prop".into(),
            params: String::new(),
            seed: 0,
        },
    )
}

fn permutations(k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(k - 1) {
        for i in 0..k {
            let mut q = p.clone();
            q.insert(i, k - 1);
            out.push(q);
        }
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sbm_instances_are_well_formed(n in 1usize..12, k in 2usize..5, pq in (0.05f64..0.95, 0.0f64..1.0), seed: u64) {
        let (p, frac) = pq;
        let q = (p * frac).max(1e-3).min(p * 0.99);
        let params = SbmParams::new(n, k, p, q, seed);
        let inst = generate_sbm(params).unwrap();
        let big_n = n * k;
        let mut sizes = vec![0; k];
        for &t in &inst.truth {
            sizes[t] += 1;
        }
        prop_assert!(sizes.iter().all(|&c| c == n));
        let mut seen = std::collections::BTreeSet::new();
        for &(u, v) in &inst.edges {
            prop_assert!(u != v && (u as usize) < big_n && (v as usize) < big_n);
            prop_assert!(seen.insert((u.min(v), u.max(v))));
        }
        prop_assert_eq!(&generate_sbm(params).unwrap(), &inst);

        let mut text = Vec::new();
        write_edge_list(&inst, &mut text).unwrap();
        let back = read_edge_list(&text[..]).unwrap();
        prop_assert_eq!((back.vertex_count, back.k, back.seed), (big_n, k, seed));
        prop_assert_eq!(back.edges, inst.edges);
    }

    #[test]
    fn regime_flags_are_pure(n in 1usize..5000, k in 2usize..10, p in 0.1f64..0.9, r in 1usize..6) {
        let params = SbmParams::new(n, k, p, p / 3.0, 1);
        let other_seed = SbmParams { seed: 99, ..params };
        let c = RegimeConstants::default();
        prop_assert_eq!(regime_check(&params, r, &c), regime_check(&other_seed, r, &c));
    }

    #[test]
    fn accuracy_matches_bijection_search(k in 2usize..=6, g in 1usize..=6, raw in proptest::collection::vec((0usize..6, 0usize..6), 1..30)) {
        let truth: Vec<usize> = raw.iter().map(|&(t, _)| t % k).collect();
        let c = clustering(&raw.iter().map(|&(_, l)| l % g).collect::<Vec<_>>());
        let tk = truth.iter().max().unwrap() + 1;
        let width = c.group_count().max(tk);
        let best = permutations(width)
            .iter()
            .map(|pi| c.labels().iter().zip(&truth).filter(|&(&l, &t)| pi[l] == t).count())
            .max()
            .unwrap();
        let acc = accuracy(&c, &truth).unwrap();
        prop_assert_eq!(acc.misclassified, truth.len() - best);
        prop_assert_eq!(acc.exact, best == truth.len() && c.group_count() == tk);
        prop_assert!(!acc.lower_bound);
        if acc.exact {
            prop_assert_eq!(acc.misclassified, 0);
        }
    }

    #[test]
    fn norm_oracle_is_permutation_invariant(g in graph_strategy(7), q in q_values(), r in 1usize..=3, seed: u64) {
        let n = g.vertex_count();
        let mut perm: Vec<u32> = (0..n as u32).collect();
        let mut state = seed;
        for i in (1..n).rev() {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            perm.swap(i, (state >> 33) as usize % (i + 1));
        }
        let edges: Vec<(u32, u32)> = g.edges().map(|(u, v)| (perm[u as usize], perm[v as usize])).collect();
        let h = Graph::from_edges(n, &edges).unwrap();
        for x in 0..n as u32 {
            for y in 0..n as u32 {
                prop_assert_eq!(
                    norm_oracle(&g, &q, x, y, r),
                    norm_oracle(&h, &q, perm[x as usize], perm[y as usize], r)
                );
            }
        }
    }

    #[test]
    fn expansion_matches_oracle(g in graph_strategy(8), q in q_values(), r in 1usize..=3) {
        let n = g.vertex_count();
        let t = WalkTable::compute(&g, r);
        let e = expansion_coefficients(r, &q, n, t.totals()).unwrap();
        let rows: Vec<_> = (0..n as u32).map(|x| arx_row(&g, x, 2 * r)).collect();
        for x in 0..n as u32 {
            for y in 0..n as u32 {
                let got = compute_norm(&e, &t, &rows[x as usize], &rows[y as usize], x, y);
                prop_assert_eq!(got.to_rational(), norm_oracle(&g, &q, x, y, r));
            }
        }
    }

    #[test]
    fn walk_table_matches_dense_powers(g in graph_strategy(9), r in 1usize..=3) {
        let n = g.vertex_count();
        let t = WalkTable::compute(&g, r);
        for x in 0..n as u32 {
            prop_assert_eq!(t.a(0, x), &BigUint::from(1u8));
            prop_assert_eq!(t.a(1, x), &BigUint::from(g.degree(x)));
        }
        for i in 0..=2 * r {
            let dense = dense_adjacency_power(&g, i);
            for x in 0..n {
                let row_sum: BigUint = dense[x * n..(x + 1) * n].iter().sum();
                prop_assert_eq!(t.a(i, x as u32), &row_sum);
                if i == 2 * r {
                    prop_assert_eq!(&arx_row(&g, x as u32, i)[..], &dense[x * n..(x + 1) * n]);
                }
            }
            let total: BigUint = t.level(i).iter().sum();
            prop_assert_eq!(t.c(i), &total);
        }
    }

    #[test]
    fn round_charge_law(s in 2usize..5000, x in 0usize..10_000_000) {
        let t = ceil_log(s, x);
        prop_assert!(t >= 1);
        prop_assert!((s as u128).pow(t as u32) >= x as u128);
        if t > 1 {
            prop_assert!(((s as u128).pow(t as u32 - 1)) < x as u128);
        }
        if s < 70_000 {
            prop_assert_eq!(ceil_log(s * s, x), t.div_ceil(2));
        }
    }

    #[test]
    fn exchange_rounds_respect_caps(
        s in 8usize..32,
        sends in proptest::collection::vec((0usize..6, 0usize..6, 1usize..20), 0..24),
    ) {
        let mut c = ClusterState::new(6, s, MpcConfig::default(), 16).unwrap();
        let before = c.ledger().clone();
        let outboxes: Vec<(usize, Vec<Message>)> = sends
            .iter()
            .map(|&(from, to, len)| (from, vec![Message { to, payload: vec![from as u64; len] }]))
            .collect();
        match c.exchange_round("prop", outboxes) {
            Ok(delivery) => {
                prop_assert_eq!(c.round(), 1);
                prop_assert_eq!(c.ledger().rounds(), 1);
                prop_assert!(c.ledger().violations().is_empty());
                for envelopes in delivery.values() {
                    prop_assert!(envelopes.windows(2).all(|w| (w[0].from, w[0].seq) < (w[1].from, w[1].seq)));
                }
            }
            Err(_) => {
                prop_assert_eq!(c.round(), 0);
                prop_assert_eq!(c.ledger(), &before);
            }
        }
    }

    #[test]
    fn even_cluster_balances_exactly(labels in proptest::collection::vec(0usize..4, 4..60), cap in proptest::option::of(1usize..10)) {
        let k = 4;
        let mut c = ClusterState::new(32, 16, MpcConfig::default(), 64).unwrap();
        match even_cluster(&mut c, &labels, k, cap) {
            Ok(b) => {
                let mut counts = vec![0; k];
                for (&l, &a) in labels.iter().zip(&b.active) {
                    counts[l] += usize::from(a);
                }
                prop_assert!(counts.iter().all(|&n| n == b.xi));
                let min = (0..k).map(|l| labels.iter().filter(|&&x| x == l).count()).min().unwrap();
                prop_assert_eq!(b.xi, cap.map_or(min, |c| c.min(min)));
            }
            Err(e) => {
                prop_assert_eq!(e.failure_stage(), Some("even_cluster"));
                prop_assert!((0..k).any(|l| !labels.contains(&l)));
            }
        }
    }

    #[test]
    fn representatives_are_distinct(sets in proptest::collection::vec(proptest::collection::vec(0usize..8, 1..4), 1..30), k in 1usize..6) {
        let mut c = ClusterState::new(32, 16, MpcConfig::default(), 64).unwrap();
        let distinct: std::collections::BTreeSet<usize> = sets.iter().map(|s| *s.iter().min().unwrap()).collect();
        match representative_k(&mut c, &sets, k) {
            Ok(reps) => {
                prop_assert_eq!(reps.members.len(), k);
                prop_assert!(reps.labels.windows(2).all(|w| w[0] < w[1]));
                let expected: Vec<usize> = distinct.iter().copied().take(k).collect();
                prop_assert_eq!(&reps.labels, &expected);
                for (&m, &l) in reps.members.iter().zip(&reps.labels) {
                    prop_assert_eq!(reps.kept[m], l);
                    prop_assert!(reps.kept[..m].iter().all(|&x| x != l), "first member of its label");
                }
            }
            Err(_) => prop_assert!(distinct.len() < k),
        }
    }

    #[test]
    fn gap_threshold_separates(values in proptest::collection::vec(0.0f64..1e6, 2..40)) {
        if let Some(delta) = gap_threshold(&values) {
            let below = values.iter().filter(|&&v| v < delta).count();
            let above = values.iter().filter(|&&v| v > delta).count();
            prop_assert_eq!(below + above, values.len(), "no value sits on the threshold");
            prop_assert!(below > 0 && above > 0);
        } else {
            prop_assert!(values.iter().all(|&v| v == values[0]));
        }
    }
}
