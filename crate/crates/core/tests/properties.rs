use dpnibble::cover::{random_cover, read_cover, write_cover};
use dpnibble::graph::{gen_random_regular, read_edge_list, write_edge_list};
use dpnibble::nibble::{
    delta_prime_implication_failures, run_round_with, Preconditions, RoundParams,
};
use dpnibble::schedule::{build_schedule, DEFAULT_MAX_ITER};
use dpnibble::{ColorId, Graph, VertexId};
use proptest::prelude::*;

fn graph_strategy() -> impl Strategy<Value = Graph> {
    (2usize..14).prop_flat_map(|n| {
        proptest::collection::vec((0..n, 0..n), 0..3 * n).prop_map(move |pairs| {
            let edges = pairs.into_iter().filter(|(u, v)| u != v);
            Graph::from_edges(n, edges).unwrap()
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn random_covers_validate(g in graph_strategy(), k in 1usize..5, p in 0.0f64..=1.0, seed in any::<u64>()) {
        let c = random_cover(&g, k, p, seed).unwrap();
        prop_assert!(c.validate().is_ok());
        prop_assert!(c.max_cover_degree() <= g.max_degree());
    }

    #[test]
    fn restriction_keeps_validity(g in graph_strategy(), k in 1usize..5, seed in any::<u64>(), mask in any::<u64>()) {
        let c = random_cover(&g, k, 0.8, seed).unwrap();
        let keep_v: Vec<VertexId> = (0..g.vertex_count() as VertexId).filter(|v| mask >> v & 1 == 1).collect();
        let keep_c: Vec<Vec<ColorId>> = keep_v
            .iter()
            .map(|&v| c.list(v as usize).iter().copied().filter(|x| (mask >> (x % 61)) & 2 == 2).collect())
            .collect();
        let r = c.restrict(&keep_v, &keep_c).unwrap();
        prop_assert!(r.cover.validate().is_ok());
        for (i, &v) in r.vertex_map.iter().enumerate() {
            prop_assert_eq!(r.cover.vertex_origin(i), v);
        }
        for (new, &old) in r.color_map.iter().enumerate() {
            prop_assert_eq!(r.cover.color_origin(new as ColorId), old);
            let nbrs: Vec<ColorId> = r.cover.cover_neighbors(new as ColorId).iter().map(|&x| r.color_map[x as usize]).collect();
            for x in nbrs {
                prop_assert!(c.cover_neighbors(old).contains(&x));
            }
        }
    }

    #[test]
    fn cover_text_round_trip(g in graph_strategy(), k in 1usize..4, seed in any::<u64>()) {
        let c = random_cover(&g, k, 0.7, seed).unwrap();
        let back = read_cover(&write_cover(&c)).unwrap();
        prop_assert_eq!(back.lists(), c.lists());
        prop_assert_eq!(back.cover_edges().collect::<Vec<_>>(), c.cover_edges().collect::<Vec<_>>());
        prop_assert!(back.validate().is_ok());
    }

    #[test]
    fn edge_list_round_trip(g in graph_strategy()) {
        let back = read_edge_list(&write_edge_list(&g)).unwrap();
        prop_assert_eq!(back, g);
    }

    #[test]
    fn rounds_are_safe(seed in any::<u64>(), eta in 0.05f64..1.5, k in 6usize..16) {
        let g = gen_random_regular(40, 4, seed % 1000).unwrap();
        let c = random_cover(&g, k, 0.9, seed).unwrap();
        let d = c.max_cover_degree().max(1) as f64;
        let p = RoundParams { d, ell: k as f64, eta, eps: 0.2, s: 1, t: 2, seed };
        let out = run_round_with(&c, &p, Preconditions::Warn).unwrap();
        prop_assert!(c.is_proper(&out.phi));
        prop_assert!(out.phi.respects_lists(&c));
        for v in 0..c.vertex_count() {
            if out.phi.get(v).is_none() {
                let res = c.residual_list(&out.phi, v).unwrap();
                prop_assert!(out.pruned_lists[v].iter().all(|x| res.contains(x)));
            }
        }
        let cap = 2.0 * out.derived.d_prime;
        let r = &out.residual.cover;
        prop_assert!(r.validate().is_ok());
        prop_assert!((0..r.color_count() as ColorId).all(|x| r.cover_degree(x) as f64 <= cap));
        prop_assert!(delta_prime_implication_failures(&out, &p).is_empty());
    }

    #[test]
    fn schedule_recursion(exp in 1.2f64..4.5, eps in 0.01f64..0.05, t in 1usize..4) {
        let d = 10f64.powf(exp);
        let s = build_schedule(d, eps, t, DEFAULT_MAX_ITER).unwrap();
        prop_assert!(s.i_star.is_some());
        for w in s.rows.windows(2) {
            prop_assert!(w[1].ratio <= w[0].ratio);
            prop_assert!(w[1].eps > w[0].eps);
            let expect = w[0].uncolor * w[0].ratio;
            prop_assert!(((w[1].ratio - expect) / expect).abs() < 1e-12);
        }
        for r in &s.rows {
            prop_assert!(r.keep > 0.0 && r.keep <= 1.0);
            prop_assert!(r.uncolor > 0.0 && r.uncolor <= 1.0);
        }
    }
}
