//! Property tests: the canonical value order is a total order, set algebra
//! behaves, subdivision preserves the complex axioms with the right counts,
//! and multiplexed sets round-trip.

use std::collections::BTreeSet;

use proptest::prelude::*;

use anonsim::topology::{bary, skel, Complex, Simplex};
use anonsim::value::{ValueArena, ValueTree};

fn arb_tree(depth: u32) -> impl Strategy<Value = ValueTree> {
    let leaf = prop_oneof![
        Just(ValueTree::Bottom),
        (-20i64..20).prop_map(ValueTree::Int),
    ];
    leaf.prop_recursive(depth, 24, 4, |inner| {
        prop_oneof![
            prop::collection::vec(inner.clone(), 0..4).prop_map(ValueTree::Tuple),
            prop::collection::btree_set(inner, 0..4).prop_map(ValueTree::Set),
        ]
    })
}

fn arb_facets() -> impl Strategy<Value = Vec<Simplex>> {
    prop::collection::vec(
        prop::collection::btree_set((0i64..7).prop_map(ValueTree::Int), 1..4),
        1..4,
    )
}

proptest! {
    /// The arena's canonical order agrees with the derived order on trees
    /// and is antisymmetric.
    #[test]
    fn canonical_order_matches_tree_order(a in arb_tree(3), b in arb_tree(3)) {
        let mut arena = ValueArena::new();
        let x = arena.from_tree(&a);
        let y = arena.from_tree(&b);
        prop_assert_eq!(arena.cmp_values(x, y), a.cmp(&b));
        prop_assert_eq!(x == y, a == b);
    }

    #[test]
    fn union_is_lub(a in arb_tree(3), b in arb_tree(3)) {
        let mut arena = ValueArena::new();
        let x = arena.from_tree(&a);
        let y = arena.from_tree(&b);
        let sx = arena.set_of(vec![x]);
        let sy = arena.set_of(vec![y]);
        let u = arena.set_union(sx, sy);
        prop_assert!(arena.set_is_subset(sx, u));
        prop_assert!(arena.set_is_subset(sy, u));
        prop_assert!(arena.set_contains(u, x));
        prop_assert!(arena.set_contains(u, y));
        let min = arena.set_min(u).unwrap();
        let expect = if a <= b { x } else { y };
        prop_assert_eq!(min, expect);
    }

    #[test]
    fn json_round_trips(a in arb_tree(3)) {
        let mut arena = ValueArena::new();
        let x = arena.from_tree(&a);
        let json = arena.to_json(x);
        let mut arena2 = ValueArena::new();
        let y = arena2.from_json(&json).unwrap();
        prop_assert_eq!(arena2.to_tree(y), a);
    }

    /// bary(K) is a complex whose vertex count is the simplex count of K;
    /// the top simplices of the subdivision of an m-simplex number (m+1)!.
    #[test]
    fn bary_counts(facets in arb_facets()) {
        let k = Complex::from_facets(facets).unwrap();
        let b = bary(&k);
        prop_assert_eq!(b.vertex_count(), k.simplex_count());
        // Closure under nonempty subsets.
        for s in b.simplices() {
            for v in s {
                let singleton: Simplex = [v.clone()].into_iter().collect();
                prop_assert!(b.contains(&singleton));
            }
        }
    }

    #[test]
    fn bary_full_simplex_top_count(m in 1usize..4) {
        let k = Complex::full((0..=m as i64).map(ValueTree::Int)).unwrap();
        let b = bary(&k);
        let factorial: usize = (1..=m + 1).product();
        prop_assert_eq!(b.simplices_of_size(m + 1).count(), factorial);
    }

    /// skel is idempotent, monotone, and composes by minimum.
    #[test]
    fn skel_laws(facets in arb_facets(), k in 0usize..4, j in 0usize..4) {
        let complex = Complex::from_facets(facets).unwrap();
        let sk = skel(&complex, k);
        prop_assert_eq!(skel(&sk, k), sk.clone());
        prop_assert!(sk.is_subcomplex_of(&complex));
        let twice = skel(&skel(&complex, k), j);
        prop_assert_eq!(twice, skel(&complex, k.min(j)));
    }

    /// Tagged universes of distinct logical objects are disjoint and
    /// round-trip through filtering.
    #[test]
    fn multiplex_round_trip(
        path_a in prop::collection::vec(-3i64..3, 1..3),
        path_b in prop::collection::vec(-3i64..3, 1..3),
        vals in prop::collection::btree_set(-10i64..10, 0..5),
    ) {
        let mut arena = ValueArena::new();
        let ids: Vec<_> = vals.iter().map(|&v| arena.int(v)).collect();
        let tagged: Vec<_> = ids
            .iter()
            .map(|&v| anonsim::weakset::tag(&mut arena, &path_a, v))
            .collect();
        let physical = arena.set_of(tagged);
        let back = anonsim::weakset::untag_filter(&mut arena, physical, &path_a);
        let expect = arena.set_of(ids.clone());
        prop_assert_eq!(back, expect);
        let other = anonsim::weakset::untag_filter(&mut arena, physical, &path_b);
        if path_a != path_b {
            prop_assert!(arena.set_is_empty(other));
        }
    }
}

/// The brute-force subdivision oracle and the construction agree on every
/// small complex (the oracle enumerates all containment-chains directly).
#[test]
fn bary_matches_enumeration_on_small_complexes() {
    let cases: Vec<Vec<Vec<i64>>> = vec![
        vec![vec![1]],
        vec![vec![1, 2]],
        vec![vec![1, 2], vec![2, 3]],
        vec![vec![1, 2, 3]],
        vec![vec![1, 2, 3], vec![3, 4]],
    ];
    for facets in cases {
        let k = Complex::from_facets(facets.iter().map(|f| {
            f.iter().map(|&v| ValueTree::Int(v)).collect::<BTreeSet<_>>()
        }))
        .unwrap();
        let fast = bary(&k);
        // Oracle: a family of simplices is a subdivision simplex exactly
        // when totally ordered by containment.
        let all: Vec<&Simplex> = k.simplices().collect();
        let mut expected: BTreeSet<Simplex> = BTreeSet::new();
        for mask in 1u64..(1 << all.len()) {
            let family: Vec<&Simplex> = all
                .iter()
                .enumerate()
                .filter(|(i, _)| mask & (1 << i) != 0)
                .map(|(_, s)| *s)
                .collect();
            if family
                .iter()
                .all(|a| family.iter().all(|b| a.is_subset(b) || b.is_subset(a)))
            {
                expected.insert(
                    family
                        .into_iter()
                        .map(|s| ValueTree::Set(s.iter().cloned().collect()))
                        .collect(),
                );
            }
        }
        let got: BTreeSet<Simplex> = fast.simplices().cloned().collect();
        assert_eq!(got, expected);
    }
}
