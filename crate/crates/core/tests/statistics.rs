use furst::generators::{generate, GeneratorKind};
use furst::grid::{Scale, SparseCells};
use furst::statistics::{
    appendix_bound, cs_lower_bound, exponent_fit, gamma_from_counts, heavy_points_relative, pairwise_intersections, relation,
    StabIndex,
};
use furst::CellIndex;
use proptest::prelude::*;

fn sets(k: u32) -> impl Strategy<Value = Vec<SparseCells>> {
    let n = 8u32 << k;
    prop::collection::vec(prop::collection::vec((0..n, 0..n), 0..40), 1..12).prop_map(move |v| {
        let s = Scale::new(k).unwrap();
        v.into_iter().map(|c| SparseCells::from_cells(s, c.into_iter().map(|(i, j)| CellIndex::new(i, j)))).collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn cauchy_schwarz_bound_is_exact(v in sets(4)) {
        let cs = cs_lower_bound(&v).unwrap();
        prop_assert!(cs.union_cells as u128 * cs.double_sum as u128 >= (cs.sum_cells as u128).pow(2));
        prop_assert!(cs.bound <= cs.union_measure + 1e-15);
        prop_assert_eq!(cs.sum_cells, v.iter().map(|s| s.len() as u64).sum::<u64>());
    }

    #[test]
    fn fit_recovers_exponent(d in 0.5f64..2.0, c in 0.1f64..10.0) {
        let runs: Vec<_> = (5..=9).map(|k| { let s = Scale::new(k).unwrap(); (s, c * s.delta().powf(2.0 - d)) }).collect();
        let f = exponent_fit(&runs).unwrap();
        prop_assert!((f.dimension - d).abs() < 1e-9 && f.residual < 1e-9);
    }
}

#[test]
fn double_counting_identity_on_generators() {
    for kind in [GeneratorKind::CantorTarget, GeneratorKind::TrainTrack, GeneratorKind::Random] {
        let inst = generate(kind, 0.5, 0.5, Scale::new(6).unwrap(), 1).unwrap();
        let index = StabIndex::new(&inst);
        let pw = pairwise_intersections(&inst, &index);
        let rep = appendix_bound(&inst, &pw).unwrap();
        assert!(rep.identity_holds, "{kind}");
        // Σ_x mult(x)² equals ΣΣ|R_i ∩ R_j|.
        let by_cell: u64 = (0..index.cell_count()).map(|x| (index.stab(x).len() as u64).pow(2)).sum();
        assert_eq!(by_cell, rep.double_sum, "{kind}");
        assert_eq!(index.total_incidences(), rep.cs.sum_cells);
    }
}

#[test]
fn relation_pairs_bounded_by_sum_and_square() {
    for kind in [GeneratorKind::CantorTarget, GeneratorKind::TrainTrack, GeneratorKind::Random] {
        let inst = generate(kind, 0.5, 0.5, Scale::new(6).unwrap(), 2).unwrap();
        let rel = relation(&inst);
        let p = &rel.pairs;
        assert!(p.union_pairs <= p.sum_pairs, "{kind}");
        assert!(p.union_pairs <= p.e_cells * p.e_cells && p.union_pairs >= p.e_cells);
        assert_eq!(rel.related.iter().map(|&r| r as u64).sum::<u64>(), p.union_pairs);
        let g = gamma_from_counts(p.e_cells, p.union_pairs, inst.scale);
        assert!((g - p.gamma_measured).abs() < 1e-12 && g >= 0.0);
    }
}

#[test]
fn relative_heavy_points_meet_their_floor() {
    let inst = generate(GeneratorKind::CantorTarget, 0.4, 0.8, Scale::new(7).unwrap(), 0).unwrap();
    let rel = relation(&inst);
    for eps in [0.01, 0.05, 0.2] {
        let h = heavy_points_relative(&inst, &rel, eps);
        assert!(!h.set.is_empty() && h.set.measure() >= h.predicted * (1.0 - 1e-12), "eps={eps}");
        assert!(h.set.is_subset(&inst.e_union));
    }
}

#[test]
fn fit_needs_three_scales() {
    let s = Scale::new(6).unwrap();
    assert!(exponent_fit(&[(s, 0.1), (s, 0.2), (Scale::new(7).unwrap(), 0.05)]).is_err());
    assert!(cs_lower_bound(&[]).is_err());
}
