use furst::grid::{CellSet1, Scale};
use furst::regularity::{frostman_extract, frostman_extract_1d, refine_split, refine_split_1d, verify_set_class, verify_set_class_1d};
use furst::{CellIndex, CellSet};
use proptest::prelude::*;
use std::collections::HashMap;

fn random_set(k: u32) -> impl Strategy<Value = CellSet> {
    // Clustered points so that every scale sees some concentration.
    let n = 8u32 << k;
    (prop::collection::vec((0..n, 0..n), 1..6), prop::collection::vec((0u32..24, 0u32..24), 1..120)).prop_map(
        move |(centers, offs)| {
            let s = Scale::new(k).unwrap();
            CellSet::from_cells(
                s,
                offs.iter().enumerate().map(|(t, &(dx, dy))| {
                    let (cx, cy) = centers[t % centers.len()];
                    CellIndex::new((cx + dx).min(n - 1), (cy + dy).min(n - 1))
                }),
            )
        },
    )
}

fn max_block_count(a: &CellSet, m: u32) -> u32 {
    let mut c: HashMap<(u32, u32), u32> = HashMap::new();
    for cell in a.iter() {
        *c.entry((cell.i >> m, cell.j >> m)).or_insert(0) += 1;
    }
    c.values().copied().max().unwrap_or(0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn frostman_caps_every_dyadic_square(a in random_set(5), alpha in 0.1f64..1.9) {
        let out = frostman_extract(&a, alpha).set;
        prop_assert!(out.is_subset(&a));
        for m in 0..=a.scale().k() + 3 {
            let cap = ((m as f64 * alpha).exp2() - 1e-9).ceil() as u32;
            prop_assert!(max_block_count(&out, m) <= cap, "m={m}");
        }
        prop_assert_eq!(frostman_extract(&out, alpha).set, out);
    }

    #[test]
    fn refinement_postconditions(a in random_set(5), s in 0.3f64..1.7, eta in 0.0f64..0.5) {
        let split = refine_split(&a, s, eta);
        prop_assert!(split.certificate.holds(), "{:?}", split.certificate);
        let union = split.e_star.union(&split.e_double_star_union()).unwrap();
        prop_assert!(a.is_subset(&union));
        prop_assert!(union.is_subset(&split.e_delta));
    }

    #[test]
    fn one_dimensional_split_and_frostman(v in prop::collection::vec(0u32..256, 1..120), s in 0.2f64..0.9) {
        let a = CellSet1::from_cells(Scale::new(5).unwrap(), v);
        let split = refine_split_1d(&a, s, 0.1);
        prop_assert!(split.inclusions_hold && split.e_star_nonconcentration_holds);
        let f = frostman_extract_1d(&a, s);
        prop_assert!(f.is_subset(&a) && !f.is_empty());
    }

    #[test]
    fn frostman_output_verifies(a in random_set(5), alpha in 0.2f64..1.5) {
        let out = frostman_extract(&a, alpha).set;
        // Caps of ⌈(r/δ)^α⌉ per dyadic square bound every open ball ratio by a constant.
        let rep = verify_set_class(&out, alpha, 0.0);
        prop_assert!(rep.max_ratio() <= 16.0 * 4f64.powf(alpha), "{}", rep.max_ratio());
    }
}

#[test]
fn full_square_is_two_dimensional() {
    let s = Scale::new(4).unwrap();
    let sq = CellSet::from_cells(s, (0..16).flat_map(|i| (0..16).map(move |j| CellIndex::new(60 + i, 60 + j))));
    let rep = verify_set_class(&sq, 2.0, 0.0);
    assert!(rep.ratios_within(4.0), "{:?}", rep.per_scale_ratio);
}

#[test]
fn empty_input_is_flagged() {
    let s = Scale::new(5).unwrap();
    let rep = verify_set_class(&CellSet::empty(s), 1.0, 0.0);
    assert!(rep.is_empty_flagged() && !rep.passes(1e9));
    let rep1 = verify_set_class_1d(&CellSet1::empty(s), 0.5, 0.0);
    assert!(rep1.is_empty_flagged());
}

#[test]
fn single_cell_is_a_zero_dimensional_set() {
    let s = Scale::new(6).unwrap();
    let a = CellSet::from_cells(s, [CellIndex::new(100, 100)]);
    let rep = verify_set_class(&a, 0.0, 0.0);
    assert!(rep.ratios_within(1.0 + 1e-12));
}
