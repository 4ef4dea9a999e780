use furst::grid::{rasterize_tube, CellSet1, SparseCells};
use furst::{CellIndex, CellSet, Line64, Point64, Scale};
use proptest::prelude::*;

fn cells(k: u32) -> impl Strategy<Value = Vec<(u32, u32)>> {
    let n = 8u32 << k;
    prop::collection::vec((0..n, 0..n), 0..200)
}

fn set(k: u32, v: &[(u32, u32)]) -> CellSet {
    CellSet::from_cells(Scale::new(k).unwrap(), v.iter().map(|&(i, j)| CellIndex::new(i, j)))
}

proptest! {
    #[test]
    fn set_algebra_counts(a in cells(4), b in cells(4)) {
        let (a, b) = (set(4, &a), set(4, &b));
        let u = a.union(&b).unwrap();
        let i = a.intersection(&b).unwrap();
        prop_assert_eq!(u.len() + i.len(), a.len() + b.len());
        prop_assert_eq!(a.intersection_count(&b).unwrap(), i.len());
        prop_assert!(i.is_subset(&a) && a.is_subset(&u));
        prop_assert_eq!(a.difference(&b).unwrap().len(), a.len() - i.len());
    }

    #[test]
    fn bytes_and_json_round_trip(a in cells(5)) {
        let a = set(5, &a);
        prop_assert_eq!(&CellSet::from_bytes(&a.to_bytes()).unwrap(), &a);
        prop_assert_eq!(&CellSet::from_json(&a.to_json()).unwrap(), &a);
        let sparse = SparseCells::from_cellset(&a);
        prop_assert_eq!(sparse.len() as u64, a.len());
        prop_assert_eq!(&sparse.to_cellset(), &a);
    }

    #[test]
    fn neighborhood_contains_set_and_grows(a in cells(4), m in 0u32..3) {
        let a = set(4, &a);
        let d = Scale::new(4).unwrap().delta();
        let r = d * (1u32 << m) as f64;
        let n1 = a.neighborhood(r).unwrap();
        let n2 = a.neighborhood(2.0 * r).unwrap();
        prop_assert!(a.is_subset(&n1));
        prop_assert!(n1.is_subset(&n2));
    }

    #[test]
    fn covering_numbers_are_monotone(a in cells(5)) {
        let a = set(5, &a);
        let d = Scale::new(5).unwrap().delta();
        let c: Vec<u64> = (0..6).map(|m| a.covering_number(d * (1u32 << m) as f64).unwrap()).collect();
        prop_assert_eq!(c[0], a.len());
        for w in c.windows(2) {
            prop_assert!(w[1] <= w[0] && w[0] <= 4 * w[1]);
        }
    }

    #[test]
    fn cell_of_center_is_identity(i in 0u32..512, j in 0u32..512) {
        let s = Scale::new(6).unwrap();
        let c = CellIndex::new(i, j);
        prop_assert_eq!(s.cell_of(s.center(c)), Some(c));
        prop_assert_eq!(s.from_linear(s.linear(c)), c);
    }

    #[test]
    fn tube_raster_meets_every_point(theta in 0.0f64..std::f64::consts::PI, off in -1.0f64..1.0, t in -2.0f64..2.0) {
        let s = Scale::new(6).unwrap();
        let l = Line64::new(theta, off);
        let tube = rasterize_tube(&l, 2.0 * s.delta(), s);
        let p = l.foot() + l.direction().scale(t);
        prop_assert!(tube.contains(s.cell_of(p).unwrap()));
    }

    #[test]
    fn ball_count_bounded_by_area(x in -3.0f64..3.0, y in -3.0f64..3.0, r in 0.0f64..0.5) {
        let s = Scale::new(5).unwrap();
        let full = CellSet::full(s);
        let d = s.delta();
        let area = std::f64::consts::PI * (r + d).powi(2);
        prop_assert!(full.ball_count(Point64::new(x, y), r) <= area + 1e-12);
    }

    #[test]
    fn one_dimensional_prefix_counts(v in prop::collection::vec(0u32..128, 0..60)) {
        let a = CellSet1::from_cells(Scale::new(4).unwrap(), v.iter().copied());
        let p = a.prefix_counts();
        prop_assert_eq!(*p.last().unwrap() as u64, a.len());
        for i in a.iter() {
            prop_assert!(a.contains(i));
            prop_assert_eq!(a.cell_of(a.center(i)), Some(i));
        }
    }
}

#[test]
fn scale_range_is_enforced() {
    assert!(Scale::new(3).is_err());
    assert!(Scale::new(13).is_err());
    let s = Scale::new(4).unwrap();
    assert_eq!(s.side(), 128);
    assert_eq!(s.delta(), 1.0 / 16.0);
}

#[test]
fn neighborhood_below_resolution_is_rejected() {
    let s = Scale::new(5).unwrap();
    let a = CellSet::from_cells(s, [CellIndex::new(3, 3)]);
    assert!(a.neighborhood(s.delta() / 4.0).is_err());
}

#[test]
fn mismatched_scales_are_rejected() {
    let a = CellSet::empty(Scale::new(4).unwrap());
    let b = CellSet::empty(Scale::new(5).unwrap());
    assert!(a.union(&b).is_err());
}
