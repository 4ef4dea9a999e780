use furst::projective::{
    distortion_certificate, product_projection, projection_covering, psi_jacobian_det, psi_line, psi_point,
    psi_pushforward, pushforward_certificate, uniform_directions,
};
use furst::linespace::SlopeIntercept;
use furst::{CellIndex, CellSet, Point64, Scale};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn psi_maps_lines_to_lines(a in -3.0f64..3.0, b in -3.0f64..3.0, y in 0.1f64..4.0) {
        let p = Point64::new(a * y + b, y);
        let q = psi_point(p).unwrap();
        let l = psi_line(SlopeIntercept { a, b });
        prop_assert!((q.x - (l.a * q.y + l.b)).abs() < 1e-9 * (1.0 + q.x.abs()));
        // ψ is an involution off the axis.
        let back = psi_point(q).unwrap();
        prop_assert!(back.dist(p) < 1e-9 * (1.0 + p.norm()));
    }

    #[test]
    fn jacobian_matches_finite_difference(x in -2.0f64..2.0, y in 0.2f64..2.0) {
        let h = 1e-6;
        let p = Point64::new(x, y);
        let f = |dx: f64, dy: f64| psi_point(Point64::new(x + dx, y + dy)).unwrap();
        let (fx, fy, f0) = (f(h, 0.0), f(0.0, h), f(0.0, 0.0));
        let det = ((fx.x - f0.x) * (fy.y - f0.y) - (fx.y - f0.y) * (fy.x - f0.x)) / (h * h);
        prop_assert!((det.abs() - psi_jacobian_det(p)).abs() < 1e-4 * psi_jacobian_det(p));
    }

    #[test]
    fn projection_is_monotone_and_lipschitz(pts in prop::collection::vec((-3.9f64..3.9, -3.9f64..3.9), 1..200), keep in 1usize..200, t in 0.0f64..3.2) {
        let pts: Vec<Point64> = pts.into_iter().map(|(x, y)| Point64::new(x, y)).collect();
        let s = Scale::new(6).unwrap();
        let e = Point64::new(t.cos(), t.sin());
        let sub = &pts[..keep.min(pts.len())];
        prop_assert!(projection_covering(sub, e, s) <= projection_covering(&pts, e, s));
        // Projection is 1-Lipschitz, so the count never exceeds the number of points.
        prop_assert!(projection_covering(&pts, e, s) <= pts.len() as u64);
    }
}

#[test]
fn proven_distortion_bounds_hold() {
    for y0 in [1.0 / 16.0, 0.25, 0.5, 1.0, 2.0] {
        let c = distortion_certificate(y0, 20_000, 7).unwrap();
        assert!(c.proven_bounds_hold(), "{c:?}");
        assert_eq!(c.pairs, 20_000);
    }
}

#[test]
fn stated_lower_bound_fails_on_the_counterexample() {
    let (p, q) = (Point64::new(0.0, 2.0), Point64::new(0.0, 1.9));
    let ratio = psi_point(p).unwrap().dist(psi_point(q).unwrap()) / p.dist(q);
    assert!(ratio < 1.0 && (ratio - 0.263).abs() < 1e-3);
}

#[test]
fn pushforward_covers_sample_images() {
    let s = Scale::new(6).unwrap();
    let sq = CellSet::from_cells(s, (0..32).flat_map(|i| (0..20).map(move |j| CellIndex::new(240 + i, 330 + j))));
    let y0 = 0.75;
    let img = psi_pushforward(&sq, y0).unwrap();
    assert!(!img.is_empty());
    let d = s.delta();
    for c in sq.iter() {
        let p = s.center(c);
        if p.y - d / 2.0 < y0 || p.y + d / 2.0 > 2.0 * y0 {
            continue;
        }
        let q = img.to_grid(psi_point(p).unwrap());
        assert!(img.cells.contains(img.target_scale.cell_of(q).unwrap()), "{c:?}");
    }
    assert!(product_projection(&img).len() as u64 <= img.len());
    let cert = pushforward_certificate(&sq, y0, 5_000, 3).unwrap();
    assert!(cert.proven_bounds_hold());
    let bytes = img.to_bytes();
    assert_eq!(furst::projective::PsiImage::from_bytes(&bytes).unwrap(), img);
}

#[test]
fn band_limits_are_enforced() {
    let s = Scale::new(5).unwrap();
    assert!(psi_pushforward(&CellSet::empty(s), 0.01).is_err());
    assert!(psi_point(Point64::new(1.0, 0.0)).is_err());
    assert_eq!(uniform_directions(8).len(), 8);
}
