//! Affine lines in the plane, the metric on the space of lines, and line families.
//!
//! A [`Line`] is stored canonically as `(θ, s)` with `θ ∈ [0, π)`, direction
//! `e = (cos θ, sin θ)`, unit normal `n = (-sin θ, cos θ)` and foot point `v = s·n`.
//! [`SlopeIntercept`] is the `{x = a·y + b}` form and [`DualPoint`] the
//! `{x : x·v = 1}` form.

use crate::error::{Error, Result};
use crate::grid::{tube_row_span, Scale, WINDOW_HALF_WIDTH};
use crate::regularity::{minimal_budget, RegularityReport};
use crate::scalar::{Point, Scalar};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Line<T> {
    theta: T,
    s: T,
}

impl<T: Scalar> Line<T> {
    /// Builds the canonical representative of the line with normal angle data `(theta, s)`.
    /// Any real `theta` is accepted; a shift by an odd multiple of π flips the sign of `s`.
    pub fn new(theta: T, s: T) -> Self {
        let pi = T::PI();
        let q = (theta / pi).floor();
        let mut t = theta - q * pi;
        let mut s = if (q.as_f64() as i64).rem_euclid(2) == 1 { -s } else { s };
        if t >= pi {
            t = t - pi;
            s = -s;
        }
        if t < T::zero() {
            t = T::zero();
        }
        Self { theta: t, s }
    }

    pub fn through(p: Point<T>, q: Point<T>) -> Result<Self> {
        let d = q - p;
        if d.norm() == T::zero() {
            return Err(Error::Degenerate("coincident points do not span a line".into()));
        }
        let theta = d.y.atan2(d.x);
        let (sin, cos) = theta.sin_cos();
        let n = Point::new(-sin, cos);
        Ok(Self::new(theta, n.dot(p)))
    }

    pub fn theta(&self) -> T {
        self.theta
    }

    pub fn offset(&self) -> T {
        self.s
    }

    pub fn direction(&self) -> Point<T> {
        let (sin, cos) = self.theta.sin_cos();
        Point::new(cos, sin)
    }

    pub fn normal(&self) -> Point<T> {
        let (sin, cos) = self.theta.sin_cos();
        Point::new(-sin, cos)
    }

    /// The perpendicular part `v = s·n`, the point of the line closest to the origin.
    pub fn foot(&self) -> Point<T> {
        self.normal().scale(self.s)
    }

    pub fn distance_to_point(&self, p: Point<T>) -> T {
        (self.normal().dot(p) - self.s).abs()
    }

    pub fn meets_ball(&self, center: Point<T>, r: T) -> bool {
        self.distance_to_point(center) <= r
    }

    pub fn distance(&self, other: &Self) -> T {
        line_distance(self, other)
    }

    pub fn to_slope_intercept(&self) -> Result<SlopeIntercept<T>> {
        let (sin, cos) = self.theta.sin_cos();
        if sin.abs() <= T::epsilon() {
            return Err(Error::NoSlopeIntercept);
        }
        Ok(SlopeIntercept { a: cos / sin, b: -self.s / sin })
    }

    pub fn from_slope_intercept(si: SlopeIntercept<T>) -> Self {
        let theta = T::one().atan2(si.a);
        Self::new(theta, -si.b * theta.sin())
    }

    pub fn to_dual(&self) -> Result<DualPoint<T>> {
        if self.s == T::zero() {
            return Err(Error::NoDualRepresentation);
        }
        Ok(DualPoint { v: self.normal().scale(T::one() / self.s) })
    }

    pub fn from_dual(d: DualPoint<T>) -> Self {
        let r = d.v.norm();
        Self::new((-d.v.x).atan2(d.v.y), T::one() / r)
    }

    pub fn cast<U: Scalar>(&self) -> Line<U> {
        Line::new(U::lit(self.theta.as_f64()), U::lit(self.s.as_f64()))
    }
}

/// The line `{x = a·y + b}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlopeIntercept<T> {
    pub a: T,
    pub b: T,
}

impl<T: Scalar> SlopeIntercept<T> {
    pub fn new(a: T, b: T) -> Self {
        Self { a, b }
    }

    pub fn to_line(self) -> Line<T> {
        Line::from_slope_intercept(self)
    }

    pub fn to_dual(self) -> Result<DualPoint<T>> {
        if self.b == T::zero() {
            return Err(Error::NoDualRepresentation);
        }
        // x = a·y + b  ⇔  (1/b, -a/b)·(x, y) = 1.
        Ok(DualPoint { v: Point::new(T::one() / self.b, -self.a / self.b) })
    }
}

/// The line `ℓ_v = {x : x·v = 1}` for a nonzero `v`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DualPoint<T> {
    v: Point<T>,
}

impl<T: Scalar> DualPoint<T> {
    pub fn new(v: Point<T>) -> Result<Self> {
        if v.x == T::zero() && v.y == T::zero() {
            return Err(Error::InvalidDual);
        }
        Ok(Self { v })
    }

    pub fn v(&self) -> Point<T> {
        self.v
    }

    pub fn to_line(self) -> Line<T> {
        Line::from_dual(self)
    }

    pub fn to_slope_intercept(self) -> Result<SlopeIntercept<T>> {
        // (v.x)·x + (v.y)·y = 1  ⇒  x = -(v.y/v.x)·y + 1/v.x.
        if self.v.x == T::zero() {
            return Err(Error::NoSlopeIntercept);
        }
        Ok(SlopeIntercept { a: -self.v.y / self.v.x, b: T::one() / self.v.x })
    }
}

/// `min(|e₁ − e₂|, |e₁ + e₂|) + |v₁ − v₂|`: the orientation of `e` is immaterial, `v` is not.
pub fn line_distance<T: Scalar>(l1: &Line<T>, l2: &Line<T>) -> T {
    let (e1, e2) = (l1.direction(), l2.direction());
    let de = (e1 - e2).norm().min((e1 + e2).norm());
    de + (l1.foot() - l2.foot()).norm()
}

/// Closed form `|v/|v| − v′/|v′|| + |v/|v|² − v′/|v′|²|` for dual points.
///
/// It agrees with [`line_distance`] when the angle between `v` and `v′` is at most π/2;
/// for wider angles it uses the wrong sign representative and overestimates.
pub fn dual_distance<T: Scalar>(v1: &DualPoint<T>, v2: &DualPoint<T>) -> T {
    let (a, b) = (v1.v, v2.v);
    let (na, nb) = (a.norm(), b.norm());
    let unit = (a.scale(T::one() / na) - b.scale(T::one() / nb)).norm();
    let foot = (a.scale(T::one() / (na * na)) - b.scale(T::one() / (nb * nb))).norm();
    unit + foot
}

/// Stated factors `(lo, hi)` for `lo ≤ d(ℓ_v, ℓ_{v′}) / |v − v′| ≤ hi`, with `d` the
/// closed form of [`dual_distance`].
///
/// The upper factor fails once `|v| > 2`: the second term of `d` is exactly
/// `|v − v′|/(|v||v′|)`, but the unit-vector term can reach `|v − v′|/|v|`, already
/// above `4/|v|²` there. See [`dual_sandwich_proven`].
pub fn dual_sandwich<T: Scalar>(v1: &DualPoint<T>, v2: &DualPoint<T>) -> (T, T) {
    let (na, nb) = (v1.v.norm(), v2.v.norm());
    let lo = na.min(T::one()) / (na * nb);
    let hi = T::lit(4.0) / (na * na) + T::one() / (na * nb);
    (lo, hi)
}

/// Factors valid for all `v, v′ ≠ 0`: the lower one as stated, the upper one from
/// `|v/|v| − v′/|v′|| ≤ 2|v − v′|/|v|`. Never larger than the stated upper factor when `|v| ≤ 2`.
pub fn dual_sandwich_proven<T: Scalar>(v1: &DualPoint<T>, v2: &DualPoint<T>) -> (T, T) {
    let (na, nb) = (v1.v.norm(), v2.v.norm());
    let lo = na.min(T::one()) / (na * nb);
    let hi = T::lit(2.0) / na + T::one() / (na * nb);
    (lo, hi)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct LineJson {
    theta: f64,
    s: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct LineFamilyJson {
    k: u32,
    beta: f64,
    lines: Vec<LineJson>,
}

/// A finite family of lines at a fixed scale with a target exponent.
#[derive(Clone, Debug, PartialEq)]
pub struct LineFamily<T = f64> {
    pub scale: Scale,
    pub lines: Vec<Line<T>>,
    pub beta: f64,
}

impl<T: Scalar> LineFamily<T> {
    pub fn new(scale: Scale, lines: Vec<Line<T>>, beta: f64) -> Self {
        Self { scale, lines, beta }
    }

    /// Greedy maximal `sep`-separated subfamily, first-come in input order.
    pub fn separated_net(scale: Scale, beta: f64, lines: &[Line<T>], sep: f64) -> Self {
        Self::new(scale, separated_net(lines, sep), beta)
    }

    pub fn len(&self) -> usize {
        self.lines.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lines.is_empty()
    }

    pub fn min_separation(&self) -> f64 {
        let n = self.lines.len();
        (0..n)
            .into_par_iter()
            .map(|a| {
                (a + 1..n)
                    .map(|b| line_distance(&self.lines[a], &self.lines[b]).as_f64())
                    .fold(f64::INFINITY, f64::min)
            })
            .reduce(|| f64::INFINITY, f64::min)
    }

    pub fn to_json_string(&self) -> Result<String> {
        let json = LineFamilyJson {
            k: self.scale.k(),
            beta: self.beta,
            lines: self
                .lines
                .iter()
                .map(|l| LineJson { theta: l.theta().as_f64(), s: l.offset().as_f64() })
                .collect(),
        };
        Ok(serde_json::to_string_pretty(&json)?)
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let json: LineFamilyJson = serde_json::from_str(text)?;
        let scale = Scale::new(json.k)?;
        let lines = json.lines.iter().map(|l| Line::new(T::lit(l.theta), T::lit(l.s))).collect();
        Ok(Self::new(scale, lines, json.beta))
    }
}

/// Greedy maximal `sep`-separated subset of `lines`, keeping lines in input order.
pub fn separated_net<T: Scalar>(lines: &[Line<T>], sep: f64) -> Vec<Line<T>> {
    // d(ℓ, ℓ′) ≥ |v − v′|, so only foot points in neighboring buckets can be close.
    let key = |l: &Line<T>| {
        let v = l.foot();
        ((v.x.as_f64() / sep).floor() as i64, (v.y.as_f64() / sep).floor() as i64)
    };
    let mut buckets: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
    let mut kept: Vec<Line<T>> = Vec::new();
    for l in lines {
        let (bx, by) = key(l);
        let close = (-1..=1).any(|dx| {
            (-1..=1).any(|dy| {
                buckets.get(&(bx + dx, by + dy)).is_some_and(|ids| {
                    ids.iter().any(|&id| line_distance(&kept[id], l).as_f64() < sep)
                })
            })
        });
        if !close {
            buckets.entry((bx, by)).or_default().push(kept.len());
            kept.push(*l);
        }
    }
    kept
}

/// Cardinality form of the `(δ, β)` non-concentration check for a line family.
///
/// For each dyadic `r = δ·2^m ∈ [δ, 2]` the ratio is the largest number of family
/// members within distance `r` of one member, divided by `(r/δ)^β`.
pub fn family_nonconcentration<T: Scalar>(fam: &LineFamily<T>, beta: f64) -> RegularityReport {
    let delta = fam.scale.delta();
    let levels = (fam.scale.k() + 1) as usize;
    let n = fam.lines.len();
    let per_line: Vec<Vec<u64>> = (0..n)
        .into_par_iter()
        .map(|a| {
            let mut hist = vec![0u64; levels + 2];
            for b in 0..n {
                let d = line_distance(&fam.lines[a], &fam.lines[b]).as_f64();
                // Smallest m with d ≤ δ·2^m.
                let m = if d <= delta { 0 } else { (d / delta).log2().ceil() as usize };
                hist[m.min(levels + 1)] += 1;
            }
            let mut acc = 0;
            hist.iter()
                .map(|h| {
                    acc += h;
                    acc
                })
                .collect()
        })
        .collect();
    let per_scale_ratio: Vec<(f64, f64)> = (0..=levels)
        .map(|m| {
            let r = delta * (m as f64).exp2();
            let worst = per_line.iter().map(|c| c[m]).max().unwrap_or(0);
            (r, worst as f64 / (r / delta).powf(beta))
        })
        .collect();
    let mass_ratio = n as f64 * delta.powf(beta);
    let max_ratio = per_scale_ratio.iter().map(|p| p.1).fold(0.0, f64::max);
    RegularityReport {
        per_scale_ratio,
        mass_ratio,
        polylog_budget: minimal_budget(max_ratio, mass_ratio, fam.scale.log2_inv_delta()),
    }
}

/// Diameter of the cell centers lying in both `2δ`-tubes and in `B(0, 2)`; 0 when empty.
pub fn tube_intersection_diameter<T: Scalar>(l1: &Line<T>, l2: &Line<T>, scale: Scale) -> f64 {
    let delta = scale.delta();
    let mut ends: Vec<(f64, f64)> = Vec::new();
    for j in 0..scale.side() {
        let y = -WINDOW_HALF_WIDTH + (j as f64 + 0.5) * delta;
        if y.abs() > 2.0 {
            continue;
        }
        let w = (4.0 - y * y).sqrt();
        let (Some(a), Some(b), Some(c)) = (
            tube_row_span(l1, 2.0 * delta, scale, j),
            tube_row_span(l2, 2.0 * delta, scale, j),
            scale.center_range(-w, w),
        ) else {
            continue;
        };
        let lo = a.0.max(b.0).max(c.0);
        let hi = a.1.min(b.1).min(c.1);
        if lo > hi {
            continue;
        }
        for i in [lo, hi] {
            ends.push((-WINDOW_HALF_WIDTH + (i as f64 + 0.5) * delta, y));
        }
    }
    let mut best = 0.0f64;
    for (a, p) in ends.iter().enumerate() {
        for q in &ends[a + 1..] {
            best = best.max((p.0 - q.0).hypot(p.1 - q.1));
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-12 * (1.0 + a.abs().max(b.abs()))
    }

    #[test]
    fn canonical_form() {
        let l = Line::new(FRAC_PI_2 + PI, 1.0);
        assert!(close(l.theta(), FRAC_PI_2));
        assert!(close(l.offset(), -1.0));
        let l = Line::new(-0.25, 2.0);
        assert!(close(l.theta(), PI - 0.25));
        assert!(close(l.offset(), -2.0));
        let e = l.direction();
        assert!(close(e.dot(l.foot()), 0.0));
    }

    #[test]
    fn hand_conversions() {
        let l = Line::<f64>::through(Point::new(1.0, 0.0), Point::new(1.0, 5.0)).unwrap();
        assert!(close(l.theta(), FRAC_PI_2));
        let si = l.to_slope_intercept().unwrap();
        assert!(close(si.a, 0.0) && close(si.b, 1.0));
        let d = l.to_dual().unwrap();
        assert!(close(d.v().x, 1.0) && close(d.v().y, 0.0));
        let back = DualPoint::new(Point::new(1.0, 0.0)).unwrap().to_line();
        assert!(close(back.theta(), l.theta()) && close(back.offset(), l.offset()));
        let s2 = SlopeIntercept::new(0.0, 1.0).to_dual().unwrap();
        assert_eq!(s2.v(), Point::new(1.0, 0.0));
    }

    #[test]
    fn conversion_errors() {
        let origin = Line::<f64>::new(0.7, 0.0);
        assert!(matches!(origin.to_dual(), Err(Error::NoDualRepresentation)));
        let horizontal = Line::<f64>::new(0.0, 1.0);
        assert!(matches!(horizontal.to_slope_intercept(), Err(Error::NoSlopeIntercept)));
        assert!(matches!(DualPoint::new(Point::new(0.0, 0.0)), Err(Error::InvalidDual)));
    }

    #[test]
    fn hand_distances() {
        let a = Line::<f64>::through(Point::new(1.0, 0.0), Point::new(1.0, 1.0)).unwrap();
        let b = Line::<f64>::through(Point::new(0.5, 0.0), Point::new(0.5, 1.0)).unwrap();
        assert!(close(a.distance(&b), 0.5));
        assert_eq!(a.distance(&a), 0.0);
        let v = DualPoint::new(Point::new(1.0, 0.0)).unwrap();
        let w = DualPoint::new(Point::new(2.0, 0.0)).unwrap();
        assert!(close(dual_distance(&v, &w), 0.5));
        assert_eq!(dual_distance(&v, &v), 0.0);
    }

    #[test]
    fn opposite_duals_show_the_sign_gap() {
        let v = DualPoint::new(Point::new(1.0, 0.0)).unwrap();
        let w = DualPoint::new(Point::new(-1.0, 0.0)).unwrap();
        assert!(close(line_distance(&v.to_line(), &w.to_line()), 2.0));
        assert!(close(dual_distance(&v, &w), 4.0));
    }

    #[test]
    fn f32_lines() {
        let l = Line::<f32>::new(1.0, 0.5);
        let d = l.to_dual().unwrap().to_line();
        assert!((d.theta() - l.theta()).abs() < 1e-5);
        assert!((d.offset() - l.offset()).abs() < 1e-5);
    }

    #[test]
    fn separated_net_basics() {
        let sc = Scale::new(6).unwrap();
        let lines: Vec<Line<f64>> = (0..10).map(|i| Line::new(0.3 * i as f64, 0.1)).collect();
        assert_eq!(separated_net(&lines, 0.01), lines);
        let dup: Vec<Line<f64>> = vec![lines[0]; 5];
        assert_eq!(separated_net(&dup, 0.01).len(), 1);
        let fam = LineFamily::separated_net(sc, 1.0, &lines, 0.01);
        assert_eq!(fam.len(), 10);
    }

    #[test]
    fn single_line_nonconcentration() {
        let sc = Scale::new(6).unwrap();
        let fam = LineFamily::new(sc, vec![Line::<f64>::new(0.2, 0.3)], 1.0);
        let rep = family_nonconcentration(&fam, 1.0);
        assert!(rep.per_scale_ratio.iter().all(|&(_, r)| r <= 1.0));
        assert_eq!(rep.per_scale_ratio.len(), 8);
        assert!(close(rep.per_scale_ratio.last().unwrap().0, 2.0));
    }

    #[test]
    fn family_json_round_trip() {
        let sc = Scale::new(7).unwrap();
        let fam = LineFamily::new(sc, vec![Line::<f64>::new(0.123456789, -0.5), Line::new(2.0, 1.0 / 3.0)], 0.75);
        let text = fam.to_json_string().unwrap();
        assert_eq!(LineFamily::<f64>::from_json_str(&text).unwrap(), fam);
    }

    #[test]
    fn tube_intersections() {
        let sc = Scale::new(8).unwrap();
        let d = sc.delta();
        let a = Line::<f64>::new(FRAC_PI_2, 0.0);
        let b = Line::<f64>::new(FRAC_PI_2, -7.0 * d);
        assert_eq!(tube_intersection_diameter(&a, &b, sc), 0.0);
        let h = Line::<f64>::new(0.0, 0.0);
        let diam = tube_intersection_diameter(&a, &h, sc);
        assert!(diam > 0.0 && diam <= 6.0 * d * 2f64.sqrt());
    }
}
