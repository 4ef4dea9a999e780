//! Regularity of discretized sets: the `(δ, α, ε)` verdict, discretized Frostman
//! extraction and the refinement split into a regular part and concentrated parts.

use crate::error::Result;
use crate::grid::{CellIndex, CellSet, CellSet1, CellSetJson, Scale, SparseCells};
use crate::linespace::Line;
use crate::scalar::Scalar;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

/// Worst-case concentration ratios per dyadic scale.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegularityReport {
    /// `(r, ratio)` for dyadic `r ∈ [δ, 2]`, ascending.
    pub per_scale_ratio: Vec<(f64, f64)>,
    pub mass_ratio: f64,
    /// Smallest `C` with every ratio `≤ C·L^C` and `mass_ratio ≥ 1/(C·L^C)`, `L = log₂(1/δ)`.
    /// Infinite for empty input.
    pub polylog_budget: f64,
}

impl RegularityReport {
    pub fn max_ratio(&self) -> f64 {
        self.per_scale_ratio.iter().map(|p| p.1).fold(0.0, f64::max)
    }

    /// Empty input gives a zero mass ratio and never passes.
    pub fn is_empty_flagged(&self) -> bool {
        self.mass_ratio == 0.0
    }

    /// Verdict for the polylog budget `C`.
    pub fn passes(&self, c: f64) -> bool {
        self.polylog_budget <= c
    }

    /// Non-concentration part of the verdict only.
    pub fn ratios_within(&self, bound: f64) -> bool {
        self.per_scale_ratio.iter().all(|p| p.1 <= bound)
    }
}

/// Default polylog budget `C = 1`, i.e. a factor `log₂(1/δ)`.
pub const DEFAULT_BUDGET: f64 = 1.0;

/// Smallest `C ≥ 0` with `C·L^C ≥ max(max_ratio, 1/mass_ratio)`.
pub fn minimal_budget(max_ratio: f64, mass_ratio: f64, log_inv_delta: f64) -> f64 {
    if !(mass_ratio > 0.0) {
        return f64::INFINITY;
    }
    let target = max_ratio.max(1.0 / mass_ratio);
    let g = |c: f64| c * log_inv_delta.max(1.0).powf(c);
    let (mut lo, mut hi) = (0.0f64, 64.0f64);
    if g(hi) < target {
        return f64::INFINITY;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) >= target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// Whether a ball `B(x, r)` includes centers at distance exactly `r`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Ball {
    Open,
    Closed,
}

impl Ball {
    /// Squared-distance shift turning the open test into the closed one.
    fn shift(self) -> u64 {
        match self {
            Ball::Open => 1,
            Ball::Closed => 0,
        }
    }
}

fn isqrt(n: u64) -> u64 {
    let mut r = (n as f64).sqrt() as u64;
    while r * r > n {
        r -= 1;
    }
    while (r + 1) * (r + 1) <= n {
        r += 1;
    }
    r
}

/// Smallest `m` with `d2 ≤ 4^m`.
fn level_of(d2: u64) -> u32 {
    if d2 <= 1 {
        0
    } else {
        (64 - (d2 - 1).leading_zeros()).div_ceil(2)
    }
}

fn brute_profiles(cells: &[CellIndex], centers: &[CellIndex], max_m: u32, ball: Ball) -> Vec<Vec<u32>> {
    let levels = max_m as usize + 1;
    centers
        .par_iter()
        .map(|c| {
            let mut hist = vec![0u32; levels + 1];
            for q in cells {
                let di = c.i.abs_diff(q.i) as u64;
                let dj = c.j.abs_diff(q.j) as u64;
                hist[(level_of(di * di + dj * dj + ball.shift()) as usize).min(levels)] += 1;
            }
            let mut acc = 0;
            hist[..levels]
                .iter()
                .map(|h| {
                    acc += h;
                    acc
                })
                .collect()
        })
        .collect()
}

/// `out[c][m]` = number of cells of `set` whose center is within `2^m` cells of `centers[c]`,
/// for `m = 0..=max_m`.
pub(crate) fn disc_profiles(set: &CellSet, centers: &[CellIndex], max_m: u32, ball: Ball) -> Vec<Vec<u32>> {
    let levels = max_m as usize + 1;
    let cells: Vec<CellIndex> = set.iter().collect();
    if cells.is_empty() {
        return vec![vec![0; levels]; centers.len()];
    }
    if cells.len() <= 2048 {
        return brute_profiles(&cells, centers, max_m, ball);
    }
    let (mut i0, mut i1, mut j0, mut j1) = (u32::MAX, 0, u32::MAX, 0);
    for c in &cells {
        i0 = i0.min(c.i);
        i1 = i1.max(c.i);
        j0 = j0.min(c.j);
        j1 = j1.max(c.j);
    }
    let w = (i1 - i0 + 1) as usize;
    let h = (j1 - j0 + 1) as usize;
    // Row prefix counts over the bounding box.
    let mut prefix = vec![0u32; h * (w + 1)];
    for c in &cells {
        prefix[(c.j - j0) as usize * (w + 1) + (c.i - i0) as usize + 1] += 1;
    }
    for row in prefix.chunks_mut(w + 1) {
        for x in 1..=w {
            row[x] += row[x - 1];
        }
    }
    let total = cells.len() as u32;
    centers
        .par_iter()
        .map(|c| {
            let (ci, cj) = (c.i as i64, c.j as i64);
            let far = [(i0 as i64, j0 as i64), (i1 as i64, j0 as i64), (i0 as i64, j1 as i64), (i1 as i64, j1 as i64)]
                .iter()
                .map(|&(x, y)| ((x - ci).pow(2) + (y - cj).pow(2)) as u64)
                .max()
                .unwrap_or(0);
            (0..levels)
                .map(|m| {
                    let r = 1i64 << m;
                    let r2 = (r * r) as u64 - ball.shift();
                    if r2 >= far {
                        return total;
                    }
                    let mut count = 0u32;
                    let ylo = (cj - r).max(j0 as i64);
                    let yhi = (cj + r).min(j1 as i64);
                    for y in ylo..=yhi {
                        let dy = (y - cj).unsigned_abs();
                        if dy * dy > r2 {
                            continue;
                        }
                        let half = isqrt(r2 - dy * dy) as i64;
                        let xlo = (ci - half).max(i0 as i64);
                        let xhi = (ci + half).min(i1 as i64);
                        if xlo > xhi {
                            continue;
                        }
                        let row = &prefix[(y - j0 as i64) as usize * (w + 1)..];
                        count += row[(xhi - i0 as i64) as usize + 1] - row[(xlo - i0 as i64) as usize];
                    }
                    count
                })
                .collect()
        })
        .collect()
}

/// 1-D analogue of [`disc_profiles`].
pub(crate) fn interval_profiles(set: &CellSet1, centers: &[u32], max_m: u32, ball: Ball) -> Vec<Vec<u32>> {
    let prefix = set.prefix_counts();
    let side = set.scale().side() as i64;
    centers
        .iter()
        .map(|&c| {
            (0..=max_m)
                .map(|m| {
                    let r = (1i64 << m) - ball.shift() as i64;
                    let lo = (c as i64 - r).max(0) as usize;
                    let hi = (c as i64 + r).min(side - 1) as usize;
                    prefix[hi + 1] - prefix[lo]
                })
                .collect()
        })
        .collect()
}

/// Concentration ratios `sup_x |A ∩ B(x, r)| / (δ^{2-ε}(r/δ)^α)` over occupied centers,
/// plus the mass ratio `|A| / δ^{2-α+ε}`.
///
/// Restricting centers to occupied cells loses at most a factor 4 against arbitrary centers.
pub fn verify_set_class(a: &CellSet, alpha: f64, eps: f64) -> RegularityReport {
    let scale = a.scale();
    let delta = scale.delta();
    let max_m = scale.k() + 1;
    let centers: Vec<CellIndex> = a.iter().collect();
    let profiles = disc_profiles(a, &centers, max_m, Ball::Open);
    let per_scale_ratio = (0..=max_m)
        .map(|m| {
            let worst = profiles.iter().map(|p| p[m as usize]).max().unwrap_or(0);
            let rel = (m as f64).exp2();
            (delta * rel, worst as f64 * delta.powf(eps) / rel.powf(alpha))
        })
        .collect();
    finish_report(per_scale_ratio, a.len() as f64 * delta.powf(alpha - eps), scale)
}

/// [`verify_set_class`] for a sparse set; small sets are scanned pairwise.
pub fn verify_sparse_class(a: &SparseCells, alpha: f64, eps: f64) -> RegularityReport {
    if a.len() > 2048 {
        return verify_set_class(&a.to_cellset(), alpha, eps);
    }
    let scale = a.scale;
    let delta = scale.delta();
    let max_m = scale.k() + 1;
    let cells: Vec<CellIndex> = a.cells().collect();
    let profiles = brute_profiles(&cells, &cells, max_m, Ball::Open);
    let per_scale_ratio = (0..=max_m)
        .map(|m| {
            let worst = profiles.iter().map(|p| p[m as usize]).max().unwrap_or(0);
            let rel = (m as f64).exp2();
            (delta * rel, worst as f64 * delta.powf(eps) / rel.powf(alpha))
        })
        .collect();
    finish_report(per_scale_ratio, a.len() as f64 * delta.powf(alpha - eps), scale)
}

/// 1-D version: ratios `sup_x |A ∩ B(x, r)| / (δ^{1-ε}(r/δ)^α)` and mass `|A| / δ^{1-α+ε}`.
pub fn verify_set_class_1d(a: &CellSet1, alpha: f64, eps: f64) -> RegularityReport {
    let scale = a.scale();
    let delta = scale.delta();
    let max_m = scale.k() + 1;
    let centers: Vec<u32> = a.iter().collect();
    let profiles = interval_profiles(a, &centers, max_m, Ball::Open);
    let per_scale_ratio = (0..=max_m)
        .map(|m| {
            let worst = profiles.iter().map(|p| p[m as usize]).max().unwrap_or(0);
            let rel = (m as f64).exp2();
            (delta * rel, worst as f64 * delta.powf(eps) / rel.powf(alpha))
        })
        .collect();
    finish_report(per_scale_ratio, a.len() as f64 * delta.powf(alpha - eps), scale)
}

fn finish_report(per_scale_ratio: Vec<(f64, f64)>, mass_ratio: f64, scale: Scale) -> RegularityReport {
    let max_ratio = per_scale_ratio.iter().map(|p| p.1).fold(0.0, f64::max);
    RegularityReport {
        per_scale_ratio,
        mass_ratio,
        polylog_budget: minimal_budget(max_ratio, mass_ratio, scale.log2_inv_delta()),
    }
}

/// Output of [`frostman_extract`].
#[derive(Clone, Debug, PartialEq)]
pub struct FrostmanResult {
    pub set: CellSet,
    /// `|A*| / δ^{2-α}`.
    pub mass_ratio: f64,
}

fn cap(m: u32, alpha: f64) -> usize {
    ((m as f64 * alpha).exp2() - 1e-9).ceil() as usize
}

/// Greedy coarse-to-fine pruning: for every canonical dyadic square of side `δ·2^m`
/// keep at most `⌈2^{mα}⌉` cells, retaining the lexicographically smallest.
pub fn frostman_extract(a: &CellSet, alpha: f64) -> FrostmanResult {
    let scale = a.scale();
    let cells = frostman_extract_cells(a.cells_lex(), scale, alpha);
    let set = CellSet::from_cells(scale, cells);
    let mass_ratio = set.len() as f64 * scale.delta().powf(alpha);
    FrostmanResult { set, mass_ratio }
}

/// The pruning of [`frostman_extract`] on an explicit cell list, retaining cells in list order.
pub fn frostman_extract_cells(mut cells: Vec<CellIndex>, scale: Scale, alpha: f64) -> Vec<CellIndex> {
    for m in (0..=scale.k() + 3).rev() {
        let limit = cap(m, alpha);
        let mut counts: HashMap<(u32, u32), usize> = HashMap::new();
        cells.retain(|c| {
            let n = counts.entry((c.i >> m, c.j >> m)).or_insert(0);
            *n += 1;
            *n <= limit
        });
    }
    cells
}

/// Fine-to-coarse variant of [`frostman_extract_cells`] with the same caps. Pruning the
/// small squares first keeps mass spread along the input, where coarse-to-fine keeps a
/// prefix at the top level and then thins it at every finer one.
pub fn frostman_prune_fine_first(mut cells: Vec<CellIndex>, scale: Scale, alpha: f64) -> Vec<CellIndex> {
    for m in 0..=scale.k() + 3 {
        let limit = cap(m, alpha);
        let mut counts: HashMap<(u32, u32), usize> = HashMap::new();
        cells.retain(|c| {
            let n = counts.entry((c.i >> m, c.j >> m)).or_insert(0);
            *n += 1;
            *n <= limit
        });
    }
    cells
}

/// 1-D Frostman pruning with caps `⌈2^{mα}⌉` per dyadic interval.
pub fn frostman_extract_1d(a: &CellSet1, alpha: f64) -> CellSet1 {
    let scale = a.scale();
    let mut cells: Vec<u32> = a.iter().collect();
    for m in (0..=scale.k() + 3).rev() {
        let limit = cap(m, alpha);
        let mut counts: HashMap<u32, usize> = HashMap::new();
        cells.retain(|&i| {
            let n = counts.entry(i >> m).or_insert(0);
            *n += 1;
            *n <= limit
        });
    }
    CellSet1::from_cells(scale, cells)
}

/// Frostman pruning in line space: lines are binned by `(⌊θ/δ⌋, ⌊(s+4)/δ⌋)` and each
/// dyadic parameter box of side `δ·2^m` keeps at most `⌈2^{mβ}⌉` lines, in input order.
pub fn frostman_extract_lines<T: Scalar>(lines: &[Line<T>], scale: Scale, beta: f64) -> Vec<Line<T>> {
    let delta = scale.delta();
    let key = |l: &Line<T>| {
        (
            (l.theta().as_f64() / delta).floor().max(0.0) as u64,
            ((l.offset().as_f64() + 4.0) / delta).floor().max(0.0) as u64,
        )
    };
    let mut kept: Vec<Line<T>> = lines.to_vec();
    for m in (0..=scale.k() + 3).rev() {
        let limit = cap(m, beta);
        let mut counts: HashMap<(u64, u64), usize> = HashMap::new();
        kept.retain(|l| {
            let (a, b) = key(l);
            let n = counts.entry((a >> m, b >> m)).or_insert(0);
            *n += 1;
            *n <= limit
        });
    }
    kept
}

/// One concentrated part `E**_{δ′}` with its covering witnesses.
#[derive(Clone, Debug, PartialEq)]
pub struct ConcentratedPart {
    pub delta_prime: f64,
    /// Threshold on cell counts: `δ^{-η}(δ′/δ)^s`.
    pub threshold: f64,
    pub cells: CellSet,
    /// Centers of the greedy `5r`-cover: pairwise center distance `> 2δ′/5`, every cell within `δ′`.
    pub greedy_centers: Vec<CellIndex>,
    /// Canonical dyadic `δ′`-squares meeting the part.
    pub squares: Vec<(u32, u32)>,
    /// `⌈δ^η·δ′^{-s}⌉`.
    pub nominal_count: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RefinementCertificate {
    /// `measure(E) ≤ δ^{2-s}·L` (the size hypothesis; violations only warn).
    pub hypothesis_holds: bool,
    /// `E ⊆ E* ∪ E** ⊆ E^(δ)`.
    pub inclusions_hold: bool,
    /// Every greedy cover covers its part and is `2δ′/5`-separated.
    pub covers_valid: bool,
    /// `M · threshold ≤ 36·|E^(δ)|` for every part (disjoint-ball packing count).
    pub packing_bound_holds: bool,
    /// `M ≤ ⌈δ^η δ′^{-s}⌉·L` for every part.
    pub nominal_covering_holds: bool,
    /// `(r, sup_{x∈E*} |E* ∩ B(x,r)| / threshold(r))` for dyadic `r ∈ [δ, 2]`.
    pub e_star_ratios: Vec<(f64, f64)>,
    /// Ratios at `r ≤ 1` are at most `4^s`.
    pub e_star_nonconcentration_holds: bool,
    /// `|E*| / δ^{2-s+η}`, reported only.
    pub e_star_mass_ratio: f64,
}

impl RefinementCertificate {
    /// All hard postconditions (the size hypothesis and nominal covering count are advisory).
    pub fn holds(&self) -> bool {
        self.inclusions_hold && self.covers_valid && self.packing_bound_holds && self.e_star_nonconcentration_holds
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RefinementSplit {
    pub s: f64,
    pub eta: f64,
    pub e_delta: CellSet,
    pub e_star: CellSet,
    pub e_double_star: Vec<ConcentratedPart>,
    pub certificate: RefinementCertificate,
}

#[derive(Serialize, Deserialize)]
struct PartJson {
    delta_prime: f64,
    threshold: f64,
    cells: CellSetJson,
    greedy_centers: Vec<[u32; 2]>,
    squares: Vec<[u32; 2]>,
    nominal_count: u64,
}

#[derive(Serialize, Deserialize)]
struct SplitJson {
    s: f64,
    eta: f64,
    e_star: CellSetJson,
    e_double_star: Vec<PartJson>,
    certificate: RefinementCertificate,
}

impl RefinementSplit {
    pub fn e_double_star_union(&self) -> CellSet {
        let mut u = CellSet::empty(self.e_star.scale());
        for p in &self.e_double_star {
            u = u.union(&p.cells).expect("same scale");
        }
        u
    }

    pub fn to_json_string(&self) -> Result<String> {
        let json = SplitJson {
            s: self.s,
            eta: self.eta,
            e_star: self.e_star.to_json(),
            e_double_star: self
                .e_double_star
                .iter()
                .map(|p| PartJson {
                    delta_prime: p.delta_prime,
                    threshold: p.threshold,
                    cells: p.cells.to_json(),
                    greedy_centers: p.greedy_centers.iter().map(|c| [c.i, c.j]).collect(),
                    squares: p.squares.iter().map(|&(a, b)| [a, b]).collect(),
                    nominal_count: p.nominal_count,
                })
                .collect(),
            certificate: self.certificate.clone(),
        };
        Ok(serde_json::to_string(&json)?)
    }
}

/// Greedy `5r` selection: take a cell when no chosen center lies within `2ρ/5`.
fn greedy_cover(cells: &[CellIndex], scale: Scale, rho: f64) -> Vec<CellIndex> {
    let sep = 2.0 * rho / 5.0;
    let bucket = |c: &CellIndex| {
        let p = scale.center(*c);
        ((p.x / sep).floor() as i64, (p.y / sep).floor() as i64)
    };
    let mut grid: HashMap<(i64, i64), Vec<CellIndex>> = HashMap::new();
    let mut chosen = Vec::new();
    for c in cells {
        let (bx, by) = bucket(c);
        let p = scale.center(*c);
        let near = (-1..=1).any(|dx| {
            (-1..=1).any(|dy| {
                grid.get(&(bx + dx, by + dy))
                    .is_some_and(|v| v.iter().any(|q| scale.center(*q).dist(p) <= sep))
            })
        });
        if !near {
            grid.entry((bx, by)).or_default().push(*c);
            chosen.push(*c);
        }
    }
    chosen
}

fn cover_is_valid(cells: &[CellIndex], centers: &[CellIndex], scale: Scale, rho: f64) -> bool {
    let sep = 2.0 * rho / 5.0;
    let pts: Vec<_> = centers.iter().map(|c| scale.center(*c)).collect();
    for (a, p) in pts.iter().enumerate() {
        if pts[a + 1..].iter().any(|q| q.dist(*p) <= sep) {
            return false;
        }
    }
    let covered = CellSet::from_cells(scale, centers.iter().copied());
    cells.iter().all(|c| covered.ball_cells(scale.center(*c), rho * (1.0 + 1e-12)) > 0)
}

/// Splits `E` into a regular part `E*` and concentrated parts `E**_{δ′}`, dyadic `δ′ ∈ [2δ, 2]`,
/// and certifies the three postconditions.
pub fn refine_split(e: &CellSet, s: f64, eta: f64) -> RefinementSplit {
    let scale = e.scale();
    let delta = scale.delta();
    let k = scale.k();
    let log = scale.log2_inv_delta();
    let e_delta = e.neighborhood(delta).expect("δ is at resolution");
    let centers: Vec<CellIndex> = e_delta.iter().collect();
    let profiles = disc_profiles(&e_delta, &centers, k + 1, Ball::Closed);
    let threshold = |m: u32| delta.powf(-eta) * (m as f64 * s).exp2();

    let mut parts = Vec::new();
    let mut ds_union = CellSet::empty(scale);
    for m in 1..=k + 1 {
        let thr = threshold(m);
        let cells: Vec<CellIndex> = centers
            .iter()
            .zip(&profiles)
            .filter(|(_, p)| p[m as usize] as f64 >= thr)
            .map(|(c, _)| *c)
            .collect();
        let rho = delta * (m as f64).exp2();
        let set = CellSet::from_cells(scale, cells.iter().copied());
        ds_union = ds_union.union(&set).expect("same scale");
        let greedy_centers = greedy_cover(&cells, scale, rho);
        let squares = set.dyadic_blocks(m).into_iter().map(|(b, _)| b).collect();
        parts.push(ConcentratedPart {
            delta_prime: rho,
            threshold: thr,
            cells: set,
            greedy_centers,
            squares,
            nominal_count: (delta.powf(eta) * rho.powf(-s)).ceil() as u64,
        });
    }

    let regular = e.difference(&ds_union).expect("same scale");
    let e_star = regular.neighborhood(delta).expect("δ is at resolution");

    let inclusions_hold = e.is_subset(&e_star.union(&ds_union).expect("same scale"))
        && e_star.is_subset(&e_delta)
        && ds_union.is_subset(&e_delta);
    let covers_valid = parts.iter().all(|p| {
        let cells: Vec<CellIndex> = p.cells.iter().collect();
        cover_is_valid(&cells, &p.greedy_centers, scale, p.delta_prime)
    });
    let packing_bound_holds =
        parts.iter().all(|p| p.greedy_centers.len() as f64 * p.threshold <= 36.0 * e_delta.len() as f64);
    let nominal_covering_holds =
        parts.iter().all(|p| p.greedy_centers.len() as f64 <= p.nominal_count as f64 * log);

    let star_centers: Vec<CellIndex> = e_star.iter().collect();
    let star_profiles = disc_profiles(&e_star, &star_centers, k + 1, Ball::Closed);
    let e_star_ratios: Vec<(f64, f64)> = (0..=k + 1)
        .map(|m| {
            let worst = star_profiles.iter().map(|p| p[m as usize]).max().unwrap_or(0);
            (delta * (m as f64).exp2(), worst as f64 / threshold(m))
        })
        .collect();
    let bound = 4f64.powf(s) * (1.0 + 1e-12);
    let e_star_nonconcentration_holds = e_star_ratios.iter().filter(|r| r.0 <= 1.0).all(|r| r.1 < bound);

    let certificate = RefinementCertificate {
        hypothesis_holds: e.measure() <= delta.powf(2.0 - s) * log,
        inclusions_hold,
        covers_valid,
        packing_bound_holds,
        nominal_covering_holds,
        e_star_ratios,
        e_star_nonconcentration_holds,
        e_star_mass_ratio: e_star.measure() / delta.powf(2.0 - s + eta),
    };
    RefinementSplit { s, eta, e_delta, e_star, e_double_star: parts, certificate }
}

/// One concentrated part of a 1-D split.
#[derive(Clone, Debug, PartialEq)]
pub struct ConcentratedPart1 {
    pub delta_prime: f64,
    pub threshold: f64,
    pub cells: CellSet1,
    /// Greedy cover centers (pairwise distance `> 2δ′/5`).
    pub greedy_centers: Vec<u32>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RefinementSplit1 {
    pub s: f64,
    pub eta: f64,
    pub e_star: CellSet1,
    pub e_double_star: Vec<ConcentratedPart1>,
    pub inclusions_hold: bool,
    /// `(r, sup_{x∈E*} |E* ∩ B(x,r)| / threshold(r))`.
    pub e_star_ratios: Vec<(f64, f64)>,
    pub e_star_nonconcentration_holds: bool,
}

/// The same split for subsets of the line, with thresholds `δ^{-η}(δ′/δ)^s` on cell counts.
pub fn refine_split_1d(e: &CellSet1, s: f64, eta: f64) -> RefinementSplit1 {
    let scale = e.scale();
    let delta = scale.delta();
    let k = scale.k();
    let e_delta = e.neighborhood(delta).expect("δ is at resolution");
    let centers: Vec<u32> = e_delta.iter().collect();
    let profiles = interval_profiles(&e_delta, &centers, k + 1, Ball::Closed);
    let threshold = |m: u32| delta.powf(-eta) * (m as f64 * s).exp2();
    let mut parts = Vec::new();
    let mut ds_union = CellSet1::empty(scale);
    for m in 1..=k + 1 {
        let thr = threshold(m);
        let cells: Vec<u32> =
            centers.iter().zip(&profiles).filter(|(_, p)| p[m as usize] as f64 >= thr).map(|(c, _)| *c).collect();
        let rho = delta * (m as f64).exp2();
        let sep = 2.0 * rho / 5.0;
        let mut greedy: Vec<u32> = Vec::new();
        for &c in &cells {
            // Cells are ascending, so only the last chosen center can be close.
            if greedy.last().is_none_or(|&g| (c - g) as f64 * delta > sep) {
                greedy.push(c);
            }
        }
        let set = CellSet1::from_cells(scale, cells);
        ds_union = ds_union.union(&set).expect("same scale");
        parts.push(ConcentratedPart1 { delta_prime: rho, threshold: thr, cells: set, greedy_centers: greedy });
    }
    let e_star = e.difference(&ds_union).neighborhood(delta).expect("δ is at resolution");
    let inclusions_hold = e.is_subset(&e_star.union(&ds_union).expect("same scale"))
        && e_star.is_subset(&e_delta)
        && ds_union.is_subset(&e_delta);
    let star_centers: Vec<u32> = e_star.iter().collect();
    let star_profiles = interval_profiles(&e_star, &star_centers, k + 1, Ball::Closed);
    let e_star_ratios: Vec<(f64, f64)> = (0..=k + 1)
        .map(|m| {
            let worst = star_profiles.iter().map(|p| p[m as usize]).max().unwrap_or(0);
            (delta * (m as f64).exp2(), worst as f64 / threshold(m))
        })
        .collect();
    let bound = 4f64.powf(s) * (1.0 + 1e-12);
    let e_star_nonconcentration_holds = e_star_ratios.iter().filter(|r| r.0 <= 1.0).all(|r| r.1 < bound);
    RefinementSplit1 { s, eta, e_star, e_double_star: parts, inclusions_hold, e_star_ratios, e_star_nonconcentration_holds }
}
