//! Executable replay of the incidence argument on a concrete instance.
//!
//! Each selection step (heavy points, the pair `y₁, y₂`, the split of `Ω`, strip
//! removal, dyadic localization, the projective image, `A*`, the interval family `𝒥`,
//! the dual set `F` and the final covering count) is carried out exactly on cells.
//! Every inequality the argument asserts is logged as measured value, model bound and
//! ratio. Only exact identities are treated as hard facts.

use crate::error::{Error, Result};
use crate::generators::FurstInstance;
use crate::grid::{CellIndex, CellSet, CellSet1, Scale, SparseCells};
use crate::linespace::{line_distance, Line, LineFamily, SlopeIntercept};
use crate::projective::{
    product_cap_ratio, product_projection, projection_probe, psi_pushforward, pushforward_certificate,
    DistortionCertificate, PsiImage,
};
use crate::regularity::refine_split_1d;
use crate::scalar::Point;
use crate::statistics::{gamma_measure, heavy_points, heavy_points_relative, relation, write_csv, StabIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashSet};
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};
use std::path::Path;

pub const DEFAULT_EPS: f64 = 0.01;

/// Names of the logged inequalities, in order. A completed run logs each exactly once.
pub const STAGES: [&str; 26] = [
    "e",
    "e1_nominal",
    "e1",
    "e2",
    "e1_strip",
    "omega_e2_sum",
    "omega1_sum",
    "e3_half",
    "omega1_horizontal_strip",
    "omega_prime_sum",
    "psi_stated_lower_violations",
    "a",
    "a_cap",
    "a_star_pullback",
    "a_star_fraction",
    "pullback_strip",
    "j_count",
    "j_min_lines",
    "mu_decay",
    "f_max_norm",
    "f_covering",
    "f_separation",
    "bilipschitz_max",
    "min_fiber",
    "certified_bound",
    "chain_estimate",
];
pub const DEFAULT_PAIR_SAMPLES: usize = 4096;
/// Lowest band height the projective image can be rasterized for inside the window.
pub const MIN_BAND_HEIGHT: f64 = 1.0 / 16.0;
/// Off-line tests (the strip around `y₁y₂` and the pair separation) never use a width
/// below this many cells: a thinner strip cannot be resolved on the grid and would make
/// every cell of the joining tube count as off-line.
pub const MIN_RADIUS_CELLS: f64 = 2.0;

pub fn grid_radius(delta: f64, eta: f64) -> f64 {
    delta.powf(eta).max(MIN_RADIUS_CELLS * delta)
}

/// Parameters of one run. The `η` constraints are enforced at construction; the `λ`s
/// are derived and reported only.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineParams {
    pub alpha: f64,
    pub gamma: f64,
    pub eps: f64,
    pub eta1: f64,
    pub eta2: f64,
    pub eta3: f64,
    pub eta4: f64,
    pub eta5: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
    pub lambda4: f64,
    pub pair_samples: usize,
    pub distortion_samples: usize,
    pub bilipschitz_pairs: usize,
    pub probe_directions: usize,
}

/// Smallest admissible `η₁..η₅`. Negative measured `γ` is treated as zero.
pub fn eta_floors(alpha: f64, gamma: f64, eps: f64) -> [f64; 5] {
    let g = gamma.max(0.0);
    let e1 = (12.0 * g + 8.0 * eps) / alpha;
    let e2 = (4.0 * g + 3.0 * eps) / alpha;
    let e3 = e1 + e2 + eps;
    let e4 = (6.0 * g + 5.0 * eps) / alpha;
    let e5 = 7.0 * g + alpha * e3 + 2.0 * e4 + 4.0 * eps;
    [e1, e2, e3, e4, e5]
}

impl PipelineParams {
    /// All `η`s at their floors.
    pub fn new(alpha: f64, gamma: f64, eps: f64) -> Result<Self> {
        Self::with_etas(alpha, gamma, eps, eta_floors(alpha, gamma, eps))
    }

    /// `γ` measured from the instance's pair counts.
    pub fn for_instance(inst: &FurstInstance, eps: f64) -> Result<Self> {
        Self::new(inst.alpha, gamma_measure(inst), eps)
    }

    pub fn with_etas(alpha: f64, gamma: f64, eps: f64, etas: [f64; 5]) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 0.5) {
            return Err(Error::InvalidParameter(format!("alpha must lie in (0, 1/2], got {alpha}")));
        }
        if !(eps > 0.0) || !gamma.is_finite() {
            return Err(Error::InvalidParameter(format!("need eps > 0 and finite gamma, got {eps}, {gamma}")));
        }
        let floors = eta_floors(alpha, gamma, eps);
        let names = ["(12γ+8ε)/α", "(4γ+3ε)/α", "η₁+η₂+ε", "(6γ+5ε)/α", "7γ+αη₃+2η₄+4ε"];
        // The later floors depend on the chosen η₃, η₄, so recompute them from `etas`.
        let g = gamma.max(0.0);
        let dependent = [
            floors[0],
            floors[1],
            etas[0] + etas[1] + eps,
            floors[3],
            7.0 * g + alpha * etas[2] + 2.0 * etas[3] + 4.0 * eps,
        ];
        for (n, (&e, &f)) in etas.iter().zip(&dependent).enumerate() {
            if e < f - 1e-12 * f.abs().max(1.0) {
                return Err(Error::InvalidParameter(format!("eta{} = {e} below its floor {} = {f}", n + 1, names[n])));
            }
        }
        let [eta1, eta2, eta3, eta4, eta5] = etas;
        Ok(Self {
            alpha,
            gamma,
            eps,
            eta1,
            eta2,
            eta3,
            eta4,
            eta5,
            lambda1: 7.0 * g + alpha * eta3 + 2.0 * eta4 + eta5 + 4.0 * eps,
            lambda2: 2.0 * eta3 + eps,
            lambda3: 6.0 * g + 4.0 * eps,
            lambda4: 7.0 * g + alpha * eta3 + 2.0 * eta4 + 4.0 * eps,
            pair_samples: DEFAULT_PAIR_SAMPLES,
            distortion_samples: 10_000,
            bilipschitz_pairs: 4096,
            probe_directions: 64,
        })
    }
}

/// One logged inequality: measured value against the model bound.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: String,
    pub measured: f64,
    pub predicted: f64,
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Orientation {
    /// Index of the `π/4` arc of directions kept, counted from `θ = 0`.
    pub arc: usize,
    pub rotated: bool,
    pub lines_kept: usize,
    pub lines_total: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairSelection {
    pub y1: CellIndex,
    pub y2: CellIndex,
    pub score: u64,
    pub candidates: usize,
    pub rejected_close: usize,
    /// Fraction of scored candidates whose score does not exceed the chosen one.
    pub dominated_fraction: f64,
}

/// `Ω = Ω_{B(y₁)} ⊔ Ω_{B(y₂)} ⊔ Ω′` with lines meeting both balls assigned to the first part.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OmegaSplit {
    pub ball1: Vec<u32>,
    pub ball2: Vec<u32>,
    pub neither: Vec<u32>,
    pub meeting_both: usize,
    /// Lines meeting both balls whose `R_ω` still meets `E₂`.
    pub meeting_both_hit_e2: usize,
    pub partition_exact: bool,
    /// `Σ|R_ω ∩ E₂|` over lines missing `B(y₁)` and over lines missing `B(y₂)`, in cells.
    pub side_sums: [u64; 2],
    /// 1 or 2.
    pub chosen: u8,
}

/// Cell-aligned frame with the chosen point's lower-left corner at the origin,
/// optionally reflected in the horizontal axis.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalFrame {
    pub scale: Scale,
    pub origin: CellIndex,
    pub reflect: bool,
}

impl LocalFrame {
    pub fn cell(&self, c: CellIndex) -> Option<CellIndex> {
        let n = self.scale.side() as i64;
        let i = c.i as i64 - self.origin.i as i64 + n / 2;
        let mut j = c.j as i64 - self.origin.j as i64 + n / 2;
        if self.reflect {
            j = n - 1 - j;
        }
        ((0..n).contains(&i) && (0..n).contains(&j)).then(|| CellIndex::new(i as u32, j as u32))
    }

    pub fn point(&self, p: Point<f64>) -> Point<f64> {
        let t = self.scale.corner(self.origin);
        let q = p - t;
        if self.reflect {
            Point::new(q.x, -q.y)
        } else {
            q
        }
    }

    pub fn line(&self, l: &Line<f64>) -> Result<SlopeIntercept<f64>> {
        let t = self.scale.corner(self.origin);
        let moved = Line::new(l.theta(), l.offset() - l.normal().dot(t));
        let si = moved.to_slope_intercept()?;
        Ok(if self.reflect { SlopeIntercept { a: -si.a, b: si.b } } else { si })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Localization {
    pub frame: LocalFrame,
    pub y0: f64,
    pub b0: f64,
    pub b_negative: bool,
    pub y_negative: bool,
    pub y0_in_range: bool,
    pub b0_in_range: bool,
    /// `Σ_{Ω₁}|R_ω ∩ E₃|`, the chosen intercept band's share, and the number of non-empty bands.
    pub total_e3: u64,
    pub band_sum_e3: u64,
    pub b_bands: usize,
    /// `Σ_{Ω′}|R_ω ∩ E′|` and the number of non-empty height bands.
    pub band_sum: u64,
    pub y_bands: usize,
    /// Cells of `E₃` not in any admissible height band.
    pub unassigned_cells: u64,
    /// `band_sum_e3·b_bands ≥ total_e3` and `band_sum·y_bands ≥ band_sum_e3`.
    pub pigeonhole_exact: bool,
    /// `band_sum·(3 log₂(1/δ))² ≥ total_e3`.
    pub pigeonhole_polylog: bool,
    pub clipped_cells: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntervalSelection {
    /// Cells of `A*` (scale `δ`) picked as `𝒥`.
    pub intervals: Vec<u32>,
    /// Distinct `ω ∈ Ω′` whose `R_ω ∩ E′` pulls back into each chosen interval.
    pub line_counts: Vec<u64>,
    pub mass: Vec<u64>,
    pub total_mass: u64,
    pub candidate_count: usize,
    /// `2·Σ_𝒥 mass ≥ total`.
    pub half_mass_exact: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DualSet {
    pub points: Vec<Point<f64>>,
    pub covering_number: u64,
    pub min_separation: f64,
    pub max_norm: f64,
    pub bilipschitz_pairs: u64,
    pub bilipschitz_min: f64,
    pub bilipschitz_max: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FiberRecord {
    pub x0: f64,
    pub fiber_size: u64,
    pub projection_count: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FinalAccounting {
    pub fibers: Vec<FiberRecord>,
    /// `|A′|·min_{x₀} N_δ(Π_{x₀}F_{x₀})`.
    pub aggregate_count: u64,
    /// `δ^{2+3η₄+4η₃}·aggregate`, the chain with all implicit constants set to 1.
    pub chain_estimate: f64,
    /// Intersection points `ω ∩ ℓ_{x₀}` and the distance radius used for the certified bound.
    pub intersection_points: u64,
    pub certified_radius: f64,
    pub certified_squares: u64,
    /// `δ²·N_δ(S_D)/(2D/δ+2)²`, a rigorous lower bound for `|E|`.
    pub certified_bound: f64,
    pub e_measure: f64,
    pub sound: bool,
    /// `log_δ` of the certified bound and of `|E|`.
    pub certified_exponent: f64,
    pub actual_exponent: f64,
    /// `2 − 2α − log_δ|E|`, the deficiency implied by the measure alone.
    pub gamma_from_measure: f64,
    pub gamma_measured: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProjectionProbe {
    pub directions: Vec<Point<f64>>,
    pub counts: Vec<u64>,
    pub min_count: u64,
    pub f_covering: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Nesting {
    pub e1_in_e: bool,
    pub e2_in_e1: bool,
    pub e3_in_e2: bool,
    pub eprime_in_e3: bool,
    pub omega1_in_omega: bool,
    pub omega_prime_in_omega1: bool,
}

impl Nesting {
    pub fn holds(&self) -> bool {
        self.e1_in_e && self.e2_in_e1 && self.e3_in_e2 && self.eprime_in_e3 && self.omega1_in_omega && self.omega_prime_in_omega1
    }
}

/// Full record of one run. Sets are kept for artifact output but skipped in JSON.
#[derive(Clone, Debug, Serialize)]
pub struct PipelineTrace {
    pub params: PipelineParams,
    pub k: u32,
    pub seed: u64,
    pub orientation: Orientation,
    pub e_measure_input: f64,
    pub e_measure: f64,
    pub gamma_measured: f64,
    pub pair: PairSelection,
    pub split: OmegaSplit,
    pub omega1: Vec<u32>,
    pub localization: Localization,
    pub omega_prime: Vec<u32>,
    pub psi_target_k: u32,
    pub psi_clipped: u64,
    pub slope_in_range_fraction: f64,
    pub distortion: DistortionCertificate,
    pub a_star_inclusions_hold: bool,
    pub a_star_nonconcentration_holds: bool,
    pub selection: IntervalSelection,
    pub mu_decay_max_ratio: f64,
    pub dual: DualSet,
    pub accounting: FinalAccounting,
    pub probe: ProjectionProbe,
    pub nesting: Nesting,
    pub stages: Vec<StageRecord>,
    #[serde(skip)]
    pub e1: CellSet,
    #[serde(skip)]
    pub e2: CellSet,
    #[serde(skip)]
    pub e3: CellSet,
    #[serde(skip)]
    pub e_prime: CellSet,
    #[serde(skip)]
    pub psi_image: PsiImage,
    #[serde(skip)]
    pub a: CellSet1,
    #[serde(skip)]
    pub a_star: CellSet1,
}

impl PipelineTrace {
    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// `trace.json`, `stages.csv`, binary cell sets for `E₁, E₂, E₃, E′`, the ψ-image,
    /// and `A`, `A*` as JSON index lists.
    pub fn write_artifacts(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("trace.json"), self.to_json_string()?)?;
        write_csv(&dir.join("stages.csv"), &self.stages)?;
        for (name, set) in [("e1", &self.e1), ("e2", &self.e2), ("e3", &self.e3), ("e_prime", &self.e_prime)] {
            set.write_binary(&dir.join(format!("{name}.bin")))?;
        }
        std::fs::write(dir.join("psi_image.bin"), self.psi_image.to_bytes())?;
        for (name, set) in [("a", &self.a), ("a_star", &self.a_star)] {
            let json = serde_json::json!({ "k": set.scale().k(), "cells": set.iter().collect::<Vec<u32>>() });
            std::fs::write(dir.join(format!("{name}.json")), serde_json::to_string(&json)?)?;
        }
        Ok(())
    }
}

struct Log {
    stages: Vec<StageRecord>,
}

impl Log {
    fn push(&mut self, stage: &str, measured: f64, predicted: f64) {
        let ratio = if predicted != 0.0 { measured / predicted } else { f64::NAN };
        self.stages.push(StageRecord { stage: stage.to_string(), measured, predicted, ratio });
    }
}

fn degenerate(stage: &str) -> Error {
    Error::Degenerate(stage.to_string())
}

/// Keeps the lines in the most populated `π/4` arc of directions and rotates by `π/2`
/// when that arc is not already within `π/4` of the vertical.
pub fn orient(inst: &FurstInstance) -> (FurstInstance, Orientation) {
    let mut counts = [0usize; 4];
    let arc_of = |l: &Line<f64>| ((l.theta() / FRAC_PI_4).floor() as usize).min(3);
    for l in &inst.omega.lines {
        counts[arc_of(l)] += 1;
    }
    let arc = (0..4).max_by_key(|&a| (counts[a], std::cmp::Reverse(a))).unwrap_or(1);
    let rotated = arc == 0 || arc == 3;
    let scale = inst.scale;
    let n = scale.side();
    let rot = |c: CellIndex| if rotated { CellIndex::new(n - 1 - c.j, c.i) } else { c };
    let mut lines = Vec::new();
    let mut r_sets = Vec::new();
    for (l, r) in inst.omega.lines.iter().zip(&inst.r_sets) {
        if arc_of(l) != arc {
            continue;
        }
        lines.push(if rotated { Line::new(l.theta() + FRAC_PI_2, l.offset()) } else { *l });
        r_sets.push(if rotated { SparseCells::from_cells(scale, r.cells().map(rot)) } else { r.clone() });
    }
    let mut e_union = CellSet::empty(scale);
    for r in &r_sets {
        for c in r.cells() {
            e_union.insert(c);
        }
    }
    let orientation = Orientation { arc, rotated, lines_kept: lines.len(), lines_total: inst.omega.len() };
    let oriented = FurstInstance {
        omega: LineFamily::new(scale, lines, inst.beta),
        r_sets,
        e_union,
        ..inst.clone()
    };
    (oriented, orientation)
}

struct Ctx<'a> {
    inst: &'a FurstInstance,
    index: StabIndex,
    /// Ranks of the cells of each `R_ω`.
    r_ranks: Vec<Vec<u32>>,
    centers: Vec<Point<f64>>,
}

impl<'a> Ctx<'a> {
    fn new(inst: &'a FurstInstance, index: StabIndex) -> Self {
        let r_ranks = inst
            .r_sets
            .par_iter()
            .map(|r| r.ids().iter().map(|&id| index.rank_of_id(id).expect("cell of E") as u32).collect())
            .collect();
        let centers = (0..index.cell_count()).map(|x| inst.scale.center(index.cell(x))).collect();
        Self { inst, index, r_ranks, centers }
    }

    fn mask(&self, set: &CellSet) -> Vec<bool> {
        (0..self.index.cell_count()).map(|x| set.contains(self.index.cell(x))).collect()
    }

    fn set_of(&self, ranks: impl Iterator<Item = usize>) -> CellSet {
        CellSet::from_cells(self.inst.scale, ranks.map(|x| self.index.cell(x)))
    }

    fn mass(&self, w: usize, mask: &[bool]) -> u64 {
        self.r_ranks[w].iter().filter(|&&x| mask[x as usize]).count() as u64
    }
}

/// Witness `x₀` ranks for the pair `(y₁, y₂)`: `x₀ ∈ E₁`, related to both, and outside
/// the open `w`-neighborhood of the line through them.
#[allow(clippy::too_many_arguments)]
fn pair_witnesses(
    ctx: &Ctx,
    in_e1: &[bool],
    y1: usize,
    y2: usize,
    w: f64,
    stamp1: &mut [u32],
    stamp2: &mut [u32],
    tag: u32,
    out: Option<&mut Vec<u32>>,
) -> u64 {
    let strip = Line::through(ctx.centers[y1], ctx.centers[y2]).expect("distinct cells");
    for &om in ctx.index.stab(y1) {
        for &x in &ctx.r_ranks[om as usize] {
            stamp1[x as usize] = tag;
        }
    }
    let mut count = 0;
    let mut out = out;
    for &om in ctx.index.stab(y2) {
        for &x in &ctx.r_ranks[om as usize] {
            let xi = x as usize;
            if stamp1[xi] == tag && stamp2[xi] != tag {
                stamp2[xi] = tag;
                if in_e1[xi] && strip.distance_to_point(ctx.centers[xi]) >= w {
                    count += 1;
                    if let Some(o) = out.as_deref_mut() {
                        o.push(x);
                    }
                }
            }
        }
    }
    count
}

/// Seeded search for `(y₁, y₂)`: candidates are drawn by picking `x₀ ∈ E₁` and two
/// points related to it, which samples pairs in proportion to their triple count.
fn select_pair(ctx: &Ctx, in_e1: &[bool], params: &PipelineParams, rng: &mut ChaCha8Rng) -> Result<(PairSelection, Vec<u32>)> {
    let delta = ctx.inst.scale.delta();
    let sep = grid_radius(delta, params.eta2);
    let w1 = grid_radius(delta, params.eta1);
    let e1: Vec<usize> = (0..in_e1.len()).filter(|&x| in_e1[x]).collect();
    let draw_related = |rng: &mut ChaCha8Rng, x0: usize| -> usize {
        let stab = ctx.index.stab(x0);
        let cells = &ctx.r_ranks[stab[rng.gen_range(0..stab.len())] as usize];
        cells[rng.gen_range(0..cells.len())] as usize
    };
    let mut candidates = Vec::with_capacity(params.pair_samples);
    let mut rejected_close = 0;
    for _ in 0..params.pair_samples {
        let x0 = e1[rng.gen_range(0..e1.len())];
        let (y1, y2) = (draw_related(rng, x0), draw_related(rng, x0));
        if ctx.centers[y1].dist(ctx.centers[y2]) < sep || y1 == y2 {
            rejected_close += 1;
        } else {
            candidates.push((y1, y2));
        }
    }
    if candidates.is_empty() {
        return Err(degenerate("pair selection: no well-separated candidate pair"));
    }
    let n = ctx.index.cell_count();
    let scores: Vec<u64> = candidates
        .par_iter()
        .enumerate()
        .map_init(
            || (vec![0u32; n], vec![0u32; n]),
            |(s1, s2), (t, &(y1, y2))| pair_witnesses(ctx, in_e1, y1, y2, w1, s1, s2, t as u32 + 1, None),
        )
        .collect();
    let best = (0..scores.len()).max_by_key(|&t| (scores[t], std::cmp::Reverse(t))).expect("non-empty");
    if scores[best] == 0 {
        return Err(degenerate("pair selection: every candidate pair scores zero"));
    }
    let (y1, y2) = candidates[best];
    let mut e2 = Vec::new();
    let (mut s1, mut s2) = (vec![0u32; n], vec![0u32; n]);
    pair_witnesses(ctx, in_e1, y1, y2, w1, &mut s1, &mut s2, 1, Some(&mut e2));
    let dominated = scores.iter().filter(|&&s| s <= scores[best]).count() as f64 / scores.len() as f64;
    Ok((
        PairSelection {
            y1: ctx.index.cell(y1),
            y2: ctx.index.cell(y2),
            score: scores[best],
            candidates: candidates.len(),
            rejected_close,
            dominated_fraction: dominated,
        },
        e2,
    ))
}

/// Splits `Ω` by incidence with the open balls `B(yᵢ, δ^{η₃})` and picks the side that
/// avoids one ball and carries more of `E₂`.
pub fn split_omega(lines: &[Line<f64>], masses: &[u64], y1: Point<f64>, y2: Point<f64>, radius: f64) -> OmegaSplit {
    let (mut ball1, mut ball2, mut neither) = (Vec::new(), Vec::new(), Vec::new());
    let (mut meeting_both, mut meeting_both_hit_e2) = (0, 0);
    let mut side_sums = [0u64; 2];
    for (w, l) in lines.iter().enumerate() {
        let m1 = l.distance_to_point(y1) < radius;
        let m2 = l.distance_to_point(y2) < radius;
        if m1 && m2 {
            meeting_both += 1;
            if masses[w] > 0 {
                meeting_both_hit_e2 += 1;
            }
        }
        if !m1 {
            side_sums[0] += masses[w];
        }
        if !m2 {
            side_sums[1] += masses[w];
        }
        if m1 {
            ball1.push(w as u32);
        } else if m2 {
            ball2.push(w as u32);
        } else {
            neither.push(w as u32);
        }
    }
    let mut seen = vec![0u8; lines.len()];
    for &w in ball1.iter().chain(&ball2).chain(&neither) {
        seen[w as usize] += 1;
    }
    let partition_exact = seen.iter().all(|&c| c == 1);
    let chosen = if side_sums[0] >= side_sums[1] { 1 } else { 2 };
    OmegaSplit { ball1, ball2, neither, meeting_both, meeting_both_hit_e2, partition_exact, side_sums, chosen }
}

/// `𝒥`: intervals whose pulled-back mass is at least `total/(2M)`, so together they
/// keep at least half the mass.
pub fn select_intervals(mass: &[(u32, u64)]) -> Vec<u32> {
    let total: u64 = mass.iter().map(|m| m.1).sum();
    let m = mass.len() as u128;
    mass.iter().filter(|&&(_, w)| w > 0 && 2 * m * w as u128 >= total as u128).map(|&(i, _)| i).collect()
}

/// Rigorous lower bound `max_D δ²·N_δ(S_D)/(2D/δ+2)²` from points `p` each within
/// `d_p` of a cell center of the set: every counted square contains a point within `D`
/// of some center, and one center serves at most `(2D/δ+2)²` squares.
pub fn certified_measure_bound(points: &[(Point<f64>, f64)], delta: f64) -> (f64, f64, u64) {
    let mut order: Vec<&(Point<f64>, f64)> = points.iter().filter(|p| p.1.is_finite()).collect();
    order.sort_by(|a, b| a.1.total_cmp(&b.1));
    let mut squares = HashSet::new();
    let mut best = (0.0, 0.0, 0);
    for (n, &&(p, d)) in order.iter().enumerate() {
        squares.insert(((p.x / delta).floor() as i64, (p.y / delta).floor() as i64));
        if n + 1 < order.len() && order[n + 1].1 == d {
            continue;
        }
        let per_center = (2.0 * d / delta + 2.0).powi(2);
        let bound = delta * delta * squares.len() as f64 / per_center;
        if bound > best.0 {
            best = (bound, d, squares.len() as u64);
        }
    }
    best
}

fn point_covering(points: &[Point<f64>], delta: f64) -> u64 {
    let set: HashSet<(i64, i64)> =
        points.iter().map(|p| ((p.x / delta).floor() as i64, (p.y / delta).floor() as i64)).collect();
    set.len() as u64
}

fn min_separation(points: &[Point<f64>]) -> f64 {
    (0..points.len())
        .into_par_iter()
        .map(|i| points[i + 1..].iter().map(|q| points[i].dist(*q)).fold(f64::INFINITY, f64::min))
        .reduce(|| f64::INFINITY, f64::min)
}

/// Lifts a 1-d set to a (finer or coarser) level by covering each cell.
fn lift_1d(a: &CellSet1, to: Scale) -> CellSet1 {
    let (k1, k) = (a.scale().k(), to.k());
    let mut out = CellSet1::empty(to);
    for i in a.iter() {
        if k >= k1 {
            let f = 1u32 << (k - k1);
            for t in i * f..(i + 1) * f {
                out.insert(t);
            }
        } else {
            out.insert(i >> (k1 - k));
        }
    }
    out
}

/// Runs every stage on `inst`. Failed model bounds are recorded, not fatal; an empty
/// stage aborts with [`Error::Degenerate`].
pub fn run_pipeline(inst: &FurstInstance, params: &PipelineParams, seed: u64) -> Result<PipelineTrace> {
    if !(inst.alpha > 0.0 && inst.alpha <= 0.5) {
        return Err(Error::InvalidParameter(format!("alpha must lie in (0, 1/2], got {}", inst.alpha)));
    }
    let scale = inst.scale;
    let delta = scale.delta();
    let area = delta * delta;
    let (alpha, gamma, eps) = (params.alpha, params.gamma, params.eps);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut log = Log { stages: Vec::new() };

    let (work, orientation) = orient(inst);
    if work.r_sets.is_empty() {
        return Err(degenerate("orientation"));
    }
    let rel = relation(&work);
    let gamma_measured = rel.pairs.gamma_measured;
    let e_measure = work.e_union.measure();
    log.push("e", e_measure, delta.powf(2.0 - 2.0 * alpha - gamma));

    // Heavy points.
    let nominal = heavy_points(&work, &rel, gamma, eps);
    log.push("e1_nominal", nominal.set.measure(), nominal.predicted);
    let heavy = heavy_points_relative(&work, &rel, eps);
    if heavy.set.is_empty() {
        return Err(degenerate("E1"));
    }
    log.push("e1", heavy.set.measure(), heavy.predicted);
    let ctx = Ctx::new(&work, rel.index);
    let in_e1 = ctx.mask(&heavy.set);

    // The pair y₁, y₂ and E₂.
    let (pair, e2_ranks) = select_pair(&ctx, &in_e1, params, &mut rng)?;
    let e2 = ctx.set_of(e2_ranks.iter().map(|&x| x as usize));
    log.push("e2", e2.measure(), delta.powf(2.0 - 2.0 * alpha + 5.0 * gamma + 2.0 * eps));
    let (p1, p2) = (scale.center(pair.y1), scale.center(pair.y2));
    let strip = Line::through(p1, p2)?;
    let w1 = grid_radius(delta, params.eta1);
    let e1_in_strip = heavy.set.iter().filter(|&c| strip.distance_to_point(scale.center(c)) < w1).count();
    log.push(
        "e1_strip",
        e1_in_strip as f64 * area,
        delta.powf(2.0 - 2.0 * alpha - gamma - eps + params.eta1 * alpha / 2.0),
    );

    // Split of Ω.
    let in_e2 = ctx.mask(&e2);
    let masses: Vec<u64> = (0..work.r_sets.len()).map(|w| ctx.mass(w, &in_e2)).collect();
    let lines = &work.omega.lines;
    let split = split_omega(lines, &masses, p1, p2, delta.powf(params.eta3));
    let total_e2: u64 = masses.iter().sum();
    log.push("omega_e2_sum", total_e2 as f64 * area, delta.powf(gamma - alpha + eps) * e2.measure());
    let (chosen_y, avoid) = if split.chosen == 1 { (pair.y1, p1) } else { (pair.y2, p2) };
    let r3 = delta.powf(params.eta3);
    let omega1: Vec<u32> =
        (0..lines.len() as u32).filter(|&w| lines[w as usize].distance_to_point(avoid) >= r3).collect();
    let sum_omega1: u64 = omega1.iter().map(|&w| masses[w as usize]).sum();
    log.push("omega1_sum", sum_omega1 as f64 * area, delta.powf(2.0 - 3.0 * alpha + 6.0 * gamma + 3.0 * eps));
    if sum_omega1 == 0 {
        return Err(degenerate("Omega1"));
    }

    // Strip removal in the frame centred at the chosen point.
    let mut frame = LocalFrame { scale, origin: chosen_y, reflect: false };
    let w4 = delta.powf(params.eta4);
    let mut clipped = 0u64;
    let local_of = |frame: &LocalFrame, x: usize| frame.cell(ctx.index.cell(x));
    let in_e3: Vec<bool> = (0..in_e2.len())
        .map(|x| {
            if !in_e2[x] {
                return false;
            }
            if local_of(&frame, x).is_none() {
                clipped += 1;
                return false;
            }
            frame.point(ctx.centers[x]).y.abs() >= w4
        })
        .collect();
    let e3 = ctx.set_of((0..in_e3.len()).filter(|&x| in_e3[x]));
    if e3.is_empty() {
        return Err(degenerate("E3"));
    }
    log.push("e3_half", e3.measure(), e2.measure() / 2.0);
    let strip_mass: u64 = omega1
        .iter()
        .map(|&w| ctx.r_ranks[w as usize].iter().filter(|&&x| frame.point(ctx.centers[x as usize]).y.abs() < w4).count() as u64)
        .sum();
    log.push("omega1_horizontal_strip", strip_mass as f64 * area, delta.powf(2.0 - 3.0 * alpha + params.eta4 * alpha));

    // Intercept bands.
    let local_lines: Vec<Option<SlopeIntercept<f64>>> =
        omega1.iter().map(|&w| frame.line(&lines[w as usize]).ok()).collect();
    let masses3: Vec<u64> = omega1.iter().map(|&w| ctx.mass(w as usize, &in_e3)).collect();
    let total_e3: u64 = masses3.iter().sum();
    let mut b_bands: BTreeMap<(bool, i32), u64> = BTreeMap::new();
    for (n, si) in local_lines.iter().enumerate() {
        if let Some(si) = si.filter(|s| s.b != 0.0) {
            *b_bands.entry((si.b < 0.0, si.b.abs().log2().floor() as i32)).or_insert(0) += masses3[n];
        }
    }
    let (&b_key, &band_sum_e3) =
        b_bands.iter().max_by_key(|(k, v)| (**v, std::cmp::Reverse(**k))).ok_or_else(|| degenerate("intercept band"))?;
    if band_sum_e3 == 0 {
        return Err(degenerate("intercept band"));
    }
    let b0 = (b_key.1 as f64).exp2();
    let omega_prime: Vec<u32> = omega1
        .iter()
        .zip(&local_lines)
        .filter(|(_, si)| si.is_some_and(|s| s.b != 0.0 && (s.b < 0.0, s.b.abs().log2().floor() as i32) == b_key))
        .map(|(&w, _)| w)
        .collect();

    // Height bands.
    let mut in_prime_lines = vec![false; lines.len()];
    for &w in &omega_prime {
        in_prime_lines[w as usize] = true;
    }
    let half = scale.side() as i64 / 2;
    let band_of = |x: usize| -> Option<(bool, i32)> {
        let c = local_of(&frame, x)?;
        let row = c.j as i64 - half;
        let (neg, m) = if row >= 0 { (false, row) } else { (true, -row - 1) };
        if m == 0 {
            return None;
        }
        let j = 63 - (m as u64).leading_zeros() as i32 - scale.k() as i32;
        let y0 = (j as f64).exp2();
        (y0 >= MIN_BAND_HEIGHT.max(w4) && y0 <= 2.0).then_some((neg, j))
    };
    let bands: Vec<Option<(bool, i32)>> = (0..in_e3.len()).map(|x| if in_e3[x] { band_of(x) } else { None }).collect();
    let unassigned_cells = (0..in_e3.len()).filter(|&x| in_e3[x] && bands[x].is_none()).count() as u64;
    let mut y_bands: BTreeMap<(bool, i32), u64> = BTreeMap::new();
    for &w in &omega_prime {
        for &x in &ctx.r_ranks[w as usize] {
            if let Some(key) = bands[x as usize] {
                *y_bands.entry(key).or_insert(0) += 1;
            }
        }
    }
    let (&y_key, &band_sum) = y_bands
        .iter()
        .max_by_key(|(k, v)| (**v, std::cmp::Reverse(**k)))
        .ok_or_else(|| degenerate("height band"))?;
    let y0 = (y_key.1 as f64).exp2();
    frame.reflect = y_key.0;
    let in_eprime: Vec<bool> = (0..in_e3.len()).map(|x| bands[x] == Some(y_key)).collect();
    let e_prime = ctx.set_of((0..in_eprime.len()).filter(|&x| in_eprime[x]));
    let b_count = b_bands.values().filter(|&&v| v > 0).count();
    let y_count = y_bands.values().filter(|&&v| v > 0).count();
    let polylog = (3.0 * scale.log2_inv_delta()).powi(2);
    let localization = Localization {
        frame,
        y0,
        b0,
        b_negative: b_key.0,
        y_negative: y_key.0,
        y0_in_range: y0 >= w4 && y0 <= 2.0,
        b0_in_range: b0 >= delta.powf(params.eta3) && b0 <= 2.0,
        total_e3,
        band_sum_e3,
        b_bands: b_count,
        band_sum,
        y_bands: y_count,
        unassigned_cells,
        pigeonhole_exact: band_sum_e3 as u128 * b_count as u128 >= total_e3 as u128
            && band_sum as u128 * y_count as u128 >= band_sum_e3 as u128,
        pigeonhole_polylog: band_sum as f64 * polylog >= total_e3 as f64,
        clipped_cells: clipped,
    };
    log.push("omega_prime_sum", band_sum as f64 * area, delta.powf(2.0 - 3.0 * alpha + 6.0 * gamma + 3.0 * eps));

    // Projective image.
    let eprime_local = CellSet::from_cells(scale, e_prime.iter().filter_map(|c| frame.cell(c)));
    let psi_image = psi_pushforward(&eprime_local, y0).map_err(|e| match e {
        Error::NothingInBand(..) => degenerate("psi image"),
        other => other,
    })?;
    let prime_lines: Vec<SlopeIntercept<f64>> =
        omega_prime.iter().map(|&w| frame.line(&lines[w as usize])).collect::<Result<_>>()?;
    let slope_ok = prime_lines
        .iter()
        .filter(|s| {
            let m = 1.0 / s.b.abs();
            m >= 0.5 / b0 * (1.0 - 1e-12) && m <= 1.0 / b0 * (1.0 + 1e-12)
        })
        .count();
    let slope_in_range_fraction = slope_ok as f64 / prime_lines.len().max(1) as f64;
    let distortion = pushforward_certificate(&eprime_local, y0, params.distortion_samples, seed ^ 0x5eed)?;
    log.push("psi_stated_lower_violations", distortion.stated_lower_violations as f64, 0.0);

    // Column projection A and its regular part A*.
    let a = product_projection(&psi_image);
    log.push("a", a.measure(), psi_image.target_scale.delta() * delta.powf(-alpha - gamma));
    log.push("a_cap", product_cap_ratio(&a, &psi_image, alpha, gamma), 1.0);
    let a_k = lift_1d(&a, scale);
    let split_a = refine_split_1d(&a_k, alpha + gamma + 2.0 * params.eta4, params.eta5);
    let a_star = split_a.e_star.clone();

    // Pulled-back masses per δ-interval.
    let line_1d = CellSet1::empty(scale);
    let u_index: Vec<Option<u32>> = (0..in_eprime.len())
        .map(|x| {
            if !in_eprime[x] {
                return None;
            }
            let p = frame.point(ctx.centers[x]);
            line_1d.cell_of(p.x / p.y)
        })
        .collect();
    let mut mass_of: BTreeMap<u32, u64> = BTreeMap::new();
    let mut lines_of: BTreeMap<u32, u64> = BTreeMap::new();
    let mut total_all = 0u64;
    let mut max_strip = 0u64;
    for &w in &omega_prime {
        let mut per: BTreeMap<u32, u64> = BTreeMap::new();
        for &x in &ctx.r_ranks[w as usize] {
            if let Some(u) = u_index[x as usize] {
                total_all += 1;
                if a_star.contains(u) {
                    *per.entry(u).or_insert(0) += 1;
                }
            }
        }
        for (u, c) in per {
            *mass_of.entry(u).or_insert(0) += c;
            *lines_of.entry(u).or_insert(0) += 1;
            max_strip = max_strip.max(c);
        }
    }
    let total_star: u64 = mass_of.values().sum();
    log.push("a_star_pullback", total_star as f64 * area, delta.powf(2.0 - 3.0 * alpha + 6.0 * gamma + 3.0 * eps));
    log.push("a_star_fraction", total_star as f64, total_all as f64);
    log.push(
        "pullback_strip",
        max_strip as f64 * area,
        delta.powf(2.0 - alpha) * (delta.powf(-params.eta3) * delta).powf(alpha),
    );
    let candidates: Vec<(u32, u64)> = a_star.iter().map(|u| (u, mass_of.get(&u).copied().unwrap_or(0))).collect();
    let intervals = select_intervals(&candidates);
    if intervals.is_empty() {
        return Err(degenerate("interval selection"));
    }
    let chosen_mass: Vec<u64> = intervals.iter().map(|u| mass_of[u]).collect();
    let line_counts: Vec<u64> = intervals.iter().map(|u| lines_of[u]).collect();
    let selection = IntervalSelection {
        half_mass_exact: 2 * chosen_mass.iter().sum::<u64>() >= total_star,
        intervals,
        line_counts,
        mass: chosen_mass,
        total_mass: total_star,
        candidate_count: candidates.len(),
    };
    log.push("j_count", selection.intervals.len() as f64, delta.powf(-alpha + 6.0 * gamma + alpha * params.eta3 + 3.0 * eps));
    log.push(
        "j_min_lines",
        *selection.line_counts.iter().min().expect("non-empty") as f64,
        delta.powf(-2.0 * alpha + 7.0 * gamma + alpha * params.eta3 + 2.0 * params.eta4 + 3.0 * eps),
    );

    // Decay of the uniform measure on ⋃𝒥.
    let j_cells = &selection.intervals;
    let mut mu_max = 0.0f64;
    for &i in j_cells {
        for m in 0..=scale.k() {
            let r_cells = 1i64 << m;
            let lo = j_cells.partition_point(|&c| (c as i64) < i as i64 - r_cells);
            let hi = j_cells.partition_point(|&c| (c as i64) <= i as i64 + r_cells);
            let mu = (hi - lo) as f64 / j_cells.len() as f64;
            let r = delta * r_cells as f64;
            mu_max = mu_max.max(mu / (delta.powf(eps - params.lambda1) * r.powf(alpha)));
        }
    }
    log.push("mu_decay", mu_max, 1.0);

    // Dual set F = φ(Ω′).
    let f_points: Vec<Point<f64>> = prime_lines.iter().map(|s| Point::new(1.0 / s.b, -s.a / s.b)).collect();
    let local_line_objs: Vec<Line<f64>> = prime_lines.iter().map(|s| s.to_line()).collect();
    let nf = f_points.len();
    let all_pairs = nf * nf.saturating_sub(1) / 2;
    let pairs: Vec<(usize, usize)> = if all_pairs <= params.bilipschitz_pairs {
        (0..nf).flat_map(|i| (i + 1..nf).map(move |j| (i, j))).collect()
    } else {
        (0..params.bilipschitz_pairs)
            .map(|_| loop {
                let (i, j) = (rng.gen_range(0..nf), rng.gen_range(0..nf));
                if i != j {
                    break (i, j);
                }
            })
            .collect()
    };
    let (mut bl_min, mut bl_max) = (f64::INFINITY, 0.0f64);
    for &(i, j) in &pairs {
        let r = f_points[i].dist(f_points[j]) / line_distance(&local_line_objs[i], &local_line_objs[j]);
        bl_min = bl_min.min(r);
        bl_max = bl_max.max(r);
    }
    let dual = DualSet {
        covering_number: point_covering(&f_points, delta),
        min_separation: min_separation(&f_points),
        max_norm: f_points.iter().map(|p| p.norm()).fold(0.0, f64::max),
        bilipschitz_pairs: pairs.len() as u64,
        bilipschitz_min: bl_min,
        bilipschitz_max: bl_max,
        points: f_points.clone(),
    };
    log.push("f_max_norm", dual.max_norm, delta.powf(-params.lambda2));
    log.push("f_covering", dual.covering_number as f64, delta.powf(-params.lambda3 - 2.0 * alpha));
    log.push("f_separation", dual.min_separation / delta, 1.0);
    log.push("bilipschitz_max", bl_max, delta.powf(-2.0 * params.eta3));

    // Final accounting over the fibers x₀ ∈ 𝒥.
    let reach = 4.0 * delta + delta * std::f64::consts::FRAC_1_SQRT_2;
    let prime_cells: Vec<Vec<Point<f64>>> = omega_prime
        .iter()
        .map(|&w| {
            ctx.r_ranks[w as usize].iter().filter(|&&x| in_eprime[x as usize]).map(|&x| frame.point(ctx.centers[x as usize])).collect()
        })
        .collect();
    type Fiber = (FiberRecord, Vec<(Point<f64>, f64)>);
    let per_fiber: Vec<Fiber> = selection
        .intervals
        .par_iter()
        .map(|&u| {
            let x0 = line_1d.center(u);
            let norm = (1.0 + x0 * x0).sqrt();
            let mut bins = Vec::new();
            let mut pts = Vec::new();
            for (n, cells) in prime_cells.iter().enumerate() {
                if !cells.iter().any(|c| (c.x - x0 * c.y).abs() / norm < reach) {
                    continue;
                }
                let f = f_points[n];
                bins.push(((f.x * x0 + f.y) / delta).floor() as i64);
                let s = prime_lines[n];
                if x0 != s.a {
                    let y = s.b / (x0 - s.a);
                    let p = Point::new(x0 * y, y);
                    let d = cells.iter().map(|c| c.dist(p)).fold(f64::INFINITY, f64::min);
                    pts.push((p, d));
                }
            }
            let fiber_size = bins.len() as u64;
            bins.sort_unstable();
            bins.dedup();
            (FiberRecord { x0, fiber_size, projection_count: bins.len() as u64 }, pts)
        })
        .collect();
    let fibers: Vec<FiberRecord> = per_fiber.iter().map(|f| f.0.clone()).collect();
    let points: Vec<(Point<f64>, f64)> = per_fiber.into_iter().flat_map(|f| f.1).collect();
    let min_proj = fibers.iter().map(|f| f.projection_count).min().unwrap_or(0);
    let aggregate_count = fibers.len() as u64 * min_proj;
    let (certified_bound, certified_radius, certified_squares) = certified_measure_bound(&points, delta);
    let e_true = inst.e_union.measure();
    let ln_d = delta.ln();
    let actual_exponent = e_true.ln() / ln_d;
    let accounting = FinalAccounting {
        aggregate_count,
        chain_estimate: delta.powf(2.0 + 3.0 * params.eta4 + 4.0 * params.eta3) * aggregate_count as f64,
        intersection_points: points.len() as u64,
        certified_radius,
        certified_squares,
        certified_bound,
        e_measure: e_true,
        sound: certified_bound <= e_true,
        certified_exponent: if certified_bound > 0.0 { certified_bound.ln() / ln_d } else { f64::INFINITY },
        actual_exponent,
        gamma_from_measure: 2.0 - 2.0 * alpha - actual_exponent,
        gamma_measured,
        fibers,
    };
    let min_fiber = accounting.fibers.iter().map(|f| f.fiber_size).min().unwrap_or(0);
    log.push("min_fiber", min_fiber as f64, delta.powf(-2.0 * alpha + params.lambda4));
    log.push("certified_bound", certified_bound, e_true);
    log.push("chain_estimate", accounting.chain_estimate, e_true);

    // Projection probe in directions drawn from μ.
    let directions: Vec<Point<f64>> = (0..params.probe_directions)
        .map(|_| {
            let u = j_cells[rng.gen_range(0..j_cells.len())];
            let x = line_1d.center(u) + (rng.gen::<f64>() - 0.5) * delta;
            Point::new(x, 1.0).scale(1.0 / (1.0 + x * x).sqrt())
        })
        .collect();
    let counts = projection_probe(&f_points, &directions, scale);
    let probe = ProjectionProbe {
        min_count: counts.iter().copied().min().unwrap_or(0),
        f_covering: dual.covering_number,
        directions,
        counts,
    };

    let in_omega1 = {
        let mut v = vec![false; lines.len()];
        for &w in &omega1 {
            v[w as usize] = true;
        }
        v
    };
    let nesting = Nesting {
        e1_in_e: heavy.set.is_subset(&work.e_union),
        e2_in_e1: e2.is_subset(&heavy.set),
        e3_in_e2: e3.is_subset(&e2),
        eprime_in_e3: e_prime.is_subset(&e3),
        omega1_in_omega: omega1.iter().all(|&w| (w as usize) < lines.len()),
        omega_prime_in_omega1: omega_prime.iter().all(|&w| in_omega1[w as usize]),
    };
    if !split.partition_exact || !nesting.holds() {
        return Err(Error::InvariantViolation(format!("pipeline structure broken: {nesting:?}")));
    }

    Ok(PipelineTrace {
        params: params.clone(),
        k: scale.k(),
        seed,
        orientation,
        e_measure_input: e_true,
        e_measure,
        gamma_measured,
        pair,
        split,
        omega1,
        localization,
        omega_prime,
        psi_target_k: psi_image.target_scale.k(),
        psi_clipped: psi_image.clipped,
        slope_in_range_fraction,
        distortion,
        a_star_inclusions_hold: split_a.inclusions_hold,
        a_star_nonconcentration_holds: split_a.e_star_nonconcentration_holds,
        selection,
        mu_decay_max_ratio: mu_max,
        dual,
        accounting,
        probe,
        nesting,
        stages: log.stages,
        e1: heavy.set,
        e2,
        e3,
        e_prime,
        psi_image,
        a,
        a_star,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floors_satisfy_constraints() {
        let p = PipelineParams::new(0.4, 0.01, 0.01).unwrap();
        assert!((p.eta3 - (p.eta1 + p.eta2 + 0.01)).abs() < 1e-15);
        assert!(PipelineParams::with_etas(0.4, 0.01, 0.01, [p.eta1 / 2.0, p.eta2, p.eta3, p.eta4, p.eta5]).is_err());
        assert!(PipelineParams::new(0.6, 0.0, 0.01).is_err());
    }

    #[test]
    fn interval_selection_examples() {
        let even: Vec<(u32, u64)> = (0..10).map(|i| (i, 5)).collect();
        assert_eq!(select_intervals(&even).len(), 10);
        let one: Vec<(u32, u64)> = (0..10).map(|i| (i, if i == 3 { 40 } else { 0 })).collect();
        assert_eq!(select_intervals(&one), vec![3]);
    }

    #[test]
    fn split_partition_and_choice() {
        let y1 = Point::new(0.0, 0.0);
        let y2 = Point::new(1.0, 0.0);
        // Two vertical lines through y₁, one through y₂, one through neither.
        let lines = vec![
            Line::new(FRAC_PI_2, 0.0),
            Line::new(FRAC_PI_2 + 0.1, 0.0),
            Line::new(FRAC_PI_2, -1.0),
            Line::new(FRAC_PI_2, -3.0),
        ];
        let s = split_omega(&lines, &[5, 5, 1, 1], y1, y2, 0.01);
        assert!(s.partition_exact);
        assert_eq!((s.ball1.len(), s.ball2.len(), s.neither.len()), (2, 1, 1));
        assert_eq!(s.side_sums, [2, 11]);
        assert_eq!(s.chosen, 2);
    }

    #[test]
    fn certified_bound_is_sound_for_cells() {
        let delta = 1.0 / 64.0;
        let pts: Vec<(Point<f64>, f64)> = (0..50).map(|i| (Point::new(i as f64 * delta, 0.0), 0.0)).collect();
        let (b, _, n) = certified_measure_bound(&pts, delta);
        assert_eq!(n, 50);
        assert!(b <= 50.0 * delta * delta);
    }

    #[test]
    fn local_frame_maps_centers() {
        let s = Scale::new(6).unwrap();
        let origin = CellIndex::new(300, 270);
        for reflect in [false, true] {
            let f = LocalFrame { scale: s, origin, reflect };
            let c = CellIndex::new(310, 250);
            let local = f.cell(c).unwrap();
            let p = f.point(s.center(c));
            assert!(s.center(local).dist(p) < 1e-12);
        }
    }
}
